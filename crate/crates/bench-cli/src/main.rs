use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cspace_core::classifiers::{composite_train, train_single, CoalescingMap, CompositeClassifier, ModelFile};
use cspace_core::cspace::{build_dataset_with, Dataset};
use cspace_core::experiments::{
    bench_hyperparams, run_accuracy, run_decomposition_verify, run_histogram, run_planning, AccuracySpec, DecompositionSpec, HistogramSpec,
    PlanningSpec,
};
use cspace_core::{ElementaryKind, Exec, Hyperparams, PlanParams, RobotModel, Scene, SceneGenParams, SvmParams};

#[derive(Parser)]
#[command(name = "cspace-bench", version, about = "Scenes, datasets, classifiers and benchmark tables for decomposed collision checking")]
struct Cli {
    /// Robot config file; the bundled 6-DOF arm when omitted.
    #[arg(long, global = true)]
    robot: Option<PathBuf>,

    /// Default directory for generated files.
    #[arg(long, global = true, env = "CSPACE_BENCH_OUT", default_value = "results")]
    out_dir: PathBuf,

    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random cube scene as TOML.
    GenScene {
        #[arg(long, default_value_t = 4)]
        obstacles: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Cube side, meters.
        #[arg(long)]
        side: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample and exactly label configurations.
    GenDataset {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a composite (or single) classifier on a dataset file.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// One classifier over the full configuration instead of the composite.
        #[arg(long)]
        single: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single vs composite accuracy, TPR/TNR and query time.
    EvalAccuracy {
        #[arg(long, default_value_t = 4)]
        obstacles: usize,
        #[arg(long, default_value_t = 1)]
        scene_seed: u64,
        #[arg(long, default_value_t = 10_000)]
        train: usize,
        #[arg(long, default_value_t = 10_000)]
        test: usize,
        #[arg(long, default_value_t = 1)]
        train_seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "101,102,103,104,105")]
        test_seeds: Vec<u64>,
        #[command(flatten)]
        model: ModelArgs,
        /// Required composite-minus-single accuracy.
        #[arg(long, default_value_t = 0.05)]
        min_gap: f64,
        /// Required speedup; 1.5 for SVM and 1.1 for KNN when omitted.
        #[arg(long)]
        min_speedup: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Percentage of samples by first colliding level, per obstacle count.
    EvalHistogram {
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        obstacles: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        scene_seed: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 100)]
        sample_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Planning success and time: exact RRT vs single vs composite.
    EvalPlanning {
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        obstacles: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        scene_seed: u64,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 7)]
        pair_seed: u64,
        #[arg(long, default_value_t = 10_000)]
        train: usize,
        #[arg(long, default_value_t = 1)]
        train_seed: u64,
        #[command(flatten)]
        model: ModelArgs,
        /// Per-plan budget, seconds.
        #[arg(long, default_value_t = 3.0)]
        max_time: f64,
        #[arg(long, default_value_t = 0.2)]
        step: f64,
        #[arg(long, default_value_t = 0.05)]
        goal_bias: f64,
        #[arg(long, default_value_t = 0.05)]
        edge_resolution: f64,
        #[arg(long, default_value_t = 0)]
        plan_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the union/intersection properties against the all-pairs oracle.
    VerifyDecomposition {
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,4,8")]
        obstacles: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        scene_seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 200)]
        sample_seed: u64,
        /// Swap in a labeler that drops every collision flag.
        #[arg(long)]
        inject_fault: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SceneArgs {
    /// Scene TOML; otherwise generated from --obstacles and --scene-seed.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    obstacles: usize,
    #[arg(long, default_value_t = 1)]
    scene_seed: u64,
}

impl SceneArgs {
    fn load(&self) -> Result<Scene> {
        match &self.scene {
            Some(p) => Ok(Scene::load(p)?),
            None => Ok(Scene::random(self.obstacles, self.scene_seed, SceneGenParams::default())?),
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value = "svm")]
    kind: ElementaryKind,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 10.0)]
    c: f64,
    /// Fixed kernel width; otherwise scaled from the data.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, default_value_t = bench_hyperparams().svm.gamma_scale)]
    gamma_scale: f64,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
    /// Keep non-effective components as separate levels.
    #[arg(long)]
    no_coalesce: bool,
}

impl ModelArgs {
    fn hyper(&self) -> Hyperparams {
        Hyperparams {
            k: self.k,
            svm: SvmParams {
                c: self.c,
                gamma: self.gamma,
                gamma_scale: self.gamma_scale,
                tol: self.tol,
                max_iter: self.max_iter,
                ..SvmParams::default()
            },
        }
    }
}

struct Ctx {
    model: RobotModel,
    out_dir: PathBuf,
    exec: Exec,
}

impl Ctx {
    /// `explicit` if given, else `name` inside the output directory.
    fn output(&self, explicit: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
        let path = explicit.clone().unwrap_or_else(|| self.out_dir.join(name));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(path)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Prints a check and returns whether it held.
fn check(ok: bool, what: String) -> bool {
    println!("{} {what}", if ok { "ok  " } else { "FAIL" });
    ok
}

fn run(cli: Cli) -> Result<bool> {
    let model = match &cli.robot {
        Some(p) => RobotModel::load(p)?,
        None => RobotModel::ur5(),
    };
    let ctx = Ctx {
        model,
        out_dir: cli.out_dir,
        exec: if cli.sequential { Exec::Sequential } else { Exec::Auto },
    };
    match cli.command {
        Command::GenScene { obstacles, seed, side, out } => {
            let mut params = SceneGenParams::default();
            if let Some(s) = side {
                params.side = s;
            }
            let scene = Scene::random(obstacles, seed, params)?;
            let path = ctx.output(&out, &format!("scene-{obstacles}-{seed}.toml"))?;
            scene.save(&path)?;
            println!("wrote {} ({} obstacles, fingerprint {})", path.display(), obstacles, scene.fingerprint());
            Ok(true)
        }
        Command::GenDataset { scene, count, seed, out } => {
            let s = scene.load()?;
            let data = build_dataset_with(&ctx.model, &s, count, seed, ctx.exec);
            let path = ctx.output(&out, &format!("dataset-{}-{count}-{seed}.bin", s.obstacles.len()))?;
            data.save(&path)?;
            let free = if data.is_empty() { 0.0 } else { 100.0 * data.free_fraction() };
            println!("wrote {} ({count} samples, {free:.1}% free)", path.display());
            Ok(true)
        }
        Command::Train {
            dataset,
            scene,
            model: margs,
            single,
            out,
        } => {
            let data = Dataset::load(&dataset)?;
            if scene.scene.is_some() {
                data.check_matches(&ctx.model, &scene.load()?)?;
            }
            let hyper = margs.hyper();
            let classifier = if single {
                let s = train_single(&data, margs.kind, &hyper)?;
                CompositeClassifier::new(CoalescingMap::single(ctx.model.prefix_dims())?, vec![s])?
            } else {
                let map = if margs.no_coalesce {
                    CoalescingMap::identity(ctx.model.prefix_dims())?
                } else {
                    CoalescingMap::from_model(&ctx.model)?
                };
                composite_train(&data, &map, margs.kind, &hyper)?
            };
            let file = ModelFile {
                robot_hash: data.robot_hash.clone(),
                scene_hash: data.scene_hash.clone(),
                kind: margs.kind,
                hyper,
                classifier,
            };
            let tag = if single { "single" } else { "composite" };
            let path = ctx.output(&out, &format!("{tag}-{}.model", margs.kind))?;
            file.save(&path)?;
            println!("wrote {} ({} levels)", path.display(), file.classifier.level_count());
            Ok(true)
        }
        Command::EvalAccuracy {
            obstacles,
            scene_seed,
            train,
            test,
            train_seed,
            test_seeds,
            model: margs,
            min_gap,
            min_speedup,
            out,
        } => {
            if train == 0 || test == 0 {
                bail!("sample counts must be at least 1");
            }
            let spec = AccuracySpec {
                obstacles,
                scene_seed,
                train,
                test,
                train_seed,
                test_seeds,
                kind: margs.kind,
                hyper: margs.hyper(),
                coalesce: !margs.no_coalesce,
                ..AccuracySpec::default()
            };
            let rep = run_accuracy(&ctx.model, &spec, ctx.exec)?;
            let path = ctx.output(&out, &format!("accuracy-{}-{obstacles}.csv", margs.kind))?;
            rep.write_csv(create(&path)?)?;
            for r in [&rep.single, &rep.composite] {
                println!(
                    "{:<14} acc {:.4} ± {:.4}  tpr {:.4}  tnr {:.4}  {:.2} µs/query",
                    r.method, r.accuracy, r.accuracy_sd, r.tpr, r.tnr, r.query_us
                );
            }
            let min_speedup = min_speedup.unwrap_or(match margs.kind {
                ElementaryKind::Svm => 1.5,
                ElementaryKind::Knn => 1.1,
            });
            let gap = rep.composite.accuracy - rep.single.accuracy;
            let a = check(gap >= min_gap, format!("accuracy gap {gap:.4} >= {min_gap}"));
            let b = check(
                rep.composite.speedup >= min_speedup,
                format!("speedup {:.3} >= {min_speedup}", rep.composite.speedup),
            );
            println!("wrote {}", path.display());
            Ok(a && b)
        }
        Command::EvalHistogram {
            obstacles,
            scene_seed,
            samples,
            sample_seed,
            out,
        } => {
            if samples == 0 {
                bail!("sample count must be at least 1");
            }
            let spec = HistogramSpec {
                obstacles: obstacles.clone(),
                scene_seed,
                samples,
                sample_seed,
            };
            let rep = run_histogram(&ctx.model, &spec, ctx.exec)?;
            let path = ctx.output(&out, "histogram.csv")?;
            rep.write_csv(create(&path)?)?;
            let mut ok = true;
            for (n, h) in &rep.rows {
                let sum: f64 = h.level_percent.iter().sum::<f64>() + h.free_percent;
                println!("{n} obstacles: free {:.1}%, first three levels {:.1}%", h.free_percent, h.first_levels_percent(3));
                ok &= check((sum - 100.0).abs() < 1e-9, format!("{n} obstacles: row sums to 100"));
            }
            if obstacles.windows(2).all(|w| w[0] < w[1]) && obstacles.len() > 1 {
                ok &= check(rep.free_decreasing(), "free percentage decreases with obstacle count".into());
            }
            println!("wrote {}", path.display());
            Ok(ok)
        }
        Command::EvalPlanning {
            obstacles,
            scene_seed,
            pairs,
            pair_seed,
            train,
            train_seed,
            model: margs,
            max_time,
            step,
            goal_bias,
            edge_resolution,
            plan_seed,
            out,
        } => {
            if pairs == 0 || train == 0 {
                bail!("pair and sample counts must be at least 1");
            }
            let spec = PlanningSpec {
                obstacles,
                scene_seed,
                pairs,
                pair_seed,
                train,
                train_seed,
                kind: margs.kind,
                hyper: margs.hyper(),
                params: PlanParams {
                    step,
                    goal_bias,
                    max_time,
                    edge_resolution,
                    seed: plan_seed,
                    max_iterations: None,
                },
            };
            let rep = run_planning(&ctx.model, &spec, ctx.exec)?;
            let path = ctx.output(&out, &format!("planning-{}.csv", margs.kind))?;
            rep.write_csv(create(&path)?)?;
            let mut ok = true;
            for &n in &spec.obstacles {
                for r in rep.rows.iter().filter(|r| r.obstacles == n) {
                    println!(
                        "{n} obstacles {:<14} {:>3}/{} success, {:.1} ms, {:.0} exact checks",
                        r.method, r.successes, r.pairs, r.mean_time_ms, r.mean_exact_checks
                    );
                    ok &= check(r.violations == 0, format!("{n} obstacles {}: exact-valid paths", r.method));
                }
                let single = rep.row(n, &format!("single-{}", margs.kind)).map_or(0, |r| r.successes);
                let composite = rep.row(n, &format!("composite-{}", margs.kind)).map_or(0, |r| r.successes);
                ok &= check(composite >= single, format!("{n} obstacles: composite successes {composite} >= single {single}"));
            }
            println!("wrote {}", path.display());
            Ok(ok)
        }
        Command::VerifyDecomposition {
            obstacles,
            scene_seed,
            samples,
            sample_seed,
            inject_fault,
            out,
        } => {
            let spec = DecompositionSpec {
                obstacles,
                scene_seed,
                samples,
                sample_seed,
                inject_fault,
            };
            let rep = run_decomposition_verify(&ctx.model, &spec, ctx.exec)?;
            let path = ctx.output(&out, "decomposition.csv")?;
            rep.write_csv(create(&path)?)?;
            let mut ok = true;
            for (n, r) in &rep.rows {
                ok &= check(r.ok(), format!("{n} obstacles: {} violations over {} samples", r.violations(), r.samples));
            }
            println!("wrote {}", path.display());
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
