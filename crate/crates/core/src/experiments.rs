//! Experiment runners behind the benchmark CLI: classifier accuracy and
//! query speed, per-level collision histograms, planning success, and
//! decomposition checks. Each report can be written as CSV whose first line
//! is a `#` comment naming the schema version, seeds and a config hash.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use crate::classifiers::{
    composite_train, train_single, CoalescingMap, CompositeClassifier, Elementary, ElementaryClassifier, ElementaryKind, Hyperparams, Label,
};
use crate::cspace::{build_dataset_with, histogram_of, sample_batch, verify_decomposition_with, DecompositionReport, LevelHistogram, LevelLabel};
use crate::error::{Error, Result};
use crate::geometry::{exact_collision, in_collision, Scene, SceneGenParams};
use crate::kinematics::JointVector;
use crate::par::Exec;
use crate::planner::{path_violations, plan_with_learned_checker, rrt_plan, CollisionChecker, ExactChecker, PlanParams, PlanResult};
use crate::robot::RobotModel;

pub const SCHEMA_VERSION: u32 = 1;

/// Kernel-width multiplier used by the benchmarks. The plain default width
/// spans most of the joint range and underfits; 4x gave the best
/// single-classifier accuracy in a sweep over {1, 4, 10, 30} on a
/// validation split (train seed 1, test seed 2, 4-box scene).
pub const BENCH_GAMMA_SCALE: f64 = 4.0;

/// Hyperparameters shared by every classifier in the benchmarks.
pub fn bench_hyperparams() -> Hyperparams {
    let mut h = Hyperparams::default();
    h.svm.gamma_scale = BENCH_GAMMA_SCALE;
    h
}

/// The benchmark scenes: `obstacles` cubes from the default generator.
pub fn standard_scene(obstacles: usize, seed: u64) -> Result<Scene> {
    Scene::random(obstacles, seed, SceneGenParams::default())
}

fn config_hash(model: &RobotModel, spec: &impl std::fmt::Debug) -> String {
    crate::fingerprint(format!("{}|{spec:?}", model.fingerprint()).as_bytes())
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Confusion counts with FREE as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Free, Label::Free) => self.tp += 1,
            (Label::Collision, Label::Collision) => self.tn += 1,
            (Label::Collision, Label::Free) => self.fp += 1,
            (Label::Free, Label::Collision) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// Recall on free samples; 1 when there are none.
    pub fn tpr(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    /// Recall on colliding samples; 1 when there are none.
    pub fn tnr(&self) -> f64 {
        if self.tn + self.fp == 0 {
            1.0
        } else {
            self.tn as f64 / (self.tn + self.fp) as f64
        }
    }
}

/// Scores `predict` against the overall exact labels of `samples`.
pub fn confusion(samples: &[(JointVector, LevelLabel)], predict: impl Fn(&[f64]) -> Label) -> Confusion {
    let mut c = Confusion::default();
    for (q, l) in samples {
        c.add(Label::from_collision(l.in_collision()), predict(q));
    }
    c
}

/// Median over `reps` sequential passes of the per-query time, microseconds.
pub fn time_per_query_us(queries: &[JointVector], reps: usize, predict: impl Fn(&[f64]) -> Label) -> f64 {
    let times = (0..reps.max(1))
        .map(|_| {
            let t = Instant::now();
            for q in queries {
                std::hint::black_box(predict(std::hint::black_box(q)));
            }
            t.elapsed().as_secs_f64() * 1e6 / queries.len().max(1) as f64
        })
        .collect();
    median(times)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracySpec {
    pub obstacles: usize,
    pub scene_seed: u64,
    pub train: usize,
    pub test: usize,
    pub train_seed: u64,
    /// One fresh test set per seed; metrics are reported as mean and sample
    /// standard deviation over them.
    pub test_seeds: Vec<u64>,
    pub kind: ElementaryKind,
    pub hyper: Hyperparams,
    /// Passes per timing measurement; the median is kept.
    pub timing_repetitions: usize,
    /// Merge non-effective components as the robot config says.
    pub coalesce: bool,
}

impl Default for AccuracySpec {
    fn default() -> Self {
        AccuracySpec {
            obstacles: 4,
            scene_seed: 1,
            train: 10_000,
            test: 10_000,
            train_seed: 1,
            test_seeds: (101..=105).collect(),
            kind: ElementaryKind::Svm,
            hyper: bench_hyperparams(),
            timing_repetitions: 5,
            coalesce: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub method: String,
    pub tpr: f64,
    pub tpr_sd: f64,
    pub tnr: f64,
    pub tnr_sd: f64,
    pub accuracy: f64,
    pub accuracy_sd: f64,
    /// `(ours - baseline) / baseline` accuracy; 0 for the baseline itself.
    pub improvement: f64,
    pub query_us: f64,
    pub query_us_sd: f64,
    /// Baseline time over this method's time.
    pub speedup: f64,
    /// Mean elementary classifiers evaluated per query.
    pub mean_levels: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyReport {
    pub spec: AccuracySpec,
    pub single: MetricsRow,
    pub composite: MetricsRow,
    /// Percentage of test queries the composite rejected at each level.
    pub rejected_percent: Vec<f64>,
    pub config_hash: String,
}

impl AccuracyReport {
    /// Share of test queries rejected by the first `levels` levels.
    pub fn rejected_in_first(&self, levels: usize) -> f64 {
        self.rejected_percent.iter().take(levels).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let s = &self.spec;
        let comment = format!(
            "accuracy v{SCHEMA_VERSION}; positive=free; scene={}-box seed={}; train={} seed={}; test={} seeds={:?}; kind={}; timing=median-of-{}; config={}",
            s.obstacles, s.scene_seed, s.train, s.train_seed, s.test, s.test_seeds, s.kind, s.timing_repetitions, self.config_hash
        );
        let header = [
            "method", "tpr", "tpr_sd", "tnr", "tnr_sd", "accuracy", "accuracy_sd", "improvement", "query_us", "query_us_sd", "speedup", "mean_levels",
        ];
        let rows = [&self.single, &self.composite].map(|r| {
            vec![
                r.method.clone(),
                format!("{:.4}", r.tpr),
                format!("{:.4}", r.tpr_sd),
                format!("{:.4}", r.tnr),
                format!("{:.4}", r.tnr_sd),
                format!("{:.4}", r.accuracy),
                format!("{:.4}", r.accuracy_sd),
                format!("{:.4}", r.improvement),
                format!("{:.3}", r.query_us),
                format!("{:.3}", r.query_us_sd),
                format!("{:.3}", r.speedup),
                format!("{:.3}", r.mean_levels),
            ]
        });
        write_table(w, &comment, &header, rows)
    }
}

fn write_table<W: Write, R: IntoIterator<Item = Vec<String>>>(mut w: W, comment: &str, header: &[&str], rows: R) -> Result<()> {
    writeln!(w, "# {comment}").map_err(|e| Error::io("<csv>", e))?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for r in rows {
        out.write_record(&r)?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn labeled(model: &RobotModel, scene: &Scene, count: usize, seed: u64, exec: Exec) -> Vec<(JointVector, LevelLabel)> {
    build_dataset_with(model, scene, count, seed, exec)
        .samples
        .into_iter()
        .map(|s| (s.q, s.label))
        .collect()
}

/// Trained single and composite classifiers for an accuracy spec.
pub struct TrainedPair {
    pub single: Elementary,
    pub composite: CompositeClassifier,
}

pub fn train_pair(model: &RobotModel, scene: &Scene, spec: &AccuracySpec, exec: Exec) -> Result<TrainedPair> {
    let train = build_dataset_with(model, scene, spec.train, spec.train_seed, exec);
    let free = train.samples.iter().filter(|s| !s.label.in_collision()).count();
    if free == 0 || free == train.len() {
        return Err(Error::input(format!(
            "{}-box scene seed {} with training seed {}: training set has a single class",
            spec.obstacles, spec.scene_seed, spec.train_seed
        )));
    }
    let map = if spec.coalesce {
        CoalescingMap::from_model(model)?
    } else {
        CoalescingMap::identity(model.prefix_dims())?
    };
    Ok(TrainedPair {
        single: train_single(&train, spec.kind, &spec.hyper)?,
        composite: composite_train(&train, &map, spec.kind, &spec.hyper)?,
    })
}

/// Single classifier on the full configuration versus the composite, both
/// trained on the same set and scored on the same fresh test sets.
pub fn run_accuracy(model: &RobotModel, spec: &AccuracySpec, exec: Exec) -> Result<AccuracyReport> {
    let scene = standard_scene(spec.obstacles, spec.scene_seed)?;
    let trained = train_pair(model, &scene, spec, exec)?;
    score_pair(model, &scene, spec, &trained.single, &trained.composite, exec)
}

/// Scores any single/composite pair the way [`run_accuracy`] does.
pub fn score_pair<S, C>(
    model: &RobotModel,
    scene: &Scene,
    spec: &AccuracySpec,
    single: &S,
    composite: &CompositeClassifier<C>,
    exec: Exec,
) -> Result<AccuracyReport>
where
    S: ElementaryClassifier,
    C: ElementaryClassifier,
{
    if spec.test_seeds.is_empty() || spec.test == 0 {
        return Err(Error::input("accuracy experiment needs at least one test sample and seed"));
    }
    let mut s_conf = Vec::new();
    let mut c_conf = Vec::new();
    let mut s_time = Vec::new();
    let mut c_time = Vec::new();
    let mut levels = Vec::new();
    let mut rejected = vec![0usize; composite.level_count()];
    let mut total = 0usize;
    for &seed in &spec.test_seeds {
        let test = labeled(model, scene, spec.test, seed, exec);
        s_conf.push(confusion(&test, |q| single.predict(q)));
        c_conf.push(confusion(&test, |q| composite.predict_unchecked(q).label));
        let mut evaluated = 0usize;
        for (q, _) in &test {
            let p = composite.predict_unchecked(q);
            evaluated += p.evaluated;
            if let Some(r) = p.rejected_at {
                rejected[r] += 1;
            }
        }
        total += test.len();
        levels.push(evaluated as f64 / test.len() as f64);
        let queries: Vec<JointVector> = test.into_iter().map(|(q, _)| q).collect();
        s_time.push(time_per_query_us(&queries, spec.timing_repetitions, |q| single.predict(q)));
        c_time.push(time_per_query_us(&queries, spec.timing_repetitions, |q| composite.predict_unchecked(q).label));
    }
    let stat = |cs: &[Confusion], f: fn(&Confusion) -> f64| mean_sd(&cs.iter().map(f).collect::<Vec<_>>());
    let (st, ct) = (mean_sd(&s_time), mean_sd(&c_time));
    let row = |method: String, cs: &[Confusion], time: (f64, f64), base_acc: Option<f64>, speedup: f64, mean_levels: f64| {
        let (tpr, tpr_sd) = stat(cs, Confusion::tpr);
        let (tnr, tnr_sd) = stat(cs, Confusion::tnr);
        let (accuracy, accuracy_sd) = stat(cs, Confusion::accuracy);
        MetricsRow {
            method,
            tpr,
            tpr_sd,
            tnr,
            tnr_sd,
            accuracy,
            accuracy_sd,
            improvement: base_acc.map_or(0.0, |b| (accuracy - b) / b),
            query_us: time.0,
            query_us_sd: time.1,
            speedup,
            mean_levels,
        }
    };
    let single_row = row(format!("single-{}", spec.kind), &s_conf, st, None, 1.0, 1.0);
    let composite_row = row(
        format!("composite-{}", spec.kind),
        &c_conf,
        ct,
        Some(single_row.accuracy),
        st.0 / ct.0,
        mean_sd(&levels).0,
    );
    Ok(AccuracyReport {
        spec: spec.clone(),
        single: single_row,
        composite: composite_row,
        rejected_percent: rejected.iter().map(|&r| 100.0 * r as f64 / total as f64).collect(),
        config_hash: config_hash(model, spec),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramSpec {
    pub obstacles: Vec<usize>,
    pub scene_seed: u64,
    pub samples: usize,
    pub sample_seed: u64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec {
            obstacles: vec![1, 2, 4, 8],
            scene_seed: 1,
            samples: 10_000,
            sample_seed: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramReport {
    pub spec: HistogramSpec,
    pub rows: Vec<(usize, LevelHistogram)>,
    pub config_hash: String,
}

impl HistogramReport {
    pub fn free_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].1.free_percent < w[0].1.free_percent)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let s = &self.spec;
        let comment = format!(
            "histogram v{SCHEMA_VERSION}; percent of samples by first colliding level; scene seed={}; samples={} seed={}; config={}",
            s.scene_seed, s.samples, s.sample_seed, self.config_hash
        );
        let levels = self.rows.first().map_or(0, |r| r.1.level_percent.len());
        let mut header = vec!["obstacles".to_string()];
        header.extend((1..=levels).map(|i| format!("level_{i}")));
        header.push("free".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = self.rows.iter().map(|(n, h)| {
            let mut r = vec![n.to_string()];
            r.extend(h.level_percent.iter().map(|p| format!("{p:.2}")));
            r.push(format!("{:.2}", h.free_percent));
            r
        });
        write_table(w, &comment, &header, rows)
    }
}

pub fn run_histogram(model: &RobotModel, spec: &HistogramSpec, exec: Exec) -> Result<HistogramReport> {
    let mut rows = Vec::new();
    for &n in &spec.obstacles {
        let scene = standard_scene(n, spec.scene_seed)?;
        let data = build_dataset_with(model, &scene, spec.samples, spec.sample_seed, exec);
        rows.push((n, histogram_of(data.samples.iter().map(|s| s.label), model.levels())?));
    }
    Ok(HistogramReport {
        spec: spec.clone(),
        rows,
        config_hash: config_hash(model, spec),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanningSpec {
    pub obstacles: Vec<usize>,
    pub scene_seed: u64,
    pub pairs: usize,
    pub pair_seed: u64,
    pub train: usize,
    pub train_seed: u64,
    pub kind: ElementaryKind,
    pub hyper: Hyperparams,
    pub params: PlanParams,
}

impl Default for PlanningSpec {
    fn default() -> Self {
        PlanningSpec {
            obstacles: vec![2, 4, 8],
            scene_seed: 1,
            pairs: 100,
            pair_seed: 7,
            train: 10_000,
            train_seed: 1,
            kind: ElementaryKind::Svm,
            hyper: bench_hyperparams(),
            params: PlanParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanningRow {
    pub obstacles: usize,
    pub method: String,
    pub pairs: usize,
    pub successes: usize,
    /// Mean over successful plans.
    pub mean_time_ms: f64,
    pub mean_exact_checks: f64,
    pub mean_approx_checks: f64,
    pub mean_repaired: f64,
    /// Colliding waypoints and edge points over all successful paths.
    pub violations: usize,
}

impl PlanningRow {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.pairs as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanningReport {
    pub spec: PlanningSpec,
    pub rows: Vec<PlanningRow>,
    pub config_hash: String,
}

impl PlanningReport {
    pub fn row(&self, obstacles: usize, method: &str) -> Option<&PlanningRow> {
        self.rows.iter().find(|r| r.obstacles == obstacles && r.method == method)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let s = &self.spec;
        let comment = format!(
            "planning v{SCHEMA_VERSION}; scene seed={}; pairs={} seed={}; train={} seed={}; kind={}; max_time={}s step={} goal_bias={} resolution={}; config={}",
            s.scene_seed,
            s.pairs,
            s.pair_seed,
            s.train,
            s.train_seed,
            s.kind,
            s.params.max_time,
            s.params.step,
            s.params.goal_bias,
            s.params.edge_resolution,
            self.config_hash
        );
        let header = [
            "obstacles", "method", "pairs", "successes", "success_rate", "mean_time_ms", "mean_exact_checks", "mean_approx_checks", "mean_repaired", "violations",
        ];
        let rows = self.rows.iter().map(|r| {
            vec![
                r.obstacles.to_string(),
                r.method.clone(),
                r.pairs.to_string(),
                r.successes.to_string(),
                format!("{:.2}", r.success_rate()),
                format!("{:.1}", r.mean_time_ms),
                format!("{:.1}", r.mean_exact_checks),
                format!("{:.1}", r.mean_approx_checks),
                format!("{:.2}", r.mean_repaired),
                r.violations.to_string(),
            ]
        });
        write_table(w, &comment, &header, rows)
    }
}

/// `count` source/target pairs, both exact-free, drawn from `seed`.
pub fn free_pairs(model: &RobotModel, scene: &Scene, count: usize, seed: u64) -> Result<Vec<(JointVector, JointVector)>> {
    let mut out = Vec::with_capacity(2 * count);
    let mut batch = 0u64;
    while out.len() < 2 * count {
        if batch > 1000 {
            return Err(Error::input("could not find enough collision-free configurations"));
        }
        let qs = sample_batch(model.limits(), 4 * count.max(16), seed.wrapping_add(batch << 32));
        for q in qs {
            if out.len() < 2 * count && !in_collision(model, scene, &q)? {
                out.push(q);
            }
        }
        batch += 1;
    }
    Ok(out.chunks_exact(2).map(|p| (p[0].clone(), p[1].clone())).collect())
}

fn summarize(obstacles: usize, method: String, model: &RobotModel, scene: &Scene, res: f64, results: &[PlanResult]) -> PlanningRow {
    let ok: Vec<&PlanResult> = results.iter().filter(|r| r.is_success()).collect();
    let n = ok.len().max(1) as f64;
    PlanningRow {
        obstacles,
        method,
        pairs: results.len(),
        successes: ok.len(),
        mean_time_ms: ok.iter().map(|r| r.stats.wall_seconds * 1e3).sum::<f64>() / n,
        mean_exact_checks: ok.iter().map(|r| r.stats.exact_checks as f64).sum::<f64>() / n,
        mean_approx_checks: ok.iter().map(|r| r.stats.approximate_checks as f64).sum::<f64>() / n,
        mean_repaired: ok.iter().map(|r| r.stats.repaired_waypoints as f64).sum::<f64>() / n,
        violations: ok.iter().map(|r| path_violations(model, scene, &r.path, res)).sum(),
    }
}

/// Exact-only RRT, single-classifier pipeline and composite pipeline on the
/// same pairs and budgets, per scene.
pub fn run_planning(model: &RobotModel, spec: &PlanningSpec, exec: Exec) -> Result<PlanningReport> {
    spec.params.validate()?;
    let mut rows = Vec::new();
    for &n in &spec.obstacles {
        let scene = standard_scene(n, spec.scene_seed)?;
        let acc = AccuracySpec {
            obstacles: n,
            scene_seed: spec.scene_seed,
            train: spec.train,
            train_seed: spec.train_seed,
            kind: spec.kind,
            hyper: spec.hyper,
            ..AccuracySpec::default()
        };
        let trained = train_pair(model, &scene, &acc, exec)?;
        let pairs = free_pairs(model, &scene, spec.pairs, spec.pair_seed)?;
        let exact = ExactChecker { model, scene: &scene };
        let checkers: [(String, &(dyn CollisionChecker + Sync)); 3] = [
            ("exact-rrt".into(), &exact),
            (format!("single-{}", spec.kind), &trained.single),
            (format!("composite-{}", spec.kind), &trained.composite),
        ];
        for (name, checker) in checkers {
            let results = exec
                .map_range(pairs.len(), |i| {
                    let (s, t) = &pairs[i];
                    let params = PlanParams {
                        seed: spec.params.seed.wrapping_add(i as u64),
                        ..spec.params.clone()
                    };
                    if checker.is_exact() {
                        rrt_plan(checker, model, &scene, s, t, &params)
                    } else {
                        plan_with_learned_checker(checker, model, &scene, s, t, &params)
                    }
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let row = summarize(n, name, model, &scene, spec.params.edge_resolution, &results);
            log::info!(
                "{}-box {}: {}/{} in {:.0} ms mean, {:.0} exact checks",
                n,
                row.method,
                row.successes,
                row.pairs,
                row.mean_time_ms,
                row.mean_exact_checks
            );
            rows.push(row);
        }
    }
    Ok(PlanningReport {
        spec: spec.clone(),
        rows,
        config_hash: config_hash(model, spec),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionSpec {
    pub obstacles: Vec<usize>,
    pub scene_seed: u64,
    pub samples: usize,
    pub sample_seed: u64,
    /// Replace the labeler with one that drops every collision flag.
    pub inject_fault: bool,
}

impl Default for DecompositionSpec {
    fn default() -> Self {
        DecompositionSpec {
            obstacles: vec![0, 1, 2, 4, 8],
            scene_seed: 1,
            samples: 100_000,
            sample_seed: 200,
            inject_fault: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionVerifyReport {
    pub spec: DecompositionSpec,
    pub rows: Vec<(usize, DecompositionReport)>,
    pub config_hash: String,
}

impl DecompositionVerifyReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().map(|r| r.1.violations()).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let s = &self.spec;
        let comment = format!(
            "decomposition v{SCHEMA_VERSION}; oracle=all-pairs; scene seed={}; samples={} seed={}; fault={}; config={}",
            s.scene_seed, s.samples, s.sample_seed, s.inject_fault, self.config_hash
        );
        let header = ["obstacles", "samples", "colliding", "union_violations", "intersection_violations", "containment_violations"];
        let rows = self.rows.iter().map(|(n, r)| {
            vec![
                n.to_string(),
                r.samples.to_string(),
                r.colliding.to_string(),
                r.union_violations.to_string(),
                r.intersection_violations.to_string(),
                r.containment_violations.to_string(),
            ]
        });
        write_table(w, &comment, &header, rows)
    }
}

pub fn run_decomposition_verify(model: &RobotModel, spec: &DecompositionSpec, exec: Exec) -> Result<DecompositionVerifyReport> {
    let mut rows = Vec::new();
    for &n in &spec.obstacles {
        let scene = standard_scene(n, spec.scene_seed)?;
        let levels = model.levels();
        let report = verify_decomposition_with(model, &scene, spec.samples, spec.sample_seed, exec, |q| {
            if spec.inject_fault {
                LevelLabel::free(levels)
            } else {
                exact_collision(model, &scene, q).expect("sampled q has robot dimension")
            }
        });
        rows.push((n, report));
    }
    Ok(DecompositionVerifyReport {
        spec: spec.clone(),
        rows,
        config_hash: config_hash(model, spec),
    })
}

/// Oracle composite over the standard scene, for sanity runs.
pub fn oracle_composite(model: &RobotModel, scene: &Scene) -> Result<CompositeClassifier<crate::classifiers::ComponentOracle>> {
    let map = CoalescingMap::from_model(model)?;
    crate::classifiers::ComponentOracle::composite(Arc::new(model.clone()), Arc::new(scene.clone()), &map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_rates() {
        let mut c = Confusion::default();
        c.add(Label::Free, Label::Free);
        c.add(Label::Free, Label::Collision);
        c.add(Label::Collision, Label::Collision);
        c.add(Label::Collision, Label::Collision);
        assert_eq!((c.tp, c.fn_, c.tn, c.fp), (1, 1, 2, 0));
        assert_eq!(c.accuracy(), 0.75);
        assert_eq!(c.tpr(), 0.5);
        assert_eq!(c.tnr(), 1.0);
    }

    #[test]
    fn median_and_spread() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        let (m, sd) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((sd - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn oracle_scores_perfectly() {
        let model = RobotModel::ur5();
        let scene = standard_scene(4, 1).unwrap();
        let oracle = oracle_composite(&model, &scene).unwrap();
        let single = crate::classifiers::ComponentOracle::composite(
            Arc::new(model.clone()),
            Arc::new(scene.clone()),
            &CoalescingMap::single(model.prefix_dims()).unwrap(),
        )
        .unwrap();
        struct Whole<'a>(&'a CompositeClassifier<crate::classifiers::ComponentOracle>);
        impl ElementaryClassifier for Whole<'_> {
            fn dim(&self) -> usize {
                self.0.dof()
            }
            fn predict(&self, x: &[f64]) -> Label {
                self.0.predict_unchecked(x).label
            }
            fn update(&mut self, _: &[f64], _: Label) -> Result<()> {
                Ok(())
            }
        }
        let spec = AccuracySpec {
            test: 500,
            test_seeds: vec![1, 2],
            timing_repetitions: 1,
            ..AccuracySpec::default()
        };
        let rep = score_pair(&model, &scene, &spec, &Whole(&single), &oracle, Exec::Auto).unwrap();
        for row in [&rep.single, &rep.composite] {
            assert_eq!((row.accuracy, row.tpr, row.tnr), (1.0, 1.0, 1.0));
        }
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# accuracy v1; positive=free"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn histogram_rows_partition() {
        let spec = HistogramSpec {
            obstacles: vec![0, 1, 4],
            samples: 2000,
            ..HistogramSpec::default()
        };
        let rep = run_histogram(&RobotModel::ur5(), &spec, Exec::Auto).unwrap();
        for (_, h) in &rep.rows {
            let sum: f64 = h.level_percent.iter().sum::<f64>() + h.free_percent;
            assert!((sum - 100.0).abs() < 1e-9);
        }
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "obstacles,level_1,level_2,level_3,level_4,level_5,level_6,free");
    }

    #[test]
    fn obstacle_free_robot_without_self_contact_is_all_free() {
        let model = RobotModel::ur5_3dof();
        let spec = HistogramSpec {
            obstacles: vec![0],
            samples: 1000,
            ..HistogramSpec::default()
        };
        let rep = run_histogram(&model, &spec, Exec::Auto).unwrap();
        let expected = build_dataset_with(&model, &Scene::empty(), 1000, spec.sample_seed, Exec::Auto).free_fraction() * 100.0;
        assert_eq!(rep.rows[0].1.free_percent, expected);
    }

    #[test]
    fn fault_injection_is_detected() {
        let model = RobotModel::ur5();
        let mut spec = DecompositionSpec {
            obstacles: vec![0, 4],
            samples: 3000,
            ..DecompositionSpec::default()
        };
        assert_eq!(run_decomposition_verify(&model, &spec, Exec::Auto).unwrap().violations(), 0);
        spec.inject_fault = true;
        assert!(run_decomposition_verify(&model, &spec, Exec::Auto).unwrap().violations() > 0);
    }

    #[test]
    fn small_planning_run_is_exact_valid() {
        let spec = PlanningSpec {
            obstacles: vec![2],
            pairs: 4,
            train: 1000,
            kind: ElementaryKind::Knn,
            params: PlanParams {
                max_time: 1.0,
                ..PlanParams::default()
            },
            ..PlanningSpec::default()
        };
        let rep = run_planning(&RobotModel::ur5(), &spec, Exec::Auto).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert!(rep.rows.iter().all(|r| r.violations == 0 && r.pairs == 4));
    }
}
