//! Sampling and per-level labeling of the decomposed configuration space.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{all_pairs_in_collision, exact_collision, Scene};
use crate::kinematics::JointVector;
use crate::par::Exec;
use crate::robot::{JointLimit, RobotModel};

/// Maximum number of components a label can describe.
pub const MAX_LEVELS: usize = 64;

/// Per-component collision flags of one configuration; bit `i` is set when
/// component `i` collides, i.e. the prefix `q[..n_i]` lies in its
/// in-collision subspace.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct LevelLabel {
    bits: u64,
    levels: u8,
}

impl LevelLabel {
    pub fn free(levels: usize) -> Self {
        assert!(levels > 0 && levels <= MAX_LEVELS, "unsupported level count {levels}");
        LevelLabel {
            bits: 0,
            levels: levels as u8,
        }
    }

    pub fn from_flags(flags: &[bool]) -> Self {
        let mut l = Self::free(flags.len());
        for (i, &f) in flags.iter().enumerate() {
            l.set(i, f);
        }
        l
    }

    pub fn from_bits(bits: u64, levels: usize) -> Self {
        let mut l = Self::free(levels);
        l.bits = bits & l.mask();
        l
    }

    fn mask(&self) -> u64 {
        if self.levels as usize == 64 {
            u64::MAX
        } else {
            (1u64 << self.levels) - 1
        }
    }

    pub fn levels(&self) -> usize {
        self.levels as usize
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn flag(&self, level: usize) -> bool {
        debug_assert!(level < self.levels());
        self.bits >> level & 1 == 1
    }

    pub fn set(&mut self, level: usize, collides: bool) {
        assert!(level < self.levels());
        if collides {
            self.bits |= 1 << level;
        } else {
            self.bits &= !(1 << level);
        }
    }

    pub fn flags(&self) -> Vec<bool> {
        (0..self.levels()).map(|i| self.flag(i)).collect()
    }

    /// Smallest colliding level, `None` when free.
    pub fn first_collision_level(&self) -> Option<usize> {
        (self.bits != 0).then(|| self.bits.trailing_zeros() as usize)
    }

    pub fn in_collision(&self) -> bool {
        self.bits != 0
    }

    /// Whether any level in `range` collides.
    pub fn any_in(&self, range: std::ops::Range<usize>) -> bool {
        range.into_iter().any(|i| self.flag(i))
    }
}

impl fmt::Debug for LevelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LevelLabel(")?;
        for i in 0..self.levels() {
            write!(f, "{}", if self.flag(i) { '1' } else { '0' })?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub q: JointVector,
    pub label: LevelLabel,
}

/// Uniform draw inside the joint limits.
pub fn sample_uniform<R: Rng + ?Sized>(limits: &[JointLimit], rng: &mut R) -> JointVector {
    JointVector(
        limits
            .iter()
            .map(|l| if l.lower == l.upper { l.lower } else { rng.random_range(l.lower..=l.upper) })
            .collect(),
    )
}

/// `count` uniform configurations from `seed`, independent of labeling.
pub fn sample_batch(limits: &[JointLimit], count: usize, seed: u64) -> Vec<JointVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_uniform(limits, &mut rng)).collect()
}

/// Samples with exact per-level labels for one robot and scene.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub robot_hash: String,
    pub scene_hash: String,
    pub seed: u64,
    pub dof: usize,
    pub levels: usize,
}

const DATASET_MAGIC: &str = "cspace-dataset";
const DATASET_VERSION: u32 = 1;

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn free_fraction(&self) -> f64 {
        self.samples.iter().filter(|s| !s.label.in_collision()).count() as f64 / self.len().max(1) as f64
    }

    pub fn check_matches(&self, model: &RobotModel, scene: &Scene) -> Result<()> {
        let (r, s) = (model.fingerprint(), scene.fingerprint());
        if self.robot_hash != r {
            return Err(Error::Fingerprint {
                what: "robot",
                found: self.robot_hash.clone(),
                expected: r,
            });
        }
        if self.scene_hash != s {
            return Err(Error::Fingerprint {
                what: "scene",
                found: self.scene_hash.clone(),
                expected: s,
            });
        }
        Ok(())
    }

    /// Text header followed by fixed-width little-endian records.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{DATASET_MAGIC}")?;
        writeln!(w, "version {DATASET_VERSION}")?;
        writeln!(w, "robot-hash {}", self.robot_hash)?;
        writeln!(w, "scene-hash {}", self.scene_hash)?;
        writeln!(w, "seed {}", self.seed)?;
        writeln!(w, "count {}", self.len())?;
        writeln!(w, "dof {}", self.dof)?;
        writeln!(w, "levels {}", self.levels)?;
        writeln!(w, "end-header")?;
        let label_bytes = self.levels.div_ceil(8);
        let mut rec = Vec::with_capacity(self.dof * 8 + label_bytes);
        for s in &self.samples {
            rec.clear();
            for v in s.q.iter() {
                rec.extend_from_slice(&v.to_le_bytes());
            }
            rec.extend_from_slice(&s.label.bits().to_le_bytes()[..label_bytes]);
            w.write_all(&rec)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let bad = |reason: String| Error::format("dataset", reason);
        let mut line = String::new();
        let mut next_line = |r: &mut R| -> Result<String> {
            line.clear();
            r.read_line(&mut line).map_err(|e| bad(e.to_string()))?;
            Ok(line.trim_end().to_string())
        };
        if next_line(&mut r)? != DATASET_MAGIC {
            return Err(bad("missing magic line".into()));
        }
        let mut fields = std::collections::HashMap::new();
        loop {
            let l = next_line(&mut r)?;
            if l == "end-header" {
                break;
            }
            if l.is_empty() {
                return Err(bad("unterminated header".into()));
            }
            let (k, v) = l.split_once(' ').ok_or_else(|| bad(format!("bad header line {l:?}")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| fields.get(k).cloned().ok_or_else(|| bad(format!("missing header field {k}")));
        let num = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| bad(format!("bad number in {k}"))) };
        if num("version")? != DATASET_VERSION as u64 {
            return Err(bad(format!("unsupported version {}", num("version")?)));
        }
        let (count, dof, levels) = (num("count")? as usize, num("dof")? as usize, num("levels")? as usize);
        if levels == 0 || levels > MAX_LEVELS || dof == 0 {
            return Err(bad("bad dof/levels".into()));
        }
        let label_bytes = levels.div_ceil(8);
        let mut rec = vec![0u8; dof * 8 + label_bytes];
        let mut samples = Vec::with_capacity(count);
        for i in 0..count {
            r.read_exact(&mut rec).map_err(|_| bad(format!("truncated at record {i}")))?;
            let q = rec[..dof * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect::<Vec<_>>();
            let mut bits = [0u8; 8];
            bits[..label_bytes].copy_from_slice(&rec[dof * 8..]);
            samples.push(LabeledSample {
                q: JointVector(q),
                label: LevelLabel::from_bits(u64::from_le_bytes(bits), levels),
            });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest).map_err(|e| bad(e.to_string()))? != 0 {
            return Err(bad("trailing bytes after records".into()));
        }
        Ok(Dataset {
            samples,
            robot_hash: get("robot-hash")?,
            scene_hash: get("scene-hash")?,
            seed: num("seed")?,
            dof,
            levels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// Labels `count` uniform samples with the exact checker. Samples are drawn
/// sequentially from `seed`, so the result does not depend on `exec`.
pub fn build_dataset(model: &RobotModel, scene: &Scene, count: usize, seed: u64) -> Dataset {
    build_dataset_with(model, scene, count, seed, Exec::Auto)
}

pub fn build_dataset_with(model: &RobotModel, scene: &Scene, count: usize, seed: u64, exec: Exec) -> Dataset {
    let qs = sample_batch(model.limits(), count, seed);
    let labels = exec.map(&qs, |q| exact_collision(model, scene, q).expect("sampled q has robot dimension"));
    Dataset {
        samples: qs
            .into_iter()
            .zip(labels)
            .map(|(q, label)| LabeledSample { q, label })
            .collect(),
        robot_hash: model.fingerprint(),
        scene_hash: scene.fingerprint(),
        seed,
        dof: model.dof(),
        levels: model.levels(),
    }
}

/// Percentage of samples whose first colliding level is `i`, plus free.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelHistogram {
    pub level_percent: Vec<f64>,
    pub free_percent: f64,
    pub total: usize,
}

impl LevelHistogram {
    /// Share of samples first colliding at one of the levels `0..levels`.
    pub fn first_levels_percent(&self, levels: usize) -> f64 {
        self.level_percent[..levels.min(self.level_percent.len())].iter().sum()
    }
}

pub fn level_histogram(dataset: &Dataset) -> Result<LevelHistogram> {
    histogram_of(dataset.samples.iter().map(|s| s.label), dataset.levels)
}

pub fn histogram_of(labels: impl Iterator<Item = LevelLabel>, levels: usize) -> Result<LevelHistogram> {
    let mut counts = vec![0usize; levels];
    let mut free = 0usize;
    let mut total = 0usize;
    for l in labels {
        total += 1;
        match l.first_collision_level() {
            Some(i) => counts[i] += 1,
            None => free += 1,
        }
    }
    if total == 0 {
        return Err(Error::input("histogram of an empty dataset"));
    }
    let pct = |c: usize| 100.0 * c as f64 / total as f64;
    Ok(LevelHistogram {
        level_percent: counts.into_iter().map(pct).collect(),
        free_percent: pct(free),
        total,
    })
}

/// Outcome of checking the union/intersection properties on fresh samples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecompositionReport {
    pub samples: usize,
    /// Samples where the OR of level flags disagrees with the whole-robot check.
    pub union_violations: usize,
    /// Samples where the AND of level-free flags disagrees with whole-robot free.
    pub intersection_violations: usize,
    /// Samples flagged at some level while the whole robot is reported free.
    pub containment_violations: usize,
    /// Indices of the first few offending samples.
    pub examples: Vec<usize>,
    pub colliding: usize,
}

impl DecompositionReport {
    pub fn violations(&self) -> usize {
        self.union_violations + self.intersection_violations + self.containment_violations
    }

    pub fn ok(&self) -> bool {
        self.violations() == 0
    }
}

pub fn verify_decomposition(model: &RobotModel, scene: &Scene, count: usize, seed: u64) -> DecompositionReport {
    verify_decomposition_with(model, scene, count, seed, Exec::Auto, |q| {
        exact_collision(model, scene, q).expect("sampled q has robot dimension")
    })
}

/// Same as [`verify_decomposition`] with a caller-supplied labeler, so the
/// check can be pointed at a faulty implementation.
pub fn verify_decomposition_with<F>(model: &RobotModel, scene: &Scene, count: usize, seed: u64, exec: Exec, labeler: F) -> DecompositionReport
where
    F: Fn(&[f64]) -> LevelLabel + Sync + Send,
{
    let qs = sample_batch(model.limits(), count, seed);
    let per_sample = exec.map(&qs, |q| {
        let label = labeler(q);
        let oracle = all_pairs_in_collision(model, scene, q).expect("sampled q has robot dimension");
        let union = (0..label.levels()).any(|i| label.flag(i));
        let all_free = (0..label.levels()).all(|i| !label.flag(i));
        let contained = (0..label.levels()).all(|i| !label.flag(i) || oracle);
        (union != oracle, all_free != !oracle, !contained, oracle)
    });
    let mut rep = DecompositionReport {
        samples: count,
        ..Default::default()
    };
    for (i, (u, x, c, hit)) in per_sample.into_iter().enumerate() {
        rep.union_violations += u as usize;
        rep.intersection_violations += x as usize;
        rep.containment_violations += c as usize;
        rep.colliding += hit as usize;
        if (u || x || c) && rep.examples.len() < 16 {
            rep.examples.push(i);
        }
    }
    rep
}
