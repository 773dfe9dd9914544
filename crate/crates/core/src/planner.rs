//! Goal-biased RRT in joint space, with exact verification and repair of
//! paths planned against a learned checker.

use std::cell::Cell;
use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classifiers::{CompositeClassifier, Elementary, ElementaryClassifier, Label};
use crate::classifiers::NeighborIndex;
use crate::cspace::sample_uniform;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{in_collision, Scene};
use crate::kinematics::{joint_distance, JointVector};
use crate::robot::{JointLimit, RobotModel};

/// Stream offset separating the repair RNG from the planning RNG.
const REPAIR_STREAM: u64 = 0x5eed_0f4e_9a1e;
const PERTURB_TRIES: usize = 100;
const PERTURB_SIGMA: f64 = 0.02;
/// Half-widths (rad) of the boxes a repair bridge samples in, tried in
/// order before falling back to the full joint limits.
const BRIDGE_MARGINS: [f64; 3] = [0.5, 1.0, 2.0];
/// Iteration cap for each boxed bridge attempt.
const BRIDGE_ITERATIONS: usize = 500;

/// Answers "is this configuration free?".
pub trait CollisionChecker {
    fn is_free(&self, q: &[f64]) -> bool;

    /// Whether answers come from the geometry rather than a model.
    fn is_exact(&self) -> bool;
}

pub struct ExactChecker<'a> {
    pub model: &'a RobotModel,
    pub scene: &'a Scene,
}

impl CollisionChecker for ExactChecker<'_> {
    fn is_free(&self, q: &[f64]) -> bool {
        !in_collision(self.model, self.scene, q).expect("planner configurations have robot dimension")
    }

    fn is_exact(&self) -> bool {
        true
    }
}

impl<C: ElementaryClassifier> CollisionChecker for CompositeClassifier<C> {
    fn is_free(&self, q: &[f64]) -> bool {
        self.predict_unchecked(q).label == Label::Free
    }

    fn is_exact(&self) -> bool {
        false
    }
}

impl CollisionChecker for Elementary {
    fn is_free(&self, q: &[f64]) -> bool {
        self.predict(q) == Label::Free
    }

    fn is_exact(&self) -> bool {
        false
    }
}

struct Counted<'a> {
    inner: &'a dyn CollisionChecker,
    calls: Cell<u64>,
}

impl<'a> Counted<'a> {
    fn new(inner: &'a dyn CollisionChecker) -> Self {
        Counted { inner, calls: Cell::new(0) }
    }

    fn free(&self, q: &[f64]) -> bool {
        self.calls.set(self.calls.get() + 1);
        self.inner.is_free(q)
    }

    /// Interior points of the segment at spacing at most `resolution`;
    /// endpoints are the caller's business.
    fn edge_free(&self, a: &[f64], b: &[f64], resolution: f64) -> bool {
        let steps = (joint_distance(a, b) / resolution).ceil() as usize;
        let mut x = vec![0.0; a.len()];
        (1..steps).all(|k| {
            let t = k as f64 / steps as f64;
            for (xi, (ai, bi)) in x.iter_mut().zip(a.iter().zip(b)) {
                *xi = ai + t * (bi - ai);
            }
            self.free(&x)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    /// Extension length, radians.
    pub step: f64,
    pub goal_bias: f64,
    /// Wall-clock budget for the whole pipeline, seconds.
    pub max_time: f64,
    /// Spacing of edge check points, radians.
    pub edge_resolution: f64,
    pub seed: u64,
    /// Extension attempts before giving up, independent of time. Set it to
    /// make outcomes independent of machine speed.
    pub max_iterations: Option<usize>,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams {
            step: 0.2,
            goal_bias: 0.05,
            max_time: 3.0,
            edge_resolution: 0.05,
            seed: 0,
            max_iterations: None,
        }
    }
}

impl PlanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && (0.0..=1.0).contains(&self.goal_bias) && self.max_time > 0.0 && self.edge_resolution > 0.0) {
            return Err(Error::input(format!("invalid planner parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanStatus {
    Success,
    Timeout,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    pub approximate_checks: u64,
    pub exact_checks: u64,
    pub repaired_waypoints: u64,
    pub tree_nodes: u64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub status: PlanStatus,
    /// Source first, target last on success; on timeout whatever was
    /// salvaged.
    pub path: Vec<JointVector>,
    pub stats: PlanStats,
}

impl PlanResult {
    pub fn is_success(&self) -> bool {
        self.status == PlanStatus::Success
    }

    pub fn length(&self) -> f64 {
        self.path.windows(2).map(|w| joint_distance(&w[0], &w[1])).sum()
    }

    /// Same result with the wall time zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> PlanResult {
        let mut r = self.clone();
        r.stats.wall_seconds = 0.0;
        r
    }
}

/// Exact validation at `resolution`: number of waypoints and edge points
/// found in collision.
pub fn path_violations(model: &RobotModel, scene: &Scene, path: &[JointVector], resolution: f64) -> usize {
    let exact = ExactChecker { model, scene };
    let c = Counted::new(&exact);
    let mut bad = path.iter().filter(|q| !c.free(q)).count();
    for w in path.windows(2) {
        let steps = (joint_distance(&w[0], &w[1]) / resolution).ceil() as usize;
        let mut x = vec![0.0; w[0].len()];
        for k in 1..steps {
            let t = k as f64 / steps as f64;
            for (xi, (a, b)) in x.iter_mut().zip(w[0].iter().zip(w[1].iter())) {
                *xi = a + t * (b - a);
            }
            bad += !c.free(&x) as usize;
        }
    }
    bad
}

/// Writes one joint vector per row under a `q0,q1,...` header.
pub fn write_path_csv<W: Write>(path: &[JointVector], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let dof = path.first().map_or(0, |q| q.len());
    out.write_record((0..dof).map(|i| format!("q{i}")))?;
    for q in path {
        out.write_record(q.iter().map(|v| format!("{v:?}")))?;
    }
    out.flush().map_err(|e| Error::io("<path csv>", e))?;
    Ok(())
}

fn check_endpoints(model: &RobotModel, scene: &Scene, source: &[f64], target: &[f64]) -> Result<()> {
    check_dim(model.dof(), source.len())?;
    check_dim(model.dof(), target.len())?;
    for (name, q) in [("source", source), ("target", target)] {
        if in_collision(model, scene, q)? {
            return Err(Error::input(format!("{name} configuration is in collision")));
        }
    }
    Ok(())
}

enum Grow {
    Reached(Vec<JointVector>),
    Exhausted,
}

/// Core RRT loop shared by planning and repair.
#[allow(clippy::too_many_arguments)]
fn grow(
    checker: &Counted,
    region: &[JointLimit],
    source: &[f64],
    target: &[f64],
    params: &PlanParams,
    rng: &mut ChaCha8Rng,
    start: Instant,
    nodes_out: &mut u64,
) -> Grow {
    if joint_distance(source, target) == 0.0 {
        return Grow::Reached(vec![JointVector(source.to_vec())]);
    }
    let dim = source.len();
    let mut index = NeighborIndex::new(source.to_vec(), dim);
    let mut parent = vec![usize::MAX];
    let mut iterations = 0usize;
    let mut sample = vec![0.0; dim];
    let mut new = vec![0.0; dim];
    let result = loop {
        if start.elapsed().as_secs_f64() >= params.max_time || params.max_iterations.is_some_and(|m| iterations >= m) {
            break Grow::Exhausted;
        }
        iterations += 1;
        if rng.random::<f64>() < params.goal_bias {
            sample.copy_from_slice(target);
        } else {
            sample.copy_from_slice(&sample_uniform(region, rng));
        }
        let (_, near_id) = index.nearest(&sample).expect("tree has the root");
        let near = index.point(near_id as usize).to_vec();
        let d = joint_distance(&near, &sample);
        if d == 0.0 {
            continue;
        }
        let t = (params.step / d).min(1.0);
        for (n, (a, b)) in new.iter_mut().zip(near.iter().zip(&sample)) {
            *n = a + t * (b - a);
        }
        if !checker.free(&new) || !checker.edge_free(&near, &new, params.edge_resolution) {
            continue;
        }
        let id = index.insert(&new) as usize;
        parent.push(near_id as usize);
        if joint_distance(&new, target) <= params.step && checker.edge_free(&new, target, params.edge_resolution) {
            let mut path = vec![JointVector(target.to_vec())];
            let mut at = id;
            while at != usize::MAX {
                path.push(JointVector(index.point(at).to_vec()));
                at = parent[at];
            }
            path.reverse();
            // The goal-biased sample can land exactly on the target.
            if path.len() >= 2 && path[path.len() - 2].0 == target {
                path.pop();
            }
            break Grow::Reached(path);
        }
    };
    *nodes_out += parent.len() as u64;
    result
}

fn finish(status: PlanStatus, path: Vec<JointVector>, mut stats: PlanStats, start: Instant) -> PlanResult {
    stats.wall_seconds = start.elapsed().as_secs_f64();
    PlanResult { status, path, stats }
}

/// Plain RRT with `checker` deciding every node and edge.
pub fn rrt_plan(
    checker: &dyn CollisionChecker,
    model: &RobotModel,
    scene: &Scene,
    source: &[f64],
    target: &[f64],
    params: &PlanParams,
) -> Result<PlanResult> {
    params.validate()?;
    check_endpoints(model, scene, source, target)?;
    let start = Instant::now();
    let counted = Counted::new(checker);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut stats = PlanStats::default();
    let grown = grow(&counted, model.limits(), source, target, params, &mut rng, start, &mut stats.tree_nodes);
    if checker.is_exact() {
        stats.exact_checks = counted.calls.get();
    } else {
        stats.approximate_checks = counted.calls.get();
    }
    Ok(match grown {
        Grow::Reached(path) => finish(PlanStatus::Success, path, stats, start),
        Grow::Exhausted => finish(PlanStatus::Timeout, vec![JointVector(source.to_vec())], stats, start),
    })
}

/// Exact-checks every waypoint and edge of `path` and fixes what fails.
///
/// A colliding waypoint is first replaced by a Gaussian perturbation of
/// itself (growing sigma, bounded tries) that reconnects to the previous
/// kept waypoint. Anything still broken is bridged by an exact RRT from the
/// last kept waypoint to the next free one. Time counts against
/// `params.max_time` from `start`.
pub fn verify_and_repair(path: &[JointVector], model: &RobotModel, scene: &Scene, params: &PlanParams, start: Instant) -> Result<PlanResult> {
    params.validate()?;
    let mut stats = PlanStats::default();
    let Some(first) = path.first() else {
        return Err(Error::input("cannot repair an empty path"));
    };
    let exact = ExactChecker { model, scene };
    let c = Counted::new(&exact);
    let res = params.edge_resolution;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ REPAIR_STREAM);
    let fail = |out: Vec<JointVector>, mut stats: PlanStats, c: &Counted| {
        stats.exact_checks = c.calls.get();
        Ok(finish(PlanStatus::Timeout, out, stats, start))
    };
    if !c.free(first) {
        return fail(Vec::new(), stats, &c);
    }
    let mut out = vec![first.clone()];
    let mut i = 1;
    while i < path.len() {
        let prev = out.last().expect("non-empty").clone();
        let w = &path[i];
        let w_free = c.free(w);
        if w_free && c.edge_free(&prev, w, res) {
            out.push(w.clone());
            i += 1;
            continue;
        }
        if !w_free && i + 1 < path.len() {
            if let Some(fixed) = perturb(&c, model, &prev, w, res, &mut rng) {
                out.push(JointVector(fixed));
                stats.repaired_waypoints += 1;
                i += 1;
                continue;
            }
        }
        let Some(j) = (i..path.len()).find(|&j| j == i && w_free || j > i && c.free(&path[j])) else {
            return fail(out, stats, &c);
        };
        match bridge(&c, model, &prev, &path[j], params, &mut rng, start, &mut stats.tree_nodes) {
            Grow::Reached(bridge) => {
                out.extend(bridge.into_iter().skip(1));
                stats.repaired_waypoints += (j + 1 - i) as u64;
                i = j + 1;
            }
            Grow::Exhausted => return fail(out, stats, &c),
        }
    }
    stats.exact_checks = c.calls.get();
    Ok(finish(PlanStatus::Success, out, stats, start))
}

/// Exact RRT from `from` to `to`, sampling first in growing boxes around the
/// pair and only then in the whole joint space.
#[allow(clippy::too_many_arguments)]
fn bridge(
    c: &Counted,
    model: &RobotModel,
    from: &[f64],
    to: &[f64],
    params: &PlanParams,
    rng: &mut ChaCha8Rng,
    start: Instant,
    nodes: &mut u64,
) -> Grow {
    let cap = params.max_iterations.unwrap_or(usize::MAX);
    for margin in BRIDGE_MARGINS {
        let region: Vec<JointLimit> = model
            .limits()
            .iter()
            .zip(from.iter().zip(to))
            .map(|(lim, (a, b))| JointLimit {
                lower: (a.min(*b) - margin).max(lim.lower),
                upper: (a.max(*b) + margin).min(lim.upper),
            })
            .collect();
        let local = PlanParams {
            max_iterations: Some(BRIDGE_ITERATIONS.min(cap)),
            ..params.clone()
        };
        if let Grow::Reached(p) = grow(c, &region, from, to, &local, rng, start, nodes) {
            return Grow::Reached(p);
        }
        if start.elapsed().as_secs_f64() >= params.max_time {
            return Grow::Exhausted;
        }
    }
    grow(c, model.limits(), from, to, params, rng, start, nodes)
}

fn perturb(c: &Counted, model: &RobotModel, prev: &[f64], w: &[f64], res: f64, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let mut cand = vec![0.0; w.len()];
    for t in 0..PERTURB_TRIES {
        let sigma = PERTURB_SIGMA * (1.0 + t as f64 / 10.0);
        let normal = Normal::new(0.0, sigma).expect("positive sigma");
        for (k, (x, lim)) in cand.iter_mut().zip(model.limits()).enumerate() {
            *x = (w[k] + normal.sample(rng)).clamp(lim.lower, lim.upper);
        }
        if c.free(&cand) && c.edge_free(prev, &cand, res) {
            return Some(cand);
        }
    }
    None
}

/// RRT against a learned checker, then exact verification and repair. The
/// budget covers both phases.
pub fn plan_with_learned_checker(
    checker: &dyn CollisionChecker,
    model: &RobotModel,
    scene: &Scene,
    source: &[f64],
    target: &[f64],
    params: &PlanParams,
) -> Result<PlanResult> {
    let start = Instant::now();
    let planned = rrt_plan(checker, model, scene, source, target, params)?;
    let approx = planned.stats.clone();
    if !planned.is_success() {
        return Ok(finish(PlanStatus::Timeout, planned.path, approx, start));
    }
    let mut out = verify_and_repair(&planned.path, model, scene, params, start)?;
    out.stats.approximate_checks = approx.approximate_checks;
    out.stats.exact_checks += approx.exact_checks;
    out.stats.tree_nodes += approx.tree_nodes;
    out.stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(out)
}
