//! RBF-kernel C-SVM trained with sequential minimal optimization.
//!
//! The solver follows the usual dual formulation
//!
//! ```text
//! min_a  1/2 a^T Q a - e^T a   s.t.  y^T a = 0,  0 <= a_t <= C
//! Q_st = y_s y_t exp(-gamma |x_s - x_t|^2)
//! ```
//!
//! with second-order working-set selection and an LRU cache of kernel rows.
//! Training stops once the maximal KKT violation `m(a) - M(a)` drops below
//! `tol`.

use super::{ElementaryClassifier, Label};
use crate::error::{check_dim, Error, Result};
use crate::par::Exec;

const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvmParams {
    /// Box constraint.
    pub c: f64,
    /// Kernel width; `None` uses `gamma_scale` times [`default_gamma`] on
    /// the training data.
    pub gamma: Option<f64>,
    pub gamma_scale: f64,
    /// KKT stopping tolerance.
    pub tol: f64,
    /// Cap on pairwise updates.
    pub max_iter: usize,
    /// Kernel row cache budget, MiB.
    pub cache_mb: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 10.0,
            gamma: None,
            gamma_scale: 1.0,
            tol: 1e-3,
            max_iter: 1_000_000,
            cache_mb: 1024,
        }
    }
}

/// `1 / (dim * mean per-dimension variance)`.
pub fn default_gamma(points: &[f64], dim: usize) -> f64 {
    let n = points.len() / dim;
    if n < 2 {
        return 1.0 / dim as f64;
    }
    let mut var_sum = 0.0;
    for d in 0..dim {
        let mean = points.iter().skip(d).step_by(dim).sum::<f64>() / n as f64;
        var_sum += points.iter().skip(d).step_by(dim).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    }
    let var = var_sum / dim as f64;
    if var > 0.0 {
        1.0 / (dim as f64 * var)
    } else {
        1.0 / dim as f64
    }
}

#[derive(Clone, PartialEq)]
pub struct SvmModel {
    pub(crate) dim: usize,
    pub(crate) gamma: f64,
    pub(crate) c: f64,
    pub(crate) tol: f64,
    pub(crate) max_iter: usize,
    pub(crate) bias: f64,
    /// Support vectors, row-major.
    pub(crate) support: Vec<f64>,
    /// Dual coefficients `alpha_s`, all in `(0, C]`.
    pub(crate) alpha: Vec<f64>,
    pub(crate) labels: Vec<Label>,
    /// Position of each support vector in the original training set;
    /// `u32::MAX` for points added by online updates.
    pub(crate) sv_index: Vec<u32>,
    pub(crate) iterations: usize,
}

impl SvmModel {
    pub fn train(points: &[f64], dim: usize, labels: &[Label], params: &SvmParams) -> Result<Self> {
        Self::train_with(points, dim, labels, params, Exec::Auto)
    }

    pub fn train_with(points: &[f64], dim: usize, labels: &[Label], params: &SvmParams, exec: Exec) -> Result<Self> {
        if dim == 0 || points.len() != labels.len() * dim {
            return Err(Error::input(format!(
                "{} coordinates do not form {} points of dimension {dim}",
                points.len(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::input("SVM needs at least one training point"));
        }
        if !(params.c > 0.0 && params.tol > 0.0) {
            return Err(Error::input(format!("invalid SVM parameters {params:?}")));
        }
        let gamma = params.gamma.unwrap_or_else(|| params.gamma_scale * default_gamma(points, dim));
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::input(format!("invalid gamma {gamma}")));
        }
        let mut model = SvmModel {
            dim,
            gamma,
            c: params.c,
            tol: params.tol,
            max_iter: params.max_iter,
            bias: 0.0,
            support: Vec::new(),
            alpha: Vec::new(),
            labels: Vec::new(),
            sv_index: Vec::new(),
            iterations: 0,
        };
        let first = labels[0];
        if labels.iter().all(|&l| l == first) {
            log::warn!("SVM training data has a single class ({first:?}); using a constant classifier");
            model.bias = first.sign();
            return Ok(model);
        }
        let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
        let alpha0 = vec![0.0; labels.len()];
        let out = Smo::new(points, dim, y, alpha0, gamma, params, exec).solve();
        model.install(points, labels, &out, |i| i as u32);
        if !out.converged {
            return Err(Error::SvmNotConverged {
                iterations: out.iterations,
                gap: out.gap,
                best: Box::new(model),
            });
        }
        Ok(model)
    }

    fn install(&mut self, points: &[f64], labels: &[Label], out: &SmoOutcome, index_of: impl Fn(usize) -> u32) {
        self.support.clear();
        self.alpha.clear();
        self.labels.clear();
        self.sv_index.clear();
        for (i, &a) in out.alpha.iter().enumerate() {
            if a > 0.0 {
                self.support.extend_from_slice(&points[i * self.dim..(i + 1) * self.dim]);
                self.alpha.push(a);
                self.labels.push(labels[i]);
                self.sv_index.push(index_of(i));
            }
        }
        self.bias = out.bias;
        self.iterations = out.iterations;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn support_count(&self) -> usize {
        self.alpha.len()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn support_vectors(&self) -> impl Iterator<Item = (&[f64], f64, Label)> {
        self.support
            .chunks_exact(self.dim)
            .zip(&self.alpha)
            .zip(&self.labels)
            .map(|((x, &a), &l)| (x, a, l))
    }

    /// `sum_s alpha_s y_s K(x_s, x) + b`.
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        let mut f = self.bias;
        for ((sv, &a), &l) in self.support.chunks_exact(self.dim).zip(&self.alpha).zip(&self.labels) {
            let mut d2 = 0.0;
            for (p, q) in sv.iter().zip(x) {
                let t = p - q;
                d2 += t * t;
            }
            f += a * l.sign() * (-self.gamma * d2).exp();
        }
        f
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        if self.decision_value(x) > 0.0 {
            Label::Free
        } else {
            Label::Collision
        }
    }

    /// Maximal KKT violation of the stored duals on the training set they
    /// came from (non-support points have `alpha = 0`).
    pub fn kkt_gap(&self, points: &[f64], labels: &[Label]) -> Result<f64> {
        check_dim(labels.len() * self.dim, points.len())?;
        let mut alpha = vec![0.0; labels.len()];
        for (&i, &a) in self.sv_index.iter().zip(&self.alpha) {
            if i == u32::MAX || i as usize >= labels.len() {
                return Err(Error::input("support vector does not belong to this training set"));
            }
            alpha[i as usize] = a;
        }
        let (mut up, mut low) = (f64::NEG_INFINITY, f64::INFINITY);
        for (t, (x, &l)) in points.chunks_exact(self.dim).zip(labels).enumerate() {
            let y = l.sign();
            // -y_t * G_t with G_t = y_t * (f(x_t) - b) - 1.
            let v = -y * (y * (self.decision_value(x) - self.bias) - 1.0);
            let a = alpha[t];
            let in_up = (y > 0.0 && a < self.c) || (y < 0.0 && a > 0.0);
            let in_low = (y < 0.0 && a < self.c) || (y > 0.0 && a > 0.0);
            if in_up {
                up = up.max(v);
            }
            if in_low {
                low = low.min(v);
            }
        }
        Ok((up - low).max(0.0))
    }

    /// Warm-started re-optimisation over the current support vectors plus
    /// the new point.
    pub fn update(&mut self, x: &[f64], label: Label) -> Result<()> {
        check_dim(self.dim, x.len())?;
        let mut points = self.support.clone();
        points.extend_from_slice(x);
        let mut labels = self.labels.clone();
        labels.push(label);
        if labels.iter().all(|&l| l == label) {
            // Still a single class: the constant answer stands.
            if self.alpha.is_empty() {
                self.bias = label.sign();
            }
            return Ok(());
        }
        let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
        let mut alpha0 = self.alpha.clone();
        alpha0.push(0.0);
        let params = SvmParams {
            c: self.c,
            gamma: Some(self.gamma),
            gamma_scale: 1.0,
            tol: self.tol,
            max_iter: self.max_iter,
            cache_mb: 256,
        };
        let out = Smo::new(&points, self.dim, y, alpha0, self.gamma, &params, Exec::Auto).solve();
        if !out.converged {
            let mut best = self.clone();
            let old = self.sv_index.clone();
            best.install(&points, &labels, &out, |i| old.get(i).copied().unwrap_or(u32::MAX));
            return Err(Error::SvmNotConverged {
                iterations: out.iterations,
                gap: out.gap,
                best: Box::new(best),
            });
        }
        let old = self.sv_index.clone();
        self.install(&points, &labels, &out, |i| old.get(i).copied().unwrap_or(u32::MAX));
        Ok(())
    }
}

impl std::fmt::Debug for SvmModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SvmModel")
            .field("dim", &self.dim)
            .field("gamma", &self.gamma)
            .field("c", &self.c)
            .field("bias", &self.bias)
            .field("support_vectors", &self.alpha.len())
            .field("iterations", &self.iterations)
            .finish()
    }
}

impl ElementaryClassifier for SvmModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> Label {
        SvmModel::predict(self, x)
    }

    fn update(&mut self, x: &[f64], label: Label) -> Result<()> {
        SvmModel::update(self, x, label)
    }
}

/// LRU cache of kernel rows.
struct KernelCache {
    n: usize,
    capacity: usize,
    rows: Vec<Vec<f64>>,
    slot_row: Vec<usize>,
    row_slot: Vec<u32>,
    last_used: Vec<u64>,
    clock: u64,
}

impl KernelCache {
    fn new(n: usize, budget_mb: usize) -> Self {
        let per_row = (n * 8).max(1);
        let capacity = (budget_mb * 1024 * 1024 / per_row).clamp(2, n.max(2));
        KernelCache {
            n,
            capacity,
            rows: Vec::new(),
            slot_row: Vec::new(),
            row_slot: vec![u32::MAX; n],
            last_used: Vec::new(),
            clock: 0,
        }
    }

    /// Slot holding row `r`, computing it with `fill` on a miss.
    fn slot(&mut self, r: usize, fill: impl FnOnce(usize, &mut [f64])) -> usize {
        self.clock += 1;
        let s = self.row_slot[r];
        if s != u32::MAX {
            self.last_used[s as usize] = self.clock;
            return s as usize;
        }
        let s = if self.rows.len() < self.capacity {
            self.rows.push(vec![0.0; self.n]);
            self.slot_row.push(r);
            self.last_used.push(0);
            self.rows.len() - 1
        } else {
            let victim = (0..self.rows.len()).min_by_key(|&i| self.last_used[i]).expect("capacity >= 2");
            self.row_slot[self.slot_row[victim]] = u32::MAX;
            self.slot_row[victim] = r;
            victim
        };
        fill(r, &mut self.rows[s]);
        self.row_slot[r] = s as u32;
        self.last_used[s] = self.clock;
        s
    }
}

struct SmoOutcome {
    alpha: Vec<f64>,
    bias: f64,
    iterations: usize,
    gap: f64,
    converged: bool,
}

struct Smo<'a> {
    x: &'a [f64],
    dim: usize,
    n: usize,
    y: Vec<f64>,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    gamma: f64,
    c: f64,
    tol: f64,
    max_iter: usize,
    cache: KernelCache,
    exec: Exec,
}

impl<'a> Smo<'a> {
    fn new(x: &'a [f64], dim: usize, y: Vec<f64>, alpha: Vec<f64>, gamma: f64, params: &SvmParams, exec: Exec) -> Self {
        let n = y.len();
        let mut smo = Smo {
            x,
            dim,
            n,
            y,
            alpha,
            grad: vec![-1.0; n],
            gamma,
            c: params.c,
            tol: params.tol,
            max_iter: params.max_iter,
            cache: KernelCache::new(n, params.cache_mb),
            exec,
        };
        for i in 0..n {
            let a = smo.alpha[i];
            if a > 0.0 {
                let s = smo.row(i);
                let yi = smo.y[i];
                let row = &smo.cache.rows[s];
                for ((g, &yt), &k) in smo.grad.iter_mut().zip(&smo.y).zip(&row[..n]) {
                    *g += a * yi * yt * k;
                }
            }
        }
        smo
    }

    fn row(&mut self, i: usize) -> usize {
        let (x, dim, gamma, exec) = (self.x, self.dim, self.gamma, self.exec);
        let exec = if self.n >= 2048 { exec } else { Exec::Sequential };
        self.cache.slot(i, |r, out| {
            let xi = &x[r * dim..(r + 1) * dim];
            exec.fill(out, |t| {
                let xt = &x[t * dim..(t + 1) * dim];
                let mut d2 = 0.0;
                for (p, q) in xi.iter().zip(xt) {
                    let e = p - q;
                    d2 += e * e;
                }
                (-gamma * d2).exp()
            });
        })
    }

    fn in_up(&self, t: usize) -> bool {
        (self.y[t] > 0.0 && self.alpha[t] < self.c) || (self.y[t] < 0.0 && self.alpha[t] > 0.0)
    }

    fn in_low(&self, t: usize) -> bool {
        (self.y[t] < 0.0 && self.alpha[t] < self.c) || (self.y[t] > 0.0 && self.alpha[t] > 0.0)
    }

    /// Second-order working-set selection. Returns `None` when the KKT gap
    /// is below tolerance, together with the gap.
    #[allow(clippy::needless_range_loop)]
    fn select(&mut self) -> (Option<(usize, usize)>, f64) {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..self.n {
            if self.in_up(t) {
                let v = -self.y[t] * self.grad[t];
                if v >= gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            return (None, 0.0);
        }
        let si = self.row(i);
        let row_i = &self.cache.rows[si];
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = f64::INFINITY;
        let mut j = usize::MAX;
        for t in 0..self.n {
            if !self.in_low(t) {
                continue;
            }
            let v = self.y[t] * self.grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            let b = gmax + v;
            if b > 0.0 {
                let mut a = 2.0 - 2.0 * row_i[t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        let gap = gmax + gmax2;
        if gap < self.tol || j == usize::MAX {
            return (None, gap.max(0.0));
        }
        (Some((i, j)), gap)
    }

    fn step(&mut self, i: usize, j: usize) {
        let si = self.row(i);
        let sj = self.row(j);
        let c = self.c;
        let (yi, yj) = (self.y[i], self.y[j]);
        let kij = self.cache.rows[si][j];
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if yi != yj {
            let mut quad = 2.0 - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = 2.0 - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        self.alpha[i] = ai;
        self.alpha[j] = aj;
        let (di, dj) = ((ai - old_i) * yi, (aj - old_j) * yj);
        let (row_i, row_j) = (&self.cache.rows[si], &self.cache.rows[sj]);
        for t in 0..self.n {
            self.grad[t] += self.y[t] * (row_i[t] * di + row_j[t] * dj);
        }
    }

    fn bias(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum, mut free) = (0.0, 0usize);
        for t in 0..self.n {
            let yg = self.y[t] * self.grad[t];
            let a = self.alpha[t];
            if a >= self.c {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if a <= 0.0 {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                sum += yg;
            }
        }
        let rho = if free > 0 { sum / free as f64 } else { 0.5 * (ub + lb) };
        -rho
    }

    fn solve(mut self) -> SmoOutcome {
        let mut iterations = 0;
        let (converged, gap) = loop {
            let (pair, gap) = self.select();
            let Some((i, j)) = pair else {
                break (true, gap);
            };
            if iterations >= self.max_iter {
                break (false, gap);
            }
            self.step(i, j);
            iterations += 1;
        };
        SmoOutcome {
            bias: self.bias(),
            alpha: self.alpha,
            iterations,
            gap,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn params(gamma: f64) -> SvmParams {
        SvmParams {
            gamma: Some(gamma),
            ..SvmParams::default()
        }
    }

    #[test]
    fn two_point_separable() {
        let pts = [-1.0, 0.0, 1.0, 0.0];
        let labels = [Label::Collision, Label::Free];
        let m = SvmModel::train(&pts, 2, &labels, &params(0.5)).unwrap();
        assert_eq!(m.predict(&[1.0, 0.0]), Label::Free);
        assert_eq!(m.predict(&[-1.0, 0.0]), Label::Collision);
        // Symmetric problem: margin on both sides, zero bias.
        assert!(m.decision_value(&[1.0, 0.0]) > 0.5);
        assert!(m.decision_value(&[-1.0, 0.0]) < -0.5);
        assert!(m.bias().abs() < 1e-9);
    }

    // Four-point XOR dual, solved independently: by symmetry all alphas are
    // equal (a) and b = 0. With k = exp(-gamma * 2) for adjacent corners and
    // kd = exp(-gamma * 4) for opposite corners, the stationarity condition
    // y_s f(x_s) = 1 gives a * (1 - 2k + kd) = 1 whenever a < C.
    #[test]
    fn xor_four_points_matches_closed_form() {
        let pts = [1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0, 1.0];
        let labels = [Label::Free, Label::Free, Label::Collision, Label::Collision];
        let gamma = 0.5;
        let m = SvmModel::train(&pts, 2, &labels, &params(gamma)).unwrap();
        let k = (-gamma * 4.0f64).exp(); // adjacent corners are 2 apart
        let kd = (-gamma * 8.0f64).exp(); // opposite corners are 2*sqrt(2) apart
        let a = 1.0 / (1.0 - 2.0 * k + kd);
        assert_eq!(m.support_count(), 4);
        for (_, alpha, _) in m.support_vectors() {
            assert!((alpha - a).abs() < 1e-3, "alpha {alpha} vs {a}");
        }
        for (x, l) in pts.chunks_exact(2).zip(labels) {
            assert_eq!(m.predict(x), l);
        }
    }

    fn xor_cloud(n: usize, seed: u64) -> (Vec<f64>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let (x, y): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            pts.extend_from_slice(&[x, y]);
            labels.push(Label::from_collision(x * y < 0.0));
        }
        (pts, labels)
    }

    #[test]
    fn xor_cloud_training_accuracy() {
        let (pts, labels) = xor_cloud(400, 1);
        let m = SvmModel::train(&pts, 2, &labels, &params(2.0)).unwrap();
        let correct = pts.chunks_exact(2).zip(&labels).filter(|(x, l)| m.predict(x) == **l).count();
        assert!(correct as f64 / 400.0 >= 0.95, "accuracy {}", correct as f64 / 400.0);
        assert!(m.kkt_gap(&pts, &labels).unwrap() < m.tol() * 1.01);
        for (_, a, _) in m.support_vectors() {
            assert!(a > 0.0 && a <= m.c());
        }
        let balance: f64 = m.support_vectors().map(|(_, a, l)| a * l.sign()).sum();
        assert!(balance.abs() < 1e-9);
    }

    #[test]
    fn decision_value_on_support_vector_matches_expansion() {
        let (pts, labels) = xor_cloud(200, 2);
        let m = SvmModel::train(&pts, 2, &labels, &params(1.0)).unwrap();
        let (sv, _, _) = m.support_vectors().next().unwrap();
        let manual: f64 = m
            .support_vectors()
            .map(|(x, a, l)| a * l.sign() * (-m.gamma() * ((x[0] - sv[0]).powi(2) + (x[1] - sv[1]).powi(2))).exp())
            .sum::<f64>()
            + m.bias();
        assert!((manual - m.decision_value(sv)).abs() < 1e-9);
    }

    #[test]
    fn single_class_is_constant() {
        let pts = [0.0, 1.0, 2.0];
        let m = SvmModel::train(&pts, 1, &[Label::Free; 3], &SvmParams::default()).unwrap();
        assert_eq!(m.support_count(), 0);
        assert_eq!(m.predict(&[100.0]), Label::Free);
        let m = SvmModel::train(&pts, 1, &[Label::Collision; 3], &SvmParams::default()).unwrap();
        assert_eq!(m.predict(&[0.0]), Label::Collision);
    }

    #[test]
    fn iteration_cap_returns_best_so_far() {
        let (pts, labels) = xor_cloud(300, 3);
        let p = SvmParams {
            max_iter: 5,
            ..params(2.0)
        };
        match SvmModel::train(&pts, 2, &labels, &p) {
            Err(Error::SvmNotConverged { iterations, best, .. }) => {
                assert_eq!(iterations, 5);
                assert!(best.support_count() > 0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn tiny_cache_gives_same_model() {
        let (pts, labels) = xor_cloud(300, 4);
        let big = SvmModel::train(&pts, 2, &labels, &params(2.0)).unwrap();
        let small = SvmModel::train(
            &pts,
            2,
            &labels,
            &SvmParams {
                cache_mb: 0,
                ..params(2.0)
            },
        )
        .unwrap();
        assert_eq!(big, small);
        let seq = SvmModel::train_with(&pts, 2, &labels, &params(2.0), Exec::Sequential).unwrap();
        assert_eq!(big, seq);
    }

    #[test]
    fn default_gamma_uses_variance() {
        // Two dims with variance 1 each -> gamma = 1 / (2 * 1).
        let pts = [1.0, -1.0, -1.0, 1.0];
        assert!((default_gamma(&pts, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn update_moves_decision_toward_label() {
        let (pts, labels) = xor_cloud(300, 5);
        let mut m = SvmModel::train(&pts, 2, &labels, &params(2.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for _ in 0..30 {
            let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let l = Label::from_collision(x[0] * x[1] < 0.0);
            let before = l.sign() * m.decision_value(&x);
            m.update(&x, l).unwrap();
            let after = l.sign() * m.decision_value(&x);
            assert!(after >= before - 2.0 * m.tol(), "{before} -> {after}");
        }
        assert!(m.update(&[0.0], Label::Free).is_err());
    }
}
