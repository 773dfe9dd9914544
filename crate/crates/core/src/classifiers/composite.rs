use std::ops::Range;
use std::sync::Arc;

use parking_lot::RwLock;

use super::{Elementary, ElementaryClassifier, ElementaryKind, Hyperparams, Label};
use crate::cspace::{Dataset, LevelLabel};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{component_collision, Scene};
use crate::robot::RobotModel;

/// Assignment of raw robot levels to classifier levels. A non-effective
/// component is folded into the level before it, and that level then reads
/// the prefix up to the end of the folded group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoalescingMap {
    raw_dims: Vec<usize>,
    raw_to_effective: Vec<usize>,
    groups: Vec<Range<usize>>,
}

impl CoalescingMap {
    /// One classifier level per raw level.
    pub fn identity(prefix_dims: &[usize]) -> Result<Self> {
        Self::from_assignment(prefix_dims, (0..prefix_dims.len()).collect())
    }

    /// `effective[i] == false` merges raw level `i` into its predecessor.
    pub fn new(prefix_dims: &[usize], effective: &[bool]) -> Result<Self> {
        check_dim(prefix_dims.len(), effective.len())?;
        if effective.first() == Some(&false) {
            return Err(Error::input("the first level cannot be non-effective: it has no predecessor to merge into"));
        }
        let mut next = 0;
        let assignment = effective
            .iter()
            .map(|&e| {
                if e {
                    next += 1;
                }
                next - 1
            })
            .collect();
        Self::from_assignment(prefix_dims, assignment)
    }

    pub fn from_model(model: &RobotModel) -> Result<Self> {
        let flags: Vec<bool> = model.components().iter().map(|c| c.effective).collect();
        Self::new(model.prefix_dims(), &flags)
    }

    /// Everything in one level over the full configuration.
    pub fn single(prefix_dims: &[usize]) -> Result<Self> {
        Self::from_assignment(prefix_dims, vec![0; prefix_dims.len()])
    }

    /// Validates an explicit raw-to-effective assignment, which must start at
    /// 0 and advance by 0 or 1 per raw level.
    pub fn from_assignment(prefix_dims: &[usize], raw_to_effective: Vec<usize>) -> Result<Self> {
        check_dim(prefix_dims.len(), raw_to_effective.len())?;
        if prefix_dims.is_empty() {
            return Err(Error::input("coalescing map over zero levels"));
        }
        if prefix_dims[0] == 0 || prefix_dims.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input(format!("prefix dims {prefix_dims:?} are not strictly increasing")));
        }
        if raw_to_effective[0] != 0 || raw_to_effective.windows(2).any(|w| w[1] != w[0] && w[1] != w[0] + 1) {
            return Err(Error::input(format!("invalid level assignment {raw_to_effective:?}")));
        }
        let mut groups: Vec<Range<usize>> = Vec::new();
        for (raw, &e) in raw_to_effective.iter().enumerate() {
            if e == groups.len() {
                groups.push(raw..raw + 1);
            } else {
                groups[e].end = raw + 1;
            }
        }
        Ok(CoalescingMap {
            raw_dims: prefix_dims.to_vec(),
            raw_to_effective,
            groups,
        })
    }

    /// Number of classifier levels.
    pub fn levels(&self) -> usize {
        self.groups.len()
    }

    pub fn raw_levels(&self) -> usize {
        self.raw_dims.len()
    }

    pub fn raw_dims(&self) -> &[usize] {
        &self.raw_dims
    }

    pub fn assignment(&self) -> &[usize] {
        &self.raw_to_effective
    }

    pub fn effective_of(&self, raw: usize) -> usize {
        self.raw_to_effective[raw]
    }

    pub fn raw_range(&self, level: usize) -> Range<usize> {
        self.groups[level].clone()
    }

    /// Prefix length read by classifier level `level`.
    pub fn dim(&self, level: usize) -> usize {
        self.raw_dims[self.groups[level].end - 1]
    }

    pub fn dims(&self) -> Vec<usize> {
        (0..self.levels()).map(|i| self.dim(i)).collect()
    }

    pub fn dof(&self) -> usize {
        *self.raw_dims.last().expect("non-empty")
    }

    pub fn is_identity(&self) -> bool {
        self.levels() == self.raw_levels()
    }

    /// Training label of classifier level `level`: free unless any merged
    /// raw level collides.
    pub fn label(&self, raw: &LevelLabel, level: usize) -> Label {
        Label::from_collision(raw.any_in(self.raw_range(level)))
    }
}

/// Outcome of a short-circuit composite query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompositePrediction {
    pub label: Label,
    /// Classifier level that rejected the query.
    pub rejected_at: Option<usize>,
    /// Elementary classifiers evaluated.
    pub evaluated: usize,
}

/// `F = f_0 AND f_1 AND ...`, each `f_i` reading a growing prefix of `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeClassifier<C = Elementary> {
    map: CoalescingMap,
    levels: Vec<C>,
}

impl<C: ElementaryClassifier> CompositeClassifier<C> {
    pub fn new(map: CoalescingMap, levels: Vec<C>) -> Result<Self> {
        check_dim(map.levels(), levels.len())?;
        for (i, f) in levels.iter().enumerate() {
            check_dim(map.dim(i), f.dim())?;
        }
        Ok(CompositeClassifier { map, levels })
    }

    pub fn map(&self) -> &CoalescingMap {
        &self.map
    }

    pub fn levels(&self) -> &[C] {
        &self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn dof(&self) -> usize {
        self.map.dof()
    }

    /// Evaluates levels in order and stops at the first rejection.
    pub fn predict(&self, q: &[f64]) -> Result<CompositePrediction> {
        check_dim(self.dof(), q.len())?;
        Ok(self.predict_unchecked(q))
    }

    pub(crate) fn predict_unchecked(&self, q: &[f64]) -> CompositePrediction {
        for (i, f) in self.levels.iter().enumerate() {
            if f.predict(&q[..self.map.dim(i)]) == Label::Collision {
                return CompositePrediction {
                    label: Label::Collision,
                    rejected_at: Some(i),
                    evaluated: i + 1,
                };
            }
        }
        CompositePrediction {
            label: Label::Free,
            rejected_at: None,
            evaluated: self.levels.len(),
        }
    }

    pub fn predict_label(&self, q: &[f64]) -> Result<Label> {
        Ok(self.predict(q)?.label)
    }

    /// `NOT (NOT f_0 OR NOT f_1 OR ...)`, evaluating every level.
    pub fn predict_de_morgan(&self, q: &[f64]) -> Result<Label> {
        check_dim(self.dof(), q.len())?;
        let rejected = self
            .levels
            .iter()
            .enumerate()
            .map(|(i, f)| f.predict(&q[..self.map.dim(i)]) != Label::Free)
            .fold(false, |acc, r| acc | r);
        Ok(Label::from_collision(rejected))
    }

    /// Feeds one exactly labeled configuration to every level.
    pub fn update(&mut self, q: &[f64], label: &LevelLabel) -> Result<()> {
        check_dim(self.dof(), q.len())?;
        check_dim(self.map.raw_levels(), label.levels())?;
        for (i, f) in self.levels.iter_mut().enumerate() {
            f.update(&q[..self.map.dim(i)], self.map.label(label, i))?;
        }
        Ok(())
    }
}

/// Row-major prefixes of every dataset sample.
pub(crate) fn prefix_points(dataset: &Dataset, dim: usize) -> Vec<f64> {
    let mut pts = Vec::with_capacity(dataset.len() * dim);
    for s in &dataset.samples {
        pts.extend_from_slice(&s.q[..dim]);
    }
    pts
}

/// Trains one elementary classifier per classifier level of `map`, each on
/// every sample's prefix.
pub fn composite_train(dataset: &Dataset, map: &CoalescingMap, kind: ElementaryKind, hyper: &Hyperparams) -> Result<CompositeClassifier> {
    if dataset.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    check_dim(map.dof(), dataset.dof)?;
    check_dim(map.raw_levels(), dataset.levels)?;
    let mut levels = Vec::with_capacity(map.levels());
    for i in 0..map.levels() {
        let dim = map.dim(i);
        let labels: Vec<Label> = dataset.samples.iter().map(|s| map.label(&s.label, i)).collect();
        log::debug!("training {kind} level {i} on {} points of dim {dim}", labels.len());
        levels.push(Elementary::train(kind, &prefix_points(dataset, dim), dim, &labels, hyper)?);
    }
    CompositeClassifier::new(map.clone(), levels)
}

/// Single classifier over the full configuration with the overall label.
pub fn train_single(dataset: &Dataset, kind: ElementaryKind, hyper: &Hyperparams) -> Result<Elementary> {
    if dataset.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }
    let labels: Vec<Label> = dataset
        .samples
        .iter()
        .map(|s| Label::from_collision(s.label.in_collision()))
        .collect();
    Elementary::train(kind, &prefix_points(dataset, dataset.dof), dataset.dof, &labels, hyper)
}

/// Exact stand-in for a learned level: asks the geometry directly whether
/// any raw component of the level collides.
#[derive(Clone, Debug)]
pub struct ComponentOracle {
    model: Arc<RobotModel>,
    scene: Arc<Scene>,
    raw: Range<usize>,
    dim: usize,
}

impl ComponentOracle {
    pub fn new(model: Arc<RobotModel>, scene: Arc<Scene>, map: &CoalescingMap, level: usize) -> Self {
        ComponentOracle {
            raw: map.raw_range(level),
            dim: map.dim(level),
            model,
            scene,
        }
    }

    /// A composite whose levels are all oracles.
    pub fn composite(model: Arc<RobotModel>, scene: Arc<Scene>, map: &CoalescingMap) -> Result<CompositeClassifier<ComponentOracle>> {
        check_dim(model.levels(), map.raw_levels())?;
        let levels = (0..map.levels())
            .map(|i| ComponentOracle::new(model.clone(), scene.clone(), map, i))
            .collect();
        CompositeClassifier::new(map.clone(), levels)
    }
}

impl ElementaryClassifier for ComponentOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, x: &[f64]) -> Label {
        let hit = self.raw.clone().any(|r| {
            let n = self.model.prefix_dim(r);
            component_collision(&self.model, &self.scene, &x[..n], r).expect("prefix sized by the map")
        });
        Label::from_collision(hit)
    }

    fn update(&mut self, _x: &[f64], _label: Label) -> Result<()> {
        Ok(())
    }
}

/// Single-writer, multi-reader handle. Readers take a snapshot; an update
/// builds a new classifier off to the side and swaps it in, so a query never
/// sees a half-updated model.
#[derive(Debug)]
pub struct SharedComposite<C = Elementary> {
    current: RwLock<Arc<CompositeClassifier<C>>>,
    writer: parking_lot::Mutex<()>,
}

impl<C: ElementaryClassifier + Clone> SharedComposite<C> {
    pub fn new(classifier: CompositeClassifier<C>) -> Self {
        SharedComposite {
            current: RwLock::new(Arc::new(classifier)),
            writer: parking_lot::Mutex::new(()),
        }
    }

    pub fn snapshot(&self) -> Arc<CompositeClassifier<C>> {
        self.current.read().clone()
    }

    pub fn predict(&self, q: &[f64]) -> Result<CompositePrediction> {
        self.snapshot().predict(q)
    }

    pub fn update(&self, q: &[f64], label: &LevelLabel) -> Result<()> {
        let _guard = self.writer.lock();
        let mut next = (*self.snapshot()).clone();
        next.update(q, label)?;
        *self.current.write() = Arc::new(next);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::cspace::{build_dataset, sample_batch};
    use crate::geometry::{exact_collision, SceneGenParams};

    /// Answers from a fixed per-level verdict and counts calls.
    struct Scripted {
        dim: usize,
        verdict: Label,
        calls: Arc<AtomicUsize>,
    }

    impl ElementaryClassifier for Scripted {
        fn dim(&self) -> usize {
            self.dim
        }
        fn predict(&self, _x: &[f64]) -> Label {
            self.calls.fetch_add(1, Ordering::Relaxed);
            self.verdict
        }
        fn update(&mut self, _x: &[f64], _label: Label) -> Result<()> {
            Ok(())
        }
    }

    fn scripted(verdicts: &[Label]) -> (CompositeClassifier<Scripted>, Vec<Arc<AtomicUsize>>) {
        let dims: Vec<usize> = (1..=verdicts.len()).collect();
        let map = CoalescingMap::identity(&dims).unwrap();
        let counters: Vec<_> = verdicts.iter().map(|_| Arc::new(AtomicUsize::new(0))).collect();
        let levels = verdicts
            .iter()
            .zip(&counters)
            .enumerate()
            .map(|(i, (&verdict, c))| Scripted {
                dim: i + 1,
                verdict,
                calls: c.clone(),
            })
            .collect();
        (CompositeClassifier::new(map, levels).unwrap(), counters)
    }

    #[test]
    fn first_level_rejection_short_circuits() {
        use Label::*;
        let (f, calls) = scripted(&[Collision, Free, Free]);
        let p = f.predict(&[0.0; 3]).unwrap();
        assert_eq!(p, CompositePrediction { label: Collision, rejected_at: Some(0), evaluated: 1 });
        assert_eq!(calls.iter().map(|c| c.load(Ordering::Relaxed)).collect::<Vec<_>>(), vec![1, 0, 0]);
    }

    #[test]
    fn all_free_evaluates_every_level() {
        let (f, _) = scripted(&[Label::Free; 4]);
        let p = f.predict(&[0.0; 4]).unwrap();
        assert_eq!(p, CompositePrediction { label: Label::Free, rejected_at: None, evaluated: 4 });
        assert!(f.predict(&[0.0; 3]).is_err());
    }

    #[test]
    fn de_morgan_matches_short_circuit_on_all_verdicts() {
        use Label::*;
        for bits in 0u32..16 {
            let v: Vec<Label> = (0..4).map(|i| if bits >> i & 1 == 1 { Collision } else { Free }).collect();
            let (f, _) = scripted(&v);
            let p = f.predict(&[0.0; 4]).unwrap();
            assert_eq!(p.label, f.predict_de_morgan(&[0.0; 4]).unwrap());
            let first = v.iter().position(|&l| l == Collision);
            assert_eq!(p.rejected_at, first);
        }
    }

    #[test]
    fn coalescing_maps() {
        let dims = [1, 2, 3, 4, 5, 6];
        let id = CoalescingMap::new(&dims, &[true; 6]).unwrap();
        assert!(id.is_identity());
        assert_eq!(id.dims(), dims.to_vec());
        let merged = CoalescingMap::new(&dims, &[true, true, true, true, true, false]).unwrap();
        assert_eq!(merged.levels(), 5);
        assert_eq!(merged.raw_range(4), 4..6);
        assert_eq!(merged.dim(4), 6);
        let l = LevelLabel::from_flags(&[false, false, false, false, false, true]);
        assert_eq!(merged.label(&l, 4), Label::Collision);
        assert_eq!(merged.label(&l, 3), Label::Free);
        let middle = CoalescingMap::new(&dims, &[true, true, false, true, true, true]).unwrap();
        assert_eq!(middle.raw_range(1), 1..3);
        assert_eq!(middle.dims(), vec![1, 3, 4, 5, 6]);
        assert!(CoalescingMap::new(&dims, &[false, true, true, true, true, true]).is_err());
        let single = CoalescingMap::single(&dims).unwrap();
        assert_eq!((single.levels(), single.dim(0)), (1, 6));
        assert!(CoalescingMap::from_assignment(&dims, vec![0, 2, 2, 3, 4, 5]).is_err());
    }

    #[test]
    fn bundled_model_map_merges_tool() {
        let map = CoalescingMap::from_model(&RobotModel::ur5()).unwrap();
        assert_eq!(map.levels(), 5);
        assert_eq!(map.assignment(), &[0, 1, 2, 3, 4, 4]);
    }

    fn four_box() -> (Arc<RobotModel>, Arc<Scene>) {
        let scene = Scene::random(4, 7, SceneGenParams::default()).unwrap();
        (Arc::new(RobotModel::ur5()), Arc::new(scene))
    }

    #[test]
    fn oracle_composite_reproduces_exact_labels() {
        let (model, scene) = four_box();
        for map in [CoalescingMap::identity(model.prefix_dims()).unwrap(), CoalescingMap::from_model(&model).unwrap()] {
            let f = ComponentOracle::composite(model.clone(), scene.clone(), &map).unwrap();
            for q in sample_batch(model.limits(), 3000, 11) {
                let exact = exact_collision(&model, &scene, &q).unwrap();
                let p = f.predict(&q).unwrap();
                assert_eq!(p.label.is_free(), !exact.in_collision());
                assert_eq!(p.rejected_at, exact.first_collision_level().map(|r| map.effective_of(r)));
            }
        }
    }

    #[test]
    fn single_level_map_equals_single_classifier() {
        let (model, scene) = four_box();
        let train = build_dataset(&model, &scene, 400, 1);
        let map = CoalescingMap::single(model.prefix_dims()).unwrap();
        let hyper = Hyperparams::default();
        for kind in [ElementaryKind::Knn, ElementaryKind::Svm] {
            let f = composite_train(&train, &map, kind, &hyper).unwrap();
            let s = train_single(&train, kind, &hyper).unwrap();
            assert_eq!(f.levels()[0], s);
            for q in sample_batch(model.limits(), 300, 2) {
                assert_eq!(f.predict(&q).unwrap().label, s.predict(&q));
            }
        }
    }

    #[test]
    fn knn_composite_update_then_query() {
        let (model, scene) = four_box();
        let train = build_dataset(&model, &scene, 300, 3);
        let hyper = Hyperparams { k: 1, ..Hyperparams::default() };
        let map = CoalescingMap::from_model(&model).unwrap();
        let shared = SharedComposite::new(composite_train(&train, &map, ElementaryKind::Knn, &hyper).unwrap());
        let before = shared.snapshot();
        for s in build_dataset(&model, &scene, 50, 4).samples {
            shared.update(&s.q, &s.label).unwrap();
            assert_eq!(shared.predict(&s.q).unwrap().label.is_free(), !s.label.in_collision());
        }
        // Old snapshots are untouched.
        assert_eq!(*before, composite_train(&train, &map, ElementaryKind::Knn, &hyper).unwrap());
    }

    #[test]
    fn composite_update_rejects_bad_shapes() {
        let (model, scene) = four_box();
        let train = build_dataset(&model, &scene, 100, 5);
        let map = CoalescingMap::from_model(&model).unwrap();
        let mut f = composite_train(&train, &map, ElementaryKind::Knn, &Hyperparams::default()).unwrap();
        assert!(f.update(&[0.0; 5], &LevelLabel::free(6)).is_err());
        assert!(f.update(&[0.0; 6], &LevelLabel::free(5)).is_err());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let (model, scene) = four_box();
        let empty = build_dataset(&model, &scene, 0, 1);
        let map = CoalescingMap::from_model(&model).unwrap();
        assert!(composite_train(&empty, &map, ElementaryKind::Knn, &Hyperparams::default()).is_err());
        assert!(train_single(&empty, ElementaryKind::Svm, &Hyperparams::default()).is_err());
    }
}
