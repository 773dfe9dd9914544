use super::kdtree::NeighborIndex;
use super::{ElementaryClassifier, Label};
use crate::error::{check_dim, Error, Result};

/// Majority vote among the `k` nearest stored points. Ties go to
/// `Collision`.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnModel {
    k: usize,
    index: NeighborIndex,
    labels: Vec<Label>,
}

impl KnnModel {
    pub fn train(points: &[f64], dim: usize, labels: &[Label], k: usize) -> Result<Self> {
        if dim == 0 || points.len() != labels.len() * dim {
            return Err(Error::input(format!(
                "{} coordinates do not form {} points of dimension {dim}",
                points.len(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::input("KNN needs at least one training point"));
        }
        if k == 0 || k > labels.len() {
            return Err(Error::input(format!("k = {k} with {} training points", labels.len())));
        }
        Ok(KnnModel {
            k,
            index: NeighborIndex::new(points.to_vec(), dim),
            labels: labels.to_vec(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Stored points (row-major) and their labels, by insertion order.
    pub fn training_set(&self) -> (&[f64], &[Label]) {
        (self.index.points(), &self.labels)
    }

    pub fn pending(&self) -> usize {
        self.index.pending()
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        let nn = self.index.knn(x, self.k);
        Self::vote(nn.iter().map(|&(_, id)| self.labels[id as usize]), self.k)
    }

    pub(crate) fn vote(labels: impl Iterator<Item = Label>, k: usize) -> Label {
        let free = labels.filter(|l| l.is_free()).count();
        if 2 * free > k {
            Label::Free
        } else {
            Label::Collision
        }
    }
}

impl ElementaryClassifier for KnnModel {
    fn dim(&self) -> usize {
        self.index.dim()
    }

    fn predict(&self, x: &[f64]) -> Label {
        KnnModel::predict(self, x)
    }

    fn update(&mut self, x: &[f64], label: Label) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        self.index.insert(x);
        self.labels.push(label);
        Ok(())
    }
}
