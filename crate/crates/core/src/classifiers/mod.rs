//! Elementary classifiers (KNN, RBF-SVM) over prefix subspaces and the
//! composite classifier that ANDs them level by level.

mod composite;
mod io;
mod kdtree;
mod knn;
mod svm;

pub use composite::{
    composite_train, train_single, CoalescingMap, ComponentOracle, CompositeClassifier, CompositePrediction, SharedComposite,
};
pub use io::{read_model, write_model, ModelFile};
pub use kdtree::{KdTree, NeighborIndex};
pub use knn::KnnModel;
pub use svm::{default_gamma, SvmModel, SvmParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary collision label; `Free` is the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Free,
    Collision,
}

impl Label {
    pub fn from_collision(collides: bool) -> Self {
        if collides {
            Label::Collision
        } else {
            Label::Free
        }
    }

    pub fn is_free(self) -> bool {
        self == Label::Free
    }

    /// `+1` for free, `-1` for collision.
    pub fn sign(self) -> f64 {
        match self {
            Label::Free => 1.0,
            Label::Collision => -1.0,
        }
    }
}

/// Binary predictor over one prefix subspace.
pub trait ElementaryClassifier: Send + Sync {
    /// Dimension of the points it accepts.
    fn dim(&self) -> usize;

    fn predict(&self, x: &[f64]) -> Label;

    /// Incorporates one more labeled point.
    fn update(&mut self, x: &[f64], label: Label) -> Result<()>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementaryKind {
    Knn,
    Svm,
}

impl ElementaryKind {
    pub fn name(self) -> &'static str {
        match self {
            ElementaryKind::Knn => "knn",
            ElementaryKind::Svm => "svm",
        }
    }
}

impl std::str::FromStr for ElementaryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(ElementaryKind::Knn),
            "svm" => Ok(ElementaryKind::Svm),
            other => Err(Error::input(format!("unknown classifier kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for ElementaryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparams {
    pub k: usize,
    pub svm: SvmParams,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { k: 5, svm: SvmParams::default() }
    }
}

/// The concrete elementary classifiers.
#[derive(Clone, Debug, PartialEq)]
pub enum Elementary {
    Knn(KnnModel),
    Svm(SvmModel),
}

impl Elementary {
    /// Trains on `points` (row-major, `dim` columns).
    pub fn train(kind: ElementaryKind, points: &[f64], dim: usize, labels: &[Label], hyper: &Hyperparams) -> Result<Self> {
        Ok(match kind {
            ElementaryKind::Knn => Elementary::Knn(KnnModel::train(points, dim, labels, hyper.k)?),
            ElementaryKind::Svm => Elementary::Svm(SvmModel::train(points, dim, labels, &hyper.svm)?),
        })
    }

    pub fn kind(&self) -> ElementaryKind {
        match self {
            Elementary::Knn(_) => ElementaryKind::Knn,
            Elementary::Svm(_) => ElementaryKind::Svm,
        }
    }
}

impl ElementaryClassifier for Elementary {
    fn dim(&self) -> usize {
        match self {
            Elementary::Knn(m) => m.dim(),
            Elementary::Svm(m) => m.dim(),
        }
    }

    fn predict(&self, x: &[f64]) -> Label {
        match self {
            Elementary::Knn(m) => m.predict(x),
            Elementary::Svm(m) => m.predict(x),
        }
    }

    fn update(&mut self, x: &[f64], label: Label) -> Result<()> {
        match self {
            Elementary::Knn(m) => m.update(x, label),
            Elementary::Svm(m) => m.update(x, label),
        }
    }
}
