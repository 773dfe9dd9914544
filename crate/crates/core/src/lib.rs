//! Configuration-space decomposition by DOF prefixes, composite learned
//! collision classifiers built on it, and an RRT planner that uses them with
//! exact verification and repair.
//!
//! Levels are 0-based throughout the API: level `i` is component `i` of the
//! [`RobotModel`], posed by the first `prefix_dim(i)` joint angles.

pub mod classifiers;
pub mod cspace;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod kinematics;
pub mod par;
pub mod planner;
pub mod robot;

pub use classifiers::{
    CoalescingMap, CompositeClassifier, CompositePrediction, Elementary, ElementaryClassifier, ElementaryKind, Hyperparams, KnnModel, Label,
    SvmModel, SvmParams,
};
pub use cspace::{build_dataset, level_histogram, verify_decomposition, Dataset, LabeledSample, LevelLabel};
pub use error::{Error, Result};
pub use geometry::{exact_collision, BoxObstacle, Capsule, Scene, SceneGenParams};
pub use kinematics::{forward_kinematics, prefix_forward_kinematics, DhRow, JointVector, Pose};
pub use par::Exec;
pub use planner::{PlanParams, PlanResult, PlanStatus};
pub use robot::RobotModel;

/// Short hex digest used to tie files to the robot/scene that produced them.
pub fn fingerprint(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes)[..8].iter().map(|b| format!("{b:02x}")).collect()
}
