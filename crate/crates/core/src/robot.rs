//! Robot description: DH chain, joint limits and the DOF partition into
//! ordered components, each carrying one collision capsule.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Capsule, Vec3};
use crate::kinematics::DhRow;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLimit {
    pub lower: f64,
    pub upper: f64,
}

impl JointLimit {
    pub fn symmetric(bound: f64) -> Self {
        JointLimit {
            lower: -bound,
            upper: bound,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// A rigid link group posed by the DOF prefix ending at its last DOF.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub name: String,
    /// Number of DOFs assigned to this component.
    pub dofs: usize,
    /// Whether the DOFs of this component can change collision status.
    pub effective: bool,
    /// Collision geometry in the frame of the component's last joint.
    pub capsule: Capsule,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    name: String,
    dh: Vec<DhRow>,
    limits: Vec<JointLimit>,
    components: Vec<Component>,
    prefix_dims: Vec<usize>,
}

impl RobotModel {
    pub fn new(name: impl Into<String>, dh: Vec<DhRow>, limits: Vec<JointLimit>, components: Vec<Component>) -> Result<Self> {
        let n = dh.len();
        if n == 0 {
            return Err(Error::config("robot has no joints"));
        }
        if limits.len() != n {
            return Err(Error::config(format!("{} joint limits for {n} joints", limits.len())));
        }
        if let Some(i) = dh.iter().position(|r| !r.is_finite()) {
            return Err(Error::config(format!("joint {} has non-finite DH parameters", i + 1)));
        }
        if let Some(i) = limits
            .iter()
            .position(|l| !(l.lower.is_finite() && l.upper.is_finite() && l.lower <= l.upper))
        {
            return Err(Error::config(format!("joint {} has invalid limits", i + 1)));
        }
        if components.is_empty() {
            return Err(Error::config("robot has no components"));
        }
        let mut prefix_dims = Vec::with_capacity(components.len());
        let mut acc = 0;
        for c in &components {
            if c.dofs == 0 {
                return Err(Error::config(format!("component {} owns no DOFs", c.name)));
            }
            if !c.capsule.is_valid() {
                return Err(Error::config(format!("component {} has an invalid capsule", c.name)));
            }
            acc += c.dofs;
            prefix_dims.push(acc);
        }
        if acc != n {
            return Err(Error::config(format!("components own {acc} DOFs but the robot has {n}")));
        }
        Ok(RobotModel {
            name: name.into(),
            dh,
            limits,
            components,
            prefix_dims,
        })
    }

    /// The shipped 6-DOF arm with UR5-like geometry.
    pub fn ur5() -> Self {
        Self::from_toml(include_str!("../configs/ur5.toml")).expect("bundled ur5 config")
    }

    /// The first three joints of the shipped arm.
    pub fn ur5_3dof() -> Self {
        Self::from_toml(include_str!("../configs/ur5-3dof.toml")).expect("bundled 3-dof config")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dof(&self) -> usize {
        self.dh.len()
    }

    /// Number of components `n_R`.
    pub fn levels(&self) -> usize {
        self.components.len()
    }

    pub fn dh(&self) -> &[DhRow] {
        &self.dh
    }

    pub fn limits(&self) -> &[JointLimit] {
        &self.limits
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// `n_i` for every level: DOFs in components `0..=i`.
    pub fn prefix_dims(&self) -> &[usize] {
        &self.prefix_dims
    }

    pub fn prefix_dim(&self, level: usize) -> usize {
        self.prefix_dims[level]
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof() && q.iter().zip(&self.limits).all(|(v, l)| l.contains(*v))
    }

    /// Same chain and geometry with every component marked effective.
    pub fn with_all_effective(&self) -> Self {
        let mut m = self.clone();
        for c in &mut m.components {
            c.effective = true;
        }
        m
    }

    /// Same robot with the given per-component effective flags.
    pub fn with_effective(&self, flags: &[bool]) -> Result<Self> {
        if flags.len() != self.levels() {
            return Err(Error::Dimension {
                expected: self.levels(),
                got: flags.len(),
            });
        }
        let mut m = self.clone();
        for (c, &f) in m.components.iter_mut().zip(flags) {
            c.effective = f;
        }
        Ok(m)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RobotConfig = toml::from_str(text).map_err(|e| Error::format("robot config", e.to_string()))?;
        cfg.build()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_config(&self) -> RobotConfig {
        RobotConfig {
            name: self.name.clone(),
            dof: self.dof(),
            joint: self
                .dh
                .iter()
                .zip(&self.limits)
                .map(|(r, l)| JointConfig {
                    a: r.a,
                    alpha: r.alpha,
                    d: r.d,
                    theta_offset: r.theta_offset,
                    lower: l.lower,
                    upper: l.upper,
                })
                .collect(),
            component: self
                .components
                .iter()
                .map(|c| ComponentConfig {
                    name: c.name.clone(),
                    dofs: c.dofs,
                    effective: c.effective,
                    radius: c.capsule.radius,
                    a: c.capsule.a.into(),
                    b: c.capsule.b.into(),
                })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_config()).expect("robot config serializes")
    }

    /// Hash of the kinematic and collision description.
    pub fn fingerprint(&self) -> String {
        let mut s = String::new();
        for (r, l) in self.dh.iter().zip(&self.limits) {
            s.push_str(&format!("joint {:?} {:?} {:?} {:?} {:?} {:?}\n", r.a, r.alpha, r.d, r.theta_offset, l.lower, l.upper));
        }
        for c in &self.components {
            s.push_str(&format!(
                "component {} {} {:?} {:?} {:?}\n",
                c.dofs,
                c.effective,
                <[f64; 3]>::from(c.capsule.a),
                <[f64; 3]>::from(c.capsule.b),
                c.capsule.radius
            ));
        }
        crate::fingerprint(s.as_bytes())
    }
}

/// On-disk robot description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    pub name: String,
    pub dof: usize,
    pub joint: Vec<JointConfig>,
    pub component: Vec<ComponentConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    pub a: f64,
    pub alpha: f64,
    pub d: f64,
    #[serde(default)]
    pub theta_offset: f64,
    #[serde(default = "neg_pi")]
    pub lower: f64,
    #[serde(default = "pos_pi")]
    pub upper: f64,
}

fn neg_pi() -> f64 {
    -std::f64::consts::PI
}

fn pos_pi() -> f64 {
    std::f64::consts::PI
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentConfig {
    pub name: String,
    pub dofs: usize,
    #[serde(default = "yes")]
    pub effective: bool,
    pub radius: f64,
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl RobotConfig {
    pub fn build(&self) -> Result<RobotModel> {
        if self.joint.len() != self.dof {
            return Err(Error::config(format!("dof = {} but {} joint rows", self.dof, self.joint.len())));
        }
        let dh = self
            .joint
            .iter()
            .map(|j| DhRow {
                a: j.a,
                alpha: j.alpha,
                d: j.d,
                theta_offset: j.theta_offset,
            })
            .collect();
        let limits = self
            .joint
            .iter()
            .map(|j| JointLimit {
                lower: j.lower,
                upper: j.upper,
            })
            .collect();
        let components = self
            .component
            .iter()
            .map(|c| Component {
                name: c.name.clone(),
                dofs: c.dofs,
                effective: c.effective,
                capsule: Capsule::new(Vec3::from(c.a), Vec3::from(c.b), c.radius),
            })
            .collect();
        RobotModel::new(self.name.clone(), dh, limits, components)
    }
}
