//! Exact narrow-phase collision primitives and the per-level collision test.
//!
//! Links are capsules, obstacles are axis-aligned boxes. Contact is strict:
//! a pair collides iff its separation is below the radius (sum), so touching
//! exactly at the surface counts as free.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cspace::LevelLabel;
use crate::error::{check_dim, Error, Result};
use crate::kinematics::{chain_frames, prefix_forward_kinematics, Pose};
use crate::robot::RobotModel;

pub type Vec3 = Vector3<f64>;

/// Segment swept by a sphere of `radius`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vec3, b: Vec3, radius: f64) -> Self {
        Capsule { a, b, radius }
    }

    pub fn transformed(&self, pose: &Pose) -> Capsule {
        Capsule {
            a: pose.apply(&self.a),
            b: pose.apply(&self.b),
            radius: self.radius,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.radius > 0.0 && self.radius.is_finite() && self.a.iter().chain(self.b.iter()).all(|v| v.is_finite())
    }
}

/// Solid axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxObstacle {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
}

impl BoxObstacle {
    pub fn new(center: [f64; 3], half_extents: [f64; 3]) -> Result<Self> {
        if half_extents.iter().any(|h| !(*h > 0.0 && h.is_finite())) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::input(format!("invalid box: center {center:?}, half extents {half_extents:?}")));
        }
        Ok(BoxObstacle { center, half_extents })
    }

    pub fn cube(center: [f64; 3], side: f64) -> Result<Self> {
        Self::new(center, [side / 2.0; 3])
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| (p[i] - self.center[i]).abs() <= self.half_extents[i])
    }
}

/// Euclidean distance from a point to a solid box.
pub fn point_box_distance(p: &Vec3, b: &BoxObstacle) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        let e = (p[i] - b.center[i]).abs() - b.half_extents[i];
        if e > 0.0 {
            s += e * e;
        }
    }
    s.sqrt()
}

/// Euclidean distance between segment `p0`–`p1` and a solid box.
///
/// Along the segment the squared distance is piecewise quadratic, with
/// breakpoints where a coordinate crosses a face plane. Each piece is
/// minimised in closed form, which makes the result exact up to rounding.
pub fn segment_box_distance(p0: &Vec3, p1: &Vec3, b: &BoxObstacle) -> f64 {
    let c = Vec3::from(b.center);
    let h = b.half_extents;
    let o = p0 - c;
    let d = p1 - p0;

    let mut breaks = [0.0f64; 8];
    let mut nb = 0;
    breaks[nb] = 0.0;
    nb += 1;
    for i in 0..3 {
        if d[i] != 0.0 {
            for face in [-h[i], h[i]] {
                let t = (face - o[i]) / d[i];
                if t > 0.0 && t < 1.0 {
                    breaks[nb] = t;
                    nb += 1;
                }
            }
        }
    }
    breaks[nb] = 1.0;
    nb += 1;
    let breaks = &mut breaks[..nb];
    breaks.sort_unstable_by(|a, b| a.total_cmp(b));

    let at = |t: f64| point_box_distance(&(p0 + d * t), b);
    let mut best = at(0.0).min(at(1.0));
    if best == 0.0 {
        return 0.0;
    }
    for w in breaks.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 <= t0 {
            continue;
        }
        let tm = 0.5 * (t0 + t1);
        // Quadratic a t^2 + b t over the axes that lie outside the slab on
        // this piece.
        let (mut qa, mut qb) = (0.0, 0.0);
        for i in 0..3 {
            let x = o[i] + d[i] * tm;
            let off = if x > h[i] {
                o[i] - h[i]
            } else if x < -h[i] {
                o[i] + h[i]
            } else {
                continue;
            };
            qa += d[i] * d[i];
            qb += 2.0 * d[i] * off;
        }
        let t = if qa > 0.0 { (-qb / (2.0 * qa)).clamp(t0, t1) } else { tm };
        best = best.min(at(t));
        if best == 0.0 {
            break;
        }
    }
    best
}

/// Closest-point parameters `(s, t)` between segments `p1`–`q1` and `p2`–`q2`.
fn closest_params(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> (f64, f64) {
    const EPS: f64 = 1e-18;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    if a <= EPS && e <= EPS {
        return (0.0, 0.0);
    }
    if a <= EPS {
        return (0.0, (f / e).clamp(0.0, 1.0));
    }
    let c = d1.dot(&r);
    if e <= EPS {
        return ((-c / a).clamp(0.0, 1.0), 0.0);
    }
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > EPS * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    (s, t)
}

/// Euclidean distance between two segments.
pub fn segment_segment_distance(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3) -> f64 {
    let (s, t) = closest_params(p1, q1, p2, q2);
    let c1 = p1 + (q1 - p1) * s;
    let c2 = p2 + (q2 - p2) * t;
    (c1 - c2).norm()
}

pub fn capsule_box_collide(c: &Capsule, b: &BoxObstacle) -> bool {
    segment_box_distance(&c.a, &c.b, b) < c.radius
}

pub fn capsule_capsule_collide(x: &Capsule, y: &Capsule) -> bool {
    segment_segment_distance(&x.a, &x.b, &y.a, &y.b) < x.radius + y.radius
}

/// Capsule against the half-space `z < height`.
pub fn capsule_ground_collide(c: &Capsule, height: f64) -> bool {
    c.a.z.min(c.b.z) - height < c.radius
}

/// Parameters for random cube scenes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGenParams {
    /// Cube side, meters.
    pub side: f64,
    /// Cube centers are uniform in the spherical shell `[shell_min, shell_max]`
    /// around the robot base.
    pub shell_min: f64,
    pub shell_max: f64,
    /// Lower bound on center height; `None` keeps the whole shell.
    pub z_min: Option<f64>,
}

impl Default for SceneGenParams {
    fn default() -> Self {
        SceneGenParams {
            side: 0.3,
            shell_min: 0.4,
            shell_max: 0.5,
            z_min: None,
        }
    }
}

/// Static environment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default, rename = "box")]
    pub obstacles: Vec<BoxObstacle>,
    /// Height of an optional ground plane; off when `None`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground: Option<f64>,
    /// Seed the scene was generated from, when it was generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<SceneGenParams>,
}

impl Scene {
    pub fn empty() -> Self {
        Scene::default()
    }

    pub fn new(obstacles: Vec<BoxObstacle>) -> Self {
        Scene {
            obstacles,
            ..Scene::default()
        }
    }

    pub fn with_ground(mut self, height: f64) -> Self {
        self.ground = Some(height);
        self
    }

    /// `count` cubes drawn uniformly in the shell. Scenes from the same seed
    /// are nested: the first `k` cubes do not depend on `count`.
    pub fn random(count: usize, seed: u64, params: SceneGenParams) -> Result<Self> {
        let SceneGenParams {
            side,
            shell_min,
            shell_max,
            z_min,
        } = params;
        if !(side > 0.0 && shell_min >= 0.0 && shell_max > shell_min) {
            return Err(Error::input(format!("invalid scene generator parameters {params:?}")));
        }
        if let Some(z) = z_min {
            if z >= shell_max {
                return Err(Error::input("z_min leaves no room in the shell"));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut obstacles = Vec::with_capacity(count);
        while obstacles.len() < count {
            let p = Vec3::new(
                rng.random_range(-shell_max..shell_max),
                rng.random_range(-shell_max..shell_max),
                rng.random_range(-shell_max..shell_max),
            );
            let r = p.norm();
            if r < shell_min || r > shell_max || z_min.is_some_and(|z| p.z < z) {
                continue;
            }
            obstacles.push(BoxObstacle::cube([p.x, p.y, p.z], side)?);
        }
        Ok(Scene {
            obstacles,
            ground: None,
            seed: Some(seed),
            generator: Some(params),
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let scene: Scene = toml::from_str(text).map_err(|e| Error::format("scene", e.to_string()))?;
        for b in &scene.obstacles {
            BoxObstacle::new(b.center, b.half_extents)?;
        }
        Ok(scene)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    /// Hash of the collision-relevant content (boxes and ground).
    pub fn fingerprint(&self) -> String {
        let mut s = String::new();
        for b in &self.obstacles {
            s.push_str(&format!("box {:?} {:?}\n", b.center, b.half_extents));
        }
        if let Some(g) = self.ground {
            s.push_str(&format!("ground {g:?}\n"));
        }
        crate::fingerprint(s.as_bytes())
    }

    fn capsule_hits_environment(&self, c: &Capsule) -> bool {
        if let Some(g) = self.ground {
            if capsule_ground_collide(c, g) {
                return true;
            }
        }
        self.obstacles.iter().any(|b| capsule_box_collide(c, b))
    }
}

/// Does component `level` (0-based), posed from `q_prefix`, hit an obstacle,
/// the ground, or a non-adjacent earlier component?
pub fn component_collision(model: &RobotModel, scene: &Scene, q_prefix: &[f64], level: usize) -> Result<bool> {
    let levels = model.levels();
    if level >= levels {
        return Err(Error::LevelOutOfRange { level, levels });
    }
    check_dim(model.prefix_dim(level), q_prefix.len())?;
    let link = model.components()[level]
        .capsule
        .transformed(&prefix_forward_kinematics(model, q_prefix, level)?);
    if scene.capsule_hits_environment(&link) {
        return Ok(true);
    }
    for j in 0..level.saturating_sub(1) {
        let nj = model.prefix_dim(j);
        let other = model.components()[j]
            .capsule
            .transformed(&prefix_forward_kinematics(model, &q_prefix[..nj], j)?);
        if capsule_capsule_collide(&link, &other) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// World-frame capsule of every component.
pub fn world_capsules(model: &RobotModel, q: &[f64]) -> Result<Vec<Capsule>> {
    check_dim(model.dof(), q.len())?;
    let mut frames = Vec::with_capacity(model.dof());
    chain_frames(model.dh(), q, model.dof(), &mut frames);
    Ok(model
        .components()
        .iter()
        .zip(model.prefix_dims())
        .map(|(c, &n)| c.capsule.transformed(&frames[n - 1]))
        .collect())
}

/// Per-level collision flags for a full configuration.
pub fn exact_collision(model: &RobotModel, scene: &Scene, q: &[f64]) -> Result<LevelLabel> {
    let links = world_capsules(model, q)?;
    let mut label = LevelLabel::free(model.levels());
    for (i, link) in links.iter().enumerate() {
        let hit = scene.capsule_hits_environment(link)
            || links[..i.saturating_sub(1)].iter().any(|o| capsule_capsule_collide(link, o));
        label.set(i, hit);
    }
    Ok(label)
}

/// Overall collision test, stopping at the first colliding component.
pub fn in_collision(model: &RobotModel, scene: &Scene, q: &[f64]) -> Result<bool> {
    let links = world_capsules(model, q)?;
    Ok(links.iter().enumerate().any(|(i, link)| {
        scene.capsule_hits_environment(link) || links[..i.saturating_sub(1)].iter().any(|o| capsule_capsule_collide(link, o))
    }))
}

/// Whole-robot check that enumerates every primitive pair once: each link
/// against each box and the ground, and every non-adjacent link pair. Shares
/// only the primitive distance routines with the per-level path.
pub fn all_pairs_in_collision(model: &RobotModel, scene: &Scene, q: &[f64]) -> Result<bool> {
    let links = world_capsules(model, q)?;
    let mut hit = false;
    for link in &links {
        for b in &scene.obstacles {
            hit |= segment_box_distance(&link.a, &link.b, b) < link.radius;
        }
        if let Some(g) = scene.ground {
            hit |= capsule_ground_collide(link, g);
        }
    }
    for i in 0..links.len() {
        for j in (i + 2)..links.len() {
            let (x, y) = (&links[i], &links[j]);
            hit |= segment_segment_distance(&x.a, &x.b, &y.a, &y.b) < x.radius + y.radius;
        }
    }
    Ok(hit)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;

    fn unit_cube() -> BoxObstacle {
        BoxObstacle::new([0.0; 3], [0.5; 3]).unwrap()
    }

    /// Dense sampling along the segment; each sample's box distance is exact.
    fn sampled_segment_box(p0: &Vec3, p1: &Vec3, b: &BoxObstacle, n: usize) -> f64 {
        (0..=n)
            .map(|i| point_box_distance(&(p0 + (p1 - p0) * (i as f64 / n as f64)), b))
            .fold(f64::INFINITY, f64::min)
    }

    fn sampled_segment_segment(p1: &Vec3, q1: &Vec3, p2: &Vec3, q2: &Vec3, n: usize) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..=n {
            let a = p1 + (q1 - p1) * (i as f64 / n as f64);
            for j in 0..=n {
                let b = p2 + (q2 - p2) * (j as f64 / n as f64);
                best = best.min((a - b).norm());
            }
        }
        best
    }

    #[test]
    fn segment_inside_box_is_zero() {
        let b = unit_cube();
        assert_eq!(segment_box_distance(&Vec3::new(-0.2, 0.1, 0.0), &Vec3::new(0.3, -0.1, 0.2), &b), 0.0);
    }

    #[test]
    fn axis_separated_segment() {
        let b = unit_cube();
        let d = segment_box_distance(&Vec3::new(2.0, 0.0, 0.0), &Vec3::new(3.0, 0.0, 0.0), &b);
        assert!((d - 1.5).abs() < 1e-15);
    }

    #[test]
    fn segment_passing_through_box() {
        let b = unit_cube();
        assert_eq!(segment_box_distance(&Vec3::new(-2.0, 0.1, 0.1), &Vec3::new(2.0, 0.0, 0.0), &b), 0.0);
    }

    #[test]
    fn segment_box_matches_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..300 {
            let b = BoxObstacle::new(
                [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                [rng.random_range(0.05..0.6), rng.random_range(0.05..0.6), rng.random_range(0.05..0.6)],
            )
            .unwrap();
            let p0 = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let p1 = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let exact = segment_box_distance(&p0, &p1, &b);
            let sampled = sampled_segment_box(&p0, &p1, &b, 10_000);
            assert!(exact <= sampled + 1e-12, "exact {exact} above sampled {sampled}");
            assert!(sampled - exact < 1e-3, "exact {exact} vs sampled {sampled}");
        }
    }

    #[test]
    fn capsule_box_cases() {
        let b = unit_cube();
        let r = 0.1;
        let through = Capsule::new(Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), r);
        assert!(capsule_box_collide(&through, &b));
        let far = Capsule::new(Vec3::new(0.5 + 2.0 * r, -1.0, 0.0), Vec3::new(0.5 + 2.0 * r, 1.0, 0.0), r);
        assert!(!capsule_box_collide(&far, &b));
        let graze = Capsule::new(Vec3::new(0.5 + r - 1e-9, -1.0, 0.0), Vec3::new(0.5 + r - 1e-9, 1.0, 0.0), r);
        assert!(segment_box_distance(&graze.a, &graze.b, &b) < r);
        assert!(capsule_box_collide(&graze, &b));
        // Exactly at the radius counts as free.
        let touch = Capsule::new(Vec3::new(0.75, -1.0, 0.0), Vec3::new(0.75, 1.0, 0.0), 0.25);
        assert_eq!(segment_box_distance(&touch.a, &touch.b, &b), 0.25);
        assert!(!capsule_box_collide(&touch, &b));
    }

    #[test]
    fn capsule_capsule_cases() {
        let a = Capsule::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), 0.1);
        assert!(capsule_capsule_collide(&a, &a));
        let mut b = a;
        b.a.y += 10.0 * 0.2;
        b.b.y += 10.0 * 0.2;
        assert!(!capsule_capsule_collide(&a, &b));
    }

    #[test]
    fn segment_segment_matches_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut v = || Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        for _ in 0..200 {
            let (p1, q1, p2, q2) = (v(), v(), v(), v());
            let exact = segment_segment_distance(&p1, &q1, &p2, &q2);
            let sampled = sampled_segment_segment(&p1, &q1, &p2, &q2, 400);
            assert!(exact <= sampled + 1e-12);
            assert!(sampled - exact < 1e-2);
        }
        // Skew near-touching pair.
        let (p1, q1) = (Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0));
        let (p2, q2) = (Vec3::new(0.3, -1.0, 0.1999), Vec3::new(0.3, 1.0, 0.1999));
        let d = segment_segment_distance(&p1, &q1, &p2, &q2);
        assert!((d - 0.1999).abs() < 1e-12);
        assert!((sampled_segment_segment(&p1, &q1, &p2, &q2, 2000) - d).abs() < 1e-3);
        assert!(capsule_capsule_collide(&Capsule::new(p1, q1, 0.1), &Capsule::new(p2, q2, 0.1)));
    }

    #[test]
    fn degenerate_segments() {
        let p = Vec3::new(0.0, 0.0, 0.0);
        let q = Vec3::new(0.0, 3.0, 4.0);
        assert_eq!(segment_segment_distance(&p, &p, &q, &q), 5.0);
        assert_eq!(segment_box_distance(&Vec3::new(2.0, 0.0, 0.0), &Vec3::new(2.0, 0.0, 0.0), &unit_cube()), 1.5);
    }

    proptest! {
        #[test]
        fn box_reflection_symmetry(
            p0 in prop::array::uniform3(-2.0f64..2.0),
            p1 in prop::array::uniform3(-2.0f64..2.0),
            c in prop::array::uniform3(-1.0f64..1.0),
            h in prop::array::uniform3(0.05f64..0.8),
            axis in 0usize..3,
        ) {
            let b = BoxObstacle::new(c, h).unwrap();
            let reflect = |p: [f64; 3]| {
                let mut r = p;
                r[axis] = 2.0 * c[axis] - p[axis];
                Vec3::from(r)
            };
            let d = segment_box_distance(&Vec3::from(p0), &Vec3::from(p1), &b);
            let dr = segment_box_distance(&reflect(p0), &reflect(p1), &b);
            prop_assert!((d - dr).abs() < 1e-12);
            let rev = segment_box_distance(&Vec3::from(p1), &Vec3::from(p0), &b);
            prop_assert!((d - rev).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_collision_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100_000 {
            let b = BoxObstacle::new(
                [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)],
                [rng.random_range(0.05..0.3), rng.random_range(0.05..0.3), rng.random_range(0.05..0.3)],
            )
            .unwrap();
            let c = Capsule::new(
                Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                rng.random_range(0.01..0.3),
            );
            assert_eq!(capsule_box_collide(&c, &b), segment_box_distance(&c.a, &c.b, &b) < c.radius);
        }
    }

    #[test]
    fn random_scenes_are_nested_and_in_shell() {
        let p = SceneGenParams::default();
        let s8 = Scene::random(8, 42, p).unwrap();
        let s2 = Scene::random(2, 42, p).unwrap();
        assert_eq!(&s8.obstacles[..2], &s2.obstacles[..]);
        for b in &s8.obstacles {
            let r = Vec3::from(b.center).norm();
            assert!(r >= p.shell_min && r <= p.shell_max);
            assert_eq!(b.half_extents, [p.side / 2.0; 3]);
        }
        assert_ne!(s8.fingerprint(), s2.fingerprint());
    }

    #[test]
    fn scene_toml_roundtrip() {
        let s = Scene::random(3, 1, SceneGenParams::default()).unwrap().with_ground(-0.4);
        let back = Scene::from_toml(&s.to_toml()).unwrap();
        assert_eq!(s, back);
        assert!(Scene::from_toml("[[box]]\ncenter = [0,0,0]\nhalf_extents = [0.1, -1, 0.1]\n").is_err());
    }

    #[test]
    fn ground_plane() {
        let c = Capsule::new(Vec3::new(0.0, 0.0, 0.5), Vec3::new(0.0, 0.0, 0.05), 0.1);
        assert!(capsule_ground_collide(&c, 0.0));
        assert!(!capsule_ground_collide(&c, -0.05));
    }
}
