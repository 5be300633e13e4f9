use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::math::{Aabb, Vec2};

use super::body::{BodyTag, RigidBody};
use super::collide::{collide_polygons, Manifold};
use super::polygon::{area_centroid, clip_polygon, Polygon};

pub const DEFAULT_DT: f64 = 1.0 / 60.0;
pub const DEFAULT_SOLVER_ITERATIONS: usize = 10;
pub const DEFAULT_GRAVITY: Vec2 = Vec2::new(0.0, -9.81);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Fraction of excess penetration removed per step.
    pub baumgarte: f64,
    /// Penetration tolerated without positional correction.
    pub slop: f64,
    /// Closing speed below which contacts do not bounce.
    pub restitution_threshold: f64,
    /// Base distance at which separated pairs already get a contact.
    pub speculative_distance: f64,
    pub position_iterations: usize,
    pub max_correction: f64,
    /// Speeds below this are zeroed on supported bodies.
    pub rest_velocity: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            baumgarte: 0.2,
            slop: 0.005,
            restitution_threshold: 1.0,
            speculative_distance: 0.02,
            position_iterations: 3,
            max_correction: 0.2,
            rest_velocity: 1e-9,
        }
    }
}

/// Region that drags (and buoys) bodies with a matching tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Medium {
    pub region: Polygon,
    /// Linear drag coefficient, mass per second, scaled by submerged fraction.
    pub drag: f64,
    /// Density used for buoyancy; zero disables it.
    pub density: f64,
    pub affects: BodyTag,
}

/// Public view of an overlapping fixture pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactManifold {
    pub body_pair: (usize, usize),
    /// Unit normal from the first body toward the second.
    pub normal: Vec2,
    pub penetration: f64,
    pub contact_points: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub gravity: Vec2,
    pub bodies: Vec<RigidBody>,
    dt: f64,
    pub solver_iterations: usize,
    step_count: u64,
    pub config: SolverConfig,
    pub media: Vec<Medium>,
}

impl Default for World {
    fn default() -> Self {
        Self::new(DEFAULT_GRAVITY, DEFAULT_DT, DEFAULT_SOLVER_ITERATIONS)
    }
}

struct PairManifold {
    a: usize,
    b: usize,
    manifold: Manifold,
}

struct ConstraintPoint {
    r_a: Vec2,
    r_b: Vec2,
    separation: f64,
    normal_mass: f64,
    tangent_mass: f64,
    normal_impulse: f64,
    tangent_impulse: f64,
    max_normal_impulse: f64,
    /// Normal relative velocity before solving.
    approach: f64,
    /// Normal relative velocity before this step's external forces.
    approach_free: f64,
    /// Lower bound on the normal relative velocity during the relax passes.
    relax_target: f64,
}

struct Constraint {
    a: usize,
    b: usize,
    normal: Vec2,
    friction: f64,
    restitution: f64,
    points: Vec<ConstraintPoint>,
    /// Effective-mass matrix for two-point manifolds when well conditioned.
    block: Option<[[f64; 2]; 2]>,
}

#[derive(Clone, Copy)]
struct Velocity {
    v: Vec2,
    w: f64,
    inv_mass: f64,
    inv_inertia: f64,
}

impl World {
    pub fn new(gravity: Vec2, dt: f64, solver_iterations: usize) -> Self {
        Self {
            gravity,
            bodies: Vec::new(),
            dt,
            solver_iterations: solver_iterations.max(1),
            step_count: 0,
            config: SolverConfig::default(),
            media: Vec::new(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn time(&self) -> f64 {
        self.step_count as f64 * self.dt
    }

    pub fn add_body(&mut self, body: RigidBody) -> usize {
        self.bodies.push(body);
        self.bodies.len() - 1
    }

    /// Advances the world by one fixed step.
    pub fn step(&mut self) {
        let dt = self.dt;
        let fixtures: Vec<Vec<Polygon>> = self.bodies.iter().map(|b| b.world_fixtures()).collect();

        let before: Vec<Velocity> = self.velocities();
        self.integrate_velocities(&fixtures);

        let pairs = self.find_manifolds(&fixtures, None);
        let mut constraints = self.prepare(&pairs);
        let mut vel = self.velocities();

        for c in &mut constraints {
            let (va, vb) = (vel[c.a], vel[c.b]);
            let (fa, fb) = (before[c.a], before[c.b]);
            for p in &mut c.points {
                p.approach = relative_velocity(&va, &vb, p).dot(c.normal);
                p.approach_free = relative_velocity(&fa, &fb, p).dot(c.normal);
            }
        }
        for _ in 0..self.solver_iterations {
            for c in &mut constraints {
                solve_friction(c, &mut vel);
                let targets: Vec<f64> = c.points.iter().map(|p| p.relax_target).collect();
                solve_normal(c, &mut vel, &targets);
                for p in &mut c.points {
                    p.max_normal_impulse = p.max_normal_impulse.max(p.normal_impulse);
                }
            }
        }
        let threshold = self.config.restitution_threshold;
        for c in &mut constraints {
            if c.restitution == 0.0 {
                continue;
            }
            let bounce = |p: &ConstraintPoint| p.approach < -threshold && p.max_normal_impulse > 0.0;
            if !c.points.iter().any(bounce) {
                continue;
            }
            let targets: Vec<f64> = c
                .points
                .iter()
                .map(|p| {
                    if bounce(p) {
                        // Reflect the pre-force velocity, then re-apply this step's forces.
                        (p.approach - p.approach_free) - c.restitution * p.approach_free
                    } else {
                        p.relax_target
                    }
                })
                .collect();
            let relax: Vec<f64> = c.points.iter().map(|p| p.relax_target).collect();
            let saved = (c.points.iter().map(|p| p.normal_impulse).collect::<Vec<_>>(), vel[c.a], vel[c.b]);
            let positions = (self.bodies[c.a].position, self.bodies[c.b].position);
            let budget = pair_energy(&before, c, positions, self.gravity, 0.0);
            let bounce_with = |c: &mut Constraint, vel: &mut [Velocity], scale: f64| {
                for (p, j) in c.points.iter_mut().zip(&saved.0) {
                    p.normal_impulse = *j;
                }
                vel[c.a] = saved.1;
                vel[c.b] = saved.2;
                let scaled: Vec<f64> = targets
                    .iter()
                    .zip(&relax)
                    .map(|(t, r)| r.max(r + (t - r) * scale))
                    .collect();
                solve_normal(c, vel, &scaled);
                pair_energy(vel, c, positions, self.gravity, dt) <= budget
            };
            // Friction and restitution together can inject energy at spinning
            // corners; scale the bounce back until the pair's energy does not grow.
            if !bounce_with(c, &mut vel, 1.0) {
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..12 {
                    let mid = 0.5 * (lo + hi);
                    if bounce_with(c, &mut vel, mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                bounce_with(c, &mut vel, lo);
            }
        }

        let mut supported = vec![false; self.bodies.len()];
        for c in &constraints {
            if c.points.iter().any(|p| p.normal_impulse > 0.0) {
                supported[c.a] = true;
                supported[c.b] = true;
            }
        }
        let rest = self.config.rest_velocity;
        for (i, body) in self.bodies.iter_mut().enumerate() {
            if body.is_static() {
                continue;
            }
            let mut v = vel[i].v;
            let mut w = vel[i].w;
            if supported[i] && v.length() < rest && w.abs() < rest {
                v = Vec2::ZERO;
                w = 0.0;
            }
            body.linear_velocity = v;
            body.angular_velocity = w;
        }

        self.correct_positions(&constraints);

        for body in self.bodies.iter_mut().filter(|b| !b.is_static()) {
            body.position += body.linear_velocity * dt;
            body.angle += body.angular_velocity * dt;
        }
        self.step_count += 1;
    }

    fn velocities(&self) -> Vec<Velocity> {
        self.bodies
            .iter()
            .map(|b| Velocity {
                v: b.linear_velocity,
                w: b.angular_velocity,
                inv_mass: b.inverse_mass(),
                inv_inertia: b.inverse_inertia(),
            })
            .collect()
    }

    fn integrate_velocities(&mut self, fixtures: &[Vec<Polygon>]) {
        let dt = self.dt;
        let gravity = self.gravity;
        for (i, body) in self.bodies.iter_mut().enumerate() {
            if body.is_static() {
                continue;
            }
            let mut force = Vec2::ZERO;
            let mut torque = 0.0;
            for medium in self.media.iter().filter(|m| m.affects == body.tag) {
                let (f, t) = medium_load(medium, body, &fixtures[i], gravity);
                force += f;
                torque += t;
            }
            body.linear_velocity += (gravity + force * body.inverse_mass()) * dt;
            body.angular_velocity += torque * body.inverse_inertia() * dt;
        }
    }

    /// Every colliding fixture pair of distinct bodies closer than `margin`,
    /// or than a velocity-dependent speculative margin when `None`.
    fn find_manifolds(&self, fixtures: &[Vec<Polygon>], margin: Option<f64>) -> Vec<PairManifold> {
        let dt = self.dt;
        let base = self.config.speculative_distance;
        let fixture_boxes: Vec<Vec<Aabb>> = fixtures
            .iter()
            .map(|fs| fs.iter().map(Polygon::aabb).collect())
            .collect();
        let body_boxes: Vec<Option<Aabb>> = fixture_boxes
            .iter()
            .map(|bs| bs.iter().copied().reduce(Aabb::union))
            .collect();
        let mut out = Vec::new();
        for i in 0..self.bodies.len() {
            let a = &self.bodies[i];
            let Some(box_a) = body_boxes[i] else { continue };
            if !a.collides() {
                continue;
            }
            for j in (i + 1)..self.bodies.len() {
                let b = &self.bodies[j];
                if !b.collides() || (a.is_static() && b.is_static()) {
                    continue;
                }
                let Some(box_b) = body_boxes[j] else { continue };
                let margin = margin.unwrap_or_else(|| {
                    let sweep = (a.linear_velocity - b.linear_velocity).length()
                        + a.angular_velocity.abs() * a.bounding_radius()
                        + b.angular_velocity.abs() * b.bounding_radius();
                    base + sweep * dt
                });
                if !box_a.expanded(margin).overlaps(&box_b) {
                    continue;
                }
                for (fa, ba) in fixtures[i].iter().zip(&fixture_boxes[i]) {
                    let ba = ba.expanded(margin);
                    for (fb, bb) in fixtures[j].iter().zip(&fixture_boxes[j]) {
                        if !ba.overlaps(bb) {
                            continue;
                        }
                        if let Some(manifold) = collide_polygons(fa, fb, margin) {
                            out.push(PairManifold { a: i, b: j, manifold });
                        }
                    }
                }
            }
        }
        out
    }

    fn prepare(&self, pairs: &[PairManifold]) -> Vec<Constraint> {
        let inv_dt = 1.0 / self.dt;
        pairs
            .iter()
            .map(|pm| {
                let a = &self.bodies[pm.a];
                let b = &self.bodies[pm.b];
                let n = pm.manifold.normal;
                let t = tangent(n);
                let (ima, imb) = (a.inverse_mass(), b.inverse_mass());
                let (iia, iib) = (a.inverse_inertia(), b.inverse_inertia());
                let points: Vec<ConstraintPoint> = pm
                    .manifold
                    .points
                    .iter()
                    .map(|cp| {
                        let r_a = cp.point - a.position;
                        let r_b = cp.point - b.position;
                        let rna = r_a.cross(n);
                        let rnb = r_b.cross(n);
                        let kn = ima + imb + iia * rna * rna + iib * rnb * rnb;
                        let rta = r_a.cross(t);
                        let rtb = r_b.cross(t);
                        let kt = ima + imb + iia * rta * rta + iib * rtb * rtb;
                        ConstraintPoint {
                            r_a,
                            r_b,
                            separation: cp.separation,
                            normal_mass: if kn > 0.0 { 1.0 / kn } else { 0.0 },
                            tangent_mass: if kt > 0.0 { 1.0 / kt } else { 0.0 },
                            normal_impulse: 0.0,
                            tangent_impulse: 0.0,
                            max_normal_impulse: 0.0,
                            approach: 0.0,
                            approach_free: 0.0,
                            relax_target: -(cp.separation.max(0.0)) * inv_dt,
                        }
                    })
                    .collect();
                let block = if points.len() == 2 {
                    let (p1, p2) = (&points[0], &points[1]);
                    let rn1a = p1.r_a.cross(n);
                    let rn1b = p1.r_b.cross(n);
                    let rn2a = p2.r_a.cross(n);
                    let rn2b = p2.r_b.cross(n);
                    let k11 = ima + imb + iia * rn1a * rn1a + iib * rn1b * rn1b;
                    let k22 = ima + imb + iia * rn2a * rn2a + iib * rn2b * rn2b;
                    let k12 = ima + imb + iia * rn1a * rn2a + iib * rn1b * rn2b;
                    let det = k11 * k22 - k12 * k12;
                    (k11 * k11 < 1000.0 * det).then_some([[k11, k12], [k12, k22]])
                } else {
                    None
                };
                Constraint {
                    a: pm.a,
                    b: pm.b,
                    normal: n,
                    friction: (a.material.friction * b.material.friction).sqrt(),
                    restitution: a.material.restitution.max(b.material.restitution),
                    points,
                    block,
                }
            })
            .collect()
    }

    fn correct_positions(&mut self, constraints: &[Constraint]) {
        let n_bodies = self.bodies.len();
        let mut dp = vec![Vec2::ZERO; n_bodies];
        let mut da = vec![0.0f64; n_bodies];
        let SolverConfig {
            baumgarte,
            slop,
            max_correction,
            position_iterations,
            ..
        } = self.config;
        if !constraints
            .iter()
            .any(|c| c.points.iter().any(|p| p.separation < -slop))
        {
            return;
        }
        for _ in 0..position_iterations {
            for c in constraints {
                let a = &self.bodies[c.a];
                let b = &self.bodies[c.b];
                let (ima, imb) = (a.inverse_mass(), b.inverse_mass());
                let (iia, iib) = (a.inverse_inertia(), b.inverse_inertia());
                for p in &c.points {
                    let moved = (dp[c.b] + Vec2::cross_scalar(da[c.b], p.r_b))
                        - (dp[c.a] + Vec2::cross_scalar(da[c.a], p.r_a));
                    let separation = p.separation + c.normal.dot(moved);
                    let error = (baumgarte * (separation + slop)).clamp(-max_correction, 0.0);
                    if error >= 0.0 {
                        continue;
                    }
                    let rna = p.r_a.cross(c.normal);
                    let rnb = p.r_b.cross(c.normal);
                    let k = ima + imb + iia * rna * rna + iib * rnb * rnb;
                    if k <= 0.0 {
                        continue;
                    }
                    let impulse = c.normal * (-error / k);
                    dp[c.a] -= impulse * ima;
                    da[c.a] -= iia * p.r_a.cross(impulse);
                    dp[c.b] += impulse * imb;
                    da[c.b] += iib * p.r_b.cross(impulse);
                }
            }
        }
        for (i, body) in self.bodies.iter_mut().enumerate() {
            if !body.is_static() {
                body.position += dp[i];
                body.angle += da[i];
            }
        }
    }

    /// Contacts between overlapping (or touching) fixtures of distinct,
    /// colliding bodies, excluding static pairs.
    pub fn detect_contacts(&self) -> Vec<ContactManifold> {
        let fixtures: Vec<Vec<Polygon>> = self.bodies.iter().map(|b| b.world_fixtures()).collect();
        self.find_manifolds(&fixtures, Some(0.0))
            .into_iter()
            .map(|pm| ContactManifold {
                body_pair: (pm.a, pm.b),
                normal: pm.manifold.normal,
                penetration: pm
                    .manifold
                    .points
                    .iter()
                    .map(|p| -p.separation)
                    .fold(0.0, f64::max),
                contact_points: pm.manifold.points.iter().map(|p| p.point).collect(),
            })
            .collect()
    }

    /// Body pairs `(i, j)`, `i < j`, with fixtures closer than `tolerance`.
    pub fn touching_pairs(&self, tolerance: f64) -> Vec<(usize, usize)> {
        let fixtures: Vec<Vec<Polygon>> = self.bodies.iter().map(|b| b.world_fixtures()).collect();
        let mut pairs: Vec<(usize, usize)> = self
            .find_manifolds(&fixtures, Some(tolerance))
            .into_iter()
            .map(|pm| (pm.a, pm.b))
            .collect();
        pairs.dedup();
        pairs
    }

    /// Indices of colliding bodies with a fixture intersecting `region`
    /// (tangency counts).
    pub fn query_region(&self, region: &Polygon) -> Vec<usize> {
        let bounds = region.aabb();
        self.bodies
            .iter()
            .enumerate()
            .filter(|(_, b)| b.collides() && b.aabb().overlaps(&bounds))
            .filter(|(_, b)| b.world_fixtures().iter().any(|f| f.intersects(region)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Kinetic plus gravitational potential energy of all dynamic bodies.
    pub fn mechanical_energy(&self) -> f64 {
        self.bodies
            .iter()
            .filter(|b| !b.is_static())
            .map(|b| b.kinetic_energy() - b.mass() * self.gravity.dot(b.position))
            .sum()
    }

    /// SHA-256 over the bit patterns of all body states.
    pub fn state_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.step_count.to_le_bytes());
        for b in &self.bodies {
            for x in [
                b.position.x,
                b.position.y,
                b.angle,
                b.linear_velocity.x,
                b.linear_velocity.y,
                b.angular_velocity,
            ] {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

fn tangent(n: Vec2) -> Vec2 {
    Vec2::new(n.y, -n.x)
}

/// Kinetic plus potential energy of the constraint's dynamic bodies after
/// moving for `dt` at the given velocities.
fn pair_energy(vel: &[Velocity], c: &Constraint, positions: (Vec2, Vec2), gravity: Vec2, dt: f64) -> f64 {
    [(c.a, positions.0), (c.b, positions.1)]
        .iter()
        .filter(|(i, _)| vel[*i].inv_mass > 0.0)
        .map(|(i, p)| {
            let v = &vel[*i];
            let m = 1.0 / v.inv_mass;
            let inertia = if v.inv_inertia > 0.0 { 1.0 / v.inv_inertia } else { 0.0 };
            0.5 * m * v.v.length_squared() + 0.5 * inertia * v.w * v.w - m * gravity.dot(*p + v.v * dt)
        })
        .sum()
}

fn relative_velocity(a: &Velocity, b: &Velocity, p: &ConstraintPoint) -> Vec2 {
    (b.v + Vec2::cross_scalar(b.w, p.r_b)) - (a.v + Vec2::cross_scalar(a.w, p.r_a))
}

fn apply_impulse(vel: &mut [Velocity], a: usize, b: usize, p: &ConstraintPoint, impulse: Vec2) {
    let va = &mut vel[a];
    va.v -= impulse * va.inv_mass;
    va.w -= va.inv_inertia * p.r_a.cross(impulse);
    let vb = &mut vel[b];
    vb.v += impulse * vb.inv_mass;
    vb.w += vb.inv_inertia * p.r_b.cross(impulse);
}

fn solve_friction(c: &mut Constraint, vel: &mut [Velocity]) {
    let t = tangent(c.normal);
    for p in &mut c.points {
        let vt = relative_velocity(&vel[c.a], &vel[c.b], p).dot(t);
        let max = c.friction * p.normal_impulse;
        let next = (p.tangent_impulse - p.tangent_mass * vt).clamp(-max, max);
        let delta = next - p.tangent_impulse;
        p.tangent_impulse = next;
        apply_impulse(vel, c.a, c.b, p, t * delta);
    }
}

/// Enforces `vn_i >= targets[i]` with non-negative accumulated impulses.
fn solve_normal(c: &mut Constraint, vel: &mut [Velocity], targets: &[f64]) {
    let n = c.normal;
    if let Some(k) = c.block {
        let acc = [c.points[0].normal_impulse, c.points[1].normal_impulse];
        let vn1 = relative_velocity(&vel[c.a], &vel[c.b], &c.points[0]).dot(n);
        let vn2 = relative_velocity(&vel[c.a], &vel[c.b], &c.points[1]).dot(n);
        // b = vn - target - K * acc, so that vn_new = K * x + b.
        let b1 = vn1 - targets[0] - (k[0][0] * acc[0] + k[0][1] * acc[1]);
        let b2 = vn2 - targets[1] - (k[1][0] * acc[0] + k[1][1] * acc[1]);
        let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
        let candidates = [
            {
                let x1 = -(k[1][1] * b1 - k[0][1] * b2) / det;
                let x2 = -(k[0][0] * b2 - k[1][0] * b1) / det;
                (x1 >= 0.0 && x2 >= 0.0).then_some([x1, x2])
            },
            {
                let x1 = -b1 / k[0][0];
                (x1 >= 0.0 && k[1][0] * x1 + b2 >= 0.0).then_some([x1, 0.0])
            },
            {
                let x2 = -b2 / k[1][1];
                (x2 >= 0.0 && k[0][1] * x2 + b1 >= 0.0).then_some([0.0, x2])
            },
            (b1 >= 0.0 && b2 >= 0.0).then_some([0.0, 0.0]),
        ];
        if let Some(x) = candidates.into_iter().flatten().next() {
            for (i, &xi) in x.iter().enumerate() {
                let delta = xi - acc[i];
                c.points[i].normal_impulse = xi;
                let p = &c.points[i];
                apply_impulse(vel, c.a, c.b, p, n * delta);
            }
            return;
        }
    }
    for (i, p) in c.points.iter_mut().enumerate() {
        let vn = relative_velocity(&vel[c.a], &vel[c.b], p).dot(n);
        let next = (p.normal_impulse - p.normal_mass * (vn - targets[i])).max(0.0);
        let delta = next - p.normal_impulse;
        p.normal_impulse = next;
        apply_impulse(vel, c.a, c.b, p, n * delta);
    }
}

/// Drag, angular drag and buoyancy exerted by `medium` on `body`.
fn medium_load(medium: &Medium, body: &RigidBody, fixtures: &[Polygon], gravity: Vec2) -> (Vec2, f64) {
    let bounds = medium.region.aabb();
    let mut submerged = 0.0;
    let mut moment = Vec2::ZERO;
    for f in fixtures {
        if !f.aabb().overlaps(&bounds) {
            continue;
        }
        let (area, centroid) = area_centroid(&clip_polygon(f.vertices(), &medium.region));
        submerged += area;
        moment += centroid * area;
    }
    if submerged <= 0.0 {
        return (Vec2::ZERO, 0.0);
    }
    let fraction = (submerged / body.area()).min(1.0);
    let mut force = body.linear_velocity * (-medium.drag * fraction);
    let gyration = body.inertia() * body.inverse_mass();
    let mut torque = -medium.drag * fraction * gyration * body.angular_velocity;
    if medium.density > 0.0 {
        let center = moment * (1.0 / submerged);
        let lift = gravity * (-medium.density * submerged);
        force += lift;
        torque += (center - body.position).cross(lift);
    }
    (force, torque)
}
