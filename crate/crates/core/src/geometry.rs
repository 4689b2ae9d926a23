//! Planar primitives shared by every other module.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::sensing::{Observation, Scan, ScanFlow, BEAMS};
use crate::{Error, Result};

/// A 2D vector. Positions are in meters, velocities in meters per second.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };
    pub const X: Vec2 = Vec2 { x: 1.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at `angle` radians from +x.
    #[inline]
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(c, s)
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product; positive when `other` lies to
    /// the left of `self`.
    #[inline]
    pub fn det(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).length()
    }

    /// Unit vector in the same direction, or zero for the zero vector.
    #[inline]
    pub fn normalize_or_zero(self) -> Vec2 {
        let len = self.length();
        if len > 0.0 {
            self / len
        } else {
            Vec2::ZERO
        }
    }

    /// Counter-clockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    #[inline]
    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    #[inline]
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Rescales to at most `max_len`.
    #[inline]
    pub fn clamp_length(self, max_len: f64) -> Vec2 {
        let len_sq = self.length_squared();
        if len_sq > max_len * max_len {
            self * (max_len / len_sq.sqrt())
        } else {
            self
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

/// Closest distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len_sq = ab.length_squared();
    let t = if len_sq > 0.0 {
        ((p - a).dot(ab) / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(a + ab * t)
}

/// Wraps an angle into [-π, π).
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Tunable parameters of the reciprocal velocity-obstacle expert.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrcaParams {
    /// m/s
    pub max_speed: f64,
    pub max_neighbors: usize,
    /// m
    pub neighbor_dist: f64,
    /// Inflated radius used when building constraints, m.
    pub protect_radius: f64,
    /// Physical disc radius, m.
    pub radius: f64,
    /// s
    pub time_horizon: f64,
    /// s
    pub time_horizon_obs: f64,
}

impl Default for OrcaParams {
    fn default() -> Self {
        OrcaParams {
            max_speed: 3.5,
            max_neighbors: 10,
            neighbor_dist: 3.0,
            protect_radius: 0.5,
            radius: 0.2,
            time_horizon: 2.0,
            time_horizon_obs: 1.0,
        }
    }
}

impl OrcaParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        let finite = [
            self.max_speed,
            self.neighbor_dist,
            self.protect_radius,
            self.radius,
            self.time_horizon,
            self.time_horizon_obs,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return fail("orca parameters must be finite");
        }
        if self.max_speed <= 0.0 {
            return fail("max_speed must be positive");
        }
        if self.radius <= 0.0 {
            return fail("radius must be positive");
        }
        if self.protect_radius < self.radius {
            return fail("protect_radius must be at least radius");
        }
        if self.neighbor_dist <= 2.0 * self.protect_radius {
            return fail("neighbor_dist must exceed twice protect_radius");
        }
        if self.time_horizon <= 0.0 || self.time_horizon_obs <= 0.0 {
            return fail("time horizons must be positive");
        }
        if self.max_neighbors < 1 {
            return fail("max_neighbors must be at least 1");
        }
        Ok(())
    }
}

/// One holonomic disc agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub position: Vec2,
    pub velocity: Vec2,
    pub goal: Vec2,
    pub params: OrcaParams,
}

impl AgentState {
    /// A stationary agent at `position` heading for `goal`.
    pub fn new(id: usize, position: Vec2, goal: Vec2, params: OrcaParams) -> Self {
        AgentState {
            id,
            position,
            velocity: Vec2::ZERO,
            goal,
            params,
        }
    }

    pub fn with_velocity(mut self, velocity: Vec2) -> Self {
        self.velocity = velocity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.position.is_finite() && self.velocity.is_finite() && self.goal.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "agent {} has non-finite state",
                self.id
            )));
        }
        if self.velocity.length() > self.params.max_speed + 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "agent {} exceeds max_speed",
                self.id
            )));
        }
        Ok(())
    }
}

/// A static obstacle: a simple polygon with counter-clockwise vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    vertices: Vec<Vec2>,
}

impl Obstacle {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidParameter(
                "obstacle needs at least 3 vertices".into(),
            ));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("obstacle vertex not finite".into()));
        }
        let obstacle = Obstacle { vertices };
        if obstacle.signed_area() <= 0.0 {
            return Err(Error::InvalidParameter(
                "obstacle vertices must be counter-clockwise".into(),
            ));
        }
        if !obstacle.is_simple() {
            return Err(Error::InvalidParameter(
                "obstacle polygon self-intersects".into(),
            ));
        }
        Ok(obstacle)
    }

    /// Axis-aligned rectangle centred at `center`.
    pub fn rectangle(center: Vec2, half_width: f64, half_height: f64) -> Result<Self> {
        Obstacle::new(vec![
            center + Vec2::new(-half_width, -half_height),
            center + Vec2::new(half_width, -half_height),
            center + Vec2::new(half_width, half_height),
            center + Vec2::new(-half_width, half_height),
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    /// Edges as (start, end) pairs, closing back to the first vertex.
    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        self.edges().map(|(a, b)| a.det(b)).sum::<f64>() * 0.5
    }

    fn is_simple(&self) -> bool {
        let edges: Vec<_> = self.edges().collect();
        let n = edges.len();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if !adjacent && segments_intersect(edges[i].0, edges[i].1, edges[j].0, edges[j].1) {
                    return false;
                }
            }
        }
        true
    }

    /// Even-odd point-in-polygon test.
    pub fn contains(&self, p: Vec2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        self.edges()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Surface-to-surface distance to a disc; negative when they overlap.
    pub fn disc_clearance(&self, center: Vec2, radius: f64) -> f64 {
        let d = self.boundary_distance(center);
        if self.contains(center) {
            -d - radius
        } else {
            d - radius
        }
    }

    /// The same polygon rotated about the origin.
    pub fn rotated(&self, angle: f64) -> Obstacle {
        Obstacle {
            vertices: self.vertices.iter().map(|v| v.rotate(angle)).collect(),
        }
    }
}

fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d1 = (p2 - p1).det(q1 - p1);
    let d2 = (p2 - p1).det(q2 - p1);
    let d3 = (q2 - q1).det(p1 - q1);
    let d4 = (q2 - q1).det(p2 - q1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on_segment = |a: Vec2, b: Vec2, p: Vec2| {
        p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    };
    (d1 == 0.0 && on_segment(p1, p2, q1))
        || (d2 == 0.0 && on_segment(p1, p2, q2))
        || (d3 == 0.0 && on_segment(q1, q2, p1))
        || (d4 == 0.0 && on_segment(q1, q2, p2))
}

/// Goal-directed velocity, capped so the agent never overshoots in one cycle.
pub fn preferred_velocity(position: Vec2, goal: Vec2, params: &OrcaParams, tau: f64) -> Vec2 {
    let to_goal = goal - position;
    let dist = to_goal.length();
    if dist <= 0.0 {
        return Vec2::ZERO;
    }
    let speed = params.max_speed.min(dist / tau);
    to_goal * (speed / dist)
}

/// Speeds below this are treated as "not moving" when picking a heading.
const HEADING_SPEED_EPS: f64 = 1e-6;

/// Heading-aligned frame centred on an agent.
///
/// Vectors are rotated by the exact heading; scan arrays are rotated by
/// whole beams, using the heading rounded to the nearest degree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalFrame {
    pub origin: Vec2,
    /// Radians in [-π, π).
    pub heading: f64,
}

impl LocalFrame {
    /// Heading follows the velocity, then the preferred velocity, then +x.
    pub fn new(origin: Vec2, velocity: Vec2, v_pref: Vec2) -> Self {
        let heading = if velocity.length() >= HEADING_SPEED_EPS {
            velocity.angle()
        } else if v_pref.length() >= HEADING_SPEED_EPS {
            v_pref.angle()
        } else {
            0.0
        };
        LocalFrame {
            origin,
            heading: wrap_angle(heading),
        }
    }

    pub fn for_agent(agent: &AgentState, v_pref: Vec2) -> Self {
        LocalFrame::new(agent.position, agent.velocity, v_pref)
    }

    /// Number of beams the scan array is rotated by, in 0..360.
    pub fn beam_shift(&self) -> usize {
        let degrees = self.heading.to_degrees().round() as i64;
        degrees.rem_euclid(BEAMS as i64) as usize
    }

    pub fn vector_to_local(&self, v: Vec2) -> Vec2 {
        v.rotate(-self.heading)
    }

    pub fn vector_to_global(&self, v: Vec2) -> Vec2 {
        v.rotate(self.heading)
    }

    pub fn point_to_local(&self, p: Vec2) -> Vec2 {
        self.vector_to_local(p - self.origin)
    }

    pub fn point_to_global(&self, p: Vec2) -> Vec2 {
        self.origin + self.vector_to_global(p)
    }

    /// Beam index in the local scan holding global beam `global`.
    pub fn local_beam(&self, global: usize) -> usize {
        (global + BEAMS - self.beam_shift()) % BEAMS
    }

    /// Global beam index shown at local beam `local`.
    pub fn global_beam(&self, local: usize) -> usize {
        (local + self.beam_shift()) % BEAMS
    }

    /// Re-expresses a globally-oriented observation in this frame. Flow has
    /// `velocity` subtracted before rotation.
    pub fn observation_to_local(&self, obs: &Observation, velocity: Vec2) -> Observation {
        let scan = &obs.scan;
        let mut ranges = vec![0.0; BEAMS];
        let mut hits = vec![false; BEAMS];
        let mut flow = vec![Vec2::ZERO; BEAMS];
        for local in 0..BEAMS {
            let global = self.global_beam(local);
            ranges[local] = scan.ranges()[global];
            hits[local] = scan.hits()[global];
            flow[local] = self.vector_to_local(obs.flow.velocities()[global] - velocity);
        }
        Observation {
            scan: Scan::from_parts(ranges, hits, scan.min_range(), scan.max_range()),
            flow: ScanFlow::new(flow).expect("360 flow vectors"),
        }
    }

    /// Inverse of [`LocalFrame::observation_to_local`].
    pub fn observation_to_global(&self, obs: &Observation, velocity: Vec2) -> Observation {
        let scan = &obs.scan;
        let mut ranges = vec![0.0; BEAMS];
        let mut hits = vec![false; BEAMS];
        let mut flow = vec![Vec2::ZERO; BEAMS];
        for global in 0..BEAMS {
            let local = self.local_beam(global);
            ranges[global] = scan.ranges()[local];
            hits[global] = scan.hits()[local];
            flow[global] = self.vector_to_global(obs.flow.velocities()[local]) + velocity;
        }
        Observation {
            scan: Scan::from_parts(ranges, hits, scan.min_range(), scan.max_range()),
            flow: ScanFlow::new(flow).expect("360 flow vectors"),
        }
    }
}

/// Converts a global observation and preferred velocity into the agent's
/// heading-aligned frame: velocities lose the agent's own velocity, then
/// everything is rotated by the heading.
pub fn to_local_frame(agent: &AgentState, obs: &Observation, v_pref: Vec2) -> (Observation, Vec2) {
    let frame = LocalFrame::for_agent(agent, v_pref);
    let local_obs = frame.observation_to_local(obs, agent.velocity);
    let local_v_pref = frame.vector_to_local(v_pref - agent.velocity);
    (local_obs, local_v_pref)
}

/// Inverse of [`to_local_frame`] for the same agent.
pub fn from_local_frame(
    agent: &AgentState,
    global_v_pref: Vec2,
    local_obs: &Observation,
    local_v_pref: Vec2,
) -> (Observation, Vec2) {
    let frame = LocalFrame::for_agent(agent, global_v_pref);
    let obs = frame.observation_to_global(local_obs, agent.velocity);
    let v_pref = frame.vector_to_global(local_v_pref) + agent.velocity;
    (obs, v_pref)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> OrcaParams {
        OrcaParams::default()
    }

    fn close(a: Vec2, b: Vec2, tol: f64) -> bool {
        (a - b).length() <= tol
    }

    #[test]
    fn preferred_velocity_caps_at_max_speed() {
        let v = preferred_velocity(Vec2::ZERO, Vec2::new(10.0, 0.0), &params(), 0.1);
        assert!(close(v, Vec2::new(3.5, 0.0), 1e-12));
    }

    #[test]
    fn preferred_velocity_zero_at_goal() {
        let p = Vec2::new(5.0, 5.0);
        assert_eq!(preferred_velocity(p, p, &params(), 0.1), Vec2::ZERO);
    }

    #[test]
    fn preferred_velocity_uses_distance_over_tau() {
        let v = preferred_velocity(Vec2::ZERO, Vec2::new(0.0, 0.1), &params(), 0.1);
        assert!(close(v, Vec2::new(0.0, 1.0), 1e-12));
    }

    fn empty_observation() -> Observation {
        let mut ranges = vec![4.0; BEAMS];
        let mut hits = vec![false; BEAMS];
        ranges[0] = 1.5;
        hits[0] = true;
        Observation {
            scan: Scan::from_parts(ranges, hits, 0.2, 4.0),
            flow: ScanFlow::zeros(),
        }
    }

    #[test]
    fn local_frame_heading_along_x_is_unrotated() {
        let agent =
            AgentState::new(0, Vec2::ZERO, Vec2::X, params()).with_velocity(Vec2::new(1.0, 0.0));
        let obs = empty_observation();
        let (local, v_pref) = to_local_frame(&agent, &obs, Vec2::new(2.0, 0.0));
        assert!(close(v_pref, Vec2::new(1.0, 0.0), 1e-12));
        assert_eq!(local.scan.ranges(), obs.scan.ranges());
    }

    #[test]
    fn local_frame_heading_along_y_rotates_90_beams() {
        let agent =
            AgentState::new(0, Vec2::ZERO, Vec2::X, params()).with_velocity(Vec2::new(0.0, 1.0));
        let mut obs = empty_observation();
        obs.scan = {
            let mut ranges = vec![4.0; BEAMS];
            let mut hits = vec![false; BEAMS];
            ranges[90] = 1.5;
            hits[90] = true;
            Scan::from_parts(ranges, hits, 0.2, 4.0)
        };
        let (local, v_pref) = to_local_frame(&agent, &obs, Vec2::new(0.0, 2.0));
        assert!(close(v_pref, Vec2::new(1.0, 0.0), 1e-12));
        assert_eq!(local.scan.ranges()[0], 1.5);
        assert!(local.scan.hits()[0]);
    }

    #[test]
    fn stationary_agent_takes_heading_from_v_pref() {
        let agent = AgentState::new(0, Vec2::ZERO, Vec2::X, params());
        let frame = LocalFrame::for_agent(&agent, Vec2::new(0.0, 1.0));
        assert!((frame.heading - PI / 2.0).abs() < 1e-12);
        let (_, v_pref) = to_local_frame(&agent, &empty_observation(), Vec2::new(0.0, 1.0));
        assert!(close(v_pref, Vec2::new(1.0, 0.0), 1e-12));
    }

    #[test]
    fn heading_falls_back_to_x() {
        let frame = LocalFrame::new(Vec2::ZERO, Vec2::ZERO, Vec2::ZERO);
        assert_eq!(frame.heading, 0.0);
    }

    #[test]
    fn heading_is_half_open() {
        let frame = LocalFrame::new(Vec2::ZERO, Vec2::new(-1.0, 0.0), Vec2::ZERO);
        assert!((frame.heading + PI).abs() < 1e-15);
        assert_eq!(frame.beam_shift(), 180);
    }

    #[test]
    fn obstacle_rejects_clockwise_and_degenerate() {
        assert!(Obstacle::new(vec![Vec2::ZERO, Vec2::X]).is_err());
        let cw = vec![
            Vec2::ZERO,
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        ];
        assert!(Obstacle::new(cw).is_err());
        let bowtie = vec![
            Vec2::ZERO,
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(Obstacle::new(bowtie).is_err());
    }

    #[test]
    fn obstacle_clearance_sign() {
        let square = Obstacle::rectangle(Vec2::ZERO, 1.0, 1.0).unwrap();
        assert!((square.disc_clearance(Vec2::new(3.0, 0.0), 0.5) - 1.5).abs() < 1e-12);
        assert!(square.disc_clearance(Vec2::new(0.5, 0.0), 0.1) < 0.0);
    }

    #[test]
    fn wrap_angle_range() {
        for k in -20..20 {
            let a = wrap_angle(k as f64 * 0.7);
            assert!((-PI..PI).contains(&a));
        }
        assert_eq!(wrap_angle(PI), -PI);
    }
}
