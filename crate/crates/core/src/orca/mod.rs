//! Optimal reciprocal collision avoidance.
//!
//! Each neighbour contributes one half-plane of permitted velocities, each
//! visible obstacle edge at most one more, and the agent takes the permitted
//! velocity closest to its preferred velocity. Constraint construction follows
//! the reference RVO2 library geometry.

mod lp;
mod obstacle;

use serde::{Deserialize, Serialize};

use crate::geometry::{AgentState, Obstacle, Vec2};
use crate::{Error, Result};

pub use lp::{solve_velocity, solve_velocity_with_hard, violation};
pub use obstacle::obstacle_half_planes;

/// Permitted side of a line in velocity space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    /// A point on the boundary, m/s.
    pub point: Vec2,
    /// Unit normal pointing into the permitted side.
    pub normal: Vec2,
}

impl HalfPlane {
    /// Normalises `normal`.
    pub fn new(point: Vec2, normal: Vec2) -> Self {
        HalfPlane {
            point,
            normal: normal.normalize_or_zero(),
        }
    }

    /// Boundary direction with the permitted side on its left.
    #[inline]
    pub fn direction(&self) -> Vec2 {
        Vec2::new(self.normal.y, -self.normal.x)
    }

    /// Signed distance of `v` into the permitted side.
    #[inline]
    pub fn slack(&self, v: Vec2) -> f64 {
        (v - self.point).dot(self.normal)
    }

    pub fn contains(&self, v: Vec2) -> bool {
        self.slack(v) >= 0.0
    }

    /// Same plane with direction given as in the RVO2 line convention.
    pub(crate) fn from_direction(point: Vec2, direction: Vec2) -> Self {
        HalfPlane {
            point,
            normal: direction.perp(),
        }
    }
}

/// Truncated cone of relative velocities that collide within a horizon:
/// the cone from the origin over the disc at `apex_offset`, cut off by that
/// disc.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityObstacle {
    /// Relative position divided by the horizon, m/s.
    pub apex_offset: Vec2,
    /// Combined radius divided by the horizon, m/s.
    pub disc_radius: f64,
}

impl VelocityObstacle {
    pub fn new(relative_position: Vec2, combined_radius: f64, horizon: f64) -> Self {
        VelocityObstacle {
            apex_offset: relative_position / horizon,
            disc_radius: combined_radius / horizon,
        }
    }

    /// True when relative velocity `v` leads to contact within the horizon.
    pub fn contains(&self, v: Vec2) -> bool {
        // Contact before the horizon iff λ·v lies in the disc for some
        // λ in (0, 1].
        let c = self.apex_offset;
        let r = self.disc_radius;
        let a = v.length_squared();
        if (v - c).length_squared() <= r * r {
            return true;
        }
        if a == 0.0 {
            return false;
        }
        let t = c.dot(v) / a;
        t > 0.0 && t < 1.0 && (c - v * t).length_squared() <= r * r
    }
}

/// Result of the per-neighbour construction: the plane and the smallest
/// change `u` of relative velocity that reaches the obstacle boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentConstraint {
    pub plane: HalfPlane,
    pub u: Vec2,
}

/// Half-plane of velocities for `a` that avoid `b` for `time_horizon`,
/// with `a` taking half the responsibility. Overlapping agents get a
/// recovery constraint over `time_step` instead.
pub fn agent_half_plane(
    a: &AgentState,
    b: &AgentState,
    time_horizon: f64,
    time_step: f64,
) -> Result<HalfPlane> {
    agent_constraint(a, b, time_horizon, time_step).map(|c| c.plane)
}

pub fn agent_constraint(
    a: &AgentState,
    b: &AgentState,
    time_horizon: f64,
    time_step: f64,
) -> Result<AgentConstraint> {
    let relative_position = b.position - a.position;
    let relative_velocity = a.velocity - b.velocity;
    let dist_sq = relative_position.length_squared();
    if dist_sq.sqrt() < 1e-9 {
        return Err(Error::DegenerateGeometry(format!(
            "agents {} and {} share a position",
            a.id, b.id
        )));
    }
    let combined_radius = a.params.protect_radius + b.params.protect_radius;
    let combined_radius_sq = combined_radius * combined_radius;

    let (direction, u) = if dist_sq > combined_radius_sq {
        let vo = VelocityObstacle::new(relative_position, combined_radius, time_horizon);
        // Relative velocity seen from the cut-off disc centre.
        let w = relative_velocity - vo.apex_offset;
        let w_len_sq = w.length_squared();
        let dot1 = w.dot(relative_position);

        if dot1 < 0.0 && dot1 * dot1 > combined_radius_sq * w_len_sq {
            // Nearest boundary point lies on the cut-off circle.
            let w_len = w_len_sq.sqrt();
            let unit_w = w / w_len;
            (
                Vec2::new(unit_w.y, -unit_w.x),
                unit_w * (vo.disc_radius - w_len),
            )
        } else {
            // Nearest boundary point lies on a leg.
            let leg = (dist_sq - combined_radius_sq).sqrt();
            let p = relative_position;
            let direction = if p.det(w) >= 0.0 {
                Vec2::new(
                    p.x * leg - p.y * combined_radius,
                    p.x * combined_radius + p.y * leg,
                ) / dist_sq
            } else {
                -Vec2::new(
                    p.x * leg + p.y * combined_radius,
                    -p.x * combined_radius + p.y * leg,
                ) / dist_sq
            };
            let dot2 = relative_velocity.dot(direction);
            (direction, direction * dot2 - relative_velocity)
        }
    } else {
        // Already overlapping: resolve within one step.
        let inv_step = 1.0 / time_step;
        let w = relative_velocity - relative_position * inv_step;
        let w_len = w.length();
        let unit_w = if w_len > 0.0 {
            w / w_len
        } else {
            -relative_position / dist_sq.sqrt()
        };
        (
            Vec2::new(unit_w.y, -unit_w.x),
            unit_w * (combined_radius * inv_step - w_len),
        )
    };

    Ok(AgentConstraint {
        plane: HalfPlane::from_direction(a.velocity + u * 0.5, direction),
        u,
    })
}

/// The expert velocity for `a`: obstacle planes first, then planes for the
/// closest `max_neighbors` neighbours within `neighbor_dist`, solved for the
/// velocity nearest `v_pref`. `time_step` is the overlap-recovery horizon.
pub fn orca_velocity(
    a: &AgentState,
    neighbors: &[AgentState],
    obstacles: &[Obstacle],
    v_pref: Vec2,
    time_step: f64,
) -> Result<Vec2> {
    let params = &a.params;
    let mut planes = obstacle_half_planes(a, obstacles, params.time_horizon_obs);
    let hard_count = planes.len();

    for neighbor in closest_neighbors(a, neighbors) {
        planes.push(agent_half_plane(
            a,
            neighbor,
            params.time_horizon,
            time_step,
        )?);
    }
    Ok(solve_velocity_with_hard(
        &planes,
        hard_count,
        v_pref,
        params.max_speed,
    ))
}

/// Neighbours strictly inside `neighbor_dist`, nearest first, at most
/// `max_neighbors` of them; equal distances go to the lower id. The agent
/// itself (same id) is skipped.
pub fn closest_neighbors<'a>(a: &AgentState, neighbors: &'a [AgentState]) -> Vec<&'a AgentState> {
    let range_sq = a.params.neighbor_dist * a.params.neighbor_dist;
    let mut in_range: Vec<(f64, &AgentState)> = neighbors
        .iter()
        .filter(|n| n.id != a.id)
        .map(|n| ((n.position - a.position).length_squared(), n))
        .filter(|(d, _)| *d < range_sq)
        .collect();
    in_range.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.id.cmp(&y.1.id)));
    in_range.truncate(a.params.max_neighbors);
    in_range.into_iter().map(|(_, n)| n).collect()
}
