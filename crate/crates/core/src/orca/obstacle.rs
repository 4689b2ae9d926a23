//! Velocity constraints from static polygonal obstacles.
//!
//! Obstacles do not reciprocate, so the agent takes full responsibility and
//! each edge's velocity obstacle is the Minkowski sum of the edge with the
//! agent's protect disc, scaled by the obstacle horizon.

use crate::geometry::{point_segment_distance, AgentState, Obstacle, Vec2};

use super::HalfPlane;

const COVER_EPSILON: f64 = 1e-5;

/// One polygon vertex with the data the constraint builder needs.
#[derive(Clone, Copy, Debug)]
struct Vertex {
    point: Vec2,
    /// Unit direction to the next vertex.
    unit_dir: Vec2,
    convex: bool,
}

struct Edge {
    start: Vertex,
    end: Vertex,
    /// Vertex before `start`.
    prev: Vertex,
    distance: f64,
}

fn left_of(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (a - c).det(b - a)
}

fn vertices_of(obstacle: &Obstacle) -> Vec<Vertex> {
    let pts = obstacle.vertices();
    let n = pts.len();
    (0..n)
        .map(|i| {
            let prev = pts[(i + n - 1) % n];
            let next = pts[(i + 1) % n];
            Vertex {
                point: pts[i],
                unit_dir: (next - pts[i]).normalize_or_zero(),
                convex: left_of(prev, pts[i], next) >= 0.0,
            }
        })
        .collect()
}

/// Edges facing the agent and within `neighbor_dist`, nearest first.
fn visible_edges(agent: &AgentState, obstacles: &[Obstacle]) -> Vec<Edge> {
    let mut edges = Vec::new();
    for obstacle in obstacles {
        let verts = vertices_of(obstacle);
        let n = verts.len();
        for i in 0..n {
            let start = verts[i];
            let end = verts[(i + 1) % n];
            // Only the outward (right-hand) side of a counter-clockwise edge
            // can be approached.
            if left_of(start.point, end.point, agent.position) >= 0.0 {
                continue;
            }
            let distance = point_segment_distance(agent.position, start.point, end.point);
            if distance < agent.params.neighbor_dist {
                edges.push(Edge {
                    start,
                    end,
                    prev: verts[(i + n - 1) % n],
                    distance,
                });
            }
        }
    }
    edges.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    edges
}

fn left_leg(relative: Vec2, dist_sq: f64, radius: f64) -> Vec2 {
    let leg = (dist_sq - radius * radius).sqrt();
    Vec2::new(
        relative.x * leg - relative.y * radius,
        relative.x * radius + relative.y * leg,
    ) / dist_sq
}

fn right_leg(relative: Vec2, dist_sq: f64, radius: f64) -> Vec2 {
    let leg = (dist_sq - radius * radius).sqrt();
    Vec2::new(
        relative.x * leg + relative.y * radius,
        -relative.x * radius + relative.y * leg,
    ) / dist_sq
}

/// Half-planes keeping `agent` clear of `obstacles` for `time_horizon_obs`
/// seconds, using its protect radius.
pub fn obstacle_half_planes(
    agent: &AgentState,
    obstacles: &[Obstacle],
    time_horizon_obs: f64,
) -> Vec<HalfPlane> {
    let inv_horizon = 1.0 / time_horizon_obs;
    let radius = agent.params.protect_radius;
    let radius_sq = radius * radius;
    let position = agent.position;
    let velocity = agent.velocity;
    let mut planes: Vec<HalfPlane> = Vec::new();

    for edge in visible_edges(agent, obstacles) {
        let mut v1 = edge.start;
        let mut v2 = edge.end;
        let rel1 = v1.point - position;
        let rel2 = v2.point - position;

        let covered = planes.iter().any(|p| {
            let dir = p.direction();
            dir.det(p.point - rel1 * inv_horizon) >= radius * inv_horizon - COVER_EPSILON
                && dir.det(p.point - rel2 * inv_horizon) >= radius * inv_horizon - COVER_EPSILON
        });
        // Both vertices deep inside an existing forbidden side: unreachable.
        if covered {
            continue;
        }

        let dist_sq1 = rel1.length_squared();
        let dist_sq2 = rel2.length_squared();
        let edge_vec = v2.point - v1.point;
        let s = (-rel1).dot(edge_vec) / edge_vec.length_squared();
        let dist_sq_line = (-rel1 - edge_vec * s).length_squared();

        // Already in contact with the protect disc.
        if s < 0.0 && dist_sq1 <= radius_sq {
            if v1.convex {
                planes.push(HalfPlane::from_direction(
                    Vec2::ZERO,
                    Vec2::new(-rel1.y, rel1.x).normalize_or_zero(),
                ));
            }
            continue;
        } else if s > 1.0 && dist_sq2 <= radius_sq {
            if v2.convex && rel2.det(v2.unit_dir) >= 0.0 {
                planes.push(HalfPlane::from_direction(
                    Vec2::ZERO,
                    Vec2::new(-rel2.y, rel2.x).normalize_or_zero(),
                ));
            }
            continue;
        } else if (0.0..1.0).contains(&s) && dist_sq_line <= radius_sq {
            planes.push(HalfPlane::from_direction(Vec2::ZERO, -v1.unit_dir));
            continue;
        }

        // Legs of the edge's velocity obstacle. Seen obliquely both legs
        // can come from one vertex.
        let mut left_leg_dir;
        let mut right_leg_dir;
        let mut single_vertex = false;
        let mut left_neighbor = edge.prev;
        if s < 0.0 && dist_sq_line <= radius_sq {
            if !v1.convex {
                continue;
            }
            v2 = v1;
            single_vertex = true;
            left_leg_dir = left_leg(rel1, dist_sq1, radius);
            right_leg_dir = right_leg(rel1, dist_sq1, radius);
        } else if s > 1.0 && dist_sq_line <= radius_sq {
            if !v2.convex {
                continue;
            }
            left_neighbor = v1;
            v1 = v2;
            single_vertex = true;
            left_leg_dir = left_leg(rel2, dist_sq2, radius);
            right_leg_dir = right_leg(rel2, dist_sq2, radius);
        } else {
            left_leg_dir = if v1.convex {
                left_leg(rel1, dist_sq1, radius)
            } else {
                // Non-convex: the left leg extends the cut-off line.
                -v1.unit_dir
            };
            right_leg_dir = if v2.convex {
                right_leg(rel2, dist_sq2, radius)
            } else {
                v1.unit_dir
            };
        }

        // A leg from a convex vertex may not point into the neighbouring
        // edge; use that edge's cut-off line instead and skip the
        // constraint if the velocity projects onto it.
        let mut left_foreign = false;
        let mut right_foreign = false;
        if v1.convex && left_leg_dir.det(-left_neighbor.unit_dir) >= 0.0 {
            left_leg_dir = -left_neighbor.unit_dir;
            left_foreign = true;
        }
        if v2.convex && right_leg_dir.det(v2.unit_dir) <= 0.0 {
            right_leg_dir = v2.unit_dir;
            right_foreign = true;
        }

        let left_cutoff = (v1.point - position) * inv_horizon;
        let right_cutoff = (v2.point - position) * inv_horizon;
        let cutoff_vec = right_cutoff - left_cutoff;

        let t = if single_vertex {
            0.5
        } else {
            (velocity - left_cutoff).dot(cutoff_vec) / cutoff_vec.length_squared()
        };
        let t_left = (velocity - left_cutoff).dot(left_leg_dir);
        let t_right = (velocity - right_cutoff).dot(right_leg_dir);

        if (t < 0.0 && t_left < 0.0) || (single_vertex && t_left < 0.0 && t_right < 0.0) {
            let unit_w = (velocity - left_cutoff).normalize_or_zero();
            planes.push(HalfPlane::from_direction(
                left_cutoff + unit_w * (radius * inv_horizon),
                Vec2::new(unit_w.y, -unit_w.x),
            ));
            continue;
        } else if t > 1.0 && t_right < 0.0 {
            let unit_w = (velocity - right_cutoff).normalize_or_zero();
            planes.push(HalfPlane::from_direction(
                right_cutoff + unit_w * (radius * inv_horizon),
                Vec2::new(unit_w.y, -unit_w.x),
            ));
            continue;
        }

        let dist_sq_cutoff = if !(0.0..=1.0).contains(&t) || single_vertex {
            f64::INFINITY
        } else {
            (velocity - (left_cutoff + cutoff_vec * t)).length_squared()
        };
        let dist_sq_left = if t_left < 0.0 {
            f64::INFINITY
        } else {
            (velocity - (left_cutoff + left_leg_dir * t_left)).length_squared()
        };
        let dist_sq_right = if t_right < 0.0 {
            f64::INFINITY
        } else {
            (velocity - (right_cutoff + right_leg_dir * t_right)).length_squared()
        };

        let offset = |direction: Vec2| direction.perp() * (radius * inv_horizon);
        if dist_sq_cutoff <= dist_sq_left && dist_sq_cutoff <= dist_sq_right {
            let direction = -v1.unit_dir;
            planes.push(HalfPlane::from_direction(
                left_cutoff + offset(direction),
                direction,
            ));
        } else if dist_sq_left <= dist_sq_right {
            if left_foreign {
                continue;
            }
            planes.push(HalfPlane::from_direction(
                left_cutoff + offset(left_leg_dir),
                left_leg_dir,
            ));
        } else {
            if right_foreign {
                continue;
            }
            let direction = -right_leg_dir;
            planes.push(HalfPlane::from_direction(
                right_cutoff + offset(direction),
                direction,
            ));
        }
    }
    planes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrcaParams;

    fn agent_at(p: Vec2, v: Vec2, protect: f64) -> AgentState {
        let params = OrcaParams {
            protect_radius: protect,
            neighbor_dist: 3.0,
            ..OrcaParams::default()
        };
        AgentState::new(0, p, p, params).with_velocity(v)
    }

    #[test]
    fn no_obstacles_no_planes() {
        let a = agent_at(Vec2::ZERO, Vec2::X, 0.5);
        assert!(obstacle_half_planes(&a, &[], 10.0).is_empty());
    }

    #[test]
    fn distant_obstacle_is_gated() {
        let a = agent_at(Vec2::ZERO, Vec2::X, 0.5);
        let far = Obstacle::rectangle(Vec2::new(20.0, 0.0), 1.0, 1.0).unwrap();
        assert!(obstacle_half_planes(&a, &[far], 10.0).is_empty());
    }

    #[test]
    fn wall_limits_forward_speed() {
        // Long wall whose near face is x = 1.
        let wall = Obstacle::new(vec![
            Vec2::new(1.0, -5.0),
            Vec2::new(2.0, -5.0),
            Vec2::new(2.0, 5.0),
            Vec2::new(1.0, 5.0),
        ])
        .unwrap();
        let a = agent_at(Vec2::ZERO, Vec2::X, 0.5);
        let planes = obstacle_half_planes(&a, &[wall], 10.0);
        assert_eq!(planes.len(), 1, "{planes:?}");
        let p = planes[0];
        assert!((p.normal - Vec2::new(-1.0, 0.0)).length() < 1e-12);
        assert!((p.point.x - 0.05).abs() < 1e-12);
    }

    #[test]
    fn agent_inside_protect_band_blocks_approach() {
        let wall = Obstacle::rectangle(Vec2::new(1.0, 0.0), 0.5, 2.0).unwrap();
        let a = agent_at(Vec2::new(0.2, 0.0), Vec2::ZERO, 0.5);
        let planes = obstacle_half_planes(&a, &[wall], 10.0);
        assert!(!planes.is_empty());
        assert!(planes.iter().all(|p| !p.contains(Vec2::new(1.0, 0.0))));
    }
}
