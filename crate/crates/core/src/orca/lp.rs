//! Incremental 2D linear programming over half-planes inside a speed disc.
//!
//! Constraints are processed in order; when the current optimum violates a
//! new half-plane the optimum is moved onto that plane's boundary by a 1D
//! program over the earlier planes. When no velocity satisfies everything,
//! a second program minimises the largest violation instead.

use crate::geometry::Vec2;

use super::HalfPlane;

/// Parallel-line tolerance.
const EPSILON: f64 = 1e-9;

/// Closest velocity to `v_pref` inside the `max_speed` disc that satisfies
/// every plane, falling back to the least-violating velocity when the
/// planes are jointly infeasible.
pub fn solve_velocity(planes: &[HalfPlane], v_pref: Vec2, max_speed: f64) -> Vec2 {
    solve_velocity_with_hard(planes, 0, v_pref, max_speed)
}

/// Like [`solve_velocity`], but the first `hard_count` planes are never
/// relaxed by the infeasibility fallback.
pub fn solve_velocity_with_hard(
    planes: &[HalfPlane],
    hard_count: usize,
    v_pref: Vec2,
    max_speed: f64,
) -> Vec2 {
    let mut result = Vec2::ZERO;
    let failed = program_2d(planes, max_speed, v_pref, false, &mut result);
    if failed < planes.len() {
        program_3d(
            planes,
            hard_count.min(failed),
            failed,
            max_speed,
            &mut result,
        );
    }
    result
}

/// Amount by which `v` lies on the forbidden side of `plane` (≤ 0 when
/// satisfied).
#[inline]
pub fn violation(plane: &HalfPlane, v: Vec2) -> f64 {
    plane.normal.dot(plane.point - v)
}

/// Optimises along the boundary of plane `index`, subject to planes before
/// it and the speed disc. Returns false when that segment is empty.
fn program_1d(
    planes: &[HalfPlane],
    index: usize,
    radius: f64,
    target: Vec2,
    optimize_direction: bool,
    result: &mut Vec2,
) -> bool {
    let line = &planes[index];
    let dir = line.direction();
    let dot = line.point.dot(dir);
    let discriminant = dot * dot + radius * radius - line.point.length_squared();
    if discriminant < 0.0 {
        // Boundary line misses the speed disc.
        return false;
    }
    let sqrt_disc = discriminant.sqrt();
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;

    for other in &planes[..index] {
        let other_dir = other.direction();
        let denominator = dir.det(other_dir);
        let numerator = other_dir.det(line.point - other.point);
        if denominator.abs() <= EPSILON {
            // Parallel boundaries.
            if numerator < 0.0 {
                return false;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }

    *result = if optimize_direction {
        if target.dot(dir) > 0.0 {
            line.point + dir * t_right
        } else {
            line.point + dir * t_left
        }
    } else {
        let t = dir.dot(target - line.point).clamp(t_left, t_right);
        line.point + dir * t
    };
    true
}

/// Returns the number of planes processed successfully; equal to
/// `planes.len()` on success, otherwise the index of the plane that made
/// the program infeasible (with `result` left at the last feasible point).
fn program_2d(
    planes: &[HalfPlane],
    radius: f64,
    target: Vec2,
    optimize_direction: bool,
    result: &mut Vec2,
) -> usize {
    *result = if optimize_direction {
        // `target` is a unit direction here.
        target * radius
    } else if target.length_squared() > radius * radius {
        target.normalize_or_zero() * radius
    } else {
        target
    };

    for i in 0..planes.len() {
        if violation(&planes[i], *result) > 0.0 {
            let previous = *result;
            if !program_1d(planes, i, radius, target, optimize_direction, result) {
                *result = previous;
                return i;
            }
        }
    }
    planes.len()
}

/// Minimises the maximum violation over planes `begin..`, keeping the first
/// `hard_count` planes as hard constraints.
fn program_3d(
    planes: &[HalfPlane],
    hard_count: usize,
    begin: usize,
    radius: f64,
    result: &mut Vec2,
) {
    let mut distance = 0.0;
    for i in begin..planes.len() {
        if violation(&planes[i], *result) <= distance {
            continue;
        }
        let dir_i = planes[i].direction();
        let mut projected: Vec<HalfPlane> = planes[..hard_count].to_vec();
        for j in hard_count..i {
            let dir_j = planes[j].direction();
            let determinant = dir_i.det(dir_j);
            let point = if determinant.abs() <= EPSILON {
                if dir_i.dot(dir_j) > 0.0 {
                    // Same orientation: plane j is implied by plane i.
                    continue;
                }
                (planes[i].point + planes[j].point) * 0.5
            } else {
                planes[i].point
                    + dir_i * (dir_j.det(planes[i].point - planes[j].point) / determinant)
            };
            let direction = (dir_j - dir_i).normalize_or_zero();
            projected.push(HalfPlane {
                point,
                normal: direction.perp(),
            });
        }

        let previous = *result;
        if program_2d(&projected, radius, planes[i].normal, true, result) < projected.len() {
            // Only possible through floating-point error; keep the previous
            // optimum.
            *result = previous;
        }
        distance = violation(&planes[i], *result);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(point: (f64, f64), normal: (f64, f64)) -> HalfPlane {
        HalfPlane::new(Vec2::new(point.0, point.1), Vec2::new(normal.0, normal.1))
    }

    #[test]
    fn unconstrained_returns_preference() {
        let v = solve_velocity(&[], Vec2::new(1.0, 1.0), 3.5);
        assert_eq!(v, Vec2::new(1.0, 1.0));
    }

    #[test]
    fn unconstrained_clamps_to_disc() {
        let v = solve_velocity(&[], Vec2::new(10.0, 0.0), 3.5);
        assert!((v - Vec2::new(3.5, 0.0)).length() < 1e-12);
    }

    #[test]
    fn single_plane_projection() {
        let v = solve_velocity(&[plane((0.0, 0.0), (0.0, 1.0))], Vec2::new(2.0, -1.0), 3.5);
        assert!((v - Vec2::new(2.0, 0.0)).length() < 1e-12);
    }

    #[test]
    fn feasible_preference_is_returned_exactly() {
        let planes = [
            plane((0.0, -1.0), (0.0, 1.0)),
            plane((1.0, 0.0), (-1.0, 0.0)),
        ];
        let v_pref = Vec2::new(0.3, 0.7);
        assert_eq!(solve_velocity(&planes, v_pref, 3.5), v_pref);
    }

    #[test]
    fn antagonistic_planes_split_violation() {
        let planes = [
            plane((0.0, 0.5), (0.0, 1.0)),
            plane((0.0, -0.5), (0.0, -1.0)),
        ];
        let v = solve_velocity(&planes, Vec2::new(1.0, 0.0), 3.5);
        assert!(v.y.abs() < 1e-9, "{v}");
        assert!((violation(&planes[0], v) - violation(&planes[1], v)).abs() < 1e-9);
        assert!(v.length() <= 3.5 + 1e-9);
    }

    #[test]
    fn hard_planes_survive_fallback() {
        // Hard: x <= -1. Soft pair is infeasible together.
        let planes = [
            plane((-1.0, 0.0), (-1.0, 0.0)),
            plane((0.0, 0.5), (0.0, 1.0)),
            plane((0.0, -0.5), (0.0, -1.0)),
        ];
        let v = solve_velocity_with_hard(&planes, 1, Vec2::new(1.0, 0.0), 3.5);
        assert!(violation(&planes[0], v) <= 1e-9, "{v}");
        assert!(v.y.abs() < 1e-9);
    }
}
