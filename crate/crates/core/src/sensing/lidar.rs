use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{AgentState, Obstacle, Vec2};

use super::{beam_direction, Scan, BEAMS, MAX_RANGE};

/// Distance along a unit ray from `origin` to the disc, if it is hit ahead.
/// An origin inside the disc reports 0.
fn ray_disc(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let oc = center - origin;
    let along = oc.dot(dir);
    let perp_sq = oc.length_squared() - along * along;
    let r_sq = radius * radius;
    if oc.length_squared() <= r_sq {
        return Some(0.0);
    }
    if perp_sq > r_sq || along < 0.0 {
        return None;
    }
    Some(along - (r_sq - perp_sq).max(0.0).sqrt())
}

fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let edge = b - a;
    let denom = dir.det(edge);
    if denom.abs() < 1e-12 {
        return None;
    }
    let ao = a - origin;
    let t = ao.det(edge) / denom;
    let s = ao.det(dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

/// Casts the 360 beams from `agent` against the physical discs of `others`
/// and the edges of `obstacles`. Beam 0 points along global +x.
pub fn raycast_scan(agent: &AgentState, others: &[AgentState], obstacles: &[Obstacle]) -> Scan {
    let origin = agent.position;
    let min_range = agent.params.radius;
    let mut ranges = vec![MAX_RANGE; BEAMS];
    let mut hits = vec![false; BEAMS];

    // Skip geometry that cannot be reached by any beam.
    let reach = MAX_RANGE;
    let discs: Vec<(Vec2, f64)> = others
        .iter()
        .filter(|o| o.id != agent.id)
        .filter(|o| o.position.distance(origin) - o.params.radius <= reach)
        .map(|o| (o.position, o.params.radius))
        .collect();
    let edges: Vec<(Vec2, Vec2)> = obstacles
        .iter()
        .flat_map(|o| o.edges())
        .filter(|(a, b)| crate::geometry::point_segment_distance(origin, *a, *b) <= reach)
        .collect();

    for (i, (range, hit)) in ranges.iter_mut().zip(hits.iter_mut()).enumerate() {
        let dir = beam_direction(i);
        let mut nearest = f64::INFINITY;
        for &(center, radius) in &discs {
            if let Some(t) = ray_disc(origin, dir, center, radius) {
                nearest = nearest.min(t);
            }
        }
        for &(a, b) in &edges {
            if let Some(t) = ray_segment(origin, dir, a, b) {
                nearest = nearest.min(t);
            }
        }
        if nearest <= MAX_RANGE {
            *range = nearest.clamp(min_range, MAX_RANGE);
            *hit = true;
        }
    }
    Scan::from_parts(ranges, hits, min_range, MAX_RANGE)
}

/// Adds zero-mean Gaussian noise of standard deviation `sigma` to every hit
/// beam and clamps back into range. No-hit beams are untouched.
pub fn perturb_scan<R: Rng + ?Sized>(scan: &Scan, sigma: f64, rng: &mut R) -> Scan {
    if sigma <= 0.0 {
        return scan.clone();
    }
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    let ranges = scan
        .ranges()
        .iter()
        .zip(scan.hits())
        .map(|(&r, &hit)| {
            if hit {
                (r + noise.sample(rng)).clamp(scan.min_range(), scan.max_range())
            } else {
                r
            }
        })
        .collect();
    Scan::from_parts(
        ranges,
        scan.hits().to_vec(),
        scan.min_range(),
        scan.max_range(),
    )
}
