use rand::Rng;

use crate::geometry::Vec2;
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec2>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

fn nearest(p: Vec2, centroids: &[Vec2]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = p.distance(*c).powi(2);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations until the assignment is a
/// fixpoint or 200 iterations pass. An emptied cluster is moved to the point
/// farthest from its current centroid.
pub fn kmeans<R: Rng + ?Sized>(points: &[Vec2], k: usize, rng: &mut R) -> Result<KMeans> {
    if k == 0 || points.is_empty() {
        return Err(Error::InvalidParameter(
            "k-means needs k >= 1 and points".into(),
        ));
    }
    let mut distinct: Vec<(u64, u64)> = points
        .iter()
        .map(|p| (p.x.to_bits(), p.y.to_bits()))
        .collect();
    distinct.sort_unstable();
    distinct.dedup();
    if k > distinct.len() {
        return Err(Error::InsufficientData(format!(
            "k = {k} exceeds {} distinct points",
            distinct.len()
        )));
    }

    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())]);
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| p.distance(centroids[0]).powi(2))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut chosen = d2
            .iter()
            .rposition(|&d| d > 0.0)
            .expect("distinct points remain");
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                chosen = i;
                break;
            }
            target -= d;
        }
        let c = points[chosen];
        centroids.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(p.distance(c).powi(2));
        }
    }

    let mut assignments: Vec<usize> = points.iter().map(|&p| nearest(p, &centroids).0).collect();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut sums = vec![Vec2::ZERO; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            sums[a] += *p;
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c] / counts[c] as f64;
            } else {
                let far = points
                    .iter()
                    .zip(&assignments)
                    .map(|(p, &a)| p.distance(centroids[a]))
                    .enumerate()
                    .fold(
                        (0, -1.0),
                        |best, (i, d)| if d > best.1 { (i, d) } else { best },
                    )
                    .0;
                centroids[c] = points[far];
                assignments[far] = c;
            }
        }
        let next: Vec<usize> = points.iter().map(|&p| nearest(p, &centroids).0).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }
    Ok(KMeans {
        centroids,
        assignments,
        iterations,
    })
}
