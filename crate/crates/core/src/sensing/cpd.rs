//! Non-rigid coherent point drift registration.
//!
//! The previous scan's points are the centroids of a Gaussian mixture (plus a
//! uniform outlier component) that is deformed by a smooth displacement field
//! `G·W` to explain the current scan. EM alternates soft correspondences with
//! a regularised least-squares update of the field and the shared variance.
//! Kernels are evaluated directly; scans hold at most 360 points.

use nalgebra::{DMatrix, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

use super::{Scan, ScanFlow, BEAMS};

/// Registration parameters. Defaults are the customary values for the
/// method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpdConfig {
    /// Width of the Gaussian smoothness kernel, m.
    pub beta: f64,
    /// Weight of the smoothness regulariser.
    pub lambda: f64,
    /// Prior weight of the uniform outlier component, in [0, 1).
    pub outlier_weight: f64,
    pub max_iterations: usize,
    /// Relative change of the objective that counts as converged.
    pub tolerance: f64,
}

impl Default for CpdConfig {
    fn default() -> Self {
        CpdConfig {
            beta: 2.0,
            lambda: 3.0,
            outlier_weight: 0.1,
            max_iterations: 50,
            tolerance: 1e-5,
        }
    }
}

/// Variance below which the mixture has collapsed onto exact matches.
const SIGMA2_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Registration {
    /// Moving points after deformation.
    pub transformed: Vec<Vec2>,
    pub sigma2: f64,
    /// Penalised negative log-likelihood before the first and after every
    /// iteration.
    pub objective: Vec<f64>,
    /// Posterior-weighted original moving point for each fixed point, or
    /// `None` when the point is explained by the outlier component alone.
    pub expected_source: Vec<Option<Vec2>>,
}

impl Registration {
    pub fn iterations(&self) -> usize {
        self.objective.len().saturating_sub(1)
    }
}

struct EStep {
    /// Row-major M × N posterior.
    posterior: Vec<f64>,
    objective: f64,
}

fn e_step(
    fixed: &[Vec2],
    transformed: &[Vec2],
    sigma2: f64,
    outlier_weight: f64,
    regulariser: f64,
) -> EStep {
    let m = transformed.len();
    let n = fixed.len();
    let norm = (1.0 - outlier_weight) / (m as f64 * 2.0 * std::f64::consts::PI * sigma2);
    let outlier = outlier_weight / n as f64;
    let mut posterior = vec![0.0; m * n];
    let mut nll = 0.0;
    let inv_two_sigma2 = 0.5 / sigma2;
    for (j, &x) in fixed.iter().enumerate() {
        let mut sum = 0.0;
        for (i, &t) in transformed.iter().enumerate() {
            let k = (-(x - t).length_squared() * inv_two_sigma2).exp();
            posterior[i * n + j] = k;
            sum += k;
        }
        let density = norm * sum + outlier;
        nll -= density.ln();
        let scale = norm / density;
        for i in 0..m {
            posterior[i * n + j] *= scale;
        }
    }
    EStep {
        posterior,
        objective: nll + regulariser,
    }
}

/// Registers `moving` onto `fixed`.
pub fn register(moving: &[Vec2], fixed: &[Vec2], cfg: &CpdConfig) -> Registration {
    let m = moving.len();
    let n = fixed.len();
    assert!(m > 0 && n > 0, "registration needs non-empty point sets");

    let gram = DMatrix::from_fn(m, m, |i, j| {
        (-(moving[i] - moving[j]).length_squared() / (2.0 * cfg.beta * cfg.beta)).exp()
    });

    let mut sigma2 = moving
        .iter()
        .map(|&y| fixed.iter().map(|&x| (x - y).length_squared()).sum::<f64>())
        .sum::<f64>()
        / (2.0 * m as f64 * n as f64);
    if sigma2 <= SIGMA2_FLOOR {
        // Identical single-point sets and the like.
        sigma2 = SIGMA2_FLOOR;
    }

    let mut transformed = moving.to_vec();
    let mut step = e_step(fixed, &transformed, sigma2, cfg.outlier_weight, 0.0);
    let mut objective = vec![step.objective];

    for _ in 0..cfg.max_iterations {
        if sigma2 <= SIGMA2_FLOOR {
            break;
        }
        let p = &step.posterior;
        let p1: Vec<f64> = (0..m).map(|i| p[i * n..(i + 1) * n].iter().sum()).collect();
        let total: f64 = p1.iter().sum();
        if total <= f64::MIN_POSITIVE {
            break;
        }

        // (diag(P1)·G + λσ²I) W = P·X − diag(P1)·Y
        let mut system = gram.clone();
        for i in 0..m {
            for j in 0..m {
                system[(i, j)] *= p1[i];
            }
            system[(i, i)] += cfg.lambda * sigma2;
        }
        let rhs = DMatrix::from_fn(m, 2, |i, d| {
            let px: f64 = (0..n)
                .map(|j| p[i * n + j] * if d == 0 { fixed[j].x } else { fixed[j].y })
                .sum();
            let y = if d == 0 { moving[i].x } else { moving[i].y };
            px - p1[i] * y
        });
        let lu: LU<f64, Dyn, Dyn> = system.lu();
        let Some(weights) = lu.solve(&rhs) else {
            break;
        };
        let displacement = &gram * &weights;
        let regulariser = 0.5
            * cfg.lambda
            * weights
                .iter()
                .zip(displacement.iter())
                .map(|(w, v)| w * v)
                .sum::<f64>();
        for i in 0..m {
            transformed[i] = moving[i] + Vec2::new(displacement[(i, 0)], displacement[(i, 1)]);
        }

        let weighted_sq: f64 = (0..m)
            .map(|i| {
                (0..n)
                    .map(|j| p[i * n + j] * (fixed[j] - transformed[i]).length_squared())
                    .sum::<f64>()
            })
            .sum();
        sigma2 = (weighted_sq / (2.0 * total)).max(SIGMA2_FLOOR);

        let previous = *objective.last().expect("objective seeded");
        step = e_step(fixed, &transformed, sigma2, cfg.outlier_weight, regulariser);
        objective.push(step.objective);
        if (previous - step.objective).abs() <= cfg.tolerance * previous.abs().max(1.0) {
            break;
        }
    }

    let p = &step.posterior;
    let expected_source = (0..n)
        .map(|j| {
            let mut weight = 0.0;
            let mut acc = Vec2::ZERO;
            for (i, &y) in moving.iter().enumerate() {
                let w = p[i * n + j];
                weight += w;
                acc += y * w;
            }
            (weight > 1e-12).then(|| acc / weight)
        })
        .collect();

    Registration {
        transformed,
        sigma2,
        objective,
        expected_source,
    }
}

/// Flow between two scans taken from the same origin.
pub fn estimate_flow(prev: &Scan, curr: &Scan, tau: f64, cfg: &CpdConfig) -> ScanFlow {
    estimate_flow_ego(prev, curr, Vec2::ZERO, tau, cfg)
}

/// Flow between two equally oriented scans, where the previous scan was
/// taken at `prev_origin` relative to the current one (ego-motion
/// compensation). Velocities are those of the current return points; beams
/// without a return get zero.
pub fn estimate_flow_ego(
    prev: &Scan,
    curr: &Scan,
    prev_origin: Vec2,
    tau: f64,
    cfg: &CpdConfig,
) -> ScanFlow {
    let prev_points: Vec<Vec2> = prev
        .points()
        .into_iter()
        .map(|(_, p)| p + prev_origin)
        .collect();
    let curr_points = curr.points();
    if prev_points.len() < 3 || curr_points.len() < 3 {
        return ScanFlow::zeros();
    }
    let fixed: Vec<Vec2> = curr_points.iter().map(|&(_, p)| p).collect();
    let registration = register(&prev_points, &fixed, cfg);

    let mut velocities = vec![Vec2::ZERO; BEAMS];
    for ((beam, x), source) in curr_points.iter().zip(&registration.expected_source) {
        if let Some(y) = source {
            velocities[*beam] = (*x - *y) / tau;
        }
    }
    ScanFlow::new(velocities).expect("360 beams")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::MAX_RANGE;

    fn arc_points(center: Vec2, radius: f64, count: usize) -> Vec<Vec2> {
        (0..count)
            .map(|i| center + Vec2::from_angle(i as f64 * 0.15) * radius)
            .collect()
    }

    #[test]
    fn identical_sets_give_zero_flow() {
        let pts = arc_points(Vec2::new(2.0, 0.5), 0.4, 20);
        let reg = register(&pts, &pts, &CpdConfig::default());
        for (x, y) in pts.iter().zip(&reg.expected_source) {
            assert!((*x - y.unwrap()).length() < 1e-7);
        }
    }

    #[test]
    fn translation_is_recovered() {
        let curr = arc_points(Vec2::new(1.5, -0.5), 0.5, 30);
        let shift = Vec2::new(-0.1, 0.0);
        let prev: Vec<Vec2> = curr.iter().map(|&p| p + shift).collect();
        let reg = register(&prev, &curr, &CpdConfig::default());
        for (x, y) in curr.iter().zip(&reg.expected_source) {
            let v = (*x - y.unwrap()) / 0.1;
            assert!((v - Vec2::new(1.0, 0.0)).length() < 0.02, "{v}");
        }
    }

    #[test]
    fn objective_never_increases() {
        let curr = arc_points(Vec2::new(1.0, 1.0), 0.6, 25);
        let prev: Vec<Vec2> = curr
            .iter()
            .enumerate()
            .map(|(i, &p)| p + Vec2::new(0.2, -0.1) + Vec2::new(0.01 * (i % 3) as f64, 0.0))
            .collect();
        let reg = register(&prev, &curr, &CpdConfig::default());
        assert!(reg.iterations() > 1);
        for pair in reg.objective.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9 * pair[0].abs().max(1.0),
                "{:?}",
                reg.objective
            );
        }
    }

    #[test]
    fn sparse_scans_give_zero_flow() {
        let mut ranges = vec![MAX_RANGE; BEAMS];
        for r in ranges.iter_mut().take(10) {
            *r = 1.0;
        }
        let prev = Scan::from_ranges(ranges, 0.2, MAX_RANGE).unwrap();
        let curr = Scan::empty(0.2, MAX_RANGE);
        let flow = estimate_flow(&prev, &curr, 0.1, &CpdConfig::default());
        assert!(flow.velocities().iter().all(|v| *v == Vec2::ZERO));
    }
}
