//! Independent oracles shared by the integration tests and the acceptance
//! suite.
#![allow(dead_code)]

use std::f64::consts::PI;

use avoidnet_core::canet::{CaNet, Mode};
use avoidnet_core::orca::HalfPlane;
use avoidnet_core::Vec2;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Nearest point to `v_pref` on a polar grid over the speed disc that
/// satisfies every plane, with its distance. Only grid points within
/// `search` of `v_pref` are visited.
pub fn polar_grid_nearest(
    planes: &[HalfPlane],
    v_pref: Vec2,
    max_speed: f64,
    step: f64,
    search: f64,
) -> Option<(Vec2, f64)> {
    let rings = (max_speed / step).floor() as usize;
    let pref_len = v_pref.length();
    let pref_angle = v_pref.angle();
    let mut best: Option<(Vec2, f64)> = None;
    let mut consider = |p: Vec2| {
        if planes.iter().all(|h| h.slack(p) >= 0.0) {
            let d = p.distance(v_pref);
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((p, d));
            }
        }
    };
    consider(Vec2::ZERO);
    for i in 1..=rings {
        let r = i as f64 * step;
        if (r - pref_len).abs() > search {
            continue;
        }
        let count = ((2.0 * PI * r / step).ceil() as usize).max(8);
        let dtheta = 2.0 * PI / count as f64;
        // Angular window of the ring inside the search disc.
        let half = if pref_len < 1e-12 {
            PI
        } else {
            let c = (r * r + pref_len * pref_len - search * search) / (2.0 * r * pref_len);
            if c <= -1.0 {
                PI
            } else {
                c.min(1.0).acos()
            }
        };
        let first = ((pref_angle - half) / dtheta).floor() as i64;
        let last = ((pref_angle + half) / dtheta).ceil() as i64;
        let span = (last - first).min(count as i64);
        for k in first..first + span + 1 {
            consider(Vec2::from_angle(k as f64 * dtheta) * r);
        }
    }
    best
}

/// Grid oracle: coarse pass to bound the search, then the fine pass.
pub fn grid_oracle(
    planes: &[HalfPlane],
    v_pref: Vec2,
    max_speed: f64,
    step: f64,
) -> Option<(Vec2, f64)> {
    let all = v_pref.length() + max_speed + 1.0;
    let (_, coarse) = polar_grid_nearest(planes, v_pref, max_speed, 0.05, all)?;
    polar_grid_nearest(planes, v_pref, max_speed, step, coarse + 0.1)
}

/// Random half-planes that leave some part of the speed disc permitted.
pub fn random_planes<R: Rng>(rng: &mut R, count: usize, max_speed: f64) -> Vec<HalfPlane> {
    (0..count)
        .map(|_| {
            let normal = Vec2::from_angle(rng.random_range(-PI..PI));
            let offset = rng.random_range(-0.9..0.6) * max_speed;
            HalfPlane::new(normal * offset, normal)
        })
        .collect()
}

/// Central finite differences on `count` random parameters of a model in
/// eval mode. Returns the largest relative error.
pub fn gradient_check(
    net: &CaNet<f64>,
    x: &Array2<f64>,
    labels: &[usize],
    count: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, grads, _) = net
        .loss_and_grad(x.view(), labels, Mode::Eval, &mut rng)
        .unwrap();
    let sizes: Vec<usize> = net.layers().iter().map(|l| l.parameter_count()).collect();
    let total: usize = sizes.iter().sum();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let mut k = rng.random_range(0..total);
        let layer = sizes
            .iter()
            .position(|&s| {
                if k < s {
                    true
                } else {
                    k -= s;
                    false
                }
            })
            .unwrap();
        let weights = net.layers()[layer].weights.len();
        let analytic = if k < weights {
            grads[layer].weights.as_slice().unwrap()[k]
        } else {
            grads[layer].bias[k - weights]
        };
        let loss_at = |delta: f64| {
            let mut probe = net.clone();
            let dense = &mut probe.layers_mut()[layer];
            if k < weights {
                dense.weights.as_slice_mut().unwrap()[k] += delta;
            } else {
                dense.bias[k - weights] += delta;
            }
            let cache = probe
                .forward_batch(x.view(), Mode::Eval, &mut ChaCha8Rng::seed_from_u64(0))
                .unwrap();
            probe.loss(&cache, labels)
        };
        let numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
        let err = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    worst
}

/// Points on a few random circles and segments, as a lidar would see them.
pub fn synthetic_points<R: Rng>(rng: &mut R) -> Vec<Vec2> {
    let mut pts = Vec::new();
    for _ in 0..rng.random_range(2..5) {
        let center = Vec2::from_angle(rng.random_range(-PI..PI)) * rng.random_range(1.0..3.0);
        let radius = rng.random_range(0.2..0.5);
        let facing = (-center).angle();
        for k in 0..12 {
            let a = facing + (k as f64 - 5.5) * 0.12;
            pts.push(center + Vec2::from_angle(a) * radius);
        }
    }
    pts
}
