mod common;

use avoidnet_core::sensing::{
    beam_direction, perturb_scan, raycast_scan, register, CpdConfig, MAX_RANGE,
};
use avoidnet_core::{AgentState, Obstacle, OrcaParams, Vec2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::synthetic_points;

#[test]
fn translations_are_recovered_as_velocities() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let tau = 0.1;
    let mut total = 0.0;
    for _ in 0..10 {
        let curr = synthetic_points(&mut rng);
        let shift = Vec2::from_angle(rng.random_range(-3.14..3.14)) * rng.random_range(0.05..0.35);
        let prev: Vec<Vec2> = curr.iter().map(|&p| p - shift).collect();
        let reg = register(&prev, &curr, &CpdConfig::default());
        let truth = shift / tau;
        let err: f64 = curr
            .iter()
            .zip(&reg.expected_source)
            .map(|(x, y)| ((*x - y.unwrap()) / tau - truth).length())
            .sum::<f64>()
            / curr.len() as f64;
        total += err;
    }
    assert!(total / 10.0 < 0.02, "mean error {}", total / 10.0);
}

#[test]
fn wall_range_matches_geometry() {
    let params = OrcaParams::default();
    let agent = AgentState::new(0, Vec2::ZERO, Vec2::ZERO, params);
    let wall = Obstacle::rectangle(Vec2::new(2.5, 0.0), 0.5, 3.0).unwrap();
    let scan = raycast_scan(&agent, &[], &[wall]);
    // Beam 0 points along +x at the near face; beam k hits it at 2 / cos θ.
    assert!((scan.ranges()[0] - 2.0).abs() < 1e-9);
    for (k, &r) in scan.ranges().iter().enumerate() {
        let d = beam_direction(k);
        if d.x > 0.0 && (2.0 / d.x) * d.y.abs() < 3.0 && 2.0 / d.x <= MAX_RANGE {
            assert!((r - 2.0 / d.x).abs() < 1e-9, "beam {k}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noisy_ranges_stay_in_sensor_limits(seed in 0u64..1000, sigma in 0.0..0.2f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = OrcaParams::default();
        let agent = AgentState::new(0, Vec2::ZERO, Vec2::ZERO, params);
        let others: Vec<AgentState> = (0..5)
            .map(|i| {
                let p = Vec2::from_angle(rng.random_range(-3.14..3.14)) * rng.random_range(0.5..3.5);
                AgentState::new(i + 1, p, p, params)
            })
            .collect();
        let scan = perturb_scan(&raycast_scan(&agent, &others, &[]), sigma, &mut rng);
        for (&r, &hit) in scan.ranges().iter().zip(scan.hits()) {
            prop_assert!(r >= scan.min_range() && r <= MAX_RANGE);
            if !hit {
                prop_assert_eq!(r, MAX_RANGE);
            }
        }
    }
}
