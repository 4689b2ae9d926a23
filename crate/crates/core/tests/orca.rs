mod common;

use avoidnet_core::orca::{orca_velocity, solve_velocity};
use avoidnet_core::sim::{build_scenario, run, Controller, Scenario};
use avoidnet_core::{AgentState, OrcaParams, Vec2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{grid_oracle, random_planes};

#[test]
fn lp_matches_polar_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let max_speed = 2.0;
    let mut checked = 0;
    while checked < 150 {
        let count = rng.random_range(1..=10);
        let planes = random_planes(&mut rng, count, max_speed);
        let v_pref = Vec2::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let Some((_, grid)) = grid_oracle(&planes, v_pref, max_speed, 0.005) else {
            continue;
        };
        checked += 1;
        let v = solve_velocity(&planes, v_pref, max_speed);
        assert!(
            v.distance(v_pref) <= grid + 0.01,
            "lp {v} grid distance {grid}"
        );
        assert!(planes.iter().all(|h| h.slack(v) > -1e-6));
        assert!(v.length() <= max_speed + 1e-9);
    }
}

#[test]
fn head_on_pair_passes_without_contact() {
    let params = OrcaParams::default();
    let world = build_scenario(Scenario::Swap, 2, 0, &params).unwrap();
    let trace = run(world, &mut Controller::<f64>::Orca, 30.0).unwrap();
    assert!(trace.completed());
    assert_eq!(trace.max_penetration(), 0.0);
}

#[test]
fn random_worlds_stay_collision_free() {
    let params = OrcaParams {
        protect_radius: 0.5,
        ..OrcaParams::default()
    };
    for seed in 0..10 {
        let world = build_scenario(Scenario::Random, 8, seed, &params).unwrap();
        let trace = run(world, &mut Controller::<f64>::Orca, 60.0).unwrap();
        assert!(
            trace.max_penetration() <= 1e-3,
            "seed {seed}: {}",
            trace.max_penetration()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expert_velocity_respects_speed_limit(
        vx in -3.5..3.5f64, vy in -3.5..3.5f64,
        px in -2.5..2.5f64, py in -2.5..2.5f64,
        nvx in -3.0..3.0f64, nvy in -3.0..3.0f64,
        angle in -3.14..3.14f64,
    ) {
        let params = OrcaParams::default();
        let agent = AgentState::new(0, Vec2::ZERO, Vec2::new(5.0, 0.0), params).with_velocity(Vec2::new(vx, vy).clamp_length(3.5));
        let p = Vec2::new(px, py);
        prop_assume!(p.length() > 0.5);
        let other = AgentState::new(1, p, p, params).with_velocity(Vec2::new(nvx, nvy));
        let v_pref = Vec2::from_angle(angle) * 3.5;
        let v = orca_velocity(&agent, &[other], &[], v_pref, 0.1).unwrap();
        prop_assert!(v.is_finite());
        prop_assert!(v.length() <= params.max_speed + 1e-9);
    }

    #[test]
    fn unconstrained_agent_takes_clamped_preference(x in -6.0..6.0f64, y in -6.0..6.0f64) {
        let params = OrcaParams::default();
        let agent = AgentState::new(0, Vec2::ZERO, Vec2::ZERO, params);
        let v = orca_velocity(&agent, &[], &[], Vec2::new(x, y), 0.1).unwrap();
        prop_assert!(v.distance(Vec2::new(x, y).clamp_length(3.5)) < 1e-9);
    }
}
