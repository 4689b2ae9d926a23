//! Fixture builders shared by the benchmarks.

use std::f64::consts::PI;

use avoidnet_core::{AgentState, OrcaParams, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// An agent at the origin with `n` moving neighbours on a jittered ring.
pub fn crowd(n: usize, seed: u64) -> (AgentState, Vec<AgentState>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = OrcaParams::default();
    let agent = AgentState::new(0, Vec2::ZERO, Vec2::new(5.0, 0.0), params)
        .with_velocity(Vec2::new(1.0, 0.0));
    let neighbors = (0..n)
        .map(|i| {
            let angle = 2.0 * PI * i as f64 / n as f64 + rng.random_range(-0.1..0.1);
            let p = Vec2::from_angle(angle) * rng.random_range(1.0..2.8);
            let v = Vec2::from_angle(rng.random_range(-PI..PI)) * rng.random_range(0.0..3.5);
            AgentState::new(i + 1, p, p, params).with_velocity(v)
        })
        .collect();
    (agent, neighbors)
}

/// Same crowd one step of length `tau` earlier.
pub fn rewind(agents: &[AgentState], tau: f64) -> Vec<AgentState> {
    agents
        .iter()
        .map(|a| {
            let mut b = a.clone();
            b.position -= a.velocity * tau;
            b
        })
        .collect()
}
