//! Single-step expert recordings around a randomly surrounded agent.

use std::f64::consts::PI;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{to_local_frame, AgentState, LocalFrame, OrcaParams, Vec2};
use crate::orca::orca_velocity;
use crate::sensing::{estimate_flow_ego, perturb_scan, raycast_scan, CpdConfig, Observation};
use crate::{Error, Result};

use super::{to_f32_pair, Frame, FrameMeta, VelocityPartition};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Fixed parameters; `protect_radius` and `time_horizon` are overridden
    /// per frame from the sweep lists.
    pub base: OrcaParams,
    pub protect_radii: Vec<f64>,
    pub time_horizons: Vec<f64>,
    pub min_neighbors: usize,
    pub max_neighbors: usize,
    pub noise_min: f64,
    pub noise_max: f64,
    /// Simulator step, s.
    pub tau: f64,
    pub placement_attempts: usize,
    pub cpd: CpdConfig,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            base: OrcaParams {
                max_speed: 3.5,
                max_neighbors: 10,
                neighbor_dist: 3.0,
                protect_radius: 0.5,
                radius: 0.2,
                time_horizon: 1.0,
                time_horizon_obs: 1.0,
            },
            protect_radii: vec![0.2, 0.5],
            time_horizons: vec![0.5, 1.0, 2.0],
            min_neighbors: 3,
            max_neighbors: 10,
            noise_min: 0.01,
            noise_max: 0.05,
            tau: crate::CYCLE_PERIOD,
            placement_attempts: 100,
            cpd: CpdConfig::default(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.protect_radii.is_empty() || self.time_horizons.is_empty() {
            return bad("parameter sweep lists must be non-empty");
        }
        if self.min_neighbors == 0 || self.min_neighbors > self.max_neighbors {
            return bad("neighbor count range is empty");
        }
        if !(0.0 <= self.noise_min && self.noise_min <= self.noise_max) {
            return bad("noise range is empty");
        }
        if self.tau <= 0.0 {
            return bad("tau must be positive");
        }
        for &protect_radius in &self.protect_radii {
            for &time_horizon in &self.time_horizons {
                OrcaParams {
                    protect_radius,
                    time_horizon,
                    ..self.base
                }
                .validate()?;
            }
        }
        Ok(())
    }
}

/// World state behind a frame, kept in memory for cleansing.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub agent: AgentState,
    pub neighbors: Vec<AgentState>,
    /// Global preferred velocity.
    pub pref_velocity: Vec2,
    /// Global expert velocity.
    pub expert_velocity: Vec2,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedFrame {
    pub frame: Frame,
    pub scene: Scene,
}

fn random_velocity<R: Rng + ?Sized>(rng: &mut R, max_speed: f64) -> Vec2 {
    let speed = rng.random::<f64>() * max_speed;
    let angle = -PI + rng.random::<f64>() * 2.0 * PI;
    Vec2::from_angle(angle) * speed
}

/// Records one expert decision. Returns `None` when neighbour placement
/// needs more than `placement_attempts` draws; the caller retries with
/// fresh randomness.
pub fn generate_frame<R: Rng + ?Sized>(
    config: &GenerationConfig,
    partition: &VelocityPartition,
    rng: &mut R,
) -> Option<GeneratedFrame> {
    let protect_radius = *config.protect_radii.choose(rng)?;
    let time_horizon = *config.time_horizons.choose(rng)?;
    let params = OrcaParams {
        protect_radius,
        time_horizon,
        ..config.base
    };
    let neighbor_count = rng.random_range(config.min_neighbors..=config.max_neighbors);
    let sigma = rng.random_range(config.noise_min..=config.noise_max);

    let pref_angle = -PI + rng.random::<f64>() * 2.0 * PI;
    let pref_velocity = Vec2::from_angle(pref_angle) * params.max_speed;

    // Neighbours uniformly in the neighbourhood disc, physical discs apart.
    let min_gap = 2.0 * params.radius;
    let mut positions: Vec<Vec2> = Vec::with_capacity(neighbor_count);
    let mut attempts = 0;
    while positions.len() < neighbor_count {
        if attempts == config.placement_attempts {
            return None;
        }
        attempts += 1;
        let r = params.neighbor_dist * rng.random::<f64>().sqrt();
        let p = Vec2::from_angle(-PI + rng.random::<f64>() * 2.0 * PI) * r;
        if p.length() < min_gap || positions.iter().any(|q| q.distance(p) < min_gap) {
            continue;
        }
        positions.push(p);
    }

    let agent = AgentState::new(0, Vec2::ZERO, pref_velocity, params)
        .with_velocity(random_velocity(rng, params.max_speed));
    let neighbors: Vec<AgentState> = positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            AgentState::new(i + 1, p, p, params)
                .with_velocity(random_velocity(rng, params.max_speed))
        })
        .collect();

    let expert_velocity = orca_velocity(&agent, &neighbors, &[], pref_velocity, config.tau).ok()?;

    // Previous step: everyone one cycle back along their current velocity.
    let back = |a: &AgentState| {
        let mut prev = a.clone();
        prev.position -= a.velocity * config.tau;
        prev
    };
    let prev_agent = back(&agent);
    let prev_neighbors: Vec<AgentState> = neighbors.iter().map(back).collect();

    let scan = perturb_scan(&raycast_scan(&agent, &neighbors, &[]), sigma, rng);
    let prev_scan = perturb_scan(&raycast_scan(&prev_agent, &prev_neighbors, &[]), sigma, rng);
    let flow = estimate_flow_ego(
        &prev_scan,
        &scan,
        prev_agent.position - agent.position,
        config.tau,
        &config.cpd,
    );
    let observation = Observation { scan, flow };

    let (local_obs, local_pref) = to_local_frame(&agent, &observation, pref_velocity);
    let frame_axes = LocalFrame::for_agent(&agent, pref_velocity);
    let local_expert = frame_axes.vector_to_local(expert_velocity - agent.velocity);

    let observation: Vec<f32> = local_obs.flatten().iter().map(|&v| v as f32).collect();
    let expert = to_f32_pair(local_expert);
    let label = partition.label(Vec2::new(expert[0] as f64, expert[1] as f64)) as u16;

    Some(GeneratedFrame {
        frame: Frame {
            observation,
            pref_velocity: to_f32_pair(local_pref),
            expert_velocity: expert,
            label,
            meta: FrameMeta {
                protect_radius: protect_radius as f32,
                time_horizon: time_horizon as f32,
                neighbor_count: neighbor_count as u16,
                noise_sigma: sigma as f32,
            },
        },
        scene: Scene {
            agent,
            neighbors,
            pref_velocity,
            expert_velocity,
            tau: config.tau,
        },
    })
}

/// Random stream for frame `index` of a run seeded with `seed`.
pub fn frame_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generates frames for indices `start..start + count`, each from its own
/// stream, retrying rejected placements within that stream. Output order
/// follows the index regardless of thread count.
pub fn generate_frames(
    config: &GenerationConfig,
    partition: &VelocityPartition,
    seed: u64,
    start: u64,
    count: u64,
) -> Vec<GeneratedFrame> {
    (start..start + count)
        .into_par_iter()
        .map(|index| {
            let mut rng = frame_rng(seed, index);
            loop {
                if let Some(frame) = generate_frame(config, partition, &mut rng) {
                    return frame;
                }
            }
        })
        .collect()
}
