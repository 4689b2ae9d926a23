use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::sensing::{BEAMS, MAX_RANGE};

use super::{Frame, GeneratedFrame, VelocityPartition};

/// Expert speeds at or above this fraction of `max_speed` are outliers.
const OUTLIER_SPEED_FRACTION: f64 = 0.99;

/// Closest approach over `[0, horizon]` of two points moving linearly.
fn min_distance(rel_position: Vec2, rel_velocity: Vec2, horizon: f64) -> f64 {
    let speed_sq = rel_velocity.length_squared();
    let t = if speed_sq > 0.0 {
        (-rel_position.dot(rel_velocity) / speed_sq).clamp(0.0, horizon)
    } else {
        0.0
    };
    (rel_position + rel_velocity * t).length()
}

/// Keeps a frame unless the recorded step collides or the expert speed is an
/// outlier.
pub fn cleanse_one(frame: &GeneratedFrame) -> bool {
    let scene = &frame.scene;
    let agent = &scene.agent;
    if scene.expert_velocity.length() >= OUTLIER_SPEED_FRACTION * agent.params.max_speed {
        return false;
    }
    scene.neighbors.iter().all(|n| {
        let gap = min_distance(
            n.position - agent.position,
            n.velocity - scene.expert_velocity,
            scene.tau,
        );
        gap >= agent.params.radius + n.params.radius
    })
}

/// Drops frames whose one-step advance (agent under its expert velocity,
/// neighbours under their recorded velocities) brings the agent into
/// contact with a neighbour, and frames whose expert speed is within 1% of
/// `max_speed`.
pub fn cleanse(frames: Vec<GeneratedFrame>) -> Vec<GeneratedFrame> {
    frames.into_iter().filter(cleanse_one).collect()
}

/// Reflects a heading-aligned frame across its x axis. The label is
/// recomputed so frames on sector boundaries stay consistent.
pub fn mirror_frame(frame: &Frame, partition: &VelocityPartition) -> Frame {
    let mut observation = vec![0.0f32; frame.observation.len()];
    for i in 0..BEAMS {
        let j = (BEAMS - i) % BEAMS;
        observation[j] = frame.observation[i];
        observation[BEAMS + 2 * j] = frame.observation[BEAMS + 2 * i];
        observation[BEAMS + 2 * j + 1] = -frame.observation[BEAMS + 2 * i + 1];
    }
    let expert_velocity = [frame.expert_velocity[0], -frame.expert_velocity[1]];
    let label = partition.label(Vec2::new(
        expert_velocity[0] as f64,
        expert_velocity[1] as f64,
    )) as u16;
    Frame {
        observation,
        pref_velocity: [frame.pref_velocity[0], -frame.pref_velocity[1]],
        expert_velocity,
        label,
        meta: frame.meta,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Noisy copies per original frame.
    pub noise_copies: usize,
    /// Range noise standard deviation for the copies, m.
    pub sigma: f64,
    /// Lower clamp for noisy ranges (the sensor's own radius), m.
    pub min_range: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            noise_copies: 1,
            sigma: 0.03,
            min_range: 0.2,
        }
    }
}

/// Originals, then their mirror images, then `noise_copies` blocks of noisy
/// copies of the originals. Noise touches hit ranges only; stored flow is
/// reused.
pub fn augment<R: Rng + ?Sized>(
    frames: &[Frame],
    partition: &VelocityPartition,
    config: &AugmentConfig,
    rng: &mut R,
) -> Vec<Frame> {
    let mut out = Vec::with_capacity(frames.len() * (2 + config.noise_copies));
    out.extend_from_slice(frames);
    out.extend(frames.iter().map(|f| mirror_frame(f, partition)));
    let noise = Normal::new(0.0, config.sigma.max(0.0)).expect("finite sigma");
    let max_range = MAX_RANGE as f32;
    for _ in 0..config.noise_copies {
        for frame in frames {
            let mut copy = frame.clone();
            for r in copy.observation[..BEAMS].iter_mut() {
                if *r < max_range {
                    let noisy = *r as f64 + noise.sample(rng);
                    *r = noisy.clamp(config.min_range, MAX_RANGE) as f32;
                }
            }
            out.push(copy);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_frames, mirror_class, FrameMeta, GenerationConfig};
    use crate::sensing::OBSERVATION_DIM;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn synthetic_frame(seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let partition = VelocityPartition::default();
        let mut observation: Vec<f32> = (0..OBSERVATION_DIM)
            .map(|_| rng.random::<f32>() * 2.0)
            .collect();
        observation[5] = MAX_RANGE as f32;
        let expert = [
            rng.random::<f32>() * 2.0 - 1.0,
            rng.random::<f32>() * 2.0 - 1.0,
        ];
        let label = partition.label(Vec2::new(expert[0] as f64, expert[1] as f64)) as u16;
        Frame {
            observation,
            pref_velocity: [1.0, 0.25],
            expert_velocity: expert,
            label,
            meta: FrameMeta {
                protect_radius: 0.2,
                time_horizon: 1.0,
                neighbor_count: 4,
                noise_sigma: 0.01,
            },
        }
    }

    #[test]
    fn mirror_is_an_involution() {
        let p = VelocityPartition::default();
        let f = synthetic_frame(1);
        assert_eq!(mirror_frame(&mirror_frame(&f, &p), &p), f);
        let mut on_axis = f.clone();
        on_axis.expert_velocity = [-2.0, 0.0];
        on_axis.label = p.label(on_axis.expert_velocity()) as u16;
        assert!(mirror_frame(&on_axis, &p).is_consistent(&p));
    }

    #[test]
    fn mirror_negates_y_and_reindexes() {
        let mut f = synthetic_frame(2);
        f.expert_velocity = [1.0, 0.5];
        let p = VelocityPartition::default();
        f.label = p.label(f.expert_velocity()) as u16;
        let m = mirror_frame(&f, &p);
        assert_eq!(m.label as usize, mirror_class(f.label as usize));
        assert_eq!(m.expert_velocity, [1.0, -0.5]);
        assert_eq!(m.observation[350], f.observation[10]);
        assert_eq!(m.observation[0], f.observation[0]);
        assert_eq!(
            m.observation[BEAMS + 2 * 350 + 1],
            -f.observation[BEAMS + 2 * 10 + 1]
        );
    }

    #[test]
    fn augment_sizes() {
        let frames: Vec<Frame> = (0..4).map(synthetic_frame).collect();
        let p = VelocityPartition::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let none = AugmentConfig {
            noise_copies: 0,
            ..AugmentConfig::default()
        };
        assert_eq!(augment(&frames, &p, &none, &mut rng).len(), 8);
        let one = AugmentConfig::default();
        let out = augment(&frames, &p, &one, &mut rng);
        assert_eq!(out.len(), 12);
        for (orig, noisy) in frames.iter().zip(&out[8..]) {
            assert_eq!(orig.label, noisy.label);
            assert_eq!(orig.observation[BEAMS..], noisy.observation[BEAMS..]);
            assert_eq!(noisy.observation[5], MAX_RANGE as f32);
        }
    }

    #[test]
    fn cleanse_drops_fast_experts_and_keeps_clear_steps() {
        let cfg = GenerationConfig::default();
        let partition = VelocityPartition::default();
        let frames = generate_frames(&cfg, &partition, 9, 0, 40);
        for g in &frames {
            let speed = g.scene.expert_velocity.length();
            if speed >= 0.99 * 3.5 {
                assert!(!cleanse_one(g));
            }
        }
        let mut fast = frames[0].clone();
        fast.scene.neighbors.clear();
        fast.scene.expert_velocity = Vec2::new(3.47, 0.0);
        assert!(!cleanse_one(&fast));
        fast.scene.expert_velocity = Vec2::new(1.0, 0.0);
        assert!(cleanse_one(&fast));
        assert!(cleanse(Vec::new()).is_empty());
    }

    #[test]
    fn colliding_step_is_dropped() {
        let cfg = GenerationConfig::default();
        let partition = VelocityPartition::default();
        let mut g = generate_frames(&cfg, &partition, 4, 0, 1).remove(0);
        g.scene.neighbors.truncate(1);
        g.scene.neighbors[0].position = Vec2::new(0.5, 0.0);
        g.scene.neighbors[0].velocity = Vec2::ZERO;
        g.scene.expert_velocity = Vec2::new(2.0, 0.0);
        assert!(!cleanse_one(&g));
        g.scene.expert_velocity = Vec2::new(-2.0, 0.0);
        assert!(cleanse_one(&g));
    }

    #[test]
    fn mirror_labels_off_boundaries() {
        let partition = VelocityPartition::default();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10_000 {
            let dv = Vec2::new(
                rng.random::<f64>() * 14.0 - 7.0,
                rng.random::<f64>() * 14.0 - 7.0,
            );
            let mirrored = partition.label(Vec2::new(dv.x, -dv.y));
            assert_eq!(mirrored, mirror_class(partition.label(dv)));
        }
    }
}
