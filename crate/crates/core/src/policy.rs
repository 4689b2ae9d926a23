//! Runtime controller: class probabilities from the network become a
//! concrete velocity by sampling the most likely class region and keeping
//! the candidate with the largest predicted clearance.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::canet::{argmax, CaNet, Real};
use crate::dataset::VelocityPartition;
use crate::geometry::{point_segment_distance, AgentState, LocalFrame, Vec2};
use crate::sensing::{beam_direction, Observation, BEAMS};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Candidates drawn from the chosen class region.
    pub samples_per_class: usize,
    /// Look-ahead for the clearance check, s.
    pub margin_horizon: f64,
    /// Equal speed reductions tried when the best candidate is unsafe.
    pub slowdown_steps: usize,
    /// Move scan points along their estimated flow during the look-ahead;
    /// when false they are treated as static.
    pub advected: bool,
    pub max_speed: f64,
    /// Physical radius swept along the candidate path, m.
    pub radius: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            samples_per_class: 10,
            margin_horizon: crate::CYCLE_PERIOD,
            slowdown_steps: 8,
            advected: true,
            max_speed: 3.5,
            radius: 0.2,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_class == 0
            || !(self.margin_horizon > 0.0)
            || self.slowdown_steps == 0
            || !(self.max_speed > 0.0)
            || !(self.radius >= 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "invalid policy config {self:?}"
            )));
        }
        Ok(())
    }
}

/// Outcome of one decision.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    /// Global velocity to apply.
    pub velocity: Vec2,
    pub class: usize,
    pub probabilities: Vec<f64>,
    /// Predicted clearance of `velocity`; `+∞` with no scan returns.
    pub margin: f64,
}

/// Predicted clearance, in the local frame, of moving at `velocity` for
/// `horizon` seconds: the smallest distance between the swept agent disc
/// and any scan point, the points moving with `point_velocity(beam)`.
fn clearance(points: &[(usize, Vec2, Vec2)], velocity: Vec2, horizon: f64, radius: f64) -> f64 {
    points
        .iter()
        .map(|&(_, p, pv)| {
            // Point motion relative to the agent; the agent stays at the origin.
            let rel = (pv - velocity) * horizon;
            point_segment_distance(Vec2::ZERO, p, p + rel) - radius
        })
        .fold(f64::INFINITY, f64::min)
}

/// Chooses a velocity from a local-frame observation. `v` and `v_pref` are
/// the agent's global current and preferred velocities; the result is
/// global.
pub fn select_velocity<T: Real, R: Rng + ?Sized>(
    model: &CaNet<T>,
    partition: &VelocityPartition,
    obs: &Observation,
    v: Vec2,
    v_pref: Vec2,
    cfg: &PolicyConfig,
    rng: &mut R,
) -> Result<Decision> {
    let frame = LocalFrame::new(Vec2::ZERO, v, v_pref);
    let local_pref = frame.vector_to_local(v_pref - v);
    let mut input = obs.flatten();
    input.push(local_pref.x);
    input.push(local_pref.y);
    let probabilities = model.predict(&input)?;
    let class = argmax(&probabilities);

    let local_v = frame.vector_to_local(v);
    let flow = obs.flow.velocities();
    let points: Vec<(usize, Vec2, Vec2)> = (0..BEAMS)
        .filter(|&i| obs.scan.hits()[i])
        .map(|i| {
            let p = beam_direction(i) * obs.scan.ranges()[i];
            // Stored flow is relative to the agent; add its velocity back.
            let pv = if cfg.advected {
                flow[i] + local_v
            } else {
                Vec2::ZERO
            };
            (i, p, pv)
        })
        .collect();

    let mut best: Option<(Vec2, f64)> = None;
    for _ in 0..cfg.samples_per_class {
        let dv = partition.sample(class, rng);
        let candidate = (local_v + dv).clamp_length(cfg.max_speed);
        let margin = clearance(&points, candidate, cfg.margin_horizon, cfg.radius);
        if best.is_none_or(|(_, m)| margin > m) {
            best = Some((candidate, margin));
        }
    }
    let (mut chosen, mut margin) = best.expect("at least one sample");
    if margin < 0.0 {
        let full = chosen;
        for k in (0..cfg.slowdown_steps).rev() {
            chosen = full * (k as f64 / cfg.slowdown_steps as f64);
            margin = clearance(&points, chosen, cfg.margin_horizon, cfg.radius);
            if margin >= 0.0 {
                break;
            }
        }
    }
    Ok(Decision {
        velocity: frame.vector_to_global(chosen),
        class,
        probabilities,
        margin,
    })
}

/// Advances an agent one cycle at `chosen`.
pub fn apply_cycle(agent: &AgentState, chosen: Vec2, tau: f64) -> AgentState {
    let mut next = agent.clone();
    next.position += chosen * tau;
    next.velocity = chosen;
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canet::Architecture;
    use crate::geometry::OrcaParams;
    use crate::sensing::{Scan, ScanFlow, MAX_RANGE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn empty_obs() -> Observation {
        Observation {
            scan: Scan::empty(0.2, MAX_RANGE),
            flow: ScanFlow::zeros(),
        }
    }

    fn zero_model() -> CaNet<f32> {
        CaNet::zeros(Architecture::default()).unwrap()
    }

    #[test]
    fn empty_scan_keeps_first_candidate() {
        let model = zero_model();
        let p = VelocityPartition::default();
        let cfg = PolicyConfig::default();
        let v = Vec2::new(1.0, 0.5);
        let d = select_velocity(
            &model,
            &p,
            &empty_obs(),
            v,
            Vec2::new(3.5, 0.0),
            &cfg,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert_eq!(d.class, 0);
        assert_eq!(d.margin, f64::INFINITY);
        // Same stream: the first draw is the candidate.
        let frame = LocalFrame::new(Vec2::ZERO, v, Vec2::new(3.5, 0.0));
        let dv = p.sample(0, &mut ChaCha8Rng::seed_from_u64(1));
        let expected = frame.vector_to_global((frame.vector_to_local(v) + dv).clamp_length(3.5));
        assert!((d.velocity - expected).length() < 1e-12);
        assert!((d.velocity - v).length() <= p.center_radius() + 1e-12);
    }

    #[test]
    fn close_point_ahead_forces_slowdown() {
        let mut ranges = vec![MAX_RANGE; BEAMS];
        ranges[0] = 0.3;
        let obs = Observation {
            scan: Scan::from_ranges(ranges, 0.2, MAX_RANGE).unwrap(),
            flow: ScanFlow::zeros(),
        };
        let pts = vec![(0, Vec2::new(0.3, 0.0), Vec2::ZERO)];
        assert!(clearance(&pts, Vec2::new(3.5, 0.0), 0.1, 0.2) < 0.0);

        // A model that always answers with the straight-ahead outer class.
        let mut model = zero_model();
        let p = VelocityPartition::default();
        let ahead = p.label(Vec2::new(3.5, 0.0));
        model.head.bias[ahead] = 10.0;
        let cfg = PolicyConfig {
            samples_per_class: 1,
            ..PolicyConfig::default()
        };
        let d = select_velocity(
            &model,
            &p,
            &obs,
            Vec2::ZERO,
            Vec2::new(3.5, 0.0),
            &cfg,
            &mut ChaCha8Rng::seed_from_u64(2),
        )
        .unwrap();
        assert_eq!(d.class, ahead);
        assert!(d.velocity.length() <= 1.0, "{}", d.velocity);
        assert!(d.margin >= 0.0 || d.velocity == Vec2::ZERO);
    }

    #[test]
    fn speed_never_exceeds_limit() {
        let mut model = zero_model();
        let p = VelocityPartition::default();
        model.head.bias[55] = 5.0;
        let cfg = PolicyConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let v = Vec2::new(3.0, 1.0).clamp_length(3.5);
            let d = select_velocity(
                &model,
                &p,
                &empty_obs(),
                v,
                Vec2::new(0.0, -3.5),
                &cfg,
                &mut rng,
            )
            .unwrap();
            assert!(d.velocity.length() <= 3.5 + 1e-9);
        }
    }

    #[test]
    fn apply_cycle_moves_by_velocity() {
        let a = AgentState::new(0, Vec2::ZERO, Vec2::new(5.0, 0.0), OrcaParams::default());
        let b = apply_cycle(&a, Vec2::new(3.5, 0.0), 0.1);
        assert!((b.position - Vec2::new(0.35, 0.0)).length() < 1e-12);
        assert_eq!(b.velocity, Vec2::new(3.5, 0.0));
        let c = apply_cycle(&b, Vec2::new(3.5, 0.0), 0.1);
        assert!((c.position - Vec2::new(0.7, 0.0)).length() < 1e-12);
        assert_eq!(apply_cycle(&a, Vec2::ZERO, 0.1).position, a.position);
    }
}
