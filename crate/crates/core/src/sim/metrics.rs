use serde::{Deserialize, Serialize, Serializer};

use crate::geometry::{AgentState, Obstacle};

use super::Trace;

/// Surface-to-surface distance from `agent` to the nearest other agent or
/// obstacle; `+∞` when there is nothing else.
pub fn safety_margin(agent: &AgentState, agents: &[AgentState], obstacles: &[Obstacle]) -> f64 {
    let to_agents = agents
        .iter()
        .filter(|b| b.id != agent.id)
        .map(|b| agent.position.distance(b.position) - agent.params.radius - b.params.radius);
    let to_obstacles = obstacles
        .iter()
        .map(|o| o.disc_clearance(agent.position, agent.params.radius));
    to_agents.chain(to_obstacles).fold(f64::INFINITY, f64::min)
}

/// Infinite margins serialize as `null`.
fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Latest arrival, or the time limit when some agent never arrived.
    pub total_travel_time: f64,
    /// Summed path length of all agents.
    pub total_distance: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub safety_margin_min: f64,
    #[serde(serialize_with = "finite_or_null")]
    pub safety_margin_avg: f64,
    /// Every agent reached its goal within the time limit.
    pub completed: bool,
    pub collision_count: usize,
    pub max_penetration: f64,
    pub arrival_times: Vec<Option<f64>>,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// Summarises a run. Margins are taken over every post-step snapshot; the
/// average is over per-agent, per-step minima.
pub fn compute_metrics(trace: &Trace) -> Metrics {
    let completed = trace.completed();
    let total_travel_time = if completed {
        trace.arrivals.iter().flatten().copied().fold(0.0, f64::max)
    } else {
        trace.time_limit
    };
    let mut total_distance = 0.0;
    for pair in trace.snapshots.windows(2) {
        for (a, b) in pair[0].iter().zip(&pair[1]) {
            total_distance += a.position.distance(b.position);
        }
    }
    let mut min = f64::INFINITY;
    let mut sum = 0.0;
    let mut count = 0usize;
    for snapshot in trace.snapshots.iter().skip(1) {
        for a in snapshot {
            let m = safety_margin(a, snapshot, &trace.obstacles);
            min = min.min(m);
            if m.is_finite() {
                sum += m;
                count += 1;
            }
        }
    }
    Metrics {
        total_travel_time,
        total_distance,
        safety_margin_min: min,
        safety_margin_avg: if count > 0 {
            sum / count as f64
        } else {
            f64::INFINITY
        },
        completed,
        collision_count: trace.collisions.len(),
        max_penetration: trace.max_penetration(),
        arrival_times: trace.arrivals.clone(),
    }
}
