//! Synchronous multi-agent simulation, scenario builders and run metrics.

mod metrics;
mod scenario;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canet::{CaNet, Real};
use crate::dataset::VelocityPartition;
use crate::geometry::{preferred_velocity, to_local_frame, AgentState, Obstacle, Vec2};
use crate::orca::orca_velocity;
use crate::policy::{apply_cycle, select_velocity, PolicyConfig};
use crate::sensing::{
    estimate_flow_ego, perturb_scan, raycast_scan, CpdConfig, Observation, Scan, ScanFlow,
};
use crate::{Error, Result};

pub use metrics::{compute_metrics, safety_margin, Metrics};
pub use scenario::{build_scenario, Scenario, L_SHAPE_SEVERE_PENETRATION};

/// Distance to the goal at which an agent counts as arrived and stops.
pub const GOAL_TOLERANCE: f64 = 0.1;
/// Slack below the sum of radii before an overlap counts as a collision.
pub const CONTACT_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub agents: Vec<AgentState>,
    pub obstacles: Vec<Obstacle>,
    pub time: f64,
    pub tau: f64,
    /// Builder constants, exported with traces.
    pub info: BTreeMap<String, String>,
}

impl World {
    pub fn new(agents: Vec<AgentState>, obstacles: Vec<Obstacle>, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter("tau must be positive".into()));
        }
        let mut ids: Vec<usize> = agents.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("agent ids must be unique".into()));
        }
        for a in &agents {
            a.validate()?;
        }
        Ok(World {
            agents,
            obstacles,
            time: 0.0,
            tau,
            info: BTreeMap::new(),
        })
    }

    pub fn arrived(&self, agent: &AgentState) -> bool {
        agent.position.distance(agent.goal) <= GOAL_TOLERANCE
    }

    pub fn all_arrived(&self) -> bool {
        self.agents.iter().all(|a| self.arrived(a))
    }

    /// True when no agent discs overlap each other or an obstacle.
    pub fn is_clear(&self) -> bool {
        let n = self.agents.len();
        for i in 0..n {
            let a = &self.agents[i];
            if self
                .obstacles
                .iter()
                .any(|o| o.disc_clearance(a.position, a.params.radius) < 0.0)
            {
                return false;
            }
            for b in &self.agents[i + 1..] {
                if a.position.distance(b.position) < a.params.radius + b.params.radius {
                    return false;
                }
            }
        }
        true
    }
}

/// Per-agent sensing memory of the learned controller.
#[derive(Clone, Debug)]
struct Memory {
    rng: ChaCha8Rng,
    previous: Option<(Scan, Vec2)>,
}

/// The learned policy with its sensing pipeline.
#[derive(Clone, Debug)]
pub struct LearnedController<'a, T> {
    pub model: &'a CaNet<T>,
    pub partition: &'a VelocityPartition,
    pub policy: PolicyConfig,
    /// Range noise of the simulated lidar.
    pub noise_sigma: f64,
    pub cpd: CpdConfig,
    seed: u64,
    memory: BTreeMap<usize, Memory>,
}

impl<'a, T: Real> LearnedController<'a, T> {
    pub fn new(
        model: &'a CaNet<T>,
        partition: &'a VelocityPartition,
        policy: PolicyConfig,
        seed: u64,
    ) -> Self {
        LearnedController {
            model,
            partition,
            policy,
            noise_sigma: 0.03,
            cpd: CpdConfig::default(),
            seed,
            memory: BTreeMap::new(),
        }
    }

    /// Each agent draws from its own stream, so agent order never matters.
    fn memory(&mut self, id: usize) -> &mut Memory {
        let seed = self.seed;
        self.memory.entry(id).or_insert_with(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id as u64);
            Memory {
                rng,
                previous: None,
            }
        })
    }

    fn decide(&mut self, agent: &AgentState, world: &World, v_pref: Vec2) -> Result<Vec2> {
        let model = self.model;
        let partition = self.partition;
        let policy = self.policy;
        let sigma = self.noise_sigma;
        let cpd = self.cpd;
        let tau = world.tau;
        let mem = self.memory(agent.id);
        let scan = perturb_scan(
            &raycast_scan(agent, &world.agents, &world.obstacles),
            sigma,
            &mut mem.rng,
        );
        let flow = match &mem.previous {
            Some((prev, prev_position)) => {
                estimate_flow_ego(prev, &scan, *prev_position - agent.position, tau, &cpd)
            }
            None => ScanFlow::zeros(),
        };
        let obs = Observation { scan, flow };
        let (local, _) = to_local_frame(agent, &obs, v_pref);
        let decision = select_velocity(
            model,
            partition,
            &local,
            agent.velocity,
            v_pref,
            &policy,
            &mut mem.rng,
        )?;
        mem.previous = Some((obs.scan, agent.position));
        Ok(decision.velocity)
    }
}

pub enum Controller<'a, T> {
    /// ORCA with perfect knowledge of every neighbour's state.
    Orca,
    Learned(LearnedController<'a, T>),
}

/// One synchronous cycle: every agent decides against the pre-step
/// snapshot, then all move. Arrived agents hold still. Returns the applied
/// velocities in agent order.
pub fn step<T: Real>(world: &mut World, controller: &mut Controller<'_, T>) -> Result<Vec<Vec2>> {
    let mut chosen = Vec::with_capacity(world.agents.len());
    for agent in &world.agents {
        if world.arrived(agent) {
            chosen.push(Vec2::ZERO);
            continue;
        }
        let v_pref = preferred_velocity(agent.position, agent.goal, &agent.params, world.tau);
        let v = match controller {
            Controller::Orca => {
                orca_velocity(agent, &world.agents, &world.obstacles, v_pref, world.tau)?
            }
            Controller::Learned(learned) => learned.decide(agent, world, v_pref)?,
        };
        chosen.push(v);
    }
    let tau = world.tau;
    for (agent, &v) in world.agents.iter_mut().zip(&chosen) {
        *agent = apply_cycle(agent, v, tau);
    }
    world.time += tau;
    Ok(chosen)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Contact {
    Agent(usize),
    Obstacle(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub agent: usize,
    pub other: Contact,
    pub time: f64,
    pub penetration: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    /// World states, the initial one first.
    pub snapshots: Vec<Vec<AgentState>>,
    /// Applied velocities per step.
    pub velocities: Vec<Vec<Vec2>>,
    /// Arrival time per agent, in agent order.
    pub arrivals: Vec<Option<f64>>,
    pub collisions: Vec<CollisionEvent>,
    pub obstacles: Vec<Obstacle>,
    pub tau: f64,
    pub time_limit: f64,
    pub info: BTreeMap<String, String>,
}

impl Trace {
    pub fn steps(&self) -> usize {
        self.velocities.len()
    }

    pub fn completed(&self) -> bool {
        self.arrivals.iter().all(Option::is_some)
    }

    pub fn max_penetration(&self) -> f64 {
        self.collisions
            .iter()
            .map(|c| c.penetration)
            .fold(0.0, f64::max)
    }

    /// Header lines (`# key=value`) followed by one row per snapshot and
    /// agent.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.info {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "# tau={}", self.tau);
        let _ = writeln!(out, "# time_limit={}", self.time_limit);
        out.push_str("step,agent_id,x,y,vx,vy,margin\n");
        for (s, snapshot) in self.snapshots.iter().enumerate() {
            for a in snapshot {
                let margin = safety_margin(a, snapshot, &self.obstacles);
                let _ = writeln!(
                    out,
                    "{s},{},{},{},{},{},{margin}",
                    a.id, a.position.x, a.position.y, a.velocity.x, a.velocity.y
                );
            }
        }
        out
    }
}

fn record_collisions(world: &World, events: &mut Vec<CollisionEvent>) {
    let agents = &world.agents;
    for (i, a) in agents.iter().enumerate() {
        for b in &agents[i + 1..] {
            let depth = a.params.radius + b.params.radius - a.position.distance(b.position);
            if depth > CONTACT_SLACK {
                events.push(CollisionEvent {
                    agent: a.id,
                    other: Contact::Agent(b.id),
                    time: world.time,
                    penetration: depth,
                });
            }
        }
        for (k, o) in world.obstacles.iter().enumerate() {
            let depth = -o.disc_clearance(a.position, a.params.radius);
            if depth > CONTACT_SLACK {
                events.push(CollisionEvent {
                    agent: a.id,
                    other: Contact::Obstacle(k),
                    time: world.time,
                    penetration: depth,
                });
            }
        }
    }
}

/// Steps until every agent has arrived or `time_limit` is reached.
pub fn run<T: Real>(
    mut world: World,
    controller: &mut Controller<'_, T>,
    time_limit: f64,
) -> Result<Trace> {
    if !(time_limit > 0.0) {
        return Err(Error::InvalidParameter(
            "time limit must be positive".into(),
        ));
    }
    let max_steps = (time_limit / world.tau - 1e-9).ceil() as usize;
    let mut trace = Trace {
        snapshots: vec![world.agents.clone()],
        velocities: Vec::new(),
        arrivals: world
            .agents
            .iter()
            .map(|a| world.arrived(a).then_some(0.0))
            .collect(),
        collisions: Vec::new(),
        obstacles: world.obstacles.clone(),
        tau: world.tau,
        time_limit,
        info: world.info.clone(),
    };
    for _ in 0..max_steps {
        if trace.completed() {
            break;
        }
        let velocities = step(&mut world, controller)?;
        record_collisions(&world, &mut trace.collisions);
        for (arrival, agent) in trace.arrivals.iter_mut().zip(&world.agents) {
            if arrival.is_none() && world.arrived(agent) {
                *arrival = Some(world.time);
            }
        }
        trace.snapshots.push(world.agents.clone());
        trace.velocities.push(velocities);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::OrcaParams;

    type Orca = Controller<'static, f32>;

    fn agent(id: usize, p: Vec2, g: Vec2) -> AgentState {
        AgentState::new(id, p, g, OrcaParams::default())
    }

    #[test]
    fn lone_agent_reaches_goal_in_three_steps() {
        let mut world =
            World::new(vec![agent(0, Vec2::ZERO, Vec2::new(1.0, 0.0))], vec![], 0.1).unwrap();
        let mut c = Orca::Orca;
        for _ in 0..3 {
            step(&mut world, &mut c).unwrap();
        }
        assert!(world.agents[0].position.distance(Vec2::new(1.0, 0.0)) <= GOAL_TOLERANCE);
        let before = world.agents.clone();
        step(&mut world, &mut c).unwrap();
        assert_eq!(world.agents[0].position, before[0].position);
    }

    #[test]
    fn arrival_time_matches_kinematics() {
        let world = World::new(
            vec![agent(0, Vec2::ZERO, Vec2::new(10.0, 0.0))],
            vec![],
            0.1,
        )
        .unwrap();
        let trace = run(world, &mut Orca::Orca, 60.0).unwrap();
        assert!(trace.completed());
        let expected = ((10.0 / 3.5) / 0.1f64).ceil() * 0.1;
        assert!((trace.arrivals[0].unwrap() - expected).abs() <= 0.1 + 1e-9);
        assert_eq!(trace.snapshots.len(), trace.steps() + 1);
    }

    #[test]
    fn head_on_pair_keeps_protect_band() {
        let params = OrcaParams {
            protect_radius: 0.5,
            ..OrcaParams::default()
        };
        let a = AgentState::new(0, Vec2::new(-4.0, 0.0), Vec2::new(4.0, 0.0), params);
        let b = AgentState::new(1, Vec2::new(4.0, 0.0), Vec2::new(-4.0, 0.0), params);
        let trace = run(
            World::new(vec![a, b], vec![], 0.1).unwrap(),
            &mut Orca::Orca,
            30.0,
        )
        .unwrap();
        assert!(trace.completed());
        let min = trace
            .snapshots
            .iter()
            .map(|s| s[0].position.distance(s[1].position))
            .fold(f64::INFINITY, f64::min);
        assert!(min >= 0.4 + 0.3, "{min}");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = agent(3, Vec2::ZERO, Vec2::X);
        assert!(World::new(vec![a.clone(), a], vec![], 0.1).is_err());
        assert!(World::new(vec![], vec![], 0.0).is_err());
    }

    #[test]
    fn agent_order_does_not_matter() {
        let agents: Vec<AgentState> = (0..4)
            .map(|i| {
                let p = Vec2::from_angle(i as f64 * std::f64::consts::FRAC_PI_2) * 3.0;
                agent(i, p, -p)
            })
            .collect();
        let mut w1 = World::new(agents.clone(), vec![], 0.1).unwrap();
        let mut reversed = agents;
        reversed.reverse();
        let mut w2 = World::new(reversed, vec![], 0.1).unwrap();
        for _ in 0..20 {
            step(&mut w1, &mut Orca::Orca).unwrap();
            step(&mut w2, &mut Orca::Orca).unwrap();
        }
        for a in &w1.agents {
            let b = w2.agents.iter().find(|b| b.id == a.id).unwrap();
            assert_eq!(a.position, b.position);
        }
    }
}
