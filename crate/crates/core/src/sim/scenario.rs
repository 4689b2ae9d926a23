use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{AgentState, Obstacle, OrcaParams, Vec2};
use crate::{Error, Result, CYCLE_PERIOD};

use super::World;

/// Penetration beyond which an L-shape run counts as a severe collision, m.
pub const L_SHAPE_SEVERE_PENETRATION: f64 = 0.05;

/// Obstacle look-ahead for ORCA agents in scenarios with static obstacles.
const OBSTACLE_HORIZON: f64 = 10.0;
/// Row half-distance for swap and crossing, m.
const ROW_OFFSET: f64 = 4.0;
const PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    Circle,
    Swap,
    Crossing,
    Random,
    ThreeObstacles,
    OneObstacle,
    LShape,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Circle,
        Scenario::Swap,
        Scenario::Crossing,
        Scenario::Random,
        Scenario::ThreeObstacles,
        Scenario::OneObstacle,
        Scenario::LShape,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Circle => "circle",
            Scenario::Swap => "swap",
            Scenario::Crossing => "crossing",
            Scenario::Random => "random",
            Scenario::ThreeObstacles => "three-obstacles",
            Scenario::OneObstacle => "one-obstacle",
            Scenario::LShape => "l-shape",
        }
    }

    /// Agent count used when the caller does not pick one.
    pub fn default_agents(self) -> usize {
        match self {
            Scenario::ThreeObstacles => 6,
            Scenario::Random => 8,
            _ => 4,
        }
    }

    pub fn has_obstacles(self) -> bool {
        matches!(
            self,
            Scenario::ThreeObstacles | Scenario::OneObstacle | Scenario::LShape
        )
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == key || sc.name().replace('-', "") == key)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Row spacing that keeps protect discs apart at the start.
fn spacing(params: &OrcaParams) -> f64 {
    2.0 * params.protect_radius.max(params.radius) + 0.3
}

fn centered(k: usize, count: usize, step: f64) -> f64 {
    (k as f64 - (count as f64 - 1.0) / 2.0) * step
}

fn l_polygon() -> Result<Obstacle> {
    Obstacle::new(vec![
        Vec2::new(-1.0, -1.0),
        Vec2::new(1.0, -1.0),
        Vec2::new(1.0, -0.5),
        Vec2::new(-0.5, -0.5),
        Vec2::new(-0.5, 1.0),
        Vec2::new(-1.0, 1.0),
    ])
}

/// Builds one of the evaluation worlds. `n` is ignored by the fixed-size
/// obstacle scenarios (six agents for three obstacles, four for one);
/// `seed` drives the random and L-shape placements.
pub fn build_scenario(
    scenario: Scenario,
    n: usize,
    seed: u64,
    params: &OrcaParams,
) -> Result<World> {
    params.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "scenario needs at least one agent".into(),
        ));
    }
    let mut params = *params;
    if scenario.has_obstacles() {
        params.time_horizon_obs = OBSTACLE_HORIZON;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sp = spacing(&params);
    let mut info: Vec<(&str, String)> = vec![
        ("scenario", scenario.name().into()),
        ("seed", seed.to_string()),
    ];
    let mut obstacles = Vec::new();
    let pairs: Vec<(Vec2, Vec2)> = match scenario {
        Scenario::Circle => {
            let radius = (n as f64 * 0.5 / PI).max(2.0);
            info.push(("circle_radius", radius.to_string()));
            (0..n)
                .map(|i| {
                    let p = Vec2::from_angle(2.0 * PI * i as f64 / n as f64) * radius;
                    (p, -p)
                })
                .collect()
        }
        Scenario::Swap => {
            let left = n.div_ceil(2);
            let right = n - left;
            info.push(("row_offset", ROW_OFFSET.to_string()));
            info.push(("row_spacing", sp.to_string()));
            let mut v: Vec<(Vec2, Vec2)> = (0..left)
                .map(|k| {
                    let y = centered(k, left, sp);
                    (Vec2::new(-ROW_OFFSET, y), Vec2::new(ROW_OFFSET, y))
                })
                .collect();
            v.extend((0..right).map(|k| {
                let y = centered(k, right, sp);
                (Vec2::new(ROW_OFFSET, y), Vec2::new(-ROW_OFFSET, y))
            }));
            v
        }
        Scenario::Crossing => {
            let first = n.div_ceil(2);
            info.push(("row_offset", ROW_OFFSET.to_string()));
            info.push(("row_spacing", sp.to_string()));
            let mut v: Vec<(Vec2, Vec2)> = (0..first)
                .map(|k| {
                    let y = k as f64 * sp;
                    (Vec2::new(-ROW_OFFSET, y), Vec2::new(ROW_OFFSET, y))
                })
                .collect();
            v.extend((0..n - first).map(|k| {
                let x = k as f64 * sp;
                (Vec2::new(x, -ROW_OFFSET), Vec2::new(x, ROW_OFFSET))
            }));
            v
        }
        Scenario::Random => {
            let half = (1.5 * (n as f64).sqrt()).max(3.0);
            info.push(("half_width", half.to_string()));
            let mut draw = |taken: &[Vec2]| -> Result<Vec2> {
                for _ in 0..PLACEMENT_ATTEMPTS {
                    let p = Vec2::new(rng.random_range(-half..half), rng.random_range(-half..half));
                    if taken.iter().all(|q| q.distance(p) >= sp) {
                        return Ok(p);
                    }
                }
                Err(Error::InsufficientData(
                    "could not place agents without overlap".into(),
                ))
            };
            let mut starts = Vec::with_capacity(n);
            let mut goals = Vec::with_capacity(n);
            for _ in 0..n {
                starts.push(draw(&starts)?);
            }
            for start in &starts {
                let mut goal = draw(&goals)?;
                let mut tries = 0;
                while goal.distance(*start) < 2.0 {
                    tries += 1;
                    if tries > PLACEMENT_ATTEMPTS {
                        return Err(Error::InsufficientData("could not place goals".into()));
                    }
                    goal = draw(&goals)?;
                }
                goals.push(goal);
            }
            starts.into_iter().zip(goals).collect()
        }
        Scenario::ThreeObstacles => {
            let half = 0.4;
            for x in [-2.5, 0.0, 2.5] {
                obstacles.push(Obstacle::rectangle(Vec2::new(x, 0.0), half, half)?);
            }
            info.push(("obstacle_half_size", half.to_string()));
            let mut v: Vec<(Vec2, Vec2)> = [-3.75, -1.25, 1.25]
                .iter()
                .map(|&x| (Vec2::new(x, ROW_OFFSET), Vec2::new(x, -ROW_OFFSET)))
                .collect();
            v.extend(
                [-1.25, 1.25, 3.75]
                    .iter()
                    .map(|&x| (Vec2::new(x, -ROW_OFFSET), Vec2::new(x, ROW_OFFSET))),
            );
            v
        }
        Scenario::OneObstacle => {
            let half = 0.5;
            let radius = 3.0;
            obstacles.push(Obstacle::rectangle(Vec2::ZERO, half, half)?);
            info.push(("obstacle_half_size", half.to_string()));
            info.push(("circle_radius", radius.to_string()));
            (0..4)
                .map(|i| {
                    let p = Vec2::from_angle(PI / 4.0 + PI / 2.0 * i as f64) * radius;
                    (p, -p)
                })
                .collect()
        }
        Scenario::LShape => {
            obstacles.push(l_polygon()?);
            let radius = 3.5;
            let slot = 2.0 * PI / n as f64;
            let rotation = rng.random_range(-PI..PI);
            info.push(("circle_radius", radius.to_string()));
            (0..n)
                .map(|i| {
                    let jitter = rng.random_range(-0.25..0.25) * slot;
                    let p = Vec2::from_angle(rotation + slot * i as f64 + jitter) * radius;
                    (p, -p)
                })
                .collect()
        }
    };
    let agents: Vec<AgentState> = pairs
        .into_iter()
        .enumerate()
        .map(|(id, (p, g))| AgentState::new(id, p, g, params))
        .collect();
    let mut world = World::new(agents, obstacles, CYCLE_PERIOD)?;
    info.push(("agents", world.agents.len().to_string()));
    info.push(("protect_radius", params.protect_radius.to_string()));
    info.push(("time_horizon", params.time_horizon.to_string()));
    info.push(("time_horizon_obs", params.time_horizon_obs.to_string()));
    world.info = info.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    if !world.is_clear() {
        return Err(Error::InvalidParameter(format!(
            "{scenario} with {n} agents starts with overlapping bodies"
        )));
    }
    Ok(world)
}
