use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::Context;
use avoidnet_core::dataset::VelocityPartition;
use avoidnet_core::sim::{compute_metrics, Metrics, Scenario};
use rayon::prelude::*;
use serde::Serialize;

use super::{
    prepare_out, resolve_seed, sim_settings, usage, write_file, write_manifest, CliError,
    CmdResult, ControllerKind,
};
use crate::config::run_config;

run_config!("evaluate", EvaluateConfig, EvaluateArgs {
    /// Base seed; repetition r uses seed + r. Drawn at random and recorded
    /// when unset.
    seed: Option<u64> = None,
    /// Output directory.
    out: String = "out/evaluate".into(),
    /// Comma-separated scenario names.
    scenarios: String = "circle,swap,crossing,random,three-obstacles,one-obstacle,l-shape".into(),
    /// Agent count; 0 uses each scenario's default.
    agents: usize = 0,
    /// Runs per scenario; 0 picks 20 for the learned controller and 1 for orca.
    repetitions: usize = 0,
    /// orca or learned.
    controller: String = "orca".into(),
    /// Checkpoint written by train (learned controller only).
    checkpoint: String = String::new(),
    /// Simulated seconds before a run counts as incomplete.
    time_limit: f64 = 60.0,
    max_speed: f64 = 3.5,
    max_neighbors: usize = 10,
    neighbor_dist: f64 = 3.0,
    protect_radius: f64 = 0.5,
    radius: f64 = 0.2,
    time_horizon: f64 = 2.0,
    time_horizon_obs: f64 = 1.0,
    /// Range noise of the learned controller's lidar, m.
    noise_sigma: f64 = 0.03,
    samples_per_class: usize = 10,
    margin_horizon: f64 = 0.1,
    slowdown_steps: usize = 8,
    advected: bool = true,
});

#[derive(Serialize)]
struct ScenarioReport {
    scenario: String,
    controller: String,
    agents: usize,
    repetitions: usize,
    completed: usize,
    /// Mean over completed runs; null when none completed.
    mean_travel_time: Option<f64>,
    mean_distance: f64,
    min_safety_margin: Option<f64>,
    mean_safety_margin: Option<f64>,
    collision_runs: usize,
    max_penetration: f64,
    runs: Vec<Metrics>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn parse_scenarios(list: &str) -> Result<Vec<Scenario>, CliError> {
    let scenarios: Vec<Scenario> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| usage(format!("{e}"))))
        .collect::<Result<_, _>>()?;
    if scenarios.is_empty() {
        return Err(usage("`scenarios` must name at least one scenario"));
    }
    Ok(scenarios)
}

pub fn run(args: &EvaluateArgs) -> CmdResult {
    let mut cfg = args.resolve()?;
    let seed = resolve_seed(&mut cfg.seed);
    let scenarios = parse_scenarios(&cfg.scenarios)?;
    let settings = sim_settings!(cfg);
    settings.validate()?;
    let repetitions = match (cfg.repetitions, settings.controller) {
        (0, ControllerKind::Learned) => 20,
        (0, ControllerKind::Orca) => 1,
        (r, _) => r,
    };
    let out = prepare_out(&cfg.out)?;
    let model = settings.load_model()?;
    let partition = VelocityPartition::default();

    let mut table = String::from(
        "scenario,agents,repetitions,completed,mean_travel_time,mean_distance,min_safety_margin,mean_safety_margin,collision_runs,max_penetration\n",
    );
    for scenario in scenarios {
        let runs: Vec<Metrics> = (0..repetitions)
            .into_par_iter()
            .map(|r| {
                let trace = settings.run_one(
                    scenario,
                    cfg.agents,
                    seed.wrapping_add(r as u64),
                    model.as_ref(),
                    &partition,
                )?;
                Ok(compute_metrics(&trace))
            })
            .collect::<Result<_, CliError>>()?;
        let agents = runs.first().map_or(0, |m| m.arrival_times.len());
        let report = ScenarioReport {
            scenario: scenario.name().into(),
            controller: cfg.controller.clone(),
            agents,
            repetitions,
            completed: runs.iter().filter(|m| m.completed).count(),
            mean_travel_time: mean(
                runs.iter()
                    .filter(|m| m.completed)
                    .map(|m| m.total_travel_time),
            ),
            mean_distance: mean(runs.iter().map(|m| m.total_distance)).unwrap_or(0.0),
            min_safety_margin: finite(
                runs.iter()
                    .map(|m| m.safety_margin_min)
                    .fold(f64::INFINITY, f64::min),
            ),
            mean_safety_margin: mean(
                runs.iter()
                    .map(|m| m.safety_margin_avg)
                    .filter(|v| v.is_finite()),
            ),
            collision_runs: runs.iter().filter(|m| m.collision_count > 0).count(),
            max_penetration: runs.iter().map(|m| m.max_penetration).fold(0.0, f64::max),
            runs,
        };
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            table,
            "{},{},{},{},{},{},{},{},{},{}",
            report.scenario,
            report.agents,
            report.repetitions,
            report.completed,
            opt(report.mean_travel_time),
            report.mean_distance,
            opt(report.min_safety_margin),
            opt(report.mean_safety_margin),
            report.collision_runs,
            report.max_penetration
        )
        .unwrap();
        println!(
            "{}: {}/{} completed, mean travel time {}, max penetration {:.4} m",
            report.scenario,
            report.completed,
            report.repetitions,
            report
                .mean_travel_time
                .map_or("n/a".into(), |t| format!("{t:.2} s")),
            report.max_penetration
        );
        let json = serde_json::to_string_pretty(&report).context("serializing report")?;
        write_file(&out.join(format!("{}.json", report.scenario)), json)?;
    }
    write_file(&out.join("summary.csv"), table)?;
    let notes = BTreeMap::from([("effective_repetitions".to_string(), repetitions.to_string())]);
    write_manifest(&out, &cfg, &notes)?;
    Ok(())
}
