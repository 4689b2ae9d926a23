use std::collections::BTreeMap;

use avoidnet_core::dataset::VelocityPartition;
use avoidnet_core::sim::{compute_metrics, Scenario};

use super::{
    prepare_out, resolve_seed, sim_settings, usage, write_file, write_manifest, CmdResult,
};
use crate::config::run_config;

run_config!("simulate", SimulateConfig, SimulateArgs {
    /// World seed (random placements and sensor noise); drawn at random and
    /// recorded when unset.
    seed: Option<u64> = None,
    /// Output directory.
    out: String = "out/simulate".into(),
    /// circle, swap, crossing, random, three-obstacles, one-obstacle or l-shape.
    scenario: String = "circle".into(),
    /// Agent count; 0 uses the scenario default.
    agents: usize = 0,
    /// orca or learned.
    controller: String = "orca".into(),
    /// Checkpoint written by train (learned controller only).
    checkpoint: String = String::new(),
    /// Simulated seconds before giving up.
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
    /// Candidate velocities sampled in the chosen class.
    samples_per_class: usize = 10,
    /// Look-ahead of the clearance check, s.
    margin_horizon: f64 = 0.1,
    /// Speed reductions tried when no candidate is clear.
    slowdown_steps: usize = 8,
    /// Move scan points with their estimated flow during the clearance check.
    advected: bool = true,
});

pub fn run(args: &SimulateArgs) -> CmdResult {
    let mut cfg = args.resolve()?;
    let seed = resolve_seed(&mut cfg.seed);
    let scenario: Scenario = cfg.scenario.parse().map_err(|e| usage(format!("{e}")))?;
    let settings = sim_settings!(cfg);
    settings.validate()?;
    let out = prepare_out(&cfg.out)?;
    let model = settings.load_model()?;
    let partition = VelocityPartition::default();

    let trace = settings.run_one(scenario, cfg.agents, seed, model.as_ref(), &partition)?;
    let metrics = compute_metrics(&trace);
    write_file(&out.join("trace.csv"), trace.to_csv())?;
    write_file(&out.join("metrics.json"), metrics.to_json())?;
    let notes = BTreeMap::from([
        ("steps".to_string(), trace.steps().to_string()),
        ("completed".to_string(), metrics.completed.to_string()),
    ]);
    write_manifest(&out, &cfg, &notes)?;
    println!(
        "{scenario}: completed {} in {} steps, min margin {:.3} m, max penetration {:.4} m",
        metrics.completed,
        trace.steps(),
        metrics.safety_margin_min,
        metrics.max_penetration
    );
    Ok(())
}
