use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::Context;
use avoidnet_core::dataset::VelocityPartition;
use avoidnet_core::sim::{compute_metrics, Scenario, L_SHAPE_SEVERE_PENETRATION};
use rayon::prelude::*;
use serde::Serialize;

use super::{
    prepare_out, resolve_seed, sim_settings, usage, write_file, write_manifest, CliError, CmdResult,
};
use crate::config::run_config;

run_config!("stress", StressConfig, StressArgs {
    /// Base seed; initialization i uses seed + i. Drawn at random and
    /// recorded when unset.
    seed: Option<u64> = None,
    /// Output directory.
    out: String = "out/stress".into(),
    /// Random L-shape initializations.
    inits: usize = 100,
    /// Agent count; 0 uses the scenario default.
    agents: usize = 0,
    /// orca or learned.
    controller: String = "learned".into(),
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
struct Outcome {
    init: usize,
    seed: u64,
    completed: bool,
    max_penetration: f64,
    travel_time: f64,
    failed: bool,
}

#[derive(Serialize)]
struct StressReport {
    controller: String,
    inits: usize,
    failures: usize,
    severe_collisions: usize,
    incomplete: usize,
    severe_penetration: f64,
    outcomes: Vec<Outcome>,
}

pub fn run(args: &StressArgs) -> CmdResult {
    let mut cfg = args.resolve()?;
    let seed = resolve_seed(&mut cfg.seed);
    if cfg.inits == 0 {
        return Err(usage("`inits` must be positive"));
    }
    let settings = sim_settings!(cfg);
    settings.validate()?;
    let out = prepare_out(&cfg.out)?;
    let model = settings.load_model()?;
    let partition = VelocityPartition::default();

    let outcomes: Vec<Outcome> = (0..cfg.inits)
        .into_par_iter()
        .map(|init| {
            let run_seed = seed.wrapping_add(init as u64);
            let trace = settings.run_one(
                Scenario::LShape,
                cfg.agents,
                run_seed,
                model.as_ref(),
                &partition,
            )?;
            let m = compute_metrics(&trace);
            Ok(Outcome {
                init,
                seed: run_seed,
                completed: m.completed,
                max_penetration: m.max_penetration,
                travel_time: m.total_travel_time,
                failed: !m.completed || m.max_penetration > L_SHAPE_SEVERE_PENETRATION,
            })
        })
        .collect::<Result<_, CliError>>()?;

    let mut table = String::from("init,seed,completed,max_penetration,travel_time,failed\n");
    for o in &outcomes {
        writeln!(
            table,
            "{},{},{},{},{},{}",
            o.init, o.seed, o.completed, o.max_penetration, o.travel_time, o.failed
        )
        .unwrap();
    }
    write_file(&out.join("stress.csv"), table)?;
    let report = StressReport {
        controller: cfg.controller.clone(),
        inits: cfg.inits,
        failures: outcomes.iter().filter(|o| o.failed).count(),
        severe_collisions: outcomes
            .iter()
            .filter(|o| o.max_penetration > L_SHAPE_SEVERE_PENETRATION)
            .count(),
        incomplete: outcomes.iter().filter(|o| !o.completed).count(),
        severe_penetration: L_SHAPE_SEVERE_PENETRATION,
        outcomes,
    };
    write_file(
        &out.join("stress.json"),
        serde_json::to_string_pretty(&report).context("serializing report")?,
    )?;
    let notes = BTreeMap::from([("failures".to_string(), report.failures.to_string())]);
    write_manifest(&out, &cfg, &notes)?;
    println!(
        "{} of {} initializations failed ({} severe collisions, {} incomplete)",
        report.failures, report.inits, report.severe_collisions, report.incomplete
    );
    Ok(())
}
