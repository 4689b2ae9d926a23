use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::Context;
use avoidnet_core::dataset::{
    augment, cleanse, save_dataset, AugmentConfig, Frame, GenerationConfig, VelocityPartition,
};
use avoidnet_core::sensing::CpdConfig;
use avoidnet_core::OrcaParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{prepare_out, resolve_seed, usage, write_manifest, CmdResult};
use crate::config::run_config;

run_config!("gen-data", GenDataConfig, GenDataArgs {
    /// Master seed; drawn at random and recorded when unset.
    seed: Option<u64> = None,
    /// Output directory.
    out: String = "out/gen-data".into(),
    /// Original frames kept after cleansing, before augmentation.
    frames: usize = 1000,
    /// Noisy copies per original frame.
    noise_copies: usize = 1,
    /// Range noise of the augmentation copies, m.
    augment_sigma: f64 = 0.03,
    /// Inflated radii swept by the expert, m.
    protect_radii: Vec<f64> = vec![0.2, 0.5],
    /// Time horizons swept by the expert, s.
    time_horizons: Vec<f64> = vec![0.5, 1.0, 2.0],
    min_neighbors: usize = 3,
    max_neighbors: usize = 10,
    /// Lower bound of the per-frame range noise, m.
    noise_min: f64 = 0.01,
    /// Upper bound of the per-frame range noise, m.
    noise_max: f64 = 0.05,
    max_speed: f64 = 3.5,
    radius: f64 = 0.2,
    neighbor_dist: f64 = 3.0,
    time_horizon_obs: f64 = 1.0,
    cpd_beta: f64 = 2.0,
    cpd_lambda: f64 = 3.0,
    cpd_outlier_weight: f64 = 0.1,
    cpd_max_iterations: usize = 50,
    cpd_tolerance: f64 = 1e-5,
});

impl GenDataConfig {
    pub fn generation(&self) -> GenerationConfig {
        GenerationConfig {
            base: OrcaParams {
                max_speed: self.max_speed,
                max_neighbors: self.max_neighbors,
                neighbor_dist: self.neighbor_dist,
                protect_radius: self
                    .protect_radii
                    .iter()
                    .copied()
                    .fold(self.radius, f64::max),
                radius: self.radius,
                time_horizon: self.time_horizons.first().copied().unwrap_or(1.0),
                time_horizon_obs: self.time_horizon_obs,
            },
            protect_radii: self.protect_radii.clone(),
            time_horizons: self.time_horizons.clone(),
            min_neighbors: self.min_neighbors,
            max_neighbors: self.max_neighbors,
            noise_min: self.noise_min,
            noise_max: self.noise_max,
            cpd: CpdConfig {
                beta: self.cpd_beta,
                lambda: self.cpd_lambda,
                outlier_weight: self.cpd_outlier_weight,
                max_iterations: self.cpd_max_iterations,
                tolerance: self.cpd_tolerance,
            },
            ..GenerationConfig::default()
        }
    }
}

/// Generates until `target` frames survive cleansing. Frame indices are
/// consumed in order, so the result depends only on the seed and target.
pub fn generate_cleansed(
    cfg: &GenerationConfig,
    partition: &VelocityPartition,
    seed: u64,
    target: usize,
) -> (Vec<Frame>, u64) {
    let mut kept = Vec::with_capacity(target);
    let mut next = 0u64;
    while kept.len() < target {
        let missing = (target - kept.len()) as u64;
        let chunk = missing + missing / 4 + 16;
        let batch = avoidnet_core::dataset::generate_frames(cfg, partition, seed, next, chunk);
        next += chunk;
        kept.extend(cleanse(batch).into_iter().map(|g| g.frame));
    }
    kept.truncate(target);
    (kept, next)
}

pub fn run(args: &GenDataArgs) -> CmdResult {
    let mut cfg = args.resolve()?;
    let seed = resolve_seed(&mut cfg.seed);
    if cfg.frames == 0 {
        return Err(usage("`frames` must be positive"));
    }
    if !(cfg.augment_sigma >= 0.0) {
        return Err(usage("`augment_sigma` must be non-negative"));
    }
    let generation = cfg.generation();
    generation.validate()?;
    let out = prepare_out(&cfg.out)?;

    let partition = VelocityPartition::default();
    let start = Instant::now();
    let (originals, drawn) = generate_cleansed(&generation, &partition, seed, cfg.frames);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let augment_cfg = AugmentConfig {
        noise_copies: cfg.noise_copies,
        sigma: cfg.augment_sigma,
        ..AugmentConfig::default()
    };
    let frames = augment(&originals, &partition, &augment_cfg, &mut rng);
    let path = out.join("dataset.bin");
    save_dataset(&path, &frames).with_context(|| format!("writing {}", path.display()))?;

    let notes = BTreeMap::from([
        ("drawn_frames".to_string(), drawn.to_string()),
        ("written_frames".to_string(), frames.len().to_string()),
        (
            "copies_per_frame".to_string(),
            (2 + cfg.noise_copies).to_string(),
        ),
    ]);
    write_manifest(&out, &cfg, &notes)?;
    println!(
        "kept {} of {} drawn frames, wrote {} to {} in {:.1} s",
        originals.len(),
        drawn,
        frames.len(),
        path.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
