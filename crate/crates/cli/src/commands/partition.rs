use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use avoidnet_core::dataset::{kmeans, load_dataset, VelocityPartition};
use avoidnet_core::Vec2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{prepare_out, resolve_seed, usage, write_file, write_manifest, CmdResult};
use crate::config::run_config;

run_config!("partition", PartitionConfig, PartitionArgs {
    /// Seed for k-means++ seeding; drawn at random and recorded when unset.
    seed: Option<u64> = None,
    /// Output directory.
    out: String = "out/partition".into(),
    /// Dataset file written by gen-data.
    dataset: String = String::new(),
    /// Frames to cluster from the start of the file; 0 uses all.
    frames: usize = 0,
    /// Number of k-means clusters.
    k: usize = 61,
});

pub fn run(args: &PartitionArgs) -> CmdResult {
    let mut cfg = args.resolve()?;
    let seed = resolve_seed(&mut cfg.seed);
    if cfg.dataset.is_empty() {
        return Err(usage("`dataset` is required"));
    }
    let out = prepare_out(&cfg.out)?;
    let frames = load_dataset(Path::new(&cfg.dataset))
        .with_context(|| format!("reading {}", cfg.dataset))?;
    let used = if cfg.frames == 0 {
        frames.len()
    } else {
        cfg.frames.min(frames.len())
    };
    let increments: Vec<Vec2> = frames[..used].iter().map(|f| f.expert_velocity()).collect();

    let partition = VelocityPartition::default();
    let mut counts = vec![0usize; partition.class_count()];
    for dv in &increments {
        counts[partition.label(*dv)] += 1;
    }
    let mut table =
        String::from("class,inner,outer,angle_start,angle_end,centroid_x,centroid_y,count\n");
    for (class, count) in counts.iter().enumerate() {
        let (inner, outer, start, end) = partition.bounds(class);
        let c = partition.centroid(class);
        writeln!(
            table,
            "{class},{inner},{outer},{start},{end},{},{},{count}",
            c.x, c.y
        )
        .unwrap();
    }
    write_file(&out.join("partition.csv"), table)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let result = kmeans(&increments, cfg.k, &mut rng)?;
    let mut sizes = vec![0usize; cfg.k];
    for &a in &result.assignments {
        sizes[a] += 1;
    }
    let mut clusters = String::from("cluster,centroid_x,centroid_y,size\n");
    for (i, (c, size)) in result.centroids.iter().zip(&sizes).enumerate() {
        writeln!(clusters, "{i},{},{},{size}", c.x, c.y).unwrap();
    }
    write_file(&out.join("kmeans.csv"), clusters)?;

    let notes = BTreeMap::from([
        ("clustered_frames".to_string(), used.to_string()),
        (
            "kmeans_iterations".to_string(),
            result.iterations.to_string(),
        ),
    ]);
    write_manifest(&out, &cfg, &notes)?;
    println!(
        "clustered {used} increments into {} groups in {} iterations; {} classes occupied",
        cfg.k,
        result.iterations,
        counts.iter().filter(|&&c| c > 0).count()
    );
    Ok(())
}
