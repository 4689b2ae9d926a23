use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use avoidnet_core::canet::{
    evaluate, frames_to_matrix, save_checkpoint, stratified_folds, stratified_group_folds,
    train_matrices, CaNet, Real, TrainConfig,
};
use avoidnet_core::dataset::{load_dataset, Frame, Standardizer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{prepare_out, resolve_seed, usage, write_file, write_manifest, CmdResult};
use crate::config::run_config;

run_config!("train", TrainRunConfig, TrainArgs {
    /// Seed for folds, initialization, shuffling and dropout; drawn at
    /// random and recorded when unset.
    seed: Option<u64> = None,
    /// Output directory.
    out: String = "out/train".into(),
    /// Dataset file written by gen-data.
    dataset: String = String::new(),
    /// Number of cross-validation folds.
    folds: usize = 10,
    /// Folds actually trained (each serves once as the test fold); 0 runs all.
    run_folds: usize = 0,
    /// Keep every stored copy of an original frame (mirror and noisy
    /// copies) in the same fold. Off splits frame by frame.
    group_copies: bool = false,
    /// Stored frames per original frame: original, mirror and noisy copies.
    copies_per_frame: usize = 3,
    learning_rate: f64 = 0.01,
    weight_decay: f64 = 2e-4,
    momentum: f64 = 0.9,
    batch_size: usize = 64,
    max_epochs: usize = 20,
    /// Epochs without validation-loss improvement before stopping.
    patience: usize = 5,
    /// Per-epoch learning-rate factor.
    lr_decay: f64 = 0.9,
    /// Arithmetic precision for training: f32 or f64.
    precision: String = "f32".into(),
});

#[derive(Serialize)]
struct FoldSummary {
    fold: usize,
    train_frames: usize,
    val_frames: usize,
    test_frames: usize,
    best_epoch: usize,
    epochs_run: usize,
    train_loss: f64,
    train_accuracy: f64,
    test_loss: f64,
    test_accuracy: f64,
    seconds: f64,
}

#[derive(Serialize)]
struct Summary {
    precision: String,
    folds: Vec<FoldSummary>,
    mean_train_accuracy: f64,
    mean_test_accuracy: f64,
    chance_accuracy: f64,
    total_seconds: f64,
}

fn select(frames: &[Frame], idx: &[usize]) -> Vec<Frame> {
    idx.iter().map(|&i| frames[i].clone()).collect()
}

/// Fold `k` is the test set and fold `k + 1` the early-stopping set; the
/// remaining folds train.
fn split(folds: &[Vec<usize>], k: usize) -> (Vec<usize>, &[usize], &[usize]) {
    let val = (k + 1) % folds.len();
    let train = folds
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k && i != val)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    (train, &folds[val], &folds[k])
}

fn cross_validate<T: Real>(
    cfg: &TrainRunConfig,
    seed: u64,
    frames: &[Frame],
    folds: &[Vec<usize>],
    out: &Path,
) -> Result<Summary, super::CliError> {
    let started = Instant::now();
    let runs = if cfg.run_folds == 0 {
        folds.len()
    } else {
        cfg.run_folds.min(folds.len())
    };
    let mut history_csv = String::from("fold,epoch,train_loss,train_acc,val_loss,val_acc\n");
    let mut summaries = Vec::with_capacity(runs);
    for k in 0..runs {
        let fold_start = Instant::now();
        let (train_idx, val_idx, test_idx) = split(folds, k);
        let train_frames = select(frames, &train_idx);
        let standardizer = Standardizer::fit(&train_frames)?;
        let (tx, ty) = frames_to_matrix::<T>(&train_frames, &standardizer)?;
        drop(train_frames);
        let (vx, vy) = frames_to_matrix::<T>(&select(frames, val_idx), &standardizer)?;
        let (sx, sy) = frames_to_matrix::<T>(&select(frames, test_idx), &standardizer)?;

        let fold_seed = seed.wrapping_add(k as u64);
        let mut init_rng = ChaCha8Rng::seed_from_u64(fold_seed);
        let mut model = CaNet::<T>::new(&mut init_rng).with_standardizer(standardizer)?;
        let train_cfg = TrainConfig {
            learning_rate: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            momentum: cfg.momentum,
            batch_size: cfg.batch_size,
            max_epochs: cfg.max_epochs,
            patience: cfg.patience,
            lr_decay: cfg.lr_decay,
            seed: fold_seed,
        };
        let history = train_matrices(
            &mut model,
            tx.view(),
            &ty,
            vx.view(),
            &vy,
            &train_cfg,
            |r| {
                eprintln!(
                    "fold {k} epoch {} train {:.4}/{:.4} val {:.4}/{:.4}",
                    r.epoch,
                    r.train_loss,
                    r.train_acc,
                    r.val_loss.unwrap_or(f64::NAN),
                    r.val_acc.unwrap_or(f64::NAN)
                );
            },
        )?;
        for r in &history.epochs {
            writeln!(
                history_csv,
                "{k},{},{},{},{},{}",
                r.epoch,
                r.train_loss,
                r.train_acc,
                r.val_loss.map(|v| v.to_string()).unwrap_or_default(),
                r.val_acc.map(|v| v.to_string()).unwrap_or_default()
            )
            .unwrap();
        }
        let (train_loss, train_accuracy) = evaluate(&model, tx.view(), &ty)?;
        let (test_loss, test_accuracy) = evaluate(&model, sx.view(), &sy)?;
        println!("fold {k}: train accuracy {train_accuracy:.4}, test accuracy {test_accuracy:.4}");
        if k == 0 {
            let path = out.join("model.ckpt");
            save_checkpoint(&path, &model, fold_seed)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        summaries.push(FoldSummary {
            fold: k,
            train_frames: ty.len(),
            val_frames: vy.len(),
            test_frames: sy.len(),
            best_epoch: history.best_epoch,
            epochs_run: history.epochs.len(),
            train_loss,
            train_accuracy,
            test_loss,
            test_accuracy,
            seconds: fold_start.elapsed().as_secs_f64(),
        });
    }
    write_file(&out.join("history.csv"), history_csv)?;
    let mean =
        |f: fn(&FoldSummary) -> f64| summaries.iter().map(f).sum::<f64>() / summaries.len() as f64;
    Ok(Summary {
        precision: T::NAME.to_string(),
        mean_train_accuracy: mean(|s| s.train_accuracy),
        mean_test_accuracy: mean(|s| s.test_accuracy),
        chance_accuracy: 1.0 / avoidnet_core::dataset::CLASS_COUNT as f64,
        folds: summaries,
        total_seconds: started.elapsed().as_secs_f64(),
    })
}

pub fn run(args: &TrainArgs) -> CmdResult {
    let mut cfg = args.resolve()?;
    let seed = resolve_seed(&mut cfg.seed);
    if cfg.dataset.is_empty() {
        return Err(usage("`dataset` is required"));
    }
    if cfg.folds < 3 {
        return Err(usage(
            "`folds` must be at least 3 (test, validation and training)",
        ));
    }
    if cfg.copies_per_frame == 0 {
        return Err(usage("`copies_per_frame` must be positive"));
    }
    if cfg.precision != "f32" && cfg.precision != "f64" {
        return Err(usage("`precision` must be f32 or f64"));
    }
    TrainConfig {
        learning_rate: cfg.learning_rate,
        weight_decay: cfg.weight_decay,
        momentum: cfg.momentum,
        batch_size: cfg.batch_size,
        max_epochs: cfg.max_epochs,
        patience: cfg.patience,
        lr_decay: cfg.lr_decay,
        seed,
    }
    .validate()?;
    let out = prepare_out(&cfg.out)?;
    let frames = load_dataset(Path::new(&cfg.dataset))
        .with_context(|| format!("reading {}", cfg.dataset))?;
    let labels: Vec<usize> = frames.iter().map(|f| f.label as usize).collect();
    let folds = if cfg.group_copies {
        if frames.len() % cfg.copies_per_frame != 0 {
            return Err(usage(format!(
                "{} frames is not a multiple of copies_per_frame = {}",
                frames.len(),
                cfg.copies_per_frame
            )));
        }
        let originals = frames.len() / cfg.copies_per_frame;
        let groups: Vec<usize> = (0..frames.len()).map(|i| i % originals).collect();
        stratified_group_folds(&labels, &groups, cfg.folds, seed)?
    } else {
        stratified_folds(&labels, cfg.folds, seed)?
    };
    let mut folds_csv = String::from("index,fold\n");
    let mut assignment = vec![0usize; frames.len()];
    for (k, fold) in folds.iter().enumerate() {
        for &i in fold {
            assignment[i] = k;
        }
    }
    for (i, k) in assignment.iter().enumerate() {
        writeln!(folds_csv, "{i},{k}").unwrap();
    }
    write_file(&out.join("folds.csv"), folds_csv)?;

    let summary = if cfg.precision == "f64" {
        cross_validate::<f64>(&cfg, seed, &frames, &folds, &out)?
    } else {
        cross_validate::<f32>(&cfg, seed, &frames, &folds, &out)?
    };
    write_file(
        &out.join("summary.json"),
        serde_json::to_string_pretty(&summary).context("serializing summary")?,
    )?;
    let notes = BTreeMap::from([
        ("frames".to_string(), frames.len().to_string()),
        (
            "mean_test_accuracy".to_string(),
            summary.mean_test_accuracy.to_string(),
        ),
        (
            "mean_train_accuracy".to_string(),
            summary.mean_train_accuracy.to_string(),
        ),
    ]);
    write_manifest(&out, &cfg, &notes)?;
    println!(
        "mean train accuracy {:.4}, mean test accuracy {:.4} over {} folds in {:.0} s",
        summary.mean_train_accuracy,
        summary.mean_test_accuracy,
        summary.folds.len(),
        summary.total_seconds
    );
    Ok(())
}
