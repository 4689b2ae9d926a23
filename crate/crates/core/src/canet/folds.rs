use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Deals the shuffled members of each class round-robin over `k` folds,
/// continuing the rotation across classes so fold sizes stay balanced.
/// Per-class counts across folds differ by at most one.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let groups: Vec<usize> = (0..labels.len()).collect();
    stratified_group_folds(labels, &groups, k, seed)
}

/// Like [`stratified_folds`], but indices sharing a group id always land in
/// the same fold. Groups are stratified by the label of their first member.
/// Used to keep augmented copies of a frame together.
pub fn stratified_group_folds(
    labels: &[usize],
    groups: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    if labels.len() != groups.len() {
        return Err(Error::ShapeMismatch {
            expected: labels.len(),
            got: groups.len(),
        });
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &g) in groups.iter().enumerate() {
        members.entry(g).or_default().push(i);
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&g, idx) in &members {
        by_class.entry(labels[idx[0]]).or_default().push(g);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for group_ids in by_class.values_mut() {
        group_ids.shuffle(&mut rng);
        for g in group_ids.iter() {
            folds[next % k].extend_from_slice(&members[g]);
            next += 1;
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}
