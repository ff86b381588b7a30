//! Trigger-overlap pruning of duplicate event types within one tree.
//!
//! Two event types overlap by the share of their distinct triggers that
//! match exactly (after trimming), relative to the smaller trigger set.
//! Pairs are visited in pre-order; when a pair's ratio is strictly above the
//! threshold and both are still alive, the later event is removed along
//! with its samples and its children move up to its parent.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::ontology::NodeId;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PruneError {
    #[error("overlap ratio needs two non-empty trigger lists")]
    EmptyTriggers,
    #[error("event type {0:?} has no samples")]
    NoSamples(String),
    #[error("threshold {0} is outside [0, 1]")]
    Threshold(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRecord {
    pub event_a: String,
    pub event_b: String,
    pub ratio: f64,
    pub matched_triggers: Vec<String>,
}

fn distinct<S: AsRef<str>>(triggers: &[S]) -> BTreeSet<&str> {
    triggers.iter().map(|t| t.as_ref().trim()).collect()
}

fn overlap<'a>(a: &BTreeSet<&'a str>, b: &BTreeSet<&'a str>) -> (f64, Vec<&'a str>) {
    let matched: Vec<&str> = a.intersection(b).copied().collect();
    let denom = a.len().min(b.len());
    (matched.len() as f64 / denom as f64, matched)
}

/// `|A ∩ B| / min(|A|, |B|)` over the distinct trimmed triggers.
pub fn overlap_ratio<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> Result<f64, PruneError> {
    let a = distinct(a);
    let b = distinct(b);
    if a.is_empty() || b.is_empty() {
        return Err(PruneError::EmptyTriggers);
    }
    let matched = a.intersection(&b).count();
    Ok(matched as f64 / a.len().min(b.len()) as f64)
}

fn check_threshold(threshold: f64) -> Result<(), PruneError> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(PruneError::Threshold(alloc::format!("{threshold}")))
    }
}

/// Events of the tree rooted at `root` that pruning removes, with the pair
/// records that caused each removal.
pub fn removals(
    dataset: &Dataset,
    root: NodeId,
    threshold: f64,
) -> Result<(BTreeSet<NodeId>, Vec<OverlapRecord>), PruneError> {
    check_threshold(threshold)?;
    let o = dataset.ontology();
    let ids: Vec<NodeId> = o.tree(root).ids().collect();
    let triggers: Vec<BTreeSet<&str>> = ids
        .iter()
        .map(|&id| {
            let set: BTreeSet<&str> = dataset.samples(id).iter().map(|s| s.trigger().trim()).collect();
            if set.is_empty() {
                Err(PruneError::NoSamples(o.node(id).name().to_string()))
            } else {
                Ok(set)
            }
        })
        .collect::<Result<_, _>>()?;

    let mut alive = alloc::vec![true; ids.len()];
    let mut removed = BTreeSet::new();
    let mut records = Vec::new();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            if !(alive[i] && alive[j]) {
                continue;
            }
            let (ratio, matched) = overlap(&triggers[i], &triggers[j]);
            if ratio > threshold {
                alive[j] = false;
                removed.insert(ids[j]);
                records.push(OverlapRecord {
                    event_a: o.node(ids[i]).name().to_string(),
                    event_b: o.node(ids[j]).name().to_string(),
                    ratio,
                    matched_triggers: matched.into_iter().map(str::to_string).collect(),
                });
            }
        }
    }
    Ok((removed, records))
}

/// Prunes one tree; other trees are left untouched.
pub fn prune_tree(
    dataset: &Dataset,
    root: NodeId,
    threshold: f64,
) -> Result<(Dataset, Vec<OverlapRecord>), PruneError> {
    let (removed, records) = removals(dataset, root, threshold)?;
    let ontology = dataset.ontology().without_nodes(&removed);
    Ok((dataset.with_ontology(ontology), records))
}

/// Prunes every tree of the dataset. Records are in tree order.
pub fn prune(dataset: &Dataset, threshold: f64) -> Result<(Dataset, Vec<OverlapRecord>), PruneError> {
    let mut removed = BTreeSet::new();
    let mut records = Vec::new();
    for &root in dataset.ontology().roots() {
        let (r, rec) = removals(dataset, root, threshold)?;
        removed.extend(r);
        records.extend(rec);
    }
    let ontology = dataset.ontology().without_nodes(&removed);
    Ok((dataset.with_ontology(ontology), records))
}
