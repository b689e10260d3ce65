//! Candidate selection and post-ranking.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use super::types::{RankedEntry, RankedKnowledge, ResourceType, Stage, WeightTable};
use super::KnowledgeError;

/// Higher score first, then smaller id.
fn better(score_a: f64, id_a: &str, score_b: f64, id_b: &str) -> Ordering {
    score_b
        .partial_cmp(&score_a)
        .unwrap_or(Ordering::Equal)
        .then_with(|| id_a.cmp(id_b))
}

/// Heap slot ordered so the *worst* kept candidate sits on top.
struct Kept(RankedEntry);

impl PartialEq for Kept {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Kept {}
impl PartialOrd for Kept {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Kept {
    fn cmp(&self, other: &Self) -> Ordering {
        better(
            self.0.cosine_score,
            &self.0.item_id,
            other.0.cosine_score,
            &other.0.item_id,
        )
    }
}

/// Keeps the `per_type_k` best candidates (by cosine, ties by id) of every
/// resource type present. Output is grouped by resource type.
pub fn top_per_type(
    candidates: impl IntoIterator<Item = RankedEntry>,
    per_type_k: usize,
) -> Vec<RankedEntry> {
    let mut heaps: BTreeMap<ResourceType, BinaryHeap<Kept>> = BTreeMap::new();
    for candidate in candidates {
        let heap = heaps.entry(candidate.resource_type).or_default();
        if heap.len() < per_type_k {
            heap.push(Kept(candidate));
        } else if let Some(worst) = heap.peek() {
            let incoming = Kept(candidate);
            if incoming < *worst {
                heap.pop();
                heap.push(incoming);
            }
        }
    }
    heaps
        .into_values()
        .flat_map(|heap| heap.into_sorted_vec().into_iter().map(|k| k.0))
        .collect()
}

/// Re-scores candidates with `cosine * weight(stage, resource_type)` and keeps
/// the `final_k` best, ties by ascending item id.
pub fn post_rank(
    candidates: Vec<RankedEntry>,
    stage: Stage,
    final_k: usize,
    weights: &WeightTable,
) -> Result<RankedKnowledge, KnowledgeError> {
    let mut entries = candidates
        .into_iter()
        .map(|mut c| {
            c.final_score = c.cosine_score * weights.weight(stage, c.resource_type)?;
            Ok(c)
        })
        .collect::<Result<Vec<_>, KnowledgeError>>()?;
    entries.sort_by(|a, b| better(a.final_score, &a.item_id, b.final_score, &b.item_id));
    entries.truncate(final_k);
    Ok(RankedKnowledge { entries })
}
