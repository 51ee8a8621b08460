//! Reference rankers used for comparison.

mod cascade_linucb;
mod toprank;

pub use cascade_linucb::{CascadeLinUcb, CascadeLinUcbConfig};
pub use toprank::{toprank_threshold, TopRank, TOPRANK_CONSTANT};

/// Indices of the `k` largest scores in decreasing order, ties by index.
pub(crate) fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let before = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k, before);
        idx.truncate(k);
    }
    idx.sort_unstable_by(before);
    idx
}
