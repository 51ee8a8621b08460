//! Exhaustive checks of the three examination assumptions on tiny instances:
//!
//! 1. `χ(A, k)` depends only on the set of items above position `k`;
//! 2. `χ(A, k)` is non-increasing in `k`;
//! 3. `χ(A, k) ≥ χ(A*, k)` for every ranking `A`.

use std::collections::HashMap;

use super::{attractiveness, examination, ClickModel, ItemSet, Theta};
use crate::error::{invalid, Error, Result};
use crate::ranker::Ranking;

pub const AUDIT_MAX_ITEMS: usize = 6;
pub const AUDIT_MAX_POSITIONS: usize = 4;

const TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Which assumption failed (1, 2 or 3).
    pub assumption: u8,
    pub ranking: Vec<usize>,
    /// 0-based position at which the check failed.
    pub position: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub rankings_checked: usize,
    pub violation: Option<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

fn all_rankings(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn extend(n: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for i in 0..n {
            if !prefix.contains(&i) {
                prefix.push(i);
                extend(n, k, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Enumerates every ranking of `k` out of the given items and checks the
/// assumptions, reporting the first counterexample found.
pub fn assumption_audit(
    model: &ClickModel,
    items: &ItemSet,
    theta: &Theta,
    k: usize,
) -> Result<AuditReport> {
    let n = items.len();
    if n > AUDIT_MAX_ITEMS || k > AUDIT_MAX_POSITIONS {
        return Err(Error::TooLarge(format!(
            "audit enumerates all rankings and is limited to {AUDIT_MAX_ITEMS} items and \
             {AUDIT_MAX_POSITIONS} positions (got {n} items, {k} positions)"
        )));
    }
    if k == 0 || k > n {
        return invalid(format!("need 1 <= K <= L, got K = {k}, L = {n}"));
    }
    model.validate()?;
    let alpha: Vec<f64> = items
        .iter()
        .map(|a| attractiveness(a, theta))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| alpha[b].total_cmp(&alpha[a]));
    let best = Ranking::new(order[..k].to_vec())?;
    let chi = |r: &Ranking, p: usize| examination(model, r, p, |i| alpha[i]);
    let best_chi: Vec<f64> = (0..k).map(|p| chi(&best, p)).collect::<Result<_>>()?;

    let rankings = all_rankings(n, k);
    let mut by_prefix: HashMap<(Vec<usize>, usize), (f64, Vec<usize>)> = HashMap::new();
    let fail = |assumption, ranking: &[usize], position, detail: String| {
        Ok(AuditReport {
            rankings_checked: rankings.len(),
            violation: Some(Violation {
                assumption,
                ranking: ranking.to_vec(),
                position,
                detail,
            }),
        })
    };
    for items in &rankings {
        let r = Ranking::new(items.clone())?;
        let values: Vec<f64> = (0..k).map(|p| chi(&r, p)).collect::<Result<_>>()?;
        for p in 0..k {
            let mut key = items[..p].to_vec();
            key.sort_unstable();
            match by_prefix.get(&(key.clone(), p)) {
                Some((seen, other)) if (seen - values[p]).abs() > TOLERANCE => {
                    return fail(
                        1,
                        items,
                        p,
                        format!(
                            "χ = {} but ranking {other:?} with the same prefix set has χ = {seen}",
                            values[p]
                        ),
                    );
                }
                Some(_) => {}
                None => {
                    by_prefix.insert((key, p), (values[p], items.clone()));
                }
            }
            if p + 1 < k && values[p + 1] > values[p] + TOLERANCE {
                return fail(
                    2,
                    items,
                    p + 1,
                    format!("χ increases from {} to {}", values[p], values[p + 1]),
                );
            }
            if values[p] + TOLERANCE < best_chi[p] {
                return fail(
                    3,
                    items,
                    p,
                    format!("χ = {} is below χ(A*) = {}", values[p], best_chi[p]),
                );
            }
        }
    }
    Ok(AuditReport {
        rankings_checked: rankings.len(),
        violation: None,
    })
}
