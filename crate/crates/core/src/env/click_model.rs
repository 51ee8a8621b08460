use std::collections::BTreeMap;

use crate::error::{invalid, Result};
use crate::ranker::Ranking;

/// Examination probabilities keyed by the *set* of items shown above a
/// position and the position itself. Missing entries fall back to `default`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExaminationTable {
    entries: BTreeMap<(Vec<usize>, usize), f64>,
    default: f64,
}

impl ExaminationTable {
    pub fn new(default: f64) -> Self {
        Self {
            entries: BTreeMap::new(),
            default,
        }
    }

    /// Sets `χ` for position `position` when exactly `prefix` is shown above it.
    pub fn insert(&mut self, prefix: &[usize], position: usize, value: f64) {
        let mut key = prefix.to_vec();
        key.sort_unstable();
        self.entries.insert((key, position), value);
    }

    pub fn lookup(&self, prefix: &[usize], position: usize) -> f64 {
        let mut key = prefix.to_vec();
        key.sort_unstable();
        self.entries
            .get(&(key, position))
            .copied()
            .unwrap_or(self.default)
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries
            .values()
            .copied()
            .chain(std::iter::once(self.default))
    }
}

/// How the examination probability `χ(A, k)` depends on the ranking.
#[derive(Debug, Clone, PartialEq)]
pub enum ClickModel {
    /// `χ(A, k) = Π_{j<k} (1 − α(A(j)))`.
    Cascade,
    /// `χ(A, k) = biases[k]`.
    PositionBased { biases: Vec<f64> },
    /// `χ(A, k) = 1`.
    DocumentBased,
    /// Explicit table over (prefix set, position).
    Tabular(ExaminationTable),
}

impl ClickModel {
    /// Position-based model with biases `(1, 1/2, …, 1/K)`.
    pub fn position_based_harmonic(k: usize) -> Self {
        ClickModel::PositionBased {
            biases: (1..=k).map(|i| 1.0 / i as f64).collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClickModel::Cascade => "cm",
            ClickModel::PositionBased { .. } => "pbm",
            ClickModel::DocumentBased => "dbm",
            ClickModel::Tabular(_) => "tabular",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        match self {
            ClickModel::PositionBased { biases } if !biases.iter().all(|&b| in_unit(b)) => {
                invalid("position biases must lie in [0, 1]")
            }
            ClickModel::Tabular(t) if !t.values().all(in_unit) => {
                invalid("examination table entries must lie in [0, 1]")
            }
            _ => Ok(()),
        }
    }
}

/// `χ(A, position)` for a 0-based position of `ranking`.
pub fn examination(
    model: &ClickModel,
    ranking: &Ranking,
    position: usize,
    alpha: impl Fn(usize) -> f64,
) -> Result<f64> {
    if position >= ranking.len() {
        return invalid(format!(
            "position {position} out of range for a ranking of length {}",
            ranking.len()
        ));
    }
    Ok(match model {
        ClickModel::Cascade => ranking.items()[..position]
            .iter()
            .map(|&i| 1.0 - alpha(i))
            .product(),
        ClickModel::PositionBased { biases } => match biases.get(position) {
            Some(&b) => b,
            None => return invalid(format!("no position bias for position {position}")),
        },
        ClickModel::DocumentBased => 1.0,
        ClickModel::Tabular(table) => table.lookup(&ranking.items()[..position], position),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking(n: usize) -> Ranking {
        Ranking::new((0..n).collect()).unwrap()
    }

    #[test]
    fn document_based_always_examines() {
        for p in 0..4 {
            assert_eq!(
                examination(&ClickModel::DocumentBased, &ranking(4), p, |_| 0.3).unwrap(),
                1.0
            );
        }
    }

    #[test]
    fn harmonic_position_bias() {
        let m = ClickModel::position_based_harmonic(5);
        let chi = examination(&m, &ranking(5), 2, |_| 0.0).unwrap();
        assert!((chi - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cascade_product_of_skips() {
        let chi = examination(&ClickModel::Cascade, &ranking(3), 2, |_| 0.5).unwrap();
        assert!((chi - 0.25).abs() < 1e-15);
    }

    #[test]
    fn position_out_of_range() {
        assert!(examination(&ClickModel::Cascade, &ranking(2), 2, |_| 0.5).is_err());
    }

    #[test]
    fn table_ignores_prefix_order() {
        let mut t = ExaminationTable::new(1.0);
        t.insert(&[2, 0], 2, 0.4);
        let m = ClickModel::Tabular(t);
        let a = Ranking::new(vec![0, 2, 1]).unwrap();
        let b = Ranking::new(vec![2, 0, 1]).unwrap();
        assert_eq!(examination(&m, &a, 2, |_| 0.0).unwrap(), 0.4);
        assert_eq!(examination(&m, &b, 2, |_| 0.0).unwrap(), 0.4);
        assert_eq!(examination(&m, &a, 1, |_| 0.0).unwrap(), 1.0);
    }

    #[test]
    fn validation() {
        assert!(ClickModel::PositionBased {
            biases: vec![1.0, 1.5]
        }
        .validate()
        .is_err());
        let mut t = ExaminationTable::new(0.5);
        t.insert(&[], 0, -0.1);
        assert!(ClickModel::Tabular(t).validate().is_err());
    }
}
