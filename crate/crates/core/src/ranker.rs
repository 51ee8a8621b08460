use rand::RngCore;

use crate::error::{invalid, Result};

/// An injective map from positions `0..K` to item indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ranking(Vec<usize>);

impl Ranking {
    pub fn new(items: Vec<usize>) -> Result<Self> {
        let mut seen = items.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return invalid(format!("ranking repeats an item: {items:?}"));
        }
        Ok(Self(items))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn item(&self, position: usize) -> usize {
        self.0[position]
    }

    pub fn items(&self) -> &[usize] {
        &self.0
    }

    /// Checks that every item is below `n_items`.
    pub fn check_bounds(&self, n_items: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i >= n_items) {
            Some(i) => invalid(format!("item {i} out of range for {n_items} items")),
            None => Ok(()),
        }
    }
}

/// Binary click feedback, one entry per displayed position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickVector(pub Vec<bool>);

impl ClickVector {
    pub fn clicked(&self, position: usize) -> bool {
        self.0[position]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first_click(&self) -> Option<usize> {
        self.0.iter().position(|&c| c)
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&c| c).count()
    }
}

/// An online ranking policy: proposes a ranking, then learns from its clicks.
pub trait Ranker {
    fn label(&self) -> &str;

    fn rank(&mut self, rng: &mut dyn RngCore) -> Result<Ranking>;

    /// Feedback for the ranking most recently returned by [`Ranker::rank`].
    fn observe(&mut self, ranking: &Ranking, clicks: &ClickVector) -> Result<()>;
}
