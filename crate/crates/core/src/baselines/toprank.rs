use rand::{Rng, RngCore};

use crate::error::{invalid, Result};
use crate::ranker::{ClickVector, Ranker, Ranking};

/// `4√(2/π) / erf(√2)`.
pub const TOPRANK_CONSTANT: f64 = 3.343_676_401_881_077;

/// Smallest click difference `S` that separates a pair after `n` informative
/// rounds: `√(2n ln(c√n/δ))`.
pub fn toprank_threshold(n: u32, delta: f64) -> f64 {
    let n = f64::from(n);
    (2.0 * n * (TOPRANK_CONSTANT * n.sqrt() / delta).ln()).sqrt()
}

/// Feature-free pairwise elimination ranker.
///
/// Items are partitioned into blocks by the partial order learned so far.
/// Each round the blocks are shown in order, shuffled internally, and every
/// (clicked, unclicked) pair within a block updates its statistics.
#[derive(Debug, Clone)]
pub struct TopRank {
    n_items: usize,
    k: usize,
    delta: f64,
    /// `S[i·L + j]`: clicks on `i` minus clicks on `j` in rounds where they
    /// shared a block and exactly one was clicked.
    diff: Vec<i32>,
    /// `N[i·L + j]`: number of such rounds.
    count: Vec<u32>,
    /// `better[i·L + j]`: `i` has been proven more attractive than `j`.
    better: Vec<bool>,
    /// Items proven less attractive than each item.
    worse: Vec<Vec<usize>>,
    edges: usize,
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
    thresholds: Vec<f64>,
    clicked: Vec<bool>,
    stale: bool,
}

impl TopRank {
    pub fn new(n_items: usize, k: usize, delta: f64) -> Result<Self> {
        if k == 0 || k > n_items {
            return invalid(format!("need 1 <= K <= L, got K = {k}, L = {n_items}"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return invalid(format!("delta must lie in (0, 1), got {delta}"));
        }
        let cells = n_items
            .checked_mul(n_items)
            .filter(|&c| c <= 1 << 28)
            .ok_or_else(|| {
                crate::Error::TooLarge(format!(
                    "{n_items} items is too many for pairwise statistics"
                ))
            })?;
        Ok(Self {
            n_items,
            k,
            delta,
            diff: vec![0; cells],
            count: vec![0; cells],
            better: vec![false; cells],
            worse: vec![Vec::new(); n_items],
            edges: 0,
            blocks: vec![(0..n_items).collect()],
            block_of: vec![0; n_items],
            thresholds: vec![0.0],
            clicked: vec![false; n_items],
            stale: false,
        })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, item: usize) -> usize {
        self.block_of[item]
    }

    /// Whether `i` has been proven more attractive than `j`.
    pub fn prefers(&self, i: usize, j: usize) -> bool {
        self.better[i * self.n_items + j]
    }

    pub fn statistic(&self, i: usize, j: usize) -> (i32, u32) {
        let c = i * self.n_items + j;
        (self.diff[c], self.count[c])
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    fn threshold(&mut self, n: u32) -> f64 {
        let n = n as usize;
        while self.thresholds.len() <= n {
            let m = self.thresholds.len() as u32;
            self.thresholds.push(toprank_threshold(m, self.delta));
        }
        self.thresholds[n]
    }

    /// Layers the items by the proven relation: each block holds the items
    /// with no proven better item among those not yet placed.
    fn rebuild_blocks(&mut self) {
        let l = self.n_items;
        let mut indegree = vec![0usize; l];
        for out in &self.worse {
            for &j in out {
                indegree[j] += 1;
            }
        }
        let mut layer: Vec<usize> = (0..l).filter(|&i| indegree[i] == 0).collect();
        let mut blocks = Vec::new();
        let mut placed = 0;
        while !layer.is_empty() {
            let mut next = Vec::new();
            for &i in &layer {
                for &j in &self.worse[i] {
                    indegree[j] -= 1;
                    if indegree[j] == 0 {
                        next.push(j);
                    }
                }
            }
            placed += layer.len();
            next.sort_unstable();
            blocks.push(std::mem::replace(&mut layer, next));
        }
        debug_assert_eq!(placed, l, "proven relation has a cycle");
        for (b, block) in blocks.iter().enumerate() {
            for &i in block {
                self.block_of[i] = b;
            }
        }
        self.blocks = blocks;
        self.stale = false;
    }
}

impl Ranker for TopRank {
    fn label(&self) -> &str {
        "toprank"
    }

    fn rank(&mut self, rng: &mut dyn RngCore) -> Result<Ranking> {
        if self.stale {
            self.rebuild_blocks();
        }
        let mut out = Vec::with_capacity(self.k);
        for block in self.blocks.iter_mut() {
            let take = (self.k - out.len()).min(block.len());
            for i in 0..take {
                let j = rng.random_range(i..block.len());
                block.swap(i, j);
            }
            out.extend_from_slice(&block[..take]);
            if out.len() == self.k {
                break;
            }
        }
        Ranking::new(out)
    }

    fn observe(&mut self, ranking: &Ranking, clicks: &ClickVector) -> Result<()> {
        if ranking.len() != self.k || clicks.len() != self.k {
            return invalid("feedback does not match the number of positions");
        }
        if clicks.count() == 0 {
            return Ok(());
        }
        let l = self.n_items;
        for p in 0..self.k {
            self.clicked[ranking.item(p)] = clicks.clicked(p);
        }
        for p in 0..self.k {
            if !clicks.clicked(p) {
                continue;
            }
            let i = ranking.item(p);
            let b = self.block_of[i];
            for idx in 0..self.blocks[b].len() {
                let j = self.blocks[b][idx];
                if self.clicked[j] {
                    continue;
                }
                let (ij, ji) = (i * l + j, j * l + i);
                self.diff[ij] += 1;
                self.diff[ji] -= 1;
                self.count[ij] += 1;
                self.count[ji] += 1;
                if !self.better[ij] && f64::from(self.diff[ij]) >= self.threshold(self.count[ij]) {
                    self.better[ij] = true;
                    self.worse[i].push(j);
                    self.edges += 1;
                    self.stale = true;
                }
            }
        }
        for p in 0..self.k {
            self.clicked[ranking.item(p)] = false;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_matches_erf() {
        // erf(√2) from its Maclaurin series.
        let x = 2f64.sqrt();
        let mut term = x;
        let mut sum = x;
        for n in 1..60 {
            term *= -x * x / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        let erf = 2.0 / std::f64::consts::PI.sqrt() * sum;
        let c = 4.0 * (2.0 / std::f64::consts::PI).sqrt() / erf;
        assert!((c - TOPRANK_CONSTANT).abs() < 1e-12);
    }

    #[test]
    fn always_clicked_item_is_promoted() {
        let delta = 0.1;
        let mut tr = TopRank::new(2, 1, delta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Item 0 is always clicked when shown, item 1 never. Each informative
        // round raises S₀₁ and N₀₁ by one, so the edge appears at the first n
        // with n ≥ √(2n ln(c√n/δ)).
        let first = (1..)
            .find(|&n| f64::from(n) >= toprank_threshold(n, delta))
            .unwrap();
        let mut informative = 0;
        while tr.edge_count() == 0 {
            let r = tr.rank(&mut rng).unwrap();
            let c = ClickVector(vec![r.item(0) == 0]);
            informative += u32::from(r.item(0) == 0);
            tr.observe(&r, &c).unwrap();
            assert_eq!(tr.statistic(0, 1), (informative as i32, informative));
        }
        assert_eq!(informative, first);
        assert!(tr.prefers(0, 1));
        for _ in 0..20 {
            assert_eq!(tr.rank(&mut rng).unwrap().items(), &[0]);
        }
        assert_eq!(tr.blocks(), &[vec![0], vec![1]]);
    }

    #[test]
    fn identical_items_never_split() {
        let mut tr = TopRank::new(4, 2, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut firsts = [0usize; 4];
        for _ in 0..20_000 {
            let r = tr.rank(&mut rng).unwrap();
            firsts[r.item(0)] += 1;
            // Both shown items are clicked or neither is: no pair ever differs.
            let both = rng.random_bool(0.5);
            tr.observe(&r, &ClickVector(vec![both, both])).unwrap();
        }
        assert_eq!(tr.blocks().len(), 1);
        for f in firsts {
            assert!((4_000..6_000).contains(&f), "{firsts:?}");
        }
    }

    #[test]
    fn block_order_respects_evidence() {
        let mut tr = TopRank::new(6, 3, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let alpha = [0.9, 0.7, 0.5, 0.3, 0.1, 0.05];
        for _ in 0..20_000 {
            let r = tr.rank(&mut rng).unwrap();
            let c = r
                .items()
                .iter()
                .map(|&i| rng.random_bool(alpha[i]))
                .collect();
            tr.observe(&r, &ClickVector(c)).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    if tr.prefers(i, j) && !tr.stale {
                        assert!(tr.block_of(i) < tr.block_of(j));
                    }
                }
            }
        }
        tr.rebuild_blocks();
        for i in 0..6 {
            for j in 0..6 {
                if tr.prefers(i, j) {
                    assert!(tr.block_of(i) < tr.block_of(j));
                }
            }
        }
        assert!(tr.edge_count() > 0);
    }
}
