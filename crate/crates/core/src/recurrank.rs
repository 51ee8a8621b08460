//! The recursive ranker.
//!
//! Display positions `0..K` are partitioned into contiguous intervals, each
//! owned by a live [`Instance`]. An instance explores its items at the head
//! of its interval according to an exploration design, fills the remaining
//! slots with its current best guesses, and once its schedule is exhausted
//! estimates attractiveness from head-position clicks only. It then splits
//! its items wherever consecutive estimated gaps reach `2Δ_ℓ`, hands each
//! block that still has a position to a child instance at phase `ℓ + 1`, and
//! drops the rest.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::RngCore;

use crate::design::{
    allocation, g_optimal_design, phase_precision, spanner_design, AllocationTable, Design,
    DEFAULT_EPSILON,
};
use crate::env::{Environment, ItemSet, Theta};
use crate::error::{invalid, Error, Result};
use crate::harness::{simulate, RegretTrace, Streams};
use crate::linalg::{dot, GramAccumulator};
use crate::ranker::{ClickVector, Ranker, Ranking};

/// How an instance builds its exploration distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignMethod {
    GOptimal,
    VolumetricSpanner,
}

#[derive(Debug, Clone)]
pub struct RecurRankConfig {
    /// Overall confidence parameter `δ`.
    pub delta: f64,
    /// Slack of the approximate G-optimal design.
    pub epsilon: f64,
    pub design: DesignMethod,
    /// Replaces the per-phase `δ_ℓ = δ / (2Kℓ(ℓ+1))`.
    pub delta_phase_override: Option<f64>,
    /// Forces `T(a)` to this value for every design item (ablations only).
    pub allocation_override: Option<u64>,
    /// Verify position coverage and schedule accounting every round.
    pub check_invariants: bool,
}

impl RecurRankConfig {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            epsilon: DEFAULT_EPSILON,
            design: DesignMethod::GOptimal,
            delta_phase_override: None,
            allocation_override: None,
            check_invariants: cfg!(debug_assertions),
        }
    }

    /// `δ = 1/√T`.
    pub fn for_horizon(horizon: u64) -> Self {
        Self::new(1.0 / (horizon.max(1) as f64).sqrt())
    }

    pub fn delta_for_phase(&self, n_positions: usize, phase: u32) -> f64 {
        self.delta_phase_override.unwrap_or_else(|| {
            let l = phase as f64;
            self.delta / (2.0 * n_positions as f64 * l * (l + 1.0))
        })
    }
}

/// One live call: a phase, an ordered item list and a position interval.
#[derive(Debug, Clone)]
pub struct Instance {
    id: usize,
    parent: Option<usize>,
    phase: u32,
    items: Vec<usize>,
    positions: Range<usize>,
    design: Design,
    allocation: AllocationTable,
    remaining: Vec<(usize, u64)>,
    head_rounds: u64,
    scheduled: Option<usize>,
    stats: GramAccumulator,
}

/// The outcome of splitting a finished instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    /// `(ordered items, position interval)` for every surviving block.
    pub children: Vec<(Vec<usize>, Range<usize>)>,
    pub eliminated: Vec<usize>,
}

/// Estimates and split of a finished instance.
#[derive(Debug, Clone)]
pub struct Finalized {
    pub theta_hat: Vec<f64>,
    /// Items sorted by decreasing estimated score, with their scores.
    pub ranked: Vec<(usize, f64)>,
    pub split: SplitResult,
}

impl Instance {
    /// Builds an instance, its design and its exploration schedule.
    pub fn spawn(
        item_set: &ItemSet,
        id: usize,
        phase: u32,
        items: Vec<usize>,
        positions: Range<usize>,
        delta_phase: f64,
        config: &RecurRankConfig,
    ) -> Result<Self> {
        if positions.is_empty() {
            return invalid("an instance needs at least one position");
        }
        if items.len() < positions.len() {
            return invalid(format!(
                "{} items cannot fill {} positions",
                items.len(),
                positions.len()
            ));
        }
        if phase < 1 {
            return invalid("phase numbers start at 1");
        }
        let vectors = item_set.select(&items);
        let local = match config.design {
            DesignMethod::GOptimal => g_optimal_design(&vectors, config.epsilon)?,
            DesignMethod::VolumetricSpanner => spanner_design(&vectors)?,
        };
        let design = Design::from_weights(
            local
                .weights()
                .iter()
                .map(|&(i, w)| (items[i], w))
                .collect(),
            local.max_norm(),
            local.rank(),
        )?;
        let dimension = (item_set.dim() as f64).max(design.max_norm());
        let allocation = match config.allocation_override {
            Some(t) => AllocationTable::from_counts(
                design.weights().iter().map(|&(i, _)| (i, t)).collect(),
            ),
            None => allocation(&design, dimension, phase, delta_phase, items.len())?,
        };
        Ok(Self {
            id,
            parent: None,
            phase,
            remaining: allocation.counts().to_vec(),
            allocation,
            design,
            items,
            positions,
            head_rounds: 0,
            scheduled: None,
            stats: GramAccumulator::new(item_set.dim()),
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn parent(&self) -> Option<usize> {
        self.parent
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    pub fn items(&self) -> &[usize] {
        &self.items
    }

    pub fn positions(&self) -> Range<usize> {
        self.positions.clone()
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn allocation(&self) -> &AllocationTable {
        &self.allocation
    }

    pub fn remaining(&self, item: usize) -> u64 {
        self.remaining
            .iter()
            .find(|&&(i, _)| i == item)
            .map_or(0, |&(_, c)| c)
    }

    pub fn remaining_total(&self) -> u64 {
        self.remaining.iter().map(|&(_, c)| c).sum()
    }

    pub fn head_rounds(&self) -> u64 {
        self.head_rounds
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining_total() == 0
    }

    pub fn gram(&self) -> &GramAccumulator {
        &self.stats
    }

    /// Next exploration item: the largest remaining count, ties by index.
    pub fn next_head(&self) -> Option<usize> {
        let mut best: Option<(usize, u64)> = None;
        for &(i, c) in &self.remaining {
            if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
                best = Some((i, c));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Items for this interval with `head` first, then the leading items
    /// of the ordered list, skipping `head`.
    pub fn compose(&self, head: usize) -> Vec<usize> {
        let m = self.positions.len();
        let mut out = Vec::with_capacity(m);
        out.push(head);
        out.extend(
            self.items
                .iter()
                .copied()
                .filter(|&i| i != head)
                .take(m - 1),
        );
        out
    }

    /// Schedules the next head item and returns the interval's items.
    fn schedule(&mut self) -> Result<Vec<usize>> {
        let head = self.next_head().ok_or_else(|| {
            Error::Invariant(format!("instance {} has no exploration left", self.id))
        })?;
        self.scheduled = Some(head);
        Ok(self.compose(head))
    }

    /// Adds the head-position observation of this round.
    pub fn record_feedback(
        &mut self,
        item_set: &ItemSet,
        head_item: usize,
        clicked: bool,
    ) -> Result<()> {
        if self.scheduled != Some(head_item) {
            return Err(Error::Contract(format!(
                "instance {} expected feedback for item {:?}, got item {head_item}",
                self.id, self.scheduled
            )));
        }
        let slot = self
            .remaining
            .iter_mut()
            .find(|(i, c)| *i == head_item && *c > 0)
            .ok_or_else(|| Error::Contract(format!("item {head_item} has no exploration left")))?;
        slot.1 -= 1;
        self.stats
            .push(item_set.get(head_item), if clicked { 1.0 } else { 0.0 })?;
        self.head_rounds += 1;
        self.scheduled = None;
        Ok(())
    }

    /// Least-squares estimate, ordering and split. Requires an exhausted
    /// schedule.
    pub fn finalize(&self, item_set: &ItemSet) -> Result<Finalized> {
        if !self.is_exhausted() {
            return Err(Error::Contract(format!(
                "instance {} finalized with {} exploration rounds left",
                self.id,
                self.remaining_total()
            )));
        }
        let theta_hat = self.stats.solve()?;
        let scores: Vec<f64> = self
            .items
            .iter()
            .map(|&i| dot(item_set.get(i), &theta_hat))
            .collect();
        let ranked = order_by_score(&self.items, &scores);
        let split = split_blocks(&ranked, self.positions.clone(), phase_precision(self.phase));
        Ok(Finalized {
            theta_hat,
            ranked,
            split,
        })
    }
}

/// Stable sort by decreasing score.
fn order_by_score(items: &[usize], scores: &[f64]) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = items.iter().copied().zip(scores.iter().copied()).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}

/// Splits an ordered list wherever the score gap reaches `2Δ` and assigns
/// position sub-intervals; blocks that start past the interval are
/// eliminated.
pub fn split_blocks(ranked: &[(usize, f64)], positions: Range<usize>, gap: f64) -> SplitResult {
    let n = ranked.len();
    let m = positions.len();
    let first = positions.start;
    let mut cuts = Vec::new();
    for i in 0..n {
        let eps = if i + 1 < n {
            ranked[i].1 - ranked[i + 1].1
        } else {
            2.0 * gap
        };
        if eps >= 2.0 * gap {
            cuts.push(i + 1);
        }
    }
    let mut children = Vec::new();
    let mut eliminated = Vec::new();
    let mut start = 0;
    for &end in &cuts {
        let block: Vec<usize> = ranked[start..end].iter().map(|&(i, _)| i).collect();
        if start < m {
            children.push((block, first + start..first + end.min(m)));
        } else {
            eliminated.extend(block);
        }
        start = end;
    }
    SplitResult {
        children,
        eliminated,
    }
}

/// Ground truth consumed by the failure monitor.
#[derive(Debug, Clone)]
pub struct FailureMonitor {
    theta: Theta,
    optimal_examination: Vec<f64>,
    optimal_items: Vec<usize>,
    records: Vec<MonitorRecord>,
    misassigned_calls: usize,
}

/// One `(call, item)` comparison of `⟨θ̂, a⟩` with `χ*_{head} · α(a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorRecord {
    pub call: usize,
    pub phase: u32,
    pub item: usize,
    pub deviation: f64,
    pub precision: f64,
}

impl MonitorRecord {
    pub fn failed(&self) -> bool {
        self.deviation >= self.precision
    }
}

impl FailureMonitor {
    pub fn new(env: &Environment, n_positions: usize) -> Self {
        Self {
            theta: env.theta().clone(),
            optimal_examination: env.optimal_examination(n_positions),
            optimal_items: env.optimal_ranking(n_positions).items().to_vec(),
            records: Vec::new(),
            misassigned_calls: 0,
        }
    }

    pub fn records(&self) -> &[MonitorRecord] {
        &self.records
    }

    /// Calls that did not hold every optimal item for their positions.
    pub fn misassigned_calls(&self) -> usize {
        self.misassigned_calls
    }

    fn observe(&mut self, item_set: &ItemSet, instance: &Instance, theta_hat: &[f64]) {
        let head = instance.positions.start;
        let chi = self.optimal_examination[head];
        let precision = phase_precision(instance.phase);
        for &item in &instance.items {
            let a = item_set.get(item);
            let truth = chi * dot(a, &self.theta.0);
            self.records.push(MonitorRecord {
                call: instance.id,
                phase: instance.phase,
                item,
                deviation: (dot(a, theta_hat) - truth).abs(),
                precision,
            });
        }
        if instance
            .positions
            .clone()
            .any(|p| !instance.items.contains(&self.optimal_items[p]))
        {
            self.misassigned_calls += 1;
        }
    }
}

/// Fraction of monitored `(call, item)` pairs whose estimate missed by at
/// least the phase precision.
pub fn failure_rate(monitor: &FailureMonitor) -> Result<f64> {
    if monitor.records.is_empty() {
        return Err(Error::UndefinedStatistic(
            "no finished calls were monitored".into(),
        ));
    }
    let failed = monitor.records.iter().filter(|r| r.failed()).count();
    Ok(failed as f64 / monitor.records.len() as f64)
}

/// Summary of a finished call, kept for diagnostics and audits.
#[derive(Debug, Clone)]
pub struct CallRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub phase: u32,
    pub positions: Range<usize>,
    pub items: Vec<usize>,
    pub planned_rounds: u64,
    pub head_rounds: u64,
    pub theta_hat: Vec<f64>,
    /// `(child id, child phase)`.
    pub children: Vec<(usize, u32)>,
    pub eliminated: Vec<usize>,
    /// Round (1-based) at which the call finished.
    pub finished_at: u64,
}

/// Item placed at an instance's head position in the latest ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadAssignment {
    pub instance: usize,
    pub position: usize,
    pub item: usize,
}

/// Scheduler running all live instances in lock step.
#[derive(Debug)]
pub struct RecurRank<'a> {
    items: &'a ItemSet,
    n_positions: usize,
    config: RecurRankConfig,
    live: Vec<Instance>,
    next_id: usize,
    round: u64,
    heads: Vec<HeadAssignment>,
    history: Vec<CallRecord>,
    monitor: Option<FailureMonitor>,
    label: String,
}

impl<'a> RecurRank<'a> {
    /// Starts the root call on all items (in an `rng`-shuffled order) and
    /// positions `0..n_positions`.
    pub fn new(
        items: &'a ItemSet,
        n_positions: usize,
        config: RecurRankConfig,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        if n_positions == 0 || n_positions > items.len() {
            return invalid(format!(
                "need 1 <= K <= L, got K = {n_positions}, L = {}",
                items.len()
            ));
        }
        if !(config.delta > 0.0 && config.delta < 1.0) {
            return invalid(format!("delta must lie in (0, 1), got {}", config.delta));
        }
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.shuffle(rng);
        let mut this = Self {
            items,
            n_positions,
            config,
            live: Vec::new(),
            next_id: 0,
            round: 0,
            heads: Vec::new(),
            history: Vec::new(),
            monitor: None,
            label: "recurrank".into(),
        };
        let root = this.spawn(None, 1, order, 0..n_positions)?;
        this.live.push(root);
        Ok(this)
    }

    /// Enables the ground-truth failure monitor.
    pub fn with_monitor(mut self, env: &Environment) -> Self {
        self.monitor = Some(FailureMonitor::new(env, self.n_positions));
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn spawn(
        &mut self,
        parent: Option<usize>,
        phase: u32,
        items: Vec<usize>,
        positions: Range<usize>,
    ) -> Result<Instance> {
        let delta_phase = self.config.delta_for_phase(self.n_positions, phase);
        let mut inst = Instance::spawn(
            self.items,
            self.next_id,
            phase,
            items,
            positions,
            delta_phase,
            &self.config,
        )?;
        inst.parent = parent;
        self.next_id += 1;
        Ok(inst)
    }

    pub fn instances(&self) -> &[Instance] {
        &self.live
    }

    pub fn history(&self) -> &[CallRecord] {
        &self.history
    }

    pub fn heads(&self) -> &[HeadAssignment] {
        &self.heads
    }

    pub fn monitor(&self) -> Option<&FailureMonitor> {
        self.monitor.as_ref()
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn config(&self) -> &RecurRankConfig {
        &self.config
    }

    /// Live intervals must tile `0..K` in order.
    pub fn check_coverage(&self) -> Result<()> {
        let mut next = 0;
        for inst in &self.live {
            if inst.positions.start != next {
                return Err(Error::Invariant(format!(
                    "position {next} is not covered exactly once (instance {} starts at {})",
                    inst.id, inst.positions.start
                )));
            }
            if inst.items.len() > inst.positions.len() && inst.positions.end != self.n_positions {
                return Err(Error::Invariant(format!(
                    "instance {} has surplus items but does not own the last position",
                    inst.id
                )));
            }
            next = inst.positions.end;
        }
        if next != self.n_positions {
            return Err(Error::Invariant(format!(
                "positions {next}..{} are not covered",
                self.n_positions
            )));
        }
        Ok(())
    }

    fn replace_finished(&mut self) -> Result<()> {
        let mut next_live = Vec::with_capacity(self.live.len() + 2);
        let finished: Vec<Instance> = std::mem::take(&mut self.live);
        for inst in finished {
            if !inst.is_exhausted() {
                next_live.push(inst);
                continue;
            }
            let done = inst.finalize(self.items)?;
            if let Some(monitor) = self.monitor.as_mut() {
                monitor.observe(self.items, &inst, &done.theta_hat);
            }
            let mut children = Vec::with_capacity(done.split.children.len());
            for (block, positions) in done.split.children {
                let child = self.spawn(Some(inst.id), inst.phase + 1, block, positions)?;
                children.push((child.id, child.phase));
                next_live.push(child);
            }
            if self.config.check_invariants {
                if inst.head_rounds != inst.allocation.total() {
                    return Err(Error::Invariant(format!(
                        "instance {} ran {} head rounds but planned {}",
                        inst.id,
                        inst.head_rounds,
                        inst.allocation.total()
                    )));
                }
                if children.iter().any(|&(_, p)| p != inst.phase + 1) {
                    return Err(Error::Invariant("child phase must be parent + 1".into()));
                }
            }
            self.history.push(CallRecord {
                id: inst.id,
                parent: inst.parent,
                phase: inst.phase,
                positions: inst.positions.clone(),
                items: inst.items.clone(),
                planned_rounds: inst.allocation.total(),
                head_rounds: inst.head_rounds,
                theta_hat: done.theta_hat,
                children,
                eliminated: done.split.eliminated,
                finished_at: self.round,
            });
        }
        self.live = next_live;
        Ok(())
    }
}

impl Ranker for RecurRank<'_> {
    fn label(&self) -> &str {
        &self.label
    }

    fn rank(&mut self, _rng: &mut dyn RngCore) -> Result<Ranking> {
        if self.config.check_invariants {
            self.check_coverage()?;
        }
        let mut out = Vec::with_capacity(self.n_positions);
        self.heads.clear();
        for inst in self.live.iter_mut() {
            let block = inst.schedule()?;
            self.heads.push(HeadAssignment {
                instance: inst.id,
                position: inst.positions.start,
                item: block[0],
            });
            out.extend(block);
        }
        if out.len() != self.n_positions {
            return Err(Error::Invariant(format!(
                "composed {} positions, expected {}",
                out.len(),
                self.n_positions
            )));
        }
        Ranking::new(out).map_err(|e| Error::Invariant(e.to_string()))
    }

    fn observe(&mut self, ranking: &Ranking, clicks: &ClickVector) -> Result<()> {
        if ranking.len() != self.n_positions || clicks.len() != self.n_positions {
            return invalid("feedback does not match the number of positions");
        }
        self.round += 1;
        for inst in self.live.iter_mut() {
            let head = inst.positions.start;
            inst.record_feedback(self.items, ranking.item(head), clicks.clicked(head))?;
        }
        self.replace_finished()
    }
}

/// Runs RecurRank for `horizon` rounds with `δ` as given and returns the
/// per-round cumulative regret.
pub fn run_episode(
    env: &Environment,
    n_positions: usize,
    horizon: u64,
    delta: f64,
    seed: u64,
) -> Result<RegretTrace> {
    let mut streams = Streams::new(seed);
    let mut ranker = RecurRank::new(
        env.items(),
        n_positions,
        RecurRankConfig::new(delta),
        &mut streams.alg,
    )?;
    simulate(
        env,
        &mut ranker,
        n_positions,
        horizon,
        1,
        seed,
        &mut streams,
    )
}
