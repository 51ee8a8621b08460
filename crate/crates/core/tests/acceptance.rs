//! Acceptance checks. Prints one `[PASS]` or `[FAIL]` line per criterion.
//!
//! The desk-scale runs (criteria 5 and 6) take several minutes.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use recurrank::design::g_optimal_design;
use recurrank::env::{
    assumption_audit, generate_synthetic, ClickModel, Environment, ExaminationTable, ItemSet, Theta,
};
use recurrank::harness::{
    build_environment, normalized_regret, run_experiment, run_single, simulate, Algo,
    ExperimentConfig, RegretTrace, Streams, Summary,
};
use recurrank::linalg::least_squares;
use recurrank::recurrank::{failure_rate, RecurRank, RecurRankConfig};
use recurrank::{ClickVector, Ranker};

struct Outcome {
    id: u8,
    pass: bool,
    detail: String,
}

fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// `max_a aᵀ Q(π)† a` with the pseudo-inverse taken from nalgebra's SVD.
fn oracle_bound(items: &[Vec<f64>], weights: &[(usize, f64)]) -> f64 {
    let d = items[0].len();
    let mut q = DMatrix::<f64>::zeros(d, d);
    for &(i, w) in weights {
        let x = DVector::from_column_slice(&items[i]);
        q += w * &x * x.transpose();
    }
    let pinv = q.clone().pseudo_inverse(1e-10 * q.norm()).unwrap();
    items
        .iter()
        .map(|a| {
            let x = DVector::from_column_slice(a);
            (x.transpose() * &pinv * &x)[(0, 0)]
        })
        .fold(0.0, f64::max)
}

fn rank_of(items: &[Vec<f64>]) -> usize {
    let m = DMatrix::from_fn(items.len(), items[0].len(), |i, j| items[i][j]);
    m.rank(1e-9 * m.norm())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let shapes = [10, 100, 1000]
        .iter()
        .flat_map(|&l| [2, 5, 10].iter().map(move |&d| (l, d)))
        .collect::<Vec<_>>();
    for n in 0..200 {
        let (l, d) = shapes[n % shapes.len()];
        let items = gaussian_rows(&mut rng, l, d);
        let design = match g_optimal_design(&items, 0.05) {
            Ok(design) => design,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        let ratio = oracle_bound(&items, design.weights()) / rank_of(&items) as f64;
        worst = worst.max(ratio);
        if ratio > 1.05 + 1e-9 {
            failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        id: 1,
        pass: failures == 0 && secs < 60.0,
        detail: format!(
            "200 sets, worst bound/rank {worst:.5} (limit 1.05), {failures} failures, {secs:.1}s (limit 60s)"
        ),
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.random_range(1..=10);
        let n = rng.random_range(d..=4 * d + 5);
        let rows = gaussian_rows(&mut rng, n, d);
        let data: Vec<(Vec<f64>, f64)> = rows
            .iter()
            .map(|r| (r.clone(), f64::from(u8::from(rng.random_bool(0.5)))))
            .collect();
        let got = least_squares(&data).unwrap();
        let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        let y = DVector::from_iterator(n, data.iter().map(|(_, z)| *z));
        let want = (x.transpose() * &x)
            .lu()
            .solve(&(x.transpose() * y))
            .unwrap();
        for j in 0..d {
            worst = worst.max((got[j] - want[j]).abs());
        }
    }
    Outcome {
        id: 2,
        pass: worst <= 1e-9,
        detail: format!("1000 instances, max abs difference {worst:.2e} (limit 1e-9)"),
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (mut failed, mut checks) = (0usize, 0usize);
    for seed in 0..20u64 {
        let (items, theta) = generate_synthetic(50, 5, seed).unwrap();
        let env = Environment::new(items, theta, ClickModel::position_based_harmonic(5)).unwrap();
        let mut streams = Streams::new(seed);
        let mut rr = RecurRank::new(env.items(), 5, RecurRankConfig::new(0.05), &mut streams.alg)
            .unwrap()
            .with_monitor(&env);
        simulate(&env, &mut rr, 5, 200_000, 1000, seed, &mut streams).unwrap();
        let m = rr.monitor().unwrap();
        failed += m.records().iter().filter(|r| r.failed()).count();
        checks += m.records().len();
        failure_rate(m).unwrap();
    }
    let rate = failed as f64 / checks as f64;
    let slack = 1.96 * (0.05 * 0.95 / checks as f64).sqrt();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        id: 3,
        pass: rate <= 0.05 + slack && secs < 600.0,
        detail: format!(
            "failure rate {rate:.4} over {checks} checks (limit {:.4}), {secs:.1}s",
            0.05 + slack
        ),
    }
}

fn criterion_4() -> Outcome {
    let d = 8;
    let items = ItemSet::new(
        (0..d)
            .map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect())
            .collect(),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let theta = Theta((0..d).map(|_| rng.random::<f64>()).collect());
    let env = Environment::new(items, theta, ClickModel::DocumentBased).unwrap();
    let horizon = 100_000;
    let mut streams = Streams::new(4);
    let mut rr = RecurRank::new(
        env.items(),
        4,
        RecurRankConfig::for_horizon(horizon),
        &mut streams.alg,
    )
    .unwrap();
    // (call, item) -> (clicks, head placements)
    let mut tally: HashMap<(usize, usize), (f64, f64)> = HashMap::new();
    for _ in 0..horizon {
        let ranking = rr.rank(&mut streams.alg).unwrap();
        let clicks: ClickVector = env.sample_clicks(&ranking, &mut streams.env).unwrap();
        for h in rr.heads() {
            let e = tally.entry((h.instance, h.item)).or_default();
            e.0 += f64::from(u8::from(clicks.clicked(h.position)));
            e.1 += 1.0;
        }
        rr.observe(&ranking, &clicks).unwrap();
    }
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for call in rr.history() {
        for &j in &call.items {
            let estimate = call.theta_hat[j];
            let average = match tally.get(&(call.id, j)) {
                Some(&(c, n)) => c / n,
                None => 0.0,
            };
            worst = worst.max((estimate - average).abs());
            compared += 1;
        }
    }
    Outcome {
        id: 4,
        pass: compared > 0 && worst <= 1e-9,
        detail: format!(
            "{} calls, {compared} estimates, max difference {worst:.2e} (limit 1e-9)",
            rr.history().len()
        ),
    }
}

fn desk_config(model: &str, horizon: u64) -> ExperimentConfig {
    ExperimentConfig::parse(&format!(
        "env = synthetic\nclick_model = {model}\nitems = 1000\ndim = 5\npositions = 10\n\
         horizon = {horizon}\nseeds = 5\n"
    ))
    .unwrap()
}

fn desk_runs(config: &ExperimentConfig, algo: Algo) -> Vec<RegretTrace> {
    let env = build_environment(config).unwrap();
    config
        .seed_list()
        .into_iter()
        .map(|s| run_single(&env, config, algo, s).unwrap())
        .collect()
}

fn mean_normalized(traces: &[RegretTrace], horizon: u64) -> f64 {
    traces
        .iter()
        .map(|t| normalized_regret(t.final_regret(), 1000, 5, 10, horizon))
        .sum::<f64>()
        / traces.len() as f64
}

fn criterion_5(pbm: &[RegretTrace]) -> Outcome {
    let single = mean_normalized(pbm, 1_000_000);
    let doubled = mean_normalized(
        &desk_runs(&desk_config("pbm", 2_000_000), Algo::RecurRank),
        2_000_000,
    );
    let ratio = doubled / single;
    Outcome {
        id: 5,
        pass: single <= 20.0 && ratio <= 1.5,
        detail: format!(
            "normalized regret {single:.4} at T=1e6 (limit 20), {doubled:.4} at T=2e6, ratio {ratio:.3} (limit 1.5)"
        ),
    }
}

/// Whether `order` is strictly increasing in mean final regret with gaps of
/// at least two pooled standard errors.
fn ordered(summary: &Summary, order: [&str; 3]) -> (bool, String) {
    let rows: Vec<_> = order.iter().map(|l| summary.row(l).unwrap()).collect();
    let mut ok = true;
    for w in rows.windows(2) {
        let pooled = (w[0].std_error.unwrap().powi(2) + w[1].std_error.unwrap().powi(2)).sqrt();
        ok &= w[1].mean - w[0].mean >= 2.0 * pooled;
    }
    let text = rows
        .iter()
        .map(|r| format!("{} {:.2}±{:.2}", r.label, r.mean, r.std_error.unwrap()))
        .collect::<Vec<_>>()
        .join(", ");
    (ok, text)
}

fn criterion_6(pbm_recurrank: Vec<RegretTrace>) -> Outcome {
    let cm = desk_config("cascade", 1_000_000);
    let pbm = desk_config("pbm", 1_000_000);
    let mut cm_traces = Vec::new();
    let mut pbm_traces = pbm_recurrank;
    for algo in [Algo::RecurRank, Algo::CascadeLinUcb, Algo::TopRank] {
        cm_traces.extend(desk_runs(&cm, algo));
        if algo != Algo::RecurRank {
            pbm_traces.extend(desk_runs(&pbm, algo));
        }
    }
    let (cm_ok, cm_text) = ordered(
        &Summary::from_traces(&cm_traces),
        ["cascadelinucb", "recurrank", "toprank"],
    );
    let (pbm_ok, pbm_text) = ordered(
        &Summary::from_traces(&pbm_traces),
        ["recurrank", "cascadelinucb", "toprank"],
    );
    Outcome {
        id: 6,
        pass: cm_ok && pbm_ok,
        detail: format!(
            "CM {} [{cm_text}]; PBM {} [{pbm_text}]",
            if cm_ok { "ordered" } else { "out of order" },
            if pbm_ok { "ordered" } else { "out of order" }
        ),
    }
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut audited = 0;
    let mut rejected = Vec::new();
    for l in 1..=5 {
        for k in 1..=l.min(3) {
            for _ in 0..10 {
                let d = rng.random_range(1..=l);
                let items = ItemSet::new(
                    (0..l)
                        .map(|_| (0..d).map(|_| rng.random::<f64>() / d as f64).collect())
                        .collect(),
                )
                .unwrap();
                let theta = Theta((0..d).map(|_| rng.random::<f64>()).collect());
                let biases = {
                    let mut b: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
                    b.sort_by(|x, y| y.total_cmp(x));
                    b
                };
                for model in [
                    ClickModel::Cascade,
                    ClickModel::PositionBased { biases },
                    ClickModel::DocumentBased,
                ] {
                    let report = assumption_audit(&model, &items, &theta, k).unwrap();
                    audited += 1;
                    if !report.passed() {
                        rejected.push(format!("{} L={l} K={k}", model.name()));
                    }
                }
            }
        }
    }
    // Examination that increases down the list breaks the monotonicity
    // assumption.
    let mut table = ExaminationTable::new(0.5);
    for item in 0..3 {
        table.insert(&[item], 1, 0.9);
    }
    let items = ItemSet::new(vec![vec![0.9], vec![0.5], vec![0.2]]).unwrap();
    let violator =
        assumption_audit(&ClickModel::Tabular(table), &items, &Theta(vec![1.0]), 2).unwrap();
    let caught = violator
        .violation
        .as_ref()
        .is_some_and(|v| v.assumption == 2);
    Outcome {
        id: 7,
        pass: rejected.is_empty() && caught,
        detail: format!(
            "{audited} standard instances audited, {} rejected{}; violator {}",
            rejected.len(),
            if rejected.is_empty() {
                String::new()
            } else {
                format!(" ({})", rejected.join(", "))
            },
            if caught { "rejected" } else { "accepted" }
        ),
    }
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut rounds = 0u64;
    let mut configs = 0;
    let mut violations = Vec::new();
    while rounds < 100_000 {
        configs += 1;
        let l = rng.random_range(2..=30);
        let d = rng.random_range(2..=6);
        let k = rng.random_range(1..=l.min(6));
        let horizon = rng.random_range(500..=5_000);
        let delta = rng.random_range(0.01..0.5);
        let model = match rng.random_range(0..3) {
            0 => ClickModel::Cascade,
            1 => ClickModel::position_based_harmonic(k),
            _ => ClickModel::DocumentBased,
        };
        let (items, theta) = generate_synthetic(l, d, rng.random()).unwrap();
        let env = Environment::new(items, theta, model).unwrap();
        let mut config = RecurRankConfig::new(delta);
        config.check_invariants = false;
        let mut streams = Streams::new(rng.random());
        let mut rr = RecurRank::new(env.items(), k, config, &mut streams.alg).unwrap();
        let mut placements: HashMap<usize, u64> = HashMap::new();
        let mut phases: HashMap<usize, u32> = HashMap::new();
        for _ in 0..horizon {
            let ranking = match rr.rank(&mut streams.alg) {
                Ok(r) => r,
                Err(e) => {
                    violations.push(format!("rank failed: {e}"));
                    break;
                }
            };
            let mut seen = ranking.items().to_vec();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != k || ranking.len() != k {
                violations.push(format!(
                    "ranking {:?} is not injective of size {k}",
                    ranking.items()
                ));
            }
            for h in rr.heads() {
                *placements.entry(h.instance).or_default() += 1;
            }
            let clicks = env.sample_clicks(&ranking, &mut streams.env).unwrap();
            if let Err(e) = rr.observe(&ranking, &clicks) {
                violations.push(format!("observe failed: {e}"));
                break;
            }
            let mut next = 0;
            for inst in rr.instances() {
                phases.insert(inst.id(), inst.phase());
                if inst.positions().start != next {
                    violations.push(format!("positions not partitioned at {next}"));
                }
                next = inst.positions().end;
            }
            if next != k {
                violations.push(format!("positions {next}..{k} uncovered"));
            }
            rounds += 1;
        }
        for call in rr.history() {
            phases.insert(call.id, call.phase);
        }
        for call in rr.history() {
            let placed = placements.get(&call.id).copied().unwrap_or(0);
            if placed != call.planned_rounds || call.head_rounds != call.planned_rounds {
                violations.push(format!(
                    "call {} placed {placed} heads, recorded {}, planned {}",
                    call.id, call.head_rounds, call.planned_rounds
                ));
            }
            if let Some(p) = call.parent {
                if phases[&p] + 1 != call.phase {
                    violations.push(format!(
                        "call {} has phase {} under phase {}",
                        call.id, call.phase, phases[&p]
                    ));
                }
            }
        }
        for inst in rr.instances() {
            if let Some(p) = inst.parent() {
                if phases[&p] + 1 != inst.phase() {
                    violations.push(format!(
                        "call {} has phase {} under phase {}",
                        inst.id(),
                        inst.phase(),
                        phases[&p]
                    ));
                }
            }
        }
    }
    Outcome {
        id: 8,
        pass: violations.is_empty(),
        detail: format!(
            "{rounds} rounds over {configs} configurations, {} violations{}",
            violations.len(),
            violations
                .first()
                .map_or(String::new(), |v| format!(" (first: {v})"))
        ),
    }
}

fn criterion_9() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut outputs = Vec::new();
    for dir in &dirs {
        let config = ExperimentConfig::parse(&format!(
            "click_model = pbm\nitems = 100\ndim = 5\npositions = 5\nhorizon = 20000\n\
             seeds = 2\nworkers = 2\nout = {}\n",
            dir.path().display()
        ))
        .unwrap();
        let outcome = run_experiment(&config).unwrap();
        let mut files = outcome.trace_files.clone();
        files.push(outcome.summary_file.clone());
        outputs.push(
            files
                .iter()
                .map(|f| (f.file_name().unwrap().to_owned(), std::fs::read(f).unwrap()))
                .collect::<Vec<_>>(),
        );
    }
    let identical = outputs[0] == outputs[1];
    Outcome {
        id: 9,
        pass: identical,
        detail: format!(
            "{} files compared, {}",
            outputs[0].len(),
            if identical {
                "byte-identical"
            } else {
                "contents differ"
            }
        ),
    }
}

fn report(o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] C{}: {}", o.id, o.detail);
}

fn main() {
    let mut outcomes = Vec::new();
    for check in [criterion_1, criterion_2, criterion_3, criterion_4] {
        let o = check();
        report(&o);
        outcomes.push(o);
    }
    let pbm = desk_runs(&desk_config("pbm", 1_000_000), Algo::RecurRank);
    let o = criterion_5(&pbm);
    report(&o);
    outcomes.push(o);
    let o = criterion_6(pbm);
    report(&o);
    outcomes.push(o);
    for check in [criterion_7, criterion_8, criterion_9] {
        let o = check();
        report(&o);
        outcomes.push(o);
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("{passed}/{} criteria passed", outcomes.len());
}
