use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};

pub const TRACE_HEADER: &str = "algo,seed,t,cum_regret";

/// Cumulative regret of one run at its checkpoint rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    label: String,
    seed: u64,
    values: Vec<(u64, f64)>,
}

impl RegretTrace {
    pub fn new(label: impl Into<String>, seed: u64) -> Self {
        Self {
            label: label.into(),
            seed,
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, round: u64, cumulative: f64) {
        self.values.push((round, cumulative));
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `(round, cumulative regret)` pairs in round order.
    pub fn values(&self) -> &[(u64, f64)] {
        &self.values
    }

    pub fn horizon(&self) -> u64 {
        self.values.last().map_or(0, |&(t, _)| t)
    }

    pub fn final_regret(&self) -> f64 {
        self.values.last().map_or(0.0, |&(_, r)| r)
    }

    /// Rows without the header.
    pub fn write_rows(&self, mut w: impl Write) -> std::io::Result<()> {
        for &(t, r) in &self.values {
            writeln!(w, "{},{},{t},{r}", self.label, self.seed)?;
        }
        Ok(())
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        self.write_rows(&mut w)
    }
}

/// Reads every `*.csv` trace file in `dir` (in file-name order) and groups
/// rows by `(algo, seed)`.
pub fn read_traces(dir: &Path) -> Result<Vec<RegretTrace>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return invalid(format!("no trace files in {}", dir.display()));
    }
    let mut order = Vec::new();
    let mut traces: BTreeMap<(String, u64), RegretTrace> = BTreeMap::new();
    for file in files {
        let reader = std::io::BufReader::new(std::fs::File::open(&file)?);
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if n == 0 {
                if line.trim() != TRACE_HEADER {
                    return Err(Error::Parse {
                        line: 1,
                        message: format!("{}: expected header `{TRACE_HEADER}`", file.display()),
                    });
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Parse {
                line: n + 1,
                message: format!("{}: {what} in `{line}`", file.display()),
            };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            let seed: u64 = cols[1].parse().map_err(|_| bad("bad seed"))?;
            let t: u64 = cols[2].parse().map_err(|_| bad("bad round"))?;
            let r: f64 = cols[3].parse().map_err(|_| bad("bad regret"))?;
            let key = (cols[0].to_string(), seed);
            let trace = traces.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                RegretTrace::new(cols[0], seed)
            });
            trace.push(t, r);
        }
    }
    Ok(order
        .into_iter()
        .map(|k| traces.remove(&k).expect("key recorded on insert"))
        .collect())
}

/// `R_T / (K √(d T ln(L T)))`.
pub fn normalized_regret(
    final_regret: f64,
    n_items: usize,
    dim: usize,
    n_positions: usize,
    horizon: u64,
) -> f64 {
    let t = horizon as f64;
    let scale = n_positions as f64 * (dim as f64 * t * (n_items as f64 * t).ln()).sqrt();
    if scale > 0.0 {
        final_regret / scale
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation over `√runs`; undefined for a single run.
    pub std_error: Option<f64>,
}

/// Final-regret statistics per algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    /// Groups traces by label in order of first appearance.
    pub fn from_traces(traces: &[RegretTrace]) -> Self {
        let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
        for tr in traces {
            match groups.iter_mut().find(|(l, _)| l == tr.label()) {
                Some((_, v)) => v.push(tr.final_regret()),
                None => groups.push((tr.label().to_string(), vec![tr.final_regret()])),
            }
        }
        let rows = groups
            .into_iter()
            .map(|(label, v)| {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let std_error = (v.len() > 1).then(|| {
                    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
                    (var / n).sqrt()
                });
                SummaryRow {
                    label,
                    runs: v.len(),
                    mean,
                    std_error,
                }
            })
            .collect();
        Self { rows }
    }

    pub fn row(&self, label: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>6} {:>16} {:>14}",
            "algorithm", "runs", "mean regret", "std error"
        )?;
        for r in &self.rows {
            let se = r.std_error.map_or("n/a".to_string(), |s| format!("{s:.4}"));
            writeln!(
                f,
                "{:<16} {:>6} {:>16.4} {:>14}",
                r.label, r.runs, r.mean, se
            )?;
        }
        Ok(())
    }
}
