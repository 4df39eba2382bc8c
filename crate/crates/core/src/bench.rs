//! Monte-Carlo comparison of the five reconstruction methods.
//!
//! Each run draws one full and one restricted count table from the same
//! per-run seed stream, applies the selected estimators, and records
//! fidelity to the target ket and trace distance to the true state. The
//! hybrid and plain full-data ML reconstructions of the same counts are
//! additionally compared to each other, which is the pairing behind the
//! trace-distance figure. This module is the `f64` orchestration layer;
//! the math it drives lives in the generic modules.

use std::io::{BufRead, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::di::{hybrid_estimate, SolverConfig};
use crate::error::{Error, Result};
use crate::estimators::{linear_inversion, mle_estimate, MleConfig};
use crate::metrics::{fidelity_pure, trace_distance};
use crate::numerics::rng::Prng;
use crate::scenario::{build_joint_povm, build_partial_design, BellScenario};
use crate::simulation::{
    estimate_frequencies, make_test_state, sample_counts, target_ket, CountTable, TestStateKind,
};

/// The five reconstruction pipelines under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    DdMlPartial,
    DdMlFull,
    DiDdMl,
    LinPartial,
    LinFull,
}

impl MethodId {
    pub const ALL: [MethodId; 5] = [
        MethodId::DdMlPartial,
        MethodId::DdMlFull,
        MethodId::DiDdMl,
        MethodId::LinPartial,
        MethodId::LinFull,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dd_ml_partial" => Ok(MethodId::DdMlPartial),
            "dd_ml_full" => Ok(MethodId::DdMlFull),
            "di_dd_ml" => Ok(MethodId::DiDdMl),
            "lin_partial" => Ok(MethodId::LinPartial),
            "lin_full" => Ok(MethodId::LinFull),
            other => Err(Error::Parse(format!(
                "unknown method '{other}' (expected dd_ml_partial, dd_ml_full, di_dd_ml, lin_partial or lin_full)"
            ))),
        }
    }

    /// Linear inversion may return unphysical estimates; the ML pipelines
    /// may not.
    pub fn is_maximum_likelihood(self) -> bool {
        matches!(
            self,
            MethodId::DdMlPartial | MethodId::DdMlFull | MethodId::DiDdMl
        )
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MethodId::DdMlPartial => "dd_ml_partial",
            MethodId::DdMlFull => "dd_ml_full",
            MethodId::DiDdMl => "di_dd_ml",
            MethodId::LinPartial => "lin_partial",
            MethodId::LinFull => "lin_full",
        };
        write!(f, "{s}")
    }
}

/// One (state, run, method) outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub state: TestStateKind,
    pub method: MethodId,
    pub run_index: usize,
    pub seed: u64,
    pub fidelity: f64,
    pub trace_dist_to_true: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_dist_hybrid_vs_dd: Option<f64>,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_kl: Option<f64>,
    pub min_eigenvalue: f64,
    pub clamp_events: usize,
    pub wall_time: f64,
}

/// Benchmark configuration.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub states: Vec<TestStateKind>,
    pub methods: Vec<MethodId>,
    /// Number of Monte-Carlo runs per state.
    pub runs: usize,
    /// Mean total number of events per count table.
    pub samples: f64,
    pub master_seed: u64,
    /// Worker threads; 0 picks the number of available cores.
    pub jobs: usize,
    pub mle: MleConfig,
    pub di: SolverConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            states: TestStateKind::ALL.to_vec(),
            methods: MethodId::ALL.to_vec(),
            runs: 1000,
            samples: 1000.0,
            master_seed: 1,
            jobs: 0,
            mle: MleConfig::default(),
            di: SolverConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::InvalidArgument("no states selected".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be at least 1".into()));
        }
        if !(self.samples > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "samples must be positive, got {}",
                self.samples
            )));
        }
        for (i, s) in self.states.iter().enumerate() {
            if self.states[..i].contains(s) {
                return Err(Error::InvalidArgument(format!("duplicate state {s}")));
            }
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::InvalidArgument(format!("duplicate method {m}")));
            }
        }
        Ok(())
    }
}

/// Everything produced by a benchmark invocation.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub records: Vec<RunRecord>,
    pub summary: serde_json::Value,
    /// Runs that had to be redrawn because a setting pair saw no events.
    pub resampled_runs: usize,
}

struct Designs {
    full: crate::scenario::TomographyDesign<f64>,
    partial: crate::scenario::TomographyDesign<f64>,
    subset: crate::scenario::EventSubset<f64>,
}

fn build_designs() -> Result<Designs> {
    let scenario = BellScenario::<f64>::canonical();
    let full = build_joint_povm(&scenario)?;
    let (partial, subset) = build_partial_design(&scenario)?;
    Ok(Designs {
        full,
        partial,
        subset,
    })
}

/// Per-run data: the two count tables drawn from one seed stream.
struct RunData {
    seed: u64,
    attempts: usize,
    full: CountTable,
    partial: CountTable,
}

fn draw_run_data(
    designs: &Designs,
    state: TestStateKind,
    master_seed: u64,
    stream_id: u64,
    samples: f64,
) -> Result<RunData> {
    let rho = make_test_state::<f64>(state);
    let stream_seed = Prng::derive_seed(master_seed, stream_id);
    for attempt in 0..1000 {
        let seed = Prng::derive_seed(stream_seed, attempt);
        let mut rng = Prng::new(seed);
        let full = sample_counts(&mut rng, &rho, &designs.full, samples)?;
        let partial = sample_counts(&mut rng, &rho, &designs.partial, samples)?;
        if is_degenerate(designs, &full, &partial) {
            continue;
        }
        return Ok(RunData {
            seed,
            attempts: attempt as usize + 1,
            full,
            partial,
        });
    }
    Err(Error::DegenerateData(format!(
        "still degenerate after 1000 redraws for state {state}, run stream {stream_id}"
    )))
}

/// A run is unusable if some setting pair saw no events (the conditional
/// frequencies are undefined) or the normalization subset is empty.
fn is_degenerate(designs: &Designs, full: &CountTable, partial: &CountTable) -> bool {
    if full.total() == 0 {
        return true;
    }
    for x in 1..=3u8 {
        for y in 1..=3u8 {
            let nxy: u64 = (0..2u8)
                .flat_map(|a| (0..2u8).map(move |b| (a, b)))
                .map(|(a, b)| full.get(a, b, x, y))
                .sum();
            if nxy == 0 {
                return true;
            }
        }
    }
    let norm: u64 = designs
        .subset
        .normalization_subset
        .iter()
        .filter_map(|l| match l {
            crate::scenario::PovmLabel::Event { a, b, x, y } => Some(partial.get(*a, *b, *x, *y)),
            crate::scenario::PovmLabel::Complement => None,
        })
        .sum();
    norm == 0
}

/// Likelihood estimates live in `[0, 1]` up to rounding. Linear inversion
/// has heavy tails (the restricted design estimates its own normalization
/// from ~1/9 of the events, so fidelity noise reaches sigma ~ 0.1 at
/// N = 1000); the window only exists to catch genuinely absurd values.
fn check_fidelity_window(method: MethodId, fidelity: f64) -> Result<()> {
    let ok = if method.is_maximum_likelihood() {
        (0.0..=1.0 + 1e-9).contains(&fidelity)
    } else {
        (-1.0..=2.0).contains(&fidelity)
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "fidelity {fidelity} of method {method} is outside its sanity window"
        )))
    }
}

/// Apply every selected method to one run's data.
fn run_methods(
    config: &BenchConfig,
    designs: &Designs,
    state: TestStateKind,
    run_index: usize,
    data: &RunData,
) -> Result<Vec<RunRecord>> {
    let rho_true = make_test_state::<f64>(state);
    let ket = target_ket::<f64>(state);
    let mut records = Vec::with_capacity(config.methods.len());
    let mut hybrid_state: Option<crate::simulation::DensityMatrix<f64>> = None;
    let mut dd_full_state: Option<crate::simulation::DensityMatrix<f64>> = None;

    for &method in &config.methods {
        let started = Instant::now();
        let (matrix, iterations, final_kl, min_eigenvalue, clamp_events) = match method {
            MethodId::LinFull => {
                let f = estimate_frequencies(&data.full, &designs.full, None)?;
                let est = linear_inversion(&f.frequencies, &designs.full)?;
                let min_eig = est.min_eigenvalue()?;
                (est.matrix, 0, None, min_eig, 0)
            }
            MethodId::LinPartial => {
                let f =
                    estimate_frequencies(&data.partial, &designs.partial, Some(&designs.subset))?;
                let est = linear_inversion(&f.frequencies, &designs.partial)?;
                let min_eig = est.min_eigenvalue()?;
                (est.matrix, 0, None, min_eig, f.clamp_events)
            }
            MethodId::DdMlFull => {
                let f = estimate_frequencies(&data.full, &designs.full, None)?;
                let mle = mle_estimate(&f.frequencies, &designs.full, &config.mle)?;
                let min_eig = mle.state.min_eigenvalue()?;
                dd_full_state = Some(mle.state.clone());
                (
                    mle.state.matrix().clone(),
                    mle.iterations,
                    Some(mle.final_kl),
                    min_eig,
                    0,
                )
            }
            MethodId::DdMlPartial => {
                let f =
                    estimate_frequencies(&data.partial, &designs.partial, Some(&designs.subset))?;
                let mle = mle_estimate(&f.frequencies, &designs.partial, &config.mle)?;
                let min_eig = mle.state.min_eigenvalue()?;
                (
                    mle.state.matrix().clone(),
                    mle.iterations,
                    Some(mle.final_kl),
                    min_eig,
                    f.clamp_events,
                )
            }
            MethodId::DiDdMl => {
                let (mle, _reg) =
                    hybrid_estimate(&data.full, &designs.full, &config.di, &config.mle)?;
                let min_eig = mle.state.min_eigenvalue()?;
                hybrid_state = Some(mle.state.clone());
                (
                    mle.state.matrix().clone(),
                    mle.iterations,
                    Some(mle.final_kl),
                    min_eig,
                    0,
                )
            }
        };

        let fidelity = fidelity_pure(&matrix, &ket)?;
        check_fidelity_window(method, fidelity)?;
        let trace_dist_to_true = trace_distance(&matrix, rho_true.matrix())?;
        records.push(RunRecord {
            state,
            method,
            run_index,
            seed: data.seed,
            fidelity,
            trace_dist_to_true,
            trace_dist_hybrid_vs_dd: None,
            iterations,
            final_kl,
            min_eigenvalue,
            clamp_events,
            wall_time: started.elapsed().as_secs_f64(),
        });
    }

    // The hybrid-vs-plain-ML pairing exists only when both ran on this data.
    if let (Some(hybrid), Some(dd)) = (&hybrid_state, &dd_full_state) {
        let d = trace_distance(hybrid.matrix(), dd.matrix())?;
        for record in records.iter_mut() {
            if matches!(record.method, MethodId::DiDdMl | MethodId::DdMlFull) {
                record.trace_dist_hybrid_vs_dd = Some(d);
            }
        }
    }

    Ok(records)
}

/// Run the benchmark described by `config`.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let designs = build_designs()?;

    let work: Vec<(usize, usize)> = (0..config.states.len())
        .flat_map(|s| (0..config.runs).map(move |r| (s, r)))
        .collect();

    let execute = |(state_idx, run_index): &(usize, usize)| -> Result<(Vec<RunRecord>, usize)> {
        let state = config.states[*state_idx];
        let stream_id = (*state_idx as u64) << 32 | *run_index as u64;
        let data = draw_run_data(
            &designs,
            state,
            config.master_seed,
            stream_id,
            config.samples,
        )?;
        let records = run_methods(config, &designs, state, *run_index, &data)?;
        Ok((records, data.attempts - 1))
    };

    let results: Vec<Result<(Vec<RunRecord>, usize)>> = if config.jobs == 1 {
        work.iter().map(execute).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
        pool.install(|| work.par_iter().map(execute).collect())
    };

    let mut records = Vec::with_capacity(work.len() * config.methods.len());
    let mut resampled_runs = 0usize;
    for result in results {
        let (mut run_records, resamples) = result?;
        records.append(&mut run_records);
        resampled_runs += resamples;
    }

    let summary = summarize(config, &records, resampled_runs);
    Ok(BenchReport {
        records,
        summary,
        resampled_runs,
    })
}

/// Quartile by linear interpolation on the sorted sample.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

fn stats_json(values: &[f64]) -> serde_json::Value {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite metric"));
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    serde_json::json!({
        "mean": mean,
        "std": var.sqrt(),
        "min": sorted.first().copied().unwrap_or(f64::NAN),
        "q1": quantile(&sorted, 0.25),
        "median": quantile(&sorted, 0.5),
        "q3": quantile(&sorted, 0.75),
        "max": sorted.last().copied().unwrap_or(f64::NAN),
    })
}

/// Aggregate per-(state, method) statistics and the hybrid-vs-ML pairing.
pub fn summarize(
    config: &BenchConfig,
    records: &[RunRecord],
    resampled_runs: usize,
) -> serde_json::Value {
    let mut per_method = Vec::new();
    for &state in &config.states {
        for &method in &config.methods {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.state == state && r.method == method)
                .collect();
            if group.is_empty() {
                continue;
            }
            let fidelities: Vec<f64> = group.iter().map(|r| r.fidelity).collect();
            let distances: Vec<f64> = group.iter().map(|r| r.trace_dist_to_true).collect();
            let above_one = group.iter().filter(|r| r.fidelity > 1.0).count();
            let min_eig = group
                .iter()
                .map(|r| r.min_eigenvalue)
                .fold(f64::INFINITY, f64::min);
            let unphysical = group.iter().filter(|r| r.min_eigenvalue < -1e-6).count();
            let mean_iterations =
                group.iter().map(|r| r.iterations as f64).sum::<f64>() / group.len() as f64;
            let total_clamps: usize = group.iter().map(|r| r.clamp_events).sum();
            per_method.push(serde_json::json!({
                "state": state.to_string(),
                "method": method.to_string(),
                "runs": group.len(),
                "fidelity": stats_json(&fidelities),
                "trace_dist_to_true": stats_json(&distances),
                "fidelity_above_one": above_one,
                "min_eigenvalue": min_eig,
                "unphysical_runs": unphysical,
                "mean_iterations": mean_iterations,
                "clamp_events_total": total_clamps,
            }));
        }
    }

    let mut pairings = Vec::new();
    for &state in &config.states {
        let hybrid: Vec<&RunRecord> = records
            .iter()
            .filter(|r| {
                r.state == state
                    && r.method == MethodId::DiDdMl
                    && r.trace_dist_hybrid_vs_dd.is_some()
            })
            .collect();
        if hybrid.is_empty() {
            continue;
        }
        let d_pair: Vec<f64> = hybrid
            .iter()
            .filter_map(|r| r.trace_dist_hybrid_vs_dd)
            .collect();
        let d_true: Vec<f64> = hybrid.iter().map(|r| r.trace_dist_to_true).collect();
        let mut dp = d_pair.clone();
        dp.sort_by(|a, b| a.partial_cmp(b).expect("finite distance"));
        let mut dt = d_true.clone();
        dt.sort_by(|a, b| a.partial_cmp(b).expect("finite distance"));
        let median_pair = quantile(&dp, 0.5);
        let median_true = quantile(&dt, 0.5);
        pairings.push(serde_json::json!({
            "state": state.to_string(),
            "runs": hybrid.len(),
            "trace_dist_hybrid_vs_dd": stats_json(&d_pair),
            "trace_dist_hybrid_vs_true": stats_json(&d_true),
            "median_ratio": median_pair / median_true,
        }));
    }

    serde_json::json!({
        "format_version": 1,
        "master_seed": config.master_seed,
        "runs": config.runs,
        "samples": config.samples,
        "states": config.states.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        "methods": config.methods.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        "trace_distance_convention": "trace norm of the difference, no 1/2 factor",
        "di_kl_weighting": "empirical input distribution f(xy)",
        "resampled_runs": resampled_runs,
        "per_method": per_method,
        "pairings": pairings,
    })
}

/// Write records as JSON lines.
pub fn write_jsonl<W: Write>(records: &[RunRecord], mut out: W) -> Result<()> {
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Io(format!("serializing record: {e}")))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Read records from JSON lines.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<RunRecord>> {
    let mut records = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("line {}: {e}", idx + 1)))?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::DegenerateData(
            "results file holds no records".into(),
        ));
    }
    Ok(records)
}

/// Histogram rows `(state, method, bin_lo, bin_hi, count)` with 50 uniform
/// bins per (state, method) over the observed fidelity range.
pub fn fidelity_histograms(
    config: &BenchConfig,
    records: &[RunRecord],
) -> Vec<(String, String, f64, f64, usize)> {
    const BINS: usize = 50;
    let mut rows = Vec::new();
    for &state in &config.states {
        for &method in &config.methods {
            let values: Vec<f64> = records
                .iter()
                .filter(|r| r.state == state && r.method == method)
                .map(|r| r.fidelity)
                .collect();
            if values.is_empty() {
                continue;
            }
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                rows.push((state.to_string(), method.to_string(), lo, hi, values.len()));
                continue;
            }
            let width = (hi - lo) / BINS as f64;
            let mut counts = vec![0usize; BINS];
            for v in &values {
                let idx = (((v - lo) / width) as usize).min(BINS - 1);
                counts[idx] += 1;
            }
            for (i, &count) in counts.iter().enumerate() {
                rows.push((
                    state.to_string(),
                    method.to_string(),
                    lo + i as f64 * width,
                    lo + (i + 1) as f64 * width,
                    count,
                ));
            }
        }
    }
    rows
}

/// Write the histogram CSV with header `state,method,bin_lo,bin_hi,count`.
pub fn write_histogram_csv<W: Write>(
    rows: &[(String, String, f64, f64, usize)],
    mut out: W,
) -> Result<()> {
    writeln!(out, "state,method,bin_lo,bin_hi,count")?;
    for (state, method, lo, hi, count) in rows {
        writeln!(out, "{state},{method},{lo},{hi},{count}")?;
    }
    Ok(())
}
