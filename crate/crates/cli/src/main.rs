//! Command-line front end: simulate count tables, reconstruct states,
//! run the five-method benchmark and summarize result files.

mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::process::ExitCode;
use std::time::Instant;

use ditomo::bench::{
    fidelity_histograms, read_jsonl, run_benchmark, write_histogram_csv, write_jsonl, MethodId,
    RunRecord,
};
use ditomo::di::hybrid_estimate;
use ditomo::estimators::{linear_inversion, mle_estimate};
use ditomo::numerics::rng::Prng;
use ditomo::scenario::{build_joint_povm, build_partial_design, BellScenario, DesignKind};
use ditomo::simulation::{
    estimate_frequencies, make_test_state, sample_counts, state_to_json, CountTable, TestStateKind,
};
use ditomo::{Error, Result};

use config::{parse_flag_assignments, Config, KEYS};

const USAGE: &str = "\
ditomo - two-qubit tomography estimators and benchmark

USAGE:
    ditomo <COMMAND> [FLAGS]

COMMANDS:
    simulate     Sample a Poissonian count table for a test state
                 --state <tau1|tau2|tau3>  --n <mean total>  --seed <u64>
                 --design <full|partial>   --out <counts.csv>
    reconstruct  Estimate a state from a counts CSV
                 --counts <counts.csv>  --method <name>
                 --out-state <state.json>  --out-metrics <metrics.json>
                 plus any mle.* / di.* key as a flag
    benchmark    Run the Monte-Carlo method comparison
                 --config <file>  plus any config key as a flag; writes
                 results.jsonl, summary.json and histograms.csv into
                 output_dir
    report       Print fidelity statistics and the hybrid-vs-ML trace
                 distance ratio for a results file
                 --results <results.jsonl>

CONFIG KEYS (config file `key = value` lines and/or flags; flags win):
";

fn print_usage() {
    print!("{USAGE}");
    for key in KEYS {
        println!(
            "    {:<22} default {:<12} {}",
            key.name, key.default, key.help
        );
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        print_usage();
        return ExitCode::SUCCESS;
    }
    let command = args[0].as_str();
    let rest = &args[1..];
    let outcome = match command {
        "simulate" => cmd_simulate(rest),
        "reconstruct" => cmd_reconstruct(rest),
        "benchmark" => cmd_benchmark(rest),
        "report" => cmd_report(rest),
        other => Err(Error::Parse(format!(
            "unknown command '{other}' (expected simulate, reconstruct, benchmark or report)"
        ))),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn take(map: &mut BTreeMap<String, String>, key: &str) -> Option<String> {
    map.remove(key)
}

fn require(map: &mut BTreeMap<String, String>, key: &str) -> Result<String> {
    take(map, key).ok_or_else(|| Error::Parse(format!("missing required flag '--{key}'")))
}

fn reject_leftovers(map: &BTreeMap<String, String>) -> Result<()> {
    if let Some(key) = map.keys().next() {
        return Err(Error::Parse(format!("unknown flag '--{key}'")));
    }
    Ok(())
}

fn cmd_simulate(args: &[String]) -> Result<()> {
    let mut flags = parse_flag_assignments(args)?;
    let state = TestStateKind::parse(&require(&mut flags, "state")?)?;
    let n: f64 = require(&mut flags, "n")?
        .parse()
        .map_err(|_| Error::Parse("--n must be a positive number".into()))?;
    let seed: u64 = require(&mut flags, "seed")?
        .parse()
        .map_err(|_| Error::Parse("--seed must be an unsigned integer".into()))?;
    let design_kind = match require(&mut flags, "design")?.as_str() {
        "full" => DesignKind::Full,
        "partial" => DesignKind::Partial,
        other => return Err(Error::Parse(format!("unknown design '{other}'"))),
    };
    let out = require(&mut flags, "out")?;
    reject_leftovers(&flags)?;

    let scenario = BellScenario::canonical();
    let rho = make_test_state::<f64>(state);
    let mut rng = Prng::new(seed);
    let counts = match design_kind {
        DesignKind::Full => {
            let design = build_joint_povm(&scenario)?;
            sample_counts(&mut rng, &rho, &design, n)?
        }
        DesignKind::Partial => {
            let (design, _) = build_partial_design(&scenario)?;
            sample_counts(&mut rng, &rho, &design, n)?
        }
    };
    let file = File::create(&out).map_err(|e| Error::Io(format!("creating '{out}': {e}")))?;
    counts.write_csv(BufWriter::new(file))?;
    println!(
        "{} events over {} labeled outcomes -> {out}",
        counts.total(),
        counts.counts.len()
    );
    Ok(())
}

fn method_design_kind(method: MethodId) -> DesignKind {
    match method {
        MethodId::LinPartial | MethodId::DdMlPartial => DesignKind::Partial,
        MethodId::LinFull | MethodId::DdMlFull | MethodId::DiDdMl => DesignKind::Full,
    }
}

fn cmd_reconstruct(args: &[String]) -> Result<()> {
    let mut flags = parse_flag_assignments(args)?;
    let counts_path = require(&mut flags, "counts")?;
    let method = MethodId::parse(&require(&mut flags, "method")?)?;
    let out_state = require(&mut flags, "out-state")?;
    let out_metrics = require(&mut flags, "out-metrics")?;
    let mut config = Config::default();
    for (key, value) in std::mem::take(&mut flags) {
        if key.starts_with("mle.") || key.starts_with("di.") {
            config.apply(&key, &value)?;
        } else {
            return Err(Error::Parse(format!("unknown flag '--{key}'")));
        }
    }

    let file =
        File::open(&counts_path).map_err(|e| Error::Io(format!("opening '{counts_path}': {e}")))?;
    let counts = CountTable::read_csv(BufReader::new(file))?;
    let expected = method_design_kind(method);
    if counts.kind != expected {
        return Err(Error::InvalidArgument(format!(
            "method {method} needs a {expected}-design counts file, got {}",
            counts.kind
        )));
    }

    let scenario = BellScenario::canonical();
    let full = build_joint_povm(&scenario)?;
    let (partial, subset) = build_partial_design(&scenario)?;

    let (matrix, metrics) = match method {
        MethodId::LinFull | MethodId::LinPartial => {
            let (design, subset_opt) = match counts.kind {
                DesignKind::Full => (&full, None),
                DesignKind::Partial => (&partial, Some(&subset)),
            };
            let f = estimate_frequencies(&counts, design, subset_opt)?;
            let est = linear_inversion(&f.frequencies, design)?;
            let min_eig = est.min_eigenvalue()?;
            let metrics = serde_json::json!({
                "format_version": 1,
                "method": method.to_string(),
                "iterations": 0,
                "final_kl": null,
                "min_eigenvalue": min_eig,
                "trace_correction": est.trace_correction,
                "clamp_events": f.clamp_events,
            });
            (est.matrix, metrics)
        }
        MethodId::DdMlFull | MethodId::DdMlPartial => {
            let (design, subset_opt) = match counts.kind {
                DesignKind::Full => (&full, None),
                DesignKind::Partial => (&partial, Some(&subset)),
            };
            let f = estimate_frequencies(&counts, design, subset_opt)?;
            let mle = mle_estimate(&f.frequencies, design, &config.mle)?;
            let min_eig = mle.state.min_eigenvalue()?;
            let metrics = serde_json::json!({
                "format_version": 1,
                "method": method.to_string(),
                "iterations": mle.iterations,
                "final_kl": mle.final_kl,
                "final_epsilon": mle.final_epsilon,
                "converged": mle.converged,
                "min_eigenvalue": min_eig,
                "clamp_events": f.clamp_events,
            });
            (mle.state.matrix().clone(), metrics)
        }
        MethodId::DiDdMl => {
            let (mle, reg) = hybrid_estimate(&counts, &full, &config.di, &config.mle)?;
            let min_eig = mle.state.min_eigenvalue()?;
            let metrics = serde_json::json!({
                "format_version": 1,
                "method": method.to_string(),
                "iterations": mle.iterations,
                "final_kl": mle.final_kl,
                "final_epsilon": mle.final_epsilon,
                "converged": mle.converged,
                "min_eigenvalue": min_eig,
                "di": {
                    "final_kl": reg.final_kl,
                    "min_moment_eig": reg.min_moment_eig,
                    "barrier_t_final": reg.barrier_t_final,
                    "inner_iterations": reg.inner_iterations,
                },
            });
            (mle.state.matrix().clone(), metrics)
        }
    };

    write_json(&out_state, &state_to_json(&matrix))?;
    write_json(&out_metrics, &metrics)?;
    println!(
        "{method}: min eigenvalue {:.3e} -> {out_state}",
        metrics["min_eigenvalue"].as_f64().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn write_json(path: &str, value: &serde_json::Value) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("creating '{path}': {e}")))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)
        .map_err(|e| Error::Io(format!("writing '{path}': {e}")))?;
    writer.write_all(b"\n")?;
    Ok(())
}

fn cmd_benchmark(args: &[String]) -> Result<()> {
    let mut flags = parse_flag_assignments(args)?;
    let mut config = Config::default();
    if let Some(path) = take(&mut flags, "config") {
        config.load_file(&path)?;
    }
    for (key, value) in std::mem::take(&mut flags) {
        config.apply(&key, &value)?;
    }

    let bench_config = config.to_bench_config();
    bench_config.validate()?;
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| Error::Io(format!("creating '{}': {e}", config.output_dir.display())))?;

    let started = Instant::now();
    let report = run_benchmark(&bench_config)?;
    let elapsed = started.elapsed();

    let results_path = config.output_dir.join("results.jsonl");
    let file = File::create(&results_path)
        .map_err(|e| Error::Io(format!("creating '{}': {e}", results_path.display())))?;
    write_jsonl(&report.records, BufWriter::new(file))?;

    let summary_path = config.output_dir.join("summary.json");
    write_json(
        summary_path.to_str().unwrap_or("summary.json"),
        &report.summary,
    )?;

    let histogram_path = config.output_dir.join("histograms.csv");
    let rows = fidelity_histograms(&bench_config, &report.records);
    let file = File::create(&histogram_path)
        .map_err(|e| Error::Io(format!("creating '{}': {e}", histogram_path.display())))?;
    write_histogram_csv(&rows, BufWriter::new(file))?;

    println!(
        "{} records in {:.1}s ({} resampled runs) -> {}",
        report.records.len(),
        elapsed.as_secs_f64(),
        report.resampled_runs,
        config.output_dir.display()
    );
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite metric"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn cmd_report(args: &[String]) -> Result<()> {
    let mut flags = parse_flag_assignments(args)?;
    let results_path = require(&mut flags, "results")?;
    reject_leftovers(&flags)?;

    let file = File::open(&results_path)
        .map_err(|e| Error::Io(format!("opening '{results_path}': {e}")))?;
    let records = read_jsonl(BufReader::new(file))?;

    let mut states: Vec<TestStateKind> = Vec::new();
    let mut methods: Vec<MethodId> = Vec::new();
    for record in &records {
        if !states.contains(&record.state) {
            states.push(record.state);
        }
        if !methods.contains(&record.method) {
            methods.push(record.method);
        }
    }

    println!(
        "{:<6} {:<14} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "state", "method", "runs", "mean F", "std F", "median F", "min F", "max F"
    );
    for &state in &states {
        for &method in &methods {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.state == state && r.method == method)
                .collect();
            if group.is_empty() {
                continue;
            }
            let fidelities: Vec<f64> = group.iter().map(|r| r.fidelity).collect();
            let m = mean(&fidelities);
            let var =
                fidelities.iter().map(|f| (f - m) * (f - m)).sum::<f64>() / fidelities.len() as f64;
            let mut sorted = fidelities.clone();
            let med = median(&mut sorted);
            let lo = sorted.first().copied().unwrap_or(f64::NAN);
            let hi = sorted.last().copied().unwrap_or(f64::NAN);
            println!(
                "{:<6} {:<14} {:>6} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
                state.to_string(),
                method.to_string(),
                group.len(),
                m,
                var.sqrt(),
                med,
                lo,
                hi
            );
        }
    }

    let mut printed_header = false;
    for &state in &states {
        let paired: Vec<&RunRecord> = records
            .iter()
            .filter(|r| {
                r.state == state
                    && r.method == MethodId::DiDdMl
                    && r.trace_dist_hybrid_vs_dd.is_some()
            })
            .collect();
        if paired.is_empty() {
            continue;
        }
        if !printed_header {
            println!();
            println!(
                "{:<6} {:>6} {:>16} {:>16} {:>12}",
                "state", "runs", "med D(hyb,DD)", "med D(hyb,true)", "ratio"
            );
            printed_header = true;
        }
        let mut d_pair: Vec<f64> = paired
            .iter()
            .filter_map(|r| r.trace_dist_hybrid_vs_dd)
            .collect();
        let mut d_true: Vec<f64> = paired.iter().map(|r| r.trace_dist_to_true).collect();
        let mp = median(&mut d_pair);
        let mt = median(&mut d_true);
        println!(
            "{:<6} {:>6} {:>16.6} {:>16.6} {:>12.4}",
            state.to_string(),
            paired.len(),
            mp,
            mt,
            mp / mt
        );
    }
    Ok(())
}
