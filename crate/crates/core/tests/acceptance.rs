//! Acceptance gate: end-to-end checks of the five reconstruction pipelines,
//! the relaxation solver and the benchmark harness. Each criterion prints
//! one PASS/FAIL line (run with `--nocapture` to see them on success).

use std::time::Instant;

use ditomo::bench::{run_benchmark, write_jsonl, BenchConfig, MethodId, RunRecord};
use ditomo::di::{
    exact_conditional_input, lift_to_joint, quantum_moment_matrix, regularize, SolverConfig,
};
use ditomo::estimators::{linear_inversion, mle_estimate, MleConfig};
use ditomo::numerics::eig::{hermitian_eig, trace_norm};
use ditomo::numerics::rng::Prng;
use ditomo::scenario::{build_joint_povm, build_partial_design, BellScenario};
use ditomo::simulation::{
    born_probabilities, conditional_frequencies, estimate_frequencies, make_test_state,
    random_density_matrix, sample_counts, TestStateKind,
};

type Outcome = Result<String, String>;

fn check(condition: bool, detail: String) -> Outcome {
    if condition {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Designs {
    full: ditomo::TomographyDesign,
    partial: ditomo::TomographyDesign,
}

fn designs() -> Designs {
    let scenario = BellScenario::canonical();
    let full = build_joint_povm(&scenario).expect("full design");
    let (partial, _) = build_partial_design(&scenario).expect("partial design");
    Designs { full, partial }
}

/// Noiseless oracles: exact Born probabilities reproduce each test state
/// through linear inversion, maximum likelihood and the hybrid pipeline.
fn criterion_1(designs: &Designs) -> Outcome {
    let started = Instant::now();
    let mle_config = MleConfig::default();
    let solver_config = SolverConfig::default();
    let mut worst_lin = 0.0f64;
    let mut worst_mle = 0.0f64;
    let mut worst_hybrid = 0.0f64;

    for kind in TestStateKind::ALL {
        let tau = make_test_state::<f64>(kind);
        for design in [&designs.full, &designs.partial] {
            let f = born_probabilities(&tau, design);
            let lin = linear_inversion(&f, design).map_err(|e| e.to_string())?;
            let lin_err = trace_norm(&(&lin.matrix - tau.matrix())).map_err(|e| e.to_string())?;
            worst_lin = worst_lin.max(lin_err);

            let mle = mle_estimate(&f, design, &mle_config).map_err(|e| e.to_string())?;
            let mle_err =
                trace_norm(&(mle.state.matrix() - tau.matrix())).map_err(|e| e.to_string())?;
            worst_mle = worst_mle.max(mle_err);
        }

        let (f_cond, f_xy) = exact_conditional_input(&tau);
        let reg = regularize(&f_cond, &f_xy, &solver_config).map_err(|e| e.to_string())?;
        let lifted = lift_to_joint(&reg.behavior, &f_xy).map_err(|e| e.to_string())?;
        let hybrid =
            mle_estimate(&lifted, &designs.full, &mle_config).map_err(|e| e.to_string())?;
        let hybrid_err =
            trace_norm(&(hybrid.state.matrix() - tau.matrix())).map_err(|e| e.to_string())?;
        worst_hybrid = worst_hybrid.max(hybrid_err);
    }

    let elapsed = started.elapsed().as_secs_f64();
    check(
        worst_lin <= 1e-10 && worst_mle <= 1e-4 && worst_hybrid <= 1e-3 && elapsed <= 60.0,
        format!(
            "LIN {worst_lin:.2e} (<=1e-10), MLE {worst_mle:.2e} (<=1e-4), \
             hybrid {worst_hybrid:.2e} (<=1e-3), {elapsed:.1}s (<=60s)"
        ),
    )
}

/// Physicality split: linear inversion leaves the physical set on noisy
/// near-pure data, the likelihood methods never do.
fn criterion_2(records: &[RunRecord]) -> Outcome {
    let lin_full_tau2: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.state == TestStateKind::Tau2 && r.method == MethodId::LinFull)
        .collect();
    let lin_breaks = lin_full_tau2
        .iter()
        .filter(|r| r.fidelity > 1.0 || r.min_eigenvalue < -1e-6)
        .count();

    let ml_records: Vec<&RunRecord> = records
        .iter()
        .filter(|r| r.method.is_maximum_likelihood())
        .collect();
    let ml_violations = ml_records
        .iter()
        .filter(|r| r.min_eigenvalue < -1e-10 || r.fidelity > 1.0 + 1e-9)
        .count();

    check(
        lin_breaks >= 1 && ml_violations == 0,
        format!(
            "{lin_breaks}/{} unphysical lin_full runs on tau2 (need >=1), \
             {ml_violations}/{} ML records outside the physical window (need 0)",
            lin_full_tau2.len(),
            ml_records.len()
        ),
    )
}

fn mean_fidelity(records: &[RunRecord], state: TestStateKind, method: MethodId) -> f64 {
    let values: Vec<f64> = records
        .iter()
        .filter(|r| r.state == state && r.method == method)
        .map(|r| r.fidelity)
        .collect();
    values.iter().sum::<f64>() / values.len() as f64
}

/// Method equivalence: the hybrid pipeline scores like plain full-data ML.
fn criterion_3(records: &[RunRecord]) -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for state in TestStateKind::ALL {
        let hybrid = mean_fidelity(records, state, MethodId::DiDdMl);
        let plain = mean_fidelity(records, state, MethodId::DdMlFull);
        let gap = (hybrid - plain).abs();
        ok &= gap <= 0.02;
        detail.push(format!("{state}: |dF|={gap:.2e}"));
    }
    check(ok, format!("{} (each <=0.02)", detail.join(", ")))
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Trace-distance hierarchy: hybrid and plain ML reconstructions of the
/// same data are much closer to each other than to the true state.
fn criterion_4(records: &[RunRecord]) -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for state in [TestStateKind::Tau2, TestStateKind::Tau3] {
        let paired: Vec<&RunRecord> = records
            .iter()
            .filter(|r| {
                r.state == state
                    && r.method == MethodId::DiDdMl
                    && r.trace_dist_hybrid_vs_dd.is_some()
            })
            .collect();
        let d_pair = median(
            paired
                .iter()
                .filter_map(|r| r.trace_dist_hybrid_vs_dd)
                .collect(),
        );
        let d_true = median(paired.iter().map(|r| r.trace_dist_to_true).collect());
        let ratio = d_pair / d_true;
        ok &= d_pair <= 0.3 * d_true;
        detail.push(format!("{state}: ratio={ratio:.3}"));
    }
    check(
        ok,
        format!("{} (each <=0.3, expected ~0.1)", detail.join(", ")),
    )
}

/// Relaxation soundness: exact quantum moment matrices are feasible and
/// exact behaviors project onto themselves.
fn criterion_5() -> Outcome {
    let mut rng = Prng::new(777);
    let mut worst_eig = f64::INFINITY;
    let mut worst_kl = 0.0f64;
    for _ in 0..100 {
        let rho = random_density_matrix::<f64>(&mut rng);
        let moment = quantum_moment_matrix(&rho);
        let eig = hermitian_eig(&moment).map_err(|e| e.to_string())?;
        worst_eig = worst_eig.min(eig.min_eigenvalue());

        let (f_cond, f_xy) = exact_conditional_input(&rho);
        let reg =
            regularize(&f_cond, &f_xy, &SolverConfig::default()).map_err(|e| e.to_string())?;
        worst_kl = worst_kl.max(reg.final_kl);
    }
    check(
        worst_eig >= -1e-10 && worst_kl <= 1e-5,
        format!("min moment eigenvalue {worst_eig:.2e} (>=-1e-10), max final KL {worst_kl:.2e} (<=1e-5)"),
    )
}

/// Solver invariants on noisy data: monotone barrier merit, strictly
/// decreasing accepted ML iterates, and behaviors that are exact images of
/// their nonsignaling representation.
fn criterion_6(designs: &Designs) -> Outcome {
    let tau = make_test_state::<f64>(TestStateKind::Tau2);
    let solver_config = SolverConfig {
        record_merit_trace: true,
        ..SolverConfig::default()
    };
    let mle_config = MleConfig {
        record_kl_trace: true,
        ..MleConfig::default()
    };

    let mut merit_steps = 0usize;
    let mut kl_steps = 0usize;
    for seed in 0..100u64 {
        let mut rng = Prng::new(900_000 + seed);
        let counts =
            sample_counts(&mut rng, &tau, &designs.full, 1000.0).map_err(|e| e.to_string())?;

        let (f_cond, f_xy) = conditional_frequencies::<f64>(&counts).map_err(|e| e.to_string())?;
        let reg = regularize(&f_cond, &f_xy, &solver_config).map_err(|e| e.to_string())?;
        if reg.max_merit_increase > 0.0 {
            return Err(format!(
                "merit increased by {:.3e} on seed {seed}",
                reg.max_merit_increase
            ));
        }
        for stage in &reg.merit_trace {
            for w in stage.windows(2) {
                merit_steps += 1;
                if w[1] > w[0] {
                    return Err(format!("merit rose {} -> {} on seed {seed}", w[0], w[1]));
                }
            }
        }

        // Exactness: the conditional table must be the bit-for-bit image of
        // the fifteen-moment representation, whose marginals do not involve
        // the other party's setting at all.
        let b = &reg.behavior;
        for s in 0..9 {
            let block = b.conditional_block(s);
            let (a, bb, ab) = (b.exp_a[s / 3], b.exp_b[s % 3], b.exp_ab[s]);
            let image = [ab, a - ab, bb - ab, ((1.0 - a) - bb) + ab];
            if block != image {
                return Err(format!("block {s} is not the exact image of the moments"));
            }
            let sum: f64 = block.iter().sum();
            if (sum - 1.0).abs() > 4.0 * f64::EPSILON {
                return Err(format!("block {s} sums to {sum}"));
            }
        }

        let f = estimate_frequencies(&counts, &designs.full, None).map_err(|e| e.to_string())?;
        let mle =
            mle_estimate(&f.frequencies, &designs.full, &mle_config).map_err(|e| e.to_string())?;
        for w in mle.kl_trace.windows(2) {
            kl_steps += 1;
            if w[1] >= w[0] {
                return Err(format!(
                    "accepted KL not strictly decreasing on seed {seed}"
                ));
            }
        }
    }
    Ok(format!(
        "100 noisy runs: {merit_steps} monotone merit steps, {kl_steps} strictly decreasing KL steps, all behaviors exact"
    ))
}

fn strip_wall_time(jsonl: &str) -> String {
    jsonl
        .lines()
        .map(|line| match line.find(",\"wall_time\":") {
            Some(idx) => format!("{}}}", &line[..idx]),
            None => line.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Determinism: identical seeds give byte-identical result streams apart
/// from the wall-time fields.
fn criterion_7(smoke_config: &BenchConfig) -> Outcome {
    let a = run_benchmark(smoke_config).map_err(|e| e.to_string())?;
    let b = run_benchmark(smoke_config).map_err(|e| e.to_string())?;
    let mut buf_a = Vec::new();
    let mut buf_b = Vec::new();
    write_jsonl(&a.records, &mut buf_a).map_err(|e| e.to_string())?;
    write_jsonl(&b.records, &mut buf_b).map_err(|e| e.to_string())?;
    let text_a = strip_wall_time(&String::from_utf8(buf_a).expect("utf8"));
    let text_b = strip_wall_time(&String::from_utf8(buf_b).expect("utf8"));
    check(
        text_a == text_b && !text_a.is_empty(),
        format!(
            "two R={} executions: {} bytes of wall-time-stripped JSONL compared",
            smoke_config.runs,
            text_a.len()
        ),
    )
}

/// Desk-scale runtime: the full benchmark fits in two hours and the smoke
/// benchmark in five minutes.
fn criterion_8(smoke_seconds: f64) -> Outcome {
    let config = BenchConfig {
        runs: 1000,
        samples: 1000.0,
        master_seed: 1,
        ..BenchConfig::default()
    };
    let started = Instant::now();
    let report = run_benchmark(&config).map_err(|e| e.to_string())?;
    let mut sink = Vec::new();
    write_jsonl(&report.records, &mut sink).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed().as_secs_f64();
    check(
        elapsed <= 7200.0 && smoke_seconds <= 300.0 && report.records.len() == 15_000,
        format!(
            "full R=1000 benchmark: {} records in {elapsed:.0}s (<=7200s); smoke R=50 in {smoke_seconds:.1}s (<=300s)",
            report.records.len()
        ),
    )
}

#[test]
fn acceptance() {
    let designs = designs();

    // Criteria 2-4 share one R=200 benchmark over all states and methods.
    let shared_config = BenchConfig {
        runs: 200,
        samples: 1000.0,
        master_seed: 42,
        ..BenchConfig::default()
    };
    let shared = run_benchmark(&shared_config).expect("shared R=200 benchmark");

    // Criterion 7's smoke benchmark doubles as criterion 8's smoke timing.
    let smoke_config = BenchConfig {
        runs: 50,
        samples: 1000.0,
        master_seed: 7,
        ..BenchConfig::default()
    };
    let smoke_started = Instant::now();
    run_benchmark(&smoke_config).expect("smoke benchmark");
    let smoke_seconds = smoke_started.elapsed().as_secs_f64();

    let outcomes: Vec<(usize, &str, Outcome)> = vec![
        (1, "noiseless oracles", criterion_1(&designs)),
        (2, "physicality split", criterion_2(&shared.records)),
        (3, "method equivalence", criterion_3(&shared.records)),
        (4, "trace-distance hierarchy", criterion_4(&shared.records)),
        (5, "relaxation soundness", criterion_5()),
        (6, "solver invariants", criterion_6(&designs)),
        (7, "determinism", criterion_7(&smoke_config)),
        (8, "desk-scale runtime", criterion_8(smoke_seconds)),
    ];

    let mut failures = 0usize;
    for (id, name, outcome) in &outcomes {
        match outcome {
            Ok(detail) => println!("PASS criterion {id} ({name}): {detail}"),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {id} ({name}): {detail}");
            }
        }
    }
    assert_eq!(failures, 0, "{failures} acceptance criteria failed");
}
