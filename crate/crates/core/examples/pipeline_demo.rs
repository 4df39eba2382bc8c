//! One simulated dataset pushed through all five estimators, with the
//! hybrid-vs-plain-ML trace distance printed at the end.

use ditomo::di::hybrid_estimate;
use ditomo::estimators::{linear_inversion, mle_estimate, MleConfig};
use ditomo::metrics::{fidelity_pure, trace_distance};
use ditomo::numerics::rng::Prng;
use ditomo::scenario::{build_joint_povm, build_partial_design, BellScenario};
use ditomo::simulation::{
    estimate_frequencies, make_test_state, sample_counts, target_ket, TestStateKind,
};

fn main() -> ditomo::Result<()> {
    let scenario = BellScenario::canonical();
    let full = build_joint_povm(&scenario)?;
    let (partial, subset) = build_partial_design(&scenario)?;

    let kind = TestStateKind::Tau2;
    let tau = make_test_state::<f64>(kind);
    let ket = target_ket::<f64>(kind);

    let mut rng = Prng::new(2024);
    let counts_full = sample_counts(&mut rng, &tau, &full, 1000.0)?;
    let counts_partial = sample_counts(&mut rng, &tau, &partial, 1000.0)?;
    println!(
        "state {kind}: {} full events, {} partial events",
        counts_full.total(),
        counts_partial.total()
    );

    let f_full = estimate_frequencies(&counts_full, &full, None)?;
    let f_partial = estimate_frequencies(&counts_partial, &partial, Some(&subset))?;
    let mle_config = MleConfig::default();

    let lin_full = linear_inversion(&f_full.frequencies, &full)?;
    let lin_partial = linear_inversion(&f_partial.frequencies, &partial)?;
    let ml_full = mle_estimate(&f_full.frequencies, &full, &mle_config)?;
    let ml_partial = mle_estimate(&f_partial.frequencies, &partial, &mle_config)?;
    let (hybrid, reg) = hybrid_estimate(&counts_full, &full, &Default::default(), &mle_config)?;

    let report = |name: &str, m: &ditomo::ComplexMatrix| -> ditomo::Result<()> {
        println!(
            "  {name:<14} fidelity {:.5}  distance to true {:.5}",
            fidelity_pure(m, &ket)?,
            trace_distance(m, tau.matrix())?
        );
        Ok(())
    };
    report("lin_full", &lin_full.matrix)?;
    report("lin_partial", &lin_partial.matrix)?;
    report("dd_ml_full", ml_full.state.matrix())?;
    report("dd_ml_partial", ml_partial.state.matrix())?;
    report("di_dd_ml", hybrid.state.matrix())?;

    println!(
        "DI stage: KL {:.3e}, min moment eigenvalue {:.3e}",
        reg.final_kl, reg.min_moment_eig
    );
    println!(
        "distance between di_dd_ml and dd_ml_full reconstructions: {:.5}",
        trace_distance(hybrid.state.matrix(), ml_full.state.matrix())?
    );
    Ok(())
}
