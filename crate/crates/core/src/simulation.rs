//! Target states, Born probabilities, Poissonian count sampling and
//! frequency estimation.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::numerics::eig::hermitian_eig;
use crate::numerics::mat::ComplexMatrix;
use crate::numerics::rng::{poisson_sample, Prng};
use crate::scalar::Scalar;
use crate::scenario::{DesignKind, EventSubset, PovmLabel, TomographyDesign};

/// A physical two-qubit state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T> {
    matrix: ComplexMatrix<T>,
}

impl<T: Scalar> DensityMatrix<T> {
    /// Validate and wrap a 4x4 density matrix.
    pub fn new(matrix: ComplexMatrix<T>) -> Result<Self> {
        matrix.require_hermitian()?;
        let trace = matrix.trace();
        if (trace.re - T::one()).abs() > T::STRUCTURAL_TOL || trace.im.abs() > T::STRUCTURAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "density matrix trace is {} + {}i, expected 1",
                trace.re, trace.im
            )));
        }
        let eig = hermitian_eig(&matrix)?;
        if eig.min_eigenvalue() < -T::PSD_TOL {
            return Err(Error::InvalidArgument(format!(
                "density matrix is not positive semidefinite (min eigenvalue {:e})",
                eig.min_eigenvalue()
            )));
        }
        Ok(Self { matrix })
    }

    /// Maximally mixed two-qubit state.
    pub fn maximally_mixed() -> Self {
        Self {
            matrix: ComplexMatrix::identity(4).scale_real(T::real(0.25)),
        }
    }

    /// Pure state `|psi><psi|` from a normalized 4-vector.
    pub fn from_pure(psi: &[Complex<T>]) -> Result<Self> {
        let norm_sq: T = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - T::one()).abs() > T::STRUCTURAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "state vector norm^2 is {norm_sq}, expected 1"
            )));
        }
        Self::new(ComplexMatrix::outer(psi))
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn min_eigenvalue(&self) -> Result<T> {
        Ok(hermitian_eig(&self.matrix)?.min_eigenvalue())
    }
}

/// The three benchmark states: white-noise mixtures of entangled kets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestStateKind {
    Tau1,
    Tau2,
    Tau3,
}

impl TestStateKind {
    pub const ALL: [TestStateKind; 3] = [
        TestStateKind::Tau1,
        TestStateKind::Tau2,
        TestStateKind::Tau3,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tau1" => Ok(TestStateKind::Tau1),
            "tau2" => Ok(TestStateKind::Tau2),
            "tau3" => Ok(TestStateKind::Tau3),
            other => Err(Error::Parse(format!(
                "unknown state kind '{other}' (expected tau1, tau2 or tau3)"
            ))),
        }
    }

    /// Mixing weight of the entangled component.
    pub fn noise_weight(self) -> f64 {
        match self {
            TestStateKind::Tau1 => 0.52,
            TestStateKind::Tau2 => 0.995,
            TestStateKind::Tau3 => 0.995,
        }
    }
}

impl std::fmt::Display for TestStateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TestStateKind::Tau1 => write!(f, "tau1"),
            TestStateKind::Tau2 => write!(f, "tau2"),
            TestStateKind::Tau3 => write!(f, "tau3"),
        }
    }
}

/// The pure ket each benchmark state is built from (and scored against).
pub fn target_ket<T: Scalar>(kind: TestStateKind) -> Vec<Complex<T>> {
    let zero = Complex::new(T::zero(), T::zero());
    match kind {
        TestStateKind::Tau1 | TestStateKind::Tau2 => {
            let amp = Complex::new(T::one() / T::real(2.0).sqrt(), T::zero());
            vec![amp, zero, zero, amp]
        }
        TestStateKind::Tau3 => {
            let alpha = T::real(0.961);
            let beta = T::real(0.276);
            let norm = (alpha * alpha + beta * beta).sqrt();
            vec![
                Complex::new(alpha / norm, T::zero()),
                zero,
                zero,
                Complex::new(beta / norm, T::zero()),
            ]
        }
    }
}

/// `tau = lambda |chi><chi| + (1 - lambda)/4 * identity`.
pub fn make_test_state<T: Scalar>(kind: TestStateKind) -> DensityMatrix<T> {
    let lambda = T::real(kind.noise_weight());
    let ket = target_ket::<T>(kind);
    let pure = ComplexMatrix::outer(&ket);
    let mixed = ComplexMatrix::identity(4).scale_real((T::one() - lambda) * T::real(0.25));
    let matrix = &pure.scale_real(lambda) + &mixed;
    DensityMatrix::new(matrix).expect("test states are physical by construction")
}

/// Random full-rank density matrix from the Hilbert-Schmidt ensemble
/// (`G G^dagger` normalized, `G` complex Gaussian). Used by the property
/// suites and the relaxation-soundness checks.
pub fn random_density_matrix<T: Scalar>(rng: &mut Prng) -> DensityMatrix<T> {
    let mut g = ComplexMatrix::<T>::zeros(4, 4);
    for i in 0..4 {
        for j in 0..4 {
            g[(i, j)] = Complex::new(T::real(rng.next_gaussian()), T::real(rng.next_gaussian()));
        }
    }
    let gg = g.matmul(&g.adjoint()).hermitize();
    let trace = gg.trace().re;
    DensityMatrix::new(gg.scale_real(T::one() / trace)).expect("Gram matrices are physical")
}

/// Outcome probabilities `P_mu = tr(M_mu rho)` in design order.
pub fn born_probabilities<T: Scalar>(
    rho: &DensityMatrix<T>,
    design: &TomographyDesign<T>,
) -> Vec<T> {
    design
        .povm
        .iter()
        .map(|(_, m)| m.trace_product(rho.matrix()).re)
        .collect()
}

/// Observed event counts keyed by (a, b, x, y).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    pub kind: DesignKind,
    pub counts: BTreeMap<(u8, u8, u8, u8), u64>,
}

impl CountTable {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn get(&self, a: u8, b: u8, x: u8, y: u8) -> u64 {
        self.counts.get(&(a, b, x, y)).copied().unwrap_or(0)
    }

    /// Serialize as CSV with header `a,b,x,y,count`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "a,b,x,y,count")?;
        for (&(a, b, x, y), &count) in &self.counts {
            writeln!(out, "{a},{b},{x},{y},{count}")?;
        }
        Ok(())
    }

    /// Parse the CSV format written by [`CountTable::write_csv`]. The design
    /// kind is inferred from the set of labeled events.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty counts file".into()))??;
        if header.trim() != "a,b,x,y,count" {
            return Err(Error::Parse(format!(
                "unexpected header '{}', expected 'a,b,x,y,count'",
                header.trim()
            )));
        }
        let mut counts = BTreeMap::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Parse(format!("malformed counts row '{line}'")));
            }
            let parse = |s: &str| -> Result<u8> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad field '{s}'")))
            };
            let (a, b, x, y) = (
                parse(fields[0])?,
                parse(fields[1])?,
                parse(fields[2])?,
                parse(fields[3])?,
            );
            if a > 1 || b > 1 || !(1..=3).contains(&x) || !(1..=3).contains(&y) {
                return Err(Error::Parse(format!(
                    "event label out of range in '{line}'"
                )));
            }
            let count: u64 = fields[4]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad count '{}'", fields[4])))?;
            if counts.insert((a, b, x, y), count).is_some() {
                return Err(Error::Parse(format!("duplicate event ({a},{b},{x},{y})")));
            }
        }
        let kind = match counts.len() {
            36 => DesignKind::Full,
            16 => DesignKind::Partial,
            n => {
                return Err(Error::Parse(format!(
                    "expected 36 (full) or 16 (partial) events, got {n}"
                )))
            }
        };
        Ok(Self { kind, counts })
    }
}

/// Frequencies aligned with a design's POVM order.
#[derive(Debug, Clone)]
pub struct FrequencyVector<T> {
    pub frequencies: Vec<T>,
    /// Estimated total number of events behind the frequencies.
    pub total_estimate: T,
    /// Number of entries clamped to zero during estimation.
    pub clamp_events: usize,
}

/// Independent Poisson draw per labeled event with mean `N * P_mu`.
///
/// The complement element of the partial design is not an observed event,
/// so no count is drawn for it.
pub fn sample_counts<T: Scalar>(
    rng: &mut Prng,
    rho: &DensityMatrix<T>,
    design: &TomographyDesign<T>,
    mean_total: f64,
) -> Result<CountTable> {
    if !(mean_total > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mean total count must be positive, got {mean_total}"
        )));
    }
    let probs = born_probabilities(rho, design);
    let mut counts = BTreeMap::new();
    for ((label, _), p) in design.povm.iter().zip(&probs) {
        if let PovmLabel::Event { a, b, x, y } = *label {
            let mean = mean_total * p.to_f64().unwrap_or(0.0).max(0.0);
            counts.insert((a, b, x, y), poisson_sample(rng, mean)?);
        }
    }
    Ok(CountTable {
        kind: design.kind,
        counts,
    })
}

/// Relative frequencies for a count table.
///
/// Full design: `f = N(abxy) / N` with `N` the grand total. Partial design:
/// the total is estimated from the normalization subset, the complement
/// frequency is `1 - sum(observed)`, clamped to zero (and the vector
/// renormalized) if negative; clamps are counted in the result.
pub fn estimate_frequencies<T: Scalar>(
    counts: &CountTable,
    design: &TomographyDesign<T>,
    subset: Option<&EventSubset<T>>,
) -> Result<FrequencyVector<T>> {
    if counts.kind != design.kind {
        return Err(Error::InvalidArgument(format!(
            "count table is for the {} design, expected {}",
            counts.kind, design.kind
        )));
    }
    match design.kind {
        DesignKind::Full => {
            let total = counts.total();
            if total == 0 {
                return Err(Error::DegenerateData("total count is zero".into()));
            }
            let n = T::real(total as f64);
            let mut frequencies: Vec<T> = design
                .labels()
                .map(|label| match label {
                    PovmLabel::Event { a, b, x, y } => {
                        T::real(counts.get(*a, *b, *x, *y) as f64) / n
                    }
                    PovmLabel::Complement => T::zero(),
                })
                .collect();
            renormalize(&mut frequencies);
            Ok(FrequencyVector {
                frequencies,
                total_estimate: n,
                clamp_events: 0,
            })
        }
        DesignKind::Partial => {
            let subset = subset.ok_or_else(|| {
                Error::InvalidArgument("partial-design estimation requires the event subset".into())
            })?;
            let norm_count: u64 = subset
                .normalization_subset
                .iter()
                .map(|label| match label {
                    PovmLabel::Event { a, b, x, y } => counts.get(*a, *b, *x, *y),
                    PovmLabel::Complement => 0,
                })
                .sum();
            if norm_count == 0 {
                return Err(Error::DegenerateData(
                    "normalization subset observed zero events".into(),
                ));
            }
            let total_estimate = T::real(norm_count as f64) / subset.alpha;
            let mut clamp_events = 0usize;
            let mut observed_sum = T::zero();
            let mut frequencies: Vec<T> = Vec::with_capacity(design.len());
            for label in design.labels() {
                match label {
                    PovmLabel::Event { a, b, x, y } => {
                        let f = T::real(counts.get(*a, *b, *x, *y) as f64) / total_estimate;
                        observed_sum += f;
                        frequencies.push(f);
                    }
                    PovmLabel::Complement => {
                        let mut fc = T::one() - observed_sum;
                        if fc < T::zero() {
                            fc = T::zero();
                            clamp_events += 1;
                        }
                        frequencies.push(fc);
                    }
                }
            }
            renormalize(&mut frequencies);
            Ok(FrequencyVector {
                frequencies,
                total_estimate,
                clamp_events,
            })
        }
    }
}

fn renormalize<T: Scalar>(frequencies: &mut [T]) {
    let sum: T = frequencies.iter().copied().sum();
    if sum > T::zero() {
        for f in frequencies.iter_mut() {
            *f /= sum;
        }
    }
}

/// Conditional frequencies `f(ab|xy) = N(abxy) / N(xy)` and the empirical
/// input distribution `f(xy) = N(xy) / N`, both row-major over (x, y).
pub fn conditional_frequencies<T: Scalar>(counts: &CountTable) -> Result<(Vec<[T; 4]>, Vec<T>)> {
    if counts.kind != DesignKind::Full {
        return Err(Error::InvalidArgument(
            "conditional frequencies require a full-design count table".into(),
        ));
    }
    let mut cond = Vec::with_capacity(9);
    let mut setting_totals = Vec::with_capacity(9);
    let total = counts.total();
    if total == 0 {
        return Err(Error::DegenerateData("total count is zero".into()));
    }
    for x in 1..=3u8 {
        for y in 1..=3u8 {
            let nxy: u64 = (0..2u8)
                .flat_map(|a| (0..2u8).map(move |b| (a, b)))
                .map(|(a, b)| counts.get(a, b, x, y))
                .sum();
            if nxy == 0 {
                return Err(Error::DegenerateData(format!(
                    "no events observed for setting pair ({x},{y})"
                )));
            }
            let n = T::real(nxy as f64);
            cond.push([
                T::real(counts.get(0, 0, x, y) as f64) / n,
                T::real(counts.get(0, 1, x, y) as f64) / n,
                T::real(counts.get(1, 0, x, y) as f64) / n,
                T::real(counts.get(1, 1, x, y) as f64) / n,
            ]);
            setting_totals.push(nxy);
        }
    }
    let n = T::real(total as f64);
    let f_xy: Vec<T> = setting_totals
        .iter()
        .map(|&nxy| T::real(nxy as f64) / n)
        .collect();
    Ok((cond, f_xy))
}

/// Write a 4x4 state as JSON: `{"format_version": 1, "matrix": [[[re, im], ...], ...]}`.
pub fn state_to_json(m: &ComplexMatrix<f64>) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = (0..m.rows())
        .map(|i| {
            let row: Vec<serde_json::Value> = (0..m.cols())
                .map(|j| serde_json::json!([m[(i, j)].re, m[(i, j)].im]))
                .collect();
            serde_json::Value::Array(row)
        })
        .collect();
    serde_json::json!({
        "format_version": 1,
        "matrix": rows,
    })
}

/// Parse the JSON format written by [`state_to_json`].
pub fn state_from_json(v: &serde_json::Value) -> Result<ComplexMatrix<f64>> {
    let rows = v
        .get("matrix")
        .and_then(|m| m.as_array())
        .ok_or_else(|| Error::Parse("missing 'matrix' array".into()))?;
    let n = rows.len();
    let mut out = ComplexMatrix::<f64>::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .filter(|r| r.len() == n)
            .ok_or_else(|| Error::Parse("ragged state matrix".into()))?;
        for (j, cell) in row.iter().enumerate() {
            let pair = cell
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| Error::Parse("state entries must be [re, im] pairs".into()))?;
            let re = pair[0]
                .as_f64()
                .ok_or_else(|| Error::Parse("bad re".into()))?;
            let im = pair[1]
                .as_f64()
                .ok_or_else(|| Error::Parse("bad im".into()))?;
            out[(i, j)] = Complex::new(re, im);
        }
    }
    Ok(out)
}
