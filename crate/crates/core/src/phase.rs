//! Symmetric functions of eigenvalue vectors.
//!
//! Everything here acts on a [`Spectrum`]: the phase sum
//! `f(λ) = Σ arctan λᵢ`, the transform `g(λ) = −e^{−A f(λ)}` which is concave
//! on the supercritical set once `A` is large enough, the matrix `H` whose
//! positive semidefiniteness is equivalent to that concavity, and predicates
//! for membership in `{f ≥ (n−2)π/2 + δ}` with the explicit constants that
//! membership implies.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::report;
use crate::spectral::SymMatrix;
use crate::MAX_DIM;

/// Relative slack allowed when confirming the cone facts in floating point.
pub const CONE_FACT_RTOL: f64 = 1e-12;

/// Consecutive rejected draws after which [`sample_cone`] gives up.
pub const REJECTION_BUDGET: u64 = 1_000_000;

/// Largest exponent tried by [`scaling_counterexample`]: `t ≤ 2^60`.
pub const SCALING_MAX_DOUBLINGS: u32 = 60;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("spectrum length {0} outside 1..={MAX_DIM}")]
    Dimension(usize),
    #[error("spectrum entry {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("phase band needs 0 < delta < pi, got {0}")]
    InvalidDelta(f64),
    #[error("dimension mismatch: spectrum has n = {spectrum}, band has n = {band}")]
    DimensionMismatch { spectrum: usize, band: usize },
    #[error("cone fact {fact} fails for supercritical spectrum {values:?} (delta = {delta})")]
    ConeFactViolated {
        fact: &'static str,
        values: Vec<f64>,
        delta: f64,
    },
    #[error("rejection budget exhausted after {0} consecutive draws; delta too close to pi")]
    RejectionBudget(u64),
    #[error("sample count must be at least 1")]
    EmptySample,
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Eigenvalues sorted in descending order, `1 ≤ n ≤ 4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spectrum {
    values: [f64; MAX_DIM],
    n: usize,
}

impl Spectrum {
    /// Sorts `values` descending. Fails on non-finite entries or bad length.
    pub fn new(values: &[f64]) -> Result<Self, PhaseError> {
        let n = values.len();
        if n == 0 || n > MAX_DIM {
            return Err(PhaseError::Dimension(n));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(PhaseError::NonFinite { index, value });
        }
        let mut buf = [0.0; MAX_DIM];
        buf[..n].copy_from_slice(values);
        buf[..n].sort_by(|a, b| b.total_cmp(a));
        Ok(Self { values: buf, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values[..self.n]
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn smallest(&self) -> f64 {
        self.values[self.n - 1]
    }

    /// `t·λ` for `t > 0` (ordering preserved).
    pub fn scaled(&self, t: f64) -> Result<Self, PhaseError> {
        let v: Vec<f64> = self.values().iter().map(|x| t * x).collect();
        Self::new(&v)
    }

    /// Componentwise `w·self + (1−w)·other` of the sorted vectors.
    pub fn blend(&self, other: &Spectrum, w: f64) -> Result<Self, PhaseError> {
        if self.n != other.n {
            return Err(PhaseError::DimensionMismatch {
                spectrum: other.n,
                band: self.n,
            });
        }
        let v: Vec<f64> = self
            .values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| w * a + (1.0 - w) * b)
            .collect();
        Self::new(&v)
    }
}

impl Serialize for Spectrum {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        report::reals(self.values(), s)
    }
}

/// The supercritical band `[(n−2)π/2 + δ, nπ/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseBand {
    n: usize,
    #[serde(serialize_with = "report::real")]
    delta: f64,
}

impl PhaseBand {
    pub fn new(n: usize, delta: f64) -> Result<Self, PhaseError> {
        if n == 0 || n > MAX_DIM {
            return Err(PhaseError::Dimension(n));
        }
        if !(delta > 0.0 && delta < PI) {
            return Err(PhaseError::InvalidDelta(delta));
        }
        Ok(Self { n, delta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Lower end `(n−2)π/2 + δ`.
    pub fn threshold(&self) -> f64 {
        critical_phase(self.n) + self.delta
    }

    /// Open upper end `nπ/2`.
    pub fn ceiling(&self) -> f64 {
        self.n as f64 * FRAC_PI_2
    }

    /// Same `n`, margin scaled by `fraction ∈ (0, 1]`.
    pub fn shrunk(&self, fraction: f64) -> Result<Self, PhaseError> {
        Self::new(self.n, self.delta * fraction)
    }

    pub fn contains_phase(&self, phase: f64) -> bool {
        phase >= self.threshold()
    }
}

/// `(n−2)π/2`, the critical phase.
pub fn critical_phase(n: usize) -> f64 {
    (n as f64 - 2.0) * FRAC_PI_2
}

/// `Σ arctan λᵢ`.
pub fn phase_sum(s: &Spectrum) -> f64 {
    s.values().iter().map(|x| x.atan()).sum()
}

/// `σ_k(values)`, with `σ₀ = 1` and `σ_k = 0` for `k > n`.
pub fn elementary_symmetric(values: &[f64], k: usize) -> f64 {
    if k > values.len() {
        return 0.0;
    }
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &x in values {
        for j in (1..=k).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e[k]
}

/// `det(A·𝟙𝟙ᵀ + 2 diag λ) = A·2^{n−1}σ_{n−1}(λ) + 2ⁿσ_n(λ)`.
pub fn concavity_det(a: f64, s: &Spectrum) -> f64 {
    let n = s.n();
    let v = s.values();
    a * 2f64.powi(n as i32 - 1) * elementary_symmetric(v, n - 1)
        + 2f64.powi(n as i32) * elementary_symmetric(v, n)
}

/// `H_ij = (A + 2λᵢδᵢⱼ) / ((1+λᵢ²)(1+λⱼ²))`, so that `∂²g = −A e^{−Af} H`.
pub fn h_matrix(a: f64, s: &Spectrum) -> SymMatrix {
    let v = s.values();
    SymMatrix::from_upper(s.n(), |i, j| {
        let num = if i == j { a + 2.0 * v[i] } else { a };
        num / ((1.0 + v[i] * v[i]) * (1.0 + v[j] * v[j]))
    })
    .expect("spectrum dimension is within matrix bounds")
}

/// Concavity constant `A = max(1, 3/tan δ)`.
///
/// Positive semidefiniteness of `H` on the band needs `A·Σ1/λᵢ + 2 < 0`
/// whenever `λₙ < 0`; since `Σ1/λᵢ ≤ −tan δ` there, `A > 2/tan δ` suffices.
pub fn choose_a(band: &PhaseBand) -> f64 {
    (3.0 / band.delta().tan()).max(1.0)
}

/// `g(λ) = −exp(−A f(λ))`.
pub fn g_value(a: f64, s: &Spectrum) -> f64 {
    -(-a * phase_sum(s)).exp()
}

/// `∂g/∂λᵢ = A e^{−Af} / (1+λᵢ²)`.
pub fn g_gradient(a: f64, s: &Spectrum) -> Vec<f64> {
    let scale = a * (-a * phase_sum(s)).exp();
    s.values().iter().map(|x| scale / (1.0 + x * x)).collect()
}

/// The five consequences of membership in the supercritical set.
///
/// Items that are vacuous for `n = 1` (they involve `λ_{n−1}`) report `true`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeDiagnostics {
    /// `λ_{n−1} > 0`.
    pub leading_positive: bool,
    /// `|λₙ| ≤ λ_{n−1}`.
    pub last_bounded: bool,
    /// `Σ λᵢ ≥ 0`.
    pub trace_nonnegative: bool,
    /// `λₙ ≥ −1/tan δ`.
    pub last_lower_bound: bool,
    /// `λₙ < 0 ⇒ Σ 1/λᵢ ≤ −tan δ`.
    pub reciprocal_sum: bool,
}

impl ConeDiagnostics {
    pub fn all(&self) -> bool {
        self.leading_positive
            && self.last_bounded
            && self.trace_nonnegative
            && self.last_lower_bound
            && self.reciprocal_sum
    }

    /// Name of the first failing item, if any.
    pub fn first_failure(&self) -> Option<&'static str> {
        [
            (self.leading_positive, "lambda_{n-1} > 0"),
            (self.last_bounded, "|lambda_n| <= lambda_{n-1}"),
            (self.trace_nonnegative, "sum lambda_i >= 0"),
            (self.last_lower_bound, "lambda_n >= -1/tan(delta)"),
            (self.reciprocal_sum, "sum 1/lambda_i <= -tan(delta)"),
        ]
        .into_iter()
        .find(|(ok, _)| !ok)
        .map(|(_, name)| name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConeVerdict {
    pub inside: bool,
    #[serde(serialize_with = "report::real")]
    pub phase: f64,
    #[serde(serialize_with = "report::real")]
    pub threshold: f64,
    /// `phase − threshold`.
    #[serde(serialize_with = "report::real")]
    pub margin: f64,
    /// `C(δ) = 1/tan δ`, the lower-bound constant for `−λₙ`.
    #[serde(serialize_with = "report::real")]
    pub lower_bound_constant: f64,
    /// `Σ 1/λᵢ` when `λₙ < 0`.
    #[serde(serialize_with = "report::opt_real")]
    pub reciprocal_sum: Option<f64>,
    pub diagnostics: ConeDiagnostics,
}

/// Evaluates the five cone facts without judging membership.
pub fn cone_diagnostics(s: &Spectrum, delta: f64) -> (ConeDiagnostics, Option<f64>) {
    let v = s.values();
    let n = s.n();
    let last = s.smallest();
    let tol = |scale: f64| CONE_FACT_RTOL * (1.0 + scale.abs());

    let (leading_positive, last_bounded) = if n >= 2 {
        let prev = v[n - 2];
        (prev > 0.0, last.abs() <= prev + tol(prev))
    } else {
        (true, true)
    };
    let trace: f64 = v.iter().sum();
    let magnitude: f64 = v.iter().map(|x| x.abs()).sum();
    let trace_nonnegative = n < 2 || trace >= -tol(magnitude);

    let c = 1.0 / delta.tan();
    let last_lower_bound = last >= -c - tol(c);

    let recip = (last < 0.0).then(|| v.iter().map(|x| 1.0 / x).sum::<f64>());
    let reciprocal_sum = match recip {
        Some(r) => {
            let scale: f64 = v.iter().map(|x| (1.0 / x).abs()).sum();
            r <= -delta.tan() + tol(scale)
        }
        None => true,
    };
    (
        ConeDiagnostics {
            leading_positive,
            last_bounded,
            trace_nonnegative,
            last_lower_bound,
            reciprocal_sum,
        },
        recip,
    )
}

/// Membership in `{f ≥ (n−2)π/2 + δ}` together with the cone facts.
///
/// Returns [`PhaseError::ConeFactViolated`] if the spectrum is inside the
/// band but one of the facts fails.
pub fn cone_membership(s: &Spectrum, band: &PhaseBand) -> Result<ConeVerdict, PhaseError> {
    if s.n() != band.n() {
        return Err(PhaseError::DimensionMismatch {
            spectrum: s.n(),
            band: band.n(),
        });
    }
    let phase = phase_sum(s);
    let threshold = band.threshold();
    let inside = phase >= threshold;
    let (diagnostics, reciprocal_sum) = cone_diagnostics(s, band.delta());
    if inside {
        if let Some(fact) = diagnostics.first_failure() {
            return Err(PhaseError::ConeFactViolated {
                fact,
                values: s.values().to_vec(),
                delta: band.delta(),
            });
        }
    }
    Ok(ConeVerdict {
        inside,
        phase,
        threshold,
        margin: phase - threshold,
        lower_bound_constant: 1.0 / band.delta().tan(),
        reciprocal_sum,
        diagnostics,
    })
}

/// Output of the rejection sampler, with the number of draws it took.
#[derive(Clone, Debug)]
pub struct ConeSample {
    pub spectra: Vec<Spectrum>,
    pub draws: u64,
}

/// Draws `count` spectra from the band by rejection in angle space.
///
/// Angles are uniform on `(−π/2 + ε, π/2 − ε)`; draws whose angle sum is
/// below the threshold are rejected; accepted angles map to `λ = tan θ`.
pub fn sample_cone(band: &PhaseBand, count: usize, seed: u64) -> Result<Vec<Spectrum>, PhaseError> {
    sample_cone_with_stats(band, count, seed).map(|s| s.spectra)
}

pub fn sample_cone_with_stats(
    band: &PhaseBand,
    count: usize,
    seed: u64,
) -> Result<ConeSample, PhaseError> {
    if count == 0 {
        return Err(PhaseError::EmptySample);
    }
    let n = band.n();
    let threshold = band.threshold();
    let hi = FRAC_PI_2 - f64::EPSILON;
    let lo = -hi;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spectra = Vec::with_capacity(count);
    let mut draws = 0u64;
    let mut theta = [0.0; MAX_DIM];
    let mut lambda = [0.0; MAX_DIM];
    while spectra.len() < count {
        let mut rejected = 0u64;
        loop {
            draws += 1;
            for t in theta[..n].iter_mut() {
                *t = rng.random_range(lo..hi);
            }
            if theta[..n].iter().sum::<f64>() >= threshold {
                for (l, t) in lambda[..n].iter_mut().zip(&theta[..n]) {
                    *l = t.tan();
                }
                let s = Spectrum::new(&lambda[..n])?;
                // tan can round an angle sum that clears the threshold to a
                // phase sum that does not.
                if phase_sum(&s) >= threshold {
                    spectra.push(s);
                    break;
                }
            }
            rejected += 1;
            if rejected >= REJECTION_BUDGET {
                return Err(PhaseError::RejectionBudget(rejected));
            }
        }
    }
    Ok(ConeSample { spectra, draws })
}

/// Smallest `t ∈ {1, 2, 4, …, 2^60}` with `concavity_det(A, t·λ) < 0`.
///
/// For `λ₁ ≥ … ≥ λ_{n−1} > 0 > λₙ`, `σₙ < 0` and the determinant equals
/// `2^{n−1} tⁿ σₙ (A Σ1/λᵢ / t + 2)`, which is negative for large `t`.
pub fn scaling_counterexample(s: &Spectrum, a: f64) -> Result<Option<f64>, PhaseError> {
    let n = s.n();
    let last = s.smallest();
    if n < 2 || !(s.values()[n - 2] > 0.0 && last < 0.0) {
        return Err(PhaseError::Precondition(format!(
            "need lambda_(n-1) > 0 > lambda_n, got {:?}",
            s.values()
        )));
    }
    if !(a > 0.0) {
        return Err(PhaseError::Precondition(format!("A must be positive, got {a}")));
    }
    for k in 0..=SCALING_MAX_DOUBLINGS {
        let t = 2f64.powi(k as i32);
        if concavity_det(a, &s.scaled(t)?) < 0.0 {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// Empirical concavity record for `g = −e^{−Af}` over a set of spectra.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcavityCertificate {
    #[serde(rename = "A", serialize_with = "report::real")]
    pub a: f64,
    pub band: PhaseBand,
    pub samples: usize,
    /// Smallest eigenvalue of `H` over all samples.
    #[serde(serialize_with = "report::real")]
    pub min_h_eigenvalue: f64,
    /// Smallest `λ_min(H) / (1 + max|H_ij|)` over all samples.
    #[serde(serialize_with = "report::real")]
    pub min_scaled_eigenvalue: f64,
    /// Spectrum attaining `min_scaled_eigenvalue`.
    pub witness: Option<Spectrum>,
}

impl ConcavityCertificate {
    /// True when `λ_min(H) ≥ −rtol·(1 + max|H_ij|)` held on every sample.
    pub fn holds(&self, rtol: f64) -> bool {
        self.min_scaled_eigenvalue >= -rtol
    }
}

/// Smallest eigenvalue of `H(A, s)` and its scale `1 + max|H_ij|`.
pub fn h_min_eigenvalue(a: f64, s: &Spectrum) -> Result<(f64, f64), crate::SpectralError> {
    let h = h_matrix(a, s);
    let pair = h.eigen_decompose()?;
    Ok((pair.spectrum.smallest(), 1.0 + h.max_abs()))
}

/// Builds a certificate from explicit spectra.
pub fn certify_concavity(
    a: f64,
    band: &PhaseBand,
    spectra: &[Spectrum],
) -> Result<ConcavityCertificate, crate::SpectralError> {
    let mut cert = ConcavityCertificate {
        a,
        band: *band,
        samples: 0,
        min_h_eigenvalue: f64::INFINITY,
        min_scaled_eigenvalue: f64::INFINITY,
        witness: None,
    };
    for s in spectra {
        let (min_eig, scale) = h_min_eigenvalue(a, s)?;
        cert.samples += 1;
        cert.min_h_eigenvalue = cert.min_h_eigenvalue.min(min_eig);
        let scaled = min_eig / scale;
        if scaled < cert.min_scaled_eigenvalue {
            cert.min_scaled_eigenvalue = scaled;
            cert.witness = Some(*s);
        }
    }
    Ok(cert)
}
