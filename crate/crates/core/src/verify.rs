//! Executable property suites and post-solve verification.
//!
//! Every suite is deterministic for a fixed seed. Cases run in parallel and
//! are merged in case order. A failure records the inputs needed to replay
//! that case on its own.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::grid::{GridField, NodeHessian, ProblemSpec};
use crate::phase::{
    choose_a, concavity_det, cone_membership, g_value, h_min_eigenvalue, sample_cone,
    ConcavityCertificate, PhaseBand, PhaseError, Spectrum,
};
use crate::report;
use crate::solver::{laplace_solve, subsolution_gap, GForm, GapStats, NewtonConfig};
use crate::spectral::{
    cns_asymptotics_check, compression_check, eigen_decompose, linearization, operator_value, Entry, Frame,
    HermitianMatrix, SpectralError, SymMatrix,
};

pub const CONE_FACTS_SAMPLES: usize = 10_000;
pub const CONCAVITY_SAMPLES: usize = 100_000;
pub const SCHUR_HORN_SAMPLES: usize = 10_000;
pub const DET_IDENTITY_CASES: usize = 1_000;
pub const LINEARIZATION_CASES: usize = 100;
/// `λ_min(H) ≥ −CONCAVITY_RTOL·(1 + max|H_ij|)`.
pub const CONCAVITY_RTOL: f64 = 1e-9;
pub const SCHUR_HORN_SLACK: f64 = 1e-12;
/// Absolute slack of the segment-concavity check.
pub const SEGMENT_TOL: f64 = 1e-12;
pub const DET_IDENTITY_RTOL: f64 = 1e-10;
pub const LINEARIZATION_RTOL: f64 = 1e-6;
pub const LINEARIZATION_STEP: f64 = 1e-6;
/// Bound slack used by the comparison and boundary checks.
pub const COMPARISON_TOL: f64 = 1e-8;
pub const DEFAULT_SEED: u64 = 20_240_601;

/// One recorded failure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub case: usize,
    #[serde(serialize_with = "report::reals")]
    pub input: Vec<f64>,
    #[serde(serialize_with = "report::reals")]
    pub observed: Vec<f64>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub name: String,
    #[serde(serialize_with = "report::real")]
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: usize,
    pub failures: Vec<Failure>,
    /// Smallest signed margin over all cases (negative means a violation).
    #[serde(serialize_with = "report::real")]
    pub worst_margin: f64,
    pub seed: Option<u64>,
    pub pass: bool,
    /// Values reported without an assertion.
    pub diagnostics: Vec<Diagnostic>,
}

/// Result of one case before merging.
#[derive(Clone, Debug)]
struct Outcome {
    margin: f64,
    failure: Option<(Vec<f64>, Vec<f64>, String)>,
}

impl Outcome {
    fn ok(margin: f64) -> Self {
        Self { margin, failure: None }
    }

    fn fail(margin: f64, input: Vec<f64>, observed: Vec<f64>, note: impl Into<String>) -> Self {
        Self {
            margin,
            failure: Some((input, observed, note.into())),
        }
    }
}

impl SuiteReport {
    fn merge(suite: impl Into<String>, seed: Option<u64>, outcomes: Vec<Outcome>) -> Self {
        let mut failures = Vec::new();
        let mut worst = f64::INFINITY;
        let cases = outcomes.len();
        for (case, o) in outcomes.into_iter().enumerate() {
            worst = if o.margin.is_nan() { f64::NEG_INFINITY } else { worst.min(o.margin) };
            if let Some((input, observed, note)) = o.failure {
                failures.push(Failure {
                    case,
                    input,
                    observed,
                    note,
                });
            }
        }
        Self {
            suite: suite.into(),
            cases,
            pass: failures.is_empty(),
            failures,
            worst_margin: worst,
            seed,
            diagnostics: Vec::new(),
        }
    }

    fn with_diagnostic(mut self, name: &str, value: f64) -> Self {
        self.diagnostics.push(Diagnostic {
            name: name.to_string(),
            value,
        });
        self
    }
}

/// Cone facts on freshly sampled spectra.
pub fn suite_cone_facts(band: &PhaseBand, count: usize, seed: u64) -> Result<SuiteReport, PhaseError> {
    let spectra = sample_cone(band, count, seed)?;
    Ok(suite_cone_facts_on(band, &spectra, Some(seed)))
}

/// Signed margins of the five cone facts, smallest first in the fold.
fn fact_margins(s: &Spectrum, delta: f64) -> f64 {
    let v = s.values();
    let n = s.n();
    let last = s.smallest();
    let mut m = last + 1.0 / delta.tan();
    if n >= 2 {
        let prev = v[n - 2];
        m = m.min(prev).min(prev - last.abs()).min(v.iter().sum());
    }
    if last < 0.0 {
        m = m.min(-delta.tan() - v.iter().map(|x| 1.0 / x).sum::<f64>());
    }
    m
}

/// Cone facts on caller-provided spectra, each of which is expected inside.
pub fn suite_cone_facts_on(band: &PhaseBand, spectra: &[Spectrum], seed: Option<u64>) -> SuiteReport {
    let outcomes = spectra
        .par_iter()
        .map(|s| {
            let input = s.values().to_vec();
            let margin = fact_margins(s, band.delta());
            match cone_membership(s, band) {
                Ok(v) if v.inside && v.diagnostics.all() => Outcome::ok(margin),
                Ok(v) => {
                    let note = match (v.inside, v.diagnostics.first_failure()) {
                        (false, Some(f)) => format!("outside band; {f} fails"),
                        (false, None) => "outside band".to_string(),
                        (true, Some(f)) => format!("{f} fails"),
                        (true, None) => unreachable!("handled above"),
                    };
                    Outcome::fail(margin.min(v.margin), input, vec![v.phase, v.threshold], note)
                }
                Err(e) => Outcome::fail(margin.min(0.0), input, vec![], e.to_string()),
            }
        })
        .collect();
    SuiteReport::merge("cone_facts", seed, outcomes)
}

/// Concavity of `−e^{−Af}` on sampled spectra with `A = choose_a(band)`.
pub fn suite_concavity(
    band: &PhaseBand,
    count: usize,
    seed: u64,
) -> Result<(ConcavityCertificate, SuiteReport), SpectralError> {
    suite_concavity_with_a(band, choose_a(band), count, seed)
}

/// Concavity with an explicit `A`; small `A` is the negative control.
pub fn suite_concavity_with_a(
    band: &PhaseBand,
    a: f64,
    count: usize,
    seed: u64,
) -> Result<(ConcavityCertificate, SuiteReport), SpectralError> {
    let spectra = sample_cone(band, count, seed)?;
    let mins: Vec<(f64, f64)> = spectra
        .par_iter()
        .map(|s| h_min_eigenvalue(a, s))
        .collect::<Result<_, _>>()?;
    let mut outcomes: Vec<Outcome> = spectra
        .iter()
        .zip(&mins)
        .map(|(s, &(min_eig, scale))| {
            let margin = min_eig / scale + CONCAVITY_RTOL;
            if margin >= 0.0 {
                Outcome::ok(margin)
            } else {
                let mut input = vec![a];
                input.extend_from_slice(s.values());
                Outcome::fail(margin, input, vec![min_eig, scale], "H has a negative eigenvalue")
            }
        })
        .collect();
    // Concavity along segments between consecutive samples.
    let segment: Vec<Outcome> = spectra
        .par_chunks_exact(2)
        .map(|pair| {
            let (g0, g1) = (g_value(a, &pair[0]), g_value(a, &pair[1]));
            let mut worst = (f64::INFINITY, 0.0, 0.0, 0.0);
            for k in 1..=9 {
                let t = k as f64 / 10.0;
                let mix = pair[0].blend(&pair[1], t).expect("same dimension");
                let (gm, chord) = (g_value(a, &mix), t * g0 + (1.0 - t) * g1);
                let margin = gm - chord + SEGMENT_TOL;
                if margin < worst.0 {
                    worst = (margin, t, gm, chord);
                }
            }
            let (margin, t, gm, chord) = worst;
            if margin >= 0.0 {
                Outcome::ok(margin)
            } else {
                let mut input = vec![a, t];
                input.extend_from_slice(pair[0].values());
                input.extend_from_slice(pair[1].values());
                Outcome::fail(margin, input, vec![gm, chord], "g below chord on segment")
            }
        })
        .collect();
    outcomes.extend(segment);
    let mut cert = ConcavityCertificate {
        a,
        band: *band,
        samples: spectra.len(),
        min_h_eigenvalue: f64::INFINITY,
        min_scaled_eigenvalue: f64::INFINITY,
        witness: None,
    };
    for (s, &(min_eig, scale)) in spectra.iter().zip(&mins) {
        cert.min_h_eigenvalue = cert.min_h_eigenvalue.min(min_eig);
        let scaled = min_eig / scale;
        if scaled < cert.min_scaled_eigenvalue {
            cert.min_scaled_eigenvalue = scaled;
            cert.witness = Some(*s);
        }
    }
    let report = SuiteReport::merge("concavity", Some(seed), outcomes)
        .with_diagnostic("A", a)
        .with_diagnostic("min_H_eigenvalue", cert.min_h_eigenvalue);
    Ok((cert, report))
}

/// Compression of randomly conjugated supercritical matrices.
pub fn suite_schur_horn(n: usize, band: &PhaseBand, count: usize, seed: u64) -> Result<SuiteReport, SpectralError> {
    if !(2..=4).contains(&n) || band.n() != n {
        return Err(SpectralError::Precondition(format!(
            "need n in 2..=4 matching the band, got n = {n}, band n = {}",
            band.n()
        )));
    }
    let spectra = sample_cone(band, count, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5348_4f52_4e00);
    let frames: Vec<Frame<f64>> = (0..count).map(|_| Frame::random(n, &mut rng)).collect();
    let outcomes = spectra
        .par_iter()
        .zip(&frames)
        .map(|(s, q)| {
            let m = SymMatrix::diagonal(s.values()).expect("n <= 4").conjugated(q);
            schur_horn_case(&m, band)
        })
        .collect();
    Ok(SuiteReport::merge("schur_horn", Some(seed), outcomes))
}

/// One compression case on an explicit matrix.
pub fn schur_horn_on(matrices: &[SymMatrix], band: &PhaseBand) -> SuiteReport {
    let outcomes = matrices.par_iter().map(|m| schur_horn_case(m, band)).collect();
    SuiteReport::merge("schur_horn", None, outcomes)
}

fn flatten(m: &SymMatrix) -> Vec<f64> {
    let n = m.n();
    (0..n * n).map(|k| m.get(k / n, k % n)).collect()
}

fn schur_horn_case(m: &SymMatrix, band: &PhaseBand) -> Outcome {
    match compression_check(m, band) {
        Ok(v) => {
            let margin = v.slack();
            if margin >= -SCHUR_HORN_SLACK {
                Outcome::ok(margin)
            } else {
                Outcome::fail(
                    margin,
                    flatten(m),
                    vec![v.block_phase, v.phase_drop_bound, v.band_bound],
                    "compression slack below tolerance",
                )
            }
        }
        Err(SpectralError::InequalityViolated { what, lhs, rhs }) => {
            Outcome::fail(lhs - rhs, flatten(m), vec![lhs, rhs], what)
        }
        Err(e) => Outcome::fail(f64::NEG_INFINITY, flatten(m), vec![], e.to_string()),
    }
}

/// Closed-form determinant against the product of eigenvalues of
/// `A·11ᵀ + 2 diag λ`.
pub fn suite_det_identity(count: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(f64, Spectrum)> = (0..count)
        .map(|_| {
            let n = rng.random_range(1..=4usize);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            (rng.random_range(0.1..20.0), Spectrum::new(&v).expect("finite"))
        })
        .collect();
    let outcomes = cases
        .par_iter()
        .map(|(a, s)| {
            let v = s.values();
            let m = SymMatrix::from_upper(s.n(), |i, j| a + if i == j { 2.0 * v[i] } else { 0.0 }).expect("n <= 4");
            let mut input = vec![*a];
            input.extend_from_slice(v);
            match eigen_decompose(&m) {
                Ok(pair) => {
                    let oracle: f64 = pair.spectrum.values().iter().product();
                    let closed = concavity_det(*a, s);
                    // Floor for cancellation near singular matrices.
                    let floor = 1e-6 * m.max_abs().powi(s.n() as i32);
                    let rel = (closed - oracle).abs() / oracle.abs().max(floor);
                    let margin = DET_IDENTITY_RTOL - rel;
                    if margin >= 0.0 {
                        Outcome::ok(margin)
                    } else {
                        Outcome::fail(margin, input, vec![closed, oracle], "determinant mismatch")
                    }
                }
                Err(e) => Outcome::fail(f64::NEG_INFINITY, input, vec![], e.to_string()),
            }
        })
        .collect();
    SuiteReport::merge("det_identity", Some(seed), outcomes)
}

/// Bordered-matrix eigenvalue deviations over growing diagonal corners.
pub fn suite_cns(d: &[f64], a_offdiag: &[f64], corners: &[f64]) -> SuiteReport {
    let outcomes = corners
        .iter()
        .map(|&a| {
            let mut input = vec![a];
            input.extend_from_slice(d);
            input.extend_from_slice(a_offdiag);
            match cns_asymptotics_check(d, a_offdiag, a) {
                Ok(dev) => Outcome::ok(dev.bound - dev.tracked.max(dev.top_ratio)),
                Err(e) => Outcome::fail(f64::NEG_INFINITY, input, vec![], e.to_string()),
            }
        })
        .collect();
    SuiteReport::merge("cns_asymptotics", None, outcomes)
}

/// Central-difference directional derivative of `F` against `tr(F^{ij} E)`.
pub fn linearization_fd_error<T: Entry>(m: &HermitianMatrix<T>, e: &HermitianMatrix<T>) -> Result<(f64, f64), SpectralError> {
    let eps = LINEARIZATION_STEP;
    let plus = operator_value(&m.add_scaled(e, eps))?;
    let minus = operator_value(&m.add_scaled(e, -eps))?;
    let fd = (plus - minus) / (2.0 * eps);
    let lin = linearization(m)?.trace_product(e);
    Ok((fd, lin))
}

fn linearization_cases<T: Entry>(count: usize, rng: &mut ChaCha8Rng) -> Vec<(HermitianMatrix<T>, HermitianMatrix<T>)> {
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=4usize);
            let m = HermitianMatrix::<T>::from_upper(n, |_, _| T::sample(rng).scale(2.0)).expect("n <= 4");
            let e = HermitianMatrix::<T>::from_upper(n, |_, _| T::sample(rng)).expect("n <= 4");
            (m, e)
        })
        .collect()
}

fn linearization_outcome<T: Entry>(m: &HermitianMatrix<T>, e: &HermitianMatrix<T>) -> Outcome {
    let input: Vec<f64> = (0..m.n() * m.n())
        .flat_map(|k| {
            let (i, j) = (k / m.n(), k % m.n());
            [m.get(i, j).re(), m.get(i, j).im(), e.get(i, j).re(), e.get(i, j).im()]
        })
        .collect();
    match linearization_fd_error(m, e) {
        Ok((fd, lin)) => {
            let rel = (fd - lin).abs() / lin.abs().max(1e-6);
            let margin = LINEARIZATION_RTOL - rel;
            if margin >= 0.0 {
                Outcome::ok(margin)
            } else {
                Outcome::fail(margin, input, vec![fd, lin], "finite difference disagrees with linearization")
            }
        }
        Err(err) => Outcome::fail(f64::NEG_INFINITY, input, vec![], err.to_string()),
    }
}

/// Gradient check on random real symmetric and complex Hermitian matrices.
pub fn suite_linearization(count: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let real = linearization_cases::<f64>(count, &mut rng);
    let complex = linearization_cases::<Complex64>(count, &mut rng);
    let mut outcomes: Vec<Outcome> = real.par_iter().map(|(m, e)| linearization_outcome(m, e)).collect();
    outcomes.extend(complex.par_iter().map(|(m, e)| linearization_outcome::<Complex64>(m, e)).collect::<Vec<_>>());
    SuiteReport::merge("linearization", Some(seed), outcomes)
}

/// Post-solve checks: F-residual, comparison bounds, cone membership with
/// the Newton margin, and boundary exactness. Subsolution-gap statistics are
/// attached without an assertion.
pub fn suite_solution(spec: &ProblemSpec, u: &GridField, cfg: &NewtonConfig) -> Result<SuiteReport, crate::SolveError> {
    let domain = spec.domain();
    let band = spec.band();
    let a = choose_a(&band);
    let h = spec.h();
    let h_max = domain
        .interior_nodes()
        .into_iter()
        .map(|p| h.value(p))
        .fold(f64::NEG_INFINITY, f64::max);
    // Residual tolerance mapped through the scaled G-form Newton controls.
    let shift = GForm::for_target(spec, h).shift;
    let f_tol = cfg.residual_tol * (a * (h_max - shift)).exp() / a * (1.0 + 1e-6);
    let cone_band = band
        .shrunk(cfg.cone_slack)
        .map_err(|e| crate::GridError::Invariant(e.to_string()))?;
    let w = laplace_solve(spec.phi(), cfg.linear_rel_tol)?;
    let usub = spec.usub();

    let node_input = |p: usize| -> Vec<f64> {
        let mut v: Vec<f64> = domain.multi_index(p).into_iter().map(|i| i as f64).collect();
        v.push(u.value(p));
        v
    };
    let outcomes: Vec<Vec<Outcome>> = (0..domain.node_count())
        .into_par_iter()
        .map(|p| {
            let where_ = domain.describe_node(p);
            let mut out = Vec::with_capacity(3);
            if domain.is_boundary(p) {
                let exact = u.value(p).to_bits() == spec.phi().value(p).to_bits();
                out.push(if exact {
                    Outcome::ok(0.0)
                } else {
                    Outcome::fail(
                        -(u.value(p) - spec.phi().value(p)).abs(),
                        node_input(p),
                        vec![spec.phi().value(p)],
                        format!("boundary mismatch at node {where_}"),
                    )
                });
                return Ok(out);
            }
            let hess = NodeHessian::at(spec.setting(), domain, u.values(), p)?;
            let (phase, spectrum, _) = hess.linearize()?;
            let residual = (phase - h.value(p)).abs();
            out.push(if residual <= f_tol {
                Outcome::ok(f_tol - residual)
            } else {
                Outcome::fail(
                    f_tol - residual,
                    node_input(p),
                    vec![phase, h.value(p)],
                    format!("F-residual above tolerance at node {where_}"),
                )
            });
            let lower = u.value(p) - (usub.value(p) - COMPARISON_TOL);
            let upper = w.value(p) + COMPARISON_TOL - u.value(p);
            out.push(if lower >= 0.0 && upper >= 0.0 {
                Outcome::ok(lower.min(upper))
            } else {
                Outcome::fail(
                    lower.min(upper),
                    node_input(p),
                    vec![usub.value(p), w.value(p)],
                    format!("comparison bound violated at node {where_}"),
                )
            });
            out.push(match cone_membership(&spectrum, &cone_band) {
                Ok(v) if v.inside => Outcome::ok(v.margin),
                Ok(v) => Outcome::fail(
                    v.margin,
                    node_input(p),
                    vec![v.phase, v.threshold],
                    format!("spectrum outside the cone margin at node {where_}"),
                ),
                Err(e) => Outcome::fail(f64::NEG_INFINITY, node_input(p), spectrum.values().to_vec(), e.to_string()),
            });
            Ok(out)
        })
        .collect::<Result<_, crate::SolveError>>()?;
    let gap = GapStats::of(&subsolution_gap(spec, u)?);
    Ok(SuiteReport::merge("solution", None, outcomes.into_iter().flatten().collect())
        .with_diagnostic("f_residual_tolerance", f_tol)
        .with_diagnostic("subsolution_gap_min", gap.min)
        .with_diagnostic("subsolution_gap_max", gap.max)
        .with_diagnostic("subsolution_gap_mean", gap.mean))
}

/// Cone facts on the Hessian spectra of `ū` at interior nodes.
pub fn suite_hessian_cone(spec: &ProblemSpec) -> Result<SuiteReport, crate::SolveError> {
    let domain = spec.domain();
    let spectra: Vec<Spectrum> = domain
        .interior_nodes()
        .into_par_iter()
        .map(|p| {
            let (_, s, _) = NodeHessian::at(spec.setting(), domain, spec.usub().values(), p)?.linearize()?;
            Ok(s)
        })
        .collect::<Result<_, crate::SolveError>>()?;
    let mut report = suite_cone_facts_on(&spec.band(), &spectra, None);
    report.suite = "hessian_cone".into();
    Ok(report)
}

/// Every library suite at default sample counts.
pub fn run_all_suites(seed: u64) -> Result<Vec<SuiteReport>, SpectralError> {
    let deltas = [0.2, 0.5, 1.0];
    let mut reports = Vec::new();
    for n in 2..=4 {
        for &delta in &deltas {
            let band = PhaseBand::new(n, delta)?;
            let mut r = suite_cone_facts(&band, CONE_FACTS_SAMPLES, seed)?;
            r.suite = format!("cone_facts[n={n},delta={delta}]");
            reports.push(r);
            let (_, mut r) = suite_concavity(&band, CONCAVITY_SAMPLES, seed)?;
            r.suite = format!("concavity[n={n},delta={delta}]");
            reports.push(r);
        }
    }
    for n in 3..=4 {
        let band = PhaseBand::new(n, 0.5)?;
        let mut r = suite_schur_horn(n, &band, SCHUR_HORN_SAMPLES, seed)?;
        r.suite = format!("schur_horn[n={n}]");
        reports.push(r);
    }
    reports.push(suite_det_identity(DET_IDENTITY_CASES, seed));
    reports.push(suite_cns(&[1.0, -0.5, 2.0], &[0.5, -0.3, 0.2], &[1e2, 1e3, 1e4]));
    reports.push(suite_linearization(LINEARIZATION_CASES, seed));
    Ok(reports)
}
