//! Damped Newton on `G(D²u) = ψ`, the continuity method and barrier solves.
//!
//! The unknowns are the interior node values; boundary nodes keep the
//! Dirichlet data bit-for-bit. At each Newton step the Jacobian row of an
//! interior node is the central-difference stencil of the real second-order
//! operator `Σ c_kl ∂_k ∂_l`, where `c = A e^{−AF} C` and `C` is the
//! linearization of `F` with respect to the real Hessian entries (in the
//! complex setting this folds `F^{ij̄} ∂ᵢ∂_{j̄}` into real axes).

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{eval_operator_field, BoxDomain, GridError, GridField, NodeHessian, ProblemSpec};
use crate::linalg::{self, LinearSolveError, SparseRows};
use crate::phase::{choose_a, critical_phase};
use crate::report;
use crate::spectral::{SpectralError, SymMatrix};
use crate::verify::SuiteReport;

/// Allowed undershoot of `F(D²ū) − h` when accepting a subsolution.
pub const SUBSOLUTION_TOL: f64 = 1e-12;
/// Allowed undershoot of the right-hand side below the band threshold.
pub const BAND_TOL: f64 = 1e-12;
pub const CONTINUITY_MAX_STEP: f64 = 0.25;
pub const CONTINUITY_GROWTH: f64 = 1.5;
pub const CONTINUITY_MIN_STEP: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("Newton did not converge in {iters} iterations (G-residual {residual:e})")]
    MaxItersExceeded { iters: usize, residual: f64 },
    #[error("line search stalled at iteration {iteration} after {backtracks} halvings (G-residual {residual:e}, {reason})")]
    LineSearchStall {
        iteration: usize,
        backtracks: usize,
        residual: f64,
        reason: &'static str,
    },
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(#[from] LinearSolveError),
    #[error("right-hand side outside the supercritical band at node {node}: {value} not in [{threshold}, {ceiling})")]
    SupercriticalViolation {
        node: String,
        value: f64,
        threshold: f64,
        ceiling: f64,
    },
    #[error("continuity method stalled at t = {t} (step {step:e})")]
    ContinuityStall { t: f64, step: f64 },
    #[error("usub is not a subsolution: F(D2 usub) - h = {margin:e} at node {node}")]
    SubsolutionRejected { node: String, margin: f64 },
    #[error("initial guess leaves the cone at node {node}: phase {phase}, required {required}")]
    InitialGuessOutsideCone { node: String, phase: f64, required: f64 },
    #[error("field differs from the boundary data at node {node}")]
    BoundaryMismatch { node: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NewtonConfig {
    /// Sup-norm tolerance on `G(D²u) − ψ`.
    #[serde(serialize_with = "report::real")]
    pub residual_tol: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
    #[serde(serialize_with = "report::real")]
    pub linear_rel_tol: f64,
    /// Iterates keep `F ≥ (n−2)π/2 + cone_slack·δ`.
    #[serde(serialize_with = "report::real")]
    pub cone_slack: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            max_iters: 50,
            max_backtracks: 30,
            linear_rel_tol: 1e-12,
            cone_slack: 0.5,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.residual_tol > 0.0 && self.linear_rel_tol > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if self.max_iters == 0 || self.max_backtracks == 0 {
            return Err("iteration limits must be positive".into());
        }
        if !(self.cone_slack > 0.0 && self.cone_slack < 1.0) {
            return Err(format!("cone_slack must lie in (0, 1), got {}", self.cone_slack));
        }
        Ok(())
    }
}

/// Per-run Newton statistics.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NewtonLog {
    pub iterations: usize,
    /// Accepted G-residual sup-norms, starting with the initial guess.
    #[serde(serialize_with = "report::reals")]
    pub residuals: Vec<f64>,
    pub backtracks: usize,
    pub linear_solves: usize,
    /// Smallest `F − (n−2)π/2` over accepted iterates and interior nodes.
    #[serde(serialize_with = "report::real")]
    pub min_cone_margin: f64,
}

impl NewtonLog {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PathEntry {
    #[serde(serialize_with = "report::real")]
    pub t: f64,
    pub newton_iters: usize,
    #[serde(serialize_with = "report::real")]
    pub final_residual: f64,
}

/// Summary of the subsolution gap field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapStats {
    #[serde(serialize_with = "report::real")]
    pub min: f64,
    #[serde(serialize_with = "report::real")]
    pub max: f64,
    #[serde(serialize_with = "report::real")]
    pub mean: f64,
}

impl GapStats {
    pub fn of(field: &GridField) -> Self {
        let vals: Vec<f64> = field.values().iter().copied().filter(|v| v.is_finite()).collect();
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
        Self { min, max, mean }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub path: Vec<PathEntry>,
    pub total_newton_iters: usize,
    pub total_linear_solves: usize,
    /// Continuity steps abandoned after a Newton failure.
    pub rejected_steps: usize,
    #[serde(rename = "A_used", serialize_with = "report::real")]
    pub a_used: f64,
    #[serde(serialize_with = "report::real")]
    pub delta: f64,
    /// `sup |G(D²u) − ψ|` with `G = −e^{−AF}`, `ψ = −e^{−Ah}`.
    #[serde(rename = "residual_sup_G", serialize_with = "report::real")]
    pub residual_sup_g: f64,
    /// The same residual in the scaled form Newton controls.
    #[serde(rename = "residual_sup_G_scaled", serialize_with = "report::real")]
    pub residual_sup_g_scaled: f64,
    #[serde(rename = "residual_sup_F", serialize_with = "report::real")]
    pub residual_sup_f: f64,
    /// `min_{t, x} rhs_t(x) − ((n−2)π/2 + δ)`.
    #[serde(serialize_with = "report::real")]
    pub min_band_margin: f64,
    /// Smallest `F − (n−2)π/2` over every accepted iterate.
    #[serde(serialize_with = "report::real")]
    pub min_cone_margin: f64,
    pub subsolution_gap: GapStats,
    #[serde(serialize_with = "report::real")]
    pub wall_time: f64,
    pub verification: Option<SuiteReport>,
}

/// `Δ_h w = f` at interior nodes, `w = boundary` on the boundary.
pub fn poisson_solve(boundary: &GridField, f: &GridField, rel_tol: f64) -> Result<GridField, SolveError> {
    let domain = boundary.domain();
    if f.domain() != domain {
        return Err(GridError::FieldMismatch("source lives on a different domain".into()).into());
    }
    let interior = domain.interior_nodes();
    let index = interior_index(domain, &interior);
    let dim = domain.dim();
    let mut a = SparseRows::with_capacity(interior.len(), interior.len() * (2 * dim + 1));
    let mut b = Vec::with_capacity(interior.len());
    let mut row = Vec::with_capacity(2 * dim + 1);
    let bv = boundary.values();
    for &p in &interior {
        let mut rhs = f.value(p);
        let mut diag = 0.0;
        for k in 0..dim {
            let w = 1.0 / (domain.spacing(k) * domain.spacing(k));
            diag -= 2.0 * w;
            for q in [p + domain.stride(k), p - domain.stride(k)] {
                match index[q] {
                    Some(c) => row.push((c, w)),
                    None => rhs -= w * bv[q],
                }
            }
        }
        row.push((index[p].expect("interior"), diag));
        a.push_row(&mut row);
        b.push(rhs);
    }
    let sol = linalg::solve(&a, &b, rel_tol)?;
    let mut values = bv.to_vec();
    for (&p, x) in interior.iter().zip(sol.x) {
        values[p] = x;
    }
    Ok(boundary.with_values(values)?)
}

/// Discrete harmonic extension of the boundary values of `boundary`.
pub fn laplace_solve(boundary: &GridField, rel_tol: f64) -> Result<GridField, SolveError> {
    poisson_solve(boundary, &GridField::constant(boundary.domain(), 0.0), rel_tol)
}

/// `2·dim`-point Laplacian at an interior node.
pub fn discrete_laplacian(field: &GridField, node: usize) -> f64 {
    let d = field.domain();
    let v = field.values();
    (0..d.dim())
        .map(|k| {
            let s = d.stride(k);
            let h = d.spacing(k);
            (v[node + s] - 2.0 * v[node] + v[node - s]) / (h * h)
        })
        .sum()
}

fn interior_index(domain: &BoxDomain, interior: &[usize]) -> Vec<Option<usize>> {
    let mut index = vec![None; domain.node_count()];
    for (i, &p) in interior.iter().enumerate() {
        index[p] = Some(i);
    }
    index
}

fn check_boundary(spec: &ProblemSpec, u: &GridField) -> Result<(), SolveError> {
    if u.domain() != spec.domain() {
        return Err(GridError::FieldMismatch("field lives on a different domain".into()).into());
    }
    let phi = spec.phi().values();
    for (p, (&x, &y)) in u.values().iter().zip(phi).enumerate() {
        if spec.domain().is_boundary(p) && x.to_bits() != y.to_bits() {
            return Err(SolveError::BoundaryMismatch {
                node: spec.domain().describe_node(p),
            });
        }
    }
    Ok(())
}

fn check_rhs(spec: &ProblemSpec, rhs: &GridField) -> Result<f64, SolveError> {
    let band = spec.band();
    let (threshold, ceiling) = (band.threshold(), band.ceiling());
    let mut min_margin = f64::INFINITY;
    for p in spec.domain().interior_nodes() {
        let v = rhs.value(p);
        if !(v >= threshold - BAND_TOL && v < ceiling) {
            return Err(SolveError::SupercriticalViolation {
                node: spec.domain().describe_node(p),
                value: v,
                threshold,
                ceiling,
            });
        }
        min_margin = min_margin.min(v - threshold);
    }
    Ok(min_margin)
}

/// `G = −e^{−A(F − c)}` with `c = max(0, max rhs)`.
///
/// The factor `e^{Ac}` keeps `|ψ| ≥ 1` at the largest target so that an
/// absolute tolerance on the G-residual still controls the F-residual
/// (`|F − rhs| ≲ tol / A`). Since `c ≥ 0`, the unscaled residual is never
/// larger than the scaled one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GForm {
    pub a: f64,
    pub shift: f64,
}

impl GForm {
    pub fn for_target(spec: &ProblemSpec, target: &GridField) -> Self {
        let max = spec
            .domain()
            .interior_nodes()
            .into_iter()
            .map(|p| target.value(p))
            .fold(0.0, f64::max);
        Self {
            a: choose_a(&spec.band()),
            shift: max,
        }
    }

    pub fn value(&self, phase: f64) -> f64 {
        -(-self.a * (phase - self.shift)).exp()
    }

    /// `dG/dF`.
    pub fn slope(&self, phase: f64) -> f64 {
        self.a * (-self.a * (phase - self.shift)).exp()
    }

    /// Converts a scaled residual back to `G = −e^{−AF}` units.
    pub fn unscaled(&self, residual: f64) -> f64 {
        residual * (-self.a * self.shift).exp()
    }
}

/// Sup-norm G-residual and the smallest cone margin of a candidate.
struct Evaluation {
    residual: f64,
    margin: f64,
    margin_node: usize,
}

fn evaluate(spec: &ProblemSpec, values: &[f64], psi: &[f64], interior: &[usize], g: GForm) -> Result<Evaluation, SolveError> {
    let critical = critical_phase(spec.setting().n());
    let per_node: Vec<(f64, f64)> = interior
        .par_iter()
        .zip(psi.par_iter())
        .map(|(&p, &target)| {
            let phase = spec.node_hessian(values, p)?.operator_value()?;
            Ok(((g.value(phase) - target).abs(), phase - critical))
        })
        .collect::<Result<_, SolveError>>()?;
    let mut eval = Evaluation {
        residual: 0.0,
        margin: f64::INFINITY,
        margin_node: 0,
    };
    for (i, (r, m)) in per_node.into_iter().enumerate() {
        // NaN residuals must never look like progress.
        eval.residual = if r.is_nan() { f64::INFINITY } else { eval.residual.max(r) };
        if !(m >= eval.margin) {
            eval.margin = m;
            eval.margin_node = interior[i];
        }
    }
    Ok(eval)
}

/// Jacobian row and residual at one interior node.
fn assemble_row(
    spec: &ProblemSpec,
    values: &[f64],
    index: &[Option<usize>],
    p: usize,
    target: f64,
    g: GForm,
) -> Result<(Vec<(usize, f64)>, f64), SolveError> {
    let domain = spec.domain();
    let (phase, _, c) = spec.node_hessian(values, p)?.linearize()?;
    let scale = g.slope(phase);
    let residual = g.value(phase) - target;
    let mut row = Vec::with_capacity(stencil_size(domain.dim()));
    let mut push = |q: usize, w: f64| {
        if let Some(col) = index[q] {
            row.push((col, w));
        }
    };
    let dim = domain.dim();
    for k in 0..dim {
        let (sk, hk) = (domain.stride(k), domain.spacing(k));
        let w = scale * c.get(k, k) / (hk * hk);
        push(p + sk, w);
        push(p - sk, w);
        push(p, -2.0 * w);
        for l in k + 1..dim {
            let (sl, hl) = (domain.stride(l), domain.spacing(l));
            let w = scale * 2.0 * c.get(k, l) / (4.0 * hk * hl);
            push(p + sk + sl, w);
            push(p - sk - sl, w);
            push(p + sk - sl, -w);
            push(p - sk + sl, -w);
        }
    }
    Ok((row, residual))
}

fn stencil_size(dim: usize) -> usize {
    1 + 2 * dim + 2 * dim * (dim - 1)
}

/// Newton on `G(D²u) = −e^{−A·rhs}` from `init`.
pub fn newton_solve(
    spec: &ProblemSpec,
    rhs: &GridField,
    init: &GridField,
    cfg: &NewtonConfig,
) -> Result<(GridField, NewtonLog), SolveError> {
    cfg.validate().map_err(|m| GridError::Invariant(format!("Newton config: {m}")))?;
    check_boundary(spec, init)?;
    if rhs.domain() != spec.domain() {
        return Err(GridError::FieldMismatch("rhs lives on a different domain".into()).into());
    }
    check_rhs(spec, rhs)?;
    let band = spec.band();
    let required = cfg.cone_slack * band.delta();
    let critical = critical_phase(band.n());
    let domain = spec.domain();
    let interior = domain.interior_nodes();
    let index = interior_index(domain, &interior);
    let g = GForm::for_target(spec, rhs);
    let psi: Vec<f64> = interior.iter().map(|&p| g.value(rhs.value(p))).collect();

    let mut u = init.values().to_vec();
    let mut current = evaluate(spec, &u, &psi, &interior, g)?;
    if !(current.margin >= required) {
        return Err(SolveError::InitialGuessOutsideCone {
            node: domain.describe_node(current.margin_node),
            phase: current.margin + critical,
            required: required + critical,
        });
    }
    let mut log = NewtonLog {
        residuals: vec![current.residual],
        min_cone_margin: current.margin,
        ..NewtonLog::default()
    };
    let mut row_buf = Vec::new();
    while current.residual > cfg.residual_tol {
        if log.iterations == cfg.max_iters {
            return Err(SolveError::MaxItersExceeded {
                iters: log.iterations,
                residual: current.residual,
            });
        }
        let rows: Vec<(Vec<(usize, f64)>, f64)> = interior
            .par_iter()
            .zip(psi.par_iter())
            .map(|(&p, &target)| assemble_row(spec, &u, &index, p, target, g))
            .collect::<Result<_, _>>()?;
        let mut jac = SparseRows::with_capacity(interior.len(), interior.len() * stencil_size(domain.dim()));
        let mut b = Vec::with_capacity(interior.len());
        for (row, r) in rows {
            row_buf.clear();
            row_buf.extend(row);
            jac.push_row(&mut row_buf);
            b.push(-r);
        }
        let step = linalg::solve(&jac, &b, cfg.linear_rel_tol)?;
        log.linear_solves += 1;
        log.iterations += 1;

        let mut alpha = 1.0;
        let mut halvings = 0;
        loop {
            let mut trial = u.clone();
            for (&p, d) in interior.iter().zip(&step.x) {
                trial[p] += alpha * d;
            }
            let eval = evaluate(spec, &trial, &psi, &interior, g)?;
            let in_cone = eval.margin >= required;
            if in_cone && eval.residual < current.residual {
                u = trial;
                current = eval;
                break;
            }
            if halvings == cfg.max_backtracks {
                return Err(SolveError::LineSearchStall {
                    iteration: log.iterations,
                    backtracks: halvings,
                    residual: current.residual,
                    reason: if in_cone { "no residual decrease" } else { "cone constraint" },
                });
            }
            alpha *= 0.5;
            halvings += 1;
        }
        log.backtracks += halvings;
        log.residuals.push(current.residual);
        log.min_cone_margin = log.min_cone_margin.min(current.margin);
    }
    Ok((init.with_values(u)?, log))
}

/// Verdict of the subsolution check.
#[derive(Clone, Debug)]
pub struct SubsolutionVerdict {
    pub pass: bool,
    pub boundary_exact: bool,
    /// `F(D²ū) − h`, NaN on the boundary.
    pub margin: GridField,
    pub worst_margin: f64,
    pub worst_node: Option<usize>,
}

/// `F(D²ū) ≥ h − 1e−12` at every interior node and `ū = φ` on the boundary.
pub fn verify_subsolution(spec: &ProblemSpec) -> Result<SubsolutionVerdict, SolveError> {
    let f = eval_operator_field(spec, spec.usub())?;
    let mut worst = f64::INFINITY;
    let mut worst_node = None;
    let margin: Vec<f64> = f
        .values()
        .iter()
        .zip(spec.h().values())
        .enumerate()
        .map(|(p, (fv, hv))| {
            if spec.domain().is_boundary(p) {
                return f64::NAN;
            }
            let m = fv - hv;
            if !(m >= worst) {
                worst = m;
                worst_node = Some(p);
            }
            m
        })
        .collect();
    let boundary_exact = check_boundary(spec, spec.usub()).is_ok();
    Ok(SubsolutionVerdict {
        pass: boundary_exact && worst >= -SUBSOLUTION_TOL,
        boundary_exact,
        margin: f.with_values(margin)?,
        worst_margin: worst,
        worst_node,
    })
}

/// `Re tr(F^{ij}(D²u) · (D²ū − D²u))` at interior nodes, NaN on the boundary.
pub fn subsolution_gap(spec: &ProblemSpec, u: &GridField) -> Result<GridField, SolveError> {
    if u.domain() != spec.domain() {
        return Err(GridError::FieldMismatch("field lives on a different domain".into()).into());
    }
    let domain = spec.domain();
    let values: Vec<f64> = (0..domain.node_count())
        .into_par_iter()
        .map(|p| {
            if domain.is_boundary(p) {
                return Ok(f64::NAN);
            }
            let at_u = spec.node_hessian(u.values(), p)?;
            let at_sub = spec.node_hessian(spec.usub().values(), p)?;
            Ok(at_u.gap_towards(&at_sub)?)
        })
        .collect::<Result<_, SolveError>>()?;
    Ok(u.with_values(values)?)
}

/// Sup-norm of `F(D²u) − target` over interior nodes.
pub fn f_residual(spec: &ProblemSpec, u: &GridField, target: &GridField) -> Result<f64, SolveError> {
    let f = eval_operator_field(spec, u)?;
    Ok(spec
        .domain()
        .interior_nodes()
        .into_iter()
        .map(|p| (f.value(p) - target.value(p)).abs())
        .fold(0.0, f64::max))
}

/// Sup-norm of `G(D²u) − ψ` over interior nodes in the scaled form of
/// [`GForm::for_target`], the quantity Newton drives below `residual_tol`.
pub fn g_residual(spec: &ProblemSpec, u: &GridField, target: &GridField) -> Result<f64, SolveError> {
    let g = GForm::for_target(spec, target);
    let f = eval_operator_field(spec, u)?;
    Ok(spec
        .domain()
        .interior_nodes()
        .into_iter()
        .map(|p| (g.value(f.value(p)) - g.value(target.value(p))).abs())
        .fold(0.0, f64::max))
}

fn blend(h: &GridField, h0: &GridField, t: f64) -> Result<GridField, GridError> {
    if t == 1.0 {
        return Ok(h.clone());
    }
    let values = h.values().iter().zip(h0.values()).map(|(a, b)| t * a + (1.0 - t) * b).collect();
    h.with_values(values)
}

/// Continuity path `F(D²u_t) = t·h + (1−t)·F(D²ū)` from `t = 0` to `t = 1`.
pub fn continuity_solve(spec: &ProblemSpec, cfg: &NewtonConfig) -> Result<(GridField, SolveReport), SolveError> {
    let started = Instant::now();
    let verdict = verify_subsolution(spec)?;
    if !verdict.pass {
        let node = verdict.worst_node.unwrap_or(0);
        return Err(SolveError::SubsolutionRejected {
            node: spec.domain().describe_node(node),
            margin: verdict.worst_margin,
        });
    }
    let h0 = eval_operator_field(spec, spec.usub())?;
    let mut min_band_margin = check_rhs(spec, &h0)?.min(check_rhs(spec, spec.h())?);

    let mut u = spec.usub().clone();
    let mut path = vec![PathEntry {
        t: 0.0,
        newton_iters: 0,
        final_residual: g_residual(spec, &u, &h0)?,
    }];
    let mut t = 0.0;
    let mut step = CONTINUITY_MAX_STEP;
    let mut total_newton = 0;
    let mut linear_solves = 0;
    let mut rejected = 0;
    let mut min_cone_margin = f64::INFINITY;
    while t < 1.0 {
        let t_next = if t + step >= 1.0 { 1.0 } else { t + step };
        let rhs = blend(spec.h(), &h0, t_next)?;
        min_band_margin = min_band_margin.min(check_rhs(spec, &rhs)?);
        match newton_solve(spec, &rhs, &u, cfg) {
            Ok((next, log)) => {
                total_newton += log.iterations;
                linear_solves += log.linear_solves;
                min_cone_margin = min_cone_margin.min(log.min_cone_margin);
                path.push(PathEntry {
                    t: t_next,
                    newton_iters: log.iterations,
                    final_residual: log.final_residual(),
                });
                u = next;
                t = t_next;
                step = (step * CONTINUITY_GROWTH).min(CONTINUITY_MAX_STEP);
            }
            Err(
                SolveError::MaxItersExceeded { .. }
                | SolveError::LineSearchStall { .. }
                | SolveError::LinearSolveFailure(_),
            ) => {
                rejected += 1;
                step *= 0.5;
                if step < CONTINUITY_MIN_STEP {
                    return Err(SolveError::ContinuityStall { t, step });
                }
            }
            Err(e) => return Err(e),
        }
    }
    let gap = subsolution_gap(spec, &u)?;
    let scaled_residual = g_residual(spec, &u, spec.h())?;
    let report = SolveReport {
        path,
        total_newton_iters: total_newton,
        total_linear_solves: linear_solves,
        rejected_steps: rejected,
        a_used: choose_a(&spec.band()),
        delta: spec.delta(),
        residual_sup_g: GForm::for_target(spec, spec.h()).unscaled(scaled_residual),
        residual_sup_g_scaled: scaled_residual,
        residual_sup_f: f_residual(spec, &u, spec.h())?,
        min_band_margin,
        min_cone_margin,
        subsolution_gap: GapStats::of(&gap),
        wall_time: started.elapsed().as_secs_f64(),
        verification: None,
    };
    Ok((u, report))
}

/// Coefficient matrix `A e^{−AF} C` of the linearized G-operator at a node.
pub fn g_coefficients(spec: &ProblemSpec, u: &GridField, node: usize) -> Result<SymMatrix, SolveError> {
    let a = choose_a(&spec.band());
    let (phase, _, c) = NodeHessian::at(spec.setting(), spec.domain(), u.values(), node)?.linearize()?;
    Ok(c.scaled(a * (-a * phase).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Setting;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn half_square(x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn make_spec(setting: Setting, d: &BoxDomain, u: impl Fn(&[f64]) -> f64, h: GridField, delta: f64) -> ProblemSpec {
        let usub = GridField::from_fn(d, u);
        ProblemSpec::new(d.clone(), setting, h, usub.clone(), usub, delta).unwrap()
    }

    fn max_interior_error(d: &BoxDomain, u: &GridField, exact: impl Fn(&[f64]) -> f64) -> f64 {
        d.interior_nodes()
            .into_iter()
            .map(|p| (u.value(p) - exact(&d.coords(p))).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn laplace_reproduces_affine_and_harmonic_quadratic() {
        let d = BoxDomain::new(&[-1.0, 0.0], &[1.0, 2.0], 17).unwrap();
        let affine = |x: &[f64]| 0.3 + 2.0 * x[0] - 0.7 * x[1];
        let boundary = GridField::from_fn(&d, |x| if x.is_empty() { 0.0 } else { affine(x) });
        let w = laplace_solve(&boundary, 1e-12).unwrap();
        assert!(max_interior_error(&d, &w, affine) < 1e-11);
        let q = |x: &[f64]| x[0] * x[0] - x[1] * x[1];
        let w = laplace_solve(&GridField::from_fn(&d, q), 1e-12).unwrap();
        assert!(max_interior_error(&d, &w, q) < 1e-11);
    }

    #[test]
    fn laplace_random_boundary_residual_and_max_principle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let d = BoxDomain::unit(3, 9).unwrap();
        let values: Vec<f64> = (0..d.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let phi = GridField::from_values(&d, values).unwrap();
        let w = laplace_solve(&phi, 1e-12).unwrap();
        let (lo, hi) = d
            .boundary_mask()
            .iter()
            .zip(phi.values())
            .filter(|(b, _)| **b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (_, v)| (l.min(*v), h.max(*v)));
        let scale = 1.0 / (d.spacing(0) * d.spacing(0));
        for p in 0..d.node_count() {
            if d.is_boundary(p) {
                assert_eq!(w.value(p).to_bits(), phi.value(p).to_bits());
            } else {
                assert!(discrete_laplacian(&w, p).abs() <= 1e-10 * scale);
                assert!(w.value(p) >= lo && w.value(p) <= hi);
            }
        }
    }

    #[test]
    fn quadratic_is_fixed_point() {
        let d = BoxDomain::unit(2, 17).unwrap();
        let h = GridField::constant(&d, FRAC_PI_2);
        let spec = make_spec(Setting::real(2).unwrap(), &d, half_square, h.clone(), 0.5);
        let (u, log) = newton_solve(&spec, &h, spec.usub(), &NewtonConfig::default()).unwrap();
        assert!(log.iterations <= 3);
        assert!(max_interior_error(&d, &u, half_square) < 1e-8);
    }

    #[test]
    fn rhs_below_band_is_rejected() {
        let d = BoxDomain::unit(2, 9).unwrap();
        let h = GridField::constant(&d, FRAC_PI_2);
        let spec = make_spec(Setting::real(2).unwrap(), &d, half_square, h.clone(), 0.5);
        let mut bad = h.values().to_vec();
        bad[d.node_at(&[3, 4])] = 0.2;
        let rhs = h.with_values(bad).unwrap();
        let err = newton_solve(&spec, &rhs, spec.usub(), &NewtonConfig::default()).unwrap_err();
        match err {
            SolveError::SupercriticalViolation { node, .. } => assert_eq!(node, "(3,4)"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn manufactured_same_grid_identity() {
        let d = BoxDomain::unit(2, 17).unwrap();
        let a = 1.5;
        let exact = |x: &[f64]| 0.5 * a * (x[0] * x[0] + x[1] * x[1]) + 0.05 * x[0].sin() * x[1].sin();
        let setting = Setting::real(2).unwrap();
        // Start from the quadratic with the exact boundary data.
        let ustar = GridField::from_fn(&d, exact);
        let probe = ProblemSpec::new(
            d.clone(),
            setting,
            GridField::constant(&d, 2.0 * (a).atan()),
            ustar.clone(),
            ustar.clone(),
            0.5,
        )
        .unwrap();
        let rhs = eval_operator_field(&probe, &ustar).unwrap();
        let init_values: Vec<f64> = (0..d.node_count())
            .map(|p| {
                if d.is_boundary(p) {
                    ustar.value(p)
                } else {
                    0.5 * a * d.coords(p).iter().map(|v| v * v).sum::<f64>()
                }
            })
            .collect();
        let init = ustar.with_values(init_values).unwrap();
        let (u, log) = newton_solve(&probe, &rhs, &init, &NewtonConfig::default()).unwrap();
        assert!(log.residuals.windows(2).all(|w| w[1] < w[0]));
        assert!(max_interior_error(&d, &u, exact) < 1e-9);
    }

    #[test]
    fn continuity_zero_iterations_when_subsolution_solves() {
        let d = BoxDomain::unit(2, 9).unwrap();
        let k: f64 = 3.0;
        let setting = Setting::real(2).unwrap();
        let spec = make_spec(setting, &d, |x| k * half_square(x), GridField::constant(&d, 2.0 * k.atan()), 0.5);
        let (_, report) = continuity_solve(&spec, &NewtonConfig::default()).unwrap();
        assert_eq!(report.path.last().unwrap().t, 1.0);
        assert!(report.path.iter().all(|e| e.newton_iters == 0));
        assert_eq!(report.total_newton_iters, 0);
    }

    #[test]
    fn continuity_quadratic_subsolution() {
        let d = BoxDomain::unit(2, 17).unwrap();
        let k: f64 = 4.0;
        let h = GridField::constant(&d, 2.0 * (k / 2.0).atan());
        let spec = make_spec(Setting::real(2).unwrap(), &d, |x| k * half_square(x), h, 0.3);
        let cfg = NewtonConfig::default();
        let (u, report) = continuity_solve(&spec, &cfg).unwrap();
        assert_eq!(report.path.last().unwrap().t, 1.0);
        assert!(report.residual_sup_g <= cfg.residual_tol);
        assert!(report.min_band_margin >= -1e-12);
        let w = laplace_solve(spec.phi(), 1e-12).unwrap();
        for p in 0..d.node_count() {
            assert!(u.value(p) >= spec.usub().value(p) - 1e-8);
            assert!(u.value(p) <= w.value(p) + 1e-8);
        }
    }

    #[test]
    fn failing_subsolution_is_a_precondition_error() {
        let d = BoxDomain::unit(2, 9).unwrap();
        let k: f64 = 1.0;
        let h = GridField::constant(&d, 2.0 * k.atan() + 0.01);
        let spec = make_spec(Setting::real(2).unwrap(), &d, |x| k * half_square(x), h, 0.3);
        let v = verify_subsolution(&spec).unwrap();
        assert!(!v.pass);
        assert!((v.worst_margin + 0.01).abs() < 1e-12);
        assert!(matches!(
            continuity_solve(&spec, &NewtonConfig::default()),
            Err(SolveError::SubsolutionRejected { .. })
        ));
    }

    #[test]
    fn subsolution_margin_matches_brute_force() {
        let d = BoxDomain::unit(2, 11).unwrap();
        let u = |x: &[f64]| 2.0 * half_square(x) + 0.1 * (3.0 * x[0]).sin() * (2.0 * x[1]).cos();
        let h = GridField::from_fn(&d, |x| 2.0 * 2f64.atan() + 0.05 * (x[0] - 0.5));
        let spec = make_spec(Setting::real(2).unwrap(), &d, u, h, 0.3);
        let v = verify_subsolution(&spec).unwrap();
        let mut brute = true;
        for p in d.interior_nodes() {
            let m = crate::grid::hessian_real(spec.usub(), p).unwrap();
            let f = crate::spectral::operator_value(&m).unwrap();
            brute &= f >= spec.h().value(p) - 1e-12;
            assert!((v.margin.value(p) - (f - spec.h().value(p))).abs() < 1e-15);
        }
        assert_eq!(v.pass, brute);
    }

    #[test]
    fn gap_zero_at_subsolution_and_first_order_otherwise() {
        let d = BoxDomain::unit(2, 11).unwrap();
        let spec = make_spec(
            Setting::real(2).unwrap(),
            &d,
            |x| 1.5 * half_square(x),
            GridField::constant(&d, FRAC_PI_2 + 0.1),
            0.1,
        );
        let gap = subsolution_gap(&spec, spec.usub()).unwrap();
        assert!(d.interior_nodes().iter().all(|&p| gap.value(p) == 0.0));

        let bump = GridField::from_fn(&d, |x| (PI * x[0]).sin() * (PI * x[1]).sin() * x[0]);
        let eps = 1e-6;
        let perturbed = spec
            .usub()
            .with_values(spec.usub().values().iter().zip(bump.values()).map(|(u, b)| u + eps * b).collect())
            .unwrap();
        let gap = subsolution_gap(&spec, &perturbed).unwrap();
        for p in d.interior_nodes() {
            let lin = crate::spectral::linearization(&crate::grid::hessian_real(spec.usub(), p).unwrap()).unwrap();
            let expected = -eps * lin.trace_product(&crate::grid::hessian_real(&bump, p).unwrap());
            assert!((gap.value(p) - expected).abs() < 1e-3 * eps, "{} vs {expected}", gap.value(p));
        }
    }

    #[test]
    fn complex_one_matches_poisson() {
        let d = BoxDomain::unit(2, 17).unwrap();
        let c = 1f64.tan() + 0.3;
        let h = GridField::constant(&d, 1.0);
        let spec = make_spec(Setting::complex(1).unwrap(), &d, |x| c * (x[0] * x[0] + x[1] * x[1]), h, 1.0);
        let (u, _) = continuity_solve(&spec, &NewtonConfig::default()).unwrap();
        let f = GridField::constant(&d, 4.0 * 1f64.tan());
        let w = poisson_solve(spec.phi(), &f, 1e-12).unwrap();
        let err = u.values().iter().zip(w.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }
}
