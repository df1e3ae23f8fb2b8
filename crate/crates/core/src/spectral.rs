//! Small dense symmetric / Hermitian matrices and the matrix-level operator.
//!
//! Real symmetric and complex Hermitian matrices share one implementation,
//! [`HermitianMatrix<T>`], parameterised by the entry type. Storage is a
//! fixed 4×4 array; construction only ever evaluates the upper triangle and
//! mirrors it, so `a[j][i] == conj(a[i][j])` holds bit-for-bit.
//!
//! Eigen-decomposition is a cyclic Jacobi iteration with a deterministic
//! sweep order. For `n = 2` the first rotation diagonalizes exactly, which is
//! the usual closed form.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::phase::{phase_sum, PhaseBand, PhaseError, Spectrum};
use crate::report;
use crate::MAX_DIM;

/// Off-diagonal entries below `ROTATION_TOL · max|M_ij|` are not rotated.
pub const ROTATION_TOL: f64 = 1e-14;

/// Sweep budget for the Jacobi iteration.
pub const MAX_SWEEPS: usize = 64;

/// Slack used by the matrix inequalities below.
pub const INEQUALITY_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("matrix dimension {0} outside 1..={MAX_DIM}")]
    Dimension(usize),
    #[error("matrix is not Hermitian at ({row}, {col})")]
    NotHermitian { row: usize, col: usize },
    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{what} violated: lhs = {lhs}, rhs = {rhs}")]
    InequalityViolated { what: &'static str, lhs: f64, rhs: f64 },
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

/// Scalar entry of a Hermitian matrix: `f64` or `Complex64`.
pub trait Entry:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn modulus(self) -> f64;
    fn scale(self, x: f64) -> Self;
    fn is_finite(self) -> bool;
    /// Uniform sample with real and imaginary parts in `[-1, 1)`.
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Entry for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random_range(-1.0..1.0)
    }
}

impl Entry for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }
}

type Block<T> = [[T; MAX_DIM]; MAX_DIM];

fn zero_block<T: Entry>() -> Block<T> {
    [[T::zero(); MAX_DIM]; MAX_DIM]
}

fn check_dim(n: usize) -> Result<(), SpectralError> {
    if n == 0 || n > MAX_DIM {
        Err(SpectralError::Dimension(n))
    } else {
        Ok(())
    }
}

/// Dense Hermitian matrix of dimension `1 ≤ n ≤ 4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermitianMatrix<T: Entry> {
    n: usize,
    a: Block<T>,
}

/// Real symmetric matrix (`D²u`).
pub type SymMatrix = HermitianMatrix<f64>;
/// Complex Hermitian matrix (`u_{ij̄}`).
pub type HermMatrix = HermitianMatrix<Complex64>;

impl<T: Entry> HermitianMatrix<T> {
    /// Builds the matrix from its upper triangle (`i ≤ j`). Diagonal entries
    /// keep only their real part; the lower triangle is the conjugate mirror.
    pub fn from_upper(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self, SpectralError> {
        check_dim(n)?;
        let mut a = zero_block();
        for i in 0..n {
            a[i][i] = T::from_real(f(i, i).re());
            for j in i + 1..n {
                let v = f(i, j);
                a[i][j] = v;
                a[j][i] = v.conj();
            }
        }
        let m = Self { n, a };
        m.check_finite()?;
        Ok(m)
    }

    /// Builds from full rows, requiring exact Hermitian symmetry.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, SpectralError> {
        let n = rows.len();
        check_dim(n)?;
        let mut a = zero_block();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(SpectralError::Dimension(row.len()));
            }
            a[i][..n].copy_from_slice(row);
        }
        for i in 0..n {
            if a[i][i].im() != 0.0 {
                return Err(SpectralError::NotHermitian { row: i, col: i });
            }
            for j in i + 1..n {
                if a[j][i] != a[i][j].conj() {
                    return Err(SpectralError::NotHermitian { row: j, col: i });
                }
            }
        }
        let m = Self { n, a };
        m.check_finite()?;
        Ok(m)
    }

    fn check_finite(&self) -> Result<(), SpectralError> {
        for i in 0..self.n {
            for j in 0..self.n {
                if !self.a[i][j].is_finite() {
                    return Err(SpectralError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn zeros(n: usize) -> Result<Self, SpectralError> {
        Self::from_upper(n, |_, _| T::zero())
    }

    pub fn identity(n: usize) -> Result<Self, SpectralError> {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Result<Self, SpectralError> {
        Self::from_upper(d.len(), |i, j| if i == j { T::from_real(d[i]) } else { T::zero() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        assert!(i < self.n && j < self.n, "index ({i}, {j}) out of range for n = {}", self.n);
        self.a[i][j]
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for row in &self.a[..self.n] {
            for v in &row[..self.n] {
                m = m.max(v.modulus());
            }
        }
        m
    }

    pub fn scaled(&self, x: f64) -> Self {
        self.map_upper(|_, _, v| v.scale(x))
    }

    /// `self + x·other`.
    pub fn add_scaled(&self, other: &Self, x: f64) -> Self {
        assert_eq!(self.n, other.n);
        self.map_upper(|i, j, v| v + other.a[i][j].scale(x))
    }

    fn map_upper(&self, mut f: impl FnMut(usize, usize, T) -> T) -> Self {
        let mut a = zero_block();
        for i in 0..self.n {
            a[i][i] = T::from_real(f(i, i, self.a[i][i]).re());
            for j in i + 1..self.n {
                let v = f(i, j, self.a[i][j]);
                a[i][j] = v;
                a[j][i] = v.conj();
            }
        }
        Self { n: self.n, a }
    }

    /// `Re tr(self · other)`; the pairing under which the linearization is
    /// the derivative of the operator.
    pub fn trace_product(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += (self.a[i][j] * other.a[j][i]).re();
            }
        }
        s
    }

    /// Plain product `self · other` as a full (not necessarily Hermitian) block.
    pub fn product(&self, other: &Self) -> Vec<Vec<T>> {
        assert_eq!(self.n, other.n);
        let n = self.n;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).fold(T::zero(), |acc, k| acc + self.a[i][k] * other.a[k][j]))
                    .collect()
            })
            .collect()
    }

    /// `Q M Q*`.
    pub fn conjugated(&self, q: &Frame<T>) -> Self {
        assert_eq!(self.n, q.n);
        let n = self.n;
        let mut mq = zero_block::<T>();
        for i in 0..n {
            for j in 0..n {
                mq[i][j] = (0..n).fold(T::zero(), |acc, k| acc + self.a[i][k] * q.q[j][k].conj());
            }
        }
        Self::from_upper(n, |i, j| (0..n).fold(T::zero(), |acc, k| acc + q.q[i][k] * mq[k][j]))
            .expect("dimension already validated")
    }

    /// Leading `k × k` principal block.
    pub fn leading_block(&self, k: usize) -> Result<Self, SpectralError> {
        if k > self.n {
            return Err(SpectralError::Dimension(k));
        }
        Self::from_upper(k, |i, j| self.a[i][j])
    }

    pub fn eigen_decompose(&self) -> Result<EigenPair<T>, SpectralError> {
        eigen_decompose(self)
    }
}

/// Orthonormal (real orthogonal or complex unitary) column frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame<T: Entry> {
    n: usize,
    /// `q[i][k]` is component `i` of column `k`.
    q: Block<T>,
}

impl<T: Entry> Frame<T> {
    pub fn identity(n: usize) -> Self {
        let mut q = zero_block();
        for (i, row) in q.iter_mut().enumerate().take(n) {
            row[i] = T::from_real(1.0);
        }
        Self { n, q }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, k: usize) -> T {
        self.q[i][k]
    }

    /// `max |(Q*Q − I)_{ij}|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut err = 0.0f64;
        for a in 0..self.n {
            for b in 0..self.n {
                let dot = (0..self.n).fold(T::zero(), |acc, i| acc + self.q[i][a].conj() * self.q[i][b]);
                let target = if a == b { 1.0 } else { 0.0 };
                err = err.max((dot - T::from_real(target)).modulus());
            }
        }
        err
    }

    /// Random orthonormal frame: Gram–Schmidt on uniform entries.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        loop {
            let mut q = zero_block::<T>();
            for row in q.iter_mut().take(n) {
                for v in row.iter_mut().take(n) {
                    *v = T::sample(rng);
                }
            }
            let mut ok = true;
            for k in 0..n {
                for prev in 0..k {
                    let dot = (0..n).fold(T::zero(), |acc, i| acc + q[i][prev].conj() * q[i][k]);
                    for row in q.iter_mut().take(n) {
                        row[k] = row[k] - row[prev] * dot;
                    }
                }
                let norm = (0..n).map(|i| q[i][k].modulus().powi(2)).sum::<f64>().sqrt();
                if norm < 1e-3 {
                    ok = false;
                    break;
                }
                for row in q.iter_mut().take(n) {
                    row[k] = row[k].scale(1.0 / norm);
                }
            }
            if ok {
                return Self { n, q };
            }
        }
    }
}

/// Spectrum plus frame with `M = Q diag(λ) Q*`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenPair<T: Entry> {
    pub spectrum: Spectrum,
    pub frame: Frame<T>,
}

impl<T: Entry> EigenPair<T> {
    /// `Q diag(f(λ)) Q*`. Frame-independent whenever `f` is a function of
    /// the eigenvalue alone, so repeated eigenvalues need no care.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix<T> {
        let n = self.spectrum.n();
        let fv: Vec<f64> = self.spectrum.values().iter().map(|&l| f(l)).collect();
        let q = &self.frame.q;
        HermitianMatrix::from_upper(n, |i, j| {
            (0..n).fold(T::zero(), |acc, k| acc + (q[i][k] * q[j][k].conj()).scale(fv[k]))
        })
        .expect("dimension already validated")
    }

    pub fn reconstruct(&self) -> HermitianMatrix<T> {
        self.spectral_map(|l| l)
    }
}

/// Cyclic Jacobi eigen-decomposition; eigenvalues sorted descending.
pub fn eigen_decompose<T: Entry>(m: &HermitianMatrix<T>) -> Result<EigenPair<T>, SpectralError> {
    let n = m.n;
    let mut a = m.a;
    let mut q = Frame::<T>::identity(n);
    let tol = ROTATION_TOL * m.max_abs();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for r in p + 1..n {
                let b = a[p][r].modulus();
                if b <= tol {
                    continue;
                }
                rotated = true;
                rotate(&mut a, &mut q, n, p, r);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SpectralError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].re().total_cmp(&a[i][i].re()).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&k| a[k][k].re()).collect();
    let mut sorted = Frame::<T>::identity(n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            sorted.q[i][dst] = q.q[i][src];
        }
    }
    Ok(EigenPair {
        spectrum: Spectrum::new(&values)?,
        frame: sorted,
    })
}

/// One unitary rotation in the `(p, r)` plane zeroing `a[p][r]`.
///
/// `J = D R` where `D = diag(1, conj(u))` makes the pivot real
/// (`u = a_pr/|a_pr|`) and `R` is the real Jacobi rotation for
/// `[[a_pp, |a_pr|], [|a_pr|, a_rr]]`.
fn rotate<T: Entry>(a: &mut Block<T>, q: &mut Frame<T>, n: usize, p: usize, r: usize) {
    let b = a[p][r].modulus();
    let u = a[p][r].scale(1.0 / b);
    let theta = (a[p][p].re() - a[r][r].re()) / (2.0 * b);
    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
    let t = -1.0 / (theta + sign * theta.hypot(1.0));
    let c = 1.0 / t.hypot(1.0);
    let s = t * c;

    let jpp = T::from_real(c);
    let jpr = T::from_real(s);
    let jrp = u.conj().scale(-s);
    let jrr = u.conj().scale(c);

    // A J: columns p and r change.
    for row in a.iter_mut().take(n) {
        let (ap, ar) = (row[p], row[r]);
        row[p] = ap * jpp + ar * jrp;
        row[r] = ap * jpr + ar * jrr;
    }
    // J* (A J): rows p and r change.
    for j in 0..n {
        let (ap, ar) = (a[p][j], a[r][j]);
        a[p][j] = jpp.conj() * ap + jrp.conj() * ar;
        a[r][j] = jpr.conj() * ap + jrr.conj() * ar;
    }
    // Restore exact Hermitian structure.
    a[p][r] = T::zero();
    a[r][p] = T::zero();
    a[p][p] = T::from_real(a[p][p].re());
    a[r][r] = T::from_real(a[r][r].re());
    for j in 0..n {
        if j != p && j != r {
            a[j][p] = a[p][j].conj();
            a[j][r] = a[r][j].conj();
        }
    }
    for row in q.q.iter_mut().take(n) {
        let (qp, qr) = (row[p], row[r]);
        row[p] = qp * jpp + qr * jrp;
        row[r] = qp * jpr + qr * jrr;
    }
}

/// `F(M) = Σ arctan λᵢ(M)`.
pub fn operator_value<T: Entry>(m: &HermitianMatrix<T>) -> Result<f64, SpectralError> {
    Ok(phase_sum(&eigen_decompose(m)?.spectrum))
}

/// `F^{ij} = Q diag(1/(1+λ²)) Q*`.
pub fn linearization<T: Entry>(m: &HermitianMatrix<T>) -> Result<HermitianMatrix<T>, SpectralError> {
    Ok(eigen_decompose(m)?.spectral_map(|l| 1.0 / (1.0 + l * l)))
}

/// `G^{ij} = A e^{−A F(M)} F^{ij}` for `G = −e^{−AF}`.
pub fn g_linearization<T: Entry>(a: f64, m: &HermitianMatrix<T>) -> Result<HermitianMatrix<T>, SpectralError> {
    let pair = eigen_decompose(m)?;
    let scale = a * (-a * phase_sum(&pair.spectrum)).exp();
    Ok(pair.spectral_map(|l| scale / (1.0 + l * l)))
}

/// Phase, spectrum and `F^{ij}` from one decomposition.
#[derive(Clone, Copy, Debug)]
pub struct Linearized<T: Entry> {
    pub phase: f64,
    pub spectrum: Spectrum,
    pub linearization: HermitianMatrix<T>,
}

pub fn linearize<T: Entry>(m: &HermitianMatrix<T>) -> Result<Linearized<T>, SpectralError> {
    let pair = eigen_decompose(m)?;
    Ok(Linearized {
        phase: phase_sum(&pair.spectrum),
        spectrum: pair.spectrum,
        linearization: pair.spectral_map(|l| 1.0 / (1.0 + l * l)),
    })
}

/// Both sides of the principal-block compression inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CompressionVerdict {
    /// `Σ_α arctan λ′_α` over the leading `(n−1)`-block.
    #[serde(serialize_with = "report::real")]
    pub block_phase: f64,
    /// `F(M) − arctan M_nn`.
    #[serde(serialize_with = "report::real")]
    pub phase_drop_bound: f64,
    /// `(n−3)π/2 + δ`.
    #[serde(serialize_with = "report::real")]
    pub band_bound: f64,
}

impl CompressionVerdict {
    pub fn slack(&self) -> f64 {
        (self.block_phase - self.phase_drop_bound).min(self.block_phase - self.band_bound)
    }
}

/// Checks `Σ arctan λ′_α ≥ F(M) − arctan M_nn ≥ (n−3)π/2 + δ` for the
/// leading `(n−1)×(n−1)` block of a supercritical `M`.
pub fn compression_check(m: &SymMatrix, band: &PhaseBand) -> Result<CompressionVerdict, SpectralError> {
    let n = m.n();
    if n < 2 || band.n() != n {
        return Err(SpectralError::Precondition(format!(
            "need n >= 2 matching the band, got matrix n = {n}, band n = {}",
            band.n()
        )));
    }
    let phase = operator_value(m)?;
    if phase < band.threshold() - INEQUALITY_SLACK {
        return Err(SpectralError::Precondition(format!(
            "F(M) = {phase} below band threshold {}",
            band.threshold()
        )));
    }
    let block = m.leading_block(n - 1)?;
    let verdict = CompressionVerdict {
        block_phase: operator_value(&block)?,
        phase_drop_bound: phase - m.get(n - 1, n - 1).atan(),
        band_bound: (n as f64 - 3.0) * FRAC_PI_2 + band.delta(),
    };
    if verdict.block_phase < verdict.phase_drop_bound - INEQUALITY_SLACK {
        return Err(SpectralError::InequalityViolated {
            what: "block phase >= F(M) - arctan M_nn",
            lhs: verdict.block_phase,
            rhs: verdict.phase_drop_bound,
        });
    }
    if verdict.block_phase < verdict.band_bound - INEQUALITY_SLACK {
        return Err(SpectralError::InequalityViolated {
            what: "block phase >= (n-3)pi/2 + delta",
            lhs: verdict.block_phase,
            rhs: verdict.band_bound,
        });
    }
    Ok(verdict)
}

/// Eigenvalue deviations of the bordered matrix `[[diag d, a'], [a'ᵀ, a]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CnsDeviation {
    /// `max_α |λ_α − d_α|` over the `n−1` eigenvalues that track `d`.
    #[serde(serialize_with = "report::real")]
    pub tracked: f64,
    /// `|λ_top / a − 1|`.
    #[serde(serialize_with = "report::real")]
    pub top_ratio: f64,
    /// `K / a` with `K = 10 (1 + max|d| + C)²`.
    #[serde(serialize_with = "report::real")]
    pub bound: f64,
}

/// Builds the bordered matrix and measures how closely its spectrum
/// follows `(d, a)` as `a` grows.
pub fn cns_asymptotics_check(d: &[f64], a_offdiag: &[f64], a: f64) -> Result<CnsDeviation, SpectralError> {
    let n = d.len() + 1;
    if d.is_empty() || n > MAX_DIM || a_offdiag.len() != d.len() {
        return Err(SpectralError::Precondition(format!(
            "need 1 <= len(d) = len(a_offdiag) <= {}, got {} and {}",
            MAX_DIM - 1,
            d.len(),
            a_offdiag.len()
        )));
    }
    let c = a_offdiag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let dmax = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let base = 1.0 + dmax + c;
    if !(a >= 10.0 * base) {
        return Err(SpectralError::Precondition(format!(
            "need a >= 10 (1 + max|d| + C) = {}, got {a}",
            10.0 * base
        )));
    }
    let m = SymMatrix::from_upper(n, |i, j| match (i == n - 1, j == n - 1) {
        (true, true) => a,
        (false, true) => a_offdiag[i],
        _ if i == j => d[i],
        _ => 0.0,
    })?;
    let spectrum = eigen_decompose(&m)?.spectrum;
    // a dominates, so the top eigenvalue tracks a and the rest track sorted d.
    let mut d_sorted = d.to_vec();
    d_sorted.sort_by(|x, y| y.total_cmp(x));
    let tracked = spectrum.values()[1..]
        .iter()
        .zip(&d_sorted)
        .fold(0.0f64, |m, (l, dv)| m.max((l - dv).abs()));
    let deviation = CnsDeviation {
        tracked,
        top_ratio: (spectrum.largest() / a - 1.0).abs(),
        bound: 10.0 * base * base / a,
    };
    if deviation.tracked > deviation.bound || deviation.top_ratio > deviation.bound {
        return Err(SpectralError::InequalityViolated {
            what: "eigenvalue deviation <= K/a",
            lhs: deviation.tracked.max(deviation.top_ratio),
            rhs: deviation.bound,
        });
    }
    Ok(deviation)
}

/// Spectral radius of `F^{ij̄} u_{kj̄}`, bounded by `max |λ/(1+λ²)| = 1/2`.
pub fn linearized_product_bound<T: Entry>(m: &HermitianMatrix<T>) -> Result<f64, SpectralError> {
    let lin = linearization(m)?;
    let p = lin.product(m);
    // F^{ij̄} and M commute, so the product is Hermitian up to rounding.
    let herm = HermitianMatrix::from_upper(m.n(), |i, j| (p[i][j] + p[j][i].conj()).scale(0.5))?;
    let s = eigen_decompose(&herm)?.spectrum;
    let radius = s.largest().abs().max(s.smallest().abs());
    if radius > 0.5 + INEQUALITY_SLACK {
        return Err(SpectralError::InequalityViolated {
            what: "spectral radius of F^{ij}u_{kj} <= 1/2",
            lhs: radius,
            rhs: 0.5,
        });
    }
    Ok(radius)
}
