//! Box-domain lattices, scalar fields and finite-difference Hessians.
//!
//! Nodes are numbered lexicographically with axis 0 varying fastest. Every
//! interior node of a box has a full 3^d neighbourhood, so the second-order
//! central stencils below never need one-sided variants. Boundary nodes hold
//! Dirichlet data and take part in the stencils of adjacent interior nodes.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::phase::{PhaseBand, PhaseError};
use crate::report::format_real;
use crate::spectral::{self, HermMatrix, SpectralError, SymMatrix};

pub const MIN_RESOLUTION: usize = 5;
pub const MAX_RESOLUTION: usize = 257;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("node {0} is on the boundary; Hessians are only defined at interior nodes")]
    BoundaryNode(usize),
    #[error("setting mismatch: {0}")]
    Setting(String),
    #[error("field does not match the domain: {0}")]
    FieldMismatch(String),
    #[error("problem invariant violated: {0}")]
    Invariant(String),
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

/// Axis-aligned box with `resolution` nodes per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    resolution: usize,
}

impl BoxDomain {
    pub fn new(lower: &[f64], upper: &[f64], resolution: usize) -> Result<Self, GridError> {
        let dim = lower.len();
        if !(2..=4).contains(&dim) || upper.len() != dim {
            return Err(GridError::Domain(format!(
                "need 2 to 4 axes with matching corners, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for k in 0..dim {
            if !(lower[k].is_finite() && upper[k].is_finite() && upper[k] > lower[k]) {
                return Err(GridError::Domain(format!(
                    "axis {k}: need finite lower < upper, got {} and {}",
                    lower[k], upper[k]
                )));
            }
        }
        if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&resolution) {
            return Err(GridError::Domain(format!(
                "resolution {resolution} outside {MIN_RESOLUTION}..={MAX_RESOLUTION}"
            )));
        }
        Ok(Self {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            resolution,
        })
    }

    /// `[0, 1]^dim`.
    pub fn unit(dim: usize, resolution: usize) -> Result<Self, GridError> {
        Self::new(&vec![0.0; dim], &vec![1.0; dim], resolution)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn node_count(&self) -> usize {
        self.resolution.pow(self.dim() as u32)
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.resolution - 1) as f64
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.resolution.pow(axis as u32)
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut rest = node;
        (0..self.dim())
            .map(|_| {
                let i = rest % self.resolution;
                rest /= self.resolution;
                i
            })
            .collect()
    }

    pub fn node_at(&self, index: &[usize]) -> usize {
        index.iter().rev().fold(0, |acc, &i| acc * self.resolution + i)
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        if i == self.resolution - 1 {
            self.upper[axis]
        } else {
            self.lower[axis] + (self.upper[axis] - self.lower[axis]) * (i as f64 / (self.resolution - 1) as f64)
        }
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .into_iter()
            .enumerate()
            .map(|(k, i)| self.coordinate(k, i))
            .collect()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let last = self.resolution - 1;
        let mut rest = node;
        for _ in 0..self.dim() {
            let i = rest % self.resolution;
            if i == 0 || i == last {
                return true;
            }
            rest /= self.resolution;
        }
        false
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.node_count()).map(|p| self.is_boundary(p)).collect()
    }

    /// Interior nodes in lexicographic order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&p| !self.is_boundary(p)).collect()
    }

    /// `"(i,j,…)"`, used in diagnostics.
    pub fn describe_node(&self, node: usize) -> String {
        let idx = self.multi_index(node);
        let mut s = String::from("(");
        for (k, i) in idx.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            let _ = write!(s, "{i}");
        }
        s.push(')');
        s
    }
}

/// One real value per node plus the boundary mask.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    domain: BoxDomain,
    values: Vec<f64>,
    boundary_mask: Vec<bool>,
}

impl GridField {
    pub fn from_values(domain: &BoxDomain, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != domain.node_count() {
            return Err(GridError::FieldMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                domain.node_count()
            )));
        }
        Ok(Self {
            boundary_mask: domain.boundary_mask(),
            domain: domain.clone(),
            values,
        })
    }

    /// Samples `f` at every node.
    pub fn from_fn(domain: &BoxDomain, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..domain.node_count()).map(|p| f(&domain.coords(p))).collect();
        Self::from_values(domain, values).expect("length matches by construction")
    }

    pub fn constant(domain: &BoxDomain, c: f64) -> Self {
        Self::from_values(domain, vec![c; domain.node_count()]).expect("length matches by construction")
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same domain, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, GridError> {
        Self::from_values(&self.domain, values)
    }

    fn check_domain(&self, other: &BoxDomain) -> Result<(), GridError> {
        if &self.domain != other {
            return Err(GridError::FieldMismatch("field lives on a different domain".into()));
        }
        Ok(())
    }

    /// Grid CSV: header `x1,…,xd,value`, one node per row in lexicographic
    /// order, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        let dim = self.domain.dim();
        let mut line = String::new();
        for k in 0..dim {
            let _ = write!(line, "x{},", k + 1);
        }
        line.push_str("value");
        writeln!(w, "{line}")?;
        for (p, v) in self.values.iter().enumerate() {
            line.clear();
            for x in self.domain.coords(p) {
                line.push_str(&format_real(x));
                line.push(',');
            }
            line.push_str(&format_real(*v));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads the grid CSV format, checking node count and coordinates.
    pub fn read_csv<R: BufRead>(domain: &BoxDomain, r: R) -> Result<Self, GridError> {
        let dim = domain.dim();
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or(GridError::Csv {
            line: 1,
            message: "empty file".into(),
        })?;
        let header = header?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() != dim + 1 || cols.last() != Some(&"value") {
            return Err(GridError::Csv {
                line: 1,
                message: format!("expected {} coordinate columns and `value`, got `{header}`", dim),
            });
        }
        let mut values = Vec::with_capacity(domain.node_count());
        for (idx, line) in lines {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let node = values.len();
            if node >= domain.node_count() {
                return Err(GridError::Csv {
                    line: lineno,
                    message: format!("more rows than the {} grid nodes", domain.node_count()),
                });
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| GridError::Csv {
                    line: lineno,
                    message: e.to_string(),
                })?;
            if fields.len() != dim + 1 {
                return Err(GridError::Csv {
                    line: lineno,
                    message: format!("expected {} columns, got {}", dim + 1, fields.len()),
                });
            }
            for (k, x) in domain.coords(node).into_iter().enumerate() {
                if (fields[k] - x).abs() > 1e-9 * (1.0 + x.abs()) {
                    return Err(GridError::Csv {
                        line: lineno,
                        message: format!(
                            "coordinate x{} = {} does not match node {} (expected {x})",
                            k + 1,
                            fields[k],
                            domain.describe_node(node)
                        ),
                    });
                }
            }
            values.push(fields[dim]);
        }
        if values.len() != domain.node_count() {
            return Err(GridError::Csv {
                line: values.len() + 1,
                message: format!("{} rows for {} nodes", values.len(), domain.node_count()),
            });
        }
        Self::from_values(domain, values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SettingKind {
    Real,
    Complex,
}

/// Real (`n = dim`) or complex (`dim = 2n`, axes `(x₁, y₁, …, xₙ, yₙ)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Setting {
    kind: SettingKind,
    n: usize,
}

impl Setting {
    pub fn real(n: usize) -> Result<Self, GridError> {
        if !(2..=3).contains(&n) {
            return Err(GridError::Setting(format!("real setting needs n in {{2,3}}, got {n}")));
        }
        Ok(Self {
            kind: SettingKind::Real,
            n,
        })
    }

    pub fn complex(n: usize) -> Result<Self, GridError> {
        if !(1..=2).contains(&n) {
            return Err(GridError::Setting(format!("complex setting needs n in {{1,2}}, got {n}")));
        }
        Ok(Self {
            kind: SettingKind::Complex,
            n,
        })
    }

    /// `real2`, `real3`, `complex1` or `complex2`.
    pub fn from_name(name: &str) -> Result<Self, GridError> {
        match name {
            "real2" => Self::real(2),
            "real3" => Self::real(3),
            "complex1" => Self::complex(1),
            "complex2" => Self::complex(2),
            other => Err(GridError::Setting(format!(
                "unknown setting `{other}` (expected real2, real3, complex1 or complex2)"
            ))),
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            SettingKind::Real => format!("real{}", self.n),
            SettingKind::Complex => format!("complex{}", self.n),
        }
    }

    pub fn kind(&self) -> SettingKind {
        self.kind
    }

    /// Operator dimension (eigenvalue count).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Spatial dimension of the box.
    pub fn dim(&self) -> usize {
        match self.kind {
            SettingKind::Real => self.n,
            SettingKind::Complex => 2 * self.n,
        }
    }
}

/// Central-difference Hessian at an interior node of a raw value slice.
pub fn real_hessian_at(domain: &BoxDomain, values: &[f64], node: usize) -> Result<SymMatrix, GridError> {
    if domain.is_boundary(node) {
        return Err(GridError::BoundaryNode(node));
    }
    let dim = domain.dim();
    let u0 = values[node];
    let entry = |k: usize, l: usize| {
        let (sk, hk) = (domain.stride(k), domain.spacing(k));
        if k == l {
            (values[node + sk] - 2.0 * u0 + values[node - sk]) / (hk * hk)
        } else {
            let (sl, hl) = (domain.stride(l), domain.spacing(l));
            let pp = values[node + sk + sl];
            let pm = values[node + sk - sl];
            let mp = values[node - sk + sl];
            let mm = values[node - sk - sl];
            (pp - pm - mp + mm) / (4.0 * hk * hl)
        }
    };
    Ok(SymMatrix::from_upper(dim, entry)?)
}

/// `u_{ij̄} = ¼[(u_{xᵢxⱼ} + u_{yᵢyⱼ}) + √−1 (u_{xᵢyⱼ} − u_{yᵢxⱼ})]` from the
/// real Hessian in `(x₁, y₁, …)` axis order.
pub fn complex_from_real(real: &SymMatrix, n: usize) -> Result<HermMatrix, GridError> {
    if real.n() != 2 * n {
        return Err(GridError::Setting(format!(
            "complex n = {n} needs a {}-dimensional real Hessian, got {}",
            2 * n,
            real.n()
        )));
    }
    let (x, y) = (|i: usize| 2 * i, |i: usize| 2 * i + 1);
    Ok(HermMatrix::from_upper(n, |i, j| {
        let re = real.get(x(i), x(j)) + real.get(y(i), y(j));
        let im = real.get(x(i), y(j)) - real.get(y(i), x(j));
        Complex64::new(0.25 * re, 0.25 * im)
    })?)
}

/// Real second-order coefficients `C` with `Re tr(L · dH) = Σ C_kl dD_kl`
/// when `H` is the complex Hessian assembled from the real Hessian `D`.
pub fn complex_coefficients(lin: &HermMatrix) -> SymMatrix {
    let n = lin.n();
    SymMatrix::from_upper(2 * n, |k, l| {
        let (i, ki) = (k / 2, k % 2);
        let (j, lj) = (l / 2, l % 2);
        let v = lin.get(i, j);
        match (ki, lj) {
            (0, 0) | (1, 1) => 0.25 * v.re,
            (0, 1) => 0.25 * v.im,
            _ => -0.25 * v.im,
        }
    })
    .expect("2n <= 4")
}

/// Real discrete Hessian of a field at an interior node.
pub fn hessian_real(field: &GridField, node: usize) -> Result<SymMatrix, GridError> {
    real_hessian_at(&field.domain, &field.values, node)
}

/// Complex Hessian `u_{ij̄}` of a field at an interior node.
pub fn hessian_complex(field: &GridField, node: usize, setting: &Setting) -> Result<HermMatrix, GridError> {
    if setting.kind() != SettingKind::Complex {
        return Err(GridError::Setting("complex Hessian requested in a real setting".into()));
    }
    if field.domain.dim() != setting.dim() {
        return Err(GridError::Setting(format!(
            "{} needs a {}-dimensional box, field has {}",
            setting.name(),
            setting.dim(),
            field.domain.dim()
        )));
    }
    complex_from_real(&hessian_real(field, node)?, setting.n())
}

/// Discrete Hessian in the representation the setting calls for.
#[derive(Clone, Copy, Debug)]
pub enum NodeHessian {
    Real(SymMatrix),
    Complex(HermMatrix),
}

impl NodeHessian {
    pub fn at(setting: &Setting, domain: &BoxDomain, values: &[f64], node: usize) -> Result<Self, GridError> {
        let real = real_hessian_at(domain, values, node)?;
        Ok(match setting.kind() {
            SettingKind::Real => NodeHessian::Real(real),
            SettingKind::Complex => NodeHessian::Complex(complex_from_real(&real, setting.n())?),
        })
    }

    pub fn operator_value(&self) -> Result<f64, SpectralError> {
        match self {
            NodeHessian::Real(m) => spectral::operator_value(m),
            NodeHessian::Complex(m) => spectral::operator_value(m),
        }
    }

    /// Phase, spectrum and the real coefficient matrix `C` of `dF` with
    /// respect to the real Hessian entries.
    pub fn linearize(&self) -> Result<(f64, crate::Spectrum, SymMatrix), SpectralError> {
        Ok(match self {
            NodeHessian::Real(m) => {
                let l = spectral::linearize(m)?;
                (l.phase, l.spectrum, l.linearization)
            }
            NodeHessian::Complex(m) => {
                let l = spectral::linearize(m)?;
                (l.phase, l.spectrum, complex_coefficients(&l.linearization))
            }
        })
    }

    /// `Re tr(F^{ij}(self) · (other − self))`.
    pub fn gap_towards(&self, other: &NodeHessian) -> Result<f64, SpectralError> {
        Ok(match (self, other) {
            (NodeHessian::Real(m), NodeHessian::Real(o)) => {
                spectral::linearization(m)?.trace_product(&o.add_scaled(m, -1.0))
            }
            (NodeHessian::Complex(m), NodeHessian::Complex(o)) => {
                spectral::linearization(m)?.trace_product(&o.add_scaled(m, -1.0))
            }
            _ => return Err(SpectralError::Precondition("mixed real and complex Hessians".into())),
        })
    }
}

/// Problem data: domain, setting, target phase `h`, boundary data `φ`,
/// subsolution `ū` and the declared margin `δ`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    domain: BoxDomain,
    setting: Setting,
    h: GridField,
    phi: GridField,
    usub: GridField,
    band: PhaseBand,
}

impl ProblemSpec {
    /// Validates every invariant; messages name the offending node.
    pub fn new(
        domain: BoxDomain,
        setting: Setting,
        h: GridField,
        phi: GridField,
        usub: GridField,
        delta: f64,
    ) -> Result<Self, GridError> {
        if domain.dim() != setting.dim() {
            return Err(GridError::Invariant(format!(
                "setting {} needs a {}-dimensional box, got {}",
                setting.name(),
                setting.dim(),
                domain.dim()
            )));
        }
        for (name, f) in [("h", &h), ("phi", &phi), ("usub", &usub)] {
            f.check_domain(&domain)
                .map_err(|_| GridError::Invariant(format!("field {name} lives on a different grid")))?;
        }
        if !(delta > 0.0) {
            return Err(GridError::Invariant(format!("delta must be positive, got {delta}")));
        }
        let band = PhaseBand::new(setting.n(), delta)
            .map_err(|e| GridError::Invariant(format!("delta = {delta}: {e}")))?;
        let (lo, hi) = (band.threshold(), band.ceiling());
        for p in domain.interior_nodes() {
            let v = h.value(p);
            if !v.is_finite() || v < lo {
                return Err(GridError::Invariant(format!(
                    "h below supercritical band at node {}: h = {v}, (n-2)pi/2 + delta = {lo}",
                    domain.describe_node(p)
                )));
            }
            if v >= hi {
                return Err(GridError::Invariant(format!(
                    "h at or above n*pi/2 at node {}: h = {v}, n*pi/2 = {hi}",
                    domain.describe_node(p)
                )));
            }
        }
        for p in 0..domain.node_count() {
            let u = usub.value(p);
            if !u.is_finite() {
                return Err(GridError::Invariant(format!(
                    "usub is not finite at node {}",
                    domain.describe_node(p)
                )));
            }
            if domain.is_boundary(p) && u.to_bits() != phi.value(p).to_bits() {
                return Err(GridError::Invariant(format!(
                    "usub differs from phi at boundary node {}: usub = {u}, phi = {}",
                    domain.describe_node(p),
                    phi.value(p)
                )));
            }
        }
        Ok(Self {
            domain,
            setting,
            h,
            phi,
            usub,
            band,
        })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn setting(&self) -> &Setting {
        &self.setting
    }

    pub fn h(&self) -> &GridField {
        &self.h
    }

    pub fn phi(&self) -> &GridField {
        &self.phi
    }

    pub fn usub(&self) -> &GridField {
        &self.usub
    }

    pub fn delta(&self) -> f64 {
        self.band.delta()
    }

    pub fn band(&self) -> PhaseBand {
        self.band
    }

    /// `nπ/2`.
    pub fn ceiling(&self) -> f64 {
        self.setting.n() as f64 * FRAC_PI_2
    }

    pub fn node_hessian(&self, values: &[f64], node: usize) -> Result<NodeHessian, GridError> {
        NodeHessian::at(&self.setting, &self.domain, values, node)
    }
}

/// `F` of the discrete Hessian at every interior node; boundary nodes are NaN.
pub fn eval_operator_field(spec: &ProblemSpec, field: &GridField) -> Result<GridField, GridError> {
    field.check_domain(spec.domain())?;
    let domain = spec.domain();
    let values: Result<Vec<f64>, GridError> = (0..domain.node_count())
        .into_par_iter()
        .map(|p| {
            if domain.is_boundary(p) {
                Ok(f64::NAN)
            } else {
                Ok(spec.node_hessian(field.values(), p)?.operator_value()?)
            }
        })
        .collect();
    field.with_values(values?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn indexing_round_trip() {
        let d = BoxDomain::new(&[0.0, -1.0, 2.0], &[1.0, 1.0, 3.0], 5).unwrap();
        for p in [0, 7, 31, 124] {
            assert_eq!(d.node_at(&d.multi_index(p)), p);
        }
        assert_eq!(d.multi_index(1), vec![1, 0, 0]);
        assert_eq!(d.coords(124), vec![1.0, 1.0, 3.0]);
        assert_eq!(d.interior_nodes().len(), 27);
        assert_eq!(d.describe_node(d.node_at(&[1, 2, 3])), "(1,2,3)");
    }

    #[test]
    fn domain_validation() {
        assert!(BoxDomain::new(&[0.0], &[1.0], 9).is_err());
        assert!(BoxDomain::new(&[0.0, 0.0], &[1.0, 0.0], 9).is_err());
        assert!(BoxDomain::new(&[0.0, 0.0], &[1.0, 1.0], 4).is_err());
        assert!(BoxDomain::new(&[0.0, 0.0], &[1.0, 1.0], 258).is_err());
    }

    #[test]
    fn boundary_mask_marks_faces() {
        let d = BoxDomain::unit(2, 5).unwrap();
        let f = GridField::constant(&d, 0.0);
        let count = f.boundary_mask().iter().filter(|b| **b).count();
        assert_eq!(count, 25 - 9);
        assert!(f.boundary_mask()[d.node_at(&[0, 3])]);
        assert!(!f.boundary_mask()[d.node_at(&[1, 3])]);
    }

    #[test]
    fn hessian_exact_on_quadratics() {
        for dim in 2..=4 {
            let d = BoxDomain::new(&vec![-0.3; dim], &vec![1.1; dim], 7).unwrap();
            let f = GridField::from_fn(&d, quadratic);
            for p in d.interior_nodes() {
                let h = hessian_real(&f, p).unwrap();
                for i in 0..dim {
                    for j in 0..dim {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((h.get(i, j) - want).abs() < 1e-11);
                    }
                }
            }
        }
        let d = BoxDomain::unit(2, 9).unwrap();
        let f = GridField::from_fn(&d, |x| x[0] * x[1]);
        let h = hessian_real(&f, d.node_at(&[4, 4])).unwrap();
        assert!(h.get(0, 0).abs() < 1e-12 && h.get(1, 1).abs() < 1e-12);
        assert!((h.get(0, 1) - 1.0).abs() < 1e-12);
        assert!(matches!(hessian_real(&f, 0), Err(GridError::BoundaryNode(0))));
    }

    #[test]
    fn complex_hessian_examples() {
        let c1 = Setting::complex(1).unwrap();
        let d = BoxDomain::unit(2, 9).unwrap();
        let f = GridField::from_fn(&d, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let h = hessian_complex(&f, d.node_at(&[3, 5]), &c1).unwrap();
        assert!((h.get(0, 0).re - 0.5).abs() < 1e-12);
        let f = GridField::from_fn(&d, |x| x[0] * x[1]);
        let h = hessian_complex(&f, d.node_at(&[3, 5]), &c1).unwrap();
        assert!(h.get(0, 0).norm() < 1e-12);

        let c2 = Setting::complex(2).unwrap();
        let d4 = BoxDomain::unit(4, 5).unwrap();
        // Axes are (x1, y1, x2, y2).
        let f = GridField::from_fn(&d4, |x| x[0] * x[2] + x[1] * x[3]);
        let h = hessian_complex(&f, d4.node_at(&[2, 2, 2, 2]), &c2).unwrap();
        assert!((h.get(0, 1).re - 0.5).abs() < 1e-12 && h.get(0, 1).im.abs() < 1e-12);
        assert!(h.get(0, 0).norm() < 1e-12 && h.get(1, 1).norm() < 1e-12);
        // Im part: u = x1 y2 − y1 x2 gives u_{12̄} = ¼ i (1 − (−1)) = i/2.
        let f = GridField::from_fn(&d4, |x| x[0] * x[3] - x[1] * x[2]);
        let h = hessian_complex(&f, d4.node_at(&[2, 2, 2, 2]), &c2).unwrap();
        assert!((h.get(0, 1).im - 0.5).abs() < 1e-12 && h.get(0, 1).re.abs() < 1e-12);
        assert!(hessian_complex(&f, 0, &c2).is_err());
        assert!(hessian_complex(&f, d4.node_at(&[2, 2, 2, 2]), &Setting::real(2).unwrap()).is_err());
    }

    #[test]
    fn complex_coefficients_reproduce_trace_pairing() {
        // Σ C_kl D_kl must equal Re tr(L · H(D)) for any symmetric D.
        use crate::spectral::Entry;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let l = HermMatrix::from_upper(2, |_, _| Complex64::sample(&mut rng)).unwrap();
            let d = SymMatrix::from_upper(4, |_, _| f64::sample(&mut rng)).unwrap();
            let c = complex_coefficients(&l);
            let lhs = c.trace_product(&d);
            let rhs = l.trace_product(&complex_from_real(&d, 2).unwrap());
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn richardson_second_order() {
        let u = |x: &[f64]| x[0].sin() * x[1].sin();
        let exact = |x: &[f64]| {
            [
                [-x[0].sin() * x[1].sin(), x[0].cos() * x[1].cos()],
                [x[0].cos() * x[1].cos(), -x[0].sin() * x[1].sin()],
            ]
        };
        // Same physical point (0.5, 0.5) at spacing h and h/2.
        let err = |res: usize, idx: usize| {
            let d = BoxDomain::unit(2, res).unwrap();
            let f = GridField::from_fn(&d, u);
            let p = d.node_at(&[idx, idx]);
            let h = hessian_real(&f, p).unwrap();
            let e = exact(&d.coords(p));
            [h.get(0, 0) - e[0][0], h.get(0, 1) - e[0][1], h.get(1, 1) - e[1][1]]
        };
        let coarse = err(9, 4);
        let fine = err(17, 8);
        for k in 0..3 {
            let ratio = coarse[k] / fine[k];
            assert!((3.5..=4.5).contains(&ratio), "entry {k}: ratio {ratio}");
        }
    }

    fn spec_for(setting: Setting, d: &BoxDomain, u: impl Fn(&[f64]) -> f64, h: f64, delta: f64) -> ProblemSpec {
        let usub = GridField::from_fn(d, u);
        ProblemSpec::new(
            d.clone(),
            setting,
            GridField::constant(d, h),
            usub.clone(),
            usub,
            delta,
        )
        .unwrap()
    }

    #[test]
    fn operator_field_examples() {
        let d = BoxDomain::unit(2, 9).unwrap();
        let spec = spec_for(Setting::real(2).unwrap(), &d, quadratic, FRAC_PI_2, 0.5);
        let f = eval_operator_field(&spec, spec.usub()).unwrap();
        for p in d.interior_nodes() {
            assert!((f.value(p) - FRAC_PI_2).abs() < 1e-12);
        }
        assert!(f.value(0).is_nan());

        let d3 = BoxDomain::unit(3, 6).unwrap();
        let a: f64 = 2.5;
        let spec = spec_for(Setting::real(3).unwrap(), &d3, |x| a * quadratic(x), 3.0 * a.atan(), 0.5);
        let f = eval_operator_field(&spec, spec.usub()).unwrap();
        for p in d3.interior_nodes() {
            assert!((f.value(p) - 3.0 * a.atan()).abs() < 1e-11);
        }
    }

    #[test]
    fn complex_one_is_arctan_of_quarter_laplacian() {
        let d = BoxDomain::unit(2, 11).unwrap();
        let u = |x: &[f64]| (3.0 * x[0]).sin() * x[1].exp() + x[0] * x[0];
        let spec = spec_for(Setting::complex(1).unwrap(), &d, u, 0.0, 1.0);
        let f = eval_operator_field(&spec, spec.usub()).unwrap();
        let hx = d.spacing(0);
        let v = spec.usub().values();
        for p in d.interior_nodes() {
            let s1 = d.stride(1);
            let lap = (v[p + 1] + v[p - 1] + v[p + s1] + v[p - s1] - 4.0 * v[p]) / (hx * hx);
            assert!((f.value(p) - (0.25 * lap).atan()).abs() < 1e-12);
        }
    }

    #[test]
    fn problem_invariants_name_the_node() {
        let d = BoxDomain::unit(2, 5).unwrap();
        let setting = Setting::real(2).unwrap();
        let u = GridField::from_fn(&d, quadratic);
        let mut h = vec![1.0; d.node_count()];
        h[d.node_at(&[2, 3])] = 0.1;
        let err = ProblemSpec::new(
            d.clone(),
            setting,
            GridField::from_values(&d, h).unwrap(),
            u.clone(),
            u.clone(),
            0.5,
        )
        .unwrap_err();
        assert!(err.to_string().contains("h below supercritical band at node (2,3)"), "{err}");

        let mut phi = u.values().to_vec();
        phi[d.node_at(&[0, 2])] += 1e-12;
        let err = ProblemSpec::new(
            d.clone(),
            setting,
            GridField::constant(&d, 1.0),
            GridField::from_values(&d, phi).unwrap(),
            u.clone(),
            0.5,
        )
        .unwrap_err();
        assert!(err.to_string().contains("(0,2)"), "{err}");

        assert!(ProblemSpec::new(d.clone(), setting, GridField::constant(&d, 1.0), u.clone(), u, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let d = BoxDomain::new(&[0.0, -1.0], &[0.3, 2.0], 6).unwrap();
        let f = GridField::from_fn(&d, |x| (x[0] * 7.1).sin() / 3.0 + x[1]);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,value\n"));
        let back = GridField::read_csv(&d, buf.as_slice()).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let truncated: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(GridField::read_csv(&d, truncated.as_bytes()).is_err());
    }
}
