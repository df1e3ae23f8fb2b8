//! Deterministic inputs for the criterion benches in `benches/`.

use std::f64::consts::FRAC_PI_2;

use lagphase::grid::complex_from_real;
use lagphase::linalg::SparseRows;
use lagphase::phase::sample_cone;
use lagphase::{BoxDomain, GridField, HermMatrix, PhaseBand, ProblemSpec, Setting, Spectrum, SymMatrix};

pub const SEED: u64 = 0x5eed;

/// Symmetric `n × n` matrices with entries of order one.
pub fn sym_matrices(n: usize, count: usize) -> Vec<SymMatrix> {
    (0..count)
        .map(|k| {
            SymMatrix::from_upper(n, |i, j| (1.3 * (k * 16 + i * 4 + j) as f64 + 0.7).sin() * 2.0)
                .expect("dimension in range")
        })
        .collect()
}

/// Hermitian `n × n` matrices, built as complex Hessians of real `2n × 2n` ones.
pub fn herm_matrices(n: usize, count: usize) -> Vec<HermMatrix> {
    sym_matrices(2 * n, count)
        .iter()
        .map(|m| complex_from_real(m, n).expect("dimension in range"))
        .collect()
}

/// Spectra from the supercritical band of width `delta`.
pub fn cone_spectra(n: usize, delta: f64, count: usize) -> Vec<Spectrum> {
    let band = PhaseBand::new(n, delta).expect("valid band");
    sample_cone(&band, count, SEED).expect("sampler converges")
}

/// Five-point Dirichlet Laplacian on an `m × m` interior grid, scaled to unit spacing.
pub fn laplacian_rows(m: usize) -> SparseRows {
    let n = m * m;
    let mut a = SparseRows::with_capacity(n, 5 * n);
    let mut row = Vec::with_capacity(5);
    for j in 0..m {
        for i in 0..m {
            let p = j * m + i;
            row.push((p, -4.0));
            if i > 0 {
                row.push((p - 1, 1.0));
            }
            if i + 1 < m {
                row.push((p + 1, 1.0));
            }
            if j > 0 {
                row.push((p - m, 1.0));
            }
            if j + 1 < m {
                row.push((p + m, 1.0));
            }
            a.push_row(&mut row);
        }
    }
    a
}

/// Real n = 2 problem on `[-1, 1]²` whose subsolution is a bumped paraboloid,
/// so every continuity step does real Newton work.
pub fn bumped_problem(resolution: usize) -> ProblemSpec {
    let d = BoxDomain::new(&[-1.0, -1.0], &[1.0, 1.0], resolution).expect("valid box");
    let phi = GridField::from_fn(&d, |x| 1.5 * (x[0] * x[0] + x[1] * x[1]));
    let usub = GridField::from_fn(&d, |x| {
        1.5 * (x[0] * x[0] + x[1] * x[1]) + 0.5 * (x[0] * x[0] - 1.0) * (x[1] * x[1] - 1.0)
    });
    let h = GridField::from_fn(&d, |x| 2.0 * 1.5f64.atan() + 0.1 * x[0] * x[1]);
    ProblemSpec::new(d, Setting::real(2).expect("n = 2"), h, phi, usub, 0.5).expect("valid problem")
}

/// Real n = 2 problem whose subsolution `½|x|²` is already the solution.
pub fn quadratic_problem(resolution: usize) -> ProblemSpec {
    let d = BoxDomain::unit(2, resolution).expect("valid box");
    let u = GridField::from_fn(&d, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
    let h = GridField::constant(&d, FRAC_PI_2);
    ProblemSpec::new(d, Setting::real(2).expect("n = 2"), h, u.clone(), u, 0.5).expect("valid problem")
}
