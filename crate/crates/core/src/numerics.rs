//! Normal distribution functions and symmetric eigendecomposition.
//!
//! The univariate CDF and quantile sit on top of `statrs`' complementary error
//! function and its inverse. The bivariate CDF is the Drezner–Wesolowsky /
//! Genz Gauss–Legendre scheme, accurate to roughly double precision.
//!
//! Infinite arguments are an explicit encoding, not an error: `f64::INFINITY`
//! in either coordinate of [`bivariate_normal_cdf`] marginalizes that
//! coordinate out, and `f64::NEG_INFINITY` yields probability zero.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Standard normal CDF, Φ(x).
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("std_normal_cdf: non-finite input {x}")));
    }
    Ok(phi(x))
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (TWO_PI).sqrt()
}

/// Inverse of the standard normal CDF, Φ⁻¹(p), for `p` in the open unit interval.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!(
            "std_normal_quantile: p = {p} is outside (0, 1)"
        )));
    }
    Ok(phi_inv(p))
}

/// Φ without input validation. Infinite arguments map to 0 or 1.
pub(crate) fn phi(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

pub(crate) fn phi_inv(p: f64) -> f64 {
    // Work in the lower tail, where Φ has full relative precision; 1 - p is exact here.
    if p > 0.5 {
        return -phi_inv(1.0 - p);
    }
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    // One Newton step polishes the last few ulps of the rational approximation.
    let density = std_normal_pdf(x);
    if density > 1e-300 {
        x -= (phi(x) - p) / density;
    }
    x
}

// Gauss–Legendre abscissae (negative half) and weights for 6, 12 and 20 points.
const GL_W: [[f64; 10]; 3] = [
    [
        0.171_324_492_379_170_5,
        0.360_761_573_048_138_4,
        0.467_913_934_572_690_4,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.047_175_336_386_511_77,
        0.106_939_325_995_318_3,
        0.160_078_328_543_346_4,
        0.203_167_426_723_065_9,
        0.233_492_536_538_354_7,
        0.249_147_045_813_402_9,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.017_614_007_139_152_12,
        0.040_601_429_800_386_94,
        0.062_672_048_334_109_06,
        0.083_276_741_576_704_75,
        0.101_930_119_817_240_4,
        0.118_194_531_961_518_4,
        0.131_688_638_449_176_6,
        0.142_096_109_318_382_1,
        0.149_172_986_472_603_7,
        0.152_753_387_130_725_9,
    ],
];

const GL_X: [[f64; 10]; 3] = [
    [
        -0.932_469_514_203_152_2,
        -0.661_209_386_466_264_7,
        -0.238_619_186_083_197,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        -0.981_560_634_246_719_1,
        -0.904_117_256_370_475,
        -0.769_902_674_194_305,
        -0.587_317_954_286_617_1,
        -0.367_831_498_998_180_2,
        -0.125_233_408_511_469_2,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        -0.993_128_599_185_094_9,
        -0.963_971_927_277_913_8,
        -0.912_234_428_251_325_9,
        -0.839_116_971_822_218_8,
        -0.746_331_906_460_150_8,
        -0.636_053_680_726_515,
        -0.510_867_001_950_827_1,
        -0.373_706_088_715_419_6,
        -0.227_785_851_141_645_1,
        -0.076_526_521_133_497_33,
    ],
];

/// Bivariate standard normal CDF, Φ₂(x, y; ρ) = P(X ≤ x, Y ≤ y) with corr(X, Y) = ρ.
///
/// `f64::INFINITY` in either coordinate marginalizes it; `f64::NEG_INFINITY`
/// gives zero. NaN is rejected, as is any `|rho| >= 1`.
pub fn bivariate_normal_cdf(x: f64, y: f64, rho: f64) -> Result<f64> {
    if x.is_nan() || y.is_nan() || rho.is_nan() {
        return Err(Error::invalid("bivariate_normal_cdf: NaN argument"));
    }
    if rho.abs() >= 1.0 {
        return Err(Error::invalid(format!(
            "bivariate_normal_cdf: |rho| = {} must be < 1",
            rho.abs()
        )));
    }
    Ok(bvn_lower(x, y, rho))
}

/// Φ₂ with arguments assumed valid.
pub(crate) fn bvn_lower(x: f64, y: f64, rho: f64) -> f64 {
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return phi(y);
    }
    if y == f64::INFINITY {
        return phi(x);
    }
    // P(X <= x, Y <= y) = P(-X >= -x, -Y >= -y), and (-X, -Y) has the same correlation.
    bvn_upper(-x, -y, rho).clamp(0.0, 1.0)
}

/// P(X > h, Y > k) for standard bivariate normal with correlation `r`.
fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    let (ng, lg) = if r.abs() < 0.3 {
        (0, 3)
    } else if r.abs() < 0.75 {
        (1, 6)
    } else {
        (2, 10)
    };
    let w = &GL_W[ng];
    let xg = &GL_X[ng];

    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for i in 0..lg {
            for sign in [1.0, -1.0] {
                let sn = (asr * (sign * xg[i] + 1.0) / 2.0).sin();
                bvn += w[i] * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn * asr / (2.0 * TWO_PI) + phi(-h) * phi(-k)
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        let a_s = (1.0 - r) * (1.0 + r);
        let mut a = a_s.sqrt();
        let bs = (h - k).powi(2);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(bs / a_s + hk) / 2.0).exp()
            * (1.0 - c * (bs - a_s) * (1.0 - d * bs / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp()
                * TWO_PI.sqrt()
                * phi(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for i in 0..lg {
            let xs = (a * (xg[i] + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w[i]
                * ((-bs / (2.0 * xs) - hk / (1.0 + rs)).exp() / rs
                    - (-(bs / xs + hk) / 2.0).exp() * (1.0 + c * xs * (1.0 + d * xs)));
            let xs = a_s * (1.0 - xg[i]).powi(2) / 4.0;
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w[i]
                * (-(bs / xs + hk) / 2.0).exp()
                * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                    - (1.0 + c * xs * (1.0 + d * xs)));
        }
        bvn = -bvn / TWO_PI;
        if r > 0.0 {
            bvn + phi(-h.max(k))
        } else {
            -bvn + (phi(-h) - phi(-k)).max(0.0)
        }
    }
}

/// A real symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricMatrix {
    dim: usize,
    entries: Vec<f64>,
}

/// Symmetry tolerance accepted by [`SymmetricMatrix::from_row_major`].
pub const SYMMETRY_TOL: f64 = 1e-12;

impl SymmetricMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    /// Builds a matrix from row-major entries, rejecting asymmetry above
    /// [`SYMMETRY_TOL`]. The stored matrix is exactly symmetrized.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("matrix dimension must be positive"));
        }
        if entries.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        let mut m = Self { dim, entries };
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (m.get(i, j), m.get(j, i));
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                let avg = 0.5 * (a + b);
                m.set_sym(i, j, avg);
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("matrix rows must all have length equal to the row count"));
        }
        Self::from_row_major(dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set_sym(&mut self, i: usize, j: usize, value: f64) {
        self.entries[i * self.dim + j] = value;
        self.entries[j * self.dim + i] = value;
    }

    pub fn row_major(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    /// Symmetrizes a dense matrix by averaging it with its transpose.
    pub(crate) fn from_dmatrix_symmetrized(m: &DMatrix<f64>) -> Self {
        let dim = m.nrows();
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                entries[i * dim + j] = 0.5 * (m[(i, j)] + m[(j, i)]);
            }
        }
        Self { dim, entries }
    }
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Eigendecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Eigendecomposition {
    /// V · diag(λ) · Vᵀ.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigenvalues));
        &self.eigenvectors * d * self.eigenvectors.transpose()
    }
}

pub fn symmetric_eigendecomposition(a: &SymmetricMatrix) -> Eigendecomposition {
    let eig = SymmetricEigen::new(a.to_dmatrix());
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Eigendecomposition {
        eigenvalues,
        eigenvectors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Composite Simpson integration of `f` over `[a, b]` with `n` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    /// Φ₂ by integrating the density of X against the conditional CDF of Y.
    fn bvn_by_quadrature(x: f64, y: f64, rho: f64) -> f64 {
        let s = (1.0 - rho * rho).sqrt();
        simpson(
            |t| std_normal_pdf(t) * phi((y - rho * t) / s),
            -12.0,
            x,
            20_000,
        )
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(std_normal_cdf(0.0).unwrap(), 0.5);
        // Density integrated from far in the left tail.
        let oracle = simpson(std_normal_pdf, -40.0, -0.67449, 200_000);
        assert_abs_diff_eq!(oracle, 0.25, epsilon = 1e-5);
        assert_abs_diff_eq!(std_normal_cdf(-0.67449).unwrap(), oracle, epsilon = 1e-10);
        assert_abs_diff_eq!(std_normal_cdf(38.0).unwrap(), 1.0, epsilon = f64::EPSILON);
        assert!(std_normal_cdf(f64::NAN).is_err());
        assert!(std_normal_cdf(f64::INFINITY).is_err());
    }

    #[test]
    fn quantile_examples() {
        assert_abs_diff_eq!(std_normal_quantile(0.5).unwrap(), 0.0, epsilon = 1e-15);
        // Bisection on the CDF.
        let (mut lo, mut hi) = (-5.0, 5.0);
        for _ in 0..200 {
            let mid: f64 = 0.5 * (lo + hi);
            if phi(mid) < 0.25 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(lo, -0.67449, epsilon = 1e-4);
        assert_abs_diff_eq!(std_normal_quantile(0.25).unwrap(), lo, epsilon = 1e-10);
        for p in [1e-4, 0.013, 0.3, 0.49, 0.125] {
            let s = std_normal_quantile(p).unwrap() + std_normal_quantile(1.0 - p).unwrap();
            assert!(s.abs() <= 1e-10, "p={p}: sum {s}");
        }
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(std_normal_quantile(p).is_err());
        }
    }

    #[test]
    fn bivariate_examples() {
        assert_abs_diff_eq!(bivariate_normal_cdf(0.0, 0.0, 0.0).unwrap(), 0.25, epsilon = 1e-15);
        let oracle = bvn_by_quadrature(0.0, 0.0, 0.5);
        assert_abs_diff_eq!(oracle, 1.0 / 3.0, epsilon = 1e-4);
        assert_abs_diff_eq!(bivariate_normal_cdf(0.0, 0.0, 0.5).unwrap(), oracle, epsilon = 1e-7);
        for x in [-3.0, -0.4, 0.0, 1.7] {
            for rho in [-0.95, -0.3, 0.0, 0.6, 0.99] {
                let v = bivariate_normal_cdf(x, f64::INFINITY, rho).unwrap();
                assert_abs_diff_eq!(v, phi(x), epsilon = 1e-15);
                let v = bivariate_normal_cdf(f64::INFINITY, x, rho).unwrap();
                assert_abs_diff_eq!(v, phi(x), epsilon = 1e-15);
                assert_eq!(bivariate_normal_cdf(x, f64::NEG_INFINITY, rho).unwrap(), 0.0);
            }
        }
        assert!(bivariate_normal_cdf(0.0, 0.0, 1.0).is_err());
        assert!(bivariate_normal_cdf(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn bivariate_matches_quadrature_across_regimes() {
        // Covers each branch of the Gauss–Legendre scheme, including |rho| > 0.925.
        for &rho in &[-0.99, -0.93, -0.8, -0.5, -0.1, 0.2, 0.5, 0.74, 0.8, 0.93, 0.97, 0.999] {
            for &(x, y) in &[(-2.0, -1.0), (-0.5, 0.3), (0.0, 0.0), (1.2, -0.7), (2.5, 2.0), (-1.28, -1.28)] {
                let got = bivariate_normal_cdf(x, y, rho).unwrap();
                let want = bvn_by_quadrature(x, y, rho);
                assert!(
                    (got - want).abs() <= 1e-7,
                    "Φ2({x}, {y}; {rho}) = {got}, quadrature {want}"
                );
            }
        }
    }

    #[test]
    fn eigen_examples() {
        let e = symmetric_eigendecomposition(&SymmetricMatrix::identity(3));
        for v in &e.eigenvalues {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
        let a = SymmetricMatrix::from_rows(&[vec![1.0, 1.2], vec![1.2, 1.0]]).unwrap();
        let e = symmetric_eigendecomposition(&a);
        assert_abs_diff_eq!(e.eigenvalues[0], -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(e.eigenvalues[1], 2.2, epsilon = 1e-12);
        let d = SymmetricMatrix::from_rows(&[
            vec![3.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 0.5],
        ])
        .unwrap();
        let e = symmetric_eigendecomposition(&d);
        assert_eq!(e.eigenvalues.len(), 3);
        for (got, want) in e.eigenvalues.iter().zip([-1.0, 0.5, 3.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn asymmetric_input_rejected() {
        let err = SymmetricMatrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]);
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    fn random_symmetric(dim: usize, vals: &[f64]) -> SymmetricMatrix {
        let mut m = SymmetricMatrix::identity(dim);
        let mut it = vals.iter().cycle();
        for i in 0..dim {
            for j in i..dim {
                m.set_sym(i, j, *it.next().unwrap());
            }
        }
        m
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn cdf_is_symmetric(x in -40.0f64..40.0) {
            let s = std_normal_cdf(x).unwrap() + std_normal_cdf(-x).unwrap() - 1.0;
            prop_assert!(s.abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn quantile_round_trip(p in 1e-6f64..(1.0 - 1e-6)) {
            let x = std_normal_quantile(p).unwrap();
            prop_assert!((std_normal_cdf(x).unwrap() - p).abs() <= 1e-8);
        }

        #[test]
        fn bivariate_independent_factorizes(x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let v = bivariate_normal_cdf(x, y, 0.0).unwrap();
            prop_assert!((v - phi(x) * phi(y)).abs() <= 1e-7);
        }

        #[test]
        fn bivariate_exchangeable_and_bounded(x in -5.0f64..5.0, y in -5.0f64..5.0, rho in -0.999f64..0.999) {
            let a = bivariate_normal_cdf(x, y, rho).unwrap();
            let b = bivariate_normal_cdf(y, x, rho).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
            let lower = (phi(x) + phi(y) - 1.0).max(0.0);
            let upper = phi(x).min(phi(y));
            prop_assert!(a >= lower - 1e-12 && a <= upper + 1e-12);
        }

        #[test]
        fn bivariate_monotone_in_rho(x in -3.0f64..3.0, y in -3.0f64..3.0, r1 in -0.99f64..0.99, r2 in -0.99f64..0.99) {
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let a = bivariate_normal_cdf(x, y, lo).unwrap();
            let b = bivariate_normal_cdf(x, y, hi).unwrap();
            prop_assert!(a <= b + 1e-12);
        }

        #[test]
        fn eigen_reconstructs(dim in 1usize..=16, vals in proptest::collection::vec(-3.0f64..3.0, 136)) {
            let a = random_symmetric(dim, &vals);
            let e = symmetric_eigendecomposition(&a);
            let diff = e.reconstruct() - a.to_dmatrix();
            prop_assert!(diff.norm() <= 1e-8);
            let vtv = e.eigenvectors.transpose() * &e.eigenvectors;
            prop_assert!((vtv - DMatrix::<f64>::identity(dim, dim)).norm() <= 1e-8);
            prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
