//! Dense complex/real linear-algebra helpers shared by the design modules.
//!
//! Conventions used throughout the crate:
//!
//! * Hermitian matrices are stored as `DMatrix<Complex64>` and validated with
//!   [`is_hermitian`].
//! * A complex vector `v` maps to the real stacked vector `[Re v; Im v]`.
//! * A complex Hermitian `H` maps to the real symmetric `[Re H, -Im H; Im H, Re H]`
//!   (see `conic::embed_hermitian`), so complex quadratic forms become real ones.
//! * Symmetric matrices of side `s` map to length `s(s+1)/2` vectors via the
//!   scaled vectorization [`svec`] (off-diagonals scaled by sqrt(2)), which makes
//!   the Frobenius inner product equal the plain dot product.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Dense complex vector.
pub type ComplexVector = DVector<Complex64>;
/// Dense complex matrix; Hermitian by convention where stated.
pub type HermitianMatrix = DMatrix<Complex64>;

/// Hermitian symmetry tolerance from the data-type contract.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Checks `H == H^H` entrywise within `tol * max(1, max |entry|)`.
pub fn is_hermitian(h: &HermitianMatrix, tol: f64) -> bool {
    if h.nrows() != h.ncols() {
        return false;
    }
    let scale = h
        .iter()
        .map(|c| c.norm())
        .fold(0.0_f64, f64::max)
        .max(1.0);
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            let d = h[(i, j)] - h[(j, i)].conj();
            if d.norm() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Minimum eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(h: &HermitianMatrix) -> f64 {
    h.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// PSD check from the data-type contract: smallest eigenvalue no lower than
/// `-1e-9 * largest`.
pub fn is_psd(h: &HermitianMatrix) -> bool {
    let eig = h.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    min >= -1e-9 * max.max(1e-30)
}

/// Nearest Hermitian PSD matrix in Frobenius norm (symmetrize, clip eigenvalues).
pub fn project_hermitian_psd(h: &HermitianMatrix) -> HermitianMatrix {
    let n = h.nrows();
    let mut sym = HermitianMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sym[(i, j)] = (h[(i, j)] + h[(j, i)].conj()) * Complex64::new(0.5, 0.0);
        }
    }
    let eig = sym.symmetric_eigen();
    let mut out = HermitianMatrix::zeros(n, n);
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        if *lambda > 0.0 {
            let v = eig.eigenvectors.column(k);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += v[i] * v[j].conj() * Complex64::new(*lambda, 0.0);
                }
            }
        }
    }
    out
}

/// Length of the scaled symmetric vectorization of a side-`s` matrix.
pub fn svec_len(side: usize) -> usize {
    side * (side + 1) / 2
}

/// Scaled symmetric vectorization: diagonal entries as-is, upper off-diagonals
/// scaled by sqrt(2), column-major over the upper triangle.
pub fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let s = m.nrows();
    debug_assert_eq!(s, m.ncols());
    let mut v = DVector::zeros(svec_len(s));
    let mut k = 0;
    for j in 0..s {
        for i in 0..=j {
            v[k] = if i == j {
                m[(i, j)]
            } else {
                std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)])
            };
            k += 1;
        }
    }
    v
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], side: usize) -> DMatrix<f64> {
    debug_assert_eq!(v.len(), svec_len(side));
    let mut m = DMatrix::zeros(side, side);
    let mut k = 0;
    let inv_sqrt2 = 1.0 / std::f64::consts::SQRT_2;
    for j in 0..side {
        for i in 0..=j {
            if i == j {
                m[(i, j)] = v[k];
            } else {
                m[(i, j)] = v[k] * inv_sqrt2;
                m[(j, i)] = v[k] * inv_sqrt2;
            }
            k += 1;
        }
    }
    m
}

/// Index of entry `(i, j)` (`i <= j`) inside the svec layout.
pub fn svec_index(i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    j * (j + 1) / 2 + i
}

/// Real stacking of a complex vector: `[Re v; Im v]`.
pub fn real_stack(v: &ComplexVector) -> DVector<f64> {
    let n = v.len();
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        out[i] = v[i].re;
        out[n + i] = v[i].im;
    }
    out
}

/// Real symmetric coefficient matrix `G` such that for every Hermitian `R`,
/// `<G, embed(R)> = a^H R a`. Equals `embed(a a^H) / 2`, which is invariant
/// under the embedding symmetry, so constraints built from it are blind to the
/// unstructured part of a relaxed embedded variable.
pub fn herm_quad_coeff(a: &ComplexVector) -> DMatrix<f64> {
    let n = a.len();
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let h = a[i] * a[j].conj() * Complex64::new(0.5, 0.0);
            g[(i, j)] = h.re;
            g[(i, j + n)] = -h.im;
            g[(i + n, j)] = h.im;
            g[(i + n, j + n)] = h.re;
        }
    }
    g
}

/// `a^H R a` for Hermitian `R` (real by symmetry; imaginary part dropped).
pub fn quad_form(a: &ComplexVector, r: &HermitianMatrix) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.len() {
        for j in 0..a.len() {
            acc += a[i].conj() * r[(i, j)] * a[j];
        }
    }
    acc.re
}

/// `|a^H b|^2`.
pub fn coupling(a: &ComplexVector, b: &ComplexVector) -> f64 {
    a.dotc(b).norm_sqr()
}
