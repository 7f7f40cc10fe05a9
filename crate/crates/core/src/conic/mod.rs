//! Small dense conic optimizer.
//!
//! Standard form handled here:
//!
//! ```text
//!   minimize    c' x
//!   subject to  A x = b
//!               x in K = K_1 x K_2 x ... (zero / nonneg / soc / psd segments)
//! ```
//!
//! Inequalities are modeled with explicit slack entries in nonnegative
//! segments; complex PSD constraints enter through the real embedding
//! [`embed_hermitian`]. The solver is a first-order operator-splitting scheme
//! (alternating projection onto the affine set and the cone product with dual
//! updates); see [`solver`]. A bisection driver for quasi-convex level-set
//! problems lives in [`bisect`].

mod bisect;
mod cones;
mod solver;

pub use bisect::{bisect_feasibility, BisectOutcome, Feasibility};
pub use cones::{cone_distance, project_cone_product, project_psd_matrix, Cone};
pub use solver::{solve, solve_with, SolveStatus, SolverSettings, WarmState};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{is_hermitian, HermitianMatrix, HERMITIAN_TOL};

/// A conic program in standard primal form.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    /// Objective vector `c`, length `n`.
    pub objective: DVector<f64>,
    /// Equality constraint matrix `A`, `m x n`.
    pub constraint_matrix: DMatrix<f64>,
    /// Right-hand side `b`, length `m`.
    pub rhs: DVector<f64>,
    /// Ordered cone segments; dimensions must sum to `n`.
    pub cones: Vec<Cone>,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rhs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let m = self.num_constraints();
        if self.constraint_matrix.ncols() != n {
            return Err(Error::validation(format!(
                "constraint matrix has {} columns for {} variables",
                self.constraint_matrix.ncols(),
                n
            )));
        }
        if self.constraint_matrix.nrows() != m {
            return Err(Error::validation(format!(
                "constraint matrix has {} rows for rhs of length {}",
                self.constraint_matrix.nrows(),
                m
            )));
        }
        let cone_dim: usize = self.cones.iter().map(Cone::dim).sum();
        if cone_dim != n {
            return Err(Error::validation(format!(
                "cone segments cover {cone_dim} of {n} variables"
            )));
        }
        for cone in &self.cones {
            if cone.dim() == 0 {
                return Err(Error::validation("zero-dimensional cone segment"));
            }
        }
        let finite = self.objective.iter().all(|v| v.is_finite())
            && self.rhs.iter().all(|v| v.is_finite())
            && self.constraint_matrix.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::validation("program data contains non-finite values"));
        }
        Ok(())
    }

    /// Plain-text dump for cross-checking against external solvers: header
    /// lines describe the cone layout, then objective / matrix / rhs as
    /// `row col value` triplets (matrix-market style, zero entries omitted).
    pub fn dump_debug<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "% conic program dump")?;
        write!(w, "% cones:")?;
        for cone in &self.cones {
            match cone {
                Cone::Zero(n) => write!(w, " zero({n})")?,
                Cone::NonNeg(n) => write!(w, " nonneg({n})")?,
                Cone::Soc(n) => write!(w, " soc({n})")?,
                Cone::Psd(s) => write!(w, " psd({s})")?,
            }
        }
        writeln!(w)?;
        writeln!(w, "objective {}", self.num_vars())?;
        for (i, v) in self.objective.iter().enumerate() {
            if *v != 0.0 {
                writeln!(w, "{} {v:.17e}", i + 1)?;
            }
        }
        writeln!(
            w,
            "matrix {} {}",
            self.num_constraints(),
            self.num_vars()
        )?;
        for j in 0..self.constraint_matrix.ncols() {
            for i in 0..self.constraint_matrix.nrows() {
                let v = self.constraint_matrix[(i, j)];
                if v != 0.0 {
                    writeln!(w, "{} {} {v:.17e}", i + 1, j + 1)?;
                }
            }
        }
        writeln!(w, "rhs {}", self.num_constraints())?;
        for (i, v) in self.rhs.iter().enumerate() {
            if *v != 0.0 {
                writeln!(w, "{} {v:.17e}", i + 1)?;
            }
        }
        Ok(())
    }
}

/// Solver output. When `status` is [`SolveStatus::Optimal`], the reported
/// residuals are at most the requested tolerance.
#[derive(Debug, Clone)]
pub struct ConicSolution {
    /// Primal point `x` (exactly on the affine set, in the cone within
    /// `primal_residual`).
    pub primal: DVector<f64>,
    /// Dual multipliers `y` of the equality system.
    pub dual: DVector<f64>,
    pub status: SolveStatus,
    /// max of normalized equality residual and normalized cone distance.
    pub primal_residual: f64,
    /// Normalized norm of `c - A'y - s`.
    pub dual_residual: f64,
    /// Normalized duality gap `|c'x - b'y|`.
    pub gap: f64,
    /// Iterations used.
    pub iterations: usize,
    /// Objective value `c'x`.
    pub objective_value: f64,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Real embedding of a complex Hermitian matrix: `[Re H, -Im H; Im H, Re H]`.
/// The embedding is PSD iff `H` is, its trace doubles, and every eigenvalue of
/// `H` appears twice.
pub fn embed_hermitian(h: &HermitianMatrix) -> Result<DMatrix<f64>> {
    if !is_hermitian(h, HERMITIAN_TOL) {
        return Err(Error::validation("embedding input must be Hermitian"));
    }
    let n = h.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = h[(i, j)];
            out[(i, j)] = v.re;
            out[(i + n, j + n)] = v.re;
            out[(i, j + n)] = -v.im;
            out[(i + n, j)] = v.im;
        }
    }
    Ok(out)
}

/// Inverse of [`embed_hermitian`] with structure averaging: any symmetric
/// `2N x 2N` matrix is first projected onto the embedding-invariant subspace,
/// then read back as a complex Hermitian matrix. For exact embeddings this is
/// the exact inverse.
pub fn unembed_hermitian(m: &DMatrix<f64>) -> HermitianMatrix {
    let n2 = m.nrows();
    debug_assert_eq!(n2 % 2, 0);
    let n = n2 / 2;
    let mut out = HermitianMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.25 * (m[(i, j)] + m[(j, i)] + m[(i + n, j + n)] + m[(j + n, i + n)]);
            let im = 0.25 * (m[(i + n, j)] + m[(j, i + n)] - m[(i, j + n)] - m[(j + n, i)]);
            out[(i, j)] = Complex64::new(re, im);
        }
    }
    // Hermitianize exactly.
    for i in 0..n {
        out[(i, i)] = Complex64::new(out[(i, i)].re, 0.0);
        for j in 0..i {
            let avg = (out[(i, j)] + out[(j, i)].conj()) * Complex64::new(0.5, 0.0);
            out[(i, j)] = avg;
            out[(j, i)] = avg.conj();
        }
    }
    out
}

/// Nearest PSD matrix in Frobenius norm (real symmetric input).
pub fn project_psd(s: &DMatrix<f64>) -> DMatrix<f64> {
    project_psd_matrix(s)
}

/// Projection onto the second-order cone, reading `v = (t, x)`.
pub fn project_soc(v: &DVector<f64>) -> DVector<f64> {
    let mut out = v.clone();
    cones::project_soc_slice(out.as_mut_slice());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn embed_identity() {
        let h = HermitianMatrix::identity(2, 2);
        let e = embed_hermitian(&h).unwrap();
        assert_eq!(e, DMatrix::identity(4, 4));
    }

    /// Eigenvalues of the embedding are those of H with doubled multiplicity
    /// (checked with the eigendecomposition as an independent oracle).
    #[test]
    fn embed_pauli_y_eigenvalues() {
        let mut h = HermitianMatrix::zeros(2, 2);
        h[(0, 1)] = c(0.0, 1.0);
        h[(1, 0)] = c(0.0, -1.0);
        let e = embed_hermitian(&h).unwrap();
        let mut vals: Vec<f64> = e.symmetric_eigen().eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in vals.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn embed_doubles_trace_and_roundtrips() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(2, &[4]);
        for _ in 0..50 {
            let raw = HermitianMatrix::from_fn(4, 4, |_, _| {
                c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            let h = HermitianMatrix::from_fn(4, 4, |i, j| {
                (raw[(i, j)] + raw[(j, i)].conj()) * c(0.5, 0.0)
            });
            let e = embed_hermitian(&h).unwrap();
            assert!((e.trace() - 2.0 * h.trace().re).abs() < 1e-12);
            let back = unembed_hermitian(&e);
            assert!((&back - &h).norm() < 1e-12);
        }
    }

    #[test]
    fn embed_preserves_psdness_both_ways() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(8, &[1]);
        for trial in 0..100 {
            let raw = HermitianMatrix::from_fn(3, 3, |_, _| {
                c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            // Even trials: PSD input; odd trials: generic Hermitian.
            let h = if trial % 2 == 0 {
                &raw * raw.adjoint()
            } else {
                HermitianMatrix::from_fn(3, 3, |i, j| {
                    (raw[(i, j)] + raw[(j, i)].conj()) * c(0.5, 0.0)
                })
            };
            let e = embed_hermitian(&h).unwrap();
            let h_min = crate::linalg::min_eigenvalue(&h);
            let e_min = e
                .clone()
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            assert!(
                (h_min - e_min).abs() < 1e-10,
                "min eigenvalues differ: {h_min} vs {e_min}"
            );
        }
    }

    #[test]
    fn embed_rejects_non_hermitian() {
        let mut h = HermitianMatrix::zeros(2, 2);
        h[(0, 1)] = c(1.0, 0.0);
        assert!(embed_hermitian(&h).is_err());
    }

    #[test]
    fn dump_roundtrip_line_count() {
        let prog = ConicProgram {
            objective: nalgebra::dvector![1.0, 0.0, 2.0],
            constraint_matrix: DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
            rhs: nalgebra::dvector![1.0],
            cones: vec![Cone::NonNeg(3)],
        };
        let mut buf = Vec::new();
        prog.dump_debug(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("nonneg(3)"));
        // 2 header lines + objective header + 2 nonzeros + matrix header +
        // 3 nonzeros + rhs header + 1 nonzero
        assert_eq!(text.lines().count(), 11, "{text}");
    }

    #[test]
    fn validate_catches_dimension_mismatch() {
        let prog = ConicProgram {
            objective: nalgebra::dvector![1.0, 2.0],
            constraint_matrix: DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
            rhs: nalgebra::dvector![1.0],
            cones: vec![Cone::NonNeg(2)],
        };
        assert!(prog.validate().is_err());
    }
}
