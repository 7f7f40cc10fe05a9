//! Operator-splitting solver for the standard-form conic program.
//!
//! Iteration (scaled-dual ADMM with over-relaxation):
//!
//! ```text
//!   x   <- P_aff(z - u - c/rho)          affine projection onto {Ax=b}
//!   xh  <- alpha*x + (1-alpha)*z
//!   z   <- P_K(xh + u)                   cone projection
//!   u   <- u + xh - z
//! ```
//!
//! The affine projection uses a Cholesky factorization of `A A'` computed once
//! per solve. Multipliers fall out of the projection: `y = -rho*w` with
//! `w = (AA')^{-1}(Av - b)`, and `s = -rho*u` lies in the dual cone exactly
//! (Moreau decomposition), so the dual residual is `||c - A'y - s||`.
//!
//! Termination reports normalized residuals:
//!   primal  max(||Ax-b||/(1+||b||), dist(x,K)/(1+||x||))
//!   dual    ||c - A'y - s|| / (1+||c||)
//!   gap     |c'x - b'y| / (1+|c'x|+|b'y|)
//!
//! Infeasibility is declared either through a Farkas certificate
//! (`A'y + s = 0, s in K*, b'y > 0` within tight tolerances) or, failing
//! that, when residuals stagnate above `stall_residual` for a full window
//! while the iterate norm grows. Unboundedness uses the mirror certificate
//! (`Ad ~ 0, d in K, c'd < 0`).
//!
//! The iteration schedule is fixed and there is no randomness: identical
//! inputs produce bit-identical outputs.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::cones::{cone_distance, project_cone_product};
use super::{ConicProgram, ConicSolution};
use crate::error::{Error, Result};

/// Outcome classification of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

/// Tunables; [`Default`] matches the documented contract (tol `1e-7`,
/// `max_iter` 50000).
#[derive(Debug, Clone)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial penalty parameter.
    pub rho: f64,
    /// Over-relaxation factor in (1, 2).
    pub over_relax: f64,
    /// Residuals are evaluated every this many iterations.
    pub check_every: usize,
    /// Stagnation window for the infeasibility heuristic.
    pub stall_window: usize,
    /// Residual level above which stagnation counts as infeasibility evidence.
    pub stall_residual: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 50_000,
            rho: 1.0,
            over_relax: 1.6,
            check_every: 25,
            stall_window: 5_000,
            stall_residual: 1e-3,
        }
    }
}

/// Iterate state that may seed a later solve of a program with identical
/// dimensions (used by bisection drivers; deterministic).
#[derive(Debug, Clone)]
pub struct WarmState {
    pub z: DVector<f64>,
    pub u: DVector<f64>,
    pub rho: f64,
}

/// Solves the program at the given tolerance and iteration cap.
pub fn solve(prog: &ConicProgram, tol: f64, max_iter: usize) -> Result<ConicSolution> {
    let settings = SolverSettings {
        tol,
        max_iter,
        ..SolverSettings::default()
    };
    solve_with(prog, &settings, None).map(|(sol, _)| sol)
}

/// Full-control entry point; returns the final iterate state for warm
/// starting subsequent solves of equal dimensions.
pub fn solve_with(
    prog: &ConicProgram,
    settings: &SolverSettings,
    warm: Option<&WarmState>,
) -> Result<(ConicSolution, WarmState)> {
    prog.validate()?;
    let n = prog.num_vars();
    let m = prog.num_constraints();
    let a = &prog.constraint_matrix;
    let b = &prog.rhs;
    let c = &prog.objective;

    // Factorize A A' once; ridge-regularize only if rows are dependent.
    let chol = factor_gram(a)?;

    let b_norm = b.norm();
    let c_norm = c.norm();
    // Pure feasibility problem: any cone-and-affine-feasible point is optimal
    // with the zero dual certificate, so only the primal residual matters.
    let feasibility_mode = c_norm == 0.0;

    let mut rho = settings.rho;
    let (mut z, mut u) = match warm {
        Some(w) if w.z.len() == n && w.u.len() == n => {
            rho = w.rho;
            (w.z.clone(), w.u.clone())
        }
        _ => (DVector::zeros(n), DVector::zeros(n)),
    };

    let mut x = DVector::zeros(n);
    let mut v = DVector::zeros(n);
    let mut w_mul = DVector::zeros(m); // (AA')^{-1} (Av - b)
    let mut av = DVector::zeros(m);
    let mut atw = DVector::zeros(n);
    let mut rd_vec = DVector::zeros(n);

    let mut stall_count = 0usize;
    let mut stall_norm_start = f64::INFINITY;
    let mut status = SolveStatus::MaxIter;
    let mut iters_done = settings.max_iter;

    for iter in 0..settings.max_iter {
        // v = z - u - c/rho
        v.copy_from(&z);
        v -= &u;
        v.axpy(-1.0 / rho, c, 1.0);

        // x = v - A' (AA')^{-1} (A v - b)
        if m > 0 {
            av.gemv(1.0, a, &v, 0.0);
            av -= b;
            w_mul.copy_from(&av);
            chol.solve_mut(&mut w_mul);
            atw.gemv_tr(1.0, a, &w_mul, 0.0);
            x.copy_from(&v);
            x -= &atw;
        } else {
            x.copy_from(&v);
        }

        // Over-relaxed consensus step.
        let alpha = settings.over_relax;
        // z_new = P_K(alpha*x + (1-alpha)*z + u), u += alpha*x + (1-alpha)*z - z_new
        let mut zin = DVector::zeros(n);
        zin.copy_from(&x);
        zin *= alpha;
        zin.axpy(1.0 - alpha, &z, 1.0);
        let xh = zin.clone();
        zin += &u;
        project_cone_product(&prog.cones, zin.as_mut_slice(), false);
        // u <- u + xh - z_new
        u += &xh;
        u -= &zin;
        z = zin;

        let checking = (iter + 1) % settings.check_every == 0 || iter + 1 == settings.max_iter;
        if !checking {
            continue;
        }

        let mut metrics = compute_metrics(
            prog, &chol, &x, &z, &u, &v, &w_mul, rho, b_norm, c_norm, &mut rd_vec,
        );
        if feasibility_mode {
            metrics.dual = 0.0;
            metrics.gap = 0.0;
        }

        if metrics.worst() <= settings.tol {
            status = SolveStatus::Optimal;
            iters_done = iter + 1;
            break;
        }

        // Divergence certificates, only while far from convergence.
        if m > 0 && metrics.worst() > 1e3 * settings.tol {
            if let Some(st) = certificate_check(prog, &metrics, &u, &x, rho, b_norm, c_norm) {
                status = st;
                iters_done = iter + 1;
                break;
            }
        }

        // Stagnation heuristic: the primal residual stuck above
        // stall_residual for a full window while the iterate norm grows.
        if metrics.primal > settings.stall_residual {
            if stall_count == 0 {
                stall_norm_start = u.norm() + x.norm();
            }
            stall_count += settings.check_every;
            if stall_count >= settings.stall_window {
                let norm_now = u.norm() + x.norm();
                // Stagnant residuals alone are not evidence; demand clear
                // divergence of the iterates over the window.
                if norm_now > stall_norm_start * 10.0 + 1.0 {
                    status = SolveStatus::Infeasible;
                    iters_done = iter + 1;
                    break;
                }
                stall_count = 0;
            }
        } else {
            stall_count = 0;
        }

        // Residual-balancing penalty update (factor 2, deterministic).
        if (iter + 1) % 100 == 0 {
            if metrics.primal > 10.0 * metrics.dual && rho < 1e8 {
                rho *= 2.0;
                u /= 2.0;
            } else if metrics.dual > 10.0 * metrics.primal && rho > 1e-6 {
                rho /= 2.0;
                u *= 2.0;
            }
        }
    }

    // Metrics of the returned iterate.
    let mut metrics = compute_metrics(
        prog, &chol, &x, &z, &u, &v, &w_mul, rho, b_norm, c_norm, &mut rd_vec,
    );

    // Multipliers of the final x-update; the zero certificate in pure
    // feasibility mode.
    let mut y = w_mul.clone();
    y *= -rho;
    if feasibility_mode {
        metrics.dual = 0.0;
        metrics.gap = 0.0;
        y.fill(0.0);
    }

    let objective_value = c.dot(&x);
    let solution = ConicSolution {
        primal: x.clone(),
        dual: y,
        status,
        primal_residual: metrics.primal,
        dual_residual: metrics.dual,
        gap: metrics.gap,
        iterations: iters_done,
        objective_value,
    };
    let warm_out = WarmState { z, u, rho };
    Ok((solution, warm_out))
}

fn factor_gram(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let m = a.nrows();
    if m == 0 {
        // Degenerate: no constraints. Build a 0x0 factorization.
        return Cholesky::new(DMatrix::zeros(0, 0))
            .ok_or_else(|| Error::Solver("empty factorization failed".into()));
    }
    let gram = a * a.transpose();
    let mean_diag = gram.diagonal().mean().max(1e-30);
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut g = gram.clone();
        if ridge > 0.0 {
            for i in 0..m {
                g[(i, i)] += ridge;
            }
        }
        if let Some(ch) = Cholesky::new(g) {
            return Ok(ch);
        }
        ridge = if ridge == 0.0 {
            1e-12 * mean_diag
        } else {
            ridge * 100.0
        };
    }
    Err(Error::Solver(
        "equality system Gram matrix is numerically singular".into(),
    ))
}

#[derive(Debug, Clone, Copy)]
struct Metrics {
    primal: f64,
    dual: f64,
    gap: f64,
}

impl Metrics {
    fn worst(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[allow(clippy::too_many_arguments)]
fn compute_metrics(
    prog: &ConicProgram,
    _chol: &Cholesky<f64, Dyn>,
    x: &DVector<f64>,
    _z: &DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
    w_mul: &DVector<f64>,
    rho: f64,
    b_norm: f64,
    c_norm: f64,
    rd_vec: &mut DVector<f64>,
) -> Metrics {
    let a = &prog.constraint_matrix;
    let b = &prog.rhs;
    let c = &prog.objective;
    let m = prog.num_constraints();

    // Equality residual ||Ax - b|| (near zero by construction).
    let eq_res = if m > 0 {
        let mut ax = DVector::zeros(m);
        ax.gemv(1.0, a, x, 0.0);
        ax -= b;
        ax.norm() / (1.0 + b_norm)
    } else {
        0.0
    };
    // Cone distance of the affine-feasible point.
    let cone_res = cone_distance(&prog.cones, x.as_slice(), false) / (1.0 + x.norm());
    let primal = eq_res.max(cone_res);

    // rd_vec = c - A'y - s = c + rho*(v - x) + rho*u
    rd_vec.copy_from(c);
    rd_vec.axpy(rho, v, 1.0);
    rd_vec.axpy(-rho, x, 1.0);
    rd_vec.axpy(rho, u, 1.0);
    let dual = rd_vec.norm() / (1.0 + c_norm);

    let c_dot_x = c.dot(x);
    let b_dot_y = if m > 0 { -rho * b.dot(w_mul) } else { 0.0 };
    let gap = (c_dot_x - b_dot_y).abs() / (1.0 + c_dot_x.abs() + b_dot_y.abs());

    Metrics { primal, dual, gap }
}

/// Farkas-style certificate checks on the diverging iterates.
fn certificate_check(
    prog: &ConicProgram,
    _metrics: &Metrics,
    u: &DVector<f64>,
    x: &DVector<f64>,
    rho: f64,
    b_norm: f64,
    c_norm: f64,
) -> Option<SolveStatus> {
    let a = &prog.constraint_matrix;
    let b = &prog.rhs;
    let c = &prog.objective;
    let m = prog.num_constraints();
    let n = prog.num_vars();

    // Primal infeasibility: exhibit y with -A'y in K* and b'y > 0. The
    // candidate direction comes from the diverging scaled dual u; it is
    // refined by a least-squares fit through the Gram factorization and then
    // validated LITERALLY, so a fired certificate is a proof up to the
    // stated tolerances and feasible problems cannot trip it.
    let s_cand = u * (-rho);
    let s_norm = s_cand.norm();
    if s_norm > 1e-8 {
        let mut rhs = DVector::zeros(m);
        rhs.gemv(1.0, a, &s_cand, 0.0);
        rhs *= -1.0;
        if let Ok(chol) = factor_gram(a) {
            let mut y = rhs;
            chol.solve_mut(&mut y);
            let y_norm = y.norm();
            if y_norm > 1e-12 {
                y /= y_norm;
                let mut s_fit = DVector::zeros(n);
                s_fit.gemv_tr(-1.0, a, &y, 0.0);
                let dist = cone_distance(&prog.cones, s_fit.as_slice(), true);
                let byy = b.dot(&y);
                if dist <= 1e-9 * s_fit.norm().max(1.0) && byy > 1e-3 * (1.0 + b_norm) {
                    return Some(SolveStatus::Infeasible);
                }
            }
        }
    }

    // Unboundedness: direction d = x/||x|| with Ad ~ 0, d in K, c'd < 0.
    let x_norm = x.norm();
    if x_norm > 1e6 {
        let d = x / x_norm;
        let mut ad = DVector::zeros(m);
        ad.gemv(1.0, a, &d, 0.0);
        let ad_norm = ad.norm();
        let dist = cone_distance(&prog.cones, d.as_slice(), false);
        let cd = c.dot(&d);
        if ad_norm < 1e-7 * (1.0 + b_norm) && dist < 1e-7 && cd < -1e-7 * (1.0 + c_norm) {
            return Some(SolveStatus::Unbounded);
        }
    }
    None
}
