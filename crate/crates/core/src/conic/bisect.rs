//! Bisection over a monotone feasibility oracle.
//!
//! Quasi-convex designs reduce to this: at a fixed level `t`, the fractional
//! constraints become linear, so each oracle call is a single conic program
//! and the optimal level is found by bracketing.

use crate::error::{Error, Result};

/// Oracle answer at a fixed level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    Infeasible,
}

/// Result of a bisection run.
#[derive(Debug, Clone)]
pub struct BisectOutcome {
    /// Midpoint of the final bracket.
    pub t_star: f64,
    /// Feasible (upper) end of the final bracket.
    pub t_feasible: f64,
    /// Infeasible (lower) end of the final bracket.
    pub t_infeasible: f64,
    /// Number of oracle calls made by the bisection loop.
    pub iterations: usize,
    /// `(t, feasible)` pairs in evaluation order.
    pub trace: Vec<(f64, bool)>,
}

/// Shrinks `[t_low, t_high]` to width `tol` assuming the oracle is monotone
/// (infeasible below some threshold, feasible above). `t_high` must be
/// feasible; `t_low` is assumed infeasible (or a trivial lower bound).
///
/// The loop makes at most `ceil(log2((t_high - t_low)/tol))` oracle calls.
pub fn bisect_feasibility<F>(
    mut oracle: F,
    t_low: f64,
    t_high: f64,
    tol: f64,
) -> Result<BisectOutcome>
where
    F: FnMut(f64) -> Feasibility,
{
    if !(tol > 0.0) {
        return Err(Error::domain("bisection tolerance must be positive"));
    }
    if !(t_high >= t_low) {
        return Err(Error::domain("bisection bracket is inverted"));
    }
    if oracle(t_high) == Feasibility::Infeasible {
        return Err(Error::Solver(
            "no feasible point at upper bound".into(),
        ));
    }
    let mut lo = t_low;
    let mut hi = t_high;
    let mut trace = vec![(t_high, true)];
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // Floating-point limit reached.
        }
        let fsb = oracle(mid) == Feasibility::Feasible;
        trace.push((mid, fsb));
        if fsb {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    Ok(BisectOutcome {
        t_star: 0.5 * (lo + hi),
        t_feasible: hi,
        t_infeasible: lo,
        iterations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_monotone_oracle() {
        let calls = std::cell::Cell::new(0usize);
        let oracle = |t: f64| {
            calls.set(calls.get() + 1);
            if t >= 3.0 {
                Feasibility::Feasible
            } else {
                Feasibility::Infeasible
            }
        };
        let out = bisect_feasibility(oracle, 0.0, 8.0, 1e-3).unwrap();
        assert!((out.t_star - 3.0).abs() <= 1e-3);
        let bound = ((8.0f64 / 1e-3).log2()).ceil() as usize;
        assert!(out.iterations <= bound, "{} > {bound}", out.iterations);
        assert!(out.iterations <= 13);
    }

    #[test]
    fn halving_tolerance_costs_at_most_one_iteration() {
        let mk = |tol: f64| {
            bisect_feasibility(
                |t| {
                    if t >= 3.0 {
                        Feasibility::Feasible
                    } else {
                        Feasibility::Infeasible
                    }
                },
                0.0,
                8.0,
                tol,
            )
            .unwrap()
            .iterations
        };
        let a = mk(1e-3);
        let b = mk(5e-4);
        assert!(b <= a + 1, "{b} vs {a}");
    }

    #[test]
    fn infeasible_upper_bound_is_an_error() {
        let r = bisect_feasibility(|_| Feasibility::Infeasible, 0.0, 1.0, 1e-3);
        assert!(matches!(r, Err(Error::Solver(_))));
    }
}
