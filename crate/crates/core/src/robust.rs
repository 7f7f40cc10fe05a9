//! Robust secure designs under imperfect knowledge: target angle known only
//! within an interval, user channels known with bounded-norm or Gaussian
//! error.
//!
//! The angular uncertainty replicates the eavesdropping caps at sampled
//! angles of the interval and widens the sensing mainlobe over it. Channel
//! error enters the per-user SINR constraints as a worst-case ball: bounded
//! errors use their radius directly, Gaussian errors are restricted to a
//! sphere whose radius is a chi-square quantile (a safe convexification of
//! the outage constraint). Monte-Carlo audits verify both guarantees on the
//! solved design.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::array::AngleInterval;
use crate::error::{Error, Result};
use crate::linalg::ComplexVector;
use crate::rng::stream_rng;
use crate::secure::{
    drive_design, user_sinr_cov, BeamformerDesign, DesignContext, Scenario,
};
use num_complex::Complex64;
use rand_distr::Distribution;

/// Channel-state-information error model for the legitimate users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CsiErrorModel {
    /// Error of bounded norm (distribution unknown): `||e|| <= radius`.
    Bounded { radius: f64 },
    /// I.i.d. circular Gaussian error per entry with the given variance;
    /// the SINR constraint must hold with probability `1 - outage`.
    Gaussian { variance: f64, outage: f64 },
}

impl CsiErrorModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CsiErrorModel::Bounded { radius } => {
                if radius < 0.0 || !radius.is_finite() {
                    return Err(Error::domain("error radius must be finite and >= 0"));
                }
            }
            CsiErrorModel::Gaussian { variance, outage } => {
                if variance < 0.0 || !variance.is_finite() {
                    return Err(Error::domain("error variance must be finite and >= 0"));
                }
                if !(outage > 0.0 && outage <= 0.5) {
                    return Err(Error::domain("outage probability must lie in (0, 0.5]"));
                }
            }
        }
        Ok(())
    }

    /// Worst-case ball radius used by the S-procedure constraint. Bounded
    /// errors pass through; Gaussian errors are sphere-bounded at the
    /// `1 - outage` quantile: `r = sqrt(variance/2 * Q_{chi2,2N}(1-outage))`.
    pub fn sphere_radius(&self, num_elements: usize) -> Result<f64> {
        self.validate()?;
        match *self {
            CsiErrorModel::Bounded { radius } => Ok(radius),
            CsiErrorModel::Gaussian { variance, outage } => {
                if variance == 0.0 {
                    return Ok(0.0);
                }
                let dof = 2 * num_elements;
                let chi2 = ChiSquared::new(dof as f64)
                    .map_err(|e| Error::domain(format!("chi-square dof: {e}")))?;
                let q = chi2.inverse_cdf(1.0 - outage);
                Ok((variance / 2.0 * q).sqrt())
            }
        }
    }
}

/// `L` uniformly spaced angles covering the interval inclusive of endpoints;
/// a single sample collapses to the midpoint.
pub fn sample_angle_interval(interval: &AngleInterval, num_samples: usize) -> Result<Vec<f64>> {
    if num_samples < 1 {
        return Err(Error::domain("need at least one interval sample"));
    }
    if num_samples == 1 {
        return Ok(vec![interval.midpoint()]);
    }
    let step = interval.width() / (num_samples - 1) as f64;
    Ok((0..num_samples)
        .map(|i| interval.lower + step * i as f64)
        .collect())
}

/// Per-draw audit row.
#[derive(Debug, Clone, Serialize)]
pub struct AuditDraw {
    pub draw_index: usize,
    pub realized_sinrs: Vec<f64>,
    pub violated: bool,
}

/// Monte-Carlo audit of the channel-error guarantee on a solved design.
#[derive(Debug, Clone, Serialize)]
pub struct CsiAuditReport {
    pub draws: usize,
    pub violations: usize,
    pub violation_fraction: f64,
    /// Lowest realized SINR over draws and users.
    pub worst_sinr: f64,
    /// Per-draw rows (kept for CSV export).
    pub rows: Vec<AuditDraw>,
}

/// Robust-design companion report.
#[derive(Debug, Clone, Serialize)]
pub struct RobustReport {
    /// Sampled uncertainty angles.
    pub angles: Vec<f64>,
    /// Max-over-streams eavesdropping SINR at each sampled angle.
    pub eve_sinr_per_angle: Vec<f64>,
    pub eve_sinr_sum: f64,
    pub eve_sinr_max: f64,
    pub csi_audit: Option<CsiAuditReport>,
}

/// Solves the robust secure design and audits it.
///
/// Without an uncertainty block this reduces exactly to the nominal design.
/// The audit draw count defaults to `10_000` (override with `audit_draws`).
pub fn solve_robust_design(
    scenario: &Scenario,
    seed: u64,
    audit_draws: Option<usize>,
) -> Result<(BeamformerDesign, RobustReport)> {
    let ctx = DesignContext::new(scenario, true)?;
    let design = drive_design(&ctx)?;
    let report = build_robust_report(scenario, &ctx, &design, seed, audit_draws.unwrap_or(10_000))?;
    Ok((design, report))
}

pub(crate) fn build_robust_report(
    scenario: &Scenario,
    ctx: &DesignContext,
    design: &BeamformerDesign,
    seed: u64,
    audit_draws: usize,
) -> Result<RobustReport> {
    let noise_eve = scenario.noise_eve;
    let k_users = design.covariances.len();
    let eve_sinr_per_angle: Vec<f64> = ctx
        .eve_samples
        .iter()
        .map(|g| {
            (0..k_users)
                .map(|k| match &design.beamformers {
                    Some(w) => crate::secure::eve_sinr(w, k, g, noise_eve),
                    None => crate::secure::eve_sinr_cov(&design.covariances, k, g, noise_eve),
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let sum = eve_sinr_per_angle.iter().sum();
    let max = eve_sinr_per_angle.iter().copied().fold(0.0, f64::max);

    let csi_audit = match scenario.uncertainty.as_ref().and_then(|u| u.csi_error.as_ref()) {
        Some(model) => Some(audit_csi(scenario, ctx, design, model, seed, audit_draws)?),
        None => None,
    };

    Ok(RobustReport {
        angles: ctx.eve_angles.clone(),
        eve_sinr_per_angle,
        eve_sinr_sum: sum,
        eve_sinr_max: max,
        csi_audit,
    })
}

/// Draws channel errors from the model (on-sphere for bounded, Gaussian for
/// gaussian), recomputes every user's SINR on the perturbed channels, and
/// counts draws violating the threshold.
pub(crate) fn audit_csi(
    scenario: &Scenario,
    ctx: &DesignContext,
    design: &BeamformerDesign,
    model: &CsiErrorModel,
    seed: u64,
    draws: usize,
) -> Result<CsiAuditReport> {
    model.validate()?;
    let n = scenario.geometry.num_elements;
    let gamma = scenario.user_sinr_threshold;
    let k_users = ctx.channels.num_users();

    let rows: Vec<AuditDraw> = (0..draws)
        .into_par_iter()
        .map(|d| {
            let mut perturbed = ctx.channels.clone();
            for k in 0..k_users {
                let mut rng = stream_rng(seed, &[0xa0d17, d as u64, k as u64]);
                let e = draw_error(model, n, &mut rng);
                perturbed.user_channels[k] += e;
            }
            let realized: Vec<f64> = (0..k_users)
                .map(|k| match &design.beamformers {
                    Some(w) => crate::secure::user_sinr(w, k, &perturbed),
                    None => user_sinr_cov(&design.covariances, k, &perturbed),
                })
                .collect();
            let violated = realized.iter().any(|&s| s < gamma * (1.0 - 1e-9));
            AuditDraw {
                draw_index: d,
                realized_sinrs: realized,
                violated,
            }
        })
        .collect();

    let violations = rows.iter().filter(|r| r.violated).count();
    let worst = rows
        .iter()
        .flat_map(|r| r.realized_sinrs.iter().copied())
        .fold(f64::INFINITY, f64::min);
    Ok(CsiAuditReport {
        draws,
        violations,
        violation_fraction: violations as f64 / draws.max(1) as f64,
        worst_sinr: worst,
        rows,
    })
}

fn draw_error(
    model: &CsiErrorModel,
    n: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> ComplexVector {
    let gaussian = |rng: &mut rand_chacha::ChaCha8Rng| -> ComplexVector {
        ComplexVector::from_iterator(
            n,
            (0..n).map(|_| {
                let re: f64 = rand_distr::StandardNormal.sample(rng);
                let im: f64 = rand_distr::StandardNormal.sample(rng);
                Complex64::new(re, im)
            }),
        )
    };
    match *model {
        CsiErrorModel::Bounded { radius } => {
            // Uniform direction on the sphere of the given radius.
            let g = gaussian(rng);
            let norm = g.norm();
            if norm == 0.0 {
                return ComplexVector::zeros(n);
            }
            g.map(|e| e * Complex64::new(radius / norm, 0.0))
        }
        CsiErrorModel::Gaussian { variance, .. } => {
            let s = (variance / 2.0).sqrt();
            gaussian(rng).map(|e| e * Complex64::new(s, 0.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interval_sampling_matches_grid() {
        let iv = AngleInterval::new(-5.0_f64.to_radians(), 5.0_f64.to_radians()).unwrap();
        let s = sample_angle_interval(&iv, 11).unwrap();
        assert_eq!(s.len(), 11);
        for (i, v) in s.iter().enumerate() {
            let want = (-5.0 + i as f64).to_radians();
            assert_relative_eq!(*v, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn interval_single_sample_is_midpoint() {
        let iv = AngleInterval::new(-5.0_f64.to_radians(), 5.0_f64.to_radians()).unwrap();
        let s = sample_angle_interval(&iv, 1).unwrap();
        assert_eq!(s, vec![0.0]);
    }

    #[test]
    fn degenerate_interval_repeats_point() {
        let iv = AngleInterval::new(3.0_f64.to_radians(), 3.0_f64.to_radians()).unwrap();
        for l in [1, 2, 5] {
            let s = sample_angle_interval(&iv, l).unwrap();
            assert!(s.iter().all(|v| (*v - 3.0_f64.to_radians()).abs() < 1e-15));
        }
    }

    /// Sphere-bounding radius against an independent chi-square quantile
    /// computed by bisection on the regularized incomplete gamma series.
    #[test]
    fn gaussian_sphere_radius_matches_series_oracle() {
        let model = CsiErrorModel::Gaussian {
            variance: 0.05,
            outage: 0.05,
        };
        let r = model.sphere_radius(16).unwrap();
        let q_oracle = chi2_quantile_oracle(32, 0.95);
        let want = (0.025 * q_oracle).sqrt();
        assert_relative_eq!(r, want, max_relative = 1e-6);
        // Spot value: quantile near 46.19 for 32 dof.
        assert!((q_oracle - 46.19).abs() < 0.02, "{q_oracle}");
    }

    #[test]
    fn zero_variance_radius_is_zero() {
        let model = CsiErrorModel::Gaussian {
            variance: 0.0,
            outage: 0.05,
        };
        assert_eq!(model.sphere_radius(8).unwrap(), 0.0);
    }

    #[test]
    fn outage_domain_checks() {
        let bad = CsiErrorModel::Gaussian {
            variance: 0.1,
            outage: 0.7,
        };
        assert!(bad.validate().is_err());
        let bad2 = CsiErrorModel::Gaussian {
            variance: 0.1,
            outage: 0.0,
        };
        assert!(bad2.validate().is_err());
    }

    /// Chi-square CDF via the lower incomplete gamma series, inverted by
    /// bisection. Independent of statrs.
    fn chi2_quantile_oracle(dof: usize, p: f64) -> f64 {
        let cdf = |x: f64| lower_gamma_reg(dof as f64 / 2.0, x / 2.0);
        let (mut lo, mut hi) = (0.0, 10.0 * dof as f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Regularized lower incomplete gamma by its power series.
    fn lower_gamma_reg(a: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let ln_gamma_a = ln_gamma(a);
        let mut term = 1.0 / a;
        let mut sum = term;
        for k in 1..10_000 {
            term *= x / (a + k as f64);
            sum += term;
            if term < sum * 1e-16 {
                break;
            }
        }
        (a * x.ln() - x - ln_gamma_a).exp() * sum
    }

    /// Lanczos log-gamma.
    fn ln_gamma(z: f64) -> f64 {
        const G: [f64; 9] = [
            0.999_999_999_999_809_93,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_13,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        let z = z - 1.0;
        let mut x = G[0];
        for (i, &g) in G.iter().enumerate().skip(1) {
            x += g / (z + i as f64);
        }
        let t = z + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
    }
}
