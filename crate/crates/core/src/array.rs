//! Uniform linear array model: steering vectors, channels, transmit
//! beampatterns and beampattern templates.
//!
//! All angles are radians measured from broadside, restricted to
//! `[-pi/2, pi/2]`. Element `n` of the steering vector toward angle `theta`
//! carries phase `2*pi*spacing*n*sin(theta)`; with the default half-wavelength
//! spacing this is `pi*n*sin(theta)`.
//!
//! # Example
//!
//! ```
//! use isac_core::array::{ArrayGeometry, steering_vector};
//!
//! let ula = ArrayGeometry::new(8, 0.5).unwrap();
//! let a = steering_vector(&ula, 0.0).unwrap();
//! assert_eq!(a.len(), 8);
//! // Broadside steering is all-ones.
//! assert!(a.iter().all(|e| (e - num_complex::Complex64::new(1.0, 0.0)).norm() < 1e-15));
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{is_hermitian, quad_form, ComplexVector, HermitianMatrix};
use crate::rng::stream_rng;

/// Uniform linear array description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArrayGeometry {
    /// Number of elements, `N >= 1`.
    pub num_elements: usize,
    /// Inter-element spacing in wavelengths, `> 0` (default 0.5).
    pub spacing_wavelengths: f64,
}

impl ArrayGeometry {
    pub fn new(num_elements: usize, spacing_wavelengths: f64) -> Result<Self> {
        if num_elements < 1 {
            return Err(Error::validation("array needs at least one element"));
        }
        if !(spacing_wavelengths > 0.0) {
            return Err(Error::validation("element spacing must be positive"));
        }
        Ok(Self {
            num_elements,
            spacing_wavelengths,
        })
    }

    /// Half-wavelength array, the default geometry.
    pub fn half_wavelength(num_elements: usize) -> Result<Self> {
        Self::new(num_elements, 0.5)
    }
}

/// Closed angular interval inside `[-pi/2, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngleInterval {
    pub lower: f64,
    pub upper: f64,
}

impl AngleInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower > upper {
            return Err(Error::validation("interval lower bound exceeds upper"));
        }
        if lower < -PI / 2.0 - 1e-12 || upper > PI / 2.0 + 1e-12 {
            return Err(Error::domain("interval must lie within [-pi/2, pi/2]"));
        }
        Ok(Self { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, angle: f64) -> bool {
        angle >= self.lower && angle <= self.upper
    }
}

/// Target description: either a single angle or an uncertainty region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TargetRegion {
    Point(f64),
    Interval(AngleInterval),
}

/// A clutter scatterer: angle and complex gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClutterSource {
    pub angle: f64,
    pub gain: Complex64,
}

/// Channels of everything the transmitter talks to or senses: users, target
/// (the potential eavesdropper) and clutter, plus receiver noise powers in
/// linear scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// One channel vector per legitimate user, `K >= 1`.
    pub user_channels: Vec<ComplexVector>,
    /// Nominal target angle (radians).
    pub target_angle: f64,
    /// Target two-way gain; the wiretap channel is `gain * a(target_angle)`.
    pub target_gain: Complex64,
    /// Clutter scatterers, possibly empty.
    pub clutter: Vec<ClutterSource>,
    /// User receiver noise power (linear), `> 0`.
    pub noise_power_user: f64,
    /// Target receiver noise power (linear), `> 0`.
    pub noise_power_eve: f64,
    /// Radar receiver noise power (linear), `> 0`.
    pub noise_power_radar: f64,
}

impl ChannelSet {
    pub fn validate(&self, geometry: &ArrayGeometry) -> Result<()> {
        if self.user_channels.is_empty() {
            return Err(Error::validation("at least one user channel required"));
        }
        for (k, h) in self.user_channels.iter().enumerate() {
            if h.len() != geometry.num_elements {
                return Err(Error::validation(format!(
                    "user {k} channel length {} does not match array size {}",
                    h.len(),
                    geometry.num_elements
                )));
            }
        }
        for np in [
            self.noise_power_user,
            self.noise_power_eve,
            self.noise_power_radar,
        ] {
            if !(np > 0.0) {
                return Err(Error::validation("noise powers must be positive"));
            }
        }
        if self.target_angle.abs() > PI / 2.0 + 1e-12 {
            return Err(Error::domain("target angle outside [-pi/2, pi/2]"));
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.user_channels.len()
    }

    /// Wiretap channel of the sensed target.
    pub fn eve_channel(&self, geometry: &ArrayGeometry) -> Result<ComplexVector> {
        los_channel(geometry, self.target_angle, self.target_gain)
    }
}

fn check_angle(angle: f64) -> Result<()> {
    if angle.abs() > PI / 2.0 + 1e-12 {
        return Err(Error::domain(format!(
            "angle {angle} rad outside [-pi/2, pi/2]"
        )));
    }
    Ok(())
}

/// Array response toward `angle`: unit-modulus entries, first entry 1.
pub fn steering_vector(geometry: &ArrayGeometry, angle: f64) -> Result<ComplexVector> {
    check_angle(angle)?;
    let n = geometry.num_elements;
    let step = 2.0 * PI * geometry.spacing_wavelengths * angle.sin();
    Ok(ComplexVector::from_iterator(
        n,
        (0..n).map(|i| Complex64::from_polar(1.0, step * i as f64)),
    ))
}

/// Approximate angular resolution of the array, `2/N` radians.
pub fn angular_resolution(geometry: &ArrayGeometry) -> f64 {
    2.0 / geometry.num_elements as f64
}

/// Transmit beampattern `P(theta) = a(theta)^H R a(theta)` on a list of angles.
/// Small negative values from roundoff are clipped to zero.
pub fn beampattern(
    geometry: &ArrayGeometry,
    r: &HermitianMatrix,
    angles: &[f64],
) -> Result<Vec<f64>> {
    if r.nrows() != geometry.num_elements || r.ncols() != geometry.num_elements {
        return Err(Error::validation("covariance size does not match array"));
    }
    if !is_hermitian(r, crate::linalg::HERMITIAN_TOL) {
        return Err(Error::validation("beampattern input must be Hermitian"));
    }
    let mut out = Vec::with_capacity(angles.len());
    for &theta in angles {
        let a = steering_vector(geometry, theta)?;
        out.push(quad_form(&a, r).max(0.0));
    }
    Ok(out)
}

/// Line-of-sight channel `gain * a(angle)`.
pub fn los_channel(geometry: &ArrayGeometry, angle: f64, gain: Complex64) -> Result<ComplexVector> {
    Ok(steering_vector(geometry, angle)?.map(|e| e * gain))
}

/// Stochastic user-channel models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadingModel {
    /// I.i.d. circular complex Gaussian entries with unit variance.
    Rayleigh,
    /// LoS component toward `angle` with power ratio `kappa/(1+kappa)` plus a
    /// Rayleigh part with the remaining power.
    Rician { kappa: f64, angle: f64 },
}

/// Draws a user channel from the given model; deterministic per seed.
pub fn random_user_channel(
    geometry: &ArrayGeometry,
    rng_seed: u64,
    model: FadingModel,
) -> Result<ComplexVector> {
    let n = geometry.num_elements;
    let mut rng = stream_rng(rng_seed, &[0x63_68_61_6e]);
    let scatter = |rng: &mut dyn rand::RngCore| -> ComplexVector {
        ComplexVector::from_iterator(
            n,
            (0..n).map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
            }),
        )
    };
    match model {
        FadingModel::Rayleigh => Ok(scatter(&mut rng)),
        FadingModel::Rician { kappa, angle } => {
            if kappa < 0.0 {
                return Err(Error::domain("Rician kappa must be nonnegative"));
            }
            check_angle(angle)?;
            let los = steering_vector(geometry, angle)?;
            let nlos = scatter(&mut rng);
            let w_los = (kappa / (1.0 + kappa)).sqrt();
            let w_nlos = (1.0 / (1.0 + kappa)).sqrt();
            Ok(los.map(|e| e * Complex64::new(w_los, 0.0))
                + nlos.map(|e| e * Complex64::new(w_nlos, 0.0)))
        }
    }
}

/// Rectangular sensing template on a sorted angle grid: 1 on the mainlobe
/// region, 0 elsewhere. A point target keeps `1/N` rad on each side (half the
/// `2/N` resolution); an interval target is widened by `1/N` rad on each side.
pub fn desired_beampattern(
    target: &TargetRegion,
    geometry: &ArrayGeometry,
    grid: &[f64],
) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::validation("beampattern template grid is empty"));
    }
    let (lo, hi) = mainlobe_region(target, geometry);
    Ok(grid
        .iter()
        .map(|&theta| if theta >= lo && theta <= hi { 1.0 } else { 0.0 })
        .collect())
}

/// Mainlobe support `[lo, hi]` of the rectangular template.
pub fn mainlobe_region(target: &TargetRegion, geometry: &ArrayGeometry) -> (f64, f64) {
    let half_res = 1.0 / geometry.num_elements as f64;
    match target {
        TargetRegion::Point(theta) => (theta - half_res, theta + half_res),
        TargetRegion::Interval(iv) => (iv.lower - half_res, iv.upper + half_res),
    }
}

/// Uniformly spaced closed grid over `[lo, hi]` with the given step; always
/// includes both endpoints.
pub fn angle_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    debug_assert!(step > 0.0 && hi >= lo);
    let n = ((hi - lo) / step).round() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|i| lo + step * i as f64).collect();
    if let Some(last) = grid.last_mut() {
        if (*last - hi).abs() < step * 1e-9 {
            *last = hi;
        } else if *last < hi - step * 1e-9 {
            grid.push(hi);
        }
    }
    grid
}

/// Gaussian noise sample for a receiver with the given noise power.
pub fn complex_noise(rng: &mut impl Rng, noise_power: f64) -> Complex64 {
    let s = (noise_power / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn geo(n: usize) -> ArrayGeometry {
        ArrayGeometry::half_wavelength(n).unwrap()
    }

    #[test]
    fn steering_broadside_is_all_ones() {
        let a = steering_vector(&geo(8), 0.0).unwrap();
        for e in a.iter() {
            assert_relative_eq!(e.re, 1.0, epsilon = 1e-15);
            assert_relative_eq!(e.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn steering_endfire_two_elements() {
        let a = steering_vector(&geo(2), PI / 2.0).unwrap();
        assert_relative_eq!(a[0].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(a[1].re, -1.0, epsilon = 1e-12);
        assert!(a[1].im.abs() < 1e-12);
    }

    #[test]
    fn steering_phases_at_30_degrees() {
        // sin(pi/6) = 1/2, so element n carries phase pi*n/2.
        let a = steering_vector(&geo(4), PI / 6.0).unwrap();
        let expected = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
        for (e, phi) in a.iter().zip(expected) {
            let want = Complex64::from_polar(1.0, phi);
            assert!((e - want).norm() < 1e-12, "{e} vs phase {phi}");
        }
    }

    #[test]
    fn steering_rejects_out_of_range_angle() {
        assert!(matches!(
            steering_vector(&geo(4), 1.8),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn steering_norm_is_n() {
        for n in [1, 3, 8, 17] {
            let a = steering_vector(&geo(n), 0.4).unwrap();
            assert_relative_eq!(a.norm_squared(), n as f64, epsilon = 1e-12);
            for e in a.iter() {
                assert_relative_eq!(e.norm(), 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn resolution_formula() {
        assert_relative_eq!(angular_resolution(&geo(16)), 0.125);
        assert_relative_eq!(angular_resolution(&geo(2)), 1.0);
        assert_relative_eq!(angular_resolution(&geo(64)), 0.03125);
    }

    #[test]
    fn beampattern_identity_covariance_is_flat_n() {
        let g = geo(6);
        let r = HermitianMatrix::identity(6, 6);
        let p = beampattern(&g, &r, &[-0.7, 0.0, 0.3, 1.2]).unwrap();
        for v in p {
            assert_relative_eq!(v, 6.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn beampattern_coherent_peak_is_n_squared() {
        let g = geo(5);
        let a = steering_vector(&g, 0.35).unwrap();
        let mut r = HermitianMatrix::zeros(5, 5);
        for i in 0..5 {
            for j in 0..5 {
                r[(i, j)] = a[i] * a[j].conj();
            }
        }
        let p = beampattern(&g, &r, &[0.35]).unwrap();
        assert_relative_eq!(p[0], 25.0, epsilon = 1e-9);
    }

    #[test]
    fn beampattern_rejects_non_hermitian() {
        let g = geo(2);
        let mut r = HermitianMatrix::zeros(2, 2);
        r[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(matches!(
            beampattern(&g, &r, &[0.0]),
            Err(Error::Validation(_))
        ));
    }

    /// Off-diagonal steering phases integrate to zero over a full-period
    /// uniform grid in u = sin(theta), so the grid mean recovers trace(R).
    #[test]
    fn beampattern_mean_over_u_grid_equals_trace() {
        let g = geo(8);
        let mut rng = crate::rng::stream_rng(11, &[1]);
        let raw = DMatrix::from_fn(8, 8, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let r = {
            let h = &raw * raw.adjoint();
            h
        };
        let m = 4096;
        let angles: Vec<f64> = (0..m)
            .map(|j| (-1.0 + 2.0 * j as f64 / m as f64).asin())
            .collect();
        let p = beampattern(&g, &r, &angles).unwrap();
        let mean = p.iter().sum::<f64>() / m as f64;
        let tr = r.trace().re;
        assert!((mean - tr).abs() <= 1e-6 * tr, "mean {mean} trace {tr}");
    }

    #[test]
    fn beampattern_linear_in_covariance() {
        let g = geo(4);
        let mut rng = crate::rng::stream_rng(3, &[2]);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            let raw = DMatrix::from_fn(4, 4, |_, _| {
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            &raw * raw.adjoint()
        };
        let r1 = mk(&mut rng);
        let r2 = mk(&mut rng);
        let angles: Vec<f64> = (-9..=9).map(|i| i as f64 * 0.1).collect();
        let p1 = beampattern(&g, &r1, &angles).unwrap();
        let p2 = beampattern(&g, &r2, &angles).unwrap();
        let p12 = beampattern(&g, &(&r1 + &r2), &angles).unwrap();
        for ((a, b), s) in p1.iter().zip(&p2).zip(&p12) {
            assert!((a + b - s).abs() < 1e-12 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn los_channel_cases() {
        let g = geo(4);
        let ones = los_channel(&g, 0.0, Complex64::new(1.0, 0.0)).unwrap();
        assert!(ones.iter().all(|e| (e - Complex64::new(1.0, 0.0)).norm() < 1e-14));
        let zero = los_channel(&g, 0.0, Complex64::new(0.0, 0.0)).unwrap();
        assert!(zero.iter().all(|e| e.norm() == 0.0));
        let g2 = geo(2);
        let v = los_channel(&g2, PI / 2.0, Complex64::new(0.0, 2.0)).unwrap();
        assert!((v[0] - Complex64::new(0.0, 2.0)).norm() < 1e-12);
        assert!((v[1] - Complex64::new(0.0, -2.0)).norm() < 1e-12);
    }

    #[test]
    fn rayleigh_is_deterministic_per_seed() {
        let g = geo(4);
        let h1 = random_user_channel(&g, 42, FadingModel::Rayleigh).unwrap();
        let h2 = random_user_channel(&g, 42, FadingModel::Rayleigh).unwrap();
        assert_eq!(h1, h2);
        let h3 = random_user_channel(&g, 43, FadingModel::Rayleigh).unwrap();
        assert_ne!(h1, h3);
    }

    #[test]
    fn rician_pure_los_limit_aligns_with_steering() {
        let g = geo(6);
        let theta = 0.5;
        let h = random_user_channel(
            &g,
            1,
            FadingModel::Rician {
                kappa: 1e12,
                angle: theta,
            },
        )
        .unwrap();
        let a = steering_vector(&g, theta).unwrap();
        let corr = h.dotc(&a).norm() / (h.norm() * a.norm());
        assert!(corr > 1.0 - 1e-5, "correlation {corr}");
    }

    #[test]
    fn rician_rejects_negative_kappa() {
        let g = geo(2);
        assert!(matches!(
            random_user_channel(&g, 0, FadingModel::Rician { kappa: -1.0, angle: 0.0 }),
            Err(Error::Domain(_))
        ));
    }

    /// Monte-Carlo check of the declared unit per-entry variance.
    #[test]
    fn rayleigh_entry_variance_is_one() {
        let g = geo(4);
        let draws = 100_000;
        let mut acc = 0.0;
        for seed in 0..draws {
            let h = random_user_channel(&g, seed, FadingModel::Rayleigh).unwrap();
            acc += h.norm_squared();
        }
        let per_entry = acc / (draws as f64 * 4.0);
        assert!(
            (per_entry - 1.0).abs() < 0.05,
            "per-entry variance {per_entry}"
        );
    }

    #[test]
    fn template_point_target() {
        let g = geo(16);
        let grid = angle_grid(-PI / 2.0, PI / 2.0, PI / 180.0);
        let t = desired_beampattern(&TargetRegion::Point(0.0), &g, &grid).unwrap();
        for (theta, v) in grid.iter().zip(&t) {
            let inside = theta.abs() <= 0.0625;
            assert_eq!(*v == 1.0, inside, "angle {theta}");
        }
    }

    #[test]
    fn template_interval_widened_by_half_resolution() {
        let g = geo(16);
        let iv = AngleInterval::new(-5.0_f64.to_radians(), 5.0_f64.to_radians()).unwrap();
        let grid = angle_grid(-PI / 2.0, PI / 2.0, 0.25 * PI / 180.0);
        let t = desired_beampattern(&TargetRegion::Interval(iv), &g, &grid).unwrap();
        let half_res = 1.0 / 16.0;
        for (theta, v) in grid.iter().zip(&t) {
            let inside = *theta >= iv.lower - half_res && *theta <= iv.upper + half_res;
            assert_eq!(*v == 1.0, inside, "angle {theta}");
        }
    }

    #[test]
    fn template_covering_whole_grid_is_all_ones() {
        let g = geo(4);
        let iv = AngleInterval::new(-PI / 2.0, PI / 2.0).unwrap();
        let grid = angle_grid(-PI / 2.0, PI / 2.0, 0.05);
        let t = desired_beampattern(&TargetRegion::Interval(iv), &g, &grid).unwrap();
        assert!(t.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn template_monotone_in_interval() {
        let g = geo(8);
        let grid = angle_grid(-PI / 2.0, PI / 2.0, 0.01);
        let small = AngleInterval::new(-0.05, 0.05).unwrap();
        let large = AngleInterval::new(-0.2, 0.3).unwrap();
        let ts = desired_beampattern(&TargetRegion::Interval(small), &g, &grid).unwrap();
        let tl = desired_beampattern(&TargetRegion::Interval(large), &g, &grid).unwrap();
        for (s, l) in ts.iter().zip(&tl) {
            assert!(l >= s);
        }
    }

    #[test]
    fn template_rejects_empty_grid() {
        let g = geo(4);
        assert!(matches!(
            desired_beampattern(&TargetRegion::Point(0.0), &g, &[]),
            Err(Error::Validation(_))
        ));
    }
}
