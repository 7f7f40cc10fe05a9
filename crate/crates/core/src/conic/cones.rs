//! Cone segments and Euclidean projections onto them.

use nalgebra::DMatrix;

use crate::linalg::{smat, svec, svec_len};

/// One segment of the product cone constraining a slice of the variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// `x = 0` on the segment.
    Zero(usize),
    /// `x >= 0` elementwise.
    NonNeg(usize),
    /// Second-order cone `{(t, v) : ||v|| <= t}` of total dimension `dim >= 1`.
    Soc(usize),
    /// PSD cone of matrices with the given side, stored in scaled symmetric
    /// vectorization (length `side*(side+1)/2`, off-diagonals scaled sqrt(2)).
    Psd(usize),
}

impl Cone {
    /// Length of the variable slice this segment occupies.
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(n) | Cone::NonNeg(n) | Cone::Soc(n) => n,
            Cone::Psd(side) => svec_len(side),
        }
    }
}

/// Projects `v` onto the second-order cone, reading `v = (t, x)`.
pub fn project_soc_slice(v: &mut [f64]) {
    debug_assert!(!v.is_empty());
    let t = v[0];
    let xnorm = v[1..].iter().map(|e| e * e).sum::<f64>().sqrt();
    if xnorm <= t {
        // Already inside.
    } else if xnorm <= -t {
        v.iter_mut().for_each(|e| *e = 0.0);
    } else {
        let scale = 0.5 * (1.0 + t / xnorm);
        v[0] = 0.5 * (t + xnorm);
        v[1..].iter_mut().for_each(|e| *e *= scale);
    }
}

/// Projects a symmetric matrix onto the PSD cone by eigenvalue clipping.
pub fn project_psd_matrix(s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let eig = sym.symmetric_eigen();
    let mut out = DMatrix::zeros(n, n);
    for (k, lambda) in eig.eigenvalues.iter().enumerate() {
        if *lambda > 0.0 {
            let v = eig.eigenvectors.column(k);
            // out += lambda * v v'
            for j in 0..n {
                let lvj = lambda * v[j];
                for i in 0..n {
                    out[(i, j)] += v[i] * lvj;
                }
            }
        }
    }
    out
}

fn project_psd_slice(v: &mut [f64], side: usize) {
    let m = smat(v, side);
    let p = project_psd_matrix(&m);
    v.copy_from_slice(svec(&p).as_slice());
}

/// Projects `v` in place onto the product cone described by `cones`.
/// `dual` selects the dual cone instead (only the zero cone differs:
/// its dual is the whole space).
pub fn project_cone_product(cones: &[Cone], v: &mut [f64], dual: bool) {
    let mut off = 0;
    for cone in cones {
        let d = cone.dim();
        let seg = &mut v[off..off + d];
        match cone {
            Cone::Zero(_) => {
                if !dual {
                    seg.iter_mut().for_each(|e| *e = 0.0);
                }
            }
            Cone::NonNeg(_) => seg.iter_mut().for_each(|e| *e = e.max(0.0)),
            Cone::Soc(_) => project_soc_slice(seg),
            Cone::Psd(side) => project_psd_slice(seg, *side),
        }
        off += d;
    }
}

/// Euclidean distance from `v` to the product cone (or its dual).
pub fn cone_distance(cones: &[Cone], v: &[f64], dual: bool) -> f64 {
    let mut proj = v.to_vec();
    project_cone_product(cones, &mut proj, dual);
    v.iter()
        .zip(&proj)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn soc_inside_is_identity() {
        let mut v = vec![2.0, 1.0, 1.0];
        project_soc_slice(&mut v);
        assert_eq!(v, vec![2.0, 1.0, 1.0]);
    }

    #[test]
    fn soc_polar_maps_to_zero() {
        let mut v = vec![-5.0, 1.0, 0.0];
        project_soc_slice(&mut v);
        assert_eq!(v, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn soc_boundary_midpoint_case() {
        let mut v = vec![0.0, 2.0, 0.0];
        project_soc_slice(&mut v);
        assert!((v[0] - 1.0).abs() < 1e-15);
        assert!((v[1] - 1.0).abs() < 1e-15);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn psd_projection_clips_negative_eigenvalue() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let p = project_psd_matrix(&s);
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(p[(1, 1)].abs() < 1e-12);
        assert!(p[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn psd_projection_idempotent_on_psd_input() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, -0.2, 0.0, -0.2, 0.5]);
        let spd = &a * a.transpose();
        let p = project_psd_matrix(&spd);
        assert!((&p - &spd).norm() < 1e-12);
    }

    /// Sampled optimality certificate: the projection is closer to S than 100
    /// random PSD matrices.
    #[test]
    fn psd_projection_sampled_optimality() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(5, &[9]);
        let s = DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let s = DMatrix::from_fn(6, 6, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
        let p = project_psd_matrix(&s);
        let best = (&p - &s).norm();
        for _ in 0..100 {
            let raw = DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let q = &raw * raw.transpose();
            assert!(best <= (&q - &s).norm() + 1e-12);
        }
    }

    #[test]
    fn projections_are_idempotent_and_nonexpansive() {
        use rand::Rng;
        let cones = [Cone::NonNeg(3), Cone::Soc(4), Cone::Psd(3), Cone::Zero(2)];
        let dim: usize = cones.iter().map(Cone::dim).sum();
        let mut rng = crate::rng::stream_rng(17, &[3]);
        for _ in 0..50 {
            let u = DVector::from_fn(dim, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let v = DVector::from_fn(dim, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let mut pu = u.as_slice().to_vec();
            let mut pv = v.as_slice().to_vec();
            project_cone_product(&cones, &mut pu, false);
            project_cone_product(&cones, &mut pv, false);
            let mut ppu = pu.clone();
            project_cone_product(&cones, &mut ppu, false);
            let idem: f64 = pu
                .iter()
                .zip(&ppu)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(idem < 1e-12, "projection not idempotent: {idem}");
            let d_orig = (&u - &v).norm();
            let d_proj: f64 = pu
                .iter()
                .zip(&pv)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(d_proj <= d_orig + 1e-12, "expansion {d_proj} > {d_orig}");
        }
    }
}
