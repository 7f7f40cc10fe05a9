//! Conic-program construction for the secure and robust beamforming designs.
//!
//! Variables are the real embeddings of the per-stream covariance matrices
//! (PSD blocks of side `2N` in scaled symmetric vectorization), optional
//! S-procedure LMI blocks for worst-case channel-error constraints, slack
//! entries for inequalities, and auxiliary nonnegative scalars. All power
//! quantities are normalized by the budget before entering the program, so
//! the solver always sees O(1) data; rows are additionally scaled to unit
//! maximum coefficient.

use nalgebra::{DMatrix, DVector};

use crate::array::{mainlobe_region, steering_vector, TargetRegion};
use crate::conic::{Cone, ConicProgram};
use crate::error::{Error, Result};
use crate::linalg::{herm_quad_coeff, real_stack, svec, svec_index, ComplexVector};

use super::DesignContext;

/// Sparse affine expression over program columns.
#[derive(Debug, Clone, Default)]
pub(crate) struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(col: usize, coeff: f64) -> Self {
        Self {
            terms: vec![(col, coeff)],
            constant: 0.0,
        }
    }

    pub fn push(&mut self, col: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((col, coeff));
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) {
        if scale == 0.0 {
            return;
        }
        self.constant += scale * other.constant;
        for &(c, v) in &other.terms {
            self.terms.push((c, scale * v));
        }
    }

    fn compact(mut self) -> Self {
        self.terms.sort_by_key(|&(c, _)| c);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (c, v) in self.terms {
            match out.last_mut() {
                Some((lc, lv)) if *lc == c => *lv += v,
                _ => out.push((c, v)),
            }
        }
        out.retain(|&(_, v)| v != 0.0);
        self.terms = out;
        self
    }
}

/// Incremental standard-form program builder.
pub(crate) struct ProgramBuilder {
    cones: Vec<Cone>,
    num_vars: usize,
    // each row: expr == 0 after moving rhs into constant; pre-normalized rows
    // keep their unit slack coefficient.
    rows: Vec<(LinExpr, bool)>,
    objective: Vec<(usize, f64)>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self {
            cones: Vec::new(),
            num_vars: 0,
            rows: Vec::new(),
            objective: Vec::new(),
        }
    }

    fn push_cone(&mut self, cone: Cone) -> usize {
        let off = self.num_vars;
        self.num_vars += cone.dim();
        self.cones.push(cone);
        off
    }

    pub fn add_psd_block(&mut self, side: usize) -> usize {
        self.push_cone(Cone::Psd(side))
    }

    pub fn add_nonneg(&mut self, count: usize) -> usize {
        self.push_cone(Cone::NonNeg(count))
    }

    #[allow(dead_code)]
    pub fn add_soc(&mut self, dim: usize) -> usize {
        self.push_cone(Cone::Soc(dim))
    }

    /// `expr == 0`.
    pub fn add_eq(&mut self, expr: LinExpr) {
        self.rows.push((expr.compact(), false));
    }

    /// `expr <= 0` via a fresh nonnegative slack. The expression is scaled to
    /// unit maximum coefficient first so the slack stays an O(1) variable;
    /// otherwise large constraint scales could park violations inside the
    /// slack where normalized residuals no longer see them.
    pub fn add_le(&mut self, expr: LinExpr) {
        let mut expr = expr.compact();
        let mut maxc = expr.constant.abs();
        for &(_, v) in &expr.terms {
            maxc = maxc.max(v.abs());
        }
        if maxc > 0.0 {
            let s = 1.0 / maxc;
            expr.constant *= s;
            expr.terms.iter_mut().for_each(|(_, v)| *v *= s);
        }
        let slack = self.add_nonneg(1);
        expr.push(slack, 1.0);
        self.rows.push((expr, true));
    }

    /// `expr >= 0`.
    pub fn add_ge(&mut self, expr: LinExpr) {
        let mut neg = LinExpr::constant(-expr.constant);
        for &(c, v) in &expr.terms {
            neg.push(c, -v);
        }
        self.add_le(neg);
    }

    pub fn add_objective(&mut self, col: usize, coeff: f64) {
        self.objective.push((col, coeff));
    }

    pub fn build(self) -> ConicProgram {
        let n = self.num_vars;
        let m = self.rows.len();
        let mut a = DMatrix::zeros(m, n);
        let mut b = DVector::zeros(m);
        for (i, (row, prenormalized)) in self.rows.iter().enumerate() {
            let scale = if *prenormalized {
                1.0
            } else {
                let mut maxc = row.constant.abs();
                for &(_, v) in &row.terms {
                    maxc = maxc.max(v.abs());
                }
                if maxc > 0.0 {
                    1.0 / maxc
                } else {
                    1.0
                }
            };
            for &(c, v) in &row.terms {
                a[(i, c)] += v * scale;
            }
            b[i] = -row.constant * scale;
        }
        let mut c = DVector::zeros(n);
        for (col, v) in self.objective {
            c[col] += v;
        }
        ConicProgram {
            objective: c,
            constraint_matrix: a,
            rhs: b,
            cones: self.cones,
        }
    }
}

/// Which constraint families to include (used by the infeasibility probes).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Families {
    pub user_sinr: bool,
    pub eve_caps: bool,
    pub floor: bool,
    pub caps: bool,
}

impl Families {
    pub fn all() -> Self {
        Self {
            user_sinr: true,
            eve_caps: true,
            floor: true,
            caps: true,
        }
    }
}

/// Objective of the built program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Objective {
    /// Pure feasibility probe.
    Feasibility,
    /// Minimize total transmit power (final polish at the optimal level).
    MinPower,
    /// Maximize mainlobe sensing power carried by the designated stream
    /// (eavesdropper-oblivious reference design: the probing beam carries the
    /// confidential stream).
    MaxDesignatedMainlobe,
}

/// Column layout of the built program.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    /// svec offset of each covariance block (side `2N`).
    pub cov_blocks: Vec<usize>,
    pub embedded_side: usize,
}

/// Expression for entry `(i, j)` of embedded covariance block `k`
/// (symmetric storage, so order of `i, j` is irrelevant).
fn embedded_entry(layout_off: usize, i: usize, j: usize) -> LinExpr {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    let idx = layout_off + svec_index(lo, hi);
    let coeff = if lo == hi {
        1.0
    } else {
        1.0 / std::f64::consts::SQRT_2
    };
    LinExpr::term(idx, coeff)
}

/// `a^H R_k a` as a row over block `k`'s svec variables.
fn quad_expr(block_off: usize, side: usize, a: &ComplexVector) -> LinExpr {
    let g = herm_quad_coeff(a);
    debug_assert_eq!(g.nrows(), side);
    let gv = svec(&g);
    let mut e = LinExpr::default();
    for (idx, v) in gv.iter().enumerate() {
        if *v != 0.0 {
            e.push(block_off + idx, *v);
        }
    }
    e
}

/// `trace(R_k)` (complex trace equals half the embedded trace).
fn trace_expr(block_off: usize, side: usize) -> LinExpr {
    let mut e = LinExpr::default();
    for i in 0..side {
        e.push(block_off + svec_index(i, i), 0.5);
    }
    e
}

/// Builds the level-`t` design program.
///
/// Constraints (normalized by the power budget):
///   (i)  per-user SINR: worst-case LMI when a channel-error radius is set,
///        otherwise the nominal linear row;
///   (ii) per-stream eavesdropping caps at every sampled target angle;
///   (iii) total power <= 1;
///   (iv) mainlobe floor and sidelobe ceiling on the constraint grid.
pub(crate) fn build_design_program(
    ctx: &DesignContext,
    t: f64,
    families: Families,
    objective: Objective,
) -> Result<(ConicProgram, Layout)> {
    let n = ctx.geometry.num_elements;
    let side = 2 * n;
    let k_users = ctx.channels.num_users();
    let mut b = ProgramBuilder::new();

    let cov_blocks: Vec<usize> = (0..k_users).map(|_| b.add_psd_block(side)).collect();
    let layout = Layout {
        cov_blocks: cov_blocks.clone(),
        embedded_side: side,
    };

    // (i) user SINR constraints.
    if families.user_sinr {
        for k in 0..k_users {
            let h = &ctx.channels.user_channels[k];
            let radius = ctx.csi_radii.as_ref().map(|r| r[k]).unwrap_or(0.0);
            if radius > 0.0 {
                add_worst_case_sinr_lmi(&mut b, ctx, &cov_blocks, k, h, radius)?;
            } else {
                // h^H R_k h - gamma * sum_{j != k} h^H R_j h >= gamma * sigma^2
                let mut e = LinExpr::constant(-ctx.gamma * ctx.sigma2_hat);
                for (j, &off) in cov_blocks.iter().enumerate() {
                    let q = quad_expr(off, side, h);
                    e.add_scaled(&q, if j == k { 1.0 } else { -ctx.gamma });
                }
                b.add_ge(e);
            }
        }
    }

    // (ii) eavesdropping caps at each sampled angle, per protected stream.
    if families.eve_caps {
        let protected: Vec<usize> = if ctx.protect_all_streams {
            (0..k_users).collect()
        } else {
            vec![ctx.designated_stream]
        };
        for g in &ctx.eve_samples {
            for &k in &protected {
                // g^H R_k g - t * sum_{j != k} g^H R_j g <= t * sigma_E^2
                let mut e = LinExpr::constant(-t * ctx.sigma_e2_hat);
                for (j, &off) in cov_blocks.iter().enumerate() {
                    let q = quad_expr(off, side, g);
                    e.add_scaled(&q, if j == k { 1.0 } else { -t });
                }
                b.add_le(e);
            }
        }
    }

    // (iii) total power.
    {
        let mut e = LinExpr::constant(-1.0);
        for &off in &cov_blocks {
            e.add_scaled(&trace_expr(off, side), 1.0);
        }
        b.add_le(e);
    }

    // (iv) beampattern floor / ceiling.
    if families.floor {
        for &mi in &ctx.mainlobe_idx {
            let a = &ctx.steering_grid[mi];
            let mut e = LinExpr::constant(-ctx.floor_level_hat);
            for &off in &cov_blocks {
                e.add_scaled(&quad_expr(off, side, a), 1.0);
            }
            b.add_ge(e);
        }
    }
    if families.caps {
        if let Some(cap) = ctx.cap_level_hat {
            for &si in &ctx.sidelobe_idx {
                let a = &ctx.steering_grid[si];
                let mut e = LinExpr::constant(-cap);
                for &off in &cov_blocks {
                    e.add_scaled(&quad_expr(off, side, a), 1.0);
                }
                b.add_le(e);
            }
        }
    }

    match objective {
        Objective::Feasibility => {}
        Objective::MinPower => {
            for &off in &cov_blocks {
                let tr = trace_expr(off, side);
                for (c, v) in tr.terms {
                    b.add_objective(c, v);
                }
            }
        }
        Objective::MaxDesignatedMainlobe => {
            let off = cov_blocks[ctx.designated_stream];
            for &mi in &ctx.mainlobe_idx {
                let a = &ctx.steering_grid[mi];
                let q = quad_expr(off, side, a);
                for (c, v) in q.terms {
                    b.add_objective(c, -v);
                }
            }
        }
    }

    let prog = b.build();
    prog.validate()?;
    Ok((prog, layout))
}

/// Worst-case SINR over the channel-error ball `{h + e : ||e|| <= radius}`,
/// encoded with the S-procedure. Writing `Q_k = R_k - gamma * sum_{j!=k} R_j`
/// in the real-stacked domain, the condition
/// `e' Q e + 2 q' e + c >= 0 for all ||e|| <= radius` becomes the LMI
/// `[[Q + mu I, q], [q', c - mu radius^2]] >= 0` with a nonnegative slack
/// `mu` per user.
fn add_worst_case_sinr_lmi(
    b: &mut ProgramBuilder,
    ctx: &DesignContext,
    cov_blocks: &[usize],
    k: usize,
    h: &ComplexVector,
    radius: f64,
) -> Result<()> {
    let n = ctx.geometry.num_elements;
    let side = 2 * n;
    let lmi_side = side + 1;
    let k_users = cov_blocks.len();
    if radius < 0.0 {
        return Err(Error::domain("channel error radius must be nonnegative"));
    }

    let lmi_off = b.add_psd_block(lmi_side);
    let mu = b.add_nonneg(1);
    let h_stack = real_stack(h);

    // Structured reads of the complex covariance behind the embedded block.
    let re_entry = |blk: usize, p: usize, q: usize| -> LinExpr {
        let mut e = LinExpr::default();
        e.add_scaled(&embedded_entry(cov_blocks[blk], p, q), 0.5);
        e.add_scaled(&embedded_entry(cov_blocks[blk], p + n, q + n), 0.5);
        e
    };
    let im_entry = |blk: usize, p: usize, q: usize| -> LinExpr {
        let mut e = LinExpr::default();
        e.add_scaled(&embedded_entry(cov_blocks[blk], p + n, q), 0.5);
        e.add_scaled(&embedded_entry(cov_blocks[blk], p, q + n), -0.5);
        e
    };

    // Real-stacked Q-tilde entry (i, j), i, j in 0..2N, as a LinExpr.
    let q_tilde = |i: usize, j: usize| -> LinExpr {
        let (p, q, part) = match (i < n, j < n) {
            (true, true) => (i, j, 0),      // Re Q
            (true, false) => (i, j - n, 1), // -Im Q
            (false, true) => (i - n, j, 2), // +Im Q
            (false, false) => (i - n, j - n, 0),
        };
        let mut e = LinExpr::default();
        for blk in 0..k_users {
            let w = if blk == k { 1.0 } else { -ctx.gamma };
            let base = match part {
                0 => re_entry(blk, p, q),
                1 => {
                    let mut x = im_entry(blk, p, q);
                    x.terms.iter_mut().for_each(|(_, v)| *v = -*v);
                    x.constant = -x.constant;
                    x
                }
                _ => im_entry(blk, p, q),
            };
            e.add_scaled(&base, w);
        }
        e
    };

    // LMI entry expression M[i][j].
    let lmi_entry = |i: usize, j: usize| -> LinExpr {
        if i < side && j < side {
            let mut e = q_tilde(i, j);
            if i == j {
                e.push(mu, 1.0);
            }
            e
        } else if i == side && j == side {
            // c - mu * radius^2, with c = h' Q h - gamma sigma^2
            let mut e = LinExpr::constant(-ctx.gamma * ctx.sigma2_hat);
            for p in 0..side {
                for q in 0..side {
                    let w = h_stack[p] * h_stack[q];
                    if w != 0.0 {
                        e.add_scaled(&q_tilde(p, q), w);
                    }
                }
            }
            e.push(mu, -radius * radius);
            e
        } else {
            // q_i = (Q h)_i
            let row = if i == side { j } else { i };
            let mut e = LinExpr::default();
            for q in 0..side {
                let w = h_stack[q];
                if w != 0.0 {
                    e.add_scaled(&q_tilde(row, q), w);
                }
            }
            e
        }
    };

    // Tie the LMI block to the affine expressions entrywise in svec space.
    for j in 0..lmi_side {
        for i in 0..=j {
            let scale = if i == j {
                1.0
            } else {
                std::f64::consts::SQRT_2
            };
            let mut row = LinExpr::term(lmi_off + svec_index(i, j), 1.0);
            let entry = lmi_entry(i, j);
            row.add_scaled(&entry, -scale);
            b.add_eq(row);
        }
    }
    Ok(())
}

/// Precomputed solve geometry shared by nominal and robust builds.
#[derive(Debug, Clone)]
pub(crate) struct GridGeometry {
    pub grid: Vec<f64>,
    pub mainlobe_idx: Vec<usize>,
    pub sidelobe_idx: Vec<usize>,
    pub floor_level_hat: f64,
}

/// Splits the constraint grid into mainlobe floor samples and sidelobe cap
/// samples, leaving a transition band of one resolution (`2/N` rad) between
/// them, and computes the per-sample mainlobe floor `beta * N / M` (power
/// normalized) from the mainlobe sample count `M`.
pub(crate) fn grid_geometry(
    geometry: &crate::array::ArrayGeometry,
    target: &TargetRegion,
    floor_fraction: f64,
    grid_step: f64,
) -> Result<GridGeometry> {
    use std::f64::consts::PI;
    let grid = crate::array::angle_grid(-PI / 2.0, PI / 2.0, grid_step);
    let (lo, hi) = mainlobe_region(target, geometry);
    let transition = crate::array::angular_resolution(geometry);
    let mut mainlobe_idx = Vec::new();
    let mut sidelobe_idx = Vec::new();
    for (i, &theta) in grid.iter().enumerate() {
        if theta >= lo && theta <= hi {
            mainlobe_idx.push(i);
        } else if theta < lo - transition || theta > hi + transition {
            sidelobe_idx.push(i);
        }
    }
    if mainlobe_idx.is_empty() {
        return Err(Error::validation(
            "constraint grid has no samples in the mainlobe region",
        ));
    }
    let m_count = mainlobe_idx.len() as f64;
    let floor_level_hat = floor_fraction * geometry.num_elements as f64 / m_count;
    if floor_level_hat > geometry.num_elements as f64 {
        return Err(Error::validation(
            "mainlobe floor exceeds the coherent power bound",
        ));
    }
    Ok(GridGeometry {
        grid,
        mainlobe_idx,
        sidelobe_idx,
        floor_level_hat,
    })
}

/// Steering vectors for every grid angle.
pub(crate) fn steering_table(
    geometry: &crate::array::ArrayGeometry,
    grid: &[f64],
) -> Result<Vec<ComplexVector>> {
    grid.iter()
        .map(|&theta| steering_vector(geometry, theta))
        .collect()
}

