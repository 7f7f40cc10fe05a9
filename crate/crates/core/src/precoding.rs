//! Symbol-level secure precoding.
//!
//! Instead of multiplying fixed beamformers by baseband symbols, each slot
//! gets its own transmit vector chosen so that every legitimate user's
//! received point lands deep inside the correct PSK decision sector
//! (constructive interference) while the sensed eavesdropper's received point
//! for the designated stream is pushed into the opposite half-plane
//! (destructive interference), which noiselessly guarantees a wrong decision.
//!
//! All decision geometry works in the rotated frame where the intended symbol
//! sits on the positive real axis: with `r~ = r * conj(s)`, the constructive
//! region for an `M`-ary constellation is
//! `|Im(r~)| <= (Re(r~) - sqrt(gamma sigma^2)) * tan(pi/M)`
//! (for BPSK just `Re(r~) >= sqrt(gamma sigma^2)`), and the destructive rule
//! is `Re(r~) <= -zeta`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::conic::{solve_with, Cone, ConicProgram, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg::ComplexVector;
use crate::rng::stream_rng;
use crate::secure::Scenario;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Reference-point convention of a PSK constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PskConvention {
    /// Points at `exp(i 2 pi m / M)`, decision thresholds between them.
    Standard,
    /// Points at `exp(i (2m+1) pi / M)`; for QPSK the thresholds are the real
    /// and imaginary axes.
    Diagonal,
}

/// PSK constellation of order 2, 4, 8 or 16.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PskConstellation {
    pub order: usize,
    pub convention: PskConvention,
}

impl PskConstellation {
    /// Default convention: diagonal points for QPSK (thresholds on the axes),
    /// standard points otherwise.
    pub fn new(order: usize) -> Result<Self> {
        let convention = if order == 4 {
            PskConvention::Diagonal
        } else {
            PskConvention::Standard
        };
        Self::with_convention(order, convention)
    }

    pub fn with_convention(order: usize, convention: PskConvention) -> Result<Self> {
        if !matches!(order, 2 | 4 | 8 | 16) {
            return Err(Error::validation("PSK order must be 2, 4, 8 or 16"));
        }
        Ok(Self { order, convention })
    }

    /// Unit-modulus reference point of symbol `m`.
    pub fn point(&self, symbol: usize) -> Complex64 {
        debug_assert!(symbol < self.order);
        let offset = match self.convention {
            PskConvention::Standard => 0.0,
            PskConvention::Diagonal => std::f64::consts::PI / self.order as f64,
        };
        let phase = 2.0 * std::f64::consts::PI * symbol as f64 / self.order as f64 + offset;
        Complex64::from_polar(1.0, phase)
    }

    /// Half-width of each decision sector.
    pub fn sector_half_width(&self) -> f64 {
        std::f64::consts::PI / self.order as f64
    }
}

/// Classification outcome: nearest symbol plus a flag for threshold ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolDecision {
    pub index: usize,
    pub tie: bool,
}

/// Maximum-likelihood PSK detection: angularly nearest reference point. Ties
/// (points on a decision threshold, or the origin) resolve to the lowest
/// index and set the flag.
pub fn classify_symbol(point: Complex64, constellation: &PskConstellation) -> SymbolDecision {
    if point.norm() == 0.0 {
        return SymbolDecision {
            index: 0,
            tie: true,
        };
    }
    let mut best = 0usize;
    let mut best_dist = f64::INFINITY;
    let mut tie = false;
    for m in 0..constellation.order {
        let d = angular_distance(point, constellation.point(m));
        if d < best_dist - 1e-12 {
            best = m;
            best_dist = d;
            tie = false;
        } else if (d - best_dist).abs() <= 1e-12 {
            tie = true;
        }
    }
    SymbolDecision { index: best, tie }
}

fn angular_distance(a: Complex64, b: Complex64) -> f64 {
    let d = (a.arg() - b.arg()).abs();
    d.min(2.0 * std::f64::consts::PI - d)
}

/// Rotates a received point so the intended symbol sits on the positive real
/// axis: `r~ = r conj(s) / |s|`.
pub fn rotate_to_reference(received: Complex64, symbol_point: Complex64) -> Complex64 {
    received * symbol_point.conj() / symbol_point.norm()
}

/// Intended symbols per stream and slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PskFrame {
    /// `symbols[slot][stream]`, each in `[0, order)`.
    pub symbols: Vec<Vec<usize>>,
    pub constellation: PskConstellation,
}

impl PskFrame {
    pub fn num_slots(&self) -> usize {
        self.symbols.len()
    }

    pub fn validate(&self, num_streams: usize) -> Result<()> {
        for (t, slot) in self.symbols.iter().enumerate() {
            if slot.len() != num_streams {
                return Err(Error::validation(format!(
                    "slot {t} carries {} streams, expected {num_streams}",
                    slot.len()
                )));
            }
            if slot.iter().any(|&s| s >= self.constellation.order) {
                return Err(Error::validation(format!(
                    "slot {t} has a symbol index outside the constellation"
                )));
            }
        }
        Ok(())
    }

    /// Uniformly random frame, deterministic per seed.
    pub fn random(
        constellation: PskConstellation,
        num_streams: usize,
        num_slots: usize,
        seed: u64,
    ) -> Self {
        let mut rng = stream_rng(seed, &[0x667261, 0]);
        let symbols = (0..num_slots)
            .map(|_| {
                (0..num_streams)
                    .map(|_| rng.random_range(0..constellation.order))
                    .collect()
            })
            .collect();
        Self {
            symbols,
            constellation,
        }
    }
}

/// Per-slot transmit vector with its safety margins.
#[derive(Debug, Clone, Serialize)]
pub struct PrecodedSlot {
    /// Transmit vector (one complex entry per antenna); `None` when the slot
    /// was infeasible.
    #[serde(serialize_with = "serialize_opt_vec")]
    pub x: Option<ComplexVector>,
    /// Constructive-interference margins per user (distance to the nearer
    /// region boundary, nonnegative when feasible).
    pub lu_margins: Vec<f64>,
    /// Margin of the destructive constraint at the eavesdropper.
    pub eve_margin: f64,
    /// Transmit power of the slot.
    pub power: f64,
    pub feasible: bool,
}

fn serialize_opt_vec<S: serde::Serializer>(
    v: &Option<ComplexVector>,
    ser: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        None => ser.serialize_none(),
        Some(x) => {
            let pairs: Vec<[f64; 2]> = x.iter().map(|e| [e.re, e.im]).collect();
            serde::Serialize::serialize(&pairs, ser)
        }
    }
}

/// Per-slot solve mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotMode {
    /// Minimize transmit power subject to all region constraints.
    MinPower,
    /// Maximize the common constructive margin under the power budget.
    MaxMargin { power_budget: f64 },
}

/// One linear constraint `coeffs . [Re x; Im x] <= rhs` with unit-norm
/// coefficients (so slack values are geometric distances).
#[derive(Debug, Clone)]
pub struct HalfSpace {
    pub coeffs: DVector<f64>,
    pub rhs: f64,
}

impl HalfSpace {
    fn normalized(mut coeffs: DVector<f64>, mut rhs: f64) -> Self {
        let n = coeffs.norm();
        if n > 0.0 {
            coeffs /= n;
            rhs /= n;
        }
        Self { coeffs, rhs }
    }

    pub fn margin(&self, x_stacked: &DVector<f64>) -> f64 {
        self.rhs - self.coeffs.dot(x_stacked)
    }
}

/// Real-stacked coefficients of `Re(c^H x)` and `Im(c^H x)`.
fn complex_row(c: &ComplexVector) -> (DVector<f64>, DVector<f64>) {
    let n = c.len();
    let mut re = DVector::zeros(2 * n);
    let mut im = DVector::zeros(2 * n);
    for i in 0..n {
        // c^H x = sum conj(c_i) x_i
        re[i] = c[i].re;
        re[n + i] = c[i].im;
        im[i] = -c[i].im;
        im[n + i] = c[i].re;
    }
    (re, im)
}

/// Constructive-interference half-spaces for one user: the rotated received
/// point must satisfy `|Im| <= (Re - sqrt(gamma sigma^2)) tan(pi/M)`
/// (one half-space `Re >= sqrt(gamma sigma^2)` for BPSK).
pub fn ci_constraint_rows(
    channel: &ComplexVector,
    symbol_point: Complex64,
    snr_target: f64,
    noise_power: f64,
    order: usize,
) -> Result<Vec<HalfSpace>> {
    if order < 2 {
        return Err(Error::validation("constellation order must be >= 2"));
    }
    let threshold = (snr_target * noise_power).sqrt();
    // Rotated receive point: r~ = conj(s) h^H x; fold conj(s) into the channel.
    let rotated_channel = channel.map(|e| e * symbol_point);
    let (re, im) = complex_row(&rotated_channel);
    if order == 2 {
        // Re(r~) >= threshold
        let mut coeffs = re;
        coeffs.neg_mut();
        return Ok(vec![HalfSpace::normalized(coeffs, -threshold)]);
    }
    let tan = (std::f64::consts::PI / order as f64).tan();
    //  Im - tan*Re <= -tan*threshold   and   -Im - tan*Re <= -tan*threshold
    let mut rows = Vec::with_capacity(2);
    let upper = &im - &re * tan;
    rows.push(HalfSpace::normalized(upper, -tan * threshold));
    let lower = -&im - &re * tan;
    rows.push(HalfSpace::normalized(lower, -tan * threshold));
    Ok(rows)
}

/// Destructive half-space at the eavesdropper for the designated stream's
/// symbol: the rotated received point must satisfy `Re <= -margin`, the
/// opposite half-plane of the intended symbol. Noiselessly this places the
/// decision at angular distance above `pi/2` from the truth, outside the
/// correct sector for every PSK order.
pub fn di_constraint_rows(
    eve_channel: &ComplexVector,
    symbol_point: Complex64,
    margin: f64,
) -> Result<Vec<HalfSpace>> {
    if margin < 0.0 {
        return Err(Error::domain("destructive margin must be nonnegative"));
    }
    let rotated = eve_channel.map(|e| e * symbol_point);
    let (re, _) = complex_row(&rotated);
    Ok(vec![HalfSpace::normalized(re, -margin)])
}

/// Per-slot destructive-interference policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiPolicy {
    /// Destructive constraint on the designated stream only (default).
    Designated,
    /// Destructive constraints on every stream; slots where that is
    /// infeasible fall back to max-margin with the destructive rows
    /// soft-penalized (weight 1e3).
    AllStreams,
}

/// Precoder configuration derived from a scenario.
#[derive(Debug, Clone)]
pub struct SlotPrecoder {
    pub channels: Vec<ComplexVector>,
    pub eve_channel: ComplexVector,
    pub constellation: PskConstellation,
    /// Per-user SNR targets (linear).
    pub snr_targets: Vec<f64>,
    pub noise_power: f64,
    pub designated_stream: usize,
    /// Destructive margin; default `0.1 * sqrt(gamma_designated * sigma^2)`.
    pub di_margin: f64,
    pub di_policy: DiPolicy,
}

impl SlotPrecoder {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        let channels = scenario.channel_set()?;
        let constellation = PskConstellation::new(scenario.modulation_order)?;
        let gamma = scenario.user_sinr_threshold;
        let di_margin = 0.1 * (gamma * channels.noise_power_user).sqrt();
        Ok(Self {
            channels: channels.user_channels.clone(),
            eve_channel: channels.eve_channel(&scenario.geometry)?,
            constellation,
            snr_targets: vec![gamma; channels.num_users()],
            noise_power: channels.noise_power_user,
            designated_stream: scenario.designated_stream,
            di_margin,
            di_policy: DiPolicy::Designated,
        })
    }

    fn num_antennas(&self) -> usize {
        self.channels[0].len()
    }

    /// Builds the half-space set for one slot's symbols.
    pub(crate) fn slot_halfspaces(
        &self,
        symbols: &[usize],
    ) -> Result<(Vec<HalfSpace>, Vec<HalfSpace>)> {
        let mut ci = Vec::new();
        for (k, h) in self.channels.iter().enumerate() {
            let s = self.constellation.point(symbols[k]);
            ci.extend(ci_constraint_rows(
                h,
                s,
                self.snr_targets[k],
                self.noise_power,
                self.constellation.order,
            )?);
        }
        let mut di = Vec::new();
        match self.di_policy {
            DiPolicy::Designated => {
                let s = self.constellation.point(symbols[self.designated_stream]);
                di.extend(di_constraint_rows(&self.eve_channel, s, self.di_margin)?);
            }
            DiPolicy::AllStreams => {
                for &sym in symbols {
                    let s = self.constellation.point(sym);
                    di.extend(di_constraint_rows(&self.eve_channel, s, self.di_margin)?);
                }
            }
        }
        Ok((ci, di))
    }

    /// Solves one slot.
    pub fn solve_slot(&self, symbols: &[usize], mode: SlotMode) -> Result<PrecodedSlot> {
        let (ci, di) = self.slot_halfspaces(symbols)?;
        let solved = match mode {
            SlotMode::MinPower => solve_min_power(self.num_antennas(), &ci, &di),
            SlotMode::MaxMargin { power_budget } => {
                match solve_max_margin(self.num_antennas(), &ci, &di, power_budget, 0.0) {
                    Ok(Some(x)) => Ok(Some(x)),
                    Ok(None) if self.di_policy == DiPolicy::AllStreams => {
                        // Soft-penalized fallback for the all-streams mode.
                        solve_max_margin(self.num_antennas(), &ci, &di, power_budget, 1e3)
                    }
                    other => other,
                }
            }
        }?;
        Ok(self.finish_slot(solved, &ci, &di))
    }

    /// Solves every slot of a frame; slots are independent and run in
    /// parallel, results ordered by slot index.
    pub fn solve_frame(&self, frame: &PskFrame, mode: SlotMode) -> Result<Vec<PrecodedSlot>> {
        frame.validate(self.channels.len())?;
        frame
            .symbols
            .par_iter()
            .map(|slot| self.solve_slot(slot, mode))
            .collect()
    }

    fn finish_slot(
        &self,
        x_stacked: Option<DVector<f64>>,
        ci: &[HalfSpace],
        di: &[HalfSpace],
    ) -> PrecodedSlot {
        match x_stacked {
            None => PrecodedSlot {
                x: None,
                lu_margins: vec![f64::NEG_INFINITY; self.channels.len()],
                eve_margin: f64::NEG_INFINITY,
                power: 0.0,
                feasible: false,
            },
            Some(xs) => {
                let n = self.num_antennas();
                let x = ComplexVector::from_iterator(
                    n,
                    (0..n).map(|i| Complex64::new(xs[i], xs[n + i])),
                );
                // Per-user margin: min over that user's half-space pair.
                let rows_per_user = if self.constellation.order == 2 { 1 } else { 2 };
                let lu_margins: Vec<f64> = (0..self.channels.len())
                    .map(|k| {
                        ci[k * rows_per_user..(k + 1) * rows_per_user]
                            .iter()
                            .map(|hs| hs.margin(&xs))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect();
                let eve_margin = di
                    .iter()
                    .map(|hs| hs.margin(&xs))
                    .fold(f64::INFINITY, f64::min);
                let feasible = lu_margins.iter().all(|&m| m >= -1e-6) && eve_margin >= -1e-6;
                PrecodedSlot {
                    power: x.norm_squared(),
                    x: Some(x),
                    lu_margins,
                    eve_margin,
                    feasible,
                }
            }
        }
    }
}

const SLOT_TOL: f64 = 1e-9;
const SLOT_MAX_ITER: usize = 50_000;

/// min ||x||^2 s.t. half-spaces: second-order-cone program over (t, x).
fn solve_min_power(
    num_antennas: usize,
    ci: &[HalfSpace],
    di: &[HalfSpace],
) -> Result<Option<DVector<f64>>> {
    let nx = 2 * num_antennas;
    let rows: Vec<&HalfSpace> = ci.iter().chain(di.iter()).collect();
    let m = rows.len();
    // Variables: (t, x) in SOC(1+nx), then one slack per row.
    let nvar = 1 + nx + m;
    let mut a = DMatrix::zeros(m, nvar);
    let mut b = DVector::zeros(m);
    for (i, hs) in rows.iter().enumerate() {
        for j in 0..nx {
            a[(i, 1 + j)] = hs.coeffs[j];
        }
        a[(i, 1 + nx + i)] = 1.0;
        b[i] = hs.rhs;
    }
    let mut c = DVector::zeros(nvar);
    c[0] = 1.0;
    let prog = ConicProgram {
        objective: c,
        constraint_matrix: a,
        rhs: b,
        cones: vec![Cone::Soc(1 + nx), Cone::NonNeg(m)],
    };
    let settings = SolverSettings {
        tol: SLOT_TOL,
        max_iter: SLOT_MAX_ITER,
        ..SolverSettings::default()
    };
    let (sol, warm) = solve_with(&prog, &settings, None)?;
    match sol.status {
        SolveStatus::Optimal => Ok(Some(DVector::from_iterator(
            nx,
            warm.z.as_slice()[1..1 + nx].iter().copied(),
        ))),
        SolveStatus::Infeasible | SolveStatus::MaxIter => Ok(None),
        SolveStatus::Unbounded => Err(Error::Solver("slot program unbounded".into())),
    }
}

/// max delta s.t. ||x|| <= sqrt(P), constructive rows tightened by delta,
/// destructive rows hard (or soft-penalized with the given weight).
fn solve_max_margin(
    num_antennas: usize,
    ci: &[HalfSpace],
    di: &[HalfSpace],
    power_budget: f64,
    soft_di_weight: f64,
) -> Result<Option<DVector<f64>>> {
    let nx = 2 * num_antennas;
    let n_ci = ci.len();
    let n_di = di.len();
    let soft = soft_di_weight > 0.0;
    // Variables: (u, x) in SOC(1+nx); delta+ / delta-; CI slacks; DI slacks;
    // DI violations (soft mode only).
    let n_viol = if soft { n_di } else { 0 };
    let nvar = 1 + nx + 2 + n_ci + n_di + n_viol;
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    // Pin the cone head: u = sqrt(P).
    rows.push((vec![(0, 1.0)], power_budget.sqrt()));
    let dp = 1 + nx;
    let dm = dp + 1;
    let ci0 = dm + 1;
    let di0 = ci0 + n_ci;
    let viol0 = di0 + n_di;
    for (i, hs) in ci.iter().enumerate() {
        let mut row: Vec<(usize, f64)> = (0..nx).map(|j| (1 + j, hs.coeffs[j])).collect();
        row.push((dp, 1.0));
        row.push((dm, -1.0));
        row.push((ci0 + i, 1.0));
        rows.push((row, hs.rhs));
    }
    for (i, hs) in di.iter().enumerate() {
        let mut row: Vec<(usize, f64)> = (0..nx).map(|j| (1 + j, hs.coeffs[j])).collect();
        if soft {
            row.push((viol0 + i, -1.0));
        }
        row.push((di0 + i, 1.0));
        rows.push((row, hs.rhs));
    }
    let m = rows.len();
    let mut a = DMatrix::zeros(m, nvar);
    let mut b = DVector::zeros(m);
    for (i, (row, rhs)) in rows.iter().enumerate() {
        for &(j, v) in row {
            a[(i, j)] = v;
        }
        b[i] = *rhs;
    }
    let mut c = DVector::zeros(nvar);
    c[dp] = -1.0;
    c[dm] = 1.0;
    if soft {
        for i in 0..n_viol {
            c[viol0 + i] = soft_di_weight;
        }
    }
    let prog = ConicProgram {
        objective: c,
        constraint_matrix: a,
        rhs: b,
        cones: vec![Cone::Soc(1 + nx), Cone::NonNeg(nvar - (1 + nx))],
    };
    let settings = SolverSettings {
        tol: 1e-8,
        max_iter: SLOT_MAX_ITER,
        ..SolverSettings::default()
    };
    let (sol, warm) = solve_with(&prog, &settings, None)?;
    match sol.status {
        SolveStatus::Optimal => Ok(Some(DVector::from_iterator(
            nx,
            warm.z.as_slice()[1..1 + nx].iter().copied(),
        ))),
        SolveStatus::Infeasible | SolveStatus::MaxIter => Ok(None),
        SolveStatus::Unbounded => Err(Error::Solver("margin program unbounded".into())),
    }
}
