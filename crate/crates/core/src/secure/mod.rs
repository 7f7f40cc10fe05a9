//! Secrecy-constrained joint radar-communication beamforming.
//!
//! The design suppresses the sensed target's eavesdropping SINR subject to
//! per-user SINR thresholds, a total power budget and sensing-beampattern
//! shaping. Per-stream covariance matrices replace rank-1 beamformer outer
//! products (semidefinite relaxation); the quasi-convex level `t` on the
//! eavesdropping SINR is found by bisection, each oracle call being one
//! conic feasibility program. Rank-1 beamformers are recovered afterwards by
//! principal eigenvectors or Gaussian randomization.

mod builder;

pub(crate) use builder::{build_design_program, Families, Layout, Objective};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::array::{
    AngleInterval, ArrayGeometry, ChannelSet, ClutterSource, FadingModel, TargetRegion,
};
use crate::conic::{solve_with, SolveStatus, SolverSettings, WarmState};
use crate::error::{Error, Result};
use crate::linalg::{
    coupling, project_hermitian_psd, quad_form, ComplexVector, HermitianMatrix,
};
use crate::rng::stream_rng;

/// Inner-loop solve tolerance (each bisection oracle call is one program).
pub const INNER_TOL: f64 = 1e-5;
/// Tolerance of the final polish solve at the located level.
pub const FINAL_TOL: f64 = 1e-7;
/// Relative width of the final bisection bracket.
pub const BISECT_REL_TOL: f64 = 1e-3;

const INNER_MAX_ITER: usize = 20_000;
const FINAL_MAX_ITER: usize = 80_000;

/// Per-user channel specification; channels realize deterministically from
/// the embedded seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum UserChannelSpec {
    Rayleigh { seed: u64 },
    Rician { kappa: f64, angle: f64, seed: u64 },
    /// Fixed channel vector (API-level use; not expressible in config files).
    #[serde(skip)]
    Explicit(ComplexVector),
}

/// Whether channel-error robustness is enforced in the optimization or only
/// audited on the solved design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CsiMode {
    Enforce,
    Audit,
}

/// Target-angle / channel-knowledge uncertainty attached to a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintySpec {
    /// Target angular uncertainty interval; `None` keeps the point target.
    pub angle_interval: Option<AngleInterval>,
    /// Number of sampled angles in the interval; default: half-resolution
    /// spacing, `ceil(width / (1/N)) + 1`.
    pub num_samples: Option<usize>,
    pub csi_error: Option<crate::robust::CsiErrorModel>,
    pub csi_mode: CsiMode,
}

/// Beampattern shaping parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeampatternSpec {
    /// Mainlobe floor fraction `beta` in `(0, 1]`; the per-sample floor level
    /// is `beta * P * N / M` with `M` mainlobe samples on the constraint grid.
    pub floor_fraction: f64,
    /// Sidelobe ceiling fraction (level `fraction * P`); `None` disables caps.
    pub sidelobe_cap_fraction: Option<f64>,
    /// Constraint grid step in radians.
    pub grid_step: f64,
}

impl Default for BeampatternSpec {
    fn default() -> Self {
        Self {
            floor_fraction: 0.5,
            sidelobe_cap_fraction: Some(0.1),
            grid_step: 0.25_f64.to_radians(),
        }
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub users: Vec<UserChannelSpec>,
    /// Nominal target angle (radians).
    pub target_angle: f64,
    /// Target two-way complex gain.
    pub target_gain: Complex64,
    pub clutter: Vec<ClutterSource>,
    /// Linear noise powers (sigma^2 = 1 convention at the config boundary).
    pub noise_user: f64,
    pub noise_eve: f64,
    pub noise_radar: f64,
    /// Total transmit power budget, linear.
    pub power_budget: f64,
    /// Per-user SINR threshold, linear.
    pub user_sinr_threshold: f64,
    pub beampattern: BeampatternSpec,
    pub uncertainty: Option<UncertaintySpec>,
    /// Stream index carrying the confidential message.
    pub designated_stream: usize,
    /// Cap the eavesdropping SINR of every stream (conservative default) or
    /// only of the designated one.
    pub protect_all_streams: bool,
    /// PSK order used by the symbol-level precoder.
    pub modulation_order: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::validation("scenario needs at least one user"));
        }
        if self.designated_stream >= self.users.len() {
            return Err(Error::validation("designated stream index out of range"));
        }
        if !(self.user_sinr_threshold > 0.0) {
            return Err(Error::validation("SINR threshold must be positive"));
        }
        if self.power_budget < 0.0 || !self.power_budget.is_finite() {
            return Err(Error::validation("power budget must be finite and nonnegative"));
        }
        let beta = self.beampattern.floor_fraction;
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::validation("floor fraction must lie in (0, 1]"));
        }
        if let Some(cap) = self.beampattern.sidelobe_cap_fraction {
            if cap < 0.0 {
                return Err(Error::validation("sidelobe cap fraction must be >= 0"));
            }
        }
        if !(self.beampattern.grid_step > 0.0) {
            return Err(Error::validation("grid step must be positive"));
        }
        for np in [self.noise_user, self.noise_eve, self.noise_radar] {
            if !(np > 0.0) {
                return Err(Error::validation("noise powers must be positive"));
            }
        }
        if !matches!(self.modulation_order, 2 | 4 | 8 | 16) {
            return Err(Error::validation("modulation order must be 2, 4, 8 or 16"));
        }
        if let Some(u) = &self.uncertainty {
            if let Some(l) = u.num_samples {
                if l < 1 {
                    return Err(Error::validation("uncertainty sample count must be >= 1"));
                }
            }
            if let Some(m) = &u.csi_error {
                m.validate()?;
            }
        }
        Ok(())
    }

    /// Realizes the channel set deterministically from the embedded seeds.
    pub fn channel_set(&self) -> Result<ChannelSet> {
        let channels = self
            .users
            .iter()
            .map(|spec| match spec {
                UserChannelSpec::Rayleigh { seed } => {
                    crate::array::random_user_channel(&self.geometry, *seed, FadingModel::Rayleigh)
                }
                UserChannelSpec::Rician { kappa, angle, seed } => crate::array::random_user_channel(
                    &self.geometry,
                    *seed,
                    FadingModel::Rician {
                        kappa: *kappa,
                        angle: *angle,
                    },
                ),
                UserChannelSpec::Explicit(h) => Ok(h.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        let set = ChannelSet {
            user_channels: channels,
            target_angle: self.target_angle,
            target_gain: self.target_gain,
            clutter: self.clutter.clone(),
            noise_power_user: self.noise_user,
            noise_power_eve: self.noise_eve,
            noise_power_radar: self.noise_radar,
        };
        set.validate(&self.geometry)?;
        Ok(set)
    }

    /// Target region: the uncertainty interval when present, else the point.
    pub fn target_region(&self) -> TargetRegion {
        match &self.uncertainty {
            Some(u) => match u.angle_interval {
                Some(iv) => TargetRegion::Interval(iv),
                None => TargetRegion::Point(self.target_angle),
            },
            None => TargetRegion::Point(self.target_angle),
        }
    }
}

/// Precomputed solve context (realized channels, sampled eavesdropper angles,
/// constraint grid, power-normalized levels).
#[derive(Debug, Clone)]
pub(crate) struct DesignContext {
    pub geometry: ArrayGeometry,
    pub channels: ChannelSet,
    pub eve_angles: Vec<f64>,
    /// Wiretap channel `gain * a(theta_l)` per sampled angle.
    pub eve_samples: Vec<ComplexVector>,
    pub gamma: f64,
    /// Noise powers normalized by the power budget.
    pub sigma2_hat: f64,
    pub sigma_e2_hat: f64,
    pub power_budget: f64,
    pub steering_grid: Vec<ComplexVector>,
    pub mainlobe_idx: Vec<usize>,
    pub sidelobe_idx: Vec<usize>,
    pub floor_level_hat: f64,
    pub cap_level_hat: Option<f64>,
    /// Worst-case channel-error radii per user (enforce mode only).
    pub csi_radii: Option<Vec<f64>>,
    pub designated_stream: usize,
    pub protect_all_streams: bool,
}

impl DesignContext {
    pub fn new(scenario: &Scenario, use_uncertainty: bool) -> Result<Self> {
        scenario.validate()?;
        let channels = scenario.channel_set()?;
        let p = scenario.power_budget;
        if p <= 0.0 {
            return Err(Error::Infeasible(InfeasibilityReport {
                binding: ConstraintFamily::PowerBudget,
                message: "zero power budget cannot meet any positive SINR threshold".into(),
            }));
        }

        let target = if use_uncertainty {
            scenario.target_region()
        } else {
            TargetRegion::Point(scenario.target_angle)
        };
        let eve_angles = match (&target, use_uncertainty) {
            (TargetRegion::Interval(iv), true) => {
                let default_l = ((iv.width() * scenario.geometry.num_elements as f64).ceil()
                    as usize)
                    .max(0)
                    + 1;
                let l = scenario
                    .uncertainty
                    .as_ref()
                    .and_then(|u| u.num_samples)
                    .unwrap_or(default_l);
                crate::robust::sample_angle_interval(iv, l)?
            }
            _ => vec![scenario.target_angle],
        };
        let eve_samples = eve_angles
            .iter()
            .map(|&theta| crate::array::los_channel(&scenario.geometry, theta, scenario.target_gain))
            .collect::<Result<Vec<_>>>()?;

        let gg = builder::grid_geometry(
            &scenario.geometry,
            &target,
            scenario.beampattern.floor_fraction,
            scenario.beampattern.grid_step,
        )?;
        let steering_grid = builder::steering_table(&scenario.geometry, &gg.grid)?;

        let csi_radii = match (&scenario.uncertainty, use_uncertainty) {
            (Some(u), true) if u.csi_mode == CsiMode::Enforce => match &u.csi_error {
                Some(model) => Some(
                    (0..channels.num_users())
                        .map(|_| model.sphere_radius(scenario.geometry.num_elements))
                        .collect::<Result<Vec<f64>>>()?,
                ),
                None => None,
            },
            _ => None,
        };

        Ok(Self {
            geometry: scenario.geometry,
            channels,
            eve_angles,
            eve_samples,
            gamma: scenario.user_sinr_threshold,
            sigma2_hat: scenario.noise_user / p,
            sigma_e2_hat: scenario.noise_eve / p,
            power_budget: p,
            steering_grid,
            mainlobe_idx: gg.mainlobe_idx,
            sidelobe_idx: gg.sidelobe_idx,
            floor_level_hat: gg.floor_level_hat,
            cap_level_hat: scenario.beampattern.sidelobe_cap_fraction,
            csi_radii,
            designated_stream: scenario.designated_stream,
            protect_all_streams: scenario.protect_all_streams,
        })
    }

    /// Upper bracket for the eavesdropping-SINR level search.
    pub fn eve_bound_bracket(&self) -> f64 {
        let alpha2 = self.channels.target_gain.norm_sqr();
        self.geometry.num_elements as f64 * alpha2 / self.sigma_e2_hat
    }
}

/// Constraint family named by infeasibility reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstraintFamily {
    UserSinr,
    PowerBudget,
    BeampatternFloor,
    SidelobeCap,
    EveCap,
}

/// Structured infeasibility diagnosis.
#[derive(Debug, Clone, Serialize)]
pub struct InfeasibilityReport {
    pub binding: ConstraintFamily,
    pub message: String,
}

impl std::fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let family = match self.binding {
            ConstraintFamily::UserSinr => "user SINR constraints",
            ConstraintFamily::PowerBudget => "power budget",
            ConstraintFamily::BeampatternFloor => "beampattern mainlobe floor",
            ConstraintFamily::SidelobeCap => "sidelobe ceiling",
            ConstraintFamily::EveCap => "eavesdropping caps",
        };
        write!(f, "binding family: {family}; {}", self.message)
    }
}

/// Quality flags of a returned design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DesignFlag {
    /// Recovered rank-1 value exceeds the relaxation bound noticeably.
    SdrGap,
    /// No feasible rank-1 candidate; covariance design returned.
    Rank1Failed,
}

/// Metrics of a solved design, evaluated on the recovered beamformers when
/// available, otherwise on the covariances.
#[derive(Debug, Clone, Serialize)]
pub struct AchievedMetrics {
    pub user_sinrs: Vec<f64>,
    /// Max over protected streams and sampled target angles.
    pub eve_sinr: f64,
    pub eve_sinr_per_stream: Vec<f64>,
    /// Secrecy rate of the designated stream, bits/s/Hz.
    pub secrecy_rate: f64,
    /// Echo signal-to-clutter-plus-noise ratio at the nominal target angle.
    pub sensing_metric: f64,
    pub total_power: f64,
}

/// Solver-side diagnostics kept with each design.
#[derive(Debug, Clone, Serialize, Default)]
pub struct SolveDiagnostics {
    /// `(t, feasible)` oracle evaluations in order.
    pub bisection_trace: Vec<(f64, bool)>,
    pub oracle_calls: usize,
    pub final_primal_residual: f64,
    pub final_dual_residual: f64,
    pub final_gap: f64,
    pub final_iterations: usize,
}

/// Output of the secure (or robust) design.
#[derive(Debug, Clone, Serialize)]
pub struct BeamformerDesign {
    /// Per-stream covariance matrices, linear power scale.
    #[serde(serialize_with = "crate::artifacts::serialize_cov_list")]
    pub covariances: Vec<HermitianMatrix>,
    /// Recovered rank-1 beamformers (absent when recovery failed).
    #[serde(serialize_with = "crate::artifacts::serialize_beamformers")]
    pub beamformers: Option<Vec<ComplexVector>>,
    /// Optimal eavesdropping-SINR level from the relaxation (SDR bound).
    pub eve_sinr_bound: f64,
    pub achieved: AchievedMetrics,
    pub flags: Vec<DesignFlag>,
    pub diagnostics: SolveDiagnostics,
}

// ---------------------------------------------------------------------------
// Metric evaluators.
// ---------------------------------------------------------------------------

/// SINR of stream `k` at user `k` for explicit beamformers.
pub fn user_sinr(beamformers: &[ComplexVector], k: usize, channels: &ChannelSet) -> f64 {
    let h = &channels.user_channels[k];
    let signal = coupling(h, &beamformers[k]);
    let interference: f64 = beamformers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, w)| coupling(h, w))
        .sum();
    signal / (interference + channels.noise_power_user)
}

/// Covariance form of [`user_sinr`].
pub fn user_sinr_cov(covariances: &[HermitianMatrix], k: usize, channels: &ChannelSet) -> f64 {
    let h = &channels.user_channels[k];
    let signal = quad_form(h, &covariances[k]);
    let interference: f64 = covariances
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, r)| quad_form(h, r))
        .sum();
    signal / (interference + channels.noise_power_user)
}

/// Eavesdropping SINR of stream `k` at a receiver with channel `eve_channel`.
pub fn eve_sinr(
    beamformers: &[ComplexVector],
    k: usize,
    eve_channel: &ComplexVector,
    noise_power_eve: f64,
) -> f64 {
    let signal = coupling(eve_channel, &beamformers[k]);
    let interference: f64 = beamformers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, w)| coupling(eve_channel, w))
        .sum();
    signal / (interference + noise_power_eve)
}

/// Covariance form of [`eve_sinr`].
pub fn eve_sinr_cov(
    covariances: &[HermitianMatrix],
    k: usize,
    eve_channel: &ComplexVector,
    noise_power_eve: f64,
) -> f64 {
    let signal = quad_form(eve_channel, &covariances[k]);
    let interference: f64 = covariances
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, r)| quad_form(eve_channel, r))
        .sum();
    signal / (interference + noise_power_eve)
}

/// Secrecy rate in bits/s/Hz: rate difference between the legitimate user and
/// the eavesdropper, clamped at zero.
pub fn secrecy_rate(gamma_lu: f64, gamma_eve: f64) -> f64 {
    ((1.0 + gamma_lu).log2() - (1.0 + gamma_eve).log2()).max(0.0)
}

/// Echo signal-to-clutter-plus-noise ratio for total covariance `r_total`:
/// `|alpha|^2 a_t^H R a_t / (sum_c |alpha_c|^2 a_c^H R a_c + sigma_r^2)`.
pub fn scnr(
    geometry: &ArrayGeometry,
    r_total: &HermitianMatrix,
    channels: &ChannelSet,
) -> Result<f64> {
    let a_t = crate::array::steering_vector(geometry, channels.target_angle)?;
    let signal = channels.target_gain.norm_sqr() * quad_form(&a_t, r_total);
    let mut clutter_power = 0.0;
    for c in &channels.clutter {
        let a_c = crate::array::steering_vector(geometry, c.angle)?;
        clutter_power += c.gain.norm_sqr() * quad_form(&a_c, r_total);
    }
    Ok(signal / (clutter_power + channels.noise_power_radar))
}

// ---------------------------------------------------------------------------
// Design drivers.
// ---------------------------------------------------------------------------

struct OracleState {
    warm: Option<WarmState>,
    trace: Vec<(f64, bool)>,
    calls: usize,
}

fn oracle_solve(
    ctx: &DesignContext,
    t: f64,
    state: &mut OracleState,
) -> Result<bool> {
    let (prog, _) = build_design_program(ctx, t, Families::all(), Objective::Feasibility)?;
    let settings = SolverSettings {
        tol: INNER_TOL,
        max_iter: INNER_MAX_ITER,
        ..SolverSettings::default()
    };
    let (sol, warm) = solve_with(&prog, &settings, state.warm.as_ref())?;
    state.calls += 1;
    let feasible = sol.status == SolveStatus::Optimal;
    // Keep only converged iterates for warm starts; a state that diverged
    // toward an infeasibility certificate poisons the next solve.
    if feasible {
        state.warm = Some(warm);
    }
    state.trace.push((t, feasible));
    Ok(feasible)
}

fn diagnose_infeasibility(ctx: &DesignContext, t_high: f64) -> InfeasibilityReport {
    let probes: [(Families, ConstraintFamily, &str); 3] = [
        (
            Families {
                user_sinr: true,
                eve_caps: false,
                floor: false,
                caps: false,
            },
            ConstraintFamily::UserSinr,
            "per-user SINR thresholds are unreachable within the power budget",
        ),
        (
            Families {
                user_sinr: true,
                eve_caps: false,
                floor: true,
                caps: false,
            },
            ConstraintFamily::BeampatternFloor,
            "mainlobe floor conflicts with the SINR/power constraints",
        ),
        (
            Families {
                user_sinr: true,
                eve_caps: false,
                floor: true,
                caps: true,
            },
            ConstraintFamily::SidelobeCap,
            "sidelobe ceiling conflicts with the remaining constraints",
        ),
    ];
    for (fam, binding, msg) in probes {
        let feasible = build_design_program(ctx, t_high, fam, Objective::Feasibility)
            .and_then(|(prog, _)| {
                let settings = SolverSettings {
                    tol: INNER_TOL,
                    max_iter: INNER_MAX_ITER,
                    ..SolverSettings::default()
                };
                solve_with(&prog, &settings, None).map(|(s, _)| s.status == SolveStatus::Optimal)
            })
            .unwrap_or(false);
        if !feasible {
            return InfeasibilityReport {
                binding,
                message: msg.into(),
            };
        }
    }
    InfeasibilityReport {
        binding: ConstraintFamily::EveCap,
        message: "eavesdropping caps cannot be met even at the trivial upper level".into(),
    }
}

/// Level search + final polish shared by the nominal and robust designs.
pub(crate) fn drive_design(ctx: &DesignContext) -> Result<BeamformerDesign> {
    let mut state = OracleState {
        warm: None,
        trace: Vec::new(),
        calls: 0,
    };

    // Trivial level first: a zero-gain target (or one fully nulled) needs no cap.
    let t_star_bracket = if oracle_solve(ctx, 0.0, &mut state)? {
        (0.0, 0.0)
    } else {
        let t_high = ctx.eve_bound_bracket();
        if !oracle_solve(ctx, t_high, &mut state)? {
            return Err(Error::Infeasible(diagnose_infeasibility(ctx, t_high)));
        }
        // Exponent search: smallest k in [0, 48] with t_high * 2^-k feasible,
        // then a plain bisection inside the factor-2 bracket. The combined
        // trajectory stays inside the documented [0, t_high] bracket and
        // reaches a relative bracket width of BISECT_REL_TOL.
        let mut k_lo = 0u32; // feasible exponent
        let mut k_hi = 48u32; // presumed infeasible exponent
        let mut k_hi_infeasible = false;
        while k_lo + 1 < k_hi {
            let k_mid = (k_lo + k_hi) / 2;
            if oracle_solve(ctx, t_high * 2f64.powi(-(k_mid as i32)), &mut state)? {
                k_lo = k_mid;
            } else {
                k_hi = k_mid;
                k_hi_infeasible = true;
            }
        }
        let t_feas = t_high * 2f64.powi(-(k_lo as i32));
        let t_infeas = if k_hi_infeasible {
            t_high * 2f64.powi(-(k_hi as i32))
        } else {
            0.0
        };
        let tol = (BISECT_REL_TOL * t_feas).max(f64::MIN_POSITIVE);
        let outcome = crate::conic::bisect_feasibility(
            |t| {
                if oracle_solve(ctx, t, &mut state).unwrap_or(false) {
                    crate::conic::Feasibility::Feasible
                } else {
                    crate::conic::Feasibility::Infeasible
                }
            },
            t_infeas,
            t_feas,
            tol,
        )?;
        (outcome.t_feasible, outcome.t_star)
    };
    let (t_final, t_star) = t_star_bracket;

    // Final polish at the located level: minimum-power point of the level
    // set. Runs cold: dual iterates of the feasibility oracles carry no
    // information about the power objective and only slow this solve down.
    let (prog, layout) = build_design_program(ctx, t_final, Families::all(), Objective::MinPower)?;
    let settings = SolverSettings {
        tol: FINAL_TOL,
        max_iter: FINAL_MAX_ITER,
        ..SolverSettings::default()
    };
    let (sol, warm) = solve_with(&prog, &settings, None)?;
    if sol.status != SolveStatus::Optimal && sol.status != SolveStatus::MaxIter {
        return Err(Error::Solver(format!(
            "final polish ended with status {:?}",
            sol.status
        )));
    }

    // Extract from the cone-feasible iterate: its blocks are PSD exactly, so
    // evaluated interference terms cannot go negative. Tiny equality-side
    // violations are covered by the metric slack.
    let covariances = extract_covariances(ctx, &layout, &warm.z);
    let diagnostics = SolveDiagnostics {
        bisection_trace: state.trace.clone(),
        oracle_calls: state.calls,
        final_primal_residual: sol.primal_residual,
        final_dual_residual: sol.dual_residual,
        final_gap: sol.gap,
        final_iterations: sol.iterations,
    };
    finish_design(ctx, covariances, t_star.max(t_final), diagnostics, 200)
}

/// Eavesdropper-oblivious reference: same feasibility set without the caps,
/// with the probing mainlobe power deliberately carried by the designated
/// (information-bearing) stream. This is the configuration whose secrecy the
/// cap-constrained design is compared against.
pub fn solve_baseline_design(scenario: &Scenario) -> Result<BeamformerDesign> {
    let ctx = DesignContext::new(scenario, true)?;
    let fam = Families {
        user_sinr: true,
        eve_caps: false,
        floor: true,
        caps: true,
    };
    let (prog, layout) = build_design_program(&ctx, 0.0, fam, Objective::MaxDesignatedMainlobe)?;
    let settings = SolverSettings {
        tol: FINAL_TOL,
        max_iter: FINAL_MAX_ITER,
        ..SolverSettings::default()
    };
    let (sol, warm) = solve_with(&prog, &settings, None)?;
    if sol.status == SolveStatus::Infeasible {
        return Err(Error::Infeasible(diagnose_infeasibility(
            &ctx,
            ctx.eve_bound_bracket(),
        )));
    }
    let covariances = extract_covariances(&ctx, &layout, &warm.z);
    let diagnostics = SolveDiagnostics {
        bisection_trace: Vec::new(),
        oracle_calls: 1,
        final_primal_residual: sol.primal_residual,
        final_dual_residual: sol.dual_residual,
        final_gap: sol.gap,
        final_iterations: sol.iterations,
    };
    let bound = ctx.eve_bound_bracket();
    finish_design(&ctx, covariances, bound, diagnostics, 200)
}

/// Secure design for the nominal scenario (point target, exact channels).
pub fn solve_secure_design(scenario: &Scenario) -> Result<BeamformerDesign> {
    let ctx = DesignContext::new(scenario, false)?;
    drive_design(&ctx)
}

fn extract_covariances(
    ctx: &DesignContext,
    layout: &Layout,
    primal: &DVector<f64>,
) -> Vec<HermitianMatrix> {
    let side = layout.embedded_side;
    let d = crate::linalg::svec_len(side);
    layout
        .cov_blocks
        .iter()
        .map(|&off| {
            let block = &primal.as_slice()[off..off + d];
            let embedded = crate::linalg::smat(block, side);
            let complex = crate::conic::unembed_hermitian(&embedded);
            let scaled = complex.map(|e| e * Complex64::new(ctx.power_budget, 0.0));
            project_hermitian_psd(&scaled)
        })
        .collect()
}

pub(crate) fn finish_design(
    ctx: &DesignContext,
    covariances: Vec<HermitianMatrix>,
    eve_bound: f64,
    diagnostics: SolveDiagnostics,
    randomization_candidates: usize,
) -> Result<BeamformerDesign> {
    // At large thresholds the first-order solve leaves residual cross-user
    // couplings that a strict SINR check would reject. Repair by projecting
    // each stream onto the complement of the other users' channels (exact
    // interference nulls) and topping up the own-channel component; keep it
    // only if every constraint family still verifies.
    let covariances = {
        let gamma = ctx.gamma;
        let meets = |covs: &[HermitianMatrix]| {
            (0..covs.len()).all(|k| {
                user_sinr_cov_ctx(covs, k, ctx) >= gamma * (1.0 - 1e-3)
            })
        };
        if meets(&covariances) {
            covariances
        } else {
            match zero_forcing_repair(&covariances, ctx, eve_bound) {
                Some(fixed) => fixed,
                None => covariances,
            }
        }
    };
    let recovery = rank1_recovery(&covariances, ctx, randomization_candidates)?;
    let mut flags = Vec::new();
    let achieved = match &recovery {
        Some(w) => evaluate_metrics_vectors(ctx, w),
        None => {
            flags.push(DesignFlag::Rank1Failed);
            evaluate_metrics_cov(ctx, &covariances)
        }
    };
    if achieved.eve_sinr > eve_bound * (1.0 + 1e-3) + 1e-12 {
        flags.push(DesignFlag::SdrGap);
    }
    Ok(BeamformerDesign {
        covariances,
        beamformers: recovery,
        eve_sinr_bound: eve_bound,
        achieved,
        flags,
        diagnostics,
    })
}

fn evaluate_metrics_vectors(ctx: &DesignContext, w: &[ComplexVector]) -> AchievedMetrics {
    let k_users = w.len();
    let user_sinrs: Vec<f64> = (0..k_users).map(|k| user_sinr(w, k, &ctx.channels)).collect();
    let noise_eve = ctx.sigma_e2_hat * ctx.power_budget;
    let per_stream: Vec<f64> = (0..k_users)
        .map(|k| {
            ctx.eve_samples
                .iter()
                .map(|g| eve_sinr(w, k, g, noise_eve))
                .fold(0.0, f64::max)
        })
        .collect();
    let protected_max = protected_max(ctx, &per_stream);
    let kd = ctx.designated_stream;
    let secrecy = secrecy_rate(user_sinrs[kd], per_stream[kd]);
    let mut r_total = HermitianMatrix::zeros(ctx.geometry.num_elements, ctx.geometry.num_elements);
    let mut total_power = 0.0;
    for wk in w {
        total_power += wk.norm_squared();
        for i in 0..wk.len() {
            for j in 0..wk.len() {
                r_total[(i, j)] += wk[i] * wk[j].conj();
            }
        }
    }
    let sensing = scnr(&ctx.geometry, &r_total, &ctx.channels).unwrap_or(0.0);
    AchievedMetrics {
        user_sinrs,
        eve_sinr: protected_max,
        eve_sinr_per_stream: per_stream,
        secrecy_rate: secrecy,
        sensing_metric: sensing,
        total_power,
    }
}

fn evaluate_metrics_cov(ctx: &DesignContext, covs: &[HermitianMatrix]) -> AchievedMetrics {
    let k_users = covs.len();
    let user_sinrs: Vec<f64> = (0..k_users)
        .map(|k| user_sinr_cov(covs, k, &ctx.channels))
        .collect();
    let noise_eve = ctx.sigma_e2_hat * ctx.power_budget;
    let per_stream: Vec<f64> = (0..k_users)
        .map(|k| {
            ctx.eve_samples
                .iter()
                .map(|g| eve_sinr_cov(covs, k, g, noise_eve))
                .fold(0.0, f64::max)
        })
        .collect();
    let protected_max = protected_max(ctx, &per_stream);
    let kd = ctx.designated_stream;
    let secrecy = secrecy_rate(user_sinrs[kd], per_stream[kd]);
    let mut r_total = HermitianMatrix::zeros(ctx.geometry.num_elements, ctx.geometry.num_elements);
    for r in covs {
        r_total += r;
    }
    let total_power = r_total.trace().re;
    let sensing = scnr(&ctx.geometry, &r_total, &ctx.channels).unwrap_or(0.0);
    AchievedMetrics {
        user_sinrs,
        eve_sinr: protected_max,
        eve_sinr_per_stream: per_stream,
        secrecy_rate: secrecy,
        sensing_metric: sensing,
        total_power,
    }
}

/// Covariance SINR evaluated in the context's normalized noise scale.
fn user_sinr_cov_ctx(covs: &[HermitianMatrix], k: usize, ctx: &DesignContext) -> f64 {
    let h = &ctx.channels.user_channels[k];
    let signal = quad_form(h, &covs[k]);
    let interference: f64 = covs
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, r)| quad_form(h, r))
        .sum();
    signal / (interference + ctx.sigma2_hat * ctx.power_budget)
}

/// Exact interference cleanup: congruence-project stream `j`'s covariance
/// onto the orthogonal complement of the other users' channels, then add
/// enough own-channel rank-1 power to reach the threshold. Returns `None`
/// (caller keeps the original) if the geometry does not allow it or any
/// constraint family stops verifying afterwards.
fn zero_forcing_repair(
    covs: &[HermitianMatrix],
    ctx: &DesignContext,
    eve_bound: f64,
) -> Option<Vec<HermitianMatrix>> {
    let n = ctx.geometry.num_elements;
    let k_users = covs.len();
    if k_users > 1 && n < k_users {
        return None;
    }
    let gamma = ctx.gamma;
    let sigma2 = ctx.sigma2_hat * ctx.power_budget;

    // Orthogonal projector onto the complement of span{h_k : k != j}.
    let projector = |j: usize| -> Option<HermitianMatrix> {
        let mut basis: Vec<ComplexVector> = Vec::new();
        for (k, h) in ctx.channels.user_channels.iter().enumerate() {
            if k == j {
                continue;
            }
            let mut v = h.clone();
            // Twice-iterated Gram-Schmidt for orthogonality to fp accuracy.
            for _ in 0..2 {
                for b in &basis {
                    let coef = b.dotc(&v);
                    v -= b.map(|e| e * coef);
                }
            }
            let norm = v.norm();
            if norm > 1e-9 * h.norm() {
                v /= Complex64::new(norm, 0.0);
                basis.push(v);
            }
        }
        let mut pi = HermitianMatrix::identity(n, n);
        for b in &basis {
            for r in 0..n {
                for c in 0..n {
                    pi[(r, c)] -= b[r] * b[c].conj();
                }
            }
        }
        Some(pi)
    };

    // Phase 1: congruence-project every block (PSD preserved).
    let mut repaired = Vec::with_capacity(k_users);
    let mut boosts = Vec::with_capacity(k_users);
    for j in 0..k_users {
        let pi = projector(j)?;
        let h = &ctx.channels.user_channels[j];
        let g = &pi * h;
        if g.norm_squared() < 1e-12 * h.norm_squared() {
            eprintln!("ZFDBG null fail user {j}");
            return None; // channel inside the others' span: cannot null
        }
        let raw = &pi * &covs[j] * &pi;
        // Hermitianize without an eigenvalue round-trip.
        let mut fixed = HermitianMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                fixed[(r, c)] = (raw[(r, c)] + raw[(c, r)].conj()) * Complex64::new(0.5, 0.0);
            }
        }
        repaired.push(fixed);
        boosts.push(g);
    }

    // Phase 2: top up own-channel power to meet the threshold against the
    // actual residual interference.
    for j in 0..k_users {
        let h = &ctx.channels.user_channels[j];
        let interference: f64 = (0..k_users)
            .filter(|&k| k != j)
            .map(|k| quad_form(h, &repaired[k]))
            .sum();
        let needed = gamma * (interference.max(0.0) + sigma2) * (1.0 + 1e-9);
        let signal = quad_form(h, &repaired[j]);
        if signal < needed {
            let g = &boosts[j];
            let gain = g.dotc(h).norm_sqr() / g.norm_squared();
            if !(gain > 0.0) {
                return None;
            }
            let delta = (needed - signal) / gain / g.norm_squared();
            for r in 0..n {
                for c in 0..n {
                    repaired[j][(r, c)] += g[r] * g[c].conj() * Complex64::new(delta, 0.0);
                }
            }
        }
    }

    // Verify every family on the repaired design.
    for k in 0..k_users {
        if user_sinr_cov_ctx(&repaired, k, ctx) < gamma * (1.0 - 1e-3) {
            eprintln!("ZFDBG sinr fail user {k}: {}", user_sinr_cov_ctx(&repaired, k, ctx));
            return None;
        }
    }
    let total: f64 = repaired.iter().map(|r| r.trace().re).sum();
    if total > ctx.power_budget * (1.0 + 1e-6) {
        eprintln!("ZFDBG power fail {total} vs {}", ctx.power_budget);
        return None;
    }
    let floor = ctx.floor_level_hat * ctx.power_budget;
    for &mi in &ctx.mainlobe_idx {
        let a = &ctx.steering_grid[mi];
        let p: f64 = repaired.iter().map(|r| quad_form(a, r)).sum();
        if p < floor * (1.0 - 1e-2) {
            eprintln!("ZFDBG floor fail at idx {mi}: {p} vs {floor}");
            return None;
        }
    }
    if let Some(cap) = ctx.cap_level_hat {
        let cap_level = cap * ctx.power_budget;
        for &si in &ctx.sidelobe_idx {
            let a = &ctx.steering_grid[si];
            let p: f64 = repaired.iter().map(|r| quad_form(a, r)).sum();
            if p > cap_level * (1.0 + 1e-2) {
                eprintln!("ZFDBG cap fail at idx {si}: {p} vs {cap_level}");
                return None;
            }
        }
    }
    let noise_eve = ctx.sigma_e2_hat * ctx.power_budget;
    if eve_bound.is_finite() && eve_bound > 0.0 {
        let protected: Vec<usize> = if ctx.protect_all_streams {
            (0..k_users).collect()
        } else {
            vec![ctx.designated_stream]
        };
        for g in &ctx.eve_samples {
            for &k in &protected {
                if eve_sinr_cov(&repaired, k, g, noise_eve) > eve_bound * (1.0 + 5e-3) {
                    eprintln!("ZFDBG eve fail stream {k}: {} vs bound {eve_bound}", eve_sinr_cov(&repaired, k, g, noise_eve));
                    return None;
                }
            }
        }
    }
    Some(repaired)
}

fn protected_max(ctx: &DesignContext, per_stream: &[f64]) -> f64 {
    if ctx.protect_all_streams {
        per_stream.iter().copied().fold(0.0, f64::max)
    } else {
        per_stream[ctx.designated_stream]
    }
}

// ---------------------------------------------------------------------------
// Rank-1 recovery.
// ---------------------------------------------------------------------------

/// Approximation-quality threshold above which the principal eigenvector is
/// accepted directly.
const EIGEN_RATIO: f64 = 0.99;

/// Recovers rank-1 beamformers from covariance blocks. Blocks whose dominant
/// eigenvalue carries at least 99% of the trace contribute their scaled
/// principal eigenvector; the rest are sampled by Gaussian randomization
/// (`candidates` draws). Candidates may be rescaled to restore user-SINR
/// feasibility; the feasible candidate with the smallest protected
/// eavesdropping SINR wins. Returns `None` when no candidate survives.
pub(crate) fn rank1_recovery(
    covariances: &[HermitianMatrix],
    ctx: &DesignContext,
    candidates: usize,
) -> Result<Option<Vec<ComplexVector>>> {
    let k_users = covariances.len();
    let eigs: Vec<_> = covariances
        .iter()
        .map(|r| r.clone().symmetric_eigen())
        .collect();
    let mut principal: Vec<ComplexVector> = Vec::with_capacity(k_users);
    let mut all_near_rank1 = true;
    for (r, eig) in covariances.iter().zip(&eigs) {
        let trace = r.trace().re.max(1e-300);
        let (kmax, lmax) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| {
                if v > acc.1 {
                    (i, v)
                } else {
                    acc
                }
            });
        if lmax / trace < EIGEN_RATIO {
            all_near_rank1 = false;
        }
        let v = eig.eigenvectors.column(kmax);
        principal.push(ComplexVector::from_iterator(
            v.len(),
            v.iter().map(|e| e * Complex64::new(lmax.max(0.0).sqrt(), 0.0)),
        ));
    }

    let mut best: Option<(f64, Vec<ComplexVector>)> = None;
    // Raw candidate first; power rebalance only repairs a failed screen.
    let consider = |cand: Vec<ComplexVector>, best: &mut Option<(f64, Vec<ComplexVector>)>| {
        let scored = match screen_candidate(&cand, ctx) {
            Some(score) => Some((score, cand)),
            None => rebalance_powers(&cand, ctx)
                .and_then(|fixed| screen_candidate(&fixed, ctx).map(|score| (score, fixed))),
        };
        if let Some((score, adjusted)) = scored {
            let replace = match best.as_ref() {
                Some((s, _)) => score < *s,
                None => true,
            };
            if replace {
                *best = Some((score, adjusted));
            }
        }
    };

    consider(principal.clone(), &mut best);
    if !(all_near_rank1 && best.is_some()) {
        // Gaussian randomization on the low-rank-deficient blocks.
        let sqrt_blocks: Vec<HermitianMatrix> = covariances
            .iter()
            .zip(&eigs)
            .map(|(r, eig)| {
                let n = r.nrows();
                let mut s = HermitianMatrix::zeros(n, n);
                for (k, lambda) in eig.eigenvalues.iter().enumerate() {
                    if *lambda > 0.0 {
                        let v = eig.eigenvectors.column(k);
                        let sl = lambda.sqrt();
                        for i in 0..n {
                            for j in 0..n {
                                s[(i, j)] += v[i] * v[j].conj() * Complex64::new(sl, 0.0);
                            }
                        }
                    }
                }
                s
            })
            .collect();
        let seed_base = 0x72616e6b; // stream tag
        for c in 0..candidates {
            let mut cand = Vec::with_capacity(k_users);
            for (k, (r, eig)) in covariances.iter().zip(&eigs).enumerate() {
                let trace = r.trace().re.max(1e-300);
                let lmax = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if lmax / trace >= EIGEN_RATIO {
                    cand.push(principal[k].clone());
                } else {
                    let mut rng = stream_rng(seed_base, &[c as u64, k as u64]);
                    let n = r.nrows();
                    let g = ComplexVector::from_iterator(
                        n,
                        (0..n).map(|_| {
                            let re: f64 =
                                rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                            let im: f64 =
                                rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                            Complex64::new(re, im) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
                        }),
                    );
                    cand.push(&sqrt_blocks[k] * g);
                }
            }
            consider(cand, &mut best);
        }
    }
    Ok(best.map(|(_, w)| w))
}

/// Classic power rebalance: keep candidate directions, solve the K x K linear
/// system that meets every SINR threshold with equality.
fn rebalance_powers(cand: &[ComplexVector], ctx: &DesignContext) -> Option<Vec<ComplexVector>> {
    let k_users = cand.len();
    let gamma = ctx.gamma;
    let sigma2 = ctx.sigma2_hat * ctx.power_budget;
    let mut coupling_mat = nalgebra::DMatrix::zeros(k_users, k_users);
    for k in 0..k_users {
        let h = &ctx.channels.user_channels[k];
        for j in 0..k_users {
            let wn = cand[j].norm_squared();
            if wn <= 0.0 {
                return None;
            }
            coupling_mat[(k, j)] = coupling(h, &cand[j]) / wn;
        }
    }
    let mut m = nalgebra::DMatrix::zeros(k_users, k_users);
    for k in 0..k_users {
        for j in 0..k_users {
            m[(k, j)] = if j == k {
                coupling_mat[(k, k)]
            } else {
                -gamma * coupling_mat[(k, j)]
            };
        }
    }
    let rhs = nalgebra::DVector::from_element(k_users, gamma * sigma2);
    let p = m.lu().solve(&rhs)?;
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return None;
    }
    Some(
        cand.iter()
            .zip(p.iter())
            .map(|(w, &pk)| {
                let scale = (pk / w.norm_squared()).sqrt();
                w.map(|e| e * Complex64::new(scale, 0.0))
            })
            .collect(),
    )
}

/// Feasibility screen; returns the protected eavesdropping SINR (the
/// randomization score) for feasible candidates.
fn screen_candidate(cand: &[ComplexVector], ctx: &DesignContext) -> Option<f64> {
    let k_users = cand.len();
    let total_power: f64 = cand.iter().map(|w| w.norm_squared()).sum();
    if total_power > ctx.power_budget * (1.0 + 1e-6) {
        return None;
    }
    for k in 0..k_users {
        if user_sinr(cand, k, &ctx.channels) < ctx.gamma * (1.0 - 1e-3) {
            return None;
        }
    }
    // Beampattern floor and ceiling, with mild evaluation slack.
    let floor = ctx.floor_level_hat * ctx.power_budget;
    for &mi in &ctx.mainlobe_idx {
        let a = &ctx.steering_grid[mi];
        let p: f64 = cand.iter().map(|w| coupling(a, w)).sum();
        if p < floor * (1.0 - 1e-2) {
            eprintln!("ZFDBG floor fail at idx {mi}: {p} vs {floor}");
            return None;
        }
    }
    if let Some(cap) = ctx.cap_level_hat {
        let cap_level = cap * ctx.power_budget;
        for &si in &ctx.sidelobe_idx {
            let a = &ctx.steering_grid[si];
            let p: f64 = cand.iter().map(|w| coupling(a, w)).sum();
            if p > cap_level * (1.0 + 1e-2) + 1e-12 {
                return None;
            }
        }
    }
    let noise_eve = ctx.sigma_e2_hat * ctx.power_budget;
    let per_stream: Vec<f64> = (0..k_users)
        .map(|k| {
            ctx.eve_samples
                .iter()
                .map(|g| eve_sinr(cand, k, g, noise_eve))
                .fold(0.0, f64::max)
        })
        .collect();
    Some(protected_max(ctx, &per_stream))
}

#[cfg(test)]
mod tests;
