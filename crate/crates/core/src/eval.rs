//! Seeded Monte-Carlo evaluation and experiment sweeps: symbol error rates,
//! secrecy-rate-versus-power curves, beampattern exports.
//!
//! Every stochastic routine draws from counter-based streams keyed by
//! `(master seed, trial index, receiver index)`, so parallel and serial runs
//! aggregate to identical results, and all artifacts are reproducible
//! byte-for-byte for a fixed config and seed.

use rayon::prelude::*;
use serde::Serialize;

use crate::array::complex_noise;
use crate::artifacts::{fmt_f64, CsvTable, SvgPlot};
use crate::error::{Error, Result};
use crate::linalg::ComplexVector;
use crate::precoding::{classify_symbol, PrecodedSlot, PskConstellation, PskFrame};
use crate::rng::stream_rng;
use crate::secure::{
    solve_baseline_design, AchievedMetrics, BeamformerDesign, Scenario,
};

/// Wilson 95% score interval for a binomial proportion.
pub fn wilson_interval(errors: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054_f64; // 97.5% normal quantile
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Symbol-error-rate estimate for one receiver at one noise level.
#[derive(Debug, Clone, Serialize)]
pub struct SerPoint {
    /// Signal-to-noise ratio of this sweep point, linear.
    pub snr: f64,
    pub errors: usize,
    pub trials: usize,
    pub ser: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

/// Symbol error rates per receiver (users then eavesdropper) per SNR point.
#[derive(Debug, Clone, Serialize)]
pub struct SerReport {
    /// `points[receiver][snr_index]`; receiver `K` is the eavesdropper.
    pub points: Vec<Vec<SerPoint>>,
    pub trials: usize,
    pub seed: u64,
}

/// Transmission source for the error-rate simulator.
pub enum Transmitter<'a> {
    /// Fixed beamformers modulating PSK symbols per stream.
    Beamformer {
        beamformers: &'a [ComplexVector],
        constellation: PskConstellation,
    },
    /// Symbol-level precoded frame: slot `t` transmits `slots[t].x`.
    Frame {
        frame: &'a PskFrame,
        slots: &'a [PrecodedSlot],
    },
}

/// Link-level symbol-error simulation.
///
/// For each trial and SNR point, every receiver sees its channel output plus
/// circular complex Gaussian noise scaled so that the DESIGNATED receiver's
/// ratio of received symbol energy to noise power equals the requested SNR;
/// the eavesdropper applies maximum-likelihood PSK detection to the
/// designated stream. `snr_points` are linear; an empty list means noiseless.
pub fn monte_carlo_ser(
    transmitter: &Transmitter,
    channels: &[ComplexVector],
    eve_channel: &ComplexVector,
    snr_points: &[f64],
    trials: usize,
    seed: u64,
    designated_stream: usize,
) -> Result<SerReport> {
    if trials == 0 {
        return Err(Error::validation("need at least one trial"));
    }
    let k_users = channels.len();
    let n_rx = k_users + 1;
    let snrs: Vec<f64> = if snr_points.is_empty() {
        vec![f64::INFINITY]
    } else {
        snr_points.to_vec()
    };

    // Reference received energy per receiver (for noise scaling).
    let ref_energy: Vec<f64> = match transmitter {
        Transmitter::Beamformer { beamformers, .. } => {
            let mut e: Vec<f64> = (0..k_users)
                .map(|k| crate::linalg::coupling(&channels[k], &beamformers[k]))
                .collect();
            e.push(crate::linalg::coupling(
                eve_channel,
                &beamformers[designated_stream],
            ));
            e
        }
        Transmitter::Frame { slots, .. } => {
            // Mean received power over feasible slots.
            let mut acc = vec![0.0; n_rx];
            let mut count = 0usize;
            for slot in slots.iter() {
                if let Some(x) = &slot.x {
                    for k in 0..k_users {
                        acc[k] += channels[k].dotc(x).norm_sqr();
                    }
                    acc[k_users] += eve_channel.dotc(x).norm_sqr();
                    count += 1;
                }
            }
            if count == 0 {
                return Err(Error::validation("no feasible slots to simulate"));
            }
            acc.iter().map(|a| a / count as f64).collect()
        }
    };

    let mut points = vec![Vec::with_capacity(snrs.len()); n_rx];
    for (si, &snr) in snrs.iter().enumerate() {
        let counts: Vec<usize> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut errs = vec![0usize; n_rx];
                match transmitter {
                    Transmitter::Beamformer {
                        beamformers,
                        constellation,
                    } => {
                        let mut sym_rng = stream_rng(seed, &[0x73796d, si as u64, trial as u64]);
                        use rand::Rng;
                        let symbols: Vec<usize> = (0..k_users)
                            .map(|_| sym_rng.random_range(0..constellation.order))
                            .collect();
                        let tx: ComplexVector = beamformers
                            .iter()
                            .zip(&symbols)
                            .map(|(w, &s)| w.map(|e| e * constellation.point(s)))
                            .fold(ComplexVector::zeros(beamformers[0].len()), |acc, v| {
                                acc + v
                            });
                        for k in 0..k_users {
                            let gain = channels[k].dotc(&beamformers[k]);
                            let noise_power = noise_for(ref_energy[k], snr);
                            let mut rng =
                                stream_rng(seed, &[si as u64, trial as u64, k as u64]);
                            let rx = channels[k].dotc(&tx) + complex_noise(&mut rng, noise_power);
                            // Coherent detection against the known stream gain.
                            let eq = rx / gain;
                            let d = classify_symbol(eq, constellation);
                            if d.index != symbols[k] {
                                errs[k] += 1;
                            }
                        }
                        // Eavesdropper intercepts the designated stream.
                        let gain = eve_channel.dotc(&beamformers[designated_stream]);
                        let noise_power = noise_for(ref_energy[k_users], snr);
                        let mut rng =
                            stream_rng(seed, &[si as u64, trial as u64, k_users as u64]);
                        let rx = eve_channel.dotc(&tx) + complex_noise(&mut rng, noise_power);
                        let eq = if gain.norm() > 0.0 { rx / gain } else { rx };
                        let d = classify_symbol(eq, constellation);
                        if d.index != symbols[designated_stream] {
                            errs[k_users] += 1;
                        }
                    }
                    Transmitter::Frame { frame, slots } => {
                        let slot_idx = trial % slots.len();
                        let slot = &slots[slot_idx];
                        if let Some(x) = &slot.x {
                            let cons = &frame.constellation;
                            for k in 0..k_users {
                                let noise_power = noise_for(ref_energy[k], snr);
                                let mut rng =
                                    stream_rng(seed, &[si as u64, trial as u64, k as u64]);
                                let rx =
                                    channels[k].dotc(x) + complex_noise(&mut rng, noise_power);
                                let d = classify_symbol(rx, cons);
                                if d.index != frame.symbols[slot_idx][k] {
                                    errs[k] += 1;
                                }
                            }
                            let noise_power = noise_for(ref_energy[k_users], snr);
                            let mut rng =
                                stream_rng(seed, &[si as u64, trial as u64, k_users as u64]);
                            let rx = eve_channel.dotc(x) + complex_noise(&mut rng, noise_power);
                            let d = classify_symbol(rx, cons);
                            if d.index != frame.symbols[slot_idx][designated_stream] {
                                errs[k_users] += 1;
                            }
                        }
                    }
                }
                errs
            })
            .reduce(
                || vec![0usize; n_rx],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(&b) {
                        *x += y;
                    }
                    a
                },
            );
        for (rx, &errors) in counts.iter().enumerate() {
            let (lo, hi) = wilson_interval(errors, trials);
            points[rx].push(SerPoint {
                snr,
                errors,
                trials,
                ser: errors as f64 / trials as f64,
                wilson_low: lo,
                wilson_high: hi,
            });
        }
    }
    Ok(SerReport {
        points,
        trials,
        seed,
    })
}

fn noise_for(ref_energy: f64, snr: f64) -> f64 {
    if snr.is_infinite() {
        0.0
    } else {
        ref_energy / snr
    }
}

/// Per-point record of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub sweep_value: f64,
    pub secrecy_rate: f64,
    pub baseline_secrecy_rate: f64,
    pub user_sinrs: Vec<f64>,
    pub eve_sinr: f64,
    pub sensing_metric: f64,
    pub solver_status: String,
    /// Wall time of the point solve in seconds (diagnostic only; never
    /// written into deterministic artifacts).
    #[serde(skip)]
    pub wall_time: f64,
}

/// Result of an experiment sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub sweep_variable: String,
    pub values: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub seed: u64,
    pub config_hash: String,
    /// Soft-check warnings (non-monotone trends and the like).
    pub warnings: Vec<String>,
}

/// Secrecy rate of the (robust) secure design against the
/// eavesdropper-oblivious baseline across transmit powers.
///
/// Power values are in dBm and must be sorted ascending; each point re-solves
/// both designs with identical seeds. A non-monotone secure trend produces a
/// warning, not an error.
pub fn secrecy_rate_sweep(
    template: &Scenario,
    power_values_dbm: &[f64],
    noise_floor_dbm: f64,
    seed: u64,
    config_hash: &str,
) -> Result<ExperimentResult> {
    if power_values_dbm.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::validation("power values must be sorted ascending"));
    }
    let mut points = Vec::with_capacity(power_values_dbm.len());
    for &p_dbm in power_values_dbm {
        let started = std::time::Instant::now();
        let mut sc = template.clone();
        sc.power_budget = 10f64.powf((p_dbm - noise_floor_dbm) / 10.0);
        let (secure, status) = match crate::robust::solve_robust_design(&sc, seed, Some(0)) {
            Ok((design, _)) => (Some(design), "optimal".to_string()),
            Err(Error::Infeasible(rep)) => (None, format!("infeasible: {rep}")),
            Err(e) => return Err(e),
        };
        let baseline = match solve_baseline_design(&sc) {
            Ok(d) => Some(d),
            Err(Error::Infeasible(_)) => None,
            Err(e) => return Err(e),
        };
        let metrics = |d: &Option<BeamformerDesign>| -> AchievedMetrics {
            match d {
                Some(d) => d.achieved.clone(),
                None => AchievedMetrics {
                    user_sinrs: vec![0.0; template.users.len()],
                    eve_sinr: 0.0,
                    eve_sinr_per_stream: vec![0.0; template.users.len()],
                    secrecy_rate: 0.0,
                    sensing_metric: 0.0,
                    total_power: 0.0,
                },
            }
        };
        let sm = metrics(&secure);
        let bm = metrics(&baseline);
        points.push(SweepPoint {
            sweep_value: p_dbm,
            secrecy_rate: sm.secrecy_rate,
            baseline_secrecy_rate: bm.secrecy_rate,
            user_sinrs: sm.user_sinrs,
            eve_sinr: sm.eve_sinr,
            sensing_metric: sm.sensing_metric,
            solver_status: status,
            wall_time: started.elapsed().as_secs_f64(),
        });
    }
    let mut warnings = Vec::new();
    for w in points.windows(2) {
        if w[1].secrecy_rate < w[0].secrecy_rate - 1e-9 {
            warnings.push(format!(
                "secrecy rate dips from {} at {} dBm to {} at {} dBm",
                w[0].secrecy_rate, w[0].sweep_value, w[1].secrecy_rate, w[1].sweep_value
            ));
        }
    }
    Ok(ExperimentResult {
        sweep_variable: "power_dbm".into(),
        values: power_values_dbm.to_vec(),
        points,
        seed,
        config_hash: config_hash.to_string(),
        warnings,
    })
}

/// Beampattern table of a solved design on a display grid.
#[derive(Debug, Clone, Serialize)]
pub struct BeampatternTable {
    pub angles_deg: Vec<f64>,
    /// Peak-normalized pattern in dB (peak at 0 dB).
    pub power_db: Vec<f64>,
    pub power_linear: Vec<f64>,
    pub peak_linear: f64,
}

impl BeampatternTable {
    /// Width (in degrees) of the region within 3 dB of the peak.
    pub fn width_3db_deg(&self) -> f64 {
        let step = if self.angles_deg.len() > 1 {
            self.angles_deg[1] - self.angles_deg[0]
        } else {
            1.0
        };
        self.power_db.iter().filter(|&&p| p >= -3.0).count() as f64 * step
    }
}

/// Exports the total-covariance beampattern of a design.
pub fn beampattern_export(
    design: &BeamformerDesign,
    geometry: &crate::array::ArrayGeometry,
    grid: &[f64],
) -> Result<BeampatternTable> {
    let n = geometry.num_elements;
    let mut r_total = crate::linalg::HermitianMatrix::zeros(n, n);
    for r in &design.covariances {
        r_total += r;
    }
    let linear = crate::array::beampattern(geometry, &r_total, grid)?;
    let peak = linear.iter().copied().fold(0.0_f64, f64::max).max(1e-300);
    let power_db = linear.iter().map(|&p| 10.0 * (p / peak).log10()).collect();
    Ok(BeampatternTable {
        angles_deg: grid.iter().map(|a| a.to_degrees()).collect(),
        power_db,
        power_linear: linear,
        peak_linear: peak,
    })
}

/// CSV form of a beampattern table (angle_deg, power_db, power_linear).
pub fn beampattern_csv(table: &BeampatternTable, comment: &str) -> CsvTable {
    let mut csv = CsvTable::new(comment, &["angle_deg", "power_db", "power_linear"]);
    for i in 0..table.angles_deg.len() {
        csv.push_row(vec![
            format!("{:.4}", table.angles_deg[i]),
            fmt_f64(table.power_db[i]),
            fmt_f64(table.power_linear[i]),
        ]);
    }
    csv
}

/// CSV form of a sweep result.
pub fn sweep_csv(result: &ExperimentResult, comment: &str) -> CsvTable {
    let mut csv = CsvTable::new(
        comment,
        &[
            "power_dbm",
            "secrecy_rate",
            "baseline_secrecy_rate",
            "eve_sinr",
            "sensing_metric",
            "solver_status",
        ],
    );
    for p in &result.points {
        csv.push_row(vec![
            format!("{}", p.sweep_value),
            fmt_f64(p.secrecy_rate),
            fmt_f64(p.baseline_secrecy_rate),
            fmt_f64(p.eve_sinr),
            fmt_f64(p.sensing_metric),
            p.solver_status.clone(),
        ]);
    }
    csv
}

/// SVG plot of a sweep result.
pub fn sweep_svg(result: &ExperimentResult) -> SvgPlot {
    let mut plot = SvgPlot::new(
        "secrecy rate vs transmit power",
        "power (dBm)",
        "secrecy rate (bits/s/Hz)",
    );
    plot.add_series(
        "secure design",
        result
            .points
            .iter()
            .map(|p| (p.sweep_value, p.secrecy_rate))
            .collect(),
    );
    plot.add_series(
        "no-cap baseline",
        result
            .points
            .iter()
            .map(|p| (p.sweep_value, p.baseline_secrecy_rate))
            .collect(),
    );
    plot
}

/// SVG plot of one or two beampatterns.
pub fn beampattern_svg(tables: &[(&str, &BeampatternTable)]) -> SvgPlot {
    let mut plot = SvgPlot::new("transmit beampattern", "angle (deg)", "power (dB)");
    for (label, t) in tables {
        plot.add_series(
            label,
            t.angles_deg
                .iter()
                .zip(&t.power_db)
                .map(|(&a, &p)| (a, p.max(-60.0)))
                .collect(),
        );
    }
    plot
}

/// CSV form of an error-rate report.
pub fn ser_csv(report: &SerReport, comment: &str) -> CsvTable {
    let mut csv = CsvTable::new(
        comment,
        &[
            "receiver",
            "snr_linear",
            "errors",
            "trials",
            "ser",
            "wilson_low",
            "wilson_high",
        ],
    );
    for (rx, pts) in report.points.iter().enumerate() {
        let name = if rx == report.points.len() - 1 {
            "eve".to_string()
        } else {
            format!("user{rx}")
        };
        for p in pts {
            csv.push_row(vec![
                name.clone(),
                fmt_f64(p.snr),
                p.errors.to_string(),
                p.trials.to_string(),
                fmt_f64(p.ser),
                fmt_f64(p.wilson_low),
                fmt_f64(p.wilson_high),
            ]);
        }
    }
    csv
}

/// CSV of a channel-error audit (draw_index, per-user SINRs, violated flag).
pub fn audit_csv(report: &crate::robust::CsiAuditReport, comment: &str) -> CsvTable {
    let k = report
        .rows
        .first()
        .map(|r| r.realized_sinrs.len())
        .unwrap_or(0);
    let mut cols: Vec<String> = vec!["draw_index".into()];
    for i in 0..k {
        cols.push(format!("realized_sinr_{}", i + 1));
    }
    cols.push("violated_flag".into());
    let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let mut csv = CsvTable::new(comment, &col_refs);
    for row in &report.rows {
        let mut cells = vec![row.draw_index.to_string()];
        for s in &row.realized_sinrs {
            cells.push(fmt_f64(*s));
        }
        cells.push((row.violated as u8).to_string());
        csv.push_row(cells);
    }
    csv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precoding::{DiPolicy, SlotMode, SlotPrecoder};
    use num_complex::Complex64;

    #[test]
    fn wilson_basics() {
        let (lo, hi) = wilson_interval(0, 100);
        assert!(lo.abs() < 1e-12);
        assert!(hi > 0.0 && hi < 0.06);
        let (lo2, hi2) = wilson_interval(50, 100);
        assert!(lo2 < 0.5 && hi2 > 0.5);
        // Doubling trials roughly halves the width.
        let w1 = {
            let (a, b) = wilson_interval(100, 1000);
            b - a
        };
        let w2 = {
            let (a, b) = wilson_interval(200, 2000);
            b - a
        };
        assert!((w2 / w1 - 1.0 / 2f64.sqrt()).abs() < 0.1, "{w2} vs {w1}");
    }

    /// Gaussian-tail oracle for the noise pipeline: BPSK matched filter at
    /// SNR gamma has error probability Q(sqrt(2 gamma)).
    #[test]
    fn bpsk_matched_filter_matches_q_function() {
        let n = 1;
        let channels = vec![ComplexVector::from_element(n, Complex64::new(1.0, 0.0))];
        let eve = ComplexVector::from_element(n, Complex64::new(0.1, 0.0));
        let w = vec![ComplexVector::from_element(n, Complex64::new(1.0, 0.0))];
        let cons = PskConstellation::new(2).unwrap();
        let snrs = [1.0, 10f64.powf(0.4), 10f64.powf(0.8)]; // 0, 4, 8 dB
        let trials = 100_000;
        let report = monte_carlo_ser(
            &Transmitter::Beamformer {
                beamformers: &w,
                constellation: cons,
            },
            &channels,
            &eve,
            &snrs,
            trials,
            9,
            0,
        )
        .unwrap();
        for (i, &snr) in snrs.iter().enumerate() {
            let p = &report.points[0][i];
            let theory = q_function((2.0 * snr).sqrt());
            let half = (p.wilson_high - p.wilson_low) / 2.0;
            assert!(
                (p.ser - theory).abs() <= 3.0 * half.max(1e-6),
                "snr {snr}: ser {} theory {theory} half {half}",
                p.ser
            );
        }
    }

    fn q_function(x: f64) -> f64 {
        0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
    }

    #[test]
    fn noiseless_frame_ser_zero_for_users_one_for_eve() {
        let geo = crate::array::ArrayGeometry::half_wavelength(6).unwrap();
        let h1 = crate::array::random_user_channel(&geo, 5, crate::array::FadingModel::Rayleigh)
            .unwrap();
        let h2 = crate::array::random_user_channel(&geo, 6, crate::array::FadingModel::Rayleigh)
            .unwrap();
        let eve = crate::array::los_channel(&geo, 0.4, Complex64::new(1.0, 0.0)).unwrap();
        let p = SlotPrecoder {
            channels: vec![h1.clone(), h2.clone()],
            eve_channel: eve.clone(),
            constellation: PskConstellation::new(4).unwrap(),
            snr_targets: vec![10.0, 10.0],
            noise_power: 1.0,
            designated_stream: 0,
            di_margin: 0.3,
            di_policy: DiPolicy::Designated,
        };
        let frame = PskFrame::random(p.constellation, 2, 200, 11);
        let slots = p.solve_frame(&frame, SlotMode::MinPower).unwrap();
        assert!(slots.iter().all(|s| s.feasible));
        let report = monte_carlo_ser(
            &Transmitter::Frame {
                frame: &frame,
                slots: &slots,
            },
            &[h1, h2],
            &eve,
            &[],
            200,
            3,
            0,
        )
        .unwrap();
        assert_eq!(report.points[0][0].errors, 0);
        assert_eq!(report.points[1][0].errors, 0);
        assert_eq!(report.points[2][0].errors, 200);
    }

    #[test]
    fn ser_is_reproducible_across_parallel_runs() {
        let channels = vec![ComplexVector::from_element(2, Complex64::new(1.0, 0.0))];
        let eve = ComplexVector::from_element(2, Complex64::new(0.3, 0.1));
        let w = vec![ComplexVector::from_element(2, Complex64::new(0.7, 0.0))];
        let cons = PskConstellation::new(4).unwrap();
        let run = || {
            monte_carlo_ser(
                &Transmitter::Beamformer {
                    beamformers: &w,
                    constellation: cons,
                },
                &channels,
                &eve,
                &[2.0, 8.0],
                20_000,
                123,
                0,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        for (pa, pb) in a.points.iter().flatten().zip(b.points.iter().flatten()) {
            assert_eq!(pa.errors, pb.errors);
        }
    }

    #[test]
    fn beampattern_table_flat_for_isotropic() {
        use crate::secure::{AchievedMetrics, BeamformerDesign, SolveDiagnostics};
        let n = 6;
        let geo = crate::array::ArrayGeometry::half_wavelength(n).unwrap();
        let r = crate::linalg::HermitianMatrix::identity(n, n)
            .map(|e| e * Complex64::new(10.0 / n as f64, 0.0));
        let design = BeamformerDesign {
            covariances: vec![r],
            beamformers: None,
            eve_sinr_bound: 0.0,
            achieved: AchievedMetrics {
                user_sinrs: vec![],
                eve_sinr: 0.0,
                eve_sinr_per_stream: vec![],
                secrecy_rate: 0.0,
                sensing_metric: 0.0,
                total_power: 10.0,
            },
            flags: vec![],
            diagnostics: SolveDiagnostics::default(),
        };
        let grid = crate::array::angle_grid(
            -std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
            1.0_f64.to_radians(),
        );
        assert_eq!(grid.len(), 181);
        let table = beampattern_export(&design, &geo, &grid).unwrap();
        assert_eq!(table.angles_deg.len(), 181);
        let max = table.power_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = table.power_db.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max <= 1e-9 && min >= -1e-9, "flat pattern expected");
    }

    #[test]
    fn ser_estimates_tighten_with_more_trials() {
        let channels = vec![ComplexVector::from_element(1, Complex64::new(1.0, 0.0))];
        let eve = ComplexVector::from_element(1, Complex64::new(0.1, 0.0));
        let w = vec![ComplexVector::from_element(1, Complex64::new(1.0, 0.0))];
        let cons = PskConstellation::new(2).unwrap();
        let width = |trials: usize| {
            let r = monte_carlo_ser(
                &Transmitter::Beamformer {
                    beamformers: &w,
                    constellation: cons,
                },
                &channels,
                &eve,
                &[1.0],
                trials,
                7,
                0,
            )
            .unwrap();
            let p = &r.points[0][0];
            p.wilson_high - p.wilson_low
        };
        let w1 = width(10_000);
        let w2 = width(20_000);
        let expect = w1 / 2f64.sqrt();
        assert!((w2 - expect).abs() / expect < 0.10, "{w2} vs {expect}");
    }
}
