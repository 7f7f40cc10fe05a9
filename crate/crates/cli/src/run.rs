//! Workflow dispatch: parse config, solve, write artifacts.

use std::path::{Path, PathBuf};

use isac_core::array::angle_grid;
use isac_core::config::{config_hash, parse_config_file, ScenarioConfig};
use isac_core::error::{Error, Result};
use isac_core::eval;
use isac_core::precoding::{PskFrame, SlotMode, SlotPrecoder};
use isac_core::robust::solve_robust_design;
use isac_core::secure::{solve_secure_design, BeamformerDesign};

/// Display grid: one-degree steps across the visible region.
fn display_grid() -> Vec<f64> {
    angle_grid(
        -std::f64::consts::FRAC_PI_2,
        std::f64::consts::FRAC_PI_2,
        1.0_f64.to_radians(),
    )
}

/// Parses the config, applies the seed override and thread cap, runs `body`.
pub fn with_setup<F>(config: &Path, threads: Option<usize>, body: F) -> Result<()>
where
    F: FnOnce(&ScenarioConfig) -> Result<()>,
{
    if let Some(n) = threads {
        // Ignore the error if a global pool already exists (tests).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    let mut cfg = parse_config_file(config)?;
    if let Ok(seed) = std::env::var("ISAC_LAB_SEED") {
        cfg.run.seed = seed.parse().map_err(|_| {
            Error::Validation(format!("ISAC_LAB_SEED must be an integer, got `{seed}`"))
        })?;
    }
    body(&cfg)
}

fn ensure_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn provenance(cfg: &ScenarioConfig) -> String {
    format!("config_hash={} seed={}", config_hash(cfg), cfg.run.seed)
}

fn write_design_record(
    cfg: &ScenarioConfig,
    design: &BeamformerDesign,
    extra: Option<serde_json::Value>,
    path: &PathBuf,
) -> Result<()> {
    let mut record = serde_json::json!({
        "config_hash": config_hash(cfg),
        "seed": cfg.run.seed,
        "design": design,
    });
    if let Some(extra) = extra {
        record["robust_report"] = extra;
    }
    let text = serde_json::to_string_pretty(&record)
        .map_err(|e| Error::Validation(format!("serialization failed: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn print_design_summary(design: &BeamformerDesign) {
    let a = &design.achieved;
    println!("eavesdropping level (relaxation bound): {:.6e}", design.eve_sinr_bound);
    println!(
        "achieved eavesdropper SINR: {:.6e} | secrecy rate: {:.4} bits/s/Hz",
        a.eve_sinr, a.secrecy_rate
    );
    let sinrs: Vec<String> = a.user_sinrs.iter().map(|s| format!("{s:.4e}")).collect();
    println!("achieved user SINRs: [{}]", sinrs.join(", "));
    println!(
        "total power: {:.4e} | sensing metric: {:.4e} | flags: {:?}",
        a.total_power, a.sensing_metric, design.flags
    );
}

pub fn beamform(cfg: &ScenarioConfig, out: &Path) -> Result<()> {
    ensure_out(out)?;
    let design = solve_secure_design(&cfg.scenario)?;
    write_design_record(cfg, &design, None, &out.join("design.json"))?;
    let grid = display_grid();
    let table = eval::beampattern_export(&design, &cfg.scenario.geometry, &grid)?;
    eval::beampattern_csv(&table, &provenance(cfg)).write(&out.join("beampattern.csv"))?;
    eval::beampattern_svg(&[("secure design", &table)]).write(&out.join("beampattern.svg"))?;
    print_design_summary(&design);
    println!("artifacts written to {}", out.display());
    Ok(())
}

pub fn robust(cfg: &ScenarioConfig, out: &Path, audit_draws: Option<usize>) -> Result<()> {
    ensure_out(out)?;
    let (design, report) = solve_robust_design(&cfg.scenario, cfg.run.seed, audit_draws)?;
    let report_json = serde_json::to_value(&report)
        .map_err(|e| Error::Validation(format!("serialization failed: {e}")))?;
    write_design_record(cfg, &design, Some(report_json), &out.join("design.json"))?;
    let grid = display_grid();
    let table = eval::beampattern_export(&design, &cfg.scenario.geometry, &grid)?;
    eval::beampattern_csv(&table, &provenance(cfg)).write(&out.join("beampattern.csv"))?;
    eval::beampattern_svg(&[("robust design", &table)]).write(&out.join("beampattern.svg"))?;
    if let Some(audit) = &report.csi_audit {
        eval::audit_csv(audit, &provenance(cfg)).write(&out.join("audit.csv"))?;
        println!(
            "channel-error audit: {} draws, {} violations (fraction {:.4})",
            audit.draws, audit.violations, audit.violation_fraction
        );
    }
    print_design_summary(&design);
    println!(
        "eavesdropping SINR over interval: max {:.4e}, sum {:.4e} across {} angles",
        report.eve_sinr_max,
        report.eve_sinr_sum,
        report.angles.len()
    );
    println!("artifacts written to {}", out.display());
    Ok(())
}

pub fn ci(cfg: &ScenarioConfig, out: &Path, frame_file: Option<&Path>) -> Result<()> {
    ensure_out(out)?;
    let precoder = SlotPrecoder::from_scenario(&cfg.scenario)?;
    let num_streams = cfg.scenario.users.len();
    let frame = match frame_file {
        Some(path) => read_frame_csv(path, precoder.constellation, num_streams)?,
        None => PskFrame::random(
            precoder.constellation,
            num_streams,
            cfg.run.trials.max(1),
            cfg.run.seed,
        ),
    };
    let slots = precoder.solve_frame(&frame, SlotMode::MinPower)?;
    let feasible = slots.iter().filter(|s| s.feasible).count();

    let mut cols: Vec<String> = vec!["slot".into(), "power".into()];
    for k in 0..num_streams {
        cols.push(format!("lu_margin_{}", k + 1));
    }
    cols.push("eve_margin".into());
    cols.push("feasible_flag".into());
    let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let mut csv = isac_core::artifacts::CsvTable::new(provenance(cfg), &col_refs);
    for (t, slot) in slots.iter().enumerate() {
        let mut row = vec![t.to_string(), isac_core::artifacts::fmt_f64(slot.power)];
        for m in &slot.lu_margins {
            row.push(isac_core::artifacts::fmt_f64(*m));
        }
        row.push(isac_core::artifacts::fmt_f64(slot.eve_margin));
        row.push((slot.feasible as u8).to_string());
        csv.push_row(row);
    }
    csv.write(&out.join("frame_out.csv"))?;

    println!(
        "{} slots precoded, {} feasible; mean power of feasible slots: {:.4e}",
        slots.len(),
        feasible,
        slots
            .iter()
            .filter(|s| s.feasible)
            .map(|s| s.power)
            .sum::<f64>()
            / feasible.max(1) as f64
    );
    println!("artifacts written to {}", out.display());
    Ok(())
}

pub fn sweep(cfg: &ScenarioConfig, out: &Path, powers_dbm: &str) -> Result<()> {
    ensure_out(out)?;
    let powers: Vec<f64> = powers_dbm
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Validation(format!("bad power value `{p}` in --powers-dbm")))
        })
        .collect::<Result<_>>()?;
    let hash = config_hash(cfg);
    let result = eval::secrecy_rate_sweep(
        &cfg.scenario,
        &powers,
        cfg.noise_floor_dbm,
        cfg.run.seed,
        &hash,
    )?;
    eval::sweep_csv(&result, &provenance(cfg)).write(&out.join("sweep.csv"))?;
    eval::sweep_svg(&result).write(&out.join("sweep.svg"))?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    for p in &result.points {
        println!(
            "P = {:>6.2} dBm: secure secrecy {:.4}, baseline {:.4} ({})",
            p.sweep_value, p.secrecy_rate, p.baseline_secrecy_rate, p.solver_status
        );
    }
    println!("artifacts written to {}", out.display());
    Ok(())
}

/// Reads a frame CSV with columns `slot,stream,symbol_index` (header line
/// optional).
fn read_frame_csv(
    path: &Path,
    constellation: isac_core::precoding::PskConstellation,
    num_streams: usize,
) -> Result<PskFrame> {
    let text = std::fs::read_to_string(path)?;
    let mut entries: Vec<(usize, usize, usize)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if i == 0 && line.starts_with("slot") {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(|c| c.trim()).collect();
        if cells.len() != 3 {
            return Err(Error::Validation(format!(
                "frame file line {}: expected slot,stream,symbol_index",
                i + 1
            )));
        }
        let parse = |v: &str, what: &str| -> Result<usize> {
            v.parse().map_err(|_| {
                Error::Validation(format!("frame file line {}: bad {what} `{v}`", i + 1))
            })
        };
        entries.push((
            parse(cells[0], "slot")?,
            parse(cells[1], "stream")?,
            parse(cells[2], "symbol_index")?,
        ));
    }
    let num_slots = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    if num_slots == 0 {
        return Err(Error::Validation("frame file has no entries".into()));
    }
    let mut symbols = vec![vec![usize::MAX; num_streams]; num_slots];
    for (slot, stream, sym) in entries {
        if stream >= num_streams {
            return Err(Error::Validation(format!(
                "frame stream index {stream} out of range (K = {num_streams})"
            )));
        }
        symbols[slot][stream] = sym;
    }
    for (t, slot) in symbols.iter().enumerate() {
        if slot.iter().any(|&s| s == usize::MAX) {
            return Err(Error::Validation(format!(
                "frame slot {t} does not cover every stream"
            )));
        }
    }
    let frame = PskFrame {
        symbols,
        constellation,
    };
    frame.validate(num_streams)?;
    Ok(frame)
}
