//! Strict scenario configuration files.
//!
//! Plain-text sectioned format with unit-suffixed keys (`_db`, `_dbm`,
//! `_deg`). Unknown sections or keys are rejected; every parse error carries
//! a line number. Power quantities are converted to linear scale at this
//! boundary using the configurable noise floor (default -94 dBm maps to the
//! unit noise power).
//!
//! ```text
//! [array]
//! n_elements = 8
//! spacing_wavelengths = 0.5
//!
//! [channels]
//! user = rayleigh seed=1
//! user = rician kappa=10 angle_deg=25 seed=2
//! target_angle_deg = 0.0
//! target_gain_db = 0.0
//! noise_floor_dbm = -94.0
//!
//! [power]
//! budget_dbm = 20.0
//!
//! [comm]
//! sinr_threshold_db = 40.0
//! modulation_order = 4
//!
//! [sensing]
//! floor_fraction = 0.5
//! sidelobe_cap_fraction = 0.1
//! grid_step_deg = 1.0
//!
//! [uncertainty]
//! interval_deg = -5.0 5.0
//! csi_error = gaussian variance=0.05 outage=0.05
//! csi_mode = audit
//!
//! [run]
//! seed = 7
//! trials = 10000
//! output_dir = out
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::array::{AngleInterval, ArrayGeometry, ClutterSource};
use crate::error::{Error, Result};
use crate::robust::CsiErrorModel;
use crate::secure::{BeampatternSpec, CsiMode, Scenario, UncertaintySpec, UserChannelSpec};

/// Default mapping of dBm quantities onto the unit noise power.
pub const DEFAULT_NOISE_FLOOR_DBM: f64 = -94.0;

/// Execution parameters from the `[run]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: usize,
    pub output_dir: String,
}

/// Parsed configuration: the scenario plus run parameters and the raw dBm
/// bookkeeping needed to serialize it back canonically.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub run: RunConfig,
    pub noise_floor_dbm: f64,
    pub budget_dbm: f64,
}

/// Line-addressed configuration error.
#[derive(Debug, Clone)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line > 0 {
            write!(f, "config error at line {}: {}", self.line, self.message)
        } else {
            write!(f, "config error: {}", self.message)
        }
    }
}

fn cerr<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Config(ConfigError {
        line,
        message: message.into(),
    }))
}

fn parse_float(line: usize, key: &str, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| {
        Error::Config(ConfigError {
            line,
            message: format!("key `{key}` expects a plain number, got `{value}`"),
        })
    })
}

fn parse_int(line: usize, key: &str, value: &str) -> Result<u64> {
    value.parse::<u64>().map_err(|_| {
        Error::Config(ConfigError {
            line,
            message: format!("key `{key}` expects a nonnegative integer, got `{value}`"),
        })
    })
}

/// `key=value` attributes of structured values like `rician kappa=10 seed=2`.
fn parse_attrs(line: usize, parts: &[&str], allowed: &[&str]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for part in parts {
        let (k, v) = match part.split_once('=') {
            Some(kv) => kv,
            None => return cerr(line, format!("expected key=value, got `{part}`")),
        };
        if !allowed.contains(&k) {
            return cerr(line, format!("unknown attribute `{k}`"));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn attr<'a>(attrs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    attrs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

struct RawItem {
    line: usize,
    key: String,
    value: String,
}

/// Parses a config file into a scenario.
pub fn parse_config_file(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Parses config text into a scenario.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    const SECTIONS: [&str; 7] = [
        "array",
        "channels",
        "power",
        "comm",
        "sensing",
        "uncertainty",
        "run",
    ];
    let mut items: Vec<(String, RawItem)> = Vec::new();
    let mut current: Option<String> = None;
    let mut seen_sections = BTreeSet::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = match name.strip_suffix(']') {
                Some(n) => n.trim(),
                None => return cerr(line_no, "unterminated section header"),
            };
            if !SECTIONS.contains(&name) {
                return cerr(line_no, format!("unknown section `[{name}]`"));
            }
            if !seen_sections.insert(name.to_string()) {
                return cerr(line_no, format!("duplicate section `[{name}]`"));
            }
            current = Some(name.to_string());
            continue;
        }
        let section = match &current {
            Some(s) => s.clone(),
            None => return cerr(line_no, "key before any section header"),
        };
        let (key, value) = match line.split_once('=') {
            Some((k, v)) => (k.trim().to_string(), v.trim().to_string()),
            None => return cerr(line_no, format!("expected `key = value`, got `{line}`")),
        };
        if value.is_empty() {
            return cerr(line_no, format!("key `{key}` has an empty value"));
        }
        items.push((
            section,
            RawItem {
                line: line_no,
                key,
                value,
            },
        ));
    }

    for required in ["array", "channels", "power", "comm", "sensing", "run"] {
        if !seen_sections.contains(required) {
            return cerr(0, format!("missing required section `[{required}]`"));
        }
    }

    let section_items = |name: &str| -> Vec<&RawItem> {
        items
            .iter()
            .filter(|(s, _)| s == name)
            .map(|(_, it)| it)
            .collect()
    };
    let reject_unknown = |name: &str, allowed: &[&str], multi: &[&str]| -> Result<()> {
        let mut seen = BTreeSet::new();
        for it in section_items(name) {
            if !allowed.contains(&it.key.as_str()) {
                return cerr(
                    it.line,
                    format!("unknown key `{}` in section `[{name}]`", it.key),
                );
            }
            if !multi.contains(&it.key.as_str()) && !seen.insert(it.key.clone()) {
                return cerr(
                    it.line,
                    format!("duplicate key `{}` in section `[{name}]`", it.key),
                );
            }
        }
        Ok(())
    };
    let get = |name: &str, key: &str| -> Option<&RawItem> {
        section_items(name).into_iter().find(|it| it.key == key)
    };
    let require = |name: &str, key: &str| -> Result<&RawItem> {
        get(name, key).ok_or_else(|| {
            Error::Config(ConfigError {
                line: 0,
                message: format!("missing key `{key}` in section `[{name}]`"),
            })
        })
    };

    // [array]
    reject_unknown("array", &["n_elements", "spacing_wavelengths"], &[])?;
    let it = require("array", "n_elements")?;
    let n_elements = parse_int(it.line, &it.key, &it.value)? as usize;
    let spacing = match get("array", "spacing_wavelengths") {
        Some(it) => parse_float(it.line, &it.key, &it.value)?,
        None => 0.5,
    };
    let geometry = ArrayGeometry::new(n_elements, spacing)?;

    // [channels]
    reject_unknown(
        "channels",
        &[
            "user",
            "clutter",
            "target_angle_deg",
            "target_gain_db",
            "noise_floor_dbm",
            "eve_noise_offset_db",
            "radar_noise_offset_db",
        ],
        &["user", "clutter"],
    )?;
    let mut users = Vec::new();
    for it in section_items("channels") {
        if it.key != "user" {
            continue;
        }
        let parts: Vec<&str> = it.value.split_whitespace().collect();
        match parts.first().copied() {
            Some("rayleigh") => {
                let attrs = parse_attrs(it.line, &parts[1..], &["seed"])?;
                let seed = match attr(&attrs, "seed") {
                    Some(v) => parse_int(it.line, "seed", v)?,
                    None => return cerr(it.line, "rayleigh user needs a seed"),
                };
                users.push(UserChannelSpec::Rayleigh { seed });
            }
            Some("rician") => {
                let attrs = parse_attrs(it.line, &parts[1..], &["kappa", "angle_deg", "seed"])?;
                let kappa = match attr(&attrs, "kappa") {
                    Some(v) => parse_float(it.line, "kappa", v)?,
                    None => return cerr(it.line, "rician user needs kappa"),
                };
                let angle = match attr(&attrs, "angle_deg") {
                    Some(v) => parse_float(it.line, "angle_deg", v)?.to_radians(),
                    None => return cerr(it.line, "rician user needs angle_deg"),
                };
                let seed = match attr(&attrs, "seed") {
                    Some(v) => parse_int(it.line, "seed", v)?,
                    None => return cerr(it.line, "rician user needs a seed"),
                };
                users.push(UserChannelSpec::Rician { kappa, angle, seed });
            }
            other => {
                return cerr(
                    it.line,
                    format!("unknown user model `{}`", other.unwrap_or("")),
                )
            }
        }
    }
    if users.is_empty() {
        return cerr(0, "section `[channels]` defines no users");
    }
    let mut clutter = Vec::new();
    for it in section_items("channels") {
        if it.key != "clutter" {
            continue;
        }
        let parts: Vec<&str> = it.value.split_whitespace().collect();
        let attrs = parse_attrs(it.line, &parts, &["angle_deg", "gain_db"])?;
        let angle = match attr(&attrs, "angle_deg") {
            Some(v) => parse_float(it.line, "angle_deg", v)?.to_radians(),
            None => return cerr(it.line, "clutter needs angle_deg"),
        };
        let gain_db = match attr(&attrs, "gain_db") {
            Some(v) => parse_float(it.line, "gain_db", v)?,
            None => return cerr(it.line, "clutter needs gain_db"),
        };
        clutter.push(ClutterSource {
            angle,
            gain: Complex64::new(10f64.powf(gain_db / 20.0), 0.0),
        });
    }
    let it = require("channels", "target_angle_deg")?;
    let target_angle = parse_float(it.line, &it.key, &it.value)?.to_radians();
    let it = require("channels", "target_gain_db")?;
    let target_gain_db = parse_float(it.line, &it.key, &it.value)?;
    let noise_floor_dbm = match get("channels", "noise_floor_dbm") {
        Some(it) => parse_float(it.line, &it.key, &it.value)?,
        None => DEFAULT_NOISE_FLOOR_DBM,
    };
    let eve_noise_offset_db = match get("channels", "eve_noise_offset_db") {
        Some(it) => parse_float(it.line, &it.key, &it.value)?,
        None => 0.0,
    };
    let radar_noise_offset_db = match get("channels", "radar_noise_offset_db") {
        Some(it) => parse_float(it.line, &it.key, &it.value)?,
        None => 0.0,
    };

    // [power]
    reject_unknown("power", &["budget_dbm"], &[])?;
    let it = require("power", "budget_dbm")?;
    let budget_dbm = parse_float(it.line, &it.key, &it.value)?;

    // [comm]
    reject_unknown(
        "comm",
        &["sinr_threshold_db", "modulation_order", "designated_stream", "protect_all_streams"],
        &[],
    )?;
    let it = require("comm", "sinr_threshold_db")?;
    let sinr_db = parse_float(it.line, &it.key, &it.value)?;
    let it = require("comm", "modulation_order")?;
    let modulation_order = parse_int(it.line, &it.key, &it.value)? as usize;
    let designated_stream = match get("comm", "designated_stream") {
        Some(it) => parse_int(it.line, &it.key, &it.value)? as usize,
        None => 0,
    };
    let protect_all_streams = match get("comm", "protect_all_streams") {
        Some(it) => match it.value.as_str() {
            "true" => true,
            "false" => false,
            other => return cerr(it.line, format!("expected true/false, got `{other}`")),
        },
        None => true,
    };

    // [sensing]
    reject_unknown(
        "sensing",
        &["floor_fraction", "sidelobe_cap_fraction", "grid_step_deg"],
        &[],
    )?;
    let it = require("sensing", "floor_fraction")?;
    let floor_fraction = parse_float(it.line, &it.key, &it.value)?;
    let sidelobe_cap_fraction = match get("sensing", "sidelobe_cap_fraction") {
        Some(it) => Some(parse_float(it.line, &it.key, &it.value)?),
        None => None,
    };
    let grid_step = match get("sensing", "grid_step_deg") {
        Some(it) => parse_float(it.line, &it.key, &it.value)?.to_radians(),
        None => 0.25_f64.to_radians(),
    };

    // [uncertainty]
    reject_unknown(
        "uncertainty",
        &["interval_deg", "num_samples", "csi_error", "csi_mode"],
        &[],
    )?;
    let uncertainty = if seen_sections.contains("uncertainty") {
        let angle_interval = match get("uncertainty", "interval_deg") {
            Some(it) => {
                let parts: Vec<&str> = it.value.split_whitespace().collect();
                if parts.len() != 2 {
                    return cerr(it.line, "interval_deg expects two numbers: lo hi");
                }
                let lo = parse_float(it.line, &it.key, parts[0])?.to_radians();
                let hi = parse_float(it.line, &it.key, parts[1])?.to_radians();
                Some(AngleInterval::new(lo, hi)?)
            }
            None => None,
        };
        let num_samples = match get("uncertainty", "num_samples") {
            Some(it) => Some(parse_int(it.line, &it.key, &it.value)? as usize),
            None => None,
        };
        let csi_error = match get("uncertainty", "csi_error") {
            Some(it) => {
                let parts: Vec<&str> = it.value.split_whitespace().collect();
                match parts.first().copied() {
                    Some("bounded") => {
                        let attrs = parse_attrs(it.line, &parts[1..], &["radius"])?;
                        let radius = match attr(&attrs, "radius") {
                            Some(v) => parse_float(it.line, "radius", v)?,
                            None => return cerr(it.line, "bounded csi_error needs radius"),
                        };
                        Some(CsiErrorModel::Bounded { radius })
                    }
                    Some("gaussian") => {
                        let attrs =
                            parse_attrs(it.line, &parts[1..], &["variance", "outage"])?;
                        let variance = match attr(&attrs, "variance") {
                            Some(v) => parse_float(it.line, "variance", v)?,
                            None => return cerr(it.line, "gaussian csi_error needs variance"),
                        };
                        let outage = match attr(&attrs, "outage") {
                            Some(v) => parse_float(it.line, "outage", v)?,
                            None => 0.05,
                        };
                        Some(CsiErrorModel::Gaussian { variance, outage })
                    }
                    other => {
                        return cerr(
                            it.line,
                            format!("unknown csi_error kind `{}`", other.unwrap_or("")),
                        )
                    }
                }
            }
            None => None,
        };
        let csi_mode = match get("uncertainty", "csi_mode") {
            Some(it) => match it.value.as_str() {
                "enforce" => CsiMode::Enforce,
                "audit" => CsiMode::Audit,
                other => return cerr(it.line, format!("unknown csi_mode `{other}`")),
            },
            None => CsiMode::Enforce,
        };
        Some(UncertaintySpec {
            angle_interval,
            num_samples,
            csi_error,
            csi_mode,
        })
    } else {
        None
    };

    // [run]
    reject_unknown("run", &["seed", "trials", "output_dir"], &[])?;
    let it = require("run", "seed")?;
    let seed = parse_int(it.line, &it.key, &it.value)?;
    let it = require("run", "trials")?;
    let trials = parse_int(it.line, &it.key, &it.value)? as usize;
    let output_dir = match get("run", "output_dir") {
        Some(it) => it.value.clone(),
        None => "out".to_string(),
    };

    let power_budget = 10f64.powf((budget_dbm - noise_floor_dbm) / 10.0);
    let scenario = Scenario {
        geometry,
        users,
        target_angle,
        target_gain: Complex64::new(10f64.powf(target_gain_db / 20.0), 0.0),
        clutter,
        noise_user: 1.0,
        noise_eve: 10f64.powf(eve_noise_offset_db / 10.0),
        noise_radar: 10f64.powf(radar_noise_offset_db / 10.0),
        power_budget,
        user_sinr_threshold: 10f64.powf(sinr_db / 10.0),
        beampattern: BeampatternSpec {
            floor_fraction,
            sidelobe_cap_fraction,
            grid_step,
        },
        uncertainty,
        designated_stream,
        protect_all_streams,
        modulation_order,
    };
    scenario.validate()?;
    Ok(ScenarioConfig {
        scenario,
        run: RunConfig {
            seed,
            trials,
            output_dir,
        },
        noise_floor_dbm,
        budget_dbm,
    })
}

/// Canonical serialization; `parse_config(serialize_config(c))` reproduces an
/// identical configuration (and therefore an identical [`config_hash`]).
pub fn serialize_config(config: &ScenarioConfig) -> String {
    let sc = &config.scenario;
    let mut out = String::new();
    let _ = writeln!(out, "[array]");
    let _ = writeln!(out, "n_elements = {}", sc.geometry.num_elements);
    let _ = writeln!(
        out,
        "spacing_wavelengths = {}",
        sc.geometry.spacing_wavelengths
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "[channels]");
    for user in &sc.users {
        match user {
            UserChannelSpec::Rayleigh { seed } => {
                let _ = writeln!(out, "user = rayleigh seed={seed}");
            }
            UserChannelSpec::Rician { kappa, angle, seed } => {
                let _ = writeln!(
                    out,
                    "user = rician kappa={kappa} angle_deg={} seed={seed}",
                    angle.to_degrees()
                );
            }
            UserChannelSpec::Explicit(_) => {
                // Not representable in config files; serialized configs only
                // come from parsed scenarios, which never carry this variant.
            }
        }
    }
    for c in &sc.clutter {
        let _ = writeln!(
            out,
            "clutter = angle_deg={} gain_db={}",
            c.angle.to_degrees(),
            20.0 * c.gain.norm().log10()
        );
    }
    let _ = writeln!(out, "target_angle_deg = {}", sc.target_angle.to_degrees());
    let _ = writeln!(
        out,
        "target_gain_db = {}",
        20.0 * sc.target_gain.norm().log10()
    );
    let _ = writeln!(out, "noise_floor_dbm = {}", config.noise_floor_dbm);
    let _ = writeln!(
        out,
        "eve_noise_offset_db = {}",
        10.0 * sc.noise_eve.log10()
    );
    let _ = writeln!(
        out,
        "radar_noise_offset_db = {}",
        10.0 * sc.noise_radar.log10()
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "[power]");
    let _ = writeln!(out, "budget_dbm = {}", config.budget_dbm);
    let _ = writeln!(out);
    let _ = writeln!(out, "[comm]");
    let _ = writeln!(
        out,
        "sinr_threshold_db = {}",
        10.0 * sc.user_sinr_threshold.log10()
    );
    let _ = writeln!(out, "modulation_order = {}", sc.modulation_order);
    let _ = writeln!(out, "designated_stream = {}", sc.designated_stream);
    let _ = writeln!(out, "protect_all_streams = {}", sc.protect_all_streams);
    let _ = writeln!(out);
    let _ = writeln!(out, "[sensing]");
    let _ = writeln!(out, "floor_fraction = {}", sc.beampattern.floor_fraction);
    if let Some(cap) = sc.beampattern.sidelobe_cap_fraction {
        let _ = writeln!(out, "sidelobe_cap_fraction = {cap}");
    }
    let _ = writeln!(
        out,
        "grid_step_deg = {}",
        sc.beampattern.grid_step.to_degrees()
    );
    if let Some(u) = &sc.uncertainty {
        let _ = writeln!(out);
        let _ = writeln!(out, "[uncertainty]");
        if let Some(iv) = &u.angle_interval {
            let _ = writeln!(
                out,
                "interval_deg = {} {}",
                iv.lower.to_degrees(),
                iv.upper.to_degrees()
            );
        }
        if let Some(l) = u.num_samples {
            let _ = writeln!(out, "num_samples = {l}");
        }
        match &u.csi_error {
            Some(CsiErrorModel::Bounded { radius }) => {
                let _ = writeln!(out, "csi_error = bounded radius={radius}");
            }
            Some(CsiErrorModel::Gaussian { variance, outage }) => {
                let _ = writeln!(out, "csi_error = gaussian variance={variance} outage={outage}");
            }
            None => {}
        }
        let mode = match u.csi_mode {
            CsiMode::Enforce => "enforce",
            CsiMode::Audit => "audit",
        };
        let _ = writeln!(out, "csi_mode = {mode}");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "[run]");
    let _ = writeln!(out, "seed = {}", config.run.seed);
    let _ = writeln!(out, "trials = {}", config.run.trials);
    let _ = writeln!(out, "output_dir = {}", config.run.output_dir);
    out
}

/// Reproducible hash of a configuration (first 16 hex digits of the SHA-256
/// of the canonical serialization).
pub fn config_hash(config: &ScenarioConfig) -> String {
    let canonical = serialize_config(config);
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}
