//! Run configuration: one TOML section per module, overridable per key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::decision::{BatteryPolicy, ScoringWeights};
use crate::grid::{build_manhattan_city_sized, CityGrid, ManhattanLayout, DEFAULT_CELL_SIZE_M};
use crate::maps::DEFAULT_MIN_SAMPLES;
use crate::radio::PropagationConfig;
use crate::traffic::{DayProfile, TrafficConfig};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "PARKED_RSU_OUT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid value for `{field}`: {msg}")]
    Invalid { field: String, msg: String },
    #[error("unknown parameter `{0}`")]
    UnknownKey(String),
    #[error("parameter `{0}` is ambiguous; qualify it with its section")]
    AmbiguousKey(String),
    #[error("parameter `{0}` is not numeric")]
    NotNumeric(String),
}

fn invalid(field: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub blocks_x: u32,
    pub blocks_y: u32,
    pub road_width_cells: u32,
    pub block_size_cells: u32,
    pub cell_size_m: f64,
    /// `x,y,flag` city file replacing the Manhattan layout.
    pub city_path: Option<PathBuf>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let m = ManhattanLayout::default();
        GridConfig {
            blocks_x: m.blocks_x,
            blocks_y: m.blocks_y,
            road_width_cells: m.road_width_cells,
            block_size_cells: m.block_size_cells,
            cell_size_m: DEFAULT_CELL_SIZE_M,
            city_path: None,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<CityGrid, ConfigError> {
        let grid = match &self.city_path {
            Some(path) => {
                let f = std::fs::File::open(path).map_err(|source| ConfigError::Read {
                    path: path.clone(),
                    source,
                })?;
                CityGrid::read_text(std::io::BufReader::new(f), self.cell_size_m)
            }
            None => build_manhattan_city_sized(
                ManhattanLayout {
                    blocks_x: self.blocks_x,
                    blocks_y: self.blocks_y,
                    road_width_cells: self.road_width_cells,
                    block_size_cells: self.block_size_cells,
                },
                self.cell_size_m,
            ),
        };
        grid.map_err(|e| invalid("grid", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapsConfig {
    pub min_samples: u32,
    pub noise_sd: f64,
    /// Beacons per second sent by each moving vehicle.
    pub cam_rate_hz: u32,
}

impl Default for MapsConfig {
    fn default() -> Self {
        MapsConfig {
            min_samples: DEFAULT_MIN_SAMPLES,
            noise_sd: 3.0,
            cam_rate_hz: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMode {
    /// Weighted-product decision over constrained solutions.
    #[default]
    Wpm,
    /// Every parked car takes the RSU role: unconstrained growth reference.
    AlwaysAssign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecisionConfig {
    pub mode: DecisionMode,
    pub w_sig: f64,
    pub w_sat: f64,
    pub w_cov: f64,
    pub w_bat: f64,
    pub tau_min_s: f64,
    pub tau_max_s: f64,
    /// Revoke RSUs that reach `tau_max_s`.
    pub enforce_tau_max: bool,
    /// Learning period before a parked car may decide.
    pub learn_s: f64,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        let w = ScoringWeights::default();
        let p = BatteryPolicy::default();
        DecisionConfig {
            mode: DecisionMode::Wpm,
            w_sig: w.w_sig,
            w_sat: w.w_sat,
            w_cov: w.w_cov,
            w_bat: w.w_bat,
            tau_min_s: p.tau_min_s,
            tau_max_s: p.tau_max_s,
            enforce_tau_max: false,
            learn_s: 60.0,
        }
    }
}

impl DecisionConfig {
    pub fn weights(&self) -> ScoringWeights {
        ScoringWeights::new(self.w_sig, self.w_sat, self.w_cov, self.w_bat)
    }

    pub fn battery(&self) -> BatteryPolicy {
        BatteryPolicy {
            tau_min_s: self.tau_min_s,
            tau_max_s: self.tau_max_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub duration_s: u64,
    pub seed: u64,
    /// Leading seconds dropped from steady-state statistics.
    pub discard_s: f64,
    /// Incremental metrics are checked against a full recount this often.
    pub verify_every: u64,
    /// Fault injection: scramble map responses that are never delivered.
    pub corrupt_undelivered: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration_s: 7200,
            seed: 1,
            discard_s: 1800.0,
            verify_every: 100,
            corrupt_undelivered: false,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    /// Parked cars placed for random assignment; defaults to one per usable cell.
    pub population: Option<u32>,
    pub samples: u64,
    pub bin_width: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            population: None,
            samples: 100_000,
            bin_width: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub radio: PropagationConfig,
    pub maps: MapsConfig,
    pub traffic: TrafficConfig,
    pub decision: DecisionConfig,
    pub sim: SimConfig,
    pub bounds: BoundsConfig,
}

impl RunConfig {
    /// Parses TOML text; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        Self::from_table(table, base_dir, &[])
    }

    /// Loads a config file and applies `key=value` overrides before validation.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_table(table, path.parent(), overrides)
    }

    pub fn from_table(
        mut table: toml::Table,
        base_dir: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        for (k, v) in overrides {
            set_key(&mut table, k, v)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.resolve_paths(base_dir)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies overrides to an already built config.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let table = match toml::Value::try_from(self) {
            Ok(toml::Value::Table(t)) => t,
            _ => return Err(ConfigError::Parse("config is not serializable".into())),
        };
        Self::from_table(table, None, overrides)
    }

    fn resolve_paths(&mut self, base: Option<&Path>) -> Result<(), ConfigError> {
        let join = |p: &mut Option<PathBuf>| {
            if let (Some(b), Some(path)) = (base, p.as_mut()) {
                if path.is_relative() {
                    *path = b.join(&*path);
                }
            }
        };
        join(&mut self.grid.city_path);
        join(&mut self.traffic.profile_path);
        join(&mut self.traffic.trace_path);
        if let Some(path) = self.traffic.profile_path.clone() {
            let f = std::fs::File::open(&path).map_err(|source| ConfigError::Read {
                path: path.clone(),
                source,
            })?;
            self.traffic.profile = DayProfile::read(std::io::BufReader::new(f))
                .map_err(|e| invalid("traffic.profile_path", e.to_string()))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if !(g.cell_size_m.is_finite() && g.cell_size_m > 0.0) {
            return Err(invalid("grid.cell_size_m", "must be positive"));
        }
        for (name, v) in [
            ("grid.blocks_x", g.blocks_x),
            ("grid.blocks_y", g.blocks_y),
            ("grid.road_width_cells", g.road_width_cells),
            ("grid.block_size_cells", g.block_size_cells),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be at least 1"));
            }
        }
        self.radio
            .validate()
            .map_err(|e| invalid("radio", e.to_string()))?;
        if !(self.maps.noise_sd.is_finite() && self.maps.noise_sd >= 0.0) {
            return Err(invalid("maps.noise_sd", "must be finite and non-negative"));
        }
        self.traffic
            .validate()
            .map_err(|e| invalid("traffic", e.to_string()))?;
        let d = &self.decision;
        for (name, w) in [
            ("decision.w_sig", d.w_sig),
            ("decision.w_sat", d.w_sat),
            ("decision.w_cov", d.w_cov),
            ("decision.w_bat", d.w_bat),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(invalid(
                    name,
                    format!("must be finite and non-negative, got {w}"),
                ));
            }
        }
        d.battery()
            .validate()
            .map_err(|e| invalid("decision.tau_min_s", e.to_string()))?;
        if !(d.learn_s.is_finite() && d.learn_s >= 0.0) {
            return Err(invalid(
                "decision.learn_s",
                "must be finite and non-negative",
            ));
        }
        if !(self.sim.discard_s.is_finite() && self.sim.discard_s >= 0.0) {
            return Err(invalid("sim.discard_s", "must be finite and non-negative"));
        }
        if !(self.bounds.bin_width.is_finite() && self.bounds.bin_width > 0.0) {
            return Err(invalid("bounds.bin_width", "must be positive"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Output directory: explicit setting, then the environment, then `out`.
    pub fn output_dir(&self) -> PathBuf {
        self.sim
            .output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn default_table() -> toml::Table {
    match toml::Value::try_from(RunConfig::default()) {
        Ok(toml::Value::Table(t)) => t,
        _ => unreachable!("default config is a table"),
    }
}

/// Maps `w_sat` or `decision.w_sat` to `(section, key)`.
pub fn resolve_key(name: &str) -> Result<(String, String), ConfigError> {
    let defaults = default_table();
    if let Some((section, key)) = name.split_once('.') {
        let known = defaults
            .get(section)
            .and_then(|s| s.as_table())
            .is_some_and(|t| t.contains_key(key) || known_optional(section, key));
        return if known {
            Ok((section.to_string(), key.to_string()))
        } else {
            Err(ConfigError::UnknownKey(name.to_string()))
        };
    }
    let hits: Vec<&String> = defaults
        .iter()
        .filter(|(section, v)| {
            v.as_table().is_some_and(|t| t.contains_key(name)) || known_optional(section, name)
        })
        .map(|(s, _)| s)
        .collect();
    match hits.as_slice() {
        [one] => Ok(((*one).clone(), name.to_string())),
        [] => Err(ConfigError::UnknownKey(name.to_string())),
        _ => Err(ConfigError::AmbiguousKey(name.to_string())),
    }
}

/// Keys whose default is absent and therefore missing from the default table.
fn known_optional(section: &str, key: &str) -> bool {
    matches!(
        (section, key),
        ("grid", "city_path")
            | ("traffic", "profile_path")
            | ("traffic", "trace_path")
            | ("sim", "output_dir")
            | ("bounds", "population")
    )
}

/// Resolves a sweep axis and checks that it names a numeric field.
pub fn numeric_axis(name: &str) -> Result<(String, String), ConfigError> {
    let (section, key) = resolve_key(name)?;
    let numeric = default_table()
        .get(&section)
        .and_then(|s| s.get(&key))
        .is_some_and(|v| v.is_integer() || v.is_float())
        || (section == "bounds" && key == "population");
    if numeric {
        Ok((section, key))
    } else {
        Err(ConfigError::NotNumeric(name.to_string()))
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    if let Ok(i) = raw.parse::<i64>() {
        toml::Value::Integer(i)
    } else if let Ok(f) = raw.parse::<f64>() {
        toml::Value::Float(f)
    } else if let Ok(b) = raw.parse::<bool>() {
        toml::Value::Boolean(b)
    } else {
        toml::Value::String(raw.to_string())
    }
}

fn set_key(table: &mut toml::Table, name: &str, raw: &str) -> Result<(), ConfigError> {
    let (section, key) = resolve_key(name)?;
    let entry = table
        .entry(section.clone())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let t = entry
        .as_table_mut()
        .ok_or_else(|| invalid(&section, "must be a table"))?;
    let mut value = parse_scalar(raw);
    // floats written without a fractional part still belong to float fields
    if let toml::Value::Integer(i) = value {
        let default_is_float = default_table()
            .get(&section)
            .and_then(|s| s.get(&key))
            .is_some_and(toml::Value::is_float);
        if default_is_float {
            value = toml::Value::Float(i as f64);
        }
    }
    t.insert(key, value);
    Ok(())
}

/// Splits `key=value`.
pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| ConfigError::Parse(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = RunConfig::from_toml_str("", None).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn sections_and_overrides() {
        let text = "[decision]\nw_sat = 0.4\n[sim]\nseed = 3\n";
        let table: toml::Table = text.parse().unwrap();
        let cfg = RunConfig::from_table(
            table,
            None,
            &[
                ("w_sat".into(), "0.1".into()),
                ("sim.seed".into(), "7".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.decision.w_sat, 0.1);
        assert_eq!(cfg.sim.seed, 7);
        let cfg = cfg
            .with_overrides(&[("range_multiplier".into(), "2".into())])
            .unwrap();
        assert_eq!(cfg.radio.range_multiplier, 2.0);
    }

    #[test]
    fn invalid_field_is_named() {
        let err = RunConfig::from_toml_str("[decision]\nw_sat = -1.0\n", None).unwrap_err();
        assert!(err.to_string().contains("decision.w_sat"), "{err}");
        let err = RunConfig::from_toml_str("[decision]\nw_sad = 1.0\n", None).unwrap_err();
        assert!(err.to_string().contains("w_sad"), "{err}");
    }

    #[test]
    fn axis_resolution() {
        assert_eq!(
            numeric_axis("w_cov").unwrap(),
            ("decision".to_string(), "w_cov".to_string())
        );
        assert!(matches!(
            numeric_axis("bogus"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            numeric_axis("mode"),
            Err(ConfigError::AmbiguousKey(_))
        ));
        assert!(matches!(
            numeric_axis("decision.mode"),
            Err(ConfigError::NotNumeric(_))
        ));
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.sim.seed += 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn toml_round_trip() {
        let a = RunConfig::default();
        let back = RunConfig::from_toml_str(&a.to_toml(), None).unwrap();
        assert_eq!(a, back);
    }
}
