//! Scenario description: everything one experiment needs, as JSON.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phy::{ActionGrid, PhyConfig, PhyError, CODES};

/// Transmit powers a device may use, in dBm.
pub const ALLOWED_POWERS_DBM: [i32; 5] = [2, 5, 8, 11, 14];

const REQUIRED_FIELDS: [&str; 4] = ["deployment", "action_space", "policy", "horizon"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing required field(s): {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.to_string(),
        }
    }

    /// Dotted path of the offending field, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Ucb1,
    Exp3,
    EqualSplit,
    Random,
    /// UCB1 with the energy term switched off (`beta = 0`).
    Ucb1NoEnergy,
}

impl Policy {
    pub fn is_learning(self) -> bool {
        matches!(self, Policy::Ucb1 | Policy::Exp3 | Policy::Ucb1NoEnergy)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Ucb1 => "ucb1",
            Policy::Exp3 => "exp3",
            Policy::EqualSplit => "equal_split",
            Policy::Random => "random",
            Policy::Ucb1NoEnergy => "ucb1_no_energy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentConfig {
    pub radius_m: f64,
    /// Exact number of devices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// Devices per square metre; the count is then Poisson distributed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_per_m2: Option<f64>,
    /// Per-device packet rate, `1 / T_rep`.
    pub traffic_rate_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningConfig {
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    /// Reward grows with energy as in the printed reward formula (rescaled to [0, 1]).
    pub literal_eq3: bool,
    /// UCB1 value term is the cumulative reward instead of its mean.
    pub literal_index: bool,
    /// Visit count given to a transferred prior.
    pub pseudo_count: u64,
    /// How learner arm labels are rotated per device so that identical
    /// tie-breaking does not herd every device onto the same action.
    pub stagger: Stagger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stagger {
    /// Every device sees the action space in the same order.
    None,
    /// Subchannel labels are rotated by `device % subchannels`.
    Subchannel,
    /// The whole action list is rotated by `device % |A|`.
    Action,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.4,
            rho: 0.4,
            literal_eq3: false,
            literal_index: false,
            pseudo_count: 10,
            stagger: Stagger::Action,
        }
    }
}

/// Fixed parameters used by the non-learning policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub power_dbm: i32,
    /// Spreading code for the random-subchannel policy.
    pub code: u8,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { power_dbm: 14, code: 7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JamMode {
    /// Constant interferer on the data channel; `severity` is its received power in dBm.
    Data,
    /// ACKs dropped with probability `severity`.
    Feedback,
    /// Data interferer of `severity` dBm and every ACK dropped.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JamEntry {
    pub subchannel: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub mode: JamMode,
    pub severity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Horizon {
    /// Packets generated per device.
    Packets(u64),
    Seconds(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Trailing window, in packets, of the per-device success estimate.
    pub window: usize,
    /// Width of the time buckets used for occupancy and time series.
    pub bucket_s: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            window: 50,
            bucket_s: 100.0,
        }
    }
}

/// A named override of the base scenario, run alongside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Policy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

/// Settings for the centralized ring model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticSettings {
    /// Number of equal-area rings, used when `ring_edges_m` is absent.
    pub rings: usize,
    /// Explicit outer radius of every ring, increasing, the last equal to the disc radius.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ring_edges_m: Option<Vec<f64>>,
    /// Length of the vulnerable window in airtimes; 2 counts any overlap.
    pub overlap_factor: f64,
    /// Resolution of the density-share grid.
    pub grid_step: f64,
    /// Number of distances in the emitted success table.
    pub table_points: usize,
}

impl Default for AnalyticSettings {
    fn default() -> Self {
        Self {
            rings: 2,
            ring_edges_m: None,
            overlap_factor: 2.0,
            grid_step: 0.01,
            table_points: 10,
        }
    }
}

fn default_payload() -> u32 {
    20
}

fn default_replications() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub phy: PhyConfig,
    #[serde(default = "default_payload")]
    pub payload_bytes: u32,
    pub deployment: DeploymentConfig,
    pub action_space: ActionGrid,
    pub policy: Policy,
    #[serde(default)]
    pub learning: LearningConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub jamming: Vec<JamEntry>,
    pub horizon: Horizon,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub analytic: AnalyticSettings,
}

impl ScenarioConfig {
    /// Parses, defaults and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let text = if text.trim().is_empty() { "{}" } else { text };
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let Some(object) = value.as_object() else {
            return Err(ConfigError::Parse("top level must be a JSON object".into()));
        };
        let missing: Vec<String> = REQUIRED_FIELDS
            .iter()
            .filter(|f| !object.contains_key(**f))
            .map(|f| f.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(ConfigError::Missing(missing));
        }
        let cfg: ScenarioConfig = serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.phy.validate().map_err(|e| {
            let field = match &e {
                PhyError::Invalid { field, .. } => format!("phy.{field}"),
                _ => "phy.snr_thresholds_db".to_string(),
            };
            ConfigError::invalid(field, e)
        })?;
        if self.payload_bytes == 0 {
            return Err(ConfigError::invalid("payload_bytes", "must be > 0"));
        }
        self.validate_deployment()?;
        self.validate_actions()?;
        self.validate_learning(&self.learning, "learning")?;
        if !ALLOWED_POWERS_DBM.contains(&self.baseline.power_dbm) {
            return Err(ConfigError::invalid(
                "baseline.power_dbm",
                format!("{} dBm not in {:?}", self.baseline.power_dbm, ALLOWED_POWERS_DBM),
            ));
        }
        if !CODES.contains(&self.baseline.code) {
            return Err(ConfigError::invalid("baseline.code", format!("{} not in 7..=12", self.baseline.code)));
        }
        for (i, jam) in self.jamming.iter().enumerate() {
            let field = |name: &str| format!("jamming[{i}].{name}");
            if jam.subchannel >= self.action_space.subchannels {
                return Err(ConfigError::invalid(field("subchannel"), "no such subchannel"));
            }
            if !(jam.t_start.is_finite() && jam.t_end.is_finite() && jam.t_start < jam.t_end) {
                return Err(ConfigError::invalid(field("t_end"), "need t_start < t_end"));
            }
            match jam.mode {
                JamMode::Feedback if !(0.0..=1.0).contains(&jam.severity) => {
                    return Err(ConfigError::invalid(field("severity"), "drop probability must be in [0, 1]"));
                }
                _ if !jam.severity.is_finite() => {
                    return Err(ConfigError::invalid(field("severity"), "must be finite"));
                }
                _ => {}
            }
        }
        match self.horizon {
            Horizon::Packets(0) => return Err(ConfigError::invalid("horizon.packets", "must be > 0")),
            Horizon::Seconds(s) if !(s.is_finite() && s > 0.0) => {
                return Err(ConfigError::invalid("horizon.seconds", "must be > 0"))
            }
            _ => {}
        }
        if self.replications == 0 {
            return Err(ConfigError::invalid("replications", "must be >= 1"));
        }
        if self.metrics.window == 0 {
            return Err(ConfigError::invalid("metrics.window", "must be >= 1"));
        }
        if !(self.metrics.bucket_s.is_finite() && self.metrics.bucket_s > 0.0) {
            return Err(ConfigError::invalid("metrics.bucket_s", "must be > 0"));
        }
        self.validate_analytic()?;
        let mut labels = std::collections::BTreeSet::new();
        for (i, v) in self.variants.iter().enumerate() {
            if v.label.is_empty() || !labels.insert(v.label.as_str()) {
                return Err(ConfigError::invalid(format!("variants[{i}].label"), "labels must be non-empty and unique"));
            }
            let learning = self.apply_variant(v).learning;
            self.validate_learning(&learning, &format!("variants[{i}]"))?;
        }
        Ok(())
    }

    fn validate_analytic(&self) -> Result<(), ConfigError> {
        let a = &self.analytic;
        if a.rings == 0 {
            return Err(ConfigError::invalid("analytic.rings", "must be >= 1"));
        }
        if let Some(edges) = &a.ring_edges_m {
            let increasing = edges.windows(2).all(|w| w[0] < w[1]);
            let ends_at_radius = edges.last().is_some_and(|r| (r - self.deployment.radius_m).abs() <= 1e-9 * self.deployment.radius_m);
            if edges.is_empty() || !increasing || edges[0] <= 0.0 || !ends_at_radius {
                return Err(ConfigError::invalid(
                    "analytic.ring_edges_m",
                    "must be positive, increasing and end at deployment.radius_m",
                ));
            }
        }
        if !(a.overlap_factor.is_finite() && a.overlap_factor > 0.0) {
            return Err(ConfigError::invalid("analytic.overlap_factor", "must be > 0"));
        }
        let steps = 1.0 / a.grid_step;
        if !(a.grid_step > 0.0 && a.grid_step <= 1.0 && (steps - steps.round()).abs() < 1e-9) {
            return Err(ConfigError::invalid("analytic.grid_step", "must divide 1 evenly"));
        }
        if a.table_points == 0 {
            return Err(ConfigError::invalid("analytic.table_points", "must be >= 1"));
        }
        Ok(())
    }

    fn validate_deployment(&self) -> Result<(), ConfigError> {
        let d = &self.deployment;
        if !(d.radius_m.is_finite() && d.radius_m > 0.0) {
            return Err(ConfigError::invalid("deployment.radius_m", "must be > 0"));
        }
        match (d.count, d.density_per_m2) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(ConfigError::invalid(
                    "deployment.count",
                    "exactly one of `count` and `density_per_m2` must be given",
                ));
            }
            (None, Some(l)) if !(l.is_finite() && l >= 0.0) => {
                return Err(ConfigError::invalid("deployment.density_per_m2", "must be >= 0"));
            }
            _ => {}
        }
        if !(d.traffic_rate_hz.is_finite() && d.traffic_rate_hz > 0.0) {
            return Err(ConfigError::invalid("deployment.traffic_rate_hz", "must be > 0"));
        }
        Ok(())
    }

    fn validate_actions(&self) -> Result<(), ConfigError> {
        let a = &self.action_space;
        if a.powers_dbm.is_empty() {
            return Err(ConfigError::invalid("action_space.powers_dbm", "must not be empty"));
        }
        if let Some(p) = a.powers_dbm.iter().find(|p| !ALLOWED_POWERS_DBM.contains(p)) {
            return Err(ConfigError::invalid(
                "action_space.powers_dbm",
                format!("{p} dBm not in {ALLOWED_POWERS_DBM:?}"),
            ));
        }
        if a.subchannels == 0 {
            return Err(ConfigError::invalid("action_space.subchannels", "must be >= 1"));
        }
        if a.codes.is_empty() {
            return Err(ConfigError::invalid("action_space.codes", "must not be empty"));
        }
        if let Some(c) = a.codes.iter().find(|c| !CODES.contains(c)) {
            return Err(ConfigError::invalid("action_space.codes", format!("{c} not in 7..=12")));
        }
        if a.repetitions.is_empty() || a.repetitions.contains(&0) {
            return Err(ConfigError::invalid("action_space.repetitions", "entries must be >= 1"));
        }
        let distinct = |n: usize, m: usize| n == m;
        let mut p = a.powers_dbm.clone();
        p.sort_unstable();
        p.dedup();
        let mut c = a.codes.clone();
        c.sort_unstable();
        c.dedup();
        let mut r = a.repetitions.clone();
        r.sort_unstable();
        r.dedup();
        if !distinct(p.len(), a.powers_dbm.len()) || !distinct(c.len(), a.codes.len()) || !distinct(r.len(), a.repetitions.len()) {
            return Err(ConfigError::invalid("action_space", "duplicate entries"));
        }
        Ok(())
    }

    fn validate_learning(&self, l: &LearningConfig, prefix: &str) -> Result<(), ConfigError> {
        if !(l.alpha.is_finite() && l.alpha >= 0.0) {
            return Err(ConfigError::invalid(format!("{prefix}.alpha"), "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&l.beta) {
            return Err(ConfigError::invalid(format!("{prefix}.beta"), "must be in [0, 1]"));
        }
        if !(l.rho > 0.0 && l.rho <= 1.0) {
            return Err(ConfigError::invalid(format!("{prefix}.rho"), "must be in (0, 1]"));
        }
        Ok(())
    }

    /// The base scenario with one variant's overrides applied.
    pub fn apply_variant(&self, v: &Variant) -> ScenarioConfig {
        let mut cfg = self.clone();
        cfg.variants.clear();
        if let Some(p) = v.policy {
            cfg.policy = p;
        }
        if let Some(a) = v.alpha {
            cfg.learning.alpha = a;
        }
        if let Some(b) = v.beta {
            cfg.learning.beta = b;
        }
        if let Some(r) = v.rho {
            cfg.learning.rho = r;
        }
        cfg
    }

    /// `(label, scenario)` for every variant, or just the base scenario.
    pub fn expand(&self) -> Vec<(String, ScenarioConfig)> {
        if self.variants.is_empty() {
            let mut base = self.clone();
            base.variants.clear();
            return vec![("base".to_string(), base)];
        }
        self.variants.iter().map(|v| (v.label.clone(), self.apply_variant(v))).collect()
    }

    /// Effective reward weight: the no-energy policy forces it to zero.
    pub fn effective_beta(&self) -> f64 {
        if self.policy == Policy::Ucb1NoEnergy {
            0.0
        } else {
            self.learning.beta
        }
    }

    pub fn horizon_packets(&self) -> Option<u64> {
        match self.horizon {
            Horizon::Packets(n) => Some(n),
            Horizon::Seconds(_) => None,
        }
    }
}

/// Reads a scenario file. A path that does not exist but names a bundled
/// preset (e.g. `table1-default`) resolves to that preset.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    match std::fs::read_to_string(path) {
        Ok(text) => ScenarioConfig::from_json(&text),
        Err(source) => {
            let name = path.to_string_lossy();
            match crate::presets::preset(name.trim_end_matches(".json")) {
                Some(text) => ScenarioConfig::from_json(text),
                None => Err(ConfigError::Io {
                    path: name.into_owned(),
                    source,
                }),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "deployment": {"radius_m": 2000, "count": 10, "traffic_rate_hz": 0.005},
        "action_space": {"powers_dbm": [8, 14], "subchannels": 1, "codes": [7, 8, 9, 10, 11, 12]},
        "policy": "ucb1",
        "horizon": {"packets": 100}
    }"#;

    #[test]
    fn minimal_config_gets_table_defaults() {
        let cfg = ScenarioConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.learning.alpha, 0.1);
        assert_eq!(cfg.learning.beta, 0.4);
        assert_eq!(cfg.learning.rho, 0.4);
        assert_eq!(cfg.payload_bytes, 20);
        assert_eq!(cfg.phy.bandwidth_hz, 125e3);
        assert_eq!(cfg.action_space.repetitions, vec![1]);
    }

    #[test]
    fn empty_document_names_required_fields() {
        let err = ScenarioConfig::from_json("").unwrap_err();
        let msg = err.to_string();
        for f in REQUIRED_FIELDS {
            assert!(msg.contains(f), "{msg}");
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = MINIMAL.replace("\"policy\"", "\"bogus\": 1, \"policy\"");
        assert!(matches!(ScenarioConfig::from_json(&text), Err(ConfigError::Parse(_))));
        let text = MINIMAL.replace("\"radius_m\"", "\"radius\": 3, \"radius_m\"");
        assert!(ScenarioConfig::from_json(&text).is_err());
    }

    #[test]
    fn power_outside_allowed_set_rejected() {
        let text = MINIMAL.replace("[8, 14]", "[3, 14]");
        let err = ScenarioConfig::from_json(&text).unwrap_err();
        assert_eq!(err.field(), Some("action_space.powers_dbm"));
    }

    #[test]
    fn validation_names_fields() {
        let cases = [
            (MINIMAL.replace("\"count\": 10", "\"count\": 10, \"density_per_m2\": 1e-6"), "deployment.count"),
            (MINIMAL.replace("[7, 8, 9, 10, 11, 12]", "[6, 7]"), "action_space.codes"),
            (MINIMAL.replace("\"subchannels\": 1", "\"subchannels\": 0"), "action_space.subchannels"),
            (MINIMAL.replace("{\"packets\": 100}", "{\"packets\": 100}, \"learning\": {\"beta\": 1.5}"), "learning.beta"),
            (
                MINIMAL.replace(
                    "{\"packets\": 100}",
                    "{\"packets\": 100}, \"jamming\": [{\"subchannel\": 3, \"t_start\": 0, \"t_end\": 1, \"mode\": \"data\", \"severity\": 0}]",
                ),
                "jamming[0].subchannel",
            ),
        ];
        for (text, field) in cases {
            let err = ScenarioConfig::from_json(&text).unwrap_err();
            assert_eq!(err.field(), Some(field), "{err}");
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let cfg = ScenarioConfig::from_json(MINIMAL).unwrap();
        let again = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn variants_expand() {
        let text = MINIMAL.replace(
            "{\"packets\": 100}",
            "{\"packets\": 100}, \"variants\": [{\"label\": \"b0\", \"beta\": 0}, {\"label\": \"rand\", \"policy\": \"random\"}]",
        );
        let cfg = ScenarioConfig::from_json(&text).unwrap();
        let runs = cfg.expand();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].1.learning.beta, 0.0);
        assert_eq!(runs[1].1.policy, Policy::Random);
        assert!(runs.iter().all(|(_, c)| c.variants.is_empty()));
    }
}
