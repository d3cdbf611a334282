//! LoRa-style link arithmetic: rate, airtime, thresholds, link budget, energy.
//!
//! Everything here is a pure function of a [`PhyConfig`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::{Action, ActionSpace, BanditError};

/// Spreading factors the rate model is defined for.
pub const CODES: [u8; 6] = [7, 8, 9, 10, 11, 12];

/// Free-space power gain at 1 m for an 868 MHz carrier: `(c / (4 pi f))^2`.
pub fn free_space_gain_868mhz() -> f64 {
    let wavelength = 299_792_458.0 / 868e6;
    (wavelength / (4.0 * std::f64::consts::PI)).powi(2)
}

#[derive(Debug, Error, PartialEq)]
pub enum PhyError {
    #[error("spreading code {0} is outside 7..=12")]
    UnknownCode(u8),
    #[error("no SNR threshold configured for code {0}")]
    MissingThreshold(u8),
    #[error("SNR thresholds must strictly decrease with the code ({0} -> {1})")]
    ThresholdsNotDecreasing(u8, u8),
    #[error("invalid phy parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhyConfig {
    pub bandwidth_hz: f64,
    pub code_rate: f64,
    /// Required SNR per spreading code, in dB.
    pub snr_thresholds_db: BTreeMap<u8, f64>,
    pub sir_threshold_db: f64,
    pub path_loss_exponent: f64,
    /// Linear power gain `G` in `G * d^-delta`.
    pub path_gain: f64,
    /// Thermal noise density in dBm/Hz, before the noise figure.
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Power-amplifier multiplier applied to the radiated power.
    pub pa_multiplier: f64,
    pub circuit_power_dbm: f64,
}

impl Default for PhyConfig {
    fn default() -> Self {
        let snr_thresholds_db = CODES.iter().copied().zip([-6.0, -9.0, -12.0, -15.0, -17.5, -20.0]).collect();
        Self {
            bandwidth_hz: 125e3,
            code_rate: 0.8,
            snr_thresholds_db,
            sir_threshold_db: 6.0,
            path_loss_exponent: 4.0,
            path_gain: free_space_gain_868mhz(),
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 6.0,
            pa_multiplier: 2.0,
            circuit_power_dbm: 10.0,
        }
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<(), PhyError> {
        let invalid = |field, reason: &str| PhyError::Invalid {
            field,
            reason: reason.to_string(),
        };
        if !(self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0) {
            return Err(invalid("bandwidth_hz", "must be > 0"));
        }
        if !(self.code_rate > 0.0 && self.code_rate <= 1.0) {
            return Err(invalid("code_rate", "must be in (0, 1]"));
        }
        if !(self.path_loss_exponent > 2.0 && self.path_loss_exponent.is_finite()) {
            return Err(invalid("path_loss_exponent", "must be > 2"));
        }
        if !(self.path_gain > 0.0 && self.path_gain.is_finite()) {
            return Err(invalid("path_gain", "must be > 0"));
        }
        if !(self.pa_multiplier > 0.0 && self.pa_multiplier.is_finite()) {
            return Err(invalid("pa_multiplier", "must be > 0"));
        }
        for (field, v) in [
            ("sir_threshold_db", self.sir_threshold_db),
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz),
            ("noise_figure_db", self.noise_figure_db),
            ("circuit_power_dbm", self.circuit_power_dbm),
        ] {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if let Some(&c) = self.snr_thresholds_db.keys().find(|c| !CODES.contains(c)) {
            return Err(PhyError::UnknownCode(c));
        }
        for &c in &CODES {
            if !self.snr_thresholds_db.contains_key(&c) {
                return Err(PhyError::MissingThreshold(c));
            }
        }
        for pair in CODES.windows(2) {
            if self.snr_thresholds_db[&pair[1]] >= self.snr_thresholds_db[&pair[0]] {
                return Err(PhyError::ThresholdsNotDecreasing(pair[0], pair[1]));
            }
        }
        Ok(())
    }

    /// Receiver noise power `N * W` in watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz + self.noise_figure_db) * self.bandwidth_hz
    }

    /// Noise density `N` in W/Hz, noise figure included.
    pub fn noise_psd_w_hz(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz + self.noise_figure_db)
    }

    pub fn sir_threshold_linear(&self) -> f64 {
        db_to_linear(self.sir_threshold_db)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn check_code(c: u8) -> Result<(), PhyError> {
    if CODES.contains(&c) {
        Ok(())
    } else {
        Err(PhyError::UnknownCode(c))
    }
}

/// `c * W * mu / 2^c` in bit/s.
pub fn data_rate(c: u8, cfg: &PhyConfig) -> Result<f64, PhyError> {
    check_code(c)?;
    Ok(c as f64 * cfg.bandwidth_hz * cfg.code_rate / 2f64.powi(c as i32))
}

/// Payload-only time on air in seconds.
pub fn airtime(c: u8, payload_bytes: u32, cfg: &PhyConfig) -> Result<f64, PhyError> {
    if payload_bytes == 0 {
        return Err(PhyError::Invalid {
            field: "payload_bytes",
            reason: "must be > 0".into(),
        });
    }
    Ok(8.0 * payload_bytes as f64 / data_rate(c, cfg)?)
}

/// `m * airtime * (eta * P_tx + P_o)` in joules.
pub fn tx_energy(action: &Action, payload_bytes: u32, cfg: &PhyConfig) -> Result<f64, PhyError> {
    let t = airtime(action.code, payload_bytes, cfg)?;
    let draw = cfg.pa_multiplier * dbm_to_watts(action.power_dbm as f64) + dbm_to_watts(cfg.circuit_power_dbm);
    Ok(action.repetitions as f64 * t * draw)
}

pub fn snr_threshold_db(c: u8, cfg: &PhyConfig) -> Result<f64, PhyError> {
    check_code(c)?;
    cfg.snr_thresholds_db.get(&c).copied().ok_or(PhyError::MissingThreshold(c))
}

/// `P_tx * h * G * d^-delta` in watts.
pub fn received_power(p_tx_dbm: f64, distance_m: f64, fading_h: f64, cfg: &PhyConfig) -> f64 {
    dbm_to_watts(p_tx_dbm) * fading_h * cfg.path_gain * distance_m.powf(-cfg.path_loss_exponent)
}

/// The discrete choice sets an [`ActionSpace`] is built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionGrid {
    pub powers_dbm: Vec<i32>,
    pub subchannels: usize,
    pub codes: Vec<u8>,
    #[serde(default = "default_repetitions")]
    pub repetitions: Vec<u32>,
}

fn default_repetitions() -> Vec<u32> {
    vec![1]
}

impl ActionGrid {
    /// Actions ordered power-major, then code, subchannel and repetitions.
    pub fn actions(&self) -> Vec<Action> {
        let mut out = Vec::with_capacity(self.size());
        for &power_dbm in &self.powers_dbm {
            for &code in &self.codes {
                for subchannel in 0..self.subchannels {
                    for &repetitions in &self.repetitions {
                        out.push(Action {
                            power_dbm,
                            subchannel,
                            code,
                            repetitions,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn size(&self) -> usize {
        self.powers_dbm.len() * self.subchannels * self.codes.len() * self.repetitions.len()
    }
}

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
}

/// Builds the learner-facing action space with per-action energies.
pub fn build_action_space(grid: &ActionGrid, payload_bytes: u32, cfg: &PhyConfig) -> Result<ActionSpace, SpaceError> {
    let actions = grid.actions();
    let energy = actions
        .iter()
        .map(|a| tx_energy(a, payload_bytes, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ActionSpace::new(actions, energy)?)
}
