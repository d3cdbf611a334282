//! Centralized ring model of a single-channel, single-power cell.
//!
//! Devices form a Poisson field of density `lambda`. The disc is cut into
//! rings and, inside ring `j`, a share of the density uses each spreading
//! code. A packet on code `c` at distance `z` survives when its faded signal
//! clears the noise threshold of `c` and the aggregate same-code interference
//! by the capture threshold. The interference term is the Laplace transform
//! of a duty-thinned Poisson field with Rayleigh fading.

pub mod optimize;
pub mod quad;

use serde::Serialize;
use thiserror::Error;

use crate::phy::{airtime, db_to_linear, dbm_to_watts, snr_threshold_db, PhyConfig, PhyError};
use crate::scenario::ScenarioConfig;
pub use optimize::{optimize_ring_densities, simplex_grid, Optimized, SearchMethod};
pub use quad::{integrate, QuadError, Tolerance};

use std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("closed form needs a path-loss exponent of 4, got {0}")]
    UnsupportedExponent(f64),
    #[error("the code set is empty")]
    EmptyCodeSet,
    #[error("code {0} is not part of the plan")]
    UnknownCode(u8),
    #[error("the ring model covers one subchannel and one power level; {0}")]
    Unsupported(String),
    #[error("invalid {field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error("{points} grid points per ring exceed the limit; use a coarser grid_step")]
    GridTooLarge { points: usize },
}

fn invalid(field: &'static str, message: impl Into<String>) -> AnalyticError {
    AnalyticError::Invalid {
        field,
        message: message.into(),
    }
}

/// Physical and traffic constants of the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellModel {
    pub phy: PhyConfig,
    pub power_w: f64,
    pub payload_bytes: u32,
    pub radius_m: f64,
    /// Devices per square metre.
    pub density: f64,
    pub traffic_rate_hz: f64,
    /// Vulnerable window in airtimes.
    pub overlap_factor: f64,
    pub codes: Vec<u8>,
    /// Quadrature tolerance for every numeric integral.
    pub tolerance: Tolerance,
}

impl CellModel {
    /// Reads the single-subchannel, single-power cell from a scenario.
    pub fn from_scenario(cfg: &ScenarioConfig) -> Result<Self, AnalyticError> {
        if cfg.action_space.subchannels != 1 {
            return Err(AnalyticError::Unsupported(format!(
                "config has {} subchannels",
                cfg.action_space.subchannels
            )));
        }
        if cfg.action_space.powers_dbm.len() != 1 {
            return Err(AnalyticError::Unsupported(format!(
                "config has {} power levels",
                cfg.action_space.powers_dbm.len()
            )));
        }
        let area = PI * cfg.deployment.radius_m.powi(2);
        let density = match (cfg.deployment.count, cfg.deployment.density_per_m2) {
            (Some(n), _) => n as f64 / area,
            (None, Some(l)) => l,
            (None, None) => return Err(invalid("deployment", "no device count or density")),
        };
        let model = Self {
            phy: cfg.phy.clone(),
            power_w: dbm_to_watts(cfg.action_space.powers_dbm[0] as f64),
            payload_bytes: cfg.payload_bytes,
            radius_m: cfg.deployment.radius_m,
            density,
            traffic_rate_hz: cfg.deployment.traffic_rate_hz,
            overlap_factor: cfg.analytic.overlap_factor,
            codes: cfg.action_space.codes.clone(),
            tolerance: Tolerance::default(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), AnalyticError> {
        self.phy.validate()?;
        if self.codes.is_empty() {
            return Err(AnalyticError::EmptyCodeSet);
        }
        for &c in &self.codes {
            snr_threshold_db(c, &self.phy)?;
        }
        if !(self.power_w > 0.0 && self.radius_m > 0.0) {
            return Err(invalid("power/radius", "must be > 0"));
        }
        if !(self.density >= 0.0 && self.traffic_rate_hz > 0.0 && self.overlap_factor > 0.0) {
            return Err(invalid("density/traffic", "must be non-negative and finite"));
        }
        Ok(())
    }

    pub fn airtime(&self, code: u8) -> f64 {
        airtime(code, self.payload_bytes, &self.phy).expect("validated code")
    }

    /// Fraction of time a device on `code` is inside a probe's vulnerable window.
    pub fn duty(&self, code: u8) -> f64 {
        self.overlap_factor * self.airtime(code) * self.traffic_rate_hz
    }

    /// Mean received power at distance `z` before fading.
    pub fn mean_rx_power(&self, z: f64) -> f64 {
        self.power_w * self.phy.path_gain * z.powf(-self.phy.path_loss_exponent)
    }

    /// Rayleigh probability of clearing the noise threshold of `code` at `z`.
    pub fn noise_term(&self, code: u8, z: f64) -> f64 {
        let gamma = db_to_linear(snr_threshold_db(code, &self.phy).expect("validated code"));
        (-gamma * self.phy.noise_power_w() / self.mean_rx_power(z)).exp()
    }

    /// Laplace argument for a probe at distance `z`.
    pub fn laplace_s(&self, z: f64) -> f64 {
        self.phy.sir_threshold_linear() / self.mean_rx_power(z)
    }

    /// Outer ring edges: the explicit list, or `rings` equal-area rings.
    pub fn ring_edges(&self, rings: usize, explicit: Option<&[f64]>) -> Vec<f64> {
        match explicit {
            Some(e) => e.to_vec(),
            None => (1..=rings).map(|j| self.radius_m * (j as f64 / rings as f64).sqrt()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ring {
    pub r_inner: f64,
    pub r_outer: f64,
}

impl Ring {
    pub fn area(&self) -> f64 {
        PI * (self.r_outer.powi(2) - self.r_inner.powi(2))
    }
}

/// Per-ring, per-code densities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RingPlan {
    pub rings: Vec<Ring>,
    pub codes: Vec<u8>,
    /// Total density `lambda`.
    pub density: f64,
    /// `densities[j][i]` is the density of code `codes[i]` in ring `j`.
    pub densities: Vec<Vec<f64>>,
    /// Duty factor per code.
    pub duty: Vec<f64>,
}

impl RingPlan {
    /// Plan with the given per-ring shares of the total density.
    pub fn from_shares(model: &CellModel, edges: &[f64], shares: &[Vec<f64>]) -> Result<Self, AnalyticError> {
        if model.codes.is_empty() {
            return Err(AnalyticError::EmptyCodeSet);
        }
        if edges.len() != shares.len() || shares.iter().any(|s| s.len() != model.codes.len()) {
            return Err(invalid("shares", "need one share per ring and code"));
        }
        let mut inner = 0.0;
        let mut rings = Vec::with_capacity(edges.len());
        for &outer in edges {
            rings.push(Ring {
                r_inner: inner,
                r_outer: outer,
            });
            inner = outer;
        }
        let plan = Self {
            rings,
            codes: model.codes.clone(),
            density: model.density,
            densities: shares.iter().map(|s| s.iter().map(|x| x * model.density).collect()).collect(),
            duty: model.codes.iter().map(|&c| model.duty(c)).collect(),
        };
        plan.validate(model.radius_m)?;
        Ok(plan)
    }

    /// Every ring with the same share vector.
    pub fn uniform(model: &CellModel, edges: &[f64], share: &[f64]) -> Result<Self, AnalyticError> {
        Self::from_shares(model, edges, &vec![share.to_vec(); edges.len()])
    }

    pub fn validate(&self, radius_m: f64) -> Result<(), AnalyticError> {
        let mut expected_inner = 0.0;
        for r in &self.rings {
            if r.r_inner != expected_inner || !(r.r_outer > r.r_inner) {
                return Err(invalid("rings", "must tile [0, R] in increasing order"));
            }
            expected_inner = r.r_outer;
        }
        if (expected_inner - radius_m).abs() > 1e-9 * radius_m {
            return Err(invalid("rings", "outermost edge must equal the disc radius"));
        }
        for row in &self.densities {
            if row.iter().any(|&l| !(l >= 0.0)) {
                return Err(invalid("densities", "must be >= 0"));
            }
            let total: f64 = row.iter().sum();
            if (total - self.density).abs() > 1e-9 * self.density.max(1e-300) {
                return Err(invalid("densities", "must sum to the total density in every ring"));
            }
        }
        Ok(())
    }

    fn code_index(&self, code: u8) -> Result<usize, AnalyticError> {
        self.codes.iter().position(|&c| c == code).ok_or(AnalyticError::UnknownCode(code))
    }

    /// Density of `code` in ring `j`, thinned by its duty factor.
    pub fn active_density(&self, j: usize, code: u8) -> Result<f64, AnalyticError> {
        let i = self.code_index(code)?;
        Ok(self.densities[j][i] * self.duty[i])
    }
}

/// Laplace transform at `s` of the interference from a Rayleigh-faded
/// Poisson field of density `active_density` on `ring`.
pub fn ring_laplace(s: f64, ring: &Ring, active_density: f64, model: &CellModel) -> Result<f64, AnalyticError> {
    if s < 0.0 || !s.is_finite() {
        return Err(invalid("s", "must be finite and >= 0"));
    }
    if s == 0.0 || active_density == 0.0 {
        return Ok(1.0);
    }
    let delta = model.phy.path_loss_exponent;
    let spg = s * model.power_w * model.phy.path_gain;
    let integral = integrate(
        |r| 2.0 * PI * r / (1.0 + r.powf(delta) / spg),
        ring.r_inner,
        ring.r_outer,
        model.tolerance,
    )?;
    Ok((-active_density * integral).exp())
}

/// Antiderivative of the ring integrand for `delta = 4`, with the Laplace
/// argument expressed through the capture threshold `gamma` and the probe
/// distance `z`.
pub fn q_closed_form(x: f64, z: f64, gamma: f64, delta: f64) -> Result<f64, AnalyticError> {
    if delta != 4.0 {
        return Err(AnalyticError::UnsupportedExponent(delta));
    }
    if !(x >= 0.0 && z > 0.0 && gamma > 0.0) {
        return Err(invalid("q_closed_form", "needs x >= 0, z > 0, gamma > 0"));
    }
    let scale = gamma.sqrt() * z * z;
    Ok(PI * scale * (x * x / scale).atan())
}

/// Integral of the ring integrand evaluated numerically; the closed form's oracle.
pub fn q_difference_quadrature(r1: f64, r2: f64, z: f64, gamma: f64, delta: f64, tol: Tolerance) -> Result<f64, AnalyticError> {
    let k = gamma * z.powf(delta);
    Ok(integrate(|r| 2.0 * PI * r / (1.0 + r.powf(delta) / k), r1, r2, tol)?)
}

/// Probability that a packet on `code` at distance `z` is decoded under `plan`.
pub fn success_probability(code: u8, z: f64, plan: &RingPlan, model: &CellModel) -> Result<f64, AnalyticError> {
    if !(z > 0.0 && z <= model.radius_m * (1.0 + 1e-12)) {
        return Err(invalid("z", "must be in (0, R]"));
    }
    let gamma = model.phy.sir_threshold_linear();
    let delta = model.phy.path_loss_exponent;
    let mut exponent = 0.0;
    for (j, ring) in plan.rings.iter().enumerate() {
        let lambda = plan.active_density(j, code)?;
        if lambda == 0.0 {
            continue;
        }
        let dq = if delta == 4.0 {
            q_closed_form(ring.r_outer, z, gamma, delta)? - q_closed_form(ring.r_inner, z, gamma, delta)?
        } else {
            q_difference_quadrature(ring.r_inner, ring.r_outer, z, gamma, delta, model.tolerance)?
        };
        exponent += lambda * dq;
    }
    Ok((-exponent).exp() * model.noise_term(code, z))
}

/// Same as [`success_probability`] but with every ring transform integrated numerically.
pub fn success_probability_quadrature(code: u8, z: f64, plan: &RingPlan, model: &CellModel) -> Result<f64, AnalyticError> {
    let s = model.laplace_s(z);
    let mut p = model.noise_term(code, z);
    for (j, ring) in plan.rings.iter().enumerate() {
        p *= ring_laplace(s, ring, plan.active_density(j, code)?, model)?;
    }
    Ok(p)
}

/// Area-weighted mix of ring-averaged success and airtime efficiency.
///
/// Each ring contributes `sum_c share_c * [(1 - beta) * mean_z p_s(c, z) + beta * T_min / T_c]`,
/// weighted by its share of the disc area.
pub fn plan_objective(plan: &RingPlan, beta: f64, model: &CellModel) -> Result<f64, AnalyticError> {
    let t_min = plan.codes.iter().map(|&c| model.airtime(c)).fold(f64::INFINITY, f64::min);
    let disc = PI * model.radius_m.powi(2);
    let mut total = 0.0;
    for (j, ring) in plan.rings.iter().enumerate() {
        let mut ring_value = 0.0;
        for (i, &c) in plan.codes.iter().enumerate() {
            let share = if plan.density > 0.0 {
                plan.densities[j][i] / plan.density
            } else {
                1.0 / plan.codes.len() as f64
            };
            if share == 0.0 {
                continue;
            }
            let mut reliability = 0.0;
            if beta < 1.0 {
                let mut failure = None;
                let integral = integrate(
                    |z| {
                        if z <= 0.0 {
                            return 0.0;
                        }
                        match success_probability(c, z, plan, model) {
                            Ok(p) => 2.0 * PI * z * p,
                            Err(e) => {
                                failure.get_or_insert(e.to_string());
                                0.0
                            }
                        }
                    },
                    ring.r_inner,
                    ring.r_outer,
                    model.tolerance,
                )?;
                if let Some(message) = failure {
                    return Err(invalid("plan", message));
                }
                reliability = integral / ring.area();
            }
            ring_value += share * ((1.0 - beta) * reliability + beta * t_min / model.airtime(c));
        }
        total += ring.area() / disc * ring_value;
    }
    Ok(total)
}
