//! Event-driven Monte-Carlo simulator for grant-free uplinks.
//!
//! One replication is a single-threaded continuous-time event loop: Poisson
//! arrivals per device, exact airtime overlap per subchannel, aggregate-SIR
//! capture against same-code interferers, ACK feedback with optional jamming.

mod baseline;
mod channel;
mod deploy;
mod engine;
mod jamming;
mod metrics;
pub mod probe;
pub mod rng;

pub use baseline::{baseline_equal_split, baseline_random, equal_split_counts};
pub use channel::{deliver_ack, resolve_transmission, LinkOutcome, Transmission};
pub use deploy::{deploy_ppp, Deployment, DeploymentSize};
pub use engine::{arm_to_action, run_replication, run_scenario, ReplicationOutput, RunOptions};
pub use jamming::JammingSchedule;
pub use metrics::{convergence_index, MetricsSeries, TimeBucket};

use serde::Serialize;
use thiserror::Error;

use crate::bandit::{Action, BanditError};
use crate::phy::SpaceError;
use crate::scenario::ConfigError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error("{0}")]
    Priors(String),
}

/// One resolved on-air replica.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransmissionRecord {
    pub device: usize,
    pub packet_index: u64,
    pub replica: u32,
    pub t_start: f64,
    pub airtime: f64,
    pub action: Action,
    pub snr_ok: bool,
    pub sir_ok: bool,
    pub ack_delivered: bool,
    pub energy_j: f64,
}

/// Packet-level outcome as the device's learner saw it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PacketOutcome {
    pub device: usize,
    pub packet_index: u64,
    pub t_start: f64,
    pub action: Action,
    /// Index into the scenario's action space, when the action belongs to it.
    pub action_index: Option<usize>,
    /// At least one replica reached the gateway.
    pub delivered: bool,
    pub ack: bool,
    pub reward: f64,
    pub energy_j: f64,
    /// Device's trailing-window ACK rate including this packet.
    pub window_success: f64,
}
