//! Per-device bandit learners and the energy-shaped reward.
//!
//! Nothing in here knows about radios: an [`ActionSpace`] is an ordered list of
//! [`Action`]s with a precomputed energy cost each, and the learners only ever
//! see action indices and rewards in `[0, 1]`.

mod exp3;
mod reward;
mod ucb;

pub use exp3::Exp3State;
pub use reward::{shaped_reward, shaped_reward_literal, RewardShaper};
pub use ucb::Ucb1State;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BanditError {
    #[error("energy must be strictly positive and finite (got e_k={e_k}, e_min={e_min})")]
    NonPositiveEnergy { e_k: f64, e_min: f64 },
    #[error("action energy {e_k} is below the minimum energy {e_min}")]
    EnergyBelowMinimum { e_k: f64, e_min: f64 },
    #[error("beta must lie in [0, 1] (got {0})")]
    BetaOutOfRange(f64),
    #[error("reward must lie in [0, 1] (got {0})")]
    RewardOutOfRange(f64),
    #[error("action index {index} out of range for {len} actions")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("prior has {got} entries but the action space has {expected}")]
    PriorSizeMismatch { expected: usize, got: usize },
    #[error("prior entry {index} is invalid ({value})")]
    InvalidPrior { index: usize, value: f64 },
    #[error("action space must not be empty")]
    EmptyActionSpace,
    #[error("actions and energies differ in length ({actions} vs {energies})")]
    EnergyLengthMismatch { actions: usize, energies: usize },
    #[error("invalid learner parameter: {0}")]
    InvalidParameter(String),
}

/// One selectable tuple of communication parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub power_dbm: i32,
    pub subchannel: usize,
    pub code: u8,
    pub repetitions: u32,
}

/// Ordered actions together with their deterministic energy cost.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSpace {
    actions: Vec<Action>,
    energy_j: Vec<f64>,
    e_min_j: f64,
}

impl ActionSpace {
    pub fn new(actions: Vec<Action>, energy_j: Vec<f64>) -> Result<Self, BanditError> {
        if actions.is_empty() {
            return Err(BanditError::EmptyActionSpace);
        }
        if actions.len() != energy_j.len() {
            return Err(BanditError::EnergyLengthMismatch {
                actions: actions.len(),
                energies: energy_j.len(),
            });
        }
        if let Some(&bad) = energy_j.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(BanditError::NonPositiveEnergy { e_k: bad, e_min: bad });
        }
        let e_min_j = energy_j.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            actions,
            energy_j,
            e_min_j,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action(&self, index: usize) -> Action {
        self.actions[index]
    }

    pub fn energy(&self, index: usize) -> f64 {
        self.energy_j[index]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energy_j
    }

    pub fn e_min(&self) -> f64 {
        self.e_min_j
    }

    pub fn e_max(&self) -> f64 {
        self.energy_j.iter().copied().fold(0.0, f64::max)
    }

    pub fn index_of(&self, action: &Action) -> Option<usize> {
        self.actions.iter().position(|a| a == action)
    }
}

/// Which learner a [`LearnerState`] should be built as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Ucb1,
    Exp3,
}

/// Learner hyper-parameters shared by cold and warm starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerParams {
    pub alpha: f64,
    pub rho: f64,
    pub literal_index: bool,
    /// Visit count attached to a transferred prior in UCB1 mode.
    pub pseudo_count: u64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            rho: 0.4,
            literal_index: false,
            pseudo_count: 10,
        }
    }
}

/// The outcome of a selection: the chosen index and the probability it had.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub index: usize,
    /// Always 1 for the deterministic UCB1 rule.
    pub probability: f64,
}

/// Per-device bandit memory.
#[derive(Debug, Clone, PartialEq)]
pub enum LearnerState {
    Ucb1(Ucb1State),
    Exp3(Exp3State),
}

impl LearnerState {
    pub fn cold(kind: LearnerKind, arms: usize, params: &LearnerParams) -> Result<Self, BanditError> {
        Ok(match kind {
            LearnerKind::Ucb1 => {
                LearnerState::Ucb1(Ucb1State::new(arms, params.alpha)?.with_literal_index(params.literal_index))
            }
            LearnerKind::Exp3 => LearnerState::Exp3(Exp3State::new(arms, params.rho)?),
        })
    }

    pub fn arms(&self) -> usize {
        match self {
            LearnerState::Ucb1(s) => s.arms(),
            LearnerState::Exp3(s) => s.arms(),
        }
    }

    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> Selection {
        match self {
            LearnerState::Ucb1(s) => Selection {
                index: s.select(),
                probability: 1.0,
            },
            LearnerState::Exp3(s) => {
                let dist = s.distribution();
                let index = exp3::sample(&dist, rng);
                Selection {
                    index,
                    probability: dist[index],
                }
            }
        }
    }

    pub fn update(&mut self, selection: Selection, reward: f64) -> Result<(), BanditError> {
        match self {
            LearnerState::Ucb1(s) => s.update(selection.index, reward),
            LearnerState::Exp3(s) => s.update(selection.index, reward, selection.probability),
        }
    }
}

/// Warm-starts a learner from per-action prior values.
///
/// UCB1: every arm gets `pseudo_count` extra visits carrying `prior[k]` as its
/// mean, on top of the usual single zero-reward initial visit. EXP3: weights
/// are set to `exp(prior[k])`. An all-zero prior yields the cold state.
pub fn transfer_init(
    space: &ActionSpace,
    prior: &[f64],
    kind: LearnerKind,
    params: &LearnerParams,
) -> Result<LearnerState, BanditError> {
    if prior.len() != space.len() {
        return Err(BanditError::PriorSizeMismatch {
            expected: space.len(),
            got: prior.len(),
        });
    }
    for (index, &value) in prior.iter().enumerate() {
        let too_big = kind == LearnerKind::Ucb1 && value > 1.0;
        if !value.is_finite() || value < 0.0 || too_big {
            return Err(BanditError::InvalidPrior { index, value });
        }
    }
    let mut state = LearnerState::cold(kind, space.len(), params)?;
    if prior.iter().all(|&v| v == 0.0) {
        return Ok(state);
    }
    match &mut state {
        LearnerState::Ucb1(s) => s.seed_prior(prior, params.pseudo_count),
        LearnerState::Exp3(s) => s.seed_log_weights(prior),
    }
    Ok(state)
}
