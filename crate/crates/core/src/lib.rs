//! Grant-free IoT uplink simulation with per-device bandit learning.
//!
//! * [`bandit`]: shaped reward, UCB1 and EXP3 learners, warm starts.
//! * [`phy`]: LoRa-style rate, airtime, link budget and energy arithmetic.
//! * [`analytic`]: centralized ring model and its density optimizer.
//! * [`sim`]: event-driven network simulator and non-learning baselines.
//! * [`harness`]: the run, analytic and validate commands and their output files.
//! * [`scenario`]: JSON scenario files and their validation.

pub mod analytic;
pub mod bandit;
pub mod harness;
pub mod phy;
pub mod presets;
pub mod scenario;
pub mod sim;
