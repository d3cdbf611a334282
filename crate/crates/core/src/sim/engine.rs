use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1};
use rayon::prelude::*;

use super::baseline::{baseline_random, equal_split_assignment};
use super::channel::{deliver_ack, resolve_transmission, Transmission};
use super::deploy::{deploy_ppp, Deployment, DeploymentSize};
use super::jamming::JammingSchedule;
use super::metrics::MetricsSeries;
use super::rng::{replication_seed, stream, Stream};
use super::{PacketOutcome, SimError, TransmissionRecord};
use crate::bandit::{transfer_init, Action, ActionSpace, LearnerKind, LearnerParams, LearnerState, RewardShaper, Selection};
use crate::phy::{airtime, build_action_space, received_power, tx_energy};
use crate::scenario::{Horizon, Policy, ScenarioConfig, Stagger};

/// Knobs that do not belong in a scenario file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Keep every [`TransmissionRecord`] (needed for CSV export).
    pub keep_records: bool,
    /// Return each device's final learner state.
    pub keep_learners: bool,
    /// Per-device warm-start values, one vector per device.
    pub priors: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct ReplicationOutput {
    pub seed: u64,
    pub deployment: Deployment,
    pub records: Vec<TransmissionRecord>,
    pub packets: Vec<PacketOutcome>,
    pub metrics: MetricsSeries,
    pub learners: Vec<Option<LearnerState>>,
    /// Number of replicas resolved, kept even when records are dropped.
    pub transmissions: usize,
}

/// Runs every replication of `cfg` (in parallel) with seeds derived from `cfg.seed`.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Vec<ReplicationOutput>, SimError> {
    cfg.validate()?;
    (0..cfg.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, replication_seed(cfg.seed, r), opts))
        .collect()
}

enum DevicePolicy {
    Learner(LearnerState),
    Fixed(Action),
    Random,
}

/// Maps learner arm `k` of device `d` to an index into the shared action space.
pub fn arm_to_action(space: &ActionSpace, cfg: &ScenarioConfig, d: usize, k: usize) -> usize {
    match cfg.learning.stagger {
        Stagger::None => k,
        Stagger::Action => (k + d) % space.len(),
        Stagger::Subchannel => {
            let h = cfg.action_space.subchannels;
            let mut a = space.action(k);
            a.subchannel = (a.subchannel + d) % h;
            space.index_of(&a).expect("rotated subchannel stays in the grid")
        }
    }
}

struct Device {
    distance: f64,
    policy: DevicePolicy,
    sent: u64,
    generated: u64,
    queued: u64,
    busy_until: f64,
    window: VecDeque<bool>,
    window_hits: usize,
}

struct InFlight {
    device: usize,
    packet_index: u64,
    t_start: f64,
    action: Action,
    action_index: Option<usize>,
    selection: Option<Selection>,
    replicas_left: u32,
    delivered: bool,
    ack: bool,
}

struct TxMeta {
    tx: Transmission,
    packet: usize,
    replica: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Arrival(usize),
    End(usize),
}

struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    opts: &'a RunOptions,
    space: ActionSpace,
    shaper: RewardShaper,
    jamming: JammingSchedule,
    devices: Vec<Device>,
    queue: BinaryHeap<Event>,
    seq: u64,
    txs: Vec<TxMeta>,
    active: Vec<Vec<usize>>,
    in_flight: Vec<InFlight>,
    max_airtime: f64,
    traffic: Exp<f64>,
    traffic_rng: ChaCha8Rng,
    fading_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    feedback_rng: ChaCha8Rng,
    records: Vec<TransmissionRecord>,
    packets: Vec<PacketOutcome>,
    /// Replicas started per time bucket and subchannel.
    occupancy: Vec<Vec<u32>>,
    transmissions: usize,
}

/// One replication, bitwise deterministic in `(cfg, seed)`.
pub fn run_replication(cfg: &ScenarioConfig, seed: u64, opts: &RunOptions) -> Result<ReplicationOutput, SimError> {
    cfg.validate()?;
    let space = build_action_space(&cfg.action_space, cfg.payload_bytes, &cfg.phy)?;
    let shaper = RewardShaper::new(&space, cfg.effective_beta(), cfg.learning.literal_eq3)?;

    let mut deploy_rng = stream(seed, Stream::Deployment);
    let size = match (cfg.deployment.count, cfg.deployment.density_per_m2) {
        (Some(n), _) => DeploymentSize::Count(n),
        (None, Some(l)) => DeploymentSize::Density(l),
        (None, None) => unreachable!("validated"),
    };
    let deployment = deploy_ppp(cfg.deployment.radius_m, size, cfg.deployment.traffic_rate_hz, &mut deploy_rng);

    if let Some(priors) = &opts.priors {
        if priors.len() != deployment.len() {
            return Err(SimError::Priors(format!(
                "{} priors for {} devices",
                priors.len(),
                deployment.len()
            )));
        }
    }

    let params = LearnerParams {
        alpha: cfg.learning.alpha,
        rho: cfg.learning.rho,
        literal_index: cfg.learning.literal_index,
        pseudo_count: cfg.learning.pseudo_count,
    };
    let fixed = (cfg.policy == Policy::EqualSplit).then(|| equal_split_assignment(&deployment, cfg));
    let mut devices = Vec::with_capacity(deployment.len());
    for d in 0..deployment.len() {
        let policy = match cfg.policy {
            Policy::Ucb1 | Policy::Ucb1NoEnergy | Policy::Exp3 => {
                let kind = if cfg.policy == Policy::Exp3 { LearnerKind::Exp3 } else { LearnerKind::Ucb1 };
                let state = match &opts.priors {
                    Some(p) => {
                        if p[d].len() != space.len() {
                            return Err(SimError::Priors(format!(
                                "device {d}: {} prior entries for {} actions",
                                p[d].len(),
                                space.len()
                            )));
                        }
                        let prior: Vec<f64> =
                            (0..space.len()).map(|k| p[d][arm_to_action(&space, cfg, d, k)]).collect();
                        transfer_init(&space, &prior, kind, &params)?
                    }
                    None => LearnerState::cold(kind, space.len(), &params)?,
                };
                DevicePolicy::Learner(state)
            }
            Policy::EqualSplit => DevicePolicy::Fixed(fixed.as_ref().expect("assigned")[d]),
            Policy::Random => DevicePolicy::Random,
        };
        devices.push(Device {
            distance: deployment.distance(d).max(1.0),
            policy,
            sent: 0,
            generated: 0,
            queued: 0,
            busy_until: 0.0,
            window: VecDeque::with_capacity(cfg.metrics.window),
            window_hits: 0,
        });
    }

    let max_airtime = cfg
        .action_space
        .codes
        .iter()
        .chain(std::iter::once(&cfg.baseline.code))
        .map(|&c| airtime(c, cfg.payload_bytes, &cfg.phy).expect("validated"))
        .fold(0.0, f64::max);

    let mut sim = Sim {
        cfg,
        opts,
        space,
        shaper,
        jamming: JammingSchedule::new(cfg.jamming.clone()),
        devices,
        queue: BinaryHeap::new(),
        seq: 0,
        txs: Vec::new(),
        active: vec![Vec::new(); cfg.action_space.subchannels],
        in_flight: Vec::new(),
        max_airtime,
        traffic: Exp::new(cfg.deployment.traffic_rate_hz).expect("validated rate"),
        traffic_rng: stream(seed, Stream::Traffic),
        fading_rng: stream(seed, Stream::Fading),
        policy_rng: stream(seed, Stream::Policy),
        feedback_rng: stream(seed, Stream::Feedback),
        records: Vec::new(),
        packets: Vec::new(),
        occupancy: Vec::new(),
        transmissions: 0,
    };
    sim.run()?;

    let metrics = MetricsSeries::from_packets(&sim.packets, std::mem::take(&mut sim.occupancy), deployment.len(), cfg);
    let learners = if opts.keep_learners {
        sim.devices
            .into_iter()
            .map(|d| match d.policy {
                DevicePolicy::Learner(s) => Some(s),
                _ => None,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ReplicationOutput {
        seed,
        deployment,
        records: if opts.keep_records { sim.records } else { Vec::new() },
        packets: sim.packets,
        metrics,
        learners,
        transmissions: sim.transmissions,
    })
}

impl Sim<'_> {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Event {
            time,
            seq: self.seq,
            kind,
        });
    }

    fn more_arrivals(&self, device: usize, t: f64) -> bool {
        match self.cfg.horizon {
            Horizon::Packets(n) => self.devices[device].generated < n,
            Horizon::Seconds(s) => t < s,
        }
    }

    fn run(&mut self) -> Result<(), SimError> {
        for d in 0..self.devices.len() {
            let t = self.traffic.sample(&mut self.traffic_rng);
            if self.more_arrivals(d, t) {
                self.push(t, EventKind::Arrival(d));
            }
        }
        while let Some(ev) = self.queue.pop() {
            match ev.kind {
                EventKind::Arrival(d) => self.on_arrival(d, ev.time),
                EventKind::End(id) => self.on_end(id, ev.time)?,
            }
        }
        Ok(())
    }

    fn on_arrival(&mut self, d: usize, now: f64) {
        let dev = &mut self.devices[d];
        dev.generated += 1;
        dev.queued += 1;
        let next = now + self.traffic.sample(&mut self.traffic_rng);
        if self.more_arrivals(d, next) {
            self.push(next, EventKind::Arrival(d));
        }
        if self.devices[d].busy_until <= now {
            self.transmit(d, now);
        }
    }

    fn choose(&mut self, d: usize) -> (Action, Option<usize>, Option<Selection>) {
        match &self.devices[d].policy {
            DevicePolicy::Learner(state) => {
                let sel = state.select(&mut self.policy_rng);
                let k = arm_to_action(&self.space, self.cfg, d, sel.index);
                (self.space.action(k), Some(k), Some(sel))
            }
            DevicePolicy::Fixed(a) => (*a, self.space.index_of(a), None),
            DevicePolicy::Random => {
                let a = baseline_random(&mut self.policy_rng, self.cfg);
                (a, self.space.index_of(&a), None)
            }
        }
    }

    fn transmit(&mut self, d: usize, now: f64) {
        let (action, action_index, selection) = self.choose(d);
        let t_air = airtime(action.code, self.cfg.payload_bytes, &self.cfg.phy).expect("validated");
        let dev = &mut self.devices[d];
        dev.queued -= 1;
        let packet_index = dev.sent;
        dev.sent += 1;
        dev.busy_until = now + action.repetitions as f64 * t_air;
        let distance = dev.distance;

        let packet = self.in_flight.len();
        self.in_flight.push(InFlight {
            device: d,
            packet_index,
            t_start: now,
            action,
            action_index,
            selection,
            replicas_left: action.repetitions,
            delivered: false,
            ack: false,
        });
        for replica in 0..action.repetitions {
            let t_start = now + replica as f64 * t_air;
            let fade: f64 = Exp1.sample(&mut self.fading_rng);
            let tx = Transmission {
                device: d,
                subchannel: action.subchannel,
                code: action.code,
                t_start,
                t_end: t_start + t_air,
                rx_power_w: received_power(action.power_dbm as f64, distance, fade, &self.cfg.phy),
            };
            let id = self.txs.len();
            self.txs.push(TxMeta { tx, packet, replica });
            self.active[action.subchannel].push(id);
            self.push(tx.t_end, EventKind::End(id));
        }
    }

    fn on_end(&mut self, id: usize, now: f64) -> Result<(), SimError> {
        let tx = self.txs[id].tx;
        let sc = tx.subchannel;
        let horizon = now - self.max_airtime;
        let txs = &self.txs;
        self.active[sc].retain(|&o| txs[o].tx.t_end >= horizon);

        let overlapping: Vec<Transmission> = self.active[sc]
            .iter()
            .filter(|&&o| o != id)
            .map(|&o| self.txs[o].tx)
            .filter(|o| o.overlaps(&tx))
            .collect();
        let jam = self.jamming.data_power_w(sc, tx.t_start, tx.t_end);
        let link = resolve_transmission(&tx, &overlapping, jam, &self.cfg.phy);
        let ack = deliver_ack(link.decoded(), sc, now, &self.jamming, &mut self.feedback_rng);

        let packet = self.txs[id].packet;
        let replica = self.txs[id].replica;
        let (device, packet_index, action, done) = {
            let p = &mut self.in_flight[packet];
            p.delivered |= link.decoded();
            p.ack |= ack;
            p.replicas_left -= 1;
            (p.device, p.packet_index, p.action, p.replicas_left == 0)
        };
        let energy_total = match self.in_flight[packet].action_index {
            Some(k) => self.space.energy(k),
            None => tx_energy(&action, self.cfg.payload_bytes, &self.cfg.phy).expect("validated"),
        };
        self.transmissions += 1;
        let record = TransmissionRecord {
            device,
            packet_index,
            replica,
            t_start: tx.t_start,
            airtime: tx.t_end - tx.t_start,
            action,
            snr_ok: link.snr_ok,
            sir_ok: link.sir_ok,
            ack_delivered: ack,
            energy_j: energy_total / action.repetitions as f64,
        };
        let bucket = (tx.t_start / self.cfg.metrics.bucket_s) as usize;
        if self.occupancy.len() <= bucket {
            self.occupancy.resize(bucket + 1, vec![0; self.cfg.action_space.subchannels]);
        }
        self.occupancy[bucket][sc] += 1;
        if self.opts.keep_records {
            self.records.push(record);
        }
        if done {
            self.finish_packet(packet, energy_total, now)?;
        }
        Ok(())
    }

    fn finish_packet(&mut self, packet: usize, energy: f64, now: f64) -> Result<(), SimError> {
        let p = &self.in_flight[packet];
        let reward = self.shaper.reward(p.ack, energy.max(self.space.e_min()))?;
        let d = p.device;
        let window = self.cfg.metrics.window;
        let dev = &mut self.devices[d];
        if let (DevicePolicy::Learner(state), Some(sel)) = (&mut dev.policy, p.selection) {
            state.update(sel, reward)?;
        }
        dev.window.push_back(p.ack);
        dev.window_hits += p.ack as usize;
        if dev.window.len() > window {
            let old = dev.window.pop_front().expect("non-empty");
            dev.window_hits -= old as usize;
        }
        let window_success = dev.window_hits as f64 / dev.window.len() as f64;
        self.packets.push(PacketOutcome {
            device: d,
            packet_index: p.packet_index,
            t_start: p.t_start,
            action: p.action,
            action_index: p.action_index,
            delivered: p.delivered,
            ack: p.ack,
            reward,
            energy_j: energy,
            window_success,
        });
        if self.devices[d].queued > 0 {
            self.transmit(d, now);
        }
        Ok(())
    }
}
