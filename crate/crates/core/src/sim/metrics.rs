use serde::Serialize;

use super::PacketOutcome;
use crate::bandit::Action;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeBucket {
    pub t_start: f64,
    pub packets: u32,
    pub acks: u32,
    pub delivered: u32,
    /// Sum of the per-packet trailing-window success values.
    pub window_sum: f64,
    pub energy_j: f64,
    /// Replicas started on each subchannel.
    pub occupancy: Vec<u32>,
}

impl TimeBucket {
    pub fn window_success(&self) -> Option<f64> {
        (self.packets > 0).then(|| self.window_sum / self.packets as f64)
    }

    pub fn ack_rate(&self) -> Option<f64> {
        (self.packets > 0).then(|| self.acks as f64 / self.packets as f64)
    }

    pub fn delivery_rate(&self) -> Option<f64> {
        (self.packets > 0).then(|| self.delivered as f64 / self.packets as f64)
    }

    pub fn replicas(&self) -> u32 {
        self.occupancy.iter().sum()
    }
}

/// Aggregates of one replication, indexed by packet number and by time bucket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSeries {
    pub window: usize,
    pub bucket_s: f64,
    /// Mean over devices of the trailing-window ACK rate at packet `k`.
    pub window_success: Vec<f64>,
    pub devices_at_index: Vec<u32>,
    /// Mean energy spent on packet `k`.
    pub energy_per_packet: Vec<f64>,
    pub buckets: Vec<TimeBucket>,
    /// Chosen action of every packet, per device, in completion order.
    pub action_trace: Vec<Vec<Action>>,
    pub total_packets: u64,
    pub total_acks: u64,
    pub total_delivered: u64,
    pub total_energy_j: f64,
}

impl MetricsSeries {
    pub fn from_packets(packets: &[PacketOutcome], occupancy: Vec<Vec<u32>>, devices: usize, cfg: &ScenarioConfig) -> Self {
        let bucket_s = cfg.metrics.bucket_s;
        let subchannels = cfg.action_space.subchannels;
        let max_index = packets.iter().map(|p| p.packet_index as usize + 1).max().unwrap_or(0);
        let mut window_success = vec![0.0; max_index];
        let mut devices_at_index = vec![0u32; max_index];
        let mut energy_per_packet = vec![0.0; max_index];
        let mut action_trace = vec![Vec::new(); devices];

        let n_buckets = packets
            .iter()
            .map(|p| (p.t_start / bucket_s) as usize + 1)
            .max()
            .unwrap_or(0)
            .max(occupancy.len());
        let mut buckets: Vec<TimeBucket> = (0..n_buckets)
            .map(|b| TimeBucket {
                t_start: b as f64 * bucket_s,
                packets: 0,
                acks: 0,
                delivered: 0,
                window_sum: 0.0,
                energy_j: 0.0,
                occupancy: occupancy.get(b).cloned().unwrap_or_else(|| vec![0; subchannels]),
            })
            .collect();

        let (mut total_acks, mut total_delivered, mut total_energy_j) = (0u64, 0u64, 0.0);
        for p in packets {
            let k = p.packet_index as usize;
            window_success[k] += p.window_success;
            energy_per_packet[k] += p.energy_j;
            devices_at_index[k] += 1;
            action_trace[p.device].push(p.action);

            let b = &mut buckets[(p.t_start / bucket_s) as usize];
            b.packets += 1;
            b.acks += p.ack as u32;
            b.delivered += p.delivered as u32;
            b.window_sum += p.window_success;
            b.energy_j += p.energy_j;

            total_acks += p.ack as u64;
            total_delivered += p.delivered as u64;
            total_energy_j += p.energy_j;
        }
        for k in 0..max_index {
            let n = devices_at_index[k].max(1) as f64;
            window_success[k] /= n;
            energy_per_packet[k] /= n;
        }
        Self {
            window: cfg.metrics.window,
            bucket_s,
            window_success,
            devices_at_index,
            energy_per_packet,
            buckets,
            action_trace,
            total_packets: packets.len() as u64,
            total_acks,
            total_delivered,
            total_energy_j,
        }
    }

    /// Mean of the windowed success over the final quarter of packet indices.
    pub fn steady_state_success(&self) -> f64 {
        final_quartile_mean(&self.window_success)
    }

    pub fn convergence_index(&self) -> Option<usize> {
        convergence_index(&self.window_success)
    }

    pub fn mean_energy_per_packet(&self) -> f64 {
        self.total_energy_j / self.total_packets.max(1) as f64
    }

    pub fn energy_per_delivered_packet(&self) -> f64 {
        if self.total_delivered == 0 {
            f64::INFINITY
        } else {
            self.total_energy_j / self.total_delivered as f64
        }
    }

    pub fn ack_rate(&self) -> f64 {
        self.total_acks as f64 / self.total_packets.max(1) as f64
    }

    pub fn delivery_rate(&self) -> f64 {
        self.total_delivered as f64 / self.total_packets.max(1) as f64
    }

    fn buckets_in(&self, t0: f64, t1: f64) -> impl Iterator<Item = &TimeBucket> {
        let bucket_s = self.bucket_s;
        self.buckets
            .iter()
            .filter(move |b| b.t_start >= t0 && b.t_start + bucket_s <= t1)
    }

    /// Packet-weighted mean windowed success over buckets inside `[t0, t1)`.
    pub fn window_success_between(&self, t0: f64, t1: f64) -> Option<f64> {
        let (sum, n) = self
            .buckets_in(t0, t1)
            .fold((0.0, 0u32), |(s, n), b| (s + b.window_sum, n + b.packets));
        (n > 0).then(|| sum / n as f64)
    }

    /// Fraction of packets delivered to the gateway within `[t0, t1)`.
    pub fn delivery_rate_between(&self, t0: f64, t1: f64) -> Option<f64> {
        let (d, n) = self
            .buckets_in(t0, t1)
            .fold((0u32, 0u32), |(d, n), b| (d + b.delivered, n + b.packets));
        (n > 0).then(|| d as f64 / n as f64)
    }

    /// Share of replicas within `[t0, t1)` sent on any of `subchannels`.
    pub fn occupancy_share_between(&self, subchannels: &[usize], t0: f64, t1: f64) -> Option<f64> {
        let (hit, all) = self.buckets_in(t0, t1).fold((0u32, 0u32), |(h, a), b| {
            let on: u32 = subchannels.iter().map(|&s| b.occupancy[s]).sum();
            (h + on, a + b.replicas())
        });
        (all > 0).then(|| hit as f64 / all as f64)
    }
}

pub fn final_quartile_mean(series: &[f64]) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    let tail = &series[series.len() * 3 / 4..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// First index after which the series stays within 5% of its final-quarter mean.
pub fn convergence_index(series: &[f64]) -> Option<usize> {
    if series.is_empty() {
        return None;
    }
    let target = final_quartile_mean(series);
    let band = 0.05 * target.abs();
    match series.iter().rposition(|v| (v - target).abs() > band) {
        None => Some(0),
        Some(k) if k + 1 < series.len() => Some(k + 1),
        Some(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_of_step() {
        let mut s = vec![0.2; 10];
        s.extend(vec![0.9; 30]);
        assert_eq!(convergence_index(&s), Some(10));
        assert_eq!(convergence_index(&[0.5; 8]), Some(0));
        assert_eq!(convergence_index(&[]), None);
    }

    #[test]
    fn final_quartile() {
        let s: Vec<f64> = (0..8).map(|k| k as f64).collect();
        assert_eq!(final_quartile_mean(&s), 6.5);
    }
}
