//! Snapshot Monte-Carlo probes of the capture model.
//!
//! Instead of running the full event loop, each attempt draws the set of
//! transmissions that overlap a probe packet directly: a space-time Poisson
//! field of packets from a device population with Poisson traffic. The probe
//! is then resolved with the same [`resolve_transmission`] the simulator uses.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use super::channel::{resolve_transmission, Transmission};
use super::deploy::uniform_in_disc;
use crate::phy::{airtime, received_power, PhyConfig};

/// A single-code, single-subchannel, single-power population.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSetup {
    pub phy: PhyConfig,
    pub code: u8,
    pub power_dbm: f64,
    pub payload_bytes: u32,
    pub radius_m: f64,
    /// Devices per square metre.
    pub density_per_m2: f64,
    /// Per-device packet rate.
    pub traffic_rate_hz: f64,
}

impl ProbeSetup {
    pub fn airtime(&self) -> f64 {
        airtime(self.code, self.payload_bytes, &self.phy).expect("valid code")
    }

    /// Mean number of packets whose airtime intersects one probe packet.
    pub fn mean_overlapping(&self) -> f64 {
        let area = std::f64::consts::PI * self.radius_m * self.radius_m;
        self.density_per_m2 * area * self.traffic_rate_hz * 2.0 * self.airtime()
    }
}

/// Fraction of `attempts` probe packets at distance `z` that are decoded.
pub fn snapshot_success_rate<R: Rng + ?Sized>(setup: &ProbeSetup, z: f64, attempts: usize, rng: &mut R) -> f64 {
    let t_air = setup.airtime();
    let mean = setup.mean_overlapping();
    let count = (mean > 0.0).then(|| Poisson::new(mean).expect("positive mean"));
    let mut interferers = Vec::new();
    let mut ok = 0usize;
    for _ in 0..attempts {
        let fade: f64 = Exp1.sample(rng);
        let probe = Transmission {
            device: 0,
            subchannel: 0,
            code: setup.code,
            t_start: 0.0,
            t_end: t_air,
            rx_power_w: received_power(setup.power_dbm, z, fade, &setup.phy),
        };
        interferers.clear();
        let n = count.as_ref().map_or(0, |p| p.sample(rng) as usize);
        for i in 0..n {
            let (x, y) = uniform_in_disc(setup.radius_m, rng);
            // Start uniform over the vulnerable window (-T, T).
            let t_start = t_air * (2.0 * rng.random::<f64>() - 1.0);
            let h: f64 = Exp1.sample(rng);
            interferers.push(Transmission {
                device: i + 1,
                subchannel: 0,
                code: setup.code,
                t_start,
                t_end: t_start + t_air,
                rx_power_w: received_power(setup.power_dbm, x.hypot(y), h, &setup.phy),
            });
        }
        if resolve_transmission(&probe, &interferers, 0.0, &setup.phy).decoded() {
            ok += 1;
        }
    }
    ok as f64 / attempts as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{db_to_linear, dbm_to_watts, snr_threshold_db};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn isolated_device_matches_rayleigh_closed_form() {
        let setup = ProbeSetup {
            phy: PhyConfig::default(),
            code: 9,
            power_dbm: 14.0,
            payload_bytes: 20,
            radius_m: 1000.0,
            density_per_m2: 0.0,
            traffic_rate_hz: 0.01,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for z in [150.0f64, 250.0, 350.0] {
            let gamma = db_to_linear(snr_threshold_db(9, &setup.phy).unwrap());
            let closed = (-gamma * setup.phy.noise_power_w() * z.powi(4) / (dbm_to_watts(14.0) * setup.phy.path_gain)).exp();
            let empirical = snapshot_success_rate(&setup, z, 100_000, &mut rng);
            assert!((empirical - closed).abs() < 0.01, "z={z}: {empirical} vs {closed}");
        }
    }
}
