use rand::Rng;

use super::JammingSchedule;
use crate::phy::{db_to_linear, snr_threshold_db, PhyConfig};

/// One replica on the air, with its faded received power at the gateway.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub device: usize,
    pub subchannel: usize,
    pub code: u8,
    pub t_start: f64,
    pub t_end: f64,
    pub rx_power_w: f64,
}

impl Transmission {
    pub fn overlaps(&self, other: &Transmission) -> bool {
        self.subchannel == other.subchannel && self.t_start < other.t_end && other.t_start < self.t_end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkOutcome {
    pub snr_ok: bool,
    pub sir_ok: bool,
}

impl LinkOutcome {
    pub fn decoded(&self) -> bool {
        self.snr_ok && self.sir_ok
    }
}

/// Capture decision for `tx` against the transmissions overlapping it.
///
/// `overlapping` may contain other spreading codes; only same-code entries
/// count as interference. `jam_power_w` is added to the interference sum.
pub fn resolve_transmission(tx: &Transmission, overlapping: &[Transmission], jam_power_w: f64, cfg: &PhyConfig) -> LinkOutcome {
    let gamma_n = db_to_linear(snr_threshold_db(tx.code, cfg).expect("validated code"));
    let snr_ok = tx.rx_power_w >= gamma_n * cfg.noise_power_w();
    let interference: f64 = overlapping
        .iter()
        .filter(|o| o.code == tx.code && o.subchannel == tx.subchannel)
        .map(|o| o.rx_power_w)
        .sum::<f64>()
        + jam_power_w;
    let sir_ok = tx.rx_power_w >= cfg.sir_threshold_linear() * interference;
    LinkOutcome { snr_ok, sir_ok }
}

/// Whether the gateway's ACK for a decoded replica reaches the device.
pub fn deliver_ack<R: Rng + ?Sized>(decoded: bool, subchannel: usize, t: f64, jamming: &JammingSchedule, rng: &mut R) -> bool {
    if !decoded {
        return false;
    }
    let drop = jamming.feedback_drop_probability(subchannel, t);
    if drop <= 0.0 {
        return true;
    }
    rng.random::<f64>() >= drop
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::dbm_to_watts;
    use crate::scenario::{JamEntry, JamMode};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tx(code: u8, rx_power_w: f64) -> Transmission {
        Transmission {
            device: 0,
            subchannel: 0,
            code,
            t_start: 0.0,
            t_end: 1.0,
            rx_power_w,
        }
    }

    #[test]
    fn noise_limited_success_above_threshold() {
        let cfg = PhyConfig::default();
        // 10 dB above the SF7 requirement.
        let p = 10.0 * db_to_linear(-6.0) * cfg.noise_power_w();
        let out = resolve_transmission(&tx(7, p), &[], 0.0, &cfg);
        assert!(out.snr_ok && out.sir_ok);
        let weak = resolve_transmission(&tx(7, 0.5 * db_to_linear(-6.0) * cfg.noise_power_w()), &[], 0.0, &cfg);
        assert!(!weak.snr_ok);
    }

    #[test]
    fn symmetric_collision_fails_both() {
        let cfg = PhyConfig::default();
        let p = 1e-9;
        let a = tx(9, p);
        let b = Transmission { device: 1, ..a };
        assert!(!resolve_transmission(&a, &[b], 0.0, &cfg).sir_ok);
        assert!(!resolve_transmission(&b, &[a], 0.0, &cfg).sir_ok);
    }

    #[test]
    fn other_codes_do_not_interfere() {
        let cfg = PhyConfig::default();
        let a = tx(9, 1e-9);
        let b = Transmission { device: 1, code: 10, rx_power_w: 1e-6, ..a };
        assert!(resolve_transmission(&a, &[b], 0.0, &cfg).sir_ok);
    }

    #[test]
    fn data_jammer_counts_as_interference() {
        let cfg = PhyConfig::default();
        let a = tx(9, 1e-12);
        assert!(!resolve_transmission(&a, &[], dbm_to_watts(-80.0), &cfg).sir_ok);
    }

    #[test]
    fn ack_delivery() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let none = JammingSchedule::default();
        assert!(!deliver_ack(false, 0, 1.0, &none, &mut rng));
        assert!(deliver_ack(true, 0, 1.0, &none, &mut rng));
        let jam = JammingSchedule::new(vec![JamEntry {
            subchannel: 0,
            t_start: 0.0,
            t_end: 10.0,
            mode: JamMode::Feedback,
            severity: 1.0,
        }]);
        for i in 0..100 {
            assert!(!deliver_ack(true, 0, i as f64 * 0.09, &jam, &mut rng));
        }
        assert!(deliver_ack(true, 1, 5.0, &jam, &mut rng));
        assert!(deliver_ack(true, 0, 10.0, &jam, &mut rng));
    }

    proptest! {
        #[test]
        fn raising_sir_threshold_never_helps(
            signal in 1e-15f64..1e-9,
            interferers in proptest::collection::vec(1e-15f64..1e-9, 0..6),
            lo in -10.0f64..20.0,
            delta in 0.0f64..10.0,
        ) {
            let others: Vec<_> = interferers.iter().enumerate().map(|(i, p)| Transmission { device: i + 1, ..tx(8, *p) }).collect();
            let mut cfg = PhyConfig::default();
            cfg.sir_threshold_db = lo;
            let easy = resolve_transmission(&tx(8, signal), &others, 0.0, &cfg).sir_ok;
            cfg.sir_threshold_db = lo + delta;
            let hard = resolve_transmission(&tx(8, signal), &others, 0.0, &cfg).sir_ok;
            prop_assert!(!hard || easy);
        }

        #[test]
        fn overlap_is_symmetric(s1 in 0.0f64..10.0, d1 in 0.01f64..2.0, s2 in 0.0f64..10.0, d2 in 0.01f64..2.0) {
            let a = Transmission { t_start: s1, t_end: s1 + d1, ..tx(7, 1.0) };
            let b = Transmission { device: 1, t_start: s2, t_end: s2 + d2, ..tx(7, 1.0) };
            prop_assert_eq!(a.overlaps(&b), b.overlaps(&a));
        }
    }
}
