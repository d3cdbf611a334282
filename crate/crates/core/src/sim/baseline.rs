//! Non-learning reference policies.

use rand::Rng;

use super::Deployment;
use crate::bandit::Action;
use crate::phy::airtime;
use crate::scenario::ScenarioConfig;

/// Devices per code so that per-code airtime load `n_c * T_c` is balanced.
///
/// Every code gets one device first (when there are enough devices); each
/// further device goes to the code whose load would stay smallest. The
/// resulting loads differ by at most the longest airtime.
pub fn equal_split_counts(devices: usize, airtimes: &[f64]) -> Vec<usize> {
    let mut counts = vec![0usize; airtimes.len()];
    let mut remaining = devices;
    for c in counts.iter_mut() {
        if remaining == 0 {
            break;
        }
        *c = 1;
        remaining -= 1;
    }
    for _ in 0..remaining {
        let mut best = 0;
        let mut best_load = f64::INFINITY;
        for (k, (&n, &t)) in counts.iter().zip(airtimes).enumerate() {
            let load = (n + 1) as f64 * t;
            if load < best_load {
                best_load = load;
                best = k;
            }
        }
        counts[best] += 1;
    }
    counts
}

/// Central static assignment: nearest devices get the fastest codes,
/// subchannels are dealt round-robin in distance order, power is fixed.
pub fn equal_split_assignment(deployment: &Deployment, cfg: &ScenarioConfig) -> Vec<Action> {
    let mut codes = cfg.action_space.codes.clone();
    codes.sort_unstable();
    let airtimes: Vec<f64> = codes
        .iter()
        .map(|&c| airtime(c, cfg.payload_bytes, &cfg.phy).expect("validated code"))
        .collect();
    let counts = equal_split_counts(deployment.len(), &airtimes);

    let mut order: Vec<usize> = (0..deployment.len()).collect();
    order.sort_by(|&a, &b| deployment.distance(a).total_cmp(&deployment.distance(b)).then(a.cmp(&b)));

    let repetitions = cfg.action_space.repetitions.iter().copied().min().unwrap_or(1);
    let mut out = vec![
        Action {
            power_dbm: cfg.baseline.power_dbm,
            subchannel: 0,
            code: codes[0],
            repetitions,
        };
        deployment.len()
    ];
    let mut rank = 0;
    for (&code, &n) in codes.iter().zip(&counts) {
        for _ in 0..n {
            let device = order[rank];
            out[device].code = code;
            out[device].subchannel = rank % cfg.action_space.subchannels;
            rank += 1;
        }
    }
    out
}

pub fn baseline_equal_split(device: usize, deployment: &Deployment, cfg: &ScenarioConfig) -> Action {
    equal_split_assignment(deployment, cfg)[device]
}

/// Uniformly random subchannel with the configured fixed code and power.
pub fn baseline_random<R: Rng + ?Sized>(rng: &mut R, cfg: &ScenarioConfig) -> Action {
    Action {
        power_dbm: cfg.baseline.power_dbm,
        subchannel: rng.random_range(0..cfg.action_space.subchannels),
        code: cfg.baseline.code,
        repetitions: cfg.action_space.repetitions.iter().copied().min().unwrap_or(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::CODES;
    use crate::scenario::ScenarioConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(subchannels: usize) -> ScenarioConfig {
        ScenarioConfig::from_json(&format!(
            r#"{{
                "deployment": {{"radius_m": 1000, "count": 6, "traffic_rate_hz": 0.01}},
                "action_space": {{"powers_dbm": [14], "subchannels": {subchannels}, "codes": [7, 8, 9, 10, 11, 12]}},
                "policy": "equal_split",
                "horizon": {{"packets": 10}}
            }}"#
        ))
        .unwrap()
    }

    fn line(n: usize) -> Deployment {
        // Listed far to near so the sort has work to do.
        Deployment {
            radius_m: 1000.0,
            positions: (0..n).map(|i| (1000.0 - 10.0 * i as f64, 0.0)).collect(),
            traffic_rate_hz: 0.01,
        }
    }

    #[test]
    fn six_devices_one_per_code_nearest_fastest() {
        let d = line(6);
        let a = equal_split_assignment(&d, &cfg(3));
        let nearest = 5;
        assert_eq!(a[nearest].code, 7);
        assert_eq!(a[0].code, 12);
        let mut codes: Vec<u8> = a.iter().map(|x| x.code).collect();
        codes.sort_unstable();
        assert_eq!(codes, CODES.to_vec());
        assert!(a.iter().all(|x| x.power_dbm == 14));
        assert_eq!(baseline_equal_split(nearest, &d, &cfg(3)), a[nearest]);
    }

    #[test]
    fn subchannels_round_robin_by_distance() {
        let d = line(6);
        let a = equal_split_assignment(&d, &cfg(3));
        // Rank 0 is device 5, rank 1 device 4, ...
        for rank in 0..6 {
            assert_eq!(a[5 - rank].subchannel, rank % 3);
        }
    }

    #[test]
    fn airtime_loads_balanced_within_one_packet() {
        let c = cfg(1);
        let airtimes: Vec<f64> = CODES.iter().map(|&k| airtime(k, 20, &c.phy).unwrap()).collect();
        let longest = airtimes.iter().copied().fold(0.0, f64::max);
        for n in [6, 7, 13, 50, 500, 1234] {
            let counts = equal_split_counts(n, &airtimes);
            assert_eq!(counts.iter().sum::<usize>(), n);
            let loads: Vec<f64> = counts.iter().zip(&airtimes).map(|(k, t)| *k as f64 * t).collect();
            let spread = loads.iter().copied().fold(0.0, f64::max) - loads.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(spread <= longest + 1e-12, "n={n} spread={spread}");
        }
    }

    #[test]
    fn assignment_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = super::super::deploy_ppp(1000.0, super::super::DeploymentSize::Count(40), 0.01, &mut rng);
        assert_eq!(equal_split_assignment(&d, &cfg(3)), equal_split_assignment(&d, &cfg(3)));
    }

    #[test]
    fn random_subchannel_frequencies() {
        let c = cfg(6);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 60_000;
        let mut counts = [0usize; 6];
        for _ in 0..n {
            let a = baseline_random(&mut rng, &c);
            assert_eq!((a.code, a.power_dbm), (7, 14));
            counts[a.subchannel] += 1;
        }
        for k in counts {
            assert!((k as f64 / n as f64 - 1.0 / 6.0).abs() < 0.01);
        }
    }

    #[test]
    fn random_with_one_subchannel_and_replay() {
        let c = cfg(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| baseline_random(&mut rng, &c).subchannel == 0));
        let c6 = cfg(6);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| baseline_random(&mut rng, &c6).subchannel).collect::<Vec<_>>()
        };
        assert_eq!(draw(4), draw(4));
    }
}
