use rand::Rng;

use super::BanditError;

/// Weights above this trigger a sum-renormalization.
const RENORMALIZE_ABOVE: f64 = 1e100;

/// EXP3 memory: one positive weight per arm plus the mixing parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Exp3State {
    weights: Vec<f64>,
    rho: f64,
}

impl Exp3State {
    pub fn new(arms: usize, rho: f64) -> Result<Self, BanditError> {
        if arms == 0 {
            return Err(BanditError::EmptyActionSpace);
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(BanditError::InvalidParameter(format!("rho = {rho} not in (0, 1]")));
        }
        Ok(Self {
            weights: vec![1.0; arms],
            rho,
        })
    }

    pub fn from_weights(weights: Vec<f64>, rho: f64) -> Result<Self, BanditError> {
        let mut s = Self::new(weights.len(), rho)?;
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(BanditError::InvalidParameter("weights must be positive and finite".into()));
        }
        s.weights = weights;
        Ok(s)
    }

    pub fn arms(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `(1 - rho) * w_k / sum(w) + rho / |A|`.
    pub fn distribution(&self) -> Vec<f64> {
        debug_assert!(self.weights.iter().all(|w| w.is_finite() && *w > 0.0));
        let total: f64 = self.weights.iter().sum();
        let floor = self.rho / self.weights.len() as f64;
        self.weights
            .iter()
            .map(|w| (1.0 - self.rho) * w / total + floor)
            .collect()
    }

    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample(&self.distribution(), rng)
    }

    /// Multiplies the played arm's weight by `exp(rho * reward / (|A| * p_k))`.
    pub fn update(&mut self, k: usize, reward: f64, p_k: f64) -> Result<(), BanditError> {
        if k >= self.weights.len() {
            return Err(BanditError::IndexOutOfRange {
                index: k,
                len: self.weights.len(),
            });
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(BanditError::RewardOutOfRange(reward));
        }
        if !(p_k > 0.0 && p_k <= 1.0) {
            return Err(BanditError::InvalidParameter(format!("p_k = {p_k}")));
        }
        if reward == 0.0 {
            return Ok(());
        }
        let arms = self.weights.len() as f64;
        self.weights[k] *= (self.rho * reward / (arms * p_k)).exp();
        if self.weights[k] > RENORMALIZE_ABOVE {
            self.renormalize();
        }
        Ok(())
    }

    /// Divides all weights by their sum; the distribution is unchanged.
    pub fn renormalize(&mut self) {
        let total: f64 = self.weights.iter().sum();
        for w in &mut self.weights {
            // Keep weights strictly positive even for arms that fell far behind.
            *w = (*w / total).max(f64::MIN_POSITIVE);
        }
    }

    pub(super) fn seed_log_weights(&mut self, log_weights: &[f64]) {
        for (w, &l) in self.weights.iter_mut().zip(log_weights) {
            *w = l.exp();
        }
    }
}

/// Inverse-CDF draw from a probability vector using one uniform variate.
pub fn sample<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // Rounding left the cumulative sum just under 1: take the last non-zero entry.
    dist.iter().rposition(|&p| p > 0.0).unwrap_or(dist.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_weights_give_uniform_distribution() {
        for rho in [0.1, 0.4, 1.0] {
            let s = Exp3State::new(4, rho).unwrap();
            for p in s.distribution() {
                assert!((p - 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mixed_distribution_arithmetic() {
        let s = Exp3State::from_weights(vec![2.0, 1.0, 1.0], 0.4).unwrap();
        let d = s.distribution();
        // 0.6 * 2/4 + 0.4/3 and 0.6 * 1/4 + 0.4/3
        assert!((d[0] - (0.3 + 0.4 / 3.0)).abs() < 1e-15);
        assert!((d[1] - (0.15 + 0.4 / 3.0)).abs() < 1e-15);
        assert!((d[0] - 0.433_333_333_333).abs() < 1e-12);
        assert!((d[2] - 0.283_333_333_333).abs() < 1e-12);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_exploration_ignores_weights() {
        let s = Exp3State::from_weights(vec![100.0, 1.0, 3.0, 0.5], 1.0).unwrap();
        for p in s.distribution() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_distribution_always_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(sample(&[1.0, 0.0, 0.0], &mut rng), 0);
        }
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            counts[sample(&[0.25; 4], &mut rng)] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let dist = [0.1, 0.2, 0.3, 0.4];
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| sample(&dist, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn weight_update_arithmetic() {
        let mut s = Exp3State::new(4, 0.4).unwrap();
        s.update(1, 1.0, 0.25).unwrap();
        assert!((s.weights()[1] - 0.4f64.exp()).abs() < 1e-15);
        assert!((s.weights()[1] - 1.4918).abs() < 1e-4);
        assert_eq!(s.weights()[0], 1.0);

        let before = s.clone();
        s.update(2, 0.0, 0.25).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn renormalization_keeps_distribution() {
        let mut s = Exp3State::from_weights(vec![1e90, 3e89, 5.0, 1.0], 0.4).unwrap();
        let before = s.distribution();
        s.renormalize();
        for (a, b) in before.iter().zip(s.distribution()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn large_weights_are_renormalized() {
        let mut s = Exp3State::from_weights(vec![1e99, 1.0], 0.4).unwrap();
        // exp(0.4 / (2 * 0.01)) = e^20 pushes past the threshold.
        s.update(0, 1.0, 0.01).unwrap();
        assert!(s.weights().iter().all(|w| w.is_finite() && *w > 0.0 && *w <= 1.0));
    }

    proptest! {
        #[test]
        fn distribution_is_valid(weights in proptest::collection::vec(1e-30f64..1e30, 1..100), rho in 0.01f64..=1.0) {
            let s = Exp3State::from_weights(weights, rho).unwrap();
            let d = s.distribution();
            let floor = rho / d.len() as f64;
            prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for p in d {
                prop_assert!(p >= floor * (1.0 - 1e-12) && p <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn argmax_invariant_under_scaling(weights in proptest::collection::vec(1e-3f64..1e3, 2..20), scale in 1e-6f64..1e6) {
            let a = Exp3State::from_weights(weights.clone(), 0.4).unwrap().distribution();
            let b = Exp3State::from_weights(weights.iter().map(|w| w * scale).collect(), 0.4).unwrap().distribution();
            let argmax = |d: &[f64]| d.iter().enumerate().fold(0, |best, (k, p)| if *p > d[best] { k } else { best });
            let ia = argmax(&a);
            let ib = argmax(&b);
            prop_assert!(ia == ib || (a[ia] - a[ib]).abs() < 1e-12);
        }
    }
}
