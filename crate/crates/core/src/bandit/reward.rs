use super::{ActionSpace, BanditError};

fn check(e_k: f64, e_min: f64, beta: f64) -> Result<(), BanditError> {
    if !(e_k.is_finite() && e_min.is_finite() && e_k > 0.0 && e_min > 0.0) {
        return Err(BanditError::NonPositiveEnergy { e_k, e_min });
    }
    if e_k < e_min {
        return Err(BanditError::EnergyBelowMinimum { e_k, e_min });
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(BanditError::BetaOutOfRange(beta));
    }
    Ok(())
}

/// `ack * [(1 - beta) + beta * e_min / e_k]`.
///
/// The cheapest successful action earns exactly 1, a failure earns 0, and the
/// reward never increases with the energy spent.
pub fn shaped_reward(ack: bool, e_k: f64, e_min: f64, beta: f64) -> Result<f64, BanditError> {
    check(e_k, e_min, beta)?;
    if !ack {
        return Ok(0.0);
    }
    Ok((1.0 - beta) + beta * e_min / e_k)
}

/// The un-inverted form `ack * [(1 - beta) + beta * e_k / e_min]`.
///
/// Unbounded above in `e_k`, so callers that feed a learner need to rescale it
/// (see [`RewardShaper`]).
pub fn shaped_reward_literal(ack: bool, e_k: f64, e_min: f64, beta: f64) -> Result<f64, BanditError> {
    check(e_k, e_min, beta)?;
    if !ack {
        return Ok(0.0);
    }
    Ok((1.0 - beta) + beta * e_k / e_min)
}

/// Reward function bound to one action space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardShaper {
    beta: f64,
    literal_eq3: bool,
    e_min: f64,
    e_max: f64,
}

impl RewardShaper {
    pub fn new(space: &ActionSpace, beta: f64, literal_eq3: bool) -> Result<Self, BanditError> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(BanditError::BetaOutOfRange(beta));
        }
        Ok(Self {
            beta,
            literal_eq3,
            e_min: space.e_min(),
            e_max: space.e_max(),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Reward in `[0, 1]`. The literal form is divided by its maximum over the
    /// action space so that learners see the same range either way.
    pub fn reward(&self, ack: bool, e_k: f64) -> Result<f64, BanditError> {
        if self.literal_eq3 {
            let top = shaped_reward_literal(true, self.e_max, self.e_min, self.beta)?;
            Ok(shaped_reward_literal(ack, e_k, self.e_min, self.beta)? / top)
        } else {
            shaped_reward(ack, e_k, self.e_min, self.beta)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_values() {
        assert_eq!(shaped_reward(false, 3.0, 1.0, 0.4).unwrap(), 0.0);
        assert_eq!(shaped_reward(true, 1.0, 1.0, 0.4).unwrap(), 1.0);
        let r = shaped_reward(true, 2.0, 1.0, 0.4).unwrap();
        assert!((r - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(shaped_reward(true, 0.0, 0.0, 0.4).is_err());
        assert!(shaped_reward(true, -1.0, 1.0, 0.4).is_err());
        assert!(shaped_reward(true, 1.0, 2.0, 0.4).is_err());
        assert_eq!(
            shaped_reward(true, 2.0, 1.0, 1.2),
            Err(BanditError::BetaOutOfRange(1.2))
        );
    }

    #[test]
    fn literal_form_grows_with_energy() {
        let lo = shaped_reward_literal(true, 1.0, 1.0, 0.4).unwrap();
        let hi = shaped_reward_literal(true, 2.0, 1.0, 0.4).unwrap();
        assert_eq!(lo, 1.0);
        assert!((hi - 1.4).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn reward_in_unit_interval(ack: bool, e_min in 1e-6f64..1.0, ratio in 1.0f64..1e3, beta in 0.0f64..=1.0) {
            let r = shaped_reward(ack, e_min * ratio, e_min, beta).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert_eq!(r == 0.0, !ack);
        }

        #[test]
        fn reward_non_increasing_in_energy(e_min in 1e-6f64..1.0, a in 1.0f64..100.0, b in 1.0f64..100.0, beta in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let r_lo = shaped_reward(true, e_min * lo, e_min, beta).unwrap();
            let r_hi = shaped_reward(true, e_min * hi, e_min, beta).unwrap();
            prop_assert!(r_hi <= r_lo);
        }
    }
}
