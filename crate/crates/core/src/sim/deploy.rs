use rand::Rng;
use rand_distr::{Distribution, Poisson};

/// Device positions around a gateway at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub radius_m: f64,
    pub positions: Vec<(f64, f64)>,
    pub traffic_rate_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeploymentSize {
    Count(usize),
    /// Devices per square metre.
    Density(f64),
}

impl Deployment {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn distance(&self, device: usize) -> f64 {
        let (x, y) = self.positions[device];
        x.hypot(y)
    }
}

/// Uniform points on a disc; Poisson-distributed count in density mode.
pub fn deploy_ppp<R: Rng + ?Sized>(radius_m: f64, size: DeploymentSize, traffic_rate_hz: f64, rng: &mut R) -> Deployment {
    assert!(radius_m > 0.0, "radius must be positive");
    let count = match size {
        DeploymentSize::Count(n) => n,
        DeploymentSize::Density(lambda) => {
            let mean = lambda * std::f64::consts::PI * radius_m * radius_m;
            if mean > 0.0 {
                Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
            } else {
                0
            }
        }
    };
    let positions = (0..count).map(|_| uniform_in_disc(radius_m, rng)).collect();
    Deployment {
        radius_m,
        positions,
        traffic_rate_hz,
    }
}

pub(crate) fn uniform_in_disc<R: Rng + ?Sized>(radius_m: f64, rng: &mut R) -> (f64, f64) {
    let r = radius_m * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    (r * theta.cos(), r * theta.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_when_count_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(deploy_ppp(100.0, DeploymentSize::Count(0), 1.0, &mut rng).is_empty());
    }

    #[test]
    fn points_inside_disc_and_area_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = deploy_ppp(2000.0, DeploymentSize::Count(20_000), 1.0, &mut rng);
        assert_eq!(d.len(), 20_000);
        assert!((0..d.len()).all(|i| d.distance(i) <= 2000.0));
        // Half the area lies inside r = R / sqrt(2).
        let inner = (0..d.len()).filter(|&i| d.distance(i) <= 2000.0 / 2f64.sqrt()).count();
        assert!((inner as f64 / 20_000.0 - 0.5).abs() < 0.015);
    }

    #[test]
    fn poisson_count_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let radius = 1000.0;
        let lambda = 100.0 / (std::f64::consts::PI * radius * radius);
        let draws = 10_000;
        let total: usize = (0..draws)
            .map(|_| deploy_ppp(radius, DeploymentSize::Density(lambda), 1.0, &mut rng).len())
            .sum();
        let mean = total as f64 / draws as f64;
        assert!((mean - 100.0).abs() < 3.0, "mean {mean}");
    }
}
