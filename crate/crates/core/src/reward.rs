//! Reward distributions on [0, 1] parameterized by their mean.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Family of the per-pair reward distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardKind {
    Bernoulli,
    /// Normal with scale `sigma`, truncated to [0, 1] and shifted so that the
    /// truncated mean equals the pair mean.
    Gaussian { sigma: f64 },
    PointMass,
}

impl Default for RewardKind {
    fn default() -> Self {
        RewardKind::Bernoulli
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardName {
    Bernoulli,
    Gaussian,
    PointMass,
}

impl RewardKind {
    pub fn from_parts(name: RewardName, sigma: Option<f64>) -> Result<Self> {
        match (name, sigma) {
            (RewardName::Bernoulli, _) => Ok(RewardKind::Bernoulli),
            (RewardName::PointMass, _) => Ok(RewardKind::PointMass),
            (RewardName::Gaussian, Some(s)) if s.is_finite() && s > 0.0 => Ok(RewardKind::Gaussian { sigma: s }),
            (RewardName::Gaussian, Some(s)) => Err(Error::param("sigma", format!("must be a positive finite number, got {s}"))),
            (RewardName::Gaussian, None) => Err(Error::param("sigma", "gaussian rewards need a sigma")),
        }
    }

    pub fn name(&self) -> RewardName {
        match self {
            RewardKind::Bernoulli => RewardName::Bernoulli,
            RewardKind::Gaussian { .. } => RewardName::Gaussian,
            RewardKind::PointMass => RewardName::PointMass,
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            RewardKind::Gaussian { sigma } => Some(*sigma),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Bernoulli,
    Point,
    Trunc { loc: f64, sigma: f64, cdf_lo: f64, cdf_hi: f64 },
}

/// A reward distribution with a fixed mean in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct RewardDist {
    mean: f64,
    shape: Shape,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

fn truncated_mean(loc: f64, sigma: f64, z: &Normal) -> f64 {
    let a = (0.0 - loc) / sigma;
    let b = (1.0 - loc) / sigma;
    let mass = z.cdf(b) - z.cdf(a);
    if mass <= 1e-300 {
        return if loc < 0.5 { 0.0 } else { 1.0 };
    }
    loc + sigma * (z.pdf(a) - z.pdf(b)) / mass
}

impl RewardDist {
    pub fn new(kind: RewardKind, mean: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mean) || !mean.is_finite() {
            return Err(Error::param("mean", format!("{mean} is outside [0, 1]")));
        }
        let shape = match kind {
            RewardKind::Bernoulli => Shape::Bernoulli,
            RewardKind::PointMass => Shape::Point,
            RewardKind::Gaussian { sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::param("sigma", format!("must be positive, got {sigma}")));
                }
                let z = std_normal();
                let (mut lo, mut hi) = (-1.0 - 10.0 * sigma, 2.0 + 10.0 * sigma);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if truncated_mean(mid, sigma, &z) < mean {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let loc = 0.5 * (lo + hi);
                let got = truncated_mean(loc, sigma, &z);
                if (got - mean).abs() > 1e-6 {
                    return Err(Error::param(
                        "mean",
                        format!("truncated gaussian with sigma {sigma} cannot reach mean {mean}"),
                    ));
                }
                let cdf_lo = z.cdf(-loc / sigma);
                let cdf_hi = z.cdf((1.0 - loc) / sigma);
                if mean <= 0.0 || mean >= 1.0 || cdf_hi - cdf_lo < 1e-12 {
                    return Err(Error::param(
                        "mean",
                        format!("truncated gaussian with sigma {sigma} cannot reach mean {mean}"),
                    ));
                }
                Shape::Trunc { loc, sigma, cdf_lo, cdf_hi }
            }
        };
        Ok(RewardDist { mean, shape })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match &self.shape {
            Shape::Bernoulli => {
                if u < self.mean {
                    1.0
                } else {
                    0.0
                }
            }
            Shape::Point => self.mean,
            Shape::Trunc { loc, sigma, cdf_lo, cdf_hi } => {
                let p = cdf_lo + u * (cdf_hi - cdf_lo);
                let x = loc + sigma * std_normal().inverse_cdf(p.clamp(1e-300, 1.0 - 1e-16));
                x.clamp(0.0, 1.0)
            }
        }
    }

    /// P(X <= s) for s in [0, 1].
    pub fn cdf(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 1.0;
        }
        match &self.shape {
            Shape::Bernoulli => {
                if s < 0.0 {
                    0.0
                } else {
                    1.0 - self.mean
                }
            }
            Shape::Point => {
                if s < self.mean {
                    0.0
                } else {
                    1.0
                }
            }
            Shape::Trunc { loc, sigma, cdf_lo, cdf_hi } => {
                if s < 0.0 {
                    return 0.0;
                }
                let c = std_normal().cdf((s - loc) / sigma);
                ((c - cdf_lo) / (cdf_hi - cdf_lo)).clamp(0.0, 1.0)
            }
        }
    }
}

/// E[max] of two independent Bernoulli arms with means `p` and `q`.
pub fn bernoulli_max_expectation(p: f64, q: f64) -> f64 {
    p + (1.0 - p) * q
}

/// E[max(X, Y)] for independent X, Y supported on [0, 1].
pub fn expected_max(x: &RewardDist, y: &RewardDist) -> f64 {
    match (&x.shape, &y.shape) {
        (Shape::Bernoulli, Shape::Bernoulli) => bernoulli_max_expectation(x.mean, y.mean),
        (Shape::Point, Shape::Point) => x.mean.max(y.mean),
        _ => {
            // E[max] = int_0^1 (1 - F_X F_Y) ds, Simpson's rule
            let n = 4000;
            let h = 1.0 / n as f64;
            let g = |s: f64| 1.0 - x.cdf(s) * y.cdf(s);
            let mut acc = g(0.0) + g(1.0 - 1e-12);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * g(i as f64 * h);
            }
            acc * h / 3.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bernoulli_max_matches_enumeration() {
        for &(p, q) in &[(0.3, 0.6), (0.0, 0.9), (1.0, 0.2), (0.5, 0.5)] {
            let brute: f64 = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
                .iter()
                .map(|&(a, b): &(f64, f64)| {
                    let pa = if a == 1.0 { p } else { 1.0 - p };
                    let pb = if b == 1.0 { q } else { 1.0 - q };
                    pa * pb * a.max(b)
                })
                .sum();
            assert!((bernoulli_max_expectation(p, q) - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn truncated_gaussian_hits_requested_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &mean in &[0.1, 0.35, 0.5, 0.8] {
            let d = RewardDist::new(RewardKind::Gaussian { sigma: 0.2 }, mean).unwrap();
            let n = 200_000;
            let s: f64 = (0..n).map(|_| d.sample(&mut rng)).sum();
            assert!((s / n as f64 - mean).abs() < 4e-3, "mean {mean} got {}", s / n as f64);
        }
    }

    #[test]
    fn gaussian_expected_max_agrees_with_monte_carlo() {
        let x = RewardDist::new(RewardKind::Gaussian { sigma: 0.15 }, 0.4).unwrap();
        let y = RewardDist::new(RewardKind::Gaussian { sigma: 0.15 }, 0.55).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mc: f64 = (0..n).map(|_| x.sample(&mut rng).max(y.sample(&mut rng))).sum::<f64>() / n as f64;
        assert!((expected_max(&x, &y) - mc).abs() < 3e-3);
    }

    #[test]
    fn gaussian_rejects_unreachable_mean() {
        assert!(RewardDist::new(RewardKind::Gaussian { sigma: 0.05 }, 0.0).is_err());
        assert!(RewardDist::new(RewardKind::Gaussian { sigma: -1.0 }, 0.5).is_err());
    }

    #[test]
    fn point_mass_is_deterministic() {
        let d = RewardDist::new(RewardKind::PointMass, 0.42).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(d.sample(&mut rng), 0.42);
        let e = RewardDist::new(RewardKind::PointMass, 0.7).unwrap();
        assert_eq!(expected_max(&d, &e), 0.7);
    }
}
