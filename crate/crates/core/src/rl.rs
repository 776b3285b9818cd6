//! Group-relative advantages, the clipped surrogate and pass@k.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::model::Fraction;

pub const DEFAULT_GROUP_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct DomainError(pub String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupRollout {
    group_size_g: usize,
    rewards: Vec<Fraction>,
}

impl GroupRollout {
    pub fn new(rewards: Vec<Fraction>) -> Result<Self, DomainError> {
        if rewards.len() < 2 {
            return Err(DomainError(format!("group needs at least 2 rewards, got {}", rewards.len())));
        }
        Ok(GroupRollout {
            group_size_g: rewards.len(),
            rewards,
        })
    }

    pub fn from_binary(rewards: &[u8]) -> Result<Self, DomainError> {
        Self::new(rewards.iter().map(|&r| if r > 0 { Fraction::ONE } else { Fraction::ZERO }).collect())
    }

    pub fn group_size(&self) -> usize {
        self.group_size_g
    }

    pub fn rewards(&self) -> &[Fraction] {
        &self.rewards
    }
}

pub fn to_big(f: Fraction) -> BigRational {
    BigRational::new(BigInt::from(f.numer()), BigInt::from(f.denom()))
}

/// `r_i - mean(r)`, exact. No std normalization.
pub fn group_advantages(rollout: &GroupRollout) -> Vec<BigRational> {
    let rs: Vec<BigRational> = rollout.rewards.iter().map(|r| to_big(*r)).collect();
    let sum = rs.iter().fold(BigRational::zero(), |a, r| a + r);
    let mean = sum / BigInt::from(rs.len());
    rs.into_iter().map(|r| r - &mean).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClipConfig {
    pub eps_low: Fraction,
    pub eps_high: Fraction,
    /// Carried for completeness; only 0 is accepted.
    pub kl_beta: Fraction,
}

impl Default for ClipConfig {
    fn default() -> Self {
        ClipConfig {
            eps_low: Fraction::new(1, 5).expect("valid"),
            eps_high: Fraction::new(1, 4).expect("valid"),
            kl_beta: Fraction::ZERO,
        }
    }
}

impl ClipConfig {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.eps_low.is_zero() || self.eps_low > self.eps_high || self.eps_low >= Fraction::ONE {
            return Err(DomainError(format!(
                "need 0 < eps_low <= eps_high and eps_low < 1, got {} / {}",
                self.eps_low, self.eps_high
            )));
        }
        if !self.kl_beta.is_zero() {
            return Err(DomainError(format!("kl_beta is fixed at 0, got {}", self.kl_beta)));
        }
        Ok(())
    }

    /// `(1 - eps_low, 1 + eps_high)`
    pub fn bounds(&self) -> (f64, f64) {
        let (n, d) = (self.eps_low.numer(), self.eps_low.denom());
        let lo = (d - n) as f64 / d as f64;
        let (n, d) = (self.eps_high.numer(), self.eps_high.denom());
        let hi = (d + n) as f64 / d as f64;
        (lo, hi)
    }
}

/// `min(ratio * A, clip(ratio, 1 - eps_low, 1 + eps_high) * A)`
pub fn clipped_objective(ratio: f64, advantage: f64, cfg: &ClipConfig) -> f64 {
    let (lo, hi) = cfg.bounds();
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(lo, hi) * advantage;
    unclipped.min(clipped)
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Unbiased pass@k: `1 - C(n-c, k) / C(n, k)`.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<BigRational, DomainError> {
    if c > n || k < 1 || k > n {
        return Err(DomainError(format!("need 0 <= c <= n and 1 <= k <= n, got n={n} c={c} k={k}")));
    }
    let fail = BigRational::new(BigInt::from(binomial(n - c, k)), BigInt::from(binomial(n, k)));
    Ok(BigRational::one() - fail)
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn advantage_examples() {
        let a = group_advantages(&GroupRollout::from_binary(&[1, 0, 0, 0, 0, 0, 0, 0]).unwrap());
        assert_eq!(a[0], q(7, 8));
        assert!(a[1..].iter().all(|x| *x == q(-1, 8)));
        let a = group_advantages(&GroupRollout::from_binary(&[1, 1, 0, 0]).unwrap());
        assert_eq!(a, vec![q(1, 2), q(1, 2), q(-1, 2), q(-1, 2)]);
        assert!(group_advantages(&GroupRollout::from_binary(&[1; 8]).unwrap()).iter().all(|x| x.is_zero()));
        assert!(GroupRollout::from_binary(&[1]).is_err());
    }

    #[test]
    fn clip_examples() {
        let c = ClipConfig::default();
        assert_eq!(clipped_objective(1.0, 0.7, &c), 0.7);
        assert_eq!(clipped_objective(1.5, 1.0, &c), 1.25);
        assert_eq!(clipped_objective(0.5, -1.0, &c), -0.8);
        assert!(ClipConfig { kl_beta: Fraction::new(1, 100).unwrap(), ..c }.validate().is_err());
    }

    #[test]
    fn pass_at_k_examples() {
        assert_eq!(pass_at_k(8, 8, 1).unwrap(), q(1, 1));
        assert_eq!(pass_at_k(8, 7, 1).unwrap(), q(7, 8));
        assert_eq!(pass_at_k(8, 0, 8).unwrap(), q(0, 1));
        assert!(pass_at_k(8, 9, 1).is_err() && pass_at_k(8, 1, 0).is_err());
        assert_eq!(binomial(200, 100).to_string().len(), 59);
    }
}
