//! Spin configurations and their overlap.

use crate::error::{Error, Result};

/// A configuration of N Ising spins, each exactly +1 or -1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig {
    spins: Vec<i8>,
}

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.is_empty() {
            return Err(Error::InvalidParam("spin configuration must be non-empty".into()));
        }
        if let Some(&bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidParam(format!(
                "spin value {bad} is not +1 or -1"
            )));
        }
        Ok(SpinConfig { spins })
    }

    /// All spins up.
    pub fn all_up(n: usize) -> Result<Self> {
        SpinConfig::new(vec![1; n])
    }

    /// Configuration from the low `n` bits of `bits` (bit set = spin up).
    pub fn from_bits(bits: u32, n: usize) -> Result<Self> {
        SpinConfig::new(
            (0..n)
                .map(|i| if bits >> i & 1 == 1 { 1 } else { -1 })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        false // len >= 1 by construction
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn flipped(&self) -> SpinConfig {
        SpinConfig {
            spins: self.spins.iter().map(|s| -s).collect(),
        }
    }
}

/// Normalized dot product (1/N) sum_i a_i b_i; the similarity metric of the
/// whole crate. Always in [-1, 1]; equal to 1 on the diagonal.
pub fn overlap(a: &SpinConfig, b: &SpinConfig) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot: i64 = a
        .spins
        .iter()
        .zip(&b.spins)
        .map(|(&x, &y)| (x as i64) * (y as i64))
        .sum();
    Ok(dot as f64 / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_overlap_is_one() {
        for n in [1, 3, 17] {
            let c = SpinConfig::from_bits(0b1011_0010, n.min(8)).unwrap();
            assert_eq!(overlap(&c, &c).unwrap(), 1.0);
            let _ = n;
        }
    }

    #[test]
    fn global_flip_gives_minus_one() {
        let c = SpinConfig::from_bits(0b0110, 4).unwrap();
        assert_eq!(overlap(&c, &c.flipped()).unwrap(), -1.0);
    }

    #[test]
    fn orthogonal_pair() {
        let a = SpinConfig::new(vec![1, 1, -1, -1]).unwrap();
        let b = SpinConfig::new(vec![1, -1, 1, -1]).unwrap();
        assert_eq!(overlap(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let a = SpinConfig::all_up(3).unwrap();
        let b = SpinConfig::all_up(4).unwrap();
        assert!(matches!(
            overlap(&a, &b),
            Err(Error::LengthMismatch { left: 3, right: 4 })
        ));
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(SpinConfig::new(vec![1, 0, -1]).is_err());
        assert!(SpinConfig::new(vec![]).is_err());
    }
}
