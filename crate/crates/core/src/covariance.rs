//! Interaction covariance f(q) as a finitely supported positive power
//! series: f(q) = sum_r a_r q^r with a_r >= 0 and sum_r a_r = 1.
//!
//! The pair model corresponds to the single monomial a_2 = 1; p-spin
//! variants put the weight on q^p. Besides f itself the code needs f'(q)
//! (cavity field covariance, halved) and phi(q) = q f'(q) - f(q)
//! (fugacity covariance, halved).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CovarianceWire", into = "CovarianceWire")]
pub struct CovarianceSeries {
    /// (r, a_r) pairs, ascending in r, all a_r > 0.
    terms: Vec<(u32, f64)>,
}

/// JSON wire format: {"coeffs": {"2": 1.0}}.
#[derive(Serialize, Deserialize)]
struct CovarianceWire {
    coeffs: BTreeMap<String, f64>,
}

impl From<CovarianceSeries> for CovarianceWire {
    fn from(f: CovarianceSeries) -> Self {
        CovarianceWire {
            coeffs: f
                .terms
                .iter()
                .map(|&(r, a)| (r.to_string(), a))
                .collect(),
        }
    }
}

impl TryFrom<CovarianceWire> for CovarianceSeries {
    type Error = Error;
    fn try_from(w: CovarianceWire) -> Result<Self> {
        let mut terms = Vec::new();
        for (k, v) in w.coeffs {
            let r: u32 = k
                .parse()
                .map_err(|_| Error::InvalidParam(format!("bad power index {k:?}")))?;
            terms.push((r, v));
        }
        CovarianceSeries::new(terms)
    }
}

/// Evaluation bundle returned by [`CovarianceSeries::eval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceValues {
    pub f: f64,
    pub f_prime: f64,
    /// phi(q) = q f'(q) - f(q).
    pub phi: f64,
}

impl CovarianceSeries {
    pub fn new(mut terms: Vec<(u32, f64)>) -> Result<Self> {
        terms.retain(|&(_, a)| a != 0.0);
        terms.sort_by_key(|&(r, _)| r);
        if terms.is_empty() {
            return Err(Error::InvalidParam("covariance series has no terms".into()));
        }
        for &(r, a) in &terms {
            if r == 0 {
                return Err(Error::InvalidParam("covariance series starts at r = 1".into()));
            }
            if !(a > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "coefficient a_{r} = {a} must be positive"
                )));
            }
        }
        if terms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParam("duplicate power index".into()));
        }
        let total: f64 = terms.iter().map(|&(_, a)| a).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!(
                "coefficients must sum to 1, got {total}"
            )));
        }
        Ok(CovarianceSeries { terms })
    }

    /// The pair interaction f(q) = q^2.
    pub fn sk() -> Self {
        CovarianceSeries {
            terms: vec![(2, 1.0)],
        }
    }

    /// Pure p-spin monomial f(q) = q^p.
    pub fn monomial(p: u32) -> Result<Self> {
        CovarianceSeries::new(vec![(p, 1.0)])
    }

    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    pub fn max_power(&self) -> u32 {
        self.terms.last().map(|&(r, _)| r).unwrap_or(0)
    }

    /// f, f' and phi at q in [-1, 1].
    pub fn eval(&self, q: f64) -> Result<CovarianceValues> {
        if !(-1.0..=1.0).contains(&q) {
            return Err(Error::OutOfRange {
                what: "q",
                value: q,
                range: "[-1, 1]",
            });
        }
        let mut f = 0.0;
        let mut fp = 0.0;
        for &(r, a) in &self.terms {
            let r_f = r as f64;
            let qr1 = q.powi(r as i32 - 1);
            f += a * qr1 * q;
            fp += a * r_f * qr1;
        }
        Ok(CovarianceValues {
            f,
            f_prime: fp,
            phi: q * fp - f,
        })
    }

    /// True when f is convex on [-1, 1]: either only even powers carry
    /// weight, or a sign scan of f'' on a grid finds no negative value.
    pub fn is_convex(&self) -> bool {
        if self.terms.iter().all(|&(r, _)| r % 2 == 0) {
            return true;
        }
        let fpp = |q: f64| -> f64 {
            self.terms
                .iter()
                .map(|&(r, a)| {
                    let r_f = r as f64;
                    a * r_f * (r_f - 1.0) * q.powi(r as i32 - 2)
                })
                .sum()
        };
        const GRID: usize = 2001;
        (0..GRID).all(|i| {
            let q = -1.0 + 2.0 * i as f64 / (GRID - 1) as f64;
            fpp(q) >= -1e-12
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sk_series_values() {
        let f = CovarianceSeries::sk();
        let v = f.eval(0.5).unwrap();
        assert_eq!(v.f, 0.25);
        assert_eq!(v.f_prime, 1.0);
        assert_eq!(v.phi, 0.25);
        assert!(f.is_convex());
    }

    #[test]
    fn p4_series_values() {
        let f = CovarianceSeries::monomial(4).unwrap();
        let v = f.eval(0.5).unwrap();
        assert_eq!(v.f, 0.0625);
        assert_eq!(v.f_prime, 0.5);
        assert_eq!(v.phi, 0.1875);
    }

    #[test]
    fn value_at_origin() {
        let f = CovarianceSeries::new(vec![(1, 0.5), (3, 0.5)]).unwrap();
        let v = f.eval(0.0).unwrap();
        assert_eq!(v.f, 0.0);
        assert_eq!(v.f_prime, 0.5); // a_1
        assert_eq!(v.phi, 0.0);
        // Odd powers: convexity fails on [-1, 0).
        assert!(!f.is_convex());
    }

    #[test]
    fn normalization_enforced() {
        assert!(CovarianceSeries::new(vec![(2, 0.5)]).is_err());
        assert!(CovarianceSeries::new(vec![(2, 0.5), (4, 0.5)]).is_ok());
        assert!(CovarianceSeries::new(vec![(0, 1.0)]).is_err());
        assert!(CovarianceSeries::new(vec![(2, -1.0), (4, 2.0)]).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let f = CovarianceSeries::new(vec![(2, 0.25), (3, 0.25), (6, 0.5)]).unwrap();
        let mut rng = crate::rng::SeedSpec::new(3).rng();
        use rand::Rng;
        for _ in 0..100 {
            let q: f64 = rng.random::<f64>() * 1.9 - 0.95;
            let h = 1e-5;
            let fd = (f.eval(q + h).unwrap().f - f.eval(q - h).unwrap().f) / (2.0 * h);
            assert!((fd - f.eval(q).unwrap().f_prime).abs() < 1e-6);
        }
    }

    #[test]
    fn phi_nonnegative_for_convex_series() {
        // phi' = q f'' >= 0 on [0,1] when f is convex with f(0) = 0.
        let f = CovarianceSeries::new(vec![(2, 0.3), (4, 0.7)]).unwrap();
        assert!(f.is_convex());
        for i in 0..=1000 {
            let q = i as f64 / 1000.0;
            assert!(f.eval(q).unwrap().phi >= -1e-15, "phi < 0 at q = {q}");
        }
    }

    #[test]
    fn wire_round_trip() {
        let f = CovarianceSeries::new(vec![(2, 0.25), (4, 0.75)]).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, r#"{"coeffs":{"2":0.25,"4":0.75}}"#);
        let back: CovarianceSeries = serde_json::from_str(&json).unwrap();
        assert_eq!(f, back);
    }
}
