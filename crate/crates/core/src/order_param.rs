//! The piecewise-constant step order parameter x(q).
//!
//! A `k`-step order parameter is a right-continuous step function
//! determined by strictly increasing levels `x_1 < ... < x_k` in (0,1) and
//! jump locations `q_1 < ... < q_k` in (0,1), with the conventions
//! `x = 0` on `[0, q_1)`, `x = x_i` on `[q_i, q_{i+1})`, and `x(1) = 1`.
//!
//! The constant function `x = 1` is *not* representable with interior
//! levels (the strict inequalities exclude it); it is the limit object used
//! by the annealed computation and gets an explicit flag instead of an
//! epsilon hack.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OrderParameterWire", into = "OrderParameterWire")]
pub struct OrderParameter {
    annealed: bool,
    x: Vec<f64>,
    q: Vec<f64>,
}

/// JSON wire format: {"x": [...], "q": [...]}. The annealed flag is the
/// single pair x = 1, q = 0, which round-trips exactly.
#[derive(Serialize, Deserialize)]
struct OrderParameterWire {
    x: Vec<f64>,
    q: Vec<f64>,
}

impl From<OrderParameter> for OrderParameterWire {
    fn from(op: OrderParameter) -> Self {
        if op.annealed {
            OrderParameterWire {
                x: vec![1.0],
                q: vec![0.0],
            }
        } else {
            OrderParameterWire { x: op.x, q: op.q }
        }
    }
}

impl TryFrom<OrderParameterWire> for OrderParameter {
    type Error = Error;
    fn try_from(w: OrderParameterWire) -> Result<Self> {
        OrderParameter::normalized(&w.x, &w.q)
    }
}

impl OrderParameter {
    /// The zero-step parameter: x = 0 below 1.
    pub fn zero() -> Self {
        OrderParameter {
            annealed: false,
            x: vec![],
            q: vec![],
        }
    }

    /// The x = 1 limit object.
    pub fn annealed() -> Self {
        OrderParameter {
            annealed: true,
            x: vec![],
            q: vec![],
        }
    }

    /// Strict constructor: rejects anything violating the monotonicity and
    /// open-interval requirements.
    pub fn new(x: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        if x.len() != q.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: q.len(),
            });
        }
        let strictly_inside_increasing = |v: &[f64]| -> bool {
            let mut prev = 0.0;
            for &t in v {
                if !(t > prev && t < 1.0) {
                    return false;
                }
                prev = t;
            }
            true
        };
        if !strictly_inside_increasing(&x) {
            return Err(Error::InvalidParam(format!(
                "x levels must satisfy 0 < x_1 < ... < x_k < 1, got {x:?}"
            )));
        }
        if !strictly_inside_increasing(&q) {
            return Err(Error::InvalidParam(format!(
                "q levels must satisfy 0 < q_1 < ... < q_k < 1, got {q:?}"
            )));
        }
        Ok(OrderParameter {
            annealed: false,
            x,
            q,
        })
    }

    /// Normalizing constructor for optimizer-proposed points: merges equal
    /// adjacent levels (x_i = x_{i+1} drops the interior jump, q_i = q_{i+1}
    /// drops the empty interval), drops levels with x_i = 0 or empty support
    /// at the left edge, and recognizes the single pair (x, q) = (1, 0) as
    /// the annealed flag.
    pub fn normalized(x: &[f64], q: &[f64]) -> Result<Self> {
        if x.len() != q.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: q.len(),
            });
        }
        if x.len() == 1 && x[0] == 1.0 && q[0] == 0.0 {
            return Ok(OrderParameter::annealed());
        }
        let mut pairs: Vec<(f64, f64)> = q.iter().copied().zip(x.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut xs: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut qs: Vec<f64> = Vec::with_capacity(pairs.len());
        for &(qi, xi) in &pairs {
            if !(0.0..=1.0).contains(&qi) || !(0.0..=1.0).contains(&xi) {
                return Err(Error::InvalidParam(format!(
                    "order parameter entries must lie in [0,1], got (x, q) = ({xi}, {qi})"
                )));
            }
            // Empty interval: a later level starts at the same q.
            if let Some(&last_q) = qs.last() {
                if qi == last_q {
                    xs.pop();
                    qs.pop();
                }
            }
            // Zero level or zero-width left interval merges into x_0 = 0.
            if xi == 0.0 {
                continue;
            }
            // Equal adjacent x: extend the earlier interval.
            if xs.last() == Some(&xi) {
                continue;
            }
            if qi == 0.0 || qi == 1.0 || xi == 1.0 {
                return Err(Error::InvalidParam(format!(
                    "boundary level (x, q) = ({xi}, {qi}) is not representable; \
                     x = 1 exists only as the annealed flag"
                )));
            }
            xs.push(xi);
            qs.push(qi);
        }
        OrderParameter::new(xs, qs)
    }

    pub fn is_annealed(&self) -> bool {
        self.annealed
    }

    /// Number of interior steps.
    pub fn k(&self) -> usize {
        if self.annealed {
            1
        } else {
            self.x.len()
        }
    }

    /// Interior levels including the annealed representation (x=1 at q=0).
    pub fn x_levels(&self) -> Vec<f64> {
        if self.annealed {
            vec![1.0]
        } else {
            self.x.clone()
        }
    }

    pub fn q_levels(&self) -> Vec<f64> {
        if self.annealed {
            vec![0.0]
        } else {
            self.q.clone()
        }
    }

    /// x(q), right-continuous, with x(1) = 1.
    pub fn eval(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::OutOfRange {
                what: "q",
                value: q,
                range: "[0, 1]",
            });
        }
        if q == 1.0 {
            return Ok(1.0);
        }
        if self.annealed {
            return Ok(1.0);
        }
        // Last level with q_i <= q; zero if none.
        let mut val = 0.0;
        for (qi, xi) in self.q.iter().zip(&self.x) {
            if *qi <= q {
                val = *xi;
            } else {
                break;
            }
        }
        Ok(val)
    }

    /// Exact closed form of the integral of q x(q) over [0, 1]:
    /// sum_i x_i (q_{i+1}^2 - q_i^2) / 2.
    pub fn q_integral(&self) -> f64 {
        if self.annealed {
            return 0.5;
        }
        let mut total = 0.0;
        for i in 0..self.x.len() {
            let hi = if i + 1 < self.q.len() { self.q[i + 1] } else { 1.0 };
            let lo = self.q[i];
            total += self.x[i] * (hi * hi - lo * lo) / 2.0;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_step_evaluates_to_zero_below_one() {
        let op = OrderParameter::zero();
        assert_eq!(op.eval(0.5).unwrap(), 0.0);
        assert_eq!(op.eval(0.0).unwrap(), 0.0);
        assert_eq!(op.eval(1.0).unwrap(), 1.0);
        assert_eq!(op.q_integral(), 0.0);
    }

    #[test]
    fn right_continuity_at_jumps() {
        let op = OrderParameter::new(vec![0.4], vec![0.3]).unwrap();
        assert_eq!(op.eval(0.3).unwrap(), 0.4);
        assert_eq!(op.eval(0.3 - 1e-12).unwrap(), 0.0);
        assert_eq!(op.eval(1.0).unwrap(), 1.0);
    }

    #[test]
    fn annealed_flag_and_integral() {
        let op = OrderParameter::annealed();
        assert_eq!(op.eval(0.2).unwrap(), 1.0);
        assert_eq!(op.q_integral(), 0.5);
        // Wire form round-trips through the (1, 0) sentinel.
        let json = serde_json::to_string(&op).unwrap();
        assert_eq!(json, r#"{"x":[1.0],"q":[0.0]}"#);
        let back: OrderParameter = serde_json::from_str(&json).unwrap();
        assert!(back.is_annealed());
    }

    #[test]
    fn one_step_integral_closed_form() {
        let op = OrderParameter::new(vec![0.5], vec![0.4]).unwrap();
        assert!((op.q_integral() - 0.5 * (1.0 - 0.16) / 2.0).abs() < 1e-15);
        assert!((op.q_integral() - 0.21).abs() < 1e-15);
    }

    #[test]
    fn normalization_merges_degenerate_levels() {
        // Equal x levels merge; equal q keeps the later level.
        let op = OrderParameter::normalized(&[0.3, 0.3, 0.7], &[0.2, 0.5, 0.8]).unwrap();
        assert_eq!(op.x_levels(), vec![0.3, 0.7]);
        assert_eq!(op.q_levels(), vec![0.2, 0.8]);
        let op = OrderParameter::normalized(&[0.3, 0.6], &[0.5, 0.5]).unwrap();
        assert_eq!(op.x_levels(), vec![0.6]);
        assert_eq!(op.q_levels(), vec![0.5]);
    }

    #[test]
    fn eval_out_of_range_is_error() {
        let op = OrderParameter::zero();
        assert!(op.eval(-0.1).is_err());
        assert!(op.eval(1.1).is_err());
    }

    #[test]
    fn serde_round_trip_is_bit_exact() {
        let op = OrderParameter::new(vec![0.25, 0.625], vec![0.125, 0.75]).unwrap();
        let json = serde_json::to_string(&op).unwrap();
        let back: OrderParameter = serde_json::from_str(&json).unwrap();
        assert_eq!(op, back);
        assert_eq!(json, serde_json::to_string(&back).unwrap());
    }

    proptest! {
        #[test]
        fn eval_is_monotone_nondecreasing(
            raw in proptest::collection::vec((0.01f64..0.99, 0.01f64..0.99), 0..5),
            probe in proptest::collection::vec(0.0f64..=1.0, 2..40),
        ) {
            let xs: Vec<f64> = raw.iter().map(|p| p.0).collect();
            let qs: Vec<f64> = raw.iter().map(|p| p.1).collect();
            if let Ok(op) = OrderParameter::normalized(&xs, &qs) {
                let mut sorted = probe.clone();
                sorted.sort_by(f64::total_cmp);
                let vals: Vec<f64> = sorted.iter().map(|&q| op.eval(q).unwrap()).collect();
                for w in vals.windows(2) {
                    prop_assert!(w[0] <= w[1]);
                }
            }
        }

        #[test]
        fn q_integral_matches_quadrature(
            raw in proptest::collection::vec((0.01f64..0.99, 0.01f64..0.99), 0..4),
        ) {
            let xs: Vec<f64> = raw.iter().map(|p| p.0).collect();
            let qs: Vec<f64> = raw.iter().map(|p| p.1).collect();
            if let Ok(op) = OrderParameter::normalized(&xs, &qs) {
                // Trapezoid on a 1e5-point grid laid out piecewise, so grid
                // points align with the jumps and the rule sees only the
                // smooth (linear) integrand q * x_i on each piece.
                let mut bounds = vec![0.0];
                bounds.extend(op.q_levels());
                bounds.push(1.0);
                let per_piece = 100_000 / (bounds.len() - 1);
                let mut acc = 0.0;
                for w in bounds.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let h = (b - a) / per_piece as f64;
                    for i in 0..per_piece {
                        let lo = a + i as f64 * h;
                        let hi = lo + h;
                        // Evaluate inside the half-open piece.
                        let x = op.eval(lo).unwrap().max(op.eval(a).unwrap());
                        acc += 0.5 * (lo * x + hi * x) * h;
                    }
                }
                prop_assert!((acc - op.q_integral()).abs() < 1e-8);
            }
        }
    }
}
