//! Numerical checks for superadditive sequences.
//!
//! For a sequence with Q_N + Q_M <= Q_{N+M}, the per-index ratio Q_N / N
//! converges to its supremum, and the same limit is recovered from the
//! increments (Q_{N+M} - Q_N) / M. Both routes are computed on a finite
//! truncation and cross-reported; any violating pair is a structured
//! diagnostic, not a silent skip.

use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SuperadditiveReport {
    /// Q_N / N for N = 1..len.
    pub ratio: Vec<f64>,
    /// Running supremum of the ratio.
    pub running_sup: Vec<f64>,
    /// (Q_{N+M} - Q_N) / M for N = 1..len-M, at the requested window M.
    pub incremental: Vec<f64>,
    pub window: usize,
    /// Best available limit estimates from the two formulas.
    pub sup_estimate: f64,
    pub incremental_estimate: f64,
}

/// Verify superadditivity of `q[0..]` (interpreted as Q_1, Q_2, ...) over
/// every in-range pair, then report the two limit formulas on the
/// truncation. `window` is the increment size M for the incremental route.
pub fn superadditive_limit_check(q: &[f64], window: usize) -> Result<SuperadditiveReport> {
    let len = q.len();
    if len < 2 {
        return Err(Error::InvalidParam(
            "need at least two sequence entries".into(),
        ));
    }
    if window == 0 || window >= len {
        return Err(Error::InvalidParam(format!(
            "window {window} must lie in 1..{len}"
        )));
    }
    let qn = |n: usize| q[n - 1]; // 1-based access

    for n in 1..len {
        for m in n..=(len - n) {
            let sum = qn(n) + qn(m);
            let whole = qn(n + m);
            // Exact comparison with a relative rounding allowance.
            if sum > whole + 1e-12 * (1.0 + sum.abs().max(whole.abs())) {
                return Err(Error::SuperadditivityViolated {
                    n,
                    m,
                    total: n + m,
                    sum,
                    whole,
                });
            }
        }
    }

    let ratio: Vec<f64> = (1..=len).map(|n| qn(n) / n as f64).collect();
    let mut running_sup = Vec::with_capacity(len);
    let mut sup = f64::NEG_INFINITY;
    for &r in &ratio {
        sup = sup.max(r);
        running_sup.push(sup);
    }
    let incremental: Vec<f64> = (1..=(len - window))
        .map(|n| (qn(n + window) - qn(n)) / window as f64)
        .collect();

    Ok(SuperadditiveReport {
        sup_estimate: sup,
        incremental_estimate: *incremental.last().unwrap(),
        ratio,
        running_sup,
        incremental,
        window,
    })
}
