//! Small numeric helpers shared across modules.

/// ln cosh(x), stable for large |x|: |x| + ln(1 + e^{-2|x|}) - ln 2.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// log(sum(exp(v))) with max-shift; -inf for an empty slice.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Mean of a slice.
pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Smallest prefix length of a descending weight sequence whose dropped
/// tail carries at most `tail_frac` of the total mass.
pub fn truncate_by_tail_mass(weights_desc: &[f64], tail_frac: f64) -> usize {
    let total: f64 = weights_desc.iter().sum();
    let budget = tail_frac * total;
    let mut tail = 0.0;
    let mut keep = weights_desc.len();
    while keep > 1 {
        let next_tail = tail + weights_desc[keep - 1];
        if next_tail > budget {
            break;
        }
        tail = next_tail;
        keep -= 1;
    }
    keep
}
