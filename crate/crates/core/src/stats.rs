//! Statistical helpers: moment accumulation, normal special functions, and
//! Kolmogorov-Smirnov tests with the asymptotic p-value.

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn mean_stderr(v: &[f64]) -> MeanStderr {
    let n = v.len();
    assert!(n > 0);
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanStderr {
            mean,
            stderr: 0.0,
            n,
        };
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    MeanStderr {
        mean,
        stderr: (var / n as f64).sqrt(),
        n,
    }
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean_stderr(v);
    m.stderr * m.stderr * m.n as f64
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// erf via the Abramowitz-Stegun 7.1.26-style rational approximation
/// refined with one Chebyshev-quality correction; absolute error < 1.2e-7,
/// plenty for p-values and lognormal CDFs at test tolerances.
pub fn erf(x: f64) -> f64 {
    // W. J. Cody-style rational approximation of erfc on [0, inf).
    let ax = x.abs();
    let t = 1.0 / (1.0 + 0.5 * ax);
    // Numerical Recipes erfcc polynomial (|eps| < 1.2e-7).
    let tau = t
        * (-ax * ax - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    let erfc = if x >= 0.0 { tau } else { 2.0 - tau };
    1.0 - erfc
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Survival function of the Kolmogorov distribution,
/// Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Result of a KS comparison.
#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn ks_p_from_d(d: f64, n_eff: f64) -> f64 {
    // Stephens' small-sample correction on top of the asymptotic law.
    let sq = n_eff.sqrt();
    kolmogorov_q(d * (sq + 0.12 + 0.11 / sq))
}

/// Two-sample KS test.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> KsResult {
    assert!(!x.is_empty() && !y.is_empty());
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / nx - j as f64 / ny).abs());
    }
    let n_eff = nx * ny / (nx + ny);
    KsResult {
        statistic: d,
        p_value: ks_p_from_d(d, n_eff),
    }
}

/// One-sample KS test against a continuous CDF.
pub fn ks_one_sample(x: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    assert!(!x.is_empty());
    let mut xs = x.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (k, &v) in xs.iter().enumerate() {
        let f = cdf(v);
        d = d.max((f - k as f64 / n).abs());
        d = d.max(((k + 1) as f64 / n - f).abs());
    }
    KsResult {
        statistic: d,
        p_value: ks_p_from_d(d, n),
    }
}

/// Bonferroni combination: the smallest p-value scaled by the number of
/// tests, capped at 1.
pub fn bonferroni(p_values: &[f64]) -> f64 {
    let min = p_values.iter().copied().fold(1.0f64, f64::min);
    (min * p_values.len() as f64).min(1.0)
}

/// Rank-wise two-sample KS comparison of two ensembles, Bonferroni
/// combined. Row r of each ensemble holds the rank-r values across trials.
#[derive(Debug, Clone, serde::Serialize)]
pub struct KsReport {
    pub per_rank: Vec<f64>,
    pub per_rank_statistic: Vec<f64>,
    pub combined_p: f64,
    pub pass: bool,
}

/// Compare `a[trial][rank]` against `b[trial][rank]` rank by rank.
pub fn per_rank_ks_report(a: &[Vec<f64>], b: &[Vec<f64>], top_n: usize) -> KsReport {
    let mut per_rank = Vec::with_capacity(top_n);
    let mut per_rank_statistic = Vec::with_capacity(top_n);
    for rank in 0..top_n {
        let xa: Vec<f64> = a.iter().map(|v| v[rank]).collect();
        let xb: Vec<f64> = b.iter().map(|v| v[rank]).collect();
        let KsResult { statistic, p_value } = ks_two_sample(&xa, &xb);
        per_rank.push(p_value);
        per_rank_statistic.push(statistic);
    }
    let combined_p = bonferroni(&per_rank);
    KsReport {
        pass: combined_p > 0.01,
        per_rank,
        per_rank_statistic,
        combined_p,
    }
}
