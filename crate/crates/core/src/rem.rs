//! The heavy-tailed Poisson point process REM_x and its quasi-stationarity.
//!
//! REM_x is the Poisson process on (0, infinity) with intensity
//! x xi^{-(x+1)} d xi (equivalently mean occupation a^{-x} above level a),
//! for x in (0, 1). Samples are truncated at a floor epsilon: the count
//! above epsilon is Poisson(epsilon^{-x}) and each point is
//! epsilon * U^{-1/x}.
//!
//! The process is stationary in law under independent multiplicative
//! increments gamma_n ~ g, after division by K = <gamma^x>^{1/x}; the
//! normalized weights xi_n / Z need no correction at all, which is the
//! form tested here. The increments, re-read off the reordered points,
//! become iid with the size-biased law gamma^x g(d gamma) / <gamma^x>,
//! independent of the new positions.

use crate::error::{Error, Result};
use crate::rng::SeedSpec;
use crate::stats::{ks_one_sample, mean_stderr, normal_cdf, per_rank_ks_report, KsReport};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

/// Memory guard: expected counts above this are refused.
pub const COUNT_GUARD: f64 = 1e7;

/// One truncated descending sample of REM_x.
#[derive(Debug, Clone, Serialize)]
pub struct PointConfiguration {
    pub x: f64,
    pub epsilon: f64,
    /// Strictly descending, all > epsilon.
    pub points: Vec<f64>,
}

fn check_x(x: f64) -> Result<()> {
    if !(0.0 < x && x < 1.0) {
        return Err(Error::OutOfRange {
            what: "x",
            value: x,
            range: "(0, 1)",
        });
    }
    Ok(())
}

/// Sample the process above `epsilon`.
pub fn sample_rem<R: Rng + ?Sized>(x: f64, epsilon: f64, rng: &mut R) -> Result<PointConfiguration> {
    check_x(x)?;
    if epsilon <= 0.0 {
        return Err(Error::OutOfRange {
            what: "epsilon",
            value: epsilon,
            range: "(0, inf)",
        });
    }
    let mean_count = epsilon.powf(-x);
    if mean_count > COUNT_GUARD {
        return Err(Error::Guard(format!(
            "expected count eps^-x = {mean_count:.3e} exceeds {COUNT_GUARD:.0e}; raise epsilon"
        )));
    }
    let count = Poisson::new(mean_count)
        .map_err(|e| Error::InvalidParam(format!("poisson: {e}")))?
        .sample(rng) as usize;
    let mut points: Vec<f64> = (0..count)
        .map(|_| {
            // Inverse CDF of the normalized restriction above epsilon.
            let u: f64 = rng.random();
            epsilon * u.max(f64::MIN_POSITIVE).powf(-1.0 / x)
        })
        .collect();
    points.sort_by(|a, b| b.total_cmp(a));
    Ok(PointConfiguration { x, epsilon, points })
}

/// The `m` largest points of the untruncated process, via the arrival-time
/// representation: on the scale t = xi^{-x} the process is unit-rate
/// Poisson, so xi_n = (E_1 + ... + E_n)^{-1/x} with iid standard
/// exponentials. Exact in law and free of the epsilon floor; this is what
/// the cascade construction uses per node.
pub fn sample_top_m<R: Rng + ?Sized>(x: f64, m: usize, rng: &mut R) -> Result<Vec<f64>> {
    check_x(x)?;
    let mut gamma = 0.0f64;
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let u: f64 = rng.random();
        gamma += -(1.0 - u).ln();
        out.push(gamma.powf(-1.0 / x));
    }
    Ok(out)
}

/// Partition sum with the analytic truncated-tail bias bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PartitionSum {
    pub z: f64,
    /// E of the mass below the floor: x eps^{1-x} / (1-x).
    pub tail_bound: f64,
}

pub fn partition_sum(cfg: &PointConfiguration) -> PartitionSum {
    PartitionSum {
        z: cfg.points.iter().sum(),
        tail_bound: cfg.x * cfg.epsilon.powf(1.0 - cfg.x) / (1.0 - cfg.x),
    }
}

/// Ensemble trajectory of n^{1/x} xi_n.
#[derive(Debug, Clone, Serialize)]
pub struct OrderStatReport {
    /// Mean of n^{1/x} xi_n for n = 1..=n_max, over draws that reach n.
    pub scaled_mean: Vec<f64>,
    /// Draws that did not reach n_max points.
    pub incomplete_draws: usize,
    pub draws: usize,
}

/// Ensemble check of the order-statistic law: n^{1/x} xi_n -> 1. Draws
/// missing rank n are excluded from that rank's mean and counted as
/// partial.
pub fn order_statistic_law_check(
    x: f64,
    epsilon: f64,
    n_max: usize,
    draws: usize,
    seed: SeedSpec,
) -> Result<OrderStatReport> {
    check_x(x)?;
    let per_draw: Result<Vec<Vec<f64>>> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i as u64);
            let cfg = sample_rem(x, epsilon, &mut rng)?;
            Ok(cfg
                .points
                .iter()
                .take(n_max)
                .enumerate()
                .map(|(k, &xi)| ((k + 1) as f64).powf(1.0 / x) * xi)
                .collect())
        })
        .collect();
    let per_draw = per_draw?;
    let incomplete_draws = per_draw.iter().filter(|v| v.len() < n_max).count();
    let mut scaled_mean = Vec::with_capacity(n_max);
    for rank in 0..n_max {
        let vals: Vec<f64> = per_draw
            .iter()
            .filter_map(|v| v.get(rank).copied())
            .collect();
        if vals.is_empty() {
            break;
        }
        scaled_mean.push(crate::math::mean(&vals));
    }
    Ok(OrderStatReport {
        scaled_mean,
        incomplete_draws,
        draws,
    })
}

/// Multiplicative increment laws with closed-form x-moment and tilt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum IncrementLaw {
    /// gamma = c deterministically.
    PointMass { c: f64 },
    /// ln gamma ~ N(0, s^2).
    LogNormal { s: f64 },
    /// gamma in {a, b} with equal probability.
    TwoPoint { a: f64, b: f64 },
}

impl IncrementLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            IncrementLaw::PointMass { c } => c > 0.0,
            IncrementLaw::LogNormal { s } => s > 0.0,
            IncrementLaw::TwoPoint { a, b } => a > 0.0 && b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParam(format!(
                "increment law must be strictly positive: {self:?}"
            )))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            IncrementLaw::PointMass { c } => c,
            IncrementLaw::LogNormal { s } => {
                let z: f64 = rng.sample(StandardNormal);
                (s * z).exp()
            }
            IncrementLaw::TwoPoint { a, b } => {
                if rng.random::<f64>() < 0.5 {
                    a
                } else {
                    b
                }
            }
        }
    }

    /// <gamma^x>.
    pub fn moment_x(&self, x: f64) -> f64 {
        match *self {
            IncrementLaw::PointMass { c } => c.powf(x),
            IncrementLaw::LogNormal { s } => (0.5 * x * x * s * s).exp(),
            IncrementLaw::TwoPoint { a, b } => 0.5 * (a.powf(x) + b.powf(x)),
        }
    }

    /// Stationarity correction K = <gamma^x>^{1/x}.
    pub fn k_factor(&self, x: f64) -> f64 {
        self.moment_x(x).powf(1.0 / x)
    }

    /// CDF of the size-biased law gamma^x g / <gamma^x>; None for the
    /// discrete laws (tested by frequency instead).
    pub fn tilted_cdf(&self, x: f64) -> Option<impl Fn(f64) -> f64> {
        match *self {
            IncrementLaw::LogNormal { s } => Some(move |g: f64| {
                if g <= 0.0 {
                    0.0
                } else {
                    normal_cdf((g.ln() - x * s * s) / s)
                }
            }),
            _ => None,
        }
    }

    /// For the two-point law: tilted probability of drawing `b`.
    pub fn tilted_prob_high(&self, x: f64) -> Option<f64> {
        match *self {
            IncrementLaw::TwoPoint { a, b } => Some(b.powf(x) / (a.powf(x) + b.powf(x))),
            _ => None,
        }
    }
}

/// One evolution step: multiply each point by an independent increment and
/// re-sort. Returns the new configuration together with the increments in
/// the new ordering.
pub fn evolve<R: Rng + ?Sized>(
    cfg: &PointConfiguration,
    law: &IncrementLaw,
    rng: &mut R,
) -> Result<(PointConfiguration, Vec<f64>)> {
    law.validate()?;
    let mut pairs: Vec<(f64, f64)> = cfg
        .points
        .iter()
        .map(|&xi| {
            let g = law.sample(rng);
            (g * xi, g)
        })
        .collect();
    pairs.sort_by(|p, q| q.0.total_cmp(&p.0));
    let points: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let increments: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok((
        PointConfiguration {
            x: cfg.x,
            epsilon: cfg.epsilon,
            points,
        },
        increments,
    ))
}

fn top_normalized(cfg: &PointConfiguration, top_n: usize, normalized: bool) -> Result<Vec<f64>> {
    if cfg.points.len() < top_n {
        return Err(Error::Guard(format!(
            "configuration holds {} points, need {top_n}; lower epsilon",
            cfg.points.len()
        )));
    }
    if normalized {
        let z: f64 = cfg.points.iter().sum();
        Ok(cfg.points.iter().take(top_n).map(|p| p / z).collect())
    } else {
        Ok(cfg.points[..top_n].to_vec())
    }
}

/// Distributional stationarity test: the law of the top `top_n` normalized
/// weights after one evolution step is compared (per rank, across trials)
/// against freshly sampled configurations. Normalization cancels the
/// deterministic correction K, so a PASS here is the stationarity claim
/// itself.
pub fn quasi_stationarity_test(
    x: f64,
    law: &IncrementLaw,
    epsilon: f64,
    top_n: usize,
    trials: usize,
    seed: SeedSpec,
) -> Result<KsReport> {
    quasi_stationarity_comparison(x, law, epsilon, top_n, trials, seed, true)
}

/// Same harness without the normalization (and without the K correction):
/// for any law with K != 1 this comparison must FAIL, which pins down that
/// the harness has the power to see the correction.
pub fn quasi_stationarity_negative_control(
    x: f64,
    law: &IncrementLaw,
    epsilon: f64,
    top_n: usize,
    trials: usize,
    seed: SeedSpec,
) -> Result<KsReport> {
    quasi_stationarity_comparison(x, law, epsilon, top_n, trials, seed, false)
}

fn quasi_stationarity_comparison(
    x: f64,
    law: &IncrementLaw,
    epsilon: f64,
    top_n: usize,
    trials: usize,
    seed: SeedSpec,
    normalized: bool,
) -> Result<KsReport> {
    law.validate()?;
    let rows: Result<Vec<(Vec<f64>, Vec<f64>)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.child(1).stream(i as u64);
            let cfg = sample_rem(x, epsilon, &mut rng)?;
            let (evolved, _) = evolve(&cfg, law, &mut rng)?;
            let e = top_normalized(&evolved, top_n, normalized)?;
            let mut rng = seed.child(2).stream(i as u64);
            let fresh = sample_rem(x, epsilon, &mut rng)?;
            let f = top_normalized(&fresh, top_n, normalized)?;
            Ok((e, f))
        })
        .collect();
    let rows = rows?;
    let evolved: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
    let fresh: Vec<Vec<f64>> = rows.iter().map(|r| r.1.clone()).collect();
    Ok(per_rank_ks_report(&evolved, &fresh, top_n))
}

/// Report of the size-biased increment law test.
#[derive(Debug, Clone, Serialize)]
pub struct TiltReport {
    /// KS p-value against the tilted CDF (continuous laws) or the
    /// two-sided frequency z-test p (two-point law).
    pub law_p: f64,
    /// Pearson correlation of the re-read increment with its rank.
    pub rank_correlation: f64,
    /// 3 sigma band for the correlation under independence.
    pub rank_correlation_band: f64,
    pub pass: bool,
}

/// After one evolution step the increments, re-read in the new point
/// order, are iid from the size-biased law and independent of rank. Both
/// statements are tested from `trials` independent runs.
pub fn tilted_increment_test(
    x: f64,
    law: &IncrementLaw,
    epsilon: f64,
    top_n: usize,
    trials: usize,
    seed: SeedSpec,
) -> Result<TiltReport> {
    law.validate()?;
    let rows: Result<Vec<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i as u64);
            let cfg = sample_rem(x, epsilon, &mut rng)?;
            let (evolved, increments) = evolve(&cfg, law, &mut rng)?;
            if evolved.points.len() < top_n {
                return Err(Error::Guard(format!(
                    "configuration holds {} points, need {top_n}",
                    evolved.points.len()
                )));
            }
            Ok(increments[..top_n].to_vec())
        })
        .collect();
    let rows = rows?;
    let mut flat = Vec::with_capacity(rows.len() * top_n);
    let mut ranks = Vec::with_capacity(rows.len() * top_n);
    for row in &rows {
        for (rank, &g) in row.iter().enumerate() {
            flat.push(g);
            ranks.push((rank + 1) as f64);
        }
    }

    let law_p = if let Some(cdf) = law.tilted_cdf(x) {
        ks_one_sample(&flat, cdf).p_value
    } else if let Some(p_high) = law.tilted_prob_high(x) {
        // Frequency z-test for the two-point law.
        let (_, b) = match *law {
            IncrementLaw::TwoPoint { a, b } => (a, b),
            _ => unreachable!(),
        };
        let hits = flat.iter().filter(|&&g| g == b).count() as f64;
        let n = flat.len() as f64;
        let z = (hits / n - p_high) / (p_high * (1.0 - p_high) / n).sqrt();
        2.0 * (1.0 - normal_cdf(z.abs()))
    } else {
        // Point mass: the tilt is the law itself.
        1.0
    };

    let (rank_correlation, band) = if matches!(law, IncrementLaw::PointMass { .. }) {
        (0.0, 1.0) // constant increments carry no rank information
    } else {
        let corr = crate::stats::pearson(&ranks, &flat);
        // Samples within a trial share the configuration; treat trials as
        // the independent unit for the band.
        (corr, 3.0 / (rows.len() as f64).sqrt())
    };

    Ok(TiltReport {
        law_p,
        rank_correlation,
        rank_correlation_band: band,
        pass: law_p > 0.01 && rank_correlation.abs() <= band,
    })
}

/// Mean occupation of [a, infinity) over an ensemble, with its stderr,
/// against the analytic a^{-x}.
pub fn occupation_check(
    x: f64,
    epsilon: f64,
    a: f64,
    draws: usize,
    seed: SeedSpec,
) -> Result<(crate::stats::MeanStderr, f64)> {
    if a < epsilon {
        return Err(Error::InvalidParam(
            "occupation level must sit above the floor".into(),
        ));
    }
    let counts: Result<Vec<f64>> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i as u64);
            let cfg = sample_rem(x, epsilon, &mut rng)?;
            Ok(cfg.points.iter().filter(|&&p| p >= a).count() as f64)
        })
        .collect();
    Ok((mean_stderr(&counts?), a.powf(-x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedSpec;
    use crate::stats::ks_two_sample;

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = SeedSpec::new(60).rng();
        assert!(sample_rem(0.0, 0.01, &mut rng).is_err());
        assert!(sample_rem(1.0, 0.01, &mut rng).is_err());
        assert!(sample_rem(0.5, -1.0, &mut rng).is_err());
        // eps^-x = 1e8 > guard
        assert!(matches!(
            sample_rem(0.5, 1e-16, &mut rng),
            Err(Error::Guard(_))
        ));
    }

    #[test]
    fn points_descend_and_exceed_floor() {
        let mut rng = SeedSpec::new(61).rng();
        let cfg = sample_rem(0.5, 1e-3, &mut rng).unwrap();
        assert!(cfg.points.windows(2).all(|w| w[0] > w[1]));
        assert!(cfg.points.iter().all(|&p| p > cfg.epsilon));
    }

    #[test]
    fn mean_count_matches_intensity() {
        let x = 0.5;
        let eps = 0.01;
        let draws = 10_000;
        let counts: Vec<f64> = (0..draws)
            .map(|i| {
                let mut rng = SeedSpec::new(62).stream(i);
                sample_rem(x, eps, &mut rng).unwrap().points.len() as f64
            })
            .collect();
        let ms = mean_stderr(&counts);
        let expect = eps.powf(-x); // 10
        assert!(
            (ms.mean - expect).abs() <= 3.0 * (expect / draws as f64).sqrt(),
            "mean count {} vs {}",
            ms.mean,
            expect
        );
    }

    #[test]
    fn void_probability_of_the_maximum() {
        // P(max <= 1) = exp(-1) for x = 0.5 (level a = 1 => a^-x = 1).
        let draws = 10_000;
        let hits = (0..draws)
            .filter(|&i| {
                let mut rng = SeedSpec::new(63).stream(i);
                let cfg = sample_rem(0.5, 0.01, &mut rng).unwrap();
                cfg.points.first().map(|&m| m <= 1.0).unwrap_or(true)
            })
            .count();
        let p = hits as f64 / draws as f64;
        assert!((p - (-1.0f64).exp()).abs() < 0.02, "p = {p}");
    }

    #[test]
    fn top_m_matches_truncated_sampler_law() {
        // The maximum under both routes has CDF exp(-a^-x); compare the
        // two samplers with a two-sample KS on the max.
        let x = 0.6;
        let a: Vec<f64> = (0..3000)
            .map(|i| {
                let mut rng = SeedSpec::new(64).stream(i);
                sample_top_m(x, 1, &mut rng).unwrap()[0]
            })
            .collect();
        let b: Vec<f64> = (0..3000)
            .map(|i| {
                let mut rng = SeedSpec::new(65).stream(i);
                sample_rem(x, 1e-4, &mut rng).unwrap().points[0]
            })
            .collect();
        let r = ks_two_sample(&a, &b);
        assert!(r.p_value > 0.01, "p = {}", r.p_value);
    }

    #[test]
    fn partition_sum_empty_and_tail_bound() {
        let cfg = PointConfiguration {
            x: 0.5,
            epsilon: 1e-4,
            points: vec![],
        };
        let ps = partition_sum(&cfg);
        assert_eq!(ps.z, 0.0);
        // 0.5 * (1e-4)^{0.5} / 0.5 = 1e-2.
        assert!((ps.tail_bound - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn refinement_shifts_z_by_less_than_twice_the_bound() {
        // Couple the floors: sample at eps/10 and drop points below eps.
        let x = 0.5;
        let eps = 1e-3;
        let draws = 4000;
        let mut deltas = Vec::new();
        for i in 0..draws {
            let mut rng = SeedSpec::new(66).stream(i);
            let fine = sample_rem(x, eps / 10.0, &mut rng).unwrap();
            let z_fine: f64 = fine.points.iter().sum();
            let z_coarse: f64 = fine.points.iter().filter(|&&p| p > eps).sum();
            deltas.push(z_fine - z_coarse);
        }
        let ms = mean_stderr(&deltas);
        let bound = x * eps.powf(1.0 - x) / (1.0 - x);
        assert!(ms.mean > 0.0);
        assert!(ms.mean < 2.0 * bound, "delta {} vs bound {}", ms.mean, bound);
    }

    #[test]
    fn addition_law_under_union() {
        // Union of two independent samples vs 2^{1/x} times one sample.
        let x = 0.5;
        let eps = 1e-4;
        let draws = 10_000;
        let scale = 2.0f64.powf(1.0 / x);
        let union: Vec<f64> = (0..draws)
            .map(|i| {
                let mut rng = SeedSpec::new(67).stream(i);
                let z1 = partition_sum(&sample_rem(x, eps, &mut rng).unwrap()).z;
                let z2 = partition_sum(&sample_rem(x, eps, &mut rng).unwrap()).z;
                z1 + z2
            })
            .collect();
        let scaled: Vec<f64> = (0..draws)
            .map(|i| {
                let mut rng = SeedSpec::new(68).stream(i);
                scale * partition_sum(&sample_rem(x, eps, &mut rng).unwrap()).z
            })
            .collect();
        let r = ks_two_sample(&union, &scaled);
        assert!(r.p_value > 0.01, "p = {}", r.p_value);
    }

    #[test]
    fn max_transform_is_unit_exponential() {
        // xi_1^{-x} ~ Exp(1), so its mean is 1.
        let vals: Vec<f64> = (0..10_000)
            .map(|i| {
                let mut rng = SeedSpec::new(69).stream(i);
                sample_rem(0.5, 1e-4, &mut rng).unwrap().points[0].powf(-0.5)
            })
            .collect();
        let ms = mean_stderr(&vals);
        assert!((ms.mean - 1.0).abs() < 0.03, "mean {}", ms.mean);
    }

    #[test]
    fn evolve_point_mass_scales_in_place() {
        let mut rng = SeedSpec::new(70).rng();
        let cfg = sample_rem(0.5, 1e-3, &mut rng).unwrap();
        let (evolved, gammas) = evolve(&cfg, &IncrementLaw::PointMass { c: 2.5 }, &mut rng).unwrap();
        for (new, old) in evolved.points.iter().zip(&cfg.points) {
            assert_eq!(*new, 2.5 * old);
        }
        assert!(gammas.iter().all(|&g| g == 2.5));
    }

    #[test]
    fn increment_law_moments() {
        // Lognormal: <gamma^x> = e^{x^2 s^2 / 2}; K = e^{x s^2 / 2}.
        let law = IncrementLaw::LogNormal { s: 0.5 };
        let x = 0.5;
        assert!((law.moment_x(x) - (0.5f64 * 0.25 * 0.25).exp()).abs() < 1e-15);
        assert!((law.k_factor(x) - (0.0625f64).exp()).abs() < 1e-15);
        // Two-point: <gamma^x> = (a^x + b^x)/2.
        let law = IncrementLaw::TwoPoint { a: 1.0, b: 2.0 };
        assert!((law.moment_x(0.5) - 0.5 * (1.0 + 2.0f64.sqrt())).abs() < 1e-15);
        let p = law.tilted_prob_high(0.5).unwrap();
        assert!((p - 2.0f64.sqrt() / (1.0 + 2.0f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_laws_are_rejected() {
        assert!(IncrementLaw::PointMass { c: 0.0 }.validate().is_err());
        assert!(IncrementLaw::TwoPoint { a: -1.0, b: 2.0 }.validate().is_err());
        let mut rng = SeedSpec::new(71).rng();
        let cfg = sample_rem(0.5, 1e-2, &mut rng).unwrap();
        assert!(evolve(&cfg, &IncrementLaw::PointMass { c: -2.0 }, &mut rng).is_err());
    }

    #[test]
    fn occupation_counts_of_disjoint_intervals_uncorrelated() {
        let draws = 6000;
        let mut low = Vec::with_capacity(draws);
        let mut high = Vec::with_capacity(draws);
        for i in 0..draws {
            let mut rng = SeedSpec::new(72).stream(i as u64);
            let cfg = sample_rem(0.5, 1e-3, &mut rng).unwrap();
            low.push(cfg.points.iter().filter(|&&p| (0.01..0.1).contains(&p)).count() as f64);
            high.push(cfg.points.iter().filter(|&&p| p >= 0.1).count() as f64);
        }
        let corr = crate::stats::pearson(&low, &high);
        assert!(corr.abs() < 3.0 / (draws as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn moment_sums_converge_only_above_x() {
        // For v > x the sum over (eps, 1] stays bounded as eps shrinks;
        // for v < x it grows like eps^{v-x}. Compare medians at two floors.
        let x = 0.5;
        let summed = |v: f64, eps: f64, seed: u64| -> f64 {
            let mut vals: Vec<f64> = (0..800)
                .map(|i| {
                    let mut rng = SeedSpec::new(seed).stream(i);
                    sample_rem(x, eps, &mut rng)
                        .unwrap()
                        .points
                        .iter()
                        .filter(|&&p| p <= 1.0)
                        .map(|&p| p.powf(v))
                        .sum::<f64>()
                })
                .collect();
            vals.sort_by(f64::total_cmp);
            vals[400]
        };
        let grow_low = summed(0.25, 1e-5, 73) / summed(0.25, 1e-3, 74);
        let grow_high = summed(0.75, 1e-5, 75) / summed(0.75, 1e-3, 76);
        assert!(grow_low > 2.0, "divergent sum grew only {grow_low}");
        assert!(grow_high < 1.5, "convergent sum grew {grow_high}");
    }

    #[test]
    fn z_moment_heavy_tail_diagnostic() {
        // u < x: empirical mean of Z^u stабilizes under sample doubling and
        // no single draw dominates. u > x: the maximum carries a big share.
        let x = 0.5;
        let zs: Vec<f64> = (0..8000)
            .map(|i| {
                let mut rng = SeedSpec::new(77).stream(i);
                partition_sum(&sample_rem(x, 1e-4, &mut rng).unwrap()).z
            })
            .collect();
        let diag = |u: f64| -> (f64, f64) {
            let pow: Vec<f64> = zs.iter().map(|z| z.powf(u)).collect();
            let half: f64 = pow[..4000].iter().sum::<f64>() / 4000.0;
            let full: f64 = pow.iter().sum::<f64>() / 8000.0;
            let max_share = pow.iter().copied().fold(0.0, f64::max) / pow.iter().sum::<f64>();
            ((full / half - 1.0).abs(), max_share)
        };
        let (drift_low, share_low) = diag(x / 2.0);
        let (_, share_high) = diag((1.0 + x) / 2.0);
        assert!(drift_low < 0.05, "low moment drift {drift_low}");
        assert!(
            share_high > 5.0 * share_low,
            "shares {share_low} vs {share_high} do not separate"
        );
    }
}
