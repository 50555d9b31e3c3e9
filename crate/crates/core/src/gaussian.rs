//! Correlated Gaussian families and the covariance-differentiation toolkit.
//!
//! The central identity: for a centered Gaussian vector X with covariance
//! C(t) and a smooth test function psi,
//!
//! ```text
//! d/dt E_t[psi(X)] = (1/2) sum_{g,g'} dC_{g,g'}/dt E_t[d2 psi / dX_g dX_g']
//! ```
//!
//! Specialized to psi = ln sum_g xi_g e^{-beta X_g}, the derivative splits
//! into single- and double-replica averages of dC/dt under the random Gibbs
//! weights zeta_t. Everything downstream (superadditivity, the reservoir
//! bound, the fugacity-term evaluation) is an application of that split, so
//! this module carries Monte Carlo estimators for both sides plus the
//! two-family comparison bound they imply.

use crate::error::{Error, Result};
use crate::linalg::{psd_factor, psd_factor_in_order, Mat, PsdFactor};
use crate::stats::{mean_stderr, MeanStderr};
use rand::Rng;
use rand_distr::StandardNormal;

/// Relative pivot tolerance for covariance factorizations: overlap kernels
/// assembled from sampled configurations are PSD only up to rounding.
pub const PSD_REL_TOL: f64 = 1e-10;

/// A centered Gaussian family given by its covariance matrix.
#[derive(Debug, Clone)]
pub struct GaussianFamily {
    cov: Mat,
    factor: PsdFactor,
}

impl GaussianFamily {
    pub fn new(cov: Mat) -> Result<Self> {
        if cov.asymmetry() > 1e-9 * (1.0 + cov.frobenius()) {
            return Err(Error::InvalidParam("covariance must be symmetric".into()));
        }
        let factor = psd_factor(&cov, PSD_REL_TOL)?;
        Ok(GaussianFamily { cov, factor })
    }

    pub fn n(&self) -> usize {
        self.cov.n()
    }

    pub fn cov(&self) -> &Mat {
        &self.cov
    }

    pub fn rank(&self) -> usize {
        self.factor.rank()
    }

    /// One draw of the family. Rank-deficient covariances are fine: the
    /// pivoted square root simply maps fewer independent normals.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.factor.sample(rng)
    }
}

/// One-parameter covariance path t -> C(t) with its derivative.
pub struct CovariancePath<'a> {
    pub n: usize,
    pub cov: Box<dyn Fn(f64) -> Mat + Sync + 'a>,
    pub dcov: Box<dyn Fn(f64) -> Mat + Sync + 'a>,
}

impl<'a> CovariancePath<'a> {
    /// Linear interpolation C(t) = (1-t) C0 + t C1.
    pub fn linear(c0: Mat, c1: Mat) -> Result<Self> {
        if c0.n() != c1.n() {
            return Err(Error::LengthMismatch {
                left: c0.n(),
                right: c1.n(),
            });
        }
        let n = c0.n();
        let d = Mat::from_fn(n, |i, j| c1[(i, j)] - c0[(i, j)]);
        let c0c = c0.clone();
        Ok(CovariancePath {
            n,
            cov: Box::new(move |t| {
                Mat::from_fn(n, |i, j| (1.0 - t) * c0c[(i, j)] + t * c1[(i, j)])
            }),
            dcov: Box::new(move |_| d.clone()),
        })
    }
}

/// Test functions for the differentiation identity: a value and its second
/// partials. The default second partial is a central finite difference,
/// good enough for smooth psi at the tolerances used here; closed forms
/// override it.
pub trait PathFunction: Sync {
    fn value(&self, x: &[f64]) -> f64;

    fn second_partial(&self, i: usize, j: usize, x: &[f64]) -> f64 {
        let h = 1e-4;
        let mut p = x.to_vec();
        if i == j {
            let f0 = self.value(&p);
            p[i] = x[i] + h;
            let fp = self.value(&p);
            p[i] = x[i] - h;
            let fm = self.value(&p);
            (fp - 2.0 * f0 + fm) / (h * h)
        } else {
            p[i] = x[i] + h;
            p[j] = x[j] + h;
            let fpp = self.value(&p);
            p[j] = x[j] - h;
            let fpm = self.value(&p);
            p[i] = x[i] - h;
            let fmm = self.value(&p);
            p[j] = x[j] + h;
            let fmp = self.value(&p);
            (fpp - fpm - fmp + fmm) / (4.0 * h * h)
        }
    }
}

/// psi(x) = ln sum_g xi_g e^{-beta x_g}, the shape all interpolation
/// arguments run through. Second partials are closed-form in the Gibbs
/// weights.
pub struct LogSumWeights {
    pub weights: Vec<f64>,
    pub beta: f64,
}

impl LogSumWeights {
    /// Normalized zeta weights for a realization x.
    pub fn zeta(&self, x: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = self
            .weights
            .iter()
            .zip(x)
            .map(|(w, xv)| w.ln() - self.beta * xv)
            .collect();
        let lse = crate::math::log_sum_exp(&logs);
        logs.iter().map(|l| (l - lse).exp()).collect()
    }
}

impl PathFunction for LogSumWeights {
    fn value(&self, x: &[f64]) -> f64 {
        let logs: Vec<f64> = self
            .weights
            .iter()
            .zip(x)
            .map(|(w, xv)| w.ln() - self.beta * xv)
            .collect();
        crate::math::log_sum_exp(&logs)
    }

    fn second_partial(&self, i: usize, j: usize, x: &[f64]) -> f64 {
        let z = self.zeta(x);
        let b2 = self.beta * self.beta;
        if i == j {
            b2 * (z[i] - z[i] * z[i])
        } else {
            -b2 * z[i] * z[j]
        }
    }
}

/// Coordinate monomial prod_i x_i^powers_i, for Wick-checkable cases.
pub struct Monomial {
    pub powers: Vec<u32>,
}

impl PathFunction for Monomial {
    fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.powers)
            .map(|(&v, &p)| v.powi(p as i32))
            .product()
    }
}

/// Weighted replica average E_t^(n)(f) over disorder realizations of the
/// family, with the Gibbs weights zeta built from `measure`.
///
/// `n_replicas` must be 1 or 2; `f` receives the replica indices.
pub fn replica_average<R: Rng + ?Sized>(
    measure: &LogSumWeights,
    family: &GaussianFamily,
    f: impl Fn(&[usize]) -> f64,
    n_replicas: usize,
    rng: &mut R,
    samples: usize,
) -> Result<MeanStderr> {
    if !(1..=2).contains(&n_replicas) {
        return Err(Error::InvalidParam(format!(
            "replica count {n_replicas} not in {{1, 2}}"
        )));
    }
    if measure.weights.len() != family.n() {
        return Err(Error::LengthMismatch {
            left: measure.weights.len(),
            right: family.n(),
        });
    }
    let m = family.n();
    let mut vals = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = family.sample(rng);
        let z = measure.zeta(&x);
        debug_assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let v = match n_replicas {
            1 => (0..m).map(|g| f(&[g]) * z[g]).sum::<f64>(),
            _ => {
                let mut acc = 0.0;
                for g1 in 0..m {
                    for g2 in 0..m {
                        acc += f(&[g1, g2]) * z[g1] * z[g2];
                    }
                }
                acc
            }
        };
        if !v.is_finite() {
            return Err(Error::Numerical("non-finite replica functional".into()));
        }
        vals.push(v);
    }
    Ok(mean_stderr(&vals))
}

/// Report from [`differentiation_identity_residual`].
#[derive(Debug, Clone)]
pub struct DiffIdentityReport {
    pub lhs: MeanStderr,
    pub rhs: MeanStderr,
    /// Paired per-sample difference LHS - RHS (common random numbers).
    pub diff: MeanStderr,
}

impl DiffIdentityReport {
    pub fn residual(&self) -> f64 {
        self.diff.mean.abs()
    }
}

/// Finite-difference step for t-derivatives.
pub const T_DERIV_STEP: f64 = 1e-3;

/// Monte Carlo check of the differentiation identity at interpolation time
/// `t`: LHS is a central difference of E_t[psi] in t, RHS is the halved
/// double sum of dC/dt against second partials. Both sides ride on the same
/// standard normal draws so the paired difference has far smaller variance
/// than either side alone.
pub fn differentiation_identity_residual<R: Rng + ?Sized>(
    path: &CovariancePath,
    psi: &dyn PathFunction,
    t: f64,
    rng: &mut R,
    samples: usize,
) -> Result<DiffIdentityReport> {
    let h = T_DERIV_STEP;
    if t - h < 0.0 || t + h > 1.0 {
        return Err(Error::OutOfRange {
            what: "t",
            value: t,
            range: "[h, 1-h]",
        });
    }
    let n = path.n;
    let c_mid = (path.cov)(t);
    let dc = (path.dcov)(t);
    // Fix the elimination order once so the t +/- h factors vary smoothly;
    // a pivot swap between the two would wreck the pairing.
    let order = psd_factor(&c_mid, PSD_REL_TOL)?.into_order();
    let f_mid = psd_factor_in_order(&c_mid, &order, PSD_REL_TOL)?;
    let f_plus = psd_factor_in_order(&(path.cov)(t + h), &order, PSD_REL_TOL)?;
    let f_minus = psd_factor_in_order(&(path.cov)(t - h), &order, PSD_REL_TOL)?;

    let mut lhs = Vec::with_capacity(samples);
    let mut rhs = Vec::with_capacity(samples);
    let mut diff = Vec::with_capacity(samples);
    let mut z = vec![0.0; n];
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let xp = f_plus.apply(&z);
        let xm = f_minus.apply(&z);
        let vp = psi.value(&xp);
        let vm = psi.value(&xm);
        if !vp.is_finite() || !vm.is_finite() {
            return Err(Error::Numerical("non-finite psi value".into()));
        }
        let l = (vp - vm) / (2.0 * h);

        let x = f_mid.apply(&z);
        let mut r = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = dc[(i, j)];
                if d != 0.0 {
                    r += d * psi.second_partial(i, j, &x);
                }
            }
        }
        r *= 0.5;
        lhs.push(l);
        rhs.push(r);
        diff.push(l - r);
    }
    Ok(DiffIdentityReport {
        lhs: mean_stderr(&lhs),
        rhs: mean_stderr(&rhs),
        diff: mean_stderr(&diff),
    })
}

/// The two bracketed terms of the replica-split derivative at time `t`:
/// `beta^2/2 * E_t^(1)(dC_{g,g})` and `beta^2/2 * E_t^(2)(dC_{g,g'})`.
/// Their difference estimates d/dt E_t[psi] for the log-sum weight shape.
pub fn interpolation_derivative<R: Rng + ?Sized>(
    path: &CovariancePath,
    measure: &LogSumWeights,
    t: f64,
    rng: &mut R,
    samples: usize,
) -> Result<(MeanStderr, MeanStderr)> {
    let n = path.n;
    if measure.weights.len() != n {
        return Err(Error::LengthMismatch {
            left: measure.weights.len(),
            right: n,
        });
    }
    let c = (path.cov)(t);
    let dc = (path.dcov)(t);
    let factor = psd_factor(&c, PSD_REL_TOL)?;
    let half_b2 = 0.5 * measure.beta * measure.beta;

    let mut one = Vec::with_capacity(samples);
    let mut two = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = factor.sample(rng);
        let zeta = measure.zeta(&x);
        let single: f64 = (0..n).map(|g| zeta[g] * dc[(g, g)]).sum();
        let mut double = 0.0;
        for g1 in 0..n {
            for g2 in 0..n {
                double += zeta[g1] * zeta[g2] * dc[(g1, g2)];
            }
        }
        one.push(half_b2 * single);
        two.push(half_b2 * double);
    }
    Ok((mean_stderr(&one), mean_stderr(&two)))
}

/// Report from [`family_comparison_bound`].
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub e_psi_x: MeanStderr,
    pub e_psi_y: MeanStderr,
    /// |E psi(X) - E psi(Y)| point estimate.
    pub difference: f64,
    /// Combined standard error of the difference.
    pub stderr: f64,
    /// beta^2 (or beta^2/2 with matching diagonals) * max |Cov_X - Cov_Y|.
    pub bound: f64,
    /// difference <= bound + 3 stderr.
    pub holds: bool,
}

/// Interpolation bound between two independent centered families on the
/// same index set: |E psi(X) - E psi(Y)| <= beta^2 max |C_X - C_Y|, with
/// the constant halved when every diagonal entry matches (within 1e-12).
pub fn family_comparison_bound<R: Rng + ?Sized>(
    x: &GaussianFamily,
    y: &GaussianFamily,
    measure: &LogSumWeights,
    rng: &mut R,
    samples: usize,
) -> Result<ComparisonReport> {
    if x.n() != y.n() {
        return Err(Error::LengthMismatch {
            left: x.n(),
            right: y.n(),
        });
    }
    let n = x.n();
    if measure.weights.len() != n {
        return Err(Error::LengthMismatch {
            left: measure.weights.len(),
            right: n,
        });
    }
    let mut max_dev = 0.0f64;
    let mut diagonals_match = true;
    for i in 0..n {
        for j in 0..n {
            let d = (x.cov()[(i, j)] - y.cov()[(i, j)]).abs();
            max_dev = max_dev.max(d);
            if i == j && d > 1e-12 {
                diagonals_match = false;
            }
        }
    }
    let factor = if diagonals_match {
        0.5 * measure.beta * measure.beta
    } else {
        measure.beta * measure.beta
    };
    let bound = factor * max_dev;

    let mut vx = Vec::with_capacity(samples);
    let mut vy = Vec::with_capacity(samples);
    for _ in 0..samples {
        vx.push(measure.value(&x.sample(rng)));
        vy.push(measure.value(&y.sample(rng)));
    }
    let ex = mean_stderr(&vx);
    let ey = mean_stderr(&vy);
    let difference = (ex.mean - ey.mean).abs();
    let stderr = (ex.stderr * ex.stderr + ey.stderr * ey.stderr).sqrt();
    Ok(ComparisonReport {
        difference,
        stderr,
        bound,
        holds: difference <= bound + 3.0 * stderr,
        e_psi_x: ex,
        e_psi_y: ey,
    })
}
