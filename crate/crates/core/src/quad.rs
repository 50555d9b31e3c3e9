//! Gaussian quadrature rules.
//!
//! The workhorse is the probabilists' Gauss-Hermite rule: nodes and weights
//! for E_z[g(z)] with z standard normal. Nodes come from the Golub-Welsch
//! construction, i.e. the symmetric tridiagonal recurrence matrix
//! diagonalized with the crate's own Jacobi solver, so the rule is accurate
//! to machine precision without tabulated constants.

use crate::error::Result;
use crate::linalg::{jacobi_eigen_sym, Mat};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Quadrature rule for expectations against the standard normal density.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Rule with `order` nodes; exact for polynomials of degree 2*order - 1.
    pub fn new(order: usize) -> Result<Self> {
        assert!(order >= 1);
        // Monic Hermite_e recurrence: beta_k = k, so the Golub-Welsch matrix
        // has off-diagonal sqrt(k) and zero diagonal.
        let mut t = Mat::zeros(order);
        for k in 1..order {
            let b = (k as f64).sqrt();
            t[(k - 1, k)] = b;
            t[(k, k - 1)] = b;
        }
        let eig = jacobi_eigen_sym(&t, 1e-14)?;
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|k| {
                let v0 = eig.vectors.row(k)[0];
                (eig.values[k], v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Far-node weights are e^{-z^2/2}-tiny; the eigenvector route
        // computes them as squares of ~1e-16-noisy components, flooring
        // them at ~1e-32 instead of their true (much smaller) size.
        // Exponentially growing integrands then amplify that noise, so
        // prune everything at the noise floor: the discarded true mass is
        // below e^{-64}, harmless for any integrand of at most
        // exponential growth (all of this crate's are).
        pairs.retain(|p| p.1 > 1e-28);
        let nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        Ok(GaussHermite { nodes, weights })
    }

    /// Shared rule from a process-wide cache. Node construction costs a
    /// dense eigensolve, and the recursive solver asks for the same orders
    /// thousands of times.
    pub fn cached(order: usize) -> Arc<GaussHermite> {
        static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
        let mut guard = cache.lock().unwrap();
        guard
            .entry(order)
            .or_insert_with(|| Arc::new(GaussHermite::new(order).expect("gauss-hermite rule")))
            .clone()
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// E_z[g(z)], z ~ N(0,1).
    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    /// E[g(z1, z2)] for independent standard normals.
    pub fn expect2(&self, mut g: impl FnMut(f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (&x1, &w1) in self.nodes.iter().zip(&self.weights) {
            for (&x2, &w2) in self.nodes.iter().zip(&self.weights) {
                acc += w1 * w2 * g(x1, x2);
            }
        }
        acc
    }
}

/// Gauss-Legendre rule on [0, 1] (used for interpolation-path integrals).
pub fn gauss_legendre_unit(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    assert!(order >= 1);
    // Monic Legendre recurrence on [-1, 1]: beta_k = k^2 / (4k^2 - 1).
    let mut t = Mat::zeros(order);
    for k in 1..order {
        let kk = k as f64;
        let b = (kk * kk / (4.0 * kk * kk - 1.0)).sqrt();
        t[(k - 1, k)] = b;
        t[(k, k - 1)] = b;
    }
    let eig = jacobi_eigen_sym(&t, 1e-14)?;
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|k| {
            let v0 = eig.vectors.row(k)[0];
            (eig.values[k], 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Map x in [-1,1] to t in [0,1]; weights pick up the 1/2 Jacobian.
    let nodes = pairs.iter().map(|p| 0.5 * (p.0 + 1.0)).collect();
    let weights = pairs.iter().map(|p| 0.5 * p.1).collect();
    Ok((nodes, weights))
}
