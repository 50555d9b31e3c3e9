//! Hierarchical cascade of REM levels.
//!
//! A step order parameter with levels x_1 < ... < x_k drives a depth-k
//! tree: the root carries a REM_{x_1} sample, each of its atoms carries an
//! independent REM_{x_2} sample, and so on. A leaf is addressed by the
//! chain of atom picks; its weight is the product of the factors along the
//! path. Each node keeps its top `m` atoms, so the tree is a complete
//! m-ary tree with m^k leaves.
//!
//! The genealogy defines the ultrametric overlap kernel: two distinct
//! leaves sharing a prefix of length j overlap at q_{j+1} (so strangers
//! meet at q_1 and identical leaves at 1). This is the indexing under
//! which the two-replica law P(q12 <= q) = x(q) and the edge-increment
//! field decomposition are mutually consistent; the alternative
//! prefix -> q_j convention fails both cross-checks.

use crate::error::{Error, Result};
use crate::math::ln_cosh;
use crate::order_param::OrderParameter;
use crate::rem::sample_top_m;
use crate::rng::SeedSpec;
use crate::stats::{per_rank_ks_report, KsReport};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

/// Leaf-count guard.
pub const LEAF_GUARD: usize = 1_000_000;

/// A built cascade: per-node descending factor lists, leaf weights, and
/// the cached sampling table.
#[derive(Debug, Clone)]
pub struct Cascade {
    params: OrderParameter,
    m: usize,
    /// levels[d] holds the factors of all depth-(d+1) nodes: the node with
    /// address prefix p (an index over m^d) stores its children's factors
    /// at [p * m .. (p + 1) * m], descending within each node.
    levels: Vec<Vec<f64>>,
    /// Product of path factors per leaf (length m^k).
    leaf_weights: Vec<f64>,
    z: f64,
    /// Cumulative normalized weights for replica sampling.
    cdf: Vec<f64>,
}

impl Cascade {
    pub fn params(&self) -> &OrderParameter {
        &self.params
    }

    pub fn branching(&self) -> usize {
        self.m
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_weights.len()
    }

    pub fn leaf_weights(&self) -> &[f64] {
        &self.leaf_weights
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn normalized_weight(&self, leaf: usize) -> f64 {
        self.leaf_weights[leaf] / self.z
    }

    /// Normalized weights in descending order.
    pub fn normalized_sorted(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self.leaf_weights.iter().map(|v| v / self.z).collect();
        w.sort_by(|a, b| b.total_cmp(a));
        w
    }

    /// Shared-prefix length of two leaf addresses, in 0..=k.
    pub fn shared_prefix(&self, a: usize, b: usize) -> usize {
        let k = self.depth();
        let mut div = self.leaf_count();
        for j in 0..k {
            div /= self.m;
            if a / div != b / div {
                return j;
            }
        }
        k
    }

    /// Ultrametric overlap of two leaves.
    pub fn overlap(&self, a: usize, b: usize) -> Result<f64> {
        if a >= self.leaf_count() || b >= self.leaf_count() {
            return Err(Error::OutOfRange {
                what: "leaf address",
                value: a.max(b) as f64,
                range: "0..leaf_count",
            });
        }
        if a == b {
            return Ok(1.0);
        }
        let j = self.shared_prefix(a, b);
        Ok(self.params.q_levels()[j])
    }

    /// Overlap values indexed by shared-path depth: [0, q_1, ..., q_k, 1].
    /// Entry d is the overlap floor after sharing d tree edges.
    pub fn overlap_ladder(&self) -> Vec<f64> {
        let mut ladder = vec![0.0];
        ladder.extend(self.params.q_levels());
        ladder.push(1.0);
        ladder
    }

    /// Gaussian field with covariance G(q_{ab}) for a nondecreasing
    /// profile G given by its values on the overlap ladder (G(0) fixes the
    /// global offset and is subtracted). Built from independent edge
    /// increments of variance G(ladder[d+1]) - G(ladder[d]), so typical
    /// profiles are G = q (the genealogy field), G = min(t, q), or the
    /// halved cavity covariances f'(q)/2 and phi(q)/2.
    pub fn ladder_field<R: Rng + ?Sized>(
        &self,
        profile: &[f64],
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let k = self.depth();
        if profile.len() != k + 2 {
            return Err(Error::LengthMismatch {
                left: profile.len(),
                right: k + 2,
            });
        }
        if profile.windows(2).any(|w| w[1] < w[0] - 1e-12) {
            return Err(Error::InvalidParam(
                "covariance profile must be nondecreasing along the ladder".into(),
            ));
        }
        let var_at = |d: usize| (profile[d + 1] - profile[d]).max(0.0);
        let root: f64 = var_at(0).sqrt() * rng.sample::<f64, _>(StandardNormal);
        let mut partial = vec![root];
        for d in 1..=k {
            let sd = var_at(d).sqrt();
            let mut next = Vec::with_capacity(partial.len() * self.m);
            for &p in &partial {
                for _ in 0..self.m {
                    let z: f64 = rng.sample(StandardNormal);
                    next.push(p + sd * z);
                }
            }
            partial = next;
        }
        Ok(partial)
    }

    /// Draw a leaf proportionally to its normalized weight.
    pub fn sample_leaf<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        match self.cdf.binary_search_by(|c| c.total_cmp(&u)) {
            Ok(i) | Err(i) => i.min(self.leaf_count() - 1),
        }
    }

    /// Draw `n` replicas iid from the normalized weights.
    pub fn sample_replicas<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n).map(|_| self.sample_leaf(rng)).collect()
    }
}

/// Build the cascade, sampling the top `m` atoms of the appropriate REM
/// level at every node.
pub fn build_cascade<R: Rng + ?Sized>(
    params: &OrderParameter,
    m: usize,
    rng: &mut R,
) -> Result<Cascade> {
    if params.is_annealed() {
        return Err(Error::InvalidParam(
            "the x = 1 limit has a divergent normalization; it is not sampleable".into(),
        ));
    }
    let k = params.k();
    if k == 0 {
        return Err(Error::InvalidParam(
            "cascade needs at least one level; k = 0 has a single state".into(),
        ));
    }
    if m < 1 {
        return Err(Error::InvalidParam("branching must be positive".into()));
    }
    let leaves = m.checked_pow(k as u32).filter(|&l| l <= LEAF_GUARD);
    let Some(leaf_count) = leaves else {
        return Err(Error::Guard(format!(
            "m^k = {m}^{k} exceeds the leaf guard {LEAF_GUARD}"
        )));
    };
    let xs = params.x_levels();
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut nodes = 1usize;
    for x in xs.iter().take(k) {
        let mut level = Vec::with_capacity(nodes * m);
        for _ in 0..nodes {
            level.extend(sample_top_m(*x, m, rng)?);
        }
        levels.push(level);
        nodes *= m;
    }

    let mut leaf_weights = vec![1.0f64; 1];
    for level in &levels {
        let mut next = Vec::with_capacity(leaf_weights.len() * m);
        for (parent, &w) in leaf_weights.iter().enumerate() {
            for c in 0..m {
                next.push(w * level[parent * m + c]);
            }
        }
        leaf_weights = next;
    }
    debug_assert_eq!(leaf_weights.len(), leaf_count);

    let z: f64 = leaf_weights.iter().sum();
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::Numerical(format!("degenerate cascade weight {z}")));
    }
    let mut cdf = Vec::with_capacity(leaf_count);
    let mut acc = 0.0;
    for &w in &leaf_weights {
        acc += w / z;
        cdf.push(acc);
    }
    Ok(Cascade {
        params: params.clone(),
        m,
        levels,
        leaf_weights,
        z,
        cdf,
    })
}

/// Tree-correlated Gaussian field: one value per leaf per spin copy, built
/// from independent edge increments so that Cov(eta_a, eta_b) equals the
/// overlap kernel, or min(t, overlap) when truncated at `t`.
#[derive(Debug, Clone)]
pub struct HierarchicalField {
    pub t: f64,
    /// values[spin][leaf].
    pub values: Vec<Vec<f64>>,
}

pub fn hierarchical_field<R: Rng + ?Sized>(
    cascade: &Cascade,
    n_spins: usize,
    t: Option<f64>,
    rng: &mut R,
) -> Result<HierarchicalField> {
    let t = t.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange {
            what: "t",
            value: t,
            range: "[0, 1]",
        });
    }
    // Profile G(q) = min(t, q) on the overlap ladder clips every edge
    // variance from above at t.
    let ladder = cascade.overlap_ladder();
    let profile: Vec<f64> = ladder.iter().map(|&q| t.min(q)).collect();
    let values = (0..n_spins)
        .map(|_| cascade.ladder_field(&profile, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(HierarchicalField { t, values })
}

/// Built-in Lipschitz reweighting functions for the cascade evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PsiFn {
    /// ln cosh(beta (y + h)), the one-spin cavity factor shape.
    LnCosh { beta: f64, h: f64 },
    /// slope * y.
    Linear { slope: f64 },
    /// amp * tanh(y), bounded.
    Sigmoid { amp: f64 },
}

impl PsiFn {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            PsiFn::LnCosh { beta, h } => ln_cosh(beta * (y + h)),
            PsiFn::Linear { slope } => slope * y,
            PsiFn::Sigmoid { amp } => amp * y.tanh(),
        }
    }

    /// Lipschitz bound; all built-ins are finite by construction.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            PsiFn::LnCosh { beta, .. } => beta.abs(),
            PsiFn::Linear { slope } => slope.abs(),
            PsiFn::Sigmoid { amp } => amp.abs(),
        }
    }
}

/// One evolution step: reweight every leaf by exp(psi(eta_leaf)) with the
/// tree-correlated field, and return the normalized weights in descending
/// order.
pub fn evolve_weights<R: Rng + ?Sized>(
    cascade: &Cascade,
    psi: &PsiFn,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !psi.lipschitz().is_finite() {
        return Err(Error::InvalidParam("psi must be Lipschitz".into()));
    }
    let field = hierarchical_field(cascade, 1, None, rng)?;
    let eta = &field.values[0];
    let mut w: Vec<f64> = cascade
        .leaf_weights
        .iter()
        .zip(eta)
        .map(|(&xi, &y)| xi * psi.eval(y).exp())
        .collect();
    let z: f64 = w.iter().sum();
    if !z.is_finite() || z <= 0.0 {
        return Err(Error::Numerical("degenerate evolved weight".into()));
    }
    for v in w.iter_mut() {
        *v /= z;
    }
    w.sort_by(|a, b| b.total_cmp(a));
    Ok(w)
}

/// Distributional stationarity of the cascade under correlated
/// reweighting: top `top_n` normalized evolved weights across `trials`
/// compared rank-wise against freshly built cascades.
pub fn cascade_quasi_stationarity_test(
    params: &OrderParameter,
    m: usize,
    psi: &PsiFn,
    top_n: usize,
    trials: usize,
    seed: SeedSpec,
) -> Result<KsReport> {
    cascade_qs_comparison(params, params, m, psi, top_n, trials, seed)
}

/// Negative control: evolved cascades at `params` against fresh cascades
/// at `other`. With mismatched level structure this must FAIL.
pub fn cascade_qs_mismatch_control(
    params: &OrderParameter,
    other: &OrderParameter,
    m: usize,
    psi: &PsiFn,
    top_n: usize,
    trials: usize,
    seed: SeedSpec,
) -> Result<KsReport> {
    cascade_qs_comparison(params, other, m, psi, top_n, trials, seed)
}

fn cascade_qs_comparison(
    params: &OrderParameter,
    fresh_params: &OrderParameter,
    m: usize,
    psi: &PsiFn,
    top_n: usize,
    trials: usize,
    seed: SeedSpec,
) -> Result<KsReport> {
    if top_n > m.pow(params.k() as u32) {
        return Err(Error::InvalidParam(format!(
            "top_n = {top_n} exceeds the leaf count"
        )));
    }
    let rows: Result<Vec<(Vec<f64>, Vec<f64>)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.child(1).stream(i as u64);
            let cascade = build_cascade(params, m, &mut rng)?;
            let evolved = evolve_weights(&cascade, psi, &mut rng)?;
            let mut rng = seed.child(2).stream(i as u64);
            let fresh = build_cascade(fresh_params, m, &mut rng)?.normalized_sorted();
            Ok((evolved[..top_n].to_vec(), fresh[..top_n].to_vec()))
        })
        .collect();
    let rows = rows?;
    let evolved: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
    let fresh: Vec<Vec<f64>> = rows.iter().map(|r| r.1.clone()).collect();
    Ok(per_rank_ks_report(&evolved, &fresh, top_n))
}

/// Empirical two-replica overlap CDF against the order parameter.
#[derive(Debug, Clone, Serialize)]
pub struct OverlapLawReport {
    /// Jump locations q_1..q_k.
    pub q_grid: Vec<f64>,
    /// Empirical P(q12 <= q_j).
    pub empirical_cdf: Vec<f64>,
    /// x(q_j), the target.
    pub expected_cdf: Vec<f64>,
    pub max_abs_dev: f64,
}

/// Sample replica pairs from independently built cascades and compare the
/// overlap CDF on the level grid against x(q).
pub fn two_replica_overlap_law(
    params: &OrderParameter,
    m: usize,
    n_cascades: usize,
    pairs_per_cascade: usize,
    seed: SeedSpec,
) -> Result<OverlapLawReport> {
    let k = params.k();
    let q_grid = params.q_levels();
    let counts: Result<Vec<Vec<u64>>> = (0..n_cascades)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i as u64);
            let cascade = build_cascade(params, m, &mut rng)?;
            // counts[j] = pairs with shared prefix exactly j; slot k =
            // identical leaves.
            let mut c = vec![0u64; k + 1];
            for _ in 0..pairs_per_cascade {
                let r = cascade.sample_replicas(2, &mut rng);
                if r[0] == r[1] {
                    c[k] += 1;
                } else {
                    c[cascade.shared_prefix(r[0], r[1])] += 1;
                }
            }
            Ok(c)
        })
        .collect();
    let counts = counts?;
    let mut total = vec![0u64; k + 1];
    for c in counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    let pairs: u64 = total.iter().sum();
    // P(q12 <= q_j) = P(prefix < j).
    let mut empirical_cdf = Vec::with_capacity(k);
    let mut acc = 0u64;
    for &t in total.iter().take(k) {
        acc += t;
        empirical_cdf.push(acc as f64 / pairs as f64);
    }
    let expected_cdf: Vec<f64> = params.x_levels();
    let max_abs_dev = empirical_cdf
        .iter()
        .zip(&expected_cdf)
        .map(|(e, x)| (e - x).abs())
        .fold(0.0f64, f64::max);
    Ok(OverlapLawReport {
        q_grid,
        empirical_cdf,
        expected_cdf,
        max_abs_dev,
    })
}

/// Direct estimate of the coincidence probability E sum_n p_n^2 of the
/// top-m one-level ensemble, used to pin truncation bias independently of
/// the cascade machinery.
pub fn top_m_coincidence(x: f64, m: usize, draws: usize, seed: SeedSpec) -> Result<f64> {
    let vals: Result<Vec<f64>> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed.stream(i as u64);
            let pts = sample_top_m(x, m, &mut rng)?;
            let z: f64 = pts.iter().sum();
            Ok(pts.iter().map(|p| (p / z) * (p / z)).sum())
        })
        .collect();
    Ok(crate::math::mean(&vals?))
}
