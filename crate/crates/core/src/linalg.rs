//! Dense symmetric linear algebra: square matrices, positive-semidefinite
//! factorization, and a cyclic Jacobi eigensolver.
//!
//! Everything here is written for matrices that are symmetric by
//! construction (covariances, Gram kernels). Sizes range from 2x2 test
//! fixtures to a few thousand, which is squarely in Jacobi territory; no
//! external solver is pulled in.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Row-major square matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n: usize,
    a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat {
            n,
            a: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Mat::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::LengthMismatch {
                    left: r.len(),
                    right: n,
                });
            }
            m.a[i * n..(i + 1) * n].copy_from_slice(r);
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute asymmetry |a_ij - a_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// (A + A^T) / 2.
    pub fn symmetrized(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| 0.5 * (self[(i, j)] + self[(j, i)]))
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.a[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.a[i * self.n + j]
    }
}

/// Square-root factor of a positive-semidefinite matrix, possibly
/// rank-deficient: `C = P L L^T P^T` with `P` the pivot permutation.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    n: usize,
    rank: usize,
    /// `perm[k]` = original index handled at elimination step k.
    perm: Vec<usize>,
    /// Row-major `n x rank`, rows in pivot order.
    l: Vec<f64>,
}

impl PsdFactor {
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Elimination order chosen by the pivot search.
    pub fn into_order(self) -> Vec<usize> {
        self.perm
    }

    /// x = L z mapped back to original index order; `z.len() == rank`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.rank);
        let mut x = vec![0.0; self.n];
        for k in 0..self.n {
            let row = &self.l[k * self.rank..(k + 1) * self.rank];
            let mut acc = 0.0;
            for (lkm, zm) in row.iter().zip(z) {
                acc += lkm * zm;
            }
            x[self.perm[k]] = acc;
        }
        x
    }

    /// Draw one correlated Gaussian vector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.rank).map(|_| rng.sample(StandardNormal)).collect();
        self.apply(&z)
    }
}

/// Pivoted Cholesky of a symmetric PSD matrix. Pivots in
/// `[-rel_tol*trace, rel_tol*trace]` are truncated to zero (rank cut);
/// anything more negative is an error naming the offending pivot.
pub fn psd_factor(c: &Mat, rel_tol: f64) -> Result<PsdFactor> {
    let n = c.n();
    let tol = rel_tol * c.trace().abs().max(f64::MIN_POSITIVE);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut d: Vec<f64> = (0..n).map(|i| c[(i, i)]).collect();
    let mut l = vec![0.0; n * n];
    let mut rank = n;

    for k in 0..n {
        // Greatest remaining diagonal becomes the next pivot.
        let (jmax, &piv) = d[k..]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, v)| (j + k, v))
            .unwrap();
        if piv < -tol {
            return Err(Error::NotPsd {
                pivot: piv,
                index: perm[jmax],
                tol,
            });
        }
        if piv <= tol {
            // All remaining diagonals are within noise of zero; make sure
            // none is materially negative before truncating.
            if let Some(&worst) = d[k..].iter().min_by(|a, b| a.total_cmp(b)) {
                if worst < -tol {
                    return Err(Error::NotPsd {
                        pivot: worst,
                        index: 0,
                        tol,
                    });
                }
            }
            rank = k;
            break;
        }
        perm.swap(k, jmax);
        d.swap(k, jmax);
        // Swap the partial factor rows (columns 0..k are populated).
        for m in 0..k {
            l.swap(k * n + m, jmax * n + m);
        }

        let lkk = d[k].sqrt();
        l[k * n + k] = lkk;
        for i in (k + 1)..n {
            let mut acc = c[(perm[i], perm[k])];
            for m in 0..k {
                acc -= l[i * n + m] * l[k * n + m];
            }
            let lik = acc / lkk;
            l[i * n + k] = lik;
            d[i] -= lik * lik;
        }
    }

    // Compact to n x rank.
    let mut compact = vec![0.0; n * rank];
    for i in 0..n {
        compact[i * rank..(i + 1) * rank].copy_from_slice(&l[i * n..i * n + rank]);
    }
    Ok(PsdFactor {
        n,
        rank,
        perm,
        l: compact,
    })
}

/// Cholesky in a caller-fixed elimination order. Used where two nearby
/// matrices must be factored *smoothly* (common random numbers): the pivot
/// search of [`psd_factor`] could reorder between them. Pivots below the
/// truncation tolerance zero out their column; materially negative pivots
/// are an error.
pub fn psd_factor_in_order(c: &Mat, order: &[usize], rel_tol: f64) -> Result<PsdFactor> {
    let n = c.n();
    assert_eq!(order.len(), n);
    let tol = rel_tol * c.trace().abs().max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    let mut d: Vec<f64> = order.iter().map(|&p| c[(p, p)]).collect();

    for k in 0..n {
        let piv = d[k];
        if piv < -tol {
            return Err(Error::NotPsd {
                pivot: piv,
                index: order[k],
                tol,
            });
        }
        if piv <= tol {
            continue; // zero column
        }
        let lkk = piv.sqrt();
        l[k * n + k] = lkk;
        for i in (k + 1)..n {
            let mut acc = c[(order[i], order[k])];
            for m in 0..k {
                acc -= l[i * n + m] * l[k * n + m];
            }
            let lik = acc / lkk;
            l[i * n + k] = lik;
            d[i] -= lik * lik;
        }
    }

    Ok(PsdFactor {
        n,
        rank: n,
        perm: order.to_vec(),
        l,
    })
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenSym {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// `vectors.row(k)` is the unit eigenvector for `values[k]`.
    pub vectors: Mat,
}

/// Cyclic Jacobi with a decreasing rotation threshold. Converges when the
/// off-diagonal Frobenius norm drops below `rel_tol * ||A||_F`.
///
/// Rows of the accumulated transformation are kept contiguous so the hot
/// rotation loops stream through memory; this keeps n ~ 1000 tractable.
pub fn jacobi_eigen_sym(a: &Mat, rel_tol: f64) -> Result<EigenSym> {
    let n = a.n();
    if n == 0 {
        return Err(Error::InvalidParam("empty matrix".into()));
    }
    if a.asymmetry() > 1e-9 * (1.0 + a.frobenius()) {
        return Err(Error::InvalidParam(
            "jacobi_eigen_sym requires a symmetric matrix".into(),
        ));
    }
    let mut m = a.clone().a;
    // W = V^T accumulated row-wise.
    let mut w = Mat::identity(n).a;
    let fro = a.frobenius().max(f64::MIN_POSITIVE);
    let stop = rel_tol * fro;
    const MAX_SWEEPS: usize = 50;

    for _sweep in 0..MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
            (2.0 * s).sqrt()
        };
        if off <= stop {
            let mut pairs: Vec<(f64, usize)> =
                (0..n).map(|i| (m[i * n + i], i)).collect();
            pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
            let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let mut vectors = Mat::zeros(n);
            for (k, &(_, i)) in pairs.iter().enumerate() {
                vectors.a[k * n..(k + 1) * n].copy_from_slice(&w[i * n..(i + 1) * n]);
            }
            return Ok(EigenSym { values, vectors });
        }

        // Skip below-average elements while the off-norm is large (they
        // cost a full rotation but barely reduce it), then finish with
        // unthresholded sweeps to restore quadratic convergence.
        let thresh = if off > 1e-4 * fro {
            0.5 * off / (n as f64)
        } else {
            0.0
        };

        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() <= thresh {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                // Skip rotations that cannot change anything at f64 precision.
                if apq.abs() < 1e-300
                    || apq.abs() * 1e15 < (app.abs() + aqq.abs()) * f64::EPSILON
                {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    continue;
                }
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // Rotate rows p and q of A branchlessly (the p/q entries
                // get garbage and are fixed right after), then mirror the
                // rows into the columns to keep both triangles in sync.
                {
                    let (lo, hi) = m.split_at_mut(q * n);
                    let rp = &mut lo[p * n..p * n + n];
                    let rq = &mut hi[..n];
                    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
                        let a = *x;
                        let b = *y;
                        *x = c * a - s * b;
                        *y = s * a + c * b;
                    }
                }
                m[p * n + p] = app - t * apq;
                m[q * n + q] = aqq + t * apq;
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for j in 0..n {
                    m[j * n + p] = m[p * n + j];
                    m[j * n + q] = m[q * n + j];
                }

                // Accumulate the transform (rows of W = columns of V).
                {
                    let (lo, hi) = w.split_at_mut(q * n);
                    let wp = &mut lo[p * n..p * n + n];
                    let wq = &mut hi[..n];
                    for (x, y) in wp.iter_mut().zip(wq.iter_mut()) {
                        let a = *x;
                        let b = *y;
                        *x = c * a - s * b;
                        *y = s * a + c * b;
                    }
                }
            }
        }
    }

    Err(Error::NoConvergence(format!(
        "jacobi sweeps exhausted at n = {n}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &Mat, e: &EigenSym) -> f64 {
        // max_k |A v_k - lambda_k v_k|_inf
        let n = a.n();
        let mut worst = 0.0f64;
        for k in 0..n {
            let v = e.vectors.row(k);
            for i in 0..n {
                let mut av = 0.0;
                for j in 0..n {
                    av += a[(i, j)] * v[j];
                }
                worst = worst.max((av - e.values[k] * v[i]).abs());
            }
        }
        worst
    }

    #[test]
    fn jacobi_two_by_two() {
        let a = Mat::from_rows(&[vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap();
        let e = jacobi_eigen_sym(&a, 1e-12).unwrap();
        assert!((e.values[0] + 3.0).abs() < 1e-12);
        assert!((e.values[1] - 3.0).abs() < 1e-12);
        // Lowest eigenvector of [[0,J],[J,0]] with J>0 is (1,-1)/sqrt(2).
        let v = e.vectors.row(0);
        assert!((v[0] * v[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn jacobi_diagonal_matrix() {
        let a = Mat::from_fn(5, |i, j| if i == j { i as f64 - 2.0 } else { 0.0 });
        let e = jacobi_eigen_sym(&a, 1e-12).unwrap();
        assert_eq!(e.values, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn jacobi_random_symmetric_residual() {
        use rand::Rng;
        let mut rng = crate::rng::SeedSpec::new(11).rng();
        let n = 40;
        let mut a = Mat::zeros(n);
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.sample(StandardNormal);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        let _ = rng.random::<u64>();
        let e = jacobi_eigen_sym(&a, 1e-12).unwrap();
        assert!(residual(&a, &e) < 1e-9, "residual {}", residual(&a, &e));
        // Eigenvalue sum equals trace.
        let sum: f64 = e.values.iter().sum();
        assert!((sum - a.trace()).abs() < 1e-9);
    }

    #[test]
    fn psd_factor_reconstructs() {
        let c = Mat::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let f = psd_factor(&c, 1e-10).unwrap();
        assert_eq!(f.rank(), 2);
        // Check L L^T = C by probing with unit vectors.
        let e0 = f.apply(&[1.0, 0.0]);
        let e1 = f.apply(&[0.0, 1.0]);
        for i in 0..2 {
            for j in 0..2 {
                let r = e0[i] * e0[j] + e1[i] * e1[j];
                assert!((r - c[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psd_factor_rank_deficient_all_ones() {
        let c = Mat::from_fn(3, |_, _| 1.0);
        let f = psd_factor(&c, 1e-10).unwrap();
        assert_eq!(f.rank(), 1);
        let x = f.apply(&[2.0]);
        assert!((x[0] - x[1]).abs() < 1e-12 && (x[1] - x[2]).abs() < 1e-12);
    }

    #[test]
    fn psd_factor_rejects_indefinite() {
        let c = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        match psd_factor(&c, 1e-10) {
            Err(Error::NotPsd { pivot, .. }) => assert!(pivot < 0.0),
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }
}
