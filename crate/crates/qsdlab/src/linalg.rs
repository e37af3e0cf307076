//! Tridiagonal linear algebra kernels.
//!
//! Two primitives back the spectral and exit-time solvers:
//! a pivoted tridiagonal linear solve, and a symmetric tridiagonal
//! eigensolver (Sturm-sequence bisection for eigenvalues, inverse
//! iteration for eigenvectors).

use crate::error::{Error, Result};

/// Solves a general tridiagonal system by Gaussian elimination with
/// partial pivoting (one superdiagonal of fill-in).
///
/// `sub.len() == n - 1`, `diag.len() == n`, `sup.len() == n - 1`.
pub fn solve_tridiag(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(n >= 1 && sub.len() == n - 1 && sup.len() == n - 1 && rhs.len() == n);

    // Row i carries (p, q, r) at columns (i, i+1, i+2).
    let mut p = diag.to_vec();
    let mut q: Vec<f64> = (0..n).map(|i| if i < n - 1 { sup[i] } else { 0.0 }).collect();
    let mut r = vec![0.0; n];
    let mut x = rhs.to_vec();

    for i in 0..n - 1 {
        let s = sub[i]; // entry (i+1, i) — untouched by previous steps
        if p[i].abs() >= s.abs() {
            if p[i] == 0.0 {
                return Err(Error::Linalg("singular tridiagonal system".into()));
            }
            let m = s / p[i];
            p[i + 1] -= m * q[i];
            q[i + 1] -= m * r[i];
            x[i + 1] -= m * x[i];
        } else {
            // Swap rows i and i+1, then eliminate.
            let (pi, qi, ri, xi) = (p[i], q[i], r[i], x[i]);
            p[i] = s;
            q[i] = p[i + 1];
            r[i] = q[i + 1];
            x[i] = x[i + 1];
            let m = pi / s;
            p[i + 1] = qi - m * q[i];
            q[i + 1] = ri - m * r[i];
            r[i + 1] = 0.0;
            x[i + 1] = xi - m * x[i];
        }
    }
    if p[n - 1] == 0.0 {
        return Err(Error::Linalg("singular tridiagonal system".into()));
    }

    // Back substitution.
    x[n - 1] /= p[n - 1];
    if n >= 2 {
        x[n - 2] = (x[n - 2] - q[n - 2] * x[n - 1]) / p[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (x[i] - q[i] * x[i + 1] - r[i] * x[i + 2]) / p[i];
    }
    Ok(x)
}

/// Symmetric tridiagonal matrix: `diag` (length n) and `off` (length n-1).
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty() && off.len() == diag.len() - 1);
        Self { diag, off }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// Infinity norm, used to scale perturbations and tolerances.
    pub fn norm_inf(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.off[i - 1].abs();
                }
                if i < n - 1 {
                    s += self.off[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// y = T v.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.off[i - 1] * v[i - 1];
            }
            if i < n - 1 {
                s += self.off[i] * v[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count via
    /// the LDL^T recurrence).
    pub fn count_below(&self, x: f64) -> usize {
        let n = self.n();
        let tiny = f64::MIN_POSITIVE / f64::EPSILON;
        let mut count = 0usize;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            if q == 0.0 {
                q = tiny;
            }
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k` smallest eigenvalues by bisection on the Sturm count.
    pub fn smallest_eigenvalues(&self, k: usize) -> Vec<f64> {
        assert!(k >= 1 && k <= self.n());
        let n = self.n();
        // Gershgorin interval containing the whole spectrum.
        let mut glo = f64::INFINITY;
        let mut ghi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut radius = 0.0;
            if i > 0 {
                radius += self.off[i - 1].abs();
            }
            if i < n - 1 {
                radius += self.off[i].abs();
            }
            glo = glo.min(self.diag[i] - radius);
            ghi = ghi.max(self.diag[i] + radius);
        }
        let scale = ghi.abs().max(glo.abs()).max(1.0);

        (1..=k)
            .map(|j| {
                let (mut lo, mut hi) = (glo, ghi);
                // Invariant: count(lo) < j <= count(hi).
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if hi - lo <= 4.0 * f64::EPSILON * scale {
                        break;
                    }
                    if self.count_below(mid) >= j {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }

    /// Inverse iteration for the eigenvector belonging to the isolated
    /// eigenvalue nearest `lambda`.  Returns the Rayleigh-refined
    /// eigenvalue and the unit-Euclidean-norm eigenvector.
    ///
    /// `orthogonalize_against` guards clustered eigenvalues: the iterate
    /// is re-orthogonalized against those vectors every sweep.
    pub fn eigenpair(
        &self,
        lambda: f64,
        orthogonalize_against: &[Vec<f64>],
    ) -> Result<(f64, Vec<f64>)> {
        let n = self.n();
        let scale = self.norm_inf().max(1.0);
        // Deterministic, sign-varying start vector.
        let mut v: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.37 * ((2.399_963 * (i as f64 + 1.0)).sin()))
            .collect();
        normalize(&mut v);

        let mut shift = lambda;
        let mut best: Option<(f64, Vec<f64>, f64)> = None;
        for attempt in 0..4 {
            if attempt > 0 {
                // Nudge the shift away from exact singularity.
                shift = lambda + scale * 1e-12 * (attempt as f64);
            }
            let sub = self.off.clone();
            let diag: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
            let sup = self.off.clone();
            for _ in 0..5 {
                let mut w = match solve_tridiag(&sub, &diag, &sup, &v) {
                    Ok(w) => w,
                    Err(_) => break, // singular shift: retry with nudge
                };
                for q in orthogonalize_against {
                    let c = dot(&w, q);
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= c * qi;
                    }
                }
                if !normalize(&mut w) {
                    break;
                }
                v = w;
                let tv = self.matvec(&v);
                let ray = dot(&v, &tv);
                let res = residual_norm(&tv, ray, &v);
                if best.as_ref().is_none_or(|(_, _, r)| res < *r) {
                    best = Some((ray, v.clone(), res));
                }
                if res <= 1e-13 * scale {
                    let (ray, v, _) = best.unwrap();
                    return Ok((ray, v));
                }
            }
        }
        match best {
            Some((ray, v, res)) if res <= 1e-9 * scale => Ok((ray, v)),
            _ => Err(Error::Linalg(format!(
                "inverse iteration did not converge near eigenvalue {lambda:e}"
            ))),
        }
    }

    /// The `k` smallest eigenpairs, eigenvalues ascending, eigenvectors
    /// unit-norm in the Euclidean inner product.
    pub fn smallest_eigenpairs(&self, k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let lambdas = self.smallest_eigenvalues(k);
        let scale = self.norm_inf().max(1.0);
        let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(k);
        for (j, &lam) in lambdas.iter().enumerate() {
            // Orthogonalize only against members of a near-degenerate cluster.
            let cluster: Vec<Vec<f64>> = pairs
                .iter()
                .filter(|(mu, _)| (lam - mu).abs() <= 1e-8 * scale)
                .map(|(_, v)| v.clone())
                .collect();
            let (ray, v) = self.eigenpair(lam, &cluster)?;
            let _ = j;
            pairs.push((ray, v));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(pairs)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> bool {
    let norm = dot(v, v).sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return false;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    true
}

fn residual_norm(tv: &[f64], lambda: f64, v: &[f64]) -> f64 {
    tv.iter()
        .zip(v)
        .map(|(t, x)| {
            let r = t - lambda * x;
            r * r
        })
        .sum::<f64>()
        .sqrt()
}
