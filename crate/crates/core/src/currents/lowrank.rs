//! Weighted low-rank compression of the sampled profile matrix
//! G_ij = g(𝔨ᵢ·𝔨ⱼ) by diagonally pivoted LDLᵀ with signed pivots.
//!
//! With W = diag(w) the factorization is W G W ≈ Σ_s σ_s l_s l_sᵀ. Pivoting
//! stops once every residual diagonal entry is below `truncation` times the
//! largest initial diagonal entry; for positive semidefinite G this bounds
//! every residual entry by the same amount. Off-diagonal residuals are also
//! spot-checked so that indefinite profiles cannot pass silently.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::GFunction;
use crate::minkowski::{energy, Vec3};

#[derive(Debug, Clone)]
pub struct LowRankKernel {
    /// Grid indices of the nodes, ascending.
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
    /// Column-major n × rank factor.
    pub factor: Vec<f64>,
    pub signs: Vec<f64>,
    pub report: FactorizationReport,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FactorizationReport {
    pub nodes: usize,
    pub rank: usize,
    pub truncation: f64,
    /// Largest residual diagonal entry relative to the largest initial one.
    pub residual_diagonal: f64,
    /// Largest sampled off-diagonal residual, same normalization.
    pub sampled_offdiagonal: f64,
    pub negative_pivots: usize,
    pub profile: String,
    pub fingerprint: String,
}

impl LowRankKernel {
    pub fn rank(&self) -> usize {
        self.signs.len()
    }

    pub fn column(&self, s: usize) -> &[f64] {
        let n = self.nodes.len();
        &self.factor[s * n..(s + 1) * n]
    }

    /// Approximation of the unweighted entry G_ij.
    pub fn approx_entry(&self, i: usize, j: usize) -> f64 {
        let n = self.nodes.len();
        let v: f64 = (0..self.rank()).map(|s| self.signs[s] * self.factor[s * n + i] * self.factor[s * n + j]).sum();
        v / (self.weights[i] * self.weights[j])
    }

    /// Nonzero eigenvalues of W G W ≈ L S Lᵀ, descending by magnitude; for
    /// sign-definite factors they come from the small Gram matrix.
    pub fn spectrum(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let r = self.rank();
        if r == 0 {
            return Vec::new();
        }
        let l = DMatrix::from_column_slice(n, r, &self.factor);
        let s = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.signs));
        let core = if self.signs.iter().all(|&x| x > 0.0) {
            l.transpose() * &l
        } else {
            let qr = l.qr();
            let rr = qr.r();
            &rr * s * rr.transpose()
        };
        let eig = SymmetricEigen::new(core);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
        ev
    }
}

fn fingerprint(g: &GFunction, momenta: &[Vec3], nodes: &[usize], weights: &[f64], truncation: f64) -> String {
    let mut h = Sha256::new();
    h.update(g.label().as_bytes());
    h.update(g.mass().to_le_bytes());
    h.update(truncation.to_le_bytes());
    for ((p, i), w) in momenta.iter().zip(nodes).zip(weights) {
        h.update((*i as u64).to_le_bytes());
        for c in p.iter() {
            h.update(c.to_le_bytes());
        }
        h.update(w.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Factorizes W G W for the given nodes (grid indices) and momenta.
pub fn factorize(
    g: &GFunction,
    nodes: &[usize],
    momenta: &[Vec3],
    weights: &[f64],
    truncation: f64,
    max_rank: usize,
) -> Result<LowRankKernel> {
    let n = momenta.len();
    if nodes.len() != n || weights.len() != n {
        return Err(Error::InvalidParameter("node, momentum and weight counts differ".into()));
    }
    if !(truncation > 0.0 && truncation < 1.0) {
        return Err(Error::InvalidParameter(format!("truncation must lie in (0,1), got {truncation}")));
    }
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter("weights must be positive".into()));
    }
    let m = g.mass();
    let e: Vec<f64> = momenta.iter().map(|p| energy(p, m)).collect();
    let entry = |i: usize, j: usize| -> f64 { weights[i] * weights[j] * g.eval(e[i] * e[j] - momenta[i].dot(&momenta[j])) };

    let mut diag: Vec<f64> = (0..n).map(|i| entry(i, i)).collect();
    let dmax = diag.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let mut factor: Vec<f64> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let mut coeff = Vec::new();
    let mut col = vec![0.0; n];
    let cap = max_rank.min(n);
    loop {
        let (piv, dpiv) = diag.iter().enumerate().fold((0usize, 0.0f64), |acc, (i, d)| if d.abs() > acc.1.abs() { (i, *d) } else { acc });
        if n == 0 || dpiv.abs() <= truncation * dmax {
            break;
        }
        if signs.len() == cap {
            return Err(Error::FactorizationFailure(format!(
                "rank cap {cap} reached with residual diagonal {:.3e} (target {truncation:.1e})",
                dpiv.abs() / dmax
            )));
        }
        let r = signs.len();
        for (j, c) in col.iter_mut().enumerate() {
            *c = entry(j, piv);
        }
        if r > 0 {
            coeff.clear();
            coeff.extend((0..r).map(|s| signs[s] * factor[s * n + piv]));
            // col -= L · coeff
            unsafe {
                matrixmultiply::dgemm(n, r, 1, -1.0, factor.as_ptr(), 1, n as isize, coeff.as_ptr(), 1, 1, 1.0, col.as_mut_ptr(), 1, 1);
            }
        }
        let scale = 1.0 / dpiv.abs().sqrt();
        let sign = dpiv.signum();
        for (j, c) in col.iter().enumerate() {
            let l = c * scale;
            factor.push(l);
            diag[j] -= sign * l * l;
        }
        diag[piv] = 0.0;
        signs.push(sign);
    }
    let rank = signs.len();
    let residual_diagonal = if dmax > 0.0 { diag.iter().fold(0.0f64, |a, d| a.max(d.abs())) / dmax } else { 0.0 };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut sampled = 0.0f64;
    if n > 1 {
        for _ in 0..2000.min(n * n) {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let approx: f64 = (0..rank).map(|s| signs[s] * factor[s * n + i] * factor[s * n + j]).sum();
            sampled = sampled.max((entry(i, j) - approx).abs() / dmax);
        }
    }
    if sampled > 10.0 * truncation {
        return Err(Error::FactorizationFailure(format!(
            "sampled off-diagonal residual {sampled:.3e} exceeds 10x the truncation {truncation:.1e}"
        )));
    }
    let report = FactorizationReport {
        nodes: n,
        rank,
        truncation,
        residual_diagonal,
        sampled_offdiagonal: sampled,
        negative_pivots: signs.iter().filter(|s| **s < 0.0).count(),
        profile: g.label(),
        fingerprint: fingerprint(g, momenta, nodes, weights, truncation),
    };
    Ok(LowRankKernel { nodes: nodes.to_vec(), weights: weights.to_vec(), factor, signs, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::GProfile;

    fn points(n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                Vec3::new((0.7 * t).sin() * 1.5, (1.3 * t).cos() * 1.2, (0.37 * t).sin() * 2.0)
            })
            .collect()
    }

    #[test]
    fn full_rank_reproduces_matrix() {
        let g = GFunction::basic(1.5, 1.0).unwrap();
        let p = points(40);
        let nodes: Vec<usize> = (0..40).collect();
        let w = vec![1.0; 40];
        let lr = factorize(&g, &nodes, &p, &w, 1e-15, 40).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let exact = g.eval(energy(&p[i], 1.0) * energy(&p[j], 1.0) - p[i].dot(&p[j]));
                assert!((lr.approx_entry(i, j) - exact).abs() < 1e-12);
            }
        }
        assert_eq!(lr.report.negative_pivots, 0);
    }

    #[test]
    fn weighted_truncation_bounds_residual() {
        let g = GFunction::basic(1.5, 1.0).unwrap();
        let p = points(600);
        let nodes: Vec<usize> = (0..600).collect();
        let w: Vec<f64> = p.iter().map(|q| (-q.norm_squared() / 2.0).exp()).collect();
        let lr = factorize(&g, &nodes, &p, &w, 1e-8, 600).unwrap();
        assert!(lr.rank() < 600);
        let dmax = w.iter().map(|x| x * x).fold(0.0, f64::max);
        for i in (0..600).step_by(13) {
            for j in (0..600).step_by(11) {
                let exact = g.eval(energy(&p[i], 1.0) * energy(&p[j], 1.0) - p[i].dot(&p[j]));
                let err = (lr.approx_entry(i, j) - exact).abs() * w[i] * w[j];
                assert!(err <= 1e-8 * dmax * 1.0001);
            }
        }
        let spec = lr.spectrum();
        assert_eq!(spec.len(), lr.rank());
        assert!(spec.iter().all(|x| *x > -1e-12 * spec[0]));
    }

    #[test]
    fn rank_cap_reports_failure() {
        let g = GFunction::basic(1.5, 1.0).unwrap();
        let p = points(60);
        let nodes: Vec<usize> = (0..60).collect();
        let err = factorize(&g, &nodes, &p, &vec![1.0; 60], 1e-12, 3).unwrap_err();
        assert!(matches!(err, Error::FactorizationFailure(_)));
    }

    #[test]
    fn indefinite_profile_gets_signed_pivots() {
        let g = GFunction::new(GProfile::Oscillatory { omega: 5.0 }, 1.0).unwrap();
        let p = points(30);
        let nodes: Vec<usize> = (0..30).collect();
        let lr = factorize(&g, &nodes, &p, &vec![1.0; 30], 1e-13, 30).unwrap();
        assert!(lr.report.negative_pivots > 0);
        let i = 3;
        let j = 17;
        let exact = g.eval(energy(&p[i], 1.0) * energy(&p[j], 1.0) - p[i].dot(&p[j]));
        assert!((lr.approx_entry(i, j) - exact).abs() < 1e-10);
    }
}
