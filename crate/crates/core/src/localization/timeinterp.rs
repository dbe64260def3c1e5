//! Chebyshev interpolation in time for band-limited currents.
//!
//! Every current component is a sum of e^{iωt} with |ω| ≤ Ω, so on an
//! interval of half-width L the degree-(Q−1) Chebyshev interpolant errs by
//! at most 2(ΩL/2)^Q/Q! relative to the coefficient sum.

use crate::error::{Error, Result};

/// Upper bound on the number of time slices per surface.
pub const MAX_TIME_NODES: usize = 160;

/// 2(z/2)^Q/Q!, evaluated in logs.
pub fn interpolation_bound(omega: f64, half_width: f64, q: usize) -> f64 {
    let z = omega.abs() * half_width.abs();
    if z == 0.0 {
        return 0.0;
    }
    let mut log = 2f64.ln() + q as f64 * (z / 2.0).ln();
    for k in 2..=q {
        log -= (k as f64).ln();
    }
    log.exp()
}

/// Smallest Q whose bound is at most `tol`.
pub fn chebyshev_order(omega: f64, half_width: f64, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("interpolation tolerance must be positive, got {tol}")));
    }
    if omega * half_width == 0.0 {
        return Ok(1);
    }
    for q in 2..=MAX_TIME_NODES {
        if interpolation_bound(omega, half_width, q) <= tol {
            return Ok(q);
        }
    }
    Err(Error::BackendLimit(format!(
        "time range needs more than {MAX_TIME_NODES} Chebyshev nodes (omega = {omega}, half-width = {half_width})"
    )))
}

/// First-kind Chebyshev nodes on [lo, hi] with barycentric weights.
#[derive(Debug, Clone)]
pub struct ChebyshevNodes {
    pub nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ChebyshevNodes {
    pub fn new(lo: f64, hi: f64, q: usize) -> Self {
        let c = 0.5 * (lo + hi);
        let l = 0.5 * (hi - lo);
        if q <= 1 {
            return Self { nodes: vec![c], weights: vec![1.0] };
        }
        let mut nodes = Vec::with_capacity(q);
        let mut weights = Vec::with_capacity(q);
        for j in 0..q {
            let th = (2 * j + 1) as f64 * std::f64::consts::PI / (2 * q) as f64;
            nodes.push(c + l * th.cos());
            weights.push(if j % 2 == 0 { th.sin() } else { -th.sin() });
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Lagrange coefficients ℓ_j(t), summing to one.
    pub fn coefficients(&self, t: f64) -> Vec<f64> {
        let q = self.nodes.len();
        if let Some(j) = self.nodes.iter().position(|&tj| tj == t) {
            let mut e = vec![0.0; q];
            e[j] = 1.0;
            return e;
        }
        if q == 1 {
            return vec![1.0];
        }
        let raw: Vec<f64> = (0..q).map(|j| self.weights[j] / (t - self.nodes[j])).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|r| r / s).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_oscillation_to_bound() {
        let omega = 1.3;
        let (lo, hi) = (-6.0, 9.0);
        let q = chebyshev_order(omega, 0.5 * (hi - lo), 1e-12).unwrap();
        let ch = ChebyshevNodes::new(lo, hi, q);
        let vals: Vec<f64> = ch.nodes.iter().map(|t| (omega * t).cos()).collect();
        for i in 0..200 {
            let t = lo + (hi - lo) * i as f64 / 199.0;
            let c = ch.coefficients(t);
            let v: f64 = c.iter().zip(&vals).map(|(a, b)| a * b).sum();
            assert!((v - (omega * t).cos()).abs() < 1e-11, "t = {t}");
        }
    }

    #[test]
    fn flat_range_uses_one_node() {
        assert_eq!(chebyshev_order(2.0, 0.0, 1e-12).unwrap(), 1);
        assert_eq!(ChebyshevNodes::new(0.3, 0.3, 1).coefficients(0.3), vec![1.0]);
    }

    #[test]
    fn huge_range_is_rejected() {
        assert!(chebyshev_order(10.0, 1e3, 1e-12).is_err());
    }
}
