//! Continuity, pointwise causality and decay diagnostics for currents.

use serde::Serialize;

use super::{CurrentField, CurrentSample};
use crate::error::{Error, Result};
use crate::minkowski::FourVector;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContinuityReport {
    /// |∂_μ J^μ| divided by the largest |∂_μ J^μ| term.
    pub residual: f64,
    pub divergence: f64,
    pub scale: f64,
}

/// Fourth-order central-difference divergence at x with step h.
pub fn check_continuity(field: &CurrentField, x: &FourVector, h: f64) -> Result<ContinuityReport> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    const OFFSETS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
    const WEIGHTS: [f64; 4] = [1.0, -8.0, 8.0, -1.0];
    let mut pts = Vec::with_capacity(16);
    for mu in 0..4 {
        for o in OFFSETS {
            let mut d = [0.0; 4];
            d[mu] = o * h;
            pts.push(*x + FourVector::new(d[0], d[1], d[2], d[3]));
        }
    }
    let vals = field.eval(&pts)?;
    let mut div = 0.0;
    let mut scale = 0.0f64;
    for mu in 0..4 {
        let d: f64 = (0..4).map(|j| WEIGHTS[j] * vals[4 * mu + j].value.component(mu)).sum::<f64>() / (12.0 * h);
        div += d;
        scale = scale.max(d.abs());
    }
    let residual = if scale > 0.0 { div.abs() / scale } else { 0.0 };
    Ok(ContinuityReport { residual, divergence: div, scale })
}

/// J₀ − |J|.
pub fn check_causal_pointwise(sample: &CurrentSample) -> f64 {
    let v = &sample.value;
    v.t - (v.x[0] * v.x[0] + v.x[1] * v.x[1] + v.x[2] * v.x[2]).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    /// Fitted N in J₀ ≈ C (1+|x|)^{-N}.
    pub exponent: f64,
    pub log_constant: f64,
    /// Root-mean-square residual of the log fit.
    pub residual: f64,
    pub radii: Vec<f64>,
    pub mean_j0: Vec<f64>,
}

fn ray_directions() -> Vec<[f64; 3]> {
    let mut dirs = Vec::new();
    for a in 0..3 {
        for s in [-1.0, 1.0] {
            let mut d = [0.0; 3];
            d[a] = s;
            dirs.push(d);
        }
    }
    let r = 1.0 / 3f64.sqrt();
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                dirs.push([sx * r, sy * r, sz * r]);
            }
        }
    }
    dirs
}

/// Least-squares fit of log J₀ against log(1+|x|) over ray averages at
/// time `x0`.
pub fn decay_scan(field: &CurrentField, x0: f64, radii: &[f64]) -> Result<DecayFit> {
    if radii.len() < 2 {
        return Err(Error::InvalidParameter("decay scan needs at least two radii".into()));
    }
    if let Some(r) = radii.iter().find(|r| !(**r >= x0.abs())) {
        return Err(Error::InvalidParameter(format!("radius {r} below |x0| = {}", x0.abs())));
    }
    let dirs = ray_directions();
    let mut pts = Vec::new();
    for r in radii {
        for d in &dirs {
            pts.push(FourVector::new(x0, r * d[0], r * d[1], r * d[2]));
        }
    }
    let vals = field.eval(&pts)?;
    let mut mean = Vec::with_capacity(radii.len());
    for (i, r) in radii.iter().enumerate() {
        let m = vals[i * dirs.len()..(i + 1) * dirs.len()].iter().map(|s| s.value.t).sum::<f64>() / dirs.len() as f64;
        if !(m > 1e-300) {
            return Err(Error::DegenerateFit(format!("mean J0 = {m:e} at radius {r}")));
        }
        mean.push(m);
    }
    let xs: Vec<f64> = radii.iter().map(|r| (1.0 + r).ln()).collect();
    let ys: Vec<f64> = mean.iter().map(|m| m.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("radii do not vary".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(DecayFit { exponent: -slope, log_constant: intercept, residual: (rss / n).sqrt(), radii: radii.to_vec(), mean_j0: mean })
}
