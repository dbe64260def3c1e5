//! Localization probabilities as fluxes of a conserved current through
//! achronal regions:
//!
//! ⟨φ,T(Δ)φ⟩ = ∫_{ϖ(Δ)} (J₀(τ(x),x) − J(τ(x),x)·∇τ(x)) d³x.
//!
//! The integrand is sampled on a cell-centred spatial window. Along curved
//! surfaces the current is evaluated on a set of Chebyshev time slices and
//! interpolated to t = τ(x) node by node.

pub mod mask;
pub mod timeinterp;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::currents::{factorize_for, BackendKind, CurrentFamily, CurrentField, CurrentSpec, DIRECT_POINT_CAP};
use crate::error::{Error, Result};
use crate::kernels::TensorKernel;
use crate::minkowski::{FourVector, PoincareElement, Vec3};
use crate::surfaces::{transform_surface, AchronalSurface};
use crate::wavepacket::{apply_poincare, MomentumGrid, WavePacket};
use crate::window::SpatialWindow;

pub use mask::Mask;
use timeinterp::{chebyshev_order, interpolation_bound, ChebyshevNodes};

fn full_mask() -> Mask {
    Mask::Full
}

/// Graph of a surface restricted to a mask over its spatial projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub surface: AchronalSurface,
    #[serde(default = "full_mask")]
    pub mask: Mask,
}

impl Region {
    pub fn new(surface: AchronalSurface, mask: Mask) -> Self {
        Self { surface, mask }
    }

    pub fn full(surface: AchronalSurface) -> Self {
        Self { surface, mask: Mask::Full }
    }

    pub fn id(&self) -> String {
        format!("{}|{}", self.surface.id(), self.mask.id())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizationOptions {
    /// Explicit quadrature window; otherwise chosen from the mask.
    pub window: Option<SpatialWindow>,
    /// Centre of the default window for unbounded masks.
    pub center: [f64; 3],
    /// Subsamples per axis for fractional mask weights.
    pub subsamples: usize,
    /// Nodes per axis across the bounding box of bounded masks.
    pub bounded_nodes: usize,
    /// Relative bound on the time-interpolation error.
    pub time_tolerance: f64,
    /// Flux budget relative to ‖φ‖²; a tail estimate above a tenth of it
    /// produces a warning.
    pub tail_budget: f64,
}

impl Default for LocalizationOptions {
    fn default() -> Self {
        Self { window: None, center: [0.0; 3], subsamples: 4, bounded_nodes: 32, time_tolerance: 1e-12, tail_budget: 1e-2 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizationResult {
    pub probability: f64,
    pub error_estimate: f64,
    pub surface: String,
    pub mask: String,
    pub backend: String,
    pub window: Option<SpatialWindow>,
    pub norm_squared: f64,
    /// Nodes with nonzero mask weight.
    pub nodes: usize,
    pub time_slices: usize,
    /// τ(0); the state was time-translated by this amount and the surface
    /// shifted to pass through the origin.
    pub anchor: f64,
    pub tail_estimate: f64,
    pub max_j0: f64,
    /// Smallest integrand value J₀ − J·∇τ over the nodes.
    pub min_integrand: f64,
    /// Nodes at which τ is not differentiable.
    pub singular_nodes: usize,
    pub warnings: Vec<String>,
}

/// Default window for unbounded masks: 2N/3 nodes per axis (even) at the
/// conjugate spacing π/P, so the window spans two thirds of the period of
/// the discrete momentum sums.
pub fn full_window(grid: &MomentumGrid, center: [f64; 3]) -> Result<SpatialWindow> {
    let n = (2 * grid.n / 3) & !1;
    SpatialWindow::centered(center, grid.conjugate_spacing(), n.max(2))
}

/// Multiplies the state by e^{−iε s}, i.e. translates it in time by s.
pub fn time_translate(phi: &WavePacket, s: f64) -> Result<WavePacket> {
    let amps = phi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(i, a)| if *a == Complex64::new(0.0, 0.0) { *a } else { a * Complex64::from_polar(1.0, -phi.energy_at(i) * s) })
        .collect();
    WavePacket::new(*phi.grid(), phi.mass(), amps)
}

/// Field of a different state sharing this field's family, backend and
/// factorization where possible.
fn sibling(field: &CurrentField, packet: WavePacket) -> Result<CurrentField> {
    let spec = field.spec().with_packet(packet);
    match field.lowrank() {
        Some(lr) => CurrentField::with_lowrank(spec, lr.clone()),
        None => CurrentField::new(spec),
    }
}

struct FluxValues {
    values: Vec<f64>,
    time_slices: usize,
    interpolation_bound: f64,
    max_j0: f64,
    singular: usize,
}

/// Integrand J₀ − J·∇τ at the listed window nodes, with τ shifted by −shift.
fn flux_values(
    field: &CurrentField,
    surface: &AchronalSurface,
    shift: f64,
    window: &SpatialWindow,
    active: &[usize],
) -> Result<FluxValues> {
    let xs: Vec<Vec3> = active.iter().map(|&i| window.node(i)).collect();
    let taus = xs.iter().map(|x| surface.tau(x).map(|t| t - shift)).collect::<Result<Vec<_>>>()?;
    let grads = xs.iter().map(|x| surface.gradient(x)).collect::<Result<Vec<_>>>()?;
    let singular = xs.iter().filter(|x| surface.is_singular(x)).count();
    let mut j = vec![[0.0f64; 4]; active.len()];
    let mut time_slices = 0;
    let mut bound = 0.0;
    if active.is_empty() {
        return Ok(FluxValues { values: vec![], time_slices, interpolation_bound: 0.0, max_j0: 0.0, singular });
    }
    match field.backend() {
        BackendKind::Direct => {
            if active.len() > DIRECT_POINT_CAP {
                return Err(Error::BackendLimit(format!(
                    "direct backend limited to {DIRECT_POINT_CAP} points, region has {}",
                    active.len()
                )));
            }
            let pts: Vec<FourVector> = xs.iter().zip(&taus).map(|(x, t)| FourVector::from_parts(*t, x)).collect();
            for (o, s) in j.iter_mut().zip(field.eval(&pts)?) {
                *o = [s.value.t, s.value.x[0], s.value.x[1], s.value.x[2]];
            }
        }
        BackendKind::Fast { .. } => {
            let lo = taus.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let omega = field.frequency_spread();
            let half = 0.5 * (hi - lo);
            let q = if hi == lo { 1 } else { chebyshev_order(omega, half, 1e-12)? };
            bound = interpolation_bound(omega, half, q);
            let cheb = ChebyshevNodes::new(lo, hi, q);
            let coef: Vec<Vec<f64>> = taus.iter().map(|t| cheb.coefficients(*t)).collect();
            for (s, t) in cheb.nodes.iter().enumerate() {
                let slice = field.slice(*t, window)?;
                for (a, &idx) in active.iter().enumerate() {
                    let c = coef[a][s];
                    if c != 0.0 {
                        let v = slice.values[idx];
                        for mu in 0..4 {
                            j[a][mu] += c * v[mu];
                        }
                    }
                }
            }
            time_slices = q;
        }
    }
    let max_j0 = j.iter().fold(0.0f64, |m, v| m.max(v[0]));
    let values = j.iter().zip(&grads).map(|(v, g)| v[0] - (v[1] * g[0] + v[2] * g[1] + v[3] * g[2])).collect();
    Ok(FluxValues { values, time_slices, interpolation_bound: bound, max_j0, singular })
}

/// Power-law tail of the integrand beyond the inscribed sphere of the
/// window, fitted on shell averages over [R/2, R]. Falls back to the flux
/// of that outer shell when the fit is not steep enough to integrate.
fn tail_estimate(window: &SpatialWindow, center: &Vec3, active: &[usize], values: &[f64]) -> f64 {
    let (lo, hi) = window.bounds();
    let r_in = (0..3).map(|a| (center[a] - lo[a]).min(hi[a] - center[a])).fold(f64::INFINITY, f64::min);
    let dx = window.spacing.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(r_in > 2.0 * dx) {
        return 0.0;
    }
    let nb = ((0.5 * r_in / dx) as usize).max(3);
    let width = 0.5 * r_in / nb as f64;
    let mut sum = vec![0.0; nb];
    let mut count = vec![0usize; nb];
    let mut shell_flux = 0.0;
    for (&idx, v) in active.iter().zip(values) {
        let r = (window.node(idx) - center).norm();
        if r >= 0.5 * r_in && r < r_in {
            let b = (((r - 0.5 * r_in) / width) as usize).min(nb - 1);
            sum[b] += v.abs();
            count[b] += 1;
            shell_flux += v.abs() * window.cell_volume();
        }
    }
    let pts: Vec<(f64, f64)> = (0..nb)
        .filter(|&b| count[b] > 0 && sum[b] > 0.0)
        .map(|b| ((0.5 * r_in + (b as f64 + 0.5) * width).ln(), (sum[b] / count[b] as f64).ln()))
        .collect();
    if pts.len() >= 3 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        let expo = -slope;
        if expo > 3.5 {
            let logc = my - slope * mx;
            return 4.0 * std::f64::consts::PI * (logc + (3.0 - expo) * r_in.ln()).exp() / (expo - 3.0);
        }
    }
    if sum.iter().all(|s| *s == 0.0) {
        0.0
    } else {
        shell_flux
    }
}

/// A prepared current together with quadrature options.
#[derive(Debug, Clone)]
pub struct Localizer {
    pub field: CurrentField,
    pub options: LocalizationOptions,
}

impl Localizer {
    pub fn new(spec: CurrentSpec, options: LocalizationOptions) -> Result<Self> {
        Ok(Self { field: CurrentField::new(spec)?, options })
    }

    pub fn from_field(field: CurrentField, options: LocalizationOptions) -> Self {
        Self { field, options }
    }

    pub fn norm_squared(&self) -> f64 {
        self.field.packet().norm_squared()
    }

    /// Quadrature window for a mask, or `None` when the mask is empty.
    pub fn window_for(&self, mask: &Mask) -> Result<Option<SpatialWindow>> {
        if mask.is_empty_set() {
            return Ok(None);
        }
        if let Some(w) = self.options.window {
            return Ok(Some(w));
        }
        match mask.bounds()? {
            None => Ok(Some(full_window(self.field.packet().grid(), self.options.center)?)),
            Some((lo, hi)) => {
                if (0..3).any(|a| !(hi[a] > lo[a])) {
                    return Ok(None);
                }
                Ok(Some(SpatialWindow::cell_centered(lo, hi, self.options.bounded_nodes)?))
            }
        }
    }

    fn anchored(&self, surface: &AchronalSurface) -> Result<(f64, Option<CurrentField>)> {
        let anchor = match surface.tau(&Vec3::zeros()) {
            Ok(t) if surface.is_maximal() => t,
            _ => 0.0,
        };
        if anchor == 0.0 {
            return Ok((0.0, None));
        }
        let shifted = time_translate(self.field.packet(), anchor)?;
        Ok((anchor, Some(sibling(&self.field, shifted)?)))
    }

    /// ⟨φ,T(Δ)φ⟩ for a region.
    pub fn probability(&self, region: &Region) -> Result<LocalizationResult> {
        region.surface.validate()?;
        region.mask.validate()?;
        let norm = self.norm_squared();
        let mut res = LocalizationResult {
            probability: 0.0,
            error_estimate: 0.0,
            surface: region.surface.id(),
            mask: region.mask.id(),
            backend: self.field.backend().tag().to_string(),
            window: None,
            norm_squared: norm,
            nodes: 0,
            time_slices: 0,
            anchor: 0.0,
            tail_estimate: 0.0,
            max_j0: 0.0,
            min_integrand: 0.0,
            singular_nodes: 0,
            warnings: Vec::new(),
        };
        let Some(window) = self.window_for(&region.mask)? else {
            return Ok(res);
        };
        res.window = Some(window);
        let weights = region.mask.cell_weights(&window, self.options.subsamples)?;
        let active: Vec<usize> = (0..window.len()).filter(|&i| weights[i] > 0.0).collect();
        res.nodes = active.len();
        let (anchor, shifted) = self.anchored(&region.surface)?;
        let field = shifted.as_ref().unwrap_or(&self.field);
        res.anchor = anchor;
        if anchor != 0.0 {
            res.warnings.push(format!("surface re-anchored through the origin by a time translation of {anchor}"));
        }
        let fv = flux_values(field, &region.surface, anchor, &window, &active)?;
        let dv = window.cell_volume();
        res.probability = active.iter().zip(&fv.values).map(|(&i, v)| weights[i] * v).sum::<f64>() * dv;
        res.time_slices = fv.time_slices;
        res.max_j0 = fv.max_j0;
        res.min_integrand = fv.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if fv.values.is_empty() {
            res.min_integrand = 0.0;
        }
        res.singular_nodes = fv.singular;
        let measure: f64 = active.iter().map(|&i| weights[i]).sum::<f64>() * dv;
        res.error_estimate = measure * (2.0 * field.error_bound() + fv.interpolation_bound * fv.max_j0);
        if region.mask.bounds()?.is_none() && self.options.window.is_none() {
            let center = Vec3::from(self.options.center);
            res.tail_estimate = tail_estimate(&window, &center, &active, &fv.values);
            res.error_estimate += res.tail_estimate;
            if res.tail_estimate > 0.1 * self.options.tail_budget * norm {
                res.warnings.push(format!(
                    "tail-escape: estimated exterior flux {:.3e} exceeds a tenth of the budget {:.3e}",
                    res.tail_estimate,
                    self.options.tail_budget * norm
                ));
            }
        }
        Ok(res)
    }

    /// Full-surface probabilities and their largest pairwise deviation.
    pub fn flux_invariance_report(&self, surfaces: &[AchronalSurface]) -> Result<InvarianceReport> {
        for s in surfaces {
            if !s.is_maximal() {
                return Err(Error::InvalidParameter(format!("surface {} is not maximal", s.id())));
            }
        }
        let results = surfaces.iter().map(|s| self.probability(&Region::full(s.clone()))).collect::<Result<Vec<_>>>()?;
        let norm = self.norm_squared();
        let mut dev = 0.0f64;
        for a in &results {
            for b in &results {
                dev = dev.max((a.probability - b.probability).abs() / norm);
            }
        }
        Ok(InvarianceReport { results, norm_squared: norm, max_deviation: dev })
    }

    /// Probabilities of a partition of the full surface on one shared
    /// window, with exact cell-level disjointness and coverage checks.
    pub fn additivity_check(&self, surface: &AchronalSurface, partition: &[Mask]) -> Result<AdditivityReport> {
        if partition.is_empty() {
            return Err(Error::NotAPartition("empty partition".into()));
        }
        let window = match self.options.window {
            Some(w) => w,
            None => full_window(self.field.packet().grid(), self.options.center)?,
        };
        let k = self.options.subsamples;
        let offs: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) / k as f64 - 0.5).collect();
        let mut weights = vec![vec![0.0; window.len()]; partition.len()];
        let total = (k * k * k) as f64;
        for idx in 0..window.len() {
            let c = window.node(idx);
            for a in &offs {
                for b in &offs {
                    for d in &offs {
                        let x = c + Vec3::new(a * window.spacing[0], b * window.spacing[1], d * window.spacing[2]);
                        let mut hit = None;
                        for (m, mask) in partition.iter().enumerate() {
                            if mask.contains(&x)? {
                                if let Some(prev) = hit {
                                    return Err(Error::Overlap(format!("masks {prev} and {m} both contain {:?}", x.as_slice())));
                                }
                                hit = Some(m);
                            }
                        }
                        match hit {
                            Some(m) => weights[m][idx] += 1.0 / total,
                            None => return Err(Error::NotAPartition(format!("no mask contains {:?}", x.as_slice()))),
                        }
                    }
                }
            }
        }
        let active: Vec<usize> = (0..window.len()).collect();
        let (anchor, shifted) = self.anchored(surface)?;
        let field = shifted.as_ref().unwrap_or(&self.field);
        let fv = flux_values(field, surface, anchor, &window, &active)?;
        let dv = window.cell_volume();
        let probabilities: Vec<f64> = weights.iter().map(|w| w.iter().zip(&fv.values).map(|(a, v)| a * v).sum::<f64>() * dv).collect();
        let sum: f64 = probabilities.iter().sum();
        let norm = self.norm_squared();
        Ok(AdditivityReport { probabilities, sum, norm_squared: norm, residual: (sum - norm).abs() / norm })
    }

    /// Condition CC for a ball on a flat surface and a flat target: the
    /// region of influence is the ball grown by the elapsed time.
    pub fn causal_monotonicity_check(&self, delta: &Region, target: &AchronalSurface) -> Result<CausalConditionReport> {
        let (AchronalSurface::Flat { t0 }, AchronalSurface::Flat { t0: t1 }) = (&delta.surface, target) else {
            return Err(Error::UnsupportedGeometry("closed-form shadows need flat source and target surfaces".into()));
        };
        let shadow = match &delta.mask {
            Mask::Full => Mask::Full,
            Mask::Empty => Mask::Empty,
            Mask::Ball { center, radius } => Mask::Ball { center: *center, radius: radius + (t1 - t0).abs() },
            m => return Err(Error::UnsupportedGeometry(format!("no closed-form shadow for mask {}", m.id()))),
        };
        let target_region = Region::new(target.clone(), shadow);
        let p_delta = self.probability(delta)?;
        let p_target = self.probability(&target_region)?;
        Ok(CausalConditionReport { p_delta, p_target, target: target_region })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub results: Vec<LocalizationResult>,
    pub norm_squared: f64,
    /// max |p_i − p_j| / ‖φ‖².
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdditivityReport {
    pub probabilities: Vec<f64>,
    pub sum: f64,
    pub norm_squared: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CausalConditionReport {
    pub p_delta: LocalizationResult,
    pub p_target: LocalizationResult,
    pub target: Region,
}

impl CausalConditionReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.p_delta.probability <= self.p_target.probability + tol
    }
}

/// One-shot probability for a spec and region with default options.
pub fn probability(spec: &CurrentSpec, region: &Region) -> Result<LocalizationResult> {
    Localizer::new(spec.clone(), LocalizationOptions::default())?.probability(region)
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceReport {
    pub lhs: LocalizationResult,
    pub rhs: LocalizationResult,
    /// |lhs − rhs| / max(|lhs|, |rhs|).
    pub relative_difference: f64,
}

/// Both sides of π_{W(g)⁻¹φ,Λ}(Δ) = π_{φ,g·Λ}(g·Δ). Stress-energy currents
/// use the transformed normal Λn on the right.
pub fn covariance_check(
    spec: &CurrentSpec,
    g: &PoincareElement,
    region: &Region,
    options: &LocalizationOptions,
) -> Result<CovarianceReport> {
    let moved = apply_poincare(&g.inverse(), &spec.packet)?;
    let lhs = Localizer::new(spec.with_packet(moved), options.clone())?.probability(region)?;
    let family = match &spec.family {
        CurrentFamily::StressEnergy(t) => {
            CurrentFamily::StressEnergy(TensorKernel::new(g.lambda.apply(&t.n), t.mass, t.variant, t.normalization)?)
        }
        f => f.clone(),
    };
    let rhs_spec = CurrentSpec { family, packet: spec.packet.clone(), backend: spec.backend };
    let samples: Vec<Vec3> = crate::surfaces::fibonacci_sphere(12).into_iter().collect();
    let image = transform_surface(g, &region.surface, &samples)?;
    let mask = match &region.mask {
        m if m.is_full() || m.is_empty_set() => m.clone(),
        m => m.clone().image(&region.surface, g),
    };
    let rhs = Localizer::new(rhs_spec, options.clone())?.probability(&Region::new(image.surface, mask))?;
    let scale = lhs.probability.abs().max(rhs.probability.abs());
    let relative_difference = if scale > 0.0 { (lhs.probability - rhs.probability).abs() / scale } else { 0.0 };
    Ok(CovarianceReport { lhs, rhs, relative_difference })
}

/// Sesquilinear form s(φ,ψ) = ¼ Σ_ζ ζ q(ζφ + ψ), ζ ∈ {1, −1, i, −i}.
/// Fast causal currents share one factorization weighted by |φ| + |ψ|.
pub fn matrix_element(
    phi: &WavePacket,
    psi: &WavePacket,
    family: &CurrentFamily,
    backend: BackendKind,
    region: &Region,
    options: &LocalizationOptions,
) -> Result<Complex64> {
    phi.check_compatible(psi)?;
    let lowrank = match (backend, family) {
        (BackendKind::Fast { truncation }, CurrentFamily::Causal(_)) => Some(factorize_for(family, &[phi, psi], truncation)?),
        _ => None,
    };
    let zetas = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)];
    let mut acc = Complex64::new(0.0, 0.0);
    for z in zetas {
        let chi = phi.combine(z, psi, Complex64::new(1.0, 0.0))?;
        if chi.is_zero() {
            continue;
        }
        let spec = CurrentSpec { family: family.clone(), packet: Arc::new(chi), backend };
        let field = match &lowrank {
            Some(lr) => CurrentField::with_lowrank(spec, lr.clone())?,
            None => CurrentField::new(spec)?,
        };
        let q = Localizer::from_field(field, options.clone()).probability(region)?.probability;
        acc += z * q;
    }
    Ok(acc * 0.25)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_window_geometry() {
        let grid = MomentumGrid::new(48, 4.0).unwrap();
        let w = full_window(&grid, [0.0; 3]).unwrap();
        assert_eq!(w.n, [32; 3]);
        assert!((w.spacing[0] - std::f64::consts::PI / 4.0).abs() < 1e-15);
        let (lo, hi) = w.bounds();
        assert!((lo[0] + hi[0]).abs() < 1e-12);
    }

    #[test]
    fn tail_of_power_law_matches_integral() {
        let w = SpatialWindow::centered([0.0; 3], 0.25, 64).unwrap();
        let active: Vec<usize> = (0..w.len()).collect();
        let vals: Vec<f64> = active.iter().map(|&i| (1.0 + w.node(i).norm()).powf(-0.0) * w.node(i).norm().powi(-6)).collect();
        let t = tail_estimate(&w, &Vec3::zeros(), &active, &vals);
        // ∫_{R}^∞ 4π r² r^{-6} dr = 4π/(3R³) with R = 8.
        let exact = 4.0 * std::f64::consts::PI / (3.0 * 512.0);
        assert!((t - exact).abs() / exact < 0.05, "{t} vs {exact}");
    }
}
