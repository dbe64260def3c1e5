//! Conserved covariant currents
//!
//! J^μ(x) = (2π)^{-3} Σ_kp h⁶ K^μ(k,p) e^{i((ε(k)−ε(p))x₀ − (k−p)·x)} conj(φ(k)) φ(p)
//!
//! for the causal kernel and the stress-energy kernel, with a direct double
//! sum as the oracle and a separable fast path. Single fields use the
//! transform u(x) = (2π)^{-3/2} Σ_p h³ c(p) e^{−i(ε(p)x₀ − p·x)}, so the
//! conjugated k-side factor reproduces the phase above.

pub mod diagnostics;
mod direct;
mod fast;
pub mod lowrank;
pub mod transform;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{CausalKernel, NormalizationMode, TensorKernel};
use crate::minkowski::{FourVector, Vec3};
use crate::wavepacket::{MomentumGrid, WavePacket};
use crate::window::SpatialWindow;

pub use diagnostics::{check_causal_pointwise, check_continuity, decay_scan, ContinuityReport, DecayFit};
pub use lowrank::{FactorizationReport, LowRankKernel};

use fast::{Combine, FieldGroups};

/// Default relative truncation of the profile factorization.
pub const DEFAULT_TRUNCATION: f64 = 1e-8;

#[derive(Debug, Clone)]
pub enum CurrentFamily {
    Causal(CausalKernel),
    StressEnergy(TensorKernel),
}

impl CurrentFamily {
    pub fn mass(&self) -> f64 {
        match self {
            CurrentFamily::Causal(k) => k.mass(),
            CurrentFamily::StressEnergy(t) => t.mass,
        }
    }

    pub fn label(&self) -> String {
        match self {
            CurrentFamily::Causal(k) => format!("causal[{}]", k.g.label()),
            CurrentFamily::StressEnergy(t) => {
                format!("stress_energy[{:?},{:?},n=({},{},{},{})]", t.variant, t.normalization, t.n.t, t.n.x[0], t.n.x[1], t.n.x[2])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    Direct,
    /// Separable path; causal currents factorize the profile with this
    /// relative truncation.
    Fast {
        truncation: f64,
    },
}

impl BackendKind {
    pub fn fast() -> Self {
        BackendKind::Fast { truncation: DEFAULT_TRUNCATION }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            BackendKind::Direct => "direct",
            BackendKind::Fast { .. } => "fast",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurrentSpec {
    pub family: CurrentFamily,
    pub packet: Arc<WavePacket>,
    pub backend: BackendKind,
}

impl CurrentSpec {
    pub fn new(family: CurrentFamily, packet: WavePacket, backend: BackendKind) -> Self {
        Self { family, packet: Arc::new(packet), backend }
    }

    pub fn with_packet(&self, packet: WavePacket) -> Self {
        Self { family: self.family.clone(), packet: Arc::new(packet), backend: self.backend }
    }

    pub fn with_backend(&self, backend: BackendKind) -> Self {
        Self { family: self.family.clone(), packet: self.packet.clone(), backend }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentSample {
    pub point: FourVector,
    pub value: FourVector,
    pub backend: &'static str,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentSlice {
    pub t: f64,
    pub window: SpatialWindow,
    /// (J0, J1, J2, J3) per window node.
    pub values: Vec<[f64; 4]>,
}

/// Nodes entering the sums, with the effective coefficients of the state.
#[derive(Debug, Clone)]
pub(crate) struct NodeSet {
    pub grid: MomentumGrid,
    pub idx: Vec<usize>,
    pub p: Vec<Vec3>,
    pub e: Vec<f64>,
    pub coef: Vec<Complex64>,
}

impl NodeSet {
    fn new(packet: &WavePacket, idx: Vec<usize>, coef: impl Fn(usize, &Vec3, f64) -> Complex64) -> Self {
        let grid = *packet.grid();
        let p: Vec<Vec3> = idx.iter().map(|&i| grid.node(i)).collect();
        let e: Vec<f64> = idx.iter().map(|&i| packet.energy_at(i)).collect();
        let coef = idx.iter().zip(&p).zip(&e).map(|((&i, q), &en)| coef(i, q, en)).collect();
        Self { grid, idx, p, e, coef }
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    /// (2π)^{-3/2} h³ carried by every single field.
    pub fn quadrature_constant(&self) -> f64 {
        (2.0 * std::f64::consts::PI).powf(-1.5) * self.grid.cell_volume()
    }
}

/// Multiplier applied to φ(p) before evaluating a stress-energy current.
fn tensor_state_factor(kern: &TensorKernel, packet: &WavePacket) -> Result<Box<dyn Fn(usize, &Vec3, f64) -> f64>> {
    let n = kern.n;
    match kern.normalization {
        NormalizationMode::Raw => Ok(Box::new(|_, _, _| 1.0)),
        NormalizationMode::EnergyRescaled => Ok(Box::new(move |_, p: &Vec3, e: f64| {
            let pn = e * n.t - p.dot(&Vec3::from(n.x));
            1.0 / pn.sqrt()
        })),
        NormalizationMode::PerStateRenormalized => {
            // Full flux h³ Σ K_{n,0}(p,p)|φ(p)|² of the raw state.
            let grid = packet.grid();
            let mut flux = 0.0;
            for i in packet.support() {
                let p = grid.node(i);
                flux += kern.eval(&p, &p).t * packet.amplitude(i).norm_sqr();
            }
            flux *= grid.cell_volume();
            let norm = packet.norm_squared();
            if !(flux > 0.0) {
                return Err(Error::InvalidParameter(format!("cannot renormalize a state with full flux {flux}")));
            }
            let s = (norm / flux).sqrt();
            Ok(Box::new(move |_, _, _| s))
        }
    }
}

fn effective_nodes(family: &CurrentFamily, packet: &WavePacket, idx: Vec<usize>) -> Result<NodeSet> {
    match family {
        CurrentFamily::Causal(_) => Ok(NodeSet::new(packet, idx, |i, _, _| packet.amplitude(i))),
        CurrentFamily::StressEnergy(t) => {
            let f = tensor_state_factor(t, packet)?;
            Ok(NodeSet::new(packet, idx, |i, p, e| packet.amplitude(i) * f(i, p, e)))
        }
    }
}

fn check_family(family: &CurrentFamily, packet: &WavePacket) -> Result<()> {
    if family.mass() != packet.mass() {
        return Err(Error::GridMismatch(format!("kernel mass {} vs packet mass {}", family.mass(), packet.mass())));
    }
    Ok(())
}

/// Prepared current evaluator.
#[derive(Debug, Clone)]
pub struct CurrentField {
    spec: CurrentSpec,
    direct_nodes: NodeSet,
    fast: Option<(NodeSet, FieldGroups)>,
    lowrank: Option<Arc<LowRankKernel>>,
    error_bound: f64,
}

/// Points per phase-matrix batch of the fast point path.
const POINT_BATCH: usize = 512;

/// Largest rank attempted before a factorization is declared failed.
pub const MAX_RANK: usize = 4000;

impl CurrentField {
    /// Prepares the configured backend; fast causal currents factorize the
    /// profile weighted by the packet's own envelope.
    pub fn new(spec: CurrentSpec) -> Result<Self> {
        match spec.backend {
            BackendKind::Fast { truncation } if matches!(spec.family, CurrentFamily::Causal(_)) => {
                let lr = factorize_for(&spec.family, &[spec.packet.as_ref()], truncation)?;
                Self::with_lowrank(spec, lr)
            }
            _ => Self::build(spec, None),
        }
    }

    /// Uses an existing factorization; the packet support must lie inside
    /// its node set and the grid, mass and profile must match.
    pub fn with_lowrank(spec: CurrentSpec, lowrank: Arc<LowRankKernel>) -> Result<Self> {
        Self::build(spec, Some(lowrank))
    }

    fn build(spec: CurrentSpec, lowrank: Option<Arc<LowRankKernel>>) -> Result<Self> {
        check_family(&spec.family, &spec.packet)?;
        let packet = spec.packet.clone();
        let direct_nodes = effective_nodes(&spec.family, &packet, packet.support())?;
        let mut error_bound = 0.0;
        let fast = match (&spec.backend, &spec.family) {
            (BackendKind::Direct, _) => None,
            (BackendKind::Fast { .. }, CurrentFamily::StressEnergy(t)) => {
                let c = direct_nodes.quadrature_constant();
                let coef: Vec<Complex64> = direct_nodes.coef.iter().zip(&direct_nodes.e).map(|(a, e)| a * (c / e.sqrt())).collect();
                let groups = FieldGroups { groups: 1, coef, combine: Combine::stress_energy(t) };
                Some((direct_nodes.clone(), groups))
            }
            (BackendKind::Fast { .. }, CurrentFamily::Causal(k)) => {
                let lr = lowrank.clone().ok_or_else(|| Error::InvalidParameter("fast causal backend needs a factorization".into()))?;
                if lr.report.profile != k.g.label() {
                    return Err(Error::GridMismatch(format!("factorization is for {}, current uses {}", lr.report.profile, k.g.label())));
                }
                let nodes = effective_nodes(&spec.family, &packet, lr.nodes.clone())?;
                let outside = direct_nodes.idx.iter().filter(|i| lr.nodes.binary_search(i).is_err()).count();
                if outside > 0 {
                    return Err(Error::GridMismatch(format!("{outside} support nodes lie outside the factorization")));
                }
                let n = nodes.len();
                let c = nodes.quadrature_constant();
                let beta: Vec<f64> = (0..n).map(|k| c / (lr.weights[k] * nodes.e[k].sqrt())).collect();
                let mut coef = vec![Complex64::new(0.0, 0.0); n * lr.rank()];
                for s in 0..lr.rank() {
                    let col = lr.column(s);
                    for k in 0..n {
                        coef[s * n + k] = nodes.coef[k] * (col[k] * beta[k]);
                    }
                }
                let emax = nodes.e.iter().cloned().fold(0.0, f64::max);
                let wmax2 = lr.weights.iter().fold(0.0f64, |a, w| a.max(w * w));
                let sum: f64 = (0..n).map(|k| nodes.coef[k].norm() * beta[k]).sum();
                error_bound = emax * lr.report.residual_diagonal * wmax2 * sum * sum;
                let groups = FieldGroups { groups: lr.rank(), coef, combine: Combine::Causal { signs: lr.signs.clone() } };
                Some((nodes, groups))
            }
        };
        Ok(Self { spec, direct_nodes, fast, lowrank, error_bound })
    }

    pub fn spec(&self) -> &CurrentSpec {
        &self.spec
    }

    pub fn packet(&self) -> &WavePacket {
        &self.spec.packet
    }

    pub fn lowrank(&self) -> Option<&Arc<LowRankKernel>> {
        self.lowrank.as_ref()
    }

    pub fn backend(&self) -> BackendKind {
        self.spec.backend
    }

    /// Largest temporal frequency ε_max − ε_min present in the current.
    pub fn frequency_spread(&self) -> f64 {
        let e = &self.direct_nodes.e;
        if e.is_empty() {
            return 0.0;
        }
        let max = e.iter().cloned().fold(f64::MIN, f64::max);
        let min = e.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }

    /// Direct double sum at a batch of points.
    pub fn eval_direct(&self, points: &[FourVector]) -> Vec<CurrentSample> {
        direct::evaluate(&self.spec.family, &self.direct_nodes, points)
            .into_iter()
            .zip(points)
            .map(|((v, im), pt)| CurrentSample {
                point: *pt,
                value: FourVector::new(v[0], v[1], v[2], v[3]),
                backend: "direct",
                error_estimate: im,
            })
            .collect()
    }

    /// Fast path at arbitrary points.
    pub fn eval_fast(&self, points: &[FourVector]) -> Result<Vec<CurrentSample>> {
        let (nodes, groups) = self.fast.as_ref().ok_or_else(|| Error::InvalidParameter("fast backend not prepared".into()))?;
        let mut values = Vec::with_capacity(points.len());
        for chunk in points.chunks(POINT_BATCH) {
            values.extend(fast::points(nodes, groups, chunk));
        }
        Ok(values
            .into_iter()
            .zip(points)
            .map(|(v, pt)| CurrentSample {
                point: *pt,
                value: FourVector::new(v[0], v[1], v[2], v[3]),
                backend: "fast",
                error_estimate: self.error_bound,
            })
            .collect())
    }

    /// Evaluates with the configured backend.
    pub fn eval(&self, points: &[FourVector]) -> Result<Vec<CurrentSample>> {
        match self.spec.backend {
            BackendKind::Direct => Ok(self.eval_direct(points)),
            BackendKind::Fast { .. } => self.eval_fast(points),
        }
    }

    /// Current on a whole window at time t. The direct backend is capped at
    /// `DIRECT_POINT_CAP` nodes.
    pub fn slice(&self, t: f64, window: &SpatialWindow) -> Result<CurrentSlice> {
        let values = match &self.fast {
            Some((nodes, groups)) => fast::slice(nodes, groups, t, window),
            None => {
                if window.len() > DIRECT_POINT_CAP {
                    return Err(Error::BackendLimit(format!(
                        "direct backend limited to {DIRECT_POINT_CAP} points, window has {}",
                        window.len()
                    )));
                }
                let pts: Vec<FourVector> = (0..window.len()).map(|i| FourVector::from_parts(t, &window.node(i))).collect();
                self.eval_direct(&pts).iter().map(|s| [s.value.t, s.value.x[0], s.value.x[1], s.value.x[2]]).collect()
            }
        };
        Ok(CurrentSlice { t, window: *window, values })
    }

    /// Per-sample truncation error bound of the fast path (0 when exact).
    pub fn error_bound(&self) -> f64 {
        self.error_bound
    }
}

/// Point budget for direct evaluation of whole windows.
pub const DIRECT_POINT_CAP: usize = 4096;

/// Factorizes the profile on the union support of `packets`, weighted by
/// the pointwise envelope Σ|φ|/√ε.
pub fn factorize_for(family: &CurrentFamily, packets: &[&WavePacket], truncation: f64) -> Result<Arc<LowRankKernel>> {
    let CurrentFamily::Causal(kern) = family else {
        return Err(Error::InvalidParameter("only causal currents need a factorization".into()));
    };
    let first = packets.first().ok_or_else(|| Error::InvalidParameter("no packets".into()))?;
    for p in packets {
        first.check_compatible(p)?;
        check_family(family, p)?;
    }
    let grid = first.grid();
    let mut env = vec![0.0; grid.len()];
    for p in packets {
        for (e, a) in env.iter_mut().zip(p.amplitudes()) {
            *e += a.norm();
        }
    }
    let nodes: Vec<usize> = (0..grid.len()).filter(|&i| env[i] > 0.0).collect();
    let momenta: Vec<Vec3> = nodes.iter().map(|&i| grid.node(i)).collect();
    let mut weights: Vec<f64> = nodes.iter().map(|&i| env[i] / first.energy_at(i).sqrt()).collect();
    let wmax = weights.iter().cloned().fold(0.0, f64::max);
    for w in weights.iter_mut() {
        *w /= wmax;
    }
    Ok(Arc::new(lowrank::factorize(&kern.g, &nodes, &momenta, &weights, truncation, MAX_RANK)?))
}

/// Direct double sum at one point.
pub fn eval_direct(spec: &CurrentSpec, x: &FourVector) -> Result<CurrentSample> {
    let field = CurrentField::new(spec.with_backend(BackendKind::Direct))?;
    Ok(field.eval_direct(&[*x])[0])
}

/// Builds the separable backend with the given relative truncation.
pub fn build_fast(spec: &CurrentSpec, truncation: f64) -> Result<CurrentField> {
    CurrentField::new(spec.with_backend(BackendKind::Fast { truncation }))
}
