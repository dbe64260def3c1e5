//! Momentum-space one-particle states on a uniform grid and the unitary
//! mass-shell representation of the Poincaré group acting on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::minkowski::{energy, FourVector, LorentzTransform, PoincareElement, Vec3};

/// Uniform cubic momentum grid with nodes p_j = (j − N/2)·h, h = 2P/N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumGrid {
    pub n: usize,
    pub p_max: f64,
    /// Width of the band (in nodes) on each side that packets must leave empty.
    pub margin: usize,
}

impl MomentumGrid {
    pub fn new(n: usize, p_max: f64) -> Result<Self> {
        Self::with_margin(n, p_max, n / 8)
    }

    pub fn with_margin(n: usize, p_max: f64, margin: usize) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("grid size must be even and >= 8, got {n}")));
        }
        if !(p_max > 0.0 && p_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid extent must be positive, got {p_max}")));
        }
        if margin == 0 || margin >= n / 2 {
            return Err(Error::InvalidParameter(format!("margin {margin} invalid for N = {n}")));
        }
        Ok(Self { n, p_max, margin })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.p_max / self.n as f64
    }

    /// Quadrature weight h³ of a single node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.spacing()
    }

    /// Largest |p_i| a packet may occupy; symmetric about the origin.
    pub fn core_limit(&self) -> f64 {
        ((self.n / 2 - self.margin) as f64) * self.spacing()
    }

    pub fn index(&self, i1: usize, i2: usize, i3: usize) -> usize {
        (i1 * self.n + i2) * self.n + i3
    }

    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    pub fn node(&self, idx: usize) -> Vec3 {
        let [a, b, c] = self.unravel(idx);
        Vec3::new(self.coord(a), self.coord(b), self.coord(c))
    }

    pub fn in_core_coord(&self, p: f64) -> bool {
        p.abs() <= self.core_limit() * (1.0 + 1e-12)
    }

    pub fn in_margin(&self, idx: usize) -> bool {
        let [a, b, c] = self.unravel(idx);
        [a, b, c].iter().any(|&j| !self.in_core_coord(self.coord(j)))
    }

    /// Position-space spacing conjugate to the grid period, 2π/(2P).
    pub fn conjugate_spacing(&self) -> f64 {
        std::f64::consts::PI / self.p_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavePacket {
    grid: MomentumGrid,
    mass: f64,
    amps: Vec<Complex64>,
}

impl WavePacket {
    /// Wraps raw amplitudes; rejects packets that touch the margin band.
    pub fn new(grid: MomentumGrid, mass: f64, amps: Vec<Complex64>) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if amps.len() != grid.len() {
            return Err(Error::InvalidParameter(format!("expected {} amplitudes, got {}", grid.len(), amps.len())));
        }
        if amps.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::InvalidParameter("non-finite amplitude".into()));
        }
        if let Some(idx) = (0..amps.len()).find(|&i| amps[i] != Complex64::new(0.0, 0.0) && grid.in_margin(i)) {
            return Err(Error::SupportViolation(format!("non-zero amplitude at margin node {:?}", grid.unravel(idx))));
        }
        Ok(Self { grid, mass, amps })
    }

    pub fn zero(grid: MomentumGrid, mass: f64) -> Result<Self> {
        Self::new(grid, mass, vec![Complex64::new(0.0, 0.0); grid.len()])
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, idx: usize) -> Complex64 {
        self.amps[idx]
    }

    pub fn energy_at(&self, idx: usize) -> f64 {
        energy(&self.grid.node(idx), self.mass)
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn inner_product(&self, other: &WavePacket) -> Result<Complex64> {
        self.check_compatible(other)?;
        let s: Complex64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn check_compatible(&self, other: &WavePacket) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", self.grid, other.grid)));
        }
        if self.mass != other.mass {
            return Err(Error::GridMismatch(format!("mass {} vs {}", self.mass, other.mass)));
        }
        Ok(())
    }

    /// Indices of nodes with non-zero amplitude, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.amps.len()).filter(|&i| self.amps[i] != Complex64::new(0.0, 0.0)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.amps.iter().all(|a| *a == Complex64::new(0.0, 0.0))
    }

    /// a·self + b·other.
    pub fn combine(&self, a: Complex64, other: &WavePacket, b: Complex64) -> Result<Self> {
        self.check_compatible(other)?;
        let amps = self.amps.iter().zip(&other.amps).map(|(x, y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid, mass: self.mass, amps })
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { grid: self.grid, mass: self.mass, amps: self.amps.iter().map(|x| c * x).collect() }
    }

    /// Multiplies amplitudes by a real per-node weight.
    pub fn map_weighted(&self, w: impl Fn(usize) -> f64) -> Self {
        let amps = self.amps.iter().enumerate().map(|(i, a)| a * w(i)).collect();
        Self { grid: self.grid, mass: self.mass, amps }
    }

    /// SHA-256 of grid, mass and amplitude bytes.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.grid.n as u64).to_le_bytes());
        h.update(self.grid.p_max.to_le_bytes());
        h.update((self.grid.margin as u64).to_le_bytes());
        h.update(self.mass.to_le_bytes());
        for a in &self.amps {
            h.update(a.re.to_le_bytes());
            h.update(a.im.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// C^∞ transition: 0 for u ≤ 0, 1 for u ≥ 1.
pub fn smooth_step(u: f64) -> f64 {
    fn f(u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            (-1.0 / u).exp()
        }
    }
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = f(u);
        a / (a + f(1.0 - u))
    }
}

/// Plateau window: 1 for r ≤ r_core, 0 for r ≥ r_support, smooth between.
pub fn plateau_window(r: f64, r_core: f64, r_support: f64) -> f64 {
    smooth_step((r_support - r) / (r_support - r_core))
}

fn default_sigma() -> f64 {
    1.0
}
fn default_support() -> f64 {
    1.9
}

/// Mollified Gaussian exp(−|p−p0|²/2σ²)·window(|p−p0|), optionally
/// translated to a spatial position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianParams {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub center: [f64; 3],
    #[serde(default = "default_support")]
    pub support_radius: f64,
    /// Defaults to half the support radius.
    #[serde(default)]
    pub plateau_radius: Option<f64>,
    /// Spatial translation applied as the phase e^{−i p·x}.
    #[serde(default)]
    pub position: [f64; 3],
}

impl Default for GaussianParams {
    fn default() -> Self {
        Self { sigma: 1.0, center: [0.0; 3], support_radius: 1.9, plateau_radius: None, position: [0.0; 3] }
    }
}

impl GaussianParams {
    fn validate(&self) -> Result<()> {
        let rc = self.plateau();
        if !(self.sigma > 0.0 && self.support_radius > 0.0 && rc >= 0.0 && rc < self.support_radius) {
            return Err(Error::InvalidParameter(format!("bad mollified Gaussian parameters {self:?}")));
        }
        Ok(())
    }

    fn plateau(&self) -> f64 {
        self.plateau_radius.unwrap_or(0.5 * self.support_radius)
    }

    pub fn evaluate(&self, p: &Vec3) -> Complex64 {
        let c = Vec3::from(self.center);
        let r = (p - c).norm();
        if r >= self.support_radius {
            return Complex64::new(0.0, 0.0);
        }
        let env = (-(r * r) / (2.0 * self.sigma * self.sigma)).exp() * plateau_window(r, self.plateau(), self.support_radius);
        let phase = -p.dot(&Vec3::from(self.position));
        Complex64::from_polar(env, phase)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PacketSpec {
    MollifiedGaussian(GaussianParams),
    /// The Gaussian family transformed by a boost with the given rapidity
    /// along the unit `direction`, evaluated in closed form.
    MollifiedGaussianBoosted {
        #[serde(flatten)]
        base: GaussianParams,
        rapidity: f64,
        #[serde(default = "default_direction")]
        direction: [f64; 3],
    },
    /// Amplitudes stored in an ACHR container.
    Custom {
        path: String,
    },
    /// The zero vector, accepted only when requested explicitly.
    Zero,
}

fn default_direction() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

/// Builds a packet from a family descriptor. Non-zero families that come
/// out with zero norm are rejected.
pub fn make_packet(grid: &MomentumGrid, mass: f64, spec: &PacketSpec) -> Result<WavePacket> {
    let packet = match spec {
        PacketSpec::Zero => return WavePacket::zero(*grid, mass),
        PacketSpec::MollifiedGaussian(params) => {
            params.validate()?;
            let lim = grid.core_limit();
            for (i, c) in params.center.iter().enumerate() {
                if c.abs() + params.support_radius > lim {
                    return Err(Error::SupportViolation(format!(
                        "support radius {} around center component {i} = {c} exceeds the core |p| <= {lim}",
                        params.support_radius
                    )));
                }
            }
            let amps = (0..grid.len()).map(|i| params.evaluate(&grid.node(i))).collect();
            WavePacket::new(*grid, mass, amps)?
        }
        PacketSpec::MollifiedGaussianBoosted { base, rapidity, direction } => {
            base.validate()?;
            let lambda = LorentzTransform::boost(&Vec3::from(*direction), *rapidity)?;
            let inv = lambda.inverse();
            let amps: Vec<Complex64> = (0..grid.len())
                .map(|i| {
                    let p = grid.node(i);
                    let q = inv.apply(&FourVector::on_shell(&p, mass));
                    let ratio = (q.t / energy(&p, mass)).sqrt();
                    base.evaluate(&q.spatial()) * ratio
                })
                .collect();
            WavePacket::new(*grid, mass, amps)?
        }
        PacketSpec::Custom { path } => {
            let p = crate::io::load_packet(std::path::Path::new(path))?;
            if p.grid().n != grid.n || p.grid().p_max != grid.p_max || p.mass() != mass {
                return Err(Error::GridMismatch(format!("custom packet {path} does not match the configured grid")));
            }
            WavePacket::new(*grid, mass, p.amps)?
        }
    };
    if packet.norm_squared() == 0.0 {
        return Err(Error::InvalidParameter("packet has zero norm".into()));
    }
    Ok(packet)
}

/// Interpolation used for Lorentz resampling.
pub const RESAMPLE_METHOD: &str = "tricubic";

fn cubic_weights(u: f64) -> [f64; 4] {
    [
        -u * (u - 1.0) * (u - 2.0) / 6.0,
        (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
        -(u + 1.0) * u * (u - 2.0) / 2.0,
        (u + 1.0) * u * (u - 1.0) / 6.0,
    ]
}

/// Tricubic (4-point Lagrange per axis) interpolation of the amplitudes at
/// an arbitrary momentum; nodes outside the grid count as zero.
pub fn interpolate(phi: &WavePacket, q: &Vec3) -> Complex64 {
    let g = phi.grid();
    let h = g.spacing();
    let n = g.n as isize;
    let mut base = [0isize; 3];
    let mut w = [[0.0; 4]; 3];
    for a in 0..3 {
        let s = q[a] / h + (g.n / 2) as f64;
        let fl = s.floor();
        if fl < -2.0 || fl > n as f64 + 1.0 {
            return Complex64::new(0.0, 0.0);
        }
        base[a] = fl as isize - 1;
        w[a] = cubic_weights(s - fl);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (da, wa) in w[0].iter().enumerate() {
        let i = base[0] + da as isize;
        if i < 0 || i >= n {
            continue;
        }
        for (db, wb) in w[1].iter().enumerate() {
            let j = base[1] + db as isize;
            if j < 0 || j >= n {
                continue;
            }
            for (dc, wc) in w[2].iter().enumerate() {
                let k = base[2] + dc as isize;
                if k < 0 || k >= n {
                    continue;
                }
                let idx = g.index(i as usize, j as usize, k as usize);
                acc += phi.amps[idx] * (wa * wb * wc);
            }
        }
    }
    acc
}

/// (W(a,Λ)φ)(p) = e^{i a·𝔭} √(ε(q)/ε(p)) φ(q), 𝔮 = Λ⁻¹𝔭.
///
/// Translations are an exact phase, signed axis permutations an exact index
/// map, and everything else is tricubic resampling.
pub fn apply_poincare(g: &PoincareElement, phi: &WavePacket) -> Result<WavePacket> {
    let grid = *phi.grid();
    let m = phi.mass();
    let lambda = g.lambda;
    let phase = |p: &Vec3| -> Complex64 {
        let pp = FourVector::on_shell(p, m);
        Complex64::from_polar(1.0, g.a.dot(&pp))
    };

    let amps: Vec<Complex64> = if lambda.is_identity() {
        (0..grid.len()).map(|i| phi.amps[i] * phase(&grid.node(i))).collect()
    } else if let Some((perm, sign)) = lambda.inverse().signed_permutation() {
        // q_i = sign_i · p_{perm_i}; index of −p_j is N − j.
        let n = grid.n;
        (0..grid.len())
            .map(|i| {
                let pj = grid.unravel(i);
                let mut qj = [0usize; 3];
                for a in 0..3 {
                    let j = pj[perm[a]];
                    qj[a] = if sign[a] > 0.0 {
                        j
                    } else if j == 0 {
                        return Complex64::new(0.0, 0.0);
                    } else {
                        n - j
                    };
                }
                phi.amps[grid.index(qj[0], qj[1], qj[2])] * phase(&grid.node(i))
            })
            .collect()
    } else {
        let lim = grid.core_limit();
        for idx in phi.support() {
            let img = lambda.apply(&FourVector::on_shell(&grid.node(idx), m)).spatial();
            if img.iter().any(|c| c.abs() > lim) {
                return Err(Error::SupportEscape(format!(
                    "support node {:?} maps to {:?}, outside |p_i| <= {lim}",
                    grid.unravel(idx),
                    img.as_slice()
                )));
            }
        }
        let inv = lambda.inverse();
        let mut out: Vec<Complex64> = (0..grid.len())
            .map(|i| {
                let p = grid.node(i);
                let q = inv.apply(&FourVector::on_shell(&p, m));
                let v = interpolate(phi, &q.spatial());
                if v == Complex64::new(0.0, 0.0) {
                    return v;
                }
                v * (q.t / energy(&p, m)).sqrt() * phase(&p)
            })
            .collect();
        let total: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        let mut dropped = 0.0;
        for (i, a) in out.iter_mut().enumerate() {
            if grid.in_margin(i) {
                dropped += a.norm_sqr();
                *a = Complex64::new(0.0, 0.0);
            }
        }
        if dropped > 1e-12 * total {
            return Err(Error::SupportEscape(format!("resampled packet leaks {:.3e} of its norm into the margin", dropped / total)));
        }
        out
    };
    WavePacket::new(grid, m, amps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> MomentumGrid {
        MomentumGrid::new(24, 4.0).unwrap()
    }

    #[test]
    fn grid_geometry() {
        let g = MomentumGrid::new(48, 4.0).unwrap();
        assert_eq!(g.spacing(), 1.0 / 6.0);
        assert_eq!(g.coord(24), 0.0);
        assert!((g.core_limit() - 3.0).abs() < 1e-14);
        assert!(g.in_margin(g.index(0, 24, 24)));
        assert!(g.in_margin(g.index(24, 24, 47)));
        assert!(!g.in_margin(g.index(6, 42, 24)));
        assert!(g.in_margin(g.index(5, 24, 24)));
        assert!(g.in_margin(g.index(24, 43, 24)));
        assert!(MomentumGrid::new(7, 1.0).is_err());
        assert!(MomentumGrid::new(6, 1.0).is_err());
        assert!(MomentumGrid::new(8, -1.0).is_err());
    }

    #[test]
    fn smooth_step_limits() {
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
        assert!((smooth_step(0.3) + smooth_step(0.7) - 1.0).abs() < 1e-15);
        assert_eq!(plateau_window(0.2, 0.5, 1.0), 1.0);
        assert_eq!(plateau_window(1.2, 0.5, 1.0), 0.0);
    }

    #[test]
    fn gaussian_packet_is_real_and_nonzero() {
        let p = make_packet(&grid(), 1.0, &PacketSpec::MollifiedGaussian(GaussianParams::default())).unwrap();
        assert!(p.norm_squared() > 0.0);
        assert!(p.amplitudes().iter().all(|a| a.im == 0.0 && a.re >= 0.0));
        let origin = p.grid().index(12, 12, 12);
        assert_eq!(p.amplitude(origin).re, 1.0);
    }

    #[test]
    fn support_violation_detected() {
        let params = GaussianParams { center: [1.5, 0.0, 0.0], ..Default::default() };
        let err = make_packet(&grid(), 1.0, &PacketSpec::MollifiedGaussian(params)).unwrap_err();
        assert!(matches!(err, Error::SupportViolation(_)));
    }

    #[test]
    fn margin_amplitudes_rejected() {
        let g = grid();
        let mut amps = vec![Complex64::new(0.0, 0.0); g.len()];
        amps[g.index(0, 12, 12)] = Complex64::new(1.0, 0.0);
        assert!(matches!(WavePacket::new(g, 1.0, amps), Err(Error::SupportViolation(_))));
    }

    #[test]
    fn cubic_weights_reproduce_cubics() {
        for &u in &[0.0, 0.25, 0.5, 0.9] {
            let w = cubic_weights(u);
            for deg in 0..4 {
                let f = |x: f64| x.powi(deg);
                let interp: f64 = (0..4).map(|k| w[k] * f(k as f64 - 1.0)).sum();
                assert!((interp - f(u)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn boosted_family_matches_resampling() {
        let g = MomentumGrid::new(48, 4.0).unwrap();
        let base = GaussianParams::default();
        let phi = make_packet(&g, 1.0, &PacketSpec::MollifiedGaussian(base.clone())).unwrap();
        let exact =
            make_packet(&g, 1.0, &PacketSpec::MollifiedGaussianBoosted { base, rapidity: 0.3, direction: [0.0, 0.0, 1.0] }).unwrap();
        let resampled = apply_poincare(&PoincareElement::lorentz(LorentzTransform::boost_z(0.3)), &phi).unwrap();
        let diff = exact.combine(Complex64::new(1.0, 0.0), &resampled, Complex64::new(-1.0, 0.0)).unwrap();
        assert!(diff.norm_squared() / exact.norm_squared() < 1e-5);
    }
}
