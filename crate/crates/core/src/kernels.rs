//! Scalar profiles g, the causal four-vector kernel 𝔎(k,p), the
//! stress-energy kernel 𝔎ₙ(k,p) and Gram-matrix diagnostics.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minkowski::{energy, FourVector, Vec3};

/// Lorentz invariant t = 𝔨·𝔭 = ε(k)ε(p) − k·p ≥ m².
pub fn invariant_t(k: &Vec3, p: &Vec3, mass: f64) -> f64 {
    energy(k, mass) * energy(p, mass) - k.dot(p)
}

/// g_r(t) = (2m²)^r (m² + t)^{−r}.
pub fn g_basic(r: f64, t: f64, m: f64) -> Result<f64> {
    let m2 = m * m;
    if !(r >= 1.5) {
        return Err(Error::Domain(format!("basic series needs r >= 3/2, got {r}")));
    }
    if !(t >= m2 * (1.0 - 1e-14)) {
        return Err(Error::Domain(format!("t = {t} below m² = {m2}")));
    }
    Ok(basic(r, t.max(m2), m2))
}

fn basic(r: f64, t: f64, m2: f64) -> f64 {
    (2.0 * m2 / (m2 + t)).powf(r)
}

/// The literal (2m²)^r (m² + t²)^{−r}; normalized only when m = 1.
fn basic_printed(r: f64, t: f64, m2: f64) -> f64 {
    (2.0 * m2 / (m2 + t * t)).powf(r)
}

#[derive(Clone)]
pub enum GProfile {
    Basic {
        r: f64,
    },
    BasicPrinted {
        r: f64,
    },
    /// cos(ω(t − m²)): normalized but not positive definite.
    Oscillatory {
        omega: f64,
    },
    /// g ≡ 1.
    Constant,
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for GProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl GProfile {
    pub fn label(&self) -> String {
        match self {
            GProfile::Basic { r } => format!("basic:r={r}"),
            GProfile::BasicPrinted { r } => format!("basic:r={r}:printed"),
            GProfile::Oscillatory { omega } => format!("oscillatory:omega={omega}"),
            GProfile::Constant => "constant".into(),
            GProfile::Custom { name, .. } => format!("custom:{name}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GFunction {
    profile: GProfile,
    mass: f64,
}

impl GFunction {
    pub fn new(profile: GProfile, mass: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        match &profile {
            GProfile::Basic { r } | GProfile::BasicPrinted { r } if !(*r >= 1.5) => {
                return Err(Error::InvalidParameter(format!("basic series needs r >= 3/2, got {r}")));
            }
            GProfile::Oscillatory { omega } if !omega.is_finite() => {
                return Err(Error::InvalidParameter("non-finite frequency".into()));
            }
            _ => {}
        }
        let g = Self { profile, mass };
        let at_mass = g.eval(mass * mass);
        if matches!(g.profile, GProfile::Custom { .. }) && (at_mass - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("custom profile has g(m²) = {at_mass}, expected 1")));
        }
        Ok(g)
    }

    pub fn basic(r: f64, mass: f64) -> Result<Self> {
        Self::new(GProfile::Basic { r }, mass)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn profile(&self) -> &GProfile {
        &self.profile
    }

    /// Evaluates g; arguments rounded just below m² are clamped onto it.
    pub fn eval(&self, t: f64) -> f64 {
        let m2 = self.mass * self.mass;
        let t = t.max(m2);
        match &self.profile {
            GProfile::Basic { r } => basic(*r, t, m2),
            GProfile::BasicPrinted { r } => basic_printed(*r, t, m2),
            GProfile::Oscillatory { omega } => (omega * (t - m2)).cos(),
            GProfile::Constant => 1.0,
            GProfile::Custom { f, .. } => f(t),
        }
    }

    pub fn label(&self) -> String {
        self.profile.label()
    }
}

#[derive(Debug, Clone)]
pub struct CausalKernel {
    pub g: GFunction,
}

impl CausalKernel {
    pub fn new(g: GFunction) -> Self {
        Self { g }
    }

    pub fn mass(&self) -> f64 {
        self.g.mass()
    }

    /// 𝔎(k,p) = (ε(k)+ε(p), k+p) / (2√ε(k)√ε(p)) · g(𝔨·𝔭).
    pub fn eval(&self, k: &Vec3, p: &Vec3) -> FourVector {
        let m = self.mass();
        let (ek, ep) = (energy(k, m), energy(p, m));
        let s = self.g.eval(ek * ep - k.dot(p)) / (2.0 * (ek * ep).sqrt());
        let sum = k + p;
        FourVector::new((ek + ep) * s, sum[0] * s, sum[1] * s, sum[2] * s)
    }

    pub fn k0(&self, k: &Vec3, p: &Vec3) -> f64 {
        self.eval(k, p).t
    }
}

pub fn kernel_k(k: &Vec3, p: &Vec3, kern: &CausalKernel) -> FourVector {
    kern.eval(k, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorVariant {
    /// (𝔨·𝔫)𝔭 + (𝔭·𝔫)𝔨 − (m² + 𝔨·𝔭)𝔫, as displayed in the source formula.
    AsPrinted,
    /// (𝔨·𝔫)𝔭 + (𝔭·𝔫)𝔨 + (m² − 𝔨·𝔭)𝔫, the symmetric stress-energy contraction.
    StressEnergyStandard,
}

/// How the packet is normalized before evaluating a stress-energy current.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Evaluate on φ itself.
    Raw,
    /// Evaluate on (𝔭·𝔫)^{-1/2}φ, which makes the flux of the standard
    /// variant equal ‖φ‖² and commutes with the Poincaré action.
    EnergyRescaled,
    /// Evaluate on φ and divide by the measured full-surface flux.
    PerStateRenormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorKernel {
    pub n: FourVector,
    pub mass: f64,
    pub variant: TensorVariant,
    pub normalization: NormalizationMode,
}

impl TensorKernel {
    pub fn new(n: FourVector, mass: f64, variant: TensorVariant, normalization: NormalizationMode) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        if !n.is_finite() || n.t <= 0.0 || (n.square() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("n must be unit future timelike, got {n:?}")));
        }
        Ok(Self { n, mass, variant, normalization })
    }

    pub fn rest_frame(mass: f64, variant: TensorVariant, normalization: NormalizationMode) -> Self {
        Self { n: FourVector::new(1.0, 0.0, 0.0, 0.0), mass, variant, normalization }
    }

    /// Coefficient c in 𝔎ₙ = [(𝔨·𝔫)𝔭 + (𝔭·𝔫)𝔨 + c𝔫] / (2√ε(k)√ε(p)).
    pub fn n_coefficient(&self, kp: f64) -> f64 {
        let m2 = self.mass * self.mass;
        match self.variant {
            TensorVariant::AsPrinted => -(m2 + kp),
            TensorVariant::StressEnergyStandard => m2 - kp,
        }
    }

    pub fn eval(&self, k: &Vec3, p: &Vec3) -> FourVector {
        let kk = FourVector::on_shell(k, self.mass);
        let pp = FourVector::on_shell(p, self.mass);
        let (kn, pn) = (kk.dot(&self.n), pp.dot(&self.n));
        let c = self.n_coefficient(kk.dot(&pp));
        let s = 1.0 / (2.0 * (kk.t * pp.t).sqrt());
        let comp = |mu: usize| (kn * pp.component(mu) + pn * kk.component(mu) + c * self.n.component(mu)) * s;
        FourVector::new(comp(0), comp(1), comp(2), comp(3))
    }
}

pub fn kernel_kn(k: &Vec3, p: &Vec3, kern: &TensorKernel) -> FourVector {
    kern.eval(k, p)
}

/// Smallest eigenvalue of the symmetrized Gram matrix [K₀(kᵢ,kⱼ)].
pub fn gram_min_eigenvalue(points: &[Vec3], kern: &CausalKernel) -> Result<f64> {
    Ok(gram_spectrum(points, kern)?.0)
}

/// (min, max) eigenvalue of the symmetrized Gram matrix.
pub fn gram_spectrum(points: &[Vec3], kern: &CausalKernel) -> Result<(f64, f64)> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("Gram test needs at least one point".into()));
    }
    let n = points.len();
    let mut m = DMatrix::from_fn(n, n, |i, j| kern.k0(&points[i], &points[j]));
    let mt = m.transpose();
    m = (m + mt) * 0.5;
    let eig = SymmetricEigen::new(m);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((min, max))
}

#[derive(Debug, Clone)]
pub enum KernelSelection {
    Causal(CausalKernel),
    Tensor(TensorKernel),
}

fn parse_num(key: &str, v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("cannot parse {key}={v}")))
}

fn parse_four(v: &str) -> Result<FourVector> {
    let inner = v.trim().trim_start_matches('(').trim_end_matches(')');
    let parts: Vec<f64> = inner.split(',').map(|s| parse_num("n", s)).collect::<Result<_>>()?;
    if parts.len() != 4 {
        return Err(Error::InvalidParameter(format!("n needs four components, got {v}")));
    }
    Ok(FourVector::new(parts[0], parts[1], parts[2], parts[3]))
}

/// Splits on ':' outside parentheses.
fn split_fields(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ':' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

/// Parses selection strings such as `basic:r=1.5`, `basic:r=1.5:printed`,
/// `oscillatory:omega=50`, `constant` or
/// `tensor:n=(1,0,0,0):variant=standard:norm=energy_rescaled`.
pub fn parse_kernel(s: &str, mass: f64) -> Result<KernelSelection> {
    let fields = split_fields(s.trim());
    let bad = || Error::InvalidParameter(format!("unrecognized kernel selection '{s}'"));
    let kv = |f: &str| -> Result<(String, String)> {
        let (k, v) = f.split_once('=').ok_or_else(bad)?;
        Ok((k.trim().to_string(), v.trim().to_string()))
    };
    match fields[0] {
        "basic" => {
            let mut r = None;
            let mut printed = false;
            for f in &fields[1..] {
                if *f == "printed" {
                    printed = true;
                    continue;
                }
                let (k, v) = kv(f)?;
                match k.as_str() {
                    "r" => r = Some(parse_num("r", &v)?),
                    _ => return Err(bad()),
                }
            }
            let r = r.ok_or_else(bad)?;
            let profile = if printed { GProfile::BasicPrinted { r } } else { GProfile::Basic { r } };
            Ok(KernelSelection::Causal(CausalKernel::new(GFunction::new(profile, mass)?)))
        }
        "oscillatory" => {
            let mut omega = None;
            for f in &fields[1..] {
                let (k, v) = kv(f)?;
                match k.as_str() {
                    "omega" => omega = Some(parse_num("omega", &v)?),
                    _ => return Err(bad()),
                }
            }
            let profile = GProfile::Oscillatory { omega: omega.ok_or_else(bad)? };
            Ok(KernelSelection::Causal(CausalKernel::new(GFunction::new(profile, mass)?)))
        }
        "constant" if fields.len() == 1 => Ok(KernelSelection::Causal(CausalKernel::new(GFunction::new(GProfile::Constant, mass)?))),
        "tensor" => {
            let mut n = FourVector::new(1.0, 0.0, 0.0, 0.0);
            let mut variant = TensorVariant::StressEnergyStandard;
            let mut norm = NormalizationMode::EnergyRescaled;
            for f in &fields[1..] {
                let (k, v) = kv(f)?;
                match k.as_str() {
                    "n" => n = parse_four(&v)?,
                    "variant" => {
                        variant = match v.as_str() {
                            "standard" | "stress_energy_standard" => TensorVariant::StressEnergyStandard,
                            "as_printed" | "printed" => TensorVariant::AsPrinted,
                            _ => return Err(bad()),
                        }
                    }
                    "norm" => {
                        norm = match v.as_str() {
                            "raw" => NormalizationMode::Raw,
                            "energy" | "energy_rescaled" => NormalizationMode::EnergyRescaled,
                            "per_state" | "per_state_renormalized" => NormalizationMode::PerStateRenormalized,
                            _ => return Err(bad()),
                        }
                    }
                    _ => return Err(bad()),
                }
            }
            Ok(KernelSelection::Tensor(TensorKernel::new(n, mass, variant, norm)?))
        }
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_series_normalization_and_monotonicity() {
        for &m in &[0.5, 1.0, 2.0] {
            assert!((g_basic(1.5, m * m, m).unwrap() - 1.0).abs() < 1e-15);
            let a = g_basic(1.5, 2.0 * m * m, m).unwrap();
            let b = g_basic(1.5, 3.0 * m * m, m).unwrap();
            assert!(a < 1.0 && b < a && b > 0.0);
        }
        assert!(matches!(g_basic(1.5, 0.5, 1.0), Err(Error::Domain(_))));
        assert!(g_basic(1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn printed_reading_breaks_normalization_off_unit_mass() {
        let g = GFunction::new(GProfile::BasicPrinted { r: 1.5 }, 2.0).unwrap();
        // (8/(4+16))^1.5
        assert!((g.eval(4.0) - (0.4f64).powf(1.5)).abs() < 1e-15);
        let g1 = GFunction::new(GProfile::BasicPrinted { r: 1.5 }, 1.0).unwrap();
        assert!((g1.eval(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn custom_profile_must_be_normalized() {
        let bad = GProfile::Custom { name: "half".into(), f: Arc::new(|_| 0.5) };
        assert!(GFunction::new(bad, 1.0).is_err());
        let ok = GProfile::Custom { name: "exp".into(), f: Arc::new(|t: f64| (1.0 - t).exp()) };
        assert!(GFunction::new(ok, 1.0).is_ok());
    }

    #[test]
    fn diagonal_causal_kernel_is_on_shell() {
        let kern = CausalKernel::new(GFunction::basic(1.5, 1.3).unwrap());
        let p = Vec3::new(0.4, -1.2, 2.0);
        let k = kern.eval(&p, &p);
        let e = energy(&p, 1.3);
        assert!((k.t - 1.0).abs() < 1e-14);
        for i in 0..3 {
            assert!((k.x[i] - p[i] / e).abs() < 1e-14);
        }
    }

    #[test]
    fn stress_energy_diagonal_values() {
        let p = Vec3::new(0.3, 0.4, -1.0);
        let e = energy(&p, 1.0);
        let std = TensorKernel::rest_frame(1.0, TensorVariant::StressEnergyStandard, NormalizationMode::Raw);
        let printed = TensorKernel::rest_frame(1.0, TensorVariant::AsPrinted, NormalizationMode::Raw);
        assert!((std.eval(&p, &p).t - e).abs() < 1e-14);
        assert!((printed.eval(&p, &p).t - p.norm_squared() / e).abs() < 1e-14);
    }

    #[test]
    fn single_point_gram_is_one() {
        let kern = CausalKernel::new(GFunction::basic(1.5, 1.0).unwrap());
        let (lo, hi) = gram_spectrum(&[Vec3::new(0.2, 0.1, -0.3)], &kern).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
        assert!(gram_min_eigenvalue(&[], &kern).is_err());
    }

    #[test]
    fn selection_strings() {
        match parse_kernel("basic:r=2.5", 1.0).unwrap() {
            KernelSelection::Causal(k) => assert_eq!(k.g.label(), "basic:r=2.5"),
            _ => panic!(),
        }
        match parse_kernel("tensor:n=(1,0,0,0):variant=standard", 1.0).unwrap() {
            KernelSelection::Tensor(t) => {
                assert_eq!(t.variant, TensorVariant::StressEnergyStandard);
                assert_eq!(t.normalization, NormalizationMode::EnergyRescaled);
            }
            _ => panic!(),
        }
        assert!(parse_kernel("tensor:n=(1,0.5,0,0)", 1.0).is_err());
        assert!(parse_kernel("basic:r=1.0", 1.0).is_err());
        assert!(parse_kernel("basic:q=2", 1.0).is_err());
        assert!(parse_kernel("gaussian", 1.0).is_err());
        let boosted = format!("tensor:n=({},0,0,{}):variant=as_printed:norm=raw", 0.5f64.cosh(), 0.5f64.sinh());
        assert!(parse_kernel(&boosted, 1.0).is_ok());
    }
}
