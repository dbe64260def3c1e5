//! Experiment configuration: TOML on disk, unknown keys rejected.

use std::path::{Path, PathBuf};

use achronal::currents::{BackendKind, CurrentFamily, DEFAULT_TRUNCATION};
use achronal::kernels::{parse_kernel, CausalKernel, KernelSelection};
use achronal::localization::{LocalizationOptions, Mask, Region};
use achronal::minkowski::{rotation, FourVector, LorentzTransform, PoincareElement, Vec3};
use achronal::surfaces::AchronalSurface;
use achronal::wavepacket::{make_packet, GaussianParams, MomentumGrid, PacketSpec, WavePacket};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendName {
    Direct,
    Fast,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub p_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 48, p_max: 4.0 }
    }
}

/// Group elements for covariance and unitarity checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupConfig {
    Identity,
    Boost {
        rapidity: f64,
        #[serde(default = "z_axis")]
        direction: [f64; 3],
    },
    Rotation {
        #[serde(default = "z_axis")]
        axis: [f64; 3],
        angle: f64,
    },
    Translation {
        a: [f64; 4],
    },
}

fn z_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl GroupConfig {
    pub fn element(&self) -> Result<PoincareElement> {
        Ok(match self {
            GroupConfig::Identity => PoincareElement::identity(),
            GroupConfig::Boost { rapidity, direction } => {
                PoincareElement::lorentz(LorentzTransform::boost(&Vec3::from(*direction), *rapidity)?)
            }
            GroupConfig::Rotation { axis, angle } => PoincareElement::lorentz(rotation(&Vec3::from(*axis), *angle)?),
            GroupConfig::Translation { a } => PoincareElement::translation(FourVector::new(a[0], a[1], a[2], a[3])),
        })
    }

    pub fn label(&self) -> String {
        match self {
            GroupConfig::Identity => "identity".into(),
            GroupConfig::Boost { rapidity, direction } => format!("boost({rapidity},[{},{},{}])", direction[0], direction[1], direction[2]),
            GroupConfig::Rotation { axis, angle } => format!("rotation([{},{},{}],{angle})", axis[0], axis[1], axis[2]),
            GroupConfig::Translation { a } => format!("translation([{},{},{},{}])", a[0], a[1], a[2], a[3]),
        }
    }

    /// Transforms acting by exact index maps or phases.
    pub fn is_exact(&self) -> bool {
        match self {
            GroupConfig::Identity | GroupConfig::Translation { .. } => true,
            GroupConfig::Rotation { .. } => self.element().map(|g| g.lambda.signed_permutation().is_some()).unwrap_or(false),
            GroupConfig::Boost { rapidity, .. } => *rapidity == 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub normalization: f64,
    pub invariance: f64,
    /// Allowed relative spread of the ×16 step-halving ratio.
    pub continuity_band: f64,
    pub positivity: f64,
    pub covariance: f64,
    pub translation: f64,
    pub identity: f64,
    pub jacobian: f64,
    pub kernel_pd: f64,
    pub oracle: f64,
    pub logic: f64,
    pub causal_condition: f64,
    pub polarization_exact: f64,
    pub polarization_full: f64,
    pub unitarity_boost: f64,
    pub unitarity_exact: f64,
    pub dump: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            normalization: 1e-2,
            invariance: 2e-2,
            continuity_band: 0.3,
            positivity: 1e-9,
            covariance: 3e-2,
            translation: 1e-3,
            identity: 1e-12,
            jacobian: 1e-12,
            kernel_pd: 1e-10,
            oracle: 1e-6,
            logic: 2e-2,
            causal_condition: 1e-3,
            polarization_exact: 1e-10,
            polarization_full: 1e-2,
            unitarity_boost: 1e-2,
            unitarity_exact: 1e-14,
            dump: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            normalization: self.normalization * s,
            invariance: self.invariance * s,
            continuity_band: self.continuity_band * s,
            positivity: self.positivity * s,
            covariance: self.covariance * s,
            translation: self.translation * s,
            identity: self.identity * s,
            jacobian: self.jacobian * s,
            kernel_pd: self.kernel_pd * s,
            oracle: self.oracle * s,
            logic: self.logic * s,
            causal_condition: self.causal_condition * s,
            polarization_exact: self.polarization_exact * s,
            polarization_full: self.polarization_full * s,
            unitarity_boost: self.unitarity_boost * s,
            unitarity_exact: self.unitarity_exact * s,
            dump: self.dump * s,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub center: [f64; 3],
    pub subsamples: usize,
    pub bounded_nodes: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { center: [0.0; 3], subsamples: 4, bounded_nodes: 32 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogicConfig {
    pub samples: usize,
    /// Excluded shell around the diamond boundary, relative to the radius.
    pub shell: f64,
    pub radius: f64,
    pub gammas: Vec<f64>,
    /// Samples for the determinacy precondition of the patch comparison.
    pub patch_samples: usize,
    pub cc_radius: f64,
    pub cc_time: f64,
}

impl Default for LogicConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            shell: 1e-3,
            radius: 1.0,
            gammas: vec![0.5, 0.3, 0.6, 0.9],
            patch_samples: 256,
            cc_radius: 1.0,
            cc_time: 0.3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelPdConfig {
    pub points: usize,
    /// Momenta are drawn uniformly from the ball of this radius.
    pub p_radius: f64,
    pub dominance_samples: usize,
}

impl Default for KernelPdConfig {
    fn default() -> Self {
        Self { points: 200, p_radius: 3.0, dominance_samples: 1000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DumpConfig {
    pub times: Vec<f64>,
    pub center: [f64; 3],
    pub n: usize,
    pub spacing: f64,
    pub compare_direct: bool,
}

impl Default for DumpConfig {
    fn default() -> Self {
        Self { times: vec![0.0], center: [0.0; 3], n: 8, spacing: 0.5, compare_direct: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConservationConfig {
    pub points: usize,
    /// Points are drawn within this distance of the window centre and
    /// |t| below the same bound.
    pub radius: f64,
    pub step: f64,
    pub positivity_times: Vec<f64>,
    /// Factorization truncation for the positivity slices.
    pub positivity_truncation: f64,
}

impl Default for ConservationConfig {
    fn default() -> Self {
        Self { points: 10, radius: 1.0, step: 0.05, positivity_times: vec![0.0, 1.0], positivity_truncation: 1e-12 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub points: usize,
    pub radius: f64,
    pub time: f64,
    /// Kernels compared besides the configured one.
    pub kernels: Vec<String>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            points: 20,
            radius: 1.5,
            time: 1.0,
            kernels: vec!["basic:r=1.5".into(), "tensor:variant=standard:norm=energy_rescaled".into()],
        }
    }
}

fn default_packet() -> PacketSpec {
    PacketSpec::MollifiedGaussian(GaussianParams::default())
}

fn default_second_packet() -> PacketSpec {
    PacketSpec::MollifiedGaussian(GaussianParams { center: [0.3, 0.0, 0.0], position: [0.5, 0.0, 0.0], ..GaussianParams::default() })
}

fn default_kernel() -> String {
    "basic:r=1.5".into()
}

fn default_mass() -> f64 {
    1.0
}

fn default_truncation() -> f64 {
    DEFAULT_TRUNCATION
}

fn default_gamma_sweep() -> Vec<f64> {
    vec![0.5, 0.9, 0.99]
}

fn default_refine() -> usize {
    64
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_backend() -> BackendName {
    BackendName::Fast
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_mass")]
    pub mass: f64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_packet")]
    pub packet: PacketSpec,
    /// Second state for polarization checks.
    #[serde(default = "default_second_packet")]
    pub packet_b: PacketSpec,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    #[serde(default)]
    pub surfaces: Vec<AchronalSurface>,
    #[serde(default)]
    pub regions: Vec<Region>,
    #[serde(default)]
    pub groups: Vec<GroupConfig>,
    /// Flattening factors applied to cone(1.0) in the invariance sweep.
    #[serde(default = "default_gamma_sweep")]
    pub gamma_sweep: Vec<f64>,
    /// Finer grid size for the normalization refinement run; 0 disables it.
    #[serde(default = "default_refine")]
    pub refine: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_backend")]
    pub backend: BackendName,
    #[serde(default = "default_truncation")]
    pub truncation: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub logic: LogicConfig,
    #[serde(default)]
    pub kernel_pd: KernelPdConfig,
    #[serde(default)]
    pub dump: DumpConfig,
    #[serde(default)]
    pub conservation: ConservationConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            bail!("mass must be positive");
        }
        if !(self.truncation > 0.0 && self.truncation < 1.0) {
            bail!("truncation must lie in (0, 1)");
        }
        self.grid()?;
        parse_kernel(&self.kernel, self.mass).with_context(|| format!("kernel '{}'", self.kernel))?;
        for s in &self.surfaces {
            s.validate().with_context(|| format!("surface {}", s.id()))?;
        }
        for r in &self.regions {
            r.surface.validate()?;
            r.mask.validate()?;
        }
        for g in &self.groups {
            g.element().with_context(|| format!("group element {}", g.label()))?;
        }
        if self.window.subsamples == 0 || self.window.bounded_nodes < 2 {
            bail!("window needs at least one subsample and two nodes per axis");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<MomentumGrid> {
        Ok(MomentumGrid::new(self.grid.n, self.grid.p_max)?)
    }

    pub fn backend_kind(&self) -> BackendKind {
        match self.backend {
            BackendName::Direct => BackendKind::Direct,
            BackendName::Fast => BackendKind::Fast { truncation: self.truncation },
        }
    }

    pub fn packet(&self) -> Result<WavePacket> {
        Ok(make_packet(&self.grid()?, self.mass, &self.packet)?)
    }

    pub fn packet_b(&self) -> Result<WavePacket> {
        Ok(make_packet(&self.grid()?, self.mass, &self.packet_b)?)
    }

    pub fn family(&self) -> Result<CurrentFamily> {
        family_of(&self.kernel, self.mass)
    }

    pub fn localization_options(&self) -> LocalizationOptions {
        LocalizationOptions {
            center: self.window.center,
            subsamples: self.window.subsamples,
            bounded_nodes: self.window.bounded_nodes,
            ..LocalizationOptions::default()
        }
    }

    /// Surfaces for the invariance sweep; the four reference families when
    /// none are configured.
    pub fn invariance_surfaces(&self) -> Vec<AchronalSurface> {
        if !self.surfaces.is_empty() {
            return self.surfaces.clone();
        }
        vec![
            AchronalSurface::flat(0.0),
            AchronalSurface::tilted([0.0, 0.0, 0.5], 0.0),
            AchronalSurface::bump(0.6, 1.0),
            AchronalSurface::cone(0.8, [0.0; 3]),
        ]
    }

    /// The first configured region, or the unit ball on t = 0.
    pub fn primary_region(&self) -> Region {
        self.regions.first().cloned().unwrap_or_else(|| Region::new(AchronalSurface::flat(0.0), Mask::ball([0.0; 3], 1.0)))
    }

    pub fn group_elements(&self) -> Vec<GroupConfig> {
        if !self.groups.is_empty() {
            return self.groups.clone();
        }
        vec![
            GroupConfig::Identity,
            GroupConfig::Translation { a: [0.0, 0.5, -0.25, 0.0] },
            GroupConfig::Rotation { axis: [0.0, 0.0, 1.0], angle: std::f64::consts::FRAC_PI_2 },
            GroupConfig::Boost { rapidity: 0.4, direction: [0.0, 0.0, 1.0] },
        ]
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

pub fn family_of(kernel: &str, mass: f64) -> Result<CurrentFamily> {
    Ok(match parse_kernel(kernel, mass).with_context(|| format!("kernel '{kernel}'"))? {
        KernelSelection::Causal(k) => CurrentFamily::Causal(k),
        KernelSelection::Tensor(t) => CurrentFamily::StressEnergy(t),
    })
}

pub fn causal_kernel_of(kernel: &str, mass: f64) -> Result<CausalKernel> {
    match parse_kernel(kernel, mass)? {
        KernelSelection::Causal(k) => Ok(k),
        KernelSelection::Tensor(_) => bail!("kernel '{kernel}' is not a causal kernel"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_has_defaults() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c.grid.n, 48);
        assert_eq!(c.kernel, "basic:r=1.5");
        assert_eq!(c.invariance_surfaces().len(), 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("masss = 1.0").is_err());
        assert!(ExperimentConfig::from_toml("[grid]\nn = 48\np_max = 4.0\nq = 1").is_err());
    }

    #[test]
    fn surfaces_and_regions_parse() {
        let text = r#"
kernel = "basic:r=2.5"
[[surfaces]]
type = "cone"
gamma = 0.8
[[regions]]
surface = { type = "flat", t0 = 0.0 }
mask = { shape = "ball", center = [0.0, 0.0, 0.0], radius = 1.0 }
[[groups]]
kind = "boost"
rapidity = 0.4
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.surfaces[0], AchronalSurface::cone(0.8, [0.0; 3]));
        assert_eq!(c.regions[0].mask, Mask::ball([0.0; 3], 1.0));
        assert_eq!(c.groups[0], GroupConfig::Boost { rapidity: 0.4, direction: [0.0, 0.0, 1.0] });
    }

    #[test]
    fn hash_depends_on_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.seed = 7;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), ExperimentConfig::default().hash());
    }
}
