//! Achronal surfaces as graphs t = τ(x) of 1-Lipschitz functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minkowski::{FourVector, LorentzTransform, PoincareElement, Vec3};
use crate::window::SpatialWindow;

/// τ sampled on the nodes of a spatial window; trilinear in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSurface {
    pub window: SpatialWindow,
    pub values: Vec<f64>,
    /// Largest neighbour slope, computed at construction.
    #[serde(skip)]
    lipschitz: f64,
}

impl SampledSurface {
    /// Validates the discrete 1-Lipschitz condition over all 26-neighbour
    /// pairs with absolute tolerance 1e-12.
    pub fn new(window: SpatialWindow, values: Vec<f64>) -> Result<Self> {
        if values.len() != window.len() {
            return Err(Error::InvalidParameter("sample count does not match the window".into()));
        }
        if window.n.iter().any(|&k| k < 2) {
            return Err(Error::InvalidParameter("sampled surfaces need at least two nodes per axis".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite surface sample".into()));
        }
        let n = window.n;
        let mut lip = 0.0f64;
        for idx in 0..window.len() {
            let c = window.unravel(idx);
            for d0 in 0..=1i64 {
                for d1 in -1..=1i64 {
                    for d2 in -1..=1i64 {
                        if (d0, d1, d2) <= (0, 0, 0) {
                            continue;
                        }
                        let o = [c[0] as i64 + d0, c[1] as i64 + d1, c[2] as i64 + d2];
                        if (0..3).any(|a| o[a] < 0 || o[a] >= n[a] as i64) {
                            continue;
                        }
                        let j = window.index(o[0] as usize, o[1] as usize, o[2] as usize);
                        let dx = ((d0 as f64 * window.spacing[0]).powi(2)
                            + (d1 as f64 * window.spacing[1]).powi(2)
                            + (d2 as f64 * window.spacing[2]).powi(2))
                        .sqrt();
                        let dt = (values[idx] - values[j]).abs();
                        if dt > dx + 1e-12 {
                            return Err(Error::InvalidParameter(format!(
                                "samples violate the 1-Lipschitz bound between nodes {c:?} and {o:?}: |dt| = {dt}, |dx| = {dx}"
                            )));
                        }
                        lip = lip.max(dt / dx);
                    }
                }
            }
        }
        Ok(Self { window, values, lipschitz: lip })
    }

    /// Samples an analytic surface on a window.
    pub fn from_surface(surface: &AchronalSurface, window: SpatialWindow) -> Result<Self> {
        let values = (0..window.len()).map(|i| surface.tau(&window.node(i))).collect::<Result<Vec<_>>>()?;
        Self::new(window, values)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn locate(&self, x: &Vec3) -> Result<([usize; 3], [f64; 3])> {
        let w = &self.window;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let s = (x[a] - w.origin[a]) / w.spacing[a];
            let top = (w.n[a] - 1) as f64;
            if !(s >= -1e-9 && s <= top + 1e-9) {
                return Err(Error::Domain(format!("x = {:?} outside the sampled domain", x.as_slice())));
            }
            let s = s.clamp(0.0, top);
            let i = (s.floor() as usize).min(w.n[a] - 2);
            base[a] = i;
            frac[a] = s - i as f64;
        }
        Ok((base, frac))
    }

    fn trilinear(&self, x: &Vec3, f: impl Fn(usize) -> f64) -> Result<f64> {
        let (b, u) = self.locate(x)?;
        let mut acc = 0.0;
        for (da, wa) in [(0, 1.0 - u[0]), (1, u[0])] {
            for (db, wb) in [(0, 1.0 - u[1]), (1, u[1])] {
                for (dc, wc) in [(0, 1.0 - u[2]), (1, u[2])] {
                    let w = wa * wb * wc;
                    if w != 0.0 {
                        acc += w * f(self.window.index(b[0] + da, b[1] + db, b[2] + dc));
                    }
                }
            }
        }
        Ok(acc)
    }

    pub fn tau(&self, x: &Vec3) -> Result<f64> {
        self.trilinear(x, |i| self.values[i])
    }

    /// Centered difference at a node along axis `a`, one-sided at the edges.
    pub fn node_derivative(&self, idx: usize, a: usize) -> f64 {
        let w = &self.window;
        let c = w.unravel(idx);
        let at = |k: usize| {
            let mut cc = c;
            cc[a] = k;
            self.values[w.index(cc[0], cc[1], cc[2])]
        };
        let h = w.spacing[a];
        let n = w.n[a];
        if c[a] == 0 {
            if n >= 3 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else {
                (at(1) - at(0)) / h
            }
        } else if c[a] + 1 == n {
            if n >= 3 {
                (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
            } else {
                (at(n - 1) - at(n - 2)) / h
            }
        } else {
            (at(c[a] + 1) - at(c[a] - 1)) / (2.0 * h)
        }
    }

    pub fn gradient(&self, x: &Vec3) -> Result<Vec3> {
        let mut g = Vec3::zeros();
        for a in 0..3 {
            g[a] = self.trilinear(x, |i| self.node_derivative(i, a))?;
        }
        Ok(g)
    }
}

/// Image g·Σ of a maximal achronal surface, evaluated through S⁻¹.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedSurface {
    pub base: AchronalSurface,
    pub g: PoincareElement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AchronalSurface {
    Flat {
        t0: f64,
    },
    /// τ(x) = e·x + offset.
    Tilted {
        e: [f64; 3],
        #[serde(default)]
        offset: f64,
    },
    /// τ(x) = λ s (√(1 + |x|²/s²) − 1).
    Bump {
        lambda: f64,
        scale: f64,
    },
    /// τ(x) = offset + γ|x − apex|.
    Cone {
        gamma: f64,
        #[serde(default)]
        apex: [f64; 3],
        #[serde(default)]
        offset: f64,
    },
    Sampled(SampledSurface),
    Transformed(Box<TransformedSurface>),
    /// γ·τ for a surface without a closed-form rescaling.
    Scaled {
        base: Box<AchronalSurface>,
        gamma: f64,
    },
}

impl AchronalSurface {
    pub fn flat(t0: f64) -> Self {
        AchronalSurface::Flat { t0 }
    }

    pub fn tilted(e: [f64; 3], offset: f64) -> Self {
        AchronalSurface::Tilted { e, offset }
    }

    pub fn bump(lambda: f64, scale: f64) -> Self {
        AchronalSurface::Bump { lambda, scale }
    }

    pub fn cone(gamma: f64, apex: [f64; 3]) -> Self {
        AchronalSurface::Cone { gamma, apex, offset: 0.0 }
    }

    /// Checks the family parameters.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            AchronalSurface::Flat { t0 } if !t0.is_finite() => bad("non-finite t0".into()),
            AchronalSurface::Tilted { e, offset } => {
                let n = Vec3::from(*e).norm();
                if !(n <= 1.0) || !offset.is_finite() {
                    bad(format!("tilted surface needs |e| <= 1, got {n}"))
                } else {
                    Ok(())
                }
            }
            AchronalSurface::Bump { lambda, scale } => {
                if !(lambda.abs() < 1.0) || !(*scale > 0.0) {
                    bad(format!("bump needs |lambda| < 1 and scale > 0, got {lambda}, {scale}"))
                } else {
                    Ok(())
                }
            }
            AchronalSurface::Cone { gamma, apex, offset } => {
                if !(gamma.abs() <= 1.0) || apex.iter().any(|a| !a.is_finite()) || !offset.is_finite() {
                    bad(format!("cone needs |gamma| <= 1, got {gamma}"))
                } else {
                    Ok(())
                }
            }
            AchronalSurface::Transformed(t) => {
                t.base.validate()?;
                if !t.base.is_maximal() {
                    return bad("only maximal surfaces can be transformed".into());
                }
                LorentzTransform::from_matrix(*t.g.lambda.matrix()).map(|_| ())
            }
            AchronalSurface::Scaled { base, gamma } => {
                if !(0.0..=1.0).contains(gamma) {
                    return bad(format!("flattening factor must lie in [0,1], got {gamma}"));
                }
                base.validate()
            }
            _ => Ok(()),
        }
    }

    /// Domain is all of ℝ³.
    pub fn is_maximal(&self) -> bool {
        match self {
            AchronalSurface::Sampled(_) => false,
            AchronalSurface::Transformed(t) => t.base.is_maximal(),
            AchronalSurface::Scaled { base, .. } => base.is_maximal(),
            _ => true,
        }
    }

    /// Lipschitz bound of τ.
    pub fn lipschitz(&self) -> f64 {
        match self {
            AchronalSurface::Flat { .. } => 0.0,
            AchronalSurface::Tilted { e, .. } => Vec3::from(*e).norm(),
            AchronalSurface::Bump { lambda, .. } => lambda.abs(),
            AchronalSurface::Cone { gamma, .. } => gamma.abs(),
            AchronalSurface::Sampled(s) => s.lipschitz(),
            AchronalSurface::Transformed(t) => {
                // Relativistic velocity addition of the slope and the boost.
                let l = t.base.lipschitz();
                let l00 = t.g.lambda.matrix()[(0, 0)];
                let v = (l00 * l00 - 1.0).max(0.0).sqrt() / l00;
                ((l + v) / (1.0 + l * v)).min(1.0)
            }
            AchronalSurface::Scaled { base, gamma } => gamma * base.lipschitz(),
        }
    }

    pub fn tau(&self, x: &Vec3) -> Result<f64> {
        Ok(match self {
            AchronalSurface::Flat { t0 } => *t0,
            AchronalSurface::Tilted { e, offset } => Vec3::from(*e).dot(x) + offset,
            AchronalSurface::Bump { lambda, scale } => lambda * scale * ((1.0 + x.norm_squared() / (scale * scale)).sqrt() - 1.0),
            AchronalSurface::Cone { gamma, apex, offset } => offset + gamma * (x - Vec3::from(*apex)).norm(),
            AchronalSurface::Sampled(s) => s.tau(x)?,
            AchronalSurface::Transformed(t) => t.solve(x)?.0,
            AchronalSurface::Scaled { base, gamma } => gamma * base.tau(x)?,
        })
    }

    /// ∇τ; at non-differentiable points a one-sided value (see `is_singular`).
    pub fn gradient(&self, x: &Vec3) -> Result<Vec3> {
        Ok(match self {
            AchronalSurface::Flat { .. } => Vec3::zeros(),
            AchronalSurface::Tilted { e, .. } => Vec3::from(*e),
            AchronalSurface::Bump { lambda, scale } => x * (*lambda / (scale * (1.0 + x.norm_squared() / (scale * scale)).sqrt())),
            AchronalSurface::Cone { gamma, apex, .. } => {
                let d = x - Vec3::from(*apex);
                let r = d.norm();
                if r == 0.0 {
                    Vec3::new(*gamma, 0.0, 0.0)
                } else {
                    d * (gamma / r)
                }
            }
            AchronalSurface::Sampled(s) => s.gradient(x)?,
            AchronalSurface::Transformed(t) => {
                let (_, pre) = t.solve(x)?;
                let z = t.base.gradient(&pre)?;
                let v = t.g.lambda.apply(&FourVector::from_parts(1.0, &z));
                v.spatial() / v.t
            }
            AchronalSurface::Scaled { base, gamma } => base.gradient(x)? * *gamma,
        })
    }

    /// Whether x is a point where τ is not differentiable.
    pub fn is_singular(&self, x: &Vec3) -> bool {
        match self {
            AchronalSurface::Cone { apex, gamma, .. } => *gamma != 0.0 && (x - Vec3::from(*apex)).norm() == 0.0,
            AchronalSurface::Scaled { base, .. } => base.is_singular(x),
            AchronalSurface::Transformed(t) => t.solve(x).map(|(_, pre)| t.base.is_singular(&pre)).unwrap_or(false),
            _ => false,
        }
    }

    /// τ ↦ γτ.
    pub fn flatten(&self, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("flattening factor must lie in [0,1], got {gamma}")));
        }
        Ok(match self {
            AchronalSurface::Flat { t0 } => AchronalSurface::Flat { t0: gamma * t0 },
            AchronalSurface::Tilted { e, offset } => AchronalSurface::Tilted { e: e.map(|c| gamma * c), offset: gamma * offset },
            AchronalSurface::Bump { lambda, scale } => AchronalSurface::Bump { lambda: gamma * lambda, scale: *scale },
            AchronalSurface::Cone { gamma: g, apex, offset } => {
                AchronalSurface::Cone { gamma: gamma * g, apex: *apex, offset: gamma * offset }
            }
            AchronalSurface::Sampled(s) => {
                AchronalSurface::Sampled(SampledSurface::new(s.window, s.values.iter().map(|v| gamma * v).collect())?)
            }
            AchronalSurface::Scaled { base, gamma: g } => AchronalSurface::Scaled { base: base.clone(), gamma: gamma * g },
            AchronalSurface::Transformed(_) => AchronalSurface::Scaled { base: Box::new(self.clone()), gamma },
        })
    }

    /// Short identifier used in reports.
    pub fn id(&self) -> String {
        match self {
            AchronalSurface::Flat { t0 } => format!("flat({t0})"),
            AchronalSurface::Tilted { e, offset } => format!("tilted([{},{},{}],{offset})", e[0], e[1], e[2]),
            AchronalSurface::Bump { lambda, scale } => format!("bump({lambda},{scale})"),
            AchronalSurface::Cone { gamma, apex, offset } => format!("cone({gamma},[{},{},{}],{offset})", apex[0], apex[1], apex[2]),
            AchronalSurface::Sampled(s) => format!("sampled({}x{}x{})", s.window.n[0], s.window.n[1], s.window.n[2]),
            AchronalSurface::Transformed(t) => format!("transformed({})", t.base.id()),
            AchronalSurface::Scaled { base, gamma } => format!("scaled({},{gamma})", base.id()),
        }
    }
}

pub fn tau(surface: &AchronalSurface, x: &Vec3) -> Result<f64> {
    surface.tau(x)
}

pub fn gradient(surface: &AchronalSurface, x: &Vec3) -> Result<Vec3> {
    surface.gradient(x)
}

pub fn flatten(surface: &AchronalSurface, gamma: f64) -> Result<AchronalSurface> {
    surface.flatten(gamma)
}

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

impl TransformedSurface {
    /// Solves f(s) = (g⁻¹(s,y))₀ − τ(ϖ(g⁻¹(s,y))) = 0, which is strictly
    /// increasing in s. Returns τ_g(y) and the preimage S⁻¹(y).
    pub fn solve(&self, y: &Vec3) -> Result<(f64, Vec3)> {
        let ginv = self.g.inverse();
        let lam = ginv.lambda.matrix();
        let col = Vec3::new(lam[(1, 0)], lam[(2, 0)], lam[(3, 0)]);
        let l = self.base.lipschitz().min(1.0);
        // f'(s) lies in [kappa_lo, kappa_hi].
        let kappa_lo = lam[(0, 0)] - l * col.norm();
        let kappa_hi = lam[(0, 0)] + l * col.norm();
        let eval = |s: f64| -> Result<(f64, f64, Vec3)> {
            let w = ginv.act(&FourVector::from_parts(s, y));
            let x = w.spatial();
            let f = w.t - self.base.tau(&x)?;
            let df = lam[(0, 0)] - self.base.gradient(&x)?.dot(&col);
            Ok((f, df, x))
        };
        // Seed: boost the spatial point back and use the base height there.
        let seed_pt = ginv.act(&FourVector::from_parts(0.0, y)).spatial();
        let mut s = self.g.act(&FourVector::from_parts(self.base.tau(&seed_pt)?, &seed_pt)).t;
        let (mut f, mut df, mut x) = eval(s)?;
        let scale = 1.0 + s.abs() + y.norm();
        let width = f.abs() / kappa_lo.max(1e-300) * 1.01 + 1e-12 * scale;
        let (mut lo, mut hi) = if f > 0.0 { (s - width, s) } else { (s, s + width) };
        for _ in 0..NEWTON_MAX_ITER {
            if f.abs() <= NEWTON_TOL * scale * 1e-2 {
                return Ok((s, x));
            }
            if f > 0.0 {
                hi = hi.min(s);
            } else {
                lo = lo.max(s);
            }
            let mut next = s - f / df.max(kappa_lo * 0.5);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - s).abs();
            s = next;
            (f, df, x) = eval(s)?;
            if step <= NEWTON_TOL * scale * 1e-3 || hi - lo <= 4.0 * f64::EPSILON * scale {
                if f.abs() <= NEWTON_TOL * scale * kappa_hi {
                    return Ok((s, x));
                }
                break;
            }
        }
        if f.abs() <= NEWTON_TOL * scale * kappa_hi {
            return Ok((s, x));
        }
        Err(Error::FoldOver(format!("no convergence for y = {:?}, residual {f:e}", y.as_slice())))
    }
}

/// Closed form of a plane t = e·x + c under g, or `None` for curved bases.
fn plane_image(base: &AchronalSurface, g: &PoincareElement) -> Option<AchronalSurface> {
    let (e, c0) = match base {
        AchronalSurface::Flat { t0 } => (Vec3::zeros(), *t0),
        AchronalSurface::Tilted { e, offset } => (Vec3::from(*e), *offset),
        _ => return None,
    };
    // Image plane {z : r·(z − a) = c0} with r = νᵀΛ⁻¹, ν = (1, −e).
    let li = g.lambda.inverse();
    let m = li.matrix();
    let nu = [1.0, -e[0], -e[1], -e[2]];
    let r: Vec<f64> = (0..4).map(|j| (0..4).map(|i| nu[i] * m[(i, j)]).sum()).collect();
    let ra = r[0] * g.a.t + r[1] * g.a.x[0] + r[2] * g.a.x[1] + r[3] * g.a.x[2];
    Some(AchronalSurface::Tilted { e: [-r[1] / r[0], -r[2] / r[0], -r[3] / r[0]], offset: (c0 + ra) / r[0] })
}

/// Image of a surface under g with the forward map and its Jacobian.
#[derive(Debug, Clone)]
pub struct SurfaceTransformResult {
    pub base: AchronalSurface,
    pub g: PoincareElement,
    /// The image surface τ_g (closed form for planes).
    pub surface: AchronalSurface,
    /// Largest roundtrip error |S⁻¹(S(x)) − x| over the samples.
    pub roundtrip_error: f64,
}

impl SurfaceTransformResult {
    /// S(x) = ϖ(g·(τ(x), x)).
    pub fn forward(&self, x: &Vec3) -> Result<Vec3> {
        Ok(self.g.act(&FourVector::from_parts(self.base.tau(x)?, x)).spatial())
    }

    /// S⁻¹(y) by the monotone scalar solve.
    pub fn inverse(&self, y: &Vec3) -> Result<Vec3> {
        let t = TransformedSurface { base: self.base.clone(), g: self.g };
        Ok(t.solve(y)?.1)
    }

    /// |det DS(x)| = [Λ(1, ∇τ(x))]₀.
    pub fn jacobian_det(&self, x: &Vec3) -> Result<f64> {
        let z = self.base.gradient(x)?;
        Ok(self.g.lambda.apply(&FourVector::from_parts(1.0, &z)).t)
    }

    pub fn tau_g(&self, y: &Vec3) -> Result<f64> {
        self.surface.tau(y)
    }
}

/// Transforms a maximal achronal surface by g, checking S on the samples.
pub fn transform_surface(g: &PoincareElement, surface: &AchronalSurface, samples: &[Vec3]) -> Result<SurfaceTransformResult> {
    surface.validate()?;
    if !surface.is_maximal() {
        return Err(Error::InvalidParameter("transform_surface needs a maximal surface".into()));
    }
    let image = match plane_image(surface, g) {
        Some(p) => p,
        None if g.lambda.is_identity() && g.a == FourVector::ZERO => surface.clone(),
        None => AchronalSurface::Transformed(Box::new(TransformedSurface { base: surface.clone(), g: *g })),
    };
    let mut res = SurfaceTransformResult { base: surface.clone(), g: *g, surface: image, roundtrip_error: 0.0 };
    let solver = TransformedSurface { base: surface.clone(), g: *g };
    for x in samples {
        let y = res.forward(x)?;
        let (_, back) = solver.solve(&y)?;
        let err = (back - x).norm();
        if !(err <= 1e-8 * (1.0 + x.norm())) {
            return Err(Error::FoldOver(format!("S is not invertible near x = {:?} (roundtrip error {err:e})", x.as_slice())));
        }
        res.roundtrip_error = res.roundtrip_error.max(err);
    }
    Ok(res)
}

#[derive(Debug, Clone, Serialize)]
pub struct CauchyCheck {
    pub cauchy: bool,
    /// A pair violating strict achronality, or a far point with |τ|/|x| ≥ 1.
    pub witness: Option<(Vec3, Vec3)>,
    pub asymptotic_slope: f64,
    pub reason: String,
}

/// Unit vectors on a Fibonacci sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Exact limsup |τ(x)|/|x| and a direction attaining it, where known.
fn asymptotic_slope(surface: &AchronalSurface) -> Option<(f64, Vec3)> {
    match surface {
        AchronalSurface::Flat { .. } => Some((0.0, Vec3::x())),
        AchronalSurface::Tilted { e, .. } => {
            let e = Vec3::from(*e);
            let n = e.norm();
            Some((n, if n > 0.0 { e / n } else { Vec3::x() }))
        }
        AchronalSurface::Bump { lambda, .. } => Some((lambda.abs(), Vec3::x())),
        AchronalSurface::Cone { gamma, .. } => Some((gamma.abs(), Vec3::x())),
        AchronalSurface::Scaled { base, gamma } => asymptotic_slope(base).map(|(s, d)| (gamma * s, d)),
        _ => None,
    }
}

/// Strict pairwise achronality on the samples plus limsup |τ(x)|/|x| < 1
/// estimated on far shells.
pub fn is_spacelike_cauchy(surface: &AchronalSurface, samples: &[Vec3]) -> Result<CauchyCheck> {
    if !surface.is_maximal() {
        return Ok(CauchyCheck { cauchy: false, witness: None, asymptotic_slope: f64::NAN, reason: "surface is not maximal".into() });
    }
    let taus = samples.iter().map(|x| surface.tau(x)).collect::<Result<Vec<_>>>()?;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let dx = (samples[i] - samples[j]).norm();
            if dx > 0.0 && !((taus[i] - taus[j]).abs() < dx) {
                return Ok(CauchyCheck {
                    cauchy: false,
                    witness: Some((samples[i], samples[j])),
                    asymptotic_slope: f64::NAN,
                    reason: "pair not strictly spacelike".into(),
                });
            }
        }
    }
    let (slope, worst) = match asymptotic_slope(surface) {
        Some(s) => (s.0, s.1 * 1e8),
        None => {
            let mut slope = 0.0f64;
            let mut worst = Vec3::zeros();
            for r in [1e4, 1e6, 1e8] {
                for u in fibonacci_sphere(200) {
                    let x = u * r;
                    let s = surface.tau(&x)?.abs() / r;
                    if s > slope {
                        slope = s;
                        worst = x;
                    }
                }
            }
            (slope, worst)
        }
    };
    if !(slope < 1.0 - 1e-9) {
        return Ok(CauchyCheck {
            cauchy: false,
            witness: Some((worst, Vec3::zeros())),
            asymptotic_slope: slope,
            reason: "asymptotic slope reaches 1".into(),
        });
    }
    Ok(CauchyCheck { cauchy: true, witness: None, asymptotic_slope: slope, reason: "ok".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::boost_z;

    #[test]
    fn analytic_values_and_gradients() {
        let x = Vec3::new(0.3, -1.2, 2.0);
        let b = AchronalSurface::bump(0.6, 1.5);
        let h = 1e-6;
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            let fd = (b.tau(&xp).unwrap() - b.tau(&xm).unwrap()) / (2.0 * h);
            assert!((fd - b.gradient(&x).unwrap()[a]).abs() < 1e-8);
        }
        let c = AchronalSurface::cone(0.8, [1.0, 0.0, 0.0]);
        assert!((c.tau(&Vec3::new(1.0, 3.0, 4.0)).unwrap() - 4.0).abs() < 1e-15);
        assert!(c.is_singular(&Vec3::new(1.0, 0.0, 0.0)));
        assert_eq!(c.gradient(&Vec3::new(1.0, 0.0, 0.0)).unwrap(), Vec3::new(0.8, 0.0, 0.0));
    }

    #[test]
    fn flat_image_under_boost_is_closed_form() {
        let rho = 0.4;
        let g = PoincareElement::lorentz(boost_z(rho));
        let res = transform_surface(&g, &AchronalSurface::flat(0.0), &[Vec3::new(0.5, 0.2, -1.0)]).unwrap();
        let y = Vec3::new(0.3, -0.7, 1.9);
        assert!((res.tau_g(&y).unwrap() - rho.tanh() * y[2]).abs() < 1e-14);
        assert!((res.jacobian_det(&y).unwrap() - rho.cosh()).abs() < 1e-14);
        let x = Vec3::new(0.1, 0.2, 0.3);
        let s = res.forward(&x).unwrap();
        assert!((s - Vec3::new(0.1, 0.2, rho.cosh() * 0.3)).norm() < 1e-15);
    }

    #[test]
    fn newton_inverse_matches_plane_closed_form() {
        let g = PoincareElement::new(FourVector::new(0.3, 0.1, -0.2, 0.5), boost_z(-0.7));
        let base = AchronalSurface::tilted([0.2, -0.3, 0.4], 0.1);
        let closed = plane_image(&base, &g).unwrap();
        let t = TransformedSurface { base, g };
        for y in [Vec3::new(0.0, 0.0, 0.0), Vec3::new(3.0, -2.0, 1.0), Vec3::new(-10.0, 4.0, 7.0)] {
            let (s, _) = t.solve(&y).unwrap();
            assert!((s - closed.tau(&y).unwrap()).abs() < 1e-11);
        }
    }

    #[test]
    fn sampled_surface_validation() {
        let w = SpatialWindow::centered([0.0; 3], 0.5, 6).unwrap();
        let ok = SampledSurface::from_surface(&AchronalSurface::cone(0.9, [0.1, 0.0, 0.0]), w);
        assert!(ok.is_ok());
        let values: Vec<f64> = (0..w.len()).map(|i| 1.5 * w.node(i)[0]).collect();
        assert!(SampledSurface::new(w, values).is_err());
    }

    #[test]
    fn sampled_domain_is_enforced() {
        let w = SpatialWindow::centered([0.0; 3], 0.5, 4).unwrap();
        let s = AchronalSurface::Sampled(SampledSurface::from_surface(&AchronalSurface::flat(0.2), w).unwrap());
        assert!((s.tau(&Vec3::new(0.1, 0.2, -0.3)).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(s.tau(&Vec3::new(5.0, 0.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn cauchy_checks() {
        let pts: Vec<Vec3> = fibonacci_sphere(30).iter().enumerate().map(|(i, u)| u * (0.5 + i as f64 * 0.3)).collect();
        assert!(is_spacelike_cauchy(&AchronalSurface::cone(0.8, [0.0; 3]), &pts).unwrap().cauchy);
        assert!(is_spacelike_cauchy(&AchronalSurface::tilted([0.5, 0.0, 0.0], 0.0), &pts).unwrap().cauchy);
        let light =
            is_spacelike_cauchy(&AchronalSurface::cone(1.0, [0.0; 3]), &[Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0)]).unwrap();
        assert!(!light.cauchy && light.witness.is_some());
        let tilted = is_spacelike_cauchy(&AchronalSurface::tilted([1.0, 0.0, 0.0], 0.0), &[]).unwrap();
        assert!(!tilted.cauchy);
    }

    #[test]
    fn flatten_scales_lipschitz() {
        let c = AchronalSurface::cone(0.8, [0.0; 3]);
        let f = c.flatten(0.5).unwrap();
        assert!((f.lipschitz() - 0.4).abs() < 1e-15);
        assert!(c.flatten(1.5).is_err());
    }
}
