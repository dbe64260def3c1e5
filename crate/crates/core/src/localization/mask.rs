//! Masks over the spatial projection of a region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minkowski::{FourVector, PoincareElement, Vec3};
use crate::surfaces::{AchronalSurface, TransformedSurface};
use crate::window::SpatialWindow;

/// A measurable subset of ℝ³ with piecewise-smooth boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mask {
    Full,
    Empty,
    Ball {
        center: [f64; 3],
        radius: f64,
    },
    Box {
        lo: [f64; 3],
        hi: [f64; 3],
    },
    /// {x : normal·x > offset}.
    HalfSpace {
        normal: [f64; 3],
        #[serde(default)]
        offset: f64,
    },
    Complement {
        of: std::boxed::Box<Mask>,
    },
    Union {
        parts: Vec<Mask>,
    },
    Intersection {
        parts: Vec<Mask>,
    },
    /// S(base) for S(x) = ϖ(g·(τ(x), x)) over the given maximal surface.
    Image {
        base: std::boxed::Box<Mask>,
        surface: AchronalSurface,
        g: PoincareElement,
    },
}

type Bounds = ([f64; 3], [f64; 3]);

impl Mask {
    pub fn ball(center: [f64; 3], radius: f64) -> Self {
        Mask::Ball { center, radius }
    }

    pub fn half_space(normal: [f64; 3], offset: f64) -> Self {
        Mask::HalfSpace { normal, offset }
    }

    pub fn complement(self) -> Self {
        Mask::Complement { of: std::boxed::Box::new(self) }
    }

    /// Image of this mask under the graph map of `surface` followed by g.
    /// The identity and rigid motions of balls on flat surfaces are
    /// resolved in closed form.
    pub fn image(self, surface: &AchronalSurface, g: &PoincareElement) -> Self {
        if g.lambda.is_identity() && g.a == FourVector::ZERO {
            return self;
        }
        let m = g.lambda.matrix();
        let rigid = m[(0, 0)] == 1.0 && (1..4).all(|i| m[(0, i)] == 0.0 && m[(i, 0)] == 0.0);
        if let (true, AchronalSurface::Flat { t0 }, Mask::Ball { center, radius }) = (rigid, surface, &self) {
            let c = g.act(&FourVector::from_parts(*t0, &Vec3::from(*center))).spatial();
            return Mask::Ball { center: [c[0], c[1], c[2]], radius: *radius };
        }
        Mask::Image { base: std::boxed::Box::new(self), surface: surface.clone(), g: *g }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match self {
            Mask::Ball { center, radius } => {
                if !(*radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
                    return bad("ball needs a positive radius");
                }
            }
            Mask::Box { lo, hi } => {
                if (0..3).any(|a| !(hi[a] > lo[a])) {
                    return bad("box needs lo < hi on every axis");
                }
            }
            Mask::HalfSpace { normal, offset } => {
                if !(Vec3::from(*normal).norm() > 0.0) || !offset.is_finite() {
                    return bad("half-space needs a nonzero normal");
                }
            }
            Mask::Complement { of } => of.validate()?,
            Mask::Union { parts } | Mask::Intersection { parts } => {
                for p in parts {
                    p.validate()?;
                }
            }
            Mask::Image { base, surface, .. } => {
                base.validate()?;
                surface.validate()?;
                if !surface.is_maximal() {
                    return bad("image masks need a maximal surface");
                }
            }
            Mask::Full | Mask::Empty => {}
        }
        Ok(())
    }

    pub fn contains(&self, x: &Vec3) -> Result<bool> {
        Ok(match self {
            Mask::Full => true,
            Mask::Empty => false,
            Mask::Ball { center, radius } => (x - Vec3::from(*center)).norm_squared() <= radius * radius,
            Mask::Box { lo, hi } => (0..3).all(|a| x[a] >= lo[a] && x[a] <= hi[a]),
            Mask::HalfSpace { normal, offset } => Vec3::from(*normal).dot(x) > *offset,
            Mask::Complement { of } => !of.contains(x)?,
            Mask::Union { parts } => {
                for p in parts {
                    if p.contains(x)? {
                        return Ok(true);
                    }
                }
                false
            }
            Mask::Intersection { parts } => {
                for p in parts {
                    if !p.contains(x)? {
                        return Ok(false);
                    }
                }
                true
            }
            Mask::Image { base, surface, g } => {
                let t = TransformedSurface { base: surface.clone(), g: *g };
                base.contains(&t.solve(x)?.1)?
            }
        })
    }

    /// Whether the mask is the whole space (no window restriction needed).
    pub fn is_full(&self) -> bool {
        match self {
            Mask::Full => true,
            Mask::Image { base, .. } => base.is_full(),
            Mask::Union { parts } => parts.iter().any(|p| p.is_full()),
            Mask::Complement { of } => matches!(**of, Mask::Empty),
            _ => false,
        }
    }

    pub fn is_empty_set(&self) -> bool {
        match self {
            Mask::Empty => true,
            Mask::Image { base, .. } => base.is_empty_set(),
            Mask::Union { parts } => parts.iter().all(|p| p.is_empty_set()),
            Mask::Intersection { parts } => parts.iter().any(|p| p.is_empty_set()),
            Mask::Complement { of } => of.is_full(),
            _ => false,
        }
    }

    /// Axis-aligned bounding box, or `None` for unbounded masks.
    pub fn bounds(&self) -> Result<Option<Bounds>> {
        Ok(match self {
            Mask::Full | Mask::HalfSpace { .. } | Mask::Complement { .. } => None,
            Mask::Empty => Some(([0.0; 3], [0.0; 3])),
            Mask::Ball { center, radius } => Some((center.map(|c| c - radius), center.map(|c| c + radius))),
            Mask::Box { lo, hi } => Some((*lo, *hi)),
            Mask::Union { parts } => {
                let mut acc: Option<Bounds> = None;
                for p in parts.iter().filter(|p| !p.is_empty_set()) {
                    let Some(b) = p.bounds()? else { return Ok(None) };
                    acc = Some(match acc {
                        None => b,
                        Some(a) => (std::array::from_fn(|i| a.0[i].min(b.0[i])), std::array::from_fn(|i| a.1[i].max(b.1[i]))),
                    });
                }
                Some(acc.unwrap_or(([0.0; 3], [0.0; 3])))
            }
            Mask::Intersection { parts } => {
                let mut acc: Option<Bounds> = None;
                for p in parts {
                    if let Some(b) = p.bounds()? {
                        acc = Some(match acc {
                            None => b,
                            Some(a) => (std::array::from_fn(|i| a.0[i].max(b.0[i])), std::array::from_fn(|i| a.1[i].min(b.1[i]))),
                        });
                    }
                }
                acc
            }
            Mask::Image { base, surface, g } => match base.bounds()? {
                None => None,
                Some((lo, hi)) => Some(image_bounds(lo, hi, surface, g)?),
            },
        })
    }

    /// Fraction of each cell inside the mask, from k³ cell-centred
    /// subsamples per node.
    pub fn cell_weights(&self, window: &SpatialWindow, k: usize) -> Result<Vec<f64>> {
        if k == 0 {
            return Err(Error::InvalidParameter("need at least one subsample per axis".into()));
        }
        let offs: Vec<f64> = (0..k).map(|i| (i as f64 + 0.5) / k as f64 - 0.5).collect();
        let total = (k * k * k) as f64;
        let mut w = Vec::with_capacity(window.len());
        for idx in 0..window.len() {
            let c = window.node(idx);
            let mut inside = 0usize;
            for a in &offs {
                for b in &offs {
                    for d in &offs {
                        let x = c + Vec3::new(a * window.spacing[0], b * window.spacing[1], d * window.spacing[2]);
                        if self.contains(&x)? {
                            inside += 1;
                        }
                    }
                }
            }
            w.push(inside as f64 / total);
        }
        Ok(w)
    }

    pub fn id(&self) -> String {
        let v = |a: &[f64; 3]| format!("[{},{},{}]", a[0], a[1], a[2]);
        match self {
            Mask::Full => "full".into(),
            Mask::Empty => "empty".into(),
            Mask::Ball { center, radius } => format!("ball({},{radius})", v(center)),
            Mask::Box { lo, hi } => format!("box({},{})", v(lo), v(hi)),
            Mask::HalfSpace { normal, offset } => format!("half_space({},{offset})", v(normal)),
            Mask::Complement { of } => format!("complement({})", of.id()),
            Mask::Union { parts } => format!("union({})", parts.iter().map(|p| p.id()).collect::<Vec<_>>().join(",")),
            Mask::Intersection { parts } => format!("intersection({})", parts.iter().map(|p| p.id()).collect::<Vec<_>>().join(",")),
            Mask::Image { base, surface, .. } => format!("image({},{})", base.id(), surface.id()),
        }
    }
}

/// Bounding box of S(box) from forward images of face samples, padded by
/// 5% for the curvature of S between samples.
fn image_bounds(lo: [f64; 3], hi: [f64; 3], surface: &AchronalSurface, g: &PoincareElement) -> Result<Bounds> {
    const K: usize = 9;
    let mut out_lo = [f64::INFINITY; 3];
    let mut out_hi = [f64::NEG_INFINITY; 3];
    let lerp = |a: usize, s: usize| lo[a] + (hi[a] - lo[a]) * s as f64 / (K - 1) as f64;
    for fixed in 0..3 {
        for side in [0, K - 1] {
            for i in 0..K {
                for j in 0..K {
                    let mut x = Vec3::zeros();
                    let (a, b) = ((fixed + 1) % 3, (fixed + 2) % 3);
                    x[fixed] = lerp(fixed, side);
                    x[a] = lerp(a, i);
                    x[b] = lerp(b, j);
                    let y = g.act(&FourVector::from_parts(surface.tau(&x)?, &x)).spatial();
                    for c in 0..3 {
                        out_lo[c] = out_lo[c].min(y[c]);
                        out_hi[c] = out_hi[c].max(y[c]);
                    }
                }
            }
        }
    }
    for c in 0..3 {
        let pad = 0.05 * (out_hi[c] - out_lo[c]) + 1e-9;
        out_lo[c] -= pad;
        out_hi[c] += pad;
    }
    Ok((out_lo, out_hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::boost_z;

    #[test]
    fn half_spaces_partition_cells() {
        let w = SpatialWindow::centered([0.0; 3], 0.3, 8).unwrap();
        let a = Mask::half_space([0.3, -0.2, 1.0], 0.17).cell_weights(&w, 4).unwrap();
        let b = Mask::half_space([0.3, -0.2, 1.0], 0.17).complement().cell_weights(&w, 4).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x + y == 1.0));
        assert!(a.iter().any(|x| *x > 0.0 && *x < 1.0));
    }

    #[test]
    fn ball_volume_from_weights() {
        let w = SpatialWindow::centered([0.0; 3], 2.0 / 32.0, 32).unwrap();
        let vol: f64 = Mask::ball([0.0; 3], 1.0).cell_weights(&w, 4).unwrap().iter().sum::<f64>() * w.cell_volume();
        let exact = 4.0 / 3.0 * std::f64::consts::PI;
        assert!((vol - exact).abs() / exact < 2e-3, "{vol}");
    }

    #[test]
    fn boosted_ball_image_is_an_ellipsoid() {
        let rho = 0.4;
        let g = PoincareElement::lorentz(boost_z(rho));
        let m = Mask::ball([0.0; 3], 1.0).image(&AchronalSurface::flat(0.0), &g);
        assert!(m.contains(&Vec3::new(0.0, 0.0, 0.99 * rho.cosh())).unwrap());
        assert!(!m.contains(&Vec3::new(0.0, 0.0, 1.01 * rho.cosh())).unwrap());
        let (lo, hi) = m.bounds().unwrap().unwrap();
        assert!(hi[2] >= rho.cosh() && lo[2] <= -rho.cosh());
        assert!(hi[0] >= 1.0 && hi[0] < 1.2);
    }

    #[test]
    fn serde_round_trip() {
        let m = Mask::Union { parts: vec![Mask::ball([1.0, 0.0, 0.0], 0.5), Mask::half_space([0.0, 0.0, 1.0], 2.0).complement()] };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<Mask>(&s).unwrap(), m);
    }
}
