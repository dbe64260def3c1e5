//! Causal logic of Minkowski space: achronal separateness, causal
//! complements, determinacy sets and the well-definedness of localizations
//! on causally complete sets.
//!
//! Closed forms decide wherever the geometry allows; sampling only certifies
//! general graph patches and reports its resolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localization::{LocalizationResult, Localizer, Mask, Region};
use crate::minkowski::{FourVector, Vec3};
use crate::surfaces::{fibonacci_sphere, AchronalSurface};

/// x ⊥ y ⇔ x ≠ y and (x − y)² ≤ 0.
pub fn achronally_separated(x: &FourVector, y: &FourVector) -> bool {
    x != y && (*x - *y).square() <= 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpacetimeRegion {
    /// {(t0, y) : |y − center| ≤ radius}.
    BallInPlane {
        t0: f64,
        center: [f64; 3],
        radius: f64,
    },
    /// The graph of a maximal surface over a mask.
    GraphPatch {
        surface: AchronalSurface,
        mask: Mask,
    },
    /// {(t, y) : |t − c₀| + |y − c| ≤ radius}.
    Diamond {
        center: FourVector,
        radius: f64,
    },
    Point {
        x: FourVector,
    },
    Union {
        parts: Vec<SpacetimeRegion>,
    },
    Intersection {
        parts: Vec<SpacetimeRegion>,
    },
}

impl SpacetimeRegion {
    pub fn contains(&self, x: &FourVector) -> Result<bool> {
        Ok(match self {
            SpacetimeRegion::BallInPlane { t0, center, radius } => x.t == *t0 && (x.spatial() - Vec3::from(*center)).norm() <= *radius,
            SpacetimeRegion::GraphPatch { surface, mask } => {
                let y = x.spatial();
                x.t == surface.tau(&y)? && mask.contains(&y)?
            }
            SpacetimeRegion::Diamond { center, radius } => (x.t - center.t).abs() + (x.spatial() - center.spatial()).norm() <= *radius,
            SpacetimeRegion::Point { x: p } => x == p,
            SpacetimeRegion::Union { parts } => {
                for p in parts {
                    if p.contains(x)? {
                        return Ok(true);
                    }
                }
                false
            }
            SpacetimeRegion::Intersection { parts } => {
                for p in parts {
                    if !p.contains(x)? {
                        return Ok(false);
                    }
                }
                true
            }
        })
    }

    /// The ball whose causal completion this region is, if it is one.
    fn as_ball(&self) -> Option<(f64, Vec3, f64)> {
        match self {
            SpacetimeRegion::BallInPlane { t0, center, radius } => Some((*t0, Vec3::from(*center), *radius)),
            SpacetimeRegion::Diamond { center, radius } => Some((center.t, center.spatial(), *radius)),
            SpacetimeRegion::GraphPatch { surface: AchronalSurface::Flat { t0 }, mask: Mask::Ball { center, radius } } => {
                Some((*t0, Vec3::from(*center), *radius))
            }
            _ => None,
        }
    }

    /// Signed distance-like function of the diamond spanned by a ball-like
    /// region: |t − t0| + |y − c| − r.
    pub fn diamond_excess(&self, x: &FourVector) -> Option<f64> {
        self.as_ball().map(|(t0, c, r)| (x.t - t0).abs() + (x.spatial() - c).norm() - r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Member,
    NonMember,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct Membership {
    pub verdict: Verdict,
    /// A point (for complements) or direction (for determinacy) refuting
    /// membership.
    pub witness: Option<FourVector>,
    /// Certified resolution of a sampled verdict; 0 for closed forms.
    pub margin: f64,
    pub samples: usize,
}

impl Membership {
    fn exact(member: bool) -> Self {
        Self { verdict: if member { Verdict::Member } else { Verdict::NonMember }, witness: None, margin: 0.0, samples: 0 }
    }

    pub fn is_member(&self) -> bool {
        self.verdict == Verdict::Member
    }
}

/// Grid resolution for sampled complements of graph patches.
#[derive(Debug, Clone, Copy)]
pub struct SamplerOptions {
    pub nodes_per_axis: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self { nodes_per_axis: 24 }
    }
}

fn ball_complement(t0: f64, c: &Vec3, r: f64, x: &FourVector) -> bool {
    let d = (x.spatial() - c).norm();
    d > r && (x.t - t0).abs() <= d - r
}

/// x ∈ M^⊥.
pub fn causal_complement_member(m: &SpacetimeRegion, x: &FourVector, sampler: &SamplerOptions) -> Result<Membership> {
    if let Some((t0, c, r)) = m.as_ball() {
        return Ok(Membership::exact(ball_complement(t0, &c, r, x)));
    }
    match m {
        SpacetimeRegion::Point { x: p } => Ok(Membership::exact(achronally_separated(x, p))),
        SpacetimeRegion::Union { parts } => {
            let mut samples = 0;
            let mut margin = 0.0f64;
            let mut inconclusive = false;
            for p in parts {
                let r = causal_complement_member(p, x, sampler)?;
                samples += r.samples;
                margin = margin.max(r.margin);
                match r.verdict {
                    Verdict::NonMember => return Ok(Membership { samples, margin, ..r }),
                    Verdict::Inconclusive => inconclusive = true,
                    Verdict::Member => {}
                }
            }
            let verdict = if inconclusive { Verdict::Inconclusive } else { Verdict::Member };
            Ok(Membership { verdict, witness: None, margin, samples })
        }
        SpacetimeRegion::GraphPatch { surface, mask } => patch_complement(surface, mask, x, sampler),
        _ => Err(Error::UnsupportedGeometry("causal complement of this region form".into())),
    }
}

/// Samples the patch on a grid over the mask's bounding box. The function
/// y ↦ |x − y| − |x₀ − τ(y)| is 2-Lipschitz, so a minimum margin above twice
/// the covering radius certifies membership.
fn patch_complement(surface: &AchronalSurface, mask: &Mask, x: &FourVector, sampler: &SamplerOptions) -> Result<Membership> {
    let Some((lo, hi)) = mask.bounds()? else {
        return Err(Error::UnsupportedGeometry("sampled complements need a bounded mask".into()));
    };
    let k = sampler.nodes_per_axis.max(2);
    let step: [f64; 3] = std::array::from_fn(|a| (hi[a] - lo[a]) / (k - 1) as f64);
    let cover = 0.5 * (step[0] * step[0] + step[1] * step[1] + step[2] * step[2]).sqrt();
    let xs = x.spatial();
    let mut min_margin = f64::INFINITY;
    let mut samples = 0;
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                let y = Vec3::new(lo[0] + i as f64 * step[0], lo[1] + j as f64 * step[1], lo[2] + l as f64 * step[2]);
                if !mask.contains(&y)? {
                    continue;
                }
                samples += 1;
                let p = FourVector::from_parts(surface.tau(&y)?, &y);
                if !achronally_separated(x, &p) {
                    return Ok(Membership { verdict: Verdict::NonMember, witness: Some(p), margin: cover, samples });
                }
                min_margin = min_margin.min((xs - y).norm() - (x.t - p.t).abs());
            }
        }
    }
    let verdict = if min_margin > 2.0 * cover { Verdict::Member } else { Verdict::Inconclusive };
    Ok(Membership { verdict, witness: None, margin: 2.0 * cover, samples })
}

/// x ∈ (M^⊥)^⊥, from the definition: x ∉ M^⊥ and no z ∈ M^⊥ is causally
/// connected to x. For a ball the supremum of |x₀ − z₀| − |x − z| over the
/// complement is |x₀ − t₀| + |x − c| − r, approached along z − c ∥ x − c.
pub fn double_complement_member(m: &SpacetimeRegion, x: &FourVector) -> Result<Membership> {
    if let Some((t0, c, r)) = m.as_ball() {
        if ball_complement(t0, &c, r, x) {
            return Ok(Membership::exact(false));
        }
        let sup = (x.t - t0).abs() + (x.spatial() - c).norm() - r;
        return Ok(Membership::exact(sup <= 0.0));
    }
    match m {
        SpacetimeRegion::Point { x: p } => Ok(Membership::exact(x == p)),
        _ => Err(Error::UnsupportedGeometry("double complement of this region form".into())),
    }
}

/// Speeds |e| and direction counts of the escalating line search.
const LEVELS: [(f64, usize); 7] =
    [(0.5, 64), (0.9, 256), (0.99, 1024), (0.999, 4096), (1.0 - 1e-4, 16384), (1.0 - 1e-6, 16384), (1.0 - 1e-8, 16384)];

/// Parameter λ at which x + λ(1, e) meets the graph of τ.
fn line_hit(surface: &AchronalSurface, x: &FourVector, e: &Vec3) -> Result<f64> {
    let xs = x.spatial();
    let f = |l: f64| -> Result<(f64, f64)> {
        let y = xs + e * l;
        Ok((x.t + l - surface.tau(&y)?, 1.0 - surface.gradient(&y)?.dot(e)))
    };
    let lip = surface.lipschitz().min(1.0) * e.norm();
    let (f0, _) = f(0.0)?;
    if f0 == 0.0 {
        return Ok(0.0);
    }
    let (a, b) = (-f0 / (1.0 - lip).max(1e-300), -f0 / (1.0 + lip));
    let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
    let mut l = 0.5 * (lo + hi);
    let scale = 1.0 + x.t.abs() + xs.norm() + hi.abs().max(lo.abs());
    for _ in 0..200 {
        let (v, d) = f(l)?;
        if v.abs() <= 1e-13 * scale {
            return Ok(l);
        }
        if v > 0.0 {
            hi = l;
        } else {
            lo = l;
        }
        let mut next = l - v / d.max(1e-300);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - l).abs() <= 1e-15 * scale {
            return Ok(next);
        }
        l = next;
    }
    Ok(l)
}

/// Direction-sampled determinacy test for a graph patch: every sampled
/// timelike line through x must meet the patch. Directions escalate towards
/// the light cone; the margin bounds what the finest level can miss.
pub fn determinacy_member_sampled(surface: &AchronalSurface, mask: &Mask, x: &FourVector) -> Result<Membership> {
    if !surface.is_maximal() {
        return Err(Error::InvalidParameter("determinacy needs a maximal base surface".into()));
    }
    let mut samples = 0;
    let mut reach = 0.0f64;
    for (speed, count) in LEVELS {
        for u in fibonacci_sphere(count) {
            let e = u * speed;
            let l = line_hit(surface, x, &e)?;
            reach = reach.max(l.abs());
            samples += 1;
            let y = x.spatial() + e * l;
            if !mask.contains(&y)? {
                return Ok(Membership {
                    verdict: Verdict::NonMember,
                    witness: Some(FourVector::from_parts(1.0, &e)),
                    margin: 0.0,
                    samples,
                });
            }
        }
    }
    let (speed, count) = LEVELS[LEVELS.len() - 1];
    let gap2 = 4.0 * std::f64::consts::PI / count as f64;
    let margin = reach * ((1.0 - speed) + gap2);
    Ok(Membership { verdict: Verdict::Member, witness: None, margin, samples })
}

/// x ∈ Δ~: closed form for balls in a plane, sampled for graph patches.
pub fn determinacy_member(delta: &SpacetimeRegion, x: &FourVector) -> Result<Membership> {
    match delta {
        SpacetimeRegion::BallInPlane { t0, center, radius } => {
            Ok(Membership::exact((x.t - t0).abs() + (x.spatial() - Vec3::from(*center)).norm() <= *radius))
        }
        SpacetimeRegion::Point { x: p } => Ok(Membership::exact(x == p)),
        SpacetimeRegion::GraphPatch { surface, mask } => determinacy_member_sampled(surface, mask, x),
        _ => Err(Error::UnsupportedGeometry("determinacy set of this region form".into())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LogicReport {
    pub samples: usize,
    /// Samples within the excluded shell around the diamond boundary.
    pub excluded: usize,
    pub agreements: usize,
    pub agreement_ratio: f64,
    pub counterexamples: Vec<FourVector>,
}

/// One uniform sample per cell of a 4-D grid over `[lo, hi]`.
pub fn stratified_samples(lo: FourVector, hi: FourVector, n: usize, seed: u64) -> Vec<FourVector> {
    let per = ((n as f64).powf(0.25).ceil() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per.pow(4));
    let lo_v = [lo.t, lo.x[0], lo.x[1], lo.x[2]];
    let hi_v = [hi.t, hi.x[0], hi.x[1], hi.x[2]];
    for cell in 0..per.pow(4) {
        let mut c = cell;
        let mut v = [0.0; 4];
        for a in 0..4 {
            let k = c % per;
            c /= per;
            let u: f64 = rng.random();
            v[a] = lo_v[a] + (hi_v[a] - lo_v[a]) * (k as f64 + u) / per as f64;
        }
        out.push(FourVector::new(v[0], v[1], v[2], v[3]));
    }
    out.truncate(n);
    out
}

/// Compares the sampled determinacy set of Δ with its double causal
/// complement; points within `shell` of the diamond boundary are excluded.
/// Counterexamples are re-verified before being reported.
pub fn completion_equals_determinacy_check(delta: &SpacetimeRegion, samples: &[FourVector], shell: f64) -> Result<LogicReport> {
    let mut excluded = 0;
    let mut agreements = 0;
    let mut counterexamples = Vec::new();
    for x in samples {
        if let Some(ex) = delta.diamond_excess(x) {
            if ex.abs() < shell {
                excluded += 1;
                continue;
            }
        }
        let a = determinacy_member(delta, x)?;
        let b = double_complement_member(delta, x)?;
        if a.verdict == b.verdict {
            agreements += 1;
        } else {
            let a2 = determinacy_member(delta, x)?;
            let b2 = double_complement_member(delta, x)?;
            if a2.verdict != b2.verdict {
                counterexamples.push(*x);
            } else {
                agreements += 1;
            }
        }
    }
    let considered = samples.len() - excluded;
    Ok(LogicReport {
        samples: samples.len(),
        excluded,
        agreements,
        agreement_ratio: if considered > 0 { agreements as f64 / considered as f64 } else { 1.0 },
        counterexamples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RclReport {
    pub p1: LocalizationResult,
    pub p2: LocalizationResult,
    pub determinacy: LogicReport,
    /// |p₁ − p₂| / ‖φ‖².
    pub relative_difference: f64,
}

/// Probabilities of two patches that must share a determinacy set. The
/// shared set is checked first on samples of the diamond's bounding box;
/// mismatches outside the shell raise `DeterminacyMismatch`.
pub fn rcl_well_defined_check(
    localizer: &Localizer,
    delta1: &Region,
    delta2: &Region,
    samples: &[FourVector],
    shell: f64,
) -> Result<RclReport> {
    let r1 = SpacetimeRegion::GraphPatch { surface: delta1.surface.clone(), mask: delta1.mask.clone() };
    let r2 = SpacetimeRegion::GraphPatch { surface: delta2.surface.clone(), mask: delta2.mask.clone() };
    let mut excluded = 0;
    let mut agreements = 0;
    let mut counterexamples = Vec::new();
    for x in samples {
        let near = [&r1, &r2].iter().filter_map(|r| r.diamond_excess(x)).any(|e| e.abs() < shell);
        if near {
            excluded += 1;
            continue;
        }
        let a = determinacy_member(&r1, x)?;
        let b = determinacy_member(&r2, x)?;
        let undecided = |m: &Membership| m.verdict == Verdict::Member && m.margin >= shell;
        if a.verdict == b.verdict {
            agreements += 1;
        } else if undecided(&a) || undecided(&b) {
            excluded += 1;
        } else {
            counterexamples.push(*x);
        }
    }
    let considered = samples.len() - excluded;
    let determinacy = LogicReport {
        samples: samples.len(),
        excluded,
        agreements,
        agreement_ratio: if considered > 0 { agreements as f64 / considered as f64 } else { 1.0 },
        counterexamples,
    };
    if !determinacy.counterexamples.is_empty() {
        return Err(Error::DeterminacyMismatch(format!(
            "{} sampled points separate the determinacy sets, first {:?}",
            determinacy.counterexamples.len(),
            determinacy.counterexamples[0]
        )));
    }
    let p1 = localizer.probability(delta1)?;
    let p2 = localizer.probability(delta2)?;
    let relative_difference = (p1.probability - p2.probability).abs() / localizer.norm_squared();
    Ok(RclReport { p1, p2, determinacy, relative_difference })
}

/// The patch τ(x) = γ(r − |x − c|) over the ball |x − c| ≤ r, which spans
/// the same diamond as the flat ball.
pub fn cone_patch(center: [f64; 3], radius: f64, gamma: f64) -> Region {
    Region::new(AchronalSurface::Cone { gamma: -gamma, apex: center, offset: gamma * radius }, Mask::Ball { center, radius })
}

/// Uniform random points in a box, for sampling tests.
pub fn random_points(lo: FourVector, hi: FourVector, n: usize, seed: u64) -> Vec<FourVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            FourVector::new(
                rng.random_range(lo.t..hi.t),
                rng.random_range(lo.x[0]..hi.x[0]),
                rng.random_range(lo.x[1]..hi.x[1]),
                rng.random_range(lo.x[2]..hi.x[2]),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separation_examples() {
        let o = FourVector::ZERO;
        assert!(!achronally_separated(&o, &o));
        assert!(achronally_separated(&FourVector::new(0.0, 1.0, 0.0, 0.0), &o));
        assert!(achronally_separated(&FourVector::new(1.0, 1.0, 0.0, 0.0), &o));
        assert!(!achronally_separated(&FourVector::new(1.0, 0.5, 0.0, 0.0), &o));
    }

    #[test]
    fn ball_complement_examples() {
        let m = SpacetimeRegion::BallInPlane { t0: 0.0, center: [0.0; 3], radius: 1.0 };
        let s = SamplerOptions::default();
        assert!(causal_complement_member(&m, &FourVector::new(0.0, 3.0, 0.0, 0.0), &s).unwrap().is_member());
        assert!(!causal_complement_member(&m, &FourVector::new(2.0, 1.5, 0.0, 0.0), &s).unwrap().is_member());
    }

    #[test]
    fn sampled_complement_agrees_with_closed_form() {
        let closed = SpacetimeRegion::BallInPlane { t0: 0.0, center: [0.0; 3], radius: 1.0 };
        let patch = SpacetimeRegion::GraphPatch { surface: AchronalSurface::flat(0.0), mask: Mask::ball([0.0; 3], 1.0) };
        let s = SamplerOptions { nodes_per_axis: 33 };
        for x in [FourVector::new(0.5, 2.0, 0.0, 0.0), FourVector::new(1.5, 2.0, 0.3, 0.0), FourVector::new(-0.2, 0.0, 3.0, 0.0)] {
            let a = causal_complement_member(&closed, &x, &s).unwrap();
            let b = causal_complement_member(&patch, &x, &s).unwrap();
            assert!(b.verdict == Verdict::Inconclusive || a.verdict == b.verdict, "{x:?}");
        }
        let far = FourVector::new(0.0, 5.0, 0.0, 0.0);
        assert!(causal_complement_member(&patch, &far, &s).unwrap().is_member());
    }

    #[test]
    fn determinacy_of_flat_ball() {
        let patch = SpacetimeRegion::GraphPatch { surface: AchronalSurface::flat(0.0), mask: Mask::ball([0.0; 3], 1.0) };
        assert!(determinacy_member(&patch, &FourVector::new(0.4, 0.0, 0.5, 0.0)).unwrap().is_member());
        let out = determinacy_member(&patch, &FourVector::new(0.6, 0.0, 0.5, 0.0)).unwrap();
        assert_eq!(out.verdict, Verdict::NonMember);
        assert!(out.witness.is_some());
        let full = SpacetimeRegion::GraphPatch { surface: AchronalSurface::flat(0.0), mask: Mask::Full };
        assert!(determinacy_member(&full, &FourVector::new(7.0, -3.0, 2.0, 1.0)).unwrap().is_member());
    }

    #[test]
    fn point_and_diamond_completions() {
        let p = FourVector::new(0.3, 0.1, 0.0, -0.2);
        let m = SpacetimeRegion::Point { x: p };
        assert!(double_complement_member(&m, &p).unwrap().is_member());
        assert!(!double_complement_member(&m, &FourVector::new(0.3, 0.1, 0.0, -0.1)).unwrap().is_member());
        let d = SpacetimeRegion::Diamond { center: FourVector::ZERO, radius: 1.0 };
        for x in random_points(FourVector::new(-1.5, -1.5, -1.5, -1.5), FourVector::new(1.5, 1.5, 1.5, 1.5), 500, 3) {
            assert_eq!(d.contains(&x).unwrap(), double_complement_member(&d, &x).unwrap().is_member());
        }
    }

    #[test]
    fn cone_patch_spans_the_same_diamond() {
        let cone = cone_patch([0.0; 3], 1.0, 0.5);
        let patch = SpacetimeRegion::GraphPatch { surface: cone.surface, mask: cone.mask };
        let ball = SpacetimeRegion::BallInPlane { t0: 0.0, center: [0.0; 3], radius: 1.0 };
        for x in random_points(FourVector::new(-1.2, -1.2, -1.2, -1.2), FourVector::new(1.2, 1.2, 1.2, 1.2), 60, 9) {
            let ex = ball.diamond_excess(&x).unwrap();
            if ex.abs() < 1e-3 {
                continue;
            }
            assert_eq!(determinacy_member(&patch, &x).unwrap().is_member(), ex <= 0.0, "{x:?}");
        }
    }
}
