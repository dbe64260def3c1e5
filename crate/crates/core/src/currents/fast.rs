//! Separable evaluation of currents from groups of five single fields.
//!
//! Every group carries coefficients c(k) over the nodes; its fields are
//! F = Σ c(k) e^{−i(ε t − k·x)} and F^μ with an extra factor 𝔨^μ. The causal
//! current is Σ_s σ_s Re(conj(F_s^μ) F_s) over the rank-one terms of the
//! factorized profile; the stress-energy current is a fixed quadratic form in
//! the five fields of a single group.

use num_complex::Complex64;

use super::transform::{complex_gemm, SeparableTransform, SplitMatrix};
use super::NodeSet;
use crate::kernels::{TensorKernel, TensorVariant};
use crate::minkowski::FourVector;
use crate::window::SpatialWindow;

/// Ranks processed per transform batch.
const CHUNK: usize = 24;

#[derive(Debug, Clone)]
pub(crate) enum Combine {
    /// J^μ = Σ_s σ_s Re(conj(F_s^μ) F_s).
    Causal { signs: Vec<f64> },
    /// J^μ = Re[conj(U^μ)(n·U)] + ½ n^μ (α m²|U|² + β⟨U,U⟩).
    StressEnergy { n: FourVector, alpha: f64, beta: f64, m2: f64 },
}

impl Combine {
    pub(crate) fn stress_energy(kern: &TensorKernel) -> Self {
        let (alpha, beta) = match kern.variant {
            TensorVariant::StressEnergyStandard => (1.0, -1.0),
            TensorVariant::AsPrinted => (-1.0, -1.0),
        };
        Combine::StressEnergy { n: kern.n, alpha, beta, m2: kern.mass * kern.mass }
    }
}

/// Group coefficients, group-major: coef[g * n + k].
#[derive(Debug, Clone)]
pub(crate) struct FieldGroups {
    pub groups: usize,
    pub coef: Vec<Complex64>,
    pub combine: Combine,
}

fn accumulate(combine: &Combine, group_offset: usize, fields: &[Complex64], out: &mut [f64; 4]) {
    match combine {
        Combine::Causal { signs } => {
            for (s, f) in fields.chunks_exact(5).enumerate() {
                let sigma = signs[group_offset + s];
                let b = f[0];
                for mu in 0..4 {
                    out[mu] += sigma * (f[1 + mu].conj() * b).re;
                }
            }
        }
        Combine::StressEnergy { n, alpha, beta, m2 } => {
            let u = fields[0];
            let um = [fields[1], fields[2], fields[3], fields[4]];
            let nu = um[0] * n.t - um[1] * n.x[0] - um[2] * n.x[1] - um[3] * n.x[2];
            let mink = um[0].norm_sqr() - um[1].norm_sqr() - um[2].norm_sqr() - um[3].norm_sqr();
            let scalar = 0.5 * (alpha * m2 * u.norm_sqr() + beta * mink);
            for mu in 0..4 {
                out[mu] += (um[mu].conj() * nu).re + n.component(mu) * scalar;
            }
        }
    }
}

fn weight(nodes: &NodeSet, k: usize, comp: usize) -> f64 {
    match comp {
        0 => 1.0,
        1 => nodes.e[k],
        c => nodes.p[k][c - 2],
    }
}

/// Current on every node of `window` at time t.
pub(crate) fn slice(nodes: &NodeSet, groups: &FieldGroups, t: f64, window: &SpatialWindow) -> Vec<[f64; 4]> {
    let mut out = vec![[0.0; 4]; window.len()];
    let n = nodes.len();
    if n == 0 || groups.groups == 0 {
        return out;
    }
    let grid = &nodes.grid;
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let coords: Vec<[usize; 3]> = nodes.idx.iter().map(|&i| grid.unravel(i)).collect();
    for c in &coords {
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let bn: [usize; 3] = std::array::from_fn(|a| hi[a] - lo[a] + 1);
    let axis: [Vec<f64>; 3] = std::array::from_fn(|a| (lo[a]..=hi[a]).map(|j| grid.coord(j)).collect());
    let tr = SeparableTransform::new([&axis[0], &axis[1], &axis[2]], window);
    let blen = tr.box_len();
    let slot: Vec<usize> = coords.iter().map(|c| ((c[0] - lo[0]) * bn[1] + (c[1] - lo[1])) * bn[2] + (c[2] - lo[2])).collect();
    let phase: Vec<Complex64> = nodes.e.iter().map(|e| Complex64::from_polar(1.0, -e * t)).collect();

    let chunk = match groups.combine {
        Combine::Causal { .. } => CHUNK,
        Combine::StressEnergy { .. } => 1,
    };
    let mut g0 = 0;
    while g0 < groups.groups {
        let g1 = (g0 + chunk).min(groups.groups);
        let nf = 5 * (g1 - g0);
        let mut input = SplitMatrix::zeros(1, nf * blen);
        for g in g0..g1 {
            for k in 0..n {
                let c = groups.coef[g * n + k] * phase[k];
                if c == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for comp in 0..5 {
                    let f = 5 * (g - g0) + comp;
                    let v = c * weight(nodes, k, comp);
                    input.re[f * blen + slot[k]] = v.re;
                    input.im[f * blen + slot[k]] = v.im;
                }
            }
        }
        let fields = tr.apply(nf, &input);
        drop(input);
        let mut buf = vec![Complex64::new(0.0, 0.0); nf];
        for (node, o) in out.iter_mut().enumerate() {
            for (f, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(fields.re[node * nf + f], fields.im[node * nf + f]);
            }
            accumulate(&groups.combine, g0, &buf, o);
        }
        g0 = g1;
    }
    out
}

/// Current at arbitrary points via explicit phase matrices.
pub(crate) fn points(nodes: &NodeSet, groups: &FieldGroups, pts: &[FourVector]) -> Vec<[f64; 4]> {
    let np = pts.len();
    let mut out = vec![[0.0; 4]; np];
    let n = nodes.len();
    if n == 0 || groups.groups == 0 || np == 0 {
        return out;
    }
    // E (np × n), row-major.
    let mut ere = vec![0.0; np * n];
    let mut eim = vec![0.0; np * n];
    for (x, pt) in pts.iter().enumerate() {
        let xs = pt.spatial();
        for k in 0..n {
            let (s, c) = (nodes.p[k].dot(&xs) - nodes.e[k] * pt.t).sin_cos();
            ere[x * n + k] = c;
            eim[x * n + k] = s;
        }
    }
    let chunk = match groups.combine {
        Combine::Causal { .. } => 4 * CHUNK,
        Combine::StressEnergy { .. } => 1,
    };
    let mut g0 = 0;
    while g0 < groups.groups {
        let g1 = (g0 + chunk).min(groups.groups);
        let nf = 5 * (g1 - g0);
        // C (n × nf), row-major.
        let mut cre = vec![0.0; n * nf];
        let mut cim = vec![0.0; n * nf];
        for g in g0..g1 {
            for k in 0..n {
                let c = groups.coef[g * n + k];
                for comp in 0..5 {
                    let v = c * weight(nodes, k, comp);
                    let f = 5 * (g - g0) + comp;
                    cre[k * nf + f] = v.re;
                    cim[k * nf + f] = v.im;
                }
            }
        }
        let mut fre = vec![0.0; np * nf];
        let mut fim = vec![0.0; np * nf];
        complex_gemm(np, n, nf, (&ere, &eim), n as isize, 1, (&cre, &cim), (&mut fre, &mut fim), nf as isize, 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); nf];
        for (x, o) in out.iter_mut().enumerate() {
            for (f, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(fre[x * nf + f], fim[x * nf + f]);
            }
            accumulate(&groups.combine, g0, &buf, o);
        }
        g0 = g1;
    }
    out
}
