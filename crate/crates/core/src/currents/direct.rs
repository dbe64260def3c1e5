//! Direct quadrature of the double momentum sum, batched over points.
//!
//! For a batch of points the sum Σ_kp K^μ(k,p) conj(b_k(x)) b_p(x) is formed
//! as conj(b)ᵀ (K^μ b) with K^μ built in row blocks, so the kernel is
//! evaluated once per pair regardless of the batch size.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{CurrentFamily, NodeSet};
use crate::minkowski::FourVector;

const BLOCK: usize = 192;

/// Four kernel components for the pair (i, j) of nodes.
pub(crate) fn pair_kernel(family: &CurrentFamily, nodes: &NodeSet, i: usize, j: usize) -> [f64; 4] {
    let (pi, pj) = (&nodes.p[i], &nodes.p[j]);
    let (ei, ej) = (nodes.e[i], nodes.e[j]);
    let kp = ei * ej - pi.dot(pj);
    let inv = 1.0 / (2.0 * (ei * ej).sqrt());
    match family {
        CurrentFamily::Causal(k) => {
            let s = k.g.eval(kp) * inv;
            [(ei + ej) * s, (pi[0] + pj[0]) * s, (pi[1] + pj[1]) * s, (pi[2] + pj[2]) * s]
        }
        CurrentFamily::StressEnergy(t) => {
            let n = &t.n;
            let kn = ei * n.t - pi[0] * n.x[0] - pi[1] * n.x[1] - pi[2] * n.x[2];
            let pn = ej * n.t - pj[0] * n.x[0] - pj[1] * n.x[1] - pj[2] * n.x[2];
            let c = t.n_coefficient(kp);
            [
                (kn * ej + pn * ei + c * n.t) * inv,
                (kn * pj[0] + pn * pi[0] + c * n.x[0]) * inv,
                (kn * pj[1] + pn * pi[1] + c * n.x[1]) * inv,
                (kn * pj[2] + pn * pi[2] + c * n.x[2]) * inv,
            ]
        }
    }
}

/// Returns per point the real part of the four components and the largest
/// imaginary residue.
pub(crate) fn evaluate(family: &CurrentFamily, nodes: &NodeSet, points: &[FourVector]) -> Vec<([f64; 4], f64)> {
    let n = nodes.len();
    let np = points.len();
    if n == 0 || np == 0 {
        return vec![([0.0; 4], 0.0); np];
    }
    let c = nodes.quadrature_constant();
    // b (n × np), row-major, split parts.
    let mut bre = vec![0.0; n * np];
    let mut bim = vec![0.0; n * np];
    for k in 0..n {
        for (x, pt) in points.iter().enumerate() {
            let phase = nodes.p[k].dot(&pt.spatial()) - nodes.e[k] * pt.t;
            let b = nodes.coef[k] * Complex64::from_polar(c, phase);
            bre[k * np + x] = b.re;
            bim[k * np + x] = b.im;
        }
    }
    let blocks: Vec<usize> = (0..n).step_by(BLOCK).collect();
    let partials: Vec<Vec<[Complex64; 4]>> = blocks
        .par_iter()
        .map(|&k0| {
            let k1 = (k0 + BLOCK).min(n);
            let nb = k1 - k0;
            let mut kmat = vec![vec![0.0; nb * n]; 4];
            for i in 0..nb {
                for j in 0..n {
                    let v = pair_kernel(family, nodes, k0 + i, j);
                    for mu in 0..4 {
                        kmat[mu][i * n + j] = v[mu];
                    }
                }
            }
            let mut acc = vec![[Complex64::new(0.0, 0.0); 4]; np];
            let mut yre = vec![0.0; nb * np];
            let mut yim = vec![0.0; nb * np];
            for (mu, km) in kmat.iter().enumerate() {
                // SAFETY: km is nb×n, b is n×np, y is nb×np, all row-major.
                unsafe {
                    matrixmultiply::dgemm(
                        nb,
                        n,
                        np,
                        1.0,
                        km.as_ptr(),
                        n as isize,
                        1,
                        bre.as_ptr(),
                        np as isize,
                        1,
                        0.0,
                        yre.as_mut_ptr(),
                        np as isize,
                        1,
                    );
                    matrixmultiply::dgemm(
                        nb,
                        n,
                        np,
                        1.0,
                        km.as_ptr(),
                        n as isize,
                        1,
                        bim.as_ptr(),
                        np as isize,
                        1,
                        0.0,
                        yim.as_mut_ptr(),
                        np as isize,
                        1,
                    );
                }
                for i in 0..nb {
                    let k = k0 + i;
                    for x in 0..np {
                        let b = Complex64::new(bre[k * np + x], bim[k * np + x]);
                        let y = Complex64::new(yre[i * np + x], yim[i * np + x]);
                        acc[x][mu] += b.conj() * y;
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![[Complex64::new(0.0, 0.0); 4]; np];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            for mu in 0..4 {
                t[mu] += p[mu];
            }
        }
    }
    total
        .iter()
        .map(|s| {
            let re = [s[0].re, s[1].re, s[2].re, s[3].re];
            let im = s.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
            (re, im)
        })
        .collect()
}
