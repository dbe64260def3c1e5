//! Separable partial Fourier sums from a momentum box to an arbitrary
//! rectilinear spatial window, one real matrix product per axis and part.

use crate::window::SpatialWindow;

/// Row-major complex matrix stored as separate real and imaginary parts.
#[derive(Debug, Clone)]
pub struct SplitMatrix {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl SplitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, re: vec![0.0; rows * cols], im: vec![0.0; rows * cols] }
    }
}

/// C = A·B with A (m×k, strides rsa/csa), B (k×n row-major) and C (m×n,
/// strides rsc/csc); complex arithmetic on split parts.
#[allow(clippy::too_many_arguments)]
pub fn complex_gemm(
    m: usize,
    k: usize,
    n: usize,
    a: (&[f64], &[f64]),
    rsa: isize,
    csa: isize,
    b: (&[f64], &[f64]),
    c: (&mut [f64], &mut [f64]),
    rsc: isize,
    csc: isize,
) {
    if m == 0 || n == 0 {
        return;
    }
    let (are, aim) = a;
    let (bre, bim) = b;
    let (cre, cim) = c;
    let nn = n as isize;
    // SAFETY: callers size every buffer for the given dimensions and strides;
    // the assertions below guard the extents that are touched.
    let max_a = (m as isize - 1) * rsa + (k as isize - 1) * csa;
    let max_c = (m as isize - 1) * rsc + (n as isize - 1) * csc;
    assert!(k == 0 || (max_a as usize) < are.len() && are.len() == aim.len());
    assert!(bre.len() >= k * n && bim.len() >= k * n);
    assert!((max_c as usize) < cre.len() && cre.len() == cim.len());
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, are.as_ptr(), rsa, csa, bre.as_ptr(), nn, 1, 0.0, cre.as_mut_ptr(), rsc, csc);
        matrixmultiply::dgemm(m, k, n, -1.0, aim.as_ptr(), rsa, csa, bim.as_ptr(), nn, 1, 1.0, cre.as_mut_ptr(), rsc, csc);
        matrixmultiply::dgemm(m, k, n, 1.0, are.as_ptr(), rsa, csa, bim.as_ptr(), nn, 1, 0.0, cim.as_mut_ptr(), rsc, csc);
        matrixmultiply::dgemm(m, k, n, 1.0, aim.as_ptr(), rsa, csa, bre.as_ptr(), nn, 1, 1.0, cim.as_mut_ptr(), rsc, csc);
    }
}

/// F(x) = Σ_j c_j exp(i Σ_a p_a(j_a) x_a) over a box of momenta, evaluated
/// on every node of a window.
#[derive(Debug, Clone)]
pub struct SeparableTransform {
    box_n: [usize; 3],
    win_n: [usize; 3],
    /// Per axis: (box_n × win_n) matrix of exp(i p x).
    mats: [SplitMatrix; 3],
}

impl SeparableTransform {
    pub fn new(box_coords: [&[f64]; 3], window: &SpatialWindow) -> Self {
        let mats = std::array::from_fn(|a| {
            let xs = window.axis_coords(a);
            let ps = box_coords[a];
            let mut m = SplitMatrix::zeros(ps.len(), xs.len());
            for (j, p) in ps.iter().enumerate() {
                for (i, x) in xs.iter().enumerate() {
                    let (s, c) = (p * x).sin_cos();
                    m.re[j * xs.len() + i] = c;
                    m.im[j * xs.len() + i] = s;
                }
            }
            m
        });
        Self { box_n: std::array::from_fn(|a| box_coords[a].len()), win_n: window.n, mats }
    }

    pub fn box_len(&self) -> usize {
        self.box_n.iter().product()
    }

    pub fn window_len(&self) -> usize {
        self.win_n.iter().product()
    }

    /// Transforms `fields` boxes laid out as (f, i1, i2, i3). The result is
    /// laid out as (w1, w2, w3, f), i.e. all fields of one node contiguous.
    pub fn apply(&self, fields: usize, input: &SplitMatrix) -> SplitMatrix {
        let [b1, b2, b3] = self.box_n;
        let [_, w2, w3] = self.win_n;
        assert_eq!(input.re.len(), fields * b1 * b2 * b3);
        let stage = |x: &SplitMatrix, rows: usize, kin: usize, m: &SplitMatrix| -> SplitMatrix {
            let nout = m.cols;
            let mut out = SplitMatrix::zeros(nout, rows);
            complex_gemm(rows, kin, nout, (&x.re, &x.im), kin as isize, 1, (&m.re, &m.im), (&mut out.re, &mut out.im), 1, rows as isize);
            out
        };
        // (f,b1,b2,b3) -> (w3,f,b1,b2) -> (w2,w3,f,b1) -> (w1,w2,w3,f)
        let s1 = stage(input, fields * b1 * b2, b3, &self.mats[2]);
        let s2 = stage(&s1, w3 * fields * b1, b2, &self.mats[1]);
        drop(s1);
        stage(&s2, w2 * w3 * fields, b1, &self.mats[0])
    }
}
