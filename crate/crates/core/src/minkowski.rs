//! Minkowski space with signature (+,-,-,-), proper orthochronous Lorentz
//! transforms and Poincaré group elements acting on spacetime points.

use std::ops::{Add, Neg, Sub};

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Tolerance used when validating generic matrices as Lorentz transforms.
pub const LORENTZ_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourVector {
    pub t: f64,
    pub x: [f64; 3],
}

impl FourVector {
    pub const ZERO: FourVector = FourVector { t: 0.0, x: [0.0; 3] };

    pub fn new(t: f64, x1: f64, x2: f64, x3: f64) -> Self {
        Self { t, x: [x1, x2, x3] }
    }

    pub fn from_parts(t: f64, x: &Vec3) -> Self {
        Self { t, x: [x[0], x[1], x[2]] }
    }

    /// On-shell momentum (ε(p), p).
    pub fn on_shell(p: &Vec3, mass: f64) -> Self {
        Self::from_parts(energy(p, mass), p)
    }

    pub fn spatial(&self) -> Vec3 {
        Vec3::new(self.x[0], self.x[1], self.x[2])
    }

    pub fn to_vector4(&self) -> Vector4<f64> {
        Vector4::new(self.t, self.x[0], self.x[1], self.x[2])
    }

    pub fn from_vector4(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn component(&self, mu: usize) -> f64 {
        if mu == 0 {
            self.t
        } else {
            self.x[mu - 1]
        }
    }

    pub fn dot(&self, other: &FourVector) -> f64 {
        minkowski_product(self, other)
    }

    pub fn square(&self) -> f64 {
        minkowski_product(self, self)
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|c| c.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(s * self.t, s * self.x[0], s * self.x[1], s * self.x[2])
    }
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, o: FourVector) -> FourVector {
        FourVector::new(self.t + o.t, self.x[0] + o.x[0], self.x[1] + o.x[1], self.x[2] + o.x[2])
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, o: FourVector) -> FourVector {
        FourVector::new(self.t - o.t, self.x[0] - o.x[0], self.x[1] - o.x[1], self.x[2] - o.x[2])
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        self.scale(-1.0)
    }
}

/// Relativistic energy ε(p) = sqrt(m² + |p|²).
pub fn energy(p: &Vec3, mass: f64) -> f64 {
    (mass * mass + p.norm_squared()).sqrt()
}

pub fn minkowski_product(a: &FourVector, b: &FourVector) -> f64 {
    a.t * b.t - a.x[0] * b.x[0] - a.x[1] * b.x[1] - a.x[2] * b.x[2]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalKind {
    Timelike,
    Lightlike,
    Spacelike,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: CausalKind,
    /// Timelike or lightlike.
    pub causal: bool,
    pub future_directed: bool,
}

/// Causal character of a vector. The light cone is resolved with a relative
/// tolerance so that transformed lightlike vectors keep their class.
pub fn classify(z: &FourVector) -> Classification {
    let s2 = z.x[0] * z.x[0] + z.x[1] * z.x[1] + z.x[2] * z.x[2];
    let t2 = z.t * z.t;
    let scale = t2 + s2;
    let kind = if scale == 0.0 {
        CausalKind::Zero
    } else if (t2 - s2).abs() <= 1e-12 * scale {
        CausalKind::Lightlike
    } else if t2 > s2 {
        CausalKind::Timelike
    } else {
        CausalKind::Spacelike
    };
    let causal = matches!(kind, CausalKind::Timelike | CausalKind::Lightlike);
    Classification { kind, causal, future_directed: causal && z.t > 0.0 }
}

fn eta() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, -1.0, -1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzTransform {
    matrix: Matrix4<f64>,
}

impl LorentzTransform {
    pub fn identity() -> Self {
        Self { matrix: Matrix4::identity() }
    }

    /// Boost along x3: Λ00 = Λ33 = cosh ρ, Λ03 = Λ30 = sinh ρ.
    pub fn boost_z(rho: f64) -> Self {
        let (c, s) = (rho.cosh(), rho.sinh());
        let mut m = Matrix4::identity();
        m[(0, 0)] = c;
        m[(3, 3)] = c;
        m[(0, 3)] = s;
        m[(3, 0)] = s;
        Self { matrix: m }
    }

    /// Pure boost with rapidity `rho` along the unit vector `dir`.
    pub fn boost(dir: &Vec3, rho: f64) -> Result<Self> {
        check_unit(dir)?;
        let n = dir / dir.norm();
        let (c, s) = (rho.cosh(), rho.sinh());
        let mut m = Matrix4::identity();
        m[(0, 0)] = c;
        for i in 0..3 {
            m[(0, i + 1)] = s * n[i];
            m[(i + 1, 0)] = s * n[i];
            for j in 0..3 {
                m[(i + 1, j + 1)] += (c - 1.0) * n[i] * n[j];
            }
        }
        Ok(Self { matrix: m })
    }

    /// Spatial rotation by `angle` about the unit vector `axis` (right-handed).
    pub fn rotation(axis: &Vec3, angle: f64) -> Result<Self> {
        check_unit(axis)?;
        let n = axis / axis.norm();
        let (c, s) = (angle.cos(), angle.sin());
        let k = Matrix3::new(0.0, -n[2], n[1], n[2], 0.0, -n[0], -n[1], n[0], 0.0);
        let r = Matrix3::identity() * c + k * s + n * n.transpose() * (1.0 - c);
        Ok(Self::from_rotation_block(&r))
    }

    fn from_rotation_block(r: &Matrix3<f64>) -> Self {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(1, 1).copy_from(r);
        Self { matrix: m }
    }

    /// Validates a generic matrix: ΛᵀηΛ = η, det Λ = 1, Λ00 ≥ 1.
    pub fn from_matrix(matrix: Matrix4<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entries".into()));
        }
        let defect = (matrix.transpose() * eta() * matrix - eta()).abs().max();
        let scale = matrix.abs().max().powi(2).max(1.0);
        if defect > LORENTZ_TOL * scale {
            return Err(Error::InvalidTransform(format!("metric defect {defect:.3e}")));
        }
        let det = matrix.determinant();
        if (det - 1.0).abs() > LORENTZ_TOL * scale {
            return Err(Error::InvalidTransform(format!("determinant {det}")));
        }
        if matrix[(0, 0)] < 1.0 - LORENTZ_TOL {
            return Err(Error::InvalidTransform("not orthochronous".into()));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    pub fn apply(&self, v: &FourVector) -> FourVector {
        FourVector::from_vector4(&(self.matrix * v.to_vector4()))
    }

    pub fn compose(&self, other: &LorentzTransform) -> Self {
        Self { matrix: self.matrix * other.matrix }
    }

    /// Λ⁻¹ = η Λᵀ η, exact up to sign flips.
    pub fn inverse(&self) -> Self {
        let e = eta();
        Self { matrix: e * self.matrix.transpose() * e }
    }

    pub fn is_identity(&self) -> bool {
        self.matrix == Matrix4::identity()
    }

    /// If Λ is a rotation whose spatial block is a signed permutation
    /// (entries within 1e-12 of 0 or ±1), returns `perm[i]`, `sign[i]` with
    /// (Λp)_i = sign[i] · p_{perm[i]}.
    pub fn signed_permutation(&self) -> Option<([usize; 3], [f64; 3])> {
        let m = &self.matrix;
        let tol = 1e-12;
        if (m[(0, 0)] - 1.0).abs() > tol {
            return None;
        }
        for i in 1..4 {
            if m[(0, i)].abs() > tol || m[(i, 0)].abs() > tol {
                return None;
            }
        }
        let mut perm = [0usize; 3];
        let mut sign = [0.0; 3];
        for i in 0..3 {
            let mut found = None;
            for j in 0..3 {
                let v = m[(i + 1, j + 1)];
                if (v.abs() - 1.0).abs() <= tol {
                    if found.is_some() {
                        return None;
                    }
                    found = Some((j, v.signum()));
                } else if v.abs() > tol {
                    return None;
                }
            }
            let (j, s) = found?;
            perm[i] = j;
            sign[i] = s;
        }
        Some((perm, sign))
    }
}

fn check_unit(axis: &Vec3) -> Result<()> {
    let n = axis.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("axis must be a unit vector, |axis| = {n}")));
    }
    Ok(())
}

/// Poincaré element (a, Λ) acting by x ↦ a + Λx.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareElement {
    pub a: FourVector,
    pub lambda: LorentzTransform,
}

impl PoincareElement {
    pub fn new(a: FourVector, lambda: LorentzTransform) -> Self {
        Self { a, lambda }
    }

    pub fn identity() -> Self {
        Self::new(FourVector::ZERO, LorentzTransform::identity())
    }

    pub fn translation(a: FourVector) -> Self {
        Self::new(a, LorentzTransform::identity())
    }

    pub fn lorentz(lambda: LorentzTransform) -> Self {
        Self::new(FourVector::ZERO, lambda)
    }

    pub fn act(&self, x: &FourVector) -> FourVector {
        self.a + self.lambda.apply(x)
    }

    /// (a,Λ)(a',Λ') = (a + Λa', ΛΛ').
    pub fn compose(&self, other: &PoincareElement) -> Self {
        Self::new(self.a + self.lambda.apply(&other.a), self.lambda.compose(&other.lambda))
    }

    /// (a,Λ)⁻¹ = (−Λ⁻¹a, Λ⁻¹).
    pub fn inverse(&self) -> Self {
        let li = self.lambda.inverse();
        Self::new(-li.apply(&self.a), li)
    }

    pub fn is_translation(&self) -> bool {
        self.lambda.is_identity()
    }
}

/// act(g, x) as a free function.
pub fn act(g: &PoincareElement, x: &FourVector) -> FourVector {
    g.act(x)
}

pub fn boost_z(rho: f64) -> LorentzTransform {
    LorentzTransform::boost_z(rho)
}

pub fn rotation(axis: &Vec3, angle: f64) -> Result<LorentzTransform> {
    LorentzTransform::rotation(axis, angle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn boost_matrix_entries() {
        let b = boost_z(0.7);
        let m = b.matrix();
        assert_eq!(m[(0, 0)], 0.7f64.cosh());
        assert_eq!(m[(3, 3)], 0.7f64.cosh());
        assert_eq!(m[(0, 3)], 0.7f64.sinh());
        assert_eq!(m[(3, 0)], 0.7f64.sinh());
        assert_eq!(m[(1, 1)], 1.0);
        assert_eq!(m[(2, 2)], 1.0);
        assert_eq!(m[(0, 1)], 0.0);
        assert_eq!(m[(1, 3)], 0.0);
    }

    #[test]
    fn rotation_rejects_non_unit_axis() {
        assert!(rotation(&Vec3::new(1.0, 0.0, 1e-8), 0.3).is_ok());
        assert!(rotation(&Vec3::new(1.0, 1e-4, 0.0), 0.3).is_err());
        assert!(rotation(&Vec3::new(2.0, 0.0, 0.0), 0.3).is_err());
    }

    #[test]
    fn quarter_turn_is_signed_permutation() {
        let r = rotation(&Vec3::z(), FRAC_PI_2).unwrap();
        let (perm, sign) = r.signed_permutation().unwrap();
        // (Rp)_1 = -p_2, (Rp)_2 = p_1, (Rp)_3 = p_3
        assert_eq!(perm, [1, 0, 2]);
        assert_eq!(sign, [-1.0, 1.0, 1.0]);
        assert!(boost_z(0.1).signed_permutation().is_none());
        assert!(rotation(&Vec3::z(), 0.3).unwrap().signed_permutation().is_none());
    }

    #[test]
    fn classification_cases() {
        let c = classify(&FourVector::new(2.0, 1.0, 0.0, 0.0));
        assert_eq!(c.kind, CausalKind::Timelike);
        assert!(c.causal && c.future_directed);
        let c = classify(&FourVector::new(-1.0, 0.0, 1.0, 0.0));
        assert_eq!(c.kind, CausalKind::Lightlike);
        assert!(c.causal && !c.future_directed);
        let c = classify(&FourVector::new(0.5, 0.0, 0.0, 1.0));
        assert_eq!(c.kind, CausalKind::Spacelike);
        assert!(!c.causal);
        assert_eq!(classify(&FourVector::ZERO).kind, CausalKind::Zero);
    }

    #[test]
    fn from_matrix_validation() {
        let b = boost_z(0.3).compose(&rotation(&Vec3::x(), 1.1).unwrap());
        assert!(LorentzTransform::from_matrix(*b.matrix()).is_ok());
        let mut parity = Matrix4::identity();
        parity[(1, 1)] = -1.0;
        assert!(LorentzTransform::from_matrix(parity).is_err());
        assert!(LorentzTransform::from_matrix(-Matrix4::<f64>::identity()).is_err());
        assert!(LorentzTransform::from_matrix(Matrix4::identity() * 1.01).is_err());
    }

    #[test]
    fn translation_and_identity_act() {
        let x = FourVector::new(0.3, -1.0, 2.0, 0.5);
        let a = FourVector::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(PoincareElement::translation(a).act(&x), x + a);
        assert_eq!(PoincareElement::identity().act(&x), x);
    }
}
