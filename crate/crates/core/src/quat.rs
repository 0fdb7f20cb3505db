//! Real quaternions and the intrinsic slice functions used by the
//! Balakrishnan integrand.
//!
//! Multiplication follows the Hamilton convention `e1 e2 = e3`,
//! `e2 e3 = e1`, `e3 e1 = e2`.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real quaternion `w + x e1 + y e2 + z e3`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Self = Self::new(1.0, 0.0, 0.0, 0.0);
    pub const E1: Self = Self::new(0.0, 1.0, 0.0, 0.0);
    pub const E2: Self = Self::new(0.0, 0.0, 1.0, 0.0);
    pub const E3: Self = Self::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn real(w: f64) -> Self {
        Self::new(w, 0.0, 0.0, 0.0)
    }

    /// Basis unit by index: 0 -> 1, 1 -> e1, 2 -> e2, 3 -> e3.
    pub fn basis(k: usize) -> Self {
        match k {
            0 => Self::ONE,
            1 => Self::E1,
            2 => Self::E2,
            3 => Self::E3,
            _ => panic!("quaternion basis index {k} out of range"),
        }
    }

    pub fn from_array(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Scalar part `Re(p)`.
    pub fn re(self) -> f64 {
        self.w
    }

    /// Vector part, as a pure quaternion.
    pub fn vector(self) -> Self {
        Self::new(0.0, self.x, self.y, self.z)
    }

    pub fn conj(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sqr(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn modulus(self) -> f64 {
        // hypot-style scaling is unnecessary at the magnitudes used here
        self.norm_sqr().sqrt()
    }

    pub fn vector_modulus(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.w * k, self.x * k, self.y * k, self.z * k)
    }

    /// Multiplicative inverse. Returns `None` for zero.
    pub fn inverse(self) -> Option<Self> {
        let n2 = self.norm_sqr();
        (n2 > 0.0).then(|| self.conj().scale(1.0 / n2))
    }

    pub fn is_real(self) -> bool {
        self.x == 0.0 && self.y == 0.0 && self.z == 0.0
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn exp(self) -> Self {
        let r = self.w.exp();
        let v = self.vector_modulus();
        if v == 0.0 {
            return Self::real(r);
        }
        let k = r * v.sin() / v;
        Self::new(r * v.cos(), self.x * k, self.y * k, self.z * k)
    }
}

/// Hamilton product.
pub fn qmul(a: Quaternion, b: Quaternion) -> Quaternion {
    Quaternion::new(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )
}

impl Mul for Quaternion {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        qmul(self, rhs)
    }
}

impl MulAssign for Quaternion {
    fn mul_assign(&mut self, rhs: Self) {
        *self = qmul(*self, rhs);
    }
}

impl Mul<f64> for Quaternion {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

impl Mul<Quaternion> for f64 {
    type Output = Quaternion;
    fn mul(self, rhs: Quaternion) -> Quaternion {
        rhs.scale(self)
    }
}

impl Div<f64> for Quaternion {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.scale(1.0 / rhs)
    }
}

impl Add for Quaternion {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.w + rhs.w, self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for Quaternion {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.w - rhs.w, self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl SubAssign for Quaternion {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl Neg for Quaternion {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}e1 + {}e2 + {}e3", self.w, self.x, self.y, self.z)
    }
}

/// A unit pure quaternion `j` with `j^2 = -1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImaginaryUnit(Quaternion);

impl ImaginaryUnit {
    pub const E1: Self = Self(Quaternion::E1);
    pub const E2: Self = Self(Quaternion::E2);
    pub const E3: Self = Self(Quaternion::E3);

    /// Normalizes the direction `(x, y, z)`; fails on the zero vector.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let q = Quaternion::new(0.0, x, y, z);
        let m = q.vector_modulus();
        if m <= 0.0 || !m.is_finite() {
            return Err(Error::InvalidInput(format!(
                "imaginary unit direction ({x}, {y}, {z}) has no usable length"
            )));
        }
        Ok(Self(q.scale(1.0 / m)))
    }

    pub fn quaternion(self) -> Quaternion {
        self.0
    }
}

impl From<ImaginaryUnit> for Quaternion {
    fn from(j: ImaginaryUnit) -> Self {
        j.0
    }
}

/// `p = p0 + axis * p1` with `p1 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceDecomposition {
    pub p0: f64,
    pub p1: f64,
    pub axis: ImaginaryUnit,
}

impl SliceDecomposition {
    pub fn recompose(&self) -> Quaternion {
        Quaternion::real(self.p0) + self.axis.quaternion().scale(self.p1)
    }
}

/// Splits `p` into its complex-plane coordinates. Real quaternions get the
/// axis `e1`.
pub fn slice_decompose(p: Quaternion) -> SliceDecomposition {
    let p1 = p.vector_modulus();
    let axis = if p1 > 0.0 {
        ImaginaryUnit(p.vector().scale(1.0 / p1))
    } else {
        ImaginaryUnit::E1
    };
    SliceDecomposition { p0: p.w, p1, axis }
}

/// Slice logarithm `ln|s| + j_s arg(s)`, defined off `(-inf, 0]`.
pub fn qlog(s: Quaternion) -> Result<Quaternion> {
    if s.is_real() && s.w <= 0.0 {
        return Err(Error::Domain(format!(
            "logarithm undefined on the nonpositive real axis (s = {})",
            s.w
        )));
    }
    let m = s.modulus();
    let arg = (s.w / m).clamp(-1.0, 1.0).acos();
    let d = slice_decompose(s);
    Ok(Quaternion::real(m.ln()) + d.axis.quaternion().scale(arg))
}

/// Real power `s^alpha = exp(alpha log s)`.
pub fn qpow(s: Quaternion, alpha: f64) -> Result<Quaternion> {
    Ok(qlog(s)?.scale(alpha).exp())
}

/// Matrix of left multiplication by `u`: `qmul(u, v) = M * [v0, v1, v2, v3]`.
pub fn left_mult_table(u: Quaternion) -> [[f64; 4]; 4] {
    let Quaternion { w, x, y, z } = u;
    [
        [w, -x, -y, -z],
        [x, w, -z, y],
        [y, z, w, -x],
        [z, -y, x, w],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn close(a: Quaternion, b: Quaternion, tol: f64) -> bool {
        (a - b).modulus() <= tol
    }

    #[test]
    fn hamilton_products() {
        assert_eq!(Quaternion::E1 * Quaternion::E2, Quaternion::E3);
        assert_eq!(Quaternion::E2 * Quaternion::E3, Quaternion::E1);
        assert_eq!(Quaternion::E3 * Quaternion::E1, Quaternion::E2);
        assert_eq!(Quaternion::E2 * Quaternion::E1, -Quaternion::E3);
        for k in 1..4 {
            let e = Quaternion::basis(k);
            assert_eq!(e * e, Quaternion::real(-1.0));
        }
        let a = Quaternion::ONE + Quaternion::E1;
        let b = Quaternion::ONE - Quaternion::E1;
        assert_eq!(a * b, Quaternion::real(2.0));
        let j = ImaginaryUnit::new(1.0, 1.0, 1.0).unwrap().quaternion();
        assert!(close(j * j, Quaternion::real(-1.0), 1e-15));
    }

    #[test]
    fn slice_decomposition_examples() {
        let d = slice_decompose(Quaternion::real(3.0));
        assert_eq!((d.p0, d.p1), (3.0, 0.0));
        assert_eq!(d.axis, ImaginaryUnit::E1);

        let d = slice_decompose(Quaternion::new(1.0, 0.0, 2.0, 0.0));
        assert_eq!((d.p0, d.p1), (1.0, 2.0));
        assert_eq!(d.axis, ImaginaryUnit::E2);

        let d = slice_decompose(Quaternion::E1 + Quaternion::E3);
        assert_eq!(d.p0, 0.0);
        assert_abs_diff_eq!(d.p1, SQRT_2, epsilon = 1e-15);
        let ax = d.axis.quaternion();
        assert_abs_diff_eq!(ax.x, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(ax.z, FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn log_examples() {
        assert_eq!(qlog(Quaternion::ONE).unwrap(), Quaternion::ZERO);
        assert!(close(
            qlog(Quaternion::E1).unwrap(),
            Quaternion::E1.scale(FRAC_PI_2),
            1e-15
        ));
        assert!(matches!(qlog(Quaternion::real(-2.0)), Err(Error::Domain(_))));
        assert!(matches!(qlog(Quaternion::ZERO), Err(Error::Domain(_))));
        // negative real part off the real axis is fine
        assert!(qlog(Quaternion::new(-1.0, 0.0, 1e-3, 0.0)).is_ok());
    }

    #[test]
    fn pow_examples() {
        assert!(close(qpow(Quaternion::real(4.0), 0.5).unwrap(), Quaternion::real(2.0), 1e-15));
        let r = qpow(Quaternion::E1, 0.5).unwrap();
        assert!(close(r, (Quaternion::ONE + Quaternion::E1).scale(FRAC_1_SQRT_2), 1e-15));
        let r = qpow(-Quaternion::E2, 0.5).unwrap();
        let expect = Quaternion::real(FRAC_PI_4.cos()) - Quaternion::E2.scale(FRAC_PI_4.sin());
        assert!(close(r, expect, 1e-15));
        assert!(qpow(Quaternion::real(-1.0), 0.3).is_err());
    }

    #[test]
    fn left_mult_table_examples() {
        let id = left_mult_table(Quaternion::ONE);
        for (i, row) in id.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                assert_eq!(v, if i == k { 1.0 } else { 0.0 });
            }
        }
        let m = left_mult_table(Quaternion::E1);
        let v = [1.0, 2.0, 3.0, 4.0];
        let out: Vec<f64> = (0..4).map(|i| (0..4).map(|k| m[i][k] * v[k]).sum()).collect();
        assert_eq!(out, vec![-2.0, 1.0, -4.0, 3.0]);

        let m1 = left_mult_table(Quaternion::E1);
        let m2 = left_mult_table(Quaternion::E2);
        let m3 = left_mult_table(Quaternion::E3);
        for i in 0..4 {
            for k in 0..4 {
                let p: f64 = (0..4).map(|l| m1[i][l] * m2[l][k]).sum();
                assert_eq!(p, m3[i][k]);
            }
        }
    }

    fn quat() -> impl Strategy<Value = Quaternion> {
        prop::array::uniform4(-10.0f64..10.0).prop_map(Quaternion::from_array)
    }

    fn off_negative_axis() -> impl Strategy<Value = Quaternion> {
        quat().prop_filter("must avoid (-inf, 0]", |q| {
            q.vector_modulus() > 1e-3 || q.w > 1e-3
        })
    }

    proptest! {
        #[test]
        fn modulus_is_multiplicative(a in quat(), b in quat()) {
            let lhs = (a * b).modulus();
            let rhs = a.modulus() * b.modulus();
            prop_assert!((lhs - rhs).abs() <= 8.0 * f64::EPSILON * rhs.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn conj_reverses_products(a in quat(), b in quat()) {
            let lhs = (a * b).conj();
            let rhs = b.conj() * a.conj();
            prop_assert!(close(lhs, rhs, 1e-12 * (1.0 + a.modulus() * b.modulus())));
        }

        #[test]
        fn conj_times_self_is_norm(a in quat()) {
            let p = a.conj() * a;
            prop_assert!(close(p, Quaternion::real(a.norm_sqr()), 1e-12 * (1.0 + a.norm_sqr())));
        }

        #[test]
        fn multiplication_is_associative(a in quat(), b in quat(), c in quat()) {
            let scale = 1.0 + a.modulus() * b.modulus() * c.modulus();
            prop_assert!(close((a * b) * c, a * (b * c), 1e-12 * scale));
        }

        #[test]
        fn exp_inverts_log(s in off_negative_axis()) {
            let back = qlog(s).unwrap().exp();
            prop_assert!((back - s).modulus() <= 1e-12 * s.modulus());
        }

        #[test]
        fn powers_add(s in off_negative_axis(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let lhs = qpow(s, a).unwrap() * qpow(s, b).unwrap();
            let rhs = qpow(s, a + b).unwrap();
            prop_assert!((lhs - rhs).modulus() <= 1e-12 * rhs.modulus());
        }

        #[test]
        fn first_power_is_identity(s in off_negative_axis()) {
            prop_assert!((qpow(s, 1.0).unwrap() - s).modulus() <= 1e-13 * s.modulus());
        }

        #[test]
        fn powers_are_axially_symmetric(
            p0 in -5.0f64..5.0,
            p1 in 0.01f64..5.0,
            dir in prop::array::uniform3(-1.0f64..1.0),
            alpha in -1.0f64..1.0,
        ) {
            prop_assume!(dir.iter().map(|d| d * d).sum::<f64>() > 1e-4);
            let j = ImaginaryUnit::new(dir[0], dir[1], dir[2]).unwrap();
            let s = Quaternion::new(p0, p1, 0.0, 0.0);
            let s2 = Quaternion::real(p0) + j.quaternion().scale(p1);
            let d1 = slice_decompose(qpow(s, alpha).unwrap());
            let d2 = slice_decompose(qpow(s2, alpha).unwrap());
            prop_assert!((d1.p0 - d2.p0).abs() <= 1e-12 * (1.0 + d1.p0.abs()));
            prop_assert!((d1.p1 - d2.p1).abs() <= 1e-12 * (1.0 + d1.p1.abs()));
        }

        #[test]
        fn left_mult_table_represents_product(u in quat(), v in quat()) {
            let m = left_mult_table(u);
            let c = v.to_array();
            let out: Vec<f64> = (0..4).map(|i| (0..4).map(|k| m[i][k] * c[k]).sum()).collect();
            let direct = (u * v).to_array();
            for i in 0..4 {
                prop_assert!((out[i] - direct[i]).abs() <= 1e-12 * (1.0 + u.modulus() * v.modulus()));
            }
        }

        #[test]
        fn decomposition_recomposes(p in quat()) {
            let d = slice_decompose(p);
            prop_assert!(d.p1 >= 0.0);
            prop_assert!((d.recompose() - p).modulus() <= 1e-14 * (1.0 + p.modulus()));
        }
    }
}
