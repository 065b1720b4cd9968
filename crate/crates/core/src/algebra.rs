//! Quaternions and su(2) ≅ Im ℍ.
//!
//! Inner products on the Lie algebra carry the factor two of the trace form,
//! `inner(x, y) = 2 (x₁y₁ + x₂y₂ + x₃y₃)`.

use crate::ad::Real;
use nalgebra::Matrix3;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Quat<S = f64> {
    pub w: S,
    pub x: S,
    pub y: S,
    pub z: S,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ImQuat<S = f64> {
    pub x1: S,
    pub x2: S,
    pub x3: S,
}

/// A unit quaternion, i.e. an element of SU(2) ≅ Sp(1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitQuat(Quat);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation3 {
    pub r: Matrix3<f64>,
}

impl<S: Real> Quat<S> {
    pub fn new(w: S, x: S, y: S, z: S) -> Self {
        Quat { w, x, y, z }
    }
    pub fn from_vec(v: [S; 4]) -> Self {
        Quat::new(v[0], v[1], v[2], v[3])
    }
    pub fn to_vec(self) -> [S; 4] {
        [self.w, self.x, self.y, self.z]
    }
    pub fn real(w: S) -> Self {
        Quat::new(w, S::zero(), S::zero(), S::zero())
    }
    pub fn one() -> Self {
        Quat::real(S::one())
    }
    pub fn zero() -> Self {
        Quat::real(S::zero())
    }
    /// The basis element 1, i, j, k for `k = 0..4`.
    pub fn basis(k: usize) -> Self {
        let mut v = [S::zero(); 4];
        v[k] = S::one();
        Quat::from_vec(v)
    }
    pub fn conj(self) -> Self {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }
    pub fn norm_sq(self) -> S {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }
    pub fn norm(self) -> S {
        self.norm_sq().sqrt()
    }
    pub fn inv(self) -> Self {
        let n = self.norm_sq().recip();
        self.conj().scale(n)
    }
    pub fn scale(self, s: S) -> Self {
        Quat::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }
    pub fn im(self) -> ImQuat<S> {
        ImQuat {
            x1: self.x,
            x2: self.y,
            x3: self.z,
        }
    }
    pub fn map<T: Real>(self, f: impl Fn(S) -> T) -> Quat<T> {
        Quat::new(f(self.w), f(self.x), f(self.y), f(self.z))
    }
    pub fn value(self) -> Quat<f64> {
        self.map(|s| s.val())
    }
}

impl<S: Real> Add for Quat<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Quat::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z)
    }
}
impl<S: Real> Sub for Quat<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Quat::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)
    }
}
impl<S: Real> Neg for Quat<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Quat::new(-self.w, -self.x, -self.y, -self.z)
    }
}
impl<S: Real> Mul for Quat<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b, c, d) = (self.w, self.x, self.y, self.z);
        let (e, f, g, h) = (o.w, o.x, o.y, o.z);
        Quat::new(
            a * e - b * f - c * g - d * h,
            a * f + b * e + c * h - d * g,
            a * g - b * h + c * e + d * f,
            a * h + b * g - c * f + d * e,
        )
    }
}

impl<S: Real> ImQuat<S> {
    pub fn new(x1: S, x2: S, x3: S) -> Self {
        ImQuat { x1, x2, x3 }
    }
    pub fn zero() -> Self {
        ImQuat::new(S::zero(), S::zero(), S::zero())
    }
    /// i, j, k for `k = 0, 1, 2`.
    pub fn basis(k: usize) -> Self {
        let mut v = [S::zero(); 3];
        v[k] = S::one();
        ImQuat::from_arr(v)
    }
    pub fn from_arr(v: [S; 3]) -> Self {
        ImQuat::new(v[0], v[1], v[2])
    }
    pub fn arr(self) -> [S; 3] {
        [self.x1, self.x2, self.x3]
    }
    pub fn quat(self) -> Quat<S> {
        Quat::new(S::zero(), self.x1, self.x2, self.x3)
    }
    pub fn scale(self, s: S) -> Self {
        ImQuat::new(self.x1 * s, self.x2 * s, self.x3 * s)
    }
    pub fn scalef(self, s: f64) -> Self {
        ImQuat::new(self.x1 * s, self.x2 * s, self.x3 * s)
    }
    /// Euclidean dot product of coefficient vectors (without the factor 2).
    pub fn dot(self, o: Self) -> S {
        self.x1 * o.x1 + self.x2 * o.x2 + self.x3 * o.x3
    }
    pub fn value(self) -> ImQuat<f64> {
        ImQuat::new(self.x1.val(), self.x2.val(), self.x3.val())
    }
    pub fn map<T: Real>(self, f: impl Fn(S) -> T) -> ImQuat<T> {
        ImQuat::new(f(self.x1), f(self.x2), f(self.x3))
    }
}

impl<S: Real> Add for ImQuat<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        ImQuat::new(self.x1 + o.x1, self.x2 + o.x2, self.x3 + o.x3)
    }
}
impl<S: Real> Sub for ImQuat<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        ImQuat::new(self.x1 - o.x1, self.x2 - o.x2, self.x3 - o.x3)
    }
}
impl<S: Real> Neg for ImQuat<S> {
    type Output = Self;
    fn neg(self) -> Self {
        ImQuat::new(-self.x1, -self.x2, -self.x3)
    }
}

/// `[x, y] = xy − yx = 2 x × y`.
pub fn bracket<S: Real>(x: ImQuat<S>, y: ImQuat<S>) -> ImQuat<S> {
    ImQuat::new(
        (x.x2 * y.x3 - x.x3 * y.x2) * 2.0,
        (x.x3 * y.x1 - x.x1 * y.x3) * 2.0,
        (x.x1 * y.x2 - x.x2 * y.x1) * 2.0,
    )
}

pub fn scaled_bracket(eps: f64, x: ImQuat, y: ImQuat) -> ImQuat {
    bracket(x, y).scalef(eps)
}

pub fn inner<S: Real>(x: ImQuat<S>, y: ImQuat<S>) -> S {
    x.dot(y) * 2.0
}

pub fn phi_eps(eps: f64, x: ImQuat) -> ImQuat {
    x.scalef(eps)
}

/// `g x g⁻¹` for a unit quaternion `g`.
pub fn conjugate<S: Real>(g: Quat<S>, x: ImQuat<S>) -> ImQuat<S> {
    (g * x.quat() * g.conj()).im()
}

/// `g x g⁻¹` for an arbitrary nonzero quaternion `g`.
pub fn conjugate_general<S: Real>(g: Quat<S>, x: ImQuat<S>) -> ImQuat<S> {
    (g * x.quat() * g.inv()).im()
}

pub fn adjoint(g: UnitQuat, x: ImQuat) -> ImQuat {
    conjugate(g.0, x)
}

impl UnitQuat {
    pub fn identity() -> Self {
        UnitQuat(Quat::one())
    }
    /// Normalizes `q`; fails on the zero quaternion.
    pub fn new(q: Quat) -> Option<Self> {
        let n = q.norm();
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        Some(UnitQuat(q.scale(1.0 / n)))
    }
    pub fn quat(&self) -> Quat {
        self.0
    }
    pub fn inv(&self) -> Self {
        UnitQuat(self.0.conj())
    }
    pub fn mul(&self, o: &UnitQuat) -> UnitQuat {
        UnitQuat::new(self.0 * o.0).expect("product of unit quaternions")
    }
    /// `exp(ξ)` for `ξ ∈ Im ℍ`.
    pub fn exp(xi: ImQuat) -> Self {
        let t = xi.dot(xi).sqrt();
        if t < 1e-300 {
            return UnitQuat::identity();
        }
        let s = t.sin() / t;
        UnitQuat::new(Quat::new(t.cos(), xi.x1 * s, xi.x2 * s, xi.x3 * s)).unwrap()
    }
    /// Uniform random element of SU(2).
    pub fn random<R: rand::Rng>(rng: &mut R) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        loop {
            let v: [f64; 4] = [0; 4].map(|_| StandardNormal.sample(rng));
            if let Some(q) = UnitQuat::new(Quat::from_vec(v)) {
                return q;
            }
        }
    }
}

pub fn rotation_of(g: UnitQuat) -> Rotation3 {
    let mut r = Matrix3::zeros();
    for c in 0..3 {
        let col = adjoint(g, ImQuat::basis(c));
        for (row, v) in col.arr().into_iter().enumerate() {
            r[(row, c)] = v;
        }
    }
    Rotation3 { r }
}

impl Rotation3 {
    pub fn identity() -> Self {
        Rotation3 { r: Matrix3::identity() }
    }
    pub fn compose(&self, o: &Rotation3) -> Rotation3 {
        Rotation3 { r: self.r * o.r }.renormalized()
    }
    /// Polar projection back onto SO(3).
    pub fn renormalized(&self) -> Rotation3 {
        let svd = self.r.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut d = Matrix3::identity();
        if (u * vt).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        Rotation3 { r: u * d * vt }
    }
    pub fn apply(&self, x: ImQuat) -> ImQuat {
        let v = self.r * nalgebra::Vector3::new(x.x1, x.x2, x.x3);
        ImQuat::new(v[0], v[1], v[2])
    }
    /// A unit quaternion `g` with `rotation_of(g) = self`.
    pub fn to_unit_quat(&self) -> UnitQuat {
        let r = nalgebra::Rotation3::from_matrix_unchecked(self.r);
        let q = nalgebra::UnitQuaternion::from_rotation_matrix(&r);
        UnitQuat::new(Quat::new(q.w, q.i, q.j, q.k)).unwrap()
    }
    pub fn orthogonality_defect(&self) -> f64 {
        (self.r.transpose() * self.r - Matrix3::identity()).abs().max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn i() -> ImQuat {
        ImQuat::basis(0)
    }
    fn j() -> ImQuat {
        ImQuat::basis(1)
    }
    fn k() -> ImQuat {
        ImQuat::basis(2)
    }

    fn close(a: ImQuat, b: ImQuat, tol: f64) -> bool {
        (a - b).dot(a - b).sqrt() <= tol
    }

    #[test]
    fn quaternion_units() {
        let q = |v| Quat::<f64>::basis(v);
        assert_eq!(q(1) * q(1), -q(0));
        assert_eq!(q(1) * q(2), q(3));
        assert_eq!(q(2) * q(3), q(1));
        assert_eq!(q(3) * q(1), q(2));
    }

    #[test]
    fn bracket_examples() {
        assert_eq!(bracket(i(), j()), k().scalef(2.0));
        assert_eq!(bracket(i(), i()), ImQuat::zero());
        assert_eq!(bracket(j(), k()), i().scalef(2.0));
        let direct = (i().quat() * j().quat() - j().quat() * i().quat()).im();
        assert_eq!(bracket(i(), j()), direct);
    }

    #[test]
    fn scaled_bracket_examples() {
        assert_eq!(scaled_bracket(1.0, i(), j()), k().scalef(2.0));
        assert_eq!(scaled_bracket(0.5, i(), j()), k());
        let x = ImQuat::new(0.3, -1.0, 2.0);
        assert_eq!(scaled_bracket(0.7, x, x), ImQuat::zero());
    }

    #[test]
    fn inner_examples() {
        assert_eq!(inner(i(), i()), 2.0);
        assert_eq!(inner(i(), j()), 0.0);
        let v = i() + j().scalef(2.0);
        assert_eq!(inner(v, v), 10.0);
    }

    #[test]
    fn adjoint_examples() {
        let x = ImQuat::new(0.3, -0.4, 1.2);
        assert_eq!(adjoint(UnitQuat::identity(), x), x);
        let gi = UnitQuat::new(Quat::basis(1)).unwrap();
        assert_eq!(adjoint(gi, j()), -j());
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotation_of(UnitQuat::identity()).r, Matrix3::identity());
        let gi = UnitQuat::new(Quat::basis(1)).unwrap();
        assert_eq!(
            rotation_of(gi).r,
            Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, -1.0, -1.0))
        );
    }

    #[test]
    fn rotation_round_trip() {
        let g = UnitQuat::new(Quat::new(0.2, -0.5, 0.7, 0.1)).unwrap();
        let r = rotation_of(g);
        let h = r.to_unit_quat();
        assert!((rotation_of(h).r - r.r).abs().max() < 1e-12);
    }

    #[test]
    fn phi_eps_examples() {
        let x = ImQuat::new(0.3, -1.0, 2.0);
        assert_eq!(phi_eps(1.0, x), x);
        assert_eq!(phi_eps(2.0, i()), i().scalef(2.0));
    }

    fn imq() -> impl Strategy<Value = ImQuat> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(a, b, c)| ImQuat::new(a, b, c))
    }
    fn unit() -> impl Strategy<Value = UnitQuat> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_filter_map("nonzero", |(a, b, c, d)| {
            let q = Quat::new(a, b, c, d);
            (q.norm() > 1e-3).then(|| UnitQuat::new(q).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn jacobi(x in imq(), y in imq(), z in imq()) {
            let s = bracket(x, bracket(y, z)) + bracket(y, bracket(z, x)) + bracket(z, bracket(x, y));
            prop_assert!(close(s, ImQuat::zero(), 1e-13 * 100.0));
        }

        #[test]
        fn ad_invariance(x in imq(), y in imq(), z in imq()) {
            let s = inner(bracket(z, x), y) + inner(x, bracket(z, y));
            prop_assert!(s.abs() < 1e-12);
        }

        #[test]
        fn bracket_antisymmetric(x in imq(), y in imq()) {
            prop_assert_eq!(bracket(x, y), -bracket(y, x));
        }

        #[test]
        fn inner_positive(x in imq()) {
            let n = inner(x, x);
            prop_assert!(n >= 0.0);
            prop_assert_eq!(n == 0.0, x == ImQuat::zero());
        }

        #[test]
        fn adjoint_is_isometry(g in unit(), x in imq()) {
            let y = adjoint(g, x);
            prop_assert!((inner(y, y) - inner(x, x)).abs() < 1e-12);
        }

        #[test]
        fn norm_multiplicative(a in unit(), b in unit(), s in 0.1..3.0f64) {
            let p = a.quat().scale(s) * b.quat();
            prop_assert!((p.norm() - s).abs() < 1e-12);
        }

        #[test]
        fn double_cover(g in unit()) {
            let mg = UnitQuat::new(-g.quat()).unwrap();
            prop_assert!((rotation_of(g).r - rotation_of(mg).r).abs().max() < 1e-15);
            let r = rotation_of(g);
            prop_assert!(r.orthogonality_defect() < 1e-10);
            prop_assert!((r.r.determinant() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn rotation_homomorphism(g in unit(), h in unit()) {
            let lhs = rotation_of(g).r * rotation_of(h).r;
            let rhs = rotation_of(g.mul(&h)).r;
            prop_assert!((lhs - rhs).abs().max() < 1e-12);
        }

        #[test]
        fn phi_eps_isomorphism(x in imq(), y in imq(), eps in 0.01..2.0f64) {
            let lhs = phi_eps(eps, scaled_bracket(eps, x, y));
            let rhs = bracket(phi_eps(eps, x), phi_eps(eps, y));
            prop_assert!(close(lhs, rhs, 1e-12));
        }

        #[test]
        fn unit_renormalization(a in unit(), b in unit(), c in unit()) {
            let p = a.mul(&b).mul(&c);
            prop_assert!((p.quat().norm() - 1.0).abs() < 1e-12);
        }
    }
}
