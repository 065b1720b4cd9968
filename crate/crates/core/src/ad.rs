//! Forward-mode differentiation scalars over the four coordinates of ℝ⁴.
//!
//! Closed-form fields are written once against [`Real`] and evaluated with
//! `f64` for values, [`D1`] for value + gradient and [`D2`] when second
//! derivatives are needed.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

pub trait Real:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
{
    fn cst(v: f64) -> Self;
    fn val(&self) -> f64;
    /// Apply a scalar function given its value and first two derivatives at `self.val()`.
    fn chain(self, f: f64, df: f64, ddf: f64) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
    fn sqrt(self) -> Self {
        let v = self.val();
        let s = v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * v))
    }
    fn exp(self) -> Self {
        let e = self.val().exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let v = self.val();
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }
    fn recip(self) -> Self {
        let v = self.val();
        let r = 1.0 / v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
    fn sin(self) -> Self {
        let v = self.val();
        self.chain(v.sin(), v.cos(), -v.sin())
    }
    fn cos(self) -> Self {
        let v = self.val();
        self.chain(v.cos(), -v.sin(), -v.cos())
    }
    fn atan(self) -> Self {
        let v = self.val();
        let d = 1.0 / (1.0 + v * v);
        self.chain(v.atan(), d, -2.0 * v * d * d)
    }
    fn powi(self, n: i32) -> Self {
        let v = self.val();
        let nf = n as f64;
        self.chain(v.powi(n), nf * v.powi(n - 1), nf * (nf - 1.0) * v.powi(n - 2))
    }
    fn sq(self) -> Self {
        self * self
    }
    /// Two-argument arctangent; exact derivatives away from the origin.
    fn atan2(self, x: Self) -> Self {
        let (y0, x0) = (self.val(), x.val());
        let z = (self * x0 - x * y0) / (x * x0 + self * y0);
        z.atan() + y0.atan2(x0)
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn val(&self) -> f64 {
        *self
    }
    #[inline]
    fn chain(self, f: f64, _df: f64, _ddf: f64) -> Self {
        f
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn atan(self) -> Self {
        f64::atan(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
}

/// Value and gradient.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct D1 {
    pub v: f64,
    pub g: [f64; 4],
}

impl D1 {
    pub fn var(v: f64, i: usize) -> Self {
        let mut g = [0.0; 4];
        g[i] = 1.0;
        D1 { v, g }
    }
    pub fn point(x: &[f64; 4]) -> [D1; 4] {
        [0, 1, 2, 3].map(|i| D1::var(x[i], i))
    }
}

impl Real for D1 {
    #[inline]
    fn cst(v: f64) -> Self {
        D1 { v, g: [0.0; 4] }
    }
    #[inline]
    fn val(&self) -> f64 {
        self.v
    }
    #[inline]
    fn chain(self, f: f64, df: f64, _ddf: f64) -> Self {
        D1 {
            v: f,
            g: self.g.map(|gi| df * gi),
        }
    }
}

impl Add for D1 {
    type Output = D1;
    #[inline]
    fn add(self, o: D1) -> D1 {
        let mut g = self.g;
        for i in 0..4 {
            g[i] += o.g[i];
        }
        D1 { v: self.v + o.v, g }
    }
}
impl Sub for D1 {
    type Output = D1;
    #[inline]
    fn sub(self, o: D1) -> D1 {
        let mut g = self.g;
        for i in 0..4 {
            g[i] -= o.g[i];
        }
        D1 { v: self.v - o.v, g }
    }
}
impl Mul for D1 {
    type Output = D1;
    #[inline]
    fn mul(self, o: D1) -> D1 {
        let mut g = [0.0; 4];
        for i in 0..4 {
            g[i] = self.g[i] * o.v + self.v * o.g[i];
        }
        D1 { v: self.v * o.v, g }
    }
}
impl Div for D1 {
    type Output = D1;
    #[inline]
    fn div(self, o: D1) -> D1 {
        let inv = 1.0 / o.v;
        let v = self.v * inv;
        let mut g = [0.0; 4];
        for i in 0..4 {
            g[i] = (self.g[i] - v * o.g[i]) * inv;
        }
        D1 { v, g }
    }
}
impl Neg for D1 {
    type Output = D1;
    #[inline]
    fn neg(self) -> D1 {
        D1 {
            v: -self.v,
            g: self.g.map(|x| -x),
        }
    }
}
impl Add<f64> for D1 {
    type Output = D1;
    #[inline]
    fn add(self, o: f64) -> D1 {
        D1 {
            v: self.v + o,
            g: self.g,
        }
    }
}
impl Sub<f64> for D1 {
    type Output = D1;
    #[inline]
    fn sub(self, o: f64) -> D1 {
        D1 {
            v: self.v - o,
            g: self.g,
        }
    }
}
impl Mul<f64> for D1 {
    type Output = D1;
    #[inline]
    fn mul(self, o: f64) -> D1 {
        D1 {
            v: self.v * o,
            g: self.g.map(|x| x * o),
        }
    }
}
impl Div<f64> for D1 {
    type Output = D1;
    #[inline]
    fn div(self, o: f64) -> D1 {
        self * (1.0 / o)
    }
}
impl AddAssign for D1 {
    #[inline]
    fn add_assign(&mut self, o: D1) {
        *self = *self + o;
    }
}
impl SubAssign for D1 {
    #[inline]
    fn sub_assign(&mut self, o: D1) {
        *self = *self - o;
    }
}

/// Value, gradient and Hessian.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct D2 {
    pub v: f64,
    pub g: [f64; 4],
    pub h: [[f64; 4]; 4],
}

impl D2 {
    pub fn var(v: f64, i: usize) -> Self {
        let mut g = [0.0; 4];
        g[i] = 1.0;
        D2 { v, g, h: [[0.0; 4]; 4] }
    }
    pub fn point(x: &[f64; 4]) -> [D2; 4] {
        [0, 1, 2, 3].map(|i| D2::var(x[i], i))
    }
    /// The value and gradient as a first-order scalar.
    pub fn d1(&self) -> D1 {
        D1 { v: self.v, g: self.g }
    }
    /// The `i`-th partial derivative together with its gradient.
    pub fn partial(&self, i: usize) -> D1 {
        D1 {
            v: self.g[i],
            g: self.h[i],
        }
    }
}

impl Real for D2 {
    #[inline]
    fn cst(v: f64) -> Self {
        D2 {
            v,
            g: [0.0; 4],
            h: [[0.0; 4]; 4],
        }
    }
    #[inline]
    fn val(&self) -> f64 {
        self.v
    }
    fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        let mut h = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                h[i][j] = df * self.h[i][j] + ddf * self.g[i] * self.g[j];
            }
        }
        D2 {
            v: f,
            g: self.g.map(|gi| df * gi),
            h,
        }
    }
}

impl Add for D2 {
    type Output = D2;
    fn add(self, o: D2) -> D2 {
        let mut r = self;
        r.v += o.v;
        for i in 0..4 {
            r.g[i] += o.g[i];
            for j in 0..4 {
                r.h[i][j] += o.h[i][j];
            }
        }
        r
    }
}
impl Sub for D2 {
    type Output = D2;
    fn sub(self, o: D2) -> D2 {
        self + (-o)
    }
}
impl Mul for D2 {
    type Output = D2;
    fn mul(self, o: D2) -> D2 {
        let mut g = [0.0; 4];
        let mut h = [[0.0; 4]; 4];
        for i in 0..4 {
            g[i] = self.g[i] * o.v + self.v * o.g[i];
            for j in 0..4 {
                h[i][j] = self.h[i][j] * o.v + self.v * o.h[i][j] + self.g[i] * o.g[j] + self.g[j] * o.g[i];
            }
        }
        D2 { v: self.v * o.v, g, h }
    }
}
impl Div for D2 {
    type Output = D2;
    fn div(self, o: D2) -> D2 {
        self * o.recip()
    }
}
impl Neg for D2 {
    type Output = D2;
    fn neg(self) -> D2 {
        self * -1.0
    }
}
impl Add<f64> for D2 {
    type Output = D2;
    fn add(mut self, o: f64) -> D2 {
        self.v += o;
        self
    }
}
impl Sub<f64> for D2 {
    type Output = D2;
    fn sub(mut self, o: f64) -> D2 {
        self.v -= o;
        self
    }
}
impl Mul<f64> for D2 {
    type Output = D2;
    fn mul(self, o: f64) -> D2 {
        D2 {
            v: self.v * o,
            g: self.g.map(|x| x * o),
            h: self.h.map(|row| row.map(|x| x * o)),
        }
    }
}
impl Div<f64> for D2 {
    type Output = D2;
    fn div(self, o: f64) -> D2 {
        self * (1.0 / o)
    }
}
impl AddAssign for D2 {
    fn add_assign(&mut self, o: D2) {
        *self = *self + o;
    }
}
impl SubAssign for D2 {
    fn sub_assign(&mut self, o: D2) {
        *self = *self - o;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f<S: Real>(x: [S; 4]) -> S {
        (x[0] * x[1]).sin() + x[2].exp() / (x[3].sq() + 1.0) + x[1].atan2(x[0]).sqrt()
    }

    #[test]
    fn d1_matches_central_differences() {
        let x = [0.3, 0.7, -0.2, 0.5];
        let d = f(D1::point(&x));
        let h = 1e-6;
        for i in 0..4 {
            let mut a = x;
            let mut b = x;
            a[i] += h;
            b[i] -= h;
            let fd = (f(a) - f(b)) / (2.0 * h);
            assert!((fd - d.g[i]).abs() < 1e-8, "{i}: {fd} vs {}", d.g[i]);
        }
    }

    #[test]
    fn d2_hessian_is_symmetric_and_matches_d1() {
        let x = [0.3, 0.7, -0.2, 0.5];
        let d = f(D2::point(&x));
        let h = 1e-5;
        for i in 0..4 {
            let mut a = x;
            let mut b = x;
            a[i] += h;
            b[i] -= h;
            let ga = f(D1::point(&a)).g;
            let gb = f(D1::point(&b)).g;
            for j in 0..4 {
                assert!((d.h[i][j] - d.h[j][i]).abs() < 1e-12);
                let fd = (ga[j] - gb[j]) / (2.0 * h);
                assert!((fd - d.h[i][j]).abs() < 1e-7);
            }
        }
    }
}
