//! Polynomial Im ℍ-valued 1-forms on ℝ⁴.

use crate::ad::Real;
use crate::algebra::ImQuat;
use crate::fields::{d_pointwise, Field1, Field2, Form1, Form2, P4};
use std::collections::HashMap;

/// Exponent vectors of all monomials of total degree `≤ n`, by degree then lexicographic.
pub fn monomials(n: usize) -> Vec<[u8; 4]> {
    let mut out = Vec::new();
    for d in 0..=n {
        for a in (0..=d).rev() {
            for b in (0..=d - a).rev() {
                for c in (0..=d - a - b).rev() {
                    out.push([a as u8, b as u8, c as u8, (d - a - b - c) as u8]);
                }
            }
        }
    }
    out
}

/// Values of the monomials at `x`.
pub fn eval_monomials<S: Real>(monos: &[[u8; 4]], n: usize, x: &[S; 4]) -> Vec<S> {
    let pw: [Vec<S>; 4] = std::array::from_fn(|i| {
        let mut v = Vec::with_capacity(n + 1);
        v.push(S::one());
        for k in 1..=n {
            let prev = v[k - 1];
            v.push(prev * x[i]);
        }
        v
    });
    monos
        .iter()
        .map(|e| pw[0][e[0] as usize] * pw[1][e[1] as usize] * pw[2][e[2] as usize] * pw[3][e[3] as usize])
        .collect()
}

/// `Σ_m coef[m][j][c] · x^m dx^j · e_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyForm1 {
    pub degree: usize,
    pub monos: Vec<[u8; 4]>,
    pub coef: Vec<[[f64; 3]; 4]>,
}

impl PolyForm1 {
    pub fn zeros(degree: usize) -> Self {
        let monos = monomials(degree);
        let coef = vec![[[0.0; 3]; 4]; monos.len()];
        PolyForm1 { degree, monos, coef }
    }

    pub fn index_map(&self) -> HashMap<[u8; 4], usize> {
        self.monos.iter().enumerate().map(|(i, m)| (*m, i)).collect()
    }

    /// Add `c · x^e dx^j · v`; the degree must fit.
    pub fn add_term(&mut self, e: [u8; 4], j: usize, v: ImQuat, c: f64) {
        let deg: usize = e.iter().map(|&k| k as usize).sum();
        assert!(deg <= self.degree, "monomial degree {deg} exceeds {}", self.degree);
        let i = self.monos.iter().position(|m| *m == e).expect("monomial present");
        let a = v.arr();
        for k in 0..3 {
            self.coef[i][j][k] += c * a[k];
        }
    }

    /// The same form with room for monomials up to degree `n ≥ self.degree`.
    pub fn with_degree(&self, n: usize) -> Self {
        let mut out = PolyForm1::zeros(n.max(self.degree));
        let map = out.index_map();
        for (m, c) in self.monos.iter().zip(&self.coef) {
            out.coef[map[m]] = *c;
        }
        out
    }

    pub fn lin(&self, a: f64, o: &PolyForm1, b: f64) -> PolyForm1 {
        let n = self.degree.max(o.degree);
        let mut out = self.with_degree(n);
        for c in out.coef.iter_mut() {
            for row in c.iter_mut() {
                for v in row.iter_mut() {
                    *v *= a;
                }
            }
        }
        let map = out.index_map();
        for (m, c) in o.monos.iter().zip(&o.coef) {
            let t = &mut out.coef[map[m]];
            for j in 0..4 {
                for k in 0..3 {
                    t[j][k] += b * c[j][k];
                }
            }
        }
        out
    }

    pub fn flat(&self) -> Vec<f64> {
        self.coef.iter().flat_map(|c| c.iter().flatten().copied()).collect()
    }

    pub fn from_flat(degree: usize, v: &[f64]) -> Option<Self> {
        let mut out = PolyForm1::zeros(degree);
        if v.len() != out.coef.len() * 12 {
            return None;
        }
        for (i, c) in out.coef.iter_mut().enumerate() {
            for j in 0..4 {
                for k in 0..3 {
                    c[j][k] = v[12 * i + 3 * j + k];
                }
            }
        }
        Some(out)
    }

    /// `∂ᵢ` of every coefficient polynomial.
    pub fn partial(&self, i: usize) -> PolyForm1 {
        let mut out = PolyForm1::zeros(self.degree);
        let map = out.index_map();
        for (m, c) in self.monos.iter().zip(&self.coef) {
            if m[i] == 0 {
                continue;
            }
            let mut e = *m;
            e[i] -= 1;
            let k = m[i] as f64;
            let t = &mut out.coef[map[&e]];
            for j in 0..4 {
                for a in 0..3 {
                    t[j][a] += k * c[j][a];
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.flat().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Field1 for PolyForm1 {
    fn eval<S: Real>(&self, x: &[S; 4]) -> Form1<S> {
        let mv = eval_monomials(&self.monos, self.degree, x);
        let mut acc = [[S::zero(); 3]; 4];
        for (m, c) in mv.iter().zip(&self.coef) {
            for j in 0..4 {
                for k in 0..3 {
                    if c[j][k] != 0.0 {
                        acc[j][k] += *m * c[j][k];
                    }
                }
            }
        }
        acc.map(ImQuat::from_arr)
    }
}

/// Tangential part `A − (A·ζ)ζ` of a 1-form value at a point `ζ` of S³.
pub fn tangential(a: &Form1, zeta: &P4) -> Form1 {
    let mut n = ImQuat::zero();
    for j in 0..4 {
        n = n + a[j].scalef(zeta[j]);
    }
    std::array::from_fn(|j| a[j] - n.scalef(zeta[j]))
}

/// The exterior derivative of a polynomial 1-form as a closed-form 2-form field.
#[derive(Clone, Debug)]
pub struct PolyCurl {
    pub partials: [PolyForm1; 4],
}

impl PolyCurl {
    pub fn new(a: &PolyForm1) -> Self {
        PolyCurl {
            partials: std::array::from_fn(|i| a.partial(i)),
        }
    }
}

impl Field2 for PolyCurl {
    fn eval<S: Real>(&self, x: &[S; 4]) -> Form2<S> {
        let d: [Form1<S>; 4] = std::array::from_fn(|i| self.partials[i].eval(x));
        d_pointwise(&d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_count() {
        assert_eq!(monomials(0).len(), 1);
        assert_eq!(monomials(1).len(), 5);
        assert_eq!(monomials(4).len(), 70);
        assert_eq!(monomials(6).len(), 210);
    }

    #[test]
    fn evaluates_terms() {
        let mut p = PolyForm1::zeros(2);
        p.add_term([0, 1, 0, 0], 2, ImQuat::basis(0), 1.0);
        p.add_term([1, 0, 0, 1], 0, ImQuat::basis(2), -2.0);
        let x = [0.3, -0.4, 0.5, 0.7];
        let v = p.value(&x);
        assert_eq!(v[2], ImQuat::new(-0.4, 0.0, 0.0));
        assert!((v[0].x3 + 2.0 * 0.3 * 0.7).abs() < 1e-15);
        let j = p.jet(&x);
        assert!((j.d[1][2].x1 - 1.0).abs() < 1e-15);
        assert!((j.d[3][0].x3 + 0.6).abs() < 1e-15);
    }

    #[test]
    fn flat_round_trip_and_lin() {
        let mut p = PolyForm1::zeros(1);
        p.add_term([0, 0, 1, 0], 3, ImQuat::new(1.0, 2.0, 3.0), 1.0);
        let q = PolyForm1::from_flat(1, &p.flat()).unwrap();
        assert_eq!(p, q);
        let mut r = PolyForm1::zeros(2);
        r.add_term([2, 0, 0, 0], 0, ImQuat::basis(1), 1.0);
        let s = p.lin(2.0, &r, -1.0);
        assert_eq!(s.degree, 2);
        let x = [0.5, 0.1, 0.2, 0.3];
        assert!((s.value(&x)[3].x2 - 0.8).abs() < 1e-15);
        assert!((s.value(&x)[0].x2 + 0.25).abs() < 1e-15);
    }

    #[test]
    fn curl_matches_jet() {
        let mut p = PolyForm1::zeros(3);
        p.add_term([1, 2, 0, 0], 3, ImQuat::new(1.0, -1.0, 0.5), 1.0);
        p.add_term([0, 0, 1, 1], 1, ImQuat::basis(2), 2.0);
        let x = [0.2, -0.5, 0.3, 0.9];
        let j = p.jet(&x);
        let w = PolyCurl::new(&p).eval(&x);
        let expect = d_pointwise(&j.d);
        for c in 0..6 {
            let d = w[c] - expect[c];
            assert!(d.dot(d) < 1e-28);
        }
    }

    #[test]
    fn tangential_kills_normal() {
        let z = [0.5, 0.5, 0.5, 0.5];
        let a: Form1 = z.map(|c| ImQuat::new(c, 0.0, 1.0));
        let t = tangential(&a, &z);
        for c in t {
            assert!(c.dot(c) < 1e-30);
        }
    }
}
