//! The charge-one instanton of center `p` and scale `λ` in the regular chart
//! (I¹) and the singular chart (I²), the transition `g₁₂ = (x − p)/|x − p|`
//! and the projected form `PI² = I² − h_{λ,p}`.

use crate::ad::{Real, D1};
use crate::algebra::{conjugate, ImQuat, Quat, UnitQuat};
use crate::error::{Result, YmbError};
use crate::fields::{asd, curvature_jet, norm_sq_n, ChartQuadrature, Field1, Form1, Form2, LieForm1, P4};
use crate::numerics::{integrate, par_range};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstantonParams {
    pub p: P4,
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Chart {
    Regular,
    Singular,
}

impl InstantonParams {
    pub fn new(p: P4, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(YmbError::InvalidParams(format!("lambda = {lambda}")));
        }
        Ok(InstantonParams { p, lambda })
    }

    fn offset<S: Real>(&self, x: &[S; 4]) -> Quat<S> {
        Quat::new(x[0] - self.p[0], x[1] - self.p[1], x[2] - self.p[2], x[3] - self.p[3])
    }

    pub fn distance(&self, x: &P4) -> f64 {
        (0..4).map(|i| (x[i] - self.p[i]).powi(2)).sum::<f64>().sqrt()
    }
}

/// `I¹ = Im((x − p) dx̄) / (λ² + |x − p|²)`.
pub fn i1<S: Real>(ip: &InstantonParams, x: &[S; 4]) -> Form1<S> {
    let y = ip.offset(x);
    let den = (y.norm_sq() + ip.lambda * ip.lambda).recip();
    std::array::from_fn(|j| (y * Quat::<S>::basis(j).conj()).im().scale(den))
}

/// `I² = Im(λ² (x̄ − p̄) dx) / (|x − p|² (λ² + |x − p|²))`; singular at `x = p`.
pub fn i2<S: Real>(ip: &InstantonParams, x: &[S; 4]) -> Form1<S> {
    let y = ip.offset(x);
    let r2 = y.norm_sq();
    let l2 = ip.lambda * ip.lambda;
    let den = (r2 * (r2 + l2)).recip() * l2;
    let yb = y.conj();
    std::array::from_fn(|j| (yb * Quat::<S>::basis(j)).im().scale(den))
}

/// `g₁₂(x) = (x − p)/|x − p|`.
pub fn g12<S: Real>(p: &P4, x: &[S; 4]) -> Quat<S> {
    let y = Quat::new(x[0] - p[0], x[1] - p[1], x[2] - p[2], x[3] - p[3]);
    y.scale(y.norm().recip())
}

pub fn eval_i1(ip: &InstantonParams, x: &P4) -> Form1 {
    i1(ip, x)
}

pub fn eval_i2(ip: &InstantonParams, x: &P4) -> Result<Form1> {
    if ip.distance(x) == 0.0 {
        return Err(YmbError::SingularPoint);
    }
    Ok(i2(ip, x))
}

pub fn transition(p: &P4, x: &P4) -> Result<UnitQuat> {
    let y = Quat::new(x[0] - p[0], x[1] - p[1], x[2] - p[2], x[3] - p[3]);
    UnitQuat::new(y).ok_or(YmbError::SingularPoint)
}

/// `s⁻¹ ds` as an Im ℍ-valued 1-form, from a first-order jet of `s`.
pub fn maurer_cartan(s: &Quat<D1>) -> Form1 {
    let v = s.value();
    let inv = v.inv();
    std::array::from_fn(|j| (inv * s.map(|c: D1| c.g[j])).im())
}

/// `I² − (g⁻¹dg + g⁻¹ I¹ g)` at one point, as a max-norm over components.
pub fn gluing_residual(ip: &InstantonParams, x: &P4) -> Result<f64> {
    let a2 = eval_i2(ip, x)?;
    let g = g12(&ip.p, &D1::point(x));
    let mc = maurer_cartan(&g);
    let gv = g.value();
    let a1 = i1(ip, x);
    let mut worst: f64 = 0.0;
    for j in 0..4 {
        let rhs = mc[j] + conjugate(gv.conj(), a1[j]);
        let d = a2[j] - rhs;
        worst = worst.max(d.dot(d).sqrt());
    }
    Ok(worst)
}

pub struct RegularChart(pub InstantonParams);
pub struct SingularChart(pub InstantonParams);

impl Field1 for RegularChart {
    fn eval<S: Real>(&self, x: &[S; 4]) -> Form1<S> {
        i1(&self.0, x)
    }
}
impl Field1 for SingularChart {
    fn eval<S: Real>(&self, x: &[S; 4]) -> Form1<S> {
        i2(&self.0, x)
    }
}

/// `F = dI + ½[I∧I]` evaluated with exact derivatives.
pub fn instanton_curvature(ip: &InstantonParams, chart: Chart, x: &P4) -> Result<Form2> {
    let jet = match chart {
        Chart::Regular => RegularChart(*ip).jet(x),
        Chart::Singular => {
            if ip.distance(x) == 0.0 {
                return Err(YmbError::SingularPoint);
            }
            SingularChart(*ip).jet(x)
        }
    };
    Ok(curvature_jet(&jet, 1.0))
}

/// `PI² = I² − h` at the given nodes.
pub fn projected_i2(ip: &InstantonParams, h: &LieForm1, nodes: &[P4]) -> Result<LieForm1> {
    if h.len() != nodes.len() {
        return Err(YmbError::GridMismatch(h.len(), nodes.len()));
    }
    if nodes.iter().any(|x| ip.distance(x) == 0.0) {
        return Err(YmbError::SingularPoint);
    }
    LieForm1::from_field(&SingularChart(*ip), nodes).sub(h)
}

/// `∫ |F|²` and `∫ |F⁻|²` over a quadrature, in the regular chart.
pub fn action_and_asd(ip: &InstantonParams, quad: &ChartQuadrature) -> (f64, f64) {
    let f: Vec<Form2> = par_range(quad.len(), |i| {
        curvature_jet(&RegularChart(*ip).jet(&quad.nodes[i]), 1.0)
    });
    let total = integrate(&quad.weights, |i| norm_sq_n(&f[i]));
    let anti = integrate(&quad.weights, |i| norm_sq_n(&asd(&f[i])));
    (total, anti)
}

/// Apply a constant gauge rotation `g ω g⁻¹` to a 1-form value.
pub fn rotate_form(g: &Quat, a: &Form1) -> Form1 {
    a.map(|q: ImQuat| conjugate(*g, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::quadrature::BubbleGrid;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(7)
    }

    fn rand_point(r: &mut impl Rng, s: f64) -> P4 {
        std::array::from_fn(|_| r.gen_range(-s..s))
    }

    fn form_norm(a: &Form1) -> f64 {
        a.iter().map(|q| q.dot(*q)).sum::<f64>().sqrt()
    }

    #[test]
    fn expanded_components_match_quaternion_arithmetic() {
        let ip = InstantonParams::new([0.1, -0.2, 0.3, 0.05], 0.4).unwrap();
        let mut r = rng();
        for _ in 0..50 {
            let x = rand_point(&mut r, 1.0);
            let y = Quat::new(x[0] - 0.1, x[1] + 0.2, x[2] - 0.3, x[3] - 0.05);
            let a1 = eval_i1(&ip, &x);
            let a2 = eval_i2(&ip, &x).unwrap();
            let yy = y.norm_sq();
            for j in 0..4 {
                // Component j of (x − p) dx̄ is (x − p) ē_j; of (x̄ − p̄) dx it is ȳ e_j.
                let e = Quat::basis(j);
                let d1 = (y * e.conj()).im().scalef(1.0 / (0.16 + yy)) - a1[j];
                let d2 = (y.conj() * e).im().scalef(0.16 / (yy * (0.16 + yy))) - a2[j];
                assert!(d1.dot(d1) < 1e-28 && d2.dot(d2) < 1e-28);
            }
        }
    }

    #[test]
    fn i1_vanishes_at_center_and_decays() {
        let ip = InstantonParams::new([0.2, 0.0, -0.1, 0.3], 0.5).unwrap();
        assert_eq!(eval_i1(&ip, &ip.p), [ImQuat::zero(); 4]);
        let at = |r: f64| {
            let x = [0.2 + r, 0.0, -0.1, 0.3];
            form_norm(&eval_i1(&ip, &x))
        };
        let (a10, a100) = (at(10.0), at(100.0));
        assert!((a10 * 10.0 / (a100 * 100.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn i1_scaling() {
        let lam = 0.3;
        let a = InstantonParams::new([0.0; 4], lam).unwrap();
        let b = InstantonParams::new([0.0; 4], 1.0).unwrap();
        let y = [0.4, -0.7, 1.1, 0.2];
        let x = y.map(|v| v * lam);
        let lhs = eval_i1(&a, &x);
        let rhs = eval_i1(&b, &y);
        for j in 0..4 {
            let d = lhs[j] - rhs[j].scalef(1.0 / lam);
            assert!(d.dot(d) < 1e-26);
        }
    }

    #[test]
    fn i2_bound_and_far_field() {
        let ip = InstantonParams::new([0.1, 0.1, 0.0, -0.2], 0.05).unwrap();
        let mut r = rng();
        for _ in 0..100 {
            let x = rand_point(&mut r, 1.0);
            let d = ip.distance(&x);
            let n = form_norm(&eval_i2(&ip, &x).unwrap());
            assert!(n <= 3f64.sqrt() * 0.0025 / d.powi(3) * (1.0 + 1e-12));
        }
        let x = [0.9, 0.1, 0.0, -0.2];
        let y = Quat::new(0.8, 0.0, 0.0, 0.0);
        let lead: Form1 =
            std::array::from_fn(|j| (y.conj() * Quat::basis(j)).im().scalef(0.0025 / y.norm_sq().powi(2)));
        let a2 = eval_i2(&ip, &x).unwrap();
        let rel = (0..4)
            .map(|j| (a2[j] - lead[j]).dot(a2[j] - lead[j]))
            .sum::<f64>()
            .sqrt()
            / form_norm(&lead);
        assert!(rel < 0.0025 / 0.64 * 1.01);
        assert!(matches!(eval_i2(&ip, &ip.p), Err(YmbError::SingularPoint)));
    }

    #[test]
    fn transition_examples() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let x = [1.1, 0.2, 0.3, 0.4];
        assert_eq!(transition(&p, &x).unwrap().quat(), Quat::one());
        let mut r = rng();
        for _ in 0..20 {
            let x = rand_point(&mut r, 1.0);
            assert!((transition(&p, &x).unwrap().quat().norm() - 1.0).abs() < 1e-15);
        }
        assert!(transition(&p, &p).is_err());
    }

    #[test]
    fn gluing_relation_holds() {
        let ip = InstantonParams::new([0.1, -0.3, 0.2, 0.0], 0.2).unwrap();
        let mut r = rng();
        for _ in 0..1000 {
            let x = rand_point(&mut r, 1.0);
            assert!(gluing_residual(&ip, &x).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn curvature_is_self_dual_in_both_charts() {
        let ip = InstantonParams::new([0.1, -0.3, 0.2, 0.0], 0.3).unwrap();
        let mut r = rng();
        for _ in 0..100 {
            let x = rand_point(&mut r, 1.0);
            for chart in [Chart::Regular, Chart::Singular] {
                let f = instanton_curvature(&ip, chart, &x).unwrap();
                assert!(norm_sq_n(&asd(&f)).sqrt() <= 1e-10 * (1.0 + norm_sq_n(&f).sqrt()));
            }
            let a = norm_sq_n(&instanton_curvature(&ip, Chart::Regular, &x).unwrap());
            let b = norm_sq_n(&instanton_curvature(&ip, Chart::Singular, &x).unwrap());
            assert!((a - b).abs() <= 1e-10 * a);
        }
    }

    #[test]
    fn curvature_density_closed_form_and_maximum_at_center() {
        let ip = InstantonParams::new([0.0; 4], 0.5).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let rho = 0.1 * k as f64;
            let f = norm_sq_n(&instanton_curvature(&ip, Chart::Regular, &[rho, 0.0, 0.0, 0.0]).unwrap());
            let exact = 48.0 * 0.5f64.powi(4) / (0.25 + rho * rho).powi(4);
            assert!((f - exact).abs() < 1e-10 * exact);
            assert!(f <= prev);
            prev = f;
        }
    }

    #[test]
    fn action_is_eight_pi_squared() {
        for (p, lam) in [([0.0; 4], 1.0), ([0.3, -0.1, 0.2, 0.0], 0.05), ([0.0; 4], 0.2)] {
            let ip = InstantonParams::new(p, lam).unwrap();
            let q = ChartQuadrature::r4(p, lam, &BubbleGrid::coarse());
            let (s, a) = action_and_asd(&ip, &q);
            assert!((s / (8.0 * PI * PI) - 1.0).abs() < 1e-6, "{s}");
            assert!(a / s < 1e-20);
        }
    }

    #[test]
    fn projected_form_is_difference() {
        let ip = InstantonParams::new([0.0; 4], 0.1).unwrap();
        let nodes = vec![[0.5, 0.1, 0.0, 0.0], [0.0, 0.2, 0.3, -0.1]];
        let h = LieForm1::zeros(2);
        let pi = projected_i2(&ip, &h, &nodes).unwrap();
        assert_eq!(pi.values[0], eval_i2(&ip, &nodes[0]).unwrap());
    }
}
