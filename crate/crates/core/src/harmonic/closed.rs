//! Closed-form harmonic extensions of the bubble boundary data.

use super::boundary::BoundaryForm;
use crate::ad::Real;
use crate::algebra::{ImQuat, Quat};
use crate::error::{Result, YmbError};
use crate::fields::{Field1, Form1, S3Rule, P4};
use crate::instanton::{eval_i2, InstantonParams};
use crate::numerics::loglog_slope;

/// `Im(ē_a e_j)` for `a, j = 0..3`.
fn table() -> [[ImQuat; 4]; 4] {
    std::array::from_fn(|a| std::array::from_fn(|j| (Quat::<f64>::basis(a).conj() * Quat::basis(j)).im()))
}

fn scaled<S: Real>(q: ImQuat, s: S) -> ImQuat<S> {
    ImQuat::new(s * q.x1, s * q.x2, s * q.x3)
}

/// `h_p = Im(conj(x − |x|²p) dx) / (1 − 2x·p + |x|²|p|²)²`: harmonic in each
/// component on the closed ball, equal to `Im((x̄ − p̄)dx)/|x − p|⁴` on S³.
#[derive(Clone, Copy, Debug)]
pub struct HpField {
    pub p: P4,
}

impl Field1 for HpField {
    fn eval<S: Real>(&self, x: &[S; 4]) -> Form1<S> {
        let p = self.p;
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
        let xp = x[0] * p[0] + x[1] * p[1] + x[2] * p[2] + x[3] * p[3];
        let pp: f64 = p.iter().map(|v| v * v).sum();
        let q = S::one() - xp * 2.0 + r2 * pp;
        let inv = (q * q).recip();
        let y: [S; 4] = std::array::from_fn(|a| (x[a] - r2 * p[a]) * inv);
        let t = table();
        std::array::from_fn(|j| {
            let mut acc = ImQuat::<S>::zero();
            for a in 0..4 {
                acc = acc + scaled(t[a][j], y[a]);
            }
            acc
        })
    }
}

/// Harmonic extension of `I²_{λ,p}|_{S³}`, summed as a zonal series about `p̂`.
///
/// On S³ the data is `Im(ȳ dx)·ψ(x·p̂)` with `y = x − p` and
/// `ψ = Σ_ℓ (|p|^ℓ − t^ℓ/a) U_ℓ`, where `a + |p|²/a = 1 + λ² + |p|²` and `t = |p|/a`.
#[derive(Clone, Debug)]
pub struct HLambdaP {
    pub p: P4,
    pub lambda: f64,
    pub coeffs: Vec<f64>,
    phat: P4,
}

impl HLambdaP {
    pub fn new(p: P4, lambda: f64) -> Self {
        let pn = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let c = 1.0 + lambda * lambda + pn * pn;
        let a = 0.5 * (c + (c * c - 4.0 * pn * pn).sqrt());
        let t = pn / a;
        let mut coeffs = Vec::new();
        let (mut pl, mut tl) = (1.0, 1.0);
        loop {
            coeffs.push(pl - tl / a);
            pl *= pn;
            tl *= t;
            if pl.max(tl) < 1e-18 || coeffs.len() > 2000 {
                break;
            }
        }
        let phat = if pn > 0.0 {
            p.map(|v| v / pn)
        } else {
            [1.0, 0.0, 0.0, 0.0]
        };
        HLambdaP {
            p,
            lambda,
            coeffs,
            phat,
        }
    }
}

impl Field1 for HLambdaP {
    fn eval<S: Real>(&self, x: &[S; 4]) -> Form1<S> {
        let ph = self.phat;
        let s = x[0] * ph[0] + x[1] * ph[1] + x[2] * ph[2] + x[3] * ph[3];
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
        let one_m = S::one() - r2;
        // Y_ℓ = |x|^ℓ U_ℓ(x·p̂/|x|) and its gradient, by the three-term recurrence.
        let mut y_prev = S::zero();
        let mut g_prev = [S::zero(); 4];
        let mut y = S::one();
        let mut g = [S::zero(); 4];
        let mut e = [S::zero(); 4];
        for (l, &c) in self.coeffs.iter().enumerate() {
            let k = (2.0 * l as f64 + 2.0).recip();
            for a in 0..4 {
                e[a] += (x[a] * y + one_m * g[a] * k - y * self.p[a]) * c;
            }
            let y_next = s * y * 2.0 - r2 * y_prev;
            let g_next: [S; 4] =
                std::array::from_fn(|a| y * (2.0 * ph[a]) + s * g[a] * 2.0 - x[a] * y_prev * 2.0 - r2 * g_prev[a]);
            y_prev = y;
            g_prev = g;
            y = y_next;
            g = g_next;
        }
        let t = table();
        std::array::from_fn(|j| {
            let mut acc = ImQuat::<S>::zero();
            for a in 0..4 {
                acc = acc + scaled(t[a][j], e[a]);
            }
            acc
        })
    }
}

/// `Im((x̄ − p̄)dx)/|x − p|⁴` at the nodes (all four components).
pub fn h_p_boundary(rule: &S3Rule, p: &P4) -> BoundaryForm {
    BoundaryForm::from_fn(rule, |z| HpField { p: *p }.value(z))
}

/// `I²_{λ,p}` at the nodes.
pub fn h_lambda_p_boundary(rule: &S3Rule, lambda: f64, p: &P4) -> Result<BoundaryForm> {
    let ip = InstantonParams::new(*p, lambda)?;
    let values = rule.dirs.iter().map(|z| eval_i2(&ip, z)).collect::<Result<Vec<_>>>()?;
    Ok(BoundaryForm {
        rule: rule.clone(),
        values,
        lift: None,
    })
}

/// Sample points in the ball of the given radius: the center, `p`, and four shells.
pub fn ball_samples(radius: f64, p: &P4) -> Vec<P4> {
    let rule = S3Rule::new(3);
    let mut out = vec![[0.0; 4]];
    if p.iter().map(|v| v * v).sum::<f64>().sqrt() < radius {
        out.push(*p);
    }
    for k in 1..=4 {
        let r = radius * k as f64 / 4.0;
        out.extend(rule.dirs.iter().map(|d| d.map(|c| c * r)));
    }
    out
}

/// `sup |h_{λ,p} − λ² h_p|` over samples of `B_{1 − d₀/2}`.
pub fn h_deviation(p: &P4, lambda: f64, d0: f64) -> f64 {
    let h = HLambdaP::new(*p, lambda);
    let hp = HpField { p: *p };
    ball_samples(1.0 - 0.5 * d0, p)
        .iter()
        .map(|x| {
            let a = h.value(x);
            let b = hp.value(x);
            (0..4)
                .map(|j| {
                    let d = a[j] - b[j].scalef(lambda * lambda);
                    d.dot(d)
                })
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Log–log slope of `sup |h_{λ,p} − λ² h_p|` against λ.
pub fn check_h_scaling(p: &P4, lambdas: &[f64], d0: f64) -> Result<f64> {
    if lambdas.len() < 2 {
        return Err(YmbError::DegenerateFit("need at least two values of lambda".into()));
    }
    let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0) || hi < 4.0 * lo * (1.0 - 1e-12) {
        return Err(YmbError::DegenerateFit("lambda values must span a factor of 4".into()));
    }
    let dev: Vec<f64> = lambdas.iter().map(|&l| h_deviation(p, l, d0)).collect();
    loglog_slope(lambdas, &dev).ok_or_else(|| YmbError::DegenerateFit("non-positive deviation".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::poisson::{laplacian_residual, poisson_extend, probe_points};

    fn max_diff(a: &Form1, b: &Form1) -> f64 {
        (0..4)
            .map(|j| (a[j] - b[j]).dot(a[j] - b[j]).sqrt())
            .fold(0.0, f64::max)
    }

    #[test]
    fn hp_is_harmonic_with_the_right_trace() {
        for p in [[0.0; 4], [0.3, 0.0, 0.0, 0.0], [0.2, -0.3, 0.1, 0.4]] {
            let h = HpField { p };
            assert!(laplacian_residual(&h, &probe_points(0.95)) < 1e-10);
            let rule = S3Rule::new(3);
            let b = h_p_boundary(&rule, &p);
            for (z, v) in rule.dirs.iter().zip(&b.values) {
                let y = Quat::new(z[0] - p[0], z[1] - p[1], z[2] - p[2], z[3] - p[3]);
                let r4 = y.norm_sq() * y.norm_sq();
                let exact: Form1 = std::array::from_fn(|j| (y.conj() * Quat::basis(j)).im().scalef(1.0 / r4));
                assert!(max_diff(v, &exact) < 1e-13);
            }
        }
    }

    #[test]
    fn hp_boundary_examples() {
        let rule = S3Rule::new(3);
        let b = h_p_boundary(&rule, &[0.0; 4]);
        for (z, v) in rule.dirs.iter().zip(&b.values) {
            let exact: Form1 = std::array::from_fn(|j| (Quat::from_vec(*z).conj() * Quat::basis(j)).im());
            assert!(max_diff(v, &exact) < 1e-15);
            let m = z.map(|c| -c);
            let w = HpField { p: [0.0; 4] }.value(&m);
            for j in 0..4 {
                let s = w[j] + v[j];
                assert!(s.dot(s) < 1e-28);
            }
        }
        // Along a ray towards the boundary the supremum grows like dist⁻³.
        let sup = |d: f64| {
            let p = [1.0 - d, 0.0, 0.0, 0.0];
            h_p_boundary(&rule, &p).sup_norm().max(
                HpField { p }
                    .value(&[1.0, 0.0, 0.0, 0.0])
                    .iter()
                    .map(|q| q.dot(*q))
                    .sum::<f64>()
                    .sqrt(),
            )
        };
        let ds = [0.1, 0.05, 0.025];
        let v: Vec<f64> = ds.iter().map(|&d| sup(d)).collect();
        let s = loglog_slope(&ds, &v).unwrap();
        assert!((s + 3.0).abs() < 0.05, "{s}");
    }

    #[test]
    fn hlp_is_harmonic_and_matches_instanton_on_sphere() {
        let rule = S3Rule::new(4);
        for (p, l) in [
            ([0.0; 4], 0.1),
            ([0.3, 0.0, 0.0, 0.0], 0.2),
            ([0.2, -0.3, 0.1, 0.4], 0.05),
        ] {
            let h = HLambdaP::new(p, l);
            assert!(laplacian_residual(&h, &probe_points(0.95)) < 1e-9);
            let b = h_lambda_p_boundary(&rule, l, &p).unwrap();
            for (z, v) in rule.dirs.iter().zip(&b.values) {
                assert!(max_diff(&h.value(z), v) < 1e-12);
            }
        }
    }

    #[test]
    fn hlp_agrees_with_poisson_extension() {
        let p = [0.2, 0.1, -0.1, 0.15];
        let rule = S3Rule::new(24);
        let pe = poisson_extend(&h_lambda_p_boundary(&rule, 0.1, &p).unwrap(), 0.05);
        let h = HLambdaP::new(p, 0.1);
        for x in probe_points(0.8) {
            assert!(max_diff(&pe.field.eval_checked(&x).unwrap(), &h.value(&x)) < 1e-10);
        }
    }

    #[test]
    fn hp_agrees_with_poisson_extension() {
        let p = [0.3, 0.0, 0.0, 0.0];
        let rule = S3Rule::new(24);
        let pe = poisson_extend(&h_p_boundary(&rule, &p), 0.05);
        for x in probe_points(0.8) {
            assert!(max_diff(&pe.field.value(&x), &HpField { p }.value(&x)) < 1e-9);
        }
    }

    #[test]
    fn leading_term_is_lambda_squared_hp() {
        let rule = S3Rule::new(4);
        let p = [0.0; 4];
        let b = h_lambda_p_boundary(&rule, 0.1, &p).unwrap();
        let hp = h_p_boundary(&rule, &p);
        let sup = b
            .values
            .iter()
            .zip(&hp.values)
            .map(|(u, v)| {
                (0..4)
                    .map(|j| (u[j] - v[j].scalef(0.01)).dot(u[j] - v[j].scalef(0.01)))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        // On |x| = 1 the difference is λ⁴|Im(x̄dx)|/(1 + λ²) exactly.
        assert!((sup - 1e-4 * 3f64.sqrt() / 1.01).abs() < 1e-15);
    }

    #[test]
    fn h_scaling_slope() {
        let ls = [0.05, 0.07, 0.1, 0.14, 0.2];
        for p in [[0.3, 0.0, 0.0, 0.0], [0.0; 4]] {
            let s = check_h_scaling(&p, &ls, 0.5).unwrap();
            assert!((3.7..=4.3).contains(&s), "{s}");
        }
        assert!(check_h_scaling(&[0.0; 4], &[0.1], 0.5).is_err());
        assert!(check_h_scaling(&[0.0; 4], &[0.1, 0.2], 0.5).is_err());
    }
}
