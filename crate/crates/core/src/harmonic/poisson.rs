use super::boundary::BoundaryForm;
use crate::ad::{Real, D2};
use crate::algebra::ImQuat;
use crate::error::{Result, YmbError};
use crate::fields::{Field1, Form1, P4};
use std::f64::consts::PI;

/// Harmonic extension of S³ data through the truncated Poisson kernel
/// `K_L(x, ζ) = Σ_{ℓ≤L} (ℓ+1) |x|^ℓ U_ℓ(x̂·ζ) / 2π²`, integrated with the
/// data's own S³ rule. Polynomial data of degree `≤ L` is reproduced exactly.
#[derive(Clone, Debug)]
pub struct PoissonExtension {
    pub boundary: BoundaryForm,
    pub degree: usize,
    pub delta_near: f64,
}

impl PoissonExtension {
    pub fn kernel<S: Real>(&self, x: &[S; 4], zeta: &P4) -> S {
        let s = x[0] * zeta[0] + x[1] * zeta[1] + x[2] * zeta[2] + x[3] * zeta[3];
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] + x[3] * x[3];
        let mut prev = S::one();
        let mut acc = S::one();
        if self.degree == 0 {
            return acc * (0.5 / (PI * PI));
        }
        let mut cur = s * 2.0;
        acc += cur * 2.0;
        for l in 1..self.degree {
            let next = s * cur * 2.0 - r2 * prev;
            prev = cur;
            cur = next;
            acc += cur * (l as f64 + 2.0);
        }
        acc * (0.5 / (PI * PI))
    }

    /// Value with the near-boundary guard applied.
    pub fn eval_checked(&self, x: &P4) -> Result<Form1> {
        self.guard(x)?;
        Ok(self.value(x))
    }

    pub fn guard(&self, x: &P4) -> Result<()> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r >= 1.0 - self.delta_near {
            return Err(YmbError::NearBoundary {
                radius: r,
                cutoff: 1.0 - self.delta_near,
            });
        }
        Ok(())
    }
}

impl Field1 for PoissonExtension {
    fn eval<S: Real>(&self, x: &[S; 4]) -> Form1<S> {
        let mut acc = [ImQuat::<S>::zero(); 4];
        for ((z, w), a) in self
            .boundary
            .rule
            .dirs
            .iter()
            .zip(&self.boundary.rule.weights)
            .zip(&self.boundary.values)
        {
            let k = self.kernel(x, z) * *w;
            for j in 0..4 {
                acc[j] = acc[j] + a[j].map(|c| k * c);
            }
        }
        acc
    }
}

/// A harmonic 1-form with the data it extends and its measured Laplacian residual.
#[derive(Clone, Debug)]
pub struct HarmonicField<F> {
    pub field: F,
    pub boundary: BoundaryForm,
    pub residual: f64,
}

/// Largest `|Δ h_j|` over the probe points, from exact second derivatives.
pub fn laplacian_residual<F: Field1>(f: &F, probes: &[P4]) -> f64 {
    probes
        .iter()
        .map(|x| {
            let v = f.eval(&D2::point(x));
            let mut worst: f64 = 0.0;
            for c in v {
                let lap = c.map(|s: D2| (0..4).map(|i| s.h[i][i]).sum::<f64>());
                worst = worst.max(lap.dot(lap).sqrt());
            }
            worst
        })
        .fold(0.0, f64::max)
}

/// Interior probe points `|x| ≤ radius` on a few shells.
pub fn probe_points(radius: f64) -> Vec<P4> {
    let rule = crate::fields::S3Rule::new(2);
    let mut out = vec![[0.0; 4]];
    for k in 1..=3 {
        let r = radius * k as f64 / 3.0;
        out.extend(rule.dirs.iter().map(|d| d.map(|c| c * r)));
    }
    out
}

pub fn poisson_extend(bdry: &BoundaryForm, delta_near: f64) -> HarmonicField<PoissonExtension> {
    let field = PoissonExtension {
        boundary: bdry.clone(),
        degree: bdry.rule.l,
        delta_near,
    };
    let residual = laplacian_residual(&field, &probe_points(0.8));
    HarmonicField {
        field,
        boundary: bdry.clone(),
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Quat;
    use crate::fields::S3Rule;
    use crate::harmonic::h_p_boundary;

    fn max_diff(a: &Form1, b: &Form1) -> f64 {
        (0..4)
            .map(|j| (a[j] - b[j]).dot(a[j] - b[j]).sqrt())
            .fold(0.0, f64::max)
    }

    #[test]
    fn constant_data_gives_constant_field() {
        let rule = S3Rule::new(4);
        let c: Form1 = [
            ImQuat::new(1.0, 2.0, 3.0),
            ImQuat::zero(),
            ImQuat::basis(2),
            ImQuat::new(-1.0, 0.5, 0.0),
        ];
        let h = poisson_extend(&BoundaryForm::from_fn(&rule, |_| c), 0.05);
        for x in probe_points(0.9) {
            assert!(max_diff(&h.field.value(&x), &c) < 1e-12);
        }
        assert!(h.residual < 1e-10);
    }

    #[test]
    fn mean_value_at_origin() {
        let rule = S3Rule::new(6);
        let b = BoundaryForm::from_fn(&rule, |z| {
            std::array::from_fn(|j| ImQuat::new((z[j] * 3.0).sin(), z[0] * z[1] * z[2], (z[3] + z[j]).exp()))
        });
        let h = poisson_extend(&b, 0.05);
        let mut mean = [ImQuat::zero(); 4];
        let area: f64 = rule.weights.iter().sum();
        for (w, a) in rule.weights.iter().zip(&b.values) {
            for j in 0..4 {
                mean[j] = mean[j] + a[j].scalef(w / area);
            }
        }
        assert!(max_diff(&h.field.value(&[0.0; 4]), &mean) < 1e-13);
    }

    #[test]
    fn degree_one_data_is_reproduced() {
        let rule = S3Rule::new(5);
        let h = poisson_extend(&h_p_boundary(&rule, &[0.0; 4]), 0.05);
        for x in probe_points(0.8) {
            let xb = Quat::from_vec(x).conj();
            let exact: Form1 = std::array::from_fn(|j| (xb * Quat::basis(j)).im());
            assert!(max_diff(&h.field.eval_checked(&x).unwrap(), &exact) < 1e-12);
        }
    }

    #[test]
    fn degree_two_harmonic_polynomials_are_reproduced() {
        let rule = S3Rule::new(4);
        let f = |x: &P4| -> Form1 {
            [
                ImQuat::new(x[0] * x[1], x[0] * x[0] - x[2] * x[2], 1.0),
                ImQuat::new(x[3], x[1] * x[2], 0.0),
                ImQuat::zero(),
                ImQuat::new(x[2] * x[3] - x[0], 0.0, x[1] * x[1] - x[3] * x[3]),
            ]
        };
        let h = poisson_extend(&BoundaryForm::from_fn(&rule, f), 0.05);
        for x in probe_points(0.8) {
            assert!(max_diff(&h.field.value(&x), &f(&x)) < 1e-8);
        }
    }

    #[test]
    fn maximum_principle() {
        let rule = S3Rule::new(12);
        let b = h_p_boundary(&rule, &[0.3, 0.0, 0.1, 0.0]);
        let h = poisson_extend(&b, 0.05);
        let sup_b: f64 = b
            .values
            .iter()
            .flat_map(|a| a.iter().flat_map(|q| q.arr()))
            .fold(0.0, |m, v: f64| m.max(v.abs()));
        for x in probe_points(0.9) {
            for q in h.field.value(&x) {
                for v in q.arr() {
                    assert!(v.abs() <= sup_b + 1e-8);
                }
            }
        }
    }

    #[test]
    fn near_boundary_is_rejected() {
        let rule = S3Rule::new(2);
        let h = poisson_extend(&h_p_boundary(&rule, &[0.0; 4]), 0.05);
        let err = h.field.eval_checked(&[0.96, 0.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, YmbError::NearBoundary { .. }));
        assert!(h.field.eval_checked(&[0.94, 0.0, 0.0, 0.0]).is_ok());
    }
}
