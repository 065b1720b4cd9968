use crate::algebra::ImQuat;
use crate::error::{Result, YmbError};
use crate::fields::P4;

/// Uniform Cartesian grid in ℝ⁴, nodes in lexicographic order (axis 3 fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct CartesianGrid {
    pub origin: P4,
    pub h: f64,
    pub n: [usize; 4],
}

impl CartesianGrid {
    pub fn new(origin: P4, h: f64, n: [usize; 4]) -> Self {
        CartesianGrid { origin, h, n }
    }

    /// A cube `[-half, half]⁴` with `m` nodes per axis.
    pub fn cube(half: f64, m: usize) -> Self {
        let h = 2.0 * half / (m as f64 - 1.0);
        CartesianGrid::new([-half; 4], h, [m; 4])
    }

    /// The grid with `k` layers removed on every side.
    pub fn shrink(&self, k: usize) -> CartesianGrid {
        CartesianGrid::new(
            self.origin.map(|o| o + self.h * k as f64),
            self.h,
            self.n.map(|m| m - 2 * k),
        )
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, m: [usize; 4]) -> usize {
        ((m[0] * self.n[1] + m[1]) * self.n[2] + m[2]) * self.n[3] + m[3]
    }

    pub fn multi(&self, mut i: usize) -> [usize; 4] {
        let mut m = [0; 4];
        for a in (0..4).rev() {
            m[a] = i % self.n[a];
            i /= self.n[a];
        }
        m
    }

    pub fn point(&self, i: usize) -> P4 {
        let m = self.multi(i);
        std::array::from_fn(|a| self.origin[a] + self.h * m[a] as f64)
    }

    pub fn nodes(&self) -> Vec<P4> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Whether the node has `order / 2` neighbors on each side along every axis.
    pub fn stencil_fits(&self, node: usize, order: usize) -> bool {
        let half = order / 2;
        let m = self.multi(node);
        (0..4).all(|a| m[a] >= half && m[a] + half < self.n[a])
    }

    /// Centered finite-difference derivatives `∂ᵢ` of every component at `node`.
    pub fn derivative<const N: usize>(
        &self,
        values: &[[ImQuat; N]],
        node: usize,
        order: usize,
    ) -> Result<[[ImQuat; N]; 4]> {
        let half = order / 2;
        if !self.stencil_fits(node, order) {
            return Err(YmbError::StencilUnderflow { node, needed: half });
        }
        let m = self.multi(node);
        let coeffs: &[(isize, f64)] = match order {
            2 => &[(1, 0.5), (-1, -0.5)],
            4 => &[(2, -1.0 / 12.0), (1, 8.0 / 12.0), (-1, -8.0 / 12.0), (-2, 1.0 / 12.0)],
            _ => return Err(YmbError::InvalidParams(format!("stencil order {order}"))),
        };
        let mut out = [[ImQuat::zero(); N]; 4];
        for (a, row) in out.iter_mut().enumerate() {
            for &(off, c) in coeffs {
                let mut mm = m;
                mm[a] = (m[a] as isize + off) as usize;
                let v = &values[self.index(mm)];
                for k in 0..N {
                    row[k] = row[k] + v[k].scalef(c / self.h);
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::Real;
    use crate::fields::{exterior_d, exterior_d_interior, Deriv, Field1, Form1, LieForm1, LieForm2, PAIRS};

    #[test]
    fn index_round_trip() {
        let g = CartesianGrid::new([0.0; 4], 0.1, [3, 4, 5, 6]);
        for i in 0..g.len() {
            assert_eq!(g.index(g.multi(i)), i);
        }
    }

    #[test]
    fn boundary_node_underflows() {
        let g = CartesianGrid::cube(1.0, 5);
        let vals = vec![[ImQuat::<f64>::zero(); 4]; g.len()];
        let err = g.derivative(&vals, 0, 2).unwrap_err();
        assert!(matches!(err, YmbError::StencilUnderflow { .. }));
        let center = g.index([2, 2, 2, 2]);
        assert!(g.derivative(&vals, center, 4).is_ok());
        assert!(g.derivative(&vals, g.index([1, 2, 2, 2]), 4).is_err());
    }

    struct Wavy;
    impl Field1 for Wavy {
        fn eval<S: Real>(&self, x: &[S; 4]) -> Form1<S> {
            let s = (x[0] * 1.3 + x[2] * 0.7).sin() * x[3].cos();
            let t = (x[1] * x[0]).exp();
            [
                ImQuat::new(s, t, s * t),
                ImQuat::new(t, s * 0.5, x[3]),
                ImQuat::new(x[2] * s, t, s),
                ImQuat::new(s - t, s * s, t * 0.1),
            ]
        }
    }

    fn sampled(m: usize, order: usize) -> (CartesianGrid, LieForm1) {
        let g = CartesianGrid::cube(0.5, m);
        let vals = g.nodes().iter().map(|x| Wavy.value(x)).collect();
        let f = LieForm1::sampled(g.clone(), order, vals).unwrap();
        (g, f)
    }

    #[test]
    fn stencils_converge_at_their_order() {
        for order in [2usize, 4] {
            let mut errs = vec![];
            for m in [9usize, 17] {
                let (g, f) = sampled(m, order);
                let center = g.index([m / 2; 4]);
                let d = f.derivs_at(center).unwrap();
                let exact = Wavy.jet(&g.point(center)).d;
                let mut e: f64 = 0.0;
                for i in 0..4 {
                    for c in 0..4 {
                        let q = d[i][c] - exact[i][c];
                        e = e.max(q.dot(q).sqrt());
                    }
                }
                errs.push(e);
            }
            let rate = (errs[0] / errs[1]).log2();
            assert!(rate > order as f64 - 0.3, "order {order}: rate {rate}");
        }
    }

    /// `d∘d` as a 3-form on interior nodes; components `(i, j, k)` with `i < j < k`.
    fn dd_max(m: usize, order: usize) -> f64 {
        let (_, f) = sampled(m, order);
        assert!(exterior_d(&f).is_err());
        let df: LieForm2 = exterior_d_interior(&f).unwrap();
        let Deriv::Stencil { grid: sub, .. } = &df.deriv else {
            panic!()
        };
        let mut worst: f64 = 0.0;
        for n in 0..sub.len() {
            if !sub.stencil_fits(n, order) {
                continue;
            }
            let d = df.derivs_at(n).unwrap();
            for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
                let idx = |a: usize, b: usize| PAIRS.iter().position(|&p| p == (a, b)).unwrap();
                let t = d[i][idx(j, k)] - d[j][idx(i, k)] + d[k][idx(i, j)];
                worst = worst.max(t.dot(t).sqrt());
            }
        }
        worst
    }

    #[test]
    fn d_squared_vanishes_at_stencil_order() {
        for order in [2usize, 4] {
            let coarse = dd_max(9, order);
            let fine = dd_max(17, order);
            let h = [1.0 / 8.0, 1.0 / 16.0];
            assert!(coarse <= 10.0 * h[0].powi(order as i32) && fine <= 10.0 * h[1].powi(order as i32));
        }
    }
}
