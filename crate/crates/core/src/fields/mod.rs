//! Im ℍ-valued 1- and 2-forms on ℝ⁴, sampled at quadrature nodes or on a
//! Cartesian grid, with exterior calculus, curvature and L² pairings.
//!
//! 2-form components are ordered `01, 02, 03, 12, 13, 23`. Orientation is
//! `dx⁰∧dx¹∧dx²∧dx³ > 0`.

pub mod cache;
pub mod grid;
pub mod quadrature;

use crate::ad::{Real, D1, D2};
use crate::algebra::{bracket, inner, ImQuat};
use crate::error::{Result, YmbError};
use crate::numerics::{integrate, par_range};
pub use grid::CartesianGrid;
pub use quadrature::{ChartQuadrature, S3Rule};

pub type P4 = [f64; 4];
pub type Form1<S = f64> = [ImQuat<S>; 4];
pub type Form2<S = f64> = [ImQuat<S>; 6];

pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Index into the 2-form component list together with the orientation sign.
pub fn pair_index(j: usize, k: usize) -> Option<(usize, f64)> {
    if j == k {
        return None;
    }
    let (a, b, s) = if j < k { (j, k, 1.0) } else { (k, j, -1.0) };
    PAIRS.iter().position(|&p| p == (a, b)).map(|i| (i, s))
}

/// A closed-form Im ℍ-valued 1-form field on (part of) ℝ⁴.
pub trait Field1: Sync {
    fn eval<S: Real>(&self, x: &[S; 4]) -> Form1<S>;

    fn value(&self, x: &P4) -> Form1 {
        self.eval(x)
    }
    fn jet(&self, x: &P4) -> Jet1 {
        Jet1::from_d1(&self.eval(&D1::point(x)))
    }
}

/// A closed-form Im ℍ-valued 2-form field.
pub trait Field2: Sync {
    fn eval<S: Real>(&self, x: &[S; 4]) -> Form2<S>;

    fn jet(&self, x: &P4) -> Jet2 {
        let f = self.eval(&D1::point(x));
        let mut j = Jet2::default();
        for c in 0..6 {
            j.v[c] = f[c].value();
            for i in 0..4 {
                j.d[i][c] = f[c].map(|s: D1| s.g[i]);
            }
        }
        j
    }
}

/// Value and first derivatives of a 1-form; `d[i][j] = ∂ᵢ A_j`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet1 {
    pub v: Form1,
    pub d: [Form1; 4],
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub v: Form2,
    pub d: [Form2; 4],
}

impl Jet1 {
    pub fn from_d1(f: &Form1<D1>) -> Jet1 {
        let mut j = Jet1::default();
        for c in 0..4 {
            j.v[c] = f[c].value();
            for i in 0..4 {
                j.d[i][c] = f[c].map(|s: D1| s.g[i]);
            }
        }
        j
    }
    /// Reassemble as first-order scalars.
    pub fn to_d1(&self) -> Form1<D1> {
        let mut out = [ImQuat::<D1>::zero(); 4];
        for c in 0..4 {
            let v = self.v[c].arr();
            let mut comps = [D1::default(); 3];
            for (a, comp) in comps.iter_mut().enumerate() {
                comp.v = v[a];
                for i in 0..4 {
                    comp.g[i] = self.d[i][c].arr()[a];
                }
            }
            out[c] = ImQuat::from_arr(comps);
        }
        out
    }
    pub fn add(&self, o: &Jet1) -> Jet1 {
        self.lin(1.0, o, 1.0)
    }
    pub fn sub(&self, o: &Jet1) -> Jet1 {
        self.lin(1.0, o, -1.0)
    }
    pub fn scale(&self, s: f64) -> Jet1 {
        self.lin(s, &Jet1::default(), 0.0)
    }
    pub fn lin(&self, a: f64, o: &Jet1, b: f64) -> Jet1 {
        let mut r = Jet1::default();
        for c in 0..4 {
            r.v[c] = self.v[c].scalef(a) + o.v[c].scalef(b);
            for i in 0..4 {
                r.d[i][c] = self.d[i][c].scalef(a) + o.d[i][c].scalef(b);
            }
        }
        r
    }
}

/// Jet of a 1-form from second-order scalars: value and first derivatives.
pub fn jet_from_d2(f: &Form1<D2>) -> Jet1 {
    Jet1::from_d1(&f.map(|q| q.map(|s: D2| s.d1())))
}

/// How derivatives of a sampled form are obtained.
#[derive(Clone, Debug)]
pub enum Deriv<const N: usize> {
    /// Exact derivatives supplied by a closed-form evaluator; `d[node][i]` is `∂ᵢ`.
    Analytic(Vec<[[ImQuat; N]; 4]>),
    /// Centered finite differences of the given order on a Cartesian grid.
    Stencil { grid: CartesianGrid, order: usize },
    /// Values only.
    None,
}

/// An Im ℍ-valued form with `N` components per node.
#[derive(Clone, Debug)]
pub struct LieForm<const N: usize> {
    pub values: Vec<[ImQuat; N]>,
    pub deriv: Deriv<N>,
}

pub type LieForm1 = LieForm<4>;
pub type LieForm2 = LieForm<6>;

impl<const N: usize> LieForm<N> {
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn zeros(n: usize) -> Self {
        LieForm {
            values: vec![[ImQuat::zero(); N]; n],
            deriv: Deriv::Analytic(vec![[[ImQuat::zero(); N]; 4]; n]),
        }
    }
    pub fn values_only(values: Vec<[ImQuat; N]>) -> Self {
        LieForm {
            values,
            deriv: Deriv::None,
        }
    }
    pub fn sampled(grid: CartesianGrid, order: usize, values: Vec<[ImQuat; N]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(YmbError::GridMismatch(values.len(), grid.len()));
        }
        if order != 2 && order != 4 {
            return Err(YmbError::InvalidParams(format!("stencil order {order}")));
        }
        Ok(LieForm {
            values,
            deriv: Deriv::Stencil { grid, order },
        })
    }
    pub fn is_closed_form(&self) -> bool {
        matches!(self.deriv, Deriv::Analytic(_))
    }

    /// Derivatives `∂ᵢ` of every component at one node.
    pub fn derivs_at(&self, node: usize) -> Result<[[ImQuat; N]; 4]> {
        match &self.deriv {
            Deriv::Analytic(d) => Ok(d[node]),
            Deriv::Stencil { grid, order } => grid.derivative(&self.values, node, *order),
            Deriv::None => Err(YmbError::Missing("derivatives of a values-only form".into())),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.len() != n {
            Err(YmbError::GridMismatch(self.len(), n))
        } else {
            Ok(())
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.lin(1.0, o, 1.0)
    }
    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.lin(1.0, o, -1.0)
    }
    pub fn scale(&self, s: f64) -> Self {
        LieForm {
            values: self.values.iter().map(|v| v.map(|q| q.scalef(s))).collect(),
            deriv: match &self.deriv {
                Deriv::Analytic(d) => Deriv::Analytic(d.iter().map(|di| di.map(|c| c.map(|q| q.scalef(s)))).collect()),
                other => other.clone(),
            },
        }
    }
    /// `a·self + b·o`; derivatives are kept when both operands carry compatible ones.
    pub fn lin(&self, a: f64, o: &Self, b: f64) -> Result<Self> {
        o.check(self.len())?;
        let values = self
            .values
            .iter()
            .zip(&o.values)
            .map(|(u, v)| std::array::from_fn(|c| u[c].scalef(a) + v[c].scalef(b)))
            .collect();
        let deriv = match (&self.deriv, &o.deriv) {
            (Deriv::Analytic(du), Deriv::Analytic(dv)) => Deriv::Analytic(
                du.iter()
                    .zip(dv)
                    .map(|(x, y)| {
                        std::array::from_fn(|i| std::array::from_fn(|c| x[i][c].scalef(a) + y[i][c].scalef(b)))
                    })
                    .collect(),
            ),
            (Deriv::Stencil { grid, order }, Deriv::Stencil { .. }) => Deriv::Stencil {
                grid: grid.clone(),
                order: *order,
            },
            _ => Deriv::None,
        };
        Ok(LieForm { values, deriv })
    }
}

impl LieForm1 {
    /// Sample a closed-form field at the nodes, keeping exact derivatives.
    pub fn from_field<F: Field1>(field: &F, nodes: &[P4]) -> Self {
        let jets = par_range(nodes.len(), |i| field.jet(&nodes[i]));
        Self::from_jets(&jets)
    }
    pub fn from_jets(jets: &[Jet1]) -> Self {
        LieForm {
            values: jets.iter().map(|j| j.v).collect(),
            deriv: Deriv::Analytic(jets.iter().map(|j| j.d).collect()),
        }
    }
    pub fn jet(&self, node: usize) -> Result<Jet1> {
        Ok(Jet1 {
            v: self.values[node],
            d: self.derivs_at(node)?,
        })
    }
}

impl LieForm2 {
    pub fn from_field<F: Field2>(field: &F, nodes: &[P4]) -> Self {
        let jets = par_range(nodes.len(), |i| field.jet(&nodes[i]));
        LieForm {
            values: jets.iter().map(|j| j.v).collect(),
            deriv: Deriv::Analytic(jets.iter().map(|j| j.d).collect()),
        }
    }
}

// ---- pointwise operations ----

pub fn d_pointwise<S: Real>(d: &[Form1<S>; 4]) -> Form2<S> {
    PAIRS.map(|(j, k)| d[j][k] - d[k][j])
}

pub fn bracket_wedge<S: Real>(a: &Form1<S>, b: &Form1<S>) -> Form2<S> {
    PAIRS.map(|(j, k)| bracket(a[j], b[k]) - bracket(a[k], b[j]))
}

pub fn star2<S: Real>(w: &Form2<S>) -> Form2<S> {
    [w[5], -w[4], w[3], w[2], -w[1], w[0]]
}

pub fn asd<S: Real>(w: &Form2<S>) -> Form2<S> {
    let s = star2(w);
    std::array::from_fn(|c| (w[c] - s[c]).scalef(0.5))
}

pub fn sd<S: Real>(w: &Form2<S>) -> Form2<S> {
    let s = star2(w);
    std::array::from_fn(|c| (w[c] + s[c]).scalef(0.5))
}

/// `F = dA + (ε/2)[A∧A]` from a jet.
pub fn curvature_jet(j: &Jet1, eps: f64) -> Form2 {
    let da = d_pointwise(&j.d);
    let aa = bracket_wedge(&j.v, &j.v);
    std::array::from_fn(|c| da[c] + aa[c].scalef(0.5 * eps))
}

/// `d_A a = da + ε[A∧a]`.
pub fn covariant_d_jet(a_val: &Form1, eps: f64, b: &Jet1) -> Form2 {
    let db = d_pointwise(&b.d);
    let ab = bracket_wedge(a_val, &b.v);
    std::array::from_fn(|c| db[c] + ab[c].scalef(eps))
}

/// `d_A* w`, the formal L² adjoint of `d_A` on 1-forms:
/// `(d_A* w)_k = −Σⱼ (∂ⱼ w_{jk} + ε[A_j, w_{jk}])`.
pub fn codiff_pointwise(a_val: &Form1, eps: f64, w: &Form2, dw: &[Form2; 4]) -> Form1 {
    let mut out = [ImQuat::zero(); 4];
    for (k, o) in out.iter_mut().enumerate() {
        for j in 0..4 {
            if let Some((idx, s)) = pair_index(j, k) {
                let t = dw[j][idx] + bracket(a_val[j], w[idx]).scalef(eps);
                *o = *o - t.scalef(s);
            }
        }
    }
    out
}

/// `d_A* a = −Σⱼ (∂ⱼ a_j + ε[A_j, a_j])` for a 1-form.
pub fn codiff1_pointwise(a_val: &Form1, eps: f64, b: &Jet1) -> ImQuat {
    let mut s = ImQuat::zero();
    for j in 0..4 {
        s = s - b.d[j][j] - bracket(a_val[j], b.v[j]).scalef(eps);
    }
    s
}

/// Covariant gradient `(∇_A a)_{ij} = ∂ᵢ a_j + ε[Aᵢ, a_j]`.
pub fn cov_grad(a_val: &Form1, eps: f64, b: &Jet1) -> [Form1; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| b.d[i][j] + bracket(a_val[i], b.v[j]).scalef(eps)))
}

pub fn dot_n<const N: usize>(u: &[ImQuat; N], v: &[ImQuat; N]) -> f64 {
    let mut s = 0.0;
    for c in 0..N {
        s += inner(u[c], v[c]);
    }
    s
}

pub fn norm_sq_n<const N: usize>(u: &[ImQuat; N]) -> f64 {
    dot_n(u, u)
}

/// The `dx⁰¹²³` coefficient of `Tr(F∧F)` with `Tr(XY) = −inner(X, Y)`.
pub fn chern_pointwise(f: &Form2) -> f64 {
    -2.0 * (inner(f[0], f[5]) - inner(f[1], f[4]) + inner(f[2], f[3]))
}

// ---- operations on sampled forms ----

pub fn exterior_d(a: &LieForm1) -> Result<LieForm2> {
    let vals: Vec<Result<Form2>> = par_range(a.len(), |n| Ok(d_pointwise(&a.derivs_at(n)?)));
    let values = vals.into_iter().collect::<Result<Vec<_>>>()?;
    let deriv = match &a.deriv {
        Deriv::Stencil { grid, order } => Deriv::Stencil {
            grid: grid.clone(),
            order: *order,
        },
        _ => Deriv::None,
    };
    Ok(LieForm { values, deriv })
}

/// Exterior derivative of a grid-sampled 1-form on the sub-grid where the
/// stencil fits; the result lives on that sub-grid.
pub fn exterior_d_interior(a: &LieForm1) -> Result<LieForm2> {
    let Deriv::Stencil { grid, order } = &a.deriv else {
        return exterior_d(a);
    };
    let half = order / 2;
    if grid.n.iter().any(|&m| m < 2 * half + 1) {
        return Err(YmbError::StencilUnderflow { node: 0, needed: half });
    }
    let sub = grid.shrink(half);
    let values: Vec<Result<Form2>> = par_range(sub.len(), |i| {
        let m = sub.multi(i).map(|v| v + half);
        Ok(d_pointwise(&a.derivs_at(grid.index(m))?))
    });
    Ok(LieForm {
        values: values.into_iter().collect::<Result<Vec<_>>>()?,
        deriv: Deriv::Stencil {
            grid: sub,
            order: *order,
        },
    })
}

pub fn hodge_star2(w: &LieForm2) -> LieForm2 {
    map2(w, star2)
}

pub fn asd_project(w: &LieForm2) -> LieForm2 {
    map2(w, asd)
}

fn map2(w: &LieForm2, f: impl Fn(&Form2) -> Form2) -> LieForm2 {
    LieForm {
        values: w.values.iter().map(&f).collect(),
        deriv: match &w.deriv {
            Deriv::Analytic(d) => Deriv::Analytic(d.iter().map(|di| di.map(|c| f(&c))).collect()),
            other => other.clone(),
        },
    }
}

pub fn bracket_wedge_11(a: &LieForm1, b: &LieForm1) -> Result<LieForm2> {
    b.check(a.len())?;
    Ok(LieForm::values_only(
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| bracket_wedge(x, y))
            .collect(),
    ))
}

pub fn curvature(a: &LieForm1, eps: f64) -> Result<LieForm2> {
    let da = exterior_d(a)?;
    let aa = bracket_wedge_11(a, a)?;
    Ok(LieForm::values_only(
        da.values
            .iter()
            .zip(&aa.values)
            .map(|(x, y)| std::array::from_fn(|c| x[c] + y[c].scalef(0.5 * eps)))
            .collect(),
    ))
}

pub fn covariant_d1(a: &LieForm1, eps: f64, b: &LieForm1) -> Result<LieForm2> {
    b.check(a.len())?;
    let db = exterior_d(b)?;
    let ab = bracket_wedge_11(a, b)?;
    Ok(LieForm::values_only(
        db.values
            .iter()
            .zip(&ab.values)
            .map(|(x, y)| std::array::from_fn(|c| x[c] + y[c].scalef(eps)))
            .collect(),
    ))
}

pub fn codifferential2(a: &LieForm1, eps: f64, w: &LieForm2) -> Result<LieForm1> {
    w.check(a.len())?;
    let out: Vec<Result<Form1>> = par_range(w.len(), |n| {
        let dw = w.derivs_at(n)?;
        Ok(codiff_pointwise(&a.values[n], eps, &w.values[n], &dw))
    });
    Ok(LieForm::values_only(out.into_iter().collect::<Result<Vec<_>>>()?))
}

pub fn l2_inner<const N: usize>(u: &LieForm<N>, v: &LieForm<N>, quad: &ChartQuadrature) -> Result<f64> {
    u.check(quad.len())?;
    v.check(quad.len())?;
    Ok(integrate(&quad.weights, |i| dot_n(&u.values[i], &v.values[i])))
}

/// `‖∇_A a‖_p + ‖a‖_p` with the componentwise covariant gradient; `p = 2`.
pub fn sobolev_norm(a: &LieForm1, eps: f64, b: &LieForm1, p: f64, quad: &ChartQuadrature) -> Result<f64> {
    if p != 2.0 {
        return Err(YmbError::InvalidParams(format!("only p = 2 is supported, got {p}")));
    }
    a.check(quad.len())?;
    b.check(quad.len())?;
    let grads: Vec<Result<f64>> = par_range(b.len(), |n| {
        let g = cov_grad(&a.values[n], eps, &b.jet(n)?);
        Ok(g.iter().map(norm_sq_n).sum())
    });
    let grads = grads.into_iter().collect::<Result<Vec<_>>>()?;
    let g2 = integrate(&quad.weights, |i| grads[i]);
    let a2 = integrate(&quad.weights, |i| norm_sq_n(&b.values[i]));
    Ok(g2.sqrt() + a2.sqrt())
}

pub fn chern_density(f: &LieForm2) -> Vec<f64> {
    f.values.iter().map(chern_pointwise).collect()
}
