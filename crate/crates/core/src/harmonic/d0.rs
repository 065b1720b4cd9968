//! Galerkin solver for the linear boundary problem `d*dA = 0`, `ι*A = A₀`, and
//! the Picard iteration for the small solution of the Yang–Mills problem.
//!
//! Unknowns are `A = L + ω` with `L` a polynomial lift of the boundary data and
//! `ω` spanned, per Lie direction, by `(1 − |x|²) m(x) dxʲ` and `m(x) (x·dx)`
//! for monomials `m` of degree `≤ N`; both families have zero tangential trace.
//! The second family is restricted to `deg m ≥ N − 1`, which keeps the span
//! and removes the overlap `(1 − |x|²) q (x·dx)`.
//! The quadratic form is `∫ |dω|² + |d*ω|²`; the second term fixes the gauge
//! and forces `d*A = 0`, which does not change `dA`.

use super::boundary::BoundaryForm;
use super::poly::{eval_monomials, monomials, tangential, PolyCurl, PolyForm1};
use crate::ad::D1;
use crate::algebra::{inner, ImQuat};
use crate::error::{Result, YmbError};
use crate::fields::cache::{cache_dir, cache_key, CachedField};
use crate::fields::{
    bracket_wedge, codiff_pointwise, d_pointwise, norm_sq_n, pair_index, sobolev_norm, ChartQuadrature, Field1, Field2,
    LieForm1, LieForm2, S3Rule, P4, PAIRS,
};
use crate::numerics::{integrate, par_range};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct D0Grid {
    /// Largest monomial degree `N` in the correction basis.
    pub degree: usize,
    pub s3_l: usize,
    pub n_radial: usize,
    pub cg_max_iter: usize,
    pub cg_tol: f64,
}

impl Default for D0Grid {
    fn default() -> Self {
        D0Grid {
            degree: 4,
            s3_l: 6,
            n_radial: 8,
            cg_max_iter: 20000,
            cg_tol: 1e-13,
        }
    }
}

const BLOCK: usize = 64;

/// Correction basis, ball quadrature and the assembled stiffness matrix.
#[derive(Clone, Debug)]
pub struct GalerkinSpace {
    pub grid: D0Grid,
    pub monos: Vec<[u8; 4]>,
    /// Monomials used in the `m (x·dx)` family.
    pub radial: Vec<usize>,
    pub quad: ChartQuadrature,
    pub k: DMatrix<f64>,
    pub hash: String,
}

/// Per basis function: `dφ` (6 components) then `d*φ`, and the 4 values.
struct NodeFeatures {
    d: Vec<[f64; 7]>,
    v: Vec<[f64; 4]>,
}

impl GalerkinSpace {
    pub fn new(grid: D0Grid) -> Self {
        let monos = monomials(grid.degree);
        let radial = (0..monos.len())
            .filter(|&i| monos[i].iter().map(|&e| e as usize).sum::<usize>() + 1 >= grid.degree)
            .collect();
        let quad = ChartQuadrature::ball(grid.n_radial, &S3Rule::new(grid.s3_l));
        let mut h = Sha256::new();
        h.update(format!("galerkin:{}:{}:{}", grid.degree, grid.s3_l, grid.n_radial).as_bytes());
        let hash = format!("{:x}", h.finalize())[..16].to_string();
        let mut s = GalerkinSpace {
            grid,
            monos,
            radial,
            quad,
            k: DMatrix::zeros(0, 0),
            hash,
        };
        s.k = s.assemble();
        s
    }

    pub fn n_basis(&self) -> usize {
        4 * self.monos.len() + self.radial.len()
    }

    fn features(&self, x: &P4) -> NodeFeatures {
        let nm = self.monos.len();
        let mv = eval_monomials(&self.monos, self.grid.degree, &D1::point(x));
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let nb = self.n_basis();
        let mut d = vec![[0.0; 7]; nb];
        let mut v = vec![[0.0; 4]; nb];
        for (mi, m) in mv.iter().enumerate() {
            let g: [f64; 4] = std::array::from_fn(|k| -2.0 * x[k] * m.v + (1.0 - r2) * m.g[k]);
            for t in 0..4 {
                let b = t * nm + mi;
                for (c, &(k, l)) in PAIRS.iter().enumerate() {
                    let mut val = 0.0;
                    if l == t {
                        val += g[k];
                    }
                    if k == t {
                        val -= g[l];
                    }
                    d[b][c] = val;
                }
                d[b][6] = -g[t];
                v[b][t] = (1.0 - r2) * m.v;
            }
        }
        for (ri, &mi) in self.radial.iter().enumerate() {
            let m = &mv[mi];
            let b = 4 * nm + ri;
            let deg: u8 = self.monos[mi].iter().sum();
            for (c, &(k, l)) in PAIRS.iter().enumerate() {
                d[b][c] = m.g[k] * x[l] - m.g[l] * x[k];
            }
            d[b][6] = -(deg as f64 + 4.0) * m.v;
            v[b] = std::array::from_fn(|l| m.v * x[l]);
        }
        NodeFeatures { d, v }
    }

    fn blocks(&self) -> Vec<std::ops::Range<usize>> {
        let n = self.quad.len();
        (0..n.div_ceil(BLOCK))
            .map(|b| b * BLOCK..((b + 1) * BLOCK).min(n))
            .collect()
    }

    fn assemble(&self) -> DMatrix<f64> {
        let nb = self.n_basis();
        let blocks = self.blocks();
        let parts = par_range(blocks.len(), |bi| {
            let r = blocks[bi].clone();
            let mut m = DMatrix::<f64>::zeros(7 * r.len(), nb);
            for (row, n) in r.enumerate() {
                let f = self.features(&self.quad.nodes[n]);
                let sw = self.quad.weights[n].sqrt();
                for b in 0..nb {
                    for c in 0..7 {
                        m[(7 * row + c, b)] = sw * f.d[b][c];
                    }
                }
            }
            m.tr_mul(&m)
        });
        let mut k = DMatrix::zeros(nb, nb);
        for p in parts {
            k += p;
        }
        k
    }

    /// `∫ (G_d, dφ_b) + (G_v, φ_b)` for per-node real sources, per Lie direction.
    fn project<F>(&self, source: F) -> [DVector<f64>; 3]
    where
        F: Fn(&P4) -> [([f64; 7], [f64; 4]); 3] + Sync,
    {
        let nb = self.n_basis();
        let blocks = self.blocks();
        let parts = par_range(blocks.len(), |bi| {
            let mut acc = [DVector::zeros(nb), DVector::zeros(nb), DVector::zeros(nb)];
            for n in blocks[bi].clone() {
                let x = &self.quad.nodes[n];
                let w = self.quad.weights[n];
                let s = source(x);
                let f = self.features(x);
                for (c, (gd, gv)) in s.iter().enumerate() {
                    if gd.iter().chain(gv.iter()).all(|v| *v == 0.0) {
                        continue;
                    }
                    for b in 0..nb {
                        let mut t = 0.0;
                        for q in 0..7 {
                            t += gd[q] * f.d[b][q];
                        }
                        for q in 0..4 {
                            t += gv[q] * f.v[b][q];
                        }
                        acc[c][b] += w * t;
                    }
                }
            }
            acc
        });
        let mut out = [DVector::zeros(nb), DVector::zeros(nb), DVector::zeros(nb)];
        for p in parts {
            for c in 0..3 {
                out[c] += &p[c];
            }
        }
        out
    }

    /// The correction `Σ_b u_c[b] φ_b e_c` as a polynomial form of degree `N + 2`.
    pub fn to_poly(&self, u: &[DVector<f64>; 3]) -> PolyForm1 {
        let nm = self.monos.len();
        let mut p = PolyForm1::zeros(self.grid.degree + 2);
        let map = p.index_map();
        for (mi, e) in self.monos.iter().enumerate() {
            for c in 0..3 {
                for t in 0..4 {
                    let a = u[c][t * nm + mi];
                    if a == 0.0 {
                        continue;
                    }
                    p.coef[map[e]][t][c] += a;
                    for i in 0..4 {
                        let mut f = *e;
                        f[i] += 2;
                        p.coef[map[&f]][t][c] -= a;
                    }
                }
            }
        }
        for (ri, &mi) in self.radial.iter().enumerate() {
            let e = &self.monos[mi];
            for c in 0..3 {
                let a = u[c][4 * nm + ri];
                if a != 0.0 {
                    for l in 0..4 {
                        let mut f = *e;
                        f[l] += 1;
                        p.coef[map[&f]][l][c] += a;
                    }
                }
            }
        }
        p
    }

    fn energy_norm(&self, u: &[DVector<f64>; 3]) -> f64 {
        u.iter().map(|v| v.dot(&(&self.k * v))).sum::<f64>().max(0.0).sqrt()
    }
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// semidefinite system with consistent right-hand side.
pub fn cg_solve(k: &DMatrix<f64>, b: &DVector<f64>, tol: f64, max_iter: usize) -> Result<(DVector<f64>, usize)> {
    let n = b.len();
    let mut x = DVector::zeros(n);
    let dmax = (0..n).map(|i| k[(i, i)].abs()).fold(0.0, f64::max);
    // Right-hand sides at rounding level relative to the operator count as zero.
    let bn = b.norm();
    if bn <= 1e-14 * dmax {
        return Ok((x, 0));
    }
    let dinv = DVector::from_iterator(n, (0..n).map(|i| if k[(i, i)] > 0.0 { 1.0 / k[(i, i)] } else { 0.0 }));
    let mut r = b.clone();
    let mut z = r.component_mul(&dinv);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for it in 1..=max_iter {
        let kp = k * &p;
        let pkp = p.dot(&kp);
        if pkp <= 0.0 {
            break;
        }
        let alpha = rz / pkp;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &kp, 1.0);
        if r.norm() <= tol * bn {
            return Ok((x, it));
        }
        z = r.component_mul(&dinv);
        let rz_new = r.dot(&z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
    }
    let res = (b - k * &x).norm() / bn;
    if res <= tol.max(1e-10) {
        return Ok((x, max_iter));
    }
    Err(YmbError::NonConvergence {
        iterations: max_iter,
        residual: res,
    })
}

/// The linear solution `A̲₀` and its data.
#[derive(Clone, Debug)]
pub struct D0Solution {
    pub a0: PolyForm1,
    pub lift: PolyForm1,
    pub lift_residual: f64,
    pub iterations: usize,
    pub boundary_hash: String,
    pub space_hash: String,
}

/// Discrete L² norms of `d(dA̲₀)`, `d*(dA̲₀)` and of the tangential trace error.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct D0Residuals {
    pub closed: f64,
    pub coclosed: f64,
    pub trace: f64,
}

impl D0Solution {
    pub fn curvature_field(&self) -> PolyCurl {
        PolyCurl::new(&self.a0)
    }

    /// `(A̲₀, dA̲₀)` with exact derivatives at the nodes.
    pub fn sample(&self, nodes: &[P4]) -> (LieForm1, LieForm2) {
        (
            LieForm1::from_field(&self.a0, nodes),
            LieForm2::from_field(&self.curvature_field(), nodes),
        )
    }

    pub fn residuals(&self, quad: &ChartQuadrature, bdry: &BoundaryForm) -> D0Residuals {
        let curl = self.curvature_field();
        let per: Vec<(f64, f64)> = par_range(quad.len(), |n| {
            let j = curl.jet(&quad.nodes[n]);
            let mut dd = 0.0;
            for (a, b, c) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
                let idx = |p: usize, q: usize| pair_index(p, q).unwrap().0;
                let t = j.d[a][idx(b, c)] - j.d[b][idx(a, c)] + j.d[c][idx(a, b)];
                dd += inner(t, t);
            }
            let cd = codiff_pointwise(&[ImQuat::zero(); 4], 0.0, &j.v, &j.d);
            (dd, norm_sq_n(&cd))
        });
        let closed = integrate(&quad.weights, |i| per[i].0).sqrt();
        let coclosed = integrate(&quad.weights, |i| per[i].1).sqrt();
        let tr: Vec<f64> = bdry
            .rule
            .dirs
            .iter()
            .zip(&bdry.values)
            .map(|(z, v)| {
                let a = tangential(&self.a0.value(z), z);
                (0..4).map(|j| inner(a[j] - v[j], a[j] - v[j])).sum()
            })
            .collect();
        let trace = integrate(&bdry.rule.weights, |i| tr[i]).sqrt();
        D0Residuals {
            closed,
            coclosed,
            trace,
        }
    }
}

/// Per-node `(dL, d*L)` and zero value-sources, per Lie direction.
fn linear_source(l: &PolyForm1, x: &P4) -> [([f64; 7], [f64; 4]); 3] {
    let j = l.jet(x);
    let dl = d_pointwise(&j.d);
    let mut cod = ImQuat::zero();
    for i in 0..4 {
        cod = cod - j.d[i][i];
    }
    std::array::from_fn(|c| {
        let mut g = [0.0; 7];
        for q in 0..6 {
            g[q] = dl[q].arr()[c];
        }
        g[6] = cod.arr()[c];
        (g, [0.0; 4])
    })
}

pub fn solve_d0(space: &GalerkinSpace, bdry: &BoundaryForm) -> Result<D0Solution> {
    let (lift, lift_residual) = bdry.polynomial_lift(space.grid.degree)?;
    let b = space.project(|x| linear_source(&lift, x));
    let mut iterations = 0;
    let mut u: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(space.n_basis()));
    for c in 0..3 {
        let (x, it) = cg_solve(&space.k, &(-&b[c]), space.grid.cg_tol, space.grid.cg_max_iter)?;
        u[c] = x;
        iterations = iterations.max(it);
    }
    let a0 = lift.lin(1.0, &space.to_poly(&u), 1.0);
    Ok(D0Solution {
        a0,
        lift,
        lift_residual,
        iterations,
        boundary_hash: bdry.hash(),
        space_hash: space.hash.clone(),
    })
}

fn load_poly(key: &str, space_hash: &str) -> Option<PolyForm1> {
    let path = cache_dir()?.join(key);
    let f = CachedField::load(&path).ok()?;
    if !f.grid_hash.starts_with(space_hash) || f.payload.is_empty() {
        return None;
    }
    let degree = f.payload[0] as usize;
    PolyForm1::from_flat(degree, &f.payload[1..])
}

fn store_poly(key: &str, space_hash: &str, p: &PolyForm1) {
    if let Some(dir) = cache_dir() {
        let mut payload = vec![p.degree as f64];
        payload.extend(p.flat());
        let f = CachedField {
            grid_hash: space_hash.to_string(),
            components: 3,
            payload,
        };
        let _ = std::fs::create_dir_all(&dir).and_then(|_| f.save(&dir.join(key)).map_err(std::io::Error::other));
    }
}

/// `solve_d0` through the field cache in `YMB_CACHE_DIR`, when set.
pub fn solve_d0_cached(space: &GalerkinSpace, bdry: &BoundaryForm) -> Result<D0Solution> {
    let key = cache_key(&["d0", &space.hash, &bdry.hash()]);
    let (lift, lift_residual) = bdry.polynomial_lift(space.grid.degree)?;
    if let Some(a0) = load_poly(&key, &space.hash) {
        return Ok(D0Solution {
            a0,
            lift,
            lift_residual,
            iterations: 0,
            boundary_hash: bdry.hash(),
            space_hash: space.hash.clone(),
        });
    }
    let sol = solve_d0(space, bdry)?;
    store_poly(&key, &space.hash, &sol.a0);
    Ok(sol)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardConfig {
    pub eps_max: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            eps_max: 0.1,
            tol: 1e-10,
            max_iter: 60,
        }
    }
}

/// `A̲_ε = A̲₀ + ω` with `ω` of zero tangential trace.
#[derive(Clone, Debug)]
pub struct SmallSolution {
    pub eps: f64,
    pub a: PolyForm1,
    pub omega: PolyForm1,
    pub iterations: usize,
    pub updates: Vec<f64>,
}

/// Source of the Picard step: per node and Lie direction `c`,
/// `⟨[A∧A], e_c⟩` against `dφ` and `2 Σ_k ⟨F_kl, [A_k, e_c]⟩` against `φ_l`.
fn nonlinear_source(a: &PolyForm1, eps: f64, x: &P4) -> [([f64; 7], [f64; 4]); 3] {
    let j = a.jet(x);
    let aa = bracket_wedge(&j.v, &j.v);
    let da = d_pointwise(&j.d);
    let f: [ImQuat; 6] = std::array::from_fn(|q| da[q] + aa[q].scalef(0.5 * eps));
    std::array::from_fn(|c| {
        let e = ImQuat::basis(c);
        let mut gd = [0.0; 7];
        for q in 0..6 {
            gd[q] = inner(aa[q], e);
        }
        let mut gv = [0.0; 4];
        for (l, g) in gv.iter_mut().enumerate() {
            for k in 0..4 {
                if let Some((idx, s)) = pair_index(k, l) {
                    *g += 2.0 * s * inner(f[idx], crate::algebra::bracket(j.v[k], e));
                }
            }
        }
        (gd, gv)
    })
}

/// Discrete `∫ |F_A|² + |d*A|²` on the space's quadrature.
pub fn discrete_energy(space: &GalerkinSpace, a: &PolyForm1, eps: f64) -> f64 {
    let q = &space.quad;
    let per = par_range(q.len(), |n| {
        let j = a.jet(&q.nodes[n]);
        let aa = bracket_wedge(&j.v, &j.v);
        let da = d_pointwise(&j.d);
        let f: [ImQuat; 6] = std::array::from_fn(|i| da[i] + aa[i].scalef(0.5 * eps));
        let mut cod = ImQuat::zero();
        for i in 0..4 {
            cod = cod - j.d[i][i];
        }
        norm_sq_n(&f) + inner(cod, cod)
    });
    integrate(&q.weights, |i| per[i])
}

pub fn small_solution_picard(
    space: &GalerkinSpace,
    d0: &D0Solution,
    eps: f64,
    cfg: &PicardConfig,
) -> Result<SmallSolution> {
    if !(eps >= 0.0) {
        return Err(YmbError::InvalidParams(format!("eps = {eps}")));
    }
    if eps > cfg.eps_max {
        return Err(YmbError::NonContraction {
            eps,
            reason: format!("eps exceeds the configured guard {}", cfg.eps_max),
        });
    }
    let zero = PolyForm1::zeros(space.grid.degree + 2);
    if eps == 0.0 {
        return Ok(SmallSolution {
            eps,
            a: d0.a0.clone(),
            omega: zero,
            iterations: 0,
            updates: vec![],
        });
    }
    let nb = space.n_basis();
    let mut u: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(nb));
    let mut updates = Vec::new();
    let mut growth = 0;
    for it in 1..=cfg.max_iter {
        let a = d0.a0.lin(1.0, &space.to_poly(&u), 1.0);
        let r = space.project(|x| nonlinear_source(&a, eps, x));
        let mut next: [DVector<f64>; 3] = std::array::from_fn(|_| DVector::zeros(nb));
        for c in 0..3 {
            let (x, _) = cg_solve(
                &space.k,
                &(&r[c] * (-0.25 * eps)),
                space.grid.cg_tol,
                space.grid.cg_max_iter,
            )?;
            next[c] = x;
        }
        let diff: [DVector<f64>; 3] = std::array::from_fn(|c| &next[c] - &u[c]);
        let upd = space.energy_norm(&diff);
        if !upd.is_finite() {
            return Err(YmbError::NonContraction {
                eps,
                reason: "update is not finite".into(),
            });
        }
        if let Some(&prev) = updates.last() {
            if upd > prev {
                growth += 1;
            } else {
                growth = 0;
            }
        }
        updates.push(upd);
        u = next;
        if growth >= 3 {
            return Err(YmbError::NonContraction {
                eps,
                reason: format!("update norm grew for 3 consecutive iterations (last {upd:e})"),
            });
        }
        if upd <= cfg.tol {
            let omega = space.to_poly(&u);
            return Ok(SmallSolution {
                eps,
                a: d0.a0.lin(1.0, &omega, 1.0),
                omega,
                iterations: it,
                updates,
            });
        }
    }
    Err(YmbError::NonContraction {
        eps,
        reason: format!("no convergence in {} iterations", cfg.max_iter),
    })
}

/// `small_solution_picard` through the field cache, keyed by space, data, ε and tol.
pub fn small_solution_cached(
    space: &GalerkinSpace,
    d0: &D0Solution,
    eps: f64,
    cfg: &PicardConfig,
) -> Result<SmallSolution> {
    let key = cache_key(&[
        "picard",
        &space.hash,
        &d0.boundary_hash,
        &format!("{:016x}", eps.to_bits()),
        &format!("{:016x}", cfg.tol.to_bits()),
    ]);
    if let Some(omega) = load_poly(&key, &space.hash) {
        return Ok(SmallSolution {
            eps,
            a: d0.a0.lin(1.0, &omega, 1.0),
            omega,
            iterations: 0,
            updates: vec![],
        });
    }
    let s = small_solution_picard(space, d0, eps, cfg)?;
    store_poly(&key, &space.hash, &s.omega);
    Ok(s)
}

/// Flat `‖∇ω‖_{L²} + ‖ω‖_{L²}` on a quadrature.
pub fn l21_norm(omega: &PolyForm1, quad: &ChartQuadrature) -> Result<f64> {
    let w = LieForm1::from_field(omega, &quad.nodes);
    sobolev_norm(&LieForm1::zeros(quad.len()), 0.0, &w, 2.0, quad)
}
