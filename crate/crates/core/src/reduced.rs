//! The finite-dimensional reduction: `F(p)`, the moment matrix `M(A₀, p)`,
//! its spectrum, the concentration functions `G`, the optimal bubble and the
//! landscape of critical points.

use crate::algebra::{conjugate, inner, rotation_of, Rotation3, UnitQuat};
use crate::error::{Result, YmbError};
use crate::fields::{asd, norm_sq_n, ChartQuadrature, Field1, Form2, S3Rule, P4};
use crate::harmonic::{D0Solution, HpField};
use crate::numerics::{integrate_vec, par_range};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Ball quadrature used for `F` and `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReducedGrid {
    pub s3_l: usize,
    pub n_radial: usize,
}

impl Default for ReducedGrid {
    fn default() -> Self {
        ReducedGrid { s3_l: 8, n_radial: 10 }
    }
}

/// `F(0) = ∫_{B⁴} |d Im(x̄dx)|² = 48 · π²/2`.
pub const F_AT_ORIGIN: f64 = 24.0 * PI * PI;

fn norm(p: &P4) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_interior(p: &P4, d0: f64) -> Result<()> {
    let r = norm(p);
    if r > 1.0 - d0 + 1e-12 {
        return Err(YmbError::NearBoundary {
            radius: r,
            cutoff: 1.0 - d0,
        });
    }
    Ok(())
}

/// `(dh_p)⁻` at a point.
pub fn dhp_asd(p: &P4, x: &P4) -> Form2 {
    let j = HpField { p: *p }.jet(x);
    asd(&crate::fields::d_pointwise(&j.d))
}

/// Quadrature plus the precomputed `(dA̲₀)⁻` at its nodes.
#[derive(Clone, Debug)]
pub struct MomentContext {
    pub quad: ChartQuadrature,
    pub a0_asd: Vec<Form2>,
    pub d0: f64,
}

impl MomentContext {
    pub fn new(sol: Option<&D0Solution>, grid: &ReducedGrid, d0: f64) -> Self {
        let quad = ChartQuadrature::ball(grid.n_radial, &S3Rule::new(grid.s3_l));
        let a0_asd = match sol {
            Some(s) => {
                let curl = s.curvature_field();
                par_range(quad.len(), |i| asd(&crate::fields::Field2::eval(&curl, &quad.nodes[i])))
            }
            None => vec![[Default::default(); 6]; quad.len()],
        };
        MomentContext { quad, a0_asd, d0 }
    }

    /// `F(p)` and `M(A₀, p)` in one pass.
    pub fn f_and_m(&self, p: &P4) -> Result<(f64, Matrix3<f64>)> {
        check_interior(p, self.d0)?;
        let v = integrate_vec(&self.quad.weights, 10, |n| {
            let h = dhp_asd(p, &self.quad.nodes[n]);
            let a = &self.a0_asd[n];
            let mut out = vec![norm_sq_n(&h)];
            for i in 0..3 {
                for j in 0..3 {
                    let mut s = 0.0;
                    for q in 0..6 {
                        s += h[q].arr()[i] * a[q].arr()[j];
                    }
                    out.push(s);
                }
            }
            out
        });
        Ok((v[0], Matrix3::from_fn(|i, j| v[1 + 3 * i + j])))
    }

    pub fn report(&self, p: &P4) -> Result<MomentReport> {
        let (f, m) = self.f_and_m(p)?;
        MomentReport::new(*p, f, m)
    }

    /// `T(g) = ∫ ((dA̲₀)⁻, g (dh_p)⁻ g⁻¹)` by direct quadrature.
    pub fn rotation_pairing_direct(&self, p: &P4, g: &UnitQuat) -> Result<f64> {
        check_interior(p, self.d0)?;
        let gq = g.quat();
        let v = integrate_vec(&self.quad.weights, 1, |n| {
            let h = dhp_asd(p, &self.quad.nodes[n]);
            let a = &self.a0_asd[n];
            vec![(0..6).map(|q| inner(a[q], conjugate(gq, h[q]))).sum()]
        });
        Ok(v[0])
    }
}

pub fn big_f(p: &P4, grid: &ReducedGrid, d0: f64) -> Result<f64> {
    Ok(MomentContext::new(None, grid, d0).f_and_m(p)?.0)
}

pub fn moment_matrix(ctx: &MomentContext, p: &P4) -> Result<Matrix3<f64>> {
    Ok(ctx.f_and_m(p)?.1)
}

/// Descending eigenvalues of `MᵀM`.
pub fn mu_spectrum(m: &Matrix3<f64>) -> [f64; 3] {
    let mut s: Vec<f64> = m.svd(false, false).singular_values.iter().map(|v| v * v).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    [s[0], s[1], s[2]]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GValues {
    pub g1p: f64,
    pub g1m: f64,
    pub g2p: f64,
    pub g2m: f64,
    pub g3m: f64,
    pub g10: f64,
    pub g20: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GKind {
    #[serde(rename = "G1+")]
    G1p,
    #[serde(rename = "G1-")]
    G1m,
    #[serde(rename = "G2+")]
    G2p,
    #[serde(rename = "G2-")]
    G2m,
    #[serde(rename = "G3-")]
    G3m,
    #[serde(rename = "G10")]
    G10,
    #[serde(rename = "G20")]
    G20,
    /// `G1+`, `G1−` or `G1⁰` according to the sign of `det M`.
    #[serde(rename = "G1")]
    G1Signed,
}

impl GKind {
    pub fn parse(s: &str) -> Option<GKind> {
        Some(match s {
            "G1+" => GKind::G1p,
            "G1-" => GKind::G1m,
            "G2+" => GKind::G2p,
            "G2-" => GKind::G2m,
            "G3-" => GKind::G3m,
            "G10" => GKind::G10,
            "G20" => GKind::G20,
            "G1" => GKind::G1Signed,
            _ => return None,
        })
    }
}

impl GValues {
    pub fn get(&self, k: GKind, det_sign: Sign) -> f64 {
        match k {
            GKind::G1p => self.g1p,
            GKind::G1m => self.g1m,
            GKind::G2p => self.g2p,
            GKind::G2m => self.g2m,
            GKind::G3m => self.g3m,
            GKind::G10 => self.g10,
            GKind::G20 => self.g20,
            GKind::G1Signed => match det_sign {
                Sign::Positive => self.g1p,
                Sign::Negative => self.g1m,
                _ => self.g10,
            },
        }
    }
}

pub fn g_functions(mu: [f64; 3], f: f64) -> Result<GValues> {
    if !(f > 0.0) {
        return Err(YmbError::InvalidParams(format!("F = {f} must be positive")));
    }
    let [a, b, c] = mu.map(|m| m.max(0.0).sqrt());
    let sq = |v: f64| v * v / f;
    Ok(GValues {
        g1p: sq(a + b + c),
        g1m: sq(a + b - c),
        g2p: sq(a - b - c),
        g2m: sq(a - b + c),
        g3m: sq(-a + b + c),
        g10: sq(a + b),
        g20: sq(a - b),
    })
}

/// Sign of a quantity judged against a relative gap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
    Zero,
    Indeterminate,
}

pub const GAP: f64 = 1e-6;

/// `x` relative to `scale`: zero at rounding level, indeterminate below the gap.
pub fn judge(x: f64, scale: f64) -> Sign {
    let s = scale.abs().max(f64::MIN_POSITIVE);
    let r = x / s;
    if r.abs() <= 1e-12 {
        Sign::Zero
    } else if r.abs() <= GAP {
        Sign::Indeterminate
    } else if r > 0.0 {
        Sign::Positive
    } else {
        Sign::Negative
    }
}

/// `a > b` with the relative gap; `None` when indeterminate.
fn strictly_greater(a: f64, b: f64) -> Option<bool> {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        return Some(false);
    }
    let r = (a - b) / s;
    if r.abs() <= GAP {
        None
    } else {
        Some(r > 0.0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    pub p: P4,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "M")]
    pub m: [[f64; 3]; 3],
    pub mu: [f64; 3],
    pub det_m: f64,
    pub det_sign: Sign,
    #[serde(rename = "G")]
    pub g: GValues,
}

impl MomentReport {
    pub fn new(p: P4, f: f64, m: Matrix3<f64>) -> Result<Self> {
        let mu = mu_spectrum(&m);
        let g = g_functions(mu, f)?;
        let det = m.determinant();
        let scale = mu[0].sqrt().powi(3);
        Ok(MomentReport {
            p,
            f,
            m: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])),
            mu,
            det_m: det,
            det_sign: if scale == 0.0 { Sign::Zero } else { judge(det, scale) },
            g,
        })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.m[i][j])
    }

    pub fn value(&self, k: GKind) -> f64 {
        self.g.get(k, self.det_sign)
    }

    pub fn csv_header() -> Vec<String> {
        let mut h: Vec<String> = (0..4).map(|i| format!("p{i}")).collect();
        h.push("F".into());
        for i in 1..=3 {
            for j in 1..=3 {
                h.push(format!("m{i}{j}"));
            }
        }
        h.extend(
            [
                "mu1", "mu2", "mu3", "detM", "G1+", "G1-", "G2+", "G2-", "G3-", "G10", "G20",
            ]
            .map(String::from),
        );
        h
    }

    pub fn csv_row(&self) -> Vec<f64> {
        let mut r = self.p.to_vec();
        r.push(self.f);
        r.extend(self.m.iter().flatten());
        r.extend(self.mu);
        r.push(self.det_m);
        let g = &self.g;
        r.extend([g.g1p, g.g1m, g.g2p, g.g2m, g.g3m, g.g10, g.g20]);
        r
    }
}

/// `max_{R ∈ SO(3)} tr(NᵀR)` and a maximizer.
pub fn so3_linear_max(n: &Matrix3<f64>) -> (f64, Rotation3) {
    let svd = n.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let s = svd.singular_values;
    let mut d = Matrix3::identity();
    let det = (u * vt).determinant();
    // Put the sign flip on the smallest singular value.
    let imin = (0..3).min_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap()).unwrap();
    if det < 0.0 {
        d[(imin, imin)] = -1.0;
    }
    let r = u * d * vt;
    let value = (0..3).map(|i| d[(i, i)] * s[i]).sum();
    (value, Rotation3 { r })
}

/// The bubble `(λ*, g*)` minimizing `2λ⁴F − 4ελ²T(g)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BubbleOptimum {
    pub lambda: f64,
    pub g: [f64; 4],
    /// `max_g T(g)`.
    pub t: f64,
    pub value: f64,
    pub in_window: bool,
    pub no_bubble: bool,
}

/// `2λ⁴F − 4ελ²T`.
pub fn reduced_energy(lambda: f64, f: f64, t: f64, eps: f64) -> f64 {
    let l2 = lambda * lambda;
    2.0 * l2 * l2 * f - 4.0 * eps * l2 * t
}

/// `λ*² = εT/F` and `−2ε²T²/F`, or the boundary case for `T ≤ 0`.
pub fn optimal_lambda(f: f64, t: f64, eps: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    ((eps * t / f).sqrt(), -2.0 * eps * eps * t * t / f)
}

/// `T(g) = 2 tr(M R(g))` from the moment matrix.
pub fn rotation_pairing(m: &Matrix3<f64>, g: &UnitQuat) -> f64 {
    2.0 * (m * rotation_of(*g).r).trace()
}

pub fn optimal_bubble(rep: &MomentReport, eps: f64, window: (f64, f64)) -> BubbleOptimum {
    let m = rep.matrix();
    let (v, r) = so3_linear_max(&m.transpose());
    let t = 2.0 * v;
    let (lambda, value) = optimal_lambda(rep.f, t, eps);
    let g = r.to_unit_quat().quat();
    let l2 = lambda * lambda;
    BubbleOptimum {
        lambda,
        g: [g.w, g.x, g.y, g.z],
        t,
        value,
        in_window: t > 0.0 && window.0 * eps < l2 && l2 < window.1 * eps,
        no_bubble: t <= 0.0,
    }
}

// ---- landscape ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Points per axis of the cubic grid; points outside `B_{1−d₀}` are dropped.
    /// Grid extrema within two finite-difference steps of the edge count as exits.
    pub points_per_axis: usize,
    pub d0: f64,
    /// Finite-difference step for gradients and Hessians.
    pub fd_step: f64,
    pub max_iter: usize,
    /// Accept when `|∇G| < grad_tol · cell`.
    pub grad_tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            points_per_axis: 11,
            d0: 0.3,
            fd_step: 1e-3,
            max_iter: 100,
            grad_tol: 1e-7,
        }
    }
}

impl ScanConfig {
    pub fn cell(&self) -> f64 {
        2.0 * (1.0 - self.d0) / (self.points_per_axis as f64 - 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Max,
    Min,
    Saddle,
    Degenerate,
}

/// Which hypothesis clauses hold at a critical point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheoremCase {
    pub det_sign: Sign,
    /// Clauses of the third theorem that hold (`"1a"`, `"2c"`, ...).
    pub clauses: Vec<String>,
    /// Clauses whose strict inequalities could not be decided.
    pub indeterminate: Vec<String>,
    /// An isolated local maximum of the `G1` matching the sign of `det M`.
    pub theorem1: bool,
    /// A non-degenerate critical point.
    pub theorem2: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub p0: P4,
    pub which_g: GKind,
    pub value: f64,
    pub grad_norm: f64,
    pub hessian_eigs: [f64; 4],
    pub classification: Classification,
    pub theorem_case: TheoremCase,
    pub report: MomentReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanResult {
    pub which_g: GKind,
    pub rows: Vec<MomentReport>,
    pub critical: Vec<CriticalPoint>,
    /// `G ≡ 0` on the scan grid.
    pub degenerate: bool,
    /// Refinements that left `B_{1−d₀}`, with the last point reached.
    pub exits: Vec<P4>,
    pub errors: Vec<String>,
}

pub fn scan_points(cfg: &ScanConfig) -> Vec<(P4, [usize; 4])> {
    let n = cfg.points_per_axis;
    let r = 1.0 - cfg.d0;
    let coord = |i: usize| {
        if n == 1 {
            0.0
        } else {
            -r + 2.0 * r * i as f64 / (n as f64 - 1.0)
        }
    };
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let p = [coord(a), coord(b), coord(c), coord(d)];
                    if norm(&p) <= r + 1e-12 {
                        out.push((p, [a, b, c, d]));
                    }
                }
            }
        }
    }
    out
}

fn fd_gradient(f: &dyn Fn(&P4) -> Result<f64>, p: &P4, h: f64) -> Result<[f64; 4]> {
    let mut g = [0.0; 4];
    for i in 0..4 {
        let (mut a, mut b) = (*p, *p);
        a[i] += h;
        b[i] -= h;
        g[i] = (f(&a)? - f(&b)?) / (2.0 * h);
    }
    Ok(g)
}

fn fd_hessian(f: &dyn Fn(&P4) -> Result<f64>, p: &P4, h: f64) -> Result<nalgebra::Matrix4<f64>> {
    let f0 = f(p)?;
    let mut m = nalgebra::Matrix4::zeros();
    for i in 0..4 {
        for j in i..4 {
            let v = if i == j {
                let (mut a, mut b) = (*p, *p);
                a[i] += h;
                b[i] -= h;
                (f(&a)? - 2.0 * f0 + f(&b)?) / (h * h)
            } else {
                let e = |si: f64, sj: f64| {
                    let mut q = *p;
                    q[i] += si * h;
                    q[j] += sj * h;
                    f(&q)
                };
                (e(1.0, 1.0)? - e(1.0, -1.0)? - e(-1.0, 1.0)? + e(-1.0, -1.0)?) / (4.0 * h * h)
            };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

enum Refined {
    Converged(P4, [f64; 4]),
    Exited(P4),
    Stalled(P4, [f64; 4]),
}

/// Newton steps on `∇G = 0` with finite-difference derivatives, safeguarded by
/// BFGS-style ascent/descent when the Newton step is rejected.
fn refine(f: &dyn Fn(&P4) -> Result<f64>, start: P4, sense: f64, cfg: &ScanConfig) -> Result<Refined> {
    let r = 1.0 - cfg.d0 - 2.0 * cfg.fd_step;
    let h = cfg.fd_step;
    let tol = cfg.grad_tol * cfg.cell();
    let mut p = start;
    let mut g = fd_gradient(f, &p, h)?;
    // Inverse Hessian approximation of −sense·G.
    let mut hinv = nalgebra::Matrix4::<f64>::identity() * (0.1 * cfg.cell());
    for _ in 0..cfg.max_iter {
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn < tol {
            return Ok(Refined::Converged(p, g));
        }
        let gv = nalgebra::Vector4::from(g);
        // Newton step from the finite-difference Hessian when it has the right signature.
        let hess = fd_hessian(f, &p, h)?;
        let eig = hess.symmetric_eigen();
        let right = eig.eigenvalues.iter().all(|&e| sense * e < 0.0);
        let mut step = if right {
            -(hess.try_inverse().unwrap_or(nalgebra::Matrix4::zeros()) * gv)
        } else {
            hinv * gv * sense
        };
        let maxstep = 0.5 * cfg.cell();
        if step.norm() > maxstep {
            step *= maxstep / step.norm();
        }
        let f0 = f(&p)?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let q: P4 = std::array::from_fn(|i| p[i] + t * step[i]);
            if norm(&q) > r {
                t *= 0.5;
                continue;
            }
            let fq = f(&q)?;
            if sense * (fq - f0) >= -1e-14 * f0.abs() {
                accepted = Some(q);
                break;
            }
            t *= 0.5;
        }
        let Some(q) = accepted else {
            let edge: P4 = std::array::from_fn(|i| p[i] + step[i]);
            if norm(&edge) > r {
                return Ok(Refined::Exited(edge));
            }
            return Ok(Refined::Stalled(p, g));
        };
        let gq = fd_gradient(f, &q, h)?;
        let s = nalgebra::Vector4::from(std::array::from_fn::<f64, 4, _>(|i| q[i] - p[i]));
        let y = (nalgebra::Vector4::from(gq) - gv) * (-sense);
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let i4 = nalgebra::Matrix4::<f64>::identity();
            hinv = (i4 - s * y.transpose() * rho) * hinv * (i4 - y * s.transpose() * rho) + s * s.transpose() * rho;
        }
        p = q;
        g = gq;
    }
    let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if gn < tol {
        Ok(Refined::Converged(p, g))
    } else {
        Ok(Refined::Stalled(p, g))
    }
}

pub fn classify(eigs: &[f64; 4], scale: f64) -> Classification {
    let tol = 1e-6 * scale.max(eigs.iter().fold(0.0, |m: f64, e| m.max(e.abs())));
    if eigs.iter().any(|e| e.abs() <= tol) {
        Classification::Degenerate
    } else if eigs.iter().all(|&e| e < 0.0) {
        Classification::Max
    } else if eigs.iter().all(|&e| e > 0.0) {
        Classification::Min
    } else {
        Classification::Saddle
    }
}

pub fn theorem_case(rep: &MomentReport, which: GKind, class: Classification) -> TheoremCase {
    let [m1, m2, m3] = rep.mu;
    let [s1, s2, s3] = rep.mu.map(|m| m.max(0.0).sqrt());
    let mut clauses = Vec::new();
    let mut indeterminate = Vec::new();
    let mut push = |name: &str, kind: GKind, conds: &[Option<bool>]| {
        if kind != which && !(which == GKind::G1Signed && matches!(kind, GKind::G1p | GKind::G1m | GKind::G10)) {
            return;
        }
        if conds.iter().any(|c| *c == Some(false)) {
            return;
        }
        if conds.iter().any(|c| c.is_none()) {
            indeterminate.push(name.to_string());
        } else {
            clauses.push(name.to_string());
        }
    };
    match rep.det_sign {
        Sign::Positive => {
            push("1a", GKind::G1p, &[]);
            push("1b", GKind::G2p, &[strictly_greater(s1, s2 + s3)]);
        }
        Sign::Negative => {
            push("2a", GKind::G1m, &[strictly_greater(m2, m3)]);
            push("2b", GKind::G2m, &[strictly_greater(m1, m2), strictly_greater(m2, m3)]);
            push(
                "2c",
                GKind::G3m,
                &[strictly_greater(m1, m2), strictly_greater(s2 + s3, s1)],
            );
        }
        Sign::Zero => {
            push("3a", GKind::G10, &[strictly_greater(m2, 0.0)]);
            push("3b", GKind::G20, &[strictly_greater(m1, m2), strictly_greater(m2, 0.0)]);
        }
        Sign::Indeterminate => {
            for c in ["1a", "1b", "2a", "2b", "2c", "3a", "3b"] {
                indeterminate.push(c.to_string());
            }
        }
    }
    let g1_match = matches!(
        (which, rep.det_sign),
        (GKind::G1Signed, _) | (GKind::G1p, Sign::Positive) | (GKind::G1m, Sign::Negative) | (GKind::G10, Sign::Zero)
    );
    TheoremCase {
        det_sign: rep.det_sign,
        clauses,
        indeterminate,
        theorem1: g1_match && class == Classification::Max,
        theorem2: class != Classification::Degenerate,
    }
}

fn grid_extrema(values: &[f64], pts: &[(P4, [usize; 4])], n: usize) -> Vec<(usize, f64)> {
    let idx = |m: [usize; 4]| ((m[0] * n + m[1]) * n + m[2]) * n + m[3];
    let mut lookup = vec![usize::MAX; n.pow(4)];
    for (k, (_, m)) in pts.iter().enumerate() {
        lookup[idx(*m)] = k;
    }
    let mut out = Vec::new();
    for (k, (_, m)) in pts.iter().enumerate() {
        let mut is_max = true;
        let mut is_min = true;
        let mut nbrs = 0;
        for a in 0..4 {
            for s in [-1isize, 1] {
                let v = m[a] as isize + s;
                if v < 0 || v >= n as isize {
                    continue;
                }
                let mut mm = *m;
                mm[a] = v as usize;
                let j = lookup[idx(mm)];
                if j == usize::MAX {
                    continue;
                }
                nbrs += 1;
                is_max &= values[k] > values[j];
                is_min &= values[k] < values[j];
            }
        }
        if nbrs == 0 {
            continue;
        }
        if is_max {
            out.push((k, -1.0));
        }
        if is_min {
            out.push((k, 1.0));
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

pub fn landscape_scan(ctx: &MomentContext, which: GKind, cfg: &ScanConfig) -> Result<ScanResult> {
    if cfg.points_per_axis < 2 {
        return Err(YmbError::InvalidParams("scan needs at least 2 points per axis".into()));
    }
    let pts = scan_points(cfg);
    let reps: Vec<Result<MomentReport>> = pts.iter().map(|(p, _)| ctx.report(p)).collect();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut values = Vec::with_capacity(pts.len());
    for (r, (p, _)) in reps.into_iter().zip(&pts) {
        match r {
            Ok(rep) => {
                values.push(rep.value(which));
                rows.push(rep);
            }
            Err(e) => {
                values.push(f64::NAN);
                errors.push(format!("{p:?}: {e}"));
            }
        }
    }
    let gmax = values
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    let fmax = rows.iter().fold(0.0, |m: f64, r| m.max(r.f));
    if gmax <= 1e-14 * fmax.max(1.0) {
        return Ok(ScanResult {
            which_g: which,
            rows,
            critical: vec![],
            degenerate: true,
            exits: vec![],
            errors,
        });
    }
    let g = |p: &P4| -> Result<f64> { Ok(ctx.report(p)?.value(which)) };
    let mut critical: Vec<CriticalPoint> = Vec::new();
    let mut exits = Vec::new();
    let inner = 1.0 - cfg.d0 - 2.0 * cfg.fd_step;
    for (k, sense) in grid_extrema(&values, &pts, cfg.points_per_axis) {
        if norm(&pts[k].0) > inner {
            exits.push(pts[k].0);
            continue;
        }
        match refine(&g, pts[k].0, -sense, cfg)? {
            Refined::Converged(p, grad) => {
                if critical
                    .iter()
                    .any(|c| norm(&std::array::from_fn(|i| c.p0[i] - p[i])) < 1e-4)
                {
                    continue;
                }
                let hess = fd_hessian(&g, &p, cfg.fd_step)?;
                let mut eigs: Vec<f64> = hess.symmetric_eigen().eigenvalues.iter().copied().collect();
                eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let eigs = [eigs[0], eigs[1], eigs[2], eigs[3]];
                let rep = ctx.report(&p)?;
                let value = rep.value(which);
                let class = classify(&eigs, value.abs());
                critical.push(CriticalPoint {
                    p0: p,
                    which_g: which,
                    value,
                    grad_norm: grad.iter().map(|v| v * v).sum::<f64>().sqrt(),
                    hessian_eigs: eigs,
                    classification: class,
                    theorem_case: theorem_case(&rep, which, class),
                    report: rep,
                });
            }
            Refined::Exited(p) => exits.push(p),
            Refined::Stalled(p, grad) => errors.push(format!(
                "refinement from {:?} stalled at {p:?} with |grad| = {:e}",
                pts[k].0,
                grad.iter().map(|v| v * v).sum::<f64>().sqrt()
            )),
        }
    }
    Ok(ScanResult {
        which_g: which,
        rows,
        critical,
        degenerate: false,
        exits,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Quat;
    use crate::harmonic::{solve_d0, BoundaryFamily, D0Grid, GalerkinSpace};
    use crate::numerics::golden_section;
    use rand::SeedableRng;
    use std::sync::OnceLock;

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(11)
    }

    fn space() -> &'static GalerkinSpace {
        static S: OnceLock<GalerkinSpace> = OnceLock::new();
        S.get_or_init(|| GalerkinSpace::new(D0Grid::default()))
    }

    fn ctx_for(f: &BoundaryFamily) -> MomentContext {
        let b = f.boundary(&S3Rule::new(8));
        let sol = solve_d0(space(), &b).unwrap();
        MomentContext::new(Some(&sol), &ReducedGrid::default(), 0.3)
    }

    #[test]
    fn f_at_origin_matches_closed_form() {
        let f = big_f(&[0.0; 4], &ReducedGrid::default(), 0.3).unwrap();
        assert!((f / F_AT_ORIGIN - 1.0).abs() < 1e-12, "{f}");
    }

    #[test]
    fn f_positive_rotation_invariant_and_converged() {
        let mut r = rng();
        let grid = ReducedGrid::default();
        let fine = ReducedGrid { s3_l: 20, n_radial: 24 };
        // Reference values from a 30/30 grid.
        let reference = [349.7601392079911, 1037.233352156139, 2298.761587125028];
        for (p, fref) in [[0.3, 0.0, 0.0, 0.0], [0.2, -0.3, 0.4, 0.1], [0.0, 0.0, 0.0, 0.65]]
            .into_iter()
            .zip(reference)
        {
            let f = big_f(&p, &grid, 0.3).unwrap();
            assert!(f > 0.0);
            assert!((f / fref - 1.0).abs() < 5e-3);
            assert!((big_f(&p, &fine, 0.3).unwrap() / fref - 1.0).abs() < 2e-6);
            // A rotation of ℝ⁴ (x ↦ a x b̄ with unit a, b) moves p but not F.
            let a = UnitQuat::random(&mut r).quat();
            let b = UnitQuat::random(&mut r).quat();
            let rp = (a * Quat::from_vec(p) * b.conj()).to_vec();
            assert!((big_f(&rp, &fine, 0.3).unwrap() / big_f(&p, &fine, 0.3).unwrap() - 1.0).abs() < 2e-6);
        }
        assert!(big_f(&[0.8, 0.0, 0.0, 0.0], &grid, 0.3).is_err());
    }

    #[test]
    fn moment_matrix_examples() {
        let zero = ctx_for(&BoundaryFamily::zero());
        assert_eq!(moment_matrix(&zero, &[0.1, 0.0, 0.2, 0.0]).unwrap(), Matrix3::zeros());
        // (x¹dx² + x³dx⁰)·i has the anti-self-dual curvature (dx¹² − dx⁰³)·i.
        let fam = BoundaryFamily {
            linear: vec![
                crate::harmonic::LinearTerm {
                    x: 1,
                    dx: 2,
                    c: [1.0, 0.0, 0.0],
                },
                crate::harmonic::LinearTerm {
                    x: 3,
                    dx: 0,
                    c: [1.0, 0.0, 0.0],
                },
            ],
            ..Default::default()
        };
        let ctx = ctx_for(&fam);
        let m = moment_matrix(&ctx, &[0.2, 0.1, -0.1, 0.15]).unwrap();
        for i in 0..3 {
            assert!(m[(i, 1)].abs() < 1e-12 && m[(i, 2)].abs() < 1e-12);
        }
        assert!(m.column(0).norm() > 1e-3);
        let mu = mu_spectrum(&m);
        assert!(mu[1] < 1e-20 * mu[0]);
        // (x¹dx⁰ + x³dx²)·i has self-dual curvature.
        let sd = BoundaryFamily {
            linear: vec![
                crate::harmonic::LinearTerm {
                    x: 1,
                    dx: 0,
                    c: [1.0, 0.0, 0.0],
                },
                crate::harmonic::LinearTerm {
                    x: 3,
                    dx: 2,
                    c: [1.0, 0.0, 0.0],
                },
            ],
            ..Default::default()
        };
        let m = moment_matrix(&ctx_for(&sd), &[0.2, 0.1, -0.1, 0.15]).unwrap();
        assert!(m.abs().max() < 1e-12);
    }

    #[test]
    fn rotation_pairing_two_routes() {
        let ctx = ctx_for(&BoundaryFamily::mixed());
        let p = [0.2, 0.1, -0.1, 0.15];
        let m = moment_matrix(&ctx, &p).unwrap();
        let mut r = rng();
        for _ in 0..5 {
            let g = UnitQuat::random(&mut r);
            let direct = ctx.rotation_pairing_direct(&p, &g).unwrap();
            let via_m = rotation_pairing(&m, &g);
            assert!(
                (direct - via_m).abs() < 1e-10 * direct.abs().max(1.0),
                "{direct} vs {via_m}"
            );
        }
    }

    #[test]
    fn mu_spectrum_examples() {
        assert_eq!(
            mu_spectrum(&Matrix3::identity()).map(|v| (v * 1e12).round() / 1e12),
            [1.0; 3]
        );
        let mu = mu_spectrum(&Matrix3::from_diagonal(&nalgebra::Vector3::new(1.0, 3.0, 2.0)));
        for (a, b) in mu.iter().zip([9.0, 4.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut r = rng();
        let m = Matrix3::from_fn(|i, j| ((i * 3 + j) as f64).sin());
        for _ in 0..20 {
            let rot = rotation_of(UnitQuat::random(&mut r)).r;
            let a = mu_spectrum(&m);
            let b = mu_spectrum(&(m * rot));
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn g_function_examples() {
        let g = g_functions([1.0, 1.0, 1.0], 1.0).unwrap();
        assert_eq!(
            (g.g1p, g.g1m, g.g2p, g.g2m, g.g3m, g.g10, g.g20),
            (9.0, 1.0, 1.0, 1.0, 1.0, 4.0, 0.0)
        );
        let g = g_functions([4.0, 1.0, 0.0], 2.0).unwrap();
        assert_eq!(
            (g.g1p, g.g1m, g.g2p, g.g2m, g.g3m, g.g10, g.g20),
            (4.5, 4.5, 0.5, 0.5, 0.5, 4.5, 0.5)
        );
        assert!(g_functions([1.0, 0.0, 0.0], 0.0).is_err());
        // μ₃ = 0 collapses G1± onto G1⁰.
        let g = g_functions([2.0, 0.7, 0.0], 1.3).unwrap();
        assert_eq!(g.g1p, g.g10);
        assert_eq!(g.g1m, g.g10);
    }

    fn brute_force_max(n: &Matrix3<f64>, samples: usize) -> f64 {
        let mut r = rng();
        (0..samples)
            .map(|_| (n.transpose() * rotation_of(UnitQuat::random(&mut r)).r).trace())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn so3_max_examples() {
        let (v, r) = so3_linear_max(&Matrix3::from_diagonal(&nalgebra::Vector3::new(2.0, 1.0, 1.0)));
        assert!((v - 4.0).abs() < 1e-12);
        assert!((r.r - Matrix3::identity()).abs().max() < 1e-12);
        let n = Matrix3::from_diagonal(&nalgebra::Vector3::new(2.0, 1.0, -1.0));
        let (v, _) = so3_linear_max(&n);
        assert!((v - 2.0).abs() < 1e-12);
        assert!((brute_force_max(&n, 100_000) - 2.0).abs() < 1e-2);
        let (v, r) = so3_linear_max(&Matrix3::zeros());
        assert_eq!(v, 0.0);
        assert!(r.orthogonality_defect() < 1e-12);
    }

    #[test]
    fn so3_max_is_an_upper_bound_and_attained() {
        let mut r = rng();
        for k in 0..10 {
            let n =
                Matrix3::from_fn(|i, j| ((k * 9 + i * 3 + j) as f64 * 1.7).sin() * if k % 2 == 0 { 1.0 } else { -1.0 });
            let (v, rot) = so3_linear_max(&n);
            assert!((rot.r.determinant() - 1.0).abs() < 1e-12);
            assert!(((n.transpose() * rot.r).trace() - v).abs() < 1e-9);
            for _ in 0..1000 {
                let q = rotation_of(UnitQuat::random(&mut r)).r;
                assert!((n.transpose() * q).trace() <= v + 1e-12);
            }
        }
    }

    #[test]
    fn optimal_bubble_examples() {
        let (l, v) = optimal_lambda(1.0, 1.0, 0.01);
        assert!((l * l - 0.01).abs() < 1e-15 && (v + 2e-4).abs() < 1e-18);
        assert_eq!(optimal_lambda(1.0, 0.0, 0.01), (0.0, 0.0));
        for (f, t, eps) in [(1.0, 1.0, 0.01), (37.0, 5.5, 0.02), (200.0, 80.0, 0.005)] {
            let (l, v) = optimal_lambda(f, t, eps);
            let lg = golden_section(|x| reduced_energy(x, f, t, eps), 0.0, 1.0, 1e-12);
            assert!((lg - l).abs() < 1e-8);
            assert!((reduced_energy(lg, f, t, eps) - v).abs() < 1e-8 * v.abs().max(1e-12));
        }
    }

    #[test]
    fn optimized_value_is_minus_8_eps_squared_g1() {
        let ctx = ctx_for(&BoundaryFamily::mixed());
        let eps = 0.01;
        for p in [[0.2, 0.1, -0.1, 0.15], [0.0; 4], [-0.3, 0.2, 0.0, 0.1]] {
            let rep = ctx.report(&p).unwrap();
            let ob = optimal_bubble(&rep, eps, (0.2, 5.0));
            let g1 = rep.value(GKind::G1Signed);
            assert!((ob.value + 8.0 * eps * eps * g1).abs() < 1e-12 * ob.value.abs());
            let g = UnitQuat::new(Quat::from_vec(ob.g)).unwrap();
            assert!((rotation_pairing(&rep.matrix(), &g) - ob.t).abs() < 1e-10 * ob.t);
        }
    }

    #[test]
    fn classification_and_theorem_cases() {
        assert_eq!(classify(&[-2.0, -1.0, -1.0, -0.5], 1.0), Classification::Max);
        assert_eq!(classify(&[-2.0, 1.0, 1.0, 0.5], 1.0), Classification::Saddle);
        assert_eq!(classify(&[0.0, 1.0, 1.0, 0.5], 1.0), Classification::Degenerate);
        let rep = MomentReport::new(
            [0.0; 4],
            1.0,
            Matrix3::from_diagonal(&nalgebra::Vector3::new(3.0, 2.0, 1.0)),
        )
        .unwrap();
        let tc = theorem_case(&rep, GKind::G1Signed, Classification::Max);
        assert_eq!(tc.clauses, vec!["1a"]);
        assert!(tc.theorem1 && tc.theorem2);
        let rep = MomentReport::new(
            [0.0; 4],
            1.0,
            Matrix3::from_diagonal(&nalgebra::Vector3::new(3.0, 2.0, -1.5)),
        )
        .unwrap();
        assert_eq!(theorem_case(&rep, GKind::G3m, Classification::Min).clauses, vec!["2c"]);
        assert_eq!(theorem_case(&rep, GKind::G2m, Classification::Min).clauses, vec!["2b"]);
        let rep = MomentReport::new(
            [0.0; 4],
            1.0,
            Matrix3::from_diagonal(&nalgebra::Vector3::new(2.0, 2.0, -1.0)),
        )
        .unwrap();
        assert_eq!(
            theorem_case(&rep, GKind::G2m, Classification::Min).indeterminate,
            vec!["2b"]
        );
        let rep = MomentReport::new(
            [0.0; 4],
            1.0,
            Matrix3::from_diagonal(&nalgebra::Vector3::new(2.0, 1.0, 0.0)),
        )
        .unwrap();
        assert_eq!(rep.det_sign, Sign::Zero);
        assert_eq!(theorem_case(&rep, GKind::G10, Classification::Max).clauses, vec!["3a"]);
        assert_eq!(theorem_case(&rep, GKind::G20, Classification::Max).clauses, vec!["3b"]);
    }

    #[test]
    fn scan_of_zero_data_is_degenerate() {
        let ctx = ctx_for(&BoundaryFamily::zero());
        let cfg = ScanConfig {
            points_per_axis: 3,
            ..Default::default()
        };
        let s = landscape_scan(&ctx, GKind::G1Signed, &cfg).unwrap();
        assert!(s.degenerate && s.critical.is_empty());
    }

    /// `Im(x̄ dx)` as boundary data is invariant under the rotations `x ↦ a x`.
    fn radial_family() -> BoundaryFamily {
        let mut linear = vec![];
        for j in 0..4 {
            for a in 0..4 {
                let v = (Quat::<f64>::basis(a).conj() * Quat::basis(j)).im();
                if v.dot(v) > 0.0 {
                    linear.push(crate::harmonic::LinearTerm {
                        x: a,
                        dx: j,
                        c: v.arr(),
                    });
                }
            }
        }
        BoundaryFamily {
            linear,
            ..Default::default()
        }
    }

    #[test]
    fn symmetric_data_has_a_critical_point_at_the_origin() {
        let fam = radial_family();
        let ctx = ctx_for(&fam);
        let cfg = ScanConfig {
            points_per_axis: 5,
            ..Default::default()
        };
        let s = landscape_scan(&ctx, GKind::G1Signed, &cfg).unwrap();
        assert!(!s.degenerate);
        assert!(
            s.critical.iter().any(|c| norm(&c.p0) < 1e-4),
            "{:?}",
            s.critical.iter().map(|c| c.p0).collect::<Vec<_>>()
        );
    }

    #[test]
    fn perturbed_data_has_an_interior_maximum() {
        let ctx = ctx_for(&BoundaryFamily::mixed());
        let cfg = ScanConfig {
            points_per_axis: 5,
            ..Default::default()
        };
        let s = landscape_scan(&ctx, GKind::G1Signed, &cfg).unwrap();
        let maxima: Vec<_> = s
            .critical
            .iter()
            .filter(|c| c.classification == Classification::Max)
            .collect();
        assert!(!maxima.is_empty(), "{:?} {:?}", s.errors, s.exits);
        for c in &s.critical {
            assert!(c.grad_norm < cfg.grad_tol * cfg.cell());
            assert!(
                !c.theorem_case.clauses.is_empty()
                    || !c.theorem_case.indeterminate.is_empty()
                    || c.report.det_sign == Sign::Zero
            );
        }
    }
}
