//! The glued approximate solution `A(q)`: a scale-λ instanton at `p`, rotated
//! by `g`, superposed on the small solution through cutoffs. Action, relative
//! Chern number, the expansion of `J_ε`, and gradient/Hessian probes.

mod probe;

pub use probe::{
    bump_forms, gradient_envelope, gradient_pairing, hessian_positivity_probe, modified_hessian, sobolev_inner,
    sobolev_norm12, tangent_frame, Bump, BumpGauge, EnvelopeReport, FrameDirection, PositivityReport, SampledForm,
    TangentFrame,
};

use crate::ad::{Real, D1};
use crate::algebra::{conjugate, Quat, UnitQuat};
use crate::error::{Result, YmbError};
use crate::fields::quadrature::BubbleGrid;
use crate::fields::{chern_pointwise, curvature_jet, norm_sq_n, ChartQuadrature, Field1, Form1, Form2, Jet1, P4};
use crate::harmonic::poly::tangential;
use crate::harmonic::{HLambdaP, PolyForm1};
use crate::instanton::{i1, i2, maurer_cartan, InstantonParams};
use crate::numerics::{integrate, par_range};
use crate::reduced::{rotation_pairing, MomentReport};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const EIGHT_PI_SQ: f64 = 8.0 * PI * PI;

/// `β(s)` and its first two derivatives: `β = 1` for `s ≤ 1`, `β = 0` for
/// `s ≥ 2`, `β = 1/(1 + e^φ)` with `φ = 1/(2−s) − 1/(s−1)` in between.
pub fn bump_profile(s: f64) -> (f64, f64, f64) {
    if s <= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    if s >= 2.0 {
        return (0.0, 0.0, 0.0);
    }
    let (a, b) = (s - 1.0, 2.0 - s);
    let phi = 1.0 / b - 1.0 / a;
    if phi > 700.0 {
        return (0.0, 0.0, 0.0);
    }
    if phi < -700.0 {
        return (1.0, 0.0, 0.0);
    }
    let dphi = 1.0 / (a * a) + 1.0 / (b * b);
    let ddphi = -2.0 / (a * a * a) + 2.0 / (b * b * b);
    let beta = 1.0 / (1.0 + phi.exp());
    let f1 = -beta * (1.0 - beta);
    let f2 = beta * (1.0 - beta) * (1.0 - 2.0 * beta);
    (beta, f1 * dphi, f2 * dphi * dphi + f1 * ddphi)
}

/// `β_{λ,p}(x) = β(|x − p|/λ)` with exact derivatives.
pub fn cutoff<S: Real>(lambda: f64, p: &P4, x: &[S; 4]) -> S {
    let mut r2 = S::zero();
    for i in 0..4 {
        let d = x[i] - p[i];
        r2 += d * d;
    }
    let s0 = r2.val().sqrt() / lambda;
    if s0 <= 1.0 {
        return S::one();
    }
    if s0 >= 2.0 {
        return S::zero();
    }
    let (b, db, ddb) = bump_profile(s0);
    (r2.sqrt() / lambda).chain(b, db, ddb)
}

pub fn cutoff_beta(lambda: f64, p: &P4, x: &P4) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(YmbError::InvalidParams(format!("lambda = {lambda}")));
    }
    Ok(cutoff(lambda, p, x))
}

/// Constants of the admissible parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlueConfig {
    pub d0: f64,
    pub lambda0: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Default for GlueConfig {
    fn default() -> Self {
        GlueConfig {
            d0: 0.5,
            lambda0: 0.24,
            d1: 0.1,
            d2: 4.0,
        }
    }
}

impl GlueConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < 2.0 * self.lambda0 && 2.0 * self.lambda0 < self.d0 && self.d0 < 1.0) {
            return Err(YmbError::InvalidParams(format!(
                "need 0 < 2·lambda0 < d0 < 1, got lambda0 = {}, d0 = {}",
                self.lambda0, self.d0
            )));
        }
        if !(0.0 < self.d1 && self.d1 < self.d2 && self.d2.is_finite()) {
            return Err(YmbError::InvalidParams(format!(
                "need 0 < D1 < D2, got {} and {}",
                self.d1, self.d2
            )));
        }
        Ok(())
    }
}

/// A point `q = (p, [±g], λ)` of the parameter set at coupling `ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlueParams {
    pub p: P4,
    pub g: UnitQuat,
    pub lambda: f64,
    pub eps: f64,
}

/// Plain record of a [`GlueParams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlueRecord {
    pub p: P4,
    pub g: [f64; 4],
    pub lambda: f64,
    pub eps: f64,
}

impl GlueParams {
    pub fn new(p: P4, g: UnitQuat, lambda: f64, eps: f64, cfg: &GlueConfig) -> Result<Self> {
        cfg.validate()?;
        let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(r < 1.0 - cfg.d0) {
            return Err(YmbError::InvalidParams(format!(
                "|p| = {r} is not below 1 − d0 = {}",
                1.0 - cfg.d0
            )));
        }
        if !(eps > 0.0) {
            return Err(YmbError::InvalidParams(format!("eps = {eps}")));
        }
        if !(lambda > 0.0 && lambda < cfg.lambda0) {
            return Err(YmbError::InvalidParams(format!(
                "lambda = {lambda} outside (0, {})",
                cfg.lambda0
            )));
        }
        let l2 = lambda * lambda;
        if !(cfg.d1 * eps < l2 && l2 < cfg.d2 * eps) {
            return Err(YmbError::InvalidParams(format!(
                "lambda² = {l2} outside the window ({}, {})",
                cfg.d1 * eps,
                cfg.d2 * eps
            )));
        }
        Ok(GlueParams { p, g, lambda, eps })
    }

    pub fn instanton(&self) -> InstantonParams {
        InstantonParams {
            p: self.p,
            lambda: self.lambda,
        }
    }

    pub fn record(&self) -> GlueRecord {
        let g = self.g.quat();
        GlueRecord {
            p: self.p,
            g: [g.w, g.x, g.y, g.z],
            lambda: self.lambda,
            eps: self.eps,
        }
    }

    pub fn distance(&self, x: &P4) -> f64 {
        self.instanton().distance(x)
    }

    /// Transition `t = g g₁₂ g⁻¹` from the bubble gauge to the background gauge.
    pub fn transition<S: Real>(&self, x: &[S; 4]) -> Quat<S> {
        let g = self.g.quat().map(S::cst);
        let y = Quat::new(x[0] - self.p[0], x[1] - self.p[1], x[2] - self.p[2], x[3] - self.p[3]);
        let u = y.scale(y.norm().recip());
        g * u * g.conj()
    }
}

/// Which trivialization a node's values are expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GaugeChart {
    /// `|x − p| < λ/4`, where `A(q) = (1/ε) g I¹ g⁻¹`.
    Bubble,
    Background,
}

/// `A(q)` built from the small solution, the instanton and `h_{λ,p}`.
#[derive(Clone, Debug)]
pub struct GluedConnection {
    pub q: GlueParams,
    pub small: PolyForm1,
    pub h: HLambdaP,
}

impl GluedConnection {
    pub fn new(q: GlueParams, small: &PolyForm1) -> Self {
        GluedConnection {
            q,
            small: small.clone(),
            h: HLambdaP::new(q.p, q.lambda),
        }
    }

    /// Same small solution, other parameters.
    pub fn with_params(&self, q: GlueParams) -> Self {
        let h = if q.p == self.q.p && q.lambda == self.q.lambda {
            self.h.clone()
        } else {
            HLambdaP::new(q.p, q.lambda)
        };
        GluedConnection {
            q,
            small: self.small.clone(),
            h,
        }
    }

    pub fn chart_at(&self, x: &P4) -> GaugeChart {
        if self.q.distance(x) < 0.25 * self.q.lambda {
            GaugeChart::Bubble
        } else {
            GaugeChart::Background
        }
    }

    /// `(1/ε) g I¹ g⁻¹`.
    pub fn bubble_eval<S: Real>(&self, x: &[S; 4]) -> Form1<S> {
        let g = self.q.g.quat().map(S::cst);
        let a = i1(&self.q.instanton(), x);
        a.map(|c| conjugate(g, c).scalef(1.0 / self.q.eps))
    }

    /// `(1 − β_{λ,p}) A̲ + (1/ε) g (I² − (1 − β_{λ/4,p}) h_{λ,p}) g⁻¹`.
    pub fn background_eval<S: Real>(&self, x: &[S; 4]) -> Form1<S> {
        let q = &self.q;
        let g = q.g.quat().map(S::cst);
        let b1 = cutoff(q.lambda, &q.p, x);
        let b4 = cutoff(0.25 * q.lambda, &q.p, x);
        let a = self.small.eval(x);
        let inst = i2(&q.instanton(), x);
        let h = self.h.eval(x);
        let one = S::one();
        std::array::from_fn(|j| {
            let bubble = inst[j] - h[j].scale(one - b4);
            a[j].scale(one - b1) + conjugate(g, bubble).scalef(1.0 / q.eps)
        })
    }

    pub fn jet(&self, x: &P4) -> (GaugeChart, Jet1) {
        let c = self.chart_at(x);
        let xd = D1::point(x);
        let f = match c {
            GaugeChart::Bubble => self.bubble_eval(&xd),
            GaugeChart::Background => self.background_eval(&xd),
        };
        (c, Jet1::from_d1(&f))
    }

    pub fn sample(&self, quad: &ChartQuadrature) -> SampledConnection {
        let out = par_range(quad.len(), |n| self.jet(&quad.nodes[n]));
        let (charts, jets) = out.into_iter().unzip();
        SampledConnection::new(quad, self.q.eps, jets, charts, Some(self.q))
    }

    /// `|bubble chart transported by t − background|` at `x ≠ p`.
    pub fn overlap_defect(&self, x: &P4) -> Result<f64> {
        if self.q.distance(x) == 0.0 {
            return Err(YmbError::SingularPoint);
        }
        let t = self.q.transition(&D1::point(x));
        let mc = maurer_cartan(&t);
        let tv = t.value();
        let b = self.bubble_eval(x);
        let bg = self.background_eval(x);
        let mut worst: f64 = 0.0;
        for j in 0..4 {
            let moved = conjugate(tv.conj(), b[j]) + mc[j].scalef(1.0 / self.q.eps);
            let d = moved - bg[j];
            worst = worst.max(d.dot(d).sqrt());
        }
        Ok(worst)
    }

    /// Largest difference between the tangential traces of `A(q)` and `A̲` on S³ nodes.
    pub fn boundary_trace_defect(&self, dirs: &[P4]) -> f64 {
        dirs.iter()
            .map(|z| {
                let a = tangential(&self.background_eval(z), z);
                let b = tangential(&self.small.value(z), z);
                (0..4).map(|j| (a[j] - b[j]).dot(a[j] - b[j])).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// A connection sampled with first derivatives at quadrature nodes, each node
/// in its own gauge chart.
#[derive(Clone, Debug)]
pub struct SampledConnection {
    pub quad: ChartQuadrature,
    pub eps: f64,
    pub jets: Vec<Jet1>,
    pub charts: Vec<GaugeChart>,
    /// Bubble data when some nodes use the bubble gauge.
    pub glue: Option<GlueParams>,
    /// `F_A^ε` at the nodes.
    pub curv: Vec<Form2>,
}

impl SampledConnection {
    pub fn new(
        quad: &ChartQuadrature,
        eps: f64,
        jets: Vec<Jet1>,
        charts: Vec<GaugeChart>,
        glue: Option<GlueParams>,
    ) -> Self {
        let curv = par_range(jets.len(), |n| curvature_jet(&jets[n], eps));
        SampledConnection {
            quad: quad.clone(),
            eps,
            jets,
            charts,
            glue,
            curv,
        }
    }

    /// A globally defined field, every node in the background chart.
    pub fn from_field<F: Field1>(field: &F, quad: &ChartQuadrature, eps: f64) -> Self {
        let jets = par_range(quad.len(), |n| field.jet(&quad.nodes[n]));
        SampledConnection::new(quad, eps, jets, vec![GaugeChart::Background; quad.len()], None)
    }

    pub fn len(&self) -> usize {
        self.jets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jets.is_empty()
    }
}

/// `𝓨𝓜_ε(A) = ∫ |F_A^ε|²`.
pub fn ym_action(conn: &SampledConnection) -> f64 {
    integrate(&conn.quad.weights, |n| norm_sq_n(&conn.curv[n]))
}

/// `∫ Tr(F ∧ F)`.
pub fn chern_integral(conn: &SampledConnection) -> f64 {
    integrate(&conn.quad.weights, |n| chern_pointwise(&conn.curv[n]))
}

/// Relative second Chern number of `A(q)` with respect to `A̲`, in units of
/// `8π²`, oriented so that the self-dual bubble counts `+1`.
pub fn relative_chern(glued: &GluedConnection, grid: &BubbleGrid) -> f64 {
    let quad = ChartQuadrature::bubble(glued.q.p, glued.q.lambda, grid);
    let a = glued.sample(&quad);
    let b = SampledConnection::from_field(&glued.small, &quad, glued.q.eps);
    relative_chern_sampled(&a, &b)
}

pub fn relative_chern_sampled(a: &SampledConnection, base: &SampledConnection) -> f64 {
    let e2 = a.eps * a.eps;
    -(e2 * chern_integral(a) - e2 * chern_integral(base)) / EIGHT_PI_SQ
}

/// `𝓕_ε(q) = 2λ⁴F(p) − 4ελ²T(g)`.
pub fn reduced_functional(rep: &MomentReport, lambda: f64, eps: f64, g: &UnitQuat) -> f64 {
    let l2 = lambda * lambda;
    2.0 * l2 * l2 * rep.f - 4.0 * eps * l2 * rotation_pairing(&rep.matrix(), g)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub q: GlueRecord,
    /// `J_ε(q) = ε² 𝓨𝓜_ε(A(q))`.
    pub j: f64,
    pub instanton: f64,
    /// `ε² 𝓨𝓜_ε(A̲_ε)`.
    pub small_action: f64,
    /// `𝓕_ε(q)`.
    pub reduced: f64,
    pub r1: f64,
    /// `ε²∫|F|²` over `B⁴∖B_{2λ}(p)`, `B_{2λ}∖B_{λ/2}`, `B_{λ/2}∖B_{λ/4}` and `B_{λ/4}`.
    pub subdomains: [f64; 4],
    pub chern: f64,
    pub quadrature_hash: String,
}

impl ExpansionReport {
    /// `J − (8π² + ε²𝓨𝓜(A̲_ε) + 𝓕_ε + r₁)`, zero by construction.
    pub fn bookkeeping_defect(&self) -> f64 {
        self.j - (self.instanton + self.small_action + self.reduced + self.r1)
    }
}

/// `J_ε(q)` and its expansion, with `ε²𝓨𝓜(A̲_ε)` on the same quadrature as `J`.
pub fn j_eps(glued: &GluedConnection, rep: &MomentReport, grid: &BubbleGrid) -> Result<ExpansionReport> {
    let q = glued.q;
    if rep.p != q.p {
        return Err(YmbError::InvalidParams(
            "moment report is for another bubble center".into(),
        ));
    }
    let quad = ChartQuadrature::bubble(q.p, q.lambda, grid);
    let a = glued.sample(&quad);
    let b = SampledConnection::from_field(&glued.small, &quad, q.eps);
    let (fa, fb) = (&a.curv, &b.curv);
    let e2 = q.eps * q.eps;
    let radii = quad.radii();
    let l = q.lambda;
    let region = |r: f64| {
        if r >= 2.0 * l {
            0
        } else if r >= 0.5 * l {
            1
        } else if r >= 0.25 * l {
            2
        } else {
            3
        }
    };
    let subdomains: [f64; 4] = std::array::from_fn(|k| {
        e2 * integrate(&quad.weights, |n| {
            if region(radii[n]) == k {
                norm_sq_n(&fa[n])
            } else {
                0.0
            }
        })
    });
    let j = e2 * integrate(&quad.weights, |n| norm_sq_n(&fa[n]));
    let small_action = e2 * integrate(&quad.weights, |n| norm_sq_n(&fb[n]));
    let chern = -e2 * integrate(&quad.weights, |n| chern_pointwise(&fa[n]) - chern_pointwise(&fb[n])) / EIGHT_PI_SQ;
    let reduced = reduced_functional(rep, q.lambda, q.eps, &q.g);
    let r1 = j - EIGHT_PI_SQ - small_action - reduced;
    Ok(ExpansionReport {
        q: q.record(),
        j,
        instanton: EIGHT_PI_SQ,
        small_action,
        reduced,
        r1,
        subdomains,
        chern,
        quadrature_hash: quad.hash(),
    })
}
