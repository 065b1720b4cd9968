//! Test forms, the tangent frame of `q ↦ A(q)`, and the gradient and
//! modified-Hessian probes.

use super::{cutoff, GaugeChart, GlueConfig, GlueParams, GluedConnection, SampledConnection};
use crate::ad::{Real, D1, D2};
use crate::algebra::{conjugate, inner, ImQuat, Quat, UnitQuat};
use crate::error::{Result, YmbError};
use crate::fields::{bracket_wedge, codiff1_pointwise, cov_grad, covariant_d_jet, dot_n, norm_sq_n, Form1, Jet1, P4};
use crate::harmonic::poly::tangential;
use crate::numerics::{integrate, par_range};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BumpGauge {
    /// Defined in the bubble trivialization.
    Bubble,
    /// Defined in the background trivialization and cut off inside `B_{λ/2}(p)`.
    Background,
}

/// `(1 − |x|²) e^{−|x−c|²/w²} Σ_j coef[j] dx^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: P4,
    pub width: f64,
    pub coef: [[f64; 3]; 4],
    pub gauge: BumpGauge,
}

impl Bump {
    fn eval_own<S: Real>(&self, x: &[S; 4], glue: Option<&GlueParams>) -> Form1<S> {
        let mut d2 = S::zero();
        let mut r2 = S::zero();
        for i in 0..4 {
            let d = x[i] - self.center[i];
            d2 += d * d;
            r2 += x[i] * x[i];
        }
        let mut amp = (S::one() - r2) * (d2 * (-1.0 / (self.width * self.width))).exp();
        if let (BumpGauge::Background, Some(q)) = (self.gauge, glue) {
            amp = amp * (S::one() - cutoff(0.25 * q.lambda, &q.p, x));
        }
        std::array::from_fn(|j| ImQuat::from_arr(self.coef[j].map(|c| amp * c)))
    }

    /// The bump in the trivialization of `chart`.
    pub fn eval_in<S: Real>(&self, x: &[S; 4], chart: GaugeChart, glue: Option<&GlueParams>) -> Form1<S> {
        let own = self.eval_own(x, glue);
        match (self.gauge, chart, glue) {
            (BumpGauge::Bubble, GaugeChart::Background, Some(q)) => {
                let t = q.transition(x);
                own.map(|c| conjugate(t.conj(), c))
            }
            (BumpGauge::Background, GaugeChart::Bubble, Some(q)) => {
                let t = q.transition(x);
                own.map(|c| conjugate(t, c))
            }
            _ => own,
        }
    }
}

/// A Lie-algebra valued 1-form sampled with first derivatives at the nodes of
/// a [`SampledConnection`], in the same gauge charts.
#[derive(Clone, Debug)]
pub struct SampledForm {
    pub jets: Vec<Jet1>,
    /// Largest tangential value on the boundary check points.
    pub trace_defect: f64,
    /// Largest value at the nodes, the scale for the trace check.
    pub scale: f64,
}

fn max_value(jets: &[Jet1]) -> f64 {
    jets.iter()
        .map(|j| j.v.iter().map(|c| c.dot(*c)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn trace_of(values: &[(P4, Form1)]) -> f64 {
    values
        .iter()
        .map(|(z, a)| {
            let t = tangential(a, z);
            t.iter().map(|c| c.dot(*c)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}

impl SampledForm {
    pub fn from_jets(jets: Vec<Jet1>, boundary: &[(P4, Form1)]) -> Self {
        let scale = max_value(&jets);
        SampledForm {
            trace_defect: trace_of(boundary),
            scale,
            jets,
        }
    }

    pub fn from_bumps(bumps: &[Bump], conn: &SampledConnection, boundary: &[P4]) -> Self {
        let glue = conn.glue.as_ref();
        let jets = par_range(conn.len(), |n| {
            let x = D1::point(&conn.quad.nodes[n]);
            let mut acc = [ImQuat::<D1>::zero(); 4];
            for b in bumps {
                let v = b.eval_in(&x, conn.charts[n], glue);
                for j in 0..4 {
                    acc[j] = acc[j] + v[j];
                }
            }
            Jet1::from_d1(&acc)
        });
        let bvals: Vec<(P4, Form1)> = boundary
            .iter()
            .map(|z| {
                let mut acc = [ImQuat::zero(); 4];
                for b in bumps {
                    let v = b.eval_in(z, GaugeChart::Background, glue);
                    for j in 0..4 {
                        acc[j] = acc[j] + v[j];
                    }
                }
                (*z, acc)
            })
            .collect();
        SampledForm::from_jets(jets, &bvals)
    }

    pub fn zeros(n: usize) -> Self {
        SampledForm {
            jets: vec![Jet1::default(); n],
            trace_defect: 0.0,
            scale: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.jets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jets.is_empty()
    }

    /// `a·self + b·other`.
    pub fn lin(&self, a: f64, other: &SampledForm, b: f64) -> SampledForm {
        let jets: Vec<Jet1> = self.jets.iter().zip(&other.jets).map(|(x, y)| x.lin(a, y, b)).collect();
        SampledForm {
            scale: max_value(&jets),
            trace_defect: a.abs() * self.trace_defect + b.abs() * other.trace_defect,
            jets,
        }
    }
}

const TRACE_TOL: f64 = 1e-8;

fn check_trace(a: &SampledForm, n: usize) -> Result<()> {
    if a.len() != n {
        return Err(YmbError::GridMismatch(a.len(), n));
    }
    if a.trace_defect > TRACE_TOL * a.scale.max(1.0) {
        return Err(YmbError::TraceViolation(a.trace_defect));
    }
    Ok(())
}

/// `∇𝓨𝓜_ε(A)(a) = 2 ∫ (F_A^ε, d_A^ε a)`.
pub fn gradient_pairing(conn: &SampledConnection, a: &SampledForm) -> Result<f64> {
    check_trace(a, conn.len())?;
    let e = conn.eps;
    Ok(2.0
        * integrate(&conn.quad.weights, |n| {
            dot_n(&conn.curv[n], &covariant_d_jet(&conn.jets[n].v, e, &a.jets[n]))
        }))
}

/// `𝓗_A(a, b) = ∫ (d_A a, d_A b) + ε(F_A, [a∧b]) + (d_A* a, d_A* b)`.
pub fn modified_hessian(conn: &SampledConnection, a: &SampledForm, b: &SampledForm) -> Result<f64> {
    check_trace(a, conn.len())?;
    check_trace(b, conn.len())?;
    let e = conn.eps;
    Ok(integrate(&conn.quad.weights, |n| {
        let av = &conn.jets[n].v;
        let (ja, jb) = (&a.jets[n], &b.jets[n]);
        dot_n(&covariant_d_jet(av, e, ja), &covariant_d_jet(av, e, jb))
            + e * dot_n(&conn.curv[n], &bracket_wedge(&ja.v, &jb.v))
            + inner(codiff1_pointwise(av, e, ja), codiff1_pointwise(av, e, jb))
    }))
}

/// `(a, b)_{A;1,2} = ∫ (∇_A a, ∇_A b) + (a, b)`.
pub fn sobolev_inner(conn: &SampledConnection, a: &SampledForm, b: &SampledForm) -> f64 {
    let e = conn.eps;
    integrate(&conn.quad.weights, |n| {
        let av = &conn.jets[n].v;
        let (ga, gb) = (cov_grad(av, e, &a.jets[n]), cov_grad(av, e, &b.jets[n]));
        (0..4).map(|i| dot_n(&ga[i], &gb[i])).sum::<f64>() + dot_n(&a.jets[n].v, &b.jets[n].v)
    })
}

/// `‖a‖_{A;1,2} = ‖∇_A a‖_{L²} + ‖a‖_{L²}`.
pub fn sobolev_norm12(conn: &SampledConnection, a: &SampledForm) -> f64 {
    let e = conn.eps;
    let g2 = integrate(&conn.quad.weights, |n| {
        cov_grad(&conn.jets[n].v, e, &a.jets[n])
            .iter()
            .map(norm_sq_n)
            .sum::<f64>()
    });
    let a2 = integrate(&conn.quad.weights, |n| norm_sq_n(&a.jets[n].v));
    g2.sqrt() + a2.sqrt()
}

/// Random test forms: background bumps across the ball and, next to a bubble,
/// bumps of scale λ in the bubble trivialization.
pub fn bump_forms(seed: u64, n: usize, glue: Option<&GlueParams>) -> Vec<Vec<Bump>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_bumps(&mut rng, glue)).collect()
}

fn random_coef(rng: &mut ChaCha8Rng) -> [[f64; 3]; 4] {
    std::array::from_fn(|_| std::array::from_fn(|_| rng.sample(StandardNormal)))
}

fn random_bumps(rng: &mut ChaCha8Rng, glue: Option<&GlueParams>) -> Vec<Bump> {
    let background = |rng: &mut ChaCha8Rng| {
        let center = loop {
            let c: P4 = std::array::from_fn(|_| rng.gen_range(-0.8..0.8));
            if c.iter().map(|v| v * v).sum::<f64>() < 0.64 {
                break c;
            }
        };
        Bump {
            center,
            width: rng.gen_range(0.15..0.4),
            coef: random_coef(rng),
            gauge: BumpGauge::Background,
        }
    };
    let Some(q) = glue else {
        return vec![background(rng)];
    };
    let bubble = |rng: &mut ChaCha8Rng| Bump {
        center: std::array::from_fn(|i| q.p[i] + q.lambda * rng.gen_range(-0.5..0.5)),
        width: q.lambda * rng.gen_range(0.5..1.5),
        coef: random_coef(rng),
        gauge: BumpGauge::Bubble,
    };
    match rng.gen_range(0..3) {
        0 => vec![background(rng)],
        1 => vec![bubble(rng)],
        _ => vec![background(rng), bubble(rng)],
    }
}

/// A coordinate of `q = (p, g, λ)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameDirection {
    P(usize),
    /// Right translation `g ↦ g exp(t e_j)`.
    Xi(usize),
    Lambda,
}

impl FrameDirection {
    pub fn all() -> [FrameDirection; 8] {
        [
            FrameDirection::P(0),
            FrameDirection::P(1),
            FrameDirection::P(2),
            FrameDirection::P(3),
            FrameDirection::Xi(0),
            FrameDirection::Xi(1),
            FrameDirection::Xi(2),
            FrameDirection::Lambda,
        ]
    }

    pub fn step(&self, q: &GlueParams) -> f64 {
        match self {
            FrameDirection::Xi(_) => 1e-3,
            _ => (1e-3 * q.lambda).max(1e-5),
        }
    }

    fn shifted(&self, q: &GlueParams, s: f64, cfg: &GlueConfig) -> Result<GlueParams> {
        let (mut p, mut g, mut l) = (q.p, q.g, q.lambda);
        match *self {
            FrameDirection::P(i) => p[i] += s,
            FrameDirection::Xi(j) => g = g.mul(&UnitQuat::exp(ImQuat::basis(j).scalef(s))),
            FrameDirection::Lambda => l += s,
        }
        GlueParams::new(p, g, l, q.eps, cfg)
    }
}

/// `u⁻¹du` for a unit quaternion field known to second order.
fn maurer_cartan_d2(u: &Quat<D2>) -> Form1<D1> {
    let comp = |f: &dyn Fn(&D2) -> f64| Quat::new(f(&u.w), f(&u.x), f(&u.y), f(&u.z));
    let u0 = comp(&|s| s.v);
    let du: [Quat; 4] = std::array::from_fn(|j| comp(&|s| s.g[j]));
    let ddu: [[Quat; 4]; 4] = std::array::from_fn(|k| std::array::from_fn(|j| comp(&|s| s.h[k][j])));
    std::array::from_fn(|j| {
        let v = (u0.conj() * du[j]).im();
        let g: [ImQuat; 4] = std::array::from_fn(|k| (du[k].conj() * du[j] + u0.conj() * ddu[k][j]).im());
        ImQuat::new(
            D1 {
                v: v.x1,
                g: g.map(|c| c.x1),
            },
            D1 {
                v: v.x2,
                g: g.map(|c| c.x2),
            },
            D1 {
                v: v.x3,
                g: g.map(|c| c.x3),
            },
        )
    })
}

/// Background-chart value of `A(q')` moved into the base trivialization near
/// the bubble: gauge transformed by `u = nlerp(1, t(q')⁻¹t(q); β_{λ/4,p})`.
fn moved_background(base: &GlueParams, other: &GluedConnection, x: &P4) -> Jet1 {
    let x2 = D2::point(x);
    let tq = base.transition(&x2);
    let tq2 = other.q.transition(&x2);
    let w = tq2.conj() * tq;
    let chi = cutoff(0.25 * base.lambda, &base.p, &x2);
    let v = w.scale(chi) + Quat::real(D2::one() - chi);
    let u = v.scale(v.norm().recip());
    let mc = maurer_cartan_d2(&u);
    let b = other.background_eval(&D1::point(x));
    let u1 = u.map(|s: D2| s.d1());
    let inv_eps = 1.0 / base.eps;
    let f: Form1<D1> = std::array::from_fn(|j| conjugate(u1.conj(), b[j]) + mc[j].scalef(inv_eps));
    Jet1::from_d1(&f)
}

fn frame_jet(base: &GlueParams, other: &GluedConnection, x: &P4, chart: GaugeChart) -> Jet1 {
    match chart {
        GaugeChart::Bubble => Jet1::from_d1(&other.bubble_eval(&D1::point(x))),
        GaugeChart::Background => moved_background(base, other, x),
    }
}

/// The eight fields `∂A(q)/∂q` and their Gram matrix under `(·,·)_{A(q);1,2}`.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    pub directions: Vec<FrameDirection>,
    pub fields: Vec<SampledForm>,
    pub gram: DMatrix<f64>,
    pub rank: usize,
    pub condition: f64,
}

pub fn tangent_frame(
    glued: &GluedConnection,
    conn: &SampledConnection,
    cfg: &GlueConfig,
    boundary: &[P4],
) -> Result<TangentFrame> {
    let base = glued.q;
    if conn.glue != Some(base) {
        return Err(YmbError::InvalidParams(
            "sampled connection is not A(q) for this q".into(),
        ));
    }
    let dirs = FrameDirection::all();
    let mut fields = Vec::with_capacity(8);
    for d in dirs {
        let h = d.step(&base);
        let plus = glued.with_params(d.shifted(&base, h, cfg)?);
        let minus = glued.with_params(d.shifted(&base, -h, cfg)?);
        let jets = par_range(conn.len(), |n| {
            let x = &conn.quad.nodes[n];
            let c = conn.charts[n];
            frame_jet(&base, &plus, x, c).lin(0.5 / h, &frame_jet(&base, &minus, x, c), -0.5 / h)
        });
        let bvals: Vec<(P4, Form1)> = boundary
            .iter()
            .map(|z| {
                let a = frame_jet(&base, &plus, z, GaugeChart::Background).v;
                let b = frame_jet(&base, &minus, z, GaugeChart::Background).v;
                (*z, std::array::from_fn(|j| (a[j] - b[j]).scalef(0.5 / h)))
            })
            .collect();
        fields.push(SampledForm::from_jets(jets, &bvals));
    }
    let gram = DMatrix::from_fn(8, 8, |i, j| {
        if i <= j {
            sobolev_inner(conn, &fields[i], &fields[j])
        } else {
            0.0
        }
    });
    let gram = DMatrix::from_fn(8, 8, |i, j| if i <= j { gram[(i, j)] } else { gram[(j, i)] });
    let eig = gram.clone().symmetric_eigen().eigenvalues;
    let emax = eig.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let emin = eig.iter().fold(f64::INFINITY, |m: f64, v| m.min(*v));
    let rank = eig.iter().filter(|v| **v > 1e-10 * emax).count();
    Ok(TangentFrame {
        directions: dirs.to_vec(),
        fields,
        gram,
        rank,
        condition: if emin > 0.0 { emax / emin } else { f64::INFINITY },
    })
}

impl TangentFrame {
    /// The `(·,·)_{1,2}`-orthogonal projection of `a` off the frame.
    pub fn project_out(&self, conn: &SampledConnection, a: &SampledForm) -> Result<SampledForm> {
        let b = DVector::from_iterator(8, self.fields.iter().map(|t| sobolev_inner(conn, t, a)));
        let c = self
            .gram
            .clone()
            .cholesky()
            .ok_or_else(|| YmbError::DegenerateFit("tangent frame Gram matrix is singular".into()))?
            .solve(&b);
        let mut out = a.clone();
        for (k, t) in self.fields.iter().enumerate() {
            out = out.lin(1.0, t, -c[k]);
        }
        // The frame's own trace defect is rounding-level; keep the sample's.
        out.trace_defect = a.trace_defect;
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PositivityReport {
    pub seed: u64,
    pub min_quotient: f64,
    pub quotients: Vec<f64>,
    /// `𝓗(t,t)/‖t‖²` for each frame field, in the order of [`FrameDirection::all`].
    pub frame_quotients: Vec<f64>,
    pub resampled: usize,
}

impl PositivityReport {
    pub fn max_frame_quotient(&self) -> f64 {
        self.frame_quotients.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }
}

fn rayleigh(conn: &SampledConnection, a: &SampledForm) -> Result<f64> {
    let n = sobolev_norm12(conn, a);
    Ok(modified_hessian(conn, a, a)? / (n * n))
}

/// Minimum of `𝓗(a,a)/‖a‖²_{A;1,2}` over random test forms with the frame projected out.
pub fn hessian_positivity_probe(
    conn: &SampledConnection,
    frame: Option<&TangentFrame>,
    n_samples: usize,
    seed: u64,
    boundary: &[P4],
) -> Result<PositivityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quotients = Vec::with_capacity(n_samples);
    let mut resampled = 0;
    let cap = 10 * n_samples.max(1);
    while quotients.len() < n_samples {
        let a = SampledForm::from_bumps(&random_bumps(&mut rng, conn.glue.as_ref()), conn, boundary);
        let na = sobolev_norm12(conn, &a);
        let a = match frame {
            Some(f) => f.project_out(conn, &a)?,
            None => a,
        };
        if sobolev_norm12(conn, &a) < 1e-8 * na || na == 0.0 {
            resampled += 1;
            if resampled > cap {
                return Err(YmbError::DegenerateFit(format!("{resampled} degenerate samples")));
            }
            continue;
        }
        quotients.push(rayleigh(conn, &a)?);
    }
    let frame_quotients = match frame {
        Some(f) => f.fields.iter().map(|t| rayleigh(conn, t)).collect::<Result<Vec<_>>>()?,
        None => vec![],
    };
    Ok(PositivityReport {
        seed,
        min_quotient: quotients.iter().fold(f64::INFINITY, |m, v| m.min(*v)),
        quotients,
        frame_quotients,
        resampled,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub eps: Vec<f64>,
    /// Sampled `sup |∇𝓨𝓜_ε(A)(a)| / ‖a‖_{A;1,2}`.
    pub sup: Vec<f64>,
    /// `sup/√ε`.
    pub c: Vec<f64>,
    /// `max c / min c`.
    pub spread: f64,
}

/// Sampled gradient dual norms across connections at several `ε`.
pub fn gradient_envelope(
    conns: &[SampledConnection],
    n_forms: usize,
    seed: u64,
    boundary: &[P4],
) -> Result<EnvelopeReport> {
    let mut eps = Vec::new();
    let mut sup = Vec::new();
    for conn in conns {
        let mut best: f64 = 0.0;
        for bumps in bump_forms(seed, n_forms, conn.glue.as_ref()) {
            let a = SampledForm::from_bumps(&bumps, conn, boundary);
            let n = sobolev_norm12(conn, &a);
            if n > 0.0 {
                best = best.max(gradient_pairing(conn, &a)?.abs() / n);
            }
        }
        eps.push(conn.eps);
        sup.push(best);
    }
    let c: Vec<f64> = sup.iter().zip(&eps).map(|(s, e)| s / e.sqrt()).collect();
    let cmax = c.iter().fold(0.0, |m: f64, v| m.max(*v));
    let cmin = c.iter().fold(f64::INFINITY, |m: f64, v| m.min(*v));
    Ok(EnvelopeReport {
        eps,
        sup,
        c,
        spread: cmax / cmin,
    })
}
