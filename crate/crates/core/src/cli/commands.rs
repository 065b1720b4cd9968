//! Scenario runners behind the `ymb` subcommands. Each returns a serializable
//! study with its pass/fail checks; writing files is left to the caller.

use super::config::RunConfig;
use crate::algebra::{Quat, UnitQuat};
use crate::error::{Result, YmbError};
use crate::fields::{ChartQuadrature, S3Rule, P4};
use crate::gluing::{
    gradient_envelope, hessian_positivity_probe, j_eps, tangent_frame, EnvelopeReport, ExpansionReport, GlueParams,
    GluedConnection, PositivityReport, SampledConnection,
};
use crate::harmonic::{l21_norm, small_solution_cached, solve_d0_cached, D0Solution, GalerkinSpace};
use crate::instanton::{action_and_asd, gluing_residual, InstantonParams};
use crate::numerics::loglog_slope;
use crate::reduced::{landscape_scan, optimal_bubble, BubbleOptimum, MomentContext, MomentReport, ScanResult};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance rule, e.g. `"<= 1e-8"`.
    pub rule: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            value,
            rule: format!("<= {bound:e}"),
            pass: value <= bound,
        }
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            value,
            rule: format!(">= {bound}"),
            pass: value >= bound,
        }
    }

    pub fn positive(name: &str, value: f64) -> Check {
        Check {
            name: name.into(),
            value,
            rule: "> 0".into(),
            pass: value > 0.0,
        }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Check {
        Check {
            name: name.into(),
            value,
            rule: format!("in [{lo}, {hi}]"),
            pass: (lo..=hi).contains(&value),
        }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// Boundary data, its Galerkin space and the solution of the linear problem.
pub struct Setup {
    pub space: GalerkinSpace,
    pub d0: D0Solution,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let bdry = cfg.boundary.load(&S3Rule::new(cfg.grids.boundary_l))?;
        let space = GalerkinSpace::new(cfg.grids.d0.clone());
        let d0 = solve_d0_cached(&space, &bdry)?;
        Ok(Setup { space, d0 })
    }

    pub fn grid_hashes(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("galerkin".to_string(), self.space.hash.clone()),
            ("boundary".to_string(), self.d0.boundary_hash.clone()),
        ])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstantonStudy {
    pub lambda: f64,
    /// `ε²𝓨𝓜_ε` of the ε-scaled instanton over ℝ⁴; independent of ε.
    pub action: f64,
    pub asd_ratio: f64,
    pub max_gluing_residual: f64,
    pub scale_actions: Vec<(f64, f64)>,
    pub grid_hashes: BTreeMap<String, String>,
    pub checks: Vec<Check>,
}

pub fn instanton_check(cfg: &RunConfig) -> Result<InstantonStudy> {
    let ic = &cfg.instanton;
    let ip = InstantonParams::new([0.0; 4], ic.lambda)?;
    let quad = ChartQuadrature::r4(ip.p, ip.lambda, &cfg.grids.bubble);
    let (action, anti) = action_and_asd(&ip, &quad);
    let eight = 8.0 * PI * PI;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..ic.overlap_points {
        let r = ic.lambda * rng.gen_range(0.05..20.0);
        let v: P4 = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-12);
        let x = v.map(|c| r * c / n);
        worst = worst.max(gluing_residual(&ip, &x)?);
    }
    let mut scale_actions = Vec::new();
    for &l in &ic.lambdas {
        let ipl = InstantonParams::new([0.0; 4], l)?;
        let (a, _) = action_and_asd(&ipl, &ChartQuadrature::r4(ipl.p, l, &cfg.grids.bubble));
        scale_actions.push((l, a));
    }
    let spread = scale_actions
        .iter()
        .map(|(_, a)| (a - action).abs() / action)
        .fold(0.0, f64::max);
    let tol = &cfg.tolerances;
    let checks = vec![
        Check::at_most("action_rel_error", (action / eight - 1.0).abs(), tol.action_rel),
        Check::at_most("asd_ratio", anti / action, tol.asd_ratio),
        Check::at_most("gluing_residual", worst, tol.gluing_residual),
        Check::at_most("scale_invariance", spread, tol.scale_invariance),
    ];
    Ok(InstantonStudy {
        lambda: ic.lambda,
        action,
        asd_ratio: anti / action,
        max_gluing_residual: worst,
        scale_actions,
        grid_hashes: BTreeMap::from([("r4".to_string(), quad.hash())]),
        checks,
    })
}

pub fn landscape(cfg: &RunConfig, setup: &Setup) -> Result<ScanResult> {
    let ctx = MomentContext::new(Some(&setup.d0), &cfg.grids.reduced, cfg.scan.d0);
    landscape_scan(&ctx, cfg.which_g, &cfg.scan)
}

/// The bubble used by expansion studies and probes: `p` from the config,
/// `g` from the config or the optimal rotation at `p`.
pub fn fixture_rotation(cfg: &RunConfig, rep: &MomentReport) -> Result<(UnitQuat, BubbleOptimum)> {
    let eps = cfg.eps.first().copied().unwrap_or(0.01);
    let opt = optimal_bubble(rep, eps, (cfg.glue.d1, cfg.glue.d2));
    let g = cfg.g.unwrap_or(opt.g);
    let g = UnitQuat::new(Quat::from_vec(g))
        .ok_or_else(|| YmbError::InvalidParams(format!("g = {g:?} is not a unit quaternion")))?;
    Ok((g, opt))
}

pub fn glue_at(cfg: &RunConfig, setup: &Setup, g: UnitQuat, eps: f64) -> Result<GluedConnection> {
    let small = small_solution_cached(&setup.space, &setup.d0, eps, &cfg.picard)?;
    let q = GlueParams::new(cfg.p, g, (cfg.lambda_ratio * eps).sqrt(), eps, &cfg.glue)?;
    Ok(GluedConnection::new(q, &small.a))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionStudy {
    pub optimum: BubbleOptimum,
    pub rows: Vec<ExpansionReport>,
    /// Log–log slope of `|r₁|` against `ε`.
    pub slope: f64,
    pub grid_hashes: BTreeMap<String, String>,
    pub checks: Vec<Check>,
}

impl ExpansionStudy {
    pub fn csv_header() -> [&'static str; 9] {
        [
            "eps",
            "lambda",
            "J",
            "term1",
            "term2",
            "term3",
            "r1",
            "chern",
            "min_rayleigh",
        ]
    }

    pub fn csv_rows(&self) -> Vec<[f64; 9]> {
        self.rows
            .iter()
            .map(|r| {
                [
                    r.q.eps,
                    r.q.lambda,
                    r.j,
                    r.instanton,
                    r.small_action,
                    r.reduced,
                    r.r1,
                    r.chern,
                    f64::NAN,
                ]
            })
            .collect()
    }
}

pub fn expansion_study(cfg: &RunConfig, setup: &Setup) -> Result<ExpansionStudy> {
    if cfg.eps.len() < 3 {
        return Err(YmbError::InvalidParams(format!(
            "expansion study needs at least 3 ε values, got {}",
            cfg.eps.len()
        )));
    }
    let ctx = MomentContext::new(Some(&setup.d0), &cfg.grids.reduced_fine, cfg.glue.d0);
    let rep = ctx.report(&cfg.p)?;
    let (g, optimum) = fixture_rotation(cfg, &rep)?;
    let mut rows = Vec::new();
    let mut hashes = setup.grid_hashes();
    for &eps in &cfg.eps {
        let glued = glue_at(cfg, setup, g, eps)?;
        let r = j_eps(&glued, &rep, &cfg.grids.bubble)?;
        hashes.insert(format!("bubble_eps_{eps}"), r.quadrature_hash.clone());
        rows.push(r);
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.q.eps).collect();
    let r1: Vec<f64> = rows.iter().map(|r| r.r1.abs()).collect();
    let slope = loglog_slope(&eps, &r1)
        .ok_or_else(|| YmbError::DegenerateFit("r1 slope needs distinct ε and r1 ≠ 0".into()))?;
    let tol = &cfg.tolerances;
    let mut checks = vec![Check::at_least("r1_slope", slope, tol.r1_slope_min)];
    for r in &rows {
        checks.push(Check::at_most(
            &format!("chern_eps_{}", r.q.eps),
            (r.chern - 1.0).abs(),
            tol.chern,
        ));
        checks.push(Check::at_most(
            &format!("bookkeeping_eps_{}", r.q.eps),
            r.bookkeeping_defect().abs(),
            1e-12 * r.j,
        ));
    }
    Ok(ExpansionStudy {
        optimum,
        rows,
        slope,
        grid_hashes: hashes,
        checks,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeAtEps {
    pub eps: f64,
    pub lambda: f64,
    pub frame_rank: usize,
    pub frame_condition: f64,
    pub positivity: PositivityReport,
    /// `min projected quotient / max frame quotient`.
    pub near_kernel_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeStudy {
    pub per_eps: Vec<ProbeAtEps>,
    pub envelope: EnvelopeReport,
    pub grid_hashes: BTreeMap<String, String>,
    pub checks: Vec<Check>,
    /// Checks reported but not part of the exit status.
    pub informational: Vec<Check>,
}

pub fn probe(cfg: &RunConfig, setup: &Setup) -> Result<ProbeStudy> {
    let ctx = MomentContext::new(Some(&setup.d0), &cfg.grids.reduced, cfg.glue.d0);
    let rep = ctx.report(&cfg.p)?;
    let (g, _) = fixture_rotation(cfg, &rep)?;
    let bdirs = S3Rule::new(cfg.grids.trace_l).dirs;
    let mut per_eps = Vec::new();
    let mut conns: Vec<SampledConnection> = Vec::new();
    let mut hashes = setup.grid_hashes();
    for &eps in &cfg.probe.eps {
        let glued = glue_at(cfg, setup, g, eps)?;
        let quad = ChartQuadrature::bubble(glued.q.p, glued.q.lambda, &cfg.grids.probe);
        hashes.insert(format!("probe_eps_{eps}"), quad.hash());
        let conn = glued.sample(&quad);
        let frame = tangent_frame(&glued, &conn, &cfg.glue, &bdirs)?;
        let positivity = hessian_positivity_probe(&conn, Some(&frame), cfg.probe.samples, cfg.seed, &bdirs)?;
        per_eps.push(ProbeAtEps {
            eps,
            lambda: glued.q.lambda,
            frame_rank: frame.rank,
            frame_condition: frame.condition,
            near_kernel_ratio: positivity.min_quotient / positivity.max_frame_quotient(),
            positivity,
        });
        conns.push(conn);
    }
    let envelope = gradient_envelope(&conns, cfg.probe.gradient_forms, cfg.seed, &bdirs)?;
    let tol = &cfg.tolerances;
    let mut checks = Vec::new();
    let mut informational = Vec::new();
    for r in &per_eps {
        checks.push(Check::positive(
            &format!("min_rayleigh_eps_{}", r.eps),
            r.positivity.min_quotient,
        ));
        checks.push(Check::at_least(
            &format!("frame_rank_eps_{}", r.eps),
            r.frame_rank as f64,
            8.0,
        ));
        informational.push(Check::at_least(
            &format!("near_kernel_ratio_eps_{}", r.eps),
            r.near_kernel_ratio,
            tol.near_kernel_ratio,
        ));
    }
    checks.push(Check::at_most("envelope_spread", envelope.spread, tol.envelope_spread));
    Ok(ProbeStudy {
        per_eps,
        envelope,
        grid_hashes: hashes,
        checks,
        informational,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmallRow {
    pub eps: f64,
    pub iterations: usize,
    /// `‖A̲_ε − A̲₀‖_{L²₁}` on the Galerkin quadrature.
    pub l21: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmallStudy {
    pub rows: Vec<SmallRow>,
    pub slope: Option<f64>,
    pub grid_hashes: BTreeMap<String, String>,
    pub checks: Vec<Check>,
}

pub fn small_solution(cfg: &RunConfig, setup: &Setup) -> Result<SmallStudy> {
    let mut rows = Vec::new();
    for &eps in &cfg.small_eps {
        let s = crate::harmonic::small_solution_picard(&setup.space, &setup.d0, eps, &cfg.picard)?;
        rows.push(SmallRow {
            eps,
            iterations: s.iterations,
            l21: l21_norm(&s.omega, &setup.space.quad)?,
        });
    }
    let fit: Vec<&SmallRow> = rows.iter().filter(|r| r.eps > 0.0).collect();
    let slope = if fit.len() >= 2 {
        loglog_slope(
            &fit.iter().map(|r| r.eps).collect::<Vec<_>>(),
            &fit.iter().map(|r| r.l21).collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let mut checks = Vec::new();
    if let Some(s) = slope {
        let (lo, hi) = cfg.tolerances.small_slope;
        checks.push(Check::within("omega_slope", s, lo, hi));
    }
    for r in rows.iter().filter(|r| r.eps == 0.0) {
        checks.push(Check::at_most("omega_at_eps_0", r.l21, 0.0));
    }
    Ok(SmallStudy {
        rows,
        slope,
        grid_hashes: setup.grid_hashes(),
        checks,
    })
}
