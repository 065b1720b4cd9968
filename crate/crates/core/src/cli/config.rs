//! JSON run configuration.
//!
//! Every field has a default, so `{}` is a valid config. Example:
//!
//! ```json
//! {
//!   "boundary": { "family": "mixed" },
//!   "eps": [0.005, 0.01, 0.02, 0.04],
//!   "glue": { "d0": 0.5, "lambda0": 0.24, "d1": 0.1, "d2": 4.0 },
//!   "seed": 7
//! }
//! ```
//!
//! `boundary` is one of `{"family": NAME}` (`zero`, `single`, `two-direction`,
//! `mixed`), `{"terms": {...}}` with explicit linear and quadratic terms, or
//! `{"file": PATH}` pointing at a boundary CSV whose first line declares the
//! S³ node-set hash.

use crate::error::{Result, YmbError};
use crate::fields::quadrature::BubbleGrid;
use crate::fields::{S3Rule, P4};
use crate::gluing::GlueConfig;
use crate::harmonic::{BoundaryFamily, BoundaryForm, D0Grid, PicardConfig};
use crate::reduced::{GKind, ReducedGrid, ScanConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundarySpec {
    Family { family: String },
    Terms { terms: BoundaryFamily },
    File { file: PathBuf },
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec::Family { family: "mixed".into() }
    }
}

impl BoundarySpec {
    pub fn load(&self, rule: &S3Rule) -> Result<BoundaryForm> {
        match self {
            BoundarySpec::Family { family } => BoundaryFamily::by_name(family)
                .map(|f| f.boundary(rule))
                .ok_or_else(|| YmbError::InvalidParams(format!("unknown boundary family {family:?}"))),
            BoundarySpec::Terms { terms } => {
                terms.validate()?;
                Ok(terms.boundary(rule))
            }
            BoundarySpec::File { file } => {
                let f = std::fs::File::open(file)?;
                BoundaryForm::read_csv(std::io::BufReader::new(f))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    /// S³ rule for boundary data.
    pub boundary_l: usize,
    pub d0: D0Grid,
    /// Ball rule for `F` and `M` in the landscape scan.
    pub reduced: ReducedGrid,
    /// Ball rule for `F` and `M` in expansion studies, where `𝓕_ε` is compared with `J`.
    pub reduced_fine: ReducedGrid,
    pub bubble: BubbleGrid,
    /// Bubble rule for the Hessian and gradient probes.
    pub probe: BubbleGrid,
    /// S³ rule for boundary trace checks of test forms.
    pub trace_l: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            boundary_l: 8,
            d0: D0Grid::default(),
            reduced: ReducedGrid::default(),
            reduced_fine: ReducedGrid { s3_l: 20, n_radial: 24 },
            bubble: BubbleGrid::default(),
            probe: BubbleGrid::coarse(),
            trace_l: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstantonCheck {
    pub lambda: f64,
    /// Scales compared for scale invariance of the action.
    pub lambdas: Vec<f64>,
    pub overlap_points: usize,
}

impl Default for InstantonCheck {
    fn default() -> Self {
        InstantonCheck {
            lambda: 0.2,
            lambdas: vec![0.05, 0.2],
            overlap_points: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub eps: Vec<f64>,
    pub samples: usize,
    pub gradient_forms: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            eps: vec![0.005, 0.01, 0.02],
            samples: 50,
            gradient_forms: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ToleranceProfile {
    Default,
    Strict,
}

/// Pass/fail thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub action_rel: f64,
    pub asd_ratio: f64,
    pub gluing_residual: f64,
    pub chern: f64,
    pub r1_slope_min: f64,
    pub small_slope: (f64, f64),
    pub envelope_spread: f64,
    pub near_kernel_ratio: f64,
    pub scale_invariance: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances::profile(ToleranceProfile::Default)
    }
}

impl Tolerances {
    pub fn profile(p: ToleranceProfile) -> Self {
        match p {
            ToleranceProfile::Default => Tolerances {
                action_rel: 5e-3,
                asd_ratio: 1e-8,
                gluing_residual: 1e-12,
                chern: 1e-2,
                r1_slope_min: 2.7,
                small_slope: (0.8, 1.2),
                envelope_spread: 2.0,
                near_kernel_ratio: 10.0,
                scale_invariance: 1e-3,
            },
            ToleranceProfile::Strict => Tolerances {
                action_rel: 1e-5,
                asd_ratio: 1e-12,
                gluing_residual: 1e-13,
                chern: 1e-4,
                r1_slope_min: 2.8,
                small_slope: (0.9, 1.1),
                envelope_spread: 1.5,
                near_kernel_ratio: 10.0,
                scale_invariance: 1e-5,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub boundary: BoundarySpec,
    pub grids: Grids,
    pub glue: GlueConfig,
    pub picard: PicardConfig,
    /// Bubble center for expansion studies and probes.
    pub p: P4,
    /// Bubble rotation `[w, x, y, z]`; the optimal rotation at `p` when absent.
    pub g: Option<[f64; 4]>,
    /// `λ² = lambda_ratio · ε`.
    pub lambda_ratio: f64,
    /// Expansion-study ε list.
    pub eps: Vec<f64>,
    /// Small-solution study ε list.
    pub small_eps: Vec<f64>,
    pub probe: ProbeConfig,
    pub instanton: InstantonCheck,
    pub scan: ScanConfig,
    pub which_g: GKind,
    pub tolerances: Tolerances,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            boundary: BoundarySpec::default(),
            grids: Grids::default(),
            glue: GlueConfig::default(),
            picard: PicardConfig::default(),
            p: [0.2, 0.1, -0.1, 0.15],
            g: None,
            lambda_ratio: 1.0,
            eps: vec![0.005, 0.01, 0.02, 0.04],
            small_eps: vec![0.02, 0.04, 0.08],
            probe: ProbeConfig::default(),
            instanton: InstantonCheck::default(),
            scan: ScanConfig::default(),
            which_g: GKind::G1p,
            tolerances: Tolerances::default(),
            out: PathBuf::from("ymb-out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Reads a config, or the `config` member of a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| YmbError::InvalidParams(e.to_string()))?;
        let v = match v.get("manifest_version") {
            Some(_) => v
                .get("config")
                .cloned()
                .ok_or_else(|| YmbError::InvalidParams("manifest has no config".into()))?,
            None => v,
        };
        let cfg: RunConfig = serde_json::from_value(v).map_err(|e| YmbError::InvalidParams(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.glue.validate()?;
        let bad_eps = |v: &[f64]| v.iter().any(|e| !(e.is_finite() && *e >= 0.0));
        if bad_eps(&self.eps) || bad_eps(&self.small_eps) || bad_eps(&self.probe.eps) {
            return Err(YmbError::InvalidParams(
                "ε values must be finite and nonnegative".into(),
            ));
        }
        if let Some(e) = self.eps.iter().chain(&self.probe.eps).find(|e| **e == 0.0) {
            return Err(YmbError::InvalidParams(format!("gluing needs ε > 0, got {e}")));
        }
        if let Some(e) = self
            .eps
            .iter()
            .chain(&self.probe.eps)
            .find(|e| **e > self.picard.eps_max)
        {
            return Err(YmbError::InvalidParams(format!(
                "ε = {e} exceeds the Picard guard {}",
                self.picard.eps_max
            )));
        }
        if !(self.lambda_ratio > 0.0) {
            return Err(YmbError::InvalidParams(format!("lambda_ratio = {}", self.lambda_ratio)));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        let s = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(s.as_bytes()))[..16].to_string()
    }
}
