//! Run configuration and the end-to-end pipeline.
//!
//! A run config is one TOML document. Any key can be overridden from the
//! environment: `CARLEMAN_ASSIGNMENT__I_MAX=3` sets `assignment.i_max`
//! (prefix `CARLEMAN_`, nesting by `__`, names lowercased). Values are
//! parsed as TOML and fall back to plain strings.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::assignment::{assign, enumerate_dyadic, AssignParams, BasisAssignment, EnumerationOrder};
use crate::error::{Error, Result};
use crate::kernel::{build_kernel, KernelModel, KernelOptions, QuadratureParams};
use crate::operator::{AuxOperators, OperatorConfig, OperatorSpec};
use crate::schmidt::{build_b, schmidt_decompose, BOperator, SchmidtSystem};
use crate::verify::{CarlemanParams, EquivalenceParams, OrthoParams, SmoothnessParams, VanishingParams};
use crate::wavelet::{MotherWavelet, DEFAULT_MAX_ORDER};

pub const ENV_PREFIX: &str = "CARLEMAN_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub operator: OperatorConfig,
    #[serde(default)]
    pub wavelet: WaveletConfig,
    #[serde(default)]
    pub assignment: AssignmentConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub quadrature: QuadratureParams,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveletConfig {
    /// Cap on kernel derivative orders `i + j`.
    pub max_order: usize,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self { max_order: DEFAULT_MAX_ORDER }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssignmentConfig {
    pub i_max: usize,
    pub j_min: i32,
    pub j_max: i32,
    pub k_min: i64,
    pub k_max: i64,
    pub budget: Option<usize>,
    pub zndn_constant: Option<f64>,
}

impl Default for AssignmentConfig {
    fn default() -> Self {
        Self { i_max: 2, j_min: -128, j_max: 2, k_min: -4, k_max: 4, budget: None, zndn_constant: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationConfig {
    pub max_p_terms: Option<usize>,
    pub max_f_terms: Option<usize>,
    /// Absolute cutoff; default `1e-12 s_1`.
    pub rank_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub m_test: usize,
    pub equivalence_tol: f64,
    pub smoothness_points: usize,
    pub smoothness_tol: f64,
    pub radii: Vec<f64>,
    pub vanishing_threshold: f64,
    pub carleman_samples: usize,
    pub carleman_tol: f64,
    pub orthonormality_tol: f64,
    pub supnorm_order: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let v = VanishingParams::default();
        Self {
            m_test: EquivalenceParams::default().m_test,
            equivalence_tol: EquivalenceParams::default().tol,
            smoothness_points: SmoothnessParams::default().points,
            smoothness_tol: SmoothnessParams::default().tol,
            radii: v.radii,
            vanishing_threshold: v.threshold,
            carleman_samples: CarlemanParams::default().samples,
            carleman_tol: CarlemanParams::default().tol,
            orthonormality_tol: OrthoParams::default().tol,
            supnorm_order: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub heatmap: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), heatmap: false }
    }
}

fn parse_env_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `PREFIX_A__B=value` pairs onto a parsed document.
pub fn apply_overrides<I, K, V>(doc: &mut toml::Table, vars: I) -> Result<()>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    let mut pairs: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            k.as_ref().strip_prefix(ENV_PREFIX).map(|rest| (rest.to_ascii_lowercase(), v.as_ref().to_string()))
        })
        .collect();
    pairs.sort();
    for (key, raw) in pairs {
        let path: Vec<&str> = key.split("__").collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(Error::Config(format!("malformed override key {ENV_PREFIX}{}", key.to_ascii_uppercase())));
        }
        let (last, parents) = path.split_last().expect("split yields at least one part");
        let mut table = &mut *doc;
        for p in parents {
            let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("override path through non-table key `{p}`")))?;
        }
        table.insert(last.to_string(), parse_env_value(&raw));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_env(text, std::iter::empty::<(String, String)>())
    }

    pub fn from_toml_with_env<I, K, V>(text: &str, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        apply_overrides(&mut doc, vars)?;
        let cfg: RunConfig = doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies overrides from the process environment.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.wavelet.max_order > DEFAULT_MAX_ORDER {
            return Err(Error::OrderExceeded { requested: self.wavelet.max_order, max: DEFAULT_MAX_ORDER });
        }
        let a = &self.assignment;
        if a.i_max > self.wavelet.max_order {
            return Err(Error::OrderExceeded { requested: a.i_max, max: self.wavelet.max_order });
        }
        if a.j_min > a.j_max || a.k_min > a.k_max {
            return bad("assignment ranges must be nonempty");
        }
        if a.budget == Some(0) || a.zndn_constant.is_some_and(|c| c.is_nan() || c <= 0.0) {
            return bad("assignment budget and zndn_constant must be positive");
        }
        if self.truncation.rank_tol.is_some_and(|t| t.is_nan() || t <= 0.0) {
            return bad("rank_tol must be positive");
        }
        if self.quadrature.scaled_horizon == 0 || self.quadrature.nodes_per_panel == 0 {
            return bad("quadrature parameters must be positive");
        }
        let v = &self.verify;
        let positive = [v.equivalence_tol, v.smoothness_tol, v.vanishing_threshold, v.carleman_tol, v.orthonormality_tol];
        if positive.iter().any(|x| x.is_nan() || *x <= 0.0) || v.radii.iter().any(|r| r.is_nan() || *r <= 0.0) {
            return bad("verification tolerances and radii must be positive");
        }
        if v.m_test == 0 || v.smoothness_points == 0 || v.carleman_samples == 0 {
            return bad("verification sample counts must be positive");
        }
        Ok(())
    }

    pub fn assign_params(&self) -> AssignParams {
        AssignParams {
            i_max: self.assignment.i_max,
            budget: self.assignment.budget,
            zndn_constant: self.assignment.zndn_constant,
        }
    }

    pub fn kernel_options(&self) -> KernelOptions {
        KernelOptions {
            max_p_terms: self.truncation.max_p_terms,
            max_f_terms: self.truncation.max_f_terms,
            max_order: self.wavelet.max_order,
        }
    }
}

/// Everything built from one config.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub spec: OperatorSpec,
    pub aux: AuxOperators,
    pub schmidt: SchmidtSystem,
    pub b: BOperator,
    pub assignment: BasisAssignment,
    pub model: KernelModel,
}

impl Pipeline {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let spec = cfg.operator.build()?;
        Self::from_spec(spec, cfg)
    }

    pub fn from_spec(spec: OperatorSpec, cfg: &RunConfig) -> Result<Self> {
        let aux = AuxOperators::new(&spec);
        let schmidt = schmidt_decompose(&aux.j, cfg.truncation.rank_tol)?;
        let b = build_b(&schmidt);
        let a = &cfg.assignment;
        let enumeration = enumerate_dyadic(a.j_min..=a.j_max, a.k_min..=a.k_max, EnumerationOrder::Diagonal)?;
        let assignment = assign(&spec, &aux, &enumeration, MotherWavelet::standard(), &cfg.assign_params())?;
        let model = build_kernel(&spec, &aux, &schmidt, &b, &assignment, &cfg.kernel_options())?;
        Ok(Self { spec, aux, schmidt, b, assignment, model })
    }
}
