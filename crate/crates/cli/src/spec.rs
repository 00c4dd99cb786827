//! Space-spec files: a JSON description of `G/K` plus the metrics and forms
//! to examine.

use std::path::Path;

use serde::{Deserialize, Serialize};

use homharm::catalog::{EmbeddingDescriptor, FactorSpec, KBlockSpec, SpaceDescription};
use homharm::homog::Embedding;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_DIM_P: usize = 24;

/// A single vector or a list of vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Vectors {
    One(Vec<f64>),
    Many(Vec<Vec<f64>>),
}

impl Vectors {
    pub fn to_vec(&self) -> Vec<Vec<f64>> {
        match self {
            Vectors::One(v) => vec![v.clone()],
            Vectors::Many(v) => v.clone(),
        }
    }
}

/// How `verify` draws the scalings of the diagonal blocks `p_{s+1} … p_{2s−1}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagonalSampling {
    /// Independent scalings per block.
    #[default]
    Free,
    /// One common scaling for all diagonal blocks.
    Equal,
}

/// Deliberate defects for negative-control runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Flip the sign of the right-hand side of the harmonicity equations.
    HarmSign,
}

/// One-parameter metric sweep `x_block = t` over `(from, to]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Block label, e.g. `"p5"`.
    pub block: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    /// Scalings of the other blocks (default all 1).
    #[serde(default)]
    pub base: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub g_factors: Vec<FactorSpec>,
    #[serde(default)]
    pub k_blocks: Vec<KBlockSpec>,
    #[serde(default)]
    pub embedding: Vec<Vec<EmbeddingDescriptor>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vectors>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vectors>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub diagonal_sampling: DiagonalSampling,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject_fault: Option<Fault>,
}

impl SpaceSpec {
    pub fn description(&self) -> SpaceDescription {
        SpaceDescription {
            name: self.name.clone(),
            g_factors: self.g_factors.clone(),
            k_blocks: self.k_blocks.clone(),
            embedding: self.embedding.clone(),
        }
    }

    pub fn from_description(desc: &SpaceDescription) -> Self {
        SpaceSpec {
            schema_version: SCHEMA_VERSION,
            name: desc.name.clone(),
            g_factors: desc.g_factors.clone(),
            k_blocks: desc.k_blocks.clone(),
            embedding: desc.embedding.clone(),
            z: None,
            x: None,
            y: None,
            sweep: None,
            diagonal_sampling: DiagonalSampling::Free,
            inject_fault: None,
        }
    }

    pub fn z_or_default(&self) -> Vec<f64> {
        self.z.clone().unwrap_or_else(|| vec![1.0; self.g_factors.len()])
    }

    pub fn xs(&self) -> Vec<Vec<f64>> {
        self.x.as_ref().map(Vectors::to_vec).unwrap_or_default()
    }

    pub fn ys(&self) -> Vec<Vec<f64>> {
        self.y.as_ref().map(Vectors::to_vec).unwrap_or_default()
    }

    /// Checks everything that does not need the reductive split and returns
    /// the embedding.
    pub fn validate(&self) -> Result<Embedding, CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let desc = self.description();
        let dim_p = desc.dim_g().checked_sub(desc.dim_k()).ok_or_else(|| {
            CliError::Invalid(format!(
                "dim k = {} exceeds dim g = {}",
                desc.dim_k(),
                desc.dim_g()
            ))
        })?;
        if dim_p > MAX_DIM_P {
            return Err(CliError::Invalid(format!(
                "dim p = {dim_p} exceeds the limit {MAX_DIM_P}"
            )));
        }
        let s = self.g_factors.len();
        if let Some(z) = &self.z {
            if z.len() != s {
                return Err(CliError::Invalid(format!(
                    "z has {} entries, expected one per g factor ({s})",
                    z.len()
                )));
            }
            if let Some(v) = z.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(CliError::Invalid(format!("z entries must be positive, got {v}")));
            }
        }
        for (i, x) in self.xs().iter().enumerate() {
            if let Some(v) = x.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(CliError::Invalid(format!("x[{i}] has a non-positive entry {v}")));
            }
        }
        for (i, y) in self.ys().iter().enumerate() {
            if y.len() != s {
                return Err(CliError::Invalid(format!(
                    "y[{i}] has {} entries, expected one per g factor ({s})",
                    y.len()
                )));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.steps == 0 || !(sw.from >= 0.0 && sw.to > sw.from) {
                return Err(CliError::Invalid(
                    "sweep needs 0 ≤ from < to and steps ≥ 1".into(),
                ));
            }
        }
        let e = desc.build().map_err(|err| CliError::Invalid(format!("embedding: {err}")))?;
        Ok(e)
    }
}

pub fn parse_str(text: &str, origin: &str) -> Result<SpaceSpec, CliError> {
    let spec: SpaceSpec = serde_json::from_str(text).map_err(|err| CliError::Schema {
        origin: origin.to_string(),
        line: err.line(),
        column: err.column(),
        message: err.to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}

pub fn parse_spec(path: &Path) -> Result<SpaceSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|err| CliError::Io {
        path: path.display().to_string(),
        source: err,
    })?;
    parse_str(&text, &path.display().to_string())
}
