//! Versioned JSON model files for transform-time reuse.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use uca_core::{FittedModel, Standardization};

use crate::error::{CliError, Result};

pub const FORMAT: &str = "uca-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationRecord {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub zero_variance_mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub method: String,
    pub backend: String,
    pub feature_names: Vec<String>,
    /// One row per feature, one column per component.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub standardization: Option<StandardizationRecord>,
    pub warnings: Vec<String>,
}

impl ModelFile {
    pub fn from_model(model: &FittedModel, feature_names: &[String]) -> Self {
        let components = (0..model.dim())
            .map(|r| model.components.row(r).iter().copied().collect())
            .collect();
        ModelFile {
            format: FORMAT.to_string(),
            version: VERSION,
            method: model.method.clone(),
            backend: model.backend.clone(),
            feature_names: feature_names.to_vec(),
            components,
            eigenvalues: model.eigenvalues.clone(),
            lambdas: model.lambdas.clone(),
            standardization: model
                .standardization
                .as_ref()
                .map(|s| StandardizationRecord {
                    means: s.means.clone(),
                    scales: s.scales.clone(),
                    zero_variance_mask: s.zero_variance_mask.clone(),
                }),
            warnings: model.warnings.clone(),
        }
    }

    /// Rebuilds the parts of a model that projection needs.
    pub fn to_model(&self) -> FittedModel {
        let p = self.feature_names.len();
        let k = self.eigenvalues.len();
        FittedModel {
            method: self.method.clone(),
            components: DMatrix::from_fn(p, k, |r, c| self.components[r][c]),
            eigenvalues: self.eigenvalues.clone(),
            lambdas: self.lambdas.clone(),
            feature_names: Some(self.feature_names.clone()),
            standardization: self.standardization.as_ref().map(|s| Standardization {
                means: s.means.clone(),
                scales: s.scales.clone(),
                zero_variance_mask: s.zero_variance_mask.clone(),
            }),
            background_standardizations: Vec::new(),
            constraint_values: Vec::new(),
            diagnostics: None,
            backend: self.backend.clone(),
            warnings: self.warnings.clone(),
            degenerate_pairs: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Model {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let bad = |message: String| CliError::Model {
            path: path.to_path_buf(),
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if value.get("format").and_then(|f| f.as_str()) != Some(FORMAT) {
            return Err(bad(format!("not a `{FORMAT}` file")));
        }
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(VERSION) => {}
            Some(v) => {
                return Err(bad(format!(
                    "unsupported model version {v} (this build reads version {VERSION})"
                )))
            }
            None => return Err(bad("missing model version".into())),
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
        file.check().map_err(bad)?;
        Ok(file)
    }

    fn check(&self) -> std::result::Result<(), String> {
        let p = self.feature_names.len();
        let k = self.eigenvalues.len();
        if self.components.len() != p {
            return Err(format!(
                "{} component rows for {p} features",
                self.components.len()
            ));
        }
        if let Some(r) = self.components.iter().position(|row| row.len() != k) {
            return Err(format!("component row {r} does not have {k} entries"));
        }
        if let Some(s) = &self.standardization {
            if s.means.len() != p || s.scales.len() != p || s.zero_variance_mask.len() != p {
                return Err(format!("standardization vectors must have length {p}"));
            }
        }
        Ok(())
    }
}
