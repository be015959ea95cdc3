//! The versioned JSON document written by `sshap explain`.

use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::composition::Composition;
use crate::error::{Error, Result};
use crate::ilr::{BasisDescriptor, OrthonormalBasis};
use crate::shapley::{EstimatorInfo, EstimatorMode, Explanation, FeatureAttribution};

pub const FORMAT_VERSION: u32 = 1;

/// Relative tolerance between stored ILR coordinates and the coordinates of
/// the stored composition.
const ILR_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// SHA-256 of the data file, lowercase hex.
    pub dataset_sha256: Option<String>,
    /// Model descriptor as passed to `--model`.
    pub model: String,
    pub timestamp: Option<String>,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(model: impl Into<String>) -> Self {
        Provenance {
            dataset_sha256: None,
            model: model.into(),
            timestamp: None,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplanationDocument {
    pub format_version: u32,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub base: Composition,
    pub prediction: Composition,
    pub features: Vec<FeatureAttribution>,
    pub basis: BasisDescriptor,
    pub estimator: EstimatorInfo,
    pub provenance: Provenance,
}

impl ExplanationDocument {
    pub fn new(explanation: Explanation, provenance: Provenance) -> Self {
        ExplanationDocument {
            format_version: FORMAT_VERSION,
            class_names: explanation.class_names,
            feature_names: explanation.feature_names,
            base: explanation.base,
            prediction: explanation.prediction,
            features: explanation.features,
            basis: explanation.basis,
            estimator: explanation.estimator,
            provenance,
        }
    }

    pub fn explanation(&self) -> Explanation {
        Explanation {
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
            base: self.base.clone(),
            prediction: self.prediction.clone(),
            features: self.features.clone(),
            basis: self.basis.clone(),
            estimator: self.estimator.clone(),
        }
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    /// Rebuilds the basis the attributions are expressed in.
    pub fn basis(&self) -> Result<OrthonormalBasis> {
        OrthonormalBasis::from_descriptor(&self.basis, self.classes())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and validates, reporting the first violation.
    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ExplanationDocument = serde_json::from_str(s).map_err(|e| {
            Error::InvalidDocument(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    /// Structural checks beyond what the JSON schema expresses.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDocument(m));
        if self.format_version != FORMAT_VERSION {
            return bad(format!(
                "format_version: expected {FORMAT_VERSION}, got {}",
                self.format_version
            ));
        }
        let d = self.classes();
        if d < 2 {
            return bad(format!("class_names: need at least 2 classes, got {d}"));
        }
        if let Some(name) = first_duplicate(&self.class_names) {
            return bad(format!("class_names: duplicate name {name:?}"));
        }
        if let Some(name) = first_duplicate(&self.feature_names) {
            return bad(format!("feature_names: duplicate name {name:?}"));
        }
        for (key, c) in [("base", &self.base), ("prediction", &self.prediction)] {
            if c.dim() != d {
                return bad(format!("{key}: expected {d} parts, got {}", c.dim()));
            }
        }
        if self.features.len() != self.feature_names.len() {
            return bad(format!(
                "features: expected {} entries, got {}",
                self.feature_names.len(),
                self.features.len()
            ));
        }
        let basis = match self.basis() {
            Ok(b) => b,
            Err(e) => return bad(format!("basis: {e}")),
        };
        for (i, (f, name)) in self.features.iter().zip(&self.feature_names).enumerate() {
            if &f.name != name {
                return bad(format!("features[{i}].name: expected {name:?}, got {:?}", f.name));
            }
            if f.shapley.dim() != d {
                return bad(format!(
                    "features[{i}].shapley: expected {d} parts, got {}",
                    f.shapley.dim()
                ));
            }
            if f.ilr.len() != d - 1 {
                return bad(format!(
                    "features[{i}].ilr: expected {} coordinates, got {}",
                    d - 1,
                    f.ilr.len()
                ));
            }
            let coords = basis.coords(&f.shapley)?;
            if let Some(j) = (0..d - 1)
                .find(|&j| (coords[j] - f.ilr[j]).abs() > ILR_TOLERANCE * (1.0 + coords[j].abs()))
            {
                return bad(format!(
                    "features[{i}].ilr[{j}]: {} disagrees with shapley ({})",
                    f.ilr[j], coords[j]
                ));
            }
            if !(f.variance_trace >= 0.0 && f.variance_trace.is_finite()) {
                return bad(format!("features[{i}].variance_trace: {}", f.variance_trace));
            }
        }
        let est = &self.estimator;
        match est.mode {
            EstimatorMode::Exact => {
                if est.adjusted {
                    return bad("estimator.adjusted: exact mode is never adjusted".into());
                }
            }
            EstimatorMode::Mc => {
                for (key, v) in [("m_max", est.m_max), ("m_min", est.m_min)] {
                    if v.is_none() {
                        return bad(format!("estimator.{key}: required in mc mode"));
                    }
                }
                if est.seed.is_none() {
                    return bad("estimator.seed: required in mc mode".into());
                }
                let total: usize = self.features.iter().map(|f| f.samples).sum();
                if Some(total) != est.m_max {
                    return bad(format!(
                        "estimator.m_max: {:?} but features hold {total} samples",
                        est.m_max
                    ));
                }
            }
        }
        if let Some(eps) = est.epsilon {
            if eps.is_nan() || eps <= 0.0 {
                return bad(format!("estimator.epsilon: must be positive, got {eps}"));
            }
        }
        if let Some(h) = &self.provenance.dataset_sha256 {
            if h.len() != 64 || !h.bytes().all(|b| b.is_ascii_hexdigit()) {
                return bad(format!("provenance.dataset_sha256: not a hex digest: {h:?}"));
            }
        }
        Ok(())
    }
}

fn first_duplicate(names: &[String]) -> Option<&String> {
    names
        .iter()
        .enumerate()
        .find(|(i, n)| names[..*i].contains(n))
        .map(|(_, n)| n)
}

/// Lowercase hex SHA-256 of a file.
pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
