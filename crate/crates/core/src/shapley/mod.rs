//! Shapley compositions: characteristic function on the simplex, exact
//! enumeration, permutation sampling with variance-driven allocation, and
//! the efficiency adjustment of sampled estimates.
//!
//! All arithmetic is carried out on ILR coordinates of the context basis;
//! compositions are only materialised in the resulting [`Explanation`].
//! Conditional expectations are interventional: features outside the
//! coalition are filled in from background rows.

mod adjust;
mod exact;
mod sampling;

pub use adjust::{adjust_efficiency, Adjustment};
pub use exact::{exact_shapley, shapley_weight, MAX_EXACT_FEATURES};
pub use sampling::{mc_allocate, mc_sample_feature, mc_shapley, FeatureEstimate, McOptions, RunningMoments};

use serde::{Deserialize, Serialize};

use crate::composition::Composition;
use crate::error::{Error, Result};
use crate::ilr::{BasisDescriptor, OrthonormalBasis};
use crate::model::Predictor;

/// Everything needed to evaluate `v(S)` for one instance.
pub struct CharacteristicContext<'a> {
    model: &'a dyn Predictor,
    instance: Vec<f64>,
    background: &'a [Vec<f64>],
    basis: &'a OrthonormalBasis,
    base_coords: Vec<f64>,
    prediction_coords: Vec<f64>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

impl<'a> CharacteristicContext<'a> {
    pub fn new(
        model: &'a dyn Predictor,
        instance: &[f64],
        background: &'a [Vec<f64>],
        basis: &'a OrthonormalBasis,
    ) -> Result<Self> {
        let d = model.num_features();
        if instance.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: instance.len(),
            });
        }
        if background.is_empty() {
            return Err(Error::EmptyBackground);
        }
        if let Some(row) = background.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
        if basis.classes() != model.num_classes() {
            return Err(Error::DimensionMismatch {
                expected: model.num_classes(),
                got: basis.classes(),
            });
        }
        let preds = model.predict(background)?;
        let base_coords = mean_coords(basis, &preds)?;
        let prediction = model
            .predict(std::slice::from_ref(&instance.to_vec()))?
            .pop()
            .ok_or_else(|| Error::Protocol("model returned no prediction".into()))?;
        let prediction_coords = basis.coords(&prediction)?;
        Ok(CharacteristicContext {
            model,
            instance: instance.to_vec(),
            background,
            basis,
            base_coords,
            prediction_coords,
            feature_names: (0..d).map(|i| format!("x{i}")).collect(),
            class_names: (0..model.num_classes())
                .map(|k| format!("class_{k}"))
                .collect(),
        })
    }

    pub fn with_names(mut self, feature_names: Vec<String>, class_names: Vec<String>) -> Result<Self> {
        if feature_names.len() != self.num_features() {
            return Err(Error::DimensionMismatch {
                expected: self.num_features(),
                got: feature_names.len(),
            });
        }
        if class_names.len() != self.basis.classes() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.classes(),
                got: class_names.len(),
            });
        }
        self.feature_names = feature_names;
        self.class_names = class_names;
        Ok(self)
    }

    pub fn num_features(&self) -> usize {
        self.instance.len()
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        self.basis
    }

    pub fn background(&self) -> &[Vec<f64>] {
        self.background
    }

    pub fn model(&self) -> &dyn Predictor {
        self.model
    }

    pub fn instance(&self) -> &[f64] {
        &self.instance
    }

    /// Aitchison mean of the predictions over the background.
    pub fn base_distribution(&self) -> Composition {
        self.basis
            .from_coords(&self.base_coords)
            .expect("coords match basis")
    }

    pub fn prediction(&self) -> Composition {
        self.basis
            .from_coords(&self.prediction_coords)
            .expect("coords match basis")
    }

    pub fn base_coords(&self) -> &[f64] {
        &self.base_coords
    }

    pub fn prediction_coords(&self) -> &[f64] {
        &self.prediction_coords
    }

    /// Instance values on `keep`, background row `w` elsewhere.
    pub(crate) fn hybrid(&self, keep: &[bool], w: &[f64]) -> Vec<f64> {
        keep.iter()
            .zip(self.instance.iter().zip(w))
            .map(|(&k, (&x, &b))| if k { x } else { b })
            .collect()
    }

    /// ILR coordinates of `v(S)` for the coalition given as a membership
    /// mask, averaging over the first `n_bg` background rows (all if `None`).
    pub fn characteristic_coords(&self, keep: &[bool], n_bg: Option<usize>) -> Result<Vec<f64>> {
        if keep.len() != self.num_features() {
            return Err(Error::DimensionMismatch {
                expected: self.num_features(),
                got: keep.len(),
            });
        }
        let n = n_bg.unwrap_or(self.background.len()).min(self.background.len()).max(1);
        let batch: Vec<Vec<f64>> = self.background[..n]
            .iter()
            .map(|w| self.hybrid(keep, w))
            .collect();
        let preds = self.model.predict(&batch)?;
        let mut mean = mean_coords(self.basis, &preds)?;
        // With all rows in use, v(∅) reproduces the base exactly.
        for (m, b) in mean.iter_mut().zip(&self.base_coords) {
            *m -= b;
        }
        Ok(mean)
    }

    /// `v(S) = E^A[f(X) | x_S] ⊖ E^A[f(X)]` for the coalition of feature
    /// indices `subset`.
    pub fn characteristic(&self, subset: &[usize], n_bg: Option<usize>) -> Result<Composition> {
        let keep = self.mask(subset)?;
        let coords = self.characteristic_coords(&keep, n_bg)?;
        self.basis.from_coords(&coords)
    }

    fn mask(&self, subset: &[usize]) -> Result<Vec<bool>> {
        let d = self.num_features();
        let mut keep = vec![false; d];
        for &i in subset {
            if i >= d {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    classes: d,
                });
            }
            keep[i] = true;
        }
        Ok(keep)
    }

    pub(crate) fn explanation(
        &self,
        coords: &[Vec<f64>],
        samples: &[usize],
        traces: &[f64],
        estimator: EstimatorInfo,
    ) -> Result<Explanation> {
        let features = coords
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Ok(FeatureAttribution {
                    name: self.feature_names[i].clone(),
                    shapley: self.basis.from_coords(c)?,
                    ilr: c.clone(),
                    samples: samples[i],
                    variance_trace: traces[i],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Explanation {
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
            base: self.base_distribution(),
            prediction: self.prediction(),
            features,
            basis: self.basis.descriptor().clone(),
            estimator,
        })
    }
}

fn mean_coords(basis: &OrthonormalBasis, preds: &[Composition]) -> Result<Vec<f64>> {
    if preds.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut acc = vec![0.0; basis.dim()];
    for p in preds {
        for (a, c) in acc.iter_mut().zip(basis.coords(p)?) {
            *a += c;
        }
    }
    let n = preds.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    Exact,
    Mc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorInfo {
    pub mode: EstimatorMode,
    pub m_max: Option<usize>,
    pub m_min: Option<usize>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub adjusted: bool,
    /// Every variance trace was zero, so the adjustment was spread evenly.
    #[serde(default)]
    pub uniform_adjustment: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureAttribution {
    pub name: String,
    pub shapley: Composition,
    pub ilr: Vec<f64>,
    pub samples: usize,
    pub variance_trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub base: Composition,
    pub prediction: Composition,
    pub features: Vec<FeatureAttribution>,
    pub basis: BasisDescriptor,
    pub estimator: EstimatorInfo,
}

impl Explanation {
    /// Aitchison distance between `⊕ φ_i` and `prediction ⊖ base`.
    pub fn efficiency_residual(&self) -> f64 {
        let d = self.class_names.len();
        let mut sum = vec![0.0; d];
        for f in &self.features {
            for (s, c) in sum.iter_mut().zip(f.shapley.clr()) {
                *s += c;
            }
        }
        let (p, b) = (self.prediction.clr(), self.base.clr());
        sum.iter()
            .zip(p.iter().zip(&b))
            .map(|(s, (p, b))| (s - (p - b)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn predicted_class(&self) -> usize {
        self.prediction.argmax()
    }
}
