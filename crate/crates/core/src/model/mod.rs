//! Uniform prediction interface over the builtin classifier, external
//! subprocess predictors, and in-process closures.

mod dataset;
mod external;
mod logistic;

pub use dataset::{load_csv, read_csv, CsvOptions, Dataset};
pub use external::{ExternalModel, PROTOCOL_VERSION};
pub use logistic::{train_builtin, LogisticModel, TrainOptions, TrainingInfo, MODEL_FORMAT_VERSION};

use crate::composition::Composition;
use crate::error::{Error, Result};

/// A probabilistic classifier `R^d -> S^D`.
pub trait Predictor: Send + Sync {
    fn num_classes(&self) -> usize;
    fn num_features(&self) -> usize;
    /// One composition per instance, in input order.
    fn predict(&self, instances: &[Vec<f64>]) -> Result<Vec<Composition>>;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn num_classes(&self) -> usize {
        (**self).num_classes()
    }
    fn num_features(&self) -> usize {
        (**self).num_features()
    }
    fn predict(&self, instances: &[Vec<f64>]) -> Result<Vec<Composition>> {
        (**self).predict(instances)
    }
}

/// Wraps a closure returning unnormalised non-negative scores.
pub struct FnModel<F> {
    classes: usize,
    features: usize,
    f: F,
}

impl<F> FnModel<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(features: usize, classes: usize, f: F) -> Self {
        FnModel {
            classes,
            features,
            f,
        }
    }
}

impl<F> Predictor for FnModel<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn num_features(&self) -> usize {
        self.features
    }

    fn predict(&self, instances: &[Vec<f64>]) -> Result<Vec<Composition>> {
        instances
            .iter()
            .map(|x| {
                if x.len() != self.features {
                    return Err(Error::DimensionMismatch {
                        expected: self.features,
                        got: x.len(),
                    });
                }
                let raw = (self.f)(x);
                if raw.len() != self.classes {
                    return Err(Error::DimensionMismatch {
                        expected: self.classes,
                        got: raw.len(),
                    });
                }
                Composition::from_model_output(&raw)
            })
            .collect()
    }
}

#[derive(Debug)]
pub enum ModelHandle {
    Builtin(LogisticModel),
    External {
        model: ExternalModel,
        class_names: Vec<String>,
    },
}

impl ModelHandle {
    /// Parses `builtin:<file>` or `exec:<cmdline>`.
    pub fn open(spec: &str, timeout_ms: u64) -> Result<Self> {
        if let Some(path) = spec.strip_prefix("builtin:") {
            Ok(ModelHandle::Builtin(LogisticModel::load(path)?))
        } else if let Some(cmd) = spec.strip_prefix("exec:") {
            Self::external(cmd, timeout_ms)
        } else {
            Err(Error::Usage(format!(
                "model must be builtin:<file> or exec:<cmdline>, got {spec:?}"
            )))
        }
    }

    pub fn external(cmdline: &str, timeout_ms: u64) -> Result<Self> {
        let model = ExternalModel::spawn(cmdline, timeout_ms)?;
        let class_names = (0..model.num_classes()).map(|k| format!("class_{k}")).collect();
        Ok(ModelHandle::External { model, class_names })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelHandle::Builtin(_) => "builtin",
            ModelHandle::External { .. } => "external",
        }
    }

    pub fn class_names(&self) -> &[String] {
        match self {
            ModelHandle::Builtin(m) => &m.class_names,
            ModelHandle::External { class_names, .. } => class_names,
        }
    }

    /// Feature names known to the model, if any.
    pub fn feature_names(&self) -> Option<&[String]> {
        match self {
            ModelHandle::Builtin(m) => Some(&m.feature_names),
            ModelHandle::External { .. } => None,
        }
    }

    pub fn set_class_names(&mut self, names: Vec<String>) -> Result<()> {
        if names.len() != self.num_classes() {
            return Err(Error::DimensionMismatch {
                expected: self.num_classes(),
                got: names.len(),
            });
        }
        match self {
            ModelHandle::Builtin(m) => m.class_names = names,
            ModelHandle::External { class_names, .. } => *class_names = names,
        }
        Ok(())
    }

    fn inner(&self) -> &dyn Predictor {
        match self {
            ModelHandle::Builtin(m) => m,
            ModelHandle::External { model, .. } => model,
        }
    }
}

impl Predictor for ModelHandle {
    fn num_classes(&self) -> usize {
        self.inner().num_classes()
    }

    fn num_features(&self) -> usize {
        self.inner().num_features()
    }

    fn predict(&self, instances: &[Vec<f64>]) -> Result<Vec<Composition>> {
        self.inner().predict(instances)
    }
}
