//! Builtin multinomial logistic regression, fit by full-batch gradient
//! descent on L2-regularised cross-entropy.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::Predictor;
use crate::composition::Composition;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            learning_rate: 0.5,
            epochs: 2000,
            l2: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingInfo {
    pub iterations: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    pub final_loss: f64,
    /// Columns with zero variance in the training data.
    #[serde(default)]
    pub constant_features: Vec<String>,
    #[serde(skip)]
    pub loss_history: Vec<f64>,
}

/// Parameters of a fitted model. Inputs are standardised with the stored
/// per-feature mean and scale before the linear map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticModel {
    pub format_version: u32,
    pub kind: String,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    /// `D x d` weights on standardised features.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub training: TrainingInfo,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

pub fn train_builtin(data: &Dataset, options: &TrainOptions) -> Result<LogisticModel> {
    let labels = data.labels.as_ref().ok_or(Error::MissingLabels)?;
    let classes = data.class_names.len();
    let n = data.rows.len();
    let d = data.num_features();
    if classes < 2 {
        return Err(Error::DegenerateData(format!(
            "need at least 2 classes, found {classes}"
        )));
    }
    if n < classes {
        return Err(Error::DegenerateData(format!(
            "{n} rows for {classes} classes"
        )));
    }

    let mut mean = vec![0.0; d];
    for r in &data.rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    let mut scale = vec![0.0; d];
    for r in &data.rows {
        for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m) / n as f64;
        }
    }
    let mut constant_features = Vec::new();
    for (j, s) in scale.iter_mut().enumerate() {
        *s = s.sqrt();
        if *s == 0.0 {
            log::info!("feature {:?} is constant", data.feature_names[j]);
            constant_features.push(data.feature_names[j].clone());
            *s = 1.0;
        }
    }
    let xs: Vec<Vec<f64>> = data
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .collect();

    let mut w = vec![vec![0.0; d]; classes];
    let mut b = vec![0.0; classes];
    let mut history = Vec::with_capacity(options.epochs + 1);
    let mut probs = vec![0.0; classes];
    let inv_n = 1.0 / n as f64;

    let loss_and_grad = |w: &[Vec<f64>], b: &[f64], probs: &mut [f64], grad: Option<(&mut [Vec<f64>], &mut [f64])>| {
        let mut loss = 0.0;
        let mut gw_acc = vec![vec![0.0; d]; classes];
        let mut gb_acc = vec![0.0; classes];
        for (x, &y) in xs.iter().zip(labels) {
            for k in 0..classes {
                probs[k] = b[k] + w[k].iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
            }
            softmax_in_place(probs);
            loss -= probs[y].max(f64::MIN_POSITIVE).ln();
            for k in 0..classes {
                let r = probs[k] - if k == y { 1.0 } else { 0.0 };
                gb_acc[k] += r;
                for (g, c) in gw_acc[k].iter_mut().zip(x) {
                    *g += r * c;
                }
            }
        }
        let reg: f64 = w.iter().flatten().map(|v| v * v).sum::<f64>() * 0.5 * options.l2;
        if let Some((gw, gb)) = grad {
            for k in 0..classes {
                gb[k] = gb_acc[k] * inv_n;
                for j in 0..d {
                    gw[k][j] = gw_acc[k][j] * inv_n + options.l2 * w[k][j];
                }
            }
        }
        loss * inv_n + reg
    };

    let mut gw = vec![vec![0.0; d]; classes];
    let mut gb = vec![0.0; classes];
    for _ in 0..options.epochs {
        let loss = loss_and_grad(&w, &b, &mut probs, Some((&mut gw, &mut gb)));
        history.push(loss);
        for k in 0..classes {
            b[k] -= options.learning_rate * gb[k];
            for j in 0..d {
                w[k][j] -= options.learning_rate * gw[k][j];
            }
        }
    }
    let final_loss = loss_and_grad(&w, &b, &mut probs, None);
    history.push(final_loss);
    if !final_loss.is_finite() {
        return Err(Error::DegenerateData(
            "training diverged; lower the learning rate".into(),
        ));
    }

    Ok(LogisticModel {
        format_version: MODEL_FORMAT_VERSION,
        kind: "logistic-regression".into(),
        class_names: data.class_names.clone(),
        feature_names: data.feature_names.clone(),
        weights: w,
        biases: b,
        feature_mean: mean,
        feature_scale: scale,
        training: TrainingInfo {
            iterations: options.epochs,
            learning_rate: options.learning_rate,
            l2: options.l2,
            seed: options.seed,
            final_loss,
            constant_features,
            loss_history: history,
        },
    })
}

impl LogisticModel {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: LogisticModel =
            serde_json::from_str(s).map_err(|e| Error::InvalidModel(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        if self.format_version != MODEL_FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        let (k, d) = (self.class_names.len(), self.feature_names.len());
        if k < 2 || d == 0 {
            return bad(format!("{k} classes and {d} features"));
        }
        if self.weights.len() != k
            || self.weights.iter().any(|r| r.len() != d)
            || self.biases.len() != k
            || self.feature_mean.len() != d
            || self.feature_scale.len() != d
        {
            return bad("parameter shapes do not match class and feature names".into());
        }
        let all = self
            .weights
            .iter()
            .flatten()
            .chain(&self.biases)
            .chain(&self.feature_mean)
            .chain(&self.feature_scale);
        if all.into_iter().any(|v| !v.is_finite()) || self.feature_scale.iter().any(|s| *s <= 0.0) {
            return bad("non-finite parameters".into());
        }
        Ok(())
    }

    /// Raw softmax probabilities for one instance.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| {
                b + w
                    .iter()
                    .zip(x)
                    .zip(self.feature_mean.iter().zip(&self.feature_scale))
                    .map(|((w, v), (m, s))| w * (v - m) / s)
                    .sum::<f64>()
            })
            .collect();
        softmax_in_place(&mut z);
        z
    }
}

impl Predictor for LogisticModel {
    fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    fn predict(&self, instances: &[Vec<f64>]) -> Result<Vec<Composition>> {
        let d = self.num_features();
        instances
            .iter()
            .map(|x| {
                if x.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: x.len(),
                    });
                }
                Composition::from_model_output(&self.probabilities(x))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..100 {
            let k = i % 2;
            let c = if k == 0 { -2.0 } else { 2.0 };
            rows.push(vec![c + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
            labels.push(k);
        }
        Dataset {
            feature_names: vec!["a".into(), "b".into()],
            rows,
            labels: Some(labels),
            class_names: vec!["neg".into(), "pos".into()],
        }
    }

    #[test]
    fn separable_blobs_are_fit() {
        let data = blobs(3);
        let m = train_builtin(&data, &TrainOptions::default()).unwrap();
        let preds = m.predict(&data.rows).unwrap();
        let correct = preds
            .iter()
            .zip(data.labels.as_ref().unwrap())
            .filter(|(p, y)| p.argmax() == **y)
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.95);
    }

    #[test]
    fn loss_is_monotone_after_warmup() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/iris.csv");
        let data = super::super::dataset::load_csv(
            path,
            &super::super::dataset::CsvOptions {
                target_column: Some("species".into()),
                ..Default::default()
            },
        )
        .unwrap();
        let m = train_builtin(&data, &TrainOptions::default()).unwrap();
        let h = &m.training.loss_history;
        for w in h[10..].windows(2) {
            assert!(w[1] <= w[0] + 1e-15, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn zero_epochs_gives_uniform() {
        let data = blobs(1);
        let m = train_builtin(
            &data,
            &TrainOptions {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let p = m.predict(&[vec![10.0, -3.0]]).unwrap();
        assert_eq!(p[0].parts(), &[0.5, 0.5]);
    }

    #[test]
    fn deterministic_and_round_trips() {
        let data = blobs(5);
        let opts = TrainOptions {
            epochs: 50,
            seed: 9,
            ..Default::default()
        };
        let a = train_builtin(&data, &opts).unwrap();
        let b = train_builtin(&data, &opts).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let back = LogisticModel::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back.weights, a.weights);
        assert_eq!(back.biases, a.biases);
    }

    #[test]
    fn saturated_weights_and_batch_order() {
        let mut m = train_builtin(
            &blobs(2),
            &TrainOptions {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        m.biases = vec![50.0, 0.0];
        let p = m.predict(&[vec![0.0, 0.0]]).unwrap();
        assert!(p[0].parts()[0] > 0.99);
        m.weights = vec![vec![1.0, 0.0], vec![-1.0, 0.5]];
        let batch = vec![vec![1.0, 2.0], vec![-3.0, 0.0], vec![0.5, 0.5]];
        let fwd = m.predict(&batch).unwrap();
        assert_eq!(fwd.len(), 3);
        let rev: Vec<Vec<f64>> = batch.iter().rev().cloned().collect();
        let back = m.predict(&rev).unwrap();
        for (a, b) in fwd.iter().zip(back.iter().rev()) {
            assert_eq!(a, b);
        }
        assert!(matches!(
            m.predict(&[vec![1.0]]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn requires_labels() {
        let mut data = blobs(1);
        data.labels = None;
        assert!(matches!(
            train_builtin(&data, &TrainOptions::default()),
            Err(Error::MissingLabels)
        ));
    }
}
