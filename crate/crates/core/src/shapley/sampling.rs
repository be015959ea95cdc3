use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adjust::adjust_efficiency;
use super::{CharacteristicContext, EstimatorInfo, EstimatorMode, Explanation};
use crate::composition::Composition;
use crate::error::{Error, Result};
use crate::ilr::OrthonormalBasis;

/// One-pass (Welford) mean and second central moment of vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningMoments {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningMoments {
    pub fn new(dim: usize) -> Self {
        RunningMoments {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Per-coordinate sums of squared deviations.
    pub fn m2(&self) -> &[f64] {
        &self.m2
    }

    /// Trace of the sample covariance (zero below two samples).
    pub fn trace(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2.iter().sum::<f64>() / (self.count - 1) as f64
    }
}

/// Running estimate of one feature's Shapley composition in ILR space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEstimate {
    pub moments: RunningMoments,
}

impl FeatureEstimate {
    pub fn new(dim: usize) -> Self {
        FeatureEstimate {
            moments: RunningMoments::new(dim),
        }
    }

    pub fn samples(&self) -> usize {
        self.moments.count()
    }

    pub fn mean_ilr(&self) -> &[f64] {
        self.moments.mean()
    }

    pub fn variance_trace(&self) -> f64 {
        self.moments.trace()
    }

    pub fn phi(&self, basis: &OrthonormalBasis) -> Result<Composition> {
        basis.from_coords(self.mean_ilr())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub m_max: usize,
    pub m_min: usize,
    pub seed: u64,
    /// Efficiency adjustment parameter; `None` leaves estimates unadjusted.
    pub epsilon: Option<f64>,
}

impl McOptions {
    /// `m_min = 30`, `m_max = 1000 d`, `epsilon = 1e-6`.
    pub fn defaults_for(features: usize) -> Self {
        McOptions {
            m_max: 1000 * features,
            m_min: 30,
            seed: 0,
            epsilon: Some(1e-6),
        }
    }
}

pub(crate) fn sample_contribution<R: Rng + ?Sized>(
    ctx: &CharacteristicContext<'_>,
    feature: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = ctx.num_features();
    if feature >= d {
        return Err(Error::IndexOutOfRange {
            index: feature,
            classes: d,
        });
    }
    let background = ctx.background();
    if background.is_empty() {
        return Err(Error::EmptyBackground);
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let w = &background[rng.gen_range(0..background.len())];

    let mut keep = vec![false; d];
    for &j in order.iter().take_while(|&&j| j != feature) {
        keep[j] = true;
    }
    let without = ctx.hybrid(&keep, w);
    keep[feature] = true;
    let with = ctx.hybrid(&keep, w);

    let preds = ctx.model().predict(&[with, without])?;
    if preds.len() != 2 {
        return Err(Error::Protocol(format!("expected 2 predictions, got {}", preds.len())));
    }
    let basis = ctx.basis();
    let a = basis.coords(&preds[0])?;
    let b = basis.coords(&preds[1])?;
    Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
}

/// One sampled marginal contribution `f(b1) ⊖ f(b2)` of `feature`.
pub fn mc_sample_feature<R: Rng + ?Sized>(
    ctx: &CharacteristicContext<'_>,
    feature: usize,
    rng: &mut R,
) -> Result<Composition> {
    let c = sample_contribution(ctx, feature, rng)?;
    ctx.basis().from_coords(&c)
}

/// Distributes `m_max` permutation samples over the features: each first
/// receives `m_min` samples, then every further sample goes to the feature
/// maximising `tr Σ_i (1/m_i - 1/(m_i + 1))` (lowest index on ties).
pub fn mc_allocate(ctx: &CharacteristicContext<'_>, options: &McOptions) -> Result<Vec<FeatureEstimate>> {
    let d = ctx.num_features();
    if options.m_min < 2 {
        return Err(Error::BudgetTooSmall(format!(
            "m_min must be at least 2, got {}",
            options.m_min
        )));
    }
    if options.m_max < d * options.m_min {
        return Err(Error::BudgetTooSmall(format!(
            "m_max = {} is below d * m_min = {}",
            options.m_max,
            d * options.m_min
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let dim = ctx.basis().dim();
    let mut estimates: Vec<FeatureEstimate> = (0..d).map(|_| FeatureEstimate::new(dim)).collect();

    for _ in 0..options.m_max {
        let target = match estimates.iter().position(|e| e.samples() < options.m_min) {
            Some(j) => j,
            None => {
                let mut best = 0;
                let mut best_gain = f64::NEG_INFINITY;
                for (i, e) in estimates.iter().enumerate() {
                    let m = e.samples() as f64;
                    let gain = e.variance_trace() * (1.0 / m - 1.0 / (m + 1.0));
                    if gain > best_gain {
                        best = i;
                        best_gain = gain;
                    }
                }
                best
            }
        };
        let c = sample_contribution(ctx, target, &mut rng)?;
        estimates[target].moments.push(&c);
    }
    Ok(estimates)
}

/// Sampling estimator followed, when `epsilon` is set, by the efficiency
/// adjustment.
pub fn mc_shapley(ctx: &CharacteristicContext<'_>, options: &McOptions) -> Result<Explanation> {
    let estimates = mc_allocate(ctx, options)?;
    let traces: Vec<f64> = estimates.iter().map(FeatureEstimate::variance_trace).collect();
    let samples: Vec<usize> = estimates.iter().map(FeatureEstimate::samples).collect();
    let (coords, adjusted, uniform) = match options.epsilon {
        Some(eps) => {
            let adj = adjust_efficiency(&estimates, ctx.prediction_coords(), ctx.base_coords(), eps)?;
            (adj.coords, true, adj.uniform_fallback)
        }
        None => (
            estimates.iter().map(|e| e.mean_ilr().to_vec()).collect(),
            false,
            false,
        ),
    };
    ctx.explanation(
        &coords,
        &samples,
        &traces,
        EstimatorInfo {
            mode: EstimatorMode::Mc,
            m_max: Some(options.m_max),
            m_min: Some(options.m_min),
            seed: Some(options.seed),
            epsilon: options.epsilon,
            adjusted,
            uniform_adjustment: uniform,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilr::gram_schmidt_basis;
    use crate::model::{FnModel, Predictor};
    use crate::shapley::{exact_shapley, toy};

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i as f64 * 0.7).sin() * 1e3 + 1e6, (i as f64).sqrt()])
            .collect();
        let mut m = RunningMoments::new(2);
        xs.iter().for_each(|x| m.push(x));
        for j in 0..2 {
            let mean = xs.iter().map(|x| x[j]).sum::<f64>() / 50.0;
            let ss: f64 = xs.iter().map(|x| (x[j] - mean).powi(2)).sum();
            assert!((m.mean()[j] - mean).abs() < 1e-8 * mean.abs().max(1.0));
            assert!((m.m2()[j] - ss).abs() < 1e-8 * ss);
        }
    }

    #[test]
    fn constant_model_contributes_nothing() {
        let model = FnModel::new(3, 3, |_: &[f64]| vec![1.0, 2.0, 3.0]);
        let basis = gram_schmidt_basis(3).unwrap();
        let bg = vec![vec![0.0, 1.0, 2.0], vec![3.0, 4.0, 5.0]];
        let ctx = CharacteristicContext::new(&model, &[9.0, 9.0, 9.0], &bg, &basis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let c = mc_sample_feature(&ctx, 1, &mut rng).unwrap();
            assert!(c.norm() < 1e-12);
        }
    }

    #[test]
    fn single_feature_is_prediction_minus_background_row() {
        let model = FnModel::new(1, 2, |x: &[f64]| vec![x[0].exp(), 1.0]);
        let basis = gram_schmidt_basis(2).unwrap();
        let bg = vec![vec![0.5]];
        let ctx = CharacteristicContext::new(&model, &[2.0], &bg, &basis).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = mc_sample_feature(&ctx, 0, &mut rng).unwrap();
        let f = |v: f64| model.predict(&[vec![v]]).unwrap().pop().unwrap();
        let want = f(2.0).subtract(&f(0.5)).unwrap();
        assert!(c.distance(&want).unwrap() < 1e-12);
    }

    #[test]
    fn sampling_converges_to_exact() {
        let model = toy::two_feature_model();
        let basis = gram_schmidt_basis(3).unwrap();
        let bg = vec![vec![0.0, 0.0], vec![1.0, -1.0], vec![-0.5, 2.0]];
        let ctx = CharacteristicContext::new(&model, &[1.0, 0.5], &bg, &basis).unwrap();
        let exact = exact_shapley(&ctx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut m = RunningMoments::new(2);
        for _ in 0..10_000 {
            m.push(&sample_contribution(&ctx, 0, &mut rng).unwrap());
        }
        let est = basis.from_coords(m.mean()).unwrap();
        assert!(est.distance(&exact.features[0].shapley).unwrap() < 0.05);
        // Same seed, same stream.
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            assert_eq!(
                sample_contribution(&ctx, 1, &mut r1).unwrap(),
                sample_contribution(&ctx, 1, &mut r2).unwrap()
            );
        }
    }

    #[test]
    fn budget_checks() {
        let model = toy::two_feature_model();
        let basis = gram_schmidt_basis(3).unwrap();
        let bg = vec![vec![0.0, 0.0]];
        let ctx = CharacteristicContext::new(&model, &[1.0, 0.5], &bg, &basis).unwrap();
        let opts = |m_max, m_min| McOptions {
            m_max,
            m_min,
            seed: 0,
            epsilon: None,
        };
        assert!(matches!(mc_allocate(&ctx, &opts(10, 1)), Err(Error::BudgetTooSmall(_))));
        assert!(matches!(mc_allocate(&ctx, &opts(59, 30)), Err(Error::BudgetTooSmall(_))));
        let est = mc_allocate(&ctx, &opts(60, 30)).unwrap();
        assert_eq!(est.iter().map(|e| e.samples()).sum::<usize>(), 60);
    }

    #[test]
    fn dummy_feature_gets_minimum_samples() {
        let model = FnModel::new(3, 3, |x: &[f64]| vec![x[0].exp(), (x[0] * x[1]).exp(), 1.0]);
        let basis = gram_schmidt_basis(3).unwrap();
        let bg = vec![vec![0.0, 0.0, 0.0], vec![1.0, -1.0, 3.0], vec![-0.5, 2.0, 1.0]];
        let ctx = CharacteristicContext::new(&model, &[1.0, 0.5, 7.0], &bg, &basis).unwrap();
        let est = mc_allocate(
            &ctx,
            &McOptions {
                m_max: 600,
                m_min: 10,
                seed: 3,
                epsilon: None,
            },
        )
        .unwrap();
        assert_eq!(est[2].samples(), 10);
        assert_eq!(est[2].variance_trace(), 0.0);
        assert_eq!(est.iter().map(|e| e.samples()).sum::<usize>(), 600);
    }

    #[test]
    fn identical_features_share_budget() {
        // Same behaviour in both features, same background marginals.
        let model = FnModel::new(2, 3, |x: &[f64]| vec![x[0].exp(), x[1].exp(), 1.0]);
        let basis = gram_schmidt_basis(3).unwrap();
        let bg: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.1, i as f64 * 0.1]).collect();
        let ctx = CharacteristicContext::new(&model, &[1.0, 1.0], &bg, &basis).unwrap();
        let est = mc_allocate(
            &ctx,
            &McOptions {
                m_max: 20_000,
                m_min: 30,
                seed: 8,
                epsilon: None,
            },
        )
        .unwrap();
        let (a, b) = (est[0].samples() as f64, est[1].samples() as f64);
        assert!((a - b).abs() / (a + b) < 0.1, "{a} vs {b}");
    }

    #[test]
    fn mc_runs_are_reproducible() {
        let model = toy::two_feature_model();
        let basis = gram_schmidt_basis(3).unwrap();
        let bg = vec![vec![0.0, 0.0], vec![1.0, -1.0]];
        let ctx = CharacteristicContext::new(&model, &[1.0, 0.5], &bg, &basis).unwrap();
        let opts = McOptions {
            m_max: 200,
            m_min: 10,
            seed: 7,
            epsilon: Some(1e-6),
        };
        let a = mc_shapley(&ctx, &opts).unwrap();
        let b = mc_shapley(&ctx, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.estimator.adjusted);
        assert!(a.efficiency_residual() < 1e-5);
    }
}
