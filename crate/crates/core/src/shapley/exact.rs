use rayon::prelude::*;

use super::{CharacteristicContext, EstimatorInfo, EstimatorMode, Explanation};
use crate::error::{Error, Result};

pub const MAX_EXACT_FEATURES: usize = 20;

/// `|S|! (d - |S| - 1)! / d!` for a coalition of size `s` not containing the
/// feature, computed as `1 / (d * C(d-1, s))`.
pub fn shapley_weight(d: usize, s: usize) -> f64 {
    let mut binom = 1.0_f64;
    for k in 0..s {
        binom = binom * (d - 1 - k) as f64 / (k + 1) as f64;
    }
    1.0 / (d as f64 * binom)
}

/// Shapley compositions by enumerating all `2^d` coalitions over the full
/// background. Efficiency holds exactly, so no adjustment is applied.
pub fn exact_shapley(ctx: &CharacteristicContext<'_>) -> Result<Explanation> {
    let d = ctx.num_features();
    if d > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeaturesForExact {
            max: MAX_EXACT_FEATURES,
            got: d,
        });
    }
    let values: Vec<Vec<f64>> = (0u64..1 << d)
        .into_par_iter()
        .map(|mask| {
            let keep: Vec<bool> = (0..d).map(|i| mask >> i & 1 == 1).collect();
            ctx.characteristic_coords(&keep, None)
        })
        .collect::<Result<_>>()?;

    let dim = ctx.basis().dim();
    let weights: Vec<f64> = (0..d).map(|s| shapley_weight(d, s)).collect();
    let phis: Vec<Vec<f64>> = (0..d)
        .into_par_iter()
        .map(|i| {
            let bit = 1usize << i;
            let mut phi = vec![0.0; dim];
            for mask in 0..values.len() {
                if mask & bit != 0 {
                    continue;
                }
                let w = weights[mask.count_ones() as usize];
                let (with, without) = (&values[mask | bit], &values[mask]);
                for ((p, a), b) in phi.iter_mut().zip(with).zip(without) {
                    *p += w * (a - b);
                }
            }
            phi
        })
        .collect();

    let coalitions = 1usize << (d - 1);
    ctx.explanation(
        &phis,
        &vec![coalitions; d],
        &vec![0.0; d],
        EstimatorInfo {
            mode: EstimatorMode::Exact,
            m_max: None,
            m_min: None,
            seed: None,
            epsilon: None,
            adjusted: false,
            uniform_adjustment: false,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::Composition;
    use crate::ilr::gram_schmidt_basis;
    use crate::model::FnModel;
    use crate::shapley::toy;

    #[test]
    fn weights_sum_over_coalitions_to_one() {
        for d in 1..=20usize {
            let mut total = 0.0;
            let mut binom = 1.0;
            for s in 0..d {
                total += binom * shapley_weight(d, s);
                binom = binom * (d - 1 - s) as f64 / (s + 1) as f64;
            }
            assert!((total - 1.0).abs() < 1e-12, "d={d}");
        }
        assert_eq!(shapley_weight(3, 0), 1.0 / 3.0);
        assert_eq!(shapley_weight(3, 1), 1.0 / 6.0);
    }

    #[test]
    fn toy_model_hand_computed() {
        let model = toy::two_feature_model();
        let basis = gram_schmidt_basis(3).unwrap();
        let bg = vec![vec![0.0, 0.0]];
        let ctx = CharacteristicContext::new(&model, &[1.0, 0.0], &bg, &basis).unwrap();
        let ex = exact_shapley(&ctx).unwrap();
        let e = Composition::closure(&[std::f64::consts::E, 1.0, 1.0]).unwrap();
        let u = Composition::uniform(3).unwrap();
        assert!(ex.features[0].shapley.distance(&e).unwrap() < 1e-12);
        assert!(ex.features[1].shapley.distance(&u).unwrap() < 1e-12);
        assert!(!ex.estimator.adjusted);
        assert!(ex.efficiency_residual() < 1e-12);
    }

    #[test]
    fn dummy_and_symmetric_features() {
        let basis = gram_schmidt_basis(3).unwrap();
        let bg = vec![vec![0.3, -0.2, 1.0], vec![-0.3, 0.2, 2.0], vec![0.1, 0.1, -1.0]];
        // Ignores feature 2.
        let model = FnModel::new(3, 3, |x: &[f64]| {
            vec![(x[0] * x[1]).exp(), (x[0] - x[1]).exp(), 1.0]
        });
        let ctx = CharacteristicContext::new(&model, &[1.0, 2.0, 5.0], &bg, &basis).unwrap();
        let ex = exact_shapley(&ctx).unwrap();
        assert!(ex.features[2].shapley.norm() < 1e-10);

        // Symmetric in x1 + x2, evaluated at x1 == x2 with a symmetric background.
        let sym = FnModel::new(2, 3, |x: &[f64]| {
            let s = x[0] + x[1];
            vec![s.exp(), (0.5 * s * s).exp(), 1.0]
        });
        let bg = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![-1.0, -1.0]];
        let ctx = CharacteristicContext::new(&sym, &[0.7, 0.7], &bg, &basis).unwrap();
        let ex = exact_shapley(&ctx).unwrap();
        let dist = ex.features[0]
            .shapley
            .distance(&ex.features[1].shapley)
            .unwrap();
        assert!(dist < 1e-10);
    }

    #[test]
    fn guard_on_feature_count() {
        let basis = gram_schmidt_basis(2).unwrap();
        let model = FnModel::new(21, 2, |_: &[f64]| vec![1.0, 1.0]);
        let bg = vec![vec![0.0; 21]];
        let ctx = CharacteristicContext::new(&model, &[0.0; 21], &bg, &basis).unwrap();
        assert!(matches!(
            exact_shapley(&ctx),
            Err(Error::TooManyFeaturesForExact { max: 20, got: 21 })
        ));
    }
}
