use super::sampling::FeatureEstimate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Adjustment {
    /// Adjusted ILR coordinates, one row per feature.
    pub coords: Vec<Vec<f64>>,
    /// Weights applied to the error composition.
    pub weights: Vec<f64>,
    /// Every variance trace was zero; the error was spread evenly.
    pub uniform_fallback: bool,
}

/// Redistributes the efficiency error `s_err = f(x) ⊖ base ⊖ (⊕ φ̂_i)` over
/// the estimates, giving feature `i` the share
/// `w_i = v_i / (1 + Σ v_j)` with `v_i = tr Σ_i / (ε max_j tr Σ_j)`.
///
/// The remaining error is `s_err / (1 + Σ v_j)`, whose norm is at most
/// `ε ||s_err||`. An error that is exactly zero leaves the estimates
/// untouched.
pub fn adjust_efficiency(
    estimates: &[FeatureEstimate],
    prediction_coords: &[f64],
    base_coords: &[f64],
    epsilon: f64,
) -> Result<Adjustment> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Usage(format!("epsilon must be positive, got {epsilon}")));
    }
    let dim = prediction_coords.len();
    if base_coords.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: base_coords.len(),
        });
    }
    if let Some(e) = estimates.iter().find(|e| e.mean_ilr().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: e.mean_ilr().len(),
        });
    }
    let mut coords: Vec<Vec<f64>> = estimates.iter().map(|e| e.mean_ilr().to_vec()).collect();
    let d = estimates.len();

    let mut s_err: Vec<f64> = prediction_coords
        .iter()
        .zip(base_coords)
        .map(|(p, b)| p - b)
        .collect();
    for c in &coords {
        for (s, v) in s_err.iter_mut().zip(c) {
            *s -= v;
        }
    }
    if s_err.iter().all(|s| *s == 0.0) || d == 0 {
        return Ok(Adjustment {
            coords,
            weights: vec![0.0; d],
            uniform_fallback: false,
        });
    }

    let traces: Vec<f64> = estimates.iter().map(FeatureEstimate::variance_trace).collect();
    let max = traces.iter().cloned().fold(0.0, f64::max);
    let (weights, uniform_fallback) = if max > 0.0 {
        let v: Vec<f64> = traces.iter().map(|t| t / (epsilon * max)).collect();
        let total: f64 = v.iter().sum();
        (v.iter().map(|vi| vi / (1.0 + total)).collect(), false)
    } else {
        log::warn!("all variance traces are zero; spreading the efficiency error evenly");
        (vec![1.0 / (d as f64 + epsilon); d], true)
    };
    for (c, w) in coords.iter_mut().zip(&weights) {
        for (v, s) in c.iter_mut().zip(&s_err) {
            *v += w * s;
        }
    }
    Ok(Adjustment {
        coords,
        weights,
        uniform_fallback,
    })
}
