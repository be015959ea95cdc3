//! Test-only models and independent oracles.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sshap::ilr::OrthonormalBasis;
use sshap::model::{FnModel, Predictor};
use sshap::Composition;

pub fn stub_script() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/stub_model.py")
}

pub fn stub_cmd(extra: &str) -> String {
    format!("python3 {} {extra}", stub_script().display())
}

pub fn data_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

/// Log-quadratic toy classifier: `p_k ∝ exp(c_k + Σ a_kj x_j + Σ b_kjl x_j x_l)`.
#[derive(Debug, Clone)]
pub struct Toy {
    pub features: usize,
    pub classes: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<Vec<f64>>>,
    pub c: Vec<f64>,
}

impl Toy {
    pub fn random(rng: &mut ChaCha8Rng, features: usize, classes: usize) -> Self {
        let a = (0..classes)
            .map(|_| (0..features).map(|_| rng.gen_range(-0.8..0.8)).collect())
            .collect();
        let b = (0..classes)
            .map(|_| {
                (0..features)
                    .map(|_| (0..features).map(|_| rng.gen_range(-0.1..0.1)).collect())
                    .collect()
            })
            .collect();
        let c = (0..classes).map(|_| rng.gen_range(-0.5..0.5)).collect();
        Toy {
            features,
            classes,
            a,
            b,
            c,
        }
    }

    /// Removes every dependence on feature `j`.
    pub fn ignore(mut self, j: usize) -> Self {
        for k in 0..self.classes {
            self.a[k][j] = 0.0;
            for l in 0..self.features {
                self.b[k][j][l] = 0.0;
                self.b[k][l][j] = 0.0;
            }
        }
        self
    }

    /// Makes the model invariant under swapping features `i` and `j`.
    pub fn symmetric_in(mut self, i: usize, j: usize) -> Self {
        for k in 0..self.classes {
            let a = 0.5 * (self.a[k][i] + self.a[k][j]);
            self.a[k][i] = a;
            self.a[k][j] = a;
            let swap = |t: usize| if t == i { j } else if t == j { i } else { t };
            let old = &self.b[k];
            let sym = (0..self.features)
                .map(|l| {
                    (0..self.features)
                        .map(|m| 0.5 * (old[l][m] + old[swap(l)][swap(m)]))
                        .collect()
                })
                .collect();
            self.b[k] = sym;
        }
        self
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|k| {
                let mut s = self.c[k];
                for j in 0..self.features {
                    s += self.a[k][j] * x[j];
                    for l in 0..self.features {
                        s += self.b[k][j][l] * x[j] * x[l];
                    }
                }
                s
            })
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let s = self.scores(x);
        let top = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|v| (v - top).exp()).collect();
        let total: f64 = e.iter().sum();
        e.iter().map(|v| v / total).collect()
    }

    pub fn model(&self) -> FnModel<impl Fn(&[f64]) -> Vec<f64> + Send + Sync> {
        let me = self.clone();
        FnModel::new(self.features, self.classes, move |x: &[f64]| me.probabilities(x))
    }
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect())
        .collect()
}

pub fn random_composition(rng: &mut ChaCha8Rng, parts: usize) -> Composition {
    let logs: Vec<f64> = (0..parts).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    Composition::closure(&raw).unwrap()
}

/// Mean ILR coordinates of the model over hybrids taking coalition features
/// from `x` and the rest from each background row.
fn coalition_value(
    model: &dyn Predictor,
    x: &[f64],
    background: &[Vec<f64>],
    basis: &OrthonormalBasis,
    mask: u64,
) -> Vec<f64> {
    let hybrids: Vec<Vec<f64>> = background
        .iter()
        .map(|w| {
            (0..x.len())
                .map(|j| if mask >> j & 1 == 1 { x[j] } else { w[j] })
                .collect()
        })
        .collect();
    let preds = model.predict(&hybrids).unwrap();
    let mut acc = vec![0.0; basis.dim()];
    for p in &preds {
        for (a, c) in acc.iter_mut().zip(basis.coords(p).unwrap()) {
            *a += c;
        }
    }
    acc.iter().map(|a| a / preds.len() as f64).collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Shapley ILR coordinates by averaging marginal contributions over every
/// ordering of the features.
pub fn permutation_shapley(
    model: &dyn Predictor,
    x: &[f64],
    background: &[Vec<f64>],
    basis: &OrthonormalBasis,
) -> Vec<Vec<f64>> {
    let d = x.len();
    let mut cache: HashMap<u64, Vec<f64>> = HashMap::new();
    let mut value = |mask: u64| {
        cache
            .entry(mask)
            .or_insert_with(|| coalition_value(model, x, background, basis, mask))
            .clone()
    };
    let perms = permutations(d);
    let mut phi = vec![vec![0.0; basis.dim()]; d];
    for p in &perms {
        let mut mask = 0u64;
        let mut prev = value(mask);
        for &i in p {
            mask |= 1 << i;
            let next = value(mask);
            for (f, (a, b)) in phi[i].iter_mut().zip(next.iter().zip(&prev)) {
                *f += a - b;
            }
            prev = next;
        }
    }
    let n = perms.len() as f64;
    phi.iter()
        .map(|row| row.iter().map(|v| v / n).collect())
        .collect()
}

/// Scalar Shapley values of `g` with arithmetic-mean interventional
/// expectations, by subset enumeration.
pub fn scalar_shapley(g: &dyn Fn(&[f64]) -> f64, x: &[f64], background: &[Vec<f64>]) -> Vec<f64> {
    let d = x.len();
    let v = |mask: u64| -> f64 {
        background
            .iter()
            .map(|w| {
                let h: Vec<f64> = (0..d)
                    .map(|j| if mask >> j & 1 == 1 { x[j] } else { w[j] })
                    .collect();
                g(&h)
            })
            .sum::<f64>()
            / background.len() as f64
    };
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    (0..d)
        .map(|i| {
            let mut phi = 0.0;
            for mask in 0u64..1 << d {
                if mask >> i & 1 == 1 {
                    continue;
                }
                let s = mask.count_ones() as usize;
                let w = fact(s) * fact(d - s - 1) / fact(d);
                phi += w * (v(mask | 1 << i) - v(mask));
            }
            phi
        })
        .collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
