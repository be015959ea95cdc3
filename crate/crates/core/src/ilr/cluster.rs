//! Balance trees from agglomerative clustering of class means under a
//! Mahalanobis metric.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::tree::{BalanceNode, BalanceTree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    #[default]
    Complete,
    Average,
}

#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub tree: BalanceTree,
    /// The covariance could not be inverted; the identity metric was used.
    pub singular_covariance: bool,
}

/// Per-class means and the pooled within-class covariance of ILR points.
#[derive(Debug, Clone)]
pub struct ClassStatistics {
    pub means: Vec<Vec<f64>>,
    pub pooled_covariance: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

pub fn class_statistics(
    points: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
) -> Result<ClassStatistics> {
    if points.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: labels.len(),
        });
    }
    let dim = points.first().map(Vec::len).ok_or(Error::EmptySample)?;
    let mut means = vec![vec![0.0; dim]; classes];
    let mut counts = vec![0usize; classes];
    for (p, &k) in points.iter().zip(labels) {
        if k >= classes {
            return Err(Error::IndexOutOfRange { index: k, classes });
        }
        counts[k] += 1;
        for (m, v) in means[k].iter_mut().zip(p) {
            *m += v;
        }
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateData(format!("class {k} has no samples")));
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= c as f64);
    }
    let mut cov = vec![vec![0.0; dim]; dim];
    for (p, &k) in points.iter().zip(labels) {
        let centred: Vec<f64> = p.iter().zip(&means[k]).map(|(a, b)| a - b).collect();
        for i in 0..dim {
            for j in 0..dim {
                cov[i][j] += centred[i] * centred[j];
            }
        }
    }
    let dof = points.len().saturating_sub(classes).max(1) as f64;
    cov.iter_mut()
        .flat_map(|r| r.iter_mut())
        .for_each(|v| *v /= dof);
    Ok(ClassStatistics {
        means,
        pooled_covariance: cov,
        counts,
    })
}

fn mahalanobis_distances(points: &[Vec<f64>], cov: &[Vec<f64>]) -> (Vec<Vec<f64>>, bool) {
    let n = points.len();
    let dim = points[0].len();
    let shape_ok = cov.len() == dim && cov.iter().all(|r| r.len() == dim);
    let chol = if shape_ok {
        let m = DMatrix::from_fn(dim, dim, |i, j| cov[i][j]);
        let symmetric = (0..dim).all(|i| (0..dim).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= 1e-12 * (1.0 + m[(i, j)].abs())));
        if symmetric {
            m.cholesky()
        } else {
            None
        }
    } else {
        None
    };
    let singular = chol.is_none();
    if singular {
        log::warn!("pooled covariance is not positive definite; using the identity metric");
    }
    let mut dist = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let diff = DVector::from_iterator(
                dim,
                points[a].iter().zip(&points[b]).map(|(x, y)| x - y),
            );
            let d2 = match &chol {
                Some(c) => diff.dot(&c.solve(&diff)),
                None => diff.dot(&diff),
            };
            let d = d2.max(0.0).sqrt();
            dist[a][b] = d;
            dist[b][a] = d;
        }
    }
    (dist, singular)
}

struct Cluster {
    members: Vec<usize>,
    node: BalanceNode,
}

/// Agglomerative clustering of `D` class means. Ties are resolved towards the
/// pair whose smallest class indices are lexicographically lowest; the merged
/// cluster with the smaller minimum class index becomes the left child.
pub fn cluster_tree(
    class_means: &[Vec<f64>],
    pooled_covariance: &[Vec<f64>],
    linkage: Linkage,
) -> Result<ClusterOutcome> {
    let classes = class_means.len();
    if classes < 2 {
        return Err(Error::DimensionTooSmall(classes));
    }
    let dim = class_means[0].len();
    if let Some(bad) = class_means.iter().find(|m| m.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let (base, singular_covariance) = mahalanobis_distances(class_means, pooled_covariance);

    // Clusters are kept sorted by their smallest member.
    let mut clusters: Vec<Cluster> = (0..classes)
        .map(|k| Cluster {
            members: vec![k],
            node: BalanceNode::Leaf(k),
        })
        .collect();
    let mut dist = base.clone();

    while clusters.len() > 1 {
        let mut best = (0, 1);
        for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                if dist[i][j] < dist[best.0][best.1] {
                    best = (i, j);
                }
            }
        }
        let (i, j) = best;
        let right = clusters.remove(j);
        let left = clusters.remove(i);
        let (ni, nj) = (left.members.len() as f64, right.members.len() as f64);

        let mut merged_row: Vec<f64> = Vec::with_capacity(clusters.len());
        for k in (0..dist.len()).filter(|&k| k != i && k != j) {
            let (a, b) = (dist[i][k], dist[j][k]);
            merged_row.push(match linkage {
                Linkage::Single => a.min(b),
                Linkage::Complete => a.max(b),
                Linkage::Average => (ni * a + nj * b) / (ni + nj),
            });
        }
        let mut members = left.members;
        members.extend(right.members);
        members.sort_unstable();
        let merged = Cluster {
            members,
            node: BalanceNode::split(left.node, right.node),
        };

        // Shrink the distance matrix and insert the merged cluster at its
        // sorted position.
        let keep: Vec<usize> = (0..dist.len()).filter(|&k| k != i && k != j).collect();
        let mut reduced: Vec<Vec<f64>> = keep
            .iter()
            .map(|&a| keep.iter().map(|&b| dist[a][b]).collect())
            .collect();
        let pos = clusters
            .iter()
            .position(|c| c.members[0] > merged.members[0])
            .unwrap_or(clusters.len());
        for (row, &d) in reduced.iter_mut().zip(&merged_row) {
            row.insert(pos, d);
        }
        let mut new_row = merged_row;
        new_row.insert(pos, 0.0);
        reduced.insert(pos, new_row);
        clusters.insert(pos, merged);
        dist = reduced;
    }

    let root = clusters.pop().expect("one cluster remains").node;
    Ok(ClusterOutcome {
        tree: BalanceTree::new(root)?,
        singular_covariance,
    })
}
