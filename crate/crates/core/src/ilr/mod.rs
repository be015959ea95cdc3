//! Orthonormal Aitchison bases and the isometric log-ratio transform.

mod cluster;
mod tree;

pub use cluster::{class_statistics, cluster_tree, ClassStatistics, ClusterOutcome, Linkage};
pub use tree::{Balance, BalanceNode, BalanceTree};

use serde::{Deserialize, Serialize};

use crate::composition::Composition;
use crate::error::{Error, Result};

/// How a basis was obtained; enough to rebuild it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BasisDescriptor {
    GramSchmidt,
    Tree { tree: BalanceTree },
    Cluster { tree: BalanceTree },
}

/// Coordinates of a composition in a given basis.
#[derive(Debug, Clone, PartialEq)]
pub struct IlrVector {
    pub coords: Vec<f64>,
    pub basis_id: String,
}

/// An Aitchison orthonormal basis of the `D`-part simplex, stored as its
/// `(D-1) x D` contrast matrix over log-parts. Each row sums to zero and has
/// unit Euclidean norm; rows are mutually orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    classes: usize,
    contrast: Vec<Vec<f64>>,
    descriptor: BasisDescriptor,
    id: String,
}

/// Basis built by Gram-Schmidt orthonormalisation of `e_1 - e_{i+1}` in clr
/// space. Coordinate `i` contrasts class `i+1` against classes `1..=i`.
pub fn gram_schmidt_basis(classes: usize) -> Result<OrthonormalBasis> {
    if classes < 2 {
        return Err(Error::DimensionTooSmall(classes));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(classes - 1);
    for i in 1..classes {
        let mut v = vec![0.0; classes];
        v[0] = 1.0;
        v[i] = -1.0;
        // Modified Gram-Schmidt.
        for r in &rows {
            let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(r) {
                *a -= dot * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        rows.push(v);
    }
    Ok(OrthonormalBasis {
        classes,
        contrast: rows,
        descriptor: BasisDescriptor::GramSchmidt,
        id: format!("gram-schmidt/{classes}"),
    })
}

/// Basis of balances defined by a sequential binary partition. A split with
/// `r` classes on the left and `s` on the right gives the coordinate
/// `sqrt(rs/(r+s)) * log(gmean(left) / gmean(right))`.
pub fn basis_from_tree(tree: &BalanceTree) -> OrthonormalBasis {
    build_from_tree(tree, BasisDescriptor::Tree { tree: tree.clone() })
}

fn build_from_tree(tree: &BalanceTree, descriptor: BasisDescriptor) -> OrthonormalBasis {
    let classes = tree.classes();
    let contrast = tree
        .balances()
        .into_iter()
        .map(|b| {
            let (r, s) = (b.numerator.len() as f64, b.denominator.len() as f64);
            let scale = (r * s / (r + s)).sqrt();
            let mut row = vec![0.0; classes];
            for &k in &b.numerator {
                row[k] = scale / r;
            }
            for &k in &b.denominator {
                row[k] = -scale / s;
            }
            row
        })
        .collect();
    OrthonormalBasis {
        classes,
        contrast,
        descriptor,
        id: format!("tree/{tree}"),
    }
}

/// Balance basis from clustering the class means of `points` under the
/// pooled within-class Mahalanobis metric.
pub fn basis_from_clustering(
    points: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    linkage: Linkage,
) -> Result<(OrthonormalBasis, ClusterOutcome)> {
    let stats = class_statistics(points, labels, classes)?;
    let outcome = cluster_tree(&stats.means, &stats.pooled_covariance, linkage)?;
    Ok((OrthonormalBasis::from_cluster_tree(&outcome.tree), outcome))
}

impl OrthonormalBasis {
    /// Rebuilds a basis on `classes` parts from its descriptor.
    pub fn from_descriptor(descriptor: &BasisDescriptor, classes: usize) -> Result<Self> {
        let basis = match descriptor {
            BasisDescriptor::GramSchmidt => gram_schmidt_basis(classes)?,
            BasisDescriptor::Tree { tree } => basis_from_tree(tree),
            BasisDescriptor::Cluster { tree } => Self::from_cluster_tree(tree),
        };
        if basis.classes != classes {
            return Err(Error::DimensionMismatch {
                expected: classes,
                got: basis.classes,
            });
        }
        Ok(basis)
    }

    /// Basis from a tree obtained by clustering the classes.
    pub fn from_cluster_tree(tree: &BalanceTree) -> Self {
        build_from_tree(tree, BasisDescriptor::Cluster { tree: tree.clone() })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Number of coordinates, `D - 1`.
    pub fn dim(&self) -> usize {
        self.classes - 1
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn descriptor(&self) -> &BasisDescriptor {
        &self.descriptor
    }

    pub fn contrast_matrix(&self) -> &[Vec<f64>] {
        &self.contrast
    }

    /// The basis compositions `e^(i)`.
    pub fn vectors(&self) -> Vec<Composition> {
        self.contrast
            .iter()
            .map(|row| Composition::from_log_parts(row).expect("contrast rows are finite"))
            .collect()
    }

    fn check(&self, got: usize) -> Result<()> {
        if got != self.classes {
            return Err(Error::DimensionMismatch {
                expected: self.classes,
                got,
            });
        }
        Ok(())
    }

    /// Raw ILR coordinates of `p`.
    pub fn coords(&self, p: &Composition) -> Result<Vec<f64>> {
        self.check(p.dim())?;
        let logs = p.log_parts();
        Ok(self
            .contrast
            .iter()
            .map(|row| row.iter().zip(&logs).map(|(c, l)| c * l).sum())
            .collect())
    }

    pub fn ilr(&self, p: &Composition) -> Result<IlrVector> {
        Ok(IlrVector {
            coords: self.coords(p)?,
            basis_id: self.id.clone(),
        })
    }

    /// Composition with the given raw ILR coordinates.
    pub fn from_coords(&self, coords: &[f64]) -> Result<Composition> {
        if coords.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: coords.len(),
            });
        }
        let mut logs = vec![0.0; self.classes];
        for (row, c) in self.contrast.iter().zip(coords) {
            for (l, r) in logs.iter_mut().zip(row) {
                *l += c * r;
            }
        }
        Composition::from_log_parts(&logs)
    }

    pub fn ilr_inv(&self, v: &IlrVector) -> Result<Composition> {
        self.from_coords(&v.coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn three_class_worked_coordinates() {
        let gs = gram_schmidt_basis(3).unwrap();
        let u = Composition::uniform(3).unwrap();
        assert!(close(&gs.coords(&u).unwrap(), &[0.0, 0.0], 1e-15));
        let p = Composition::closure(&[0.5, 0.25, 0.25]).unwrap();
        let c = gs.coords(&p).unwrap();
        // Closed forms of the two balances.
        let p1 = (0.5_f64 / 0.25).ln() / 2f64.sqrt();
        let p2 = (2.0_f64 / 3.0).sqrt() * ((0.5_f64 * 0.25).sqrt() / 0.25).ln();
        assert!(close(&c, &[p1, p2], 1e-14));
        assert!(close(&c, &[0.490129, 0.282976], 1e-6));
        let back = gs.from_coords(&[0.490129, 0.282976]).unwrap();
        assert!(back.distance(&p).unwrap() < 1e-5);
    }

    #[test]
    fn two_class_is_scaled_logit() {
        let gs = gram_schmidt_basis(2).unwrap();
        let p = Composition::closure(&[0.8, 0.2]).unwrap();
        let c = gs.coords(&p).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0] - (0.8_f64 / 0.2).ln() / 2f64.sqrt()).abs() < 1e-14);
        let t = basis_from_tree(&BalanceTree::chain(2).unwrap());
        assert!((t.contrast_matrix()[0][0] - 0.5_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gram_schmidt_matches_chain_tree() {
        for d in 2..=12 {
            let gs = gram_schmidt_basis(d).unwrap();
            let chain = basis_from_tree(&BalanceTree::chain(d).unwrap());
            for (a, b) in gs.contrast_matrix().iter().zip(chain.contrast_matrix()) {
                assert!(close(a, b, 1e-12), "d={d}");
            }
        }
    }

    #[test]
    fn basis_vectors_map_to_unit_vectors() {
        let b = gram_schmidt_basis(5).unwrap();
        for (i, e) in b.vectors().iter().enumerate() {
            let c = b.coords(e).unwrap();
            for (j, v) in c.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-10);
            }
            for (j, f) in b.vectors().iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((e.inner(f).unwrap() - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ten_class_tree_balance() {
        // Digits tree: ((4,((1,(7,8)),(5,(2,(3,9))))),(0,6)).
        use BalanceNode::Leaf as L;
        let s = BalanceNode::split;
        let root = s(
            s(
                L(4),
                s(s(L(1), s(L(7), L(8))), s(L(5), s(L(2), s(L(3), L(9))))),
            ),
            s(L(0), L(6)),
        );
        let tree = BalanceTree::new(root).unwrap();
        let basis = basis_from_tree(&tree);
        let idx = tree
            .balances()
            .iter()
            .position(|b| b.numerator == vec![1] && b.denominator == vec![7, 8])
            .unwrap();
        let raw: Vec<f64> = (0..10).map(|i| 0.05 + 0.01 * i as f64).collect();
        let p = Composition::closure(&raw).unwrap();
        let pp = p.parts();
        let want = (2.0_f64 / 3.0).sqrt() * (pp[1] / (pp[7] * pp[8]).sqrt()).ln();
        assert!((basis.coords(&p).unwrap()[idx] - want).abs() < 1e-14);
        let row = &basis.contrast_matrix()[idx];
        assert!(row.iter().enumerate().all(|(k, v)| [1, 7, 8].contains(&k) || *v == 0.0));
    }

    #[test]
    fn descriptor_round_trip() {
        let tree = BalanceTree::chain(3).unwrap();
        let b = basis_from_tree(&tree);
        let json = serde_json::to_string(b.descriptor()).unwrap();
        assert!(json.contains("\"kind\":\"tree\""));
        let back: BasisDescriptor = serde_json::from_str(&json).unwrap();
        assert_eq!(OrthonormalBasis::from_descriptor(&back, 3).unwrap(), b);
        assert!(OrthonormalBasis::from_descriptor(&back, 4).is_err());
        let gs = serde_json::to_string(gram_schmidt_basis(3).unwrap().descriptor()).unwrap();
        assert_eq!(gs, r#"{"kind":"gram-schmidt"}"#);
    }

    #[test]
    fn dimension_errors() {
        let b = gram_schmidt_basis(3).unwrap();
        assert!(b.coords(&Composition::uniform(4).unwrap()).is_err());
        assert!(b.from_coords(&[0.0]).is_err());
        assert!(matches!(gram_schmidt_basis(1), Err(Error::DimensionTooSmall(1))));
    }
}
