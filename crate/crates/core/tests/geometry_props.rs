use proptest::prelude::*;
use sshap::class_geometry::{class_composition, cosine, project};
use sshap::ilr::{basis_from_tree, gram_schmidt_basis, BalanceTree};
use sshap::Composition;

fn composition(max_parts: usize) -> impl Strategy<Value = Composition> {
    prop::collection::vec(-4.0f64..4.0, 2..=max_parts)
        .prop_map(|logs| Composition::from_log_parts(&logs).unwrap())
}

fn pair(max_parts: usize) -> impl Strategy<Value = (Composition, Composition)> {
    (2..=max_parts).prop_flat_map(|d| {
        let c = prop::collection::vec(-4.0f64..4.0, d)
            .prop_map(|l| Composition::from_log_parts(&l).unwrap());
        (c.clone(), c)
    })
}

proptest! {
    #[test]
    fn closure_is_scale_invariant(x in composition(8), k in 1e-3f64..1e3) {
        let scaled: Vec<f64> = x.parts().iter().map(|p| p * k).collect();
        let y = Composition::closure(&scaled).unwrap();
        prop_assert!(x.distance(&y).unwrap() < 1e-10);
    }

    #[test]
    fn perturbation_is_a_group((x, y) in pair(8)) {
        let u = Composition::uniform(x.dim()).unwrap();
        prop_assert!(x.perturb(&y).unwrap().distance(&y.perturb(&x).unwrap()).unwrap() < 1e-10);
        prop_assert!(x.perturb(&x.inverse()).unwrap().distance(&u).unwrap() < 1e-10);
        prop_assert!(x.subtract(&y).unwrap().perturb(&y).unwrap().distance(&x).unwrap() < 1e-10);
    }

    #[test]
    fn gram_schmidt_is_an_isometry((x, y) in pair(10)) {
        let b = gram_schmidt_basis(x.dim()).unwrap();
        let (cx, cy) = (b.coords(&x).unwrap(), b.coords(&y).unwrap());
        let dot: f64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum();
        prop_assert!((dot - x.inner(&y).unwrap()).abs() < 1e-10);
        prop_assert!(b.from_coords(&cx).unwrap().distance(&x).unwrap() < 1e-10);
    }

    #[test]
    fn chain_tree_matches_gram_schmidt(x in composition(10)) {
        let d = x.dim();
        let gs = gram_schmidt_basis(d).unwrap();
        let tree = basis_from_tree(&BalanceTree::chain(d).unwrap());
        let (a, b) = (gs.coords(&x).unwrap(), tree.coords(&x).unwrap());
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn powering_scales_the_norm(x in composition(8), a in -3.0f64..3.0) {
        prop_assert!((x.power(a).norm() - a.abs() * x.norm()).abs() < 1e-9);
    }

    #[test]
    fn class_projections_sum_to_zero(x in composition(8)) {
        let d = x.dim();
        let s: f64 = (0..d).map(|k| project(&x, &class_composition(k, d).unwrap()).unwrap()).sum();
        prop_assert!(s.abs() < 1e-9);
    }

    #[test]
    fn cosine_is_bounded((x, y) in pair(8)) {
        prop_assume!(x.norm() > 1e-6 && y.norm() > 1e-6);
        let c = cosine(&x, &y).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
    }
}
