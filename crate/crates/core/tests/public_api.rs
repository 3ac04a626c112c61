use bergman_core::constants::{closed_form_unweighted, regularity_window, Family};
use bergman_core::geometry::build_tree;
use bergman_core::kernels::{kernel_hartogs, kernel_hartogs_ambient};
use bergman_core::operators::radial_dual_ratio;
use bergman_core::weights::dual_weight;
use bergman_core::{DiscPoint, ExponentPair, HartogsPoint, Weight};
use num_complex::Complex64;

#[test]
fn chart_kernel_matches_ambient_formula() {
    let pts = [
        (Complex64::new(0.1, 0.05), Complex64::new(0.3, -0.4)),
        (Complex64::new(-0.2, 0.3), Complex64::new(0.0, 0.7)),
        (Complex64::new(0.6, 0.0), Complex64::new(-0.2, 0.75)),
    ];
    for &(z1, z2) in &pts {
        for &(w1, w2) in &pts {
            let z = HartogsPoint::from_ambient(z1, z2).unwrap();
            let w = HartogsPoint::from_ambient(w1, w2).unwrap();
            let a = kernel_hartogs(&z, &w).unwrap();
            let b = kernel_hartogs_ambient(z1, z2, w1, w2).unwrap();
            assert!((a - b).norm() <= 1e-12 * b.norm(), "{a} vs {b}");
            // Hermitian symmetry
            let c = kernel_hartogs(&w, &z).unwrap();
            assert!((a - c.conj()).norm() <= 1e-12 * a.norm());
        }
    }
    assert!(kernel_hartogs_ambient(Complex64::new(0.5, 0.0), Complex64::new(0.4, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.5, 0.0)).is_err());
}

#[test]
fn unweighted_closed_forms() {
    // 2/(4-p) (2(p-1)/(3p-4))^(p-1) at p = 2 and p = 3
    let c2 = closed_form_unweighted(&ExponentPair::new(2.0).unwrap()).unwrap();
    assert!((c2 - 1.0).abs() < 1e-14);
    let c3 = closed_form_unweighted(&ExponentPair::new(3.0).unwrap()).unwrap();
    assert!((c3 - 2.0 * (4.0f64 / 5.0).powi(2)).abs() < 1e-14);
    assert!(closed_form_unweighted(&ExponentPair::new(4.5).unwrap()).is_none());
    let w = regularity_window(Family::Unweighted).unwrap();
    assert!(w.contains(2.0) && !w.contains(4.0 / 3.0) && !w.contains(4.0));
    assert!((radial_dual_ratio(2.0) - 1.0).abs() < 1e-14);
}

#[test]
fn dual_of_dual_power_weight() {
    let p = ExponentPair::new(3.0).unwrap();
    let mu = Weight::PowerAB { a: 0.7, b: -0.3 };
    let nu = dual_weight(&mu, &p).unwrap();
    let back = dual_weight(&nu, &ExponentPair::new(p.q).unwrap()).unwrap();
    let Weight::PowerAB { a, b } = back else { panic!("{back:?}") };
    assert!((a - 0.7).abs() < 1e-12 && (b + 0.3).abs() < 1e-12, "{a} {b}");
}

#[test]
fn located_nodes_have_root_lineage() {
    let tree = build_tree(1.0 / 3.0, 8).unwrap();
    assert_eq!(tree.node_count(), (1 << 9) - 1);
    for (r, th) in [(0.1, 0.0), (0.6, 1.0), (0.9, 2.5), (0.97, -2.0)] {
        let node = tree.locate(DiscPoint::polar(r, th).unwrap()).unwrap();
        let line = node.lineage();
        assert!(line.iter().any(|n| n.is_root()));
        assert!(line.iter().all(|n| n.is_ancestor_or_self_of(&node)));
        assert!(tree.cell(node).kube_contains(Complex64::from_polar(r, th)));
    }
    assert!(build_tree(1.0, 3).is_err());
}

proptest::proptest! {
    #[test]
    fn dual_power_weight_is_an_involution(a in -1.9f64..1.9, b in -4.0f64..4.0, p in 1.1f64..8.0) {
        let pe = ExponentPair::new(p).unwrap();
        let nu = dual_weight(&Weight::PowerAB { a, b }, &pe).unwrap();
        let back = dual_weight(&nu, &ExponentPair::new(pe.q).unwrap()).unwrap();
        let Weight::PowerAB { a: a2, b: b2 } = back else { panic!("{back:?}") };
        proptest::prop_assert!((a - a2).abs() < 1e-9 && (b - b2).abs() < 1e-9);
    }

    #[test]
    fn every_point_sits_in_its_located_kube(r in 0.0f64..0.99, th in -3.14f64..3.14, off in 0.0f64..1.0) {
        let tree = build_tree(off, 10).unwrap();
        let node = tree.locate(DiscPoint::polar(r, th).unwrap()).unwrap();
        proptest::prop_assert!(tree.cell(node).kube_contains(Complex64::from_polar(r, th)));
    }
}
