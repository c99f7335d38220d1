mod common;

use fractal_cuntz::ifs::Word;
use fractal_cuntz::opspace::{cuntz_relation_defects, CylinderSpace, LeveledVector};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refine_preserves_inner_products(seed in any::<u64>(), n in 2usize..5, k in 0usize..4, s in 0usize..5) {
        let sp = CylinderSpace::new(n);
        let mut rng = common::rng(seed);
        let u = common::random_vector(&mut rng, n, k);
        let v = common::random_vector(&mut rng, n, k);
        let before = sp.inner(&u, &v).unwrap();
        let after = sp.inner(&sp.refine(&u, s).unwrap(), &sp.refine(&v, s).unwrap()).unwrap();
        prop_assert!((before - after).norm() <= 1e-13 * (1.0 + before.norm()));
    }

    #[test]
    fn isometry_commutes_with_refine(seed in any::<u64>(), n in 2usize..5, k in 0usize..4) {
        let sp = CylinderSpace::new(n);
        let mut rng = common::rng(seed);
        let v = common::random_vector(&mut rng, n, k);
        for i in 1..=n {
            let a = sp.refine(&sp.apply_isometry(i, &v).unwrap(), 1).unwrap();
            let b = sp.apply_isometry(i, &sp.refine(&v, 1).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn coisometry_is_the_adjoint(seed in any::<u64>(), n in 2usize..5, k in 0usize..4) {
        let sp = CylinderSpace::new(n);
        let mut rng = common::rng(seed);
        let u = common::random_vector(&mut rng, n, k);
        let w = common::random_vector(&mut rng, n, k + 1);
        for i in 1..=n {
            let lhs = sp.inner(&sp.apply_isometry(i, &u).unwrap(), &w).unwrap();
            let rhs = sp.inner(&u, &sp.apply_coisometry(i, &w).unwrap()).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-13 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn isometry_range_is_its_block(seed in any::<u64>(), n in 2usize..5, k in 0usize..4) {
        let sp = CylinderSpace::new(n);
        let mut rng = common::rng(seed);
        let v = common::random_vector(&mut rng, n, k);
        for i in 1..=n {
            let out = sp.apply_isometry(i, &v).unwrap();
            for (w, c) in Word::all(n, k + 1).zip(out.coeffs()) {
                if w.letters()[0] != i {
                    prop_assert_eq!(c.norm(), 0.0);
                }
            }
        }
    }
}

#[test]
fn refine_inner_product_long_sum() {
    // n = 4, four refinement steps: 16384 products summed.
    let sp = CylinderSpace::new(4);
    let mut rng = common::rng(7728222580912474387);
    let u = common::random_vector(&mut rng, 4, 3);
    let v = common::random_vector(&mut rng, 4, 3);
    let before = sp.inner(&u, &v).unwrap();
    let after = sp.inner(&sp.refine(&u, 4).unwrap(), &sp.refine(&v, 4).unwrap()).unwrap();
    assert!((before - after).norm() <= 1e-13 * (1.0 + before.norm()));
}

#[test]
fn every_block_basis_vector_is_attained() {
    for n in 2..=4 {
        let sp = CylinderSpace::new(n);
        for k in 0..=3 {
            for w in Word::all(n, k) {
                for i in 1..=n {
                    let out = sp.apply_isometry(i, &LeveledVector::basis(n, &w)).unwrap();
                    assert_eq!(out, LeveledVector::basis(n, &w.prepend(i)));
                }
            }
        }
    }
}

#[test]
fn distinct_blocks_are_orthogonal() {
    for n in 2..=3 {
        let sp = CylinderSpace::new(n);
        for k in 1..=3 {
            let words: Vec<Word> = Word::all(n, k).collect();
            for a in &words {
                for b in &words {
                    if a.letters()[0] != b.letters()[0] {
                        let ip = sp.inner(&LeveledVector::basis(n, a), &LeveledVector::basis(n, b)).unwrap();
                        assert_eq!(ip.norm(), 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn relations_hold_exactly_at_small_levels() {
    for n in 2..=5 {
        for k in 1..=3 {
            assert_eq!(cuntz_relation_defects(n, k).unwrap(), (0.0, 0.0));
        }
    }
}
