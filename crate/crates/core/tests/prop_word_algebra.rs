mod common;

use fractal_cuntz::ifs::Word;
use fractal_cuntz::opspace::CylinderSpace;
use fractal_cuntz::word_algebra::{parse, wa_adjoint, wa_apply, wa_multiply, CuntzPolynomial, CuntzTerm};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn apply_agrees_with_matrix_composition(seed in any::<u64>(), n in 2usize..4) {
        let sp = CylinderSpace::new(n);
        let mut rng = common::rng(seed);
        let p = common::random_polynomial(&mut rng, n, 3, 5);
        let v = common::random_vector(&mut rng, n, 3);
        let got = wa_apply(&sp, &p, &v).unwrap();
        let expected = common::reference_apply(&sp, &p, &v);
        prop_assert!(common::max_diff(&sp, &got, &expected) <= 1e-12);
    }

    #[test]
    fn multiply_is_composition(seed in any::<u64>(), n in 2usize..4) {
        let sp = CylinderSpace::new(n);
        let mut rng = common::rng(seed);
        let p = common::random_polynomial(&mut rng, n, 3, 4);
        let q = common::random_polynomial(&mut rng, n, 3, 4);
        let v = common::random_vector(&mut rng, n, 3);
        let lhs = wa_apply(&sp, &wa_multiply(&p, &q), &v).unwrap();
        let rhs = wa_apply(&sp, &p, &wa_apply(&sp, &q, &v).unwrap()).unwrap();
        prop_assert!(common::max_diff(&sp, &lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn adjoint_is_compatible(seed in any::<u64>(), n in 2usize..4) {
        let sp = CylinderSpace::new(n);
        let mut rng = common::rng(seed);
        let p = common::random_polynomial(&mut rng, n, 3, 5);
        let u = common::random_vector(&mut rng, n, 3);
        let w = common::random_vector(&mut rng, n, 6);
        let pu = wa_apply(&sp, &p, &u).unwrap();
        let lhs = sp.inner(&sp.refine_to(&pu, 6).unwrap(), &w).unwrap();
        let paw = wa_apply(&sp, &wa_adjoint(&p), &w).unwrap();
        let rhs = sp.inner(&sp.refine_to(&u, paw.level()).unwrap(), &sp.refine_to(&paw, u.level()).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn normal_form_is_canonical(seed in any::<u64>(), n in 2usize..4) {
        let mut rng = common::rng(seed);
        let p = common::random_polynomial(&mut rng, n, 3, 4);
        let q = common::random_polynomial(&mut rng, n, 3, 4);
        let r = common::random_polynomial(&mut rng, n, 2, 3);
        prop_assert_eq!(p.normalize().normalize(), p.normalize());
        let left = wa_multiply(&wa_multiply(&p, &q), &r);
        let right = wa_multiply(&p, &wa_multiply(&q, &r));
        prop_assert!(close(&left, &right));
        let mut terms: Vec<CuntzTerm> = p.terms().collect();
        terms.shuffle(&mut rng);
        prop_assert_eq!(CuntzPolynomial::from_terms(n, terms), p.clone());
        // Distributing over the terms of q in random order gives the same product.
        let mut qt: Vec<CuntzTerm> = q.terms().collect();
        qt.shuffle(&mut rng);
        let mut acc = CuntzPolynomial::zero(n);
        for t in qt {
            acc = acc.add(&wa_multiply(&p, &CuntzPolynomial::from_terms(n, [t])));
        }
        prop_assert!(close(&acc, &wa_multiply(&p, &q)));
    }

    #[test]
    fn print_parse_round_trip(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = common::rng(seed);
        let p = common::random_polynomial(&mut rng, n, 3, 5);
        let back = parse(&p.to_string(), n).unwrap();
        prop_assert!(close(&back, &p));
        prop_assert_eq!(parse(&back.to_string(), n).unwrap(), back);
    }

    #[test]
    fn word_projections(seed in any::<u64>(), n in 2usize..4, k in 0usize..4) {
        let sp = CylinderSpace::new(n);
        let mut rng = common::rng(seed);
        let w = common::random_word(&mut rng, n, k);
        let proj = CuntzPolynomial::monomial(n, Complex64::new(1.0, 0.0), w.clone(), w.clone());
        let v = common::random_vector(&mut rng, n, 4);
        let pv = wa_apply(&sp, &proj, &v).unwrap();
        prop_assert_eq!(pv.level(), 4);
        for (word, (a, b)) in Word::all(n, 4).zip(pv.coeffs().iter().zip(v.coeffs())) {
            let expect = if w.is_prefix_of(&word) { *b } else { Complex64::new(0.0, 0.0) };
            prop_assert!((a - expect).norm() <= 1e-13);
        }
        let ppv = wa_apply(&sp, &proj, &pv).unwrap();
        prop_assert!(ppv.max_abs_diff(&pv) <= 1e-13);
        let u = common::random_vector(&mut rng, n, 4);
        let lhs = sp.inner(&pv, &u).unwrap();
        let rhs = sp.inner(&v, &wa_apply(&sp, &proj, &u).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-13 * (1.0 + lhs.norm()));
    }
}

/// Same support and coefficients to floating tolerance.
fn close(a: &CuntzPolynomial, b: &CuntzPolynomial) -> bool {
    let diff = a.sub(b);
    let ok = diff.terms().all(|t| t.coeff.norm() <= 1e-12);
    ok
}
