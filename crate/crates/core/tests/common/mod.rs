#![allow(dead_code)]

use fractal_cuntz::approx::ContinuousFunctionSpec;
use fractal_cuntz::expr::parse_expr;
use fractal_cuntz::ifs::{BoxRegion, Word};
use fractal_cuntz::opspace::{CylinderSpace, LevelOperator, LeveledVector};
use fractal_cuntz::word_algebra::{CuntzPolynomial, CuntzTerm};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_word(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Word {
    Word::new((0..len).map(|_| rng.random_range(1..=n)).collect())
}

/// Up to `max_terms` terms with `|α|, |β| ≤ max_degree`.
pub fn random_polynomial(rng: &mut ChaCha8Rng, n: usize, max_degree: usize, max_terms: usize) -> CuntzPolynomial {
    let count = rng.random_range(1..=max_terms);
    let terms: Vec<CuntzTerm> = (0..count)
        .map(|_| {
            let la = rng.random_range(0..=max_degree);
            let lb = rng.random_range(0..=max_degree);
            CuntzTerm {
                coeff: random_complex(rng),
                alpha: random_word(rng, n, la),
                beta: random_word(rng, n, lb),
            }
        })
        .collect();
    CuntzPolynomial::from_terms(n, terms)
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, level: usize) -> LeveledVector {
    let dim = n.pow(level as u32);
    LeveledVector::new(n, level, (0..dim).map(|_| random_complex(rng)).collect()).unwrap()
}

pub fn add_vectors(space: &CylinderSpace, a: &LeveledVector, b: &LeveledVector) -> LeveledVector {
    let level = a.level().max(b.level());
    let a = space.refine_to(a, level).unwrap();
    let b = space.refine_to(b, level).unwrap();
    let coeffs = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| x + y).collect();
    LeveledVector::new(a.n(), level, coeffs).unwrap()
}

/// Applies `p` by composing the explicit `Vᵢ` / `Vᵢ*` matrices term by term.
pub fn reference_apply(space: &CylinderSpace, p: &CuntzPolynomial, v: &LeveledVector) -> LeveledVector {
    let n = space.n();
    let start = v.level().max(p.max_beta_len());
    let v = space.refine_to(v, start).unwrap();
    let mut acc = LeveledVector::zeros(n, 0);
    for t in p.terms() {
        let mut op: LevelOperator = space.identity_operator(start).unwrap();
        let mut level = start;
        for &b in t.beta.letters() {
            op = space.coisometry_operator(b, level).unwrap().compose(&op).unwrap();
            level -= 1;
        }
        for &a in t.alpha.letters().iter().rev() {
            op = space.isometry_operator(a, level).unwrap().compose(&op).unwrap();
            level += 1;
        }
        let term = op.apply(&v).unwrap().scale(t.coeff);
        acc = add_vectors(space, &acc, &term);
    }
    acc
}

pub fn max_diff(space: &CylinderSpace, a: &LeveledVector, b: &LeveledVector) -> f64 {
    let level = a.level().max(b.level());
    let a = space.refine_to(a, level).unwrap();
    let b = space.refine_to(b, level).unwrap();
    a.max_abs_diff(&b)
}

/// Random real polynomial `Σ c_j x^j` of degree ≤ 4 in one variable.
pub fn random_real_polynomial(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let deg = rng.random_range(0..=4);
    (0..=deg).map(|_| rng.random_range(-2.0..2.0)).collect()
}

pub fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Random Lipschitz function on `dom` drawn from a small expression family,
/// with its interval-derived Lipschitz constant.
pub fn random_lipschitz(rng: &mut ChaCha8Rng, dom: &BoxRegion) -> (String, ContinuousFunctionSpec) {
    let a: f64 = rng.random_range(0.5..3.0);
    let b: f64 = rng.random_range(-1.0..1.0);
    let cc: f64 = rng.random_range(0.0..1.0);
    let src = match rng.random_range(0..5) {
        0 => format!("sin({a}*x + {b})"),
        1 => format!("abs(x - {cc})"),
        2 => format!("{b}*x^3 + {a}*x^2 - x"),
        3 => format!("exp({b}*x) * cos({a}*x)"),
        _ => format!("x / (1 + {cc}*x^2)"),
    };
    let expr = parse_expr(&src, dom.dim()).unwrap();
    let l = expr.lipschitz_bound(dom).unwrap();
    let spec = ContinuousFunctionSpec::real(move |x| expr.eval(x)).with_lipschitz(l);
    (src, spec)
}
