//! Cuntz-word approximation of multiplication operators.
//!
//! For a level `k` and base point `x₀`, the approximant of `M_a` is
//! `A_k = Σ_{|ω|=k} a(γ_ω(x₀)) V_ω V_ω*`. Its distance to `M_a` equals
//! `max_ω sup |a∘γ_ω − a(γ_ω(x₀))|`, reported here three ways:
//! a sampled supremum, the norm of the level-`m` diagonal difference
//! (a lower bound), and the Lipschitz or modulus bound (an upper bound).

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ifs::{IfsError, IfsSystem, Word};
use crate::opspace::{mult_operator, CellRule, Collocation, CylinderSpace, LevelOperator, OpError};
use crate::word_algebra::CuntzPolynomial;

pub const DEFAULT_SAMPLES_PER_CELL: usize = 256;
/// Extra refinement levels used by [`convergence_report`] for `matrix_error`.
pub const DEFAULT_MATRIX_EXTRA_LEVELS: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApproxError {
    #[error("function has neither a Lipschitz constant nor a modulus of continuity")]
    MissingContinuityData,
    #[error("base point lies outside the ambient box")]
    BaseOutsideBox,
    #[error("matrix level {m} is below the approximant level {k}")]
    LevelBelowApproximant { m: usize, k: usize },
    #[error("invalid level range {0}..={1}")]
    InvalidRange(usize, usize),
    #[error("difference quotient {observed} exceeds declared Lipschitz constant {declared}")]
    LipschitzViolated { observed: f64, declared: f64 },
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Ifs(#[from] IfsError),
}

type Evaluator = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;
type Modulus = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A continuous multiplier with optional continuity data.
#[derive(Clone)]
pub struct ContinuousFunctionSpec {
    evaluator: Evaluator,
    lipschitz: Option<f64>,
    modulus: Option<Modulus>,
}

impl std::fmt::Debug for ContinuousFunctionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContinuousFunctionSpec")
            .field("lipschitz", &self.lipschitz)
            .field("modulus", &self.modulus.is_some())
            .finish()
    }
}

impl ContinuousFunctionSpec {
    pub fn new(f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        Self {
            evaluator: Arc::new(f),
            lipschitz: None,
            modulus: None,
        }
    }

    pub fn real(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(move |x| Complex64::new(f(x), 0.0))
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(move |_| c).with_lipschitz(0.0)
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_modulus(mut self, m: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.modulus = Some(Arc::new(m));
        self
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        (self.evaluator)(x)
    }

    /// Plain closure view for the operator-space routines.
    pub fn as_fn(&self) -> impl Fn(&[f64]) -> Complex64 + '_ {
        move |x| (self.evaluator)(x)
    }

    /// Samples `pairs` random point pairs in the box and checks every
    /// difference quotient against `L·(1 + 1e-6)`.
    pub fn check_lipschitz(&self, ifs: &IfsSystem, pairs: usize, seed: u64) -> Result<f64, ApproxError> {
        let Some(l) = self.lipschitz else {
            return Err(ApproxError::MissingContinuityData);
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let x = uniform_point(ifs, &mut rng);
            let y = uniform_point(ifs, &mut rng);
            let dist = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist > 0.0 {
                worst = worst.max((self.eval(&x) - self.eval(&y)).norm() / dist);
            }
        }
        if worst > l * (1.0 + 1e-6) {
            return Err(ApproxError::LipschitzViolated {
                observed: worst,
                declared: l,
            });
        }
        Ok(worst)
    }
}

fn uniform_point(ifs: &IfsSystem, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let b = ifs.ambient_box();
    b.lo
        .iter()
        .zip(&b.hi)
        .map(|(l, h)| l + (h - l) * rng.random::<f64>())
        .collect()
}

/// Level-`k` coefficient family `c_ω = a(γ_ω(x₀))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CuntzApproximant {
    n: usize,
    level: usize,
    base_point: Vec<f64>,
    coeffs: Vec<Complex64>,
}

impl CuntzApproximant {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    /// Coefficients in word rank order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, word: &Word) -> Complex64 {
        self.coeffs[word.rank(self.n)]
    }

    /// `Σ c_ω S_ω S_ω*`.
    pub fn to_polynomial(&self) -> CuntzPolynomial {
        CuntzPolynomial::from_terms(
            self.n,
            Word::all(self.n, self.level)
                .zip(&self.coeffs)
                .map(|(w, c)| crate::word_algebra::CuntzTerm {
                    coeff: *c,
                    alpha: w.clone(),
                    beta: w,
                }),
        )
    }

    /// The approximant as a diagonal operator on `H_m`, `m ≥ k`.
    pub fn diagonal_operator(&self, space: &CylinderSpace, m: usize) -> Result<LevelOperator, ApproxError> {
        if m < self.level {
            return Err(ApproxError::LevelBelowApproximant { m, k: self.level });
        }
        let dim = space.dim(m)?;
        let spread = dim / self.coeffs.len();
        let entries = (0..dim).map(|r| self.coeffs[r / spread]).collect();
        Ok(LevelOperator::diagonal(self.n, m, entries))
    }
}

pub fn build_approximant(
    ifs: &IfsSystem,
    a: &ContinuousFunctionSpec,
    k: usize,
    x0: &[f64],
) -> Result<CuntzApproximant, ApproxError> {
    CylinderSpace::new(ifs.n()).dim(k)?;
    if x0.len() != ifs.dim() || !ifs.ambient_box().contains(x0, 0.0) {
        return Err(ApproxError::BaseOutsideBox);
    }
    let coeffs = ifs.word_points(k, x0)?.iter().map(|p| a.eval(p)).collect();
    Ok(CuntzApproximant {
        n: ifs.n(),
        level: k,
        base_point: x0.to_vec(),
        coeffs,
    })
}

/// `max_ω max_x |a(γ_ω(x)) − c_ω|` over the box vertices plus
/// `samples_per_cell` seeded uniform points of the ambient box.
pub fn error_sup(
    ifs: &IfsSystem,
    a: &ContinuousFunctionSpec,
    appr: &CuntzApproximant,
    samples_per_cell: usize,
    seed: u64,
) -> Result<f64, ApproxError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = ifs.ambient_box().vertices();
    probes.extend((0..samples_per_cell).map(|_| uniform_point(ifs, &mut rng)));
    let mut worst: f64 = 0.0;
    for (w, c) in Word::all(ifs.n(), appr.level).zip(&appr.coeffs) {
        let g = ifs.compose_word(&w)?;
        for x in &probes {
            worst = worst.max((a.eval(&g.apply(x)) - c).norm());
        }
    }
    Ok(worst)
}

/// `L·c₂^k·diam`, or `modulus(c₂^k·diam)`; the smaller when both are known.
pub fn certified_bound(a: &ContinuousFunctionSpec, ifs: &IfsSystem, k: usize) -> Result<f64, ApproxError> {
    let delta = ifs.cylinder_diameter_bound(k);
    let lip = a.lipschitz.map(|l| l * delta);
    let modulus = a.modulus.as_ref().map(|m| m(delta));
    match (lip, modulus) {
        (Some(x), Some(y)) => Ok(x.min(y)),
        (Some(x), None) | (None, Some(x)) => Ok(x),
        (None, None) => Err(ApproxError::MissingContinuityData),
    }
}

/// `‖M_a^{(m)} − A_k‖` on `H_m` for the given cell rule.
pub fn matrix_error(
    ifs: &IfsSystem,
    a: &ContinuousFunctionSpec,
    appr: &CuntzApproximant,
    m: usize,
    rule: &dyn CellRule,
) -> Result<f64, ApproxError> {
    if m < appr.level {
        return Err(ApproxError::LevelBelowApproximant { m, k: appr.level });
    }
    let space = CylinderSpace::new(ifs.n());
    let f = a.as_fn();
    let ma = mult_operator(&space, ifs, &f, m, rule)?;
    Ok(ma.sub(&appr.diagonal_operator(&space, m)?)?.op_norm())
}

/// One line of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub k: usize,
    pub error_sup: f64,
    pub matrix_error: f64,
    pub matrix_level: usize,
    pub certified_bound: f64,
    /// `error_sup(k) / error_sup(k−1)`; undefined on the first row or after a zero.
    pub decay_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSettings {
    pub samples_per_cell: usize,
    pub seed: u64,
    pub extra_levels: usize,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self {
            samples_per_cell: DEFAULT_SAMPLES_PER_CELL,
            seed: 0,
            extra_levels: DEFAULT_MATRIX_EXTRA_LEVELS,
        }
    }
}

/// Error columns for every `k` in `k_min..=k_max`. `matrix_error` is taken at
/// level `k + extra_levels` in collocation mode with the same `x₀`, capped by
/// the size budget.
pub fn convergence_report(
    ifs: &IfsSystem,
    a: &ContinuousFunctionSpec,
    k_min: usize,
    k_max: usize,
    x0: &[f64],
    settings: &ReportSettings,
) -> Result<Vec<ReportRow>, ApproxError> {
    if k_min > k_max {
        return Err(ApproxError::InvalidRange(k_min, k_max));
    }
    let space = CylinderSpace::new(ifs.n());
    let rule = Collocation { x0: x0.to_vec() };
    let mut rows: Vec<ReportRow> = Vec::with_capacity(k_max - k_min + 1);
    for k in k_min..=k_max {
        let appr = build_approximant(ifs, a, k, x0)?;
        let err = error_sup(ifs, a, &appr, settings.samples_per_cell, settings.seed)?;
        let mut m = k + settings.extra_levels;
        while m > k && space.dim(m).is_err() {
            m -= 1;
        }
        let mat = matrix_error(ifs, a, &appr, m, &rule)?;
        let bound = certified_bound(a, ifs, k)?;
        let decay_ratio = rows
            .last()
            .and_then(|prev| (prev.error_sup > 0.0).then(|| err / prev.error_sup));
        rows.push(ReportRow {
            k,
            error_sup: err,
            matrix_error: mat,
            matrix_level: m,
            certified_bound: bound,
            decay_ratio,
        });
    }
    Ok(rows)
}
