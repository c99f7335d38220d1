//! Finite-level model of `L²(K, μ^H)` in cylinder coordinates.
//!
//! A vector at level `k` is a coefficient array over the `n^k` words of
//! length `k` in lexicographic order, in the orthonormal basis
//! `e_ω = n^{k/2} 1_{γ_ω(K)}`. The levels are nested by [`CylinderSpace::refine`],
//! and the isometries `Vᵢ` shift between neighbouring levels, so the Cuntz
//! relations hold exactly rather than up to a truncation error.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::ifs::{IfsError, IfsSystem, Word};
use crate::measure::{chaos_game, MeasureError, SelfSimilarWeights, DEFAULT_BURN_IN};

/// Default cap on coefficients per level.
pub const DEFAULT_MAX_COEFFS: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpError {
    #[error("level {level} needs {n}^{level} coefficients, over the budget of {budget}")]
    LevelOverflow { n: usize, level: usize, budget: usize },
    #[error("level {level} is too low for this operation (refinement disabled or no words of positive length)")]
    LevelUnderflow { level: usize },
    #[error("coefficient vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("alphabet size mismatch: {left} vs {right}")]
    ArityMismatch { left: usize, right: usize },
    #[error("branch {branch} out of range 1..={n}")]
    BranchOutOfRange { branch: usize, n: usize },
    #[error("operator shapes do not match: {0}")]
    Shape(String),
    #[error(transparent)]
    Ifs(#[from] IfsError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Whether operations may refine their input to reach a needed level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinePolicy {
    Auto,
    Disabled,
}

/// Element of the level-`k` cylinder subspace `H_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeveledVector {
    n: usize,
    level: usize,
    coeffs: Vec<Complex64>,
}

impl LeveledVector {
    pub fn new(n: usize, level: usize, coeffs: Vec<Complex64>) -> Result<Self, OpError> {
        let expected = n.checked_pow(level as u32).ok_or(OpError::LevelOverflow {
            n,
            level,
            budget: usize::MAX,
        })?;
        if coeffs.len() != expected {
            return Err(OpError::LengthMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self { n, level, coeffs })
    }

    pub fn zeros(n: usize, level: usize) -> Self {
        Self {
            n,
            level,
            coeffs: vec![Complex64::new(0.0, 0.0); n.pow(level as u32)],
        }
    }

    /// Basis vector `e_ω`.
    pub fn basis(n: usize, word: &Word) -> Self {
        let mut v = Self::zeros(n, word.len());
        v.coeffs[word.rank(n)] = Complex64::new(1.0, 0.0);
        v
    }

    /// The constant function `c`, at level 0.
    pub fn constant(n: usize, c: Complex64) -> Self {
        Self {
            n,
            level: 0,
            coeffs: vec![c],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, word: &Word) -> Complex64 {
        self.coeffs[word.rank(self.n)]
    }

    pub fn norm(&self) -> f64 {
        compensated_sum(self.coeffs.iter().map(|c| c.norm_sqr())).sqrt()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            n: self.n,
            level: self.level,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Largest coefficient-wise distance to a vector on the same level.
    pub fn max_abs_diff(&self, other: &LeveledVector) -> f64 {
        assert_eq!(self.level, other.level, "levels differ");
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn add_assign(&mut self, other: &LeveledVector) {
        debug_assert_eq!(self.level, other.level);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }
}

/// The ambient model: alphabet size, size budget and refinement policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CylinderSpace {
    n: usize,
    max_coeffs: usize,
    policy: RefinePolicy,
}

impl CylinderSpace {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            max_coeffs: DEFAULT_MAX_COEFFS,
            policy: RefinePolicy::Auto,
        }
    }

    pub fn with_budget(mut self, max_coeffs: usize) -> Self {
        self.max_coeffs = max_coeffs;
        self
    }

    pub fn with_policy(mut self, policy: RefinePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn policy(&self) -> RefinePolicy {
        self.policy
    }

    /// `n^level`, or `LevelOverflow` past the budget.
    pub fn dim(&self, level: usize) -> Result<usize, OpError> {
        match self.n.checked_pow(level as u32) {
            Some(d) if d <= self.max_coeffs => Ok(d),
            _ => Err(OpError::LevelOverflow {
                n: self.n,
                level,
                budget: self.max_coeffs,
            }),
        }
    }

    fn check_vec(&self, v: &LeveledVector) -> Result<(), OpError> {
        if v.n != self.n {
            return Err(OpError::ArityMismatch {
                left: self.n,
                right: v.n,
            });
        }
        Ok(())
    }

    fn check_branch(&self, i: usize) -> Result<(), OpError> {
        if i == 0 || i > self.n {
            return Err(OpError::BranchOutOfRange {
                branch: i,
                n: self.n,
            });
        }
        Ok(())
    }

    /// Re-expresses `v` at level `k + steps`: every coefficient spreads to its
    /// `n` children scaled by `n^{-1/2}` per step.
    pub fn refine(&self, v: &LeveledVector, steps: usize) -> Result<LeveledVector, OpError> {
        self.check_vec(v)?;
        if steps == 0 {
            return Ok(v.clone());
        }
        let target = v.level + steps;
        self.dim(target)?;
        let n = self.n;
        let block = n.pow(steps as u32);
        let s = (block as f64).recip().sqrt();
        let mut coeffs = Vec::with_capacity(v.coeffs.len() * block);
        for c in &v.coeffs {
            let child = c * s;
            coeffs.extend(std::iter::repeat_n(child, block));
        }
        Ok(LeveledVector {
            n,
            level: target,
            coeffs,
        })
    }

    /// Refines to `level` if `v` is coarser; never coarsens.
    pub fn refine_to(&self, v: &LeveledVector, level: usize) -> Result<LeveledVector, OpError> {
        self.refine(v, level.saturating_sub(v.level))
    }

    /// `⟨a, b⟩ = Σ a_ω conj(b_ω)` at the common finer level.
    pub fn inner(&self, a: &LeveledVector, b: &LeveledVector) -> Result<Complex64, OpError> {
        let level = a.level.max(b.level);
        let a = self.refine_to(a, level)?;
        let b = self.refine_to(b, level)?;
        let prods: Vec<Complex64> = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y.conj()).collect();
        Ok(Complex64::new(
            compensated_sum(prods.iter().map(|c| c.re)),
            compensated_sum(prods.iter().map(|c| c.im)),
        ))
    }

    /// `Vᵢ e_ω = e_{iω}`: level `k` to `k + 1`, supported on the `i`-block.
    pub fn apply_isometry(&self, i: usize, v: &LeveledVector) -> Result<LeveledVector, OpError> {
        self.check_vec(v)?;
        self.check_branch(i)?;
        let out_dim = self.dim(v.level + 1)?;
        let len = v.coeffs.len();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); out_dim];
        coeffs[(i - 1) * len..i * len].copy_from_slice(&v.coeffs);
        Ok(LeveledVector {
            n: self.n,
            level: v.level + 1,
            coeffs,
        })
    }

    /// `Vᵢ* e_{iω} = e_ω`, `Vᵢ* e_{jω} = 0` for `j ≠ i`: level `k` to `k − 1`.
    /// A level-0 input is refined once under [`RefinePolicy::Auto`].
    pub fn apply_coisometry(&self, i: usize, v: &LeveledVector) -> Result<LeveledVector, OpError> {
        self.check_vec(v)?;
        self.check_branch(i)?;
        let v = if v.level == 0 {
            match self.policy {
                RefinePolicy::Auto => self.refine(v, 1)?,
                RefinePolicy::Disabled => return Err(OpError::LevelUnderflow { level: 0 }),
            }
        } else {
            v.clone()
        };
        let len = v.coeffs.len() / self.n;
        Ok(LeveledVector {
            n: self.n,
            level: v.level - 1,
            coeffs: v.coeffs[(i - 1) * len..i * len].to_vec(),
        })
    }

    /// `C_{γᵢ} v = √n · Vᵢ* v`.
    pub fn composition_operator(&self, i: usize, v: &LeveledVector) -> Result<LeveledVector, OpError> {
        let w = self.apply_coisometry(i, v)?;
        Ok(w.scale(Complex64::new((self.n as f64).sqrt(), 0.0)))
    }

    /// `Vᵢ` as an operator `H_k → H_{k+1}`.
    pub fn isometry_operator(&self, i: usize, k: usize) -> Result<LevelOperator, OpError> {
        self.check_branch(i)?;
        let dom = self.dim(k)?;
        self.dim(k + 1)?;
        let columns = (0..dom)
            .map(|r| vec![((i - 1) * dom + r, Complex64::new(1.0, 0.0))])
            .collect();
        Ok(LevelOperator::sparse(self.n, k, k + 1, columns))
    }

    /// `Vᵢ*` as an operator `H_k → H_{k−1}`, `k ≥ 1`.
    pub fn coisometry_operator(&self, i: usize, k: usize) -> Result<LevelOperator, OpError> {
        self.check_branch(i)?;
        if k == 0 {
            return Err(OpError::LevelUnderflow { level: 0 });
        }
        let dom = self.dim(k)?;
        let block = dom / self.n;
        let columns = (0..dom)
            .map(|r| {
                if r / block == i - 1 {
                    vec![(r - (i - 1) * block, Complex64::new(1.0, 0.0))]
                } else {
                    Vec::new()
                }
            })
            .collect();
        Ok(LevelOperator::sparse(self.n, k, k - 1, columns))
    }

    pub fn identity_operator(&self, k: usize) -> Result<LevelOperator, OpError> {
        let dim = self.dim(k)?;
        Ok(LevelOperator::diagonal(
            self.n,
            k,
            vec![Complex64::new(1.0, 0.0); dim],
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Diagonal(Vec<Complex64>),
    /// Column-major sparse storage: `columns[c]` lists `(row, value)`.
    Sparse(Vec<Vec<(usize, Complex64)>>),
    Dense(DMatrix<Complex64>),
}

/// Linear map `H_k → H_{k′}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOperator {
    n: usize,
    domain_level: usize,
    codomain_level: usize,
    repr: Repr,
}

impl LevelOperator {
    pub fn diagonal(n: usize, level: usize, entries: Vec<Complex64>) -> Self {
        Self {
            n,
            domain_level: level,
            codomain_level: level,
            repr: Repr::Diagonal(entries),
        }
    }

    pub fn sparse(
        n: usize,
        domain_level: usize,
        codomain_level: usize,
        columns: Vec<Vec<(usize, Complex64)>>,
    ) -> Self {
        Self {
            n,
            domain_level,
            codomain_level,
            repr: Repr::Sparse(columns),
        }
    }

    pub fn dense(
        n: usize,
        domain_level: usize,
        codomain_level: usize,
        matrix: DMatrix<Complex64>,
    ) -> Result<Self, OpError> {
        let rows = n.pow(codomain_level as u32);
        let cols = n.pow(domain_level as u32);
        if matrix.shape() != (rows, cols) {
            return Err(OpError::Shape(format!(
                "matrix is {:?}, levels need ({rows}, {cols})",
                matrix.shape()
            )));
        }
        Ok(Self {
            n,
            domain_level,
            codomain_level,
            repr: Repr::Dense(matrix),
        })
    }

    pub fn domain_level(&self) -> usize {
        self.domain_level
    }

    pub fn codomain_level(&self) -> usize {
        self.codomain_level
    }

    pub fn rows(&self) -> usize {
        self.n.pow(self.codomain_level as u32)
    }

    pub fn cols(&self) -> usize {
        self.n.pow(self.domain_level as u32)
    }

    /// Diagonal entries, if stored as a diagonal.
    pub fn diagonal_entries(&self) -> Option<&[Complex64]> {
        match &self.repr {
            Repr::Diagonal(d) => Some(d),
            _ => None,
        }
    }

    fn columns(&self) -> Vec<Vec<(usize, Complex64)>> {
        match &self.repr {
            Repr::Diagonal(d) => d.iter().enumerate().map(|(r, v)| vec![(r, *v)]).collect(),
            Repr::Sparse(c) => c.clone(),
            Repr::Dense(m) => (0..m.ncols())
                .map(|c| {
                    (0..m.nrows())
                        .filter(|&r| m[(r, c)] != Complex64::new(0.0, 0.0))
                        .map(|r| (r, m[(r, c)]))
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            _ => {
                let mut m = DMatrix::zeros(self.rows(), self.cols());
                for (c, col) in self.columns().into_iter().enumerate() {
                    for (r, v) in col {
                        m[(r, c)] += v;
                    }
                }
                m
            }
        }
    }

    pub fn apply(&self, v: &LeveledVector) -> Result<LeveledVector, OpError> {
        if v.level != self.domain_level || v.n != self.n {
            return Err(OpError::Shape(format!(
                "operator domain is level {}, vector is level {}",
                self.domain_level, v.level
            )));
        }
        let mut out = LeveledVector::zeros(self.n, self.codomain_level);
        match &self.repr {
            Repr::Diagonal(d) => {
                for ((o, x), s) in out.coeffs.iter_mut().zip(&v.coeffs).zip(d) {
                    *o = s * x;
                }
            }
            Repr::Sparse(cols) => {
                for (x, col) in v.coeffs.iter().zip(cols) {
                    for (r, val) in col {
                        out.coeffs[*r] += val * x;
                    }
                }
            }
            Repr::Dense(m) => {
                for r in 0..m.nrows() {
                    out.coeffs[r] = (0..m.ncols()).map(|c| m[(r, c)] * v.coeffs[c]).sum();
                }
            }
        }
        Ok(out)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &LevelOperator) -> Result<LevelOperator, OpError> {
        if inner.codomain_level != self.domain_level || inner.n != self.n {
            return Err(OpError::Shape(format!(
                "cannot compose H_{} -> H_{} after H_{} -> H_{}",
                self.domain_level, self.codomain_level, inner.domain_level, inner.codomain_level
            )));
        }
        if let (Repr::Diagonal(a), Repr::Diagonal(b)) = (&self.repr, &inner.repr) {
            let d = a.iter().zip(b).map(|(x, y)| x * y).collect();
            return Ok(LevelOperator::diagonal(self.n, self.domain_level, d));
        }
        let outer = self.columns();
        let columns = inner
            .columns()
            .into_iter()
            .map(|col| {
                let mut acc: Vec<(usize, Complex64)> = Vec::new();
                for (mid, v) in col {
                    for (r, w) in &outer[mid] {
                        acc.push((*r, w * v));
                    }
                }
                merge_column(acc)
            })
            .collect();
        Ok(LevelOperator::sparse(
            self.n,
            inner.domain_level,
            self.codomain_level,
            columns,
        ))
    }

    fn combine(&self, other: &LevelOperator, sign: f64) -> Result<LevelOperator, OpError> {
        if self.domain_level != other.domain_level
            || self.codomain_level != other.codomain_level
            || self.n != other.n
        {
            return Err(OpError::Shape("operands act between different levels".into()));
        }
        if let (Repr::Diagonal(a), Repr::Diagonal(b)) = (&self.repr, &other.repr) {
            let d = a.iter().zip(b).map(|(x, y)| x + y * sign).collect();
            return Ok(LevelOperator::diagonal(self.n, self.domain_level, d));
        }
        let columns = self
            .columns()
            .into_iter()
            .zip(other.columns())
            .map(|(mut a, b)| {
                a.extend(b.into_iter().map(|(r, v)| (r, v * sign)));
                merge_column(a)
            })
            .collect();
        Ok(LevelOperator::sparse(
            self.n,
            self.domain_level,
            self.codomain_level,
            columns,
        ))
    }

    pub fn add(&self, other: &LevelOperator) -> Result<LevelOperator, OpError> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &LevelOperator) -> Result<LevelOperator, OpError> {
        self.combine(other, -1.0)
    }

    pub fn adjoint(&self) -> LevelOperator {
        let repr = match &self.repr {
            Repr::Diagonal(d) => Repr::Diagonal(d.iter().map(|v| v.conj()).collect()),
            Repr::Dense(m) => Repr::Dense(m.adjoint()),
            Repr::Sparse(_) => {
                let mut cols = vec![Vec::new(); self.rows()];
                for (c, col) in self.columns().into_iter().enumerate() {
                    for (r, v) in col {
                        cols[r].push((c, v.conj()));
                    }
                }
                Repr::Sparse(cols)
            }
        };
        LevelOperator {
            n: self.n,
            domain_level: self.codomain_level,
            codomain_level: self.domain_level,
            repr,
        }
    }

    /// Spectral norm. Exact (largest entry modulus) for diagonal and
    /// monomial matrices, dense SVD up to 2048 columns, power iteration beyond.
    pub fn op_norm(&self) -> f64 {
        if let Repr::Diagonal(d) = &self.repr {
            return d.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        let cols = self.columns();
        let mut row_hits = vec![0u8; self.rows()];
        let mut monomial = true;
        for col in &cols {
            if col.len() > 1 {
                monomial = false;
                break;
            }
            for (r, _) in col {
                row_hits[*r] += 1;
                if row_hits[*r] > 1 {
                    monomial = false;
                }
            }
        }
        if monomial {
            return cols
                .iter()
                .flatten()
                .map(|(_, v)| v.norm())
                .fold(0.0, f64::max);
        }
        if self.rows().min(self.cols()) <= 2048 {
            return self
                .to_dense()
                .singular_values()
                .iter()
                .copied()
                .fold(0.0, f64::max);
        }
        power_iteration_norm(self, &cols)
    }
}

fn merge_column(mut entries: Vec<(usize, Complex64)>) -> Vec<(usize, Complex64)> {
    entries.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, Complex64)> = Vec::with_capacity(entries.len());
    for (r, v) in entries {
        match out.last_mut() {
            Some(last) if last.0 == r => last.1 += v,
            _ => out.push((r, v)),
        }
    }
    out.retain(|(_, v)| *v != Complex64::new(0.0, 0.0));
    out
}

fn power_iteration_norm(op: &LevelOperator, cols: &[Vec<(usize, Complex64)>]) -> f64 {
    let mut x: Vec<Complex64> = (0..op.cols())
        .map(|c| Complex64::new(1.0 + (c % 7) as f64 * 1e-3, 0.0))
        .collect();
    let mut estimate = 0.0;
    for _ in 0..500 {
        let mut y = vec![Complex64::new(0.0, 0.0); op.rows()];
        for (xc, col) in x.iter().zip(cols) {
            for (r, v) in col {
                y[*r] += v * xc;
            }
        }
        let z: Vec<Complex64> = cols
            .iter()
            .map(|col| col.iter().map(|(r, v)| v.conj() * y[*r]).sum())
            .collect();
        let norm = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm.sqrt();
        x = z.into_iter().map(|v| v / norm).collect();
        if (next - estimate).abs() <= 1e-15 * next {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// How a multiplier is sampled on a cylinder cell.
pub trait CellRule {
    fn cell_value(&self, ifs: &IfsSystem, a: &dyn Fn(&[f64]) -> Complex64, word: &Word) -> Complex64;
}

/// `a(γ_ω(x₀))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Collocation {
    pub x0: Vec<f64>,
}

impl CellRule for Collocation {
    fn cell_value(&self, ifs: &IfsSystem, a: &dyn Fn(&[f64]) -> Complex64, word: &Word) -> Complex64 {
        a(&ifs.word_point_unchecked(word.letters(), &self.x0))
    }
}

/// Monte-Carlo cell average: the conditional law of `μ^H` on `[ω]` is the
/// pushforward of `μ^H` under `γ_ω`, so one reference sample serves every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAverage {
    reference: Vec<Vec<f64>>,
}

impl CellAverage {
    pub fn new(reference: Vec<Vec<f64>>) -> Self {
        Self { reference }
    }

    /// Reference sample from a Hutchinson chaos game.
    pub fn sample(ifs: &IfsSystem, count: usize, seed: u64) -> Result<Self, OpError> {
        let m = chaos_game(
            ifs,
            &SelfSimilarWeights::hutchinson(ifs.n()),
            count,
            DEFAULT_BURN_IN,
            seed,
        )?;
        Ok(Self::new(m.points().to_vec()))
    }
}

impl CellRule for CellAverage {
    fn cell_value(&self, ifs: &IfsSystem, a: &dyn Fn(&[f64]) -> Complex64, word: &Word) -> Complex64 {
        let sum: Complex64 = self
            .reference
            .iter()
            .map(|y| a(&ifs.word_point_unchecked(word.letters(), y)))
            .sum();
        sum / self.reference.len() as f64
    }
}

/// Neumaier summation; long inner products otherwise drift by more than
/// the refinement identities tolerate.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Configurable choice between the two built-in cell rules.
#[derive(Debug, Clone, PartialEq)]
pub enum MultMode {
    Collocation { x0: Vec<f64> },
    Average { mc_samples: usize, seed: u64 },
}

impl MultMode {
    pub fn rule(&self, ifs: &IfsSystem) -> Result<Box<dyn CellRule>, OpError> {
        match self {
            MultMode::Collocation { x0 } => {
                if x0.len() != ifs.dim() {
                    return Err(IfsError::PointDimension {
                        expected: ifs.dim(),
                        got: x0.len(),
                    }
                    .into());
                }
                Ok(Box::new(Collocation { x0: x0.clone() }))
            }
            MultMode::Average { mc_samples, seed } => {
                Ok(Box::new(CellAverage::sample(ifs, *mc_samples, *seed)?))
            }
        }
    }
}

/// Diagonal `M_a` on `H_k` with entries given by the cell rule.
pub fn mult_operator(
    space: &CylinderSpace,
    ifs: &IfsSystem,
    a: &dyn Fn(&[f64]) -> Complex64,
    k: usize,
    rule: &dyn CellRule,
) -> Result<LevelOperator, OpError> {
    space.dim(k)?;
    let entries = Word::all(ifs.n(), k)
        .map(|w| rule.cell_value(ifs, a, &w))
        .collect();
    Ok(LevelOperator::diagonal(ifs.n(), k, entries))
}

/// `maxᵢ ‖Vᵢ*Vᵢ − I‖` on `H_k`.
pub fn isometry_defect(n: usize, k: usize) -> Result<f64, OpError> {
    let space = CylinderSpace::new(n);
    let id = space.identity_operator(k)?;
    let mut worst: f64 = 0.0;
    for i in 1..=n {
        let prod = space
            .coisometry_operator(i, k + 1)?
            .compose(&space.isometry_operator(i, k)?)?;
        worst = worst.max(prod.sub(&id)?.op_norm());
    }
    Ok(worst)
}

/// `‖Σⱼ VⱼVⱼ* − I‖` on `H_k`, `k ≥ 1`.
pub fn range_defect(n: usize, k: usize) -> Result<f64, OpError> {
    if k == 0 {
        return Err(OpError::LevelUnderflow { level: 0 });
    }
    let space = CylinderSpace::new(n);
    let mut sum = LevelOperator::diagonal(n, k, vec![Complex64::new(0.0, 0.0); space.dim(k)?]);
    for j in 1..=n {
        let proj = space
            .isometry_operator(j, k - 1)?
            .compose(&space.coisometry_operator(j, k)?)?;
        sum = sum.add(&proj)?;
    }
    Ok(sum.sub(&space.identity_operator(k)?)?.op_norm())
}

/// Both Cuntz relation defects on `H_k`.
pub fn cuntz_relation_defects(n: usize, k: usize) -> Result<(f64, f64), OpError> {
    Ok((isometry_defect(n, k)?, range_defect(n, k)?))
}

/// `‖M_a^{(k+1)} Vᵢ − Vᵢ M_{a∘γᵢ}^{(k)}‖` as operators `H_k → H_{k+1}`.
pub fn covariance_defect(
    ifs: &IfsSystem,
    a: &dyn Fn(&[f64]) -> Complex64,
    i: usize,
    k: usize,
    rule: &dyn CellRule,
) -> Result<f64, OpError> {
    let space = CylinderSpace::new(ifs.n());
    let gamma = ifs.map(i)?;
    let pulled = |x: &[f64]| a(&gamma.apply(x));
    let v = space.isometry_operator(i, k)?;
    let lhs = mult_operator(&space, ifs, a, k + 1, rule)?.compose(&v)?;
    let rhs = v.compose(&mult_operator(&space, ifs, &pulled, k, rule)?)?;
    Ok(lhs.sub(&rhs)?.op_norm())
}
