//! Symbolic `*`-algebra spanned by the words `S_α S_β*`.
//!
//! Products are reduced with the prefix rule
//! `S_β* S_α = S_{α∖β}` if `β ⊑ α`, `S_{β∖α}*` if `α ⊑ β`, `0` otherwise,
//! which is all that `Sᵢ*Sⱼ = δᵢⱼ` implies. The relation `Σ SⱼSⱼ* = 1`
//! is not a rewrite; [`CuntzPolynomial::collapse`] applies it on demand.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ifs::Word;
use crate::opspace::{CylinderSpace, LeveledVector, OpError, RefinePolicy};

/// Coefficients below this modulus are dropped after arithmetic.
pub const PRUNE_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WordAlgebraError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("generator S{index} at {pos} out of range 1..={n}")]
    GeneratorOutOfRange { pos: usize, index: usize, n: usize },
    #[error("vector level {got} is below the required {needed} and refinement is disabled")]
    InsufficientLevel { needed: usize, got: usize },
    #[error("alphabet size mismatch: {left} vs {right}")]
    ArityMismatch { left: usize, right: usize },
    #[error(transparent)]
    Op(#[from] OpError),
}

/// `coeff · S_α S_β*`.
#[derive(Debug, Clone, PartialEq)]
pub struct CuntzTerm {
    pub coeff: Complex64,
    pub alpha: Word,
    pub beta: Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct TermKey {
    alpha: Word,
    beta: Word,
}

impl Ord for TermKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.alpha
            .len()
            .cmp(&other.alpha.len())
            .then_with(|| self.alpha.cmp(&other.alpha))
            .then_with(|| self.beta.len().cmp(&other.beta.len()))
            .then_with(|| self.beta.cmp(&other.beta))
    }
}

impl PartialOrd for TermKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Normal-form linear combination of `S_α S_β*` over `n` generators.
#[derive(Debug, Clone, PartialEq)]
pub struct CuntzPolynomial {
    n: usize,
    terms: BTreeMap<TermKey, Complex64>,
}

/// JSON export row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub re: f64,
    pub im: f64,
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
}

impl CuntzPolynomial {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn unit(n: usize) -> Self {
        Self::scalar(n, Complex64::new(1.0, 0.0))
    }

    pub fn scalar(n: usize, c: Complex64) -> Self {
        Self::monomial(n, c, Word::empty(), Word::empty())
    }

    /// `Sᵢ` (1-based).
    pub fn generator(n: usize, i: usize) -> Self {
        Self::monomial(n, Complex64::new(1.0, 0.0), Word::new(vec![i]), Word::empty())
    }

    pub fn monomial(n: usize, coeff: Complex64, alpha: Word, beta: Word) -> Self {
        let mut p = Self::zero(n);
        p.accumulate(TermKey { alpha, beta }, coeff);
        p.prune();
        p
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = CuntzTerm>) -> Self {
        let mut p = Self::zero(n);
        for t in terms {
            p.accumulate(
                TermKey {
                    alpha: t.alpha,
                    beta: t.beta,
                },
                t.coeff,
            );
        }
        p.prune();
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in normal-form order.
    pub fn terms(&self) -> impl Iterator<Item = CuntzTerm> + '_ {
        self.terms.iter().map(|(k, c)| CuntzTerm {
            coeff: *c,
            alpha: k.alpha.clone(),
            beta: k.beta.clone(),
        })
    }

    /// Largest `max(|α|, |β|)` over the terms.
    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|k| k.alpha.len().max(k.beta.len()))
            .max()
            .unwrap_or(0)
    }

    /// Largest `|β|`, the minimum input level for [`wa_apply`].
    pub fn max_beta_len(&self) -> usize {
        self.terms.keys().map(|k| k.beta.len()).max().unwrap_or(0)
    }

    fn accumulate(&mut self, key: TermKey, c: Complex64) {
        *self.terms.entry(key).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() >= PRUNE_EPS);
    }

    /// Re-sorts and prunes; a no-op on values built through this API.
    pub fn normalize(&self) -> Self {
        let mut p = self.clone();
        p.prune();
        p
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut p = self.clone();
        for (k, c) in &other.terms {
            p.accumulate(k.clone(), *c);
        }
        p.prune();
        p
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut p = Self::zero(self.n);
        for (k, c) in &self.terms {
            p.accumulate(k.clone(), c * s);
        }
        p.prune();
        p
    }

    pub fn to_records(&self) -> Vec<TermRecord> {
        self.terms()
            .map(|t| TermRecord {
                re: t.coeff.re,
                im: t.coeff.im,
                alpha: t.alpha.letters().to_vec(),
                beta: t.beta.letters().to_vec(),
            })
            .collect()
    }

    /// Folds `Σⱼ c·S_{αj} S_{βj}*` into `c·S_α S_β*` until no group remains.
    pub fn collapse(&self) -> Self {
        let mut current = self.clone();
        loop {
            let mut target = None;
            for (key, c) in &current.terms {
                let (Some(&a1), Some(&b1)) = (key.alpha.letters().last(), key.beta.letters().last())
                else {
                    continue;
                };
                if a1 != 1 || b1 != 1 {
                    continue;
                }
                let alpha = key.alpha.prefix(key.alpha.len() - 1);
                let beta = key.beta.prefix(key.beta.len() - 1);
                let complete = (2..=current.n).all(|j| {
                    let k = TermKey {
                        alpha: alpha.concat(&Word::new(vec![j])),
                        beta: beta.concat(&Word::new(vec![j])),
                    };
                    current
                        .terms
                        .get(&k)
                        .is_some_and(|cj| (cj - c).norm() < PRUNE_EPS)
                });
                if complete {
                    target = Some((alpha, beta, *c));
                    break;
                }
            }
            let Some((alpha, beta, c)) = target else {
                return current;
            };
            for j in 1..=current.n {
                current.terms.remove(&TermKey {
                    alpha: alpha.concat(&Word::new(vec![j])),
                    beta: beta.concat(&Word::new(vec![j])),
                });
            }
            current.accumulate(TermKey { alpha, beta }, c);
            current.prune();
        }
    }
}

fn check_arity(p: &CuntzPolynomial, q: &CuntzPolynomial) {
    assert_eq!(p.n, q.n, "polynomials over different alphabets");
}

/// `S_β* S_{α′}` by the prefix rule, as `(left, right)` of `S_left S_right*`.
fn reduce_middle(beta: &Word, alpha2: &Word) -> Option<(Word, Word)> {
    if let Some(rest) = alpha2.strip_prefix(beta) {
        Some((rest, Word::empty()))
    } else {
        beta.strip_prefix(alpha2).map(|rest| (Word::empty(), rest))
    }
}

/// Product in normal form.
pub fn wa_multiply(p: &CuntzPolynomial, q: &CuntzPolynomial) -> CuntzPolynomial {
    check_arity(p, q);
    let mut out = CuntzPolynomial::zero(p.n);
    for (k1, c1) in &p.terms {
        for (k2, c2) in &q.terms {
            if let Some((up, down)) = reduce_middle(&k1.beta, &k2.alpha) {
                // S_α1 S_up S_down* S_β2* = S_{α1·up} S_{β2·down}*
                out.accumulate(
                    TermKey {
                        alpha: k1.alpha.concat(&up),
                        beta: k2.beta.concat(&down),
                    },
                    c1 * c2,
                );
            }
        }
    }
    out.prune();
    out
}

/// `(c S_α S_β*)* = c̄ S_β S_α*`.
pub fn wa_adjoint(p: &CuntzPolynomial) -> CuntzPolynomial {
    let mut out = CuntzPolynomial::zero(p.n);
    for (k, c) in &p.terms {
        out.accumulate(
            TermKey {
                alpha: k.beta.clone(),
                beta: k.alpha.clone(),
            },
            c.conj(),
        );
    }
    out
}

/// Evaluates `p` on `v`: `Sᵢ` acts as `Vᵢ`, `Sᵢ*` as `Vᵢ*`. Term outputs are
/// refined to the largest output level before summing.
pub fn wa_apply(
    space: &CylinderSpace,
    p: &CuntzPolynomial,
    v: &LeveledVector,
) -> Result<LeveledVector, WordAlgebraError> {
    let n = space.n();
    if p.n != n || v.n() != n {
        return Err(WordAlgebraError::ArityMismatch {
            left: p.n,
            right: v.n(),
        });
    }
    let needed = p.max_beta_len();
    let v = if v.level() < needed {
        match space.policy() {
            RefinePolicy::Auto => space.refine_to(v, needed)?,
            RefinePolicy::Disabled => {
                return Err(WordAlgebraError::InsufficientLevel {
                    needed,
                    got: v.level(),
                })
            }
        }
    } else {
        v.clone()
    };
    let level = v.level();
    let out_level = p
        .terms
        .keys()
        .map(|k| level - k.beta.len() + k.alpha.len())
        .max()
        .unwrap_or(level);
    let mut out = LeveledVector::zeros(n, out_level);
    space.dim(out_level)?;
    for (k, c) in &p.terms {
        let block = n.pow((level - k.beta.len()) as u32);
        let start = k.beta.rank(n) * block;
        let term_level = level - k.beta.len() + k.alpha.len();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n.pow(term_level as u32)];
        let dst = k.alpha.rank(n) * block;
        for (o, x) in coeffs[dst..dst + block].iter_mut().zip(&v.coeffs()[start..start + block]) {
            *o = c * x;
        }
        let term = LeveledVector::new(n, term_level, coeffs)?;
        out.add_assign(&space.refine_to(&term, out_level)?);
    }
    Ok(out)
}

impl fmt::Display for CuntzPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(k, c)| {
                let mut factors = vec![format_complex(*c)];
                factors.extend(k.alpha.letters().iter().map(|l| format!("S{l}")));
                factors.extend(k.beta.letters().iter().rev().map(|l| format!("S{l}*")));
                factors.join("·")
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

fn format_real(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn format_complex(c: Complex64) -> String {
    match (c.re == 0.0, c.im == 0.0) {
        (_, true) => format_real(c.re),
        (true, false) => format!("{}i", format_real(c.im)),
        (false, false) => {
            let sign = if c.im.is_sign_negative() { "-" } else { "+" };
            format!("({}{}{}i)", format_real(c.re), sign, format_real(c.im.abs()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Imag(f64),
    Gen(usize),
    Plus,
    Minus,
    Dot,
    Star,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, WordAlgebraError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, ch) = chars[i];
        match ch {
            c if c.is_whitespace() => i += 1,
            '+' => {
                out.push((pos, Tok::Plus));
                i += 1;
            }
            '-' => {
                out.push((pos, Tok::Minus));
                i += 1;
            }
            '·' => {
                out.push((pos, Tok::Dot));
                i += 1;
            }
            '*' => {
                out.push((pos, Tok::Star));
                i += 1;
            }
            '(' => {
                out.push((pos, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((pos, Tok::RParen));
                i += 1;
            }
            'i' => {
                out.push((pos, Tok::Imag(1.0)));
                i += 1;
            }
            'S' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].1.is_ascii_digit() {
                    j += 1;
                }
                if j == i + 1 {
                    return Err(WordAlgebraError::Syntax {
                        pos,
                        msg: "generator needs an index".into(),
                    });
                }
                let digits: String = chars[i + 1..j].iter().map(|c| c.1).collect();
                let index = digits.parse().map_err(|_| WordAlgebraError::Syntax {
                    pos,
                    msg: format!("bad generator index {digits}"),
                })?;
                out.push((pos, Tok::Gen(index)));
                i = j;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < chars.len() && (chars[j].1.is_ascii_digit() || chars[j].1 == '.') {
                    j += 1;
                }
                if j < chars.len() && matches!(chars[j].1, 'e' | 'E') {
                    let mut e = j + 1;
                    if e < chars.len() && matches!(chars[e].1, '+' | '-') {
                        e += 1;
                    }
                    if e < chars.len() && chars[e].1.is_ascii_digit() {
                        while e < chars.len() && chars[e].1.is_ascii_digit() {
                            e += 1;
                        }
                        j = e;
                    }
                }
                let text: String = chars[i..j].iter().map(|c| c.1).collect();
                let value: f64 = text.parse().map_err(|_| WordAlgebraError::Syntax {
                    pos,
                    msg: format!("bad number {text}"),
                })?;
                if j < chars.len() && chars[j].1 == 'i' {
                    out.push((pos, Tok::Imag(value)));
                    j += 1;
                } else {
                    out.push((pos, Tok::Num(value)));
                }
                i = j;
            }
            other => {
                return Err(WordAlgebraError::Syntax {
                    pos,
                    msg: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    n: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.1)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |t| t.0)
    }

    fn expr(&mut self) -> Result<CuntzPolynomial, WordAlgebraError> {
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.at += 1;
                    acc = acc.add(&self.product()?);
                }
                Some(Tok::Minus) => {
                    self.at += 1;
                    acc = acc.sub(&self.product()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<CuntzPolynomial, WordAlgebraError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Dot) => {
                    self.at += 1;
                    acc = wa_multiply(&acc, &self.unary()?);
                }
                Some(Tok::Num(_) | Tok::Imag(_) | Tok::Gen(_) | Tok::LParen) => {
                    acc = wa_multiply(&acc, &self.unary()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<CuntzPolynomial, WordAlgebraError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.at += 1;
                Ok(self.unary()?.scale(Complex64::new(-1.0, 0.0)))
            }
            Some(Tok::Plus) => {
                self.at += 1;
                self.unary()
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> Result<CuntzPolynomial, WordAlgebraError> {
        let mut acc = self.atom()?;
        while let Some(Tok::Star) = self.peek() {
            self.at += 1;
            acc = wa_adjoint(&acc);
        }
        Ok(acc)
    }

    fn atom(&mut self) -> Result<CuntzPolynomial, WordAlgebraError> {
        let pos = self.pos();
        let tok = self.peek().cloned();
        self.at += 1;
        match tok {
            Some(Tok::Num(v)) => Ok(CuntzPolynomial::scalar(self.n, Complex64::new(v, 0.0))),
            Some(Tok::Imag(v)) => Ok(CuntzPolynomial::scalar(self.n, Complex64::new(0.0, v))),
            Some(Tok::Gen(index)) => {
                if index == 0 || index > self.n {
                    return Err(WordAlgebraError::GeneratorOutOfRange {
                        pos,
                        index,
                        n: self.n,
                    });
                }
                Ok(CuntzPolynomial::generator(self.n, index))
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.at += 1;
                        Ok(inner)
                    }
                    _ => Err(WordAlgebraError::Syntax {
                        pos: self.pos(),
                        msg: "expected ')'".into(),
                    }),
                }
            }
            Some(t) => Err(WordAlgebraError::Syntax {
                pos,
                msg: format!("unexpected token {t:?}"),
            }),
            None => Err(WordAlgebraError::Syntax {
                pos,
                msg: "unexpected end of input".into(),
            }),
        }
    }
}

/// Parses an expression over `S1..Sn` into normal form.
///
/// Grammar: sums and differences of products; products are `·`-separated or
/// juxtaposed factors; a factor is a real or imaginary literal (`2`, `0.5i`,
/// `i`), a generator `Sk`, or a parenthesised expression, optionally followed
/// by any number of `*` adjoints.
pub fn parse(expr: &str, n: usize) -> Result<CuntzPolynomial, WordAlgebraError> {
    let toks = tokenize(expr)?;
    let mut parser = Parser {
        toks,
        at: 0,
        n,
        end: expr.len(),
    };
    let p = parser.expr()?;
    if parser.at < parser.toks.len() {
        return Err(WordAlgebraError::Syntax {
            pos: parser.pos(),
            msg: "trailing input".into(),
        });
    }
    Ok(p)
}
