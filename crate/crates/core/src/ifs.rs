//! Affine proper contractions, word composition and branch inversion.
//!
//! Letters and branch indices are 1-based throughout the crate, so the word
//! `(1, 2)` denotes `γ₁ ∘ γ₂`. Composition puts the first letter outermost:
//! `γ_ω = γ_{ω₁} ∘ … ∘ γ_{ω_k}`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Geometric tolerance for branch membership and box containment.
pub const TAU_GEO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IfsError {
    #[error("linear part is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("offset has length {offset}, expected {dim}")]
    DimensionMismatch { dim: usize, offset: usize },
    #[error("map has non-finite entries")]
    NonFinite,
    #[error("not contractive: largest singular value {sigma_max} >= 1")]
    NotContractive { sigma_max: f64 },
    #[error("degenerate: smallest singular value is 0, map is not injective")]
    Degenerate,
    #[error("system needs at least 2 maps, got {0}")]
    TooFewMaps(usize),
    #[error("map {index} {source}")]
    Map {
        index: usize,
        #[source]
        source: Box<IfsError>,
    },
    #[error("map {index} has dimension {got}, box has {expected}")]
    MapDimension { index: usize, expected: usize, got: usize },
    #[error("map {index} does not send the ambient box into itself")]
    EscapesBox { index: usize },
    #[error("invalid ambient box: {0}")]
    InvalidBox(String),
    #[error("letter {letter} out of range 1..={n}")]
    LetterOutOfRange { letter: usize, n: usize },
    #[error("point has dimension {got}, expected {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("point lies in no branch image")]
    NoBranch,
}

/// An affine map `x ↦ A x + b` on `ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    linear: DMatrix<f64>,
    offset: DVector<f64>,
}

impl AffineMap {
    pub fn new(linear: DMatrix<f64>, offset: DVector<f64>) -> Result<Self, IfsError> {
        if !linear.is_square() {
            return Err(IfsError::NotSquare {
                rows: linear.nrows(),
                cols: linear.ncols(),
            });
        }
        if offset.len() != linear.nrows() {
            return Err(IfsError::DimensionMismatch {
                dim: linear.nrows(),
                offset: offset.len(),
            });
        }
        if linear.iter().chain(offset.iter()).any(|v| !v.is_finite()) {
            return Err(IfsError::NonFinite);
        }
        Ok(Self { linear, offset })
    }

    /// One-dimensional map `x ↦ scale · x + shift`.
    pub fn scalar(scale: f64, shift: f64) -> Self {
        Self {
            linear: DMatrix::from_element(1, 1, scale),
            offset: DVector::from_element(1, shift),
        }
    }

    /// Builds a map from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<f64>], offset: &[f64]) -> Result<Self, IfsError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(IfsError::NotSquare {
                rows: nrows,
                cols: ncols,
            });
        }
        let linear = DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]);
        Self::new(linear, DVector::from_column_slice(offset))
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            linear: DMatrix::identity(dim, dim),
            offset: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn linear_part(&self) -> &DMatrix<f64> {
        &self.linear
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    /// Evaluates `A x + b` with a fixed summation order.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        (0..d)
            .map(|r| {
                let mut acc = 0.0;
                for (c, xc) in x.iter().enumerate() {
                    acc += self.linear[(r, c)] * xc;
                }
                acc + self.offset[r]
            })
            .collect()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        let linear = &self.linear * &inner.linear;
        let offset = &self.linear * &inner.offset + &self.offset;
        AffineMap { linear, offset }
    }

    /// Solves `A x + b = y`. Returns `None` for a singular linear part.
    pub fn invert_point(&self, y: &[f64]) -> Option<Vec<f64>> {
        let d = self.dim();
        if d == 1 {
            let a = self.linear[(0, 0)];
            if a == 0.0 {
                return None;
            }
            return Some(vec![(y[0] - self.offset[0]) / a]);
        }
        let rhs = DVector::from_column_slice(y) - &self.offset;
        self.linear
            .clone()
            .lu()
            .solve(&rhs)
            .map(|x| x.iter().copied().collect())
    }

    /// Singular values `(σ_min, σ_max)` of the linear part.
    pub fn singular_range(&self) -> (f64, f64) {
        let sv = self.linear.clone().singular_values();
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let max = sv.iter().copied().fold(0.0, f64::max);
        (min, max)
    }
}

/// Checks the proper-contraction condition and returns `(c₁, c₂) = (σ_min, σ_max)`.
pub fn validate_contraction(map: &AffineMap) -> Result<(f64, f64), IfsError> {
    let (c1, c2) = map.singular_range();
    if c2 >= 1.0 {
        return Err(IfsError::NotContractive { sigma_max: c2 });
    }
    if c1 <= 0.0 {
        return Err(IfsError::Degenerate);
    }
    Ok((c1, c2))
}

/// Axis-aligned compact box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, IfsError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(IfsError::InvalidBox(format!(
                "lo has {} coordinates, hi has {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(IfsError::InvalidBox("need finite lo <= hi".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    /// All `2^d` corners, in binary order of the coordinate choices.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|j| if mask >> j & 1 == 1 { self.hi[j] } else { self.lo[j] })
                    .collect()
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    /// Closed intersection, `None` if empty.
    pub fn intersect(&self, other: &BoxRegion) -> Option<BoxRegion> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).all(|(l, h)| l <= h) {
            Some(BoxRegion { lo, hi })
        } else {
            None
        }
    }

    /// Bounding box of the image of this box under an affine map.
    pub fn image(&self, map: &AffineMap) -> BoxRegion {
        let verts: Vec<Vec<f64>> = self.vertices().iter().map(|v| map.apply(v)).collect();
        let d = self.dim();
        let lo = (0..d)
            .map(|j| verts.iter().map(|v| v[j]).fold(f64::INFINITY, f64::min))
            .collect();
        let hi = (0..d)
            .map(|j| verts.iter().map(|v| v[j]).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        BoxRegion { lo, hi }
    }
}

/// A finite word over the alphabet `{1, …, n}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(letters: Vec<usize>) -> Self {
        Word(letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, n: usize) -> Result<(), IfsError> {
        match self.0.iter().find(|&&l| l == 0 || l > n) {
            Some(&letter) => Err(IfsError::LetterOutOfRange { letter, n }),
            None => Ok(()),
        }
    }

    /// `letter · self`.
    pub fn prepend(&self, letter: usize) -> Word {
        let mut v = Vec::with_capacity(self.len() + 1);
        v.push(letter);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }

    /// `self` with the prefix `prefix` removed, if it is one.
    pub fn strip_prefix(&self, prefix: &Word) -> Option<Word> {
        self.0.strip_prefix(prefix.0.as_slice()).map(|s| Word(s.to_vec()))
    }

    pub fn prefix(&self, len: usize) -> Word {
        Word(self.0[..len].to_vec())
    }

    /// Lexicographic rank among words of the same length, first letter most significant.
    pub fn rank(&self, n: usize) -> usize {
        self.0.iter().fold(0, |acc, &l| acc * n + (l - 1))
    }

    pub fn from_rank(rank: usize, len: usize, n: usize) -> Word {
        let mut letters = vec![0; len];
        let mut r = rank;
        for slot in letters.iter_mut().rev() {
            *slot = r % n + 1;
            r /= n;
        }
        Word(letters)
    }

    /// All `n^len` words of length `len` in rank order.
    pub fn all(n: usize, len: usize) -> impl Iterator<Item = Word> {
        let count = n.pow(len as u32);
        (0..count).map(move |r| Word::from_rank(r, len, n))
    }
}

impl From<Vec<usize>> for Word {
    fn from(v: Vec<usize>) -> Self {
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("."))
    }
}

/// An iterated function system of affine proper contractions on an ambient box.
#[derive(Debug, Clone, PartialEq)]
pub struct IfsSystem {
    maps: Vec<AffineMap>,
    ambient_box: BoxRegion,
    diam: f64,
    ratios: Vec<(f64, f64)>,
}

impl IfsSystem {
    pub fn new(maps: Vec<AffineMap>, ambient_box: BoxRegion) -> Result<Self, IfsError> {
        if maps.len() < 2 {
            return Err(IfsError::TooFewMaps(maps.len()));
        }
        let d = ambient_box.dim();
        let mut ratios = Vec::with_capacity(maps.len());
        for (idx, map) in maps.iter().enumerate() {
            if map.dim() != d {
                return Err(IfsError::MapDimension {
                    index: idx + 1,
                    expected: d,
                    got: map.dim(),
                });
            }
            let r = validate_contraction(map).map_err(|e| IfsError::Map {
                index: idx + 1,
                source: Box::new(e),
            })?;
            let escapes = ambient_box
                .vertices()
                .iter()
                .any(|v| !ambient_box.contains(&map.apply(v), TAU_GEO));
            if escapes {
                return Err(IfsError::EscapesBox { index: idx + 1 });
            }
            ratios.push(r);
        }
        let diam = ambient_box.diameter();
        Ok(Self {
            maps,
            ambient_box,
            diam,
            ratios,
        })
    }

    /// `γ₁(x) = x/2`, `γ₂(x) = x/2 + 1/2` on `[0, 1]`.
    pub fn example8() -> Self {
        Self::new(
            vec![AffineMap::scalar(0.5, 0.0), AffineMap::scalar(0.5, 0.5)],
            BoxRegion::unit(1),
        )
        .expect("builtin system is valid")
    }

    /// Tent-map branches `γ₁(x) = x/2`, `γ₂(x) = 1 − x/2` on `[0, 1]`.
    pub fn example9_tent() -> Self {
        Self::new(
            vec![AffineMap::scalar(0.5, 0.0), AffineMap::scalar(-0.5, 1.0)],
            BoxRegion::unit(1),
        )
        .expect("builtin system is valid")
    }

    /// Middle-thirds Cantor system `x/3`, `x/3 + 2/3` on `[0, 1]`.
    pub fn cantor3() -> Self {
        Self::new(
            vec![
                AffineMap::scalar(1.0 / 3.0, 0.0),
                AffineMap::scalar(1.0 / 3.0, 2.0 / 3.0),
            ],
            BoxRegion::unit(1),
        )
        .expect("builtin system is valid")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "example8" => Some(Self::example8()),
            "example9-tent" => Some(Self::example9_tent()),
            "cantor3" => Some(Self::cantor3()),
            _ => None,
        }
    }

    pub fn n(&self) -> usize {
        self.maps.len()
    }

    pub fn dim(&self) -> usize {
        self.ambient_box.dim()
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    /// Map for the 1-based branch index `i`.
    pub fn map(&self, i: usize) -> Result<&AffineMap, IfsError> {
        self.check_letter(i)?;
        Ok(&self.maps[i - 1])
    }

    pub fn ambient_box(&self) -> &BoxRegion {
        &self.ambient_box
    }

    pub fn diam(&self) -> f64 {
        self.diam
    }

    /// Per-map `(c₁, c₂)`.
    pub fn ratios(&self) -> &[(f64, f64)] {
        &self.ratios
    }

    /// System contraction ratio `max_i σ_max(γᵢ)`.
    pub fn c2(&self) -> f64 {
        self.ratios.iter().map(|r| r.1).fold(0.0, f64::max)
    }

    pub fn check_letter(&self, i: usize) -> Result<(), IfsError> {
        if i == 0 || i > self.n() {
            Err(IfsError::LetterOutOfRange {
                letter: i,
                n: self.n(),
            })
        } else {
            Ok(())
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<(), IfsError> {
        if x.len() != self.dim() {
            return Err(IfsError::PointDimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `γ_ω` as an affine map; the empty word gives the identity.
    pub fn compose_word(&self, w: &Word) -> Result<AffineMap, IfsError> {
        w.validate(self.n())?;
        let mut acc = AffineMap::identity(self.dim());
        for &l in w.letters() {
            acc = acc.compose(&self.maps[l - 1]);
        }
        Ok(acc)
    }

    /// `γ_ω(x₀)`, evaluated innermost letter first so that
    /// `word_point(iω, x₀)` is bit-identical to `γᵢ(word_point(ω, x₀))`.
    pub fn word_point(&self, w: &Word, x0: &[f64]) -> Result<Vec<f64>, IfsError> {
        w.validate(self.n())?;
        self.check_point(x0)?;
        Ok(self.word_point_unchecked(w.letters(), x0))
    }

    pub(crate) fn word_point_unchecked(&self, letters: &[usize], x0: &[f64]) -> Vec<f64> {
        let mut x = x0.to_vec();
        for &l in letters.iter().rev() {
            x = self.maps[l - 1].apply(&x);
        }
        x
    }

    /// `γ_ω(x₀)` for every `|ω| = k` in rank order, built level by level as
    /// `rep(iω) = γᵢ(rep(ω))`; bit-identical to [`IfsSystem::word_point`].
    pub fn word_points(&self, k: usize, x0: &[f64]) -> Result<Vec<Vec<f64>>, IfsError> {
        self.check_point(x0)?;
        let mut reps = vec![x0.to_vec()];
        for _ in 0..k {
            let mut next = Vec::with_capacity(reps.len() * self.n());
            for map in &self.maps {
                next.extend(reps.iter().map(|x| map.apply(x)));
            }
            reps = next;
        }
        Ok(reps)
    }

    /// Branch inverse of `φ`: the smallest `i` with `y ∈ γᵢ(box)` and `x = γᵢ⁻¹(y)`.
    pub fn phi_apply(&self, y: &[f64]) -> Result<(usize, Vec<f64>), IfsError> {
        self.check_point(y)?;
        for (idx, map) in self.maps.iter().enumerate() {
            if let Some(x) = map.invert_point(y) {
                if self.ambient_box.contains(&x, TAU_GEO) {
                    return Ok((idx + 1, x));
                }
            }
        }
        Err(IfsError::NoBranch)
    }

    /// Level-`k` address of `y` obtained by repeated branch inversion.
    pub fn address(&self, y: &[f64], k: usize) -> Option<Word> {
        let mut letters = Vec::with_capacity(k);
        let mut x = y.to_vec();
        for _ in 0..k {
            let (i, next) = self.phi_apply(&x).ok()?;
            letters.push(i);
            x = next;
        }
        Some(Word(letters))
    }

    /// `c₂^k · diam`, an upper bound on `diam γ_ω(K)` for `|ω| = k`.
    pub fn cylinder_diameter_bound(&self, k: usize) -> f64 {
        self.c2().powi(k as i32) * self.diam
    }

    /// Bounding box of `γ_ω(box)`.
    pub fn cell_box(&self, w: &Word) -> Result<BoxRegion, IfsError> {
        Ok(self.ambient_box.image(&self.compose_word(w)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn contraction_ratios_of_builtins() {
        let (c1, c2) = validate_contraction(&AffineMap::scalar(0.5, 0.0)).unwrap();
        assert!(close(c1, 0.5) && close(c2, 0.5));
        let (c1, c2) = validate_contraction(&AffineMap::scalar(-0.5, 1.0)).unwrap();
        assert!(close(c1, 0.5) && close(c2, 0.5));
    }

    #[test]
    fn identity_is_not_a_contraction() {
        let err = validate_contraction(&AffineMap::scalar(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, IfsError::NotContractive { .. }));
    }

    #[test]
    fn singular_map_is_degenerate() {
        let m = AffineMap::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.0]], &[0.0, 0.0]).unwrap();
        assert_eq!(validate_contraction(&m), Err(IfsError::Degenerate));
    }

    #[test]
    fn two_dimensional_rotation_scaling() {
        let s = 0.6 / 2f64.sqrt();
        let m = AffineMap::from_rows(&[vec![s, -s], vec![s, s]], &[0.1, 0.0]).unwrap();
        let (c1, c2) = validate_contraction(&m).unwrap();
        assert!((c1 - 0.6).abs() < 1e-12 && (c2 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn system_needs_two_maps() {
        let err = IfsSystem::new(vec![AffineMap::scalar(0.5, 0.0)], BoxRegion::unit(1)).unwrap_err();
        assert_eq!(err, IfsError::TooFewMaps(1));
    }

    #[test]
    fn system_rejects_escaping_map() {
        let err = IfsSystem::new(
            vec![AffineMap::scalar(0.5, 0.0), AffineMap::scalar(0.5, 0.7)],
            BoxRegion::unit(1),
        )
        .unwrap_err();
        assert_eq!(err, IfsError::EscapesBox { index: 2 });
    }

    #[test]
    fn compose_word_examples() {
        let ifs = IfsSystem::example8();
        let m = ifs.compose_word(&Word::new(vec![1, 2])).unwrap();
        assert!(close(m.apply(&[0.0])[0], 0.25));
        assert!(close(m.linear_part()[(0, 0)], 0.25));
        let m = ifs.compose_word(&Word::new(vec![2, 2])).unwrap();
        assert!(close(m.linear_part()[(0, 0)], 0.25));
        assert!(close(m.offset()[0], 0.75));
        let id = ifs.compose_word(&Word::empty()).unwrap();
        assert_eq!(id, AffineMap::identity(1));
    }

    #[test]
    fn compose_word_rejects_bad_letter() {
        let ifs = IfsSystem::example8();
        assert_eq!(
            ifs.compose_word(&Word::new(vec![1, 3])),
            Err(IfsError::LetterOutOfRange { letter: 3, n: 2 })
        );
    }

    #[test]
    fn word_point_examples() {
        let ifs = IfsSystem::example8();
        assert_eq!(ifs.word_point(&Word::new(vec![2]), &[0.0]).unwrap(), vec![0.5]);
        assert_eq!(ifs.word_point(&Word::empty(), &[0.0]).unwrap(), vec![0.0]);
        // first letter outermost: γ₂(γ₁(0)) = 2/3
        let cantor = IfsSystem::cantor3();
        let p = cantor.word_point(&Word::new(vec![2, 1]), &[0.0]).unwrap();
        assert!(close(p[0], 2.0 / 3.0));
        let brute = cantor.maps()[1].apply(&cantor.maps()[0].apply(&[0.0]));
        assert_eq!(p, brute);
    }

    #[test]
    fn phi_apply_examples() {
        let e8 = IfsSystem::example8();
        assert_eq!(e8.phi_apply(&[0.25]).unwrap(), (1, vec![0.5]));
        assert_eq!(e8.phi_apply(&[0.5]).unwrap(), (1, vec![1.0]));
        let tent = IfsSystem::example9_tent();
        assert_eq!(tent.phi_apply(&[0.75]).unwrap(), (2, vec![0.5]));
    }

    #[test]
    fn phi_apply_outside_all_branches() {
        let cantor = IfsSystem::cantor3();
        assert_eq!(cantor.phi_apply(&[0.5]), Err(IfsError::NoBranch));
    }

    #[test]
    fn diameter_bounds() {
        assert!(close(IfsSystem::example8().cylinder_diameter_bound(3), 0.125));
        assert!(close(IfsSystem::cantor3().cylinder_diameter_bound(2), 1.0 / 9.0));
        assert_eq!(IfsSystem::example9_tent().cylinder_diameter_bound(0), 1.0);
    }

    #[test]
    fn word_rank_roundtrip() {
        for w in Word::all(3, 3) {
            assert_eq!(Word::from_rank(w.rank(3), 3, 3), w);
        }
        assert_eq!(Word::new(vec![2, 1]).rank(2), 2);
    }
}
