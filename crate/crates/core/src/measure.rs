//! Self-similar measures as seeded chaos-game point clouds, and the
//! fixed-point, pushforward and Radon–Nikodym diagnostics evaluated on
//! level-`k` cylinder cells.
//!
//! Cells are identified with words. A sample is assigned to the cell given by
//! its branch-inverse address, so a point on a shared face goes to the
//! lowest-index cell.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ifs::{BoxRegion, IfsError, IfsSystem, Word};

pub const DEFAULT_BURN_IN: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("empirical measure has no points")]
    EmptyMeasure,
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("partition level must be at least {min}, got {got}")]
    LevelTooLow { min: usize, got: usize },
    #[error(transparent)]
    Ifs(#[from] IfsError),
}

/// Probability vector `(p₁, …, pₙ)` with all `pᵢ > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimilarWeights {
    p: Vec<f64>,
}

impl SelfSimilarWeights {
    pub fn new(p: Vec<f64>) -> Result<Self, MeasureError> {
        if p.is_empty() {
            return Err(MeasureError::InvalidWeights("empty weight vector".into()));
        }
        if let Some(bad) = p.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(MeasureError::InvalidWeights(format!(
                "every weight must be > 0, found {bad}"
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(MeasureError::InvalidWeights(format!(
                "weights must sum to 1, sum is {sum}"
            )));
        }
        Ok(Self { p })
    }

    /// Uniform weights `1/n`, the Hutchinson measure.
    pub fn hutchinson(n: usize) -> Self {
        Self {
            p: vec![1.0 / n as f64; n],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn is_hutchinson(&self) -> bool {
        let u = 1.0 / self.p.len() as f64;
        self.p.iter().all(|v| (v - u).abs() <= 1e-12)
    }

    fn check_for(&self, ifs: &IfsSystem) -> Result<(), MeasureError> {
        if self.p.len() != ifs.n() {
            return Err(MeasureError::InvalidWeights(format!(
                "{} weights for {} maps",
                self.p.len(),
                ifs.n()
            )));
        }
        Ok(())
    }
}

/// Uniformly weighted point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    points: Vec<Vec<f64>>,
    seed: u64,
    burn_in: usize,
    weights: SelfSimilarWeights,
}

impl EmpiricalMeasure {
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn weights(&self) -> &SelfSimilarWeights {
        &self.weights
    }

    /// Fraction of points in the closed box.
    pub fn mass_in_box(&self, b: &BoxRegion) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let inside = self.points.iter().filter(|p| b.contains(p, 0.0)).count();
        inside as f64 / self.points.len() as f64
    }

    /// Concatenates independent streams in the given order.
    pub fn merge(parts: Vec<EmpiricalMeasure>) -> Option<EmpiricalMeasure> {
        let mut iter = parts.into_iter();
        let mut first = iter.next()?;
        for p in iter {
            first.points.extend(p.points);
        }
        Some(first)
    }
}

fn run_chain(
    ifs: &IfsSystem,
    index: &WeightedIndex<f64>,
    rng: &mut ChaCha8Rng,
    count: usize,
    burn_in: usize,
) -> Vec<Vec<f64>> {
    let mut x = ifs.ambient_box().center();
    for _ in 0..burn_in {
        x = ifs.maps()[index.sample(rng)].apply(&x);
    }
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        x = ifs.maps()[index.sample(rng)].apply(&x);
        points.push(x.clone());
    }
    points
}

/// Random iteration `x_{t+1} = γ_{i_t}(x_t)` started at the box center.
pub fn chaos_game(
    ifs: &IfsSystem,
    weights: &SelfSimilarWeights,
    count: usize,
    burn_in: usize,
    seed: u64,
) -> Result<EmpiricalMeasure, MeasureError> {
    weights.check_for(ifs)?;
    if count == 0 {
        return Err(MeasureError::NoSamples);
    }
    let index = WeightedIndex::new(weights.as_slice())
        .map_err(|e| MeasureError::InvalidWeights(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = run_chain(ifs, &index, &mut rng, count, burn_in);
    Ok(EmpiricalMeasure {
        points,
        seed,
        burn_in,
        weights: weights.clone(),
    })
}

/// Runs `streams` independent chains (ChaCha stream ids `0..streams`) on
/// separate threads and concatenates them in stream order.
pub fn chaos_game_streams(
    ifs: &IfsSystem,
    weights: &SelfSimilarWeights,
    count_per_stream: usize,
    burn_in: usize,
    seed: u64,
    streams: u64,
) -> Result<EmpiricalMeasure, MeasureError> {
    weights.check_for(ifs)?;
    if count_per_stream == 0 || streams == 0 {
        return Err(MeasureError::NoSamples);
    }
    let index = WeightedIndex::new(weights.as_slice())
        .map_err(|e| MeasureError::InvalidWeights(e.to_string()))?;
    let chunks: Vec<Vec<Vec<f64>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..streams)
            .map(|s| {
                let index = &index;
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(s);
                    run_chain(ifs, index, &mut rng, count_per_stream, burn_in)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect()
    });
    Ok(EmpiricalMeasure {
        points: chunks.into_iter().flatten().collect(),
        seed,
        burn_in,
        weights: weights.clone(),
    })
}

/// The level-`k` cylinder cells `γ_ω(box)`, `|ω| = k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellPartition {
    level: usize,
}

impl CellPartition {
    pub fn new(level: usize) -> Self {
        Self { level }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn cells(&self, ifs: &IfsSystem) -> impl Iterator<Item = Word> {
        Word::all(ifs.n(), self.level)
    }

    /// Per-cell sample counts in rank order; unaddressable points are dropped.
    pub fn counts<'a, I>(&self, ifs: &IfsSystem, points: I) -> Vec<usize>
    where
        I: IntoIterator<Item = &'a Vec<f64>>,
    {
        counts_at(ifs, self.level, points.into_iter().map(|p| p.as_slice()))
    }
}

fn counts_at<'a>(ifs: &IfsSystem, level: usize, points: impl Iterator<Item = &'a [f64]>) -> Vec<usize> {
    let n = ifs.n();
    let mut counts = vec![0usize; n.pow(level as u32)];
    for p in points {
        if let Some(w) = ifs.address(p, level) {
            counts[w.rank(n)] += 1;
        }
    }
    counts
}

/// Counts of `γᵢ(x)` over the sample, i.e. the mass of `γᵢ⁻¹(E)` for each cell `E`.
fn preimage_counts(ifs: &IfsSystem, i: usize, level: usize, m: &EmpiricalMeasure) -> Vec<usize> {
    let map = &ifs.maps()[i - 1];
    let n = ifs.n();
    let mut counts = vec![0usize; n.pow(level as u32)];
    for p in m.points() {
        if let Some(w) = ifs.address(&map.apply(p), level) {
            counts[w.rank(n)] += 1;
        }
    }
    counts
}

fn nonempty(m: &EmpiricalMeasure) -> Result<f64, MeasureError> {
    if m.is_empty() {
        Err(MeasureError::EmptyMeasure)
    } else {
        Ok(m.len() as f64)
    }
}

/// `max_E |m(E) − Σᵢ pᵢ m(γᵢ⁻¹(E))|` over the level-`k` cells.
pub fn self_similarity_residual(
    m: &EmpiricalMeasure,
    ifs: &IfsSystem,
    weights: &SelfSimilarWeights,
    part: &CellPartition,
) -> Result<f64, MeasureError> {
    weights.check_for(ifs)?;
    if part.level() < 1 {
        return Err(MeasureError::LevelTooLow {
            min: 1,
            got: part.level(),
        });
    }
    let total = nonempty(m)?;
    let direct = part.counts(ifs, m.points());
    let mut mixed = vec![0.0; direct.len()];
    for (idx, p) in weights.as_slice().iter().enumerate() {
        let pre = preimage_counts(ifs, idx + 1, part.level(), m);
        for (acc, c) in mixed.iter_mut().zip(pre) {
            *acc += p * c as f64 / total;
        }
    }
    Ok(direct
        .iter()
        .zip(&mixed)
        .map(|(&c, mix)| (c as f64 / total - mix).abs())
        .fold(0.0, f64::max))
}

/// `max_E |m(γᵢ(E)) − m(E)/n|` over the level-`k` cells (`k = 0` is `E = K`).
pub fn image_measure_residual(
    m: &EmpiricalMeasure,
    ifs: &IfsSystem,
    i: usize,
    part: &CellPartition,
) -> Result<f64, MeasureError> {
    ifs.check_letter(i)?;
    let total = nonempty(m)?;
    let n = ifs.n();
    let k = part.level();
    let coarse = part.counts(ifs, m.points());
    let fine = counts_at(ifs, k + 1, m.points().iter().map(|p| p.as_slice()));
    let offset = (i - 1) * n.pow(k as u32);
    Ok(coarse
        .iter()
        .enumerate()
        .map(|(r, &c)| (fine[offset + r] as f64 / total - c as f64 / (n as f64 * total)).abs())
        .fold(0.0, f64::max))
}

/// Averaged density of `γᵢ*m` with respect to `m` on one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RnCell {
    pub word: Word,
    pub mass: f64,
    /// `None` flags a cell with no samples.
    pub estimate: Option<f64>,
}

/// `m(γᵢ⁻¹(E)) / m(E)` for every level-`k` cell `E`.
pub fn rn_derivative_estimate(
    m: &EmpiricalMeasure,
    ifs: &IfsSystem,
    i: usize,
    part: &CellPartition,
) -> Result<Vec<RnCell>, MeasureError> {
    ifs.check_letter(i)?;
    let total = nonempty(m)?;
    let direct = part.counts(ifs, m.points());
    let pre = preimage_counts(ifs, i, part.level(), m);
    Ok(part
        .cells(ifs)
        .zip(direct.iter().zip(&pre))
        .map(|(word, (&c, &q))| RnCell {
            word,
            mass: c as f64 / total,
            estimate: (c > 0).then(|| q as f64 / c as f64),
        })
        .collect())
}

/// Largest empirical mass of `γᵢ(box) ∩ γⱼ(box)` over `i ≠ j`.
pub fn separation_overlap(ifs: &IfsSystem, m: &EmpiricalMeasure) -> f64 {
    let images: Vec<BoxRegion> = ifs
        .maps()
        .iter()
        .map(|g| ifs.ambient_box().image(g))
        .collect();
    let mut worst: f64 = 0.0;
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            if let Some(b) = images[i].intersect(&images[j]) {
                worst = worst.max(m.mass_in_box(&b));
            }
        }
    }
    worst
}

/// Acceptance threshold `5/√N` for [`separation_overlap`].
pub fn separation_threshold(samples: usize) -> f64 {
    5.0 / (samples as f64).sqrt()
}
