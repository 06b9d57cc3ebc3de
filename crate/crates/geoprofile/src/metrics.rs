//! Distribution-free measures for comparing caption datasets: Vendi
//! diversity, Spearman rank correlation, over/under-representation flags,
//! and k-NN manifold precision/recall.
//!
//! All operations are pure. Randomness (permutation p-values, subsampling)
//! flows through explicit seeds, and reductions run in a fixed order, so
//! every result is reproducible bit-for-bit.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("embedding i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("embedding file: {0}")]
    Format(String),
    #[error("embedding set is empty")]
    EmptySet,
    #[error("row {row} has zero norm and cannot be normalized")]
    ZeroRow { row: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("sequence lengths differ: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least {need} samples, got {n}")]
    TooFewSamples { n: usize, need: usize },
    #[error("correlation is undefined for a constant sequence")]
    ConstantSequence,
    #[error("misalignment threshold must exceed 1, got {r}")]
    InvalidThreshold { r: f64 },
    #[error("distribution has zero total mass")]
    EmptyDistribution,
    #[error("k = {k} requires more than k points per set, got {n}")]
    InvalidK { k: usize, n: usize },
}

pub const EMBEDDING_MAGIC: &[u8; 4] = b"GPEM";
pub const EMBEDDING_VERSION: u32 = 1;

/// How close to 1 a row norm must be to count as already normalized.
const NORM_TOLERANCE: f64 = 1e-6;

/// A set of L2-normalized feature vectors, stored row-major.
///
/// Construction normalizes every row and remembers how many rows needed it,
/// so callers can surface a warning when inputs were not unit-length.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    data: Vec<f64>,
    n: usize,
    d: usize,
    label: Option<String>,
    renormalized: usize,
}

impl EmbeddingSet {
    /// Build a set from a flat row-major buffer of `n`×`d` values.
    pub fn from_flat(mut data: Vec<f64>, n: usize, d: usize) -> Result<Self, MetricsError> {
        if n == 0 || d == 0 {
            return Err(MetricsError::EmptySet);
        }
        if data.len() != n * d {
            return Err(MetricsError::Format(format!(
                "buffer holds {} values, expected {}×{}",
                data.len(),
                n,
                d
            )));
        }
        let mut renormalized = 0;
        for row in 0..n {
            let slice = &mut data[row * d..(row + 1) * d];
            let norm = slice.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(MetricsError::ZeroRow { row });
            }
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                renormalized += 1;
                for v in slice.iter_mut() {
                    *v /= norm;
                }
            }
        }
        Ok(EmbeddingSet { data, n, d, label: None, renormalized })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MetricsError> {
        let n = rows.len();
        let d = rows.first().map(Vec::len).unwrap_or(0);
        for r in rows {
            if r.len() != d {
                return Err(MetricsError::DimensionMismatch { left: d, right: r.len() });
            }
        }
        Self::from_flat(rows.concat(), n, d)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Rows whose input norm deviated from 1 by more than the tolerance.
    pub fn renormalized_rows(&self) -> usize {
        self.renormalized
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// Read the binary embedding format: `GPEM | version u32 | N u64 |
    /// d u32` followed by N·d little-endian f32 values, row-major.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, MetricsError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != EMBEDDING_MAGIC {
            return Err(MetricsError::Format(format!(
                "bad magic {magic:02x?}, expected {EMBEDDING_MAGIC:02x?}"
            )));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != EMBEDDING_VERSION {
            return Err(MetricsError::Format(format!(
                "unsupported version {version} (supported: {EMBEDDING_VERSION})"
            )));
        }
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b4)?;
        let d = u32::from_le_bytes(b4) as usize;
        if n == 0 || d == 0 {
            return Err(MetricsError::EmptySet);
        }
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n * d {
            r.read_exact(&mut b4)?;
            data.push(f32::from_le_bytes(b4) as f64);
        }
        Self::from_flat(data, n, d)
    }

    /// Write this set (normalized rows, downcast to f32) in the binary
    /// embedding format.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(EMBEDDING_MAGIC)?;
        w.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.d as u32).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    /// Deterministically keep at most `cap` rows (original order preserved).
    /// Large (entity, country) cells are capped this way before the
    /// eigendecomposition inside the diversity score.
    pub fn subsample(&self, cap: usize, seed: u64) -> EmbeddingSet {
        if self.n <= cap || cap == 0 {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<usize> =
            rand::seq::index::sample(&mut rng, self.n, cap).into_vec();
        picked.sort_unstable();
        let mut data = Vec::with_capacity(cap * self.d);
        for &i in &picked {
            data.extend_from_slice(self.row(i));
        }
        EmbeddingSet {
            data,
            n: cap,
            d: self.d,
            label: self.label.clone(),
            renormalized: 0,
        }
    }
}

/// Default cap on rows fed into one eigendecomposition at dataset scale.
pub const VENDI_SUBSAMPLE_CAP: usize = 2000;

/// Which matrix the diversity score diagonalizes. Both paths share their
/// nonzero spectrum; `Auto` picks the smaller problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VendiPath {
    Auto,
    /// The N×N similarity matrix K/N with K_ij = ⟨row_i, row_j⟩.
    Kernel,
    /// The d×d surrogate (1/N)·XᵀX.
    Surrogate,
}

/// Effective number of distinct samples: the exponential of the Shannon
/// entropy of the eigenvalues of the normalized similarity matrix.
///
/// With unit rows the eigenvalues sum to 1, so the result lives in
/// [1, N]: 1 for N copies of one vector, N for N mutually orthogonal ones.
pub fn vendi_score(set: &EmbeddingSet) -> Result<f64, MetricsError> {
    vendi_score_with_path(set, VendiPath::Auto)
}

pub fn vendi_score_with_path(set: &EmbeddingSet, path: VendiPath) -> Result<f64, MetricsError> {
    if set.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let (n, d) = (set.len(), set.dim());
    let use_kernel = match path {
        VendiPath::Kernel => true,
        VendiPath::Surrogate => false,
        VendiPath::Auto => n <= d,
    };
    let matrix = if use_kernel {
        DMatrix::from_fn(n, n, |i, j| dot(set.row(i), set.row(j)) / n as f64)
    } else {
        DMatrix::from_fn(d, d, |a, b| {
            let mut acc = 0.0;
            for row in set.rows() {
                acc += row[a] * row[b];
            }
            acc / n as f64
        })
    };
    let eigen = SymmetricEigen::new(matrix);
    let mut lambdas: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    // Fixed summation order keeps the result independent of how the solver
    // happened to order its output.
    lambdas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut entropy = 0.0;
    for l in lambdas {
        // Negative round-off from the eigensolver is clamped to zero, and
        // λ ln λ → 0 as λ → 0.
        if l > 0.0 {
            entropy -= l * l.ln();
        }
    }
    Ok(entropy.exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// How the significance of a rank correlation is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PValueMode {
    /// Large-sample Student-t approximation, t = ρ√((n−2)/(1−ρ²)).
    TApproximation,
    /// Two-sided permutation test; exact for small n, seeded.
    Permutation { iterations: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub rho: f64,
    pub p_value: f64,
}

/// Spearman rank correlation with a two-sided p-value.
///
/// Ties receive average ranks; ρ is the Pearson correlation of the rank
/// vectors. A constant input has no defined rank ordering and is an error.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<SpearmanResult, MetricsError> {
    spearman_with(x, y, PValueMode::TApproximation)
}

pub fn spearman_with(
    x: &[f64],
    y: &[f64],
    mode: PValueMode,
) -> Result<SpearmanResult, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch { x: x.len(), y: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(MetricsError::TooFewSamples { n, need: 3 });
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let rho = pearson(&rx, &ry)?;
    let p_value = match mode {
        PValueMode::TApproximation => t_approx_p(rho, n),
        PValueMode::Permutation { iterations, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = ry.clone();
            let mut at_least = 0usize;
            for _ in 0..iterations {
                shuffle(&mut shuffled, &mut rng);
                let r = pearson(&rx, &shuffled)?;
                if r.abs() >= rho.abs() - 1e-12 {
                    at_least += 1;
                }
            }
            (at_least + 1) as f64 / (iterations + 1) as f64
        }
    };
    Ok(SpearmanResult { rho, p_value })
}

fn t_approx_p(rho: f64, n: usize) -> f64 {
    let denom = 1.0 - rho * rho;
    if denom <= 1e-15 {
        return 0.0;
    }
    let t = rho * ((n as f64 - 2.0) / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n as f64 - 2.0)
        .expect("n ≥ 3 gives a valid degrees-of-freedom");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

fn shuffle(values: &mut [f64], rng: &mut ChaCha8Rng) {
    use rand::seq::SliceRandom;
    values.shuffle(rng);
}

/// Average ranks (1-based); tied values share the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j (0-based) share the average of ranks i+1..=j+1
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(MetricsError::ConstantSequence);
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// Empirical country distribution: non-negative counts per country name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryDistribution {
    counts: BTreeMap<String, u64>,
    total: u64,
}

impl CountryDistribution {
    pub fn from_counts(counts: BTreeMap<String, u64>) -> Self {
        let total = counts.values().sum();
        CountryDistribution { counts, total }
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for (name, c) in pairs {
            *counts.entry(name.into()).or_default() += c;
        }
        Self::from_counts(counts)
    }

    pub fn counts(&self) -> &BTreeMap<String, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn probability(&self, country: &str) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        *self.counts.get(country).unwrap_or(&0) as f64 / self.total as f64
    }
}

/// Which countries a dataset over- and under-represents relative to a
/// reference distribution, at ratio threshold `r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MisalignmentReport {
    pub r: f64,
    /// dataset share ÷ reference share, per reference country; countries
    /// absent from the reference have no ratio (`None`).
    pub ratios: BTreeMap<String, Option<f64>>,
    pub over: BTreeSet<String>,
    pub under: BTreeSet<String>,
    /// Countries with dataset mass but no reference mass: excluded from the
    /// flag sets, listed so they are never silently dropped.
    pub dataset_only: BTreeSet<String>,
    pub reference_country_count: usize,
    pub percent_over: f64,
    pub percent_under: f64,
}

/// Flag countries appearing at least `r` times more (over) or less than
/// 1/`r` times as often (under) in the dataset as in the reference.
///
/// Ratios compare probabilities, so scaling all counts on either side by a
/// positive constant changes nothing. A dataset country the reference has
/// never seen yields no ratio; it is reported in `dataset_only` instead.
pub fn misalignment(
    dataset: &CountryDistribution,
    reference: &CountryDistribution,
    r: f64,
) -> Result<MisalignmentReport, MetricsError> {
    if !(r > 1.0) {
        return Err(MetricsError::InvalidThreshold { r });
    }
    if dataset.total() == 0 || reference.total() == 0 {
        return Err(MetricsError::EmptyDistribution);
    }
    let mut ratios = BTreeMap::new();
    let mut over = BTreeSet::new();
    let mut under = BTreeSet::new();
    let mut reference_country_count = 0usize;
    for (country, &ref_count) in reference.counts() {
        if ref_count == 0 {
            continue;
        }
        reference_country_count += 1;
        let ratio = dataset.probability(country) / reference.probability(country);
        ratios.insert(country.clone(), Some(ratio));
        if ratio >= r {
            over.insert(country.clone());
        } else if ratio < 1.0 / r {
            under.insert(country.clone());
        }
    }
    let mut dataset_only = BTreeSet::new();
    for (country, &count) in dataset.counts() {
        if count > 0 && !ratios.contains_key(country) {
            ratios.insert(country.clone(), None);
            dataset_only.insert(country.clone());
        }
    }
    let denom = reference_country_count as f64;
    Ok(MisalignmentReport {
        r,
        ratios,
        percent_over: 100.0 * over.len() as f64 / denom,
        percent_under: 100.0 * under.len() as f64 / denom,
        over,
        under,
        dataset_only,
        reference_country_count,
    })
}

/// Manifold precision and recall between a real and a generated set.
///
/// Each real point's neighborhood is the ball reaching its k-th nearest
/// neighbor within the real set (itself excluded). Precision is the
/// fraction of generated points inside some real neighborhood; recall swaps
/// the roles. By construction `precision(a, b) == recall(b, a)`.
pub fn knn_precision_recall(
    real: &EmbeddingSet,
    generated: &EmbeddingSet,
    k: usize,
) -> Result<(f64, f64), MetricsError> {
    if real.dim() != generated.dim() {
        return Err(MetricsError::DimensionMismatch {
            left: real.dim(),
            right: generated.dim(),
        });
    }
    if k == 0 || real.len() <= k {
        return Err(MetricsError::InvalidK { k, n: real.len() });
    }
    if generated.len() <= k {
        return Err(MetricsError::InvalidK { k, n: generated.len() });
    }
    let precision = covered_fraction(generated, real, k);
    let recall = covered_fraction(real, generated, k);
    Ok((precision, recall))
}

/// Fraction of `queries` covered by the union of k-NN balls around `support`.
fn covered_fraction(queries: &EmbeddingSet, support: &EmbeddingSet, k: usize) -> f64 {
    let radii = knn_radii(support, k);
    let mut covered = 0usize;
    for q in queries.rows() {
        let inside = support
            .rows()
            .zip(&radii)
            .any(|(s, &radius)| euclidean(q, s) <= radius);
        if inside {
            covered += 1;
        }
    }
    covered as f64 / queries.len() as f64
}

/// Distance from each point to its k-th nearest neighbor in the same set,
/// self excluded.
fn knn_radii(set: &EmbeddingSet, k: usize) -> Vec<f64> {
    let n = set.len();
    let mut radii = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n - 1);
    for i in 0..n {
        dists.clear();
        for j in 0..n {
            if i != j {
                dists.push(euclidean(set.row(i), set.row(j)));
            }
        }
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii.push(dists[k - 1]);
    }
    radii
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Diversity of the real set relative to the generated set:
/// `vendi_score(real) / vendi_score(generated)`.
pub fn diversity_ratio(
    real: &EmbeddingSet,
    generated: &EmbeddingSet,
) -> Result<f64, MetricsError> {
    Ok(vendi_score(real)? / vendi_score(generated)?)
}
