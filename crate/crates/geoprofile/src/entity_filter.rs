//! Entity-presence filtering: decide whether the named entity is actually
//! visible in an image, so captions whose image does not show it can be
//! dropped before profiling.
//!
//! Two halves live here. The annotation half aggregates crowd votes
//! (majority label, pairwise agreement, Fleiss' κ) and builds geo-stratified
//! annotation sets. The classifier half trains a linear hinge-loss model on
//! L2-normalized image embeddings and applies it. Embeddings are consumed,
//! never computed — the contract is over vectors.

use crate::gazetteer::CanonicalCountry;
use crate::metrics::EmbeddingSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("annotation i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("annotation csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("annotation file: {0}")]
    Format(String),
    #[error("item {item} has no votes")]
    AllMissing { item: String },
    #[error("duplicate vote for record {record} by rater {rater}")]
    DuplicateVote { record: String, rater: String },
    #[error("need at least 2 raters, got {m}")]
    TooFewRaters { m: usize },
    #[error("no rater ever voted class {class}; agreement undefined")]
    ClassNeverVoted { class: u8 },
    #[error("Fleiss' kappa requires complete votes; item {item} has missing votes")]
    IncompleteVotes { item: String },
    #[error("kappa undefined: chance agreement is 1 but observed agreement is not")]
    UndefinedKappa,
    #[error("training needs both classes present")]
    SingleClass,
    #[error("feature dimension mismatch: model {expected}, input {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label count {labels} does not match feature count {features}")]
    LengthMismatch { labels: usize, features: usize },
    #[error("embedding row {row} out of bounds for a set of {len}")]
    RowOutOfBounds { row: usize, len: usize },
    #[error("model file: {0}")]
    ModelFormat(String),
}

/// Crowd votes: one row per item, one column per rater. `Some(true)` is a
/// "present" vote, `Some(false)` "absent", `None` a missing vote.
#[derive(Debug, Clone)]
pub struct AnnotationMatrix {
    items: Vec<String>,
    raters: Vec<String>,
    votes: Vec<Option<bool>>, // items × raters, row-major
}

impl AnnotationMatrix {
    /// Assemble a matrix, checking every item has at least one vote.
    pub fn from_votes(
        items: Vec<String>,
        raters: Vec<String>,
        votes: Vec<Option<bool>>,
    ) -> Result<Self, FilterError> {
        if votes.len() != items.len() * raters.len() {
            return Err(FilterError::Format(format!(
                "{} votes for {} items × {} raters",
                votes.len(),
                items.len(),
                raters.len()
            )));
        }
        let m = AnnotationMatrix { items, raters, votes };
        for (i, item) in m.items.iter().enumerate() {
            if m.row(i).iter().all(Option::is_none) {
                return Err(FilterError::AllMissing { item: item.clone() });
            }
        }
        Ok(m)
    }

    /// Read `record_id,rater_id,vote` rows (vote ∈ {0, 1}). Items and
    /// raters are ordered lexicographically so the matrix layout does not
    /// depend on row order; combinations never voted on stay missing.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, FilterError> {
        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut triples: Vec<(String, String, bool)> = Vec::new();
        for record in csv.records() {
            let record = record?;
            if record.len() != 3 {
                return Err(FilterError::Format(format!(
                    "expected 3 columns, got {}",
                    record.len()
                )));
            }
            let vote = match record[2].trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(FilterError::Format(format!(
                        "vote must be 0 or 1, got {other:?}"
                    )))
                }
            };
            triples.push((record[0].trim().to_string(), record[1].trim().to_string(), vote));
        }
        let mut items: Vec<String> = triples.iter().map(|t| t.0.clone()).collect();
        items.sort();
        items.dedup();
        let mut raters: Vec<String> = triples.iter().map(|t| t.1.clone()).collect();
        raters.sort();
        raters.dedup();
        let item_of: BTreeMap<&str, usize> =
            items.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let rater_of: BTreeMap<&str, usize> =
            raters.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let mut votes = vec![None; items.len() * raters.len()];
        for (record, rater, vote) in &triples {
            let idx = item_of[record.as_str()] * raters.len() + rater_of[rater.as_str()];
            if votes[idx].is_some() {
                return Err(FilterError::DuplicateVote {
                    record: record.clone(),
                    rater: rater.clone(),
                });
            }
            votes[idx] = Some(*vote);
        }
        Self::from_votes(items, raters, votes)
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_raters(&self) -> usize {
        self.raters.len()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn raters(&self) -> &[String] {
        &self.raters
    }

    pub fn row(&self, item: usize) -> &[Option<bool>] {
        let m = self.raters.len();
        &self.votes[item * m..(item + 1) * m]
    }
}

/// Majority of the non-missing votes; an exact tie is conservatively
/// "absent", keeping only confidently relevant images.
pub fn majority_label(row: &[Option<bool>]) -> Result<bool, FilterError> {
    let present = row.iter().filter(|v| **v == Some(true)).count();
    let absent = row.iter().filter(|v| **v == Some(false)).count();
    if present + absent == 0 {
        return Err(FilterError::AllMissing { item: String::from("<row>") });
    }
    Ok(present > absent)
}

/// Mean over ordered rater pairs (i, j) of 100·A/N, where A counts items
/// both raters vote `class` and N counts items rater j votes `class`.
/// Pairs where j never votes the class are excluded; if nobody ever votes
/// it, the agreement is undefined.
pub fn pairwise_agreement(
    matrix: &AnnotationMatrix,
    class_present: bool,
) -> Result<f64, FilterError> {
    let m = matrix.n_raters();
    if m < 2 {
        return Err(FilterError::TooFewRaters { m });
    }
    let want = Some(class_present);
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let mut both = 0usize;
            let mut j_votes = 0usize;
            for item in 0..matrix.n_items() {
                let row = matrix.row(item);
                if row[j] == want {
                    j_votes += 1;
                    if row[i] == want {
                        both += 1;
                    }
                }
            }
            if j_votes > 0 {
                sum += 100.0 * both as f64 / j_votes as f64;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(FilterError::ClassNeverVoted { class: class_present as u8 });
    }
    Ok(sum / pairs as f64)
}

/// Mean of the per-class pairwise agreements ("mean agreement over both
/// classes"). Undefined if either class was never voted.
pub fn overall_agreement(matrix: &AnnotationMatrix) -> Result<f64, FilterError> {
    Ok((pairwise_agreement(matrix, true)? + pairwise_agreement(matrix, false)?) / 2.0)
}

/// Fleiss' κ over the two vote categories. Requires a complete matrix (the
/// statistic assumes a fixed rater count per item).
pub fn fleiss_kappa(matrix: &AnnotationMatrix) -> Result<f64, FilterError> {
    let m = matrix.n_raters();
    if m < 2 {
        return Err(FilterError::TooFewRaters { m });
    }
    let n = matrix.n_items();
    let mut p_bar = 0.0;
    let mut present_votes = 0usize;
    for item in 0..n {
        let row = matrix.row(item);
        let present = row.iter().filter(|v| **v == Some(true)).count();
        let absent = row.iter().filter(|v| **v == Some(false)).count();
        if present + absent != m {
            return Err(FilterError::IncompleteVotes { item: matrix.items[item].clone() });
        }
        present_votes += present;
        let agree = (present * present.saturating_sub(1) + absent * absent.saturating_sub(1))
            as f64
            / (m * (m - 1)) as f64;
        p_bar += agree;
    }
    p_bar /= n as f64;
    let p1 = present_votes as f64 / (n * m) as f64;
    let p0 = 1.0 - p1;
    let pe = p1 * p1 + p0 * p0;
    if (1.0 - pe).abs() < 1e-15 {
        // Every vote fell in one class; agreement is perfect when observed
        // agreement is too, otherwise the statistic has no value.
        return if (1.0 - p_bar).abs() < 1e-15 {
            Ok(1.0)
        } else {
            Err(FilterError::UndefinedKappa)
        };
    }
    Ok((p_bar - pe) / (1.0 - pe))
}

/// Indices of a deterministic stratified sample: records are bucketed by
/// (UN region, income group) and each non-empty cell contributes
/// min(`n_per_cell`, cell size) records, drawn with a seed derived from the
/// global seed and the cell key, so adding one cell never reshuffles the
/// others.
pub fn stratified_sample(
    countries: &[CanonicalCountry],
    n_per_cell: usize,
    seed: u64,
) -> Vec<usize> {
    let mut cells: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
    for (idx, c) in countries.iter().enumerate() {
        cells
            .entry((c.un_region.clone(), c.income_group.label().to_string()))
            .or_default()
            .push(idx);
    }
    let mut picked = Vec::new();
    for ((region, income), members) in &cells {
        let take = n_per_cell.min(members.len());
        if take == 0 {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, region, income));
        let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, members.len(), take)
            .into_iter()
            .map(|i| members[i])
            .collect();
        chosen.sort_unstable();
        picked.extend(chosen);
    }
    picked.sort_unstable();
    picked
}

fn cell_seed(seed: u64, region: &str, income: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(region.as_bytes());
    h.update([0x1f]);
    h.update(income.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is long enough"))
}

pub const MODEL_MAGIC: &[u8; 4] = b"GPSV";
pub const MODEL_VERSION: u32 = 1;

/// A trained linear presence classifier: predicts "present" when
/// `w·x + b ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub tolerance: f64,
    pub iterations: u64,
}

impl ClassifierModel {
    pub fn feature_dim(&self) -> usize {
        self.weights.len()
    }

    /// Versioned binary layout: `GPSV | version u32 | d u32 | w f64×d |
    /// b f64 | C f64 | tolerance f64 | iterations u64`, little-endian.
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        w.write_all(&(self.weights.len() as u32).to_le_bytes())?;
        for v in &self.weights {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.bias.to_le_bytes())?;
        w.write_all(&self.c.to_le_bytes())?;
        w.write_all(&self.tolerance.to_le_bytes())?;
        w.write_all(&self.iterations.to_le_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, FilterError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(FilterError::ModelFormat(format!(
                "bad magic {magic:02x?}, expected {MODEL_MAGIC:02x?}"
            )));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != MODEL_VERSION {
            return Err(FilterError::ModelFormat(format!(
                "unsupported version {version} (supported: {MODEL_VERSION})"
            )));
        }
        r.read_exact(&mut b4)?;
        let d = u32::from_le_bytes(b4) as usize;
        let mut weights = Vec::with_capacity(d);
        for _ in 0..d {
            r.read_exact(&mut b8)?;
            weights.push(f64::from_le_bytes(b8));
        }
        r.read_exact(&mut b8)?;
        let bias = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let c = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let tolerance = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let iterations = u64::from_le_bytes(b8);
        Ok(ClassifierModel { weights, bias, c, tolerance, iterations })
    }
}

/// Convergence tolerance for the pairwise-optimization stopping rule.
pub const TRAIN_TOLERANCE: f64 = 1e-4;
/// Hard cap on optimization steps; separable inputs converge far earlier.
const TRAIN_MAX_ITERATIONS: u64 = 100_000;

/// Train a soft-margin linear classifier minimizing
/// `(1/2)‖w‖² + C·Σ hinge(yᵢ(w·xᵢ + b))`.
///
/// The dual is solved by repeatedly optimizing the maximally violating pair
/// of coefficients until the violation gap falls below the tolerance. All
/// tie-breaks take the lowest index, so training is deterministic.
pub fn train_classifier(
    features: &EmbeddingSet,
    labels: &[bool],
    c: f64,
) -> Result<ClassifierModel, FilterError> {
    let n = features.len();
    let d = features.dim();
    if labels.len() != n {
        return Err(FilterError::LengthMismatch { labels: labels.len(), features: n });
    }
    if !labels.contains(&true) || !labels.contains(&false) {
        return Err(FilterError::SingleClass);
    }
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let mut alpha = vec![0.0f64; n];
    let mut w = vec![0.0f64; d];
    let mut scores = vec![0.0f64; n]; // w·xᵢ, kept in sync with w
    let mut iterations = 0u64;
    let (mut m_val, mut big_m_val);
    loop {
        // Violation terms: F_t = y_t − w·x_t. The pair with the largest gap
        // between the "can increase" and "can decrease" sides is optimized.
        let mut i_up: Option<(usize, f64)> = None;
        let mut j_low: Option<(usize, f64)> = None;
        for t in 0..n {
            let f_t = y[t] - scores[t];
            let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if up && i_up.map_or(true, |(_, best)| f_t > best) {
                i_up = Some((t, f_t));
            }
            if low && j_low.map_or(true, |(_, best)| f_t < best) {
                j_low = Some((t, f_t));
            }
        }
        let (Some((i, f_i)), Some((j, f_j))) = (i_up, j_low) else {
            // Every coefficient is pinned to a box edge on one side; the
            // bias is bracketed by the violation terms over all points.
            let max_f = (0..n).map(|t| y[t] - scores[t]).fold(f64::MIN, f64::max);
            let min_f = (0..n).map(|t| y[t] - scores[t]).fold(f64::MAX, f64::min);
            m_val = max_f;
            big_m_val = min_f;
            break;
        };
        m_val = f_i;
        big_m_val = f_j;
        if m_val - big_m_val <= TRAIN_TOLERANCE || iterations >= TRAIN_MAX_ITERATIONS {
            break;
        }
        iterations += 1;

        let xi = features.row(i);
        let xj = features.row(j);
        let eta: f64 = xi
            .iter()
            .zip(xj)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .max(1e-12);
        // Move α_i by y_i·δ and α_j by −y_j·δ, clipped to the [0, C] box.
        let mut delta = (f_i - f_j) / eta;
        let (lo_i, hi_i) =
            if y[i] > 0.0 { (-alpha[i], c - alpha[i]) } else { (alpha[i] - c, alpha[i]) };
        let (lo_j, hi_j) =
            if y[j] > 0.0 { (alpha[j] - c, alpha[j]) } else { (-alpha[j], c - alpha[j]) };
        delta = delta.clamp(lo_i.max(lo_j), hi_i.min(hi_j));
        alpha[i] += y[i] * delta;
        alpha[j] -= y[j] * delta;
        for (idx, (a, b)) in xi.iter().zip(xj).enumerate() {
            w[idx] += delta * (a - b);
        }
        for t in 0..n {
            scores[t] = dot(&w, features.row(t));
        }
    }
    let bias = (m_val + big_m_val) / 2.0;
    Ok(ClassifierModel { weights: w, bias, c, tolerance: TRAIN_TOLERANCE, iterations })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `true` ("present") when the decision value `w·x + b` is non-negative.
pub fn predict_presence(model: &ClassifierModel, feature: &[f64]) -> Result<bool, FilterError> {
    if feature.len() != model.feature_dim() {
        return Err(FilterError::DimensionMismatch {
            expected: model.feature_dim(),
            got: feature.len(),
        });
    }
    Ok(dot(&model.weights, feature) + model.bias >= 0.0)
}

/// F1 of the positive class: `2·TP / (2·TP + FP + FN)`. When neither
/// predictions nor gold contain a positive, the agreement is vacuous and
/// scored 1.0.
pub fn f1_score(pred: &[bool], gold: &[bool]) -> Result<f64, FilterError> {
    if pred.len() != gold.len() {
        return Err(FilterError::LengthMismatch { labels: gold.len(), features: pred.len() });
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &g) in pred.iter().zip(gold) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / denom as f64)
}

/// Outcome of running the presence classifier over a record set. Indices
/// refer to the input order; records without an embedding are never
/// classified.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterOutcome {
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    pub no_embedding: Vec<usize>,
}

/// Route each record by classifier verdict on its embedding row;
/// `embedding_rows[i] = None` sends record i to the `no_embedding` bucket.
pub fn filter_by_presence(
    model: &ClassifierModel,
    embeddings: &EmbeddingSet,
    embedding_rows: &[Option<usize>],
) -> Result<FilterOutcome, FilterError> {
    let mut out = FilterOutcome::default();
    for (i, row) in embedding_rows.iter().enumerate() {
        match row {
            None => out.no_embedding.push(i),
            Some(r) if *r >= embeddings.len() => {
                return Err(FilterError::RowOutOfBounds { row: *r, len: embeddings.len() })
            }
            Some(r) => {
                if predict_presence(model, embeddings.row(*r))? {
                    out.kept.push(i);
                } else {
                    out.dropped.push(i);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gazetteer::CountryTable;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn matrix(rows: &[&[Option<bool>]]) -> AnnotationMatrix {
        let m = rows[0].len();
        AnnotationMatrix::from_votes(
            (0..rows.len()).map(|i| format!("item{i}")).collect(),
            (0..m).map(|j| format!("rater{j}")).collect(),
            rows.concat(),
        )
        .unwrap()
    }

    const P: Option<bool> = Some(true);
    const A: Option<bool> = Some(false);

    /// 651 items × 3 raters engineered to land the published agreement
    /// marginals: 265 unanimous-present, 23 of each two-present split,
    /// 24 of each one-present split, 245 unanimous-absent.
    fn house_fixture() -> AnnotationMatrix {
        let mut rows: Vec<&[Option<bool>]> = Vec::new();
        for _ in 0..265 {
            rows.push(&[P, P, P]);
        }
        for _ in 0..23 {
            rows.push(&[P, P, A]);
        }
        for _ in 0..23 {
            rows.push(&[P, A, P]);
        }
        for _ in 0..23 {
            rows.push(&[A, P, P]);
        }
        for _ in 0..24 {
            rows.push(&[P, A, A]);
        }
        for _ in 0..24 {
            rows.push(&[A, P, A]);
        }
        for _ in 0..24 {
            rows.push(&[A, A, P]);
        }
        for _ in 0..245 {
            rows.push(&[A, A, A]);
        }
        assert_eq!(rows.len(), 651);
        matrix(&rows)
    }

    #[test]
    fn majority_basic_and_tie_rule() {
        assert!(majority_label(&[P, P, A]).unwrap());
        assert!(!majority_label(&[A, A, P]).unwrap());
        assert!(!majority_label(&[P, A]).unwrap(), "exact tie is absent");
        assert!(!majority_label(&[P, A, None]).unwrap());
        assert!(matches!(
            majority_label(&[None, None]),
            Err(FilterError::AllMissing { .. })
        ));
    }

    #[test]
    fn csv_parsing_orders_and_validates() {
        let csv = "record_id,rater_id,vote\nimgB,r2,0\nimgA,r1,1\nimgB,r1,1\nimgA,r2,1\n";
        let m = AnnotationMatrix::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(m.items(), ["imgA", "imgB"]);
        assert_eq!(m.raters(), ["r1", "r2"]);
        assert_eq!(m.row(0), [P, P]);
        assert_eq!(m.row(1), [P, A]);

        let dup = "record_id,rater_id,vote\nx,r,1\nx,r,0\n";
        assert!(matches!(
            AnnotationMatrix::from_csv(dup.as_bytes()),
            Err(FilterError::DuplicateVote { .. })
        ));
        let bad = "record_id,rater_id,vote\nx,r,2\n";
        assert!(matches!(
            AnnotationMatrix::from_csv(bad.as_bytes()),
            Err(FilterError::Format(_))
        ));
    }

    #[test]
    fn agreement_identical_raters_is_100() {
        let m = matrix(&[&[P, P], &[A, A], &[P, P]]);
        assert_relative_eq!(pairwise_agreement(&m, true).unwrap(), 100.0);
        assert_relative_eq!(pairwise_agreement(&m, false).unwrap(), 100.0);
        assert_relative_eq!(overall_agreement(&m).unwrap(), 100.0);
    }

    #[test]
    fn agreement_hand_case_is_75() {
        // r1=(1,1,0,0), r2=(1,0,0,0), class present: pair (1,2) gives
        // 1/1 = 100, pair (2,1) gives 1/2 = 50, mean 75.
        let m = matrix(&[&[P, P], &[P, A], &[A, A], &[A, A]]);
        assert_relative_eq!(pairwise_agreement(&m, true).unwrap(), 75.0, epsilon = 1e-12);
    }

    #[test]
    fn agreement_house_fixture_reproduces_published_row() {
        let m = house_fixture();
        // Closed forms: every ordered pair shares the same counts by
        // symmetry of the fixture.
        assert_relative_eq!(
            pairwise_agreement(&m, true).unwrap(),
            100.0 * 288.0 / 335.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            pairwise_agreement(&m, false).unwrap(),
            100.0 * 269.0 / 316.0,
            epsilon = 1e-12
        );
        let overall = overall_agreement(&m).unwrap();
        assert_relative_eq!(
            overall,
            (100.0 * 288.0 / 335.0 + 100.0 * 269.0 / 316.0) / 2.0,
            epsilon = 1e-12
        );
        assert!((overall - 85.6).abs() <= 0.1, "overall = {overall}");
    }

    #[test]
    fn agreement_undefined_when_class_never_voted() {
        let m = matrix(&[&[A, A], &[A, A]]);
        assert!(matches!(
            pairwise_agreement(&m, true),
            Err(FilterError::ClassNeverVoted { class: 1 })
        ));
    }

    #[test]
    fn kappa_perfect_mixed_agreement_is_one() {
        let m = matrix(&[&[P, P, P], &[A, A, A], &[P, P, P]]);
        assert_relative_eq!(fleiss_kappa(&m).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kappa_house_fixture_matches_direct_formula() {
        let m = house_fixture();
        // Direct evaluation: P̄ from the pattern counts, chance agreement
        // from the vote marginals.
        let p_bar = (510.0 + 141.0 / 3.0) / 651.0;
        let p1 = 335.0 / 651.0;
        let pe = p1 * p1 + (1.0 - p1) * (1.0 - p1);
        let expected = (p_bar - pe) / (1.0 - pe);
        let got = fleiss_kappa(&m).unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-12);
        assert!((got - 0.71).abs() < 0.005, "κ = {got}");
    }

    #[test]
    fn kappa_ten_item_hand_table() {
        // Brute-force spreadsheet computation for a small mixed table.
        let rows: Vec<&[Option<bool>]> = vec![
            &[P, P, P],
            &[P, P, A],
            &[A, A, A],
            &[P, A, A],
            &[A, A, P],
            &[P, P, P],
            &[A, A, A],
            &[A, P, A],
            &[P, P, A],
            &[A, A, A],
        ];
        let m = matrix(&rows);
        let mut p_bar = 0.0;
        let mut ones = 0.0;
        for r in &rows {
            let c1 = r.iter().filter(|v| **v == P).count() as f64;
            let c0 = 3.0 - c1;
            ones += c1;
            p_bar += (c1 * (c1 - 1.0) + c0 * (c0 - 1.0)) / 6.0;
        }
        p_bar /= 10.0;
        let p1 = ones / 30.0;
        let pe = p1 * p1 + (1.0 - p1) * (1.0 - p1);
        assert_relative_eq!(
            fleiss_kappa(&m).unwrap(),
            (p_bar - pe) / (1.0 - pe),
            epsilon = 1e-12
        );
    }

    #[test]
    fn kappa_near_zero_for_independent_uniform_votes() {
        let mut rng = ChaCha8Rng::seed_from_u64(424242);
        let rows: Vec<Vec<Option<bool>>> = (0..10_000)
            .map(|_| (0..3).map(|_| Some(rng.gen_bool(0.5))).collect())
            .collect();
        let refs: Vec<&[Option<bool>]> = rows.iter().map(Vec::as_slice).collect();
        let kappa = fleiss_kappa(&matrix(&refs)).unwrap();
        assert!(kappa.abs() < 0.05, "κ = {kappa}");
    }

    #[test]
    fn kappa_invariant_to_item_and_rater_order() {
        let rows: Vec<&[Option<bool>]> =
            vec![&[P, P, A], &[A, A, A], &[P, A, P], &[A, P, P], &[P, P, P]];
        let base = fleiss_kappa(&matrix(&rows)).unwrap();
        let mut shuffled = rows.clone();
        shuffled.reverse();
        assert_relative_eq!(fleiss_kappa(&matrix(&shuffled)).unwrap(), base, epsilon = 1e-12);
        let swapped: Vec<Vec<Option<bool>>> =
            rows.iter().map(|r| vec![r[2], r[0], r[1]]).collect();
        let refs: Vec<&[Option<bool>]> = swapped.iter().map(Vec::as_slice).collect();
        assert_relative_eq!(fleiss_kappa(&matrix(&refs)).unwrap(), base, epsilon = 1e-12);
    }

    #[test]
    fn kappa_rejects_missing_votes_and_accepts_unanimous_single_class() {
        let m = matrix(&[&[P, None, P], &[A, A, A]]);
        assert!(matches!(fleiss_kappa(&m), Err(FilterError::IncompleteVotes { .. })));
        let all_present = matrix(&[&[P, P, P], &[P, P, P]]);
        assert_relative_eq!(fleiss_kappa(&all_present).unwrap(), 1.0);
    }

    fn country(iso2: &str) -> CanonicalCountry {
        CountryTable::builtin()
            .get_by_iso2(iso2)
            .unwrap_or_else(|| panic!("fixture country {iso2} missing"))
            .clone()
    }

    #[test]
    fn stratified_min_rule_and_determinism() {
        // One cell of 10: take 5.
        let one_cell: Vec<CanonicalCountry> = vec![country("JP"); 10];
        let got = stratified_sample(&one_cell, 5, 7);
        assert_eq!(got.len(), 5);
        assert!(got.iter().all(|&i| i < 10));

        // Cells of sizes 2, 5, 9 with n_per_cell 4 yield 2 + 4 + 4.
        let mut records = Vec::new();
        records.extend(vec![country("JP"); 2]);
        records.extend(vec![country("BR"); 5]);
        records.extend(vec![country("DE"); 9]);
        let got = stratified_sample(&records, 4, 7);
        assert_eq!(got.len(), 10);
        let jp = got.iter().filter(|&&i| i < 2).count();
        let br = got.iter().filter(|&&i| (2..7).contains(&i)).count();
        let de = got.iter().filter(|&&i| i >= 7).count();
        assert_eq!((jp, br, de), (2, 4, 4));

        assert_eq!(stratified_sample(&records, 4, 7), got);
        // A different seed draws a different subset from the size-9 cell.
        assert_ne!(stratified_sample(&records, 4, 8), got);
    }

    #[test]
    fn stratified_cells_are_independent() {
        let mut records = Vec::new();
        records.extend(vec![country("JP"); 6]);
        let before = stratified_sample(&records, 3, 11);
        records.extend(vec![country("BR"); 6]);
        let after = stratified_sample(&records, 3, 11);
        let jp_after: Vec<usize> = after.iter().copied().filter(|&i| i < 6).collect();
        assert_eq!(before, jp_after, "adding a cell must not reshuffle existing ones");
    }

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    /// Two jittered clusters on the unit sphere around ±center.
    fn blobs(n_per_class: usize, d: usize, seed: u64) -> (EmbeddingSet, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for class in [true, false] {
            let sign = if class { 1.0 } else { -1.0 };
            for _ in 0..n_per_class {
                let mut v: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.3..0.3)).collect();
                v[0] += sign * 1.0;
                rows.push(unit(v));
                labels.push(class);
            }
        }
        (EmbeddingSet::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn antipodal_pair_trains_to_perfect_f1() {
        let set =
            EmbeddingSet::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let model = train_classifier(&set, &[true, false], 1.0).unwrap();
        let pred: Vec<bool> =
            set.rows().map(|r| predict_presence(&model, r).unwrap()).collect();
        assert_relative_eq!(f1_score(&pred, &[true, false]).unwrap(), 1.0);
    }

    #[test]
    fn separable_blobs_reach_high_held_out_f1() {
        let (train_set, train_labels) = blobs(100, 8, 21);
        let (test_set, test_labels) = blobs(50, 8, 22);
        let model = train_classifier(&train_set, &train_labels, 1.0).unwrap();
        let pred: Vec<bool> =
            test_set.rows().map(|r| predict_presence(&model, r).unwrap()).collect();
        let f1 = f1_score(&pred, &test_labels).unwrap();
        assert!(f1 >= 0.95, "held-out F1 = {f1}");
    }

    #[test]
    fn xor_arrangement_cannot_be_separated() {
        let set = EmbeddingSet::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
        ])
        .unwrap();
        let labels = [true, false, true, false];
        let model = train_classifier(&set, &labels, 1.0).unwrap();
        let pred: Vec<bool> =
            set.rows().map(|r| predict_presence(&model, r).unwrap()).collect();
        assert!(f1_score(&pred, &labels).unwrap() < 1.0);
    }

    #[test]
    fn training_rejects_single_class_and_length_mismatch() {
        let set = EmbeddingSet::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            train_classifier(&set, &[true, true], 1.0),
            Err(FilterError::SingleClass)
        ));
        assert!(matches!(
            train_classifier(&set, &[true], 1.0),
            Err(FilterError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn c_scaling_preserves_training_labels_on_separable_data() {
        let (set, labels) = blobs(40, 4, 33);
        let base: Vec<bool> = {
            let model = train_classifier(&set, &labels, 1.0).unwrap();
            set.rows().map(|r| predict_presence(&model, r).unwrap()).collect()
        };
        for c in [2.0, 10.0, 100.0] {
            let model = train_classifier(&set, &labels, c).unwrap();
            let pred: Vec<bool> =
                set.rows().map(|r| predict_presence(&model, r).unwrap()).collect();
            assert_eq!(pred, base, "C = {c}");
        }
    }

    #[test]
    fn prediction_sign_rules() {
        let model = ClassifierModel {
            weights: vec![0.0, 0.0],
            bias: 0.5,
            c: 1.0,
            tolerance: TRAIN_TOLERANCE,
            iterations: 0,
        };
        assert!(predict_presence(&model, &[0.0, 0.0]).unwrap(), "sign of bias");
        assert!(matches!(
            predict_presence(&model, &[0.0, 0.0, 0.0]),
            Err(FilterError::DimensionMismatch { .. })
        ));
        // Positive scaling of (w, b) never flips a decision.
        let model = ClassifierModel {
            weights: vec![0.4, -0.2],
            bias: -0.1,
            c: 1.0,
            tolerance: TRAIN_TOLERANCE,
            iterations: 0,
        };
        let scaled = ClassifierModel {
            weights: model.weights.iter().map(|w| w * 37.0).collect(),
            bias: model.bias * 37.0,
            ..model.clone()
        };
        for probe in [[1.0, 0.0], [0.0, 1.0], [-0.6, 0.8], [0.3, 0.3]] {
            assert_eq!(
                predict_presence(&model, &probe).unwrap(),
                predict_presence(&scaled, &probe).unwrap()
            );
        }
    }

    #[test]
    fn f1_closed_forms() {
        assert_relative_eq!(
            f1_score(&[true, false, true], &[true, false, true]).unwrap(),
            1.0
        );
        assert_relative_eq!(
            f1_score(&[false, false], &[true, false]).unwrap(),
            0.0
        );
        // TP=8, FP=2, FN=2 → 2·8/(16+2+2) = 0.8.
        let mut pred = vec![true; 10];
        pred.extend(vec![false; 2]);
        let mut gold = vec![true; 8];
        gold.extend(vec![false; 2]);
        gold.extend(vec![true; 2]);
        assert_relative_eq!(f1_score(&pred, &gold).unwrap(), 0.8, epsilon = 1e-12);
        // No positives anywhere: vacuously perfect.
        assert_relative_eq!(f1_score(&[false, false], &[false, false]).unwrap(), 1.0);
    }

    #[test]
    fn model_binary_round_trip_and_rejection() {
        let model = ClassifierModel {
            weights: vec![0.25, -1.5, 3.0],
            bias: 0.125,
            c: 2.0,
            tolerance: TRAIN_TOLERANCE,
            iterations: 42,
        };
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let back = ClassifierModel::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, model);

        let mut bad = buf.clone();
        bad[0] = b'Z';
        assert!(matches!(
            ClassifierModel::read_from(&mut bad.as_slice()),
            Err(FilterError::ModelFormat(_))
        ));
    }

    #[test]
    fn filter_routes_missing_embeddings_without_classifying() {
        let (set, labels) = blobs(10, 4, 44);
        let model = train_classifier(&set, &labels, 1.0).unwrap();
        let rows = [Some(0), None, Some(10), Some(3), None];
        let out = filter_by_presence(&model, &set, &rows).unwrap();
        assert_eq!(out.no_embedding, vec![1, 4]);
        assert_eq!(out.kept.len() + out.dropped.len() + out.no_embedding.len(), rows.len());
        // Positive-class rows (first 10) classify as kept on this easy data.
        assert!(out.kept.contains(&0));
        let oob = [Some(usize::MAX)];
        assert!(matches!(
            filter_by_presence(&model, &set, &oob),
            Err(FilterError::RowOutOfBounds { .. })
        ));
    }

    proptest! {
        #[test]
        fn majority_is_rater_permutation_invariant(
            votes in prop::collection::vec(prop::option::of(any::<bool>()), 1..9),
            seed in 0u64..1000,
        ) {
            prop_assume!(votes.iter().any(Option::is_some));
            let base = majority_label(&votes).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = votes.clone();
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut rng);
            prop_assert_eq!(majority_label(&shuffled).unwrap(), base);
        }

        #[test]
        fn stratified_sample_is_a_subset_with_correct_cell_counts(
            sizes in prop::collection::vec(1usize..12, 1..4),
            n_per_cell in 1usize..6,
            seed in 0u64..100,
        ) {
            let isos = ["JP", "BR", "US"];
            let mut records = Vec::new();
            for (cell, &size) in sizes.iter().enumerate() {
                records.extend(vec![country(isos[cell]); size]);
            }
            let got = stratified_sample(&records, n_per_cell, seed);
            let expected: usize = sizes.iter().map(|&s| s.min(n_per_cell)).sum();
            prop_assert_eq!(got.len(), expected);
            let mut sorted = got.clone();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), got.len(), "no duplicates");
            prop_assert!(got.iter().all(|&i| i < records.len()));
        }
    }
}
