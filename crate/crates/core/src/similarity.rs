//! Cosine similarity, its angular distance, sentence-pair matrices and
//! document-level scores.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{EmbeddingMatrix, EmbeddingVector};

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("vectors have {left} and {right} dimensions")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine is undefined for a zero-norm vector")]
    ZeroNormVector,
    #[error("cannot compare embeddings from {left} with embeddings from {right}")]
    ModelMismatch { left: String, right: String },
    #[error("every sentence of {part} has a zero-norm embedding")]
    AllRowsZeroNorm { part: String },
    #[error("similarity matrix is empty")]
    EmptyMatrix,
    #[error("unknown aggregation strategy {0:?}")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub cosine: f64,
    /// `cosine * 100`, unrounded.
    pub percent: f64,
}

impl SimilarityScore {
    pub fn from_cosine(cosine: f64) -> Self {
        let cosine = cosine.clamp(-1.0, 1.0);
        Self { cosine, percent: cosine * 100.0 }
    }
}

fn dot(x: &[f32], y: &[f32]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum()
}

/// Cosine of two stored vectors, using their cached norms.
pub fn cosine(x: &EmbeddingVector, y: &EmbeddingVector) -> Result<SimilarityScore, SimilarityError> {
    if x.dims() != y.dims() {
        return Err(SimilarityError::DimensionMismatch { left: x.dims(), right: y.dims() });
    }
    if x.is_zero() || y.is_zero() {
        return Err(SimilarityError::ZeroNormVector);
    }
    Ok(SimilarityScore::from_cosine(dot(x.values(), y.values()) / (x.l2_norm() * y.l2_norm())))
}

fn cosine_f64(x: &[f64], y: &[f64]) -> Result<f64, SimilarityError> {
    let d: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(SimilarityError::ZeroNormVector);
    }
    Ok((d / (nx * ny)).clamp(-1.0, 1.0))
}

/// `arccos(cosine) / pi`, in `[0, 1]`.
pub fn cosine_distance(x: &EmbeddingVector, y: &EmbeddingVector) -> Result<f64, SimilarityError> {
    Ok(cosine(x, y)?.cosine.acos() / std::f64::consts::PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AggregationStrategy {
    /// Cosine of the mean sentence vectors; `normalize` scales each sentence
    /// vector to unit length first.
    Centroid { normalize: bool },
    /// Mean of all sentence-pair cosines.
    PairMean,
    /// Mean of row maxima averaged with the mean of column maxima.
    BestMatchSym,
}

impl Default for AggregationStrategy {
    fn default() -> Self {
        AggregationStrategy::PairMean
    }
}

impl AggregationStrategy {
    pub const ALL: [AggregationStrategy; 4] = [
        AggregationStrategy::PairMean,
        AggregationStrategy::Centroid { normalize: false },
        AggregationStrategy::Centroid { normalize: true },
        AggregationStrategy::BestMatchSym,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AggregationStrategy::Centroid { normalize: false } => "centroid",
            AggregationStrategy::Centroid { normalize: true } => "centroid-normalized",
            AggregationStrategy::PairMean => "pair-mean",
            AggregationStrategy::BestMatchSym => "best-match-sym",
        }
    }
}

impl fmt::Display for AggregationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggregationStrategy {
    type Err = SimilarityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| SimilarityError::UnknownStrategy(s.to_string()))
    }
}

impl TryFrom<String> for AggregationStrategy {
    type Error = SimilarityError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<AggregationStrategy> for String {
    fn from(a: AggregationStrategy) -> String {
        a.as_str().to_string()
    }
}

/// Cosines between the non-zero rows of an influencer matrix (rows) and an
/// influencee matrix (columns), stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceSimMatrix {
    pub model: String,
    /// Sentence indices of the kept rows and columns.
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub excluded_rows: Vec<usize>,
    pub excluded_cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl SentenceSimMatrix {
    /// Builds a matrix from explicit entries, mainly for tests and fixtures.
    pub fn from_rows(model: &str, rows: &[Vec<f64>]) -> Result<Self, SimilarityError> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || n_cols == 0 || rows.iter().any(|r| r.len() != n_cols) {
            return Err(SimilarityError::EmptyMatrix);
        }
        Ok(Self {
            model: model.to_string(),
            rows: (0..rows.len()).collect(),
            cols: (0..n_cols).collect(),
            excluded_rows: Vec::new(),
            excluded_cols: Vec::new(),
            values: rows.concat(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = (self.n_rows(), self.n_cols());
        let mut values = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                values.push(self.get(i, j));
            }
        }
        Self {
            model: self.model.clone(),
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            excluded_rows: self.excluded_cols.clone(),
            excluded_cols: self.excluded_rows.clone(),
            values,
        }
    }

    /// Dense CSV: a header of column sentence indices, then one line per row
    /// starting with its sentence index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row");
        for j in &self.cols {
            out.push_str(&format!(",{j}"));
        }
        out.push('\n');
        for (i, idx) in self.rows.iter().enumerate() {
            out.push_str(&idx.to_string());
            for v in self.row(i) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

fn nonzero_rows(m: &EmbeddingMatrix) -> (Vec<usize>, Vec<usize>) {
    (0..m.len()).partition(|&i| !m.rows[i].is_zero())
}

fn check_pair(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<(), SimilarityError> {
    if a.model.identifier != b.model.identifier {
        return Err(SimilarityError::ModelMismatch { left: a.model.identifier.clone(), right: b.model.identifier.clone() });
    }
    if a.dims != b.dims {
        return Err(SimilarityError::DimensionMismatch { left: a.dims, right: b.dims });
    }
    Ok(())
}

/// Entry `(i, j)` is the cosine of row `i` of `a` and row `j` of `b`. Zero-norm
/// rows on either side are left out and listed in the excluded fields.
pub fn sentence_sim_matrix(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<SentenceSimMatrix, SimilarityError> {
    check_pair(a, b)?;
    let (rows, excluded_rows) = nonzero_rows(a);
    let (cols, excluded_cols) = nonzero_rows(b);
    for (part, ex, kept) in [(&a.source_part, &excluded_rows, &rows), (&b.source_part, &excluded_cols, &cols)] {
        if kept.is_empty() {
            return Err(SimilarityError::AllRowsZeroNorm { part: part.clone() });
        }
        if !ex.is_empty() {
            log::warn!("{part}: sentences {ex:?} have zero-norm embeddings and are excluded");
        }
    }
    let row_values = |i: &usize| -> Vec<f64> {
        cols.iter().map(|j| cosine(&a.rows[*i], &b.rows[*j]).expect("non-zero rows of equal dims").cosine).collect()
    };
    #[cfg(feature = "parallel")]
    let values: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        rows.par_iter().map(row_values).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<Vec<f64>> = rows.iter().map(row_values).collect();
    Ok(SentenceSimMatrix { model: a.model.name.clone(), rows, cols, excluded_rows, excluded_cols, values: values.concat() })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Aggregates a sentence matrix. Centroid needs the vectors themselves; use
/// [`centroid_score`] or [`score_documents`] for it.
pub fn aggregate_matrix(m: &SentenceSimMatrix, strategy: AggregationStrategy) -> Result<SimilarityScore, SimilarityError> {
    if m.values.is_empty() {
        return Err(SimilarityError::EmptyMatrix);
    }
    let c = match strategy {
        // Fixed row-major order keeps the sum independent of scheduling.
        AggregationStrategy::PairMean => mean(m.values.iter().copied()),
        AggregationStrategy::BestMatchSym => {
            let row_max = mean((0..m.n_rows()).map(|i| m.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max)));
            let col_max = mean((0..m.n_cols()).map(|j| (0..m.n_rows()).map(|i| m.get(i, j)).fold(f64::NEG_INFINITY, f64::max)));
            0.5 * (row_max + col_max)
        }
        AggregationStrategy::Centroid { .. } => {
            return Err(SimilarityError::UnknownStrategy("centroid needs embeddings, not a similarity matrix".into()))
        }
    };
    Ok(SimilarityScore::from_cosine(c))
}

fn centroid(m: &EmbeddingMatrix, normalize: bool) -> Vec<f64> {
    let mut sum = vec![0f64; m.dims];
    for row in m.rows.iter().filter(|r| !r.is_zero()) {
        let scale = if normalize { row.l2_norm() } else { 1.0 };
        for (s, &v) in sum.iter_mut().zip(row.values()) {
            *s += f64::from(v) / scale;
        }
    }
    // Dividing by the row count would not change the cosine.
    sum
}

pub fn centroid_score(a: &EmbeddingMatrix, b: &EmbeddingMatrix, normalize: bool) -> Result<SimilarityScore, SimilarityError> {
    check_pair(a, b)?;
    for m in [a, b] {
        if m.rows.iter().all(EmbeddingVector::is_zero) {
            return Err(SimilarityError::AllRowsZeroNorm { part: m.source_part.clone() });
        }
    }
    Ok(SimilarityScore::from_cosine(cosine_f64(&centroid(a, normalize), &centroid(b, normalize))?))
}

/// A document-level score with the provenance needed to interpret it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScore {
    pub influencer_part: String,
    pub target_part: String,
    pub model: String,
    pub strategy: AggregationStrategy,
    pub score: SimilarityScore,
    pub rows: usize,
    pub cols: usize,
    pub excluded_rows: Vec<usize>,
    pub excluded_cols: Vec<usize>,
}

pub fn score_documents(
    influencer: &EmbeddingMatrix,
    target: &EmbeddingMatrix,
    strategy: AggregationStrategy,
) -> Result<(DocumentScore, SentenceSimMatrix), SimilarityError> {
    let matrix = sentence_sim_matrix(influencer, target)?;
    let score = match strategy {
        AggregationStrategy::Centroid { normalize } => centroid_score(influencer, target, normalize)?,
        other => aggregate_matrix(&matrix, other)?,
    };
    if score.cosine < 0.0 {
        log::warn!(
            "{} vs {} under {}: negative similarity {:.4}%",
            influencer.source_part,
            target.source_part,
            influencer.model.name,
            score.percent
        );
    }
    let doc = DocumentScore {
        influencer_part: influencer.source_part.clone(),
        target_part: target.source_part.clone(),
        model: influencer.model.name.clone(),
        strategy,
        score,
        rows: matrix.n_rows(),
        cols: matrix.n_cols(),
        excluded_rows: matrix.excluded_rows.clone(),
        excluded_cols: matrix.excluded_cols.clone(),
    };
    Ok((doc, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::ModelSpec;
    use proptest::prelude::*;

    fn v(x: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(x.to_vec())
    }

    fn mat(part: &str, rows: &[&[f32]]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(ModelSpec::reference(), part, rows.iter().map(|r| v(r)).collect()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&v(&[1.0, 2.0, 2.0]), &v(&[1.0, 2.0, 2.0])).unwrap().cosine, 1.0);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap().cosine, 0.0);
        let s = cosine(&v(&[1.0, 2.0, 2.0]), &v(&[2.0, 1.0, 2.0])).unwrap();
        assert_eq!(s.cosine, 8.0 / 9.0);
        assert_eq!(s.percent, 8.0 / 9.0 * 100.0);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(cosine(&v(&[1.0]), &v(&[1.0, 0.0])), Err(SimilarityError::DimensionMismatch { left: 1, right: 2 }));
        assert_eq!(cosine(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])), Err(SimilarityError::ZeroNormVector));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(cosine_distance(&v(&[3.0, 4.0]), &v(&[3.0, 4.0])).unwrap(), 0.0);
        assert!((cosine_distance(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap() - 0.5).abs() < 1e-15);
        // Angle from the cross product instead: |(1,2,2) x (2,1,2)| = |(2,2,-3)| = sqrt(17).
        let d = cosine_distance(&v(&[1.0, 2.0, 2.0]), &v(&[2.0, 1.0, 2.0])).unwrap();
        let oracle = 17f64.sqrt().atan2(8.0) / std::f64::consts::PI;
        assert!((d - oracle).abs() < 1e-12, "{d} vs {oracle}");
        assert!((d - 0.151478).abs() < 1e-6);
    }

    #[test]
    fn identity_matrix_strategies() {
        let a = mat("a", &[&[1.0, 0.0], &[0.0, 1.0]]);
        let m = sentence_sim_matrix(&a, &a).unwrap();
        assert_eq!(m.values, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(aggregate_matrix(&m, AggregationStrategy::PairMean).unwrap().cosine, 0.5);
        assert_eq!(aggregate_matrix(&m, AggregationStrategy::BestMatchSym).unwrap().cosine, 1.0);
    }

    #[test]
    fn zero_rows_are_excluded() {
        let a = mat("a", &[&[1.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]]);
        let b = mat("b", &[&[1.0, 0.0]]);
        let m = sentence_sim_matrix(&a, &b).unwrap();
        assert_eq!(m.rows, vec![0, 2]);
        assert_eq!(m.excluded_rows, vec![1]);
        assert_eq!(m.n_rows(), 2);
        let z = mat("z", &[&[0.0, 0.0]]);
        assert_eq!(sentence_sim_matrix(&z, &b), Err(SimilarityError::AllRowsZeroNorm { part: "z".into() }));
    }

    #[test]
    fn model_mismatch() {
        let a = mat("a", &[&[1.0]]);
        let mut b = a.clone();
        b.model = crate::embed::find_model("SBERT").unwrap();
        assert!(matches!(sentence_sim_matrix(&a, &b), Err(SimilarityError::ModelMismatch { .. })));
    }

    #[test]
    fn single_sentence_documents_agree_across_strategies() {
        let a = mat("a", &[&[1.0, 2.0, 2.0]]);
        let b = mat("b", &[&[2.0, 1.0, 2.0]]);
        for s in AggregationStrategy::ALL {
            let (d, _) = score_documents(&a, &b, s).unwrap();
            assert!((d.score.cosine - 8.0 / 9.0).abs() < 1e-15, "{s}");
        }
    }

    #[test]
    fn centroid_modes_differ_on_unequal_norms() {
        let a = mat("a", &[&[10.0, 0.0], &[0.0, 1.0]]);
        let b = mat("b", &[&[1.0, 1.0]]);
        let raw = centroid_score(&a, &b, false).unwrap().cosine;
        let unit = centroid_score(&a, &b, true).unwrap().cosine;
        assert!((unit - 1.0).abs() < 1e-15);
        assert!((raw - 11.0 / (101f64.sqrt() * 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in AggregationStrategy::ALL {
            assert_eq!(s.as_str().parse::<AggregationStrategy>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<AggregationStrategy>(&json).unwrap(), s);
        }
        assert!("mean".parse::<AggregationStrategy>().is_err());
    }

    #[test]
    fn csv_dump() {
        let m = SentenceSimMatrix::from_rows("m", &[vec![1.0, 0.5], vec![0.25, -1.0]]).unwrap();
        assert_eq!(m.to_csv(), "row,0,1\n0,1,0.5\n1,0.25,-1\n");
    }

    fn small_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| proptest::collection::vec(proptest::collection::vec(-1.0f64..=1.0, c), r))
    }

    proptest! {
        #[test]
        fn best_match_dominates_pair_mean(rows in small_matrix()) {
            let m = SentenceSimMatrix::from_rows("m", &rows).unwrap();
            let pm = aggregate_matrix(&m, AggregationStrategy::PairMean).unwrap().cosine;
            let bm = aggregate_matrix(&m, AggregationStrategy::BestMatchSym).unwrap().cosine;
            prop_assert!(bm >= pm - 1e-12);
            prop_assert!((-1.0..=1.0).contains(&pm) && (-1.0..=1.0).contains(&bm));
        }
    }
}
