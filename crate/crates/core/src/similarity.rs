//! Pairwise similarity under the four supported measures.
//!
//! Every measure is mapped onto "higher is more similar": distances are
//! negated. Dense accumulation always happens in 64-bit reals in a fixed
//! per-cell order, so a cell's value does not depend on how rows are
//! blocked or how many threads computed them.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{FicoError, Result};
use crate::model::{BinaryCodeSet, EmbeddingSet, SignedCodeView, SimilarityMatrix, Values};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    Hamming,
    InnerProduct,
    Cosine,
    Euclidean,
}

impl Measure {
    pub fn tag(self) -> &'static str {
        match self {
            Measure::Hamming => "hamming",
            Measure::InnerProduct => "ip",
            Measure::Cosine => "cosine",
            Measure::Euclidean => "l2",
        }
    }

    pub fn is_dense(self) -> bool {
        !matches!(self, Measure::Hamming)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Measure {
    type Err = FicoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hamming" => Ok(Measure::Hamming),
            "ip" | "inner_product" => Ok(Measure::InnerProduct),
            "cosine" => Ok(Measure::Cosine),
            "l2" | "euclidean" => Ok(Measure::Euclidean),
            other => Err(FicoError::invalid(format!("unknown measure {other:?}"))),
        }
    }
}

/// Either representation a model can emit.
#[derive(Debug, Clone, Copy)]
pub enum Representation<'a> {
    Dense(&'a EmbeddingSet),
    Codes(&'a BinaryCodeSet),
}

impl Representation<'_> {
    pub fn ids(&self) -> &[u64] {
        match self {
            Representation::Dense(s) => s.ids(),
            Representation::Codes(c) => c.ids(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub trait Real: Copy + Send + Sync + Into<f64> + 'static {}
impl Real for f32 {}
impl Real for f64 {}

const LANES: usize = 8;

#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += x[l].into() * y[l].into();
        }
    }
    let mut tail = 0f64;
    for (x, y) in ra.iter().zip(rb) {
        tail += (*x).into() * (*y).into();
    }
    reduce(acc) + tail
}

#[inline]
pub(crate) fn squared_l2<T: Real>(a: &[T], b: &[T]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            let d = x[l].into() - y[l].into();
            acc[l] += d * d;
        }
    }
    let mut tail = 0f64;
    for (x, y) in ra.iter().zip(rb) {
        let d = (*x).into() - (*y).into();
        tail += d * d;
    }
    reduce(acc) + tail
}

#[inline]
fn reduce(acc: [f64; LANES]) -> f64 {
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]))
}

pub(crate) fn norm<T: Real>(a: &[T]) -> f64 {
    dot(a, a).sqrt()
}

/// Similarity of two dense rows; `qn`/`cn` are their norms (only read for cosine).
#[inline]
pub(crate) fn dense_score<T: Real>(measure: Measure, q: &[T], qn: f64, c: &[T], cn: f64) -> f32 {
    match measure {
        Measure::InnerProduct => dot(q, c) as f32,
        Measure::Cosine => (dot(q, c) / (qn * cn)) as f32,
        Measure::Euclidean => -(squared_l2(q, c).sqrt()) as f32,
        Measure::Hamming => unreachable!("hamming is not a dense measure"),
    }
}

/// Population count of XOR over packed words, without length checks.
#[inline]
pub(crate) fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    if a.len() == 1 {
        return (a[0] ^ b[0]).count_ones();
    }
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Number of differing bits between two packed codes.
pub fn hamming_distance(a: &[u64], b: &[u64]) -> Result<u32> {
    if a.len() != b.len() {
        return Err(FicoError::DimensionMismatch(format!(
            "codes of {} and {} words",
            a.len(),
            b.len()
        )));
    }
    Ok(hamming_words(a, b))
}

pub fn signed_view(codes: &BinaryCodeSet) -> SignedCodeView {
    SignedCodeView::from_codes(codes)
}

pub(crate) fn row_norms<T: Real>(v: &[T], dim: usize) -> Vec<f64> {
    v.chunks_exact(dim).map(norm).collect()
}

pub(crate) fn check_nonzero_norms(norms: &[f64], ids: &[u64]) -> Result<()> {
    match norms.iter().position(|&n| n == 0.0) {
        Some(i) => Err(FicoError::invalid(format!(
            "zero-norm row under cosine, id={}",
            ids[i]
        ))),
        None => Ok(()),
    }
}

pub(crate) fn widen(set: &EmbeddingSet) -> Vec<f64> {
    match set.values() {
        Values::F32(v) => v.iter().map(|&x| x as f64).collect(),
        Values::F64(v) => v.clone(),
    }
}

const ROW_BLOCK: usize = 16;

fn dense_matrix<T: Real>(
    q: &[T],
    c: &[T],
    dim: usize,
    measure: Measure,
    q_ids: &[u64],
    c_ids: &[u64],
) -> Result<Vec<f32>> {
    let nc = c_ids.len();
    let (qn, cn) = if measure == Measure::Cosine {
        let qn = row_norms(q, dim);
        let cn = row_norms(c, dim);
        check_nonzero_norms(&qn, q_ids)?;
        check_nonzero_norms(&cn, c_ids)?;
        (qn, cn)
    } else {
        (vec![0.0; q_ids.len()], vec![0.0; nc])
    };
    let mut scores = vec![0f32; q_ids.len() * nc];
    if nc == 0 {
        return Ok(scores);
    }
    scores
        .par_chunks_mut(ROW_BLOCK * nc)
        .enumerate()
        .for_each(|(b, block)| {
            for (r, out) in block.chunks_exact_mut(nc).enumerate() {
                let qi = b * ROW_BLOCK + r;
                let qrow = &q[qi * dim..(qi + 1) * dim];
                for (ci, cell) in out.iter_mut().enumerate() {
                    let crow = &c[ci * dim..(ci + 1) * dim];
                    *cell = dense_score(measure, qrow, qn[qi], crow, cn[ci]);
                }
            }
        });
    Ok(scores)
}

fn hamming_matrix(q: &BinaryCodeSet, c: &BinaryCodeSet) -> Vec<f32> {
    let nc = c.len();
    let mut scores = vec![0f32; q.len() * nc];
    if nc == 0 {
        return scores;
    }
    scores
        .par_chunks_mut(ROW_BLOCK * nc)
        .enumerate()
        .for_each(|(b, block)| {
            for (r, out) in block.chunks_exact_mut(nc).enumerate() {
                let qc = q.code(b * ROW_BLOCK + r);
                for (ci, cell) in out.iter_mut().enumerate() {
                    *cell = -(hamming_words(qc, c.code(ci)) as f32);
                }
            }
        });
    scores
}

/// Full query × candidate similarity matrix.
///
/// Codes under a dense measure are compared through their ±1 view.
pub fn pairwise(
    queries: Representation<'_>,
    candidates: Representation<'_>,
    measure: Measure,
) -> Result<SimilarityMatrix> {
    use Representation::*;
    let scores = match (queries, candidates) {
        (Codes(q), Codes(c)) if measure == Measure::Hamming => {
            if q.code_bits() != c.code_bits() {
                return Err(FicoError::DimensionMismatch(format!(
                    "{}-bit queries vs {}-bit candidates",
                    q.code_bits(),
                    c.code_bits()
                )));
            }
            hamming_matrix(q, c)
        }
        (_, _) if measure == Measure::Hamming => {
            return Err(FicoError::invalid(
                "hamming applies only to binary codes",
            ))
        }
        (Codes(q), Codes(c)) => {
            let (qv, cv) = (signed_view(q), signed_view(c));
            return pairwise(
                Dense(qv.as_embeddings()),
                Dense(cv.as_embeddings()),
                measure,
            );
        }
        (Dense(q), Dense(c)) => {
            if q.dim() != c.dim() {
                return Err(FicoError::DimensionMismatch(format!(
                    "dim {} queries vs dim {} candidates",
                    q.dim(),
                    c.dim()
                )));
            }
            let dim = q.dim();
            match (q.values(), c.values()) {
                (Values::F32(a), Values::F32(b)) => {
                    dense_matrix(a, b, dim, measure, q.ids(), c.ids())?
                }
                (Values::F64(a), Values::F64(b)) => {
                    dense_matrix(a, b, dim, measure, q.ids(), c.ids())?
                }
                _ => dense_matrix(&widen(q), &widen(c), dim, measure, q.ids(), c.ids())?,
            }
        }
        (Codes(_), Dense(_)) | (Dense(_), Codes(_)) => {
            return Err(FicoError::invalid(
                "queries and candidates must use the same representation",
            ))
        }
    };
    SimilarityMatrix::new(
        queries.ids().to_vec(),
        candidates.ids().to_vec(),
        scores,
        measure.tag(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::SplitMix64;

    fn codes(words: Vec<u64>, bits: usize) -> BinaryCodeSet {
        BinaryCodeSet::with_sequential_ids(bits, words).unwrap()
    }

    // Per-bit loop, independent of the packed-word kernel.
    fn naive_hamming(a: &BinaryCodeSet, i: usize, b: &BinaryCodeSet, j: usize) -> u32 {
        (0..a.code_bits()).filter(|&t| a.bit(i, t) != b.bit(j, t)).count() as u32
    }

    #[test]
    fn hamming_basics() {
        assert_eq!(hamming_distance(&[0xABCD], &[0xABCD]).unwrap(), 0);
        assert_eq!(hamming_distance(&[0x1234], &[!0x1234]).unwrap(), 64);
        assert_eq!(
            hamming_distance(&[0xFF00_0000_0000_0000], &[0x0F00_0000_0000_0000]).unwrap(),
            4
        );
        assert!(hamming_distance(&[0, 0], &[0]).is_err());
    }

    #[test]
    fn identity_rows_under_cosine() {
        let e = EmbeddingSet::with_sequential_ids(2, Values::F32(vec![1., 0., 0., 1.])).unwrap();
        let m = pairwise(Representation::Dense(&e), Representation::Dense(&e), Measure::Cosine).unwrap();
        assert_eq!(m.scores(), &[1., 0., 0., 1.]);
    }

    #[test]
    fn euclidean_self_distance_is_row_max() {
        let e = EmbeddingSet::with_sequential_ids(3, Values::F64(vec![1., 2., 3., -1., 0., 5., 4., 4., 4.])).unwrap();
        let m = pairwise(Representation::Dense(&e), Representation::Dense(&e), Measure::Euclidean).unwrap();
        for q in 0..3 {
            assert_eq!(m.get(q, q), 0.0);
            assert!(m.row(q).iter().enumerate().all(|(c, &s)| c == q || s < 0.0));
        }
    }

    #[test]
    fn hamming_matrix_matches_bit_loop() {
        let mut rng = SplitMix64::seed_from_u64(11);
        let a = codes((0..3).map(|_| rng.gen()).collect(), 64);
        let m = pairwise(Representation::Codes(&a), Representation::Codes(&a), Measure::Hamming).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), -(naive_hamming(&a, i, &a, j) as f32));
            }
        }
    }

    #[test]
    fn signed_view_definition() {
        let c = codes(vec![0b0101], 8);
        let v = signed_view(&c);
        assert_eq!(
            v.as_embeddings().values(),
            &Values::F32(vec![1., -1., 1., -1., -1., -1., -1., -1.])
        );
        let ones = codes(vec![u64::MAX], 64);
        let v = signed_view(&ones);
        assert_eq!(v.as_embeddings().row_f64(0).iter().map(|x| x * x).sum::<f64>().sqrt(), 8.0);
    }

    #[test]
    fn signed_dot_identity() {
        let mut rng = SplitMix64::seed_from_u64(5);
        let a = codes((0..50).map(|_| rng.gen()).collect(), 64);
        let b = codes((0..50).map(|_| rng.gen()).collect(), 64);
        let (sa, sb) = (signed_view(&a), signed_view(&b));
        for i in 0..50 {
            let h = hamming_words(a.code(i), b.code(i)) as f64;
            let d = dot(&sa.as_embeddings().row_f64(i), &sb.as_embeddings().row_f64(i));
            assert_eq!(d, 64.0 - 2.0 * h);
        }
    }

    #[test]
    fn zero_norm_under_cosine_errors() {
        let e = EmbeddingSet::new(vec![4, 9], 2, Values::F32(vec![1., 0., 0., 0.])).unwrap();
        let err = pairwise(Representation::Dense(&e), Representation::Dense(&e), Measure::Cosine)
            .unwrap_err()
            .to_string();
        assert!(err.contains("id=9"), "{err}");
    }

    #[test]
    fn mismatches_are_errors() {
        let e = EmbeddingSet::with_sequential_ids(2, Values::F32(vec![1., 0.])).unwrap();
        let f = EmbeddingSet::with_sequential_ids(3, Values::F32(vec![1., 0., 0.])).unwrap();
        assert!(pairwise(Representation::Dense(&e), Representation::Dense(&f), Measure::InnerProduct).is_err());
        assert!(pairwise(Representation::Dense(&e), Representation::Dense(&e), Measure::Hamming).is_err());
        let c = codes(vec![1], 64);
        let d = codes(vec![1, 0], 72);
        assert!(pairwise(Representation::Codes(&c), Representation::Codes(&d), Measure::Hamming).is_err());
    }

    #[test]
    fn mixed_dtype_widens() {
        let a = EmbeddingSet::with_sequential_ids(2, Values::F32(vec![1., 2.])).unwrap();
        let b = EmbeddingSet::with_sequential_ids(2, Values::F64(vec![3., 4.])).unwrap();
        let m = pairwise(Representation::Dense(&a), Representation::Dense(&b), Measure::InnerProduct).unwrap();
        assert_eq!(m.scores(), &[11.0]);
    }
}
