//! Exhaustive indexes: the ground truth every approximate index is measured against.

use rayon::prelude::*;

use crate::error::{FicoError, Result};
use crate::eval::rank_row_into;
use crate::model::{BinaryCodeSet, EmbeddingSet, RankedRetrieval, Values};
use crate::similarity::{check_nonzero_norms, dense_score, hamming_words, row_norms, widen, Measure, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct FlatIndex {
    data: EmbeddingSet,
    measure: Measure,
    norms: Vec<f64>,
}

impl FlatIndex {
    pub fn build(data: EmbeddingSet, measure: Measure) -> Result<Self> {
        if !measure.is_dense() {
            return Err(FicoError::invalid(format!(
                "flat index needs a dense measure, got {measure}"
            )));
        }
        let norms = if measure == Measure::Cosine {
            let n = match data.values() {
                Values::F32(v) => row_norms(v, data.dim()),
                Values::F64(v) => row_norms(v, data.dim()),
            };
            check_nonzero_norms(&n, data.ids())?;
            n
        } else {
            Vec::new()
        };
        Ok(FlatIndex { data, measure, norms })
    }

    pub fn data(&self) -> &EmbeddingSet {
        &self.data
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn search(&self, queries: &EmbeddingSet, k: usize) -> Result<RankedRetrieval> {
        let n = self.data.len();
        if k == 0 || k > n {
            return Err(FicoError::invalid(format!("k={k} outside [1, {n}]")));
        }
        if queries.dim() != self.data.dim() {
            return Err(FicoError::DimensionMismatch(format!(
                "dim {} queries vs dim {} index",
                queries.dim(),
                self.data.dim()
            )));
        }
        let dim = self.data.dim();
        let cn = &self.norms;
        let columns = match (queries.values(), self.data.values()) {
            (Values::F32(q), Values::F32(c)) => self.scan(q, c, dim, cn, queries.ids(), k)?,
            (Values::F64(q), Values::F64(c)) => self.scan(q, c, dim, cn, queries.ids(), k)?,
            _ => self.scan(&widen(queries), &widen(&self.data), dim, cn, queries.ids(), k)?,
        };
        let (columns, scores): (Vec<u32>, Vec<f32>) = columns.into_iter().unzip();
        RankedRetrieval::new(k, queries.ids().to_vec(), columns, scores)
    }

    fn scan<T: Real>(
        &self,
        q: &[T],
        c: &[T],
        dim: usize,
        cn: &[f64],
        q_ids: &[u64],
        k: usize,
    ) -> Result<Vec<(u32, f32)>> {
        let qn = if self.measure == Measure::Cosine {
            let qn = row_norms(q, dim);
            check_nonzero_norms(&qn, q_ids)?;
            qn
        } else {
            vec![0.0; q_ids.len()]
        };
        let ids = self.data.ids();
        let n = ids.len();
        let mut out = vec![(0u32, 0f32); q_ids.len() * k];
        out.par_chunks_mut(k).enumerate().for_each_init(
            || (vec![0f32; n], Vec::new(), vec![0u32; k]),
            |(scores, scratch, cols), (qi, dst)| {
                let qrow = &q[qi * dim..(qi + 1) * dim];
                for (ci, s) in scores.iter_mut().enumerate() {
                    let cn_i = if cn.is_empty() { 0.0 } else { cn[ci] };
                    *s = dense_score(self.measure, qrow, qn[qi], &c[ci * dim..(ci + 1) * dim], cn_i);
                }
                rank_row_into(scores, ids, k, scratch, cols);
                for (d, &col) in dst.iter_mut().zip(cols.iter()) {
                    *d = (col, scores[col as usize]);
                }
            },
        );
        Ok(out)
    }
}

/// Selects the `k` candidates with smallest Hamming distance, ties by
/// ascending ID, by bucketing on distance. Equivalent to ranking the
/// scores `-distance` with the global rule.
pub(crate) fn hamming_topk(
    dists: &[(u32, u32)],
    ids: &[u64],
    k: usize,
    code_bits: usize,
    hist: &mut Vec<u32>,
    picked: &mut Vec<(u32, u32)>,
) {
    hist.clear();
    hist.resize(code_bits + 1, 0);
    for &(d, _) in dists {
        hist[d as usize] += 1;
    }
    let mut cum = 0usize;
    let mut threshold = code_bits as u32;
    for (d, &c) in hist.iter().enumerate() {
        cum += c as usize;
        if cum >= k {
            threshold = d as u32;
            break;
        }
    }
    picked.clear();
    picked.extend(dists.iter().copied().filter(|&(d, _)| d <= threshold));
    picked.sort_unstable_by(|a, b| a.0.cmp(&b.0).then_with(|| ids[a.1 as usize].cmp(&ids[b.1 as usize])));
    picked.truncate(k);
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFlatIndex {
    codes: BinaryCodeSet,
}

impl BinaryFlatIndex {
    pub fn build(codes: BinaryCodeSet) -> Self {
        BinaryFlatIndex { codes }
    }

    pub fn codes(&self) -> &BinaryCodeSet {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn search(&self, queries: &BinaryCodeSet, k: usize) -> Result<RankedRetrieval> {
        let n = self.codes.len();
        if k == 0 || k > n {
            return Err(FicoError::invalid(format!("k={k} outside [1, {n}]")));
        }
        if queries.code_bits() != self.codes.code_bits() {
            return Err(FicoError::DimensionMismatch(format!(
                "{}-bit queries vs {}-bit index",
                queries.code_bits(),
                self.codes.code_bits()
            )));
        }
        let ids = self.codes.ids();
        let bits = self.codes.code_bits();
        let mut columns = vec![0u32; queries.len() * k];
        let mut scores = vec![0f32; queries.len() * k];
        columns
            .par_chunks_mut(k)
            .zip(scores.par_chunks_mut(k))
            .enumerate()
            .for_each_init(
                || (Vec::with_capacity(n), Vec::new(), Vec::new()),
                |(dists, hist, picked), (qi, (cols, sc))| {
                    let qc = queries.code(qi);
                    dists.clear();
                    dists.extend((0..n).map(|ci| (hamming_words(qc, self.codes.code(ci)), ci as u32)));
                    hamming_topk(dists, ids, k, bits, hist, picked);
                    for (j, &(d, c)) in picked.iter().enumerate() {
                        cols[j] = c;
                        sc[j] = -(d as f32);
                    }
                },
            );
        RankedRetrieval::new(k, queries.ids().to_vec(), columns, scores)
    }
}
