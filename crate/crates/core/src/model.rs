//! Domain types shared by every stage of the pipeline.
//!
//! Samples are always addressed by explicit 64-bit IDs, never by row
//! position, so that splits and replicated datasets stay aligned across
//! files produced by different models.
//!
//! Constructors only check structural consistency (lengths, widths).
//! Content invariants (unique IDs, finite values, partitions) are checked by
//! `validate`, which returns every violation instead of stopping at the
//! first one. Readers in [`crate::codec`] run `validate` before returning.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{FicoError, Result};

/// Outcome of `validate`: hard violations plus non-fatal warnings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Validation {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Vec<String>> {
        if self.violations.is_empty() {
            Ok(self.warnings)
        } else {
            Err(FicoError::Validation(self.violations))
        }
    }

    fn violation(&mut self, msg: String) {
        self.violations.push(msg);
    }
}

fn check_unique_ids(ids: &[u64], out: &mut Validation) {
    let mut seen = HashSet::with_capacity(ids.len());
    for &id in ids {
        if !seen.insert(id) {
            out.violation(format!("duplicate id, id={id}"));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size_bytes(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        })
    }
}

/// Row-major embedding payload in its stored precision.
#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::F32(v) => v.len(),
            Values::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            Values::F32(_) => Dtype::F32,
            Values::F64(_) => Dtype::F64,
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            Values::F32(v) => v[i] as f64,
            Values::F64(v) => v[i],
        }
    }
}

/// Continuous (fine-grained) embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<u64>,
    dim: usize,
    values: Values,
}

impl EmbeddingSet {
    pub fn new(ids: Vec<u64>, dim: usize, values: Values) -> Result<Self> {
        if dim == 0 {
            return Err(FicoError::invalid("embedding dim must be positive"));
        }
        if values.len() != ids.len() * dim {
            return Err(FicoError::DimensionMismatch(format!(
                "{} values for {} ids of dim {}",
                values.len(),
                ids.len(),
                dim
            )));
        }
        Ok(EmbeddingSet { ids, dim, values })
    }

    /// Builds a set with IDs `0..n`.
    pub fn with_sequential_ids(dim: usize, values: Values) -> Result<Self> {
        if dim == 0 {
            return Err(FicoError::invalid("embedding dim must be positive"));
        }
        let n = values.len() / dim;
        Self::new((0..n as u64).collect(), dim, values)
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dtype(&self) -> Dtype {
        self.values.dtype()
    }

    pub fn values(&self) -> &Values {
        &self.values
    }

    pub fn into_parts(self) -> (Vec<u64>, usize, Values) {
        (self.ids, self.dim, self.values)
    }

    /// Row `i` widened to 64-bit reals.
    pub fn row_f64(&self, i: usize) -> Vec<f64> {
        let r = i * self.dim..(i + 1) * self.dim;
        match &self.values {
            Values::F32(v) => v[r].iter().map(|&x| x as f64).collect(),
            Values::F64(v) => v[r].to_vec(),
        }
    }

    pub fn with_ids(self, ids: Vec<u64>) -> Result<Self> {
        Self::new(ids, self.dim, self.values)
    }

    /// Copy of rows `range`.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> EmbeddingSet {
        let d = self.dim;
        let values = match &self.values {
            Values::F32(v) => Values::F32(v[range.start * d..range.end * d].to_vec()),
            Values::F64(v) => Values::F64(v[range.start * d..range.end * d].to_vec()),
        };
        EmbeddingSet {
            ids: self.ids[range].to_vec(),
            dim: d,
            values,
        }
    }

    pub fn validate(&self) -> Validation {
        let mut out = Validation::default();
        check_unique_ids(&self.ids, &mut out);
        let finite_row = |i: usize| -> bool {
            let r = i * self.dim..(i + 1) * self.dim;
            match &self.values {
                Values::F32(v) => v[r].iter().all(|x| x.is_finite()),
                Values::F64(v) => v[r].iter().all(|x| x.is_finite()),
            }
        };
        for (i, &id) in self.ids.iter().enumerate() {
            if !finite_row(i) {
                out.violation(format!("non-finite value, id={id}"));
            }
        }
        out
    }
}

/// Bit-packed (coarse-grained) hash codes, LSB-first within 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryCodeSet {
    ids: Vec<u64>,
    code_bits: usize,
    words: Vec<u64>,
}

pub fn words_for_bits(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl BinaryCodeSet {
    pub fn new(ids: Vec<u64>, code_bits: usize, words: Vec<u64>) -> Result<Self> {
        if code_bits == 0 || !code_bits.is_multiple_of(8) {
            return Err(FicoError::invalid(format!(
                "code_bits must be a positive multiple of 8, got {code_bits}"
            )));
        }
        let per = words_for_bits(code_bits);
        if words.len() != ids.len() * per {
            return Err(FicoError::DimensionMismatch(format!(
                "{} words for {} codes of {} bits",
                words.len(),
                ids.len(),
                code_bits
            )));
        }
        Ok(BinaryCodeSet {
            ids,
            code_bits,
            words,
        })
    }

    pub fn with_sequential_ids(code_bits: usize, words: Vec<u64>) -> Result<Self> {
        let per = words_for_bits(code_bits.max(1));
        let n = words.len() / per;
        Self::new((0..n as u64).collect(), code_bits, words)
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn code_bits(&self) -> usize {
        self.code_bits
    }

    pub fn words_per_code(&self) -> usize {
        words_for_bits(self.code_bits)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn code(&self, i: usize) -> &[u64] {
        let per = self.words_per_code();
        &self.words[i * per..(i + 1) * per]
    }

    pub fn bit(&self, i: usize, j: usize) -> bool {
        (self.code(i)[j / 64] >> (j % 64)) & 1 == 1
    }

    pub fn into_parts(self) -> (Vec<u64>, usize, Vec<u64>) {
        (self.ids, self.code_bits, self.words)
    }

    pub fn with_ids(self, ids: Vec<u64>) -> Result<Self> {
        Self::new(ids, self.code_bits, self.words)
    }

    /// Copy of codes `range`.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> BinaryCodeSet {
        let per = self.words_per_code();
        BinaryCodeSet {
            ids: self.ids[range.clone()].to_vec(),
            code_bits: self.code_bits,
            words: self.words[range.start * per..range.end * per].to_vec(),
        }
    }

    /// Mask of valid bits in the last word of every code.
    pub fn tail_mask(&self) -> u64 {
        match self.code_bits % 64 {
            0 => u64::MAX,
            r => (1u64 << r) - 1,
        }
    }

    /// Bitwise complement of every code, padding kept at zero.
    pub fn complement(&self) -> BinaryCodeSet {
        let per = self.words_per_code();
        let mask = self.tail_mask();
        let words = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| if i % per == per - 1 { !w & mask } else { !w })
            .collect();
        BinaryCodeSet {
            ids: self.ids.clone(),
            code_bits: self.code_bits,
            words,
        }
    }

    pub fn validate(&self) -> Validation {
        let mut out = Validation::default();
        check_unique_ids(&self.ids, &mut out);
        let per = self.words_per_code();
        let mask = self.tail_mask();
        for (i, &id) in self.ids.iter().enumerate() {
            if self.words[i * per + per - 1] & !mask != 0 {
                out.violation(format!("nonzero padding bits, id={id}"));
            }
        }
        out
    }
}

/// Dense ±1 view of binary codes (bit 1 ↦ +1, bit 0 ↦ −1).
#[derive(Debug, Clone, PartialEq)]
pub struct SignedCodeView(EmbeddingSet);

impl SignedCodeView {
    pub fn from_codes(codes: &BinaryCodeSet) -> Self {
        let l = codes.code_bits();
        let mut values = Vec::with_capacity(codes.len() * l);
        for i in 0..codes.len() {
            let code = codes.code(i);
            values.extend((0..l).map(|j| {
                if (code[j / 64] >> (j % 64)) & 1 == 1 {
                    1.0f32
                } else {
                    -1.0f32
                }
            }));
        }
        SignedCodeView(
            EmbeddingSet::new(codes.ids().to_vec(), l, Values::F32(values))
                .expect("signed view shape follows code shape"),
        )
    }

    pub fn as_embeddings(&self) -> &EmbeddingSet {
        &self.0
    }

    pub fn into_embeddings(self) -> EmbeddingSet {
        self.0
    }
}

/// Multi-label category assignments keyed by sample ID.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    entries: BTreeMap<u64, Vec<u32>>,
    num_categories: u32,
}

impl LabelMatrix {
    /// Label lists are sorted and deduplicated on construction.
    pub fn new(entries: BTreeMap<u64, Vec<u32>>, num_categories: u32) -> Self {
        let entries = entries
            .into_iter()
            .map(|(id, mut labels)| {
                labels.sort_unstable();
                labels.dedup();
                (id, labels)
            })
            .collect();
        LabelMatrix {
            entries,
            num_categories,
        }
    }

    /// Uses `C = 1 + max label`, or 0 when no labels occur.
    pub fn with_inferred_categories(entries: BTreeMap<u64, Vec<u32>>) -> Self {
        let c = entries
            .values()
            .flat_map(|l| l.iter().copied())
            .max()
            .map_or(0, |m| m + 1);
        Self::new(entries, c)
    }

    pub fn num_categories(&self) -> u32 {
        self.num_categories
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&[u32]> {
        self.entries.get(&id).map(Vec::as_slice)
    }

    pub fn entries(&self) -> &BTreeMap<u64, Vec<u32>> {
        &self.entries
    }

    pub fn validate(&self) -> Validation {
        let mut out = Validation::default();
        for (&id, labels) in &self.entries {
            if let Some(&bad) = labels.iter().find(|&&l| l >= self.num_categories) {
                out.violation(format!(
                    "label {bad} out of range [0, {}), id={id}",
                    self.num_categories
                ));
            }
            if labels.is_empty() {
                out.warnings.push(format!("empty label set, id={id}"));
            }
        }
        out
    }
}

/// Image → captions correspondence defining instance-level relevance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceGroups {
    groups: BTreeMap<u64, Vec<u64>>,
    inverse: HashMap<u64, u64>,
    // (caption, image) pairs that collided while building `inverse`.
    conflicts: Vec<(u64, u64)>,
    duplicate_images: Vec<u64>,
}

impl InstanceGroups {
    pub fn from_entries(entries: impl IntoIterator<Item = (u64, Vec<u64>)>) -> Self {
        let mut groups: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        let mut inverse = HashMap::new();
        let mut conflicts = Vec::new();
        let mut duplicate_images = Vec::new();
        for (image, captions) in entries {
            if groups.contains_key(&image) {
                duplicate_images.push(image);
            }
            for &c in &captions {
                if let Some(&prev) = inverse.get(&c) {
                    conflicts.push((c, prev));
                } else {
                    inverse.insert(c, image);
                }
            }
            groups.entry(image).or_default().extend(captions);
        }
        InstanceGroups {
            groups,
            inverse,
            conflicts,
            duplicate_images,
        }
    }

    pub fn groups(&self) -> &BTreeMap<u64, Vec<u64>> {
        &self.groups
    }

    pub fn captions_of(&self, image: u64) -> Option<&[u64]> {
        self.groups.get(&image).map(Vec::as_slice)
    }

    pub fn image_of(&self, caption: u64) -> Option<u64> {
        self.inverse.get(&caption).copied()
    }

    pub fn num_images(&self) -> usize {
        self.groups.len()
    }

    pub fn num_captions(&self) -> usize {
        self.inverse.len()
    }

    pub fn validate(&self) -> Validation {
        let mut out = Validation::default();
        for &img in &self.duplicate_images {
            out.violation(format!("image {img} listed more than once"));
        }
        let mut reported = HashSet::new();
        for &(c, _) in &self.conflicts {
            if reported.insert(c) {
                out.violation(format!("caption {c} not a partition"));
            }
        }
        for (&img, caps) in &self.groups {
            if caps.is_empty() {
                out.violation(format!("image {img} has no captions"));
            }
        }
        out
    }
}

/// Query × candidate scores; strictly larger means strictly more similar.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    query_ids: Vec<u64>,
    candidate_ids: Vec<u64>,
    scores: Vec<f32>,
    measure_tag: String,
}

impl SimilarityMatrix {
    pub fn new(
        query_ids: Vec<u64>,
        candidate_ids: Vec<u64>,
        scores: Vec<f32>,
        measure_tag: impl Into<String>,
    ) -> Result<Self> {
        if scores.len() != query_ids.len() * candidate_ids.len() {
            return Err(FicoError::DimensionMismatch(format!(
                "{} scores for a {}x{} matrix",
                scores.len(),
                query_ids.len(),
                candidate_ids.len()
            )));
        }
        Ok(SimilarityMatrix {
            query_ids,
            candidate_ids,
            scores,
            measure_tag: measure_tag.into(),
        })
    }

    pub fn query_ids(&self) -> &[u64] {
        &self.query_ids
    }

    pub fn candidate_ids(&self) -> &[u64] {
        &self.candidate_ids
    }

    pub fn n_queries(&self) -> usize {
        self.query_ids.len()
    }

    pub fn n_candidates(&self) -> usize {
        self.candidate_ids.len()
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn row(&self, q: usize) -> &[f32] {
        let n = self.candidate_ids.len();
        &self.scores[q * n..(q + 1) * n]
    }

    pub fn get(&self, q: usize, c: usize) -> f32 {
        self.scores[q * self.candidate_ids.len() + c]
    }

    pub fn measure_tag(&self) -> &str {
        &self.measure_tag
    }

    /// Swaps the roles of queries and candidates (i2t ↔ t2i).
    pub fn transposed(&self) -> SimilarityMatrix {
        let (nq, nc) = (self.n_queries(), self.n_candidates());
        let mut scores = vec![0f32; nq * nc];
        for q in 0..nq {
            for c in 0..nc {
                scores[c * nq + q] = self.scores[q * nc + c];
            }
        }
        SimilarityMatrix {
            query_ids: self.candidate_ids.clone(),
            candidate_ids: self.query_ids.clone(),
            scores,
            measure_tag: self.measure_tag.clone(),
        }
    }

    pub fn validate(&self) -> Validation {
        let mut out = Validation::default();
        check_unique_ids(&self.query_ids, &mut out);
        check_unique_ids(&self.candidate_ids, &mut out);
        let nc = self.n_candidates();
        for (q, &id) in self.query_ids.iter().enumerate() {
            if self.scores[q * nc..(q + 1) * nc]
                .iter()
                .any(|s| !s.is_finite())
            {
                out.violation(format!("non-finite score, query id={id}"));
            }
        }
        out
    }
}

/// Sentinel column for result slots an approximate index could not fill.
pub const MISSING: u32 = u32::MAX;

/// Top-k candidate columns per query, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRetrieval {
    k: usize,
    query_ids: Vec<u64>,
    columns: Vec<u32>,
    scores: Vec<f32>,
}

impl RankedRetrieval {
    pub fn new(k: usize, query_ids: Vec<u64>, columns: Vec<u32>, scores: Vec<f32>) -> Result<Self> {
        if columns.len() != query_ids.len() * k || scores.len() != columns.len() {
            return Err(FicoError::DimensionMismatch(format!(
                "ranked retrieval of depth {k} for {} queries holds {} columns",
                query_ids.len(),
                columns.len()
            )));
        }
        Ok(RankedRetrieval {
            k,
            query_ids,
            columns,
            scores,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn query_ids(&self) -> &[u64] {
        &self.query_ids
    }

    pub fn n_queries(&self) -> usize {
        self.query_ids.len()
    }

    /// Columns for query `q`; may end in [`MISSING`] slots.
    pub fn row(&self, q: usize) -> &[u32] {
        &self.columns[q * self.k..(q + 1) * self.k]
    }

    pub fn row_scores(&self, q: usize) -> &[f32] {
        &self.scores[q * self.k..(q + 1) * self.k]
    }

    pub fn columns(&self) -> &[u32] {
        &self.columns
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    /// Stacks results of consecutive query blocks searched at the same depth.
    pub fn concat(parts: &[RankedRetrieval]) -> Result<Self> {
        let k = parts.first().map_or(0, |p| p.k);
        if parts.iter().any(|p| p.k != k) {
            return Err(FicoError::invalid("cannot stack results of different depths"));
        }
        Ok(RankedRetrieval {
            k,
            query_ids: parts.iter().flat_map(|p| p.query_ids.iter().copied()).collect(),
            columns: parts.iter().flat_map(|p| p.columns.iter().copied()).collect(),
            scores: parts.iter().flat_map(|p| p.scores.iter().copied()).collect(),
        })
    }

    /// First `k` columns of every row.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k {
            return Err(FicoError::invalid(format!("cannot truncate depth {} to {k}", self.k)));
        }
        let mut columns = Vec::with_capacity(self.n_queries() * k);
        let mut scores = Vec::with_capacity(self.n_queries() * k);
        for q in 0..self.n_queries() {
            columns.extend_from_slice(&self.row(q)[..k]);
            scores.extend_from_slice(&self.row_scores(q)[..k]);
        }
        RankedRetrieval::new(k, self.query_ids.clone(), columns, scores)
    }

    /// SHA-256 over the depth, query IDs and result columns.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update((self.k as u64).to_le_bytes());
        for id in &self.query_ids {
            h.update(id.to_le_bytes());
        }
        for c in &self.columns {
            h.update(c.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Train/val/test partition of sample IDs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<u64>,
    pub val: Vec<u64>,
    pub test: Vec<u64>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks pairwise disjointness and, when given, coverage of `universe`.
    pub fn validate(&self, universe: Option<&[u64]>) -> Validation {
        let mut out = Validation::default();
        let mut seen: HashMap<u64, &str> = HashMap::new();
        for (name, part) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &id in part.iter() {
                if let Some(prev) = seen.insert(id, name) {
                    out.violation(format!("id {id} in both {prev} and {name}"));
                }
            }
        }
        if let Some(universe) = universe {
            let u: HashSet<u64> = universe.iter().copied().collect();
            for id in seen.keys() {
                if !u.contains(id) {
                    out.violation(format!("id {id} not in the input universe"));
                }
            }
            if u.len() != seen.len() {
                let mut missing: Vec<u64> = u.iter().filter(|id| !seen.contains_key(id)).copied().collect();
                missing.sort_unstable();
                for id in missing {
                    out.violation(format!("id {id} missing from split"));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Instance,
    Category,
    Bench,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "i2t")]
    I2T,
    #[serde(rename = "t2i")]
    T2I,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl std::str::FromStr for Direction {
    type Err = FicoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i2t" => Ok(Direction::I2T),
            "t2i" => Ok(Direction::T2I),
            other => Err(FicoError::invalid(format!("unknown direction {other:?}"))),
        }
    }
}

/// Per-query values for one named metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerQuery {
    pub metric: String,
    pub values: BTreeMap<u64, f64>,
}

/// Evaluation results plus provenance.
///
/// `timings` holds wall-clock measurements and is the only part of a report
/// allowed to differ between two runs of the same invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub direction: Direction,
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_query: Option<PerQuery>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub timings: BTreeMap<String, f64>,
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl EvalReport {
    pub fn new(task: Task, direction: Direction) -> Self {
        let mut meta = BTreeMap::new();
        meta.insert(
            "tool_version".to_owned(),
            serde_json::Value::String(crate::VERSION.to_owned()),
        );
        EvalReport {
            task,
            direction,
            metrics: BTreeMap::new(),
            per_query: None,
            timings: BTreeMap::new(),
            meta,
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.meta.insert(key.to_owned(), value.into());
    }

    pub fn validate(&self) -> Validation {
        let mut out = Validation::default();
        for (name, &v) in &self.metrics {
            let unit = name.starts_with("R@")
                || name.starts_with("P@")
                || name.starts_with("mAP@")
                || name.starts_with("AP@")
                || name.starts_with("P_interp@");
            if !v.is_finite() || (unit && !(0.0..=1.0).contains(&v)) || v < 0.0 {
                out.violation(format!("metric {name} out of range: {v}"));
            }
        }
        for (name, &v) in &self.timings {
            if !v.is_finite() || v < 0.0 {
                out.violation(format!("timing {name} negative or non-finite: {v}"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_embedding_is_reported_with_id() {
        let set = EmbeddingSet::new(vec![3, 7], 2, Values::F32(vec![1.0, 0.0, f32::NAN, 1.0])).unwrap();
        let v = set.validate();
        assert_eq!(v.violations, vec!["non-finite value, id=7".to_owned()]);
    }

    #[test]
    fn well_formed_codes_validate() {
        let codes = BinaryCodeSet::new(vec![0, 1], 64, vec![u64::MAX, 0x1234]).unwrap();
        assert!(codes.validate().is_ok());
    }

    #[test]
    fn padding_bits_are_rejected() {
        let codes = BinaryCodeSet::new(vec![5], 8, vec![0x1FF]).unwrap();
        assert_eq!(codes.validate().violations, vec!["nonzero padding bits, id=5".to_owned()]);
    }

    #[test]
    fn code_bits_must_be_multiple_of_eight() {
        assert!(BinaryCodeSet::new(vec![0], 12, vec![0]).is_err());
    }

    #[test]
    fn caption_under_two_images_breaks_partition() {
        let g = InstanceGroups::from_entries([(0, vec![10, 11, 12]), (1, vec![12, 13])]);
        let v = g.validate();
        assert_eq!(v.violations, vec!["caption 12 not a partition".to_owned()]);
    }

    #[test]
    fn groups_inverse_is_consistent() {
        let g = InstanceGroups::from_entries([(0, vec![10, 11]), (1, vec![12])]);
        assert!(g.validate().is_ok());
        for (&img, caps) in g.groups() {
            for &c in caps {
                assert_eq!(g.image_of(c), Some(img));
            }
        }
        assert_eq!(g.num_captions(), 3);
    }

    #[test]
    fn empty_label_set_is_a_warning() {
        let mut e = BTreeMap::new();
        e.insert(0, vec![3, 1, 1]);
        e.insert(1, vec![]);
        let l = LabelMatrix::with_inferred_categories(e);
        assert_eq!(l.num_categories(), 4);
        assert_eq!(l.get(0), Some(&[1, 3][..]));
        let v = l.validate();
        assert!(v.is_ok());
        assert_eq!(v.warnings.len(), 1);
    }

    #[test]
    fn signed_view_of_complement_is_negation() {
        let codes = BinaryCodeSet::new(vec![0, 1], 72, vec![0xDEAD_BEEF, 0x5A, u64::MAX, 0x01]).unwrap();
        assert!(codes.validate().is_ok());
        let a = SignedCodeView::from_codes(&codes);
        let b = SignedCodeView::from_codes(&codes.complement());
        let (Values::F32(x), Values::F32(y)) = (a.as_embeddings().values(), b.as_embeddings().values()) else {
            unreachable!()
        };
        assert!(x.iter().zip(y).all(|(p, q)| *p == -*q));
    }

    #[test]
    fn split_overlap_detected() {
        let s = Split {
            train: vec![1, 2],
            val: vec![3],
            test: vec![2],
        };
        let v = s.validate(Some(&[1, 2, 3, 4]));
        assert_eq!(v.violations.len(), 2);
    }

    #[test]
    fn transpose_round_trip() {
        let m = SimilarityMatrix::new(vec![1, 2], vec![5, 6, 7], vec![1., 2., 3., 4., 5., 6.], "ip").unwrap();
        let t = m.transposed();
        assert_eq!(t.get(2, 1), 6.0);
        assert_eq!(t.transposed(), m);
    }
}
