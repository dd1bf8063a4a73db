//! Exhaustive and approximate nearest-neighbour search.
//!
//! Indexes persist as `"FICOIDX1"`, a `u32` type tag, a length-prefixed
//! parameter block and a type-specific payload, all little-endian.

pub mod flat;
pub mod hnsw;
pub mod ivf;
pub mod lsh;
pub mod recall;
pub mod synth;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub use flat::{BinaryFlatIndex, FlatIndex};
pub use hnsw::{HnswIndex, HnswParams};
pub use ivf::BinaryIvfIndex;
pub use lsh::binarise_lsh;
pub use recall::{recall_vs_baseline, RecallMode};
pub use synth::{generate_synthetic, SyntheticSpec};

use crate::error::{FicoError, Result};
use crate::model::{BinaryCodeSet, Dtype, EmbeddingSet, RankedRetrieval, Values};
use crate::similarity::{Measure, Representation};

pub const INDEX_MAGIC: &[u8; 8] = b"FICOIDX1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndexKind {
    Flat,
    BinaryFlat,
    BinaryIvf,
    Hnsw,
}

impl IndexKind {
    pub fn tag(self) -> &'static str {
        match self {
            IndexKind::Flat => "flat",
            IndexKind::BinaryFlat => "bflat",
            IndexKind::BinaryIvf => "bivf",
            IndexKind::Hnsw => "hnsw",
        }
    }

    fn code(self) -> u32 {
        match self {
            IndexKind::Flat => 1,
            IndexKind::BinaryFlat => 2,
            IndexKind::BinaryIvf => 3,
            IndexKind::Hnsw => 4,
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, IndexKind::BinaryFlat | IndexKind::BinaryIvf)
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for IndexKind {
    type Err = FicoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(IndexKind::Flat),
            "bflat" => Ok(IndexKind::BinaryFlat),
            "bivf" => Ok(IndexKind::BinaryIvf),
            "hnsw" => Ok(IndexKind::Hnsw),
            other => Err(FicoError::invalid(format!("unknown index type {other:?}"))),
        }
    }
}

/// Query-time knobs; each index reads only the ones it understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchParams {
    pub ef_search: usize,
    pub nprobe: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            ef_search: 128,
            nprobe: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyIndex {
    Flat(FlatIndex),
    BinaryFlat(BinaryFlatIndex),
    BinaryIvf(BinaryIvfIndex),
    Hnsw(HnswIndex),
}

impl AnyIndex {
    pub fn kind(&self) -> IndexKind {
        match self {
            AnyIndex::Flat(_) => IndexKind::Flat,
            AnyIndex::BinaryFlat(_) => IndexKind::BinaryFlat,
            AnyIndex::BinaryIvf(_) => IndexKind::BinaryIvf,
            AnyIndex::Hnsw(_) => IndexKind::Hnsw,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnyIndex::Flat(i) => i.len(),
            AnyIndex::BinaryFlat(i) => i.len(),
            AnyIndex::BinaryIvf(i) => i.codes().len(),
            AnyIndex::Hnsw(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn candidate_ids(&self) -> &[u64] {
        match self {
            AnyIndex::Flat(i) => i.data().ids(),
            AnyIndex::BinaryFlat(i) => i.codes().ids(),
            AnyIndex::BinaryIvf(i) => i.codes().ids(),
            AnyIndex::Hnsw(i) => i.data().ids(),
        }
    }

    pub fn search(&self, queries: Representation<'_>, k: usize, params: &SearchParams) -> Result<RankedRetrieval> {
        match (self, queries) {
            (AnyIndex::Flat(i), Representation::Dense(q)) => i.search(q, k),
            (AnyIndex::Hnsw(i), Representation::Dense(q)) => i.search(q, k, params.ef_search.max(k)),
            (AnyIndex::BinaryFlat(i), Representation::Codes(q)) => i.search(q, k),
            (AnyIndex::BinaryIvf(i), Representation::Codes(q)) => i.search(q, k, params.nprobe.min(i.nlist())),
            _ => Err(FicoError::invalid(format!(
                "{} index cannot search this query representation",
                self.kind()
            ))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = ByteWriter::default();
        w.bytes(INDEX_MAGIC);
        w.u32(self.kind().code());
        let mut params = ByteWriter::default();
        let mut payload = ByteWriter::default();
        match self {
            AnyIndex::Flat(i) => {
                params.u32(measure_code(i.measure()));
                payload.embeddings(i.data());
            }
            AnyIndex::BinaryFlat(i) => payload.codes(i.codes()),
            AnyIndex::BinaryIvf(i) => {
                params.u64(i.nlist() as u64);
                params.u64(i.iters() as u64);
                params.u64(i.seed());
                payload.codes(i.codes());
                for w in i.centroids() {
                    payload.u64(*w);
                }
                for l in i.lists() {
                    payload.u64(l.len() as u64);
                    for &x in l {
                        payload.u32(x);
                    }
                }
            }
            AnyIndex::Hnsw(i) => {
                let p = i.params();
                params.u32(measure_code(i.measure()));
                params.u64(p.m as u64);
                params.u64(p.ef_construction as u64);
                params.u64(p.seed);
                payload.embeddings(i.data());
                payload.u32(i.entry_point());
                for (node, &lv) in i.levels().iter().enumerate() {
                    payload.bytes(&[lv]);
                    for layer in 0..=lv as usize {
                        let nb = i.neighbours(node, layer);
                        payload.u32(nb.len() as u32);
                        for &x in nb {
                            payload.u32(x);
                        }
                    }
                }
            }
        }
        w.u32(params.0.len() as u32);
        w.bytes(&params.0);
        w.bytes(&payload.0);
        std::fs::write(path, &w.0).map_err(|e| FicoError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| FicoError::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader(bytes);
        if r.take(8)? != INDEX_MAGIC {
            return Err(FicoError::format("bad magic"));
        }
        let tag = r.u32()?;
        let plen = r.u32()? as usize;
        let mut p = ByteReader(r.take(plen)?);
        let index = match tag {
            1 => {
                let measure = measure_from_code(p.u32()?)?;
                AnyIndex::Flat(FlatIndex::build(r.embeddings()?, measure)?)
            }
            2 => AnyIndex::BinaryFlat(BinaryFlatIndex::build(r.codes()?)),
            3 => {
                let nlist = p.u64()? as usize;
                let iters = p.u64()? as usize;
                let seed = p.u64()?;
                let codes = r.codes()?;
                let per = codes.words_per_code();
                let centroids = (0..nlist * per).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
                let mut lists = Vec::with_capacity(nlist);
                for _ in 0..nlist {
                    let len = r.u64()? as usize;
                    lists.push((0..len).map(|_| r.u32()).collect::<Result<Vec<_>>>()?);
                }
                AnyIndex::BinaryIvf(BinaryIvfIndex::from_parts(codes, centroids, lists, seed, iters)?)
            }
            4 => {
                let measure = measure_from_code(p.u32()?)?;
                let params = HnswParams {
                    m: p.u64()? as usize,
                    ef_construction: p.u64()? as usize,
                    seed: p.u64()?,
                };
                let data = r.embeddings()?;
                let entry = r.u32()?;
                let mut levels = Vec::with_capacity(data.len());
                let mut links = Vec::with_capacity(data.len());
                for _ in 0..data.len() {
                    let lv = r.take(1)?[0];
                    levels.push(lv);
                    let mut node = Vec::with_capacity(lv as usize + 1);
                    for _ in 0..=lv {
                        let len = r.u32()? as usize;
                        node.push((0..len).map(|_| r.u32()).collect::<Result<Vec<_>>>()?);
                    }
                    links.push(node);
                }
                AnyIndex::Hnsw(HnswIndex::from_parts(data, measure, params, levels, links, entry)?)
            }
            other => return Err(FicoError::format(format!("unknown index type tag {other}"))),
        };
        if !r.0.is_empty() {
            return Err(FicoError::format("trailing bytes after index payload"));
        }
        Ok(index)
    }

    /// Approximate resident size of the stored vectors/codes plus index structure.
    pub fn memory_bytes(&self) -> u64 {
        match self {
            AnyIndex::Flat(i) => (i.len() * i.data().dim() * i.data().dtype().size_bytes()) as u64,
            AnyIndex::BinaryFlat(i) => (i.codes().words().len() * 8) as u64,
            AnyIndex::BinaryIvf(i) => (i.codes().words().len() * 8 + i.centroids().len() * 8 + i.codes().len() * 4) as u64,
            AnyIndex::Hnsw(i) => {
                let links: usize = (0..i.len())
                    .map(|n| (0..=i.levels()[n] as usize).map(|l| i.neighbours(n, l).len()).sum::<usize>())
                    .sum();
                (i.len() * i.data().dim() * i.data().dtype().size_bytes() + links * 4) as u64
            }
        }
    }
}

fn measure_code(m: Measure) -> u32 {
    match m {
        Measure::Hamming => 0,
        Measure::InnerProduct => 1,
        Measure::Cosine => 2,
        Measure::Euclidean => 3,
    }
}

fn measure_from_code(c: u32) -> Result<Measure> {
    Ok(match c {
        0 => Measure::Hamming,
        1 => Measure::InnerProduct,
        2 => Measure::Cosine,
        3 => Measure::Euclidean,
        other => return Err(FicoError::format(format!("unknown measure code {other}"))),
    })
}

#[derive(Default)]
struct ByteWriter(Vec<u8>);

impl ByteWriter {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }

    fn u32(&mut self, x: u32) {
        self.bytes(&x.to_le_bytes());
    }

    fn u64(&mut self, x: u64) {
        self.bytes(&x.to_le_bytes());
    }

    fn embeddings(&mut self, s: &EmbeddingSet) {
        self.u64(s.len() as u64);
        self.u64(s.dim() as u64);
        self.bytes(&[match s.dtype() {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }]);
        for id in s.ids() {
            self.u64(*id);
        }
        match s.values() {
            Values::F32(v) => v.iter().for_each(|x| self.bytes(&x.to_le_bytes())),
            Values::F64(v) => v.iter().for_each(|x| self.bytes(&x.to_le_bytes())),
        }
    }

    fn codes(&mut self, c: &BinaryCodeSet) {
        self.u64(c.len() as u64);
        self.u64(c.code_bits() as u64);
        for id in c.ids() {
            self.u64(*id);
        }
        for w in c.words() {
            self.u64(*w);
        }
    }
}

struct ByteReader<'a>(&'a [u8]);

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(FicoError::format("truncated index file"));
        }
        let (head, rest) = self.0.split_at(n);
        self.0 = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn ids(&mut self, n: usize) -> Result<Vec<u64>> {
        (0..n).map(|_| self.u64()).collect()
    }

    fn embeddings(&mut self) -> Result<EmbeddingSet> {
        let n = self.u64()? as usize;
        let dim = self.u64()? as usize;
        let elem = self.take(1)?[0];
        let ids = self.ids(n)?;
        let values = match elem {
            4 => Values::F32(
                self.take(n * dim * 4)?
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            ),
            8 => Values::F64(
                self.take(n * dim * 8)?
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            ),
            other => return Err(FicoError::format(format!("unknown element width {other}"))),
        };
        EmbeddingSet::new(ids, dim, values)
    }

    fn codes(&mut self) -> Result<BinaryCodeSet> {
        let n = self.u64()? as usize;
        let bits = self.u64()? as usize;
        let ids = self.ids(n)?;
        let per = crate::model::words_for_bits(bits);
        let words = (0..n * per).map(|_| self.u64()).collect::<Result<Vec<_>>>()?;
        BinaryCodeSet::new(ids, bits, words)
    }
}
