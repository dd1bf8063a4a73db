//! Hierarchical navigable small world graph over dense embeddings.
//!
//! Insertion follows the usual layered scheme: a node's top layer is drawn
//! as `floor(-ln(U) / ln(M))` from the seeded generator, the insert point is
//! found by greedy descent, and each layer from the node's top down to 0 is
//! searched with a beam of width `ef_construction`. Neighbours are the
//! nearest `M` of the beam (no diversity heuristic). Reverse links are
//! trimmed back to the nearest `M` of their owner, or `2M` on layer 0.
//! Trimming can strand a node with no in-links, so a final pass links every
//! unreachable layer-0 node back into the graph.
//!
//! Similarities are "higher is better"; every comparison breaks score ties
//! by the lower candidate ID so builds and searches are reproducible.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{FicoError, Result};
use crate::model::{EmbeddingSet, RankedRetrieval, Values};
use crate::similarity::{check_nonzero_norms, dense_score, row_norms, Measure, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HnswParams {
    pub m: usize,
    pub ef_construction: usize,
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        HnswParams {
            m: 32,
            ef_construction: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Scored {
    score: f32,
    node: u32,
    // candidate ID of `node`, used for tie-breaking
    id: u64,
}

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    // Greater means better: higher score, then lower ID.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .partial_cmp(&other.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Visited {
    marks: Vec<u32>,
    epoch: u32,
}

impl Visited {
    fn new(n: usize) -> Self {
        Visited {
            marks: vec![0; n],
            epoch: 0,
        }
    }

    fn reset(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.marks.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
    }

    fn insert(&mut self, i: u32) -> bool {
        let m = &mut self.marks[i as usize];
        if *m == self.epoch {
            false
        } else {
            *m = self.epoch;
            true
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HnswIndex {
    data: EmbeddingSet,
    measure: Measure,
    norms: Vec<f64>,
    params: HnswParams,
    levels: Vec<u8>,
    // links[node][layer]
    links: Vec<Vec<Vec<u32>>>,
    entry: u32,
}

struct Graph<'a, T: Real> {
    vals: &'a [T],
    dim: usize,
    ids: &'a [u64],
    norms: &'a [f64],
    measure: Measure,
    links: &'a [Vec<Vec<u32>>],
}

impl<T: Real> Graph<'_, T> {
    #[inline]
    fn score(&self, q: &[T], qn: f64, node: u32) -> Scored {
        let i = node as usize;
        let n = if self.norms.is_empty() { 0.0 } else { self.norms[i] };
        Scored {
            score: dense_score(self.measure, q, qn, &self.vals[i * self.dim..(i + 1) * self.dim], n),
            node,
            id: self.ids[i],
        }
    }

    fn greedy(&self, q: &[T], qn: f64, mut cur: Scored, layer: usize) -> Scored {
        loop {
            let mut improved = false;
            for &nb in &self.links[cur.node as usize][layer] {
                let s = self.score(q, qn, nb);
                if s > cur {
                    cur = s;
                    improved = true;
                }
            }
            if !improved {
                return cur;
            }
        }
    }

    /// Beam search on one layer; returns up to `ef` nodes, best first.
    fn beam(&self, q: &[T], qn: f64, entries: &[Scored], ef: usize, layer: usize, visited: &mut Visited) -> Vec<Scored> {
        visited.reset();
        let mut frontier: BinaryHeap<Scored> = BinaryHeap::new();
        let mut found: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
        for &e in entries {
            if visited.insert(e.node) {
                frontier.push(e);
                found.push(Reverse(e));
                if found.len() > ef {
                    found.pop();
                }
            }
        }
        while let Some(c) = frontier.pop() {
            let worst = found.peek().expect("non-empty").0;
            if found.len() >= ef && c < worst {
                break;
            }
            for &nb in &self.links[c.node as usize][layer] {
                if !visited.insert(nb) {
                    continue;
                }
                let s = self.score(q, qn, nb);
                if found.len() < ef || s > found.peek().expect("non-empty").0 {
                    frontier.push(s);
                    found.push(Reverse(s));
                    if found.len() > ef {
                        found.pop();
                    }
                }
            }
        }
        let mut out: Vec<Scored> = found.into_iter().map(|r| r.0).collect();
        out.sort_unstable_by(|a, b| b.cmp(a));
        out
    }

    fn search(&self, q: &[T], qn: f64, entry: u32, top: usize, ef: usize, visited: &mut Visited) -> Vec<Scored> {
        let mut cur = self.score(q, qn, entry);
        for layer in (1..=top).rev() {
            cur = self.greedy(q, qn, cur, layer);
        }
        self.beam(q, qn, &[cur], ef, 0, visited)
    }
}

fn node_level(rng: &mut SplitMix64, ml: f64) -> usize {
    let u: f64 = 1.0 - rng.gen::<f64>();
    ((-u.ln() * ml).floor() as usize).min(u8::MAX as usize)
}

fn build_graph<T: Real>(
    vals: &[T],
    dim: usize,
    ids: &[u64],
    norms: &[f64],
    measure: Measure,
    params: HnswParams,
) -> (Vec<u8>, Vec<Vec<Vec<u32>>>, u32) {
    let n = ids.len();
    let m = params.m;
    let ml = 1.0 / (m as f64).ln();
    let mut rng = SplitMix64::seed_from_u64(params.seed);
    let levels: Vec<u8> = (0..n).map(|_| node_level(&mut rng, ml) as u8).collect();
    let mut links: Vec<Vec<Vec<u32>>> = levels.iter().map(|&l| vec![Vec::new(); l as usize + 1]).collect();
    let mut visited = Visited::new(n);
    let mut entry = 0u32;
    let mut top = levels.first().map_or(0, |&l| l as usize);

    for i in 1..n {
        let q = &vals[i * dim..(i + 1) * dim];
        let qn = if norms.is_empty() { 0.0 } else { norms[i] };
        let level = levels[i] as usize;
        let mut new_links: Vec<(usize, Vec<u32>)> = Vec::new();
        {
            let g = Graph { vals, dim, ids, norms, measure, links: &links };
            let mut cur = g.score(q, qn, entry);
            for layer in ((level + 1)..=top).rev() {
                cur = g.greedy(q, qn, cur, layer);
            }
            let mut entries = vec![cur];
            for layer in (0..=level.min(top)).rev() {
                let beam = g.beam(q, qn, &entries, params.ef_construction, layer, &mut visited);
                new_links.push((layer, beam.iter().take(m).map(|s| s.node).collect()));
                entries = beam;
            }
        }
        for (layer, nbrs) in new_links {
            for &nb in &nbrs {
                links[nb as usize][layer].push(i as u32);
                let cap = if layer == 0 { 2 * m } else { m };
                if links[nb as usize][layer].len() > cap {
                    let owner = nb as usize;
                    let orow = &vals[owner * dim..(owner + 1) * dim];
                    let on = if norms.is_empty() { 0.0 } else { norms[owner] };
                    let g = Graph { vals, dim, ids, norms, measure, links: &links };
                    let mut scored: Vec<Scored> = links[owner][layer].iter().map(|&x| g.score(orow, on, x)).collect();
                    scored.sort_unstable_by(|a, b| b.cmp(a));
                    scored.truncate(cap);
                    links[owner][layer] = scored.into_iter().map(|s| s.node).collect();
                }
            }
            links[i][layer] = nbrs;
        }
        if level > top {
            top = level;
            entry = i as u32;
        }
    }
    if n > 0 {
        reconnect_layer0(&mut links, entry);
    }
    (levels, links, entry)
}

/// Gives every layer-0 node unreachable from `entry` an in-link from its
/// best-ranked reachable out-neighbour (or from `entry` if it has none).
fn reconnect_layer0(links: &mut [Vec<Vec<u32>>], entry: u32) {
    let n = links.len();
    let mut seen = vec![false; n];
    let mut stack = vec![entry as usize];
    seen[entry as usize] = true;
    loop {
        while let Some(x) = stack.pop() {
            for &y in &links[x][0] {
                if !seen[y as usize] {
                    seen[y as usize] = true;
                    stack.push(y as usize);
                }
            }
        }
        let Some(u) = (0..n).find(|&u| !seen[u]) else { break };
        // prefer an orphan with a reachable out-neighbour
        let pick = (u..n)
            .filter(|&v| !seen[v])
            .find_map(|v| links[v][0].iter().find(|&&y| seen[y as usize]).map(|&y| (v, y as usize)));
        let (v, from) = pick.unwrap_or((u, entry as usize));
        links[from][0].push(v as u32);
        seen[v] = true;
        stack.push(v);
    }
}

impl HnswIndex {
    pub fn build(data: EmbeddingSet, measure: Measure, params: HnswParams) -> Result<Self> {
        if params.m < 2 {
            return Err(FicoError::invalid("M must be at least 2"));
        }
        if params.ef_construction == 0 {
            return Err(FicoError::invalid("ef_construction must be positive"));
        }
        if !measure.is_dense() {
            return Err(FicoError::invalid(format!("HNSW needs a dense measure, got {measure}")));
        }
        if data.is_empty() {
            return Err(FicoError::invalid("cannot build HNSW over an empty set"));
        }
        let dim = data.dim();
        let norms = if measure == Measure::Cosine {
            let n = match data.values() {
                Values::F32(v) => row_norms(v, dim),
                Values::F64(v) => row_norms(v, dim),
            };
            check_nonzero_norms(&n, data.ids())?;
            n
        } else {
            Vec::new()
        };
        let (levels, links, entry) = match data.values() {
            Values::F32(v) => build_graph(v, dim, data.ids(), &norms, measure, params),
            Values::F64(v) => build_graph(v, dim, data.ids(), &norms, measure, params),
        };
        Ok(HnswIndex {
            data,
            measure,
            norms,
            params,
            levels,
            links,
            entry,
        })
    }

    pub(crate) fn from_parts(
        data: EmbeddingSet,
        measure: Measure,
        params: HnswParams,
        levels: Vec<u8>,
        links: Vec<Vec<Vec<u32>>>,
        entry: u32,
    ) -> Result<Self> {
        let n = data.len();
        if levels.len() != n || links.len() != n || entry as usize >= n.max(1) {
            return Err(FicoError::format("HNSW graph does not match its data"));
        }
        for (lv, l) in levels.iter().zip(&links) {
            if l.len() != *lv as usize + 1 || l.iter().flatten().any(|&x| x as usize >= n) {
                return Err(FicoError::format("malformed HNSW adjacency"));
            }
        }
        let norms = if measure == Measure::Cosine {
            match data.values() {
                Values::F32(v) => row_norms(v, data.dim()),
                Values::F64(v) => row_norms(v, data.dim()),
            }
        } else {
            Vec::new()
        };
        Ok(HnswIndex {
            data,
            measure,
            norms,
            params,
            levels,
            links,
            entry,
        })
    }

    pub fn data(&self) -> &EmbeddingSet {
        &self.data
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn params(&self) -> HnswParams {
        self.params
    }

    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    /// Adjacency of `node` on `layer`, empty if the node is not on it.
    pub fn neighbours(&self, node: usize, layer: usize) -> &[u32] {
        self.links[node].get(layer).map_or(&[], Vec::as_slice)
    }

    pub fn entry_point(&self) -> u32 {
        self.entry
    }

    pub fn top_layer(&self) -> usize {
        self.levels[self.entry as usize] as usize
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.entry.to_le_bytes());
        for (lv, l) in self.levels.iter().zip(&self.links) {
            h.update([*lv]);
            for layer in l {
                h.update((layer.len() as u32).to_le_bytes());
                for x in layer {
                    h.update(x.to_le_bytes());
                }
            }
        }
        hex::encode(h.finalize())
    }

    /// Approximate top-`k`; the layer-0 beam is `max(ef_search, k)` wide.
    pub fn search(&self, queries: &EmbeddingSet, k: usize, ef_search: usize) -> Result<RankedRetrieval> {
        let n = self.data.len();
        if k == 0 || k > n {
            return Err(FicoError::invalid(format!("k={k} outside [1, {n}]")));
        }
        if ef_search < k {
            return Err(FicoError::invalid(format!("ef_search={ef_search} below k={k}")));
        }
        if queries.dim() != self.data.dim() {
            return Err(FicoError::DimensionMismatch(format!(
                "dim {} queries vs dim {} index",
                queries.dim(),
                self.data.dim()
            )));
        }
        let out = match (queries.values(), self.data.values()) {
            (Values::F32(q), Values::F32(v)) => self.search_typed(q, v, queries.ids(), k, ef_search)?,
            (Values::F64(q), Values::F64(v)) => self.search_typed(q, v, queries.ids(), k, ef_search)?,
            _ => {
                return Err(FicoError::invalid(
                    "HNSW queries must have the same dtype as the indexed data",
                ))
            }
        };
        let (columns, scores): (Vec<u32>, Vec<f32>) = out.into_iter().unzip();
        RankedRetrieval::new(k, queries.ids().to_vec(), columns, scores)
    }

    fn search_typed<T: Real>(&self, q: &[T], vals: &[T], q_ids: &[u64], k: usize, ef: usize) -> Result<Vec<(u32, f32)>> {
        let dim = self.data.dim();
        let qn = if self.measure == Measure::Cosine {
            let qn = row_norms(q, dim);
            check_nonzero_norms(&qn, q_ids)?;
            qn
        } else {
            vec![0.0; q_ids.len()]
        };
        let g = Graph {
            vals,
            dim,
            ids: self.data.ids(),
            norms: &self.norms,
            measure: self.measure,
            links: &self.links,
        };
        let top = self.top_layer();
        let mut out = vec![(0u32, 0f32); q_ids.len() * k];
        out.par_chunks_mut(k).enumerate().for_each_init(
            || Visited::new(self.data.len()),
            |visited, (qi, dst)| {
                let row = &q[qi * dim..(qi + 1) * dim];
                let found = g.search(row, qn[qi], self.entry, top, ef, visited);
                for (d, s) in dst.iter_mut().zip(found.iter()) {
                    *d = (s.node, s.score);
                }
            },
        );
        Ok(out)
    }
}
