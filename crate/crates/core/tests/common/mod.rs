//! Brute-force reference implementations used by the integration tests.
//!
//! Everything here is written from the metric definitions directly: full
//! sorts, linear scans, no shared code with the library beyond the data
//! types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fico::model::{BinaryCodeSet, EmbeddingSet, InstanceGroups, LabelMatrix, SimilarityMatrix, Values};
use rand::Rng;

pub const TOL: f64 = 1e-12;

/// Candidate columns in full rank order: score descending, then ID ascending.
pub fn full_ranking(scores: &[f32], ids: &[u64]) -> Vec<usize> {
    let mut cols: Vec<usize> = (0..scores.len()).collect();
    cols.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("finite scores")
            .then(ids[a].cmp(&ids[b]))
    });
    cols
}

pub fn oracle_rank_topk(sim: &SimilarityMatrix, k: usize) -> Vec<Vec<usize>> {
    (0..sim.n_queries())
        .map(|q| full_ranking(sim.row(q), sim.candidate_ids())[..k].to_vec())
        .collect()
}

/// Hit-rate recall: a query counts when any relevant candidate sits in the top k.
pub fn oracle_recall(sim: &SimilarityMatrix, relevant: impl Fn(u64, u64) -> bool, k: usize) -> f64 {
    let mut hits = 0usize;
    for q in 0..sim.n_queries() {
        let rank = full_ranking(sim.row(q), sim.candidate_ids());
        let qid = sim.query_ids()[q];
        if rank[..k].iter().any(|&c| relevant(qid, sim.candidate_ids()[c])) {
            hits += 1;
        }
    }
    hits as f64 / sim.n_queries() as f64
}

pub fn oracle_precision(rel: &[bool], k: usize) -> f64 {
    rel[..k].iter().filter(|&&r| r).count() as f64 / k as f64
}

/// AP@k with the found-within-top-k denominator (0 when nothing is found).
pub fn oracle_ap(rel: &[bool], k: usize) -> f64 {
    let mut found = 0usize;
    let mut sum = 0.0;
    for i in 0..k {
        if rel[i] {
            found += 1;
            sum += oracle_precision(rel, i + 1);
        }
    }
    if found == 0 {
        0.0
    } else {
        sum / found as f64
    }
}

/// AP@k normalised by `min(k, total relevant)`.
pub fn oracle_ap_min(rel: &[bool], k: usize) -> f64 {
    let total = rel.iter().filter(|&&r| r).count();
    let mut sum = 0.0;
    for i in 0..k {
        if rel[i] {
            sum += oracle_precision(rel, i + 1);
        }
    }
    if total == 0 {
        0.0
    } else {
        sum / k.min(total) as f64
    }
}

/// Textbook interpolation: at level r, the best precision over every rank
/// whose recall is at least r.
pub fn oracle_interpolated(rel: &[bool]) -> [f64; 11] {
    let total = rel.iter().filter(|&&r| r).count() as f64;
    let mut points = Vec::new();
    let mut found = 0.0;
    for (i, &r) in rel.iter().enumerate() {
        if r {
            found += 1.0;
        }
        points.push((found / total, found / (i + 1) as f64));
    }
    let mut out = [0.0; 11];
    for (l, slot) in out.iter_mut().enumerate() {
        let level = l as f64 / 10.0;
        *slot = points
            .iter()
            .filter(|(rec, _)| *rec >= level)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
    }
    out
}

/// Per-query relevance flags along the full ranking, for queries with at
/// least one relevant candidate; `None` for excluded queries.
pub fn category_relevance(sim: &SimilarityMatrix, ql: &LabelMatrix, cl: &LabelMatrix) -> Vec<Option<Vec<bool>>> {
    (0..sim.n_queries())
        .map(|q| {
            let qset: BTreeSet<u32> = ql.get(sim.query_ids()[q]).unwrap().iter().copied().collect();
            let rank = full_ranking(sim.row(q), sim.candidate_ids());
            let rel: Vec<bool> = rank
                .iter()
                .map(|&c| cl.get(sim.candidate_ids()[c]).unwrap().iter().any(|l| qset.contains(l)))
                .collect();
            rel.iter().any(|&r| r).then_some(rel)
        })
        .collect()
}

pub fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

/// Scores with deliberate ties: about half the rows draw from five levels.
pub fn random_scores(rng: &mut impl Rng, n: usize) -> Vec<f32> {
    let coarse = rng.gen_bool(0.5);
    (0..n)
        .map(|_| {
            if coarse {
                rng.gen_range(0..5) as f32 * 0.25
            } else {
                rng.gen_range(-1.0f32..1.0)
            }
        })
        .collect()
}

/// Distinct, shuffled IDs so that column order and ID order differ.
pub fn random_ids(rng: &mut impl Rng, n: usize) -> Vec<u64> {
    let mut ids: Vec<u64> = (0..n as u64).map(|i| i * 3 + rng.gen_range(0..3)).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        ids.swap(i, j);
    }
    ids
}

pub fn random_sim(rng: &mut impl Rng, qids: Vec<u64>, cids: Vec<u64>) -> SimilarityMatrix {
    let scores: Vec<f32> = (0..qids.len()).flat_map(|_| random_scores(rng, cids.len())).collect();
    SimilarityMatrix::new(qids, cids, scores, "random").unwrap()
}

pub fn random_labels(rng: &mut impl Rng, ids: &[u64], c: u32) -> LabelMatrix {
    let entries: BTreeMap<u64, Vec<u32>> = ids
        .iter()
        .map(|&id| {
            let set: Vec<u32> = (0..c).filter(|_| rng.gen_bool(0.3)).collect();
            (id, set)
        })
        .collect();
    LabelMatrix::new(entries, c)
}

/// `n_images` images with 1..=5 captions each, total captions capped at `max_captions`.
pub fn random_groups(rng: &mut impl Rng, n_images: usize, max_captions: usize) -> InstanceGroups {
    let mut next = 1000u64;
    let mut entries = Vec::new();
    let mut left = max_captions;
    for img in 0..n_images {
        let reserve = n_images - img - 1;
        let size = rng.gen_range(1..=5).min(left - reserve);
        let caps: Vec<u64> = (0..size).map(|_| {
            next += rng.gen_range(1..4);
            next
        }).collect();
        left -= size;
        entries.push((img as u64 * 7 + 1, caps));
    }
    InstanceGroups::from_entries(entries)
}

/// Small integers stored as f32: every dot product and squared distance is
/// exact in any summation order, so scores do not depend on the kernel.
pub fn integer_embeddings(rng: &mut impl Rng, ids: Vec<u64>, dim: usize) -> EmbeddingSet {
    let v: Vec<f32> = (0..ids.len() * dim).map(|_| rng.gen_range(-4i32..=4) as f32).collect();
    EmbeddingSet::new(ids, dim, Values::F32(v)).unwrap()
}

pub fn random_codes(rng: &mut impl Rng, ids: Vec<u64>, bits: usize) -> BinaryCodeSet {
    let per = bits.div_ceil(64);
    let mut words = Vec::with_capacity(ids.len() * per);
    for _ in 0..ids.len() {
        for w in 0..per {
            let mut x: u64 = rng.gen();
            let used = bits - w * 64;
            if used < 64 {
                x &= (1u64 << used) - 1;
            }
            words.push(x);
        }
    }
    BinaryCodeSet::new(ids, bits, words).unwrap()
}

/// Exact dense score from the definitions, computed in f64 in index order.
pub fn oracle_dense_score(measure: &str, q: &[f64], c: &[f64]) -> f32 {
    let dot: f64 = q.iter().zip(c).map(|(a, b)| a * b).sum();
    match measure {
        "ip" => dot as f32,
        "cosine" => {
            let qq: f64 = q.iter().map(|a| a * a).sum();
            let cc: f64 = c.iter().map(|a| a * a).sum();
            (dot / (qq.sqrt() * cc.sqrt())) as f32
        }
        "l2" => {
            let d2: f64 = q.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            -(d2.sqrt()) as f32
        }
        other => panic!("no dense oracle for {other}"),
    }
}

pub fn oracle_hamming(a: &[u64], b: &[u64], bits: usize) -> u32 {
    (0..bits)
        .filter(|&j| ((a[j / 64] >> (j % 64)) & 1) != ((b[j / 64] >> (j % 64)) & 1))
        .count() as u32
}

pub fn fico_bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_fico"))
}

pub fn fico(args: &[&str]) -> Output {
    Command::new(fico_bin()).args(args).env_remove("FICO_THREADS").output().expect("binary runs")
}

pub fn fico_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(fico_bin());
    c.args(args).env_remove("FICO_THREADS");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Report JSON with the `timings` object removed.
pub fn without_timings(path: &Path) -> String {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    strip_timings(&mut v);
    v.to_string()
}

fn strip_timings(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(o) => {
            o.remove("timings");
            o.values_mut().for_each(strip_timings);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_timings),
        _ => {}
    }
}
