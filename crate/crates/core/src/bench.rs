//! Storage accounting, search timing and scale series.
//!
//! A scale series runs the same set of indexes over growing copies of one
//! dataset (replicated files or larger synthetic draws). Each tier gets an
//! exhaustive baseline, every configured index is built, timed and scored
//! against it, and the results land in per-run reports plus a combined
//! `series.json` / `series.csv`. Tiers whose estimated footprint exceeds the
//! memory budget are recorded as `DNF` and skipped.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ann::{
    binarise_lsh, generate_synthetic, recall_vs_baseline, AnyIndex, BinaryFlatIndex, BinaryIvfIndex, FlatIndex,
    HnswIndex, HnswParams, IndexKind, RecallMode, SearchParams, SyntheticSpec,
};
use crate::codec;
use crate::dataset::replicate_embeddings;
use crate::error::{FicoError, Result};
use crate::model::{Direction, Dtype, EmbeddingSet, EvalReport, RankedRetrieval, Task};
use crate::similarity::{Measure, Representation};

const GIB: f64 = (1u64 << 30) as f64;

/// Queries are timed in blocks of this many; per-query latency is the block
/// time divided by its size.
pub const QUERY_BLOCK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageCost {
    pub bytes: u128,
    /// `bytes / 2^30`, rounded to two decimals.
    pub gib: f64,
}

pub fn storage_cost(n_samples: u64, dim: u64, dtype_bytes: u64) -> StorageCost {
    let bytes = n_samples as u128 * dim as u128 * dtype_bytes as u128;
    let gib = (bytes as f64 / GIB * 100.0).round() / 100.0;
    StorageCost { bytes, gib }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimingStats {
    pub build_seconds: f64,
    /// Mean over timed repeats of one full pass over the queries.
    pub total_search_seconds: f64,
    pub per_query_us_mean: f64,
    pub per_query_us_p50: f64,
    pub per_query_us_p99: f64,
    pub repeats: usize,
    pub warmups: usize,
}

impl TimingStats {
    pub fn write_into(&self, report: &mut EvalReport) {
        let t = &mut report.timings;
        t.insert("build_s".into(), self.build_seconds);
        t.insert("search_s".into(), self.total_search_seconds);
        t.insert("per_query_us_mean".into(), self.per_query_us_mean);
        t.insert("per_query_us_p50".into(), self.per_query_us_p50);
        t.insert("per_query_us_p99".into(), self.per_query_us_p99);
        report.set_meta("repeats", self.repeats);
        report.set_meta("warmups", self.warmups);
    }
}

fn slice_queries<'a>(q: &Representation<'a>, r: std::ops::Range<usize>) -> Owned {
    match q {
        Representation::Dense(e) => Owned::Dense(e.slice_rows(r)),
        Representation::Codes(c) => Owned::Codes(c.slice_rows(r)),
    }
}

enum Owned {
    Dense(EmbeddingSet),
    Codes(crate::model::BinaryCodeSet),
}

impl Owned {
    fn as_repr(&self) -> Representation<'_> {
        match self {
            Owned::Dense(e) => Representation::Dense(e),
            Owned::Codes(c) => Representation::Codes(c),
        }
    }
}

fn one_pass(
    index: &AnyIndex,
    blocks: &[Owned],
    k: usize,
    params: &SearchParams,
    lat_us: Option<&mut Vec<f64>>,
) -> Result<(f64, RankedRetrieval)> {
    let mut parts = Vec::with_capacity(blocks.len());
    let mut total = 0.0;
    let mut lat = lat_us;
    for b in blocks {
        let t0 = Instant::now();
        let r = index.search(b.as_repr(), k, params)?;
        let dt = t0.elapsed().as_secs_f64();
        total += dt;
        if let Some(l) = lat.as_deref_mut() {
            let per = dt * 1e6 / r.n_queries().max(1) as f64;
            l.extend(std::iter::repeat_n(per, r.n_queries()));
        }
        parts.push(r);
    }
    Ok((total, RankedRetrieval::concat(&parts)?))
}

fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let r = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[r - 1]
}

/// Runs `warmups` untimed passes and `repeats` timed passes over all
/// queries. Every pass must produce the same result digest. Returns the
/// statistics (with `build_seconds` left at zero) and the results.
pub fn time_search(
    index: &AnyIndex,
    queries: Representation<'_>,
    k: usize,
    params: &SearchParams,
    repeats: usize,
    warmups: usize,
) -> Result<(TimingStats, RankedRetrieval)> {
    if repeats == 0 {
        return Err(FicoError::invalid("repeats must be at least 1"));
    }
    let n = queries.len();
    let blocks: Vec<Owned> = (0..n)
        .step_by(QUERY_BLOCK)
        .map(|s| slice_queries(&queries, s..(s + QUERY_BLOCK).min(n)))
        .collect();
    let mut first: Option<(String, RankedRetrieval)> = None;
    let mut check = |r: RankedRetrieval| -> Result<()> {
        let d = r.digest();
        match &first {
            None => first = Some((d, r)),
            Some((d0, _)) if *d0 != d => return Err(FicoError::DigestMismatch),
            Some(_) => {}
        }
        Ok(())
    };
    for _ in 0..warmups {
        let (_, r) = one_pass(index, &blocks, k, params, None)?;
        check(r)?;
    }
    let mut lat = Vec::with_capacity(n * repeats);
    let mut totals = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let (t, r) = one_pass(index, &blocks, k, params, Some(&mut lat))?;
        totals.push(t);
        check(r)?;
    }
    lat.sort_unstable_by(|a, b| a.total_cmp(b));
    let mean = if lat.is_empty() { 0.0 } else { lat.iter().sum::<f64>() / lat.len() as f64 };
    let stats = TimingStats {
        build_seconds: 0.0,
        total_search_seconds: totals.iter().sum::<f64>() / repeats as f64,
        per_query_us_mean: mean,
        per_query_us_p50: nearest_rank(&lat, 0.5),
        per_query_us_p99: nearest_rank(&lat, 0.99),
        repeats,
        warmups,
    };
    let (_, results) = first.expect("at least one pass ran");
    Ok((stats, results))
}

/// One index configuration in a bench plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexConfig {
    #[serde(rename = "type")]
    pub kind: String,
    /// Row label; defaults to the type tag.
    #[serde(default)]
    pub name: Option<String>,
    /// Code length for binary indexes (random-hyperplane binarisation).
    #[serde(default = "default_bits")]
    pub bits: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_ef_construction")]
    pub ef_construction: usize,
    #[serde(default = "default_ef_search")]
    pub ef_search: usize,
    #[serde(default = "default_nlist")]
    pub nlist: usize,
    #[serde(default = "default_nprobe")]
    pub nprobe: usize,
    #[serde(default = "default_iters")]
    pub iters: usize,
}

fn default_bits() -> usize {
    64
}
fn default_m() -> usize {
    32
}
fn default_ef_construction() -> usize {
    200
}
fn default_ef_search() -> usize {
    128
}
fn default_nlist() -> usize {
    256
}
fn default_nprobe() -> usize {
    32
}
fn default_iters() -> usize {
    10
}

impl IndexConfig {
    pub fn of_kind(kind: IndexKind) -> Self {
        serde_json::from_value(json!({ "type": kind.tag() })).expect("defaults fill every field")
    }

    pub fn index_kind(&self) -> Result<IndexKind> {
        self.kind.parse()
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.clone())
    }

    fn params_json(&self, kind: IndexKind) -> Value {
        match kind {
            IndexKind::Flat => json!({}),
            IndexKind::BinaryFlat => json!({ "bits": self.bits }),
            IndexKind::BinaryIvf => {
                json!({ "bits": self.bits, "nlist": self.nlist, "nprobe": self.nprobe, "iters": self.iters })
            }
            IndexKind::Hnsw => {
                json!({ "m": self.m, "ef_construction": self.ef_construction, "ef_search": self.ef_search })
            }
        }
    }

    /// Bytes held by the index beyond the base vectors it was built from.
    fn estimate_bytes(&self, kind: IndexKind, n: u64, dim: u64, dtype_bytes: u64, nq: u64) -> u64 {
        let code = (self.bits / 8) as u64;
        match kind {
            IndexKind::Flat => n * dim * dtype_bytes,
            IndexKind::Hnsw => n * dim * dtype_bytes + n * (2 * self.m as u64 + self.m as u64 / 2) * 4,
            IndexKind::BinaryFlat => (n + nq) * code,
            IndexKind::BinaryIvf => (n + nq) * code + n * 4 + self.nlist as u64 * code,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum BenchSource {
    /// Tier `f` draws `f × n_base` base and `f × n_query` query points.
    Synthetic {
        n_base: usize,
        n_query: usize,
        dim: usize,
        n_clusters: usize,
        sigma_c: f64,
        sigma_n: f64,
    },
    /// Tier `f` replicates both files `f` times.
    Files {
        base: PathBuf,
        queries: PathBuf,
        #[serde(default = "default_dtype")]
        dtype: Dtype,
    },
}

fn default_dtype() -> Dtype {
    Dtype::F32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TierSpec {
    Factor(usize),
    WithIndexes { factor: usize, indexes: Vec<IndexConfig> },
}

impl TierSpec {
    pub fn factor(&self) -> usize {
        match self {
            TierSpec::Factor(f) => *f,
            TierSpec::WithIndexes { factor, .. } => *factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPlan {
    #[serde(default)]
    pub seed: u64,
    pub source: BenchSource,
    pub tiers: Vec<TierSpec>,
    /// Used by tiers that do not list their own.
    #[serde(default)]
    pub indexes: Vec<IndexConfig>,
    #[serde(default = "default_measure")]
    pub measure: String,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub warmups: usize,
    #[serde(default)]
    pub memory_budget_gib: Option<f64>,
}

fn default_measure() -> String {
    "ip".into()
}
fn default_ks() -> Vec<usize> {
    vec![1, 100, 1000]
}
fn default_repeats() -> usize {
    1
}

impl BenchPlan {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| FicoError::format(format!("malformed bench plan: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if self.tiers.is_empty() {
            v.push("plan has no tiers".to_owned());
        }
        if self.tiers.iter().any(|t| t.factor() == 0) {
            v.push("tier factors must be positive".to_owned());
        }
        if self.tiers.windows(2).any(|w| w[0].factor() >= w[1].factor()) {
            v.push("tier factors must be strictly ascending".to_owned());
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            v.push("ks must be non-empty and positive".to_owned());
        }
        if self.repeats == 0 {
            v.push("repeats must be at least 1".to_owned());
        }
        match self.measure.parse::<Measure>() {
            Ok(Measure::Hamming) => v.push("baseline measure must be dense".to_owned()),
            Err(e) => v.push(e.to_string()),
            Ok(_) => {}
        }
        if let Some(b) = self.memory_budget_gib {
            if !(b >= 0.0 && b.is_finite()) {
                v.push("memory budget must be non-negative".to_owned());
            }
        }
        for t in &self.tiers {
            let configs = self.configs_for(t);
            if configs.is_empty() {
                v.push(format!("tier {} has no indexes", t.factor()));
            }
            let mut labels: Vec<String> = configs.iter().map(|c| c.label()).collect();
            labels.sort();
            if labels.windows(2).any(|w| w[0] == w[1]) {
                v.push(format!("tier {} has duplicate index names", t.factor()));
            }
            for c in configs {
                if let Err(e) = c.index_kind() {
                    v.push(e.to_string());
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(FicoError::Validation(v))
        }
    }

    fn configs_for<'a>(&'a self, t: &'a TierSpec) -> &'a [IndexConfig] {
        match t {
            TierSpec::Factor(_) => &self.indexes,
            TierSpec::WithIndexes { indexes, .. } => indexes,
        }
    }
}

/// One (tier, index) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub factor: usize,
    pub index: String,
    pub dnf: bool,
    pub report: EvalReport,
}

impl SeriesRow {
    /// `<out_dir>/tier<factor>_<index>.json`
    pub fn report_path(&self, out_dir: &Path) -> PathBuf {
        out_dir.join(format!("tier{}_{}.json", self.factor, sanitize(&self.index)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesReport {
    pub ks: Vec<usize>,
    pub rows: Vec<SeriesRow>,
}

impl SeriesReport {
    pub fn to_json(&self, plan: &BenchPlan) -> Result<String> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut v = serde_json::to_value(&r.report).expect("report serializes");
                v["factor"] = json!(r.factor);
                v["index"] = json!(r.index);
                v
            })
            .collect();
        let plan = serde_json::to_value(plan).expect("plan serializes");
        canonical(&json!({ "plan": plan, "rows": rows, "tool_version": crate::VERSION }))
    }

    /// One line per row: tier, index, one recall column per k, build and
    /// search seconds, status. DNF rows leave the numeric fields empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tier,index");
        for k in &self.ks {
            out.push_str(&format!(",R@{k}"));
        }
        out.push_str(",build_s,search_s,status\n");
        for r in &self.rows {
            out.push_str(&format!("{},{}", r.factor, r.index));
            let cell = |v: Option<f64>| v.map(codec::format_real).unwrap_or_default();
            for k in &self.ks {
                out.push(',');
                out.push_str(&cell(if r.dnf { None } else { recall_at(&r.report, *k) }));
            }
            out.push(',');
            out.push_str(&cell(r.report.timings.get("build_s").copied()));
            out.push(',');
            out.push_str(&cell(r.report.timings.get("search_s").copied()));
            out.push_str(if r.dnf { ",DNF\n" } else { ",ok\n" });
        }
        out
    }
}

/// `R@k` for a plan k, which may have been clamped to the tier size.
fn recall_at(report: &EvalReport, k: usize) -> Option<f64> {
    let n = report.meta.get("n_base").and_then(Value::as_u64)? as usize;
    report.metric(&format!("R@{}", k.min(n)))
}

fn canonical(v: &Value) -> Result<String> {
    let mut s = codec::canonical_json(v)?;
    s.push('\n');
    Ok(s)
}

fn tier_data(plan: &BenchPlan, factor: usize) -> Result<(EmbeddingSet, EmbeddingSet)> {
    match &plan.source {
        BenchSource::Synthetic { n_base, n_query, dim, n_clusters, sigma_c, sigma_n } => {
            generate_synthetic(&SyntheticSpec {
                n_base: n_base * factor,
                n_query: n_query * factor,
                dim: *dim,
                n_clusters: *n_clusters,
                sigma_c: *sigma_c,
                sigma_n: *sigma_n,
                seed: plan.seed,
            })
        }
        BenchSource::Files { base, queries, dtype } => {
            let b = codec::read_vectors(base, *dtype, None)?;
            let q = codec::read_vectors(queries, *dtype, None)?;
            Ok((replicate_embeddings(&b, factor)?, replicate_embeddings(&q, factor)?))
        }
    }
}

fn tier_shape(plan: &BenchPlan, factor: usize) -> Result<(u64, u64, u64, u64)> {
    Ok(match &plan.source {
        BenchSource::Synthetic { n_base, n_query, dim, .. } => {
            ((n_base * factor) as u64, (n_query * factor) as u64, *dim as u64, 4)
        }
        BenchSource::Files { base, queries, dtype } => {
            // only headers are needed, but reading keeps the format checks in one place
            let b = codec::read_vectors(base, *dtype, None)?;
            let q = codec::read_vectors(queries, *dtype, None)?;
            let f = factor as u64;
            (b.len() as u64 * f, q.len() as u64 * f, b.dim() as u64, dtype.size_bytes() as u64)
        }
    })
}

fn build_index(
    cfg: &IndexConfig,
    kind: IndexKind,
    base: &EmbeddingSet,
    measure: Measure,
    seed: u64,
) -> Result<AnyIndex> {
    Ok(match kind {
        IndexKind::Flat => AnyIndex::Flat(FlatIndex::build(base.clone(), measure)?),
        IndexKind::Hnsw => AnyIndex::Hnsw(HnswIndex::build(
            base.clone(),
            measure,
            HnswParams { m: cfg.m, ef_construction: cfg.ef_construction, seed },
        )?),
        IndexKind::BinaryFlat => AnyIndex::BinaryFlat(BinaryFlatIndex::build(binarise_lsh(base, cfg.bits, seed)?)),
        IndexKind::BinaryIvf => {
            let codes = binarise_lsh(base, cfg.bits, seed)?;
            let nlist = cfg.nlist.min(codes.len());
            AnyIndex::BinaryIvf(BinaryIvfIndex::train(codes, nlist, cfg.iters, seed)?)
        }
    })
}

fn base_report(factor: usize, cfg: &IndexConfig, kind: IndexKind, measure: Measure, plan: &BenchPlan) -> EvalReport {
    let mut r = EvalReport::new(Task::Bench, Direction::NotApplicable);
    r.set_meta("factor", factor);
    r.set_meta("index", cfg.label());
    r.set_meta("index_type", kind.tag());
    r.set_meta("params", cfg.params_json(kind));
    r.set_meta("measure", if kind.is_binary() { "hamming" } else { measure.tag() });
    r.set_meta("baseline", format!("flat/{}", measure.tag()));
    r.set_meta("seed", plan.seed);
    r
}

/// Runs every tier of `plan`, writing `tier<f>_<index>.json` per run plus
/// `series.json` and `series.csv` into `out_dir`. `budget_gib` overrides the
/// plan's memory budget.
pub fn scale_series(plan: &BenchPlan, out_dir: &Path, budget_gib: Option<f64>) -> Result<SeriesReport> {
    plan.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| FicoError::io(out_dir, e))?;
    let measure: Measure = plan.measure.parse()?;
    let budget = budget_gib.or(plan.memory_budget_gib);
    let mut rows = Vec::new();

    for tier in &plan.tiers {
        let factor = tier.factor();
        let configs = plan.configs_for(tier);
        let (nb, nq, dim, db) = tier_shape(plan, factor)?;
        let depth = plan.ks.iter().copied().max().unwrap_or(1).min(nb as usize);
        let ks: Vec<usize> = {
            let mut ks: Vec<usize> = plan.ks.iter().map(|&k| k.min(nb as usize)).collect();
            ks.dedup();
            ks
        };
        let data = (nb + nq) * dim * db;
        let results = nq * depth as u64 * 8 * 2;
        let widest = configs
            .iter()
            .map(|c| c.estimate_bytes(c.index_kind().expect("validated"), nb, dim, db, nq))
            .max()
            .unwrap_or(0);
        // data + baseline flat copy + largest index + two result sets
        let estimate = data + nb * dim * db + widest + results;
        let over = budget.is_some_and(|b| estimate as f64 > b * GIB);

        if over {
            log::warn!("tier {factor}: estimated {estimate} bytes exceeds budget, marked DNF");
            for cfg in configs {
                let kind = cfg.index_kind()?;
                let mut r = base_report(factor, cfg, kind, measure, plan);
                r.set_meta("status", "DNF");
                r.set_meta("n_base", nb);
                r.set_meta("n_query", nq);
                r.set_meta("memory_estimate_bytes", estimate);
                rows.push(SeriesRow { factor, index: cfg.label(), dnf: true, report: r });
            }
            continue;
        }

        let (base, queries) = tier_data(plan, factor)?;
        let params = SearchParams::default();
        let t0 = Instant::now();
        let flat = AnyIndex::Flat(FlatIndex::build(base.clone(), measure)?);
        let flat_build = t0.elapsed().as_secs_f64();
        let flat_cfg = configs.iter().find(|c| c.index_kind().ok() == Some(IndexKind::Flat));
        let (flat_stats, flat_results) = if flat_cfg.is_some() {
            time_search(&flat, Representation::Dense(&queries), depth, &params, plan.repeats, plan.warmups)?
        } else {
            time_search(&flat, Representation::Dense(&queries), 1, &params, 1, 0)?
        };
        let baseline = flat_results.truncated(1)?;
        drop(flat);

        let mut codes_q = None;
        for cfg in configs {
            let kind = cfg.index_kind()?;
            let mut r = base_report(factor, cfg, kind, measure, plan);
            r.set_meta("status", "ok");
            r.set_meta("n_base", nb);
            r.set_meta("n_query", nq);
            r.set_meta("memory_estimate_bytes", estimate);
            r.set_meta("timing_scope", "search only, data resident in memory");
            r.set_meta("query_block", QUERY_BLOCK);

            let (mut stats, res, mem) = if kind == IndexKind::Flat {
                let mut s = flat_stats.clone();
                s.build_seconds = flat_build;
                (s, flat_results.clone(), nb * dim * db)
            } else {
                let t0 = Instant::now();
                let index = build_index(cfg, kind, &base, measure, plan.seed)?;
                let build = t0.elapsed().as_secs_f64();
                let search = SearchParams { ef_search: cfg.ef_search.max(depth), nprobe: cfg.nprobe };
                if kind == IndexKind::Hnsw && search.ef_search != cfg.ef_search {
                    r.set_meta("ef_search_effective", search.ef_search);
                }
                let (s, res) = if kind.is_binary() {
                    r.set_meta("binarisation", "random_hyperplane_lsh");
                    let t1 = Instant::now();
                    let q = match &codes_q {
                        Some((bits, q)) if *bits == cfg.bits => q,
                        _ => &codes_q.insert((cfg.bits, binarise_lsh(&queries, cfg.bits, plan.seed)?)).1,
                    };
                    r.timings.insert("binarise_queries_s".into(), t1.elapsed().as_secs_f64());
                    time_search(&index, Representation::Codes(q), depth, &search, plan.repeats, plan.warmups)?
                } else {
                    time_search(&index, Representation::Dense(&queries), depth, &search, plan.repeats, plan.warmups)?
                };
                let mem = index.memory_bytes();
                let mut s = s;
                s.build_seconds = build;
                (s, res, mem)
            };
            stats.repeats = plan.repeats;
            stats.write_into(&mut r);
            r.set_meta("index_bytes", mem);
            r.set_meta("results_digest", res.digest());
            let recall = recall_vs_baseline(&res, &baseline, &ks, RecallMode::TopOneContainment)?;
            r.metrics = recall.metrics;
            r.set_meta("recall_mode", "top1_containment");
            rows.push(SeriesRow { factor, index: cfg.label(), dnf: false, report: r });
        }
    }

    for row in &rows {
        codec::write_report(&row.report, &row.report_path(out_dir))?;
    }
    let series = SeriesReport { ks: plan.ks.clone(), rows };
    codec::write_text(&out_dir.join("series.json"), &series.to_json(plan)?)?;
    codec::write_text(&out_dir.join("series.csv"), &series.to_csv())?;
    Ok(series)
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}
