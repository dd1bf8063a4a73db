//! Ranking and the instance-level / category-level retrieval metrics.
//!
//! Rankings order candidates by descending score and break ties by
//! ascending candidate ID, everywhere. Per-query work may run in parallel;
//! aggregation always walks queries in ascending ID order so reports are
//! bitwise reproducible.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde_json::json;

use crate::error::{FicoError, Result};
use crate::model::{
    Direction, EvalReport, InstanceGroups, LabelMatrix, PerQuery, RankedRetrieval,
    SimilarityMatrix, Task, MISSING,
};

/// Recall levels of the interpolated precision-recall curve.
pub const PR_LEVELS: usize = 11;

#[inline]
fn better(scores: &[f32], ids: &[u64], a: u32, b: u32) -> Ordering {
    let (sa, sb) = (scores[a as usize], scores[b as usize]);
    sb.partial_cmp(&sa)
        .unwrap_or(Ordering::Equal)
        .then_with(|| ids[a as usize].cmp(&ids[b as usize]))
}

/// Fills `out` with the `k` best columns of one score row, best first.
///
/// `scratch` is reused across calls to avoid reallocating per row.
pub(crate) fn rank_row_into(scores: &[f32], ids: &[u64], k: usize, scratch: &mut Vec<u32>, out: &mut [u32]) {
    let n = scores.len();
    debug_assert!(k <= n && out.len() == k);
    if k == 0 {
        return;
    }
    scratch.clear();
    scratch.extend(0..n as u32);
    let cmp = |a: &u32, b: &u32| better(scores, ids, *a, *b);
    if k < n {
        scratch.select_nth_unstable_by(k - 1, cmp);
    }
    let head = &mut scratch[..k];
    head.sort_unstable_by(cmp);
    out.copy_from_slice(head);
}

/// Top-`k` candidates per query.
pub fn rank_topk(sim: &SimilarityMatrix, k: usize) -> Result<RankedRetrieval> {
    let nc = sim.n_candidates();
    if k == 0 || k > nc {
        return Err(FicoError::invalid(format!(
            "k={k} outside [1, {nc}]"
        )));
    }
    let ids = sim.candidate_ids();
    let mut columns = vec![0u32; sim.n_queries() * k];
    columns
        .par_chunks_mut(k)
        .enumerate()
        .for_each_init(Vec::new, |scratch, (q, out)| {
            rank_row_into(sim.row(q), ids, k, scratch, out);
        });
    let scores = columns
        .chunks_exact(k)
        .enumerate()
        .flat_map(|(q, row)| row.iter().map(move |&c| sim.get(q, c as usize)))
        .collect();
    RankedRetrieval::new(k, sim.query_ids().to_vec(), columns, scores)
}

/// `(# relevant among the first k) / k`. Missing slots count as non-relevant.
pub fn precision_at_k(row: &[u32], is_relevant: impl Fn(u32) -> bool, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let hits = row[..k]
        .iter()
        .filter(|&&c| c != MISSING && is_relevant(c))
        .count();
    hits as f64 / k as f64
}

fn ap_sums(row: &[u32], is_relevant: impl Fn(u32) -> bool, k: usize) -> (f64, usize) {
    let mut hits = 0usize;
    let mut sum = 0f64;
    for (i, &c) in row[..k].iter().enumerate() {
        if c != MISSING && is_relevant(c) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    (sum, hits)
}

/// Mean of `P@i` over relevant ranks `i ≤ k`, divided by the number of
/// relevant items found within the top `k`; 0 when none is found.
pub fn average_precision_at_k(row: &[u32], is_relevant: impl Fn(u32) -> bool, k: usize) -> f64 {
    let (sum, hits) = ap_sums(row, is_relevant, k);
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

/// Variant of [`average_precision_at_k`] dividing by `min(k, total_relevant)`.
pub fn average_precision_at_k_min_denominator(
    row: &[u32],
    is_relevant: impl Fn(u32) -> bool,
    k: usize,
    total_relevant: usize,
) -> f64 {
    let (sum, hits) = ap_sums(row, is_relevant, k);
    if hits == 0 {
        0.0
    } else {
        sum / k.min(total_relevant) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApDenominator {
    /// Relevant items retrieved within the top k.
    #[default]
    HitsInTopK,
    /// `min(k, total relevant candidates)`.
    MinKTotalRelevant,
}

impl ApDenominator {
    pub fn tag(self) -> &'static str {
        match self {
            ApDenominator::HitsInTopK => "hits_in_top_k",
            ApDenominator::MinKTotalRelevant => "min_k_total_relevant",
        }
    }
}

fn ascending_id_order(ids: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_unstable_by_key(|&i| ids[i]);
    order
}

/// Instance-level recall. For i2t a query scores a hit when any of its
/// captions is in the top k; for t2i the parent image must be.
pub fn eval_instance(
    sim: &SimilarityMatrix,
    groups: &InstanceGroups,
    direction: Direction,
    ks: &[usize],
) -> Result<EvalReport> {
    let nc = sim.n_candidates();
    for &k in ks {
        if k == 0 || k > nc {
            return Err(FicoError::invalid(format!("k={k} outside [1, {nc}]")));
        }
    }
    let column_of: HashMap<u64, u32> = sim
        .candidate_ids()
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i as u32))
        .collect();
    let cand_ids = sim.candidate_ids();

    let relevant_columns = |q_id: u64| -> Result<Vec<u32>> {
        let rel: Vec<u64> = match direction {
            Direction::I2T => groups
                .captions_of(q_id)
                .ok_or_else(|| FicoError::invalid(format!("query {q_id} is not an image id")))?
                .to_vec(),
            Direction::T2I => vec![groups
                .image_of(q_id)
                .ok_or_else(|| FicoError::invalid(format!("query {q_id} is not a caption id")))?],
            Direction::NotApplicable => {
                return Err(FicoError::invalid("instance evaluation needs i2t or t2i"))
            }
        };
        let cols: Vec<u32> = rel.iter().filter_map(|id| column_of.get(id).copied()).collect();
        if cols.is_empty() {
            return Err(FicoError::invalid(format!(
                "query {q_id} has no relevant candidate in the candidate set"
            )));
        }
        Ok(cols)
    };

    // 0-based rank of the best-placed relevant candidate per query.
    let first_rank: Vec<usize> = (0..sim.n_queries())
        .into_par_iter()
        .map(|q| -> Result<usize> {
            let rel = relevant_columns(sim.query_ids()[q])?;
            let row = sim.row(q);
            let best = *rel
                .iter()
                .min_by(|&&a, &&b| better(row, cand_ids, a, b))
                .expect("non-empty");
            Ok((0..nc as u32)
                .filter(|&c| better(row, cand_ids, c, best) == Ordering::Less)
                .count())
        })
        .collect::<Result<_>>()?;

    let order = ascending_id_order(sim.query_ids());
    let mut report = EvalReport::new(Task::Instance, direction);
    let nq = sim.n_queries();
    for &k in ks {
        let mut hits = 0f64;
        for &q in &order {
            if first_rank[q] < k {
                hits += 1.0;
            }
        }
        let recall = if nq == 0 { 0.0 } else { hits / nq as f64 };
        report.metrics.insert(format!("R@{k}"), recall);
    }
    report.per_query = Some(PerQuery {
        metric: "first_relevant_rank".to_owned(),
        values: order
            .iter()
            .map(|&q| (sim.query_ids()[q], (first_rank[q] + 1) as f64))
            .collect(),
    });
    report.set_meta("n_queries", nq);
    report.set_meta("n_candidates", nc);
    report.set_meta("ks", ks.to_vec());
    report.set_meta("measure", sim.measure_tag());
    Ok(report)
}

/// Eleven interpolated precision values at recall 0.0, 0.1, …, 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub precision: [f64; PR_LEVELS],
    pub query_counts: [usize; PR_LEVELS],
}

pub fn pr_level_name(level: usize) -> String {
    format!("P_interp@{:.1}", level as f64 / 10.0)
}

/// Interpolated curve of one ranking covering every candidate.
/// `hit_ranks` are the 1-based ranks of the relevant candidates, ascending.
fn interpolated_curve(hit_ranks: &[usize]) -> [f64; PR_LEVELS] {
    let r = hit_ranks.len();
    let mut suffix_max = vec![0f64; r + 1];
    for h in (1..=r).rev() {
        let p = h as f64 / hit_ranks[h - 1] as f64;
        suffix_max[h - 1] = if h == r { p } else { p.max(suffix_max[h]) };
    }
    let mut out = [0f64; PR_LEVELS];
    for (level, slot) in out.iter_mut().enumerate() {
        // smallest hit count h with h / r >= level / 10
        let h_min = (level * r).div_ceil(10).max(1);
        *slot = suffix_max[h_min - 1];
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct CategoryOptions {
    pub include_n: bool,
    pub pr_curve: bool,
    pub ap_denominator: ApDenominator,
    pub per_query: bool,
}

struct LabelBits {
    words: usize,
    bits: Vec<u64>,
}

impl LabelBits {
    fn build(ids: &[u64], labels: &LabelMatrix, words: usize, role: &str) -> Result<Self> {
        let mut bits = vec![0u64; ids.len() * words];
        for (i, id) in ids.iter().enumerate() {
            let l = labels
                .get(*id)
                .ok_or_else(|| FicoError::invalid(format!("{role} id {id} has no label entry")))?;
            for &c in l {
                bits[i * words + c as usize / 64] |= 1 << (c % 64);
            }
        }
        Ok(LabelBits { words, bits })
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }
}

struct QueryOutcome {
    // None when the query has no relevant candidate at all.
    ap: Option<Vec<f64>>,
    precision: Vec<f64>,
    curve: Option<[f64; PR_LEVELS]>,
}

fn category_pass(
    sim: &SimilarityMatrix,
    query_labels: &LabelMatrix,
    candidate_labels: &LabelMatrix,
    depths: &[usize],
    full: bool,
    denominator: ApDenominator,
) -> Result<Vec<QueryOutcome>> {
    let words = (query_labels
        .num_categories()
        .max(candidate_labels.num_categories()) as usize)
        .div_ceil(64)
        .max(1);
    let ql = LabelBits::build(sim.query_ids(), query_labels, words, "query")?;
    let cl = LabelBits::build(sim.candidate_ids(), candidate_labels, words, "candidate")?;
    let nc = sim.n_candidates();
    let depth = if full { nc } else { depths.iter().copied().max().unwrap_or(0) };
    let cand_ids = sim.candidate_ids();

    Ok((0..sim.n_queries())
        .into_par_iter()
        .map_init(
            || (Vec::new(), vec![0u32; depth]),
            |(scratch, ranked), q| {
                let qrow = ql.row(q);
                let relevant: Vec<bool> = (0..nc)
                    .map(|c| cl.row(c).iter().zip(qrow).any(|(a, b)| a & b != 0))
                    .collect();
                let total = relevant.iter().filter(|&&r| r).count();
                let rel = |c: u32| relevant[c as usize];
                if total == 0 {
                    return QueryOutcome {
                        ap: None,
                        precision: Vec::new(),
                        curve: None,
                    };
                }
                rank_row_into(sim.row(q), cand_ids, depth, scratch, ranked);
                let ap = depths
                    .iter()
                    .map(|&k| match denominator {
                        ApDenominator::HitsInTopK => average_precision_at_k(ranked, rel, k),
                        ApDenominator::MinKTotalRelevant => {
                            average_precision_at_k_min_denominator(ranked, rel, k, total)
                        }
                    })
                    .collect();
                let precision = depths.iter().map(|&k| precision_at_k(ranked, rel, k)).collect();
                let curve = full.then(|| {
                    let hit_ranks: Vec<usize> = ranked
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| rel(c))
                        .map(|(i, _)| i + 1)
                        .collect();
                    interpolated_curve(&hit_ranks)
                });
                QueryOutcome {
                    ap: Some(ap),
                    precision,
                    curve,
                }
            },
        )
        .collect())
}

/// Category-level mAP@k (plus P@k and, optionally, the 11-point curve).
///
/// Relevance is label-set intersection. Queries without any relevant
/// candidate are left out of every average and counted in
/// `meta.excluded_queries`.
pub fn eval_category(
    sim: &SimilarityMatrix,
    query_labels: &LabelMatrix,
    candidate_labels: &LabelMatrix,
    ks: &[usize],
    opts: &CategoryOptions,
) -> Result<EvalReport> {
    let nc = sim.n_candidates();
    for &k in ks {
        if k == 0 || k > nc {
            return Err(FicoError::invalid(format!("k={k} outside [1, {nc}]")));
        }
    }
    let mut depths: Vec<usize> = ks.to_vec();
    let mut names: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
    if opts.include_n {
        depths.push(nc);
        names.push("N".to_owned());
    }
    let full = opts.include_n || opts.pr_curve;
    let outcomes = category_pass(sim, query_labels, candidate_labels, &depths, full, opts.ap_denominator)?;

    let order = ascending_id_order(sim.query_ids());
    let included = outcomes.iter().filter(|o| o.ap.is_some()).count();
    let excluded = outcomes.len() - included;
    let mut report = EvalReport::new(Task::Category, Direction::NotApplicable);
    for (j, name) in names.iter().enumerate() {
        let (mut ap_sum, mut p_sum) = (0f64, 0f64);
        for &q in &order {
            if let Some(ap) = &outcomes[q].ap {
                ap_sum += ap[j];
                p_sum += outcomes[q].precision[j];
            }
        }
        let denom = included.max(1) as f64;
        report.metrics.insert(format!("mAP@{name}"), ap_sum / denom);
        report.metrics.insert(format!("P@{name}"), p_sum / denom);
    }
    if opts.pr_curve {
        let curve = macro_average(&order, &outcomes);
        for (level, p) in curve.precision.iter().enumerate() {
            report.metrics.insert(pr_level_name(level), *p);
        }
    }
    if opts.per_query {
        let j = depths.len() - 1;
        report.per_query = Some(PerQuery {
            metric: format!("AP@{}", names[j]),
            values: order
                .iter()
                .filter_map(|&q| outcomes[q].ap.as_ref().map(|ap| (sim.query_ids()[q], ap[j])))
                .collect(),
        });
    }
    if included == 0 && !outcomes.is_empty() {
        log::warn!("no query has a relevant candidate; mAP reported as 0");
        report.set_meta("warning", "no query has a relevant candidate");
    }
    report.set_meta("n_queries", sim.n_queries());
    report.set_meta("n_candidates", nc);
    report.set_meta("excluded_queries", excluded);
    report.set_meta("ks", json!(names));
    report.set_meta("ap_denominator", opts.ap_denominator.tag());
    report.set_meta("measure", sim.measure_tag());
    Ok(report)
}

fn macro_average(order: &[usize], outcomes: &[QueryOutcome]) -> PrCurve {
    let mut precision = [0f64; PR_LEVELS];
    let mut counts = [0usize; PR_LEVELS];
    for &q in order {
        if let Some(c) = &outcomes[q].curve {
            for l in 0..PR_LEVELS {
                precision[l] += c[l];
                counts[l] += 1;
            }
        }
    }
    for l in 0..PR_LEVELS {
        if counts[l] > 0 {
            precision[l] /= counts[l] as f64;
        }
    }
    PrCurve {
        precision,
        query_counts: counts,
    }
}

/// 11-point interpolated precision-recall curve, macro-averaged over
/// queries with at least one relevant candidate.
pub fn pr_curve_11pt(
    sim: &SimilarityMatrix,
    query_labels: &LabelMatrix,
    candidate_labels: &LabelMatrix,
) -> Result<PrCurve> {
    let outcomes = category_pass(
        sim,
        query_labels,
        candidate_labels,
        &[],
        true,
        ApDenominator::HitsInTopK,
    )?;
    Ok(macro_average(&ascending_id_order(sim.query_ids()), &outcomes))
}

/// Parses a k list such as `1,5,10,N`; `N` stands for every candidate.
/// Returns the numeric ks and whether `N` was present.
pub fn parse_ks(s: &str) -> Result<(Vec<usize>, bool)> {
    let mut ks = Vec::new();
    let mut include_n = false;
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "N" {
            include_n = true;
        } else {
            let k: usize = part
                .parse()
                .map_err(|_| FicoError::invalid(format!("bad k value {part:?}")))?;
            if k == 0 {
                return Err(FicoError::invalid("k must be at least 1"));
            }
            ks.push(k);
        }
    }
    if ks.is_empty() && !include_n {
        return Err(FicoError::invalid("empty k list"));
    }
    Ok((ks, include_n))
}
