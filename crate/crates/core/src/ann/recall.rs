//! Recall of an index's results relative to an exhaustive baseline.

use crate::error::{FicoError, Result};
use crate::model::{Direction, EvalReport, RankedRetrieval, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecallMode {
    /// Fraction of queries whose baseline rank-1 candidate is in the top k.
    #[default]
    TopOneContainment,
    /// `|top-k(results) ∩ top-k(baseline)| / k`, averaged over queries.
    OverlapAtK,
}

pub fn recall_vs_baseline(
    results: &RankedRetrieval,
    baseline: &RankedRetrieval,
    ks: &[usize],
    mode: RecallMode,
) -> Result<EvalReport> {
    if results.query_ids() != baseline.query_ids() {
        return Err(FicoError::invalid("results and baseline cover different queries"));
    }
    let max_k = ks.iter().copied().max().unwrap_or(0);
    if ks.contains(&0) {
        return Err(FicoError::invalid("k must be at least 1"));
    }
    if results.k() < max_k {
        return Err(FicoError::invalid(format!(
            "depth insufficient: results hold {} per query, k={max_k} requested",
            results.k()
        )));
    }
    let needed = match mode {
        RecallMode::TopOneContainment => 1,
        RecallMode::OverlapAtK => max_k,
    };
    if baseline.k() < needed {
        return Err(FicoError::invalid(format!(
            "depth insufficient: baseline holds {} per query, {needed} needed",
            baseline.k()
        )));
    }
    let mut order: Vec<usize> = (0..results.n_queries()).collect();
    order.sort_unstable_by_key(|&q| results.query_ids()[q]);
    let nq = order.len().max(1) as f64;
    let mut report = EvalReport::new(Task::Bench, Direction::NotApplicable);
    for &k in ks {
        let mut acc = 0f64;
        for &q in &order {
            let top = &results.row(q)[..k];
            match mode {
                RecallMode::TopOneContainment => {
                    if top.contains(&baseline.row(q)[0]) {
                        acc += 1.0;
                    }
                }
                RecallMode::OverlapAtK => {
                    let base = &baseline.row(q)[..k];
                    let hits = top.iter().filter(|c| base.contains(c)).count();
                    acc += hits as f64 / k as f64;
                }
            }
        }
        report.metrics.insert(format!("R@{k}"), acc / nq);
    }
    report.set_meta(
        "recall_mode",
        match mode {
            RecallMode::TopOneContainment => "top1_containment",
            RecallMode::OverlapAtK => "overlap_at_k",
        },
    );
    report.set_meta("n_queries", results.n_queries());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MISSING;

    fn rr(k: usize, cols: Vec<u32>) -> RankedRetrieval {
        let nq = cols.len() / k;
        RankedRetrieval::new(k, (0..nq as u64).collect(), cols.clone(), vec![0.0; cols.len()]).unwrap()
    }

    #[test]
    fn self_comparison_is_perfect() {
        let b = rr(3, vec![0, 1, 2, 5, 4, 3]);
        let r = recall_vs_baseline(&b, &b, &[1, 2, 3], RecallMode::TopOneContainment).unwrap();
        assert!(r.metrics.values().all(|&v| v == 1.0));
        let r = recall_vs_baseline(&b, &b, &[1, 3], RecallMode::OverlapAtK).unwrap();
        assert!(r.metrics.values().all(|&v| v == 1.0));
    }

    #[test]
    fn never_containing_nn_is_zero() {
        let b = rr(1, vec![9, 8]);
        let res = rr(2, vec![1, 2, 3, MISSING]);
        let r = recall_vs_baseline(&res, &b, &[1, 2], RecallMode::TopOneContainment).unwrap();
        assert_eq!(r.metric("R@2"), Some(0.0));
    }

    #[test]
    fn partial_and_depth_errors() {
        let b = rr(1, vec![2, 8]);
        let res = rr(2, vec![1, 2, 8, 0]);
        let r = recall_vs_baseline(&res, &b, &[1, 2], RecallMode::TopOneContainment).unwrap();
        assert_eq!(r.metric("R@1"), Some(0.5));
        assert_eq!(r.metric("R@2"), Some(1.0));
        assert!(recall_vs_baseline(&res, &b, &[3], RecallMode::TopOneContainment).is_err());
        assert!(recall_vs_baseline(&res, &b, &[2], RecallMode::OverlapAtK).is_err());
    }
}
