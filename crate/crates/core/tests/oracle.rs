mod common;

use common::*;
use fico::ann::{BinaryFlatIndex, BinaryIvfIndex, FlatIndex, HnswIndex, HnswParams};
use fico::dataset::{replicate_embeddings, replicate_groups, ID_STRIDE};
use fico::eval::{
    average_precision_at_k, eval_category, eval_instance, pr_curve_11pt, pr_level_name, precision_at_k, rank_topk,
    CategoryOptions,
};
use fico::model::{Direction, EmbeddingSet, InstanceGroups, LabelMatrix, SimilarityMatrix, Values};
use fico::similarity::{pairwise, Measure, Representation};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use std::collections::BTreeMap;

fn sim(q: Vec<u64>, c: Vec<u64>, scores: Vec<f32>) -> SimilarityMatrix {
    SimilarityMatrix::new(q, c, scores, "test").unwrap()
}

fn labels(entries: &[(u64, &[u32])], c: u32) -> LabelMatrix {
    LabelMatrix::new(entries.iter().map(|(id, l)| (*id, l.to_vec())).collect(), c)
}

#[test]
fn precision_and_ap_hand_examples() {
    let row = [0u32, 1, 2];
    let rel = |c: u32| c != 1;
    assert_eq!(precision_at_k(&row, rel, 3), 2.0 / 3.0);
    assert_eq!(average_precision_at_k(&row, rel, 3), (1.0 + 2.0 / 3.0) / 2.0);
    assert_eq!(average_precision_at_k(&row, |_| false, 3), 0.0);
    assert_eq!(average_precision_at_k(&row, |_| true, 3), 1.0);
    assert_eq!(precision_at_k(&row, |_| true, 2), 1.0);
    assert_eq!(precision_at_k(&row, |_| false, 2), 0.0);
}

#[test]
fn equal_scores_rank_by_ascending_id() {
    let m = sim(vec![0], vec![9, 4, 7, 1], vec![0.5; 4]);
    let r = rank_topk(&m, 3).unwrap();
    let ids: Vec<u64> = r.row(0).iter().map(|&c| m.candidate_ids()[c as usize]).collect();
    assert_eq!(ids, [1, 4, 7]);
}

#[test]
fn t2i_threshold() {
    // caption 10's image (id 3) is at rank 3
    let groups = InstanceGroups::from_entries([(1, vec![11]), (2, vec![12]), (3, vec![10])]);
    let m = sim(vec![10], vec![1, 2, 3], vec![0.9, 0.8, 0.1]);
    let r = eval_instance(&m, &groups, Direction::T2I, &[1, 2, 3]).unwrap();
    assert_eq!(r.metric("R@1"), Some(0.0));
    assert_eq!(r.metric("R@2"), Some(0.0));
    assert_eq!(r.metric("R@3"), Some(1.0));
}

#[test]
fn random_instance_matches_oracle() {
    let mut rng = SplitMix64::seed_from_u64(10);
    let groups = InstanceGroups::from_entries((0..10u64).map(|i| (i, (100 + 5 * i..105 + 5 * i).collect())));
    let caps: Vec<u64> = (100..150).collect();
    let m = random_sim(&mut rng, (0..10).collect(), caps);
    let ks = [1, 5, 10, 50];
    let r = eval_instance(&m, &groups, Direction::I2T, &ks).unwrap();
    for k in ks {
        let o = oracle_recall(&m, |q, c| groups.captions_of(q).unwrap().contains(&c), k);
        assert!(close(r.metric(&format!("R@{k}")).unwrap(), o));
    }
    assert_eq!(r.metric("R@50"), Some(1.0));
}

#[test]
fn random_category_matches_oracle() {
    let mut rng = SplitMix64::seed_from_u64(11);
    let qids = random_ids(&mut rng, 20);
    let cids = random_ids(&mut rng, 100);
    let m = random_sim(&mut rng, qids.clone(), cids.clone());
    let ql = random_labels(&mut rng, &qids, 5);
    let cl = random_labels(&mut rng, &cids, 5);
    let opts = CategoryOptions { pr_curve: true, ..Default::default() };
    let r = eval_category(&m, &ql, &cl, &[10, 100], &opts).unwrap();
    let rel = category_relevance(&m, &ql, &cl);
    let kept: Vec<&Vec<bool>> = rel.iter().flatten().collect();
    for k in [10, 100] {
        assert!(close(r.metric(&format!("mAP@{k}")).unwrap(), mean(kept.iter().map(|x| oracle_ap(x, k)))));
    }
    let curves: Vec<[f64; 11]> = kept.iter().map(|x| oracle_interpolated(x)).collect();
    let pc = pr_curve_11pt(&m, &ql, &cl).unwrap();
    for l in 0..11 {
        let o = mean(curves.iter().map(|c| c[l]));
        assert!(close(pc.precision[l], o));
        assert!(close(r.metric(&pr_level_name(l)).unwrap(), o));
    }
}

#[test]
fn everything_relevant_gives_map_one() {
    let mut rng = SplitMix64::seed_from_u64(12);
    let m = random_sim(&mut rng, vec![0, 1, 2], (10..30).collect());
    let ql = labels(&[(0, &[0]), (1, &[0, 1]), (2, &[0])], 2);
    let cl = LabelMatrix::new((10..30).map(|id| (id, vec![0])).collect(), 2);
    let r = eval_category(&m, &ql, &cl, &[1, 7, 20], &CategoryOptions::default()).unwrap();
    for k in [1, 7, 20] {
        assert_eq!(r.metric(&format!("mAP@{k}")), Some(1.0));
    }
}

#[test]
fn disjoint_labels_exclude_every_query() {
    let m = sim(vec![0, 1], vec![5, 6], vec![0.1, 0.2, 0.3, 0.4]);
    let ql = labels(&[(0, &[0]), (1, &[0])], 2);
    let cl = labels(&[(5, &[1]), (6, &[1])], 2);
    let r = eval_category(&m, &ql, &cl, &[1, 2], &CategoryOptions::default()).unwrap();
    assert_eq!(r.metric("mAP@2"), Some(0.0));
    assert_eq!(r.meta["excluded_queries"], serde_json::json!(2));
}

#[test]
fn pr_curve_single_hit_at_rank_two() {
    let m = sim(vec![0], vec![1, 2, 3, 4], vec![0.9, 0.8, 0.7, 0.6]);
    let ql = labels(&[(0, &[0])], 2);
    let cl = labels(&[(1, &[1]), (2, &[0]), (3, &[1]), (4, &[1])], 2);
    let pc = pr_curve_11pt(&m, &ql, &cl).unwrap();
    assert!(pc.precision.iter().all(|&p| p == 0.5));
}

#[test]
fn pr_curve_perfect_ranking_is_flat_one() {
    let m = sim(vec![0], vec![1, 2, 3, 4], vec![0.9, 0.8, 0.7, 0.6]);
    let ql = labels(&[(0, &[0])], 2);
    let cl = labels(&[(1, &[0]), (2, &[0]), (3, &[1]), (4, &[1])], 2);
    assert!(pr_curve_11pt(&m, &ql, &cl).unwrap().precision.iter().all(|&p| p == 1.0));
}

#[test]
fn metrics_are_invariant_to_candidate_permutation() {
    let mut rng = SplitMix64::seed_from_u64(13);
    let qids = random_ids(&mut rng, 15);
    let cids = random_ids(&mut rng, 60);
    let m = random_sim(&mut rng, qids.clone(), cids.clone());
    let ql = random_labels(&mut rng, &qids, 4);
    let cl = random_labels(&mut rng, &cids, 4);
    let mut perm: Vec<usize> = (0..cids.len()).collect();
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let pcids: Vec<u64> = perm.iter().map(|&j| cids[j]).collect();
    let pscores: Vec<f32> = (0..qids.len()).flat_map(|q| perm.iter().map(move |&j| (q, j))).map(|(q, j)| m.get(q, j)).collect();
    let pm = sim(qids, pcids, pscores);
    let opts = CategoryOptions { include_n: true, pr_curve: true, ..Default::default() };
    let a = eval_category(&m, &ql, &cl, &[5, 20], &opts).unwrap();
    let b = eval_category(&pm, &ql, &cl, &[5, 20], &opts).unwrap();
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn monotone_transform_preserves_metrics() {
    let mut rng = SplitMix64::seed_from_u64(14);
    let groups = random_groups(&mut rng, 12, 60);
    let imgs: Vec<u64> = groups.groups().keys().copied().collect();
    let caps: Vec<u64> = groups.groups().values().flatten().copied().collect();
    let m = random_sim(&mut rng, imgs.clone(), caps.clone());
    let shifted = sim(imgs, caps.clone(), m.scores().iter().map(|s| 2.0 * s + 3.0).collect());
    let ks: Vec<usize> = (1..=caps.len()).collect();
    let a = eval_instance(&m, &groups, Direction::I2T, &ks).unwrap();
    let b = eval_instance(&shifted, &groups, Direction::I2T, &ks).unwrap();
    assert_eq!(a.metrics, b.metrics);
    let vals: Vec<f64> = ks.iter().map(|k| a.metric(&format!("R@{k}")).unwrap()).collect();
    assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*vals.last().unwrap(), 1.0);
}

#[test]
fn replicated_instance_recall_reaches_one() {
    let mut rng = SplitMix64::seed_from_u64(15);
    let groups = random_groups(&mut rng, 6, 30);
    let rep = replicate_groups(&groups, 3).unwrap();
    let imgs: Vec<u64> = rep.groups().keys().copied().collect();
    let caps: Vec<u64> = rep.groups().values().flatten().copied().collect();
    let m = random_sim(&mut rng, imgs, caps.clone());
    let nc = caps.len();
    let r = eval_instance(&m, &rep, Direction::I2T, &[1, nc]).unwrap();
    assert_eq!(r.metric(&format!("R@{nc}")), Some(1.0));
    let o = oracle_recall(&m, |q, c| rep.captions_of(q).unwrap().contains(&c), 1);
    assert!(close(r.metric("R@1").unwrap(), o));
    assert!(rep.groups().keys().any(|&id| id >= 2 * ID_STRIDE));
}

#[test]
fn pairwise_examples() {
    let eye = EmbeddingSet::with_sequential_ids(2, Values::F32(vec![1.0, 0.0, 0.0, 1.0])).unwrap();
    let m = pairwise(Representation::Dense(&eye), Representation::Dense(&eye), Measure::Cosine).unwrap();
    assert_eq!(m.scores(), [1.0, 0.0, 0.0, 1.0]);
    let m = pairwise(Representation::Dense(&eye), Representation::Dense(&eye), Measure::Euclidean).unwrap();
    assert_eq!(m.get(0, 0), 0.0);
    assert!(m.get(0, 1) < 0.0);

    let mut rng = SplitMix64::seed_from_u64(16);
    let codes = random_codes(&mut rng, vec![0, 1, 2], 64);
    let m = pairwise(Representation::Codes(&codes), Representation::Codes(&codes), Measure::Hamming).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(m.get(i, j), -(oracle_hamming(codes.code(i), codes.code(j), 64) as f32));
        }
    }
}

#[test]
fn flat_search_equals_pairwise_then_rank() {
    let mut rng = SplitMix64::seed_from_u64(17);
    let q = integer_embeddings(&mut rng, (0..100).collect(), 8);
    let cids = random_ids(&mut rng, 1000);
    let c = integer_embeddings(&mut rng, cids, 8);
    let via_sim = rank_topk(&pairwise(Representation::Dense(&q), Representation::Dense(&c), Measure::InnerProduct).unwrap(), 10).unwrap();
    let via_index = FlatIndex::build(c, Measure::InnerProduct).unwrap().search(&q, 10).unwrap();
    assert_eq!(via_sim, via_index);
}

#[test]
fn binary_flat_matches_bit_loop_oracle() {
    let mut rng = SplitMix64::seed_from_u64(18);
    let cids = random_ids(&mut rng, 1000);
    let c = random_codes(&mut rng, cids.clone(), 64);
    let q = random_codes(&mut rng, (0..20).collect(), 64);
    let r = BinaryFlatIndex::build(c.clone()).search(&q, 25).unwrap();
    for i in 0..q.len() {
        let s: Vec<f32> = (0..c.len()).map(|j| -(oracle_hamming(q.code(i), c.code(j), 64) as f32)).collect();
        let want: Vec<u32> = full_ranking(&s, &cids)[..25].iter().map(|&j| j as u32).collect();
        assert_eq!(r.row(i), want.as_slice());
    }
}

#[test]
fn ivf_full_probe_equals_flat() {
    let mut rng = SplitMix64::seed_from_u64(19);
    let cids = random_ids(&mut rng, 500);
    let c = random_codes(&mut rng, cids, 128);
    let q = random_codes(&mut rng, (0..30).collect(), 128);
    let ivf = BinaryIvfIndex::train(c.clone(), 16, 5, 1).unwrap();
    let flat = BinaryFlatIndex::build(c);
    assert_eq!(ivf.search(&q, 40, 16).unwrap(), flat.search(&q, 40).unwrap());
}

#[test]
fn hnsw_exhaustive_beam_on_tiny_set_is_exact() {
    let mut rng = SplitMix64::seed_from_u64(20);
    let ids = random_ids(&mut rng, 30);
    let data = integer_embeddings(&mut rng, ids, 6);
    let q = integer_embeddings(&mut rng, (0..20).collect(), 6);
    for m in [Measure::InnerProduct, Measure::Euclidean] {
        let h = HnswIndex::build(data.clone(), m, HnswParams { m: 32, ef_construction: 64, seed: 3 }).unwrap();
        let f = FlatIndex::build(data.clone(), m).unwrap();
        assert_eq!(h.search(&q, 10, 30).unwrap(), f.search(&q, 10).unwrap());
    }
}

#[test]
fn replication_keeps_payloads() {
    let mut rng = SplitMix64::seed_from_u64(21);
    let e = integer_embeddings(&mut rng, vec![3, 1, 4], 5);
    let r = replicate_embeddings(&e, 4).unwrap();
    assert_eq!(r.len(), 12);
    let by_id: BTreeMap<u64, Vec<f64>> = (0..r.len()).map(|i| (r.ids()[i], r.row_f64(i))).collect();
    for c in 0..4u64 {
        for (i, &id) in e.ids().iter().enumerate() {
            assert_eq!(by_id[&(id + c * ID_STRIDE)], e.row_f64(i));
        }
    }
}
