use fico::ann::{
    binarise_lsh, generate_synthetic, recall_vs_baseline, AnyIndex, BinaryFlatIndex, BinaryIvfIndex, FlatIndex,
    HnswIndex, HnswParams, RecallMode, SearchParams, SyntheticSpec,
};
use fico::bench::time_search;
use fico::similarity::{Measure, Representation};

fn data() -> (fico::model::EmbeddingSet, fico::model::EmbeddingSet) {
    generate_synthetic(&SyntheticSpec { n_base: 3000, n_query: 300, dim: 24, n_clusters: 30, sigma_c: 1.0, sigma_n: 0.4, seed: 5 }).unwrap()
}

fn all_indexes() -> (Vec<AnyIndex>, fico::model::EmbeddingSet, fico::model::BinaryCodeSet) {
    let (base, q) = data();
    let bc = binarise_lsh(&base, 64, 1).unwrap();
    let qc = binarise_lsh(&q, 64, 1).unwrap();
    let idx = vec![
        AnyIndex::Flat(FlatIndex::build(base.clone(), Measure::Euclidean).unwrap()),
        AnyIndex::Hnsw(HnswIndex::build(base, Measure::InnerProduct, HnswParams { m: 12, ef_construction: 80, seed: 2 }).unwrap()),
        AnyIndex::BinaryFlat(BinaryFlatIndex::build(bc.clone())),
        AnyIndex::BinaryIvf(BinaryIvfIndex::train(bc, 32, 5, 3).unwrap()),
    ];
    (idx, q, qc)
}

fn rep<'a>(index: &AnyIndex, q: &'a fico::model::EmbeddingSet, qc: &'a fico::model::BinaryCodeSet) -> Representation<'a> {
    if index.kind().is_binary() {
        Representation::Codes(qc)
    } else {
        Representation::Dense(q)
    }
}

#[test]
fn persisted_indexes_search_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (indexes, q, qc) = all_indexes();
    let params = SearchParams { ef_search: 40, nprobe: 4 };
    for index in indexes {
        let path = dir.path().join(format!("{}.idx", index.kind()));
        index.save(&path).unwrap();
        let loaded = AnyIndex::load(&path).unwrap();
        assert_eq!(loaded, index);
        let a = index.search(rep(&index, &q, &qc), 20, &params).unwrap();
        let b = loaded.search(rep(&loaded, &q, &qc), 20, &params).unwrap();
        assert_eq!(a, b, "{}", index.kind());
        assert!(index.memory_bytes() > 0);
    }
}

#[test]
fn corrupted_index_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (indexes, _, _) = all_indexes();
    let path = dir.path().join("x.idx");
    indexes[2].save(&path).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 3);
    assert!(AnyIndex::from_bytes(&bytes).is_err());
    bytes[0] = b'X';
    assert!(AnyIndex::from_bytes(&bytes).is_err());
}

#[test]
fn recall_grows_with_search_effort() {
    let (indexes, q, qc) = all_indexes();
    let (base, _) = data();
    let flat = FlatIndex::build(base.clone(), Measure::InnerProduct).unwrap();
    let truth = flat.search(&q, 1).unwrap();
    let hnsw = &indexes[1];
    let r: Vec<f64> = [10, 20, 40, 80, 200]
        .iter()
        .map(|&ef| {
            let res = hnsw.search(Representation::Dense(&q), 10, &SearchParams { ef_search: ef, nprobe: 1 }).unwrap();
            recall_vs_baseline(&res, &truth, &[1], RecallMode::TopOneContainment).unwrap().metric("R@1").unwrap()
        })
        .collect();
    assert!(r.windows(2).all(|w| w[0] <= w[1]), "{r:?}");
    assert!(r[4] > 0.95, "{r:?}");

    let exact = indexes[2].search(Representation::Codes(&qc), 50, &SearchParams::default()).unwrap();
    let r: Vec<f64> = [1, 2, 4, 8, 16, 32]
        .iter()
        .map(|&np| {
            let res = indexes[3].search(Representation::Codes(&qc), 50, &SearchParams { ef_search: 1, nprobe: np }).unwrap();
            recall_vs_baseline(&res, &exact, &[1], RecallMode::TopOneContainment).unwrap().metric("R@1").unwrap()
        })
        .collect();
    assert!(r.windows(2).all(|w| w[0] <= w[1]), "{r:?}");
    assert_eq!(r[5], 1.0);
}

#[test]
fn timed_search_is_deterministic() {
    let (indexes, q, qc) = all_indexes();
    let params = SearchParams { ef_search: 30, nprobe: 2 };
    for index in &indexes {
        let (stats, res) = time_search(index, rep(index, &q, &qc), 5, &params, 3, 2).unwrap();
        assert_eq!(stats.repeats, 3);
        assert_eq!(res, index.search(rep(index, &q, &qc), 5, &params).unwrap());
        assert!(stats.per_query_us_p50 <= stats.per_query_us_p99);
    }
}

#[test]
fn stored_query_is_found_first() {
    // unclustered: nearest-M selection leaves clustered data weakly linked
    let spec = SyntheticSpec { n_base: 3000, n_query: 1, dim: 24, n_clusters: 1, sigma_c: 1.0, sigma_n: 1.0, seed: 5 };
    let (base, _) = generate_synthetic(&spec).unwrap();
    let h = HnswIndex::build(base.clone(), Measure::Euclidean, HnswParams { m: 16, ef_construction: 100, seed: 9 }).unwrap();
    let q = base.slice_rows(0..1000);
    let r = h.search(&q, 1, 32).unwrap();
    let hits = (0..1000).filter(|&i| r.row(i)[0] as usize == i).count();
    assert!(hits >= 950, "{hits}/1000");
}
