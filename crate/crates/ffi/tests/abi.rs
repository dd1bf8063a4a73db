use std::ffi::{CStr, CString};
use std::ptr;

use fico_ffi::*;

fn last_error() -> String {
    let p = fico_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cpath(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn hamming_and_storage_cost() {
    let a = [0xFFu64];
    let b = [0x0Fu64];
    let mut d = 0u32;
    assert_eq!(unsafe { fico_hamming(a.as_ptr(), b.as_ptr(), 1, &mut d) }, FicoStatus::Ok);
    assert_eq!(d, 4);
    let (mut bytes, mut gib) = (0u64, 0f64);
    assert_eq!(unsafe { fico_storage_cost(6_000_000, 64, 1, &mut bytes, &mut gib) }, FicoStatus::Ok);
    assert_eq!((bytes, gib), (384_000_000, 0.36));
}

#[test]
fn null_and_bad_arguments_report_errors() {
    let mut out = ptr::null_mut();
    let st = unsafe { fico_pairwise_dense(ptr::null(), ptr::null(), 1, &mut out) };
    assert_eq!(st, FicoStatus::NullPointer);
    assert!(last_error().contains("queries"));

    let v = [1.0f32, 0.0, 0.0, 1.0];
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { fico_embeddings_new_f32(ptr::null(), 2, 2, v.as_ptr(), &mut e) }, FicoStatus::Ok);
    let st = unsafe { fico_pairwise_dense(e, e, 99, &mut out) };
    assert_eq!(st, FicoStatus::InvalidArgument);
    assert!(last_error().contains("measure"));

    let missing = CString::new("/nonexistent/x.fvecs").unwrap();
    let mut e2 = ptr::null_mut();
    assert_eq!(unsafe { fico_embeddings_read(missing.as_ptr(), 0, &mut e2) }, FicoStatus::Io);
    unsafe { fico_embeddings_free(e) };
}

#[test]
fn pairwise_eval_and_report() {
    let eye = [1.0f32, 0.0, 0.0, 1.0];
    let mut e = ptr::null_mut();
    unsafe { fico_embeddings_new_f32(ptr::null(), 2, 2, eye.as_ptr(), &mut e) };
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { fico_pairwise_dense(e, e, 2, &mut sim) }, FicoStatus::Ok);
    let (mut nq, mut nc, mut s) = (0usize, 0usize, ptr::null());
    unsafe { fico_sim_scores(sim, &mut nq, &mut nc, &mut s) };
    assert_eq!(unsafe { std::slice::from_raw_parts(s, nq * nc) }, [1.0, 0.0, 0.0, 1.0]);

    // 2 images, captions 10/11 and 12/13; images score their own captions highest
    let dir = tempfile::tempdir().unwrap();
    let gp = dir.path().join("g.jsonl");
    std::fs::write(&gp, "{\"caption_ids\":[10,11],\"image_id\":0}\n{\"caption_ids\":[12,13],\"image_id\":1}\n").unwrap();
    let mut groups = ptr::null_mut();
    assert_eq!(unsafe { fico_groups_read(cpath(&gp).as_ptr(), &mut groups) }, FicoStatus::Ok);
    let qids = [0u64, 1];
    let cids = [10u64, 11, 12, 13];
    let scores = [0.9f32, 0.1, 0.2, 0.3, 0.1, 0.2, 0.8, 0.1];
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { fico_sim_new(qids.as_ptr(), 2, cids.as_ptr(), 4, scores.as_ptr(), &mut m) }, FicoStatus::Ok);
    let ks = [1usize, 4];
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { fico_eval_instance(m, groups, 0, ks.as_ptr(), 2, &mut rep) }, FicoStatus::Ok);
    let mut r1 = 0.0;
    let name = CString::new("R@1").unwrap();
    assert_eq!(unsafe { fico_report_metric(rep, name.as_ptr(), &mut r1) }, FicoStatus::Ok);
    assert_eq!(r1, 1.0);
    let missing = CString::new("R@7").unwrap();
    assert_eq!(unsafe { fico_report_metric(rep, missing.as_ptr(), &mut r1) }, FicoStatus::InvalidArgument);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { fico_report_json(rep, &mut json) }, FicoStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"R@1\":1.0"), "{text}");
    unsafe {
        fico_string_free(json);
        fico_report_free(rep);
        fico_sim_free(m);
        fico_sim_free(sim);
        fico_groups_free(groups);
        fico_embeddings_free(e);
    }
}

#[test]
fn index_build_search_save_load() {
    let dir = tempfile::tempdir().unwrap();
    let words: Vec<u64> = (0..64u64).map(|i| i.wrapping_mul(0x9E37_79B9_7F4A_7C15)).collect();
    let ids: Vec<u64> = (0..64u64).map(|i| 1000 + i).collect();
    let mut codes = ptr::null_mut();
    assert_eq!(unsafe { fico_codes_new(ids.as_ptr(), 64, 64, words.as_ptr(), &mut codes) }, FicoStatus::Ok);
    let mut q = ptr::null_mut();
    assert_eq!(unsafe { fico_codes_new(ptr::null(), 3, 64, words[5..8].as_ptr(), &mut q) }, FicoStatus::Ok);

    let mut flat = ptr::null_mut();
    let mut ivf = ptr::null_mut();
    assert_eq!(unsafe { fico_index_build_binary_flat(codes, &mut flat) }, FicoStatus::Ok);
    assert_eq!(unsafe { fico_index_build_binary_ivf(codes, 4, 5, 7, &mut ivf) }, FicoStatus::Ok);
    let search = |idx: *const FicoIndex, nprobe: usize| {
        let mut r = ptr::null_mut();
        assert_eq!(unsafe { fico_index_search_codes(idx, q, 5, nprobe, &mut r) }, FicoStatus::Ok);
        let (mut nq, mut k) = (0, 0);
        unsafe { fico_ranked_shape(r, &mut nq, &mut k) };
        let mut out_ids = vec![0u64; nq * k];
        let mut out_scores = vec![0f32; nq * k];
        unsafe { fico_ranked_copy(r, out_ids.as_mut_ptr(), out_scores.as_mut_ptr()) };
        unsafe { fico_ranked_free(r) };
        (out_ids, out_scores)
    };
    let (fi, fs) = search(flat, 1);
    assert_eq!([fi[0], fi[5], fi[10]], [1005, 1006, 1007]);
    assert_eq!([fs[0], fs[5], fs[10]], [0.0, 0.0, 0.0]);
    assert_eq!(search(ivf, 4), (fi.clone(), fs.clone()));

    let p = cpath(&dir.path().join("ivf.idx"));
    assert_eq!(unsafe { fico_index_save(ivf, p.as_ptr()) }, FicoStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { fico_index_load(p.as_ptr(), &mut loaded) }, FicoStatus::Ok);
    assert_eq!(search(loaded, 2), search(ivf, 2));
    let mut mem = 0u64;
    unsafe { fico_index_memory_bytes(loaded, &mut mem) };
    assert!(mem > 64 * 8);
    unsafe {
        fico_index_free(loaded);
        fico_index_free(ivf);
        fico_index_free(flat);
        fico_codes_free(q);
        fico_codes_free(codes);
    }
}

#[test]
fn dense_indexes_agree_on_tiny_data() {
    let v: Vec<f32> = (0..40).map(|i| ((i * 7) % 11) as f32 - 5.0).collect();
    let mut data = ptr::null_mut();
    unsafe { fico_embeddings_new_f32(ptr::null(), 10, 4, v.as_ptr(), &mut data) };
    let mut flat = ptr::null_mut();
    let mut hnsw = ptr::null_mut();
    assert_eq!(unsafe { fico_index_build_flat(data, 3, &mut flat) }, FicoStatus::Ok);
    assert_eq!(unsafe { fico_index_build_hnsw(data, 3, 16, 32, 1, &mut hnsw) }, FicoStatus::Ok);
    let ids = |idx| {
        let mut r = ptr::null_mut();
        assert_eq!(unsafe { fico_index_search_dense(idx, data, 3, 10, &mut r) }, FicoStatus::Ok);
        let mut out = vec![0u64; 30];
        unsafe { fico_ranked_copy(r, out.as_mut_ptr(), ptr::null_mut()) };
        unsafe { fico_ranked_free(r) };
        out
    };
    assert_eq!(ids(flat), ids(hnsw));
    unsafe {
        fico_index_free(flat);
        fico_index_free(hnsw);
        fico_embeddings_free(data);
    }
}
