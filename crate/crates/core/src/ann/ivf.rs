//! Inverted-file index over binary codes, trained by k-majority clustering.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::flat::hamming_topk;
use crate::error::{FicoError, Result};
use crate::model::{BinaryCodeSet, RankedRetrieval, MISSING};
use crate::similarity::hamming_words;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryIvfIndex {
    codes: BinaryCodeSet,
    // nlist * words_per_code
    centroids: Vec<u64>,
    lists: Vec<Vec<u32>>,
    seed: u64,
    iters: usize,
}

fn nearest_centroid(code: &[u64], centroids: &[u64], per: usize) -> usize {
    let mut best = 0;
    let mut best_d = u32::MAX;
    for (c, cw) in centroids.chunks_exact(per).enumerate() {
        let d = hamming_words(code, cw);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn assign(codes: &BinaryCodeSet, centroids: &[u64]) -> Vec<u32> {
    let per = codes.words_per_code();
    (0..codes.len())
        .into_par_iter()
        .map(|i| nearest_centroid(codes.code(i), centroids, per) as u32)
        .collect()
}

impl BinaryIvfIndex {
    /// k-majority training: seeded distinct-sample init, nearest-centroid
    /// assignment (ties to the lowest centroid), per-bit majority update
    /// (ties keep the previous bit). Empty clusters take the member of the
    /// largest cluster farthest from its centroid.
    pub fn train(codes: BinaryCodeSet, nlist: usize, iters: usize, seed: u64) -> Result<Self> {
        let n = codes.len();
        if nlist == 0 || nlist > n {
            return Err(FicoError::invalid(format!("nlist={nlist} outside [1, {n}]")));
        }
        if iters == 0 {
            return Err(FicoError::invalid("iters must be at least 1"));
        }
        let per = codes.words_per_code();
        let bits = codes.code_bits();
        let mut rng = SplitMix64::seed_from_u64(seed);
        let mut picks = sample(&mut rng, n, nlist).into_vec();
        picks.sort_unstable();
        let mut centroids: Vec<u64> = picks.iter().flat_map(|&i| codes.code(i).iter().copied()).collect();

        let mut labels = assign(&codes, &centroids);
        for _ in 0..iters {
            let mut counts = vec![0u32; nlist * bits];
            let mut sizes = vec![0u32; nlist];
            for (i, &l) in labels.iter().enumerate() {
                let l = l as usize;
                sizes[l] += 1;
                let code = codes.code(i);
                let row = &mut counts[l * bits..(l + 1) * bits];
                for (j, cnt) in row.iter_mut().enumerate() {
                    *cnt += ((code[j / 64] >> (j % 64)) & 1) as u32;
                }
            }
            for c in 0..nlist {
                if sizes[c] == 0 {
                    continue;
                }
                let cw = &mut centroids[c * per..(c + 1) * per];
                for j in 0..bits {
                    let ones = 2 * counts[c * bits + j];
                    if ones > sizes[c] {
                        cw[j / 64] |= 1 << (j % 64);
                    } else if ones < sizes[c] {
                        cw[j / 64] &= !(1 << (j % 64));
                    }
                }
            }
            for c in 0..nlist {
                if sizes[c] != 0 {
                    continue;
                }
                let largest = (0..nlist).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))).unwrap();
                let lc = centroids[largest * per..(largest + 1) * per].to_vec();
                let far = labels
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l as usize == largest)
                    .map(|(i, _)| (hamming_words(codes.code(i), &lc), i))
                    .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
                    .map(|(_, i)| i)
                    .expect("largest cluster is non-empty");
                centroids[c * per..(c + 1) * per].copy_from_slice(codes.code(far));
                labels[far] = c as u32;
                sizes[largest] -= 1;
                sizes[c] = 1;
            }
            labels = assign(&codes, &centroids);
        }

        let mut lists = vec![Vec::new(); nlist];
        for (i, &l) in labels.iter().enumerate() {
            lists[l as usize].push(i as u32);
        }
        Ok(BinaryIvfIndex {
            codes,
            centroids,
            lists,
            seed,
            iters,
        })
    }

    pub(crate) fn from_parts(
        codes: BinaryCodeSet,
        centroids: Vec<u64>,
        lists: Vec<Vec<u32>>,
        seed: u64,
        iters: usize,
    ) -> Result<Self> {
        let per = codes.words_per_code();
        if centroids.len() != lists.len() * per {
            return Err(FicoError::format("centroid block does not match list count"));
        }
        let mut seen = vec![false; codes.len()];
        for &i in lists.iter().flatten() {
            let s = seen
                .get_mut(i as usize)
                .ok_or_else(|| FicoError::format("inverted list entry out of range"))?;
            if *s {
                return Err(FicoError::format("sample listed twice"));
            }
            *s = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(FicoError::format("sample missing from inverted lists"));
        }
        Ok(BinaryIvfIndex {
            codes,
            centroids,
            lists,
            seed,
            iters,
        })
    }

    pub fn codes(&self) -> &BinaryCodeSet {
        &self.codes
    }

    pub fn nlist(&self) -> usize {
        self.lists.len()
    }

    pub fn lists(&self) -> &[Vec<u32>] {
        &self.lists
    }

    pub fn centroid(&self, c: usize) -> &[u64] {
        let per = self.codes.words_per_code();
        &self.centroids[c * per..(c + 1) * per]
    }

    pub fn centroids(&self) -> &[u64] {
        &self.centroids
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iters(&self) -> usize {
        self.iters
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.centroids {
            h.update(w.to_le_bytes());
        }
        for l in &self.lists {
            h.update((l.len() as u64).to_le_bytes());
            for i in l {
                h.update(i.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Scans the `nprobe` nearest lists. Slots that cannot be filled hold
    /// [`MISSING`] with a score of negative infinity.
    pub fn search(&self, queries: &BinaryCodeSet, k: usize, nprobe: usize) -> Result<RankedRetrieval> {
        let nlist = self.nlist();
        if nprobe == 0 || nprobe > nlist {
            return Err(FicoError::invalid(format!("nprobe={nprobe} outside [1, {nlist}]")));
        }
        let n = self.codes.len();
        if k == 0 || k > n {
            return Err(FicoError::invalid(format!("k={k} outside [1, {n}]")));
        }
        if queries.code_bits() != self.codes.code_bits() {
            return Err(FicoError::DimensionMismatch(format!(
                "{}-bit queries vs {}-bit index",
                queries.code_bits(),
                self.codes.code_bits()
            )));
        }
        let per = self.codes.words_per_code();
        let bits = self.codes.code_bits();
        let ids = self.codes.ids();
        let mut columns = vec![MISSING; queries.len() * k];
        let mut scores = vec![f32::NEG_INFINITY; queries.len() * k];
        columns
            .par_chunks_mut(k)
            .zip(scores.par_chunks_mut(k))
            .enumerate()
            .for_each_init(
                || (Vec::new(), Vec::new(), Vec::new(), Vec::new()),
                |(probe, dists, hist, picked), (qi, (cols, sc))| {
                    let qc = queries.code(qi);
                    probe.clear();
                    probe.extend(
                        self.centroids
                            .chunks_exact(per)
                            .enumerate()
                            .map(|(c, cw)| (hamming_words(qc, cw), c as u32)),
                    );
                    if nprobe < nlist {
                        probe.select_nth_unstable(nprobe - 1);
                    }
                    dists.clear();
                    for &(_, c) in &probe[..nprobe] {
                        dists.extend(
                            self.lists[c as usize]
                                .iter()
                                .map(|&i| (hamming_words(qc, self.codes.code(i as usize)), i)),
                        );
                    }
                    let take = k.min(dists.len());
                    hamming_topk(dists, ids, take, bits, hist, picked);
                    for (j, &(d, c)) in picked.iter().enumerate() {
                        cols[j] = c;
                        sc[j] = -(d as f32);
                    }
                },
            );
        RankedRetrieval::new(k, queries.ids().to_vec(), columns, scores)
    }
}
