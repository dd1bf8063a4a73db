//! Random-hyperplane binarisation of continuous embeddings.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;

use crate::error::{FicoError, Result};
use crate::model::{words_for_bits, BinaryCodeSet, EmbeddingSet, Values};
use crate::similarity::{dot, Real};

/// `bits` unit hyperplanes, row-major, drawn from a Gaussian and normalised.
pub fn hyperplanes(dim: usize, bits: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut planes: Vec<f64> = (0..dim * bits).map(|_| rng.sample(StandardNormal)).collect();
    for h in planes.chunks_exact_mut(dim) {
        let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            h.iter_mut().for_each(|x| *x /= norm);
        }
    }
    planes
}

fn encode<T: Real>(v: &[T], dim: usize, planes: &[f64], bits: usize) -> Vec<u64> {
    let per = words_for_bits(bits);
    let mut words = vec![0u64; v.len() / dim * per];
    words
        .par_chunks_mut(per)
        .zip(v.par_chunks(dim))
        .for_each_init(
            || vec![0f64; dim],
            |row, (out, x)| {
                for (r, &xi) in row.iter_mut().zip(x) {
                    *r = xi.into();
                }
                for (j, h) in planes.chunks_exact(dim).enumerate() {
                    if dot(row.as_slice(), h) >= 0.0 {
                        out[j / 64] |= 1 << (j % 64);
                    }
                }
            },
        );
    words
}

/// Bit `j` of a row's code is set iff its projection on hyperplane `j` is ≥ 0.
pub fn binarise_lsh(set: &EmbeddingSet, bits: usize, seed: u64) -> Result<BinaryCodeSet> {
    if bits == 0 || !bits.is_multiple_of(8) {
        return Err(FicoError::invalid(format!(
            "bits must be a positive multiple of 8, got {bits}"
        )));
    }
    let dim = set.dim();
    let planes = hyperplanes(dim, bits, seed);
    let words = match set.values() {
        Values::F32(v) => encode(v, dim, &planes, bits),
        Values::F64(v) => encode(v, dim, &planes, bits),
    };
    BinaryCodeSet::new(set.ids().to_vec(), bits, words)
}
