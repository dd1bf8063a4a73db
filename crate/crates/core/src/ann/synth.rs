//! Seeded clustered Gaussian data for index benchmarks.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{FicoError, Result};
use crate::model::{EmbeddingSet, Values};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_base: usize,
    pub n_query: usize,
    pub dim: usize,
    pub n_clusters: usize,
    /// Standard deviation of cluster centres per dimension.
    pub sigma_c: f64,
    /// Standard deviation of per-point noise around its centre.
    pub sigma_n: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_base == 0 || self.dim == 0 || self.n_clusters == 0 {
            return Err(FicoError::invalid("n_base, dim and n_clusters must be positive"));
        }
        if !(self.sigma_c > 0.0 && self.sigma_c.is_finite()) || !(self.sigma_n >= 0.0 && self.sigma_n.is_finite()) {
            return Err(FicoError::invalid("sigma_c must be positive and sigma_n non-negative"));
        }
        Ok(())
    }
}

/// Returns `(base, queries)`. Centres are drawn first; base point `i` sits
/// around centre `i mod n_clusters`, queries around uniformly drawn centres.
/// Base IDs are `0..n_base`, query IDs `0..n_query`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(EmbeddingSet, EmbeddingSet)> {
    spec.validate()?;
    let mut rng = SplitMix64::seed_from_u64(spec.seed);
    let d = spec.dim;
    let centre_dist = Normal::new(0.0, spec.sigma_c).expect("valid sigma");
    let centres: Vec<f64> = (0..spec.n_clusters * d).map(|_| centre_dist.sample(&mut rng)).collect();
    let noise = Normal::new(0.0, spec.sigma_n).expect("valid sigma");

    let point = |rng: &mut SplitMix64, c: usize, out: &mut Vec<f32>| {
        for x in &centres[c * d..(c + 1) * d] {
            let e = if spec.sigma_n > 0.0 { noise.sample(rng) } else { 0.0 };
            out.push((x + e) as f32);
        }
    };
    let mut base = Vec::with_capacity(spec.n_base * d);
    for i in 0..spec.n_base {
        point(&mut rng, i % spec.n_clusters, &mut base);
    }
    let mut queries = Vec::with_capacity(spec.n_query * d);
    for _ in 0..spec.n_query {
        let c = rng.gen_range(0..spec.n_clusters);
        point(&mut rng, c, &mut queries);
    }
    Ok((
        EmbeddingSet::with_sequential_ids(d, Values::F32(base))?,
        EmbeddingSet::new((0..spec.n_query as u64).collect(), d, Values::F32(queries))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticSpec {
        SyntheticSpec { n_base: 50, n_query: 10, dim: 8, n_clusters: 5, sigma_c: 1.0, sigma_n: 0.1, seed: 3 }
    }

    #[test]
    fn same_seed_bit_identical() {
        assert_eq!(generate_synthetic(&spec()).unwrap(), generate_synthetic(&spec()).unwrap());
        let other = SyntheticSpec { seed: 4, ..spec() };
        assert_ne!(generate_synthetic(&spec()).unwrap().0, generate_synthetic(&other).unwrap().0);
    }

    #[test]
    fn noiseless_base_is_the_centres() {
        let s = SyntheticSpec { n_clusters: 50, sigma_n: 0.0, ..spec() };
        let (base, _) = generate_synthetic(&s).unwrap();
        let mut rng = SplitMix64::seed_from_u64(s.seed);
        let dist = Normal::new(0.0, s.sigma_c).unwrap();
        let centres: Vec<f32> = (0..50 * 8).map(|_| dist.sample(&mut rng) as f32).collect();
        assert_eq!(base.values(), &Values::F32(centres));
    }

    #[test]
    fn shapes() {
        let (b, q) = generate_synthetic(&spec()).unwrap();
        assert_eq!((b.len(), q.len(), b.dim()), (50, 10, 8));
        assert!(generate_synthetic(&SyntheticSpec { dim: 0, ..spec() }).is_err());
    }
}
