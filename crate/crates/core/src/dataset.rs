//! Split management, caption projection and dataset replication.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

use crate::error::{FicoError, Result};
use crate::model::{BinaryCodeSet, EmbeddingSet, InstanceGroups, LabelMatrix, Split, Values};

/// Offset between replicated copies: copy `c` of ID `x` is `x + c * ID_STRIDE`.
pub const ID_STRIDE: u64 = 1 << 40;

pub fn copy_of(id: u64) -> u64 {
    id / ID_STRIDE
}

pub fn original_of(id: u64) -> u64 {
    id % ID_STRIDE
}

fn canonical_ids(image_ids: &[u64], n_test: usize, n_val: usize) -> Result<Vec<u64>> {
    let mut ids = image_ids.to_vec();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(FicoError::invalid("duplicate image ids"));
    }
    if n_test + n_val > ids.len() {
        return Err(FicoError::invalid(format!(
            "insufficient ids: {} test + {} val requested from {}",
            n_test,
            n_val,
            ids.len()
        )));
    }
    if n_test + n_val == ids.len() {
        log::warn!("test and val consume every id; train is empty");
    }
    Ok(ids)
}

/// Seeded shuffle of the sorted IDs; the first `n_test` go to test, the
/// next `n_val` to val, the rest to train.
pub fn karpathy_split(image_ids: &[u64], n_test: usize, n_val: usize, seed: u64) -> Result<Split> {
    let mut ids = canonical_ids(image_ids, n_test, n_val)?;
    let mut rng = SplitMix64::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let train = ids.split_off(n_test + n_val);
    let val = ids.split_off(n_test);
    Ok(Split { train, val, test: ids })
}

/// Greedy category-balanced split.
///
/// Samples are visited rarest-category-first (seeded order within equal
/// rarity). Each goes to the partition with remaining room whose per-label
/// counts fall furthest below their proportional targets, relative to the
/// target; ties resolve to the partition with the most remaining room, then
/// test, val, train.
pub fn stratified_split(
    image_ids: &[u64],
    labels: &LabelMatrix,
    n_test: usize,
    n_val: usize,
    seed: u64,
) -> Result<Split> {
    let mut ids = canonical_ids(image_ids, n_test, n_val)?;
    let n = ids.len();
    let c = labels.num_categories() as usize;
    let mut totals = vec![0usize; c];
    for id in &ids {
        let l = labels
            .get(*id)
            .ok_or_else(|| FicoError::invalid(format!("id {id} has no label entry")))?;
        for &x in l {
            totals[x as usize] += 1;
        }
    }
    let mut rng = SplitMix64::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let rarity = |id: &u64| {
        labels
            .get(*id)
            .unwrap()
            .iter()
            .map(|&x| totals[x as usize])
            .min()
            .unwrap_or(usize::MAX)
    };
    ids.sort_by_key(rarity);

    let caps = [n_test, n_val, n - n_test - n_val];
    let frac: Vec<f64> = caps.iter().map(|&k| k as f64 / n.max(1) as f64).collect();
    let mut counts = vec![vec![0usize; c]; 3];
    let mut parts: [Vec<u64>; 3] = Default::default();
    for id in ids {
        let l = labels.get(id).unwrap();
        let mut best: Option<(f64, usize, usize)> = None;
        for p in 0..3 {
            let room = caps[p] - parts[p].len();
            if room == 0 {
                continue;
            }
            let deficit: f64 = l
                .iter()
                .map(|&x| {
                    let target = frac[p] * totals[x as usize] as f64;
                    (target - counts[p][x as usize] as f64) / target
                })
                .sum();
            let better = match best {
                None => true,
                Some((d, r, _)) => deficit > d || (deficit == d && room > r),
            };
            if better {
                best = Some((deficit, room, p));
            }
        }
        let (_, _, p) = best.expect("total capacity equals sample count");
        for &x in l {
            counts[p][x as usize] += 1;
        }
        parts[p].push(id);
    }
    let [test, val, train] = parts;
    Ok(Split { train, val, test })
}

/// Caption-level split: every caption inherits its image's partition.
pub fn project_split(split: &Split, groups: &InstanceGroups) -> Result<Split> {
    let project = |images: &[u64]| -> Result<Vec<u64>> {
        let mut out = Vec::new();
        for img in images {
            out.extend_from_slice(
                groups
                    .captions_of(*img)
                    .ok_or_else(|| FicoError::invalid(format!("image {img} not found in groups")))?,
            );
        }
        Ok(out)
    };
    Ok(Split {
        train: project(&split.train)?,
        val: project(&split.val)?,
        test: project(&split.test)?,
    })
}

fn replicate_ids(ids: &[u64], factor: usize) -> Result<Vec<u64>> {
    if factor == 0 {
        return Err(FicoError::invalid("factor must be at least 1"));
    }
    if let Some(bad) = ids.iter().find(|&&id| id >= ID_STRIDE) {
        return Err(FicoError::invalid(format!("id overflow: {bad} >= 2^40")));
    }
    if (factor as u64).checked_mul(ID_STRIDE).is_none() {
        return Err(FicoError::invalid(format!("id overflow: factor {factor} too large")));
    }
    Ok((0..factor as u64)
        .flat_map(|c| ids.iter().map(move |&id| id + c * ID_STRIDE))
        .collect())
}

pub fn replicate_embeddings(set: &EmbeddingSet, factor: usize) -> Result<EmbeddingSet> {
    let ids = replicate_ids(set.ids(), factor)?;
    let values = match set.values() {
        Values::F32(v) => Values::F32(v.repeat(factor)),
        Values::F64(v) => Values::F64(v.repeat(factor)),
    };
    EmbeddingSet::new(ids, set.dim(), values)
}

pub fn replicate_codes(codes: &BinaryCodeSet, factor: usize) -> Result<BinaryCodeSet> {
    let ids = replicate_ids(codes.ids(), factor)?;
    BinaryCodeSet::new(ids, codes.code_bits(), codes.words().repeat(factor))
}

pub fn replicate_labels(labels: &LabelMatrix, factor: usize) -> Result<LabelMatrix> {
    let ids: Vec<u64> = labels.entries().keys().copied().collect();
    replicate_ids(&ids, factor)?;
    let mut entries = BTreeMap::new();
    for c in 0..factor as u64 {
        for (id, l) in labels.entries() {
            entries.insert(id + c * ID_STRIDE, l.clone());
        }
    }
    Ok(LabelMatrix::new(entries, labels.num_categories()))
}

/// Each copy of an image owns the same copy of its captions.
pub fn replicate_groups(groups: &InstanceGroups, factor: usize) -> Result<InstanceGroups> {
    let images: Vec<u64> = groups.groups().keys().copied().collect();
    replicate_ids(&images, factor)?;
    let caps: Vec<u64> = groups.groups().values().flatten().copied().collect();
    replicate_ids(&caps, factor)?;
    Ok(InstanceGroups::from_entries((0..factor as u64).flat_map(|c| {
        groups
            .groups()
            .iter()
            .map(move |(img, caps)| (img + c * ID_STRIDE, caps.iter().map(|x| x + c * ID_STRIDE).collect()))
    })))
}

/// A dataset bundle for replication; absent parts stay absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetParts {
    pub embeddings: Vec<EmbeddingSet>,
    pub codes: Vec<BinaryCodeSet>,
    pub labels: Vec<LabelMatrix>,
    pub groups: Option<InstanceGroups>,
}

pub fn replicate(parts: &DatasetParts, factor: usize) -> Result<DatasetParts> {
    Ok(DatasetParts {
        embeddings: parts
            .embeddings
            .iter()
            .map(|e| replicate_embeddings(e, factor))
            .collect::<Result<_>>()?,
        codes: parts.codes.iter().map(|c| replicate_codes(c, factor)).collect::<Result<_>>()?,
        labels: parts.labels.iter().map(|l| replicate_labels(l, factor)).collect::<Result<_>>()?,
        groups: parts.groups.as_ref().map(|g| replicate_groups(g, factor)).transpose()?,
    })
}

/// Checks that the IDs of `split` are exactly `universe`.
pub fn check_alignment(split: &Split, universe: &[u64]) -> Result<()> {
    split.validate(Some(universe)).into_result().map(|_| ())
}

/// IDs in `split` partitions that are not keys of `groups`.
pub fn unknown_images(split: &Split, groups: &InstanceGroups) -> Vec<u64> {
    let known: HashSet<u64> = groups.groups().keys().copied().collect();
    split
        .test
        .iter()
        .chain(&split.val)
        .chain(&split.train)
        .filter(|id| !known.contains(id))
        .copied()
        .collect()
}
