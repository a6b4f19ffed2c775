//! Per-class and per-dataset size caps.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::model::LabeledDataset;
use crate::rng::rng_from_seed;

pub const DEFAULT_PER_CLASS_CAP: usize = 500;
pub const DEFAULT_PER_DATASET_CAP: usize = 5000;

/// Largest-remainder apportionment of `total` seats over `weights`.
///
/// Ties in the remainder go to the lower index. Requires `total ≤ Σ weights`.
pub fn largest_remainder(weights: &[usize], total: usize) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let mut quotas: Vec<usize> = weights.iter().map(|&w| w * total / sum).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    let remainder = |i: usize| weights[i] * total % sum;
    order.sort_by(|&a, &b| remainder(b).cmp(&remainder(a)).then(a.cmp(&b)));
    let left = total - quotas.iter().sum::<usize>();
    for &i in order.iter().take(left) {
        quotas[i] += 1;
    }
    quotas
}

/// Uniform sampling without replacement down to the caps.
///
/// Each class is shuffled once from a seeded stream (ascending class id) and
/// truncated to `per_class_cap`. If the total still exceeds `per_dataset_cap`
/// the class counts are reduced proportionally, by largest remainder, to hit
/// it exactly. Surviving examples keep their input order.
pub fn downsample(
    ds: &LabeledDataset,
    per_class_cap: usize,
    per_dataset_cap: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if per_class_cap == 0 || per_dataset_cap == 0 {
        return Err(Error::invalid("caps must be at least 1"));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in ds.examples.iter().enumerate() {
        by_class.entry(e.label_standard).or_default().push(i);
    }
    let mut rng = rng_from_seed(seed);
    let mut pools: Vec<Vec<usize>> = Vec::with_capacity(by_class.len());
    for (_, mut members) in by_class {
        if members.len() > per_class_cap {
            members.shuffle(&mut rng);
            members.truncate(per_class_cap);
        }
        pools.push(members);
    }

    let sizes: Vec<usize> = pools.iter().map(Vec::len).collect();
    let total: usize = sizes.iter().sum();
    if total > per_dataset_cap {
        let quotas = largest_remainder(&sizes, per_dataset_cap);
        for (pool, q) in pools.iter_mut().zip(quotas) {
            if pool.len() > q {
                // pools under the class cap are still in input order
                pool.shuffle(&mut rng);
                pool.truncate(q);
            }
        }
    }

    let mut keep: Vec<usize> = pools.into_iter().flatten().collect();
    keep.sort_unstable();
    Ok(ds.with_examples(keep.into_iter().map(|i| ds.examples[i].clone()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassInfo, LabeledExample, Split};
    use proptest::prelude::*;

    fn dataset(sizes: &[usize]) -> LabeledDataset {
        let classes = (0..sizes.len())
            .map(|id| ClassInfo {
                id,
                name: format!("c{id}"),
            })
            .collect();
        let mut ds = LabeledDataset::new("d", classes);
        for (c, &s) in sizes.iter().enumerate() {
            for j in 0..s {
                ds.examples.push(LabeledExample {
                    text: format!("{c}/{j}"),
                    label_text: format!("c{c}"),
                    label_standard: c,
                    dataset_id: "d".into(),
                    split: Split::Train,
                });
            }
        }
        ds
    }

    #[test]
    fn class_cap_applies_first() {
        let out = downsample(&dataset(&[1000, 1000, 1000]), 500, 5000, 1).unwrap();
        assert_eq!(out.class_counts(), vec![500, 500, 500]);
    }

    #[test]
    fn twelve_full_classes_reduce_to_exact_cap() {
        let out = downsample(&dataset(&[500; 12]), 500, 5000, 1).unwrap();
        let counts = out.class_counts();
        assert_eq!(counts.iter().sum::<usize>(), 5000);
        assert!(counts.iter().all(|&c| c == 416 || c == 417), "{counts:?}");
        // 5000·500/6000 = 416 rem 4000 for every class; 8 leftover seats go to the lowest ids
        assert_eq!(counts.iter().filter(|&&c| c == 417).count(), 8);
    }

    #[test]
    fn small_dataset_is_unchanged() {
        let ds = dataset(&[3, 4]);
        assert_eq!(downsample(&ds, 500, 5000, 9).unwrap(), ds);
    }

    #[test]
    fn remainder_apportionment_by_hand() {
        assert_eq!(largest_remainder(&[5, 3, 2], 5), vec![3, 1, 1]);
        assert_eq!(largest_remainder(&[1, 1, 1], 2), vec![1, 1, 0]);
        assert_eq!(largest_remainder(&[], 0), Vec::<usize>::new());
    }

    proptest! {
        #[test]
        fn caps_hold_and_counts_never_grow(
            sizes in proptest::collection::vec(0usize..80, 1..8),
            class_cap in 1usize..60,
            dataset_cap in 1usize..200,
            seed in any::<u64>(),
        ) {
            let ds = dataset(&sizes);
            let out = downsample(&ds, class_cap, dataset_cap, seed).unwrap();
            prop_assert_eq!(&out, &downsample(&ds, class_cap, dataset_cap, seed).unwrap());
            let before = ds.class_counts();
            let after = out.class_counts();
            for (a, b) in after.iter().zip(&before) {
                prop_assert!(a <= b);
                prop_assert!(*a <= class_cap);
            }
            let capped_total: usize = before.iter().map(|&b| b.min(class_cap)).sum();
            prop_assert_eq!(after.iter().sum::<usize>(), capped_total.min(dataset_cap));
        }
    }
}
