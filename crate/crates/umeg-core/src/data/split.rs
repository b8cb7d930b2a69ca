//! Seeded k-clip few-shot splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{FewShotSplit, KeypointClip};
use crate::{CoreError, Result};

/// Draws a [`FewShotSplit`] from `clips`.
///
/// The evaluation set is drawn first from the seeded shuffle, so every `k`
/// shares one evaluation set per seed; `k` labeled clips come from the
/// remainder and the rest form the unlabeled pool. Deterministic for a fixed
/// seed and clip set.
pub fn make_split(
    clips: &[KeypointClip],
    k: usize,
    seed: u64,
    eval_fraction: f64,
) -> Result<FewShotSplit> {
    if !(0.0..1.0).contains(&eval_fraction) {
        return Err(CoreError::Config(format!(
            "eval_fraction must be in [0, 1), got {eval_fraction}"
        )));
    }
    let n = clips.len();
    let eval_count = (eval_fraction * n as f64).ceil() as usize;
    if k + eval_count > n {
        return Err(CoreError::Capacity(format!(
            "k = {k} labeled plus {eval_count} eval clips exceed the pool of {n}"
        )));
    }

    let mut ids: Vec<String> = clips.iter().map(|c| c.clip_id.clone()).collect();
    ids.sort();
    ids.dedup();
    if ids.len() != n {
        return Err(CoreError::Config("duplicate clip ids in pool".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let mut eval_ids: Vec<String> = ids[..eval_count].to_vec();
    let mut labeled_ids: Vec<String> = ids[eval_count..eval_count + k].to_vec();
    let mut unlabeled_ids: Vec<String> = ids[eval_count + k..].to_vec();
    eval_ids.sort();
    labeled_ids.sort();
    unlabeled_ids.sort();

    Ok(FewShotSplit {
        labeled_ids,
        unlabeled_ids,
        eval_ids,
        seed,
    })
}

/// Selects the clips named by `ids`, in the ids' order.
pub fn select_clips<'a>(clips: &'a [KeypointClip], ids: &[String]) -> Vec<&'a KeypointClip> {
    ids.iter()
        .filter_map(|id| clips.iter().find(|c| &c.clip_id == id))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthConfig};
    use std::collections::BTreeSet;

    fn pool(n: usize) -> Vec<KeypointClip> {
        let cfg = SynthConfig {
            num_clips: n,
            frames_per_clip: 60,
            seed: 7,
            ..SynthConfig::default()
        };
        generate_synthetic(&cfg).unwrap()
    }

    #[test]
    fn sizes_match_the_request() {
        let clips = pool(200);
        let split = make_split(&clips, 100, 3, 0.25).unwrap();
        assert_eq!(split.labeled_ids.len(), 100);
        assert_eq!(split.eval_ids.len(), 50);
        assert_eq!(split.unlabeled_ids.len(), 50);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let clips = pool(40);
        let a = make_split(&clips, 10, 11, 0.2).unwrap();
        let b = make_split(&clips, 10, 11, 0.2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sets_are_pairwise_disjoint() {
        let clips = pool(40);
        let split = make_split(&clips, 10, 5, 0.2).unwrap();
        let labeled: BTreeSet<_> = split.labeled_ids.iter().collect();
        let unlabeled: BTreeSet<_> = split.unlabeled_ids.iter().collect();
        let eval: BTreeSet<_> = split.eval_ids.iter().collect();
        assert!(labeled.is_disjoint(&unlabeled));
        assert!(labeled.is_disjoint(&eval));
        assert!(unlabeled.is_disjoint(&eval));
        assert_eq!(labeled.len() + unlabeled.len() + eval.len(), 40);
    }

    #[test]
    fn eval_set_shared_across_k_for_one_seed() {
        let clips = pool(40);
        let small = make_split(&clips, 5, 9, 0.2).unwrap();
        let large = make_split(&clips, 20, 9, 0.2).unwrap();
        assert_eq!(small.eval_ids, large.eval_ids);
    }

    #[test]
    fn distinct_seeds_give_distinct_labeled_sets() {
        let clips = pool(200);
        let mut seen = BTreeSet::new();
        for seed in 0..5 {
            let split = make_split(&clips, 15, seed, 0.25).unwrap();
            seen.insert(split.labeled_ids.clone());
        }
        assert_eq!(seen.len(), 5);
    }

    #[test]
    fn capacity_error_when_k_too_large() {
        let clips = pool(20);
        let err = make_split(&clips, 18, 0, 0.25).unwrap_err();
        assert!(matches!(err, CoreError::Capacity(_)));
    }

    #[test]
    fn sweep_produces_k_times_seed_splits() {
        let clips = pool(200);
        let mut count = 0;
        for &k in &[15usize, 25, 50, 100] {
            for seed in 0..5u64 {
                make_split(&clips, k, seed, 0.25).unwrap();
                count += 1;
            }
        }
        assert_eq!(count, 20);
    }
}
