use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::support::SupportSet;
use super::triples::{Triple, TripleStore};
use crate::error::{Error, Result};

/// Train/test partition in which every few-shot entity keeps exactly one
/// training triple.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FewShotSplit {
    pub train: TripleStore,
    /// Held-out triples with both endpoints in the support set.
    pub test: Vec<Triple>,
    /// Held-out triples with at least one endpoint outside the support set.
    /// They are in neither `train` nor `test`.
    pub missing_support: Vec<Triple>,
    pub fewshot_entities: BTreeSet<u32>,
}

/// Turns a random `fraction` of support-set KB entities into few-shot
/// entities.
///
/// Entities are visited in seeded shuffled order. Each keeps its incident
/// triple with the lowest `(r, h, t)` and loses the rest. An entity that is
/// already incident to a triple kept by an earlier entity, or that has no
/// triple at all, is skipped, which keeps the one-triple guarantee intact.
pub fn make_fewshot_split(
    store: &TripleStore,
    support: &SupportSet,
    fraction: f64,
    seed: u64,
) -> Result<FewShotSplit> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "few-shot fraction {fraction} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<u32> = support.pairs().iter().map(|&(k, _)| k).collect();
    candidates.sort_unstable();
    candidates.shuffle(&mut rng);
    let n = (fraction * candidates.len() as f64).round() as usize;

    let mut removed: HashSet<Triple> = HashSet::new();
    let mut claimed: HashSet<Triple> = HashSet::new();
    let mut split = FewShotSplit::default();
    let mut skipped = 0usize;

    for &e in &candidates[..n] {
        let live: Vec<Triple> = store
            .incident(e)
            .filter(|t| !removed.contains(t))
            .copied()
            .collect();
        if live.is_empty() || live.iter().any(|t| claimed.contains(t)) {
            skipped += 1;
            continue;
        }
        let keep = *live.iter().min_by_key(|t| t.rht_key()).unwrap();
        claimed.insert(keep);
        for t in live.into_iter().filter(|t| *t != keep) {
            removed.insert(t);
            if support.contains_kb(t.h) && support.contains_kb(t.t) {
                split.test.push(t);
            } else {
                split.missing_support.push(t);
            }
        }
        split.fewshot_entities.insert(e);
    }
    if skipped > 0 {
        log::info!("few-shot split: skipped {skipped} entities whose triples were already claimed");
    }
    split.train = store.retain(|t| !removed.contains(t));
    Ok(split)
}

/// The "support" training set: triples whose both endpoints have a text
/// counterpart.
pub fn restrict_to_support(train: &TripleStore, support: &SupportSet) -> TripleStore {
    train.retain(|t| support.contains_kb(t.h) && support.contains_kb(t.t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn star(leaves_in_support: &[bool]) -> (TripleStore, SupportSet) {
        // center 0, leaves 1..=n
        let store: TripleStore = (1..=leaves_in_support.len() as u32)
            .map(|l| Triple::new(0, l % 2, l))
            .collect();
        let pairs = std::iter::once((0, 100)).chain(
            leaves_in_support
                .iter()
                .enumerate()
                .filter(|(_, &s)| s)
                .map(|(i, _)| (i as u32 + 1, 101 + i as u32)),
        );
        (store, SupportSet::from_pairs(pairs).0)
    }

    #[test]
    fn zero_fraction_is_identity() {
        let (store, support) = star(&[true; 4]);
        let s = make_fewshot_split(&store, &support, 0.0, 1).unwrap();
        assert_eq!(s.train, store);
        assert!(s.test.is_empty());
        assert!(s.fewshot_entities.is_empty());
    }

    #[test]
    fn bad_fraction() {
        let (store, support) = star(&[true]);
        assert!(make_fewshot_split(&store, &support, 1.5, 0).is_err());
        assert!(make_fewshot_split(&store, &support, -0.1, 0).is_err());
    }

    #[test]
    fn star_all_neighbors_supported() {
        let (store, _) = star(&[true; 4]);
        // only the center is in the support set so the fraction selects it
        let support = SupportSet::from_pairs([(0, 100)]).0;
        let s = make_fewshot_split(&store, &support, 1.0, 3).unwrap();
        // leaves are outside the support set here
        assert_eq!(s.train.len(), 1);
        assert_eq!(s.missing_support.len(), 3);

        let full = SupportSet::from_pairs((0..=4).map(|k| (k, 100 + k))).0;
        let mut found = false;
        for seed in 0..50 {
            let s = make_fewshot_split(&store, &full, 0.2, seed).unwrap();
            if s.fewshot_entities.contains(&0) {
                assert_eq!(s.train.len(), 1);
                assert_eq!(s.test.len(), 3);
                assert!(s.missing_support.is_empty());
                found = true;
            }
        }
        assert!(found);
    }

    #[test]
    fn star_two_neighbors_outside_support() {
        let (store, support) = star(&[true, true, false, false]);
        let center_only = SupportSet::from_pairs(
            support.pairs().iter().copied().filter(|&(k, _)| k == 0 || k <= 2),
        )
        .0;
        for seed in 0..50 {
            let s = make_fewshot_split(&store, &center_only, 1.0 / 3.0, seed).unwrap();
            if s.fewshot_entities.contains(&0) {
                assert_eq!(s.train.len(), 1);
                assert_eq!(s.test.len(), 1);
                assert_eq!(s.missing_support.len(), 2);
                return;
            }
        }
        panic!("center never selected");
    }

    #[test]
    fn kept_triple_is_lowest_rht() {
        let store: TripleStore = [
            Triple::new(0, 1, 1),
            Triple::new(2, 0, 0),
            Triple::new(0, 0, 3),
        ]
        .into_iter()
        .collect();
        let support = SupportSet::from_pairs([(0, 0)]).0;
        let s = make_fewshot_split(&store, &support, 1.0, 0).unwrap();
        assert_eq!(s.train.triples(), &[Triple::new(0, 0, 3)]);
    }

    #[test]
    fn support_restriction() {
        let (store, support) = star(&[true, false, true]);
        let r = restrict_to_support(&store, &support);
        assert_eq!(r.len(), 2);
    }

    proptest! {
        #[test]
        fn split_invariants(
            raw in proptest::collection::vec((0u32..15, 0u32..3, 0u32..15), 1..80),
            supported in proptest::collection::vec(any::<bool>(), 15),
            fraction in 0.0f64..=1.0,
            seed in any::<u64>(),
        ) {
            let store: TripleStore = raw.iter().map(|&(h, r, t)| Triple::new(h, r, t)).collect();
            let support = SupportSet::from_pairs(
                (0..15u32).filter(|&k| supported[k as usize]).map(|k| (k, k + 50))
            ).0;
            let s = make_fewshot_split(&store, &support, fraction, seed).unwrap();
            let test: HashSet<Triple> = s.test.iter().copied().collect();
            let missing: HashSet<Triple> = s.missing_support.iter().copied().collect();
            for &e in &s.fewshot_entities {
                prop_assert!(support.contains_kb(e));
                prop_assert_eq!(s.train.triples().iter().filter(|t| t.touches(e)).count(), 1);
                for t in store.incident(e) {
                    let places = [s.train.contains(t), test.contains(t), missing.contains(t)];
                    prop_assert_eq!(places.iter().filter(|&&p| p).count(), 1);
                }
            }
            for t in &s.test {
                prop_assert!(support.contains_kb(t.h) && support.contains_kb(t.t));
                prop_assert!(!s.train.contains(t));
            }
            prop_assert_eq!(s.train.len() + s.test.len() + s.missing_support.len(), store.len());
        }
    }
}
