//! TransE scoring with the margin log-sigmoid loss, and negative sampling.

use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::Triple;
use crate::space::{EmbeddingSpace, Gradients, Table};

/// Which slot of a positive triple negative sampling may replace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Corruption {
    Head,
    Tail,
    Both,
}

impl std::str::FromStr for Corruption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(Corruption::Head),
            "tail" => Ok(Corruption::Tail),
            "both" => Ok(Corruption::Both),
            _ => Err(Error::InvalidArgument(format!(
                "corruption must be head, tail or both; got `{s}`"
            ))),
        }
    }
}

impl std::fmt::Display for Corruption {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Corruption::Head => "head",
            Corruption::Tail => "tail",
            Corruption::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KbeConfig {
    /// Margin γ.
    pub gamma: f64,
    pub neg_per_pos: usize,
    pub corruption: Corruption,
}

impl Default for KbeConfig {
    fn default() -> Self {
        KbeConfig {
            gamma: 6.0,
            neg_per_pos: 8,
            corruption: Corruption::Both,
        }
    }
}

impl KbeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "margin must be positive, got {}",
                self.gamma
            )));
        }
        if self.neg_per_pos == 0 {
            return Err(Error::InvalidArgument("neg_per_pos must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `‖h + r − t‖₂`.
pub fn transe_distance(h: &[f64], r: &[f64], t: &[f64]) -> Result<f64> {
    if h.len() != r.len() || h.len() != t.len() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: h={}, r={}, t={}",
            h.len(),
            r.len(),
            t.len()
        )));
    }
    Ok(distance_unchecked(h, r, t))
}

#[inline]
fn distance_unchecked(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    h.iter()
        .zip(r)
        .zip(t)
        .map(|((h, r), t)| {
            let d = h + r - t;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Gradient of `‖h + r − t‖₂` with respect to `h` (equal to that for `r`,
/// negated for `t`). Zero when the residual vanishes.
pub fn distance_grad_head(h: &[f64], r: &[f64], t: &[f64]) -> Vec<f64> {
    let mut diff: Vec<f64> = h.iter().zip(r).zip(t).map(|((h, r), t)| h + r - t).collect();
    let d = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
    if d == 0.0 {
        diff.fill(0.0);
    } else {
        diff.iter_mut().for_each(|x| *x /= d);
    }
    diff
}

/// `log(1 + exp(y·(d − γ)))`.
pub fn kbe_triple_loss(distance: f64, label: Label, gamma: f64) -> f64 {
    softplus(label.sign() * (distance - gamma))
}

/// Draws `neg_per_pos` corruptions of `triple`, each replacing one slot by a
/// uniformly random entity among `n_entities`. True triples are not
/// filtered out.
pub fn sample_negatives(
    triple: Triple,
    n_entities: usize,
    config: &KbeConfig,
    rng: &mut impl Rng,
) -> Vec<Triple> {
    assert!(n_entities > 0, "negative sampling needs a nonempty entity set");
    (0..config.neg_per_pos)
        .map(|_| {
            let corrupt_head = match config.corruption {
                Corruption::Head => true,
                Corruption::Tail => false,
                Corruption::Both => rng.random_bool(0.5),
            };
            let e = rng.random_range(0..n_entities as u32);
            if corrupt_head {
                Triple { h: e, ..triple }
            } else {
                Triple { t: e, ..triple }
            }
        })
        .collect()
}

/// An entity position in a scored fact: a KB entity, or a text entity whose
/// skip-gram input row stands in for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    Kb(u32),
    Text(u32),
}

impl Slot {
    fn table(self) -> (Table, u32) {
        match self {
            Slot::Kb(e) => (Table::KbEntity, e),
            Slot::Text(e) => (Table::EntityIn, e),
        }
    }

    pub fn is_kb(self) -> bool {
        matches!(self, Slot::Kb(_))
    }
}

/// A triple whose endpoints may live in either entity table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub head: Slot,
    pub relation: u32,
    pub tail: Slot,
}

impl From<Triple> for Fact {
    fn from(t: Triple) -> Self {
        Fact {
            head: Slot::Kb(t.h),
            relation: t.r,
            tail: Slot::Kb(t.t),
        }
    }
}

/// Corrupts a fact by replacing KB slots only; a fact with no KB slot gets
/// one of its slots replaced by a KB entity.
pub fn sample_fact_negatives(
    fact: Fact,
    n_entities: usize,
    config: &KbeConfig,
    rng: &mut impl Rng,
) -> Vec<Fact> {
    assert!(n_entities > 0, "negative sampling needs a nonempty entity set");
    (0..config.neg_per_pos)
        .map(|_| {
            let corrupt_head = match (fact.head.is_kb(), fact.tail.is_kb()) {
                (true, false) => true,
                (false, true) => false,
                _ => match config.corruption {
                    Corruption::Head => true,
                    Corruption::Tail => false,
                    Corruption::Both => rng.random_bool(0.5),
                },
            };
            let e = Slot::Kb(rng.random_range(0..n_entities as u32));
            if corrupt_head {
                Fact { head: e, ..fact }
            } else {
                Fact { tail: e, ..fact }
            }
        })
        .collect()
}

/// Loss of a batch of labelled facts, accumulating `scale ×` its exact
/// gradient into `grads`. Returns the unscaled loss.
pub fn fact_loss_and_grads(
    batch: &[(Fact, Label)],
    space: &EmbeddingSpace,
    gamma: f64,
    scale: f64,
    grads: &mut Gradients,
) -> f64 {
    let dim = space.dim();
    let (mut h, mut r, mut t) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut diff = vec![0.0; dim];
    let mut loss = 0.0;
    for &(fact, label) in batch {
        let (ht, hr) = fact.head.table();
        let (tt, tr) = fact.tail.table();
        let hk = space.key(ht, hr);
        let rk = space.key(Table::Relation, fact.relation);
        let tk = space.key(tt, tr);
        space.read(hk, &mut h);
        space.read(rk, &mut r);
        space.read(tk, &mut t);
        for i in 0..dim {
            diff[i] = h[i] + r[i] - t[i];
        }
        let d = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
        let y = label.sign();
        loss += softplus(y * (d - gamma));
        if d == 0.0 {
            continue;
        }
        // dℓ/dd · ∂d/∂h, with ∂d/∂h = diff / d
        let coef = scale * y * sigmoid(y * (d - gamma)) / d;
        grads.add(hk, coef, &diff);
        grads.add(rk, coef, &diff);
        grads.add(tk, -coef, &diff);
    }
    loss
}

/// Summed margin loss over `batch` and its exact sparse gradient.
pub fn kbe_loss_and_grads(
    batch: &[(Triple, Label)],
    space: &EmbeddingSpace,
    config: &KbeConfig,
) -> (f64, Gradients) {
    let facts: Vec<(Fact, Label)> = batch.iter().map(|&(t, l)| (t.into(), l)).collect();
    let mut grads = Gradients::new();
    let loss = fact_loss_and_grads(&facts, space, config.gamma, 1.0, &mut grads);
    (loss, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::SpaceShape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distance_examples() {
        assert_eq!(transe_distance(&[0.0; 3], &[0.0; 3], &[0.0; 3]).unwrap(), 0.0);
        let d = transe_distance(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        assert!(transe_distance(&[1.0], &[0.0, 1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn distance_matches_independent_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let v = |rng: &mut ChaCha8Rng| (0..8).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>();
            let (h, r, t) = (v(&mut rng), v(&mut rng), v(&mut rng));
            let mut acc = 0.0f64;
            for i in 0..8 {
                acc = acc.hypot(h[i] + r[i] - t[i]);
            }
            assert!((transe_distance(&h, &r, &t).unwrap() - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn triple_loss_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!((kbe_triple_loss(1.5, Label::Positive, 1.5) - ln2).abs() < 1e-15);
        assert!((kbe_triple_loss(1.5, Label::Negative, 1.5) - ln2).abs() < 1e-15);
        let expect = (1.0 + (-1.0f64).exp()).ln();
        assert!((kbe_triple_loss(0.0, Label::Positive, 1.0) - expect).abs() < 1e-15);
        assert!((expect - 0.313262).abs() < 1e-6);
        let far = kbe_triple_loss(50.0, Label::Negative, 1.0);
        assert!(far.is_finite() && far > 0.0);
        assert!((far - (-49.0f64).exp()).abs() < 1e-30);
        assert!(kbe_triple_loss(1e6, Label::Positive, 1.0).is_finite());
    }

    #[test]
    fn triple_loss_monotone_in_distance() {
        let mut prev_pos = 0.0;
        let mut prev_neg = f64::INFINITY;
        for i in 0..200 {
            let d = i as f64 * 0.1;
            let p = kbe_triple_loss(d, Label::Positive, 6.0);
            let n = kbe_triple_loss(d, Label::Negative, 6.0);
            assert!(p > prev_pos);
            assert!(n < prev_neg);
            prev_pos = p;
            prev_neg = n;
        }
    }

    #[test]
    fn single_entity_vocab_corrupts_to_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = Triple::new(0, 2, 0);
        for n in sample_negatives(t, 1, &KbeConfig::default(), &mut rng) {
            assert_eq!(n, t);
        }
    }

    #[test]
    fn head_corruption_keeps_relation_and_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = KbeConfig {
            corruption: Corruption::Head,
            neg_per_pos: 50,
            ..KbeConfig::default()
        };
        let t = Triple::new(3, 1, 4);
        let negs = sample_negatives(t, 10, &cfg, &mut rng);
        assert_eq!(negs.len(), 50);
        assert!(negs.iter().all(|n| n.r == 1 && n.t == 4));
    }

    #[test]
    fn replacement_is_uniform() {
        // 10^5 draws over 100 entities: each count within 5σ of 1000.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = KbeConfig {
            corruption: Corruption::Tail,
            neg_per_pos: 100_000,
            ..KbeConfig::default()
        };
        let negs = sample_negatives(Triple::new(0, 0, 0), 100, &cfg, &mut rng);
        let mut counts = [0usize; 100];
        for n in negs {
            counts[n.t as usize] += 1;
        }
        let sigma = (100_000.0f64 * 0.01 * 0.99).sqrt();
        for c in counts {
            assert!((c as f64 - 1000.0).abs() < 5.0 * sigma, "count {c}");
        }
    }

    #[test]
    fn mixed_facts_corrupt_kb_slots_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = KbeConfig {
            neg_per_pos: 40,
            ..KbeConfig::default()
        };
        let f = Fact {
            head: Slot::Text(5),
            relation: 0,
            tail: Slot::Kb(1),
        };
        for n in sample_fact_negatives(f, 20, &cfg, &mut rng) {
            assert_eq!(n.head, Slot::Text(5));
            assert!(n.tail.is_kb());
        }
    }

    fn space(dim: usize) -> EmbeddingSpace {
        EmbeddingSpace::initialize(
            SpaceShape {
                kb_entities: 4,
                relations: 2,
                words: 1,
                text_entities: 1,
                dim,
            },
            11,
        )
        .unwrap()
    }

    #[test]
    fn empty_batch() {
        let (l, g) = kbe_loss_and_grads(&[], &space(4), &KbeConfig::default());
        assert_eq!(l, 0.0);
        assert!(g.is_empty());
    }

    #[test]
    fn zero_distance_has_zero_gradient() {
        let s = space(3);
        let h = s.row(Table::KbEntity, 0);
        let r = s.row(Table::Relation, 0);
        let t: Vec<f64> = h.iter().zip(&r).map(|(a, b)| a + b).collect();
        s.write(s.key(Table::KbEntity, 1), &t);
        let cfg = KbeConfig::default();
        let (l, g) = kbe_loss_and_grads(&[(Triple::new(0, 0, 1), Label::Positive)], &s, &cfg);
        let d = transe_distance(&h, &r, &s.row(Table::KbEntity, 1)).unwrap();
        assert_eq!(d, 0.0);
        assert!((l - softplus(-cfg.gamma)).abs() < 1e-15);
        assert!(g.is_empty());
    }

    #[test]
    fn batch_is_sum_of_singletons() {
        let s = space(6);
        let cfg = KbeConfig::default();
        let batch = [
            (Triple::new(0, 0, 1), Label::Positive),
            (Triple::new(0, 0, 2), Label::Negative),
            (Triple::new(3, 1, 1), Label::Positive),
        ];
        let (l, g) = kbe_loss_and_grads(&batch, &s, &cfg);
        let mut sum_l = 0.0;
        let mut sum_g = Gradients::new();
        for b in &batch {
            let (l1, g1) = kbe_loss_and_grads(std::slice::from_ref(b), &s, &cfg);
            sum_l += l1;
            sum_g.merge(&g1);
        }
        assert!((l - sum_l).abs() < 1e-10);
        for (k, v) in g.iter() {
            for (a, b) in v.iter().zip(sum_g.get(k).unwrap()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let s = space(5);
        let cfg = KbeConfig { gamma: 1.0, ..KbeConfig::default() };
        let batch = [
            (Triple::new(0, 0, 1), Label::Positive),
            (Triple::new(2, 1, 1), Label::Negative),
            (Triple::new(3, 0, 3), Label::Negative),
        ];
        let (_, g) = kbe_loss_and_grads(&batch, &s, &cfg);
        for (key, grad) in g.iter() {
            let table = s.table(key.table);
            for (c, &a) in grad.iter().enumerate() {
                let orig = table.get(key.row as usize, c);
                table.set(key.row as usize, c, orig + 1e-6);
                let up = kbe_loss_and_grads(&batch, &s, &cfg).0;
                table.set(key.row as usize, c, orig - 1e-6);
                let down = kbe_loss_and_grads(&batch, &s, &cfg).0;
                table.set(key.row as usize, c, orig);
                let n = (up - down) / 2e-6;
                assert!((a - n).abs() <= 1e-6 * a.abs().max(1.0), "{key:?}[{c}]: {a} vs {n}");
            }
        }
    }

    fn rotate(v: &[f64], i: usize, j: usize, angle: f64) -> Vec<f64> {
        let mut out = v.to_vec();
        let (sin, cos) = angle.sin_cos();
        out[i] = cos * v[i] - sin * v[j];
        out[j] = sin * v[i] + cos * v[j];
        out
    }

    proptest::proptest! {
        #[test]
        fn distance_is_rotation_invariant(
            h in proptest::collection::vec(-2.0f64..2.0, 6),
            r in proptest::collection::vec(-2.0f64..2.0, 6),
            t in proptest::collection::vec(-2.0f64..2.0, 6),
            i in 0usize..6,
            j in 0usize..6,
            angle in -3.2f64..3.2,
        ) {
            proptest::prop_assume!(i != j);
            let d = transe_distance(&h, &r, &t).unwrap();
            let d_rot = transe_distance(&rotate(&h, i, j, angle), &rotate(&r, i, j, angle), &rotate(&t, i, j, angle)).unwrap();
            proptest::prop_assert!((d - d_rot).abs() < 1e-9);
            let l = kbe_triple_loss(d, Label::Positive, 6.0);
            proptest::prop_assert!((l - kbe_triple_loss(d_rot, Label::Positive, 6.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn unit_gradient_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let v = |rng: &mut ChaCha8Rng| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
            let g = distance_grad_head(&v(&mut rng), &v(&mut rng), &v(&mut rng));
            let n: f64 = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }
}
