// SPDX-License-Identifier: Apache-2.0

//! Path-set aggregation: each length bucket collapses to one vector and the
//! bucket vectors are concatenated in length order.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::embed::FactEmbedder;
use crate::error::{Error, Result};
use crate::kg::Vocabulary;
use crate::neural::{
    avg_pool_1d, dense_backward, dense_forward, lstm_backward, lstm_forward, max_pool_1d, max_pool_backward,
    Activation, DenseCache, DenseParams, LstmCache, LstmParams, Tensor,
};
use crate::paths::PathSet;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggregatorKind {
    AvgPool,
    MaxPool,
    #[default]
    LstmMaxPool,
}

impl AggregatorKind {
    pub const ALL: [AggregatorKind; 3] = [AggregatorKind::AvgPool, AggregatorKind::MaxPool, AggregatorKind::LstmMaxPool];
}

impl FromStr for AggregatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "avg" | "avgpool" => Ok(AggregatorKind::AvgPool),
            "max" | "maxpool" => Ok(AggregatorKind::MaxPool),
            "lstm" | "lstmmaxpool" => Ok(AggregatorKind::LstmMaxPool),
            _ => Err(Error::InvalidArgument(format!(
                "unknown aggregator `{s}` (expected avgpool, maxpool or lstmmaxpool)"
            ))),
        }
    }
}

impl fmt::Display for AggregatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregatorKind::AvgPool => "avgpool",
            AggregatorKind::MaxPool => "maxpool",
            AggregatorKind::LstmMaxPool => "lstmmaxpool",
        })
    }
}

/// A path as a sequence of fact vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedPath {
    pub facts: Vec<Vec<f64>>,
    /// Relatedness of the source pattern; `None` for fallback paths.
    pub score: Option<f64>,
    /// Path dump text, the secondary sort key.
    pub key: String,
}

impl EmbeddedPath {
    pub fn concat(&self) -> Vec<f64> {
        self.facts.concat()
    }
}

/// Embedded paths by length, each bucket in aggregation order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedPathSet {
    pub fact_dim: usize,
    by_length: Vec<Vec<EmbeddedPath>>,
}

impl EmbeddedPathSet {
    pub fn new(fact_dim: usize, l_max: usize) -> Self {
        EmbeddedPathSet {
            fact_dim,
            by_length: vec![Vec::new(); l_max],
        }
    }

    pub fn l_max(&self) -> usize {
        self.by_length.len()
    }

    pub fn get(&self, l: usize) -> &[EmbeddedPath] {
        &self.by_length[l - 1]
    }

    /// Inserts and keeps the bucket ordered by score desc, then key asc.
    pub fn push(&mut self, path: EmbeddedPath) -> Result<()> {
        let l = path.facts.len();
        if l == 0 || l > self.l_max() {
            return Err(Error::InvalidArgument(format!("path length {l} outside 1..={}", self.l_max())));
        }
        if let Some(bad) = path.facts.iter().find(|f| f.len() != self.fact_dim) {
            return Err(Error::DimMismatch {
                expected: self.fact_dim,
                got: bad.len(),
            });
        }
        let bucket = &mut self.by_length[l - 1];
        let pos = bucket.partition_point(|p| order(p, &path).is_lt());
        bucket.insert(pos, path);
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.by_length.iter().map(Vec::len).sum()
    }
}

fn order(a: &EmbeddedPath, b: &EmbeddedPath) -> std::cmp::Ordering {
    let sa = a.score.unwrap_or(f64::NEG_INFINITY);
    let sb = b.score.unwrap_or(f64::NEG_INFINITY);
    sb.total_cmp(&sa).then_with(|| a.key.cmp(&b.key))
}

pub fn embed_pathset(paths: &PathSet, embedder: &FactEmbedder, vocab: &Vocabulary) -> Result<EmbeddedPathSet> {
    let mut out = EmbeddedPathSet::new(embedder.fact_dim(), paths.l_max());
    for path in paths.iter() {
        out.push(EmbeddedPath {
            facts: embedder.embed_path(path, vocab)?,
            score: path.source.map(|s| s.score),
            key: path.display(vocab),
        })?;
    }
    Ok(out)
}

/// Mean of the concatenated rows.
pub fn aggregate_avg<R: AsRef<[f64]>>(rows: &[R]) -> Result<Vec<f64>> {
    avg_pool_1d(rows)
}

/// Elementwise max of `σ(W·row + b)` over rows.
pub fn aggregate_max<R: AsRef<[f64]>>(rows: &[R], params: &DenseParams) -> Result<Vec<f64>> {
    let acts = rows
        .iter()
        .map(|r| dense_forward(r.as_ref(), params, Activation::Sigmoid).map(|(y, _)| y))
        .collect::<Result<Vec<_>>>()?;
    Ok(max_pool_1d(&acts)?.0)
}

/// Inner LSTM per path, outer LSTM over the per-path final states, then a
/// max over the outer states.
pub fn aggregate_lstm_maxpool(paths: &[Vec<Vec<f64>>], inner: &LstmParams, outer: &LstmParams) -> Result<Vec<f64>> {
    let finals = paths
        .iter()
        .map(|p| lstm_forward(p, inner).map(|(hs, _)| hs.last().unwrap().clone()))
        .collect::<Result<Vec<_>>>()?;
    let (hs, _) = lstm_forward(&finals, outer)?;
    Ok(max_pool_1d(&hs)?.0)
}

#[derive(Clone, Debug, PartialEq)]
pub enum AggregatorParams {
    Avg,
    /// One dense layer per length.
    Max(Vec<DenseParams>),
    /// Inner and outer LSTM per length.
    Lstm(Vec<(LstmParams, LstmParams)>),
}

impl AggregatorParams {
    pub fn zeros_like(&self) -> Self {
        match self {
            AggregatorParams::Avg => AggregatorParams::Avg,
            AggregatorParams::Max(v) => AggregatorParams::Max(v.iter().map(DenseParams::zeros_like).collect()),
            AggregatorParams::Lstm(v) => {
                AggregatorParams::Lstm(v.iter().map(|(a, b)| (a.zeros_like(), b.zeros_like())).collect())
            }
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        match self {
            AggregatorParams::Avg => Vec::new(),
            AggregatorParams::Max(v) => v.iter().flat_map(DenseParams::tensors).collect(),
            AggregatorParams::Lstm(v) => v.iter().flat_map(|(a, b)| a.tensors().into_iter().chain(b.tensors())).collect(),
        }
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            AggregatorParams::Avg => Vec::new(),
            AggregatorParams::Max(v) => v.iter_mut().flat_map(DenseParams::tensors_mut).collect(),
            AggregatorParams::Lstm(v) => v
                .iter_mut()
                .flat_map(|(a, b)| a.tensors_mut().into_iter().chain(b.tensors_mut()))
                .collect(),
        }
    }
}

/// Per-length vectors and their concatenation.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRepr {
    pub per_length: Vec<Vec<f64>>,
    pub combined: Vec<f64>,
}

enum SlotCache {
    Empty,
    Avg,
    Max { caches: Vec<DenseCache>, argmax: Vec<usize> },
    Lstm { inner: Vec<LstmCache>, outer: LstmCache, argmax: Vec<usize>, steps: usize },
}

/// Forward state kept for the backward pass.
pub struct AggregateCache {
    slots: Vec<SlotCache>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregator {
    pub kind: AggregatorKind,
    pub fact_dim: usize,
    pub l_max: usize,
    pub hidden: usize,
    pub params: AggregatorParams,
}

impl Aggregator {
    pub fn init(kind: AggregatorKind, fact_dim: usize, l_max: usize, hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        if fact_dim == 0 || l_max == 0 || hidden == 0 {
            return Err(Error::InvalidArgument("aggregator dimensions must be positive".into()));
        }
        let params = match kind {
            AggregatorKind::AvgPool => AggregatorParams::Avg,
            AggregatorKind::MaxPool => {
                AggregatorParams::Max((1..=l_max).map(|l| DenseParams::init(hidden, l * fact_dim, rng)).collect())
            }
            AggregatorKind::LstmMaxPool => AggregatorParams::Lstm(
                (0..l_max)
                    .map(|_| {
                        let inner = LstmParams::init(fact_dim, hidden, rng);
                        (inner, LstmParams::init(hidden, hidden, rng))
                    })
                    .collect(),
            ),
        };
        Ok(Aggregator {
            kind,
            fact_dim,
            l_max,
            hidden,
            params,
        })
    }

    pub fn slot_width(&self, l: usize) -> usize {
        match self.kind {
            AggregatorKind::AvgPool => l * self.fact_dim,
            _ => self.hidden,
        }
    }

    pub fn width(&self) -> usize {
        (1..=self.l_max).map(|l| self.slot_width(l)).sum()
    }

    pub fn forward(&self, set: &EmbeddedPathSet) -> Result<(AggregateRepr, AggregateCache)> {
        if set.fact_dim != self.fact_dim || set.l_max() != self.l_max {
            return Err(Error::InvalidArgument(format!(
                "path set shape (fact_dim {}, l_max {}) does not match aggregator (fact_dim {}, l_max {})",
                set.fact_dim,
                set.l_max(),
                self.fact_dim,
                self.l_max
            )));
        }
        let mut per_length = Vec::with_capacity(self.l_max);
        let mut slots = Vec::with_capacity(self.l_max);
        for l in 1..=self.l_max {
            let bucket = set.get(l);
            if bucket.is_empty() {
                per_length.push(vec![0.0; self.slot_width(l)]);
                slots.push(SlotCache::Empty);
                continue;
            }
            let (v, cache) = match &self.params {
                AggregatorParams::Avg => {
                    let rows: Vec<Vec<f64>> = bucket.iter().map(EmbeddedPath::concat).collect();
                    (avg_pool_1d(&rows)?, SlotCache::Avg)
                }
                AggregatorParams::Max(dense) => {
                    let mut acts = Vec::with_capacity(bucket.len());
                    let mut caches = Vec::with_capacity(bucket.len());
                    for p in bucket {
                        let (y, c) = dense_forward(&p.concat(), &dense[l - 1], Activation::Sigmoid)?;
                        acts.push(y);
                        caches.push(c);
                    }
                    let (v, argmax) = max_pool_1d(&acts)?;
                    (v, SlotCache::Max { caches, argmax })
                }
                AggregatorParams::Lstm(lstms) => {
                    let (inner_p, outer_p) = &lstms[l - 1];
                    let mut finals = Vec::with_capacity(bucket.len());
                    let mut inner = Vec::with_capacity(bucket.len());
                    for p in bucket {
                        let (hs, c) = lstm_forward(&p.facts, inner_p)?;
                        finals.push(hs.last().unwrap().clone());
                        inner.push(c);
                    }
                    let (hs, outer) = lstm_forward(&finals, outer_p)?;
                    let (v, argmax) = max_pool_1d(&hs)?;
                    (
                        v,
                        SlotCache::Lstm {
                            inner,
                            outer,
                            argmax,
                            steps: l,
                        },
                    )
                }
            };
            per_length.push(v);
            slots.push(cache);
        }
        let combined = per_length.concat();
        Ok((AggregateRepr { per_length, combined }, AggregateCache { slots }))
    }

    /// Accumulates parameter gradients for `d loss / d combined` into `grads`.
    pub fn backward(&self, grad_combined: &[f64], cache: &AggregateCache, grads: &mut AggregatorParams) {
        let mut offset = 0;
        for (li, slot) in cache.slots.iter().enumerate() {
            let l = li + 1;
            let width = self.slot_width(l);
            let g = &grad_combined[offset..offset + width];
            offset += width;
            match (slot, &self.params, &mut *grads) {
                (SlotCache::Max { caches, argmax }, AggregatorParams::Max(p), AggregatorParams::Max(gp)) => {
                    let routed = max_pool_backward(g, argmax, caches.len());
                    for (gy, c) in routed.iter().zip(caches) {
                        if gy.iter().any(|x| *x != 0.0) {
                            dense_backward(gy, c, &p[li], &mut gp[li]);
                        }
                    }
                }
                (
                    SlotCache::Lstm {
                        inner,
                        outer,
                        argmax,
                        steps,
                    },
                    AggregatorParams::Lstm(p),
                    AggregatorParams::Lstm(gp),
                ) => {
                    let (inner_p, outer_p) = &p[li];
                    let (inner_g, outer_g) = &mut gp[li];
                    let routed = max_pool_backward(g, argmax, inner.len());
                    let d_finals = lstm_backward(&routed, outer, outer_p, outer_g);
                    for (d, c) in d_finals.into_iter().zip(inner) {
                        let mut gh = vec![vec![0.0; self.hidden]; *steps];
                        gh[steps - 1] = d;
                        lstm_backward(&gh, c, inner_p, inner_g);
                    }
                }
                _ => {}
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::sigmoid;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn path(facts: Vec<Vec<f64>>, score: f64, key: &str) -> EmbeddedPath {
        EmbeddedPath {
            facts,
            score: Some(score),
            key: key.into(),
        }
    }

    #[test]
    fn avg_examples() {
        assert_eq!(aggregate_avg(&[vec![1.0, 2.0]]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(aggregate_avg(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap(), vec![1.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..5).map(|_| rand_vec(&mut rng, 6)).collect();
        let got = aggregate_avg(&rows).unwrap();
        for c in 0..6 {
            let mut s = 0.0;
            for r in &rows {
                s += r[c];
            }
            assert!((got[c] - s / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn max_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = DenseParams::init(3, 4, &mut rng);
        let x = rand_vec(&mut rng, 4);
        let direct = dense_forward(&x, &p, Activation::Sigmoid).unwrap().0;
        assert_eq!(aggregate_max(&[x.clone()], &p).unwrap(), direct);

        let zero = DenseParams::zeros(3, 4);
        assert_eq!(aggregate_max(&[x, vec![5.0; 4]], &zero).unwrap(), vec![0.5; 3]);

        let rows: Vec<Vec<f64>> = (0..4).map(|_| rand_vec(&mut rng, 4)).collect();
        let got = aggregate_max(&rows, &p).unwrap();
        for j in 0..3 {
            let best = rows
                .iter()
                .map(|r| {
                    let z: f64 = (0..4).map(|k| p.w.data()[j * 4 + k] * r[k]).sum::<f64>() + p.b.data()[j];
                    sigmoid(z)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((got[j] - best).abs() < 1e-12);
        }
    }

    #[test]
    fn lstm_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inner = LstmParams::init(2, 3, &mut rng);
        let outer = LstmParams::init(3, 3, &mut rng);
        let single = vec![vec![rand_vec(&mut rng, 2)]];
        let h_inner = lstm_forward(&single[0], &inner).unwrap().0;
        let h_outer = lstm_forward(&h_inner, &outer).unwrap().0;
        assert_eq!(aggregate_lstm_maxpool(&single, &inner, &outer).unwrap(), h_outer[0]);

        let zeros = aggregate_lstm_maxpool(&single, &LstmParams::zeros(2, 3), &LstmParams::zeros(3, 3)).unwrap();
        assert_eq!(zeros, vec![0.0; 3]);

        let paths: Vec<Vec<Vec<f64>>> = (0..3).map(|_| (0..2).map(|_| rand_vec(&mut rng, 2)).collect()).collect();
        let finals: Vec<Vec<f64>> = paths
            .iter()
            .map(|p| lstm_forward(p, &inner).unwrap().0[1].clone())
            .collect();
        let hs = lstm_forward(&finals, &outer).unwrap().0;
        let want: Vec<f64> = (0..3).map(|j| hs.iter().map(|h| h[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
        assert_eq!(aggregate_lstm_maxpool(&paths, &inner, &outer).unwrap(), want);
    }

    fn toy_set(rng: &mut impl Rng, fact_dim: usize, l_max: usize, counts: &[usize]) -> EmbeddedPathSet {
        let mut set = EmbeddedPathSet::new(fact_dim, l_max);
        for (li, &n) in counts.iter().enumerate() {
            for i in 0..n {
                let facts = (0..=li).map(|_| rand_vec(rng, fact_dim)).collect();
                set.push(path(facts, rng.gen_range(0.0..1.0), &format!("p{li}-{i}"))).unwrap();
            }
        }
        set
    }

    #[test]
    fn repr_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in AggregatorKind::ALL {
            let agg = Aggregator::init(kind, 3, 3, 4, &mut rng).unwrap();
            let empty = EmbeddedPathSet::new(3, 3);
            let (r, _) = agg.forward(&empty).unwrap();
            assert_eq!(r.combined, vec![0.0; agg.width()]);

            let only2 = toy_set(&mut rng, 3, 3, &[0, 2, 0]);
            let (r, _) = agg.forward(&only2).unwrap();
            let w1 = agg.slot_width(1);
            let w2 = agg.slot_width(2);
            assert!(r.combined[..w1].iter().all(|x| *x == 0.0));
            assert!(r.combined[w1 + w2..].iter().all(|x| *x == 0.0));
            assert!(r.combined[w1..w1 + w2].iter().any(|x| *x != 0.0));

            let full = toy_set(&mut rng, 3, 3, &[2, 3, 1]);
            let (r, _) = agg.forward(&full).unwrap();
            let mut want = Vec::new();
            for l in 1..=3 {
                let bucket = full.get(l);
                let slot = match &agg.params {
                    AggregatorParams::Avg => {
                        aggregate_avg(&bucket.iter().map(EmbeddedPath::concat).collect::<Vec<_>>()).unwrap()
                    }
                    AggregatorParams::Max(d) => {
                        aggregate_max(&bucket.iter().map(EmbeddedPath::concat).collect::<Vec<_>>(), &d[l - 1]).unwrap()
                    }
                    AggregatorParams::Lstm(p) => aggregate_lstm_maxpool(
                        &bucket.iter().map(|p| p.facts.clone()).collect::<Vec<_>>(),
                        &p[l - 1].0,
                        &p[l - 1].1,
                    )
                    .unwrap(),
                };
                want.extend(slot);
            }
            assert_eq!(r.combined, want);
        }
    }

    #[test]
    fn bucket_order_is_score_then_key() {
        let mut set = EmbeddedPathSet::new(1, 1);
        set.push(path(vec![vec![1.0]], 0.2, "b")).unwrap();
        set.push(path(vec![vec![2.0]], 0.9, "z")).unwrap();
        set.push(path(vec![vec![3.0]], 0.2, "a")).unwrap();
        set.push(EmbeddedPath {
            facts: vec![vec![4.0]],
            score: None,
            key: "0".into(),
        })
        .unwrap();
        let keys: Vec<&str> = set.get(1).iter().map(|p| p.key.as_str()).collect();
        assert_eq!(keys, ["z", "a", "b", "0"]);
        assert!(set.push(path(vec![vec![1.0], vec![1.0]], 0.1, "x")).is_err());
    }

    fn loss_of(agg: &Aggregator, set: &EmbeddedPathSet, w: &[f64]) -> f64 {
        let (r, _) = agg.forward(set).unwrap();
        r.combined.iter().zip(w).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn backward_matches_finite_differences() {
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [AggregatorKind::MaxPool, AggregatorKind::LstmMaxPool] {
            let agg = Aggregator::init(kind, 2, 2, 3, &mut rng).unwrap();
            let set = toy_set(&mut rng, 2, 2, &[2, 3]);
            let w = rand_vec(&mut rng, agg.width());
            let (_, cache) = agg.forward(&set).unwrap();
            let mut grads = agg.params.zeros_like();
            agg.backward(&w, &cache, &mut grads);
            let analytic: Vec<f64> = grads.tensors().iter().flat_map(|t| t.data().to_vec()).collect();
            let n = analytic.len();
            let mut checked = 0;
            for idx in (0..n).step_by(3) {
                let mut plus = agg.clone();
                let mut minus = agg.clone();
                bump(&mut plus.params, idx, h);
                bump(&mut minus.params, idx, -h);
                let fd = (loss_of(&plus, &set, &w) - loss_of(&minus, &set, &w)) / (2.0 * h);
                let err = (fd - analytic[idx]).abs() / (fd.abs() + analytic[idx].abs()).max(1e-6);
                assert!(err < 1e-4, "{kind} param {idx}: {fd} vs {}", analytic[idx]);
                checked += 1;
            }
            assert!(checked > 5);
        }
    }

    fn bump(params: &mut AggregatorParams, mut idx: usize, h: f64) {
        for t in params.tensors_mut() {
            if idx < t.len() {
                t.data_mut()[idx] += h;
                return;
            }
            idx -= t.len();
        }
    }

    proptest! {
        #[test]
        fn pooled_aggregators_ignore_path_order(seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..5).map(|_| rand_vec(&mut rng, 4)).collect();
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rng);
            let p = DenseParams::init(3, 4, &mut rng);
            let a = aggregate_avg(&rows).unwrap();
            let b = aggregate_avg(&shuffled).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert_eq!(aggregate_max(&rows, &p).unwrap(), aggregate_max(&shuffled, &p).unwrap());
        }

        #[test]
        fn max_dominates_each_path(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..4).map(|_| rand_vec(&mut rng, 3)).collect();
            let p = DenseParams::init(2, 3, &mut rng);
            let m = aggregate_max(&rows, &p).unwrap();
            for r in &rows {
                let y = dense_forward(r, &p, Activation::Sigmoid).unwrap().0;
                for (a, b) in m.iter().zip(&y) {
                    prop_assert!(a >= b);
                }
            }
        }

        #[test]
        fn slots_are_isolated(seed in any::<u64>(), kind in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let agg = Aggregator::init(AggregatorKind::ALL[kind], 2, 3, 3, &mut rng).unwrap();
            let a = toy_set(&mut rng, 2, 3, &[1, 2, 1]);
            let mut b = EmbeddedPathSet::new(2, 3);
            for l in [1, 3] {
                for p in a.get(l) {
                    b.push(p.clone()).unwrap();
                }
            }
            for _ in 0..2 {
                b.push(path(vec![rand_vec(&mut rng, 2), rand_vec(&mut rng, 2)], 0.5, "new")).unwrap();
            }
            let (ra, _) = agg.forward(&a).unwrap();
            let (rb, _) = agg.forward(&b).unwrap();
            prop_assert_eq!(&ra.per_length[0], &rb.per_length[0]);
            prop_assert_eq!(&ra.per_length[2], &rb.per_length[2]);
            prop_assert_eq!(agg.forward(&a).unwrap().0, ra);
        }
    }
}
