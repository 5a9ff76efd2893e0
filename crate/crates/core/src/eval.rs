//! Filtered link-prediction ranking, PR-AUC with generated negatives and
//! the float-vs-bitwise scoring benchmark.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::binarize::BinaryFactors;
use crate::bits::{xnor_hamming, BitMatrix};
use crate::dense::{triple_product, DenseFactors};
use crate::error::{Error, Result};
use crate::kg::{Split, Triple, TripleStore};

/// Attempts per generated PR-AUC negative before giving up.
pub const PR_NEGATIVE_RETRIES: usize = 10_000;

/// Anything that assigns a confidence score to `(subject, object, relation)`.
pub trait Scorer: Sync {
    fn n_entities(&self) -> usize;
    fn n_relations(&self) -> usize;
    /// Indices are assumed in bounds.
    fn score(&self, i: usize, j: usize, k: usize) -> f64;
}

impl Scorer for DenseFactors {
    fn n_entities(&self) -> usize {
        DenseFactors::n_entities(self)
    }

    fn n_relations(&self) -> usize {
        DenseFactors::n_relations(self)
    }

    fn score(&self, i: usize, j: usize, k: usize) -> f64 {
        self.score_unchecked(i, j, k)
    }
}

impl Scorer for BinaryFactors {
    fn n_entities(&self) -> usize {
        BinaryFactors::n_entities(self)
    }

    fn n_relations(&self) -> usize {
        BinaryFactors::n_relations(self)
    }

    fn score(&self, i: usize, j: usize, k: usize) -> f64 {
        self.score_bitwise_unchecked(i, j, k)
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn n_entities(&self) -> usize {
        (**self).n_entities()
    }

    fn n_relations(&self) -> usize {
        (**self).n_relations()
    }

    fn score(&self, i: usize, j: usize, k: usize) -> f64 {
        (**self).score(i, j, k)
    }
}

/// Wraps a closure as a [`Scorer`].
pub struct FnScorer<F> {
    pub n_entities: usize,
    pub n_relations: usize,
    pub f: F,
}

impl<F: Fn(usize, usize, usize) -> f64 + Sync> Scorer for FnScorer<F> {
    fn n_entities(&self) -> usize {
        self.n_entities
    }

    fn n_relations(&self) -> usize {
        self.n_relations
    }

    fn score(&self, i: usize, j: usize, k: usize) -> f64 {
        (self.f)(i, j, k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Replace the subject: rank `(ℓ, j, k)` over `ℓ`.
    Subject,
    /// Replace the object: rank `(i, ℓ, k)` over `ℓ`.
    Object,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingOptions {
    /// Drop competitors that are known facts. Off only for debugging.
    pub filtered: bool,
    /// On an augmented store, score subject queries as object queries
    /// under the inverse relation (`(j, ℓ, k⁻¹)`). Stores without inverse
    /// relations always score `(ℓ, j, k)` directly.
    pub subject_via_inverse: bool,
    pub hits_at: Vec<usize>,
}

impl Default for RankingOptions {
    fn default() -> Self {
        Self {
            filtered: true,
            subject_via_inverse: true,
            hits_at: vec![1, 3, 10],
        }
    }
}

/// Rank of the true triple among the candidate corruptions on `side`:
/// `1 + #greater + #equal / 2`, counting only unfiltered competitors.
pub fn filtered_rank<S: Scorer + ?Sized>(
    scorer: &S,
    store: &TripleStore,
    test: Triple,
    side: Side,
    options: &RankingOptions,
) -> Result<f64> {
    store.is_known_fact(test.subject, test.object, test.relation)?;
    let n_e = store.n_entities();
    let inverse = if side == Side::Subject && options.subject_via_inverse && store.is_augmented() {
        Some(inverse_relation(store, test.relation))
    } else {
        None
    };

    let candidate = |l: usize| match (side, inverse) {
        (Side::Object, _) => scorer.score(test.subject, l, test.relation),
        (Side::Subject, None) => scorer.score(l, test.object, test.relation),
        (Side::Subject, Some(inv)) => scorer.score(test.object, l, inv),
    };
    let (truth, known) = match side {
        Side::Object => (test.object, store.known_objects(test.subject, test.relation)),
        Side::Subject => (test.subject, store.known_subjects(test.object, test.relation)),
    };

    let mut excluded = vec![false; n_e];
    excluded[truth] = true;
    if options.filtered {
        for &l in known {
            excluded[l] = true;
        }
    }
    let target = candidate(truth);
    let (mut greater, mut equal) = (0usize, 0usize);
    for (l, &skip) in excluded.iter().enumerate() {
        if skip {
            continue;
        }
        let s = candidate(l);
        if s > target {
            greater += 1;
        } else if s == target {
            equal += 1;
        }
    }
    Ok(1.0 + greater as f64 + equal as f64 / 2.0)
}

fn inverse_relation(store: &TripleStore, k: usize) -> usize {
    let base = store.n_relations() / 2;
    if k < base {
        k + base
    } else {
        k - base
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub mrr: f64,
    pub mean_rank: f64,
    pub hits: BTreeMap<usize, f64>,
    pub n_queries: usize,
}

impl RankReport {
    pub fn from_ranks(ranks: &[f64], hits_at: &[usize]) -> Self {
        let n = ranks.len();
        let denom = n.max(1) as f64;
        let mrr = ranks.iter().map(|r| 1.0 / r).sum::<f64>() / denom;
        let mean_rank = ranks.iter().sum::<f64>() / denom;
        let hits = hits_at
            .iter()
            .map(|&h| {
                let count = ranks.iter().filter(|&&r| r <= h as f64).count();
                (h, count as f64 / denom)
            })
            .collect();
        Self {
            mrr,
            mean_rank,
            hits,
            n_queries: n,
        }
    }

    pub fn hits_at(&self, n: usize) -> Option<f64> {
        self.hits.get(&n).copied()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>10}", "queries", self.n_queries);
        let _ = writeln!(s, "{:<10} {:>10.6}", "MRR", self.mrr);
        let _ = writeln!(s, "{:<10} {:>10.3}", "MR", self.mean_rank);
        for (n, v) in &self.hits {
            let _ = writeln!(s, "{:<10} {:>10.6}", format!("Hits@{n}"), v);
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        let _ = writeln!(s, "queries,{}", self.n_queries);
        let _ = writeln!(s, "mrr,{}", self.mrr);
        let _ = writeln!(s, "mr,{}", self.mean_rank);
        for (n, v) in &self.hits {
            let _ = writeln!(s, "hits@{n},{v}");
        }
        s
    }
}

fn check_shape<S: Scorer + ?Sized>(scorer: &S, store: &TripleStore) -> Result<()> {
    if scorer.n_entities() != store.n_entities() {
        return Err(Error::ShapeMismatch {
            what: "entity count",
            expected: store.n_entities(),
            found: scorer.n_entities(),
        });
    }
    if scorer.n_relations() != store.n_relations() {
        return Err(Error::ShapeMismatch {
            what: "relation count",
            expected: store.n_relations(),
            found: scorer.n_relations(),
        });
    }
    Ok(())
}

/// Subject- and object-side filtered ranks for every triple of `split`
/// (two queries per triple, subject first).
pub fn query_ranks<S: Scorer + ?Sized>(
    scorer: &S,
    store: &TripleStore,
    split: Split,
    options: &RankingOptions,
) -> Result<Vec<f64>> {
    let triples = store.split(split);
    if triples.is_empty() {
        return Err(Error::EmptySplit(split.name()));
    }
    check_shape(scorer, store)?;
    let pairs = triples
        .par_iter()
        .map(|&t| {
            Ok([
                filtered_rank(scorer, store, t, Side::Subject, options)?,
                filtered_rank(scorer, store, t, Side::Object, options)?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairs.into_iter().flatten().collect())
}

pub fn evaluate_ranking<S: Scorer + ?Sized>(
    scorer: &S,
    store: &TripleStore,
    split: Split,
    options: &RankingOptions,
) -> Result<RankReport> {
    let ranks = query_ranks(scorer, store, split, options)?;
    Ok(RankReport::from_ranks(&ranks, &options.hits_at))
}

/// Expected MRR of a scorer with i.i.d. continuous random scores under the
/// same filtering: the mean over queries of `H(n)/n`, where `n` is the
/// number of unfiltered competitors plus one.
pub fn random_mrr_baseline(store: &TripleStore, split: Split, options: &RankingOptions) -> Result<f64> {
    let triples = store.split(split);
    if triples.is_empty() {
        return Err(Error::EmptySplit(split.name()));
    }
    let n_e = store.n_entities();
    let candidates = |known: &[usize], truth: usize| {
        if options.filtered {
            n_e - known.iter().filter(|&&l| l != truth).count()
        } else {
            n_e
        }
    };
    let harmonic_mean = |n: usize| (1..=n).map(|r| 1.0 / r as f64).sum::<f64>() / n as f64;
    let total: f64 = triples
        .iter()
        .map(|t| {
            harmonic_mean(candidates(store.known_subjects(t.object, t.relation), t.subject))
                + harmonic_mean(candidates(store.known_objects(t.subject, t.relation), t.object))
        })
        .sum();
    Ok(total / (2 * triples.len()) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrAucReport {
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl PrAucReport {
    pub fn to_text(&self) -> String {
        format!(
            "{:<10} {:>10}\n{:<10} {:>10}\n{:<10} {:>10.6}\n",
            "positives", self.n_pos, "negatives", self.n_neg, "PR-AUC", self.auc
        )
    }

    pub fn to_csv(&self) -> String {
        format!(
            "metric,value\npositives,{}\nnegatives,{}\npr_auc,{}\n",
            self.n_pos, self.n_neg, self.auc
        )
    }
}

/// Area under the precision-recall curve by step-wise summation over
/// distinct score thresholds (equal scores form a single threshold).
pub fn pr_auc(positive_scores: &[f64], negative_scores: &[f64]) -> Result<f64> {
    if positive_scores.is_empty() {
        return Err(Error::EmptySplit("positives"));
    }
    let mut scored: Vec<(f64, bool)> = positive_scores
        .iter()
        .map(|&s| (s, true))
        .chain(negative_scores.iter().map(|&s| (s, false)))
        .collect();
    if scored.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::NotANumber("pr_auc scores"));
    }
    scored.sort_by(|x, y| y.0.total_cmp(&x.0));

    let n_pos = positive_scores.len() as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut auc = 0.0;
    let mut idx = 0;
    while idx < scored.len() {
        let threshold = scored[idx].0;
        while idx < scored.len() && scored[idx].0 == threshold {
            if scored[idx].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            idx += 1;
        }
        let recall = tp as f64 / n_pos;
        let precision = tp as f64 / (tp + fp) as f64;
        auc += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(auc)
}

/// `count` uniform random triples absent from the store's known facts.
pub fn generate_negatives<R: Rng>(store: &TripleStore, count: usize, rng: &mut R) -> Result<Vec<Triple>> {
    let (n_e, n_r) = (store.n_entities(), store.n_relations());
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut found = None;
        for _ in 0..PR_NEGATIVE_RETRIES {
            let t = Triple::new(rng.gen_range(0..n_e), rng.gen_range(0..n_e), rng.gen_range(0..n_r));
            if !store.contains(&t) {
                found = Some(t);
                break;
            }
        }
        out.push(found.ok_or_else(|| {
            Error::InvalidConfig("could not generate a negative triple: tensor is nearly full".into())
        })?);
    }
    Ok(out)
}

/// Score the split's triples against as many generated negatives and
/// return the PR-AUC. Deterministic for a fixed `seed`.
pub fn evaluate_pr_auc<S: Scorer + ?Sized>(
    scorer: &S,
    store: &TripleStore,
    split: Split,
    seed: u64,
) -> Result<PrAucReport> {
    let positives = store.split(split);
    if positives.is_empty() {
        return Err(Error::EmptySplit(split.name()));
    }
    check_shape(scorer, store)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let negatives = generate_negatives(store, positives.len(), &mut rng)?;
    let score = |t: &Triple| scorer.score(t.subject, t.object, t.relation);
    let pos: Vec<f64> = positives.iter().map(score).collect();
    let neg: Vec<f64> = negatives.iter().map(score).collect();
    Ok(PrAucReport {
        auc: pr_auc(&pos, &neg)?,
        n_pos: pos.len(),
        n_neg: neg.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub dim: usize,
    pub float_ns: f64,
    pub bitwise_ns: f64,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.float_ns / self.bitwise_ns
    }
}

/// `D = 10, 20, …, 1000`.
pub fn default_bench_dims() -> Vec<usize> {
    (10..=1000).step_by(10).collect()
}

pub const MIN_BENCH_REPS: usize = 10_000;

const BENCH_POOL: usize = 64;

/// Wall-clock cost per score of dense float scoring versus the XNOR /
/// popcount kernel on random rows, single-threaded, after a warm-up.
pub fn bench_scoring(dims: &[usize], reps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    if reps < MIN_BENCH_REPS {
        return Err(Error::InvalidConfig(format!(
            "reps must be at least {MIN_BENCH_REPS}, got {reps}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    dims.iter()
        .map(|&dim| {
            if dim == 0 {
                return Err(Error::InvalidConfig("benchmark dimension must be positive".into()));
            }
            let real: Vec<Vec<f64>> = (0..3 * BENCH_POOL)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let mut bits = BitMatrix::zeros(0, dim);
            for row in &real {
                bits.push_row(&crate::binarize::binarize_row(row, 1.0)?)?;
            }
            let pick = |r: usize| (r % BENCH_POOL, BENCH_POOL + (r * 7 + 3) % BENCH_POOL, 2 * BENCH_POOL + (r * 13 + 5) % BENCH_POOL);
            let scale = 0.5f64.powi(3);

            let float_pass = |n: usize| {
                let mut acc = 0.0;
                for r in 0..n {
                    let (x, y, z) = pick(r);
                    acc += triple_product(black_box(&real[x]), black_box(&real[y]), black_box(&real[z]));
                }
                black_box(acc)
            };
            let bit_pass = |n: usize| {
                let mut acc = 0.0;
                for r in 0..n {
                    let (x, y, z) = pick(r);
                    let bitc = xnor_hamming(
                        black_box(bits.row(x)),
                        black_box(bits.row(y)),
                        black_box(bits.row(z)),
                        dim,
                    );
                    acc += scale * (dim as i64 - 2 * bitc as i64) as f64;
                }
                black_box(acc)
            };

            float_pass(reps / 10);
            let t = Instant::now();
            float_pass(reps);
            let float_ns = t.elapsed().as_nanos() as f64 / reps as f64;

            bit_pass(reps / 10);
            let t = Instant::now();
            bit_pass(reps);
            let bitwise_ns = t.elapsed().as_nanos() as f64 / reps as f64;

            Ok(BenchRow {
                dim,
                float_ns,
                bitwise_ns,
            })
        })
        .collect()
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("D,float_ns,bitwise_ns\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.3},{:.3}", r.dim, r.float_ns, r.bitwise_ns);
    }
    s
}

pub fn bench_text(rows: &[BenchRow]) -> String {
    let mut s = format!("{:>6} {:>12} {:>12} {:>8}\n", "D", "float ns", "bitwise ns", "speedup");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>6} {:>12.2} {:>12.2} {:>7.1}x",
            r.dim,
            r.float_ns,
            r.bitwise_ns,
            r.speedup()
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_store() -> TripleStore {
        TripleStore::new(
            5,
            1,
            vec![Triple::new(0, 1, 0), Triple::new(0, 2, 0)],
            vec![],
            vec![Triple::new(0, 3, 0)],
        )
        .unwrap()
    }

    #[test]
    fn top_scored_truth_ranks_first() {
        let store = toy_store();
        let s = FnScorer {
            n_entities: 5,
            n_relations: 1,
            f: |i: usize, j: usize, _| if i == 0 && j == 3 { 1.0 } else { 0.0 },
        };
        let opts = RankingOptions::default();
        let t = store.test()[0];
        assert_eq!(filtered_rank(&s, &store, t, Side::Object, &opts).unwrap(), 1.0);
        assert_eq!(filtered_rank(&s, &store, t, Side::Subject, &opts).unwrap(), 1.0);
    }

    #[test]
    fn full_tie_uses_mid_rank() {
        let store = TripleStore::new(5, 1, vec![], vec![], vec![Triple::new(0, 3, 0)]).unwrap();
        let s = FnScorer {
            n_entities: 5,
            n_relations: 1,
            f: |_, _, _| 0.0,
        };
        let r = filtered_rank(&s, &store, store.test()[0], Side::Object, &RankingOptions::default()).unwrap();
        assert_eq!(r, 3.0);
    }

    #[test]
    fn known_facts_are_filtered() {
        let store = toy_store();
        // objects 1 and 2 (train facts) outscore the test object 3
        let s = FnScorer {
            n_entities: 5,
            n_relations: 1,
            f: |_, j: usize, _| match j {
                1 | 2 => 5.0,
                3 => 1.0,
                _ => 0.0,
            },
        };
        let t = store.test()[0];
        let filt = filtered_rank(&s, &store, t, Side::Object, &RankingOptions::default()).unwrap();
        let raw = filtered_rank(
            &s,
            &store,
            t,
            Side::Object,
            &RankingOptions {
                filtered: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(filt, 1.0);
        assert_eq!(raw, 3.0);
    }

    #[test]
    fn perfect_scorer_report() {
        let store = toy_store();
        let s = FnScorer {
            n_entities: 5,
            n_relations: 1,
            f: |i: usize, j: usize, _| if (i, j) == (0, 3) { 1.0 } else { 0.0 },
        };
        let r = evaluate_ranking(&s, &store, Split::Test, &RankingOptions::default()).unwrap();
        assert_eq!(r.mrr, 1.0);
        assert_eq!(r.n_queries, 2);
        assert!(r.hits.values().all(|&h| h == 1.0));
    }

    #[test]
    fn constant_scorer_mrr_is_mid_rank_reciprocal() {
        let n_e = 7;
        let store = TripleStore::new(n_e, 1, vec![], vec![], vec![Triple::new(2, 4, 0)]).unwrap();
        let s = FnScorer {
            n_entities: n_e,
            n_relations: 1,
            f: |_, _, _| 0.25,
        };
        let r = evaluate_ranking(&s, &store, Split::Test, &RankingOptions::default()).unwrap();
        assert_eq!(r.mrr, 2.0 / (n_e as f64 + 1.0));
    }

    #[test]
    fn empty_split_and_shape_errors() {
        let store = toy_store();
        let s = FnScorer {
            n_entities: 4,
            n_relations: 1,
            f: |_, _, _| 0.0,
        };
        assert!(matches!(
            evaluate_ranking(&s, &store, Split::Valid, &RankingOptions::default()),
            Err(Error::EmptySplit("valid"))
        ));
        assert!(matches!(
            evaluate_ranking(&s, &store, Split::Test, &RankingOptions::default()),
            Err(Error::ShapeMismatch { what: "entity count", .. })
        ));
    }

    #[test]
    fn pr_auc_examples() {
        assert_eq!(pr_auc(&[3.0, 2.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(pr_auc(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 0.5);
        // ranking: + - + -  → 1·0.5 + (2/3)·0.5
        let auc = pr_auc(&[4.0, 2.0], &[3.0, 1.0]).unwrap();
        assert!((auc - (0.5 + 1.0 / 3.0)).abs() < 1e-15);
        assert!(pr_auc(&[], &[1.0]).is_err());
        assert!(pr_auc(&[f64::NAN], &[1.0]).is_err());
    }

    #[test]
    fn negatives_avoid_known_facts() {
        let store = toy_store();
        let negs = generate_negatives(&store, 50, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(negs.len(), 50);
        assert!(negs.iter().all(|t| !store.contains(t)));

        let full = TripleStore::new(1, 1, vec![Triple::new(0, 0, 0)], vec![], vec![]).unwrap();
        assert!(generate_negatives(&full, 1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn bench_shape() {
        assert!(bench_scoring(&[10], 100, 0).is_err());
        let rows = bench_scoring(&[10, 64, 65], MIN_BENCH_REPS, 0).unwrap();
        assert_eq!(rows.iter().map(|r| r.dim).collect::<Vec<_>>(), vec![10, 64, 65]);
        assert!(rows.iter().all(|r| r.float_ns > 0.0 && r.bitwise_ns >= 0.0));
        let csv = bench_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("D,float_ns,bitwise_ns\n"));
        assert_eq!(default_bench_dims().len(), 100);
    }
}
