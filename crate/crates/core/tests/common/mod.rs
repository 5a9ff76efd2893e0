//! Independent reference implementations shared by the oracle tests and
//! the acceptance harness.
#![allow(dead_code)]

use bcp_kgc::binarize::ste_grad_step;
use bcp_kgc::bits::BitVector;
use bcp_kgc::cluster::single_linkage;
use bcp_kgc::dense::{grad_step, loss, triple_product};
use bcp_kgc::eval::{filtered_rank, pr_auc, FnScorer, RankingOptions, Side};
use bcp_kgc::kg::augment_inverse;
use bcp_kgc::vq::vq_quantize;
use bcp_kgc::{DenseFactors, Matrix, ModelKind, TrainConfig, Triple, TripleStore, Vocab};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_bits(r: &mut ChaCha8Rng, len: usize) -> BitVector {
    BitVector::from_bools(&(0..len).map(|_| r.gen_bool(0.5)).collect::<Vec<_>>())
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

pub fn central_diff(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    (0..x.len())
        .map(|d| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[d] += h;
            m[d] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

fn step(old: &[f64], new: &[f64]) -> Vec<f64> {
    old.iter().zip(new).map(|(o, n)| o - n).collect()
}

/// Worst relative error between one `grad_step` (η = 1) and central
/// differences of the regularized loss, over random instances with D ≤ 16.
pub fn dense_gradient_worst(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let dim = r.gen_range(1..=16);
        let f = DenseFactors::from_parts(
            random_matrix(&mut r, 3, dim),
            Some(random_matrix(&mut r, 3, dim)),
            random_matrix(&mut r, 2, dim),
        )
        .unwrap();
        let (i, j, k) = (r.gen_range(0..3), r.gen_range(0..3), r.gen_range(0..2));
        let positive = r.gen_bool(0.5);
        let cfg = TrainConfig {
            eta: 1.0,
            lambda_a: r.gen_range(0.0..0.1),
            lambda_b: r.gen_range(0.0..0.1),
            lambda_c: r.gen_range(0.0..0.1),
            dim,
            ..Default::default()
        };
        let (a, b, c) = (f.a().row(i).to_vec(), f.b().row(j).to_vec(), f.c().row(k).to_vec());
        let energy = |a: &[f64], b: &[f64], c: &[f64]| {
            let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
            loss(positive, triple_product(a, b, c))
                + cfg.lambda_a * sq(a)
                + cfg.lambda_b * sq(b)
                + cfg.lambda_c * sq(c)
        };
        let fd_a = central_diff(&a, |v| energy(v, &b, &c));
        let fd_b = central_diff(&b, |v| energy(&a, v, &c));
        let fd_c = central_diff(&c, |v| energy(&a, &b, v));

        let mut g = f.clone();
        grad_step(&mut g, i, j, k, positive, &cfg).unwrap();
        worst = worst
            .max(rel_err(&step(&a, g.a().row(i)), &fd_a))
            .max(rel_err(&step(&b, g.b().row(j)), &fd_b))
            .max(rel_err(&step(&c, g.c().row(k)), &fd_c));
    }
    worst
}

/// Same for the straight-through step: the data term must be the gradient
/// of the loss taken at the binarized rows.
pub fn ste_gradient_worst(instances: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let dim = r.gen_range(1..=16);
        let delta = if r.gen_bool(0.5) { 0.5 } else { 0.3 };
        let f = DenseFactors::from_parts(
            random_matrix(&mut r, 2, dim),
            Some(random_matrix(&mut r, 2, dim)),
            random_matrix(&mut r, 1, dim),
        )
        .unwrap();
        let positive = r.gen_bool(0.5);
        let cfg = TrainConfig {
            eta: 1.0,
            kind: ModelKind::BinaryCp,
            delta,
            dim,
            ..Default::default()
        };
        let q = |v: &[f64]| v.iter().map(|&x| if x >= 0.0 { delta } else { -delta }).collect::<Vec<_>>();
        let (qa, qb, qc) = (q(f.a().row(0)), q(f.b().row(1)), q(f.c().row(0)));
        let fd_a = central_diff(&qa, |v| loss(positive, triple_product(v, &qb, &qc)));
        let fd_b = central_diff(&qb, |v| loss(positive, triple_product(&qa, v, &qc)));
        let fd_c = central_diff(&qc, |v| loss(positive, triple_product(&qa, &qb, v)));

        let mut g = f.clone();
        ste_grad_step(&mut g, 0, 1, 0, positive, &cfg).unwrap();
        worst = worst
            .max(rel_err(&step(f.a().row(0), g.a().row(0)), &fd_a))
            .max(rel_err(&step(f.b().row(1), g.b().row(1)), &fd_b))
            .max(rel_err(&step(f.c().row(0), g.c().row(0)), &fd_c));
    }
    worst
}

/// Count grid candidates `(S, α)` that beat the closed-form VQ solution by
/// more than 1e-12. Every sign matrix is tried with `alphas` evenly spaced
/// values in `[0, 2·max|X|]`.
pub fn vq_grid_violations(matrices: usize, rows: usize, cols: usize, alphas: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    let cells = rows * cols;
    let mut violations = 0;
    for _ in 0..matrices {
        let x = random_matrix(&mut r, rows, cols);
        let best = vq_quantize(&x).unwrap().frobenius_error(&x);
        let max_abs = x.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for signs in 0..1u32 << cells {
            for s in 0..alphas {
                let alpha = max_abs * 2.0 * s as f64 / (alphas - 1) as f64;
                let err = x
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(d, v)| {
                        let q = if signs >> d & 1 == 1 { alpha } else { -alpha };
                        (v - q) * (v - q)
                    })
                    .sum::<f64>()
                    .sqrt();
                if err + 1e-12 < best {
                    violations += 1;
                }
            }
        }
    }
    violations
}

/// Sort-based reference: the mid-rank is the mean 1-based position of the
/// tie group holding the true entity.
pub fn reference_rank(scores: &[(usize, f64)], truth: usize) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let target = scores.iter().find(|s| s.0 == truth).unwrap().1;
    let positions: Vec<f64> = sorted
        .iter()
        .enumerate()
        .filter(|(_, s)| s.1 == target)
        .map(|(p, _)| p as f64 + 1.0)
        .collect();
    positions.iter().sum::<f64>() / positions.len() as f64
}

/// Every nonempty fact set over 3 entities and one relation, one fact held
/// out as test, scores drawn from three levels. Compares subject, object
/// and inverse-route subject ranks. Returns (queries, disagreements).
pub fn filtered_rank_disagreements(seed: u64) -> (usize, usize) {
    let all: Vec<Triple> = (0..3).flat_map(|i| (0..3).map(move |j| Triple::new(i, j, 0))).collect();
    let mut r = rng(seed);
    let opts = RankingOptions::default();
    let mut vocab = Vocab::new();
    for e in ["a", "b", "c"] {
        vocab.intern_entity(e);
    }
    vocab.intern_relation("r");
    let (mut queries, mut bad) = (0, 0);
    for mask in 1u32..1 << 9 {
        let facts: Vec<Triple> = all.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, t)| *t).collect();
        for &test in &facts {
            let train: Vec<Triple> = facts.iter().copied().filter(|t| *t != test).collect();
            let store = TripleStore::new(3, 1, train, vec![], vec![test]).unwrap();
            let table: Vec<f64> = (0..9).map(|_| r.gen_range(0..3) as f64).collect();
            let inv_table: Vec<f64> = (0..9).map(|_| r.gen_range(0..3) as f64).collect();
            let scorer = FnScorer {
                n_entities: 3,
                n_relations: 1,
                f: |i: usize, j: usize, _| table[i * 3 + j],
            };
            let known = |i: usize, j: usize| facts.contains(&Triple::new(i, j, 0));

            let objects: Vec<(usize, f64)> = (0..3)
                .filter(|&l| l == test.object || !known(test.subject, l))
                .map(|l| (l, table[test.subject * 3 + l]))
                .collect();
            let subjects: Vec<(usize, f64)> = (0..3)
                .filter(|&l| l == test.subject || !known(l, test.object))
                .map(|l| (l, table[l * 3 + test.object]))
                .collect();
            let (aug, _) = augment_inverse(&store, &vocab).unwrap();
            let aug_scorer = FnScorer {
                n_entities: 3,
                n_relations: 2,
                f: |i: usize, j: usize, k: usize| if k == 0 { table[i * 3 + j] } else { inv_table[i * 3 + j] },
            };
            let via_inverse: Vec<(usize, f64)> = (0..3)
                .filter(|&l| l == test.subject || !known(l, test.object))
                .map(|l| (l, inv_table[test.object * 3 + l]))
                .collect();

            let pairs = [
                (filtered_rank(&scorer, &store, test, Side::Object, &opts).unwrap(), reference_rank(&objects, test.object)),
                (filtered_rank(&scorer, &store, test, Side::Subject, &opts).unwrap(), reference_rank(&subjects, test.subject)),
                (filtered_rank(&aug_scorer, &aug, test, Side::Object, &opts).unwrap(), reference_rank(&objects, test.object)),
                (filtered_rank(&aug_scorer, &aug, test, Side::Subject, &opts).unwrap(), reference_rank(&via_inverse, test.subject)),
            ];
            for (got, want) in pairs {
                queries += 1;
                if got != want {
                    bad += 1;
                }
            }
        }
    }
    (queries, bad)
}

/// Naive single linkage: recompute every inter-cluster distance each step.
pub fn naive_single_linkage(rows: &[BitVector], k: usize) -> (Vec<(usize, usize, u32)>, Vec<usize>) {
    let mut clusters: Vec<Vec<usize>> = (0..rows.len()).map(|i| vec![i]).collect();
    let mut merges = Vec::new();
    let mut cut = None;
    while clusters.len() > 1 {
        if clusters.len() == k {
            cut = Some(labels_of(&clusters, rows.len()));
        }
        let mut best: Option<(u32, usize, usize, usize, usize)> = None;
        for x in 0..clusters.len() {
            for y in x + 1..clusters.len() {
                let mut h = u32::MAX;
                for &p in &clusters[x] {
                    for &q in &clusters[y] {
                        h = h.min(rows[p].hamming(&rows[q]).unwrap());
                    }
                }
                let (lx, ly) = (clusters[x][0], clusters[y][0]);
                let key = (h, lx.min(ly), lx.max(ly), x, y);
                if best.is_none_or(|b| (key.0, key.1, key.2) < (b.0, b.1, b.2)) {
                    best = Some(key);
                }
            }
        }
        let (h, la, lb, x, y) = best.unwrap();
        let moved = clusters.remove(y);
        clusters[x].extend(moved);
        clusters[x].sort();
        merges.push((la, lb, h));
    }
    let labels = cut.unwrap_or_else(|| labels_of(&clusters, rows.len()));
    (merges, labels)
}

fn labels_of(clusters: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut raw = vec![0; n];
    for c in clusters {
        for &m in c {
            raw[m] = c[0];
        }
    }
    bcp_kgc::cluster::canonical_labels(&raw)
}

/// Random instances with `n ≤ 20`, `D ≤ 32`; counts instances whose merge
/// list or cut labels differ from the naive reference.
pub fn single_linkage_disagreements(instances: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    let mut bad = 0;
    for _ in 0..instances {
        let n = r.gen_range(1..=20);
        let dim = r.gen_range(1..=32);
        let rows: Vec<BitVector> = (0..n).map(|_| random_bits(&mut r, dim)).collect();
        let k = r.gen_range(1..=n);
        let (dendrogram, labels) = single_linkage(&rows, 0.5, k).unwrap();
        let (merges, expected) = naive_single_linkage(&rows, k);
        let got: Vec<_> = dendrogram.merges.iter().map(|m| (m.a, m.b, m.hamming)).collect();
        if got != merges || labels != expected {
            bad += 1;
        }
    }
    bad
}

/// Step integration by brute force: for each distinct threshold, count
/// everything scoring at or above it.
pub fn reference_pr_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut thresholds: Vec<f64> = pos.iter().chain(neg).copied().collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for t in thresholds {
        let tp = pos.iter().filter(|&&s| s >= t).count() as f64;
        let fp = neg.iter().filter(|&&s| s >= t).count() as f64;
        let recall = tp / pos.len() as f64;
        let precision = tp / (tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    area
}

/// Random score lists with many ties; counts inexact agreements.
pub fn pr_auc_disagreements(lists: usize, seed: u64) -> usize {
    let mut r = rng(seed);
    let mut bad = 0;
    for _ in 0..lists {
        let np = r.gen_range(1..40);
        let nn = r.gen_range(0..40);
        let levels = r.gen_range(2..20);
        let pos: Vec<f64> = (0..np).map(|_| r.gen_range(0..levels) as f64 * 0.25).collect();
        let neg: Vec<f64> = (0..nn).map(|_| r.gen_range(0..levels) as f64 * 0.25).collect();
        if pr_auc(&pos, &neg).unwrap() != reference_pr_auc(&pos, &neg) {
            bad += 1;
        }
    }
    bad
}
