use bcp_kgc::bits::{xnor_hamming, BitMatrix, BitVector};
use bcp_kgc::cluster::{binary_euclidean, canonical_labels, single_linkage};
use bcp_kgc::dense::triple_product;
use bcp_kgc::eval::pr_auc;
use bcp_kgc::io::{binary_from_bytes, binary_to_bytes, dense_from_bytes, dense_to_bytes};
use bcp_kgc::kg::{read_triples, write_triples, LoadOptions};
use bcp_kgc::{augment_inverse, quantize, BinaryFactors, DenseFactors, Matrix, ModelKind, Triple, TripleStore, Vocab};
use proptest::prelude::*;

fn bits(len: usize) -> impl Strategy<Value = BitVector> {
    prop::collection::vec(any::<bool>(), len).prop_map(|b| BitVector::from_bools(&b))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |d| Matrix::from_vec(rows, cols, d).unwrap())
}

proptest! {
    #[test]
    fn quantize_is_idempotent(x in -1e6f64..1e6, delta in 1e-3f64..10.0) {
        let q = quantize(x, delta).unwrap();
        prop_assert_eq!(quantize(q, delta).unwrap(), q);
        prop_assert_eq!(q.abs(), delta);
    }

    #[test]
    fn xnor_hamming_counts_negative_sign_products(
        (a, b, c) in (1usize..200).prop_flat_map(|d| (bits(d), bits(d), bits(d)))
    ) {
        let naive = (0..a.len()).filter(|&d| a.get(d) ^ b.get(d) ^ c.get(d) ^ true).count() as u32;
        // sign product is negative when an odd number of the three are clear
        let naive_sign = (0..a.len())
            .filter(|&d| [a.get(d), b.get(d), c.get(d)].iter().filter(|&&s| !s).count() % 2 == 1)
            .count() as u32;
        let got = xnor_hamming(a.words(), b.words(), c.words(), a.len());
        prop_assert_eq!(got, naive_sign);
        prop_assert_eq!(got, naive);
    }

    #[test]
    fn padding_garbage_never_changes_the_count(
        (a, b, c) in (1usize..200).prop_flat_map(|d| (bits(d), bits(d), bits(d))),
        junk in any::<u64>(),
    ) {
        let len = a.len();
        let mask = bcp_kgc::bits::tail_mask(len);
        let dirty = |v: &BitVector| {
            let mut w = v.words().to_vec();
            *w.last_mut().unwrap() |= junk & !mask;
            w
        };
        prop_assert_eq!(
            xnor_hamming(&dirty(&a), &dirty(&b), &dirty(&c), len),
            xnor_hamming(a.words(), b.words(), c.words(), len)
        );
    }

    #[test]
    fn bitwise_score_scales_with_delta_cubed(
        (a, b, c) in (1usize..300).prop_flat_map(|d| (bits(d), bits(d), bits(d))),
        e in -4i32..4,
    ) {
        let delta = 2f64.powi(e);
        let m = |v: &BitVector| BitMatrix::from_rows(std::slice::from_ref(v)).unwrap();
        let unit = BinaryFactors::new(m(&a), Some(m(&b)), m(&c), 1.0).unwrap();
        let scaled = BinaryFactors::new(m(&a), Some(m(&b)), m(&c), delta).unwrap();
        prop_assert_eq!(scaled.score_bitwise(0, 0, 0).unwrap(), delta.powi(3) * unit.score_bitwise(0, 0, 0).unwrap());
        prop_assert_eq!(scaled.score_bitwise(0, 0, 0).unwrap(), scaled.score_binary_float(0, 0, 0).unwrap());
    }

    #[test]
    fn distmult_is_symmetric(a in matrix(5, 6), c in matrix(3, 6)) {
        let f = DenseFactors::from_parts(a, None, c).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..3 {
                    prop_assert_eq!(f.score(i, j, k).unwrap(), f.score(j, i, k).unwrap());
                }
            }
        }
    }

    #[test]
    fn triple_product_is_symmetric_in_arguments(
        v in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 1..50)
    ) {
        let a: Vec<f64> = v.iter().map(|t| t.0).collect();
        let b: Vec<f64> = v.iter().map(|t| t.1).collect();
        let c: Vec<f64> = v.iter().map(|t| t.2).collect();
        prop_assert_eq!(triple_product(&a, &b, &c), triple_product(&b, &a, &c));
    }

    #[test]
    fn binary_distance_is_a_metric(
        (p, q, r) in (1usize..128).prop_flat_map(|d| (bits(d), bits(d), bits(d))),
        delta in 0.01f64..3.0,
    ) {
        let d = |x: &BitVector, y: &BitVector| binary_euclidean(x, y, delta).unwrap();
        prop_assert_eq!(d(&p, &p), 0.0);
        prop_assert_eq!(d(&p, &q), d(&q, &p));
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-12);
        if p != q {
            prop_assert!(d(&p, &q) > 0.0);
        }
    }

    #[test]
    fn dendrogram_is_monotone_and_complete(
        rows in (1usize..24).prop_flat_map(|d| prop::collection::vec(bits(d), 1..25))
    ) {
        let (dendro, labels) = single_linkage(&rows, 0.5, 1).unwrap();
        prop_assert_eq!(dendro.merges.len(), rows.len() - 1);
        prop_assert!(dendro.merges.windows(2).all(|w| w[0].height <= w[1].height));
        prop_assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn cluster_partition_survives_row_reordering(
        rows in (8usize..40).prop_flat_map(|d| prop::collection::vec(bits(d), 2..16)),
        k_seed in any::<usize>(),
        perm_seed in any::<u64>(),
    ) {
        let n = rows.len();
        let k = 1 + k_seed % n;
        let (dendro, labels) = single_linkage(&rows, 1.0, k).unwrap();
        // the cut is only well defined when it does not split a tied level
        let steps = n - k;
        prop_assume!(steps == 0 || steps == n - 1
            || dendro.merges[steps - 1].hamming < dendro.merges[steps].hamming);

        let mut order: Vec<usize> = (0..n).collect();
        let mut s = perm_seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let permuted: Vec<BitVector> = order.iter().map(|&i| rows[i].clone()).collect();
        let (_, plabels) = single_linkage(&permuted, 1.0, k).unwrap();
        let mut back = vec![0; n];
        for (pos, &orig) in order.iter().enumerate() {
            back[orig] = plabels[pos];
        }
        prop_assert_eq!(canonical_labels(&back), labels);
    }

    #[test]
    fn pr_auc_is_bounded(
        pos in prop::collection::vec(-5.0f64..5.0, 1..50),
        neg in prop::collection::vec(-5.0f64..5.0, 0..50),
    ) {
        let auc = pr_auc(&pos, &neg).unwrap();
        prop_assert!((0.0..=1.0).contains(&auc));
        let shifted: Vec<f64> = neg.iter().map(|s| s - 20.0).collect();
        prop_assert_eq!(pr_auc(&pos, &shifted).unwrap(), 1.0);
    }

    #[test]
    fn dense_model_file_round_trips(a in matrix(3, 5), b in matrix(3, 5), c in matrix(2, 5), tied in any::<bool>()) {
        let f = DenseFactors::from_parts(a, (!tied).then_some(b), c).unwrap();
        let kind = if tied { ModelKind::DistMult } else { ModelKind::Cp };
        let bytes = dense_to_bytes(&f, kind).unwrap();
        let (k, g) = dense_from_bytes(&bytes).unwrap();
        prop_assert_eq!(k, kind);
        prop_assert_eq!(dense_to_bytes(&g, k).unwrap(), bytes);
    }

    #[test]
    fn binary_model_file_round_trips(
        (a, c) in (1usize..150).prop_flat_map(|d| (prop::collection::vec(bits(d), 1..5), prop::collection::vec(bits(d), 1..4))),
        delta in 0.01f64..4.0,
    ) {
        let f = BinaryFactors::new(BitMatrix::from_rows(&a).unwrap(), None, BitMatrix::from_rows(&c).unwrap(), delta).unwrap();
        let bytes = binary_to_bytes(&f);
        prop_assert_eq!(binary_from_bytes(&bytes).unwrap(), f);
    }

    #[test]
    fn store_round_trips_and_augments_exactly(
        facts in prop::collection::btree_set((0usize..6, 0usize..6, 0usize..3), 1..40)
    ) {
        let mut vocab = Vocab::new();
        for e in 0..6 { vocab.intern_entity(&format!("e{e}")); }
        for r in 0..3 { vocab.intern_relation(&format!("r{r}")); }
        let triples: Vec<Triple> = facts.iter().map(|&(s, o, r)| Triple::new(s, o, r)).collect();

        let mut buf = Vec::new();
        write_triples(&mut buf, &triples, &vocab).unwrap();
        let mut v2 = vocab.clone();
        let back = read_triples(&buf[..], std::path::Path::new("mem"), &mut v2, true, LoadOptions::default()).unwrap();
        prop_assert_eq!(&back, &triples);

        let (train, test) = triples.split_at(triples.len() / 2);
        let store = TripleStore::new(6, 3, train.to_vec(), vec![], test.to_vec()).unwrap();
        let (aug, aug_vocab) = augment_inverse(&store, &vocab).unwrap();
        prop_assert_eq!(aug.train().len(), 2 * store.train().len());
        prop_assert_eq!(aug.n_relations(), 6);
        prop_assert_eq!(aug.test(), store.test());
        prop_assert_eq!(aug_vocab.n_relations(), 6);
        for s in 0..6 {
            for o in 0..6 {
                for r in 0..6 {
                    let scan = aug.train().iter().chain(aug.valid()).chain(aug.test())
                        .any(|t| *t == Triple::new(s, o, r));
                    prop_assert_eq!(aug.is_known_fact(s, o, r).unwrap(), scan);
                }
            }
        }
    }
}
