//! Every example compiled in and run with small parameters.

macro_rules! example {
    ($name:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(bench_scoring, "bench_scoring.rs");
example!(bitwise_scoring, "bitwise_scoring.rs");
example!(cluster_nations, "cluster_nations.rs");
example!(expressiveness, "expressiveness.rs");
example!(model_files, "model_files.rs");
example!(pr_auc, "pr_auc.rs");
example!(sweep, "sweep.rs");
example!(train_nations, "train_nations.rs");
example!(vq_compression, "vq_compression.rs");

#[test]
fn bench_scoring_reports_every_dimension() {
    let rows = bench_scoring::run_example(&[64, 512], 10_000).unwrap();
    assert_eq!(rows.iter().map(|r| r.dim).collect::<Vec<_>>(), vec![64, 512]);
    assert!(rows.iter().all(|r| r.float_ns > 0.0 && r.bitwise_ns > 0.0));
}

#[test]
fn bitwise_scoring_agrees() {
    for dim in [1, 64, 65, 300] {
        let (checked, differ) = bitwise_scoring::run_example(dim, 0.5).unwrap();
        assert!(checked > 0);
        assert_eq!(differ, 0);
    }
}

#[test]
fn cluster_nations_labels_every_country() {
    let groups = cluster_nations::run_example(20, 5).unwrap();
    assert_eq!(groups.len(), 14);
    let mut labels: Vec<usize> = groups.iter().map(|g| g.1).collect();
    labels.sort();
    labels.dedup();
    assert_eq!(labels, vec![0, 1, 2, 3, 4]);
}

#[test]
fn expressiveness_reconstructs_exactly() {
    let s = expressiveness::run_example(2, 2, 50, 3).unwrap();
    assert_eq!(s.tensors, 50);
    assert_eq!(s.mismatches, 0);
    assert_eq!(s.lemma_violations, 0);
}

#[test]
fn model_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (dense, binary) = model_files::run_example(dir.path()).unwrap();
    assert!(binary * 30 <= dense);
}

#[test]
fn pr_auc_is_a_probability() {
    let r = pr_auc::run_example(5, 1).unwrap();
    assert!((0.0..=1.0).contains(&r.auc));
    assert_eq!(r.n_pos, r.n_neg);
}

#[test]
fn sweep_returns_rows() {
    let rows = sweep::run_example(2).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.valid_mrr > 0.0 && r.valid_mrr <= 1.0));
}

#[test]
fn train_nations_lowers_loss() {
    let (baseline, runs) = train_nations::run_example(10).unwrap();
    assert!(baseline > 0.0 && baseline < 1.0);
    assert_eq!(runs.len(), 2);
    assert!(runs.iter().all(|r| r.last_loss < r.first_loss));
}

#[test]
fn vq_compression_shrinks_the_file() {
    let c = vq_compression::run_example(10).unwrap();
    assert!(c.vq_bytes * 30 <= c.dense_bytes);
    assert!(c.dense_mrr > 0.0 && c.vq_mrr > 0.0);
}
