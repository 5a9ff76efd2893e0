// Triple classification: PR-AUC of test facts against as many random
// non-facts.

use std::path::Path;

use bcp_kgc::eval::PrAucReport;
use bcp_kgc::{augment_inverse, evaluate_pr_auc, freeze, load_dataset, train};
use bcp_kgc::{LoadOptions, ModelKind, Split, TrainConfig};

pub fn run_example(epochs: usize, seed: u64) -> bcp_kgc::Result<PrAucReport> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/nations");
    let (vocab, store) = load_dataset(&dir, LoadOptions::default())?;
    let (store, _) = augment_inverse(&store, &vocab)?;
    let cfg = TrainConfig {
        kind: ModelKind::BinaryCp,
        dim: 100,
        epochs,
        neg_per_pos: 5,
        validate_every: 0,
        ..Default::default()
    };
    let model = freeze(&train(&store, &cfg, ())?.factors, cfg.delta)?;
    evaluate_pr_auc(&model, &store, Split::Test, seed)
}

fn main() -> bcp_kgc::Result<()> {
    print!("{}", run_example(100, 0)?.to_text());
    Ok(())
}
