// Small grid search on Nations, selected by validation MRR.

use std::path::Path;

use bcp_kgc::sweep::{best_row, run_sweep, sweep_csv, SweepRow, SweepSpec};
use bcp_kgc::{augment_inverse, load_dataset, LoadOptions, ModelKind, TrainConfig};

pub fn run_example(epochs: usize) -> bcp_kgc::Result<Vec<SweepRow>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/nations");
    let (vocab, store) = load_dataset(&dir, LoadOptions::default())?;
    let (store, _) = augment_inverse(&store, &vocab)?;
    let base = TrainConfig {
        kind: ModelKind::BinaryCp,
        epochs,
        neg_per_pos: 5,
        validate_every: 10,
        ..Default::default()
    };
    let spec = SweepSpec {
        eta: vec![0.025, 0.05],
        delta: vec![0.3, 0.5],
        dim: vec![50],
        ..SweepSpec::single(base)
    };
    run_sweep(&store, &spec)
}

fn main() -> bcp_kgc::Result<()> {
    let rows = run_example(40)?;
    print!("{}", sweep_csv(&rows));
    if let Some(b) = best_row(&rows) {
        println!("best: eta {} delta {} (valid MRR {:.4})", b.config.eta, b.config.delta, b.valid_mrr);
    }
    Ok(())
}
