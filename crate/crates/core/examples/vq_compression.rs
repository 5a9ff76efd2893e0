// Compress a trained CP model by vector quantization and compare ranking
// quality and file size.

use std::path::Path;

use bcp_kgc::io::{binary_to_bytes, dense_to_bytes};
use bcp_kgc::vq::vq_apply;
use bcp_kgc::{augment_inverse, evaluate_ranking, load_dataset, train};
use bcp_kgc::{LoadOptions, ModelKind, RankingOptions, Split, TrainConfig};

pub struct Compression {
    pub dense_mrr: f64,
    pub vq_mrr: f64,
    pub dense_bytes: usize,
    pub vq_bytes: usize,
}

pub fn run_example(epochs: usize) -> bcp_kgc::Result<Compression> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/nations");
    let (vocab, store) = load_dataset(&dir, LoadOptions::default())?;
    let (store, _) = augment_inverse(&store, &vocab)?;
    let cfg = TrainConfig {
        dim: 100,
        epochs,
        neg_per_pos: 5,
        validate_every: 0,
        ..Default::default()
    };
    let dense = train(&store, &cfg, ())?.factors;
    let vq = vq_apply(&dense)?;
    let opts = RankingOptions::default();
    Ok(Compression {
        dense_mrr: evaluate_ranking(&dense, &store, Split::Test, &opts)?.mrr,
        vq_mrr: evaluate_ranking(&vq, &store, Split::Test, &opts)?.mrr,
        dense_bytes: dense_to_bytes(&dense, ModelKind::Cp)?.len(),
        vq_bytes: binary_to_bytes(&vq).len(),
    })
}

fn main() -> bcp_kgc::Result<()> {
    let c = run_example(100)?;
    println!("CP    MRR {:.4}  {} bytes", c.dense_mrr, c.dense_bytes);
    println!("VQ-CP MRR {:.4}  {} bytes", c.vq_mrr, c.vq_bytes);
    Ok(())
}
