// Group Nations countries by single-linkage clustering of their binary
// subject embeddings.

use std::path::Path;

use bcp_kgc::cluster::single_linkage;
use bcp_kgc::{augment_inverse, freeze, load_dataset, train};
use bcp_kgc::{LoadOptions, ModelKind, TrainConfig};

/// `(country, cluster)` pairs.
pub fn run_example(epochs: usize, k: usize) -> bcp_kgc::Result<Vec<(String, usize)>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/nations");
    let (vocab, store) = load_dataset(&dir, LoadOptions::default())?;
    let (store, _) = augment_inverse(&store, &vocab)?;
    let cfg = TrainConfig {
        kind: ModelKind::BinaryCp,
        dim: 200,
        epochs,
        neg_per_pos: 5,
        validate_every: 0,
        seed: 3,
        ..Default::default()
    };
    let bits = freeze(&train(&store, &cfg, ())?.factors, cfg.delta)?;
    let rows: Vec<_> = (0..bits.n_entities()).map(|i| bits.a().row_vector(i)).collect();
    let (_, labels) = single_linkage(&rows, cfg.delta, k)?;
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| (vocab.entity(i).unwrap_or("?").to_string(), l))
        .collect())
}

fn main() -> bcp_kgc::Result<()> {
    let groups = run_example(200, 5)?;
    for c in 0..5 {
        let members: Vec<_> = groups.iter().filter(|g| g.1 == c).map(|g| g.0.as_str()).collect();
        println!("{c}: {}", members.join(", "));
    }
    Ok(())
}
