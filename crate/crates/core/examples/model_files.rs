// Write and read back dense and bit-packed model files.

use bcp_kgc::dense::init_factors;
use bcp_kgc::io::{binary_file_len, dense_file_len};
use bcp_kgc::{freeze, Model, ModelKind, TrainConfig};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Returns the dense and binary file sizes after a checked round trip.
pub fn run_example(dir: &std::path::Path) -> bcp_kgc::Result<(u64, u64)> {
    let cfg = TrainConfig {
        kind: ModelKind::BinaryDistMult,
        dim: 400,
        ..Default::default()
    };
    let real = init_factors(&cfg, 50, 8, &mut ChaCha8Rng::seed_from_u64(0))?;
    let dense = Model::Dense {
        kind: cfg.kind,
        factors: real.clone(),
    };
    let binary = Model::Binary(freeze(&real, cfg.delta)?);

    let (dp, bp) = (dir.join("model.bcpd"), dir.join("model.bcpb"));
    dense.save(&dp)?;
    binary.save(&bp)?;
    assert_eq!(Model::load(&dp)?, dense);
    assert_eq!(Model::load(&bp)?, binary);

    let sizes = (std::fs::metadata(&dp)?.len(), std::fs::metadata(&bp)?.len());
    assert_eq!(sizes.0 as usize, dense_file_len(50, 8, 400, true));
    assert_eq!(sizes.1 as usize, binary_file_len(50, 8, 400, true, false));
    Ok(sizes)
}

fn main() -> bcp_kgc::Result<()> {
    let dir = std::env::temp_dir();
    let (d, b) = run_example(&dir)?;
    println!("dense {d} bytes, binary {b} bytes ({:.1}x)", d as f64 / b as f64);
    Ok(())
}
