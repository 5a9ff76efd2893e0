// Score binarized triples with XNOR and popcount and check the result
// against unpacked floating-point arithmetic.

use bcp_kgc::dense::init_factors;
use bcp_kgc::{freeze, ModelKind, TrainConfig};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Returns (triples checked, how many differed).
pub fn run_example(dim: usize, delta: f64) -> bcp_kgc::Result<(usize, usize)> {
    let cfg = TrainConfig {
        kind: ModelKind::BinaryCp,
        dim,
        ..Default::default()
    };
    let real = init_factors(&cfg, 20, 5, &mut ChaCha8Rng::seed_from_u64(1))?;
    let bits = freeze(&real, delta)?;

    let mut differ = 0;
    let mut checked = 0;
    for i in 0..20 {
        for j in 0..20 {
            for k in 0..5 {
                let fast = bits.score_bitwise(i, j, k)?;
                let slow = bits.score_binary_float(i, j, k)?;
                checked += 1;
                if fast != slow {
                    differ += 1;
                }
            }
        }
    }
    Ok((checked, differ))
}

fn main() -> bcp_kgc::Result<()> {
    for dim in [10, 64, 65, 400] {
        let (n, bad) = run_example(dim, 0.5)?;
        println!("D={dim:<4} {n} triples, {bad} differ");
    }
    Ok(())
}
