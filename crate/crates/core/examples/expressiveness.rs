// Any boolean tensor has an exact binarized CP decomposition with
// D = 8·N_e·N_r and Δ = 1/2. Build it and check every entry.

use bcp_kgc::expressiveness::{check_lemma_structure, encode, verify_reconstruction, BoolTensor, EncoderLayout};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Summary {
    pub tensors: usize,
    pub mismatches: usize,
    pub lemma_violations: usize,
}

pub fn run_example(n_e: usize, n_r: usize, trials: usize, seed: u64) -> bcp_kgc::Result<Summary> {
    let layout = EncoderLayout::new(n_e, n_r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Summary {
        tensors: 0,
        mismatches: 0,
        lemma_violations: 0,
    };
    for _ in 0..trials {
        let x = BoolTensor::random(n_e, n_r, &mut rng);
        let f = encode(&x, 0.5)?;
        s.tensors += 1;
        s.mismatches += verify_reconstruction(&f, &x)?.mismatches.len();
        s.lemma_violations += check_lemma_structure(&f, &layout)?.violations.len();
    }
    Ok(s)
}

fn main() -> bcp_kgc::Result<()> {
    let s = run_example(3, 2, 200, 1)?;
    println!(
        "{} tensors, {} mismatches, {} lemma violations",
        s.tensors, s.mismatches, s.lemma_violations
    );
    Ok(())
}
