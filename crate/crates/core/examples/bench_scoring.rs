// Per-score time of dense float scoring versus the bitwise kernel.
//
// cargo run --release --example bench_scoring

use bcp_kgc::eval::{bench_scoring, bench_text, BenchRow};

pub fn run_example(dims: &[usize], reps: usize) -> bcp_kgc::Result<Vec<BenchRow>> {
    bench_scoring(dims, reps, 0)
}

fn main() -> bcp_kgc::Result<()> {
    let rows = run_example(&[10, 50, 100, 200, 400, 512, 800, 1000], 100_000)?;
    print!("{}", bench_text(&rows));
    Ok(())
}
