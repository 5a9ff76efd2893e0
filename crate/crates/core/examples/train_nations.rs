// Train CP and B-CP on Nations and compare filtered test MRR against a
// random scorer.
//
// cargo run --release --example train_nations -- 500

use std::path::Path;

use bcp_kgc::eval::random_mrr_baseline;
use bcp_kgc::{augment_inverse, evaluate_ranking, freeze, load_dataset, train};
use bcp_kgc::{LoadOptions, ModelKind, RankReport, RankingOptions, Split, TrainConfig};

pub struct NationsRun {
    pub kind: ModelKind,
    pub report: RankReport,
    pub first_loss: f64,
    pub last_loss: f64,
}

pub fn run_example(epochs: usize) -> bcp_kgc::Result<(f64, Vec<NationsRun>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/nations");
    let (vocab, store) = load_dataset(&dir, LoadOptions::default())?;
    let (store, _) = augment_inverse(&store, &vocab)?;
    let opts = RankingOptions::default();
    let baseline = random_mrr_baseline(&store, Split::Test, &opts)?;

    let mut runs = Vec::new();
    // (kind, eta, lambda, negatives), picked on the validation split
    for (kind, eta, lambda, neg) in [(ModelKind::Cp, 0.005, 1e-3, 10), (ModelKind::BinaryCp, 0.003, 0.0, 3)] {
        let cfg = TrainConfig {
            kind,
            dim: 100,
            eta,
            delta: 0.5,
            epochs,
            neg_per_pos: neg,
            seed: 1,
            validate_every: 20,
            ..Default::default()
        }
        .with_lambda(lambda);
        let out = train(&store, &cfg, ())?;
        let report = if kind.is_binarized() {
            evaluate_ranking(&freeze(&out.factors, cfg.delta)?, &store, Split::Test, &opts)?
        } else {
            evaluate_ranking(&out.factors, &store, Split::Test, &opts)?
        };
        runs.push(NationsRun {
            kind,
            report,
            first_loss: out.history[0].mean_loss(),
            last_loss: out.history.last().unwrap().mean_loss(),
        });
    }
    Ok((baseline, runs))
}

fn main() -> bcp_kgc::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(500);
    let (baseline, runs) = run_example(epochs)?;
    println!("random-scorer MRR {baseline:.4}");
    for r in &runs {
        println!(
            "{:<4} MRR {:.4}  Hits@1 {:.3}  Hits@10 {:.3}  loss {:.4} -> {:.4}",
            r.kind,
            r.report.mrr,
            r.report.hits_at(1).unwrap_or(0.0),
            r.report.hits_at(10).unwrap_or(0.0),
            r.first_loss,
            r.last_loss
        );
    }
    Ok(())
}
