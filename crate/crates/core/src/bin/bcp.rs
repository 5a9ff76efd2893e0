use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bcp_kgc::binarize::{freeze, Scale};
use bcp_kgc::cluster::single_linkage;
use bcp_kgc::dense::{train_from, init_factors, ModelKind, TrainConfig};
use bcp_kgc::eval::{bench_csv, bench_scoring, bench_text, evaluate_pr_auc, evaluate_ranking, RankingOptions};
use bcp_kgc::expressiveness::{check_lemma_structure, encode, verify_reconstruction, BoolTensor, EncoderLayout, DEFAULT_BLOCK_LIMIT};
use bcp_kgc::io::{save_binary, save_dense, Model};
use bcp_kgc::kg::{augment_inverse, load_dataset, DuplicatePolicy, LoadOptions, Split, UnknownPolicy};
use bcp_kgc::sweep::{apply_train_key, best_row, load_config, run_sweep, sweep_csv, SweepSpec};
use bcp_kgc::vq::vq_quantize;
use bcp_kgc::{Error, Scorer, TripleStore, Vocab};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Outcome of a subcommand that ran to completion.
enum Outcome {
    Ok,
    /// Verification or evaluation reported a failure.
    Failed,
}

type CmdResult = Result<Outcome, Error>;

#[derive(Parser)]
#[command(name = "bcp", version, about = "Binarized CP knowledge graph embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it to a file.
    Train(TrainArgs),
    /// Filtered ranking metrics (and optionally PR-AUC) for a model.
    Eval(EvalArgs),
    /// Time dense float scoring against the bitwise kernel.
    Bench(BenchArgs),
    /// Encode boolean tensors exactly and check the reconstruction.
    EncodeVerify(EncodeArgs),
    /// Single-linkage clustering of the entity embeddings.
    Cluster(ClusterArgs),
    /// Vector-quantize (or freeze) a dense model into a bit-packed one.
    Quantize(QuantizeArgs),
    /// Grid search over training hyperparameters.
    Sweep(SweepArgs),
}

#[derive(Args, Default)]
struct HyperArgs {
    /// key = value file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kind: Option<ModelKind>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Sets λ_A = λ_B = λ_C.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda_a: Option<f64>,
    #[arg(long)]
    lambda_b: Option<f64>,
    #[arg(long)]
    lambda_c: Option<f64>,
    /// Negatives per positive.
    #[arg(long)]
    neg: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// 0 disables validation.
    #[arg(long)]
    validate_every: Option<usize>,
}

#[derive(Args)]
struct DataArgs {
    /// Directory with train.txt and optional valid.txt / test.txt.
    #[arg(long)]
    data: PathBuf,
    /// Fail on valid/test labels missing from train instead of skipping.
    #[arg(long)]
    strict: bool,
    /// Drop duplicate lines instead of rejecting the file.
    #[arg(long)]
    dedup: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Do not add inverse triples to the training split.
    #[arg(long)]
    no_inverse: bool,
    /// Output model file. Binarized kinds also write `<out>.latent`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from a latent checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Epochs already completed by the resumed checkpoint.
    #[arg(long, default_value_t = 0, requires = "resume")]
    start_epoch: usize,
    #[arg(long)]
    csv: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Valid,
    Test,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
    hits: Vec<usize>,
    /// Also report PR-AUC against generated negatives.
    #[arg(long)]
    pr_auc: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Score subject queries as (ℓ, j, k) even when inverse relations exist.
    #[arg(long)]
    direct_subjects: bool,
    /// Rank against all entities, known facts included.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 10)]
    dmin: usize,
    #[arg(long, default_value_t = 1000)]
    dmax: usize,
    #[arg(long, default_value_t = 10)]
    step: usize,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    ne: usize,
    #[arg(long)]
    nr: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Enumerate every boolean tensor of the given shape.
    #[arg(long)]
    exhaustive: bool,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    /// Largest N_e·N_r accepted.
    #[arg(long, default_value_t = DEFAULT_BLOCK_LIMIT)]
    block_limit: usize,
    /// Also check the block-structure identities of every encoding.
    #[arg(long)]
    lemmas: bool,
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Dataset for entity labels; indices are printed without it.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Write the merge list as CSV.
    #[arg(long)]
    dendrogram: Option<PathBuf>,
    /// Quantization scale for dense models.
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct QuantizeArgs {
    /// Dense `BCPD` model.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Freeze with a fixed Δ instead of per-matrix mean magnitudes.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    csv: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Dense,
    Binary,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Grid file: comma-separated values sweep an axis.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in search ranges, used when no config is given.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    kind: Option<ModelKind>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    neg: Option<usize>,
    #[arg(long)]
    no_inverse: bool,
    /// Write all rows here as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = std::env::var("BCP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("BCP_THREADS ignored: {e}");
        }
    }
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
        Command::EncodeVerify(a) => cmd_encode_verify(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Quantize(a) => cmd_quantize(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ShapeMismatch { .. } | Error::Diverged { .. } | Error::NotANumber(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn load_options(d: &DataArgs) -> LoadOptions {
    LoadOptions {
        unknown: if d.strict { UnknownPolicy::Error } else { UnknownPolicy::Skip },
        duplicates: if d.dedup { DuplicatePolicy::Dedup } else { DuplicatePolicy::Reject },
    }
}

fn load_store(d: &DataArgs, inverse: bool) -> Result<(Vocab, TripleStore), Error> {
    let (vocab, store) = load_dataset(&d.data, load_options(d))?;
    if inverse {
        let (store, vocab) = augment_inverse(&store, &vocab)?;
        Ok((vocab, store))
    } else {
        Ok((vocab, store))
    }
}

fn train_config(h: &HyperArgs) -> Result<TrainConfig, Error> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = &h.config {
        for (key, value) in load_config(path)? {
            if !apply_train_key(&mut cfg, &key, &value)? && !matches!(key.as_str(), "data" | "out") {
                return Err(Error::InvalidConfig(format!("unknown config key `{key}`")));
            }
        }
    }
    if let Some(l) = h.lambda {
        cfg = cfg.with_lambda(l);
    }
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {$(
            if let Some(v) = h.$flag { cfg.$field = v; }
        )*};
    }
    set!(kind => kind, dim => dim, eta => eta, delta => delta, lambda_a => lambda_a,
         lambda_b => lambda_b, lambda_c => lambda_c, neg => neg_per_pos, epochs => epochs,
         seed => seed, validate_every => validate_every);
    cfg.validate()?;
    Ok(cfg)
}

fn latent_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".latent");
    PathBuf::from(s)
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let cfg = train_config(&a.hyper)?;
    let (_, store) = load_store(&a.data, !a.no_inverse)?;
    eprintln!(
        "{} entities, {} relations, {} train / {} valid / {} test",
        store.n_entities(),
        store.n_relations(),
        store.train().len(),
        store.valid().len(),
        store.test().len()
    );
    let factors = match &a.resume {
        Some(path) => match Model::load(path)? {
            Model::Dense { factors, .. } => factors,
            Model::Binary(_) => {
                return Err(Error::InvalidConfig("resume needs a dense latent checkpoint".into()))
            }
        },
        None => init_factors(
            &cfg,
            store.n_entities(),
            store.n_relations(),
            &mut ChaCha8Rng::seed_from_u64(cfg.seed),
        )?,
    };

    if a.csv {
        println!("epoch,mean_loss,valid_mrr");
    }
    let csv = a.csv;
    let outcome = train_from(factors, a.start_epoch, &store, &cfg, |s: &bcp_kgc::dense::EpochStats| {
        let mrr = s.valid_mrr.map_or(String::new(), |m| m.to_string());
        if csv {
            println!("{},{},{}", s.epoch, s.mean_loss(), mrr);
        } else if let Some(m) = s.valid_mrr {
            println!("epoch {:>5}  loss {:.6}  valid MRR {:.4}", s.epoch, s.mean_loss(), m);
        } else {
            println!("epoch {:>5}  loss {:.6}", s.epoch, s.mean_loss());
        }
    })?;
    if let Some(m) = outcome.best_valid_mrr {
        eprintln!("selected epoch {} (valid MRR {m:.4})", outcome.best_epoch);
    }

    if let Some(out) = &a.out {
        if cfg.kind.is_binarized() {
            save_binary(out, &freeze(&outcome.factors, cfg.delta)?)?;
            save_dense(&latent_path(out), &outcome.factors, cfg.kind)?;
        } else {
            save_dense(out, &outcome.factors, cfg.kind)?;
        }
        eprintln!("wrote {}", out.display());
    }
    Ok(Outcome::Ok)
}

/// Load the dataset, adding inverse relations when the model was trained
/// with them.
fn store_for_model(d: &DataArgs, model: &Model) -> Result<(Vocab, TripleStore), Error> {
    let (vocab, store) = load_store(d, false)?;
    if model.n_relations() == 2 * store.n_relations() && model.n_relations() != store.n_relations() {
        let (store, vocab) = augment_inverse(&store, &vocab)?;
        return Ok((vocab, store));
    }
    Ok((vocab, store))
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let model = Model::load(&a.model)?;
    let (_, store) = store_for_model(&a.data, &model)?;
    let split = match a.split {
        SplitArg::Valid => Split::Valid,
        SplitArg::Test => Split::Test,
    };
    let opts = RankingOptions {
        filtered: !a.raw,
        subject_via_inverse: !a.direct_subjects,
        hits_at: a.hits.clone(),
    };
    let report = evaluate_ranking(&model, &store, split, &opts)?;
    let pr = if a.pr_auc {
        Some(evaluate_pr_auc(&model, &store, split, a.seed)?)
    } else {
        None
    };
    if a.csv {
        print!("{}", report.to_csv());
        if let Some(p) = &pr {
            // skip the header line
            print!("{}", p.to_csv().split_once('\n').map_or("", |x| x.1));
        }
    } else {
        println!("{}", model.describe());
        print!("{}", report.to_text());
        if let Some(p) = &pr {
            print!("{}", p.to_text());
        }
    }
    Ok(Outcome::Ok)
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    if a.step == 0 || a.dmin == 0 || a.dmin > a.dmax {
        return Err(Error::InvalidConfig("need 0 < dmin <= dmax and step > 0".into()));
    }
    let dims: Vec<usize> = (a.dmin..=a.dmax).step_by(a.step).collect();
    let rows = bench_scoring(&dims, a.reps, a.seed)?;
    print!("{}", if a.csv { bench_csv(&rows) } else { bench_text(&rows) });
    Ok(Outcome::Ok)
}

fn cmd_encode_verify(a: EncodeArgs) -> CmdResult {
    if a.ne * a.nr > a.block_limit {
        return Err(Error::InvalidConfig(format!(
            "N_e·N_r = {} exceeds the block limit {}",
            a.ne * a.nr,
            a.block_limit
        )));
    }
    let layout = EncoderLayout::new(a.ne, a.nr)?;
    let cells = a.ne * a.ne * a.nr;
    let tensors: Box<dyn Iterator<Item = BoolTensor>> = if a.exhaustive {
        if cells > 20 {
            return Err(Error::InvalidConfig(format!(
                "exhaustive enumeration of 2^{cells} tensors is too large"
            )));
        }
        let (ne, nr) = (a.ne, a.nr);
        Box::new((0u64..1 << cells).map(move |bits| {
            BoolTensor::from_fn(ne, nr, |i, j, k| bits >> ((i * ne + j) * nr + k) & 1 == 1)
        }))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let (ne, nr) = (a.ne, a.nr);
        Box::new((0..a.trials).map(move |_| BoolTensor::random(ne, nr, &mut rng)))
    };

    let (mut count, mut mismatches, mut lemma_violations, mut checked) = (0usize, 0usize, 0usize, 0usize);
    for x in tensors {
        let f = encode(&x, a.delta)?;
        let report = verify_reconstruction(&f, &x)?;
        count += 1;
        checked += report.checked;
        mismatches += report.mismatches.len();
        for m in report.mismatches.iter().take(3) {
            log::warn!("tensor {count}: {m:?}");
        }
        if a.lemmas {
            lemma_violations += check_lemma_structure(&f, &layout)?.violations.len();
        }
    }
    if a.csv {
        println!("n_e,n_r,dim,tensors,entries,mismatches,lemma_violations");
        println!("{},{},{},{count},{checked},{mismatches},{lemma_violations}", a.ne, a.nr, layout.dim());
    } else {
        println!("N_e={} N_r={} D={} delta={}", a.ne, a.nr, layout.dim(), a.delta);
        println!("{count} tensors, {checked} entries");
        println!("{mismatches} mismatches");
        if a.lemmas {
            println!("{lemma_violations} lemma violations");
        }
    }
    Ok(if mismatches == 0 && lemma_violations == 0 { Outcome::Ok } else { Outcome::Failed })
}

fn cmd_cluster(a: ClusterArgs) -> CmdResult {
    let model = Model::load(&a.model)?;
    let (bits, delta) = match &model {
        Model::Binary(f) => {
            let delta = match f.scale() {
                Scale::Uniform(d) => d,
                Scale::PerMatrix([alpha, _, _]) => alpha,
            };
            (f.a().clone(), delta)
        }
        Model::Dense { factors, .. } => (freeze(factors, a.delta)?.a().clone(), a.delta),
    };
    let rows: Vec<_> = (0..bits.rows()).map(|i| bits.row_vector(i)).collect();
    // a vanished scale only shrinks heights; merge order is unaffected
    let (dendrogram, labels) = single_linkage(&rows, if delta > 0.0 { delta } else { 1.0 }, a.k)?;
    let vocab = match &a.data {
        Some(dir) => Some(load_dataset(dir, LoadOptions::default())?.0),
        None => None,
    };
    let name = |i: usize| {
        vocab
            .as_ref()
            .and_then(|v| v.entity(i))
            .map_or_else(|| i.to_string(), str::to_owned)
    };
    if a.csv {
        println!("entity,cluster");
        for (i, l) in labels.iter().enumerate() {
            println!("{},{l}", name(i));
        }
    } else {
        for (i, l) in labels.iter().enumerate() {
            println!("{}\t{l}", name(i));
        }
    }
    if let Some(path) = &a.dendrogram {
        std::fs::write(path, dendrogram.to_csv())?;
    }
    Ok(Outcome::Ok)
}

fn cmd_quantize(a: QuantizeArgs) -> CmdResult {
    let (kind, dense) = match Model::load(&a.model)? {
        Model::Dense { kind, factors } => (kind, factors),
        Model::Binary(_) => return Err(Error::InvalidConfig("model is already binary".into())),
    };
    let binary = match a.delta {
        Some(d) => freeze(&dense, d)?,
        None => bcp_kgc::vq::vq_apply(&dense)?,
    };
    save_binary(&a.out, &binary)?;
    let mut rows = vec![("A", vq_quantize(dense.a())?.frobenius_error(dense.a()))];
    if !dense.is_tied() {
        rows.push(("B", vq_quantize(dense.b())?.frobenius_error(dense.b())));
    }
    rows.push(("C", vq_quantize(dense.c())?.frobenius_error(dense.c())));
    let dense_bytes = std::fs::metadata(&a.model)?.len();
    let binary_bytes = std::fs::metadata(&a.out)?.len();
    if a.csv {
        println!("matrix,vq_frobenius_error");
        for (m, e) in &rows {
            println!("{m},{e}");
        }
    } else {
        println!("{kind} -> {}", Model::Binary(binary).describe());
        for (m, e) in &rows {
            println!("{m}: VQ Frobenius error {e:.6}");
        }
        println!(
            "{dense_bytes} -> {binary_bytes} bytes ({:.1}x smaller)",
            dense_bytes as f64 / binary_bytes as f64
        );
    }
    Ok(Outcome::Ok)
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    let mut spec = match (&a.config, a.preset) {
        (Some(path), _) => SweepSpec::from_config(&load_config(path)?)?,
        (None, Some(Preset::Dense)) => SweepSpec::dense_grid(TrainConfig::default()),
        (None, Some(Preset::Binary)) => SweepSpec::binary_grid(TrainConfig {
            kind: ModelKind::BinaryCp,
            ..Default::default()
        }),
        (None, None) => return Err(Error::InvalidConfig("sweep needs --config or --preset".into())),
    };
    if let Some(k) = a.kind {
        spec.base.kind = k;
    }
    if let Some(e) = a.epochs {
        spec.base.epochs = e;
    }
    if let Some(s) = a.seed {
        spec.base.seed = s;
    }
    if let Some(n) = a.neg {
        spec.base.neg_per_pos = n;
    }
    let (_, store) = load_store(&a.data, !a.no_inverse)?;
    eprintln!("sweeping {} grid points", spec.len());
    let rows = run_sweep(&store, &spec)?;
    let csv = sweep_csv(&rows);
    if let Some(out) = &a.out {
        std::fs::write(out, &csv)?;
    }
    if a.csv {
        print!("{csv}");
    } else if let Some(best) = best_row(&rows) {
        let c = &best.config;
        println!(
            "best: kind={} dim={} eta={} delta={} lambda=({}, {}, {}) epoch={} valid MRR {:.4}",
            c.kind, c.dim, c.eta, c.delta, c.lambda_a, c.lambda_b, c.lambda_c, best.best_epoch, best.valid_mrr
        );
    }
    Ok(Outcome::Ok)
}
