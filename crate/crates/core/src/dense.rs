//! Real-valued CP and DistMult models trained by logistic-loss SGD.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::binarize::{freeze, quantize_unchecked};
use crate::error::{Error, Result};
use crate::eval::{evaluate_ranking, RankingOptions};
use crate::kg::{Split, Triple, TripleStore};

/// Resampling budget when a negative collides with a training fact.
pub const NEGATIVE_RETRIES: usize = 100;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                what: "matrix element count",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::ShapeMismatch {
                    what: "row length",
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

/// Which model family is trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Cp,
    DistMult,
    BinaryCp,
    BinaryDistMult,
}

impl ModelKind {
    pub fn is_binarized(self) -> bool {
        matches!(self, ModelKind::BinaryCp | ModelKind::BinaryDistMult)
    }

    /// Subject and object embeddings share storage.
    pub fn is_tied(self) -> bool {
        matches!(self, ModelKind::DistMult | ModelKind::BinaryDistMult)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cp => "cp",
            ModelKind::DistMult => "distmult",
            ModelKind::BinaryCp => "bcp",
            ModelKind::BinaryDistMult => "bdistmult",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "cp" => Ok(ModelKind::Cp),
            "distmult" => Ok(ModelKind::DistMult),
            "bcp" => Ok(ModelKind::BinaryCp),
            "bdistmult" => Ok(ModelKind::BinaryDistMult),
            _ => Err(Error::InvalidConfig(format!(
                "unknown model kind `{s}` (expected cp, distmult, bcp or bdistmult)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub eta: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_c: f64,
    pub dim: usize,
    /// Quantization scale; only read for binarized kinds.
    pub delta: f64,
    pub epochs: usize,
    pub neg_per_pos: usize,
    pub kind: ModelKind,
    pub seed: u64,
    /// Evaluate validation MRR every this many epochs; 0 disables.
    pub validate_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 0.05,
            lambda_a: 0.0,
            lambda_b: 0.0,
            lambda_c: 0.0,
            dim: 200,
            delta: 0.5,
            epochs: 1000,
            neg_per_pos: 1,
            kind: ModelKind::Cp,
            seed: 0,
            validate_every: 20,
        }
    }
}

impl TrainConfig {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda_a = lambda;
        self.lambda_b = lambda;
        self.lambda_c = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        for (name, v) in [
            ("lambda_a", self.lambda_a),
            ("lambda_b", self.lambda_b),
            ("lambda_c", self.lambda_c),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.neg_per_pos == 0 {
            return bad("neg_per_pos must be at least 1".into());
        }
        if self.kind.is_binarized() && !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        Ok(())
    }
}

/// Real factor matrices. With a tied kind the object view is the subject
/// matrix itself.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFactors {
    a: Matrix,
    b: Option<Matrix>,
    c: Matrix,
}

impl DenseFactors {
    /// `b = None` ties the object embeddings to `a` (DistMult).
    pub fn from_parts(a: Matrix, b: Option<Matrix>, c: Matrix) -> Result<Self> {
        if c.cols() != a.cols() {
            return Err(Error::ShapeMismatch {
                what: "relation embedding dimension",
                expected: a.cols(),
                found: c.cols(),
            });
        }
        if let Some(b) = &b {
            if b.cols() != a.cols() || b.rows() != a.rows() {
                return Err(Error::ShapeMismatch {
                    what: "object embedding rows",
                    expected: a.rows(),
                    found: b.rows(),
                });
            }
        }
        Ok(Self { a, b, c })
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn n_entities(&self) -> usize {
        self.a.rows()
    }

    pub fn n_relations(&self) -> usize {
        self.c.rows()
    }

    pub fn is_tied(&self) -> bool {
        self.b.is_none()
    }

    pub fn kind(&self) -> ModelKind {
        if self.is_tied() {
            ModelKind::DistMult
        } else {
            ModelKind::Cp
        }
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        self.b.as_ref().unwrap_or(&self.a)
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn a_mut(&mut self) -> &mut Matrix {
        &mut self.a
    }

    pub fn b_mut(&mut self) -> &mut Matrix {
        self.b.as_mut().unwrap_or(&mut self.a)
    }

    pub fn c_mut(&mut self) -> &mut Matrix {
        &mut self.c
    }

    pub fn check_triple(&self, i: usize, j: usize, k: usize) -> Result<()> {
        for (what, index, bound) in [
            ("subject", i, self.n_entities()),
            ("object", j, self.n_entities()),
            ("relation", k, self.n_relations()),
        ] {
            if index >= bound {
                return Err(Error::IndexOutOfBounds { what, index, bound });
            }
        }
        Ok(())
    }

    /// `Σ_d a_id b_jd c_kd`.
    pub fn score(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        self.check_triple(i, j, k)?;
        Ok(self.score_unchecked(i, j, k))
    }

    #[inline]
    pub fn score_unchecked(&self, i: usize, j: usize, k: usize) -> f64 {
        triple_product(self.a.row(i), self.b().row(j), self.c.row(k))
    }

    pub fn is_finite(&self) -> bool {
        self.a.data().iter().all(|v| v.is_finite())
            && self.b().data().iter().all(|v| v.is_finite())
            && self.c.data().iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn triple_product(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(c)
        .map(|((x, y), z)| x * y * z)
        .sum()
}

/// Entries i.i.d. from `U[-√6/√(2D), +√6/√(2D)]`, filled A, then B (unless
/// tied), then C.
pub fn init_factors<R: Rng>(
    config: &TrainConfig,
    n_entities: usize,
    n_relations: usize,
    rng: &mut R,
) -> Result<DenseFactors> {
    config.validate()?;
    if n_entities == 0 || n_relations == 0 {
        return Err(Error::InvalidConfig(
            "entity and relation counts must be positive".into(),
        ));
    }
    let bound = init_bound(config.dim);
    let mut fill = |rows: usize| {
        let data = (0..rows * config.dim)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        Matrix {
            rows,
            cols: config.dim,
            data,
        }
    };
    let a = fill(n_entities);
    let b = (!config.kind.is_tied()).then(|| fill(n_entities));
    let c = fill(n_relations);
    DenseFactors::from_parts(a, b, c)
}

pub fn init_bound(dim: usize) -> f64 {
    6f64.sqrt() / (2.0 * dim as f64).sqrt()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Logistic loss `-x log σ(θ) + (x-1) log(1-σ(θ))` for a label `x`.
#[inline]
pub fn loss(positive: bool, theta: f64) -> f64 {
    if positive {
        softplus(-theta)
    } else {
        softplus(theta)
    }
}

/// How the data term of an SGD step sees the factor rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum StepRule {
    Dense,
    /// Forward through `Q_Δ`, gradient passed straight through.
    StraightThrough { delta: f64 },
}

/// Scratch rows reused across SGD steps.
#[derive(Debug, Default)]
pub(crate) struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    a_real: Vec<f64>,
    b_real: Vec<f64>,
}

impl Scratch {
    fn load(&mut self, f: &DenseFactors, t: Triple, rule: StepRule) {
        let copy = |dst: &mut Vec<f64>, src: &[f64]| {
            dst.clear();
            match rule {
                StepRule::Dense => dst.extend_from_slice(src),
                StepRule::StraightThrough { delta } => {
                    dst.extend(src.iter().map(|&v| quantize_unchecked(v, delta)))
                }
            }
        };
        copy(&mut self.a, f.a.row(t.subject));
        copy(&mut self.b, f.b().row(t.object));
        copy(&mut self.c, f.c.row(t.relation));
        self.a_real.clear();
        self.a_real.extend_from_slice(f.a.row(t.subject));
        self.b_real.clear();
        self.b_real.extend_from_slice(f.b().row(t.object));
    }
}

/// One simultaneous SGD update on `E_ijk`; returns the data loss at the
/// pre-step parameters.
pub(crate) fn sgd_update(
    f: &mut DenseFactors,
    t: Triple,
    positive: bool,
    config: &TrainConfig,
    rule: StepRule,
    scratch: &mut Scratch,
) -> f64 {
    scratch.load(f, t, rule);
    let theta = triple_product(&scratch.a, &scratch.b, &scratch.c);
    let x = if positive { 1.0 } else { 0.0 };
    // -x e^{-θ}σ(θ) + (1-x)σ(θ) == σ(θ) - x
    let g = sigmoid(theta) - x;
    let eta = config.eta;
    let (qa, qb, qc) = (&scratch.a, &scratch.b, &scratch.c);
    // Gradients use pre-step values; tied models may have subject == object
    // row, hence the copies of the real rows.
    let (a_old, b_old) = (&scratch.a_real, &scratch.b_real);
    let d = f.dim();
    {
        let c = f.c.row_mut(t.relation);
        for n in 0..d {
            let grad = g * qa[n] * qb[n] + 2.0 * config.lambda_c * c[n];
            c[n] -= eta * grad;
        }
    }
    {
        let a = f.a.row_mut(t.subject);
        for n in 0..d {
            let grad = g * qb[n] * qc[n] + 2.0 * config.lambda_a * a_old[n];
            a[n] -= eta * grad;
        }
    }
    {
        let b = f.b_mut().row_mut(t.object);
        for n in 0..d {
            let grad = g * qa[n] * qc[n] + 2.0 * config.lambda_b * b_old[n];
            b[n] -= eta * grad;
        }
    }
    loss(positive, theta)
}

/// Apply `a ← a − η∂E/∂a`, `b ← b − η∂E/∂b`, `c ← c − η∂E/∂c` for one
/// labelled triple. Returns the logistic loss before the update.
pub fn grad_step(
    f: &mut DenseFactors,
    i: usize,
    j: usize,
    k: usize,
    positive: bool,
    config: &TrainConfig,
) -> Result<f64> {
    f.check_triple(i, j, k)?;
    Ok(sgd_update(
        f,
        Triple::new(i, j, k),
        positive,
        config,
        StepRule::Dense,
        &mut Scratch::default(),
    ))
}

/// Corrupt the object slot of `positive` `n` times, resampling draws that
/// hit a training fact up to [`NEGATIVE_RETRIES`] times.
pub fn sample_negatives<R: Rng>(
    store: &TripleStore,
    positive: Triple,
    n: usize,
    rng: &mut R,
) -> Vec<Triple> {
    let mut out = Vec::with_capacity(n);
    sample_negatives_into(store, positive, n, rng, &mut out);
    out
}

fn sample_negatives_into<R: Rng>(
    store: &TripleStore,
    positive: Triple,
    n: usize,
    rng: &mut R,
    out: &mut Vec<Triple>,
) {
    out.clear();
    let n_e = store.n_entities();
    for _ in 0..n {
        let mut cand = Triple::new(positive.subject, rng.gen_range(0..n_e), positive.relation);
        for _ in 0..NEGATIVE_RETRIES {
            if !store.is_train_fact(&cand) {
                break;
            }
            cand.object = rng.gen_range(0..n_e);
        }
        out.push(cand);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Summed data loss over all steps of the epoch.
    pub loss: f64,
    pub steps: usize,
    pub valid_mrr: Option<f64>,
}

impl EpochStats {
    pub fn mean_loss(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.loss / self.steps as f64
        }
    }
}

/// Receives per-epoch statistics during [`train`].
pub trait TrainObserver {
    fn on_epoch(&mut self, stats: &EpochStats);
}

impl TrainObserver for () {
    fn on_epoch(&mut self, _: &EpochStats) {}
}

impl<F: FnMut(&EpochStats)> TrainObserver for F {
    fn on_epoch(&mut self, stats: &EpochStats) {
        self(stats)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Real (latent, for binarized kinds) factors of the selected epoch.
    pub factors: DenseFactors,
    pub best_epoch: usize,
    pub best_valid_mrr: Option<f64>,
    pub history: Vec<EpochStats>,
}

/// Train from a fresh initialization drawn from `config.seed`.
pub fn train<O: TrainObserver>(
    store: &TripleStore,
    config: &TrainConfig,
    observer: O,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let factors = init_factors(config, store.n_entities(), store.n_relations(), &mut rng)?;
    train_from(factors, 0, store, config, observer)
}

/// Continue training `factors`, which have already seen `start_epoch`
/// epochs, up to `config.epochs`.
pub fn train_from<O: TrainObserver>(
    mut factors: DenseFactors,
    start_epoch: usize,
    store: &TripleStore,
    config: &TrainConfig,
    mut observer: O,
) -> Result<TrainOutcome> {
    config.validate()?;
    if store.train().is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if factors.n_entities() != store.n_entities() {
        return Err(Error::ShapeMismatch {
            what: "entity count",
            expected: store.n_entities(),
            found: factors.n_entities(),
        });
    }
    if factors.n_relations() != store.n_relations() {
        return Err(Error::ShapeMismatch {
            what: "relation count",
            expected: store.n_relations(),
            found: factors.n_relations(),
        });
    }
    if factors.is_tied() != config.kind.is_tied() {
        return Err(Error::InvalidConfig(format!(
            "factors are {} but config asks for {}",
            factors.kind(),
            config.kind
        )));
    }
    let rule = if config.kind.is_binarized() {
        StepRule::StraightThrough {
            delta: config.delta,
        }
    } else {
        StepRule::Dense
    };
    let validate = config.validate_every > 0 && !store.valid().is_empty();

    let mut order: Vec<Triple> = store.train().to_vec();
    let mut negatives = Vec::with_capacity(config.neg_per_pos);
    let mut scratch = Scratch::default();
    let mut history = Vec::with_capacity(config.epochs.saturating_sub(start_epoch));
    let mut best: Option<(f64, usize, DenseFactors)> = None;

    for epoch in start_epoch + 1..=config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        order.copy_from_slice(store.train());
        order.shuffle(&mut rng);

        let mut total = 0.0;
        let mut steps = 0;
        for &pos in &order {
            total += sgd_update(&mut factors, pos, true, config, rule, &mut scratch);
            steps += 1;
            sample_negatives_into(store, pos, config.neg_per_pos, &mut rng, &mut negatives);
            for &neg in &negatives {
                total += sgd_update(&mut factors, neg, false, config, rule, &mut scratch);
                steps += 1;
            }
        }
        if !total.is_finite() {
            return Err(Error::Diverged { epoch, loss: total });
        }

        let valid_mrr = if validate && (epoch % config.validate_every == 0 || epoch == config.epochs)
        {
            let mrr = validation_mrr(&factors, store, config)?;
            if best.as_ref().is_none_or(|(m, _, _)| mrr > *m) {
                best = Some((mrr, epoch, factors.clone()));
            }
            Some(mrr)
        } else {
            None
        };

        let stats = EpochStats {
            epoch,
            loss: total,
            steps,
            valid_mrr,
        };
        log::debug!(
            "epoch {epoch}: loss {:.6} over {steps} steps{}",
            stats.mean_loss(),
            valid_mrr.map_or(String::new(), |m| format!(", valid MRR {m:.4}"))
        );
        observer.on_epoch(&stats);
        history.push(stats);
    }

    Ok(match best {
        Some((mrr, epoch, snapshot)) => TrainOutcome {
            factors: snapshot,
            best_epoch: epoch,
            best_valid_mrr: Some(mrr),
            history,
        },
        None => TrainOutcome {
            factors,
            best_epoch: config.epochs.max(start_epoch),
            best_valid_mrr: None,
            history,
        },
    })
}

fn validation_mrr(f: &DenseFactors, store: &TripleStore, config: &TrainConfig) -> Result<f64> {
    let opts = RankingOptions::default();
    let report = if config.kind.is_binarized() {
        evaluate_ranking(&freeze(f, config.delta)?, store, Split::Valid, &opts)?
    } else {
        evaluate_ranking(f, store, Split::Valid, &opts)?
    };
    Ok(report.mrr)
}
