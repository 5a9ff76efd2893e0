//! `key = value` config files and grid-search sweeps over training
//! hyperparameters.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::dense::{train, ModelKind, TrainConfig};
use crate::error::{Error, Result};
use crate::kg::TripleStore;

pub const DEFAULT_SWEEP_CAP: usize = 256;

/// Parsed config file: keys in file order are not preserved, duplicates are
/// rejected. `#` starts a comment.
pub fn parse_config(text: &str, source: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: source.to_path_buf(),
            line: n + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected key = value, got `{line}`")))?;
        let key = key.trim().to_ascii_lowercase().replace('-', "_");
        if key.is_empty() {
            return Err(parse_err("empty key".into()));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(parse_err(format!("duplicate key `{key}`")));
        }
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config(&std::fs::read_to_string(path)?, path)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad value `{value}` for `{key}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items = value
        .split(',')
        .map(|v| parse_value(key, v))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        return Err(Error::InvalidConfig(format!("empty grid for `{key}`")));
    }
    Ok(items)
}

/// Set one training field from a config entry. Returns `false` for keys
/// that are not training parameters.
pub fn apply_train_key(config: &mut TrainConfig, key: &str, value: &str) -> Result<bool> {
    match key {
        "eta" => config.eta = parse_value(key, value)?,
        "lambda" => *config = config.clone().with_lambda(parse_value(key, value)?),
        "lambda_a" => config.lambda_a = parse_value(key, value)?,
        "lambda_b" => config.lambda_b = parse_value(key, value)?,
        "lambda_c" => config.lambda_c = parse_value(key, value)?,
        "dim" => config.dim = parse_value(key, value)?,
        "delta" => config.delta = parse_value(key, value)?,
        "epochs" => config.epochs = parse_value(key, value)?,
        "neg" | "neg_per_pos" => config.neg_per_pos = parse_value(key, value)?,
        "kind" => config.kind = value.parse::<ModelKind>()?,
        "seed" => config.seed = parse_value(key, value)?,
        "validate_every" => config.validate_every = parse_value(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Grids over the swept axes; every other training field comes from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: TrainConfig,
    pub lambda_a: Vec<f64>,
    pub lambda_b: Vec<f64>,
    pub lambda_c: Vec<f64>,
    pub eta: Vec<f64>,
    pub delta: Vec<f64>,
    pub dim: Vec<usize>,
    /// Upper bound on the number of grid points.
    pub cap: usize,
}

impl SweepSpec {
    /// A single point at `base`.
    pub fn single(base: TrainConfig) -> Self {
        Self {
            lambda_a: vec![base.lambda_a],
            lambda_b: vec![base.lambda_b],
            lambda_c: vec![base.lambda_c],
            eta: vec![base.eta],
            delta: vec![base.delta],
            dim: vec![base.dim],
            base,
            cap: DEFAULT_SWEEP_CAP,
        }
    }

    /// The search ranges used for the real-valued models.
    pub fn dense_grid(base: TrainConfig) -> Self {
        Self {
            lambda_a: vec![0.0, 1e-4],
            lambda_b: vec![0.0, 1e-4],
            lambda_c: vec![0.0, 1e-4],
            eta: vec![0.025, 0.05],
            dim: vec![200, 400],
            ..Self::single(base)
        }
    }

    /// The search ranges used for the binarized models.
    pub fn binary_grid(base: TrainConfig) -> Self {
        Self {
            delta: vec![0.3, 0.5],
            dim: vec![200, 400, 800],
            ..Self::dense_grid(base)
        }
    }

    /// Base values from scalar keys, grids from comma-separated ones.
    /// `lambda` sets all three regularizer grids.
    pub fn from_config(entries: &BTreeMap<String, String>) -> Result<Self> {
        let mut base = TrainConfig::default();
        let mut grids: Vec<(&str, &str)> = Vec::new();
        let mut cap = DEFAULT_SWEEP_CAP;
        for (key, value) in entries {
            match key.as_str() {
                "lambda" | "lambda_a" | "lambda_b" | "lambda_c" | "eta" | "delta" | "dim" => {
                    grids.push((key, value))
                }
                "cap" => cap = parse_value(key, value)?,
                "data" | "out" => {}
                _ => {
                    if !apply_train_key(&mut base, key, value)? {
                        return Err(Error::InvalidConfig(format!("unknown sweep key `{key}`")));
                    }
                }
            }
        }
        let mut spec = Self::single(base);
        spec.cap = cap;
        // `lambda` first so per-matrix grids override it
        grids.sort_by_key(|(k, _)| *k != "lambda");
        for (key, value) in grids {
            match key {
                "lambda" => {
                    let g: Vec<f64> = parse_list(key, value)?;
                    spec.lambda_a = g.clone();
                    spec.lambda_b = g.clone();
                    spec.lambda_c = g;
                }
                "lambda_a" => spec.lambda_a = parse_list(key, value)?,
                "lambda_b" => spec.lambda_b = parse_list(key, value)?,
                "lambda_c" => spec.lambda_c = parse_list(key, value)?,
                "eta" => spec.eta = parse_list(key, value)?,
                "delta" => spec.delta = parse_list(key, value)?,
                "dim" => spec.dim = parse_list(key, value)?,
                _ => unreachable!(),
            }
        }
        Ok(spec)
    }

    pub fn len(&self) -> usize {
        let delta = if self.base.kind.is_binarized() { self.delta.len() } else { 1 };
        [
            self.lambda_a.len(),
            self.lambda_b.len(),
            self.lambda_c.len(),
            self.eta.len(),
            delta,
            self.dim.len(),
        ]
        .iter()
        .product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every grid point in a fixed order. Δ is only swept for binarized
    /// kinds.
    pub fn points(&self) -> Result<Vec<TrainConfig>> {
        for (axis, n) in [
            ("lambda_a", self.lambda_a.len()),
            ("lambda_b", self.lambda_b.len()),
            ("lambda_c", self.lambda_c.len()),
            ("eta", self.eta.len()),
            ("delta", self.delta.len()),
            ("dim", self.dim.len()),
        ] {
            if n == 0 {
                return Err(Error::InvalidConfig(format!("empty grid for `{axis}`")));
            }
        }
        if self.len() > self.cap {
            return Err(Error::InvalidConfig(format!(
                "sweep has {} points, cap is {}",
                self.len(),
                self.cap
            )));
        }
        let deltas = if self.base.kind.is_binarized() {
            self.delta.clone()
        } else {
            vec![self.base.delta]
        };
        let mut out = Vec::with_capacity(self.len());
        for &dim in &self.dim {
            for &eta in &self.eta {
                for &delta in &deltas {
                    for &lambda_a in &self.lambda_a {
                        for &lambda_b in &self.lambda_b {
                            for &lambda_c in &self.lambda_c {
                                let cfg = TrainConfig {
                                    dim,
                                    eta,
                                    delta,
                                    lambda_a,
                                    lambda_b,
                                    lambda_c,
                                    ..self.base.clone()
                                };
                                cfg.validate()?;
                                out.push(cfg);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config: TrainConfig,
    pub valid_mrr: f64,
    pub best_epoch: usize,
}

/// Train every grid point (in parallel) and score it by its best
/// validation MRR. Rows come back in grid order.
pub fn run_sweep(store: &TripleStore, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if store.valid().is_empty() {
        return Err(Error::EmptySplit("valid"));
    }
    let points = spec.points()?;
    points
        .into_par_iter()
        .map(|mut config| {
            if config.validate_every == 0 {
                config.validate_every = config.epochs.max(1);
            }
            let outcome = train(store, &config, ())?;
            Ok(SweepRow {
                valid_mrr: outcome.best_valid_mrr.unwrap_or(f64::NAN),
                best_epoch: outcome.best_epoch,
                config,
            })
        })
        .collect()
}

/// Highest validation MRR; the earliest grid point wins ties.
pub fn best_row(rows: &[SweepRow]) -> Option<&SweepRow> {
    rows.iter()
        .filter(|r| !r.valid_mrr.is_nan())
        .fold(None, |best: Option<&SweepRow>, r| match best {
            Some(b) if b.valid_mrr >= r.valid_mrr => Some(b),
            _ => Some(r),
        })
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("kind,dim,eta,delta,lambda_a,lambda_b,lambda_c,neg,epochs,seed,best_epoch,valid_mrr\n");
    for r in rows {
        let c = &r.config;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.kind, c.dim, c.eta, c.delta, c.lambda_a, c.lambda_b, c.lambda_c, c.neg_per_pos, c.epochs, c.seed, r.best_epoch, r.valid_mrr
        );
    }
    s
}
