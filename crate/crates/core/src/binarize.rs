//! Binarized CP: the `Q_Δ` quantizer, bit-packed factors, XNOR/popcount
//! scoring and the straight-through training step.
//!
//! A packed bit of 1 stands for `+Δ` and 0 for `-Δ`. With that encoding the
//! score of a triple is `Δ³ (D − 2·BitC)` where
//! `BitC = h(ā_i, XNOR(b̄_j, c̄_k))` counts the dimensions whose sign product
//! is negative.

use crate::bits::{xnor_hamming, BitMatrix, BitVector};
use crate::dense::{sgd_update, DenseFactors, Matrix, Scratch, StepRule, TrainConfig};
use crate::error::{Error, Result};
use crate::kg::Triple;

/// `+Δ` when `x ≥ 0`, `−Δ` otherwise.
pub fn quantize(x: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if x.is_nan() {
        return Err(Error::NotANumber("quantize input"));
    }
    Ok(quantize_unchecked(x, delta))
}

#[inline]
pub(crate) fn quantize_unchecked(x: f64, delta: f64) -> f64 {
    if x >= 0.0 {
        delta
    } else {
        -delta
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")))
    }
}

/// Sign bits of `v` (`v[d] ≥ 0` sets bit `d`).
pub fn binarize_row(v: &[f64], delta: f64) -> Result<BitVector> {
    check_delta(delta)?;
    let mut out = BitVector::zeros(v.len());
    for (d, &x) in v.iter().enumerate() {
        if x.is_nan() {
            return Err(Error::NotANumber("binarize_row input"));
        }
        if x >= 0.0 {
            out.set(d, true);
        }
    }
    Ok(out)
}

/// Expand packed bits to `±scale` values.
pub fn unpack_row(bits: &BitVector, scale: f64) -> Vec<f64> {
    bits.iter().map(|b| if b { scale } else { -scale }).collect()
}

fn binarize_matrix(m: &Matrix, delta: f64) -> Result<BitMatrix> {
    let mut out = BitMatrix::zeros(0, m.cols());
    for row in m.iter_rows() {
        out.push_row(&binarize_row(row, delta)?)?;
    }
    Ok(out)
}

/// Magnitudes of the three factor matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    /// Every entry is `±Δ`.
    Uniform(f64),
    /// Per-matrix magnitudes `[α_A, α_B, α_C]` (vector-quantized models).
    PerMatrix([f64; 3]),
}

impl Scale {
    pub fn components(self) -> [f64; 3] {
        match self {
            Scale::Uniform(d) => [d; 3],
            Scale::PerMatrix(s) => s,
        }
    }

    /// Magnitude of every per-dimension term `a·b·c`.
    pub fn product(self) -> f64 {
        let [a, b, c] = self.components();
        a * b * c
    }
}

/// Packed `{+Δ, −Δ}` factor matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryFactors {
    a: BitMatrix,
    b: Option<BitMatrix>,
    c: BitMatrix,
    scale: Scale,
}

impl BinaryFactors {
    /// `b = None` ties object rows to subject rows.
    pub fn new(a: BitMatrix, b: Option<BitMatrix>, c: BitMatrix, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Self::with_scale(a, b, c, Scale::Uniform(delta))
    }

    pub fn with_scale(a: BitMatrix, b: Option<BitMatrix>, c: BitMatrix, scale: Scale) -> Result<Self> {
        let dim = a.row_len();
        for (what, m) in [("object", b.as_ref()), ("relation", Some(&c))] {
            if let Some(m) = m {
                if m.row_len() != dim {
                    return Err(Error::ShapeMismatch {
                        what: if what == "object" {
                            "object row length"
                        } else {
                            "relation row length"
                        },
                        expected: dim,
                        found: m.row_len(),
                    });
                }
            }
        }
        if let Some(b) = &b {
            if b.rows() != a.rows() {
                return Err(Error::ShapeMismatch {
                    what: "object row count",
                    expected: a.rows(),
                    found: b.rows(),
                });
            }
        }
        if scale.components().iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidConfig(format!("invalid scale {scale:?}")));
        }
        Ok(Self { a, b, c, scale })
    }

    pub fn dim(&self) -> usize {
        self.a.row_len()
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

    pub fn scale(&self) -> Scale {
        self.scale
    }

    /// `Δ` for uniformly scaled factors.
    pub fn delta(&self) -> Option<f64> {
        match self.scale {
            Scale::Uniform(d) => Some(d),
            Scale::PerMatrix(_) => None,
        }
    }

    pub fn a(&self) -> &BitMatrix {
        &self.a
    }

    pub fn b(&self) -> &BitMatrix {
        self.b.as_ref().unwrap_or(&self.a)
    }

    pub fn c(&self) -> &BitMatrix {
        &self.c
    }

    /// Mutable access for perturbation experiments.
    pub fn b_mut(&mut self) -> &mut BitMatrix {
        self.b.as_mut().unwrap_or(&mut self.a)
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

    /// Number of dimensions with a negative sign product.
    #[inline]
    pub fn bitc(&self, i: usize, j: usize, k: usize) -> u32 {
        xnor_hamming(self.a.row(i), self.b().row(j), self.c.row(k), self.dim())
    }

    /// `scale · (D − 2·BitC)`.
    pub fn score_bitwise(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        self.check_triple(i, j, k)?;
        Ok(self.score_bitwise_unchecked(i, j, k))
    }

    #[inline]
    pub fn score_bitwise_unchecked(&self, i: usize, j: usize, k: usize) -> f64 {
        let bitc = self.bitc(i, j, k) as i64;
        self.scale.product() * (self.dim() as i64 - 2 * bitc) as f64
    }

    /// Reference score: expand to `±scale` reals and sum the products in
    /// floating point (compensated summation). Slow; used as an oracle.
    pub fn score_binary_float(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        self.check_triple(i, j, k)?;
        let [sa, sb, sc] = self.scale.components();
        let a = unpack_row(&self.a.row_vector(i), sa);
        let b = unpack_row(&self.b().row_vector(j), sb);
        let c = unpack_row(&self.c.row_vector(k), sc);
        Ok(neumaier_sum(
            a.iter().zip(&b).zip(&c).map(|((x, y), z)| x * y * z),
        ))
    }

    /// Real factors holding the `±scale` values.
    pub fn unpack(&self) -> DenseFactors {
        let [sa, sb, sc] = self.scale.components();
        let expand = |m: &BitMatrix, s: f64| {
            let mut out = Matrix::zeros(m.rows(), m.row_len());
            for i in 0..m.rows() {
                let row = unpack_row(&m.row_vector(i), s);
                out.row_mut(i).copy_from_slice(&row);
            }
            out
        };
        let a = expand(&self.a, sa);
        let b = self.b.as_ref().map(|b| expand(b, sb));
        let c = expand(&self.c, sc);
        DenseFactors::from_parts(a, b, c).expect("shapes checked at construction")
    }
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Straight-through SGD step: the forward pass scores `Q_Δ` of the three
/// rows, the data gradient (taken w.r.t. the binarized rows) is applied to
/// the real rows, and L2 acts on the real rows. Returns the binarized loss.
pub fn ste_grad_step(
    real: &mut DenseFactors,
    i: usize,
    j: usize,
    k: usize,
    positive: bool,
    config: &TrainConfig,
) -> Result<f64> {
    check_delta(config.delta)?;
    real.check_triple(i, j, k)?;
    Ok(sgd_update(
        real,
        Triple::new(i, j, k),
        positive,
        config,
        StepRule::StraightThrough {
            delta: config.delta,
        },
        &mut Scratch::default(),
    ))
}

/// Binarize every row of trained real factors; tied models stay tied.
pub fn freeze(real: &DenseFactors, delta: f64) -> Result<BinaryFactors> {
    let a = binarize_matrix(real.a(), delta)?;
    let b = if real.is_tied() {
        None
    } else {
        Some(binarize_matrix(real.b(), delta)?)
    };
    let c = binarize_matrix(real.c(), delta)?;
    BinaryFactors::new(a, b, c, delta)
}
