//! Post-hoc vector quantization of trained real factors (VQ-CP).
//!
//! `min ‖X − αS‖_F` over sign matrices `S` and `α > 0` is solved in closed
//! form by `S = sign(X)` and `α = mean |X|`.

use crate::binarize::{binarize_row, BinaryFactors, Scale};
use crate::bits::BitMatrix;
use crate::dense::{DenseFactors, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct VqMatrix {
    /// Bit set means `+1` (zero maps to `+1`).
    pub signs: BitMatrix,
    /// Zero only when the source matrix is all zeros.
    pub alpha: f64,
}

impl VqMatrix {
    pub fn reconstruct(&self) -> Matrix {
        let cols = self.signs.row_len();
        let mut out = Matrix::zeros(self.signs.rows(), cols);
        for i in 0..self.signs.rows() {
            for (d, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = if self.signs.get(i, d) {
                    self.alpha
                } else {
                    -self.alpha
                };
            }
        }
        out
    }

    pub fn frobenius_error(&self, x: &Matrix) -> f64 {
        self.reconstruct()
            .data()
            .iter()
            .zip(x.data())
            .map(|(r, v)| (v - r) * (v - r))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn vq_quantize(x: &Matrix) -> Result<VqMatrix> {
    if x.data().is_empty() {
        return Err(Error::InvalidConfig("cannot quantize an empty matrix".into()));
    }
    if x.data().iter().any(|v| v.is_nan()) {
        return Err(Error::NotANumber("vq_quantize input"));
    }
    let alpha = x.data().iter().map(|v| v.abs()).sum::<f64>() / x.data().len() as f64;
    let mut signs = BitMatrix::zeros(0, x.cols());
    for row in x.iter_rows() {
        // Any positive Δ yields the same sign bits.
        signs.push_row(&binarize_row(row, 1.0)?)?;
    }
    Ok(VqMatrix { signs, alpha })
}

/// Quantize A, B and C independently; scores become
/// `α_A α_B α_C (D − 2·BitC)`.
pub fn vq_apply(f: &DenseFactors) -> Result<BinaryFactors> {
    let a = vq_quantize(f.a())?;
    let b = if f.is_tied() {
        None
    } else {
        Some(vq_quantize(f.b())?)
    };
    let c = vq_quantize(f.c())?;
    let alpha_b = b.as_ref().map_or(a.alpha, |b| b.alpha);
    BinaryFactors::with_scale(
        a.signs,
        b.map(|b| b.signs),
        c.signs,
        Scale::PerMatrix([a.alpha, alpha_b, c.alpha]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn already_binary_is_exact() {
        let x = mat(&[&[1.0, -1.0], &[1.0, -1.0]]);
        let q = vq_quantize(&x).unwrap();
        assert_eq!(q.alpha, 1.0);
        assert_eq!(q.reconstruct(), x);
        assert_eq!(q.frobenius_error(&x), 0.0);
    }

    #[test]
    fn mean_absolute_scale() {
        let q = vq_quantize(&mat(&[&[0.5, -1.5]])).unwrap();
        assert_eq!(q.alpha, 1.0);
        assert!(q.signs.get(0, 0));
        assert!(!q.signs.get(0, 1));
    }

    #[test]
    fn zero_maps_to_plus_and_all_zero_is_degenerate() {
        let q = vq_quantize(&mat(&[&[0.0, 0.0]])).unwrap();
        assert_eq!(q.alpha, 0.0);
        assert!(q.signs.get(0, 0) && q.signs.get(0, 1));
    }

    #[test]
    fn nan_rejected() {
        assert!(vq_quantize(&mat(&[&[0.0, f64::NAN]])).is_err());
    }

    #[test]
    fn exact_when_entries_are_plus_minus_constant() {
        let a = mat(&[&[0.3, -0.3], &[-0.3, -0.3]]);
        let b = mat(&[&[0.2, 0.2], &[-0.2, 0.2]]);
        let c = mat(&[&[0.7, -0.7]]);
        let f = DenseFactors::from_parts(a, Some(b), c).unwrap();
        let q = vq_apply(&f).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let dense = f.score(i, j, 0).unwrap();
                let vq = q.score_bitwise(i, j, 0).unwrap();
                assert!((dense - vq).abs() < 1e-15, "{dense} vs {vq}");
            }
        }
    }
}
