//! Fixed-length bit vectors packed LSB-first into `u64` words.

use crate::error::{Error, Result};

/// Mask of the valid bits in the last word of a `len`-bit vector.
#[inline]
pub fn tail_mask(len: usize) -> u64 {
    match len % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

#[inline]
pub fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

/// Bit `d` lives in word `d / 64` at position `d % 64`. Bits past `len`
/// are always zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self {
            words: vec![u64::MAX; words_for(len)],
            len,
        };
        v.mask_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (d, &b) in bits.iter().enumerate() {
            if b {
                v.words[d / 64] |= 1 << (d % 64);
            }
        }
        v
    }

    /// Rejects words with set bits beyond `len`.
    pub fn from_words(words: Vec<u64>, len: usize) -> Result<Self> {
        if words.len() != words_for(len) {
            return Err(Error::ShapeMismatch {
                what: "word count",
                expected: words_for(len),
                found: words.len(),
            });
        }
        if let Some(&last) = words.last() {
            if last & !tail_mask(len) != 0 {
                return Err(Error::Format(format!(
                    "bits set beyond logical length {len}"
                )));
            }
        }
        Ok(Self { words, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, d: usize) -> bool {
        assert!(d < self.len, "bit {d} out of range {}", self.len);
        self.words[d / 64] >> (d % 64) & 1 == 1
    }

    pub fn set(&mut self, d: usize, value: bool) {
        assert!(d < self.len, "bit {d} out of range {}", self.len);
        let bit = 1u64 << (d % 64);
        if value {
            self.words[d / 64] |= bit;
        } else {
            self.words[d / 64] &= !bit;
        }
    }

    pub fn flip(&mut self, d: usize) {
        let v = self.get(d);
        self.set(d, !v);
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |d| self.get(d))
    }

    pub fn hamming(&self, other: &BitVector) -> Result<u32> {
        if self.len != other.len {
            return Err(Error::ShapeMismatch {
                what: "bit vector length",
                expected: self.len,
                found: other.len,
            });
        }
        Ok(hamming_words(&self.words, &other.words))
    }

    fn mask_tail(&mut self) {
        let mask = tail_mask(self.len);
        if let Some(last) = self.words.last_mut() {
            *last &= mask;
        }
    }
}

/// Rows of equal-length bit vectors stored back to back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    len: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, len: usize) -> Self {
        let words_per_row = words_for(len);
        Self {
            rows,
            len,
            words_per_row,
            data: vec![0; rows * words_per_row],
        }
    }

    pub fn from_rows(rows: &[BitVector]) -> Result<Self> {
        let len = rows.first().map_or(0, BitVector::len);
        let mut m = Self::zeros(0, len);
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    /// Words are validated like [`BitVector::from_words`].
    pub fn from_words(rows: usize, len: usize, data: Vec<u64>) -> Result<Self> {
        let words_per_row = words_for(len);
        if data.len() != rows * words_per_row {
            return Err(Error::ShapeMismatch {
                what: "bit matrix word count",
                expected: rows * words_per_row,
                found: data.len(),
            });
        }
        let mask = tail_mask(len);
        if words_per_row > 0
            && data
                .chunks_exact(words_per_row)
                .any(|row| row[words_per_row - 1] & !mask != 0)
        {
            return Err(Error::Format(format!("bits set beyond logical length {len}")));
        }
        Ok(Self {
            rows,
            len,
            words_per_row,
            data,
        })
    }

    pub fn push_row(&mut self, row: &BitVector) -> Result<()> {
        if row.len() != self.len {
            return Err(Error::ShapeMismatch {
                what: "bit row length",
                expected: self.len,
                found: row.len(),
            });
        }
        self.data.extend_from_slice(row.words());
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Logical bits per row.
    pub fn row_len(&self) -> usize {
        self.len
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    pub fn row_vector(&self, i: usize) -> BitVector {
        BitVector {
            words: self.row(i).to_vec(),
            len: self.len,
        }
    }

    pub fn set(&mut self, i: usize, d: usize, value: bool) {
        assert!(i < self.rows && d < self.len);
        let w = &mut self.data[i * self.words_per_row + d / 64];
        let bit = 1u64 << (d % 64);
        if value {
            *w |= bit;
        } else {
            *w &= !bit;
        }
    }

    #[inline]
    pub fn get(&self, i: usize, d: usize) -> bool {
        assert!(i < self.rows && d < self.len);
        self.data[i * self.words_per_row + d / 64] >> (d % 64) & 1 == 1
    }
}

#[inline]
pub fn hamming_words(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// `h(a, XNOR(b, c))` over `len` bits: the number of positions where the
/// sign product `a·b·c` is negative.
#[inline]
pub fn xnor_hamming(a: &[u64], b: &[u64], c: &[u64], len: usize) -> u32 {
    let n = a.len();
    debug_assert!(b.len() == n && c.len() == n);
    if n == 0 {
        return 0;
    }
    let mut count = 0;
    for w in 0..n - 1 {
        count += (a[w] ^ !(b[w] ^ c[w])).count_ones();
    }
    // The complement sets the padding bits; mask after it.
    count += ((a[n - 1] ^ !(b[n - 1] ^ c[n - 1])) & tail_mask(len)).count_ones();
    count
}
