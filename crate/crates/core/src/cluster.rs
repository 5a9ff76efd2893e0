//! Single-linkage agglomerative clustering of binary embeddings.
//!
//! For `±Δ` vectors the Euclidean distance is `2Δ·√h` with `h` the Hamming
//! distance of the sign bits, so merges are driven by integer Hamming
//! distances and heights are converted at the end.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bits::{hamming_words, BitVector};
use crate::error::{Error, Result};

/// Largest input accepted; the pairwise table is `n(n-1)/2` `u32`s.
pub const MAX_CLUSTER_ROWS: usize = 10_000;

pub fn binary_euclidean(p: &BitVector, q: &BitVector, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(hamming_to_euclidean(p.hamming(q)?, delta))
}

fn hamming_to_euclidean(h: u32, delta: f64) -> f64 {
    2.0 * delta * f64::from(h).sqrt()
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("delta must be positive and finite, got {delta}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    /// Cluster labels (smallest member row index), `a < b`. The merged
    /// cluster keeps label `a`.
    pub a: usize,
    pub b: usize,
    pub hamming: u32,
    pub height: f64,
    /// Members in the merged cluster.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub merges: Vec<Merge>,
    pub leaves: usize,
}

impl Dendrogram {
    /// Labels after replaying merges until `k` clusters remain, renumbered
    /// `0..k` in order of first appearance.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        if k < 1 || k > self.leaves {
            return Err(Error::InvalidConfig(format!(
                "k must be in 1..={}, got {k}",
                self.leaves
            )));
        }
        let steps = self.leaves - k;
        if steps > self.merges.len() {
            return Err(Error::InvalidConfig(format!(
                "dendrogram has {} merges, {steps} needed",
                self.merges.len()
            )));
        }
        let mut parent: Vec<usize> = (0..self.leaves).collect();
        for m in &self.merges[..steps] {
            parent[m.b] = m.a;
        }
        let root = |mut x: usize| {
            while parent[x] != x {
                x = parent[x];
            }
            x
        };
        let roots: Vec<usize> = (0..self.leaves).map(root).collect();
        Ok(canonical_labels(&roots))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("a,b,height,size\n");
        for m in &self.merges {
            let _ = writeln!(s, "{},{},{},{}", m.a, m.b, m.height, m.size);
        }
        s
    }
}

/// Renumber arbitrary labels to `0, 1, …` by first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

struct Condensed {
    n: usize,
    d: Vec<u32>,
}

impl Condensed {
    fn build(rows: &[BitVector]) -> Self {
        let n = rows.len();
        let d = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                (i + 1..n).map(move |j| hamming_words(rows[i].words(), rows[j].words()))
            })
            .collect();
        Self { n, d }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + j - i - 1
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> u32 {
        self.d[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: u32) {
        let at = self.idx(i, j);
        self.d[at] = v;
    }
}

/// Merge the closest pair of clusters until one remains; ties go to the
/// lexicographically smallest `(label_a, label_b)`. Returns the full
/// dendrogram and the labels of the `k`-cluster cut.
pub fn single_linkage(rows: &[BitVector], delta: f64, k: usize) -> Result<(Dendrogram, Vec<usize>)> {
    check_delta(delta)?;
    let n = rows.len();
    if k < 1 || k > n {
        return Err(Error::InvalidConfig(format!("k must be in 1..={n}, got {k}")));
    }
    if n > MAX_CLUSTER_ROWS {
        return Err(Error::InvalidConfig(format!(
            "{n} rows exceeds the clustering limit of {MAX_CLUSTER_ROWS}"
        )));
    }
    let len = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != len) {
        return Err(Error::ShapeMismatch {
            what: "bit vector length",
            expected: len,
            found: bad.len(),
        });
    }

    let mut dist = Condensed::build(rows);
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    // Slot ids double as cluster labels: a cluster lives in the slot of its
    // smallest member.
    let nearest = |dist: &Condensed, active: &[bool], x: usize| {
        (0..n)
            .filter(|&y| y != x && active[y])
            .map(|y| (dist.get(x, y), y))
            .min()
    };
    let mut nn: Vec<Option<(u32, usize)>> = (0..n).map(|x| nearest(&dist, &active, x)).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for _ in 1..n {
        let (h, a, b) = (0..n)
            .filter(|&x| active[x])
            .filter_map(|x| nn[x].map(|(h, y)| (h, x.min(y), x.max(y))))
            .min()
            .expect("at least two active clusters");

        active[b] = false;
        size[a] += size[b];
        for y in (0..n).filter(|&y| active[y] && y != a) {
            let m = dist.get(a, y).min(dist.get(b, y));
            dist.set(a, y, m);
        }
        merges.push(Merge {
            a,
            b,
            hamming: h,
            height: hamming_to_euclidean(h, delta),
            size: size[a],
        });

        nn[b] = None;
        nn[a] = nearest(&dist, &active, a);
        for x in (0..n).filter(|&x| active[x] && x != a) {
            match nn[x] {
                Some((_, y)) if y == a || y == b => nn[x] = nearest(&dist, &active, x),
                Some(cur) => {
                    let cand = (dist.get(x, a), a);
                    if cand < cur {
                        nn[x] = Some(cand);
                    }
                }
                None => nn[x] = nearest(&dist, &active, x),
            }
        }
    }

    let dendrogram = Dendrogram { merges, leaves: n };
    let labels = dendrogram.cut(k)?;
    Ok((dendrogram, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(bits: &str) -> BitVector {
        BitVector::from_bools(&bits.chars().map(|c| c == '1').collect::<Vec<_>>())
    }

    #[test]
    fn euclidean_examples() {
        let p = bv("1010101010101010");
        assert_eq!(binary_euclidean(&p, &p, 0.5).unwrap(), 0.0);
        let q = bv("0101010101010101");
        assert_eq!(binary_euclidean(&p, &q, 0.5).unwrap(), 4.0);
        assert!(binary_euclidean(&p, &bv("1"), 0.5).is_err());
        assert!(binary_euclidean(&p, &q, 0.0).is_err());
    }

    #[test]
    fn trivial_cuts() {
        let rows = vec![bv("0000"), bv("0001"), bv("1111"), bv("0111")];
        let (d, labels) = single_linkage(&rows, 1.0, 4).unwrap();
        assert_eq!(labels, vec![0, 1, 2, 3]);
        assert_eq!(d.merges.len(), 3);
        let (_, one) = single_linkage(&rows, 1.0, 1).unwrap();
        assert_eq!(one, vec![0; 4]);
        let (_, two) = single_linkage(&rows, 1.0, 2).unwrap();
        assert_eq!(two, vec![0, 0, 1, 1]);
        assert!(single_linkage(&rows, 1.0, 0).is_err());
        assert!(single_linkage(&rows, 1.0, 5).is_err());
    }

    #[test]
    fn ties_merge_lowest_pair_first() {
        // all pairwise distances equal
        let rows = vec![bv("000"), bv("011"), bv("101"), bv("110")];
        let (d, _) = single_linkage(&rows, 1.0, 1).unwrap();
        let pairs: Vec<_> = d.merges.iter().map(|m| (m.a, m.b)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (0, 3)]);
        assert_eq!(d.merges.last().unwrap().size, 4);
    }

    #[test]
    fn heights_are_monotone() {
        let rows = vec![bv("00000000"), bv("00000011"), bv("11110000"), bv("11111111"), bv("00000001")];
        let (d, _) = single_linkage(&rows, 0.5, 1).unwrap();
        assert!(d.merges.windows(2).all(|w| w[0].height <= w[1].height));
        let csv = d.to_csv();
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn canonical_relabeling() {
        assert_eq!(canonical_labels(&[7, 3, 7, 9, 3]), vec![0, 1, 0, 2, 1]);
    }
}
