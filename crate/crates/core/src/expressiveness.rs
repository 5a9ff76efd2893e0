//! Constructive exact binary CP decomposition of an arbitrary boolean
//! tensor, with a verifier for the reconstruction and for the block
//! regularities that make it work.
//!
//! Every factor row is a sequence of `2·N_e·N_r` four-dimensional blocks,
//! each one of
//!
//! ```text
//! p = [+Δ, +Δ, −Δ, −Δ]   q = [+Δ, −Δ, +Δ, −Δ]   r = [+Δ, +Δ, +Δ, +Δ]   −r
//! ```
//!
//! so `D = 8·N_e·N_r`. A run of `2·N_e` blocks is a *page* (one per
//! relation), split into two *halfpages* of `N_e` blocks. At `Δ = 1/2` the
//! score of every triple equals the tensor entry exactly.

use std::fmt;

use rand::Rng;

use crate::binarize::BinaryFactors;
use crate::bits::BitMatrix;
use crate::error::{Error, Result};
use crate::kg::{Triple, TripleStore};

/// Scale at which the construction reconstructs 0/1 exactly.
pub const EXACT_DELTA: f64 = 0.5;

/// Default cap on `N_e·N_r` for command-line use.
pub const DEFAULT_BLOCK_LIMIT: usize = 4096;

/// Dense `N_e × N_e × N_r` boolean tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolTensor {
    n_e: usize,
    n_r: usize,
    data: Vec<bool>,
}

impl BoolTensor {
    pub fn zeros(n_e: usize, n_r: usize) -> Self {
        Self {
            n_e,
            n_r,
            data: vec![false; n_e * n_e * n_r],
        }
    }

    /// Entries in `(i, j, k)` order with `k` fastest; only 0 and 1 allowed.
    pub fn from_values(n_e: usize, n_r: usize, values: &[u8]) -> Result<Self> {
        if values.len() != n_e * n_e * n_r {
            return Err(Error::ShapeMismatch {
                what: "tensor entry count",
                expected: n_e * n_e * n_r,
                found: values.len(),
            });
        }
        let data = values
            .iter()
            .map(|&v| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidConfig(format!(
                    "tensor entries must be 0 or 1, found {other}"
                ))),
            })
            .collect::<Result<_>>()?;
        Ok(Self { n_e, n_r, data })
    }

    pub fn from_fn(n_e: usize, n_r: usize, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut t = Self::zeros(n_e, n_r);
        for i in 0..n_e {
            for j in 0..n_e {
                for k in 0..n_r {
                    t.set(i, j, k, f(i, j, k));
                }
            }
        }
        t
    }

    /// Fair coin per entry.
    pub fn random<R: Rng>(n_e: usize, n_r: usize, rng: &mut R) -> Self {
        Self::from_fn(n_e, n_r, |_, _, _| rng.gen_bool(0.5))
    }

    /// Every known fact of the store set to 1.
    pub fn from_store(store: &TripleStore) -> Self {
        let mut t = Self::zeros(store.n_entities(), store.n_relations());
        for split in [store.train(), store.valid(), store.test()] {
            for &Triple {
                subject,
                object,
                relation,
            } in split
            {
                t.set(subject, object, relation, true);
            }
        }
        t
    }

    pub fn n_entities(&self) -> usize {
        self.n_e
    }

    pub fn n_relations(&self) -> usize {
        self.n_r
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        assert!(i < self.n_e && j < self.n_e && k < self.n_r);
        (i * self.n_e + j) * self.n_r + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.data[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: bool) {
        let o = self.offset(i, j, k);
        self.data[o] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// The four admissible 4-dimensional blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockCode {
    P,
    Q,
    R,
    NegR,
}

impl BlockCode {
    pub const ALL: [BlockCode; 4] = [BlockCode::P, BlockCode::Q, BlockCode::R, BlockCode::NegR];

    /// `true` encodes `+Δ`.
    pub fn signs(self) -> [bool; 4] {
        match self {
            BlockCode::P => [true, true, false, false],
            BlockCode::Q => [true, false, true, false],
            BlockCode::R => [true; 4],
            BlockCode::NegR => [false; 4],
        }
    }

    pub fn from_signs(signs: [bool; 4]) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.signs() == signs)
    }

    pub fn values(self, delta: f64) -> [f64; 4] {
        self.signs().map(|s| if s { delta } else { -delta })
    }

    /// `(x ∘ y) zᵀ` over the block's four dimensions.
    pub fn triple_product(x: Self, y: Self, z: Self, delta: f64) -> f64 {
        let (x, y, z) = (x.values(delta), y.values(delta), z.values(delta));
        (0..4).map(|d| x[d] * y[d] * z[d]).sum()
    }
}

impl fmt::Display for BlockCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockCode::P => "p",
            BlockCode::Q => "q",
            BlockCode::R => "r",
            BlockCode::NegR => "-r",
        })
    }
}

/// Block addressing. The `*_1` functions follow the 1-based algebra used to
/// state the construction; everything else in this module is 0-based and
/// goes through [`EncoderLayout::block`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderLayout {
    pub n_e: usize,
    pub n_r: usize,
}

impl EncoderLayout {
    pub fn new(n_e: usize, n_r: usize) -> Result<Self> {
        if n_e == 0 || n_r == 0 {
            return Err(Error::InvalidConfig(
                "tensor must have at least one entity and one relation".into(),
            ));
        }
        Ok(Self { n_e, n_r })
    }

    pub fn blocks(&self) -> usize {
        2 * self.n_e * self.n_r
    }

    pub fn dim(&self) -> usize {
        4 * self.blocks()
    }

    /// `α(k, m) = 2N_e(k−1) + m`: block `m` of the first halfpage of page `k`.
    pub fn alpha_1(&self, k: usize, m: usize) -> usize {
        2 * self.n_e * (k - 1) + m
    }

    /// `β(k, m) = α(k, m) + N_e`: block `m` of the second halfpage.
    pub fn beta_1(&self, k: usize, m: usize) -> usize {
        self.alpha_1(k, m) + self.n_e
    }

    /// `ι(γ) = (((γ−1) mod 2N_e) mod N_e) + 1`.
    pub fn iota_1(&self, gamma: usize) -> usize {
        ((gamma - 1) % (2 * self.n_e)) % self.n_e + 1
    }

    /// `κ(γ) = ⌊(γ−1) / 2N_e⌋ + 1`.
    pub fn kappa_1(&self, gamma: usize) -> usize {
        (gamma - 1) / (2 * self.n_e) + 1
    }

    /// 0-based block index of `α` (`second = false`) or `β` for 0-based
    /// page `k` and slot `m`.
    pub fn block(&self, k: usize, m: usize, second: bool) -> usize {
        2 * self.n_e * k + m + if second { self.n_e } else { 0 }
    }

    /// Entity slot `ι − 1` of 0-based block `g`.
    pub fn slot(&self, g: usize) -> usize {
        (g % (2 * self.n_e)) % self.n_e
    }

    /// Page `κ − 1` of 0-based block `g`.
    pub fn page(&self, g: usize) -> usize {
        g / (2 * self.n_e)
    }

    fn in_first_halfpage(&self, g: usize) -> bool {
        g % (2 * self.n_e) < self.n_e
    }

    /// Subject block: `p` when `γ ≡ i (mod N_e)`, else `q`.
    pub fn a_block(&self, i: usize, g: usize) -> BlockCode {
        // (γ mod N_e) = (i mod N_e) with γ = g+1, i = i0+1.
        if g % self.n_e == i {
            BlockCode::P
        } else {
            BlockCode::Q
        }
    }

    /// Object block: `p` when `x[ι(γ), j, κ(γ)] = 1`, else `r`.
    pub fn b_block(&self, x: &BoolTensor, j: usize, g: usize) -> BlockCode {
        if x.get(self.slot(g), j, self.page(g)) {
            BlockCode::P
        } else {
            BlockCode::R
        }
    }

    /// Relation block: `r` on any first halfpage or on the relation's own
    /// page, `−r` elsewhere.
    pub fn c_block(&self, k: usize, g: usize) -> BlockCode {
        if self.in_first_halfpage(g) || self.page(g) == k {
            BlockCode::R
        } else {
            BlockCode::NegR
        }
    }
}

fn write_block(m: &mut BitMatrix, row: usize, g: usize, block: BlockCode) {
    for (d, s) in block.signs().into_iter().enumerate() {
        m.set(row, 4 * g + d, s);
    }
}

/// Read block `g` of `row`; `None` if it is not one of `p, q, r, −r`.
pub fn decode_block(m: &BitMatrix, row: usize, g: usize) -> Option<BlockCode> {
    let s = [0, 1, 2, 3].map(|d| m.get(row, 4 * g + d));
    BlockCode::from_signs(s)
}

/// Build the exact decomposition of `x` with `D = 8·N_e·N_r`.
pub fn encode(x: &BoolTensor, delta: f64) -> Result<BinaryFactors> {
    let layout = EncoderLayout::new(x.n_entities(), x.n_relations())?;
    let (n_e, n_r, dim) = (layout.n_e, layout.n_r, layout.dim());
    let mut a = BitMatrix::zeros(n_e, dim);
    let mut b = BitMatrix::zeros(n_e, dim);
    let mut c = BitMatrix::zeros(n_r, dim);
    for g in 0..layout.blocks() {
        for e in 0..n_e {
            write_block(&mut a, e, g, layout.a_block(e, g));
            write_block(&mut b, e, g, layout.b_block(x, e, g));
        }
        for k in 0..n_r {
            write_block(&mut c, k, g, layout.c_block(k, g));
        }
    }
    BinaryFactors::new(a, Some(b), c, delta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mismatch {
    pub subject: usize,
    pub object: usize,
    pub relation: usize,
    pub expected: bool,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport {
    pub checked: usize,
    pub mismatches: Vec<Mismatch>,
}

impl ReconstructionReport {
    pub fn is_exact(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Score every `(i, j, k)` with the bitwise kernel and compare against the
/// tensor entry (exact floating-point equality with 0 or 1).
pub fn verify_reconstruction(f: &BinaryFactors, x: &BoolTensor) -> Result<ReconstructionReport> {
    if f.n_entities() != x.n_entities() {
        return Err(Error::ShapeMismatch {
            what: "entity count",
            expected: x.n_entities(),
            found: f.n_entities(),
        });
    }
    if f.n_relations() != x.n_relations() {
        return Err(Error::ShapeMismatch {
            what: "relation count",
            expected: x.n_relations(),
            found: f.n_relations(),
        });
    }
    if f.delta() != Some(EXACT_DELTA) {
        log::warn!(
            "verifying with scale {:?}; exact 0/1 reconstruction needs Δ = {EXACT_DELTA}",
            f.scale()
        );
    }
    let mut report = ReconstructionReport {
        checked: 0,
        mismatches: Vec::new(),
    };
    for i in 0..x.n_entities() {
        for j in 0..x.n_entities() {
            for k in 0..x.n_relations() {
                let score = f.score_bitwise_unchecked(i, j, k);
                let expected = x.get(i, j, k);
                report.checked += 1;
                if score != if expected { 1.0 } else { 0.0 } {
                    report.mismatches.push(Mismatch {
                        subject: i,
                        object: j,
                        relation: k,
                        expected,
                        score,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Statements checked by [`check_lemma_structure`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clause {
    /// Every block is one of `p, q, r, −r` and `D = 8·N_e·N_r`.
    BlockShape,
    /// `a_{iγ} = a_{i,γ+N_e}`.
    SubjectPeriod,
    /// `a_{i,α(k,i)} = p`.
    SubjectOwnSlot,
    /// `a_{i,α(k,m')} = q` for `m' ≠ i`.
    SubjectForeignSlot,
    /// `b_{j,α(k,m)} = b_{j,β(k,m)}`.
    ObjectHalfpages,
    /// `c_{k,α(k,m)} = c_{k,β(k,m)} = r`.
    RelationOwnPage,
    /// `c_{k,α(n',m)} = −c_{k,β(n',m)}` for `n' ≠ k`.
    RelationForeignPage,
    /// The `α(k,i)` and `β(k,i)` terms of a score are equal.
    EqualOwnTerms,
    /// Foreign-page `α`/`β` term pairs cancel.
    ForeignPairCancels,
    /// All terms except `α(k,i)`, `β(k,i)` sum to zero.
    RemainderVanishes,
    /// `θ_ijk = 2·(a_{iα(k,i)} ∘ b_{jα(k,i)}) c_{kα(k,i)}ᵀ`.
    ScoreBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaViolation {
    pub clause: Clause,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LemmaReport {
    pub checks: usize,
    pub violations: Vec<LemmaViolation>,
}

impl LemmaReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations_of(&self, clause: Clause) -> usize {
        self.violations.iter().filter(|v| v.clause == clause).count()
    }

    fn check(&mut self, ok: bool, clause: Clause, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations.push(LemmaViolation {
                clause,
                detail: detail(),
            });
        }
    }
}

/// Blockwise audit of factors produced by [`encode`]. Indices in violation
/// details are 0-based.
pub fn check_lemma_structure(f: &BinaryFactors, layout: &EncoderLayout) -> Result<LemmaReport> {
    let mut report = LemmaReport::default();
    let delta = f.delta().ok_or_else(|| {
        Error::InvalidConfig("lemma checks need uniformly scaled factors".into())
    })?;
    let (n_e, n_r) = (layout.n_e, layout.n_r);
    report.check(
        f.dim() == layout.dim() && f.n_entities() == n_e && f.n_relations() == n_r,
        Clause::BlockShape,
        || format!("factors are {}x{}x{} with D={}", f.n_entities(), f.n_entities(), f.n_relations(), f.dim()),
    );
    if !report.holds() {
        return Ok(report);
    }

    let decode = |m: &BitMatrix, rows: usize| -> Vec<Vec<Option<BlockCode>>> {
        (0..rows)
            .map(|r| (0..layout.blocks()).map(|g| decode_block(m, r, g)).collect())
            .collect()
    };
    let a = decode(f.a(), n_e);
    let b = decode(f.b(), n_e);
    let c = decode(f.c(), n_r);
    for (name, m) in [("A", &a), ("B", &b), ("C", &c)] {
        for (r, row) in m.iter().enumerate() {
            for (g, blk) in row.iter().enumerate() {
                report.check(blk.is_some(), Clause::BlockShape, || {
                    format!("{name} row {r} block {g} is not p, q, r or -r")
                });
            }
        }
    }
    if !report.holds() {
        return Ok(report);
    }
    let a: Vec<Vec<BlockCode>> = a.into_iter().map(|r| r.into_iter().flatten().collect()).collect();
    let b: Vec<Vec<BlockCode>> = b.into_iter().map(|r| r.into_iter().flatten().collect()).collect();
    let c: Vec<Vec<BlockCode>> = c.into_iter().map(|r| r.into_iter().flatten().collect()).collect();
    let term = |i: usize, j: usize, k: usize, g: usize| {
        BlockCode::triple_product(a[i][g], b[j][g], c[k][g], delta)
    };
    let blk = |k: usize, m: usize, second: bool| layout.block(k, m, second);

    for i in 0..n_e {
        for g in 0..(2 * n_r - 1) * n_e {
            report.check(a[i][g] == a[i][g + n_e], Clause::SubjectPeriod, || {
                format!("a[{i}] block {g} != block {}", g + n_e)
            });
        }
        for k in 0..n_r {
            report.check(a[i][blk(k, i, false)] == BlockCode::P, Clause::SubjectOwnSlot, || {
                format!("a[{i}] at alpha({k},{i}) is {}", a[i][blk(k, i, false)])
            });
            for m in (0..n_e).filter(|&m| m != i) {
                report.check(a[i][blk(k, m, false)] == BlockCode::Q, Clause::SubjectForeignSlot, || {
                    format!("a[{i}] at alpha({k},{m}) is {}", a[i][blk(k, m, false)])
                });
            }
        }
    }
    for (j, row) in b.iter().enumerate() {
        for k in 0..n_r {
            for m in 0..n_e {
                report.check(
                    row[blk(k, m, false)] == row[blk(k, m, true)],
                    Clause::ObjectHalfpages,
                    || format!("b[{j}] differs between alpha({k},{m}) and beta({k},{m})"),
                );
            }
        }
    }
    for (k, row) in c.iter().enumerate() {
        for m in 0..n_e {
            report.check(
                row[blk(k, m, false)] == BlockCode::R && row[blk(k, m, true)] == BlockCode::R,
                Clause::RelationOwnPage,
                || format!("c[{k}] own page slot {m} is not r/r"),
            );
            for n in (0..n_r).filter(|&n| n != k) {
                let (x, y) = (row[blk(n, m, false)], row[blk(n, m, true)]);
                let negated = matches!((x, y), (BlockCode::R, BlockCode::NegR) | (BlockCode::NegR, BlockCode::R));
                report.check(negated, Clause::RelationForeignPage, || {
                    format!("c[{k}] page {n} slot {m}: {x} vs {y}")
                });
            }
        }
    }

    for i in 0..n_e {
        for j in 0..n_e {
            for k in 0..n_r {
                let own_a = blk(k, i, false);
                let own_b = blk(k, i, true);
                let t_alpha = term(i, j, k, own_a);
                report.check(t_alpha == term(i, j, k, own_b), Clause::EqualOwnTerms, || {
                    format!("({i},{j},{k}): alpha term {t_alpha} != beta term {}", term(i, j, k, own_b))
                });
                for n in (0..n_r).filter(|&n| n != k) {
                    for m in 0..n_e {
                        let s = term(i, j, k, blk(n, m, false)) + term(i, j, k, blk(n, m, true));
                        report.check(s == 0.0, Clause::ForeignPairCancels, || {
                            format!("({i},{j},{k}) page {n} slot {m}: pair sums to {s}")
                        });
                    }
                }
                let remainder: f64 = (0..layout.blocks())
                    .filter(|&g| g != own_a && g != own_b)
                    .map(|g| term(i, j, k, g))
                    .sum();
                report.check(remainder == 0.0, Clause::RemainderVanishes, || {
                    format!("({i},{j},{k}): remainder {remainder}")
                });
                let theta = f.score_bitwise_unchecked(i, j, k);
                report.check(theta == 2.0 * t_alpha, Clause::ScoreBreakdown, || {
                    format!("({i},{j},{k}): score {theta} != 2 x {t_alpha}")
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_products_vanish() {
        for delta in [0.5, 0.3, 1.0, 2.0] {
            assert_eq!(BlockCode::triple_product(BlockCode::Q, BlockCode::P, BlockCode::R, delta), 0.0);
            assert_eq!(BlockCode::triple_product(BlockCode::Q, BlockCode::R, BlockCode::R, delta), 0.0);
        }
        assert_eq!(BlockCode::triple_product(BlockCode::P, BlockCode::P, BlockCode::R, 0.5), 0.5);
        assert_eq!(BlockCode::triple_product(BlockCode::P, BlockCode::R, BlockCode::R, 0.5), 0.0);
    }

    #[test]
    fn block_expansion_at_half() {
        assert_eq!(BlockCode::P.values(0.5), [0.5, 0.5, -0.5, -0.5]);
        assert_eq!(BlockCode::Q.values(0.5), [0.5, -0.5, 0.5, -0.5]);
        assert_eq!(BlockCode::R.values(0.5), [0.5; 4]);
        assert_eq!(BlockCode::NegR.values(0.5), [-0.5; 4]);
        for b in BlockCode::ALL {
            assert_eq!(BlockCode::from_signs(b.signs()), Some(b));
        }
        assert_eq!(BlockCode::from_signs([false, true, true, true]), None);
    }

    #[test]
    fn smallest_instance() {
        let x = BoolTensor::from_values(1, 1, &[1]).unwrap();
        let f = encode(&x, EXACT_DELTA).unwrap();
        assert_eq!(f.dim(), 8);
        assert_eq!(f.score_bitwise(0, 0, 0).unwrap(), 1.0);
    }

    #[test]
    fn nonboolean_rejected() {
        assert!(BoolTensor::from_values(1, 1, &[2]).is_err());
        assert!(BoolTensor::from_values(1, 2, &[1]).is_err());
    }

    #[test]
    fn layout_addressing_round_trips() {
        let l = EncoderLayout::new(3, 2).unwrap();
        let mut seen = vec![0; l.blocks() + 1];
        for n in 1..=l.n_r {
            for m in 1..=l.n_e {
                for g in [l.alpha_1(n, m), l.beta_1(n, m)] {
                    seen[g] += 1;
                    assert_eq!(l.iota_1(g), m);
                    assert_eq!(l.kappa_1(g), n);
                    assert_eq!(l.slot(g - 1) + 1, m);
                    assert_eq!(l.page(g - 1) + 1, n);
                }
                assert_eq!(l.block(n - 1, m - 1, false) + 1, l.alpha_1(n, m));
                assert_eq!(l.block(n - 1, m - 1, true) + 1, l.beta_1(n, m));
            }
        }
        assert!(seen[1..].iter().all(|&c| c == 1));
    }

    #[test]
    fn all_zero_tensor_scores_zero() {
        let x = BoolTensor::zeros(3, 2);
        let f = encode(&x, EXACT_DELTA).unwrap();
        let report = verify_reconstruction(&f, &x).unwrap();
        assert!(report.is_exact());
        assert_eq!(report.checked, 18);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..2 {
                    assert_eq!(f.score_bitwise(i, j, k).unwrap(), 0.0);
                }
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let f = encode(&BoolTensor::zeros(2, 1), EXACT_DELTA).unwrap();
        assert!(verify_reconstruction(&f, &BoolTensor::zeros(3, 1)).is_err());
        assert!(verify_reconstruction(&f, &BoolTensor::zeros(2, 2)).is_err());
    }

    #[test]
    fn other_delta_scales_scores() {
        let x = BoolTensor::from_values(1, 1, &[1]).unwrap();
        let f = encode(&x, 1.0).unwrap();
        // (2Δ)³ = 8
        assert_eq!(f.score_bitwise(0, 0, 0).unwrap(), 8.0);
        assert!(!verify_reconstruction(&f, &x).unwrap().is_exact());
    }
}
