//! Skew-symmetric coefficient sources `a_ki` and their class detection.
//!
//! Matrices are infinite, so they are represented as pure functions of the
//! index pair. Only the strict upper triangle is ever evaluated; the lower
//! triangle is its negation and the diagonal is zero, so antisymmetry holds
//! by construction.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Antisymmetry tolerance for user-supplied finite blocks.
pub const SKEW_TOL: f64 = 1e-15;

/// Serializable description of a coefficient source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixDescriptor {
    /// `a_ki = c` for every `k < i`.
    Constant { c: f64 },
    /// Upper entries drawn uniformly from `(lo, hi]` by a counter-based
    /// generator keyed on `(seed, k, i)`.
    Random { seed: u64, lo: f64, hi: f64 },
    /// Finite skew block `A` on indices `1..k0`, zero coupling, then `B`
    /// re-indexed to start at `k0 = dim(A) + 1`.
    Tilde {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Box<MatrixDescriptor>,
    },
    /// Explicit entries `[k, i, a_ki]`; unspecified pairs are zero.
    Table { entries: Vec<(usize, usize, f64)> },
    /// `a_ki = inner(k + offset, i + offset)`.
    Shifted {
        offset: usize,
        inner: Box<MatrixDescriptor>,
    },
}

#[derive(Debug)]
enum Source {
    Constant(f64),
    Random {
        seed: u64,
        lo: f64,
        hi: f64,
    },
    Tilde {
        head: Vec<Vec<f64>>,
        tail: SkewMatrix,
    },
    Table(BTreeMap<(usize, usize), f64>),
    Shifted {
        offset: usize,
        inner: SkewMatrix,
    },
}

/// A validated skew-symmetric coefficient source with `|a_ki| ≤ 1`.
///
/// Cheap to clone and safe to query concurrently.
#[derive(Debug, Clone)]
pub struct SkewMatrix {
    source: Arc<Source>,
    declared_dim: Option<usize>,
}

fn check_coefficient(a: f64, what: &str) -> Result<()> {
    if a.is_finite() && a.abs() <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidRange(format!("{what} = {a}")))
    }
}

impl SkewMatrix {
    fn from_source(source: Source, declared_dim: Option<usize>) -> Self {
        Self {
            source: Arc::new(source),
            declared_dim,
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        check_coefficient(c, "c")?;
        Ok(Self::from_source(Source::Constant(c), None))
    }

    /// The worked cascade example: `a_ki = −1` for all `k < i`.
    pub fn cascade() -> Self {
        Self::from_source(Source::Constant(-1.0), None)
    }

    /// All coefficients zero; the operator is the identity.
    pub fn zero() -> Self {
        Self::from_source(Source::Constant(0.0), None)
    }

    pub fn random(seed: u64, lo: f64, hi: f64) -> Result<Self> {
        check_coefficient(lo, "lo")?;
        check_coefficient(hi, "hi")?;
        if lo > hi {
            return Err(Error::InvalidRange(format!("lo = {lo} > hi = {hi}")));
        }
        Ok(Self::from_source(Source::Random { seed, lo, hi }, None))
    }

    /// Block matrix `[[A, O], [O, B]]` with `A` of size `(k0 − 1) × (k0 − 1)`.
    /// An empty `A` gives `k0 = 1`, i.e. `B` itself.
    pub fn tilde(a: Vec<Vec<f64>>, b: SkewMatrix) -> Result<Self> {
        let n = a.len();
        for (k, row) in a.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSkew(format!(
                    "row {} has {} entries, expected {n}",
                    k + 1,
                    row.len()
                )));
            }
        }
        #[allow(clippy::needless_range_loop)] // a[k][i] against a[i][k]
        for k in 0..n {
            for i in 0..n {
                check_coefficient(a[k][i], &format!("A[{}][{}]", k + 1, i + 1))?;
                if (a[k][i] + a[i][k]).abs() > SKEW_TOL {
                    return Err(Error::NotSkew(format!(
                        "A[{}][{}] = {} but A[{}][{}] = {}",
                        k + 1,
                        i + 1,
                        a[k][i],
                        i + 1,
                        k + 1,
                        a[i][k]
                    )));
                }
            }
        }
        Ok(Self::from_source(Source::Tilde { head: a, tail: b }, None))
    }

    /// Explicit entries `(k, i, a_ki)`. Either orientation may be given;
    /// giving both requires exact negation.
    pub fn table<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut map = BTreeMap::new();
        let mut dim = 0;
        for (k, i, a) in entries {
            if k == 0 || i == 0 {
                return Err(Error::InvalidPoint(format!(
                    "table index ({k}, {i}); indices are 1-based"
                )));
            }
            check_coefficient(a, &format!("a[{k}][{i}]"))?;
            dim = dim.max(k).max(i);
            if k == i {
                if a != 0.0 {
                    return Err(Error::NotSkew(format!("diagonal a[{k}][{k}] = {a}")));
                }
                continue;
            }
            let (key, upper) = if k < i { ((k, i), a) } else { ((i, k), -a) };
            if let Some(prev) = map.insert(key, upper) {
                if prev != upper {
                    return Err(Error::NotSkew(format!(
                        "conflicting entries for pair ({}, {})",
                        key.0, key.1
                    )));
                }
            }
        }
        Ok(Self::from_source(Source::Table(map), Some(dim)))
    }

    /// `a_ki ↦ a_{k+offset, i+offset}`.
    pub fn shifted(&self, offset: usize) -> Self {
        if offset == 0 {
            return self.clone();
        }
        Self::from_source(
            Source::Shifted {
                offset,
                inner: self.clone(),
            },
            self.declared_dim.map(|d| d.saturating_sub(offset)),
        )
    }

    pub fn from_descriptor(desc: &MatrixDescriptor) -> Result<Self> {
        match desc {
            MatrixDescriptor::Constant { c } => Self::constant(*c),
            MatrixDescriptor::Random { seed, lo, hi } => Self::random(*seed, *lo, *hi),
            MatrixDescriptor::Tilde { a, b } => Self::tilde(a.clone(), Self::from_descriptor(b)?),
            MatrixDescriptor::Table { entries } => Self::table(entries.iter().copied()),
            MatrixDescriptor::Shifted { offset, inner } => {
                Ok(Self::from_descriptor(inner)?.shifted(*offset))
            }
        }
    }

    pub fn descriptor(&self) -> MatrixDescriptor {
        match &*self.source {
            Source::Constant(c) => MatrixDescriptor::Constant { c: *c },
            Source::Random { seed, lo, hi } => MatrixDescriptor::Random {
                seed: *seed,
                lo: *lo,
                hi: *hi,
            },
            Source::Tilde { head, tail } => MatrixDescriptor::Tilde {
                a: head.clone(),
                b: Box::new(tail.descriptor()),
            },
            Source::Table(map) => MatrixDescriptor::Table {
                entries: map.iter().map(|(&(k, i), &a)| (k, i, a)).collect(),
            },
            Source::Shifted { offset, inner } => MatrixDescriptor::Shifted {
                offset: *offset,
                inner: Box::new(inner.descriptor()),
            },
        }
    }

    pub fn declared_dim(&self) -> Option<usize> {
        self.declared_dim
    }

    /// Size of the explicit head block for tilde sources (`k0 − 1`).
    pub fn tilde_head_len(&self) -> Option<usize> {
        match &*self.source {
            Source::Tilde { head, .. } => Some(head.len()),
            _ => None,
        }
    }

    /// The coefficient `a_ki` (1-based indices).
    pub fn entry(&self, k: usize, i: usize) -> f64 {
        debug_assert!(k >= 1 && i >= 1);
        if k == i {
            0.0
        } else if k < i {
            self.upper(k, i)
        } else {
            -self.upper(i, k)
        }
    }

    /// `a_ki` for `k < i`.
    fn upper(&self, k: usize, i: usize) -> f64 {
        match &*self.source {
            Source::Constant(c) => *c,
            Source::Random { seed, lo, hi } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(((k as u64) << 32) ^ (i as u64));
                // gen::<f64>() is in [0, 1); flip to (0, 1] so `hi` is attainable
                // and a strictly signed range never yields exactly 0.
                let u = 1.0 - rng.gen::<f64>();
                (lo + (hi - lo) * u).clamp(*lo, *hi)
            }
            Source::Tilde { head, tail } => {
                let k0 = head.len() + 1;
                if i < k0 {
                    head[k - 1][i - 1]
                } else if k < k0 {
                    0.0
                } else {
                    tail.entry(k - head.len(), i - head.len())
                }
            }
            Source::Table(map) => map.get(&(k, i)).copied().unwrap_or(0.0),
            Source::Shifted { offset, inner } => inner.entry(k + offset, i + offset),
        }
    }

    /// Upper triangle on `1..=dim`, row-major `dim × dim` with the lower
    /// triangle filled by negation.
    pub fn materialize(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim * dim];
        for k in 1..=dim {
            for i in (k + 1)..=dim {
                let a = self.upper(k, i);
                out[(k - 1) * dim + (i - 1)] = a;
                out[(i - 1) * dim + (k - 1)] = -a;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum ClassTag {
    Identity,
    Aplus,
    Aminus,
    TildePlus { k0: usize },
    TildeMinus { k0: usize },
    General,
}

impl ClassTag {
    /// Window-certified membership in V⁺ (identity included).
    pub fn is_plus(self) -> bool {
        matches!(self, ClassTag::Identity | ClassTag::Aplus)
    }

    pub fn is_minus(self) -> bool {
        matches!(self, ClassTag::Identity | ClassTag::Aminus)
    }

    pub fn tilde_k0(self) -> Option<usize> {
        match self {
            ClassTag::TildePlus { k0 } | ClassTag::TildeMinus { k0 } => Some(k0),
            _ => None,
        }
    }
}

/// One probed coefficient `a_ki`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub k: usize,
    pub i: usize,
    pub value: f64,
}

/// Classification of a matrix, certified on the window `1..=scan_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixClass {
    pub tag: ClassTag,
    pub scan_dim: usize,
    pub certificate: Vec<Probe>,
}

/// Dense upper-triangle view used by the scan.
struct Window {
    dim: usize,
    a: Vec<f64>,
}

impl Window {
    fn at(&self, k: usize, i: usize) -> f64 {
        self.a[(k - 1) * self.dim + (i - 1)]
    }

    fn probe(&self, k: usize, i: usize) -> Probe {
        Probe {
            k,
            i,
            value: self.at(k, i),
        }
    }

    /// Extreme upper entry over pairs `lo ≤ k < i ≤ dim` by `pick`.
    fn extreme(&self, lo: usize, pick: impl Fn(f64, f64) -> bool) -> Option<Probe> {
        let mut best: Option<Probe> = None;
        for k in lo..=self.dim {
            for i in (k + 1)..=self.dim {
                let p = self.probe(k, i);
                if best.is_none_or(|b| pick(p.value, b.value)) {
                    best = Some(p);
                }
            }
        }
        best
    }

    fn coupling_is_zero(&self, k0: usize) -> bool {
        (1..k0).all(|k| (k0..=self.dim).all(|i| self.at(k, i) == 0.0))
    }

    fn tail_sign(&self, k0: usize) -> (bool, bool) {
        let mut nonneg = true;
        let mut nonpos = true;
        for k in k0..=self.dim {
            for i in (k + 1)..=self.dim {
                let a = self.at(k, i);
                nonneg &= a >= 0.0;
                nonpos &= a <= 0.0;
            }
        }
        (nonneg, nonpos)
    }
}

/// Classifies `m` by exhaustive scan of every pair `k < i ≤ scan_dim`.
///
/// Returns the most specific tag consistent with the window. Zero entries
/// count as both nonnegative and nonpositive. For tilde tags the smallest
/// admissible `k0 ≥ 2` is reported, preferring the `+` variant when the
/// tail block is entirely zero.
pub fn classify(m: &SkewMatrix, scan_dim: usize) -> Result<MatrixClass> {
    if scan_dim < 2 {
        return Err(Error::ScanDimTooSmall(scan_dim));
    }
    let w = Window {
        dim: scan_dim,
        a: m.materialize(scan_dim),
    };
    let (nonneg, nonpos) = w.tail_sign(1);
    let class = |tag, certificate| MatrixClass {
        tag,
        scan_dim,
        certificate,
    };

    if nonneg && nonpos {
        return Ok(class(ClassTag::Identity, vec![]));
    }
    if nonneg {
        let min = w.extreme(1, |a, b| a < b).into_iter().collect();
        return Ok(class(ClassTag::Aplus, min));
    }
    if nonpos {
        let max = w.extreme(1, |a, b| a > b).into_iter().collect();
        return Ok(class(ClassTag::Aminus, max));
    }

    for k0 in 2..=scan_dim {
        if !w.coupling_is_zero(k0) {
            continue;
        }
        let (plus, minus) = w.tail_sign(k0);
        let witness = |pick: fn(f64, f64) -> bool| w.extreme(k0, pick).into_iter().collect();
        if plus {
            return Ok(class(ClassTag::TildePlus { k0 }, witness(|a, b| a < b)));
        }
        if minus {
            return Ok(class(ClassTag::TildeMinus { k0 }, witness(|a, b| a > b)));
        }
    }

    let pos = w.extreme(1, |a, b| a > b).expect("scan_dim >= 2");
    let neg = w.extreme(1, |a, b| a < b).expect("scan_dim >= 2");
    Ok(class(ClassTag::General, vec![pos, neg]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_minus_one_is_aminus() {
        let c = classify(&SkewMatrix::cascade(), 50).unwrap();
        assert_eq!(c.tag, ClassTag::Aminus);
        assert_eq!(c.scan_dim, 50);
    }

    #[test]
    fn zero_source_is_identity() {
        assert_eq!(
            classify(&SkewMatrix::zero(), 10).unwrap().tag,
            ClassTag::Identity
        );
    }

    #[test]
    fn tilde_block_detected_with_its_k0() {
        let a = vec![vec![0.0, -0.5], vec![0.5, 0.0]];
        let m = SkewMatrix::tilde(a, SkewMatrix::constant(1.0).unwrap()).unwrap();
        assert_eq!(classify(&m, 20).unwrap().tag, ClassTag::TildePlus { k0: 3 });
    }

    #[test]
    fn constant_antisymmetry() {
        let m = SkewMatrix::constant(-1.0).unwrap();
        assert_eq!(m.entry(2, 7), -1.0);
        assert_eq!(m.entry(7, 2), 1.0);
        assert_eq!(m.entry(4, 4), 0.0);
    }

    #[test]
    fn nonnegative_random_range_is_aplus() {
        let m = SkewMatrix::random(42, 0.0, 1.0).unwrap();
        assert_eq!(classify(&m, 100).unwrap().tag, ClassTag::Aplus);
    }

    #[test]
    fn tilde_null_coupling_block() {
        let m = SkewMatrix::tilde(vec![vec![0.0]], SkewMatrix::constant(-1.0).unwrap()).unwrap();
        assert_eq!(m.entry(1, 5), 0.0);
        assert_eq!(m.entry(2, 5), -1.0);
    }

    #[test]
    fn constructors_validate() {
        assert!(matches!(
            SkewMatrix::constant(1.5),
            Err(Error::InvalidRange(_))
        ));
        assert!(matches!(
            SkewMatrix::random(1, -2.0, 0.0),
            Err(Error::InvalidRange(_))
        ));
        assert!(matches!(
            SkewMatrix::random(1, 0.5, 0.1),
            Err(Error::InvalidRange(_))
        ));
        let bad = vec![vec![0.0, 0.5], vec![0.5, 0.0]];
        assert!(matches!(
            SkewMatrix::tilde(bad, SkewMatrix::zero()),
            Err(Error::NotSkew(_))
        ));
        let ragged = vec![vec![0.0, 0.5], vec![-0.5]];
        assert!(matches!(
            SkewMatrix::tilde(ragged, SkewMatrix::zero()),
            Err(Error::NotSkew(_))
        ));
        assert!(matches!(
            SkewMatrix::table([(1, 2, 0.5), (2, 1, 0.5)]),
            Err(Error::NotSkew(_))
        ));
        assert!(matches!(
            SkewMatrix::table([(3, 3, 0.1)]),
            Err(Error::NotSkew(_))
        ));
        assert!(classify(&SkewMatrix::zero(), 1).is_err());
    }

    #[test]
    fn table_accepts_either_orientation() {
        let m = SkewMatrix::table([(1, 2, 0.5), (3, 1, -0.25), (2, 1, -0.5)]).unwrap();
        assert_eq!(m.entry(1, 2), 0.5);
        assert_eq!(m.entry(1, 3), 0.25);
        assert_eq!(m.entry(3, 1), -0.25);
        assert_eq!(m.entry(2, 3), 0.0);
        assert_eq!(m.declared_dim(), Some(3));
    }

    #[test]
    fn general_matrix_has_two_witnesses() {
        let m = SkewMatrix::table([(1, 2, 0.5), (2, 3, -0.5), (1, 3, 0.2)]).unwrap();
        let c = classify(&m, 3).unwrap();
        assert_eq!(c.tag, ClassTag::General);
        assert_eq!(c.certificate.len(), 2);
        assert!(c.certificate[0].value > 0.0 && c.certificate[1].value < 0.0);
    }

    #[test]
    fn descriptor_round_trip() {
        let json = r#"{"kind":"tilde","A":[[0,-0.5],[0.5,0]],"B":{"kind":"random","seed":42,"lo":0,"hi":1}}"#;
        let d: MatrixDescriptor = serde_json::from_str(json).unwrap();
        let m = SkewMatrix::from_descriptor(&d).unwrap();
        assert_eq!(m.descriptor(), d);
        let m2 = SkewMatrix::from_descriptor(&m.descriptor()).unwrap();
        for k in 1..12 {
            for i in 1..12 {
                assert_eq!(m.entry(k, i).to_bits(), m2.entry(k, i).to_bits());
            }
        }
    }

    #[test]
    fn shifted_reads_the_tail_block() {
        let m = SkewMatrix::random(3, -1.0, 1.0).unwrap();
        let s = m.shifted(4);
        assert_eq!(s.entry(1, 3), m.entry(5, 7));
        assert_eq!(s.entry(6, 2), m.entry(10, 6));
    }

    #[test]
    fn general_never_returns_to_a_plain_class() {
        // a window that has lost A± cannot regain it
        let m = SkewMatrix::random(9, -1.0, 1.0).unwrap();
        let mut lost = false;
        for d in 2..60 {
            let tag = classify(&m, d).unwrap().tag;
            let plain = matches!(tag, ClassTag::Identity | ClassTag::Aplus | ClassTag::Aminus);
            if lost {
                assert!(!plain, "window {d} re-acquired {tag:?}");
            }
            lost |= !plain;
        }
        assert!(lost);
    }

    fn arb_matrix() -> impl Strategy<Value = SkewMatrix> {
        prop_oneof![
            (-1.0f64..=1.0).prop_map(|c| SkewMatrix::constant(c).unwrap()),
            (any::<u64>(), -1.0f64..=1.0, -1.0f64..=1.0)
                .prop_map(|(s, a, b)| { SkewMatrix::random(s, a.min(b), a.max(b)).unwrap() }),
            (any::<u64>(), 1usize..5, any::<bool>()).prop_map(|(s, n, plus)| {
                let inner = SkewMatrix::random(s ^ 0x5eed, -1.0, 1.0).unwrap();
                let a = (1..=n)
                    .map(|k| (1..=n).map(|i| inner.entry(k, i)).collect())
                    .collect();
                let tail = if plus {
                    SkewMatrix::random(s, 0.0, 1.0).unwrap()
                } else {
                    SkewMatrix::random(s, -1.0, 0.0).unwrap()
                };
                SkewMatrix::tilde(a, tail).unwrap()
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn entries_are_skew_and_bounded(m in arb_matrix(), probes in prop::collection::vec((1usize..500, 1usize..500), 160)) {
            for (k, i) in probes {
                let a = m.entry(k, i);
                prop_assert!(a.abs() <= 1.0);
                prop_assert_eq!(a, -m.entry(i, k));
                prop_assert_eq!(m.entry(k, k), 0.0);
                prop_assert_eq!(a.to_bits(), m.entry(k, i).to_bits());
            }
        }

        #[test]
        fn signed_random_ranges_classify(seed in any::<u64>(), d in 2usize..=200) {
            prop_assert_eq!(classify(&SkewMatrix::random(seed, 0.0, 1.0).unwrap(), d).unwrap().tag, ClassTag::Aplus);
            prop_assert_eq!(classify(&SkewMatrix::random(seed, -1.0, 0.0).unwrap(), d).unwrap().tag, ClassTag::Aminus);
        }

        /// Once a window rules out a candidate `k0`, larger windows rule it out too.
        #[test]
        fn tilde_candidates_only_shrink(m in arb_matrix(), d in 3usize..30) {
            let small = classify(&m, d).unwrap().tag;
            let large = classify(&m, d + 5).unwrap().tag;
            if let Some(k0) = large.tilde_k0() {
                if k0 <= d {
                    // k0 was admissible on the smaller window, so the smaller
                    // window found it or a smaller one (or a plain class)
                    let small_k0 = small.tilde_k0();
                    prop_assert!(small_k0.is_none_or(|s| s <= k0), "{small:?} vs {large:?}");
                    prop_assert!(small != ClassTag::General);
                }
            }
            if small == ClassTag::General {
                prop_assert!(large == ClassTag::General || large.tilde_k0().is_some_and(|k| k > d));
            }
        }
    }
}
