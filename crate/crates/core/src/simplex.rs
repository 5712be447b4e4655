//! Points of the nonnegative cone of ℓ¹ with finite support.
//!
//! Every simulated state has finite support, so a point is stored as the
//! ascending list of its nonzero coordinates. Indices are 1-based. The
//! zero point (empty support) is representable: it is the pointwise limit
//! of trajectories whose mass escapes to infinity.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kahan::{kahan_sum, KahanSum};

/// Roundoff allowance for "lies on S_r" predicates.
pub const TOL_MASS: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub struct SimplexPoint {
    coords: Vec<(usize, f64)>,
    mass: f64,
}

impl SimplexPoint {
    pub fn zero() -> Self {
        Self {
            coords: Vec::new(),
            mass: 0.0,
        }
    }

    /// The vertex `e_k`.
    ///
    /// Panics if `k == 0`; indices are 1-based.
    pub fn vertex(k: usize) -> Self {
        assert!(k >= 1, "indices are 1-based");
        Self {
            coords: vec![(k, 1.0)],
            mass: 1.0,
        }
    }

    /// Builds a point from `(index, value)` pairs in any order. Zero values
    /// are dropped; duplicate or zero indices and negative or non-finite
    /// values are rejected.
    pub fn from_sparse<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut coords: Vec<(usize, f64)> = pairs.into_iter().collect();
        coords.sort_by_key(|&(k, _)| k);
        for w in coords.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidPoint(format!("duplicate index {}", w[0].0)));
            }
        }
        for &(k, v) in &coords {
            if k == 0 {
                return Err(Error::InvalidPoint("index 0 (indices are 1-based)".into()));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidPoint(format!("coordinate {k} = {v}")));
            }
        }
        coords.retain(|&(_, v)| v != 0.0);
        Ok(Self::from_canonical(coords))
    }

    /// Dense literal: `values[j]` is coordinate `j + 1`.
    pub fn from_dense(values: &[f64]) -> Result<Self> {
        Self::from_sparse(values.iter().enumerate().map(|(j, &v)| (j + 1, v)))
    }

    /// Uniform distribution over the given indices.
    pub fn uniform<I: IntoIterator<Item = usize>>(support: I) -> Result<Self> {
        let support: Vec<usize> = support.into_iter().collect();
        if support.is_empty() {
            return Err(Error::EmptySupport);
        }
        let w = 1.0 / support.len() as f64;
        Self::from_sparse(support.into_iter().map(|k| (k, w)))
    }

    /// `x_k ∝ 2^{-k}` for `k ≤ len`, placed on S.
    pub fn geometric(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::EmptySupport);
        }
        let raw = Self::from_sparse((1..=len).map(|k| (k, pow2_neg(k))))?;
        raw.renormalize(1.0)
    }

    /// Trusts the caller: ascending indices, positive finite values.
    pub(crate) fn from_canonical(coords: Vec<(usize, f64)>) -> Self {
        debug_assert!(coords.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(coords.iter().all(|&(k, v)| k >= 1 && v > 0.0));
        let mass = kahan_sum(coords.iter().map(|&(_, v)| v));
        Self { coords, mass }
    }

    pub fn get(&self, k: usize) -> f64 {
        match self.coords.binary_search_by_key(&k, |&(i, _)| i) {
            Ok(pos) => self.coords[pos].1,
            Err(_) => 0.0,
        }
    }

    /// Nonzero coordinates in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coords.iter().copied()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Number of nonzero coordinates.
    #[allow(clippy::len_without_is_empty)] // emptiness is `is_zero`
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coords.is_empty()
    }

    /// Largest stored index, 0 for the zero point.
    pub fn dim(&self) -> usize {
        self.coords.last().map_or(0, |&(k, _)| k)
    }

    pub fn support(&self) -> Vec<usize> {
        self.coords.iter().map(|&(k, _)| k).collect()
    }

    pub fn min_support(&self) -> Result<usize> {
        self.coords
            .first()
            .map(|&(k, _)| k)
            .ok_or(Error::EmptySupport)
    }

    pub fn max_support(&self) -> Result<usize> {
        self.coords
            .last()
            .map(|&(k, _)| k)
            .ok_or(Error::EmptySupport)
    }

    /// Index of the largest coordinate (smallest index on ties).
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &(k, v) in &self.coords {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        best.map(|(k, _)| k)
    }

    /// `|mass − 1| ≤ TOL_MASS`.
    pub fn is_on_simplex(&self) -> bool {
        self.is_on_sphere(1.0)
    }

    pub fn is_on_sphere(&self, r: f64) -> bool {
        (self.mass - r).abs() <= TOL_MASS
    }

    /// Returns `k` when the point is exactly `e_k`.
    pub fn as_vertex(&self) -> Option<usize> {
        match self.coords.as_slice() {
            [(k, v)] if *v == 1.0 => Some(*k),
            _ => None,
        }
    }

    /// Every index `1..=dim` carries a positive coordinate, i.e. the point
    /// lies in the relative interior of the face spanned by `e_1..e_dim`.
    pub fn is_relative_interior(&self, dim: usize) -> bool {
        self.coords.len() == dim && self.dim() == dim
    }

    /// Mass carried by indices `≤ probe`.
    pub fn window_mass(&self, probe: usize) -> f64 {
        kahan_sum(
            self.coords
                .iter()
                .take_while(|&&(k, _)| k <= probe)
                .map(|&(_, v)| v),
        )
    }

    /// Keeps only indices in `range`.
    pub fn restrict(&self, range: std::ops::RangeInclusive<usize>) -> Self {
        Self::from_canonical(
            self.coords
                .iter()
                .copied()
                .filter(|(k, _)| range.contains(k))
                .collect(),
        )
    }

    /// Re-indexes every coordinate by `k ↦ k − offset`; indices `≤ offset`
    /// are dropped.
    pub fn shift_down(&self, offset: usize) -> Self {
        Self::from_canonical(
            self.coords
                .iter()
                .filter(|&&(k, _)| k > offset)
                .map(|&(k, v)| (k - offset, v))
                .collect(),
        )
    }

    /// Scales the point so its mass equals `target_mass`.
    pub fn renormalize(&self, target_mass: f64) -> Result<Self> {
        if self.mass <= 0.0 {
            return Err(Error::ZeroMass);
        }
        if !(target_mass.is_finite() && target_mass > 0.0) {
            return Err(Error::InvalidPoint(format!("target mass {target_mass}")));
        }
        let scale = target_mass / self.mass;
        let coords = self
            .coords
            .iter()
            .map(|&(k, v)| (k, v * scale))
            .filter(|&(_, v)| v > 0.0)
            .collect();
        Ok(Self::from_canonical(coords))
    }
}

impl fmt::Debug for SimplexPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.coords.iter().map(|(k, v)| (k, v)))
            .finish()
    }
}

/// `2^{-k}`, flushing to 0 beyond the subnormal range.
pub(crate) fn pow2_neg(k: usize) -> f64 {
    if k > 1074 {
        0.0
    } else {
        (-(k as f64)).exp2()
    }
}

/// Walks the union of both supports in ascending order, yielding
/// `(index, a_k, b_k)`.
pub fn zip_union<'a>(
    a: &'a SimplexPoint,
    b: &'a SimplexPoint,
) -> impl Iterator<Item = (usize, f64, f64)> + 'a {
    let (mut i, mut j) = (0, 0);
    std::iter::from_fn(move || {
        let x = a.coords.get(i);
        let y = b.coords.get(j);
        match (x, y) {
            (None, None) => None,
            (Some(&(k, v)), None) => {
                i += 1;
                Some((k, v, 0.0))
            }
            (None, Some(&(k, w))) => {
                j += 1;
                Some((k, 0.0, w))
            }
            (Some(&(k, v)), Some(&(l, w))) => {
                if k == l {
                    i += 1;
                    j += 1;
                    Some((k, v, w))
                } else if k < l {
                    i += 1;
                    Some((k, v, 0.0))
                } else {
                    j += 1;
                    Some((l, 0.0, w))
                }
            }
        }
    })
}

/// `Σ_k |a_k − b_k|`.
pub fn l1_distance(a: &SimplexPoint, b: &SimplexPoint) -> f64 {
    kahan_sum(zip_union(a, b).map(|(_, x, y)| (x - y).abs()))
}

/// Pointwise metric `Σ_k 2^{-k} |a_k − b_k| / (1 + |a_k − b_k|)`.
///
/// Terms outside the union of supports vanish, so the sum over the union
/// is exact.
pub fn rho_distance(a: &SimplexPoint, b: &SimplexPoint) -> f64 {
    let mut acc = KahanSum::new();
    for (k, x, y) in zip_union(a, b) {
        let d = (x - y).abs();
        acc.add(pow2_neg(k) * d / (1.0 + d));
    }
    acc.value()
}

/// Accepted point literals: a dense list (`[v1, v2, …]`, index =
/// position), a sparse map (`{"3": 0.5, …}`), or a named family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointLiteral {
    Dense(Vec<f64>),
    Family(PointFamily),
    Sparse(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointFamily {
    /// Uniform weights on `from..=to`.
    Uniform {
        from: usize,
        to: usize,
    },
    /// `2^{-k}` on `1..=len`, renormalized onto S.
    Geometric {
        len: usize,
    },
    Vertex {
        index: usize,
    },
}

impl PointFamily {
    pub fn build(&self) -> Result<SimplexPoint> {
        match *self {
            PointFamily::Uniform { from, to } => {
                if from == 0 || from > to {
                    return Err(Error::InvalidPoint(format!("uniform range {from}..={to}")));
                }
                SimplexPoint::uniform(from..=to)
            }
            PointFamily::Geometric { len } => SimplexPoint::geometric(len),
            PointFamily::Vertex { index } => {
                if index == 0 {
                    return Err(Error::InvalidPoint("vertex index 0".into()));
                }
                Ok(SimplexPoint::vertex(index))
            }
        }
    }
}

impl PointLiteral {
    pub fn to_point(&self) -> Result<SimplexPoint> {
        match self {
            PointLiteral::Dense(values) => SimplexPoint::from_dense(values),
            PointLiteral::Family(family) => family.build(),
            PointLiteral::Sparse(map) => {
                let mut pairs = Vec::with_capacity(map.len());
                for (key, &v) in map {
                    let k: usize = key
                        .trim()
                        .parse()
                        .map_err(|_| Error::InvalidPoint(format!("index key {key:?}")))?;
                    pairs.push((k, v));
                }
                SimplexPoint::from_sparse(pairs)
            }
        }
    }
}

impl From<&SimplexPoint> for PointLiteral {
    fn from(x: &SimplexPoint) -> Self {
        PointLiteral::Sparse(x.iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

impl Serialize for SimplexPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.coords.len()))?;
        for (k, v) in &self.coords {
            map.serialize_entry(&k.to_string(), v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for SimplexPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let literal = PointLiteral::deserialize(deserializer)?;
        literal.to_point().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(values: &[f64]) -> SimplexPoint {
        SimplexPoint::from_dense(values).unwrap()
    }

    #[test]
    fn l1_examples() {
        assert_eq!(
            l1_distance(&SimplexPoint::vertex(1), &SimplexPoint::vertex(1)),
            0.0
        );
        assert_eq!(
            l1_distance(&SimplexPoint::vertex(1), &SimplexPoint::vertex(2)),
            2.0
        );
        assert_eq!(l1_distance(&pt(&[0.5, 0.5]), &pt(&[0.25, 0.75])), 0.5);
    }

    #[test]
    fn rho_examples() {
        let x = pt(&[0.2, 0.3, 0.5]);
        assert_eq!(rho_distance(&x, &x), 0.0);
        assert_eq!(
            rho_distance(&SimplexPoint::vertex(1), &SimplexPoint::zero()),
            0.25
        );
        assert_eq!(
            rho_distance(&SimplexPoint::vertex(2), &SimplexPoint::zero()),
            0.125
        );
    }

    #[test]
    fn support_queries() {
        let e5 = SimplexPoint::vertex(5);
        assert_eq!(e5.support(), vec![5]);
        assert_eq!(e5.min_support(), Ok(5));
        assert_eq!(e5.max_support(), Ok(5));

        let x = pt(&[0.0, 1.0 / 3.0, 0.0, 2.0 / 3.0]);
        assert_eq!(x.support(), vec![2, 4]);

        assert_eq!(SimplexPoint::zero().min_support(), Err(Error::EmptySupport));
        assert_eq!(SimplexPoint::zero().max_support(), Err(Error::EmptySupport));
    }

    #[test]
    fn renormalize_examples() {
        assert_eq!(pt(&[0.5, 0.5]).renormalize(1.0).unwrap(), pt(&[0.5, 0.5]));
        assert_eq!(pt(&[1.0, 1.0]).renormalize(1.0).unwrap(), pt(&[0.5, 0.5]));

        let raw = SimplexPoint::from_sparse((1..=8).map(|k| (k, pow2_neg(k)))).unwrap();
        let y = raw.renormalize(1.0).unwrap();
        let denom = 1.0 - pow2_neg(8);
        for k in 1..=8 {
            let expected = pow2_neg(k) / denom;
            assert!((y.get(k) - expected).abs() <= 1e-16 * expected.max(1.0));
        }
        assert!(y.is_on_simplex());
        assert_eq!(SimplexPoint::zero().renormalize(1.0), Err(Error::ZeroMass));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(SimplexPoint::from_sparse([(0, 0.5)]).is_err());
        assert!(SimplexPoint::from_sparse([(1, -0.5)]).is_err());
        assert!(SimplexPoint::from_sparse([(1, f64::NAN)]).is_err());
        assert!(SimplexPoint::from_sparse([(2, 0.5), (2, 0.5)]).is_err());
    }

    #[test]
    fn stored_zeros_are_dropped() {
        let x = pt(&[0.0, 0.5, 0.0, 0.5, 0.0]);
        assert_eq!(x.len(), 2);
        assert_eq!(x.dim(), 4);
        assert!(!x.is_relative_interior(4));
        assert!(pt(&[0.25, 0.75]).is_relative_interior(2));
    }

    #[test]
    fn literals_parse() {
        let dense: SimplexPoint = serde_json::from_str("[0.5, 0.5]").unwrap();
        let sparse: SimplexPoint = serde_json::from_str(r#"{"1": 0.5, "2": 0.5}"#).unwrap();
        assert_eq!(dense, sparse);
        let fam: SimplexPoint =
            serde_json::from_str(r#"{"family": "uniform", "from": 1, "to": 8}"#).unwrap();
        assert_eq!(fam.len(), 8);
        assert!(fam.is_on_simplex());
        assert!(serde_json::from_str::<SimplexPoint>(r#"{"x": 0.5}"#).is_err());
        assert!(serde_json::from_str::<SimplexPoint>("[0.5, -0.5]").is_err());
    }

    #[test]
    fn window_mass_and_shift() {
        let x = SimplexPoint::uniform(1..=4).unwrap();
        assert_eq!(x.window_mass(2), 0.5);
        let tail = x.shift_down(2);
        assert_eq!(tail.support(), vec![1, 2]);
        assert_eq!(x.restrict(1..=2).support(), vec![1, 2]);
    }

    fn arb_point() -> impl Strategy<Value = SimplexPoint> {
        prop::collection::btree_map(1usize..40, 0.0f64..1.0, 0..12).prop_map(|m| {
            let p = SimplexPoint::from_sparse(m).unwrap();
            if p.mass() > 0.0 {
                p.renormalize(1.0).unwrap()
            } else {
                p
            }
        })
    }

    proptest! {
        #[test]
        fn metric_axioms(a in arb_point(), b in arb_point(), c in arb_point()) {
            for d in [l1_distance, rho_distance] {
                prop_assert!(d(&a, &b) >= 0.0);
                prop_assert_eq!(d(&a, &b), d(&b, &a));
                prop_assert_eq!(d(&a, &a), 0.0);
                if a != b {
                    prop_assert!(d(&a, &b) > 0.0);
                }
                prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
            }
            prop_assert!(rho_distance(&a, &b) < 1.0);
        }

        #[test]
        fn rho_is_dominated_by_l1(a in arb_point(), b in arb_point()) {
            prop_assert!(rho_distance(&a, &b) <= l1_distance(&a, &b) + 1e-15);
        }

        #[test]
        fn json_round_trip(a in arb_point()) {
            let text = serde_json::to_string(&a).unwrap();
            let back: SimplexPoint = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back, a);
        }
    }

    /// Points approaching a vertex along a fixed sphere: ρ and ℓ¹ go to zero
    /// together.
    #[test]
    fn norm_and_pointwise_convergence_agree_on_a_sphere() {
        let target = SimplexPoint::vertex(3);
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for j in 1..40 {
            let t = 0.5f64.powi(j);
            let x = SimplexPoint::from_sparse([(3, 1.0 - t), (7, t / 2.0), (20, t / 2.0)]).unwrap();
            let (l1, rho) = (l1_distance(&x, &target), rho_distance(&x, &target));
            assert!(l1 < prev.0 && rho < prev.1);
            prev = (l1, rho);
        }
        assert!(prev.0 < 1e-10 && prev.1 < 1e-10);

        // A family escaping to infinity: ρ → 0 towards the zero point while ℓ¹ stays 1.
        for n in [10usize, 30, 60] {
            let x = SimplexPoint::vertex(n);
            assert_eq!(l1_distance(&x, &SimplexPoint::zero()), 1.0);
            assert!(rho_distance(&x, &SimplexPoint::zero()) <= pow2_neg(n));
        }
    }
}
