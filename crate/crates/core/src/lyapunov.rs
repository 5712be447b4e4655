//! Linear functionals `φ_b(x) = Σ_k b_k x_k` and their use as Lyapunov and
//! quasi-Lyapunov functions along Volterra trajectories.
//!
//! A coefficient sequence is a finite prefix followed by an analytic tail
//! rule, which keeps monotonicity and the `c₀` property exactly decidable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kahan::KahanSum;
use crate::matrix::{classify, ClassTag, MatrixClass, SkewMatrix};
use crate::operator::Trajectory;
use crate::simplex::{pow2_neg, SimplexPoint};

/// Slack on per-step monotonicity verdicts.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Default Cauchy-tail width under which a limit is declared to exist.
pub const EPS_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum TailRule {
    Constant {
        c: f64,
    },
    /// `b_k = 2^{-k}`.
    Geometric,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalDescriptor {
    /// Ones on `1..=m`, geometric tail.
    Bm {
        m: usize,
    },
    /// `1/k` on `1..=n`, zero tail.
    Harmonic {
        n: usize,
    },
    /// `2 − 1/k` on `1..=i0`, then constant `2 − 1/i0`.
    Increasing {
        i0: usize,
    },
    Prefix {
        values: Vec<f64>,
        tail: TailRule,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FunctionalFlags {
    pub is_increasing: bool,
    pub is_decreasing: bool,
    pub is_c0: bool,
    pub is_nonneg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFunctional {
    prefix: Vec<f64>,
    tail: TailRule,
    sup_norm: f64,
    flags: FunctionalFlags,
}

impl LinearFunctional {
    pub fn new(prefix: Vec<f64>, tail: TailRule) -> Result<Self> {
        if let Some(v) = prefix.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidFunctional(format!("coefficient {v}")));
        }
        if let TailRule::Constant { c } = tail {
            if !c.is_finite() {
                return Err(Error::InvalidFunctional(format!("tail constant {c}")));
            }
        }
        let mut f = Self {
            prefix,
            tail,
            sup_norm: 0.0,
            flags: FunctionalFlags {
                is_increasing: false,
                is_decreasing: false,
                is_c0: false,
                is_nonneg: false,
            },
        };
        f.sup_norm = f.compute_sup_norm();
        f.flags = f.compute_flags();
        Ok(f)
    }

    /// `b^[m]`: ones up to `m`, then `2^{-k}`.
    pub fn bm(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidFunctional("m must be at least 1".into()));
        }
        Self::new(vec![1.0; m], TailRule::Geometric)
    }

    /// `b^{(n)}`: `1/k` up to `n`, then zero.
    pub fn harmonic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidFunctional("n must be at least 1".into()));
        }
        Self::new((1..=n).map(|k| 1.0 / k as f64).collect(), TailRule::Zero)
    }

    /// Bounded increasing sequence `2 − 1/k` frozen after `i0`.
    pub fn increasing_bounded(i0: usize) -> Result<Self> {
        if i0 == 0 {
            return Err(Error::InvalidFunctional("i0 must be at least 1".into()));
        }
        let prefix: Vec<f64> = (1..=i0).map(|k| 2.0 - 1.0 / k as f64).collect();
        let c = 2.0 - 1.0 / i0 as f64;
        Self::new(prefix, TailRule::Constant { c })
    }

    pub fn from_descriptor(desc: &FunctionalDescriptor) -> Result<Self> {
        match desc {
            FunctionalDescriptor::Bm { m } => Self::bm(*m),
            FunctionalDescriptor::Harmonic { n } => Self::harmonic(*n),
            FunctionalDescriptor::Increasing { i0 } => Self::increasing_bounded(*i0),
            FunctionalDescriptor::Prefix { values, tail } => Self::new(values.clone(), *tail),
        }
    }

    pub fn coefficient(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        if k <= self.prefix.len() {
            return self.prefix[k - 1];
        }
        match self.tail {
            TailRule::Constant { c } => c,
            TailRule::Geometric => pow2_neg(k),
            TailRule::Zero => 0.0,
        }
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    pub fn tail(&self) -> TailRule {
        self.tail
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn flags(&self) -> FunctionalFlags {
        self.flags
    }

    fn compute_sup_norm(&self) -> f64 {
        let head = self.prefix.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tail = match self.tail {
            TailRule::Constant { c } => c.abs(),
            TailRule::Geometric => pow2_neg(self.prefix.len() + 1),
            TailRule::Zero => 0.0,
        };
        head.max(tail)
    }

    fn compute_flags(&self) -> FunctionalFlags {
        let n = self.prefix.len();
        let first_tail = self.coefficient(n + 1);
        let join = self.prefix.last().copied();

        let prefix_up = self.prefix.windows(2).all(|w| w[0] <= w[1]);
        let prefix_down = self.prefix.windows(2).all(|w| w[0] >= w[1]);
        let (tail_up, tail_down) = match self.tail {
            TailRule::Geometric => (false, true),
            TailRule::Constant { .. } | TailRule::Zero => (true, true),
        };
        FunctionalFlags {
            is_increasing: prefix_up && tail_up && join.is_none_or(|b| b <= first_tail),
            is_decreasing: prefix_down && tail_down && join.is_none_or(|b| b >= first_tail),
            is_c0: match self.tail {
                TailRule::Geometric | TailRule::Zero => true,
                TailRule::Constant { c } => c == 0.0,
            },
            is_nonneg: self.prefix.iter().all(|&v| v >= 0.0) && first_tail >= 0.0,
        }
    }

    /// `φ_b(x) = Σ_{k ∈ supp x} b_k x_k`.
    pub fn phi(&self, x: &SimplexPoint) -> f64 {
        let mut acc = KahanSum::new();
        for (k, v) in x.iter() {
            acc.add(self.coefficient(k) * v);
        }
        acc.value()
    }

    /// Smallest `N` with `|b_n| < eps` for every `n ≥ N`, computed from the
    /// tail rule; `None` when the tail never drops below `eps`.
    pub fn c0_rank(&self, eps: f64) -> Option<usize> {
        let len = self.prefix.len();
        let last_bad_prefix = self
            .prefix
            .iter()
            .rposition(|v| v.abs() >= eps)
            .map(|p| p + 1);
        let last_bad_tail = match self.tail {
            TailRule::Zero => None,
            TailRule::Constant { c } if c.abs() < eps => None,
            TailRule::Constant { .. } => return None,
            TailRule::Geometric => {
                // largest n with 2^{-n} >= eps
                let mut n = (1.0 / eps).log2().floor().max(0.0) as usize;
                while pow2_neg(n + 1) >= eps {
                    n += 1;
                }
                while n > 0 && pow2_neg(n) < eps {
                    n -= 1;
                }
                (n > len).then_some(n)
            }
        };
        Some(last_bad_prefix.max(last_bad_tail).map_or(1, |n| n + 1))
    }
}

/// Expected direction of `n ↦ φ(Vⁿx)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Constant,
    Nonincreasing,
    Nondecreasing,
}

/// Which sufficient conditions for monotonicity hold on a scan window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub class: MatrixClass,
    /// `b_k a_ki ≤ 0` for all pairs: φ is nonincreasing.
    pub h1_nonpositive: bool,
    /// `b_k a_ki ≥ 0` for all pairs: φ is nondecreasing.
    pub h1_nonnegative: bool,
    /// V ∈ V⁺ with `b` increasing: nonincreasing.
    pub h2: bool,
    /// V ∈ V⁻ with `b` decreasing: nonincreasing.
    pub h3: bool,
    /// V ∈ V⁺ ∪ V⁻ with `b` decreasing and in `c₀`: quasi-Lyapunov,
    /// nondecreasing on V⁺ and nonincreasing on V⁻.
    pub h4: bool,
}

impl Admissibility {
    pub fn scan_dim(&self) -> usize {
        self.class.scan_dim
    }

    /// Direction implied by the hypotheses that hold, if any.
    pub fn predicted_trend(&self) -> Option<Trend> {
        let mut down = self.h1_nonpositive || self.h2 || self.h3;
        let mut up = self.h1_nonnegative;
        if self.h4 {
            if self.class.tag.is_plus() {
                up = true;
            }
            if self.class.tag.is_minus() {
                down = true;
            }
        }
        match (down, up) {
            (true, true) => Some(Trend::Constant),
            (true, false) => Some(Trend::Nonincreasing),
            (false, true) => Some(Trend::Nondecreasing),
            (false, false) => None,
        }
    }
}

/// Checks the Lyapunov hypotheses for `f` against `m` on `1..=scan_dim`.
pub fn admissibility(
    f: &LinearFunctional,
    m: &SkewMatrix,
    scan_dim: usize,
) -> Result<Admissibility> {
    let class = classify(m, scan_dim)?;
    let mut h1_nonpositive = true;
    let mut h1_nonnegative = true;
    for k in 1..=scan_dim {
        let b = f.coefficient(k);
        for i in 1..=scan_dim {
            let p = b * m.entry(k, i);
            h1_nonpositive &= p <= 0.0;
            h1_nonnegative &= p >= 0.0;
        }
    }
    let flags = f.flags();
    let tag: ClassTag = class.tag;
    Ok(Admissibility {
        h1_nonpositive,
        h1_nonnegative,
        h2: tag.is_plus() && flags.is_increasing,
        h3: tag.is_minus() && flags.is_decreasing,
        h4: (tag.is_plus() || tag.is_minus()) && flags.is_decreasing && flags.is_c0,
        class,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    /// Both nonincreasing and nondecreasing within slack.
    Constant,
    Nonincreasing,
    Nondecreasing,
    Nonmonotone,
}

impl Monotonicity {
    pub fn is_nonincreasing(self) -> bool {
        matches!(self, Monotonicity::Constant | Monotonicity::Nonincreasing)
    }

    pub fn is_nondecreasing(self) -> bool {
        matches!(self, Monotonicity::Constant | Monotonicity::Nondecreasing)
    }

    /// Whether the observed behaviour is compatible with `trend`.
    pub fn agrees_with(self, trend: Trend) -> bool {
        match trend {
            Trend::Constant => self == Monotonicity::Constant,
            Trend::Nonincreasing => self.is_nonincreasing(),
            Trend::Nondecreasing => self.is_nondecreasing(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub values: Vec<f64>,
    pub deltas: Vec<f64>,
    pub verdict: Monotonicity,
    pub last_value: f64,
    /// `max − min` of the values over the final 10% of steps.
    pub tail_width: f64,
    pub limit_exists: bool,
}

pub fn monotonicity_report(f: &LinearFunctional, t: &Trajectory) -> MonotonicityReport {
    monotonicity_of(t.points.iter().map(|x| f.phi(x)).collect(), EPS_LIMIT)
}

/// Verdict on an arbitrary nonempty value sequence.
pub fn monotonicity_of(values: Vec<f64>, eps_limit: f64) -> MonotonicityReport {
    assert!(!values.is_empty(), "monotonicity of an empty sequence");
    let deltas: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let down = deltas.iter().all(|&d| d <= MONOTONE_SLACK);
    let up = deltas.iter().all(|&d| d >= -MONOTONE_SLACK);
    let verdict = match (down, up) {
        (true, true) => Monotonicity::Constant,
        (true, false) => Monotonicity::Nonincreasing,
        (false, true) => Monotonicity::Nondecreasing,
        (false, false) => Monotonicity::Nonmonotone,
    };
    let window = (values.len() / 10).max(1);
    let tail = &values[values.len() - window..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let tail_width = hi - lo;
    MonotonicityReport {
        last_value: *values.last().expect("nonempty"),
        tail_width,
        limit_exists: tail_width < eps_limit,
        values,
        deltas,
        verdict,
    }
}
