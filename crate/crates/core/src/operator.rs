//! The Volterra quadratic map `(Vx)_k = x_k (1 + Σ_i a_ki x_i)`.
//!
//! Faces of the simplex are invariant, so a trajectory never leaves the
//! support of its seed. Iteration therefore materializes the coefficient
//! block on that support once and steps a dense state vector over it.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kahan::KahanSum;
use crate::matrix::{classify, ClassTag, MatrixClass, SkewMatrix};
use crate::simplex::{l1_distance, rho_distance, SimplexPoint, TOL_MASS};

/// Coordinates below this are flushed to exact zero.
pub const FLUSH_THRESHOLD: f64 = 1e-300;

/// Window used to cache a class hint when the matrix declares no dimension.
pub const DEFAULT_SCAN_DIM: usize = 64;

#[derive(Debug, Clone)]
pub struct VolterraOperator {
    matrix: SkewMatrix,
    class_hint: MatrixClass,
}

impl VolterraOperator {
    /// Classifies on `max(declared_dim, DEFAULT_SCAN_DIM)`.
    pub fn new(matrix: SkewMatrix) -> Self {
        let dim = matrix
            .declared_dim()
            .unwrap_or(0)
            .max(matrix.tilde_head_len().map_or(0, |h| h + 2))
            .max(DEFAULT_SCAN_DIM);
        let class_hint = classify(&matrix, dim).expect("scan dim >= 2");
        Self { matrix, class_hint }
    }

    pub fn with_scan_dim(matrix: SkewMatrix, scan_dim: usize) -> Result<Self> {
        let class_hint = classify(&matrix, scan_dim)?;
        Ok(Self { matrix, class_hint })
    }

    pub fn cascade() -> Self {
        Self::new(SkewMatrix::cascade())
    }

    pub fn identity() -> Self {
        Self::new(SkewMatrix::zero())
    }

    pub fn matrix(&self) -> &SkewMatrix {
        &self.matrix
    }

    pub fn class_hint(&self) -> &MatrixClass {
        &self.class_hint
    }

    /// One application of the operator.
    pub fn apply(&self, x: &SimplexPoint) -> Result<SimplexPoint> {
        let mut orbit = self.orbit(x)?;
        orbit.advance()?;
        Ok(orbit.point())
    }

    /// Streaming iteration from `x0`.
    pub fn orbit(&self, x0: &SimplexPoint) -> Result<Orbit> {
        if x0.mass() > 1.0 + TOL_MASS {
            return Err(Error::MassOutOfRange {
                mass: x0.mass(),
                tol: TOL_MASS,
            });
        }
        let indices = x0.support();
        let block = Block::new(&self.matrix, indices);
        let state = x0.iter().map(|(_, v)| v).collect();
        Ok(Orbit {
            block,
            state,
            next: Vec::new(),
            step: 0,
            flushes: Vec::new(),
        })
    }

    /// The first `n` iterates, `x0 … Vⁿx0`.
    pub fn iterate(&self, x0: &SimplexPoint, n: usize) -> Result<Trajectory> {
        let mut orbit = self.orbit(x0)?;
        let mut points = Vec::with_capacity(n + 1);
        let mut step_l1 = Vec::with_capacity(n);
        let mut step_rho = Vec::with_capacity(n);
        points.push(x0.clone());
        for _ in 0..n {
            orbit.advance()?;
            let cur = orbit.point();
            let prev = points.last().expect("nonempty");
            step_l1.push(l1_distance(prev, &cur));
            step_rho.push(rho_distance(prev, &cur));
            points.push(cur);
        }
        Ok(Trajectory {
            points,
            step_l1,
            step_rho,
            flushes: orbit.flushes,
        })
    }

    /// Splits `x0` along the block structure of a tilde operator, using
    /// the `k0` from the cached class hint.
    pub fn decompose_tilde(&self, x0: &SimplexPoint) -> Result<TildeSplit> {
        match self.class_hint.tag {
            ClassTag::TildePlus { k0 } | ClassTag::TildeMinus { k0 } => self.decompose_at(x0, k0),
            tag => Err(Error::NotTilde(format!("class hint is {tag:?}"))),
        }
    }

    /// Splits at an explicit `k0 ≥ 2`, checking that the coupling block
    /// vanishes on the class-hint window.
    pub fn decompose_at(&self, x0: &SimplexPoint, k0: usize) -> Result<TildeSplit> {
        if k0 < 2 {
            return Err(Error::NotTilde(format!("k0 = {k0} leaves no head block")));
        }
        let window = self.class_hint.scan_dim.max(k0 + 1);
        for k in 1..k0 {
            for i in k0..=window {
                let a = self.matrix.entry(k, i);
                if a != 0.0 {
                    return Err(Error::NotTilde(format!(
                        "a[{k}][{i}] = {a} couples the blocks"
                    )));
                }
            }
        }
        let head_len = k0 - 1;
        let mut entries = Vec::new();
        for k in 1..=head_len {
            for i in (k + 1)..=head_len {
                entries.push((k, i, self.matrix.entry(k, i)));
            }
        }
        let head_matrix = SkewMatrix::table(entries)?;
        let head = VolterraOperator::with_scan_dim(head_matrix, head_len.max(2))?;
        let tail = VolterraOperator::new(self.matrix.shifted(head_len));
        let head_point = x0.restrict(1..=head_len);
        let tail_point = x0.shift_down(head_len);
        Ok(TildeSplit {
            k0,
            head_mass: head_point.mass(),
            tail_mass: tail_point.mass(),
            head,
            head_point,
            tail,
            tail_point,
        })
    }
}

/// Coefficients restricted to a fixed support, dense row-major.
#[derive(Debug, Clone)]
struct Block {
    indices: Vec<usize>,
    a: Vec<f64>,
}

impl Block {
    fn new(matrix: &SkewMatrix, indices: Vec<usize>) -> Self {
        let s = indices.len();
        let mut a = vec![0.0; s * s];
        for p in 0..s {
            for q in (p + 1)..s {
                let v = matrix.entry(indices[p], indices[q]);
                a[p * s + q] = v;
                a[q * s + p] = -v;
            }
        }
        Self { indices, a }
    }
}

/// A flushed coordinate: it fell below [`FLUSH_THRESHOLD`] at `step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlushEvent {
    pub step: usize,
    pub index: usize,
}

/// Iteration state over the support of the seed.
#[derive(Debug, Clone)]
pub struct Orbit {
    block: Block,
    state: Vec<f64>,
    next: Vec<f64>,
    step: usize,
    flushes: Vec<FlushEvent>,
}

impl Orbit {
    /// Number of steps taken so far.
    pub fn step(&self) -> usize {
        self.step
    }

    /// Support indices of the seed; `state()[p]` is coordinate `indices()[p]`.
    pub fn indices(&self) -> &[usize] {
        &self.block.indices
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn flushes(&self) -> &[FlushEvent] {
        &self.flushes
    }

    pub fn point(&self) -> SimplexPoint {
        SimplexPoint::from_canonical(
            self.block
                .indices
                .iter()
                .zip(&self.state)
                .filter(|(_, &v)| v > 0.0)
                .map(|(&k, &v)| (k, v))
                .collect(),
        )
    }

    /// Applies the operator once. Returns `true` when the state changed.
    pub fn advance(&mut self) -> Result<bool> {
        let step = self.step + 1;
        self.step_once().map_err(|e| e.at_step(step))?;
        self.step = step;
        let changed = self.state != self.next;
        std::mem::swap(&mut self.state, &mut self.next);
        Ok(changed)
    }

    fn step_once(&mut self) -> Result<()> {
        let s = self.state.len();
        let x = &self.state;
        self.next.clear();
        self.next.resize(s, 0.0);
        let mut mass_in = KahanSum::new();
        let mut mass_out = KahanSum::new();
        for p in 0..s {
            let xp = x[p];
            if xp == 0.0 {
                continue;
            }
            mass_in.add(xp);
            let row = &self.block.a[p * s..(p + 1) * s];
            // zero coefficients are skipped so that splitting a block-diagonal
            // operator reproduces the same summation sequence
            let mut acc = KahanSum::new();
            for q in 0..s {
                if row[q] != 0.0 && x[q] != 0.0 {
                    acc.add(row[q] * x[q]);
                }
            }
            let mut v = xp * (1.0 + acc.value());
            if v < -TOL_MASS {
                return Err(Error::NegativeCoordinate {
                    index: self.block.indices[p],
                    value: v,
                });
            }
            if v < FLUSH_THRESHOLD {
                v = 0.0;
                self.flushes.push(FlushEvent {
                    step: self.step + 1,
                    index: self.block.indices[p],
                });
            }
            self.next[p] = v;
            mass_out.add(v);
        }
        let (expected, actual) = (mass_in.value(), mass_out.value());
        if (actual - expected).abs() > 10.0 * TOL_MASS {
            return Err(Error::MassDrift { expected, actual });
        }
        Ok(())
    }
}

/// Recorded iterates with per-step displacements.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<SimplexPoint>,
    pub step_l1: Vec<f64>,
    pub step_rho: Vec<f64>,
    pub flushes: Vec<FlushEvent>,
}

/// Per-step scalars written next to the trajectory CSV.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub steps: usize,
    pub step_l1: Vec<f64>,
    pub step_rho: Vec<f64>,
    pub mass: Vec<f64>,
    pub flushes: Vec<FlushEvent>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> &SimplexPoint {
        self.points
            .last()
            .expect("trajectory holds at least the seed")
    }

    pub fn masses(&self) -> Vec<f64> {
        self.points.iter().map(SimplexPoint::mass).collect()
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            steps: self.points.len().saturating_sub(1),
            step_l1: self.step_l1.clone(),
            step_rho: self.step_rho.clone(),
            mass: self.masses(),
            flushes: self.flushes.clone(),
        }
    }

    /// Sparse dump: `step,index,value`, floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "step,index,value")?;
        for (n, x) in self.points.iter().enumerate() {
            for (k, v) in x.iter() {
                writeln!(out, "{n},{k},{v:.16e}")?;
            }
        }
        Ok(())
    }
}

/// `(Σ_{k≤m} x_k)^{2ⁿ}` by repeated squaring: the exact partial mass of
/// the cascade operator after `n` steps.
pub fn cascade_partial_sum_oracle(x0: &SimplexPoint, m: usize, n: u32) -> f64 {
    let mut p = x0.window_mass(m);
    for _ in 0..n {
        p *= p;
    }
    p
}

/// Head/tail split of a tilde operator and its seed.
#[derive(Debug, Clone)]
pub struct TildeSplit {
    pub k0: usize,
    /// Operator on indices `1..k0` (the finite block).
    pub head: VolterraOperator,
    pub head_point: SimplexPoint,
    /// Operator on indices `k0..`, re-indexed from 1.
    pub tail: VolterraOperator,
    pub tail_point: SimplexPoint,
    pub head_mass: f64,
    pub tail_mass: f64,
}

impl TildeSplit {
    /// Re-assembles a full point from head and tail states.
    pub fn recombine(&self, head: &SimplexPoint, tail: &SimplexPoint) -> SimplexPoint {
        let offset = self.k0 - 1;
        SimplexPoint::from_canonical(
            head.iter()
                .chain(tail.iter().map(|(k, v)| (k + offset, v)))
                .collect(),
        )
    }

    /// Iterates both blocks independently for `n` steps and recombines.
    pub fn iterate(&self, n: usize) -> Result<Vec<SimplexPoint>> {
        let head = self.head.iterate(&self.head_point, n)?;
        let tail = self.tail.iterate(&self.tail_point, n)?;
        Ok(head
            .points
            .iter()
            .zip(&tail.points)
            .map(|(h, t)| self.recombine(h, t))
            .collect())
    }
}
