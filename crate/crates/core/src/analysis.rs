//! Limit-set estimation, Cesàro averages and ergodicity verdicts.
//!
//! Everything here is budgeted: a verdict is only declared once its
//! criterion has held for a full stability window, and `Undecided` is a
//! legitimate answer when the budget runs out.
//!
//! The pointwise topology is resolved up to a probe dimension. Coordinates
//! beyond it weigh less than `2^{-probe}` in the ρ metric, so mass living
//! there is treated as having escaped.

use serde::{Deserialize, Serialize};

use crate::batch;
use crate::error::{Error, Result};
use crate::kahan::KahanSum;
use crate::matrix::SkewMatrix;
use crate::operator::{Orbit, VolterraOperator};
use crate::simplex::{l1_distance, pow2_neg, rho_distance, SimplexPoint, TOL_MASS};

/// Smallest `k` with `2^{-k} < eps`: the index past which a coordinate can
/// no longer move the ρ metric by `eps`.
pub fn weak_horizon(eps: f64) -> usize {
    let mut k = (1.0 / eps).log2().ceil().max(1.0) as usize;
    while k > 1 && pow2_neg(k - 1) < eps {
        k -= 1;
    }
    while pow2_neg(k) >= eps {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// ℓ¹ convergence.
    Norm,
    /// Pointwise convergence, measured with ρ.
    Weak,
}

/// Iteration budget and tolerances. Unset fields are derived: the window
/// is 10% of `max_steps`, the probe is [`weak_horizon`] of `eps_conv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    pub max_steps: usize,
    pub eps_conv: f64,
    pub stability_window: Option<usize>,
    pub probe_dim: Option<usize>,
    pub eps_mass: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_steps: 10_000,
            eps_conv: 1e-8,
            stability_window: None,
            probe_dim: None,
            eps_mass: 1e-3,
        }
    }
}

impl Budget {
    pub fn with_steps(max_steps: usize) -> Self {
        Self {
            max_steps,
            ..Self::default()
        }
    }

    pub fn window(&self) -> usize {
        self.stability_window
            .unwrap_or((self.max_steps / 10).max(1))
    }

    pub fn probe(&self) -> usize {
        self.probe_dim
            .unwrap_or_else(|| weak_horizon(self.eps_conv))
    }

    /// Same budget with every derived field filled in.
    pub fn resolved(&self) -> Self {
        Self {
            stability_window: Some(self.window()),
            probe_dim: Some(self.probe()),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidBudget(msg));
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        if !(self.eps_conv.is_finite() && self.eps_conv > 0.0) {
            return bad(format!("eps_conv = {}", self.eps_conv));
        }
        if !(self.eps_mass > 0.0 && self.eps_mass < 1.0) {
            return bad(format!("eps_mass = {} outside (0, 1)", self.eps_mass));
        }
        if self.stability_window == Some(0) {
            return bad("stability_window must be positive".into());
        }
        if self.probe_dim == Some(0) {
            return bad("probe_dim must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    VertexLimit {
        index: usize,
    },
    /// Weak mode only: all mass escaped past the probe.
    ZeroLimit,
    PointOnSphere {
        r: f64,
        point: SimplexPoint,
    },
    Undecided,
}

impl Verdict {
    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::VertexLimit { .. } => "vertex_limit",
            Verdict::ZeroLimit => "zero_limit",
            Verdict::PointOnSphere { .. } => "point_on_sphere",
            Verdict::Undecided => "undecided",
        }
    }

    /// The limit point the verdict names, if any.
    pub fn target(&self) -> Option<SimplexPoint> {
        match self {
            Verdict::VertexLimit { index } => Some(SimplexPoint::vertex(*index)),
            Verdict::ZeroLimit => Some(SimplexPoint::zero()),
            Verdict::PointOnSphere { point, .. } => Some(point.clone()),
            Verdict::Undecided => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassSample {
    pub step: usize,
    /// Mass on indices `≤ probe`.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub steps: usize,
    /// Distances from the final iterate to the verdict's limit point, or the
    /// last step displacement when there is none.
    pub final_l1: f64,
    pub final_rho: f64,
    /// Probe-window mass of the final iterate.
    pub r: f64,
    /// Probe-window mass at step 0, powers of two and the final step.
    pub mass_trend: Vec<MassSample>,
    /// First step of the streak that confirmed the verdict.
    pub streak_start: Option<usize>,
    /// The iteration reached an exact fixed point.
    pub stationary: bool,
    pub flushes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaEstimate {
    pub mode: Mode,
    pub verdict: Verdict,
    pub evidence: Evidence,
}

/// Distance from the orbit state to `e_m` (or to 0 when `m` is `None`).
fn state_distance(idx: &[usize], x: &[f64], m: Option<usize>, mode: Mode) -> f64 {
    let mut acc = KahanSum::new();
    for (&k, &v) in idx.iter().zip(x) {
        let d = if Some(k) == m { (1.0 - v).abs() } else { v };
        if d == 0.0 {
            continue;
        }
        acc.add(match mode {
            Mode::Norm => d,
            Mode::Weak => pow2_neg(k) * d / (1.0 + d),
        });
    }
    if let Some(m) = m {
        // target index outside the seed support
        if !idx.contains(&m) {
            acc.add(match mode {
                Mode::Norm => 1.0,
                Mode::Weak => pow2_neg(m) * 0.5,
            });
        }
    }
    acc.value()
}

fn state_displacement(idx: &[usize], a: &[f64], b: &[f64], mode: Mode) -> f64 {
    let mut acc = KahanSum::new();
    for ((&k, &x), &y) in idx.iter().zip(a).zip(b) {
        let d = (x - y).abs();
        if d != 0.0 {
            acc.add(match mode {
                Mode::Norm => d,
                Mode::Weak => pow2_neg(k) * d / (1.0 + d),
            });
        }
    }
    acc.value()
}

fn state_window_mass(idx: &[usize], x: &[f64], probe: usize) -> f64 {
    let mut acc = KahanSum::new();
    for (&k, &v) in idx.iter().zip(x) {
        if k > probe {
            break;
        }
        acc.add(v);
    }
    acc.value()
}

fn state_argmax(x: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (p, &v) in x.iter().enumerate() {
        if v > 0.0 && best.is_none_or(|b| v > x[b]) {
            best = Some(p);
        }
    }
    best
}

#[derive(Default)]
struct Streak {
    start: Option<usize>,
    key: usize,
}

impl Streak {
    fn update(&mut self, ok: bool, key: usize, step: usize) {
        if !ok {
            self.start = None;
        } else if self.start.is_none() || self.key != key {
            self.start = Some(step);
            self.key = key;
        }
    }

    fn held(&self, step: usize, window: usize) -> bool {
        self.start.is_some_and(|s| step + 1 - s >= window)
    }
}

/// Iterates `x0` until a limit verdict has held for a stability window or
/// the budget runs out.
///
/// Checks run in order zero limit (weak mode only), vertex limit, Cauchy
/// tail; a Cauchy tail that already sits within `eps_conv` of the zero point
/// or a vertex is reported as that limit. In weak mode a vertex beyond the
/// probe reads as the zero point.
pub fn estimate_omega(
    v: &VolterraOperator,
    x0: &SimplexPoint,
    mode: Mode,
    budget: &Budget,
) -> Result<OmegaEstimate> {
    budget.validate()?;
    if !x0.is_on_simplex() {
        return Err(Error::InvalidPoint(format!(
            "seed mass {} is not 1",
            x0.mass()
        )));
    }
    let eps = budget.eps_conv;
    let window = budget.window();
    let probe = budget.probe();

    let mut orbit = v.orbit(x0)?;
    let idx = orbit.indices().to_vec();
    let mut prev: Vec<f64> = orbit.state().to_vec();
    let mut prev_wm = state_window_mass(&idx, &prev, probe);
    let mut mass_trend = vec![MassSample {
        step: 0,
        mass: prev_wm,
    }];

    let (mut zero, mut vertex) = (Streak::default(), Streak::default());
    // the Cauchy test measures oscillation against the first state of the
    // streak; per-step displacements alone are fooled by slow contraction
    let mut anchor: Vec<f64> = prev.clone();
    let mut anchor_step = 0;
    let mut verdict = Verdict::Undecided;
    let mut streak_start = None;
    let mut stationary = false;
    let mut last_disp = f64::NAN;
    let mut steps = 0;

    for step in 1..=budget.max_steps {
        let changed = orbit.advance()?;
        steps = step;
        let x = orbit.state();
        let wm = state_window_mass(&idx, x, probe);
        if step.is_power_of_two() {
            mass_trend.push(MassSample { step, mass: wm });
        }

        let zero_ok = mode == Mode::Weak && wm < eps && wm <= prev_wm + f64::EPSILON * prev_wm;
        let top = state_argmax(x).map(|p| idx[p]);
        let vertex_ok = match top {
            Some(m) if mode == Mode::Norm || m <= probe => {
                state_distance(&idx, x, Some(m), mode) < eps
            }
            _ => false,
        };
        last_disp = state_displacement(&idx, &prev, x, mode);
        if state_displacement(&idx, &anchor, x, mode) >= eps {
            anchor.copy_from_slice(x);
            anchor_step = step;
        }

        zero.update(zero_ok, 0, step);
        vertex.update(vertex_ok, top.unwrap_or(0), step);

        stationary = !changed;
        let held = |s: &Streak| stationary || s.held(step, window);
        let cauchy_held = stationary || step - anchor_step >= window;
        if zero_ok && held(&zero) {
            verdict = Verdict::ZeroLimit;
            streak_start = zero.start;
        } else if vertex_ok && held(&vertex) {
            verdict = Verdict::VertexLimit {
                index: top.expect("vertex_ok implies a maximum"),
            };
            streak_start = vertex.start;
        } else if cauchy_held {
            // a settled trajectory already within eps of a simpler limit
            streak_start = Some(anchor_step);
            if zero_ok {
                verdict = Verdict::ZeroLimit;
            } else if vertex_ok {
                verdict = Verdict::VertexLimit {
                    index: top.expect("vertex_ok implies a maximum"),
                };
            } else {
                let point = orbit.point();
                let (r, point) = match mode {
                    Mode::Norm => (point.mass(), point),
                    Mode::Weak => (wm, point.restrict(1..=probe)),
                };
                // a norm limit must stay on S
                if mode == Mode::Weak || r >= 1.0 - budget.eps_mass {
                    verdict = Verdict::PointOnSphere {
                        r: r.clamp(0.0, 1.0),
                        point,
                    };
                } else {
                    streak_start = None;
                }
            }
        }
        prev.copy_from_slice(x);
        prev_wm = wm;
        if verdict != Verdict::Undecided || stationary {
            break;
        }
    }

    let last = mass_trend.last().map(|s| s.step);
    if last != Some(steps) {
        mass_trend.push(MassSample {
            step: steps,
            mass: prev_wm,
        });
    }
    let (final_l1, final_rho) = match &verdict {
        Verdict::VertexLimit { index } => (
            state_distance(&idx, &prev, Some(*index), Mode::Norm),
            state_distance(&idx, &prev, Some(*index), Mode::Weak),
        ),
        Verdict::ZeroLimit => (
            state_distance(&idx, &prev, None, Mode::Norm),
            state_distance(&idx, &prev, None, Mode::Weak),
        ),
        _ => {
            let (l1, rho) = match mode {
                Mode::Norm => (last_disp, f64::NAN),
                Mode::Weak => (f64::NAN, last_disp),
            };
            (l1, rho)
        }
    };
    let final_l1 = if final_l1.is_nan() { 0.0 } else { final_l1 };
    let final_rho = if final_rho.is_nan() { 0.0 } else { final_rho };
    Ok(OmegaEstimate {
        mode,
        verdict,
        evidence: Evidence {
            steps,
            final_l1,
            final_rho,
            r: prev_wm,
            mass_trend,
            streak_start,
            stationary,
            flushes: orbit.flushes().len(),
        },
    })
}

/// First steps after which the ℓ¹ and ρ distances to `target` stay below
/// `eps` for the rest of the recorded points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EntrySteps {
    pub l1: Option<usize>,
    pub rho: Option<usize>,
}

pub fn entry_steps(points: &[SimplexPoint], target: &SimplexPoint, eps: f64) -> EntrySteps {
    let entry = |dist: &dyn Fn(&SimplexPoint) -> f64| {
        let mut first = None;
        for (n, p) in points.iter().enumerate().rev() {
            if dist(p) < eps {
                first = Some(n);
            } else {
                break;
            }
        }
        first
    };
    EntrySteps {
        l1: entry(&|p| l1_distance(p, target)),
        rho: entry(&|p| rho_distance(p, target)),
    }
}

/// Running compensated sums of `x0, Vx0, …` over the seed support.
struct CesaroRun {
    orbit: Orbit,
    sums: Vec<KahanSum>,
    count: usize,
}

impl CesaroRun {
    fn new(v: &VolterraOperator, x0: &SimplexPoint) -> Result<Self> {
        let orbit = v.orbit(x0)?;
        let sums = vec![KahanSum::new(); orbit.state().len()];
        Ok(Self {
            orbit,
            sums,
            count: 0,
        })
    }

    /// Adds the current iterate, then advances the orbit.
    fn push(&mut self) -> Result<()> {
        for (s, &v) in self.sums.iter_mut().zip(self.orbit.state()) {
            if v != 0.0 {
                s.add(v);
            }
        }
        self.count += 1;
        self.orbit.advance()?;
        Ok(())
    }

    fn average(&self) -> SimplexPoint {
        let n = self.count as f64;
        let coords = self
            .orbit
            .indices()
            .iter()
            .zip(&self.sums)
            .map(|(&k, s)| (k, s.value() / n))
            .filter(|&(_, v)| v > 0.0)
            .collect();
        SimplexPoint::from_canonical(coords)
    }
}

/// `A_n = (1/n) Σ_{j<n} V^j x0`.
pub fn cesaro(v: &VolterraOperator, x0: &SimplexPoint, n: usize) -> Result<SimplexPoint> {
    if n == 0 {
        return Err(Error::InvalidBudget("Cesàro average needs n ≥ 1".into()));
    }
    let mut run = CesaroRun::new(v, x0)?;
    for _ in 0..n {
        run.push()?;
    }
    Ok(run.average())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesaroSample {
    pub n: usize,
    pub point: SimplexPoint,
    pub mass: f64,
    pub window_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakVerdict {
    WeakErgodic,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormVerdict {
    Ergodic,
    NonErgodic,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    /// Averages at `n = 1, 2, 4, …` and at `max_steps`.
    pub cesaro_points: Vec<CesaroSample>,
    /// ρ distances between consecutive samples.
    pub differences: Vec<f64>,
    /// The last average restricted to the probe window.
    pub weak_limit: SimplexPoint,
    pub weak_verdict: WeakVerdict,
    pub norm_verdict: NormVerdict,
    pub mass_of_weak_limit: f64,
    pub probe_dim: usize,
    /// The seed reaches past the probe, so the verdict speaks for the
    /// infinite-support extrapolation rather than the truncated seed.
    pub extrapolated: bool,
}

/// Geometric ratio below which ρ differences count as contracting.
const CAUCHY_RATIO: f64 = 0.75;

fn is_rho_cauchy(diffs: &[f64], eps: f64) -> bool {
    match diffs.last() {
        None => false,
        Some(&d) if d < eps => true,
        Some(_) if diffs.len() >= 4 => diffs[diffs.len() - 4..]
            .windows(2)
            .all(|w| w[1] <= CAUCHY_RATIO * w[0]),
        Some(_) => false,
    }
}

pub fn ergodicity_verdict(
    v: &VolterraOperator,
    x0: &SimplexPoint,
    budget: &Budget,
) -> Result<ErgodicReport> {
    budget.validate()?;
    if !x0.is_on_simplex() {
        return Err(Error::InvalidPoint(format!(
            "seed mass {} is not 1",
            x0.mass()
        )));
    }
    let probe = budget.probe();
    let n_max = budget.max_steps;
    let mut run = CesaroRun::new(v, x0)?;
    let mut samples: Vec<CesaroSample> = Vec::new();
    for n in 1..=n_max {
        run.push()?;
        if n.is_power_of_two() || n == n_max {
            let point = run.average();
            samples.push(CesaroSample {
                n,
                mass: point.mass(),
                window_mass: point.window_mass(probe),
                point,
            });
        }
    }
    let differences: Vec<f64> = samples
        .windows(2)
        .map(|w| rho_distance(&w[0].point, &w[1].point))
        .collect();
    let last = samples.last().expect("max_steps ≥ 1");
    let mass_of_weak_limit = last.window_mass;
    let weak_limit = last.point.restrict(1..=probe);

    let weak_verdict = if is_rho_cauchy(&differences, budget.eps_conv) {
        WeakVerdict::WeakErgodic
    } else {
        WeakVerdict::Undecided
    };
    let tail = &samples[samples.len().saturating_sub(3)..];
    let settling = tail
        .windows(2)
        .all(|w| w[1].window_mass <= w[0].window_mass + TOL_MASS);
    let norm_verdict = match weak_verdict {
        WeakVerdict::Undecided => NormVerdict::Undecided,
        WeakVerdict::WeakErgodic if mass_of_weak_limit >= 1.0 - budget.eps_mass => {
            NormVerdict::Ergodic
        }
        WeakVerdict::WeakErgodic if settling => NormVerdict::NonErgodic,
        WeakVerdict::WeakErgodic => NormVerdict::Undecided,
    };
    Ok(ErgodicReport {
        cesaro_points: samples,
        differences,
        weak_limit,
        weak_verdict,
        norm_verdict,
        mass_of_weak_limit,
        probe_dim: probe,
        extrapolated: x0.dim() > probe,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationRow {
    pub truncation: usize,
    /// Probe-window mass of `A_n`.
    pub window_mass: f64,
    pub escaped_mass: f64,
    /// `A_n` coordinates `1..=probe`.
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationSweep {
    pub steps: usize,
    pub probe_dim: usize,
    pub rows: Vec<TruncationRow>,
    /// Every coordinate `≤ probe` strictly decreases as the truncation grows.
    pub coords_decreasing: bool,
    pub mass_decreasing: bool,
    pub norm_verdict: NormVerdict,
    /// Always set: the verdict is about the untruncated seed.
    pub extrapolated: bool,
}

/// Cesàro averages at a fixed `steps` for seeds truncated at each `N`,
/// evaluated as independent trials.
pub fn truncation_sweep<F>(
    v: &VolterraOperator,
    truncations: &[usize],
    seed: F,
    steps: usize,
    probe_dim: usize,
    eps_mass: f64,
) -> Result<TruncationSweep>
where
    F: Fn(usize) -> Result<SimplexPoint> + Sync + Send,
{
    if steps == 0 || probe_dim == 0 || truncations.is_empty() {
        return Err(Error::InvalidBudget("empty truncation sweep".into()));
    }
    let rows = batch::map(truncations, |&n| -> Result<TruncationRow> {
        let x0 = seed(n)?;
        let avg = cesaro(v, &x0, steps)?;
        let window_mass = avg.window_mass(probe_dim);
        Ok(TruncationRow {
            truncation: n,
            window_mass,
            escaped_mass: avg.mass() - window_mass,
            coords: (1..=probe_dim).map(|k| avg.get(k)).collect(),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let strictly_down =
        |f: &dyn Fn(&TruncationRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    let mass_decreasing = strictly_down(&|r| r.window_mass);
    let coords_decreasing = (0..probe_dim).all(|k| {
        rows.windows(2)
            .all(|w| w[1].coords[k] < w[0].coords[k] || w[0].coords[k] == 0.0)
    });
    let last = rows.last().expect("nonempty").window_mass;
    let norm_verdict = if rows.iter().all(|r| r.window_mass >= 1.0 - eps_mass) {
        NormVerdict::Ergodic
    } else if mass_decreasing && last < 1.0 - eps_mass {
        NormVerdict::NonErgodic
    } else {
        NormVerdict::Undecided
    };
    Ok(TruncationSweep {
        steps,
        probe_dim,
        rows,
        coords_decreasing,
        mass_decreasing,
        norm_verdict,
        extrapolated: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportViolation {
    pub k: usize,
    pub i: usize,
    pub x_k: f64,
    pub x_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportReport {
    pub checked: usize,
    pub violations: Vec<SupportViolation>,
}

impl SupportReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// For each pair with a nonzero coupling, a limit point must vanish on at
/// least one of the two coordinates.
pub fn check_corollary_support(
    x_star: &SimplexPoint,
    pairs: &[(usize, usize)],
    eps: f64,
) -> SupportReport {
    let violations = pairs
        .iter()
        .filter_map(|&(k, i)| {
            let (x_k, x_i) = (x_star.get(k), x_star.get(i));
            (x_k.min(x_i) >= eps).then_some(SupportViolation { k, i, x_k, x_i })
        })
        .collect();
    SupportReport {
        checked: pairs.len(),
        violations,
    }
}

/// Pairs `k < i ≤ dim` with `a_ki > threshold`.
pub fn positive_pairs(m: &SkewMatrix, dim: usize, threshold: f64) -> Vec<(usize, usize)> {
    signed_pairs(m, dim, |a| a > threshold)
}

/// Pairs `k < i ≤ dim` with `a_ki < −threshold`.
pub fn negative_pairs(m: &SkewMatrix, dim: usize, threshold: f64) -> Vec<(usize, usize)> {
    signed_pairs(m, dim, |a| a < -threshold)
}

fn signed_pairs(m: &SkewMatrix, dim: usize, keep: impl Fn(f64) -> bool) -> Vec<(usize, usize)> {
    (1..=dim)
        .flat_map(|k| (k + 1..=dim).map(move |i| (k, i)))
        .filter(|&(k, i)| keep(m.entry(k, i)))
        .collect()
}

/// `f_α(ξ) = ξ(1 + α − αξ)`.
pub fn logistic(alpha: f64, xi: f64) -> f64 {
    xi * (1.0 + alpha - alpha * xi)
}

/// Iterates `f_α` from `xi0` until the value drops below `tol` or
/// `max_iter` steps have been taken. Requires `α ∈ [−1, 0)`, `ξ₀ ∈ [0, 1]`.
pub fn logistic_orbit(alpha: f64, xi0: f64, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if !(-1.0..0.0).contains(&alpha) {
        return Err(Error::InvalidRange(format!(
            "alpha = {alpha} outside [-1, 0)"
        )));
    }
    if !(0.0..=1.0).contains(&xi0) {
        return Err(Error::InvalidRange(format!("xi0 = {xi0} outside [0, 1]")));
    }
    let mut out = vec![xi0];
    let mut xi = xi0;
    while xi >= tol && out.len() <= max_iter {
        xi = logistic(alpha, xi);
        out.push(xi);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SkewMatrix;
    use proptest::prelude::*;

    fn budget(steps: usize) -> Budget {
        Budget::with_steps(steps)
    }

    #[test]
    fn horizon() {
        assert_eq!(weak_horizon(1e-8), 27);
        assert_eq!(weak_horizon(0.5), 2);
        assert_eq!(weak_horizon(0.3), 2);
        assert!(pow2_neg(weak_horizon(1e-3)) < 1e-3);
        assert!(pow2_neg(weak_horizon(1e-3) - 1) >= 1e-3);
    }

    #[test]
    fn budget_validation() {
        assert!(budget(0).validate().is_err());
        let b = Budget {
            eps_conv: 0.0,
            ..Budget::default()
        };
        assert!(b.validate().is_err());
        let r = budget(1000).resolved();
        assert_eq!(r.stability_window, Some(100));
        assert_eq!(r.probe_dim, Some(27));
    }

    #[test]
    fn cascade_uniform_norm() {
        let x0 = SimplexPoint::uniform(1..=8).unwrap();
        let est = estimate_omega(
            &VolterraOperator::cascade(),
            &x0,
            Mode::Norm,
            &budget(10_000),
        )
        .unwrap();
        assert_eq!(est.verdict, Verdict::VertexLimit { index: 8 });
        assert!(est.evidence.final_l1 < 1e-8);
    }

    #[test]
    fn cascade_geometric_weak_is_zero() {
        let x0 = SimplexPoint::geometric(64).unwrap();
        let est = estimate_omega(
            &VolterraOperator::cascade(),
            &x0,
            Mode::Weak,
            &budget(10_000),
        )
        .unwrap();
        assert_eq!(est.verdict, Verdict::ZeroLimit);
        assert!(est.evidence.r < 1e-8);
        let masses: Vec<f64> = est.evidence.mass_trend.iter().map(|s| s.mass).collect();
        assert!(masses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn vplus_seed_11_goes_to_min_support() {
        let v = VolterraOperator::new(SkewMatrix::random(11, 0.0, 1.0).unwrap());
        let x0 = SimplexPoint::uniform([2, 4, 7]).unwrap();
        let est = estimate_omega(&v, &x0, Mode::Norm, &budget(100_000)).unwrap();
        assert_eq!(est.verdict, Verdict::VertexLimit { index: 2 });
    }

    #[test]
    fn identity_is_stationary() {
        let x0 = SimplexPoint::uniform([1, 3]).unwrap();
        let est =
            estimate_omega(&VolterraOperator::identity(), &x0, Mode::Norm, &budget(100)).unwrap();
        assert!(est.evidence.stationary);
        assert_eq!(est.evidence.steps, 1);
        match est.verdict {
            Verdict::PointOnSphere { r, point } => {
                assert_eq!(r, 1.0);
                assert_eq!(point, x0);
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn norm_mode_never_reports_zero() {
        let x0 = SimplexPoint::geometric(64).unwrap();
        let est = estimate_omega(
            &VolterraOperator::cascade(),
            &x0,
            Mode::Norm,
            &budget(10_000),
        )
        .unwrap();
        assert_ne!(est.verdict, Verdict::ZeroLimit);
        // the truncated seed has a top vertex
        assert_eq!(est.verdict, Verdict::VertexLimit { index: 64 });
    }

    #[test]
    fn tiny_budget_is_undecided() {
        let x0 = SimplexPoint::uniform(1..=8).unwrap();
        let est =
            estimate_omega(&VolterraOperator::cascade(), &x0, Mode::Norm, &budget(2)).unwrap();
        assert_eq!(est.verdict, Verdict::Undecided);
        assert_eq!(est.evidence.steps, 2);
    }

    #[test]
    fn off_simplex_seed_rejected() {
        let x = SimplexPoint::from_sparse([(1, 0.5)]).unwrap();
        assert!(estimate_omega(&VolterraOperator::cascade(), &x, Mode::Norm, &budget(10)).is_err());
        assert!(ergodicity_verdict(&VolterraOperator::cascade(), &x, &budget(10)).is_err());
    }

    #[test]
    fn entry_steps_agree_on_cascade() {
        let x0 = SimplexPoint::uniform(1..=8).unwrap();
        let t = VolterraOperator::cascade().iterate(&x0, 20).unwrap();
        let e = entry_steps(&t.points, &SimplexPoint::vertex(8), 1e-6);
        assert_eq!(e.l1, Some(7));
        assert!(e.rho.unwrap() <= 7);
    }

    #[test]
    fn cesaro_examples() {
        let x0 = SimplexPoint::uniform([2, 5]).unwrap();
        assert_eq!(cesaro(&VolterraOperator::identity(), &x0, 37).unwrap(), x0);
        assert!(cesaro(&VolterraOperator::identity(), &x0, 0).is_err());

        let half = SimplexPoint::uniform([1, 2]).unwrap();
        let a = cesaro(&VolterraOperator::cascade(), &half, 10_000).unwrap();
        assert!(a.get(1) < 1e-3);
        assert!(a.get(2) > 1.0 - 1e-3);
        // Σ_j (1/2)^{2^j} / n
        let expect: f64 = (0..64).map(|j| 0.5f64.powf(2f64.powi(j))).sum::<f64>() / 10_000.0;
        assert!((a.get(1) - expect).abs() < 1e-15);
    }

    #[test]
    fn cesaro_geometric_coordinates_decrease_in_n() {
        let x0 = SimplexPoint::geometric(128).unwrap();
        let v = VolterraOperator::cascade();
        let ns = [100, 1000, 10_000];
        let avgs: Vec<SimplexPoint> = ns.iter().map(|&n| cesaro(&v, &x0, n).unwrap()).collect();
        for k in 1..=8 {
            assert!(
                avgs.windows(2).all(|w| w[1].get(k) < w[0].get(k)),
                "k = {k}"
            );
        }
    }

    #[test]
    fn ergodic_examples() {
        let v = VolterraOperator::cascade();
        let r = ergodicity_verdict(&v, &SimplexPoint::uniform(1..=8).unwrap(), &budget(10_000))
            .unwrap();
        assert_eq!(r.weak_verdict, WeakVerdict::WeakErgodic);
        assert_eq!(r.norm_verdict, NormVerdict::Ergodic);
        assert!(!r.extrapolated);

        let x0 = SimplexPoint::from_sparse([(1, 0.25), (4, 0.75)]).unwrap();
        let r = ergodicity_verdict(&VolterraOperator::identity(), &x0, &budget(100)).unwrap();
        assert_eq!(r.norm_verdict, NormVerdict::Ergodic);
        assert_eq!(r.weak_limit, x0);
        assert!(r.differences.iter().all(|&d| d == 0.0));

        let r =
            ergodicity_verdict(&v, &SimplexPoint::geometric(64).unwrap(), &budget(10_000)).unwrap();
        assert!(r.extrapolated);
        assert_eq!(r.weak_verdict, WeakVerdict::WeakErgodic);
        assert_eq!(r.norm_verdict, NormVerdict::NonErgodic);
        assert!(r.mass_of_weak_limit < 1.0 - 1e-3);
    }

    #[test]
    fn cesaro_mass_within_tolerance() {
        let x0 = SimplexPoint::geometric(40).unwrap();
        let r = ergodicity_verdict(&VolterraOperator::cascade(), &x0, &budget(4096)).unwrap();
        for s in &r.cesaro_points {
            assert!((s.mass - 1.0).abs() <= s.n as f64 * TOL_MASS, "n = {}", s.n);
        }
    }

    #[test]
    fn truncation_sweep_mechanism() {
        let sweep = truncation_sweep(
            &VolterraOperator::cascade(),
            &[16, 32, 64],
            SimplexPoint::geometric,
            2000,
            27,
            1e-3,
        )
        .unwrap();
        assert!(sweep.mass_decreasing);
        assert!((0..8).all(|k| sweep
            .rows
            .windows(2)
            .all(|w| w[1].coords[k] < w[0].coords[k])));
        assert_eq!(sweep.norm_verdict, NormVerdict::NonErgodic);
        assert!(sweep.extrapolated);
    }

    #[test]
    fn support_exclusion_examples() {
        let r = check_corollary_support(&SimplexPoint::vertex(3), &[(3, 5)], 1e-8);
        assert!(r.passed());
        let pairs: Vec<(usize, usize)> = (2..6)
            .flat_map(|k| (k + 1..8).map(move |i| (k, i)))
            .collect();
        let r = check_corollary_support(&SimplexPoint::vertex(1), &pairs, 1e-8);
        assert!(r.passed());
        assert_eq!(r.checked, pairs.len());
        let r = check_corollary_support(&SimplexPoint::uniform([2, 3]).unwrap(), &[(2, 3)], 1e-8);
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn corollary_on_random_vplus() {
        let m = SkewMatrix::random(11, 0.0, 1.0).unwrap();
        let v = VolterraOperator::new(m.clone());
        let x0 = SimplexPoint::uniform([3, 6, 9, 12]).unwrap();
        let est = estimate_omega(&v, &x0, Mode::Norm, &budget(100_000)).unwrap();
        let x_star = est.verdict.target().unwrap();
        let pairs = positive_pairs(&m, 20, 0.1);
        assert!(!pairs.is_empty());
        assert!(check_corollary_support(&x_star, &pairs, 1e-8).passed());
        assert!(negative_pairs(&m, 20, 0.0).is_empty());
    }

    #[test]
    fn logistic_helper() {
        assert_eq!(logistic(-0.5, 0.0), 0.0);
        assert_eq!(logistic(-0.5, 1.0), 1.0);
        for alpha in [-1.0, -0.5, -0.1] {
            for xi0 in [0.1, 0.5, 0.9] {
                let orbit = logistic_orbit(alpha, xi0, 1e-9, 100_000).unwrap();
                assert!(orbit.windows(2).all(|w| w[1] < w[0]));
                assert!(*orbit.last().unwrap() < 1e-9);
            }
        }
        assert!(logistic_orbit(0.5, 0.5, 1e-9, 10).is_err());
        assert!(logistic_orbit(-0.5, 1.5, 1e-9, 10).is_err());
    }

    fn sorted_support(max: usize) -> impl Strategy<Value = Vec<usize>> {
        prop::collection::btree_set(1..=max, 2..=6).prop_map(|s| s.into_iter().collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn vplus_norm_and_weak_agree(seed in 0u64..1000, support in sorted_support(10)) {
            let v = VolterraOperator::new(SkewMatrix::random(seed, 0.05, 1.0).unwrap());
            let x0 = SimplexPoint::uniform(support.clone()).unwrap();
            let b = budget(100_000);
            let norm = estimate_omega(&v, &x0, Mode::Norm, &b).unwrap();
            let weak = estimate_omega(&v, &x0, Mode::Weak, &b).unwrap();
            prop_assert_eq!(&norm.verdict, &Verdict::VertexLimit { index: support[0] });
            prop_assert_eq!(norm.verdict, weak.verdict);
        }

        #[test]
        fn vminus_goes_to_max_support(seed in 0u64..1000, support in sorted_support(10)) {
            let v = VolterraOperator::new(SkewMatrix::random(seed, -1.0, -0.05).unwrap());
            let x0 = SimplexPoint::uniform(support.clone()).unwrap();
            let est = estimate_omega(&v, &x0, Mode::Weak, &budget(100_000)).unwrap();
            prop_assert_eq!(est.verdict, Verdict::VertexLimit { index: *support.last().unwrap() });
        }

        #[test]
        fn limits_lie_on_the_boundary(seed in 0u64..1000, support in sorted_support(8), sign in prop::bool::ANY) {
            let (lo, hi) = if sign { (0.05, 1.0) } else { (-1.0, -0.05) };
            let v = VolterraOperator::new(SkewMatrix::random(seed, lo, hi).unwrap());
            let x0 = SimplexPoint::uniform(support).unwrap();
            let est = estimate_omega(&v, &x0, Mode::Weak, &budget(100_000)).unwrap();
            let p = est.verdict.target().unwrap();
            let probe = budget(1).probe();
            prop_assert!((1..=probe).any(|k| p.get(k) < 1e-8));
        }
    }
}
