//! Decision problems, decision rules and the envelope / outer first-order
//! condition residuals.
//!
//! A [`DecisionProblem`] is an objective `f(x, t)` over an action set that is
//! never inspected: actions are opaque tokens of type `A`. A [`DecisionRule`]
//! assigns one action to each grid node. Everything here is a grid-scale
//! residual; the check in [`check_main_theorem`] compares the envelope
//! residual with the outer first-order residual on an `(r, t)` mesh.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, GridFn, Tolerance};

pub type Objective<A> = Arc<dyn Fn(&A, f64) -> f64 + Send + Sync>;

/// Default step for the finite-difference type derivative.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Where the type derivative `f_2` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartialSource {
    Analytic,
    FiniteDifference { step: f64 },
}

pub struct DecisionProblem<A> {
    objective: Objective<A>,
    t_partial: Option<Objective<A>>,
    t_partial_bound: Option<f64>,
    fd_step: f64,
}

impl<A> Clone for DecisionProblem<A> {
    fn clone(&self) -> Self {
        Self {
            objective: Arc::clone(&self.objective),
            t_partial: self.t_partial.clone(),
            t_partial_bound: self.t_partial_bound,
            fd_step: self.fd_step,
        }
    }
}

impl<A> DecisionProblem<A> {
    pub fn new(objective: impl Fn(&A, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            objective: Arc::new(objective),
            t_partial: None,
            t_partial_bound: None,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_t_partial(mut self, f2: impl Fn(&A, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.t_partial = Some(Arc::new(f2));
        self
    }

    pub fn with_t_partial_bound(mut self, bound: f64) -> Self {
        self.t_partial_bound = Some(bound.abs());
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    pub fn t_partial_bound(&self) -> Option<f64> {
        self.t_partial_bound
    }

    pub fn partial_source(&self) -> PartialSource {
        match self.t_partial {
            Some(_) => PartialSource::Analytic,
            None => PartialSource::FiniteDifference { step: self.fd_step },
        }
    }

    pub fn objective(&self, x: &A, t: f64) -> f64 {
        (self.objective)(x, t)
    }

    /// `f_2(x, t)`: analytic when supplied, otherwise a second-order finite
    /// difference (one-sided within `fd_step` of the boundary).
    pub fn t_partial(&self, x: &A, t: f64) -> f64 {
        if let Some(f2) = &self.t_partial {
            return f2(x, t);
        }
        let h = self.fd_step;
        let f = |s: f64| (self.objective)(x, s);
        if t - h >= 0.0 && t + h <= 1.0 {
            (f(t + h) - f(t - h)) / (2.0 * h)
        } else if t - h < 0.0 {
            (-3.0 * f(t) + 4.0 * f(t + h) - f(t + 2.0 * h)) / (2.0 * h)
        } else {
            (3.0 * f(t) - 4.0 * f(t - h) + f(t - 2.0 * h)) / (2.0 * h)
        }
    }

    fn eval(&self, x: &A, t: f64, index: usize) -> Result<f64> {
        finite(self.objective(x, t), index, t, "objective")
    }

    fn eval_partial(&self, x: &A, t: f64, index: usize) -> Result<f64> {
        finite(self.t_partial(x, t), index, t, "type derivative")
    }
}

fn finite(v: f64, index: usize, t: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation {
            index,
            t,
            reason: format!("{what} returned {v}"),
        })
    }
}

/// One action per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRule<A> {
    actions: Vec<A>,
}

impl<A> DecisionRule<A> {
    pub fn new(actions: Vec<A>) -> Result<Self> {
        if actions.len() < 3 {
            return Err(Error::GridTooSmall(actions.len()));
        }
        Ok(Self { actions })
    }

    pub fn from_fn(n_points: usize, f: impl FnMut(f64) -> A) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::GridTooSmall(n_points));
        }
        Self::new(
            (0..n_points)
                .map(|i| grid::node(n_points, i))
                .map(f)
                .collect(),
        )
    }

    pub fn actions(&self) -> &[A] {
        &self.actions
    }

    pub fn n_points(&self) -> usize {
        self.actions.len()
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.actions.len() - 1) as f64
    }

    fn node(&self, i: usize) -> f64 {
        grid::node(self.actions.len(), i)
    }

    /// Wraps the rule with a caller-declared Lipschitz constant. The grid
    /// slope under `metric` is estimated and a warning logged when it
    /// exceeds the declaration.
    pub fn assert_lipschitz(
        &self,
        declared: f64,
        metric: impl Fn(&A, &A) -> f64,
    ) -> LipschitzRule<'_, A> {
        let h = self.step();
        let estimated = self
            .actions
            .windows(2)
            .map(|w| metric(&w[1], &w[0]) / h)
            .fold(0.0, f64::max);
        if estimated > declared * (1.0 + LIPSCHITZ_SLACK) {
            log::warn!(
                "decision rule grid slope {estimated} exceeds declared Lipschitz constant {declared}"
            );
        }
        LipschitzRule {
            rule: self,
            declared,
            estimated,
        }
    }
}

/// Relative slack on the declared constant absorbing grid round-off.
const LIPSCHITZ_SLACK: f64 = 1e-9;

/// A decision rule the caller vouches is Lipschitz.
#[derive(Debug, Clone, Copy)]
pub struct LipschitzRule<'a, A> {
    rule: &'a DecisionRule<A>,
    declared: f64,
    estimated: f64,
}

impl<A> LipschitzRule<'_, A> {
    pub fn declared(&self) -> f64 {
        self.declared
    }

    pub fn estimated(&self) -> f64 {
        self.estimated
    }

    pub fn exceeds_declared(&self) -> bool {
        self.estimated > self.declared * (1.0 + LIPSCHITZ_SLACK)
    }
}

/// `V_X(t_i) = f(X(t_i), t_i)`.
pub fn value_function<A>(p: &DecisionProblem<A>, x: &DecisionRule<A>) -> Result<GridFn> {
    let values = x
        .actions
        .iter()
        .enumerate()
        .map(|(i, a)| p.eval(a, x.node(i), i))
        .collect::<Result<Vec<_>>>()?;
    GridFn::new(values)
}

/// `s -> f_2(X(s), s)` along the rule.
pub fn partial_along<A>(p: &DecisionProblem<A>, x: &DecisionRule<A>) -> Result<GridFn> {
    let values = x
        .actions
        .iter()
        .enumerate()
        .map(|(i, a)| p.eval_partial(a, x.node(i), i))
        .collect::<Result<Vec<_>>>()?;
    GridFn::new(values)
}

/// `t -> V_X(t) - V_X(0) - integral_0^t f_2(X(s), s) ds`.
pub fn envelope_residual<A>(p: &DecisionProblem<A>, x: &DecisionRule<A>) -> Result<GridFn> {
    let value = value_function(p, x)?;
    let integral = partial_along(p, x)?.cumulative();
    let v0 = value.values()[0];
    GridFn::new(
        value
            .values()
            .iter()
            .zip(integral.values())
            .map(|(v, w)| v - v0 - w)
            .collect(),
    )
}

/// Finite-difference estimates of `d/dm integral_r^t f(X(s+m), s) ds` at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OuterFocEstimate {
    pub symmetric: f64,
    pub forward: f64,
    pub backward: f64,
    pub shift: f64,
}

/// `integral_r^t f(X(s + k h), s) ds` for a signed step count `k`.
fn shifted_integral<A>(
    p: &DecisionProblem<A>,
    x: &DecisionRule<A>,
    r: f64,
    t: f64,
    k: isize,
) -> Result<f64> {
    let n = x.n_points();
    grid::integrate_nodes(n, r, t, |i| {
        let j = i as isize + k;
        let a = &x.actions[j as usize];
        p.eval(a, x.node(i), i)
    })
}

fn check_shift_range(n: usize, r: f64, t: f64, k: usize, m: f64) -> Result<()> {
    grid::check_unit("r", r)?;
    grid::check_unit("t", t)?;
    let (lo, hi) = grid::support_indices(n, r.min(t), r.max(t));
    if lo < k || hi + k > n - 1 {
        return Err(Error::Domain {
            what: "shifted interval endpoint",
            value: if lo < k { r.min(t) - m } else { r.max(t) + m },
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

pub fn outer_foc_estimate<A>(
    p: &DecisionProblem<A>,
    x: &DecisionRule<A>,
    r: f64,
    t: f64,
    m: f64,
) -> Result<OuterFocEstimate> {
    let n = x.n_points();
    let k = grid::shift_steps(n, m)?;
    check_shift_range(n, r, t, k, m)?;
    let m = k as f64 * x.step();
    let k = k as isize;
    let ahead = shifted_integral(p, x, r, t, k)?;
    let here = shifted_integral(p, x, r, t, 0)?;
    let behind = shifted_integral(p, x, r, t, -k)?;
    Ok(OuterFocEstimate {
        symmetric: (ahead - behind) / (2.0 * m),
        forward: (ahead - here) / m,
        backward: (here - behind) / m,
        shift: m,
    })
}

/// Symmetric estimate of the outer first-order derivative at shift `m`.
pub fn outer_foc_residual<A>(
    p: &DecisionProblem<A>,
    x: &DecisionRule<A>,
    r: f64,
    t: f64,
    m: f64,
) -> Result<f64> {
    Ok(outer_foc_estimate(p, x, r, t, m)?.symmetric)
}

/// Richardson combination `(4 D(m) - D(2m)) / 3` of symmetric estimates.
pub fn outer_foc_richardson<A>(
    p: &DecisionProblem<A>,
    x: &DecisionRule<A>,
    r: f64,
    t: f64,
    m: f64,
) -> Result<f64> {
    let d1 = outer_foc_residual(p, x, r, t, m)?;
    let d2 = outer_foc_residual(p, x, r, t, 2.0 * m)?;
    Ok((4.0 * d1 - d2) / 3.0)
}

/// Symmetric difference of `m -> f(X(t + m), t)` at `m = 0`. `t` must be a
/// grid node.
pub fn classical_foc_residual<A>(
    p: &DecisionProblem<A>,
    x: &LipschitzRule<'_, A>,
    t: f64,
    m: f64,
) -> Result<f64> {
    let rule = x.rule;
    let n = rule.n_points();
    let i = grid::grid_index(n, t).ok_or(Error::Alignment {
        value: t,
        step: rule.step(),
    })?;
    let k = grid::shift_steps(n, m)?;
    if i < k || i + k > n - 1 {
        return Err(Error::Domain {
            what: "t +/- shift",
            value: t,
            lo: m,
            hi: 1.0 - m,
        });
    }
    let m = k as f64 * rule.step();
    let ahead = p.eval(&rule.actions[i + k], t, i)?;
    let behind = p.eval(&rule.actions[i - k], t, i)?;
    Ok((ahead - behind) / (2.0 * m))
}

/// `|outer FOC(r, t, m) - [V_X(t) - V_X(r) - integral_r^t f_2(X(s), s) ds]|`.
pub fn identity_residual<A>(
    p: &DecisionProblem<A>,
    x: &DecisionRule<A>,
    r: f64,
    t: f64,
    m: f64,
) -> Result<f64> {
    let outer = outer_foc_residual(p, x, r, t, m)?;
    let value = value_function(p, x)?;
    let partial = partial_along(p, x)?;
    let rhs = value.value_at(t)? - value.value_at(r)? - partial.integrate(r, t)?;
    Ok((outer - rhs).abs())
}

/// Settings for the outer first-order mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterFocConfig {
    /// Points used for both `r` and `t`.
    pub mesh: Vec<f64>,
    /// Shift in grid steps.
    pub shift_steps: usize,
    /// Also report the `(m, 2m)` Richardson combination.
    pub richardson: bool,
}

impl Default for OuterFocConfig {
    fn default() -> Self {
        Self {
            mesh: (1..=9).map(|i| i as f64 / 10.0).collect(),
            shift_steps: 1,
            richardson: false,
        }
    }
}

/// Outer-FOC values on an `(r, t)` mesh; `values[a][b]` is the pair
/// `(mesh[a], mesh[b])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualMesh {
    pub mesh: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ResidualMesh {
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn get(&self, r: f64, t: f64) -> Option<f64> {
        let pos = |x: f64| self.mesh.iter().position(|m| (m - x).abs() < 1e-12);
        Some(self.values[pos(r)?][pos(t)?])
    }

    /// `(r, t, value)` rows.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.mesh.iter().enumerate().flat_map(move |(a, &r)| {
            self.mesh
                .iter()
                .enumerate()
                .map(move |(b, &t)| (r, t, self.values[a][b]))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    BothHold,
    BothFail,
    Inconsistent,
}

impl Verdict {
    pub fn from_flags(envelope_ok: bool, outer_ok: bool) -> Self {
        match (envelope_ok, outer_ok) {
            (true, true) => Verdict::BothHold,
            (false, false) => Verdict::BothFail,
            _ => Verdict::Inconsistent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeDiagnostics {
    pub t_partial: PartialSource,
    pub envelope_tol: f64,
    pub outer_foc_tol: f64,
    pub shift: f64,
    /// Total variation of `V_X` on the grid and on every other node.
    pub total_variation: f64,
    pub total_variation_coarse: f64,
    /// Set when the variation grows noticeably under refinement.
    pub variation_growth_flag: bool,
    pub richardson: Option<ResidualMesh>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub value_fn: GridFn,
    pub envelope_residual: GridFn,
    pub outer_foc_residuals: ResidualMesh,
    /// `(envelope, outer FOC)`.
    pub max_abs_residuals: (f64, f64),
    pub verdict: Verdict,
    pub diagnostics: EnvelopeDiagnostics,
}

/// Grid-calibrated tolerance `10 * B * h`, where `B` is the declared bound on
/// `|f_2|` or, failing that, its largest value along the rule.
pub fn calibrated_tolerance<A>(p: &DecisionProblem<A>, x: &DecisionRule<A>) -> Result<Tolerance> {
    let scale = match p.t_partial_bound() {
        Some(b) => b,
        None => partial_along(p, x)?.max_abs(),
    };
    Tolerance::grid_calibrated(x.n_points(), scale)
}

pub fn check_main_theorem<A>(
    p: &DecisionProblem<A>,
    x: &DecisionRule<A>,
    tol: Tolerance,
) -> Result<EnvelopeReport> {
    check_main_theorem_with(p, x, tol, &OuterFocConfig::default())
}

pub fn check_main_theorem_with<A>(
    p: &DecisionProblem<A>,
    x: &DecisionRule<A>,
    tol: Tolerance,
    config: &OuterFocConfig,
) -> Result<EnvelopeReport> {
    if config.shift_steps == 0 {
        return Err(Error::Argument("shift_steps must be at least 1".into()));
    }
    let value_fn = value_function(p, x)?;
    let envelope_residual = envelope_residual(p, x)?;
    let m = config.shift_steps as f64 * x.step();

    let mesh_with = |f: &dyn Fn(f64, f64) -> Result<f64>| -> Result<ResidualMesh> {
        let values = config
            .mesh
            .iter()
            .map(|&r| {
                config
                    .mesh
                    .iter()
                    .map(|&t| f(r, t))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ResidualMesh {
            mesh: config.mesh.clone(),
            values,
        })
    };
    let outer = mesh_with(&|r, t| outer_foc_residual(p, x, r, t, m))?;
    let richardson = if config.richardson {
        Some(mesh_with(&|r, t| outer_foc_richardson(p, x, r, t, m))?)
    } else {
        None
    };

    let reference = value_fn.max_abs();
    let envelope_tol = tol.threshold(reference);
    let outer_foc_tol = tol.threshold(reference);
    let env_max = envelope_residual.max_abs();
    let outer_max = outer.max_abs();
    let verdict = Verdict::from_flags(env_max <= envelope_tol, outer_max <= outer_foc_tol);

    let total_variation = value_fn.total_variation();
    let total_variation_coarse: f64 = value_fn
        .values()
        .iter()
        .step_by(2)
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .sum();
    let variation_growth_flag =
        total_variation - total_variation_coarse > 0.1 * total_variation_coarse.max(1e-12);

    Ok(EnvelopeReport {
        value_fn,
        envelope_residual,
        outer_foc_residuals: outer,
        max_abs_residuals: (env_max, outer_max),
        verdict,
        diagnostics: EnvelopeDiagnostics {
            t_partial: p.partial_source(),
            envelope_tol,
            outer_foc_tol,
            shift: m,
            total_variation,
            total_variation_coarse,
            variation_growth_flag,
            richardson,
        },
    })
}

/// Builds the rule `t -> maximizer(t)`, spot-checks it against `candidates`
/// and runs [`check_main_theorem`] on it.
pub fn check_necessity<A>(
    p: &DecisionProblem<A>,
    n_points: usize,
    maximizer: impl Fn(f64) -> A,
    candidates: &[A],
    tol: Tolerance,
) -> Result<EnvelopeReport> {
    let rule = DecisionRule::from_fn(n_points, maximizer)?;
    for (i, a) in rule.actions.iter().enumerate() {
        let t = rule.node(i);
        let own = p.eval(a, t, i)?;
        for c in candidates {
            let gain = p.eval(c, t, i)? - own;
            if gain > tol.threshold(own) {
                return Err(Error::NotOptimal { index: i, t, gain });
            }
        }
    }
    check_main_theorem(p, &rule, tol)
}
