//! Payment schedules that make an allocation satisfy the envelope formula.
//!
//! With `phi(p, t) = f(Y(t), p, t)` strictly decreasing and onto in `p`, the
//! continuation value `W(t) = f(Y(t), P(t), t)` solves
//! `W(t) = k + integral_0^t chi(W(s), s) ds` where
//! `chi(w, t) = f_3(Y(t), phi^{-1}(w, t), t)`. [`synthesize_payments`]
//! marches that equation with Heun steps on the allocation grid and then
//! inverts `phi` node by node.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, GridFn, Tolerance};
use crate::screening::OrderRelation;

pub type PayoffFn<Y> = Arc<dyn Fn(&Y, f64, f64) -> f64 + Send + Sync>;
pub type OrderFn<Y> = Arc<dyn Fn(&Y, &Y) -> OrderRelation + Send + Sync>;

/// Bracket doublings allowed before declaring the payoff not onto.
pub const MAX_DOUBLINGS: u32 = 60;

/// Preferences `f(y, p, t)` over outcome, payment and type.
pub struct Preference<Y> {
    payoff: PayoffFn<Y>,
    t_partial: PayoffFn<Y>,
    t_partial_bound: f64,
    payment_range_hint: (f64, f64),
}

impl<Y> Clone for Preference<Y> {
    fn clone(&self) -> Self {
        Self {
            payoff: Arc::clone(&self.payoff),
            t_partial: Arc::clone(&self.t_partial),
            t_partial_bound: self.t_partial_bound,
            payment_range_hint: self.payment_range_hint,
        }
    }
}

impl<Y> Preference<Y> {
    pub fn new(
        payoff: impl Fn(&Y, f64, f64) -> f64 + Send + Sync + 'static,
        t_partial: impl Fn(&Y, f64, f64) -> f64 + Send + Sync + 'static,
        t_partial_bound: f64,
        payment_range_hint: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = payment_range_hint;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Argument(format!(
                "payment range hint ({lo}, {hi}) must be a finite increasing pair"
            )));
        }
        if !(t_partial_bound >= 0.0) {
            return Err(Error::Argument(format!(
                "type-derivative bound must be non-negative, got {t_partial_bound}"
            )));
        }
        Ok(Self {
            payoff: Arc::new(payoff),
            t_partial: Arc::new(t_partial),
            t_partial_bound,
            payment_range_hint,
        })
    }

    pub fn payoff(&self, y: &Y, p: f64, t: f64) -> f64 {
        (self.payoff)(y, p, t)
    }

    pub fn t_partial(&self, y: &Y, p: f64, t: f64) -> f64 {
        (self.t_partial)(y, p, t)
    }

    pub fn t_partial_bound(&self) -> f64 {
        self.t_partial_bound
    }

    pub fn payment_range_hint(&self) -> (f64, f64) {
        self.payment_range_hint
    }

    /// Checks strict decrease in `p` and the type-derivative bound on a
    /// uniform payment lattice spanning the range hint.
    pub fn probe(&self, y: &Y, t: f64, lattice_points: usize, slack: f64) -> Result<()> {
        let (lo, hi) = self.payment_range_hint;
        let n = lattice_points.max(2);
        let mut prev: Option<(f64, f64)> = None;
        for j in 0..n {
            let p = lo + (hi - lo) * j as f64 / (n - 1) as f64;
            let v = self.payoff(y, p, t);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    index: j,
                    t,
                    reason: format!("payoff at p = {p} returned {v}"),
                });
            }
            if let Some((p_prev, v_prev)) = prev {
                if v >= v_prev {
                    return Err(Error::NotDecreasing {
                        t,
                        p_lo: p_prev,
                        p_hi: p,
                    });
                }
            }
            let d = self.t_partial(y, p, t);
            if !(d.abs() <= self.t_partial_bound * (1.0 + slack)) {
                return Err(Error::ModelViolation {
                    t,
                    value: d,
                    bound: self.t_partial_bound,
                });
            }
            prev = Some((p, v));
        }
        Ok(())
    }
}

/// One outcome per grid node, with an optional partial order.
pub struct Allocation<Y> {
    outcomes: Vec<Y>,
    order: Option<OrderFn<Y>>,
}

impl<Y: Clone> Clone for Allocation<Y> {
    fn clone(&self) -> Self {
        Self {
            outcomes: self.outcomes.clone(),
            order: self.order.clone(),
        }
    }
}

impl<Y> Allocation<Y> {
    pub fn new(outcomes: Vec<Y>) -> Result<Self> {
        if outcomes.len() < 3 {
            return Err(Error::GridTooSmall(outcomes.len()));
        }
        Ok(Self {
            outcomes,
            order: None,
        })
    }

    pub fn from_fn(n_points: usize, f: impl FnMut(f64) -> Y) -> Result<Self> {
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

    pub fn with_order(
        mut self,
        cmp: impl Fn(&Y, &Y) -> OrderRelation + Send + Sync + 'static,
    ) -> Self {
        self.order = Some(Arc::new(cmp));
        self
    }

    pub fn with_shared_order(mut self, cmp: OrderFn<Y>) -> Self {
        self.order = Some(cmp);
        self
    }

    pub fn outcomes(&self) -> &[Y] {
        &self.outcomes
    }

    pub fn order(&self) -> Option<&OrderFn<Y>> {
        self.order.as_ref()
    }

    pub fn n_points(&self) -> usize {
        self.outcomes.len()
    }

    pub fn node(&self, i: usize) -> f64 {
        grid::node(self.outcomes.len(), i)
    }
}

impl Allocation<f64> {
    /// Real-valued outcomes under their natural order.
    pub fn real(outcomes: Vec<f64>) -> Result<Self> {
        Ok(Self::new(outcomes)?.with_order(OrderRelation::of_reals))
    }
}

/// Payment `p` with `|f(y, p, t) - target| <= tol.abs_tol`, by bracket
/// expansion from the range hint followed by bisection.
pub fn invert_in_payment<Y>(
    pref: &Preference<Y>,
    y: &Y,
    t: f64,
    target: f64,
    tol: Tolerance,
) -> Result<f64> {
    let eval = |p: f64| -> Result<f64> {
        let v = pref.payoff(y, p, t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation {
                index: 0,
                t,
                reason: format!("payoff at p = {p} returned {v}"),
            })
        }
    };
    let (mut lo, mut hi) = pref.payment_range_hint;
    let mut width = (hi - lo).max(1.0);
    let mut doublings = 0u32;
    let not_onto = |doublings| Error::NotOnto {
        target,
        t,
        doublings,
    };

    // payoff decreases in p: f(lo) must sit above the target, f(hi) below
    let mut f_lo = eval(lo)?;
    while f_lo < target {
        if doublings >= MAX_DOUBLINGS {
            return Err(not_onto(doublings));
        }
        hi = lo;
        lo -= width;
        width *= 2.0;
        doublings += 1;
        f_lo = eval(lo)?;
    }
    let mut f_hi = eval(hi)?;
    while f_hi > target {
        if doublings >= MAX_DOUBLINGS {
            return Err(not_onto(doublings));
        }
        lo = hi;
        f_lo = f_hi;
        hi += width;
        width *= 2.0;
        doublings += 1;
        f_hi = eval(hi)?;
    }
    if (f_lo - target).abs() <= tol.abs_tol {
        return Ok(lo);
    }
    if (f_hi - target).abs() <= tol.abs_tol {
        return Ok(hi);
    }

    let mut best = (lo, (f_lo - target).abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = eval(mid)?;
        let gap = (v - target).abs();
        if gap < best.1 {
            best = (mid, gap);
        }
        if gap <= tol.abs_tol {
            return Ok(mid);
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthesisConfig {
    /// Payment lattice size for the monotonicity probe.
    pub probe_points: usize,
    /// Probe every `probe_stride`-th grid node.
    pub probe_stride: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            probe_points: 33,
            probe_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Synthesis {
    pub payments: GridFn,
    /// Continuation value `W(t_i) = f(Y(t_i), P(t_i), t_i)` from the march.
    pub continuation: GridFn,
}

pub fn synthesize_payments<Y>(
    pref: &Preference<Y>,
    alloc: &Allocation<Y>,
    k: f64,
    tol: Tolerance,
) -> Result<GridFn> {
    Ok(synthesize_with(pref, alloc, k, tol, SynthesisConfig::default())?.payments)
}

pub fn synthesize_with<Y>(
    pref: &Preference<Y>,
    alloc: &Allocation<Y>,
    k: f64,
    tol: Tolerance,
    config: SynthesisConfig,
) -> Result<Synthesis> {
    let n = alloc.n_points();
    let h = 1.0 / (n - 1) as f64;
    let ys = alloc.outcomes();

    for i in (0..n).step_by(config.probe_stride.max(1)) {
        pref.probe(&ys[i], alloc.node(i), config.probe_points, tol.rel_tol)?;
    }

    let bound = pref.t_partial_bound * (1.0 + tol.rel_tol);
    let chi = |i: usize, w: f64| -> Result<f64> {
        let t = alloc.node(i);
        let p = invert_in_payment(pref, &ys[i], t, w, tol)?;
        let d = pref.t_partial(&ys[i], p, t);
        if !(d.abs() <= bound) {
            return Err(Error::ModelViolation {
                t,
                value: d,
                bound: pref.t_partial_bound,
            });
        }
        Ok(d)
    };

    let mut w = Vec::with_capacity(n);
    w.push(k);
    for i in 0..n - 1 {
        let k1 = chi(i, w[i])?;
        let predicted = w[i] + h * k1;
        let k2 = chi(i + 1, predicted)?;
        w.push(w[i] + 0.5 * h * (k1 + k2));
    }
    let payments = w
        .iter()
        .enumerate()
        .map(|(i, &wi)| invert_in_payment(pref, &ys[i], alloc.node(i), wi, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(Synthesis {
        payments: GridFn::new(payments)?,
        continuation: GridFn::new(w)?,
    })
}

/// `t -> f(Y(t), P(t), t) - k - integral_0^t f_3(Y(s), P(s), s) ds`.
pub fn verify_envelope_consistency<Y>(
    pref: &Preference<Y>,
    alloc: &Allocation<Y>,
    payments: &GridFn,
    k: f64,
) -> Result<GridFn> {
    let n = alloc.n_points();
    if payments.n_points() != n {
        return Err(Error::Argument(format!(
            "payments have {} points, allocation has {n}",
            payments.n_points()
        )));
    }
    let ys = alloc.outcomes();
    let ps = payments.values();
    let partial = GridFn::new(
        (0..n)
            .map(|i| pref.t_partial(&ys[i], ps[i], alloc.node(i)))
            .collect(),
    )?
    .cumulative();
    GridFn::new(
        (0..n)
            .map(|i| pref.payoff(&ys[i], ps[i], alloc.node(i)) - k - partial.values()[i])
            .collect(),
    )
}
