//! Selling information: buyers of type `t` value a distribution of
//! posteriors `y` through `g(integral V(mu, t) y(d mu), p)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::blackwell::{self, Belief, PosteriorDistribution, SharingProofReport};
use crate::error::{Error, Result};
use crate::grid::{GridFn, Tolerance};
use crate::screening::{self, IcReport, OrderRelation, ScdReport};
use crate::synthesis::{Allocation, Preference};

pub type BeliefFn = Arc<dyn Fn(&Belief, f64) -> f64 + Send + Sync>;
pub type PaymentFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

const FD_STEP: f64 = 1e-4;
const CONVEXITY_SLACK: f64 = 1e-10;

/// Value `V(mu, t)` of holding posterior `mu`, with its type derivative.
#[derive(Clone)]
pub struct ValueOfInformation {
    v: BeliefFn,
    v_t: BeliefFn,
    bound: f64,
}

impl ValueOfInformation {
    pub fn new(
        v: impl Fn(&Belief, f64) -> f64 + Send + Sync + 'static,
        v_t: impl Fn(&Belief, f64) -> f64 + Send + Sync + 'static,
        bound: f64,
    ) -> Result<Self> {
        if !(bound >= 0.0) {
            return Err(Error::Argument(format!(
                "bound must be non-negative, got {bound}"
            )));
        }
        Ok(Self {
            v: Arc::new(v),
            v_t: Arc::new(v_t),
            bound,
        })
    }

    /// Forecasting payoff `V(mu, t) = t |mu|_2`: a type-`t` forecaster
    /// reports `a = mu` under the scoring rule.
    pub fn scoring_l2() -> Self {
        Self {
            v: Arc::new(|mu, t| t * mu.norm2()),
            v_t: Arc::new(|mu, _| mu.norm2()),
            bound: 1.0,
        }
    }

    pub fn value(&self, mu: &Belief, t: f64) -> f64 {
        (self.v)(mu, t)
    }

    pub fn t_partial(&self, mu: &Belief, t: f64) -> f64 {
        (self.v_t)(mu, t)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Samples random mixture triples and types; fails on the first
    /// convexity or derivative-bound breach.
    pub fn probe(&self, states: usize, trials: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            let a = random_belief(states, &mut rng)?;
            let b = random_belief(states, &mut rng)?;
            let lambda: f64 = rng.gen_range(0.0..=1.0);
            let t: f64 = rng.gen_range(0.0..=1.0);
            let mid = a.mix(&b, lambda)?;
            let chord = lambda * self.value(&a, t) + (1.0 - lambda) * self.value(&b, t);
            let at_mid = self.value(&mid, t);
            if at_mid > chord + CONVEXITY_SLACK {
                return Err(Error::ModelViolation {
                    t,
                    value: at_mid - chord,
                    bound: CONVEXITY_SLACK,
                });
            }
            let d = self.t_partial(&a, t);
            if !(d.abs() <= self.bound * (1.0 + 1e-9)) {
                return Err(Error::ModelViolation {
                    t,
                    value: d,
                    bound: self.bound,
                });
            }
        }
        Ok(())
    }
}

fn random_belief(states: usize, rng: &mut impl Rng) -> Result<Belief> {
    let raw: Vec<f64> = (0..states).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
    // absorb rounding so the sum is exactly representable as 1
    let rest: f64 = probs[1..].iter().sum();
    probs[0] = (1.0 - rest).max(0.0);
    Belief::new(probs)
}

/// `sum_i w_i V(mu_i, t)`.
pub fn expected_value(voi: &ValueOfInformation, y: &PosteriorDistribution, t: f64) -> f64 {
    y.expect(|mu| voi.value(mu, t))
}

fn expected_t_partial(voi: &ValueOfInformation, y: &PosteriorDistribution, t: f64) -> f64 {
    y.expect(|mu| voi.t_partial(mu, t))
}

/// Buyer preferences `g(v, p)` over expected value and payment.
#[derive(Clone)]
pub struct InfoPreference {
    g: PaymentFn,
    g_v_partial: Option<PaymentFn>,
    g_v_partial_bound: f64,
    voi: ValueOfInformation,
    payment_range_hint: (f64, f64),
}

impl InfoPreference {
    pub fn new(
        g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        g_v_partial_bound: f64,
        voi: ValueOfInformation,
        payment_range_hint: (f64, f64),
    ) -> Result<Self> {
        if !(g_v_partial_bound >= 0.0) {
            return Err(Error::Argument(format!(
                "g_v_partial_bound must be non-negative, got {g_v_partial_bound}"
            )));
        }
        Ok(Self {
            g: Arc::new(g),
            g_v_partial: None,
            g_v_partial_bound,
            voi,
            payment_range_hint,
        })
    }

    /// Supplies `dg/dv`, switching the type derivative to the chain rule.
    pub fn with_g_v_partial(
        mut self,
        dg: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.g_v_partial = Some(Arc::new(dg));
        self
    }

    /// Drops the supplied `dg/dv` so type derivatives use finite differences.
    pub fn without_g_v_partial(mut self) -> Self {
        self.g_v_partial = None;
        self
    }

    /// `g(v, p) = v - p`.
    pub fn quasilinear(voi: ValueOfInformation) -> Self {
        Self::new(|v, p| v - p, 1.0, voi, (-1.0, 1.0))
            .expect("valid constants")
            .with_g_v_partial(|_, _| 1.0)
    }

    /// `g(v, p) = v - p^3`.
    pub fn power_payment(voi: ValueOfInformation) -> Self {
        Self::new(|v, p| v - p * p * p, 1.0, voi, (-1.0, 1.0))
            .expect("valid constants")
            .with_g_v_partial(|_, _| 1.0)
    }

    pub fn voi(&self) -> &ValueOfInformation {
        &self.voi
    }

    pub fn g(&self, v: f64, p: f64) -> f64 {
        (self.g)(v, p)
    }

    pub fn has_g_v_partial(&self) -> bool {
        self.g_v_partial.is_some()
    }
}

/// Index into the distribution registry of an information menu.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct InfoHandle(pub usize);

/// `f(y, p, t) = g(expected_value(y, t), p)` over handles into `registry`.
pub fn build_info_preference(
    ip: &InfoPreference,
    registry: Arc<Vec<PosteriorDistribution>>,
) -> Result<Preference<InfoHandle>> {
    let payoff = {
        let (g, voi, reg) = (Arc::clone(&ip.g), ip.voi.clone(), Arc::clone(&registry));
        move |y: &InfoHandle, p: f64, t: f64| g(expected_value(&voi, &reg[y.0], t), p)
    };
    let bound = ip.g_v_partial_bound * ip.voi.bound;
    let pref = match &ip.g_v_partial {
        Some(dg) => {
            let (dg, voi, reg) = (Arc::clone(dg), ip.voi.clone(), Arc::clone(&registry));
            Preference::new(
                payoff,
                move |y: &InfoHandle, p: f64, t: f64| {
                    let dist = &reg[y.0];
                    dg(expected_value(&voi, dist, t), p) * expected_t_partial(&voi, dist, t)
                },
                bound,
                ip.payment_range_hint,
            )?
        }
        None => {
            let f = Arc::new(payoff);
            let fd = Arc::clone(&f);
            Preference::new(
                move |y: &InfoHandle, p: f64, t: f64| f(y, p, t),
                move |y: &InfoHandle, p: f64, t: f64| {
                    let h = FD_STEP;
                    if t - h < 0.0 {
                        (-3.0 * fd(y, p, t) + 4.0 * fd(y, p, t + h) - fd(y, p, t + 2.0 * h))
                            / (2.0 * h)
                    } else if t + h > 1.0 {
                        (3.0 * fd(y, p, t) - 4.0 * fd(y, p, t - h) + fd(y, p, t - 2.0 * h))
                            / (2.0 * h)
                    } else {
                        (fd(y, p, t + h) - fd(y, p, t - h)) / (2.0 * h)
                    }
                },
                bound,
                ip.payment_range_hint,
            )?
        }
    };
    Ok(pref)
}

/// Blackwell comparison over registry handles, memoised per pair.
pub fn blackwell_order(
    registry: Arc<Vec<PosteriorDistribution>>,
    tol: Tolerance,
) -> impl Fn(&InfoHandle, &InfoHandle) -> OrderRelation + Send + Sync + 'static {
    let cache: Mutex<HashMap<(usize, usize), OrderRelation>> = Mutex::new(HashMap::new());
    move |a: &InfoHandle, b: &InfoHandle| {
        if a == b || registry[a.0] == registry[b.0] {
            return OrderRelation::Equal;
        }
        if let Some(r) = cache.lock().expect("cache lock").get(&(a.0, b.0)) {
            return *r;
        }
        // mean mismatches are rejected up front, so errors here mean the
        // pair cannot be compared
        let r = blackwell::blackwell_compare(&registry[a.0], &registry[b.0], tol)
            .unwrap_or(OrderRelation::Incomparable);
        cache.lock().expect("cache lock").insert((a.0, b.0), r);
        r
    }
}

/// Handle allocation `t_i -> InfoHandle(i)` ordered by Blackwell.
pub fn handle_allocation(
    registry: Arc<Vec<PosteriorDistribution>>,
    tol: Tolerance,
) -> Result<Allocation<InfoHandle>> {
    let handles = (0..registry.len()).map(InfoHandle).collect();
    Ok(Allocation::new(handles)?.with_order(blackwell_order(registry, tol)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InformationMenu {
    pub payments: GridFn,
    pub ic: IcReport,
    pub scd: ScdReport,
    pub sharing: SharingProofReport,
}

/// Prices a Blackwell-increasing allocation with envelope payments.
pub fn price_information_menu(
    ip: &InfoPreference,
    alloc: &[PosteriorDistribution],
    k: f64,
    tol: Tolerance,
) -> Result<InformationMenu> {
    if alloc.len() < 3 {
        return Err(Error::GridTooSmall(alloc.len()));
    }
    let mu0 = alloc[0].mean();
    for (i, y) in alloc.iter().enumerate() {
        if !blackwell::bayes_plausible(y, &mu0, Tolerance::absolute(1e-9)?)? {
            return Err(Error::Precondition(format!(
                "allocation entry {i} has a different mean from entry 0"
            )));
        }
    }
    let order_tol = Tolerance::absolute(1e-9)?;
    for i in 0..alloc.len() - 1 {
        if alloc[i] == alloc[i + 1] {
            continue;
        }
        let rel = blackwell::blackwell_compare(&alloc[i], &alloc[i + 1], order_tol)?;
        if matches!(rel, OrderRelation::Greater | OrderRelation::Incomparable) {
            return Err(Error::NotIncreasing {
                lower: i,
                upper: i + 1,
                relation: rel,
            });
        }
    }
    let registry = Arc::new(alloc.to_vec());
    let pref = build_info_preference(ip, Arc::clone(&registry))?;
    let handles = handle_allocation(Arc::clone(&registry), order_tol)?;
    let imp = screening::implement_increasing(&pref, &handles, k, tol)?;
    let sharing = blackwell::sharing_proof(alloc, order_tol)?;
    Ok(InformationMenu {
        payments: imp.payments,
        ic: imp.ic,
        scd: imp.scd,
        sharing,
    })
}

/// Symmetric binary experiments of accuracy `q(t) = 0.5 + 0.4 t` under a
/// uniform two-state prior, one per grid node.
pub fn nested_binary_allocation(
    n_points: usize,
    q0: f64,
    slope: f64,
) -> Result<Vec<PosteriorDistribution>> {
    if n_points < 3 {
        return Err(Error::GridTooSmall(n_points));
    }
    let mu0 = Belief::uniform(2)?;
    (0..n_points)
        .map(|i| {
            let t = i as f64 / (n_points - 1) as f64;
            PosteriorDistribution::binary_symmetric(&mu0, q0 + slope * t)
        })
        .collect()
}
