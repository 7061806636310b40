//! Incentive compatibility of direct mechanisms.
//!
//! IC is always checked exhaustively: the full mimic matrix
//! `U(r, t) = f(Y(r), P(r), t)` is evaluated on the grid and every column
//! must peak on the diagonal. Single-crossing differences are verified on
//! explicit outcome/payment pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFn, Tolerance};
use crate::synthesis::{self, Allocation, Preference};

/// Result of comparing two outcomes in a partial order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderRelation {
    Less,
    Equal,
    Greater,
    Incomparable,
}

impl OrderRelation {
    pub fn of_reals(a: &f64, b: &f64) -> OrderRelation {
        match a.partial_cmp(b) {
            Some(std::cmp::Ordering::Less) => OrderRelation::Less,
            Some(std::cmp::Ordering::Equal) => OrderRelation::Equal,
            Some(std::cmp::Ordering::Greater) => OrderRelation::Greater,
            None => OrderRelation::Incomparable,
        }
    }

    /// Relation implied by the two one-directional tests `a <= b`, `b <= a`.
    pub fn from_leq(a_le_b: bool, b_le_a: bool) -> OrderRelation {
        match (a_le_b, b_le_a) {
            (true, true) => OrderRelation::Equal,
            (true, false) => OrderRelation::Less,
            (false, true) => OrderRelation::Greater,
            (false, false) => OrderRelation::Incomparable,
        }
    }
}

/// A direct mechanism `(Y, P)` together with the agent's preferences.
pub struct Mechanism<Y> {
    pref: Preference<Y>,
    allocation: Allocation<Y>,
    payments: GridFn,
}

impl<Y> Mechanism<Y> {
    pub fn new(pref: Preference<Y>, allocation: Allocation<Y>, payments: GridFn) -> Result<Self> {
        if allocation.n_points() != payments.n_points() {
            return Err(Error::Argument(format!(
                "allocation has {} points, payments {}",
                allocation.n_points(),
                payments.n_points()
            )));
        }
        Ok(Self {
            pref,
            allocation,
            payments,
        })
    }

    pub fn pref(&self) -> &Preference<Y> {
        &self.pref
    }

    pub fn allocation(&self) -> &Allocation<Y> {
        &self.allocation
    }

    pub fn payments(&self) -> &GridFn {
        &self.payments
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    /// Reported type index `r`.
    pub reported: usize,
    /// True type index `t`.
    pub true_type: usize,
    pub r: f64,
    pub t: f64,
    /// `U(r, t) - U(t, t)`.
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcReport {
    /// `mimic_matrix[r][t] = f(Y(r), P(r), t)`.
    pub mimic_matrix: Vec<Vec<f64>>,
    pub worst_violation: f64,
    /// Pairs whose gain exceeds the threshold, largest first.
    pub violating_pairs: Vec<Violation>,
    pub is_ic: bool,
    pub threshold: f64,
}

impl IcReport {
    pub fn gain(&self, reported: usize, true_type: usize) -> f64 {
        self.mimic_matrix[reported][true_type] - self.mimic_matrix[true_type][true_type]
    }

    /// Whether every column of the mimic matrix is maximised on the
    /// diagonal within `slack`.
    pub fn diagonal_dominant(&self, slack: f64) -> bool {
        let n = self.mimic_matrix.len();
        (0..n).all(|t| {
            let best = (0..n)
                .map(|r| self.mimic_matrix[r][t])
                .fold(f64::NEG_INFINITY, f64::max);
            best - self.mimic_matrix[t][t] <= slack
        })
    }
}

pub fn ic_report<Y>(m: &Mechanism<Y>, tol: Tolerance) -> Result<IcReport> {
    let n = m.allocation.n_points();
    let ys = m.allocation.outcomes();
    let ps = m.payments.values();
    let mut mimic = vec![vec![0.0; n]; n];
    for r in 0..n {
        for t in 0..n {
            let tt = m.allocation.node(t);
            let v = m.pref.payoff(&ys[r], ps[r], tt);
            if !v.is_finite() {
                return Err(Error::Evaluation {
                    index: t,
                    t: tt,
                    reason: format!("payoff of report {r} returned {v}"),
                });
            }
            mimic[r][t] = v;
        }
    }
    let threshold = tol.threshold(0.0);
    let mut worst = 0.0f64;
    let mut violating = Vec::new();
    for t in 0..n {
        let own = mimic[t][t];
        for r in 0..n {
            let gain = mimic[r][t] - own;
            worst = worst.max(gain);
            if gain > threshold {
                violating.push(Violation {
                    reported: r,
                    true_type: t,
                    r: m.allocation.node(r),
                    t: m.allocation.node(t),
                    gain,
                });
            }
        }
    }
    violating.sort_by(|a, b| {
        b.gain
            .total_cmp(&a.gain)
            .then(a.reported.cmp(&b.reported))
            .then(a.true_type.cmp(&b.true_type))
    });
    Ok(IcReport {
        mimic_matrix: mimic,
        worst_violation: worst,
        is_ic: worst <= threshold,
        violating_pairs: violating,
        threshold,
    })
}

/// An outcome/payment pair.
pub type Offer<Y> = (Y, f64);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScdViolation {
    pub pair: usize,
    pub t: f64,
    pub t_prime: f64,
    pub delta_t: f64,
    pub delta_t_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScdReport {
    pub holds: bool,
    pub strict: bool,
    pub pairs_checked: usize,
    /// Per pair, the first `t` at which the difference is non-negative.
    pub crossings: Vec<Option<f64>>,
    pub first_violation: Option<ScdViolation>,
}

fn sign_with_dead_zone(v: f64, eps: f64) -> i8 {
    if v > eps {
        1
    } else if v < -eps {
        -1
    } else {
        0
    }
}

/// Checks that `t -> f(y', p', t) - f(y, p, t)` is single-crossing for each
/// pair `((y, p), (y', p'))` with `y < y'`.
///
/// Differences within `tol.abs_tol` of zero count as zero. In weak mode a
/// violation is a non-negative difference followed by a negative one, or a
/// positive one followed by zero. Strict mode also rejects a difference that
/// sits at zero on two or more nodes.
pub fn single_crossing_differences_check<Y>(
    pref: &Preference<Y>,
    order: &dyn Fn(&Y, &Y) -> OrderRelation,
    pairs: &[(Offer<Y>, Offer<Y>)],
    t_grid: &[f64],
    strict: bool,
    tol: Tolerance,
) -> Result<ScdReport> {
    let eps = tol.abs_tol;
    let mut crossings = Vec::with_capacity(pairs.len());
    let mut first_violation = None;
    for (k, ((y, p), (y2, p2))) in pairs.iter().enumerate() {
        if order(y, y2) != OrderRelation::Less {
            return Err(Error::Argument(format!(
                "pair {k} is not ordered lower < upper"
            )));
        }
        let delta: Vec<f64> = t_grid
            .iter()
            .map(|&t| pref.payoff(y2, *p2, t) - pref.payoff(y, *p, t))
            .collect();
        let mut nonneg: Option<usize> = None;
        let mut positive: Option<usize> = None;
        let mut zero: Option<usize> = None;
        for (j, &d) in delta.iter().enumerate() {
            let s = sign_with_dead_zone(d, eps);
            let earlier = match s {
                -1 => nonneg,
                0 if strict => positive.or(zero),
                0 => positive,
                _ => None,
            };
            if let Some(i) = earlier {
                if first_violation.is_none() {
                    first_violation = Some(ScdViolation {
                        pair: k,
                        t: t_grid[i],
                        t_prime: t_grid[j],
                        delta_t: delta[i],
                        delta_t_prime: d,
                    });
                }
                break;
            }
            if s >= 0 && nonneg.is_none() {
                nonneg = Some(j);
            }
            if s > 0 && positive.is_none() {
                positive = Some(j);
            }
            if s == 0 && zero.is_none() {
                zero = Some(j);
            }
        }
        crossings.push(nonneg.map(|j| t_grid[j]));
    }
    Ok(ScdReport {
        holds: first_violation.is_none(),
        strict,
        pairs_checked: pairs.len(),
        crossings,
        first_violation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MonotonicityReport {
    pub nondecreasing: bool,
    /// First `(i, j)`, `i < j`, with `Y(t_j) < Y(t_i)`.
    pub first_violation: Option<(usize, usize)>,
    /// First `(i, j)` whose outcomes are incomparable.
    pub first_incomparable: Option<(usize, usize)>,
}

pub fn is_nondecreasing<Y>(alloc: &Allocation<Y>) -> Result<MonotonicityReport> {
    let cmp = alloc
        .order()
        .ok_or_else(|| Error::Argument("allocation has no order".into()))?;
    let ys = alloc.outcomes();
    let mut first_violation = None;
    let mut first_incomparable = None;
    'outer: for i in 0..ys.len() {
        for j in i + 1..ys.len() {
            match cmp(&ys[j], &ys[i]) {
                OrderRelation::Less => {
                    first_violation = Some((i, j));
                    break 'outer;
                }
                OrderRelation::Incomparable if first_incomparable.is_none() => {
                    first_incomparable = Some((i, j));
                }
                _ => {}
            }
        }
    }
    Ok(MonotonicityReport {
        nondecreasing: first_violation.is_none(),
        first_violation,
        first_incomparable,
    })
}

/// Ordered offer pairs drawn from a mechanism's own image: all strictly
/// ordered pairs among roughly `samples` evenly spaced grid nodes.
pub fn mechanism_offer_pairs<Y: Clone>(
    alloc: &Allocation<Y>,
    payments: &GridFn,
    samples: usize,
) -> Result<Vec<(Offer<Y>, Offer<Y>)>> {
    let cmp = alloc
        .order()
        .ok_or_else(|| Error::Argument("allocation has no order".into()))?;
    let n = alloc.n_points();
    let samples = samples.clamp(2, n);
    let mut idx: Vec<usize> = (0..samples).map(|k| k * (n - 1) / (samples - 1)).collect();
    idx.dedup();
    let ys = alloc.outcomes();
    let ps = payments.values();
    let mut pairs = Vec::new();
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let (lo, hi) = match cmp(&ys[i], &ys[j]) {
                OrderRelation::Less => (i, j),
                OrderRelation::Greater => (j, i),
                _ => continue,
            };
            pairs.push(((ys[lo].clone(), ps[lo]), (ys[hi].clone(), ps[hi])));
        }
    }
    Ok(pairs)
}

/// Inversion/marching tolerance used when payments are synthesized on behalf
/// of the screening checks.
pub const SYNTHESIS_TOL: Tolerance = Tolerance {
    abs_tol: 1e-12,
    rel_tol: 1e-9,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Implementation {
    pub payments: GridFn,
    pub ic: IcReport,
    /// Single-crossing check on the mechanism's own offers.
    pub scd: ScdReport,
}

/// Synthesizes envelope payments for an increasing allocation and checks
/// the resulting mechanism for IC on the full grid.
pub fn implement_increasing<Y: Clone>(
    pref: &Preference<Y>,
    alloc: &Allocation<Y>,
    k: f64,
    tol: Tolerance,
) -> Result<Implementation> {
    let mono = is_nondecreasing(alloc)?;
    if let Some((i, j)) = mono.first_violation {
        return Err(Error::NotIncreasing {
            lower: i,
            upper: j,
            relation: OrderRelation::Greater,
        });
    }
    if let Some((i, j)) = mono.first_incomparable {
        return Err(Error::NotIncreasing {
            lower: i,
            upper: j,
            relation: OrderRelation::Incomparable,
        });
    }
    let payments = synthesis::synthesize_payments(pref, alloc, k, SYNTHESIS_TOL)?;
    let pairs = mechanism_offer_pairs(alloc, &payments, 12)?;
    let cmp = alloc.order().expect("checked above");
    let t_grid: Vec<f64> = (0..alloc.n_points()).map(|i| alloc.node(i)).collect();
    let scd = single_crossing_differences_check(
        pref,
        cmp.as_ref(),
        &pairs,
        &t_grid,
        false,
        SYNTHESIS_TOL,
    )?;
    let mech = Mechanism::new(pref.clone(), alloc.clone(), payments)?;
    let ic = ic_report(&mech, tol)?;
    Ok(Implementation {
        payments: mech.payments,
        ic,
        scd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ConverseVerdict {
    Ok,
    /// IC held yet these `(i, j)` pairs have `Y(t_j) < Y(t_i)` with `i < j`.
    CounterexampleFound {
        pairs: Vec<(usize, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConverseReport {
    pub is_ic: bool,
    pub worst_violation: f64,
    pub nondecreasing: bool,
    pub first_decreasing_pair: Option<(usize, usize)>,
    /// Strict single-crossing on offers sampled from the mechanism; when
    /// false the converse hypothesis is not met and a counterexample says
    /// nothing about the theory.
    pub strict_scd: bool,
    pub verdict: ConverseVerdict,
}

/// Checks `IC => non-decreasing` on a given mechanism.
pub fn converse_check<Y: Clone>(m: &Mechanism<Y>, tol: Tolerance) -> Result<ConverseReport> {
    let ic = ic_report(m, tol)?;
    let mono = is_nondecreasing(&m.allocation)?;
    let pairs = mechanism_offer_pairs(&m.allocation, &m.payments, 12)?;
    let cmp = m.allocation.order().expect("checked by is_nondecreasing");
    let t_grid: Vec<f64> = (0..m.allocation.n_points())
        .map(|i| m.allocation.node(i))
        .collect();
    let scd = single_crossing_differences_check(
        &m.pref,
        cmp.as_ref(),
        &pairs,
        &t_grid,
        true,
        SYNTHESIS_TOL,
    )?;
    let verdict = match (ic.is_ic, mono.first_violation) {
        (true, Some(pair)) => ConverseVerdict::CounterexampleFound { pairs: vec![pair] },
        _ => ConverseVerdict::Ok,
    };
    Ok(ConverseReport {
        is_ic: ic.is_ic,
        worst_violation: ic.worst_violation,
        nondecreasing: mono.nondecreasing,
        first_decreasing_pair: mono.first_violation,
        strict_scd: scd.holds,
        verdict,
    })
}

/// Seeded smooth-plus-step perturbations of a payment schedule.
///
/// Each member adds `a0 + a1 t + a2 t^2 + b * 1[t >= c]` with coefficients
/// uniform in `[-amplitude, amplitude]` and `c` uniform in `[0, 1]`.
pub fn payment_perturbations(
    base: &GridFn,
    count: usize,
    amplitude: f64,
    seed: u64,
) -> Result<Vec<GridFn>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a0 = rng.gen_range(-amplitude..=amplitude);
            let a1 = rng.gen_range(-amplitude..=amplitude);
            let a2 = rng.gen_range(-amplitude..=amplitude);
            let b = rng.gen_range(-amplitude..=amplitude);
            let c = rng.gen_range(0.0..=1.0);
            base.map(|t, p| p + a0 + a1 * t + a2 * t * t + if t >= c { b } else { 0.0 })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaymentSearch {
    pub attempts: usize,
    /// Smallest worst-case IC violation over all attempts.
    pub best_violation: f64,
    /// Worst-case violation of the synthesized schedule itself.
    pub synthesized_violation: f64,
    pub found_ic: bool,
}

/// Tries synthesized envelope payments plus `perturbations` seeded
/// perturbations of them, looking for any IC schedule. Failing to find one
/// is evidence, not proof, that the allocation is not implementable.
pub fn search_ic_payments<Y: Clone>(
    pref: &Preference<Y>,
    alloc: &Allocation<Y>,
    k: f64,
    perturbations: usize,
    seed: u64,
    tol: Tolerance,
) -> Result<PaymentSearch> {
    let base = synthesis::synthesize_payments(pref, alloc, k, SYNTHESIS_TOL)?;
    let mut candidates = vec![base.clone()];
    candidates.extend(payment_perturbations(&base, perturbations, 0.2, seed)?);
    let mut best = f64::INFINITY;
    let mut synthesized = f64::NAN;
    for (i, p) in candidates.into_iter().enumerate() {
        let mech = Mechanism::new(pref.clone(), alloc.clone(), p)?;
        let ic = ic_report(&mech, tol)?;
        if i == 0 {
            synthesized = ic.worst_violation;
        }
        best = best.min(ic.worst_violation);
    }
    Ok(PaymentSearch {
        attempts: perturbations + 1,
        best_violation: best,
        synthesized_violation: synthesized,
        found_ic: best <= tol.threshold(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quasilinear() -> Preference<f64> {
        Preference::new(
            |y: &f64, p, t| y * t - p,
            |y: &f64, _, _| *y,
            1.0,
            (-1.0, 1.0),
        )
        .unwrap()
    }

    fn linear_alloc(n: usize) -> Allocation<f64> {
        Allocation::real((0..n).map(|i| i as f64 / (n - 1) as f64).collect()).unwrap()
    }

    fn tol(v: f64) -> Tolerance {
        Tolerance::absolute(v).unwrap()
    }

    #[test]
    fn ic_examples() {
        let n = 101;
        let h = 0.01;
        let pay = GridFn::from_fn(n, |t| t * t / 2.0).unwrap();
        let m = Mechanism::new(quasilinear(), linear_alloc(n), pay).unwrap();
        let rep = ic_report(&m, tol(h * h)).unwrap();
        assert!(rep.is_ic);
        assert!(rep.worst_violation <= h * h);
        assert!(rep.diagonal_dominant(h * h));

        let m0 = Mechanism::new(
            quasilinear(),
            linear_alloc(n),
            GridFn::constant(n, 0.0).unwrap(),
        )
        .unwrap();
        let rep = ic_report(&m0, tol(1e-9)).unwrap();
        assert!(!rep.is_ic);
        assert_abs_diff_eq!(rep.gain(100, 10), 0.09, epsilon = 1e-12);
        assert!(rep
            .violating_pairs
            .iter()
            .any(|v| v.reported == 100 && v.true_type == 10));
        assert!(rep
            .violating_pairs
            .windows(2)
            .all(|w| w[0].gain >= w[1].gain));

        let mc = Mechanism::new(
            quasilinear(),
            Allocation::real(vec![0.4; 11]).unwrap(),
            GridFn::constant(11, 0.1).unwrap(),
        )
        .unwrap();
        let rep = ic_report(&mc, tol(1e-12)).unwrap();
        assert!(rep.is_ic);
        assert_eq!(rep.worst_violation, 0.0);
    }

    #[test]
    fn single_crossing_examples() {
        let t_grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let q = quasilinear();
        let pairs = vec![((0.0, 0.0), (1.0, 0.5))];
        let rep = single_crossing_differences_check(
            &q,
            &OrderRelation::of_reals,
            &pairs,
            &t_grid,
            true,
            tol(1e-12),
        )
        .unwrap();
        assert!(rep.holds);
        assert_abs_diff_eq!(rep.crossings[0].unwrap(), 0.5, epsilon = 1e-12);

        let swapped = vec![((1.0, 0.0), (0.0, 0.0))];
        assert!(matches!(
            single_crossing_differences_check(
                &q,
                &OrderRelation::of_reals,
                &swapped,
                &t_grid,
                false,
                tol(1e-12)
            ),
            Err(Error::Argument(_))
        ));

        let wavy = Preference::new(
            |y: &f64, p, t: f64| y * (6.0 * t).sin() - p,
            |y: &f64, _, t: f64| 6.0 * y * (6.0 * t).cos(),
            6.0,
            (-1.0, 1.0),
        )
        .unwrap();
        let rep = single_crossing_differences_check(
            &wavy,
            &OrderRelation::of_reals,
            &[((0.0, 0.0), (1.0, 0.0))],
            &t_grid,
            false,
            tol(1e-12),
        )
        .unwrap();
        let v = rep.first_violation.unwrap();
        assert!(v.delta_t >= 0.0 && v.delta_t_prime < 0.0 && v.t_prime > v.t);
    }

    #[test]
    fn strict_mode_rejects_flat_differences() {
        let flat =
            Preference::new(|_: &f64, p, t| t - p, |_: &f64, _, _| 1.0, 1.0, (-1.0, 1.0)).unwrap();
        let t_grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let pairs = vec![((0.0, 0.2), (1.0, 0.2))];
        let weak = single_crossing_differences_check(
            &flat,
            &OrderRelation::of_reals,
            &pairs,
            &t_grid,
            false,
            tol(1e-12),
        )
        .unwrap();
        assert!(weak.holds);
        let strict = single_crossing_differences_check(
            &flat,
            &OrderRelation::of_reals,
            &pairs,
            &t_grid,
            true,
            tol(1e-12),
        )
        .unwrap();
        assert!(!strict.holds);
    }

    #[test]
    fn monotonicity_examples() {
        assert!(is_nondecreasing(&linear_alloc(11)).unwrap().nondecreasing);
        let down = Allocation::real((0..11).map(|i| 1.0 - i as f64 / 10.0).collect()).unwrap();
        let rep = is_nondecreasing(&down).unwrap();
        assert!(!rep.nondecreasing);
        assert_eq!(rep.first_violation, Some((0, 1)));

        let incomparable = Allocation::new((0..5).collect::<Vec<u32>>())
            .unwrap()
            .with_order(|a, b| {
                if a == b {
                    OrderRelation::Equal
                } else {
                    OrderRelation::Incomparable
                }
            });
        let rep = is_nondecreasing(&incomparable).unwrap();
        assert!(rep.nondecreasing);
        assert_eq!(rep.first_incomparable, Some((0, 1)));

        let unordered = Allocation::new(vec![0.0; 4]).unwrap();
        assert!(matches!(
            is_nondecreasing(&unordered),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn implement_examples() {
        let n = 101;
        let h = 0.01;
        let out =
            implement_increasing(&quasilinear(), &linear_alloc(n), 0.0, tol(10.0 * h)).unwrap();
        assert!(out.ic.is_ic);
        assert!(out.scd.holds);
        for (i, t) in out.payments.nodes().enumerate() {
            assert_abs_diff_eq!(out.payments.values()[i], t * t / 2.0, epsilon = 1e-4);
        }

        let cubic = Preference::new(
            |y: &f64, p: f64, t| y * t - p.powi(3),
            |y: &f64, _, _| *y,
            1.0,
            (-1.0, 1.0),
        )
        .unwrap();
        let out = implement_increasing(&cubic, &linear_alloc(n), 0.0, tol(10.0 * h)).unwrap();
        assert!(out.ic.is_ic);
        for (i, t) in out.payments.nodes().enumerate() {
            assert_abs_diff_eq!(
                out.payments.values()[i],
                (t * t / 2.0).cbrt(),
                epsilon = 1e-6
            );
        }

        let step =
            Allocation::real((0..n).map(|i| if i >= 50 { 1.0 } else { 0.0 }).collect()).unwrap();
        let out = implement_increasing(&quasilinear(), &step, 0.0, tol(10.0 * h)).unwrap();
        assert!(out.ic.is_ic);
        let p = out.payments.values();
        assert!(p[..50].iter().all(|v| v.abs() < 1e-12));
        // Y t - trapezoid integral of Y on the upper level
        assert!(p[50..].iter().all(|v| (v - 0.5).abs() <= h));
    }

    #[test]
    fn implement_rejects_decreasing_allocation() {
        let down = Allocation::real((0..11).map(|i| 1.0 - i as f64 / 10.0).collect()).unwrap();
        assert!(matches!(
            implement_increasing(&quasilinear(), &down, 0.0, tol(0.1)),
            Err(Error::NotIncreasing {
                lower: 0,
                upper: 1,
                ..
            })
        ));
    }

    #[test]
    fn converse_examples() {
        let n = 101;
        let out = implement_increasing(&quasilinear(), &linear_alloc(n), 0.0, tol(0.1)).unwrap();
        let m = Mechanism::new(quasilinear(), linear_alloc(n), out.payments).unwrap();
        let rep = converse_check(&m, tol(0.1)).unwrap();
        assert_eq!(rep.verdict, ConverseVerdict::Ok);
        assert!(rep.is_ic && rep.strict_scd);

        let down = Allocation::real((0..n).map(|i| 1.0 - i as f64 / 100.0).collect()).unwrap();
        let pay =
            synthesis::synthesize_payments(&quasilinear(), &down, 0.0, SYNTHESIS_TOL).unwrap();
        let m = Mechanism::new(quasilinear(), down, pay).unwrap();
        let rep = converse_check(&m, tol(0.1)).unwrap();
        assert!(!rep.is_ic);
        assert_eq!(rep.verdict, ConverseVerdict::Ok);
        assert_eq!(rep.first_decreasing_pair, Some((0, 1)));
    }

    #[test]
    fn taxation_principle_on_flat_segments() {
        let n = 101;
        let alloc = Allocation::real((0..n).map(|i| ((i / 25) as f64) / 4.0).collect()).unwrap();
        let out = implement_increasing(&quasilinear(), &alloc, 0.0, tol(0.1)).unwrap();
        assert!(out.ic.is_ic);
        let y = alloc.outcomes();
        let p = out.payments.values();
        for i in 0..n {
            for j in 0..n {
                if y[i] == y[j] {
                    assert!((p[i] - p[j]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn perturbations_are_seeded() {
        let base = GridFn::constant(11, 0.0).unwrap();
        let a = payment_perturbations(&base, 3, 0.2, 9).unwrap();
        let b = payment_perturbations(&base, 3, 0.2, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        assert!(a.iter().all(|g| g.max_abs() <= 0.8));
    }
}
