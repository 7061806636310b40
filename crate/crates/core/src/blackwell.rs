//! Finite-support distributions of posteriors and the Blackwell order.
//!
//! `y <= y'` in the Blackwell order iff `y` is a mean-preserving
//! contraction of `y'`: there is a coupling `q` of the two weight vectors
//! with `sum_j q[i][j] mu'_j = w_i mu_i` for every atom `i` of `y`. That is a
//! transportation polytope, decided here with a phase-one simplex.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Tolerance;
use crate::screening::OrderRelation;
use crate::simplex;

/// Beliefs closer than this in sup norm are merged into one atom.
pub const MERGE_TOL: f64 = 1e-10;
/// Feasibility threshold on the phase-one objective and certificate
/// residuals.
pub const LP_FEAS_TOL: f64 = 1e-8;
const SUM_TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;

/// A probability vector over a finite state set.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl<'de> Deserialize<'de> for Belief {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Belief::new(Vec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Argument("belief over an empty state set".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Argument(format!(
                "belief has a negative or non-finite entry: {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::Argument(format!("belief sums to {total}, not 1")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(states: usize) -> Result<Self> {
        Self::new(vec![1.0 / states as f64; states])
    }

    /// Degenerate belief on `state`.
    pub fn vertex(states: usize, state: usize) -> Result<Self> {
        let mut v = vec![0.0; states];
        *v.get_mut(state)
            .ok_or_else(|| Error::Argument(format!("state {state} out of range")))? = 1.0;
        Self::new(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn states(&self) -> usize {
        self.0.len()
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|p| p * p).sum::<f64>().sqrt()
    }

    pub fn sup_distance(&self, other: &Belief) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|p| *p > 0.0)
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Belief, lambda: f64) -> Result<Belief> {
        if self.states() != other.states() {
            return Err(Error::Argument("beliefs over different state sets".into()));
        }
        Belief::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect(),
        )
    }
}

/// A finite-support distribution of posteriors with distinct atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PosteriorJson", into = "PosteriorJson")]
pub struct PosteriorDistribution {
    support: Vec<Belief>,
    weights: Vec<f64>,
}

/// Wire form `{ "mu0": [...], "support": [[...], ...], "weights": [...] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorJson {
    pub mu0: Vec<f64>,
    pub support: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl TryFrom<PosteriorJson> for PosteriorDistribution {
    type Error = Error;

    fn try_from(raw: PosteriorJson) -> Result<Self> {
        let support = raw
            .support
            .into_iter()
            .map(Belief::new)
            .collect::<Result<Vec<_>>>()?;
        let y = PosteriorDistribution::new(support, raw.weights)?;
        let mu0 = Belief::new(raw.mu0)?;
        if !bayes_plausible(&y, &mu0, Tolerance::absolute(1e-9)?)? {
            return Err(Error::Argument(format!(
                "distribution mean {:?} differs from the stated prior {:?}",
                y.mean().probs(),
                mu0.probs()
            )));
        }
        Ok(y)
    }
}

impl From<PosteriorDistribution> for PosteriorJson {
    fn from(y: PosteriorDistribution) -> Self {
        PosteriorJson {
            mu0: y.mean().0,
            support: y.support.into_iter().map(|b| b.0).collect(),
            weights: y.weights,
        }
    }
}

impl PosteriorDistribution {
    /// Validates weights and merges atoms closer than [`MERGE_TOL`];
    /// zero-weight atoms are dropped.
    pub fn new(support: Vec<Belief>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(Error::Argument(format!(
                "{} atoms but {} weights",
                support.len(),
                weights.len()
            )));
        }
        let states = support[0].states();
        if support.iter().any(|b| b.states() != states) {
            return Err(Error::Argument("atoms over different state sets".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Argument(format!(
                "weights must be non-negative: {weights:?}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::Argument(format!("weights sum to {total}, not 1")));
        }
        let mut atoms: Vec<Belief> = Vec::new();
        let mut mass: Vec<f64> = Vec::new();
        for (b, w) in support.into_iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            match atoms.iter().position(|a| a.sup_distance(&b) <= MERGE_TOL) {
                Some(k) => mass[k] += w,
                None => {
                    atoms.push(b);
                    mass.push(w);
                }
            }
        }
        Ok(Self {
            support: atoms,
            weights: mass,
        })
    }

    /// No information: all mass on the prior.
    pub fn point_mass(mu0: &Belief) -> Self {
        Self {
            support: vec![mu0.clone()],
            weights: vec![1.0],
        }
    }

    /// Full information: vertex `omega` with weight `mu0(omega)`.
    pub fn full_information(mu0: &Belief) -> Result<Self> {
        let n = mu0.states();
        let support = (0..n)
            .map(|w| Belief::vertex(n, w))
            .collect::<Result<Vec<_>>>()?;
        Self::new(support, mu0.probs().to_vec())
    }

    /// Symmetric binary experiment of accuracy `q` on two states, prior
    /// `mu0`.
    pub fn binary_symmetric(mu0: &Belief, q: f64) -> Result<Self> {
        if mu0.states() != 2 || !(0.0..=1.0).contains(&q) {
            return Err(Error::Argument(
                "binary experiment needs 2 states and q in [0, 1]".into(),
            ));
        }
        let signal = vec![vec![q, 1.0 - q], vec![1.0 - q, q]];
        posteriors_from_signal(mu0, &signal)
    }

    pub fn support(&self) -> &[Belief] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn states(&self) -> usize {
        self.support[0].states()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn mean(&self) -> Belief {
        let mut m = vec![0.0; self.states()];
        for (b, w) in self.support.iter().zip(&self.weights) {
            for (acc, p) in m.iter_mut().zip(b.probs()) {
                *acc += w * p;
            }
        }
        Belief(m)
    }

    /// `integral v dy`.
    pub fn expect(&self, v: impl Fn(&Belief) -> f64) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .map(|(b, w)| w * v(b))
            .sum()
    }

    /// `lambda * self + (1 - lambda) * other` as a mixture of measures.
    pub fn mix(&self, other: &PosteriorDistribution, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Argument(format!(
                "mixture weight {lambda} outside [0, 1]"
            )));
        }
        let support = self.support.iter().chain(&other.support).cloned().collect();
        let weights = self
            .weights
            .iter()
            .map(|w| lambda * w)
            .chain(other.weights.iter().map(|w| (1.0 - lambda) * w))
            .collect::<Vec<_>>();
        let total: f64 = weights.iter().sum();
        Self::new(support, weights.iter().map(|w| w / total).collect())
    }

    /// Same atoms and weights up to `tol`, in any listing order.
    pub fn approx_eq(&self, other: &PosteriorDistribution, tol: f64) -> bool {
        if self.len() != other.len() || self.states() != other.states() {
            return false;
        }
        let mut used = vec![false; other.len()];
        self.support.iter().zip(&self.weights).all(|(b, w)| {
            let hit = other
                .support
                .iter()
                .zip(&other.weights)
                .enumerate()
                .position(|(k, (b2, w2))| {
                    !used[k] && b.sup_distance(b2) <= tol && (w - w2).abs() <= tol
                });
            match hit {
                Some(k) => {
                    used[k] = true;
                    true
                }
                None => false,
            }
        })
    }
}

pub fn bayes_plausible(y: &PosteriorDistribution, mu0: &Belief, tol: Tolerance) -> Result<bool> {
    if y.states() != mu0.states() {
        return Err(Error::Argument(format!(
            "distribution over {} states, prior over {}",
            y.states(),
            mu0.states()
        )));
    }
    Ok(y.mean().sup_distance(mu0) <= tol.abs_tol)
}

/// Coupling witnessing (or failing to witness) `lower <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GarblingCertificate {
    /// `joint[i][j]`: mass moved from atom `i` of the lower distribution to
    /// atom `j` of the upper one.
    pub joint: Vec<Vec<f64>>,
    pub feasible: bool,
    /// Phase-one objective at termination.
    pub infeasibility: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateResiduals {
    pub row_sums: f64,
    pub col_sums: f64,
    pub barycenter: f64,
    pub min_entry: f64,
}

impl CertificateResiduals {
    pub fn max(&self) -> f64 {
        self.row_sums
            .max(self.col_sums)
            .max(self.barycenter)
            .max((-self.min_entry).max(0.0))
    }
}

impl GarblingCertificate {
    /// Re-checks the three constraint families by direct multiplication.
    pub fn residuals(
        &self,
        lower: &PosteriorDistribution,
        upper: &PosteriorDistribution,
    ) -> CertificateResiduals {
        let q = &self.joint;
        let mut row_sums = 0.0f64;
        let mut barycenter = 0.0f64;
        let mut min_entry = f64::INFINITY;
        for (i, row) in q.iter().enumerate() {
            row_sums = row_sums.max((row.iter().sum::<f64>() - lower.weights[i]).abs());
            for w in 0..lower.states() {
                let moved: f64 = row
                    .iter()
                    .zip(&upper.support)
                    .map(|(qij, b)| qij * b.probs()[w])
                    .sum();
                barycenter =
                    barycenter.max((moved - lower.weights[i] * lower.support[i].probs()[w]).abs());
            }
            min_entry = row.iter().copied().fold(min_entry, f64::min);
        }
        let col_sums = (0..upper.len())
            .map(|j| (q.iter().map(|r| r[j]).sum::<f64>() - upper.weights[j]).abs())
            .fold(0.0, f64::max);
        CertificateResiduals {
            row_sums,
            col_sums,
            barycenter,
            min_entry,
        }
    }
}

/// Decides `lower <= upper` in the Blackwell order.
pub fn blackwell_leq(
    lower: &PosteriorDistribution,
    upper: &PosteriorDistribution,
    tol: Tolerance,
) -> Result<GarblingCertificate> {
    if lower.states() != upper.states() {
        return Err(Error::Argument(
            "distributions over different state sets".into(),
        ));
    }
    let gap = lower.mean().sup_distance(&upper.mean());
    if gap > tol.abs_tol.max(1e-9) {
        return Err(Error::Argument(format!(
            "distributions have different means (gap {gap})"
        )));
    }
    let (n1, n2, s) = (lower.len(), upper.len(), lower.states());
    let var = |i: usize, j: usize| i * n2 + j;
    let mut a = Vec::with_capacity(n1 + n2 + n1 * s);
    let mut b = Vec::with_capacity(n1 + n2 + n1 * s);
    for i in 0..n1 {
        let mut row = vec![0.0; n1 * n2];
        for j in 0..n2 {
            row[var(i, j)] = 1.0;
        }
        a.push(row);
        b.push(lower.weights[i]);
    }
    for j in 0..n2 {
        let mut row = vec![0.0; n1 * n2];
        for i in 0..n1 {
            row[var(i, j)] = 1.0;
        }
        a.push(row);
        b.push(upper.weights[j]);
    }
    for i in 0..n1 {
        for w in 0..s {
            let mut row = vec![0.0; n1 * n2];
            for j in 0..n2 {
                row[var(i, j)] = upper.support[j].probs()[w];
            }
            a.push(row);
            b.push(lower.weights[i] * lower.support[i].probs()[w]);
        }
    }
    let sol = simplex::phase_one(&a, &b, MAX_PIVOTS)?;
    let joint: Vec<Vec<f64>> = (0..n1)
        .map(|i| (0..n2).map(|j| sol.x[var(i, j)]).collect())
        .collect();
    let mut cert = GarblingCertificate {
        joint,
        feasible: sol.infeasibility <= LP_FEAS_TOL,
        infeasibility: sol.infeasibility,
    };
    if cert.feasible {
        cert.feasible = cert.residuals(lower, upper).max() <= LP_FEAS_TOL;
    }
    Ok(cert)
}

/// Relation between two distributions in the Blackwell order.
pub fn blackwell_compare(
    a: &PosteriorDistribution,
    b: &PosteriorDistribution,
    tol: Tolerance,
) -> Result<OrderRelation> {
    let ab = blackwell_leq(a, b, tol)?.feasible;
    let ba = blackwell_leq(b, a, tol)?.feasible;
    Ok(OrderRelation::from_leq(ab, ba))
}

/// Piecewise-linear convex test function `max_k (a_k . mu + c_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxAffine {
    pieces: Vec<(Vec<f64>, f64)>,
}

impl MaxAffine {
    pub fn random(states: usize, rng: &mut impl Rng) -> Self {
        let k = rng.gen_range(1..=5);
        let pieces = (0..k)
            .map(|_| {
                let slope = (0..states).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                (slope, rng.gen_range(-1.0..=1.0))
            })
            .collect();
        Self { pieces }
    }

    pub fn eval(&self, mu: &Belief) -> f64 {
        self.pieces
            .iter()
            .map(|(a, c)| c + a.iter().zip(mu.probs()).map(|(x, y)| x * y).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Slack allowed by the sampled-convex-function oracle.
pub const ORACLE_TOL: f64 = 1e-9;

/// One-sided oracle for `lower <= upper`: `false` is conclusive (some
/// sampled convex `v` has larger expectation under `lower`); `true` is only
/// evidence.
pub fn convex_oracle_leq(
    lower: &PosteriorDistribution,
    upper: &PosteriorDistribution,
    n_tests: usize,
    seed: u64,
) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_tests).all(|_| {
        let v = MaxAffine::random(lower.states(), &mut rng);
        lower.expect(|m| v.eval(m)) <= upper.expect(|m| v.eval(m)) + ORACLE_TOL
    })
}

/// Blackwell's signal: `pi[omega][i] = mu_i(omega) w_i / mu0(omega)`.
pub fn signal_from_posteriors(y: &PosteriorDistribution, mu0: &Belief) -> Result<Vec<Vec<f64>>> {
    if !mu0.is_interior() {
        return Err(Error::Precondition(format!(
            "prior {:?} is on the simplex boundary",
            mu0.probs()
        )));
    }
    if !bayes_plausible(y, mu0, Tolerance::absolute(1e-9)?)? {
        return Err(Error::Precondition(
            "distribution is not Bayes-plausible for the prior".into(),
        ));
    }
    Ok((0..mu0.states())
        .map(|w| {
            y.support
                .iter()
                .zip(&y.weights)
                .map(|(b, wi)| b.probs()[w] * wi / mu0.probs()[w])
                .collect()
        })
        .collect())
}

/// Distribution of Bayes posteriors induced by `signal[omega][s]` under
/// `mu0`.
pub fn posteriors_from_signal(mu0: &Belief, signal: &[Vec<f64>]) -> Result<PosteriorDistribution> {
    if signal.len() != mu0.states() {
        return Err(Error::Argument(
            "signal rows must match the state count".into(),
        ));
    }
    let n_signals = signal[0].len();
    for row in signal {
        if row.len() != n_signals
            || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9
            || row.iter().any(|p| *p < 0.0)
        {
            return Err(Error::Argument(
                "each signal row must be a probability vector".into(),
            ));
        }
    }
    let mut support = Vec::new();
    let mut weights = Vec::new();
    for s in 0..n_signals {
        let joint: Vec<f64> = (0..mu0.states())
            .map(|w| mu0.probs()[w] * signal[w][s])
            .collect();
        let prob: f64 = joint.iter().sum();
        if prob <= 0.0 {
            continue;
        }
        let mut post: Vec<f64> = joint.iter().map(|j| j / prob).collect();
        let total: f64 = post.iter().sum();
        post.iter_mut().for_each(|p| *p /= total);
        support.push(Belief(post));
        weights.push(prob);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    PosteriorDistribution::new(support, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SharingProofReport {
    pub sharing_proof: bool,
    pub first_incomparable: Option<(usize, usize)>,
}

/// No two members Blackwell-incomparable.
pub fn sharing_proof(
    alloc: &[PosteriorDistribution],
    tol: Tolerance,
) -> Result<SharingProofReport> {
    for i in 0..alloc.len() {
        for j in i + 1..alloc.len() {
            if alloc[i] == alloc[j] {
                continue;
            }
            if blackwell_compare(&alloc[i], &alloc[j], tol)? == OrderRelation::Incomparable {
                return Ok(SharingProofReport {
                    sharing_proof: false,
                    first_incomparable: Some((i, j)),
                });
            }
        }
    }
    Ok(SharingProofReport {
        sharing_proof: true,
        first_incomparable: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderSanityReport {
    pub reflexive: bool,
    pub transitive: bool,
    pub antisymmetric: bool,
    pub failures: Vec<String>,
}

impl OrderSanityReport {
    pub fn passed(&self) -> bool {
        self.reflexive && self.transitive && self.antisymmetric
    }
}

/// Checks reflexivity, transitivity and antisymmetry of [`blackwell_leq`]
/// on a sample set sharing one prior.
pub fn order_sanity_suite(
    samples: &[PosteriorDistribution],
    tol: Tolerance,
) -> Result<OrderSanityReport> {
    let n = samples.len();
    let mut leq = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            leq[i][j] = blackwell_leq(&samples[i], &samples[j], tol)?.feasible;
        }
    }
    let mut failures = Vec::new();
    let mut reflexive = true;
    for (i, row) in leq.iter().enumerate() {
        if !row[i] {
            reflexive = false;
            failures.push(format!("sample {i} is not below itself"));
        }
    }
    let mut transitive = true;
    for i in 0..n {
        for j in 0..n {
            if !leq[i][j] {
                continue;
            }
            for k in 0..n {
                if leq[j][k] && !leq[i][k] {
                    transitive = false;
                    failures.push(format!("{i} <= {j} <= {k} but not {i} <= {k}"));
                }
            }
        }
    }
    let mut antisymmetric = true;
    for i in 0..n {
        for j in i + 1..n {
            if leq[i][j] && leq[j][i] && !samples[i].approx_eq(&samples[j], 1e-7) {
                antisymmetric = false;
                failures.push(format!(
                    "{i} and {j} are mutually below each other but differ"
                ));
            }
        }
    }
    Ok(OrderSanityReport {
        reflexive,
        transitive,
        antisymmetric,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn b(v: &[f64]) -> Belief {
        Belief::new(v.to_vec()).unwrap()
    }

    fn binary(posts: &[f64], weights: &[f64]) -> PosteriorDistribution {
        PosteriorDistribution::new(
            posts.iter().map(|p| b(&[*p, 1.0 - *p])).collect(),
            weights.to_vec(),
        )
        .unwrap()
    }

    fn tol() -> Tolerance {
        Tolerance::absolute(1e-9).unwrap()
    }

    #[test]
    fn construction_merges_and_validates() {
        let y = PosteriorDistribution::new(vec![b(&[0.5, 0.5]), b(&[0.5, 0.5])], vec![0.4, 0.6])
            .unwrap();
        assert_eq!(y.len(), 1);
        assert!(Belief::new(vec![0.6, 0.6]).is_err());
        assert!(PosteriorDistribution::new(vec![b(&[1.0, 0.0])], vec![0.9]).is_err());
    }

    #[test]
    fn bayes_plausibility_examples() {
        let mu0 = b(&[0.5, 0.5]);
        assert!(bayes_plausible(&PosteriorDistribution::point_mass(&mu0), &mu0, tol()).unwrap());
        assert!(bayes_plausible(&binary(&[1.0, 0.0], &[0.5, 0.5]), &mu0, tol()).unwrap());
        assert!(!bayes_plausible(&binary(&[1.0, 0.0], &[0.7, 0.3]), &mu0, tol()).unwrap());
        assert!(bayes_plausible(
            &binary(&[1.0, 0.0], &[0.5, 0.5]),
            &b(&[0.2, 0.3, 0.5]),
            tol()
        )
        .is_err());
    }

    #[test]
    fn point_mass_below_everything() {
        let mu0 = b(&[0.3, 0.7]);
        let full = PosteriorDistribution::full_information(&mu0).unwrap();
        let cert = blackwell_leq(&PosteriorDistribution::point_mass(&mu0), &full, tol()).unwrap();
        assert!(cert.feasible);
        assert!(
            cert.residuals(&PosteriorDistribution::point_mass(&mu0), &full)
                .max()
                <= LP_FEAS_TOL
        );
    }

    #[test]
    fn everything_below_full_information() {
        let mu0 = b(&[0.5, 0.5]);
        let y = binary(&[0.25, 0.75], &[0.5, 0.5]);
        let full = PosteriorDistribution::full_information(&mu0).unwrap();
        let cert = blackwell_leq(&y, &full, tol()).unwrap();
        assert!(cert.feasible);
        // the coupling is forced: q_ij = w_i mu_i(j)
        for (i, row) in cert.joint.iter().enumerate() {
            for (j, q) in row.iter().enumerate() {
                let expected = y.weights()[i] * y.support()[i].probs()[j];
                assert_abs_diff_eq!(*q, expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn contraction_example_both_directions() {
        let wide = binary(&[0.25, 0.75], &[0.5, 0.5]);
        let narrow = binary(&[0.4, 0.6], &[0.5, 0.5]);
        assert!(!blackwell_leq(&wide, &narrow, tol()).unwrap().feasible);
        assert!(blackwell_leq(&narrow, &wide, tol()).unwrap().feasible);
        assert!(!convex_oracle_leq(&wide, &narrow, 200, 3));
        assert!(convex_oracle_leq(&narrow, &wide, 200, 3));
    }

    #[test]
    fn mean_mismatch_is_an_argument_error() {
        let a = binary(&[0.25, 0.75], &[0.5, 0.5]);
        let c = binary(&[0.1, 0.9], &[0.5, 0.5]);
        let skew = PosteriorDistribution::point_mass(&b(&[0.3, 0.7]));
        assert!(blackwell_leq(&a, &c, tol()).is_ok());
        assert!(matches!(
            blackwell_leq(&a, &skew, tol()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn oracle_examples() {
        let mu0 = b(&[0.5, 0.5]);
        let y = binary(&[0.2, 0.8], &[0.5, 0.5]);
        for seed in 0..5 {
            assert!(convex_oracle_leq(&y, &y, 50, seed));
        }
        let none = PosteriorDistribution::point_mass(&mu0);
        let full = PosteriorDistribution::full_information(&mu0).unwrap();
        assert!(convex_oracle_leq(&none, &full, 100, 1));
        assert!(!convex_oracle_leq(&full, &none, 100, 1));
    }

    #[test]
    fn signal_examples() {
        let mu0 = b(&[0.5, 0.5]);
        let pi = signal_from_posteriors(&PosteriorDistribution::point_mass(&mu0), &mu0).unwrap();
        assert_eq!(pi, vec![vec![1.0], vec![1.0]]);
        let full = PosteriorDistribution::full_information(&mu0).unwrap();
        let pi = signal_from_posteriors(&full, &mu0).unwrap();
        assert_eq!(pi, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let y = binary(&[0.25, 0.75], &[0.5, 0.5]);
        let pi = signal_from_posteriors(&y, &mu0).unwrap();
        assert_abs_diff_eq!(pi[1][0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(pi[1][1], 0.25, epsilon = 1e-12);
        for row in &pi {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        let back = posteriors_from_signal(&mu0, &pi).unwrap();
        assert!(back.approx_eq(&y, 1e-10));
        assert!(matches!(
            signal_from_posteriors(
                &PosteriorDistribution::point_mass(&b(&[1.0, 0.0])),
                &b(&[1.0, 0.0])
            ),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn sharing_proof_examples() {
        let mu0 = b(&[0.5, 0.5]);
        let chain: Vec<_> = [0.5, 0.6, 0.7, 0.9]
            .iter()
            .map(|q| PosteriorDistribution::binary_symmetric(&mu0, *q).unwrap())
            .collect();
        assert!(sharing_proof(&chain, tol()).unwrap().sharing_proof);

        // atoms {0, 2/3} with weights (1/4, 3/4) cross {1/4, 3/4}
        let skewed = binary(&[0.0, 2.0 / 3.0], &[0.25, 0.75]);
        let sym = binary(&[0.25, 0.75], &[0.5, 0.5]);
        assert_eq!(
            blackwell_compare(&skewed, &sym, tol()).unwrap(),
            OrderRelation::Incomparable
        );
        let alloc = vec![PosteriorDistribution::point_mass(&mu0), sym, skewed];
        let rep = sharing_proof(&alloc, tol()).unwrap();
        assert!(!rep.sharing_proof);
        assert_eq!(rep.first_incomparable, Some((1, 2)));

        assert!(sharing_proof(&alloc[..1], tol()).unwrap().sharing_proof);
    }

    #[test]
    fn order_sanity_examples() {
        let mu0 = b(&[0.5, 0.5]);
        let nested: Vec<_> = [0.5, 0.6, 0.7]
            .iter()
            .map(|q| PosteriorDistribution::binary_symmetric(&mu0, *q).unwrap())
            .collect();
        let rep = order_sanity_suite(&nested, tol()).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures);

        let a = binary(&[0.2, 0.8], &[0.5, 0.5]);
        let permuted = binary(&[0.8, 0.2], &[0.5, 0.5]);
        let rep = order_sanity_suite(&[a.clone(), permuted.clone()], tol()).unwrap();
        assert!(rep.antisymmetric && a.approx_eq(&permuted, 1e-12));
    }

    #[test]
    fn midpoint_mixture_sits_between() {
        let lo = binary(&[0.4, 0.6], &[0.5, 0.5]);
        let hi = binary(&[0.1, 0.9], &[0.5, 0.5]);
        let mid = lo.mix(&hi, 0.5).unwrap();
        assert!(blackwell_leq(&lo, &mid, tol()).unwrap().feasible);
        assert!(blackwell_leq(&mid, &hi, tol()).unwrap().feasible);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let y = binary(&[0.25, 0.75], &[0.5, 0.5]);
        let text = serde_json::to_string(&y).unwrap();
        assert!(text.contains("\"mu0\""));
        let back: PosteriorDistribution = serde_json::from_str(&text).unwrap();
        assert_eq!(back, y);
        let bad = r#"{"mu0":[0.3,0.7],"support":[[1.0,0.0],[0.0,1.0]],"weights":[0.5,0.5]}"#;
        assert!(serde_json::from_str::<PosteriorDistribution>(bad).is_err());
    }

    fn arb_distribution(states: usize) -> impl Strategy<Value = (Belief, PosteriorDistribution)> {
        let prior = proptest::collection::vec(0.2f64..1.0, states);
        let signal =
            proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 1..=5), states);
        (prior, signal).prop_filter_map("ragged signal", |(raw, rows)| {
            let cols = rows[0].len();
            if rows.iter().any(|r| r.len() != cols) {
                return None;
            }
            let total: f64 = raw.iter().sum();
            let mut p: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let rest: f64 = p[1..].iter().sum();
            p[0] = 1.0 - rest;
            let mu0 = Belief::new(p).ok()?;
            let pi: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.iter().map(|x| x / s).collect()
                })
                .collect();
            let y = posteriors_from_signal(&mu0, &pi).ok()?;
            Some((mu0, y))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn extremes_bound_every_sample((mu0, y) in arb_distribution(3)) {
            let t = Tolerance::absolute(1e-9).unwrap();
            let none = PosteriorDistribution::point_mass(&mu0);
            let full = PosteriorDistribution::full_information(&mu0).unwrap();
            let low = blackwell_leq(&none, &y, t).unwrap();
            let high = blackwell_leq(&y, &full, t).unwrap();
            prop_assert!(low.feasible && high.feasible);
            prop_assert!(low.residuals(&none, &y).max() <= LP_FEAS_TOL);
            prop_assert!(high.residuals(&y, &full).max() <= LP_FEAS_TOL);
        }

        #[test]
        fn jensen_bounds(
            (mu0, y) in arb_distribution(2),
            a in -1.0f64..1.0,
            c in 0.0f64..2.0,
        ) {
            // convex quadratic in the first coordinate
            let v = |m: &Belief| c * m.probs()[0] * m.probs()[0] + a * m.probs()[0];
            let full = PosteriorDistribution::full_information(&mu0).unwrap();
            prop_assert!(y.expect(v) <= full.expect(v) + 1e-12);
            prop_assert!(y.expect(v) >= v(&mu0) - 1e-12);
        }

        #[test]
        fn signal_round_trip((mu0, y) in arb_distribution(3)) {
            let pi = signal_from_posteriors(&y, &mu0).unwrap();
            let back = posteriors_from_signal(&mu0, &pi).unwrap();
            prop_assert!(back.approx_eq(&y, 1e-10));
        }

        #[test]
        fn lp_agrees_with_oracle(
            (_, y) in arb_distribution(2),
            lambda in 0.0f64..1.0,
            seed in 0u64..1000,
        ) {
            let t = Tolerance::absolute(1e-9).unwrap();
            let full = PosteriorDistribution::full_information(&y.mean()).unwrap();
            let spread = y.mix(&full, lambda).unwrap();
            for (a, b) in [(&y, &spread), (&spread, &y)] {
                let cert = blackwell_leq(a, b, t).unwrap();
                if !convex_oracle_leq(a, b, 100, seed) {
                    prop_assert!(!cert.feasible);
                }
                if cert.feasible {
                    prop_assert!(cert.residuals(a, b).max() <= LP_FEAS_TOL);
                    prop_assert!(convex_oracle_leq(a, b, 100, seed));
                }
            }
            prop_assert!(blackwell_leq(&y, &spread, t).unwrap().feasible);
        }
    }
}
