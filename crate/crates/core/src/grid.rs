//! Functions sampled on a uniform grid over `[0, 1]`.
//!
//! Every other module works with [`GridFn`]: value functions, payment
//! schedules and residuals all live on the same grid `t_i = i / (n - 1)`.
//! Shifts are restricted to whole multiples of the grid step so that
//! `f(t + m)` is read off the grid without interpolation. Interpolation only
//! happens at non-grid integration endpoints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when snapping a real to the nearest grid node.
const ALIGN_EPS: f64 = 1e-9;

/// Absolute/relative tolerance pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Result<Self> {
        let ok = abs_tol.is_finite()
            && rel_tol.is_finite()
            && abs_tol >= 0.0
            && rel_tol >= 0.0
            && (abs_tol > 0.0 || rel_tol > 0.0);
        if !ok {
            return Err(Error::InvalidTolerance { abs_tol, rel_tol });
        }
        Ok(Self { abs_tol, rel_tol })
    }

    pub fn absolute(abs_tol: f64) -> Result<Self> {
        Self::new(abs_tol, 0.0)
    }

    /// Grid-scale tolerance `10 * scale * h`, with `scale` floored at 1.
    pub fn grid_calibrated(n_points: usize, scale: f64) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::GridTooSmall(n_points));
        }
        let h = 1.0 / (n_points - 1) as f64;
        Self::absolute(10.0 * scale.abs().max(1.0) * h)
    }

    /// Acceptance threshold for a quantity of magnitude `reference`.
    pub fn threshold(&self, reference: f64) -> f64 {
        self.abs_tol + self.rel_tol * reference.abs()
    }

    pub fn accepts(&self, value: f64, reference: f64) -> bool {
        value.abs() <= self.threshold(reference)
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
        }
    }
}

/// A real function sampled at `n_points` equispaced nodes of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct GridFn {
    values: Vec<f64>,
}

impl<'de> Deserialize<'de> for GridFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        GridFn::new(values).map_err(serde::de::Error::custom)
    }
}

impl GridFn {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_size(values.len())?;
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { values })
    }

    pub fn from_fn(n_points: usize, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        check_size(n_points)?;
        Self::new((0..n_points).map(|i| f(node(n_points, i))).collect())
    }

    pub fn constant(n_points: usize, c: f64) -> Result<Self> {
        Self::from_fn(n_points, |_| c)
    }

    pub fn n_points(&self) -> usize {
        self.values.len()
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.values.len() - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        node(self.values.len(), i)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.node(i))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Sum of absolute increments between consecutive nodes.
    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// `alpha * self + beta * other`, on a shared grid.
    pub fn combine(&self, alpha: f64, other: &GridFn, beta: f64) -> Result<GridFn> {
        if other.n_points() != self.n_points() {
            return Err(Error::Argument(format!(
                "grid sizes differ: {} vs {}",
                self.n_points(),
                other.n_points()
            )));
        }
        GridFn::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        )
    }

    pub fn map(&self, mut f: impl FnMut(f64, f64) -> f64) -> Result<GridFn> {
        GridFn::new(
            self.values
                .iter()
                .enumerate()
                .map(|(i, &v)| f(self.node(i), v))
                .collect(),
        )
    }

    /// Linear interpolation at `t`.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        check_unit("t", t)?;
        Ok(interpolate(self.n_points(), t, |i| self.values[i]))
    }

    /// Composite trapezoid approximation of the integral over `[a, b]`.
    ///
    /// Non-grid endpoints are handled by linear interpolation, and
    /// `integrate(b, a) == -integrate(a, b)`.
    pub fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        integrate_nodes(self.n_points(), a, b, |i| Ok(self.values[i]))
    }

    /// Running trapezoid integral `t_i -> integral over [0, t_i]`.
    pub fn cumulative(&self) -> GridFn {
        let h = self.step();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len());
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            out.push(acc);
        }
        GridFn { values: out }
    }

    /// Number of grid steps making up the shift `m`, which must be a
    /// positive multiple of the step.
    pub fn steps_of(&self, m: f64) -> Result<usize> {
        shift_steps(self.n_points(), m)
    }

    /// Grid index of `t`, if `t` sits on a node.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        grid_index(self.n_points(), t)
    }

    /// `t -> (f(t + m) - f(t)) / m` on `[0, 1 - m]`.
    ///
    /// Nodes past `1 - m` repeat the last valid quotient; `valid_len` says
    /// where the padding starts.
    pub fn divided_difference(&self, m: f64) -> Result<DividedDifference> {
        let k = self.steps_of(m)?;
        let n = self.n_points();
        if k >= n {
            return Err(Error::Domain {
                what: "shift",
                value: m,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let m = k as f64 * self.step();
        let valid_len = n - k;
        let mut out: Vec<f64> = (0..valid_len)
            .map(|i| (self.values[i + k] - self.values[i]) / m)
            .collect();
        let last = out[valid_len - 1];
        out.resize(n, last);
        Ok(DividedDifference {
            quotient: GridFn::new(out)?,
            valid_len,
        })
    }

    /// Largest one-sided divided difference at `t` over the given shifts.
    ///
    /// This is a finite-scale stand-in for the upper Dini derivative: each
    /// shift `m` contributes both `(f(t+m) - f(t))/m` and `(f(t) - f(t-m))/m`.
    pub fn upper_derivative_estimate(&self, t: f64, steps: &[f64]) -> Result<f64> {
        let bounds = self.one_sided_estimates(t, steps)?;
        Ok(bounds.forward.max(bounds.backward))
    }

    /// Forward and backward divided-difference extremes at `t`.
    pub fn one_sided_estimates(&self, t: f64, steps: &[f64]) -> Result<OneSided> {
        if steps.is_empty() {
            return Err(Error::Argument("step list is empty".into()));
        }
        if steps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Argument("steps must be strictly decreasing".into()));
        }
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Domain {
                what: "t",
                value: t,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let centre = self.value_at(t)?;
        let mut forward = f64::NEG_INFINITY;
        let mut backward = f64::NEG_INFINITY;
        for &m in steps {
            let k = self.steps_of(m)?;
            let m = k as f64 * self.step();
            if t - m < -ALIGN_EPS || t + m > 1.0 + ALIGN_EPS {
                return Err(Error::Domain {
                    what: "t +/- shift",
                    value: t,
                    lo: m,
                    hi: 1.0 - m,
                });
            }
            let ahead = self.value_at((t + m).min(1.0))?;
            let behind = self.value_at((t - m).max(0.0))?;
            forward = forward.max((ahead - centre) / m);
            backward = backward.max((centre - behind) / m);
        }
        Ok(OneSided { forward, backward })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneSided {
    pub forward: f64,
    pub backward: f64,
}

/// Output of [`GridFn::divided_difference`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DividedDifference {
    pub quotient: GridFn,
    /// Nodes `0..valid_len` hold genuine quotients; the rest are padding.
    pub valid_len: usize,
}

impl DividedDifference {
    pub fn is_padded(&self, i: usize) -> bool {
        i >= self.valid_len
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < 3 {
        Err(Error::GridTooSmall(n))
    } else {
        Ok(())
    }
}

pub(crate) fn check_unit(what: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: x,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

pub(crate) fn node(n: usize, i: usize) -> f64 {
    i as f64 / (n - 1) as f64
}

pub(crate) fn grid_index(n: usize, t: f64) -> Option<usize> {
    let scaled = t * (n - 1) as f64;
    let j = scaled.round();
    if (scaled - j).abs() <= ALIGN_EPS * (n as f64) && j >= 0.0 && j <= (n - 1) as f64 {
        Some(j as usize)
    } else {
        None
    }
}

pub(crate) fn shift_steps(n: usize, m: f64) -> Result<usize> {
    let step = 1.0 / (n - 1) as f64;
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::Argument(format!("shift must be positive, got {m}")));
    }
    let scaled = m / step;
    let k = scaled.round();
    if k < 1.0 || (scaled - k).abs() > ALIGN_EPS * scaled.max(1.0) {
        return Err(Error::Alignment { value: m, step });
    }
    Ok(k as usize)
}

/// Segment `i` with `t_i <= x <= t_{i+1}` and the fractional position.
fn locate(n: usize, x: f64) -> (usize, f64) {
    if let Some(j) = grid_index(n, x) {
        return if j == n - 1 { (n - 2, 1.0) } else { (j, 0.0) };
    }
    let scaled = x * (n - 1) as f64;
    let i = (scaled.floor() as usize).min(n - 2);
    (i, scaled - i as f64)
}

pub(crate) fn interpolate(n: usize, t: f64, value: impl Fn(usize) -> f64) -> f64 {
    let (i, theta) = locate(n, t);
    if theta == 0.0 {
        value(i)
    } else if theta == 1.0 {
        value(i + 1)
    } else {
        value(i) + theta * (value(i + 1) - value(i))
    }
}

/// Indices a trapezoid integral over `[a, b]` reads (`a <= b`).
pub(crate) fn support_indices(n: usize, a: f64, b: f64) -> (usize, usize) {
    let (ia, ta) = locate(n, a);
    let (ib, tb) = locate(n, b);
    let lo = if ta == 1.0 { ia + 1 } else { ia };
    let hi = if tb == 0.0 { ib } else { ib + 1 };
    (lo, hi.max(lo))
}

/// Trapezoid integral over `[a, b]` of the piecewise-linear interpolant of
/// node values supplied lazily by `value`. Only the nodes the integral
/// touches are requested.
pub(crate) fn integrate_nodes(
    n: usize,
    a: f64,
    b: f64,
    mut value: impl FnMut(usize) -> Result<f64>,
) -> Result<f64> {
    check_unit("a", a)?;
    check_unit("b", b)?;
    if a == b {
        return Ok(0.0);
    }
    let (lo_x, hi_x, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let h = 1.0 / (n - 1) as f64;
    let (ia, ta) = locate(n, lo_x);
    let (ib, tb) = locate(n, hi_x);

    let mut cache: Vec<Option<f64>> = Vec::new();
    let base = ia;
    let mut get = |i: usize| -> Result<f64> {
        let slot = i - base;
        if slot >= cache.len() {
            cache.resize(slot + 1, None);
        }
        if let Some(v) = cache[slot] {
            return Ok(v);
        }
        let v = value(i)?;
        cache[slot] = Some(v);
        Ok(v)
    };
    let mut point = |i: usize, theta: f64| -> Result<f64> {
        if theta == 0.0 {
            get(i)
        } else if theta == 1.0 {
            get(i + 1)
        } else {
            let v0 = get(i)?;
            let v1 = get(i + 1)?;
            Ok(v0 + theta * (v1 - v0))
        }
    };

    let fa = point(ia, ta)?;
    let fb = point(ib, tb)?;
    let total = if ia == ib {
        0.5 * (hi_x - lo_x) * (fa + fb)
    } else {
        let mut acc = 0.5 * (1.0 - ta) * h * (fa + point(ia + 1, 0.0)?);
        for j in ia + 1..ib {
            acc += 0.5 * h * (point(j, 0.0)? + point(j + 1, 0.0)?);
        }
        acc + 0.5 * tb * h * (point(ib, 0.0)? + fb)
    };
    Ok(sign * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn square(n: usize) -> GridFn {
        GridFn::from_fn(n, |s| s * s).unwrap()
    }

    #[test]
    fn rejects_small_grids_and_nan() {
        assert_eq!(GridFn::new(vec![0.0, 1.0]), Err(Error::GridTooSmall(2)));
        assert!(matches!(
            GridFn::new(vec![0.0, f64::NAN, 1.0]),
            Err(Error::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn tolerance_needs_a_positive_part() {
        assert!(Tolerance::new(0.0, 0.0).is_err());
        assert!(Tolerance::new(-1.0, 1.0).is_err());
        assert!(Tolerance::new(0.0, 1e-3).is_ok());
    }

    #[test]
    fn integrate_examples() {
        let one = GridFn::constant(11, 1.0).unwrap();
        assert_abs_diff_eq!(one.integrate(0.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        let id = GridFn::from_fn(101, |s| s).unwrap();
        assert_abs_diff_eq!(id.integrate(0.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        // antiderivative s^3 / 3
        let sq = square(101);
        assert_abs_diff_eq!(sq.integrate(0.0, 1.0).unwrap(), 1.0 / 3.0, epsilon = 2e-5);
    }

    #[test]
    fn integrate_interpolates_between_nodes() {
        // affine integrand: trapezoid exact even with off-grid endpoints
        let f = GridFn::from_fn(11, |s| 2.0 * s + 1.0).unwrap();
        let exact = |a: f64, b: f64| (b * b + b) - (a * a + a);
        assert_abs_diff_eq!(
            f.integrate(0.13, 0.77).unwrap(),
            exact(0.13, 0.77),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            f.integrate(0.31, 0.34).unwrap(),
            exact(0.31, 0.34),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            f.integrate(0.77, 0.13).unwrap(),
            -exact(0.13, 0.77),
            epsilon = 1e-14
        );
    }

    #[test]
    fn integrate_rejects_out_of_range_endpoints() {
        let f = square(11);
        assert!(matches!(f.integrate(-0.1, 0.5), Err(Error::Domain { .. })));
        assert!(matches!(f.integrate(0.1, 1.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn trapezoid_is_second_order() {
        let exact = 1.0 / 3.0;
        let coarse = (square(51).integrate(0.0, 1.0).unwrap() - exact).abs();
        let fine = (square(101).integrate(0.0, 1.0).unwrap() - exact).abs();
        assert!(coarse / fine >= 3.5, "ratio {}", coarse / fine);
    }

    #[test]
    fn cumulative_matches_integrate() {
        let f = GridFn::from_fn(41, |s| (3.0 * s).sin()).unwrap();
        let cum = f.cumulative();
        for (i, t) in f.nodes().enumerate() {
            assert_abs_diff_eq!(
                cum.values()[i],
                f.integrate(0.0, t).unwrap(),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn divided_difference_examples() {
        let id = GridFn::from_fn(101, |s| s).unwrap();
        let dd = id.divided_difference(id.step()).unwrap();
        for v in dd.quotient.values() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-9);
        }
        assert_eq!(dd.valid_len, 100);
        assert!(dd.is_padded(100));

        let c = GridFn::constant(101, 4.2).unwrap();
        let dd = c.divided_difference(0.3).unwrap();
        assert!(dd.quotient.values().iter().all(|v| *v == 0.0));

        // (0.3^2 - 0.2^2) / 0.1
        let sq = square(101);
        let dd = sq.divided_difference(0.1).unwrap();
        assert_abs_diff_eq!(dd.quotient.values()[20], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn divided_difference_requires_alignment() {
        let sq = square(101);
        assert!(matches!(
            sq.divided_difference(0.015),
            Err(Error::Alignment { .. })
        ));
        assert!(sq.divided_difference(0.0).is_err());
    }

    #[test]
    fn upper_derivative_examples() {
        let id = GridFn::from_fn(101, |s| s).unwrap();
        let h = id.step();
        assert_abs_diff_eq!(
            id.upper_derivative_estimate(0.37, &[2.0 * h, h]).unwrap(),
            1.0,
            epsilon = 1e-9
        );
        let kink = GridFn::from_fn(101, |s| (s - 0.5).abs()).unwrap();
        let est = kink.one_sided_estimates(0.5, &[h]).unwrap();
        assert_abs_diff_eq!(est.forward, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(est.backward, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            kink.upper_derivative_estimate(0.5, &[h]).unwrap(),
            1.0,
            epsilon = 1e-9
        );
        let zero = GridFn::constant(101, 0.0).unwrap();
        assert_eq!(zero.upper_derivative_estimate(0.5, &[h]).unwrap(), 0.0);
        assert!(matches!(
            zero.upper_derivative_estimate(0.5, &[]),
            Err(Error::Argument(_))
        ));
    }

    proptest! {
        #[test]
        fn integral_is_linear(
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let f = GridFn::from_fn(33, |s| (5.0 * s).cos()).unwrap();
            let g = GridFn::from_fn(33, |s| s * s * s - s).unwrap();
            let lhs = f.combine(alpha, &g, beta).unwrap().integrate(a, b).unwrap();
            let rhs = alpha * f.integrate(a, b).unwrap() + beta * g.integrate(a, b).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }

        #[test]
        fn integral_is_additive(x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0) {
            let mut e = [x, y, z];
            e.sort_by(|p, q| p.partial_cmp(q).unwrap());
            let f = GridFn::from_fn(57, |s| (s - 0.4).abs() + s * s).unwrap();
            let whole = f.integrate(e[0], e[2]).unwrap();
            let parts = f.integrate(e[0], e[1]).unwrap() + f.integrate(e[1], e[2]).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-12);
        }

        #[test]
        fn divided_difference_of_affine_is_constant(
            slope in -5.0f64..5.0,
            icpt in -5.0f64..5.0,
            k in 1usize..40,
        ) {
            let f = GridFn::from_fn(41, |s| slope * s + icpt).unwrap();
            let dd = f.divided_difference(k as f64 * f.step()).unwrap();
            for v in dd.quotient.values() {
                prop_assert!((v - slope).abs() <= 1e-9);
            }
        }
    }
}
