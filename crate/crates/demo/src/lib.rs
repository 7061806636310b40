//! Browser bindings for three interactive checks. Every export returns a
//! JSON string; `www/index.html` draws the result on a canvas.

use mechkit::blackwell::{self, Belief, PosteriorDistribution};
use mechkit::envelope::{self, DecisionProblem, DecisionRule};
use mechkit::scenario::{self, GSpec, HSpec, RuleSpec};
use mechkit::screening;
use mechkit::synthesis::Allocation;
use mechkit::Tolerance;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_GRID: usize = 2001;

fn check_grid(grid: usize) -> Result<(), String> {
    if !(3..=MAX_GRID).contains(&grid) {
        return Err(format!("grid must be between 3 and {MAX_GRID}"));
    }
    Ok(())
}

#[derive(Serialize)]
struct EnvelopeView {
    verdict: String,
    t: Vec<f64>,
    value: Vec<f64>,
    residual: Vec<f64>,
    max_envelope_residual: f64,
    max_outer_foc_residual: f64,
    tolerance: f64,
}

/// Envelope check for `f(x, t) = x t` under a constant, identity or step
/// rule. `param` is the constant value or the step threshold.
pub fn envelope_json(rule: &str, param: f64, grid: usize) -> Result<String, String> {
    check_grid(grid)?;
    let spec = match rule {
        "constant" => RuleSpec::Constant { value: param },
        "identity" => RuleSpec::Identity,
        "step" => RuleSpec::Step {
            threshold: param,
            low: 0.0,
            high: 1.0,
        },
        other => return Err(format!("unknown rule {other}")),
    };
    let p = DecisionProblem::new(|x: &f64, t| x * t).with_t_partial(|x: &f64, _| *x);
    let x = DecisionRule::new(spec.sample(grid)).map_err(|e| e.to_string())?;
    let tol = envelope::calibrated_tolerance(&p, &x).map_err(|e| e.to_string())?;
    let r = envelope::check_main_theorem(&p, &x, tol).map_err(|e| e.to_string())?;
    let view = EnvelopeView {
        verdict: format!("{:?}", r.verdict),
        t: r.value_fn.nodes().collect(),
        value: r.value_fn.values().to_vec(),
        residual: r.envelope_residual.values().to_vec(),
        max_envelope_residual: r.max_abs_residuals.0,
        max_outer_foc_residual: r.max_abs_residuals.1,
        tolerance: r.diagnostics.envelope_tol,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct MenuView {
    t: Vec<f64>,
    allocation: Vec<f64>,
    payments: Vec<f64>,
    is_ic: bool,
    worst_violation: f64,
    threshold: f64,
}

/// Prices an equal-width step allocation with `levels` levels in `[0, 1]`
/// for `g` in `quasilinear` or `power_payment` and `h(y, t) = y t`.
pub fn menu_json(g: &str, levels: usize, grid: usize) -> Result<String, String> {
    check_grid(grid)?;
    let g = match g {
        "quasilinear" => GSpec::Quasilinear,
        "power_payment" => GSpec::PowerPayment,
        other => return Err(format!("unknown payment form {other}")),
    };
    if !(1..=64).contains(&levels) {
        return Err("levels must be between 1 and 64".into());
    }
    let spec = RuleSpec::StepLevels {
        levels: (0..levels)
            .map(|i| i as f64 / (levels.max(2) - 1) as f64)
            .collect(),
    };
    let outcomes = spec.sample(grid);
    let pref =
        scenario::separable_preference(g, &HSpec::Product, &outcomes).map_err(|e| e.to_string())?;
    let alloc = Allocation::real(outcomes.clone()).map_err(|e| e.to_string())?;
    let tol =
        Tolerance::grid_calibrated(grid, pref.t_partial_bound()).map_err(|e| e.to_string())?;
    let imp =
        screening::implement_increasing(&pref, &alloc, 0.0, tol).map_err(|e| e.to_string())?;
    let view = MenuView {
        t: imp.payments.nodes().collect(),
        allocation: outcomes,
        payments: imp.payments.values().to_vec(),
        is_ic: imp.ic.is_ic,
        worst_violation: imp.ic.worst_violation,
        threshold: imp.ic.threshold,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CompareView {
    relation: String,
    a_leq_b: bool,
    b_leq_a: bool,
    a_leq_b_coupling: Vec<Vec<f64>>,
    b_leq_a_coupling: Vec<Vec<f64>>,
    mean: f64,
}

fn two_state(posteriors: &[f64], weights: &[f64]) -> Result<PosteriorDistribution, String> {
    let support = posteriors
        .iter()
        .map(|p| Belief::new(vec![*p, 1.0 - *p]))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err("weights must have positive total".into());
    }
    let w = weights.iter().map(|x| x / total).collect();
    PosteriorDistribution::new(support, w).map_err(|e| e.to_string())
}

/// Blackwell comparison of two distributions over two states, each given
/// as posterior probabilities of the first state with weights (normalised
/// here).
pub fn compare_json(
    a_post: &[f64],
    a_w: &[f64],
    b_post: &[f64],
    b_w: &[f64],
) -> Result<String, String> {
    let a = two_state(a_post, a_w)?;
    let b = two_state(b_post, b_w)?;
    let tol = Tolerance::absolute(1e-9).map_err(|e| e.to_string())?;
    let ab = blackwell::blackwell_leq(&a, &b, tol).map_err(|e| e.to_string())?;
    let ba = blackwell::blackwell_leq(&b, &a, tol).map_err(|e| e.to_string())?;
    let view = CompareView {
        relation: format!(
            "{:?}",
            mechkit::screening::OrderRelation::from_leq(ab.feasible, ba.feasible)
        ),
        a_leq_b: ab.feasible,
        b_leq_a: ba.feasible,
        a_leq_b_coupling: ab.joint,
        b_leq_a_coupling: ba.joint,
        mean: a.mean().probs()[0],
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn envelope_check(rule: &str, param: f64, grid: usize) -> Result<String, JsValue> {
    envelope_json(rule, param, grid).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn price_menu(g: &str, levels: usize, grid: usize) -> Result<String, JsValue> {
    menu_json(g, levels, grid).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn compare_experiments(
    a_post: &[f64],
    a_w: &[f64],
    b_post: &[f64],
    b_w: &[f64],
) -> Result<String, JsValue> {
    compare_json(a_post, a_w, b_post, b_w).map_err(|e| JsValue::from_str(&e))
}
