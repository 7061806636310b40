//! JSON scenario configs and a deterministic runner shared by the CLI, the
//! demo and the acceptance tests.

use std::path::PathBuf;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::blackwell::{self, Belief, PosteriorDistribution};
use crate::envelope::{self, DecisionProblem, DecisionRule, OuterFocConfig};
use crate::error::{Error, Result};
use crate::grid::{GridFn, Tolerance};
use crate::info_market::{self, InfoPreference, ValueOfInformation};
use crate::screening::{self, IcReport, Mechanism, OrderRelation};
use crate::synthesis::{self, Allocation, Preference};

/// Violations listed in `report.json`; the CSV table has all of them.
const REPORT_VIOLATIONS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Envelope,
    Synthesis,
    Screening,
    Blackwell,
    InfoMarket,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverride {
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
}

impl ToleranceOverride {
    fn apply(&self, base: Tolerance) -> Result<Tolerance> {
        Tolerance::new(
            self.abs_tol.unwrap_or(base.abs_tol),
            self.rel_tol.unwrap_or(base.rel_tol),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Short description of what the scenario reproduces.
    #[serde(default)]
    pub reference: String,
    pub kind: Kind,
    pub grid: usize,
    #[serde(default)]
    pub tolerance: Option<ToleranceOverride>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Verdict the run must observe for the scenario to pass.
    pub expected: String,
    pub payload: Value,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks the grid and parses the kind-specific payload.
    pub fn validate(&self) -> Result<Payload> {
        if self.grid < 3 {
            return Err(Error::GridTooSmall(self.grid));
        }
        let payload = match self.kind {
            Kind::Envelope => Payload::Envelope(parse(&self.payload, "envelope")?),
            Kind::Synthesis => Payload::Synthesis(parse(&self.payload, "synthesis")?),
            Kind::Screening => Payload::Screening(parse(&self.payload, "screening")?),
            Kind::Blackwell => Payload::Blackwell(parse(&self.payload, "blackwell")?),
            Kind::InfoMarket => Payload::InfoMarket(parse(&self.payload, "info_market")?),
        };
        payload.check(self.grid)?;
        Ok(payload)
    }
}

fn parse<T: DeserializeOwned>(v: &Value, kind: &str) -> Result<T> {
    T::deserialize(v).map_err(|e| Error::Config(format!("{kind} payload: {e}")))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Envelope(EnvelopePayload),
    Synthesis(SynthesisPayload),
    Screening(ScreeningPayload),
    Blackwell(BlackwellPayload),
    InfoMarket(InfoMarketPayload),
}

impl Payload {
    fn check(&self, grid: usize) -> Result<()> {
        match self {
            Payload::Envelope(p) => {
                p.rule.check()?;
                if p.mode == EnvelopeMode::Necessity && p.candidates.is_empty() {
                    return Err(Error::Config(
                        "necessity mode needs candidate actions".into(),
                    ));
                }
                Ok(())
            }
            Payload::Synthesis(p) => p.allocation.check(),
            Payload::Screening(p) => {
                p.allocation.check()?;
                if let Some([a, b]) = p.inject_decreasing {
                    if !(0.0 <= a && a < b && b <= 1.0) {
                        return Err(Error::Config(format!(
                            "inject_decreasing [{a}, {b}] is not a subinterval of [0, 1]"
                        )));
                    }
                }
                Ok(())
            }
            Payload::Blackwell(_) => Ok(()),
            Payload::InfoMarket(p) => match &p.allocation {
                InfoAllocation::Explicit { items } if items.len() != grid => {
                    Err(Error::Config(format!(
                        "explicit allocation has {} entries but grid is {grid}",
                        items.len()
                    )))
                }
                InfoAllocation::NestedBinary {
                    insert_incomparable: Some(ins),
                    ..
                } if ins.index >= grid => Err(Error::Config(format!(
                    "insertion index {} outside the grid",
                    ins.index
                ))),
                _ => Ok(()),
            },
        }
    }
}

/// Built-in objectives `f(x, t)` over real actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `x t`
    Xt,
    /// `-(x - t)^2`
    NegSqDist,
    /// `x^2 + t`
    SquarePlusT,
    /// `sum_jk c[j][k] x^j t^k`
    Polynomial { coeffs: Vec<Vec<f64>> },
}

impl ProblemSpec {
    pub fn build(&self) -> DecisionProblem<f64> {
        match self.clone() {
            ProblemSpec::Xt => {
                DecisionProblem::new(|x: &f64, t| x * t).with_t_partial(|x: &f64, _| *x)
            }
            ProblemSpec::NegSqDist => DecisionProblem::new(|x: &f64, t| -(x - t) * (x - t))
                .with_t_partial(|x: &f64, t| 2.0 * (x - t)),
            ProblemSpec::SquarePlusT => {
                DecisionProblem::new(|x: &f64, t| x * x + t).with_t_partial(|_: &f64, _| 1.0)
            }
            ProblemSpec::Polynomial { coeffs } => {
                let c = Arc::new(coeffs);
                let d = Arc::clone(&c);
                DecisionProblem::new(move |x: &f64, t| poly2(&c, *x, t))
                    .with_t_partial(move |x: &f64, t| poly2_dt(&d, *x, t))
            }
        }
    }
}

/// `sum_jk c[j][k] x^j t^k`.
pub fn poly2(c: &[Vec<f64>], x: f64, t: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(j, row)| {
            x.powi(j as i32)
                * row
                    .iter()
                    .enumerate()
                    .map(|(k, ck)| ck * t.powi(k as i32))
                    .sum::<f64>()
        })
        .sum()
}

/// `d/dt` of [`poly2`].
pub fn poly2_dt(c: &[Vec<f64>], x: f64, t: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(j, row)| {
            x.powi(j as i32)
                * row
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, ck)| ck * k as f64 * t.powi(k as i32 - 1))
                    .sum::<f64>()
        })
        .sum()
}

/// Built-in real-valued decision rules and allocations on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleSpec {
    Constant {
        value: f64,
    },
    Identity,
    /// `low` below `threshold`, `high` from it on.
    Step {
        threshold: f64,
        low: f64,
        high: f64,
    },
    /// Linear interpolation through `(t, x)` knots sorted by `t`.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
    /// `sum_k c[k] t^k`
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// Equal-width steps through `levels`.
    StepLevels {
        levels: Vec<f64>,
    },
}

impl RuleSpec {
    fn check(&self) -> Result<()> {
        match self {
            RuleSpec::PiecewiseLinear { knots } => {
                if knots.len() < 2 || knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(Error::Config(
                        "piecewise_linear needs at least two knots with increasing t".into(),
                    ));
                }
                if knots[0].0 > 0.0 || knots[knots.len() - 1].0 < 1.0 {
                    return Err(Error::Config(
                        "piecewise_linear knots must cover [0, 1]".into(),
                    ));
                }
            }
            RuleSpec::StepLevels { levels } if levels.is_empty() => {
                return Err(Error::Config("step_levels needs at least one level".into()));
            }
            RuleSpec::Polynomial { coeffs } if coeffs.is_empty() => {
                return Err(Error::Config(
                    "polynomial needs at least one coefficient".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            RuleSpec::Constant { value } => *value,
            RuleSpec::Identity => t,
            RuleSpec::Step {
                threshold,
                low,
                high,
            } => {
                if t < *threshold {
                    *low
                } else {
                    *high
                }
            }
            RuleSpec::PiecewiseLinear { knots } => {
                let k = knots
                    .partition_point(|(s, _)| *s <= t)
                    .clamp(1, knots.len() - 1);
                let ((t0, x0), (t1, x1)) = (knots[k - 1], knots[k]);
                x0 + (x1 - x0) * (t - t0) / (t1 - t0)
            }
            RuleSpec::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c),
            RuleSpec::StepLevels { levels } => {
                let l = levels.len();
                levels[((t * l as f64).floor() as usize).min(l - 1)]
            }
        }
    }

    pub fn sample(&self, n_points: usize) -> Vec<f64> {
        (0..n_points)
            .map(|i| self.eval(i as f64 / (n_points - 1) as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMode {
    #[default]
    Check,
    Necessity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopePayload {
    pub problem: ProblemSpec,
    pub rule: RuleSpec,
    #[serde(default)]
    pub mode: EnvelopeMode,
    #[serde(default)]
    pub candidates: Vec<f64>,
    #[serde(default)]
    pub mesh: Option<Vec<f64>>,
    #[serde(default)]
    pub shift_steps: Option<usize>,
    #[serde(default)]
    pub richardson: bool,
}

/// `g(v, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GSpec {
    /// `v - p`
    Quasilinear,
    /// `v - p^3`
    PowerPayment,
}

impl GSpec {
    pub fn eval(self, v: f64, p: f64) -> f64 {
        match self {
            GSpec::Quasilinear => v - p,
            GSpec::PowerPayment => v - p * p * p,
        }
    }

    fn info(self, voi: ValueOfInformation) -> InfoPreference {
        match self {
            GSpec::Quasilinear => InfoPreference::quasilinear(voi),
            GSpec::PowerPayment => InfoPreference::power_payment(voi),
        }
    }
}

/// `h(y, t)` for real outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case", deny_unknown_fields)]
pub enum HSpec {
    /// `y t`
    Product,
    /// `sum_jk c[j][k] y^j t^k`
    Polynomial { coeffs: Vec<Vec<f64>> },
}

impl HSpec {
    pub fn eval(&self, y: f64, t: f64) -> f64 {
        match self {
            HSpec::Product => y * t,
            HSpec::Polynomial { coeffs } => poly2(coeffs, y, t),
        }
    }

    pub fn dt(&self, y: f64, t: f64) -> f64 {
        match self {
            HSpec::Product => y,
            HSpec::Polynomial { coeffs } => poly2_dt(coeffs, y, t),
        }
    }
}

/// `f(y, p, t) = g(h(y, t), p)` with `f_3 = h_t`, bounded over the
/// allocation's outcomes on the type grid.
pub fn separable_preference(g: GSpec, h: &HSpec, outcomes: &[f64]) -> Result<Preference<f64>> {
    let n = outcomes.len();
    let mut bound = 0.0f64;
    for &y in outcomes {
        for i in 0..n {
            bound = bound.max(h.dt(y, i as f64 / (n - 1) as f64).abs());
        }
    }
    let (hf, hd) = (h.clone(), h.clone());
    Preference::new(
        move |y: &f64, p, t| g.eval(hf.eval(*y, t), p),
        move |y: &f64, _, t| hd.dt(*y, t),
        bound * (1.0 + 1e-9),
        (-1.0, 1.0),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisPayload {
    pub g: GSpec,
    pub h: HSpec,
    pub allocation: RuleSpec,
    #[serde(default)]
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreeningMode {
    #[default]
    Implement,
    Converse,
    Search,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreeningPayload {
    pub g: GSpec,
    pub h: HSpec,
    pub allocation: RuleSpec,
    #[serde(default)]
    pub mode: ScreeningMode,
    /// Reverses the allocation on `[a, b]`.
    #[serde(default)]
    pub inject_decreasing: Option<[f64; 2]>,
    #[serde(default)]
    pub k: f64,
    #[serde(default = "default_perturbations")]
    pub perturbations: usize,
}

fn default_perturbations() -> usize {
    50
}

/// Replaces `Y` on `[a, b]` by its mirror image `t -> Y(a + b - t)`.
pub fn inject_decreasing(outcomes: &[f64], a: f64, b: f64) -> Vec<f64> {
    let n = outcomes.len();
    let h = 1.0 / (n - 1) as f64;
    let lo = (a / h).ceil() as usize;
    let hi = ((b / h).floor() as usize).min(n - 1);
    let mut out = outcomes.to_vec();
    for i in lo..=hi {
        out[i] = outcomes[lo + hi - i];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlackwellPayload {
    pub lower: PosteriorDistribution,
    pub upper: PosteriorDistribution,
    #[serde(default = "default_oracle_tests")]
    pub oracle_tests: usize,
}

fn default_oracle_tests() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VSpec {
    ScoringL2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Insertion {
    pub index: usize,
    pub distribution: PosteriorDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builtin", rename_all = "snake_case", deny_unknown_fields)]
pub enum InfoAllocation {
    Explicit {
        items: Vec<PosteriorDistribution>,
    },
    /// Symmetric binary experiments with accuracy `q0 + slope * t` under a
    /// uniform two-state prior.
    NestedBinary {
        q0: f64,
        slope: f64,
        #[serde(default)]
        insert_incomparable: Option<Insertion>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoMarketPayload {
    pub g: GSpec,
    #[serde(rename = "V")]
    pub v: VSpec,
    pub allocation: InfoAllocation,
    #[serde(default)]
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &str, header: &[&str], rows: Vec<Vec<f64>>) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows,
        }
    }

    fn mimic(ic: &IcReport) -> Self {
        let n = ic.mimic_matrix.len();
        let header: Vec<String> = std::iter::once("r".to_string())
            .chain((0..n).map(|j| format!("t{j}")))
            .collect();
        let h = 1.0 / (n - 1) as f64;
        let rows = ic
            .mimic_matrix
            .iter()
            .enumerate()
            .map(|(i, row)| {
                std::iter::once(i as f64 * h)
                    .chain(row.iter().copied())
                    .collect()
            })
            .collect();
        Self {
            name: "mimic_matrix".into(),
            header,
            rows,
        }
    }

    fn violations(ic: &IcReport) -> Self {
        Self::new(
            "violations",
            &["reported", "true_type", "r", "t", "gain"],
            ic.violating_pairs
                .iter()
                .map(|v| vec![v.reported as f64, v.true_type as f64, v.r, v.t, v.gain])
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub reference: String,
    pub kind: Kind,
    pub grid: usize,
    pub seed: u64,
    pub expected: String,
    pub observed: String,
    pub passed: bool,
    pub report: Value,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

/// Runs a scenario. Errors the scenario is designed to provoke are
/// reported as observations; anything else is returned.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let payload = config.validate()?;
    let n = config.grid;
    let over = config.tolerance.unwrap_or_default();
    let (observed, report, tables) = match &payload {
        Payload::Envelope(p) => run_envelope(p, n, &over)?,
        Payload::Synthesis(p) => run_synthesis(p, n, &over)?,
        Payload::Screening(p) => run_screening(p, n, config.seed, &over)?,
        Payload::Blackwell(p) => run_blackwell(p, config.seed, &over)?,
        Payload::InfoMarket(p) => run_info_market(p, n, &over)?,
    };
    Ok(ScenarioOutcome {
        name: config.name.clone(),
        reference: config.reference.clone(),
        kind: config.kind,
        grid: n,
        seed: config.seed,
        passed: observed == config.expected,
        expected: config.expected.clone(),
        observed,
        report,
        tables,
    })
}

type Run = (String, Value, Vec<Table>);

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Numeric(format!("report serialization: {e}")))
}

fn error_report(e: &Error) -> Value {
    json!({ "error": e.to_string() })
}

fn run_envelope(p: &EnvelopePayload, n: usize, over: &ToleranceOverride) -> Result<Run> {
    let problem = p.problem.build();
    let rule = DecisionRule::new(p.rule.sample(n))?;
    let tol = over.apply(envelope::calibrated_tolerance(&problem, &rule)?)?;
    let report = match p.mode {
        EnvelopeMode::Check => {
            let mut cfg = OuterFocConfig::default();
            if let Some(m) = &p.mesh {
                cfg.mesh = m.clone();
            }
            if let Some(s) = p.shift_steps {
                cfg.shift_steps = s;
            }
            cfg.richardson = p.richardson;
            envelope::check_main_theorem_with(&problem, &rule, tol, &cfg)?
        }
        EnvelopeMode::Necessity => {
            match envelope::check_necessity(&problem, n, |t| p.rule.eval(t), &p.candidates, tol) {
                Ok(r) => r,
                Err(e @ Error::NotOptimal { .. }) => {
                    return Ok(("NotOptimal".into(), error_report(&e), vec![]))
                }
                Err(e) => return Err(e),
            }
        }
    };
    let observed = format!("{:?}", report.verdict);
    let value_rows = (0..n)
        .map(|i| {
            vec![
                report.value_fn.node(i),
                report.value_fn.values()[i],
                report.envelope_residual.values()[i],
            ]
        })
        .collect();
    let foc_rows = report
        .outer_foc_residuals
        .rows()
        .map(|(r, t, v)| vec![r, t, v])
        .collect();
    let tables = vec![
        Table::new("value", &["t", "value", "residual"], value_rows),
        Table::new("outer_foc", &["r", "t", "residual"], foc_rows),
    ];
    let mut value = to_value(&report)?;
    value["tolerance"] = to_value(&tol)?;
    Ok((observed, value, tables))
}

fn run_synthesis(p: &SynthesisPayload, n: usize, over: &ToleranceOverride) -> Result<Run> {
    let outcomes = p.allocation.sample(n);
    let pref = separable_preference(p.g, &p.h, &outcomes)?;
    let alloc = Allocation::real(outcomes.clone())?;
    let tol = over.apply(screening::SYNTHESIS_TOL)?;
    let synth = synthesis::synthesize_with(&pref, &alloc, p.k, tol, Default::default())?;
    let residual = synthesis::verify_envelope_consistency(&pref, &alloc, &synth.payments, p.k)?;
    let scale = Tolerance::grid_calibrated(n, pref.t_partial_bound())?;
    let consistent = residual.max_abs() <= scale.abs_tol;
    // quasilinear closed form P = h(Y(t), t) - k - integral_0^t h_t(Y(s), s) ds
    let closed_gap = match p.g {
        GSpec::Quasilinear => {
            let rent = GridFn::new((0..n).map(|i| p.h.dt(outcomes[i], alloc.node(i))).collect())?
                .cumulative();
            let gap = (0..n)
                .map(|i| {
                    let closed = p.h.eval(outcomes[i], alloc.node(i)) - p.k - rent.values()[i];
                    (closed - synth.payments.values()[i]).abs()
                })
                .fold(0.0, f64::max);
            Some(gap)
        }
        GSpec::PowerPayment => None,
    };
    let rows = (0..n)
        .map(|i| {
            vec![
                alloc.node(i),
                synth.payments.values()[i],
                synth.continuation.values()[i],
                residual.values()[i],
            ]
        })
        .collect();
    let report = json!({
        "payments": synth.payments,
        "continuation": synth.continuation,
        "consistency_residual_max": residual.max_abs(),
        "consistency_threshold": scale.abs_tol,
        "closed_form_gap": closed_gap,
        "t_partial_bound": pref.t_partial_bound(),
    });
    let observed = if consistent {
        "Consistent"
    } else {
        "Inconsistent"
    };
    Ok((
        observed.into(),
        report,
        vec![Table::new(
            "payments",
            &["t", "payment", "continuation", "residual"],
            rows,
        )],
    ))
}

fn ic_value(ic: &IcReport) -> Result<Value> {
    let mut v = to_value(ic)?;
    if let Value::Object(map) = &mut v {
        map.remove("mimic_matrix");
        map.insert("violation_count".into(), json!(ic.violating_pairs.len()));
        if let Some(Value::Array(list)) = map.get_mut("violating_pairs") {
            list.truncate(REPORT_VIOLATIONS);
        }
    }
    Ok(v)
}

fn run_screening(
    p: &ScreeningPayload,
    n: usize,
    seed: u64,
    over: &ToleranceOverride,
) -> Result<Run> {
    let mut outcomes = p.allocation.sample(n);
    if let Some([a, b]) = p.inject_decreasing {
        outcomes = inject_decreasing(&outcomes, a, b);
    }
    let pref = separable_preference(p.g, &p.h, &outcomes)?;
    let alloc = Allocation::real(outcomes)?;
    let tol = over.apply(Tolerance::grid_calibrated(n, pref.t_partial_bound())?)?;
    let payments_table = |pay: &GridFn| {
        Table::new(
            "payments",
            &["t", "allocation", "payment"],
            (0..n)
                .map(|i| vec![pay.node(i), alloc.outcomes()[i], pay.values()[i]])
                .collect(),
        )
    };
    match p.mode {
        ScreeningMode::Implement => {
            match screening::implement_increasing(&pref, &alloc, p.k, tol) {
                Ok(imp) => {
                    let observed = if imp.ic.is_ic { "IC" } else { "NotIC" };
                    let report = json!({
                        "payments": imp.payments,
                        "ic": ic_value(&imp.ic)?,
                        "scd": imp.scd,
                        "tolerance": tol,
                    });
                    let tables = vec![
                        payments_table(&imp.payments),
                        Table::mimic(&imp.ic),
                        Table::violations(&imp.ic),
                    ];
                    Ok((observed.into(), report, tables))
                }
                Err(e @ Error::NotIncreasing { .. }) => {
                    Ok(("NotIncreasing".into(), error_report(&e), vec![]))
                }
                Err(e) => Err(e),
            }
        }
        ScreeningMode::Converse => {
            let payments =
                synthesis::synthesize_payments(&pref, &alloc, p.k, screening::SYNTHESIS_TOL)?;
            let mech = Mechanism::new(pref.clone(), alloc.clone(), payments.clone())?;
            let ic = screening::ic_report(&mech, tol)?;
            let conv = screening::converse_check(&mech, tol)?;
            let observed = match conv.verdict {
                screening::ConverseVerdict::Ok => "Ok",
                screening::ConverseVerdict::CounterexampleFound { .. } => "CounterexampleFound",
            };
            let report = json!({
                "payments": payments,
                "converse": conv,
                "ic": ic_value(&ic)?,
                "tolerance": tol,
            });
            Ok((
                observed.into(),
                report,
                vec![
                    payments_table(&payments),
                    Table::mimic(&ic),
                    Table::violations(&ic),
                ],
            ))
        }
        ScreeningMode::Search => {
            let search =
                screening::search_ic_payments(&pref, &alloc, p.k, p.perturbations, seed, tol)?;
            let observed = if search.found_ic {
                "ICFound"
            } else {
                "NoICFound"
            };
            let report = json!({
                "search": search,
                "tolerance": tol,
                "note": "failing to find IC payments in the searched family is evidence, not proof, of non-implementability",
            });
            Ok((observed.into(), report, vec![]))
        }
    }
}

fn certificate_table(name: &str, cert: &blackwell::GarblingCertificate) -> Table {
    let rows = cert
        .joint
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(move |(j, q)| vec![i as f64, j as f64, *q])
        })
        .collect();
    Table::new(name, &["i", "j", "q"], rows)
}

fn run_blackwell(p: &BlackwellPayload, seed: u64, over: &ToleranceOverride) -> Result<Run> {
    let tol = over.apply(Tolerance::absolute(1e-9)?)?;
    let up = blackwell::blackwell_leq(&p.lower, &p.upper, tol)?;
    let down = blackwell::blackwell_leq(&p.upper, &p.lower, tol)?;
    let relation = OrderRelation::from_leq(up.feasible, down.feasible);
    let report = json!({
        "relation": relation,
        "lower_leq_upper": {
            "certificate": up,
            "residuals": up.residuals(&p.lower, &p.upper),
            "oracle": blackwell::convex_oracle_leq(&p.lower, &p.upper, p.oracle_tests, seed),
        },
        "upper_leq_lower": {
            "certificate": down,
            "residuals": down.residuals(&p.upper, &p.lower),
            "oracle": blackwell::convex_oracle_leq(&p.upper, &p.lower, p.oracle_tests, seed),
        },
    });
    Ok((
        format!("{relation:?}"),
        report,
        vec![
            certificate_table("certificate_lower_upper", &up),
            certificate_table("certificate_upper_lower", &down),
        ],
    ))
}

/// Concrete distributions for an info-market allocation on `n_points`
/// nodes.
pub fn info_allocation(
    spec: &InfoAllocation,
    n_points: usize,
) -> Result<Vec<PosteriorDistribution>> {
    match spec {
        InfoAllocation::Explicit { items } => Ok(items.clone()),
        InfoAllocation::NestedBinary {
            q0,
            slope,
            insert_incomparable,
        } => {
            let mut alloc = info_market::nested_binary_allocation(n_points, *q0, *slope)?;
            if let Some(ins) = insert_incomparable {
                alloc[ins.index] = ins.distribution.clone();
            }
            Ok(alloc)
        }
    }
}

fn run_info_market(p: &InfoMarketPayload, n: usize, over: &ToleranceOverride) -> Result<Run> {
    let voi = match p.v {
        VSpec::ScoringL2 => ValueOfInformation::scoring_l2(),
    };
    let alloc = info_allocation(&p.allocation, n)?;
    voi.probe(alloc[0].states(), 64, 0)?;
    let ip = p.g.info(voi.clone());
    let tol = over.apply(Tolerance::grid_calibrated(n, voi.bound())?)?;
    let uniform_point = Belief::uniform(alloc[0].states()).map(|mu| {
        info_market::expected_value(&voi, &PosteriorDistribution::point_mass(&mu), 1.0)
    })?;
    match info_market::price_information_menu(&ip, &alloc, p.k, tol) {
        Ok(menu) => {
            let observed = match (menu.ic.is_ic, menu.sharing.sharing_proof) {
                (true, true) => "ICSharingProof",
                (false, _) => "NotIC",
                (true, false) => "NotSharingProof",
            };
            let h = 1.0 / (n - 1) as f64;
            let rows = (0..n)
                .map(|i| {
                    let t = i as f64 * h;
                    vec![
                        t,
                        menu.payments.values()[i],
                        info_market::expected_value(&voi, &alloc[i], t),
                    ]
                })
                .collect();
            let report = json!({
                "payments": menu.payments,
                "ic": ic_value(&menu.ic)?,
                "scd": menu.scd,
                "sharing": menu.sharing,
                "uninformed_value_at_one": uniform_point,
                "tolerance": tol,
            });
            let tables = vec![
                Table::new("payments", &["t", "payment", "expected_value"], rows),
                Table::mimic(&menu.ic),
                Table::violations(&menu.ic),
            ];
            Ok((observed.into(), report, tables))
        }
        Err(e @ Error::NotIncreasing { .. }) => {
            Ok(("NotIncreasing".into(), error_report(&e), vec![]))
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(kind: &str, grid: usize, expected: &str, payload: Value) -> ScenarioConfig {
        ScenarioConfig::from_json(
            &json!({ "name": "t", "kind": kind, "grid": grid, "expected": expected, "payload": payload }).to_string(),
        )
        .unwrap()
    }

    #[test]
    fn constant_rule_scenario_holds() {
        let c = config(
            "envelope",
            101,
            "BothHold",
            json!({ "problem": { "builtin": "xt" }, "rule": { "builtin": "constant", "value": 1.0 } }),
        );
        let out = run_scenario(&c).unwrap();
        assert!(out.passed, "{}", out.observed);
        assert_eq!(out.tables[0].rows.len(), 101);
    }

    #[test]
    fn grid_too_small_is_rejected() {
        let c = config(
            "envelope",
            2,
            "BothHold",
            json!({ "problem": { "builtin": "xt" }, "rule": { "builtin": "identity" } }),
        );
        assert_eq!(run_scenario(&c).unwrap_err(), Error::GridTooSmall(2));
    }

    #[test]
    fn payload_schema_is_checked() {
        let c = config(
            "envelope",
            11,
            "BothHold",
            json!({ "problem": { "builtin": "nope" } }),
        );
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = config(
            "screening",
            11,
            "IC",
            json!({ "g": "quasilinear", "h": { "builtin": "product" }, "allocation": { "builtin": "identity" }, "extra": 1 }),
        );
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!(ScenarioConfig::from_json("{ \"name\": 1 }").is_err());
    }

    #[test]
    fn rule_builtins_evaluate() {
        let pl = RuleSpec::PiecewiseLinear {
            knots: vec![(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)],
        };
        assert_eq!(pl.eval(0.25), 0.5);
        assert_eq!(pl.eval(1.0), 0.0);
        let sl = RuleSpec::StepLevels {
            levels: vec![0.0, 1.0, 2.0, 3.0],
        };
        assert_eq!(sl.eval(0.3), 1.0);
        assert_eq!(sl.eval(1.0), 3.0);
        assert_eq!(
            RuleSpec::Polynomial {
                coeffs: vec![1.0, 0.0, 2.0]
            }
            .eval(0.5),
            1.5
        );
        assert_eq!(
            inject_decreasing(&[0.0, 0.25, 0.5, 0.75, 1.0], 0.25, 0.75),
            vec![0.0, 0.75, 0.5, 0.25, 1.0]
        );
    }

    #[test]
    fn polynomial_partial_matches_difference() {
        let c = vec![vec![0.5, 1.0, -2.0], vec![0.0, 3.0, 1.0]];
        let (x, t, h) = (0.3, 0.6, 1e-6);
        let fd = (poly2(&c, x, t + h) - poly2(&c, x, t - h)) / (2.0 * h);
        assert!((poly2_dt(&c, x, t) - fd).abs() < 1e-8);
    }

    #[test]
    fn reruns_are_identical() {
        let c = config(
            "screening",
            31,
            "IC",
            json!({ "g": "power_payment", "h": { "builtin": "product" }, "allocation": { "builtin": "identity" } }),
        );
        let a = serde_json::to_string(&run_scenario(&c).unwrap()).unwrap();
        let b = serde_json::to_string(&run_scenario(&c).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
