//! Scenario configs shipped with the binary.

pub const BUNDLED: &[(&str, &str)] = &[
    (
        "blackwell_contraction",
        include_str!("../scenarios/blackwell_contraction.json"),
    ),
    (
        "blackwell_incomparable",
        include_str!("../scenarios/blackwell_incomparable.json"),
    ),
    (
        "example1_constant",
        include_str!("../scenarios/example1_constant.json"),
    ),
    (
        "example1_identity_rule",
        include_str!("../scenarios/example1_identity_rule.json"),
    ),
    (
        "example1_optimal_rule",
        include_str!("../scenarios/example1_optimal_rule.json"),
    ),
    (
        "example1_step",
        include_str!("../scenarios/example1_step.json"),
    ),
    (
        "forecasting_menu",
        include_str!("../scenarios/forecasting_menu.json"),
    ),
    (
        "forecasting_menu_incomparable",
        include_str!("../scenarios/forecasting_menu_incomparable.json"),
    ),
    (
        "necessity_anti_optimal",
        include_str!("../scenarios/necessity_anti_optimal.json"),
    ),
    (
        "necessity_linear",
        include_str!("../scenarios/necessity_linear.json"),
    ),
    (
        "necessity_tracking",
        include_str!("../scenarios/necessity_tracking.json"),
    ),
    (
        "screening_converse",
        include_str!("../scenarios/screening_converse.json"),
    ),
    (
        "screening_decreasing_rejected",
        include_str!("../scenarios/screening_decreasing_rejected.json"),
    ),
    (
        "screening_decreasing_search",
        include_str!("../scenarios/screening_decreasing_search.json"),
    ),
    (
        "screening_quasilinear_poly",
        include_str!("../scenarios/screening_quasilinear_poly.json"),
    ),
    (
        "screening_step_levels",
        include_str!("../scenarios/screening_step_levels.json"),
    ),
    (
        "synthesis_power_payment",
        include_str!("../scenarios/synthesis_power_payment.json"),
    ),
    (
        "synthesis_quasilinear_cubic",
        include_str!("../scenarios/synthesis_quasilinear_cubic.json"),
    ),
];
