//! Acceptance suite: one test per verification criterion, each printing a
//! pass/fail line with the measured values (visible with
//! `cargo test --test acceptance -- --nocapture`).
//!
//! Criteria 7 and 8 share a single batch of twenty sweep runs.

use std::sync::OnceLock;

use cdmer_cli::verify::{self, CriterionResult};

const SEED: u64 = 42;

fn assert_criterion(result: &CriterionResult) {
    println!("{}", result.line());
    assert!(result.passed, "{}", result.line());
}

fn adaptation_pair() -> &'static (CriterionResult, CriterionResult) {
    static PAIR: OnceLock<(CriterionResult, CriterionResult)> = OnceLock::new();
    PAIR.get_or_init(|| verify::criterion_7_and_8_adaptation(SEED))
}

#[test]
fn criterion_01_soft_threshold_oracle() {
    assert_criterion(&verify::criterion_1_soft_threshold(SEED));
}

#[test]
fn criterion_02_q_step_stationarity() {
    assert_criterion(&verify::criterion_2_q_stationarity(SEED));
}

#[test]
fn criterion_03_ialm_vs_ridge_oracle() {
    assert_criterion(&verify::criterion_3_ialm_least_squares(SEED));
}

#[test]
fn criterion_04_nonneg_lasso_kkt() {
    assert_criterion(&verify::criterion_4_lasso_kkt(SEED));
}

#[test]
fn criterion_05_simplex_projection() {
    assert_criterion(&verify::criterion_5_simplex(SEED));
}

#[test]
fn criterion_06_block_coordinate_monotonicity() {
    assert_criterion(&verify::criterion_6_monotone_trace(SEED));
}

#[test]
fn criterion_07_adaptation_benefit() {
    assert_criterion(&adaptation_pair().0);
}

#[test]
fn criterion_08_region_selection() {
    assert_criterion(&adaptation_pair().1);
}

#[test]
fn criterion_09_no_shift_sanity() {
    assert_criterion(&verify::criterion_9_no_shift(SEED));
}

#[test]
fn criterion_10_metrics_oracle() {
    assert_criterion(&verify::criterion_10_metrics(SEED));
}

#[test]
fn criterion_11_protocol_fidelity() {
    assert_criterion(&verify::criterion_11_protocol(SEED));
}
