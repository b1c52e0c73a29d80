//! OoD detector on covariate- and concept-shifted data with fixed bases.
//!
//! The margin requirement over ten seeds lives in the acceptance target;
//! these checks cover the properties every seed must satisfy.

mod common;

use common::shift::{concept_shift, covariate_shift, FlagRates};

fn check(rates: FlagRates) {
    assert!(rates.in_distribution <= 0.05, "{rates:?}");
    assert!(rates.shifted >= rates.in_distribution, "{rates:?}");
    assert!(rates.shifted_score >= 1.0, "{rates:?}");
}

#[test]
fn covariate_shift_keeps_false_positives_low() {
    check(covariate_shift(0));
}

#[test]
fn concept_shift_flags_at_least_as_often_as_in_distribution() {
    check(concept_shift(2));
}
