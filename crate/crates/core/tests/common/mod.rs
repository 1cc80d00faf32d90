#![allow(dead_code)]

use cirjump::coefficients::{CoefficientSet, InputRate, JumpMeasure, TimeFunction};
use cirjump::model::Model;

pub const S: f64 = 0.1;
pub const T: f64 = 1.9;
pub const Y: f64 = 0.7;
pub const U: f64 = 1.0;

pub fn beta() -> TimeFunction {
    TimeFunction::piecewise_linear(vec![0.0, 1.0, 2.0], vec![0.8, 1.5, 1.0]).unwrap()
}

pub fn sigma() -> TimeFunction {
    TimeFunction::piecewise_constant(vec![0.0, 0.7, 1.4], vec![0.9, 1.2, 1.0]).unwrap()
}

pub fn a() -> TimeFunction {
    TimeFunction::piecewise_constant(vec![0.0, 0.5, 1.2], vec![0.6, 1.1, 0.4]).unwrap()
}

pub fn a_tilde() -> TimeFunction {
    TimeFunction::piecewise_constant(vec![0.0, 0.8, 1.5], vec![1.5, 0.5, 2.0]).unwrap()
}

pub fn full_coeffs() -> CoefficientSet {
    CoefficientSet::new(a(), a_tilde(), beta(), sigma(), Y, 2.0).unwrap()
}

pub fn two_atoms() -> JumpMeasure {
    JumpMeasure::atoms(vec![(0.3, 1.0), (1.2, 0.5)]).unwrap()
}

/// Density `e^{-y}` on `(0, ∞)`.
pub fn exponential_density() -> JumpMeasure {
    JumpMeasure::tempered_power(1.0, -1.0, 1.0).unwrap()
}

pub fn full_model(nu: JumpMeasure) -> Model {
    Model::new(full_coeffs(), nu).unwrap()
}

pub fn gamma_input_coeffs(alpha: f64) -> CoefficientSet {
    CoefficientSet::with_input(
        InputRate::Alpha(TimeFunction::constant(alpha)),
        TimeFunction::constant(0.0),
        beta(),
        sigma(),
        0.0,
        2.0,
    )
    .unwrap()
}

pub fn constant_coeffs(a: f64, a_tilde: f64, beta: f64, sigma2: f64, t_max: f64) -> CoefficientSet {
    CoefficientSet::new(
        TimeFunction::constant(a),
        TimeFunction::constant(a_tilde),
        TimeFunction::constant(beta),
        TimeFunction::constant(sigma2.sqrt()),
        0.0,
        t_max,
    )
    .unwrap()
}
