//! Matrix exponential for small dense systems.
//!
//! The rate model is linear with constant coefficients on four states, so the
//! propagator is computed exactly by scaling-and-squaring with a Taylor
//! evaluation of the scaled block, rather than by a generic adaptive stepper.

use nalgebra::{Matrix4, Vector4};

use crate::error::{invalid, Result};

/// exp(A) for a 4x4 matrix by scaling-and-squaring.
///
/// The scaled matrix has 1-norm <= 0.5, where the Taylor series reaches
/// machine precision in ~20 terms.
pub fn matrix_exponential(matrix: &Matrix4<f64>) -> Matrix4<f64> {
    let norm = one_norm(matrix);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let mut result = taylor_exp(&(matrix / 2f64.powi(squarings as i32)));
    for _ in 0..squarings {
        result = result * result;
    }
    result
}

/// Taylor series of exp for a block with 1-norm <= 0.5: machine precision in
/// at most ~20 terms.
fn taylor_exp(scaled: &Matrix4<f64>) -> Matrix4<f64> {
    let mut result = Matrix4::identity();
    let mut term = Matrix4::identity();
    for k in 1..=24 {
        term = (term * scaled) / k as f64;
        result += term;
        if one_norm(&term) < 1e-18 * one_norm(&result) {
            break;
        }
    }
    result
}

/// exp(G tau) for a probability-conserving generator (zero column sums).
///
/// The exact propagator is column-stochastic; floating-point column-sum
/// drift doubles with every squaring, so the unit-sum property is restored
/// after each one. Output occupation sums then hold to 1e-12 even over
/// spans of thousands of relaxation times.
pub(crate) fn stochastic_propagator(generator: &Matrix4<f64>, tau: f64) -> Result<Matrix4<f64>> {
    let scale = one_norm(generator).max(1.0);
    for col in 0..4 {
        let sum: f64 = (0..4).map(|row| generator[(row, col)]).sum();
        if sum.abs() > 1e-9 * scale {
            return Err(invalid(format!(
                "generator column {col} sums to {sum:.3e}, not probability-conserving"
            )));
        }
    }
    if !tau.is_finite() || tau < 0.0 {
        return Err(invalid(format!("propagation time {tau} must be >= 0")));
    }
    let scaled = generator * tau;
    let norm = one_norm(&scaled);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let mut result = taylor_exp(&(scaled / 2f64.powi(squarings as i32)));
    fix_column_sums(&mut result);
    for _ in 0..squarings {
        result = result * result;
        fix_column_sums(&mut result);
    }
    Ok(result)
}

fn fix_column_sums(m: &mut Matrix4<f64>) {
    for col in 0..4 {
        let err = ((0..4).map(|row| m[(row, col)]).sum::<f64>() - 1.0) / 4.0;
        for row in 0..4 {
            m[(row, col)] -= err;
        }
    }
}

/// exp(G tau) applied to an initial occupation vector.
///
/// The generator must conserve probability: every column sums to zero.
pub fn matrix_exponential_action(
    generator: &Matrix4<f64>,
    init: &Vector4<f64>,
    tau: f64,
) -> Result<Vector4<f64>> {
    Ok(stochastic_propagator(generator, tau)? * init)
}

fn one_norm(m: &Matrix4<f64>) -> f64 {
    (0..4)
        .map(|col| (0..4).map(|row| m[(row, col)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
