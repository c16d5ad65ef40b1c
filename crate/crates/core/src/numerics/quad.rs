//! Adaptive quadrature over finite and semi-infinite domains.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub enum Domain {
    Finite(f64, f64),
    /// [lower, infinity); the integrand must decay to zero at infinity.
    SemiInfinite(f64),
}

/// Adaptive Simpson estimate with relative tolerance `rel_tol`.
///
/// Semi-infinite domains are mapped to [0, 1) with t = a + u/(1-u).
pub fn quadrature<F: Fn(f64) -> f64>(integrand: F, domain: Domain, rel_tol: f64) -> Result<f64> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "relative tolerance {rel_tol} must be > 0"
        )));
    }
    match domain {
        Domain::Finite(a, b) => {
            if !a.is_finite() || !b.is_finite() || b < a {
                return Err(Error::InvalidParameter(format!(
                    "bad finite domain [{a}, {b}]"
                )));
            }
            adaptive(&integrand, a, b, rel_tol)
        }
        Domain::SemiInfinite(a) => {
            if !a.is_finite() {
                return Err(Error::InvalidParameter(format!("bad lower bound {a}")));
            }
            let mapped = |u: f64| {
                if u >= 1.0 {
                    return 0.0;
                }
                let t = a + u / (1.0 - u);
                integrand(t) / ((1.0 - u) * (1.0 - u))
            };
            adaptive(&mapped, 0.0, 1.0, rel_tol)
        }
    }
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    // Coarse pass over a few panels gives a magnitude scale; the recursion
    // then works against an absolute budget derived from it.
    let panels = 8;
    let h = (b - a) / panels as f64;
    let mut coarse = 0.0;
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        coarse += simpson(f, x0, x0 + h);
    }
    let scale = coarse.abs().max(1e-300);
    let mut total = 0.0;
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        total += refine(
            f,
            x0,
            x0 + h,
            simpson(f, x0, x0 + h),
            rel_tol * scale / panels as f64,
            48,
        )?;
    }
    Ok(total)
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
}

fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    budget: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * budget {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Accuracy(format!(
            "quadrature did not converge on [{a}, {b}] (residual {:.3e})",
            delta.abs()
        )));
    }
    Ok(refine(f, a, m, left, budget / 2.0, depth - 1)?
        + refine(f, m, b, right, budget / 2.0, depth - 1)?)
}
