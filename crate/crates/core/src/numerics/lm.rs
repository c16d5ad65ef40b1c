//! Damped Gauss-Newton (Levenberg-Marquardt) least squares with bound
//! projection, used by the g² and quadruplet spectral fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-10,
        }
    }
}

/// A weighted nonlinear least-squares problem over box-bounded parameters.
///
/// `residual` fills a preallocated slice of length `n_residuals`; weights, if
/// present, multiply each residual entry.
pub struct FitProblem<'a, F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    pub residual: F,
    pub n_residuals: usize,
    pub initial: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub weights: Option<&'a [f64]>,
    pub options: FitOptions,
}

#[derive(Debug)]
pub struct FitOutcome {
    pub params: Vec<f64>,
    /// Parameter covariance s² (JᵀJ)⁻¹ with s² the reduced sum of squares.
    pub covariance: DMatrix<f64>,
    /// sqrt of the weighted sum of squared residuals at the solution.
    pub residual_norm: f64,
    pub iterations: usize,
}

pub fn least_squares<F>(problem: FitProblem<'_, F>) -> Result<FitOutcome>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let n = problem.initial.len();
    let m = problem.n_residuals;
    if n == 0 || m == 0 {
        return Err(Error::InvalidParameter(
            "empty parameter or residual vector".into(),
        ));
    }
    if !(problem.options.tolerance > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be > 0".into()));
    }
    if let Some(w) = problem.weights {
        if w.len() != m {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {m} residuals",
                w.len()
            )));
        }
    }
    let clamp = |x: &mut [f64]| {
        if let Some(lo) = &problem.lower {
            for (v, l) in x.iter_mut().zip(lo) {
                *v = v.max(*l);
            }
        }
        if let Some(hi) = &problem.upper {
            for (v, h) in x.iter_mut().zip(hi) {
                *v = v.min(*h);
            }
        }
    };

    let eval = |x: &[f64], out: &mut [f64]| -> Result<()> {
        (problem.residual)(x, out)?;
        if let Some(w) = problem.weights {
            for (r, wi) in out.iter_mut().zip(w) {
                *r *= wi;
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "residual function returned non-finite values".into(),
            ));
        }
        Ok(())
    };

    let mut x = problem.initial.clone();
    clamp(&mut x);
    let mut r = vec![0.0; m];
    eval(&x, &mut r)?;
    let mut ss: f64 = r.iter().map(|v| v * v).sum();

    let tol = problem.options.tolerance;
    let mut lambda = 0.0f64;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut jac = DMatrix::zeros(m, n);
    let mut scratch = vec![0.0; m];

    while iterations < problem.options.max_iterations {
        fill_jacobian(&eval, &x, &r, &mut jac, &mut scratch, &problem)?;
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &rv;
        if grad.amax() <= tol * (1.0 + ss) {
            converged = true;
            break;
        }

        let mut step_accepted = false;
        for _ in 0..32 {
            let mut damped = jtj.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-30);
            }
            let step = match damped.clone().lu().solve(&(-&grad)) {
                Some(s) => s,
                None => {
                    lambda = (lambda * 10.0).max(1e-4);
                    continue;
                }
            };
            let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi + si).collect();
            clamp(&mut trial);
            if eval(&trial, &mut scratch).is_err() {
                lambda = (lambda * 10.0).max(1e-4);
                continue;
            }
            let trial_ss: f64 = scratch.iter().map(|v| v * v).sum();
            if trial_ss <= ss {
                let step_small = x
                    .iter()
                    .zip(&trial)
                    .all(|(a, b)| (a - b).abs() <= tol * (1.0 + a.abs()));
                let ss_small = (ss - trial_ss) <= tol * ss.max(1e-300);
                x = trial;
                r.copy_from_slice(&scratch);
                ss = trial_ss;
                lambda = if lambda > 1e-12 { lambda / 10.0 } else { 0.0 };
                step_accepted = true;
                if step_small || ss_small {
                    converged = true;
                }
                break;
            }
            lambda = (lambda * 10.0).max(1e-4);
        }
        iterations += 1;
        if converged {
            break;
        }
        if !step_accepted {
            // Damping saturated without progress: treat as a stationary point.
            converged = true;
            break;
        }
    }

    if !converged {
        return Err(Error::FitFailure {
            residual_norm: ss.sqrt(),
            iterations,
            message: "maximum iterations exhausted".into(),
        });
    }

    fill_jacobian(&eval, &x, &r, &mut jac, &mut scratch, &problem)?;
    let jtj = jac.transpose() * &jac;
    let dof = m.saturating_sub(n);
    let s2 = if dof > 0 { ss / dof as f64 } else { 1.0 };
    let covariance = jtj
        .pseudo_inverse(1e-12)
        .unwrap_or_else(|_| DMatrix::from_element(n, n, f64::INFINITY))
        * s2;

    Ok(FitOutcome {
        params: x,
        covariance,
        residual_norm: ss.sqrt(),
        iterations,
    })
}

fn fill_jacobian<F, G>(
    eval: &G,
    x: &[f64],
    r0: &[f64],
    jac: &mut DMatrix<f64>,
    scratch: &mut [f64],
    problem: &FitProblem<'_, F>,
) -> Result<()>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
    G: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let mut h = 1e-7 * x[j].abs().max(1e-7);
        // Step backwards when a forward step would leave the feasible box.
        if let Some(hi) = &problem.upper {
            if x[j] + h > hi[j] {
                h = -h;
            }
        }
        xp[j] = x[j] + h;
        eval(&xp, scratch)?;
        for i in 0..r0.len() {
            jac[(i, j)] = (scratch[i] - r0[i]) / h;
        }
        xp[j] = x[j];
    }
    Ok(())
}

/// Central finite-difference Jacobian of a residual function, for checking
/// hand-written derivative implementations in tests.
pub fn central_difference_jacobian<F>(
    residual: &F,
    x: &[f64],
    n_residuals: usize,
) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    let mut jac = DMatrix::zeros(n_residuals, x.len());
    let mut plus = vec![0.0; n_residuals];
    let mut minus = vec![0.0; n_residuals];
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = 1e-6 * x[j].abs().max(1e-6);
        xp[j] = x[j] + h;
        residual(&xp, &mut plus)?;
        xp[j] = x[j] - h;
        residual(&xp, &mut minus)?;
        xp[j] = x[j];
        for i in 0..n_residuals {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}
