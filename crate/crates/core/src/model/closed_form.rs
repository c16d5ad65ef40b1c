//! Literal transcriptions of the published closed-form correlation
//! expressions, kept for documentation and cross-checking.
//!
//! These are not the normative model curves: the X-XX and XX-XX forms agree
//! with the regression construction in [`super::g2_numeric`] everywhere we
//! have checked, but the XX-X and X-X forms disagree with it away from
//! trivial parameter points (XX-X evaluates to 4.5 instead of 4.0 at
//! gamma_b = gamma_x = P = 1, tau = 0). They are exposed behind this explicit
//! paper-literal entry point so the discrepancy stays visible instead of
//! silently feeding fits.

use serde::{Deserialize, Serialize};

use super::{G2Curve, G2Kind, RateSet};
use crate::error::{invalid, Error, Result};

/// Derived constants appearing in the printed closed forms (equal pumps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormConstants {
    /// Common pump rate P.
    pub pump: f64,
    /// N = Gamma_X Gamma_B + 2 P Gamma_B + P².
    pub norm: f64,
    /// Discriminant of the symmetric relaxation sector:
    /// (Gamma_X - 2 Gamma_B)² + 6 Gamma_X P - 4 Gamma_B P + P².
    pub discriminant: f64,
    /// beta_1 = 4 Gamma_B P D.
    pub beta1: f64,
    /// beta_2 = 2 D N.
    pub beta2: f64,
    /// beta_3 exactly as printed, including the bare "6 Gamma_B" term.
    pub beta3_printed: f64,
    /// beta_3 with that term read as "6 Gamma_B P" (the pattern of beta_4
    /// suggests a dropped pump factor). Identical to `beta3_printed` whenever
    /// P = 1.
    pub beta3_pump_scaled: f64,
    /// beta_4 as printed.
    pub beta4: f64,
    /// Steady-state biexciton occupation P²/N (the printed "a").
    pub steady_biexciton: f64,
    /// Z = 4 D N. Defined alongside the other abbreviations but used by none
    /// of the printed expressions.
    pub z: f64,
}

impl ClosedFormConstants {
    pub fn from_rates(rates: &RateSet) -> Result<Self> {
        let p = rates.equal_pump().ok_or_else(|| {
            invalid("closed-form constants are defined for equal pumps only".to_string())
        })?;
        let (gb, gx) = (rates.gamma_b, rates.gamma_x);
        let norm = gx * gb + 2.0 * p * gb + p * p;
        let d = (gx - 2.0 * gb).powi(2) + 6.0 * gx * p - 4.0 * gb * p + p * p;
        let sd = if d >= 0.0 { d.sqrt() } else { f64::NAN };
        let beta1 = 4.0 * gb * p * d;
        let beta2 = 2.0 * d * norm;
        let beta3_tail = gx
            * (4.0 * gb.powi(3) + p * p * (6.0 * p - sd) + 2.0 * gb * gb * (-2.0 * p + sd)
                - 3.0 * gb * p * (p + sd));
        let beta3_printed = gx.powi(3) * gb - p * p * (2.0 * gb - p) * (-2.0 * gb + p + sd)
            + gx * gx * (-4.0 * gb * gb + 6.0 * gb + p * p - gb * sd)
            + beta3_tail;
        let beta3_pump_scaled = gx.powi(3) * gb - p * p * (2.0 * gb - p) * (-2.0 * gb + p + sd)
            + gx * gx * (-4.0 * gb * gb + 6.0 * gb * p + p * p - gb * sd)
            + beta3_tail;
        let beta4 = gx.powi(3) * gb
            + p * p * (2.0 * gb - p) * (2.0 * gb - p + sd)
            + gx * gx * (-4.0 * gb * gb + 6.0 * gb * p + p * p + gb * sd)
            + gx * (4.0 * gb.powi(3)
                + p * p * (6.0 * p + sd)
                + 2.0 * gb * gb * (-2.0 * p + sd)
                + 3.0 * gb * p * (-p + sd));
        Ok(Self {
            pump: p,
            norm,
            discriminant: d,
            beta1,
            beta2,
            beta3_printed,
            beta3_pump_scaled,
            beta4,
            steady_biexciton: p * p / norm,
            z: 4.0 * d * norm,
        })
    }
}

/// Evaluate one printed closed-form correlation on a delay grid (ps).
pub fn g2_closed_paper(kind: G2Kind, rates: &RateSet, tau_ps: &[f64]) -> Result<G2Curve> {
    let constants = ClosedFormConstants::from_rates(rates)?;
    if constants.discriminant <= 0.0 {
        return Err(Error::ComplexBranch(format!(
            "discriminant {} <= 0, printed forms require a real square root",
            constants.discriminant
        )));
    }
    for &t in tau_ps {
        if !t.is_finite() || t < 0.0 {
            return Err(invalid(format!("tau grid value {t} ps must be >= 0")));
        }
    }
    let p = constants.pump;
    let (gb, gx) = (rates.gamma_b, rates.gamma_x);
    let sd = constants.discriminant.sqrt();
    // Relaxation rates of the symmetric sector and the H/V-difference mode.
    let fast = 0.5 * gx + gb + 1.5 * p + 0.5 * sd;
    let slow = 0.5 * gx + gb + 1.5 * p - 0.5 * sd;
    let diff_mode = gx + p;

    let eval = |tau_ns: f64| -> f64 {
        let ef = (-fast * tau_ns).exp();
        let es = (-slow * tau_ns).exp();
        match kind {
            G2Kind::XxThenX => {
                let ed = (-diff_mode * tau_ns).exp();
                (constants.beta1
                    + constants.beta2 * ed
                    + constants.beta3_printed * es
                    + constants.beta4 * ef)
                    / (4.0 * constants.discriminant * p * gb)
            }
            // The factor exp(tau sqrt(D)) is folded into the slow mode so the
            // expressions stay finite at large delays.
            G2Kind::XThenXx => {
                let k = gx + 2.0 * gb + 3.0 * p;
                0.5 * (ef * (k / sd - 1.0) - es * (k / sd + 1.0)) + 1.0
            }
            G2Kind::XThenX => {
                let c = (gx - 2.0 * gb) * gb + gb * p + p * p;
                (-gb * sd * (ef + es) - c * (ef - es)) / (2.0 * gb * sd) + 1.0
            }
            G2Kind::XxThenXx => {
                let c = (gx + p) * (p - 2.0 * gb);
                (c * (ef - es) - p * sd * (ef + es)) / (2.0 * p * sd) + 1.0
            }
            // checked by the constructor below
            _ => f64::NAN,
        }
    };
    if matches!(kind, G2Kind::AutoComposite | G2Kind::Cross) {
        return Err(invalid(format!(
            "g2 kind {kind} is a composite, not a start-stop pair"
        )));
    }
    Ok(G2Curve {
        kind,
        tau_ps: tau_ps.to_vec(),
        values: tau_ps.iter().map(|t| eval(t / 1000.0)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::g2_numeric;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::Rng;

    fn canonical() -> RateSet {
        RateSet::with_equal_pump(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn canonical_constants() {
        let c = canonical().closed_form_constants().unwrap();
        assert_abs_diff_eq!(c.norm, 4.0);
        assert_abs_diff_eq!(c.discriminant, 4.0);
        assert_abs_diff_eq!(c.beta1, 16.0);
        assert_abs_diff_eq!(c.beta2, 32.0);
        assert_abs_diff_eq!(c.beta3_printed, 0.0);
        assert_abs_diff_eq!(c.beta3_pump_scaled, 0.0);
        assert_abs_diff_eq!(c.beta4, 24.0);
        assert_abs_diff_eq!(c.steady_biexciton, 0.25);
        assert_abs_diff_eq!(c.z, 64.0);
        // prefactor of the XX-X form
        assert_abs_diff_eq!(1.0 / (4.0 * c.discriminant * 1.0 * 1.0), 1.0 / 16.0);
    }

    #[test]
    fn beta3_variants_coincide_at_unit_pump_only() {
        let c = canonical().closed_form_constants().unwrap();
        assert_abs_diff_eq!(c.beta3_printed, c.beta3_pump_scaled, epsilon = 1e-12);
        let rates = RateSet::with_equal_pump(1.0, 1.0, 0.5).unwrap();
        let c = rates.closed_form_constants().unwrap();
        assert!((c.beta3_printed - c.beta3_pump_scaled).abs() > 1e-6);
    }

    #[test]
    fn x_xx_matches_substituted_form_at_canonical_point() {
        let grid: Vec<f64> = (0..=1000).map(|k| k as f64 * 10.0).collect();
        let curve = g2_closed_paper(G2Kind::XThenXx, &canonical(), &grid).unwrap();
        for (v, t_ps) in curve.values.iter().zip(&grid) {
            let t = t_ps / 1000.0;
            let expect = (-4.0 * t).exp() - 2.0 * (-2.0 * t).exp() + 1.0;
            assert_abs_diff_eq!(*v, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn xx_x_printed_value_disagrees_with_oracle_at_zero() {
        // Documented discrepancy: the printed XX-X form gives 4.5 at tau = 0
        // where the regression construction gives N/(P Gamma_B) = 4.
        let closed = g2_closed_paper(G2Kind::XxThenX, &canonical(), &[0.0]).unwrap();
        let numeric = g2_numeric(G2Kind::XxThenX, &canonical(), &[0.0]).unwrap();
        assert_abs_diff_eq!(closed.values[0], 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(numeric.values[0], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn x_x_printed_form_disagrees_with_oracle() {
        let grid = [500.0];
        let closed = g2_closed_paper(G2Kind::XThenX, &canonical(), &grid).unwrap();
        let numeric = g2_numeric(G2Kind::XThenX, &canonical(), &grid).unwrap();
        assert!((closed.values[0] - numeric.values[0]).abs() > 1e-3);
    }

    #[test]
    fn agreeing_kinds_match_oracle_at_random_rates() {
        let mut rng = rand::rng();
        let grid: Vec<f64> = (0..200).map(|k| k as f64 * 37.0).collect();
        let mut checked = 0;
        while checked < 10 {
            let gb = rng.random_range(0.2..3.0);
            let gx = rng.random_range(0.2..3.0);
            let p = rng.random_range(0.05..3.0);
            let rates = RateSet::with_equal_pump(gb, gx, p).unwrap();
            let c = rates.closed_form_constants().unwrap();
            if c.discriminant <= 0.0 {
                continue;
            }
            for kind in [G2Kind::XThenXx, G2Kind::XxThenXx] {
                let closed = g2_closed_paper(kind, &rates, &grid).unwrap();
                let numeric = g2_numeric(kind, &rates, &grid).unwrap();
                for (a, b) in closed.values.iter().zip(&numeric.values) {
                    assert_relative_eq!(*a, *b, epsilon = 1e-9, max_relative = 1e-9);
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn large_delay_stays_finite() {
        let rates = RateSet::with_equal_pump(0.01, 0.01, 0.005).unwrap();
        let grid = [5_000_000.0]; // 5 microseconds
        for kind in G2Kind::PAIR_KINDS {
            let c = g2_closed_paper(kind, &rates, &grid).unwrap();
            assert!(c.values[0].is_finite());
            assert_relative_eq!(c.values[0], 1.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn unequal_pumps_rejected() {
        let rates = RateSet::new(1.0, 1.0, 0.5, 0.6).unwrap();
        assert!(matches!(
            g2_closed_paper(G2Kind::XThenXx, &rates, &[0.0]),
            Err(Error::InvalidParameter(_))
        ));
    }
}
