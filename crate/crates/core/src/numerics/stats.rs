//! Chi-square goodness-of-fit against a fully specified model.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of observed counts against expected counts, with
/// Poisson variance. Bins with expected count below `min_expected` are pooled
/// into their neighbour to keep the statistic well behaved.
pub fn chi_square_test(
    observed: &[f64],
    expected: &[f64],
    min_expected: f64,
) -> Result<ChiSquareReport> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::InvalidParameter(
            "observed/expected length mismatch".into(),
        ));
    }
    let mut statistic = 0.0;
    let mut dof = 0usize;
    let mut pool_obs = 0.0;
    let mut pool_exp = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        if e < 0.0 || !e.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "expected count {e} invalid"
            )));
        }
        pool_obs += o;
        pool_exp += e;
        if pool_exp >= min_expected {
            let d = pool_obs - pool_exp;
            statistic += d * d / pool_exp;
            dof += 1;
            pool_obs = 0.0;
            pool_exp = 0.0;
        }
    }
    if pool_exp > 0.0 {
        let d = pool_obs - pool_exp;
        statistic += d * d / pool_exp;
        dof += 1;
    }
    if dof == 0 {
        return Err(Error::InsufficientData("no usable bins".into()));
    }
    let dist = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidParameter(format!("chi-square dof: {e}")))?;
    Ok(ChiSquareReport {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_agreement_has_p_one() {
        let e = vec![50.0; 100];
        let r = chi_square_test(&e, &e, 5.0).unwrap();
        assert_eq!(r.dof, 100);
        assert!(r.statistic < 1e-12);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn gross_mismatch_has_tiny_p() {
        let o = vec![100.0; 50];
        let e = vec![50.0; 50];
        let r = chi_square_test(&o, &e, 5.0).unwrap();
        assert!(r.p_value < 1e-12);
    }

    #[test]
    fn low_count_bins_are_pooled() {
        let o = vec![1.0, 0.0, 2.0, 1.0, 50.0];
        let e = vec![1.0, 1.0, 1.0, 1.0, 50.0];
        let r = chi_square_test(&o, &e, 4.0).unwrap();
        assert_eq!(r.dof, 2);
    }
}
