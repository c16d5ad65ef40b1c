//! Coincidence histograms, g² normalization, pulsed peak areas, model fits
//! and the twin-fraction / twin-photon-rate arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mc::TimeTag;
use crate::model::{convolve_irf, g2_composites, G2Curve, G2Kind, InstrumentResponse, RateSet};
use crate::numerics::{least_squares, FitOptions, FitProblem};

/// Binned coincidence counts over tau in [-window, +window], with the
/// acquisition metadata needed to normalize to g².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ps: i64,
    pub window_ps: i64,
    /// Odd number of bins, centered on tau = 0.
    pub counts: Vec<u64>,
    pub rate_a_hz: f64,
    pub rate_b_hz: f64,
    pub total_time_s: f64,
}

impl CoincidenceHistogram {
    pub fn n_half(&self) -> i64 {
        self.window_ps / self.bin_width_ps
    }

    pub fn n_bins(&self) -> usize {
        (2 * self.n_half() + 1) as usize
    }

    /// Center of bin `idx` in ps.
    pub fn tau_ps(&self, idx: usize) -> i64 {
        (idx as i64 - self.n_half()) * self.bin_width_ps
    }

    pub fn bin_centers_ps(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|i| self.tau_ps(i) as f64)
            .collect()
    }

    /// Divisor turning counts into g²: r_a r_b T Δτ.
    pub fn g2_normalization(&self) -> f64 {
        self.rate_a_hz * self.rate_b_hz * self.total_time_s * (self.bin_width_ps as f64 * 1e-12)
    }
}

/// Full cross-correlation of two sorted tag streams: every pair within the
/// window increments the bin of tau = t_b - t_a.
///
/// Rates and total time are measured from the streams themselves; override
/// the public fields afterwards if calibrated values are available. For an
/// auto-correlation, pass the two detector streams of the HBT setup.
pub fn correlate(
    tags_a: &[TimeTag],
    tags_b: &[TimeTag],
    bin_width_ps: i64,
    window_ps: i64,
) -> Result<CoincidenceHistogram> {
    if bin_width_ps < 1 {
        return Err(invalid(format!("bin width {bin_width_ps} ps must be >= 1")));
    }
    if window_ps < bin_width_ps {
        return Err(invalid(format!(
            "window {window_ps} ps must cover at least one bin"
        )));
    }
    for (name, tags) in [("a", tags_a), ("b", tags_b)] {
        if tags.windows(2).any(|w| w[1].time_ps < w[0].time_ps) {
            return Err(Error::Precondition(format!(
                "tag stream {name} is not sorted"
            )));
        }
    }
    let n_half = window_ps / bin_width_ps;
    let mut counts = vec![0u64; (2 * n_half + 1) as usize];
    let reach = n_half * bin_width_ps + bin_width_ps / 2;

    let times_b: Vec<i64> = tags_b.iter().map(|t| t.time_ps).collect();
    let mut lo = 0usize;
    for a in tags_a {
        let t_a = a.time_ps;
        while lo < times_b.len() && times_b[lo] < t_a - reach {
            lo += 1;
        }
        for &t_b in &times_b[lo..] {
            if t_b > t_a + reach {
                break;
            }
            let k = (t_b - t_a + bin_width_ps / 2).div_euclid(bin_width_ps);
            if k.abs() <= n_half {
                counts[(k + n_half) as usize] += 1;
            }
        }
    }

    let span_ps = || -> i64 {
        let first = tags_a
            .first()
            .map(|t| t.time_ps)
            .into_iter()
            .chain(tags_b.first().map(|t| t.time_ps))
            .min();
        let last = tags_a
            .last()
            .map(|t| t.time_ps)
            .into_iter()
            .chain(tags_b.last().map(|t| t.time_ps))
            .max();
        match (first, last) {
            (Some(f), Some(l)) => (l - f).max(0),
            _ => 0,
        }
    };
    let total_time_s = span_ps() as f64 * 1e-12;
    let rate = |n: usize| {
        if total_time_s > 0.0 {
            n as f64 / total_time_s
        } else {
            0.0
        }
    };
    Ok(CoincidenceHistogram {
        bin_width_ps,
        window_ps,
        counts,
        rate_a_hz: rate(tags_a.len()),
        rate_b_hz: rate(tags_b.len()),
        total_time_s,
    })
}

/// Normalize a CW histogram to g²(tau) = counts / (r_a r_b T Δτ).
pub fn normalize_cw(hist: &CoincidenceHistogram, kind: G2Kind) -> Result<G2Curve> {
    let norm = hist.g2_normalization();
    if !(norm > 0.0) {
        return Err(Error::DivideByZero(format!(
            "histogram normalization r_a r_b T Δτ = {norm}"
        )));
    }
    Ok(G2Curve {
        kind,
        tau_ps: hist.bin_centers_ps(),
        values: hist.counts.iter().map(|&c| c as f64 / norm).collect(),
    })
}

/// Integrated areas of the pulsed correlation peaks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakAreas {
    /// Zero-delay peak area.
    pub a0: f64,
    /// Mean area of the side peaks 1 <= |k| <= k_range.
    pub a_side_mean: f64,
    /// a0 / a_side_mean.
    pub ratio: f64,
    /// Poisson standard error of `ratio`.
    pub ratio_sigma: f64,
    /// (k, area) for every integrated peak.
    pub per_peak: Vec<(i64, f64)>,
}

/// Integrate counts in windows of one repetition period centered at every
/// k tau_rep for |k| <= k_range; the bunching value is A0 over the side mean.
pub fn peak_areas(
    hist: &CoincidenceHistogram,
    rep_rate_hz: f64,
    k_range: u32,
) -> Result<PeakAreas> {
    if !(rep_rate_hz > 0.0) || k_range == 0 {
        return Err(invalid(format!(
            "need rep rate > 0 (got {rep_rate_hz}) and k_range >= 1 (got {k_range})"
        )));
    }
    let period_ps = 1e12 / rep_rate_hz;
    if period_ps < 2.0 * hist.bin_width_ps as f64 {
        return Err(invalid(format!(
            "repetition period {period_ps} ps is narrower than two bins; peaks overlap"
        )));
    }
    let needed = (k_range as f64 + 0.5) * period_ps;
    if (hist.window_ps as f64) < needed {
        return Err(invalid(format!(
            "window {} ps does not cover k_range = {k_range} periods ({needed} ps)",
            hist.window_ps
        )));
    }
    let mut areas: std::collections::BTreeMap<i64, f64> = std::collections::BTreeMap::new();
    for (i, &c) in hist.counts.iter().enumerate() {
        let center = hist.tau_ps(i) as f64;
        let k = (center / period_ps).round() as i64;
        if k.unsigned_abs() <= k_range as u64 {
            *areas.entry(k).or_insert(0.0) += c as f64;
        }
    }
    let a0 = areas.get(&0).copied().unwrap_or(0.0);
    let side_total: f64 = areas.iter().filter(|(k, _)| **k != 0).map(|(_, a)| a).sum();
    let n_side = areas.keys().filter(|k| **k != 0).count();
    if n_side == 0 {
        return Err(Error::InsufficientData("no side peaks in window".into()));
    }
    let a_side_mean = side_total / n_side as f64;
    if a_side_mean <= 0.0 || a0 < 0.0 {
        return Err(Error::InsufficientData(
            "side peaks contain no counts".into(),
        ));
    }
    let ratio = a0 / a_side_mean;
    let ratio_sigma = if a0 > 0.0 {
        ratio * (1.0 / a0 + 1.0 / side_total).sqrt()
    } else {
        1.0 / a_side_mean
    };
    Ok(PeakAreas {
        a0,
        a_side_mean,
        ratio,
        ratio_sigma,
        per_peak: areas.into_iter().collect(),
    })
}

/// Configuration of a g² model fit.
#[derive(Debug, Clone)]
pub struct G2FitConfig {
    /// `Cross` or `AutoComposite`.
    pub kind: G2Kind,
    pub irf: InstrumentResponse,
    pub init: RateSet,
    pub options: FitOptions,
}

impl G2FitConfig {
    pub fn new(kind: G2Kind, irf: InstrumentResponse, init: RateSet) -> Result<Self> {
        if !matches!(kind, G2Kind::Cross | G2Kind::AutoComposite) {
            return Err(invalid(format!(
                "fit kind must be cross or auto, got {kind}"
            )));
        }
        if init.equal_pump().is_none() {
            return Err(invalid(
                "g2 fits use the equal-pump model; initial rates must have pump_x = pump_b"
                    .to_string(),
            ));
        }
        Ok(Self {
            kind,
            irf,
            init,
            options: FitOptions::default(),
        })
    }
}

/// Result of fitting the IRF-convolved model to a measured curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct G2FitReport {
    pub rates: RateSet,
    /// 1-sigma uncertainties of (pump, gamma_b, gamma_x).
    pub rate_sigmas: [f64; 3],
    /// Unconvolved model value at tau = 0: the deconvolved bunching value.
    pub g_fit_0: f64,
    pub g_fit_0_sigma: f64,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn model_g0(kind: G2Kind, pump: f64, gamma_b: f64, gamma_x: f64) -> f64 {
    let n = gamma_x * gamma_b + 2.0 * pump * gamma_b + pump * pump;
    let cross0 = n / (pump * gamma_b);
    match kind {
        G2Kind::AutoComposite => 0.25 * cross0,
        _ => cross0,
    }
}

/// Least-squares fit of the IRF-convolved composite model to a measured
/// curve over the free rates (P, gamma_b, gamma_x); the background level is
/// pinned to the model's tau -> infinity value of 1.
///
/// Deconvolution is done by forward-convolving the model, never by dividing
/// spectra. `weights`, when given, multiply each residual; pass the Poisson
/// weights norm/sqrt(max(counts, 1)) for a counting histogram (see
/// [`fit_g2_histogram`], which also bin-averages the model exactly).
pub fn fit_g2(
    curve: &G2Curve,
    weights: Option<&[f64]>,
    config: &G2FitConfig,
) -> Result<G2FitReport> {
    let spacing = curve
        .uniform_spacing_ps()
        .ok_or_else(|| Error::Precondition("fit requires a uniform tau grid".into()))?;
    // Extend the evaluation grid so convolution at the data edges sees real
    // model values rather than padding.
    let pad = (5.0 * config.irf.sigma_ps() / spacing).ceil() as usize + 1;
    let first = curve.tau_ps[0];
    let n_ext = curve.len() + 2 * pad;
    let ext_grid: Vec<f64> = (0..n_ext)
        .map(|i| first + (i as f64 - pad as f64) * spacing)
        .collect();

    let kind = config.kind;
    let irf = config.irf;
    let model = move |rates: &RateSet| -> Result<Vec<f64>> {
        let (cross, auto) = g2_composites(rates, &ext_grid)?;
        let picked = match kind {
            G2Kind::AutoComposite => auto,
            _ => cross,
        };
        let smeared = convolve_irf(&picked, &irf)?;
        Ok(smeared.values[pad..smeared.values.len() - pad].to_vec())
    };
    fit_g2_core(&curve.values, weights, model, config)
}

fn fit_g2_core(
    data: &[f64],
    weights: Option<&[f64]>,
    model: impl Fn(&RateSet) -> Result<Vec<f64>>,
    config: &G2FitConfig,
) -> Result<G2FitReport> {
    if let Some(w) = weights {
        if w.len() != data.len() {
            return Err(invalid(format!(
                "{} weights for {} samples",
                w.len(),
                data.len()
            )));
        }
    }
    let residual = |params: &[f64], out: &mut [f64]| -> Result<()> {
        let rates = RateSet::with_equal_pump(params[1], params[2], params[0])?;
        let values = model(&rates)?;
        for (i, o) in out.iter_mut().enumerate() {
            *o = values[i] - data[i];
        }
        Ok(())
    };

    let kind = config.kind;
    let p0 = config.init.equal_pump().expect("validated equal pump");
    let outcome = least_squares(FitProblem {
        residual,
        n_residuals: data.len(),
        initial: vec![p0, config.init.gamma_b, config.init.gamma_x],
        lower: Some(vec![1e-6; 3]),
        upper: Some(vec![1e4; 3]),
        weights,
        options: FitOptions {
            max_iterations: config.options.max_iterations,
            tolerance: config.options.tolerance,
        },
    })?;

    let [pump, gamma_b, gamma_x] = [outcome.params[0], outcome.params[1], outcome.params[2]];
    let rates = RateSet::with_equal_pump(gamma_b, gamma_x, pump)?;
    let g_fit_0 = model_g0(kind, pump, gamma_b, gamma_x);
    // Delta method for the uncertainty of the zero-delay model value.
    let mut grad = [0.0f64; 3];
    for (j, g) in grad.iter_mut().enumerate() {
        let mut hi = [pump, gamma_b, gamma_x];
        let mut lo = hi;
        let h = 1e-6 * hi[j].abs().max(1e-6);
        hi[j] += h;
        lo[j] -= h;
        *g =
            (model_g0(kind, hi[0], hi[1], hi[2]) - model_g0(kind, lo[0], lo[1], lo[2])) / (2.0 * h);
    }
    let mut var = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            var += grad[i] * outcome.covariance[(i, j)] * grad[j];
        }
    }
    Ok(G2FitReport {
        rates,
        rate_sigmas: [
            outcome.covariance[(0, 0)].max(0.0).sqrt(),
            outcome.covariance[(1, 1)].max(0.0).sqrt(),
            outcome.covariance[(2, 2)].max(0.0).sqrt(),
        ],
        g_fit_0,
        g_fit_0_sigma: var.max(0.0).sqrt(),
        residual_norm: outcome.residual_norm,
        iterations: outcome.iterations,
    })
}

/// Fit a counting histogram: normalizes to g², applies Poisson weights with
/// the variance floor max(counts, 1), and evaluates the model bin-averaged
/// over each bin's integer delay coverage (see
/// [`crate::model::binned_composite_model`]).
pub fn fit_g2_histogram(hist: &CoincidenceHistogram, config: &G2FitConfig) -> Result<G2FitReport> {
    let curve = normalize_cw(hist, config.kind)?;
    let norm = hist.g2_normalization();
    let weights: Vec<f64> = hist
        .counts
        .iter()
        .map(|&c| norm / (c.max(1) as f64).sqrt())
        .collect();
    let (kind, irf) = (config.kind, config.irf);
    let (bin, n_half) = (hist.bin_width_ps, hist.n_half());
    let model = move |rates: &RateSet| -> Result<Vec<f64>> {
        crate::model::binned_composite_model(rates, kind, &irf, bin, n_half)
    };
    fit_g2_core(&curve.values, Some(&weights), model, config)
}

/// Twin fraction alpha = g²_auto(0) / g²_cross(0).
pub fn alpha_ratio(g_auto_0: f64, g_cross_0: f64) -> Result<f64> {
    if !(g_auto_0 > 0.0) || !(g_cross_0 > 0.0) {
        return Err(invalid(format!(
            "bunching values must be positive (auto = {g_auto_0}, cross = {g_cross_0})"
        )));
    }
    Ok(g_auto_0 / g_cross_0)
}

/// Twin-photon budget deduced from CW count rates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TwinBudget {
    pub alpha: f64,
    /// Fraction of detection events that are twins once the non-twin
    /// correlations are counted back as two single photons: alpha/(2-alpha).
    pub twin_detect_fraction: f64,
    /// Twin-photon rate into the first lens.
    pub tpr_hz: f64,
}

/// TPR = n_SPCM/(eps·eta) · alpha/(2-alpha) · eta², the quadratic eta
/// accounting for the pair leaving through the same lens.
pub fn twin_rate_cw(
    n_spcm_hz: f64,
    eps_setup: f64,
    eta_lens: f64,
    alpha: f64,
) -> Result<TwinBudget> {
    if !(n_spcm_hz > 0.0) {
        return Err(invalid(format!("count rate {n_spcm_hz} must be > 0")));
    }
    for (name, v) in [("eps", eps_setup), ("eta", eta_lens)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(invalid(format!("{name} = {v} outside (0, 1]")));
        }
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("alpha = {alpha} outside [0, 1]")));
    }
    let twin_detect_fraction = alpha / (2.0 - alpha);
    Ok(TwinBudget {
        alpha,
        twin_detect_fraction,
        tpr_hz: n_spcm_hz / (eps_setup * eta_lens) * twin_detect_fraction * eta_lens * eta_lens,
    })
}

/// Triggered twin rate TPR = f · p_twin · eta².
pub fn twin_rate_pulsed(rep_rate_hz: f64, p_twin: f64, eta_lens: f64) -> Result<f64> {
    if !(rep_rate_hz > 0.0) {
        return Err(invalid(format!(
            "repetition rate {rep_rate_hz} must be > 0"
        )));
    }
    if !(0.0..=1.0).contains(&p_twin) {
        return Err(invalid(format!("p_twin = {p_twin} outside [0, 1]")));
    }
    if !(eta_lens > 0.0 && eta_lens <= 1.0) {
        return Err(invalid(format!("eta = {eta_lens} outside (0, 1]")));
    }
    Ok(rep_rate_hz * p_twin * eta_lens * eta_lens)
}
