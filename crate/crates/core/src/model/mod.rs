//! Four-level rate-equation model of the biexciton-exciton cascade.
//!
//! The dot is modeled as ground |G>, two bright excitons |H>, |V> and the
//! biexciton |B>. Pumping promotes G->H, G->V (rate `pump_x` each) and
//! H->B, V->B (rate `pump_b` each); decay emits a biexciton photon on B->H,
//! B->V (rate `gamma_b` per channel) and an exciton photon on H->G, V->G
//! (rate `gamma_x`). All second-order correlations are produced by the
//! regression construction: collapse to the post-detection state, propagate
//! with the same generator, read the stop-transition population, normalize by
//! steady-state populations.
//!
//! The pump term in the exciton equations is implemented as -pump_b * rho_HH
//! (and -pump_b * rho_VV): the variant with the biexciton occupation in that
//! slot conserves no probability and has no stationary state, while this form
//! reproduces the stationary values rho_BB = P^2/N and rho_HH = P Gamma_B / N
//! used to normalize every correlation function.

mod closed_form;

pub use closed_form::{g2_closed_paper, ClosedFormConstants};

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{matrix_exponential_action, stochastic_propagator};

/// State indices in occupation vectors and the generator: [G, H, V, B].
pub(crate) const IDX_G: usize = 0;
pub(crate) const IDX_H: usize = 1;
pub(crate) const IDX_V: usize = 2;
pub(crate) const IDX_B: usize = 3;

/// Default model tau-grid spacing, matching the 4 ps correlator time bin.
pub const DEFAULT_GRID_SPACING_PS: f64 = 4.0;

/// The four model rates, in 1/ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    /// Biexciton decay rate per polarization channel.
    pub gamma_b: f64,
    /// Exciton decay rate.
    pub gamma_x: f64,
    /// Pump rate exciton -> biexciton.
    pub pump_b: f64,
    /// Pump rate ground -> exciton, per polarization.
    pub pump_x: f64,
}

impl RateSet {
    /// Decay rates must be strictly positive; pump rates may be zero (an
    /// unpumped dot is a valid simulation input) but not negative.
    pub fn new(gamma_b: f64, gamma_x: f64, pump_b: f64, pump_x: f64) -> Result<Self> {
        for (name, v) in [
            ("gamma_b", gamma_b),
            ("gamma_x", gamma_x),
            ("pump_b", pump_b),
            ("pump_x", pump_x),
        ] {
            if !v.is_finite() {
                return Err(invalid(format!("rate {name} = {v} is not finite")));
            }
        }
        if gamma_b <= 0.0 || gamma_x <= 0.0 {
            return Err(invalid(format!(
                "decay rates must be strictly positive (gamma_b = {gamma_b}, gamma_x = {gamma_x})"
            )));
        }
        if pump_b < 0.0 || pump_x < 0.0 {
            return Err(invalid(format!(
                "pump rates must be non-negative (pump_b = {pump_b}, pump_x = {pump_x})"
            )));
        }
        Ok(Self {
            gamma_b,
            gamma_x,
            pump_b,
            pump_x,
        })
    }

    pub fn with_equal_pump(gamma_b: f64, gamma_x: f64, pump: f64) -> Result<Self> {
        Self::new(gamma_b, gamma_x, pump, pump)
    }

    /// The common pump rate P when `pump_x == pump_b`, as required by the
    /// printed closed forms.
    pub fn equal_pump(&self) -> Option<f64> {
        (self.pump_b == self.pump_x).then_some(self.pump_b)
    }

    /// Column-stochastic generator of the occupation dynamics.
    pub fn generator(&self) -> Matrix4<f64> {
        let (gb, gx, pb, px) = (self.gamma_b, self.gamma_x, self.pump_b, self.pump_x);
        Matrix4::new(
            -2.0 * px,
            gx,
            gx,
            0.0,
            //
            px,
            -(gx + pb),
            0.0,
            gb,
            //
            px,
            0.0,
            -(gx + pb),
            gb,
            //
            0.0,
            pb,
            pb,
            -2.0 * gb,
        )
    }

    pub fn min_rate(&self) -> f64 {
        let mut m = self.gamma_b.min(self.gamma_x);
        for p in [self.pump_b, self.pump_x] {
            if p > 0.0 {
                m = m.min(p);
            }
        }
        m
    }

    /// Constants of the printed closed-form correlation expressions
    /// (equal pumps only).
    pub fn closed_form_constants(&self) -> Result<ClosedFormConstants> {
        ClosedFormConstants::from_rates(self)
    }
}

/// State-occupation probabilities of the four levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupations {
    pub ground: f64,
    pub exciton_h: f64,
    pub exciton_v: f64,
    pub biexciton: f64,
}

impl Occupations {
    pub fn new(ground: f64, exciton_h: f64, exciton_v: f64, biexciton: f64) -> Result<Self> {
        let occ = Self {
            ground,
            exciton_h,
            exciton_v,
            biexciton,
        };
        occ.validate()?;
        Ok(occ)
    }

    pub fn pure_ground() -> Self {
        Self {
            ground: 1.0,
            exciton_h: 0.0,
            exciton_v: 0.0,
            biexciton: 0.0,
        }
    }

    pub fn pure_exciton_h() -> Self {
        Self {
            ground: 0.0,
            exciton_h: 1.0,
            exciton_v: 0.0,
            biexciton: 0.0,
        }
    }

    pub fn sum(&self) -> f64 {
        self.ground + self.exciton_h + self.exciton_v + self.biexciton
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.ground, self.exciton_h, self.exciton_v, self.biexciton)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self {
            ground: v[IDX_G],
            exciton_h: v[IDX_H],
            exciton_v: v[IDX_V],
            biexciton: v[IDX_B],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("ground", self.ground),
            ("exciton_h", self.exciton_h),
            ("exciton_v", self.exciton_v),
            ("biexciton", self.biexciton),
        ] {
            if !(-1e-9..=1.0 + 1e-9).contains(&p) {
                return Err(invalid(format!("occupation {name} = {p} outside [0, 1]")));
            }
        }
        if (self.sum() - 1.0).abs() > 1e-7 {
            return Err(invalid(format!(
                "occupations sum to {}, not normalized",
                self.sum()
            )));
        }
        Ok(())
    }
}

/// Which second-order correlation a curve represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum G2Kind {
    /// Biexciton photon starts, exciton photon stops ("XX-X").
    XxThenX,
    /// Exciton photon starts, biexciton photon stops ("X-XX").
    XThenXx,
    /// Exciton auto-correlation ("X-X").
    XThenX,
    /// Biexciton auto-correlation ("XX-XX").
    XxThenXx,
    /// Equal-weight composite of all four, both delay signs ("auto-composite").
    AutoComposite,
    /// XX-X for positive delay, X-XX mirrored to negative delay ("cross").
    Cross,
}

impl G2Kind {
    pub const PAIR_KINDS: [G2Kind; 4] = [
        G2Kind::XxThenX,
        G2Kind::XThenXx,
        G2Kind::XThenX,
        G2Kind::XxThenXx,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            G2Kind::XxThenX => "XX-X",
            G2Kind::XThenXx => "X-XX",
            G2Kind::XThenX => "X-X",
            G2Kind::XxThenXx => "XX-XX",
            G2Kind::AutoComposite => "auto-composite",
            G2Kind::Cross => "cross",
        }
    }

    pub fn parse(token: &str) -> Result<Self> {
        match token {
            "XX-X" | "xx-x" => Ok(G2Kind::XxThenX),
            "X-XX" | "x-xx" => Ok(G2Kind::XThenXx),
            "X-X" | "x-x" => Ok(G2Kind::XThenX),
            "XX-XX" | "xx-xx" => Ok(G2Kind::XxThenXx),
            "auto-composite" | "auto" => Ok(G2Kind::AutoComposite),
            "cross" => Ok(G2Kind::Cross),
            other => Err(invalid(format!("unknown g2 kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for G2Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A model or measured correlation function on a delay grid in picoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Curve {
    pub kind: G2Kind,
    pub tau_ps: Vec<f64>,
    pub values: Vec<f64>,
}

impl G2Curve {
    pub fn len(&self) -> usize {
        self.tau_ps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_ps.is_empty()
    }

    /// Grid spacing if the grid is uniform (within a relative 1e-6).
    pub fn uniform_spacing_ps(&self) -> Option<f64> {
        uniform_spacing(&self.tau_ps)
    }

    /// Symmetric grid -window..window with the given spacing, centered on 0.
    pub fn symmetric_grid(window_ps: f64, spacing_ps: f64) -> Vec<f64> {
        let n = (window_ps / spacing_ps).floor() as i64;
        (-n..=n).map(|k| k as f64 * spacing_ps).collect()
    }
}

/// Gaussian timing-response kernel, parameterized by its FWHM in ps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstrumentResponse {
    pub fwhm_ps: f64,
}

impl InstrumentResponse {
    pub fn new(fwhm_ps: f64) -> Result<Self> {
        if !(fwhm_ps > 0.0) || !fwhm_ps.is_finite() {
            return Err(invalid(format!("IRF fwhm {fwhm_ps} must be > 0")));
        }
        Ok(Self { fwhm_ps })
    }

    pub fn sigma_ps(&self) -> f64 {
        self.fwhm_ps / (8.0 * std::f64::consts::LN_2).sqrt()
    }
}

fn uniform_spacing(taus: &[f64]) -> Option<f64> {
    if taus.len() < 2 {
        return None;
    }
    let d = taus[1] - taus[0];
    if d <= 0.0 {
        return None;
    }
    for w in taus.windows(2) {
        if ((w[1] - w[0]) - d).abs() > 1e-6 * d {
            return None;
        }
    }
    Some(d)
}

/// Unique fixed point of the rate equations.
///
/// With equal pumps the stationary occupations are evaluated in closed form
/// (rho_BB = P²/N, rho_HH = rho_VV = P·Gamma_B/N with
/// N = Gamma_X·Gamma_B + 2P·Gamma_B + P²); unequal pumps are solved
/// numerically.
pub fn steady_state(rates: &RateSet) -> Result<Occupations> {
    if let Some(p) = rates.equal_pump() {
        let (gb, gx) = (rates.gamma_b, rates.gamma_x);
        let n = gx * gb + 2.0 * p * gb + p * p;
        return Ok(Occupations {
            ground: gx * gb / n,
            exciton_h: p * gb / n,
            exciton_v: p * gb / n,
            biexciton: p * p / n,
        });
    }
    // Replace the (linearly dependent) biexciton row with normalization.
    let mut a = rates.generator();
    for col in 0..4 {
        a[(IDX_B, col)] = 1.0;
    }
    let b = Vector4::new(0.0, 0.0, 0.0, 1.0);
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| invalid("singular rate system, no unique steady state".to_string()))?;
    Ok(Occupations::from_vector(&sol))
}

/// Occupations after propagating `init` for `tau_ns` under the rate equations.
pub fn evolve(rates: &RateSet, init: &Occupations, tau_ns: f64) -> Result<Occupations> {
    init.validate()?;
    if !tau_ns.is_finite() || tau_ns < 0.0 {
        return Err(invalid(format!("tau = {tau_ns} ns must be >= 0")));
    }
    let v = matrix_exponential_action(&rates.generator(), &init.as_vector(), tau_ns)?;
    Ok(Occupations::from_vector(&v))
}

/// Propagate an initial vector to every delay in `taus_ns` (sorted ascending).
///
/// Steps incrementally from point to point with one propagator per distinct
/// gap size; uniform and near-uniform grids therefore cost a couple of matrix
/// exponentials plus one 4x4 matrix-vector product per point.
fn occupations_on_grid(
    rates: &RateSet,
    init: &Vector4<f64>,
    taus_ns: &[f64],
) -> Result<Vec<Vector4<f64>>> {
    let generator = rates.generator();
    if taus_ns.is_empty() {
        return Ok(Vec::new());
    }
    let mut propagators: std::collections::HashMap<u64, Matrix4<f64>> =
        std::collections::HashMap::new();
    let mut out = Vec::with_capacity(taus_ns.len());
    let mut v = matrix_exponential_action(&generator, init, taus_ns[0])?;
    out.push(v);
    for w in taus_ns.windows(2) {
        let gap = w[1] - w[0];
        let propagator = match propagators.get(&gap.to_bits()) {
            Some(p) => *p,
            None => {
                let p = stochastic_propagator(&generator, gap)?;
                propagators.insert(gap.to_bits(), p);
                p
            }
        };
        v = propagator * v;
        out.push(v);
    }
    Ok(out)
}

fn pair_kind_indices(kind: G2Kind) -> Result<(usize, usize)> {
    // (post-detection collapse state, stop-transition population)
    match kind {
        G2Kind::XxThenX => Ok((IDX_H, IDX_H)),
        G2Kind::XThenXx => Ok((IDX_G, IDX_B)),
        G2Kind::XThenX => Ok((IDX_G, IDX_H)),
        G2Kind::XxThenXx => Ok((IDX_H, IDX_B)),
        other => Err(invalid(format!(
            "g2 kind {other} is a composite, not a start-stop pair"
        ))),
    }
}

fn check_grid(tau_ps: &[f64], allow_negative: bool) -> Result<()> {
    for &t in tau_ps {
        if !t.is_finite() {
            return Err(invalid(format!("tau grid contains non-finite value {t}")));
        }
        if !allow_negative && t < 0.0 {
            return Err(invalid(format!("tau grid value {t} ps must be >= 0")));
        }
    }
    if tau_ps.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("tau grid must be sorted ascending".to_string()));
    }
    Ok(())
}

fn normalization(rates: &RateSet) -> Result<(Occupations, f64, f64)> {
    let ss = steady_state(rates)?;
    if ss.exciton_h <= 0.0 || ss.biexciton <= 0.0 {
        return Err(invalid(
            "correlations undefined: steady-state photon flux is zero (no pumping)".to_string(),
        ));
    }
    Ok((ss, ss.exciton_h, ss.biexciton))
}

/// Second-order correlation of one start-stop pair by the regression
/// construction. This is the normative model curve generator; the printed
/// closed forms in [`g2_closed_paper`] are kept for cross-checks.
pub fn g2_numeric(kind: G2Kind, rates: &RateSet, tau_ps: &[f64]) -> Result<G2Curve> {
    let (start_idx, stop_idx) = pair_kind_indices(kind)?;
    check_grid(tau_ps, false)?;
    let (ss, _, _) = normalization(rates)?;
    let ss_vec = ss.as_vector();
    let mut init = Vector4::zeros();
    init[start_idx] = 1.0;
    let taus_ns: Vec<f64> = tau_ps.iter().map(|t| t / 1000.0).collect();
    let occ = occupations_on_grid(rates, &init, &taus_ns)?;
    let norm = ss_vec[stop_idx];
    let values = occ.iter().map(|v| (v[stop_idx] / norm).max(0.0)).collect();
    Ok(G2Curve {
        kind,
        tau_ps: tau_ps.to_vec(),
        values,
    })
}

/// The cross and auto composites on a signed delay grid.
///
/// cross(tau) is XX-X for tau >= 0 and X-XX at |tau| for tau < 0. The auto
/// composite is the equal-weight sum of all four pair correlations at |tau|;
/// with equal weights the twin fraction auto(0)/cross(0) is exactly 1/4.
pub fn g2_composites(rates: &RateSet, tau_ps: &[f64]) -> Result<(G2Curve, G2Curve)> {
    check_grid(tau_ps, true)?;
    let (ss, norm_h, norm_b) = normalization(rates)?;
    let _ = ss;
    // Evaluate both initial conditions once on the sorted set of |tau|.
    let mut abs_ns: Vec<f64> = tau_ps.iter().map(|t| t.abs() / 1000.0).collect();
    abs_ns.sort_by(f64::total_cmp);
    abs_ns.dedup();
    let from_h = occupations_on_grid(
        rates,
        &Vector4::from_fn(|i, _| f64::from(u8::from(i == IDX_H))),
        &abs_ns,
    )?;
    let from_g = occupations_on_grid(
        rates,
        &Vector4::from_fn(|i, _| f64::from(u8::from(i == IDX_G))),
        &abs_ns,
    )?;

    let index_of = |t_ns: f64| abs_ns.partition_point(|&x| x < t_ns);

    let mut cross = Vec::with_capacity(tau_ps.len());
    let mut auto = Vec::with_capacity(tau_ps.len());
    for &t in tau_ps {
        let k = index_of(t.abs() / 1000.0);
        let (vh, vg) = (&from_h[k], &from_g[k]);
        let xx_x = (vh[IDX_H] / norm_h).max(0.0);
        let x_xx = (vg[IDX_B] / norm_b).max(0.0);
        let x_x = (vg[IDX_H] / norm_h).max(0.0);
        let xx_xx = (vh[IDX_B] / norm_b).max(0.0);
        cross.push(if t >= 0.0 { xx_x } else { x_xx });
        auto.push(0.25 * (xx_x + x_xx + x_x + xx_xx));
    }
    Ok((
        G2Curve {
            kind: G2Kind::Cross,
            tau_ps: tau_ps.to_vec(),
            values: cross,
        },
        G2Curve {
            kind: G2Kind::AutoComposite,
            tau_ps: tau_ps.to_vec(),
            values: auto,
        },
    ))
}

/// Convolve a curve with the Gaussian instrument response.
///
/// The kernel is sampled on the curve's grid, truncated at ±5 sigma and
/// normalized to unit mass; the curve is extended by edge replication, so
/// flat tails pass through unchanged.
pub fn convolve_irf(curve: &G2Curve, irf: &InstrumentResponse) -> Result<G2Curve> {
    let spacing = curve.uniform_spacing_ps().ok_or_else(|| {
        Error::Precondition("convolution requires a uniform tau grid with >= 2 points".into())
    })?;
    let sigma = irf.sigma_ps();
    let half_width = (5.0 * sigma / spacing).floor() as i64;
    if half_width == 0 {
        // Kernel support below one sample: delta-kernel regime.
        return Ok(curve.clone());
    }
    if spacing > irf.fwhm_ps / 10.0 {
        return Err(Error::Resolution(format!(
            "grid spacing {spacing} ps exceeds fwhm/10 = {} ps",
            irf.fwhm_ps / 10.0
        )));
    }
    let mut kernel: Vec<f64> = (-half_width..=half_width)
        .map(|j| {
            let x = j as f64 * spacing;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let mass: f64 = kernel.iter().sum();
    for w in &mut kernel {
        *w /= mass;
    }
    let n = curve.values.len() as i64;
    let at = |i: i64| curve.values[i.clamp(0, n - 1) as usize];
    let values = (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| w * at(i + j as i64 - half_width))
                .sum()
        })
        .collect();
    Ok(G2Curve {
        kind: curve.kind,
        tau_ps: curve.tau_ps.clone(),
        values,
    })
}

/// Expected g² per correlator bin for integer-picosecond tag streams.
///
/// Bins of width w at centers k·w collect integer delays [k·w - w/2,
/// k·w + w/2 - 1] (even w; odd widths are symmetric). Away from zero delay
/// the composite is smooth and one sample at the bin's true mean suffices;
/// near zero the cross composite jumps, and a coarse-grid convolution
/// misplaces that discontinuity by up to half a bin. Bins within kernel
/// reach of zero are therefore computed at full integer resolution: evaluate
/// the composite on the 1 ps grid (with the midpoint value at exactly zero),
/// convolve, and average over each bin's integer coverage.
pub fn binned_composite_model(
    rates: &RateSet,
    kind: G2Kind,
    irf: &InstrumentResponse,
    bin_width_ps: i64,
    n_half: i64,
) -> Result<Vec<f64>> {
    if !matches!(kind, G2Kind::Cross | G2Kind::AutoComposite) {
        return Err(invalid(format!(
            "binned model needs a composite kind, got {kind}"
        )));
    }
    if bin_width_ps < 1 || n_half < 0 {
        return Err(invalid(format!(
            "bad histogram geometry: bin {bin_width_ps} ps, half width {n_half}"
        )));
    }
    let pick = |curves: (G2Curve, G2Curve)| match kind {
        G2Kind::AutoComposite => curves.1,
        _ => curves.0,
    };
    let offset = if bin_width_ps % 2 == 0 { -0.5 } else { 0.0 };

    // Coarse pass on the bin-mean grid.
    let pad = (5.0 * irf.sigma_ps() / bin_width_ps as f64).ceil() as i64 + 1;
    let coarse_grid: Vec<f64> = (-(n_half + pad)..=(n_half + pad))
        .map(|k| (k * bin_width_ps) as f64 + offset)
        .collect();
    let coarse = convolve_irf(&pick(g2_composites(rates, &coarse_grid)?), irf)?;
    let mut values: Vec<f64> =
        coarse.values[pad as usize..coarse.values.len() - pad as usize].to_vec();

    // Exact pass for bins whose kernel window sees the discontinuity.
    let reach = (5.0 * irf.sigma_ps()).ceil() as i64;
    let central_bins = ((reach + bin_width_ps) / bin_width_ps + 1).min(n_half);
    let span = central_bins * bin_width_ps + bin_width_ps + reach + 1;
    let fine_grid: Vec<f64> = (-span..=span).map(|t| t as f64).collect();
    let fine = pick(g2_composites(rates, &fine_grid)?);
    let mut fine_values = fine.values;
    if kind == G2Kind::Cross {
        // An integer delay of zero straddles the jump symmetrically.
        let mid = span as usize;
        let x_xx_at_zero = g2_numeric(G2Kind::XThenXx, rates, &[0.0])?.values[0];
        fine_values[mid] = 0.5 * (fine_values[mid] + x_xx_at_zero);
    }
    let kernel: Vec<f64> = {
        let sigma = irf.sigma_ps();
        let mut k: Vec<f64> = (-reach..=reach)
            .map(|j| (-(j as f64) * (j as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let mass: f64 = k.iter().sum();
        for w in &mut k {
            *w /= mass;
        }
        k
    };
    let smeared_at = |tau: i64| -> f64 {
        kernel
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let idx = tau - (j as i64 - reach) + span;
                w * fine_values[idx.clamp(0, 2 * span) as usize]
            })
            .sum()
    };
    let (lo_int, hi_int) = if bin_width_ps % 2 == 0 {
        (-bin_width_ps / 2, bin_width_ps / 2 - 1)
    } else {
        (-(bin_width_ps - 1) / 2, (bin_width_ps - 1) / 2)
    };
    for k in -central_bins..=central_bins {
        let center = k * bin_width_ps;
        let sum: f64 = (lo_int..=hi_int).map(|d| smeared_at(center + d)).sum();
        values[(k + n_half) as usize] = sum / bin_width_ps as f64;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn canonical() -> RateSet {
        RateSet::with_equal_pump(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn steady_state_canonical_is_uniform() {
        let ss = steady_state(&canonical()).unwrap();
        for p in [ss.ground, ss.exciton_h, ss.exciton_v, ss.biexciton] {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn steady_state_low_pump() {
        let rates = RateSet::with_equal_pump(1.0, 1.0, 0.1).unwrap();
        let ss = steady_state(&rates).unwrap();
        assert_relative_eq!(ss.exciton_h, 0.1 / 1.21, max_relative = 1e-12);
        assert_relative_eq!(ss.biexciton, 0.01 / 1.21, max_relative = 1e-12);
    }

    #[test]
    fn steady_state_no_pump_is_ground() {
        let rates = RateSet::with_equal_pump(0.7, 1.3, 0.0).unwrap();
        let ss = steady_state(&rates).unwrap();
        assert_abs_diff_eq!(ss.ground, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            ss.exciton_h + ss.exciton_v + ss.biexciton,
            0.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn steady_state_unequal_pumps_is_fixed_point() {
        let rates = RateSet::new(0.9, 1.7, 0.4, 0.8).unwrap();
        let ss = steady_state(&rates).unwrap();
        assert_abs_diff_eq!(ss.sum(), 1.0, epsilon = 1e-12);
        let residual = rates.generator() * ss.as_vector();
        for i in 0..4 {
            assert_abs_diff_eq!(residual[i], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_decay() {
        assert!(RateSet::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(RateSet::new(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(RateSet::new(1.0, 1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn evolve_zero_time_is_identity() {
        let init = Occupations::new(0.3, 0.3, 0.2, 0.2).unwrap();
        let out = evolve(&canonical(), &init, 0.0).unwrap();
        assert_abs_diff_eq!(out.as_vector(), init.as_vector(), epsilon = 1e-14);
    }

    #[test]
    fn evolve_rejects_negative_time() {
        let init = Occupations::pure_ground();
        assert!(evolve(&canonical(), &init, -1.0).is_err());
    }

    #[test]
    fn exciton_sum_relaxation_law() {
        // At gamma = pump = 1 the symmetric exciton sum obeys dw/dt = 2 - 4w.
        let init = Occupations::pure_exciton_h();
        for tau in [0.0, 0.1, 0.5, 1.0, 3.0] {
            let out = evolve(&canonical(), &init, tau).unwrap();
            let w = out.exciton_h + out.exciton_v;
            assert_abs_diff_eq!(w, 0.5 + 0.5 * (-4.0 * tau).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn steady_state_is_evolve_fixed_point() {
        let rates = RateSet::new(0.8, 1.9, 0.33, 0.71).unwrap();
        let ss = steady_state(&rates).unwrap();
        let out = evolve(&rates, &ss, 7.3).unwrap();
        assert_abs_diff_eq!(out.as_vector(), ss.as_vector(), epsilon = 1e-9);
    }

    #[test]
    fn g2_numeric_canonical_closed_curves() {
        let grid: Vec<f64> = (0..=2500).map(|k| k as f64 * 4.0).collect();
        let xx_x = g2_numeric(G2Kind::XxThenX, &canonical(), &grid).unwrap();
        let x_xx = g2_numeric(G2Kind::XThenXx, &canonical(), &grid).unwrap();
        let x_x = g2_numeric(G2Kind::XThenX, &canonical(), &grid).unwrap();
        let xx_xx = g2_numeric(G2Kind::XxThenXx, &canonical(), &grid).unwrap();
        for (k, &t_ps) in grid.iter().enumerate() {
            let t = t_ps / 1000.0;
            let (e2, e4) = ((-2.0 * t).exp(), (-4.0 * t).exp());
            assert_abs_diff_eq!(xx_x.values[k], 1.0 + 2.0 * e2 + e4, epsilon = 1e-9);
            assert_abs_diff_eq!(x_xx.values[k], (1.0 - e2) * (1.0 - e2), epsilon = 1e-9);
            assert_abs_diff_eq!(x_x.values[k], 1.0 - e4, epsilon = 1e-9);
            assert_abs_diff_eq!(xx_xx.values[k], 1.0 - e4, epsilon = 1e-9);
        }
    }

    #[test]
    fn g2_numeric_rejects_composite_kind_and_negative_grid() {
        assert!(g2_numeric(G2Kind::Cross, &canonical(), &[0.0]).is_err());
        assert!(g2_numeric(G2Kind::XxThenX, &canonical(), &[-4.0, 0.0]).is_err());
    }

    #[test]
    fn composites_low_pump_zero_delay() {
        let rates = RateSet::with_equal_pump(1.0, 1.0, 0.1).unwrap();
        let (cross, auto) = g2_composites(&rates, &[0.0]).unwrap();
        assert_relative_eq!(cross.values[0], 12.1, max_relative = 1e-10);
        assert_relative_eq!(auto.values[0], 3.025, max_relative = 1e-10);
    }

    #[test]
    fn composite_cross_is_asymmetric() {
        let grid = [-2000.0, -1000.0, 0.0, 1000.0, 2000.0];
        let (cross, auto) = g2_composites(&canonical(), &grid).unwrap();
        // negative side is the time-inverted cascade: antibunched
        assert!(cross.values[0] < 1.0);
        assert!(cross.values[2] > 1.0);
        // auto is symmetric by construction
        assert_abs_diff_eq!(auto.values[0], auto.values[4], epsilon = 1e-12);
        assert_abs_diff_eq!(auto.values[1], auto.values[3], epsilon = 1e-12);
    }

    #[test]
    fn canonical_auto_composite_is_flat() {
        // The four canonical correlations sum to a constant 4.
        let grid = G2Curve::symmetric_grid(10_000.0, 4.0);
        let (_, auto) = g2_composites(&canonical(), &grid).unwrap();
        for v in &auto.values {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn tails_approach_one() {
        for rates in [
            canonical(),
            RateSet::with_equal_pump(0.53, 0.56, 0.21).unwrap(),
            RateSet::new(1.3, 0.7, 0.9, 0.4).unwrap(),
        ] {
            let tail_ps = 50.0 / rates.min_rate() * 1000.0;
            for kind in G2Kind::PAIR_KINDS {
                let c = g2_numeric(kind, &rates, &[tail_ps]).unwrap();
                assert!(
                    (c.values[0] - 1.0).abs() < 1e-3,
                    "{kind} tail = {}",
                    c.values[0]
                );
            }
        }
    }

    #[test]
    fn stepping_and_pointwise_paths_agree() {
        let rates = RateSet::new(0.6, 1.4, 0.8, 0.5).unwrap();
        let uniform: Vec<f64> = (0..=500).map(|k| k as f64 * 10.0).collect();
        let jittered: Vec<f64> = uniform
            .iter()
            .enumerate()
            .map(|(i, t)| if i % 7 == 3 { t + 0.25 } else { *t })
            .collect();
        let a = g2_numeric(G2Kind::XxThenX, &rates, &uniform).unwrap();
        let b = g2_numeric(G2Kind::XxThenX, &rates, &jittered).unwrap();
        // Only identical grid points are comparable.
        for i in (0..uniform.len()).filter(|i| i % 7 != 3) {
            assert_abs_diff_eq!(a.values[i], b.values[i], epsilon = 1e-11);
        }
    }

    #[test]
    fn convolve_preserves_constants_and_tails() {
        let grid = G2Curve::symmetric_grid(5000.0, 4.0);
        let flat = G2Curve {
            kind: G2Kind::AutoComposite,
            tau_ps: grid.clone(),
            values: vec![1.0; grid.len()],
        };
        let irf = InstrumentResponse::new(350.0).unwrap();
        let out = convolve_irf(&flat, &irf).unwrap();
        for v in &out.values {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn convolve_delta_kernel_limit() {
        let grid = G2Curve::symmetric_grid(100.0, 4.0);
        let curve = G2Curve {
            kind: G2Kind::XThenX,
            tau_ps: grid.clone(),
            values: grid.iter().map(|t| 1.0 + (t / 40.0).sin()).collect(),
        };
        let out = convolve_irf(&curve, &InstrumentResponse::new(1e-6).unwrap()).unwrap();
        assert_eq!(out.values, curve.values);
    }

    #[test]
    fn convolve_rejects_coarse_grid() {
        let grid = G2Curve::symmetric_grid(5000.0, 100.0);
        let flat = G2Curve {
            kind: G2Kind::AutoComposite,
            tau_ps: grid.clone(),
            values: vec![1.0; grid.len()],
        };
        match convolve_irf(&flat, &InstrumentResponse::new(350.0).unwrap()) {
            Err(Error::Resolution(_)) => {}
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn convolve_fills_antibunching_dip() {
        // XX-XX at the canonical point dips to zero at tau = 0; a 350 ps
        // kernel leaks neighbouring values in.
        let half: Vec<f64> = (0..=2000).map(|k| k as f64 * 4.0).collect();
        let positive = g2_numeric(G2Kind::XxThenXx, &canonical(), &half).unwrap();
        let grid = G2Curve::symmetric_grid(8000.0, 4.0);
        let sym = G2Curve {
            kind: G2Kind::XxThenXx,
            tau_ps: grid.clone(),
            values: grid
                .iter()
                .map(|t| positive.values[(t.abs() / 4.0).round() as usize])
                .collect(),
        };
        let out = convolve_irf(&sym, &InstrumentResponse::new(350.0).unwrap()).unwrap();
        let center = grid.len() / 2;
        assert_eq!(sym.values[center], 0.0);
        assert!(out.values[center] > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn probability_conserved_up_to_long_times(
            gb in 0.05f64..5.0,
            gx in 0.05f64..5.0,
            pb in 0.01f64..5.0,
            px in 0.01f64..5.0,
            frac in 0.0f64..1.0,
        ) {
            let rates = RateSet::new(gb, gx, pb, px).unwrap();
            let tau = frac * 1000.0 / rates.min_rate();
            let init = Occupations::new(0.4, 0.1, 0.2, 0.3).unwrap();
            let out = evolve(&rates, &init, tau).unwrap();
            prop_assert!((out.sum() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn zero_delay_identities(
            gb in 0.05f64..5.0,
            gx in 0.05f64..5.0,
            p in 0.01f64..5.0,
        ) {
            let rates = RateSet::with_equal_pump(gb, gx, p).unwrap();
            let ss = steady_state(&rates).unwrap();
            for kind in [G2Kind::XThenXx, G2Kind::XThenX, G2Kind::XxThenXx] {
                let c = g2_numeric(kind, &rates, &[0.0]).unwrap();
                prop_assert!(c.values[0].abs() < 1e-12);
            }
            let c = g2_numeric(G2Kind::XxThenX, &rates, &[0.0]).unwrap();
            prop_assert!((c.values[0] * ss.exciton_h - 1.0).abs() < 1e-9);
        }

        #[test]
        fn auto_is_quarter_of_cross_at_zero(
            gb in 0.05f64..5.0,
            gx in 0.05f64..5.0,
            p in 0.01f64..5.0,
        ) {
            let rates = RateSet::with_equal_pump(gb, gx, p).unwrap();
            let (cross, auto) = g2_composites(&rates, &[0.0]).unwrap();
            prop_assert!((auto.values[0] / cross.values[0] - 0.25).abs() < 1e-12);
        }
    }
}
