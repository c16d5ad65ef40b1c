//! Stochastic quantum-jump trajectories and the detection chain.
//!
//! CW excitation runs the four-level system as a continuous-time Markov jump
//! process; pulsed excitation re-prepares the state at every trigger and lets
//! it decay with the pumps off. Emitted photons are labeled by species and
//! polarization, then pushed through a detection chain (spectral/polarization
//! filtering, efficiency thinning, beamsplitter routing, timing jitter, dead
//! time, dark counts) to produce detector time-tag streams.
//!
//! All event and tag timestamps are integer picoseconds; rates are 1/ns.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{steady_state, RateSet};
use crate::numerics::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Species {
    X,
    Xx,
}

impl std::fmt::Display for Species {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Species::X => "X",
            Species::Xx => "XX",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl std::fmt::Display for Polarization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarization::H => "H",
            Polarization::V => "V",
        })
    }
}

/// A labeled photon emission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionEvent {
    pub time_ps: i64,
    pub species: Species,
    pub polarization: Polarization,
    /// Excitation-pulse ordinal for pulsed runs, `None` for CW.
    pub pulse_index: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Detector {
    D0,
    D1,
}

impl std::fmt::Display for Detector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Detector::D0 => "D0",
            Detector::D1 => "D1",
        })
    }
}

/// A detector click.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeTag {
    pub time_ps: i64,
    pub detector: Detector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Splitter {
    #[default]
    None,
    FiftyFifty,
}

/// Configuration of the detection chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub polarization_filter: Option<Polarization>,
    pub species_filter: Option<Species>,
    /// Product of setup and extraction efficiencies, in [0, 1].
    pub efficiency: f64,
    /// Gaussian timing jitter FWHM per detector, ps.
    pub jitter_fwhm_ps: f64,
    pub splitter: Splitter,
    pub dark_rate_hz: f64,
    pub dead_time_ps: i64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            polarization_filter: None,
            species_filter: None,
            efficiency: 1.0,
            jitter_fwhm_ps: 0.0,
            splitter: Splitter::None,
            dark_rate_hz: 0.0,
            dead_time_ps: 0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(invalid(format!(
                "efficiency {} outside [0, 1]",
                self.efficiency
            )));
        }
        if self.jitter_fwhm_ps < 0.0 || !self.jitter_fwhm_ps.is_finite() {
            return Err(invalid(format!("jitter fwhm {}", self.jitter_fwhm_ps)));
        }
        if self.dark_rate_hz < 0.0 || !self.dark_rate_hz.is_finite() {
            return Err(invalid(format!("dark rate {}", self.dark_rate_hz)));
        }
        if self.dead_time_ps < 0 {
            return Err(invalid(format!("dead time {}", self.dead_time_ps)));
        }
        Ok(())
    }
}

/// State preparation probabilities applied at each excitation pulse; the
/// remainder stays in the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulsePrep {
    pub repetition_rate_hz: f64,
    pub prob_b: f64,
    pub prob_h: f64,
    pub prob_v: f64,
}

impl PulsePrep {
    pub fn validate(&self) -> Result<()> {
        if !(self.repetition_rate_hz > 0.0) || !self.repetition_rate_hz.is_finite() {
            return Err(invalid(format!(
                "repetition rate {} must be > 0",
                self.repetition_rate_hz
            )));
        }
        for (name, p) in [
            ("prob_b", self.prob_b),
            ("prob_h", self.prob_h),
            ("prob_v", self.prob_v),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if self.prob_b + self.prob_h + self.prob_v > 1.0 + 1e-12 {
            return Err(invalid(format!(
                "preparation probabilities sum to {} > 1",
                self.prob_b + self.prob_h + self.prob_v
            )));
        }
        Ok(())
    }

    pub fn period_ns(&self) -> f64 {
        1e9 / self.repetition_rate_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum State {
    Ground,
    ExcitonH,
    ExcitonV,
    Biexciton,
}

/// One stochastic jump: when it happened and the photon it released, if any.
pub(crate) struct Jump {
    pub t_ns: f64,
    pub emission: Option<(Species, Polarization)>,
}

/// Shared jump-process core for the CW and pulsed simulators.
pub(crate) struct Trajectory<R: Rng> {
    rates: RateSet,
    pub state: State,
    pub t_ns: f64,
    rng: R,
}

impl<R: Rng> Trajectory<R> {
    pub fn new(rates: RateSet, state: State, t_ns: f64, rng: R) -> Self {
        Self {
            rates,
            state,
            t_ns,
            rng,
        }
    }

    fn exit_rate(&self) -> f64 {
        match self.state {
            State::Ground => 2.0 * self.rates.pump_x,
            State::ExcitonH | State::ExcitonV => self.rates.gamma_x + self.rates.pump_b,
            State::Biexciton => 2.0 * self.rates.gamma_b,
        }
    }

    /// Advance one jump; `None` when the state has no exit channel.
    pub fn step(&mut self) -> Option<Jump> {
        let total = self.exit_rate();
        if total <= 0.0 {
            return None;
        }
        self.t_ns += draw_exponential(&mut self.rng, total);
        let u: f64 = self.rng.random::<f64>() * total;
        let (state, emission) = match self.state {
            State::Ground => {
                if u < self.rates.pump_x {
                    (State::ExcitonH, None)
                } else {
                    (State::ExcitonV, None)
                }
            }
            State::ExcitonH => {
                if u < self.rates.gamma_x {
                    (State::Ground, Some((Species::X, Polarization::H)))
                } else {
                    (State::Biexciton, None)
                }
            }
            State::ExcitonV => {
                if u < self.rates.gamma_x {
                    (State::Ground, Some((Species::X, Polarization::V)))
                } else {
                    (State::Biexciton, None)
                }
            }
            State::Biexciton => {
                if u < self.rates.gamma_b {
                    (State::ExcitonH, Some((Species::Xx, Polarization::H)))
                } else {
                    (State::ExcitonV, Some((Species::Xx, Polarization::V)))
                }
            }
        };
        self.state = state;
        Some(Jump {
            t_ns: self.t_ns,
            emission,
        })
    }
}

pub(crate) fn draw_exponential<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    // Inverse CDF keeps the draw count per jump fixed, which the shard
    // determinism contract relies on.
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

fn sample_initial_state<R: Rng>(rates: &RateSet, rng: &mut R) -> Result<State> {
    let ss = steady_state(rates)?;
    let u: f64 = rng.random();
    Ok(if u < ss.ground {
        State::Ground
    } else if u < ss.ground + ss.exciton_h {
        State::ExcitonH
    } else if u < ss.ground + ss.exciton_h + ss.exciton_v {
        State::ExcitonV
    } else {
        State::Biexciton
    })
}

/// Continuous-wave trajectory over `duration_ps`, sharded into independent
/// time segments simulated in parallel.
///
/// Each shard starts from a steady-state-sampled initial condition one
/// relaxation interval before its segment and discards the warm-up, so the
/// merged stream is stationary. Output depends only on (rates, duration,
/// seed, shards), not on thread scheduling.
pub fn simulate_cw(
    rates: &RateSet,
    duration_ps: i64,
    seed: u64,
    shards: u32,
) -> Result<Vec<EmissionEvent>> {
    if duration_ps < 0 {
        return Err(invalid(format!("duration {duration_ps} ps must be >= 0")));
    }
    if shards == 0 {
        return Err(invalid("shard count must be >= 1".to_string()));
    }
    if duration_ps == 0 {
        return Ok(Vec::new());
    }
    // Ten times the slowest rate comfortably covers one relaxation time of
    // the generator.
    let warmup_ns = 10.0 / rates.min_rate();
    let stream = RandomStream::new(seed, 0);
    let shard_events: Vec<Vec<EmissionEvent>> = (0..shards)
        .into_par_iter()
        .map(|shard| -> Result<Vec<EmissionEvent>> {
            let start_ps = duration_ps * shard as i64 / shards as i64;
            let end_ps = duration_ps * (shard as i64 + 1) / shards as i64;
            let mut rng = stream.shard(shard as u64).rng();
            let init = sample_initial_state(rates, &mut rng)?;
            let mut traj = Trajectory::new(*rates, init, start_ps as f64 / 1000.0 - warmup_ns, rng);
            let mut events = Vec::new();
            while let Some(jump) = traj.step() {
                let t_ps = (jump.t_ns * 1000.0).round() as i64;
                if t_ps >= end_ps {
                    break;
                }
                if let Some((species, polarization)) = jump.emission {
                    if t_ps >= start_ps {
                        events.push(EmissionEvent {
                            time_ps: t_ps,
                            species,
                            polarization,
                            pulse_index: None,
                        });
                    }
                }
            }
            Ok(events)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(shard_events.into_iter().flatten().collect())
}

/// Pulsed trajectory: each pulse overwrites the current state with a draw
/// from `prep`, which then decays with the pumps off. A cascade still in
/// flight when the next pulse arrives is cut short by the re-preparation.
pub fn simulate_pulsed(
    prep: &PulsePrep,
    rates: &RateSet,
    n_pulses: u64,
    seed: u64,
) -> Result<Vec<EmissionEvent>> {
    prep.validate()?;
    let decay = RateSet::new(rates.gamma_b, rates.gamma_x, 0.0, 0.0)?;
    let period_ns = prep.period_ns();
    let mut rng = RandomStream::new(seed, 0).rng();
    let mut events = Vec::new();
    for pulse in 0..n_pulses {
        let t0_ns = pulse as f64 * period_ns;
        let u: f64 = rng.random();
        let state = if u < prep.prob_b {
            State::Biexciton
        } else if u < prep.prob_b + prep.prob_h {
            State::ExcitonH
        } else if u < prep.prob_b + prep.prob_h + prep.prob_v {
            State::ExcitonV
        } else {
            continue; // stays in the ground state: nothing to decay
        };
        let mut traj = Trajectory::new(decay, state, t0_ns, &mut rng);
        let cutoff_ns = t0_ns + period_ns;
        while let Some(jump) = traj.step() {
            if jump.t_ns >= cutoff_ns {
                break;
            }
            if let Some((species, polarization)) = jump.emission {
                events.push(EmissionEvent {
                    time_ps: (jump.t_ns * 1000.0).round() as i64,
                    species,
                    polarization,
                    pulse_index: Some(pulse),
                });
            }
            if traj.state == State::Ground {
                break;
            }
        }
    }
    Ok(events)
}

/// Run the detection chain over an emission stream.
///
/// Stages, in order: polarization/species filters, Bernoulli thinning at
/// `efficiency`, 50:50 routing (all photons to D0 without a splitter),
/// per-detector Gaussian jitter, per-detector dead time, dark counts merged
/// in. Both returned streams are time-sorted.
pub fn detect(
    events: &[EmissionEvent],
    config: &DetectionConfig,
    seed: u64,
) -> Result<(Vec<TimeTag>, Vec<TimeTag>)> {
    config.validate()?;
    if events.windows(2).any(|w| w[1].time_ps < w[0].time_ps) {
        return Err(Error::Precondition(
            "emission events must be time-sorted".into(),
        ));
    }
    let stream = RandomStream::new(seed, 0);
    let mut rng = stream.shard(0).rng();
    let sigma = config.jitter_fwhm_ps / (8.0 * std::f64::consts::LN_2).sqrt();
    let jitter = (sigma > 0.0)
        .then(|| Normal::new(0.0, sigma))
        .transpose()
        .map_err(|e| invalid(format!("jitter: {e}")))?;

    let mut d0: Vec<i64> = Vec::new();
    let mut d1: Vec<i64> = Vec::new();
    for event in events {
        if let Some(p) = config.polarization_filter {
            if event.polarization != p {
                continue;
            }
        }
        if let Some(s) = config.species_filter {
            if event.species != s {
                continue;
            }
        }
        if config.efficiency < 1.0 && rng.random::<f64>() >= config.efficiency {
            continue;
        }
        let detector = match config.splitter {
            Splitter::None => Detector::D0,
            Splitter::FiftyFifty => {
                if rng.random::<f64>() < 0.5 {
                    Detector::D0
                } else {
                    Detector::D1
                }
            }
        };
        let mut t = event.time_ps;
        if let Some(n) = &jitter {
            t += n.sample(&mut rng).round() as i64;
        }
        match detector {
            Detector::D0 => d0.push(t),
            Detector::D1 => d1.push(t),
        }
    }
    d0.sort_unstable();
    d1.sort_unstable();
    apply_dead_time(&mut d0, config.dead_time_ps);
    apply_dead_time(&mut d1, config.dead_time_ps);

    if config.dark_rate_hz > 0.0 {
        let span_ps = events.last().map_or(0, |e| e.time_ps.max(0));
        if span_ps > 0 {
            let mut dark_rng = stream.shard(1).rng();
            let mean = config.dark_rate_hz * span_ps as f64 * 1e-12;
            let poisson = Poisson::new(mean).map_err(|e| invalid(format!("dark rate: {e}")))?;
            for tags in [&mut d0, &mut d1] {
                let n = poisson.sample(&mut dark_rng) as u64;
                for _ in 0..n {
                    tags.push(dark_rng.random_range(0..=span_ps));
                }
                tags.sort_unstable();
            }
        }
    }

    let wrap = |v: Vec<i64>, detector: Detector| {
        v.into_iter()
            .map(|time_ps| TimeTag { time_ps, detector })
            .collect()
    };
    Ok((wrap(d0, Detector::D0), wrap(d1, Detector::D1)))
}

fn apply_dead_time(tags: &mut Vec<i64>, dead_time_ps: i64) {
    if dead_time_ps <= 0 || tags.is_empty() {
        return;
    }
    let mut kept = Vec::with_capacity(tags.len());
    let mut last: Option<i64> = None;
    for &t in tags.iter() {
        if last.is_none_or(|l| t - l >= dead_time_ps) {
            kept.push(t);
            last = Some(t);
        }
    }
    *tags = kept;
}
