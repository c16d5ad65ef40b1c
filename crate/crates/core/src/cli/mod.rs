//! The `twinphoton` command-line front end.
//!
//! Subcommands wire the library into file-based pipelines: simulate emission
//! streams, run the detection chain, build and normalize correlation
//! histograms, fit the model, compute twin rates, run the interference and
//! photon-number analyses, synthesize and fit spectra, and render any CSV
//! product to SVG. Every run with a file output writes a JSON provenance
//! record (command line, config hash, seed, version) alongside it.

mod config;
mod svg;

pub use config::RunConfig;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::correlator::{
    alpha_ratio, correlate, fit_g2_histogram, twin_rate_cw, twin_rate_pulsed, CoincidenceHistogram,
    G2FitConfig,
};
use crate::error::{invalid, Error, Result};
use crate::hom::{extract_visibility, simulate_hom, HomConfig, HomPolarization};
use crate::io;
use crate::mc::{
    detect, simulate_cw, simulate_pulsed, DetectionConfig, Polarization, PulsePrep, Species,
    Splitter,
};
use crate::model::{G2Kind, InstrumentResponse, RateSet};
use crate::pnr::{
    background_subtract, classify, reconstruct, reconstruct_from_ratios, simulate_tes,
    thin_binomial, BootstrapConfig, CountRecord, MeasuredRatios, PhotonNumberDist, Plane, TesModel,
    TriggerMode,
};
use crate::spectra::{extract_fss, synthesize_map, BindingSign, QuadrupletParams};

#[derive(Parser)]
#[command(
    name = "twinphoton",
    version,
    about = "Twin-photon cascade simulator and analysis toolkit"
)]
struct Cli {
    /// Base seed for all stochastic stages.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Key-value run configuration supplying flag defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolarizationArg {
    H,
    V,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpeciesArg {
    X,
    Xx,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitterArg {
    None,
    #[value(name = "50:50")]
    FiftyFifty,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Auto,
    Cross,
}

#[derive(Clone, Copy, ValueEnum)]
enum TriggerArg {
    Photon,
    Laser,
}

#[derive(Clone, Copy, ValueEnum)]
enum BindingArg {
    Binding,
    Antibinding,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a continuous-wave emission stream.
    SimulateCw {
        #[arg(long)]
        gamma_b: Option<f64>,
        #[arg(long)]
        gamma_x: Option<f64>,
        /// Common pump rate (sets both pump_b and pump_x).
        #[arg(long)]
        pump: Option<f64>,
        #[arg(long)]
        pump_b: Option<f64>,
        #[arg(long)]
        pump_x: Option<f64>,
        #[arg(long)]
        duration_ns: Option<f64>,
        /// Independent trajectory shards (affects the stream, not just speed).
        #[arg(long)]
        shards: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a pulsed emission stream (decay only, state re-prepared each pulse).
    SimulatePulsed {
        #[arg(long)]
        gamma_b: Option<f64>,
        #[arg(long)]
        gamma_x: Option<f64>,
        #[arg(long)]
        prob_b: Option<f64>,
        #[arg(long)]
        prob_h: Option<f64>,
        #[arg(long)]
        prob_v: Option<f64>,
        #[arg(long)]
        rep_rate_hz: Option<f64>,
        #[arg(long)]
        n_pulses: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the detection chain over an emission stream.
    Detect {
        #[arg(long)]
        events: PathBuf,
        #[arg(long, value_enum, default_value = "none")]
        polarization: PolarizationArg,
        #[arg(long, value_enum, default_value = "none")]
        species: SpeciesArg,
        #[arg(long)]
        efficiency: Option<f64>,
        #[arg(long)]
        jitter_fwhm_ps: Option<f64>,
        #[arg(long, value_enum, default_value = "none")]
        splitter: SplitterArg,
        #[arg(long)]
        dark_rate_hz: Option<f64>,
        #[arg(long)]
        dead_time_ps: Option<i64>,
        #[arg(long)]
        out_d0: PathBuf,
        #[arg(long)]
        out_d1: PathBuf,
    },
    /// Cross-correlate two tag streams into a coincidence histogram.
    Correlate {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        bin_ps: Option<i64>,
        #[arg(long)]
        window_ps: Option<i64>,
        /// Override the rate measured from stream a (Hz).
        #[arg(long)]
        rate_a_hz: Option<f64>,
        #[arg(long)]
        rate_b_hz: Option<f64>,
        #[arg(long)]
        total_time_s: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the IRF-convolved model to a measured histogram.
    FitG2 {
        #[arg(long)]
        hist: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        irf_fwhm_ps: Option<f64>,
        #[arg(long)]
        init_gamma_b: Option<f64>,
        #[arg(long)]
        init_gamma_x: Option<f64>,
        #[arg(long)]
        init_pump: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Twin fraction alpha = g2_auto(0) / g2_cross(0).
    Alpha {
        #[arg(long)]
        g_auto_0: f64,
        #[arg(long)]
        g_cross_0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// CW twin-photon rate into the first lens.
    TprCw {
        #[arg(long)]
        n_spcm: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pulsed twin-photon rate f * p_twin * eta^2.
    TprPulsed {
        #[arg(long)]
        rep_rate_hz: Option<f64>,
        #[arg(long)]
        p_twin: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hong-Ou-Mandel interference of a pulsed pair stream.
    Hom {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        mode_overlap: Option<f64>,
        #[arg(long)]
        rep_rate_hz: Option<f64>,
        /// Which polarization channel feeds the interferometer.
        #[arg(long, value_enum, default_value = "h")]
        polarization: PolarizationArg,
        #[arg(long)]
        bin_ps: Option<i64>,
        #[arg(long)]
        k_range: Option<u64>,
        #[arg(long)]
        out_co: PathBuf,
        #[arg(long)]
        out_cross: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Simulate TES pulse areas for a thinned source distribution.
    PnrSim {
        #[arg(long)]
        p0: Option<f64>,
        #[arg(long)]
        p1: Option<f64>,
        #[arg(long)]
        p2: Option<f64>,
        #[arg(long)]
        p3: Option<f64>,
        /// End-to-end Bernoulli success probability per photon.
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        n_triggers: Option<u64>,
        #[arg(long, value_enum, default_value = "laser")]
        trigger_mode: TriggerArg,
        #[arg(long)]
        unit_area: Option<f64>,
        #[arg(long)]
        tes_sigma: Option<f64>,
        #[arg(long)]
        acquisition_s: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Classified count record (JSON) for pnr-reconstruct.
        #[arg(long)]
        counts_out: Option<PathBuf>,
    },
    /// Invert the binomial loss model to the source photon-number distribution.
    PnrReconstruct {
        #[arg(long)]
        r21: Option<f64>,
        #[arg(long)]
        r10: Option<f64>,
        #[arg(long)]
        s: Option<f64>,
        /// Photon-triggered count record (JSON) supplying r21.
        #[arg(long)]
        counts_photon: Option<PathBuf>,
        /// Laser-sync count record (JSON) supplying r10.
        #[arg(long)]
        counts_laser: Option<PathBuf>,
        /// Subtract the records' embedded background rates first.
        #[arg(long)]
        subtract_background: bool,
        /// Bootstrap resamples for uncertainty intervals (0 = none).
        #[arg(long)]
        bootstrap: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize a polarization-resolved spectral map.
    SpectraSim {
        #[arg(long)]
        center_uev: Option<f64>,
        #[arg(long)]
        delta_fss_uev: Option<f64>,
        #[arg(long, value_enum, default_value = "antibinding")]
        binding: BindingArg,
        #[arg(long)]
        linewidth_x_uev: Option<f64>,
        #[arg(long)]
        linewidth_xx_uev: Option<f64>,
        #[arg(long)]
        intensity_ratio: Option<f64>,
        #[arg(long)]
        principal_axis_deg: Option<f64>,
        #[arg(long)]
        n_angles: Option<u64>,
        #[arg(long)]
        energy_min_uev: Option<f64>,
        #[arg(long)]
        energy_max_uev: Option<f64>,
        #[arg(long)]
        energy_step_uev: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Constrained quadruplet fits over a spectral map.
    SpectraFit {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a CSV histogram, curve or spectral map to SVG.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Serialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub generator: String,
}

#[derive(Serialize)]
struct WithProvenance<T: Serialize> {
    provenance: Provenance,
    report: T,
}

struct Context {
    seed: u64,
    config: RunConfig,
    command_line: String,
    config_hash: String,
}

impl Context {
    fn provenance(&self) -> Provenance {
        Provenance {
            command: self.command_line.clone(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            generator: "twinphoton".to_string(),
        }
    }

    fn write_sidecar(&self, output: &Path) -> Result<()> {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".prov.json");
        io::write_json(&output.with_file_name(name), &self.provenance())
    }

    fn f64(&self, flag: Option<f64>, key: &str, default: f64) -> Result<f64> {
        Ok(flag.or(self.config.get_f64(key)?).unwrap_or(default))
    }

    fn u64(&self, flag: Option<u64>, key: &str, default: u64) -> Result<u64> {
        Ok(flag.or(self.config.get_u64(key)?).unwrap_or(default))
    }

    fn i64(&self, flag: Option<i64>, key: &str, default: i64) -> Result<i64> {
        Ok(flag.or(self.config.get_i64(key)?).unwrap_or(default))
    }

    fn rates(
        &self,
        gamma_b: Option<f64>,
        gamma_x: Option<f64>,
        pump: Option<f64>,
        pump_b: Option<f64>,
        pump_x: Option<f64>,
    ) -> Result<RateSet> {
        let gb = self.f64(gamma_b, "gamma_b", 1.0)?;
        let gx = self.f64(gamma_x, "gamma_x", 1.0)?;
        let p = self.f64(pump, "pump", 1.0)?;
        let pb = self.f64(pump_b, "pump_b", p)?;
        let px = self.f64(pump_x, "pump_x", p)?;
        RateSet::new(gb, gx, pb, px)
    }
}

/// Entry point used by `main` and the integration tests. Returns the process
/// exit code: 0 on success, 2 usage, 3 data/format, 4 fit failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(argv.clone()) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        // Ignore failure: the global pool can only be installed once per
        // process, which is fine for repeated in-process invocations.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    let (config, config_hash) = match &cli.config {
        None => (RunConfig::default(), "none".to_string()),
        Some(path) => match RunConfig::load(path) {
            Ok(cfg) => {
                let digest = Sha256::digest(&cfg.raw);
                let hash = format!(
                    "sha256:{}",
                    digest
                        .iter()
                        .map(|b| format!("{b:02x}"))
                        .collect::<String>()
                );
                (cfg, hash)
            }
            Err(e) => {
                eprintln!("error: {e}");
                return e.exit_code();
            }
        },
    };
    let seed = cli
        .seed
        .or(config.get_u64("seed").unwrap_or(None))
        .unwrap_or(1);
    let command_line = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let ctx = Context {
        seed,
        config,
        command_line,
        config_hash,
    };
    match dispatch(cli.command, &ctx) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, ctx: &Context) -> Result<()> {
    match command {
        Command::SimulateCw {
            gamma_b,
            gamma_x,
            pump,
            pump_b,
            pump_x,
            duration_ns,
            shards,
            out,
        } => {
            let rates = ctx.rates(gamma_b, gamma_x, pump, pump_b, pump_x)?;
            let duration_ns = ctx.f64(duration_ns, "duration_ns", 1e6)?;
            let shards = ctx.u64(shards, "shards", 1)? as u32;
            let events = simulate_cw(&rates, (duration_ns * 1000.0) as i64, ctx.seed, shards)?;
            io::write_events(&out, &events)?;
            ctx.write_sidecar(&out)?;
            println!("{} events -> {}", events.len(), out.display());
            Ok(())
        }
        Command::SimulatePulsed {
            gamma_b,
            gamma_x,
            prob_b,
            prob_h,
            prob_v,
            rep_rate_hz,
            n_pulses,
            out,
        } => {
            let rates = ctx.rates(gamma_b, gamma_x, None, Some(1.0), Some(1.0))?;
            let prep = PulsePrep {
                repetition_rate_hz: ctx.f64(rep_rate_hz, "rep_rate_hz", 80e6)?,
                prob_b: ctx.f64(prob_b, "prob_b", 1.0)?,
                prob_h: ctx.f64(prob_h, "prob_h", 0.0)?,
                prob_v: ctx.f64(prob_v, "prob_v", 0.0)?,
            };
            let n_pulses = ctx.u64(n_pulses, "n_pulses", 100_000)?;
            let events = simulate_pulsed(&prep, &rates, n_pulses, ctx.seed)?;
            io::write_events(&out, &events)?;
            ctx.write_sidecar(&out)?;
            println!("{} events -> {}", events.len(), out.display());
            Ok(())
        }
        Command::Detect {
            events,
            polarization,
            species,
            efficiency,
            jitter_fwhm_ps,
            splitter,
            dark_rate_hz,
            dead_time_ps,
            out_d0,
            out_d1,
        } => {
            let stream = io::read_events(&events)?;
            let config = DetectionConfig {
                polarization_filter: match polarization {
                    PolarizationArg::H => Some(Polarization::H),
                    PolarizationArg::V => Some(Polarization::V),
                    PolarizationArg::None => None,
                },
                species_filter: match species {
                    SpeciesArg::X => Some(Species::X),
                    SpeciesArg::Xx => Some(Species::Xx),
                    SpeciesArg::None => None,
                },
                efficiency: ctx.f64(efficiency, "efficiency", 1.0)?,
                jitter_fwhm_ps: ctx.f64(jitter_fwhm_ps, "jitter_fwhm_ps", 0.0)?,
                splitter: match splitter {
                    SplitterArg::None => Splitter::None,
                    SplitterArg::FiftyFifty => Splitter::FiftyFifty,
                },
                dark_rate_hz: ctx.f64(dark_rate_hz, "dark_rate_hz", 0.0)?,
                dead_time_ps: ctx.i64(dead_time_ps, "dead_time_ps", 0)?,
            };
            let (d0, d1) = detect(&stream, &config, ctx.seed)?;
            io::write_tags(&out_d0, &d0)?;
            io::write_tags(&out_d1, &d1)?;
            ctx.write_sidecar(&out_d0)?;
            println!(
                "{} + {} tags -> {}, {}",
                d0.len(),
                d1.len(),
                out_d0.display(),
                out_d1.display()
            );
            Ok(())
        }
        Command::Correlate {
            a,
            b,
            bin_ps,
            window_ps,
            rate_a_hz,
            rate_b_hz,
            total_time_s,
            out,
        } => {
            let tags_a = io::read_tags(&a)?;
            let tags_b = io::read_tags(&b)?;
            let bin = ctx.i64(bin_ps, "bin_ps", 4)?;
            let window = ctx.i64(window_ps, "window_ps", 50_000)?;
            let mut hist = correlate(&tags_a, &tags_b, bin, window)?;
            if let Some(r) = rate_a_hz {
                hist.rate_a_hz = r;
            }
            if let Some(r) = rate_b_hz {
                hist.rate_b_hz = r;
            }
            if let Some(t) = total_time_s {
                hist.total_time_s = t;
            }
            io::write_histogram(&out, &hist)?;
            write_histogram_meta(&out, &hist)?;
            ctx.write_sidecar(&out)?;
            println!(
                "{} coincidences -> {}",
                hist.counts.iter().sum::<u64>(),
                out.display()
            );
            Ok(())
        }
        Command::FitG2 {
            hist,
            kind,
            irf_fwhm_ps,
            init_gamma_b,
            init_gamma_x,
            init_pump,
            out,
        } => {
            let histogram = read_histogram_with_meta(&hist)?;
            let kind = match kind {
                KindArg::Auto => G2Kind::AutoComposite,
                KindArg::Cross => G2Kind::Cross,
            };
            let irf = InstrumentResponse::new(ctx.f64(irf_fwhm_ps, "irf_fwhm_ps", 350.0)?)?;
            let init = RateSet::with_equal_pump(
                ctx.f64(init_gamma_b, "gamma_b", 1.0)?,
                ctx.f64(init_gamma_x, "gamma_x", 1.0)?,
                ctx.f64(init_pump, "pump", 1.0)?,
            )?;
            let config = G2FitConfig::new(kind, irf, init)?;
            let report = fit_g2_histogram(&histogram, &config)?;
            println!(
                "g_fit(0) = {:.4} +- {:.4} (rates: pump {:.4}, gamma_b {:.4}, gamma_x {:.4})",
                report.g_fit_0,
                report.g_fit_0_sigma,
                report.rates.pump_x,
                report.rates.gamma_b,
                report.rates.gamma_x
            );
            io::write_json(
                &out,
                &WithProvenance {
                    provenance: ctx.provenance(),
                    report,
                },
            )
        }
        Command::Alpha {
            g_auto_0,
            g_cross_0,
            out,
        } => {
            let alpha = alpha_ratio(g_auto_0, g_cross_0)?;
            println!("alpha = {alpha:.4}");
            if let Some(out) = out {
                #[derive(Serialize)]
                struct AlphaReport {
                    g_auto_0: f64,
                    g_cross_0: f64,
                    alpha: f64,
                }
                io::write_json(
                    &out,
                    &WithProvenance {
                        provenance: ctx.provenance(),
                        report: AlphaReport {
                            g_auto_0,
                            g_cross_0,
                            alpha,
                        },
                    },
                )?;
            }
            Ok(())
        }
        Command::TprCw {
            n_spcm,
            eps,
            eta,
            alpha,
            out,
        } => {
            let budget = twin_rate_cw(
                ctx.f64(n_spcm, "n_spcm_hz", 103e3)?,
                ctx.f64(eps, "eps_setup", 0.0095)?,
                ctx.f64(eta, "eta_lens", 0.09)?,
                ctx.f64(alpha, "alpha", 0.39)?,
            )?;
            println!(
                "TPR = {:.1} kHz (twin detect fraction {:.4})",
                budget.tpr_hz / 1e3,
                budget.twin_detect_fraction
            );
            if let Some(out) = out {
                io::write_json(
                    &out,
                    &WithProvenance {
                        provenance: ctx.provenance(),
                        report: budget,
                    },
                )?;
            }
            Ok(())
        }
        Command::TprPulsed {
            rep_rate_hz,
            p_twin,
            eta,
            out,
        } => {
            let f = ctx.f64(rep_rate_hz, "rep_rate_hz", 80e6)?;
            let p = ctx.f64(p_twin, "p_twin", 0.080)?;
            let eta = ctx.f64(eta, "eta_lens", 0.09)?;
            let tpr_hz = twin_rate_pulsed(f, p, eta)?;
            println!("TPR = {:.2} kHz", tpr_hz / 1e3);
            if let Some(out) = out {
                #[derive(Serialize)]
                struct PulsedTprReport {
                    rep_rate_hz: f64,
                    p_twin: f64,
                    eta_lens: f64,
                    tpr_hz: f64,
                }
                io::write_json(
                    &out,
                    &WithProvenance {
                        provenance: ctx.provenance(),
                        report: PulsedTprReport {
                            rep_rate_hz: f,
                            p_twin: p,
                            eta_lens: eta,
                            tpr_hz,
                        },
                    },
                )?;
            }
            Ok(())
        }
        Command::Hom {
            events,
            mode_overlap,
            rep_rate_hz,
            polarization,
            bin_ps,
            k_range,
            out_co,
            out_cross,
            report,
        } => {
            let stream = io::read_events(&events)?;
            let channel = match polarization {
                PolarizationArg::H => Polarization::H,
                PolarizationArg::V => Polarization::V,
                PolarizationArg::None => {
                    return Err(invalid(
                        "HOM needs one polarization channel (--polarization h|v)".to_string(),
                    ))
                }
            };
            let pairs: Vec<_> = stream
                .into_iter()
                .filter(|e| e.polarization == channel)
                .collect();
            let rep = ctx.f64(rep_rate_hz, "rep_rate_hz", 80e6)?;
            let config = HomConfig {
                mode_overlap: ctx.f64(mode_overlap, "mode_overlap", 0.56)?,
                polarization: HomPolarization::Co,
                rep_rate_hz: rep,
                n_pulses: 0,
            };
            let bin = ctx.i64(bin_ps, "bin_ps", 4)?;
            let k_range = ctx.u64(k_range, "k_range", 10)? as u32;
            let histograms = simulate_hom(&pairs, &config, bin, ctx.seed)?;
            let visibility = extract_visibility(&histograms, rep, k_range)?;
            io::write_histogram(&out_co, &histograms.co)?;
            io::write_histogram(&out_cross, &histograms.cross)?;
            ctx.write_sidecar(&out_co)?;
            println!(
                "V = {:.4} +- {:.4} (g_par(0) = {:.4}, g_perp(0) = {:.4})",
                visibility.visibility,
                visibility.sigma.unwrap_or(f64::NAN),
                visibility.g_par_0,
                visibility.g_perp_0
            );
            io::write_json(
                &report,
                &WithProvenance {
                    provenance: ctx.provenance(),
                    report: visibility,
                },
            )
        }
        Command::PnrSim {
            p0,
            p1,
            p2,
            p3,
            s,
            n_triggers,
            trigger_mode,
            unit_area,
            tes_sigma,
            acquisition_s,
            out,
            counts_out,
        } => {
            let probabilities = [
                p0.unwrap_or(0.858),
                p1.unwrap_or(0.062),
                p2.unwrap_or(0.080),
                p3.unwrap_or(0.0),
            ];
            let source = PhotonNumberDist::new(Plane::Source, probabilities)?;
            let s = ctx.f64(s, "s_success", 5.04e-4)?;
            let detector_dist = thin_binomial(&source, s)?;
            let model = TesModel::with_uniform_width(
                ctx.f64(unit_area, "unit_area", 1.0)?,
                ctx.f64(tes_sigma, "tes_sigma", 0.1)?,
            )?;
            let mode = match trigger_mode {
                TriggerArg::Photon => TriggerMode::PhotonTriggered,
                TriggerArg::Laser => TriggerMode::LaserSync,
            };
            let n = ctx.u64(n_triggers, "n_triggers", 1_000_000)?;
            let samples = simulate_tes(&detector_dist, &model, n, mode, ctx.seed)?;
            write_samples(&out, &samples)?;
            ctx.write_sidecar(&out)?;
            if let Some(counts_out) = counts_out {
                let counts = classify(&samples, &model)?;
                let record =
                    CountRecord::new(counts.map(|c| c as f64), acquisition_s.unwrap_or(0.0), mode);
                io::write_json(
                    &counts_out,
                    &WithProvenance {
                        provenance: ctx.provenance(),
                        report: record,
                    },
                )?;
            }
            println!("{} pulse areas -> {}", samples.len(), out.display());
            Ok(())
        }
        Command::PnrReconstruct {
            r21,
            r10,
            s,
            counts_photon,
            counts_laser,
            subtract_background,
            bootstrap,
            out,
        } => {
            let s = ctx.f64(s, "s_success", 5.04e-4)?;
            let n_boot = ctx.u64(bootstrap, "bootstrap", 0)?;
            let dist = match (&counts_photon, &counts_laser) {
                (Some(photon), Some(laser)) => {
                    let mut photon_rec = read_count_record(photon)?;
                    let mut laser_rec = read_count_record(laser)?;
                    if subtract_background {
                        photon_rec = background_subtract(&photon_rec);
                        laser_rec = background_subtract(&laser_rec);
                    }
                    let boot = (n_boot > 0).then_some(BootstrapConfig {
                        n_resamples: n_boot as usize,
                        seed: ctx.seed,
                        ..BootstrapConfig::default()
                    });
                    reconstruct(&photon_rec, &laser_rec, s, boot)?
                }
                (None, None) => {
                    let ratios = MeasuredRatios {
                        twin_to_single: r21.ok_or_else(|| {
                            invalid("need --r21/--r10 or both count records".to_string())
                        })?,
                        single_to_vacuum: r10.ok_or_else(|| {
                            invalid("need --r21/--r10 or both count records".to_string())
                        })?,
                    };
                    reconstruct_from_ratios(&ratios, s, 2)?
                }
                _ => {
                    return Err(invalid(
                        "provide both --counts-photon and --counts-laser, or neither".to_string(),
                    ))
                }
            };
            println!(
                "p0 = {:.4}, p1 = {:.4}, p2 = {:.4}",
                dist.probabilities[0], dist.probabilities[1], dist.probabilities[2]
            );
            if let Some(out) = out {
                io::write_json(
                    &out,
                    &WithProvenance {
                        provenance: ctx.provenance(),
                        report: dist,
                    },
                )?;
            }
            Ok(())
        }
        Command::SpectraSim {
            center_uev,
            delta_fss_uev,
            binding,
            linewidth_x_uev,
            linewidth_xx_uev,
            intensity_ratio,
            principal_axis_deg,
            n_angles,
            energy_min_uev,
            energy_max_uev,
            energy_step_uev,
            noise,
            out,
        } => {
            let params = QuadrupletParams {
                center_uev: ctx.f64(center_uev, "center_uev", 0.0)?,
                delta_fss_uev: ctx.f64(delta_fss_uev, "delta_fss_uev", 51.0)?,
                binding: match binding {
                    BindingArg::Binding => BindingSign::Binding,
                    BindingArg::Antibinding => BindingSign::Antibinding,
                },
                linewidth_x_uev: ctx.f64(linewidth_x_uev, "linewidth_x_uev", 18.0)?,
                linewidth_xx_uev: ctx.f64(linewidth_xx_uev, "linewidth_xx_uev", 22.0)?,
                intensity_ratio_x_xx: ctx.f64(intensity_ratio, "intensity_ratio", 1.4)?,
                principal_axis_deg: ctx.f64(principal_axis_deg, "principal_axis_deg", 0.0)?,
                degeneracy_offset_uev: 0.0,
            };
            let n_angles = ctx.u64(n_angles, "n_angles", 36)?;
            let angles: Vec<f64> = (0..n_angles)
                .map(|k| k as f64 * 180.0 / n_angles as f64)
                .collect();
            let e_min = ctx.f64(energy_min_uev, "energy_min_uev", -150.0)?;
            let e_max = ctx.f64(energy_max_uev, "energy_max_uev", 150.0)?;
            let e_step = ctx.f64(energy_step_uev, "energy_step_uev", 0.5)?;
            if !(e_step > 0.0) || e_max <= e_min {
                return Err(invalid("bad energy grid".to_string()));
            }
            let n_e = ((e_max - e_min) / e_step).round() as usize + 1;
            let grid: Vec<f64> = (0..n_e).map(|k| e_min + k as f64 * e_step).collect();
            let noise = ctx.f64(noise, "noise_level", 2e-4)?;
            let map = synthesize_map(&params, &angles, &grid, noise, ctx.seed)?;
            io::write_spectral_map(&out, &map)?;
            ctx.write_sidecar(&out)?;
            println!(
                "{} spectra x {} energies -> {}",
                map.angles_deg.len(),
                map.energy_uev.len(),
                out.display()
            );
            Ok(())
        }
        Command::SpectraFit { map, out } => {
            let map = io::read_spectral_map(&map)?;
            let report = extract_fss(&map)?;
            println!(
                "delta_fss = {:.2} +- {:.2} ueV; H degeneracy coincides: {} ({} of {} fits used)",
                report.delta_fss_mean_uev,
                report.delta_fss_std_uev,
                report.degeneracy_coincides,
                report.n_fits_used,
                report.n_fits_total
            );
            io::write_json(
                &out,
                &WithProvenance {
                    provenance: ctx.provenance(),
                    report,
                },
            )
        }
        Command::Report { input, out, title } => {
            let rendered = render_csv(&input, title.as_deref())?;
            std::fs::write(&out, rendered)?;
            ctx.write_sidecar(&out)?;
            println!("-> {}", out.display());
            Ok(())
        }
    }
}

#[derive(Serialize, serde::Deserialize)]
struct HistogramMeta {
    bin_width_ps: i64,
    window_ps: i64,
    rate_a_hz: f64,
    rate_b_hz: f64,
    total_time_s: f64,
}

fn meta_path(hist: &Path) -> PathBuf {
    let mut name = hist.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    hist.with_file_name(name)
}

fn write_histogram_meta(path: &Path, hist: &CoincidenceHistogram) -> Result<()> {
    io::write_json(
        &meta_path(path),
        &HistogramMeta {
            bin_width_ps: hist.bin_width_ps,
            window_ps: hist.window_ps,
            rate_a_hz: hist.rate_a_hz,
            rate_b_hz: hist.rate_b_hz,
            total_time_s: hist.total_time_s,
        },
    )
}

fn read_histogram_with_meta(path: &Path) -> Result<CoincidenceHistogram> {
    let (_taus, counts) = io::read_histogram_counts(path)?;
    let meta_file = meta_path(path);
    let text = std::fs::read_to_string(&meta_file).map_err(|_| {
        Error::Format(format!(
            "{}: missing metadata sidecar (expected {})",
            path.display(),
            meta_file.display()
        ))
    })?;
    let meta: HistogramMeta = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", meta_file.display())))?;
    Ok(CoincidenceHistogram {
        bin_width_ps: meta.bin_width_ps,
        window_ps: meta.window_ps,
        counts,
        rate_a_hz: meta.rate_a_hz,
        rate_b_hz: meta.rate_b_hz,
        total_time_s: meta.total_time_s,
    })
}

fn read_count_record(path: &Path) -> Result<CountRecord> {
    let text = std::fs::read_to_string(path)?;
    // accept either a bare record or one wrapped with provenance
    #[derive(serde::Deserialize)]
    struct Wrapped {
        report: CountRecord,
    }
    serde_json::from_str::<CountRecord>(&text)
        .or_else(|_| serde_json::from_str::<Wrapped>(&text).map(|w| w.report))
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn write_samples(path: &Path, samples: &[f64]) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "area_au")?;
    for s in samples {
        writeln!(w, "{s}")?;
    }
    w.flush()?;
    Ok(())
}

fn render_csv(input: &Path, title: Option<&str>) -> Result<String> {
    let text = std::fs::read_to_string(input)?;
    let header = text.lines().next().unwrap_or("").trim();
    let title = title.unwrap_or_else(|| {
        input
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("report")
    });
    match header {
        "tau_ps,counts,g2" => {
            let mut counts = Vec::new();
            let mut g2 = Vec::new();
            for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
                let f: Vec<&str> = line.splitn(3, ',').collect();
                if f.len() != 3 {
                    return Err(Error::Format(format!("{}: bad row", input.display())));
                }
                let tau: f64 = f[0].parse().map_err(|_| bad_row(input))?;
                counts.push((tau, f[1].parse::<f64>().map_err(|_| bad_row(input))?));
                g2.push((tau, f[2].parse::<f64>().map_err(|_| bad_row(input))?));
            }
            let has_norm = g2.iter().any(|(_, v)| *v != 0.0);
            let series = if has_norm {
                vec![svg::Series {
                    label: "g2".into(),
                    points: g2,
                }]
            } else {
                vec![svg::Series {
                    label: "counts".into(),
                    points: counts,
                }]
            };
            Ok(svg::render(
                title,
                "tau (ps)",
                if has_norm { "g2" } else { "counts" },
                &series,
            ))
        }
        "tau_ps,g2" => {
            let mut pts = Vec::new();
            for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
                let (t, v) = line.split_once(',').ok_or_else(|| bad_row(input))?;
                pts.push((
                    t.parse::<f64>().map_err(|_| bad_row(input))?,
                    v.parse::<f64>().map_err(|_| bad_row(input))?,
                ));
            }
            Ok(svg::render(
                title,
                "tau (ps)",
                "g2",
                &[svg::Series {
                    label: "g2".into(),
                    points: pts,
                }],
            ))
        }
        "angle_deg,energy_ueV,intensity" => {
            let map = io::read_spectral_map(input)?;
            let series: Vec<svg::Series> = map
                .angles_deg
                .iter()
                .zip(&map.intensities)
                .map(|(a, row)| svg::Series {
                    label: format!("{a} deg"),
                    points: map
                        .energy_uev
                        .iter()
                        .copied()
                        .zip(row.iter().copied())
                        .collect(),
                })
                .collect();
            Ok(svg::render(title, "energy (ueV)", "intensity", &series))
        }
        other => Err(Error::Format(format!(
            "{}: unrecognized CSV header '{other}'",
            input.display()
        ))),
    }
}

fn bad_row(input: &Path) -> Error {
    Error::Format(format!("{}: bad row", input.display()))
}
