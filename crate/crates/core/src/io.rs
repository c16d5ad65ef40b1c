//! File formats: CSV for event/tag/histogram/curve/spectral data, JSON for
//! reports. All timestamps in files are integer picoseconds.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::correlator::CoincidenceHistogram;
use crate::error::{Error, Result};
use crate::mc::{Detector, EmissionEvent, Polarization, Species, TimeTag};
use crate::model::{G2Curve, G2Kind};
use crate::spectra::SpectralMap;

fn open_reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn open_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn expect_header(line: Option<std::io::Result<String>>, want: &str, path: &Path) -> Result<()> {
    match line {
        Some(Ok(l)) if l.trim() == want => Ok(()),
        Some(Ok(l)) => Err(Error::Format(format!(
            "{}: expected header '{want}', found '{l}'",
            path.display()
        ))),
        Some(Err(e)) => Err(e.into()),
        None => Err(Error::Format(format!("{}: empty file", path.display()))),
    }
}

fn bad_field(path: &Path, line_no: usize, what: &str) -> Error {
    Error::Format(format!("{}:{line_no}: {what}", path.display()))
}

// ---------------------------------------------------------------- events

pub fn write_events(path: &Path, events: &[EmissionEvent]) -> Result<()> {
    let mut w = open_writer(path)?;
    writeln!(w, "time_ps,species,polarization,pulse_index")?;
    for e in events {
        match e.pulse_index {
            Some(k) => writeln!(w, "{},{},{},{k}", e.time_ps, e.species, e.polarization)?,
            None => writeln!(w, "{},{},{},", e.time_ps, e.species, e.polarization)?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_events(path: &Path) -> Result<Vec<EmissionEvent>> {
    let r = open_reader(path)?;
    let mut lines = r.lines();
    expect_header(
        lines.next(),
        "time_ps,species,polarization,pulse_index",
        path,
    )?;
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(4, ',');
        let time_ps = parts
            .next()
            .and_then(|s| s.parse::<i64>().ok())
            .ok_or_else(|| bad_field(path, i + 2, "bad time_ps"))?;
        let species = match parts.next() {
            Some("X") => Species::X,
            Some("XX") => Species::Xx,
            _ => return Err(bad_field(path, i + 2, "bad species")),
        };
        let polarization = match parts.next() {
            Some("H") => Polarization::H,
            Some("V") => Polarization::V,
            _ => return Err(bad_field(path, i + 2, "bad polarization")),
        };
        let pulse_index = match parts.next() {
            Some("") | None => None,
            Some(s) => Some(
                s.parse::<u64>()
                    .map_err(|_| bad_field(path, i + 2, "bad pulse_index"))?,
            ),
        };
        events.push(EmissionEvent {
            time_ps,
            species,
            polarization,
            pulse_index,
        });
    }
    Ok(events)
}

// ---------------------------------------------------------------- tags

pub fn write_tags(path: &Path, tags: &[TimeTag]) -> Result<()> {
    let mut w = open_writer(path)?;
    writeln!(w, "time_ps,detector")?;
    for t in tags {
        writeln!(w, "{},{}", t.time_ps, t.detector)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tags(path: &Path) -> Result<Vec<TimeTag>> {
    let r = open_reader(path)?;
    let mut lines = r.lines();
    expect_header(lines.next(), "time_ps,detector", path)?;
    let mut tags = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (time, det) = line
            .split_once(',')
            .ok_or_else(|| bad_field(path, i + 2, "expected two fields"))?;
        let time_ps = time
            .parse::<i64>()
            .map_err(|_| bad_field(path, i + 2, "bad time_ps"))?;
        let detector = match det {
            "D0" => Detector::D0,
            "D1" => Detector::D1,
            _ => return Err(bad_field(path, i + 2, "bad detector")),
        };
        tags.push(TimeTag { time_ps, detector });
    }
    Ok(tags)
}

// ---------------------------------------------------------------- histograms

pub fn write_histogram(path: &Path, hist: &CoincidenceHistogram) -> Result<()> {
    let mut w = open_writer(path)?;
    writeln!(w, "tau_ps,counts,g2")?;
    let norm = hist.g2_normalization();
    for (i, &c) in hist.counts.iter().enumerate() {
        let g2 = if norm > 0.0 { c as f64 / norm } else { 0.0 };
        writeln!(w, "{},{c},{g2}", hist.tau_ps(i))?;
    }
    w.flush()?;
    Ok(())
}

/// Histograms round-trip through CSV with their counts; the acquisition
/// metadata travels in a sidecar JSON written by the CLI.
pub fn read_histogram_counts(path: &Path) -> Result<(Vec<i64>, Vec<u64>)> {
    let r = open_reader(path)?;
    let mut lines = r.lines();
    expect_header(lines.next(), "tau_ps,counts,g2", path)?;
    let mut taus = Vec::new();
    let mut counts = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let tau = parts
            .next()
            .and_then(|s| s.parse::<i64>().ok())
            .ok_or_else(|| bad_field(path, i + 2, "bad tau_ps"))?;
        let c = parts
            .next()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| bad_field(path, i + 2, "bad counts"))?;
        taus.push(tau);
        counts.push(c);
    }
    Ok((taus, counts))
}

// ---------------------------------------------------------------- curves

pub fn write_curve(path: &Path, curve: &G2Curve) -> Result<()> {
    let mut w = open_writer(path)?;
    writeln!(w, "tau_ps,g2")?;
    for (t, v) in curve.tau_ps.iter().zip(&curve.values) {
        writeln!(w, "{t},{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve(path: &Path, kind: G2Kind) -> Result<G2Curve> {
    let r = open_reader(path)?;
    let mut lines = r.lines();
    expect_header(lines.next(), "tau_ps,g2", path)?;
    let mut tau_ps = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| bad_field(path, i + 2, "expected two fields"))?;
        tau_ps.push(
            t.parse::<f64>()
                .map_err(|_| bad_field(path, i + 2, "bad tau_ps"))?,
        );
        values.push(
            v.parse::<f64>()
                .map_err(|_| bad_field(path, i + 2, "bad g2"))?,
        );
    }
    Ok(G2Curve {
        kind,
        tau_ps,
        values,
    })
}

// ---------------------------------------------------------------- spectra

pub fn write_spectral_map(path: &Path, map: &SpectralMap) -> Result<()> {
    let mut w = open_writer(path)?;
    writeln!(w, "angle_deg,energy_ueV,intensity")?;
    for (a, row) in map.angles_deg.iter().zip(&map.intensities) {
        for (e, v) in map.energy_uev.iter().zip(row) {
            writeln!(w, "{a},{e},{v}")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_spectral_map(path: &Path) -> Result<SpectralMap> {
    let r = open_reader(path)?;
    let mut lines = r.lines();
    expect_header(lines.next(), "angle_deg,energy_ueV,intensity", path)?;
    let mut angles: Vec<f64> = Vec::new();
    let mut energy: Vec<f64> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut first_row_done = false;
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let parse = |s: Option<&str>, what| -> Result<f64> {
            s.and_then(|x| x.parse::<f64>().ok())
                .ok_or_else(|| bad_field(path, i + 2, what))
        };
        let a = parse(parts.next(), "bad angle_deg")?;
        let e = parse(parts.next(), "bad energy_ueV")?;
        let v = parse(parts.next(), "bad intensity")?;
        if angles.last() != Some(&a) {
            angles.push(a);
            rows.push(Vec::new());
            if !energy.is_empty() {
                first_row_done = true;
            }
        }
        if !first_row_done {
            energy.push(e);
        }
        rows.last_mut().unwrap().push(v);
    }
    if rows.iter().any(|r| r.len() != energy.len()) {
        return Err(Error::Format(format!(
            "{}: ragged spectral map",
            path.display()
        )));
    }
    Ok(SpectralMap {
        angles_deg: angles,
        energy_uev: energy,
        intensities: rows,
    })
}

// ---------------------------------------------------------------- json

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = open_writer(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Format(format!("json: {e}")))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
