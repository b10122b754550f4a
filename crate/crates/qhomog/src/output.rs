//! CSV and JSON writers. Floats are written with 17 significant digits so
//! reruns can be compared byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use qhomog_core::hilbert::CMatrix;

use crate::ensemble::{Distance, EnsembleResult};
use crate::sweep::SweepTable;

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer(path: &Path) -> std::io::Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

fn finish(mut w: csv::Writer<File>) -> std::io::Result<()> {
    w.flush()
}

fn io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// `time, observable_name, mean, stderr`
pub fn write_observables(path: &Path, result: &EnsembleResult) -> std::io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["time", "observable_name", "mean", "stderr"])
        .map_err(io)?;
    for (k, &t) in result.times.iter().enumerate() {
        for obs in &result.observables {
            w.write_record([
                float(t),
                obs.name.clone(),
                float(obs.mean[k]),
                float(obs.stderr[k]),
            ])
            .map_err(io)?;
        }
    }
    finish(w)
}

/// `time, mean_norm2, stderr`
pub fn write_norms(path: &Path, result: &EnsembleResult) -> std::io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["time", "mean_norm2", "stderr"])
        .map_err(io)?;
    for (k, &t) in result.times.iter().enumerate() {
        w.write_record([
            float(t),
            float(result.norm2_mean[k]),
            float(result.norm2_stderr[k]),
        ])
        .map_err(io)?;
    }
    finish(w)
}

/// `tau, B, gamma_eff, time, trace_distance, stderr`
pub fn write_sweep(path: &Path, table: &SweepTable) -> std::io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["tau", "B", "gamma_eff", "time", "trace_distance", "stderr"])
        .map_err(io)?;
    for r in &table.rows {
        w.write_record([
            float(r.tau),
            float(r.b),
            float(r.gamma_eff),
            float(r.time),
            float(r.distance),
            float(r.stderr),
        ])
        .map_err(io)?;
    }
    finish(w)
}

/// `time, regime_a, regime_b, trace_distance, stderr`
pub fn write_distances(
    path: &Path,
    rows: &[(String, String, Vec<Distance>)],
) -> std::io::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["time", "regime_a", "regime_b", "trace_distance", "stderr"])
        .map_err(io)?;
    for (a, b, ds) in rows {
        for d in ds {
            w.write_record([
                float(d.time),
                a.clone(),
                b.clone(),
                float(d.distance),
                float(d.stderr),
            ])
            .map_err(io)?;
        }
    }
    finish(w)
}

#[derive(Serialize)]
struct RhoEntry {
    time: f64,
    real: Vec<Vec<f64>>,
    imag: Vec<Vec<f64>>,
}

fn split(m: &CMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = m.dim();
    let re = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)].re).collect())
        .collect();
    let im = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)].im).collect())
        .collect();
    (re, im)
}

/// `[{time, real, imag}, ...]` with row-major nested arrays.
pub fn write_rho(path: &Path, result: &EnsembleResult) -> std::io::Result<()> {
    let entries: Vec<RhoEntry> = result
        .times
        .iter()
        .zip(&result.mean_rho)
        .map(|(&time, m)| {
            let (real, imag) = split(m);
            RhoEntry { time, real, imag }
        })
        .collect();
    write_json(path, &entries)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::other)?;
    w.write_all(b"\n")?;
    w.flush()
}
