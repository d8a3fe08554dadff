//! File formats: signal JSON, values CSV, batch CSV, tensor JSON and the
//! tabular outputs of the experiments.
//!
//! CSV floats are written with 17 significant digits and JSON floats in
//! shortest round-trip form, so reading a file back yields identical bits.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{invalid, MraError, Result};
use crate::experiments::RateCurve;
use crate::model::{ModelConfig, Observations};
use crate::signal::{GroupKind, Signal};

/// Header of the batch CSV format.
pub const BATCH_HEADER: [&str; 4] = ["sigma", "L", "group", "seed"];

/// Header of the rate-curve CSV format.
pub const RATE_HEADER: [&str; 6] = ["axis_value", "n", "sigma", "trials", "risk_mean", "risk_stderr"];

/// A float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| MraError::Parse(format!("{what}: {field:?}: {e}")))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    from_json(&fs::read_to_string(path)?)
}

pub fn read_signal(path: impl AsRef<Path>) -> Result<Signal> {
    read_json(path)
}

pub fn write_signal(path: impl AsRef<Path>, signal: &Signal) -> Result<()> {
    write_json(path, signal)
}

/// Values-domain CSV: one row of `L` numbers.
pub fn write_values_csv<W: Write>(out: W, signal: &Signal) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(signal.values().iter().map(|v| fmt_f64(*v)))?;
    w.flush()?;
    Ok(())
}

pub fn read_values_csv<R: Read>(input: R) -> Result<Signal> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = r.records();
    let record = records
        .next()
        .ok_or_else(|| MraError::Parse("empty values CSV".into()))??;
    if records.next().is_some() {
        return Err(MraError::Parse("values CSV must have exactly one row".into()));
    }
    let values = record
        .iter()
        .map(|f| parse_f64(f, "signal value"))
        .collect::<Result<Vec<_>>>()?;
    Signal::from_values(values)
}

/// Batch CSV: the header `sigma,L,group,seed`, one row with those values,
/// then one row of `L` numbers per observation.
pub fn write_batch_csv<W: Write>(out: W, obs: &Observations) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_writer(out);
    let c = obs.config();
    w.write_record(BATCH_HEADER)?;
    w.write_record([fmt_f64(c.sigma), c.len.to_string(), c.group.to_string(), c.seed.to_string()])?;
    for row in obs.rows() {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_batch_csv<R: Read>(input: R) -> Result<Observations> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| MraError::Parse("empty batch CSV".into()))??;
    if header.iter().map(str::trim).ne(BATCH_HEADER) {
        return Err(MraError::Parse(format!(
            "batch CSV header must be {}",
            BATCH_HEADER.join(",")
        )));
    }
    let meta = records
        .next()
        .ok_or_else(|| MraError::Parse("batch CSV lacks its configuration row".into()))??;
    if meta.len() != 4 {
        return Err(MraError::Parse("configuration row must have 4 fields".into()));
    }
    let sigma = parse_f64(&meta[0], "sigma")?;
    let len: usize = meta[1]
        .trim()
        .parse()
        .map_err(|e| MraError::Parse(format!("L: {e}")))?;
    let group: GroupKind = meta[2].trim().parse()?;
    let seed: u64 = meta[3]
        .trim()
        .parse()
        .map_err(|e| MraError::Parse(format!("seed: {e}")))?;
    let config = ModelConfig::new(len, sigma, group, seed)?;
    let rows = records
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec?;
            if rec.len() != len {
                return Err(MraError::Parse(format!(
                    "observation {i} has {} fields, expected {len}",
                    rec.len()
                )));
            }
            rec.iter().map(|f| parse_f64(f, "observation")).collect()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Observations::new(config, rows)
}

pub fn read_batch(path: impl AsRef<Path>) -> Result<Observations> {
    read_batch_csv(fs::File::open(path)?)
}

pub fn write_batch(path: impl AsRef<Path>, obs: &Observations) -> Result<()> {
    write_batch_csv(fs::File::create(path)?, obs)
}

/// `m,delta_norm` rows.
pub fn write_delta_norms_csv<W: Write>(out: W, norms: &[(usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "delta_norm"])?;
    for (m, d) in norms {
        w.write_record([m.to_string(), fmt_f64(*d)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_delta_norms_csv<R: Read>(input: R) -> Result<Vec<(usize, f64)>> {
    let mut r = csv::Reader::from_reader(input);
    r.records()
        .map(|rec| {
            let rec = rec?;
            if rec.len() != 2 {
                return invalid("delta-norm rows have two fields");
            }
            let m = rec[0].trim().parse().map_err(|e| MraError::Parse(format!("m: {e}")))?;
            Ok((m, parse_f64(&rec[1], "delta_norm")?))
        })
        .collect()
}

/// One row per grid point: `axis_value,n,sigma,trials,risk_mean,risk_stderr`.
pub fn write_rate_csv<W: Write>(out: W, curve: &RateCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RATE_HEADER)?;
    for p in &curve.points {
        let axis_value = match curve.axis {
            crate::experiments::RateAxis::Sigma => fmt_f64(p.sigma),
            crate::experiments::RateAxis::N => p.n.to_string(),
        };
        w.write_record([
            axis_value,
            p.n.to_string(),
            fmt_f64(p.sigma),
            p.trials.to_string(),
            fmt_f64(p.risk_mean),
            fmt_f64(p.risk_stderr),
        ])?;
    }
    w.flush()?;
    Ok(())
}
