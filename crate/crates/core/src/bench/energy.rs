//! Shunt-resistor energy model.
//!
//! A shunt resistor sits in the supply path; two probes sample `V1` (before)
//! and `V2` (after, the device supply). Then `I_DD[t] = (V1[t] - V2[t]) / R`,
//! `P_avg = V_DD,avg · I_DD,avg`, and energy per inference is
//! `EPI = P_avg · t_infer`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Paired probe voltages across a shunt resistor.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    v1: Vec<f64>,
    v2: Vec<f64>,
    sample_rate: f64,
    r_shunt: f64,
}

impl PowerTrace {
    /// Default trace sample rate in Hz.
    pub const DEFAULT_SAMPLE_RATE: f64 = 10_000.0;
    /// Default shunt resistance in ohms.
    pub const DEFAULT_R_SHUNT: f64 = 10.0;

    pub fn new(v1: Vec<f64>, v2: Vec<f64>, sample_rate: f64, r_shunt: f64) -> Result<Self> {
        if v1.len() != v2.len() {
            return Err(Error::shape(
                "equal-length probe series",
                format!("{}/{}", v1.len(), v2.len()),
            ));
        }
        if v1.is_empty() {
            return Err(Error::EmptyInput("power trace"));
        }
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        if !(r_shunt > 0.0) {
            return Err(Error::InvalidConfig(
                "shunt resistance must be positive".into(),
            ));
        }
        for (a, b) in v1.iter().zip(&v2) {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::NonFinite("power trace"));
            }
            if a < b {
                return Err(Error::InvalidConfig(
                    "v1 must not drop below v2 for a sourcing supply".into(),
                ));
            }
        }
        Ok(PowerTrace {
            v1,
            v2,
            sample_rate,
            r_shunt,
        })
    }

    /// Constant-voltage trace of `n` samples (mainly for tests and demos).
    pub fn constant(v1: f64, v2: f64, n: usize, sample_rate: f64, r_shunt: f64) -> Result<Self> {
        PowerTrace::new(vec![v1; n], vec![v2; n], sample_rate, r_shunt)
    }

    pub fn len(&self) -> usize {
        self.v1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v1.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn r_shunt(&self) -> f64 {
        self.r_shunt
    }

    /// Write as the two-column CSV trace format: a header line carrying
    /// sample rate and shunt value, a column header, then `v1,v2` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = format!(
            "sample_rate_hz={};r_shunt_ohm={}\nv1,v2\n",
            self.sample_rate, self.r_shunt
        );
        for (a, b) in self.v1.iter().zip(&self.v2) {
            text.push_str(&format!("{a},{b}\n"));
        }
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::malformed(path, "empty trace file"))?;
        let mut sample_rate = None;
        let mut r_shunt = None;
        for field in header.split(';') {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::malformed(path, format!("bad header field {field:?}")))?;
            let parsed: f64 = value
                .parse()
                .map_err(|_| Error::malformed(path, format!("bad value {value:?}")))?;
            match key {
                "sample_rate_hz" => sample_rate = Some(parsed),
                "r_shunt_ohm" => r_shunt = Some(parsed),
                _ => return Err(Error::malformed(path, format!("unknown header key {key:?}"))),
            }
        }
        let sample_rate =
            sample_rate.ok_or_else(|| Error::malformed(path, "sample_rate_hz missing"))?;
        let r_shunt = r_shunt.ok_or_else(|| Error::malformed(path, "r_shunt_ohm missing"))?;
        match lines.next() {
            Some("v1,v2") => {}
            other => {
                return Err(Error::malformed(
                    path,
                    format!("expected column header 'v1,v2', got {other:?}"),
                ))
            }
        }
        let mut v1 = Vec::new();
        let mut v2 = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| Error::malformed(path, format!("row {}: expected v1,v2", i + 3)))?;
            v1.push(a.parse().map_err(|_| {
                Error::malformed(path, format!("row {}: bad v1 {a:?}", i + 3))
            })?);
            v2.push(b.parse().map_err(|_| {
                Error::malformed(path, format!("row {}: bad v2 {b:?}", i + 3))
            })?);
        }
        PowerTrace::new(v1, v2, sample_rate, r_shunt)
    }
}

/// Derived supply/energy figures for one inference duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    /// Average supply voltage in volts (mean of V2).
    pub vdd_avg: f64,
    /// Average supply current in amperes.
    pub idd_avg: f64,
    /// Average power in watts.
    pub p_avg: f64,
    /// Energy per inference in joules.
    pub epi: f64,
    /// Inference duration in seconds.
    pub t_infer: f64,
}

/// Evaluate the energy model over a trace for a given inference time.
pub fn energy_from_trace(trace: &PowerTrace, t_infer: f64) -> Result<EnergyReport> {
    if !(t_infer > 0.0 && t_infer.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "t_infer must be positive, got {t_infer}"
        )));
    }
    let n = trace.len() as f64;
    let vdd_avg = trace.v2.iter().sum::<f64>() / n;
    let idd_avg = trace
        .v1
        .iter()
        .zip(&trace.v2)
        .map(|(a, b)| (a - b) / trace.r_shunt)
        .sum::<f64>()
        / n;
    let p_avg = vdd_avg * idd_avg;
    Ok(EnergyReport {
        vdd_avg,
        idd_avg,
        p_avg,
        epi: p_avg * t_infer,
        t_infer,
    })
}
