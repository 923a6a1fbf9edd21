//! On-disk formats for recordings and dataset manifests.
//!
//! Recordings are interleaved little-endian float32 triplets (one x/y/z
//! triple per time step) with a text sidecar `<file>.meta` carrying the
//! sample rate and axis order. Manifests are line-oriented text: one sample
//! per line with path, label, and origin fields, tab-separated; paths are
//! resolved relative to the manifest's directory.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{Label, Origin, TimeSeries, TimeSeriesSample};
use crate::error::{Error, Result};

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".meta");
    PathBuf::from(os)
}

/// Write a recording as float32-LE triplets plus its metadata sidecar.
pub fn write_recording(path: &Path, series: &TimeSeries) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    for i in 0..series.len() {
        for axis in 0..3 {
            out.write_all(&(series.axis(axis)[i] as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    fs::write(
        sidecar_path(path),
        format!("sample_rate {}\naxes x y z\n", series.sample_rate()),
    )?;
    Ok(())
}

/// Read a recording written by [`write_recording`].
pub fn read_recording(path: &Path) -> Result<TimeSeries> {
    let meta_path = sidecar_path(path);
    let meta = fs::read_to_string(&meta_path)
        .map_err(|e| Error::malformed(&meta_path, format!("missing sidecar: {e}")))?;
    let mut sample_rate: Option<u32> = None;
    for line in meta.lines() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("sample_rate") => {
                let value = parts
                    .next()
                    .ok_or_else(|| Error::malformed(&meta_path, "sample_rate without value"))?;
                sample_rate = Some(value.parse().map_err(|_| {
                    Error::malformed(&meta_path, format!("bad sample_rate {value:?}"))
                })?);
            }
            Some("axes") => {
                let order: Vec<&str> = parts.collect();
                if order != ["x", "y", "z"] {
                    return Err(Error::malformed(
                        &meta_path,
                        format!("unsupported axis order {order:?}"),
                    ));
                }
            }
            _ => {}
        }
    }
    let sample_rate =
        sample_rate.ok_or_else(|| Error::malformed(&meta_path, "sample_rate missing"))?;

    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 12 != 0 {
        return Err(Error::malformed(
            path,
            format!("{} bytes is not a whole number of f32 triplets", bytes.len()),
        ));
    }
    let steps = bytes.len() / 12;
    let mut axes: [Vec<f64>; 3] = [
        Vec::with_capacity(steps),
        Vec::with_capacity(steps),
        Vec::with_capacity(steps),
    ];
    for step in 0..steps {
        for (axis, dst) in axes.iter_mut().enumerate() {
            let off = step * 12 + axis * 4;
            let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
            dst.push(v as f64);
        }
    }
    TimeSeries::new(axes, sample_rate)
}

/// One manifest line: a sample file plus its label and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Label,
    pub origin: Origin,
}

/// Write a dataset manifest. Paths are stored as given.
pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut text = String::from("# path\tlabel\tsource\tsegment\twindow\n");
    for e in entries {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            e.path.display(),
            e.label,
            e.origin.source,
            e.origin.segment,
            e.origin.window
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Read a manifest, resolving relative sample paths against its directory.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::malformed(
                path,
                format!("line {}: expected 5 tab-separated fields", lineno + 1),
            ));
        }
        let sample_path = PathBuf::from(fields[0]);
        let sample_path = if sample_path.is_relative() {
            base.join(sample_path)
        } else {
            sample_path
        };
        let parse_u32 = |s: &str, what: &str| -> Result<u32> {
            s.parse()
                .map_err(|_| Error::malformed(path, format!("line {}: bad {what}", lineno + 1)))
        };
        entries.push(ManifestEntry {
            path: sample_path,
            label: fields[1].parse()?,
            origin: Origin {
                source: fields[2].to_string(),
                segment: parse_u32(fields[3], "segment index")?,
                window: parse_u32(fields[4], "window index")?,
            },
        });
    }
    Ok(entries)
}

/// Load the sample a manifest entry points at.
pub fn read_sample(entry: &ManifestEntry) -> Result<TimeSeriesSample> {
    let series = read_recording(&entry.path)?;
    TimeSeriesSample::new(series, entry.label, entry.origin.clone())
}

/// Write a dataset of 1-second samples into a directory and produce its
/// manifest at `<dir>/manifest.tsv`. Returns the manifest path.
pub fn write_dataset(dir: &Path, samples: &[TimeSeriesSample]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(samples.len());
    for (i, sample) in samples.iter().enumerate() {
        let name = format!("sample_{i:05}_{}.f32", sample.label());
        write_recording(&dir.join(&name), sample.series())?;
        entries.push(ManifestEntry {
            path: PathBuf::from(name),
            label: sample.label(),
            origin: sample.origin().clone(),
        });
    }
    let manifest = dir.join("manifest.tsv");
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}
