//! Feature-map export: a text header followed by the flat float32-LE tensor,
//! intended for diffing feature pipelines across implementations.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{FeatureMap, PreprocSettings};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC_LINE: &str = "millmon-features v1";

/// A parsed feature export.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExport {
    pub stage: String,
    pub alpha: f64,
    pub eps: f64,
    pub data: Tensor,
}

/// Write a float-stage feature map.
///
/// Header lines: magic, `stage`, `shape`, `alpha`, `eps`, `data float32-le`,
/// then a blank line and the raw tensor.
pub fn write_feature_map(
    path: &Path,
    features: &FeatureMap,
    settings: &PreprocSettings,
) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{MAGIC_LINE}")?;
    writeln!(out, "stage log")?;
    writeln!(out, "shape {}", features.data.shape_string())?;
    writeln!(out, "alpha {}", settings.tukey_alpha)?;
    writeln!(out, "eps {}", settings.log_eps)?;
    writeln!(out, "data float32-le")?;
    writeln!(out)?;
    for &v in features.data.data() {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_feature_map(path: &Path) -> Result<FeatureExport> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;

    // Header ends at the first blank line.
    let header_end = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| Error::malformed(path, "missing header terminator"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::malformed(path, "header is not UTF-8"))?;
    let payload = &bytes[header_end + 2..];

    let mut lines = header.lines();
    if lines.next() != Some(MAGIC_LINE) {
        return Err(Error::malformed(path, "bad magic line"));
    }
    let mut stage = None;
    let mut shape: Option<Vec<usize>> = None;
    let mut alpha = None;
    let mut eps = None;
    for line in lines {
        let (key, value) = line
            .split_once(' ')
            .ok_or_else(|| Error::malformed(path, format!("bad header line {line:?}")))?;
        match key {
            "stage" => stage = Some(value.to_string()),
            "shape" => {
                let dims: std::result::Result<Vec<usize>, _> =
                    value.split('x').map(str::parse).collect();
                shape = Some(
                    dims.map_err(|_| Error::malformed(path, format!("bad shape {value:?}")))?,
                );
            }
            "alpha" => {
                alpha = Some(value.parse().map_err(|_| {
                    Error::malformed(path, format!("bad alpha {value:?}"))
                })?)
            }
            "eps" => {
                eps = Some(
                    value
                        .parse()
                        .map_err(|_| Error::malformed(path, format!("bad eps {value:?}")))?,
                )
            }
            "data" => {
                if value != "float32-le" {
                    return Err(Error::malformed(path, format!("bad data encoding {value:?}")));
                }
            }
            _ => return Err(Error::malformed(path, format!("unknown header key {key:?}"))),
        }
    }
    let stage = stage.ok_or_else(|| Error::malformed(path, "stage missing"))?;
    let shape = shape.ok_or_else(|| Error::malformed(path, "shape missing"))?;
    let alpha = alpha.ok_or_else(|| Error::malformed(path, "alpha missing"))?;
    let eps = eps.ok_or_else(|| Error::malformed(path, "eps missing"))?;

    let expected: usize = shape.iter().product();
    if payload.len() != expected * 4 {
        return Err(Error::malformed(
            path,
            format!("payload is {} bytes, expected {}", payload.len(), expected * 4),
        ));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(FeatureExport {
        stage,
        alpha,
        eps,
        data: Tensor::from_vec(&shape, data),
    })
}
