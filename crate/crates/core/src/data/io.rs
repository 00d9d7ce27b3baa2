//! `NSVGRID1` dataset files: magic line, JSON header line, then the tensor as
//! little-endian f32 `(re, im)` pairs in `[az, el, ch, freq]` row-major order.

use std::path::Path;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use super::{GridMeasurementSet, Provenance};
use crate::container;
use crate::error::{Error, Result};
use crate::sigproc::{ArrayGeometry, FrequencyAxis};

pub const DATASET_MAGIC: &[u8] = b"NSVGRID1\n";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    azimuths: Vec<f64>,
    elevations: Vec<f64>,
    sample_rate_hz: f64,
    num_bins: usize,
    num_channels: usize,
    geometry: ArrayGeometry,
    provenance: Provenance,
}

pub fn dataset_to_bytes(set: &GridMeasurementSet) -> Result<Vec<u8>> {
    let header = Header {
        format_version: DATASET_VERSION,
        azimuths: set.azimuths.clone(),
        elevations: set.elevations.clone(),
        sample_rate_hz: set.axis.sample_rate_hz,
        num_bins: set.axis.num_bins,
        num_channels: set.num_channels(),
        geometry: set.geometry.clone(),
        provenance: set.provenance.clone(),
    };
    let mut payload = Vec::with_capacity(set.data.len() * 8);
    for z in &set.data {
        payload.extend_from_slice(&z.re.to_le_bytes());
        payload.extend_from_slice(&z.im.to_le_bytes());
    }
    container::encode(DATASET_MAGIC, &header, &payload)
}

pub fn dataset_from_bytes(bytes: &[u8]) -> Result<GridMeasurementSet> {
    let (header, offset): (Header, usize) = container::decode(bytes, DATASET_MAGIC)?;
    if header.format_version != DATASET_VERSION {
        return Err(Error::format(
            DATASET_MAGIC.len() as u64,
            format!("unsupported dataset version {}", header.format_version),
        ));
    }
    if header.num_channels != header.geometry.num_mics() {
        return Err(Error::format(
            DATASET_MAGIC.len() as u64,
            format!(
                "header declares {} channels but geometry has {} microphones",
                header.num_channels,
                header.geometry.num_mics()
            ),
        ));
    }
    let axis = FrequencyAxis::new(header.sample_rate_hz, header.num_bins)
        .map_err(|e| Error::format(DATASET_MAGIC.len() as u64, e.to_string()))?;
    let count = header.azimuths.len() * header.elevations.len() * header.num_channels * header.num_bins;
    let payload = &bytes[offset..];
    if payload.len() != count * 8 {
        return Err(Error::format(
            (offset + payload.len().min(count * 8)) as u64,
            format!(
                "payload holds {} bytes but header declares {count} complex values ({} bytes)",
                payload.len(),
                count * 8
            ),
        ));
    }
    let data: Vec<Complex32> = payload
        .chunks_exact(8)
        .map(|c| {
            Complex32::new(
                f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
            )
        })
        .collect();
    if let Some(bad) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::format((offset + bad * 8) as u64, "non-finite value in tensor"));
    }
    GridMeasurementSet::new(
        header.azimuths,
        header.elevations,
        axis,
        header.geometry,
        data,
        header.provenance,
    )
    .map_err(|e| Error::format(offset as u64, e.to_string()))
}

pub fn save_dataset(set: &GridMeasurementSet, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, dataset_to_bytes(set)?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<GridMeasurementSet> {
    dataset_from_bytes(&std::fs::read(path)?)
}
