//! Grid datasets, the synthetic ground-truth generator, the `NSVGRID1` file
//! format, experiment splits and batching.

pub mod batch;
pub mod io;
pub mod split;
pub mod synth;

use num_complex::{Complex32, Complex64 as C64};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigproc::{ArrayGeometry, ComplexSpectrum, DoA, FrequencyAxis};

pub use batch::BatchIterator;
pub use io::{load_dataset, save_dataset};
pub use split::{make_split, Split, SplitMode, SplitSpec};
pub use synth::{generate_synthetic, SyntheticScene, SyntheticSceneConfig};

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Synthetic { scene: SyntheticSceneConfig },
    Ingested { source: String },
}

/// Complex steering measurements on an (azimuth × elevation) grid, stored
/// `[azimuth][elevation][channel][bin]` at 32-bit precision (the file
/// precision, so save/load is lossless).
#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasurementSet {
    pub azimuths: Vec<f64>,
    pub elevations: Vec<f64>,
    pub axis: FrequencyAxis,
    pub geometry: ArrayGeometry,
    pub data: Vec<Complex32>,
    pub provenance: Provenance,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl GridMeasurementSet {
    pub fn new(
        azimuths: Vec<f64>,
        elevations: Vec<f64>,
        axis: FrequencyAxis,
        geometry: ArrayGeometry,
        data: Vec<Complex32>,
        provenance: Provenance,
    ) -> Result<Self> {
        let set = Self {
            azimuths,
            elevations,
            axis,
            geometry,
            data,
            provenance,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.azimuths.is_empty() || self.elevations.is_empty() {
            return Err(Error::Data("empty grid".into()));
        }
        if !strictly_increasing(&self.azimuths) || !strictly_increasing(&self.elevations) {
            return Err(Error::Data("grid axes must be strictly increasing".into()));
        }
        let az_ok = self
            .azimuths
            .iter()
            .all(|a| (0.0..2.0 * std::f64::consts::PI).contains(a));
        let el_ok = self.elevations.iter().all(|e| e.abs() <= std::f64::consts::FRAC_PI_2);
        if !az_ok || !el_ok {
            return Err(Error::Data("grid angles out of range".into()));
        }
        let expected = self.azimuths.len() * self.elevations.len() * self.num_channels() * self.axis.num_bins;
        if self.data.len() != expected {
            return Err(Error::Data(format!(
                "tensor holds {} values, axes imply {expected}",
                self.data.len()
            )));
        }
        if self.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Data("tensor contains NaN or Inf".into()));
        }
        Ok(())
    }

    pub fn num_azimuths(&self) -> usize {
        self.azimuths.len()
    }

    pub fn num_elevations(&self) -> usize {
        self.elevations.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.azimuths.len() * self.elevations.len()
    }

    pub fn num_channels(&self) -> usize {
        self.geometry.num_mics()
    }

    /// Node index of grid cell `(a, e)`: `a · E + e`.
    pub fn node_index(&self, a: usize, e: usize) -> usize {
        a * self.elevations.len() + e
    }

    pub fn node_coords(&self, node: usize) -> (usize, usize) {
        (node / self.elevations.len(), node % self.elevations.len())
    }

    pub fn node_doa(&self, node: usize) -> DoA {
        let (a, e) = self.node_coords(node);
        DoA {
            azimuth: self.azimuths[a],
            elevation: self.elevations[e],
        }
    }

    fn offset(&self, node: usize, channel: usize) -> usize {
        let f = self.axis.num_bins;
        (node * self.num_channels() + channel) * f
    }

    pub fn value(&self, node: usize, channel: usize, bin: usize) -> C64 {
        let z = self.data[self.offset(node, channel) + bin];
        C64::new(z.re as f64, z.im as f64)
    }

    pub fn channel_values(&self, node: usize, channel: usize) -> Vec<C64> {
        let start = self.offset(node, channel);
        self.data[start..start + self.axis.num_bins]
            .iter()
            .map(|z| C64::new(z.re as f64, z.im as f64))
            .collect()
    }

    pub fn channel_spectrum(&self, node: usize, channel: usize) -> ComplexSpectrum {
        ComplexSpectrum {
            values: self.channel_values(node, channel),
            axis: self.axis,
        }
    }

    pub fn node_spectra(&self, node: usize) -> Vec<ComplexSpectrum> {
        (0..self.num_channels())
            .map(|i| self.channel_spectrum(node, i))
            .collect()
    }

    /// The synthetic scene behind this dataset, if any.
    pub fn scene(&self) -> Option<SyntheticScene> {
        match &self.provenance {
            Provenance::Synthetic { scene } => SyntheticScene::new(scene.clone(), self.axis.sample_rate_hz).ok(),
            Provenance::Ingested { .. } => None,
        }
    }

    /// Restriction to a rectangular sub-grid given by sorted axis indices.
    pub fn subgrid(&self, az_idx: &[usize], el_idx: &[usize]) -> Result<Self> {
        if az_idx.iter().any(|&a| a >= self.num_azimuths()) || el_idx.iter().any(|&e| e >= self.num_elevations()) {
            return Err(Error::arg("sub-grid index out of range"));
        }
        let f = self.axis.num_bins;
        let ch = self.num_channels();
        let mut data = Vec::with_capacity(az_idx.len() * el_idx.len() * ch * f);
        for &a in az_idx {
            for &e in el_idx {
                let start = self.offset(self.node_index(a, e), 0);
                data.extend_from_slice(&self.data[start..start + ch * f]);
            }
        }
        Self::new(
            az_idx.iter().map(|&a| self.azimuths[a]).collect(),
            el_idx.iter().map(|&e| self.elevations[e]).collect(),
            self.axis,
            self.geometry.clone(),
            data,
            self.provenance.clone(),
        )
    }
}
