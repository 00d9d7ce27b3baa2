//! `NSTEER1` checkpoint container.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::steerer::{FreqMode, NeuralSteerer, SteererConfig, Variant};
use crate::container;
use crate::error::{Error, Result};
use crate::sigproc::{ArrayGeometry, FrequencyAxis};

pub const CHECKPOINT_MAGIC: &[u8] = b"NSTEER1\n";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ArrayDecl {
    name: String,
    len: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    variant: Variant,
    freq_mode: FreqMode,
    main_layers: Vec<usize>,
    phase_layers: Option<Vec<usize>>,
    num_channels: usize,
    num_bins: usize,
    sample_rate_hz: f64,
    omega0: f64,
    seed: u64,
    config: SteererConfig,
    geometry: ArrayGeometry,
    training: serde_json::Value,
    arrays: Vec<ArrayDecl>,
}

/// A model plus arbitrary training metadata and named auxiliary arrays
/// (optimizer moments, best-so-far parameters, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: NeuralSteerer,
    pub training: serde_json::Value,
    pub extra: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn extra(&self, name: &str) -> Option<&[f64]> {
        self.extra.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.model;
        let mut arrays = Vec::new();
        let mut payload: Vec<f64> = Vec::with_capacity(m.num_params());
        let mut push = |name: String, values: &mut dyn Iterator<Item = f64>| {
            let before = payload.len();
            payload.extend(values);
            arrays.push(ArrayDecl {
                name,
                len: payload.len() - before,
            });
        };
        let nets = std::iter::once(("main", &m.main_net)).chain(m.phase_net.iter().map(|p| ("phase", p)));
        for (prefix, net) in nets {
            for (l, (w, b)) in net.weights.iter().zip(&net.biases).enumerate() {
                push(format!("{prefix}.w{l}"), &mut w.iter().copied());
                push(format!("{prefix}.b{l}"), &mut b.iter().copied());
            }
        }
        push("tau".into(), &mut std::iter::once(m.tau));
        push("mic_positions".into(), &mut m.mic_positions.iter().flatten().copied());
        for (name, values) in &self.extra {
            push(name.clone(), &mut values.iter().copied());
        }
        let header = Header {
            format_version: CHECKPOINT_VERSION,
            variant: m.config.variant,
            freq_mode: m.config.freq_mode,
            main_layers: m.main_net.layer_sizes.clone(),
            phase_layers: m.phase_net.as_ref().map(|p| p.layer_sizes.clone()),
            num_channels: m.num_channels(),
            num_bins: m.axis.num_bins,
            sample_rate_hz: m.axis.sample_rate_hz,
            omega0: m.config.omega0,
            seed: m.config.seed,
            config: m.config.clone(),
            geometry: m.geometry.clone(),
            training: self.training.clone(),
            arrays,
        };
        let bytes: Vec<u8> = payload.iter().flat_map(|v| v.to_le_bytes()).collect();
        container::encode(CHECKPOINT_MAGIC, &header, &bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, offset): (Header, usize) = container::decode(bytes, CHECKPOINT_MAGIC)?;
        if header.format_version != CHECKPOINT_VERSION {
            return Err(Error::format(
                CHECKPOINT_MAGIC.len() as u64,
                format!("unsupported checkpoint version {}", header.format_version),
            ));
        }
        let axis = FrequencyAxis::new(header.sample_rate_hz, header.num_bins)
            .map_err(|e| Error::format(offset as u64, e.to_string()))?;
        let mut model = NeuralSteerer::new(header.config.clone(), header.geometry.clone(), axis)
            .map_err(|e| Error::format(offset as u64, e.to_string()))?;
        if model.num_channels() != header.num_channels
            || model.main_net.layer_sizes != header.main_layers
            || model.phase_net.as_ref().map(|p| p.layer_sizes.clone()) != header.phase_layers
        {
            return Err(Error::format(offset as u64, "header shapes disagree with model config"));
        }
        let total: usize = header.arrays.iter().map(|a| a.len).sum();
        let expected_bytes = offset + 8 * total;
        if bytes.len() != expected_bytes {
            return Err(Error::format(
                bytes.len().min(expected_bytes) as u64,
                format!(
                    "payload holds {} bytes, header declares {}",
                    bytes.len() - offset,
                    8 * total
                ),
            ));
        }
        let values = container::read_f64s(bytes, offset, total)?;
        let n_model = model.num_params();
        let model_arrays: usize = header
            .arrays
            .iter()
            .take_while(|a| a.name != "mic_positions")
            .map(|a| a.len)
            .sum::<usize>()
            + 3 * header.num_channels;
        if model_arrays != n_model || total < n_model {
            return Err(Error::format(offset as u64, "model arrays have unexpected sizes"));
        }
        model.set_flat_params(&values[..n_model])?;
        let mut extra = Vec::new();
        let mut pos = n_model;
        let first_extra = header
            .arrays
            .iter()
            .position(|a| a.name == "mic_positions")
            .map_or(header.arrays.len(), |p| p + 1);
        for decl in &header.arrays[first_extra..] {
            extra.push((decl.name.clone(), values[pos..pos + decl.len].to_vec()));
            pos += decl.len;
        }
        Ok(Self {
            model,
            training: header.training,
            extra,
        })
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    std::fs::write(path, ckpt.to_bytes()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}
