use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use ndarray::{s, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::head::{head_angle, head_angle_grad, head_decode, HEAD_OFFSET};
use super::siren::{SirenCache, SirenParams};
use crate::error::{Error, Result};
use crate::seeds::derive_seed;
use crate::sigproc::{steering_phase, ArrayGeometry, ComplexSpectrum, DoA, FrequencyAxis};

/// Network topology.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// One SIREN emits all magnitude and phase components.
    Phase,
    /// A magnitude SIREN feeds a second SIREN that emits the phases.
    MagThenPhase,
}

/// Whether frequency is a network input or an output dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreqMode {
    #[serde(rename = "cf")]
    Continuous,
    #[serde(rename = "df")]
    Discrete,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Phase => "phase",
            Variant::MagThenPhase => "mag_then_phase",
        })
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "phase" => Ok(Variant::Phase),
            "mag_then_phase" | "mag2phase" => Ok(Variant::MagThenPhase),
            _ => Err(format!("unknown variant '{s}' (phase | mag_then_phase)")),
        }
    }
}

impl fmt::Display for FreqMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FreqMode::Continuous => "cf",
            FreqMode::Discrete => "df",
        })
    }
}

impl FromStr for FreqMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cf" => Ok(FreqMode::Continuous),
            "df" => Ok(FreqMode::Discrete),
            _ => Err(format!("unknown frequency mode '{s}' (cf | df)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteererConfig {
    pub variant: Variant,
    pub freq_mode: FreqMode,
    pub hidden_main: Vec<usize>,
    pub hidden_phase: Vec<usize>,
    pub omega0: f64,
    pub seed: u64,
}

impl Default for SteererConfig {
    fn default() -> Self {
        Self {
            variant: Variant::MagThenPhase,
            freq_mode: FreqMode::Discrete,
            hidden_main: vec![64; 4],
            hidden_phase: vec![64; 2],
            omega0: 30.0,
            seed: 0,
        }
    }
}

/// The trained field: SIREN(s) plus the learnable global delay and
/// microphone positions.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralSteerer {
    pub config: SteererConfig,
    pub main_net: SirenParams,
    pub phase_net: Option<SirenParams>,
    pub tau: f64,
    pub mic_positions: Vec<[f64; 3]>,
    /// Nominal geometry; supplies the reference point and speed of sound.
    pub geometry: ArrayGeometry,
    pub axis: FrequencyAxis,
}

/// Decoded components for one direction, mirroring the terms of the
/// composed steering model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutput {
    pub freqs: Vec<f64>,
    pub g_air: Vec<C64>,
    /// `[channel][freq]`
    pub g_mic: Vec<Vec<C64>>,
    /// `[channel][freq]`
    pub h_hat: Vec<Vec<C64>>,
}

/// Forward state for a batch of directions sharing one frequency list,
/// kept for the reverse pass.
#[derive(Clone, Debug)]
pub struct FieldEval {
    pub directions: Vec<[f64; 3]>,
    pub freqs: Vec<f64>,
    /// Offset-applied head triples, index `(dir * n_freqs + freq) * (I + 1) + component`
    /// (component 0 is the air term).
    pub head: Vec<[f64; 3]>,
    /// Predicted steering values, index `(dir * I + channel) * n_freqs + freq`.
    pub h_hat: Vec<C64>,
    channels: usize,
    main_cache: SirenCache,
    phase_cache: Option<SirenCache>,
    main_out_cols: usize,
}

impl FieldEval {
    pub fn num_freqs(&self) -> usize {
        self.freqs.len()
    }

    pub fn num_directions(&self) -> usize {
        self.directions.len()
    }

    /// Values of channel `i` for the first (or only) direction.
    pub fn channel(&self, i: usize) -> &[C64] {
        self.channel_of(0, i)
    }

    pub fn channel_of(&self, dir: usize, i: usize) -> &[C64] {
        let nf = self.freqs.len();
        let start = (dir * self.channels + i) * nf;
        &self.h_hat[start..start + nf]
    }

    /// All channel values of one direction, layout `channel * n_freqs + freq`.
    pub fn direction_values(&self, dir: usize) -> &[C64] {
        let n = self.channels * self.freqs.len();
        &self.h_hat[dir * n..(dir + 1) * n]
    }
}

impl NeuralSteerer {
    pub fn new(config: SteererConfig, geometry: ArrayGeometry, axis: FrequencyAxis) -> Result<Self> {
        geometry.validate()?;
        if config.hidden_main.is_empty() {
            return Err(Error::arg("main network needs at least one hidden layer"));
        }
        if config.variant == Variant::MagThenPhase && config.hidden_phase.is_empty() {
            return Err(Error::arg("phase network needs at least one hidden layer"));
        }
        let comps = geometry.num_mics() + 1;
        let per_row = match config.freq_mode {
            FreqMode::Continuous => 1,
            FreqMode::Discrete => axis.num_bins,
        };
        let in_dim = Self::input_dim_for(config.freq_mode);
        let main_out = match config.variant {
            Variant::Phase => 3 * comps * per_row,
            Variant::MagThenPhase => comps * per_row,
        };
        let mut sizes = vec![in_dim];
        sizes.extend(&config.hidden_main);
        sizes.push(main_out);
        let main_net = SirenParams::init(&sizes, config.omega0, derive_seed(config.seed, 1))?;
        let phase_net = match config.variant {
            Variant::Phase => None,
            Variant::MagThenPhase => {
                let mut sizes = vec![in_dim + main_out];
                sizes.extend(&config.hidden_phase);
                sizes.push(2 * comps * per_row);
                Some(SirenParams::init(&sizes, config.omega0, derive_seed(config.seed, 2))?)
            }
        };
        let model = Self {
            mic_positions: geometry.mic_positions.clone(),
            config,
            main_net,
            phase_net,
            tau: 0.0,
            geometry,
            axis,
        };
        debug_assert_eq!(model.output_width(), model.expected_output_width());
        Ok(model)
    }

    fn input_dim_for(mode: FreqMode) -> usize {
        match mode {
            FreqMode::Continuous => 4,
            FreqMode::Discrete => 3,
        }
    }

    pub fn num_channels(&self) -> usize {
        self.mic_positions.len()
    }

    fn components(&self) -> usize {
        self.num_channels() + 1
    }

    fn per_row_freqs(&self) -> usize {
        match self.config.freq_mode {
            FreqMode::Continuous => 1,
            FreqMode::Discrete => self.axis.num_bins,
        }
    }

    /// `3(I+1)` for CF, `3(I+1)F` for DF.
    pub fn expected_output_width(&self) -> usize {
        3 * self.components() * self.per_row_freqs()
    }

    /// Total real outputs produced per evaluated row across both networks.
    pub fn output_width(&self) -> usize {
        match &self.phase_net {
            None => self.main_net.output_dim(),
            Some(p) => self.main_net.output_dim() + p.output_dim(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.main_net.num_params() + self.phase_net.as_ref().map_or(0, |p| p.num_params()) + 1 + 3 * self.num_channels()
    }

    /// Flat index ranges of (network weights, τ, microphone positions).
    pub fn param_ranges(&self) -> (Range<usize>, Range<usize>, Range<usize>) {
        let nets = self.main_net.num_params() + self.phase_net.as_ref().map_or(0, |p| p.num_params());
        (0..nets, nets..nets + 1, nets + 1..nets + 1 + 3 * self.num_channels())
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        self.main_net.write_flat(&mut out);
        if let Some(p) = &self.phase_net {
            p.write_flat(&mut out);
        }
        out.push(self.tau);
        for m in &self.mic_positions {
            out.extend_from_slice(m);
        }
        out
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::arg(format!(
                "parameter vector has {} entries, model needs {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut pos = self.main_net.read_flat(flat)?;
        if let Some(p) = &mut self.phase_net {
            pos += p.read_flat(&flat[pos..])?;
        }
        self.tau = flat[pos];
        pos += 1;
        for m in self.mic_positions.iter_mut() {
            m.copy_from_slice(&flat[pos..pos + 3]);
            pos += 3;
        }
        Ok(())
    }

    fn check_freqs(&self, freqs: &[f64]) -> Result<()> {
        if freqs.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::arg("frequencies must be finite and non-negative"));
        }
        if self.config.freq_mode == FreqMode::Discrete {
            let tol = 1e-9 * self.axis.sample_rate_hz;
            let matches = freqs.len() == self.axis.num_bins
                && freqs
                    .iter()
                    .enumerate()
                    .all(|(k, f)| (f - self.axis.freq(k)).abs() <= tol);
            if !matches {
                return Err(Error::arg(format!(
                    "discrete-frequency model only evaluates its stored {}-bin axis",
                    self.axis.num_bins
                )));
            }
        }
        if freqs.is_empty() {
            return Err(Error::arg("empty frequency list"));
        }
        Ok(())
    }

    fn encode(&self, directions: &[[f64; 3]], freqs: &[f64]) -> Array2<f64> {
        match self.config.freq_mode {
            FreqMode::Discrete => Array2::from_shape_fn((directions.len(), 3), |(r, c)| directions[r][c]),
            FreqMode::Continuous => {
                let fs = self.axis.sample_rate_hz;
                let nf = freqs.len();
                Array2::from_shape_fn((directions.len() * nf, 4), |(r, c)| {
                    if c < 3 {
                        directions[r / nf][c]
                    } else {
                        2.0 * freqs[r % nf] / fs - 1.0
                    }
                })
            }
        }
    }

    /// Maps `(row, per-row freq slot)` to `(direction, frequency index)`.
    fn row_target(&self, row: usize, slot: usize, nf: usize) -> (usize, usize) {
        match self.config.freq_mode {
            FreqMode::Continuous => (row / nf, row % nf),
            FreqMode::Discrete => (row, slot),
        }
    }

    /// Evaluates the field at one direction for the given frequencies.
    pub fn forward(&self, doa: &DoA, freqs: &[f64]) -> Result<FieldEval> {
        self.forward_batch(std::slice::from_ref(doa), freqs)
    }

    /// Evaluates the field at several directions in one pass through the
    /// networks.
    pub fn forward_batch(&self, doas: &[DoA], freqs: &[f64]) -> Result<FieldEval> {
        self.check_freqs(freqs)?;
        if doas.is_empty() {
            return Err(Error::arg("empty direction list"));
        }
        let directions: Vec<[f64; 3]> = doas.iter().map(DoA::direction).collect();
        let x = self.encode(&directions, freqs);
        let (main_out, main_cache) = self.main_net.forward(x.view());
        let comps = self.components();
        let per_row = self.per_row_freqs();
        let nf = freqs.len();
        let nd = directions.len();
        let mut head = vec![[0.0; 3]; nd * nf * comps];

        let phase_cache = match &self.phase_net {
            None => {
                for r in 0..main_out.nrows() {
                    for slot in 0..per_row {
                        let (d, fi) = self.row_target(r, slot, nf);
                        for k in 0..comps {
                            let base = (slot * comps + k) * 3;
                            head[(d * nf + fi) * comps + k] = [
                                main_out[[r, base]] + HEAD_OFFSET[0],
                                main_out[[r, base + 1]] + HEAD_OFFSET[1],
                                main_out[[r, base + 2]] + HEAD_OFFSET[2],
                            ];
                        }
                    }
                }
                None
            }
            Some(phase_net) => {
                let rows = main_out.nrows();
                let in_dim = x.ncols();
                let mut p_in = Array2::zeros((rows, in_dim + main_out.ncols()));
                p_in.slice_mut(s![.., ..in_dim]).assign(&x);
                p_in.slice_mut(s![.., in_dim..]).assign(&main_out);
                let (phase_out, cache) = phase_net.forward(p_in.view());
                for r in 0..rows {
                    for slot in 0..per_row {
                        let (d, fi) = self.row_target(r, slot, nf);
                        for k in 0..comps {
                            let m = slot * comps + k;
                            head[(d * nf + fi) * comps + k] = [
                                main_out[[r, m]] + HEAD_OFFSET[0],
                                phase_out[[r, 2 * m]] + HEAD_OFFSET[1],
                                phase_out[[r, 2 * m + 1]] + HEAD_OFFSET[2],
                            ];
                        }
                    }
                }
                Some(cache)
            }
        };

        let ch = self.num_channels();
        let mut h_hat = vec![C64::new(0.0, 0.0); nd * ch * nf];
        let reference = self.geometry.reference_point;
        let c = self.geometry.speed_of_sound;
        for (d, direction) in directions.iter().enumerate() {
            for (fi, &f) in freqs.iter().enumerate() {
                let e = (d * nf + fi) * comps;
                let air = head[e];
                let delay_phase = -2.0 * PI * f * self.tau;
                for i in 0..ch {
                    let mic = head[e + 1 + i];
                    let log_mag = air[0] + mic[0];
                    let phase = delay_phase - head_angle(air[1], air[2]) - head_angle(mic[1], mic[2])
                        + steering_phase(direction, f, &self.mic_positions[i], &reference, c);
                    h_hat[(d * ch + i) * nf + fi] = C64::from_polar(log_mag.exp(), phase);
                }
            }
        }

        Ok(FieldEval {
            directions,
            freqs: freqs.to_vec(),
            head,
            h_hat,
            channels: ch,
            main_cache,
            phase_cache,
            main_out_cols: main_out.ncols(),
        })
    }

    /// Reverse pass. `grad_h` holds `∂L/∂Re ĥ + j ∂L/∂Im ĥ` in the layout of
    /// [`FieldEval::h_hat`]; gradients are accumulated into `grad` (flat layout
    /// of [`NeuralSteerer::flat_params`]).
    pub fn backward(&self, eval: &FieldEval, grad_h: &[C64], grad: &mut [f64]) {
        assert_eq!(grad_h.len(), eval.h_hat.len());
        assert_eq!(grad.len(), self.num_params());
        let comps = self.components();
        let ch = self.num_channels();
        let nf = eval.num_freqs();
        let nd = eval.num_directions();
        let c = self.geometry.speed_of_sound;
        let (_, tau_range, mic_range) = self.param_ranges();

        // ∂L/∂(g1, ψ) per head entry, ψ = atan2(g2, g3)
        let mut d_logmag = vec![0.0; nd * nf * comps];
        let mut d_angle = vec![0.0; nd * nf * comps];
        let mut d_tau = 0.0;
        let mut d_mics = vec![[0.0; 3]; ch];
        for (d, direction) in eval.directions.iter().enumerate() {
            for (fi, &f) in eval.freqs.iter().enumerate() {
                let e = (d * nf + fi) * comps;
                for i in 0..ch {
                    let idx = (d * ch + i) * nf + fi;
                    let h = eval.h_hat[idx];
                    let g = grad_h[idx];
                    let dl = g.re * h.re + g.im * h.im;
                    let dphi = -g.re * h.im + g.im * h.re;
                    d_logmag[e] += dl;
                    d_logmag[e + 1 + i] += dl;
                    d_angle[e] -= dphi;
                    d_angle[e + 1 + i] -= dphi;
                    d_tau += -2.0 * PI * f * dphi;
                    let s = -2.0 * PI * f / c * dphi;
                    for (dm, n) in d_mics[i].iter_mut().zip(direction.iter()) {
                        *dm += s * n;
                    }
                }
            }
        }
        grad[tau_range.start] += d_tau;
        for (i, dm) in d_mics.iter().enumerate() {
            for (a, v) in dm.iter().enumerate() {
                grad[mic_range.start + 3 * i + a] += v;
            }
        }

        let per_row = self.per_row_freqs();
        let rows = match self.config.freq_mode {
            FreqMode::Continuous => nd * nf,
            FreqMode::Discrete => nd,
        };
        let main_params = self.main_net.num_params();
        let mut d_main = Array2::zeros((rows, eval.main_out_cols));
        match &self.phase_net {
            None => {
                for r in 0..rows {
                    for slot in 0..per_row {
                        let (d, fi) = self.row_target(r, slot, nf);
                        for k in 0..comps {
                            let e = (d * nf + fi) * comps + k;
                            let [_, g2, g3] = eval.head[e];
                            let (a2, a3) = head_angle_grad(g2, g3);
                            let base = (slot * comps + k) * 3;
                            d_main[[r, base]] = d_logmag[e];
                            d_main[[r, base + 1]] = d_angle[e] * a2;
                            d_main[[r, base + 2]] = d_angle[e] * a3;
                        }
                    }
                }
            }
            Some(phase_net) => {
                let mut d_phase = Array2::zeros((rows, phase_net.output_dim()));
                for r in 0..rows {
                    for slot in 0..per_row {
                        let (d, fi) = self.row_target(r, slot, nf);
                        for k in 0..comps {
                            let e = (d * nf + fi) * comps + k;
                            let [_, g2, g3] = eval.head[e];
                            let (a2, a3) = head_angle_grad(g2, g3);
                            let m = slot * comps + k;
                            d_main[[r, m]] = d_logmag[e];
                            d_phase[[r, 2 * m]] = d_angle[e] * a2;
                            d_phase[[r, 2 * m + 1]] = d_angle[e] * a3;
                        }
                    }
                }
                let cache = eval.phase_cache.as_ref().expect("phase cache present");
                let phase_grad = &mut grad[main_params..main_params + phase_net.num_params()];
                let d_in = phase_net.backward(cache, d_phase, phase_grad);
                let in_dim = self.main_net.input_dim();
                d_main += &d_in.slice(s![.., in_dim..]);
            }
        }
        self.main_net
            .backward(&eval.main_cache, d_main, &mut grad[..main_params]);
    }

    /// Decoded components at one direction.
    pub fn field_forward(&self, doa: &DoA, freqs: &[f64]) -> Result<ModelOutput> {
        let eval = self.forward(doa, freqs)?;
        Ok(self.output_from_eval(&eval))
    }

    pub fn output_from_eval(&self, eval: &FieldEval) -> ModelOutput {
        let comps = self.components();
        let ch = self.num_channels();
        let nf = eval.num_freqs();
        let g_air = (0..nf).map(|fi| head_decode(eval.head[fi * comps])).collect();
        let g_mic = (0..ch)
            .map(|i| (0..nf).map(|fi| head_decode(eval.head[fi * comps + 1 + i])).collect())
            .collect();
        let h_hat = (0..ch).map(|i| eval.channel(i).to_vec()).collect();
        ModelOutput {
            freqs: eval.freqs.clone(),
            g_air,
            g_mic,
            h_hat,
        }
    }

    /// Per-channel spectra on an equally spaced axis.
    pub fn predict(&self, doa: &DoA, axis: &FrequencyAxis) -> Result<Vec<ComplexSpectrum>> {
        let eval = self.forward(doa, &axis.freqs())?;
        (0..self.num_channels())
            .map(|i| ComplexSpectrum::new(eval.channel(i).to_vec(), *axis))
            .collect()
    }

    /// Per-parameter learning-rate multipliers: 1 for network weights,
    /// `physical_scale` for microphone positions and `physical_scale / c` for
    /// τ, so both physical parameters move by the same acoustic path length
    /// per step (0 freezes them).
    pub fn lr_multipliers(&self, physical_scale: f64) -> Vec<f64> {
        let (nets, tau, _) = self.param_ranges();
        let mut m = vec![physical_scale; self.num_params()];
        m[nets].fill(1.0);
        m[tau].fill(physical_scale / self.geometry.speed_of_sound);
        m
    }
}
