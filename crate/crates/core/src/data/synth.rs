use std::f64::consts::PI;

use num_complex::{Complex32, Complex64 as C64};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GridMeasurementSet, Provenance};
use crate::error::{Error, Result};
use crate::seeds::stream_rng;
use crate::sigproc::{
    dot3, steering_phase, ArrayGeometry, ComplexSpectrum, DoA, FrequencyAxis, DEFAULT_SPEED_OF_SOUND,
};

/// Cardioid mixing coefficient of the microphone directivity.
const CARDIOID_MIX: f64 = 0.5;
const GAIN_FLOOR: f64 = 1e-3;
const TILT_CEILING: f64 = 1.5;

/// Ground-truth generator parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSceneConfig {
    /// Nominal array geometry (what downstream models are told).
    pub geometry: ArrayGeometry,
    pub tau_true: f64,
    /// Air attenuation in nepers per unit of `f / (Fs/2)`.
    pub air_alpha: f64,
    pub directivity_order: u32,
    /// Linear frequency slope of the microphone gain.
    pub directivity_tilt: f64,
    pub noise_std: f64,
    pub seed: u64,
    /// Standard deviation (m) of the offset between the true and nominal
    /// microphone positions.
    #[serde(default)]
    pub mic_offset_std: f64,
}

/// Microphones on a horizontal ring of `radius` metres, alternating ±2 cm in
/// height, centred on the origin.
pub fn ring_array(num_mics: usize, radius: f64) -> ArrayGeometry {
    let mics = (0..num_mics)
        .map(|i| {
            let ang = PI / 4.0 + 2.0 * PI * i as f64 / num_mics as f64;
            let z = if i % 2 == 0 { 0.02 } else { -0.02 };
            [radius * ang.cos(), radius * ang.sin(), z]
        })
        .collect();
    ArrayGeometry {
        mic_positions: mics,
        reference_point: [0.0; 3],
        speed_of_sound: DEFAULT_SPEED_OF_SOUND,
    }
}

impl Default for SyntheticSceneConfig {
    fn default() -> Self {
        Self {
            geometry: ring_array(4, 0.08),
            tau_true: 1e-3,
            air_alpha: 0.5,
            directivity_order: 1,
            directivity_tilt: -0.3,
            noise_std: 0.0,
            seed: 0,
            mic_offset_std: 0.0,
        }
    }
}

impl SyntheticSceneConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let finite = [
            self.tau_true,
            self.air_alpha,
            self.directivity_tilt,
            self.noise_std,
            self.mic_offset_std,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::arg("scene parameters must be finite"));
        }
        if self.noise_std < 0.0 || self.mic_offset_std < 0.0 {
            return Err(Error::arg("noise_std and mic_offset_std must be non-negative"));
        }
        Ok(())
    }
}

/// Noiseless analytic evaluator of a scene; usable at any frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub config: SyntheticSceneConfig,
    pub sample_rate_hz: f64,
    pub true_positions: Vec<[f64; 3]>,
    mic_axes: Vec<[f64; 3]>,
}

impl SyntheticScene {
    pub fn new(config: SyntheticSceneConfig, sample_rate_hz: f64) -> Result<Self> {
        config.validate()?;
        let g = &config.geometry;
        let mut rng = stream_rng(config.seed, 0x6d69_6373);
        let normal = Normal::new(0.0, config.mic_offset_std.max(0.0))
            .map_err(|e| Error::arg(format!("offset distribution: {e}")))?;
        let true_positions = g
            .mic_positions
            .iter()
            .map(|m| {
                if config.mic_offset_std > 0.0 {
                    [
                        m[0] + normal.sample(&mut rng),
                        m[1] + normal.sample(&mut rng),
                        m[2] + normal.sample(&mut rng),
                    ]
                } else {
                    *m
                }
            })
            .collect();
        let mic_axes = g
            .mic_positions
            .iter()
            .map(|m| {
                let v = [
                    m[0] - g.reference_point[0],
                    m[1] - g.reference_point[1],
                    m[2] - g.reference_point[2],
                ];
                let n = dot3(&v, &v).sqrt();
                if n > 0.0 {
                    [v[0] / n, v[1] / n, v[2] / n]
                } else {
                    [1.0, 0.0, 0.0]
                }
            })
            .collect();
        Ok(Self {
            config,
            sample_rate_hz,
            true_positions,
            mic_axes,
        })
    }

    fn half_rate(&self) -> f64 {
        self.sample_rate_hz / 2.0
    }

    pub fn g_air(&self, f: f64) -> f64 {
        (-self.config.air_alpha * f / self.half_rate()).exp()
    }

    pub fn g_mic(&self, direction: &[f64; 3], f: f64, mic: usize) -> f64 {
        let cos_theta = dot3(direction, &self.mic_axes[mic]);
        let base = ((1.0 - CARDIOID_MIX) + CARDIOID_MIX * cos_theta).max(GAIN_FLOOR);
        let pattern = base.powi(self.config.directivity_order as i32);
        let tilt = (1.0 + self.config.directivity_tilt * f / self.half_rate()).clamp(GAIN_FLOOR, TILT_CEILING);
        pattern * tilt
    }

    /// Noiseless `exp(-j2πfτ) · g_air · g_mic · d` using the true positions.
    pub fn evaluate(&self, doa: &DoA, f: f64, mic: usize) -> C64 {
        let n = doa.direction();
        let g = &self.config.geometry;
        let phase = -2.0 * PI * f * self.config.tau_true
            + steering_phase(&n, f, &self.true_positions[mic], &g.reference_point, g.speed_of_sound);
        C64::from_polar(self.g_air(f) * self.g_mic(&n, f, mic), phase)
    }

    pub fn spectra(&self, doa: &DoA, axis: &FrequencyAxis) -> Vec<ComplexSpectrum> {
        (0..self.true_positions.len())
            .map(|i| ComplexSpectrum {
                values: axis.freqs().iter().map(|&f| self.evaluate(doa, f, i)).collect(),
                axis: *axis,
            })
            .collect()
    }
}

/// `A` equally spaced azimuths in `[0, 2π)`.
pub fn azimuth_grid(count: usize) -> Vec<f64> {
    (0..count).map(|k| 2.0 * PI * k as f64 / count as f64).collect()
}

/// `E` equally spaced elevations in `[-80°, 80°]`.
pub fn elevation_grid(count: usize) -> Vec<f64> {
    let lim = 80f64.to_radians();
    if count == 1 {
        return vec![0.0];
    }
    (0..count)
        .map(|k| -lim + 2.0 * lim * k as f64 / (count - 1) as f64)
        .collect()
}

/// Samples a scene on an `A × E` grid.
pub fn generate_synthetic(
    cfg: &SyntheticSceneConfig,
    num_azimuths: usize,
    num_elevations: usize,
    axis: FrequencyAxis,
) -> Result<GridMeasurementSet> {
    if num_azimuths < 4 || num_elevations < 3 || axis.num_bins < 9 {
        return Err(Error::arg(format!(
            "degenerate grid {num_azimuths}x{num_elevations} with {} bins (need >= 4x3, >= 9 bins)",
            axis.num_bins
        )));
    }
    let scene = SyntheticScene::new(cfg.clone(), axis.sample_rate_hz)?;
    let azimuths = azimuth_grid(num_azimuths);
    let elevations = elevation_grid(num_elevations);
    let freqs = axis.freqs();
    let ch = cfg.geometry.num_mics();
    let mut rng = stream_rng(cfg.seed, 0x6e6f_6973);
    let noise = Normal::new(0.0, cfg.noise_std / 2f64.sqrt()).map_err(|e| Error::arg(format!("noise: {e}")))?;
    let mut data = Vec::with_capacity(num_azimuths * num_elevations * ch * freqs.len());
    for &az in &azimuths {
        for &el in &elevations {
            let doa = DoA {
                azimuth: az,
                elevation: el,
            };
            for i in 0..ch {
                for &f in &freqs {
                    let mut h = scene.evaluate(&doa, f, i);
                    if cfg.noise_std > 0.0 {
                        h += C64::new(noise.sample(&mut rng), noise.sample(&mut rng));
                    }
                    data.push(Complex32::new(h.re as f32, h.im as f32));
                }
            }
        }
    }
    GridMeasurementSet::new(
        azimuths,
        elevations,
        axis,
        cfg.geometry.clone(),
        data,
        Provenance::Synthetic { scene: cfg.clone() },
    )
}
