//! Steering-vector algebra and the real-filter spectral toolkit.
//!
//! Conventions: forward DFT is unnormalised, the inverse carries `1/N`.
//! One-sided spectra hold `F = N/2 + 1` bins from DC through Nyquist.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of arrival in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoA {
    pub azimuth: f64,
    pub elevation: f64,
}

impl DoA {
    /// Builds a direction, wrapping azimuth into `[0, 2π)`.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(Error::arg("non-finite direction"));
        }
        if elevation.abs() > PI / 2.0 + 1e-12 {
            return Err(Error::arg(format!("elevation {elevation} outside [-pi/2, pi/2]")));
        }
        let mut az = azimuth.rem_euclid(2.0 * PI);
        if az >= 2.0 * PI {
            az = 0.0;
        }
        Ok(Self {
            azimuth: az,
            elevation: elevation.clamp(-PI / 2.0, PI / 2.0),
        })
    }

    pub fn from_degrees(azimuth: f64, elevation: f64) -> Result<Self> {
        Self::new(azimuth.to_radians(), elevation.to_radians())
    }

    /// Unit vector `[cosθ cosφ, sinθ cosφ, sinφ]`.
    pub fn direction(&self) -> [f64; 3] {
        unit_direction(self.azimuth, self.elevation)
    }

    /// Inverse of [`DoA::direction`]; the input need not be normalised.
    pub fn from_direction(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::arg("zero-length direction"));
        }
        let el = (v[2] / norm).clamp(-1.0, 1.0).asin();
        let az = v[1].atan2(v[0]);
        Self::new(az, el)
    }

    /// Great-circle angle to another direction.
    pub fn angle_to(&self, other: &DoA) -> f64 {
        let a = self.direction();
        let b = other.direction();
        dot3(&a, &b).clamp(-1.0, 1.0).acos()
    }
}

pub fn unit_direction(azimuth: f64, elevation: f64) -> [f64; 3] {
    let (sa, ca) = azimuth.sin_cos();
    let (se, ce) = elevation.sin_cos();
    [ca * ce, sa * ce, se]
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// One-sided frequency grid: bin `k` sits at `k·Fs / (2(F-1))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyAxis {
    pub sample_rate_hz: f64,
    pub num_bins: usize,
}

impl FrequencyAxis {
    pub fn new(sample_rate_hz: f64, num_bins: usize) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::arg(format!("sample rate {sample_rate_hz} must be positive")));
        }
        if num_bins < 2 {
            return Err(Error::arg(format!("need at least 2 bins, got {num_bins}")));
        }
        Ok(Self {
            sample_rate_hz,
            num_bins,
        })
    }

    /// Axis whose bins are the one-sided DFT bins of a length-`n` real filter.
    pub fn for_fft_len(sample_rate_hz: f64, n: usize) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::arg(format!("filter length {n} must be even and >= 2")));
        }
        Self::new(sample_rate_hz, n / 2 + 1)
    }

    pub fn fft_len(&self) -> usize {
        2 * (self.num_bins - 1)
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate_hz / 2.0
    }

    pub fn freq(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate_hz / self.fft_len() as f64
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.num_bins).map(|k| self.freq(k)).collect()
    }
}

/// One-sided complex spectrum on a [`FrequencyAxis`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrum {
    pub values: Vec<C64>,
    pub axis: FrequencyAxis,
}

impl ComplexSpectrum {
    pub fn new(values: Vec<C64>, axis: FrequencyAxis) -> Result<Self> {
        if values.len() != axis.num_bins {
            return Err(Error::arg(format!(
                "spectrum has {} values but axis has {} bins",
                values.len(),
                axis.num_bins
            )));
        }
        Ok(Self { values, axis })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Real time-domain filter of even length `N = 2(F-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeFilter {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
}

/// Microphone array description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub mic_positions: Vec<[f64; 3]>,
    pub reference_point: [f64; 3],
    pub speed_of_sound: f64,
}

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

impl ArrayGeometry {
    pub fn new(mic_positions: Vec<[f64; 3]>, reference_point: [f64; 3], speed_of_sound: f64) -> Result<Self> {
        let geom = Self {
            mic_positions,
            reference_point,
            speed_of_sound,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mic_positions.is_empty() {
            return Err(Error::arg("array needs at least one microphone"));
        }
        if !(self.speed_of_sound.is_finite() && self.speed_of_sound > 0.0) {
            return Err(Error::arg("speed of sound must be positive"));
        }
        let finite = self
            .mic_positions
            .iter()
            .chain(std::iter::once(&self.reference_point))
            .all(|p| p.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::arg("non-finite microphone coordinates"));
        }
        Ok(())
    }

    pub fn num_mics(&self) -> usize {
        self.mic_positions.len()
    }
}

/// Phase of the far-field steering term, `-2π f nᵀ(m - r) / c`.
pub fn steering_phase(direction: &[f64; 3], f: f64, mic: &[f64; 3], reference: &[f64; 3], c: f64) -> f64 {
    let rel = [mic[0] - reference[0], mic[1] - reference[1], mic[2] - reference[2]];
    -2.0 * PI * f * dot3(direction, &rel) / c
}

/// Far-field anechoic steering coefficient of one microphone.
pub fn algebraic_steering(doa: &DoA, f: f64, mic_index: usize, geom: &ArrayGeometry) -> Result<C64> {
    let mic = geom.mic_positions.get(mic_index).ok_or(Error::Index {
        index: mic_index,
        len: geom.num_mics(),
    })?;
    let phase = steering_phase(&doa.direction(), f, mic, &geom.reference_point, geom.speed_of_sound);
    Ok(C64::from_polar(1.0, phase))
}

/// `exp(-j2πfτ) · g_air · g_mic · d`.
pub fn compose_steering(d: C64, g_air: C64, g_mic: C64, tau: f64, f: f64) -> C64 {
    C64::from_polar(1.0, -2.0 * PI * f * tau) * g_air * g_mic * d
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [C64], inverse: bool) {
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        }
    });
    plan.process(buf);
}

/// Hermitian completion of a one-sided spectrum to all `N = 2(F-1)` bins.
/// DC and Nyquist imaginary parts are dropped.
pub fn hermitian_complete(values: &[C64]) -> Vec<C64> {
    let f = values.len();
    assert!(f >= 2, "one-sided spectrum needs at least 2 bins");
    let n = 2 * (f - 1);
    let mut full = vec![C64::new(0.0, 0.0); n];
    full[..f].copy_from_slice(values);
    full[0].im = 0.0;
    full[f - 1].im = 0.0;
    for k in 1..f - 1 {
        full[n - k] = values[k].conj();
    }
    full
}

pub fn onesided_to_full(spec: &ComplexSpectrum) -> Vec<C64> {
    hermitian_complete(&spec.values)
}

/// Real inverse DFT of a one-sided spectrum given as raw bins.
pub fn idft_real_values(values: &[C64]) -> Vec<f64> {
    let mut full = hermitian_complete(values);
    let n = full.len();
    fft_in_place(&mut full, true);
    let scale = 1.0 / n as f64;
    full.iter().map(|z| z.re * scale).collect()
}

pub fn idft_real(spec: &ComplexSpectrum) -> TimeFilter {
    TimeFilter {
        samples: idft_real_values(&spec.values),
        sample_rate_hz: spec.axis.sample_rate_hz,
    }
}

/// Adjoint of [`idft_real_values`]: maps `∂L/∂t` to per-bin `∂L/∂Re + j ∂L/∂Im`.
pub fn idft_real_adjoint(grad_time: &[f64]) -> Vec<C64> {
    let n = grad_time.len();
    let f = n / 2 + 1;
    let mut buf: Vec<C64> = grad_time.iter().map(|&g| C64::new(g, 0.0)).collect();
    fft_in_place(&mut buf, false);
    let inv_n = 1.0 / n as f64;
    (0..f)
        .map(|k| {
            if k == 0 || k == f - 1 {
                C64::new(buf[k].re * inv_n, 0.0)
            } else {
                buf[k] * (2.0 * inv_n)
            }
        })
        .collect()
}

/// Unnormalised one-sided DFT of an even-length real sequence.
pub fn dft_real_values(samples: &[f64]) -> Result<Vec<C64>> {
    let n = samples.len();
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::arg(format!("real DFT needs even length >= 2, got {n}")));
    }
    let mut buf: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
    fft_in_place(&mut buf, false);
    buf.truncate(n / 2 + 1);
    Ok(buf)
}

pub fn dft_real(filter: &TimeFilter) -> Result<ComplexSpectrum> {
    let values = dft_real_values(&filter.samples)?;
    let axis = FrequencyAxis::for_fft_len(filter.sample_rate_hz, filter.samples.len())?;
    ComplexSpectrum::new(values, axis)
}

/// Discrete Hilbert transform over the sequence index: DFT multiplier `-j·sgn`
/// with DC and Nyquist zeroed.
pub fn hilbert_freq(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::arg(format!("Hilbert transform needs even length >= 4, got {n}")));
    }
    let mut buf: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    fft_in_place(&mut buf, false);
    let half = n / 2;
    buf[0] = C64::new(0.0, 0.0);
    buf[half] = C64::new(0.0, 0.0);
    for (k, z) in buf.iter_mut().enumerate() {
        if (1..half).contains(&k) {
            *z = C64::new(z.im, -z.re);
        } else if k > half {
            *z = C64::new(-z.im, z.re);
        }
    }
    fft_in_place(&mut buf, true);
    let scale = 1.0 / n as f64;
    Ok(buf.iter().map(|z| z.re * scale).collect())
}

/// Causality residual vector `K(Re) - Im` over the Hermitian-completed grid,
/// with `K = -hilbert_freq` so that pure delays give zero.
fn causal_residual_vector(values: &[C64]) -> Vec<f64> {
    let full = hermitian_complete(values);
    let re: Vec<f64> = full.iter().map(|z| z.re).collect();
    let h = hilbert_freq(&re).expect("hermitian grid has even length >= 4");
    full.iter().zip(h).map(|(z, hv)| -hv - z.im).collect()
}

pub fn causal_residual_values(values: &[C64]) -> f64 {
    assert!(values.len() >= 3, "causal residual needs at least 3 bins");
    causal_residual_vector(values).iter().map(|r| r * r).sum()
}

/// Squared norm of the discrete Kramers-Kronig mismatch of a one-sided spectrum.
pub fn causal_residual(spec: &ComplexSpectrum) -> f64 {
    causal_residual_values(&spec.values)
}

/// Residual value and its gradient with respect to the real and imaginary
/// parts of every one-sided bin (packed as `∂/∂Re + j ∂/∂Im`).
pub fn causal_residual_with_grad(values: &[C64]) -> (f64, Vec<C64>) {
    assert!(values.len() >= 3, "causal residual needs at least 3 bins");
    let r = causal_residual_vector(values);
    let value = r.iter().map(|v| v * v).sum();
    let n = r.len();
    let f = values.len();
    // L = |K·Re - Im|², K = -H and Hᵀ = -H, so ∂L/∂Re = H(2r), ∂L/∂Im = -2r.
    let two_r: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
    let d_re_full = hilbert_freq(&two_r).expect("even length");
    let mut grad = vec![C64::new(0.0, 0.0); f];
    grad[0].re = d_re_full[0];
    grad[f - 1].re = d_re_full[f - 1];
    for k in 1..f - 1 {
        grad[k].re = d_re_full[k] + d_re_full[n - k];
        // Im[k] = im_k, Im[N-k] = -im_k
        grad[k].im = -two_r[k] + two_r[n - k];
    }
    (value, grad)
}
