//! Training objectives: log-magnitude and phase ℓ1 in frequency, ℓ2 on the
//! real time filters, the discrete causality penalty and the cumulative
//! frequency weighting.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sigproc::{
    causal_residual, causal_residual_with_grad, idft_real_adjoint, idft_real_values, ComplexSpectrum,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Weight of the phase term.
    pub lambda1: f64,
    /// Weight of the time-domain term.
    pub lambda2: f64,
    pub lambda_causal: f64,
    /// Rate of the cumulative-residual frequency weighting.
    pub epsilon_freq: f64,
    pub eps_log: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 10.0,
            lambda2: 10.0,
            lambda_causal: 0.1,
            epsilon_freq: 1.0,
            eps_log: 1e-8,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda1, self.lambda2, self.lambda_causal, self.epsilon_freq];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::arg("loss weights must be finite and non-negative"));
        }
        if !(self.eps_log.is_finite() && self.eps_log > 0.0) {
            return Err(Error::arg("eps_log must be positive"));
        }
        Ok(())
    }
}

/// Training DoAs (node indices) and frequency bins of one batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchSpec {
    pub doas: Vec<usize>,
    pub freq_subset: Vec<usize>,
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `|log(|ĥ|+ε) − log(|h|+ε)|`.
pub fn logmag_l1(h_hat: C64, h: C64, eps_log: f64) -> f64 {
    ((h_hat.norm() + eps_log).ln() - (h.norm() + eps_log).ln()).abs()
}

fn logmag_l1_grad(h_hat: C64, h: C64, eps_log: f64) -> C64 {
    let r = h_hat.norm();
    if r == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let s = sgn((r + eps_log).ln() - (h.norm() + eps_log).ln());
    let dr = s / (r + eps_log);
    C64::new(dr * h_hat.re / r, dr * h_hat.im / r)
}

fn unit_phasor(z: C64) -> (f64, f64) {
    let r = z.norm();
    if r == 0.0 {
        (1.0, 0.0)
    } else {
        (z.re / r, z.im / r)
    }
}

/// `|cos∠ĥ − cos∠h| + |sin∠ĥ − sin∠h|`, with the angle of zero taken as 0.
pub fn phase_cos_sin_l1(h_hat: C64, h: C64) -> f64 {
    let (c1, s1) = unit_phasor(h_hat);
    let (c2, s2) = unit_phasor(h);
    (c1 - c2).abs() + (s1 - s2).abs()
}

fn phase_cos_sin_l1_grad(h_hat: C64, h: C64) -> C64 {
    let r = h_hat.norm();
    if r == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let (c1, s1) = unit_phasor(h_hat);
    let (c2, s2) = unit_phasor(h);
    let (sc, ss) = (sgn(c1 - c2), sgn(s1 - s2));
    let r3 = r * r * r;
    let (x, y) = (h_hat.re, h_hat.im);
    // ∂cos/∂(x, y) = (y², −xy)/r³, ∂sin/∂(x, y) = (−xy, x²)/r³
    C64::new((sc * y * y - ss * x * y) / r3, (-sc * x * y + ss * x * x) / r3)
}

fn check_same_axis(a: &ComplexSpectrum, b: &ComplexSpectrum) -> Result<()> {
    if a.axis != b.axis || a.values.len() != b.values.len() {
        return Err(Error::arg(format!(
            "spectra on different axes ({} vs {} bins)",
            a.values.len(),
            b.values.len()
        )));
    }
    Ok(())
}

/// Squared ℓ2 distance of the real time filters.
pub fn time_l2(h_hat: &ComplexSpectrum, h: &ComplexSpectrum) -> Result<f64> {
    check_same_axis(h_hat, h)?;
    Ok(time_l2_values(&h_hat.values, &h.values).0)
}

fn time_l2_values(h_hat: &[C64], h: &[C64]) -> (f64, Vec<f64>) {
    let diff: Vec<C64> = h_hat.iter().zip(h).map(|(a, b)| a - b).collect();
    let t = idft_real_values(&diff);
    let value = t.iter().map(|v| v * v).sum();
    (value, t)
}

/// Causality penalty of a predicted spectrum on an equally spaced axis.
pub fn causal_loss(h_hat: &ComplexSpectrum) -> f64 {
    causal_residual(h_hat)
}

/// `w_k = exp(−ε · Σ_{k'<k} ℓ_{k'} / max(1, k))`, `w_0 = 1`.
pub fn freq_cumulative_weights(per_freq_losses: &[f64], epsilon: f64) -> Vec<f64> {
    let mut cumulative = 0.0;
    per_freq_losses
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let w = (-epsilon * cumulative / (k.max(1) as f64)).exp();
            cumulative += l;
            w
        })
        .collect()
}

/// Weighted contributions of every term; `total` is their sum.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub logmag: f64,
    pub phase: f64,
    pub time: f64,
    pub causal: f64,
    pub freq_weights: Vec<f64>,
}

/// Gradients w.r.t. every predicted bin, packed `∂/∂Re + j ∂/∂Im`, laid out
/// `[doa][channel * bins + bin]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrads {
    pub batch: Vec<Vec<C64>>,
    pub offgrid: Vec<Vec<C64>>,
}

/// The full objective over a batch.
///
/// `predictions[j][i]` and `references[j][i]` are full-axis spectra of batch
/// DoA `j`, channel `i`. The frequency terms run over `freq_subset`, the time
/// term over the whole axis, and the causal term over `offgrid` predictions.
/// Batch terms are averaged over (DoA, channel) pairs.
pub fn total_loss(
    predictions: &[Vec<ComplexSpectrum>],
    references: &[Vec<ComplexSpectrum>],
    freq_subset: &[usize],
    offgrid: &[Vec<ComplexSpectrum>],
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    evaluate(predictions, references, freq_subset, offgrid, weights, false).map(|(b, _)| b)
}

pub fn total_loss_with_grad(
    predictions: &[Vec<ComplexSpectrum>],
    references: &[Vec<ComplexSpectrum>],
    freq_subset: &[usize],
    offgrid: &[Vec<ComplexSpectrum>],
    weights: &LossWeights,
) -> Result<(LossBreakdown, LossGrads)> {
    evaluate(predictions, references, freq_subset, offgrid, weights, true)
        .map(|(b, g)| (b, g.expect("gradients requested")))
}

fn evaluate(
    predictions: &[Vec<ComplexSpectrum>],
    references: &[Vec<ComplexSpectrum>],
    freq_subset: &[usize],
    offgrid: &[Vec<ComplexSpectrum>],
    weights: &LossWeights,
    want_grad: bool,
) -> Result<(LossBreakdown, Option<LossGrads>)> {
    weights.validate()?;
    if predictions.len() != references.len() {
        return Err(Error::Data(format!(
            "{} predictions but {} references",
            predictions.len(),
            references.len()
        )));
    }
    let mut subset = freq_subset.to_vec();
    subset.sort_unstable();
    subset.dedup();

    let pairs: usize = predictions.iter().map(|p| p.len()).sum();
    let mut breakdown = LossBreakdown::default();
    let mut grads = LossGrads {
        batch: Vec::with_capacity(predictions.len()),
        offgrid: Vec::with_capacity(offgrid.len()),
    };

    if pairs > 0 {
        if subset.is_empty() {
            return Err(Error::arg("empty frequency subset"));
        }
        for (pred, refs) in predictions.iter().zip(references) {
            if pred.len() != refs.len() {
                return Err(Error::Data(
                    "channel count mismatch between prediction and reference".into(),
                ));
            }
            for (p, r) in pred.iter().zip(refs) {
                check_same_axis(p, r)?;
                if let Some(&k) = subset.last() {
                    if k >= p.len() {
                        return Err(Error::Index { index: k, len: p.len() });
                    }
                }
            }
        }
        let norm = 1.0 / pairs as f64;
        let nsub = subset.len() as f64;

        // detached per-frequency losses drive the weights
        let mut per_freq = vec![0.0; subset.len()];
        for (pred, refs) in predictions.iter().zip(references) {
            for (p, r) in pred.iter().zip(refs) {
                for (s, &k) in subset.iter().enumerate() {
                    let (a, b) = (p.values[k], r.values[k]);
                    per_freq[s] += norm * (logmag_l1(a, b, weights.eps_log) + weights.lambda1 * phase_cos_sin_l1(a, b));
                }
            }
        }
        let fw = freq_cumulative_weights(&per_freq, weights.epsilon_freq);

        for (pred, refs) in predictions.iter().zip(references) {
            let bins = pred.first().map_or(0, |p| p.len());
            let mut g = if want_grad {
                vec![C64::new(0.0, 0.0); pred.len() * bins]
            } else {
                Vec::new()
            };
            for (i, (p, r)) in pred.iter().zip(refs).enumerate() {
                for (s, &k) in subset.iter().enumerate() {
                    let (a, b) = (p.values[k], r.values[k]);
                    let scale = norm * fw[s] / nsub;
                    breakdown.logmag += scale * logmag_l1(a, b, weights.eps_log);
                    breakdown.phase += scale * weights.lambda1 * phase_cos_sin_l1(a, b);
                    if want_grad {
                        g[i * bins + k] += scale
                            * (logmag_l1_grad(a, b, weights.eps_log) + weights.lambda1 * phase_cos_sin_l1_grad(a, b));
                    }
                }
                if weights.lambda2 > 0.0 {
                    let (value, t) = time_l2_values(&p.values, &r.values);
                    let scale = norm * weights.lambda2 / bins as f64;
                    breakdown.time += scale * value;
                    if want_grad {
                        let gt: Vec<f64> = t.iter().map(|v| 2.0 * scale * v).collect();
                        for (k, gk) in idft_real_adjoint(&gt).into_iter().enumerate() {
                            g[i * bins + k] += gk;
                        }
                    }
                }
            }
            if want_grad {
                grads.batch.push(g);
            }
        }
        breakdown.freq_weights = fw;
    }

    let off_pairs: usize = offgrid.iter().map(|p| p.len()).sum();
    for pred in offgrid {
        let bins = pred.first().map_or(0, |p| p.len());
        let mut g = if want_grad {
            vec![C64::new(0.0, 0.0); pred.len() * bins]
        } else {
            Vec::new()
        };
        if weights.lambda_causal > 0.0 && off_pairs > 0 {
            let scale = weights.lambda_causal / off_pairs as f64;
            for (i, p) in pred.iter().enumerate() {
                if p.len() != bins {
                    return Err(Error::arg("off-grid channels on different axes"));
                }
                if p.len() < 3 {
                    return Err(Error::arg("causal term needs at least 3 bins"));
                }
                if want_grad {
                    let (value, gc) = causal_residual_with_grad(&p.values);
                    breakdown.causal += scale * value;
                    for (k, gk) in gc.into_iter().enumerate() {
                        g[i * bins + k] += scale * gk;
                    }
                } else {
                    breakdown.causal += scale * causal_loss(p);
                }
            }
        }
        if want_grad {
            grads.offgrid.push(g);
        }
    }

    breakdown.total = breakdown.logmag + breakdown.phase + breakdown.time + breakdown.causal;
    Ok((breakdown, want_grad.then_some(grads)))
}
