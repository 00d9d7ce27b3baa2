//! The optimization loop: mini-batches, off-grid causality samples, Adam with
//! per-epoch decay, validation-based early stopping, checkpoints and logs.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BatchIterator, GridMeasurementSet, Split};
use crate::error::{Error, Result};
use crate::loss::{total_loss, total_loss_with_grad, BatchSpec, LossBreakdown, LossWeights};
use crate::model::{load_checkpoint, save_checkpoint, Adam, Checkpoint, FieldEval, FreqMode, NeuralSteerer};
use crate::parallel::map_indexed;
use crate::seeds::{derive_seed, stream_rng};
use crate::sigproc::{ComplexSpectrum, DoA, FrequencyAxis};

const OFFGRID_STREAM: u64 = 0x6f66_6667;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs_max: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_decay: f64,
    /// Non-improving validation epochs tolerated before stopping.
    pub patience: usize,
    pub weights: LossWeights,
    /// Bins per batch for the frequency terms in continuous-frequency mode
    /// (discrete mode always uses the full axis).
    pub freq_subset_size: usize,
    pub seed: u64,
    /// Global gradient-norm ceiling.
    pub grad_clip: f64,
    /// Learning-rate multiplier of τ and the microphone positions (0 freezes).
    pub physical_lr_scale: f64,
    #[serde(skip)]
    pub checkpoint_path: Option<PathBuf>,
    /// Save every this many epochs (0: only when training ends).
    pub checkpoint_every: usize,
    /// Print a progress line to stderr every this many epochs (0: silent).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_max: 300,
            batch_size: 18,
            lr0: 1e-3,
            lr_decay: 0.98,
            patience: 20,
            weights: LossWeights::default(),
            freq_subset_size: 16,
            seed: 0,
            grad_clip: 10.0,
            physical_lr_scale: 0.1,
            checkpoint_path: None,
            checkpoint_every: 0,
            log_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.batch_size == 0 || self.freq_subset_size == 0 || self.patience == 0 {
            return Err(Error::arg("batch_size, freq_subset_size and patience must be positive"));
        }
        let positive = [self.lr0, self.lr_decay, self.grad_clip];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::arg("lr0, lr_decay and grad_clip must be positive"));
        }
        if !(self.physical_lr_scale >= 0.0 && self.physical_lr_scale.is_finite()) {
            return Err(Error::arg("physical_lr_scale must be non-negative"));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    pub lr: f64,
    pub logmag: f64,
    pub phase: f64,
    pub time: f64,
    pub causal: f64,
    pub total: f64,
    pub val_loss: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

pub const LOG_HEADER: &str = "epoch,lr,logmag,phase,time,causal,total,val_loss,wall_time";

impl EpochRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.3}",
            self.epoch,
            self.lr,
            self.logmag,
            self.phase,
            self.time,
            self.causal,
            self.total,
            self.val_loss,
            self.wall_time
        )
    }
}

pub fn write_log_csv(log: &[EpochRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{LOG_HEADER}")?;
    for r in log {
        writeln!(out, "{}", r.csv_line())?;
    }
    out.flush()?;
    Ok(())
}

/// Everything needed to continue a run, stored in the checkpoint header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub epochs_done: usize,
    pub best_val: Option<f64>,
    pub best_epoch: usize,
    pub stale_epochs: usize,
    pub stopped_early: bool,
    pub adam_steps: u64,
    pub train_nodes: Vec<usize>,
    pub validation_nodes: Vec<usize>,
    pub config: TrainConfig,
    pub history: Vec<EpochRecord>,
}

/// Result of a run: the best-validation model, the final-epoch model and
/// the state they came from.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: NeuralSteerer,
    pub final_model: NeuralSteerer,
    pub state: TrainState,
    pub optimizer: Adam,
}

impl TrainOutcome {
    pub fn log(&self) -> &[EpochRecord] {
        &self.state.history
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        Ok(Checkpoint {
            model: self.model.clone(),
            training: serde_json::to_value(&self.state).map_err(|e| Error::Data(e.to_string()))?,
            extra: vec![
                ("current".into(), self.final_model.flat_params()),
                ("adam_m".into(), self.optimizer.m.clone()),
                ("adam_v".into(), self.optimizer.v.clone()),
            ],
        })
    }
}

/// Uniform direction on the sphere.
pub fn sample_sphere_doa<R: Rng>(rng: &mut R) -> DoA {
    let azimuth = rng.random_range(0.0..2.0 * PI);
    let elevation = rng.random_range(-1.0f64..=1.0).asin();
    DoA { azimuth, elevation }
}

/// Axis for the off-grid causal term: the training axis in discrete mode,
/// otherwise an FFT length drawn from `{N/2, N, 2N}`.
fn offgrid_axis<R: Rng>(model: &NeuralSteerer, rng: &mut R) -> Result<FrequencyAxis> {
    match model.config.freq_mode {
        FreqMode::Discrete => Ok(model.axis),
        FreqMode::Continuous => {
            let n = model.axis.fft_len();
            let choices = [(n / 2).max(4), n, 2 * n];
            FrequencyAxis::for_fft_len(model.axis.sample_rate_hz, choices[rng.random_range(0..3)])
        }
    }
}

/// Directions per network pass; fixed so the summation order (and hence the
/// result) does not depend on the worker count.
const CHUNK: usize = 16;

/// Forward state of a direction list, evaluated in fixed-size chunks.
struct Evals {
    chunks: Vec<FieldEval>,
    channels: usize,
}

impl Evals {
    fn spectra(&self, axis: FrequencyAxis) -> Vec<Vec<ComplexSpectrum>> {
        self.chunks
            .iter()
            .flat_map(|e| {
                (0..e.num_directions()).map(move |d| {
                    (0..self.channels)
                        .map(|i| ComplexSpectrum {
                            values: e.channel_of(d, i).to_vec(),
                            axis,
                        })
                        .collect()
                })
            })
            .collect()
    }
}

fn forward_all(model: &NeuralSteerer, doas: &[DoA], axis: &FrequencyAxis) -> Result<Evals> {
    let freqs = axis.freqs();
    let parts: Vec<&[DoA]> = doas.chunks(CHUNK).collect();
    let chunks = map_indexed(parts.len(), |j| model.forward_batch(parts[j], &freqs))
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(Evals {
        chunks,
        channels: model.num_channels(),
    })
}

/// Sums per-chunk parameter gradients in index order. `grads[j]` holds the
/// per-channel gradient of direction `j`.
fn backward_all(model: &NeuralSteerer, evals: &Evals, grads: &[Vec<C64>], total: &mut [f64]) {
    let mut start = 0;
    let offsets: Vec<usize> = evals
        .chunks
        .iter()
        .map(|e| {
            let s = start;
            start += e.num_directions();
            s
        })
        .collect();
    let run = |j: usize, g: &mut [f64]| {
        let e = &evals.chunks[j];
        let gh: Vec<C64> = grads[offsets[j]..offsets[j] + e.num_directions()]
            .iter()
            .flatten()
            .copied()
            .collect();
        model.backward(e, &gh, g);
    };
    if evals.chunks.len() == 1 {
        run(0, total);
        return;
    }
    let parts = map_indexed(evals.chunks.len(), |j| {
        let mut g = vec![0.0; total.len()];
        run(j, &mut g);
        g
    });
    for g in parts {
        for (t, v) in total.iter_mut().zip(&g) {
            *t += v;
        }
    }
}

/// Loss and parameter gradient of one optimization step.
pub fn step_loss_and_grad(
    model: &NeuralSteerer,
    set: &GridMeasurementSet,
    batch: &BatchSpec,
    offgrid: &[DoA],
    offgrid_axis: &FrequencyAxis,
    weights: &LossWeights,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let doas: Vec<DoA> = batch.doas.iter().map(|&n| set.node_doa(n)).collect();
    let evals = forward_all(model, &doas, &set.axis)?;
    let preds = evals.spectra(set.axis);
    let refs: Vec<Vec<ComplexSpectrum>> = batch.doas.iter().map(|&n| set.node_spectra(n)).collect();
    let off_evals = forward_all(model, offgrid, offgrid_axis)?;
    let off_preds = off_evals.spectra(*offgrid_axis);
    let (breakdown, lg) = total_loss_with_grad(&preds, &refs, &batch.freq_subset, &off_preds, weights)?;
    let mut grad = vec![0.0; model.num_params()];
    backward_all(model, &evals, &lg.batch, &mut grad);
    backward_all(model, &off_evals, &lg.offgrid, &mut grad);
    Ok((breakdown, grad))
}

/// Data-fit objective over `nodes`, every bin, without the causal term and with
/// uniform frequency weights.
pub fn validation_loss(
    model: &NeuralSteerer,
    set: &GridMeasurementSet,
    nodes: &[usize],
    weights: &LossWeights,
) -> Result<f64> {
    let doas: Vec<DoA> = nodes.iter().map(|&n| set.node_doa(n)).collect();
    let evals = forward_all(model, &doas, &set.axis)?;
    let preds = evals.spectra(set.axis);
    let refs: Vec<Vec<ComplexSpectrum>> = nodes.iter().map(|&n| set.node_spectra(n)).collect();
    let all: Vec<usize> = (0..set.axis.num_bins).collect();
    // frequency weights depend on the current residuals, so they are held at
    // 1 to keep the monitored value comparable across epochs
    let w = LossWeights {
        lambda_causal: 0.0,
        epsilon_freq: 0.0,
        ..*weights
    };
    Ok(total_loss(&preds, &refs, &all, &[], &w)?.total)
}

fn check_compatible(model: &NeuralSteerer, set: &GridMeasurementSet, split: &Split) -> Result<()> {
    if model.num_channels() != set.num_channels() {
        return Err(Error::arg(format!(
            "model has {} channels, dataset {}",
            model.num_channels(),
            set.num_channels()
        )));
    }
    if model.axis != set.axis {
        return Err(Error::arg("model and dataset frequency axes differ"));
    }
    if split.validation.is_empty() || split.train.is_empty() {
        return Err(Error::arg("training needs non-empty training and validation node sets"));
    }
    if let Some(&bad) = split
        .train
        .iter()
        .chain(&split.validation)
        .find(|&&n| n >= set.num_nodes())
    {
        return Err(Error::Index {
            index: bad,
            len: set.num_nodes(),
        });
    }
    Ok(())
}

/// Trains from scratch.
pub fn train(model: NeuralSteerer, set: &GridMeasurementSet, split: &Split, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_compatible(&model, set, split)?;
    let optimizer = Adam::new(model.num_params(), cfg.lr0, cfg.lr_decay)?;
    let state = TrainState {
        epochs_done: 0,
        best_val: None,
        best_epoch: 0,
        stale_epochs: 0,
        stopped_early: false,
        adam_steps: 0,
        train_nodes: split.train.clone(),
        validation_nodes: split.validation.clone(),
        config: cfg.clone(),
        history: Vec::new(),
    };
    run(
        TrainOutcome {
            final_model: model.clone(),
            model,
            state,
            optimizer,
        },
        set,
        cfg,
    )
}

/// Restores a run saved by [`train`] and continues up to `cfg.epochs_max`.
/// Only the epoch budget and logging/checkpoint settings may change.
pub fn resume(
    path: impl AsRef<Path>,
    set: &GridMeasurementSet,
    split: &Split,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let ckpt = load_checkpoint(path)?;
    let outcome = outcome_from_checkpoint(ckpt)?;
    let saved = &outcome.state.config;
    let comparable = TrainConfig {
        epochs_max: saved.epochs_max,
        checkpoint_path: saved.checkpoint_path.clone(),
        checkpoint_every: saved.checkpoint_every,
        log_every: saved.log_every,
        ..cfg.clone()
    };
    if &comparable != saved {
        return Err(Error::format(0, "training settings differ from the checkpointed run"));
    }
    if outcome.state.train_nodes != split.train || outcome.state.validation_nodes != split.validation {
        return Err(Error::format(0, "split differs from the checkpointed run"));
    }
    check_compatible(&outcome.model, set, split).map_err(|e| Error::format(0, e.to_string()))?;
    let mut outcome = outcome;
    outcome.state.config = cfg.clone();
    run(outcome, set, cfg)
}

pub fn outcome_from_checkpoint(ckpt: Checkpoint) -> Result<TrainOutcome> {
    let bad = |msg: &str| Error::format(0, format!("checkpoint cannot be resumed: {msg}"));
    let state: TrainState = serde_json::from_value(ckpt.training.clone()).map_err(|e| bad(&e.to_string()))?;
    let n = ckpt.model.num_params();
    let get = |name: &str| -> Result<Vec<f64>> {
        let v = ckpt
            .extra(name)
            .ok_or_else(|| bad(&format!("missing array '{name}'")))?;
        if v.len() != n {
            return Err(bad(&format!("array '{name}' has {} entries, model needs {n}", v.len())));
        }
        Ok(v.to_vec())
    };
    let mut final_model = ckpt.model.clone();
    final_model.set_flat_params(&get("current")?)?;
    let mut optimizer = Adam::new(n, state.config.lr0, state.config.lr_decay)?;
    optimizer.m = get("adam_m")?;
    optimizer.v = get("adam_v")?;
    optimizer.step_count = state.adam_steps;
    optimizer.epochs_done = state.epochs_done;
    Ok(TrainOutcome {
        model: ckpt.model,
        final_model,
        state,
        optimizer,
    })
}

fn save(outcome: &TrainOutcome, path: &Path) -> Result<()> {
    save_checkpoint(path, &outcome.to_checkpoint()?)
}

fn clip_global_norm(grad: &mut [f64], max_norm: f64) {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

fn run(mut outcome: TrainOutcome, set: &GridMeasurementSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let start = Instant::now();
    let model = &mut outcome.final_model;
    let subset = match model.config.freq_mode {
        FreqMode::Discrete => set.axis.num_bins,
        FreqMode::Continuous => cfg.freq_subset_size,
    };
    let train_nodes = outcome.state.train_nodes.clone();
    let val_nodes = outcome.state.validation_nodes.clone();
    let batch_size = cfg.batch_size.min(train_nodes.len());
    let batches = BatchIterator::new(&train_nodes, batch_size, subset, set.axis.num_bins, cfg.seed)?;
    let multipliers = model.lr_multipliers(cfg.physical_lr_scale);
    let offgrid_seed = derive_seed(cfg.seed, OFFGRID_STREAM);

    while outcome.state.epochs_done < cfg.epochs_max && !outcome.state.stopped_early {
        let epoch = outcome.state.epochs_done;
        let lr = outcome.optimizer.learning_rate();
        let specs = batches.epoch(epoch);
        let mut sums = LossBreakdown::default();
        for (b, batch) in specs.iter().enumerate() {
            let mut rng = stream_rng(derive_seed(offgrid_seed, epoch as u64), b as u64);
            let (offgrid, axis) = if cfg.weights.lambda_causal > 0.0 {
                let axis = offgrid_axis(model, &mut rng)?;
                let doas: Vec<DoA> = (0..batch_size).map(|_| sample_sphere_doa(&mut rng)).collect();
                (doas, axis)
            } else {
                (Vec::new(), model.axis)
            };
            let (loss, mut grad) = step_loss_and_grad(model, set, batch, &offgrid, &axis, &cfg.weights)?;
            let finite = loss.total.is_finite() && grad.iter().all(|g| g.is_finite());
            if !finite {
                return Err(Error::NonFinite {
                    epoch: epoch + 1,
                    batch: b,
                    detail: format!(
                        "doas {:?}, bins {:?}, logmag {}, phase {}, time {}, causal {}, offgrid {:?}",
                        batch.doas, batch.freq_subset, loss.logmag, loss.phase, loss.time, loss.causal, offgrid
                    ),
                });
            }
            clip_global_norm(&mut grad, cfg.grad_clip);
            let mut params = model.flat_params();
            outcome.optimizer.step(&mut params, &grad, Some(&multipliers))?;
            model.set_flat_params(&params)?;
            sums.logmag += loss.logmag;
            sums.phase += loss.phase;
            sums.time += loss.time;
            sums.causal += loss.causal;
            sums.total += loss.total;
        }
        outcome.optimizer.end_epoch();
        let nb = specs.len() as f64;
        let val = validation_loss(model, set, &val_nodes, &cfg.weights)?;
        if !val.is_finite() {
            return Err(Error::NonFinite {
                epoch: epoch + 1,
                batch: specs.len(),
                detail: format!("validation loss over nodes {val_nodes:?}"),
            });
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            lr,
            logmag: sums.logmag / nb,
            phase: sums.phase / nb,
            time: sums.time / nb,
            causal: sums.causal / nb,
            total: sums.total / nb,
            val_loss: val,
            wall_time: start.elapsed().as_secs_f64(),
        };
        if cfg.log_every > 0 && (epoch + 1).is_multiple_of(cfg.log_every) {
            eprintln!(
                "epoch {:>4}  lr {:.3e}  train {:.5}  val {:.5}",
                record.epoch, record.lr, record.total, record.val_loss
            );
        }
        let state = &mut outcome.state;
        state.history.push(record);
        state.epochs_done = epoch + 1;
        state.adam_steps = outcome.optimizer.step_count;
        if state.best_val.is_none_or(|best| val < best) {
            state.best_val = Some(val);
            state.best_epoch = epoch + 1;
            state.stale_epochs = 0;
            outcome.model = model.clone();
        } else {
            state.stale_epochs += 1;
            if state.stale_epochs >= cfg.patience {
                state.stopped_early = true;
            }
        }
        if let Some(path) = &cfg.checkpoint_path {
            if cfg.checkpoint_every > 0 && state.epochs_done.is_multiple_of(cfg.checkpoint_every) {
                let snapshot = TrainOutcome {
                    model: outcome.model.clone(),
                    final_model: model.clone(),
                    state: state.clone(),
                    optimizer: outcome.optimizer.clone(),
                };
                save(&snapshot, path)?;
            }
        }
    }
    if let Some(path) = &cfg.checkpoint_path {
        save(&outcome, path)?;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{generate_synthetic, ring_array, SyntheticSceneConfig};
    use crate::data::{make_split, SplitMode, SplitSpec};
    use crate::model::{SteererConfig, Variant};

    fn tiny_set() -> GridMeasurementSet {
        let cfg = SyntheticSceneConfig {
            geometry: ring_array(2, 0.06),
            ..SyntheticSceneConfig::default()
        };
        generate_synthetic(&cfg, 8, 5, FrequencyAxis::new(16000.0, 17).unwrap()).unwrap()
    }

    fn tiny_model(set: &GridMeasurementSet, mode: FreqMode) -> NeuralSteerer {
        let cfg = SteererConfig {
            variant: Variant::MagThenPhase,
            freq_mode: mode,
            hidden_main: vec![16, 16],
            hidden_phase: vec![16],
            omega0: 10.0,
            seed: 3,
        };
        NeuralSteerer::new(cfg, set.geometry.clone(), set.axis).unwrap()
    }

    fn split(set: &GridMeasurementSet) -> Split {
        make_split(
            set,
            &SplitSpec {
                mode: SplitMode::RandomFraction(0.6),
                ..SplitSpec::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_epochs_is_identity() {
        let set = tiny_set();
        let model = tiny_model(&set, FreqMode::Discrete);
        let cfg = TrainConfig {
            epochs_max: 0,
            ..TrainConfig::default()
        };
        let out = train(model.clone(), &set, &split(&set), &cfg).unwrap();
        assert_eq!(out.model, model);
        assert!(out.log().is_empty());
    }

    #[test]
    fn learning_rate_schedule_is_exact() {
        let set = tiny_set();
        let cfg = TrainConfig {
            epochs_max: 4,
            batch_size: 6,
            patience: 100,
            ..TrainConfig::default()
        };
        let out = train(tiny_model(&set, FreqMode::Discrete), &set, &split(&set), &cfg).unwrap();
        for (k, r) in out.log().iter().enumerate() {
            assert_eq!(r.lr, cfg.lr0 * cfg.lr_decay.powi(k as i32));
        }
        assert_eq!(out.optimizer.learning_rate(), cfg.lr0 * cfg.lr_decay.powi(4));
    }

    #[test]
    fn best_model_has_lowest_validation_loss() {
        let set = tiny_set();
        let sp = split(&set);
        let cfg = TrainConfig {
            epochs_max: 15,
            batch_size: 6,
            lr0: 5e-3,
            patience: 100,
            ..TrainConfig::default()
        };
        let out = train(tiny_model(&set, FreqMode::Continuous), &set, &sp, &cfg).unwrap();
        let best = validation_loss(&out.model, &set, &sp.validation, &cfg.weights).unwrap();
        let last = validation_loss(&out.final_model, &set, &sp.validation, &cfg.weights).unwrap();
        assert!(best <= last);
        let min = out.log().iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(best, min);
    }

    #[test]
    fn early_stop_after_patience_stale_epochs() {
        let set = tiny_set();
        // a vanishing learning rate makes every epoch after the first stale
        let cfg = TrainConfig {
            epochs_max: 50,
            batch_size: 6,
            lr0: 1e-300,
            patience: 3,
            ..TrainConfig::default()
        };
        let out = train(tiny_model(&set, FreqMode::Discrete), &set, &split(&set), &cfg).unwrap();
        assert!(out.state.stopped_early);
        assert_eq!(out.log().len(), 1 + 3);
    }

    #[test]
    fn nan_data_aborts_with_diagnostics() {
        let mut set = tiny_set();
        let sp = split(&set);
        let n = sp.train[0];
        let off = n * set.num_channels() * 17;
        set.data[off].re = f32::NAN;
        let cfg = TrainConfig {
            epochs_max: 1,
            batch_size: sp.train.len(),
            ..TrainConfig::default()
        };
        let err = train(tiny_model(&set, FreqMode::Discrete), &set, &sp, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonFinite { epoch: 1, batch: 0, .. }), "{err}");
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let set = tiny_set();
        let sp = split(&set);
        let dir = tempfile::tempdir().unwrap();
        let full_path = dir.path().join("full.ckpt");
        let part_path = dir.path().join("part.ckpt");
        let base = TrainConfig {
            epochs_max: 6,
            batch_size: 6,
            patience: 100,
            ..TrainConfig::default()
        };
        let full = TrainConfig {
            checkpoint_path: Some(full_path.clone()),
            ..base.clone()
        };
        train(tiny_model(&set, FreqMode::Continuous), &set, &sp, &full).unwrap();
        let part = TrainConfig {
            epochs_max: 3,
            checkpoint_path: Some(part_path.clone()),
            ..base.clone()
        };
        train(tiny_model(&set, FreqMode::Continuous), &set, &sp, &part).unwrap();
        let resumed = TrainConfig {
            checkpoint_path: Some(part_path.clone()),
            ..base
        };
        resume(&part_path, &set, &sp, &resumed).unwrap();
        assert_eq!(std::fs::read(&full_path).unwrap(), std::fs::read(&part_path).unwrap());
    }

    #[test]
    fn sphere_samples_are_unit_and_cover_both_hemispheres() {
        let mut rng = stream_rng(1, 2);
        let doas: Vec<DoA> = (0..400).map(|_| sample_sphere_doa(&mut rng)).collect();
        let mean_z = doas.iter().map(|d| d.elevation.sin()).sum::<f64>() / 400.0;
        assert!(mean_z.abs() < 0.15);
        assert!(doas.iter().all(|d| d.elevation.abs() <= PI / 2.0));
    }
}
