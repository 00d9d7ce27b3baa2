//! The five end-to-end commands behind the command-line front end. Each
//! takes a [`RunConfig`] and reports the files it wrote plus a short summary.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::baseline::{NearestModel, ScfModel};
use crate::config::{ProtocolKind, RunConfig};
use crate::data::synth::{azimuth_grid, elevation_grid};
use crate::data::{
    generate_synthetic, load_dataset, make_split, save_dataset, GridMeasurementSet, Split, SplitMode, SplitSpec,
};
use crate::error::{Error, Result};
use crate::eval::{run_protocol, write_reports_csv, write_reports_json, MetricReport, Protocol, SteeringPredictor};
use crate::model::{load_checkpoint, FreqMode, NeuralSteerer, SteererConfig};
use crate::sigproc::{idft_real, DoA, FrequencyAxis};
use crate::train::{resume, train, write_log_csv, TrainConfig};

/// Files written and human-readable summary lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.checkpoint
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("model.ckpt"))
}

/// Generates the configured synthetic scene and writes it to `dataset`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<CommandOutput> {
    let s = &cfg.scene;
    let set = generate_synthetic(&s.scene_config(), s.num_azimuths, s.num_elevations, s.axis()?)?;
    if let Some(parent) = cfg.dataset.parent() {
        ensure_dir(parent)?;
    }
    save_dataset(&set, &cfg.dataset)?;
    Ok(CommandOutput {
        files: vec![cfg.dataset.clone()],
        summary: vec![format!(
            "wrote {}: {} azimuths x {} elevations x {} channels x {} bins at {} Hz",
            cfg.dataset.display(),
            set.num_azimuths(),
            set.num_elevations(),
            set.num_channels(),
            set.axis.num_bins,
            set.axis.sample_rate_hz
        )],
    })
}

fn load_with_split(cfg: &RunConfig) -> Result<(GridMeasurementSet, Split)> {
    let set = load_dataset(&cfg.dataset)?;
    let split = make_split(&set, &cfg.split)?;
    Ok((set, split))
}

/// Trains (or resumes) a model; writes the checkpoint and the epoch log.
pub fn cmd_train(cfg: &RunConfig) -> Result<CommandOutput> {
    let (set, split) = load_with_split(cfg)?;
    ensure_dir(&cfg.output_dir)?;
    let ckpt = checkpoint_path(cfg);
    if let Some(parent) = ckpt.parent() {
        ensure_dir(parent)?;
    }
    let tcfg = TrainConfig {
        checkpoint_path: Some(ckpt.clone()),
        ..cfg.train.clone()
    };
    let outcome = if cfg.resume && ckpt.exists() {
        resume(&ckpt, &set, &split, &tcfg)?
    } else {
        let model = NeuralSteerer::new(cfg.model.clone(), set.geometry.clone(), set.axis)?;
        train(model, &set, &split, &tcfg)?
    };
    let log_path = cfg.output_dir.join("train_log.csv");
    write_log_csv(outcome.log(), &log_path)?;
    let st = &outcome.state;
    Ok(CommandOutput {
        files: vec![ckpt.clone(), log_path],
        summary: vec![format!(
            "trained {} epochs ({} train / {} validation nodes); best validation loss {:.6} at epoch {}{}; checkpoint {}",
            st.epochs_done,
            split.train.len(),
            split.validation.len(),
            st.best_val.unwrap_or(f64::NAN),
            st.best_epoch,
            if st.stopped_early { " (early stop)" } else { "" },
            ckpt.display()
        )],
    })
}

fn protocol_for(cfg: &RunConfig, set: &GridMeasurementSet) -> Result<Protocol> {
    match cfg.eval.protocol {
        ProtocolKind::Interpolation => Ok(Protocol::Interpolation),
        ProtocolKind::RandomFraction => match cfg.split.mode {
            SplitMode::RandomFraction(p) => Ok(Protocol::RandomFraction(p)),
            _ => Err(Error::arg("random_fraction protocol needs split.mode = random:<p>")),
        },
        ProtocolKind::FreqSuperres => Ok(Protocol::FreqSuperres(FrequencyAxis::new(
            set.axis.sample_rate_hz,
            cfg.eval.superres_bins,
        )?)),
    }
}

fn load_model(cfg: &RunConfig) -> Result<NeuralSteerer> {
    let path = cfg
        .checkpoint
        .clone()
        .ok_or_else(|| Error::arg("this command needs `checkpoint`"))?;
    Ok(load_checkpoint(path)?.model)
}

/// Evaluates the configured models under one protocol; writes
/// `metrics.csv` (per node and channel) and `metrics.json` (summaries).
pub fn cmd_eval(cfg: &RunConfig) -> Result<CommandOutput> {
    let (set, split) = load_with_split(cfg)?;
    let protocol = protocol_for(cfg, &set)?;
    if cfg.eval.models.is_empty() {
        return Err(Error::arg("eval.models is empty"));
    }
    let mut predictors: Vec<Box<dyn SteeringPredictor>> = Vec::new();
    for name in &cfg.eval.models {
        let p: Box<dyn SteeringPredictor> = match name.as_str() {
            "checkpoint" => {
                let model = load_model(cfg)?;
                if model.num_channels() != set.num_channels() {
                    return Err(Error::arg("checkpoint and dataset channel counts differ"));
                }
                Box::new(model)
            }
            "scf" => Box::new(ScfModel::fit_nodes(&set, &split.fit_nodes())?.with_components(cfg.eval.scf_components)),
            "nearest" => Box::new(NearestModel::new(&set, &split.fit_nodes())?),
            "oracle" => Box::new(
                set.scene()
                    .ok_or_else(|| Error::arg("oracle model needs a synthetic dataset"))?,
            ),
            other => return Err(Error::arg(format!("unknown model '{other}'"))),
        };
        predictors.push(p);
    }
    let mut reports = Vec::new();
    for p in &predictors {
        reports.extend(run_protocol(p.as_ref(), &set, &split, &protocol, cfg.eval.lsd_band)?);
    }
    ensure_dir(&cfg.output_dir)?;
    let csv = cfg.output_dir.join("metrics.csv");
    let json = cfg.output_dir.join("metrics.json");
    write_reports_csv(&reports, &csv)?;
    write_reports_json(&reports, &json)?;
    Ok(CommandOutput {
        files: vec![csv, json],
        summary: reports.iter().map(summary_line).collect(),
    })
}

fn summary_line(r: &MetricReport) -> String {
    format!(
        "{:<28} {:<22} {:<9} nodes {:>4}  rmse {:.6}  cos {:.6}  lsd {:.4} dB",
        r.model,
        r.protocol,
        r.split.to_string(),
        r.node_count,
        r.rmse_time,
        r.cosine_distance_time,
        r.lsd_db
    )
}

fn query_doas(cfg: &RunConfig) -> Result<Vec<DoA>> {
    let mut doas: Vec<DoA> = cfg
        .interp
        .doas_deg
        .iter()
        .map(|&(a, e)| DoA::from_degrees(a, e))
        .collect::<Result<_>>()?;
    if let Some((na, ne)) = cfg.interp.grid {
        if na == 0 || ne == 0 {
            return Err(Error::arg("interp.grid needs positive counts"));
        }
        for &a in &azimuth_grid(na) {
            for &e in &elevation_grid(ne) {
                doas.push(DoA::new(a, e)?);
            }
        }
    }
    if doas.is_empty() {
        return Err(Error::arg("no query directions (set interp.doas or interp.grid)"));
    }
    Ok(doas)
}

/// Queries a checkpoint at arbitrary directions; writes `interp.csv` and
/// optionally one 32-bit float WAV per (direction, channel).
pub fn cmd_interp(cfg: &RunConfig) -> Result<CommandOutput> {
    let model = load_model(cfg)?;
    let doas = query_doas(cfg)?;
    let axis = match cfg.interp.num_bins {
        Some(bins) => FrequencyAxis::new(model.axis.sample_rate_hz, bins)?,
        None => model.axis,
    };
    if model.config.freq_mode == FreqMode::Discrete && axis != model.axis {
        return Err(Error::arg(format!(
            "discrete-frequency model only answers on its {}-bin training axis",
            model.axis.num_bins
        )));
    }
    let dataset = if cfg.dataset.exists() {
        Some(load_dataset(&cfg.dataset)?)
    } else {
        None
    };
    ensure_dir(&cfg.output_dir)?;
    let csv_path = cfg.output_dir.join("interp.csv");
    let mut csv = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    writeln!(csv, "doa,azimuth_deg,elevation_deg,channel,f_hz,re,im")?;
    let mut files = vec![csv_path];
    let mut summary = Vec::new();
    let mut worst_residual: Option<f64> = None;
    for (j, doa) in doas.iter().enumerate() {
        let spectra = model.predict(doa, &axis)?;
        for (i, spec) in spectra.iter().enumerate() {
            for (k, v) in spec.values.iter().enumerate() {
                writeln!(
                    csv,
                    "{j},{},{},{i},{},{},{}",
                    doa.azimuth.to_degrees(),
                    doa.elevation.to_degrees(),
                    axis.freq(k),
                    v.re,
                    v.im
                )?;
            }
            if cfg.interp.wav {
                let dir = cfg.output_dir.join("wav");
                ensure_dir(&dir)?;
                let path = dir.join(format!("doa{j:04}_ch{i}.wav"));
                write_wav(&path, &idft_real(spec).samples, axis.sample_rate_hz)?;
                files.push(path);
            }
        }
        if let Some(set) = &dataset {
            if let Some(node) = matching_node(set, doa) {
                if set.axis == axis && set.num_channels() == spectra.len() {
                    let r = spectra
                        .iter()
                        .enumerate()
                        .flat_map(|(i, s)| s.values.iter().enumerate().map(move |(k, v)| (i, k, *v)))
                        .map(|(i, k, v)| (v - set.value(node, i, k)).norm())
                        .fold(0.0, f64::max);
                    worst_residual = Some(worst_residual.map_or(r, |w: f64| w.max(r)));
                }
            }
        }
    }
    csv.flush()?;
    summary.push(format!(
        "queried {} directions x {} channels on {} bins",
        doas.len(),
        model.num_channels(),
        axis.num_bins
    ));
    if let Some(r) = worst_residual {
        summary.push(format!("max |residual| against dataset at grid nodes: {r:.6e}"));
    }
    Ok(CommandOutput { files, summary })
}

fn matching_node(set: &GridMeasurementSet, doa: &DoA) -> Option<usize> {
    (0..set.num_nodes()).find(|&n| set.node_doa(n).angle_to(doa) < 1e-9)
}

fn write_wav(path: &Path, samples: &[f64], sample_rate_hz: f64) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz.round() as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let io_err = |e: hound::Error| Error::Io(std::io::Error::other(e.to_string()));
    let mut w = hound::WavWriter::create(path, spec).map_err(io_err)?;
    for &s in samples {
        w.write_sample(s as f32).map_err(io_err)?;
    }
    w.finalize().map_err(io_err)
}

/// One training run of the sweep: the configured model trained on `split`.
pub fn train_on_split(
    set: &GridMeasurementSet,
    split: &Split,
    model_cfg: &SteererConfig,
    train_cfg: &TrainConfig,
) -> Result<NeuralSteerer> {
    let model = NeuralSteerer::new(model_cfg.clone(), set.geometry.clone(), set.axis)?;
    let tcfg = TrainConfig {
        checkpoint_path: None,
        ..train_cfg.clone()
    };
    Ok(train(model, set, split, &tcfg)?.model)
}

/// Plot-ready CSVs: held-out metrics against training fraction
/// (`fraction_sweep.csv`) and, given a continuous-frequency checkpoint, LSD
/// against evaluation resolution (`superres_lsd.csv`).
pub fn cmd_export(cfg: &RunConfig) -> Result<CommandOutput> {
    if cfg.export.fractions.is_empty() || cfg.export.seeds.is_empty() {
        return Err(Error::arg(
            "export sweep is empty (export.fractions and export.seeds must be non-empty)",
        ));
    }
    let set = load_dataset(&cfg.dataset)?;
    ensure_dir(&cfg.output_dir)?;
    let sweep_path = cfg.output_dir.join("fraction_sweep.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(&sweep_path)?);
    writeln!(out, "fraction,seed,model,metric,value")?;
    let mut summary = Vec::new();
    for &p in &cfg.export.fractions {
        for &seed in &cfg.export.seeds {
            let split = make_split(
                &set,
                &SplitSpec {
                    mode: SplitMode::RandomFraction(p),
                    validation_fraction: cfg.split.validation_fraction,
                    seed,
                },
            )?;
            let model_cfg = SteererConfig {
                seed,
                ..cfg.model.clone()
            };
            let train_cfg = TrainConfig {
                seed,
                ..cfg.train.clone()
            };
            let model = train_on_split(&set, &split, &model_cfg, &train_cfg)?;
            let nearest = NearestModel::new(&set, &split.fit_nodes())?;
            let predictors: [&dyn SteeringPredictor; 2] = [&model, &nearest];
            for pred in predictors {
                let held = &run_protocol(pred, &set, &split, &Protocol::RandomFraction(p), cfg.eval.lsd_band)?[0];
                for (metric, value) in [
                    ("rmse_time", held.rmse_time),
                    ("cosine_distance_time", held.cosine_distance_time),
                    ("lsd_db", held.lsd_db),
                ] {
                    writeln!(out, "{p},{seed},{},{metric},{value}", held.model)?;
                }
            }
            summary.push(format!("fraction {p} seed {seed} done"));
        }
    }
    out.flush()?;
    let mut files = vec![sweep_path];

    if let Some(path) = &cfg.checkpoint {
        if !cfg.export.superres_bins.is_empty() {
            let model = load_checkpoint(path)?.model;
            let split = make_split(&set, &cfg.split)?;
            let sr_path = cfg.output_dir.join("superres_lsd.csv");
            let mut sr = std::io::BufWriter::new(std::fs::File::create(&sr_path)?);
            writeln!(sr, "num_bins,split,lsd_db,lsd_edge_db,rmse_time")?;
            for &bins in &cfg.export.superres_bins {
                let axis = FrequencyAxis::new(set.axis.sample_rate_hz, bins)?;
                for r in run_protocol(&model, &set, &split, &Protocol::FreqSuperres(axis), cfg.eval.lsd_band)? {
                    writeln!(sr, "{bins},{},{},{},{}", r.split, r.lsd_db, r.lsd_edge_db, r.rmse_time)?;
                }
            }
            sr.flush()?;
            files.push(sr_path);
            summary.push(format!(
                "super-resolution sweep over {:?} bins",
                cfg.export.superres_bins
            ));
        }
    }
    Ok(CommandOutput { files, summary })
}
