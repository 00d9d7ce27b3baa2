//! Flat `key = value` run configuration shared by every command.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baseline::ScfComponents;
use crate::data::synth::{ring_array, SyntheticSceneConfig};
use crate::data::{SplitMode, SplitSpec};
use crate::error::{Error, Result};
use crate::model::{FreqMode, SteererConfig, Variant};
use crate::sigproc::{FrequencyAxis, DEFAULT_SPEED_OF_SOUND};
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSettings {
    pub num_azimuths: usize,
    pub num_elevations: usize,
    pub num_bins: usize,
    pub sample_rate_hz: f64,
    pub num_mics: usize,
    pub array_radius: f64,
    pub speed_of_sound: f64,
    pub tau: f64,
    pub air_alpha: f64,
    pub directivity_order: u32,
    pub directivity_tilt: f64,
    pub noise_std: f64,
    pub mic_offset_std: f64,
    pub seed: u64,
}

impl Default for SceneSettings {
    fn default() -> Self {
        let d = SyntheticSceneConfig::default();
        Self {
            num_azimuths: 24,
            num_elevations: 9,
            num_bins: 65,
            sample_rate_hz: 16000.0,
            num_mics: 4,
            array_radius: 0.08,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            tau: d.tau_true,
            air_alpha: d.air_alpha,
            directivity_order: d.directivity_order,
            directivity_tilt: d.directivity_tilt,
            noise_std: d.noise_std,
            mic_offset_std: d.mic_offset_std,
            seed: d.seed,
        }
    }
}

impl SceneSettings {
    pub fn scene_config(&self) -> SyntheticSceneConfig {
        let mut geometry = ring_array(self.num_mics, self.array_radius);
        geometry.speed_of_sound = self.speed_of_sound;
        SyntheticSceneConfig {
            geometry,
            tau_true: self.tau,
            air_alpha: self.air_alpha,
            directivity_order: self.directivity_order,
            directivity_tilt: self.directivity_tilt,
            noise_std: self.noise_std,
            seed: self.seed,
            mic_offset_std: self.mic_offset_std,
        }
    }

    pub fn axis(&self) -> Result<FrequencyAxis> {
        FrequencyAxis::new(self.sample_rate_hz, self.num_bins)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProtocolKind {
    Interpolation,
    RandomFraction,
    FreqSuperres,
}

impl FromStr for ProtocolKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "interpolation" => Ok(ProtocolKind::Interpolation),
            "random_fraction" => Ok(ProtocolKind::RandomFraction),
            "freq_superres" => Ok(ProtocolKind::FreqSuperres),
            _ => Err(format!(
                "unknown protocol '{s}' (interpolation | random_fraction | freq_superres)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSettings {
    pub protocol: ProtocolKind,
    /// Any of `checkpoint`, `scf`, `nearest`, `oracle`.
    pub models: Vec<String>,
    pub superres_bins: usize,
    pub lsd_band: Option<(f64, f64)>,
    pub scf_components: ScfComponents,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            protocol: ProtocolKind::Interpolation,
            models: vec!["checkpoint".into(), "scf".into(), "nearest".into()],
            superres_bins: 129,
            lsd_band: None,
            scf_components: ScfComponents::RealImag,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct InterpSettings {
    /// Explicit `(azimuth, elevation)` pairs in degrees.
    pub doas_deg: Vec<(f64, f64)>,
    /// Alternatively an `A × E` query grid.
    pub grid: Option<(usize, usize)>,
    /// Bins of the query axis (default: the model's axis).
    pub num_bins: Option<usize>,
    pub wav: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExportSettings {
    pub fractions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub superres_bins: Vec<usize>,
}

impl Default for ExportSettings {
    fn default() -> Self {
        Self {
            fractions: (1..=9).map(|k| k as f64 / 10.0).collect(),
            seeds: vec![0, 1, 2],
            superres_bins: vec![33, 65, 129],
        }
    }
}

/// Every setting of every command; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub resume: bool,
    pub scene: SceneSettings,
    pub split: SplitSpec,
    pub model: SteererConfig,
    pub train: TrainConfig,
    pub eval: EvalSettings,
    pub interp: InterpSettings,
    pub export: ExportSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("dataset.nsv"),
            checkpoint: None,
            output_dir: PathBuf::from("out"),
            resume: false,
            scene: SceneSettings::default(),
            split: SplitSpec::default(),
            model: SteererConfig::default(),
            train: TrainConfig::default(),
            eval: EvalSettings::default(),
            interp: InterpSettings::default(),
            export: ExportSettings::default(),
        }
    }
}

fn parse<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: Display,
{
    value.parse::<T>().map_err(|e| format!("cannot parse '{value}': {e}"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true/false, got '{value}'")),
    }
}

fn parse_list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: Display,
{
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(v.trim())).collect()
}

fn parse_pair<T: FromStr>(value: &str, sep: char) -> std::result::Result<(T, T), String>
where
    T::Err: Display,
{
    let (a, b) = value
        .split_once(sep)
        .ok_or_else(|| format!("expected two values separated by '{sep}', got '{value}'"))?;
    Ok((parse(a.trim())?, parse(b.trim())?))
}

impl RunConfig {
    /// Every accepted key, in documentation order.
    pub const KEYS: &'static [&'static str] = &[
        "dataset",
        "checkpoint",
        "output_dir",
        "resume",
        "scene.num_azimuths",
        "scene.num_elevations",
        "scene.num_bins",
        "scene.sample_rate",
        "scene.num_mics",
        "scene.array_radius",
        "scene.speed_of_sound",
        "scene.tau",
        "scene.air_alpha",
        "scene.directivity_order",
        "scene.directivity_tilt",
        "scene.noise_std",
        "scene.mic_offset_std",
        "scene.seed",
        "split.mode",
        "split.validation_fraction",
        "split.seed",
        "model.variant",
        "model.freq_mode",
        "model.hidden_main",
        "model.hidden_phase",
        "model.omega0",
        "model.seed",
        "loss.lambda1",
        "loss.lambda2",
        "loss.lambda_causal",
        "loss.epsilon_freq",
        "loss.eps_log",
        "train.epochs_max",
        "train.batch_size",
        "train.lr0",
        "train.lr_decay",
        "train.patience",
        "train.freq_subset_size",
        "train.seed",
        "train.grad_clip",
        "train.physical_lr_scale",
        "train.checkpoint_every",
        "train.log_every",
        "eval.protocol",
        "eval.models",
        "eval.superres_bins",
        "eval.lsd_band",
        "eval.scf_components",
        "interp.doas",
        "interp.grid",
        "interp.num_bins",
        "interp.wav",
        "export.fractions",
        "export.seeds",
        "export.superres_bins",
    ];

    /// Sets one key. The error message carries no location.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key {
            "dataset" => self.dataset = PathBuf::from(v),
            "checkpoint" => self.checkpoint = (!v.is_empty()).then(|| PathBuf::from(v)),
            "output_dir" => self.output_dir = PathBuf::from(v),
            "resume" => self.resume = parse_bool(v)?,
            "scene.num_azimuths" => self.scene.num_azimuths = parse(v)?,
            "scene.num_elevations" => self.scene.num_elevations = parse(v)?,
            "scene.num_bins" => self.scene.num_bins = parse(v)?,
            "scene.sample_rate" => self.scene.sample_rate_hz = parse(v)?,
            "scene.num_mics" => self.scene.num_mics = parse(v)?,
            "scene.array_radius" => self.scene.array_radius = parse(v)?,
            "scene.speed_of_sound" => self.scene.speed_of_sound = parse(v)?,
            "scene.tau" => self.scene.tau = parse(v)?,
            "scene.air_alpha" => self.scene.air_alpha = parse(v)?,
            "scene.directivity_order" => self.scene.directivity_order = parse(v)?,
            "scene.directivity_tilt" => self.scene.directivity_tilt = parse(v)?,
            "scene.noise_std" => self.scene.noise_std = parse(v)?,
            "scene.mic_offset_std" => self.scene.mic_offset_std = parse(v)?,
            "scene.seed" => self.scene.seed = parse(v)?,
            "split.mode" => self.split.mode = parse::<SplitMode>(v)?,
            "split.validation_fraction" => self.split.validation_fraction = parse(v)?,
            "split.seed" => self.split.seed = parse(v)?,
            "model.variant" => self.model.variant = parse::<Variant>(v)?,
            "model.freq_mode" => self.model.freq_mode = parse::<FreqMode>(v)?,
            "model.hidden_main" => self.model.hidden_main = parse_list(v)?,
            "model.hidden_phase" => self.model.hidden_phase = parse_list(v)?,
            "model.omega0" => self.model.omega0 = parse(v)?,
            "model.seed" => self.model.seed = parse(v)?,
            "loss.lambda1" => self.train.weights.lambda1 = parse(v)?,
            "loss.lambda2" => self.train.weights.lambda2 = parse(v)?,
            "loss.lambda_causal" => self.train.weights.lambda_causal = parse(v)?,
            "loss.epsilon_freq" => self.train.weights.epsilon_freq = parse(v)?,
            "loss.eps_log" => self.train.weights.eps_log = parse(v)?,
            "train.epochs_max" => self.train.epochs_max = parse(v)?,
            "train.batch_size" => self.train.batch_size = parse(v)?,
            "train.lr0" => self.train.lr0 = parse(v)?,
            "train.lr_decay" => self.train.lr_decay = parse(v)?,
            "train.patience" => self.train.patience = parse(v)?,
            "train.freq_subset_size" => self.train.freq_subset_size = parse(v)?,
            "train.seed" => self.train.seed = parse(v)?,
            "train.grad_clip" => self.train.grad_clip = parse(v)?,
            "train.physical_lr_scale" => self.train.physical_lr_scale = parse(v)?,
            "train.checkpoint_every" => self.train.checkpoint_every = parse(v)?,
            "train.log_every" => self.train.log_every = parse(v)?,
            "eval.protocol" => self.eval.protocol = parse(v)?,
            "eval.models" => {
                let models: Vec<String> = parse_list(v)?;
                if let Some(bad) = models
                    .iter()
                    .find(|m| !["checkpoint", "scf", "nearest", "oracle"].contains(&m.as_str()))
                {
                    return Err(format!("unknown model '{bad}' (checkpoint | scf | nearest | oracle)"));
                }
                self.eval.models = models;
            }
            "eval.superres_bins" => self.eval.superres_bins = parse(v)?,
            "eval.lsd_band" => self.eval.lsd_band = if v.is_empty() { None } else { Some(parse_pair(v, ',')?) },
            "eval.scf_components" => self.eval.scf_components = parse(v)?,
            "interp.doas" => {
                self.interp.doas_deg = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(';')
                        .map(|p| parse_pair(p.trim(), ','))
                        .collect::<std::result::Result<_, _>>()?
                }
            }
            "interp.grid" => self.interp.grid = if v.is_empty() { None } else { Some(parse_pair(v, 'x')?) },
            "interp.num_bins" => self.interp.num_bins = if v.is_empty() { None } else { Some(parse(v)?) },
            "interp.wav" => self.interp.wav = parse_bool(v)?,
            "export.fractions" => self.export.fractions = parse_list(v)?,
            "export.seeds" => self.export.seeds = parse_list(v)?,
            "export.superres_bins" => self.export.superres_bins = parse_list(v)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let location = format!("{source}:{}", i + 1);
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                location: location.clone(),
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            self.set(key.trim(), value)
                .map_err(|msg| Error::Config { location, msg })?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    /// Applies a command-line `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| Error::Config {
            location: "--set".into(),
            msg: format!("expected key=value, got '{assignment}'"),
        })?;
        self.set(key.trim(), value).map_err(|msg| Error::Config {
            location: format!("--set {}", key.trim()),
            msg,
        })
    }
}
