//! Filter metrics, evaluation protocols and report serialization.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::{require_axis, scf_interpolate, NearestModel, ScfModel};
use crate::data::{GridMeasurementSet, Split, SyntheticScene};
use crate::error::{Error, Result};
use crate::model::{FreqMode, NeuralSteerer};
use crate::parallel::map_indexed;
use crate::sigproc::{idft_real, ComplexSpectrum, DoA, FrequencyAxis, TimeFilter};

/// Floor inside the LSD logarithms.
pub const LSD_EPS: f64 = 1e-8;
/// Lower edge of the default LSD band.
pub const LSD_BAND_LOW_HZ: f64 = 40.0;
/// Upper edge of the default LSD band as a fraction of Nyquist.
pub const LSD_BAND_HIGH_FRACTION: f64 = 0.95;

/// `[40 Hz, 0.95 · Fs/2]`.
pub fn default_lsd_band(sample_rate_hz: f64) -> (f64, f64) {
    (LSD_BAND_LOW_HZ, LSD_BAND_HIGH_FRACTION * sample_rate_hz / 2.0)
}

/// The top 5% of the spectrum, `(0.95 · Fs/2, Fs/2]`.
pub fn edge_band(sample_rate_hz: f64) -> (f64, f64) {
    let nyq = sample_rate_hz / 2.0;
    (LSD_BAND_HIGH_FRACTION * nyq * (1.0 + 1e-12), nyq)
}

fn check_lengths(est: &TimeFilter, reference: &TimeFilter) -> Result<()> {
    if est.samples.len() != reference.samples.len() {
        return Err(Error::arg(format!(
            "filter lengths differ: {} vs {}",
            est.samples.len(),
            reference.samples.len()
        )));
    }
    if est.samples.is_empty() {
        return Err(Error::arg("empty filter"));
    }
    Ok(())
}

/// Root mean square of the sample differences.
pub fn rmse_time(est: &TimeFilter, reference: &TimeFilter) -> Result<f64> {
    check_lengths(est, reference)?;
    let sum: f64 = est
        .samples
        .iter()
        .zip(&reference.samples)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok((sum / est.samples.len() as f64).sqrt())
}

/// A cosine distance together with a flag raised when either filter had zero
/// norm (the distance is then defined as 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineDistance {
    pub value: f64,
    pub degenerate: bool,
}

/// `1 − ⟨est, ref⟩ / (‖est‖ ‖ref‖)`, in `[0, 2]`.
pub fn cosine_distance_time(est: &TimeFilter, reference: &TimeFilter) -> Result<CosineDistance> {
    check_lengths(est, reference)?;
    let dot: f64 = est.samples.iter().zip(&reference.samples).map(|(a, b)| a * b).sum();
    let ne = est.samples.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nr = reference.samples.iter().map(|a| a * a).sum::<f64>().sqrt();
    if ne == 0.0 || nr == 0.0 {
        return Ok(CosineDistance {
            value: 1.0,
            degenerate: true,
        });
    }
    Ok(CosineDistance {
        value: (1.0 - dot / (ne * nr)).clamp(0.0, 2.0),
        degenerate: false,
    })
}

/// RMS difference of dB magnitudes over the bins inside `band` (inclusive,
/// Hz). `None` uses every bin.
pub fn lsd_db(est: &ComplexSpectrum, reference: &ComplexSpectrum, band: Option<(f64, f64)>) -> Result<f64> {
    if est.axis != reference.axis || est.values.len() != reference.values.len() {
        return Err(Error::arg("LSD needs spectra on the same axis"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (k, (a, b)) in est.values.iter().zip(&reference.values).enumerate() {
        let f = est.axis.freq(k);
        if let Some((lo, hi)) = band {
            if f < lo || f > hi {
                continue;
            }
        }
        let d = 20.0 * (a.norm() + LSD_EPS).log10() - 20.0 * (b.norm() + LSD_EPS).log10();
        sum += d * d;
        count += 1;
    }
    if count == 0 {
        return Err(Error::arg(format!("LSD band {band:?} contains no bins")));
    }
    Ok((sum / count as f64).sqrt())
}

/// Anything that maps a DoA to per-channel spectra on a frequency axis.
pub trait SteeringPredictor: Sync {
    fn label(&self) -> String;
    /// Whether spectra can be produced on an arbitrary equally spaced axis.
    fn continuous_frequency(&self) -> bool;
    fn predict(&self, doa: &DoA, axis: &FrequencyAxis) -> Result<Vec<ComplexSpectrum>>;
}

impl SteeringPredictor for NeuralSteerer {
    fn label(&self) -> String {
        let mode = match self.config.freq_mode {
            FreqMode::Continuous => "cf",
            FreqMode::Discrete => "df",
        };
        format!("neural_{}_{}", self.config.variant, mode)
    }

    fn continuous_frequency(&self) -> bool {
        self.config.freq_mode == FreqMode::Continuous
    }

    fn predict(&self, doa: &DoA, axis: &FrequencyAxis) -> Result<Vec<ComplexSpectrum>> {
        NeuralSteerer::predict(self, doa, axis)
    }
}

impl SteeringPredictor for ScfModel {
    fn label(&self) -> String {
        format!("scf_{}", self.components)
    }

    fn continuous_frequency(&self) -> bool {
        false
    }

    fn predict(&self, doa: &DoA, axis: &FrequencyAxis) -> Result<Vec<ComplexSpectrum>> {
        require_axis(&self.grid.axis, axis)?;
        Ok(scf_interpolate(self, doa).spectra)
    }
}

impl SteeringPredictor for NearestModel {
    fn label(&self) -> String {
        "nearest".into()
    }

    fn continuous_frequency(&self) -> bool {
        false
    }

    fn predict(&self, doa: &DoA, axis: &FrequencyAxis) -> Result<Vec<ComplexSpectrum>> {
        require_axis(&self.grid.axis, axis)?;
        Ok(self.interpolate(doa))
    }
}

/// The noiseless generator itself, usable as a perfect predictor.
impl SteeringPredictor for SyntheticScene {
    fn label(&self) -> String {
        "oracle".into()
    }

    fn continuous_frequency(&self) -> bool {
        true
    }

    fn predict(&self, doa: &DoA, axis: &FrequencyAxis) -> Result<Vec<ComplexSpectrum>> {
        Ok(self.spectra(doa, axis))
    }
}

/// Which node set a report covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLabel {
    HeldOut,
    FullGrid,
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitLabel::HeldOut => "held_out",
            SplitLabel::FullGrid => "full_grid",
        })
    }
}

/// Metrics of one (node, channel) filter pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub node: usize,
    pub azimuth: f64,
    pub elevation: f64,
    pub channel: usize,
    pub rmse_time: f64,
    pub cosine_distance_time: f64,
    pub cosine_degenerate: bool,
    pub lsd_db: f64,
    pub lsd_edge_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub channel: usize,
    pub rmse_time: f64,
    pub cosine_distance_time: f64,
    pub lsd_db: f64,
    pub lsd_edge_db: f64,
}

/// Channel-averaged metrics plus the breakdowns they come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub protocol: String,
    pub split: SplitLabel,
    pub num_bins: usize,
    pub node_count: usize,
    pub rmse_time: f64,
    pub cosine_distance_time: f64,
    pub lsd_db: f64,
    /// LSD over the top 5% of the spectrum.
    pub lsd_edge_db: f64,
    pub degenerate_cosines: usize,
    pub per_channel: Vec<ChannelMetrics>,
    #[serde(skip)]
    pub rows: Vec<NodeMetrics>,
}

/// Where the reference spectra of an evaluation come from.
pub enum GroundTruth<'a> {
    /// The stored measurements (evaluated on the set's own axis).
    Measured(&'a GridMeasurementSet),
    /// The generator, regenerated on an arbitrary axis.
    Analytic {
        set: &'a GridMeasurementSet,
        scene: &'a SyntheticScene,
        axis: FrequencyAxis,
    },
}

impl GroundTruth<'_> {
    fn set(&self) -> &GridMeasurementSet {
        match self {
            GroundTruth::Measured(set) | GroundTruth::Analytic { set, .. } => set,
        }
    }

    fn axis(&self) -> FrequencyAxis {
        match self {
            GroundTruth::Measured(set) => set.axis,
            GroundTruth::Analytic { axis, .. } => *axis,
        }
    }

    fn spectra(&self, node: usize) -> Vec<ComplexSpectrum> {
        match self {
            GroundTruth::Measured(set) => set.node_spectra(node),
            GroundTruth::Analytic { set, scene, axis } => scene.spectra(&set.node_doa(node), axis),
        }
    }
}

/// Evaluates a predictor at `nodes` against `truth`.
pub fn evaluate_nodes(
    predictor: &dyn SteeringPredictor,
    truth: &GroundTruth<'_>,
    nodes: &[usize],
    split: SplitLabel,
    protocol: &str,
    band: Option<(f64, f64)>,
) -> Result<MetricReport> {
    if nodes.is_empty() {
        return Err(Error::arg("no nodes to evaluate"));
    }
    let set = truth.set();
    let axis = truth.axis();
    let band = band.unwrap_or_else(|| default_lsd_band(axis.sample_rate_hz));
    let edge = edge_band(axis.sample_rate_hz);
    let per_node: Vec<Result<Vec<NodeMetrics>>> = map_indexed(nodes.len(), |j| {
        let node = nodes[j];
        let doa = set.node_doa(node);
        let est = predictor.predict(&doa, &axis)?;
        let reference = truth.spectra(node);
        if est.len() != reference.len() {
            return Err(Error::Data(format!(
                "predictor returned {} channels, reference has {}",
                est.len(),
                reference.len()
            )));
        }
        est.iter()
            .zip(&reference)
            .enumerate()
            .map(|(channel, (e, r))| {
                let (te, tr) = (idft_real(e), idft_real(r));
                let cos = cosine_distance_time(&te, &tr)?;
                Ok(NodeMetrics {
                    node,
                    azimuth: doa.azimuth,
                    elevation: doa.elevation,
                    channel,
                    rmse_time: rmse_time(&te, &tr)?,
                    cosine_distance_time: cos.value,
                    cosine_degenerate: cos.degenerate,
                    lsd_db: lsd_db(e, r, Some(band))?,
                    lsd_edge_db: lsd_db(e, r, Some(edge)).unwrap_or(f64::NAN),
                })
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(nodes.len() * set.num_channels());
    for r in per_node {
        rows.extend(r?);
    }
    let channels = set.num_channels();
    let per_channel: Vec<ChannelMetrics> = (0..channels)
        .map(|c| {
            let sel: Vec<&NodeMetrics> = rows.iter().filter(|r| r.channel == c).collect();
            let n = sel.len() as f64;
            ChannelMetrics {
                channel: c,
                rmse_time: sel.iter().map(|r| r.rmse_time).sum::<f64>() / n,
                cosine_distance_time: sel.iter().map(|r| r.cosine_distance_time).sum::<f64>() / n,
                lsd_db: sel.iter().map(|r| r.lsd_db).sum::<f64>() / n,
                lsd_edge_db: sel.iter().map(|r| r.lsd_edge_db).sum::<f64>() / n,
            }
        })
        .collect();
    let mean = |f: fn(&ChannelMetrics) -> f64| per_channel.iter().map(f).sum::<f64>() / channels as f64;
    Ok(MetricReport {
        model: predictor.label(),
        protocol: protocol.to_string(),
        split,
        num_bins: axis.num_bins,
        node_count: nodes.len(),
        rmse_time: mean(|c| c.rmse_time),
        cosine_distance_time: mean(|c| c.cosine_distance_time),
        lsd_db: mean(|c| c.lsd_db),
        lsd_edge_db: mean(|c| c.lsd_edge_db),
        degenerate_cosines: rows.iter().filter(|r| r.cosine_degenerate).count(),
        per_channel,
        rows,
    })
}

/// The evaluation protocols.
#[derive(Clone, Debug, PartialEq)]
pub enum Protocol {
    /// Held-out nodes of a regular (or custom) split.
    Interpolation,
    /// Held-out nodes of a random-fraction split.
    RandomFraction(f64),
    /// A continuous-frequency model on another equally spaced axis, against
    /// regenerated synthetic ground truth.
    FreqSuperres(FrequencyAxis),
}

impl Protocol {
    pub fn name(&self) -> String {
        match self {
            Protocol::Interpolation => "interpolation".into(),
            Protocol::RandomFraction(p) => format!("random_fraction:{p}"),
            Protocol::FreqSuperres(axis) => format!("freq_superres:{}", axis.num_bins),
        }
    }
}

/// Runs a protocol and returns the held-out report followed by the full-grid
/// report.
pub fn run_protocol(
    predictor: &dyn SteeringPredictor,
    set: &GridMeasurementSet,
    split: &Split,
    protocol: &Protocol,
    band: Option<(f64, f64)>,
) -> Result<Vec<MetricReport>> {
    let name = protocol.name();
    let all: Vec<usize> = (0..set.num_nodes()).collect();
    let scene;
    let truth = match protocol {
        Protocol::Interpolation | Protocol::RandomFraction(_) => GroundTruth::Measured(set),
        Protocol::FreqSuperres(axis) => {
            if !predictor.continuous_frequency() {
                return Err(Error::arg(format!(
                    "{} cannot be evaluated off its training axis; freq_superres needs a continuous-frequency model",
                    predictor.label()
                )));
            }
            if axis.sample_rate_hz != set.axis.sample_rate_hz {
                return Err(Error::arg("freq_superres axis must keep the dataset sample rate"));
            }
            scene = set
                .scene()
                .ok_or_else(|| Error::arg("freq_superres needs a synthetic dataset for analytic ground truth"))?;
            GroundTruth::Analytic {
                set,
                scene: &scene,
                axis: *axis,
            }
        }
    };
    Ok(vec![
        evaluate_nodes(predictor, &truth, &split.test, SplitLabel::HeldOut, &name, band)?,
        evaluate_nodes(predictor, &truth, &all, SplitLabel::FullGrid, &name, band)?,
    ])
}

/// One row per (report, node, channel).
pub fn write_reports_csv(reports: &[MetricReport], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "model,protocol,split,num_bins,node,azimuth,elevation,channel,rmse_time,cosine_distance_time,cosine_degenerate,lsd_db,lsd_edge_db"
    )?;
    for r in reports {
        for row in &r.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.model,
                r.protocol,
                r.split,
                r.num_bins,
                row.node,
                row.azimuth,
                row.elevation,
                row.channel,
                row.rmse_time,
                row.cosine_distance_time,
                row.cosine_degenerate,
                row.lsd_db,
                row.lsd_edge_db
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Channel-averaged summaries (no per-node rows).
pub fn write_reports_json(reports: &[MetricReport], path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(reports).map_err(|e| Error::Data(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
