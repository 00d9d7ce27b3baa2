//! Classical interpolators: bilinear interpolation of the spatial
//! characteristic function (measurement divided by its free-field steering
//! vector) and a nearest-node lookup.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::data::GridMeasurementSet;
use crate::error::{Error, Result};
use crate::sigproc::{algebraic_steering, ComplexSpectrum, DoA, FrequencyAxis};

const TWO_PI: f64 = 2.0 * PI;

/// Which parts of the characteristic function are interpolated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScfComponents {
    #[default]
    RealImag,
    /// Magnitude bilinearly, phase as a normalized bilinear phasor mix.
    MagPhase,
}

impl fmt::Display for ScfComponents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScfComponents::RealImag => "real_imag",
            ScfComponents::MagPhase => "mag_phase",
        })
    }
}

impl FromStr for ScfComponents {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "real_imag" => Ok(ScfComponents::RealImag),
            "mag_phase" => Ok(ScfComponents::MagPhase),
            _ => Err(format!("unknown SCF components '{s}' (real_imag | mag_phase)")),
        }
    }
}

/// Per-channel spectra returned by a baseline, plus whether the query
/// elevation had to be clamped into the grid's coverage.
#[derive(Clone, Debug, PartialEq)]
pub struct Interpolated {
    pub spectra: Vec<ComplexSpectrum>,
    pub elevation_clamped: bool,
}

/// Characteristic-function values on a rectangular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScfModel {
    pub grid: GridMeasurementSet,
    /// `h / d` laid out like `grid.data`.
    pub scf: Vec<C64>,
    pub components: ScfComponents,
}

/// Divides every measurement by its algebraic steering value on the nominal
/// geometry.
pub fn scf_fit(set: &GridMeasurementSet) -> ScfModel {
    let freqs = set.axis.freqs();
    let ch = set.num_channels();
    let mut scf = Vec::with_capacity(set.data.len());
    for node in 0..set.num_nodes() {
        let doa = set.node_doa(node);
        for i in 0..ch {
            for (k, &f) in freqs.iter().enumerate() {
                let d = algebraic_steering(&doa, f, i, &set.geometry).expect("channel index within geometry");
                scf.push(set.value(node, i, k) / d);
            }
        }
    }
    ScfModel {
        grid: set.clone(),
        scf,
        components: ScfComponents::RealImag,
    }
}

/// Azimuth and elevation index sets when `nodes` form a full rectangular
/// sub-grid of `set`.
pub fn rectangular_axes(set: &GridMeasurementSet, nodes: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
    let mut az: Vec<usize> = nodes.iter().map(|&n| set.node_coords(n).0).collect();
    let mut el: Vec<usize> = nodes.iter().map(|&n| set.node_coords(n).1).collect();
    az.sort_unstable();
    az.dedup();
    el.sort_unstable();
    el.dedup();
    let mut sorted = nodes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    (az.len() * el.len() == sorted.len() && sorted.len() == nodes.len()).then_some((az, el))
}

impl ScfModel {
    /// Fits on the rectangular sub-grid spanned by `nodes`.
    pub fn fit_nodes(set: &GridMeasurementSet, nodes: &[usize]) -> Result<Self> {
        let (az, el) = rectangular_axes(set, nodes)
            .ok_or_else(|| Error::arg("SCF baseline needs training nodes forming a rectangular sub-grid"))?;
        Ok(scf_fit(&set.subgrid(&az, &el)?))
    }

    pub fn with_components(mut self, components: ScfComponents) -> Self {
        self.components = components;
        self
    }

    fn scf_at(&self, node: usize, channel: usize, bin: usize) -> C64 {
        let f = self.grid.axis.num_bins;
        self.scf[(node * self.grid.num_channels() + channel) * f + bin]
    }

    fn mix(&self, corners: &[(usize, f64)], channel: usize, bin: usize) -> C64 {
        match self.components {
            ScfComponents::RealImag => corners.iter().map(|&(n, w)| self.scf_at(n, channel, bin) * w).sum(),
            ScfComponents::MagPhase => {
                let mut mag = 0.0;
                let mut phasor = C64::new(0.0, 0.0);
                for &(n, w) in corners {
                    let z = self.scf_at(n, channel, bin);
                    mag += w * z.norm();
                    if z.norm() > 0.0 {
                        phasor += w * z / z.norm();
                    }
                }
                C64::from_polar(mag, phasor.arg())
            }
        }
    }

    /// Bilinear corner nodes and weights for a query, with the clamp flag.
    fn corners(&self, doa: &DoA) -> (Vec<(usize, f64)>, bool) {
        let g = &self.grid;
        let (a0, a1, ta) = azimuth_bracket(&g.azimuths, doa.azimuth);
        let (e0, e1, te, clamped) = elevation_bracket(&g.elevations, doa.elevation);
        let corners = vec![
            (g.node_index(a0, e0), (1.0 - ta) * (1.0 - te)),
            (g.node_index(a1, e0), ta * (1.0 - te)),
            (g.node_index(a0, e1), (1.0 - ta) * te),
            (g.node_index(a1, e1), ta * te),
        ];
        (corners, clamped)
    }
}

/// Bracketing azimuth indices and the fractional position between them,
/// wrapping across the 0/2π seam.
fn azimuth_bracket(azimuths: &[f64], azimuth: f64) -> (usize, usize, f64) {
    let n = azimuths.len();
    if n == 1 {
        return (0, 0, 0.0);
    }
    let a = azimuth.rem_euclid(TWO_PI);
    let upper = azimuths.partition_point(|&x| x <= a);
    if upper == 0 || upper == n {
        let last = azimuths[n - 1];
        let span = azimuths[0] + TWO_PI - last;
        let offset = (a - last).rem_euclid(TWO_PI);
        return (n - 1, 0, offset / span);
    }
    let (lo, hi) = (azimuths[upper - 1], azimuths[upper]);
    (upper - 1, upper, (a - lo) / (hi - lo))
}

fn elevation_bracket(elevations: &[f64], elevation: f64) -> (usize, usize, f64, bool) {
    let n = elevations.len();
    let tol = 1e-12;
    let clamped = elevation < elevations[0] - tol || elevation > elevations[n - 1] + tol;
    let e = elevation.clamp(elevations[0], elevations[n - 1]);
    if n == 1 {
        return (0, 0, 0.0, clamped);
    }
    let upper = elevations.partition_point(|&x| x <= e).clamp(1, n - 1);
    let (lo, hi) = (elevations[upper - 1], elevations[upper]);
    (upper - 1, upper, ((e - lo) / (hi - lo)).clamp(0.0, 1.0), clamped)
}

/// Interpolates the characteristic function at `doa` and multiplies it back
/// by the free-field steering vector there.
pub fn scf_interpolate(model: &ScfModel, doa: &DoA) -> Interpolated {
    let (corners, clamped) = model.corners(doa);
    let g = &model.grid;
    let spectra = (0..g.num_channels())
        .map(|i| {
            let values = g
                .axis
                .freqs()
                .iter()
                .enumerate()
                .map(|(k, &f)| {
                    let d = algebraic_steering(doa, f, i, &g.geometry).expect("channel index within geometry");
                    model.mix(&corners, i, k) * d
                })
                .collect();
            ComplexSpectrum { values, axis: g.axis }
        })
        .collect();
    Interpolated {
        spectra,
        elevation_clamped: clamped,
    }
}

/// Nearest-node lookup restricted to a subset of grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct NearestModel {
    pub grid: GridMeasurementSet,
    pub nodes: Vec<usize>,
}

impl NearestModel {
    pub fn new(set: &GridMeasurementSet, nodes: &[usize]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::arg("nearest baseline needs at least one node"));
        }
        if let Some(&bad) = nodes.iter().find(|&&n| n >= set.num_nodes()) {
            return Err(Error::Index {
                index: bad,
                len: set.num_nodes(),
            });
        }
        let mut nodes = nodes.to_vec();
        nodes.sort_unstable();
        nodes.dedup();
        Ok(Self {
            grid: set.clone(),
            nodes,
        })
    }

    /// Great-circle nearest node; ties go to the lowest node index.
    pub fn nearest_node(&self, doa: &DoA) -> usize {
        let mut best = (f64::INFINITY, self.nodes[0]);
        for &n in &self.nodes {
            let dist = self.grid.node_doa(n).angle_to(doa);
            if dist < best.0 {
                best = (dist, n);
            }
        }
        best.1
    }

    pub fn interpolate(&self, doa: &DoA) -> Vec<ComplexSpectrum> {
        self.grid.node_spectra(self.nearest_node(doa))
    }
}

/// The measurement at the great-circle-nearest node of the whole grid.
pub fn nearest_interpolate(set: &GridMeasurementSet, doa: &DoA) -> Vec<ComplexSpectrum> {
    let all: Vec<usize> = (0..set.num_nodes()).collect();
    NearestModel {
        grid: set.clone(),
        nodes: all,
    }
    .interpolate(doa)
}

/// Checks an axis matches a baseline's stored axis.
pub(crate) fn require_axis(stored: &FrequencyAxis, requested: &FrequencyAxis) -> Result<()> {
    if stored != requested {
        return Err(Error::arg(format!(
            "baselines only answer on their measurement axis ({} bins at {} Hz), not {} bins at {} Hz",
            stored.num_bins, stored.sample_rate_hz, requested.num_bins, requested.sample_rate_hz
        )));
    }
    Ok(())
}

/// Elevation coverage helper shared with callers that want to pre-check.
pub fn within_elevation_coverage(set: &GridMeasurementSet, doa: &DoA) -> bool {
    let (lo, hi) = (set.elevations[0], set.elevations[set.num_elevations() - 1]);
    doa.elevation >= lo.max(-FRAC_PI_2) && doa.elevation <= hi.min(FRAC_PI_2)
}
