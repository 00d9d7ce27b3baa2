use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use super::GridMeasurementSet;
use crate::error::{Error, Result};
use crate::seeds::stream_rng;

#[derive(Clone, Debug, PartialEq)]
pub enum SplitMode {
    /// Every other azimuth and every other elevation (even indices) train.
    RegularX2,
    /// `⌈p · A · E⌉` randomly chosen nodes train.
    RandomFraction(f64),
    /// Explicit training node indices.
    Custom(Vec<usize>),
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitMode::RegularX2 => f.write_str("regular_x2"),
            SplitMode::RandomFraction(p) => write!(f, "random:{p}"),
            SplitMode::Custom(idx) => {
                let list: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
                write!(f, "custom:{}", list.join(","))
            }
        }
    }
}

impl FromStr for SplitMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "regular_x2" {
            return Ok(SplitMode::RegularX2);
        }
        if let Some(p) = s.strip_prefix("random:") {
            let p: f64 = p.parse().map_err(|_| format!("bad fraction '{p}'"))?;
            return Ok(SplitMode::RandomFraction(p));
        }
        if let Some(list) = s.strip_prefix("custom:") {
            let idx = list
                .split(',')
                .map(|v| v.trim().parse::<usize>().map_err(|_| format!("bad node index '{v}'")))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            return Ok(SplitMode::Custom(idx));
        }
        Err(format!(
            "unknown split '{s}' (regular_x2 | random:<p> | custom:<i,j,..>)"
        ))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            mode: SplitMode::RegularX2,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Disjoint sorted node-index sets covering the grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Training plus validation nodes: everything a baseline may see.
    pub fn fit_nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.train.iter().chain(&self.validation).copied().collect();
        v.sort_unstable();
        v
    }
}

pub fn make_split(set: &GridMeasurementSet, spec: &SplitSpec) -> Result<Split> {
    if !(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0) {
        return Err(Error::arg(format!(
            "validation fraction {} outside (0, 1)",
            spec.validation_fraction
        )));
    }
    let nodes = set.num_nodes();
    let mut fit: Vec<usize> = match &spec.mode {
        SplitMode::RegularX2 => (0..nodes)
            .filter(|&n| {
                let (a, e) = set.node_coords(n);
                a % 2 == 0 && e % 2 == 0
            })
            .collect(),
        SplitMode::RandomFraction(p) => {
            if !(*p > 0.0 && *p < 1.0) {
                return Err(Error::arg(format!("training fraction {p} outside (0, 1)")));
            }
            let count = ((p * nodes as f64).ceil() as usize).min(nodes);
            let mut all: Vec<usize> = (0..nodes).collect();
            all.shuffle(&mut stream_rng(spec.seed, 0x7370_6c74));
            all.truncate(count);
            all
        }
        SplitMode::Custom(idx) => {
            let mut v = idx.clone();
            v.sort_unstable();
            v.dedup();
            if v.len() != idx.len() {
                return Err(Error::arg("custom split repeats a node"));
            }
            if let Some(&bad) = v.iter().find(|&&i| i >= nodes) {
                return Err(Error::Index { index: bad, len: nodes });
            }
            v
        }
    };
    if fit.len() < 2 {
        return Err(Error::arg("split needs at least two training nodes"));
    }
    fit.sort_unstable();
    let mut test: Vec<usize> = {
        let mut is_fit = vec![false; nodes];
        fit.iter().for_each(|&i| is_fit[i] = true);
        (0..nodes).filter(|&i| !is_fit[i]).collect()
    };
    test.sort_unstable();

    let n_val = ((spec.validation_fraction * fit.len() as f64).round() as usize).clamp(1, fit.len() - 1);
    let mut shuffled = fit.clone();
    shuffled.shuffle(&mut stream_rng(spec.seed, 0x7661_6c69));
    let mut validation = shuffled[..n_val].to_vec();
    let mut train = shuffled[n_val..].to_vec();
    validation.sort_unstable();
    train.sort_unstable();
    Ok(Split {
        train,
        validation,
        test,
    })
}
