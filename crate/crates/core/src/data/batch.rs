use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::loss::BatchSpec;
use crate::seeds::{derive_seed, stream_rng};

/// Epoch-wise shuffled mini-batches of training DoAs with a random frequency
/// subset per batch. Each epoch's order depends only on `(seed, epoch)`.
#[derive(Clone, Debug)]
pub struct BatchIterator {
    train: Vec<usize>,
    batch_size: usize,
    freq_subset_size: usize,
    num_bins: usize,
    seed: u64,
}

impl BatchIterator {
    pub fn new(
        train: &[usize],
        batch_size: usize,
        freq_subset_size: usize,
        num_bins: usize,
        seed: u64,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::arg("no training nodes"));
        }
        if batch_size == 0 || batch_size > train.len() {
            return Err(Error::arg(format!(
                "batch size {batch_size} must be in 1..={}",
                train.len()
            )));
        }
        if freq_subset_size == 0 {
            return Err(Error::arg("frequency subset size must be positive"));
        }
        Ok(Self {
            train: train.to_vec(),
            batch_size,
            freq_subset_size: freq_subset_size.min(num_bins),
            num_bins,
            seed,
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.train.len().div_ceil(self.batch_size)
    }

    pub fn epoch(&self, epoch: usize) -> Vec<BatchSpec> {
        let mut rng = stream_rng(derive_seed(self.seed, 0x6261_7463), epoch as u64);
        let mut order = self.train.clone();
        order.shuffle(&mut rng);
        order
            .chunks(self.batch_size)
            .map(|chunk| {
                let freq_subset = if self.freq_subset_size >= self.num_bins {
                    (0..self.num_bins).collect()
                } else {
                    let mut v = index::sample(&mut rng, self.num_bins, self.freq_subset_size).into_vec();
                    v.sort_unstable();
                    v
                };
                BatchSpec {
                    doas: chunk.to_vec(),
                    freq_subset,
                }
            })
            .collect()
    }
}
