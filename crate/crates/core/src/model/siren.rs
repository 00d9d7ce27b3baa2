use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Multilayer perceptron with `sin(ω0·(Wx + b))` hidden activations and a
/// linear output layer. Weights are stored `[out, in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SirenParams {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub omega0: f64,
}

/// Activations retained by [`SirenParams::forward`] for the reverse pass.
#[derive(Clone, Debug)]
pub struct SirenCache {
    inputs: Vec<Array2<f64>>,
    // ω0·(Wx + b) for every hidden layer
    phases: Vec<Array2<f64>>,
}

impl SirenParams {
    /// Uniform SIREN initialisation: `±1/n_in` on the first layer,
    /// `±sqrt(6/n_in)/ω0` deeper, zero biases.
    pub fn init(layer_sizes: &[usize], omega0: f64, seed: u64) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(Error::arg(
                "SIREN needs an input, at least one hidden and an output layer",
            ));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::arg(format!("layer sizes must be positive: {layer_sizes:?}")));
        }
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::arg(format!("omega0 must be positive, got {omega0}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            let (n_in, n_out) = (pair[0], pair[1]);
            let bound = if l == 0 {
                1.0 / n_in as f64
            } else {
                (6.0 / n_in as f64).sqrt() / omega0
            };
            let w = Array2::from_shape_fn((n_out, n_in), |_| rng.random_range(-bound..=bound));
            weights.push(w);
            biases.push(Array1::zeros(n_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            omega0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("non-empty")
    }

    pub fn num_params(&self) -> usize {
        self.layer_sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    /// Runs a batch of rows through the network.
    pub fn forward(&self, x: ArrayView2<f64>) -> (Array2<f64>, SirenCache) {
        let depth = self.weights.len();
        let mut cache = SirenCache {
            inputs: Vec::with_capacity(depth),
            phases: Vec::with_capacity(depth - 1),
        };
        let mut a = x.to_owned();
        for l in 0..depth {
            let mut z = a.dot(&self.weights[l].t());
            z += &self.biases[l];
            cache.inputs.push(a);
            if l + 1 < depth {
                z.mapv_inplace(|v| v * self.omega0);
                a = z.mapv(f64::sin);
                cache.phases.push(z);
            } else {
                a = z;
            }
        }
        (a, cache)
    }

    /// Accumulates parameter gradients into `grad` (flat layout of
    /// [`SirenParams::write_flat`]) and returns the gradient w.r.t. the input.
    pub fn backward(&self, cache: &SirenCache, d_out: Array2<f64>, grad: &mut [f64]) -> Array2<f64> {
        debug_assert_eq!(grad.len(), self.num_params());
        let depth = self.weights.len();
        let offsets = self.layer_offsets();
        let mut d = d_out;
        for l in (0..depth).rev() {
            if l + 1 < depth {
                let phase = &cache.phases[l];
                let omega0 = self.omega0;
                ndarray::Zip::from(&mut d)
                    .and(phase)
                    .for_each(|dv, &p| *dv *= omega0 * p.cos());
            }
            let dw = d.t().dot(&cache.inputs[l]);
            let db = d.sum_axis(Axis(0));
            let off = offsets[l];
            let nw = dw.len();
            for (g, v) in grad[off..off + nw].iter_mut().zip(dw.iter()) {
                *g += v;
            }
            for (g, v) in grad[off + nw..off + nw + db.len()].iter_mut().zip(db.iter()) {
                *g += v;
            }
            d = d.dot(&self.weights[l]);
        }
        d
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.weights.len());
        let mut acc = 0;
        for p in self.layer_sizes.windows(2) {
            offsets.push(acc);
            acc += p[0] * p[1] + p[1];
        }
        offsets
    }

    /// Appends parameters layer by layer: weights row-major, then biases.
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
    }

    /// Inverse of [`SirenParams::write_flat`]; returns the number of values read.
    pub fn read_flat(&mut self, src: &[f64]) -> Result<usize> {
        let n = self.num_params();
        if src.len() < n {
            return Err(Error::arg(format!("need {n} values, got {}", src.len())));
        }
        let mut pos = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            for v in w.iter_mut() {
                *v = src[pos];
                pos += 1;
            }
            for v in b.iter_mut() {
                *v = src[pos];
                pos += 1;
            }
        }
        Ok(pos)
    }

    pub fn zero_weights(&mut self) {
        self.weights.iter_mut().for_each(|w| w.fill(0.0));
        self.biases.iter_mut().for_each(|b| b.fill(0.0));
    }
}
