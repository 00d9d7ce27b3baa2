use crate::error::{Error, Result};

/// Adam with a per-epoch exponential learning-rate decay.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr0: f64,
    pub decay_per_epoch: f64,
    pub epochs_done: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step_count: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, lr0: f64, decay_per_epoch: f64) -> Result<Self> {
        if !(lr0.is_finite() && lr0 > 0.0) {
            return Err(Error::arg(format!("learning rate must be positive, got {lr0}")));
        }
        if !(decay_per_epoch.is_finite() && decay_per_epoch > 0.0) {
            return Err(Error::arg(format!("decay must be positive, got {decay_per_epoch}")));
        }
        Ok(Self {
            lr0,
            decay_per_epoch,
            epochs_done: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        })
    }

    /// `lr0 · decay^epochs_done`.
    pub fn learning_rate(&self) -> f64 {
        self.lr0 * self.decay_per_epoch.powi(self.epochs_done as i32)
    }

    /// Epoch-boundary hook.
    pub fn end_epoch(&mut self) {
        self.epochs_done += 1;
    }

    /// One bias-corrected Adam update. `lr_multipliers`, when given, scales the
    /// step of each parameter individually.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr_multipliers: Option<&[f64]>) -> Result<()> {
        let n = self.m.len();
        if params.len() != n || grads.len() != n || lr_multipliers.is_some_and(|s| s.len() != n) {
            return Err(Error::arg(format!(
                "optimizer holds {n} moments but got {} params / {} grads",
                params.len(),
                grads.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let lr = self.learning_rate();
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for k in 0..n {
            let g = grads[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[k] / bc1;
            let v_hat = self.v[k] / bc2;
            let scale = lr_multipliers.map_or(1.0, |s| s[k]);
            params[k] -= scale * lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
