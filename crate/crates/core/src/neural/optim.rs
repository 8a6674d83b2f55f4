use super::autodiff::Tensor;
use super::NeuralError;

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &[Tensor], lr: f64, beta1: f64) -> Self {
        Self::with_moments(params, lr, beta1, 0.999, 1e-8)
    }

    pub fn with_moments(params: &[Tensor], lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn update(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), NeuralError> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(NeuralError::ShapeMismatch(format!(
                "{} parameters, {} gradients, {} accumulators",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape != g.shape || p.len() != self.m[k].len() {
                return Err(NeuralError::ShapeMismatch(format!(
                    "parameter {k}: {:?} vs gradient {:?}",
                    p.shape, g.shape
                )));
            }
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p.data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Single Adam update on a fresh or existing state.
pub fn adam_step(state: &mut Adam, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), NeuralError> {
    state.update(params, grads)
}
