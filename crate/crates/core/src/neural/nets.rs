use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::{Graph, Tensor, Var};
use super::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => g.relu(x),
            Activation::LeakyRelu(s) => g.leaky_relu(x, s),
            Activation::Tanh => g.tanh(x),
            Activation::Sigmoid => g.sigmoid(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    /// Input width, hidden widths, output width.
    pub widths: Vec<usize>,
    /// One activation per layer.
    pub activations: Vec<Activation>,
    /// Dropout after each hidden activation.
    pub dropout: f64,
}

impl MlpSpec {
    pub fn new(
        input: usize,
        hidden: &[usize],
        output: usize,
        hidden_act: Activation,
        out_act: Activation,
        dropout: f64,
    ) -> Self {
        let mut widths = vec![input];
        widths.extend_from_slice(hidden);
        widths.push(output);
        let mut activations = vec![hidden_act; hidden.len()];
        activations.push(out_act);
        Self {
            widths,
            activations,
            dropout,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.widths.len() < 2 || self.widths.contains(&0) {
            return Err(NeuralError::InvalidConfig(
                "MLP widths must be >= 1 with at least one layer".into(),
            ));
        }
        if self.activations.len() != self.widths.len() - 1 {
            return Err(NeuralError::InvalidConfig("one activation per layer".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NeuralError::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Dropout behaviour for one forward pass.
pub enum Dropout<'a> {
    Off,
    On { rate: f64, rng: &'a mut ChaCha8Rng },
}

fn apply_dropout(g: &mut Graph, x: Var, dropout: &mut Dropout<'_>) -> Var {
    match dropout {
        Dropout::Off => x,
        Dropout::On { rate, .. } if *rate <= 0.0 => x,
        Dropout::On { rate, rng } => {
            let keep = 1.0 - *rate;
            let n = g.value(x).len();
            let mask: Rc<[f64]> = (0..n)
                .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect();
            g.mask(x, mask)
        }
    }
}

/// Glorot-uniform weights, zero biases.
fn dense_init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> (Tensor, Tensor) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let w = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
    (Tensor::matrix(fan_in, fan_out, w), Tensor::zeros(&[1, fan_out]))
}

/// Registers parameters as leaves of a fresh graph.
pub fn bind(g: &mut Graph, params: &[Tensor]) -> Vec<Var> {
    params.iter().map(|p| g.leaf(p.clone())).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    /// [W₀, b₀, W₁, b₁, …] with W of shape [in, out] and b of shape [1, out].
    pub params: Vec<Tensor>,
}

impl Mlp {
    pub fn new(spec: MlpSpec, rng: &mut ChaCha8Rng) -> Result<Self, NeuralError> {
        spec.validate()?;
        let mut params = Vec::new();
        for w in spec.widths.windows(2) {
            let (wt, b) = dense_init(rng, w[0], w[1]);
            params.push(wt);
            params.push(b);
        }
        Ok(Self { spec, params })
    }

    pub fn from_params(spec: MlpSpec, params: Vec<Tensor>) -> Result<Self, NeuralError> {
        spec.validate()?;
        let layers = spec.widths.len() - 1;
        if params.len() != 2 * layers {
            return Err(NeuralError::ShapeMismatch(format!(
                "{} tensors for {layers} layers",
                params.len()
            )));
        }
        for (l, w) in spec.widths.windows(2).enumerate() {
            if params[2 * l].shape != [w[0], w[1]] || params[2 * l + 1].shape != [1, w[1]] {
                return Err(NeuralError::ShapeMismatch(format!("layer {l} parameter shapes")));
            }
        }
        Ok(Self { spec, params })
    }

    pub fn forward(&self, g: &mut Graph, pv: &[Var], x: Var, dropout: &mut Dropout<'_>) -> Result<Var, NeuralError> {
        let layers = self.spec.widths.len() - 1;
        let mut h = x;
        for l in 0..layers {
            let z = g.matmul(h, pv[2 * l])?;
            let z = g.add_row(z, pv[2 * l + 1]);
            h = self.spec.activations[l].apply(g, z);
            if l + 1 < layers {
                h = apply_dropout(g, h, dropout);
            }
        }
        Ok(h)
    }

    pub fn input_width(&self) -> usize {
        self.spec.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.spec.widths.last().unwrap()
    }
}

/// Conv1D stack followed by a dense tanh head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub input_len: usize,
    pub input_channels: usize,
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub slope: f64,
    pub outputs: usize,
}

impl Default for ConvSpec {
    fn default() -> Self {
        Self {
            input_len: 360,
            input_channels: 4,
            channels: vec![16, 32, 64, 128, 256],
            kernel: 3,
            stride: 2,
            slope: 0.3,
            outputs: 8,
        }
    }
}

impl ConvSpec {
    /// Output length of every conv layer.
    pub fn lengths(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut l = self.input_len;
        for _ in &self.channels {
            l = (l - self.kernel) / self.stride + 1;
            out.push(l);
        }
        out
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let mut l = self.input_len;
        for _ in &self.channels {
            if l < self.kernel {
                return Err(NeuralError::InvalidConfig("input too short for the conv stack".into()));
            }
            l = (l - self.kernel) / self.stride + 1;
        }
        if self.channels.is_empty() || self.stride == 0 || self.outputs == 0 {
            return Err(NeuralError::InvalidConfig("empty conv stack".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvNet {
    pub spec: ConvSpec,
    /// Per conv layer [W (in_ch·k × out_ch), b (1 × out_ch)], then the dense head.
    pub params: Vec<Tensor>,
}

impl ConvNet {
    pub fn new(spec: ConvSpec, rng: &mut ChaCha8Rng) -> Result<Self, NeuralError> {
        spec.validate()?;
        let mut params = Vec::new();
        let mut cin = spec.input_channels;
        for &cout in &spec.channels {
            let (w, b) = dense_init(rng, cin * spec.kernel, cout);
            params.push(w);
            params.push(b);
            cin = cout;
        }
        let flat = spec.lengths().last().unwrap() * cin;
        let (w, b) = dense_init(rng, flat, spec.outputs);
        params.push(w);
        params.push(b);
        Ok(Self { spec, params })
    }

    pub fn from_params(spec: ConvSpec, params: Vec<Tensor>) -> Result<Self, NeuralError> {
        spec.validate()?;
        let probe = Self::new(spec.clone(), &mut rand::SeedableRng::seed_from_u64(0))?;
        if probe.params.len() != params.len() || probe.params.iter().zip(&params).any(|(a, b)| a.shape != b.shape) {
            return Err(NeuralError::ShapeMismatch("conv parameter shapes".into()));
        }
        Ok(Self { spec, params })
    }

    /// `x` is [batch, channels·len] with each channel stored contiguously
    /// (snapshot-major density). Returns [batch, outputs].
    pub fn forward(&self, g: &mut Graph, pv: &[Var], x: Var) -> Result<Var, NeuralError> {
        let s = &self.spec;
        let batch = g.value(x).rows();
        if g.value(x).cols() != s.input_channels * s.input_len {
            return Err(NeuralError::ShapeMismatch(format!(
                "conv input width {} != {}",
                g.value(x).cols(),
                s.input_channels * s.input_len
            )));
        }
        let mut h = x;
        let mut len = s.input_len;
        let mut cin = s.input_channels;
        for (layer, &cout) in s.channels.iter().enumerate() {
            let lout = (len - s.kernel) / s.stride + 1;
            let width = cin * s.kernel;
            let mut index = Vec::with_capacity(batch * lout * width);
            for b in 0..batch {
                for l in 0..lout {
                    for k in 0..s.kernel {
                        for c in 0..cin {
                            let pos = l * s.stride + k;
                            index.push(if layer == 0 {
                                b * cin * len + c * len + pos
                            } else {
                                (b * len + pos) * cin + c
                            });
                        }
                    }
                }
            }
            let cols = g.gather(h, index.into(), vec![batch * lout, width]);
            let z = g.matmul(cols, pv[2 * layer])?;
            let z = g.add_row(z, pv[2 * layer + 1]);
            h = g.leaky_relu(z, s.slope);
            len = lout;
            cin = cout;
        }
        let flat = g.reshape(h, vec![batch, len * cin]);
        let k = 2 * s.channels.len();
        let z = g.matmul(flat, pv[k])?;
        let z = g.add_row(z, pv[k + 1]);
        Ok(g.tanh(z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn feature_net_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = ConvNet::new(ConvSpec::default(), &mut rng).unwrap();
        assert_eq!(net.spec.lengths(), vec![179, 89, 44, 21, 10]);
        let mut g = Graph::new();
        let pv = bind(&mut g, &net.params);
        let x = g.leaf(Tensor::filled(&[2, 1440], 1.0));
        let y = net.forward(&mut g, &pv, x).unwrap();
        assert_eq!(g.value(y).shape, vec![2, 8]);
        assert!(g.value(y).data.iter().all(|v| v.is_finite() && v.abs() <= 1.0));
    }

    #[test]
    fn mlp_spec_validation() {
        assert!(MlpSpec::new(3, &[4], 2, Activation::Relu, Activation::Identity, 1.0)
            .validate()
            .is_err());
        assert!(MlpSpec::new(3, &[0], 2, Activation::Relu, Activation::Identity, 0.1)
            .validate()
            .is_err());
        MlpSpec::new(3, &[4, 4], 2, Activation::Relu, Activation::Identity, 0.1)
            .validate()
            .unwrap();
    }

    #[test]
    fn activation_json() {
        let s = serde_json::to_string(&Activation::LeakyRelu(0.3)).unwrap();
        assert_eq!(s, r#"{"leaky_relu":0.3}"#);
    }
}
