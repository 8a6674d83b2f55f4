//! Reverse-mode differentiation and the two conditional GANs.
//!
//! Networks see densities divided by a reference density and features
//! divided by the domain radius. Everything runs on one thread in f64 so a
//! fixed seed reproduces a training run bit for bit.

pub mod autodiff;
pub mod data;
pub mod gan;
pub mod io;
pub mod nets;
pub mod optim;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use autodiff::{Graph, Tensor, Var};
pub use data::{Conditioning, Normalization, TrainingSet};
pub use gan::{
    critic_score, critic_scores, generate_conditioned, generate_ensemble, interpolate, load_generator,
    pretrain_feature_net, train_cgan_df, train_cwgan, train_cwgan_on, CganDfModel, CwganModel, CwganRun, Ensemble,
    FeatureModel, GeneratorModel,
};
pub use io::LossHistory;
pub use nets::{Activation, ConvNet, ConvSpec, Mlp, MlpSpec};
pub use optim::{adam_step, Adam};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("DivergedLoss: {term} = {value} at epoch {epoch}")]
    DivergedLoss { term: String, epoch: usize, value: f64 },
    #[error("EmptyDatabase")]
    EmptyDatabase,
    #[error("MissingFeatures: record {0} has no subpixel features")]
    MissingFeatures(usize),
    #[error("IoFailure: {0}")]
    Io(#[from] std::io::Error),
    #[error("ParseFailure: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for NeuralError {
    fn from(e: serde_json::Error) -> Self {
        NeuralError::Parse(e.to_string())
    }
}

/// Loss magnitude beyond which training is abandoned.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GanConfig {
    /// Gradient-penalty weight of the cWGAN critic.
    pub lambda_gp: f64,
    pub lambda_d: f64,
    pub lambda_l1: f64,
    pub lambda_feature: f64,
    pub lambda_mass: f64,
    /// cGAN-DF noise width.
    pub noise_dim: usize,
    pub cwgan_noise_dim: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    /// Critic updates per generator update.
    pub n_critic: usize,
    pub hidden: Vec<usize>,
    pub dropout: f64,
    /// Dropout rate used when sampling with dropout at test time.
    pub test_dropout: f64,
    pub feature_epochs: usize,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            lambda_gp: 10.0,
            lambda_d: 1.0,
            lambda_l1: 100.0,
            lambda_feature: 10.0,
            lambda_mass: 1.0,
            noise_dim: 128,
            cwgan_noise_dim: 64,
            batch_size: 8,
            epochs: 5000,
            learning_rate: 2e-4,
            beta1: 0.5,
            n_critic: 5,
            hidden: vec![512, 512],
            dropout: 0.1,
            test_dropout: 0.3,
            feature_epochs: 200,
            seed: 0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let lambdas = [
            self.lambda_gp,
            self.lambda_d,
            self.lambda_l1,
            self.lambda_feature,
            self.lambda_mass,
        ];
        if lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return Err(NeuralError::InvalidConfig(
                "loss weights must be finite and non-negative".into(),
            ));
        }
        if self.noise_dim == 0 || self.cwgan_noise_dim == 0 || self.batch_size == 0 || self.n_critic == 0 {
            return Err(NeuralError::InvalidConfig(
                "noise widths, batch size and n_critic must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.beta1) {
            return Err(NeuralError::InvalidConfig(
                "learning rate must be positive and beta1 in [0, 1)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) || !(0.0..1.0).contains(&self.test_dropout) {
            return Err(NeuralError::InvalidConfig("dropout rates must lie in [0, 1)".into()));
        }
        if self.hidden.contains(&0) {
            return Err(NeuralError::InvalidConfig("hidden widths must be positive".into()));
        }
        Ok(())
    }
}
