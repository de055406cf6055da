//! Neural classifiers over frozen word embeddings: a single-width Text-CNN
//! and a GRU, both ending in a dense sigmoid unit, trained with Adam on
//! binary cross-entropy.

mod gradcheck;
pub mod graph;
mod gru;
mod init;
mod tensor;
mod textcnn;
mod train;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gradcheck::{gradient_check, GradientCheck};
pub use graph::{Graph, Gradients, Var};
pub use gru::{GruConfig, GruModel};
pub use init::xavier_uniform;
pub use tensor::Tensor;
pub use textcnn::{TextCnnConfig, TextCnnModel};
pub use train::{loss_and_gradients, predict_encodings, train_neural, Adam, EmbeddedInput, TrainingSet};

/// Hyperparameters shared by both architectures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 5,
            batch_size: 512,
            learning_rate: 1e-3,
            dropout_rate: 0.1,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Result of building one forward pass on a graph.
pub struct Forward {
    /// Probability of label 1, shape `[1]`.
    pub prob: Var,
    /// Graph handles of the parameters, in [`NeuralNet::parameters`] order.
    pub params: Vec<Var>,
}

/// An architecture the trainer can fit.
pub trait NeuralNet: Clone + Send + Sync {
    fn training(&self) -> &TrainingConfig;

    fn embedding_dim(&self) -> usize;

    /// Named parameter tensors in a fixed order.
    fn parameters(&self) -> Vec<(&'static str, &Tensor)>;

    fn parameters_mut(&mut self) -> Vec<&mut Tensor>;

    /// Records the forward pass. `dropout` is `Some` in train mode only.
    fn forward<'a>(
        &'a self,
        graph: &mut Graph<'a>,
        input: &EmbeddedInput,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Forward>;

    /// Probability of label 1 in eval mode.
    fn predict_proba(&self, input: &EmbeddedInput) -> Result<f64> {
        let mut g = Graph::new();
        let f = self.forward(&mut g, input, None)?;
        Ok(g.value(f.prob).item())
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    use rand::Rng;
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Dense sigmoid head shared by both architectures: `features` is `(1 x F)`.
pub(crate) fn dense_head<'a>(
    g: &mut Graph<'a>,
    features: Var,
    weights: Var,
    bias: Var,
    rate: f64,
    dropout: Option<&mut ChaCha8Rng>,
) -> Result<Var> {
    let features = match dropout {
        Some(rng) if rate > 0.0 => {
            let mask = dropout_mask(g.value(features).len(), rate, rng);
            g.dropout(features, mask)?
        }
        _ => features,
    };
    let logit = g.dot(features, weights)?;
    let logit = g.add(logit, bias)?;
    Ok(g.sigmoid(logit))
}
