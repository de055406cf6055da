use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::init::xavier_uniform;
use super::tensor::Tensor;
use super::train::EmbeddedInput;
use super::{dense_head, Forward, NeuralNet, TrainingConfig};
use crate::error::{Error, Result};
use crate::util::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextCnnConfig {
    pub sequence_length: usize,
    pub embedding_dim: usize,
    pub kernel_width: usize,
    pub num_filters: usize,
    pub training: TrainingConfig,
}

impl Default for TextCnnConfig {
    fn default() -> Self {
        TextCnnConfig {
            sequence_length: 300,
            embedding_dim: 300,
            kernel_width: 5,
            num_filters: 128,
            training: TrainingConfig::default(),
        }
    }
}

impl TextCnnConfig {
    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        if self.kernel_width == 0 || self.num_filters == 0 || self.embedding_dim == 0 {
            return Err(Error::InvalidConfig(
                "kernel width, filter count and embedding dimension must be positive".into(),
            ));
        }
        if self.sequence_length < self.kernel_width {
            return Err(Error::InvalidConfig(format!(
                "sequence length {} is shorter than kernel width {}",
                self.sequence_length, self.kernel_width
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextCnnModel {
    pub config: TextCnnConfig,
    /// `[kernel_width, embedding_dim, num_filters]`
    pub filters: Tensor,
    pub conv_bias: Tensor,
    pub dense_weights: Tensor,
    pub dense_bias: Tensor,
}

impl TextCnnModel {
    pub fn zeros(config: TextCnnConfig) -> Result<Self> {
        config.validate()?;
        let (w, d, f) = (config.kernel_width, config.embedding_dim, config.num_filters);
        Ok(TextCnnModel {
            filters: Tensor::zeros(&[w, d, f]),
            conv_bias: Tensor::zeros(&[f]),
            dense_weights: Tensor::zeros(&[f]),
            dense_bias: Tensor::zeros(&[1]),
            config,
        })
    }

    /// Xavier-uniform weights from `config.training.seed`, zero biases.
    pub fn init(config: TextCnnConfig) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let (w, d, f) = (m.config.kernel_width, m.config.embedding_dim, m.config.num_filters);
        let mut rng = seeded_rng(m.config.training.seed, 0);
        m.filters = xavier_uniform(&[w, d, f], w * d, f, &mut rng);
        m.dense_weights = xavier_uniform(&[f], f, 1, &mut rng);
        Ok(m)
    }

    /// Restores a model from named tensors, checking every shape.
    pub fn from_parameters(config: TextCnnConfig, mut named: Vec<(String, Tensor)>) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let names = m.parameters().iter().map(|(n, _)| *n).collect::<Vec<_>>();
        for (name, slot) in names.into_iter().zip(m.parameters_mut()) {
            take_named(&mut named, name, slot)?;
        }
        Ok(m)
    }
}

pub(crate) fn take_named(named: &mut Vec<(String, Tensor)>, name: &str, slot: &mut Tensor) -> Result<()> {
    let pos = named
        .iter()
        .position(|(n, _)| n == name)
        .ok_or_else(|| Error::Artifact(format!("missing tensor `{name}`")))?;
    let (_, t) = named.swap_remove(pos);
    if t.shape() != slot.shape() {
        return Err(Error::Artifact(format!(
            "tensor `{name}` has shape {:?}, expected {:?}",
            t.shape(),
            slot.shape()
        )));
    }
    *slot = t;
    Ok(())
}

impl NeuralNet for TextCnnModel {
    fn training(&self) -> &TrainingConfig {
        &self.config.training
    }

    fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    fn parameters(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("conv.filters", &self.filters),
            ("conv.bias", &self.conv_bias),
            ("dense.weights", &self.dense_weights),
            ("dense.bias", &self.dense_bias),
        ]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.filters,
            &mut self.conv_bias,
            &mut self.dense_weights,
            &mut self.dense_bias,
        ]
    }

    fn forward<'a>(
        &'a self,
        g: &mut Graph<'a>,
        input: &EmbeddedInput,
        dropout: Option<&mut ChaCha8Rng>,
    ) -> Result<Forward> {
        let params: Vec<_> = self.parameters().into_iter().map(|(_, t)| g.param(t)).collect();
        let (filters, conv_bias, dense_w, dense_b) = (params[0], params[1], params[2], params[3]);
        let x = g.input(input.x.clone());
        let conv = g.conv1d(x, filters, conv_bias)?;
        let act = g.relu(conv);
        let pooled = g.max_over_time(act)?;
        let prob = dense_head(g, pooled, dense_w, dense_b, self.config.training.dropout_rate, dropout)?;
        Ok(Forward { prob, params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seq: usize, dim: usize, width: usize, filters: usize) -> TextCnnConfig {
        TextCnnConfig {
            sequence_length: seq,
            embedding_dim: dim,
            kernel_width: width,
            num_filters: filters,
            training: TrainingConfig::default(),
        }
    }

    fn input(t: usize, d: usize, data: Vec<f64>) -> EmbeddedInput {
        EmbeddedInput::new(Tensor::from_vec(&[t, d], data).unwrap(), vec![true; t])
    }

    #[test]
    fn zero_model_gives_half() {
        let m = TextCnnModel::zeros(tiny(8, 3, 5, 4)).unwrap();
        assert_eq!(m.predict_proba(&input(8, 3, vec![0.0; 24])).unwrap(), 0.5);
    }

    #[test]
    fn zero_filters_give_sigmoid_of_bias() {
        let mut m = TextCnnModel::zeros(tiny(8, 3, 5, 4)).unwrap();
        m.dense_bias = Tensor::scalar(1.3);
        let x = input(8, 3, (0..24).map(|i| i as f64 * 0.1 - 1.0).collect());
        let p = m.predict_proba(&x).unwrap();
        assert!((p - 1.0 / (1.0 + (-1.3f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn hand_traced_six_tokens() {
        // D = 1, W = 5, one filter (1, 0, -1, 0, 1), bias -0.5.
        // windows over x = (1, 2, 0, -1, 3, 1):
        //   t0: 1 - 0 + 3 - 0.5 = 3.5
        //   t1: 2 + 1 + 1 - 0.5 = 3.5
        // pooled 3.5; logit 2 * 3.5 - 1 = 6; p = sigmoid(6) = 0.9975273768433653
        let mut m = TextCnnModel::zeros(tiny(6, 1, 5, 1)).unwrap();
        m.filters = Tensor::from_vec(&[5, 1, 1], vec![1.0, 0.0, -1.0, 0.0, 1.0]).unwrap();
        m.conv_bias = Tensor::scalar(-0.5);
        m.dense_weights = Tensor::scalar(2.0);
        m.dense_bias = Tensor::scalar(-1.0);
        let p = m.predict_proba(&input(6, 1, vec![1.0, 2.0, 0.0, -1.0, 3.0, 1.0])).unwrap();
        assert!((p - 0.997_527_376_843_365_3).abs() < 1e-15, "{p}");
    }

    #[test]
    fn short_sequence_rejected() {
        assert!(TextCnnModel::zeros(tiny(4, 2, 5, 1)).is_err());
        let m = TextCnnModel::zeros(tiny(6, 2, 5, 1)).unwrap();
        let err = m.predict_proba(&input(3, 2, vec![0.0; 6])).unwrap_err();
        assert!(err.to_string().contains("conv1d"), "{err}");
    }

    #[test]
    fn width_one_pooling_ignores_order() {
        let mut m = TextCnnModel::init(tiny(4, 2, 1, 3)).unwrap();
        m.conv_bias = Tensor::from_vec(&[3], vec![0.1, -0.2, 0.3]).unwrap();
        let a = input(4, 2, vec![0.5, -1.0, 2.0, 0.3, -0.7, 0.9, 0.0, 1.5]);
        let b = input(4, 2, vec![0.0, 1.5, -0.7, 0.9, 0.5, -1.0, 2.0, 0.3]);
        assert_eq!(m.predict_proba(&a).unwrap(), m.predict_proba(&b).unwrap());
    }

    #[test]
    fn from_parameters_checks_shapes() {
        let m = TextCnnModel::init(tiny(6, 2, 5, 3)).unwrap();
        let named: Vec<_> = m.parameters().into_iter().map(|(n, t)| (n.to_string(), t.clone())).collect();
        assert_eq!(TextCnnModel::from_parameters(m.config.clone(), named.clone()).unwrap(), m);
        let mut bad = named;
        bad[1].1 = Tensor::zeros(&[2]);
        assert!(TextCnnModel::from_parameters(m.config.clone(), bad).is_err());
    }
}
