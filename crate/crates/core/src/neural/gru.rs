use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::Graph;
use super::init::xavier_uniform;
use super::tensor::Tensor;
use super::textcnn::take_named;
use super::train::EmbeddedInput;
use super::{dense_head, Forward, NeuralNet, TrainingConfig};
use crate::error::{Error, Result};
use crate::util::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruConfig {
    pub sequence_length: usize,
    pub embedding_dim: usize,
    pub hidden_size: usize,
    pub training: TrainingConfig,
}

impl Default for GruConfig {
    fn default() -> Self {
        GruConfig {
            sequence_length: 300,
            embedding_dim: 300,
            hidden_size: 128,
            training: TrainingConfig::default(),
        }
    }
}

impl GruConfig {
    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        if self.hidden_size == 0 || self.embedding_dim == 0 || self.sequence_length == 0 {
            return Err(Error::InvalidConfig(
                "hidden size, embedding dimension and sequence length must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Gate parameters use the row-vector convention: `x_t W + h U + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruModel {
    pub config: GruConfig,
    pub w_z: Tensor,
    pub w_r: Tensor,
    pub w_h: Tensor,
    pub u_z: Tensor,
    pub u_r: Tensor,
    pub u_h: Tensor,
    pub b_z: Tensor,
    pub b_r: Tensor,
    pub b_h: Tensor,
    pub dense_weights: Tensor,
    pub dense_bias: Tensor,
}

impl GruModel {
    pub fn zeros(config: GruConfig) -> Result<Self> {
        config.validate()?;
        let (d, h) = (config.embedding_dim, config.hidden_size);
        Ok(GruModel {
            w_z: Tensor::zeros(&[d, h]),
            w_r: Tensor::zeros(&[d, h]),
            w_h: Tensor::zeros(&[d, h]),
            u_z: Tensor::zeros(&[h, h]),
            u_r: Tensor::zeros(&[h, h]),
            u_h: Tensor::zeros(&[h, h]),
            b_z: Tensor::zeros(&[h]),
            b_r: Tensor::zeros(&[h]),
            b_h: Tensor::zeros(&[h]),
            dense_weights: Tensor::zeros(&[h]),
            dense_bias: Tensor::zeros(&[1]),
            config,
        })
    }

    /// Xavier-uniform weights from `config.training.seed`, zero biases.
    pub fn init(config: GruConfig) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let (d, h) = (m.config.embedding_dim, m.config.hidden_size);
        let mut rng = seeded_rng(m.config.training.seed, 0);
        for w in [&mut m.w_z, &mut m.w_r, &mut m.w_h] {
            *w = xavier_uniform(&[d, h], d, h, &mut rng);
        }
        for u in [&mut m.u_z, &mut m.u_r, &mut m.u_h] {
            *u = xavier_uniform(&[h, h], h, h, &mut rng);
        }
        m.dense_weights = xavier_uniform(&[h], h, 1, &mut rng);
        Ok(m)
    }

    pub fn from_parameters(config: GruConfig, mut named: Vec<(String, Tensor)>) -> Result<Self> {
        let mut m = Self::zeros(config)?;
        let names = m.parameters().iter().map(|(n, _)| *n).collect::<Vec<_>>();
        for (name, slot) in names.into_iter().zip(m.parameters_mut()) {
            take_named(&mut named, name, slot)?;
        }
        Ok(m)
    }
}

impl NeuralNet for GruModel {
    fn training(&self) -> &TrainingConfig {
        &self.config.training
    }

    fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    fn parameters(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("gru.w_z", &self.w_z),
            ("gru.w_r", &self.w_r),
            ("gru.w_h", &self.w_h),
            ("gru.u_z", &self.u_z),
            ("gru.u_r", &self.u_r),
            ("gru.u_h", &self.u_h),
            ("gru.b_z", &self.b_z),
            ("gru.b_r", &self.b_r),
            ("gru.b_h", &self.b_h),
            ("dense.weights", &self.dense_weights),
            ("dense.bias", &self.dense_bias),
        ]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
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
        let [w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h, dense_w, dense_b] = params[..] else {
            unreachable!("eleven parameters")
        };
        let (rows, dim) = input
            .x
            .dims2()
            .ok_or_else(|| Error::ShapeMismatch { op: "gru", detail: "input must be 2-D".into() })?;
        if dim != self.config.embedding_dim || input.active.len() != rows {
            return Err(Error::ShapeMismatch {
                op: "gru",
                detail: format!(
                    "input {rows}x{dim} with {} mask entries, model expects width {}",
                    input.active.len(),
                    self.config.embedding_dim
                ),
            });
        }

        // Padded positions are skipped, so only active rows enter the recurrence.
        let active: Vec<f64> = input
            .active
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .flat_map(|(t, _)| input.x.data()[t * dim..(t + 1) * dim].iter().copied())
            .collect();
        let steps = active.len() / dim;
        let hidden = self.config.hidden_size;
        let mut h = g.input(Tensor::zeros(&[1, hidden]));
        if steps > 0 {
            let x = g.input(Tensor::from_vec(&[steps, dim], active)?);
            let xz = g.matmul(x, w_z)?;
            let xz = g.add_bias(xz, b_z)?;
            let xr = g.matmul(x, w_r)?;
            let xr = g.add_bias(xr, b_r)?;
            let xh = g.matmul(x, w_h)?;
            let xh = g.add_bias(xh, b_h)?;
            for t in 0..steps {
                let hz = g.matmul(h, u_z)?;
                let zt = g.row(xz, t)?;
                let z = g.add(zt, hz)?;
                let z = g.sigmoid(z);

                let hr = g.matmul(h, u_r)?;
                let rt = g.row(xr, t)?;
                let r = g.add(rt, hr)?;
                let r = g.sigmoid(r);

                let rh = g.mul(r, h)?;
                let cand = g.matmul(rh, u_h)?;
                let ht = g.row(xh, t)?;
                let cand = g.add(ht, cand)?;
                let cand = g.tanh(cand);

                let keep = g.one_minus(z);
                let old = g.mul(keep, h)?;
                let new = g.mul(z, cand)?;
                h = g.add(old, new)?;
            }
        }
        let prob = dense_head(g, h, dense_w, dense_b, self.config.training.dropout_rate, dropout)?;
        Ok(Forward { prob, params })
    }
}
