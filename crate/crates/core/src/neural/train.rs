use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::graph::Graph;
use super::tensor::Tensor;
use super::NeuralNet;
use crate::error::{Error, Result};
use crate::imbalance::{plan_smote, SmoteConfig, SyntheticSample};
use crate::util::{mix_seed, seeded_rng};
use crate::vectorize::{EmbeddingMatrix, SequenceEncoding, PAD_INDEX};

/// Examples per parallel work unit. Gradients are summed within a chunk and
/// chunk sums are reduced in order, so results do not depend on thread count.
const CHUNK: usize = 8;

/// An embedded sequence `(T x D)` plus the mask of non-padding positions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedInput {
    pub x: Tensor,
    pub active: Vec<bool>,
}

impl EmbeddedInput {
    pub fn new(x: Tensor, active: Vec<bool>) -> Self {
        EmbeddedInput { x, active }
    }

    pub fn from_encoding(embeddings: &EmbeddingMatrix, encoding: &SequenceEncoding) -> Self {
        let m = embeddings.embed(encoding);
        let x = Tensor::from_vec(&[m.rows(), m.cols()], m.as_slice().to_vec()).expect("embedded shape");
        EmbeddedInput::new(x, encoding.active_mask())
    }
}

/// Training examples over frozen embeddings. SMOTE synthetics are kept as
/// interpolation recipes and embedded on demand; a synthetic position is
/// active when either endpoint is.
pub struct TrainingSet<'e> {
    embeddings: &'e EmbeddingMatrix,
    encodings: Vec<SequenceEncoding>,
    labels: Vec<u8>,
    synthetics: Vec<SyntheticSample>,
    synthetic_label: u8,
}

impl<'e> TrainingSet<'e> {
    pub fn new(embeddings: &'e EmbeddingMatrix, encodings: Vec<SequenceEncoding>, labels: Vec<u8>) -> Result<Self> {
        if encodings.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "training examples vs labels",
                expected: encodings.len(),
                found: labels.len(),
            });
        }
        Ok(TrainingSet {
            embeddings,
            encodings,
            labels,
            synthetics: Vec::new(),
            synthetic_label: 1,
        })
    }

    /// Adds SMOTE synthetics planned on the flattened embedded sequences.
    pub fn with_smote(mut self, config: &SmoteConfig) -> Result<Self> {
        let plan = plan_smote(&self.labels, config, |a, b| self.squared_distance(a, b))?;
        self.synthetic_label = plan.minority_label;
        self.synthetics = plan.synthetics;
        Ok(self)
    }

    fn squared_distance(&self, a: usize, b: usize) -> f64 {
        let rows = &self.embeddings.rows;
        self.encodings[a]
            .indices
            .iter()
            .zip(&self.encodings[b].indices)
            .filter(|(i, j)| i != j)
            .map(|(&i, &j)| {
                rows.row(i as usize)
                    .iter()
                    .zip(rows.row(j as usize))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn len(&self) -> usize {
        self.labels.len() + self.synthetics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn synthetic_count(&self) -> usize {
        self.synthetics.len()
    }

    pub fn label(&self, i: usize) -> u8 {
        if i < self.labels.len() {
            self.labels[i]
        } else {
            self.synthetic_label
        }
    }

    pub fn labels(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    pub fn example(&self, i: usize) -> EmbeddedInput {
        let n = self.labels.len();
        if i < n {
            return EmbeddedInput::from_encoding(self.embeddings, &self.encodings[i]);
        }
        let s = self.synthetics[i - n];
        let (a, b) = (&self.encodings[s.base], &self.encodings[s.neighbor]);
        let dim = self.embeddings.dim();
        let mut data = Vec::with_capacity(a.len() * dim);
        let mut active = Vec::with_capacity(a.len());
        for (&ia, &ib) in a.indices.iter().zip(&b.indices) {
            let (ra, rb) = (self.embeddings.rows.row(ia as usize), self.embeddings.rows.row(ib as usize));
            data.extend(ra.iter().zip(rb).map(|(x, y)| x + s.u * (y - x)));
            active.push(ia != PAD_INDEX || ib != PAD_INDEX);
        }
        EmbeddedInput::new(Tensor::from_vec(&[a.len(), dim], data).expect("embedded shape"), active)
    }
}

/// BCE loss of one example and its gradient for every parameter, in
/// [`NeuralNet::parameters`] order.
pub fn loss_and_gradients<M: NeuralNet>(
    model: &M,
    input: &EmbeddedInput,
    label: u8,
    dropout: Option<&mut ChaCha8Rng>,
) -> Result<(f64, Vec<Tensor>)> {
    let mut g = Graph::new();
    let f = model.forward(&mut g, input, dropout)?;
    let loss = g.bce(f.prob, f64::from(label))?;
    let grads = g.backward(loss);
    let out = f
        .params
        .iter()
        .zip(model.parameters())
        .map(|(&v, (_, t))| grads.get_or_zeros(v, t.shape()))
        .collect();
    Ok((g.value(loss).item(), out))
}

/// Adam with the usual bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new<M: NeuralNet>(model: &M, learning_rate: f64) -> Self {
        let zeros: Vec<Tensor> = model.parameters().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step<M: NeuralNet>(&mut self, model: &mut M, grads: &[Tensor]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in model.parameters_mut().into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((w, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                *w -= self.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + self.epsilon);
            }
        }
    }
}

fn dropout_rng(seed: u64, epoch: usize, position: usize) -> ChaCha8Rng {
    seeded_rng(mix_seed(seed ^ mix_seed(((epoch as u64) << 32) | position as u64)), 2)
}

/// Minibatch Adam on mean BCE for exactly `epochs` epochs, reshuffling the
/// examples each epoch from the configured seed.
pub fn train_neural<M: NeuralNet>(mut model: M, data: &TrainingSet<'_>) -> Result<M> {
    let cfg = model.training().clone();
    cfg.validate()?;
    if data.embeddings.dim() != model.embedding_dim() {
        return Err(Error::DimensionMismatch {
            context: "embedding width",
            expected: model.embedding_dim(),
            found: data.embeddings.dim(),
        });
    }
    let labels = data.labels();
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::SingleClass);
    }

    let mut adam = Adam::new(&model, cfg.learning_rate);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle_rng = seeded_rng(cfg.seed, 1);
    let param_count = model.parameters().len();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let offset = b * cfg.batch_size;
            let current = &model;
            let partials: Vec<(f64, Vec<Tensor>)> = batch
                .par_chunks(CHUNK)
                .enumerate()
                .map(|(c, chunk)| {
                    let mut loss = 0.0;
                    let mut sum: Option<Vec<Tensor>> = None;
                    for (j, &i) in chunk.iter().enumerate() {
                        let mut rng = dropout_rng(cfg.seed, epoch, offset + c * CHUNK + j);
                        let (l, grads) = loss_and_gradients(current, &data.example(i), labels[i], Some(&mut rng))?;
                        loss += l;
                        match &mut sum {
                            None => sum = Some(grads),
                            Some(acc) => {
                                for (a, g) in acc.iter_mut().zip(&grads) {
                                    a.add_scaled(g, 1.0);
                                }
                            }
                        }
                    }
                    Ok((loss, sum.unwrap_or_default()))
                })
                .collect::<Result<_>>()?;

            let mut loss = 0.0;
            let mut grads: Vec<Tensor> = model.parameters().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
            for (l, part) in &partials {
                loss += l;
                for (a, g) in grads.iter_mut().zip(part) {
                    a.add_scaled(g, 1.0);
                }
            }
            let scale = 1.0 / batch.len() as f64;
            loss *= scale;
            grads.iter_mut().for_each(|g| g.scale(scale));
            debug_assert_eq!(grads.len(), param_count);

            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    detail: format!("epoch {} of {}, batch {}: loss {loss}", epoch + 1, cfg.epochs, b + 1),
                });
            }
            log::debug!("epoch {} batch {} loss {loss:.6}", epoch + 1, b + 1);
            adam.step(&mut model, &grads);
        }
    }
    Ok(model)
}

/// Eval-mode probabilities for encoded sequences.
pub fn predict_encodings<M: NeuralNet>(
    model: &M,
    embeddings: &EmbeddingMatrix,
    encodings: &[SequenceEncoding],
) -> Result<Vec<f64>> {
    encodings
        .par_iter()
        .map(|e| model.predict_proba(&EmbeddedInput::from_encoding(embeddings, e)))
        .collect()
}
