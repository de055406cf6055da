//! Finite-difference checks of the full training losses, shared by the
//! gradient tests and the acceptance run.

use forumguard::linear::{objective_and_gradient, LossKind};
use forumguard::matrix::Matrix;
use forumguard::neural::{
    gradient_check, loss_and_gradients, EmbeddedInput, GradientCheck, GruConfig, GruModel, NeuralNet, Tensor,
    TextCnnConfig, TextCnnModel, TrainingConfig,
};
use forumguard::util::seeded_rng;
use forumguard::Result;
use rand::Rng;

pub const PROBES: usize = 50;
pub const MAX_REL: f64 = 1e-4;

fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = seeded_rng(seed, 7);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn named<M: NeuralNet>(m: &M, values: &[Tensor]) -> Vec<(String, Tensor)> {
    m.parameters()
        .iter()
        .zip(values)
        .map(|((n, _), t)| (n.to_string(), t.clone()))
        .collect()
}

/// Summed BCE over `examples`, with a fixed dropout draw per example so every
/// evaluation sees the same mask.
fn batch_loss<M: NeuralNet>(model: &M, examples: &[(EmbeddedInput, u8)]) -> Result<(f64, Vec<Tensor>)> {
    let mut total = 0.0;
    let mut grads: Vec<Tensor> = model.parameters().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
    for (i, (x, y)) in examples.iter().enumerate() {
        let mut rng = seeded_rng(100 + i as u64, 2);
        let (l, g) = loss_and_gradients(model, x, *y, Some(&mut rng))?;
        total += l;
        for (a, b) in grads.iter_mut().zip(&g) {
            a.add_scaled(b, 1.0);
        }
    }
    Ok((total, grads))
}

fn training(dropout: f64) -> TrainingConfig {
    TrainingConfig {
        dropout_rate: dropout,
        seed: 21,
        ..TrainingConfig::default()
    }
}

pub fn textcnn() -> Result<GradientCheck> {
    let config = TextCnnConfig {
        sequence_length: 4,
        embedding_dim: 5,
        kernel_width: 3,
        num_filters: 6,
        training: training(0.25),
    };
    let mut model = TextCnnModel::init(config.clone())?;
    model.conv_bias = random_tensor(&[6], 1).map(|v| 0.1 * v);
    model.dense_bias = Tensor::scalar(0.3);
    let examples = vec![
        (EmbeddedInput::new(random_tensor(&[4, 5], 2), vec![true; 4]), 1),
        (EmbeddedInput::new(random_tensor(&[4, 5], 3), vec![true; 4]), 0),
    ];
    let params: Vec<Tensor> = model.parameters().into_iter().map(|(_, t)| t.clone()).collect();
    gradient_check(
        &params,
        |p| batch_loss(&TextCnnModel::from_parameters(config.clone(), named(&model, p))?, &examples),
        PROBES,
        5,
    )
}

pub fn gru() -> Result<GradientCheck> {
    let config = GruConfig {
        sequence_length: 4,
        embedding_dim: 4,
        hidden_size: 5,
        training: training(0.2),
    };
    let mut model = GruModel::init(config.clone())?;
    model.b_z = random_tensor(&[5], 4).map(|v| 0.2 * v);
    model.b_r = random_tensor(&[5], 5).map(|v| 0.2 * v);
    model.b_h = random_tensor(&[5], 6).map(|v| 0.2 * v);
    model.dense_bias = Tensor::scalar(-0.2);
    // Three real steps plus one padded position.
    let examples = vec![
        (EmbeddedInput::new(random_tensor(&[4, 4], 7), vec![true, true, true, false]), 1),
        (EmbeddedInput::new(random_tensor(&[4, 4], 8), vec![true, true, true, false]), 0),
    ];
    let params: Vec<Tensor> = model.parameters().into_iter().map(|(_, t)| t.clone()).collect();
    gradient_check(
        &params,
        |p| batch_loss(&GruModel::from_parameters(config.clone(), named(&model, p))?, &examples),
        PROBES,
        6,
    )
}

pub fn linear(loss: LossKind, seed: u64) -> Result<GradientCheck> {
    let mut rng = seeded_rng(seed, 8);
    let (n, d) = (30, 8);
    let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let y: Vec<u8> = (0..n).map(|i| u8::from(x.get(i, 0) + 0.3 * x.get(i, 1) > 0.1)).collect();
    let w = random_tensor(&[d], seed);
    let b = Tensor::scalar(0.05);
    gradient_check(
        &[w, b],
        |p| {
            let (obj, gw, gb) = objective_and_gradient(p[0].data(), p[1].item(), &x, &y, loss, 0.7)?;
            Ok((obj, vec![Tensor::from_vec(&[d], gw)?, Tensor::scalar(gb)]))
        },
        PROBES,
        seed,
    )
}
