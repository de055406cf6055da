//! L2-regularized logistic regression and linear SVM.
//!
//! Both minimize `0.5 * |w|^2 + C * sum_i loss(y_i * (w . x_i + b))` with
//! labels mapped to `{-1, +1}`, using deterministic full-batch
//! (sub)gradient descent from the origin. Each step starts at the
//! configured learning rate and is halved until the objective decreases
//! sufficiently, so the objective trace is monotone for any data scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureRows;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Logistic,
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModelConfig {
    pub loss: LossKind,
    /// Weight of the data term.
    pub c: f64,
    pub seed: u64,
    pub max_epochs: usize,
    pub learning_rate: f64,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
}

impl LinearModelConfig {
    pub fn new(loss: LossKind) -> Self {
        LinearModelConfig {
            loss,
            c: 1.0,
            seed: 0,
            max_epochs: 100,
            learning_rate: 0.1,
            tolerance: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidConfig(format!("C must be positive, got {}", self.c)));
        }
        if self.max_epochs < 1 {
            return Err(Error::InvalidConfig("max_epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub kind: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: LinearModelConfig,
    pub trained_on: FeatureSpace,
}

impl LinearModel {
    pub fn zeros(config: LinearModelConfig, trained_on: FeatureSpace) -> Self {
        LinearModel {
            weights: vec![0.0; trained_on.dim],
            bias: 0.0,
            config,
            trained_on,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

fn signed(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `ln(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-example loss and its derivative with respect to the margin.
fn loss_and_slope(loss: LossKind, margin: f64) -> (f64, f64) {
    match loss {
        LossKind::Logistic => (softplus(-margin), -sigmoid(-margin)),
        // Margin exactly 1 takes the zero branch.
        LossKind::Hinge if margin < 1.0 => (1.0 - margin, -1.0),
        LossKind::Hinge => (0.0, 0.0),
    }
}

fn check_dims<X: FeatureRows + ?Sized>(x: &X, y: &[u8], dim: usize) -> Result<()> {
    if x.ncols() != dim {
        return Err(Error::DimensionMismatch {
            context: "feature columns vs weights",
            expected: dim,
            found: x.ncols(),
        });
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "feature rows vs labels",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    Ok(())
}

fn objective_only<X: FeatureRows + ?Sized>(w: &[f64], b: f64, x: &X, y: &[u8], loss: LossKind, c: f64) -> f64 {
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let data: f64 = (0..x.nrows())
        .map(|i| loss_and_slope(loss, signed(y[i]) * (x.row_dot(i, w) + b)).0)
        .sum();
    reg + c * data
}

/// Objective value with its gradient with respect to `(w, b)`.
pub fn objective_and_gradient<X: FeatureRows + ?Sized>(
    w: &[f64],
    b: f64,
    x: &X,
    y: &[u8],
    loss: LossKind,
    c: f64,
) -> Result<(f64, Vec<f64>, f64)> {
    check_dims(x, y, w.len())?;
    let mut grad_w = w.to_vec();
    let mut grad_b = 0.0;
    let mut obj = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    for i in 0..x.nrows() {
        let t = signed(y[i]);
        let (l, slope) = loss_and_slope(loss, t * (x.row_dot(i, w) + b));
        obj += c * l;
        if slope != 0.0 {
            let g = c * slope * t;
            x.row_axpy(i, g, &mut grad_w);
            grad_b += g;
        }
    }
    Ok((obj, grad_w, grad_b))
}

pub fn objective_value<X: FeatureRows + ?Sized>(model: &LinearModel, x: &X, y: &[u8]) -> Result<f64> {
    check_dims(x, y, model.dim())?;
    Ok(objective_only(
        &model.weights,
        model.bias,
        x,
        y,
        model.config.loss,
        model.config.c,
    ))
}

pub fn train_linear<X: FeatureRows + ?Sized>(
    x: &X,
    y: &[u8],
    config: &LinearModelConfig,
    feature_kind: &str,
) -> Result<LinearModel> {
    train_linear_traced(x, y, config, feature_kind).map(|(m, _)| m)
}

/// Trains and also returns the objective after every accepted step
/// (the first entry is the objective at the origin).
pub fn train_linear_traced<X: FeatureRows + ?Sized>(
    x: &X,
    y: &[u8],
    config: &LinearModelConfig,
    feature_kind: &str,
) -> Result<(LinearModel, Vec<f64>)> {
    config.validate()?;
    let space = FeatureSpace {
        kind: feature_kind.to_string(),
        dim: x.ncols(),
    };
    check_dims(x, y, space.dim)?;
    let ones = y.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == y.len() {
        return Err(Error::SingleClass);
    }

    let (loss, c) = (config.loss, config.c);
    let mut model = LinearModel::zeros(*config, space);
    let mut trace = Vec::new();
    let mut step = config.learning_rate;
    let min_step = config.learning_rate * 1e-12;

    for epoch in 0..config.max_epochs {
        let (obj, gw, gb) = objective_and_gradient(&model.weights, model.bias, x, y, loss, c)?;
        if !obj.is_finite() {
            return Err(Error::NonFiniteLoss {
                detail: format!("linear epoch {epoch}: objective {obj}"),
            });
        }
        if trace.is_empty() {
            trace.push(obj);
        }
        let gnorm2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if gnorm2.sqrt() < config.tolerance {
            break;
        }

        let mut trial_w = vec![0.0; gw.len()];
        let accepted = loop {
            for ((t, w), g) in trial_w.iter_mut().zip(&model.weights).zip(&gw) {
                *t = w - step * g;
            }
            let trial_b = model.bias - step * gb;
            let trial = objective_only(&trial_w, trial_b, x, y, loss, c);
            if trial.is_finite() && trial <= obj - 1e-4 * step * gnorm2 {
                break Some((trial_b, trial));
            }
            step *= 0.5;
            if step < min_step {
                break None;
            }
        };
        let Some((trial_b, trial)) = accepted else {
            log::debug!("linear training: no descent step at epoch {epoch}; stopping");
            break;
        };
        std::mem::swap(&mut model.weights, &mut trial_w);
        model.bias = trial_b;
        trace.push(trial);
        step = (step * 2.0).min(config.learning_rate);
    }
    Ok((model, trace))
}

pub fn decision_score(model: &LinearModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "feature row vs weights",
            expected: model.dim(),
            found: x.len(),
        });
    }
    Ok(model.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + model.bias)
}

/// Score of row `i` of any feature matrix.
pub fn decision_score_row<X: FeatureRows + ?Sized>(model: &LinearModel, x: &X, i: usize) -> Result<f64> {
    if x.ncols() != model.dim() {
        return Err(Error::DimensionMismatch {
            context: "feature columns vs weights",
            expected: model.dim(),
            found: x.ncols(),
        });
    }
    Ok(x.row_dot(i, &model.weights) + model.bias)
}

/// Label for a score: 1 when the score is >= 0 (ties go to 1). For the
/// logistic model this is the same as probability >= 0.5.
pub fn label_for_score(score: f64) -> u8 {
    (score >= 0.0) as u8
}

pub fn predict_label(model: &LinearModel, x: &[f64]) -> Result<u8> {
    decision_score(model, x).map(label_for_score)
}

/// Probability of label 1 for logistic models, the raw margin for hinge.
pub fn report_score(model: &LinearModel, score: f64) -> f64 {
    match model.config.loss {
        LossKind::Logistic => sigmoid(score),
        LossKind::Hinge => score,
    }
}

pub fn predict_rows<X: FeatureRows + ?Sized>(model: &LinearModel, x: &X) -> Result<Vec<(u8, f64)>> {
    (0..x.nrows())
        .map(|i| decision_score_row(model, x, i).map(|s| (label_for_score(s), s)))
        .collect()
}
