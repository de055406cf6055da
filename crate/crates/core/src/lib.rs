//! Cyberbullying comment detection for game-forum corpora.
//!
//! The crate covers the whole experimental pipeline: corpus ingestion and
//! statistics ([`corpus`]), comment preprocessing ([`textprep`]), TF-IDF and
//! embedding features ([`vectorize`]), SMOTE oversampling ([`imbalance`]),
//! logistic regression and linear SVM ([`linear`]), Text-CNN and GRU
//! classifiers on a small reverse-mode autodiff engine ([`neural`]), and
//! stratified cross-validation with macro-F1 reporting ([`evaluate`]).

pub mod artifact;
pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod imbalance;
pub mod linear;
pub mod matrix;
pub mod neural;
pub mod pipeline;
pub mod textprep;
pub mod util;
pub mod vectorize;

pub use error::{Error, Result};
