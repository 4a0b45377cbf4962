//! Peephole LSTM with a dense classifier head, trained from scratch.
//!
//! Per step, each LSTM layer computes
//!
//! ```text
//! i_t = sigmoid(W_xi x_t + W_hi h_{t-1} + W_ci C_{t-1} + b_i)
//! f_t = sigmoid(W_xf x_t + W_hf h_{t-1} + W_cf C_{t-1} + b_f)
//! C_t = f_t * C_{t-1} + i_t * tanh(W_xc x_t + W_hc h_{t-1} + b_c)
//! o_t = sigmoid(W_xo x_t + W_ho h_{t-1} + W_co C_t + b_o)
//! h_t = o_t * tanh(C_t)
//! ```
//!
//! and the top layer's `h_t` goes through two ReLU dense layers (each
//! followed by dropout during training) and a softmax output layer.

mod backward;
mod forward;
pub mod io;
mod matrix;
mod params;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backward::{backward, sequence_loss, Gradient};
pub use forward::{
    argmax, classifier_forward, classify, forward_sequence, loss, lstm_step, predict_last, softmax, CellState, Mode,
    RecurrentState, PROB_EPS,
};
pub use io::{load_params, load_params_for, save_params, ModelFile};
pub use matrix::Matrix;
pub use params::{sgd_step, Dense, LstmParams, NetParams, Shape};
pub use train::{dataset_loss, train, train_with, EpochStats, TrainReport};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient in {0}")]
    NonFinite(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub class_dim: usize,
    pub dense_dim: usize,
    pub layers: usize,
    pub lookback: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl NetConfig {
    /// 142 sensors, 200 hidden, 115 zones, 200-wide dense layers, dropout 0.5.
    pub fn paper_scale() -> Self {
        NetConfig {
            input_dim: 142,
            hidden_dim: 200,
            class_dim: 115,
            dense_dim: 200,
            layers: 1,
            lookback: 10,
            dropout_rate: 0.5,
            learning_rate: 0.01,
            epochs: 30,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let dims = [
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("class_dim", self.class_dim),
            ("dense_dim", self.dense_dim),
            ("layers", self.layers),
            ("lookback", self.lookback),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, d)| *d == 0) {
            return Err(NetError::Config(format!("{name} must be at least 1")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NetError::Config(format!("dropout rate {} not in [0, 1)", self.dropout_rate)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::Config(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
