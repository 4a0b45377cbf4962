use rand::Rng;

use super::params::{LstmParams, NetParams};

/// Probability floor applied before taking logs.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

/// Hidden and cell vectors of every LSTM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub layers: Vec<CellState>,
}

impl RecurrentState {
    pub fn zeros(params: &NetParams) -> Self {
        RecurrentState {
            layers: params
                .lstm
                .iter()
                .map(|l| CellState { h: vec![0.0; l.hidden_dim()], c: vec![0.0; l.hidden_dim()] })
                .collect(),
        }
    }

    /// Output of the top layer, fed to the classifier.
    pub fn h(&self) -> &[f64] {
        &self.layers.last().expect("at least one layer").h
    }

    pub fn c(&self) -> &[f64] {
        &self.layers.last().expect("at least one layer").c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Inverted dropout at the given rate after each hidden dense layer.
    Train { dropout: f64 },
    Infer,
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Everything one LSTM step produces, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct LstmTrace {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    /// Candidate `tanh(W_xc x + W_hc h_prev + b_c)`.
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    pub o: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn lstm_forward(p: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmTrace {
    let gate = |wx: &super::Matrix, wh: &super::Matrix, wc: Option<(&super::Matrix, &[f64])>, b: &[f64]| {
        let mut z = b.to_vec();
        wx.mul_acc(x, &mut z);
        wh.mul_acc(h_prev, &mut z);
        if let Some((wc, c)) = wc {
            wc.mul_acc(c, &mut z);
        }
        z
    };
    let i: Vec<f64> = gate(&p.w_xi, &p.w_hi, Some((&p.w_ci, c_prev)), &p.b_i).into_iter().map(sigmoid).collect();
    let f: Vec<f64> = gate(&p.w_xf, &p.w_hf, Some((&p.w_cf, c_prev)), &p.b_f).into_iter().map(sigmoid).collect();
    let g: Vec<f64> = gate(&p.w_xc, &p.w_hc, None, &p.b_c).into_iter().map(f64::tanh).collect();
    let c: Vec<f64> = (0..g.len()).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    // The output gate looks at the updated cell state.
    let o: Vec<f64> = gate(&p.w_xo, &p.w_ho, Some((&p.w_co, &c)), &p.b_o).into_iter().map(sigmoid).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = o.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
    LstmTrace { x: x.to_vec(), h_prev: h_prev.to_vec(), c_prev: c_prev.to_vec(), i, f, g, c, o, tanh_c, h }
}

/// One recurrent step through every layer.
pub fn lstm_step(params: &NetParams, x: &[f64], prev: &RecurrentState) -> RecurrentState {
    assert_eq!(x.len(), params.input_dim(), "input dimension");
    let mut input = x.to_vec();
    let layers = params
        .lstm
        .iter()
        .zip(&prev.layers)
        .map(|(p, s)| {
            let t = lstm_forward(p, &input, &s.h, &s.c);
            input = t.h.clone();
            CellState { h: t.h, c: t.c }
        })
        .collect();
    RecurrentState { layers }
}

#[derive(Debug, Clone)]
pub(crate) struct ClassifierTrace {
    pub h: Vec<f64>,
    pub a1: Vec<f64>,
    pub mask1: Vec<f64>,
    pub d1: Vec<f64>,
    pub a2: Vec<f64>,
    pub mask2: Vec<f64>,
    pub d2: Vec<f64>,
    pub probs: Vec<f64>,
}

fn dropout_mask<R: Rng + ?Sized>(n: usize, mode: Mode, rng: &mut R) -> Vec<f64> {
    match mode {
        Mode::Train { dropout } if dropout > 0.0 => {
            let keep = 1.0 / (1.0 - dropout);
            (0..n).map(|_| if rng.random::<f64>() < dropout { 0.0 } else { keep }).collect()
        }
        _ => vec![1.0; n],
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

pub(crate) fn classifier_trace<R: Rng + ?Sized>(p: &NetParams, h: &[f64], mode: Mode, rng: &mut R) -> ClassifierTrace {
    let a1 = p.dense1.forward(h);
    let mask1 = dropout_mask(a1.len(), mode, rng);
    let d1: Vec<f64> = a1.iter().zip(&mask1).map(|(a, m)| a.max(0.0) * m).collect();
    let a2 = p.dense2.forward(&d1);
    let mask2 = dropout_mask(a2.len(), mode, rng);
    let d2: Vec<f64> = a2.iter().zip(&mask2).map(|(a, m)| a.max(0.0) * m).collect();
    let probs = softmax(&p.out.forward(&d2));
    ClassifierTrace { h: h.to_vec(), a1, mask1, d1, a2, mask2, d2, probs }
}

/// dense -> ReLU -> dropout -> dense -> ReLU -> dropout -> dense -> softmax.
pub fn classifier_forward<R: Rng + ?Sized>(p: &NetParams, h: &[f64], mode: Mode, rng: &mut R) -> Vec<f64> {
    classifier_trace(p, h, mode, rng).probs
}

/// Inference-mode classifier; needs no randomness.
pub fn classify(p: &NetParams, h: &[f64]) -> Vec<f64> {
    let d1: Vec<f64> = p.dense1.forward(h).into_iter().map(|a| a.max(0.0)).collect();
    let d2: Vec<f64> = p.dense2.forward(&d1).into_iter().map(|a| a.max(0.0)).collect();
    softmax(&p.out.forward(&d2))
}

/// Runs the sequence from zero state; one probability vector per step.
pub fn forward_sequence<R: Rng + ?Sized, X: AsRef<[f64]>>(
    p: &NetParams,
    steps: &[X],
    mode: Mode,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut state = RecurrentState::zeros(p);
    steps
        .iter()
        .map(|x| {
            state = lstm_step(p, x.as_ref(), &state);
            classifier_forward(p, state.h(), mode, rng)
        })
        .collect()
}

/// Class probabilities after running `steps` from zero state, inference mode.
pub fn predict_last<X: AsRef<[f64]>>(p: &NetParams, steps: &[X]) -> Vec<f64> {
    let mut state = RecurrentState::zeros(p);
    for x in steps {
        state = lstm_step(p, x.as_ref(), &state);
    }
    classify(p, state.h())
}

/// Categorical cross-entropy `-ln p[label]`, with `p` floored at [`PROB_EPS`].
pub fn loss(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_EPS).ln()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
