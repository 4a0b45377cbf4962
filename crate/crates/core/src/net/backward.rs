//! Backpropagation through time for the mean per-step cross-entropy.

use rand::Rng;

use super::forward::{classifier_trace, loss, lstm_forward, ClassifierTrace, LstmTrace, Mode};
use super::params::{Dense, LstmParams, NetParams};
use crate::zone_graph::ZoneId;

/// Result of one forward/backward pass over a sequence.
#[derive(Debug, Clone)]
pub struct Gradient {
    /// Mean per-step loss of the forward pass (with dropout active).
    pub loss: f64,
    pub grad: NetParams,
}

fn dense_backward(d: &Dense, g: &mut Dense, input: &[f64], dy: &[f64]) -> Vec<f64> {
    g.w.outer_acc(dy, input);
    for (gb, dv) in g.b.iter_mut().zip(dy) {
        *gb += dv;
    }
    let mut dx = vec![0.0; input.len()];
    d.w.t_mul_acc(dy, &mut dx);
    dx
}

/// Backward through the classifier; returns the gradient w.r.t. its input `h`.
fn classifier_backward(p: &NetParams, g: &mut NetParams, t: &ClassifierTrace, label: usize, scale: f64) -> Vec<f64> {
    let mut dlogits: Vec<f64> = t.probs.iter().map(|p| p * scale).collect();
    dlogits[label] -= scale;
    let dd2 = dense_backward(&p.out, &mut g.out, &t.d2, &dlogits);
    let da2: Vec<f64> = (0..dd2.len())
        .map(|k| if t.a2[k] > 0.0 { dd2[k] * t.mask2[k] } else { 0.0 })
        .collect();
    let dd1 = dense_backward(&p.dense2, &mut g.dense2, &t.d1, &da2);
    let da1: Vec<f64> = (0..dd1.len())
        .map(|k| if t.a1[k] > 0.0 { dd1[k] * t.mask1[k] } else { 0.0 })
        .collect();
    dense_backward(&p.dense1, &mut g.dense1, &t.h, &da1)
}

/// Backward through one LSTM step.
///
/// `dh` is the total gradient reaching `h_t`; `dc_next` the gradient reaching
/// `C_t` from step `t+1`. Returns `(dx, dh_prev, dc_prev)`.
fn lstm_backward(p: &LstmParams, g: &mut LstmParams, t: &LstmTrace, dh: &[f64], dc_next: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = dh.len();
    let dzo: Vec<f64> = (0..n).map(|k| dh[k] * t.tanh_c[k] * t.o[k] * (1.0 - t.o[k])).collect();
    let mut dc: Vec<f64> = (0..n)
        .map(|k| dc_next[k] + dh[k] * t.o[k] * (1.0 - t.tanh_c[k] * t.tanh_c[k]))
        .collect();
    // o_t reads C_t through the output peephole.
    p.w_co.t_mul_acc(&dzo, &mut dc);

    let dzi: Vec<f64> = (0..n).map(|k| dc[k] * t.g[k] * t.i[k] * (1.0 - t.i[k])).collect();
    let dzf: Vec<f64> = (0..n).map(|k| dc[k] * t.c_prev[k] * t.f[k] * (1.0 - t.f[k])).collect();
    let dzg: Vec<f64> = (0..n).map(|k| dc[k] * t.i[k] * (1.0 - t.g[k] * t.g[k])).collect();

    g.w_xi.outer_acc(&dzi, &t.x);
    g.w_xf.outer_acc(&dzf, &t.x);
    g.w_xc.outer_acc(&dzg, &t.x);
    g.w_xo.outer_acc(&dzo, &t.x);
    g.w_hi.outer_acc(&dzi, &t.h_prev);
    g.w_hf.outer_acc(&dzf, &t.h_prev);
    g.w_hc.outer_acc(&dzg, &t.h_prev);
    g.w_ho.outer_acc(&dzo, &t.h_prev);
    g.w_ci.outer_acc(&dzi, &t.c_prev);
    g.w_cf.outer_acc(&dzf, &t.c_prev);
    g.w_co.outer_acc(&dzo, &t.c);
    for k in 0..n {
        g.b_i[k] += dzi[k];
        g.b_f[k] += dzf[k];
        g.b_c[k] += dzg[k];
        g.b_o[k] += dzo[k];
    }

    let mut dc_prev: Vec<f64> = (0..n).map(|k| dc[k] * t.f[k]).collect();
    p.w_ci.t_mul_acc(&dzi, &mut dc_prev);
    p.w_cf.t_mul_acc(&dzf, &mut dc_prev);

    let mut dh_prev = vec![0.0; n];
    let mut dx = vec![0.0; t.x.len()];
    for (w_h, w_x, dz) in [(&p.w_hi, &p.w_xi, &dzi), (&p.w_hf, &p.w_xf, &dzf), (&p.w_hc, &p.w_xc, &dzg), (&p.w_ho, &p.w_xo, &dzo)] {
        w_h.t_mul_acc(dz, &mut dh_prev);
        w_x.t_mul_acc(dz, &mut dx);
    }
    (dx, dh_prev, dc_prev)
}

/// Full BPTT over one labeled sequence, starting from zero state.
///
/// The loss is the mean over steps of `-ln p_t[label_t]`. Dropout masks are
/// drawn once in the forward pass and reused backward. `dropout = 0`
/// consumes no randomness.
pub fn backward<R: Rng + ?Sized, X: AsRef<[f64]>>(
    p: &NetParams,
    inputs: &[X],
    labels: &[ZoneId],
    dropout: f64,
    rng: &mut R,
) -> Gradient {
    assert_eq!(inputs.len(), labels.len(), "one label per step");
    assert!(!inputs.is_empty(), "empty sequence");
    let steps = inputs.len();
    let layers = p.lstm.len();
    let mode = Mode::Train { dropout };

    let mut traces: Vec<Vec<LstmTrace>> = Vec::with_capacity(steps);
    let mut cls: Vec<ClassifierTrace> = Vec::with_capacity(steps);
    let mut state: Vec<(Vec<f64>, Vec<f64>)> =
        p.lstm.iter().map(|l| (vec![0.0; l.hidden_dim()], vec![0.0; l.hidden_dim()])).collect();
    let mut total = 0.0;
    for (x, label) in inputs.iter().zip(labels) {
        let mut input = x.as_ref().to_vec();
        let mut step = Vec::with_capacity(layers);
        for (l, lp) in p.lstm.iter().enumerate() {
            let t = lstm_forward(lp, &input, &state[l].0, &state[l].1);
            state[l] = (t.h.clone(), t.c.clone());
            input = t.h.clone();
            step.push(t);
        }
        let ct = classifier_trace(p, &input, mode, rng);
        total += loss(&ct.probs, label.0);
        traces.push(step);
        cls.push(ct);
    }

    let mut grad = NetParams::zeros(p.shape());
    let scale = 1.0 / steps as f64;
    let mut dh_next: Vec<Vec<f64>> = p.lstm.iter().map(|l| vec![0.0; l.hidden_dim()]).collect();
    let mut dc_next = dh_next.clone();
    for t in (0..steps).rev() {
        let mut dh_above = classifier_backward(p, &mut grad, &cls[t], labels[t].0, scale);
        for l in (0..layers).rev() {
            let dh: Vec<f64> = dh_above.iter().zip(&dh_next[l]).map(|(a, b)| a + b).collect();
            let (dx, dh_prev, dc_prev) = lstm_backward(&p.lstm[l], &mut grad.lstm[l], &traces[t][l], &dh, &dc_next[l]);
            dh_next[l] = dh_prev;
            dc_next[l] = dc_prev;
            dh_above = dx;
        }
    }
    Gradient { loss: total * scale, grad }
}

/// Mean per-step loss of a sequence in inference mode.
pub fn sequence_loss<X: AsRef<[f64]>>(p: &NetParams, inputs: &[X], labels: &[ZoneId]) -> f64 {
    let mut state = super::RecurrentState::zeros(p);
    let mut total = 0.0;
    for (x, label) in inputs.iter().zip(labels) {
        state = super::lstm_step(p, x.as_ref(), &state);
        total += loss(&super::classify(p, state.h()), label.0);
    }
    total / inputs.len() as f64
}
