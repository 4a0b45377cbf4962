use rand::Rng;

use super::matrix::Matrix;
use super::{NetConfig, NetError};

/// Weights of one peephole LSTM layer. Peephole matrices are full `H x H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_xi: Matrix,
    pub w_xf: Matrix,
    pub w_xc: Matrix,
    pub w_xo: Matrix,
    pub w_hi: Matrix,
    pub w_hf: Matrix,
    pub w_hc: Matrix,
    pub w_ho: Matrix,
    pub w_ci: Matrix,
    pub w_cf: Matrix,
    pub w_co: Matrix,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let x = || Matrix::zeros(hidden, input);
        let h = || Matrix::zeros(hidden, hidden);
        LstmParams {
            w_xi: x(),
            w_xf: x(),
            w_xc: x(),
            w_xo: x(),
            w_hi: h(),
            w_hf: h(),
            w_hc: h(),
            w_ho: h(),
            w_ci: h(),
            w_cf: h(),
            w_co: h(),
            b_i: vec![0.0; hidden],
            b_f: vec![0.0; hidden],
            b_c: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
        }
    }

    fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, hidden);
        for m in [&mut p.w_xi, &mut p.w_xf, &mut p.w_xc, &mut p.w_xo] {
            *m = Matrix::uniform(hidden, input, rng);
        }
        for m in [&mut p.w_hi, &mut p.w_hf, &mut p.w_hc, &mut p.w_ho, &mut p.w_ci, &mut p.w_cf, &mut p.w_co] {
            *m = Matrix::uniform(hidden, hidden, rng);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_xi.cols
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_xi.rows
    }
}

/// Fully connected layer `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense { w: Matrix::zeros(output, input), b: vec![0.0; output] }
    }

    fn init<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Dense { w: Matrix::uniform(output, input, rng), b: vec![0.0; output] }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.b.clone();
        self.w.mul_acc(x, &mut y);
        y
    }
}

/// All trainable parameters: the LSTM stack and the three dense layers of
/// the classifier. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub lstm: Vec<LstmParams>,
    pub dense1: Dense,
    pub dense2: Dense,
    pub out: Dense,
}

/// Shape of a parameter set, as stored in model files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub class_dim: usize,
    pub dense_dim: usize,
    pub layers: usize,
}

impl From<&NetConfig> for Shape {
    fn from(c: &NetConfig) -> Self {
        Shape {
            input_dim: c.input_dim,
            hidden_dim: c.hidden_dim,
            class_dim: c.class_dim,
            dense_dim: c.dense_dim,
            layers: c.layers,
        }
    }
}

impl NetParams {
    pub fn zeros(shape: Shape) -> Self {
        let Shape { input_dim, hidden_dim, class_dim, dense_dim, layers } = shape;
        NetParams {
            lstm: (0..layers)
                .map(|l| LstmParams::zeros(if l == 0 { input_dim } else { hidden_dim }, hidden_dim))
                .collect(),
            dense1: Dense::zeros(hidden_dim, dense_dim),
            dense2: Dense::zeros(dense_dim, dense_dim),
            out: Dense::zeros(dense_dim, class_dim),
        }
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, zero biases.
    pub fn init<R: Rng + ?Sized>(shape: Shape, rng: &mut R) -> Self {
        let Shape { input_dim, hidden_dim, class_dim, dense_dim, layers } = shape;
        NetParams {
            lstm: (0..layers)
                .map(|l| LstmParams::init(if l == 0 { input_dim } else { hidden_dim }, hidden_dim, rng))
                .collect(),
            dense1: Dense::init(hidden_dim, dense_dim, rng),
            dense2: Dense::init(dense_dim, dense_dim, rng),
            out: Dense::init(dense_dim, class_dim, rng),
        }
    }

    pub fn shape(&self) -> Shape {
        Shape {
            input_dim: self.lstm[0].input_dim(),
            hidden_dim: self.lstm[0].hidden_dim(),
            class_dim: self.out.b.len(),
            dense_dim: self.dense1.b.len(),
            layers: self.lstm.len(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.lstm[0].input_dim()
    }

    pub fn class_dim(&self) -> usize {
        self.out.b.len()
    }

    /// Parameter blocks in the fixed serialization order: per LSTM layer
    /// `w_xi w_xf w_xc w_xo w_hi w_hf w_hc w_ho w_ci w_cf w_co b_i b_f b_c b_o`,
    /// then `dense1.w dense1.b dense2.w dense2.b out.w out.b`.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut v: Vec<(String, &[f64])> = Vec::new();
        for (l, p) in self.lstm.iter().enumerate() {
            let named: [(&str, &[f64]); 15] = [
                ("w_xi", &p.w_xi.data),
                ("w_xf", &p.w_xf.data),
                ("w_xc", &p.w_xc.data),
                ("w_xo", &p.w_xo.data),
                ("w_hi", &p.w_hi.data),
                ("w_hf", &p.w_hf.data),
                ("w_hc", &p.w_hc.data),
                ("w_ho", &p.w_ho.data),
                ("w_ci", &p.w_ci.data),
                ("w_cf", &p.w_cf.data),
                ("w_co", &p.w_co.data),
                ("b_i", &p.b_i),
                ("b_f", &p.b_f),
                ("b_c", &p.b_c),
                ("b_o", &p.b_o),
            ];
            v.extend(named.into_iter().map(|(n, d)| (format!("lstm{l}.{n}"), d)));
        }
        for (name, d) in [("dense1", &self.dense1), ("dense2", &self.dense2), ("out", &self.out)] {
            v.push((format!("{name}.w"), &d.w.data));
            v.push((format!("{name}.b"), &d.b));
        }
        v
    }

    /// Mutable blocks in the same order as [`NetParams::blocks`].
    pub fn blocks_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut v: Vec<&mut Vec<f64>> = Vec::new();
        for p in &mut self.lstm {
            v.extend([
                &mut p.w_xi.data,
                &mut p.w_xf.data,
                &mut p.w_xc.data,
                &mut p.w_xo.data,
                &mut p.w_hi.data,
                &mut p.w_hf.data,
                &mut p.w_hc.data,
                &mut p.w_ho.data,
                &mut p.w_ci.data,
                &mut p.w_cf.data,
                &mut p.w_co.data,
                &mut p.b_i,
                &mut p.b_f,
                &mut p.b_c,
                &mut p.b_o,
            ]);
        }
        for d in [&mut self.dense1, &mut self.dense2, &mut self.out] {
            v.push(&mut d.w.data);
            v.push(&mut d.b);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|v| v.is_finite()))
    }

    /// `self += other`, blockwise.
    pub fn add_assign(&mut self, other: &NetParams) {
        for (dst, (_, src)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }
}

/// Plain gradient step `w <- w - lr * grad`.
///
/// The gradient is checked before anything is written, so on error the
/// parameters are untouched.
pub fn sgd_step(params: &mut NetParams, grad: &NetParams, lr: f64) -> Result<(), NetError> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(NetError::Config(format!("learning rate {lr}")));
    }
    if params.shape() != grad.shape() {
        return Err(NetError::Shape(format!("gradient shape {:?} vs params {:?}", grad.shape(), params.shape())));
    }
    if let Some((name, _)) = grad.blocks().into_iter().find(|(_, b)| b.iter().any(|v| !v.is_finite())) {
        return Err(NetError::NonFinite(name));
    }
    for (w, (_, g)) in params.blocks_mut().into_iter().zip(grad.blocks()) {
        for (wi, gi) in w.iter_mut().zip(g) {
            *wi -= lr * gi;
        }
    }
    Ok(())
}
