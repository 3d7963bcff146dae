//! Forward and backward passes over flat parameter vectors.

use serde::{Deserialize, Serialize};

/// Layer sizes of the sequence network: a stack of LSTM layers over the
/// history, a tanh encoder over the present record, and a logistic head over
/// both final states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqShape {
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    pub present: usize,
    pub dense: usize,
    pub dense_layers: usize,
}

/// One training or inference example. `history` is row-major, `input`
/// values per time step; the logistic model reads only `present`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub history: Vec<f64>,
    pub present: Vec<f64>,
    pub target: f64,
    pub weight: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Weighted cross-entropy from a logit, and its derivative.
fn bce(logit: f64, target: f64, weight: f64) -> (f64, f64) {
    let loss = softplus(logit) - target * logit;
    (weight * loss, weight * (sigmoid(logit) - target))
}

pub fn probability(logit: f64) -> f64 {
    sigmoid(logit)
}

impl SeqShape {
    fn lstm_in(&self, l: usize) -> usize {
        if l == 0 {
            self.input
        } else {
            self.hidden
        }
    }

    fn dense_in(&self, d: usize) -> usize {
        if d == 0 {
            self.present
        } else {
            self.dense
        }
    }

    fn lstm_size(&self, l: usize) -> usize {
        let rows = 4 * self.hidden;
        rows * (self.lstm_in(l) + self.hidden) + rows
    }

    fn dense_size(&self, d: usize) -> usize {
        self.dense * self.dense_in(d) + self.dense
    }

    fn head_width(&self) -> usize {
        self.hidden + if self.dense_layers > 0 { self.dense } else { self.present }
    }

    pub fn param_count(&self) -> usize {
        (0..self.layers).map(|l| self.lstm_size(l)).sum::<usize>()
            + (0..self.dense_layers).map(|d| self.dense_size(d)).sum::<usize>()
            + self.head_width()
            + 1
    }

    fn lstm_offset(&self, l: usize) -> usize {
        (0..l).map(|k| self.lstm_size(k)).sum()
    }

    fn dense_offset(&self, d: usize) -> usize {
        self.lstm_offset(self.layers) + (0..d).map(|k| self.dense_size(k)).sum::<usize>()
    }

    fn head_offset(&self) -> usize {
        self.dense_offset(self.dense_layers)
    }

    /// Xavier-uniform weights, zero biases, forget-gate bias of one.
    pub fn init<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.param_count()];
        let mut fill = |p: &mut [f64], fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in p {
                *w = rng.random_range(-a..a);
            }
        };
        for l in 0..self.layers {
            let o = self.lstm_offset(l);
            let cols = self.lstm_in(l) + self.hidden;
            let rows = 4 * self.hidden;
            fill(&mut p[o..o + rows * cols], cols, self.hidden);
            let b = o + rows * cols;
            for v in &mut p[b + self.hidden..b + 2 * self.hidden] {
                *v = 1.0;
            }
        }
        for d in 0..self.dense_layers {
            let o = self.dense_offset(d);
            let cols = self.dense_in(d);
            fill(&mut p[o..o + self.dense * cols], cols, self.dense);
        }
        let o = self.head_offset();
        fill(&mut p[o..o + self.head_width()], self.head_width(), 1);
        p
    }
}

/// Activations of one LSTM layer over a sequence.
struct LstmCache {
    /// Layer input, `steps × in`.
    x: Vec<f64>,
    /// Hidden and cell states, `(steps + 1) × hidden`; row 0 is zero.
    h: Vec<f64>,
    c: Vec<f64>,
    /// Post-activation gates `i, f, g, o`, `steps × 4·hidden`.
    gates: Vec<f64>,
}

fn lstm_forward(params: &[f64], input: Vec<f64>, n_in: usize, hidden: usize) -> LstmCache {
    let steps = input.len() / n_in;
    let cols = n_in + hidden;
    let rows = 4 * hidden;
    let (w, b) = params.split_at(rows * cols);
    let mut h = vec![0.0; (steps + 1) * hidden];
    let mut c = vec![0.0; (steps + 1) * hidden];
    let mut gates = vec![0.0; steps * rows];
    let mut z = vec![0.0; rows];
    for t in 0..steps {
        let x = &input[t * n_in..(t + 1) * n_in];
        let hp = &h[t * hidden..(t + 1) * hidden];
        for (r, zr) in z.iter_mut().enumerate() {
            let row = &w[r * cols..(r + 1) * cols];
            let mut s = b[r];
            for (wi, xi) in row[..n_in].iter().zip(x) {
                s += wi * xi;
            }
            for (wi, hi) in row[n_in..].iter().zip(hp) {
                s += wi * hi;
            }
            *zr = s;
        }
        let g = &mut gates[t * rows..(t + 1) * rows];
        for k in 0..hidden {
            let ig = sigmoid(z[k]);
            let fg = sigmoid(z[hidden + k]);
            let gg = z[2 * hidden + k].tanh();
            let og = sigmoid(z[3 * hidden + k]);
            g[k] = ig;
            g[hidden + k] = fg;
            g[2 * hidden + k] = gg;
            g[3 * hidden + k] = og;
            let cn = fg * c[t * hidden + k] + ig * gg;
            c[(t + 1) * hidden + k] = cn;
            h[(t + 1) * hidden + k] = og * cn.tanh();
        }
    }
    LstmCache { x: input, h, c, gates }
}

/// Backpropagates `dh` (gradient w.r.t. every hidden output) through one
/// layer, accumulating into `grad` and returning the gradient w.r.t. the
/// layer input.
fn lstm_backward(
    params: &[f64],
    grad: &mut [f64],
    cache: &LstmCache,
    dh_out: &[f64],
    n_in: usize,
    hidden: usize,
) -> Vec<f64> {
    let steps = cache.x.len() / n_in;
    let cols = n_in + hidden;
    let rows = 4 * hidden;
    let w = &params[..rows * cols];
    let (gw, gb) = grad.split_at_mut(rows * cols);
    let mut dx = vec![0.0; steps * n_in];
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    let mut dz = vec![0.0; rows];
    for t in (0..steps).rev() {
        let g = &cache.gates[t * rows..(t + 1) * rows];
        let c_prev = &cache.c[t * hidden..(t + 1) * hidden];
        let c_cur = &cache.c[(t + 1) * hidden..(t + 2) * hidden];
        for k in 0..hidden {
            let dh = dh_out[t * hidden + k] + dh_next[k];
            let (ig, fg, gg, og) = (g[k], g[hidden + k], g[2 * hidden + k], g[3 * hidden + k]);
            let tc = c_cur[k].tanh();
            let dc = dc_next[k] + dh * og * (1.0 - tc * tc);
            dz[k] = dc * gg * ig * (1.0 - ig);
            dz[hidden + k] = dc * c_prev[k] * fg * (1.0 - fg);
            dz[2 * hidden + k] = dc * ig * (1.0 - gg * gg);
            dz[3 * hidden + k] = dh * tc * og * (1.0 - og);
            dc_next[k] = dc * fg;
        }
        let x = &cache.x[t * n_in..(t + 1) * n_in];
        let hp = &cache.h[t * hidden..(t + 1) * hidden];
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        let dxt = &mut dx[t * n_in..(t + 1) * n_in];
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[r] += d;
            let row = &w[r * cols..(r + 1) * cols];
            let grow = &mut gw[r * cols..(r + 1) * cols];
            for i in 0..n_in {
                grow[i] += d * x[i];
                dxt[i] += d * row[i];
            }
            for k in 0..hidden {
                grow[n_in + k] += d * hp[k];
                dh_next[k] += d * row[n_in + k];
            }
        }
    }
    dx
}

fn dense_forward(params: &[f64], x: &[f64], n_out: usize) -> Vec<f64> {
    let n_in = x.len();
    let (w, b) = params.split_at(n_out * n_in);
    (0..n_out)
        .map(|r| {
            let s: f64 = w[r * n_in..(r + 1) * n_in].iter().zip(x).map(|(a, b)| a * b).sum();
            (s + b[r]).tanh()
        })
        .collect()
}

fn dense_backward(params: &[f64], grad: &mut [f64], x: &[f64], y: &[f64], dy: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    let n_out = y.len();
    let w = &params[..n_out * n_in];
    let (gw, gb) = grad.split_at_mut(n_out * n_in);
    let mut dx = vec![0.0; n_in];
    for r in 0..n_out {
        let dz = dy[r] * (1.0 - y[r] * y[r]);
        gb[r] += dz;
        for i in 0..n_in {
            gw[r * n_in + i] += dz * x[i];
            dx[i] += dz * w[r * n_in + i];
        }
    }
    dx
}

struct SeqPass {
    lstm: Vec<LstmCache>,
    /// Encoder activations; entry 0 is the present input.
    dense: Vec<Vec<f64>>,
    logit: f64,
}

fn seq_pass(shape: &SeqShape, params: &[f64], ex: &Example) -> SeqPass {
    let mut lstm = Vec::with_capacity(shape.layers);
    let mut input = ex.history.clone();
    for l in 0..shape.layers {
        let o = shape.lstm_offset(l);
        let cache = lstm_forward(&params[o..o + shape.lstm_size(l)], input, shape.lstm_in(l), shape.hidden);
        input = cache.h[shape.hidden..].to_vec();
        lstm.push(cache);
    }
    let mut dense = vec![ex.present.clone()];
    for d in 0..shape.dense_layers {
        let o = shape.dense_offset(d);
        let y = dense_forward(&params[o..o + shape.dense_size(d)], dense.last().unwrap(), shape.dense);
        dense.push(y);
    }
    let ho = shape.head_offset();
    let top = &lstm.last().expect("at least one LSTM layer").h;
    let last_h = &top[top.len() - shape.hidden..];
    let enc = dense.last().unwrap();
    let w = &params[ho..ho + shape.head_width()];
    let logit = params[ho + shape.head_width()]
        + w.iter().zip(last_h.iter().chain(enc.iter())).map(|(a, b)| a * b).sum::<f64>();
    SeqPass { lstm, dense, logit }
}

pub fn seq_logit(shape: &SeqShape, params: &[f64], ex: &Example) -> f64 {
    seq_pass(shape, params, ex).logit
}

/// Mean weighted cross-entropy over `batch` and its gradient.
pub fn seq_loss_and_grad(shape: &SeqShape, params: &[f64], batch: &[Example]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let scale = 1.0 / batch.len().max(1) as f64;
    let ho = shape.head_offset();
    let hw = shape.head_width();
    for ex in batch {
        let pass = seq_pass(shape, params, ex);
        let (l, dlogit) = bce(pass.logit, ex.target, ex.weight);
        loss += l * scale;
        let dlogit = dlogit * scale;
        let top = &pass.lstm.last().unwrap().h;
        let last_h = &top[top.len() - shape.hidden..];
        let enc = pass.dense.last().unwrap();
        for (gi, v) in grad[ho..ho + hw].iter_mut().zip(last_h.iter().chain(enc.iter())) {
            *gi += dlogit * v;
        }
        grad[ho + hw] += dlogit;
        let w = &params[ho..ho + hw];

        let mut dy: Vec<f64> = w[shape.hidden..].iter().map(|v| v * dlogit).collect();
        for d in (0..shape.dense_layers).rev() {
            let o = shape.dense_offset(d);
            let n = shape.dense_size(d);
            dy = dense_backward(&params[o..o + n], &mut grad[o..o + n], &pass.dense[d], &pass.dense[d + 1], &dy);
        }

        let steps = ex.history.len() / shape.input;
        let mut dh = vec![0.0; steps * shape.hidden];
        for (k, v) in dh[(steps - 1) * shape.hidden..].iter_mut().enumerate() {
            *v = w[k] * dlogit;
        }
        for l in (0..shape.layers).rev() {
            let o = shape.lstm_offset(l);
            let n = shape.lstm_size(l);
            dh = lstm_backward(
                &params[o..o + n],
                &mut grad[o..o + n],
                &pass.lstm[l],
                &dh,
                shape.lstm_in(l),
                shape.hidden,
            );
        }
    }
    (loss, grad)
}

pub fn logistic_logit(params: &[f64], x: &[f64]) -> f64 {
    let n = x.len();
    params[n] + params[..n].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
}

/// Mean weighted cross-entropy of a logistic model (weights then bias) over
/// the `present` vectors of `batch`.
pub fn logistic_loss_and_grad(params: &[f64], batch: &[Example]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let scale = 1.0 / batch.len().max(1) as f64;
    let n = params.len() - 1;
    for ex in batch {
        let (l, d) = bce(logistic_logit(params, &ex.present), ex.target, ex.weight);
        loss += l * scale;
        for (g, x) in grad[..n].iter_mut().zip(&ex.present) {
            *g += d * scale * x;
        }
        grad[n] += d * scale;
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_sigmoid_and_softplus() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        let (l, d) = bce(0.0, 1.0, 1.0);
        assert!((l - 2f64.ln()).abs() < 1e-15);
        assert_eq!(d, -0.5);
    }

    #[test]
    fn param_count_matches_layout() {
        let s = SeqShape { input: 6, hidden: 4, layers: 2, present: 7, dense: 3, dense_layers: 3 };
        // lstm: 16*(6+4)+16, 16*(4+4)+16; dense: 3*7+3, 3*3+3, 3*3+3; head 4+3+1
        assert_eq!(s.param_count(), 176 + 144 + 24 + 12 + 12 + 8);
    }
}
