// SPDX-License-Identifier: Apache-2.0

use rand::Rng;

use super::{sigmoid, Tensor};
use crate::error::{Error, Result};

/// LSTM weights. Gate rows are stacked as input, forget, output, candidate:
/// `w_x: [4H × I]`, `w_h: [4H × H]`, `b: [4H]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub b: Tensor,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w_x: Tensor::zeros(&[4 * hidden, input]),
            w_h: Tensor::zeros(&[4 * hidden, hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// `uniform(±1/√fan_in)` weights, zero biases except forget gate = 1.
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.data_mut()[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
        LstmParams {
            w_x: Tensor::uniform(&[4 * hidden, input], 1.0 / (input as f64).sqrt(), rng),
            w_h: Tensor::uniform(&[4 * hidden, hidden], 1.0 / (hidden as f64).sqrt(), rng),
            b,
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_x.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_h.cols()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_size(), self.hidden_size())
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.w_x, &self.w_h, &self.b]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.b]
    }
}

#[derive(Clone, Debug)]
struct Step {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gates `[i, f, o, g]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LstmCache {
    steps: Vec<Step>,
}

/// Runs the recurrence from zero state. Returns every hidden state; the
/// last one is the final hidden.
pub fn lstm_forward<X: AsRef<[f64]>>(seq: &[X], p: &LstmParams) -> Result<(Vec<Vec<f64>>, LstmCache)> {
    if seq.is_empty() {
        return Err(Error::InvalidArgument("LSTM input sequence is empty".into()));
    }
    let hsz = p.hidden_size();
    let mut h = vec![0.0; hsz];
    let mut c = vec![0.0; hsz];
    let mut hs = Vec::with_capacity(seq.len());
    let mut steps = Vec::with_capacity(seq.len());
    for x in seq {
        let x = x.as_ref();
        if x.len() != p.input_size() {
            return Err(Error::DimMismatch {
                expected: p.input_size(),
                got: x.len(),
            });
        }
        let mut a = p.b.data().to_vec();
        p.w_x.matvec_acc(x, &mut a);
        p.w_h.matvec_acc(&h, &mut a);
        for (j, v) in a.iter_mut().enumerate() {
            *v = if j < 3 * hsz { sigmoid(*v) } else { v.tanh() };
        }
        let mut c_new = vec![0.0; hsz];
        let mut tanh_c = vec![0.0; hsz];
        let mut h_new = vec![0.0; hsz];
        for j in 0..hsz {
            let (i, f, o, g) = (a[j], a[hsz + j], a[2 * hsz + j], a[3 * hsz + j]);
            c_new[j] = f * c[j] + i * g;
            tanh_c[j] = c_new[j].tanh();
            h_new[j] = o * tanh_c[j];
        }
        steps.push(Step {
            x: x.to_vec(),
            h_prev: h,
            c_prev: c,
            gates: a,
            tanh_c,
        });
        hs.push(h_new.clone());
        h = h_new;
        c = c_new;
    }
    Ok((hs, LstmCache { steps }))
}

/// Backpropagation through time. `grad_hs[t]` is `dL/dh_t` from outside the
/// recurrence. Accumulates parameter gradients and returns `dL/dx_t`.
pub fn lstm_backward(grad_hs: &[Vec<f64>], cache: &LstmCache, p: &LstmParams, grads: &mut LstmParams) -> Vec<Vec<f64>> {
    let hsz = p.hidden_size();
    let n = cache.steps.len();
    let mut dh_next = vec![0.0; hsz];
    let mut dc_next = vec![0.0; hsz];
    let mut dxs = vec![Vec::new(); n];
    let mut da = vec![0.0; 4 * hsz];
    for t in (0..n).rev() {
        let st = &cache.steps[t];
        let g = &st.gates;
        for j in 0..hsz {
            let (i, f, o, cand) = (g[j], g[hsz + j], g[2 * hsz + j], g[3 * hsz + j]);
            let dh = grad_hs[t][j] + dh_next[j];
            let d_o = dh * st.tanh_c[j];
            let dc = dh * o * (1.0 - st.tanh_c[j] * st.tanh_c[j]) + dc_next[j];
            let di = dc * cand;
            let dg = dc * i;
            let df = dc * st.c_prev[j];
            dc_next[j] = dc * f;
            da[j] = di * i * (1.0 - i);
            da[hsz + j] = df * f * (1.0 - f);
            da[2 * hsz + j] = d_o * o * (1.0 - o);
            da[3 * hsz + j] = dg * (1.0 - cand * cand);
        }
        grads.w_x.add_outer(&da, &st.x);
        grads.w_h.add_outer(&da, &st.h_prev);
        grads.b.add_slice(&da);
        let mut dx = vec![0.0; st.x.len()];
        p.w_x.matvec_t_acc(&da, &mut dx);
        dxs[t] = dx;
        dh_next.iter_mut().for_each(|v| *v = 0.0);
        p.w_h.matvec_t_acc(&da, &mut dh_next);
    }
    dxs
}
