// SPDX-License-Identifier: Apache-2.0

use rand::Rng;

use super::{Activation, Tensor};
use crate::error::{Error, Result};

/// Fully connected layer `y = act(W x + b)`, `W: [out × in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams {
    pub w: Tensor,
    pub b: Tensor,
}

impl DenseParams {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        DenseParams {
            w: Tensor::zeros(&[out_dim, in_dim]),
            b: Tensor::zeros(&[out_dim]),
        }
    }

    /// Weights `uniform(±1/√in)`, zero bias.
    pub fn init(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        DenseParams {
            w: Tensor::uniform(&[out_dim, in_dim], 1.0 / (in_dim as f64).sqrt(), rng),
            b: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.out_dim(), self.in_dim())
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.w, &self.b]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w, &mut self.b]
    }
}

#[derive(Clone, Debug)]
pub struct DenseCache {
    x: Vec<f64>,
    y: Vec<f64>,
    act: Activation,
}

pub fn dense_forward(x: &[f64], p: &DenseParams, act: Activation) -> Result<(Vec<f64>, DenseCache)> {
    if x.len() != p.in_dim() {
        return Err(Error::DimMismatch {
            expected: p.in_dim(),
            got: x.len(),
        });
    }
    let mut y = p.b.data().to_vec();
    p.w.matvec_acc(x, &mut y);
    for v in &mut y {
        *v = act.apply(*v);
    }
    let cache = DenseCache {
        x: x.to_vec(),
        y: y.clone(),
        act,
    };
    Ok((y, cache))
}

/// Accumulates parameter gradients into `grads` and returns `dL/dx`.
pub fn dense_backward(grad_y: &[f64], cache: &DenseCache, p: &DenseParams, grads: &mut DenseParams) -> Vec<f64> {
    let pre: Vec<f64> = grad_y
        .iter()
        .zip(&cache.y)
        .map(|(g, y)| g * cache.act.derivative_from_output(*y))
        .collect();
    grads.w.add_outer(&pre, &cache.x);
    grads.b.add_slice(&pre);
    let mut grad_x = vec![0.0; cache.x.len()];
    p.w.matvec_t_acc(&pre, &mut grad_x);
    grad_x
}
