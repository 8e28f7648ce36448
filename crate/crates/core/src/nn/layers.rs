use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Tanh => tape.tanh(x),
            Activation::Relu => tape.relu(x),
            Activation::Identity => x,
        }
    }
}

/// `x W + b` with `x` holding one sample per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, gain: f64, rng: &mut impl Rng) -> Self {
        let weight = store.add_scaled_normal(format!("{name}.weight"), in_dim, out_dim, gain, rng);
        let bias = store.add(format!("{name}.bias"), Matrix::zeros(1, out_dim));
        Self { weight, bias, in_dim, out_dim }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let xw = tape.matmul(x, w);
        tape.add_row(xw, b)
    }
}

/// Stack of linear layers with a shared hidden activation and a linear
/// output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

impl Mlp {
    /// `num_layers` linear maps: `in -> hidden -> ... -> hidden -> out`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        hidden: usize,
        out_dim: usize,
        num_layers: usize,
        output_gain: f64,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(num_layers >= 1);
        let mut layers = Vec::with_capacity(num_layers);
        let mut width = in_dim;
        for i in 0..num_layers {
            let last = i + 1 == num_layers;
            let out = if last { out_dim } else { hidden };
            let gain = if last { output_gain } else { std::f64::consts::SQRT_2 };
            layers.push(Linear::new(store, &format!("{name}.{i}"), width, out, gain, rng));
            width = out;
        }
        Self {
            layers,
            activation: Activation::Tanh,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, store, h);
            if i + 1 < self.layers.len() {
                h = self.activation.apply(tape, h);
            }
        }
        h
    }
}

/// Graph convolution `relu(A H W + b)` over a fixed weighted adjacency `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcnLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl GcnLayer {
    pub fn new(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let weight = store.add_scaled_normal(format!("{name}.weight"), in_dim, out_dim, std::f64::consts::SQRT_2, rng);
        let bias = store.add(format!("{name}.bias"), Matrix::zeros(1, out_dim));
        Self { weight, bias, in_dim, out_dim }
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, adjacency: Var, h: Var) -> Var {
        let w = tape.param(store, self.weight);
        let b = tape.param(store, self.bias);
        let hw = tape.matmul(h, w);
        let mixed = tape.matmul(adjacency, hw);
        let biased = tape.add_row(mixed, b);
        tape.relu(biased)
    }
}

/// Plain evaluation of one graph convolution, `relu(A H W + b)`.
pub fn gcn_forward(adjacency: &Matrix, features: &Matrix, weight: &Matrix, bias: &[f64]) -> Matrix {
    let mut out = adjacency.matmul(&features.matmul(weight));
    for r in 0..out.rows {
        for (x, &b) in out.data[r * out.cols..(r + 1) * out.cols].iter_mut().zip(bias) {
            *x = (*x + b).max(0.0);
        }
    }
    out
}

/// GCN stack over constant unit node features followed by mean pooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEncoder {
    pub layers: Vec<GcnLayer>,
}

impl GraphEncoder {
    pub fn new(store: &mut ParamStore, name: &str, num_layers: usize, embed_dim: usize, rng: &mut impl Rng) -> Self {
        let layers = (0..num_layers)
            .map(|i| {
                let in_dim = if i == 0 { 1 } else { embed_dim };
                GcnLayer::new(store, &format!("{name}.{i}"), in_dim, embed_dim, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn embed_dim(&self) -> usize {
        self.layers.last().map_or(1, |l| l.out_dim)
    }

    /// Node embeddings, `n x embed_dim`.
    pub fn node_embeddings(&self, tape: &mut Tape, store: &ParamStore, adjacency: Var) -> Var {
        let n = tape.value(adjacency).rows;
        let mut h = tape.constant(Matrix::filled(n, 1, 1.0));
        for layer in &self.layers {
            h = layer.forward(tape, store, adjacency, h);
        }
        h
    }

    /// Mean-pooled graph embedding, `1 x embed_dim`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, adjacency: Var) -> Var {
        let h = self.node_embeddings(tape, store, adjacency);
        tape.mean_rows(h)
    }
}
