use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub value: Matrix,
    #[serde(skip)]
    pub grad: Option<Matrix>,
}

impl ParamBlock {
    pub fn grad(&self) -> Matrix {
        self.grad
            .clone()
            .unwrap_or_else(|| Matrix::zeros(self.value.rows, self.value.cols))
    }
}

/// Named parameter blocks with matching gradient accumulators.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    blocks: Vec<ParamBlock>,
    #[serde(skip)]
    index: HashMap<String, ParamId>,
    pub step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        let id = ParamId(self.blocks.len());
        self.index.insert(name.clone(), id);
        self.blocks.push(ParamBlock { name, value, grad: None });
        id
    }

    /// Scaled Gaussian init with Frobenius norm `gain * sqrt(min(rows, cols))`,
    /// the same scale an orthogonal init of that shape would have.
    pub fn add_scaled_normal(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        gain: f64,
        rng: &mut impl Rng,
    ) -> ParamId {
        let raw: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        let target = gain * (rows.min(cols) as f64).sqrt();
        let data = raw.iter().map(|x| x * target / norm).collect();
        self.add(name, Matrix::from_vec(rows, cols, data))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.blocks.iter().map(|b| b.value.len()).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.blocks.len()).map(ParamId)
    }

    pub fn block(&self, id: ParamId) -> &ParamBlock {
        &self.blocks[id.0]
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.blocks[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.blocks[id.0].value
    }

    pub fn accumulate_grad(&mut self, id: ParamId, grad: &Matrix) {
        let block = &mut self.blocks[id.0];
        match &mut block.grad {
            Some(g) => g.add_assign(grad),
            None => block.grad = Some(grad.clone()),
        }
    }

    pub fn zero_grad(&mut self) {
        for b in &mut self.blocks {
            b.grad = None;
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.blocks
            .iter()
            .filter_map(|b| b.grad.as_ref())
            .flat_map(|g| g.data.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Scales all gradients so their global norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm {
            let scale = max_norm / norm;
            for g in self.blocks.iter_mut().filter_map(|b| b.grad.as_mut()) {
                g.data.iter_mut().for_each(|x| *x *= scale);
            }
        }
        norm
    }

    pub fn check_finite(&self) -> Result<()> {
        for b in &self.blocks {
            if !b.value.is_finite() {
                return Err(Error::NonFinite(format!("parameter {}", b.name)));
            }
            if b.grad.as_ref().is_some_and(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {}", b.name)));
            }
        }
        Ok(())
    }

    /// Flattened parameter values in block order.
    pub fn flat_values(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.value.data.iter().copied()).collect()
    }
}
