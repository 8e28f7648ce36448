use crate::nn::{Matrix, ParamStore};

/// Adam with bias correction over every block of a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    t: u64,
}

impl Adam {
    pub fn new(store: &ParamStore, learning_rate: f64) -> Self {
        let zeros: Vec<Matrix> = store
            .blocks()
            .iter()
            .map(|b| Matrix::zeros(b.value.rows, b.value.cols))
            .collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: zeros.clone(),
            second: zeros,
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Applies one update from the accumulated gradients. Blocks without a
    /// gradient are treated as having a zero gradient.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let ids: Vec<_> = store.ids().collect();
        for (i, id) in ids.into_iter().enumerate() {
            let grad = store.block(id).grad();
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            let value = store.value_mut(id);
            for j in 0..grad.data.len() {
                let g = grad.data[j];
                m.data[j] = self.beta1 * m.data[j] + (1.0 - self.beta1) * g;
                v.data[j] = self.beta2 * v.data[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m.data[j] / c1;
                let v_hat = v.data[j] / c2;
                value.data[j] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        store.step += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::row_vector(vec![1.0, -1.0, 0.0]));
        store.accumulate_grad(w, &Matrix::row_vector(vec![0.3, -2.0, 0.0]));
        let mut adam = Adam::new(&store, 0.1);
        adam.step(&mut store);
        let v = &store.value(w).data;
        assert!((v[0] - 0.9).abs() < 1e-6);
        assert!((v[1] + 0.9).abs() < 1e-6);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::row_vector(vec![3.0, -4.0]));
        let mut adam = Adam::new(&store, 0.05);
        for _ in 0..2000 {
            store.zero_grad();
            let g = store.value(w).map(|x| 2.0 * (x - 0.5));
            store.accumulate_grad(w, &g);
            adam.step(&mut store);
        }
        assert!(store.value(w).data.iter().all(|x| (x - 0.5).abs() < 1e-3));
    }
}
