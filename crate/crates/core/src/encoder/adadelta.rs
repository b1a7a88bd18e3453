//! AdaDelta over every parameter array.

use ndarray::{Array1, Array2, Zip};

use super::params::{Gradients, ModelParams, NetParams};
use super::Real;

/// Running averages of squared gradients and squared updates.
#[derive(Debug, Clone)]
pub struct AdaDelta<F> {
    rho: F,
    epsilon: F,
    grad_sq: ModelParams<F>,
    step_sq: ModelParams<F>,
}

fn update<F: Real>(rho: F, eps: F, x: &mut F, g: F, eg: &mut F, ex: &mut F) {
    let one = F::one();
    *eg = rho * *eg + (one - rho) * g * g;
    let dx = -((*ex + eps).sqrt() / (*eg + eps).sqrt()) * g;
    *ex = rho * *ex + (one - rho) * dx * dx;
    *x += dx;
}

impl<F: Real> AdaDelta<F> {
    pub fn new(params: &ModelParams<F>, rho: f64, epsilon: f64) -> Self {
        let zero = ModelParams {
            embeddings: params.embeddings.iter().map(|e| Array2::zeros(e.dim())).collect(),
            net: NetParams::zeros_like(&params.net),
        };
        AdaDelta {
            rho: F::from_f64(rho).unwrap(),
            epsilon: F::from_f64(epsilon).unwrap(),
            grad_sq: zero.clone(),
            step_sq: zero,
        }
    }

    /// One update. Embedding rows absent from the sparse gradient still
    /// decay their averages and take a zero step.
    pub fn step(&mut self, params: &mut ModelParams<F>, grads: &Gradients<F>) {
        let (rho, eps) = (self.rho, self.epsilon);
        for (c, table) in params.embeddings.iter_mut().enumerate() {
            let zero = Array1::zeros(table.ncols());
            for r in 0..table.nrows() {
                let g = grads.embeddings[c].get(&r).unwrap_or(&zero);
                Zip::from(table.row_mut(r))
                    .and(g)
                    .and(self.grad_sq.embeddings[c].row_mut(r))
                    .and(self.step_sq.embeddings[c].row_mut(r))
                    .for_each(|x, &g, eg, ex| update(rho, eps, x, g, eg, ex));
            }
        }
        let xs = params.net.arrays_mut();
        let gs = grads.net.arrays();
        let egs = self.grad_sq.net.arrays_mut();
        let exs = self.step_sq.net.arrays_mut();
        for (((x, g), eg), ex) in xs.into_iter().zip(gs).zip(egs).zip(exs) {
            Zip::from(x).and(&g).and(eg).and(ex).for_each(|x, &g, eg, ex| update(rho, eps, x, g, eg, ex));
        }
    }
}
