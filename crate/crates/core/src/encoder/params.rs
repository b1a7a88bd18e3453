//! Parameter blocks, hyperparameters and initialization.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub word_dim: usize,
    pub tag_dim: usize,
    pub extra_dim: usize,
    pub lstm_units: usize,
    pub hidden_units: usize,
    pub dropout: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            word_dim: 50,
            tag_dim: 20,
            extra_dim: 10,
            lstm_units: 200,
            hidden_units: 200,
            dropout: 0.5,
            rho: 0.99,
            epsilon: 1e-7,
        }
    }
}

impl Hyper {
    /// Embedding width of one column.
    pub fn column_dim(&self, column: usize) -> usize {
        match column {
            0 => self.word_dim,
            1 => self.tag_dim,
            _ => self.extra_dim,
        }
    }

    pub fn input_dim(&self, columns: usize) -> usize {
        (0..columns).map(|c| self.column_dim(c)).sum()
    }

    /// Width of one span feature: two layers, two directions.
    pub fn span_dim(&self) -> usize {
        4 * self.lstm_units
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("hyperparameters serialize")
    }
}

/// One direction of one recurrent layer. Gate rows are ordered input,
/// forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<F> {
    pub w: Array2<F>,
    pub u: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Real> LstmParams<F> {
    fn zeros(input: usize, units: usize) -> Self {
        LstmParams {
            w: Array2::zeros((4 * units, input)),
            u: Array2::zeros((4 * units, units)),
            b: Array1::zeros(4 * units),
        }
    }

    pub fn units(&self) -> usize {
        self.u.ncols()
    }
}

/// A rectified hidden layer followed by a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams<F> {
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
}

impl<F: Real> HeadParams<F> {
    fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        HeadParams {
            w1: Array2::zeros((hidden, input)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((output, hidden)),
            b2: Array1::zeros(output),
        }
    }
}

/// Everything except the embedding tables.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<F> {
    /// Layer 1 forward, layer 1 backward, layer 2 forward, layer 2 backward.
    pub lstm: [LstmParams<F>; 4],
    pub structural: HeadParams<F>,
    pub label: HeadParams<F>,
}

impl<F: Real> NetParams<F> {
    pub fn zeros_like(other: &NetParams<F>) -> Self {
        let mut z = other.clone();
        z.for_each_mut(|_, mut a| a.fill(F::zero()));
        z
    }

    fn for_each<'a>(&'a self, mut f: impl FnMut(String, ArrayViewD<'a, F>)) {
        for (k, l) in self.lstm.iter().enumerate() {
            let name = LSTM_NAMES[k];
            f(format!("{name}.w"), l.w.view().into_dyn());
            f(format!("{name}.u"), l.u.view().into_dyn());
            f(format!("{name}.b"), l.b.view().into_dyn());
        }
        for (name, h) in [("structural", &self.structural), ("label", &self.label)] {
            f(format!("{name}.w1"), h.w1.view().into_dyn());
            f(format!("{name}.b1"), h.b1.view().into_dyn());
            f(format!("{name}.w2"), h.w2.view().into_dyn());
            f(format!("{name}.b2"), h.b2.view().into_dyn());
        }
    }

    fn for_each_mut<'a>(&'a mut self, mut f: impl FnMut(String, ArrayViewMutD<'a, F>)) {
        for (k, l) in self.lstm.iter_mut().enumerate() {
            let name = LSTM_NAMES[k];
            f(format!("{name}.w"), l.w.view_mut().into_dyn());
            f(format!("{name}.u"), l.u.view_mut().into_dyn());
            f(format!("{name}.b"), l.b.view_mut().into_dyn());
        }
        for (name, h) in [("structural", &mut self.structural), ("label", &mut self.label)] {
            f(format!("{name}.w1"), h.w1.view_mut().into_dyn());
            f(format!("{name}.b1"), h.b1.view_mut().into_dyn());
            f(format!("{name}.w2"), h.w2.view_mut().into_dyn());
            f(format!("{name}.b2"), h.b2.view_mut().into_dyn());
        }
    }

    /// Arrays in bundle order.
    pub fn arrays(&self) -> Vec<ArrayViewD<'_, F>> {
        let mut out = Vec::new();
        self.for_each(|_, a| out.push(a));
        out
    }

    pub fn arrays_mut(&mut self) -> Vec<ArrayViewMutD<'_, F>> {
        let mut out = Vec::new();
        self.for_each_mut(|_, a| out.push(a));
        out
    }

    pub fn add_assign(&mut self, other: &NetParams<F>) {
        let mut theirs = Vec::new();
        other.for_each(|_, a| theirs.push(a));
        let mut k = 0;
        self.for_each_mut(|_, mut a| {
            a += &theirs[k];
            k += 1;
        });
    }
}

const LSTM_NAMES: [&str; 4] = ["lstm1.fwd", "lstm1.bwd", "lstm2.fwd", "lstm2.bwd"];

/// All trainable arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    /// One table per input column, `vocabulary size x width`.
    pub embeddings: Vec<Array2<F>>,
    pub net: NetParams<F>,
}

fn glorot<F: Real, R: Rng + ?Sized>(a: &mut Array2<F>, fan_in: usize, fan_out: usize, rng: &mut R) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    a.mapv_inplace(|_| F::from_f64(rng.random_range(-limit..=limit)).unwrap());
}

impl<F: Real> ModelParams<F> {
    pub fn zeros(hyper: &Hyper, column_sizes: &[usize], labels: usize) -> Self {
        let columns = column_sizes.len();
        let embeddings =
            column_sizes.iter().enumerate().map(|(c, &v)| Array2::zeros((v, hyper.column_dim(c)))).collect();
        let h = hyper.lstm_units;
        let x = hyper.input_dim(columns);
        let net = NetParams {
            lstm: [
                LstmParams::zeros(x, h),
                LstmParams::zeros(x, h),
                LstmParams::zeros(2 * h, h),
                LstmParams::zeros(2 * h, h),
            ],
            structural: HeadParams::zeros(4 * hyper.span_dim(), hyper.hidden_units, 2),
            label: HeadParams::zeros(3 * hyper.span_dim(), hyper.hidden_units, labels + 1),
        };
        ModelParams { embeddings, net }
    }

    /// Glorot-uniform weights, zero biases, forget-gate biases of one.
    /// Embedding rows are treated as weights fed by a one-hot input.
    pub fn init<R: Rng + ?Sized>(hyper: &Hyper, column_sizes: &[usize], labels: usize, rng: &mut R) -> Self {
        let mut p = ModelParams::zeros(hyper, column_sizes, labels);
        for table in &mut p.embeddings {
            let dim = table.ncols();
            glorot(table, 1, dim, rng);
        }
        for l in &mut p.net.lstm {
            let (rows, cols) = l.w.dim();
            glorot(&mut l.w, cols, rows, rng);
            let (rows, cols) = l.u.dim();
            glorot(&mut l.u, cols, rows, rng);
            let h = l.units();
            l.b.slice_mut(ndarray::s![h..2 * h]).fill(F::one());
        }
        for head in [&mut p.net.structural, &mut p.net.label] {
            let (rows, cols) = head.w1.dim();
            glorot(&mut head.w1, cols, rows, rng);
            let (rows, cols) = head.w2.dim();
            glorot(&mut head.w2, cols, rows, rng);
        }
        p
    }

    /// Every array with its stable name, in bundle order.
    pub fn named(&self) -> Vec<(String, ArrayViewD<'_, F>)> {
        let mut out: Vec<(String, ArrayViewD<'_, F>)> =
            self.embeddings.iter().enumerate().map(|(c, t)| (embedding_name(c), t.view().into_dyn())).collect();
        self.net.for_each(|n, a| out.push((n, a)));
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)> {
        let mut out: Vec<(String, ArrayViewMutD<'_, F>)> =
            self.embeddings.iter_mut().enumerate().map(|(c, t)| (embedding_name(c), t.view_mut().into_dyn())).collect();
        self.net.for_each_mut(|n, a| out.push((n, a)));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named().iter().map(|(_, a)| a.len()).sum()
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        let conv = |a: &Array2<F>| a.mapv(|x| G::from_f64(x.to_f64().unwrap()).unwrap());
        let conv1 = |a: &Array1<F>| a.mapv(|x| G::from_f64(x.to_f64().unwrap()).unwrap());
        let lstm = |l: &LstmParams<F>| LstmParams { w: conv(&l.w), u: conv(&l.u), b: conv1(&l.b) };
        let head =
            |h: &HeadParams<F>| HeadParams { w1: conv(&h.w1), b1: conv1(&h.b1), w2: conv(&h.w2), b2: conv1(&h.b2) };
        ModelParams {
            embeddings: self.embeddings.iter().map(conv).collect(),
            net: NetParams {
                lstm: [
                    lstm(&self.net.lstm[0]),
                    lstm(&self.net.lstm[1]),
                    lstm(&self.net.lstm[2]),
                    lstm(&self.net.lstm[3]),
                ],
                structural: head(&self.net.structural),
                label: head(&self.net.label),
            },
        }
    }
}

pub fn embedding_name(column: usize) -> String {
    match column {
        0 => "embed.word".to_string(),
        1 => "embed.tag".to_string(),
        k => format!("embed.extra{}", k - 2),
    }
}

/// Gradients: dense for the network, sparse rows for the embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    pub embeddings: Vec<BTreeMap<usize, Array1<F>>>,
    pub net: NetParams<F>,
}

impl<F: Real> Gradients<F> {
    pub fn zeros(params: &ModelParams<F>) -> Self {
        Gradients {
            embeddings: vec![BTreeMap::new(); params.embeddings.len()],
            net: NetParams::zeros_like(&params.net),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<F>) {
        for (mine, theirs) in self.embeddings.iter_mut().zip(&other.embeddings) {
            for (row, g) in theirs {
                match mine.get_mut(row) {
                    Some(m) => *m += g,
                    None => {
                        mine.insert(*row, g.clone());
                    }
                }
            }
        }
        self.net.add_assign(&other.net);
    }

    /// Dense copy of the embedding gradient of `column`.
    pub fn dense_embedding(&self, column: usize, shape: (usize, usize)) -> Array2<F> {
        let mut out = Array2::zeros(shape);
        for (&row, g) in &self.embeddings[column] {
            out.row_mut(row).assign(g);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_shapes_are_consistent() {
        let h = Hyper::default();
        let p: ModelParams<f32> = ModelParams::zeros(&h, &[100, 30], 7);
        assert_eq!(h.span_dim(), 800);
        assert_eq!(p.net.structural.w1.dim(), (200, 3200));
        assert_eq!(p.net.label.w1.dim(), (200, 2400));
        assert_eq!(p.net.label.w2.dim(), (8, 200));
        assert_eq!(p.net.structural.w2.dim(), (2, 200));
        assert_eq!(p.net.lstm[0].w.dim(), (800, 70));
        assert_eq!(p.net.lstm[2].w.dim(), (800, 400));
        assert_eq!(p.embeddings[0].dim(), (100, 50));
        let names: Vec<String> = p.named().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), 2 + 12 + 8);
        assert_eq!(names[0], "embed.word");
        assert_eq!(names[2], "lstm1.fwd.w");
    }

    #[test]
    fn init_sets_forget_bias_and_bounds() {
        let h = Hyper { lstm_units: 4, hidden_units: 3, ..Hyper::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p: ModelParams<f64> = ModelParams::init(&h, &[5, 4], 2, &mut rng);
        for l in &p.net.lstm {
            assert_eq!(l.b.to_vec(), [0., 0., 0., 0., 1., 1., 1., 1., 0., 0., 0., 0., 0., 0., 0., 0.]);
        }
        let limit = (6.0f64 / (3 + 4 * 16) as f64).sqrt();
        assert!(p.net.structural.w1.iter().all(|x| x.abs() <= limit));
        assert!(p.net.structural.b1.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hyper_round_trips_through_toml() {
        let h = Hyper::default();
        let back: Hyper = toml::from_str(&h.to_toml()).unwrap();
        assert_eq!(back, h);
    }
}
