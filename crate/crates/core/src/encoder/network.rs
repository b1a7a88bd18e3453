//! Forward and backward passes: embeddings, the two-layer bidirectional
//! LSTM, span differences and the two classifier heads.
//!
//! Positions run `0..n+2`: the start sentinel, the words, the stop sentinel.
//! The forward state at boundary `i` is the forward output at position `i`
//! (start symbol plus the first `i` words); the backward state at boundary
//! `i` is the backward output at position `i + 1`.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use super::params::{Gradients, HeadParams, Hyper, LstmParams, ModelParams};
use super::vocab::Vocabulary;
use super::{EncoderError, Real};
use crate::treebank::Token;

fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Activations of one direction of one layer, in processing order.
#[derive(Debug, Clone)]
struct LstmTrace<F> {
    x: Array2<F>,
    /// Activated gates `i, f, g, o` per step.
    gates: Array2<F>,
    c: Array2<F>,
    h: Array2<F>,
}

fn lstm_forward<F: Real>(p: &LstmParams<F>, x: Array2<F>) -> LstmTrace<F> {
    let t_len = x.nrows();
    let h_dim = p.units();
    let zx = x.dot(&p.w.t()) + &p.b;
    let mut gates = Array2::zeros((t_len, 4 * h_dim));
    let mut c = Array2::zeros((t_len, h_dim));
    let mut h = Array2::zeros((t_len, h_dim));
    let mut h_prev = Array1::<F>::zeros(h_dim);
    let mut c_prev = Array1::<F>::zeros(h_dim);
    for t in 0..t_len {
        let z = &zx.row(t) + &p.u.dot(&h_prev);
        let mut g = gates.row_mut(t);
        for k in 0..h_dim {
            let i_g = sigmoid(z[k]);
            let f_g = sigmoid(z[h_dim + k]);
            let c_g = z[2 * h_dim + k].tanh();
            let o_g = sigmoid(z[3 * h_dim + k]);
            g[k] = i_g;
            g[h_dim + k] = f_g;
            g[2 * h_dim + k] = c_g;
            g[3 * h_dim + k] = o_g;
            let cell = f_g * c_prev[k] + i_g * c_g;
            c[[t, k]] = cell;
            h[[t, k]] = o_g * cell.tanh();
        }
        h_prev = h.row(t).to_owned();
        c_prev = c.row(t).to_owned();
    }
    LstmTrace { x, gates, c, h }
}

/// Backpropagates `dh` (processing order) through one direction, adding
/// parameter gradients into `grad` and returning the input gradient.
fn lstm_backward<F: Real>(p: &LstmParams<F>, tr: &LstmTrace<F>, dh: &Array2<F>, grad: &mut LstmParams<F>) -> Array2<F> {
    let t_len = tr.x.nrows();
    let h_dim = p.units();
    let mut dz = Array2::<F>::zeros((t_len, 4 * h_dim));
    let mut dh_next = Array1::<F>::zeros(h_dim);
    let mut dc_next = Array1::<F>::zeros(h_dim);
    let one = F::one();
    for t in (0..t_len).rev() {
        let g = tr.gates.row(t);
        let mut dzt = dz.row_mut(t);
        for k in 0..h_dim {
            let (i_g, f_g, c_g, o_g) = (g[k], g[h_dim + k], g[2 * h_dim + k], g[3 * h_dim + k]);
            let cell = tr.c[[t, k]];
            let c_prev = if t > 0 { tr.c[[t - 1, k]] } else { F::zero() };
            let tc = cell.tanh();
            let dht = dh[[t, k]] + dh_next[k];
            let d_o = dht * tc;
            let dc = dht * o_g * (one - tc * tc) + dc_next[k];
            dc_next[k] = dc * f_g;
            dzt[k] = dc * c_g * i_g * (one - i_g);
            dzt[h_dim + k] = dc * c_prev * f_g * (one - f_g);
            dzt[2 * h_dim + k] = dc * i_g * (one - c_g * c_g);
            dzt[3 * h_dim + k] = d_o * o_g * (one - o_g);
        }
        dh_next = p.u.t().dot(&dz.row(t));
    }
    grad.w += &dz.t().dot(&tr.x);
    if t_len > 1 {
        grad.u += &dz.slice(s![1.., ..]).t().dot(&tr.h.slice(s![..t_len - 1, ..]));
    }
    grad.b += &dz.sum_axis(Axis(0));
    dz.dot(&p.w)
}

fn reversed<F: Real>(a: &Array2<F>) -> Array2<F> {
    a.slice(s![..;-1, ..]).to_owned()
}

/// Inverted dropout mask: entries are `0` or `1 / (1 - p)`.
pub fn dropout_mask<F: Real, R: Rng + ?Sized>(shape: (usize, usize), p: f64, rng: &mut R) -> Array2<F> {
    let keep = F::from_f64(1.0 / (1.0 - p)).unwrap();
    Array2::from_shape_simple_fn(shape, || if rng.random_bool(p) { F::zero() } else { keep })
}

/// Recurrent states of one sentence, plus what backpropagation needs.
#[derive(Debug, Clone)]
pub struct SentenceEncoding<F> {
    n: usize,
    units: usize,
    ids: Vec<Vec<usize>>,
    traces: [LstmTrace<F>; 4],
    /// Outputs in position order: layer 1 forward, layer 1 backward,
    /// layer 2 forward, layer 2 backward.
    outputs: [Array2<F>; 4],
    layer2_mask: Option<Array2<F>>,
}

impl<F: Real> SentenceEncoding<F> {
    pub fn sentence_len(&self) -> usize {
        self.n
    }

    /// Forward state of `layer` (0 or 1) at boundary `i`.
    pub fn forward_state(&self, layer: usize, i: usize) -> ArrayView1<'_, F> {
        self.outputs[2 * layer].row(i)
    }

    /// Backward state of `layer` (0 or 1) at boundary `i`.
    pub fn backward_state(&self, layer: usize, i: usize) -> ArrayView1<'_, F> {
        self.outputs[2 * layer + 1].row(i + 1)
    }

    /// Input ids used for this pass, after any UNK replacement.
    pub fn ids(&self) -> &[Vec<usize>] {
        &self.ids
    }

    pub fn feature_dim(&self) -> usize {
        4 * self.units
    }

    /// Writes the span feature of `(i, j)` into `out`; an empty span is zero.
    fn write_span(&self, (i, j): (usize, usize), out: &mut [F]) {
        let h = self.units;
        if i == j {
            out.fill(F::zero());
            return;
        }
        for layer in 0..2 {
            let f = &self.outputs[2 * layer];
            let b = &self.outputs[2 * layer + 1];
            let base = 2 * layer * h;
            for k in 0..h {
                out[base + k] = f[[j, k]] - f[[i, k]];
                out[base + h + k] = b[[i + 1, k]] - b[[j + 1, k]];
            }
        }
    }

    /// Concatenated features of `slots`.
    pub fn features(&self, slots: &[(usize, usize)]) -> Array1<F> {
        let d = self.feature_dim();
        let mut out = Array1::zeros(d * slots.len());
        let buf = out.as_slice_mut().unwrap();
        for (k, &span) in slots.iter().enumerate() {
            self.write_span(span, &mut buf[k * d..(k + 1) * d]);
        }
        out
    }
}

/// The span feature of `(i, j)`: per layer, `f_j - f_i` then `b_i - b_j`.
pub fn span_feature<F: Real>(enc: &SentenceEncoding<F>, i: usize, j: usize) -> Result<Array1<F>, EncoderError> {
    if i >= j || j > enc.n {
        return Err(EncoderError::BadSpan { i, j, n: enc.n });
    }
    Ok(enc.features(&[(i, j)]))
}

/// Runs the recurrent layers over `tokens`. With `train`, words are
/// replaced by UNK at random and the layer-2 input is masked.
pub fn encode<F: Real, R: Rng + ?Sized>(
    params: &ModelParams<F>,
    hyper: &Hyper,
    vocab: &Vocabulary,
    tokens: &[Token],
    mut train: Option<&mut R>,
) -> Result<SentenceEncoding<F>, EncoderError> {
    if tokens.is_empty() {
        return Err(EncoderError::EmptySentence);
    }
    let ids = vocab.ids(tokens, train.as_deref_mut());
    let t_len = ids.len();
    let in_dim: usize = params.embeddings.iter().map(|e| e.ncols()).sum();
    let mut x1 = Array2::<F>::zeros((t_len, in_dim));
    for (pos, row) in ids.iter().enumerate() {
        let mut off = 0;
        for (c, &id) in row.iter().enumerate() {
            let table = &params.embeddings[c];
            let w = table.ncols();
            x1.slice_mut(s![pos, off..off + w]).assign(&table.row(id));
            off += w;
        }
    }
    let net = &params.net;
    let units = net.lstm[0].units();
    let l1f = lstm_forward(&net.lstm[0], x1.clone());
    let l1b = lstm_forward(&net.lstm[1], reversed(&x1));
    let o1f = l1f.h.clone();
    let o1b = reversed(&l1b.h);
    let mut x2 = ndarray::concatenate(Axis(1), &[o1f.view(), o1b.view()]).unwrap();
    let layer2_mask = train.map(|rng| dropout_mask::<F, R>((t_len, 2 * units), hyper.dropout, rng));
    if let Some(m) = &layer2_mask {
        x2 *= m;
    }
    let l2f = lstm_forward(&net.lstm[2], x2.clone());
    let l2b = lstm_forward(&net.lstm[3], reversed(&x2));
    let o2f = l2f.h.clone();
    let o2b = reversed(&l2b.h);
    let outputs = [o1f, o1b, o2f, o2b];
    if outputs.iter().any(|o| o.iter().any(|v| !v.is_finite())) {
        return Err(EncoderError::NonFinite("recurrent state"));
    }
    Ok(SentenceEncoding { n: tokens.len(), units, ids, traces: [l1f, l1b, l2f, l2b], outputs, layer2_mask })
}

/// Which classifier an example feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Head {
    Structural,
    Label,
}

/// Structural spans for stack `... | i | k | j`: `(0,i), (i,k), (k,j),
/// (j,n)`. Missing boundaries give empty spans.
pub fn structural_slots(stack: &[usize], n: usize) -> Vec<(usize, usize)> {
    let len = stack.len();
    let j = stack[len - 1];
    let k = (len >= 2).then(|| stack[len - 2]);
    let i = (len >= 3).then(|| stack[len - 3]);
    vec![
        i.map_or((0, 0), |i| (0, i)),
        match (i, k) {
            (Some(i), Some(k)) => (i, k),
            _ => (0, 0),
        },
        k.map_or((j, j), |k| (k, j)),
        (j, n),
    ]
}

/// Label spans for stack `... | i | j`: `(0,i), (i,j), (j,n)`.
pub fn label_slots(stack: &[usize], n: usize) -> Vec<(usize, usize)> {
    let len = stack.len();
    let j = stack[len - 1];
    let i = stack[len - 2];
    vec![(0, i), (i, j), (j, n)]
}

fn head_params<F>(params: &ModelParams<F>, head: Head) -> &HeadParams<F> {
    match head {
        Head::Structural => &params.net.structural,
        Head::Label => &params.net.label,
    }
}

/// Scores without dropout.
pub fn score<F: Real>(
    params: &ModelParams<F>,
    enc: &SentenceEncoding<F>,
    head: Head,
    slots: &[(usize, usize)],
) -> Array1<F> {
    let hp = head_params(params, head);
    let x = enc.features(slots);
    let hidden = (hp.w1.dot(&x) + &hp.b1).mapv(|v| v.max(F::zero()));
    hp.w2.dot(&hidden) + &hp.b2
}

/// One supervised decision: the head, its span slots, and the correct class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub head: Head,
    pub slots: Vec<(usize, usize)>,
    pub target: usize,
}

fn log_softmax<F: Real>(row: ArrayView1<'_, F>) -> Array1<F> {
    let max = row.fold(F::neg_infinity(), |m, &v| m.max(v));
    let lse = row.mapv(|v| (v - max).exp()).sum().ln() + max;
    row.mapv(|v| v - lse)
}

/// Summed negative log-likelihood of the examples of one head, with
/// gradients into `grad` and the feature gradient per example.
fn head_loss<F: Real, R: Rng + ?Sized>(
    hp: &HeadParams<F>,
    grad: &mut HeadParams<F>,
    enc: &SentenceEncoding<F>,
    examples: &[&Example],
    dropout: Option<(f64, &mut R)>,
) -> (F, Array2<F>) {
    let m = examples.len();
    let width = hp.w1.ncols();
    let mut x = Array2::<F>::zeros((m, width));
    for (r, ex) in examples.iter().enumerate() {
        x.row_mut(r).assign(&enc.features(&ex.slots));
    }
    let mask = dropout.map(|(p, rng)| dropout_mask::<F, R>((m, width), p, rng));
    if let Some(mk) = &mask {
        x *= mk;
    }
    let pre = x.dot(&hp.w1.t()) + &hp.b1;
    let hidden = pre.mapv(|v| v.max(F::zero()));
    let scores = hidden.dot(&hp.w2.t()) + &hp.b2;
    let mut loss = F::zero();
    let mut ds = Array2::<F>::zeros(scores.dim());
    for (r, ex) in examples.iter().enumerate() {
        let lp = log_softmax(scores.row(r));
        loss -= lp[ex.target];
        let mut d = ds.row_mut(r);
        d.assign(&lp.mapv(|v| v.exp()));
        d[ex.target] -= F::one();
    }
    grad.w2 += &ds.t().dot(&hidden);
    grad.b2 += &ds.sum_axis(Axis(0));
    let mut dpre = ds.dot(&hp.w2);
    dpre.zip_mut_with(&pre, |d, &p| {
        if p <= F::zero() {
            *d = F::zero();
        }
    });
    grad.w1 += &dpre.t().dot(&x);
    grad.b1 += &dpre.sum_axis(Axis(0));
    let mut dx = dpre.dot(&hp.w1);
    if let Some(mk) = &mask {
        dx *= mk;
    }
    (loss, dx)
}

/// Loss and gradients for all examples of one sentence, sharing the single
/// recurrent pass in `enc`. With `dropout_rng`, a fresh feature dropout
/// mask is drawn for every example.
pub fn loss_and_gradients<F: Real, R: Rng + ?Sized>(
    params: &ModelParams<F>,
    hyper: &Hyper,
    enc: &SentenceEncoding<F>,
    examples: &[Example],
    mut dropout_rng: Option<&mut R>,
) -> Result<(F, Gradients<F>), EncoderError> {
    let mut grads = Gradients::zeros(params);
    let mut d_out: Vec<Array2<F>> = enc.outputs.iter().map(|o| Array2::zeros(o.dim())).collect();
    let d = enc.feature_dim();
    let h = enc.units;
    let mut loss = F::zero();
    for head in [Head::Structural, Head::Label] {
        let group: Vec<&Example> = examples.iter().filter(|e| e.head == head).collect();
        if group.is_empty() {
            continue;
        }
        let grad_head = match head {
            Head::Structural => &mut grads.net.structural,
            Head::Label => &mut grads.net.label,
        };
        let dropout = dropout_rng.as_deref_mut().map(|r| (hyper.dropout, r));
        let (l, dx) = head_loss(head_params(params, head), grad_head, enc, &group, dropout);
        loss += l;
        for (r, ex) in group.iter().enumerate() {
            for (k, &(i, j)) in ex.slots.iter().enumerate() {
                if i == j {
                    continue;
                }
                let g = dx.slice(s![r, k * d..(k + 1) * d]);
                for layer in 0..2 {
                    let base = 2 * layer * h;
                    let gf = g.slice(s![base..base + h]);
                    let gb = g.slice(s![base + h..base + 2 * h]);
                    let mut f = d_out[2 * layer].row_mut(j);
                    f += &gf;
                    let mut f = d_out[2 * layer].row_mut(i);
                    f -= &gf;
                    let mut b = d_out[2 * layer + 1].row_mut(i + 1);
                    b += &gb;
                    let mut b = d_out[2 * layer + 1].row_mut(j + 1);
                    b -= &gb;
                }
            }
        }
    }
    if !loss.is_finite() {
        return Err(EncoderError::NonFinite("loss"));
    }

    let net = &params.net;
    let [g1f, g1b, g2f, g2b] = &mut grads.net.lstm;
    let dx2f = lstm_backward(&net.lstm[2], &enc.traces[2], &d_out[2], g2f);
    let dx2b = reversed(&lstm_backward(&net.lstm[3], &enc.traces[3], &reversed(&d_out[3]), g2b));
    let mut dx2 = dx2f + dx2b;
    if let Some(m) = &enc.layer2_mask {
        dx2 *= m;
    }
    d_out[0] += &dx2.slice(s![.., ..h]);
    d_out[1] += &dx2.slice(s![.., h..]);
    let dx1f = lstm_backward(&net.lstm[0], &enc.traces[0], &d_out[0], g1f);
    let dx1b = reversed(&lstm_backward(&net.lstm[1], &enc.traces[1], &reversed(&d_out[1]), g1b));
    let dx1 = dx1f + dx1b;
    for (pos, row) in enc.ids.iter().enumerate() {
        let mut off = 0;
        for (c, &id) in row.iter().enumerate() {
            let w = params.embeddings[c].ncols();
            let g = dx1.slice(s![pos, off..off + w]);
            grads.embeddings[c].entry(id).and_modify(|a| *a += &g).or_insert_with(|| g.to_owned());
            off += w;
        }
    }
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::vocab::build_vocab;
    use crate::oracle::static_oracle;
    use crate::transition::{Action, Configuration};
    use crate::treebank::{collapse_unaries, read_trees, LabelInventory, Tree};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_hyper() -> Hyper {
        Hyper { word_dim: 3, tag_dim: 2, extra_dim: 2, lstm_units: 3, hidden_units: 4, ..Hyper::default() }
    }

    fn sentence(text: &str) -> Tree {
        collapse_unaries(read_trees(text).unwrap().remove(0))
    }

    fn setup<F: Real>(hyper: &Hyper, tree: &Tree, seed: u64) -> (Vocabulary, LabelInventory, ModelParams<F>) {
        let vocab = build_vocab(&[tree.tokens()], 0.2).unwrap();
        let inv = crate::treebank::build_label_inventory(std::slice::from_ref(tree)).unwrap();
        let sizes: Vec<usize> = vocab.columns.iter().map(|c| c.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ModelParams::init(hyper, &sizes, inv.len(), &mut rng);
        (vocab, inv, params)
    }

    /// Oracle examples along the gold path.
    fn examples(tree: &Tree, inv: &LabelInventory) -> Vec<Example> {
        let n = tree.len();
        let mut c = Configuration::initial(n).unwrap();
        let mut out = Vec::new();
        for a in static_oracle(tree) {
            let ex = match &a {
                Action::Shift => Example { head: Head::Structural, slots: structural_slots(c.stack(), n), target: 0 },
                Action::Combine => Example { head: Head::Structural, slots: structural_slots(c.stack(), n), target: 1 },
                Action::NoLabel => Example { head: Head::Label, slots: label_slots(c.stack(), n), target: 0 },
                Action::Label(ch) => {
                    Example { head: Head::Label, slots: label_slots(c.stack(), n), target: 1 + inv.id(ch).unwrap() }
                }
            };
            out.push(ex);
            c = c.apply(&a).unwrap();
        }
        out
    }

    const THREE: &str = "(S (NP (PRP I)) (VP (VBD ate) (NP (NN fish))))";

    #[test]
    fn slot_schemas() {
        assert_eq!(structural_slots(&[0, 1, 2, 3], 5), [(0, 1), (1, 2), (2, 3), (3, 5)]);
        assert_eq!(structural_slots(&[0, 3], 3), [(0, 0), (0, 0), (0, 3), (3, 3)]);
        assert_eq!(structural_slots(&[0], 4), [(0, 0), (0, 0), (0, 0), (0, 4)]);
        assert_eq!(label_slots(&[0, 1, 3, 5], 5), [(0, 3), (3, 5), (5, 5)]);
    }

    #[test]
    fn zero_parameters_give_zero_states_and_scores() {
        let h = tiny_hyper();
        let tree = sentence(THREE);
        let (vocab, inv, _) = setup::<f64>(&h, &tree, 0);
        let sizes: Vec<usize> = vocab.columns.iter().map(|c| c.len()).collect();
        let p = ModelParams::<f64>::zeros(&h, &sizes, inv.len());
        let enc = encode::<f64, ChaCha8Rng>(&p, &h, &vocab, &tree.tokens(), None).unwrap();
        assert!(enc.outputs.iter().all(|o| o.iter().all(|&v| v == 0.0)));
        assert!(span_feature(&enc, 0, 3).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(score(&p, &enc, Head::Structural, &structural_slots(&[0, 1], 3)).to_vec(), [0.0, 0.0]);
        assert_eq!(score(&p, &enc, Head::Label, &label_slots(&[0, 1], 3)).len(), inv.len() + 1);
    }

    #[test]
    fn single_token_shapes() {
        let h = tiny_hyper();
        let tree = sentence("(NP (NN fish))");
        let (vocab, _, p) = setup::<f32>(&h, &tree, 1);
        let enc = encode::<f32, ChaCha8Rng>(&p, &h, &vocab, &tree.tokens(), None).unwrap();
        assert_eq!(enc.outputs[0].nrows(), 3);
        assert_eq!(span_feature(&enc, 0, 1).unwrap().len(), 12);
        assert!(matches!(span_feature(&enc, 1, 1), Err(EncoderError::BadSpan { .. })));
    }

    #[test]
    fn span_feature_layout() {
        let h = tiny_hyper();
        let tree = sentence("(S (NP (PRP I)) (VP (MD do) (VBP like) (S (VP (VBG eating) (NP (NN fish))))))");
        let (vocab, _, p) = setup::<f64>(&h, &tree, 2);
        let enc = encode::<f64, ChaCha8Rng>(&p, &h, &vocab, &tree.tokens(), None).unwrap();
        let f = span_feature(&enc, 3, 5).unwrap();
        for layer in 0..2 {
            let base = 2 * layer * 3;
            for k in 0..3 {
                assert_eq!(f[base + k], enc.forward_state(layer, 5)[k] - enc.forward_state(layer, 3)[k]);
                assert_eq!(f[base + 3 + k], enc.backward_state(layer, 3)[k] - enc.backward_state(layer, 5)[k]);
            }
        }
    }

    #[test]
    fn span_features_telescope() {
        let h = Hyper::default();
        let tree = sentence("(S (NP (PRP I)) (VP (MD do) (VBP like) (S (VP (VBG eating) (NP (NN fish))))))");
        let (vocab, _, p) = setup::<f32>(&h, &tree, 3);
        let enc = encode::<f32, ChaCha8Rng>(&p, &h, &vocab, &tree.tokens(), None).unwrap();
        for (i, k, j) in [(0, 2, 5), (1, 3, 4), (0, 1, 2)] {
            let sum = span_feature(&enc, i, k).unwrap() + span_feature(&enc, k, j).unwrap();
            let whole = span_feature(&enc, i, j).unwrap();
            let err = (&sum - &whole).iter().fold(0.0f32, |m, v| m.max(v.abs()));
            assert!(err <= 1e-6, "{err}");
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let h = tiny_hyper();
        let tree = sentence(THREE);
        let (vocab, _, p) = setup::<f32>(&h, &tree, 4);
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let a = encode(&p, &h, &vocab, &tree.tokens(), Some(&mut r1)).unwrap();
        let b = encode(&p, &h, &vocab, &tree.tokens(), Some(&mut r2)).unwrap();
        assert_eq!(a.outputs, b.outputs);
        let c = encode::<f32, ChaCha8Rng>(&p, &h, &vocab, &tree.tokens(), None).unwrap();
        let d = encode::<f32, ChaCha8Rng>(&p, &h, &vocab, &tree.tokens(), None).unwrap();
        assert_eq!(c.outputs, d.outputs);
    }

    #[test]
    fn uniform_scores_cost_ln_two() {
        let h = tiny_hyper();
        let tree = sentence(THREE);
        let (vocab, inv, _) = setup::<f64>(&h, &tree, 0);
        let sizes: Vec<usize> = vocab.columns.iter().map(|c| c.len()).collect();
        let p = ModelParams::<f64>::zeros(&h, &sizes, inv.len());
        let enc = encode::<f64, ChaCha8Rng>(&p, &h, &vocab, &tree.tokens(), None).unwrap();
        let ex = Example { head: Head::Structural, slots: structural_slots(&[0], 3), target: 0 };
        let (loss, _) = loss_and_gradients::<f64, ChaCha8Rng>(&p, &h, &enc, &[ex], None).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn duplicating_examples_doubles_the_loss() {
        let h = tiny_hyper();
        let tree = sentence(THREE);
        let (vocab, inv, p) = setup::<f64>(&h, &tree, 5);
        let enc = encode::<f64, ChaCha8Rng>(&p, &h, &vocab, &tree.tokens(), None).unwrap();
        let ex = examples(&tree, &inv);
        let mut twice = ex.clone();
        twice.extend(ex.iter().cloned());
        let (l1, g1) = loss_and_gradients::<f64, ChaCha8Rng>(&p, &h, &enc, &ex, None).unwrap();
        let (l2, g2) = loss_and_gradients::<f64, ChaCha8Rng>(&p, &h, &enc, &twice, None).unwrap();
        assert!((l2 - 2.0 * l1).abs() < 1e-12 * l1.abs().max(1.0));
        let diff = (&g2.net.label.w1 - &(&g1.net.label.w1 * 2.0)).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(diff < 1e-12);
    }

    /// Loss at `params` with the same UNK draws and dropout masks each call.
    fn loss_at(p: &ModelParams<f64>, h: &Hyper, vocab: &Vocabulary, tree: &Tree, ex: &[Example], seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = encode(p, h, vocab, &tree.tokens(), Some(&mut rng)).unwrap();
        loss_and_gradients(p, h, &enc, ex, Some(&mut rng)).unwrap().0
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = Hyper { dropout: 0.3, ..tiny_hyper() };
        let tree = sentence(THREE);
        let (vocab, inv, p) = setup::<f64>(&h, &tree, 6);
        let ex = examples(&tree, &inv);
        let seed = 17;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = encode(&p, &h, &vocab, &tree.tokens(), Some(&mut rng)).unwrap();
        let (_, grads) = loss_and_gradients(&p, &h, &enc, &ex, Some(&mut rng)).unwrap();

        let mut analytic: Vec<(String, Vec<f64>)> = Vec::new();
        for (c, table) in p.embeddings.iter().enumerate() {
            let dense = grads.dense_embedding(c, table.dim());
            analytic.push((crate::encoder::params::embedding_name(c), dense.iter().copied().collect()));
        }
        let gp = ModelParams { embeddings: p.embeddings.clone(), net: grads.net.clone() };
        for (name, a) in gp.named().into_iter().skip(p.embeddings.len()) {
            analytic.push((name, a.iter().copied().collect()));
        }

        let eps = 1e-6;
        for (b, (name, a)) in analytic.iter().enumerate() {
            let len = a.len();
            let mut numeric = Vec::with_capacity(len);
            for k in 0..len {
                let mut plus = p.clone();
                plus.named_mut()[b].1.as_slice_mut().unwrap()[k] += eps;
                let mut minus = p.clone();
                minus.named_mut()[b].1.as_slice_mut().unwrap()[k] -= eps;
                let lp = loss_at(&plus, &h, &vocab, &tree, &ex, seed);
                let lm = loss_at(&minus, &h, &vocab, &tree, &ex, seed);
                numeric.push((lp - lm) / (2.0 * eps));
            }
            let diff: f64 = a.iter().zip(&numeric).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            let scale: f64 =
                a.iter().map(|x| x * x).sum::<f64>().sqrt() + numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
            let rel = if scale == 0.0 { 0.0 } else { diff / scale };
            assert!(rel < 1e-4, "{name}: relative error {rel}");
            assert!(scale > 0.0 || name.starts_with("embed"), "{name}: zero gradient");
        }
    }

    #[test]
    fn inverted_dropout_preserves_expectation() {
        let h = Hyper::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hp: ModelParams<f64> = ModelParams::init(&h, &[10, 5], 3, &mut rng);
        let x: Array1<f64> = Array1::from_shape_fn(3200, |k| ((k * 37 % 101) as f64 / 50.0) - 1.0);
        let w = &hp.net.structural.w1;
        let reference = w.dot(&x);
        let draws = 10_000;
        let mut mean = Array1::<f64>::zeros(reference.len());
        for _ in 0..draws {
            let m = dropout_mask::<f64, _>((1, 3200), 0.5, &mut rng);
            mean += &w.dot(&(&x * &m.row(0)));
        }
        mean /= draws as f64;
        let norm = |a: &Array1<f64>| a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel = norm(&(&mean - &reference)) / norm(&reference);
        assert!(rel < 0.02, "{rel}");
    }
}
