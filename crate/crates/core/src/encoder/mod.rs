//! The neural scorer: embeddings, a two-layer bidirectional LSTM, span
//! differences, two feed-forward heads, AdaDelta and model bundles.

pub mod adadelta;
pub mod bundle;
pub mod network;
pub mod params;
pub mod vocab;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign};
use rand::Rng;
use thiserror::Error;

use crate::transition::{decode, Action, ActionScorer, Configuration, TransitionError};
use crate::treebank::{LabelInventory, Token, Tree};
use network::{encode, label_slots, score, structural_slots, Head, SentenceEncoding};
use params::{Hyper, ModelParams};
use vocab::Vocabulary;

/// Floating-point element type of the network.
pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + FromPrimitive
    + NumAssign
    + Sum
    + Default
    + Send
    + Sync
    + Debug
    + Display
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("training corpus has no tokens")]
    EmptyCorpus,
    #[error("empty sentence")]
    EmptySentence,
    #[error("UNK rate {0} is not reachable")]
    BadUnkRate(f64),
    #[error("token has {found} extra columns, expected {expected}")]
    InconsistentExtras { expected: usize, found: usize },
    #[error("span ({i}, {j}) is not a non-empty span of a {n}-word sentence")]
    BadSpan { i: usize, j: usize, n: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("not a model bundle or unsupported version")]
    UnsupportedFormat,
    #[error("model bundle is truncated")]
    Truncated,
    #[error("array `{name}` has the wrong shape")]
    ShapeMismatch { name: String },
    #[error("array `{name}` is missing from the bundle")]
    MissingArray { name: String },
    #[error("bad bundle header: {0}")]
    Header(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

/// A trained parser: hyperparameters, vocabularies, labels and weights.
#[derive(Debug)]
pub struct Model<F = f32> {
    pub hyper: Hyper,
    pub vocab: Vocabulary,
    pub labels: LabelInventory,
    pub params: ModelParams<F>,
    encodes: AtomicU64,
}

impl<F: Clone> Clone for Model<F> {
    fn clone(&self) -> Self {
        Model {
            hyper: self.hyper.clone(),
            vocab: self.vocab.clone(),
            labels: self.labels.clone(),
            params: self.params.clone(),
            encodes: AtomicU64::new(self.encode_count()),
        }
    }
}

impl<F> Model<F> {
    /// Number of recurrent passes run so far.
    pub fn encode_count(&self) -> u64 {
        self.encodes.load(Ordering::Relaxed)
    }
}

impl<F: Real> Model<F> {
    pub fn new(hyper: Hyper, vocab: Vocabulary, labels: LabelInventory, params: ModelParams<F>) -> Self {
        Model { hyper, vocab, labels, params, encodes: AtomicU64::new(0) }
    }

    /// Freshly initialized weights sized for `vocab` and `labels`.
    pub fn initialize<R: Rng + ?Sized>(hyper: Hyper, vocab: Vocabulary, labels: LabelInventory, rng: &mut R) -> Self {
        let sizes: Vec<usize> = vocab.columns.iter().map(|c| c.len()).collect();
        let params = ModelParams::init(&hyper, &sizes, labels.len(), rng);
        Model::new(hyper, vocab, labels, params)
    }

    /// One recurrent pass over `tokens`. With `train`, applies UNK
    /// replacement and layer-2 dropout.
    pub fn encode<R: Rng + ?Sized>(
        &self,
        tokens: &[Token],
        train: Option<&mut R>,
    ) -> Result<SentenceEncoding<F>, EncoderError> {
        self.encodes.fetch_add(1, Ordering::Relaxed);
        encode(&self.params, &self.hyper, &self.vocab, tokens, train)
    }

    /// Scorer over an existing encoding.
    pub fn scorer<'a>(&'a self, encoding: &'a SentenceEncoding<F>) -> ModelScorer<'a, F> {
        ModelScorer { model: self, encoding }
    }

    /// Greedy parse of a tagged sentence with one recurrent pass.
    pub fn parse(&self, tokens: &[Token]) -> Result<(Tree, Vec<Action>), EncoderError> {
        let enc = self.encode::<rand::rngs::ThreadRng>(tokens, None)?;
        let mut scorer = self.scorer(&enc);
        Ok(decode(tokens, &mut scorer, &self.labels)?)
    }
}

/// Scores configurations of one sentence from its encoding, without dropout.
pub struct ModelScorer<'a, F> {
    model: &'a Model<F>,
    encoding: &'a SentenceEncoding<F>,
}

fn to_f64<F: Real>(a: ndarray::Array1<F>) -> Vec<f64> {
    a.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect()
}

impl<F: Real> ActionScorer for ModelScorer<'_, F> {
    fn structural_scores(&mut self, c: &Configuration) -> [f64; 2] {
        let slots = structural_slots(c.stack(), c.sentence_len());
        let s = to_f64(score(&self.model.params, self.encoding, Head::Structural, &slots));
        [s[0], s[1]]
    }

    fn label_scores(&mut self, c: &Configuration) -> Vec<f64> {
        let slots = label_slots(c.stack(), c.sentence_len());
        to_f64(score(&self.model.params, self.encoding, Head::Label, &slots))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{build_label_inventory, collapse_unaries, read_trees};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_model() -> (Model<f32>, Vec<Tree>) {
        let trees: Vec<Tree> =
            read_trees("(S (NP (PRP I)) (VP (VBD ate) (NP (NN fish))))\n(S (NP (DT the) (NN dog)) (VP (VBD ran)))")
                .unwrap()
                .into_iter()
                .map(collapse_unaries)
                .collect();
        let vocab = vocab::build_vocab(&trees.iter().map(Tree::tokens).collect::<Vec<_>>(), 0.1).unwrap();
        let labels = build_label_inventory(&trees).unwrap();
        let hyper = Hyper { word_dim: 4, tag_dim: 3, lstm_units: 5, hidden_units: 6, ..Hyper::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        (Model::initialize(hyper, vocab, labels, &mut rng), trees)
    }

    #[test]
    fn parsing_encodes_each_sentence_once() {
        let (model, trees) = tiny_model();
        for (k, t) in trees.iter().enumerate() {
            let (tree, actions) = model.parse(&t.tokens()).unwrap();
            assert_eq!(tree.len(), t.len());
            assert_eq!(actions.len(), 4 * t.len() - 2);
            assert_eq!(model.encode_count(), k as u64 + 1);
        }
    }

    #[test]
    fn parsing_unknown_words_works() {
        let (model, _) = tiny_model();
        let tokens = vec![Token::new("zebra", "NN"), Token::new("quux", "XX")];
        assert!(model.parse(&tokens).is_ok());
        assert!(matches!(model.parse(&[]), Err(EncoderError::EmptySentence)));
    }
}
