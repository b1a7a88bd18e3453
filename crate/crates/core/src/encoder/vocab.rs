//! Input vocabularies and stochastic UNK replacement.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EncoderError;
use crate::treebank::Token;

pub const UNK: usize = 0;
pub const START: usize = 1;
pub const STOP: usize = 2;
const RESERVED: [&str; 3] = ["<unk>", "<s>", "</s>"];

/// One input column (words, tags, or an extra feature).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "ColumnRepr", into = "ColumnRepr")]
pub struct Column {
    symbols: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct ColumnRepr {
    symbols: Vec<String>,
    counts: Vec<u64>,
}

impl From<ColumnRepr> for Column {
    fn from(r: ColumnRepr) -> Column {
        let index = r.symbols.iter().enumerate().map(|(k, s)| (s.clone(), k)).collect();
        Column { symbols: r.symbols, counts: r.counts, index }
    }
}

impl From<Column> for ColumnRepr {
    fn from(c: Column) -> ColumnRepr {
        ColumnRepr { symbols: c.symbols, counts: c.counts }
    }
}

impl Column {
    fn new() -> Column {
        let mut c = Column { symbols: Vec::new(), counts: Vec::new(), index: HashMap::new() };
        for s in RESERVED {
            c.index.insert(s.to_string(), c.symbols.len());
            c.symbols.push(s.to_string());
            c.counts.push(0);
        }
        c
    }

    fn observe(&mut self, symbol: &str) {
        match self.index.get(symbol) {
            Some(&id) if id >= RESERVED.len() => self.counts[id] += 1,
            Some(_) => {}
            None => {
                self.index.insert(symbol.to_string(), self.symbols.len());
                self.symbols.push(symbol.to_string());
                self.counts.push(1);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Id of `symbol`, or [`UNK`].
    pub fn id(&self, symbol: &str) -> usize {
        match self.index.get(symbol) {
            Some(&id) if id >= RESERVED.len() => id,
            _ => UNK,
        }
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.id(symbol) != UNK
    }

    pub fn symbol(&self, id: usize) -> &str {
        &self.symbols[id]
    }

    /// Training frequency of the symbol with this id (0 for reserved ids).
    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }
}

/// Column 0 holds words, column 1 tags, and any further columns the extra
/// token features in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub columns: Vec<Column>,
    /// `z` in the replacement probability `z / (z + f(w))`.
    pub unk_scale: f64,
}

/// Expected fraction of training tokens replaced by UNK at scale `z`.
pub fn expected_unk_rate(counts: &[u64], z: f64) -> f64 {
    let total: f64 = counts.iter().map(|&f| f as f64).sum();
    if total == 0.0 {
        return 0.0;
    }
    counts.iter().map(|&f| f as f64 * z / (z + f as f64)).sum::<f64>() / total
}

/// Solves `expected_unk_rate(counts, z) = target` by bisection.
pub fn solve_unk_scale(counts: &[u64], target: f64) -> Result<f64, EncoderError> {
    if !(0.0..1.0).contains(&target) {
        return Err(EncoderError::BadUnkRate(target));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while expected_unk_rate(counts, hi) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(EncoderError::BadUnkRate(target));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_unk_rate(counts, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Counts every column over `corpus` and fits the UNK scale to
/// `target_unk_rate`.
pub fn build_vocab(corpus: &[Vec<Token>], target_unk_rate: f64) -> Result<Vocabulary, EncoderError> {
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(EncoderError::EmptyCorpus);
    }
    let extras = corpus.iter().flatten().map(|t| t.extras.len()).max().unwrap_or(0);
    let mut columns: Vec<Column> = (0..2 + extras).map(|_| Column::new()).collect();
    for token in corpus.iter().flatten() {
        if token.extras.len() != extras {
            return Err(EncoderError::InconsistentExtras { expected: extras, found: token.extras.len() });
        }
        columns[0].observe(&token.word);
        columns[1].observe(&token.tag);
        for (k, e) in token.extras.iter().enumerate() {
            columns[2 + k].observe(e);
        }
    }
    let word_counts = &columns[0].counts[RESERVED.len()..];
    let unk_scale = solve_unk_scale(word_counts, target_unk_rate)?;
    Ok(Vocabulary { columns, unk_scale })
}

impl Vocabulary {
    pub fn words(&self) -> &Column {
        &self.columns[0]
    }

    pub fn extras(&self) -> usize {
        self.columns.len() - 2
    }

    /// Probability that a training occurrence of `word` becomes UNK.
    pub fn unk_probability(&self, word: &str) -> f64 {
        let id = self.words().id(word);
        if id == UNK {
            return 1.0;
        }
        let f = self.words().count(id) as f64;
        self.unk_scale / (self.unk_scale + f)
    }

    /// Ids per position, with start and stop sentinels: `n + 2` rows of one
    /// id per column. With `rng`, in-vocabulary words are replaced by UNK at
    /// random.
    pub fn ids<R: Rng + ?Sized>(&self, tokens: &[Token], mut rng: Option<&mut R>) -> Vec<Vec<usize>> {
        let cols = self.columns.len();
        let mut out = Vec::with_capacity(tokens.len() + 2);
        out.push(vec![START; cols]);
        for t in tokens {
            let mut row = Vec::with_capacity(cols);
            let mut word = self.columns[0].id(&t.word);
            if word != UNK && self.unk_scale > 0.0 {
                if let Some(r) = rng.as_deref_mut() {
                    let f = self.columns[0].count(word) as f64;
                    if r.random_bool(self.unk_scale / (self.unk_scale + f)) {
                        word = UNK;
                    }
                }
            }
            row.push(word);
            row.push(self.columns[1].id(&t.tag));
            for (k, col) in self.columns[2..].iter().enumerate() {
                row.push(t.extras.get(k).map_or(UNK, |e| col.id(e)));
            }
            out.push(row);
        }
        out.push(vec![STOP; cols]);
        out
    }

    /// Fraction of tokens in `corpus` whose word is not in the vocabulary.
    pub fn oov_rate(&self, corpus: &[Vec<Token>]) -> f64 {
        let total = corpus.iter().map(Vec::len).sum::<usize>();
        if total == 0 {
            return 0.0;
        }
        let oov = corpus.iter().flatten().filter(|t| !self.words().contains(&t.word)).count();
        oov as f64 / total as f64
    }
}
