//! Seeded synthetic trees: random bracketings for property tests and a toy
//! grammar whose structure is predictable from the tags.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::treebank::{Chain, Token, Tree};

/// A random collapsed tree over `n` words with labels drawn from
/// `L0..L{labels-1}`. Some spans carry two-symbol unary chains.
pub fn random_tree(n: usize, labels: usize, seed: u64) -> Tree {
    assert!(n > 0 && labels > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let symbols: Vec<String> = (0..labels).map(|k| format!("L{k}")).collect();
    let root = random_span(0, n, &symbols, &mut rng);
    if root.is_leaf() {
        Tree::node(random_chain(&symbols, &mut rng).to_string(), vec![root])
    } else {
        root
    }
}

fn random_chain(symbols: &[String], rng: &mut ChaCha8Rng) -> Chain {
    let first = symbols.choose(rng).unwrap();
    if symbols.len() > 1 && rng.random_bool(0.2) {
        let second = loop {
            let s = symbols.choose(rng).unwrap();
            if s != first {
                break s;
            }
        };
        Chain::new([first, second])
    } else {
        Chain::single(first)
    }
}

fn random_span(i: usize, j: usize, symbols: &[String], rng: &mut ChaCha8Rng) -> Tree {
    if j - i == 1 {
        let leaf = Tree::leaf(Token::new(format!("w{i}"), format!("T{}", i % 3)), i);
        return if rng.random_bool(0.3) {
            Tree::node(random_chain(symbols, rng).to_string(), vec![leaf])
        } else {
            leaf
        };
    }
    let arity = rng.random_range(2..=(j - i).min(3));
    let mut cuts: Vec<usize> = Vec::new();
    while cuts.len() < arity - 1 {
        let c = rng.random_range(i + 1..j);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let mut bounds = vec![i];
    bounds.extend(cuts);
    bounds.push(j);
    let children = bounds.windows(2).map(|w| random_span(w[0], w[1], symbols, rng)).collect();
    Tree::node(random_chain(symbols, rng).to_string(), children)
}

const DT: &[&str] = &["the", "a"];
const NN: &[&str] = &["dog", "cat", "fish", "park", "bird"];
const JJ: &[&str] = &["big", "small", "red"];
const PRP: &[&str] = &["he", "she", "it"];
const NNP: &[&str] = &["john", "mary"];
const VBD: &[&str] = &["ran", "saw", "ate", "liked"];
const VBZ: &[&str] = &["says", "thinks", "knows"];

/// Builds trees from a small grammar over the labels S, NP and VP:
///
/// ```text
/// S  -> NP VP | VP        (bare VP only below VBZ)
/// NP -> DT NN | DT JJ NN | PRP | NNP
/// VP -> VBD | VBD NP | VBZ S
/// ```
struct ToyGrammar<'r> {
    rng: &'r mut ChaCha8Rng,
    words: Vec<Token>,
}

enum Shape {
    Node(&'static str, Vec<Shape>),
    Word(&'static str, &'static str),
}

impl ToyGrammar<'_> {
    fn pick(&mut self, tag: &'static str, words: &[&'static str]) -> Shape {
        Shape::Word(tag, words.choose(self.rng).unwrap())
    }

    fn np(&mut self) -> Shape {
        let kids = match self.rng.random_range(0..4) {
            0 => vec![self.pick("DT", DT), self.pick("NN", NN)],
            1 => vec![self.pick("DT", DT), self.pick("JJ", JJ), self.pick("NN", NN)],
            2 => vec![self.pick("PRP", PRP)],
            _ => vec![self.pick("NNP", NNP)],
        };
        Shape::Node("NP", kids)
    }

    fn vp(&mut self, depth: usize) -> Shape {
        let choice = if depth >= 2 { self.rng.random_range(0..2) } else { self.rng.random_range(0..3) };
        let kids = match choice {
            0 => vec![self.pick("VBD", VBD)],
            1 => vec![self.pick("VBD", VBD), self.np()],
            _ => vec![self.pick("VBZ", VBZ), self.s(depth + 1, true)],
        };
        Shape::Node("VP", kids)
    }

    fn s(&mut self, depth: usize, embedded: bool) -> Shape {
        if embedded && self.rng.random_bool(0.4) {
            Shape::Node("S", vec![self.vp(depth)])
        } else {
            let np = self.np();
            Shape::Node("S", vec![np, self.vp(depth)])
        }
    }

    fn build(&mut self, shape: Shape) -> Tree {
        match shape {
            Shape::Word(tag, word) => {
                let index = self.words.len();
                let token = Token::new(word, tag);
                self.words.push(token.clone());
                Tree::leaf(token, index)
            }
            Shape::Node(label, kids) => {
                let children = kids.into_iter().map(|k| self.build(k)).collect();
                Tree::node(label, children)
            }
        }
    }
}

fn shape_len(s: &Shape) -> usize {
    match s {
        Shape::Word(..) => 1,
        Shape::Node(_, kids) => kids.iter().map(shape_len).sum(),
    }
}

/// One uncollapsed toy sentence of at most `max_len` words.
pub fn toy_sentence(rng: &mut ChaCha8Rng, max_len: usize) -> Tree {
    assert!(max_len >= 2, "the toy grammar needs at least two words");
    loop {
        let mut g = ToyGrammar { rng, words: Vec::new() };
        let shape = g.s(0, false);
        if shape_len(&shape) <= max_len {
            return g.build(shape);
        }
    }
}

/// `count` toy sentences, uncollapsed, reproducible from `seed`.
pub fn toy_corpus(count: usize, max_len: usize, seed: u64) -> Vec<Tree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| toy_sentence(&mut rng, max_len)).collect()
}
