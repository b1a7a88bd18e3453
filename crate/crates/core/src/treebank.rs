//! Bracketed constituency trees: reading, normalization, unary collapsing,
//! conversion to and from labeled bracket sets, and the label inventory.
//!
//! Word positions are boundaries: a sentence of `n` words has boundaries
//! `0..=n`, and word `k` occupies the span `(k, k + 1)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Separator between the symbols of a collapsed unary chain (`S-VP`).
pub const CHAIN_SEPARATOR: char = '-';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreebankError {
    #[error("line {line}, column {column}: unbalanced parentheses: {message}")]
    Unbalanced { line: usize, column: usize, message: &'static str },
    #[error("line {line}, column {column}: empty tree")]
    EmptyTree { line: usize, column: usize },
    #[error("line {line}, column {column}: {message}")]
    Malformed { line: usize, column: usize, message: String },
    #[error("tree is empty after normalization")]
    EmptyAfterNormalization,
    #[error("brackets ({}, {}) and ({}, {}) cross", .a.0, .a.1, .b.0, .b.1)]
    Crossing { a: (usize, usize), b: (usize, usize) },
    #[error("no bracket spans the whole sentence (0, {n})")]
    MissingRoot { n: usize },
    #[error("bracket ({i}, {j}) is invalid for a sentence of length {n}")]
    InvalidSpan { i: usize, j: usize, n: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("line {line}: malformed token `{token}`, expected word_TAG")]
    BadToken { line: usize, token: String },
    #[error("tree has no constituent above its words")]
    NoConstituent,
}

pub type Result<T, E = TreebankError> = std::result::Result<T, E>;

/// A word with its part-of-speech tag and optional categorical features.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub word: String,
    pub tag: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extras: Vec<String>,
}

impl Token {
    pub fn new(word: impl Into<String>, tag: impl Into<String>) -> Self {
        Token { word: word.into(), tag: tag.into(), extras: Vec::new() }
    }

    pub fn with_extras(mut self, extras: Vec<String>) -> Self {
        self.extras = extras;
        self
    }
}

/// An n-ary constituency tree. Preterminals are leaves: the tag lives on the
/// token rather than on a separate node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tree {
    Node { label: String, children: Vec<Tree>, span: (usize, usize) },
    Leaf { token: Token, index: usize },
}

impl Tree {
    /// Builds a node whose span is taken from its first and last child.
    ///
    /// Panics if `children` is empty.
    pub fn node(label: impl Into<String>, children: Vec<Tree>) -> Tree {
        let start = children.first().expect("node without children").span().0;
        let end = children.last().expect("node without children").span().1;
        Tree::Node { label: label.into(), children, span: (start, end) }
    }

    pub fn leaf(token: Token, index: usize) -> Tree {
        Tree::Leaf { token, index }
    }

    pub fn span(&self) -> (usize, usize) {
        match self {
            Tree::Node { span, .. } => *span,
            Tree::Leaf { index, .. } => (*index, index + 1),
        }
    }

    /// Node label, or the tag for a leaf.
    pub fn label(&self) -> &str {
        match self {
            Tree::Node { label, .. } => label,
            Tree::Leaf { token, .. } => &token.tag,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf { .. })
    }

    /// Number of words.
    pub fn len(&self) -> usize {
        let (i, j) = self.span();
        j - i
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tokens(&self) -> Vec<Token> {
        let mut out = Vec::with_capacity(self.len());
        self.collect_tokens(&mut out);
        out
    }

    fn collect_tokens(&self, out: &mut Vec<Token>) {
        match self {
            Tree::Node { children, .. } => children.iter().for_each(|c| c.collect_tokens(out)),
            Tree::Leaf { token, .. } => out.push(token.clone()),
        }
    }

    /// Visits nonterminal nodes children-first, left to right. This is the
    /// order in which a bottom-up parser completes them.
    pub fn for_each_node_postorder<'a>(&'a self, f: &mut impl FnMut(&'a str, (usize, usize))) {
        if let Tree::Node { label, children, span } = self {
            for child in children {
                child.for_each_node_postorder(f);
            }
            f(label, *span);
        }
    }

    /// Recomputes every span so that the leftmost word has index 0.
    pub fn reindexed(self) -> Tree {
        let mut next = 0;
        self.reindex_from(&mut next)
    }

    fn reindex_from(self, next: &mut usize) -> Tree {
        match self {
            Tree::Leaf { token, .. } => {
                let index = *next;
                *next += 1;
                Tree::Leaf { token, index }
            }
            Tree::Node { label, children, .. } => {
                let children = children.into_iter().map(|c| c.reindex_from(next)).collect();
                Tree::node(label, children)
            }
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&write_tree(self))
    }
}

/// A nonterminal symbol or an ordered unary chain, outermost symbol first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Chain(Vec<String>);

impl Chain {
    /// Builds a chain, dropping repeated symbols (an `X` over `X` contributes
    /// a single bracket).
    pub fn new<I, S>(symbols: I) -> Chain
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out: Vec<String> = Vec::new();
        for s in symbols {
            let s = s.into();
            if !out.contains(&s) {
                out.push(s);
            }
        }
        Chain(out)
    }

    pub fn single(symbol: impl Into<String>) -> Chain {
        Chain(vec![symbol.into()])
    }

    /// Splits a node label on the chain separator. Labels that begin with the
    /// separator (`-LRB-`) are a single symbol.
    pub fn parse(label: &str) -> Chain {
        if label.starts_with(CHAIN_SEPARATOR) || !label.contains(CHAIN_SEPARATOR) {
            return Chain(vec![label.to_string()]);
        }
        Chain::new(label.split(CHAIN_SEPARATOR).filter(|s| !s.is_empty()))
    }

    pub fn symbols(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Appends the symbols of `inner` below this chain.
    pub fn extend(&mut self, inner: &Chain) {
        for s in &inner.0 {
            if !self.0.contains(s) {
                self.0.push(s.clone());
            }
        }
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for s in &self.0 {
            if !first {
                write!(f, "{}", CHAIN_SEPARATOR)?;
            }
            f.write_str(s)?;
            first = false;
        }
        Ok(())
    }
}

impl From<Chain> for String {
    fn from(c: Chain) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for Chain {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Chain, String> {
        if s.is_empty() {
            return Err("empty label chain".to_string());
        }
        Ok(Chain::parse(&s))
    }
}

/// A labeled span `<X, i, j>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bracket {
    pub i: usize,
    pub j: usize,
    pub label: String,
}

impl Bracket {
    pub fn new(label: impl Into<String>, i: usize, j: usize) -> Bracket {
        Bracket { i, j, label: label.into() }
    }

    pub fn span(&self) -> (usize, usize) {
        (self.i, self.j)
    }
}

impl fmt::Display for Bracket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{},{}>", self.label, self.i, self.j)
    }
}

/// A set of labeled spans with set semantics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BracketSet(BTreeSet<Bracket>);

impl BracketSet {
    pub fn new() -> BracketSet {
        BracketSet::default()
    }

    pub fn insert(&mut self, b: Bracket) -> bool {
        self.0.insert(b)
    }

    pub fn remove(&mut self, b: &Bracket) -> bool {
        self.0.remove(b)
    }

    pub fn contains(&self, b: &Bracket) -> bool {
        self.0.contains(b)
    }

    pub fn contains_labeled(&self, label: &str, i: usize, j: usize) -> bool {
        self.0.contains(&Bracket::new(label, i, j))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Bracket> {
        self.0.iter()
    }

    /// Size of the intersection with `other`.
    pub fn matched(&self, other: &BracketSet) -> usize {
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.0.iter().filter(|b| large.0.contains(b)).count()
    }

    pub fn union(&self, other: &BracketSet) -> BracketSet {
        BracketSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &BracketSet) -> BracketSet {
        BracketSet(self.0.difference(&other.0).cloned().collect())
    }

    pub fn is_subset(&self, other: &BracketSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &BracketSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    /// True when every pair of spans is nested or disjoint.
    pub fn is_non_crossing(&self) -> bool {
        let spans: BTreeSet<(usize, usize)> = self.0.iter().map(Bracket::span).collect();
        check_non_crossing(spans.into_iter()).is_ok()
    }
}

impl FromIterator<Bracket> for BracketSet {
    fn from_iter<I: IntoIterator<Item = Bracket>>(iter: I) -> BracketSet {
        BracketSet(iter.into_iter().collect())
    }
}

impl Extend<Bracket> for BracketSet {
    fn extend<I: IntoIterator<Item = Bracket>>(&mut self, iter: I) {
        self.0.extend(iter)
    }
}

impl<'a> IntoIterator for &'a BracketSet {
    type Item = &'a Bracket;
    type IntoIter = std::collections::btree_set::Iter<'a, Bracket>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for BracketSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, b) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{b}")?;
        }
        f.write_str("}")
    }
}

/// Ordered label chains keyed by span. Unlike a [`BracketSet`] this keeps
/// the outer-to-inner order of a unary chain, which is needed to rebuild a
/// tree.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SpanChains(BTreeMap<(usize, usize), Chain>);

impl SpanChains {
    pub fn new() -> SpanChains {
        SpanChains::default()
    }

    /// Adds `chain` at `span`. If the span already carries a chain, the new
    /// symbols go below the existing ones.
    pub fn push(&mut self, span: (usize, usize), chain: &Chain) {
        match self.0.get_mut(&span) {
            Some(existing) => existing.extend(chain),
            None => {
                self.0.insert(span, chain.clone());
            }
        }
    }

    pub fn get(&self, span: (usize, usize)) -> Option<&Chain> {
        self.0.get(&span)
    }

    pub fn contains_span(&self, span: (usize, usize)) -> bool {
        self.0.contains_key(&span)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &Chain)> {
        self.0.iter().map(|(s, c)| (*s, c))
    }

    pub fn to_brackets(&self) -> BracketSet {
        self.0
            .iter()
            .flat_map(|(&(i, j), chain)| chain.symbols().iter().map(move |s| Bracket::new(s.clone(), i, j)))
            .collect()
    }
}

impl From<&BracketSet> for SpanChains {
    /// Groups brackets by span; symbols sharing a span are ordered by name,
    /// since a plain set carries no chain order.
    fn from(set: &BracketSet) -> SpanChains {
        let mut out = SpanChains::new();
        for b in set {
            out.push(b.span(), &Chain::single(b.label.clone()));
        }
        out
    }
}

/// Verifies that spans (sorted or not) are pairwise nested or disjoint.
pub(crate) fn check_non_crossing(spans: impl Iterator<Item = (usize, usize)>) -> Result<()> {
    let mut sorted: Vec<(usize, usize)> = spans.collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    sorted.dedup();
    let mut open: Vec<(usize, usize)> = Vec::new();
    for s in sorted {
        while let Some(&top) = open.last() {
            if s.0 >= top.1 {
                open.pop();
            } else if s.1 > top.1 {
                return Err(TreebankError::Crossing { a: top, b: s });
            } else {
                break;
            }
        }
        open.push(s);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Reading

#[derive(Debug, Clone, PartialEq)]
enum Lexeme {
    Open,
    Close,
    Atom(String),
}

#[derive(Debug, Clone)]
struct Located {
    lexeme: Lexeme,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Vec<Located> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut column = 0;
    let mut atom = String::new();
    let mut atom_at = (0, 0);
    let flush = |atom: &mut String, at: (usize, usize), out: &mut Vec<Located>| {
        if !atom.is_empty() {
            out.push(Located { lexeme: Lexeme::Atom(std::mem::take(atom)), line: at.0, column: at.1 });
        }
    };
    for ch in text.chars() {
        column += 1;
        match ch {
            '(' | ')' => {
                flush(&mut atom, atom_at, &mut out);
                out.push(Located { lexeme: if ch == '(' { Lexeme::Open } else { Lexeme::Close }, line, column });
            }
            c if c.is_whitespace() => {
                flush(&mut atom, atom_at, &mut out);
                if c == '\n' {
                    line += 1;
                    column = 0;
                }
            }
            c => {
                if atom.is_empty() {
                    atom_at = (line, column);
                }
                atom.push(c);
            }
        }
    }
    flush(&mut atom, atom_at, &mut out);
    out
}

struct Reader {
    lexemes: Vec<Located>,
    pos: usize,
}

impl Reader {
    fn peek(&self) -> Option<&Located> {
        self.lexemes.get(self.pos)
    }

    fn unbalanced(&self, at: &Located, message: &'static str) -> TreebankError {
        TreebankError::Unbalanced { line: at.line, column: at.column, message }
    }

    /// Parses one parenthesized expression starting at an `Open`.
    fn tree(&mut self, next_word: &mut usize) -> Result<Tree> {
        let open = self.lexemes[self.pos].clone();
        self.pos += 1;
        let label = match self.peek() {
            Some(Located { lexeme: Lexeme::Atom(a), .. }) => {
                let a = a.clone();
                self.pos += 1;
                a
            }
            _ => String::new(),
        };
        let mut children = Vec::new();
        let mut word: Option<Located> = None;
        loop {
            let Some(next) = self.peek().cloned() else {
                return Err(self.unbalanced(&open, "missing `)`"));
            };
            match next.lexeme {
                Lexeme::Close => {
                    self.pos += 1;
                    break;
                }
                Lexeme::Open => {
                    if word.is_some() {
                        return Err(malformed(&next, "word and subtree under the same node"));
                    }
                    // Report the outermost unclosed bracket.
                    let child = self.tree(next_word).map_err(|e| match e {
                        TreebankError::Unbalanced { .. } if self.peek().is_none() => {
                            self.unbalanced(&open, "missing `)`")
                        }
                        e => e,
                    })?;
                    children.push(child);
                }
                Lexeme::Atom(_) => {
                    if word.is_some() || !children.is_empty() {
                        return Err(malformed(&next, "unexpected word; preterminals have the form (TAG word)"));
                    }
                    self.pos += 1;
                    word = Some(next);
                }
            }
        }
        match word {
            Some(Located { lexeme: Lexeme::Atom(w), .. }) => {
                if label.is_empty() {
                    return Err(malformed(&open, "word without a tag"));
                }
                let index = *next_word;
                *next_word += 1;
                Ok(Tree::leaf(Token::new(w, label), index))
            }
            _ if children.is_empty() => Err(TreebankError::EmptyTree { line: open.line, column: open.column }),
            _ => Ok(Tree::node(label, children)),
        }
    }
}

fn malformed(at: &Located, message: &str) -> TreebankError {
    TreebankError::Malformed { line: at.line, column: at.column, message: message.to_string() }
}

/// Reads every bracketed tree in `text`. Trees may be one per line or
/// pretty-printed over several lines.
pub fn read_trees(text: &str) -> Result<Vec<Tree>> {
    let mut reader = Reader { lexemes: lex(text), pos: 0 };
    let mut trees = Vec::new();
    while let Some(next) = reader.peek().cloned() {
        match next.lexeme {
            Lexeme::Open => {
                let mut next_word = 0;
                trees.push(reader.tree(&mut next_word)?);
            }
            Lexeme::Close => return Err(reader.unbalanced(&next, "unexpected `)`")),
            Lexeme::Atom(_) => return Err(malformed(&next, "text outside of a tree")),
        }
    }
    Ok(trees)
}

// ---------------------------------------------------------------------------
// Normalization

/// Treebank clean-up applied before training or evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationRules {
    /// Tag marking empty elements and traces.
    pub null_tag: String,
    /// Labels of a root wrapper node removed when it has a single child.
    /// The empty label covers the unlabeled `( (S ...) )` wrapper.
    pub root_labels: Vec<String>,
    pub strip_function_tags: bool,
}

impl Default for NormalizationRules {
    fn default() -> Self {
        NormalizationRules {
            null_tag: "-NONE-".to_string(),
            root_labels: vec!["TOP".to_string(), String::new()],
            strip_function_tags: true,
        }
    }
}

/// `NP-SBJ-1` becomes `NP`, `S=2` becomes `S`; `-LRB-` is left alone.
pub fn strip_function_tag(label: &str) -> &str {
    if label.starts_with('-') {
        return label;
    }
    match label.find(['-', '=']) {
        Some(0) | None => label,
        Some(k) => &label[..k],
    }
}

pub fn normalize(tree: Tree, rules: &NormalizationRules) -> Result<Tree> {
    let mut tree = prune(tree, rules).ok_or(TreebankError::EmptyAfterNormalization)?;
    loop {
        match tree {
            Tree::Node { ref label, ref children, .. }
                if children.len() == 1 && !children[0].is_leaf() && rules.root_labels.iter().any(|r| r == label) =>
            {
                let Tree::Node { mut children, .. } = tree else { unreachable!() };
                tree = children.pop().unwrap();
            }
            _ => break,
        }
    }
    Ok(tree.reindexed())
}

fn prune(tree: Tree, rules: &NormalizationRules) -> Option<Tree> {
    match tree {
        Tree::Leaf { ref token, .. } if token.tag == rules.null_tag => None,
        leaf @ Tree::Leaf { .. } => Some(leaf),
        Tree::Node { label, children, .. } => {
            let children: Vec<Tree> = children.into_iter().filter_map(|c| prune(c, rules)).collect();
            if children.is_empty() {
                return None;
            }
            let label = if rules.strip_function_tags { strip_function_tag(&label).to_string() } else { label };
            Some(Tree::node(label, children))
        }
    }
}

/// Merges every chain of nonterminal-over-nonterminal unary productions into
/// one node labeled with the chain, outermost first (`S-VP`). Preterminals
/// never join a chain.
pub fn collapse_unaries(tree: Tree) -> Tree {
    match tree {
        leaf @ Tree::Leaf { .. } => leaf,
        Tree::Node { label, children, span } => {
            let mut children: Vec<Tree> = children.into_iter().map(collapse_unaries).collect();
            if children.len() == 1 && !children[0].is_leaf() {
                let Some(Tree::Node { label: inner, children: grandchildren, .. }) = children.pop() else {
                    unreachable!()
                };
                let mut chain = Chain::parse(&label);
                chain.extend(&Chain::parse(&inner));
                return Tree::Node { label: chain.to_string(), children: grandchildren, span };
            }
            Tree::Node { label, children, span }
        }
    }
}

/// Full preprocessing used throughout: normalize, then collapse unaries.
pub fn prepare(tree: Tree, rules: &NormalizationRules) -> Result<Tree> {
    normalize(tree, rules).map(collapse_unaries)
}

// ---------------------------------------------------------------------------
// Brackets

/// Ordered chains of every nonterminal node, keyed by span.
pub fn tree_span_chains(tree: &Tree) -> SpanChains {
    fn walk(t: &Tree, out: &mut SpanChains) {
        if let Tree::Node { label, children, span } = t {
            out.push(*span, &Chain::parse(label));
            children.iter().for_each(|c| walk(c, out));
        }
    }
    let mut out = SpanChains::new();
    walk(tree, &mut out);
    out
}

pub fn tree_to_brackets(tree: &Tree) -> BracketSet {
    tree_span_chains(tree).to_brackets()
}

/// Rebuilds the tree described by `chains` over `tokens`.
pub fn brackets_to_tree(chains: &SpanChains, tokens: &[Token]) -> Result<Tree> {
    let n = tokens.len();
    for ((i, j), _) in chains.iter() {
        if i >= j || j > n {
            return Err(TreebankError::InvalidSpan { i, j, n });
        }
    }
    check_non_crossing(chains.iter().map(|(s, _)| s))?;
    let Some(root_chain) = chains.get((0, n)) else {
        return Err(TreebankError::MissingRoot { n });
    };
    let mut spans: Vec<((usize, usize), &Chain)> = chains.iter().filter(|(s, _)| *s != (0, n)).collect();
    spans.sort_by(|a, b| a.0 .0.cmp(&b.0 .0).then(b.0 .1.cmp(&a.0 .1)));
    Ok(build_node((0, n), root_chain, &spans, tokens))
}

fn build_node(span: (usize, usize), chain: &Chain, inner: &[((usize, usize), &Chain)], tokens: &[Token]) -> Tree {
    let mut children = Vec::new();
    let mut pos = span.0;
    let mut k = 0;
    while k < inner.len() {
        let (s, c) = inner[k];
        children.extend((pos..s.0).map(|w| Tree::leaf(tokens[w].clone(), w)));
        let mut end = k + 1;
        while end < inner.len() && inner[end].0 .1 <= s.1 {
            end += 1;
        }
        children.push(build_node(s, c, &inner[k + 1..end], tokens));
        pos = s.1;
        k = end;
    }
    children.extend((pos..span.1).map(|w| Tree::leaf(tokens[w].clone(), w)));
    Tree::Node { label: chain.to_string(), children, span }
}

// ---------------------------------------------------------------------------
// Writing

/// Single-line bracketed form. Chain labels are expanded into nested unary
/// nodes.
pub fn write_tree(tree: &Tree) -> String {
    let mut out = String::new();
    write_into(tree, &mut out);
    out
}

fn write_into(tree: &Tree, out: &mut String) {
    match tree {
        Tree::Leaf { token, .. } => {
            out.push('(');
            out.push_str(&token.tag);
            out.push(' ');
            out.push_str(&token.word);
            out.push(')');
        }
        Tree::Node { label, children, .. } => {
            let chain = Chain::parse(label);
            for s in chain.symbols() {
                out.push('(');
                out.push_str(s);
                out.push(' ');
            }
            for (k, c) in children.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                write_into(c, out);
            }
            for _ in chain.symbols() {
                out.push(')');
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Tagged input

/// Parses one line of `word_TAG` tokens; the last underscore splits.
pub fn parse_tagged_line(line: &str, line_no: usize) -> Result<Vec<Token>> {
    line.split_whitespace()
        .map(|tok| match tok.rsplit_once('_') {
            Some((w, t)) if !w.is_empty() && !t.is_empty() => Ok(Token::new(w, t)),
            _ => Err(TreebankError::BadToken { line: line_no, token: tok.to_string() }),
        })
        .collect()
}

/// Reads tagged sentences, one per line. Blank lines are skipped.
pub fn read_tagged(text: &str) -> Result<Vec<Vec<Token>>> {
    text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(k, l)| parse_tagged_line(l, k + 1)).collect()
}

pub fn format_tagged(tokens: &[Token]) -> String {
    tokens.iter().map(|t| format!("{}_{}", t.word, t.tag)).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------
// Label inventory

/// Label actions seen in training: single nonterminals and unary chains,
/// with dense ids in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "InventoryRepr", into = "InventoryRepr")]
pub struct LabelInventory {
    chains: Vec<Chain>,
    index: HashMap<Chain, usize>,
    root_counts: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct InventoryRepr {
    chains: Vec<Chain>,
    root_counts: Vec<usize>,
}

impl From<InventoryRepr> for LabelInventory {
    fn from(r: InventoryRepr) -> Self {
        let mut inv = LabelInventory::from_chains(r.chains);
        if r.root_counts.len() == inv.len() {
            inv.root_counts = r.root_counts;
        }
        inv
    }
}

impl From<LabelInventory> for InventoryRepr {
    fn from(inv: LabelInventory) -> Self {
        InventoryRepr { chains: inv.chains, root_counts: inv.root_counts }
    }
}

impl LabelInventory {
    pub fn from_chains(chains: impl IntoIterator<Item = Chain>) -> LabelInventory {
        let mut inv = LabelInventory::default();
        for c in chains {
            inv.insert(c);
        }
        inv
    }

    fn insert(&mut self, chain: Chain) -> usize {
        if let Some(&id) = self.index.get(&chain) {
            return id;
        }
        let id = self.chains.len();
        self.index.insert(chain.clone(), id);
        self.chains.push(chain);
        self.root_counts.push(0);
        id
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn id(&self, chain: &Chain) -> Option<usize> {
        self.index.get(chain).copied()
    }

    pub fn chain(&self, id: usize) -> &Chain {
        &self.chains[id]
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    /// The chain that most often labels a whole sentence in training.
    pub fn most_frequent_root(&self) -> Option<&Chain> {
        let mut best: Option<usize> = None;
        for (id, &count) in self.root_counts.iter().enumerate() {
            if count > 0 && best.is_none_or(|b| count > self.root_counts[b]) {
                best = Some(id);
            }
        }
        best.or(if self.is_empty() { None } else { Some(0) }).map(|id| &self.chains[id])
    }
}

/// Collects every distinct node label of a collapsed corpus, in the order a
/// bottom-up parse first produces them.
pub fn build_label_inventory(corpus: &[Tree]) -> Result<LabelInventory> {
    if corpus.is_empty() {
        return Err(TreebankError::EmptyCorpus);
    }
    let mut inv = LabelInventory::default();
    for tree in corpus {
        tree.for_each_node_postorder(&mut |label, _| {
            inv.insert(Chain::parse(label));
        });
        if let Tree::Node { label, .. } = tree {
            let id = inv.insert(Chain::parse(label));
            inv.root_counts[id] += 1;
        }
    }
    Ok(inv)
}
