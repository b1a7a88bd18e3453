//! The structure/label transition system.
//!
//! A configuration is `<z, sigma, t>`: a step counter, a stack of strictly
//! increasing word boundaries starting at 0 (consecutive pairs are the stack
//! spans), and the set of brackets built so far. Even steps take a
//! structural action (shift or combine), odd steps a label action (a label
//! chain or nolabel) on the top span. Every sentence of `n` words takes
//! exactly `4n - 2` steps.

use std::fmt;

use thiserror::Error;

use crate::treebank::{
    brackets_to_tree, Bracket, BracketSet, Chain, LabelInventory, SpanChains, Token, Tree, TreebankError,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransitionError {
    #[error("cannot parse an empty sentence")]
    EmptySentence,
    #[error("configuration is final")]
    Final,
    #[error("action {action} is not legal at step {step} with stack {stack:?}")]
    Illegal { action: String, step: usize, stack: Vec<usize> },
    #[error("no label action is available (empty label inventory)")]
    NoLabels,
    #[error("line {line}: unrecognized action `{text}`")]
    BadTrace { line: usize, text: String },
    #[error(transparent)]
    Tree(#[from] TreebankError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Shift,
    Combine,
    /// Labels the top span with every symbol of the chain.
    Label(Chain),
    NoLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    Shift,
    Combine,
    Label,
    NoLabel,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Shift => ActionKind::Shift,
            Action::Combine => ActionKind::Combine,
            Action::Label(_) => ActionKind::Label,
            Action::NoLabel => ActionKind::NoLabel,
        }
    }

    pub fn is_structural(&self) -> bool {
        matches!(self, Action::Shift | Action::Combine)
    }

    pub fn label(symbol: &str) -> Action {
        Action::Label(Chain::parse(symbol))
    }

    /// Parses one trace line: `SH`, `COMB`, `LABEL S-VP` or `NOLABEL`.
    pub fn parse(text: &str) -> Option<Action> {
        let text = text.trim();
        match text {
            "SH" => Some(Action::Shift),
            "COMB" => Some(Action::Combine),
            "NOLABEL" => Some(Action::NoLabel),
            _ => {
                let rest = text.strip_prefix("LABEL ")?.trim();
                if rest.is_empty() || rest.contains(char::is_whitespace) {
                    return None;
                }
                Some(Action::Label(Chain::parse(rest)))
            }
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Shift => f.write_str("SH"),
            Action::Combine => f.write_str("COMB"),
            Action::Label(c) => write!(f, "LABEL {c}"),
            Action::NoLabel => f.write_str("NOLABEL"),
        }
    }
}

/// One action per line.
pub fn format_trace(actions: &[Action]) -> String {
    let mut out = String::new();
    for a in actions {
        out.push_str(&a.to_string());
        out.push('\n');
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<Action>, TransitionError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| Action::parse(l).ok_or_else(|| TransitionError::BadTrace { line: k + 1, text: l.to_string() }))
        .collect()
}

/// Number of steps in a complete parse of `n` words.
pub fn total_steps(n: usize) -> usize {
    4 * n - 2
}

/// Legal action kinds from raw parts of a configuration. The result is
/// ordered by action id (`Shift < Combine`, `NoLabel` before `Label`).
pub fn legal_kinds_at(step: usize, stack: &[usize], n: usize) -> Vec<ActionKind> {
    let mut out = Vec::with_capacity(2);
    if step.is_multiple_of(2) {
        if *stack.last().unwrap() < n {
            out.push(ActionKind::Shift);
        }
        if stack.len() >= 3 {
            out.push(ActionKind::Combine);
        }
    } else {
        // The last step must label the whole sentence.
        if step + 3 < 4 * n {
            out.push(ActionKind::NoLabel);
        }
        out.push(ActionKind::Label);
    }
    out
}

/// A parser state. Values are immutable: [`Configuration::apply`] returns a
/// new configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    step: usize,
    stack: Vec<usize>,
    brackets: BracketSet,
    chains: SpanChains,
    n: usize,
}

impl Configuration {
    /// The axiom `<0, [0], {}>`.
    pub fn initial(n: usize) -> Result<Configuration, TransitionError> {
        if n == 0 {
            return Err(TransitionError::EmptySentence);
        }
        Ok(Configuration { step: 0, stack: vec![0], brackets: BracketSet::new(), chains: SpanChains::new(), n })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn stack(&self) -> &[usize] {
        &self.stack
    }

    pub fn brackets(&self) -> &BracketSet {
        &self.brackets
    }

    /// Label chains in the order they were assigned, keyed by span.
    pub fn chains(&self) -> &SpanChains {
        &self.chains
    }

    pub fn sentence_len(&self) -> usize {
        self.n
    }

    pub fn is_structural_step(&self) -> bool {
        self.step.is_multiple_of(2)
    }

    pub fn is_final(&self) -> bool {
        self.step == total_steps(self.n)
    }

    /// True for the axiom, which has no stack span yet.
    pub fn is_initial(&self) -> bool {
        self.stack.len() == 1
    }

    /// The top stack span `(i, j)`, if any.
    pub fn top_span(&self) -> Option<(usize, usize)> {
        let k = self.stack.len();
        (k >= 2).then(|| (self.stack[k - 2], self.stack[k - 1]))
    }

    pub fn legal_kinds(&self) -> Result<Vec<ActionKind>, TransitionError> {
        if self.is_final() {
            return Err(TransitionError::Final);
        }
        Ok(legal_kinds_at(self.step, &self.stack, self.n))
    }

    pub fn is_legal(&self, action: &Action) -> bool {
        !self.is_final() && legal_kinds_at(self.step, &self.stack, self.n).contains(&action.kind())
    }

    /// Every legal action, with labels drawn from `inventory` in id order.
    pub fn legal_actions(&self, inventory: &LabelInventory) -> Result<Vec<Action>, TransitionError> {
        let mut out = Vec::new();
        for kind in self.legal_kinds()? {
            match kind {
                ActionKind::Shift => out.push(Action::Shift),
                ActionKind::Combine => out.push(Action::Combine),
                ActionKind::NoLabel => out.push(Action::NoLabel),
                ActionKind::Label => out.extend(inventory.chains().iter().cloned().map(Action::Label)),
            }
        }
        Ok(out)
    }

    pub fn apply(&self, action: &Action) -> Result<Configuration, TransitionError> {
        if !self.is_legal(action) || matches!(action, Action::Label(c) if c.is_empty()) {
            return Err(TransitionError::Illegal {
                action: action.to_string(),
                step: self.step,
                stack: self.stack.clone(),
            });
        }
        let mut next = self.clone();
        match action {
            Action::Shift => {
                let j = *next.stack.last().unwrap();
                next.stack.push(j + 1);
            }
            Action::Combine => {
                let k = next.stack.len();
                next.stack.remove(k - 2);
            }
            Action::Label(chain) => {
                let (i, j) = next.top_span().expect("odd step without a stack span");
                debug_assert!(!next.chains.contains_span((i, j)), "span ({i}, {j}) labeled twice");
                for s in chain.symbols() {
                    next.brackets.insert(Bracket::new(s.clone(), i, j));
                }
                next.chains.push((i, j), chain);
            }
            Action::NoLabel => {}
        }
        next.step += 1;
        Ok(next)
    }

    /// Applies `actions` from the axiom for a sentence of `n` words.
    pub fn replay(n: usize, actions: &[Action]) -> Result<Configuration, TransitionError> {
        let mut c = Configuration::initial(n)?;
        for a in actions {
            c = c.apply(a)?;
        }
        Ok(c)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {:?}, {}>", self.step, self.stack, self.brackets)
    }
}

/// Scores the actions available in a configuration. Implementations carry
/// whatever sentence state they need (for the neural model, the encoding)
/// and must be deterministic.
pub trait ActionScorer {
    /// Scores for `[Shift, Combine]`.
    fn structural_scores(&mut self, c: &Configuration) -> [f64; 2];

    /// Scores for nolabel (index 0) followed by every inventory chain
    /// (index `1 + id`).
    fn label_scores(&mut self, c: &Configuration) -> Vec<f64>;
}

/// Index of the highest score among `allowed`; the first wins ties.
fn argmax(scores: &[f64], allowed: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for k in allowed {
        if best.is_none_or(|b| scores[k] > scores[b]) {
            best = Some(k);
        }
    }
    best
}

/// Picks the best legal action under `scorer`.
pub fn best_action<S: ActionScorer + ?Sized>(
    c: &Configuration,
    scorer: &mut S,
    inventory: &LabelInventory,
) -> Result<Action, TransitionError> {
    let legal = c.legal_kinds()?;
    if c.is_structural_step() {
        if legal.len() == 1 {
            return Ok(if legal[0] == ActionKind::Shift { Action::Shift } else { Action::Combine });
        }
        let scores = scorer.structural_scores(c);
        return Ok(if scores[1] > scores[0] { Action::Combine } else { Action::Shift });
    }
    if inventory.is_empty() && !legal.contains(&ActionKind::NoLabel) {
        return Err(TransitionError::NoLabels);
    }
    let scores = scorer.label_scores(c);
    let first = if legal.contains(&ActionKind::NoLabel) { 0 } else { 1 };
    let best = argmax(&scores, first..=inventory.len()).ok_or(TransitionError::NoLabels)?;
    Ok(if best == 0 { Action::NoLabel } else { Action::Label(inventory.chain(best - 1).clone()) })
}

/// Greedy decoding: exactly `4n - 2` argmax steps with illegal actions
/// masked. Returns the tree and the action sequence.
pub fn decode<S: ActionScorer + ?Sized>(
    tokens: &[Token],
    scorer: &mut S,
    inventory: &LabelInventory,
) -> Result<(Tree, Vec<Action>), TransitionError> {
    let mut c = Configuration::initial(tokens.len())?;
    let mut actions = Vec::with_capacity(total_steps(tokens.len()));
    while !c.is_final() {
        let a = best_action(&c, scorer, inventory)?;
        c = c.apply(&a)?;
        actions.push(a);
    }
    let tree = brackets_to_tree(c.chains(), tokens)?;
    Ok((tree, actions))
}
