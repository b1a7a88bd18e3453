//! Static and dynamic oracles.
//!
//! The static oracle reads the unique combine-first action sequence off a
//! gold tree. The dynamic oracle works from any configuration: it tracks the
//! smallest reachable gold bracket strictly encompassing the top span
//! (`next`) with a cursor over parent links, and derives the optimal
//! structural actions from how that bracket sits relative to the top span.

pub mod brute;
pub mod verify;

use thiserror::Error;

use crate::transition::{legal_kinds_at, Action, ActionKind, Configuration, TransitionError};
use crate::treebank::{
    check_non_crossing, tree_span_chains, Bracket, BracketSet, Chain, SpanChains, Tree, TreebankError,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("gold tree has no bracket over the whole sentence (0, {n})")]
    MissingRoot { n: usize },
    #[error("gold span ({i}, {j}) is outside a sentence of {n} words")]
    InvalidSpan { i: usize, j: usize, n: usize },
    #[error("no reachable gold bracket encompasses the top span")]
    NoNextBracket,
    #[error("structural oracle queried at a label step")]
    NotStructural,
    #[error("configuration is final")]
    Final,
    #[error("enumeration guard exceeded: {0}")]
    Guard(String),
    #[error(transparent)]
    Tree(#[from] TreebankError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

pub type Result<T, E = OracleError> = std::result::Result<T, E>;

/// The unique combine-first action sequence that builds `gold` (a collapsed
/// tree). Every span is labeled as soon as it is created, and two stack
/// spans are combined as soon as both belong to the same gold node.
pub fn static_oracle(gold: &Tree) -> Vec<Action> {
    let chains = tree_span_chains(gold);
    let mut out = Vec::with_capacity(4 * gold.len());
    emit(gold, &chains, &mut out);
    out
}

fn label_for(chains: &SpanChains, span: (usize, usize)) -> Action {
    match chains.get(span) {
        Some(c) => Action::Label(c.clone()),
        None => Action::NoLabel,
    }
}

fn emit(t: &Tree, chains: &SpanChains, out: &mut Vec<Action>) {
    emit_structure(t, chains, out);
    out.push(label_for(chains, t.span()));
}

/// Actions that leave `t`'s span on top of the stack, before its label step.
fn emit_structure(t: &Tree, chains: &SpanChains, out: &mut Vec<Action>) {
    match t {
        Tree::Leaf { .. } => out.push(Action::Shift),
        Tree::Node { children, .. } if children.len() == 1 => emit_structure(&children[0], chains, out),
        Tree::Node { children, span, .. } => {
            emit(&children[0], chains, out);
            for (k, child) in children.iter().enumerate().skip(1) {
                emit(child, chains, out);
                out.push(Action::Combine);
                if k + 1 < children.len() {
                    out.push(label_for(chains, (span.0, child.span().1)));
                }
            }
        }
    }
}

/// A gold bracket with a link to the smallest gold bracket above it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldNode {
    pub bracket: Bracket,
    pub parent: Option<usize>,
}

impl GoldNode {
    pub fn span(&self) -> (usize, usize) {
        self.bracket.span()
    }
}

/// Immutable view of a gold tree for the dynamic oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldTreeIndex {
    n: usize,
    /// Innermost first: ascending width, and inner before outer within a
    /// unary chain.
    nodes: Vec<GoldNode>,
    chains: SpanChains,
    /// Node ids by left boundary, sorted by right boundary and then inner
    /// before outer.
    starts: Vec<Vec<usize>>,
    brackets: BracketSet,
}

impl GoldTreeIndex {
    pub fn build(chains: &SpanChains, n: usize) -> Result<GoldTreeIndex> {
        for ((i, j), _) in chains.iter() {
            if i >= j || j > n {
                return Err(OracleError::InvalidSpan { i, j, n });
            }
        }
        if chains.get((0, n)).is_none() {
            return Err(OracleError::MissingRoot { n });
        }
        check_non_crossing(chains.iter().map(|(s, _)| s))?;

        let mut spans: Vec<((usize, usize), &Chain)> = chains.iter().collect();
        spans.sort_by_key(|&((i, j), _)| (j - i, i));
        let mut nodes = Vec::new();
        let mut innermost = std::collections::HashMap::new();
        let mut outermost = std::collections::HashMap::new();
        for &(span, chain) in &spans {
            innermost.insert(span, nodes.len());
            for (k, symbol) in chain.symbols().iter().enumerate().rev() {
                let id = nodes.len();
                nodes.push(GoldNode {
                    bracket: Bracket::new(symbol.clone(), span.0, span.1),
                    parent: (k > 0).then_some(id + 1),
                });
            }
            outermost.insert(span, nodes.len() - 1);
        }

        // Sweep spans outer-to-inner; the enclosing open span is the parent.
        let mut by_start: Vec<(usize, usize)> = spans.iter().map(|(s, _)| *s).collect();
        by_start.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut open: Vec<(usize, usize)> = Vec::new();
        for s in by_start {
            while let Some(&top) = open.last() {
                if top.1 <= s.0 {
                    open.pop();
                } else {
                    break;
                }
            }
            if let Some(&outer) = open.last() {
                nodes[outermost[&s]].parent = Some(innermost[&outer]);
            }
            open.push(s);
        }

        let mut starts = vec![Vec::new(); n + 1];
        for (id, node) in nodes.iter().enumerate() {
            starts[node.bracket.i].push(id);
        }
        for list in &mut starts {
            list.sort_by_key(|&id| (nodes[id].bracket.j, id));
        }
        let brackets = chains.to_brackets();
        Ok(GoldTreeIndex { n, nodes, chains: chains.clone(), starts, brackets })
    }

    pub fn from_tree(gold: &Tree) -> Result<GoldTreeIndex> {
        GoldTreeIndex::build(&tree_span_chains(gold), gold.len())
    }

    /// Builds from a plain bracket set; symbols sharing a span form a chain
    /// in name order.
    pub fn from_brackets(gold: &BracketSet, n: usize) -> Result<GoldTreeIndex> {
        GoldTreeIndex::build(&SpanChains::from(gold), n)
    }

    pub fn sentence_len(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[GoldNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &GoldNode {
        &self.nodes[id]
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.nodes[id].parent
    }

    pub fn brackets(&self) -> &BracketSet {
        &self.brackets
    }

    pub fn chains(&self) -> &SpanChains {
        &self.chains
    }

    /// The gold chain at `span`, if the span is a gold constituent.
    pub fn chain_at(&self, span: (usize, usize)) -> Option<&Chain> {
        self.chains.get(span)
    }

    /// Node id of `bracket`, if it is gold.
    pub fn find(&self, bracket: &Bracket) -> Option<usize> {
        self.starts.get(bracket.i)?.iter().copied().find(|&id| self.nodes[id].bracket == *bracket)
    }
}

/// `(i, j)` is inside `(p, q)`.
fn encompasses(outer: (usize, usize), inner: (usize, usize)) -> bool {
    outer.0 <= inner.0 && inner.1 <= outer.1
}

/// Gold brackets encompassing the top span whose left boundary is on the
/// stack. Strict at even steps, non-strict at odd steps.
pub fn left(c: &Configuration, idx: &GoldTreeIndex) -> BracketSet {
    let Some(top) = c.top_span() else {
        return BracketSet::new();
    };
    let strict = c.is_structural_step();
    let stack = &c.stack()[..c.stack().len() - 1];
    idx.nodes
        .iter()
        .filter(|node| {
            let s = node.span();
            encompasses(s, top) && !(strict && s == top) && stack.binary_search(&s.0).is_ok()
        })
        .map(|node| node.bracket.clone())
        .collect()
}

/// Gold brackets lying entirely on the queue.
pub fn right(c: &Configuration, idx: &GoldTreeIndex) -> BracketSet {
    let j = *c.stack().last().unwrap();
    idx.nodes.iter().filter(|node| node.bracket.i >= j).map(|node| node.bracket.clone()).collect()
}

/// Gold brackets that some continuation of `c` can still build.
pub fn reach(c: &Configuration, idx: &GoldTreeIndex) -> BracketSet {
    if c.is_initial() {
        return idx.brackets.clone();
    }
    left(c, idx).union(&right(c, idx))
}

/// The best tree reachable from `c`: what is built plus everything gold that
/// is still reachable.
pub fn t_star(c: &Configuration, idx: &GoldTreeIndex) -> BracketSet {
    c.brackets().union(&reach(c, idx))
}

/// `next` by a linear scan over the gold nodes: the innermost gold bracket
/// strictly encompassing the top span with its left boundary on the stack.
pub fn next_bracket_scan<'a>(c: &Configuration, idx: &'a GoldTreeIndex) -> Option<&'a Bracket> {
    let top = c.top_span()?;
    let stack = &c.stack()[..c.stack().len() - 1];
    idx.nodes
        .iter()
        .find(|node| {
            let s = node.span();
            s != top && encompasses(s, top) && stack.binary_search(&s.0).is_ok()
        })
        .map(|node| &node.bracket)
}

/// Per-trajectory cursor over parent links that keeps `next` up to date in
/// amortized constant time.
#[derive(Debug, Clone)]
pub struct OracleState<'a> {
    index: &'a GoldTreeIndex,
    cursor: Option<usize>,
    on_stack: Vec<bool>,
    traversals: usize,
    steps: usize,
}

impl<'a> OracleState<'a> {
    /// State for the initial configuration.
    pub fn new(index: &'a GoldTreeIndex) -> OracleState<'a> {
        let mut on_stack = vec![false; index.n + 1];
        on_stack[0] = true;
        OracleState { index, cursor: None, on_stack, traversals: 0, steps: 0 }
    }

    pub fn index(&self) -> &'a GoldTreeIndex {
        self.index
    }

    /// Nodes examined while moving the cursor so far.
    pub fn traversals(&self) -> usize {
        self.traversals
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn next_node(&self) -> Option<usize> {
        self.cursor
    }

    pub fn next_bracket(&self) -> Result<&'a Bracket> {
        self.cursor.map(|id| &self.index.nodes[id].bracket).ok_or(OracleError::NoNextBracket)
    }

    /// Updates the cursor for `action` taken in `before`.
    pub fn advance(&mut self, before: &Configuration, action: &Action) {
        self.steps += 1;
        let stack = before.stack();
        match action {
            Action::Shift => {
                let j = *stack.last().unwrap();
                self.on_stack[j + 1] = true;
                let mut found = None;
                for &id in &self.index.starts[j] {
                    if self.index.nodes[id].bracket.j > j + 1 {
                        found = Some(id);
                        break;
                    }
                    self.traversals += 1;
                }
                self.cursor = match found {
                    Some(id) => Some(id),
                    None => {
                        let on_stack = std::mem::take(&mut self.on_stack);
                        let cur = self.climb(|node| node.bracket.j <= j || !on_stack[node.bracket.i]);
                        self.on_stack = on_stack;
                        cur
                    }
                };
            }
            Action::Combine => {
                let k = stack.len();
                let (removed, left_end, j) = (stack[k - 2], stack[k - 3], stack[k - 1]);
                self.on_stack[removed] = false;
                let on_stack = std::mem::take(&mut self.on_stack);
                self.cursor = self.climb(|node| !on_stack[node.bracket.i] || node.span() == (left_end, j));
                self.on_stack = on_stack;
            }
            Action::Label(_) | Action::NoLabel => {}
        }
    }

    fn climb(&mut self, invalid: impl Fn(&GoldNode) -> bool) -> Option<usize> {
        let mut cur = self.cursor;
        while let Some(id) = cur {
            if !invalid(&self.index.nodes[id]) {
                break;
            }
            self.traversals += 1;
            cur = self.index.nodes[id].parent;
        }
        cur
    }
}

/// A deliberate oracle bug, for checking that the verification harness
/// notices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InjectedFault {
    /// Answers combine where only shift keeps the next bracket reachable.
    FlipShiftCase,
}

/// Optimal structural actions given the span of `next`, in id order.
pub fn structural_from_next(
    c: &Configuration,
    next: Option<(usize, usize)>,
    fault: Option<InjectedFault>,
) -> Result<Vec<Action>> {
    if c.is_final() {
        return Err(OracleError::Final);
    }
    if !c.is_structural_step() {
        return Err(OracleError::NotStructural);
    }
    let Some((i, j)) = c.top_span() else {
        return Ok(vec![Action::Shift]);
    };
    let (p, q) = next.ok_or(OracleError::NoNextBracket)?;
    debug_assert!((p, q) != (i, j) && p <= i && q >= j);
    let (shift, combine) = if p == i {
        if fault == Some(InjectedFault::FlipShiftCase) {
            (false, true)
        } else {
            (true, false)
        }
    } else if q == j {
        (false, true)
    } else {
        (true, true)
    };
    let legal = legal_kinds_at(c.step(), c.stack(), c.sentence_len());
    let mut out = Vec::with_capacity(2);
    if shift && legal.contains(&ActionKind::Shift) {
        out.push(Action::Shift);
    }
    if combine && legal.contains(&ActionKind::Combine) {
        out.push(Action::Combine);
    }
    Ok(out)
}

pub fn dyna_structural(c: &Configuration, state: &OracleState<'_>) -> Result<Vec<Action>> {
    let next = state.next_bracket().ok().map(Bracket::span);
    structural_from_next(c, next, None)
}

/// Labels the top span with its gold chain, or not at all. Gold indexes
/// always carry a root chain, so the forced final label is always gold.
pub fn dyna_label(c: &Configuration, idx: &GoldTreeIndex) -> Result<Action> {
    if c.is_final() {
        return Err(OracleError::Final);
    }
    let top = c.top_span().ok_or(OracleError::NotStructural)?;
    Ok(match idx.chain_at(top) {
        Some(chain) => Action::Label(chain.clone()),
        None => Action::NoLabel,
    })
}

/// The full dynamic-oracle action set for `c`.
pub fn dyna(c: &Configuration, state: &OracleState<'_>) -> Result<Vec<Action>> {
    dyna_with(c, state, None)
}

pub fn dyna_with(c: &Configuration, state: &OracleState<'_>, fault: Option<InjectedFault>) -> Result<Vec<Action>> {
    if c.is_structural_step() {
        let next = state.next_bracket().ok().map(Bracket::span);
        structural_from_next(c, next, fault)
    } else {
        Ok(vec![dyna_label(c, state.index())?])
    }
}

/// Follows the dynamic oracle from `c` to a final configuration. When both
/// structural actions are optimal, `prefer_combine` picks which.
pub fn rollout(
    c: &Configuration,
    state: &OracleState<'_>,
    prefer_combine: bool,
    fault: Option<InjectedFault>,
) -> Result<Configuration> {
    let mut c = c.clone();
    let mut state = state.clone();
    while !c.is_final() {
        let set = dyna_with(&c, &state, fault)?;
        let a = if prefer_combine { set.last() } else { set.first() }.cloned().ok_or(OracleError::NoNextBracket)?;
        state.advance(&c, &a);
        c = c.apply(&a)?;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transition::parse_trace;
    use crate::treebank::{collapse_unaries, read_trees, tree_to_brackets};
    use proptest::prelude::*;

    const EXAMPLE: &str = "(S (NP (PRP I)) (VP (MD do) (VBP like) (S (VP (VBG eating) (NP (NN fish))))))";

    fn example() -> Tree {
        collapse_unaries(read_trees(EXAMPLE).unwrap().remove(0))
    }

    fn example_trace() -> Vec<Action> {
        parse_trace(
            "SH\nLABEL NP\nSH\nNOLABEL\nSH\nNOLABEL\nCOMB\nNOLABEL\nSH\nNOLABEL\nSH\nLABEL NP\nCOMB\nLABEL S-VP\nCOMB\nLABEL VP\nCOMB\nLABEL S\n",
        )
        .unwrap()
    }

    fn br(l: &str, i: usize, j: usize) -> Bracket {
        Bracket::new(l, i, j)
    }

    fn set(items: &[(&str, usize, usize)]) -> BracketSet {
        items.iter().map(|&(l, i, j)| br(l, i, j)).collect()
    }

    /// Replays `actions`, keeping the cursor in step.
    fn replay<'a>(idx: &'a GoldTreeIndex, actions: &[Action]) -> (Configuration, OracleState<'a>) {
        let mut c = Configuration::initial(idx.sentence_len()).unwrap();
        let mut st = OracleState::new(idx);
        for a in actions {
            st.advance(&c, a);
            c = c.apply(a).unwrap();
        }
        (c, st)
    }

    #[test]
    fn static_oracle_reproduces_running_example() {
        assert_eq!(static_oracle(&example()), example_trace());
    }

    #[test]
    fn static_oracle_single_leaf() {
        let t = collapse_unaries(read_trees("(NP (NN fish))").unwrap().remove(0));
        assert_eq!(static_oracle(&t), [Action::Shift, Action::label("NP")]);
    }

    #[test]
    fn static_oracle_flat_node_combines_early() {
        let t = collapse_unaries(read_trees("(X (A a) (B b) (C c))").unwrap().remove(0));
        let expect = parse_trace("SH\nNOLABEL\nSH\nNOLABEL\nCOMB\nNOLABEL\nSH\nNOLABEL\nCOMB\nLABEL X\n").unwrap();
        assert_eq!(static_oracle(&t), expect);
    }

    #[test]
    fn parent_links_follow_nesting() {
        let idx = GoldTreeIndex::from_tree(&example()).unwrap();
        let parent_of = |b: Bracket| {
            let id = idx.find(&b).unwrap();
            idx.parent(id).map(|p| idx.node(p).bracket.clone())
        };
        assert_eq!(parent_of(br("NP", 4, 5)), Some(br("VP", 3, 5)));
        assert_eq!(parent_of(br("VP", 3, 5)), Some(br("S", 3, 5)));
        assert_eq!(parent_of(br("S", 3, 5)), Some(br("VP", 1, 5)));
        assert_eq!(parent_of(br("VP", 1, 5)), Some(br("S", 0, 5)));
        assert_eq!(parent_of(br("NP", 0, 1)), Some(br("S", 0, 5)));
        assert_eq!(parent_of(br("S", 0, 5)), None);
        // Innermost first.
        let order: Vec<String> = idx.nodes().iter().map(|n| n.bracket.to_string()).collect();
        assert_eq!(order, ["<NP,0,1>", "<NP,4,5>", "<VP,3,5>", "<S,3,5>", "<VP,1,5>", "<S,0,5>"]);
    }

    #[test]
    fn index_edge_cases() {
        let idx = GoldTreeIndex::from_brackets(&set(&[("NP", 0, 1)]), 1).unwrap();
        assert_eq!(idx.parent(0), None);
        let crossing = GoldTreeIndex::from_brackets(&set(&[("A", 0, 2), ("B", 1, 3), ("R", 0, 3)]), 3);
        assert!(matches!(crossing, Err(OracleError::Tree(TreebankError::Crossing { .. }))));
        assert_eq!(GoldTreeIndex::from_brackets(&set(&[("A", 0, 2)]), 3), Err(OracleError::MissingRoot { n: 3 }));
    }

    #[test]
    fn reach_of_crossing_configuration() {
        let idx = GoldTreeIndex::from_tree(&example()).unwrap();
        let acts = parse_trace("SH\nLABEL NP\nSH\nNOLABEL\nSH\nNOLABEL\nSH\nNOLABEL\nCOMB\nNOLABEL\n").unwrap();
        let (c, _) = replay(&idx, &acts);
        assert_eq!(c.step(), 10);
        assert_eq!(c.stack(), [0, 1, 2, 4]);
        assert_eq!(c.brackets(), &set(&[("NP", 0, 1)]));
        assert_eq!(reach(&c, &idx), set(&[("S", 0, 5), ("VP", 1, 5), ("NP", 4, 5)]));
        assert_eq!(t_star(&c, &idx), set(&[("NP", 0, 1), ("S", 0, 5), ("VP", 1, 5), ("NP", 4, 5)]));
    }

    #[test]
    fn reach_at_ends() {
        let idx = GoldTreeIndex::from_tree(&example()).unwrap();
        let c0 = Configuration::initial(5).unwrap();
        assert_eq!(reach(&c0, &idx), tree_to_brackets(&example()));
        assert_eq!(t_star(&c0, &idx), tree_to_brackets(&example()));
        let (done, _) = replay(&idx, &example_trace());
        assert!(reach(&done, &idx).is_empty());
        assert_eq!(t_star(&done, &idx), *done.brackets());
    }

    #[test]
    fn next_on_gold_path_after_first_label() {
        let idx = GoldTreeIndex::from_tree(&example()).unwrap();
        let (c, st) = replay(&idx, &example_trace()[..2]);
        assert_eq!(c.stack(), [0, 1]);
        assert_eq!(st.next_bracket().unwrap(), &br("S", 0, 5));
        assert_eq!(next_bracket_scan(&c, &idx), Some(&br("S", 0, 5)));
    }

    fn fig4_rows() -> Vec<Vec<Action>> {
        vec![
            // [0,1,2,3]: "I", "do", "like" shifted.
            parse_trace("SH\nLABEL NP\nSH\nNOLABEL\nSH\nNOLABEL\n").unwrap(),
            // [0,1,3] with "do like" mislabeled VP.
            parse_trace("SH\nLABEL NP\nSH\nNOLABEL\nSH\nNOLABEL\nCOMB\nLABEL VP\n").unwrap(),
            // [0,1,2,4]: "like eating" combined.
            parse_trace("SH\nLABEL NP\nSH\nNOLABEL\nSH\nNOLABEL\nSH\nNOLABEL\nCOMB\nNOLABEL\n").unwrap(),
            // [0,1,2,4,5]: then "fish" shifted.
            parse_trace("SH\nLABEL NP\nSH\nNOLABEL\nSH\nNOLABEL\nSH\nNOLABEL\nCOMB\nNOLABEL\nSH\nLABEL NP\n").unwrap(),
        ]
    }

    #[test]
    fn structural_oracle_examples() {
        let idx = GoldTreeIndex::from_tree(&example()).unwrap();
        let expected = [
            vec![Action::Shift, Action::Combine],
            vec![Action::Shift],
            vec![Action::Shift, Action::Combine],
            vec![Action::Combine],
        ];
        for (acts, want) in fig4_rows().iter().zip(expected) {
            let (c, st) = replay(&idx, acts);
            assert_eq!(st.next_bracket().unwrap(), &br("VP", 1, 5), "{c}");
            assert_eq!(next_bracket_scan(&c, &idx), Some(&br("VP", 1, 5)));
            assert_eq!(dyna_structural(&c, &st).unwrap(), want, "{c}");
        }
        let c0 = Configuration::initial(5).unwrap();
        assert_eq!(dyna_structural(&c0, &OracleState::new(&idx)).unwrap(), [Action::Shift]);
    }

    #[test]
    fn injected_fault_changes_the_shift_case() {
        let idx = GoldTreeIndex::from_tree(&example()).unwrap();
        let (c, st) = replay(&idx, &fig4_rows()[1]);
        assert_eq!(dyna_with(&c, &st, Some(InjectedFault::FlipShiftCase)).unwrap(), [Action::Combine]);
    }

    #[test]
    fn label_oracle_examples() {
        let idx = GoldTreeIndex::from_tree(&example()).unwrap();
        let t = example_trace();
        for (prefix, want) in [(11, Action::label("NP")), (13, Action::label("S-VP")), (5, Action::NoLabel)] {
            let (c, _) = replay(&idx, &t[..prefix]);
            assert_eq!(dyna_label(&c, &idx).unwrap(), want);
        }
    }

    #[test]
    fn static_action_is_always_in_dyna_on_the_gold_path() {
        let idx = GoldTreeIndex::from_tree(&example()).unwrap();
        let mut c = Configuration::initial(5).unwrap();
        let mut st = OracleState::new(&idx);
        for a in example_trace() {
            assert!(dyna(&c, &st).unwrap().contains(&a), "{c} {a}");
            st.advance(&c, &a);
            c = c.apply(&a).unwrap();
        }
        assert!(st.traversals() <= idx.nodes().len() + st.steps());
    }

    #[test]
    fn rollout_from_crossing_configuration_reaches_t_star() {
        let idx = GoldTreeIndex::from_tree(&example()).unwrap();
        for acts in fig4_rows() {
            let (c, st) = replay(&idx, &acts);
            for prefer in [false, true] {
                let done = rollout(&c, &st, prefer, None).unwrap();
                assert_eq!(*done.brackets(), t_star(&c, &idx));
            }
        }
    }

    fn arb_tree() -> impl Strategy<Value = Tree> {
        (1usize..10, any::<u64>()).prop_map(|(n, seed)| crate::synth::random_tree(n, 3, seed))
    }

    proptest! {
        #[test]
        fn static_oracle_round_trips(tree in arb_tree()) {
            let acts = static_oracle(&tree);
            prop_assert_eq!(acts.len(), 4 * tree.len() - 2);
            let c = Configuration::replay(tree.len(), &acts).unwrap();
            prop_assert_eq!(c.brackets(), &tree_to_brackets(&tree));
        }

        #[test]
        fn cursor_matches_scan_on_random_trajectories(tree in arb_tree(), choices in prop::collection::vec(any::<u8>(), 1..64)) {
            let idx = GoldTreeIndex::from_tree(&tree).unwrap();
            let inventory = crate::treebank::LabelInventory::from_chains(
                idx.chains().iter().map(|(_, c)| c.clone()));
            let mut c = Configuration::initial(tree.len()).unwrap();
            let mut st = OracleState::new(&idx);
            let mut k = 0;
            while !c.is_final() {
                prop_assert_eq!(st.next_bracket().ok(), next_bracket_scan(&c, &idx));
                prop_assert!(reach(&c, &idx).is_disjoint(c.brackets()));
                let legal = c.legal_actions(&inventory).unwrap();
                let a = legal[choices[k % choices.len()] as usize % legal.len()].clone();
                k += 1;
                st.advance(&c, &a);
                c = c.apply(&a).unwrap();
            }
            prop_assert!(st.traversals() <= idx.nodes().len() + st.steps());
        }
    }
}
