//! Exhaustive reference oracle for small sentences.
//!
//! What a configuration can still add depends only on its step and stack:
//! every later label lands on a span created later. So the set of possible
//! futures is memoized per `(step, stack)` as a table from
//! `(gold brackets added, brackets added)` to a few distinct witness sets,
//! and the F1 of any final tree is `2(m + g) / (|t| + b + |gold|)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use num_rational::Ratio;

use super::{OracleError, Result};
use crate::transition::{legal_kinds_at, total_steps, Action, ActionKind, Configuration};
use crate::treebank::{Bracket, BracketSet, Chain, LabelInventory};

pub const MAX_WORDS: usize = 6;
pub const MAX_LABELS: usize = 4;
/// Distinct maximizing trees kept by [`brute_force_best_f1`].
pub const DEFAULT_WITNESS_CAP: usize = 8;

/// Possible futures of one `(step, stack)`, keyed by
/// `(gold brackets added, brackets added)`.
#[derive(Debug, Default)]
pub struct FutureTable {
    entries: BTreeMap<(usize, usize), Vec<BracketSet>>,
}

impl FutureTable {
    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), &[BracketSet])> {
        self.entries.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    fn add(&mut self, key: (usize, usize), set: BracketSet, cap: usize) {
        let reps = self.entries.entry(key).or_default();
        if reps.len() < cap && !reps.contains(&set) {
            reps.push(set);
        }
    }
}

/// The best achievable outcome from a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestOutcome {
    pub f1: Ratio<u64>,
    /// Distinct final bracket sets attaining `f1`, at most the witness cap.
    pub maximizers: Vec<BracketSet>,
    pub max_recall: Ratio<u64>,
    pub max_precision: Ratio<u64>,
}

fn ratio(num: usize, den: usize) -> Ratio<u64> {
    if den == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(num as u64, den as u64)
    }
}

/// Memoizing enumerator for one gold tree and label inventory.
pub struct BruteForce<'g> {
    gold: &'g BracketSet,
    n: usize,
    labels: Vec<Chain>,
    cap: usize,
    memo: HashMap<(usize, Vec<usize>), Rc<FutureTable>>,
}

impl<'g> BruteForce<'g> {
    pub fn new(gold: &'g BracketSet, n: usize, labels: &LabelInventory) -> Result<BruteForce<'g>> {
        if n == 0 || n > MAX_WORDS {
            return Err(OracleError::Guard(format!("{n} words (limit {MAX_WORDS})")));
        }
        if labels.len() > MAX_LABELS {
            return Err(OracleError::Guard(format!("{} labels (limit {MAX_LABELS})", labels.len())));
        }
        Ok(BruteForce { gold, n, labels: labels.chains().to_vec(), cap: DEFAULT_WITNESS_CAP, memo: HashMap::new() })
    }

    /// Keeps at most `cap` distinct witnesses per table entry.
    pub fn with_witness_cap(mut self, cap: usize) -> Self {
        self.cap = cap.max(1);
        self.memo.clear();
        self
    }

    pub fn future(&mut self, step: usize, stack: &[usize]) -> Rc<FutureTable> {
        let key = (step, stack.to_vec());
        if let Some(t) = self.memo.get(&key) {
            return Rc::clone(t);
        }
        let mut table = FutureTable::default();
        if step == total_steps(self.n) {
            table.add((0, 0), BracketSet::new(), self.cap);
        } else {
            for kind in legal_kinds_at(step, stack, self.n) {
                match kind {
                    ActionKind::Shift => {
                        let mut s = stack.to_vec();
                        s.push(s.last().unwrap() + 1);
                        self.merge(&mut table, step + 1, &s, &[]);
                    }
                    ActionKind::Combine => {
                        let mut s = stack.to_vec();
                        s.remove(s.len() - 2);
                        self.merge(&mut table, step + 1, &s, &[]);
                    }
                    ActionKind::NoLabel => self.merge(&mut table, step + 1, stack, &[]),
                    ActionKind::Label => {
                        let (i, j) = (stack[stack.len() - 2], stack[stack.len() - 1]);
                        for chain in self.labels.clone() {
                            let added: Vec<Bracket> =
                                chain.symbols().iter().map(|s| Bracket::new(s.clone(), i, j)).collect();
                            self.merge(&mut table, step + 1, stack, &added);
                        }
                    }
                }
            }
        }
        let table = Rc::new(table);
        self.memo.insert(key, Rc::clone(&table));
        table
    }

    fn merge(&mut self, into: &mut FutureTable, step: usize, stack: &[usize], added: &[Bracket]) {
        let child = self.future(step, stack);
        let g = added.iter().filter(|b| self.gold.contains(b)).count();
        for ((cg, cb), reps) in child.entries() {
            for r in reps {
                let mut set = r.clone();
                set.extend(added.iter().cloned());
                into.add((cg + g, cb + added.len()), set, self.cap);
            }
        }
    }

    /// Best F1 over every final tree reachable from `c`.
    pub fn best_f1(&mut self, c: &Configuration) -> Ratio<u64> {
        let table = self.future(c.step(), c.stack());
        let m = c.brackets().matched(self.gold);
        let size = c.brackets().len();
        table
            .entries()
            .map(|((g, b), _)| ratio(2 * (m + g), size + b + self.gold.len()))
            .max()
            .unwrap_or(Ratio::from_integer(0))
    }

    /// Best F1, recall and precision over every final tree reachable from
    /// `c`, with the maximizing trees.
    pub fn best(&mut self, c: &Configuration) -> BestOutcome {
        let table = self.future(c.step(), c.stack());
        let m = c.brackets().matched(self.gold);
        let size = c.brackets().len();
        let gold = self.gold.len();
        let mut best = Ratio::from_integer(0);
        let mut max_recall = Ratio::from_integer(0);
        let mut max_precision = Ratio::from_integer(0);
        let mut winners: Vec<&[BracketSet]> = Vec::new();
        for ((g, b), reps) in table.entries() {
            let f1 = ratio(2 * (m + g), size + b + gold);
            max_recall = max_recall.max(ratio(m + g, gold));
            max_precision = max_precision.max(ratio(m + g, size + b));
            if f1 > best || winners.is_empty() {
                best = f1;
                winners.clear();
            }
            if f1 == best {
                winners.push(reps);
            }
        }
        let maximizers =
            winners.into_iter().flatten().take(self.cap).map(|future| c.brackets().union(future)).collect();
        BestOutcome { f1: best, maximizers, max_recall, max_precision }
    }
}

/// Best F1 reachable from `c` against `gold`, by exhaustive enumeration.
pub fn brute_force_best_f1(c: &Configuration, gold: &BracketSet, labels: &LabelInventory) -> Result<BestOutcome> {
    Ok(BruteForce::new(gold, c.sentence_len(), labels)?.best(c))
}

/// Every distinct final bracket set reachable from `c`, by plain
/// depth-first search over action sequences. Exponential; for cross-checks.
pub fn enumerate_final_sets(c: &Configuration, labels: &LabelInventory) -> Result<BTreeSet<BracketSet>> {
    if c.sentence_len() > 4 {
        return Err(OracleError::Guard(format!("{} words (plain enumeration limit 4)", c.sentence_len())));
    }
    let mut out = BTreeSet::new();
    let mut stack = vec![c.clone()];
    while let Some(cur) = stack.pop() {
        if cur.is_final() {
            out.insert(cur.brackets().clone());
            continue;
        }
        for a in cur.legal_actions(labels)? {
            stack.push(cur.apply(&a)?);
        }
    }
    Ok(out)
}

/// F1 of a final bracket set as an exact fraction.
pub fn exact_f1(pred: &BracketSet, gold: &BracketSet) -> Ratio<u64> {
    ratio(2 * pred.matched(gold), pred.len() + gold.len())
}

/// Every legal action from `c` with its successor.
pub fn successors(c: &Configuration, labels: &LabelInventory) -> Result<Vec<(Action, Configuration)>> {
    let mut out = Vec::new();
    for a in c.legal_actions(labels)? {
        let next = c.apply(&a)?;
        out.push((a, next));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{t_star, GoldTreeIndex};
    use crate::synth::random_tree;
    use crate::treebank::{collapse_unaries, read_trees, tree_to_brackets};
    use proptest::prelude::*;

    fn inventory_for(gold: &BracketSet) -> LabelInventory {
        let mut names: Vec<&str> = gold.iter().map(|b| b.label.as_str()).collect();
        names.sort();
        names.dedup();
        LabelInventory::from_chains(names.into_iter().map(Chain::single))
    }

    #[test]
    fn initial_configuration_reaches_gold() {
        let tree = collapse_unaries(read_trees("(S (NP (DT the) (NN dog)) (VP (VBD ran)))").unwrap().remove(0));
        let gold = tree_to_brackets(&tree);
        let inv = LabelInventory::from_chains([Chain::single("S"), Chain::single("NP"), Chain::single("VP")]);
        let c = Configuration::initial(3).unwrap();
        let best = brute_force_best_f1(&c, &gold, &inv).unwrap();
        assert_eq!(best.f1, Ratio::from_integer(1));
        assert_eq!(best.maximizers, vec![gold]);
    }

    #[test]
    fn crossing_everything_leaves_only_the_queue() {
        // Gold (R (A w0 w1) w2 (B w3)): after combining w1 w2 nothing on the
        // left survives except the root.
        let gold: BracketSet =
            [("R", 0, 4), ("A", 0, 2), ("B", 3, 4)].iter().map(|&(l, i, j)| Bracket::new(l, i, j)).collect();
        let inv = LabelInventory::from_chains([Chain::single("R"), Chain::single("A"), Chain::single("B")]);
        let acts = crate::transition::parse_trace("SH\nNOLABEL\nSH\nNOLABEL\nSH\nNOLABEL\nCOMB\nNOLABEL\n").unwrap();
        let c = Configuration::replay(4, &acts).unwrap();
        let best = brute_force_best_f1(&c, &gold, &inv).unwrap();
        // Root and B remain: 2 of 3 gold, nothing wrong.
        assert_eq!(best.f1, Ratio::new(4, 5));
        let idx = GoldTreeIndex::from_brackets(&gold, 4).unwrap();
        assert_eq!(best.maximizers, vec![t_star(&c, &idx)]);
    }

    #[test]
    fn guard_rejects_large_inputs() {
        let gold = BracketSet::new();
        let inv = LabelInventory::from_chains([Chain::single("X")]);
        assert!(matches!(BruteForce::new(&gold, 7, &inv), Err(OracleError::Guard(_))));
        let many = LabelInventory::from_chains((0..5).map(|k| Chain::single(format!("L{k}"))));
        assert!(matches!(BruteForce::new(&gold, 3, &many), Err(OracleError::Guard(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn memoized_table_agrees_with_plain_enumeration(n in 1usize..4, seed in any::<u64>(), walk in prop::collection::vec(any::<u8>(), 0..10)) {
            let tree = random_tree(n, 2, seed);
            let gold = tree_to_brackets(&tree);
            let inv = inventory_for(&gold);
            let mut c = Configuration::initial(n).unwrap();
            for w in walk {
                if c.is_final() { break; }
                let legal = c.legal_actions(&inv).unwrap();
                c = c.apply(&legal[w as usize % legal.len()]).unwrap();
            }
            let all = enumerate_final_sets(&c, &inv).unwrap();
            let best_plain = all.iter().map(|t| exact_f1(t, &gold)).max().unwrap();
            let winners: BTreeSet<BracketSet> = all.iter().filter(|t| exact_f1(t, &gold) == best_plain).cloned().collect();
            let recall = all.iter().map(|t| ratio(t.matched(&gold), gold.len())).max().unwrap();
            let precision = all.iter().map(|t| ratio(t.matched(&gold), t.len())).max().unwrap();

            let mut bf = BruteForce::new(&gold, n, &inv).unwrap().with_witness_cap(usize::MAX);
            let best = bf.best(&c);
            prop_assert_eq!(best.f1, best_plain);
            prop_assert_eq!(best.maximizers.into_iter().collect::<BTreeSet<_>>(), winners);
            prop_assert_eq!(best.max_recall, recall);
            prop_assert_eq!(best.max_precision, precision);
        }
    }
}
