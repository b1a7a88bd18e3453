//! Empirical check of the dynamic oracle against the exhaustive reference.
//!
//! Every configuration reachable on a short sentence (or a random sample on
//! longer ones) is tested for optimality of the oracle's action set and for
//! the structural facts the optimality argument rests on.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::brute::{exact_f1, BruteForce, MAX_LABELS, MAX_WORDS};
use super::{
    dyna_with, next_bracket_scan, reach, rollout, static_oracle, t_star, GoldTreeIndex, InjectedFault, OracleState,
    Result,
};
use crate::transition::{Action, Configuration};
use crate::treebank::{build_label_inventory, tree_span_chains, BracketSet, Chain, LabelInventory, SpanChains, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    /// The oracle set equals the set of actions that keep the best F1.
    OptimalActionSet,
    /// F1 of the best reachable tree equals the enumerated maximum.
    BestTreeF1,
    BestTreeRecall,
    BestTreePrecision,
    /// No other final tree ties the best reachable tree.
    UniqueBestTree,
    /// At structural steps, oracle actions keep `reach` and others shrink it.
    ReachPreservation,
    /// Oracle actions keep the best reachable tree; others change it.
    BestTreeInvariance,
    /// Greedily following the oracle (either tie preference) ends in the
    /// best reachable tree.
    GreedyRollout,
    ReachDisjointFromBuilt,
    CursorMatchesScan,
    StaticActionInOracle,
    AmortizedTraversal,
}

impl Property {
    pub const ALL: [Property; 12] = [
        Property::OptimalActionSet,
        Property::BestTreeF1,
        Property::BestTreeRecall,
        Property::BestTreePrecision,
        Property::UniqueBestTree,
        Property::ReachPreservation,
        Property::BestTreeInvariance,
        Property::GreedyRollout,
        Property::ReachDisjointFromBuilt,
        Property::CursorMatchesScan,
        Property::StaticActionInOracle,
        Property::AmortizedTraversal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::OptimalActionSet => "optimal-action-set",
            Property::BestTreeF1 => "best-tree-f1",
            Property::BestTreeRecall => "best-tree-recall",
            Property::BestTreePrecision => "best-tree-precision",
            Property::UniqueBestTree => "unique-best-tree",
            Property::ReachPreservation => "reach-preservation",
            Property::BestTreeInvariance => "best-tree-invariance",
            Property::GreedyRollout => "greedy-rollout",
            Property::ReachDisjointFromBuilt => "reach-disjoint",
            Property::CursorMatchesScan => "cursor-matches-scan",
            Property::StaticActionInOracle => "static-in-oracle",
            Property::AmortizedTraversal => "amortized-traversal",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub checked: u64,
    pub failed: u64,
}

/// A configuration violating a property, with the actions that reach it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub property: Property,
    pub sentence: usize,
    pub trace: Vec<Action>,
    pub detail: String,
}

impl Counterexample {
    /// The trace on one line, actions separated by ` ; `.
    pub fn trace_line(&self) -> String {
        self.trace.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ; ")
    }
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "counterexample {} (sentence {}): {} [{}]",
            self.property,
            self.sentence,
            self.trace_line(),
            self.detail
        )
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Sentences up to this length are enumerated exhaustively.
    pub exhaustive_max_len: usize,
    /// Longer sentences up to this length are sampled.
    pub sample_max_len: usize,
    /// Total sampled configurations, spread over the sampled sentences.
    pub sample_count: usize,
    pub seed: u64,
    pub fault: Option<InjectedFault>,
    /// Label actions per sentence: its gold chains first, then corpus chains.
    pub label_limit: usize,
    pub max_counterexamples: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            exhaustive_max_len: 4,
            sample_max_len: 5,
            sample_count: 1000,
            seed: 0,
            fault: None,
            label_limit: MAX_LABELS,
            max_counterexamples: 10,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub tallies: BTreeMap<Property, Tally>,
    pub counterexamples: Vec<Counterexample>,
    pub sentences: usize,
    /// Distinct gold structures enumerated or sampled.
    pub structures: usize,
    /// Structures skipped because they exceed the enumeration guard.
    pub skipped: usize,
    pub configurations: u64,
    pub max_counterexamples: usize,
}

impl VerifyReport {
    fn new(max_counterexamples: usize) -> Self {
        VerifyReport { max_counterexamples, ..Default::default() }
    }

    pub fn tally(&self, p: Property) -> Tally {
        self.tallies.get(&p).copied().unwrap_or_default()
    }

    pub fn failures(&self) -> u64 {
        self.tallies.values().map(|t| t.failed).sum()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    fn record(&mut self, p: Property, ok: bool, sentence: usize, trace: &[Action], detail: impl FnOnce() -> String) {
        let t = self.tallies.entry(p).or_default();
        t.checked += 1;
        if !ok {
            t.failed += 1;
            if self.counterexamples.len() < self.max_counterexamples {
                self.counterexamples.push(Counterexample {
                    property: p,
                    sentence,
                    trace: trace.to_vec(),
                    detail: detail(),
                });
            }
        }
    }

    fn absorb(&mut self, other: VerifyReport) {
        for (p, t) in other.tallies {
            let mine = self.tallies.entry(p).or_default();
            mine.checked += t.checked;
            mine.failed += t.failed;
        }
        for c in other.counterexamples {
            if self.counterexamples.len() < self.max_counterexamples {
                self.counterexamples.push(c);
            }
        }
        self.structures += other.structures;
        self.skipped += other.skipped;
        self.configurations += other.configurations;
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "sentences {} structures {} skipped {} configurations {}",
            self.sentences, self.structures, self.skipped, self.configurations
        )?;
        for p in Property::ALL {
            let t = self.tally(p);
            let verdict = if t.failed == 0 { "PASS" } else { "FAIL" };
            writeln!(f, "{verdict} {:<22} checked {:>10} failed {}", p.name(), t.checked, t.failed)?;
        }
        for c in &self.counterexamples {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Identifies actions by their effect: chains with the same symbols add the
/// same brackets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum ActionKey {
    Shift,
    Combine,
    NoLabel,
    Label(Vec<String>),
}

fn key(a: &Action) -> ActionKey {
    match a {
        Action::Shift => ActionKey::Shift,
        Action::Combine => ActionKey::Combine,
        Action::NoLabel => ActionKey::NoLabel,
        Action::Label(c) => {
            let mut s = c.symbols().to_vec();
            s.sort();
            ActionKey::Label(s)
        }
    }
}

/// Gold chains of `chains` followed by corpus chains, up to `limit`.
pub fn verification_inventory(chains: &SpanChains, corpus: &LabelInventory, limit: usize) -> LabelInventory {
    let mut out: Vec<Chain> = Vec::new();
    for (_, c) in chains.iter() {
        if !out.contains(c) {
            out.push(c.clone());
        }
    }
    for c in corpus.chains() {
        if out.len() >= limit {
            break;
        }
        if !out.contains(c) {
            out.push(c.clone());
        }
    }
    LabelInventory::from_chains(out)
}

struct Checker<'a> {
    idx: &'a GoldTreeIndex,
    gold: &'a BracketSet,
    labels: &'a LabelInventory,
    brute: BruteForce<'a>,
    fault: Option<InjectedFault>,
    sentence: usize,
    report: VerifyReport,
}

impl Checker<'_> {
    fn check(&mut self, c: &Configuration, state: &OracleState<'_>, trace: &[Action]) -> Result<()> {
        let (idx, sentence) = (self.idx, self.sentence);
        self.report.configurations += 1;
        let here = reach(c, idx);
        let scan = next_bracket_scan(c, idx);
        let cursor = state.next_bracket().ok();
        self.report.record(Property::CursorMatchesScan, cursor == scan, sentence, trace, || {
            format!("cursor {cursor:?} scan {scan:?}")
        });
        self.report.record(Property::ReachDisjointFromBuilt, here.is_disjoint(c.brackets()), sentence, trace, || {
            format!("reach {here} built {}", c.brackets())
        });
        if c.is_final() {
            return Ok(());
        }

        let dyna = match dyna_with(c, state, self.fault) {
            Ok(set) => set,
            Err(e) => {
                self.report.record(Property::OptimalActionSet, false, sentence, trace, || format!("oracle error: {e}"));
                return Ok(());
            }
        };
        let dyna_keys: BTreeSet<ActionKey> = dyna.iter().map(key).collect();
        let best = self.brute.best(c);
        let star = t_star(c, idx);

        let mut optimal = BTreeSet::new();
        let mut reach_ok = true;
        let mut invariance_ok = true;
        let mut detail = String::new();
        for a in c.legal_actions(self.labels)? {
            let next = c.apply(&a)?;
            if self.brute.best_f1(&next) == best.f1 {
                optimal.insert(key(&a));
            }
            let in_dyna = dyna_keys.contains(&key(&a));
            if c.is_structural_step() {
                let after = reach(&next, idx);
                let ok = if in_dyna { after == here } else { after.is_subset(&here) && after != here };
                if !ok {
                    reach_ok = false;
                    detail = format!("{a}: reach {here} -> {after}");
                }
            }
            if (t_star(&next, idx) == star) != in_dyna {
                invariance_ok = false;
                detail = format!("{a}: best tree {star} -> {}", t_star(&next, idx));
            }
        }
        self.report.record(Property::OptimalActionSet, optimal == dyna_keys, sentence, trace, || {
            format!("oracle {dyna_keys:?} optimal {optimal:?}")
        });
        if c.is_structural_step() {
            self.report.record(Property::ReachPreservation, reach_ok, sentence, trace, || detail.clone());
        }
        self.report.record(Property::BestTreeInvariance, invariance_ok, sentence, trace, || detail.clone());

        let star_f1 = exact_f1(&star, self.gold);
        self.report.record(Property::BestTreeF1, star_f1 == best.f1, sentence, trace, || {
            format!("best tree {star} f1 {star_f1} enumerated {}", best.f1)
        });
        let matched = star.matched(self.gold) as u64;
        let recall = num_rational::Ratio::new(matched, self.gold.len() as u64);
        let precision = if star.is_empty() {
            num_rational::Ratio::from_integer(0)
        } else {
            num_rational::Ratio::new(matched, star.len() as u64)
        };
        self.report.record(Property::BestTreeRecall, recall == best.max_recall, sentence, trace, || {
            format!("recall {recall} enumerated {}", best.max_recall)
        });
        self.report.record(Property::BestTreePrecision, precision == best.max_precision, sentence, trace, || {
            format!("precision {precision} enumerated {}", best.max_precision)
        });
        let unique = best.maximizers.len() == 1 && best.maximizers[0] == star;
        self.report.record(Property::UniqueBestTree, unique, sentence, trace, || {
            let sets: Vec<String> = best.maximizers.iter().map(|s| s.to_string()).collect();
            format!("best tree {star}, maximizers {}", sets.join(" "))
        });

        let mut rollout_ok = true;
        let mut rollout_detail = String::new();
        for prefer_combine in [false, true] {
            match rollout(c, state, prefer_combine, self.fault) {
                Ok(done) if *done.brackets() == star => {}
                Ok(done) => {
                    rollout_ok = false;
                    rollout_detail = format!("rollout ended in {} not {star}", done.brackets());
                }
                Err(e) => {
                    rollout_ok = false;
                    rollout_detail = format!("rollout failed: {e}");
                }
            }
        }
        self.report.record(Property::GreedyRollout, rollout_ok, sentence, trace, || rollout_detail);
        Ok(())
    }

    fn exhaustive(&mut self) -> Result<()> {
        let root = Configuration::initial(self.idx.sentence_len())?;
        let mut seen: HashSet<Configuration> = HashSet::new();
        let mut todo = vec![(root, OracleState::new(self.idx), Vec::new())];
        while let Some((c, state, trace)) = todo.pop() {
            if !seen.insert(c.clone()) {
                continue;
            }
            self.check(&c, &state, &trace)?;
            if c.is_final() {
                continue;
            }
            for a in c.legal_actions(self.labels)? {
                let mut st = state.clone();
                st.advance(&c, &a);
                let next = c.apply(&a)?;
                let mut tr = trace.clone();
                tr.push(a);
                todo.push((next, st, tr));
            }
        }
        Ok(())
    }

    fn sample(&mut self, count: usize, rng: &mut ChaCha8Rng) -> Result<()> {
        let n = self.idx.sentence_len();
        for _ in 0..count {
            let steps = rng.random_range(0..4 * n - 2);
            let mut c = Configuration::initial(n)?;
            let mut state = OracleState::new(self.idx);
            let mut trace = Vec::with_capacity(steps);
            for _ in 0..steps {
                let legal = c.legal_actions(self.labels)?;
                let a = legal.choose(rng).unwrap().clone();
                state.advance(&c, &a);
                c = c.apply(&a)?;
                trace.push(a);
            }
            self.check(&c, &state, &trace)?;
        }
        Ok(())
    }
}

/// Checks that the static oracle's action is always in the oracle set on the
/// gold path, and that cursor traversals stay within the amortized bound on
/// the gold path and on one random trajectory.
fn check_paths(tree: &Tree, idx: &GoldTreeIndex, sentence: usize, seed: u64, report: &mut VerifyReport) -> Result<()> {
    let gold_path = static_oracle(tree);
    let mut c = Configuration::initial(tree.len())?;
    let mut state = OracleState::new(idx);
    let mut in_oracle = true;
    let mut bad_step = Vec::new();
    for (k, a) in gold_path.iter().enumerate() {
        if in_oracle && !dyna_with(&c, &state, None)?.contains(a) {
            in_oracle = false;
            bad_step = gold_path[..k].to_vec();
        }
        state.advance(&c, a);
        c = c.apply(a)?;
    }
    report.record(Property::StaticActionInOracle, in_oracle, sentence, &bad_step, || {
        "static action missing from the oracle set".to_string()
    });
    let bound = idx.nodes().len() + state.steps();
    report.record(Property::AmortizedTraversal, state.traversals() <= bound, sentence, &gold_path, || {
        format!("{} traversals, bound {bound}", state.traversals())
    });

    let (trace, state) = random_trajectory(idx, seed)?;
    let bound = idx.nodes().len() + state.steps();
    report.record(Property::AmortizedTraversal, state.traversals() <= bound, sentence, &trace, || {
        format!("{} traversals, bound {bound}", state.traversals())
    });
    Ok(())
}

/// A full trajectory of uniformly random legal actions, labels drawn from
/// the gold chains.
fn random_trajectory(idx: &GoldTreeIndex, seed: u64) -> Result<(Vec<Action>, OracleState<'_>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = LabelInventory::from_chains(idx.chains().iter().map(|(_, c)| c.clone()));
    let mut c = Configuration::initial(idx.sentence_len())?;
    let mut state = OracleState::new(idx);
    let mut trace = Vec::new();
    while !c.is_final() {
        let legal = c.legal_actions(&labels)?;
        let a = legal.choose(&mut rng).unwrap().clone();
        state.advance(&c, &a);
        c = c.apply(&a)?;
        trace.push(a);
    }
    Ok((trace, state))
}

fn mix(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs the full property suite over a collapsed treebank. Sentences with
/// the same bracket structure are enumerated once.
pub fn verify_corpus(trees: &[Tree], opts: &VerifyOptions) -> Result<VerifyReport> {
    let corpus_labels = build_label_inventory(trees)?;
    let mut report = VerifyReport::new(opts.max_counterexamples);
    report.sentences = trees.len();

    let indexes: Vec<GoldTreeIndex> = trees.iter().map(GoldTreeIndex::from_tree).collect::<Result<_>>()?;
    for (k, (tree, idx)) in trees.iter().zip(&indexes).enumerate() {
        check_paths(tree, idx, k, mix(opts.seed, k), &mut report)?;
    }

    let mut seen: HashSet<(usize, SpanChains)> = HashSet::new();
    let mut exhaustive = Vec::new();
    let mut sampled = Vec::new();
    for (k, tree) in trees.iter().enumerate() {
        let n = tree.len();
        if !seen.insert((n, tree_span_chains(tree))) {
            continue;
        }
        if n <= opts.exhaustive_max_len {
            exhaustive.push(k);
        } else if n <= opts.sample_max_len {
            sampled.push(k);
        }
    }
    let mut jobs: Vec<(usize, usize)> = exhaustive.iter().map(|&k| (k, 0)).collect();
    for (slot, &k) in sampled.iter().enumerate() {
        let share = opts.sample_count / sampled.len() + usize::from(slot < opts.sample_count % sampled.len());
        if share > 0 {
            jobs.push((k, share));
        }
    }

    let parts: Vec<Result<VerifyReport>> = jobs
        .par_iter()
        .map(|&(k, samples)| {
            let idx = &indexes[k];
            let labels = verification_inventory(idx.chains(), &corpus_labels, opts.label_limit);
            let mut part = VerifyReport::new(opts.max_counterexamples);
            part.structures = 1;
            if idx.sentence_len() > MAX_WORDS || labels.len() > opts.label_limit {
                part.skipped = 1;
                return Ok(part);
            }
            let mut checker = Checker {
                idx,
                gold: idx.brackets(),
                labels: &labels,
                brute: BruteForce::new(idx.brackets(), idx.sentence_len(), &labels)?.with_witness_cap(2),
                fault: opts.fault,
                sentence: k,
                report: part,
            };
            if samples == 0 {
                checker.exhaustive()?;
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(opts.seed ^ 0x5A5A, k));
                checker.sample(samples, &mut rng)?;
            }
            Ok(checker.report)
        })
        .collect();
    for part in parts {
        report.absorb(part?);
    }
    Ok(report)
}

/// Cursor cost over a corpus: the gold path and one random trajectory per
/// sentence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AmortizationStats {
    pub trajectories: usize,
    pub violations: usize,
    pub traversals: usize,
    pub steps: usize,
}

impl AmortizationStats {
    pub fn mean_per_step(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.traversals as f64 / self.steps as f64
        }
    }
}

pub fn amortization_stats(trees: &[Tree], seed: u64) -> Result<AmortizationStats> {
    let mut stats = AmortizationStats::default();
    for (k, tree) in trees.iter().enumerate() {
        let idx = GoldTreeIndex::from_tree(tree)?;
        let mut c = Configuration::initial(tree.len())?;
        let mut gold_state = OracleState::new(&idx);
        for a in static_oracle(tree) {
            gold_state.advance(&c, &a);
            c = c.apply(&a)?;
        }
        let (_, random_state) = random_trajectory(&idx, mix(seed, k))?;
        for st in [gold_state, random_state] {
            stats.trajectories += 1;
            stats.traversals += st.traversals();
            stats.steps += st.steps();
            if st.traversals() > idx.nodes().len() + st.steps() {
                stats.violations += 1;
            }
        }
    }
    Ok(stats)
}
