//! Supervision generation and the epoch/minibatch training loop.

use std::fmt;
use std::str::FromStr;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::adadelta::AdaDelta;
use crate::encoder::network::{label_slots, loss_and_gradients, structural_slots, Example, Head};
use crate::encoder::params::{Gradients, Hyper};
use crate::encoder::vocab::build_vocab;
use crate::encoder::{EncoderError, Model};
use crate::metrics::{corpus_parseval, F1Report, MetricsError};
use crate::oracle::{dyna, static_oracle, GoldTreeIndex, OracleError, OracleState};
use crate::transition::{best_action, Action, ActionScorer, Configuration, TransitionError};
use crate::treebank::{build_label_inventory, tree_to_brackets, LabelInventory, Tree, TreebankError};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("dev corpus is empty")]
    EmptyDev,
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("label chain `{0}` is not in the label inventory")]
    UnknownChain(String),
    #[error("training diverged in epoch {epoch}, minibatch {batch}: {detail}")]
    Diverged { epoch: usize, batch: usize, detail: String },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Treebank(#[from] TreebankError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T, E = TrainingError> = std::result::Result<T, E>;

/// How training trajectories are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mode {
    /// Follow the static oracle along the gold path.
    Static,
    /// Follow the model's own greedy predictions, supervised by the
    /// dynamic oracle.
    Dynamic,
    /// Sample each step from `softmax(alpha * scores)` over legal actions,
    /// supervised by the dynamic oracle.
    DynamicExplore { alpha: f64 },
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Static => f.write_str("static"),
            Mode::Dynamic => f.write_str("dynamic"),
            Mode::DynamicExplore { alpha } => write!(f, "dynamic-explore (alpha {alpha})"),
        }
    }
}

impl Mode {
    /// Builds a mode from its command-line name and an optional alpha.
    pub fn from_name(name: &str, alpha: Option<f64>) -> Result<Mode> {
        match (name, alpha) {
            ("static", None) => Ok(Mode::Static),
            ("dynamic", None) => Ok(Mode::Dynamic),
            ("dynamic-explore", a) => Ok(Mode::DynamicExplore { alpha: a.unwrap_or(1.0) }),
            ("static" | "dynamic", Some(_)) => {
                Err(TrainingError::BadConfig(format!("--alpha only applies to dynamic-explore, not {name}")))
            }
            _ => Err(TrainingError::BadConfig(format!("unknown mode `{name}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub minibatch: usize,
    pub mode: Mode,
    pub seed: u64,
    /// Target fraction of training tokens replaced by UNK.
    pub unk_rate: f64,
    pub hyper: Hyper,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 10,
            minibatch: 10,
            mode: Mode::Static,
            seed: 1,
            unk_rate: 0.0276,
            hyper: Hyper::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainingError::BadConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.minibatch == 0 {
            return bad("minibatch must be positive");
        }
        if let Mode::DynamicExplore { alpha } = self.mode {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return bad("alpha must be positive");
            }
        }
        if !(0.0..1.0).contains(&self.hyper.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.unk_rate) {
            return bad("unk_rate must be in [0, 1)");
        }
        if !(self.hyper.rho > 0.0 && self.hyper.rho < 1.0 && self.hyper.epsilon > 0.0) {
            return bad("rho must be in (0, 1) and epsilon positive");
        }
        Ok(())
    }
}

/// A configuration with its supervision action.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub config: Configuration,
    pub action: Action,
    /// Whether the configuration differs from the static-oracle
    /// configuration at the same step.
    pub off_path: bool,
}

/// Replays the static oracle: one pair per step, all on the gold path.
pub fn static_examples(gold: &Tree) -> Result<Vec<TrainingPair>> {
    let mut c = Configuration::initial(gold.len())?;
    let mut out = Vec::new();
    for a in static_oracle(gold) {
        let next = c.apply(&a)?;
        out.push(TrainingPair { config: c, action: a, off_path: false });
        c = next;
    }
    Ok(out)
}

/// How the executed action is chosen during a rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    Greedy,
    Sample { alpha: f64 },
}

fn sample_index<R: Rng + ?Sized>(scores: &[f64], alpha: f64, rng: &mut R) -> usize {
    let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(alpha * s));
    let weights: Vec<f64> = scores.iter().map(|&s| (alpha * s - max).exp()).collect();
    match WeightedIndex::new(&weights) {
        Ok(dist) => dist.sample(rng),
        Err(_) => 0,
    }
}

fn sampled_action<S: ActionScorer + ?Sized, R: Rng + ?Sized>(
    c: &Configuration,
    scorer: &mut S,
    inventory: &LabelInventory,
    alpha: f64,
    rng: &mut R,
) -> Result<Action> {
    let legal = c.legal_actions(inventory)?;
    if legal.len() == 1 {
        return Ok(legal.into_iter().next().unwrap());
    }
    let scores: Vec<f64> = if c.is_structural_step() {
        let s = scorer.structural_scores(c);
        legal.iter().map(|a| if *a == Action::Combine { s[1] } else { s[0] }).collect()
    } else {
        let s = scorer.label_scores(c);
        legal
            .iter()
            .map(|a| match a {
                Action::Label(ch) => inventory.id(ch).map_or(f64::NEG_INFINITY, |id| s[1 + id]),
                _ => s[0],
            })
            .collect()
    };
    Ok(legal[sample_index(&scores, alpha, rng)].clone())
}

/// Rolls out `4n - 2` steps under `policy`, recording the dynamic-oracle
/// supervision at every configuration. When both structural actions are
/// optimal, the one the model currently scores higher is recorded.
pub fn exploration_examples<S: ActionScorer + ?Sized, R: Rng + ?Sized>(
    gold: &Tree,
    scorer: &mut S,
    inventory: &LabelInventory,
    policy: Policy,
    rng: &mut R,
) -> Result<Vec<TrainingPair>> {
    let index = GoldTreeIndex::from_tree(gold)?;
    let mut state = OracleState::new(&index);
    let reference: Vec<Configuration> = {
        let mut c = Configuration::initial(gold.len())?;
        let mut v = vec![c.clone()];
        for a in static_oracle(gold) {
            c = c.apply(&a)?;
            v.push(c.clone());
        }
        v
    };
    let mut c = Configuration::initial(gold.len())?;
    let mut out = Vec::with_capacity(reference.len());
    while !c.is_final() {
        let set = dyna(&c, &state)?;
        let supervision = if set.len() > 1 {
            let s = scorer.structural_scores(&c);
            if s[1] > s[0] {
                Action::Combine
            } else {
                Action::Shift
            }
        } else {
            set.into_iter().next().ok_or(OracleError::NoNextBracket)?
        };
        let executed = match policy {
            Policy::Greedy => best_action(&c, scorer, inventory)?,
            Policy::Sample { alpha } => sampled_action(&c, scorer, inventory, alpha, rng)?,
        };
        let reference_c = &reference[c.step()];
        let off_path = c.stack() != reference_c.stack() || c.brackets() != reference_c.brackets();
        state.advance(&c, &executed);
        let next = c.apply(&executed)?;
        out.push(TrainingPair { config: c, action: supervision, off_path });
        c = next;
    }
    Ok(out)
}

/// The classifier example for a supervised configuration.
pub fn to_example(pair: &TrainingPair, inventory: &LabelInventory) -> Result<Example> {
    let c = &pair.config;
    let n = c.sentence_len();
    Ok(match &pair.action {
        Action::Shift => Example { head: Head::Structural, slots: structural_slots(c.stack(), n), target: 0 },
        Action::Combine => Example { head: Head::Structural, slots: structural_slots(c.stack(), n), target: 1 },
        Action::NoLabel => Example { head: Head::Label, slots: label_slots(c.stack(), n), target: 0 },
        Action::Label(ch) => Example {
            head: Head::Label,
            slots: label_slots(c.stack(), n),
            target: 1 + inventory.id(ch).ok_or_else(|| TrainingError::UnknownChain(ch.to_string()))?,
        },
    })
}

/// One line of the training report.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub loss: f64,
    pub dev: F1Report,
    pub off_path_pairs: usize,
    pub total_pairs: usize,
}

impl EpochReport {
    pub const TSV_HEADER: &'static str = "epoch\tloss\tdev_lr\tdev_lp\tdev_f1\toff_path_pairs\ttotal_pairs";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.2}\t{:.2}\t{:.2}\t{}\t{}",
            self.epoch,
            self.loss,
            100.0 * self.dev.recall,
            100.0 * self.dev.precision,
            100.0 * self.dev.f1,
            self.off_path_pairs,
            self.total_pairs
        )
    }

    pub fn off_path_fraction(&self) -> f64 {
        if self.total_pairs == 0 {
            0.0
        } else {
            self.off_path_pairs as f64 / self.total_pairs as f64
        }
    }
}

impl fmt::Display for EpochReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "epoch {}: loss {:.4}, dev {}", self.epoch, self.loss, self.dev)
    }
}

/// Result of [`train`]: the final and best-on-dev models plus the reports.
#[derive(Debug)]
pub struct TrainOutcome {
    pub last: Model,
    pub best: Model,
    /// 1-based epoch whose dev F1 was highest (earliest on ties).
    pub best_epoch: usize,
    pub reports: Vec<EpochReport>,
}

impl TrainOutcome {
    pub fn report_tsv(&self) -> String {
        let mut out = String::from(EpochReport::TSV_HEADER);
        out.push('\n');
        for r in &self.reports {
            out.push_str(&r.tsv_row());
            out.push('\n');
        }
        out
    }
}

/// Random stream for `(epoch, slot)`; slot `u32::MAX` is the shuffle.
fn stream_rng(seed: u64, epoch: usize, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | slot);
    rng
}

struct SentenceOutcome {
    loss: f64,
    grads: Gradients<f32>,
    off_path: usize,
    pairs: usize,
}

fn sentence_step(model: &Model, gold: &Tree, mode: Mode, mut rng: ChaCha8Rng) -> Result<SentenceOutcome> {
    let tokens = gold.tokens();
    let enc = model.encode(&tokens, Some(&mut rng))?;
    let pairs = match mode {
        Mode::Static => static_examples(gold)?,
        Mode::Dynamic => exploration_examples(gold, &mut model.scorer(&enc), &model.labels, Policy::Greedy, &mut rng)?,
        Mode::DynamicExplore { alpha } => {
            exploration_examples(gold, &mut model.scorer(&enc), &model.labels, Policy::Sample { alpha }, &mut rng)?
        }
    };
    let examples = pairs.iter().map(|p| to_example(p, &model.labels)).collect::<Result<Vec<_>>>()?;
    let (loss, grads) = loss_and_gradients(&model.params, &model.hyper, &enc, &examples, Some(&mut rng))?;
    Ok(SentenceOutcome {
        loss: f64::from(loss),
        grads,
        off_path: pairs.iter().filter(|p| p.off_path).count(),
        pairs: pairs.len(),
    })
}

/// Greedy-decodes `trees` from their tokens and scores the result.
pub fn evaluate(model: &Model, trees: &[Tree]) -> Result<F1Report> {
    let predicted =
        trees.par_iter().map(|t| model.parse(&t.tokens()).map(|(tree, _)| tree)).collect::<Result<Vec<_>, _>>()?;
    let pred: Vec<_> = predicted.iter().map(tree_to_brackets).collect();
    let gold: Vec<_> = trees.iter().map(tree_to_brackets).collect();
    Ok(corpus_parseval(pred.iter().zip(&gold))?)
}

/// Trains on collapsed trees, decoding `dev` after every epoch. Sentences
/// of a minibatch are processed in parallel and their gradients summed in
/// corpus order, so results do not depend on the thread count.
pub fn train(
    corpus: &[Tree],
    dev: &[Tree],
    cfg: &TrainingConfig,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(TrainingError::EmptyCorpus);
    }
    if dev.is_empty() {
        return Err(TrainingError::EmptyDev);
    }
    let tokens: Vec<_> = corpus.iter().map(Tree::tokens).collect();
    let vocab = build_vocab(&tokens, cfg.unk_rate)?;
    let labels = build_label_inventory(corpus)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::initialize(cfg.hyper.clone(), vocab, labels, &mut init_rng);
    let mut optimizer = AdaDelta::new(&model.params, cfg.hyper.rho, cfg.hyper.epsilon);
    let mut best = (0usize, f64::NEG_INFINITY, model.params.clone());
    let mut reports = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut stream_rng(cfg.seed, epoch, u32::MAX as u64));
        let mut epoch_loss = 0.0;
        let (mut off_path, mut total) = (0, 0);
        for (batch_no, batch) in order.chunks(cfg.minibatch).enumerate() {
            let outcomes: Vec<Result<SentenceOutcome>> = batch
                .par_iter()
                .map(|&k| sentence_step(&model, &corpus[k], cfg.mode, stream_rng(cfg.seed, epoch, k as u64)))
                .collect();
            let mut grads = Gradients::zeros(&model.params);
            let mut batch_loss = 0.0;
            for o in outcomes {
                let o = o.map_err(|e| match e {
                    TrainingError::Encoder(EncoderError::NonFinite(what)) => {
                        TrainingError::Diverged { epoch, batch: batch_no + 1, detail: format!("non-finite {what}") }
                    }
                    e => e,
                })?;
                grads.add_assign(&o.grads);
                batch_loss += o.loss;
                off_path += o.off_path;
                total += o.pairs;
            }
            if !batch_loss.is_finite() {
                return Err(TrainingError::Diverged {
                    epoch,
                    batch: batch_no + 1,
                    detail: format!("loss {batch_loss}"),
                });
            }
            epoch_loss += batch_loss;
            optimizer.step(&mut model.params, &grads);
        }
        let dev_report = evaluate(&model, dev)?;
        let report =
            EpochReport { epoch, loss: epoch_loss, dev: dev_report, off_path_pairs: off_path, total_pairs: total };
        log::info!("{report}");
        on_epoch(&report);
        if dev_report.f1 > best.1 {
            best = (epoch, dev_report.f1, model.params.clone());
        }
        reports.push(report);
    }
    let best_model = Model::new(model.hyper.clone(), model.vocab.clone(), model.labels.clone(), best.2);
    Ok(TrainOutcome { last: model, best: best_model, best_epoch: best.0, reports })
}

impl FromStr for Mode {
    type Err = TrainingError;

    fn from_str(s: &str) -> Result<Mode> {
        Mode::from_name(s, None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::params::ModelParams;
    use crate::oracle::brute::BruteForce;
    use crate::synth::toy_corpus;
    use crate::transition::parse_trace;
    use crate::treebank::{collapse_unaries, read_trees};

    const EXAMPLE: &str = "(S (NP (PRP I)) (VP (MD do) (VBP like) (S (VP (VBG eating) (NP (NN fish))))))";

    fn example() -> Tree {
        collapse_unaries(read_trees(EXAMPLE).unwrap().remove(0))
    }

    fn tiny_config(mode: Mode) -> TrainingConfig {
        TrainingConfig {
            epochs: 2,
            minibatch: 3,
            mode,
            seed: 7,
            unk_rate: 0.05,
            hyper: Hyper { word_dim: 6, tag_dim: 4, lstm_units: 8, hidden_units: 10, ..Hyper::default() },
        }
    }

    fn toy(count: usize, seed: u64) -> Vec<Tree> {
        toy_corpus(count, 6, seed).into_iter().map(collapse_unaries).collect()
    }

    #[test]
    fn static_pairs_follow_the_gold_derivation() {
        let pairs = static_examples(&example()).unwrap();
        assert_eq!(pairs.len(), 18);
        let expected = parse_trace(
            "SH\nLABEL NP\nSH\nNOLABEL\nSH\nNOLABEL\nCOMB\nNOLABEL\nSH\nNOLABEL\nSH\nLABEL NP\nCOMB\nLABEL S-VP\nCOMB\nLABEL VP\nCOMB\nLABEL S\n",
        )
        .unwrap();
        assert_eq!(pairs.iter().map(|p| p.action.clone()).collect::<Vec<_>>(), expected);
        assert!(pairs.iter().all(|p| !p.off_path));
        let leaf = collapse_unaries(read_trees("(NP (NN fish))").unwrap().remove(0));
        assert_eq!(static_examples(&leaf).unwrap().len(), 2);
        for t in toy(40, 3) {
            assert_eq!(static_examples(&t).unwrap().len(), 4 * t.len() - 2);
        }
    }

    /// Prefers the scripted action at each step, then shift and nolabel.
    struct Scripted<'a> {
        script: Vec<Action>,
        inventory: &'a LabelInventory,
    }

    impl ActionScorer for Scripted<'_> {
        fn structural_scores(&mut self, c: &Configuration) -> [f64; 2] {
            match self.script.get(c.step()) {
                Some(Action::Combine) => [0.0, 1.0],
                _ => [1.0, 0.0],
            }
        }

        fn label_scores(&mut self, c: &Configuration) -> Vec<f64> {
            let mut s = vec![0.0; self.inventory.len() + 1];
            match self.script.get(c.step()) {
                Some(Action::Label(ch)) => s[1 + self.inventory.id(ch).unwrap()] = 1.0,
                _ => s[0] = 1.0,
            }
            s
        }
    }

    #[test]
    fn mistaken_trajectory_is_supervised_by_the_dynamic_oracle() {
        let gold = example();
        let inv = build_label_inventory(std::slice::from_ref(&gold)).unwrap();
        // "do like" combined early and labeled VP.
        let script = parse_trace("SH\nLABEL NP\nSH\nNOLABEL\nSH\nNOLABEL\nCOMB\nLABEL VP\n").unwrap();
        let mut scorer = Scripted { script, inventory: &inv };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pairs = exploration_examples(&gold, &mut scorer, &inv, Policy::Greedy, &mut rng).unwrap();
        assert_eq!(pairs.len(), 18);
        assert_eq!(pairs[6].action, Action::Combine);
        assert_eq!(pairs[7].action, Action::NoLabel);
        assert!(!pairs[7].off_path);
        assert_eq!(pairs[8].config.stack(), &[0, 1, 3]);
        assert!(pairs[8].off_path);
        assert_eq!(pairs[8].action, Action::Shift);
    }

    #[test]
    fn supervision_is_always_optimal_against_brute_force() {
        let trees: Vec<Tree> = toy(60, 11).into_iter().filter(|t| t.len() <= 4).take(12).collect();
        assert!(!trees.is_empty());
        let inv = build_label_inventory(&trees).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vocab = build_vocab(&trees.iter().map(Tree::tokens).collect::<Vec<_>>(), 0.0).unwrap();
        let hyper = tiny_config(Mode::Static).hyper;
        let model: Model = Model::initialize(hyper, vocab, inv.clone(), &mut rng);
        for t in &trees {
            let enc = model.encode::<ChaCha8Rng>(&t.tokens(), None).unwrap();
            let gold = tree_to_brackets(t);
            let mut brute = BruteForce::new(&gold, t.len(), &inv).unwrap();
            for alpha in [0.1, 1.0] {
                let pairs =
                    exploration_examples(t, &mut model.scorer(&enc), &inv, Policy::Sample { alpha }, &mut rng).unwrap();
                assert_eq!(pairs.len(), 4 * t.len() - 2);
                for p in &pairs {
                    let best = brute.best_f1(&p.config);
                    let after = brute.best_f1(&p.config.apply(&p.action).unwrap());
                    assert_eq!(after, best, "{} {}", p.config, p.action);
                }
            }
        }
    }

    #[test]
    fn exploration_with_a_flat_policy_leaves_the_gold_path() {
        let trees = toy(20, 4);
        let inv = build_label_inventory(&trees).unwrap();
        let vocab = build_vocab(&trees.iter().map(Tree::tokens).collect::<Vec<_>>(), 0.0).unwrap();
        let h = tiny_config(Mode::Static).hyper;
        let sizes: Vec<usize> = vocab.columns.iter().map(|c| c.len()).collect();
        let model: Model = Model::new(h.clone(), vocab, inv.clone(), ModelParams::zeros(&h, &sizes, inv.len()));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut off, mut total) = (0, 0);
        for t in &trees {
            let enc = model.encode::<ChaCha8Rng>(&t.tokens(), None).unwrap();
            let pairs = exploration_examples(t, &mut model.scorer(&enc), &inv, Policy::Sample { alpha: 1.0 }, &mut rng)
                .unwrap();
            off += pairs.iter().filter(|p| p.off_path).count();
            total += pairs.len();
        }
        assert!(off * 5 > total, "{off}/{total}");
    }

    #[test]
    fn training_is_reproducible_and_reports_each_epoch() {
        let trees = toy(12, 8);
        for mode in [Mode::Static, Mode::Dynamic, Mode::DynamicExplore { alpha: 1.0 }] {
            let cfg = tiny_config(mode);
            let mut lines = Vec::new();
            let a = train(&trees, &trees[..4], &cfg, |r| lines.push(r.to_string())).unwrap();
            let b = train(&trees, &trees[..4], &cfg, |_| {}).unwrap();
            assert_eq!(a.reports, b.reports);
            assert_eq!(a.last.params, b.last.params);
            assert_eq!(lines.len(), 2);
            assert!(lines[0].starts_with("epoch 1: loss "), "{}", lines[0]);
            assert!(lines[0].contains(", dev LR "));
            assert!(a.reports.iter().all(|r| r.total_pairs == trees.iter().map(|t| 4 * t.len() - 2).sum::<usize>()));
            assert!((1..=2).contains(&a.best_epoch));
            assert_eq!(a.report_tsv().lines().count(), 3);
            if mode == Mode::Static {
                assert!(a.reports.iter().all(|r| r.off_path_pairs == 0));
            }
        }
    }

    #[test]
    fn bad_configurations_are_rejected() {
        let trees = toy(3, 1);
        let mut cfg = tiny_config(Mode::DynamicExplore { alpha: 0.0 });
        assert!(matches!(train(&trees, &trees, &cfg, |_| {}), Err(TrainingError::BadConfig(_))));
        cfg.mode = Mode::Static;
        cfg.minibatch = 0;
        assert!(matches!(train(&trees, &trees, &cfg, |_| {}), Err(TrainingError::BadConfig(_))));
        cfg.minibatch = 2;
        assert!(matches!(train(&[], &trees, &cfg, |_| {}), Err(TrainingError::EmptyCorpus)));
        assert!(matches!(train(&trees, &[], &cfg, |_| {}), Err(TrainingError::EmptyDev)));
        assert!(Mode::from_name("static", Some(1.0)).is_err());
        assert_eq!(Mode::from_name("dynamic-explore", None).unwrap(), Mode::DynamicExplore { alpha: 1.0 });
    }

    #[test]
    fn divergence_is_reported() {
        let trees = toy(4, 2);
        let mut cfg = tiny_config(Mode::Static);
        cfg.hyper.epsilon = 1e300;
        let err = train(&trees, &trees, &cfg, |_| {}).unwrap_err();
        assert!(matches!(err, TrainingError::Diverged { .. }), "{err}");
    }
}
