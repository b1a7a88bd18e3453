//! Labeled bracket precision, recall and F1 (PARSEVAL), per sentence and
//! micro-averaged over a corpus.
//!
//! Brackets are compared exactly on `(label, i, j)` with set semantics. No
//! punctuation or label-equivalence rules are applied.

use std::fmt;

use num_rational::Ratio;
use thiserror::Error;

use crate::treebank::BracketSet;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("gold bracket set is empty")]
    EmptyGold,
    #[error("no sentence pairs to score")]
    EmptyCorpus,
}

/// Raw match counts. Sums of these give the corpus micro-average.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BracketCounts {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl BracketCounts {
    pub fn of(pred: &BracketSet, gold: &BracketSet) -> BracketCounts {
        BracketCounts { matched: pred.matched(gold), predicted: pred.len(), gold: gold.len() }
    }

    /// F1 as an exact fraction, `2m / (|pred| + |gold|)`. This equals
    /// `2rp / (r + p)` whenever `m > 0` and is zero otherwise.
    pub fn f1_exact(&self) -> Ratio<u64> {
        let denom = (self.predicted + self.gold) as u64;
        if denom == 0 {
            return Ratio::from_integer(0);
        }
        Ratio::new(2 * self.matched as u64, denom)
    }

    pub fn recall_exact(&self) -> Ratio<u64> {
        ratio(self.matched, self.gold)
    }

    pub fn precision_exact(&self) -> Ratio<u64> {
        ratio(self.matched, self.predicted)
    }

    pub fn report(&self) -> F1Report {
        let recall = frac(self.matched, self.gold);
        let precision = frac(self.matched, self.predicted);
        let f1 = if recall + precision > 0.0 { 2.0 * recall * precision / (recall + precision) } else { 0.0 };
        F1Report { matched: self.matched, predicted: self.predicted, gold: self.gold, recall, precision, f1 }
    }
}

impl std::ops::Add for BracketCounts {
    type Output = BracketCounts;

    fn add(self, o: BracketCounts) -> BracketCounts {
        BracketCounts {
            matched: self.matched + o.matched,
            predicted: self.predicted + o.predicted,
            gold: self.gold + o.gold,
        }
    }
}

fn ratio(num: usize, den: usize) -> Ratio<u64> {
    if den == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(num as u64, den as u64)
    }
}

fn frac(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Report {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl F1Report {
    pub fn counts(&self) -> BracketCounts {
        BracketCounts { matched: self.matched, predicted: self.predicted, gold: self.gold }
    }
}

impl fmt::Display for F1Report {
    /// `LR 33.33 LP 100.00 F1 50.00`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LR {:.2} LP {:.2} F1 {:.2}", 100.0 * self.recall, 100.0 * self.precision, 100.0 * self.f1)
    }
}

pub fn parseval(pred: &BracketSet, gold: &BracketSet) -> Result<F1Report, MetricsError> {
    if gold.is_empty() {
        return Err(MetricsError::EmptyGold);
    }
    Ok(BracketCounts::of(pred, gold).report())
}

/// Micro-average: counts are summed over sentences before dividing.
pub fn corpus_parseval<'a, I>(pairs: I) -> Result<F1Report, MetricsError>
where
    I: IntoIterator<Item = (&'a BracketSet, &'a BracketSet)>,
{
    let mut total = BracketCounts::default();
    let mut any = false;
    for (pred, gold) in pairs {
        if gold.is_empty() {
            return Err(MetricsError::EmptyGold);
        }
        total = total + BracketCounts::of(pred, gold);
        any = true;
    }
    if !any {
        return Err(MetricsError::EmptyCorpus);
    }
    Ok(total.report())
}

/// Unweighted mean of per-sentence F1. Reported for reference only; the
/// headline number is [`corpus_parseval`].
pub fn macro_f1<'a, I>(pairs: I) -> Result<f64, MetricsError>
where
    I: IntoIterator<Item = (&'a BracketSet, &'a BracketSet)>,
{
    let mut sum = 0.0;
    let mut count = 0usize;
    for (pred, gold) in pairs {
        sum += parseval(pred, gold)?.f1;
        count += 1;
    }
    if count == 0 {
        return Err(MetricsError::EmptyCorpus);
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::Bracket;
    use proptest::prelude::*;

    fn set(items: &[(&str, usize, usize)]) -> BracketSet {
        items.iter().map(|&(l, i, j)| Bracket::new(l, i, j)).collect()
    }

    fn example_gold() -> BracketSet {
        set(&[("NP", 0, 1), ("NP", 4, 5), ("S", 3, 5), ("VP", 3, 5), ("VP", 1, 5), ("S", 0, 5)])
    }

    #[test]
    fn identity_is_perfect() {
        let r = parseval(&example_gold(), &example_gold()).unwrap();
        assert_eq!((r.recall, r.precision, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn partial_prediction() {
        let pred = set(&[("NP", 0, 1), ("S", 0, 5)]);
        let r = parseval(&pred, &example_gold()).unwrap();
        assert_eq!((r.matched, r.predicted, r.gold), (2, 2, 6));
        assert!((r.recall - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.precision, 1.0);
        assert!((r.f1 - 0.5).abs() < 1e-12);
        assert_eq!(r.counts().f1_exact(), Ratio::new(1, 2));
        assert_eq!(r.to_string(), "LR 33.33 LP 100.00 F1 50.00");
    }

    #[test]
    fn zero_match() {
        let r = parseval(&set(&[("X", 0, 1)]), &example_gold()).unwrap();
        assert_eq!(r.f1, 0.0);
        assert_eq!(r.counts().f1_exact(), Ratio::from_integer(0));
    }

    #[test]
    fn empty_gold_is_an_error() {
        assert_eq!(parseval(&example_gold(), &BracketSet::new()), Err(MetricsError::EmptyGold));
    }

    #[test]
    fn corpus_single_pair_matches_sentence() {
        let pred = set(&[("NP", 0, 1), ("S", 0, 5)]);
        let gold = example_gold();
        let one = parseval(&pred, &gold).unwrap();
        let corpus = corpus_parseval([(&pred, &gold)]).unwrap();
        assert_eq!(one, corpus);
    }

    #[test]
    fn corpus_all_perfect() {
        let g = example_gold();
        let h = set(&[("NP", 0, 1)]);
        let r = corpus_parseval([(&g, &g), (&h, &h)]).unwrap();
        assert_eq!(r.f1, 1.0);
    }

    #[test]
    fn corpus_micro_average() {
        // (matched, pred, gold) = (2, 2, 6) and (4, 4, 6).
        let gold = example_gold();
        let a = set(&[("NP", 0, 1), ("S", 0, 5)]);
        let b = set(&[("NP", 0, 1), ("S", 0, 5), ("VP", 1, 5), ("NP", 4, 5)]);
        let r = corpus_parseval([(&a, &gold), (&b, &gold)]).unwrap();
        assert_eq!((r.matched, r.predicted, r.gold), (6, 6, 12));
        assert!((r.recall - 0.5).abs() < 1e-12);
        assert_eq!(r.precision, 1.0);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(corpus_parseval(std::iter::empty()), Err(MetricsError::EmptyCorpus));
        let m = macro_f1([(&a, &gold), (&b, &gold)]).unwrap();
        assert!((m - (0.5 + 0.8) / 2.0).abs() < 1e-12);
    }

    fn arb_set() -> impl Strategy<Value = BracketSet> {
        prop::collection::vec((0usize..3, 0usize..6, 1usize..4), 0..10)
            .prop_map(|v| v.into_iter().map(|(l, i, w)| Bracket::new(["A", "B", "C"][l], i, i + w)).collect())
    }

    proptest! {
        #[test]
        fn swapping_roles_swaps_recall_and_precision(a in arb_set(), b in arb_set()) {
            prop_assume!(!a.is_empty() && !b.is_empty());
            let ab = parseval(&a, &b).unwrap();
            let ba = parseval(&b, &a).unwrap();
            prop_assert_eq!(ab.recall, ba.precision);
            prop_assert_eq!(ab.precision, ba.recall);
            prop_assert_eq!(BracketCounts::of(&a, &b).f1_exact(), BracketCounts::of(&b, &a).f1_exact());
        }

        #[test]
        fn adding_correct_bracket_never_lowers_f1(pred in arb_set(), gold in arb_set(), pick in 0usize..10) {
            prop_assume!(!gold.is_empty());
            let extra = gold.iter().nth(pick % gold.len()).unwrap().clone();
            let before = BracketCounts::of(&pred, &gold).f1_exact();
            let mut more = pred.clone();
            more.insert(extra);
            prop_assert!(BracketCounts::of(&more, &gold).f1_exact() >= before);
        }

        #[test]
        fn adding_wrong_bracket_never_raises_precision(pred in arb_set(), gold in arb_set()) {
            prop_assume!(!gold.is_empty());
            let before = BracketCounts::of(&pred, &gold).precision_exact();
            let mut more = pred.clone();
            more.insert(Bracket::new("WRONG", 0, 1));
            prop_assert!(BracketCounts::of(&more, &gold).precision_exact() <= before || pred.is_empty());
        }

        #[test]
        fn f1_is_a_ratio(pred in arb_set(), gold in arb_set()) {
            prop_assume!(!gold.is_empty());
            let r = parseval(&pred, &gold).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.f1));
            let exact = BracketCounts::of(&pred, &gold).f1_exact();
            prop_assert!((r.f1 - *exact.numer() as f64 / *exact.denom() as f64).abs() < 1e-12);
        }
    }
}
