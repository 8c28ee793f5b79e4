//! Length accuracy, conditional (window-wise) F1 and coarse (presence) F1.
//!
//! Predictions are paired with ground truth by id. A prediction may have any
//! length; only length-matched pairs enter the conditional F1, while coarse
//! F1 and length accuracy use every pair.
//!
//! A per-type F1 is `None` (reported as `null`) when the type never occurs
//! in either side of the pairs it is computed over, and averages skip such
//! types.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{CELabelSeq, EventType, Trace};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("nothing to evaluate")]
    Empty,
    #[error("sample `{0}` has no counterpart on the other side")]
    UnpairedId(String),
    #[error("sample id `{0}` occurs more than once")]
    DuplicateId(String),
}

/// A detector's label sequence for one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub id: String,
    pub labels: CELabelSeq,
}

impl Prediction {
    pub fn new(id: impl Into<String>, labels: CELabelSeq) -> Self {
        Self {
            id: id.into(),
            labels,
        }
    }

    /// Ground truth of a labeled trace, `None` when it carries no labels.
    pub fn truth_of(trace: &Trace) -> Option<Self> {
        trace
            .labels
            .as_ref()
            .map(|l| Self::new(trace.id.clone(), l.clone()))
    }
}

/// How window-level counts are combined into a conditional F1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Aggregation {
    /// Pool TP/FP/FN over all windows of all length-matched samples.
    #[default]
    Micro,
    /// F1 per sample (skipping samples where the type is absent on both
    /// sides), then the mean over samples.
    PerSample,
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub aggregation: F1Aggregation,
    /// Types to report. Defaults to every type seen in truth or prediction.
    pub event_types: Option<Vec<EventType>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Summary {
    pub per_type: BTreeMap<String, Option<f64>>,
    pub average: Option<f64>,
}

impl F1Summary {
    fn from_scores(scores: BTreeMap<String, Option<f64>>) -> Self {
        let defined: Vec<f64> = scores.values().flatten().copied().collect();
        let average = if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        };
        Self {
            per_type: scores,
            average,
        }
    }

    pub fn get(&self, event: &str) -> Option<f64> {
        self.per_type.get(event).copied().flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub n_length_matched: usize,
    pub length_accuracy: f64,
    pub conditional_f1: F1Summary,
    pub coarse_f1: F1Summary,
    pub aggregation: F1Aggregation,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    tp: u64,
    fp: u64,
    fn_: u64,
}

impl Counts {
    fn add(&mut self, pred: bool, truth: bool) {
        match (pred, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => {}
        }
    }

    fn f1(self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        (denom > 0).then(|| 2.0 * self.tp as f64 / denom as f64)
    }
}

type Pair<'a> = (&'a CELabelSeq, &'a CELabelSeq);

/// Pairs predictions with truths by id, ordered by id.
fn pair<'a>(
    preds: &'a [Prediction],
    truths: &'a [Prediction],
) -> Result<Vec<Pair<'a>>, MetricsError> {
    if preds.is_empty() && truths.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut by_id: HashMap<&str, &CELabelSeq> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.id.as_str(), &p.labels).is_some() {
            return Err(MetricsError::DuplicateId(p.id.clone()));
        }
    }
    let mut seen = BTreeSet::new();
    let mut pairs: Vec<(&str, Pair)> = Vec::with_capacity(truths.len());
    for t in truths {
        if !seen.insert(t.id.as_str()) {
            return Err(MetricsError::DuplicateId(t.id.clone()));
        }
        let p = by_id
            .get(t.id.as_str())
            .ok_or_else(|| MetricsError::UnpairedId(t.id.clone()))?;
        pairs.push((t.id.as_str(), (*p, &t.labels)));
    }
    if let Some(p) = preds.iter().find(|p| !seen.contains(p.id.as_str())) {
        return Err(MetricsError::UnpairedId(p.id.clone()));
    }
    pairs.sort_unstable_by(|a, b| a.0.cmp(b.0));
    Ok(pairs.into_iter().map(|(_, p)| p).collect())
}

fn types_of(pairs: &[Pair]) -> Vec<EventType> {
    let mut all = BTreeSet::new();
    for (p, t) in pairs {
        for set in p.windows().iter().chain(t.windows()) {
            all.extend(set.iter().cloned());
        }
    }
    all.into_iter().collect()
}

/// Fraction of samples whose prediction has the truth's length.
pub fn length_accuracy(preds: &[Prediction], truths: &[Prediction]) -> Result<f64, MetricsError> {
    let pairs = pair(preds, truths)?;
    Ok(matched(&pairs).count() as f64 / pairs.len() as f64)
}

fn matched<'a, 'b>(pairs: &'b [Pair<'a>]) -> impl Iterator<Item = &'b Pair<'a>> {
    pairs.iter().filter(|(p, t)| p.len() == t.len())
}

fn conditional_scores(pairs: &[Pair], types: &[EventType], agg: F1Aggregation) -> F1Summary {
    let mut scores = BTreeMap::new();
    for e in types {
        let score = match agg {
            F1Aggregation::Micro => {
                let mut c = Counts::default();
                for (p, t) in matched(pairs) {
                    for (ps, ts) in p.windows().iter().zip(t.windows()) {
                        c.add(ps.contains(e), ts.contains(e));
                    }
                }
                c.f1()
            }
            F1Aggregation::PerSample => {
                let per: Vec<f64> = matched(pairs)
                    .filter_map(|(p, t)| {
                        let mut c = Counts::default();
                        for (ps, ts) in p.windows().iter().zip(t.windows()) {
                            c.add(ps.contains(e), ts.contains(e));
                        }
                        c.f1()
                    })
                    .collect();
                (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64)
            }
        };
        scores.insert(e.to_string(), score);
    }
    F1Summary::from_scores(scores)
}

fn coarse_scores(pairs: &[Pair], types: &[EventType]) -> F1Summary {
    let mut scores = BTreeMap::new();
    for e in types {
        let mut c = Counts::default();
        for (p, t) in pairs {
            c.add(p.contains(e), t.contains(e));
        }
        scores.insert(e.to_string(), c.f1());
    }
    F1Summary::from_scores(scores)
}

/// Window-wise F1 over length-matched samples (micro-aggregated).
pub fn conditional_f1(
    preds: &[Prediction],
    truths: &[Prediction],
) -> Result<F1Summary, MetricsError> {
    let pairs = pair(preds, truths)?;
    Ok(conditional_scores(
        &pairs,
        &types_of(&pairs),
        F1Aggregation::Micro,
    ))
}

/// Sample-wise F1 on whether each type occurs anywhere in the sequence.
pub fn coarse_f1(preds: &[Prediction], truths: &[Prediction]) -> Result<F1Summary, MetricsError> {
    let pairs = pair(preds, truths)?;
    Ok(coarse_scores(&pairs, &types_of(&pairs)))
}

pub fn evaluate(preds: &[Prediction], truths: &[Prediction]) -> Result<EvalReport, MetricsError> {
    evaluate_with(preds, truths, &EvalOptions::default())
}

pub fn evaluate_with(
    preds: &[Prediction],
    truths: &[Prediction],
    opts: &EvalOptions,
) -> Result<EvalReport, MetricsError> {
    let pairs = pair(preds, truths)?;
    let types = opts.event_types.clone().unwrap_or_else(|| types_of(&pairs));
    let n_length_matched = matched(&pairs).count();
    Ok(EvalReport {
        n_samples: pairs.len(),
        n_length_matched,
        length_accuracy: n_length_matched as f64 / pairs.len() as f64,
        conditional_f1: conditional_scores(&pairs, &types, opts.aggregation),
        coarse_f1: coarse_scores(&pairs, &types),
        aggregation: opts.aggregation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::LabelSet;

    fn seq(len: usize, marks: &[(usize, &str)]) -> CELabelSeq {
        let mut s = CELabelSeq::empty(len);
        for (t, e) in marks {
            s.0[*t].insert(EventType::from(*e));
        }
        s
    }

    fn p(id: &str, s: CELabelSeq) -> Prediction {
        Prediction::new(id, s)
    }

    #[test]
    fn length_accuracy_counts_matches() {
        let truth: Vec<_> = (0..4).map(|i| p(&format!("s{i}"), seq(60, &[]))).collect();
        let mut pred = truth.clone();
        pred[1].labels = seq(59, &[]);
        pred[2].labels = seq(61, &[]);
        pred[3].labels = seq(0, &[]);
        assert_eq!(length_accuracy(&pred, &truth).unwrap(), 0.25);
        assert_eq!(length_accuracy(&truth, &truth).unwrap(), 1.0);
    }

    #[test]
    fn empty_prediction_is_a_mismatch() {
        let truth = [p("a", seq(60, &[(3, "e1")]))];
        let pred = [p("a", CELabelSeq(Vec::new()))];
        assert_eq!(length_accuracy(&pred, &truth).unwrap(), 0.0);
    }

    #[test]
    fn identical_predictions_score_one() {
        let truth = [
            p("a", seq(10, &[(2, "e1"), (5, "e3")])),
            p("b", seq(10, &[(7, "e2")])),
        ];
        let r = evaluate(&truth, &truth).unwrap();
        assert_eq!(r.length_accuracy, 1.0);
        for e in ["e1", "e2", "e3"] {
            assert_eq!(r.conditional_f1.get(e), Some(1.0));
            assert_eq!(r.coarse_f1.get(e), Some(1.0));
        }
        assert_eq!(r.conditional_f1.average, Some(1.0));
    }

    #[test]
    fn silent_predictor_scores_zero() {
        let truth = [p("a", seq(10, &[(2, "e1"), (4, "e2")]))];
        let pred = [p("a", seq(10, &[]))];
        let r = evaluate(&pred, &truth).unwrap();
        assert_eq!(r.conditional_f1.get("e1"), Some(0.0));
        assert_eq!(r.conditional_f1.get("e2"), Some(0.0));
        assert_eq!(r.conditional_f1.average, Some(0.0));
    }

    #[test]
    fn off_by_one_window_scores_zero_conditional_one_coarse() {
        let truth = [p("a", seq(10, &[(5, "e1")]))];
        let pred = [p("a", seq(10, &[(4, "e1")]))];
        let r = evaluate(&pred, &truth).unwrap();
        assert_eq!(r.conditional_f1.get("e1"), Some(0.0));
        assert_eq!(r.coarse_f1.get("e1"), Some(1.0));
    }

    #[test]
    fn coarse_silent_predictor_scores_zero() {
        let truth: Vec<_> = (0..4)
            .map(|i| {
                let marks: &[(usize, &str)] = if i % 2 == 0 { &[(1, "e2")] } else { &[] };
                p(&format!("s{i}"), seq(5, marks))
            })
            .collect();
        let pred: Vec<_> = truth.iter().map(|t| p(&t.id, seq(5, &[]))).collect();
        assert_eq!(coarse_f1(&pred, &truth).unwrap().get("e2"), Some(0.0));
    }

    #[test]
    fn coarse_identity() {
        let truth = [p("a", seq(4, &[(0, "e1")])), p("b", seq(4, &[(3, "e3")]))];
        let c = coarse_f1(&truth, &truth).unwrap();
        assert_eq!(c.get("e1"), Some(1.0));
        assert_eq!(c.get("e3"), Some(1.0));
        assert_eq!(c.average, Some(1.0));
    }

    #[test]
    fn truncated_predictions_only_count_for_coarse() {
        let truth = [p("a", seq(10, &[(9, "e1")])), p("b", seq(10, &[(2, "e1")]))];
        let pred = [p("a", seq(5, &[(1, "e1")])), p("b", seq(10, &[]))];
        let r = evaluate(&pred, &truth).unwrap();
        assert_eq!(r.n_length_matched, 1);
        // only b is matched: 0 TP, 1 FN
        assert_eq!(r.conditional_f1.get("e1"), Some(0.0));
        // a: TP, b: FN
        assert_eq!(r.coarse_f1.get("e1"), Some(2.0 / 3.0));
    }

    #[test]
    fn micro_counts_pool_windows() {
        let truth = [
            p("a", seq(4, &[(0, "e1"), (1, "e1")])),
            p("b", seq(4, &[(2, "e1")])),
        ];
        let pred = [
            p("a", seq(4, &[(0, "e1")])),
            p("b", seq(4, &[(2, "e1"), (3, "e1")])),
        ];
        // TP 2, FP 1, FN 1
        let micro = conditional_f1(&pred, &truth).unwrap();
        assert_eq!(micro.get("e1"), Some(4.0 / 6.0));
        let per = evaluate_with(
            &pred,
            &truth,
            &EvalOptions {
                aggregation: F1Aggregation::PerSample,
                event_types: None,
            },
        )
        .unwrap();
        assert_eq!(per.conditional_f1.get("e1"), Some(2.0 / 3.0));
    }

    #[test]
    fn absent_types_are_undefined() {
        let truth = [p("a", seq(3, &[(0, "e1")]))];
        let opts = EvalOptions {
            event_types: Some(vec!["e1".into(), "e2".into()]),
            ..EvalOptions::default()
        };
        let r = evaluate_with(&truth, &truth, &opts).unwrap();
        assert_eq!(r.conditional_f1.per_type["e2"], None);
        assert_eq!(r.conditional_f1.average, Some(1.0));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"e2\":null"), "{json}");
    }

    #[test]
    fn false_alarms_on_absent_type_score_zero() {
        let truth = [p("a", seq(3, &[]))];
        let pred = [p("a", seq(3, &[(1, "e3")]))];
        let r = evaluate(&pred, &truth).unwrap();
        assert_eq!(r.conditional_f1.get("e3"), Some(0.0));
    }

    #[test]
    fn no_matched_samples_leave_conditional_undefined() {
        let truth = [p("a", seq(3, &[(0, "e1")]))];
        let pred = [p("a", seq(2, &[(0, "e1")]))];
        let r = evaluate(&pred, &truth).unwrap();
        assert_eq!(r.conditional_f1.per_type["e1"], None);
        assert_eq!(r.conditional_f1.average, None);
        assert_eq!(r.coarse_f1.get("e1"), Some(1.0));
    }

    #[test]
    fn pairing_errors() {
        let a = [p("a", seq(1, &[]))];
        let b = [p("b", seq(1, &[]))];
        assert_eq!(evaluate(&[], &[]), Err(MetricsError::Empty));
        assert_eq!(evaluate(&a, &b), Err(MetricsError::UnpairedId("b".into())));
        assert_eq!(evaluate(&a, &[]), Err(MetricsError::UnpairedId("a".into())));
        let dup = [p("a", seq(1, &[])), p("a", seq(1, &[]))];
        assert_eq!(
            evaluate(&dup, &a),
            Err(MetricsError::DuplicateId("a".into()))
        );
    }

    #[test]
    fn report_json_field_names() {
        let truth = [p("a", seq(2, &[(0, "e1")]))];
        let v = serde_json::to_value(evaluate(&truth, &truth).unwrap()).unwrap();
        for k in [
            "n_samples",
            "n_length_matched",
            "length_accuracy",
            "conditional_f1",
            "coarse_f1",
            "aggregation",
        ] {
            assert!(v.get(k).is_some(), "missing {k}");
        }
        assert_eq!(v["aggregation"], "micro");
        assert_eq!(v["conditional_f1"]["per_type"]["e1"], 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_seq(len: usize) -> impl Strategy<Value = CELabelSeq> {
            prop::collection::vec(0u8..8, len).prop_map(|bits| {
                CELabelSeq(
                    bits.into_iter()
                        .map(|b| {
                            let mut s = LabelSet::new();
                            for (i, e) in ["e1", "e2", "e3"].iter().enumerate() {
                                if b & (1 << i) != 0 {
                                    s.insert(EventType::from(*e));
                                }
                            }
                            s
                        })
                        .collect(),
                )
            })
        }

        fn arb_pairs() -> impl Strategy<Value = Vec<(CELabelSeq, CELabelSeq)>> {
            prop::collection::vec(
                (1usize..12)
                    .prop_flat_map(|n| (arb_seq(n), prop_oneof![arb_seq(n), arb_seq(n + 1)])),
                1..8,
            )
        }

        fn split(v: &[(CELabelSeq, CELabelSeq)]) -> (Vec<Prediction>, Vec<Prediction>) {
            let truth = v
                .iter()
                .enumerate()
                .map(|(i, (t, _))| p(&format!("s{i}"), t.clone()))
                .collect();
            let pred = v
                .iter()
                .enumerate()
                .map(|(i, (_, q))| p(&format!("s{i}"), q.clone()))
                .collect();
            (pred, truth)
        }

        fn shifted(s: &CELabelSeq, k: usize) -> CELabelSeq {
            let mut w = s.0.clone();
            let n = w.len().max(1);
            w.rotate_right(k % n);
            CELabelSeq(w)
        }

        proptest! {
            #[test]
            fn permutation_invariant(v in arb_pairs(), rot in 0usize..8) {
                let (pred, truth) = split(&v);
                let mut pred2 = pred.clone();
                let mut truth2 = truth.clone();
                pred2.rotate_left(rot % pred.len());
                truth2.reverse();
                for agg in [F1Aggregation::Micro, F1Aggregation::PerSample] {
                    let o = EvalOptions { aggregation: agg, event_types: None };
                    prop_assert_eq!(
                        evaluate_with(&pred, &truth, &o).unwrap(),
                        evaluate_with(&pred2, &truth2, &o).unwrap()
                    );
                }
            }

            #[test]
            fn scores_bounded(v in arb_pairs()) {
                let (pred, truth) = split(&v);
                let r = evaluate(&pred, &truth).unwrap();
                for s in [&r.conditional_f1, &r.coarse_f1] {
                    for x in s.per_type.values().flatten().chain(s.average.iter()) {
                        prop_assert!((0.0..=1.0).contains(x));
                    }
                }
            }

            #[test]
            fn matched_shift_invariant(v in arb_pairs(), k in 0usize..12) {
                let (pred, truth) = split(&v);
                let pred_s: Vec<_> = pred.iter().map(|q| p(&q.id, shifted(&q.labels, k))).collect();
                let truth_s: Vec<_> = truth.iter().map(|q| p(&q.id, shifted(&q.labels, k))).collect();
                let a = evaluate(&pred, &truth).unwrap();
                let b = evaluate(&pred_s, &truth_s).unwrap();
                // rotating both sides in lockstep preserves every count and presence
                prop_assert_eq!(a, b);
            }

            #[test]
            fn identity_scores_one(v in arb_pairs()) {
                let (_, truth) = split(&v);
                let r = evaluate(&truth, &truth).unwrap();
                for s in [&r.conditional_f1, &r.coarse_f1] {
                    for x in s.per_type.values().flatten() {
                        prop_assert_eq!(*x, 1.0);
                    }
                }
            }
        }
    }
}
