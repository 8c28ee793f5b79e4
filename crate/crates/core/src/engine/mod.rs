//! Streaming evaluation of timed automata.
//!
//! Two modes share the same compiled rules:
//!
//! * crisp: one configuration per automaton, stepped on hard labels;
//! * belief: an exact distribution over configurations, propagated through
//!   every activity value weighted by the window's activity distribution.
//!   Window `t` is labeled with event `e` when the probability mass of
//!   transitions that emit `e` at `t` reaches the threshold.
//!
//! Engine state per automaton is a configuration (or a distribution over
//! configurations); nothing about past windows is retained.

mod belief;
mod crisp;
mod latency;

use std::time::Instant;

use thiserror::Error;

use crate::par::Exec;
use crate::ruledsl::{validate_rule_set, Diagnostic, TimedAutomaton};
use crate::types::{
    argmax_label, ActivityDistribution, ActivityLabel, CELabelSeq, LabelSet, Trace, Vocabulary,
};

pub use belief::{BeliefState, BeliefStream, DEFAULT_PRUNE_EPSILON};
pub use crisp::{step_crisp, CrispStream, MachineConfig};
pub use latency::{bench_latency, LatencyReport, LatencyStats};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
    #[error("belief threshold must be in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("rules failed validation: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidRules(Vec<Diagnostic>),
    #[error("trace {0} has no soft observations")]
    MissingSoft(String),
}

/// How soft observations are consumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SoftMode {
    /// Reduce each window to its most probable activity, then run crisp.
    Argmax,
    /// Exact belief propagation with the given emission threshold.
    Belief { threshold: f64 },
}

impl SoftMode {
    pub fn belief() -> Self {
        SoftMode::Belief {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Which observations of a [`Trace`] a detector consumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectMode {
    Crisp,
    Soft(SoftMode),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectorOutput {
    pub labels: CELabelSeq,
    pub per_window_latency_ns: Option<Vec<u64>>,
}

/// A validated rule set ready to run.
#[derive(Debug, Clone)]
pub struct Detector {
    rules: Vec<TimedAutomaton>,
    vocab: Vocabulary,
}

impl Detector {
    /// Validates `rules` (which must share one vocabulary) and prepares them.
    pub fn new(rules: Vec<TimedAutomaton>) -> Result<Self, EngineError> {
        let vocab = rules.first().map(|a| a.vocab.clone()).unwrap_or_default();
        if let Some(a) = rules.iter().find(|a| a.vocab != vocab) {
            return Err(EngineError::VocabularyMismatch(format!(
                "automaton `{}` uses a different vocabulary from `{}`",
                a.event, rules[0].event
            )));
        }
        let diags: Vec<Diagnostic> = validate_rule_set(&rules, &vocab)
            .into_iter()
            .filter(Diagnostic::is_error)
            .collect();
        if !diags.is_empty() {
            return Err(EngineError::InvalidRules(diags));
        }
        Ok(Self { rules, vocab })
    }

    pub fn rules(&self) -> &[TimedAutomaton] {
        &self.rules
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn crisp_stream(&self) -> CrispStream<'_> {
        CrispStream::new(self)
    }

    pub fn belief_stream(&self, threshold: f64) -> Result<BeliefStream<'_>, EngineError> {
        BeliefStream::new(self, threshold, DEFAULT_PRUNE_EPSILON)
    }

    pub fn run_crisp(&self, activities: &[ActivityLabel]) -> Result<DetectorOutput, EngineError> {
        self.crisp_impl(activities, false)
    }

    pub fn run_crisp_timed(
        &self,
        activities: &[ActivityLabel],
    ) -> Result<DetectorOutput, EngineError> {
        self.crisp_impl(activities, true)
    }

    pub fn run_soft(
        &self,
        soft: &[ActivityDistribution],
        mode: SoftMode,
    ) -> Result<DetectorOutput, EngineError> {
        self.soft_impl(soft, mode, false)
    }

    pub fn run_soft_timed(
        &self,
        soft: &[ActivityDistribution],
        mode: SoftMode,
    ) -> Result<DetectorOutput, EngineError> {
        self.soft_impl(soft, mode, true)
    }

    pub fn run_trace(
        &self,
        trace: &Trace,
        mode: DetectMode,
        timing: bool,
    ) -> Result<DetectorOutput, EngineError> {
        match mode {
            DetectMode::Crisp => self.crisp_impl(&trace.activities, timing),
            DetectMode::Soft(m) => {
                let soft = trace
                    .soft
                    .as_deref()
                    .ok_or_else(|| EngineError::MissingSoft(trace.id.clone()))?;
                self.soft_impl(soft, m, timing)
            }
        }
    }

    /// Runs every trace; output order follows input order.
    pub fn run_batch(
        &self,
        traces: &[Trace],
        mode: DetectMode,
        timing: bool,
        exec: Exec,
    ) -> Result<Vec<DetectorOutput>, EngineError> {
        exec.try_map_slice(traces, |t| self.run_trace(t, mode, timing))
    }

    fn check_soft(&self, soft: &[ActivityDistribution]) -> Result<(), EngineError> {
        let k = self.vocab.len();
        match soft.iter().position(|d| d.len() != k) {
            Some(t) => Err(EngineError::VocabularyMismatch(format!(
                "window {t} has a distribution over {} activities, rules expect {k}",
                soft[t].len()
            ))),
            None => Ok(()),
        }
    }

    fn crisp_impl(
        &self,
        activities: &[ActivityLabel],
        timing: bool,
    ) -> Result<DetectorOutput, EngineError> {
        let mut stream = self.crisp_stream();
        let mut labels = Vec::with_capacity(activities.len());
        let mut lat = timing.then(|| Vec::with_capacity(activities.len()));
        for &x in activities {
            let start = timing.then(Instant::now);
            labels.push(stream.push(x)?);
            if let (Some(lat), Some(start)) = (lat.as_mut(), start) {
                lat.push(start.elapsed().as_nanos() as u64);
            }
        }
        let start = timing.then(Instant::now);
        let tail = stream.finish();
        attach_tail(&mut labels, tail);
        if let (Some(lat), Some(start)) = (lat.as_mut(), start) {
            if let Some(last) = lat.last_mut() {
                *last += start.elapsed().as_nanos() as u64;
            }
        }
        Ok(DetectorOutput {
            labels: CELabelSeq(labels),
            per_window_latency_ns: lat,
        })
    }

    fn soft_impl(
        &self,
        soft: &[ActivityDistribution],
        mode: SoftMode,
        timing: bool,
    ) -> Result<DetectorOutput, EngineError> {
        self.check_soft(soft)?;
        match mode {
            SoftMode::Argmax => {
                let hard: Vec<ActivityLabel> = soft.iter().map(argmax_label).collect();
                self.crisp_impl(&hard, timing)
            }
            SoftMode::Belief { threshold } => {
                let mut stream = self.belief_stream(threshold)?;
                let mut labels = Vec::with_capacity(soft.len());
                let mut lat = timing.then(|| Vec::with_capacity(soft.len()));
                for d in soft {
                    let start = timing.then(Instant::now);
                    labels.push(stream.push(d)?.labels);
                    if let (Some(lat), Some(start)) = (lat.as_mut(), start) {
                        lat.push(start.elapsed().as_nanos() as u64);
                    }
                }
                let start = timing.then(Instant::now);
                let tail = stream.finish().labels;
                attach_tail(&mut labels, tail);
                if let (Some(lat), Some(start)) = (lat.as_mut(), start) {
                    if let Some(last) = lat.last_mut() {
                        *last += start.elapsed().as_nanos() as u64;
                    }
                }
                Ok(DetectorOutput {
                    labels: CELabelSeq(labels),
                    per_window_latency_ns: lat,
                })
            }
        }
    }
}

fn attach_tail(labels: &mut [LabelSet], tail: LabelSet) {
    if let Some(last) = labels.last_mut() {
        last.extend(tail);
    }
}

/// Runs `rules` over hard labels from their initial configurations.
pub fn run_crisp(
    rules: &[TimedAutomaton],
    activities: &[ActivityLabel],
) -> Result<DetectorOutput, EngineError> {
    Detector::new(rules.to_vec())?.run_crisp(activities)
}

/// Runs `rules` over soft observations in the given mode.
pub fn run_on_soft(
    rules: &[TimedAutomaton],
    soft: &[ActivityDistribution],
    mode: SoftMode,
) -> Result<DetectorOutput, EngineError> {
    Detector::new(rules.to_vec())?.run_soft(soft, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ruledsl::builtin_rules;
    use crate::types::{EventType, WindowSpec};

    fn det() -> Detector {
        Detector::new(builtin_rules(WindowSpec::default()).unwrap()).unwrap()
    }

    fn acts(names: &[&str]) -> Vec<ActivityLabel> {
        let v = Vocabulary::default();
        names.iter().map(|n| v.label(n).unwrap()).collect()
    }

    fn e(id: &str) -> EventType {
        EventType::from(id)
    }

    #[test]
    fn restroom_violation_trace() {
        let out = det()
            .run_crisp(&acts(&[
                "use_restroom",
                "use_restroom",
                "wash_hands",
                "wash_hands",
                "wash_hands",
                "work",
            ]))
            .unwrap();
        let expect: Vec<LabelSet> = (0..6)
            .map(|t| {
                if t == 5 {
                    [e("e1")].into()
                } else {
                    LabelSet::new()
                }
            })
            .collect();
        assert_eq!(out.labels.0, expect);
        assert!(out.per_window_latency_ns.is_none());
    }

    #[test]
    fn restroom_compliant_trace() {
        let out = det()
            .run_crisp(&acts(&[
                "use_restroom",
                "wash_hands",
                "wash_hands",
                "wash_hands",
                "wash_hands",
                "work",
            ]))
            .unwrap();
        assert!(out.labels.0.iter().all(LabelSet::is_empty));
    }

    #[test]
    fn walking_then_sitting_is_quiet() {
        let out = det().run_crisp(&acts(&["walk", "walk", "sit"])).unwrap();
        assert_eq!(out.labels, CELabelSeq::empty(3));
    }

    #[test]
    fn open_brushing_session_closes_at_trace_end() {
        let out = det()
            .run_crisp(&acts(&["brush_teeth", "brush_teeth", "brush_teeth"]))
            .unwrap();
        assert_eq!(out.labels.positions(&e("e3")), vec![2]);
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let out = det().run_crisp(&[]).unwrap();
        assert!(out.labels.is_empty());
        let out = det().run_soft(&[], SoftMode::belief()).unwrap();
        assert!(out.labels.is_empty());
    }

    #[test]
    fn out_of_vocabulary_label_rejected() {
        let err = det().run_crisp(&[ActivityLabel::new(10)]).unwrap_err();
        assert!(matches!(err, EngineError::VocabularyMismatch(_)));
        let err = det()
            .run_soft(&[ActivityDistribution::uniform(3)], SoftMode::Argmax)
            .unwrap_err();
        assert!(matches!(err, EngineError::VocabularyMismatch(_)));
    }

    #[test]
    fn threshold_must_be_in_unit_interval() {
        let soft = vec![ActivityDistribution::uniform(10)];
        for bad in [0.0, -0.1, 1.5, f64::NAN] {
            let err = det()
                .run_soft(&soft, SoftMode::Belief { threshold: bad })
                .unwrap_err();
            assert!(matches!(err, EngineError::InvalidThreshold(_)));
        }
        assert!(det()
            .run_soft(&soft, SoftMode::Belief { threshold: 1.0 })
            .is_ok());
    }

    #[test]
    fn timing_has_one_entry_per_window() {
        let a = acts(&["walk", "brush_teeth", "walk", "walk", "walk"]);
        let out = det().run_crisp_timed(&a).unwrap();
        assert_eq!(out.per_window_latency_ns.unwrap().len(), 5);
        let soft: Vec<_> = a
            .iter()
            .map(|x| ActivityDistribution::one_hot(10, *x))
            .collect();
        let out = det().run_soft_timed(&soft, SoftMode::belief()).unwrap();
        assert_eq!(out.per_window_latency_ns.unwrap().len(), 5);
    }

    #[test]
    fn mixed_vocabularies_rejected() {
        let mut rules = builtin_rules(WindowSpec::default()).unwrap();
        rules[1].vocab = Vocabulary::new(["a", "b"]).unwrap();
        assert!(matches!(
            Detector::new(rules),
            Err(EngineError::VocabularyMismatch(_))
        ));
    }

    #[test]
    fn missing_soft_reported() {
        let t = Trace::new(
            "x",
            WindowSpec::default(),
            acts(&["walk"]),
            None,
            None,
            None,
        )
        .unwrap();
        let err = det()
            .run_trace(&t, DetectMode::Soft(SoftMode::Argmax), false)
            .unwrap_err();
        assert!(matches!(err, EngineError::MissingSoft(_)));
    }
}
