//! Shared vocabulary: activities, windows, event labels and traces.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Activity tokens of the default vocabulary, in index order.
pub const DEFAULT_ACTIVITIES: [&str; 10] = [
    "walk",
    "sit",
    "stand",
    "work",
    "use_restroom",
    "wash_hands",
    "eat",
    "brush_teeth",
    "touch_object",
    "idle",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("vocabulary needs at least 2 activities, got {0}")]
    VocabularyTooSmall(usize),
    #[error(
        "invalid activity token {0:?} (expected lowercase ASCII letters, digits and underscores)"
    )]
    InvalidToken(String),
    #[error("duplicate activity token {0:?}")]
    DuplicateToken(String),
    #[error("window length must be positive")]
    ZeroWindow,
    #[error("{duration_s} s is not a whole number of {window_s} s windows")]
    NonDivisible { duration_s: u64, window_s: u32 },
    #[error("distribution has length {got}, vocabulary has {expected}")]
    DistributionLength { expected: usize, got: usize },
    #[error("distribution has a negative or non-finite entry")]
    InvalidProbability,
    #[error("distribution sums to {0}, expected 1")]
    NotNormalized(f64),
    #[error("trace {id}: {field} has length {got}, activities have {expected}")]
    LengthMismatch {
        id: String,
        field: &'static str,
        expected: usize,
        got: usize,
    },
}

pub(crate) fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
        && !s.as_bytes()[0].is_ascii_digit()
}

/// Ordered set of distinct activity tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
}

impl Vocabulary {
    pub fn new<I, S>(names: I) -> Result<Self, TypeError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(TypeError::VocabularyTooSmall(names.len()));
        }
        let mut seen = BTreeSet::new();
        for n in &names {
            if !is_token(n) {
                return Err(TypeError::InvalidToken(n.clone()));
            }
            if !seen.insert(n.as_str()) {
                return Err(TypeError::DuplicateToken(n.clone()));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, label: ActivityLabel) -> Option<&str> {
        self.names.get(label.index()).map(String::as_str)
    }

    pub fn label(&self, name: &str) -> Option<ActivityLabel> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(ActivityLabel::new)
    }

    pub fn labels(&self) -> impl Iterator<Item = ActivityLabel> + '_ {
        (0..self.names.len()).map(ActivityLabel::new)
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self {
            names: DEFAULT_ACTIVITIES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Hard observation of one window: an index into a [`Vocabulary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActivityLabel(u32);

impl ActivityLabel {
    pub const fn new(index: usize) -> Self {
        Self(index as u32)
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

/// Soft observation of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityDistribution {
    probs: Vec<f64>,
}

pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

impl ActivityDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, TypeError> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(TypeError::InvalidProbability);
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(TypeError::NotNormalized(sum));
        }
        Ok(Self { probs })
    }

    /// Validates against a vocabulary size as well as normalization.
    pub fn for_vocab(probs: Vec<f64>, vocab: &Vocabulary) -> Result<Self, TypeError> {
        if probs.len() != vocab.len() {
            return Err(TypeError::DistributionLength {
                expected: vocab.len(),
                got: probs.len(),
            });
        }
        Self::new(probs)
    }

    pub fn one_hot(k: usize, label: ActivityLabel) -> Self {
        let mut probs = vec![0.0; k];
        probs[label.index()] = 1.0;
        Self { probs }
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Most probable activity; ties go to the lowest index.
pub fn argmax_label(d: &ActivityDistribution) -> ActivityLabel {
    let mut best = 0;
    for (i, p) in d.probs.iter().enumerate() {
        if *p > d.probs[best] {
            best = i;
        }
    }
    ActivityLabel::new(best)
}

/// Window length in whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowSpec {
    seconds_per_window: u32,
}

impl WindowSpec {
    pub fn new(seconds_per_window: u32) -> Result<Self, TypeError> {
        if seconds_per_window == 0 {
            return Err(TypeError::ZeroWindow);
        }
        Ok(Self { seconds_per_window })
    }

    pub fn seconds(self) -> u32 {
        self.seconds_per_window
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            seconds_per_window: 5,
        }
    }
}

/// Converts a duration in seconds to a whole number of windows.
pub fn windows_for(duration_seconds: u64, window: WindowSpec) -> Result<u64, TypeError> {
    let w = u64::from(window.seconds_per_window);
    if !duration_seconds.is_multiple_of(w) {
        return Err(TypeError::NonDivisible {
            duration_s: duration_seconds,
            window_s: window.seconds_per_window,
        });
    }
    Ok(duration_seconds / w)
}

/// Identifier of a complex event type (`e1`, `e2`, ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventType(String);

impl EventType {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EventType {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Complex events detected in one window; empty means none.
pub type LabelSet = BTreeSet<EventType>;

/// Per-window complex-event labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CELabelSeq(pub Vec<LabelSet>);

impl CELabelSeq {
    pub fn empty(len: usize) -> Self {
        Self(vec![LabelSet::new(); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn windows(&self) -> &[LabelSet] {
        &self.0
    }

    /// Keeps only the given event type.
    pub fn restricted_to(&self, event: &EventType) -> Self {
        Self(
            self.0
                .iter()
                .map(|s| s.iter().filter(|e| *e == event).cloned().collect())
                .collect(),
        )
    }

    /// Window-wise union; the result has the longer length.
    pub fn union(&self, other: &Self) -> Self {
        let mut out = Self::empty(self.len().max(other.len()));
        for seq in [self, other] {
            for (i, set) in seq.0.iter().enumerate() {
                out.0[i].extend(set.iter().cloned());
            }
        }
        out
    }

    pub fn contains(&self, event: &EventType) -> bool {
        self.0.iter().any(|s| s.contains(event))
    }

    pub fn positions(&self, event: &EventType) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, s)| s.contains(event))
            .map(|(i, _)| i)
            .collect()
    }
}

impl From<Vec<LabelSet>> for CELabelSeq {
    fn from(v: Vec<LabelSet>) -> Self {
        Self(v)
    }
}

/// A labeled (or unlabeled) activity trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub id: String,
    pub window: WindowSpec,
    pub activities: Vec<ActivityLabel>,
    pub soft: Option<Vec<ActivityDistribution>>,
    pub labels: Option<CELabelSeq>,
    pub seed: Option<u64>,
}

impl Trace {
    pub fn new(
        id: impl Into<String>,
        window: WindowSpec,
        activities: Vec<ActivityLabel>,
        soft: Option<Vec<ActivityDistribution>>,
        labels: Option<CELabelSeq>,
        seed: Option<u64>,
    ) -> Result<Self, TypeError> {
        let t = Self {
            id: id.into(),
            window,
            activities,
            soft,
            labels,
            seed,
        };
        t.check_lengths()?;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }

    pub fn check_lengths(&self) -> Result<(), TypeError> {
        let expected = self.activities.len();
        if let Some(soft) = &self.soft {
            if soft.len() != expected {
                return Err(TypeError::LengthMismatch {
                    id: self.id.clone(),
                    field: "soft",
                    expected,
                    got: soft.len(),
                });
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != expected {
                return Err(TypeError::LengthMismatch {
                    id: self.id.clone(),
                    field: "labels",
                    expected,
                    got: labels.len(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: u32) -> WindowSpec {
        WindowSpec::new(s).unwrap()
    }

    #[test]
    fn windows_for_thresholds() {
        assert_eq!(windows_for(20, w(5)).unwrap(), 4);
        assert_eq!(windows_for(120, w(5)).unwrap(), 24);
        assert_eq!(windows_for(5, w(5)).unwrap(), 1);
        assert_eq!(
            windows_for(20, w(7)),
            Err(TypeError::NonDivisible {
                duration_s: 20,
                window_s: 7
            })
        );
    }

    #[test]
    fn argmax_examples() {
        let d = ActivityDistribution::new(vec![0.1, 0.7, 0.2]).unwrap();
        assert_eq!(argmax_label(&d), ActivityLabel::new(1));
        let d = ActivityDistribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(argmax_label(&d), ActivityLabel::new(0));
        for i in 0..10 {
            let d = ActivityDistribution::one_hot(10, ActivityLabel::new(i));
            assert_eq!(argmax_label(&d), ActivityLabel::new(i));
        }
    }

    #[test]
    fn vocabulary_rules() {
        assert_eq!(Vocabulary::default().len(), 10);
        assert!(matches!(
            Vocabulary::new(["walk"]),
            Err(TypeError::VocabularyTooSmall(1))
        ));
        assert!(matches!(
            Vocabulary::new(["walk", "walk"]),
            Err(TypeError::DuplicateToken(_))
        ));
        assert!(matches!(
            Vocabulary::new(["walk", "Sit"]),
            Err(TypeError::InvalidToken(_))
        ));
        let v = Vocabulary::default();
        assert_eq!(v.label("wash_hands"), Some(ActivityLabel::new(5)));
        assert_eq!(v.name(ActivityLabel::new(7)), Some("brush_teeth"));
        assert_eq!(v.label("swim"), None);
    }

    #[test]
    fn distribution_validation() {
        assert!(ActivityDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(ActivityDistribution::new(vec![-0.5, 1.5]).is_err());
        let v = Vocabulary::default();
        assert!(matches!(
            ActivityDistribution::for_vocab(vec![0.5, 0.5], &v),
            Err(TypeError::DistributionLength { .. })
        ));
    }

    #[test]
    fn trace_lengths_checked() {
        let acts = vec![ActivityLabel::new(0); 3];
        let bad = Trace::new(
            "t",
            w(5),
            acts.clone(),
            None,
            Some(CELabelSeq::empty(2)),
            None,
        );
        assert!(matches!(
            bad,
            Err(TypeError::LengthMismatch {
                field: "labels",
                ..
            })
        ));
        assert!(Trace::new("t", w(5), acts, None, Some(CELabelSeq::empty(3)), Some(1)).is_ok());
    }

    #[test]
    fn label_union() {
        let e1 = EventType::from("e1");
        let e2 = EventType::from("e2");
        let mut a = CELabelSeq::empty(3);
        a.0[1].insert(e1.clone());
        let mut b = CELabelSeq::empty(3);
        b.0[1].insert(e2.clone());
        b.0[2].insert(e2.clone());
        let u = a.union(&b);
        assert_eq!(u.positions(&e1), vec![1]);
        assert_eq!(u.positions(&e2), vec![1, 2]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn windows_for_round_trips(n in 1u64..10_000, ws in 1u32..120) {
                prop_assert_eq!(windows_for(n * u64::from(ws), w(ws)).unwrap(), n);
            }
        }
    }
}
