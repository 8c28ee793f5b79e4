use super::{Detector, EngineError};
use crate::ruledsl::TimedAutomaton;
use crate::types::{ActivityLabel, LabelSet};

/// Control state plus counter valuation of one automaton.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MachineConfig {
    pub state: usize,
    pub counters: Vec<u32>,
}

impl MachineConfig {
    /// Initial state with every counter at zero.
    pub fn initial(a: &TimedAutomaton) -> Self {
        Self {
            state: a.initial,
            counters: vec![0; a.counters.len()],
        }
    }

    /// Applies the first matching arm in place; returns whether it emits.
    ///
    /// # Panics
    ///
    /// If no arm matches, which validation rules out.
    pub(crate) fn advance(&mut self, a: &TimedAutomaton, x: ActivityLabel) -> bool {
        let t = a
            .select(self.state, &self.counters, x)
            .expect("validated automata are total");
        a.apply_actions(&t.actions, &mut self.counters);
        self.state = t.target;
        t.emit
    }
}

/// One crisp step: the successor configuration and the events emitted.
///
/// `a` must be valid (see [`crate::ruledsl::validate`]) and `cfg` within its
/// bounds.
pub fn step_crisp(
    a: &TimedAutomaton,
    cfg: &MachineConfig,
    x: ActivityLabel,
) -> (MachineConfig, LabelSet) {
    let mut next = cfg.clone();
    let mut out = LabelSet::new();
    if next.advance(a, x) {
        out.insert(a.event.clone());
    }
    (next, out)
}

/// Window-at-a-time crisp evaluation of a whole rule set.
#[derive(Debug, Clone)]
pub struct CrispStream<'a> {
    det: &'a Detector,
    configs: Vec<MachineConfig>,
}

impl<'a> CrispStream<'a> {
    pub(super) fn new(det: &'a Detector) -> Self {
        Self {
            det,
            configs: det.rules.iter().map(MachineConfig::initial).collect(),
        }
    }

    /// Resumes from previously saved configurations.
    pub fn resume(det: &'a Detector, configs: Vec<MachineConfig>) -> Self {
        assert_eq!(configs.len(), det.rules.len());
        Self { det, configs }
    }

    pub fn configs(&self) -> &[MachineConfig] {
        &self.configs
    }

    pub fn push(&mut self, x: ActivityLabel) -> Result<LabelSet, EngineError> {
        let k = self.det.vocab.len();
        if x.index() >= k {
            return Err(EngineError::VocabularyMismatch(format!(
                "activity index {} outside vocabulary of {k}",
                x.index()
            )));
        }
        let mut out = LabelSet::new();
        for (a, cfg) in self.det.rules.iter().zip(self.configs.iter_mut()) {
            if cfg.advance(a, x) {
                out.insert(a.event.clone());
            }
        }
        Ok(out)
    }

    /// End-of-trace emissions, to be attached to the final window.
    pub fn finish(self) -> LabelSet {
        self.det
            .rules
            .iter()
            .zip(&self.configs)
            .filter(|(a, cfg)| a.end_emits(cfg.state, &cfg.counters))
            .map(|(a, _)| a.event.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ruledsl::builtin_rules;
    use crate::types::{EventType, Vocabulary, WindowSpec};

    fn label(name: &str) -> ActivityLabel {
        Vocabulary::default().label(name).unwrap()
    }

    fn e1() -> TimedAutomaton {
        builtin_rules(WindowSpec::default()).unwrap().remove(0)
    }

    fn cfg(a: &TimedAutomaton, state: &str, wash: u32) -> MachineConfig {
        MachineConfig {
            state: a.state_index(state).unwrap(),
            counters: vec![wash],
        }
    }

    #[test]
    fn work_while_pending_emits() {
        let a = e1();
        let (next, ev) = step_crisp(&a, &cfg(&a, "after_restroom", 3), label("work"));
        assert_eq!(next, cfg(&a, "idle", 0));
        assert_eq!(ev, [EventType::from("e1")].into());
    }

    #[test]
    fn fourth_wash_satisfies_protocol() {
        let a = e1();
        let (next, ev) = step_crisp(&a, &cfg(&a, "after_restroom", 3), label("wash_hands"));
        assert_eq!(next, cfg(&a, "idle", 0));
        assert!(ev.is_empty());
    }

    #[test]
    fn irrelevant_activity_self_loops() {
        let a = e1();
        let (next, ev) = step_crisp(&a, &cfg(&a, "idle", 0), label("walk"));
        assert_eq!(next, cfg(&a, "idle", 0));
        assert!(ev.is_empty());
    }

    #[test]
    fn repeated_restroom_resets_wash() {
        let a = e1();
        let (next, _) = step_crisp(&a, &cfg(&a, "after_restroom", 2), label("use_restroom"));
        assert_eq!(next, cfg(&a, "after_restroom", 0));
    }
}
