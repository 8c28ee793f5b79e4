use std::collections::HashMap;

use super::crisp::MachineConfig;
use super::{Detector, EngineError};
use crate::ruledsl::TimedAutomaton;
use crate::types::{ActivityDistribution, LabelSet};

pub const DEFAULT_PRUNE_EPSILON: f64 = 1e-9;

// Configuration spaces up to this size accumulate into a dense buffer.
const DENSE_LIMIT: u64 = 1 << 16;

/// Mixed-radix encoding of a configuration as a single integer key.
#[derive(Debug, Clone)]
pub(crate) struct ConfigCodec {
    strides: Vec<u64>,
    maxes: Vec<u64>,
    space: u64,
    n_states: u64,
}

impl ConfigCodec {
    pub(crate) fn new(a: &TimedAutomaton) -> Self {
        let mut strides = Vec::with_capacity(a.counters.len());
        let mut space = 1u64;
        for c in &a.counters {
            strides.push(space);
            space = space.saturating_mul(u64::from(c.max) + 1);
        }
        Self {
            strides,
            maxes: a.counters.iter().map(|c| u64::from(c.max) + 1).collect(),
            space,
            n_states: a.states.len() as u64,
        }
    }

    fn total(&self) -> u64 {
        self.space.saturating_mul(self.n_states)
    }

    fn encode(&self, state: usize, counters: &[u32]) -> u64 {
        let mut key = state as u64 * self.space;
        for (c, s) in counters.iter().zip(&self.strides) {
            key += u64::from(*c) * s;
        }
        key
    }

    fn decode(&self, key: u64, counters: &mut [u32]) -> usize {
        let state = (key / self.space) as usize;
        let mut rest = key % self.space;
        for (i, m) in self.maxes.iter().enumerate() {
            counters[i] = (rest % m) as u32;
            rest /= m;
        }
        state
    }
}

/// Probability distribution over configurations of one automaton.
///
/// Entries are kept sorted by configuration key, which fixes the order of
/// every floating-point accumulation.
#[derive(Debug, Clone)]
pub struct BeliefState {
    codec: ConfigCodec,
    // (key, mass, mass that emitted on the most recent step)
    entries: Vec<(u64, f64, f64)>,
    prune_epsilon: f64,
}

impl BeliefState {
    pub fn initial(a: &TimedAutomaton, prune_epsilon: f64) -> Self {
        let codec = ConfigCodec::new(a);
        let key = codec.encode(a.initial, &vec![0; a.counters.len()]);
        Self {
            codec,
            entries: vec![(key, 1.0, 0.0)],
            prune_epsilon,
        }
    }

    pub fn prune_epsilon(&self) -> f64 {
        self.prune_epsilon
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Configurations with their probabilities, in key order.
    pub fn entries(&self) -> Vec<(MachineConfig, f64)> {
        let n = self.codec.maxes.len();
        self.entries
            .iter()
            .map(|&(key, mass, _)| {
                let mut counters = vec![0; n];
                let state = self.codec.decode(key, &mut counters);
                (MachineConfig { state, counters }, mass)
            })
            .collect()
    }

    pub fn probability_of(&self, cfg: &MachineConfig) -> f64 {
        let key = self.codec.encode(cfg.state, &cfg.counters);
        self.entries
            .binary_search_by_key(&key, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }
}

enum Scratch {
    Dense {
        acc: Vec<(f64, f64)>,
        touched: Vec<u64>,
    },
    Sparse(HashMap<u64, (f64, f64)>),
}

impl Scratch {
    fn for_codec(codec: &ConfigCodec) -> Self {
        if codec.total() <= DENSE_LIMIT {
            Scratch::Dense {
                acc: vec![(0.0, 0.0); codec.total() as usize],
                touched: Vec::new(),
            }
        } else {
            Scratch::Sparse(HashMap::new())
        }
    }

    fn add(&mut self, key: u64, mass: f64, emitted: bool) {
        let em = if emitted { mass } else { 0.0 };
        match self {
            Scratch::Dense { acc, touched } => {
                let slot = &mut acc[key as usize];
                if slot.0 == 0.0 && slot.1 == 0.0 {
                    touched.push(key);
                }
                slot.0 += mass;
                slot.1 += em;
            }
            Scratch::Sparse(map) => {
                let slot = map.entry(key).or_insert((0.0, 0.0));
                slot.0 += mass;
                slot.1 += em;
            }
        }
    }

    fn drain_sorted(&mut self, out: &mut Vec<(u64, f64, f64)>) {
        out.clear();
        match self {
            Scratch::Dense { acc, touched } => {
                touched.sort_unstable();
                touched.dedup();
                for &k in touched.iter() {
                    let (m, e) = std::mem::take(&mut acc[k as usize]);
                    out.push((k, m, e));
                }
                touched.clear();
            }
            Scratch::Sparse(map) => {
                out.extend(map.drain().map(|(k, (m, e))| (k, m, e)));
                out.sort_unstable_by_key(|e| e.0);
            }
        }
    }
}

/// Result of one belief step.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefStep {
    pub labels: LabelSet,
    /// Emission probability per automaton, in rule order.
    pub emission_mass: Vec<f64>,
}

/// Window-at-a-time belief propagation of a whole rule set.
pub struct BeliefStream<'a> {
    det: &'a Detector,
    beliefs: Vec<BeliefState>,
    scratch: Vec<Scratch>,
    threshold: f64,
    counters: Vec<u32>,
    support: Vec<(crate::types::ActivityLabel, f64)>,
    last: Option<LabelSet>,
}

impl<'a> BeliefStream<'a> {
    pub(super) fn new(
        det: &'a Detector,
        threshold: f64,
        prune_epsilon: f64,
    ) -> Result<Self, EngineError> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(EngineError::InvalidThreshold(threshold));
        }
        let beliefs: Vec<BeliefState> = det
            .rules
            .iter()
            .map(|a| BeliefState::initial(a, prune_epsilon))
            .collect();
        let scratch = beliefs
            .iter()
            .map(|b| Scratch::for_codec(&b.codec))
            .collect();
        let width = det
            .rules
            .iter()
            .map(|a| a.counters.len())
            .max()
            .unwrap_or(0);
        Ok(Self {
            det,
            beliefs,
            scratch,
            threshold,
            counters: vec![0; width],
            support: Vec::new(),
            last: None,
        })
    }

    pub fn beliefs(&self) -> &[BeliefState] {
        &self.beliefs
    }

    pub fn push(&mut self, d: &ActivityDistribution) -> Result<BeliefStep, EngineError> {
        let k = self.det.vocab.len();
        if d.len() != k {
            return Err(EngineError::VocabularyMismatch(format!(
                "distribution over {} activities, rules expect {k}",
                d.len()
            )));
        }
        self.support.clear();
        self.support.extend(
            d.probs()
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 0.0)
                .map(|(i, p)| (crate::types::ActivityLabel::new(i), *p)),
        );

        let mut labels = LabelSet::new();
        let mut emission_mass = Vec::with_capacity(self.beliefs.len());
        for ((a, belief), scratch) in self
            .det
            .rules
            .iter()
            .zip(self.beliefs.iter_mut())
            .zip(self.scratch.iter_mut())
        {
            let n = a.counters.len();
            let buf = &mut self.counters[..n];
            let mut emitted = 0.0;
            for &(key, mass, _) in &belief.entries {
                for &(x, p) in &self.support {
                    let state = belief.codec.decode(key, buf);
                    let t = a
                        .select(state, buf, x)
                        .expect("validated automata are total");
                    a.apply_actions(&t.actions, buf);
                    let w = mass * p;
                    if t.emit {
                        emitted += w;
                    }
                    scratch.add(belief.codec.encode(t.target, buf), w, t.emit);
                }
            }
            scratch.drain_sorted(&mut belief.entries);

            let eps = belief.prune_epsilon;
            belief.entries.retain(|e| e.1 >= eps);
            let total: f64 = belief.entries.iter().map(|e| e.1).sum();
            if total > 0.0 {
                for e in &mut belief.entries {
                    e.1 /= total;
                    e.2 /= total;
                }
            }

            if emitted >= self.threshold {
                labels.insert(a.event.clone());
            }
            emission_mass.push(emitted);
        }
        self.last = Some(labels.clone());
        Ok(BeliefStep {
            labels,
            emission_mass,
        })
    }

    /// End-of-trace step.
    ///
    /// The mass reported per automaton is the probability that the final
    /// window carries the event at all: emitted on the last step, or emitted
    /// by the end-of-trace policy. Labels contains events crossing the
    /// threshold that the last step had not already produced. With no
    /// windows pushed, nothing is emitted.
    pub fn finish(mut self) -> BeliefStep {
        let Some(last) = self.last.take() else {
            return BeliefStep {
                labels: LabelSet::new(),
                emission_mass: vec![0.0; self.beliefs.len()],
            };
        };
        let mut labels = LabelSet::new();
        let mut emission_mass = Vec::with_capacity(self.beliefs.len());
        for (a, belief) in self.det.rules.iter().zip(&self.beliefs) {
            let n = a.counters.len();
            let buf = &mut self.counters[..n];
            let mut mass = 0.0;
            for &(key, m, emitted) in &belief.entries {
                let state = belief.codec.decode(key, buf);
                mass += emitted;
                if a.end_emits(state, buf) {
                    mass += m - emitted;
                }
            }
            if mass >= self.threshold && !last.contains(&a.event) {
                labels.insert(a.event.clone());
            }
            emission_mass.push(mass);
        }
        BeliefStep {
            labels,
            emission_mass,
        }
    }
}
