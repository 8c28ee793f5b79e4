use std::collections::BTreeSet;

use super::cover::{full_region, pred_region, uncovered_point, Region};
use super::{
    Action, ActivityMatch, CounterPred, Diagnostic, DiagnosticKind, Pos, TimedAutomaton,
    MAX_COUNTER_BOUND, MAX_COUNTER_SPACE,
};
use crate::types::{is_token, ActivityLabel, Vocabulary};

/// Checks every structural invariant of `a` against `vocab`.
///
/// Returns no diagnostics iff the automaton is well formed, total, and has a
/// finite counter space within bounds. Shadowed arms are reported as
/// warnings.
pub fn validate(a: &TimedAutomaton, vocab: &Vocabulary) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let at = a.pos;

    if !is_token(a.event.as_str()) {
        out.push(Diagnostic::new(
            DiagnosticKind::SyntaxError,
            at,
            format!("event id {:?} is not a valid token", a.event.as_str()),
        ));
    }
    if a.vocab != *vocab {
        out.push(Diagnostic::new(
            DiagnosticKind::VocabularyMismatch,
            at,
            format!(
                "automaton `{}` was built against a different vocabulary",
                a.event
            ),
        ));
    }
    if a.states.is_empty() {
        out.push(Diagnostic::new(
            DiagnosticKind::NoStates,
            at,
            format!("automaton `{}` declares no states", a.event),
        ));
        return out;
    }
    if a.initial >= a.states.len() {
        out.push(Diagnostic::new(
            DiagnosticKind::UnknownState,
            at,
            format!("initial state index {} out of range", a.initial),
        ));
    }

    let mut names = BTreeSet::new();
    for s in &a.states {
        if !names.insert(s.name.as_str()) {
            out.push(Diagnostic::new(
                DiagnosticKind::DuplicateName,
                s.pos,
                format!("state `{}` declared twice", s.name),
            ));
        }
    }
    let mut names = BTreeSet::new();
    for c in &a.counters {
        if !names.insert(c.name.as_str()) {
            out.push(Diagnostic::new(
                DiagnosticKind::DuplicateName,
                at,
                format!("counter `{}` declared twice", c.name),
            ));
        }
        if c.max == 0 || c.max > MAX_COUNTER_BOUND {
            out.push(Diagnostic::new(
                DiagnosticKind::CounterBound,
                at,
                format!(
                    "counter `{}` bound {} outside 1..={MAX_COUNTER_BOUND}",
                    c.name, c.max
                ),
            ));
        }
    }
    let space = a.counter_space();
    if space > MAX_COUNTER_SPACE {
        out.push(Diagnostic::new(
            DiagnosticKind::StateSpaceTooLarge,
            at,
            format!(
                "counter state space of `{}` is {space}, limit is {MAX_COUNTER_SPACE}",
                a.event
            ),
        ));
    }

    let k = vocab.len();
    let nc = a.counters.len();
    let check_preds = |preds: &[CounterPred], pos: Option<Pos>, out: &mut Vec<Diagnostic>| {
        for p in preds {
            if p.counter >= nc {
                out.push(Diagnostic::new(
                    DiagnosticKind::UnknownCounter,
                    pos,
                    format!("counter index {} out of range", p.counter),
                ));
            }
        }
    };
    for s in &a.states {
        for t in &s.arms {
            if t.target >= a.states.len() {
                out.push(Diagnostic::new(
                    DiagnosticKind::UnknownState,
                    t.pos,
                    format!("target state index {} out of range", t.target),
                ));
            }
            if let ActivityMatch::Set(set) = &t.guard.activities {
                for x in set.iter().filter(|x| x.index() >= k) {
                    out.push(Diagnostic::new(
                        DiagnosticKind::UnknownActivity,
                        t.pos,
                        format!("activity index {} not in vocabulary", x.index()),
                    ));
                }
            }
            check_preds(&t.guard.counter_preds, t.pos, &mut out);
            for act in &t.actions {
                let (c, set_value) = match *act {
                    Action::Inc(c) | Action::Reset(c) => (c, None),
                    Action::Set(c, v) => (c, Some(v)),
                };
                if c >= nc {
                    out.push(Diagnostic::new(
                        DiagnosticKind::UnknownCounter,
                        t.pos,
                        format!("counter index {c} out of range"),
                    ));
                } else if let Some(v) = set_value {
                    if v > a.counters[c].max {
                        out.push(Diagnostic::new(
                            DiagnosticKind::CounterBound,
                            t.pos,
                            format!(
                                "`set {} = {v}` exceeds the counter bound {}",
                                a.counters[c].name, a.counters[c].max
                            ),
                        ));
                    }
                }
            }
        }
        for e in &s.end_arms {
            check_preds(&e.counter_preds, e.pos, &mut out);
        }
    }

    // coverage analysis needs well-formed references
    if out.iter().any(Diagnostic::is_error) {
        return out;
    }

    let full = full_region(&a.counters);
    for s in &a.states {
        let regions: Vec<Option<Region>> = s
            .arms
            .iter()
            .map(|t| pred_region(&t.guard.counter_preds, &a.counters))
            .collect();

        let mut missing = Vec::new();
        for x in (0..k).map(ActivityLabel::new) {
            let cover: Vec<Region> = s
                .arms
                .iter()
                .zip(&regions)
                .filter(|(t, _)| t.guard.activities.matches(x))
                .filter_map(|(_, r)| r.clone())
                .collect();
            if let Some(point) = uncovered_point(&full, &cover) {
                missing.push((x, point));
            }
        }
        if !missing.is_empty() {
            let listed: Vec<String> = missing
                .iter()
                .map(|(x, point)| {
                    let name = vocab.name(*x).unwrap_or("?");
                    if point.is_empty() {
                        name.to_string()
                    } else {
                        let vals: Vec<String> = a
                            .counters
                            .iter()
                            .zip(point)
                            .map(|(c, v)| format!("{}={v}", c.name))
                            .collect();
                        format!("{name} [{}]", vals.join(", "))
                    }
                })
                .collect();
            out.push(Diagnostic::new(
                DiagnosticKind::NonTotalState,
                s.pos,
                format!(
                    "state `{}` has no matching arm for: {} (add an `otherwise` arm)",
                    s.name,
                    listed.join("; ")
                ),
            ));
        }

        for (j, t) in s.arms.iter().enumerate() {
            let Some(own) = &regions[j] else {
                out.push(Diagnostic::new(
                    DiagnosticKind::Overlap,
                    t.pos,
                    format!(
                        "arm {} of state `{}` has a guard that can never hold",
                        j + 1,
                        s.name
                    ),
                ));
                continue;
            };
            let reachable = (0..k).map(ActivityLabel::new).any(|x| {
                if !t.guard.activities.matches(x) {
                    return false;
                }
                let earlier: Vec<Region> = s.arms[..j]
                    .iter()
                    .zip(&regions[..j])
                    .filter(|(e, _)| e.guard.activities.matches(x))
                    .filter_map(|(_, r)| r.clone())
                    .collect();
                uncovered_point(own, &earlier).is_some()
            });
            if !reachable {
                out.push(Diagnostic::new(
                    DiagnosticKind::Overlap,
                    t.pos,
                    format!(
                        "arm {} of state `{}` is shadowed by earlier arms and can never fire",
                        j + 1,
                        s.name
                    ),
                ));
            }
        }

        let end_regions: Vec<Option<Region>> = s
            .end_arms
            .iter()
            .map(|e| pred_region(&e.counter_preds, &a.counters))
            .collect();
        for (j, e) in s.end_arms.iter().enumerate() {
            let earlier: Vec<Region> = end_regions[..j].iter().flatten().cloned().collect();
            let live = end_regions[j]
                .as_ref()
                .is_some_and(|r| uncovered_point(r, &earlier).is_some());
            if !live {
                out.push(Diagnostic::new(
                    DiagnosticKind::Overlap,
                    e.pos,
                    format!("at_end arm {} of state `{}` can never fire", j + 1, s.name),
                ));
            }
        }
    }
    out
}

/// Per-automaton validation plus rule-set checks (distinct event ids).
pub fn validate_rule_set(rules: &[TimedAutomaton], vocab: &Vocabulary) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for a in rules {
        if !seen.insert(a.event.clone()) {
            out.push(Diagnostic::new(
                DiagnosticKind::DuplicateEvent,
                a.pos,
                format!("event `{}` defined by more than one automaton", a.event),
            ));
        }
        out.extend(validate(a, vocab));
    }
    out
}
