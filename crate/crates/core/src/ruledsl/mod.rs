//! Rule language for complex events.
//!
//! A rule file holds one or more `automaton` blocks. Each automaton is a
//! finite-state machine with bounded saturating counters, evaluated once per
//! window. Grammar (`#` starts a comment that runs to end of line):
//!
//! ```text
//! file       := automaton*
//! automaton  := "automaton" EVENT "{" item* "}"
//! item       := "end_of_trace" ("close_sessions" | "ignore") ";"
//!             | "counters" "{" (NAME "max" const ";")* "}"
//!             | "state" NAME ["initial"] "{" arm* "}"
//! arm        := "on" ACTIVITY ("|" ACTIVITY)* [guard] "->" STATE [actions] ["emit"] ";"
//!             | "otherwise" [guard] "->" STATE [actions] ["emit"] ";"
//!             | "at_end" [guard] ["emit"] ";"
//! guard      := "if" pred ("and" pred)*
//! pred       := COUNTER ("<" | "<=" | "==" | ">=" | ">") const
//! actions    := "{" (action ";")* "}"
//! action     := "inc" COUNTER | "reset" COUNTER | "set" COUNTER "=" const
//! const      := term (("+" | "-") term)*
//! term       := INT | INT "s" | INT "m" | INT "h" | INT "w"
//! ```
//!
//! Plain integers and `w`-suffixed integers count windows; `s`/`m`/`h`
//! durations are converted to windows and must divide evenly. Arms are tried
//! in order and the first match wins. Every state must cover every activity
//! for every counter valuation, which in practice means ending each state
//! with an unconditional `otherwise` arm. `at_end` arms are consulted once
//! after the last window when the policy is `close_sessions`; an emission
//! there is attached to the final window.

mod builtins;
mod cover;
mod lexer;
mod parser;
mod print;
mod validate;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::types::{ActivityLabel, EventType, TypeError, Vocabulary};

pub use builtins::{builtin_rules, BUILTIN_SOURCE};
pub use parser::parse_rules;
pub use print::print_automaton;
pub use print::print_rules;
pub use validate::{validate, validate_rule_set};

/// Largest allowed saturation bound of a single counter.
pub const MAX_COUNTER_BOUND: u32 = 10_000;
/// Largest allowed product of `(max + 1)` over an automaton's counters.
pub const MAX_COUNTER_SPACE: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    SyntaxError,
    UnknownActivity,
    UnknownCounter,
    UnknownState,
    DuplicateName,
    DuplicateEvent,
    NoStates,
    NonTotalState,
    Overlap,
    CounterBound,
    StateSpaceTooLarge,
    NonDivisible,
    VocabularyMismatch,
}

impl DiagnosticKind {
    pub fn name(self) -> &'static str {
        match self {
            DiagnosticKind::SyntaxError => "SyntaxError",
            DiagnosticKind::UnknownActivity => "UnknownActivity",
            DiagnosticKind::UnknownCounter => "UnknownCounter",
            DiagnosticKind::UnknownState => "UnknownState",
            DiagnosticKind::DuplicateName => "DuplicateName",
            DiagnosticKind::DuplicateEvent => "DuplicateEvent",
            DiagnosticKind::NoStates => "NoStates",
            DiagnosticKind::NonTotalState => "NonTotalState",
            DiagnosticKind::Overlap => "Overlap",
            DiagnosticKind::CounterBound => "CounterBound",
            DiagnosticKind::StateSpaceTooLarge => "StateSpaceTooLarge",
            DiagnosticKind::NonDivisible => "NonDivisible",
            DiagnosticKind::VocabularyMismatch => "VocabularyMismatch",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            DiagnosticKind::Overlap => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub pos: Option<Pos>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, pos: Option<Pos>, message: impl Into<String>) -> Self {
        Self {
            kind,
            pos,
            message: message.into(),
        }
    }

    pub fn severity(&self) -> Severity {
        self.kind.severity()
    }

    pub fn is_error(&self) -> bool {
        self.severity() == Severity::Error
    }

    /// `file:line:col: severity: message` (position omitted when unknown).
    pub fn render(&self, file: &str) -> String {
        match self.pos {
            Some(p) => format!("{file}:{}:{}: {}: {}", p.line, p.col, self.severity(), self),
            None => format!("{file}: {}: {}", self.severity(), self),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.message, self.kind.name())
    }
}

#[derive(Debug, Error)]
pub enum RuleError {
    #[error(transparent)]
    NonDivisible(TypeError),
    #[error("rules failed validation: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

#[derive(Debug, Clone)]
pub struct CounterDecl {
    pub name: String,
    pub max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Comparator {
    pub fn holds(self, lhs: u32, rhs: u32) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Eq => "==",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CounterPred {
    pub counter: usize,
    pub op: Comparator,
    pub value: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActivityMatch {
    /// Wildcard arm; matches any activity (the "don't care" element).
    Otherwise,
    Set(BTreeSet<ActivityLabel>),
}

impl ActivityMatch {
    pub fn matches(&self, x: ActivityLabel) -> bool {
        match self {
            ActivityMatch::Otherwise => true,
            ActivityMatch::Set(s) => s.contains(&x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guard {
    pub activities: ActivityMatch,
    pub counter_preds: Vec<CounterPred>,
}

impl Guard {
    pub fn preds_hold(&self, counters: &[u32]) -> bool {
        preds_hold(&self.counter_preds, counters)
    }
}

pub(crate) fn preds_hold(preds: &[CounterPred], counters: &[u32]) -> bool {
    preds
        .iter()
        .all(|p| p.op.holds(counters[p.counter], p.value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Inc(usize),
    Reset(usize),
    Set(usize, u32),
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub guard: Guard,
    pub actions: Vec<Action>,
    pub emit: bool,
    pub target: usize,
    pub pos: Option<Pos>,
}

/// Arm consulted after the last window under [`EndOfTracePolicy::CloseSessions`].
#[derive(Debug, Clone)]
pub struct EndArm {
    pub counter_preds: Vec<CounterPred>,
    pub emit: bool,
    pub pos: Option<Pos>,
}

#[derive(Debug, Clone)]
pub struct StateDecl {
    pub name: String,
    pub arms: Vec<Transition>,
    pub end_arms: Vec<EndArm>,
    pub pos: Option<Pos>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EndOfTracePolicy {
    CloseSessions,
    #[default]
    Ignore,
}

#[derive(Debug, Clone)]
pub struct TimedAutomaton {
    pub event: EventType,
    pub vocab: Vocabulary,
    pub states: Vec<StateDecl>,
    pub initial: usize,
    pub counters: Vec<CounterDecl>,
    pub end_of_trace: EndOfTracePolicy,
    pub pos: Option<Pos>,
}

impl TimedAutomaton {
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    pub fn counter_index(&self, name: &str) -> Option<usize> {
        self.counters.iter().position(|c| c.name == name)
    }

    /// Number of counter valuations, `∏(max + 1)`, saturating at `u64::MAX`.
    pub fn counter_space(&self) -> u64 {
        self.counters
            .iter()
            .fold(1u64, |acc, c| acc.saturating_mul(u64::from(c.max) + 1))
    }

    /// First arm of `state` that accepts `x` under `counters`.
    pub fn select(&self, state: usize, counters: &[u32], x: ActivityLabel) -> Option<&Transition> {
        self.states[state]
            .arms
            .iter()
            .find(|t| t.guard.activities.matches(x) && t.guard.preds_hold(counters))
    }

    /// Whether the end-of-trace policy emits from this configuration.
    pub fn end_emits(&self, state: usize, counters: &[u32]) -> bool {
        if self.end_of_trace == EndOfTracePolicy::Ignore {
            return false;
        }
        self.states[state]
            .end_arms
            .iter()
            .find(|a| preds_hold(&a.counter_preds, counters))
            .is_some_and(|a| a.emit)
    }

    /// Applies actions in order; increments saturate at the counter bound.
    pub fn apply_actions(&self, actions: &[Action], counters: &mut [u32]) {
        for a in actions {
            match *a {
                Action::Inc(c) => counters[c] = (counters[c] + 1).min(self.counters[c].max),
                Action::Reset(c) => counters[c] = 0,
                Action::Set(c, v) => counters[c] = v.min(self.counters[c].max),
            }
        }
    }

    /// Saturation bound of every counter, in windows.
    pub fn thresholds(&self) -> Vec<(String, u32)> {
        self.counters
            .iter()
            .map(|c| (c.name.clone(), c.max))
            .collect()
    }
}

/// Result of a successful parse: validated automata plus any warnings.
#[derive(Debug, Clone)]
pub struct ParsedRules {
    pub automata: Vec<TimedAutomaton>,
    pub warnings: Vec<Diagnostic>,
}
