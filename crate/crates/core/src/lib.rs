//! Complex event detection over windowed activity streams.
//!
//! Rules are written in a small language ([`ruledsl`]) and compiled to
//! timed automata with bounded counters. The [`engine`] runs them over hard
//! activity labels or, with exact belief propagation, over per-window
//! activity distributions. [`simgen`] produces seeded synthetic daily-routine
//! traces labeled by the independent whole-trace labelers in [`oracle`], and
//! [`metrics`] scores any detector's output.
//!
//! Batch entry points run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to a sequential loop otherwise; results are
//! identical either way.

pub mod engine;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod par;
pub mod ruledsl;
pub mod simgen;
pub mod types;

pub use engine::{
    bench_latency, run_crisp, run_on_soft, step_crisp, BeliefState, Detector, DetectorOutput,
    EngineError, LatencyReport, LatencyStats, MachineConfig, SoftMode,
};
pub use metrics::{evaluate, EvalReport, F1Aggregation, Prediction};
pub use oracle::Oracle;
pub use ruledsl::{builtin_rules, parse_rules, validate, TimedAutomaton};
pub use simgen::{corrupt, dataset, generate, NoiseModel, SimConfig};
pub use types::{
    argmax_label, windows_for, ActivityDistribution, ActivityLabel, CELabelSeq, EventType,
    LabelSet, Trace, Vocabulary, WindowSpec,
};
