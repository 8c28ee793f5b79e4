use std::time::Instant;

use serde::Serialize;

use super::{Detector, EngineError, DEFAULT_THRESHOLD};
use crate::ruledsl::TimedAutomaton;
use crate::simgen::{corrupt, generate, NoiseModel, SimConfig};

// Observation noise of the generated belief-mode workload.
const BENCH_P_CORRECT: f64 = 0.9;

/// Order statistics of per-window step latency, in nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p99_ns: u64,
    pub max_ns: u64,
}

impl LatencyStats {
    /// Nearest-rank percentiles over `samples`.
    ///
    /// # Panics
    ///
    /// On an empty sample.
    pub fn from_samples(mut samples: Vec<u64>) -> Self {
        assert!(
            !samples.is_empty(),
            "latency statistics need at least one sample"
        );
        samples.sort_unstable();
        let n = samples.len();
        let rank = |q: f64| samples[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            samples: n,
            mean_ns: samples.iter().map(|&s| s as f64).sum::<f64>() / n as f64,
            p50_ns: rank(0.50),
            p99_ns: rank(0.99),
            max_ns: samples[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub span_windows: usize,
    pub trials: usize,
    pub seed: u64,
    pub crisp: LatencyStats,
    pub belief: LatencyStats,
}

/// Times per-window processing of `rules` in crisp and belief modes.
///
/// Workload: `trials` simulated traces of `span_windows` windows (default
/// simulator settings, seeded by `seed`) passed through a symmetric noise
/// channel with 0.9 accuracy. Crisp mode consumes the noisy hard labels,
/// belief mode the matching distributions. Only the engine steps are inside
/// the timed region.
pub fn bench_latency(
    rules: &[TimedAutomaton],
    span_windows: usize,
    trials: usize,
    seed: u64,
) -> Result<LatencyReport, EngineError> {
    let det = Detector::new(rules.to_vec())?;
    if det.vocab() != &crate::types::Vocabulary::default() {
        return Err(EngineError::VocabularyMismatch(
            "latency workload is generated over the default vocabulary".into(),
        ));
    }
    let cfg = SimConfig {
        span_windows: span_windows.max(1),
        seed,
        ..SimConfig::default()
    };
    let traces = generate(&cfg, trials.max(1)).expect("default simulator settings are feasible");
    let noise = NoiseModel::symmetric(BENCH_P_CORRECT).expect("valid accuracy");

    let mut crisp = Vec::with_capacity(trials * span_windows);
    let mut belief = Vec::with_capacity(trials * span_windows);
    for (i, t) in traces.iter().enumerate() {
        let noisy = corrupt(t, &noise, seed ^ i as u64);
        let soft = noisy.soft.as_ref().expect("corrupt fills soft");

        let mut stream = det.crisp_stream();
        for &x in &noisy.activities {
            let start = Instant::now();
            let out = stream.push(x)?;
            crisp.push(start.elapsed().as_nanos() as u64);
            std::hint::black_box(out);
        }

        let mut stream = det.belief_stream(DEFAULT_THRESHOLD)?;
        for d in soft {
            let start = Instant::now();
            let out = stream.push(d)?;
            belief.push(start.elapsed().as_nanos() as u64);
            std::hint::black_box(out);
        }
    }
    Ok(LatencyReport {
        span_windows,
        trials,
        seed,
        crisp: LatencyStats::from_samples(crisp),
        belief: LatencyStats::from_samples(belief),
    })
}
