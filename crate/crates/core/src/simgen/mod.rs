//! Seeded daily-routine simulator and observation noise.
//!
//! Each trace draws from its own ChaCha8 stream seeded with
//! `substream_seed(base_seed, index)`, so a trace depends only on the
//! configuration and its index, never on scheduling or worker count.
//!
//! Generation per trace:
//! 1. For every window and every routine kind, a routine starts with
//!    probability `rate / 60` (independent Bernoulli thinning).
//! 2. Starts are processed in time order; a routine that would overlap the
//!    previous one is queued to begin when it ends.
//! 3. Each routine body is expanded from a template in compliant or
//!    violating form (chosen with `violation_prob`).
//! 4. Everything else is background: segments of walk/sit/stand/work/idle/
//!    touch_object drawn by weight.
//! 5. The sequence is cut to the span and labeled by [`crate::oracle`].

mod config;
mod noise;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::oracle::Oracle;
use crate::par::Exec;
use crate::types::{ActivityLabel, Trace, Vocabulary};

pub use config::{BackgroundWeights, DurationRanges, PerRoutine, SimConfig};
pub use noise::{corrupt, corrupt_k, NoiseKind, NoiseModel};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("infeasible simulator config: {0}")]
    InfeasibleConfig(String),
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("cannot read simulator config: {0}")]
    Config(String),
    #[error("noise accuracy must be in (0, 1], got {0}")]
    InvalidNoise(f64),
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trace `index` under `base_seed`:
/// `splitmix64(base_seed ^ splitmix64(index))`.
pub fn substream_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Routine {
    Restroom,
    Meal,
    Brush,
}

const ROUTINES: [Routine; 3] = [Routine::Restroom, Routine::Meal, Routine::Brush];

struct Palette {
    walk: ActivityLabel,
    sit: ActivityLabel,
    stand: ActivityLabel,
    work: ActivityLabel,
    restroom: ActivityLabel,
    wash: ActivityLabel,
    eat: ActivityLabel,
    brush: ActivityLabel,
    touch: ActivityLabel,
    background: Vec<ActivityLabel>,
}

impl Palette {
    fn new(cfg: &SimConfig) -> Self {
        let v = Vocabulary::default();
        let l = |n: &str| v.label(n).expect("default vocabulary");
        Self {
            walk: l("walk"),
            sit: l("sit"),
            stand: l("stand"),
            work: l("work"),
            restroom: l("use_restroom"),
            wash: l("wash_hands"),
            eat: l("eat"),
            brush: l("brush_teeth"),
            touch: l("touch_object"),
            background: cfg
                .background_weights
                .named()
                .iter()
                .map(|(n, _)| l(n))
                .collect(),
        }
    }
}

struct TraceBuilder<'a> {
    cfg: &'a SimConfig,
    th: config::Thresholds,
    pal: &'a Palette,
    background: &'a WeightedIndex<f64>,
    rng: ChaCha8Rng,
    out: Vec<ActivityLabel>,
}

impl TraceBuilder<'_> {
    fn range(&mut self, (lo, hi): (usize, usize)) -> usize {
        self.rng.random_range(lo..=hi)
    }

    fn push(&mut self, x: ActivityLabel, n: usize) {
        self.out.extend(std::iter::repeat_n(x, n));
    }

    fn violates(&mut self, p: f64) -> bool {
        self.rng.random::<f64>() < p
    }

    fn good_wash(&mut self) -> usize {
        let (_, hi) = self.cfg.duration_ranges.wash_hands;
        self.rng
            .random_range(self.th.wash_run..=hi.max(self.th.wash_run))
    }

    fn short_wash(&mut self) -> usize {
        let lo = self.cfg.duration_ranges.wash_hands.0.max(1);
        if self.th.wash_run <= lo {
            0
        } else {
            self.rng.random_range(lo..self.th.wash_run)
        }
    }

    fn gap(&mut self, fillers: &[ActivityLabel]) {
        let n = self.range(self.cfg.duration_ranges.gap);
        for _ in 0..n {
            let x = fillers[self.rng.random_range(0..fillers.len())];
            self.out.push(x);
        }
    }

    fn fill_background(&mut self, until: usize) {
        while self.out.len() < until {
            let x = self.pal.background[self.background.sample(&mut self.rng)];
            let n = self.range(self.cfg.duration_ranges.background);
            let n = n.min(until - self.out.len());
            self.push(x, n);
        }
    }

    fn restroom(&mut self) {
        let d = self.cfg.duration_ranges;
        let n = self.range(d.use_restroom);
        self.push(self.pal.restroom, n);
        let wash = if self.violates(self.cfg.violation_prob.restroom) {
            if self.rng.random::<bool>() {
                self.short_wash()
            } else {
                0
            }
        } else {
            self.good_wash()
        };
        self.push(self.pal.wash, wash);
        let fillers = [self.pal.walk, self.pal.stand];
        self.gap(&fillers);
        let n = self.range(d.work);
        self.push(self.pal.work, n);
    }

    fn meal(&mut self) {
        let d = self.cfg.duration_ranges;
        let fillers = [self.pal.walk, self.pal.sit, self.pal.stand];
        if self.violates(self.cfg.violation_prob.meal) {
            match self.rng.random_range(0..3) {
                0 => {}
                1 => {
                    let n = self.short_wash();
                    self.push(self.pal.wash, n);
                    self.gap(&fillers);
                }
                _ => {
                    let n = self.good_wash();
                    self.push(self.pal.wash, n);
                    let n = self.range(d.touch_object);
                    self.push(self.pal.touch, n);
                    self.gap(&fillers);
                }
            }
        } else {
            let n = self.good_wash();
            self.push(self.pal.wash, n);
            self.gap(&fillers);
        }
        let n = self.range(d.eat);
        self.push(self.pal.eat, n);
    }

    fn brush(&mut self) {
        let (lo, hi) = self.cfg.duration_ranges.brush_teeth;
        let min = self.th.brush_min;
        let violating = self.violates(self.cfg.violation_prob.brush);
        let total = if violating && lo < min {
            self.rng.random_range(lo..min)
        } else {
            self.rng.random_range(min.max(lo)..=hi.max(min))
        };
        // at most one interruption: short pauses keep the session open,
        // long ones (violating form only) split it in two
        let roll = self.rng.random::<f64>();
        let limit = self.th.pause_limit;
        let pause = if violating && roll < 0.2 {
            self.rng.random_range(limit + 1..=limit + 4)
        } else if roll < 0.5 && limit >= 1 && total >= 2 {
            self.rng.random_range(1..=limit)
        } else {
            0
        };
        if pause == 0 || total < 2 {
            self.push(self.pal.brush, total);
        } else {
            let first = self.rng.random_range(1..total);
            self.push(self.pal.brush, first);
            self.push(self.pal.stand, pause);
            self.push(self.pal.brush, total - first);
        }
    }

    fn run(mut self) -> Vec<ActivityLabel> {
        let span = self.cfg.span_windows;
        let rates = self.cfg.routine_rates.values();
        let mut starts = Vec::new();
        for t in 0..span {
            for (r, rate) in ROUTINES.iter().zip(rates) {
                if self.rng.random::<f64>() < rate / 60.0 {
                    starts.push((t, *r));
                }
            }
        }
        for (t, r) in starts {
            if self.out.len() >= span {
                break;
            }
            self.fill_background(t);
            match r {
                Routine::Restroom => self.restroom(),
                Routine::Meal => self.meal(),
                Routine::Brush => self.brush(),
            }
        }
        self.fill_background(span);
        self.out.truncate(span);
        self.out
    }
}

struct Generator {
    cfg: SimConfig,
    th: config::Thresholds,
    pal: Palette,
    background: WeightedIndex<f64>,
    oracle: Oracle,
}

impl Generator {
    fn new(cfg: &SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let weights: Vec<f64> = cfg
            .background_weights
            .named()
            .iter()
            .map(|(_, w)| *w)
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            th: cfg.thresholds()?,
            pal: Palette::new(cfg),
            background: WeightedIndex::new(weights)
                .map_err(|e| SimError::InvalidConfig(e.to_string()))?,
            oracle: Oracle::new(&Vocabulary::default(), cfg.window()?)
                .map_err(|e| SimError::InvalidConfig(e.to_string()))?,
        })
    }

    fn trace(&self, id: String, seed: u64) -> Trace {
        let acts = TraceBuilder {
            cfg: &self.cfg,
            th: self.th,
            pal: &self.pal,
            background: &self.background,
            rng: ChaCha8Rng::seed_from_u64(seed),
            out: Vec::with_capacity(self.cfg.span_windows + 64),
        }
        .run();
        let labels = self.oracle.all(&acts);
        Trace::new(
            id,
            self.cfg.window().expect("validated"),
            acts,
            None,
            Some(labels),
            Some(seed),
        )
        .expect("generated sequences share one length")
    }
}

/// `n` traces under `cfg`, ids `trace-000000`, `trace-000001`, ...
pub fn generate(cfg: &SimConfig, n: usize) -> Result<Vec<Trace>, SimError> {
    generate_with(cfg, n, "trace", Exec::default())
}

/// [`generate`] with an id prefix and explicit execution strategy.
pub fn generate_with(
    cfg: &SimConfig,
    n: usize,
    id_prefix: &str,
    exec: Exec,
) -> Result<Vec<Trace>, SimError> {
    let g = Generator::new(cfg)?;
    Ok(exec.map_range(n, |i| {
        g.trace(
            format!("{id_prefix}-{i:06}"),
            substream_seed(cfg.seed, i as u64),
        )
    }))
}

/// Regenerates a single trace from its recorded substream seed.
pub fn generate_one(cfg: &SimConfig, id: &str, substream: u64) -> Result<Trace, SimError> {
    Ok(Generator::new(cfg)?.trace(id.to_string(), substream))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Trace>,
    pub val: Vec<Trace>,
    pub test: Vec<Trace>,
}

// split tags mixed into the base seed
const SPLIT_TAGS: [(&str, u64); 3] = [
    ("train", 0x7472_6169_6e00_0000),
    ("val", 0x7661_6c00_0000_0000),
    ("test", 0x7465_7374_0000_0000),
];

/// Seed of a split: `splitmix64(base_seed ^ tag)`, with the tag being the
/// split name's ASCII bytes packed big-endian into a u64.
pub fn split_seed(base_seed: u64, split: &str) -> Option<u64> {
    SPLIT_TAGS
        .iter()
        .find(|(n, _)| *n == split)
        .map(|(_, tag)| splitmix64(base_seed ^ tag))
}

/// Train/val/test splits with independent seeds and ids prefixed by split.
pub fn dataset(cfg: &SimConfig, sizes: SplitSizes, base_seed: u64) -> Result<Dataset, SimError> {
    let mk = |split: &str, n: usize| {
        let c = SimConfig {
            seed: split_seed(base_seed, split).expect("known split"),
            ..cfg.clone()
        };
        generate_with(&c, n, split, Exec::default())
    };
    Ok(Dataset {
        train: mk("train", sizes.train)?,
        val: mk("val", sizes.val)?,
        test: mk("test", sizes.test)?,
    })
}
