use serde::{Deserialize, Serialize};

use super::SimError;
use crate::types::{windows_for, WindowSpec};

/// One value per routine kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerRoutine<T> {
    pub restroom: T,
    pub meal: T,
    pub brush: T,
}

impl<T: Copy> PerRoutine<T> {
    pub fn splat(v: T) -> Self {
        Self {
            restroom: v,
            meal: v,
            brush: v,
        }
    }

    pub(crate) fn values(&self) -> [T; 3] {
        [self.restroom, self.meal, self.brush]
    }
}

/// Inclusive window-count ranges used by the routine templates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DurationRanges {
    pub use_restroom: (usize, usize),
    pub wash_hands: (usize, usize),
    pub eat: (usize, usize),
    pub brush_teeth: (usize, usize),
    pub work: (usize, usize),
    pub touch_object: (usize, usize),
    /// Filler between the steps of a routine.
    pub gap: (usize, usize),
    /// Length of one background segment.
    pub background: (usize, usize),
}

impl Default for DurationRanges {
    fn default() -> Self {
        Self {
            use_restroom: (2, 12),
            wash_hands: (1, 8),
            eat: (6, 24),
            brush_teeth: (6, 30),
            work: (2, 12),
            touch_object: (1, 2),
            gap: (0, 3),
            background: (1, 6),
        }
    }
}

impl DurationRanges {
    fn named(&self) -> [(&'static str, (usize, usize)); 8] {
        [
            ("use_restroom", self.use_restroom),
            ("wash_hands", self.wash_hands),
            ("eat", self.eat),
            ("brush_teeth", self.brush_teeth),
            ("work", self.work),
            ("touch_object", self.touch_object),
            ("gap", self.gap),
            ("background", self.background),
        ]
    }
}

/// Relative frequency of background activities between routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundWeights {
    pub walk: f64,
    pub sit: f64,
    pub stand: f64,
    pub work: f64,
    pub idle: f64,
    pub touch_object: f64,
}

impl Default for BackgroundWeights {
    fn default() -> Self {
        Self {
            walk: 3.0,
            sit: 3.0,
            stand: 2.0,
            work: 3.0,
            idle: 2.0,
            touch_object: 1.0,
        }
    }
}

impl BackgroundWeights {
    pub(crate) fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("walk", self.walk),
            ("sit", self.sit),
            ("stand", self.stand),
            ("work", self.work),
            ("idle", self.idle),
            ("touch_object", self.touch_object),
        ]
    }
}

/// Simulator settings. Readable from a TOML key-value file:
///
/// ```toml
/// span_windows = 60
/// window_s = 5
/// seed = 42
///
/// [routine_rates]        # expected routine starts per 60 windows
/// restroom = 1.0
/// meal = 1.0
/// brush = 1.0
///
/// [violation_prob]       # chance a routine is generated in violating form
/// restroom = 0.5
/// meal = 0.5
/// brush = 0.5
///
/// [duration_ranges]      # inclusive [lo, hi] in windows
/// wash_hands = [1, 8]
///
/// [background_weights]
/// walk = 3.0
/// ```
///
/// Every key is optional and falls back to the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub span_windows: usize,
    pub window_s: u32,
    pub routine_rates: PerRoutine<f64>,
    pub violation_prob: PerRoutine<f64>,
    pub duration_ranges: DurationRanges,
    pub background_weights: BackgroundWeights,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            span_windows: 60,
            window_s: 5,
            routine_rates: PerRoutine::splat(1.0),
            violation_prob: PerRoutine::splat(0.5),
            duration_ranges: DurationRanges::default(),
            background_weights: BackgroundWeights::default(),
            seed: 0,
        }
    }
}

/// Rule thresholds in windows, derived from the window length.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Thresholds {
    pub wash_run: usize,
    pub brush_min: usize,
    pub pause_limit: usize,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn window(&self) -> Result<WindowSpec, SimError> {
        WindowSpec::new(self.window_s).map_err(|e| SimError::InvalidConfig(e.to_string()))
    }

    /// Same settings over `span` windows, with routine rates rescaled so the
    /// expected number of routines per trace stays what it is at the
    /// current span. Used for the longer and shorter evaluation spans, where
    /// the same scenario is spread over a different duration.
    pub fn stretched_to(&self, span: usize) -> Self {
        let f = self.span_windows as f64 / span.max(1) as f64;
        let r = self.routine_rates;
        Self {
            span_windows: span,
            routine_rates: PerRoutine {
                restroom: r.restroom * f,
                meal: r.meal * f,
                brush: r.brush * f,
            },
            ..self.clone()
        }
    }

    pub(crate) fn thresholds(&self) -> Result<Thresholds, SimError> {
        let w = self.window()?;
        let get = |s| {
            windows_for(s, w)
                .map(|n| n as usize)
                .map_err(|e| SimError::InvalidConfig(e.to_string()))
        };
        Ok(Thresholds {
            wash_run: get(20)?,
            brush_min: get(120)?,
            pause_limit: get(10)?,
        })
    }

    /// Checks ranges, probabilities and weights, then that every enabled
    /// routine fits the span.
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.span_windows == 0 {
            return Err(SimError::InfeasibleConfig(
                "span_windows must be positive".into(),
            ));
        }
        let th = self.thresholds()?;
        for (rate, r) in self
            .routine_rates
            .values()
            .iter()
            .zip(["restroom", "meal", "brush"])
        {
            if !(0.0..=60.0).contains(rate) {
                return bad(format!("routine_rates.{r} = {rate} outside [0, 60]"));
            }
        }
        for (p, r) in self
            .violation_prob
            .values()
            .iter()
            .zip(["restroom", "meal", "brush"])
        {
            if !(0.0..=1.0).contains(p) {
                return bad(format!("violation_prob.{r} = {p} outside [0, 1]"));
            }
        }
        for (name, (lo, hi)) in self.duration_ranges.named() {
            if lo > hi {
                return bad(format!("duration_ranges.{name} = [{lo}, {hi}] is empty"));
            }
        }
        let d = &self.duration_ranges;
        if d.background.0 == 0 {
            return bad("duration_ranges.background must start at 1 or more".into());
        }
        for (name, (lo, _)) in [
            ("use_restroom", d.use_restroom),
            ("eat", d.eat),
            ("brush_teeth", d.brush_teeth),
            ("work", d.work),
            ("touch_object", d.touch_object),
        ] {
            if lo == 0 {
                return bad(format!("duration_ranges.{name} must start at 1 or more"));
            }
        }
        let weights = self.background_weights.named();
        if weights.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) {
            return bad("background_weights must be nonnegative".into());
        }
        if weights.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
            return bad("background_weights must have a positive sum".into());
        }

        let minimal = [
            d.use_restroom.0 + th.wash_run + d.gap.0 + d.work.0,
            th.wash_run + d.gap.0 + d.eat.0,
            d.brush_teeth.0.min(th.brush_min),
        ];
        for ((len, rate), r) in minimal
            .iter()
            .zip(self.routine_rates.values())
            .zip(["restroom", "meal", "brush"])
        {
            if rate > 0.0 && *len > self.span_windows {
                return Err(SimError::InfeasibleConfig(format!(
                    "the {r} routine needs at least {len} windows, span is {}",
                    self.span_windows
                )));
            }
        }
        Ok(())
    }
}
