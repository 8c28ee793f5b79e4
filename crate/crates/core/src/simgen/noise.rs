use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SimError;
use crate::types::{ActivityDistribution, ActivityLabel, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Keep the true label with probability `p_correct`, otherwise pick one
    /// of the other `K - 1` labels uniformly.
    Symmetric,
}

/// Model of an imperfect activity recognizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub p_correct: f64,
    pub kind: NoiseKind,
}

impl NoiseModel {
    pub fn symmetric(p_correct: f64) -> Result<Self, SimError> {
        if !(p_correct > 0.0 && p_correct <= 1.0) {
            return Err(SimError::InvalidNoise(p_correct));
        }
        Ok(Self {
            p_correct,
            kind: NoiseKind::Symmetric,
        })
    }

    /// Recognizer output distribution when it reports `observed`: the
    /// posterior over the true activity under a uniform prior, which puts
    /// `p_correct` on `observed` and spreads the rest evenly.
    pub fn posterior(&self, k: usize, observed: ActivityLabel) -> ActivityDistribution {
        if k == 1 {
            return ActivityDistribution::uniform(1);
        }
        let rest = (1.0 - self.p_correct) / (k - 1) as f64;
        let mut probs = vec![rest; k];
        probs[observed.index()] = self.p_correct;
        ActivityDistribution::new(probs).expect("posterior is normalized")
    }

    fn sample(&self, k: usize, truth: ActivityLabel, rng: &mut ChaCha8Rng) -> ActivityLabel {
        if k == 1 || rng.random::<f64>() < self.p_correct {
            return truth;
        }
        let j = rng.random_range(0..k - 1);
        ActivityLabel::new(if j >= truth.index() { j + 1 } else { j })
    }
}

/// Passes `trace` through the recognizer model.
///
/// `activities` becomes the noisy hard output and `soft` the matching
/// per-window distributions; the argmax of each distribution is the hard
/// output. Ground-truth labels are kept. The trace's window length and id are
/// unchanged. The vocabulary size is taken as the default ten activities.
pub fn corrupt(trace: &Trace, noise: &NoiseModel, seed: u64) -> Trace {
    corrupt_k(
        trace,
        noise,
        seed,
        crate::types::Vocabulary::default().len(),
    )
}

/// [`corrupt`] over a vocabulary of `k` activities.
pub fn corrupt_k(trace: &Trace, noise: &NoiseModel, seed: u64, k: usize) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let activities: Vec<ActivityLabel> = trace
        .activities
        .iter()
        .map(|&x| noise.sample(k, x, &mut rng))
        .collect();
    let soft = activities.iter().map(|&x| noise.posterior(k, x)).collect();
    Trace {
        activities,
        soft: Some(soft),
        ..trace.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{generate, SimConfig};
    use crate::types::argmax_label;

    #[test]
    fn accuracy_bounds() {
        assert!(NoiseModel::symmetric(0.0).is_err());
        assert!(NoiseModel::symmetric(1.1).is_err());
        assert!(NoiseModel::symmetric(f64::NAN).is_err());
        NoiseModel::symmetric(1.0).unwrap();
    }

    #[test]
    fn perfect_recognizer_is_identity() {
        let t = &generate(&SimConfig::default(), 1).unwrap()[0];
        let c = corrupt(t, &NoiseModel::symmetric(1.0).unwrap(), 1);
        assert_eq!(c.activities, t.activities);
        assert_eq!(c.labels, t.labels);
        for (d, x) in c.soft.unwrap().iter().zip(&t.activities) {
            assert_eq!(d.probs()[x.index()], 1.0);
        }
    }

    #[test]
    fn flip_rate_matches_accuracy() {
        let cfg = SimConfig {
            seed: 8,
            ..SimConfig::default()
        };
        let nm = NoiseModel::symmetric(0.9).unwrap();
        let (mut flips, mut n) = (0usize, 0usize);
        for (i, t) in generate(&cfg, 500).unwrap().iter().enumerate() {
            let c = corrupt(t, &nm, i as u64);
            for ((a, b), d) in t
                .activities
                .iter()
                .zip(&c.activities)
                .zip(c.soft.as_ref().unwrap())
            {
                flips += usize::from(a != b);
                n += 1;
                assert_eq!(argmax_label(d), *b);
            }
        }
        let rate = flips as f64 / n as f64;
        let sigma = (0.1 * 0.9 / n as f64).sqrt();
        assert!((rate - 0.1).abs() < 3.0 * sigma, "flip rate {rate}");
    }

    #[test]
    fn chance_accuracy_gives_uniform_soft() {
        let t = &generate(&SimConfig::default(), 1).unwrap()[0];
        let c = corrupt(t, &NoiseModel::symmetric(0.1).unwrap(), 3);
        for d in c.soft.unwrap() {
            assert!(d.probs().iter().all(|p| (p - 0.1).abs() < 1e-12));
        }
    }

    #[test]
    fn same_seed_same_noise() {
        let t = &generate(&SimConfig::default(), 1).unwrap()[0];
        let nm = NoiseModel::symmetric(0.5).unwrap();
        assert_eq!(corrupt(t, &nm, 4), corrupt(t, &nm, 4));
        assert_ne!(corrupt(t, &nm, 4).activities, corrupt(t, &nm, 5).activities);
    }
}
