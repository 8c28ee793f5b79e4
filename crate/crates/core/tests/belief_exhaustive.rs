//! Belief propagation checked against brute-force enumeration.
//!
//! For a short horizon, every activity sequence is enumerated with its
//! probability under independent per-window distributions and run through
//! the crisp engine. The probability that window `t` carries event `e` must
//! equal the emission mass reported by the belief stream.

use ced_core::*;

const K: usize = 10;
const HORIZON: usize = 6;
const TOLERANCE: f64 = 1e-6;

fn detector() -> Detector {
    Detector::new(builtin_rules(WindowSpec::default()).unwrap()).unwrap()
}

/// `[window][rule]` probability of the rule's event, by enumeration.
fn enumerate(det: &Detector, soft: &[ActivityDistribution]) -> Vec<Vec<f64>> {
    let events: Vec<EventType> = det.rules().iter().map(|a| a.event.clone()).collect();
    let n = soft.len();
    let mut out = vec![vec![0.0; events.len()]; n];
    let mut digits = vec![0usize; n];
    let total = K.pow(n as u32);
    for _ in 0..total {
        let p: f64 = digits
            .iter()
            .zip(soft)
            .map(|(&x, d)| d.probs()[x])
            .product();
        if p > 0.0 {
            let acts: Vec<ActivityLabel> = digits.iter().map(|&x| ActivityLabel::new(x)).collect();
            let labels = det.run_crisp(&acts).unwrap().labels;
            for (t, set) in labels.windows().iter().enumerate() {
                for (j, e) in events.iter().enumerate() {
                    if set.contains(e) {
                        out[t][j] += p;
                    }
                }
            }
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < K {
                break;
            }
            *d = 0;
        }
    }
    out
}

fn belief_masses(det: &Detector, soft: &[ActivityDistribution]) -> Vec<Vec<f64>> {
    let mut stream = det.belief_stream(0.5).unwrap();
    let mut out: Vec<Vec<f64>> = soft
        .iter()
        .map(|d| stream.push(d).unwrap().emission_mass)
        .collect();
    // the final window also carries end-of-trace emissions
    *out.last_mut().unwrap() = stream.finish().emission_mass;
    out
}

fn assert_close(soft: &[ActivityDistribution]) {
    let det = detector();
    let exact = enumerate(&det, soft);
    let belief = belief_masses(&det, soft);
    for (t, (a, b)) in exact.iter().zip(&belief).enumerate() {
        for (j, (x, y)) in a.iter().zip(b).enumerate() {
            assert!(
                (x - y).abs() <= TOLERANCE,
                "window {t}, rule {j}: enumeration {x}, belief {y}"
            );
        }
    }
    // labels follow from the masses at any threshold
    for th in [0.1, 0.3, 0.5, 0.9] {
        let labels = det
            .run_soft(soft, SoftMode::Belief { threshold: th })
            .unwrap()
            .labels;
        for (t, set) in labels.windows().iter().enumerate() {
            for (j, a) in det.rules().iter().enumerate() {
                let m = exact[t][j];
                if (m - th).abs() > TOLERANCE {
                    assert_eq!(
                        set.contains(&a.event),
                        m >= th,
                        "window {t}, {}, th {th}",
                        a.event
                    );
                }
            }
        }
    }
}

fn peaked(truth: &[&str], p: f64) -> Vec<ActivityDistribution> {
    let v = Vocabulary::default();
    truth
        .iter()
        .map(|n| {
            let mut probs = vec![(1.0 - p) / (K - 1) as f64; K];
            probs[v.label(n).unwrap().index()] = p;
            ActivityDistribution::new(probs).unwrap()
        })
        .collect()
}

#[test]
fn uniform_observations() {
    assert_close(&vec![ActivityDistribution::uniform(K); HORIZON]);
}

#[test]
fn confident_observations_of_a_violation() {
    assert_close(&peaked(
        &[
            "use_restroom",
            "wash_hands",
            "wash_hands",
            "work",
            "eat",
            "brush_teeth",
        ],
        0.9,
    ));
}

#[test]
fn sparse_mixed_observations() {
    // a few activities per window with uneven mass, exercising pruning-free paths
    let v = Vocabulary::default();
    let mix = |pairs: &[(&str, f64)]| {
        let mut probs = vec![0.0; K];
        for (n, p) in pairs {
            probs[v.label(n).unwrap().index()] = *p;
        }
        ActivityDistribution::new(probs).unwrap()
    };
    let soft = vec![
        mix(&[("use_restroom", 0.6), ("brush_teeth", 0.4)]),
        mix(&[("wash_hands", 0.5), ("brush_teeth", 0.3), ("walk", 0.2)]),
        mix(&[("wash_hands", 0.7), ("stand", 0.3)]),
        mix(&[("wash_hands", 0.5), ("brush_teeth", 0.5)]),
        mix(&[("wash_hands", 0.8), ("work", 0.2)]),
        mix(&[("work", 0.4), ("eat", 0.4), ("idle", 0.2)]),
    ];
    assert_close(&soft);
}
