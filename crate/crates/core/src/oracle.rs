//! Whole-trace reference labelers for the three built-in rules.
//!
//! These scan the complete activity sequence with explicit searches over
//! windows and runs. They share no code with the automata, so agreement
//! between the two is meaningful.

use thiserror::Error;

use crate::types::{
    windows_for, ActivityLabel, CELabelSeq, EventType, TypeError, Vocabulary, WindowSpec,
};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("vocabulary lacks activity `{0}`")]
    MissingActivity(&'static str),
    #[error(transparent)]
    Window(#[from] TypeError),
}

/// Reference labeler bound to a vocabulary and window length.
#[derive(Debug, Clone)]
pub struct Oracle {
    restroom: ActivityLabel,
    wash: ActivityLabel,
    work: ActivityLabel,
    eat: ActivityLabel,
    brush: ActivityLabel,
    contamination: [ActivityLabel; 3],
    /// Consecutive wash windows that count as a proper hand wash (20 s).
    wash_run: usize,
    /// Longest allowed distance from wash end to meal start (2 min).
    meal_window: usize,
    /// Brushing windows needed for a complete session (2 min).
    brush_min: usize,
    /// Longest pause that keeps a brushing session open (10 s).
    pause_limit: usize,
}

impl Oracle {
    pub fn new(vocab: &Vocabulary, window: WindowSpec) -> Result<Self, OracleError> {
        let get = |name: &'static str| vocab.label(name).ok_or(OracleError::MissingActivity(name));
        Ok(Self {
            restroom: get("use_restroom")?,
            wash: get("wash_hands")?,
            work: get("work")?,
            eat: get("eat")?,
            brush: get("brush_teeth")?,
            contamination: [get("touch_object")?, get("use_restroom")?, get("work")?],
            wash_run: windows_for(20, window)? as usize,
            meal_window: windows_for(120, window)? as usize,
            brush_min: windows_for(120, window)? as usize,
            pause_limit: windows_for(10, window)? as usize,
        })
    }

    /// Default vocabulary, 5 s windows.
    pub fn standard() -> Self {
        Self::new(&Vocabulary::default(), WindowSpec::default()).expect("default vocabulary")
    }

    fn labeled(len: usize, event: &str, at: impl IntoIterator<Item = usize>) -> CELabelSeq {
        let mut out = CELabelSeq::empty(len);
        for t in at {
            out.0[t].insert(EventType::from(event));
        }
        out
    }

    /// Work windows reached after a restroom visit without a qualifying wash.
    pub fn e1(&self, acts: &[ActivityLabel]) -> CELabelSeq {
        let mut hits = Vec::new();
        for w in (0..acts.len()).filter(|&w| acts[w] == self.work) {
            // walk back towards a restroom visit, tracking the longest
            // wash run strictly between it and w
            let (mut run, mut longest) = (0usize, 0usize);
            for j in (0..w).rev() {
                let x = acts[j];
                if x == self.work {
                    break;
                }
                if x == self.restroom && longest < self.wash_run {
                    hits.push(w);
                    break;
                }
                if x == self.wash {
                    run += 1;
                    longest = longest.max(run);
                } else {
                    run = 0;
                }
            }
        }
        Self::labeled(acts.len(), "e1", hits)
    }

    /// Meal starts without a recent, uncontaminated, unconsumed wash.
    pub fn e2(&self, acts: &[ActivityLabel]) -> CELabelSeq {
        let mut wash_ends = Vec::new();
        let mut t = 0;
        while t < acts.len() {
            if acts[t] == self.wash {
                let start = t;
                while t < acts.len() && acts[t] == self.wash {
                    t += 1;
                }
                if t - start >= self.wash_run {
                    wash_ends.push(t - 1);
                }
            } else {
                t += 1;
            }
        }
        let meal_starts: Vec<usize> = (0..acts.len())
            .filter(|&m| acts[m] == self.eat && (m == 0 || acts[m - 1] != self.eat))
            .collect();

        let hits = meal_starts.iter().copied().filter(|&m| {
            let clean = wash_ends.iter().any(|&q| {
                q < m
                    && m - q <= self.meal_window
                    && !acts[q + 1..m]
                        .iter()
                        .any(|x| self.contamination.contains(x))
                    && !meal_starts.iter().any(|&m2| q < m2 && m2 < m)
            });
            !clean
        });
        Self::labeled(acts.len(), "e2", hits.collect::<Vec<_>>())
    }

    /// Brushing sessions shorter than the minimum, labeled where they close.
    pub fn e3(&self, acts: &[ActivityLabel]) -> CELabelSeq {
        let brushes: Vec<usize> = (0..acts.len()).filter(|&t| acts[t] == self.brush).collect();
        let mut sessions: Vec<(usize, usize)> = Vec::new(); // (brush windows, last brush)
        for &b in &brushes {
            match sessions.last_mut() {
                Some((count, last)) if b - *last - 1 <= self.pause_limit => {
                    *count += 1;
                    *last = b;
                }
                _ => sessions.push((1, b)),
            }
        }
        let hits = sessions
            .into_iter()
            .filter(|(count, _)| *count < self.brush_min)
            .map(|(_, last)| (last + self.pause_limit + 1).min(acts.len() - 1));
        Self::labeled(acts.len(), "e3", hits.collect::<Vec<_>>())
    }

    pub fn all(&self, acts: &[ActivityLabel]) -> CELabelSeq {
        self.e1(acts).union(&self.e2(acts)).union(&self.e3(acts))
    }
}

pub fn oracle_e1(activities: &[ActivityLabel]) -> CELabelSeq {
    Oracle::standard().e1(activities)
}

pub fn oracle_e2(activities: &[ActivityLabel]) -> CELabelSeq {
    Oracle::standard().e2(activities)
}

pub fn oracle_e3(activities: &[ActivityLabel]) -> CELabelSeq {
    Oracle::standard().e3(activities)
}

pub fn oracle_all(activities: &[ActivityLabel]) -> CELabelSeq {
    Oracle::standard().all(activities)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acts(spec: &[(&str, usize)]) -> Vec<ActivityLabel> {
        let v = Vocabulary::default();
        spec.iter()
            .flat_map(|(n, k)| std::iter::repeat_n(v.label(n).unwrap(), *k))
            .collect()
    }

    fn at(seq: &CELabelSeq, e: &str) -> Vec<usize> {
        seq.positions(&EventType::from(e))
    }

    #[test]
    fn e1_violation_on_work_window() {
        let a = acts(&[("use_restroom", 2), ("wash_hands", 3), ("work", 1)]);
        assert_eq!(at(&oracle_e1(&a), "e1"), vec![5]);
    }

    #[test]
    fn e1_exact_wash_run_suffices() {
        let a = acts(&[("use_restroom", 1), ("wash_hands", 4), ("work", 1)]);
        assert!(at(&oracle_e1(&a), "e1").is_empty());
    }

    #[test]
    fn e1_needs_restroom() {
        let a = acts(&[("walk", 3), ("work", 4)]);
        assert!(at(&oracle_e1(&a), "e1").is_empty());
    }

    #[test]
    fn e1_only_first_work_window() {
        let a = acts(&[("use_restroom", 1), ("walk", 2), ("work", 3)]);
        assert_eq!(at(&oracle_e1(&a), "e1"), vec![3]);
    }

    #[test]
    fn e1_broken_wash_run_does_not_count() {
        let a = acts(&[
            ("use_restroom", 1),
            ("wash_hands", 2),
            ("walk", 1),
            ("wash_hands", 2),
            ("work", 1),
        ]);
        assert_eq!(at(&oracle_e1(&a), "e1"), vec![6]);
    }

    #[test]
    fn e2_clean_meal() {
        let a = acts(&[("wash_hands", 4), ("walk", 2), ("eat", 1)]);
        assert!(at(&oracle_e2(&a), "e2").is_empty());
    }

    #[test]
    fn e2_contamination_revokes() {
        let a = acts(&[("wash_hands", 4), ("touch_object", 1), ("eat", 1)]);
        assert_eq!(at(&oracle_e2(&a), "e2"), vec![5]);
    }

    #[test]
    fn e2_short_wash() {
        let a = acts(&[("wash_hands", 3), ("eat", 1)]);
        assert_eq!(at(&oracle_e2(&a), "e2"), vec![3]);
    }

    #[test]
    fn e2_deadline_is_two_minutes_from_wash_end() {
        // wash ends at 3; eat at 3 + 24 is on time, 3 + 25 is late
        let ok = acts(&[("wash_hands", 4), ("sit", 23), ("eat", 2)]);
        assert!(at(&oracle_e2(&ok), "e2").is_empty());
        let late = acts(&[("wash_hands", 4), ("sit", 24), ("eat", 2)]);
        assert_eq!(at(&oracle_e2(&late), "e2"), vec![28]);
    }

    #[test]
    fn e2_meal_consumes_wash() {
        let a = acts(&[("wash_hands", 4), ("eat", 3), ("sit", 1), ("eat", 1)]);
        assert_eq!(at(&oracle_e2(&a), "e2"), vec![8]);
    }

    #[test]
    fn e3_full_session_is_fine() {
        let a = acts(&[("brush_teeth", 24), ("walk", 1)]);
        assert!(at(&oracle_e3(&a), "e3").is_empty());
    }

    #[test]
    fn e3_short_session_closes_after_pause() {
        let a = acts(&[("brush_teeth", 5), ("walk", 3), ("sit", 4)]);
        assert_eq!(at(&oracle_e3(&a), "e3"), vec![7]);
    }

    #[test]
    fn e3_open_session_closes_at_end() {
        let a = acts(&[("brush_teeth", 3)]);
        assert_eq!(at(&oracle_e3(&a), "e3"), vec![2]);
    }

    #[test]
    fn e3_short_pauses_merge() {
        let a = acts(&[
            ("brush_teeth", 12),
            ("walk", 2),
            ("brush_teeth", 12),
            ("walk", 5),
        ]);
        assert!(at(&oracle_e3(&a), "e3").is_empty());
    }

    #[test]
    fn union_of_all_three() {
        let a = acts(&[
            ("use_restroom", 2),
            ("wash_hands", 3),
            ("work", 1),
            ("eat", 1),
            ("brush_teeth", 3),
        ]);
        let all = oracle_all(&a);
        assert_eq!(at(&all, "e1"), vec![5]);
        assert_eq!(at(&all, "e2"), vec![6]);
        assert_eq!(at(&all, "e3"), vec![9]);
    }

    #[test]
    fn empty_trace() {
        assert!(oracle_all(&[]).is_empty());
    }
}
