use super::{parse_rules, DiagnosticKind, RuleError, TimedAutomaton};
use crate::types::{windows_for, Vocabulary, WindowSpec};

/// The three hygiene rules in rule-language form.
///
/// * `e1`: returning to work after using the restroom without washing hands
///   for at least 20 s consecutively. Emitted on the offending work window.
/// * `e2`: starting a meal without a qualifying wash (a run of at least
///   20 s) that ended within the previous 2 minutes and was not followed by
///   touching other things. Emitted on the first window of the meal.
/// * `e3`: a brushing session totalling less than 2 minutes of brushing.
///   Pauses of up to 10 s keep the session open; the label goes on the
///   window where the session closes (or the last window of the trace).
pub const BUILTIN_SOURCE: &str = r#"# Post-restroom hand hygiene.
automaton e1 {
  end_of_trace ignore;
  counters {
    wash max 20s;            # consecutive wash_hands windows since the restroom
  }
  state idle initial {
    on use_restroom -> after_restroom { reset wash; };
    otherwise -> idle;
  }
  state after_restroom {
    on use_restroom -> after_restroom { reset wash; };
    on wash_hands if wash >= 20s - 1 -> idle { reset wash; };
    on wash_hands -> after_restroom { inc wash; };
    on work -> idle { reset wash; } emit;
    otherwise -> after_restroom { reset wash; };
  }
}

# Hand washing before meals.
automaton e2 {
  end_of_trace ignore;
  counters {
    wash max 20s;            # length of the current wash_hands run
    since max 2m;            # windows since the last qualifying wash ended
  }
  state unclean initial {
    on wash_hands if wash >= 20s - 1 -> clean { inc wash; reset since; };
    on wash_hands -> unclean { inc wash; };
    on eat -> eating { reset wash; } emit;
    otherwise -> unclean { reset wash; };
  }
  state clean {
    on wash_hands if wash >= 20s - 1 -> clean { inc wash; reset since; };
    on wash_hands if since >= 2m - 1 -> unclean { inc wash; reset since; };
    on wash_hands -> clean { inc wash; inc since; };
    on eat -> eating { reset wash; reset since; };
    on touch_object | use_restroom | work -> unclean { reset wash; reset since; };
    otherwise if since >= 2m - 1 -> unclean { reset wash; reset since; };
    otherwise -> clean { reset wash; inc since; };
  }
  state eating {
    on eat -> eating;
    on wash_hands if wash >= 20s - 1 -> clean { inc wash; reset since; };
    on wash_hands -> unclean { inc wash; };
    otherwise -> unclean { reset wash; };
  }
}

# Brushing duration.
automaton e3 {
  end_of_trace close_sessions;
  counters {
    total max 2m;            # brushing windows in the open session
    pause max 10s;           # consecutive non-brushing windows in the session
  }
  state idle initial {
    on brush_teeth -> brushing { set total = 1; reset pause; };
    otherwise -> idle;
  }
  state brushing {
    on brush_teeth -> brushing { inc total; reset pause; };
    otherwise if pause >= 10s and total < 2m -> idle { reset total; reset pause; } emit;
    otherwise if pause >= 10s -> idle { reset total; reset pause; };
    otherwise -> brushing { inc pause; };
    at_end if total < 2m emit;
  }
}
"#;

/// Built-in `e1`, `e2`, `e3` over the default vocabulary.
///
/// Fails with `NonDivisible` unless the window length divides 10 s, 20 s and
/// 120 s.
pub fn builtin_rules(window: WindowSpec) -> Result<Vec<TimedAutomaton>, RuleError> {
    for secs in [20, 120, 10] {
        windows_for(secs, window).map_err(RuleError::NonDivisible)?;
    }
    match parse_rules(BUILTIN_SOURCE, &Vocabulary::default(), window) {
        Ok(p) => Ok(p.automata),
        Err(diags) => {
            debug_assert!(diags.iter().all(|d| d.kind != DiagnosticKind::NonDivisible));
            Err(RuleError::Invalid(diags))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ruledsl::{print_rules, validate, EndOfTracePolicy};

    fn w(s: u32) -> WindowSpec {
        WindowSpec::new(s).unwrap()
    }

    fn max_of(a: &TimedAutomaton, c: &str) -> u32 {
        a.counters[a.counter_index(c).unwrap()].max
    }

    #[test]
    fn thresholds_at_five_seconds() {
        let r = builtin_rules(w(5)).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(max_of(&r[0], "wash"), 4);
        assert_eq!(max_of(&r[1], "since"), 24);
        assert_eq!(max_of(&r[2], "total"), 24);
        assert_eq!(max_of(&r[2], "pause"), 2);
        assert_eq!(r[0].states.len(), 2);
        assert_eq!(r[0].counters.len(), 1);
        assert_eq!(r[2].end_of_trace, EndOfTracePolicy::CloseSessions);
    }

    #[test]
    fn thresholds_at_ten_seconds() {
        let r = builtin_rules(w(10)).unwrap();
        assert_eq!(max_of(&r[0], "wash"), 2);
        assert_eq!(max_of(&r[1], "since"), 12);
        assert_eq!(max_of(&r[2], "pause"), 1);
    }

    #[test]
    fn seven_second_windows_rejected() {
        assert!(matches!(
            builtin_rules(w(7)),
            Err(RuleError::NonDivisible(_))
        ));
    }

    #[test]
    fn thresholds_scale_with_window() {
        let base = builtin_rules(w(5)).unwrap();
        for ws in [1u32, 2, 5, 10] {
            let r = builtin_rules(w(ws)).unwrap();
            for (a, b) in r.iter().zip(&base) {
                for (c, cb) in a.counters.iter().zip(&b.counters) {
                    assert_eq!(c.max * ws, cb.max * 5);
                }
            }
        }
    }

    #[test]
    fn builtins_validate_clean() {
        let v = Vocabulary::default();
        for a in builtin_rules(w(5)).unwrap() {
            assert!(validate(&a, &v).is_empty(), "{}", a.event);
        }
    }

    #[test]
    fn printed_builtins_reparse_under_any_window() {
        let r = builtin_rules(w(5)).unwrap();
        let text = print_rules(&r);
        let again = parse_rules(&text, &Vocabulary::default(), w(3)).unwrap();
        assert_eq!(again.automata.len(), 3);
        assert_eq!(print_rules(&again.automata), text);
    }
}
