use std::fmt::Write;

use super::{Action, ActivityMatch, CounterPred, EndOfTracePolicy, TimedAutomaton};

fn preds(a: &TimedAutomaton, preds: &[CounterPred]) -> String {
    if preds.is_empty() {
        return String::new();
    }
    let parts: Vec<String> = preds
        .iter()
        .map(|p| {
            format!(
                "{} {} {}",
                a.counters[p.counter].name,
                p.op.symbol(),
                p.value
            )
        })
        .collect();
    format!(" if {}", parts.join(" and "))
}

/// Renders an automaton back to rule-language text.
///
/// All constants are printed in windows, so the output parses to the same
/// automaton under any window length.
pub fn print_automaton(a: &TimedAutomaton) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "automaton {} {{", a.event);
    let policy = match a.end_of_trace {
        EndOfTracePolicy::CloseSessions => "close_sessions",
        EndOfTracePolicy::Ignore => "ignore",
    };
    let _ = writeln!(s, "  end_of_trace {policy};");
    if !a.counters.is_empty() {
        s.push_str("  counters {\n");
        for c in &a.counters {
            let _ = writeln!(s, "    {} max {};", c.name, c.max);
        }
        s.push_str("  }\n");
    }
    for (i, st) in a.states.iter().enumerate() {
        let initial = if i == a.initial { " initial" } else { "" };
        let _ = writeln!(s, "  state {}{initial} {{", st.name);
        for t in &st.arms {
            let head = match &t.guard.activities {
                ActivityMatch::Otherwise => "otherwise".to_string(),
                ActivityMatch::Set(set) => {
                    let names: Vec<&str> = set
                        .iter()
                        .map(|x| a.vocab.name(*x).unwrap_or("?"))
                        .collect();
                    format!("on {}", names.join(" | "))
                }
            };
            let _ = write!(
                s,
                "    {head}{} -> {}",
                preds(a, &t.guard.counter_preds),
                a.states[t.target].name
            );
            if !t.actions.is_empty() {
                let acts: Vec<String> = t
                    .actions
                    .iter()
                    .map(|act| match *act {
                        Action::Inc(c) => format!("inc {};", a.counters[c].name),
                        Action::Reset(c) => format!("reset {};", a.counters[c].name),
                        Action::Set(c, v) => format!("set {} = {v};", a.counters[c].name),
                    })
                    .collect();
                let _ = write!(s, " {{ {} }}", acts.join(" "));
            }
            if t.emit {
                s.push_str(" emit");
            }
            s.push_str(";\n");
        }
        for e in &st.end_arms {
            let _ = write!(s, "    at_end{}", preds(a, &e.counter_preds));
            if e.emit {
                s.push_str(" emit");
            }
            s.push_str(";\n");
        }
        s.push_str("  }\n");
    }
    s.push_str("}\n");
    s
}

pub fn print_rules(rules: &[TimedAutomaton]) -> String {
    rules
        .iter()
        .map(print_automaton)
        .collect::<Vec<_>>()
        .join("\n")
}
