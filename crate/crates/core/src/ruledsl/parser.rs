use std::collections::BTreeSet;

use super::lexer::{lex, Tok, Token};
use super::validate::validate_rule_set;
use super::{
    Action, ActivityMatch, Comparator, CounterDecl, CounterPred, Diagnostic, DiagnosticKind,
    EndArm, EndOfTracePolicy, Guard, ParsedRules, Pos, StateDecl, TimedAutomaton, Transition,
};
use crate::types::{windows_for, EventType, Vocabulary, WindowSpec};

#[derive(Debug)]
struct Term {
    negative: bool,
    value: u64,
    unit: Option<char>,
    pos: Pos,
}

#[derive(Debug)]
struct Const {
    terms: Vec<Term>,
    pos: Pos,
}

#[derive(Debug)]
struct Name {
    text: String,
    pos: Pos,
}

#[derive(Debug)]
struct PredAst {
    counter: Name,
    op: Comparator,
    value: Const,
}

#[derive(Debug)]
enum ActionAst {
    Inc(Name),
    Reset(Name),
    Set(Name, Const),
}

#[derive(Debug)]
enum ArmKind {
    On(Vec<Name>),
    Otherwise,
    AtEnd,
}

#[derive(Debug)]
struct ArmAst {
    kind: ArmKind,
    preds: Vec<PredAst>,
    target: Option<Name>,
    actions: Vec<ActionAst>,
    emit: bool,
    pos: Pos,
}

#[derive(Debug)]
struct StateAst {
    name: Name,
    initial: bool,
    arms: Vec<ArmAst>,
}

#[derive(Debug)]
struct AutomatonAst {
    event: Name,
    policy: Option<(EndOfTracePolicy, Pos)>,
    counters: Vec<(Name, Const)>,
    states: Vec<StateAst>,
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.i].clone();
        if t.tok != Tok::Eof {
            self.i += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> Diagnostic {
        Diagnostic::new(
            DiagnosticKind::SyntaxError,
            Some(self.pos()),
            format!(
                "expected {}, found {}",
                expected.join(" or "),
                self.peek().describe()
            ),
        )
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{kw}`")]))
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<Pos> {
        if *self.peek() == tok {
            Ok(self.advance().pos)
        } else {
            Err(self.error(&[&tok.describe()]))
        }
    }

    fn name(&mut self, what: &str) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(text) => {
                let pos = self.advance().pos;
                Ok(Name { text, pos })
            }
            _ => Err(self.error(&[what])),
        }
    }

    fn file(&mut self) -> PResult<Vec<AutomatonAst>> {
        let mut out = Vec::new();
        while *self.peek() != Tok::Eof {
            if !self.is_kw("automaton") {
                return Err(self.error(&["`automaton`", "end of input"]));
            }
            out.push(self.automaton()?);
        }
        Ok(out)
    }

    fn automaton(&mut self) -> PResult<AutomatonAst> {
        self.expect_kw("automaton")?;
        let event = self.name("event name")?;
        self.expect(Tok::LBrace)?;
        let mut a = AutomatonAst {
            event,
            policy: None,
            counters: Vec::new(),
            states: Vec::new(),
        };
        loop {
            if *self.peek() == Tok::RBrace {
                self.advance();
                return Ok(a);
            }
            if self.is_kw("end_of_trace") {
                let pos = self.advance().pos;
                let policy = if self.eat_kw("close_sessions") {
                    EndOfTracePolicy::CloseSessions
                } else if self.eat_kw("ignore") {
                    EndOfTracePolicy::Ignore
                } else {
                    return Err(self.error(&["`close_sessions`", "`ignore`"]));
                };
                self.expect(Tok::Semi)?;
                if a.policy.is_some() {
                    return Err(Diagnostic::new(
                        DiagnosticKind::SyntaxError,
                        Some(pos),
                        "end_of_trace given more than once",
                    ));
                }
                a.policy = Some((policy, pos));
            } else if self.eat_kw("counters") {
                self.expect(Tok::LBrace)?;
                while *self.peek() != Tok::RBrace {
                    let name = self.name("counter name or `}`")?;
                    self.expect_kw("max")?;
                    let max = self.constant()?;
                    self.expect(Tok::Semi)?;
                    a.counters.push((name, max));
                }
                self.advance();
            } else if self.eat_kw("state") {
                a.states.push(self.state()?);
            } else {
                return Err(self.error(&["`state`", "`counters`", "`end_of_trace`", "`}`"]));
            }
        }
    }

    fn state(&mut self) -> PResult<StateAst> {
        let name = self.name("state name")?;
        let initial = self.eat_kw("initial");
        self.expect(Tok::LBrace)?;
        let mut arms = Vec::new();
        while *self.peek() != Tok::RBrace {
            arms.push(self.arm()?);
        }
        self.advance();
        Ok(StateAst {
            name,
            initial,
            arms,
        })
    }

    fn arm(&mut self) -> PResult<ArmAst> {
        let pos = self.pos();
        let kind = if self.eat_kw("on") {
            let mut set = vec![self.name("activity name")?];
            while *self.peek() == Tok::Pipe {
                self.advance();
                set.push(self.name("activity name")?);
            }
            ArmKind::On(set)
        } else if self.eat_kw("otherwise") {
            ArmKind::Otherwise
        } else if self.eat_kw("at_end") {
            ArmKind::AtEnd
        } else {
            return Err(self.error(&["`on`", "`otherwise`", "`at_end`", "`}`"]));
        };

        let mut preds = Vec::new();
        if self.eat_kw("if") {
            preds.push(self.pred()?);
            while self.eat_kw("and") {
                preds.push(self.pred()?);
            }
        }

        let mut target = None;
        let mut actions = Vec::new();
        if !matches!(kind, ArmKind::AtEnd) {
            self.expect(Tok::Arrow)?;
            target = Some(self.name("target state")?);
            if *self.peek() == Tok::LBrace {
                self.advance();
                while *self.peek() != Tok::RBrace {
                    actions.push(self.action()?);
                    self.expect(Tok::Semi)?;
                }
                self.advance();
            }
        }
        let emit = self.eat_kw("emit");
        if *self.peek() != Tok::Semi {
            return Err(self.error(if emit { &["`;`"] } else { &["`emit`", "`;`"] }));
        }
        self.advance();
        Ok(ArmAst {
            kind,
            preds,
            target,
            actions,
            emit,
            pos,
        })
    }

    fn pred(&mut self) -> PResult<PredAst> {
        let counter = self.name("counter name")?;
        let op = match self.peek() {
            Tok::Lt => Comparator::Lt,
            Tok::Le => Comparator::Le,
            Tok::EqEq => Comparator::Eq,
            Tok::Ge => Comparator::Ge,
            Tok::Gt => Comparator::Gt,
            _ => return Err(self.error(&["`<`", "`<=`", "`==`", "`>=`", "`>`"])),
        };
        self.advance();
        let value = self.constant()?;
        Ok(PredAst { counter, op, value })
    }

    fn action(&mut self) -> PResult<ActionAst> {
        if self.eat_kw("inc") {
            Ok(ActionAst::Inc(self.name("counter name")?))
        } else if self.eat_kw("reset") {
            Ok(ActionAst::Reset(self.name("counter name")?))
        } else if self.eat_kw("set") {
            let c = self.name("counter name")?;
            self.expect(Tok::Assign)?;
            Ok(ActionAst::Set(c, self.constant()?))
        } else {
            Err(self.error(&["`inc`", "`reset`", "`set`", "`}`"]))
        }
    }

    fn constant(&mut self) -> PResult<Const> {
        let pos = self.pos();
        let mut terms = vec![self.term(false)?];
        loop {
            let negative = match self.peek() {
                Tok::Plus => false,
                Tok::Minus => true,
                _ => break,
            };
            self.advance();
            terms.push(self.term(negative)?);
        }
        Ok(Const { terms, pos })
    }

    fn term(&mut self, negative: bool) -> PResult<Term> {
        let pos = self.pos();
        let (value, unit) = match *self.peek() {
            Tok::Int(n) => (n, None),
            Tok::Duration(n, u) => (n, Some(u)),
            _ => return Err(self.error(&["integer", "duration"])),
        };
        self.advance();
        Ok(Term {
            negative,
            value,
            unit,
            pos,
        })
    }
}

struct Lowering<'a> {
    vocab: &'a Vocabulary,
    window: WindowSpec,
    diags: Vec<Diagnostic>,
}

impl Lowering<'_> {
    fn constant(&mut self, c: &Const) -> Option<u32> {
        let mut total: i128 = 0;
        for t in &c.terms {
            let windows = match t.unit {
                None | Some('w') => t.value,
                Some(u) => {
                    let secs = match u {
                        's' => t.value,
                        'm' => t.value.saturating_mul(60),
                        _ => t.value.saturating_mul(3600),
                    };
                    match windows_for(secs, self.window) {
                        Ok(w) => w,
                        Err(e) => {
                            self.diags.push(Diagnostic::new(
                                DiagnosticKind::NonDivisible,
                                Some(t.pos),
                                e.to_string(),
                            ));
                            return None;
                        }
                    }
                }
            };
            let w = i128::from(windows);
            total += if t.negative { -w } else { w };
        }
        match u32::try_from(total) {
            Ok(v) => Some(v),
            Err(_) => {
                self.diags.push(Diagnostic::new(
                    DiagnosticKind::CounterBound,
                    Some(c.pos),
                    format!(
                        "constant evaluates to {total} windows, outside 0..={}",
                        u32::MAX
                    ),
                ));
                None
            }
        }
    }

    fn counter(&mut self, counters: &[CounterDecl], n: &Name) -> Option<usize> {
        let idx = counters.iter().position(|c| c.name == n.text);
        if idx.is_none() {
            self.diags.push(Diagnostic::new(
                DiagnosticKind::UnknownCounter,
                Some(n.pos),
                format!("unknown counter `{}`", n.text),
            ));
        }
        idx
    }

    fn preds(&mut self, counters: &[CounterDecl], preds: &[PredAst]) -> Option<Vec<CounterPred>> {
        let mut out = Vec::new();
        let mut ok = true;
        for p in preds {
            let c = self.counter(counters, &p.counter);
            let v = self.constant(&p.value);
            match (c, v) {
                (Some(counter), Some(value)) => out.push(CounterPred {
                    counter,
                    op: p.op,
                    value,
                }),
                _ => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn automaton(&mut self, ast: &AutomatonAst) -> Option<TimedAutomaton> {
        let before = self.diags.len();

        let mut counters = Vec::new();
        for (name, max) in &ast.counters {
            if counters.iter().any(|c: &CounterDecl| c.name == name.text) {
                self.diags.push(Diagnostic::new(
                    DiagnosticKind::DuplicateName,
                    Some(name.pos),
                    format!("counter `{}` declared twice", name.text),
                ));
                continue;
            }
            if let Some(max) = self.constant(max) {
                counters.push(CounterDecl {
                    name: name.text.clone(),
                    max,
                });
            }
        }

        let mut state_names: Vec<&str> = Vec::new();
        for s in &ast.states {
            if state_names.contains(&s.name.text.as_str()) {
                self.diags.push(Diagnostic::new(
                    DiagnosticKind::DuplicateName,
                    Some(s.name.pos),
                    format!("state `{}` declared twice", s.name.text),
                ));
            }
            state_names.push(&s.name.text);
        }
        let initials: Vec<&StateAst> = ast.states.iter().filter(|s| s.initial).collect();
        if initials.len() > 1 {
            self.diags.push(Diagnostic::new(
                DiagnosticKind::DuplicateName,
                Some(initials[1].name.pos),
                "more than one state marked `initial`",
            ));
        }
        let initial = ast.states.iter().position(|s| s.initial).unwrap_or(0);

        let mut states = Vec::new();
        for s in &ast.states {
            let mut arms = Vec::new();
            let mut end_arms = Vec::new();
            for arm in &s.arms {
                let preds = self.preds(&counters, &arm.preds);
                if let ArmKind::AtEnd = arm.kind {
                    if let Some(counter_preds) = preds {
                        end_arms.push(EndArm {
                            counter_preds,
                            emit: arm.emit,
                            pos: Some(arm.pos),
                        });
                    }
                    continue;
                }
                let activities = match &arm.kind {
                    ArmKind::On(names) => {
                        let mut set = BTreeSet::new();
                        for n in names {
                            match self.vocab.label(&n.text) {
                                Some(x) => {
                                    set.insert(x);
                                }
                                None => self.diags.push(Diagnostic::new(
                                    DiagnosticKind::UnknownActivity,
                                    Some(n.pos),
                                    format!("unknown activity `{}`", n.text),
                                )),
                            }
                        }
                        ActivityMatch::Set(set)
                    }
                    _ => ActivityMatch::Otherwise,
                };
                let target_name = arm.target.as_ref().expect("non-end arms carry a target");
                let target = state_names.iter().position(|n| *n == target_name.text);
                if target.is_none() {
                    self.diags.push(Diagnostic::new(
                        DiagnosticKind::UnknownState,
                        Some(target_name.pos),
                        format!("unknown state `{}`", target_name.text),
                    ));
                }
                let mut actions = Vec::new();
                for act in &arm.actions {
                    let lowered = match act {
                        ActionAst::Inc(n) => self.counter(&counters, n).map(Action::Inc),
                        ActionAst::Reset(n) => self.counter(&counters, n).map(Action::Reset),
                        ActionAst::Set(n, v) => {
                            let c = self.counter(&counters, n);
                            let v = self.constant(v);
                            c.zip(v).map(|(c, v)| Action::Set(c, v))
                        }
                    };
                    actions.extend(lowered);
                }
                if let (Some(counter_preds), Some(target)) = (preds, target) {
                    arms.push(Transition {
                        guard: Guard {
                            activities,
                            counter_preds,
                        },
                        actions,
                        emit: arm.emit,
                        target,
                        pos: Some(arm.pos),
                    });
                }
            }
            states.push(StateDecl {
                name: s.name.text.clone(),
                arms,
                end_arms,
                pos: Some(s.name.pos),
            });
        }

        if self.diags.len() > before {
            return None;
        }
        Some(TimedAutomaton {
            event: EventType::new(ast.event.text.clone()),
            vocab: self.vocab.clone(),
            states,
            initial,
            counters,
            end_of_trace: ast.policy.map(|(p, _)| p).unwrap_or_default(),
            pos: Some(ast.event.pos),
        })
    }
}

/// Parses and validates a rule file.
///
/// On success returns the automata in source order together with any
/// warnings. On failure returns every diagnostic found (errors and
/// warnings), each positioned in the source where possible.
pub fn parse_rules(
    source: &str,
    vocab: &Vocabulary,
    window: WindowSpec,
) -> Result<ParsedRules, Vec<Diagnostic>> {
    let toks = lex(source).map_err(|d| vec![d])?;
    let asts = Parser { toks, i: 0 }.file().map_err(|d| vec![d])?;

    let mut lowering = Lowering {
        vocab,
        window,
        diags: Vec::new(),
    };
    let automata: Vec<TimedAutomaton> = asts.iter().filter_map(|a| lowering.automaton(a)).collect();
    let mut diags = lowering.diags;
    if diags.is_empty() {
        diags = validate_rule_set(&automata, vocab);
    }
    if diags.iter().any(Diagnostic::is_error) {
        return Err(diags);
    }
    Ok(ParsedRules {
        automata,
        warnings: diags,
    })
}
