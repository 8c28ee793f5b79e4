use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ced_core::engine::DetectMode;
use ced_core::io::{read_predictions, JsonlReader, JsonlWriter, PredictionRecord, TraceRecord};
use ced_core::metrics::{evaluate_with, EvalOptions, F1Aggregation, F1Summary, Prediction};
use ced_core::par::{with_workers, Exec};
use ced_core::ruledsl::{print_rules, RuleError};
use ced_core::simgen::{corrupt, generate_with, splitmix64, substream_seed, NoiseModel, SimConfig};
use ced_core::{
    bench_latency, builtin_rules, parse_rules, CELabelSeq, Detector, Oracle, SoftMode,
    TimedAutomaton, Trace, Vocabulary, WindowSpec,
};

use crate::span::parse_span;
use crate::{Command, Failure};

// Records processed per parallel batch when streaming a file.
const CHUNK: usize = 1024;

// Mixed into the seed for the noise streams ("noise" in ASCII).
const NOISE_TAG: u64 = 0x006e_6f69_7365;

pub fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Validate {
            rules,
            window_s,
            print,
        } => validate(&rules.rules, window_s, print),
        Command::Gen {
            config,
            rules,
            n,
            span,
            seed,
            out,
            noise,
            stretch,
            workers,
        } => with_workers(workers.workers, || {
            gen(GenArgs {
                config: config.as_deref(),
                rules: &rules.rules,
                n,
                span: &span,
                seed,
                out: &out,
                noise,
                stretch,
            })
        }),
        Command::Label {
            rules,
            input,
            out,
            workers,
        } => with_workers(workers.workers, || label(&rules.rules, &input, &out)),
        Command::Detect {
            rules,
            mode,
            input,
            out,
            timing,
            workers,
        } => with_workers(workers.workers, || {
            detect(&rules.rules, &mode, &input, &out, timing)
        }),
        Command::Eval {
            pred,
            truth,
            report,
            per_sample,
        } => eval(&pred, &truth, &report, per_sample),
        Command::Bench {
            rules,
            span,
            trials,
            seed,
            crisp_p99_us,
            belief_p99_us,
            report,
        } => bench(
            &rules.rules,
            &span,
            trials,
            seed,
            (crisp_p99_us, belief_p99_us),
            report.as_deref(),
        ),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

struct Rules {
    automata: Vec<TimedAutomaton>,
    /// Same automata as the built-in rule set.
    builtin: bool,
}

/// Loads `arg` (a path, or `builtin`) compiled for `window`, printing any
/// diagnostics to stderr.
fn load_rules(arg: &str, window: WindowSpec) -> Result<Rules, Failure> {
    let builtin = builtin_rules(window);
    if arg == "builtin" {
        return match builtin {
            Ok(automata) => Ok(Rules {
                automata,
                builtin: true,
            }),
            Err(e) => Err(rule_failure("builtin", e)),
        };
    }
    let path = Path::new(arg);
    let source = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    match parse_rules(&source, &Vocabulary::default(), window) {
        Ok(parsed) => {
            for w in &parsed.warnings {
                eprintln!("{}", w.render(arg));
            }
            let same = builtin
                .map(|b| print_rules(&b) == print_rules(&parsed.automata))
                .unwrap_or(false);
            Ok(Rules {
                automata: parsed.automata,
                builtin: same,
            })
        }
        Err(diags) => {
            for d in &diags {
                eprintln!("{}", d.render(arg));
            }
            let errors = diags.iter().filter(|d| d.is_error()).count();
            Err(Failure::Check(format!("{arg}: {errors} error(s)")))
        }
    }
}

fn rule_failure(file: &str, e: RuleError) -> Failure {
    match e {
        RuleError::Invalid(diags) => {
            for d in &diags {
                eprintln!("{}", d.render(file));
            }
            Failure::Check(format!("{file}: rules failed validation"))
        }
        RuleError::NonDivisible(e) => Failure::Check(format!("{file}: {e}")),
    }
}

fn detector(rules: Vec<TimedAutomaton>) -> Result<Detector, Failure> {
    Detector::new(rules).map_err(|e| Failure::Check(e.to_string()))
}

fn validate(arg: &str, window_s: u32, print: bool) -> Result<(), Failure> {
    let window = WindowSpec::new(window_s).map_err(|e| Failure::Usage(e.to_string()))?;
    let rules = load_rules(arg, window)?;
    if print {
        print!("{}", print_rules(&rules.automata));
    } else {
        println!("{arg}: ok ({} automata)", rules.automata.len());
    }
    Ok(())
}

/// Ground-truth labeler: the reference scans for the built-in rules, the
/// engine for anything else.
enum Labeler {
    Oracle(Oracle),
    Engine(Detector),
}

impl Labeler {
    fn new(arg: &str, window: WindowSpec) -> Result<Self, Failure> {
        let rules = load_rules(arg, window)?;
        if rules.builtin {
            let o = Oracle::new(&Vocabulary::default(), window)
                .map_err(|e| Failure::Check(e.to_string()))?;
            Ok(Labeler::Oracle(o))
        } else {
            Ok(Labeler::Engine(detector(rules.automata)?))
        }
    }

    fn label(&self, t: &Trace) -> CELabelSeq {
        match self {
            Labeler::Oracle(o) => o.all(&t.activities),
            Labeler::Engine(d) => d.run_crisp(&t.activities).expect("validated rules").labels,
        }
    }
}

struct GenArgs<'a> {
    config: Option<&'a Path>,
    rules: &'a str,
    n: usize,
    span: &'a str,
    seed: u64,
    out: &'a Path,
    noise: Option<f64>,
    stretch: bool,
}

fn gen(a: GenArgs) -> Result<(), Failure> {
    let mut cfg = match a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            SimConfig::from_toml(&text)
                .map_err(|e| Failure::Check(format!("{}: {e}", path.display())))?
        }
        None => SimConfig::default(),
    };
    let window = cfg.window().map_err(|e| Failure::Check(e.to_string()))?;
    let span = parse_span(a.span, window).map_err(Failure::Usage)?;
    cfg.seed = a.seed;
    let cfg = if a.stretch {
        cfg.stretched_to(span)
    } else {
        SimConfig {
            span_windows: span,
            ..cfg
        }
    };
    let noise = a
        .noise
        .map(NoiseModel::symmetric)
        .transpose()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let labeler = Labeler::new(a.rules, window)?;

    let mut traces = generate_with(&cfg, a.n, "trace", Exec::default())
        .map_err(|e| Failure::Check(e.to_string()))?;
    let exec = Exec::default();
    if let Labeler::Engine(_) = labeler {
        let labels = exec.map_slice(&traces, |t| labeler.label(t));
        for (t, l) in traces.iter_mut().zip(labels) {
            t.labels = Some(l);
        }
    }
    if let Some(nm) = noise {
        let base = splitmix64(a.seed ^ NOISE_TAG);
        traces = exec.map_range(traces.len(), |i| {
            corrupt(&traces[i], &nm, substream_seed(base, i as u64))
        });
    }
    let vocab = Vocabulary::default();
    let w = ced_core::io::write_traces(create(a.out)?, &traces, &vocab)
        .map_err(|e| io_err(a.out, e))?;
    finish_writer(w, a.out)
}

fn finish_writer<W: Write>(mut w: W, path: &Path) -> Result<(), Failure> {
    w.flush().map_err(|e| io_err(path, e))
}

/// Streams `input` in chunks, maps each chunk in parallel and writes the
/// results in input order.
fn map_traces<R, F>(input: &Path, out: &Path, mut f: F) -> Result<usize, Failure>
where
    R: serde::Serialize + Send,
    F: FnMut(&[Trace]) -> Result<Vec<R>, Failure>,
{
    let vocab = Vocabulary::default();
    let mut reader = JsonlReader::<_, TraceRecord>::new(open(input)?);
    let mut writer = JsonlWriter::new(create(out)?);
    let mut chunk = Vec::with_capacity(CHUNK);
    let mut total = 0;
    loop {
        chunk.clear();
        while chunk.len() < CHUNK {
            match reader.next() {
                None => break,
                Some(r) => {
                    let rec = r.map_err(|e| io_err(input, e))?;
                    let t = rec
                        .to_trace(&vocab, reader.line())
                        .map_err(|e| io_err(input, e))?;
                    chunk.push(t);
                }
            }
        }
        if chunk.is_empty() {
            break;
        }
        for r in f(&chunk)? {
            writer.write(&r).map_err(|e| io_err(out, e))?;
        }
        total += chunk.len();
        if chunk.len() < CHUNK {
            break;
        }
    }
    let w = writer.into_inner().map_err(|e| io_err(out, e))?;
    finish_writer(w, out)?;
    Ok(total)
}

/// Compiled per window length, built on first use.
struct PerWindow<T> {
    make: Box<dyn Fn(WindowSpec) -> Result<T, Failure>>,
    cache: HashMap<u32, T>,
}

impl<T> PerWindow<T> {
    fn new(make: impl Fn(WindowSpec) -> Result<T, Failure> + 'static) -> Self {
        Self {
            make: Box::new(make),
            cache: HashMap::new(),
        }
    }

    /// Builds whatever `traces` need and returns the cache, keyed by
    /// window seconds.
    fn prepare(&mut self, traces: &[Trace]) -> Result<&HashMap<u32, T>, Failure> {
        for t in traces {
            let s = t.window.seconds();
            if !self.cache.contains_key(&s) {
                let v = (self.make)(t.window)?;
                self.cache.insert(s, v);
            }
        }
        Ok(&self.cache)
    }
}

fn label(rules: &str, input: &Path, out: &Path) -> Result<(), Failure> {
    let vocab = Vocabulary::default();
    let arg = rules.to_string();
    let mut labelers = PerWindow::new(move |w| Labeler::new(&arg, w));
    map_traces(input, out, |chunk| {
        let l = labelers.prepare(chunk)?;
        let labeled = Exec::default().map_slice(chunk, |t| {
            let labels = l[&t.window.seconds()].label(t);
            TraceRecord::from_trace(
                &Trace {
                    labels: Some(labels),
                    ..t.clone()
                },
                &vocab,
            )
        });
        Ok(labeled)
    })?;
    Ok(())
}

fn parse_mode(mode: &str) -> Result<DetectMode, Failure> {
    let bad = || {
        Failure::Usage(format!(
            "invalid mode `{mode}`: expected crisp, argmax or belief:<threshold>"
        ))
    };
    match mode {
        "crisp" => Ok(DetectMode::Crisp),
        "argmax" => Ok(DetectMode::Soft(SoftMode::Argmax)),
        "belief" => Ok(DetectMode::Soft(SoftMode::belief())),
        _ => {
            let t = mode.strip_prefix("belief:").ok_or_else(bad)?;
            let threshold: f64 = t.parse().map_err(|_| bad())?;
            if !(threshold > 0.0 && threshold <= 1.0) {
                return Err(Failure::Usage(format!(
                    "belief threshold must be in (0, 1], got {threshold}"
                )));
            }
            Ok(DetectMode::Soft(SoftMode::Belief { threshold }))
        }
    }
}

fn detect(rules: &str, mode: &str, input: &Path, out: &Path, timing: bool) -> Result<(), Failure> {
    let mode = parse_mode(mode)?;
    let arg = rules.to_string();
    let mut detectors = PerWindow::new(move |w| detector(load_rules(&arg, w)?.automata));
    map_traces(input, out, |chunk| {
        let d = detectors.prepare(chunk)?;
        Exec::default()
            .try_map_slice(chunk, |t| {
                d[&t.window.seconds()]
                    .run_trace(t, mode, timing)
                    .map(|o| PredictionRecord::from_output(&t.id, &o))
            })
            .map_err(|e| Failure::Check(e.to_string()))
    })?;
    Ok(())
}

fn eval(pred: &Path, truth: &Path, report: &Path, per_sample: bool) -> Result<(), Failure> {
    let preds: Vec<Prediction> = read_predictions(open(pred)?)
        .map_err(|e| io_err(pred, e))?
        .iter()
        .map(PredictionRecord::to_prediction)
        .collect();
    let mut truths = Vec::new();
    let mut reader = JsonlReader::<_, TraceRecord>::new(open(truth)?);
    while let Some(r) = reader.next() {
        let rec = r.map_err(|e| io_err(truth, e))?;
        let labels = rec.labels.ok_or_else(|| {
            Failure::Check(format!(
                "{}: line {}: trace `{}` has no labels",
                truth.display(),
                reader.line(),
                rec.id
            ))
        })?;
        let p = PredictionRecord {
            id: rec.id,
            labels,
            per_window_latency_ns: None,
        };
        truths.push(p.to_prediction());
    }
    let opts = EvalOptions {
        aggregation: if per_sample {
            F1Aggregation::PerSample
        } else {
            F1Aggregation::Micro
        },
        event_types: None,
    };
    let r = evaluate_with(&preds, &truths, &opts).map_err(|e| Failure::Check(e.to_string()))?;
    let mut w = create(report)?;
    serde_json::to_writer_pretty(&mut w, &r).map_err(|e| io_err(report, e))?;
    w.write_all(b"\n").map_err(|e| io_err(report, e))?;
    finish_writer(w, report)?;

    let fmt = |s: &F1Summary| {
        let per: Vec<String> = s
            .per_type
            .iter()
            .map(|(e, v)| format!("{e}={}", opt(*v)))
            .collect();
        format!("avg={} [{}]", opt(s.average), per.join(" "))
    };
    println!(
        "samples={} length_accuracy={:.4} conditional_f1 {} coarse_f1 {}",
        r.n_samples,
        r.length_accuracy,
        fmt(&r.conditional_f1),
        fmt(&r.coarse_f1)
    );
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}"))
        .unwrap_or_else(|| "undefined".into())
}

fn bench(
    rules: &str,
    span: &str,
    trials: usize,
    seed: u64,
    (crisp_limit_us, belief_limit_us): (f64, f64),
    report: Option<&Path>,
) -> Result<(), Failure> {
    let window = WindowSpec::default();
    let span = parse_span(span, window).map_err(Failure::Usage)?;
    if trials == 0 {
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    let rules = load_rules(rules, window)?;
    let r = bench_latency(&rules.automata, span, trials, seed)
        .map_err(|e| Failure::Check(e.to_string()))?;
    let json = serde_json::to_string_pretty(&r).expect("report serializes");
    // a closed stdout (e.g. piped into `head`) is not an error
    let _ = writeln!(std::io::stdout(), "{json}");
    if let Some(path) = report {
        std::fs::write(path, format!("{json}\n")).map_err(|e| io_err(path, e))?;
    }
    let crisp_us = r.crisp.p99_ns as f64 / 1e3;
    let belief_us = r.belief.p99_ns as f64 / 1e3;
    let mut over = Vec::new();
    if crisp_us > crisp_limit_us {
        over.push(format!(
            "crisp p99 {crisp_us:.2}us exceeds {crisp_limit_us}us"
        ));
    }
    if belief_us > belief_limit_us {
        over.push(format!(
            "belief p99 {belief_us:.2}us exceeds {belief_limit_us}us"
        ));
    }
    if over.is_empty() {
        eprintln!("latency ok: crisp p99 {crisp_us:.2}us, belief p99 {belief_us:.2}us");
        Ok(())
    } else {
        Err(Failure::Check(over.join("; ")))
    }
}
