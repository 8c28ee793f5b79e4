//! JSON-Lines file formats for traces and predictions.
//!
//! One object per line. Writers emit fields in a fixed order so output bytes
//! depend only on content:
//!
//! ```text
//! {"id":"trace-000000","window_s":5,"activities":["walk",...],"soft":[[...],...],"labels":[[],["e1"],...],"seed":123}
//! {"id":"trace-000000","labels":[[],["e1"],...],"per_window_latency_ns":[...]}
//! ```
//!
//! `soft`, `labels`, `seed` and `per_window_latency_ns` are optional.
//! Readers stream record by record and skip blank lines.

use std::io::{BufRead, Write};
use std::marker::PhantomData;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::engine::DetectorOutput;
use crate::metrics::Prediction;
use crate::types::{
    is_token, ActivityDistribution, CELabelSeq, EventType, LabelSet, Trace, Vocabulary, WindowSpec,
};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: invalid JSON: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: field `{field}`: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },
}

impl IoError {
    fn schema(line: usize, field: &str, message: impl Into<String>) -> Self {
        IoError::Schema {
            line,
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// A line-oriented record type.
pub trait Record: Sized {
    /// Builds a record from a parsed JSON object; `line` is for errors.
    fn from_object(obj: Map<String, Value>, line: usize) -> Result<Self, IoError>;
}

/// File form of a [`Trace`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub id: String,
    pub window_s: u32,
    pub activities: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub soft: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// File form of a detector's output for one trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredictionRecord {
    pub id: String,
    pub labels: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_window_latency_ns: Option<Vec<u64>>,
}

fn field<T: DeserializeOwned>(
    obj: &mut Map<String, Value>,
    name: &str,
    line: usize,
) -> Result<Option<T>, IoError> {
    match obj.remove(name) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v)
            .map(Some)
            .map_err(|e| IoError::schema(line, name, e.to_string())),
    }
}

fn required<T: DeserializeOwned>(
    obj: &mut Map<String, Value>,
    name: &str,
    line: usize,
) -> Result<T, IoError> {
    field(obj, name, line)?.ok_or_else(|| IoError::schema(line, name, "missing"))
}

fn no_extra(obj: &Map<String, Value>, line: usize) -> Result<(), IoError> {
    match obj.keys().next() {
        Some(k) => Err(IoError::schema(line, k, "unknown field")),
        None => Ok(()),
    }
}

fn check_labels(labels: &[Vec<String>], line: usize) -> Result<(), IoError> {
    for (t, set) in labels.iter().enumerate() {
        if let Some(bad) = set.iter().find(|e| !is_token(e)) {
            return Err(IoError::schema(
                line,
                "labels",
                format!("window {t}: `{bad}` is not a valid event token"),
            ));
        }
    }
    Ok(())
}

impl Record for TraceRecord {
    fn from_object(mut obj: Map<String, Value>, line: usize) -> Result<Self, IoError> {
        let r = Self {
            id: required(&mut obj, "id", line)?,
            window_s: required(&mut obj, "window_s", line)?,
            activities: required(&mut obj, "activities", line)?,
            soft: field(&mut obj, "soft", line)?,
            labels: field(&mut obj, "labels", line)?,
            seed: field(&mut obj, "seed", line)?,
        };
        no_extra(&obj, line)?;
        let n = r.activities.len();
        if let Some(soft) = &r.soft {
            if soft.len() != n {
                return Err(IoError::schema(
                    line,
                    "soft",
                    format!("{} windows, activities has {n}", soft.len()),
                ));
            }
        }
        if let Some(labels) = &r.labels {
            if labels.len() != n {
                return Err(IoError::schema(
                    line,
                    "labels",
                    format!("{} windows, activities has {n}", labels.len()),
                ));
            }
            check_labels(labels, line)?;
        }
        Ok(r)
    }
}

impl Record for PredictionRecord {
    fn from_object(mut obj: Map<String, Value>, line: usize) -> Result<Self, IoError> {
        let r = Self {
            id: required(&mut obj, "id", line)?,
            labels: required(&mut obj, "labels", line)?,
            per_window_latency_ns: field(&mut obj, "per_window_latency_ns", line)?,
        };
        no_extra(&obj, line)?;
        check_labels(&r.labels, line)?;
        Ok(r)
    }
}

fn labels_to_record(seq: &CELabelSeq) -> Vec<Vec<String>> {
    seq.windows()
        .iter()
        .map(|s| s.iter().map(|e| e.as_str().to_string()).collect())
        .collect()
}

fn labels_from_record(labels: &[Vec<String>]) -> CELabelSeq {
    CELabelSeq(
        labels
            .iter()
            .map(|s| {
                s.iter()
                    .map(|e| EventType::new(e.as_str()))
                    .collect::<LabelSet>()
            })
            .collect(),
    )
}

impl TraceRecord {
    pub fn from_trace(t: &Trace, vocab: &Vocabulary) -> Self {
        Self {
            id: t.id.clone(),
            window_s: t.window.seconds(),
            activities: t
                .activities
                .iter()
                .map(|&x| {
                    vocab
                        .name(x)
                        .expect("activity within vocabulary")
                        .to_string()
                })
                .collect(),
            soft: t
                .soft
                .as_ref()
                .map(|s| s.iter().map(|d| d.probs().to_vec()).collect()),
            labels: t.labels.as_ref().map(labels_to_record),
            seed: t.seed,
        }
    }

    /// Resolves tokens against `vocab`. `line` is used in errors.
    pub fn to_trace(&self, vocab: &Vocabulary, line: usize) -> Result<Trace, IoError> {
        let window = WindowSpec::new(self.window_s)
            .map_err(|e| IoError::schema(line, "window_s", e.to_string()))?;
        let activities = self
            .activities
            .iter()
            .enumerate()
            .map(|(t, a)| {
                vocab.label(a).ok_or_else(|| {
                    IoError::schema(
                        line,
                        "activities",
                        format!("window {t}: unknown activity `{a}`"),
                    )
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let soft = match &self.soft {
            None => None,
            Some(s) => Some(
                s.iter()
                    .enumerate()
                    .map(|(t, p)| {
                        ActivityDistribution::for_vocab(p.clone(), vocab)
                            .map_err(|e| IoError::schema(line, "soft", format!("window {t}: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };
        Trace::new(
            self.id.clone(),
            window,
            activities,
            soft,
            self.labels.as_deref().map(labels_from_record),
            self.seed,
        )
        .map_err(|e| IoError::schema(line, "labels", e.to_string()))
    }
}

impl PredictionRecord {
    pub fn from_output(id: &str, out: &DetectorOutput) -> Self {
        Self {
            id: id.to_string(),
            labels: labels_to_record(&out.labels),
            per_window_latency_ns: out.per_window_latency_ns.clone(),
        }
    }

    pub fn to_prediction(&self) -> Prediction {
        Prediction::new(self.id.clone(), labels_from_record(&self.labels))
    }
}

/// Streaming reader yielding one record per non-blank line.
pub struct JsonlReader<R, T> {
    inner: R,
    line: usize,
    buf: String,
    _record: PhantomData<T>,
}

impl<R: BufRead, T: Record> JsonlReader<R, T> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            line: 0,
            buf: String::new(),
            _record: PhantomData,
        }
    }

    /// 1-based number of the line most recently read.
    pub fn line(&self) -> usize {
        self.line
    }

    fn parse(&self) -> Result<T, IoError> {
        let line = self.line;
        match serde_json::from_str::<Value>(&self.buf) {
            Ok(Value::Object(obj)) => T::from_object(obj, line),
            Ok(_) => Err(IoError::Parse {
                line,
                message: "expected a JSON object".into(),
            }),
            Err(e) => Err(IoError::Parse {
                line,
                message: e.to_string(),
            }),
        }
    }
}

impl<R: BufRead, T: Record> Iterator for JsonlReader<R, T> {
    type Item = Result<T, IoError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => self.line += 1,
                Err(e) => return Some(Err(e.into())),
            }
            if !self.buf.trim().is_empty() {
                return Some(self.parse());
            }
        }
    }
}

/// Writes one compact JSON object per line.
pub struct JsonlWriter<W> {
    inner: W,
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<(), IoError> {
        serde_json::to_writer(&mut self.inner, record).map_err(std::io::Error::from)?;
        self.inner.write_all(b"\n")?;
        Ok(())
    }

    pub fn into_inner(mut self) -> Result<W, IoError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Reads every trace in `reader`, resolving tokens with `vocab`.
pub fn read_traces<R: BufRead>(reader: R, vocab: &Vocabulary) -> Result<Vec<Trace>, IoError> {
    let mut rd = JsonlReader::<R, TraceRecord>::new(reader);
    let mut out = Vec::new();
    while let Some(r) = rd.next() {
        out.push(r?.to_trace(vocab, rd.line())?);
    }
    Ok(out)
}

pub fn write_traces<W: Write>(
    writer: W,
    traces: &[Trace],
    vocab: &Vocabulary,
) -> Result<W, IoError> {
    let mut w = JsonlWriter::new(writer);
    for t in traces {
        w.write(&TraceRecord::from_trace(t, vocab))?;
    }
    w.into_inner()
}

pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<PredictionRecord>, IoError> {
    JsonlReader::<R, PredictionRecord>::new(reader).collect()
}
