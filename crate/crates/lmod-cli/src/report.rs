//! Command reports: one outcome, ordered detail fields, and an optional
//! replayable witness, rendered either as text or as JSON with identical
//! content.

use std::time::Duration;

use serde_json::{json, Map, Value};

/// What a command concluded.  `Pass`/`Fail` are for checks and verifications
/// (exit codes 0 and 1); `Value` is for queries and constructions, which
/// succeed by producing output (exit code 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Value,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Value => "value",
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Pass | Outcome::Value => 0,
            Outcome::Fail => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    /// The invocation, argv re-quoted, with the binary path shortened.
    pub command: String,
    pub outcome: Outcome,
    /// Ordered key/value payload; keys are kebab-case.
    pub details: Vec<(String, Value)>,
    /// A counterexample precise enough to replay through the relevant
    /// command; present exactly when the outcome is `Fail`.
    pub witness: Option<Value>,
    pub elapsed: Duration,
}

impl Report {
    pub fn new(command: String, outcome: Outcome) -> Self {
        Report {
            command,
            outcome,
            details: Vec::new(),
            witness: None,
            elapsed: Duration::ZERO,
        }
    }

    pub fn detail(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.details.push((key.to_string(), value.into()));
        self
    }

    pub fn witness(mut self, w: Value) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn to_json(&self) -> Value {
        let mut details = Map::new();
        for (k, v) in &self.details {
            details.insert(k.clone(), v.clone());
        }
        let mut out = Map::new();
        out.insert("command".into(), json!(self.command));
        out.insert("outcome".into(), json!(self.outcome.as_str()));
        out.insert("details".into(), Value::Object(details));
        if let Some(w) = &self.witness {
            out.insert("witness".into(), w.clone());
        }
        out.insert("elapsed-ms".into(), json!(self.elapsed.as_millis() as u64));
        Value::Object(out)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        push_field(&mut out, "command", &json!(self.command));
        push_field(&mut out, "outcome", &json!(self.outcome.as_str()));
        for (k, v) in &self.details {
            push_field(&mut out, k, v);
        }
        if let Some(w) = &self.witness {
            push_field(&mut out, "witness", w);
        }
        push_field(&mut out, "elapsed-ms", &json!(self.elapsed.as_millis() as u64));
        out
    }
}

/// Scalars render inline; multi-line strings as indented blocks; compound
/// values as indented pretty JSON.
fn push_field(out: &mut String, key: &str, value: &Value) {
    match value {
        Value::String(s) if s.contains('\n') => {
            out.push_str(key);
            out.push_str(":\n");
            for line in s.lines() {
                out.push_str("  ");
                out.push_str(line);
                out.push('\n');
            }
        }
        Value::String(s) => {
            out.push_str(key);
            out.push_str(": ");
            out.push_str(s);
            out.push('\n');
        }
        Value::Null | Value::Bool(_) | Value::Number(_) => {
            out.push_str(key);
            out.push_str(": ");
            out.push_str(&value.to_string());
            out.push('\n');
        }
        compound => {
            let pretty = serde_json::to_string_pretty(compound).expect("valid JSON");
            if pretty.contains('\n') {
                out.push_str(key);
                out.push_str(":\n");
                for line in pretty.lines() {
                    out.push_str("  ");
                    out.push_str(line);
                    out.push('\n');
                }
            } else {
                out.push_str(key);
                out.push_str(": ");
                out.push_str(&pretty);
                out.push('\n');
            }
        }
    }
}
