//! Case records and suite reports, written as line-delimited JSON.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

/// One checked case.
#[derive(Clone, Debug, Serialize)]
pub struct CaseRecord {
    pub suite: String,
    pub case: String,
    /// Includes `seed` for randomized cases and `mode` (`asserted` or `exploratory`).
    pub inputs: Value,
    pub expected: String,
    pub got: String,
    pub pass: bool,
    /// Precision at which the comparison was made.
    pub prec: i64,
}

impl CaseRecord {
    pub fn asserted(&self) -> bool {
        self.inputs.get("mode").and_then(Value::as_str) != Some("exploratory")
    }
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: String,
    pub config_digest: String,
    pub cases: Vec<CaseRecord>,
    pub wall_ms: u128,
}

impl SuiteReport {
    /// All asserted cases pass; exploratory cases are informational.
    pub fn pass(&self) -> bool {
        self.cases.iter().filter(|c| c.asserted()).all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseRecord> {
        self.cases.iter().filter(|c| c.asserted() && !c.pass)
    }

    pub fn asserted_count(&self) -> usize {
        self.cases.iter().filter(|c| c.asserted()).count()
    }

    pub fn summary(&self) -> Value {
        json!({
            "suite": self.suite,
            "summary": true,
            "config_digest": self.config_digest,
            "cases": self.cases.len(),
            "asserted": self.asserted_count(),
            "failures": self.failures().count(),
            "wall_ms": self.wall_ms as u64,
            "pass": self.pass(),
        })
    }

    /// Case records followed by the summary object.
    pub fn write_jsonl<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for case in &self.cases {
            serde_json::to_writer(&mut *out, case)?;
            out.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut *out, &self.summary())?;
        out.write_all(b"\n")
    }
}
