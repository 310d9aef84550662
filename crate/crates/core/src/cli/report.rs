//! The analysis report: JSON is the source of truth, the CSV a projection.

use std::io::Write;

use serde::Serialize;

use crate::certificates::CheckReport;
use crate::simulator::TailEstimate;
use crate::tailbounds::{BoundInput, BoundResult};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SmapDiffBounded,
    SmapGeneral,
    CltLpf,
    UserCertificate,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LoopVerdict {
    #[serde(rename = "AST_certified")]
    AstCertified,
    #[serde(rename = "AST_certified_on_box")]
    AstCertifiedOnBox,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundSeries {
    pub input: BoundInput,
    pub values: Vec<BoundResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PostCheck {
    pub passed: bool,
    /// `k` values where the bound fell below the Wilson-95 lower limit.
    pub failures: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopEntry {
    pub loop_id: usize,
    pub line: usize,
    pub method: Method,
    pub certificate: Option<serde_json::Value>,
    pub delta: Option<String>,
    pub zeta: Option<String>,
    pub tail_class: &'static str,
    pub verdict: LoopVerdict,
    pub check: Option<CheckReport>,
    pub entry_valuation: Option<Vec<i64>>,
    pub bounds: Option<BoundSeries>,
    pub empirical: Option<Vec<TailEstimate>>,
    pub post_check: Option<PostCheck>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub schema: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub program_sha256: String,
    pub seed: u64,
    pub trials: u64,
    pub ks: Vec<u64>,
    pub init: Vec<(String, i64)>,
    pub loops: Vec<LoopEntry>,
}

impl AnalysisReport {
    /// Exit code ladder: 0 all symbolic, 2 some only on a box, 3 some unknown.
    pub fn exit_code(&self) -> i32 {
        if self.loops.iter().any(|l| l.verdict == LoopVerdict::Inconclusive) {
            3
        } else if self.loops.iter().any(|l| l.verdict == LoopVerdict::AstCertifiedOnBox) {
            2
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "loop_id,k,method,bound,bound_valid,empirical,wilson95_lo,wilson95_hi")?;
        for l in &self.loops {
            let method = serde_json::to_value(l.method).expect("method serializes");
            let method = method.as_str().unwrap_or_default();
            let mut ks: Vec<u64> = Vec::new();
            if let Some(b) = &l.bounds {
                ks.extend(b.values.iter().map(|r| r.k));
            }
            if let Some(e) = &l.empirical {
                ks.extend(e.iter().map(|r| r.k));
            }
            ks.sort_unstable();
            ks.dedup();
            for k in ks {
                let bound = l.bounds.as_ref().and_then(|b| b.values.iter().find(|r| r.k == k));
                let emp = l.empirical.as_ref().and_then(|e| e.iter().find(|r| r.k == k));
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    l.loop_id,
                    k,
                    method,
                    bound.map(|b| b.bound.to_string()).unwrap_or_default(),
                    bound.map(|b| b.valid.to_string()).unwrap_or_default(),
                    emp.map(|e| e.estimate.to_string()).unwrap_or_default(),
                    emp.map(|e| e.wilson95.0.to_string()).unwrap_or_default(),
                    emp.map(|e| e.wilson95.1.to_string()).unwrap_or_default(),
                )?;
            }
        }
        Ok(())
    }
}
