//! Certificate candidates and their checkers: supermartingale maps with
//! conditions D1 to D4 and linear progress functions with L1 to L3.

mod affine;
mod format;
mod lpf;
mod smap;

use std::fmt;

use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::dist::DistError;
use crate::lang::{isqrt, EvalError, SingleWhileLoop, ValueExpr};
use crate::lincons::LinError;
use crate::rational::{self, Rational};

pub use format::{Certificate, FormatError};
pub use lpf::check_lpf;
pub use smap::check_smap;

/// Box used when symbolic checking is out of scope and no box was given.
pub const DEFAULT_BOX: (i64, i64) = (-100, 100);
/// Upper limit on the number of valuations a bounded check enumerates.
pub const BOX_POINT_CAP: u64 = 20_000_000;
/// Branch-and-bound budget when searching for integer witnesses.
pub(crate) const WITNESS_NODES: usize = 200;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertError {
    #[error("certificate mentions `{0}`, which is not a program variable of the loop")]
    UnknownVariable(String),
    #[error("loop is not incremental: its body must be a sequence of updates `x := x + sum c*r`")]
    NotIncremental,
    #[error("coefficient vector has length {got}, the loop has {expected} program variables")]
    Dimension { expected: usize, got: usize },
    #[error("box must give one range per program variable ({expected}), got {got}")]
    BoxShape { expected: usize, got: usize },
    #[error("box has {0} valuations, above the cap of {BOX_POINT_CAP}")]
    BoxTooLarge(u128),
    #[error("scaling factor must be positive, got {0}")]
    NonPositiveScale(Rational),
    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(Rational),
    #[error("zeta must be positive, got {0}")]
    NonPositiveZeta(Rational),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Lin(#[from] LinError),
}

/// `h(in, pv)`; `h(out, .)` is identically zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupermartingaleMap {
    pub h: ValueExpr,
    pub delta: Rational,
    pub zeta: Option<Rational>,
}

impl SupermartingaleMap {
    pub fn new(h: ValueExpr, delta: Rational, zeta: Option<Rational>) -> Result<Self, CertError> {
        if !delta.is_positive() {
            return Err(CertError::NonPositiveDelta(delta));
        }
        if let Some(z) = &zeta {
            if !z.is_positive() {
                return Err(CertError::NonPositiveZeta(z.clone()));
            }
        }
        Ok(SupermartingaleMap { h, delta, zeta })
    }

    pub fn is_difference_bounded(&self) -> bool {
        self.zeta.is_some()
    }
}

/// `h(pv) = a . pv + c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinearProgressFunction {
    #[serde(with = "rational::serde_str::vec")]
    pub a: Vec<Rational>,
    #[serde(with = "rational::serde_str")]
    pub c: Rational,
}

impl LinearProgressFunction {
    pub fn eval(&self, pv: &[i64]) -> Rational {
        self.a.iter().zip(pv).map(|(a, x)| a * rational::int(*x)).sum::<Rational>() + &self.c
    }
}

/// `h -> lambda h`, `delta -> lambda delta`, `zeta -> lambda zeta`.
pub fn scale_certificate(cand: &SupermartingaleMap, lambda: &Rational) -> Result<SupermartingaleMap, CertError> {
    if !lambda.is_positive() {
        return Err(CertError::NonPositiveScale(lambda.clone()));
    }
    let scale = |m: &std::collections::BTreeMap<String, Rational>| m.iter().map(|(k, v)| (k.clone(), v * lambda)).collect();
    Ok(SupermartingaleMap {
        h: ValueExpr {
            constant: &cand.h.constant * lambda,
            linear: scale(&cand.h.linear),
            isqrt: scale(&cand.h.isqrt),
        },
        delta: &cand.delta * lambda,
        zeta: cand.zeta.as_ref().map(|z| z * lambda),
    })
}

/// A value expression resolved against the loop's program variables.
#[derive(Debug, Clone)]
pub struct ResolvedExpr {
    pub linear: Vec<Rational>,
    pub isqrt: Vec<Rational>,
    pub constant: Rational,
}

impl ResolvedExpr {
    pub fn new(e: &ValueExpr, pvars: &[String]) -> Result<Self, CertError> {
        let index = |name: &String| pvars.iter().position(|p| p == name).ok_or_else(|| CertError::UnknownVariable(name.clone()));
        let mut linear = vec![Rational::zero(); pvars.len()];
        let mut sq = vec![Rational::zero(); pvars.len()];
        for (name, q) in &e.linear {
            linear[index(name)?] = q.clone();
        }
        for (name, q) in &e.isqrt {
            sq[index(name)?] = q.clone();
        }
        Ok(ResolvedExpr { linear, isqrt: sq, constant: e.constant.clone() })
    }

    pub fn is_affine(&self) -> bool {
        self.isqrt.iter().all(Zero::is_zero)
    }

    pub fn eval(&self, pv: &[i64]) -> Rational {
        let mut v = self.constant.clone();
        for (i, x) in pv.iter().enumerate() {
            if !self.linear[i].is_zero() {
                v += &self.linear[i] * rational::int(*x);
            }
            if !self.isqrt[i].is_zero() {
                v += &self.isqrt[i] * rational::int(isqrt(*x));
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    D1,
    D2i,
    D2ii,
    D31,
    D32,
    D4,
    L1,
    L2,
    L3,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match self {
            Condition::D1 => "D1",
            Condition::D2i => "D2(i)",
            Condition::D2ii => "D2(ii)",
            Condition::D31 => "D3.1",
            Condition::D32 => "D3.2",
            Condition::D4 => "D4",
            Condition::L1 => "L1",
            Condition::L2 => "L2",
            Condition::L3 => "L3",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for Condition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    Violated,
    Unknown,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionStatus {
    pub condition: Condition,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A concrete violation: a valuation satisfying the guard and, for
/// conditions quantified over samples, the offending sample vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub condition: Condition,
    pub pv: Option<Vec<i64>>,
    pub rv: Option<Vec<i64>>,
    pub detail: String,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated", self.condition)?;
        if let Some(pv) = &self.pv {
            write!(f, " at pv = {pv:?}")?;
        }
        if let Some(rv) = &self.rv {
            write!(f, ", rv = {rv:?}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Symbolic,
    Bounded { ranges: Vec<(i64, i64)> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    CertifiedOnBox,
    Refuted,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub mode: Mode,
    pub conditions: Vec<ConditionStatus>,
    pub witnesses: Vec<Witness>,
    pub notices: Vec<String>,
}

impl CheckReport {
    pub(crate) fn assemble(mode: Mode, conditions: Vec<ConditionStatus>, witnesses: Vec<Witness>, notices: Vec<String>) -> Self {
        let unknown: Vec<String> = conditions
            .iter()
            .filter(|c| c.status == Status::Unknown)
            .map(|c| match &c.note {
                Some(n) => format!("{}: {n}", c.condition),
                None => c.condition.to_string(),
            })
            .collect();
        let (verdict, reason) = if conditions.iter().any(|c| c.status == Status::Violated) {
            (Verdict::Refuted, None)
        } else if !unknown.is_empty() {
            (Verdict::Inconclusive, Some(unknown.join("; ")))
        } else if mode == Mode::Symbolic {
            (Verdict::Certified, None)
        } else {
            (Verdict::CertifiedOnBox, None)
        };
        CheckReport { verdict, reason, mode, conditions, witnesses, notices }
    }

    pub fn status(&self, c: Condition) -> Option<&Status> {
        self.conditions.iter().find(|s| s.condition == c).map(|s| &s.status)
    }

    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

/// Where a check quantifies over valuations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Domain {
    /// All valuations, symbolically; out-of-scope inputs fall back to
    /// [`DEFAULT_BOX`] with a notice.
    Symbolic,
    Box(BoxDomain),
}

/// Inclusive integer ranges, one per program variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxDomain {
    pub ranges: Vec<(i64, i64)>,
}

impl BoxDomain {
    pub fn uniform(dim: usize, lo: i64, hi: i64) -> Self {
        BoxDomain { ranges: vec![(lo, hi); dim] }
    }

    pub fn size(&self) -> u128 {
        self.ranges
            .iter()
            .map(|(lo, hi)| if hi < lo { 0 } else { (*hi as i128 - *lo as i128 + 1) as u128 })
            .fold(1u128, |a, b| a.saturating_mul(b))
    }

    pub(crate) fn validate(&self, dim: usize) -> Result<(), CertError> {
        if self.ranges.len() != dim {
            return Err(CertError::BoxShape { expected: dim, got: self.ranges.len() });
        }
        let n = self.size();
        if n > BOX_POINT_CAP as u128 {
            return Err(CertError::BoxTooLarge(n));
        }
        Ok(())
    }

    /// Valuations in lexicographic order (last variable fastest).
    pub fn points(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        let empty = self.ranges.iter().any(|(lo, hi)| hi < lo);
        let mut cur: Option<Vec<i64>> = if empty { None } else { Some(self.ranges.iter().map(|r| r.0).collect()) };
        std::iter::from_fn(move || {
            let out = cur.clone()?;
            let mut next = out.clone();
            let mut i = next.len();
            loop {
                if i == 0 {
                    cur = None;
                    break;
                }
                i -= 1;
                if next[i] < self.ranges[i].1 {
                    next[i] += 1;
                    cur = Some(next);
                    break;
                }
                next[i] = self.ranges[i].0;
            }
            Some(out)
        })
    }
}

/// Re-evaluates a refutation witness and reports whether it is a genuine
/// violation of its condition.
pub fn replay_witness(l: &SingleWhileLoop, cert: &Certificate, w: &Witness) -> Result<bool, CertError> {
    match cert {
        Certificate::Smap(m) => smap::replay(l, m, w),
        Certificate::Lpf(f) => lpf::replay(l, f, w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_points_in_order() {
        let b = BoxDomain { ranges: vec![(0, 1), (5, 6)] };
        let pts: Vec<_> = b.points().collect();
        assert_eq!(pts, vec![vec![0, 5], vec![0, 6], vec![1, 5], vec![1, 6]]);
        assert_eq!(BoxDomain { ranges: vec![(1, 0)] }.points().count(), 0);
        assert_eq!(BoxDomain { ranges: vec![] }.points().count(), 1);
    }
}
