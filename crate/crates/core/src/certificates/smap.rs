use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use super::affine::{self, Outcome};
use super::{
    BoxDomain, CertError, CheckReport, Condition, ConditionStatus, Domain, Mode, ResolvedExpr, Status, SupermartingaleMap,
    Witness, DEFAULT_BOX,
};
use crate::dist::{DiscreteDist, Growth, Interval};
use crate::lang::SingleWhileLoop;
use crate::lincons::Polyhedron;
use crate::rational::{self, Rational};

/// Samples of an infinite-support variable tried when hunting for
/// violations of conditions quantified over the whole support.
const TRUNCATED_RADIUS: i64 = 32;

fn tail_eps() -> Rational {
    rational::ratio(1, 1_000_000_000_000)
}

/// Per-condition bookkeeping shared by the checkers.
pub(super) struct Tracker {
    status: BTreeMap<Condition, (Status, Option<String>)>,
    witnesses: Vec<Witness>,
}

impl Tracker {
    pub(super) fn new(conds: &[Condition]) -> Self {
        Tracker { status: conds.iter().map(|c| (*c, (Status::Holds, None))).collect(), witnesses: Vec::new() }
    }

    pub(super) fn violated(&self, c: Condition) -> bool {
        self.status.get(&c).is_some_and(|s| s.0 == Status::Violated)
    }

    pub(super) fn violate(&mut self, c: Condition, pv: Option<Vec<i64>>, rv: Option<Vec<i64>>, detail: String) {
        if self.violated(c) {
            return;
        }
        self.status.insert(c, (Status::Violated, None));
        self.witnesses.push(Witness { condition: c, pv, rv, detail });
    }

    pub(super) fn unknown(&mut self, c: Condition, note: impl Into<String>) {
        let entry = self.status.entry(c).or_insert((Status::Holds, None));
        if entry.0 == Status::Holds {
            *entry = (Status::Unknown, Some(note.into()));
        }
    }

    pub(super) fn not_applicable(&mut self, c: Condition) {
        self.status.insert(c, (Status::NotApplicable, None));
    }

    pub(super) fn finish(self, mode: Mode, notices: Vec<String>) -> CheckReport {
        let conditions = self
            .status
            .into_iter()
            .map(|(condition, (status, note))| ConditionStatus { condition, status, note })
            .collect();
        CheckReport::assemble(mode, conditions, self.witnesses, notices)
    }
}

const CONDITIONS: [Condition; 6] = [Condition::D1, Condition::D2i, Condition::D2ii, Condition::D31, Condition::D32, Condition::D4];

/// Checks D1 to D4 for `cand` on `l`. D1 holds by construction since the
/// exit value is fixed at zero; D4 is checked only when `zeta` is given.
pub fn check_smap(l: &SingleWhileLoop, cand: &SupermartingaleMap, domain: &Domain) -> Result<CheckReport, CertError> {
    let h = ResolvedExpr::new(&cand.h, &l.pvars)?;
    match domain {
        Domain::Symbolic => match symbolic_scope(l, &h) {
            Ok(scope) => symbolic(cand, &h, &scope),
            Err(why) => {
                let b = BoxDomain::uniform(l.pvars.len(), DEFAULT_BOX.0, DEFAULT_BOX.1);
                let notice = format!(
                    "symbolic checking unsupported ({why}); checked on the box [{}, {}] per variable instead",
                    DEFAULT_BOX.0, DEFAULT_BOX.1
                );
                bounded(l, cand, &h, &b, vec![notice])
            }
        },
        Domain::Box(b) => bounded(l, cand, &h, b, Vec::new()),
    }
}

pub(super) struct Scope {
    pub guards: Vec<Polyhedron>,
    pub exits: Vec<Polyhedron>,
    pub matrix: Vec<Vec<i64>>,
    pub joint: Vec<(Vec<i64>, Rational)>,
}

fn symbolic_scope(l: &SingleWhileLoop, h: &ResolvedExpr) -> Result<Scope, String> {
    if !h.is_affine() {
        return Err("certificate is not affine".into());
    }
    let matrix = l.incremental.clone().ok_or("loop body is not incremental")?;
    if !l.sampling.is_finite() {
        return Err("sampling has infinite support".into());
    }
    let guards = l.guard_dnf().ok_or("guard is not affine")?;
    let exits = l.exit_dnf().ok_or("guard is not affine")?;
    let joint = l.sampling.joint_support().map_err(|e| e.to_string())?;
    Ok(Scope { guards, exits, matrix, joint })
}

fn symbolic(cand: &SupermartingaleMap, h: &ResolvedExpr, s: &Scope) -> Result<CheckReport, CertError> {
    let mut t = Tracker::new(&CONDITIONS);
    let a = &h.linear;
    let c = &h.constant;
    let delta = &cand.delta;
    // g(pv, rv) = a . (A rv), independent of pv
    let shifts: Vec<Vec<Rational>> = s.joint.iter().map(|(rv, _)| affine::shift(&s.matrix, rv)).collect();
    let gains: Vec<Rational> = shifts.iter().map(|d| a.iter().zip(d).map(|(x, y)| x * y).sum()).collect();
    let record = |t: &mut Tracker, cond: Condition, out: Outcome, rv: Option<&Vec<i64>>, detail: &dyn Fn(&[i64]) -> String| match out {
        Outcome::Holds => {}
        Outcome::Violated(pv) => {
            let d = detail(&pv);
            t.violate(cond, Some(pv), rv.cloned(), d)
        }
        Outcome::Unknown(why) => t.unknown(cond, why),
    };

    for p in &s.guards {
        let out = affine::forall(p, a, c, delta, false)?;
        record(&mut t, Condition::D2i, out, None, &|pv| format!("h(in,pv) = {} < delta = {delta}", h.eval(pv)));
        for ((rv, _), g) in s.joint.iter().zip(&gains) {
            let out = affine::forall(p, a, &(c + g), delta, false)?;
            record(&mut t, Condition::D2ii, out, Some(rv), &|pv| {
                format!("h(in,F(pv,rv)) = {} < delta = {delta}", h.eval(pv) + g)
            });
        }
    }

    let drift: Rational = s.joint.iter().zip(&gains).map(|((_, p), g)| p * g).sum();
    let vibration: Rational = s.joint.iter().zip(&gains).map(|((_, p), g)| p * g.abs()).sum();
    let any = affine::some_point(&s.guards);
    if drift.is_positive() {
        match &any {
            Some(pv) => t.violate(Condition::D31, Some(pv.clone()), None, format!("E h(in,F(pv,.)) - h(in,pv) = {drift} > 0")),
            None => t.unknown(Condition::D31, "drift is positive but no valuation satisfying the guard was found"),
        }
    }
    if vibration < *delta {
        match &any {
            Some(pv) => t.violate(Condition::D32, Some(pv.clone()), None, format!("E|g| = {vibration} < delta = {delta}")),
            None => t.unknown(Condition::D32, "E|g| is below delta but no valuation satisfying the guard was found"),
        }
    }

    match &cand.zeta {
        None => t.not_applicable(Condition::D4),
        Some(zeta) => {
            for ((rv, _), g) in s.joint.iter().zip(&gains) {
                if g.abs() > *zeta {
                    match &any {
                        Some(pv) => t.violate(Condition::D4, Some(pv.clone()), Some(rv.clone()), format!("|g| = {} > zeta = {zeta}", g.abs())),
                        None => t.unknown(Condition::D4, "|g| exceeds zeta but no valuation satisfying the guard was found"),
                    }
                }
            }
            let neg_a = affine::negate(a);
            for p in &s.guards {
                for e in &s.exits {
                    for (((rv, _), g), d) in s.joint.iter().zip(&gains).zip(&shifts) {
                        let region = affine::intersect(p, &affine::shifted(e, d));
                        let out = affine::forall(&region, &neg_a, &-(c + g), &-zeta.clone(), false)?;
                        record(&mut t, Condition::D4, out, Some(rv), &|pv| {
                            format!("exit value h(in,F(pv,rv)) = {} > zeta = {zeta}", h.eval(pv) + g)
                        });
                    }
                }
            }
        }
    }
    Ok(t.finish(Mode::Symbolic, Vec::new()))
}

/// Growth of `h(F(pv, .))` over samples, for incremental bodies:
/// `|h(pv + A rv) - h(pv)| <= slope * sum |rv_j|` since `isqrt` is
/// 1-Lipschitz on the integers.
pub(super) fn gain_slope(h: &ResolvedExpr, matrix: &[Vec<i64>]) -> Rational {
    let cols = matrix.first().map_or(0, Vec::len);
    (0..cols)
        .map(|j| {
            matrix
                .iter()
                .enumerate()
                .map(|(i, row)| (h.linear[i].abs() + h.isqrt[i].abs()) * rational::int(row[j].abs()))
                .sum::<Rational>()
        })
        .max()
        .unwrap_or_else(Rational::zero)
}

/// Support points tried for universally quantified sample conditions:
/// the full support when finite, otherwise truncated to `|r| <= K`.
fn candidate_samples(l: &SingleWhileLoop) -> Result<(Vec<Vec<i64>>, bool), CertError> {
    if l.sampling.is_finite() {
        return Ok((l.sampling.joint_support()?.into_iter().map(|(rv, _)| rv).collect(), true));
    }
    let mut out: Vec<Vec<i64>> = vec![Vec::new()];
    for d in l.sampling.dists() {
        let values: Vec<i64> = match d.support() {
            Some(s) => s.into_iter().map(|(v, _)| v).collect(),
            None => (-TRUNCATED_RADIUS..=TRUNCATED_RADIUS).filter(|v| !d.prob(*v).is_zero()).collect(),
        };
        out = out.into_iter().flat_map(|rv| values.iter().map(move |v| [rv.clone(), vec![*v]].concat())).collect();
    }
    Ok((out, false))
}

fn bounded(
    l: &SingleWhileLoop,
    cand: &SupermartingaleMap,
    h: &ResolvedExpr,
    b: &BoxDomain,
    notices: Vec<String>,
) -> Result<CheckReport, CertError> {
    b.validate(l.pvars.len())?;
    let mut t = Tracker::new(&CONDITIONS);
    let delta = &cand.delta;
    let finite = l.sampling.is_finite();
    let joint = if finite { l.sampling.joint_support()? } else { Vec::new() };
    let (samples, exhaustive) = candidate_samples(l)?;
    let slope = l.incremental.as_ref().map(|m| gain_slope(h, m));
    if cand.zeta.is_none() {
        t.not_applicable(Condition::D4);
    }
    if !exhaustive {
        let note = format!("infinite support: no violation among samples with |r| <= {TRUNCATED_RADIUS}");
        t.unknown(Condition::D2ii, note.clone());
        if cand.zeta.is_some() {
            t.unknown(Condition::D4, note);
        }
        if slope.is_none() {
            let note = "expectation over infinite support needs an incremental body";
            t.unknown(Condition::D31, note);
            t.unknown(Condition::D32, note);
        }
    }
    for pv in b.points() {
        if !l.holds(&pv) {
            continue;
        }
        let hv = h.eval(&pv);
        if hv < *delta {
            t.violate(Condition::D2i, Some(pv.clone()), None, format!("h(in,pv) = {hv} < delta = {delta}"));
        }
        for rv in &samples {
            let f = l.apply(&pv, rv)?;
            let hf = h.eval(&f);
            if hf < *delta {
                t.violate(Condition::D2ii, Some(pv.clone()), Some(rv.clone()), format!("h(in,F(pv,rv)) = {hf} < delta = {delta}"));
            }
            if let Some(zeta) = &cand.zeta {
                let g = (&hf - &hv).abs();
                if g > *zeta {
                    t.violate(Condition::D4, Some(pv.clone()), Some(rv.clone()), format!("|g| = {g} > zeta = {zeta}"));
                } else if !l.holds(&f) && hf > *zeta {
                    t.violate(Condition::D4, Some(pv.clone()), Some(rv.clone()), format!("exit value h(in,F(pv,rv)) = {hf} > zeta = {zeta}"));
                }
            }
        }
        let (eh, eg) = if finite {
            let mut eh = Rational::zero();
            let mut eg = Rational::zero();
            for (rv, p) in &joint {
                let hf = h.eval(&l.apply(&pv, rv)?);
                eg += p * (&hf - &hv).abs();
                eh += p * hf;
            }
            (Interval::point(eh), Interval::point(eg))
        } else if let Some(slope) = &slope {
            let eh = expect_interval(l, &pv, &|f| h.eval(f), &Growth { constant: hv.abs(), slope: slope.clone() })?;
            let eg = expect_interval(l, &pv, &|f| (h.eval(f) - &hv).abs(), &Growth { constant: Rational::zero(), slope: slope.clone() })?;
            (eh, eg)
        } else {
            continue;
        };
        if eh.lo > hv {
            t.violate(Condition::D31, Some(pv.clone()), None, format!("E h(in,F(pv,.)) >= {} > h(in,pv) = {hv}", eh.lo));
        } else if eh.hi > hv {
            t.unknown(Condition::D31, "expectation interval straddles h(in,pv)");
        }
        if eg.hi < *delta {
            t.violate(Condition::D32, Some(pv.clone()), None, format!("E|g| <= {} < delta = {delta}", eg.hi));
        } else if eg.lo < *delta {
            t.unknown(Condition::D32, "expectation interval straddles delta");
        }
    }
    Ok(t.finish(Mode::Bounded { ranges: b.ranges.clone() }, notices))
}

fn expect_interval(
    l: &SingleWhileLoop,
    pv: &[i64],
    f: &dyn Fn(&[i64]) -> Rational,
    growth: &Growth,
) -> Result<Interval, CertError> {
    // evaluation errors inside the closure surface as an unbounded interval
    let failed = std::cell::Cell::new(false);
    let iv = l.sampling.expect(
        |rv| match l.apply(pv, rv) {
            Ok(next) => f(&next),
            Err(_) => {
                failed.set(true);
                Rational::zero()
            }
        },
        &tail_eps(),
        Some(growth),
    )?;
    if failed.get() {
        return Err(crate::lang::EvalError::Overflow.into());
    }
    Ok(iv)
}

fn in_support(l: &SingleWhileLoop, rv: &[i64]) -> bool {
    rv.len() == l.sampling.len() && l.sampling.dists().zip(rv).all(|(d, v): (&DiscreteDist, &i64)| !d.prob(*v).is_zero())
}

pub(super) fn replay(l: &SingleWhileLoop, m: &SupermartingaleMap, w: &Witness) -> Result<bool, CertError> {
    let h = ResolvedExpr::new(&m.h, &l.pvars)?;
    let Some(pv) = &w.pv else { return Ok(false) };
    if pv.len() != l.pvars.len() || !l.holds(pv) {
        return Ok(false);
    }
    let hv = h.eval(pv);
    let with_rv = |rv: &Option<Vec<i64>>| -> Result<Option<(Vec<i64>, Rational)>, CertError> {
        match rv {
            Some(rv) if in_support(l, rv) => {
                let f = l.apply(pv, rv)?;
                let hf = h.eval(&f);
                Ok(Some((f, hf)))
            }
            _ => Ok(None),
        }
    };
    let expectation = |f: &dyn Fn(&[i64]) -> Rational, constant: Rational| -> Result<Option<Interval>, CertError> {
        if l.sampling.is_finite() {
            let mut s = Rational::zero();
            for (rv, p) in l.sampling.joint_support()? {
                s += p * f(&l.apply(pv, &rv)?);
            }
            return Ok(Some(Interval::point(s)));
        }
        match &l.incremental {
            Some(mx) => Ok(Some(expect_interval(l, pv, f, &Growth { constant, slope: gain_slope(&h, mx) })?)),
            None => Ok(None),
        }
    };
    Ok(match w.condition {
        Condition::D2i => hv < m.delta,
        Condition::D2ii => matches!(with_rv(&w.rv)?, Some((_, hf)) if hf < m.delta),
        Condition::D31 => matches!(expectation(&|f| h.eval(f), hv.abs())?, Some(iv) if iv.lo > hv),
        Condition::D32 => matches!(expectation(&|f| (h.eval(f) - &hv).abs(), Rational::zero())?, Some(iv) if iv.hi < m.delta),
        Condition::D4 => match (&m.zeta, with_rv(&w.rv)?) {
            (Some(z), Some((f, hf))) => (&hf - &hv).abs() > *z || (!l.holds(&f) && hf > *z),
            _ => false,
        },
        _ => false,
    })
}
