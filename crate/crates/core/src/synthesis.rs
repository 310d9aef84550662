//! Template-based synthesis of affine supermartingale maps and linear
//! progress functions. Universally quantified conditions over affine
//! guards become linear constraints through the Farkas encoding; absolute
//! values in the vibration condition are resolved by enumerating sign
//! patterns over the sample support.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::certificates::{
    check_lpf, check_smap, BoxDomain, CertError, CheckReport, Domain, LinearProgressFunction, SupermartingaleMap, Verdict,
};
use crate::lang::{SingleWhileLoop, ValueExpr};
use crate::lincons::{farkas_encode, AffineTemplate, Cmp, LinError, LinExpr, LinSystem, LpOutcome, Polyhedron, VarId, VarKind};
use crate::rational::{self, Rational};

/// Largest support for which sign patterns are enumerated (2^12 systems).
pub const MAX_SIGN_SUPPORT: usize = 12;
/// Valuations used by box-based synthesis for non-incremental loops.
pub const SYNTH_BOX_POINTS: usize = 512;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SynthError {
    #[error("loop is not incremental")]
    NotIncremental,
    #[error("sign enumeration needs a support of at most {MAX_SIGN_SUPPORT} points, got {0}")]
    SupportTooLarge(usize),
    #[error("symbolic synthesis unsupported: {0}")]
    SymbolicUnsupported(String),
    #[error("no certificate found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Lin(#[from] LinError),
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error(transparent)]
    Dist(#[from] crate::dist::DistError),
}

#[derive(Debug, Clone)]
pub struct SmapSynthesis {
    pub cert: SupermartingaleMap,
    pub report: CheckReport,
}

#[derive(Debug, Clone)]
pub struct LpfSynthesis {
    pub cert: LinearProgressFunction,
    pub report: CheckReport,
}

/// Unknown coefficients `a` and constant `c` of `h(pv) = a . pv + c`, plus
/// auxiliary bounds for the objective `sum |a_i| + |c|`.
struct Template {
    a: Vec<VarId>,
    c: VarId,
}

impl Template {
    fn new(sys: &mut LinSystem, n: usize) -> Self {
        let a: Vec<VarId> = (0..n).map(|i| sys.add_var(format!("a{i}"), VarKind::Free)).collect();
        let c = sys.add_var("c", VarKind::Free);
        let mut objective = LinExpr::default();
        for v in a.iter().chain(std::iter::once(&c)) {
            let u = sys.add_var(format!("abs_{}", v.0), VarKind::NonNeg);
            for sign in [1, -1] {
                let mut e = LinExpr::var(u);
                e.add_term(*v, rational::int(-sign));
                sys.constrain(e, Cmp::Ge, Rational::zero());
            }
            objective.add_term(u, rational::one());
        }
        sys.minimize(objective);
        Template { a, c }
    }

    /// `a . d` as a linear expression in the unknowns.
    fn dot(&self, d: &[Rational]) -> LinExpr {
        let mut e = LinExpr::default();
        for (v, x) in self.a.iter().zip(d) {
            if !x.is_zero() {
                e.add_term(*v, x.clone());
            }
        }
        e
    }

    /// `a . pv + c + offset(unknowns) - margin >= 0` over the premise.
    fn farkas_at_least(&self, sys: &mut LinSystem, premise: &Polyhedron, offset: &LinExpr, margin: &Rational) -> Result<(), LinError> {
        let mut constant = LinExpr::var(self.c);
        constant.add_scaled(offset, &rational::one());
        constant.constant -= margin;
        let tpl = AffineTemplate { coeffs: self.a.iter().map(|v| LinExpr::var(*v)).collect(), constant };
        match farkas_encode(sys, premise, &tpl) {
            Ok(_) | Err(LinError::EmptyPremise) => Ok(()),
            Err(e) => Err(e),
        }
    }

    fn read(&self, values: &[Rational]) -> (Vec<Rational>, Rational) {
        (self.a.iter().map(|v| values[v.0].clone()).collect(), values[self.c.0].clone())
    }
}

fn affine_value_expr(pvars: &[String], a: &[Rational], c: &Rational) -> ValueExpr {
    let linear: BTreeMap<String, Rational> =
        pvars.iter().zip(a).filter(|(_, q)| !q.is_zero()).map(|(x, q)| (x.clone(), q.clone())).collect();
    ValueExpr { constant: c.clone(), linear, isqrt: BTreeMap::new() }
}

/// Sign vectors over `n` support points in lexicographic order, `-1` first.
fn sign_patterns(n: usize) -> impl Iterator<Item = Vec<i64>> {
    (0u64..(1u64 << n)).map(move |bits| (0..n).map(|j| if bits >> (n - 1 - j) & 1 == 1 { 1 } else { -1 }).collect())
}

fn column_shift(matrix: &[Vec<i64>], rv: &[i64]) -> Vec<Rational> {
    matrix.iter().map(|row| rational::int(row.iter().zip(rv).map(|(x, r)| x * r).sum())).collect()
}

/// Affine supermartingale map for an incremental loop with finite support
/// and affine guard, with `delta = 1`. `zeta` is derived afterwards and is
/// absent when the exit value of `h` is unbounded.
pub fn synth_smap_linear(l: &SingleWhileLoop) -> Result<SmapSynthesis, SynthError> {
    let matrix = l.incremental.as_ref().ok_or(SynthError::NotIncremental)?;
    if !l.sampling.is_finite() {
        return Err(SynthError::SymbolicUnsupported("sampling has infinite support".into()));
    }
    let guards = l.guard_dnf().ok_or_else(|| SynthError::SymbolicUnsupported("guard is not affine".into()))?;
    let exits = l.exit_dnf().ok_or_else(|| SynthError::SymbolicUnsupported("guard is not affine".into()))?;
    let joint = l.sampling.joint_support()?;
    if joint.len() > MAX_SIGN_SUPPORT {
        return Err(SynthError::SupportTooLarge(joint.len()));
    }
    let n = l.pvars.len();
    let one = rational::one();

    let mut base = LinSystem::new();
    let tpl = Template::new(&mut base, n);
    let shifts: Vec<Vec<Rational>> = joint.iter().map(|(rv, _)| column_shift(matrix, rv)).collect();
    let gains: Vec<LinExpr> = shifts.iter().map(|d| tpl.dot(d)).collect();
    for p in &guards {
        tpl.farkas_at_least(&mut base, p, &LinExpr::default(), &one)?;
        for g in &gains {
            tpl.farkas_at_least(&mut base, p, g, &one)?;
        }
    }
    let mut drift = LinExpr::default();
    for ((_, p), g) in joint.iter().zip(&gains) {
        drift.add_scaled(g, p);
    }
    base.constrain(drift, Cmp::Le, Rational::zero());

    let mut found = None;
    for signs in sign_patterns(joint.len()) {
        let mut sys = base.clone();
        let mut vibration = LinExpr::default();
        for ((g, (_, p)), s) in gains.iter().zip(&joint).zip(&signs) {
            let mut sg = LinExpr::default();
            sg.add_scaled(g, &rational::int(*s));
            sys.constrain(sg.clone(), Cmp::Ge, Rational::zero());
            vibration.add_scaled(&sg, p);
        }
        sys.constrain(vibration, Cmp::Ge, one.clone());
        if let LpOutcome::Feasible { values, .. } = sys.solve()? {
            found = Some(tpl.read(&values));
            break;
        }
    }
    let (a, c) = found.ok_or_else(|| SynthError::NotFound("every sign pattern over the support is infeasible".into()))?;

    // zeta: the largest |g| and the largest exit value of h
    let gain_values: Vec<Rational> = shifts.iter().map(|d| a.iter().zip(d).map(|(x, y)| x * y).sum()).collect();
    let mut zeta: Option<Rational> = gain_values.iter().map(|g| g.abs()).max();
    let neg_a: Vec<Rational> = a.iter().map(|x| -x).collect();
    'exit: for p in &guards {
        for e in &exits {
            for (d, g) in shifts.iter().zip(&gain_values) {
                let region = shifted_intersection(p, e, d);
                match region.minimize(&neg_a, &-(&c + g)) {
                    Ok(None) => {}
                    Ok(Some((m, _))) => {
                        let v = -m;
                        zeta = zeta.map(|z| if v > z { v } else { z });
                    }
                    Err(LinError::Unbounded) => {
                        zeta = None;
                        break 'exit;
                    }
                    Err(err) => return Err(err.into()),
                }
            }
        }
    }
    let zeta = zeta.filter(|z| z.is_positive());
    let cert = SupermartingaleMap::new(affine_value_expr(&l.pvars, &a, &c), one, zeta)?;
    let report = check_smap(l, &cert, &Domain::Symbolic)?;
    if report.verdict != Verdict::Certified {
        return Err(SynthError::NotFound(format!("candidate {} failed re-validation", cert.h)));
    }
    Ok(SmapSynthesis { cert, report })
}

fn shifted_intersection(p: &Polyhedron, e: &Polyhedron, d: &[Rational]) -> Polyhedron {
    let mut rows = p.rows.clone();
    for h in &e.rows {
        let off: Rational = h.coeffs.iter().zip(d).map(|(a, x)| a * x).sum();
        rows.push(crate::lincons::Halfspace::new(h.coeffs.clone(), &h.bound - off));
    }
    Polyhedron { dim: p.dim, rows }
}

/// Affine supermartingale map for loops outside the symbolic scope (for
/// instance bodies with `isqrt`), fitted pointwise on a small box around the
/// origin and then checked on `check_box`. The result has no `zeta` and is
/// at best certified on the box.
pub fn synth_smap_bounded(l: &SingleWhileLoop, check_box: &BoxDomain) -> Result<SmapSynthesis, SynthError> {
    if !l.sampling.is_finite() {
        return Err(SynthError::SymbolicUnsupported("sampling has infinite support".into()));
    }
    let joint = l.sampling.joint_support()?;
    if joint.len() > MAX_SIGN_SUPPORT {
        return Err(SynthError::SupportTooLarge(joint.len()));
    }
    let n = l.pvars.len();
    let radius = fit_radius(n);
    let fit = BoxDomain::uniform(n, -radius, radius);
    let one = rational::one();

    // h(pv) >= 1 at every guarded valuation and successor; the gains only
    // depend on the displacement F(pv, rv) - pv, so both are deduplicated
    let mut positive = BTreeSet::new();
    let mut steps: BTreeSet<Vec<Vec<i64>>> = BTreeSet::new();
    for pv in fit.points() {
        if !l.holds(&pv) {
            continue;
        }
        let mut step = Vec::with_capacity(joint.len());
        for (rv, _) in &joint {
            let f = l.apply(&pv, rv).map_err(CertError::from)?;
            step.push(f.iter().zip(&pv).map(|(a, b)| a - b).collect());
            positive.insert(f);
        }
        positive.insert(pv);
        steps.insert(step);
    }
    if steps.is_empty() {
        return Err(SynthError::NotFound("the guard has no valuation in the fitting box".into()));
    }
    let mut base = LinSystem::new();
    let tpl = Template::new(&mut base, n);
    let ints = |v: &[i64]| v.iter().map(|x| rational::int(*x)).collect::<Vec<_>>();
    for pv in &positive {
        let mut e = tpl.dot(&ints(pv));
        e.add_term(tpl.c, one.clone());
        base.constrain(e, Cmp::Ge, one.clone());
    }
    for step in &steps {
        let mut drift = LinExpr::default();
        for (d, (_, p)) in step.iter().zip(&joint) {
            drift.add_scaled(&tpl.dot(&ints(d)), p);
        }
        base.constrain(drift, Cmp::Le, Rational::zero());
    }
    let mut found = None;
    for signs in sign_patterns(joint.len()) {
        let mut sys = base.clone();
        let mut oriented = BTreeSet::new();
        for step in &steps {
            let mut vibration = LinExpr::default();
            for ((d, (_, p)), s) in step.iter().zip(&joint).zip(&signs) {
                let sd: Vec<i64> = d.iter().map(|x| x * s).collect();
                let g = tpl.dot(&ints(&sd));
                if oriented.insert(sd) {
                    sys.constrain(g.clone(), Cmp::Ge, Rational::zero());
                }
                vibration.add_scaled(&g, p);
            }
            sys.constrain(vibration, Cmp::Ge, one.clone());
        }
        if let LpOutcome::Feasible { values, .. } = sys.solve()? {
            found = Some(tpl.read(&values));
            break;
        }
    }
    let (a, c) = found.ok_or_else(|| SynthError::NotFound("every sign pattern is infeasible on the fitting box".into()))?;
    let cert = SupermartingaleMap::new(affine_value_expr(&l.pvars, &a, &c), one, None)?;
    let report = check_smap(l, &cert, &Domain::Box(check_box.clone()))?;
    match report.verdict {
        Verdict::Certified | Verdict::CertifiedOnBox => Ok(SmapSynthesis { cert, report }),
        _ => Err(SynthError::NotFound(format!("candidate {} fails on the checking box", cert.h))),
    }
}

fn fit_radius(n: usize) -> i64 {
    let per_axis = (SYNTH_BOX_POINTS as f64).powf(1.0 / n.max(1) as f64);
    (((per_axis - 1.0) / 2.0).floor() as i64).clamp(1, 16)
}

/// Linear progress function with the L2 margin normalized to 1.
pub fn synth_lpf(l: &SingleWhileLoop) -> Result<LpfSynthesis, SynthError> {
    let matrix = l.incremental.as_ref().ok_or(SynthError::NotIncremental)?;
    let guards = l.guard_dnf().ok_or_else(|| {
        SynthError::SymbolicUnsupported("guard is not affine; check a hand-written candidate with check_lpf on a box".into())
    })?;
    let n = l.pvars.len();
    let one = rational::one();
    let moments = l.sampling.moments();

    let mut base = LinSystem::new();
    let tpl = Template::new(&mut base, n);
    for p in &guards {
        tpl.farkas_at_least(&mut base, p, &LinExpr::default(), &one)?;
    }
    // (a^T A)_j for each sampling variable
    let weights: Vec<LinExpr> = (0..l.rvars.len())
        .map(|j| tpl.dot(&matrix.iter().map(|row| rational::int(row[j])).collect::<Vec<_>>()))
        .collect();
    let mut drift = LinExpr::default();
    for (w, m) in weights.iter().zip(&moments) {
        drift.add_scaled(w, &m.mean);
    }
    base.constrain(drift, Cmp::Le, Rational::zero());

    for (j, m) in moments.iter().enumerate() {
        if !m.variance.is_positive() {
            continue;
        }
        for sign in [1, -1] {
            let mut sys = base.clone();
            let mut e = LinExpr::default();
            e.add_scaled(&weights[j], &rational::int(sign));
            sys.constrain(e, Cmp::Ge, one.clone());
            if let LpOutcome::Feasible { values, .. } = sys.solve()? {
                let (a, c) = tpl.read(&values);
                let cert = LinearProgressFunction { a, c };
                let report = check_lpf(l, &cert, &Domain::Symbolic)?;
                if report.verdict != Verdict::Certified {
                    return Err(SynthError::NotFound("candidate failed re-validation".into()));
                }
                return Ok(LpfSynthesis { cert, report });
            }
        }
    }
    Err(SynthError::NotFound("no sampling variable admits nonzero variance with nonpositive drift".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn lp(src: &str) -> SingleWhileLoop {
        SingleWhileLoop::from_source(src).unwrap()
    }

    #[test]
    fn sign_order_is_lexicographic() {
        let v: Vec<_> = sign_patterns(2).collect();
        assert_eq!(v, vec![vec![-1, -1], vec![-1, 1], vec![1, -1], vec![1, 1]]);
    }

    #[test]
    fn walk_gives_x_plus_one() {
        let s = synth_smap_linear(&lp("pvar x; rvar r ~ table{-1:1/2, 1:1/2};\nwhile x >= 1 do x := x + r od")).unwrap();
        assert_eq!(s.cert.h.to_string(), "x + 1");
        assert_eq!(s.cert.zeta, Some(int(1)));
    }

    #[test]
    fn countdown() {
        let s = synth_smap_linear(&lp("pvar x; rvar r ~ point(-1);\nwhile x >= 1 do x := x + r od")).unwrap();
        assert_eq!(s.cert.h.to_string(), "x + 1");
    }

    #[test]
    fn biased_and_drifting_not_found() {
        let biased = lp("pvar x; rvar r ~ table{-1:1/4, 1:3/4};\nwhile x >= 1 do x := x + r od");
        assert!(matches!(synth_smap_linear(&biased), Err(SynthError::NotFound(_))));
        assert!(matches!(synth_lpf(&biased), Err(SynthError::NotFound(_))));
        let up = lp("pvar x; rvar r ~ point(1);\nwhile x >= 1 do x := x + r od");
        assert!(matches!(synth_smap_linear(&up), Err(SynthError::NotFound(_))));
        assert!(matches!(synth_lpf(&up), Err(SynthError::NotFound(_))));
    }

    #[test]
    fn geometric_walk_lpf() {
        let s = synth_lpf(&lp("pvar x; rvar r ~ two_sided_geometric(1/2);\nwhile x >= 1 do x := x + r od")).unwrap();
        assert_eq!(s.cert, LinearProgressFunction { a: vec![int(1)], c: int(0) });
    }

    #[test]
    fn isqrt_walk_on_box() {
        let l = lp("pvar x; rvar r ~ table{-1:1/2, 1:1/2};\nwhile x >= 1 do x := x + r * isqrt(x) od");
        assert!(matches!(synth_smap_linear(&l), Err(SynthError::NotIncremental)));
        let s = synth_smap_bounded(&l, &BoxDomain { ranges: vec![(1, 10_000)] }).unwrap();
        assert_eq!(s.cert.h.to_string(), "x + 1");
        assert_eq!(s.report.verdict, Verdict::CertifiedOnBox);
    }
}
