use num_integer::Integer;

use super::ast::*;
use super::compile::{CompiledBody, CompiledGuard, EvalError};
use super::LangError;
use crate::dist::{DiscreteDist, SamplingFunction};
use crate::lincons::{Halfspace, Polyhedron};
use crate::rational::Rational;

/// A maximal run of top-level statements without loops.
#[derive(Debug, Clone)]
pub struct LoopFreeBlock {
    pub stmt: Stmt,
    /// Sampling variables read by the block, in declaration order.
    pub rvars: Vec<String>,
    pub sampling: SamplingFunction,
    pub code: CompiledBody,
}

/// A loop `while guard do body od` with a loop-free body, compiled to the
/// update function `F(pv, rv)` over every declared program variable.
#[derive(Debug, Clone)]
pub struct SingleWhileLoop {
    pub guard: Guard,
    pub body: Stmt,
    pub pvars: Vec<String>,
    /// Sampling variables read by the body, in declaration order.
    pub rvars: Vec<String>,
    pub sampling: SamplingFunction,
    pub update: CompiledBody,
    pub guard_code: CompiledGuard,
    /// `A` with `F(pv, rv) = pv + A rv`, shape `|pvars| x |rvars|`.
    pub incremental: Option<Vec<Vec<i64>>>,
    pub span: Span,
}

impl SingleWhileLoop {
    pub fn holds(&self, pv: &[i64]) -> bool {
        self.guard_code.eval(pv)
    }

    pub fn apply(&self, pv: &[i64], rv: &[i64]) -> Result<Vec<i64>, EvalError> {
        self.update.apply(pv, rv)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.pvars.iter().position(|x| x == name)
    }

    /// The guard as a union of integer-tightened polyhedra, when affine.
    pub fn guard_dnf(&self) -> Option<Vec<Polyhedron>> {
        guard_dnf(&self.guard, &self.pvars)
    }

    /// The complement of the guard in the same form.
    pub fn exit_dnf(&self) -> Option<Vec<Polyhedron>> {
        guard_dnf(&Guard::Not(Box::new(self.guard.clone())), &self.pvars)
    }

    /// Builds the loop from a standalone source text containing exactly
    /// one while loop and nothing else but skips.
    pub fn from_source(text: &str) -> Result<Self, LangError> {
        let prog = super::parse(text)?;
        let norm = normalize(&prog)?;
        let mut loops = norm.components.into_iter().filter_map(|c| match c {
            Component::Loop(l) => Some(l),
            Component::LoopFree(_) => None,
        });
        let first = loops.next().ok_or(LangError::Syntax {
            line: 1,
            col: 1,
            expected: "a while loop".into(),
            found: "a program without loops".into(),
        })?;
        Ok(first)
    }
}

#[derive(Debug, Clone)]
pub enum Component {
    LoopFree(LoopFreeBlock),
    Loop(SingleWhileLoop),
}

#[derive(Debug, Clone)]
pub struct NormalizedProgram {
    pub pvars: Vec<String>,
    pub rvars: Vec<(String, DiscreteDist)>,
    pub components: Vec<Component>,
}

impl NormalizedProgram {
    pub fn loops(&self) -> impl Iterator<Item = &SingleWhileLoop> {
        self.components.iter().filter_map(|c| match c {
            Component::Loop(l) => Some(l),
            Component::LoopFree(_) => None,
        })
    }
}

/// Splits the top-level sequence at while loops.
pub fn normalize(prog: &Program) -> Result<NormalizedProgram, LangError> {
    let items: Vec<&Stmt> = match &prog.body.kind {
        StmtKind::Seq(v) => v.iter().collect(),
        _ => vec![&prog.body],
    };
    let sampling = prog.sampling();
    let used_rvars = |s: &Stmt| -> Vec<String> {
        let mut used = Vec::new();
        s.rvars_used(&mut used);
        prog.rvars
            .iter()
            .map(|(n, _)| n.clone())
            .filter(|n| used.contains(n))
            .collect()
    };
    let restrict = |names: &[String]| sampling.restrict(names).expect("parser checked declarations");
    let mut components = Vec::new();
    let mut pending: Vec<Stmt> = Vec::new();
    let flush = |pending: &mut Vec<Stmt>, components: &mut Vec<Component>| {
        if pending.is_empty() {
            return;
        }
        let stmt = Stmt::seq(std::mem::take(pending));
        let rvars = used_rvars(&stmt);
        let code = CompiledBody::compile(&stmt, &prog.pvars, &rvars);
        components.push(Component::LoopFree(LoopFreeBlock { sampling: restrict(&rvars), rvars, stmt, code }));
    };
    for s in items {
        match &s.kind {
            StmtKind::While { cond, body } => {
                if let Some(inner) = find_while(body) {
                    return Err(LangError::NestedLoop { line: inner.line, col: inner.col });
                }
                flush(&mut pending, &mut components);
                let rvars = used_rvars(body);
                let (update, incremental) = compile_body(body, &prog.pvars, &rvars);
                components.push(Component::Loop(SingleWhileLoop {
                    guard: cond.clone(),
                    body: (**body).clone(),
                    pvars: prog.pvars.clone(),
                    sampling: restrict(&rvars),
                    rvars,
                    update,
                    guard_code: CompiledGuard::compile(cond, &prog.pvars),
                    incremental,
                    span: s.span,
                }));
            }
            _ => {
                if let Some(inner) = find_while(s) {
                    return Err(LangError::LoopInsideBranch { line: inner.line, col: inner.col });
                }
                pending.push(s.clone());
            }
        }
    }
    flush(&mut pending, &mut components);
    Ok(NormalizedProgram { pvars: prog.pvars.clone(), rvars: prog.rvars.clone(), components })
}

fn find_while(s: &Stmt) -> Option<Span> {
    match &s.kind {
        StmtKind::While { .. } => Some(s.span),
        StmtKind::Skip | StmtKind::Assign { .. } => None,
        StmtKind::Seq(v) => v.iter().find_map(find_while),
        StmtKind::If { then_branch, else_branch, .. } => find_while(then_branch).or_else(|| find_while(else_branch)),
    }
}

/// Compiles a loop-free body and detects the incremental form: a sequence
/// of assignments `x := x + sum_i c_i * r_i` (skips allowed), in which case
/// `F(pv, rv) = pv + A rv` with `A[x][r]` the summed coefficients.
pub fn compile_body(body: &Stmt, pvars: &[String], rvars: &[String]) -> (CompiledBody, Option<Vec<Vec<i64>>>) {
    let code = CompiledBody::compile(body, pvars, rvars);
    let mut a = vec![vec![0i64; rvars.len()]; pvars.len()];
    let incremental = accumulate(body, pvars, rvars, &mut a).then_some(a);
    (code, incremental)
}

fn accumulate(s: &Stmt, pvars: &[String], rvars: &[String], a: &mut [Vec<i64>]) -> bool {
    match &s.kind {
        StmtKind::Skip => true,
        StmtKind::Seq(v) => v.iter().all(|s| accumulate(s, pvars, rvars, a)),
        StmtKind::If { .. } | StmtKind::While { .. } => false,
        StmtKind::Assign { var, expr } => {
            if expr.constant != 0 {
                return false;
            }
            let xi = pvars.iter().position(|p| p == var).expect("declared");
            let mut saw_self = false;
            for (t, c) in &expr.terms {
                match t {
                    Term::Pvar(p) if p == var && *c == 1 => saw_self = true,
                    Term::Rvar(r) => {
                        let j = rvars.iter().position(|q| q == r).expect("declared");
                        match a[xi][j].checked_add(*c) {
                            Some(v) => a[xi][j] = v,
                            None => return false,
                        }
                    }
                    _ => return false,
                }
            }
            saw_self
        }
    }
}

enum Atom {
    True,
    False,
    Row(Halfspace),
}

fn literal_atom(l: &Literal, pvars: &[String], negate: bool) -> Option<Atom> {
    if l.degree() > 1 {
        return None;
    }
    // p = lhs - rhs; the literal is p >= 0 (Ge) or -p >= 0 (Le)
    let sign: i128 = if l.rel == Rel::Ge { 1 } else { -1 };
    let mut coeffs = vec![0i128; pvars.len()];
    let mut constant: i128 = 0;
    for (side, s) in [(&l.lhs, sign), (&l.rhs, -sign)] {
        constant += s * side.constant as i128;
        for (m, c) in &side.terms {
            let i = pvars.iter().position(|p| p == &m.vars()[0]).expect("declared");
            coeffs[i] += s * *c as i128;
        }
    }
    // coeffs . x >= -constant
    let mut bound = -constant;
    if negate {
        coeffs.iter_mut().for_each(|c| *c = -*c);
        bound = -bound + 1;
    }
    let g = coeffs.iter().fold(0i128, |acc, c| acc.gcd(c));
    if g == 0 {
        return Some(if bound <= 0 { Atom::True } else { Atom::False });
    }
    let tightened = -(-bound).div_euclid(g);
    let coeffs = coeffs.iter().map(|c| Rational::from_integer((c / g).into())).collect();
    Some(Atom::Row(Halfspace::new(coeffs, Rational::from_integer(tightened.into()))))
}

const MAX_DISJUNCTS: usize = 256;

fn dnf(g: &Guard, pvars: &[String], negate: bool) -> Option<Vec<Vec<Halfspace>>> {
    let out = match (g, negate) {
        (Guard::Lit(l), _) => match literal_atom(l, pvars, negate)? {
            Atom::True => vec![vec![]],
            Atom::False => vec![],
            Atom::Row(h) => vec![vec![h]],
        },
        (Guard::Not(a), _) => dnf(a, pvars, !negate)?,
        (Guard::And(a, b), false) | (Guard::Or(a, b), true) => {
            let da = dnf(a, pvars, negate)?;
            let db = dnf(b, pvars, negate)?;
            if da.len() * db.len() > MAX_DISJUNCTS {
                return None;
            }
            let mut out = Vec::new();
            for x in &da {
                for y in &db {
                    let mut c = x.clone();
                    c.extend(y.iter().cloned());
                    out.push(c);
                }
            }
            out
        }
        (Guard::Or(a, b), false) | (Guard::And(a, b), true) => {
            let mut da = dnf(a, pvars, negate)?;
            da.extend(dnf(b, pvars, negate)?);
            da
        }
    };
    (out.len() <= MAX_DISJUNCTS).then_some(out)
}

/// Affine guard as a union of polyhedra over `pvars` with integer-tightened
/// rows, `None` when the guard has a quadratic literal or blows up.
pub fn guard_dnf(g: &Guard, pvars: &[String]) -> Option<Vec<Polyhedron>> {
    let d = dnf(g, pvars, false)?;
    Some(
        d.into_iter()
            .map(|rows| Polyhedron { dim: pvars.len(), rows })
            .collect(),
    )
}
