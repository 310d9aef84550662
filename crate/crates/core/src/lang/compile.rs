//! Index-based compiled forms of loop-free statements and guards.

use num_bigint::BigInt;
use num_traits::Signed;
use thiserror::Error;

use super::ast::*;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("integer overflow while executing an assignment")]
    Overflow,
}

/// Integer square root with `isqrt(n) = 0` for `n <= 0`.
pub fn isqrt(n: i64) -> i64 {
    if n <= 0 {
        return 0;
    }
    let mut r = (n as f64).sqrt() as i64;
    while r.checked_mul(r).map_or(true, |sq| sq > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|sq| sq <= n) {
        r += 1;
    }
    r
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct CompiledExpr {
    constant: i64,
    pvars: Vec<(usize, i64)>,
    rvars: Vec<(usize, i64)>,
    // (rvar index, pvar index, coefficient)
    scaled: Vec<(usize, usize, i64)>,
}

impl CompiledExpr {
    fn eval(&self, pv: &[i64], rv: &[i64]) -> Result<i64, EvalError> {
        let mut acc = self.constant as i128;
        let add = |acc: i128, a: i64, b: i64| -> Result<i128, EvalError> {
            acc.checked_add(a as i128 * b as i128).ok_or(EvalError::Overflow)
        };
        for &(i, c) in &self.pvars {
            acc = add(acc, c, pv[i])?;
        }
        for &(j, c) in &self.rvars {
            acc = add(acc, c, rv[j])?;
        }
        for &(j, i, c) in &self.scaled {
            let prod = (rv[j] as i128)
                .checked_mul(isqrt(pv[i]) as i128)
                .and_then(|p| p.checked_mul(c as i128))
                .ok_or(EvalError::Overflow)?;
            acc = acc.checked_add(prod).ok_or(EvalError::Overflow)?;
        }
        i64::try_from(acc).map_err(|_| EvalError::Overflow)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Instr {
    Assign { target: usize, expr: CompiledExpr },
    If { cond: CompiledGuard, then_code: Vec<Instr>, else_code: Vec<Instr> },
}

/// A loop-free statement compiled against fixed variable orders. Evaluates
/// in place over a valuation vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledBody {
    code: Vec<Instr>,
}

impl CompiledBody {
    pub fn compile(stmt: &Stmt, pvars: &[String], rvars: &[String]) -> Self {
        let mut code = Vec::new();
        emit(stmt, pvars, rvars, &mut code);
        CompiledBody { code }
    }

    /// Runs the body on `pv` in place with samples `rv`.
    pub fn exec(&self, pv: &mut [i64], rv: &[i64]) -> Result<(), EvalError> {
        run(&self.code, pv, rv)
    }

    /// Functional form `F(pv, rv)`.
    pub fn apply(&self, pv: &[i64], rv: &[i64]) -> Result<Vec<i64>, EvalError> {
        let mut out = pv.to_vec();
        self.exec(&mut out, rv)?;
        Ok(out)
    }
}

fn run(code: &[Instr], pv: &mut [i64], rv: &[i64]) -> Result<(), EvalError> {
    for ins in code {
        match ins {
            Instr::Assign { target, expr } => pv[*target] = expr.eval(pv, rv)?,
            Instr::If { cond, then_code, else_code } => {
                if cond.eval(pv) {
                    run(then_code, pv, rv)?
                } else {
                    run(else_code, pv, rv)?
                }
            }
        }
    }
    Ok(())
}

fn index_of(names: &[String], n: &str) -> usize {
    names
        .iter()
        .position(|x| x == n)
        .unwrap_or_else(|| panic!("variable `{n}` missing from compile order"))
}

fn emit(stmt: &Stmt, pvars: &[String], rvars: &[String], out: &mut Vec<Instr>) {
    match &stmt.kind {
        StmtKind::Skip => {}
        StmtKind::Assign { var, expr } => {
            let mut ce = CompiledExpr { constant: expr.constant, pvars: vec![], rvars: vec![], scaled: vec![] };
            for (t, c) in &expr.terms {
                match t {
                    Term::Pvar(x) => ce.pvars.push((index_of(pvars, x), *c)),
                    Term::Rvar(r) => ce.rvars.push((index_of(rvars, r), *c)),
                    Term::RvarIsqrt { rvar, pvar } => {
                        ce.scaled.push((index_of(rvars, rvar), index_of(pvars, pvar), *c))
                    }
                }
            }
            out.push(Instr::Assign { target: index_of(pvars, var), expr: ce });
        }
        StmtKind::Seq(items) => items.iter().for_each(|s| emit(s, pvars, rvars, out)),
        StmtKind::If { cond, then_branch, else_branch } => {
            let mut then_code = Vec::new();
            let mut else_code = Vec::new();
            emit(then_branch, pvars, rvars, &mut then_code);
            emit(else_branch, pvars, rvars, &mut else_code);
            out.push(Instr::If { cond: CompiledGuard::compile(cond, pvars), then_code, else_code });
        }
        StmtKind::While { .. } => panic!("compile called on a statement containing a loop"),
    }
}

/// `lhs - rhs` as a polynomial with `i128` coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
struct CompiledPoly {
    constant: i128,
    linear: Vec<(usize, i128)>,
    quadratic: Vec<(usize, usize, i128)>,
}

impl CompiledPoly {
    fn eval_fast(&self, pv: &[i64]) -> Option<i128> {
        let mut acc = self.constant;
        for &(i, c) in &self.linear {
            acc = acc.checked_add(c.checked_mul(pv[i] as i128)?)?;
        }
        for &(i, j, c) in &self.quadratic {
            let m = (pv[i] as i128).checked_mul(pv[j] as i128)?;
            acc = acc.checked_add(c.checked_mul(m)?)?;
        }
        Some(acc)
    }

    fn eval_big(&self, pv: &[i64]) -> BigInt {
        let mut acc = BigInt::from(self.constant);
        for &(i, c) in &self.linear {
            acc += BigInt::from(c) * pv[i];
        }
        for &(i, j, c) in &self.quadratic {
            acc += BigInt::from(c) * BigInt::from(pv[i]) * pv[j];
        }
        acc
    }

    /// Sign of the polynomial at `pv`: -1, 0 or 1.
    fn sign(&self, pv: &[i64]) -> i8 {
        match self.eval_fast(pv) {
            Some(v) => v.signum() as i8,
            None => {
                let b = self.eval_big(pv);
                if b.is_positive() {
                    1
                } else if b.is_negative() {
                    -1
                } else {
                    0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum GuardNode {
    // lhs - rhs <= 0 when `le`, >= 0 otherwise
    Lit { poly: CompiledPoly, le: bool },
    Not(Box<GuardNode>),
    And(Box<GuardNode>, Box<GuardNode>),
    Or(Box<GuardNode>, Box<GuardNode>),
}

/// A guard compiled against a fixed program-variable order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledGuard {
    root: GuardNode,
}

impl CompiledGuard {
    pub fn compile(g: &Guard, pvars: &[String]) -> Self {
        CompiledGuard { root: node(g, pvars) }
    }

    pub fn eval(&self, pv: &[i64]) -> bool {
        eval_node(&self.root, pv)
    }
}

fn node(g: &Guard, pvars: &[String]) -> GuardNode {
    match g {
        Guard::Lit(l) => {
            let mut poly = CompiledPoly { constant: 0, linear: vec![], quadratic: vec![] };
            for (side, sign) in [(&l.lhs, 1i128), (&l.rhs, -1i128)] {
                poly.constant += sign * side.constant as i128;
                for (m, c) in &side.terms {
                    let c = sign * *c as i128;
                    match m.vars() {
                        [x] => poly.linear.push((index_of(pvars, x), c)),
                        [x, y] => poly.quadratic.push((index_of(pvars, x), index_of(pvars, y), c)),
                        _ => unreachable!("guard monomials have degree 1 or 2"),
                    }
                }
            }
            GuardNode::Lit { poly, le: l.rel == Rel::Le }
        }
        Guard::Not(a) => GuardNode::Not(Box::new(node(a, pvars))),
        Guard::And(a, b) => GuardNode::And(Box::new(node(a, pvars)), Box::new(node(b, pvars))),
        Guard::Or(a, b) => GuardNode::Or(Box::new(node(a, pvars)), Box::new(node(b, pvars))),
    }
}

fn eval_node(n: &GuardNode, pv: &[i64]) -> bool {
    match n {
        GuardNode::Lit { poly, le } => {
            let s = poly.sign(pv);
            if *le {
                s <= 0
            } else {
                s >= 0
            }
        }
        GuardNode::Not(a) => !eval_node(a, pv),
        GuardNode::And(a, b) => eval_node(a, pv) && eval_node(b, pv),
        GuardNode::Or(a, b) => eval_node(a, pv) || eval_node(b, pv),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isqrt_matches_floor_sqrt() {
        for n in 0..10_000i64 {
            let r = isqrt(n);
            assert!(r * r <= n && (r + 1) * (r + 1) > n, "n={n}");
        }
        assert_eq!(isqrt(-5), 0);
        assert_eq!(isqrt(i64::MAX), 3_037_000_499);
    }
}
