use std::fmt::{self, Write};

use num_traits::{One, Signed, Zero};

use super::ast::*;
use crate::rational::Rational;

/// Canonical text of a program; reparses to an equal AST.
pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for x in &p.pvars {
        let _ = writeln!(out, "pvar {x};");
    }
    for (r, d) in &p.rvars {
        let _ = writeln!(out, "rvar {r} ~ {d};");
    }
    out.push_str(&pretty_stmt(&p.body));
    out.push('\n');
    out
}

pub fn pretty_stmt(s: &Stmt) -> String {
    s.to_string()
}

/// Writes `c*name` as the next term of a sum, `first` tracking whether a
/// leading sign is needed.
fn write_term(f: &mut fmt::Formatter<'_>, first: &mut bool, coeff: i64, name: &str) -> fmt::Result {
    let mag = coeff.unsigned_abs();
    match (*first, coeff < 0) {
        (true, true) => f.write_str("-")?,
        (true, false) => {}
        (false, true) => f.write_str(" - ")?,
        (false, false) => f.write_str(" + ")?,
    }
    *first = false;
    if name.is_empty() {
        write!(f, "{mag}")
    } else if mag == 1 {
        f.write_str(name)
    } else {
        write!(f, "{mag}*{name}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Pvar(x) | Term::Rvar(x) => f.write_str(x),
            Term::RvarIsqrt { rvar, pvar } => write!(f, "{rvar}*isqrt({pvar})"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (t, c) in &self.terms {
            write_term(f, &mut first, *c, &t.to_string())?;
        }
        if self.constant != 0 || first {
            write_term(f, &mut first, self.constant, "")?;
        }
        Ok(())
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, c) in &self.terms {
            write_term(f, &mut first, *c, &m.vars().join("*"))?;
        }
        if self.constant != 0 || first {
            write_term(f, &mut first, self.constant, "")?;
        }
        Ok(())
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.rel {
            Rel::Le => "<=",
            Rel::Ge => ">=",
        };
        write!(f, "{} {op} {}", self.lhs, self.rhs)
    }
}

fn precedence(g: &Guard) -> u8 {
    match g {
        Guard::Or(..) => 1,
        Guard::And(..) => 2,
        Guard::Not(_) => 3,
        Guard::Lit(_) => 4,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, g: &Guard, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({g})")
    } else {
        write!(f, "{g}")
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = precedence(self);
        match self {
            Guard::Lit(l) => write!(f, "{l}"),
            Guard::Not(g) => {
                f.write_str("not ")?;
                write_child(f, g, precedence(g) < p)
            }
            Guard::And(a, b) | Guard::Or(a, b) => {
                let op = if p == 1 { "or" } else { "and" };
                write_child(f, a, precedence(a) < p)?;
                write!(f, " {op} ")?;
                // the parser is left-associative
                write_child(f, b, precedence(b) <= p)
            }
        }
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            StmtKind::Skip => f.write_str("skip"),
            StmtKind::Assign { var, expr } => write!(f, "{var} := {expr}"),
            StmtKind::Seq(items) => {
                for (i, s) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str("; ")?;
                    }
                    write!(f, "{s}")?;
                }
                Ok(())
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                write!(f, "if {cond} then {then_branch} else {else_branch} fi")
            }
            StmtKind::While { cond, body } => write!(f, "while {cond} do {body} od"),
        }
    }
}

fn write_rational_term(f: &mut fmt::Formatter<'_>, first: &mut bool, q: &Rational, name: &str) -> fmt::Result {
    match (*first, q.is_negative()) {
        (true, true) => f.write_str("-")?,
        (true, false) => {}
        (false, true) => f.write_str(" - ")?,
        (false, false) => f.write_str(" + ")?,
    }
    *first = false;
    let mag = q.abs();
    if name.is_empty() {
        write!(f, "{mag}")
    } else if mag.is_one() {
        f.write_str(name)
    } else {
        write!(f, "{mag}*{name}")
    }
}

impl fmt::Display for ValueExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (x, q) in &self.linear {
            write_rational_term(f, &mut first, q, x)?;
        }
        for (x, q) in &self.isqrt {
            write_rational_term(f, &mut first, q, &format!("isqrt({x})"))?;
        }
        if !self.constant.is_zero() || first {
            write_rational_term(f, &mut first, &self.constant, "")?;
        }
        Ok(())
    }
}
