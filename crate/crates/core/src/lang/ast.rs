use std::collections::BTreeMap;

use crate::dist::{DiscreteDist, SamplingFunction};
use crate::rational::Rational;

/// Source position of a statement (1-based).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Pvar(String),
    Rvar(String),
    /// `r * isqrt(x)`
    RvarIsqrt { rvar: String, pvar: String },
}

/// Right-hand side of an assignment: an integer constant plus integer
/// multiples of terms. Zero coefficients are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Expr {
    pub constant: i64,
    pub terms: BTreeMap<Term, i64>,
}

impl Expr {
    pub fn constant(c: i64) -> Self {
        Expr { constant: c, terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, term: Term, coeff: i64) -> Option<()> {
        let e = self.terms.entry(term.clone()).or_insert(0);
        *e = e.checked_add(coeff)?;
        if *e == 0 {
            self.terms.remove(&term);
        }
        Some(())
    }

    pub fn with_term(mut self, term: Term, coeff: i64) -> Self {
        self.add_term(term, coeff).expect("coefficient overflow");
        self
    }

    pub fn mentions_rvar(&self) -> bool {
        self.terms
            .keys()
            .any(|t| matches!(t, Term::Rvar(_) | Term::RvarIsqrt { .. }))
    }
}

/// A product of at most two program variables, names kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<String>);

impl Monomial {
    pub fn new(mut vars: Vec<String>) -> Self {
        vars.sort();
        Monomial(vars)
    }

    pub fn vars(&self) -> &[String] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }
}

/// Integer polynomial of degree at most two over program variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Poly {
    pub constant: i64,
    pub terms: BTreeMap<Monomial, i64>,
}

impl Poly {
    pub fn constant(c: i64) -> Self {
        Poly { constant: c, terms: BTreeMap::new() }
    }

    pub fn var(name: &str) -> Self {
        Poly::constant(0).with_term(Monomial::new(vec![name.to_string()]), 1)
    }

    pub fn add_term(&mut self, m: Monomial, coeff: i64) -> Option<()> {
        if m.degree() == 0 {
            self.constant = self.constant.checked_add(coeff)?;
            return Some(());
        }
        let e = self.terms.entry(m.clone()).or_insert(0);
        *e = e.checked_add(coeff)?;
        if *e == 0 {
            self.terms.remove(&m);
        }
        Some(())
    }

    pub fn with_term(mut self, m: Monomial, coeff: i64) -> Self {
        self.add_term(m, coeff).expect("coefficient overflow");
        self
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rel {
    Le,
    Ge,
}

/// `lhs <= rhs` or `lhs >= rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Literal {
    pub lhs: Poly,
    pub rel: Rel,
    pub rhs: Poly,
}

impl Literal {
    pub fn degree(&self) -> usize {
        self.lhs.degree().max(self.rhs.degree())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    Lit(Literal),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn degree(&self) -> usize {
        match self {
            Guard::Lit(l) => l.degree(),
            Guard::Not(g) => g.degree(),
            Guard::And(a, b) | Guard::Or(a, b) => a.degree().max(b.degree()),
        }
    }

    pub fn literals(&self) -> Vec<&Literal> {
        match self {
            Guard::Lit(l) => vec![l],
            Guard::Not(g) => g.literals(),
            Guard::And(a, b) | Guard::Or(a, b) => {
                let mut v = a.literals();
                v.extend(b.literals());
                v
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

/// Spans are diagnostics only and do not take part in equality.
impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Eq for Stmt {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Skip,
    Assign { var: String, expr: Expr },
    /// At least two statements, none of them a `Seq`.
    Seq(Vec<Stmt>),
    If { cond: Guard, then_branch: Box<Stmt>, else_branch: Box<Stmt> },
    While { cond: Guard, body: Box<Stmt> },
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt { kind, span: Span::default() }
    }

    pub fn at(kind: StmtKind, span: Span) -> Self {
        Stmt { kind, span }
    }

    pub fn skip() -> Self {
        Stmt::new(StmtKind::Skip)
    }

    /// Flattening sequence constructor.
    pub fn seq(items: Vec<Stmt>) -> Self {
        let span = items.first().map(|s| s.span).unwrap_or_default();
        let mut flat = Vec::with_capacity(items.len());
        for s in items {
            match s.kind {
                StmtKind::Seq(inner) => flat.extend(inner),
                _ => flat.push(s),
            }
        }
        match flat.len() {
            0 => Stmt::at(StmtKind::Skip, span),
            1 => flat.pop().unwrap(),
            _ => Stmt::at(StmtKind::Seq(flat), span),
        }
    }

    pub fn contains_while(&self) -> bool {
        match &self.kind {
            StmtKind::Skip | StmtKind::Assign { .. } => false,
            StmtKind::While { .. } => true,
            StmtKind::Seq(v) => v.iter().any(Stmt::contains_while),
            StmtKind::If { then_branch, else_branch, .. } => {
                then_branch.contains_while() || else_branch.contains_while()
            }
        }
    }

    /// Sampling variables read anywhere in this statement.
    pub fn rvars_used(&self, out: &mut Vec<String>) {
        match &self.kind {
            StmtKind::Skip => {}
            StmtKind::Assign { expr, .. } => {
                for t in expr.terms.keys() {
                    let name = match t {
                        Term::Rvar(r) | Term::RvarIsqrt { rvar: r, .. } => r,
                        Term::Pvar(_) => continue,
                    };
                    if !out.contains(name) {
                        out.push(name.clone());
                    }
                }
            }
            StmtKind::Seq(v) => v.iter().for_each(|s| s.rvars_used(out)),
            StmtKind::If { then_branch, else_branch, .. } => {
                then_branch.rvars_used(out);
                else_branch.rvars_used(out);
            }
            StmtKind::While { body, .. } => body.rvars_used(out),
        }
    }
}

/// A parsed `.pwhile` file: declarations plus the program body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub pvars: Vec<String>,
    pub rvars: Vec<(String, DiscreteDist)>,
    pub body: Stmt,
}

impl Program {
    pub fn sampling(&self) -> SamplingFunction {
        SamplingFunction::new(self.rvars.clone())
    }
}

/// Affine-plus-isqrt expression over program variables with rational
/// coefficients; the textual form of certificate functions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValueExpr {
    pub constant: Rational,
    pub linear: BTreeMap<String, Rational>,
    pub isqrt: BTreeMap<String, Rational>,
}
