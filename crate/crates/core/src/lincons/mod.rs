//! Exact linear feasibility and optimization, polyhedra over program
//! variables, and the Farkas encoding of universally quantified affine
//! implications.

mod farkas;
mod simplex;

use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rational::{self, Rational};
use simplex::{Phase2, Tableau};

pub use farkas::{farkas_encode, AffineTemplate};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinError {
    #[error("objective is unbounded")]
    Unbounded,
    #[error("premise polyhedron is empty; the implication is vacuous")]
    EmptyPremise,
    #[error("constraint references undeclared variable #{0}")]
    UnknownVariable(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Free,
    NonNeg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

/// `sum(coeff * var) + constant`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, Rational)>,
    pub constant: Rational,
}

impl LinExpr {
    pub fn var(v: VarId) -> Self {
        LinExpr { terms: vec![(v, Rational::one())], constant: Rational::zero() }
    }

    pub fn constant(c: Rational) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn add_term(&mut self, v: VarId, c: Rational) {
        if !c.is_zero() {
            self.terms.push((v, c));
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, k: &Rational) {
        for (v, c) in &other.terms {
            self.add_term(*v, c * k);
        }
        self.constant += &other.constant * k;
    }

    pub fn eval(&self, values: &[Rational]) -> Rational {
        self.terms.iter().map(|(v, c)| c * &values[v.0]).sum::<Rational>() + &self.constant
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub expr: LinExpr,
    pub cmp: Cmp,
}

impl Constraint {
    pub fn holds(&self, values: &[Rational]) -> bool {
        let v = self.expr.eval(values);
        match self.cmp {
            Cmp::Le => !v.is_positive(),
            Cmp::Eq => v.is_zero(),
            Cmp::Ge => !v.is_negative(),
        }
    }
}

/// A system of linear constraints `expr {<=,=,>=} 0` with an optional
/// objective to minimize.
#[derive(Debug, Clone, Default)]
pub struct LinSystem {
    names: Vec<String>,
    kinds: Vec<VarKind>,
    constraints: Vec<Constraint>,
    objective: Option<LinExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Feasible { values: Vec<Rational>, objective: Option<Rational> },
    Infeasible,
}

impl LpOutcome {
    pub fn values(&self) -> Option<&[Rational]> {
        match self {
            LpOutcome::Feasible { values, .. } => Some(values),
            LpOutcome::Infeasible => None,
        }
    }
}

impl LinSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind) -> VarId {
        self.names.push(name.into());
        self.kinds.push(kind);
        VarId(self.names.len() - 1)
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Adds `lhs cmp rhs`.
    pub fn constrain(&mut self, lhs: LinExpr, cmp: Cmp, rhs: Rational) {
        let mut expr = lhs;
        expr.constant -= rhs;
        self.constraints.push(Constraint { expr, cmp });
    }

    pub fn minimize(&mut self, objective: LinExpr) {
        self.objective = Some(objective);
    }

    pub fn maximize(&mut self, objective: LinExpr) {
        let mut neg = LinExpr::default();
        neg.add_scaled(&objective, &-Rational::one());
        self.objective = Some(neg);
    }

    /// Checks that an assignment satisfies every constraint exactly.
    pub fn satisfied_by(&self, values: &[Rational]) -> bool {
        values.len() == self.num_vars()
            && self.constraints.iter().all(|c| c.holds(values))
            && self
                .kinds
                .iter()
                .zip(values)
                .all(|(k, v)| *k == VarKind::Free || !v.is_negative())
    }

    pub fn solve(&self) -> Result<LpOutcome, LinError> {
        let n = self.num_vars();
        for c in &self.constraints {
            if let Some((v, _)) = c.expr.terms.iter().find(|(v, _)| v.0 >= n) {
                return Err(LinError::UnknownVariable(v.0));
            }
        }
        // column layout: one column per nonneg var, two per free var
        let mut col_of = Vec::with_capacity(n);
        let mut ncols = 0;
        for k in &self.kinds {
            col_of.push(ncols);
            ncols += if *k == VarKind::Free { 2 } else { 1 };
        }
        let n_slack = self.constraints.iter().filter(|c| c.cmp != Cmp::Eq).count();
        let width = ncols + n_slack;
        let mut rows = Vec::with_capacity(self.constraints.len());
        let mut rhs = Vec::with_capacity(self.constraints.len());
        let mut units = Vec::with_capacity(self.constraints.len());
        let mut slack = ncols;
        for c in &self.constraints {
            let mut row = vec![Rational::zero(); width];
            for (v, a) in &c.expr.terms {
                let col = col_of[v.0];
                row[col] += a;
                if self.kinds[v.0] == VarKind::Free {
                    row[col + 1] -= a;
                }
            }
            let mut b = -c.expr.constant.clone();
            let mut slack_sign = match c.cmp {
                Cmp::Le => 1,
                Cmp::Ge => -1,
                Cmp::Eq => 0,
            };
            if b.is_negative() {
                row.iter_mut().for_each(|a| *a = -a.clone());
                b = -b;
                slack_sign = -slack_sign;
            }
            let mut unit = None;
            if slack_sign != 0 {
                row[slack] = rational::int(slack_sign);
                if slack_sign > 0 {
                    unit = Some(slack);
                }
                slack += 1;
            }
            rows.push(row);
            rhs.push(b);
            units.push(unit);
        }
        let (mut tab, base_cols) = Tableau::new(rows, rhs, units);
        if !tab.phase_one(base_cols) {
            return Ok(LpOutcome::Infeasible);
        }
        let mut cost = vec![Rational::zero(); base_cols];
        if let Some(obj) = &self.objective {
            for (v, a) in &obj.terms {
                let col = col_of[v.0];
                cost[col] += a;
                if self.kinds[v.0] == VarKind::Free {
                    cost[col + 1] -= a;
                }
            }
            if let Phase2::Unbounded = tab.phase_two(&cost) {
                return Err(LinError::Unbounded);
            }
        }
        let x = tab.values(base_cols);
        let values: Vec<Rational> = (0..n)
            .map(|i| {
                let col = col_of[i];
                match self.kinds[i] {
                    VarKind::NonNeg => x[col].clone(),
                    VarKind::Free => &x[col] - &x[col + 1],
                }
            })
            .collect();
        let objective = self.objective.as_ref().map(|o| o.eval(&values));
        debug_assert!(self.satisfied_by(&values));
        Ok(LpOutcome::Feasible { values, objective })
    }
}

/// `coeffs . x >= bound`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Halfspace {
    pub coeffs: Vec<Rational>,
    pub bound: Rational,
}

impl Halfspace {
    pub fn new(coeffs: Vec<Rational>, bound: Rational) -> Self {
        Halfspace { coeffs, bound }
    }

    pub fn value(&self, x: &[Rational]) -> Rational {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum()
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        self.value(x) >= self.bound
    }

    pub fn contains_int(&self, x: &[i64]) -> bool {
        let v: Rational = self.coeffs.iter().zip(x).map(|(a, v)| a * rational::int(*v)).sum();
        v >= self.bound
    }

    /// The integer complement `coeffs . x <= bound - 1`, valid when the
    /// coefficients are integers, written as a `>=` halfspace.
    pub fn integer_negation(&self) -> Halfspace {
        Halfspace {
            coeffs: self.coeffs.iter().map(|a| -a).collect(),
            bound: -&self.bound + Rational::one(),
        }
    }
}

impl fmt::Display for Halfspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({a})*v{i}")?;
        }
        if first {
            f.write_str("0")?;
        }
        write!(f, " >= {}", self.bound)
    }
}

/// A conjunction of halfspaces over `dim` variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Polyhedron {
    pub dim: usize,
    pub rows: Vec<Halfspace>,
}

impl Polyhedron {
    pub fn universe(dim: usize) -> Self {
        Polyhedron { dim, rows: Vec::new() }
    }

    pub fn new(dim: usize, rows: Vec<Halfspace>) -> Result<Self, LinError> {
        for r in &rows {
            if r.coeffs.len() != dim {
                return Err(LinError::Dimension { expected: dim, got: r.coeffs.len() });
            }
        }
        Ok(Polyhedron { dim, rows })
    }

    pub fn with(mut self, h: Halfspace) -> Self {
        self.rows.push(h);
        self
    }

    pub fn contains_int(&self, x: &[i64]) -> bool {
        self.rows.iter().all(|h| h.contains_int(x))
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        self.rows.iter().all(|h| h.contains(x))
    }

    fn system(&self) -> (LinSystem, Vec<VarId>) {
        let mut sys = LinSystem::new();
        let vars: Vec<VarId> = (0..self.dim).map(|i| sys.add_var(format!("x{i}"), VarKind::Free)).collect();
        for h in &self.rows {
            let mut e = LinExpr::default();
            for (i, a) in h.coeffs.iter().enumerate() {
                e.add_term(vars[i], a.clone());
            }
            sys.constrain(e, Cmp::Ge, h.bound.clone());
        }
        (sys, vars)
    }

    /// Some rational point of the polyhedron, if nonempty.
    pub fn feasible_point(&self) -> Option<Vec<Rational>> {
        let (sys, _) = self.system();
        match sys.solve() {
            Ok(LpOutcome::Feasible { values, .. }) => Some(values),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.feasible_point().is_none()
    }

    /// Some integer point, by depth-first branch and bound on the rational
    /// relaxation. `None` when none was found within `node_limit` LPs,
    /// which does not prove emptiness for unbounded polyhedra.
    pub fn integer_point(&self, node_limit: usize) -> Option<Vec<i64>> {
        let mut stack = vec![self.clone()];
        let mut nodes = 0;
        while let Some(p) = stack.pop() {
            nodes += 1;
            if nodes > node_limit {
                return None;
            }
            let Some(x) = p.feasible_point() else { continue };
            let Some(i) = x.iter().position(|v| !v.is_integer()) else {
                return x.iter().map(rational::floor_i64).collect();
            };
            let lo = x[i].floor();
            let mut unit = vec![Rational::zero(); self.dim];
            unit[i] = Rational::one();
            let up = Halfspace::new(unit.clone(), &lo + Rational::one());
            let down = Halfspace::new(unit.iter().map(|a| -a).collect(), -lo);
            // explore the side nearer the relaxed value first
            let frac = &x[i] - x[i].floor();
            let (first, second) = if frac * rational::int(2) >= Rational::one() { (down, up) } else { (up, down) };
            stack.push(p.clone().with(second));
            stack.push(p.with(first));
        }
        None
    }

    /// Minimizes `obj . x + constant` over the rational relaxation.
    /// `Ok(None)` when empty, `Err(Unbounded)` when unbounded below.
    pub fn minimize(&self, obj: &[Rational], constant: &Rational) -> Result<Option<(Rational, Vec<Rational>)>, LinError> {
        let (mut sys, vars) = self.system();
        let mut e = LinExpr::constant(constant.clone());
        for (i, a) in obj.iter().enumerate() {
            e.add_term(vars[i], a.clone());
        }
        sys.minimize(e);
        match sys.solve()? {
            LpOutcome::Feasible { values, objective } => Ok(Some((objective.unwrap_or_default(), values))),
            LpOutcome::Infeasible => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn integer_point_skips_fractional_vertex() {
        // 2x >= 1, 2x <= 3 has the single integer point x = 1
        let p = Polyhedron::new(1, vec![Halfspace::new(vec![int(2)], int(1)), Halfspace::new(vec![int(-2)], int(-3))]).unwrap();
        assert_eq!(p.integer_point(50), Some(vec![1]));
        let gap = Polyhedron::new(1, vec![Halfspace::new(vec![int(3)], int(1)), Halfspace::new(vec![int(-3)], int(-2))]).unwrap();
        assert_eq!(gap.integer_point(50), None);
        let half = Polyhedron::new(2, vec![Halfspace::new(vec![int(1), int(1)], ratio(1, 2))]).unwrap();
        let x = half.integer_point(50).unwrap();
        assert!(half.contains_int(&x));
    }

    #[test]
    fn single_point_feasible() {
        let mut s = LinSystem::new();
        let v = s.add_var("v", VarKind::Free);
        s.constrain(LinExpr::var(v), Cmp::Ge, int(1));
        s.constrain(LinExpr::var(v), Cmp::Le, int(1));
        assert_eq!(s.solve().unwrap().values().unwrap(), &[int(1)]);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let mut s = LinSystem::new();
        let v = s.add_var("v", VarKind::Free);
        s.constrain(LinExpr::var(v), Cmp::Ge, int(1));
        s.constrain(LinExpr::var(v), Cmp::Le, int(0));
        assert_eq!(s.solve().unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn small_minimization() {
        // a >= 0, a + c >= 1, -a >= 0, minimize c  =>  a = 0, c = 1
        let mut s = LinSystem::new();
        let a = s.add_var("a", VarKind::Free);
        let c = s.add_var("c", VarKind::Free);
        s.constrain(LinExpr::var(a), Cmp::Ge, int(0));
        let mut ac = LinExpr::var(a);
        ac.add_term(c, int(1));
        s.constrain(ac, Cmp::Ge, int(1));
        let mut na = LinExpr::default();
        na.add_term(a, int(-1));
        s.constrain(na, Cmp::Ge, int(0));
        s.minimize(LinExpr::var(c));
        let out = s.solve().unwrap();
        assert_eq!(out.values().unwrap(), &[int(0), int(1)]);
    }

    #[test]
    fn unbounded_objective() {
        let mut s = LinSystem::new();
        let v = s.add_var("v", VarKind::Free);
        s.constrain(LinExpr::var(v), Cmp::Ge, int(0));
        s.maximize(LinExpr::var(v));
        assert_eq!(s.solve(), Err(LinError::Unbounded));
    }

    #[test]
    fn degenerate_equalities_and_redundant_rows() {
        let mut s = LinSystem::new();
        let x = s.add_var("x", VarKind::NonNeg);
        let y = s.add_var("y", VarKind::NonNeg);
        let mut e = LinExpr::var(x);
        e.add_term(y, int(1));
        s.constrain(e.clone(), Cmp::Eq, int(2));
        let mut e2 = LinExpr::default();
        e2.add_scaled(&e, &int(2));
        s.constrain(e2, Cmp::Eq, int(4));
        s.minimize(LinExpr::var(x));
        let out = s.solve().unwrap();
        assert_eq!(out.values().unwrap(), &[int(0), int(2)]);
    }
}
