//! Dense two-phase simplex over exact rationals with Bland's rule.

use num_traits::{Signed, Zero};

use crate::rational::Rational;

pub(crate) enum Phase2 {
    Optimal,
    Unbounded,
}

/// Standard-form problem `A x = b, x >= 0, b >= 0`.
pub(crate) struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    ncols: usize,
    blocked: Vec<bool>,
}

impl Tableau {
    /// `rows` must already have nonnegative right-hand sides. `unit_cols`
    /// gives, per row, a column that is a unit vector for that row (a
    /// slack), if any. Artificial columns are appended for the others.
    pub(crate) fn new(mut rows: Vec<Vec<Rational>>, rhs: Vec<Rational>, unit_cols: Vec<Option<usize>>) -> (Self, usize) {
        let m = rows.len();
        let base_cols = rows.first().map_or(0, Vec::len);
        let n_art = unit_cols.iter().filter(|u| u.is_none()).count();
        let ncols = base_cols + n_art;
        let mut basis = Vec::with_capacity(m);
        let mut next_art = base_cols;
        for (i, row) in rows.iter_mut().enumerate() {
            row.resize(ncols, Rational::zero());
            match unit_cols[i] {
                Some(c) => basis.push(c),
                None => {
                    row[next_art] = Rational::from_integer(1.into());
                    basis.push(next_art);
                    next_art += 1;
                }
            }
        }
        let blocked = vec![false; ncols];
        (Tableau { rows, rhs, basis, ncols, blocked }, base_cols)
    }

    fn pivot(&mut self, r: usize, c: usize, obj: &mut [Rational], obj_val: &mut Rational) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v /= &p;
            }
        }
        self.rhs[r] /= &p;
        let prow = self.rows[r].clone();
        let prhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for (j, pv) in prow.iter().enumerate() {
                if !pv.is_zero() {
                    let d = &f * pv;
                    self.rows[i][j] -= d;
                }
            }
            let d = &f * &prhs;
            self.rhs[i] -= d;
        }
        if !obj[c].is_zero() {
            let f = obj[c].clone();
            for (j, pv) in prow.iter().enumerate() {
                if !pv.is_zero() {
                    obj[j] -= &f * pv;
                }
            }
            *obj_val -= &f * &prhs;
        }
        self.basis[r] = c;
    }

    /// Reduced costs and objective value for minimizing `cost . x` at the
    /// current basis. `obj_val` holds the negated objective.
    fn reduced(&self, cost: &[Rational]) -> (Vec<Rational>, Rational) {
        let mut obj = cost.to_vec();
        let mut val = Rational::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (j, a) in self.rows[i].iter().enumerate() {
                if !a.is_zero() {
                    obj[j] -= cb * a;
                }
            }
            val -= cb * &self.rhs[i];
        }
        (obj, val)
    }

    fn optimize(&mut self, cost: &[Rational]) -> Phase2 {
        let (mut obj, mut val) = self.reduced(cost);
        loop {
            // Bland: lowest-index improving column
            let Some(c) = (0..self.ncols).find(|&j| !self.blocked[j] && obj[j].is_negative()) else {
                return Phase2::Optimal;
            };
            let mut best: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            let Some((r, _)) = best else {
                return Phase2::Unbounded;
            };
            self.pivot(r, c, &mut obj, &mut val);
        }
    }

    /// Phase one. Returns false when the system is infeasible. On success
    /// artificial columns are removed from the basis and blocked.
    pub(crate) fn phase_one(&mut self, base_cols: usize) -> bool {
        if base_cols == self.ncols {
            return true;
        }
        let cost: Vec<Rational> = (0..self.ncols)
            .map(|j| if j >= base_cols { Rational::from_integer(1.into()) } else { Rational::zero() })
            .collect();
        self.optimize(&cost);
        let infeasible = self
            .basis
            .iter()
            .zip(&self.rhs)
            .any(|(&b, v)| b >= base_cols && v.is_positive());
        if infeasible {
            return false;
        }
        // drive remaining zero-level artificials out, dropping redundant rows
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] >= base_cols {
                match (0..base_cols).find(|&j| !self.rows[i][j].is_zero()) {
                    Some(c) => {
                        let mut dummy = vec![Rational::zero(); self.ncols];
                        let mut dv = Rational::zero();
                        self.pivot(i, c, &mut dummy, &mut dv);
                    }
                    None => {
                        self.rows.remove(i);
                        self.rhs.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for j in base_cols..self.ncols {
            self.blocked[j] = true;
        }
        true
    }

    pub(crate) fn phase_two(&mut self, cost: &[Rational]) -> Phase2 {
        let mut full = cost.to_vec();
        full.resize(self.ncols, Rational::zero());
        self.optimize(&full)
    }

    pub(crate) fn values(&self, ncols: usize) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); ncols];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < ncols {
                x[b] = self.rhs[i].clone();
            }
        }
        x
    }
}
