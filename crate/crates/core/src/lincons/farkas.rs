use num_traits::Zero;

use super::{Cmp, LinError, LinExpr, LinSystem, Polyhedron, VarId, VarKind};

/// `sum_j coeffs[j] * x_j + constant >= 0`, where the coefficients are
/// linear expressions in unknowns of a `LinSystem`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineTemplate {
    pub coeffs: Vec<LinExpr>,
    pub constant: LinExpr,
}

/// Adds to `sys` multipliers `lambda >= 0` (one per premise row) with
///
/// ```text
/// coeffs[j] - sum_k lambda_k * A[k][j] = 0        for every j
/// constant  + sum_k lambda_k * b[k]     >= 0
/// ```
///
/// so that any solution makes the template nonnegative on every rational
/// point of the premise `A x >= b`. Returns the multiplier variables.
pub fn farkas_encode(sys: &mut LinSystem, premise: &Polyhedron, conclusion: &AffineTemplate) -> Result<Vec<VarId>, LinError> {
    if conclusion.coeffs.len() != premise.dim {
        return Err(LinError::Dimension { expected: premise.dim, got: conclusion.coeffs.len() });
    }
    if premise.is_empty() {
        return Err(LinError::EmptyPremise);
    }
    let base = sys.num_vars();
    let lambdas: Vec<VarId> = (0..premise.rows.len())
        .map(|k| sys.add_var(format!("lambda{}_{k}", base), VarKind::NonNeg))
        .collect();
    for j in 0..premise.dim {
        let mut e = conclusion.coeffs[j].clone();
        for (k, row) in premise.rows.iter().enumerate() {
            if !row.coeffs[j].is_zero() {
                e.add_term(lambdas[k], -row.coeffs[j].clone());
            }
        }
        sys.constrain(e, Cmp::Eq, Zero::zero());
    }
    let mut e = conclusion.constant.clone();
    for (k, row) in premise.rows.iter().enumerate() {
        e.add_term(lambdas[k], row.bound.clone());
    }
    sys.constrain(e, Cmp::Ge, Zero::zero());
    Ok(lambdas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lincons::{Halfspace, LpOutcome};
    use crate::rational::int;

    fn template(sys: &mut LinSystem, shift: i64) -> (VarId, VarId, AffineTemplate) {
        let a = sys.add_var("a", VarKind::Free);
        let c = sys.add_var("c", VarKind::Free);
        let mut constant = LinExpr::var(c);
        constant.constant = int(-shift);
        (a, c, AffineTemplate { coeffs: vec![LinExpr::var(a)], constant })
    }

    #[test]
    fn empty_premise_is_reported() {
        let p = Polyhedron::new(
            1,
            vec![Halfspace::new(vec![int(1)], int(1)), Halfspace::new(vec![int(-1)], int(0))],
        )
        .unwrap();
        let mut sys = LinSystem::new();
        let (_, _, t) = template(&mut sys, 0);
        assert_eq!(farkas_encode(&mut sys, &p, &t), Err(LinError::EmptyPremise));
    }

    #[test]
    fn half_line_premise_matches_hand_elimination() {
        // x >= 1 implies a x + c >= 1  iff  a >= 0 and a + c >= 1
        let p = Polyhedron::new(1, vec![Halfspace::new(vec![int(1)], int(1))]).unwrap();
        let probes = [(-2, 5), (0, 1), (0, 0), (1, 0), (3, -2), (2, -1), (1, -1), (-1, 3), (5, -4), (5, -5)];
        for (av, cv) in probes {
            let mut sys = LinSystem::new();
            let (a, c, t) = template(&mut sys, 1);
            farkas_encode(&mut sys, &p, &t).unwrap();
            sys.constrain(LinExpr::var(a), Cmp::Eq, int(av));
            sys.constrain(LinExpr::var(c), Cmp::Eq, int(cv));
            let feasible = matches!(sys.solve().unwrap(), LpOutcome::Feasible { .. });
            assert_eq!(feasible, av >= 0 && av + cv >= 1, "a={av} c={cv}");
        }
    }

    #[test]
    fn single_point_premise() {
        let p = Polyhedron::new(
            1,
            vec![Halfspace::new(vec![int(1)], int(1)), Halfspace::new(vec![int(-1)], int(-1))],
        )
        .unwrap();
        for (av, cv) in [(3, -3), (3, -4), (-7, 7), (-7, 6), (0, 0)] {
            let mut sys = LinSystem::new();
            let (a, c, t) = template(&mut sys, 0);
            farkas_encode(&mut sys, &p, &t).unwrap();
            sys.constrain(LinExpr::var(a), Cmp::Eq, int(av));
            sys.constrain(LinExpr::var(c), Cmp::Eq, int(cv));
            let feasible = matches!(sys.solve().unwrap(), LpOutcome::Feasible { .. });
            assert_eq!(feasible, av + cv >= 0);
        }
    }
}
