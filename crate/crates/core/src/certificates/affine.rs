//! "For every integer point of a polyhedron, an affine function clears a
//! threshold", decided through the rational relaxation with an integer
//! witness search when the relaxation fails.

use num_traits::Zero;

use super::{CertError, WITNESS_NODES};
use crate::lincons::{Halfspace, LinError, Polyhedron};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Outcome {
    Holds,
    Violated(Vec<i64>),
    Unknown(String),
}

/// Checks `coeffs . x + constant >= threshold` (or `>` when `strict`) for
/// every integer `x` in `region`.
pub(crate) fn forall(
    region: &Polyhedron,
    coeffs: &[Rational],
    constant: &Rational,
    threshold: &Rational,
    strict: bool,
) -> Result<Outcome, CertError> {
    match region.minimize(coeffs, constant) {
        Ok(None) => return Ok(Outcome::Holds),
        Ok(Some((min, _))) if min > *threshold || (!strict && min == *threshold) => return Ok(Outcome::Holds),
        Ok(Some(_)) | Err(LinError::Unbounded) => {}
        Err(e) => return Err(e.into()),
    }
    // integer violation: L f <= B with L clearing every denominator of f
    let scale = Rational::from_integer(rational::lcm_of_denominators(coeffs.iter().chain(std::iter::once(constant))));
    let scaled_t = threshold * &scale;
    let bound = if strict { scaled_t.floor() } else { scaled_t.ceil() - Rational::from_integer(1.into()) };
    let row = Halfspace::new(coeffs.iter().map(|a| -(a * &scale)).collect(), -(bound - constant * &scale));
    let violating = region.clone().with(row);
    match violating.integer_point(WITNESS_NODES) {
        Some(x) => Ok(Outcome::Violated(x)),
        None if violating.is_empty() => Ok(Outcome::Holds),
        None => Ok(Outcome::Unknown("relaxation fails but no integer witness was found".into())),
    }
}

/// Some integer point of the union, for conditions whose violation does not
/// depend on the valuation.
pub(crate) fn some_point(regions: &[Polyhedron]) -> Option<Vec<i64>> {
    regions.iter().find_map(|p| p.integer_point(WITNESS_NODES))
}

/// `coeffs . (A rv)` for every program variable row of `A`.
pub(crate) fn shift(a: &[Vec<i64>], rv: &[i64]) -> Vec<Rational> {
    a.iter()
        .map(|row| rational::int(row.iter().zip(rv).map(|(x, r)| x * r).sum()))
        .collect()
}

/// Rewrites `rows . pv' >= b` with `pv' = pv + d` into `rows . pv >= b - rows . d`.
pub(crate) fn shifted(p: &Polyhedron, d: &[Rational]) -> Polyhedron {
    Polyhedron {
        dim: p.dim,
        rows: p
            .rows
            .iter()
            .map(|h| {
                let off: Rational = h.coeffs.iter().zip(d).filter(|(c, _)| !c.is_zero()).map(|(c, x)| c * x).sum();
                Halfspace::new(h.coeffs.clone(), &h.bound - off)
            })
            .collect(),
    }
}

pub(crate) fn intersect(a: &Polyhedron, b: &Polyhedron) -> Polyhedron {
    let mut rows = a.rows.clone();
    rows.extend(b.rows.iter().cloned());
    Polyhedron { dim: a.dim, rows }
}

pub(crate) fn negate(v: &[Rational]) -> Vec<Rational> {
    v.iter().map(|x| -x).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn half_line() -> Polyhedron {
        Polyhedron::new(1, vec![Halfspace::new(vec![int(1)], int(1))]).unwrap()
    }

    #[test]
    fn relaxation_and_integer_cases() {
        let p = half_line();
        assert_eq!(forall(&p, &[int(1)], &int(1), &int(2), false).unwrap(), Outcome::Holds);
        assert_eq!(forall(&p, &[int(1)], &int(1), &int(2), true).unwrap(), Outcome::Violated(vec![1]));
        // x/2 > 0 on x >= 1 holds although the integer bound is 1/2
        assert_eq!(forall(&p, &[ratio(1, 2)], &int(0), &int(0), true).unwrap(), Outcome::Holds);
        match forall(&p, &[int(-1)], &int(0), &int(-5), false).unwrap() {
            Outcome::Violated(x) => assert!(x[0] > 5),
            o => panic!("{o:?}"),
        }
    }
}
