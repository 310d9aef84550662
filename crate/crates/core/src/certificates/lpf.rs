use num_traits::{Signed, Zero};

use super::affine::{self, Outcome};
use super::smap::Tracker;
use super::{BoxDomain, CertError, CheckReport, Condition, Domain, LinearProgressFunction, Mode, Witness, DEFAULT_BOX};
use crate::lang::SingleWhileLoop;
use crate::rational::Rational;

/// `(a^T A)_j` for every sampling variable.
pub(crate) fn weights(a: &[Rational], matrix: &[Vec<i64>], cols: usize) -> Vec<Rational> {
    (0..cols)
        .map(|j| a.iter().zip(matrix).map(|(ai, row)| ai * Rational::from_integer(row[j].into())).sum())
        .collect()
}

/// Drift `sum_j w_j mu_j` and variance `sum_j w_j^2 sigma_j^2`.
pub(crate) fn drift_and_variance(l: &SingleWhileLoop, w: &[Rational]) -> (Rational, Rational) {
    let moments = l.sampling.moments();
    let drift = w.iter().zip(&moments).map(|(w, m)| w * &m.mean).sum();
    let variance = w.iter().zip(&moments).map(|(w, m)| w * w * &m.variance).sum();
    (drift, variance)
}

/// Checks L1 to L3. L2 is decided symbolically for affine guards, and on
/// the box otherwise (the default box when `domain` is symbolic).
pub fn check_lpf(l: &SingleWhileLoop, cand: &LinearProgressFunction, domain: &Domain) -> Result<CheckReport, CertError> {
    let matrix = l.incremental.as_ref().ok_or(CertError::NotIncremental)?;
    if cand.a.len() != l.pvars.len() {
        return Err(CertError::Dimension { expected: l.pvars.len(), got: cand.a.len() });
    }
    let mut t = Tracker::new(&[Condition::L1, Condition::L2, Condition::L3]);
    let mut notices = Vec::new();

    let w = weights(&cand.a, matrix, l.rvars.len());
    let (drift, variance) = drift_and_variance(l, &w);
    if drift.is_positive() {
        t.violate(Condition::L3, None, None, format!("drift sum (a^T A)_i mu_i = {drift} > 0"));
    } else if !variance.is_positive() {
        t.violate(Condition::L3, None, None, format!("variance sum (a^T A)_i^2 sigma_i^2 = {variance} is not positive"));
    }

    let symbolic_guards = match domain {
        Domain::Symbolic => l.guard_dnf(),
        Domain::Box(_) => None,
    };
    let mode = match symbolic_guards {
        Some(guards) => {
            for p in &guards {
                match affine::forall(p, &cand.a, &cand.c, &Rational::zero(), true)? {
                    Outcome::Holds => {}
                    Outcome::Violated(pv) => {
                        let v = cand.eval(&pv);
                        t.violate(Condition::L2, Some(pv), None, format!("h(pv) = {v} <= 0 while the guard holds"));
                    }
                    Outcome::Unknown(why) => t.unknown(Condition::L2, why),
                }
            }
            Mode::Symbolic
        }
        None => {
            let b = match domain {
                Domain::Box(b) => b.clone(),
                Domain::Symbolic => {
                    notices.push(format!(
                        "guard is not affine; L2 checked on the box [{}, {}] per variable",
                        DEFAULT_BOX.0, DEFAULT_BOX.1
                    ));
                    BoxDomain::uniform(l.pvars.len(), DEFAULT_BOX.0, DEFAULT_BOX.1)
                }
            };
            b.validate(l.pvars.len())?;
            for pv in b.points() {
                if l.holds(&pv) {
                    let v = cand.eval(&pv);
                    if !v.is_positive() {
                        t.violate(Condition::L2, Some(pv), None, format!("h(pv) = {v} <= 0 while the guard holds"));
                        break;
                    }
                }
            }
            Mode::Bounded { ranges: b.ranges }
        }
    };
    Ok(t.finish(mode, notices))
}

pub(super) fn replay(l: &SingleWhileLoop, f: &LinearProgressFunction, w: &Witness) -> Result<bool, CertError> {
    let matrix = l.incremental.as_ref().ok_or(CertError::NotIncremental)?;
    Ok(match w.condition {
        Condition::L2 => match &w.pv {
            Some(pv) if pv.len() == l.pvars.len() => l.holds(pv) && !f.eval(pv).is_positive(),
            _ => false,
        },
        Condition::L3 => {
            let (drift, variance) = drift_and_variance(l, &weights(&f.a, matrix, l.rvars.len()));
            drift.is_positive() || !variance.is_positive()
        }
        _ => false,
    })
}
