//! Explicit upper bounds on `P(T >= k)` obtained from supermartingale
//! certificates: the exponential-martingale bound for difference-bounded
//! certificates and the truncation bound for general ones.
//!
//! Transcendental terms are evaluated with [`Hp`]; every reported bound is
//! rounded up to 15 significant digits so it never falls below the exact
//! value of the formula.

use std::io::Write;

use astro_float::BigFloat;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::precision::Hp;
use crate::rational::{self, Rational};

const SIG_DIGITS: usize = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TailError {
    #[error("t = {t} violates exp(c t) - 1 - c t - c^2 t^2 / 2 <= (delta^2 / 4) t^2")]
    TViolatesSmallness { t: f64 },
    #[error("invalid bound input: {0}")]
    InvalidInput(String),
    #[error("bound series is not monotone at k = {k}")]
    NonMonotone { k: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    DiffBounded,
    General,
}

impl BoundKind {
    pub fn method(&self) -> &'static str {
        match self {
            BoundKind::DiffBounded => "diff_bounded",
            BoundKind::General => "general",
        }
    }
}

/// Certificate data feeding a bound: `E X_0 = h(in, pv0)`, the lower bound
/// `delta` on the expected absolute change, and for difference-bounded
/// certificates the almost-sure step bound `c_diff`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundInput {
    #[serde(with = "rational::serde_str")]
    pub e_x0: Rational,
    #[serde(with = "rational::serde_str")]
    pub delta: Rational,
    #[serde(with = "rational::serde_str::option")]
    pub c_diff: Option<Rational>,
    pub kind: BoundKind,
}

impl BoundInput {
    pub fn new(e_x0: Rational, delta: Rational, c_diff: Option<Rational>, kind: BoundKind) -> Result<Self, TailError> {
        if !e_x0.is_positive() {
            return Err(TailError::InvalidInput(format!("E X0 must be positive, got {e_x0}")));
        }
        if !delta.is_positive() {
            return Err(TailError::InvalidInput(format!("delta must be positive, got {delta}")));
        }
        match (&c_diff, kind) {
            (None, BoundKind::DiffBounded) => {
                return Err(TailError::InvalidInput("difference-bounded bounds need a step bound".into()))
            }
            (Some(c), _) if !c.is_positive() => {
                return Err(TailError::InvalidInput(format!("step bound must be positive, got {c}")))
            }
            _ => {}
        }
        Ok(BoundInput { e_x0, delta, c_diff, kind })
    }

    pub fn diff(e_x0: Rational, delta: Rational, c_diff: Rational) -> Result<Self, TailError> {
        Self::new(e_x0, delta, Some(c_diff), BoundKind::DiffBounded)
    }

    pub fn general(e_x0: Rational, delta: Rational) -> Result<Self, TailError> {
        Self::new(e_x0, delta, None, BoundKind::General)
    }
}

/// Constants of the general bound `C / sqrt(k) + E X0 / M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralConstants {
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "M")]
    pub m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub k: u64,
    pub bound: f64,
    pub method: BoundKind,
    pub t: Option<f64>,
    pub constants: Option<GeneralConstants>,
    pub valid: bool,
}

/// Smallness gap `exp(c t) - 1 - c t - c^2 t^2 / 2 - (delta^2 / 4) t^2`,
/// nonpositive exactly when `t` is admissible.
fn smallness_gap(hp: &Hp, c: &BigFloat, delta_sq_over_4: &BigFloat, t: &BigFloat) -> BigFloat {
    let ct = hp.mul(c, t);
    let e = hp.exp(&ct);
    let ct2 = hp.mul(&ct, &ct);
    let half = hp.div(&ct2, &hp.int(2));
    let t2 = hp.mul(t, t);
    let rhs = hp.mul(delta_sq_over_4, &t2);
    let mut g = hp.sub(&e, &hp.int(1));
    g = hp.sub(&g, &ct);
    g = hp.sub(&g, &half);
    hp.sub(&g, &rhs)
}

fn is_admissible(hp: &Hp, c: &BigFloat, d4: &BigFloat, t: &BigFloat) -> bool {
    let g = smallness_gap(hp, c, d4, t);
    !(g.is_positive() && !g.is_zero())
}

/// Largest admissible `t` for step bound `c` and `delta`, by bisection to
/// relative precision `1e-12`. The returned value is itself admissible.
pub fn t_max(c_diff: &Rational, delta: &Rational) -> f64 {
    let hp = Hp::new();
    let c = hp.rational(c_diff);
    let d4 = hp.rational(&(delta * delta / rational::int(4)));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while is_admissible(&hp, &c, &d4, &hp.f64(hi)) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return lo;
        }
    }
    if lo == 0.0 {
        // admissible region is (0, hi); find some admissible point first
        lo = hi;
        while !is_admissible(&hp, &c, &d4, &hp.f64(lo)) {
            hi = lo;
            lo /= 2.0;
        }
    }
    while (hi - lo) > 1e-12 * lo {
        let mid = 0.5 * (lo + hi);
        if is_admissible(&hp, &c, &d4, &hp.f64(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `(1 - exp(-t E)) / (1 - (1 + a t^2)^(-k))` with `a = delta^2 / 4`
/// (difference-bounded) or `delta^2 / 16` (general).
fn exp_martingale_bound(hp: &Hp, e_x0: &BigFloat, a: &BigFloat, t: &BigFloat, k: u64) -> BigFloat {
    let te = hp.mul(t, e_x0);
    let neg = hp.sub(&hp.int(0), &te);
    let num = hp.sub(&hp.int(1), &hp.exp(&neg));
    let t2 = hp.mul(t, t);
    let base = hp.add(&hp.int(1), &hp.mul(a, &t2));
    let kf = BigFloat::from_u64(k, hp.bits());
    let pow = hp.pow_near_one(&base, &hp.sub(&hp.int(0), &kf));
    let den = hp.sub(&hp.int(1), &pow);
    hp.div(&num, &den)
}

fn finish(hp: &Hp, value: &BigFloat) -> f64 {
    let one = hp.int(1);
    if !hp.lt(value, &one) {
        return 1.0;
    }
    hp.to_f64_up(value, SIG_DIGITS).min(1.0)
}

/// Difference-bounded bound at `k`. With `t = None` the default
/// `t = min(1 / sqrt(k), t_max)` is used; an explicit `t` is checked
/// against the smallness condition.
pub fn bound_diff(input: &BoundInput, k: u64, t: Option<f64>) -> Result<BoundResult, TailError> {
    let c_diff = match (&input.c_diff, input.kind) {
        (Some(c), BoundKind::DiffBounded) => c,
        _ => return Err(TailError::InvalidInput("bound_diff needs a difference-bounded input".into())),
    };
    if k == 0 {
        return Err(TailError::InvalidInput("k must be at least 1".into()));
    }
    let hp = Hp::new();
    let c = hp.rational(c_diff);
    let d4 = hp.rational(&(&input.delta * &input.delta / rational::int(4)));
    let t_hp = match t {
        Some(t) => {
            let tb = hp.f64(t);
            if !(t > 0.0 && t.is_finite()) || !is_admissible(&hp, &c, &d4, &tb) {
                return Err(TailError::TViolatesSmallness { t });
            }
            tb
        }
        None => {
            let kf = BigFloat::from_u64(k, hp.bits());
            let inv_sqrt = hp.div(&hp.int(1), &hp.sqrt(&kf));
            let tm = hp.f64(t_max(c_diff, &input.delta));
            if hp.lt(&inv_sqrt, &tm) {
                inv_sqrt
            } else {
                tm
            }
        }
    };
    let e = hp.rational(&input.e_x0);
    let v = exp_martingale_bound(&hp, &e, &d4, &t_hp, k);
    let t_out = hp.to_f64(&t_hp);
    Ok(BoundResult {
        k,
        bound: finish(&hp, &v),
        method: BoundKind::DiffBounded,
        t: Some(t_out),
        constants: None,
        valid: true,
    })
}

/// Constants `c`, `C`, `N` of the general bound (independent of `k`).
#[derive(Debug, Clone)]
pub struct GeneralSetup {
    pub c: f64,
    pub big_c: f64,
    pub n: u64,
    c_hp: BigFloat,
    big_c_hp: BigFloat,
}

/// `(e^c - 1 - c - c^2/2) / c^2`.
fn series_ratio(hp: &Hp, c: &BigFloat) -> BigFloat {
    let e = hp.exp(c);
    let c2 = hp.mul(c, c);
    let mut g = hp.sub(&e, &hp.int(1));
    g = hp.sub(&g, c);
    g = hp.sub(&g, &hp.div(&c2, &hp.int(2)));
    hp.div(&g, &c2)
}

/// Largest `c` in (0,1) with `(e^c - 1 - c - c^2/2) / c^2 <= delta^2 / 16`.
/// When the whole interval qualifies, `1 - 2^-40` is used.
pub fn general_c(delta: &Rational) -> f64 {
    let hp = Hp::new();
    let target = hp.rational(&(delta * delta / rational::int(16)));
    let top = 1.0 - f64::powi(2.0, -40);
    if hp.le(&series_ratio(&hp, &hp.f64(top)), &target) {
        return top;
    }
    let (mut lo, mut hi) = (0.0f64, top);
    // the ratio tends to 1/6 * c as c -> 0, so tiny c always qualifies
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if hp.le(&series_ratio(&hp, &hp.f64(mid)), &target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn general_setup(input: &BoundInput) -> GeneralSetup {
    let hp = Hp::new();
    let c = general_c(&input.delta);
    let a_q = &input.delta * &input.delta / rational::int(16);
    let a = hp.rational(&a_q);
    let e = hp.rational(&input.e_x0);
    let neg_a = hp.sub(&hp.int(0), &a);
    let one_minus = hp.sub(&hp.int(1), &hp.exp(&neg_a));
    // C = (3/2) E * 2 / (1 - e^{-a}) = 3 E / (1 - e^{-a})
    let big_c = hp.div(&hp.mul(&hp.int(3), &e), &one_minus);
    let half_target = hp.div(&one_minus, &hp.int(2));
    let three_halves = hp.div(&hp.int(3), &hp.int(2));
    // both conditions are monotone in k; scan for the first k meeting both
    let mut n: u64 = 1;
    loop {
        let kf = BigFloat::from_u64(n, hp.bits());
        let z = hp.div(&e, &hp.sqrt(&kf));
        let nz = hp.sub(&hp.int(0), &z);
        let first = hp.div(&hp.sub(&hp.int(1), &hp.exp(&nz)), &z);
        let base = hp.add(&hp.int(1), &hp.div(&a, &kf));
        let pow = hp.pow_near_one(&base, &hp.sub(&hp.int(0), &kf));
        let second = hp.sub(&hp.int(1), &pow);
        if hp.le(&first, &three_halves) && hp.le(&half_target, &second) {
            break;
        }
        n = if n < 1 << 20 { n + 1 } else { n * 2 };
    }
    let c_hp = hp.f64(c);
    let big_c_f = hp.to_f64_up(&big_c, SIG_DIGITS);
    GeneralSetup { c, big_c: big_c_f, n, c_hp, big_c_hp: big_c }
}

/// General bound at `k`: `C / sqrt(k) + E / M` with `M = (c^2 k)^(1/6)`,
/// valid only when `M > max(E, N^(1/6))`; otherwise the trivial bound 1.
pub fn bound_general(input: &BoundInput, k: u64) -> Result<BoundResult, TailError> {
    let setup = general_setup(input);
    bound_general_with(input, &setup, k)
}

pub fn bound_general_with(input: &BoundInput, setup: &GeneralSetup, k: u64) -> Result<BoundResult, TailError> {
    if k == 0 {
        return Err(TailError::InvalidInput("k must be at least 1".into()));
    }
    let hp = Hp::new();
    let e = hp.rational(&input.e_x0);
    let kf = BigFloat::from_u64(k, hp.bits());
    let c2k = hp.mul(&hp.mul(&setup.c_hp, &setup.c_hp), &kf);
    let sixth = hp.div(&hp.int(1), &hp.int(6));
    let m = hp.pow(&c2k, &sixth);
    let n_root = hp.pow(&BigFloat::from_u64(setup.n, hp.bits()), &sixth);
    let valid = hp.lt(&e, &m) && hp.lt(&n_root, &m);
    let m_f = hp.to_f64(&m);
    let constants = Some(GeneralConstants { c: setup.c, big_c: setup.big_c, n: setup.n, m: m_f });
    let bound = if valid {
        let v = hp.add(&hp.div(&setup.big_c_hp, &hp.sqrt(&kf)), &hp.div(&e, &m));
        finish(&hp, &v)
    } else {
        1.0
    };
    Ok(BoundResult { k, bound, method: BoundKind::General, t: None, constants, valid })
}

/// Maps the bound for `input.kind` over `ks`, checking that the emitted
/// values are nonincreasing in `k`.
pub fn bound_series(input: &BoundInput, ks: &[u64]) -> Result<Vec<BoundResult>, TailError> {
    let out: Vec<BoundResult> = match input.kind {
        BoundKind::DiffBounded => ks.iter().map(|&k| bound_diff(input, k, None)).collect::<Result<_, _>>()?,
        BoundKind::General => {
            let setup = general_setup(input);
            ks.iter().map(|&k| bound_general_with(input, &setup, k)).collect::<Result<_, _>>()?
        }
    };
    let mut order: Vec<&BoundResult> = out.iter().collect();
    order.sort_by_key(|r| r.k);
    for w in order.windows(2) {
        if w[1].bound > w[0].bound {
            return Err(TailError::NonMonotone { k: w[1].k });
        }
    }
    Ok(out)
}

/// CSV with columns `k, bound, method, t, valid`.
pub fn write_csv<W: Write>(out: &mut W, rows: &[BoundResult]) -> std::io::Result<()> {
    writeln!(out, "k,bound,method,t,valid")?;
    for r in rows {
        let t = r.t.map(|t| t.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.k, r.bound, r.method.method(), t, r.valid)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn walk_input() -> BoundInput {
        BoundInput::diff(int(2), int(1), int(1)).unwrap()
    }

    #[test]
    fn explicit_t_is_checked() {
        assert!(matches!(bound_diff(&walk_input(), 100, Some(5.0)), Err(TailError::TViolatesSmallness { .. })));
        let r = bound_diff(&walk_input(), 100, Some(0.1)).unwrap();
        assert!((r.bound - 0.8204).abs() < 1e-3, "{}", r.bound);
    }

    #[test]
    fn t_max_is_admissible_boundary() {
        let tm = t_max(&int(1), &int(1));
        let hp = Hp::new();
        let c = hp.int(1);
        let d4 = hp.rational(&ratio(1, 4));
        assert!(is_admissible(&hp, &c, &d4, &hp.f64(tm)));
        assert!(!is_admissible(&hp, &c, &d4, &hp.f64(tm * (1.0 + 1e-9))));
    }

    #[test]
    fn vanishing_expectation_gives_vanishing_bound() {
        let input = BoundInput::diff(ratio(1, 1_000_000_000), int(1), int(1)).unwrap();
        assert!(bound_diff(&input, 100, None).unwrap().bound < 1e-6);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(BoundInput::diff(int(0), int(1), int(1)).is_err());
        assert!(BoundInput::new(int(1), int(1), None, BoundKind::DiffBounded).is_err());
        assert!(bound_diff(&BoundInput::general(int(1), int(1)).unwrap(), 4, None).is_err());
    }

    #[test]
    fn general_below_threshold_is_trivial() {
        let r = bound_general(&BoundInput::general(int(2), int(1)).unwrap(), 10).unwrap();
        assert!(!r.valid);
        assert_eq!(r.bound, 1.0);
    }

    #[test]
    fn empty_series() {
        assert!(bound_series(&walk_input(), &[]).unwrap().is_empty());
    }
}
