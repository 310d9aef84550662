//! Monte Carlo tail estimates for loops and for hand-specified integer or
//! rational processes, with Wilson confidence intervals.
//!
//! Trial `i` always draws from the ChaCha8 stream `i` of the given seed, so
//! results do not depend on how rayon schedules the trials.

use std::io::Write;
use std::sync::Arc;

use astro_float::BigFloat;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dist::DiscreteDist;
use crate::lang::{EvalError, SingleWhileLoop};
use crate::precision::Hp;
use crate::rational::{self, Rational};
use crate::semantics::{run_with, samplers};

pub const Z_95: f64 = 1.959963984540054;
pub const Z_99: f64 = 2.5758293035489;
pub const Z_999: f64 = 3.2905267314919;

pub const MIN_TRIALS: u64 = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("at least {MIN_TRIALS} trials are required, got {0}")]
    TooFewTrials(u64),
    #[error("no tail indices requested")]
    NoIndices,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("initial valuation has {got} entries, the loop has {expected} program variables")]
    Arity { expected: usize, got: usize },
    #[error("process values do not fit the integer lattice used for simulation")]
    ProcessOverflow,
    #[error("step law for step {0} is invalid: {1}")]
    InvalidStepLaw(u64, String),
}

/// Wilson score interval for `hits` successes out of `n` trials.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = hits as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if hits == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if hits == n { 1.0 } else { (center + half).min(1.0) };
    (lo.min(p), hi.max(p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub k: u64,
    pub estimate: f64,
    pub hits: u64,
    pub wilson95: (f64, f64),
    pub wilson99: (f64, f64),
    pub trials: u64,
    pub seed: u64,
}

impl TailEstimate {
    fn new(k: u64, hits: u64, trials: u64, seed: u64) -> Self {
        TailEstimate {
            k,
            estimate: hits as f64 / trials as f64,
            hits,
            wilson95: wilson_interval(hits, trials, Z_95),
            wilson99: wilson_interval(hits, trials, Z_99),
            trials,
            seed,
        }
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Tallies `T >= k` for every `k` from per-trial stopping times, where
/// `None` means the path survived the horizon `max(ks)`.
fn tally(times: &[Option<u64>], ks: &[u64], trials: u64, seed: u64) -> Vec<TailEstimate> {
    let out: Vec<TailEstimate> = ks
        .iter()
        .map(|&k| {
            let hits = times.iter().filter(|t| t.is_none_or(|t| t >= k)).count() as u64;
            TailEstimate::new(k, hits, trials, seed)
        })
        .collect();
    // same paths for every k: counts are monotone by construction
    let mut sorted: Vec<&TailEstimate> = out.iter().collect();
    sorted.sort_by_key(|e| e.k);
    assert!(sorted.windows(2).all(|w| w[0].hits >= w[1].hits), "tail counts must be nonincreasing");
    out
}

fn check_args(ks: &[u64], trials: u64) -> Result<u64, SimError> {
    if trials < MIN_TRIALS {
        return Err(SimError::TooFewTrials(trials));
    }
    ks.iter().copied().max().ok_or(SimError::NoIndices)
}

/// Estimates `P(T >= k)` for each `k` in `ks` from `trials` sampled paths of
/// the loop started at `(In, pv0)`; all `k` share the same paths.
pub fn estimate_tail(
    l: &SingleWhileLoop,
    pv0: &[i64],
    ks: &[u64],
    trials: u64,
    seed: u64,
) -> Result<Vec<TailEstimate>, SimError> {
    let horizon = check_args(ks, trials)?;
    if pv0.len() != l.pvars.len() {
        return Err(SimError::Arity { expected: l.pvars.len(), got: pv0.len() });
    }
    let samplers = samplers(l);
    let times: Vec<Option<u64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let r = run_with(l, pv0, &samplers, &mut rng, horizon)?;
            Ok(r.terminated.then_some(r.steps))
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(tally(&times, ks, trials, seed))
}

/// Probability of one outcome of a step law.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepProb {
    Exact(Rational),
    /// `e^{-q}`
    ExpNeg(Rational),
    /// Whatever mass the other outcomes leave.
    Rest,
}

/// Distribution of one increment with probabilities turned into 64-bit
/// cumulative thresholds in high precision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepLaw {
    values: Vec<Rational>,
    thresholds: Vec<u64>,
}

impl StepLaw {
    pub fn new(outcomes: Vec<(Rational, StepProb)>, hp: &mut Hp) -> Result<Self, String> {
        if outcomes.is_empty() {
            return Err("empty step law".into());
        }
        let rests = outcomes.iter().filter(|(_, p)| *p == StepProb::Rest).count();
        if rests > 1 {
            return Err("at most one outcome may take the remaining mass".into());
        }
        let probs: Vec<Option<BigFloat>> = outcomes
            .iter()
            .map(|(_, p)| match p {
                StepProb::Exact(q) => Some(hp.rational(q)),
                StepProb::ExpNeg(q) => Some(hp.exp_rational(&-q.clone())),
                StepProb::Rest => None,
            })
            .collect();
        let mut known = hp.int(0);
        for p in probs.iter().flatten() {
            known = hp.add(&known, p);
        }
        let one = hp.int(1);
        let rest = hp.sub(&one, &known);
        let slack = hp.f64(1e-25);
        if hp.lt(&rest, &hp.sub(&hp.int(0), &slack)) || (rests == 0 && hp.lt(&slack, &rest)) {
            return Err("probabilities do not sum to 1".into());
        }
        let scale = hp.f64(18446744073709551616.0);
        let mut cum = hp.int(0);
        let mut thresholds = Vec::with_capacity(outcomes.len());
        for p in probs {
            let p = p.unwrap_or_else(|| rest.clone());
            cum = hp.add(&cum, &p);
            thresholds.push(floor_u64(hp, &hp.mul(&cum, &scale)));
        }
        // the last threshold covers every draw
        *thresholds.last_mut().expect("nonempty") = u64::MAX;
        Ok(StepLaw { values: outcomes.into_iter().map(|(v, _)| v).collect(), thresholds })
    }

    pub fn from_dist(d: &DiscreteDist, hp: &mut Hp) -> Result<Self, String> {
        let support = d.support().ok_or("step laws need finite support")?;
        StepLaw::new(
            support.into_iter().map(|(v, p)| (rational::int(v), StepProb::Exact(p))).collect(),
            hp,
        )
    }

    fn index<R: RngCore>(&self, rng: &mut R) -> usize {
        let u = rng.next_u64();
        self.thresholds.partition_point(|t| *t <= u).min(self.thresholds.len() - 1)
    }
}

/// `floor(x)` clamped to `u64`, exact even where `f64` is too coarse.
fn floor_u64(hp: &mut Hp, x: &BigFloat) -> u64 {
    let approx = hp.to_f64(x);
    if approx <= 0.0 {
        return 0;
    }
    if approx >= 18446744073709551615.0 {
        return u64::MAX;
    }
    let base = approx as u64;
    // the residual is a few thousand units at most and exact in f64
    let residual = hp.to_f64(&hp.sub(x, &BigFloat::from_u64(base, hp.bits()))).floor();
    (base as i128 + residual as i128).clamp(0, u64::MAX as i128) as u64
}

pub type IndexedLaw = Arc<dyn Fn(u64, &mut Hp) -> Result<StepLaw, String> + Send + Sync>;

/// How `X_n - X_{n-1}` is distributed at step `n >= 1`.
#[derive(Clone)]
pub enum Increment {
    Stationary(DiscreteDist),
    Indexed(IndexedLaw),
}

/// An abstract process `X_0, X_1, ...` stopped at `Z = min{n | X_n <= 0}`.
#[derive(Clone)]
pub struct ProcessSpec {
    pub initial: Rational,
    pub increment: Increment,
}

impl ProcessSpec {
    /// Increment `+1` with probability `e^{-1/n^2}`, else `-4 n^2`, from
    /// `X_0 = 1/2`.
    pub fn vanishing_drift_counterexample() -> Self {
        ProcessSpec {
            initial: rational::ratio(1, 2),
            increment: Increment::Indexed(Arc::new(|n, hp| {
                let n2 = rational::int(n as i64) * rational::int(n as i64);
                StepLaw::new(
                    vec![
                        (rational::int(1), StepProb::ExpNeg(n2.recip())),
                        (-n2 * rational::int(4), StepProb::Rest),
                    ],
                    hp,
                )
            })),
        }
    }
}

/// Estimates `P(Z >= k)` for the process.
pub fn estimate_process_tail(spec: &ProcessSpec, ks: &[u64], trials: u64, seed: u64) -> Result<Vec<TailEstimate>, SimError> {
    let horizon = check_args(ks, trials)?;
    let mut hp = Hp::new();
    let laws: Vec<StepLaw> = match &spec.increment {
        Increment::Stationary(d) => {
            let law = StepLaw::from_dist(d, &mut hp).map_err(|e| SimError::InvalidStepLaw(1, e))?;
            vec![law]
        }
        Increment::Indexed(f) => (1..=horizon)
            .map(|n| f(n, &mut hp).map_err(|e| SimError::InvalidStepLaw(n, e)))
            .collect::<Result<_, _>>()?,
    };
    // scale every value to a common integer lattice
    let den = laws
        .iter()
        .flat_map(|l| l.values.iter())
        .chain(std::iter::once(&spec.initial))
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let scale = Rational::from_integer(den);
    let to_lattice = |q: &Rational| (q * &scale).to_integer().to_i128().ok_or(SimError::ProcessOverflow);
    let start = to_lattice(&spec.initial)?;
    let steps: Vec<Vec<i128>> = laws
        .iter()
        .map(|l| l.values.iter().map(to_lattice).collect::<Result<_, _>>())
        .collect::<Result<_, _>>()?;
    let times: Vec<Option<u64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let mut x = start;
            for n in 0..=horizon {
                if x <= 0 {
                    return Ok(Some(n));
                }
                if n == horizon {
                    break;
                }
                let law_idx = if laws.len() == 1 { 0 } else { n as usize };
                let j = laws[law_idx].index(&mut rng);
                x = x.checked_add(steps[law_idx][j]).ok_or(SimError::ProcessOverflow)?;
            }
            Ok(None)
        })
        .collect::<Result<_, SimError>>()?;
    Ok(tally(&times, ks, trials, seed))
}

/// `prod_{j=1}^{n} e^{-1/j^2} = e^{-sum_{j<=n} 1/j^2}` in high precision.
pub fn exact_nonstop_product(n: u64, hp: &mut Hp) -> BigFloat {
    let mut sum = hp.int(0);
    for j in 1..=n {
        let j2 = hp.int((j * j) as i64);
        sum = hp.add(&sum, &hp.div(&hp.int(1), &j2));
    }
    let neg = hp.sub(&hp.int(0), &sum);
    hp.exp(&neg)
}

pub fn exact_nonstop_product_f64(n: u64) -> f64 {
    let mut hp = Hp::new();
    let v = exact_nonstop_product(n, &mut hp);
    hp.to_f64(&v)
}

/// CSV with columns `k, estimate, wilson95_lo, wilson95_hi, trials, seed`.
pub fn write_csv<W: Write>(out: &mut W, rows: &[TailEstimate]) -> std::io::Result<()> {
    writeln!(out, "k,estimate,wilson95_lo,wilson95_hi,trials,seed")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{},{}", r.k, r.estimate, r.wilson95.0, r.wilson95.1, r.trials, r.seed)?;
    }
    Ok(())
}
