//! Markov-chain semantics of a single while loop: one-step transitions,
//! sampled paths, and an exact forward oracle for `P(T >= k)`.
//!
//! A configuration is at `In` (loop head) or `Out`. From `(In, pv)` with the
//! guard true the chain moves to `(In, F(pv, rv))`; with the guard false it
//! moves to `(Out, pv)`; `Out` is absorbing. `T` is the first step index at
//! which the location is `Out`, so `T >= 1` and `P(T >= k)` is the mass still
//! at `In` after `k - 1` steps.

use std::collections::HashMap;

use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dist::{DistError, DistSampler, Interval};
use crate::lang::{EvalError, SingleWhileLoop};
use crate::rational::Rational;

pub const DEFAULT_STATE_CAP: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("state explosion: {reached} state-steps exceed the cap of {cap}")]
    StateExplosion { cap: u64, reached: u64 },
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("initial valuation has {got} entries, the loop has {expected} program variables")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Loc {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Configuration {
    pub loc: Loc,
    pub valuation: Vec<i64>,
}

impl Configuration {
    pub fn entry(pv: Vec<i64>) -> Self {
        Configuration { loc: Loc::In, valuation: pv }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathResult {
    pub terminated: bool,
    /// `T` when terminated, otherwise the horizon.
    pub steps: u64,
    pub valuation: Vec<i64>,
}

/// Successors of one configuration with their probabilities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelRow {
    pub successors: Vec<(Configuration, Rational)>,
}

impl KernelRow {
    pub fn total(&self) -> Rational {
        self.successors.iter().map(|(_, p)| p).sum()
    }
}

fn check_arity(l: &SingleWhileLoop, pv: &[i64]) -> Result<(), SemanticsError> {
    if pv.len() != l.pvars.len() {
        return Err(SemanticsError::Arity { expected: l.pvars.len(), got: pv.len() });
    }
    Ok(())
}

/// One transition with the sample vector `rv`.
pub fn step(l: &SingleWhileLoop, cfg: &Configuration, rv: &[i64]) -> Result<Configuration, EvalError> {
    match cfg.loc {
        Loc::Out => Ok(cfg.clone()),
        Loc::In if l.holds(&cfg.valuation) => Ok(Configuration::entry(l.apply(&cfg.valuation, rv)?)),
        Loc::In => Ok(Configuration { loc: Loc::Out, valuation: cfg.valuation.clone() }),
    }
}

/// The exact transition distribution of a configuration (finite support
/// only). Successors reached by several samples are merged.
pub fn kernel_row(l: &SingleWhileLoop, cfg: &Configuration) -> Result<KernelRow, SemanticsError> {
    if cfg.loc == Loc::Out || !l.holds(&cfg.valuation) {
        let next = step(l, cfg, &[])?;
        return Ok(KernelRow { successors: vec![(next, Rational::one())] });
    }
    let mut merged: Vec<(Configuration, Rational)> = Vec::new();
    for (rv, p) in l.sampling.joint_support()? {
        let next = step(l, cfg, &rv)?;
        match merged.iter_mut().find(|(c, _)| *c == next) {
            Some((_, q)) => *q += p,
            None => merged.push((next, p)),
        }
    }
    Ok(KernelRow { successors: merged })
}

/// Samples one path from `(In, pv0)` for at most `horizon` steps.
pub fn run(l: &SingleWhileLoop, pv0: &[i64], seed: u64, horizon: u64) -> Result<PathResult, SemanticsError> {
    check_arity(l, pv0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samplers = samplers(l);
    Ok(run_with(l, pv0, &samplers, &mut rng, horizon)?)
}

pub(crate) fn samplers(l: &SingleWhileLoop) -> Vec<DistSampler> {
    l.sampling.dists().map(DistSampler::new).collect()
}

pub(crate) fn run_with<R: rand::RngCore>(
    l: &SingleWhileLoop,
    pv0: &[i64],
    samplers: &[DistSampler],
    rng: &mut R,
    horizon: u64,
) -> Result<PathResult, EvalError> {
    let mut pv = pv0.to_vec();
    let mut rv = vec![0i64; samplers.len()];
    for n in 0..horizon {
        if !l.holds(&pv) {
            return Ok(PathResult { terminated: true, steps: n + 1, valuation: pv });
        }
        for (slot, s) in rv.iter_mut().zip(samplers) {
            *slot = s.sample(rng);
        }
        l.update.exec(&mut pv, &rv)?;
    }
    Ok(PathResult { terminated: false, steps: horizon, valuation: pv })
}

/// Exact `P(T >= k)` for `k = 1..=k_max` (index 0 holds `k = 1`).
pub fn exact_tail(l: &SingleWhileLoop, pv0: &[i64], k_max: usize) -> Result<Vec<Rational>, SemanticsError> {
    exact_tail_with_cap(l, pv0, k_max, DEFAULT_STATE_CAP)
}

pub fn exact_tail_with_cap(
    l: &SingleWhileLoop,
    pv0: &[i64],
    k_max: usize,
    cap: u64,
) -> Result<Vec<Rational>, SemanticsError> {
    check_arity(l, pv0)?;
    let joint = l.sampling.joint_support()?;
    let mut current: HashMap<Vec<i64>, Rational> = HashMap::from([(pv0.to_vec(), Rational::one())]);
    let mut out = Vec::with_capacity(k_max);
    let mut work: u64 = 0;
    for k in 1..=k_max {
        // mass at `In` after k - 1 steps
        out.push(current.values().sum());
        if k == k_max {
            break;
        }
        work += current.len() as u64;
        if work > cap {
            return Err(SemanticsError::StateExplosion { cap, reached: work });
        }
        let mut next: HashMap<Vec<i64>, Rational> = HashMap::with_capacity(current.len() * 2);
        for (pv, p) in &current {
            if !l.holds(pv) {
                continue;
            }
            for (rv, q) in &joint {
                let succ = l.apply(pv, rv)?;
                *next.entry(succ).or_insert_with(Rational::zero) += p * q;
            }
        }
        current = next;
    }
    Ok(out)
}

/// Lossy variant: in-states with mass below `threshold` are dropped after
/// each step and their mass is carried as uncertainty, so each entry is an
/// interval containing the exact `P(T >= k)`.
pub fn pruned_tail(
    l: &SingleWhileLoop,
    pv0: &[i64],
    k_max: usize,
    threshold: &Rational,
) -> Result<Vec<Interval>, SemanticsError> {
    check_arity(l, pv0)?;
    let joint = l.sampling.joint_support()?;
    let mut current: HashMap<Vec<i64>, Rational> = HashMap::from([(pv0.to_vec(), Rational::one())]);
    let mut dropped = Rational::zero();
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mass: Rational = current.values().sum();
        out.push(Interval { hi: &mass + &dropped, lo: mass });
        if k == k_max {
            break;
        }
        let mut next: HashMap<Vec<i64>, Rational> = HashMap::new();
        for (pv, p) in &current {
            if !l.holds(pv) {
                continue;
            }
            for (rv, q) in &joint {
                *next.entry(l.apply(pv, rv)?).or_insert_with(Rational::zero) += p * q;
            }
        }
        next.retain(|_, p| {
            if &*p < threshold {
                dropped += &*p;
                false
            } else {
                true
            }
        });
        current = next;
    }
    Ok(out)
}
