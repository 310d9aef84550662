#![allow(dead_code)]

use std::path::PathBuf;

use astprove::lang::{normalize, parse, NormalizedProgram, SingleWhileLoop};
use astprove::rational::Rational;
use num_bigint::BigInt;
use num_traits::{One, Zero};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn program(name: &str) -> NormalizedProgram {
    normalize(&parse(&fixture_text(name)).unwrap()).unwrap()
}

pub fn single_loop(name: &str) -> SingleWhileLoop {
    SingleWhileLoop::from_source(&fixture_text(name)).unwrap()
}

/// Every fixture program with exactly one loop.
pub const SINGLE_LOOP_FIXTURES: &[&str] = &[
    "walk.pwhile",
    "countdown.pwhile",
    "geometric_walk.pwhile",
    "isqrt_walk.pwhile",
    "parabola.pwhile",
    "biased_walk.pwhile",
    "drift_up.pwhile",
];

fn binomial(n: u64, k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `P(T >= k)` of the symmetric walk `while x >= 1 do x := x + r od` from
/// `x = 1`, by the reflection principle: surviving `k` means the walk from
/// 0 stays above -1 for `k - 2` steps, which has the probability of
/// `S_{k-2}` landing on 0 or 1.
pub fn reflection_tail(k: u64) -> Rational {
    if k <= 1 {
        return Rational::one();
    }
    let n = k - 2;
    let mut num = BigInt::zero();
    for j in [0i64, 1] {
        if (n as i64 + j) % 2 == 0 {
            num += binomial(n, (n as i64 + j) as u64 / 2);
        }
    }
    Rational::new(num, BigInt::one() << n)
}
