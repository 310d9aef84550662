//! Integer-valued sampling distributions, the per-variable sampling function,
//! its product joint, exact moments and certified expectation intervals.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::RngCore;
use serde::Serialize;
use thiserror::Error;

use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DistError {
    #[error("probabilities must lie in (0,1] and sum to 1 (sum is {0})")]
    NotNormalized(Rational),
    #[error("value {0} listed twice in a finite table")]
    DuplicateValue(i64),
    #[error("empty support")]
    EmptySupport,
    #[error("invalid range {0}..{1}")]
    InvalidRange(i64, i64),
    #[error("two-sided geometric parameter must lie in (0,1), got {0}")]
    InvalidParameter(Rational),
    #[error("sampling variable `{0}` has infinite support")]
    InfiniteSupport(String),
    #[error("a growth bound is required to integrate over infinite support")]
    GrowthUnbounded,
    #[error("joint support exceeds {0} points")]
    TooLarge(usize),
    #[error("no distribution declared for sampling variable `{0}`")]
    Missing(String),
}

/// A discrete probability distribution over the integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiscreteDist {
    /// Sorted by value, probabilities in (0,1] summing to exactly 1.
    FiniteSupport(Vec<(i64, Rational)>),
    /// `P(r=k) = (1-p)^(|k|-1) * p / 2` for `k != 0`, zero mass at 0.
    TwoSidedGeometric(Rational),
    PointMass(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Moments {
    #[serde(with = "rational::serde_str")]
    pub mean: Rational,
    #[serde(with = "rational::serde_str")]
    pub variance: Rational,
    pub finite: bool,
}

impl DiscreteDist {
    pub fn finite(mut entries: Vec<(i64, Rational)>) -> Result<Self, DistError> {
        if entries.is_empty() {
            return Err(DistError::EmptySupport);
        }
        entries.sort_by_key(|(v, _)| *v);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DistError::DuplicateValue(w[0].0));
            }
        }
        let sum: Rational = entries.iter().map(|(_, p)| p.clone()).sum();
        let in_range = entries
            .iter()
            .all(|(_, p)| p.is_positive() && *p <= Rational::one());
        if !in_range || !sum.is_one() {
            return Err(DistError::NotNormalized(sum));
        }
        Ok(DiscreteDist::FiniteSupport(entries))
    }

    pub fn uniform(lo: i64, hi: i64) -> Result<Self, DistError> {
        if hi < lo {
            return Err(DistError::InvalidRange(lo, hi));
        }
        let n = hi - lo + 1;
        let p = rational::ratio(1, n);
        Self::finite((lo..=hi).map(|v| (v, p.clone())).collect())
    }

    pub fn two_sided_geometric(p: Rational) -> Result<Self, DistError> {
        if !p.is_positive() || p >= Rational::one() {
            return Err(DistError::InvalidParameter(p));
        }
        Ok(DiscreteDist::TwoSidedGeometric(p))
    }

    pub fn point(v: i64) -> Self {
        DiscreteDist::PointMass(v)
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, DiscreteDist::TwoSidedGeometric(_))
    }

    /// Support with probabilities, `None` for infinite support.
    pub fn support(&self) -> Option<Vec<(i64, Rational)>> {
        match self {
            DiscreteDist::FiniteSupport(e) => Some(e.clone()),
            DiscreteDist::PointMass(v) => Some(vec![(*v, Rational::one())]),
            DiscreteDist::TwoSidedGeometric(_) => None,
        }
    }

    pub fn prob(&self, k: i64) -> Rational {
        match self {
            DiscreteDist::FiniteSupport(e) => e
                .iter()
                .find(|(v, _)| *v == k)
                .map(|(_, p)| p.clone())
                .unwrap_or_else(Rational::zero),
            DiscreteDist::PointMass(v) => {
                if *v == k {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            }
            DiscreteDist::TwoSidedGeometric(p) => {
                if k == 0 {
                    return Rational::zero();
                }
                let q = Rational::one() - p;
                let m = k.unsigned_abs() - 1;
                num_traits::pow(q, m as usize) * p / rational::int(2)
            }
        }
    }

    /// Mean and variance, exact in every case (closed form for the
    /// two-sided geometric: mean 0, variance `(2-p)/p^2`).
    pub fn moments(&self) -> Moments {
        match self {
            DiscreteDist::FiniteSupport(e) => {
                let mean: Rational = e.iter().map(|(v, p)| rational::int(*v) * p).sum();
                let variance: Rational = e
                    .iter()
                    .map(|(v, p)| {
                        let d = rational::int(*v) - &mean;
                        &d * &d * p
                    })
                    .sum();
                Moments { mean, variance, finite: true }
            }
            DiscreteDist::PointMass(v) => Moments {
                mean: rational::int(*v),
                variance: Rational::zero(),
                finite: true,
            },
            DiscreteDist::TwoSidedGeometric(p) => Moments {
                mean: Rational::zero(),
                variance: (rational::int(2) - p) / (p * p),
                finite: true,
            },
        }
    }

    /// `E|r|`.
    pub fn abs_mean(&self) -> Rational {
        match self {
            DiscreteDist::FiniteSupport(e) => e.iter().map(|(v, p)| rational::int(v.abs()) * p).sum(),
            DiscreteDist::PointMass(v) => rational::int(v.abs()),
            DiscreteDist::TwoSidedGeometric(p) => p.recip(),
        }
    }

    /// Largest absolute value in the support, `None` when unbounded.
    pub fn max_abs(&self) -> Option<i64> {
        match self {
            DiscreteDist::FiniteSupport(e) => e.iter().map(|(v, _)| v.abs()).max(),
            DiscreteDist::PointMass(v) => Some(v.abs()),
            DiscreteDist::TwoSidedGeometric(_) => None,
        }
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> i64 {
        DistSampler::new(self).sample(rng)
    }
}

impl fmt::Display for DiscreteDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiscreteDist::PointMass(v) => write!(f, "point({v})"),
            DiscreteDist::TwoSidedGeometric(p) => write!(f, "two_sided_geometric({p})"),
            DiscreteDist::FiniteSupport(e) => {
                write!(f, "table{{")?;
                for (i, (v, p)) in e.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}:{p}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// Precomputed sampler for one distribution.
#[derive(Debug, Clone)]
pub struct DistSampler {
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Point(i64),
    // cumulative probabilities scaled by 2^64
    Table { values: Vec<i64>, thresholds: Vec<u128> },
    Geometric { ln_q: f64 },
}

impl DistSampler {
    pub fn new(dist: &DiscreteDist) -> Self {
        let kind = match dist {
            DiscreteDist::PointMass(v) => SamplerKind::Point(*v),
            DiscreteDist::FiniteSupport(e) => {
                let scale = Rational::from_integer(BigInt::one() << 64);
                let mut cum = Rational::zero();
                let mut values = Vec::with_capacity(e.len());
                let mut thresholds = Vec::with_capacity(e.len());
                for (v, p) in e {
                    cum += p;
                    values.push(*v);
                    let t = (&cum * &scale).floor().to_integer();
                    thresholds.push(t.to_u128().unwrap_or(u128::MAX));
                }
                SamplerKind::Table { values, thresholds }
            }
            DiscreteDist::TwoSidedGeometric(p) => SamplerKind::Geometric {
                ln_q: (1.0 - rational::to_f64(p)).ln(),
            },
        };
        DistSampler { kind }
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> i64 {
        match &self.kind {
            SamplerKind::Point(v) => *v,
            SamplerKind::Table { values, thresholds } => {
                let u = rng.next_u64() as u128;
                let idx = thresholds.partition_point(|t| *t <= u);
                values[idx.min(values.len() - 1)]
            }
            SamplerKind::Geometric { ln_q } => {
                let bits = rng.next_u64();
                let negative = bits & 1 == 1;
                // uniform in (0, 1]
                let u = ((bits >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64);
                let m = 1.0 + (u.ln() / ln_q).floor();
                let m = if m.is_finite() && m < 9.0e18 { m as i64 } else { i64::MAX / 4 };
                if negative {
                    -m
                } else {
                    m
                }
            }
        }
    }
}

/// The sampling function: one distribution per sampling variable, in a
/// fixed order. Values are sampled independently.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SamplingFunction {
    entries: Vec<(String, DiscreteDist)>,
}

/// A closed rational interval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Interval {
    #[serde(with = "rational::serde_str")]
    pub lo: Rational,
    #[serde(with = "rational::serde_str")]
    pub hi: Rational,
}

impl Interval {
    pub fn point(v: Rational) -> Self {
        Interval { lo: v.clone(), hi: v }
    }

    pub fn contains(&self, v: &Rational) -> bool {
        &self.lo <= v && v <= &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }
}

/// Linear growth bound `|f(rv)| <= constant + slope * sum_i |rv_i|`.
#[derive(Debug, Clone)]
pub struct Growth {
    pub constant: Rational,
    pub slope: Rational,
}

const MAX_JOINT_POINTS: usize = 4_000_000;

impl SamplingFunction {
    pub fn new(entries: Vec<(String, DiscreteDist)>) -> Self {
        SamplingFunction { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn dists(&self) -> impl Iterator<Item = &DiscreteDist> {
        self.entries.iter().map(|(_, d)| d)
    }

    pub fn get(&self, name: &str) -> Option<&DiscreteDist> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    pub fn entries(&self) -> &[(String, DiscreteDist)] {
        &self.entries
    }

    /// Restricts to the named variables, keeping the given order.
    pub fn restrict(&self, names: &[String]) -> Result<SamplingFunction, DistError> {
        names
            .iter()
            .map(|n| {
                self.get(n)
                    .map(|d| (n.clone(), d.clone()))
                    .ok_or_else(|| DistError::Missing(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(SamplingFunction::new)
    }

    pub fn is_finite(&self) -> bool {
        self.dists().all(DiscreteDist::is_finite)
    }

    pub fn moments(&self) -> Vec<Moments> {
        self.dists().map(DiscreteDist::moments).collect()
    }

    /// Cartesian product of the supports with product probabilities.
    pub fn joint_support(&self) -> Result<Vec<(Vec<i64>, Rational)>, DistError> {
        let supports = self
            .entries
            .iter()
            .map(|(n, d)| d.support().ok_or_else(|| DistError::InfiniteSupport(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        product(&supports)
    }

    /// Expectation of `f` under the joint distribution as a certified
    /// interval. Exact (a point) for finite support; otherwise infinite
    /// supports are truncated to `|k| <= K` with the tail contribution
    /// bounded through the declared growth, so the width is at most
    /// `2 * tail_eps`.
    pub fn expect<F>(&self, f: F, tail_eps: &Rational, growth: Option<&Growth>) -> Result<Interval, DistError>
    where
        F: Fn(&[i64]) -> Rational,
    {
        if self.is_finite() {
            let joint = self.joint_support()?;
            let v: Rational = joint.iter().map(|(rv, p)| f(rv) * p).sum();
            return Ok(Interval::point(v));
        }
        let growth = growth.ok_or(DistError::GrowthUnbounded)?;
        let (cutoff, tail) = self.truncation(tail_eps, growth);
        let supports: Vec<Vec<(i64, Rational)>> = self
            .dists()
            .map(|d| match d.support() {
                Some(s) => s,
                None => (-cutoff..=cutoff)
                    .filter(|k| *k != 0)
                    .map(|k| (k, d.prob(k)))
                    .collect(),
            })
            .collect();
        let joint = product(&supports)?;
        let s: Rational = joint.iter().map(|(rv, p)| f(rv) * p).sum();
        Ok(Interval { lo: &s - &tail, hi: s + tail })
    }

    /// Smallest cutoff `K` whose certified tail bound is below `eps`,
    /// together with that bound.
    fn truncation(&self, eps: &Rational, growth: &Growth) -> (i64, Rational) {
        let abs_means: Vec<Rational> = self.dists().map(DiscreteDist::abs_mean).collect();
        let total_abs: Rational = abs_means.iter().sum();
        let tail_at = |k: i64| -> Rational {
            let mut t = Rational::zero();
            for (i, d) in self.dists().enumerate() {
                if let DiscreteDist::TwoSidedGeometric(p) = d {
                    let q_pow = num_traits::pow(Rational::one() - p, k as usize);
                    let others = &total_abs - &abs_means[i];
                    let mass_term = (&growth.constant + &growth.slope * others) * &q_pow;
                    let abs_term = &growth.slope * &q_pow * (rational::int(k) + p.recip());
                    t += mass_term + abs_term;
                }
            }
            t
        };
        let mut k = 1i64;
        while tail_at(k) > *eps {
            k *= 2;
        }
        let (mut lo, mut hi) = (k / 2, k);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if tail_at(mid) > *eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (hi, tail_at(hi))
    }
}

fn product(supports: &[Vec<(i64, Rational)>]) -> Result<Vec<(Vec<i64>, Rational)>, DistError> {
    let size = supports.iter().try_fold(1usize, |acc, s| acc.checked_mul(s.len()));
    match size {
        Some(n) if n <= MAX_JOINT_POINTS => {}
        _ => return Err(DistError::TooLarge(MAX_JOINT_POINTS)),
    }
    let mut out: Vec<(Vec<i64>, Rational)> = vec![(Vec::new(), Rational::one())];
    for s in supports {
        let mut next = Vec::with_capacity(out.len() * s.len());
        for (rv, p) in &out {
            for (v, q) in s {
                let mut rv2 = rv.clone();
                rv2.push(*v);
                next.push((rv2, p * q));
            }
        }
        out = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coin() -> DiscreteDist {
        DiscreteDist::finite(vec![(-1, ratio(1, 2)), (1, ratio(1, 2))]).unwrap()
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(matches!(
            DiscreteDist::finite(vec![(0, ratio(1, 2))]),
            Err(DistError::NotNormalized(_))
        ));
        assert!(matches!(
            DiscreteDist::finite(vec![(0, ratio(1, 2)), (0, ratio(1, 2))]),
            Err(DistError::DuplicateValue(0))
        ));
        assert!(DiscreteDist::two_sided_geometric(int(1)).is_err());
        assert!(DiscreteDist::uniform(3, 2).is_err());
    }

    #[test]
    fn moments_of_basic_dists() {
        let m = coin().moments();
        assert_eq!(m.mean, int(0));
        assert_eq!(m.variance, int(1));
        let m = DiscreteDist::point(3).moments();
        assert_eq!((m.mean, m.variance), (int(3), int(0)));
        let m = DiscreteDist::two_sided_geometric(ratio(1, 2)).unwrap().moments();
        assert_eq!((m.mean, m.variance), (int(0), int(6)));
    }

    /// Truncated second-moment sum with an explicit geometric tail bound,
    /// independent of the closed form.
    fn geometric_second_moment_oracle(p: f64) -> (f64, f64) {
        let q = 1.0 - p;
        let mut s = 0.0;
        for m in 1..=400u32 {
            // both signs together carry (1-p)^(m-1) p
            s += (m as f64).powi(2) * q.powi(m as i32 - 1) * p;
        }
        // sum_{m>400} m^2 q^(m-1) p <= q^400 * (401+1/p)^2 * 2 / p
        let tail = q.powi(400) * (401.0 + 1.0 / p).powi(2) * 2.0 / p;
        (s, tail)
    }

    #[test]
    fn geometric_variance_matches_truncated_oracle() {
        for (n, d) in [(1, 4), (1, 2), (3, 4)] {
            let p = ratio(n, d);
            let closed = rational::to_f64(&DiscreteDist::two_sided_geometric(p.clone()).unwrap().moments().variance);
            let (s, tail) = geometric_second_moment_oracle(n as f64 / d as f64);
            assert!(tail < 1e-12);
            assert!((closed - s).abs() <= 1e-9, "p={n}/{d}: closed {closed} oracle {s}");
        }
    }

    #[test]
    fn joint_support_is_normalized_product() {
        let sf = SamplingFunction::new(vec![
            ("a".into(), DiscreteDist::uniform(0, 2).unwrap()),
            ("b".into(), DiscreteDist::uniform(0, 2).unwrap()),
        ]);
        let j = sf.joint_support().unwrap();
        assert_eq!(j.len(), 9);
        assert!(j.iter().all(|(_, p)| *p == ratio(1, 9)));
        let total: Rational = j.iter().map(|(_, p)| p.clone()).sum();
        assert!(total.is_one());

        let single = SamplingFunction::new(vec![("r".into(), coin())]).joint_support().unwrap();
        assert_eq!(single, vec![(vec![-1], ratio(1, 2)), (vec![1], ratio(1, 2))]);

        let geo = SamplingFunction::new(vec![(
            "g".into(),
            DiscreteDist::two_sided_geometric(ratio(1, 2)).unwrap(),
        )]);
        assert!(matches!(geo.joint_support(), Err(DistError::InfiniteSupport(_))));
    }

    #[test]
    fn expectation_intervals() {
        let sf = SamplingFunction::new(vec![("r".into(), coin())]);
        let eps = ratio(1, 1_000_000_000);
        assert_eq!(sf.expect(|_| int(1), &eps, None).unwrap(), Interval::point(int(1)));
        assert_eq!(sf.expect(|rv| int(rv[0].abs()), &eps, None).unwrap(), Interval::point(int(1)));

        let geo = SamplingFunction::new(vec![(
            "g".into(),
            DiscreteDist::two_sided_geometric(ratio(1, 2)).unwrap(),
        )]);
        assert_eq!(
            geo.expect(|rv| int(rv[0].abs()), &eps, None),
            Err(DistError::GrowthUnbounded)
        );
        let growth = Growth { constant: int(0), slope: int(1) };
        let iv = geo.expect(|rv| int(rv[0].abs()), &eps, Some(&growth)).unwrap();
        assert!(iv.contains(&int(2)), "{iv:?}");
        assert!(iv.width() <= &eps * int(2));
    }

    #[test]
    fn finite_expectation_matches_direct_sum() {
        let d = DiscreteDist::finite(vec![(-2, ratio(1, 3)), (0, ratio(1, 6)), (5, ratio(1, 2))]).unwrap();
        let sf = SamplingFunction::new(vec![("r".into(), d.clone())]);
        let f = |rv: &[i64]| int(rv[0] * rv[0] - 3 * rv[0]);
        let direct: Rational = d.support().unwrap().iter().map(|(v, p)| int(v * v - 3 * v) * p).sum();
        let iv = sf.expect(f, &ratio(1, 100), None).unwrap();
        assert!(iv.contains(&direct));
        assert_eq!(iv.width(), int(0));
    }

    #[test]
    fn point_mass_sampling_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!((0..100).all(|_| DiscreteDist::point(7).sample(&mut rng) == 7));
    }

    #[test]
    fn coin_sampling_mean_within_clt_band() {
        let sampler = DistSampler::new(&coin());
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 1_000_000;
        let sum: i64 = (0..n).map(|_| sampler.sample(&mut rng)).sum();
        let mean = sum as f64 / n as f64;
        assert!(mean.abs() <= 4.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn geometric_sampling_hits_one_at_quarter_rate() {
        let sampler = DistSampler::new(&DiscreteDist::two_sided_geometric(ratio(1, 2)).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 1_000_000u64;
        let hits = (0..n).filter(|_| sampler.sample(&mut rng) == 1).count() as u64;
        let (lo, hi) = crate::simulator::wilson_interval(hits, n, crate::simulator::Z_999);
        assert!(lo <= 0.25 && 0.25 <= hi, "[{lo}, {hi}]");
    }
}
