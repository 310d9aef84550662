//! Exact rational helpers shared by every module.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Parses `"3"`, `"-1/2"` or a finite decimal like `"0.25"`.
pub fn parse(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let negative = whole.trim_start().starts_with('-');
        let whole_abs: BigInt = whole.trim().trim_start_matches(['-', '+']).parse().unwrap_or_default();
        let frac_num: BigInt = frac.parse().ok()?;
        let den = num_traits::pow(BigInt::from(10), frac.len());
        let mag = Rational::new(whole_abs * &den + frac_num, den);
        return Some(if negative { -mag } else { mag });
    }
    let n: BigInt = text.parse().ok()?;
    Some(Rational::from_integer(n))
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        if q.is_positive() {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    })
}

/// Floor of a rational as `i64`, if it fits.
pub fn floor_i64(q: &Rational) -> Option<i64> {
    q.floor().to_integer().to_i64()
}

pub fn ceil_i64(q: &Rational) -> Option<i64> {
    q.ceil().to_integer().to_i64()
}

pub fn lcm_of_denominators<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    use num_integer::Integer;
    values
        .into_iter()
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
}

pub fn max_ref<'a>(a: &'a Rational, b: &'a Rational) -> &'a Rational {
    if a >= b {
        a
    } else {
        b
    }
}

/// Serde adapter writing rationals as `"num/den"` strings and accepting
/// either strings or plain JSON integers on input.
pub mod serde_str {
    use super::{parse, Rational};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Str(String),
        Int(i64),
        Float(f64),
    }

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&q.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        from_raw(Raw::deserialize(d)?).map_err(D::Error::custom)
    }

    fn from_raw(raw: Raw) -> Result<Rational, String> {
        match raw {
            Raw::Str(s) => parse(&s).ok_or_else(|| format!("invalid rational `{s}`")),
            Raw::Int(i) => Ok(super::int(i)),
            Raw::Float(f) => Rational::from_float(f).ok_or_else(|| format!("invalid number {f}")),
        }
    }

    pub mod option {
        use super::*;
        use serde::Serialize;

        pub fn serialize<S: Serializer>(q: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
            q.as_ref().map(|q| q.to_string()).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
            Option::<Raw>::deserialize(d)?
                .map(from_raw)
                .transpose()
                .map_err(D::Error::custom)
        }
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for q in v {
                seq.serialize_element(&q.to_string())?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
            Vec::<Raw>::deserialize(d)?
                .into_iter()
                .map(from_raw)
                .collect::<Result<_, _>>()
                .map_err(D::Error::custom)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse("1/2"), Some(ratio(1, 2)));
        assert_eq!(parse("-3/6"), Some(ratio(-1, 2)));
        assert_eq!(parse("0.25"), Some(ratio(1, 4)));
        assert_eq!(parse("-1.5"), Some(ratio(-3, 2)));
        assert_eq!(parse("7"), Some(int(7)));
        assert_eq!(parse("1/0"), None);
        assert_eq!(parse("abc"), None);
    }
}
