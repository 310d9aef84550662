//! JSON certificate files:
//! `{"kind":"smap","h":"x + 1","delta":"1","zeta":"1"}` or
//! `{"kind":"lpf","a":["1"],"c":"0"}`. Omitted `delta` means 1 and omitted
//! `zeta` means absent.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CertError, LinearProgressFunction, SupermartingaleMap};
use crate::lang::{parse_value_expr, LangError};
use crate::rational::{self, Rational};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("invalid certificate JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid certificate expression: {0}")]
    Expr(#[from] LangError),
    #[error("`h` is required for smap certificates")]
    MissingH,
    #[error("`a` and `c` are required for lpf certificates")]
    MissingLpf,
    #[error(transparent)]
    Cert(#[from] CertError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    Smap(SupermartingaleMap),
    Lpf(LinearProgressFunction),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Smap,
    Lpf,
}

#[derive(Debug, Serialize, Deserialize)]
struct Raw {
    kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<String>,
    #[serde(default, with = "rational::serde_str::option", skip_serializing_if = "Option::is_none")]
    delta: Option<Rational>,
    #[serde(default, with = "rational::serde_str::option")]
    zeta: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<Vec<String>>,
    #[serde(default, with = "rational::serde_str::option", skip_serializing_if = "Option::is_none")]
    c: Option<Rational>,
}

impl Certificate {
    /// Parses a certificate whose expression mentions `pvars`.
    pub fn from_json(text: &str, pvars: &[String]) -> Result<Self, FormatError> {
        let raw: Raw = serde_json::from_str(text)?;
        match raw.kind {
            Kind::Smap => {
                let h = parse_value_expr(raw.h.as_deref().ok_or(FormatError::MissingH)?, pvars)?;
                Ok(Certificate::Smap(SupermartingaleMap::new(h, raw.delta.unwrap_or_else(rational::one), raw.zeta)?))
            }
            Kind::Lpf => {
                let (Some(a), Some(c)) = (raw.a, raw.c) else { return Err(FormatError::MissingLpf) };
                let a = a
                    .iter()
                    .map(|s| rational::parse(s).ok_or_else(|| FormatError::Json(serde::de::Error::custom(format!("invalid rational `{s}`")))))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Certificate::Lpf(LinearProgressFunction { a, c }))
            }
        }
    }

    pub fn to_json(&self) -> String {
        let raw = match self {
            Certificate::Smap(m) => Raw {
                kind: Kind::Smap,
                h: Some(m.h.to_string()),
                delta: Some(m.delta.clone()),
                zeta: m.zeta.clone(),
                a: None,
                c: None,
            },
            Certificate::Lpf(f) => Raw {
                kind: Kind::Lpf,
                h: None,
                delta: None,
                zeta: None,
                a: Some(f.a.iter().map(ToString::to_string).collect()),
                c: Some(f.c.clone()),
            },
        };
        serde_json::to_string(&raw).expect("certificate serializes")
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::from_str(&self.to_json()).expect("certificate JSON round-trips")
    }
}
