//! JSON number formatting with 17 significant digits.
//!
//! Reports store reals as `d.dddddddddddddddde±x`, which round-trips every
//! `f64` exactly. Non-finite values are written as `null`.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// Formats a real with 17 significant digits.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return s.serialize_none();
    }
    let raw = RawValue::from_string(fmt(*x)).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => super::serialize(v, s),
            None => s.serialize_none(),
        }
    }
}

pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            let raw = RawValue::from_string(fmt(*x)).map_err(serde::ser::Error::custom)?;
            seq.serialize_element(&raw)?;
        }
        seq.end()
    }
}

pub mod map {
    use super::*;
    use serde::ser::SerializeMap;
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let mut out = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            if v.is_finite() {
                let raw = RawValue::from_string(fmt(*v)).map_err(serde::ser::Error::custom)?;
                out.serialize_entry(k, &raw)?;
            } else {
                out.serialize_entry(k, &Option::<f64>::None)?;
            }
        }
        out.end()
    }
}

pub mod vector {
    use super::*;
    use crate::numerics::Vector;

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        super::vec::serialize(v.as_slice(), s)
    }
}
