// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Fixed-point values used as polynomial exponents.
//!
//! Every aggregated attribute is mapped onto an integer grid
//! `raw * 10^-scale_digits` before any distribution is built, so exponents are
//! always exact integers. The two infinities are the neutral elements of the
//! MIN and MAX monoids.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{PgfError, Result};

/// An exponent of a generalized polynomial: a scaled integer or one of the
/// two infinities. Ordering is `NegInf < Finite(_) < PosInf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtendedValue {
    NegInf,
    Finite(i64),
    PosInf,
}

impl ExtendedValue {
    pub fn finite(&self) -> Option<i64> {
        match self {
            ExtendedValue::Finite(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedValue::Finite(_))
    }

    /// Negation, swapping the infinities.
    pub fn negate(&self) -> Self {
        match self {
            ExtendedValue::NegInf => ExtendedValue::PosInf,
            ExtendedValue::PosInf => ExtendedValue::NegInf,
            ExtendedValue::Finite(v) => ExtendedValue::Finite(-v),
        }
    }

    pub fn to_f64(&self, scale: ValueScale) -> f64 {
        match self {
            ExtendedValue::NegInf => f64::NEG_INFINITY,
            ExtendedValue::PosInf => f64::INFINITY,
            ExtendedValue::Finite(v) => scale.to_f64(*v),
        }
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::NegInf => write!(f, "-inf"),
            ExtendedValue::PosInf => write!(f, "inf"),
            ExtendedValue::Finite(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for ExtendedValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedValue::Finite(v) => s.serialize_i64(*v),
            ExtendedValue::PosInf => s.serialize_str("inf"),
            ExtendedValue::NegInf => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(ExtendedValue::Finite(v)),
            Raw::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(ExtendedValue::PosInf),
                "-inf" => Ok(ExtendedValue::NegInf),
                other => other
                    .parse()
                    .map(ExtendedValue::Finite)
                    .map_err(|_| serde::de::Error::custom(format!("invalid extended value `{other}`"))),
            },
        }
    }
}

impl From<i64> for ExtendedValue {
    fn from(v: i64) -> Self {
        ExtendedValue::Finite(v)
    }
}

/// Number of decimal digits `b` such that attribute values are `a * 10^-b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueScale {
    pub scale_digits: u32,
}

/// Largest supported number of decimal digits; keeps `10^digits` inside i64.
pub const MAX_SCALE_DIGITS: u32 = 18;

impl ValueScale {
    pub const INTEGER: ValueScale = ValueScale { scale_digits: 0 };

    pub fn new(scale_digits: u32) -> Result<Self> {
        if scale_digits > MAX_SCALE_DIGITS {
            return Err(PgfError::parameter(format!(
                "scale_digits {scale_digits} exceeds {MAX_SCALE_DIGITS}"
            )));
        }
        Ok(ValueScale { scale_digits })
    }

    pub fn factor(&self) -> i64 {
        10i64.pow(self.scale_digits)
    }

    pub fn to_f64(&self, raw: i64) -> f64 {
        raw as f64 / 10f64.powi(self.scale_digits as i32)
    }

    /// Parses a decimal literal onto this grid. Literals with more fractional
    /// digits than the scale allows are rejected unless the extra digits are
    /// zeros.
    pub fn parse(&self, text: &str) -> Result<i64> {
        let off_grid = || PgfError::OffGrid {
            value: text.to_string(),
            scale_digits: self.scale_digits,
        };
        let s = text.trim();
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if (int_part.is_empty() && frac_part.is_empty())
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(PgfError::parameter(format!("`{text}` is not a decimal number")));
        }
        let digits = self.scale_digits as usize;
        if frac_part.len() > digits && frac_part[digits..].bytes().any(|b| b != b'0') {
            return Err(off_grid());
        }
        let mut raw: i128 = 0;
        for b in int_part.bytes() {
            raw = raw * 10 + (b - b'0') as i128;
            if raw > i64::MAX as i128 {
                return Err(off_grid());
            }
        }
        let frac = frac_part.as_bytes();
        for i in 0..digits {
            let d = frac.get(i).map(|b| (b - b'0') as i128).unwrap_or(0);
            raw = raw * 10 + d;
            if raw > i64::MAX as i128 {
                return Err(off_grid());
            }
        }
        Ok(if negative { -(raw as i64) } else { raw as i64 })
    }

    /// Formats a raw value as a decimal literal, e.g. `1250` at scale 2 is
    /// `12.50`.
    pub fn format(&self, raw: i64) -> String {
        if self.scale_digits == 0 {
            return raw.to_string();
        }
        let f = self.factor() as u64;
        let sign = if raw < 0 { "-" } else { "" };
        let abs = raw.unsigned_abs();
        format!(
            "{sign}{}.{:0width$}",
            abs / f,
            abs % f,
            width = self.scale_digits as usize
        )
    }
}

/// Compares `a * 10^-sa` with `b * 10^-sb` exactly.
pub fn cmp_scaled(a: i64, sa: u32, b: i64, sb: u32) -> Ordering {
    let (a, b) = (a as i128, b as i128);
    match sa.cmp(&sb) {
        Ordering::Equal => a.cmp(&b),
        Ordering::Less => (a * 10i128.pow(sb - sa)).cmp(&b),
        Ordering::Greater => a.cmp(&(b * 10i128.pow(sa - sb))),
    }
}

/// Compares an extended value at scale `sa` with a finite value at scale `sb`.
pub fn cmp_extended(a: ExtendedValue, sa: u32, b: i64, sb: u32) -> Ordering {
    match a {
        ExtendedValue::NegInf => Ordering::Less,
        ExtendedValue::PosInf => Ordering::Greater,
        ExtendedValue::Finite(a) => cmp_scaled(a, sa, b, sb),
    }
}

/// A finite fixed-point number `raw * 10^-scale`. Equality and hashing are
/// by numeric value, so `1.50` and `1.5` are the same key.
#[derive(Debug, Clone, Copy)]
pub struct Decimal {
    pub raw: i64,
    pub scale: u32,
}

impl Decimal {
    pub fn new(raw: i64, scale: u32) -> Self {
        Decimal { raw, scale }
    }

    pub fn integer(raw: i64) -> Self {
        Decimal { raw, scale: 0 }
    }

    /// Parses a decimal literal keeping exactly its fractional digits.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        let digits = t.split_once('.').map(|(_, f)| f.len()).unwrap_or(0) as u32;
        let scale = ValueScale::new(digits)?;
        Ok(Decimal::new(scale.parse(t)?, digits))
    }

    fn normalized(&self) -> (i64, u32) {
        let (mut raw, mut scale) = (self.raw, self.scale);
        while scale > 0 && raw % 10 == 0 {
            raw /= 10;
            scale -= 1;
        }
        (raw, scale)
    }

    /// The raw value on a (possibly finer) grid, if representable exactly.
    pub fn rescaled(&self, scale: u32) -> Option<i64> {
        let (raw, s) = self.normalized();
        if s > scale {
            return None;
        }
        raw.checked_mul(10i64.checked_pow(scale - s)?)
    }

    pub fn to_f64(&self) -> f64 {
        ValueScale {
            scale_digits: self.scale,
        }
        .to_f64(self.raw)
    }
}

impl PartialEq for Decimal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Decimal {}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_scaled(self.raw, self.scale, other.raw, other.scale)
    }
}

impl Hash for Decimal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.normalized().hash(state);
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(
            &ValueScale {
                scale_digits: self.scale,
            }
            .format(self.raw),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extended_order() {
        assert!(ExtendedValue::NegInf < ExtendedValue::Finite(i64::MIN));
        assert!(ExtendedValue::Finite(i64::MAX) < ExtendedValue::PosInf);
        assert!(ExtendedValue::Finite(-3) < ExtendedValue::Finite(2));
        assert_eq!(ExtendedValue::PosInf.negate(), ExtendedValue::NegInf);
    }

    #[test]
    fn extended_json() {
        let vs = vec![ExtendedValue::NegInf, ExtendedValue::Finite(-4), ExtendedValue::PosInf];
        let text = serde_json::to_string(&vs).unwrap();
        assert_eq!(text, r#"["-inf",-4,"inf"]"#);
        let back: Vec<ExtendedValue> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vs);
        assert!(serde_json::from_str::<ExtendedValue>(r#""nan""#).is_err());
    }

    #[test]
    fn parse_on_grid() {
        let s = ValueScale::new(2).unwrap();
        assert_eq!(s.parse("12.5").unwrap(), 1250);
        assert_eq!(s.parse("-0.07").unwrap(), -7);
        assert_eq!(s.parse("3").unwrap(), 300);
        assert_eq!(s.parse("1.2300").unwrap(), 123);
        assert!(matches!(s.parse("1.234"), Err(PgfError::OffGrid { .. })));
        assert!(s.parse("abc").is_err());
        assert!(s.parse("").is_err());
        assert_eq!(s.format(-7), "-0.07");
        assert_eq!(s.format(1250), "12.50");
        assert_eq!(ValueScale::INTEGER.parse("42").unwrap(), 42);
    }

    #[test]
    fn decimal_equality_across_scales() {
        use std::collections::HashSet;
        let a = Decimal::new(150, 2);
        let b = Decimal::new(15, 1);
        assert_eq!(a, b);
        let set: HashSet<_> = [a, b].into_iter().collect();
        assert_eq!(set.len(), 1);
        assert!(Decimal::new(149, 2) < b);
        assert_eq!(b.rescaled(3), Some(1500));
        assert_eq!(Decimal::new(151, 2).rescaled(1), None);
        let d = Decimal::parse("-12.050").unwrap();
        assert_eq!((d.raw, d.scale), (-12050, 3));
        assert_eq!(d.to_string(), "-12.050");
        assert!(Decimal::parse("1.2.3").is_err());
    }
}
