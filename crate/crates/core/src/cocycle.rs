//! Cocycles `x ↦ β(x)` into the circle: affine `qx + c` or a finite table.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::arith::number::{fmt_rat, to_f64};
use crate::arith::{frac, Rational};
use crate::doc::Field;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Cocycle {
    /// `β(x) = slope·x + offset` with `x` read in `[0, 1)`.
    Affine { slope: Rational, offset: Rational },
    /// Values on a finite set of points; undefined elsewhere.
    Table(BTreeMap<Rational, Rational>),
}

impl Cocycle {
    pub fn identity() -> Self {
        Cocycle::Affine {
            slope: Rational::from_integer(1.into()),
            offset: Rational::zero(),
        }
    }

    pub fn constant(c: Rational) -> Self {
        Cocycle::Affine {
            slope: Rational::zero(),
            offset: c,
        }
    }

    /// `x ↦ β(x) + c`.
    pub fn shifted(&self, c: &Rational) -> Self {
        match self {
            Cocycle::Affine { slope, offset } => Cocycle::Affine {
                slope: slope.clone(),
                offset: offset + c,
            },
            Cocycle::Table(t) => Cocycle::Table(t.iter().map(|(x, v)| (x.clone(), frac(&(v + c)))).collect()),
        }
    }

    pub fn parse(f: Field<'_>, precision: Option<u32>) -> Result<Self> {
        let kind = f.get("type")?;
        match kind.field().as_str()? {
            "affine" => {
                f.only_keys(&["type", "slope", "offset"])?;
                let slope = match f.opt("slope") {
                    Some(c) => c.field().as_number(precision)?,
                    None => Rational::from_integer(1.into()),
                };
                let offset = match f.opt("offset") {
                    Some(c) => c.field().as_number(precision)?,
                    None => Rational::zero(),
                };
                Ok(Cocycle::Affine { slope, offset })
            }
            "table" => {
                f.only_keys(&["type", "entries"])?;
                let entries = f.get("entries")?;
                let mut table = BTreeMap::new();
                for item in entries.field().items()? {
                    let pair = item.field().items()?;
                    if pair.len() != 2 {
                        return Err(item.field().error("expected a [point, value] pair"));
                    }
                    let x = frac(&pair[0].field().as_number(precision)?);
                    let v = frac(&pair[1].field().as_number(precision)?);
                    if table.insert(x, v).is_some() {
                        return Err(item.field().error("duplicate table point"));
                    }
                }
                if table.is_empty() {
                    return Err(entries.field().error("table cocycle needs at least one entry"));
                }
                Ok(Cocycle::Table(table))
            }
            other => Err(kind
                .field()
                .error(format!("unknown cocycle type `{other}` (expected affine or table)"))),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Cocycle::Affine { slope, offset } => {
                json!({"type": "affine", "slope": fmt_rat(slope), "offset": fmt_rat(offset)})
            }
            Cocycle::Table(t) => json!({
                "type": "table",
                "entries": t.iter().map(|(x, v)| json!([fmt_rat(x), fmt_rat(v)])).collect::<Vec<_>>()
            }),
        }
    }

    /// `β(x)` reduced mod 1.
    pub fn eval(&self, x: &Rational) -> Result<Rational> {
        match self {
            Cocycle::Affine { slope, offset } => Ok(frac(&(slope * x + offset))),
            Cocycle::Table(t) => t.get(x).cloned().ok_or_else(|| {
                Error::OutsideSpace(format!("table cocycle undefined at {}", fmt_rat(x)))
            }),
        }
    }

    pub fn eval_f64(&self, x: f64) -> Result<f64> {
        match self {
            Cocycle::Affine { slope, offset } => {
                Ok((to_f64(slope) * x + to_f64(offset)).rem_euclid(1.0))
            }
            Cocycle::Table(t) => t
                .iter()
                .find(|(p, _)| {
                    let d = (to_f64(p) - x).abs();
                    d < 1e-12 || (1.0 - d) < 1e-12
                })
                .map(|(_, v)| to_f64(v))
                .ok_or_else(|| Error::OutsideSpace(format!("table cocycle undefined at {x}"))),
        }
    }

    /// `(q, c)` when `β(x) = qx + c` with integer `q`, i.e. when `β` is a
    /// continuous affine map of the circle.
    pub fn integer_affine(&self) -> Option<(i64, &Rational)> {
        match self {
            Cocycle::Affine { slope, offset } if slope.is_integer() => {
                slope.to_integer().to_i64().map(|q| (q, offset))
            }
            _ => None,
        }
    }

    /// Every value lies in the subgroup `(1/m)ℤ / ℤ`.
    pub fn values_in_cyclic(&self, m: u64) -> bool {
        let m = BigInt::from(m);
        let in_group = |v: &Rational| (v * &m).is_integer();
        match self {
            Cocycle::Affine { slope, offset } => slope.is_zero() && in_group(offset),
            Cocycle::Table(t) => t.values().all(in_group),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    #[test]
    fn affine_eval_reduces_mod_one() {
        let b = Cocycle::Affine {
            slope: rat(2, 1),
            offset: rat(1, 3),
        };
        assert_eq!(b.eval(&rat(1, 2)).unwrap(), rat(1, 3));
        assert_eq!(b.integer_affine().unwrap().0, 2);
    }

    #[test]
    fn table_lookup_and_miss() {
        let v = json!({"type": "table", "entries": [["0", "1/3"], ["1/2", "2/3"]]});
        let b = Cocycle::parse(Field::root(&v, "beta"), None).unwrap();
        assert_eq!(b.eval(&rat(1, 2)).unwrap(), rat(2, 3));
        assert!(b.eval(&rat(1, 4)).is_err());
        assert!(b.integer_affine().is_none());
        assert!(b.values_in_cyclic(3));
        assert!(!b.values_in_cyclic(2));
    }

    #[test]
    fn unknown_type_names_field() {
        let v = json!({"type": "spline"});
        match Cocycle::parse(Field::root(&v, "params.beta"), None).unwrap_err() {
            Error::Spec { field, .. } => assert_eq!(field, "params.beta.type"),
            e => panic!("{e}"),
        }
    }
}
