//! Path-tracking access to JSON documents, so validation errors name the
//! offending field.

use serde_json::Value;

use crate::arith::{parse_number, Rational};
use crate::error::{Error, Result};

#[derive(Clone, Copy)]
pub struct Field<'a> {
    value: &'a Value,
    path: &'a str,
}

/// Owned child handle; keeps the path string alive for nested lookups.
pub struct Child<'a> {
    value: &'a Value,
    path: String,
}

impl<'a> Child<'a> {
    pub fn field(&self) -> Field<'_> {
        Field {
            value: self.value,
            path: &self.path,
        }
    }
}

impl<'a> Field<'a> {
    pub fn root(value: &'a Value, path: &'a str) -> Self {
        Self { value, path }
    }

    pub fn value(&self) -> &'a Value {
        self.value
    }

    pub fn path(&self) -> &str {
        self.path
    }

    pub fn error(&self, reason: impl Into<String>) -> Error {
        Error::spec(self.path, reason)
    }

    fn join(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    pub fn opt(&self, key: &str) -> Option<Child<'a>> {
        self.value
            .as_object()
            .and_then(|o| o.get(key))
            .filter(|v| !v.is_null())
            .map(|v| Child {
                value: v,
                path: self.join(key),
            })
    }

    pub fn get(&self, key: &str) -> Result<Child<'a>> {
        if !self.value.is_object() {
            return Err(self.error("expected an object"));
        }
        self.opt(key)
            .ok_or_else(|| Error::spec(self.join(key), "missing required field"))
    }

    /// Rejects keys outside `allowed`.
    pub fn only_keys(&self, allowed: &[&str]) -> Result<()> {
        let obj = self
            .value
            .as_object()
            .ok_or_else(|| self.error("expected an object"))?;
        for k in obj.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::spec(
                    self.join(k),
                    format!("unknown field (expected one of: {})", allowed.join(", ")),
                ));
            }
        }
        Ok(())
    }

    pub fn as_str(&self) -> Result<&'a str> {
        self.value
            .as_str()
            .ok_or_else(|| self.error("expected a string"))
    }

    pub fn as_u64(&self) -> Result<u64> {
        self.value
            .as_u64()
            .ok_or_else(|| self.error("expected a non-negative integer"))
    }

    pub fn as_i64(&self) -> Result<i64> {
        self.value
            .as_i64()
            .ok_or_else(|| self.error("expected an integer"))
    }

    pub fn items(&self) -> Result<Vec<Child<'a>>> {
        let arr = self
            .value
            .as_array()
            .ok_or_else(|| self.error("expected an array"))?;
        Ok(arr
            .iter()
            .enumerate()
            .map(|(i, v)| Child {
                value: v,
                path: format!("{}[{i}]", self.path),
            })
            .collect())
    }

    /// Numbers are written as strings (`"p/q"`, decimals, `sqrt(n)/d`);
    /// plain JSON integers are accepted too.
    pub fn as_number(&self, precision: Option<u32>) -> Result<Rational> {
        match self.value {
            Value::String(s) => parse_number(s, precision, self.path),
            Value::Number(n) if n.is_i64() => {
                Ok(Rational::from_integer(n.as_i64().expect("checked").into()))
            }
            Value::Number(_) => Err(self.error(
                "non-integer numbers must be written as strings (\"p/q\" or a decimal string)",
            )),
            _ => Err(self.error("expected a number string")),
        }
    }
}
