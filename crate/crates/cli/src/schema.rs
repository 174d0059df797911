//! Field-by-field config checking that reports every bad field at once.

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid config:\n  {}", .fields.join("\n  "))]
pub struct SchemaError {
    pub fields: Vec<String>,
}

pub struct Fields<'a> {
    obj: Map<String, Value>,
    seen: Vec<&'a str>,
    errors: Vec<String>,
}

impl<'a> Fields<'a> {
    pub fn new(v: &Value) -> Result<Self, SchemaError> {
        match v {
            Value::Object(m) => Ok(Fields {
                obj: m.clone(),
                seen: Vec::new(),
                errors: Vec::new(),
            }),
            Value::Null => Ok(Fields {
                obj: Map::new(),
                seen: Vec::new(),
                errors: Vec::new(),
            }),
            other => Err(SchemaError {
                fields: vec![format!("<root>: expected an object, got {other}")],
            }),
        }
    }

    fn parse<T: DeserializeOwned>(&mut self, name: &'a str) -> Option<Option<T>> {
        self.seen.push(name);
        match self.obj.get(name) {
            None | Some(Value::Null) => Some(None),
            Some(v) => match serde_json::from_value::<T>(v.clone()) {
                Ok(x) => Some(Some(x)),
                Err(e) => {
                    self.errors.push(format!("{name}: {e}"));
                    None
                }
            },
        }
    }

    pub fn req<T: DeserializeOwned>(&mut self, name: &'a str) -> Option<T> {
        match self.parse(name)? {
            Some(x) => Some(x),
            None => {
                self.errors.push(format!("{name}: missing"));
                None
            }
        }
    }

    pub fn opt<T: DeserializeOwned>(&mut self, name: &'a str, default: T) -> Option<T> {
        Some(self.parse(name)?.unwrap_or(default))
    }

    pub fn maybe<T: DeserializeOwned>(&mut self, name: &'a str) -> Option<Option<T>> {
        self.parse(name)
    }

    pub fn check(&mut self, ok: bool, name: &str, msg: impl Into<String>) {
        if !ok {
            self.errors.push(format!("{name}: {}", msg.into()));
        }
    }

    /// Unknown keys are errors too.
    pub fn finish(mut self) -> Result<(), SchemaError> {
        let mut unknown: Vec<String> = self
            .obj
            .keys()
            .filter(|k| !self.seen.contains(&k.as_str()))
            .map(|k| format!("{k}: unknown field"))
            .collect();
        unknown.sort();
        self.errors.extend(unknown);
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(SchemaError {
                fields: self.errors,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn collects_all_errors() {
        let v = json!({"a": "x", "c": 1});
        let mut f = Fields::new(&v).unwrap();
        let a: Option<f64> = f.req("a");
        let b: Option<f64> = f.req("b");
        assert!(a.is_none() && b.is_none());
        let e = f.finish().unwrap_err();
        assert_eq!(e.fields.len(), 3);
        assert!(e.fields[0].starts_with("a:"));
        assert_eq!(e.fields[1], "b: missing");
        assert_eq!(e.fields[2], "c: unknown field");
    }
}
