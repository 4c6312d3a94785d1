// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use super::TaskError;

/// String-keyed record flowing between tasks: user inputs plus the results
/// accumulated along the DAG.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DataRecord(Map<String, Value>);

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

impl DataRecord {
    pub fn new() -> Self {
        DataRecord(Map::new())
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.0.keys()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Writes `key`, refusing to replace an existing value of another type.
    pub fn set(&mut self, key: &str, value: impl Into<Value>) -> Result<(), TaskError> {
        let value = value.into();
        if let Some(existing) = self.0.get(key) {
            if !existing.is_null() && type_name(existing) != type_name(&value) {
                return Err(TaskError::TypeConflict {
                    key: key.to_string(),
                    existing: type_name(existing),
                    incoming: type_name(&value),
                });
            }
        }
        self.0.insert(key.to_string(), value);
        Ok(())
    }

    /// Folds `other` into `self` key by key, with the same type rule as [`set`](Self::set).
    pub fn merge(&mut self, other: &DataRecord) -> Result<(), TaskError> {
        for (k, v) in &other.0 {
            self.set(k, v.clone())?;
        }
        Ok(())
    }

    pub fn number(&self, key: &str) -> Result<&Number, TaskError> {
        match self.0.get(key) {
            None => Err(TaskError::MissingKey(key.to_string())),
            Some(Value::Number(n)) => Ok(n),
            Some(_) => Err(TaskError::NotNumeric(key.to_string())),
        }
    }

    pub fn f64(&self, key: &str) -> Result<f64, TaskError> {
        self.number(key)?
            .as_f64()
            .ok_or_else(|| TaskError::NotNumeric(key.to_string()))
    }

    pub fn as_map(&self) -> &Map<String, Value> {
        &self.0
    }

    pub fn into_map(self) -> Map<String, Value> {
        self.0
    }
}

impl From<Map<String, Value>> for DataRecord {
    fn from(m: Map<String, Value>) -> Self {
        DataRecord(m)
    }
}

impl<K: Into<String>, V: Into<Value>> FromIterator<(K, V)> for DataRecord {
    fn from_iter<T: IntoIterator<Item = (K, V)>>(iter: T) -> Self {
        DataRecord(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn set_rejects_type_change() {
        let mut r: DataRecord = [("a", json!(1))].into_iter().collect();
        r.set("a", 2.5).unwrap();
        assert!(matches!(r.set("a", "x"), Err(TaskError::TypeConflict { .. })));
        assert_eq!(r.get("a"), Some(&json!(2.5)));
    }

    #[test]
    fn merge_unions_keys() {
        let mut a: DataRecord = [("a", json!(1)), ("resultPart0", json!(6))].into_iter().collect();
        let b: DataRecord = [("a", json!(1)), ("resultPart1", json!(0.5))].into_iter().collect();
        a.merge(&b).unwrap();
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn number_errors() {
        let r: DataRecord = [("s", json!("x"))].into_iter().collect();
        assert!(matches!(r.f64("s"), Err(TaskError::NotNumeric(_))));
        assert!(matches!(r.f64("missing"), Err(TaskError::MissingKey(_))));
    }
}
