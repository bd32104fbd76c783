use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Nominal,
    Ordinal,
    Drop,
    Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal_order: Option<Vec<String>>,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
            ordinal_order: None,
        }
    }

    pub fn ordinal(name: impl Into<String>, order: &[&str]) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Ordinal,
            ordinal_order: Some(order.iter().map(|s| s.to_string()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSchema>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSchema>) -> Result<Self> {
        let s = Self { columns };
        s.validate()?;
        Ok(s)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let s: Schema = serde_json::from_str(&text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let labels = self
            .columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Label)
            .count();
        if labels != 1 {
            return Err(Error::Schema(format!(
                "exactly one label column required, found {labels}"
            )));
        }
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name `{}`", c.name)));
            }
            match (c.kind, &c.ordinal_order) {
                (ColumnKind::Ordinal, None) => {
                    return Err(Error::Schema(format!(
                        "ordinal column `{}` needs ordinal_order",
                        c.name
                    )))
                }
                (ColumnKind::Ordinal, Some(order)) if order.is_empty() => {
                    return Err(Error::Schema(format!(
                        "ordinal column `{}` has an empty ordinal_order",
                        c.name
                    )))
                }
                (ColumnKind::Ordinal, Some(_)) | (_, None) => {}
                (_, Some(_)) => {
                    return Err(Error::Schema(format!(
                        "ordinal_order given for non-ordinal column `{}`",
                        c.name
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_two_labels() {
        let err = Schema::new(vec![
            ColumnSchema::new("a", ColumnKind::Label),
            ColumnSchema::new("b", ColumnKind::Label),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn ordinal_order_iff_ordinal() {
        let mut c = ColumnSchema::new("a", ColumnKind::Numeric);
        c.ordinal_order = Some(vec!["x".into()]);
        let bad = Schema::new(vec![c, ColumnSchema::new("y", ColumnKind::Label)]);
        assert!(bad.is_err());
        let bad = Schema::new(vec![
            ColumnSchema::new("a", ColumnKind::Ordinal),
            ColumnSchema::new("y", ColumnKind::Label),
        ]);
        assert!(bad.is_err());
    }

    #[test]
    fn parses_json_layout() {
        let s: Schema = serde_json::from_str(
            r#"{"columns":[{"name":"size","kind":"ordinal","ordinal_order":["s","m","l"]},
                           {"name":"id","kind":"drop"},{"name":"y","kind":"label"}]}"#,
        )
        .unwrap();
        s.validate().unwrap();
        assert_eq!(s.columns[0].ordinal_order.as_ref().unwrap().len(), 3);
    }
}
