use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttributeKind {
    Continuous,
    /// Standardized by default; `one_hot` encodes each observed value as its
    /// own category instead.
    Integer {
        #[serde(default)]
        one_hot: bool,
    },
    Categorical {
        categories: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn continuous(name: &str) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Continuous,
        }
    }

    pub fn integer(name: &str) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Integer { one_hot: false },
        }
    }

    pub fn categorical<S: AsRef<str>>(name: &str, categories: &[S]) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Categorical {
                categories: categories.iter().map(|c| c.as_ref().to_string()).collect(),
            },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, AttributeKind::Categorical { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<Attribute>,
    /// Attribute used as the classification label in utility evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

impl Schema {
    pub fn new(attributes: Vec<Attribute>, target: Option<&str>) -> Result<Self> {
        let schema = Self {
            attributes,
            target: target.map(str::to_string),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.attributes.is_empty() {
            return Err(Error::Schema("no attributes".into()));
        }
        let mut seen = HashSet::new();
        for a in &self.attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute {:?}", a.name)));
            }
            if let AttributeKind::Categorical { categories } = &a.kind {
                if categories.is_empty() {
                    return Err(Error::Schema(format!(
                        "attribute {:?} has no categories",
                        a.name
                    )));
                }
                let distinct: HashSet<_> = categories.iter().collect();
                if distinct.len() != categories.len() {
                    return Err(Error::Schema(format!(
                        "attribute {:?} lists a category twice",
                        a.name
                    )));
                }
            }
        }
        if let Some(t) = &self.target {
            let idx = self.index_of(t)?;
            if !self.attributes[idx].is_categorical() {
                return Err(Error::Schema(format!("target {t:?} is not categorical")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.attributes.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::Schema(format!("unknown attribute {name:?}")))
    }
}

/// One raw cell: a number for continuous/integer attributes, a category
/// index for categorical ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Number(f64),
    Category(usize),
}

impl Value {
    pub fn as_number(self) -> Option<f64> {
        match self {
            Value::Number(v) => Some(v),
            Value::Category(_) => None,
        }
    }

    pub fn as_category(self) -> Option<usize> {
        match self {
            Value::Category(c) => Some(c),
            Value::Number(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    schema: Schema,
    rows: Vec<Vec<Value>>,
}

impl TabularDataset {
    pub fn new(schema: Schema, rows: Vec<Vec<Value>>) -> Result<Self> {
        schema.validate()?;
        for (r, row) in rows.iter().enumerate() {
            check_row(&schema, r, row)?;
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn numeric_column(&self, attr: usize) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r[attr].as_number()).collect()
    }

    pub fn category_column(&self, attr: usize) -> Option<Vec<usize>> {
        self.rows.iter().map(|r| r[attr].as_category()).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> Self {
        Self {
            schema: self.schema.clone(),
            rows: self.rows[..n.min(self.rows.len())].to_vec(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.schema.names())?;
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&self.schema.attributes)
                .map(|(v, a)| format_cell(a, *v))
                .collect();
            w.write_record(&cells)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_cell(attr: &Attribute, v: Value) -> String {
    match (v, &attr.kind) {
        (Value::Category(c), AttributeKind::Categorical { categories }) => categories[c].clone(),
        (Value::Number(x), _) => x.to_string(),
        (Value::Category(c), _) => c.to_string(),
    }
}

fn check_row(schema: &Schema, r: usize, row: &[Value]) -> Result<()> {
    if row.len() != schema.len() {
        return Err(Error::Schema(format!(
            "row {r} has {} values, schema has {} attributes",
            row.len(),
            schema.len()
        )));
    }
    for (v, a) in row.iter().zip(&schema.attributes) {
        let ok = match (&a.kind, v) {
            (AttributeKind::Categorical { categories }, Value::Category(c)) => {
                *c < categories.len()
            }
            (AttributeKind::Continuous, Value::Number(x)) => x.is_finite(),
            (AttributeKind::Integer { .. }, Value::Number(x)) => x.is_finite() && x.fract() == 0.0,
            _ => false,
        };
        if !ok {
            return Err(Error::Schema(format!(
                "row {r}: invalid value {v:?} for attribute {:?}",
                a.name
            )));
        }
    }
    Ok(())
}

fn parse_cell(attr: &Attribute, row: usize, raw: &str) -> Result<Value> {
    let bad = |message: &str| Error::Parse {
        row,
        column: attr.name.clone(),
        value: raw.to_string(),
        message: message.to_string(),
    };
    let s = raw.trim();
    if s.is_empty() {
        return Err(bad("missing value"));
    }
    match &attr.kind {
        AttributeKind::Continuous => {
            let v: f64 = s.parse().map_err(|_| bad("not a number"))?;
            if !v.is_finite() {
                return Err(bad("not finite"));
            }
            Ok(Value::Number(v))
        }
        AttributeKind::Integer { .. } => {
            let v: f64 = s.parse().map_err(|_| bad("not a number"))?;
            if !v.is_finite() || v.fract() != 0.0 {
                return Err(bad("not an integer"));
            }
            Ok(Value::Number(v))
        }
        AttributeKind::Categorical { categories } => categories
            .iter()
            .position(|c| c == s)
            .map(Value::Category)
            .ok_or_else(|| bad("unknown category")),
    }
}

/// Reads a comma-separated file whose header must list the schema's
/// attribute names in order. Parse errors carry a 1-based data-row number.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<TabularDataset> {
    schema.validate()?;
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let expected: Vec<String> = schema.names().iter().map(|s| s.to_string()).collect();
    if header != expected {
        return Err(Error::HeaderMismatch {
            expected,
            found: header,
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .zip(&schema.attributes)
            .map(|(cell, attr)| parse_cell(attr, i + 1, cell))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    TabularDataset::new(schema.clone(), rows)
}

/// Dataset without row `target`, order preserved.
pub fn leave_one_out(ds: &TabularDataset, target: usize) -> Result<TabularDataset> {
    if target >= ds.len() {
        return Err(Error::InvalidArgument(format!(
            "target index {target} out of range for {} rows",
            ds.len()
        )));
    }
    let mut rows = ds.rows.clone();
    rows.remove(target);
    Ok(TabularDataset {
        schema: ds.schema.clone(),
        rows,
    })
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(v) => write!(f, "{v}"),
            Value::Category(c) => write!(f, "#{c}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::new(
            vec![
                Attribute::continuous("a"),
                Attribute::integer("n"),
                Attribute::categorical("c", &["x", "y"]),
            ],
            Some("c"),
        )
        .unwrap()
    }

    #[test]
    fn schema_validation() {
        assert!(Schema::new(
            vec![Attribute::continuous("a"), Attribute::continuous("a")],
            None
        )
        .is_err());
        assert!(Schema::new(vec![Attribute::categorical::<&str>("c", &[])], None).is_err());
        assert!(Schema::new(vec![Attribute::categorical("c", &["x", "x"])], None).is_err());
        assert!(Schema::new(vec![Attribute::continuous("a")], Some("a")).is_err());
        assert!(Schema::new(vec![Attribute::continuous("a")], Some("b")).is_err());
    }

    #[test]
    fn leave_one_out_removes_one_row() {
        let rows = (0..3)
            .map(|i| {
                vec![
                    Value::Number(i as f64),
                    Value::Number(1.0),
                    Value::Category(0),
                ]
            })
            .collect();
        let ds = TabularDataset::new(schema(), rows).unwrap();
        let out = leave_one_out(&ds, 1).unwrap();
        assert_eq!(out.rows(), &[ds.rows()[0].clone(), ds.rows()[2].clone()]);
        assert!(leave_one_out(&ds, 3).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = vec![vec![
            Value::Number(1.0),
            Value::Number(1.5),
            Value::Category(0),
        ]];
        assert!(TabularDataset::new(schema(), bad).is_err());
        let bad = vec![vec![
            Value::Number(1.0),
            Value::Number(1.0),
            Value::Category(2),
        ]];
        assert!(TabularDataset::new(schema(), bad).is_err());
    }
}
