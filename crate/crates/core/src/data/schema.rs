use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numerical,
    Categorical,
}

impl FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "numerical" | "num" | "numeric" => Ok(ColumnKind::Numerical),
            "categorical" | "cat" => Ok(ColumnKind::Categorical),
            other => Err(Error::Schema(format!("unknown column kind `{other}`"))),
        }
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Numerical => "numerical",
            ColumnKind::Categorical => "categorical",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Number of levels after regrouping. `None` for numerical columns and
    /// for categorical columns that have not been encoded yet.
    pub cardinality: Option<usize>,
}

impl ColumnSchema {
    pub fn numerical(name: impl Into<String>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Numerical,
            cardinality: None,
        }
    }

    pub fn categorical(name: impl Into<String>, cardinality: Option<usize>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Categorical,
            cardinality,
        }
    }

    pub fn is_categorical(&self) -> bool {
        self.kind == ColumnKind::Categorical
    }
}

/// Parses a schema listing of `name,kind` lines. Blank lines and lines
/// starting with `#` are ignored.
pub fn parse_schema(text: &str) -> Result<Vec<ColumnSchema>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, kind) = line.rsplit_once(',').ok_or_else(|| {
            Error::Schema(format!("line {}: expected `name,kind`", lineno + 1))
        })?;
        let name = name.trim().to_string();
        if name.is_empty() {
            return Err(Error::Schema(format!("line {}: empty column name", lineno + 1)));
        }
        if !seen.insert(name.clone()) {
            return Err(Error::Schema(format!("duplicate column `{name}`")));
        }
        let kind: ColumnKind = kind.parse()?;
        out.push(ColumnSchema {
            name,
            kind,
            cardinality: None,
        });
    }
    if out.is_empty() {
        return Err(Error::Empty("schema lists no columns".into()));
    }
    Ok(out)
}

pub fn read_schema(path: impl AsRef<Path>) -> Result<Vec<ColumnSchema>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_schema(&text)
}

pub fn format_schema(schema: &[ColumnSchema]) -> String {
    schema
        .iter()
        .map(|c| format!("{},{}\n", c.name, c.kind))
        .collect()
}
