//! Flattening tables into marker-delimited text for model input, and
//! building (input, references) training pairs.
//!
//! The default grammar renders properties first (`[P] key: value`), then
//! every row opened by `[R]`, with each anchor cell rendered as `[H] value`
//! for headings or `[C] value` otherwise. Covered cells are skipped so a
//! merged region appears once. Tokens are joined by single spaces.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::Dataset;
use crate::table::{Cell, Table};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinearizeError {
    #[error("highlighted-only linearization requested but the table has no highlighted cells")]
    EmptySelection,
    #[error("invalid linearization config: {0}")]
    InvalidConfig(String),
    #[error("unknown linearizer `{0}`")]
    UnknownLinearizer(String),
    #[error("a linearizer with id `{0}` is already registered")]
    Conflict(String),
    #[error("dataset `{id}` has no split `{split}`")]
    UnknownSplit { id: String, split: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearizationConfig {
    pub include_properties: bool,
    pub highlighted_only: bool,
    pub property_marker: String,
    pub row_marker: String,
    pub cell_marker: String,
    pub heading_marker: String,
}

impl Default for LinearizationConfig {
    fn default() -> Self {
        Self {
            include_properties: true,
            highlighted_only: false,
            property_marker: "[P]".into(),
            row_marker: "[R]".into(),
            cell_marker: "[C]".into(),
            heading_marker: "[H]".into(),
        }
    }
}

impl LinearizationConfig {
    pub fn validate(&self) -> Result<(), LinearizeError> {
        let markers = [
            &self.property_marker,
            &self.row_marker,
            &self.cell_marker,
            &self.heading_marker,
        ];
        if markers.iter().any(|m| m.is_empty()) {
            return Err(LinearizeError::InvalidConfig(
                "markers must be non-empty".into(),
            ));
        }
        for (i, a) in markers.iter().enumerate() {
            if markers[i + 1..].contains(a) {
                return Err(LinearizeError::InvalidConfig(format!(
                    "marker `{a}` is used twice"
                )));
            }
        }
        Ok(())
    }
}

pub fn linearize(table: &Table, config: &LinearizationConfig) -> Result<String, LinearizeError> {
    config.validate()?;
    if config.highlighted_only && table.highlighted_cells().is_empty() {
        return Err(LinearizeError::EmptySelection);
    }

    let mut tokens: Vec<String> = Vec::new();
    if config.include_properties {
        for (k, v) in table.properties() {
            tokens.push(format!("{} {k}: {v}", config.property_marker));
        }
    }
    for row in table.grid() {
        let cells: Vec<String> = row
            .iter()
            .filter_map(Cell::as_anchor)
            .filter(|a| !config.highlighted_only || a.is_highlighted)
            .map(|a| {
                let marker = if a.is_heading {
                    &config.heading_marker
                } else {
                    &config.cell_marker
                };
                format!("{marker} {}", a.value)
            })
            .collect();
        if config.highlighted_only && cells.is_empty() {
            continue;
        }
        tokens.push(config.row_marker.clone());
        tokens.extend(cells);
    }
    Ok(tokens.join(" "))
}

/// Default-config linearization; cannot fail.
pub fn linearize_default(table: &Table) -> String {
    linearize(table, &LinearizationConfig::default()).expect("default config is valid")
}

pub type LinearizerFn = Arc<dyn Fn(&Table) -> String + Send + Sync>;

pub const DEFAULT_LINEARIZER: &str = "default";

/// Named linearization functions. Starts with [`DEFAULT_LINEARIZER`].
pub struct LinearizerRegistry {
    entries: RwLock<BTreeMap<String, LinearizerFn>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearizerHandle(String);

impl LinearizerHandle {
    pub fn id(&self) -> &str {
        &self.0
    }
}

impl Default for LinearizerRegistry {
    fn default() -> Self {
        let mut entries: BTreeMap<String, LinearizerFn> = BTreeMap::new();
        entries.insert(DEFAULT_LINEARIZER.into(), Arc::new(linearize_default));
        Self {
            entries: RwLock::new(entries),
        }
    }
}

impl LinearizerRegistry {
    pub fn register(
        &self,
        id: impl Into<String>,
        f: LinearizerFn,
    ) -> Result<LinearizerHandle, LinearizeError> {
        let id = id.into();
        let mut entries = self.entries.write().expect("linearizer registry poisoned");
        if entries.contains_key(&id) {
            return Err(LinearizeError::Conflict(id));
        }
        entries.insert(id.clone(), f);
        Ok(LinearizerHandle(id))
    }

    pub fn get(&self, id: &str) -> Result<LinearizerFn, LinearizeError> {
        self.entries
            .read()
            .expect("linearizer registry poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| LinearizeError::UnknownLinearizer(id.to_string()))
    }

    pub fn call(&self, id: &str, table: &Table) -> Result<String, LinearizeError> {
        Ok(self.get(id)?(table))
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries
            .read()
            .expect("linearizer registry poisoned")
            .keys()
            .cloned()
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    #[serde(rename = "in")]
    pub input: String,
    #[serde(rename = "refs")]
    pub references: Vec<String>,
}

pub fn make_training_pairs(
    registry: &LinearizerRegistry,
    dataset: &Dataset,
    split: &str,
    linearizer_id: &str,
    task_prefix: Option<&str>,
) -> Result<Vec<TrainingPair>, LinearizeError> {
    let examples = dataset
        .split(split)
        .ok_or_else(|| LinearizeError::UnknownSplit {
            id: dataset.id().to_string(),
            split: split.to_string(),
        })?;
    let f = registry.get(linearizer_id)?;
    Ok(examples
        .iter()
        .map(|ex| {
            let body = f(ex.table());
            let input = match task_prefix {
                Some(p) => format!("{p} {body}"),
                None => body,
            };
            TrainingPair {
                input,
                references: ex.references().to_vec(),
            }
        })
        .collect())
}

/// Writes one `{"in": ..., "refs": [...]}` object per line.
pub fn write_training_pairs_jsonl<W: Write>(
    mut out: W,
    pairs: &[TrainingPair],
) -> std::io::Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
