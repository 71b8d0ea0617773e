//! Conversions from source dataset shapes (triple graphs, key-value records,
//! highlighted tables) into [`Table`]s, plus the dataset catalog.

mod catalog;

pub use catalog::{
    Catalog, DataType, Dataset, DatasetInfo, LoaderHandle, LoaderSpec, RawRecord, RowMapper,
    SPLIT_FILE_EXT,
};

use serde::Deserialize;
use thiserror::Error;

use crate::table::{AnchorCell, Cell, Coord, ExampleError, Table, TableError};

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("{0} input is empty")]
    EmptyInput(&'static str),
    #[error("highlight {at} is outside the {n_rows}x{n_cols} table")]
    HighlightOutOfBounds {
        at: Coord,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("malformed payload at line {line}, column {column}: {reason}")]
    Payload {
        line: usize,
        column: usize,
        reason: String,
    },
    #[error("{file}:{line}: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("example {index} in {file}: {reason}")]
    Ingestion {
        file: String,
        index: usize,
        reason: String,
    },
    #[error("unknown dataset `{id}`; known datasets: [{}]", .known.join(", "))]
    UnknownDataset { id: String, known: Vec<String> },
    #[error("dataset `{id}` has no split `{split}`; available: [{}]", .available.join(", "))]
    UnknownSplit {
        id: String,
        split: String,
        available: Vec<String>,
    },
    #[error("a loader with id `{0}` is already registered")]
    Conflict(String),
    #[error("invalid dataset info: {0}")]
    InvalidInfo(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Example(#[from] ExampleError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One subject-predicate-object statement.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(from = "(String, String, String)")]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    pub fn new(s: impl Into<String>, p: impl Into<String>, o: impl Into<String>) -> Self {
        Self {
            subject: s.into(),
            predicate: p.into(),
            object: o.into(),
        }
    }
}

impl From<(String, String, String)> for Triple {
    fn from((s, p, o): (String, String, String)) -> Self {
        Self::new(s, p, o)
    }
}

pub const TRIPLE_HEADER: [&str; 3] = ["subject", "predicate", "object"];

/// One row per triple under a `subject | predicate | object` heading row.
pub fn triples_to_table(
    triples: &[Triple],
    properties: Vec<(String, String)>,
) -> Result<Table, AdapterError> {
    if triples.is_empty() {
        return Err(AdapterError::EmptyInput("triple"));
    }
    let mut rows = Vec::with_capacity(triples.len() + 1);
    rows.push(
        TRIPLE_HEADER
            .iter()
            .map(|h| AnchorCell::heading(*h))
            .collect(),
    );
    rows.extend(triples.iter().map(|t| {
        vec![
            AnchorCell::new(t.subject.clone()),
            AnchorCell::new(t.predicate.clone()),
            AnchorCell::new(t.object.clone()),
        ]
    }));
    Ok(Table::from_anchor_rows(rows)?.with_properties(properties))
}

/// Two columns; keys in the first column are row headings.
pub fn kv_to_table(
    pairs: &[(String, String)],
    properties: Vec<(String, String)>,
) -> Result<Table, AdapterError> {
    if pairs.is_empty() {
        return Err(AdapterError::EmptyInput("key-value"));
    }
    let rows = pairs
        .iter()
        .map(|(k, v)| vec![AnchorCell::heading(k.clone()), AnchorCell::new(v.clone())])
        .collect();
    Ok(Table::from_anchor_rows(rows)?.with_properties(properties))
}

#[derive(Deserialize)]
struct HighlightedPayload {
    #[serde(flatten)]
    table: serde_json::Value,
    highlights: Option<Vec<[usize; 2]>>,
}

/// Parses a canonical table serialization with an optional `"highlights"`
/// coordinate list.
///
/// When the list is present it is authoritative: exactly the anchors
/// governing the listed coordinates end up highlighted. Without it, the
/// per-cell `highlighted` flags of the payload are kept.
pub fn highlighted_table_payload_to_table(payload: &str) -> Result<Table, AdapterError> {
    let parsed: HighlightedPayload = serde_json::from_str(payload).map_err(payload_error)?;
    highlighted_payload_into_table(parsed)
}

pub(crate) fn highlighted_value_to_table(value: serde_json::Value) -> Result<Table, AdapterError> {
    let parsed: HighlightedPayload = serde_json::from_value(value).map_err(payload_error)?;
    highlighted_payload_into_table(parsed)
}

fn highlighted_payload_into_table(p: HighlightedPayload) -> Result<Table, AdapterError> {
    let mut table: Table = serde_json::from_value(p.table).map_err(payload_error)?;
    if let Some(highlights) = p.highlights {
        apply_highlights(&mut table, &highlights)?;
    }
    Ok(table)
}

/// Clears every highlight flag, then highlights the anchors governing `coords`.
pub fn apply_highlights(table: &mut Table, coords: &[[usize; 2]]) -> Result<(), AdapterError> {
    let (n_rows, n_cols) = (table.n_rows(), table.n_cols());
    let targets = coords
        .iter()
        .map(|&[r, c]| {
            let at = Coord::new(r, c);
            table
                .anchor_of(at)
                .map_err(|_| AdapterError::HighlightOutOfBounds { at, n_rows, n_cols })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let anchors: Vec<Coord> = table.anchors().map(|(at, _)| at).collect();
    for at in anchors {
        table.set_highlight(at, false)?;
    }
    for at in targets {
        table.set_highlight(at, true)?;
    }
    Ok(())
}

fn payload_error(e: serde_json::Error) -> AdapterError {
    AdapterError::Payload {
        line: e.line(),
        column: e.column(),
        reason: e.to_string(),
    }
}

/// Stacks two tables, each preceded by a full-width heading row.
///
/// `separator_heading` may hold two titles separated by `|` (e.g.
/// `"box score|line score"`); otherwise the titles are the separator with a
/// section number appended.
pub fn merge_tables_vertically(upper: &Table, lower: &Table, separator_heading: &str) -> Table {
    let titles: Vec<String> = match separator_heading.split_once('|') {
        Some((a, b)) => vec![a.trim().to_string(), b.trim().to_string()],
        None => vec![
            format!("{separator_heading} 1"),
            format!("{separator_heading} 2"),
        ],
    };
    stack_tables(&[(titles[0].as_str(), upper), (titles[1].as_str(), lower)])
}

/// Stacks any number of titled sections into one table. Narrower sections
/// are right-padded with empty cells; properties are concatenated in order.
pub fn stack_tables(sections: &[(&str, &Table)]) -> Table {
    let width = sections
        .iter()
        .map(|(_, t)| t.n_cols())
        .max()
        .unwrap_or(1)
        .max(1);
    let mut grid: Vec<Vec<Cell>> = Vec::new();
    let mut properties = Vec::new();

    for (title, table) in sections {
        let heading_row = grid.len();
        let mut row = vec![Cell::Anchor(
            AnchorCell::heading(*title).with_span(1, width),
        )];
        row.extend((1..width).map(|_| Cell::Covered {
            anchor: Coord::new(heading_row, 0),
        }));
        grid.push(row);

        let offset = grid.len();
        for src in table.grid() {
            let mut row: Vec<Cell> = src
                .iter()
                .map(|cell| match cell {
                    Cell::Covered { anchor } => Cell::Covered {
                        anchor: Coord::new(anchor.row + offset, anchor.col),
                    },
                    anchor => anchor.clone(),
                })
                .collect();
            row.resize_with(width, || Cell::Anchor(AnchorCell::new("")));
            grid.push(row);
        }
        properties.extend(table.properties().iter().cloned());
    }

    let n_rows = grid.len();
    Table::from_parts_unchecked(n_rows, width, grid, properties)
}
