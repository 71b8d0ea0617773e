//! Canonical table representation.
//!
//! A [`Table`] is a rectangular grid of cells. Merged regions are stored
//! explicitly: the top-left cell of a region is an [`Cell::Anchor`] carrying the
//! value, flags and spans, and every other cell of the region is a
//! [`Cell::Covered`] pointing back at it. Looking up any coordinate inside a
//! merged region therefore resolves to the anchor's value.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Zero-based (row, column) grid position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

impl From<(usize, usize)> for Coord {
    fn from((row, col): (usize, usize)) -> Self {
        Self { row, col }
    }
}

/// Value-bearing cell; the top-left corner of its span rectangle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnchorCell {
    pub value: String,
    pub is_heading: bool,
    pub is_highlighted: bool,
    pub row_span: usize,
    pub col_span: usize,
}

impl AnchorCell {
    pub fn new(value: impl Into<String>) -> Self {
        Self {
            value: value.into(),
            is_heading: false,
            is_highlighted: false,
            row_span: 1,
            col_span: 1,
        }
    }

    pub fn heading(value: impl Into<String>) -> Self {
        Self {
            is_heading: true,
            ..Self::new(value)
        }
    }

    pub fn with_span(mut self, row_span: usize, col_span: usize) -> Self {
        self.row_span = row_span;
        self.col_span = col_span;
        self
    }

    pub fn highlighted(mut self, on: bool) -> Self {
        self.is_highlighted = on;
        self
    }

    fn is_single(&self) -> bool {
        self.row_span == 1 && self.col_span == 1
    }

    fn contains(&self, at: Coord, probe: Coord) -> bool {
        probe.row >= at.row
            && probe.row < at.row + self.row_span
            && probe.col >= at.col
            && probe.col < at.col + self.col_span
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cell {
    Anchor(AnchorCell),
    /// Part of a merged region; the value lives at `anchor`.
    Covered {
        anchor: Coord,
    },
}

impl Cell {
    pub fn as_anchor(&self) -> Option<&AnchorCell> {
        match self {
            Cell::Anchor(a) => Some(a),
            Cell::Covered { .. } => None,
        }
    }
}

/// Resolved view of a grid position. For covered positions every field
/// comes from the governing anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellView<'a> {
    pub value: &'a str,
    pub is_heading: bool,
    pub is_highlighted: bool,
    pub anchor: Coord,
    pub row_span: usize,
    pub col_span: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("coordinate {at} out of bounds for a {n_rows}x{n_cols} table")]
    OutOfBounds {
        at: Coord,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("rectangle at {at} with span {row_span}x{col_span} overlaps an existing merged region at {conflict}")]
    MergeConflict {
        at: Coord,
        row_span: usize,
        col_span: usize,
        conflict: Coord,
    },
    #[error("span must be at least 1x1, got {row_span}x{col_span}")]
    InvalidSpan { row_span: usize, col_span: usize },
    #[error("table must have at least one row and one column")]
    Empty,
    #[error("invalid table: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// A single broken table invariant, as reported by [`Table::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyGrid,
    /// `grid.len()` disagrees with `n_rows`.
    RowCount {
        expected: usize,
        found: usize,
    },
    NonRectangular {
        row: usize,
        expected: usize,
        found: usize,
    },
    ZeroSpan {
        at: Coord,
    },
    SpanOutOfBounds {
        at: Coord,
        row_span: usize,
        col_span: usize,
    },
    /// Two anchors claim the same position.
    OverlappingSpans {
        at: Coord,
        first: Coord,
        second: Coord,
    },
    /// A covered cell whose target is missing, not an anchor, or does not span it.
    DanglingCovered {
        at: Coord,
        anchor: Coord,
    },
    /// A covered cell lies in the span of an anchor other than its own target.
    MisattributedCovered {
        at: Coord,
        anchor: Coord,
        owner: Coord,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGrid => write!(f, "empty grid"),
            Violation::RowCount { expected, found } => {
                write!(
                    f,
                    "row count mismatch: n_rows is {expected} but grid has {found} rows"
                )
            }
            Violation::NonRectangular {
                row,
                expected,
                found,
            } => {
                write!(
                    f,
                    "non-rectangular: row {row} has {found} cells, expected {expected}"
                )
            }
            Violation::ZeroSpan { at } => write!(f, "zero span at {at}"),
            Violation::SpanOutOfBounds {
                at,
                row_span,
                col_span,
            } => {
                write!(f, "span {row_span}x{col_span} at {at} leaves the grid")
            }
            Violation::OverlappingSpans { at, first, second } => {
                write!(f, "overlapping spans at {at}: anchors {first} and {second}")
            }
            Violation::DanglingCovered { at, anchor } => {
                write!(
                    f,
                    "covered cell {at} points to {anchor}, which does not span it"
                )
            }
            Violation::MisattributedCovered { at, anchor, owner } => {
                write!(
                    f,
                    "covered cell {at} points to {anchor} but lies in the span of {owner}"
                )
            }
        }
    }
}

/// Rectangular grid of cells plus ordered key-value properties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "repr::TableRepr", into = "repr::TableRepr")]
pub struct Table {
    n_rows: usize,
    n_cols: usize,
    grid: Vec<Vec<Cell>>,
    properties: Vec<(String, String)>,
}

impl Table {
    /// An `n_rows x n_cols` table of empty, unmerged cells.
    pub fn new(n_rows: usize, n_cols: usize) -> Result<Self, TableError> {
        if n_rows == 0 || n_cols == 0 {
            return Err(TableError::Empty);
        }
        let grid = (0..n_rows)
            .map(|_| {
                (0..n_cols)
                    .map(|_| Cell::Anchor(AnchorCell::new("")))
                    .collect()
            })
            .collect();
        Ok(Self {
            n_rows,
            n_cols,
            grid,
            properties: Vec::new(),
        })
    }

    /// Builds an unmerged table from rows of anchors. All rows must have the
    /// same non-zero length.
    pub fn from_anchor_rows(rows: Vec<Vec<AnchorCell>>) -> Result<Self, TableError> {
        let grid: Vec<Vec<Cell>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(Cell::Anchor).collect())
            .collect();
        Self::from_grid(grid, Vec::new())
    }

    /// Builds a table from a raw grid, rejecting any invariant violation.
    pub fn from_grid(
        grid: Vec<Vec<Cell>>,
        properties: Vec<(String, String)>,
    ) -> Result<Self, TableError> {
        let n_rows = grid.len();
        let n_cols = grid.first().map_or(0, Vec::len);
        if n_rows == 0 || n_cols == 0 {
            return Err(TableError::Empty);
        }
        let table = Self::from_parts_unchecked(n_rows, n_cols, grid, properties);
        table.validate().map_err(TableError::Invalid)?;
        Ok(table)
    }

    /// Assembles a table without checking invariants. Use [`Table::validate`]
    /// before relying on it.
    pub fn from_parts_unchecked(
        n_rows: usize,
        n_cols: usize,
        grid: Vec<Vec<Cell>>,
        properties: Vec<(String, String)>,
    ) -> Self {
        Self {
            n_rows,
            n_cols,
            grid,
            properties,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn grid(&self) -> &[Vec<Cell>] {
        &self.grid
    }

    pub fn properties(&self) -> &[(String, String)] {
        &self.properties
    }

    pub fn properties_mut(&mut self) -> &mut Vec<(String, String)> {
        &mut self.properties
    }

    pub fn with_properties(mut self, properties: Vec<(String, String)>) -> Self {
        self.properties = properties;
        self
    }

    pub fn push_property(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.properties.push((key.into(), value.into()));
    }

    /// Iterates anchors in row-major order of their own coordinate.
    pub fn anchors(&self) -> impl Iterator<Item = (Coord, &AnchorCell)> + '_ {
        self.grid.iter().enumerate().flat_map(|(r, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(c, cell)| cell.as_anchor().map(|a| (Coord::new(r, c), a)))
        })
    }

    fn check_bounds(&self, at: Coord) -> Result<(), TableError> {
        if at.row < self.n_rows && at.col < self.n_cols {
            Ok(())
        } else {
            Err(TableError::OutOfBounds {
                at,
                n_rows: self.n_rows,
                n_cols: self.n_cols,
            })
        }
    }

    /// Coordinate of the anchor governing `at`.
    pub fn anchor_of(&self, at: Coord) -> Result<Coord, TableError> {
        self.check_bounds(at)?;
        Ok(match &self.grid[at.row][at.col] {
            Cell::Anchor(_) => at,
            Cell::Covered { anchor } => *anchor,
        })
    }

    fn anchor_mut(&mut self, at: Coord) -> Result<&mut AnchorCell, TableError> {
        let target = self.anchor_of(at)?;
        match &mut self.grid[target.row][target.col] {
            Cell::Anchor(a) => Ok(a),
            Cell::Covered { .. } => Err(TableError::Invalid(vec![Violation::DanglingCovered {
                at,
                anchor: target,
            }])),
        }
    }

    pub fn cell_at(&self, at: Coord) -> Result<CellView<'_>, TableError> {
        let target = self.anchor_of(at)?;
        let anchor = self
            .grid
            .get(target.row)
            .and_then(|r| r.get(target.col))
            .and_then(Cell::as_anchor)
            .ok_or_else(|| {
                TableError::Invalid(vec![Violation::DanglingCovered { at, anchor: target }])
            })?;
        Ok(CellView {
            value: &anchor.value,
            is_heading: anchor.is_heading,
            is_highlighted: anchor.is_highlighted,
            anchor: target,
            row_span: anchor.row_span,
            col_span: anchor.col_span,
        })
    }

    /// Replaces the value of the anchor governing `at`.
    pub fn set_cell_value(
        &mut self,
        at: Coord,
        value: impl Into<String>,
    ) -> Result<(), TableError> {
        self.anchor_mut(at)?.value = value.into();
        Ok(())
    }

    /// Flips the highlight flag of the anchor governing `at`.
    pub fn toggle_highlight(&mut self, at: Coord) -> Result<(), TableError> {
        let a = self.anchor_mut(at)?;
        a.is_highlighted = !a.is_highlighted;
        Ok(())
    }

    pub fn set_highlight(&mut self, at: Coord, on: bool) -> Result<(), TableError> {
        self.anchor_mut(at)?.is_highlighted = on;
        Ok(())
    }

    pub fn set_heading(&mut self, at: Coord, on: bool) -> Result<(), TableError> {
        self.anchor_mut(at)?.is_heading = on;
        Ok(())
    }

    /// Merges the rectangle starting at `top_left`. Every cell in the
    /// rectangle must currently be an unmerged 1x1 anchor; the top-left one
    /// keeps its value and flags.
    pub fn merge_cells(
        &mut self,
        top_left: Coord,
        row_span: usize,
        col_span: usize,
    ) -> Result<(), TableError> {
        if row_span == 0 || col_span == 0 {
            return Err(TableError::InvalidSpan { row_span, col_span });
        }
        self.check_bounds(top_left)?;
        self.check_bounds(Coord::new(
            top_left.row + row_span - 1,
            top_left.col + col_span - 1,
        ))?;

        for r in top_left.row..top_left.row + row_span {
            for c in top_left.col..top_left.col + col_span {
                let single = matches!(&self.grid[r][c], Cell::Anchor(a) if a.is_single());
                if !single {
                    return Err(TableError::MergeConflict {
                        at: top_left,
                        row_span,
                        col_span,
                        conflict: Coord::new(r, c),
                    });
                }
            }
        }

        for r in top_left.row..top_left.row + row_span {
            for c in top_left.col..top_left.col + col_span {
                if (r, c) != (top_left.row, top_left.col) {
                    self.grid[r][c] = Cell::Covered { anchor: top_left };
                }
            }
        }
        if let Cell::Anchor(a) = &mut self.grid[top_left.row][top_left.col] {
            a.row_span = row_span;
            a.col_span = col_span;
        }
        Ok(())
    }

    /// Highlighted anchors in row-major order, one entry per anchor.
    pub fn highlighted_cells(&self) -> Vec<(Coord, &str)> {
        self.anchors()
            .filter(|(_, a)| a.is_highlighted)
            .map(|(at, a)| (at, a.value.as_str()))
            .collect()
    }

    /// Checks every structural invariant and returns all violations found.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut out = Vec::new();
        if self.n_rows == 0 || self.n_cols == 0 {
            out.push(Violation::EmptyGrid);
            return Err(out);
        }
        if self.grid.len() != self.n_rows {
            out.push(Violation::RowCount {
                expected: self.n_rows,
                found: self.grid.len(),
            });
        }
        for (r, row) in self.grid.iter().enumerate() {
            if row.len() != self.n_cols {
                out.push(Violation::NonRectangular {
                    row: r,
                    expected: self.n_cols,
                    found: row.len(),
                });
            }
        }
        if !out.is_empty() {
            return Err(out);
        }

        // owner[r][c] = the anchor whose span claims (r, c)
        let mut owner: Vec<Vec<Option<Coord>>> = vec![vec![None; self.n_cols]; self.n_rows];
        for (at, a) in self.anchors() {
            if a.row_span == 0 || a.col_span == 0 {
                out.push(Violation::ZeroSpan { at });
                continue;
            }
            if at.row + a.row_span > self.n_rows || at.col + a.col_span > self.n_cols {
                out.push(Violation::SpanOutOfBounds {
                    at,
                    row_span: a.row_span,
                    col_span: a.col_span,
                });
                continue;
            }
            for (r, owners) in owner.iter_mut().enumerate().skip(at.row).take(a.row_span) {
                for (c, slot) in owners.iter_mut().enumerate().skip(at.col).take(a.col_span) {
                    match *slot {
                        Some(first) => out.push(Violation::OverlappingSpans {
                            at: Coord::new(r, c),
                            first,
                            second: at,
                        }),
                        None => *slot = Some(at),
                    }
                }
            }
        }

        for (r, row) in self.grid.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                let Cell::Covered { anchor } = cell else {
                    continue;
                };
                let at = Coord::new(r, c);
                let target_spans = self
                    .grid
                    .get(anchor.row)
                    .and_then(|row| row.get(anchor.col))
                    .and_then(Cell::as_anchor)
                    .is_some_and(|a| a.contains(*anchor, at));
                if !target_spans {
                    out.push(Violation::DanglingCovered {
                        at,
                        anchor: *anchor,
                    });
                    continue;
                }
                match owner[r][c] {
                    Some(o) if o == *anchor => {}
                    Some(o) => out.push(Violation::MisattributedCovered {
                        at,
                        anchor: *anchor,
                        owner: o,
                    }),
                    None => out.push(Violation::DanglingCovered {
                        at,
                        anchor: *anchor,
                    }),
                }
            }
        }

        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

/// A table paired with one or more gold reference texts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "repr::ExampleRepr", into = "repr::ExampleRepr")]
pub struct TableExample {
    table: Table,
    references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExampleError {
    #[error("an example needs at least one reference")]
    NoReferences,
    #[error("reference {0} is empty")]
    EmptyReference(usize),
}

impl TableExample {
    pub fn new(table: Table, references: Vec<String>) -> Result<Self, ExampleError> {
        if references.is_empty() {
            return Err(ExampleError::NoReferences);
        }
        if let Some(i) = references.iter().position(|r| r.trim().is_empty()) {
            return Err(ExampleError::EmptyReference(i));
        }
        Ok(Self { table, references })
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    pub fn references(&self) -> &[String] {
        &self.references
    }

    pub fn into_parts(self) -> (Table, Vec<String>) {
        (self.table, self.references)
    }
}

pub(crate) mod repr {
    //! Canonical JSON form shared by fixtures, json export and the HTTP API.

    use serde::{Deserialize, Serialize};

    use super::{AnchorCell, Cell, Coord, Table, TableError, TableExample};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub enum CellRepr {
        Covered {
            covered: [usize; 2],
        },
        Anchor {
            value: String,
            #[serde(default)]
            heading: bool,
            #[serde(default)]
            highlighted: bool,
            #[serde(default = "one")]
            rowspan: usize,
            #[serde(default = "one")]
            colspan: usize,
        },
    }

    fn one() -> usize {
        1
    }

    #[derive(Serialize, Deserialize)]
    pub struct TableRepr {
        pub n_rows: usize,
        pub n_cols: usize,
        #[serde(default)]
        pub properties: Vec<(String, String)>,
        pub cells: Vec<Vec<CellRepr>>,
    }

    impl From<CellRepr> for Cell {
        fn from(c: CellRepr) -> Self {
            match c {
                CellRepr::Covered {
                    covered: [row, col],
                } => Cell::Covered {
                    anchor: Coord::new(row, col),
                },
                CellRepr::Anchor {
                    value,
                    heading,
                    highlighted,
                    rowspan,
                    colspan,
                } => Cell::Anchor(AnchorCell {
                    value,
                    is_heading: heading,
                    is_highlighted: highlighted,
                    row_span: rowspan,
                    col_span: colspan,
                }),
            }
        }
    }

    impl From<Cell> for CellRepr {
        fn from(c: Cell) -> Self {
            match c {
                Cell::Covered { anchor } => CellRepr::Covered {
                    covered: [anchor.row, anchor.col],
                },
                Cell::Anchor(a) => CellRepr::Anchor {
                    value: a.value,
                    heading: a.is_heading,
                    highlighted: a.is_highlighted,
                    rowspan: a.row_span,
                    colspan: a.col_span,
                },
            }
        }
    }

    impl TryFrom<TableRepr> for Table {
        type Error = TableError;

        fn try_from(r: TableRepr) -> Result<Self, Self::Error> {
            let grid = r
                .cells
                .into_iter()
                .map(|row| row.into_iter().map(Cell::from).collect())
                .collect();
            let t = Table::from_parts_unchecked(r.n_rows, r.n_cols, grid, r.properties);
            t.validate().map_err(TableError::Invalid)?;
            Ok(t)
        }
    }

    impl From<Table> for TableRepr {
        fn from(t: Table) -> Self {
            TableRepr {
                n_rows: t.n_rows,
                n_cols: t.n_cols,
                properties: t.properties,
                cells: t
                    .grid
                    .into_iter()
                    .map(|row| row.into_iter().map(CellRepr::from).collect())
                    .collect(),
            }
        }
    }

    #[derive(Serialize, Deserialize)]
    pub struct ExampleRepr {
        #[serde(flatten)]
        pub table: TableRepr,
        pub references: Vec<String>,
    }

    impl TryFrom<ExampleRepr> for TableExample {
        type Error = String;

        fn try_from(r: ExampleRepr) -> Result<Self, Self::Error> {
            let table = Table::try_from(r.table).map_err(|e| e.to_string())?;
            TableExample::new(table, r.references).map_err(|e| e.to_string())
        }
    }

    impl From<TableExample> for ExampleRepr {
        fn from(e: TableExample) -> Self {
            ExampleRepr {
                table: e.table.into(),
                references: e.references,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row_table(values: &[&str]) -> Table {
        Table::from_anchor_rows(vec![values.iter().map(|v| AnchorCell::new(*v)).collect()]).unwrap()
    }

    #[test]
    fn single_cell_resolves_to_itself() {
        let t = row_table(&["x"]);
        let v = t.cell_at(Coord::new(0, 0)).unwrap();
        assert_eq!(v.value, "x");
        assert_eq!(v.anchor, Coord::new(0, 0));
        assert_eq!((v.row_span, v.col_span), (1, 1));
    }

    #[test]
    fn covered_cell_resolves_to_anchor() {
        let mut t = row_table(&["merged", "", ""]);
        t.merge_cells(Coord::new(0, 0), 1, 3).unwrap();
        let direct = t.grid()[0][0].as_anchor().unwrap().clone();
        let v = t.cell_at(Coord::new(0, 2)).unwrap();
        assert_eq!(v.value, direct.value);
        assert_eq!(v.anchor, Coord::new(0, 0));
        assert_eq!((v.row_span, v.col_span), (direct.row_span, direct.col_span));
        assert_eq!(
            t.grid()[0][1],
            Cell::Covered {
                anchor: Coord::new(0, 0)
            }
        );
        assert_eq!(
            t.grid()[0][2],
            Cell::Covered {
                anchor: Coord::new(0, 0)
            }
        );
    }

    #[test]
    fn out_of_bounds_names_the_coordinate() {
        let t = Table::new(2, 2).unwrap();
        let err = t.cell_at(Coord::new(2, 0)).unwrap_err();
        assert_eq!(
            err,
            TableError::OutOfBounds {
                at: Coord::new(2, 0),
                n_rows: 2,
                n_cols: 2
            }
        );
        assert!(err.to_string().contains("(2, 0)"));
        let mut t = t;
        assert!(t.set_cell_value(Coord::new(0, 5), "v").is_err());
        assert!(t.toggle_highlight(Coord::new(9, 9)).is_err());
    }

    #[test]
    fn empty_tables_are_rejected() {
        assert_eq!(Table::new(0, 3).unwrap_err(), TableError::Empty);
        assert_eq!(
            Table::from_grid(vec![vec![]], vec![]).unwrap_err(),
            TableError::Empty
        );
    }

    #[test]
    fn write_then_read() {
        let mut t = Table::new(2, 2).unwrap();
        t.set_cell_value(Coord::new(0, 0), "v").unwrap();
        assert_eq!(t.cell_at(Coord::new(0, 0)).unwrap().value, "v");
    }

    #[test]
    fn set_value_through_covered_updates_whole_span() {
        let mut t = Table::new(3, 3).unwrap();
        t.merge_cells(Coord::new(1, 0), 2, 3).unwrap();
        t.set_cell_value(Coord::new(2, 2), "new").unwrap();
        for r in 1..3 {
            for c in 0..3 {
                assert_eq!(t.cell_at(Coord::new(r, c)).unwrap().value, "new");
            }
        }
        assert_eq!(t.cell_at(Coord::new(0, 0)).unwrap().value, "");
        assert!(t.validate().is_ok());
    }

    #[test]
    fn toggle_is_an_involution_and_touches_only_the_flag() {
        let mut t = Table::new(2, 3).unwrap();
        t.set_cell_value(Coord::new(0, 0), "a").unwrap();
        t.set_heading(Coord::new(0, 0), true).unwrap();
        t.merge_cells(Coord::new(0, 0), 1, 2).unwrap();
        let original = t.clone();

        t.toggle_highlight(Coord::new(0, 1)).unwrap();
        let v = t.cell_at(Coord::new(0, 0)).unwrap();
        assert!(v.is_highlighted);
        assert_eq!(v.value, "a");
        assert!(v.is_heading);
        assert_eq!((v.row_span, v.col_span), (1, 2));

        t.toggle_highlight(Coord::new(0, 0)).unwrap();
        assert_eq!(t, original);
    }

    #[test]
    fn merge_conflict_on_overlap() {
        let mut t = Table::new(3, 3).unwrap();
        t.merge_cells(Coord::new(0, 0), 2, 2).unwrap();
        let err = t.merge_cells(Coord::new(1, 1), 2, 2).unwrap_err();
        assert!(
            matches!(err, TableError::MergeConflict { conflict, .. } if conflict == Coord::new(1, 1))
        );
        assert!(matches!(
            t.merge_cells(Coord::new(0, 0), 1, 1),
            Err(TableError::MergeConflict { .. })
        ));
        assert!(matches!(
            t.merge_cells(Coord::new(2, 2), 2, 1),
            Err(TableError::OutOfBounds { .. })
        ));
        assert!(matches!(
            t.merge_cells(Coord::new(2, 2), 0, 1),
            Err(TableError::InvalidSpan { .. })
        ));
        assert!(t.validate().is_ok());
    }

    #[test]
    fn highlighted_cells_are_row_major_and_once_per_anchor() {
        let mut t = Table::new(3, 3).unwrap();
        assert!(t.highlighted_cells().is_empty());
        t.merge_cells(Coord::new(0, 1), 2, 2).unwrap();
        t.toggle_highlight(Coord::new(2, 2)).unwrap();
        t.toggle_highlight(Coord::new(1, 2)).unwrap();
        t.toggle_highlight(Coord::new(1, 0)).unwrap();
        let coords: Vec<Coord> = t.highlighted_cells().into_iter().map(|(c, _)| c).collect();
        assert_eq!(
            coords,
            vec![Coord::new(0, 1), Coord::new(1, 0), Coord::new(2, 2)]
        );
    }

    #[test]
    fn validate_reports_ragged_rows() {
        let grid = vec![
            vec![
                Cell::Anchor(AnchorCell::new("a")),
                Cell::Anchor(AnchorCell::new("b")),
            ],
            vec![Cell::Anchor(AnchorCell::new("c"))],
        ];
        let t = Table::from_parts_unchecked(2, 2, grid, vec![]);
        let v = t.validate().unwrap_err();
        assert_eq!(
            v,
            vec![Violation::NonRectangular {
                row: 1,
                expected: 2,
                found: 1
            }]
        );
        assert!(v[0].to_string().starts_with("non-rectangular"));
    }

    #[test]
    fn validate_reports_dangling_covered() {
        let grid = vec![vec![
            Cell::Anchor(AnchorCell::new("a")),
            Cell::Covered {
                anchor: Coord::new(0, 0),
            },
        ]];
        let t = Table::from_parts_unchecked(1, 2, grid, vec![]);
        assert_eq!(
            t.validate().unwrap_err(),
            vec![Violation::DanglingCovered {
                at: Coord::new(0, 1),
                anchor: Coord::new(0, 0)
            }]
        );

        let grid = vec![vec![
            Cell::Anchor(AnchorCell::new("a")),
            Cell::Covered {
                anchor: Coord::new(4, 4),
            },
        ]];
        let t = Table::from_parts_unchecked(1, 2, grid, vec![]);
        assert!(matches!(
            t.validate().unwrap_err()[0],
            Violation::DanglingCovered {
                at: Coord { row: 0, col: 1 },
                ..
            }
        ));
    }

    #[test]
    fn validate_reports_overlap_and_out_of_bounds_spans() {
        let grid = vec![
            vec![
                Cell::Anchor(AnchorCell::new("a").with_span(2, 1)),
                Cell::Anchor(AnchorCell::new("b").with_span(1, 2)),
            ],
            vec![
                Cell::Anchor(AnchorCell::new("c")),
                Cell::Anchor(AnchorCell::new("d")),
            ],
        ];
        let t = Table::from_parts_unchecked(2, 2, grid, vec![]);
        let v = t.validate().unwrap_err();
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::OverlappingSpans { .. })));
        assert!(v.iter().any(
            |x| matches!(x, Violation::SpanOutOfBounds { at, .. } if *at == Coord::new(0, 1))
        ));
    }

    #[test]
    fn canonical_json_defaults_and_explicit_output() {
        let json =
            r#"{"n_rows":1,"n_cols":2,"cells":[[{"value":"a","colspan":2},{"covered":[0,0]}]]}"#;
        let t: Table = serde_json::from_str(json).unwrap();
        assert_eq!(t.cell_at(Coord::new(0, 1)).unwrap().value, "a");
        assert!(t.properties().is_empty());
        let out = serde_json::to_string(&t).unwrap();
        assert_eq!(
            out,
            r#"{"n_rows":1,"n_cols":2,"properties":[],"cells":[[{"value":"a","heading":false,"highlighted":false,"rowspan":1,"colspan":2},{"covered":[0,0]}]]}"#
        );
    }

    #[test]
    fn canonical_json_rejects_invalid_tables() {
        let json = r#"{"n_rows":1,"n_cols":2,"cells":[[{"value":"a"},{"covered":[0,0]}]]}"#;
        let err = serde_json::from_str::<Table>(json).unwrap_err();
        assert!(err.to_string().contains("covered cell (0, 1)"), "{err}");
    }

    #[test]
    fn example_requires_non_blank_references() {
        let t = Table::new(1, 1).unwrap();
        assert_eq!(
            TableExample::new(t.clone(), vec![]).unwrap_err(),
            ExampleError::NoReferences
        );
        assert_eq!(
            TableExample::new(t, vec!["ok".into(), "  ".into()]).unwrap_err(),
            ExampleError::EmptyReference(1)
        );
    }

    #[test]
    fn properties_keep_duplicates_and_order() {
        let mut t = Table::new(1, 1).unwrap();
        t.push_property("k", "1");
        t.push_property("a", "2");
        t.push_property("k", "3");
        t.merge_cells(Coord::new(0, 0), 1, 1).unwrap();
        t.toggle_highlight(Coord::new(0, 0)).unwrap();
        let keys: Vec<_> = t
            .properties()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        assert_eq!(keys, ["k=1", "a=2", "k=3"]);
    }
}
