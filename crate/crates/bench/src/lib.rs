//! Input builders shared by the benchmarks.

use tabgenie_core::adapters::Triple;
use tabgenie_core::table::{Coord, Table, TableExample};

pub fn triples(n: usize) -> Vec<Triple> {
    (0..n)
        .map(|i| {
            Triple::new(
                format!("Entity_{i}"),
                format!("relation{}", i % 7),
                format!("value {i}"),
            )
        })
        .collect()
}

/// A `rows x cols` table with a heading row, a few merges and highlights.
pub fn wide_table(rows: usize, cols: usize) -> Table {
    let mut t = Table::new(rows, cols).expect("non-empty");
    for r in 0..rows {
        for c in 0..cols {
            t.set_cell_value(Coord::new(r, c), format!("r{r}c{c}"))
                .unwrap();
        }
    }
    for c in 0..cols {
        t.set_heading(Coord::new(0, c), true).unwrap();
    }
    for r in (1..rows.saturating_sub(1)).step_by(4) {
        let _ = t.merge_cells(Coord::new(r, 0), 2, 1);
        let _ = t.set_highlight(Coord::new(r, cols - 1), true);
    }
    t.push_property("title", "benchmark table");
    t
}

pub fn example(rows: usize, cols: usize) -> TableExample {
    TableExample::new(wide_table(rows, cols), vec!["a reference".into()]).unwrap()
}
