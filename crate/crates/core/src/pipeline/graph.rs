use serde::{Deserialize, Serialize};

use super::ProcessorError;
use crate::adapters::TRIPLE_HEADER;
use crate::table::{Cell, Coord, Table};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: String,
    pub target: String,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

impl Graph {
    /// Every edge endpoint names an existing node and node ids are unique.
    pub fn is_well_formed(&self) -> bool {
        let mut ids: Vec<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        ids.sort_unstable();
        let unique = ids.windows(2).all(|w| w[0] != w[1]);
        unique
            && self.edges.iter().all(|e| {
                ids.binary_search(&e.source.as_str()).is_ok()
                    && ids.binary_search(&e.target.as_str()).is_ok()
            })
    }
}

/// Builds a node-link graph from a triple table: subjects and objects become
/// nodes (deduplicated by label, first appearance order), each data row an
/// edge labeled by its predicate.
pub fn rdf_graph(table: &Table) -> Result<Graph, ProcessorError> {
    if table.n_cols() != 3 {
        return Err(ProcessorError::TypeMismatch(format!(
            "graph visualization needs a 3-column triple table, got {} columns",
            table.n_cols()
        )));
    }
    for (c, expected) in TRIPLE_HEADER.iter().enumerate() {
        let v = table
            .cell_at(Coord::new(0, c))
            .map_err(|e| ProcessorError::TypeMismatch(e.to_string()))?;
        if !v.is_heading || v.value != *expected {
            return Err(ProcessorError::TypeMismatch(format!(
                "expected heading `{expected}` in column {c}, found `{}`",
                v.value
            )));
        }
    }

    let mut graph = Graph::default();
    let add_node = |graph: &mut Graph, label: &str| {
        if !graph.nodes.iter().any(|n| n.id == label) {
            graph.nodes.push(GraphNode {
                id: label.to_string(),
                label: label.to_string(),
            });
        }
    };
    for row in &table.grid()[1..] {
        let values: Vec<&str> = row
            .iter()
            .map(|c| match c {
                Cell::Anchor(a) => a.value.as_str(),
                Cell::Covered { .. } => "",
            })
            .collect();
        if row.iter().any(|c| matches!(c, Cell::Covered { .. })) {
            return Err(ProcessorError::TypeMismatch(
                "triple rows may not contain merged cells".into(),
            ));
        }
        let (s, p, o) = (values[0], values[1], values[2]);
        add_node(&mut graph, s);
        add_node(&mut graph, o);
        graph.edges.push(GraphEdge {
            source: s.to_string(),
            target: o.to_string(),
            label: p.to_string(),
        });
    }
    Ok(graph)
}
