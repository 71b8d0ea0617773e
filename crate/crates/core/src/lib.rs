//! Data-to-text workbench core: a canonical table model for heterogeneous
//! dataset inputs, format adapters, linearization, export, pre-generated
//! output alignment and interactive processing pipelines.

pub mod adapters;
pub mod export;
pub mod linearize;
pub mod outputs;
pub mod pipeline;
pub mod table;

pub use adapters::{Catalog, DataType, Dataset, DatasetInfo};
pub use export::{ExportFormat, ExportRequest};
pub use linearize::{linearize, LinearizationConfig};
pub use outputs::OutputStore;
pub use pipeline::{PipelineOutput, PipelineRegistry, PipelineRequest};
pub use table::{AnchorCell, Cell, CellView, Coord, Table, TableError, TableExample, Violation};
