use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rust_xlsxwriter::{Format, Workbook};

use super::ExportError;
use crate::adapters::Dataset;
use crate::linearize::linearize_default;

/// All outputs of one system for one dataset split, keyed by example index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemOutputs {
    pub system_id: String,
    pub outputs: BTreeMap<usize, String>,
}

pub const SHEET_FIXED_COLUMNS: [&str; 4] =
    ["example_idx", "properties", "table_linearized", "reference"];

/// `min(count, len)` distinct indices in `0..len`, sorted ascending.
/// Identical for identical `(len, count, seed)`.
pub fn sample_indices(len: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, len, count.min(len)).into_vec();
    picked.sort_unstable();
    picked
}

/// One sheet row: fixed columns followed by one output per system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SheetRow {
    pub example_idx: usize,
    pub properties: String,
    pub table_linearized: String,
    pub reference: String,
    pub outputs: Vec<String>,
}

pub fn annotation_rows(
    dataset: &Dataset,
    split: &str,
    systems: &[SystemOutputs],
    count: usize,
    seed: u64,
) -> Result<Vec<SheetRow>, ExportError> {
    if count == 0 {
        return Err(ExportError::ZeroCount);
    }
    let examples = dataset.require_split(split)?;
    sample_indices(examples.len(), count, seed)
        .into_iter()
        .map(|idx| {
            let ex = &examples[idx];
            let outputs = systems
                .iter()
                .map(|s| {
                    s.outputs
                        .get(&idx)
                        .cloned()
                        .ok_or_else(|| ExportError::MissingOutput {
                            system: s.system_id.clone(),
                            index: idx,
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(SheetRow {
                example_idx: idx,
                properties: ex
                    .table()
                    .properties()
                    .iter()
                    .map(|(k, v)| format!("{k}: {v}"))
                    .collect::<Vec<_>>()
                    .join("\n"),
                table_linearized: linearize_default(ex.table()),
                reference: ex.references().join("\n"),
                outputs,
            })
        })
        .collect()
}

/// Writes a workbook of `min(count, split size)` seeded-random examples with
/// one output column per system and empty `error_category` / `notes` columns.
pub fn make_annotation_sheet(
    dataset: &Dataset,
    split: &str,
    systems: &[SystemOutputs],
    count: usize,
    seed: u64,
    out_file: &Path,
) -> Result<PathBuf, ExportError> {
    let rows = annotation_rows(dataset, split, systems, count, seed)?;

    let mut header: Vec<String> = SHEET_FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(systems.iter().map(|s| format!("{}_output", s.system_id)));
    header.push("error_category".into());
    header.push("notes".into());

    let mut wb = Workbook::new();
    let ws = wb.add_worksheet();
    ws.set_name("annotation")?;
    let bold = Format::new().set_bold();
    let wrap = Format::new().set_text_wrap();
    for (c, h) in header.iter().enumerate() {
        ws.write_string_with_format(0, c as u16, h, &bold)?;
    }
    for (i, row) in rows.iter().enumerate() {
        let r = i as u32 + 1;
        ws.write_number(r, 0, row.example_idx as f64)?;
        ws.write_string_with_format(r, 1, &row.properties, &wrap)?;
        ws.write_string_with_format(r, 2, &row.table_linearized, &wrap)?;
        ws.write_string_with_format(r, 3, &row.reference, &wrap)?;
        for (j, out) in row.outputs.iter().enumerate() {
            ws.write_string_with_format(r, 4 + j as u16, out, &wrap)?;
        }
    }
    ws.set_freeze_panes(1, 0)?;
    for c in 1..header.len() as u16 {
        ws.set_column_width(c, 40)?;
    }

    if let Some(parent) = out_file.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| ExportError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    wb.save(out_file)?;
    Ok(out_file.to_path_buf())
}
