//! Serialization of examples to json, csv, txt, html and xlsx, batch export
//! of whole splits, and annotation spreadsheets for manual error analysis.

mod sheet;

pub use sheet::{
    annotation_rows, make_annotation_sheet, sample_indices, SheetRow, SystemOutputs,
    SHEET_FIXED_COLUMNS,
};

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use rust_xlsxwriter::{Color, Format, Workbook, Worksheet, XlsxError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{AdapterError, Catalog};
use crate::table::{Cell, Table, TableExample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Xlsx,
    Html,
    Json,
    Txt,
    Csv,
}

impl ExportFormat {
    pub const ALL: [ExportFormat; 5] = [
        ExportFormat::Xlsx,
        ExportFormat::Html,
        ExportFormat::Json,
        ExportFormat::Txt,
        ExportFormat::Csv,
    ];

    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Xlsx => "xlsx",
            ExportFormat::Html => "html",
            ExportFormat::Json => "json",
            ExportFormat::Txt => "txt",
            ExportFormat::Csv => "csv",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Xlsx => {
                "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet"
            }
            ExportFormat::Html => "text/html; charset=utf-8",
            ExportFormat::Json => "application/json",
            ExportFormat::Txt => "text/plain; charset=utf-8",
            ExportFormat::Csv => "text/csv; charset=utf-8",
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for ExportFormat {
    type Err = ExportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.extension() == s)
            .ok_or_else(|| ExportError::UnknownFormat(s.to_string()))
    }
}

fn format_list() -> String {
    ExportFormat::ALL.map(ExportFormat::extension).join(", ")
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("unknown export format `{0}`; valid formats: {list}", list = format_list())]
    UnknownFormat(String),
    #[error(transparent)]
    Dataset(#[from] AdapterError),
    #[error("system `{system}` has no output for example {index}")]
    MissingOutput { system: String, index: usize },
    #[error("count must be at least 1")]
    ZeroCount,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("xlsx: {0}")]
    Xlsx(#[from] XlsxError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub fn export_example(
    example: &TableExample,
    format: ExportFormat,
    include_properties: bool,
) -> Result<Vec<u8>, ExportError> {
    match format {
        ExportFormat::Json => to_json(example, include_properties),
        ExportFormat::Csv => to_csv(example.table()),
        ExportFormat::Txt => Ok(to_txt(example.table(), include_properties).into_bytes()),
        ExportFormat::Html => Ok(to_html(example.table(), include_properties).into_bytes()),
        ExportFormat::Xlsx => {
            let mut wb = Workbook::new();
            write_table_sheet(wb.add_worksheet(), example.table(), include_properties)?;
            Ok(wb.save_to_buffer()?)
        }
    }
}

fn to_json(example: &TableExample, include_properties: bool) -> Result<Vec<u8>, ExportError> {
    if include_properties {
        return Ok(serde_json::to_vec_pretty(example)?);
    }
    let (table, refs) = example.clone().into_parts();
    let stripped = TableExample::new(table.with_properties(Vec::new()), refs)
        .expect("references already validated");
    Ok(serde_json::to_vec_pretty(&stripped)?)
}

/// Value shown at each grid position for flat formats: anchors carry their
/// value, covered positions are empty.
fn flat_value(cell: &Cell) -> &str {
    match cell {
        Cell::Anchor(a) => &a.value,
        Cell::Covered { .. } => "",
    }
}

fn to_csv(table: &Table) -> Result<Vec<u8>, ExportError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    for row in table.grid() {
        w.write_record(row.iter().map(flat_value))?;
    }
    w.into_inner().map_err(|e| ExportError::Io {
        path: "<csv buffer>".into(),
        source: e.into_error(),
    })
}

fn to_txt(table: &Table, include_properties: bool) -> String {
    let mut out = String::new();
    if include_properties && !table.properties().is_empty() {
        for (k, v) in table.properties() {
            out.push_str(&format!("{k}: {v}\n"));
        }
        out.push('\n');
    }
    for row in table.grid() {
        let line: Vec<&str> = row.iter().map(flat_value).collect();
        out.push_str(&line.join("\t"));
        out.push('\n');
    }
    out
}

fn escape(s: &str) -> String {
    html_escape::encode_text(s).into_owned()
}

/// The `<table>` element alone, shared by the standalone document.
pub fn table_html(table: &Table) -> String {
    let mut out = String::from("<table>\n");
    for row in table.grid() {
        out.push_str("<tr>");
        for cell in row {
            let Cell::Anchor(a) = cell else { continue };
            let tag = if a.is_heading { "th" } else { "td" };
            out.push('<');
            out.push_str(tag);
            if a.row_span > 1 {
                out.push_str(&format!(" rowspan=\"{}\"", a.row_span));
            }
            if a.col_span > 1 {
                out.push_str(&format!(" colspan=\"{}\"", a.col_span));
            }
            if a.is_highlighted {
                out.push_str(" class=\"highlighted\"");
            }
            out.push('>');
            out.push_str(&escape(&a.value));
            out.push_str(&format!("</{tag}>"));
        }
        out.push_str("</tr>\n");
    }
    out.push_str("</table>\n");
    out
}

fn to_html(table: &Table, include_properties: bool) -> String {
    let mut out = String::from(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Example</title>\n\
         <style>th{font-weight:bold}.highlighted{background:#fff3a0}</style>\n</head>\n<body>\n",
    );
    if include_properties && !table.properties().is_empty() {
        out.push_str("<dl>\n");
        for (k, v) in table.properties() {
            out.push_str(&format!("<dt>{}</dt><dd>{}</dd>\n", escape(k), escape(v)));
        }
        out.push_str("</dl>\n");
    }
    out.push_str(&table_html(table));
    out.push_str("</body>\n</html>\n");
    out
}

fn write_table_sheet(
    ws: &mut Worksheet,
    table: &Table,
    include_properties: bool,
) -> Result<(), ExportError> {
    let bold = Format::new().set_bold();
    let highlight = Format::new().set_background_color(Color::RGB(0xFFF3A0));
    let bold_highlight = Format::new()
        .set_bold()
        .set_background_color(Color::RGB(0xFFF3A0));
    let plain = Format::new();

    let mut offset: u32 = 0;
    if include_properties && !table.properties().is_empty() {
        for (k, v) in table.properties() {
            ws.write_string_with_format(offset, 0, k, &bold)?;
            ws.write_string(offset, 1, v)?;
            offset += 1;
        }
        offset += 1;
    }

    for (r, row) in table.grid().iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let Cell::Anchor(a) = cell else { continue };
            let fmt = match (a.is_heading, a.is_highlighted) {
                (true, true) => &bold_highlight,
                (true, false) => &bold,
                (false, true) => &highlight,
                (false, false) => &plain,
            };
            let (row0, col0) = (offset + r as u32, c as u16);
            if a.row_span > 1 || a.col_span > 1 {
                ws.merge_range(
                    row0,
                    col0,
                    row0 + a.row_span as u32 - 1,
                    col0 + a.col_span as u16 - 1,
                    &a.value,
                    fmt,
                )?;
            } else {
                ws.write_string_with_format(row0, col0, &a.value, fmt)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ExportRequest {
    pub dataset_id: String,
    pub split: String,
    pub format: ExportFormat,
    pub out_dir: PathBuf,
    pub include_properties: bool,
    /// xlsx only: one workbook with a sheet per example instead of one file each.
    pub single_file: bool,
}

impl ExportRequest {
    pub fn new(
        dataset_id: impl Into<String>,
        split: impl Into<String>,
        format: ExportFormat,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            dataset_id: dataset_id.into(),
            split: split.into(),
            format,
            out_dir: out_dir.into(),
            include_properties: true,
            single_file: false,
        }
    }
}

/// Exports every example of a split; returns the written paths in index order.
pub fn export_split(catalog: &Catalog, req: &ExportRequest) -> Result<Vec<PathBuf>, ExportError> {
    let dataset = catalog.load_dataset(&req.dataset_id, Some(&req.split))?;
    let examples = dataset.require_split(&req.split)?;

    fs::create_dir_all(&req.out_dir).map_err(|source| ExportError::Io {
        path: req.out_dir.display().to_string(),
        source,
    })?;

    if req.single_file && req.format == ExportFormat::Xlsx {
        let path = req
            .out_dir
            .join(format!("{}-{}.xlsx", req.dataset_id, req.split));
        let mut wb = Workbook::new();
        for (i, ex) in examples.iter().enumerate() {
            let ws = wb.add_worksheet();
            ws.set_name(format!("{i:06}"))?;
            write_table_sheet(ws, ex.table(), req.include_properties)?;
        }
        wb.save(&path)?;
        return Ok(vec![path]);
    }

    examples
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let path = req
                .out_dir
                .join(format!("{i:06}.{}", req.format.extension()));
            let bytes = export_example(ex, req.format, req.include_properties)?;
            fs::write(&path, bytes).map_err(|source| ExportError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::kv_to_table;
    use crate::table::Coord;

    fn kv_example() -> TableExample {
        let pairs = vec![
            ("name".to_string(), "Aromi".to_string()),
            ("food".to_string(), "Chinese, \"spicy\"".to_string()),
        ];
        let t = kv_to_table(&pairs, vec![("title".into(), "TITLEKEY".into())]).unwrap();
        TableExample::new(t, vec!["Aromi serves Chinese food.".into()]).unwrap()
    }

    #[test]
    fn parses_formats() {
        assert_eq!("xlsx".parse::<ExportFormat>().unwrap(), ExportFormat::Xlsx);
        let err = "pdf".parse::<ExportFormat>().unwrap_err().to_string();
        assert!(
            err.ends_with("valid formats: xlsx, html, json, txt, csv"),
            "{err}"
        );
    }

    #[test]
    fn csv_has_grid_only() {
        let bytes = export_example(&kv_example(), ExportFormat::Csv, true).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(!text.contains("title") && !text.contains("TITLEKEY"));
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(bytes.as_slice());
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.len() == 2));
        assert_eq!(&rows[1][1], "Chinese, \"spicy\"");
        assert!(text.ends_with("\r\n"));
    }

    #[test]
    fn csv_covered_cells_are_empty() {
        let mut t = Table::new(1, 3).unwrap();
        t.set_cell_value(Coord::new(0, 0), "m").unwrap();
        t.merge_cells(Coord::new(0, 0), 1, 3).unwrap();
        let ex = TableExample::new(t, vec!["r".into()]).unwrap();
        let text =
            String::from_utf8(export_example(&ex, ExportFormat::Csv, false).unwrap()).unwrap();
        assert_eq!(text, "m,,\r\n");
    }

    #[test]
    fn txt_layout() {
        let text =
            String::from_utf8(export_example(&kv_example(), ExportFormat::Txt, true).unwrap())
                .unwrap();
        assert_eq!(
            text,
            "title: TITLEKEY\n\nname\tAromi\nfood\tChinese, \"spicy\"\n"
        );
        let bare =
            String::from_utf8(export_example(&kv_example(), ExportFormat::Txt, false).unwrap())
                .unwrap();
        assert_eq!(bare, "name\tAromi\nfood\tChinese, \"spicy\"\n");
    }

    #[test]
    fn html_marks_spans_headings_and_highlights() {
        let mut t = Table::new(2, 3).unwrap();
        t.set_cell_value(Coord::new(0, 0), "a <b>").unwrap();
        t.set_heading(Coord::new(0, 0), true).unwrap();
        t.merge_cells(Coord::new(0, 0), 1, 3).unwrap();
        t.toggle_highlight(Coord::new(1, 1)).unwrap();
        let ex = TableExample::new(t, vec!["r".into()]).unwrap();
        let html =
            String::from_utf8(export_example(&ex, ExportFormat::Html, true).unwrap()).unwrap();
        assert_eq!(html.matches("colspan=\"3\"").count(), 1);
        assert!(html.contains("<th colspan=\"3\">a &lt;b&gt;</th>"));
        assert!(html.contains("<td class=\"highlighted\"></td>"));
        assert!(!html.contains("<dl>"));
    }

    #[test]
    fn json_without_properties_drops_them() {
        let bytes = export_example(&kv_example(), ExportFormat::Json, false).unwrap();
        let back: TableExample = serde_json::from_slice(&bytes).unwrap();
        assert!(back.table().properties().is_empty());
        let bytes = export_example(&kv_example(), ExportFormat::Json, true).unwrap();
        let back: TableExample = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, kv_example());
    }

    #[test]
    fn xlsx_is_a_zip() {
        let bytes = export_example(&kv_example(), ExportFormat::Xlsx, true).unwrap();
        assert_eq!(&bytes[..2], b"PK");
    }
}
