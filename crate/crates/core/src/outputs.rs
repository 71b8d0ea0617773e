//! Pre-generated system outputs loaded from `{dataset}-{split}-{system}.jsonl`
//! files and aligned with dataset examples.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::adapters::Dataset;
use crate::export::SystemOutputs;

pub const OUTPUT_FILE_EXT: &str = "jsonl";

#[derive(Debug, Error)]
pub enum OutputsError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WarningKind {
    BadFilename,
    UnknownDataset(String),
    UnknownSplit {
        dataset: String,
        split: String,
    },
    Malformed(String),
    OutOfBounds {
        index: usize,
        len: usize,
    },
    /// An earlier line for the same index was replaced.
    Duplicate {
        index: usize,
    },
}

/// Non-fatal problem found while reading outputs. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanWarning {
    pub file: PathBuf,
    pub line: Option<usize>,
    pub kind: WarningKind,
}

impl fmt::Display for ScanWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file.display())?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        match &self.kind {
            WarningKind::BadFilename => {
                write!(
                    f,
                    ": skipped, name does not match {{dataset}}-{{split}}-{{system}}.jsonl"
                )
            }
            WarningKind::UnknownDataset(d) => write!(f, ": skipped, unknown dataset `{d}`"),
            WarningKind::UnknownSplit { dataset, split } => {
                write!(f, ": skipped, dataset `{dataset}` has no split `{split}`")
            }
            WarningKind::Malformed(reason) => write!(f, ": malformed line: {reason}"),
            WarningKind::OutOfBounds { index, len } => {
                write!(f, ": index {index} outside split of {len} examples")
            }
            WarningKind::Duplicate { index } => {
                write!(
                    f,
                    ": duplicate output for index {index}, keeping the later line"
                )
            }
        }
    }
}

#[derive(Deserialize)]
struct OutputLine {
    out: String,
    #[serde(default)]
    index: Option<usize>,
}

/// Parses one outputs file. Non-blank line k aligns with example k unless
/// it carries an explicit `"index"`. Duplicate indices keep the later line.
pub fn parse_outputs(
    text: &str,
    split_len: usize,
    file: &Path,
) -> (BTreeMap<usize, String>, Vec<ScanWarning>) {
    let mut outputs = BTreeMap::new();
    let mut warnings = Vec::new();
    let warn = |line: usize, kind| ScanWarning {
        file: file.to_path_buf(),
        line: Some(line),
        kind,
    };

    let mut position = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line_pos = position;
        position += 1;
        let parsed: OutputLine = match serde_json::from_str(raw) {
            Ok(p) => p,
            Err(e) => {
                warnings.push(warn(lineno + 1, WarningKind::Malformed(e.to_string())));
                continue;
            }
        };
        let index = parsed.index.unwrap_or(line_pos);
        if index >= split_len {
            warnings.push(warn(
                lineno + 1,
                WarningKind::OutOfBounds {
                    index,
                    len: split_len,
                },
            ));
            continue;
        }
        if outputs.insert(index, parsed.out).is_some() {
            warnings.push(warn(lineno + 1, WarningKind::Duplicate { index }));
        }
    }
    (outputs, warnings)
}

pub fn read_outputs_file(
    path: &Path,
    split_len: usize,
) -> Result<(BTreeMap<usize, String>, Vec<ScanWarning>), OutputsError> {
    let text = fs::read_to_string(path).map_err(|source| OutputsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_outputs(&text, split_len, path))
}

/// Outputs indexed by (dataset, split) then system then example index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutputStore {
    entries: BTreeMap<(String, String), BTreeMap<String, BTreeMap<usize, String>>>,
}

impl OutputStore {
    pub fn insert_system(&mut self, dataset_id: &str, split: &str, outputs: SystemOutputs) {
        self.entries
            .entry((dataset_id.to_string(), split.to_string()))
            .or_default()
            .insert(outputs.system_id, outputs.outputs);
    }

    /// Every system with an output for the example, sorted by system id.
    pub fn outputs_for(
        &self,
        dataset_id: &str,
        split: &str,
        index: usize,
    ) -> Vec<(String, String)> {
        self.entries
            .get(&(dataset_id.to_string(), split.to_string()))
            .map(|systems| {
                systems
                    .iter()
                    .filter_map(|(sys, outs)| outs.get(&index).map(|t| (sys.clone(), t.clone())))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn systems(&self, dataset_id: &str, split: &str) -> Vec<String> {
        self.entries
            .get(&(dataset_id.to_string(), split.to_string()))
            .map(|s| s.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn system_outputs(
        &self,
        dataset_id: &str,
        split: &str,
        system_id: &str,
    ) -> Option<SystemOutputs> {
        let outputs = self
            .entries
            .get(&(dataset_id.to_string(), split.to_string()))?
            .get(system_id)?
            .clone();
        Some(SystemOutputs {
            system_id: system_id.to_string(),
            outputs,
        })
    }

    /// All distinct system ids across every dataset split.
    pub fn all_systems(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .entries
            .values()
            .flat_map(|s| s.keys().cloned())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Splits `{dataset}-{split}-{system}` against the known dataset ids. Dataset
/// ids may contain `-`, so the longest matching id wins.
fn split_output_name<'a>(
    stem: &'a str,
    datasets: &BTreeMap<String, Dataset>,
) -> Result<(&'a str, &'a str, &'a str), WarningKind> {
    let mut ids: Vec<&String> = datasets.keys().collect();
    ids.sort_by_key(|id| std::cmp::Reverse(id.len()));
    for id in ids {
        let Some(rest) = stem
            .strip_prefix(id.as_str())
            .and_then(|r| r.strip_prefix('-'))
        else {
            continue;
        };
        if let Some((split, system)) = rest.split_once('-') {
            if !split.is_empty() && !system.is_empty() {
                return Ok((&stem[..id.len()], split, system));
            }
        }
    }
    let parts: Vec<&str> = stem.splitn(3, '-').collect();
    if parts.len() == 3 && parts.iter().all(|p| !p.is_empty()) {
        Err(WarningKind::UnknownDataset(parts[0].to_string()))
    } else {
        Err(WarningKind::BadFilename)
    }
}

/// Reads every outputs file in `dir`. Bad names, unknown datasets and bad
/// lines become warnings; only an unreadable directory is an error.
pub fn scan_output_dir(
    dir: &Path,
    datasets: &BTreeMap<String, Dataset>,
) -> Result<(OutputStore, Vec<ScanWarning>), OutputsError> {
    let io_err = |source| OutputsError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io_err)?;
    paths.retain(|p| p.is_file());
    paths.sort();

    let mut store = OutputStore::default();
    let mut warnings = Vec::new();
    for path in paths {
        let file_warning = |kind| ScanWarning {
            file: path.clone(),
            line: None,
            kind,
        };
        let stem = match path.file_name().and_then(|n| n.to_str()) {
            Some(name) => match name.strip_suffix(&format!(".{OUTPUT_FILE_EXT}")) {
                Some(stem) => stem,
                None => {
                    warnings.push(file_warning(WarningKind::BadFilename));
                    continue;
                }
            },
            None => {
                warnings.push(file_warning(WarningKind::BadFilename));
                continue;
            }
        };
        let (dataset_id, split, system) = match split_output_name(stem, datasets) {
            Ok(parts) => parts,
            Err(kind) => {
                warnings.push(file_warning(kind));
                continue;
            }
        };
        let Some(len) = datasets[dataset_id].split(split).map(<[_]>::len) else {
            warnings.push(file_warning(WarningKind::UnknownSplit {
                dataset: dataset_id.to_string(),
                split: split.to_string(),
            }));
            continue;
        };
        let (outputs, mut w) = read_outputs_file(&path, len)?;
        warnings.append(&mut w);
        store.insert_system(
            dataset_id,
            split,
            SystemOutputs {
                system_id: system.to_string(),
                outputs,
            },
        );
    }
    Ok((store, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{kv_to_table, DataType, DatasetInfo};
    use crate::table::TableExample;

    fn datasets(ids: &[&str], n: usize) -> BTreeMap<String, Dataset> {
        ids.iter()
            .map(|id| {
                let examples = (0..n)
                    .map(|i| {
                        let t = kv_to_table(&[("k".into(), i.to_string())], vec![]).unwrap();
                        TableExample::new(t, vec!["r".into()]).unwrap()
                    })
                    .collect();
                let d = Dataset::new(
                    DatasetInfo::minimal(*id, DataType::KeyValue),
                    [("dev".to_string(), examples)].into_iter().collect(),
                )
                .unwrap();
                (id.to_string(), d)
            })
            .collect()
    }

    fn lines(n: usize, prefix: &str) -> String {
        (0..n)
            .map(|i| format!("{{\"out\":\"{prefix} {i}\"}}\n"))
            .collect()
    }

    #[test]
    fn positional_alignment() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("e2e-dev-t5base.jsonl"), lines(5, "t5")).unwrap();
        let (store, warnings) = scan_output_dir(tmp.path(), &datasets(&["e2e"], 5)).unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
        for i in 0..5 {
            assert_eq!(
                store.outputs_for("e2e", "dev", i),
                vec![("t5base".into(), format!("t5 {i}"))]
            );
        }
        assert!(store.outputs_for("e2e", "dev", 99).is_empty());
    }

    #[test]
    fn empty_dir_and_missing_dir() {
        let tmp = tempfile::tempdir().unwrap();
        let (store, w) = scan_output_dir(tmp.path(), &datasets(&["e2e"], 5)).unwrap();
        assert!(store.is_empty() && w.is_empty());
        assert!(scan_output_dir(&tmp.path().join("nope"), &BTreeMap::new()).is_err());
    }

    #[test]
    fn explicit_index_wins() {
        let (out, w) = parse_outputs(
            "{\"out\":\"x\",\"index\":3}\n{\"out\":\"y\"}\n",
            5,
            Path::new("f"),
        );
        assert!(w.is_empty());
        assert_eq!(out.get(&3).map(String::as_str), Some("x"));
        assert_eq!(out.get(&1).map(String::as_str), Some("y"));
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn duplicates_last_wins_with_warning() {
        let text = "{\"out\":\"first\"}\n{\"out\":\"second\",\"index\":0}\n";
        let (out, w) = parse_outputs(text, 5, Path::new("f"));
        assert_eq!(out.len(), 1);
        assert_eq!(out[&0], "second");
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].kind, WarningKind::Duplicate { index: 0 });
        assert_eq!(w[0].line, Some(2));
    }

    #[test]
    fn malformed_and_out_of_bounds_lines_warn() {
        let text = "not json\n{\"out\":\"a\"}\n{\"out\":\"b\",\"index\":9}\n\n{\"in\":\"x\"}\n";
        let (out, w) = parse_outputs(text, 5, Path::new("f"));
        assert_eq!(out.len(), 1);
        assert_eq!(out[&1], "a");
        let kinds: Vec<_> = w.iter().map(|w| (&w.kind, w.line)).collect();
        assert!(matches!(kinds[0], (WarningKind::Malformed(_), Some(1))));
        assert_eq!(
            kinds[1],
            (&WarningKind::OutOfBounds { index: 9, len: 5 }, Some(3))
        );
        assert!(matches!(kinds[2], (WarningKind::Malformed(_), Some(5))));
    }

    #[test]
    fn systems_sorted_and_hyphenated_ids() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("my-data-dev-zeta.jsonl"), lines(2, "z")).unwrap();
        fs::write(tmp.path().join("my-data-dev-alpha-2.jsonl"), lines(2, "a")).unwrap();
        fs::write(tmp.path().join("README.md"), "hi").unwrap();
        fs::write(tmp.path().join("nodashes.jsonl"), "").unwrap();
        fs::write(tmp.path().join("other-dev-sys.jsonl"), "").unwrap();
        fs::write(tmp.path().join("my-data-test-sys.jsonl"), "").unwrap();
        let (store, w) = scan_output_dir(tmp.path(), &datasets(&["my-data", "my"], 2)).unwrap();
        let got = store.outputs_for("my-data", "dev", 1);
        assert_eq!(
            got,
            vec![
                ("alpha-2".into(), "a 1".into()),
                ("zeta".into(), "z 1".into())
            ]
        );
        let kinds: Vec<_> = w.iter().map(|w| w.kind.clone()).collect();
        assert_eq!(kinds.len(), 4);
        assert!(kinds.contains(&WarningKind::BadFilename));
        assert!(kinds.contains(&WarningKind::UnknownDataset("other".into())));
        assert!(kinds.contains(&WarningKind::UnknownSplit {
            dataset: "my-data".into(),
            split: "test".into()
        }));

        let again = scan_output_dir(tmp.path(), &datasets(&["my-data", "my"], 2)).unwrap();
        assert_eq!(again.0, store);
    }
}
