use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::{highlighted_value_to_table, kv_to_table, triples_to_table, AdapterError, Triple};
use crate::table::TableExample;

pub const SPLIT_FILE_EXT: &str = "jsonl";
const INFO_FILE: &str = "info.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataType {
    KeyValue,
    Graph,
    Table,
    TableHighlighted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub homepage: String,
    #[serde(default)]
    pub license: String,
    #[serde(default)]
    pub version: String,
    pub data_type: DataType,
    #[serde(default)]
    pub split_sizes: BTreeMap<String, usize>,
}

impl DatasetInfo {
    pub fn minimal(id: impl Into<String>, data_type: DataType) -> Self {
        let id = id.into();
        Self {
            name: id.clone(),
            id,
            description: String::new(),
            homepage: String::new(),
            license: String::new(),
            version: String::new(),
            data_type,
            split_sizes: BTreeMap::new(),
        }
    }

    pub fn check_id(id: &str) -> Result<(), AdapterError> {
        let ok = !id.is_empty()
            && id
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-');
        if ok {
            Ok(())
        } else {
            Err(AdapterError::InvalidInfo(format!(
                "dataset id `{id}` must match [a-z0-9_-]+"
            )))
        }
    }
}

/// Loaded dataset: metadata plus the parsed examples of each loaded split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    info: DatasetInfo,
    splits: BTreeMap<String, Vec<TableExample>>,
}

impl Dataset {
    /// Fails if a split's length disagrees with `info.split_sizes`. Splits
    /// missing from `split_sizes` are added to it.
    pub fn new(
        mut info: DatasetInfo,
        splits: BTreeMap<String, Vec<TableExample>>,
    ) -> Result<Self, AdapterError> {
        DatasetInfo::check_id(&info.id)?;
        for (name, examples) in &splits {
            match info.split_sizes.get(name) {
                Some(&declared) if declared != examples.len() => {
                    return Err(AdapterError::InvalidInfo(format!(
                        "dataset `{}` declares {declared} examples in split `{name}` but {} were loaded",
                        info.id,
                        examples.len()
                    )))
                }
                Some(_) => {}
                None => {
                    info.split_sizes.insert(name.clone(), examples.len());
                }
            }
        }
        Ok(Self { info, splits })
    }

    pub fn info(&self) -> &DatasetInfo {
        &self.info
    }

    pub fn id(&self) -> &str {
        &self.info.id
    }

    pub fn split(&self, name: &str) -> Option<&[TableExample]> {
        self.splits.get(name).map(Vec::as_slice)
    }

    pub fn split_names(&self) -> impl Iterator<Item = &str> {
        self.splits.keys().map(String::as_str)
    }

    pub fn example(&self, split: &str, index: usize) -> Option<&TableExample> {
        self.splits.get(split)?.get(index)
    }

    pub fn require_split(&self, split: &str) -> Result<&[TableExample], AdapterError> {
        self.split(split).ok_or_else(|| AdapterError::UnknownSplit {
            id: self.info.id.clone(),
            split: split.to_string(),
            available: self.splits.keys().cloned().collect(),
        })
    }
}

/// Describes a custom loader: where its raw records live and what they hold.
#[derive(Debug, Clone)]
pub struct LoaderSpec {
    pub id: String,
    pub data_type: DataType,
    /// Directory holding `{split}.jsonl` raw record files and, optionally,
    /// an `info.json`.
    pub source_path: PathBuf,
    pub options: BTreeMap<String, String>,
}

pub type RawRecord = serde_json::Value;

/// Converts one raw source record into an example.
pub type RowMapper = Arc<dyn Fn(&RawRecord) -> Result<TableExample, String> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoaderHandle {
    id: String,
}

impl LoaderHandle {
    pub fn id(&self) -> &str {
        &self.id
    }
}

struct RegisteredLoader {
    spec: LoaderSpec,
    mapper: RowMapper,
}

/// Resolves dataset ids to loaders: registered custom loaders first, then
/// canonical dataset folders under the dataset directory.
pub struct Catalog {
    dataset_dir: Option<PathBuf>,
    loaders: RwLock<BTreeMap<String, RegisteredLoader>>,
}

impl Catalog {
    pub fn new(dataset_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset_dir: Some(dataset_dir.into()),
            loaders: RwLock::new(BTreeMap::new()),
        }
    }

    /// A catalog with no dataset directory; only registered loaders resolve.
    pub fn empty() -> Self {
        Self {
            dataset_dir: None,
            loaders: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn dataset_dir(&self) -> Option<&Path> {
        self.dataset_dir.as_deref()
    }

    pub fn register_loader(
        &self,
        spec: LoaderSpec,
        mapper: RowMapper,
    ) -> Result<LoaderHandle, AdapterError> {
        DatasetInfo::check_id(&spec.id)?;
        let mut loaders = self.loaders.write().expect("loader registry poisoned");
        if loaders.contains_key(&spec.id) {
            return Err(AdapterError::Conflict(spec.id));
        }
        let id = spec.id.clone();
        loaders.insert(id.clone(), RegisteredLoader { spec, mapper });
        Ok(LoaderHandle { id })
    }

    pub fn list_loaders(&self) -> Vec<String> {
        self.loaders
            .read()
            .expect("loader registry poisoned")
            .keys()
            .cloned()
            .collect()
    }

    /// Registered loader ids plus every folder in the dataset directory that
    /// carries an `info.json`, sorted and deduplicated.
    pub fn known_ids(&self) -> Vec<String> {
        let mut ids = self.list_loaders();
        if let Some(dir) = &self.dataset_dir {
            if let Ok(entries) = fs::read_dir(dir) {
                for entry in entries.flatten() {
                    let path = entry.path();
                    if path.join(INFO_FILE).is_file() {
                        if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                            ids.push(name.to_string());
                        }
                    }
                }
            }
        }
        ids.sort();
        ids.dedup();
        ids
    }

    /// Loads one split, or every split with a data file when `split` is `None`.
    pub fn load_dataset(&self, id: &str, split: Option<&str>) -> Result<Dataset, AdapterError> {
        let custom = {
            let loaders = self.loaders.read().expect("loader registry poisoned");
            loaders
                .get(id)
                .map(|l| (l.spec.clone(), Arc::clone(&l.mapper)))
        };
        if let Some((spec, mapper)) = custom {
            let info = match read_info(&spec.source_path)? {
                Some(info) => info,
                None => DatasetInfo::minimal(&spec.id, spec.data_type),
            };
            return load_from_dir(&spec.source_path, info, split, |record| {
                mapper(record).map_err(RecordError::Invalid)
            });
        }

        let dir = self
            .dataset_dir
            .as_ref()
            .map(|d| d.join(id))
            .filter(|d| d.join(INFO_FILE).is_file() && DatasetInfo::check_id(id).is_ok())
            .ok_or_else(|| AdapterError::UnknownDataset {
                id: id.to_string(),
                known: self.known_ids(),
            })?;
        let info = read_info(&dir)?.expect("info.json checked above");
        if info.id != id {
            return Err(AdapterError::InvalidInfo(format!(
                "{} declares id `{}` but lives in folder `{id}`",
                dir.join(INFO_FILE).display(),
                info.id
            )));
        }
        load_from_dir(&dir, info, split, canonical_record)
    }

    /// Loads every known dataset with all of its splits.
    pub fn load_all(&self) -> Result<BTreeMap<String, Dataset>, AdapterError> {
        self.known_ids()
            .into_iter()
            .map(|id| self.load_dataset(&id, None).map(|d| (id, d)))
            .collect()
    }
}

fn read_info(dir: &Path) -> Result<Option<DatasetInfo>, AdapterError> {
    let path = dir.join(INFO_FILE);
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|source| AdapterError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let info: DatasetInfo = serde_json::from_str(&text).map_err(|e| AdapterError::Parse {
        file: path.display().to_string(),
        line: e.line(),
        reason: e.to_string(),
    })?;
    DatasetInfo::check_id(&info.id)?;
    Ok(Some(info))
}

enum RecordError {
    /// The line is not a well-formed record.
    Malformed(String),
    /// The record parsed but does not yield a valid example.
    Invalid(String),
}

fn load_from_dir(
    dir: &Path,
    info: DatasetInfo,
    split: Option<&str>,
    map: impl Fn(&RawRecord) -> Result<TableExample, RecordError>,
) -> Result<Dataset, AdapterError> {
    let split_names: Vec<String> = match split {
        Some(s) => {
            let path = dir.join(format!("{s}.{SPLIT_FILE_EXT}"));
            if !path.is_file() {
                return Err(AdapterError::UnknownSplit {
                    id: info.id.clone(),
                    split: s.to_string(),
                    available: available_splits(dir),
                });
            }
            vec![s.to_string()]
        }
        None => available_splits(dir),
    };

    let mut splits = BTreeMap::new();
    for name in split_names {
        let path = dir.join(format!("{name}.{SPLIT_FILE_EXT}"));
        let examples = read_split(&path, &map)?;
        splits.insert(name, examples);
    }
    Dataset::new(info, splits)
}

fn available_splits(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .into_iter()
        .flatten()
        .flatten()
        .filter_map(|e| {
            let path = e.path();
            (path.extension()? == SPLIT_FILE_EXT)
                .then(|| path.file_stem()?.to_str().map(str::to_string))
                .flatten()
        })
        .collect();
    names.sort();
    names
}

fn read_split(
    path: &Path,
    map: &impl Fn(&RawRecord) -> Result<TableExample, RecordError>,
) -> Result<Vec<TableExample>, AdapterError> {
    let file = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| AdapterError::Io {
        path: file.clone(),
        source,
    })?;
    let mut examples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(line).map_err(|e| AdapterError::Parse {
            file: file.clone(),
            line: lineno + 1,
            reason: e.to_string(),
        })?;
        let index = examples.len();
        let example = map(&record).map_err(|e| match e {
            RecordError::Malformed(reason) => AdapterError::Parse {
                file: file.clone(),
                line: lineno + 1,
                reason,
            },
            RecordError::Invalid(reason) => AdapterError::Ingestion {
                file: file.clone(),
                index,
                reason,
            },
        })?;
        if let Err(violations) = example.table().validate() {
            let reason = violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            return Err(AdapterError::Ingestion {
                file,
                index,
                reason,
            });
        }
        examples.push(example);
    }
    Ok(examples)
}

#[derive(Deserialize)]
struct CanonicalRecord {
    #[serde(rename = "type")]
    data_type: DataType,
    payload: serde_json::Value,
    #[serde(default)]
    properties: Vec<(String, String)>,
    references: Vec<String>,
}

#[derive(Deserialize)]
struct GraphPayload {
    triples: Vec<Triple>,
}

#[derive(Deserialize)]
struct KeyValuePayload {
    pairs: Vec<(String, String)>,
}

fn canonical_record(raw: &RawRecord) -> Result<TableExample, RecordError> {
    let record: CanonicalRecord =
        serde_json::from_value(raw.clone()).map_err(|e| RecordError::Malformed(e.to_string()))?;
    record_to_example(record).map_err(|e| match e {
        AdapterError::Payload { reason, .. } => RecordError::Malformed(reason),
        other => RecordError::Invalid(other.to_string()),
    })
}

fn record_to_example(record: CanonicalRecord) -> Result<TableExample, AdapterError> {
    let malformed = |e: serde_json::Error| AdapterError::Payload {
        line: 0,
        column: 0,
        reason: e.to_string(),
    };
    let table = match record.data_type {
        DataType::Graph => {
            let p: GraphPayload = serde_json::from_value(record.payload).map_err(malformed)?;
            triples_to_table(&p.triples, record.properties)?
        }
        DataType::KeyValue => {
            let p: KeyValuePayload = serde_json::from_value(record.payload).map_err(malformed)?;
            kv_to_table(&p.pairs, record.properties)?
        }
        DataType::Table | DataType::TableHighlighted => {
            let mut t = highlighted_value_to_table(record.payload)?;
            t.properties_mut().extend(record.properties);
            t
        }
    };
    Ok(TableExample::new(table, record.references)?)
}
