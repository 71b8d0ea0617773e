//! Interactive processing pipelines: named chains of processors that turn an
//! (optionally edited) table plus parameters into generated text or a graph.

mod graph;
mod model_api;

pub use graph::{rdf_graph, Graph, GraphEdge, GraphNode};
pub use model_api::{
    build_prompt, call_model, PromptRequest, TextResponse, DEFAULT_TIMEOUT_MS, INPUT_PLACEHOLDER,
};

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{DataType, Dataset};
use crate::linearize::{linearize, linearize_default, LinearizationConfig, LinearizeError};
use crate::table::{Table, Violation};

pub const MODEL_API: &str = "model_api";
pub const RDF_GRAPH: &str = "rdf_graph";
pub const LINEARIZE: &str = "linearize";

pub type Params = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineRequest {
    pub dataset_id: String,
    pub split: String,
    pub index: usize,
    #[serde(default)]
    pub table_override: Option<Table>,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PipelineOutput {
    Text { text: String },
    Graph { graph: Graph },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProcessorError {
    #[error("template error: {0}")]
    Template(String),
    #[error("model endpoint {endpoint} failed after {elapsed_ms} ms: {reason}")]
    Upstream {
        endpoint: String,
        elapsed_ms: u64,
        reason: String,
    },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown pipeline `{id}`; available: [{}]", .known.join(", "))]
    UnknownPipeline { id: String, known: Vec<String> },
    #[error("unknown processor `{0}`")]
    UnknownProcessor(String),
    #[error("a pipeline with id `{0}` is already registered")]
    Conflict(String),
    #[error("no example {dataset_id}/{split}/{index}")]
    ExampleNotFound {
        dataset_id: String,
        split: String,
        index: usize,
    },
    #[error("table override is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidOverride(Vec<Violation>),
    #[error("processor `{processor}` failed: {source}")]
    Processor {
        processor: String,
        #[source]
        source: ProcessorError,
    },
    #[error("pipeline `{0}` ended without producing text or a graph")]
    NoOutput(String),
}

impl PipelineError {
    /// True when the failure came from the remote model, not the request.
    pub fn is_upstream(&self) -> bool {
        matches!(
            self,
            PipelineError::Processor {
                source: ProcessorError::Upstream { .. },
                ..
            }
        )
    }
}

/// Value flowing between processors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stage {
    Table(Table),
    Text(String),
    Graph(Graph),
}

pub struct ProcessorContext<'a> {
    pub params: &'a Params,
    pub data_type: DataType,
}

impl ProcessorContext<'_> {
    pub fn param(&self, name: &str) -> Option<&str> {
        self.params.get(name).map(String::as_str)
    }

    fn flag(&self, name: &str, default: bool) -> Result<bool, ProcessorError> {
        match self.param(name) {
            None => Ok(default),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no" | "") => Ok(false),
            Some(other) => Err(ProcessorError::InvalidParam {
                name: name.into(),
                reason: format!("expected a boolean, got `{other}`"),
            }),
        }
    }
}

pub trait Processor: Send + Sync {
    fn name(&self) -> &str;
    fn process(&self, input: Stage, ctx: &ProcessorContext<'_>) -> Result<Stage, ProcessorError>;
}

/// Table to text with the marker grammar. Honors `highlighted_only` and
/// `include_properties` params.
pub struct LinearizeProcessor;

impl Processor for LinearizeProcessor {
    fn name(&self) -> &str {
        LINEARIZE
    }

    fn process(&self, input: Stage, ctx: &ProcessorContext<'_>) -> Result<Stage, ProcessorError> {
        let Stage::Table(table) = input else {
            return Err(ProcessorError::TypeMismatch(
                "linearize expects a table".into(),
            ));
        };
        let config = LinearizationConfig {
            highlighted_only: ctx.flag("highlighted_only", false)?,
            include_properties: ctx.flag("include_properties", true)?,
            ..Default::default()
        };
        Ok(Stage::Text(linearize(&table, &config)?))
    }
}

/// Sends a prompt built from `prompt_template` (or `prompt`) to `endpoint`.
/// A table input is linearized with the default config first; a text input
/// is used as is.
pub struct ModelApiProcessor;

impl Processor for ModelApiProcessor {
    fn name(&self) -> &str {
        MODEL_API
    }

    fn process(&self, input: Stage, ctx: &ProcessorContext<'_>) -> Result<Stage, ProcessorError> {
        let linearized = match input {
            Stage::Table(t) => linearize_default(&t),
            Stage::Text(s) => s,
            Stage::Graph(_) => {
                return Err(ProcessorError::TypeMismatch(
                    "model_api cannot take a graph".into(),
                ))
            }
        };
        let template = ctx
            .param("prompt_template")
            .or_else(|| ctx.param("prompt"))
            .unwrap_or(INPUT_PLACEHOLDER);
        let prompt = build_prompt(template, &linearized)?;
        let endpoint = ctx
            .param("endpoint")
            .ok_or_else(|| ProcessorError::InvalidParam {
                name: "endpoint".into(),
                reason: "missing".into(),
            })?;
        let timeout_ms = match ctx.param("timeout_ms") {
            None => DEFAULT_TIMEOUT_MS,
            Some(v) => v.parse().map_err(|_| ProcessorError::InvalidParam {
                name: "timeout_ms".into(),
                reason: format!("expected milliseconds, got `{v}`"),
            })?,
        };
        Ok(Stage::Text(call_model(
            endpoint,
            &prompt,
            Duration::from_millis(timeout_ms),
        )?))
    }
}

pub struct RdfGraphProcessor;

impl Processor for RdfGraphProcessor {
    fn name(&self) -> &str {
        RDF_GRAPH
    }

    fn process(&self, input: Stage, _ctx: &ProcessorContext<'_>) -> Result<Stage, ProcessorError> {
        let Stage::Table(table) = input else {
            return Err(ProcessorError::TypeMismatch(
                "rdf_graph expects a table".into(),
            ));
        };
        Ok(Stage::Graph(rdf_graph(&table)?))
    }
}

pub fn builtin_processor(name: &str) -> Option<Arc<dyn Processor>> {
    match name {
        LINEARIZE => Some(Arc::new(LinearizeProcessor)),
        MODEL_API => Some(Arc::new(ModelApiProcessor)),
        RDF_GRAPH => Some(Arc::new(RdfGraphProcessor)),
        _ => None,
    }
}

#[derive(Clone)]
pub struct Pipeline {
    pub id: String,
    pub processors: Vec<Arc<dyn Processor>>,
    /// Parameter defaults; request params override them key by key.
    pub defaults: Params,
}

impl Pipeline {
    /// A pipeline of built-in processors looked up by name.
    pub fn from_names(
        id: impl Into<String>,
        names: &[impl AsRef<str>],
        defaults: Params,
    ) -> Result<Self, PipelineError> {
        let processors = names
            .iter()
            .map(|n| {
                builtin_processor(n.as_ref())
                    .ok_or_else(|| PipelineError::UnknownProcessor(n.as_ref().to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            id: id.into(),
            processors,
            defaults,
        })
    }

    pub fn processor_names(&self) -> Vec<String> {
        self.processors
            .iter()
            .map(|p| p.name().to_string())
            .collect()
    }
}

#[derive(Clone, Default)]
pub struct PipelineRegistry {
    pipelines: BTreeMap<String, Pipeline>,
}

impl PipelineRegistry {
    /// `model_api` and `rdf_graph`, each a single processor.
    pub fn with_builtins() -> Self {
        let mut reg = Self::default();
        for name in [MODEL_API, RDF_GRAPH] {
            reg.register(Pipeline::from_names(name, &[name], Params::new()).expect("builtin"))
                .expect("builtin ids are distinct");
        }
        reg
    }

    pub fn register(&mut self, pipeline: Pipeline) -> Result<(), PipelineError> {
        if self.pipelines.contains_key(&pipeline.id) {
            return Err(PipelineError::Conflict(pipeline.id));
        }
        self.pipelines.insert(pipeline.id.clone(), pipeline);
        Ok(())
    }

    /// Inserts or replaces.
    pub fn upsert(&mut self, pipeline: Pipeline) {
        self.pipelines.insert(pipeline.id.clone(), pipeline);
    }

    pub fn get(&self, id: &str) -> Option<&Pipeline> {
        self.pipelines.get(id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.pipelines.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pipeline> {
        self.pipelines.values()
    }
}

/// Runs pipeline `id` on the request's effective table: the override when
/// present, else a copy of the stored example. Stored datasets are never
/// modified.
pub fn run_pipeline(
    registry: &PipelineRegistry,
    id: &str,
    request: &PipelineRequest,
    datasets: &BTreeMap<String, Dataset>,
) -> Result<PipelineOutput, PipelineError> {
    let pipeline = registry
        .get(id)
        .ok_or_else(|| PipelineError::UnknownPipeline {
            id: id.to_string(),
            known: registry.ids(),
        })?;
    let not_found = || PipelineError::ExampleNotFound {
        dataset_id: request.dataset_id.clone(),
        split: request.split.clone(),
        index: request.index,
    };
    let dataset = datasets.get(&request.dataset_id).ok_or_else(not_found)?;
    let example = dataset
        .example(&request.split, request.index)
        .ok_or_else(not_found)?;

    let table = match &request.table_override {
        Some(t) => {
            t.validate().map_err(PipelineError::InvalidOverride)?;
            t.clone()
        }
        None => example.table().clone(),
    };

    let mut params = pipeline.defaults.clone();
    params.extend(request.params.iter().map(|(k, v)| (k.clone(), v.clone())));
    let ctx = ProcessorContext {
        params: &params,
        data_type: dataset.info().data_type,
    };

    let mut stage = Stage::Table(table);
    for p in &pipeline.processors {
        stage = p
            .process(stage, &ctx)
            .map_err(|source| PipelineError::Processor {
                processor: p.name().to_string(),
                source,
            })?;
    }
    match stage {
        Stage::Text(text) => Ok(PipelineOutput::Text { text }),
        Stage::Graph(graph) => Ok(PipelineOutput::Graph { graph }),
        Stage::Table(_) => Err(PipelineError::NoOutput(id.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::{kv_to_table, triples_to_table, DatasetInfo, Triple};
    use crate::table::{Coord, TableExample};

    fn datasets() -> BTreeMap<String, Dataset> {
        let kv = kv_to_table(&[("name".into(), "Café Sicilia".into())], vec![]).unwrap();
        let graph = triples_to_table(&[Triple::new("a", "p", "b")], vec![]).unwrap();
        let mk = |id: &str, dt, t: Table| {
            let ex = TableExample::new(t, vec!["r".into()]).unwrap();
            (
                id.to_string(),
                Dataset::new(
                    DatasetInfo::minimal(id, dt),
                    [("dev".to_string(), vec![ex])].into_iter().collect(),
                )
                .unwrap(),
            )
        };
        [
            mk("e2e", DataType::KeyValue, kv),
            mk("webnlg", DataType::Graph, graph),
        ]
        .into_iter()
        .collect()
    }

    fn req(id: &str) -> PipelineRequest {
        PipelineRequest {
            dataset_id: id.into(),
            split: "dev".into(),
            index: 0,
            table_override: None,
            params: Params::new(),
        }
    }

    /// Processor that echoes its text input, standing in for a model.
    struct Echo;
    impl Processor for Echo {
        fn name(&self) -> &str {
            "echo"
        }
        fn process(&self, input: Stage, _: &ProcessorContext<'_>) -> Result<Stage, ProcessorError> {
            match input {
                Stage::Text(t) => Ok(Stage::Text(format!("echo: {t}"))),
                _ => Err(ProcessorError::TypeMismatch("echo wants text".into())),
            }
        }
    }

    #[test]
    fn graph_pipeline() {
        let reg = PipelineRegistry::with_builtins();
        let out = run_pipeline(&reg, RDF_GRAPH, &req("webnlg"), &datasets()).unwrap();
        let PipelineOutput::Graph { graph } = out else {
            panic!()
        };
        assert_eq!((graph.nodes.len(), graph.edges.len()), (2, 1));

        let err = run_pipeline(&reg, RDF_GRAPH, &req("e2e"), &datasets()).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::Processor { ref processor, source: ProcessorError::TypeMismatch(_) } if processor == RDF_GRAPH
        ));
    }

    #[test]
    fn custom_chain_uses_override_and_leaves_store_untouched() {
        let mut reg = PipelineRegistry::default();
        let mut p = Pipeline::from_names("lin", &[LINEARIZE], Params::new()).unwrap();
        p.processors.push(Arc::new(Echo));
        reg.register(p).unwrap();

        let ds = datasets();
        let before = ds["e2e"].example("dev", 0).unwrap().clone();
        let mut request = req("e2e");
        let mut edited = before.table().clone();
        edited
            .set_cell_value(Coord::new(0, 1), "the National Theatre")
            .unwrap();
        request.table_override = Some(edited);

        let out = run_pipeline(&reg, "lin", &request, &ds).unwrap();
        assert_eq!(
            out,
            PipelineOutput::Text {
                text: "echo: [R] [H] name [C] the National Theatre".into()
            }
        );
        assert_eq!(ds["e2e"].example("dev", 0).unwrap(), &before);
    }

    #[test]
    fn highlighted_only_param() {
        let mut reg = PipelineRegistry::default();
        reg.register(Pipeline::from_names("lin", &[LINEARIZE], Params::new()).unwrap())
            .unwrap();
        let ds = datasets();
        let mut request = req("e2e");
        request
            .params
            .insert("highlighted_only".into(), "true".into());
        let err = run_pipeline(&reg, "lin", &request, &ds).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::Processor {
                source: ProcessorError::Linearize(LinearizeError::EmptySelection),
                ..
            }
        ));
        request
            .params
            .insert("highlighted_only".into(), "maybe".into());
        assert!(matches!(
            run_pipeline(&reg, "lin", &request, &ds).unwrap_err(),
            PipelineError::Processor {
                source: ProcessorError::InvalidParam { .. },
                ..
            }
        ));
    }

    #[test]
    fn lookup_errors() {
        let reg = PipelineRegistry::with_builtins();
        let ds = datasets();
        assert!(matches!(
            run_pipeline(&reg, "nope", &req("e2e"), &ds),
            Err(PipelineError::UnknownPipeline { .. })
        ));
        let mut r = req("e2e");
        r.index = 7;
        assert!(matches!(
            run_pipeline(&reg, MODEL_API, &r, &ds),
            Err(PipelineError::ExampleNotFound { .. })
        ));
        assert!(matches!(
            Pipeline::from_names("x", &["bogus"], Params::new()),
            Err(PipelineError::UnknownProcessor(_))
        ));
        let mut reg = reg;
        assert!(matches!(
            reg.register(Pipeline::from_names(MODEL_API, &[MODEL_API], Params::new()).unwrap()),
            Err(PipelineError::Conflict(_))
        ));
    }

    #[test]
    fn model_api_param_errors() {
        let reg = PipelineRegistry::with_builtins();
        let ds = datasets();
        let mut r = req("e2e");
        let err = run_pipeline(&reg, MODEL_API, &r, &ds).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::Processor { source: ProcessorError::InvalidParam { ref name, .. }, .. } if name == "endpoint"
        ));
        r.params
            .insert("prompt_template".into(), "no placeholder".into());
        r.params
            .insert("endpoint".into(), "http://127.0.0.1:9/".into());
        let err = run_pipeline(&reg, MODEL_API, &r, &ds).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::Processor {
                source: ProcessorError::Template(_),
                ..
            }
        ));
        assert!(!err.is_upstream());
    }

    #[test]
    fn output_wire_shape() {
        let text = serde_json::to_value(PipelineOutput::Text { text: "hi".into() }).unwrap();
        assert_eq!(text, serde_json::json!({"kind": "text", "text": "hi"}));
        let g = serde_json::to_value(PipelineOutput::Graph {
            graph: Graph::default(),
        })
        .unwrap();
        assert_eq!(
            g,
            serde_json::json!({"kind": "graph", "graph": {"nodes": [], "edges": []}})
        );
    }
}
