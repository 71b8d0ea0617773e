use std::collections::BTreeSet;
use std::error::Error;
use std::io::Write;
use std::path::{Path, PathBuf};

use tabgenie_core::adapters::Catalog;
use tabgenie_core::export::{export_split, make_annotation_sheet, ExportRequest, SystemOutputs};
use tabgenie_core::outputs::read_outputs_file;
use tabgenie_server::{mock_model, serve, ServiceConfig};

use crate::args::{Command, ConfigArg, DatasetArgs, ExportArgs, MockArgs, RunArgs, SheetArgs};

pub type CmdResult = Result<(), Box<dyn Error + Send + Sync>>;

const DEFAULT_CONFIG: &str = "tabgenie.yaml";

pub fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::Run(a) => run(a),
        Command::Export(a) => export(a),
        Command::Sheet(a) => sheet(a),
        Command::MockModel(a) => mock(a),
    }
}

fn load_config(arg: &ConfigArg) -> Result<ServiceConfig, Box<dyn Error + Send + Sync>> {
    if let Some(path) = &arg.config {
        return Ok(ServiceConfig::load(path)?);
    }
    let default = Path::new(DEFAULT_CONFIG);
    if default.is_file() {
        tracing::info!("using {DEFAULT_CONFIG}");
        Ok(ServiceConfig::load(default)?)
    } else {
        Ok(ServiceConfig::default())
    }
}

fn catalog(data: &DatasetArgs) -> Result<Catalog, Box<dyn Error + Send + Sync>> {
    let dir = match &data.dataset_dir {
        Some(d) => d.clone(),
        None => load_config(&data.config)?.dataset_dir,
    };
    Ok(Catalog::new(dir))
}

fn runtime() -> std::io::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("install SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    let _ = tokio::signal::ctrl_c().await;
}

fn announce(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn run(args: RunArgs) -> CmdResult {
    let mut config = load_config(&args.config)?;
    if let Some(port) = args.port {
        config.port = port.into();
    }
    if let Some(host) = args.host {
        config.host = host;
    }
    runtime()?.block_on(async move {
        let handle = serve(config).await?;
        announce(&format!("http://{}", handle.addr));
        shutdown_signal().await;
        tracing::info!("shutting down");
        handle.shutdown().await?;
        Ok(())
    })
}

fn export(args: ExportArgs) -> CmdResult {
    let catalog = catalog(&args.data)?;
    let mut req = ExportRequest::new(
        &args.data.dataset,
        &args.data.split,
        args.export_format,
        &args.out_dir,
    );
    req.include_properties = !args.no_properties;
    req.single_file = args.single_file;
    let paths = export_split(&catalog, &req)?;
    for p in &paths {
        announce(&p.display().to_string());
    }
    tracing::info!(
        "exported {} file(s) of {}/{} to {}",
        paths.len(),
        args.data.dataset,
        args.data.split,
        args.out_dir.display()
    );
    Ok(())
}

/// `e2e-dev-t5base.jsonl` names system `t5base` for e2e/dev; any other stem is used whole.
fn system_id(path: &Path, dataset: &str, split: &str) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let prefix = format!("{dataset}-{split}-");
    match stem.strip_prefix(&prefix) {
        Some(rest) if !rest.is_empty() => rest.to_string(),
        _ => stem,
    }
}

fn sheet(args: SheetArgs) -> CmdResult {
    let catalog = catalog(&args.data)?;
    let (ds, split) = (&args.data.dataset, &args.data.split);
    let dataset = catalog.load_dataset(ds, Some(split))?;
    let len = dataset.require_split(split)?.len();

    let mut seen = BTreeSet::new();
    let mut systems = Vec::new();
    for file in &args.in_file {
        let id = system_id(file, ds, split);
        if !seen.insert(id.clone()) {
            return Err(format!("two --in_file arguments map to system `{id}`").into());
        }
        let (outputs, warnings) = read_outputs_file(file, len)?;
        for w in &warnings {
            tracing::warn!("{w}");
        }
        systems.push(SystemOutputs {
            system_id: id,
            outputs,
        });
    }
    let count = usize::try_from(args.count).unwrap_or(usize::MAX);
    let path: PathBuf =
        make_annotation_sheet(&dataset, split, &systems, count, args.seed, &args.out_file)?;
    announce(&path.display().to_string());
    tracing::info!(
        "wrote {} example(s) with {} system(s)",
        count.min(len),
        systems.len()
    );
    Ok(())
}

fn mock(args: MockArgs) -> CmdResult {
    let addr: std::net::SocketAddr = format!("{}:{}", args.host, args.port).parse()?;
    runtime()?.block_on(async move {
        let model = mock_model::spawn(addr).await?;
        announce(&model.endpoint());
        shutdown_signal().await;
        model.stop();
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn system_id_from_stem() {
        assert_eq!(
            system_id(Path::new("o/e2e-dev-t5base.jsonl"), "e2e", "dev"),
            "t5base"
        );
        assert_eq!(
            system_id(Path::new("out-t5-base.jsonl"), "e2e", "dev"),
            "out-t5-base"
        );
        assert_eq!(
            system_id(Path::new("e2e-dev-.jsonl"), "e2e", "dev"),
            "e2e-dev-"
        );
    }
}
