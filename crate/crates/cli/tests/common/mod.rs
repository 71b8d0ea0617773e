#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .canonicalize()
        .unwrap()
}

pub fn tabgenie() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tabgenie"));
    c.env("TABGENIE_LOG", "warn");
    c
}

pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    tabgenie().current_dir(dir).args(args).output().unwrap()
}

/// A config over the fixtures with its session file under `tmp`.
pub fn write_config(tmp: &Path, model_endpoint: &str) -> PathBuf {
    let fx = fixtures();
    let yaml = format!(
        "host: 127.0.0.1\nport: 8890\ndataset_dir: {}\noutput_dir: {}\nsession_file: {}\n\
         pipelines:\n  - id: model_api\n    processors: [model_api]\n    params:\n      endpoint: {model_endpoint}\n",
        fx.join("datasets").display(),
        fx.join("outputs").display(),
        tmp.join("session.json").display(),
    );
    let path = tmp.join("tabgenie.yaml");
    std::fs::write(&path, yaml).unwrap();
    path
}

pub fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

/// Spawns `tabgenie run ...` and waits for the address line on stdout.
pub fn spawn_server(args: &[&str]) -> (Child, String) {
    let mut child = tabgenie()
        .arg("run")
        .args(args)
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let url = line.trim().to_string();
    assert!(
        url.starts_with("http://"),
        "server did not announce an address: {url:?}"
    );
    (child, url)
}

pub fn interrupt(child: &Child) {
    let ok = Command::new("kill")
        .args(["-INT", &child.id().to_string()])
        .status()
        .unwrap()
        .success();
    assert!(ok);
}

pub fn wait_with_timeout(child: &mut Child, limit: Duration) -> Option<std::process::ExitStatus> {
    let start = Instant::now();
    while start.elapsed() < limit {
        if let Some(s) = child.try_wait().unwrap() {
            return Some(s);
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    let _ = child.kill();
    None
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .max_redirects(0)
        .build()
        .into()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Column A of the first sheet, header excluded.
pub fn sheet_indices(path: &Path) -> Vec<f64> {
    use calamine::{Data, Reader};
    let mut wb: calamine::Xlsx<_> = calamine::open_workbook(path).unwrap();
    let name = wb.sheet_names()[0].clone();
    let range = wb.worksheet_range(&name).unwrap();
    range
        .rows()
        .skip(1)
        .map(|r| match &r[0] {
            Data::Float(f) => *f,
            Data::Int(i) => *i as f64,
            other => panic!("index cell {other:?}"),
        })
        .collect()
}

pub fn sheet_header(path: &Path) -> Vec<String> {
    use calamine::Reader;
    let mut wb: calamine::Xlsx<_> = calamine::open_workbook(path).unwrap();
    let name = wb.sheet_names()[0].clone();
    let range = wb.worksheet_range(&name).unwrap();
    range
        .rows()
        .next()
        .unwrap()
        .iter()
        .map(|c| c.to_string())
        .collect()
}
