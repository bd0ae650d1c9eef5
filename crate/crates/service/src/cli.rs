//! Command line front end.

use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use taskvis_core::data::{load_dataset, FieldType, FilterPredicate, GeoRole, LoadOptions};
use taskvis_core::task::AnalyticTask;
use taskvis_core::vegalite::{DataRef, SchemaVersion};

use crate::pipeline::{chart_file, recommend, Engine, Manifest, Mode, RecommendationRequest, RequestError, SchemeChoice};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "taskvis", version, about = "Task-oriented chart recommendation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recommend charts for a data file and write them as Vega-Lite files.
    Recommend(RecommendArgs),
    /// Run the HTTP API.
    Serve(ServeArgs),
}

fn parse_filter(s: &str) -> Result<FilterPredicate, String> {
    FilterPredicate::parse(s)
}

fn parse_type(s: &str) -> Result<(String, FieldType), String> {
    let (col, t) = s.rsplit_once('=').ok_or_else(|| format!("expected COLUMN=TYPE, got `{s}`"))?;
    Ok((col.to_string(), t.parse()?))
}

fn parse_geo(s: &str) -> Result<(String, GeoRole), String> {
    let (col, r) = s.rsplit_once('=').ok_or_else(|| format!("expected COLUMN=ROLE, got `{s}`"))?;
    Ok((col.to_string(), r.parse()?))
}

fn parse_max(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 1 => Ok(n),
        _ => Err(format!("expected a positive integer, got `{s}`")),
    }
}

fn parse_version(s: &str) -> Result<SchemaVersion, String> {
    match s {
        "v4" => Ok(SchemaVersion::V4),
        "v5" => Ok(SchemaVersion::V5),
        _ => Err(format!("unknown Vega-Lite version `{s}`; expected one of: v4, v5")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct RecommendArgs {
    /// CSV file or JSON array of records.
    #[arg(long)]
    pub data: PathBuf,
    /// Columns of interest, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    /// Analytic tasks, comma separated. All tasks when omitted.
    #[arg(long, value_delimiter = ',')]
    pub tasks: Vec<AnalyticTask>,
    #[arg(long, default_value = "individual")]
    pub mode: Mode,
    /// complexity, reverse_complexity, interest, task_coverage or default.
    #[arg(long, default_value = "default")]
    pub scheme: SchemeChoice,
    /// Maximum number of charts.
    #[arg(long = "max", default_value_t = crate::pipeline::DEFAULT_MAX_CHARTS, value_parser = parse_max)]
    pub max: usize,
    /// Row filter such as "Origin eq USA" or "Year between 1970 1975". Repeatable.
    #[arg(long = "filter", value_parser = parse_filter)]
    pub filters: Vec<FilterPredicate>,
    /// Override an inferred type, e.g. Cylinders=ordinal. Repeatable.
    #[arg(long = "type", value_name = "COLUMN=TYPE", value_parser = parse_type)]
    pub types: Vec<(String, FieldType)>,
    /// Attach a geographic role, e.g. lat=latitude. Repeatable.
    #[arg(long = "geo", value_name = "COLUMN=ROLE", value_parser = parse_geo)]
    pub geo: Vec<(String, GeoRole)>,
    /// Also write one ranked list per task.
    #[arg(long)]
    pub by_task: bool,
    #[arg(long, default_value = "taskvis-out")]
    pub out: PathBuf,
    #[arg(long = "vl-version", default_value = "v5", value_parser = parse_version)]
    pub vl_version: SchemaVersion,
    /// Reference the data by this URL instead of inlining it.
    #[arg(long)]
    pub data_url: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    /// Port; defaults to TASKVIS_PORT or 8080.
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Failure(format!("{}: {e}", path.display()))
}

fn remove_stale(dir: &Path) -> Result<(), CliError> {
    if !dir.is_dir() {
        return Ok(());
    }
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with("chart-") && name.ends_with(".vl.json") {
            std::fs::remove_file(&path).map_err(|e| io_err(&path, e))?;
        }
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Failure(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Run `recommend` and write charts plus a manifest under `args.out`.
pub fn run_recommend(args: &RecommendArgs, mut engine: Engine) -> Result<Manifest, CliError> {
    let bytes = std::fs::read(&args.data).map_err(|e| CliError::Input(format!("{}: {e}", args.data.display())))?;
    let name = args
        .data
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".to_string());
    let mut dataset = load_dataset(&bytes, LoadOptions::default())
        .map_err(|e| CliError::Input(format!("{}: {e}", args.data.display())))?
        .with_id(name.clone());
    for (col, t) in &args.types {
        dataset = dataset.override_field_type(col, *t).map_err(|e| CliError::Input(e.to_string()))?;
    }
    for (col, role) in &args.geo {
        dataset = dataset.set_geo_role(col, Some(*role)).map_err(|e| CliError::Input(e.to_string()))?;
    }
    engine.emit.schema = args.vl_version;
    if let Some(url) = &args.data_url {
        engine.emit.data = DataRef::Url(url.clone());
    }
    let req = RecommendationRequest {
        dataset_id: name.clone(),
        columns: args.columns.clone(),
        tasks: args.tasks.clone(),
        mode: args.mode,
        scheme: args.scheme,
        max_charts: args.max,
        filters: args.filters.clone(),
        display_by_task: args.by_task,
    };
    let resp = recommend(&engine, &dataset, &req).map_err(|e| match e {
        RequestError::Invalid(m) => CliError::Input(m),
        RequestError::Engine(m) => CliError::Failure(m),
    })?;
    let manifest = Manifest::new(name, &resp);
    remove_stale(&args.out)?;
    let by_task = args.out.join("by_task");
    if by_task.is_dir() {
        std::fs::remove_dir_all(&by_task).map_err(|e| io_err(&by_task, e))?;
    }
    for (file, doc) in manifest.files(&resp) {
        write_json(&args.out.join(file), doc)?;
    }
    write_json(&args.out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// One line per chart, for the terminal.
pub fn summary(m: &Manifest) -> String {
    let mut out = String::new();
    for (i, c) in m.charts.iter().enumerate() {
        let tasks: Vec<&str> = c.covering_tasks.iter().map(|t| t.as_str()).collect();
        out.push_str(&format!(
            "{}  {:<12} cost {:<6} [{}] {}\n",
            chart_file(i),
            c.mark.to_string(),
            c.cost,
            c.fields.join(", "),
            tasks.join(", ")
        ));
    }
    if let Some(cov) = &m.coverage {
        let state = if cov.complete { "complete" } else { "incomplete" };
        out.push_str(&format!("coverage {state}: {}\n", cov.covered_columns.join(", ")));
    }
    if m.partial {
        out.push_str("note: search limits were reached; results are partial\n");
    }
    out
}

pub fn serve_addr(args: &ServeArgs) -> Result<SocketAddr, CliError> {
    let port = match args.port {
        Some(p) => p,
        None => crate::http::port_from_env().map_err(CliError::Input)?,
    };
    Ok(SocketAddr::new(args.host, port))
}
