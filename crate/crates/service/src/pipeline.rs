//! The recommendation pipeline behind both the HTTP API and the CLI.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use taskvis_core::combine::{enumerate_tasks, recommend_combination, RecommendError};
use taskvis_core::cost::{CostError, CostTable};
use taskvis_core::data::{Dataset, FilterPredicate};
use taskvis_core::enumerate::{EnumerateError, EnumerationLimits};
use taskvis_core::rank::{merge_dedup, rank, RankError, RankingScheme, ScoredSpec};
use taskvis_core::rules::{RuleBase, RuleLoadError};
use taskvis_core::task::{descriptor, AnalyticTask, MarkSpec};
use taskvis_core::vegalite::{to_vegalite, EmitOptions};

pub const DEFAULT_MAX_CHARTS: usize = 20;

/// Rules, costs, search limits and emission settings for one process.
#[derive(Debug, Clone)]
pub struct Engine {
    pub rules: RuleBase,
    pub costs: CostTable,
    pub limits: EnumerationLimits,
    pub emit: EmitOptions,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Rules(#[from] RuleLoadError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

impl Engine {
    pub fn shipped() -> Engine {
        Engine {
            rules: RuleBase::shipped().clone(),
            costs: *CostTable::shipped(),
            limits: EnumerationLimits::default(),
            emit: EmitOptions::default(),
        }
    }

    /// Shipped defaults with rule and cost files taken from the environment.
    pub fn from_env() -> Result<Engine, ConfigError> {
        Ok(Engine {
            rules: RuleBase::from_env()?,
            costs: CostTable::from_env()?,
            ..Engine::shipped()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Individual,
    Combination,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "individual" => Ok(Mode::Individual),
            "combination" => Ok(Mode::Combination),
            _ => Err(format!("unknown mode `{s}`; expected one of: individual, combination")),
        }
    }
}

/// A ranking scheme, or `default` to use the task base's choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SchemeChoice {
    #[default]
    Default,
    Fixed(RankingScheme),
}

impl SchemeChoice {
    /// One task uses its own default; several use task coverage.
    pub fn resolve(self, tasks: &[AnalyticTask]) -> RankingScheme {
        match (self, tasks) {
            (SchemeChoice::Fixed(s), _) => s,
            (SchemeChoice::Default, [one]) => descriptor(*one).default_scheme,
            (SchemeChoice::Default, _) => RankingScheme::TaskCoverage,
        }
    }
}

impl FromStr for SchemeChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "default" {
            return Ok(SchemeChoice::Default);
        }
        s.parse().map(SchemeChoice::Fixed).map_err(|e: String| format!("{e}, default"))
    }
}

impl fmt::Display for SchemeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeChoice::Default => f.write_str("default"),
            SchemeChoice::Fixed(s) => s.fmt(f),
        }
    }
}

impl TryFrom<String> for SchemeChoice {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SchemeChoice> for String {
    fn from(s: SchemeChoice) -> String {
        s.to_string()
    }
}

fn default_max_charts() -> usize {
    DEFAULT_MAX_CHARTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommendationRequest {
    pub dataset_id: String,
    #[serde(default)]
    pub columns: Vec<String>,
    #[serde(default)]
    pub tasks: Vec<AnalyticTask>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub scheme: SchemeChoice,
    #[serde(default = "default_max_charts")]
    pub max_charts: usize,
    #[serde(default)]
    pub filters: Vec<FilterPredicate>,
    #[serde(default)]
    pub display_by_task: bool,
}

impl RecommendationRequest {
    pub fn new(dataset_id: impl Into<String>) -> RecommendationRequest {
        RecommendationRequest {
            dataset_id: dataset_id.into(),
            columns: Vec::new(),
            tasks: Vec::new(),
            mode: Mode::Individual,
            scheme: SchemeChoice::Default,
            max_charts: DEFAULT_MAX_CHARTS,
            filters: Vec::new(),
            display_by_task: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub vegalite: Value,
    pub mark: MarkSpec,
    pub cost: f64,
    pub covering_tasks: Vec<AnalyticTask>,
    pub fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub covered_columns: Vec<String>,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationResponse {
    pub charts: Vec<Chart>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grouped_by_task: Option<BTreeMap<AnalyticTask, Vec<Chart>>>,
    pub partial: bool,
    /// The scheme actually applied; absent in combination mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<RankingScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<Coverage>,
}

#[derive(Debug, Error)]
pub enum RequestError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Engine(String),
}

impl From<RecommendError> for RequestError {
    fn from(e: RecommendError) -> Self {
        match e {
            RecommendError::Enumerate(e @ EnumerateError::UnknownColumn(_)) => RequestError::Invalid(e.to_string()),
            other => RequestError::Engine(other.to_string()),
        }
    }
}

impl From<RankError> for RequestError {
    fn from(e: RankError) -> Self {
        match e {
            RankError::EmptyInterest => RequestError::Invalid(e.to_string()),
            RankError::Cost(c) => RequestError::Engine(c.to_string()),
        }
    }
}

/// Selected tasks with `filter` removed; none selected means all of them.
pub fn selected_tasks(tasks: &[AnalyticTask]) -> Vec<AnalyticTask> {
    let mut out: Vec<AnalyticTask> = Vec::new();
    for &t in tasks {
        if t != AnalyticTask::Filter && !out.contains(&t) {
            out.push(t);
        }
    }
    if out.is_empty() {
        out.extend(AnalyticTask::enumerable());
    }
    out
}

fn validate(req: &RecommendationRequest, dataset: &Dataset) -> Result<(), RequestError> {
    if req.max_charts == 0 {
        return Err(RequestError::Invalid("max_charts must be at least 1".into()));
    }
    if req.mode == Mode::Individual && req.scheme == SchemeChoice::Fixed(RankingScheme::Interest) && req.columns.is_empty()
    {
        return Err(RequestError::Invalid(
            "the interest scheme needs at least one column of interest".into(),
        ));
    }
    if let Some(c) = req.columns.iter().find(|c| dataset.field(c).is_none()) {
        return Err(RequestError::Invalid(format!("unknown column `{c}`")));
    }
    Ok(())
}

fn emit(list: &[ScoredSpec], dataset: &Dataset, opts: &EmitOptions, max: usize) -> Vec<Chart> {
    list.iter()
        .take(max)
        .map(|s| Chart {
            vegalite: to_vegalite(&s.spec, dataset, opts),
            mark: s.spec.mark,
            cost: s.cost,
            covering_tasks: s.covering_tasks.iter().copied().collect(),
            fields: s.fields.iter().cloned().collect(),
        })
        .collect()
}

/// Run one request against `dataset`.
pub fn recommend(
    engine: &Engine,
    dataset: &Dataset,
    req: &RecommendationRequest,
) -> Result<RecommendationResponse, RequestError> {
    validate(req, dataset)?;
    let data = dataset
        .apply_filters(&req.filters)
        .map_err(|e| RequestError::Invalid(e.to_string()))?;
    let tasks = selected_tasks(&req.tasks);
    let interested: BTreeSet<String> = req.columns.iter().cloned().collect();
    match req.mode {
        Mode::Individual => individual(engine, &data, req, &tasks, interested),
        Mode::Combination => {
            let chosen = (!req.tasks.is_empty()).then_some(tasks.as_slice());
            let (result, partial) =
                recommend_combination(&data, &interested, chosen, &engine.rules, &engine.costs, &engine.limits)?;
            Ok(RecommendationResponse {
                charts: emit(&result.charts, &data, &engine.emit, req.max_charts),
                grouped_by_task: None,
                partial,
                scheme: None,
                coverage: Some(Coverage {
                    covered_columns: result.covered_columns.into_iter().collect(),
                    complete: result.complete,
                }),
            })
        }
    }
}

fn individual(
    engine: &Engine,
    data: &Dataset,
    req: &RecommendationRequest,
    tasks: &[AnalyticTask],
    mut interested: BTreeSet<String>,
) -> Result<RecommendationResponse, RequestError> {
    let (per_task, partial) = enumerate_tasks(data, &req.columns, tasks, &engine.rules, &engine.costs, &engine.limits)?;
    if interested.is_empty() {
        interested = data.field_names().map(str::to_string).collect();
    }
    let scheme = req.scheme.resolve(tasks);
    let ranked = rank(merge_dedup(&per_task), scheme, &interested, &engine.costs)?;
    let grouped = if req.display_by_task {
        let mut groups = BTreeMap::new();
        for (task, list) in &per_task {
            let s = req.scheme.resolve(&[*task]);
            let ranked = rank(list.clone(), s, &interested, &engine.costs)?;
            groups.insert(*task, emit(&ranked, data, &engine.emit, req.max_charts));
        }
        Some(groups)
    } else {
        None
    };
    Ok(RecommendationResponse {
        charts: emit(&ranked, data, &engine.emit, req.max_charts),
        grouped_by_task: grouped,
        partial,
        scheme: Some(scheme),
        coverage: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub mark: MarkSpec,
    pub cost: f64,
    pub covering_tasks: Vec<AnalyticTask>,
    pub fields: Vec<String>,
}

/// Index of the chart files written for one response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: String,
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<RankingScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<Coverage>,
    pub charts: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grouped_by_task: Option<BTreeMap<AnalyticTask, Vec<ManifestEntry>>>,
}

pub fn chart_file(index: usize) -> String {
    format!("chart-{:03}.vl.json", index + 1)
}

fn entries(charts: &[Chart], prefix: &str) -> Vec<ManifestEntry> {
    charts
        .iter()
        .enumerate()
        .map(|(i, c)| ManifestEntry {
            file: format!("{prefix}{}", chart_file(i)),
            mark: c.mark,
            cost: c.cost,
            covering_tasks: c.covering_tasks.clone(),
            fields: c.fields.clone(),
        })
        .collect()
}

impl Manifest {
    pub fn new(dataset: impl Into<String>, resp: &RecommendationResponse) -> Manifest {
        Manifest {
            dataset: dataset.into(),
            partial: resp.partial,
            scheme: resp.scheme,
            coverage: resp.coverage.clone(),
            charts: entries(&resp.charts, ""),
            grouped_by_task: resp.grouped_by_task.as_ref().map(|g| {
                g.iter()
                    .map(|(t, charts)| (*t, entries(charts, &format!("by_task/{t}/"))))
                    .collect()
            }),
        }
    }

    /// Every (relative path, document) pair the manifest refers to.
    pub fn files<'a>(&self, resp: &'a RecommendationResponse) -> Vec<(String, &'a Value)> {
        let mut out: Vec<(String, &Value)> =
            self.charts.iter().zip(&resp.charts).map(|(e, c)| (e.file.clone(), &c.vegalite)).collect();
        if let (Some(m), Some(g)) = (&self.grouped_by_task, &resp.grouped_by_task) {
            for (t, list) in m {
                out.extend(list.iter().zip(&g[t]).map(|(e, c)| (e.file.clone(), &c.vegalite)));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use taskvis_core::data::{load_dataset, LoadOptions};

    fn cars() -> Dataset {
        load_dataset(include_bytes!("../../core/data/cars.json"), LoadOptions::default()).unwrap()
    }

    #[test]
    fn scheme_choice_parses_and_resolves() {
        assert_eq!("default".parse::<SchemeChoice>().unwrap(), SchemeChoice::Default);
        let err = "bogus".parse::<SchemeChoice>().unwrap_err();
        assert!(err.contains("task_coverage") && err.contains("default"), "{err}");
        assert_eq!(SchemeChoice::Default.resolve(&[AnalyticTask::Sort]), RankingScheme::ReverseComplexity);
        let two = [AnalyticTask::Sort, AnalyticTask::Trend];
        assert_eq!(SchemeChoice::Default.resolve(&two), RankingScheme::TaskCoverage);
    }

    #[test]
    fn filter_task_is_dropped() {
        assert_eq!(selected_tasks(&[AnalyticTask::Filter]).len(), 17);
        assert_eq!(selected_tasks(&[AnalyticTask::Sort, AnalyticTask::Filter]), [AnalyticTask::Sort]);
    }

    #[test]
    fn request_validation() {
        let engine = Engine::shipped();
        let d = cars();
        let mut req = RecommendationRequest::new("x");
        req.max_charts = 0;
        assert!(matches!(recommend(&engine, &d, &req), Err(RequestError::Invalid(_))));
        req.max_charts = 3;
        req.scheme = SchemeChoice::Fixed(RankingScheme::Interest);
        assert!(matches!(recommend(&engine, &d, &req), Err(RequestError::Invalid(_))));
        req.columns = vec!["Nope".into()];
        assert!(matches!(recommend(&engine, &d, &req), Err(RequestError::Invalid(_))));
    }

    #[test]
    fn truncates_and_groups() {
        let engine = Engine::shipped();
        let d = cars();
        let mut req = RecommendationRequest::new("x");
        req.columns = vec!["Cylinders".into(), "Horsepower".into()];
        req.tasks = vec![AnalyticTask::Sort, AnalyticTask::Comparison];
        req.max_charts = 2;
        req.display_by_task = true;
        let resp = recommend(&engine, &d, &req).unwrap();
        assert_eq!(resp.charts.len(), 2);
        let groups = resp.grouped_by_task.as_ref().unwrap();
        assert_eq!(groups.len(), 2);
        assert!(groups.values().all(|g| g.len() <= 2));
        let m = Manifest::new("cars", &resp);
        assert_eq!(m.files(&resp).len(), 2 + groups.values().map(Vec::len).sum::<usize>());
    }
}
