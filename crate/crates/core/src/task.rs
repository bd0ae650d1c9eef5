//! The analytic task base: 18 tasks with priority-ordered marks.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rank::RankingScheme;

const SHIPPED_TASKS: &str = include_str!("../assets/tasks.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticTask {
    ChangeOverTime,
    CharacterizeDistribution,
    Cluster,
    Comparison,
    ComputeDerivedValue,
    Correlate,
    DetermineRange,
    Deviation,
    ErrorRange,
    Filter,
    FindAnomalies,
    FindExtremum,
    Magnitude,
    PartToWhole,
    RetrieveValue,
    Sort,
    Spatial,
    Trend,
}

impl AnalyticTask {
    pub const ALL: [AnalyticTask; 18] = [
        AnalyticTask::ChangeOverTime,
        AnalyticTask::CharacterizeDistribution,
        AnalyticTask::Cluster,
        AnalyticTask::Comparison,
        AnalyticTask::ComputeDerivedValue,
        AnalyticTask::Correlate,
        AnalyticTask::DetermineRange,
        AnalyticTask::Deviation,
        AnalyticTask::ErrorRange,
        AnalyticTask::Filter,
        AnalyticTask::FindAnomalies,
        AnalyticTask::FindExtremum,
        AnalyticTask::Magnitude,
        AnalyticTask::PartToWhole,
        AnalyticTask::RetrieveValue,
        AnalyticTask::Sort,
        AnalyticTask::Spatial,
        AnalyticTask::Trend,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnalyticTask::ChangeOverTime => "change_over_time",
            AnalyticTask::CharacterizeDistribution => "characterize_distribution",
            AnalyticTask::Cluster => "cluster",
            AnalyticTask::Comparison => "comparison",
            AnalyticTask::ComputeDerivedValue => "compute_derived_value",
            AnalyticTask::Correlate => "correlate",
            AnalyticTask::DetermineRange => "determine_range",
            AnalyticTask::Deviation => "deviation",
            AnalyticTask::ErrorRange => "error_range",
            AnalyticTask::Filter => "filter",
            AnalyticTask::FindAnomalies => "find_anomalies",
            AnalyticTask::FindExtremum => "find_extremum",
            AnalyticTask::Magnitude => "magnitude",
            AnalyticTask::PartToWhole => "part_to_whole",
            AnalyticTask::RetrieveValue => "retrieve_value",
            AnalyticTask::Sort => "sort",
            AnalyticTask::Spatial => "spatial",
            AnalyticTask::Trend => "trend",
        }
    }

    /// Every task except `filter`, which runs during preprocessing.
    pub fn enumerable() -> impl Iterator<Item = AnalyticTask> {
        Self::ALL.into_iter().filter(|t| *t != AnalyticTask::Filter)
    }

    pub fn vocabulary() -> String {
        Self::ALL.map(|t| t.as_str()).join(", ")
    }
}

impl fmt::Display for AnalyticTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnalyticTask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown task `{s}`; expected one of: {}", Self::vocabulary()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mark {
    Arc,
    Area,
    Bar,
    Boxplot,
    Circle,
    Errorband,
    Errorbar,
    Geoshape,
    Line,
    Point,
    Rect,
    Rule,
    Text,
    Tick,
}

impl Mark {
    pub const ALL: [Mark; 14] = [
        Mark::Arc,
        Mark::Area,
        Mark::Bar,
        Mark::Boxplot,
        Mark::Circle,
        Mark::Errorband,
        Mark::Errorbar,
        Mark::Geoshape,
        Mark::Line,
        Mark::Point,
        Mark::Rect,
        Mark::Rule,
        Mark::Text,
        Mark::Tick,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mark::Arc => "arc",
            Mark::Area => "area",
            Mark::Bar => "bar",
            Mark::Boxplot => "boxplot",
            Mark::Circle => "circle",
            Mark::Errorband => "errorband",
            Mark::Errorbar => "errorbar",
            Mark::Geoshape => "geoshape",
            Mark::Line => "line",
            Mark::Point => "point",
            Mark::Rect => "rect",
            Mark::Rule => "rule",
            Mark::Text => "text",
            Mark::Tick => "tick",
        }
    }
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown mark `{s}`"))
    }
}

/// A base mark, optionally with a second mark layered on top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MarkSpec {
    pub base: Mark,
    pub overlay: Option<Mark>,
}

impl MarkSpec {
    /// Layered combinations the task base can produce.
    pub const LAYERED: [(Mark, Mark); 5] = [
        (Mark::Rect, Mark::Text),
        (Mark::Bar, Mark::Rule),
        (Mark::Point, Mark::Rule),
        (Mark::Circle, Mark::Text),
        (Mark::Point, Mark::Line),
    ];

    pub const fn plain(base: Mark) -> MarkSpec {
        MarkSpec {
            base,
            overlay: None,
        }
    }

    /// Fails unless the pair is one of [`MarkSpec::LAYERED`].
    pub fn layered(base: Mark, overlay: Mark) -> Result<MarkSpec, String> {
        if Self::LAYERED.contains(&(base, overlay)) {
            Ok(MarkSpec {
                base,
                overlay: Some(overlay),
            })
        } else {
            Err(format!("`{base}({overlay})` is not a supported layered mark"))
        }
    }

    /// All constructible mark specs: the 14 plain marks plus the layered ones.
    pub fn all() -> Vec<MarkSpec> {
        let mut out: Vec<MarkSpec> = Mark::ALL.into_iter().map(MarkSpec::plain).collect();
        out.extend(Self::LAYERED.iter().map(|&(b, o)| MarkSpec {
            base: b,
            overlay: Some(o),
        }));
        out
    }
}

impl fmt::Display for MarkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.overlay {
            Some(o) => write!(f, "{}({})", self.base, o),
            None => write!(f, "{}", self.base),
        }
    }
}

impl FromStr for MarkSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.split_once('(') {
            Some((base, rest)) => {
                let overlay = rest
                    .strip_suffix(')')
                    .ok_or_else(|| format!("unterminated layered mark `{s}`"))?;
                MarkSpec::layered(base.trim().parse()?, overlay.trim().parse()?)
            }
            None => Ok(MarkSpec::plain(s.parse()?)),
        }
    }
}

impl Serialize for MarkSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MarkSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    #[serde(rename = "id")]
    pub task: AnalyticTask,
    pub name: String,
    pub description: String,
    pub marks: Vec<MarkSpec>,
    pub default_scheme: RankingScheme,
    pub aggregation_allowed: bool,
}

#[derive(Debug, Error)]
pub enum TaskBaseError {
    #[error("task table: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("task table: unsupported version {0}")]
    Version(u32),
    #[error("task table: task `{0}` listed more than once")]
    Duplicate(AnalyticTask),
    #[error("task table: task `{0}` missing")]
    Missing(AnalyticTask),
    #[error("task table: task `{0}` has no marks")]
    NoMarks(AnalyticTask),
}

#[derive(Deserialize)]
struct TaskTable {
    version: u32,
    task: Vec<TaskDescriptor>,
}

/// Parse a task table. Every task must appear exactly once; output follows
/// the file order.
pub fn parse_task_table(text: &str) -> Result<Vec<TaskDescriptor>, TaskBaseError> {
    let table: TaskTable = toml::from_str(text)?;
    if table.version != 1 {
        return Err(TaskBaseError::Version(table.version));
    }
    let mut seen = std::collections::HashSet::new();
    for d in &table.task {
        if !seen.insert(d.task) {
            return Err(TaskBaseError::Duplicate(d.task));
        }
        if d.marks.is_empty() {
            return Err(TaskBaseError::NoMarks(d.task));
        }
    }
    if let Some(missing) = AnalyticTask::ALL.into_iter().find(|t| !seen.contains(t)) {
        return Err(TaskBaseError::Missing(missing));
    }
    Ok(table.task)
}

/// The shipped task base, in table order.
pub fn list_tasks() -> &'static [TaskDescriptor] {
    static TASKS: OnceLock<Vec<TaskDescriptor>> = OnceLock::new();
    TASKS.get_or_init(|| parse_task_table(SHIPPED_TASKS).expect("shipped task table is valid"))
}

pub fn descriptor(task: AnalyticTask) -> &'static TaskDescriptor {
    list_tasks()
        .iter()
        .find(|d| d.task == task)
        .expect("every task has a descriptor")
}

pub fn marks_for_task(task: AnalyticTask) -> &'static [MarkSpec] {
    &descriptor(task).marks
}

/// 1-based position of `mark` in the task's list.
pub fn mark_priority(task: AnalyticTask, mark: &MarkSpec) -> Option<usize> {
    marks_for_task(task)
        .iter()
        .position(|m| m == mark)
        .map(|i| i + 1)
}

pub fn aggregation_allowed(task: AnalyticTask) -> bool {
    descriptor(task).aggregation_allowed
}
