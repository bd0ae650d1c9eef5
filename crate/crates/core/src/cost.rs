//! Component cost model.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::{Aggregate, CandidateSpec, Channel, Encoding, Scale, SortOrder, Stack, Trend};
use crate::task::{mark_priority, AnalyticTask, MarkSpec};

const SHIPPED_COSTS: &str = include_str!("../assets/costs.toml");

/// Environment variable naming a cost file that replaces the shipped one.
pub const COST_FILE_ENV: &str = "TASKVIS_COST_FILE";

#[derive(Debug, Error)]
pub enum CostError {
    #[error("cost table: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("reading cost table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cost table: `{0}` must be a positive finite number")]
    NotPositive(String),
    #[error("cost table: channel costs must rise strictly along x = y, color, size, shape, text")]
    ChannelOrder,
    #[error("cost table: min_pts must be at least 1 and eps non-negative")]
    Cluster,
    #[error("no cost for component `{0}`")]
    Missing(ComponentKey),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Mark,
    Channel,
    Transform,
}

/// A priced chart component, e.g. `channel:x`, `transform:aggregate_sum` or
/// `mark:bar@sort`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ComponentKey {
    pub kind: ComponentKind,
    pub name: String,
}

impl ComponentKey {
    pub fn channel(c: Channel) -> ComponentKey {
        ComponentKey {
            kind: ComponentKind::Channel,
            name: c.as_str().to_string(),
        }
    }

    pub fn transform(token: &str) -> ComponentKey {
        ComponentKey {
            kind: ComponentKind::Transform,
            name: token.to_string(),
        }
    }

    pub fn mark(mark: MarkSpec, task: AnalyticTask) -> ComponentKey {
        ComponentKey {
            kind: ComponentKind::Mark,
            name: format!("{mark}@{task}"),
        }
    }
}

impl fmt::Display for ComponentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ComponentKind::Mark => "mark",
            ComponentKind::Channel => "channel",
            ComponentKind::Transform => "transform",
        };
        write!(f, "{kind}:{}", self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkCosts {
    pub rank_step: Option<f64>,
    pub overlay: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelCosts {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub color: Option<f64>,
    pub size: Option<f64>,
    pub shape: Option<f64>,
    pub text: Option<f64>,
    pub theta: Option<f64>,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
}

impl ChannelCosts {
    pub fn get(&self, c: Channel) -> Option<f64> {
        match c {
            Channel::X => self.x,
            Channel::Y => self.y,
            Channel::Color => self.color,
            Channel::Size => self.size,
            Channel::Shape => self.shape,
            Channel::Text => self.text,
            Channel::Theta => self.theta,
            Channel::Latitude => self.latitude,
            Channel::Longitude => self.longitude,
        }
    }

    fn entries_mut(&mut self) -> [(&'static str, &mut Option<f64>); 9] {
        [
            ("channels.x", &mut self.x),
            ("channels.y", &mut self.y),
            ("channels.color", &mut self.color),
            ("channels.size", &mut self.size),
            ("channels.shape", &mut self.shape),
            ("channels.text", &mut self.text),
            ("channels.theta", &mut self.theta),
            ("channels.latitude", &mut self.latitude),
            ("channels.longitude", &mut self.longitude),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformCosts {
    pub sort: Option<f64>,
    pub bin: Option<f64>,
    pub stack_zero: Option<f64>,
    pub stack_normalize: Option<f64>,
    pub aggregate_count: Option<f64>,
    pub aggregate_sum: Option<f64>,
    pub aggregate_mean: Option<f64>,
    pub scale_log: Option<f64>,
    pub scale_linear: Option<f64>,
    pub regression: Option<f64>,
    pub loess: Option<f64>,
}

impl TransformCosts {
    pub fn get(&self, token: &str) -> Option<f64> {
        match token {
            "sort" => self.sort,
            "bin" => self.bin,
            "stack_zero" => self.stack_zero,
            "stack_normalize" => self.stack_normalize,
            "aggregate_count" => self.aggregate_count,
            "aggregate_sum" => self.aggregate_sum,
            "aggregate_mean" => self.aggregate_mean,
            "scale_log" => self.scale_log,
            "scale_linear" => self.scale_linear,
            "regression" => self.regression,
            "loess" => self.loess,
            _ => None,
        }
    }

    fn entries_mut(&mut self) -> [(&'static str, &mut Option<f64>); 11] {
        [
            ("transforms.sort", &mut self.sort),
            ("transforms.bin", &mut self.bin),
            ("transforms.stack_zero", &mut self.stack_zero),
            ("transforms.stack_normalize", &mut self.stack_normalize),
            ("transforms.aggregate_count", &mut self.aggregate_count),
            ("transforms.aggregate_sum", &mut self.aggregate_sum),
            ("transforms.aggregate_mean", &mut self.aggregate_mean),
            ("transforms.scale_log", &mut self.scale_log),
            ("transforms.scale_linear", &mut self.scale_linear),
            ("transforms.regression", &mut self.regression),
            ("transforms.loess", &mut self.loess),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceCosts {
    pub swap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterParams {
    pub eps: f64,
    pub min_pts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostTable {
    #[serde(default)]
    pub marks: MarkCosts,
    #[serde(default)]
    pub channels: ChannelCosts,
    #[serde(default)]
    pub transforms: TransformCosts,
    pub distance: DistanceCosts,
    pub cluster: ClusterParams,
}

/// Transform tokens an encoding carries.
pub fn transform_tokens(e: &Encoding) -> Vec<&'static str> {
    let mut out = Vec::new();
    match e.aggregate {
        Some(Aggregate::Count) => out.push("aggregate_count"),
        Some(Aggregate::Sum) => out.push("aggregate_sum"),
        Some(Aggregate::Mean) => out.push("aggregate_mean"),
        None => {}
    }
    if e.bin {
        out.push("bin");
    }
    if e.sort.is_some() {
        out.push("sort");
    }
    match e.stack {
        Some(Stack::Zero) => out.push("stack_zero"),
        Some(Stack::Normalize) => out.push("stack_normalize"),
        None => {}
    }
    match e.scale {
        Some(Scale::Log) => out.push("scale_log"),
        Some(Scale::Linear) => out.push("scale_linear"),
        None => {}
    }
    out
}

pub fn trend_token(t: Trend) -> &'static str {
    t.as_str()
}

pub fn sort_token(s: SortOrder) -> &'static str {
    match s {
        SortOrder::Ascending => "sort_ascending",
        SortOrder::Descending => "sort_descending",
    }
}

/// The component multiset of `spec` under `task`.
pub fn components(spec: &CandidateSpec, task: AnalyticTask) -> Vec<ComponentKey> {
    let mut out = vec![ComponentKey::mark(spec.mark, task)];
    for e in &spec.encodings {
        out.push(ComponentKey::channel(e.channel));
        out.extend(transform_tokens(e).into_iter().map(ComponentKey::transform));
    }
    if let Some(t) = spec.trend {
        out.push(ComponentKey::transform(trend_token(t)));
    }
    out
}

impl CostTable {
    /// The shipped default table.
    pub fn shipped() -> &'static CostTable {
        static TABLE: OnceLock<CostTable> = OnceLock::new();
        TABLE.get_or_init(|| CostTable::from_toml(SHIPPED_COSTS).expect("shipped cost table is valid"))
    }

    pub fn from_toml(text: &str) -> Result<CostTable, CostError> {
        let table: CostTable = toml::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn from_file(path: &Path) -> Result<CostTable, CostError> {
        let text = std::fs::read_to_string(path).map_err(|source| CostError::Io {
            path: path.display().to_string(),
            source,
        })?;
        CostTable::from_toml(&text)
    }

    /// The file named by [`COST_FILE_ENV`], or the shipped table.
    pub fn from_env() -> Result<CostTable, CostError> {
        match std::env::var_os(COST_FILE_ENV) {
            Some(p) => CostTable::from_file(Path::new(&p)),
            None => Ok(*CostTable::shipped()),
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let mut copy = *self;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CostError::NotPositive(name.to_string()))
            }
        };
        for (name, v) in copy
            .channels
            .entries_mut()
            .into_iter()
            .chain(copy.transforms.entries_mut())
            .chain([
                ("marks.rank_step", &mut copy.marks.rank_step),
                ("marks.overlay", &mut copy.marks.overlay),
            ])
        {
            if let Some(v) = *v {
                positive(name, v)?;
            }
        }
        positive("distance.swap", self.distance.swap)?;
        if !(self.cluster.eps.is_finite() && self.cluster.eps >= 0.0) || self.cluster.min_pts == 0 {
            return Err(CostError::Cluster);
        }
        let c = &self.channels;
        let tiers = [c.x, c.color, c.size, c.shape, c.text];
        if c.x != c.y {
            return Err(CostError::ChannelOrder);
        }
        let present: Vec<f64> = tiers.into_iter().flatten().collect();
        if present.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CostError::ChannelOrder);
        }
        Ok(())
    }

    /// Every entry multiplied by `factor`, including the distance and
    /// clustering radius.
    pub fn scaled(&self, factor: f64) -> CostTable {
        let mut t = *self;
        for (_, v) in t.channels.entries_mut().into_iter().chain(t.transforms.entries_mut()) {
            *v = v.map(|x| x * factor);
        }
        t.marks.rank_step = t.marks.rank_step.map(|x| x * factor);
        t.marks.overlay = t.marks.overlay.map(|x| x * factor);
        t.distance.swap *= factor;
        t.cluster.eps *= factor;
        t
    }

    pub fn mark_cost(&self, task: AnalyticTask, mark: MarkSpec) -> Result<f64, CostError> {
        let missing = || CostError::Missing(ComponentKey::mark(mark, task));
        let rank = mark_priority(task, &mark).ok_or_else(missing)?;
        let step = self.marks.rank_step.ok_or_else(missing)?;
        let mut cost = rank as f64 * step;
        if mark.overlay.is_some() {
            cost += self.marks.overlay.ok_or_else(missing)?;
        }
        Ok(cost)
    }

    pub fn component_cost(&self, key: &ComponentKey, task: AnalyticTask) -> Result<f64, CostError> {
        let missing = || CostError::Missing(key.clone());
        match key.kind {
            ComponentKind::Mark => {
                let mark: MarkSpec = key
                    .name
                    .split('@')
                    .next()
                    .and_then(|m| m.parse().ok())
                    .ok_or_else(missing)?;
                self.mark_cost(task, mark)
            }
            ComponentKind::Channel => {
                let c: Channel = key.name.parse().map_err(|_| missing())?;
                self.channels.get(c).ok_or_else(missing)
            }
            ComponentKind::Transform => {
                let token = match key.name.as_str() {
                    "sort_ascending" | "sort_descending" => "sort",
                    other => other,
                };
                self.transforms.get(token).ok_or_else(missing)
            }
        }
    }
}

/// Mark cost plus channel and transform costs.
pub fn cost_score(spec: &CandidateSpec, task: AnalyticTask, table: &CostTable) -> Result<f64, CostError> {
    components(spec, task)
        .iter()
        .map(|k| table.component_cost(k, task))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FieldType;
    use crate::spec::fixtures::golden;

    #[test]
    fn golden_cost_is_hand_sum() {
        let t = CostTable::shipped();
        let g = golden("d");
        let by_hand = 1.0 + (1.0 + 1.0 + 2.0) + (1.0 + 2.0 + 1.0);
        assert_eq!(cost_score(&g, AnalyticTask::Sort, t).unwrap(), by_hand);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = SHIPPED_COSTS.replace("[channels]", "[channels]\nrow = 1.0");
        assert!(matches!(CostTable::from_toml(&text), Err(CostError::Parse(_))));
    }

    #[test]
    fn tier_order_is_enforced() {
        let text = SHIPPED_COSTS.replace("size = 3.0", "size = 5.0");
        assert!(matches!(CostTable::from_toml(&text), Err(CostError::ChannelOrder)));
        let text = SHIPPED_COSTS.replace("bin = 1.0", "bin = 0.0");
        assert!(matches!(CostTable::from_toml(&text), Err(CostError::NotPositive(_))));
    }

    #[test]
    fn missing_component_is_named() {
        let text = SHIPPED_COSTS.replace("aggregate_sum = 2.0\n", "");
        let t = CostTable::from_toml(&text).unwrap();
        let err = cost_score(&golden("d"), AnalyticTask::Sort, &t).unwrap_err();
        assert_eq!(err.to_string(), "no cost for component `transform:aggregate_sum`");
    }

    #[test]
    fn size_adds_cost() {
        let t = CostTable::shipped();
        let mut s = golden("d");
        let before = cost_score(&s, AnalyticTask::Sort, t).unwrap();
        s.encodings.push(Encoding::field(Channel::Size, "Weight", FieldType::Quantitative));
        assert!(cost_score(&s, AnalyticTask::Sort, t).unwrap() > before);
    }
}
