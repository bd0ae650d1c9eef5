//! Candidate chart specifications.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FieldType};
use crate::task::{AnalyticTask, MarkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    X,
    Y,
    Color,
    Size,
    Shape,
    Theta,
    Latitude,
    Longitude,
    Text,
}

impl Channel {
    /// Search and id-assignment order.
    pub const ALL: [Channel; 9] = [
        Channel::X,
        Channel::Y,
        Channel::Color,
        Channel::Size,
        Channel::Shape,
        Channel::Theta,
        Channel::Latitude,
        Channel::Longitude,
        Channel::Text,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::X => "x",
            Channel::Y => "y",
            Channel::Color => "color",
            Channel::Size => "size",
            Channel::Shape => "shape",
            Channel::Theta => "theta",
            Channel::Latitude => "latitude",
            Channel::Longitude => "longitude",
            Channel::Text => "text",
        }
    }

    pub fn is_axis(self) -> bool {
        matches!(self, Channel::X | Channel::Y)
    }

    pub fn is_legend(self) -> bool {
        matches!(self, Channel::Color | Channel::Size | Channel::Shape)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown channel `{s}`"))
    }
}

macro_rules! token_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!(concat!("unknown ", stringify!($name), " `{}`"), s)),
                }
            }
        }
    };
}

token_enum!(Aggregate { Count => "count", Sum => "sum", Mean => "mean" });
token_enum!(SortOrder { Ascending => "ascending", Descending => "descending" });
token_enum!(Stack { Zero => "zero", Normalize => "normalize" });
token_enum!(Scale { Linear => "linear", Log => "log" });
token_enum!(Trend { Regression => "regression", Loess => "loess" });

/// One channel binding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Encoding {
    pub channel: Channel,
    /// Absent only for a count aggregate.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub field: Option<String>,
    #[serde(rename = "type")]
    pub ftype: FieldType,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub aggregate: Option<Aggregate>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub bin: bool,
    /// Sort by the other axis.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sort: Option<SortOrder>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stack: Option<Stack>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scale: Option<Scale>,
}

impl Encoding {
    pub fn field(channel: Channel, field: impl Into<String>, ftype: FieldType) -> Encoding {
        Encoding {
            channel,
            field: Some(field.into()),
            ftype,
            aggregate: None,
            bin: false,
            sort: None,
            stack: None,
            scale: None,
        }
    }

    pub fn count(channel: Channel) -> Encoding {
        Encoding {
            channel,
            field: None,
            ftype: FieldType::Quantitative,
            aggregate: Some(Aggregate::Count),
            bin: false,
            sort: None,
            stack: None,
            scale: None,
        }
    }

    pub fn aggregate(mut self, a: Aggregate) -> Encoding {
        self.aggregate = Some(a);
        self
    }

    pub fn binned(mut self) -> Encoding {
        self.bin = true;
        self
    }

    pub fn sorted(mut self, order: SortOrder) -> Encoding {
        self.sort = Some(order);
        self
    }

    pub fn stacked(mut self, s: Stack) -> Encoding {
        self.stack = Some(s);
        self
    }

    pub fn scaled(mut self, s: Scale) -> Encoding {
        self.scale = Some(s);
        self
    }

    pub fn is_count(&self) -> bool {
        self.aggregate == Some(Aggregate::Count)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CandidateSpec {
    pub task: AnalyticTask,
    pub mark: MarkSpec,
    pub encodings: Vec<Encoding>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trend: Option<Trend>,
    pub dataset_id: String,
}

#[derive(Serialize)]
struct CanonicalView<'a> {
    mark: &'a MarkSpec,
    trend: Option<Trend>,
    encoding: Vec<&'a Encoding>,
}

impl CandidateSpec {
    pub fn new(
        task: AnalyticTask,
        mark: MarkSpec,
        mut encodings: Vec<Encoding>,
        trend: Option<Trend>,
        dataset_id: impl Into<String>,
    ) -> CandidateSpec {
        encodings.sort();
        CandidateSpec {
            task,
            mark,
            encodings,
            trend,
            dataset_id: dataset_id.into(),
        }
    }

    /// Encodings in channel order, paired with their ids `e1`, `e2`, ...
    pub fn identified(&self) -> Vec<(String, &Encoding)> {
        let mut encs: Vec<&Encoding> = self.encodings.iter().collect();
        encs.sort();
        encs.into_iter()
            .enumerate()
            .map(|(i, e)| (format!("e{}", i + 1), e))
            .collect()
    }

    pub fn encoding(&self, channel: Channel) -> Option<&Encoding> {
        self.encodings.iter().find(|e| e.channel == channel)
    }

    pub fn channels(&self) -> BTreeSet<Channel> {
        self.encodings.iter().map(|e| e.channel).collect()
    }

    pub fn has_aggregate(&self) -> bool {
        self.encodings.iter().any(|e| e.aggregate.is_some())
    }

    pub fn with_task(&self, task: AnalyticTask) -> CandidateSpec {
        CandidateSpec {
            task,
            ..self.clone()
        }
    }

    /// The same chart with the x and y bindings exchanged.
    pub fn swap_axes(&self) -> CandidateSpec {
        let encodings = self
            .encodings
            .iter()
            .cloned()
            .map(|mut e| {
                e.channel = match e.channel {
                    Channel::X => Channel::Y,
                    Channel::Y => Channel::X,
                    c => c,
                };
                e
            })
            .collect();
        CandidateSpec::new(self.task, self.mark, encodings, self.trend, self.dataset_id.clone())
    }

    /// Structural invariants independent of the rule base.
    pub fn validate(&self, dataset: &Dataset) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for e in &self.encodings {
            if !seen.insert(e.channel) {
                return Err(format!("channel `{}` bound twice", e.channel));
            }
        }
        let legends = self.encodings.iter().filter(|e| e.channel.is_legend()).count();
        if legends > 2 {
            return Err("more than two legend channels".into());
        }
        if crate::task::mark_priority(self.task, &self.mark).is_none() {
            return Err(format!("mark `{}` is not listed for task `{}`", self.mark, self.task));
        }
        if !crate::task::aggregation_allowed(self.task) && self.has_aggregate() {
            return Err(format!("task `{}` does not allow aggregation", self.task));
        }
        if self.trend.is_some() != (self.task == AnalyticTask::Trend) {
            return Err("trend transform is set exactly for the trend task".into());
        }
        let mut fields = BTreeSet::new();
        for e in &self.encodings {
            match (&e.field, e.is_count()) {
                (None, false) => return Err(format!("encoding on `{}` has no field", e.channel)),
                (Some(f), true) => return Err(format!("count encoding names field `{f}`")),
                (Some(f), false) => {
                    let field = dataset.field(f).ok_or_else(|| format!("unknown field `{f}`"))?;
                    if field.ftype != e.ftype {
                        return Err(format!("field `{f}` encoded as {} but typed {}", e.ftype, field.ftype));
                    }
                    if !fields.insert(f.as_str()) {
                        return Err(format!("field `{f}` encoded twice"));
                    }
                }
                (None, true) => {}
            }
            if e.bin && !matches!(e.ftype, FieldType::Quantitative | FieldType::Temporal) {
                return Err("bin applies to quantitative or temporal data".into());
            }
            if e.bin && e.aggregate.is_some() {
                return Err("bin and aggregate on one encoding".into());
            }
        }
        if self.encodings.iter().filter(|e| e.is_count()).count() > 1 {
            return Err("more than one count encoding".into());
        }
        Ok(())
    }
}

/// Deterministic identity of the chart. The task and dataset are excluded.
pub fn canonicalize(spec: &CandidateSpec) -> String {
    let mut encoding: Vec<&Encoding> = spec.encodings.iter().collect();
    encoding.sort();
    serde_json::to_string(&CanonicalView {
        mark: &spec.mark,
        trend: spec.trend,
        encoding,
    })
    .expect("spec serializes")
}

/// Columns referenced by any encoding.
pub fn spec_fields(spec: &CandidateSpec) -> BTreeSet<String> {
    spec.encodings.iter().filter_map(|e| e.field.clone()).collect()
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::task::Mark;

    /// The bar chart of cylinders by summed horsepower, coloured by origin.
    pub fn golden(dataset_id: &str) -> CandidateSpec {
        CandidateSpec::new(
            AnalyticTask::Sort,
            MarkSpec::plain(Mark::Bar),
            vec![
                Encoding::field(Channel::X, "Cylinders", FieldType::Ordinal).sorted(SortOrder::Ascending),
                Encoding::field(Channel::Y, "Horsepower", FieldType::Quantitative)
                    .aggregate(Aggregate::Sum)
                    .stacked(Stack::Zero),
                Encoding::field(Channel::Color, "Origin", FieldType::Nominal),
            ],
            None,
            dataset_id,
        )
    }
}
