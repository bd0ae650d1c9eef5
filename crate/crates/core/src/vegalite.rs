//! Vega-Lite documents for candidate specs.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::data::Dataset;
use crate::spec::{CandidateSpec, Channel, Encoding, SortOrder};
use crate::task::Mark;

pub const DEFAULT_MAP_URL: &str = "data/us-states-10m.json";
/// Feature collection and property holding region names in the map file.
pub const MAP_FEATURE: &str = "states";
pub const MAP_KEY: &str = "properties.name";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaVersion {
    V4,
    #[default]
    V5,
}

impl SchemaVersion {
    pub fn url(self) -> &'static str {
        match self {
            SchemaVersion::V4 => "https://vega.github.io/schema/vega-lite/v4.json",
            SchemaVersion::V5 => "https://vega.github.io/schema/vega-lite/v5.json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataRef {
    Url(String),
    Inline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitOptions {
    pub schema: SchemaVersion,
    /// Replaces the published schema URL, e.g. with a local copy.
    pub schema_url: Option<String>,
    pub data: DataRef,
    pub map_url: String,
}

impl Default for EmitOptions {
    fn default() -> Self {
        EmitOptions {
            schema: SchemaVersion::V5,
            schema_url: None,
            data: DataRef::Inline,
            map_url: DEFAULT_MAP_URL.to_string(),
        }
    }
}

/// Field names are paths in Vega-Lite; dots and brackets must be escaped.
fn escape_field(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for c in name.chars() {
        if matches!(c, '.' | '[' | ']' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn other_axis(channel: Channel) -> &'static str {
    match channel {
        Channel::Y => "x",
        _ => "y",
    }
}

fn field_def(e: &Encoding) -> Value {
    let mut m = Map::new();
    m.insert("type".into(), json!(e.ftype.as_str()));
    if let Some(a) = e.aggregate {
        m.insert("aggregate".into(), json!(a.as_str()));
    }
    if let Some(f) = &e.field {
        m.insert("field".into(), json!(escape_field(f)));
    }
    if e.bin {
        m.insert("bin".into(), json!(true));
    }
    if let Some(s) = e.sort {
        let by = other_axis(e.channel);
        let key = match s {
            SortOrder::Ascending => by.to_string(),
            SortOrder::Descending => format!("-{by}"),
        };
        m.insert("sort".into(), json!(key));
    }
    if let Some(s) = e.stack {
        m.insert("stack".into(), json!(s.as_str()));
    }
    if let Some(s) = e.scale {
        m.insert("scale".into(), json!({"type": s.as_str()}));
    }
    Value::Object(m)
}

fn encoding_block<'a>(encs: impl Iterator<Item = &'a Encoding>) -> Value {
    Value::Object(encs.map(|e| (e.channel.as_str().to_string(), field_def(e))).collect())
}

fn data_block(dataset: &Dataset, opts: &EmitOptions) -> Value {
    match &opts.data {
        DataRef::Url(url) => json!({"url": url}),
        DataRef::Inline => json!({"values": dataset.to_records()}),
    }
}

fn map_data(opts: &EmitOptions) -> Value {
    json!({"url": opts.map_url, "format": {"type": "topojson", "feature": MAP_FEATURE}})
}

fn geoshape_layers(spec: &CandidateSpec, opts: &EmitOptions) -> Vec<Value> {
    let background = json!({
        "data": map_data(opts),
        "mark": {"type": "geoshape", "fill": "lightgray", "stroke": "white"}
    });
    let region = spec
        .encoding(Channel::Shape)
        .and_then(|e| e.field.clone())
        .unwrap_or_default();
    let mut transform = Vec::new();
    let mut encoding = Map::new();
    encoding.insert("shape".into(), json!({"field": "geo", "type": "geojson"}));
    encoding.insert("tooltip".into(), json!({"field": escape_field(&region), "type": "nominal"}));
    if let Some(c) = spec.encoding(Channel::Color) {
        let op = c.aggregate.map_or("sum", |a| a.as_str());
        let measure = match &c.field {
            Some(f) => format!("{op}_{f}"),
            None => "count".to_string(),
        };
        let mut agg = Map::new();
        agg.insert("op".into(), json!(op));
        if let Some(f) = &c.field {
            agg.insert("field".into(), json!(escape_field(f)));
        }
        agg.insert("as".into(), json!(measure));
        transform.push(json!({"aggregate": [Value::Object(agg)], "groupby": [escape_field(&region)]}));
        let title = match &c.field {
            Some(f) => format!("{op}({f})"),
            None => "count".to_string(),
        };
        encoding.insert(
            "color".into(),
            json!({"field": escape_field(&measure), "type": "quantitative", "title": title}),
        );
    }
    transform.push(json!({
        "lookup": escape_field(&region),
        "from": {"data": map_data(opts), "key": MAP_KEY},
        "as": "geo"
    }));
    vec![
        background,
        json!({"transform": transform, "mark": "geoshape", "encoding": Value::Object(encoding)}),
    ]
}

fn overlay_layer(spec: &CandidateSpec, overlay: Mark, dataset: &Dataset) -> Value {
    match overlay {
        Mark::Text => {
            let encs = spec.encodings.iter().filter(|e| {
                matches!(
                    e.channel,
                    Channel::X | Channel::Y | Channel::Latitude | Channel::Longitude | Channel::Text
                )
            });
            json!({"mark": "text", "encoding": encoding_block(encs)})
        }
        Mark::Rule => {
            let mean = spec
                .encoding(Channel::Y)
                .and_then(|e| e.field.as_deref())
                .and_then(|f| dataset.field(f))
                .and_then(|f| f.stats.mean)
                .unwrap_or(0.0);
            json!({
                "mark": {"type": "rule", "color": "firebrick"},
                "encoding": {"y": {"datum": mean}}
            })
        }
        Mark::Line => {
            let encs = spec.encodings.iter().filter(|e| e.channel.is_axis());
            let mut layer = Map::new();
            if let (Some(trend), Some(x), Some(y)) = (
                spec.trend,
                spec.encoding(Channel::X).and_then(|e| e.field.as_deref()),
                spec.encoding(Channel::Y).and_then(|e| e.field.as_deref()),
            ) {
                layer.insert(
                    "transform".into(),
                    json!([{trend.as_str(): escape_field(y), "on": escape_field(x)}]),
                );
            }
            layer.insert("mark".into(), json!({"type": "line", "color": "firebrick"}));
            layer.insert("encoding".into(), encoding_block(encs));
            Value::Object(layer)
        }
        other => json!({"mark": other.as_str(), "encoding": encoding_block(spec.encodings.iter())}),
    }
}

/// A Vega-Lite document drawing `spec` over `dataset`.
pub fn to_vegalite(spec: &CandidateSpec, dataset: &Dataset, opts: &EmitOptions) -> Value {
    let mut doc = Map::new();
    let schema = opts.schema_url.as_deref().unwrap_or(opts.schema.url());
    doc.insert("$schema".into(), json!(schema));
    doc.insert("data".into(), data_block(dataset, opts));
    let mut encs: Vec<&Encoding> = spec.encodings.iter().collect();
    encs.sort();
    if spec.mark.base == Mark::Geoshape {
        doc.insert("projection".into(), json!({"type": "albersUsa"}));
        doc.insert("layer".into(), Value::Array(geoshape_layers(spec, opts)));
        return Value::Object(doc);
    }
    match spec.mark.overlay {
        None => {
            doc.insert("mark".into(), json!(spec.mark.base.as_str()));
            doc.insert("encoding".into(), encoding_block(encs.into_iter()));
        }
        Some(overlay) => {
            let base_encs = encs.iter().copied().filter(|e| e.channel != Channel::Text);
            let base = json!({"mark": spec.mark.base.as_str(), "encoding": encoding_block(base_encs)});
            doc.insert("layer".into(), json!([base, overlay_layer(spec, overlay, dataset)]));
        }
    }
    Value::Object(doc)
}
