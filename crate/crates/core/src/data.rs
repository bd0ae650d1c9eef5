//! Tabular datasets: ingestion, field typing, statistics and row filters.
//!
//! Cells are kept as their raw text. Typed values are derived on demand from
//! the owning field's [`FieldType`], so retyping a field never loses data and
//! retyping it back restores an identical dataset.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Share of non-null cells that must parse for a temporal or numeric reading.
const PARSE_SHARE: f64 = 0.95;
/// Integer columns with this many distinct values may be ordinal.
const ORDINAL_DISTINCT: std::ops::RangeInclusive<usize> = 3..=12;
/// ... and with a span (max - min) no larger than this.
const ORDINAL_MAX_SPAN: f64 = 50.0;
/// Bare four-digit years are only read as dates inside this range.
const YEAR_ONLY_RANGE: std::ops::RangeInclusive<i32> = 1800..=2100;

pub const DEFAULT_MAX_ROWS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("empty dataset")]
    Empty,
    #[error("row {row}: expected {expected} cells, found {found}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("dataset has more than {limit} rows")]
    TooManyRows { limit: usize },
    #[error("duplicate column name `{0}`")]
    DuplicateField(String),
    #[error("column `{0}` has no non-null values")]
    AllNull(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("field `{field}`: cell {row} (`{cell}`) is not representable as {target}")]
    Unrepresentable {
        field: String,
        row: usize,
        cell: String,
        target: FieldType,
    },
    #[error("field `{field}`: geo role {role} requires a {required} field")]
    GeoRoleMismatch {
        field: String,
        role: GeoRole,
        required: &'static str,
    },
    #[error("invalid filter on `{field}`: {message}")]
    InvalidFilter { field: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldType {
    Quantitative,
    Nominal,
    Ordinal,
    Temporal,
}

impl FieldType {
    pub const ALL: [FieldType; 4] = [
        FieldType::Quantitative,
        FieldType::Nominal,
        FieldType::Ordinal,
        FieldType::Temporal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FieldType::Quantitative => "quantitative",
            FieldType::Nominal => "nominal",
            FieldType::Ordinal => "ordinal",
            FieldType::Temporal => "temporal",
        }
    }

    /// Nominal and ordinal fields are discrete; the rest are continuous.
    pub fn is_discrete(self) -> bool {
        matches!(self, FieldType::Nominal | FieldType::Ordinal)
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FieldType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FieldType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown field type `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeoRole {
    Latitude,
    Longitude,
    Region,
}

impl GeoRole {
    pub fn as_str(self) -> &'static str {
        match self {
            GeoRole::Latitude => "latitude",
            GeoRole::Longitude => "longitude",
            GeoRole::Region => "region",
        }
    }

    /// The only field type this role may be attached to.
    pub fn required_type(self) -> FieldType {
        match self {
            GeoRole::Latitude | GeoRole::Longitude => FieldType::Quantitative,
            GeoRole::Region => FieldType::Nominal,
        }
    }

    /// Guess a role from a column name.
    pub fn detect(name: &str) -> Option<GeoRole> {
        match name.trim().to_ascii_lowercase().as_str() {
            "lat" | "latitude" => Some(GeoRole::Latitude),
            "lon" | "lng" | "long" | "longitude" => Some(GeoRole::Longitude),
            "state" | "country" | "region" => Some(GeoRole::Region),
            _ => None,
        }
    }
}

impl fmt::Display for GeoRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GeoRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "latitude" => Ok(GeoRole::Latitude),
            "longitude" => Ok(GeoRole::Longitude),
            "region" => Ok(GeoRole::Region),
            _ => Err(format!("unknown geo role `{s}`")),
        }
    }
}

/// A typed cell value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Number(f64),
    Text(String),
    Time(NaiveDateTime),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Null => serde_json::Value::Null,
            Value::Number(n) => serde_json::Number::from_f64(*n)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Value::Text(s) => serde_json::Value::String(s.clone()),
            Value::Time(t) => serde_json::Value::String(format_time(t)),
        }
    }

    fn distinct_key(&self) -> Option<String> {
        match self {
            Value::Null => None,
            Value::Number(n) => Some(format!("n{}", n.to_bits())),
            Value::Text(s) => Some(format!("s{s}")),
            Value::Time(t) => Some(format!("t{}", t.and_utc().timestamp_millis())),
        }
    }

    fn partial_cmp_same_kind(&self, other: &Value) -> Option<std::cmp::Ordering> {
        match (self, other) {
            (Value::Number(a), Value::Number(b)) => a.partial_cmp(b),
            (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
            (Value::Time(a), Value::Time(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Number(n) => write!(f, "{n}"),
            Value::Text(s) => f.write_str(s),
            Value::Time(t) => f.write_str(&format_time(t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub cardinality: usize,
    pub null_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    /// Arithmetic mean, quantitative fields only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    #[serde(rename = "type")]
    pub ftype: FieldType,
    pub inferred: bool,
    pub stats: FieldStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geo_role: Option<GeoRole>,
}

/// An immutable table. Cloning is cheap: rows are shared.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub id: String,
    fields: Vec<Field>,
    rows: Arc<Vec<Vec<Option<String>>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub format: Option<SourceFormat>,
    pub max_rows: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            format: None,
            max_rows: DEFAULT_MAX_ROWS,
        }
    }
}

fn is_null_marker(raw: &str) -> bool {
    let t = raw.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("null")
}

fn normalize_cell(raw: &str) -> Option<String> {
    if is_null_marker(raw) {
        None
    } else {
        Some(raw.to_string())
    }
}

/// Read comma-delimited text (header row required) or a JSON array of flat
/// records. The format is sniffed from the first non-blank byte unless given.
pub fn load_dataset(source: &[u8], opts: LoadOptions) -> Result<Dataset, DataError> {
    let format = opts.format.unwrap_or_else(|| sniff_format(source));
    let (names, rows) = match format {
        SourceFormat::Csv => read_csv(source, opts.max_rows)?,
        SourceFormat::Json => read_records(source, opts.max_rows)?,
    };
    if names.is_empty() || rows.is_empty() {
        return Err(DataError::Empty);
    }
    Dataset::from_raw("dataset", names, rows)
}

fn sniff_format(source: &[u8]) -> SourceFormat {
    match source.iter().find(|b| !b.is_ascii_whitespace()) {
        Some(b'[') => SourceFormat::Json,
        _ => SourceFormat::Csv,
    }
}

type RawTable = (Vec<String>, Vec<Vec<Option<String>>>);

fn read_csv(source: &[u8], max_rows: usize) -> Result<RawTable, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers = reader.byte_headers().map_err(|e| DataError::Malformed {
        row: 0,
        message: e.to_string(),
    })?;
    let names = headers
        .iter()
        .map(|h| {
            std::str::from_utf8(h)
                .map(|s| s.trim().to_string())
                .map_err(|_| DataError::Malformed {
                    row: 0,
                    message: "header is not valid UTF-8".into(),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if names.iter().all(|n| n.is_empty()) {
        return Err(DataError::Empty);
    }
    let mut rows = Vec::new();
    for (i, record) in reader.byte_records().enumerate() {
        // 1-based data row number, header excluded.
        let row = i + 1;
        let record = record.map_err(|e| DataError::Malformed {
            row,
            message: e.to_string(),
        })?;
        if record.len() != names.len() {
            return Err(DataError::RowArity {
                row,
                expected: names.len(),
                found: record.len(),
            });
        }
        if rows.len() == max_rows {
            return Err(DataError::TooManyRows { limit: max_rows });
        }
        let cells = record
            .iter()
            .map(|c| {
                std::str::from_utf8(c)
                    .map(normalize_cell)
                    .map_err(|_| DataError::Malformed {
                        row,
                        message: "cell is not valid UTF-8".into(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(cells);
    }
    Ok((names, rows))
}

fn read_records(source: &[u8], max_rows: usize) -> Result<RawTable, DataError> {
    let records: Vec<serde_json::Value> =
        serde_json::from_slice(source).map_err(|e| DataError::Malformed {
            row: e.line(),
            message: e.to_string(),
        })?;
    if records.len() > max_rows {
        return Err(DataError::TooManyRows { limit: max_rows });
    }
    let mut names: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in records.iter().enumerate() {
        let obj = rec.as_object().ok_or_else(|| DataError::Malformed {
            row: i + 1,
            message: "record is not an object".into(),
        })?;
        for key in obj.keys() {
            if seen.insert(key.clone()) {
                names.push(key.clone());
            }
        }
    }
    let mut rows = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        let obj = rec.as_object().expect("checked above");
        let mut cells = Vec::with_capacity(names.len());
        for name in &names {
            let cell = match obj.get(name) {
                None | Some(serde_json::Value::Null) => None,
                Some(serde_json::Value::String(s)) => normalize_cell(s),
                Some(serde_json::Value::Number(n)) => Some(n.to_string()),
                Some(serde_json::Value::Bool(b)) => Some(b.to_string()),
                Some(_) => {
                    return Err(DataError::Malformed {
                        row: i + 1,
                        message: format!("field `{name}` is not a flat value"),
                    })
                }
            };
            cells.push(cell);
        }
        rows.push(cells);
    }
    Ok((names, rows))
}

/// Classify a column from its raw cells. Null markers are ignored.
///
/// Temporal wins if at least 95% of the remaining cells parse as an ISO-8601
/// date, datetime or a bare year; numeric if 95% parse as numbers, where
/// small-range integer columns (3 to 12 distinct values spanning at most 50)
/// are read as ordinal; anything else is nominal.
pub fn infer_field_type<S: AsRef<str>>(values: &[S]) -> Result<FieldType, DataError> {
    let cells: Vec<&str> = values
        .iter()
        .map(|v| v.as_ref())
        .filter(|v| !is_null_marker(v))
        .collect();
    if cells.is_empty() {
        return Err(DataError::AllNull(String::new()));
    }
    let need = (cells.len() as f64 * PARSE_SHARE).ceil() as usize;

    let temporal = cells.iter().filter(|c| parse_time(c).is_some()).count();
    if temporal >= need {
        return Ok(FieldType::Temporal);
    }

    let numbers: Vec<f64> = cells.iter().filter_map(|c| parse_number(c)).collect();
    if numbers.len() >= need {
        let all_int = numbers.iter().all(|n| n.fract() == 0.0);
        if all_int {
            let distinct: HashSet<u64> = numbers.iter().map(|n| n.to_bits()).collect();
            let (lo, hi) = min_max(&numbers).expect("non-empty");
            if ORDINAL_DISTINCT.contains(&distinct.len()) && hi - lo <= ORDINAL_MAX_SPAN {
                return Ok(FieldType::Ordinal);
            }
        }
        return Ok(FieldType::Quantitative);
    }
    Ok(FieldType::Nominal)
}

fn min_max(values: &[f64]) -> Option<(f64, f64)> {
    values.iter().fold(None, |acc, &v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

pub fn parse_number(raw: &str) -> Option<f64> {
    let t = raw.trim();
    // Rust accepts "inf"/"nan"; data files mean text by those.
    if t.is_empty() || t.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
        return None;
    }
    t.parse::<f64>().ok().filter(|n| n.is_finite())
}

pub fn parse_time(raw: &str) -> Option<NaiveDateTime> {
    let t = raw.trim();
    if t.len() == 4 && t.bytes().all(|b| b.is_ascii_digit()) {
        let year: i32 = t.parse().ok()?;
        return YEAR_ONLY_RANGE
            .contains(&year)
            .then(|| NaiveDate::from_ymd_opt(year, 1, 1))
            .flatten()
            .map(|d| d.and_time(NaiveTime::MIN));
    }
    if let Ok(d) = NaiveDate::parse_from_str(t, "%Y-%m-%d") {
        return Some(d.and_time(NaiveTime::MIN));
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(t) {
        return Some(dt.naive_utc());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(t, fmt) {
            return Some(dt);
        }
    }
    None
}

fn format_time(t: &NaiveDateTime) -> String {
    if t.time() == NaiveTime::MIN {
        t.date().format("%Y-%m-%d").to_string()
    } else {
        t.format("%Y-%m-%dT%H:%M:%S%.f").to_string()
    }
}

/// Interpret one raw cell under a field type. Unparseable cells read as null.
pub fn typed_value(raw: Option<&str>, ftype: FieldType) -> Value {
    let Some(raw) = raw else {
        return Value::Null;
    };
    match ftype {
        FieldType::Quantitative => parse_number(raw).map_or(Value::Null, Value::Number),
        FieldType::Temporal => parse_time(raw).map_or(Value::Null, Value::Time),
        FieldType::Ordinal => parse_number(raw)
            .map(Value::Number)
            .unwrap_or_else(|| Value::Text(raw.to_string())),
        FieldType::Nominal => Value::Text(raw.to_string()),
    }
}

fn compute_stats<'a>(cells: impl Iterator<Item = Option<&'a str>>, ftype: FieldType) -> FieldStats {
    let mut distinct = HashSet::new();
    let mut null_count = 0;
    let mut numeric = Vec::new();
    for raw in cells {
        let v = typed_value(raw, ftype);
        match v.distinct_key() {
            None => null_count += 1,
            Some(k) => {
                distinct.insert(k);
            }
        }
        match (&v, ftype) {
            (Value::Number(n), FieldType::Quantitative) => numeric.push(*n),
            (Value::Time(t), FieldType::Temporal) => {
                numeric.push(t.and_utc().timestamp_millis() as f64)
            }
            _ => {}
        }
    }
    let range = min_max(&numeric);
    let mean = (ftype == FieldType::Quantitative && !numeric.is_empty())
        .then(|| numeric.iter().sum::<f64>() / numeric.len() as f64);
    FieldStats {
        cardinality: distinct.len(),
        null_count,
        min: range.map(|r| r.0),
        max: range.map(|r| r.1),
        mean,
    }
}

impl Dataset {
    /// Build a dataset from raw cells, inferring every field type.
    pub fn from_raw(
        id: impl Into<String>,
        names: Vec<String>,
        rows: Vec<Vec<Option<String>>>,
    ) -> Result<Dataset, DataError> {
        if rows.is_empty() {
            return Err(DataError::Empty);
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateField(name.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(DataError::RowArity {
                    row: i + 1,
                    expected: names.len(),
                    found: row.len(),
                });
            }
        }
        let mut fields = Vec::with_capacity(names.len());
        for (col, name) in names.into_iter().enumerate() {
            let cells: Vec<&str> = rows.iter().filter_map(|r| r[col].as_deref()).collect();
            let ftype = infer_field_type(&cells).map_err(|_| DataError::AllNull(name.clone()))?;
            let stats = compute_stats(rows.iter().map(|r| r[col].as_deref()), ftype);
            let geo_role = GeoRole::detect(&name).filter(|r| r.required_type() == ftype);
            fields.push(Field {
                name,
                ftype,
                inferred: true,
                stats,
                geo_role,
            });
        }
        Ok(Dataset {
            id: id.into(),
            fields,
            rows: Arc::new(rows),
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Dataset {
        self.id = id.into();
        self
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn field_names(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|f| f.name.as_str())
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn raw_rows(&self) -> &[Vec<Option<String>>] {
        &self.rows
    }

    pub fn raw(&self, row: usize, col: usize) -> Option<&str> {
        self.rows[row][col].as_deref()
    }

    pub fn value(&self, row: usize, col: usize) -> Value {
        typed_value(self.raw(row, col), self.fields[col].ftype)
    }

    /// Rows as JSON records, for inlining into chart documents.
    pub fn to_records(&self) -> Vec<serde_json::Value> {
        (0..self.row_count())
            .map(|r| {
                let obj = self
                    .fields
                    .iter()
                    .enumerate()
                    .map(|(c, f)| (f.name.clone(), self.value(r, c).to_json()))
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect()
    }

    /// Retype one field. The result keeps every cell; statistics are
    /// recomputed and the field is marked as user-typed.
    pub fn override_field_type(&self, name: &str, ftype: FieldType) -> Result<Dataset, DataError> {
        let col = self
            .field_index(name)
            .ok_or_else(|| DataError::UnknownField(name.to_string()))?;
        if self.fields[col].ftype == ftype {
            return Ok(self.clone());
        }
        for (row, cells) in self.rows.iter().enumerate() {
            let Some(raw) = cells[col].as_deref() else {
                continue;
            };
            let ok = match ftype {
                FieldType::Quantitative => parse_number(raw).is_some(),
                FieldType::Temporal => parse_time(raw).is_some(),
                FieldType::Ordinal | FieldType::Nominal => true,
            };
            if !ok {
                return Err(DataError::Unrepresentable {
                    field: name.to_string(),
                    row: row + 1,
                    cell: raw.to_string(),
                    target: ftype,
                });
            }
        }
        let mut out = self.clone();
        let field = &mut out.fields[col];
        field.ftype = ftype;
        field.inferred = false;
        field.stats = compute_stats(self.rows.iter().map(|r| r[col].as_deref()), ftype);
        if field.geo_role.is_some_and(|r| r.required_type() != ftype) {
            field.geo_role = None;
        }
        Ok(out)
    }

    pub fn set_geo_role(&self, name: &str, role: Option<GeoRole>) -> Result<Dataset, DataError> {
        let col = self
            .field_index(name)
            .ok_or_else(|| DataError::UnknownField(name.to_string()))?;
        if let Some(role) = role {
            if self.fields[col].ftype != role.required_type() {
                return Err(DataError::GeoRoleMismatch {
                    field: name.to_string(),
                    role,
                    required: role.required_type().as_str(),
                });
            }
        }
        let mut out = self.clone();
        out.fields[col].geo_role = role;
        Ok(out)
    }

    /// Keep the rows satisfying every predicate.
    pub fn apply_filters(&self, predicates: &[FilterPredicate]) -> Result<Dataset, DataError> {
        if predicates.is_empty() {
            return Ok(self.clone());
        }
        let mut bound = Vec::with_capacity(predicates.len());
        for p in predicates {
            p.validate(self)?;
            bound.push((self.field_index(&p.field).expect("validated"), p));
        }
        let rows: Vec<Vec<Option<String>>> = (0..self.row_count())
            .filter(|&r| bound.iter().all(|(col, p)| p.matches(&self.value(r, *col))))
            .map(|r| self.rows[r].clone())
            .collect();
        let mut out = self.clone();
        for (col, field) in out.fields.iter_mut().enumerate() {
            field.stats = compute_stats(rows.iter().map(|r| r[col].as_deref()), field.ftype);
        }
        out.rows = Arc::new(rows);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterOp {
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    In,
    Between,
}

impl FilterOp {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterOp::Eq => "eq",
            FilterOp::Neq => "neq",
            FilterOp::Lt => "lt",
            FilterOp::Le => "le",
            FilterOp::Gt => "gt",
            FilterOp::Ge => "ge",
            FilterOp::In => "in",
            FilterOp::Between => "between",
        }
    }

    fn arity_ok(self, n: usize) -> bool {
        match self {
            FilterOp::Between => n == 2,
            FilterOp::In => n >= 1,
            _ => n == 1,
        }
    }
}

impl FromStr for FilterOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use FilterOp::*;
        [Eq, Neq, Lt, Le, Gt, Ge, In, Between]
            .into_iter()
            .find(|op| op.as_str() == s)
            .ok_or_else(|| format!("unknown filter operator `{s}`"))
    }
}

/// A row predicate. Null cells never match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterPredicate {
    pub field: String,
    pub op: FilterOp,
    /// Operands as JSON scalars; they are read under the field's type.
    pub operands: Vec<serde_json::Value>,
}

impl FilterPredicate {
    pub fn new(field: impl Into<String>, op: FilterOp, operands: Vec<serde_json::Value>) -> Self {
        FilterPredicate {
            field: field.into(),
            op,
            operands,
        }
    }

    /// Parse `"field op value[,value...]"`. The field name may contain spaces;
    /// the operator is the second-to-last whitespace-separated token group.
    pub fn parse(text: &str) -> Result<FilterPredicate, String> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let op_pos = tokens
            .iter()
            .rposition(|t| t.parse::<FilterOp>().is_ok())
            .filter(|&p| p > 0 && p + 1 < tokens.len())
            .ok_or_else(|| format!("expected `field op value`, got `{text}`"))?;
        let field = tokens[..op_pos].join(" ");
        let op: FilterOp = tokens[op_pos].parse()?;
        let rest = tokens[op_pos + 1..].join(" ");
        let operands = rest
            .split(',')
            .map(|s| serde_json::Value::String(s.trim().to_string()))
            .collect();
        Ok(FilterPredicate::new(field, op, operands))
    }

    fn operand_values(&self, ftype: FieldType) -> Result<Vec<Value>, String> {
        self.operands
            .iter()
            .map(|o| {
                let raw = match o {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Number(n) => n.to_string(),
                    serde_json::Value::Bool(b) => b.to_string(),
                    other => return Err(format!("operand {other} is not a scalar")),
                };
                match typed_value(Some(&raw), ftype) {
                    Value::Null => Err(format!("operand `{raw}` is not a valid {ftype} value")),
                    v => Ok(v),
                }
            })
            .collect()
    }

    pub fn validate(&self, dataset: &Dataset) -> Result<(), DataError> {
        let err = |message: String| DataError::InvalidFilter {
            field: self.field.clone(),
            message,
        };
        let field = dataset
            .field(&self.field)
            .ok_or_else(|| DataError::UnknownField(self.field.clone()))?;
        if !self.op.arity_ok(self.operands.len()) {
            return Err(err(format!(
                "operator {} does not take {} operand(s)",
                self.op.as_str(),
                self.operands.len()
            )));
        }
        self.operand_values(field.ftype).map(|_| ()).map_err(err)
    }

    /// Evaluate against a cell already typed under the field's type.
    /// Panics if the predicate was not validated against that field.
    pub fn matches(&self, cell: &Value) -> bool {
        use std::cmp::Ordering::*;
        if cell.is_null() {
            return false;
        }
        let ftype = match cell {
            Value::Number(_) => FieldType::Quantitative,
            Value::Time(_) => FieldType::Temporal,
            _ => FieldType::Nominal,
        };
        let ops = match self.operand_values(ftype) {
            Ok(ops) => ops,
            Err(_) => return false,
        };
        let cmp = |o: &Value| cell.partial_cmp_same_kind(o);
        match self.op {
            FilterOp::Eq => cmp(&ops[0]) == Some(Equal),
            FilterOp::Neq => matches!(cmp(&ops[0]), Some(Less | Greater)),
            FilterOp::Lt => cmp(&ops[0]) == Some(Less),
            FilterOp::Le => matches!(cmp(&ops[0]), Some(Less | Equal)),
            FilterOp::Gt => cmp(&ops[0]) == Some(Greater),
            FilterOp::Ge => matches!(cmp(&ops[0]), Some(Greater | Equal)),
            FilterOp::In => ops.iter().any(|o| cmp(o) == Some(Equal)),
            FilterOp::Between => {
                matches!(cmp(&ops[0]), Some(Greater | Equal))
                    && matches!(cmp(&ops[1]), Some(Less | Equal))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str) -> Result<Dataset, DataError> {
        load_dataset(text.as_bytes(), LoadOptions::default())
    }

    #[test]
    fn single_numeric_column() {
        let ds = csv("a\n1\n2\n").unwrap();
        assert_eq!(ds.row_count(), 2);
        assert_eq!(ds.fields()[0].ftype, FieldType::Quantitative);
    }

    #[test]
    fn header_only_is_empty() {
        assert_eq!(csv("a,b\n").unwrap_err(), DataError::Empty);
        assert_eq!(csv("").unwrap_err(), DataError::Empty);
    }

    #[test]
    fn arity_error_names_row() {
        let err = csv("a,b\n1,2\n3\n").unwrap_err();
        assert_eq!(
            err,
            DataError::RowArity {
                row: 2,
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn bad_utf8_names_row() {
        let mut bytes = b"a\nx\n".to_vec();
        bytes.extend_from_slice(&[0xff, 0xfe, b'\n']);
        match load_dataset(&bytes, LoadOptions::default()) {
            Err(DataError::Malformed { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn row_limit() {
        let opts = LoadOptions {
            max_rows: 2,
            ..Default::default()
        };
        let err = load_dataset(b"a\n1\n2\n3\n", opts).unwrap_err();
        assert_eq!(err, DataError::TooManyRows { limit: 2 });
    }

    #[test]
    fn inference_examples() {
        assert_eq!(infer_field_type(&["USA", "Europe", "Japan"]).unwrap(), FieldType::Nominal);
        assert_eq!(infer_field_type(&["3", "4", "6", "8"]).unwrap(), FieldType::Ordinal);
        assert_eq!(infer_field_type(&["1.5", "2.25", "-3"]).unwrap(), FieldType::Quantitative);
        assert_eq!(
            infer_field_type(&["2020-01-22", "2020-01-23"]).unwrap(),
            FieldType::Temporal
        );
        assert_eq!(infer_field_type(&["2007", "2009"]).unwrap(), FieldType::Temporal);
        assert_eq!(infer_field_type(&["3504", "1613"]).unwrap(), FieldType::Quantitative);
        assert!(infer_field_type(&["", "NA", "null"]).is_err());
    }

    #[test]
    fn inference_tolerates_a_few_strays() {
        let mut cells: Vec<String> = (0..40).map(|i| format!("{}.5", i)).collect();
        cells.push("n/a".into());
        assert_eq!(infer_field_type(&cells).unwrap(), FieldType::Quantitative);
        let mut cells: Vec<String> = (0..10).map(|i| format!("{}.5", i)).collect();
        cells.push("oops".into());
        assert_eq!(infer_field_type(&cells).unwrap(), FieldType::Nominal);
    }

    #[test]
    fn wide_integers_are_quantitative() {
        let cells: Vec<String> = (0..13).map(|i| i.to_string()).collect();
        assert_eq!(infer_field_type(&cells).unwrap(), FieldType::Quantitative);
        assert_eq!(infer_field_type(&["0", "100"]).unwrap(), FieldType::Quantitative);
    }

    #[test]
    fn nulls_are_excluded_from_stats() {
        let ds = csv("a,b\n1.5,x\n,y\nNA,x\n2.5,NULL\n").unwrap();
        let a = &ds.fields()[0].stats;
        assert_eq!(a.cardinality, 2);
        assert_eq!(a.null_count, 2);
        assert_eq!(a.min, Some(1.5));
        assert_eq!(a.max, Some(2.5));
        assert_eq!(a.mean, Some(2.0));
        let b = &ds.fields()[1].stats;
        assert_eq!((b.cardinality, b.null_count), (2, 1));
        assert_eq!(b.min, None);
    }

    #[test]
    fn records_input() {
        let ds = load_dataset(
            br#"[{"a": 1.5, "b": "x"}, {"a": 2.5, "b": null}, {"b": "z", "c": true}]"#,
            LoadOptions::default(),
        )
        .unwrap();
        assert_eq!(ds.field_names().collect::<Vec<_>>(), ["a", "b", "c"]);
        assert_eq!(ds.value(2, 0), Value::Null);
        let err = load_dataset(br#"[{"a": [1]}]"#, LoadOptions::default()).unwrap_err();
        assert!(matches!(err, DataError::Malformed { row: 1, .. }));
        assert_eq!(load_dataset(b"[]", LoadOptions::default()).unwrap_err(), DataError::Empty);
    }

    #[test]
    fn override_types() {
        let ds = csv("origin,cyl\nUSA,4\nJapan,6\nUSA,8\n").unwrap();
        let same = ds.override_field_type("cyl", FieldType::Ordinal).unwrap();
        assert_eq!(same, ds);
        let q = ds.override_field_type("cyl", FieldType::Quantitative).unwrap();
        assert!(!q.field("cyl").unwrap().inferred);
        assert_eq!(q.field("cyl").unwrap().stats.cardinality, 3);
        let back = q.override_field_type("cyl", FieldType::Ordinal).unwrap();
        assert_eq!(back.field("cyl").unwrap().stats, ds.field("cyl").unwrap().stats);
        match ds.override_field_type("origin", FieldType::Quantitative) {
            Err(DataError::Unrepresentable { row, cell, .. }) => {
                assert_eq!((row, cell.as_str()), (1, "USA"))
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            ds.override_field_type("nope", FieldType::Nominal),
            Err(DataError::UnknownField(_))
        ));
    }

    #[test]
    fn geo_roles() {
        let ds = csv("state,lat,lng,v\nOhio,40.1,-82.5,3.5\nIowa,41.9,-93.1,4.5\n").unwrap();
        assert_eq!(ds.field("state").unwrap().geo_role, Some(GeoRole::Region));
        assert_eq!(ds.field("lat").unwrap().geo_role, Some(GeoRole::Latitude));
        assert_eq!(ds.field("lng").unwrap().geo_role, Some(GeoRole::Longitude));
        assert!(ds.set_geo_role("state", Some(GeoRole::Latitude)).is_err());
        let cleared = ds.set_geo_role("lat", None).unwrap();
        assert_eq!(cleared.field("lat").unwrap().geo_role, None);
        let retyped = ds.override_field_type("state", FieldType::Ordinal).unwrap();
        assert_eq!(retyped.field("state").unwrap().geo_role, None);
    }

    #[test]
    fn filters() {
        let ds = csv("name,score,day\na,1.5,2020-01-01\nb,7.5,2020-01-05\nc,,2020-01-09\nd,3.25,2020-01-02\n")
            .unwrap();
        let gt = FilterPredicate::new("score", FilterOp::Gt, vec![serde_json::json!(2)]);
        assert_eq!(ds.apply_filters(&[gt.clone()]).unwrap().row_count(), 2);
        let between = FilterPredicate::parse("day between 2020-01-02,2020-01-09").unwrap();
        let out = ds.apply_filters(&[between, gt]).unwrap();
        assert_eq!(out.row_count(), 2);
        assert_eq!(out.field("name").unwrap().stats.cardinality, 2);
        let isin = FilterPredicate::parse("name in a, c").unwrap();
        assert_eq!(ds.apply_filters(&[isin]).unwrap().row_count(), 2);
        assert_eq!(ds.apply_filters(&[]).unwrap(), ds);
        let neq = FilterPredicate::parse("score neq 1.5").unwrap();
        // The null score never matches.
        assert_eq!(ds.apply_filters(&[neq]).unwrap().row_count(), 2);
    }

    #[test]
    fn invalid_filters() {
        let ds = csv("name,score\na,1.5\nb,2.5\n").unwrap();
        let bad_arity = FilterPredicate::new("score", FilterOp::Between, vec![serde_json::json!(1)]);
        assert!(matches!(ds.apply_filters(&[bad_arity]), Err(DataError::InvalidFilter { .. })));
        let bad_type = FilterPredicate::parse("score gt high").unwrap();
        assert!(matches!(ds.apply_filters(&[bad_type]), Err(DataError::InvalidFilter { .. })));
        let unknown = FilterPredicate::parse("nope eq 1").unwrap();
        assert!(matches!(ds.apply_filters(&[unknown]), Err(DataError::UnknownField(_))));
        assert!(FilterPredicate::parse("score 1").is_err());
    }
}
