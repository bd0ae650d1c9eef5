//! Translating a candidate chart into ground atoms.

use std::collections::HashMap;

use crate::data::{Dataset, Field};
use crate::rules::{AtomSet, Const, GroundAtom};
use crate::spec::{CandidateSpec, Encoding, Trend};
use crate::task::{AnalyticTask, MarkSpec};

/// Upper bounds (inclusive) of the `low` and `medium` cardinality buckets.
pub const LOW_CARDINALITY: usize = 10;
pub const MEDIUM_CARDINALITY: usize = 50;

pub fn cardinality_bucket(cardinality: usize) -> &'static str {
    if cardinality <= LOW_CARDINALITY {
        "low"
    } else if cardinality <= MEDIUM_CARDINALITY {
        "medium"
    } else {
        "high"
    }
}

fn tokenize(name: &str) -> String {
    let mut t: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if !t.starts_with(|c: char| c.is_ascii_lowercase()) {
        t.insert_str(0, "f_");
    }
    t
}

/// Column name ⇄ rule constant.
#[derive(Debug, Clone, Default)]
pub struct FieldTokens {
    to_token: HashMap<String, String>,
    to_name: HashMap<String, String>,
}

impl FieldTokens {
    pub fn new(dataset: &Dataset) -> FieldTokens {
        let mut tokens = FieldTokens::default();
        for name in dataset.field_names() {
            let base = tokenize(name);
            let mut token = base.clone();
            let mut n = 2;
            while tokens.to_name.contains_key(&token) {
                token = format!("{base}_{n}");
                n += 1;
            }
            tokens.to_token.insert(name.to_string(), token.clone());
            tokens.to_name.insert(token, name.to_string());
        }
        tokens
    }

    pub fn token(&self, name: &str) -> Option<&str> {
        self.to_token.get(name).map(String::as_str)
    }

    pub fn name(&self, token: &str) -> Option<&str> {
        self.to_name.get(token).map(String::as_str)
    }
}

fn atom(predicate: &str, args: &[&str]) -> GroundAtom {
    GroundAtom::syms(predicate, args)
}

/// Atoms fixed before any encoding is chosen.
pub fn context_atoms(task: AnalyticTask, mark: MarkSpec, trend: Option<Trend>) -> Vec<GroundAtom> {
    let mut out = vec![atom("task", &[task.as_str()]), atom("mark", &[mark.base.as_str()])];
    if let Some(o) = mark.overlay {
        out.push(atom("overlay", &[o.as_str()]));
    }
    if let Some(t) = trend {
        out.push(atom("trend", &[t.as_str()]));
    }
    out
}

/// Atoms describing one encoding with id `id`, excluding column facts.
pub fn encoding_atoms(id: &str, e: &Encoding, tokens: &FieldTokens) -> Vec<GroundAtom> {
    let mut out = vec![
        atom("channel", &[id, e.channel.as_str()]),
        atom("type", &[id, e.ftype.as_str()]),
        atom("has_channel", &[e.channel.as_str()]),
        atom("has_type", &[e.ftype.as_str()]),
    ];
    if let Some(f) = &e.field {
        let token = tokens.token(f).expect("field belongs to the dataset");
        out.push(atom("field", &[id, token]));
    }
    if let Some(a) = e.aggregate {
        out.push(atom("aggregate", &[id, a.as_str()]));
        out.push(atom("has_transform", &["aggregate"]));
    }
    if e.bin {
        out.push(atom("bin", &[id]));
        out.push(atom("has_transform", &["bin"]));
    }
    if let Some(s) = e.sort {
        out.push(atom("sort_enc", &[id]));
        out.push(atom("sort_order", &[id, s.as_str()]));
        out.push(atom("has_transform", &["sort"]));
    }
    if let Some(s) = e.stack {
        out.push(atom("stack", &[id, s.as_str()]));
        out.push(atom("has_transform", &["stack"]));
    }
    if let Some(s) = e.scale {
        out.push(atom("scale", &[id, s.as_str()]));
        out.push(atom("has_transform", &["scale"]));
    }
    out
}

/// Column facts for a field used by some encoding.
pub fn field_atoms(field: &Field, tokens: &FieldTokens) -> Vec<GroundAtom> {
    let token = tokens.token(&field.name).expect("field belongs to the dataset");
    let mut out = vec![atom("cardinality", &[token, cardinality_bucket(field.stats.cardinality)])];
    if let Some(role) = field.geo_role {
        out.push(atom("geo_role", &[token, role.as_str()]));
    }
    out
}

pub fn num_encodings_atom(n: usize) -> GroundAtom {
    GroundAtom::new("num_encodings", vec![Const::Int(n as i64)])
}

/// Ground a candidate together with its task and the facts of the columns
/// it uses.
pub fn ground_spec(spec: &CandidateSpec, dataset: &Dataset) -> AtomSet {
    ground_with(spec, dataset, &FieldTokens::new(dataset))
}

pub fn ground_with(spec: &CandidateSpec, dataset: &Dataset, tokens: &FieldTokens) -> AtomSet {
    let mut atoms: AtomSet = context_atoms(spec.task, spec.mark, spec.trend).into_iter().collect();
    atoms.insert(num_encodings_atom(spec.encodings.len()));
    for (id, e) in spec.identified() {
        atoms.extend(encoding_atoms(&id, e, tokens));
        if let Some(field) = e.field.as_deref().and_then(|f| dataset.field(f)) {
            atoms.extend(field_atoms(field, tokens));
        }
    }
    atoms
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_dataset, LoadOptions};
    use crate::spec::fixtures::golden;
    use crate::task::Mark;

    fn cars() -> Dataset {
        load_dataset(include_bytes!("../data/cars.json"), LoadOptions::default()).unwrap()
    }

    #[test]
    fn golden_atoms() {
        let d = cars();
        let atoms = ground_spec(&golden(&d.id), &d);
        for expected in [
            "mark(bar)",
            "task(sort)",
            "channel(e1, x)",
            "type(e1, ordinal)",
            "aggregate(e2, sum)",
            "stack(e2, zero)",
            "channel(e3, color)",
            "type(e3, nominal)",
            "field(e1, cylinders)",
            "sort_enc(e1)",
        ] {
            assert!(atoms.iter().any(|a| a.to_string() == expected), "missing {expected}");
        }
    }

    #[test]
    fn empty_spec_atoms() {
        let d = cars();
        let spec = CandidateSpec::new(AnalyticTask::Sort, MarkSpec::plain(Mark::Bar), vec![], None, &d.id);
        let atoms: Vec<String> = ground_spec(&spec, &d).iter().map(|a| a.to_string()).collect();
        assert_eq!(atoms, ["mark(bar)", "num_encodings(0)", "task(sort)"]);
    }

    #[test]
    fn tokens_are_unique_and_reversible() {
        let d = Dataset::from_raw(
            "t",
            vec!["Miles per Gallon".into(), "miles_per_gallon".into(), "1st".into()],
            vec![vec![Some("1".into()), Some("2".into()), Some("x".into())]],
        )
        .unwrap();
        let t = FieldTokens::new(&d);
        assert_eq!(t.token("Miles per Gallon"), Some("miles_per_gallon"));
        assert_eq!(t.token("miles_per_gallon"), Some("miles_per_gallon_2"));
        assert_eq!(t.token("1st"), Some("f_1st"));
        for name in d.field_names() {
            assert_eq!(t.name(t.token(name).unwrap()), Some(name));
        }
    }

    #[test]
    fn buckets() {
        assert_eq!(cardinality_bucket(10), "low");
        assert_eq!(cardinality_bucket(11), "medium");
        assert_eq!(cardinality_bucket(50), "medium");
        assert_eq!(cardinality_bucket(51), "high");
    }
}
