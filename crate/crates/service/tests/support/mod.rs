#![allow(dead_code)]

use std::collections::BTreeSet;

use taskvis_core::data::{load_dataset, Dataset, FieldType, LoadOptions};
use taskvis_core::ground::ground_spec;
use taskvis_core::rules::{violates, RuleSet};
use taskvis_core::spec::{Aggregate, CandidateSpec, Channel, Encoding, Scale, SortOrder, Stack, Trend};
use taskvis_core::task::{aggregation_allowed, marks_for_task, AnalyticTask, MarkSpec};

pub const FIXTURES: [(&str, &[u8]); 7] = [
    ("cars.json", include_bytes!("../../../core/data/cars.json")),
    ("covid19.csv", include_bytes!("../../../core/data/covid19.csv")),
    ("hollywood.csv", include_bytes!("../../../core/data/hollywood.csv")),
    ("toy2.csv", include_bytes!("../../../core/data/toy2.csv")),
    ("toy3.csv", include_bytes!("../../../core/data/toy3.csv")),
    ("toy3q.csv", include_bytes!("../../../core/data/toy3q.csv")),
    ("geo3.csv", include_bytes!("../../../core/data/geo3.csv")),
];

pub fn load(name: &str) -> Dataset {
    let bytes = FIXTURES.iter().find(|f| f.0 == name).expect("known fixture").1;
    load_dataset(bytes, LoadOptions::default()).unwrap().with_id(name)
}

pub fn all_fixtures() -> Vec<Dataset> {
    FIXTURES.iter().map(|f| load(f.0)).collect()
}

pub fn small_fixtures() -> Vec<Dataset> {
    all_fixtures().into_iter().filter(|d| d.fields().len() <= 3).collect()
}

/// Every encoding of one column (or a count when `field` is None) on
/// `channel`, from the full attribute product filtered by well-formedness.
fn well_formed(channel: Channel, field: Option<(&str, FieldType)>, allow_aggregate: bool) -> Vec<Encoding> {
    let axis = matches!(channel, Channel::X | Channel::Y);
    let ftype = field.map_or(FieldType::Quantitative, |f| f.1);
    let aggs = [None, Some(Aggregate::Count), Some(Aggregate::Sum), Some(Aggregate::Mean)];
    let sorts = [None, Some(SortOrder::Ascending), Some(SortOrder::Descending)];
    let stacks = [None, Some(Stack::Zero), Some(Stack::Normalize)];
    let scales = [None, Some(Scale::Log)];
    let mut out = Vec::new();
    for aggregate in aggs {
        for bin in [false, true] {
            for sort in sorts {
                for stack in stacks {
                    for scale in scales {
                        let is_count = aggregate == Some(Aggregate::Count);
                        let raw = aggregate.is_none() && !bin;
                        let ok = is_count == field.is_none()
                            && (aggregate.is_none() || allow_aggregate)
                            && !(aggregate.is_some() && bin)
                            && (!bin || matches!(ftype, FieldType::Quantitative | FieldType::Temporal))
                            && (!matches!(aggregate, Some(Aggregate::Sum | Aggregate::Mean)) || ftype == FieldType::Quantitative)
                            && (sort.is_none() || (axis && raw && matches!(ftype, FieldType::Nominal | FieldType::Ordinal)))
                            && (stack.is_none() || (axis && matches!(aggregate, Some(Aggregate::Sum | Aggregate::Count))))
                            && (scale.is_none() || (axis && raw && ftype == FieldType::Quantitative));
                        if ok {
                            out.push(Encoding {
                                channel,
                                field: field.map(|f| f.0.to_string()),
                                ftype,
                                aggregate,
                                bin,
                                sort,
                                stack,
                                scale,
                            });
                        }
                    }
                }
            }
        }
    }
    out
}

fn channel_subsets(k: usize) -> Vec<Vec<Channel>> {
    let n = Channel::ALL.len();
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| Channel::ALL[i]).collect())
        .collect()
}

/// All encoding lists of size ≤ `max_k` over `columns`: one encoding per
/// channel, each column at most once, at most one count, at most two legends.
pub fn encoding_lists(dataset: &Dataset, columns: &[&str], max_k: usize, allow_aggregate: bool) -> Vec<Vec<Encoding>> {
    let items: Vec<Option<(&str, FieldType)>> = columns
        .iter()
        .map(|c| Some((*c, dataset.field(c).unwrap().ftype)))
        .chain(std::iter::once(None))
        .collect();
    let mut out = Vec::new();
    for k in 0..=max_k {
        for channels in channel_subsets(k) {
            let legends = channels.iter().filter(|c| matches!(c, Channel::Color | Channel::Size | Channel::Shape)).count();
            if legends > 2 {
                continue;
            }
            let per_channel: Vec<Vec<Encoding>> = channels
                .iter()
                .map(|&ch| items.iter().flat_map(|it| well_formed(ch, *it, allow_aggregate)).collect())
                .collect();
            let mut stack: Vec<Encoding> = Vec::new();
            product(&per_channel, 0, &mut stack, &mut out);
        }
    }
    out
}

fn product(per: &[Vec<Encoding>], i: usize, cur: &mut Vec<Encoding>, out: &mut Vec<Vec<Encoding>>) {
    if i == per.len() {
        let fields: Vec<&Option<String>> = cur.iter().map(|e| &e.field).collect();
        let distinct: BTreeSet<&Option<String>> = fields.iter().copied().collect();
        if distinct.len() == fields.len() {
            out.push(cur.clone());
        }
        return;
    }
    for e in &per[i] {
        cur.push(e.clone());
        product(per, i + 1, cur, out);
        cur.pop();
    }
}

/// Generate-then-filter: every well-formed spec for `task` whose grounding,
/// together with the rules' facts, violates no constraint.
pub fn brute_force(dataset: &Dataset, columns: &[&str], task: AnalyticTask, rules: &RuleSet, max_k: usize) -> BTreeSet<String> {
    let lists = encoding_lists(dataset, columns, max_k, aggregation_allowed(task));
    brute_force_from(dataset, &lists, task, rules)
}

pub fn brute_force_from(dataset: &Dataset, lists: &[Vec<Encoding>], task: AnalyticTask, rules: &RuleSet) -> BTreeSet<String> {
    let allow_aggregate = aggregation_allowed(task);
    let trends = [None, Some(Trend::Regression), Some(Trend::Loess)];
    let mut out = BTreeSet::new();
    for mark in MarkSpec::all() {
        if !marks_for_task(task).contains(&mark) {
            continue;
        }
        for trend in trends {
            if trend.is_some() && task != AnalyticTask::Trend {
                continue;
            }
            for encs in lists {
                if !allow_aggregate && encs.iter().any(|e| e.aggregate.is_some()) {
                    continue;
                }
                let spec = CandidateSpec {
                    task,
                    mark,
                    encodings: encs.clone(),
                    trend,
                    dataset_id: dataset.id.clone(),
                };
                let mut atoms = ground_spec(&spec, dataset);
                atoms.extend(rules.facts.iter().cloned());
                if rules.constraints.iter().all(|c| !violates(&atoms, c)) {
                    out.insert(taskvis_core::spec::canonicalize(&spec));
                }
            }
        }
    }
    out
}
