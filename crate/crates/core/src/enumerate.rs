//! Depth-first search over marks, channel bindings and transforms.
//!
//! Candidates are grown one channel at a time in [`Channel::ALL`] order.
//! After every step the partial candidate is tested against the rules: if a
//! constraint is violated and every negated atom in the witness can no
//! longer appear further down the search, the whole subtree is cut.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, FieldType};
use crate::ground::{context_atoms, encoding_atoms, field_atoms, num_encodings_atom, FieldTokens};
use crate::rules::{check_arities, AtomSet, CompiledAtoms, CompiledRules, EvalError, GroundAtom, RuleSet, Sym};
use crate::spec::{canonicalize, Aggregate, CandidateSpec, Channel, Encoding, Scale, SortOrder, Stack, Trend};
use crate::task::{aggregation_allowed, mark_priority, marks_for_task, AnalyticTask, MarkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnumerationLimits {
    pub max_encodings: usize,
    pub max_candidates: usize,
    #[serde(with = "millis")]
    pub timeout: Duration,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits {
            max_encodings: 4,
            max_candidates: 500,
            timeout: Duration::from_secs(5),
        }
    }
}

impl EnumerationLimits {
    pub fn validate(&self) -> Result<(), EnumerateError> {
        if self.max_encodings == 0 || self.max_candidates == 0 || self.timeout.is_zero() {
            return Err(EnumerateError::InvalidLimits);
        }
        if self.max_encodings > Channel::ALL.len() {
            return Err(EnumerateError::InvalidLimits);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub specs: Vec<CandidateSpec>,
    /// True when a limit cut the search short.
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerateError {
    #[error("the filter task is applied while preprocessing and cannot be enumerated")]
    FilterTask,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("enumeration limits must be positive and allow at most nine encodings")]
    InvalidLimits,
    #[error(transparent)]
    Rules(#[from] EvalError),
}

/// What an encoding binds: a column (by index into the dataset) or a count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Item {
    Field(usize),
    Count,
}

/// Transform variants an encoding of `ftype` (or a count) may take on
/// `channel`. This is the syntactic design space; the rules prune it.
pub fn encoding_options(
    channel: Channel,
    item: Item,
    name: Option<&str>,
    ftype: FieldType,
    allow_aggregate: bool,
) -> Vec<Encoding> {
    let axis = channel.is_axis();
    let mut out = Vec::new();
    match item {
        Item::Count => {
            if allow_aggregate {
                out.push(Encoding::count(channel));
                if axis {
                    for s in Stack::ALL {
                        out.push(Encoding::count(channel).stacked(*s));
                    }
                }
            }
        }
        Item::Field(_) => {
            let base = Encoding::field(channel, name.expect("field item has a name"), ftype);
            match ftype {
                FieldType::Quantitative => {
                    out.push(base.clone());
                    if axis {
                        out.push(base.clone().scaled(Scale::Log));
                    }
                    out.push(base.clone().binned());
                    if allow_aggregate {
                        out.push(base.clone().aggregate(Aggregate::Sum));
                        if axis {
                            for s in Stack::ALL {
                                out.push(base.clone().aggregate(Aggregate::Sum).stacked(*s));
                            }
                        }
                        out.push(base.aggregate(Aggregate::Mean));
                    }
                }
                FieldType::Temporal => {
                    out.push(base.clone());
                    out.push(base.binned());
                }
                FieldType::Nominal | FieldType::Ordinal => {
                    out.push(base.clone());
                    if axis {
                        for s in SortOrder::ALL {
                            out.push(base.clone().sorted(*s));
                        }
                    }
                }
            }
        }
    }
    out
}

/// One entry per vocabulary predicate, used to catch arity clashes between
/// user rules and generated atoms.
fn vocabulary_signatures() -> AtomSet {
    let a = |p: &str, n: usize| GroundAtom::syms(p, &vec!["_"; n]);
    [
        a("task", 1),
        a("mark", 1),
        a("overlay", 1),
        a("trend", 1),
        a("channel", 2),
        a("field", 2),
        a("type", 2),
        a("aggregate", 2),
        a("bin", 1),
        a("sort_enc", 1),
        a("sort_order", 2),
        a("stack", 2),
        a("scale", 2),
        a("cardinality", 2),
        a("geo_role", 2),
        a("num_encodings", 1),
        a("has_channel", 1),
        a("has_type", 1),
        a("has_transform", 1),
    ]
    .into_iter()
    .collect()
}

type Interned = Vec<(Sym, smallvec::SmallVec<[Sym; 3]>)>;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Context,
    EncodingKeyed,
    HasChannel,
    Summary,
    Column,
    Other,
}

struct Vocabulary {
    kinds: Vec<Kind>,
    enc_index: HashMap<Sym, usize>,
    channel_index: HashMap<Sym, usize>,
}

impl Vocabulary {
    fn kind(&self, pred: Sym) -> Kind {
        self.kinds.get(pred as usize).copied().unwrap_or(Kind::Other)
    }
}

struct Search<'a> {
    dataset: &'a Dataset,
    task: AnalyticTask,
    mark: MarkSpec,
    trend: Option<Trend>,
    k: usize,
    items: Vec<Item>,
    rules: &'a CompiledRules,
    relevant: Vec<usize>,
    vocab: &'a Vocabulary,
    /// `options[channel][item]`: encodings with their atoms for each id slot.
    options: &'a [Vec<Vec<(Encoding, Vec<Interned>)>>],
    item_atoms: &'a [Interned],
    atoms: CompiledAtoms,
    built: Vec<(usize, usize, usize)>,
    used: Vec<bool>,
    out: Vec<CandidateSpec>,
    max_candidates: usize,
    deadline: Instant,
    nodes: u64,
    stopped: bool,
}

impl Search<'_> {
    fn closed(&self, pos: usize, pred: Sym, args: &[Sym]) -> bool {
        let built = self.built.len();
        match self.vocab.kind(pred) {
            Kind::Context | Kind::Other => true,
            Kind::EncodingKeyed => match args.first().and_then(|a| self.vocab.enc_index.get(a)) {
                Some(&i) => i < built || i >= self.k,
                None => true,
            },
            Kind::HasChannel => {
                built == self.k
                    || args
                        .first()
                        .and_then(|a| self.vocab.channel_index.get(a))
                        .is_none_or(|&c| c < pos)
            }
            Kind::Summary => built == self.k,
            Kind::Column => {
                built == self.k
                    || !self.items.iter().enumerate().any(|(i, _)| {
                        !self.used[i]
                            && self.item_atoms[i]
                                .iter()
                                .any(|(p, a)| *p == pred && a.as_slice() == args)
                    })
            }
        }
    }

    fn doomed(&self, pos: usize) -> bool {
        let closed = |p: Sym, a: &[Sym]| self.closed(pos, p, a);
        self.relevant
            .iter()
            .any(|&c| self.rules.violated_by(c, &self.atoms, &closed))
    }

    fn emit(&mut self) {
        let encodings = self
            .built
            .iter()
            .map(|&(c, i, o)| self.options[c][i][o].0.clone())
            .collect();
        self.out.push(CandidateSpec::new(
            self.task,
            self.mark,
            encodings,
            self.trend,
            self.dataset.id.clone(),
        ));
        if self.out.len() >= self.max_candidates {
            self.stopped = true;
        }
    }

    fn legends(&self) -> usize {
        self.built
            .iter()
            .filter(|&&(c, _, _)| Channel::ALL[c].is_legend())
            .count()
    }

    fn visit(&mut self, pos: usize) {
        if self.stopped {
            return;
        }
        self.nodes += 1;
        if self.nodes % 1024 == 0 && Instant::now() >= self.deadline {
            self.stopped = true;
            return;
        }
        if self.doomed(pos) {
            return;
        }
        let built = self.built.len();
        if built == self.k || pos == Channel::ALL.len() {
            if built == self.k {
                self.emit();
            }
            return;
        }
        let remaining = Channel::ALL.len() - pos;
        let channel = Channel::ALL[pos];
        if !(channel.is_legend() && self.legends() >= 2) {
            for i in 0..self.items.len() {
                if self.used[i] {
                    continue;
                }
                for o in 0..self.options[pos][i].len() {
                    let mark = self.atoms.mark();
                    for (p, a) in &self.options[pos][i][o].1[built] {
                        self.atoms.insert(*p, a.clone());
                    }
                    for (p, a) in &self.item_atoms[i] {
                        self.atoms.insert(*p, a.clone());
                    }
                    self.used[i] = true;
                    self.built.push((pos, i, o));
                    self.visit(pos + 1);
                    self.built.pop();
                    self.used[i] = false;
                    self.atoms.truncate(mark);
                    if self.stopped {
                        return;
                    }
                }
            }
        }
        if remaining > self.k - built {
            self.visit(pos + 1);
        }
    }
}

/// Canonical output order: mark priority within the task, then canonical form.
pub fn sort_canonical(specs: &mut [CandidateSpec]) {
    specs.sort_by_cached_key(|s| (mark_priority(s.task, &s.mark).unwrap_or(usize::MAX), canonicalize(s)));
}

/// Every admissible candidate for `task` over `columns` (all columns when
/// empty), up to `limits`.
pub fn enumerate(
    dataset: &Dataset,
    columns: &[String],
    task: AnalyticTask,
    rules: &RuleSet,
    limits: &EnumerationLimits,
) -> Result<Enumeration, EnumerateError> {
    if task == AnalyticTask::Filter {
        return Err(EnumerateError::FilterTask);
    }
    limits.validate()?;
    check_arities(&vocabulary_signatures(), rules)?;
    let mut field_idx: Vec<usize> = Vec::new();
    if columns.is_empty() {
        field_idx.extend(0..dataset.fields().len());
    } else {
        for c in columns {
            let i = dataset
                .field_index(c)
                .ok_or_else(|| EnumerateError::UnknownColumn(c.clone()))?;
            if !field_idx.contains(&i) {
                field_idx.push(i);
            }
        }
    }
    let allow_aggregate = aggregation_allowed(task);
    let mut items: Vec<Item> = field_idx.iter().map(|&i| Item::Field(i)).collect();
    if allow_aggregate {
        items.push(Item::Count);
    }

    let tokens = FieldTokens::new(dataset);
    let mut compiled = CompiledRules::compile(rules);
    let max_k = limits.max_encodings;
    let ids: Vec<String> = (1..=max_k).map(|i| format!("e{i}")).collect();

    let mut options = Vec::with_capacity(Channel::ALL.len());
    for channel in Channel::ALL {
        let mut per_item = Vec::with_capacity(items.len());
        for item in &items {
            let (name, ftype) = match item {
                Item::Field(i) => {
                    let f = &dataset.fields()[*i];
                    (Some(f.name.as_str()), f.ftype)
                }
                Item::Count => (None, FieldType::Quantitative),
            };
            let encs = encoding_options(channel, *item, name, ftype, allow_aggregate);
            per_item.push(
                encs.into_iter()
                    .map(|e| {
                        let by_slot = ids
                            .iter()
                            .map(|id| {
                                encoding_atoms(id, &e, &tokens)
                                    .iter()
                                    .map(|a| compiled.interner.ground(a))
                                    .collect()
                            })
                            .collect();
                        (e, by_slot)
                    })
                    .collect::<Vec<_>>(),
            );
        }
        options.push(per_item);
    }
    let item_atoms: Vec<Interned> = items
        .iter()
        .map(|item| match item {
            Item::Field(i) => field_atoms(&dataset.fields()[*i], &tokens)
                .iter()
                .map(|a| compiled.interner.ground(a))
                .collect(),
            Item::Count => Vec::new(),
        })
        .collect();

    let mut kinds = Vec::new();
    for (pred, kind) in [
        ("task", Kind::Context),
        ("mark", Kind::Context),
        ("overlay", Kind::Context),
        ("trend", Kind::Context),
        ("num_encodings", Kind::Context),
        ("channel", Kind::EncodingKeyed),
        ("field", Kind::EncodingKeyed),
        ("type", Kind::EncodingKeyed),
        ("aggregate", Kind::EncodingKeyed),
        ("bin", Kind::EncodingKeyed),
        ("sort_enc", Kind::EncodingKeyed),
        ("sort_order", Kind::EncodingKeyed),
        ("stack", Kind::EncodingKeyed),
        ("scale", Kind::EncodingKeyed),
        ("has_channel", Kind::HasChannel),
        ("has_type", Kind::Summary),
        ("has_transform", Kind::Summary),
        ("cardinality", Kind::Column),
        ("geo_role", Kind::Column),
    ] {
        let p = compiled.interner.predicate(pred) as usize;
        if kinds.len() <= p {
            kinds.resize(p + 1, Kind::Other);
        }
        kinds[p] = kind;
    }
    let enc_index = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (compiled.interner.symbol(id), i))
        .collect();
    let channel_index = Channel::ALL
        .iter()
        .map(|c| (compiled.interner.symbol(c.as_str()), c.index()))
        .collect();
    let context_preds: Vec<Sym> = ["task", "mark", "overlay", "trend", "num_encodings"]
        .iter()
        .map(|p| compiled.interner.predicate(p))
        .collect();
    let vocab = Vocabulary {
        kinds,
        enc_index,
        channel_index,
    };

    let trends: Vec<Option<Trend>> = if task == AnalyticTask::Trend {
        Trend::ALL.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let deadline = Instant::now() + limits.timeout;
    let mut out = Vec::new();
    let mut partial = false;
    'marks: for &mark in marks_for_task(task) {
        for &trend in &trends {
            for k in 0..=max_k.min(items.len()) {
                let mut atoms = compiled.base_atoms();
                let mut context = context_atoms(task, mark, trend);
                context.push(num_encodings_atom(k));
                for a in &context {
                    let (p, args) = compiled.interner.ground(a);
                    atoms.insert(p, args);
                }
                let relevant = compiled.relevant(&atoms, &context_preds);
                let mut search = Search {
                    dataset,
                    task,
                    mark,
                    trend,
                    k,
                    items: items.clone(),
                    rules: &compiled,
                    relevant,
                    vocab: &vocab,
                    options: &options,
                    item_atoms: &item_atoms,
                    atoms,
                    built: Vec::with_capacity(k),
                    used: vec![false; items.len()],
                    out: std::mem::take(&mut out),
                    max_candidates: limits.max_candidates,
                    deadline,
                    nodes: 0,
                    stopped: false,
                };
                search.visit(0);
                out = search.out;
                if search.stopped {
                    partial = true;
                    break 'marks;
                }
            }
        }
    }
    sort_canonical(&mut out);
    Ok(Enumeration { specs: out, partial })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_dataset, LoadOptions};
    use crate::ground::ground_spec;
    use crate::rules::{check, parse_rules, RuleBase};
    use crate::spec::fixtures::golden;

    fn cars() -> Dataset {
        load_dataset(include_bytes!("../data/cars.json"), LoadOptions::default()).unwrap()
    }

    fn cols(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn golden_is_enumerated() {
        let d = cars();
        let task = AnalyticTask::Sort;
        let rules = RuleBase::shipped().for_task(task);
        let result = enumerate(
            &d,
            &cols(&["Cylinders", "Horsepower", "Origin"]),
            task,
            &rules,
            &EnumerationLimits::default(),
        )
        .unwrap();
        assert!(!result.partial);
        let g = canonicalize(&golden(&d.id));
        assert!(result.specs.iter().any(|s| canonicalize(s) == g));
        for s in &result.specs {
            assert!(check(&ground_spec(s, &d), &rules).unwrap().is_empty(), "{}", canonicalize(s));
            assert_eq!(s.mark, MarkSpec::plain(crate::task::Mark::Bar));
        }
    }

    #[test]
    fn filter_and_unknown_columns_are_rejected() {
        let d = cars();
        let rules = RuleSet::default();
        let lim = EnumerationLimits::default();
        assert_eq!(
            enumerate(&d, &[], AnalyticTask::Filter, &rules, &lim),
            Err(EnumerateError::FilterTask)
        );
        assert_eq!(
            enumerate(&d, &cols(&["nope"]), AnalyticTask::Sort, &rules, &lim),
            Err(EnumerateError::UnknownColumn("nope".into()))
        );
    }

    #[test]
    fn arity_clash_is_an_error() {
        let d = cars();
        let rules = parse_rules(":- channel(E).").unwrap();
        let err = enumerate(&d, &[], AnalyticTask::Sort, &rules, &EnumerationLimits::default()).unwrap_err();
        assert!(matches!(err, EnumerateError::Rules(_)));
    }

    #[test]
    fn candidate_limit_marks_partial() {
        let d = cars();
        let limits = EnumerationLimits {
            max_candidates: 3,
            ..EnumerationLimits::default()
        };
        let r = enumerate(&d, &[], AnalyticTask::Comparison, &RuleSet::default(), &limits).unwrap();
        assert!(r.partial);
        assert_eq!(r.specs.len(), 3);
    }

    #[test]
    fn no_temporal_column_means_no_change_over_time() {
        let d = cars();
        let rules = RuleBase::shipped().for_task(AnalyticTask::ChangeOverTime);
        let r = enumerate(
            &d,
            &cols(&["Horsepower", "Origin"]),
            AnalyticTask::ChangeOverTime,
            &rules,
            &EnumerationLimits::default(),
        )
        .unwrap();
        assert!(r.specs.is_empty());
    }
}
