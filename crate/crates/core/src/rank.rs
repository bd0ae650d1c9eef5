//! Scoring and the four ranking schemes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{cost_score, sort_token, transform_tokens, trend_token, ClusterParams, CostError, CostTable};
use crate::spec::{canonicalize, spec_fields, CandidateSpec, Channel};
use crate::task::AnalyticTask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingScheme {
    Complexity,
    ReverseComplexity,
    Interest,
    TaskCoverage,
}

impl RankingScheme {
    pub const ALL: [RankingScheme; 4] = [
        RankingScheme::Complexity,
        RankingScheme::ReverseComplexity,
        RankingScheme::Interest,
        RankingScheme::TaskCoverage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RankingScheme::Complexity => "complexity",
            RankingScheme::ReverseComplexity => "reverse_complexity",
            RankingScheme::Interest => "interest",
            RankingScheme::TaskCoverage => "task_coverage",
        }
    }
}

impl fmt::Display for RankingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RankingScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RankingScheme::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = RankingScheme::ALL.iter().map(|r| r.as_str()).collect();
                format!("unknown ranking scheme `{s}`; expected one of: {}", names.join(", "))
            })
    }
}

#[derive(Debug, Error)]
pub enum RankError {
    #[error("the interest scheme needs at least one column of interest")]
    EmptyInterest,
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpec {
    pub spec: CandidateSpec,
    pub cost: f64,
    pub fields: BTreeSet<String>,
    pub covering_tasks: BTreeSet<AnalyticTask>,
}

impl ScoredSpec {
    /// Score under the spec's own task.
    pub fn score(spec: CandidateSpec, table: &CostTable) -> Result<ScoredSpec, CostError> {
        let cost = cost_score(&spec, spec.task, table)?;
        Ok(ScoredSpec {
            fields: spec_fields(&spec),
            covering_tasks: BTreeSet::from([spec.task]),
            spec,
            cost,
        })
    }

    pub fn canonical(&self) -> String {
        canonicalize(&self.spec)
    }
}

/// Costs rounded to ten significant digits so that sums computed in a
/// different order or scale compare equal.
fn cost_key(c: f64) -> f64 {
    if c == 0.0 || !c.is_finite() {
        return c;
    }
    let p = 10f64.powi(9 - c.abs().log10().floor() as i32);
    (c * p).round() / p
}

fn by_cost(a: f64, b: f64) -> Ordering {
    cost_key(a).total_cmp(&cost_key(b))
}

fn sorted_by<K: Ord>(list: Vec<ScoredSpec>, key: impl Fn(&ScoredSpec) -> K) -> Vec<ScoredSpec> {
    let mut keyed: Vec<(K, String, ScoredSpec)> = list
        .into_iter()
        .map(|s| {
            let c = s.canonical();
            (key(&s), c, s)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, s)| s).collect()
}

#[derive(PartialEq, PartialOrd)]
struct Total(f64);

impl Eq for Total {}

impl Ord for Total {
    fn cmp(&self, other: &Self) -> Ordering {
        by_cost(self.0, other.0)
    }
}

/// Scheme I: ascending cost, ties by canonical form.
pub fn rank_complexity(list: Vec<ScoredSpec>) -> Vec<ScoredSpec> {
    sorted_by(list, |s| Total(s.cost))
}

/// A spec as a multiset of priced components for distance computation.
struct Components {
    items: Vec<(String, f64)>,
    swapped: Option<Vec<(String, f64)>>,
}

fn component_items(spec: &CandidateSpec, table: &CostTable, swap: bool) -> Result<Vec<(String, f64)>, CostError> {
    let task = spec.task;
    let mut items = vec![(format!("m|{}", spec.mark), table.mark_cost(task, spec.mark)?)];
    for e in &spec.encodings {
        let channel = match (swap, e.channel) {
            (true, Channel::X) => Channel::Y,
            (true, Channel::Y) => Channel::X,
            (_, c) => c,
        };
        let field = e.field.as_deref().unwrap_or("#count");
        let ch_cost = table
            .channels
            .get(e.channel)
            .ok_or_else(|| CostError::Missing(crate::cost::ComponentKey::channel(e.channel)))?;
        items.push((format!("c|{channel}|{field}|{}", e.ftype), ch_cost));
        for token in transform_tokens(e) {
            let key = crate::cost::ComponentKey::transform(token);
            let cost = table.component_cost(&key, task)?;
            let name = match (token, e.sort) {
                ("sort", Some(s)) => sort_token(s),
                _ => token,
            };
            items.push((format!("t|{channel}|{field}|{name}"), cost));
        }
    }
    if let Some(t) = spec.trend {
        let key = crate::cost::ComponentKey::transform(trend_token(t));
        items.push((format!("r|{t}"), table.component_cost(&key, task)?));
    }
    items.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(items)
}

impl Components {
    fn new(spec: &CandidateSpec, table: &CostTable) -> Result<Components, CostError> {
        let has_axis = spec.encodings.iter().any(|e| e.channel.is_axis());
        Ok(Components {
            items: component_items(spec, table, false)?,
            swapped: if has_axis {
                Some(component_items(spec, table, true)?)
            } else {
                None
            },
        })
    }
}

fn symmetric_difference(a: &[(String, f64)], b: &[(String, f64)]) -> f64 {
    let (mut i, mut j, mut total) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => {
                total += a[i].1;
                i += 1;
            }
            Ordering::Greater => {
                total += b[j].1;
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    total + a[i..].iter().map(|x| x.1).sum::<f64>() + b[j..].iter().map(|x| x.1).sum::<f64>()
}

fn distance(a: &Components, b: &Components, swap: f64) -> f64 {
    let direct = symmetric_difference(&a.items, &b.items);
    match &a.swapped {
        Some(s) => direct.min(swap + symmetric_difference(s, &b.items)),
        None => direct,
    }
}

/// Cost of the components the two charts do not share; exchanging x and y
/// costs the table's swap cost instead of the channel costs it would touch.
pub fn spec_distance(a: &CandidateSpec, b: &CandidateSpec, table: &CostTable) -> Result<f64, CostError> {
    let (ca, cb) = (Components::new(a, table)?, Components::new(b, table)?);
    Ok(distance(&ca, &cb, table.distance.swap))
}

/// Density-based clustering under [`spec_distance`]. Labels number clusters
/// by their first member; noise points get singleton clusters.
pub fn cluster(list: &[ScoredSpec], params: &ClusterParams, table: &CostTable) -> Result<Vec<usize>, CostError> {
    let comps = list
        .iter()
        .map(|s| Components::new(&s.spec, table))
        .collect::<Result<Vec<_>, _>>()?;
    let n = list.len();
    let eps = params.eps * (1.0 + 1e-9);
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        neighbours[i].push(i);
        for j in (i + 1)..n {
            if distance(&comps[i], &comps[j], table.distance.swap) <= eps {
                neighbours[i].push(j);
                neighbours[j].push(i);
            }
        }
    }
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= params.min_pts).collect();
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if label[i].is_some() || !core[i] {
            continue;
        }
        label[i] = Some(next);
        let mut queue = VecDeque::from([i]);
        while let Some(q) = queue.pop_front() {
            for &m in &neighbours[q] {
                if label[m].is_none() {
                    label[m] = Some(next);
                    if core[m] {
                        queue.push_back(m);
                    }
                }
            }
        }
        next += 1;
    }
    for l in label.iter_mut().filter(|l| l.is_none()) {
        *l = Some(next);
        next += 1;
    }
    let mut renumber: HashMap<usize, usize> = HashMap::new();
    Ok(label
        .into_iter()
        .map(|l| {
            let fresh = renumber.len();
            *renumber.entry(l.expect("labelled")).or_insert(fresh)
        })
        .collect())
}

/// Scheme II: clusters ordered by their highest cost, descending, each
/// cluster keeping its scheme I order.
pub fn rank_reverse_complexity(
    list: Vec<ScoredSpec>,
    params: &ClusterParams,
    table: &CostTable,
) -> Result<Vec<ScoredSpec>, CostError> {
    let sorted = rank_complexity(list);
    let labels = cluster(&sorted, params, table)?;
    let clusters = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<ScoredSpec>> = vec![Vec::new(); clusters];
    for (s, l) in sorted.into_iter().zip(labels) {
        groups[l].push(s);
    }
    let mut keyed: Vec<(f64, usize, Vec<ScoredSpec>)> = groups
        .into_iter()
        .enumerate()
        .map(|(i, g)| (g.iter().map(|s| s.cost).fold(f64::NEG_INFINITY, f64::max), i, g))
        .collect();
    keyed.sort_by(|a, b| by_cost(b.0, a.0).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().flat_map(|(_, _, g)| g).collect())
}

/// Scheme III: cost divided by the share of interesting columns covered.
pub fn rank_interest(list: Vec<ScoredSpec>, interested: &BTreeSet<String>) -> Result<Vec<ScoredSpec>, RankError> {
    if interested.is_empty() {
        return Err(RankError::EmptyInterest);
    }
    let n2 = interested.len() as f64;
    Ok(sorted_by(list, |s| {
        let n1 = s.fields.intersection(interested).count();
        let adjusted = if n1 == 0 {
            f64::INFINITY
        } else {
            s.cost * n2 / n1 as f64
        };
        (n1 == 0, Total(adjusted), Total(s.cost))
    }))
}

/// Adjusted cost used by scheme III; infinite when nothing interesting is
/// covered.
pub fn interest_cost(s: &ScoredSpec, interested: &BTreeSet<String>) -> f64 {
    let n1 = s.fields.intersection(interested).count();
    if n1 == 0 {
        f64::INFINITY
    } else {
        s.cost * interested.len() as f64 / n1 as f64
    }
}

/// Scheme IV: more covered tasks first, then scheme I.
pub fn rank_task_coverage(list: Vec<ScoredSpec>) -> Vec<ScoredSpec> {
    sorted_by(list, |s| (std::cmp::Reverse(s.covering_tasks.len()), Total(s.cost)))
}

/// Union of per-task lists keyed by canonical form. Duplicates keep their
/// first occurrence, average their costs and pool their covering tasks.
pub fn merge_dedup(per_task: &BTreeMap<AnalyticTask, Vec<ScoredSpec>>) -> Vec<ScoredSpec> {
    let mut order: Vec<String> = Vec::new();
    let mut acc: HashMap<String, (ScoredSpec, f64, usize)> = HashMap::new();
    for (task, list) in per_task {
        for s in list {
            let key = s.canonical();
            let tasks: BTreeSet<AnalyticTask> = if s.covering_tasks.is_empty() {
                BTreeSet::from([*task])
            } else {
                s.covering_tasks.clone()
            };
            match acc.get_mut(&key) {
                Some((first, sum, n)) => {
                    first.covering_tasks.extend(tasks);
                    *sum += s.cost;
                    *n += 1;
                }
                None => {
                    let mut first = s.clone();
                    first.covering_tasks = tasks;
                    acc.insert(key.clone(), (first, s.cost, 1));
                    order.push(key);
                }
            }
        }
    }
    order
        .into_iter()
        .map(|k| {
            let (mut s, sum, n) = acc.remove(&k).expect("key recorded");
            s.cost = if n == 1 { sum } else { sum / n as f64 };
            s
        })
        .collect()
}

/// Rank with any scheme. `interested` is only read by the interest scheme.
pub fn rank(
    list: Vec<ScoredSpec>,
    scheme: RankingScheme,
    interested: &BTreeSet<String>,
    table: &CostTable,
) -> Result<Vec<ScoredSpec>, RankError> {
    Ok(match scheme {
        RankingScheme::Complexity => rank_complexity(list),
        RankingScheme::ReverseComplexity => rank_reverse_complexity(list, &table.cluster, table)?,
        RankingScheme::Interest => rank_interest(list, interested)?,
        RankingScheme::TaskCoverage => rank_task_coverage(list),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FieldType;
    use crate::spec::fixtures::golden;
    use crate::spec::{Aggregate, Encoding};

    fn scored(cost: f64, fields: &[&str]) -> ScoredSpec {
        let mut s = ScoredSpec::score(golden("d"), CostTable::shipped()).unwrap();
        s.cost = cost;
        s.fields = fields.iter().map(|f| f.to_string()).collect();
        s.spec.dataset_id = format!("{cost}-{}", fields.join(","));
        s.spec.encodings[2].field = Some(format!("{cost}{}", fields.join("")));
        s
    }

    #[test]
    fn complexity_orders_by_cost() {
        let out = rank_complexity(vec![scored(5.0, &[]), scored(2.0, &[]), scored(9.0, &[])]);
        let costs: Vec<f64> = out.iter().map(|s| s.cost).collect();
        assert_eq!(costs, [2.0, 5.0, 9.0]);
        assert!(rank_complexity(vec![]).is_empty());
    }

    #[test]
    fn interest_adjusts_cost() {
        let interested: BTreeSet<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        let a = scored(4.0, &["A"]);
        assert_eq!(interest_cost(&a, &interested), 8.0);
        let out = rank_interest(vec![scored(1.0, &["C"]), a, scored(7.0, &["A", "B"])], &interested).unwrap();
        let costs: Vec<f64> = out.iter().map(|s| s.cost).collect();
        assert_eq!(costs, [7.0, 4.0, 1.0]);
        assert!(rank_interest(vec![], &BTreeSet::new()).is_err());
    }

    #[test]
    fn merge_averages_and_pools() {
        let g = golden("d");
        let t = CostTable::shipped();
        let mut a = ScoredSpec::score(g.clone(), t).unwrap();
        a.cost = 4.0;
        let mut b = ScoredSpec::score(g.with_task(AnalyticTask::Comparison), t).unwrap();
        b.cost = 6.0;
        let per_task = BTreeMap::from([
            (AnalyticTask::Sort, vec![a]),
            (AnalyticTask::Comparison, vec![b]),
        ]);
        let merged = merge_dedup(&per_task);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].cost, 5.0);
        assert_eq!(
            merged[0].covering_tasks,
            BTreeSet::from([AnalyticTask::Sort, AnalyticTask::Comparison])
        );
        let again = merge_dedup(&BTreeMap::from([(AnalyticTask::Sort, merged.clone())]));
        assert_eq!(again, merged);
    }

    #[test]
    fn distances() {
        let t = CostTable::shipped();
        let g = golden("d");
        assert_eq!(spec_distance(&g, &g, t).unwrap(), 0.0);
        assert_eq!(spec_distance(&g, &g.swap_axes(), t).unwrap(), t.distance.swap);
        let mut mean = g.clone();
        mean.encodings[1] = Encoding::field(Channel::Y, "Horsepower", FieldType::Quantitative)
            .aggregate(Aggregate::Mean)
            .stacked(crate::spec::Stack::Zero);
        assert_eq!(spec_distance(&g, &mean, t).unwrap(), 4.0);
        assert_eq!(spec_distance(&mean, &g, t).unwrap(), 4.0);
    }

    #[test]
    fn eps_zero_isolates_every_spec() {
        let t = CostTable::shipped();
        let specs = vec![scored(1.0, &["a"]), scored(2.0, &["b"]), scored(3.0, &["c"])];
        let params = ClusterParams { eps: 0.0, min_pts: 2 };
        assert_eq!(cluster(&specs, &params, t).unwrap(), [0, 1, 2]);
        let same = vec![scored(1.0, &["a"]); 3];
        assert_eq!(cluster(&same, &t.cluster, t).unwrap(), [0, 0, 0]);
    }

    #[test]
    fn cost_keys_absorb_rounding() {
        assert_eq!(by_cost(0.1 + 0.2, 0.3), Ordering::Equal);
        assert_eq!(by_cost(1.0, 1.0 + 1e-6), Ordering::Less);
    }
}
