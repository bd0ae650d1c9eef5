//! Greedy chart sets that jointly cover the columns of interest.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cost::{CostError, CostTable};
use crate::data::Dataset;
use crate::enumerate::{enumerate, EnumerateError, EnumerationLimits};
use crate::rank::{merge_dedup, rank_task_coverage, ScoredSpec};
use crate::rules::RuleBase;
use crate::task::AnalyticTask;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CombinationResult {
    pub charts: Vec<ScoredSpec>,
    pub covered_columns: BTreeSet<String>,
    /// Whether every column of interest is covered.
    pub complete: bool,
    /// Selection rounds performed.
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum RecommendError {
    #[error(transparent)]
    Enumerate(#[from] EnumerateError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

/// Pick charts in task-coverage order until the columns of interest are
/// covered. After each pick, every candidate whose columns are already
/// covered is dropped.
pub fn combine(recs: Vec<ScoredSpec>, interested: &BTreeSet<String>) -> CombinationResult {
    let mut recs = rank_task_coverage(recs);
    let mut covered: BTreeSet<String> = BTreeSet::new();
    let mut charts = Vec::new();
    let mut iterations = 0;
    while !interested.is_subset(&covered) && !recs.is_empty() {
        iterations += 1;
        let pick = recs.remove(0);
        covered.extend(pick.fields.iter().cloned());
        charts.push(pick);
        recs.retain(|r| !r.fields.is_subset(&covered));
    }
    CombinationResult {
        complete: interested.is_subset(&covered),
        charts,
        covered_columns: covered,
        iterations,
    }
}

/// Scored candidates per task, enumerated in parallel.
pub fn enumerate_tasks(
    dataset: &Dataset,
    columns: &[String],
    tasks: &[AnalyticTask],
    rules: &RuleBase,
    table: &CostTable,
    limits: &EnumerationLimits,
) -> Result<(BTreeMap<AnalyticTask, Vec<ScoredSpec>>, bool), RecommendError> {
    let results: Vec<(AnalyticTask, Vec<ScoredSpec>, bool)> = tasks
        .par_iter()
        .map(|&task| -> Result<_, RecommendError> {
            let e = enumerate(dataset, columns, task, &rules.for_task(task), limits)?;
            let scored = e
                .specs
                .into_iter()
                .map(|s| ScoredSpec::score(s, table))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((task, scored, e.partial))
        })
        .collect::<Result<_, _>>()?;
    let partial = results.iter().any(|r| r.2);
    Ok((results.into_iter().map(|(t, s, _)| (t, s)).collect(), partial))
}

/// Combination recommendation. Without tasks every enumerable task is
/// tried; with no columns of interest every column is.
pub fn recommend_combination(
    dataset: &Dataset,
    interested: &BTreeSet<String>,
    tasks: Option<&[AnalyticTask]>,
    rules: &RuleBase,
    table: &CostTable,
    limits: &EnumerationLimits,
) -> Result<(CombinationResult, bool), RecommendError> {
    let all: Vec<AnalyticTask> = AnalyticTask::enumerable().collect();
    let tasks = match tasks {
        Some(t) if !t.is_empty() => t,
        _ => &all,
    };
    let interested: BTreeSet<String> = if interested.is_empty() {
        dataset.field_names().map(str::to_string).collect()
    } else {
        interested.clone()
    };
    let columns: Vec<String> = dataset
        .field_names()
        .filter(|n| interested.contains(*n))
        .map(str::to_string)
        .collect();
    let (per_task, partial) = enumerate_tasks(dataset, &columns, tasks, rules, table, limits)?;
    Ok((combine(merge_dedup(&per_task), &interested), partial))
}
