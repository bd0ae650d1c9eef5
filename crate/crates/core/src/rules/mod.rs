//! A small constraint language of facts and headless rules.

mod ast;
mod eval;
mod parser;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use thiserror::Error;

pub use ast::{format_ruleset, Atom, Const, GroundAtom, IntegrityConstraint, Literal, Origin, RuleSet, Term};
pub use eval::{
    check, check_arities, find_violation, violates, AtomSet, CompiledAtoms, CompiledRules, EvalError, Interner,
    Substitution, Sym,
};
pub use parser::{parse_rules, parse_rules_from, ParseError};

use crate::task::AnalyticTask;

/// Environment variable naming a directory that replaces the shipped rules.
pub const RULES_DIR_ENV: &str = "TASKVIS_RULES_DIR";

const SHIPPED_BASE: &str = include_str!("../../assets/rules/base.rules");

fn shipped_task_source(task: AnalyticTask) -> &'static str {
    macro_rules! by_task {
        ($($variant:ident => $file:literal),+ $(,)?) => {
            match task {
                $(AnalyticTask::$variant => include_str!(concat!("../../assets/rules/tasks/", $file, ".rules")),)+
            }
        };
    }
    by_task! {
        ChangeOverTime => "change_over_time",
        CharacterizeDistribution => "characterize_distribution",
        Cluster => "cluster",
        Comparison => "comparison",
        ComputeDerivedValue => "compute_derived_value",
        Correlate => "correlate",
        DetermineRange => "determine_range",
        Deviation => "deviation",
        ErrorRange => "error_range",
        Filter => "filter",
        FindAnomalies => "find_anomalies",
        FindExtremum => "find_extremum",
        Magnitude => "magnitude",
        PartToWhole => "part_to_whole",
        RetrieveValue => "retrieve_value",
        Sort => "sort",
        Spatial => "spatial",
        Trend => "trend",
    }
}

#[derive(Debug, Error)]
pub enum RuleLoadError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Shared rules plus one optional rule set per task.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleBase {
    pub base: RuleSet,
    pub tasks: BTreeMap<AnalyticTask, RuleSet>,
}

impl RuleBase {
    /// The rules compiled into the library.
    pub fn shipped() -> &'static RuleBase {
        static SHIPPED: OnceLock<RuleBase> = OnceLock::new();
        SHIPPED.get_or_init(|| {
            let base = parse_rules_from(SHIPPED_BASE, "rules/base.rules").expect("shipped base rules parse");
            let tasks = AnalyticTask::ALL
                .into_iter()
                .map(|t| {
                    let name = format!("rules/tasks/{t}.rules");
                    let rules = parse_rules_from(shipped_task_source(t), &name).expect("shipped task rules parse");
                    (t, rules)
                })
                .collect();
            RuleBase { base, tasks }
        })
    }

    /// Load `base.rules` and any `tasks/<task>.rules` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<RuleBase, RuleLoadError> {
        let read = |path: PathBuf| -> Result<Option<RuleSet>, RuleLoadError> {
            match std::fs::read_to_string(&path) {
                Ok(text) => Ok(Some(parse_rules_from(&text, &path.display().to_string())?)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                Err(source) => Err(RuleLoadError::Io { path, source }),
            }
        };
        let base_path = dir.join("base.rules");
        let base = read(base_path.clone())?.ok_or_else(|| RuleLoadError::Io {
            path: base_path,
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        })?;
        let mut tasks = BTreeMap::new();
        for t in AnalyticTask::ALL {
            if let Some(rules) = read(dir.join("tasks").join(format!("{t}.rules")))? {
                tasks.insert(t, rules);
            }
        }
        Ok(RuleBase { base, tasks })
    }

    /// The directory named by [`RULES_DIR_ENV`], or the shipped rules.
    pub fn from_env() -> Result<RuleBase, RuleLoadError> {
        match std::env::var_os(RULES_DIR_ENV) {
            Some(dir) => RuleBase::load_dir(Path::new(&dir)),
            None => Ok(RuleBase::shipped().clone()),
        }
    }

    /// Base rules plus the rules of `task`.
    pub fn for_task(&self, task: AnalyticTask) -> RuleSet {
        let mut rules = self.base.clone();
        if let Some(t) = self.tasks.get(&task) {
            rules.extend(t.clone());
        }
        rules
    }

    /// Base rules plus every task's rules.
    pub fn all(&self) -> RuleSet {
        let mut rules = self.base.clone();
        for t in self.tasks.values() {
            rules.extend(t.clone());
        }
        rules
    }

    /// Add rules applying to every task, such as a user's partial specification.
    pub fn with_extra(mut self, extra: RuleSet) -> RuleBase {
        self.base.extend(extra);
        self
    }
}
