use std::collections::{BTreeMap, BTreeSet, HashSet};

use proptest::prelude::*;
use serde_json::json;

use taskvis_core::combine::combine;
use taskvis_core::cost::{cost_score, CostTable};
use taskvis_core::data::{infer_field_type, Dataset, FieldType, FilterOp, FilterPredicate};
use taskvis_core::rank::{
    merge_dedup, rank_complexity, rank_interest, rank_reverse_complexity, rank_task_coverage, spec_distance, ScoredSpec,
};
use taskvis_core::rules::{parse_rules, violates, AtomSet, GroundAtom};
use taskvis_core::spec::{canonicalize, Aggregate, CandidateSpec, Channel, Encoding};
use taskvis_core::task::{marks_for_task, AnalyticTask};

const SYMS: [&str; 4] = ["a", "b", "c", "d"];

fn atoms() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
    proptest::collection::vec((0u8..4, 0u8..4, 0u8..4), 0..14)
}

fn to_set(raw: &[(u8, u8, u8)]) -> AtomSet {
    raw.iter()
        .map(|&(p, x, y)| match p {
            0 => GroundAtom::syms("p", &[SYMS[x as usize]]),
            1 => GroundAtom::syms("q", &[SYMS[x as usize]]),
            2 => GroundAtom::syms("r", &[SYMS[x as usize]]),
            _ => GroundAtom::syms("e", &[SYMS[x as usize], SYMS[y as usize]]),
        })
        .collect()
}

fn single(text: &str) -> taskvis_core::rules::IntegrityConstraint {
    parse_rules(text).unwrap().constraints.remove(0)
}

fn column(values: &[i64]) -> Dataset {
    let rows = values.iter().map(|v| vec![Some(v.to_string())]).collect();
    Dataset::from_raw("t", vec!["v".into()], rows).unwrap()
}

fn field_pool() -> Vec<(&'static str, FieldType)> {
    vec![
        ("A", FieldType::Quantitative),
        ("B", FieldType::Quantitative),
        ("C", FieldType::Nominal),
        ("D", FieldType::Temporal),
        ("E", FieldType::Nominal),
    ]
}

/// Small well-formed specs: one or two axis encodings plus an optional color.
fn spec() -> impl Strategy<Value = CandidateSpec> {
    (0usize..5, 0usize..5, proptest::option::of(0usize..5), 0usize..4, any::<bool>(), 0usize..3)
        .prop_filter("distinct fields", |(x, y, c, ..)| {
            x != y && c.map_or(true, |c| c != *x && c != *y)
        })
        .prop_map(|(x, y, c, mark, agg, task)| {
            let pool = field_pool();
            let mut encs = vec![Encoding::field(Channel::X, pool[x].0, pool[x].1)];
            let mut ye = Encoding::field(Channel::Y, pool[y].0, pool[y].1);
            if agg && pool[y].1 == FieldType::Quantitative {
                ye = ye.aggregate(Aggregate::Mean);
            }
            encs.push(ye);
            if let Some(c) = c {
                encs.push(Encoding::field(Channel::Color, pool[c].0, pool[c].1));
            }
            let task = [AnalyticTask::Comparison, AnalyticTask::Correlate, AnalyticTask::Magnitude][task];
            let marks = marks_for_task(task);
            CandidateSpec::new(task, marks[mark % marks.len()], encs, None, "t")
        })
}

fn scored(specs: Vec<CandidateSpec>) -> Vec<ScoredSpec> {
    let mut seen = HashSet::new();
    specs
        .into_iter()
        .filter(|s| seen.insert(canonicalize(s)))
        .map(|s| ScoredSpec::score(s, CostTable::shipped()).unwrap())
        .collect()
}

fn sorted_canon(list: &[ScoredSpec]) -> Vec<String> {
    let mut v: Vec<String> = list.iter().map(ScoredSpec::canonical).collect();
    v.sort();
    v
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn inference_ignores_row_order(mut cells in proptest::collection::vec("[0-9]{1,3}|[a-c]|2020-0[1-9]-1[0-9]", 1..30), seed in any::<u64>()) {
        let before = infer_field_type(&cells).unwrap();
        let n = cells.len();
        cells.rotate_left((seed as usize) % n);
        cells.reverse();
        prop_assert_eq!(infer_field_type(&cells).unwrap(), before);
    }

    #[test]
    fn cardinality_counts_distinct_cells(values in proptest::collection::vec(-20i64..20, 1..60)) {
        let d = column(&values);
        let distinct: HashSet<i64> = values.iter().copied().collect();
        prop_assert_eq!(d.fields()[0].stats.cardinality, distinct.len());
    }

    #[test]
    fn filters_match_direct_evaluation(values in proptest::collection::vec(0i64..400, 20..60), lo in 0i64..400, width in 0i64..200) {
        let d = column(&values).override_field_type("v", FieldType::Quantitative).unwrap();
        let hi = lo + width;
        let cases = [
            (FilterOp::Gt, vec![json!(lo)], values.iter().filter(|&&v| v > lo).count()),
            (FilterOp::Le, vec![json!(lo)], values.iter().filter(|&&v| v <= lo).count()),
            (FilterOp::Neq, vec![json!(lo)], values.iter().filter(|&&v| v != lo).count()),
            (FilterOp::Between, vec![json!(lo), json!(hi)], values.iter().filter(|&&v| lo <= v && v <= hi).count()),
            (FilterOp::In, vec![json!(lo), json!(hi)], values.iter().filter(|&&v| v == lo || v == hi).count()),
        ];
        for (op, operands, expected) in cases {
            let out = d.apply_filters(&[FilterPredicate::new("v", op, operands)]).unwrap();
            prop_assert_eq!(out.row_count(), expected, "{:?}", op);
        }
        let both = d.apply_filters(&[
            FilterPredicate::new("v", FilterOp::Ge, vec![json!(lo)]),
            FilterPredicate::new("v", FilterOp::Lt, vec![json!(hi)]),
        ]).unwrap();
        prop_assert_eq!(both.row_count(), values.iter().filter(|&&v| lo <= v && v < hi).count());
    }

    #[test]
    fn type_override_round_trips(values in proptest::collection::vec(0i64..1000, 2..40)) {
        let d = column(&values);
        let original = d.fields()[0].ftype;
        let nominal = d.override_field_type("v", FieldType::Nominal).unwrap();
        prop_assert_eq!(nominal.fields()[0].ftype, FieldType::Nominal);
        prop_assert_eq!(nominal.row_count(), d.row_count());
        let back = nominal.override_field_type("v", original).unwrap();
        prop_assert_eq!(&back.fields()[0].stats, &d.fields()[0].stats);
        prop_assert_eq!(back.raw_rows(), d.raw_rows());
    }

    #[test]
    fn ground_check_matches_set_test(raw in atoms()) {
        let set = to_set(&raw);
        let has = |p: &str, x: &str| set.contains(&GroundAtom::syms(p, &[x]));
        let c = single(":- p(X), q(X), not r(X).");
        let direct = SYMS.iter().any(|x| has("p", x) && has("q", x) && !has("r", x));
        prop_assert_eq!(violates(&set, &c), direct);

        let join = single(":- e(X, Y), p(X), not q(Y).");
        let direct = SYMS.iter().any(|x| SYMS.iter().any(|y| {
            set.contains(&GroundAtom::syms("e", &[x, y])) && has("p", x) && !has("q", y)
        }));
        prop_assert_eq!(violates(&set, &join), direct);
    }

    #[test]
    fn positive_constraints_are_monotone(raw in atoms(), extra in atoms()) {
        let c = single(":- e(X, Y), p(Y), q(X).");
        let small = to_set(&raw);
        let mut all = raw.clone();
        all.extend(extra);
        if violates(&small, &c) {
            prop_assert!(violates(&to_set(&all), &c));
        }
    }

    #[test]
    fn renaming_variables_keeps_verdicts(raw in atoms()) {
        let set = to_set(&raw);
        let a = single(":- e(X, Y), p(X), not r(Y).");
        let b = single(":- e(Left, Right), p(Left), not r(Right).");
        prop_assert_eq!(violates(&set, &a), violates(&set, &b));
    }

    #[test]
    fn rankings_are_permutations(specs in proptest::collection::vec(spec(), 1..25)) {
        let list = scored(specs);
        let table = CostTable::shipped();
        let interested: BTreeSet<String> = ["A", "C"].iter().map(|s| s.to_string()).collect();
        let want = sorted_canon(&list);
        prop_assert_eq!(sorted_canon(&rank_complexity(list.clone())), want.clone());
        prop_assert_eq!(sorted_canon(&rank_reverse_complexity(list.clone(), &table.cluster, table).unwrap()), want.clone());
        prop_assert_eq!(sorted_canon(&rank_interest(list.clone(), &interested).unwrap()), want.clone());
        prop_assert_eq!(sorted_canon(&rank_task_coverage(list)), want);
    }

    #[test]
    fn rankings_are_deterministic(specs in proptest::collection::vec(spec(), 1..20)) {
        let list = scored(specs);
        let mut reversed = list.clone();
        reversed.reverse();
        let canon = |l: Vec<ScoredSpec>| l.iter().map(ScoredSpec::canonical).collect::<Vec<_>>();
        prop_assert_eq!(canon(rank_complexity(list.clone())), canon(rank_complexity(reversed.clone())));
        prop_assert_eq!(canon(rank_task_coverage(list)), canon(rank_task_coverage(reversed)));
    }

    #[test]
    fn distance_is_symmetric(a in spec(), b in spec()) {
        let t = CostTable::shipped();
        let ab = spec_distance(&a, &b, t).unwrap();
        prop_assert_eq!(ab, spec_distance(&b, &a, t).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(spec_distance(&a, &a, t).unwrap(), 0.0);
    }

    #[test]
    fn merging_is_idempotent(specs in proptest::collection::vec(spec(), 1..20)) {
        let list = scored(specs);
        let once = merge_dedup(&BTreeMap::from([(AnalyticTask::Comparison, list.clone())]));
        prop_assert_eq!(sorted_canon(&once), sorted_canon(&list));
        let twice = merge_dedup(&BTreeMap::from([(AnalyticTask::Comparison, once.clone())]));
        prop_assert_eq!(&twice, &once);
        let doubled = merge_dedup(&BTreeMap::from([
            (AnalyticTask::Comparison, list.clone()),
            (AnalyticTask::Correlate, list),
        ]));
        prop_assert_eq!(sorted_canon(&doubled), sorted_canon(&once));
    }

    #[test]
    fn cost_adds_over_encodings(s in spec()) {
        let t = CostTable::shipped();
        let total = cost_score(&s, s.task, t).unwrap();
        let mark_only = CandidateSpec::new(s.task, s.mark, vec![], None, "t");
        let mut sum = cost_score(&mark_only, s.task, t).unwrap();
        for e in &s.encodings {
            let one = CandidateSpec::new(s.task, s.mark, vec![e.clone()], None, "t");
            sum += cost_score(&one, s.task, t).unwrap() - cost_score(&mark_only, s.task, t).unwrap();
        }
        prop_assert!((total - sum).abs() < 1e-9, "{} vs {}", total, sum);
    }

    #[test]
    fn combination_is_not_redundant(specs in proptest::collection::vec(spec(), 1..25)) {
        let list = scored(specs);
        let interested: BTreeSet<String> = list.iter().flat_map(|s| s.fields.iter().cloned()).collect();
        let r = combine(list, &interested);
        prop_assert!(r.complete);
        let mut seen = BTreeSet::new();
        for c in &r.charts {
            prop_assert!(!c.fields.is_subset(&seen));
            seen.extend(c.fields.iter().cloned());
        }
        prop_assert_eq!(seen, r.covered_columns);
        prop_assert_eq!(r.iterations, r.charts.len());
    }
}
