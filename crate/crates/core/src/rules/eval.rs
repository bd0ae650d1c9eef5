//! Constraint evaluation over ground atom sets.
//!
//! [`check`] and [`violates`] are the reference evaluator: a backtracking
//! join of the positive literals followed by a membership test for each
//! negated literal. [`CompiledRules`] evaluates the same semantics over
//! interned symbols and supports the partial-assignment pruning the
//! enumerator relies on.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use smallvec::SmallVec;
use thiserror::Error;

use super::ast::{Atom, Const, GroundAtom, IntegrityConstraint, RuleSet, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("predicate `{predicate}` used with arities {first} and {second}")]
    InconsistentArity {
        predicate: String,
        first: usize,
        second: usize,
    },
}

/// A set of ground atoms indexed by predicate.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AtomSet {
    atoms: BTreeSet<GroundAtom>,
    by_predicate: HashMap<String, Vec<GroundAtom>>,
}

impl AtomSet {
    pub fn new() -> AtomSet {
        AtomSet::default()
    }

    pub fn insert(&mut self, atom: GroundAtom) -> bool {
        if self.atoms.contains(&atom) {
            return false;
        }
        self.by_predicate
            .entry(atom.predicate.clone())
            .or_default()
            .push(atom.clone());
        self.atoms.insert(atom)
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.atoms.contains(atom)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Atoms in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = &GroundAtom> {
        self.atoms.iter()
    }

    fn with_predicate(&self, predicate: &str) -> &[GroundAtom] {
        self.by_predicate.get(predicate).map_or(&[], Vec::as_slice)
    }
}

impl FromIterator<GroundAtom> for AtomSet {
    fn from_iter<I: IntoIterator<Item = GroundAtom>>(iter: I) -> Self {
        let mut set = AtomSet::new();
        for a in iter {
            set.insert(a);
        }
        set
    }
}

impl Extend<GroundAtom> for AtomSet {
    fn extend<I: IntoIterator<Item = GroundAtom>>(&mut self, iter: I) {
        for a in iter {
            self.insert(a);
        }
    }
}

pub type Substitution = BTreeMap<String, Const>;

type Bindings<'a> = Vec<(&'a str, &'a Const)>;

fn lookup<'a>(theta: &Bindings<'a>, var: &str) -> Option<&'a Const> {
    theta.iter().rev().find(|(v, _)| *v == var).map(|(_, c)| *c)
}

fn unify<'a>(pattern: &'a Atom, atom: &'a GroundAtom, theta: &mut Bindings<'a>) -> bool {
    if pattern.args.len() != atom.args.len() {
        return false;
    }
    for (t, c) in pattern.args.iter().zip(&atom.args) {
        let ok = match t {
            Term::Var(v) => match lookup(theta, v) {
                Some(existing) => existing == c,
                None => {
                    theta.push((v, c));
                    true
                }
            },
            Term::Symbol(s) => matches!(c, Const::Symbol(k) if k == s),
            Term::Str(s) => matches!(c, Const::Str(k) if k == s),
            Term::Int(i) => matches!(c, Const::Int(k) if k == i),
        };
        if !ok {
            return false;
        }
    }
    true
}

fn negated_holds(atom: &Atom, theta: &Bindings<'_>, atoms: &AtomSet) -> bool {
    let ground = GroundAtom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => lookup(theta, v).cloned().expect("safe constraint binds every variable"),
                other => other.as_const().expect("non-variable term"),
            })
            .collect(),
    };
    !atoms.contains(&ground)
}

fn search<'a>(
    positives: &[&'a Atom],
    negatives: &[&'a Atom],
    atoms: &'a AtomSet,
    theta: &mut Bindings<'a>,
) -> bool {
    match positives.split_first() {
        None => negatives.iter().all(|n| negated_holds(n, theta, atoms)),
        Some((first, rest)) => {
            for candidate in atoms.with_predicate(&first.predicate) {
                let depth = theta.len();
                if unify(first, candidate, theta) && search(rest, negatives, atoms, theta) {
                    return true;
                }
                theta.truncate(depth);
            }
            false
        }
    }
}

/// A substitution under which every positive literal of `c` is in `atoms`
/// and every negated literal is not, if one exists.
pub fn find_violation(atoms: &AtomSet, c: &IntegrityConstraint) -> Option<Substitution> {
    let positives: Vec<&Atom> = c.body.iter().filter(|l| !l.negated).map(|l| &l.atom).collect();
    let negatives: Vec<&Atom> = c.body.iter().filter(|l| l.negated).map(|l| &l.atom).collect();
    let mut theta = Bindings::new();
    search(&positives, &negatives, atoms, &mut theta)
        .then(|| theta.into_iter().map(|(v, c)| (v.to_string(), c.clone())).collect())
}

pub fn violates(atoms: &AtomSet, c: &IntegrityConstraint) -> bool {
    find_violation(atoms, c).is_some()
}

fn record_arity(
    arities: &mut HashMap<String, usize>,
    predicate: &str,
    arity: usize,
) -> Result<(), EvalError> {
    match arities.get(predicate) {
        Some(&first) if first != arity => Err(EvalError::InconsistentArity {
            predicate: predicate.to_string(),
            first,
            second: arity,
        }),
        Some(_) => Ok(()),
        None => {
            arities.insert(predicate.to_string(), arity);
            Ok(())
        }
    }
}

/// Every predicate must be used with a single arity across rules and atoms.
pub fn check_arities(atoms: &AtomSet, rules: &RuleSet) -> Result<(), EvalError> {
    let mut arities = HashMap::new();
    for f in &rules.facts {
        record_arity(&mut arities, &f.predicate, f.arity())?;
    }
    for c in &rules.constraints {
        for l in &c.body {
            record_arity(&mut arities, &l.atom.predicate, l.atom.args.len())?;
        }
    }
    for a in atoms.iter() {
        record_arity(&mut arities, &a.predicate, a.arity())?;
    }
    Ok(())
}

/// All constraints violated by `atoms` together with the rule set's facts.
/// An empty result means the atoms describe an admissible candidate.
pub fn check<'r>(atoms: &AtomSet, rules: &'r RuleSet) -> Result<Vec<&'r IntegrityConstraint>, EvalError> {
    check_arities(atoms, rules)?;
    let owned;
    let atoms = if rules.facts.is_empty() {
        atoms
    } else {
        let mut all = atoms.clone();
        all.extend(rules.facts.iter().cloned());
        owned = all;
        &owned
    };
    Ok(rules.constraints.iter().filter(|c| violates(atoms, c)).collect())
}

pub type Sym = u32;
type Args = SmallVec<[Sym; 3]>;

/// Interned predicates and constants.
#[derive(Debug, Clone, Default)]
pub struct Interner {
    consts: HashMap<Const, Sym>,
    const_names: Vec<Const>,
    preds: HashMap<String, Sym>,
    pred_names: Vec<String>,
}

impl Interner {
    pub fn constant(&mut self, c: &Const) -> Sym {
        if let Some(&id) = self.consts.get(c) {
            return id;
        }
        let id = self.const_names.len() as Sym;
        self.consts.insert(c.clone(), id);
        self.const_names.push(c.clone());
        id
    }

    pub fn symbol(&mut self, s: &str) -> Sym {
        self.constant(&Const::Symbol(s.to_string()))
    }

    pub fn predicate(&mut self, p: &str) -> Sym {
        if let Some(&id) = self.preds.get(p) {
            return id;
        }
        let id = self.pred_names.len() as Sym;
        self.preds.insert(p.to_string(), id);
        self.pred_names.push(p.to_string());
        id
    }

    pub fn lookup_predicate(&self, p: &str) -> Option<Sym> {
        self.preds.get(p).copied()
    }

    pub fn const_name(&self, id: Sym) -> &Const {
        &self.const_names[id as usize]
    }

    pub fn predicate_name(&self, id: Sym) -> &str {
        &self.pred_names[id as usize]
    }

    pub fn ground(&mut self, atom: &GroundAtom) -> (Sym, Args) {
        let pred = self.predicate(&atom.predicate);
        (pred, atom.args.iter().map(|c| self.constant(c)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CTerm {
    Const(Sym),
    Var(u8),
}

#[derive(Debug, Clone)]
struct CLit {
    pred: Sym,
    args: SmallVec<[CTerm; 3]>,
}

#[derive(Debug, Clone)]
struct CConstraint {
    positives: Vec<CLit>,
    negatives: Vec<CLit>,
    vars: usize,
}

/// A rule set compiled for repeated evaluation against many atom sets.
#[derive(Debug, Clone)]
pub struct CompiledRules {
    pub interner: Interner,
    constraints: Vec<CConstraint>,
    facts: Vec<(Sym, Args)>,
}

/// A growable atom set over interned symbols with undo support.
#[derive(Debug, Clone, Default)]
pub struct CompiledAtoms {
    buckets: Vec<Vec<Args>>,
    log: Vec<Sym>,
}

impl CompiledAtoms {
    pub fn insert(&mut self, pred: Sym, args: Args) {
        let p = pred as usize;
        if self.buckets.len() <= p {
            self.buckets.resize_with(p + 1, Vec::new);
        }
        if !self.buckets[p].contains(&args) {
            self.buckets[p].push(args);
            self.log.push(pred);
        }
    }

    pub fn contains(&self, pred: Sym, args: &[Sym]) -> bool {
        self.buckets
            .get(pred as usize)
            .is_some_and(|b| b.iter().any(|a| a.as_slice() == args))
    }

    fn bucket(&self, pred: Sym) -> &[Args] {
        self.buckets.get(pred as usize).map_or(&[], Vec::as_slice)
    }

    /// Current size of the insertion log, for [`CompiledAtoms::truncate`].
    pub fn mark(&self) -> usize {
        self.log.len()
    }

    /// Remove every atom inserted after `mark`.
    pub fn truncate(&mut self, mark: usize) {
        while self.log.len() > mark {
            let pred = self.log.pop().expect("non-empty log");
            self.buckets[pred as usize].pop();
        }
    }
}

fn compile_literal(atom: &Atom, interner: &mut Interner, vars: &mut HashMap<String, u8>) -> CLit {
    CLit {
        pred: interner.predicate(&atom.predicate),
        args: atom
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => {
                    let next = vars.len() as u8;
                    CTerm::Var(*vars.entry(v.clone()).or_insert(next))
                }
                other => CTerm::Const(interner.constant(&other.as_const().expect("constant"))),
            })
            .collect(),
    }
}

impl CompiledRules {
    pub fn compile(rules: &RuleSet) -> CompiledRules {
        let mut interner = Interner::default();
        let facts = rules.facts.iter().map(|f| interner.ground(f)).collect();
        let constraints = rules
            .constraints
            .iter()
            .map(|c| {
                let mut vars: HashMap<String, u8> = HashMap::new();
                let positives = c
                    .body
                    .iter()
                    .filter(|l| !l.negated)
                    .map(|l| compile_literal(&l.atom, &mut interner, &mut vars))
                    .collect();
                let negatives = c
                    .body
                    .iter()
                    .filter(|l| l.negated)
                    .map(|l| compile_literal(&l.atom, &mut interner, &mut vars))
                    .collect();
                CConstraint {
                    positives,
                    negatives,
                    vars: vars.len(),
                }
            })
            .collect();
        CompiledRules {
            interner,
            constraints,
            facts,
        }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// A fresh atom set holding the rule set's facts.
    pub fn base_atoms(&self) -> CompiledAtoms {
        let mut atoms = CompiledAtoms::default();
        for (p, args) in &self.facts {
            atoms.insert(*p, args.clone());
        }
        atoms
    }

    /// Indices of constraints that can still fire given fixed context atoms.
    ///
    /// A constraint is dropped when it has a ground positive literal over a
    /// context predicate that is absent from `context`, or a ground negated
    /// literal over a context predicate that is present.
    pub fn relevant(&self, context: &CompiledAtoms, context_preds: &[Sym]) -> Vec<usize> {
        let ground = |l: &CLit| -> Option<Args> {
            l.args
                .iter()
                .map(|t| match t {
                    CTerm::Const(c) => Some(*c),
                    CTerm::Var(_) => None,
                })
                .collect()
        };
        (0..self.constraints.len())
            .filter(|&i| {
                let c = &self.constraints[i];
                let dead_pos = c.positives.iter().any(|l| {
                    context_preds.contains(&l.pred)
                        && ground(l).is_some_and(|a| !context.contains(l.pred, &a))
                });
                let dead_neg = c.negatives.iter().any(|l| {
                    context_preds.contains(&l.pred) && ground(l).is_some_and(|a| context.contains(l.pred, &a))
                });
                !dead_pos && !dead_neg
            })
            .collect()
    }

    /// Whether constraint `index` is violated by `atoms` with every negated
    /// atom in the witness satisfying `closed`. With `closed` always true
    /// this is plain violation.
    pub fn violated_by<F>(&self, index: usize, atoms: &CompiledAtoms, closed: &F) -> bool
    where
        F: Fn(Sym, &[Sym]) -> bool,
    {
        let c = &self.constraints[index];
        let mut theta: SmallVec<[Option<Sym>; 8]> = SmallVec::from_elem(None, c.vars);
        Self::search(&c.positives, &c.negatives, atoms, &mut theta, closed)
    }

    fn search<F>(
        positives: &[CLit],
        negatives: &[CLit],
        atoms: &CompiledAtoms,
        theta: &mut SmallVec<[Option<Sym>; 8]>,
        closed: &F,
    ) -> bool
    where
        F: Fn(Sym, &[Sym]) -> bool,
    {
        let Some((first, rest)) = positives.split_first() else {
            return negatives.iter().all(|n| {
                let args: Args = n
                    .args
                    .iter()
                    .map(|t| match *t {
                        CTerm::Const(c) => c,
                        CTerm::Var(v) => theta[v as usize].expect("safe constraint"),
                    })
                    .collect();
                !atoms.contains(n.pred, &args) && closed(n.pred, &args)
            });
        };
        'candidates: for cand in atoms.bucket(first.pred) {
            if cand.len() != first.args.len() {
                continue;
            }
            let mut newly: SmallVec<[u8; 4]> = SmallVec::new();
            for (t, &c) in first.args.iter().zip(cand.iter()) {
                match *t {
                    CTerm::Const(k) if k != c => {
                        for v in newly.drain(..) {
                            theta[v as usize] = None;
                        }
                        continue 'candidates;
                    }
                    CTerm::Const(_) => {}
                    CTerm::Var(v) => match theta[v as usize] {
                        Some(bound) if bound != c => {
                            for v in newly.drain(..) {
                                theta[v as usize] = None;
                            }
                            continue 'candidates;
                        }
                        Some(_) => {}
                        None => {
                            theta[v as usize] = Some(c);
                            newly.push(v);
                        }
                    },
                }
            }
            if Self::search(rest, negatives, atoms, theta, closed) {
                return true;
            }
            for v in newly {
                theta[v as usize] = None;
            }
        }
        false
    }

    /// Indices of all violated constraints.
    pub fn violations(&self, atoms: &CompiledAtoms) -> Vec<usize> {
        (0..self.constraints.len())
            .filter(|&i| self.violated_by(i, atoms, &|_, _| true))
            .collect()
    }
}
