use std::fmt;

/// A term in a rule: a constant or a variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// Lowercase identifier, e.g. `bar`.
    Symbol(String),
    /// Quoted string, e.g. `"Miles per Gallon"`.
    Str(String),
    Int(i64),
    /// Uppercase-initial identifier (or leading underscore).
    Var(String),
}

impl Term {
    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_const(&self) -> Option<Const> {
        match self {
            Term::Symbol(s) => Some(Const::Symbol(s.clone())),
            Term::Str(s) => Some(Const::Str(s.clone())),
            Term::Int(i) => Some(Const::Int(*i)),
            Term::Var(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Symbol(s) | Term::Var(s) => f.write_str(s),
            Term::Str(s) => write_quoted(f, s),
            Term::Int(i) => write!(f, "{i}"),
        }
    }
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

/// A ground term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Const {
    Symbol(String),
    Str(String),
    Int(i64),
}

impl Const {
    pub fn sym(s: impl Into<String>) -> Const {
        Const::Symbol(s.into())
    }
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Symbol(s) => f.write_str(s),
            Const::Str(s) => write_quoted(f, s),
            Const::Int(i) => write!(f, "{i}"),
        }
    }
}

impl From<Const> for Term {
    fn from(c: Const) -> Term {
        match c {
            Const::Symbol(s) => Term::Symbol(s),
            Const::Str(s) => Term::Str(s),
            Const::Int(i) => Term::Int(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Atom {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn is_ground(&self) -> bool {
        !self.args.iter().any(Term::is_var)
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            _ => None,
        })
    }

    pub fn to_ground(&self) -> Option<GroundAtom> {
        let args = self.args.iter().map(Term::as_const).collect::<Option<Vec<_>>>()?;
        Some(GroundAtom {
            predicate: self.predicate.clone(),
            args,
        })
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// A variable-free atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<Const>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: Vec<Const>) -> GroundAtom {
        GroundAtom {
            predicate: predicate.into(),
            args,
        }
    }

    /// Shorthand for atoms whose arguments are all symbols.
    pub fn syms(predicate: &str, args: &[&str]) -> GroundAtom {
        GroundAtom::new(predicate, args.iter().map(|a| Const::sym(*a)).collect())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atom = Atom::new(self.predicate.clone(), self.args.iter().cloned().map(Term::from).collect());
        atom.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub atom: Atom,
    pub negated: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Literal {
        Literal {
            atom,
            negated: false,
        }
    }

    pub fn neg(atom: Atom) -> Literal {
        Literal {
            atom,
            negated: true,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            f.write_str("not ")?;
        }
        self.atom.fmt(f)
    }
}

/// Where a statement came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Origin {
    pub source: String,
    pub line: usize,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.source, self.line)
    }
}

/// A headless rule. Its body being satisfiable is a contradiction.
///
/// Equality ignores `origin`.
#[derive(Debug, Clone, Eq)]
pub struct IntegrityConstraint {
    pub body: Vec<Literal>,
    pub origin: Origin,
}

impl PartialEq for IntegrityConstraint {
    fn eq(&self, other: &Self) -> bool {
        self.body == other.body
    }
}

impl std::hash::Hash for IntegrityConstraint {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.body.hash(state)
    }
}

impl IntegrityConstraint {
    /// Variables occurring in negated literals but in no positive literal.
    pub fn unsafe_variables(&self) -> Vec<String> {
        let positive: std::collections::HashSet<&str> = self
            .body
            .iter()
            .filter(|l| !l.negated)
            .flat_map(|l| l.atom.variables())
            .collect();
        let mut out: Vec<String> = Vec::new();
        for v in self.body.iter().filter(|l| l.negated).flat_map(|l| l.atom.variables()) {
            if !positive.contains(v) && !out.iter().any(|o| o == v) {
                out.push(v.to_string());
            }
        }
        out
    }
}

impl fmt::Display for IntegrityConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(":- ")?;
        for (i, l) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}")?;
        }
        f.write_str(".")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleSet {
    pub facts: Vec<GroundAtom>,
    pub constraints: Vec<IntegrityConstraint>,
}

impl RuleSet {
    pub fn is_empty(&self) -> bool {
        self.facts.is_empty() && self.constraints.is_empty()
    }

    /// Append another rule set's statements.
    pub fn extend(&mut self, other: RuleSet) {
        self.facts.extend(other.facts);
        self.constraints.extend(other.constraints);
    }

    pub fn union(mut self, other: RuleSet) -> RuleSet {
        self.extend(other);
        self
    }
}

/// Canonical text: facts first, then constraints, one statement per line.
pub fn format_ruleset(rules: &RuleSet) -> String {
    let mut out = String::new();
    for fact in &rules.facts {
        out.push_str(&fact.to_string());
        out.push_str(".\n");
    }
    for c in &rules.constraints {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}
