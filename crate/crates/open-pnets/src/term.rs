//! Term algebra: sorted terms, predicates, and parallel substitutions.
//!
//! The action/data algebra is left open: constructors are free (injective,
//! pairwise distinct) symbols declared by the surrounding system. The only
//! interpreted sort is `Nat`, and the only arithmetic form is a term plus a
//! constant, which is all the semantics ever produces (`ec+1`, `s_ec+1+n`).
//!
//! Substitutions are *parallel* assignments. Their composition `⊗` satisfies
//! `t{p1 ⊗ p2} = (t{p1}){p2}`: the left substitution is applied to the term
//! first, so when substitutions model state updates, the right operand is
//! the update that happened *first*.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// The four sorts of the algebra. `Data` is uninterpreted (equality only),
/// `Nat` is non-negative integers with `+constant`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Sort {
    Data,
    Nat,
    Bool,
    Action,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Data => write!(f, "Data"),
            Sort::Nat => write!(f, "Nat"),
            Sort::Bool => write!(f, "Bool"),
            Sort::Action => write!(f, "Action"),
        }
    }
}

/// Where a variable comes from. Origins keep clones of the same source name
/// distinguishable and give generated obligations traceable names.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum VarOrigin {
    /// Global variable of a pLTS.
    State { plts: String },
    /// Input variable (`?x`) of a pLTS transition.
    Input { transition: String },
    /// Variable scoped to a synchronisation vector.
    Vector { vector: String },
    /// Placeholder for the action of a hole in an open transition.
    HoleAction { hole: String },
    /// Introduced by freshening or by the solver.
    Fresh,
}

impl VarOrigin {
    fn tag(&self) -> Option<&str> {
        match self {
            VarOrigin::State { .. } => None,
            VarOrigin::Input { transition } => Some(transition),
            VarOrigin::Vector { vector } => Some(vector),
            VarOrigin::HoleAction { hole } => Some(hole),
            VarOrigin::Fresh => Some("fresh"),
        }
    }
}

/// A sorted variable. Identity is the whole record: two variables with the
/// same base name but different origins or clone counters are distinct.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Variable {
    pub name: String,
    pub sort: Sort,
    pub origin: VarOrigin,
    /// 0 for the declared variable, >0 for freshened clones.
    pub clone_id: u64,
}

impl Variable {
    pub fn state(name: impl Into<String>, sort: Sort, plts: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            sort,
            origin: VarOrigin::State { plts: plts.into() },
            clone_id: 0,
        }
    }

    pub fn input(name: impl Into<String>, sort: Sort, transition: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            sort,
            origin: VarOrigin::Input {
                transition: transition.into(),
            },
            clone_id: 0,
        }
    }

    pub fn vector(name: impl Into<String>, sort: Sort, vector: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            sort,
            origin: VarOrigin::Vector {
                vector: vector.into(),
            },
            clone_id: 0,
        }
    }

    pub fn hole_action(name: impl Into<String>, hole: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            sort: Sort::Action,
            origin: VarOrigin::HoleAction { hole: hole.into() },
            clone_id: 0,
        }
    }

    pub fn fresh(name: impl Into<String>, sort: Sort, clone_id: u64) -> Self {
        Variable {
            name: name.into(),
            sort,
            origin: VarOrigin::Fresh,
            clone_id,
        }
    }

    pub fn is_state(&self) -> bool {
        matches!(self.origin, VarOrigin::State { .. })
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.origin.tag(), self.clone_id) {
            (None, 0) => write!(f, "{}", self.name),
            (None, c) => write!(f, "{}#{}", self.name, c),
            (Some(tag), 0) => write!(f, "{}@{}", self.name, tag),
            (Some(tag), c) => write!(f, "{}@{}#{}", self.name, tag, c),
        }
    }
}

/// The canonical non-observable action. `$tau`, `tau()` and
/// `synchro($tau)` in the surface language all normalise to this.
pub const TAU: &str = "tau";

/// A sorted term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Term {
    Var(Variable),
    Nat(u64),
    /// Application of a free constructor.
    Ctor {
        name: String,
        sort: Sort,
        args: Vec<Term>,
    },
    /// A `Nat` term plus a constant. Kept right-normalised: the inner term
    /// is never itself `Plus` or a literal.
    Plus(Box<Term>, u64),
    /// An input-marked variable `?x`; only valid inside pLTS action labels.
    Input(Variable),
}

impl Term {
    pub fn var(v: Variable) -> Term {
        Term::Var(v)
    }

    pub fn ctor(name: impl Into<String>, sort: Sort, args: Vec<Term>) -> Term {
        Term::Ctor {
            name: name.into(),
            sort,
            args,
        }
    }

    pub fn action(name: impl Into<String>, args: Vec<Term>) -> Term {
        Term::ctor(name, Sort::Action, args)
    }

    pub fn tau() -> Term {
        Term::action(TAU, vec![])
    }

    pub fn is_tau(&self) -> bool {
        matches!(self, Term::Ctor { name, args, .. } if name == TAU && args.is_empty())
    }

    /// `t + k`, folding literals and collapsing `Plus` chains.
    pub fn plus(t: Term, k: u64) -> Term {
        match t {
            Term::Nat(n) => Term::Nat(n + k),
            Term::Plus(inner, a) => Term::plus(*inner, a + k),
            other if k == 0 => other,
            other => Term::Plus(Box::new(other), k),
        }
    }

    pub fn sort(&self) -> Sort {
        match self {
            Term::Var(v) | Term::Input(v) => v.sort,
            Term::Nat(_) | Term::Plus(_, _) => Sort::Nat,
            Term::Ctor { sort, .. } => *sort,
        }
    }

    /// All variables occurring in the term, input-marked ones included.
    pub fn vars(&self) -> BTreeSet<Variable> {
        let mut set = BTreeSet::new();
        self.collect_vars(&mut set, true);
        set
    }

    /// Variables that occur free, i.e. not under an input marker.
    pub fn free_vars(&self) -> BTreeSet<Variable> {
        let mut set = BTreeSet::new();
        self.collect_vars(&mut set, false);
        set
    }

    fn collect_vars(&self, set: &mut BTreeSet<Variable>, include_inputs: bool) {
        match self {
            Term::Var(v) => {
                set.insert(v.clone());
            }
            Term::Input(v) => {
                if include_inputs {
                    set.insert(v.clone());
                }
            }
            Term::Nat(_) => {}
            Term::Plus(t, _) => t.collect_vars(set, include_inputs),
            Term::Ctor { args, .. } => {
                for a in args {
                    a.collect_vars(set, include_inputs);
                }
            }
        }
    }

    /// The input variables of an action term, markers stripped.
    pub fn input_vars(&self) -> BTreeSet<Variable> {
        let mut set = BTreeSet::new();
        match self {
            Term::Input(v) => {
                set.insert(v.clone());
            }
            Term::Ctor { args, .. } => {
                for a in args {
                    set.extend(a.input_vars());
                }
            }
            Term::Plus(t, _) => set.extend(t.input_vars()),
            _ => {}
        }
        set
    }

    /// Replace every `?x` by a plain occurrence of `x` (the `Sort` operator
    /// on pLTSs does this before exposing action signatures).
    pub fn strip_input_markers(&self) -> Term {
        match self {
            Term::Input(v) => Term::Var(v.clone()),
            Term::Ctor { name, sort, args } => Term::Ctor {
                name: name.clone(),
                sort: *sort,
                args: args.iter().map(|a| a.strip_input_markers()).collect(),
            },
            Term::Plus(t, k) => Term::Plus(Box::new(t.strip_input_markers()), *k),
            other => other.clone(),
        }
    }

    /// Top constructor name and arity, if the term is a constructor
    /// application.
    pub fn ctor_head(&self) -> Option<(&str, usize)> {
        match self {
            Term::Ctor { name, args, .. } => Some((name, args.len())),
            _ => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Input(v) => write!(f, "?{v}"),
            Term::Nat(n) => write!(f, "{n}"),
            Term::Plus(t, k) => write!(f, "{t}+{k}"),
            Term::Ctor { name, args, .. } => {
                if args.is_empty() {
                    write!(f, "{name}")
                } else {
                    write!(f, "{name}(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")
                }
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TermError {
    #[error("input variable {var} occurs more than once in action {action}")]
    NonLinearInput { var: String, action: String },
    #[error("substitution already binds {0}")]
    DuplicateBinding(String),
    #[error("cannot bind {var}:{var_sort} to a term of sort {term_sort}")]
    SortMismatch {
        var: String,
        var_sort: Sort,
        term_sort: Sort,
    },
    #[error("substitution domains overlap on {0}")]
    OverlappingDomains(String),
}

/// Checks the linearity constraint on input variables: `?x` may occur only
/// once in an action term, and `x` must not occur elsewhere in it.
pub fn check_input_linearity(action: &Term) -> Result<(), TermError> {
    let mut seen = BTreeSet::new();
    let mut check = Vec::new();
    fn walk(t: &Term, seen: &mut BTreeSet<Variable>, err: &mut Option<Variable>) {
        if err.is_some() {
            return;
        }
        match t {
            Term::Input(v) => {
                if !seen.insert(v.clone()) {
                    *err = Some(v.clone());
                }
            }
            Term::Ctor { args, .. } => {
                for a in args {
                    walk(a, seen, err);
                }
            }
            Term::Plus(t, _) => walk(t, seen, err),
            _ => {}
        }
    }
    let mut dup = None;
    walk(action, &mut seen, &mut dup);
    if let Some(v) = dup {
        return Err(TermError::NonLinearInput {
            var: v.to_string(),
            action: action.to_string(),
        });
    }
    // An input variable must not appear unmarked in the same action term.
    check.extend(action.free_vars().intersection(&seen).cloned());
    if let Some(v) = check.first() {
        return Err(TermError::NonLinearInput {
            var: v.to_string(),
            action: action.to_string(),
        });
    }
    Ok(())
}

/// First-order predicates over terms, with ∀/∃ prefixes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Predicate {
    True,
    False,
    Eq(Term, Term),
    Neq(Term, Term),
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Not(Box<Predicate>),
    Forall(Vec<Variable>, Box<Predicate>),
    Exists(Vec<Variable>, Box<Predicate>),
}

impl Predicate {
    /// Conjunction with unit laws and flattening.
    pub fn and(ps: Vec<Predicate>) -> Predicate {
        let mut out = Vec::new();
        for p in ps {
            match p {
                Predicate::True => {}
                Predicate::False => return Predicate::False,
                Predicate::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Predicate::True,
            1 => out.pop().unwrap(),
            _ => Predicate::And(out),
        }
    }

    /// Disjunction with unit laws and flattening.
    pub fn or(ps: Vec<Predicate>) -> Predicate {
        let mut out = Vec::new();
        for p in ps {
            match p {
                Predicate::False => {}
                Predicate::True => return Predicate::True,
                Predicate::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Predicate::False,
            1 => out.pop().unwrap(),
            _ => Predicate::Or(out),
        }
    }

    pub fn not(p: Predicate) -> Predicate {
        match p {
            Predicate::True => Predicate::False,
            Predicate::False => Predicate::True,
            Predicate::Not(inner) => *inner,
            Predicate::Eq(a, b) => Predicate::Neq(a, b),
            Predicate::Neq(a, b) => Predicate::Eq(a, b),
            other => Predicate::Not(Box::new(other)),
        }
    }

    pub fn eq(a: Term, b: Term) -> Predicate {
        debug_assert_eq!(a.sort(), b.sort(), "equating {a} with {b}");
        Predicate::Eq(a, b)
    }

    pub fn neq(a: Term, b: Term) -> Predicate {
        debug_assert_eq!(a.sort(), b.sort(), "separating {a} from {b}");
        Predicate::Neq(a, b)
    }

    pub fn implies(hyp: Predicate, conc: Predicate) -> Predicate {
        match hyp {
            Predicate::True => conc,
            Predicate::False => Predicate::True,
            h => Predicate::or(vec![Predicate::not(h), conc]),
        }
    }

    pub fn forall(vars: Vec<Variable>, p: Predicate) -> Predicate {
        if vars.is_empty() {
            p
        } else if let Predicate::Forall(mut inner_vars, body) = p {
            let mut vs = vars;
            vs.append(&mut inner_vars);
            Predicate::Forall(vs, body)
        } else {
            Predicate::Forall(vars, Box::new(p))
        }
    }

    pub fn exists(vars: Vec<Variable>, p: Predicate) -> Predicate {
        if vars.is_empty() {
            p
        } else if let Predicate::Exists(mut inner_vars, body) = p {
            let mut vs = vars;
            vs.append(&mut inner_vars);
            Predicate::Exists(vs, body)
        } else {
            Predicate::Exists(vars, Box::new(p))
        }
    }

    /// Free (unbound, non-input-marked) variables.
    pub fn free_vars(&self) -> BTreeSet<Variable> {
        let mut set = BTreeSet::new();
        self.collect_free(&mut BTreeSet::new(), &mut set);
        set
    }

    fn collect_free(&self, bound: &mut BTreeSet<Variable>, out: &mut BTreeSet<Variable>) {
        match self {
            Predicate::True | Predicate::False => {}
            Predicate::Eq(a, b) | Predicate::Neq(a, b) => {
                for v in a.free_vars().union(&b.free_vars()) {
                    if !bound.contains(v) {
                        out.insert(v.clone());
                    }
                }
            }
            Predicate::And(ps) | Predicate::Or(ps) => {
                for p in ps {
                    p.collect_free(bound, out);
                }
            }
            Predicate::Not(p) => p.collect_free(bound, out),
            Predicate::Forall(vs, p) | Predicate::Exists(vs, p) => {
                let added: Vec<_> = vs.iter().filter(|v| bound.insert((*v).clone())).cloned().collect();
                p.collect_free(bound, out);
                for v in added {
                    bound.remove(&v);
                }
            }
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::True => write!(f, "true"),
            Predicate::False => write!(f, "false"),
            Predicate::Eq(a, b) => write!(f, "{a} = {b}"),
            Predicate::Neq(a, b) => write!(f, "{a} != {b}"),
            Predicate::And(ps) => {
                write!(f, "(")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        write!(f, " && ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
            Predicate::Or(ps) => {
                write!(f, "(")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        write!(f, " || ")?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
            Predicate::Not(p) => write!(f, "!({p})"),
            Predicate::Forall(vs, p) => {
                write!(f, "forall ")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}:{}", v.sort)?;
                }
                write!(f, ". {p}")
            }
            Predicate::Exists(vs, p) => {
                write!(f, "exists ")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}:{}", v.sort)?;
                }
                write!(f, ". {p}")
            }
        }
    }
}

/// A parallel substitution: a finite map from variables to terms, applied
/// simultaneously. Identity bindings are dropped on insertion.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Substitution {
    bindings: BTreeMap<Variable, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Variable, Term)>) -> Result<Self, TermError> {
        let mut s = Substitution::new();
        for (v, t) in pairs {
            s.bind(v, t)?;
        }
        Ok(s)
    }

    pub fn bind(&mut self, var: Variable, term: Term) -> Result<(), TermError> {
        if var.sort != term.sort() {
            return Err(TermError::SortMismatch {
                var: var.to_string(),
                var_sort: var.sort,
                term_sort: term.sort(),
            });
        }
        if term == Term::Var(var.clone()) {
            return Ok(());
        }
        if self.bindings.contains_key(&var) {
            return Err(TermError::DuplicateBinding(var.to_string()));
        }
        self.bindings.insert(var, term);
        Ok(())
    }

    pub fn singleton(var: Variable, term: Term) -> Result<Self, TermError> {
        let mut s = Substitution::new();
        s.bind(var, term)?;
        Ok(s)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn get(&self, v: &Variable) -> Option<&Term> {
        self.bindings.get(v)
    }

    pub fn domain(&self) -> impl Iterator<Item = &Variable> {
        self.bindings.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> {
        self.bindings.iter()
    }

    /// Variables free in the right-hand sides.
    pub fn range_vars(&self) -> BTreeSet<Variable> {
        self.bindings.values().flat_map(|t| t.free_vars()).collect()
    }

    /// Applies the substitution to a term. All bindings are applied in
    /// parallel; input-marked occurrences are binders and stay untouched.
    pub fn apply(&self, t: &Term) -> Term {
        if self.bindings.is_empty() {
            return t.clone();
        }
        match t {
            Term::Var(v) => self.bindings.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Input(_) | Term::Nat(_) => t.clone(),
            Term::Plus(inner, k) => Term::plus(self.apply(inner), *k),
            Term::Ctor { name, sort, args } => Term::Ctor {
                name: name.clone(),
                sort: *sort,
                args: args.iter().map(|a| self.apply(a)).collect(),
            },
        }
    }

    /// Applies the substitution to a predicate, renaming bound variables
    /// when they would capture a free variable of a replacement term.
    pub fn apply_pred(&self, p: &Predicate) -> Predicate {
        if self.bindings.is_empty() {
            return p.clone();
        }
        match p {
            Predicate::True => Predicate::True,
            Predicate::False => Predicate::False,
            Predicate::Eq(a, b) => Predicate::Eq(self.apply(a), self.apply(b)),
            Predicate::Neq(a, b) => Predicate::Neq(self.apply(a), self.apply(b)),
            Predicate::And(ps) => Predicate::And(ps.iter().map(|q| self.apply_pred(q)).collect()),
            Predicate::Or(ps) => Predicate::Or(ps.iter().map(|q| self.apply_pred(q)).collect()),
            Predicate::Not(q) => Predicate::Not(Box::new(self.apply_pred(q))),
            Predicate::Forall(vs, body) => {
                let (vs, body, sub) = self.under_binders(vs, body);
                Predicate::Forall(vs, Box::new(sub.apply_pred(&body)))
            }
            Predicate::Exists(vs, body) => {
                let (vs, body, sub) = self.under_binders(vs, body);
                Predicate::Exists(vs, Box::new(sub.apply_pred(&body)))
            }
        }
    }

    /// Prepares a binder for substitution: drops shadowed bindings and
    /// alpha-renames binder variables that would capture replacements.
    fn under_binders(
        &self,
        binders: &[Variable],
        body: &Predicate,
    ) -> (Vec<Variable>, Predicate, Substitution) {
        let mut remaining = self.clone();
        for v in binders {
            remaining.bindings.remove(v);
        }
        let dangerous: BTreeSet<Variable> = remaining.range_vars();
        let mut new_binders = Vec::with_capacity(binders.len());
        let mut renaming = Substitution::new();
        let mut avoid: BTreeSet<Variable> = body.free_vars();
        avoid.extend(dangerous.iter().cloned());
        avoid.extend(remaining.bindings.keys().cloned());
        for v in binders {
            if dangerous.contains(v) {
                let mut fresh = v.clone();
                loop {
                    fresh.clone_id += 1;
                    if !avoid.contains(&fresh) {
                        break;
                    }
                }
                avoid.insert(fresh.clone());
                renaming
                    .bind(v.clone(), Term::Var(fresh.clone()))
                    .expect("renaming binds a variable to a variable of the same sort");
                new_binders.push(fresh);
            } else {
                new_binders.push(v.clone());
            }
        }
        let body = if renaming.is_empty() {
            body.clone()
        } else {
            renaming.apply_pred(body)
        };
        (new_binders, body, remaining)
    }

    /// Applies the substitution to the right-hand sides of another
    /// substitution (domain unchanged, identities pruned).
    pub fn apply_subst(&self, s: &Substitution) -> Substitution {
        let mut out = Substitution::new();
        for (v, t) in &s.bindings {
            let t = self.apply(t);
            if t != Term::Var(v.clone()) {
                out.bindings.insert(v.clone(), t);
            }
        }
        out
    }

    /// Composition `outer ⊗ inner`: for every term `t`,
    /// `t{outer ⊗ inner} = (t{outer}){inner}`. As a state update, `inner`
    /// is the update performed first. The result is the outer bindings with
    /// `inner` applied inside them, plus the inner bindings whose domain is
    /// not already bound by `outer`.
    pub fn compose(outer: &Substitution, inner: &Substitution) -> Substitution {
        let mut out = inner.apply_subst(outer);
        for (v, t) in &inner.bindings {
            if !outer.bindings.contains_key(v) {
                out.bindings.insert(v.clone(), t.clone());
            }
        }
        out
    }

    /// Disjoint union `⊎`; errors if the domains overlap.
    pub fn union_disjoint(a: &Substitution, b: &Substitution) -> Result<Substitution, TermError> {
        let mut out = a.clone();
        for (v, t) in &b.bindings {
            if out.bindings.contains_key(v) {
                return Err(TermError::OverlappingDomains(v.to_string()));
            }
            out.bindings.insert(v.clone(), t.clone());
        }
        Ok(out)
    }

    pub fn restrict<F: Fn(&Variable) -> bool>(&self, keep: F) -> Substitution {
        Substitution {
            bindings: self
                .bindings
                .iter()
                .filter(|(v, _)| keep(v))
                .map(|(v, t)| (v.clone(), t.clone()))
                .collect(),
        }
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (v, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v} <- {t}")?;
        }
        write!(f, ")")
    }
}

/// A renaming produced by freshening, kept for traceability.
pub type Renaming = BTreeMap<Variable, Variable>;

/// Source of globally unique clone counters. One freshener is confined to a
/// single derivation pass; everything it touches stays immutable afterwards.
#[derive(Debug, Default)]
pub struct Freshener {
    next: u64,
}

impl Freshener {
    pub fn new() -> Self {
        Freshener { next: 0 }
    }

    pub fn next_id(&mut self) -> u64 {
        self.next += 1;
        self.next
    }

    pub fn clone_var(&mut self, v: &Variable) -> Variable {
        let mut c = v.clone();
        c.clone_id = self.next_id();
        c
    }

    pub fn fresh(&mut self, name: impl Into<String>, sort: Sort) -> Variable {
        Variable::fresh(name, sort, self.next_id())
    }

    /// Freshens, in a term, every variable selected by `select`, recording
    /// the renaming. The same source variable is renamed consistently.
    pub fn freshen_term<F: Fn(&Variable) -> bool>(
        &mut self,
        t: &Term,
        select: &F,
        renaming: &mut Renaming,
    ) -> Term {
        match t {
            Term::Var(v) => Term::Var(self.renamed(v, select, renaming)),
            Term::Input(v) => Term::Input(self.renamed(v, select, renaming)),
            Term::Nat(n) => Term::Nat(*n),
            Term::Plus(inner, k) => {
                Term::Plus(Box::new(self.freshen_term(inner, select, renaming)), *k)
            }
            Term::Ctor { name, sort, args } => Term::Ctor {
                name: name.clone(),
                sort: *sort,
                args: args
                    .iter()
                    .map(|a| self.freshen_term(a, select, renaming))
                    .collect(),
            },
        }
    }

    pub fn freshen_pred<F: Fn(&Variable) -> bool>(
        &mut self,
        p: &Predicate,
        select: &F,
        renaming: &mut Renaming,
    ) -> Predicate {
        match p {
            Predicate::True => Predicate::True,
            Predicate::False => Predicate::False,
            Predicate::Eq(a, b) => Predicate::Eq(
                self.freshen_term(a, select, renaming),
                self.freshen_term(b, select, renaming),
            ),
            Predicate::Neq(a, b) => Predicate::Neq(
                self.freshen_term(a, select, renaming),
                self.freshen_term(b, select, renaming),
            ),
            Predicate::And(ps) => Predicate::And(
                ps.iter()
                    .map(|q| self.freshen_pred(q, select, renaming))
                    .collect(),
            ),
            Predicate::Or(ps) => Predicate::Or(
                ps.iter()
                    .map(|q| self.freshen_pred(q, select, renaming))
                    .collect(),
            ),
            Predicate::Not(q) => Predicate::Not(Box::new(self.freshen_pred(q, select, renaming))),
            Predicate::Forall(vs, body) => {
                let vs: Vec<_> = vs.iter().map(|v| self.renamed(v, select, renaming)).collect();
                Predicate::Forall(vs, Box::new(self.freshen_pred(body, select, renaming)))
            }
            Predicate::Exists(vs, body) => {
                let vs: Vec<_> = vs.iter().map(|v| self.renamed(v, select, renaming)).collect();
                Predicate::Exists(vs, Box::new(self.freshen_pred(body, select, renaming)))
            }
        }
    }

    /// Freshens right-hand sides of a substitution; the domain is left
    /// alone (it names the state variables being assigned).
    pub fn freshen_subst_range<F: Fn(&Variable) -> bool>(
        &mut self,
        s: &Substitution,
        select: &F,
        renaming: &mut Renaming,
    ) -> Substitution {
        let mut out = Substitution::new();
        for (v, t) in s.iter() {
            let t = self.freshen_term(t, select, renaming);
            if t != Term::Var(v.clone()) {
                out.bindings.insert(v.clone(), t);
            }
        }
        out
    }

    fn renamed<F: Fn(&Variable) -> bool>(
        &mut self,
        v: &Variable,
        select: &F,
        renaming: &mut Renaming,
    ) -> Variable {
        if !select(v) {
            return v.clone();
        }
        if let Some(r) = renaming.get(v) {
            return r.clone();
        }
        let r = self.clone_var(v);
        renaming.insert(v.clone(), r.clone());
        r
    }
}

/// Canonical alpha-renaming printer. State variables keep their names;
/// every other variable is renamed `_v0, _v1, …` in order of first
/// occurrence, shared across all components fed to the same canonicalizer.
/// Two structures are alpha-equivalent iff their canonical keys match.
#[derive(Debug, Default)]
pub struct Canonicalizer {
    names: BTreeMap<Variable, String>,
    next: usize,
}

impl Canonicalizer {
    pub fn new() -> Self {
        Canonicalizer::default()
    }

    fn name_of(&mut self, v: &Variable) -> String {
        if v.is_state() {
            return v.name.clone();
        }
        if let Some(n) = self.names.get(v) {
            return n.clone();
        }
        let n = format!("_v{}", self.next);
        self.next += 1;
        self.names.insert(v.clone(), n.clone());
        n
    }

    pub fn term(&mut self, t: &Term) -> String {
        match t {
            Term::Var(v) => self.name_of(v),
            Term::Input(v) => format!("?{}", self.name_of(v)),
            Term::Nat(n) => n.to_string(),
            Term::Plus(inner, k) => format!("{}+{}", self.term(inner), k),
            Term::Ctor { name, args, .. } => {
                if args.is_empty() {
                    name.clone()
                } else {
                    let args: Vec<_> = args.iter().map(|a| self.term(a)).collect();
                    format!("{}({})", name, args.join(", "))
                }
            }
        }
    }

    pub fn pred(&mut self, p: &Predicate) -> String {
        match p {
            Predicate::True => "true".into(),
            Predicate::False => "false".into(),
            Predicate::Eq(a, b) => format!("{} = {}", self.term(a), self.term(b)),
            Predicate::Neq(a, b) => format!("{} != {}", self.term(a), self.term(b)),
            Predicate::And(ps) => {
                let parts: Vec<_> = ps.iter().map(|q| self.pred(q)).collect();
                format!("({})", parts.join(" && "))
            }
            Predicate::Or(ps) => {
                let parts: Vec<_> = ps.iter().map(|q| self.pred(q)).collect();
                format!("({})", parts.join(" || "))
            }
            Predicate::Not(q) => format!("!({})", self.pred(q)),
            Predicate::Forall(vs, body) => {
                let vs: Vec<_> = vs.iter().map(|v| self.name_of(v)).collect();
                format!("forall {}. {}", vs.join(", "), self.pred(body))
            }
            Predicate::Exists(vs, body) => {
                let vs: Vec<_> = vs.iter().map(|v| self.name_of(v)).collect();
                format!("exists {}. {}", vs.join(", "), self.pred(body))
            }
        }
    }

    pub fn subst(&mut self, s: &Substitution) -> String {
        let parts: Vec<_> = s
            .iter()
            .map(|(v, t)| format!("{} <- {}", self.name_of(v), self.term(t)))
            .collect();
        format!("({})", parts.join(", "))
    }
}

/// Alpha-equivalence of predicates (state variables fixed, everything else
/// renameable).
pub fn alpha_eq_pred(a: &Predicate, b: &Predicate) -> bool {
    Canonicalizer::new().pred(a) == Canonicalizer::new().pred(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nat_var(name: &str) -> Variable {
        Variable::state(name, Sort::Nat, "S")
    }

    fn data_var(name: &str) -> Variable {
        Variable::state(name, Sort::Data, "S")
    }

    #[test]
    fn plus_chains_normalise() {
        // (s_ec+1){s_ec <- s_ec+1} = s_ec+2
        let s_ec = nat_var("s_ec");
        let t = Term::plus(Term::var(s_ec.clone()), 1);
        let s = Substitution::singleton(s_ec.clone(), Term::plus(Term::var(s_ec.clone()), 1)).unwrap();
        assert_eq!(s.apply(&t), Term::plus(Term::var(s_ec), 2));
    }

    #[test]
    fn empty_substitution_is_identity() {
        let t = Term::action("in", vec![Term::var(data_var("m"))]);
        assert_eq!(Substitution::new().apply(&t), t);
    }

    #[test]
    fn apply_replaces_in_parallel() {
        // in(m){m <- b_msg} = in(b_msg), and swaps do not cascade.
        let m = data_var("m");
        let b_msg = data_var("b_msg");
        let t = Term::action("in", vec![Term::var(m.clone())]);
        let s = Substitution::singleton(m.clone(), Term::var(b_msg.clone())).unwrap();
        assert_eq!(s.apply(&t), Term::action("in", vec![Term::var(b_msg.clone())]));

        let x = data_var("x");
        let y = data_var("y");
        let swap = Substitution::from_pairs(vec![
            (x.clone(), Term::var(y.clone())),
            (y.clone(), Term::var(x.clone())),
        ])
        .unwrap();
        let pair = Term::ctor("pair", Sort::Data, vec![Term::var(x.clone()), Term::var(y.clone())]);
        assert_eq!(
            swap.apply(&pair),
            Term::ctor("pair", Sort::Data, vec![Term::var(y), Term::var(x)])
        );
    }

    #[test]
    fn compose_iterated_increment() {
        // (s_ec <- s_ec+1) ⊗ … n times = (s_ec <- s_ec+n)
        let s_ec = nat_var("s_ec");
        let step =
            Substitution::singleton(s_ec.clone(), Term::plus(Term::var(s_ec.clone()), 1)).unwrap();
        let mut acc = Substitution::new();
        for _ in 0..4 {
            acc = Substitution::compose(&step, &acc);
        }
        assert_eq!(
            acc,
            Substitution::singleton(s_ec.clone(), Term::plus(Term::var(s_ec), 4)).unwrap()
        );
    }

    #[test]
    fn compose_identity_element() {
        let s_ec = nat_var("s_ec");
        let p = Substitution::singleton(s_ec.clone(), Term::plus(Term::var(s_ec), 1)).unwrap();
        let id = Substitution::new();
        assert_eq!(Substitution::compose(&p, &id), p);
        assert_eq!(Substitution::compose(&id, &p), p);
    }

    #[test]
    fn compose_error_loop_effect() {
        // post_4 ⊗ post_456* ⊗ post_6 =
        //   (m_msg <- s_msg, m_ec <- (s_ec+1)+n, s_ec <- (s_ec+1)+n), at n = 2.
        let n = 2;
        let s_msg = data_var("s_msg");
        let s_ec = nat_var("s_ec");
        let m_msg = data_var("m_msg");
        let m_ec = nat_var("m_ec");
        let post_4 = Substitution::from_pairs(vec![
            (m_msg.clone(), Term::var(s_msg.clone())),
            (m_ec.clone(), Term::var(s_ec.clone())),
        ])
        .unwrap();
        let post_456_star =
            Substitution::singleton(s_ec.clone(), Term::plus(Term::var(s_ec.clone()), n)).unwrap();
        let post_6 =
            Substitution::singleton(s_ec.clone(), Term::plus(Term::var(s_ec.clone()), 1)).unwrap();

        let got = Substitution::compose(&Substitution::compose(&post_4, &post_456_star), &post_6);
        let want = Substitution::from_pairs(vec![
            (m_msg, Term::var(s_msg)),
            (m_ec, Term::plus(Term::var(s_ec.clone()), 1 + n)),
            (s_ec.clone(), Term::plus(Term::var(s_ec.clone()), 1 + n)),
        ])
        .unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn identity_bindings_are_pruned() {
        let x = data_var("x");
        let mut s = Substitution::new();
        s.bind(x.clone(), Term::var(x)).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn free_vars_of_action() {
        let m = data_var("m");
        let t = Term::action("p_send", vec![Term::var(m.clone())]);
        assert_eq!(t.free_vars().into_iter().collect::<Vec<_>>(), vec![m]);
    }

    #[test]
    fn input_vars_strip_marker() {
        let msg = Variable::input("msg", Sort::Data, "t0");
        let t = Term::action("in", vec![Term::Input(msg.clone())]);
        assert_eq!(t.input_vars().into_iter().collect::<Vec<_>>(), vec![msg.clone()]);
        assert!(t.free_vars().is_empty());
        assert_eq!(
            t.strip_input_markers(),
            Term::action("in", vec![Term::var(msg)])
        );
    }

    #[test]
    fn bound_vars_are_not_free() {
        // free_vars(forall x. p_a != p_send(x)) = {p_a}
        let x = data_var("x");
        let p_a = Variable::hole_action("p_a", "P");
        let p = Predicate::forall(
            vec![x.clone()],
            Predicate::neq(
                Term::var(p_a.clone()),
                Term::action("p_send", vec![Term::var(x)]),
            ),
        );
        assert_eq!(p.free_vars().into_iter().collect::<Vec<_>>(), vec![p_a]);
    }

    #[test]
    fn substitution_does_not_capture() {
        // (exists x. y = x){y <- x} must rename the binder, not capture.
        let x = data_var("x");
        let y = data_var("y");
        let p = Predicate::exists(
            vec![x.clone()],
            Predicate::eq(Term::var(y.clone()), Term::var(x.clone())),
        );
        let s = Substitution::singleton(y, Term::var(x.clone())).unwrap();
        let q = s.apply_pred(&p);
        match &q {
            Predicate::Exists(vs, body) => {
                assert_ne!(vs[0], x, "binder must have been renamed");
                match body.as_ref() {
                    Predicate::Eq(a, b) => {
                        assert_eq!(a, &Term::var(x.clone()));
                        assert_eq!(b, &Term::var(vs[0].clone()));
                    }
                    other => panic!("unexpected body {other:?}"),
                }
            }
            other => panic!("unexpected shape {other:?}"),
        }
    }

    #[test]
    fn shadowed_bindings_do_not_apply() {
        let x = data_var("x");
        let y = data_var("y");
        let p = Predicate::forall(
            vec![x.clone()],
            Predicate::eq(Term::var(x.clone()), Term::var(x.clone())),
        );
        let s = Substitution::singleton(x, Term::var(y)).unwrap();
        assert_eq!(s.apply_pred(&p), p);
    }

    #[test]
    fn input_linearity_rejected() {
        let msg = Variable::input("msg", Sort::Data, "t0");
        let bad = Term::action(
            "pair",
            vec![Term::Input(msg.clone()), Term::Input(msg.clone())],
        );
        assert!(check_input_linearity(&bad).is_err());
        let also_bad = Term::action("pair", vec![Term::Input(msg.clone()), Term::var(msg)]);
        assert!(check_input_linearity(&also_bad).is_err());
    }

    #[test]
    fn freshening_is_injective_and_traceable() {
        let m = Variable::vector("m", Sort::Data, "SV0");
        let mut fresh = Freshener::new();
        let a = fresh.clone_var(&m);
        let b = fresh.clone_var(&m);
        assert_ne!(a, b);
        assert_eq!(a.to_string(), "m@SV0#1");
        assert_eq!(b.to_string(), "m@SV0#2");
    }

    #[test]
    fn freshening_closed_term_is_identity() {
        let t = Term::action("in", vec![Term::Nat(0)]);
        let mut fresh = Freshener::new();
        let mut renaming = Renaming::new();
        assert_eq!(fresh.freshen_term(&t, &|_| true, &mut renaming), t);
        assert!(renaming.is_empty());
    }

    #[test]
    fn freshening_preserves_alpha_equivalence() {
        let m = Variable::vector("m", Sort::Data, "SV0");
        let p = Predicate::eq(
            Term::action("in", vec![Term::var(m.clone())]).clone(),
            Term::action("in", vec![Term::var(m.clone())]),
        );
        let mut fresh = Freshener::new();
        let mut renaming = Renaming::new();
        let q = fresh.freshen_pred(&p, &|v| !v.is_state(), &mut renaming);
        assert!(alpha_eq_pred(&p, &q));
        assert_ne!(p, q);
    }
}
