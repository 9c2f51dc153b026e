//! Symbolic validity prover. Sound but incomplete: `Proved::Yes` means the
//! formula holds in the free-constructor + Nat(+c) theory; `Proved::No`
//! means this engine could not establish it.
//!
//! Universally quantified variables become rigid constants, existentials
//! become flexible variables solved by unification against the hypothesis
//! state. Hypotheses are absorbed into a triangular binding store with
//! constructor decomposition and Nat offset handling; universally
//! quantified disequality guards (`∀x̄. l ≠ r`) are kept as clauses and used
//! both to close goals and to detect contradictions.

use std::collections::{BTreeMap, BTreeSet};

use crate::term::{Predicate, Sort, Term, VarOrigin, Variable};

use super::{Limits, Signature};

#[derive(Debug, PartialEq, Eq)]
pub enum Proved {
    Yes,
    No,
}

pub fn prove(sig: &Signature, p: &Predicate, limits: Limits) -> Proved {
    let mut prover = Prover {
        sig,
        steps: limits.prover_steps,
        next_var: 0,
    };
    let mut state = State::default();
    if prover.prove_goal(&mut state, p) {
        Proved::Yes
    } else {
        Proved::No
    }
}

/// `∀ vars. lhs ≠ rhs`, stored from hypothesis guards.
#[derive(Debug, Clone)]
struct NeqClause {
    vars: Vec<Variable>,
    lhs: Term,
    rhs: Term,
}

#[derive(Debug, Clone, Default)]
struct State {
    bindings: BTreeMap<Variable, Term>,
    diseqs: Vec<(Term, Term)>,
    clauses: Vec<NeqClause>,
    flexible: BTreeSet<Variable>,
    contradiction: bool,
}

struct Prover<'a> {
    sig: &'a Signature,
    steps: u64,
    next_var: u64,
}

impl<'a> Prover<'a> {
    fn step(&mut self) -> bool {
        if self.steps == 0 {
            return false;
        }
        self.steps -= 1;
        true
    }

    fn fresh_var(&mut self, template: &Variable) -> Variable {
        self.next_var += 1;
        Variable {
            name: template.name.clone(),
            sort: template.sort,
            origin: VarOrigin::Fresh,
            clone_id: 1_000_000 + self.next_var,
        }
    }

    // ---- goal proving ------------------------------------------------

    fn prove_goal(&mut self, s: &mut State, goal: &Predicate) -> bool {
        if !self.step() {
            return false;
        }
        if s.contradiction {
            return true;
        }
        match goal {
            Predicate::True => true,
            Predicate::False => false,
            Predicate::And(ps) => ps.iter().all(|p| self.prove_goal(s, p)),
            Predicate::Or(ps) => self.prove_or(s, ps),
            Predicate::Not(q) => {
                let pushed = nnf_not(q);
                if matches!(pushed, Predicate::Not(_)) {
                    false
                } else {
                    self.prove_goal(s, &pushed)
                }
            }
            Predicate::Eq(a, b) => self.prove_eq(s, a, b),
            Predicate::Neq(a, b) => self.prove_neq(s, a, b),
            Predicate::Forall(vs, body) => {
                // ∀-introduction: fresh rigid constants.
                let mut renaming = crate::term::Substitution::new();
                for v in vs {
                    let fresh = self.fresh_var(v);
                    renaming
                        .bind(v.clone(), Term::Var(fresh))
                        .expect("fresh variable has the binder's sort");
                }
                let body = renaming.apply_pred(body);
                self.prove_goal(s, &body)
            }
            Predicate::Exists(vs, body) => {
                let mut renaming = crate::term::Substitution::new();
                let mut introduced = Vec::new();
                for v in vs {
                    let fresh = self.fresh_var(v);
                    s.flexible.insert(fresh.clone());
                    introduced.push(fresh.clone());
                    renaming
                        .bind(v.clone(), Term::Var(fresh))
                        .expect("fresh variable has the binder's sort");
                }
                let body = renaming.apply_pred(body);
                self.prove_goal(s, &body)
            }
        }
    }

    /// Sequential case analysis for a disjunctive goal: first try each
    /// disjunct on its own, then retry assuming the negation of the
    /// disjuncts already ruled out.
    fn prove_or(&mut self, s: &mut State, ps: &[Predicate]) -> bool {
        for p in ps {
            let saved = s.clone();
            if self.prove_goal(s, p) {
                return true;
            }
            *s = saved;
        }
        let saved = s.clone();
        if self.prove_or_seq(s, ps, 0) {
            return true;
        }
        *s = saved;
        false
    }

    fn prove_or_seq(&mut self, s: &mut State, ps: &[Predicate], i: usize) -> bool {
        if !self.step() {
            return false;
        }
        if i >= ps.len() {
            return false;
        }
        let saved = s.clone();
        if self.prove_goal(s, &ps[i]) {
            return true;
        }
        *s = saved;
        if i + 1 == ps.len() {
            return false;
        }
        let negated = nnf_not(&ps[i]);
        let rest = Predicate::Or(ps[i + 1..].to_vec());
        self.assume_then(s, &[negated], &rest_goal(rest))
    }

    // ---- assumptions --------------------------------------------------

    /// Assumes `assumps` (splitting disjunctions into cases that must all
    /// prove the goal) and then proves `goal`.
    fn assume_then(&mut self, s: &mut State, assumps: &[Predicate], goal: &Predicate) -> bool {
        if !self.step() {
            return false;
        }
        let Some((first, rest)) = assumps.split_first() else {
            return self.prove_goal(s, goal);
        };
        if s.contradiction {
            return true;
        }
        match first {
            Predicate::True => self.assume_then(s, rest, goal),
            Predicate::False => true,
            Predicate::And(ps) => {
                let mut all: Vec<Predicate> = ps.clone();
                all.extend_from_slice(rest);
                self.assume_then(s, &all, goal)
            }
            Predicate::Or(ps) => {
                // Case split: every branch must prove the goal.
                for p in ps {
                    let mut branch = s.clone();
                    let mut all = vec![p.clone()];
                    all.extend_from_slice(rest);
                    if !self.assume_then(&mut branch, &all, goal) {
                        return false;
                    }
                }
                true
            }
            Predicate::Not(q) => {
                let mut all = vec![nnf_not(q)];
                all.extend_from_slice(rest);
                self.assume_then(s, &all, goal)
            }
            Predicate::Eq(a, b) => {
                self.assume_eq(s, a, b);
                self.check_consistency(s);
                self.assume_then(s, rest, goal)
            }
            Predicate::Neq(a, b) => {
                let ra = self.resolve(s, a);
                let rb = self.resolve(s, b);
                if ra == rb {
                    s.contradiction = true;
                } else {
                    s.diseqs.push((ra, rb));
                }
                self.check_consistency(s);
                self.assume_then(s, rest, goal)
            }
            Predicate::Forall(vs, body) => {
                self.assume_clause(s, vs, body);
                self.check_consistency(s);
                self.assume_then(s, rest, goal)
            }
            Predicate::Exists(vs, body) => {
                // Skolemise with fresh rigid constants.
                let mut renaming = crate::term::Substitution::new();
                for v in vs {
                    let fresh = self.fresh_var(v);
                    renaming
                        .bind(v.clone(), Term::Var(fresh))
                        .expect("fresh variable has the binder's sort");
                }
                let mut all = vec![renaming.apply_pred(body)];
                all.extend_from_slice(rest);
                self.assume_then(s, &all, goal)
            }
        }
    }

    fn assume_clause(&mut self, s: &mut State, vars: &[Variable], body: &Predicate) {
        match body {
            Predicate::Neq(l, r) => {
                s.clauses.push(NeqClause {
                    vars: vars.to_vec(),
                    lhs: l.clone(),
                    rhs: r.clone(),
                });
            }
            Predicate::And(ps) => {
                for p in ps {
                    self.assume_clause(s, vars, p);
                }
            }
            Predicate::Forall(inner, b) => {
                let mut vs = vars.to_vec();
                vs.extend(inner.iter().cloned());
                self.assume_clause(s, &vs, b);
            }
            // Other universally quantified hypotheses are dropped, which is
            // sound for proving (fewer hypotheses).
            _ => {}
        }
    }

    fn assume_eq(&mut self, s: &mut State, a: &Term, b: &Term) {
        if s.contradiction || !self.step() {
            return;
        }
        let ra = self.resolve(s, a);
        let rb = self.resolve(s, b);
        if ra == rb {
            return;
        }
        match (&ra, &rb) {
            (
                Term::Ctor {
                    name: na, args: aa, ..
                },
                Term::Ctor {
                    name: nb, args: ab, ..
                },
            ) => {
                if na != nb || aa.len() != ab.len() {
                    s.contradiction = true;
                } else {
                    let pairs: Vec<(Term, Term)> =
                        aa.iter().cloned().zip(ab.iter().cloned()).collect();
                    for (x, y) in &pairs {
                        self.assume_eq(s, x, y);
                    }
                }
            }
            _ => {
                if ra.sort() == Sort::Nat {
                    self.assume_nat_eq(s, &ra, &rb);
                } else if let Term::Var(v) = &ra {
                    self.bind_assume(s, v.clone(), rb);
                } else if let Term::Var(v) = &rb {
                    self.bind_assume(s, v.clone(), ra);
                } else {
                    // e.g. constructor vs literal of another sort
                    s.contradiction = true;
                }
            }
        }
    }

    fn assume_nat_eq(&mut self, s: &mut State, a: &Term, b: &Term) {
        let (ba, ka) = nat_parts(a);
        let (bb, kb) = nat_parts(b);
        match (ba, bb) {
            (None, None) => {
                if ka != kb {
                    s.contradiction = true;
                }
            }
            (Some(x), None) => {
                if kb >= ka {
                    self.bind_nat(s, x, Term::Nat(kb - ka));
                } else {
                    s.contradiction = true;
                }
            }
            (None, Some(y)) => {
                if ka >= kb {
                    self.bind_nat(s, y, Term::Nat(ka - kb));
                } else {
                    s.contradiction = true;
                }
            }
            (Some(x), Some(y)) => {
                if x == y {
                    if ka != kb {
                        s.contradiction = true;
                    }
                } else if ka <= kb {
                    self.bind_nat(s, x, Term::plus(y.clone(), kb - ka));
                } else {
                    self.bind_nat(s, y, Term::plus(x.clone(), ka - kb));
                }
            }
        }
    }

    fn bind_nat(&mut self, s: &mut State, base: &Term, value: Term) {
        match base {
            Term::Var(v) => self.bind_assume(s, v.clone(), value),
            _ => {
                if self.resolve(s, base) != self.resolve(s, &value) {
                    s.contradiction = true;
                }
            }
        }
    }

    fn bind_assume(&mut self, s: &mut State, v: Variable, t: Term) {
        if t.free_vars().contains(&v) {
            // x = f(..x..): no finite solution in a free algebra.
            s.contradiction = true;
            return;
        }
        s.bindings.insert(v, t);
    }

    fn check_consistency(&mut self, s: &mut State) {
        if s.contradiction {
            return;
        }
        let diseqs = s.diseqs.clone();
        for (l, r) in &diseqs {
            if self.resolve(s, l) == self.resolve(s, r) {
                s.contradiction = true;
                return;
            }
        }
        let clauses = s.clauses.clone();
        for c in &clauses {
            let mut flex = BTreeMap::new();
            let lhs = self.resolve(s, &c.lhs);
            let rhs = self.resolve(s, &c.rhs);
            if self.match_equal(s, &lhs, &rhs, &c.vars, &mut flex) {
                // Some instantiation of the clause variables makes the two
                // sides provably equal: the guard is violated.
                s.contradiction = true;
                return;
            }
        }
    }

    // ---- equality goals ------------------------------------------------

    fn prove_eq(&mut self, s: &mut State, a: &Term, b: &Term) -> bool {
        if !self.step() {
            return false;
        }
        let ra = self.resolve(s, a);
        let rb = self.resolve(s, b);
        if ra == rb {
            return true;
        }
        match (&ra, &rb) {
            (
                Term::Ctor {
                    name: na, args: aa, ..
                },
                Term::Ctor {
                    name: nb, args: ab, ..
                },
            ) => {
                if na != nb || aa.len() != ab.len() {
                    return false;
                }
                let aa = aa.clone();
                let ab = ab.clone();
                aa.iter().zip(ab.iter()).all(|(x, y)| self.prove_eq(s, x, y))
            }
            _ => {
                if ra.sort() == Sort::Nat {
                    self.prove_nat_eq(s, &ra, &rb)
                } else {
                    if let Term::Var(v) = &ra {
                        if self.try_bind_flexible(s, v, &rb) {
                            return true;
                        }
                    }
                    if let Term::Var(v) = &rb {
                        if self.try_bind_flexible(s, v, &ra) {
                            return true;
                        }
                    }
                    false
                }
            }
        }
    }

    fn prove_nat_eq(&mut self, s: &mut State, a: &Term, b: &Term) -> bool {
        let (ba, ka) = nat_parts(a);
        let (bb, kb) = nat_parts(b);
        match (ba.cloned(), bb.cloned()) {
            (None, None) => ka == kb,
            (Some(x), None) => kb >= ka && self.try_bind_flexible_term(s, &x, &Term::Nat(kb - ka)),
            (None, Some(y)) => ka >= kb && self.try_bind_flexible_term(s, &y, &Term::Nat(ka - kb)),
            (Some(x), Some(y)) => {
                if x == y {
                    return ka == kb;
                }
                if ka <= kb && self.try_bind_flexible_term(s, &x, &Term::plus(y.clone(), kb - ka)) {
                    return true;
                }
                if kb <= ka && self.try_bind_flexible_term(s, &y, &Term::plus(x, ka - kb)) {
                    return true;
                }
                false
            }
        }
    }

    fn try_bind_flexible_term(&mut self, s: &mut State, base: &Term, value: &Term) -> bool {
        match base {
            Term::Var(v) => self.try_bind_flexible(s, v, value),
            _ => false,
        }
    }

    /// Binds a flexible variable while proving a goal. Rigid variables are
    /// never bound here: an equation on rigid terms must already be
    /// entailed.
    fn try_bind_flexible(&mut self, s: &mut State, v: &Variable, t: &Term) -> bool {
        if !s.flexible.contains(v) {
            return false;
        }
        if t.free_vars().contains(v) {
            return false;
        }
        s.bindings.insert(v.clone(), t.clone());
        // The new binding must not contradict recorded disequalities or
        // clause guards.
        let mut probe = s.clone();
        self.check_consistency(&mut probe);
        if probe.contradiction {
            s.bindings.remove(v);
            return false;
        }
        true
    }

    // ---- disequality goals ----------------------------------------------

    fn prove_neq(&mut self, s: &mut State, a: &Term, b: &Term) -> bool {
        if !self.step() {
            return false;
        }
        let ra = self.resolve(s, a);
        let rb = self.resolve(s, b);
        if ra == rb {
            return false;
        }
        // Structural separation.
        match (&ra, &rb) {
            (
                Term::Ctor {
                    name: na, args: aa, ..
                },
                Term::Ctor {
                    name: nb, args: ab, ..
                },
            ) => {
                if na != nb || aa.len() != ab.len() {
                    return true;
                }
                let aa = aa.clone();
                let ab = ab.clone();
                for (x, y) in aa.iter().zip(ab.iter()) {
                    let saved = s.clone();
                    if self.prove_neq(s, x, y) {
                        return true;
                    }
                    *s = saved;
                }
            }
            _ => {}
        }
        if ra.sort() == Sort::Nat {
            let (ba, ka) = nat_parts(&ra);
            let (bb, kb) = nat_parts(&rb);
            match (ba, bb) {
                (None, None) => return ka != kb,
                (Some(x), None) if kb < ka => {
                    let _ = x;
                    return true; // x + ka >= ka > kb
                }
                (None, Some(y)) if ka < kb => {
                    let _ = y;
                    return true;
                }
                (Some(x), Some(y)) if x == y => return ka != kb,
                _ => {}
            }
        }
        // Asserted disequalities.
        for (l, r) in s.diseqs.clone() {
            let l = self.resolve(s, &l);
            let r = self.resolve(s, &r);
            if (l == ra && r == rb) || (l == rb && r == ra) {
                return true;
            }
        }
        // Universally quantified guards from the hypothesis.
        for c in s.clauses.clone() {
            let mut flex = BTreeMap::new();
            let lhs = self.resolve(s, &c.lhs);
            let rhs = self.resolve(s, &c.rhs);
            if (self.match_against(s, &lhs, &ra, &c.vars, &mut flex)
                && self.match_against(s, &rhs, &rb, &c.vars, &mut flex))
                || {
                    flex.clear();
                    self.match_against(s, &lhs, &rb, &c.vars, &mut flex)
                        && self.match_against(s, &rhs, &ra, &c.vars, &mut flex)
                }
            {
                return true;
            }
        }
        // A flexible variable can be steered away from the other side as
        // long as the sort has at least two inhabitants.
        for (v, other) in [(&ra, &rb), (&rb, &ra)] {
            if let Term::Var(var) = v {
                if s.flexible.contains(var) && self.sig.sort_has_two(var.sort) {
                    let fresh = self.fresh_var(var);
                    s.bindings.insert(var.clone(), Term::Var(fresh.clone()));
                    s.diseqs.push((Term::Var(fresh), (*other).clone()));
                    return true;
                }
            }
        }
        false
    }

    // ---- matching (clause variables flexible, everything else rigid) ----

    /// Can the clause variables be instantiated to make `pattern` equal to
    /// `target` under the current bindings?
    fn match_equal(
        &mut self,
        s: &State,
        lhs: &Term,
        rhs: &Term,
        clause_vars: &[Variable],
        flex: &mut BTreeMap<Variable, Term>,
    ) -> bool {
        // lhs ≈ rhs directly (clause vars may appear on either side).
        self.match_terms(s, lhs, rhs, clause_vars, flex)
    }

    fn match_against(
        &mut self,
        s: &State,
        pattern: &Term,
        target: &Term,
        clause_vars: &[Variable],
        flex: &mut BTreeMap<Variable, Term>,
    ) -> bool {
        self.match_terms(s, pattern, target, clause_vars, flex)
    }

    fn match_terms(
        &mut self,
        s: &State,
        a: &Term,
        b: &Term,
        clause_vars: &[Variable],
        flex: &mut BTreeMap<Variable, Term>,
    ) -> bool {
        let ra = self.resolve_with(s, a, flex);
        let rb = self.resolve_with(s, b, flex);
        if ra == rb {
            return true;
        }
        match (&ra, &rb) {
            (Term::Var(v), other) | (other, Term::Var(v)) if clause_vars.contains(v) => {
                if other.free_vars().contains(v) {
                    return false;
                }
                flex.insert(v.clone(), (*other).clone());
                true
            }
            (
                Term::Ctor {
                    name: na, args: aa, ..
                },
                Term::Ctor {
                    name: nb, args: ab, ..
                },
            ) => {
                if na != nb || aa.len() != ab.len() {
                    return false;
                }
                let pairs: Vec<(Term, Term)> = aa.iter().cloned().zip(ab.iter().cloned()).collect();
                pairs
                    .iter()
                    .all(|(x, y)| self.match_terms(s, x, y, clause_vars, flex))
            }
            (Term::Plus(_, _), _) | (_, Term::Plus(_, _)) | (Term::Nat(_), _) | (_, Term::Nat(_)) => {
                let (ba, ka) = {
                    let (b, k) = nat_parts(&ra);
                    (b.cloned(), k)
                };
                let (bb, kb) = {
                    let (b, k) = nat_parts(&rb);
                    (b.cloned(), k)
                };
                match (&ba, &bb) {
                    (None, None) => ka == kb,
                    (Some(Term::Var(v)), _) if clause_vars.contains(v) && kb >= ka => {
                        let rest = match &bb {
                            None => Term::Nat(kb - ka),
                            Some(base) => Term::plus(base.clone(), kb - ka),
                        };
                        if rest.free_vars().contains(v) {
                            return false;
                        }
                        flex.insert(v.clone(), rest);
                        true
                    }
                    (_, Some(Term::Var(v))) if clause_vars.contains(v) && ka >= kb => {
                        let rest = match &ba {
                            None => Term::Nat(ka - kb),
                            Some(base) => Term::plus(base.clone(), ka - kb),
                        };
                        if rest.free_vars().contains(v) {
                            return false;
                        }
                        flex.insert(v.clone(), rest);
                        true
                    }
                    _ => false,
                }
            }
            _ => false,
        }
    }

    // ---- resolution ------------------------------------------------------

    fn resolve(&self, s: &State, t: &Term) -> Term {
        match t {
            Term::Var(v) => match s.bindings.get(v) {
                Some(bound) => self.resolve(s, &bound.clone()),
                None => t.clone(),
            },
            Term::Input(_) | Term::Nat(_) => t.clone(),
            Term::Plus(inner, k) => Term::plus(self.resolve(s, inner), *k),
            Term::Ctor { name, sort, args } => Term::Ctor {
                name: name.clone(),
                sort: *sort,
                args: args.iter().map(|x| self.resolve(s, x)).collect(),
            },
        }
    }

    fn resolve_with(&self, s: &State, t: &Term, flex: &BTreeMap<Variable, Term>) -> Term {
        match t {
            Term::Var(v) => {
                if let Some(bound) = flex.get(v) {
                    return self.resolve_with(s, &bound.clone(), flex);
                }
                match s.bindings.get(v) {
                    Some(bound) => self.resolve_with(s, &bound.clone(), flex),
                    None => t.clone(),
                }
            }
            Term::Input(_) | Term::Nat(_) => t.clone(),
            Term::Plus(inner, k) => Term::plus(self.resolve_with(s, inner, flex), *k),
            Term::Ctor { name, sort, args } => Term::Ctor {
                name: name.clone(),
                sort: *sort,
                args: args.iter().map(|x| self.resolve_with(s, x, flex)).collect(),
            },
        }
    }
}

fn rest_goal(p: Predicate) -> Predicate {
    match p {
        Predicate::Or(ps) if ps.len() == 1 => ps.into_iter().next().unwrap(),
        other => other,
    }
}

/// Negation normal form push for one connective level (recursively).
pub(super) fn nnf_not(p: &Predicate) -> Predicate {
    match p {
        Predicate::True => Predicate::False,
        Predicate::False => Predicate::True,
        Predicate::Eq(a, b) => Predicate::Neq(a.clone(), b.clone()),
        Predicate::Neq(a, b) => Predicate::Eq(a.clone(), b.clone()),
        Predicate::Not(q) => (**q).clone(),
        Predicate::And(ps) => Predicate::Or(ps.iter().map(nnf_not).collect()),
        Predicate::Or(ps) => Predicate::And(ps.iter().map(nnf_not).collect()),
        Predicate::Forall(vs, b) => Predicate::Exists(vs.clone(), Box::new(nnf_not(b))),
        Predicate::Exists(vs, b) => Predicate::Forall(vs.clone(), Box::new(nnf_not(b))),
    }
}

fn nat_parts(t: &Term) -> (Option<&Term>, u64) {
    match t {
        Term::Nat(k) => (None, *k),
        Term::Plus(inner, k) => (Some(inner.as_ref()), *k),
        other => (Some(other), 0),
    }
}
