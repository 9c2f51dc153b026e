//! Validity and satisfiability for the predicate fragment the toolkit
//! generates: free constructors with equality, `Nat` with `+constant`, and
//! ∀/∃ prefixes (plus universally quantified disequality guards inside
//! hypotheses and conclusions).
//!
//! Two engines back the verdicts:
//!
//! * a symbolic prover — congruence reasoning over the hypothesis plus a
//!   unification-based witness search for existentials. It only ever
//!   answers "proved", so `Valid` verdicts are sound;
//! * a bounded model search — enumerates small finite domains (`Data`
//!   atoms, an initial segment of `Nat`, shallow constructor instances) and
//!   evaluates the formula. Every `Invalid`/`Sat` verdict carries a witness
//!   that has been confirmed by re-evaluation.
//!
//! Anything neither engine settles is reported `Unknown` with a reason; the
//! caller decides how to surface that.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::term::{Predicate, Sort, Substitution, Term, Variable};

pub mod smt;

mod eval;
mod prover;
mod simplify;

pub use eval::evaluate;
pub use simplify::simplify;

/// Signature of the free algebra: every declared constructor with its
/// result sort and argument sorts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CtorSig {
    pub name: String,
    pub result: Sort,
    pub args: Vec<Sort>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Signature {
    ctors: BTreeMap<String, CtorSig>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("constructor {0} declared twice with different signatures")]
    Conflict(String),
}

impl Signature {
    pub fn new() -> Self {
        Signature::default()
    }

    pub fn declare(
        &mut self,
        name: impl Into<String>,
        result: Sort,
        args: Vec<Sort>,
    ) -> Result<(), SignatureError> {
        let name = name.into();
        let sig = CtorSig {
            name: name.clone(),
            result,
            args,
        };
        match self.ctors.get(&name) {
            Some(existing) if *existing != sig => Err(SignatureError::Conflict(name)),
            _ => {
                self.ctors.insert(name, sig);
                Ok(())
            }
        }
    }

    pub fn ctor(&self, name: &str) -> Option<&CtorSig> {
        self.ctors.get(name)
    }

    pub fn ctors(&self) -> impl Iterator<Item = &CtorSig> {
        self.ctors.values()
    }

    pub fn ctors_of_sort(&self, sort: Sort) -> impl Iterator<Item = &CtorSig> {
        self.ctors.values().filter(move |c| c.result == sort)
    }

    /// Records every constructor occurring in a term. Argument sorts are
    /// read off the argument terms; conflicts are errors.
    pub fn absorb_term(&mut self, t: &Term) -> Result<(), SignatureError> {
        match t {
            Term::Ctor { name, sort, args } => {
                self.declare(name.clone(), *sort, args.iter().map(|a| a.sort()).collect())?;
                for a in args {
                    self.absorb_term(a)?;
                }
                Ok(())
            }
            Term::Plus(inner, _) => self.absorb_term(inner),
            _ => Ok(()),
        }
    }

    pub fn absorb_pred(&mut self, p: &Predicate) -> Result<(), SignatureError> {
        match p {
            Predicate::True | Predicate::False => Ok(()),
            Predicate::Eq(a, b) | Predicate::Neq(a, b) => {
                self.absorb_term(a)?;
                self.absorb_term(b)
            }
            Predicate::And(ps) | Predicate::Or(ps) => {
                ps.iter().try_for_each(|q| self.absorb_pred(q))
            }
            Predicate::Not(q) => self.absorb_pred(q),
            Predicate::Forall(_, q) | Predicate::Exists(_, q) => self.absorb_pred(q),
        }
    }

    /// Merge two signatures; conflicting declarations are errors.
    pub fn merge(&self, other: &Signature) -> Result<Signature, SignatureError> {
        let mut out = self.clone();
        for c in other.ctors.values() {
            out.declare(c.name.clone(), c.result, c.args.clone())?;
        }
        Ok(out)
    }

    /// Whether the ground-term domain of `sort` has at least two elements.
    pub fn sort_has_two(&self, sort: Sort) -> bool {
        match sort {
            // Data is uninterpreted with at least two elements; Nat is infinite.
            Sort::Data | Sort::Nat => true,
            Sort::Bool => true,
            Sort::Action => {
                let mut inhabited = 0usize;
                for c in self.ctors_of_sort(Sort::Action) {
                    if c.args
                        .iter()
                        .any(|s| matches!(s, Sort::Data | Sort::Nat))
                    {
                        return true; // infinitely many instances
                    }
                    inhabited += 1;
                    if inhabited >= 2 {
                        return true;
                    }
                }
                false
            }
        }
    }
}

/// Outcome of a validity check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    /// A substitution for the outer universal variables that falsifies the
    /// formula; confirmed by re-evaluation before being returned.
    Invalid(Substitution),
    Unknown(String),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Valid => write!(f, "valid"),
            Verdict::Invalid(w) => write!(f, "invalid, witness {w}"),
            Verdict::Unknown(r) => write!(f, "unknown ({r})"),
        }
    }
}

/// Outcome of a satisfiability check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sat {
    Sat(Substitution),
    Unsat,
    Unknown(String),
}

impl Sat {
    pub fn is_sat(&self) -> bool {
        matches!(self, Sat::Sat(_))
    }
}

/// Resource limits for both engines.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    /// Symbolic prover step budget.
    pub prover_steps: u64,
    /// Bounded model search: candidate assignments to try.
    pub model_assignments: u64,
    /// Bounded model search and evaluator: quantifier instantiation budget.
    pub eval_steps: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            prover_steps: 500_000,
            model_assignments: 60_000,
            eval_steps: 4_000_000,
        }
    }
}

/// Is `p` valid in the free-constructor + Nat(+c) theory?
pub fn check_valid(sig: &Signature, p: &Predicate) -> Verdict {
    check_valid_limits(sig, p, Limits::default())
}

pub fn check_valid_limits(sig: &Signature, p: &Predicate, limits: Limits) -> Verdict {
    let p = simplify(p);
    match p {
        Predicate::True => return Verdict::Valid,
        Predicate::False => {
            return Verdict::Invalid(Substitution::new());
        }
        _ => {}
    }
    match prover::prove(sig, &p, limits) {
        prover::Proved::Yes => return Verdict::Valid,
        prover::Proved::No => {}
    }
    // Peel the outer universal prefix so a countermodel binds those
    // variables (plus any implicitly universal free variables).
    let mut matrix = p.clone();
    while let Predicate::Forall(_, body) = matrix {
        matrix = *body;
    }
    let negated = simplify(&Predicate::not(matrix.clone()));
    match eval::bounded_model(sig, &negated, limits) {
        eval::ModelSearch::Found(witness) => {
            // Confirm the witness by evaluating the peeled body.
            if eval::evaluate(sig, &matrix, &witness, limits) == Some(false) {
                Verdict::Invalid(witness)
            } else {
                Verdict::Unknown("countermodel failed confirmation".into())
            }
        }
        eval::ModelSearch::NoneFound => {
            Verdict::Unknown("not proved and no countermodel in bounded search".into())
        }
        eval::ModelSearch::Budget => Verdict::Unknown("model search budget exceeded".into()),
    }
}

/// Is `p` satisfiable? `Sat` carries a confirmed model of the free
/// variables.
pub fn is_satisfiable(sig: &Signature, p: &Predicate) -> Sat {
    is_satisfiable_limits(sig, p, Limits::default())
}

pub fn is_satisfiable_limits(sig: &Signature, p: &Predicate, limits: Limits) -> Sat {
    let p = simplify(p);
    match p {
        Predicate::True => return Sat::Sat(Substitution::new()),
        Predicate::False => return Sat::Unsat,
        _ => {}
    }
    match eval::bounded_model(sig, &p, limits) {
        eval::ModelSearch::Found(model) => return Sat::Sat(model),
        eval::ModelSearch::NoneFound | eval::ModelSearch::Budget => {}
    }
    // No model found; try to prove the negation valid.
    let negated = simplify(&Predicate::not(p.clone()));
    match prover::prove(sig, &negated, limits) {
        prover::Proved::Yes => Sat::Unsat,
        prover::Proved::No => Sat::Unknown("no model found and negation not proved".into()),
    }
}

/// Convenience wrapper: find the variables of `p` universally closed and
/// check validity of the closure. Free variables are implicitly universal
/// in every caller of this module.
pub fn check_valid_closed(sig: &Signature, p: &Predicate) -> Verdict {
    let free: Vec<Variable> = p.free_vars().into_iter().collect();
    check_valid(sig, &Predicate::forall(free, p.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{Predicate as P, Term as T};

    fn sig() -> Signature {
        let mut s = Signature::new();
        s.declare("p_send", Sort::Action, vec![Sort::Data]).unwrap();
        s.declare("q_recv", Sort::Action, vec![Sort::Data, Sort::Nat])
            .unwrap();
        s.declare("in", Sort::Action, vec![Sort::Data]).unwrap();
        s.declare("out", Sort::Action, vec![Sort::Data, Sort::Nat])
            .unwrap();
        s.declare("tau", Sort::Action, vec![]).unwrap();
        s.declare("synchro", Sort::Action, vec![Sort::Action]).unwrap();
        s
    }

    fn dvar(n: &str) -> Variable {
        Variable::fresh(n, Sort::Data, 0)
    }

    fn avar(n: &str) -> Variable {
        Variable::fresh(n, Sort::Action, 0)
    }

    #[test]
    fn constructor_decomposition() {
        // p_send(m1) = p_send(m2) simplifies to m1 = m2
        let m1 = dvar("m1");
        let m2 = dvar("m2");
        let p = P::eq(
            T::action("p_send", vec![T::var(m1.clone())]),
            T::action("p_send", vec![T::var(m2.clone())]),
        );
        assert_eq!(
            simplify(&p),
            P::eq(T::var(m1), T::var(m2))
        );
    }

    #[test]
    fn literal_folding() {
        assert_eq!(simplify(&P::eq(T::Nat(0), T::Nat(0))), Predicate::True);
        assert_eq!(simplify(&P::eq(T::Nat(1), T::Nat(2))), Predicate::False);
    }

    #[test]
    fn constructor_clash_is_false() {
        let m1 = dvar("m1");
        let m2 = dvar("m2");
        let p = P::eq(
            T::action("in", vec![T::var(m1)]),
            T::action("out", vec![T::var(m2), T::Nat(0)]),
        );
        assert_eq!(simplify(&p), Predicate::False);
    }

    #[test]
    fn running_example_tautology() {
        // forall m1. exists m2.
        //   p_send(m1)=p_send(m2) && in(m1)=in(m2) && m1=m2 && 0=0
        let m1 = dvar("m1");
        let m2 = dvar("m2");
        let body = P::and(vec![
            P::eq(
                T::action("p_send", vec![T::var(m1.clone())]),
                T::action("p_send", vec![T::var(m2.clone())]),
            ),
            P::eq(
                T::action("in", vec![T::var(m1.clone())]),
                T::action("in", vec![T::var(m2.clone())]),
            ),
            P::eq(T::var(m1.clone()), T::var(m2.clone())),
            P::eq(T::Nat(0), T::Nat(0)),
        ]);
        let p = P::forall(vec![m1], P::exists(vec![m2], body));
        assert_eq!(check_valid(&sig(), &p), Verdict::Valid);
    }

    #[test]
    fn two_distinct_data_values_refute() {
        // forall m1, m2. m1 = m2 is invalid; the witness maps m1, m2 to
        // distinct atoms.
        let m1 = dvar("m1");
        let m2 = dvar("m2");
        let p = P::forall(
            vec![m1.clone(), m2.clone()],
            P::eq(T::var(m1.clone()), T::var(m2.clone())),
        );
        match check_valid(&sig(), &p) {
            Verdict::Invalid(w) => {
                assert_ne!(w.get(&m1), w.get(&m2));
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn hole_guard_transfer() {
        // forall a. (forall x. a != p_send(x))
        //   => exists b. (a = b && forall y. b != p_send(y))
        let a = avar("a");
        let b = avar("b");
        let x = dvar("x");
        let y = dvar("y");
        let hyp = P::forall(
            vec![x.clone()],
            P::neq(
                T::var(a.clone()),
                T::action("p_send", vec![T::var(x.clone())]),
            ),
        );
        let conc = P::exists(
            vec![b.clone()],
            P::and(vec![
                P::eq(T::var(a.clone()), T::var(b.clone())),
                P::forall(
                    vec![y.clone()],
                    P::neq(T::var(b.clone()), T::action("p_send", vec![T::var(y)])),
                ),
            ]),
        );
        let p = P::forall(vec![a], P::implies(hyp, conc));
        assert_eq!(check_valid(&sig(), &p), Verdict::Valid);
    }

    #[test]
    fn guard_is_satisfiable() {
        // exists a. forall x. a != p_send(x) — pick any other constructor.
        let a = avar("a");
        let x = dvar("x");
        let p = P::forall(
            vec![x.clone()],
            P::neq(T::var(a.clone()), T::action("p_send", vec![T::var(x)])),
        );
        assert!(is_satisfiable(&sig(), &p).is_sat());
    }

    #[test]
    fn nat_offset_reasoning() {
        // forall n. n+1 != n is valid; forall n. n+1 = n is invalid.
        let n = Variable::fresh("n", Sort::Nat, 0);
        let neq = P::forall(
            vec![n.clone()],
            P::neq(T::plus(T::var(n.clone()), 1), T::var(n.clone())),
        );
        assert_eq!(check_valid(&sig(), &neq), Verdict::Valid);
        let eq = P::forall(
            vec![n.clone()],
            P::eq(T::plus(T::var(n.clone()), 1), T::var(n)),
        );
        assert!(matches!(check_valid(&sig(), &eq), Verdict::Invalid(_)));
    }

    #[test]
    fn exists_nat_solution() {
        // forall n. exists k. k+2 = n+3 (k := n+1)
        let n = Variable::fresh("n", Sort::Nat, 0);
        let k = Variable::fresh("k", Sort::Nat, 1);
        let p = P::forall(
            vec![n.clone()],
            P::exists(
                vec![k.clone()],
                P::eq(T::plus(T::var(k), 2), T::plus(T::var(n), 3)),
            ),
        );
        assert_eq!(check_valid(&sig(), &p), Verdict::Valid);
    }

    #[test]
    fn no_nat_underflow_witness() {
        // exists k. k+3 = 2 is unsatisfiable over Nat.
        let k = Variable::fresh("k", Sort::Nat, 0);
        let p = P::exists(vec![k], P::eq(T::plus(T::var(Variable::fresh("k", Sort::Nat, 0)), 3), T::Nat(2)));
        assert_eq!(is_satisfiable(&sig(), &p), Sat::Unsat);
    }

    #[test]
    fn vacuous_validity_from_contradiction() {
        // forall m. (in(m) = out(m, 0)) => false
        let m = dvar("m");
        let p = P::forall(
            vec![m.clone()],
            P::implies(
                P::eq(
                    T::action("in", vec![T::var(m.clone())]),
                    T::action("out", vec![T::var(m), T::Nat(0)]),
                ),
                Predicate::False,
            ),
        );
        assert_eq!(check_valid(&sig(), &p), Verdict::Valid);
    }

    #[test]
    fn invalid_witness_falsifies() {
        // forall m1, m2. (m1 != m2) => false: witness must pick m1 != m2.
        let m1 = dvar("m1");
        let m2 = dvar("m2");
        let p = P::forall(
            vec![m1.clone(), m2.clone()],
            P::implies(
                P::neq(T::var(m1.clone()), T::var(m2.clone())),
                Predicate::False,
            ),
        );
        match check_valid(&sig(), &p) {
            Verdict::Invalid(w) => {
                let l = Limits::default();
                assert_eq!(evaluate(&sig(), &p, &w, l), Some(false));
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }
}
