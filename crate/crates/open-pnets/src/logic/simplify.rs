//! Equivalence-preserving predicate simplification: constructor
//! decomposition, Nat constant folding, unit laws, rewriting with
//! equality-defined variables, and one-point quantifier elimination.

use crate::term::{Predicate, Substitution, Term, Variable};

/// Simplifies a predicate to a logically equivalent one.
pub fn simplify(p: &Predicate) -> Predicate {
    let mut current = p.clone();
    // Rewriting with defined equalities can expose new folds; iterate a few
    // rounds and stop as soon as a fixpoint is reached.
    for _ in 0..8 {
        let next = simp(&current);
        if next == current {
            return next;
        }
        current = next;
    }
    current
}

fn simp(p: &Predicate) -> Predicate {
    match p {
        Predicate::True => Predicate::True,
        Predicate::False => Predicate::False,
        Predicate::Eq(a, b) => eq(a, b),
        Predicate::Neq(a, b) => Predicate::not(eq(a, b)),
        Predicate::Not(q) => Predicate::not(simp(q)),
        Predicate::And(ps) => {
            let parts: Vec<Predicate> = ps.iter().map(simp).collect();
            let flat = Predicate::and(parts);
            match flat {
                Predicate::And(parts) => rewrite_conjunction(parts),
                other => other,
            }
        }
        Predicate::Or(ps) => {
            let parts: Vec<Predicate> = ps.iter().map(simp).collect();
            let mut seen = Vec::new();
            let flat = Predicate::or(parts);
            match flat {
                Predicate::Or(parts) => {
                    for q in parts {
                        if !seen.contains(&q) {
                            seen.push(q);
                        }
                    }
                    Predicate::or(seen)
                }
                other => other,
            }
        }
        Predicate::Forall(vs, body) => {
            let body = simp(body);
            let free = body.free_vars();
            let vs: Vec<Variable> = vs.iter().filter(|v| free.contains(v)).cloned().collect();
            match body {
                Predicate::True => Predicate::True,
                Predicate::False => Predicate::False,
                body => Predicate::forall(vs, body),
            }
        }
        Predicate::Exists(vs, body) => {
            let body = simp(body);
            let (vs, body) = one_point(vs.clone(), body);
            let free = body.free_vars();
            let vs: Vec<Variable> = vs.into_iter().filter(|v| free.contains(v)).collect();
            match body {
                Predicate::True => Predicate::True,
                Predicate::False => Predicate::False,
                body => Predicate::exists(vs, body),
            }
        }
    }
}

/// Simplifies an equality between two terms.
fn eq(a: &Term, b: &Term) -> Predicate {
    if a == b {
        return Predicate::True;
    }
    match (a, b) {
        (
            Term::Ctor {
                name: na, args: aa, ..
            },
            Term::Ctor {
                name: nb, args: ab, ..
            },
        ) => {
            // Free constructors: injective and pairwise distinct.
            if na != nb || aa.len() != ab.len() {
                Predicate::False
            } else {
                Predicate::and(aa.iter().zip(ab).map(|(x, y)| eq(x, y)).collect())
            }
        }
        (Term::Nat(x), Term::Nat(y)) => {
            if x == y {
                Predicate::True
            } else {
                Predicate::False
            }
        }
        _ => nat_eq(a, b).unwrap_or_else(|| {
            if occurs_strictly(a, b) || occurs_strictly(b, a) {
                // x = f(..x..) has no finite solution in a free algebra.
                Predicate::False
            } else {
                Predicate::Eq(a.clone(), b.clone())
            }
        }),
    }
}

/// Offset reasoning on Nat terms: both sides decompose as base + constant.
fn nat_eq(a: &Term, b: &Term) -> Option<Predicate> {
    let (ba, ka) = nat_parts(a)?;
    let (bb, kb) = nat_parts(b)?;
    match (ba, bb) {
        (None, None) => Some(if ka == kb { Predicate::True } else { Predicate::False }),
        (Some(x), None) => {
            if kb >= ka {
                Some(eq(x, &Term::Nat(kb - ka)))
            } else {
                Some(Predicate::False)
            }
        }
        (None, Some(y)) => {
            if ka >= kb {
                Some(eq(&Term::Nat(ka - kb), y))
            } else {
                Some(Predicate::False)
            }
        }
        (Some(x), Some(y)) => {
            // Bases are plain Nat terms (variables); no further folding.
            if x == y {
                Some(if ka == kb { Predicate::True } else { Predicate::False })
            } else if ka >= kb {
                Some(Predicate::Eq(Term::plus(x.clone(), ka - kb), y.clone()))
            } else {
                Some(Predicate::Eq(x.clone(), Term::plus(y.clone(), kb - ka)))
            }
        }
    }
}

/// Decomposes a Nat-sorted term into `(base, constant)`; `base = None`
/// means a literal. Returns `None` for non-Nat terms.
fn nat_parts(t: &Term) -> Option<(Option<&Term>, u64)> {
    match t {
        Term::Nat(k) => Some((None, *k)),
        Term::Plus(inner, k) => Some((Some(inner.as_ref()), *k)),
        Term::Var(v) if v.sort == crate::term::Sort::Nat => Some((Some(t), 0)),
        _ => None,
    }
}

fn occurs_strictly(v: &Term, t: &Term) -> bool {
    if let Term::Var(var) = v {
        t != v && t.free_vars().contains(var)
    } else {
        false
    }
}

/// Within a conjunction, rewrites the siblings of every conjunct
/// `x = t` (with `x` a variable not occurring in `t`) by substituting `t`
/// for `x`. The defining conjunct itself is kept, so the result stays
/// equivalent. Also detects complementary literals.
fn rewrite_conjunction(parts: Vec<Predicate>) -> Predicate {
    let mut parts = parts;
    for i in 0..parts.len() {
        if let Some((v, t)) = defines(&parts[i]) {
            let sub = match Substitution::singleton(v.clone(), t.clone()) {
                Ok(s) => s,
                Err(_) => continue,
            };
            for (j, q) in parts.iter_mut().enumerate() {
                if j != i && q.free_vars().contains(&v) {
                    *q = simp(&sub.apply_pred(q));
                }
            }
        }
    }
    // Drop duplicates, detect p && !p.
    let mut seen: Vec<Predicate> = Vec::new();
    for q in parts {
        if q == Predicate::False {
            return Predicate::False;
        }
        if seen.contains(&q) {
            continue;
        }
        let negated = Predicate::not(q.clone());
        if seen.contains(&negated) {
            return Predicate::False;
        }
        seen.push(q);
    }
    Predicate::and(seen)
}

/// Recognises `x = t` / `t = x` with `x` not free in `t`; both
/// orientations of a variable-variable equation are reported.
fn defines(p: &Predicate) -> Option<(Variable, Term)> {
    defines_all(p).into_iter().next()
}

fn defines_all(p: &Predicate) -> Vec<(Variable, Term)> {
    let mut out = Vec::new();
    if let Predicate::Eq(a, b) = p {
        if let Term::Var(v) = a {
            if !b.free_vars().contains(v) {
                out.push((v.clone(), b.clone()));
            }
        }
        if let Term::Var(v) = b {
            if !a.free_vars().contains(v) {
                out.push((v.clone(), a.clone()));
            }
        }
    }
    out
}

/// One-point rule: `exists x. (x = t && p)` becomes `p{x <- t}` when `x`
/// does not occur in `t`.
fn one_point(mut vars: Vec<Variable>, body: Predicate) -> (Vec<Variable>, Predicate) {
    let mut body = body;
    loop {
        let conjuncts: Vec<Predicate> = match &body {
            Predicate::And(ps) => ps.clone(),
            Predicate::Eq(_, _) => vec![body.clone()],
            _ => return (vars, body),
        };
        let mut eliminated = None;
        'outer: for (i, c) in conjuncts.iter().enumerate() {
            for (v, t) in defines_all(c) {
                if vars.contains(&v) && !t.free_vars().contains(&v) {
                    eliminated = Some((i, v, t));
                    break 'outer;
                }
            }
        }
        let Some((i, v, t)) = eliminated else {
            return (vars, body);
        };
        let sub = match Substitution::singleton(v.clone(), t) {
            Ok(s) => s,
            Err(_) => return (vars, body),
        };
        vars.retain(|x| *x != v);
        let rest: Vec<Predicate> = conjuncts
            .into_iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| simp(&sub.apply_pred(&q)))
            .collect();
        body = Predicate::and(rest);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::{Predicate as P, Sort, Term as T, Variable};

    #[test]
    fn defined_variable_rewrites_siblings() {
        let x = Variable::fresh("x", Sort::Data, 0);
        let y = Variable::fresh("y", Sort::Data, 1);
        let p = P::and(vec![
            P::eq(T::var(x.clone()), T::var(y.clone())),
            P::eq(
                T::action("in", vec![T::var(x.clone())]),
                T::action("in", vec![T::var(y.clone())]),
            ),
        ]);
        assert_eq!(simplify(&p), P::eq(T::var(x), T::var(y)));
    }

    #[test]
    fn one_point_elimination() {
        let x = Variable::fresh("x", Sort::Data, 0);
        let y = Variable::fresh("y", Sort::Data, 1);
        let p = P::exists(
            vec![x.clone()],
            P::and(vec![
                P::eq(T::var(x.clone()), T::var(y.clone())),
                P::neq(T::var(x), T::var(y.clone())),
            ]),
        );
        assert_eq!(simplify(&p), Predicate::False);
    }

    #[test]
    fn nat_cancellation() {
        let n = Variable::fresh("n", Sort::Nat, 0);
        let p = P::eq(T::plus(T::var(n.clone()), 3), T::plus(T::var(n.clone()), 3));
        assert_eq!(simplify(&p), Predicate::True);
        let q = P::eq(T::plus(T::var(n.clone()), 3), T::plus(T::var(n), 2));
        assert_eq!(simplify(&q), Predicate::False);
    }

    #[test]
    fn underflow_is_false() {
        let n = Variable::fresh("n", Sort::Nat, 0);
        let p = P::eq(T::plus(T::var(n), 3), T::Nat(1));
        assert_eq!(simplify(&p), Predicate::False);
    }

    #[test]
    fn occurs_check() {
        let n = Variable::fresh("n", Sort::Nat, 0);
        let p = P::eq(T::var(n.clone()), T::plus(T::var(n), 1));
        assert_eq!(simplify(&p), Predicate::False);
    }
}
