//! Bounded model search and ground evaluation over small finite domains.
//!
//! `Data` is enumerated with a handful of synthetic atoms (plus any
//! declared nullary constructors), `Nat` with an initial segment sized by
//! the constants in the formula, and `Action` with constructor instances of
//! bounded depth. A model found here is always confirmed against enlarged
//! pools before being reported, which guards against artefacts of the
//! finite quantifier ranges.

use std::collections::BTreeMap;

use crate::term::{Predicate, Sort, Substitution, Term, Variable};

use super::{Limits, Signature};

#[derive(Debug, PartialEq, Eq)]
pub enum ModelSearch {
    Found(Substitution),
    NoneFound,
    Budget,
}

/// Pools of ground terms per sort.
struct Pools {
    data: Vec<Term>,
    nat: Vec<Term>,
    action: Vec<Term>,
}

impl Pools {
    fn of_sort(&self, sort: Sort) -> Option<&[Term]> {
        match sort {
            Sort::Data => Some(&self.data),
            Sort::Nat => Some(&self.nat),
            Sort::Action => Some(&self.action),
            Sort::Bool => None,
        }
    }
}

/// A synthetic `Data` atom; `@` keeps it apart from declared identifiers.
fn data_atom(i: usize) -> Term {
    Term::ctor(format!("@d{i}"), Sort::Data, vec![])
}

fn max_nat_const(p: &Predicate) -> u64 {
    fn term(t: &Term, acc: &mut u64) {
        match t {
            Term::Nat(k) => *acc = (*acc).max(*k),
            Term::Plus(inner, k) => {
                *acc = (*acc).max(*k);
                term(inner, acc);
            }
            Term::Ctor { args, .. } => args.iter().for_each(|a| term(a, acc)),
            _ => {}
        }
    }
    fn pred(p: &Predicate, acc: &mut u64) {
        match p {
            Predicate::True | Predicate::False => {}
            Predicate::Eq(a, b) | Predicate::Neq(a, b) => {
                term(a, acc);
                term(b, acc);
            }
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().for_each(|q| pred(q, acc)),
            Predicate::Not(q) => pred(q, acc),
            Predicate::Forall(_, q) | Predicate::Exists(_, q) => pred(q, acc),
        }
    }
    let mut acc = 0;
    pred(p, &mut acc);
    acc
}

fn build_pools(sig: &Signature, p: &Predicate, extra: &[Term], grow: u64) -> Pools {
    let mut data: Vec<Term> = sig
        .ctors_of_sort(Sort::Data)
        .filter(|c| c.args.is_empty())
        .map(|c| Term::ctor(c.name.clone(), Sort::Data, vec![]))
        .collect();
    for i in 0..(3 + grow as usize) {
        data.push(data_atom(i));
    }
    // Any atoms mentioned by the witness being confirmed must be in range.
    for t in extra {
        collect_ground_data(t, &mut data);
    }
    data.sort();
    data.dedup();

    let bound = max_nat_const(p) + 3 + grow;
    let nat: Vec<Term> = (0..=bound.min(12)).map(Term::Nat).collect();

    let mut action = Vec::new();
    // Depth 1: constructor instances over data/nat pools.
    let mut frontier: Vec<Term> = Vec::new();
    for _depth in 0..2 {
        let mut next = Vec::new();
        for c in sig.ctors_of_sort(Sort::Action) {
            let arg_pools: Vec<Vec<Term>> = c
                .args
                .iter()
                .map(|s| match s {
                    Sort::Data => data.clone(),
                    Sort::Nat => nat.iter().take(4).cloned().collect(),
                    Sort::Action => frontier.clone(),
                    Sort::Bool => vec![],
                })
                .collect();
            for args in cartesian(&arg_pools, 64) {
                next.push(Term::ctor(c.name.clone(), Sort::Action, args));
            }
        }
        action.extend(next.clone());
        frontier = next;
        if action.len() > 128 {
            break;
        }
    }
    action.sort();
    action.dedup();
    action.truncate(128);

    Pools { data, nat, action }
}

fn collect_ground_data(t: &Term, out: &mut Vec<Term>) {
    match t {
        Term::Ctor { sort, args, .. } => {
            if *sort == Sort::Data && args.is_empty() {
                out.push(t.clone());
            }
            args.iter().for_each(|a| collect_ground_data(a, out));
        }
        Term::Plus(inner, _) => collect_ground_data(inner, out),
        _ => {}
    }
}

fn cartesian(pools: &[Vec<Term>], cap: usize) -> Vec<Vec<Term>> {
    let mut out: Vec<Vec<Term>> = vec![vec![]];
    for pool in pools {
        let mut next = Vec::new();
        for partial in &out {
            for t in pool {
                let mut row = partial.clone();
                row.push(t.clone());
                next.push(row);
                if next.len() > cap {
                    break;
                }
            }
            if next.len() > cap {
                break;
            }
        }
        out = next;
        if out.is_empty() {
            return out;
        }
    }
    out
}

/// Searches for a model of `p` over bounded domains. A found model is
/// re-confirmed against enlarged pools before being reported.
pub fn bounded_model(sig: &Signature, p: &Predicate, limits: Limits) -> ModelSearch {
    let free: Vec<Variable> = p.free_vars().into_iter().collect();
    if free.iter().any(|v| v.sort == Sort::Bool) {
        return ModelSearch::NoneFound;
    }
    let pools = build_pools(sig, p, &[], 0);
    let var_pools: Vec<&[Term]> = match free
        .iter()
        .map(|v| pools.of_sort(v.sort))
        .collect::<Option<Vec<_>>>()
    {
        Some(ps) => ps,
        None => return ModelSearch::NoneFound,
    };
    if var_pools.iter().any(|pool| pool.is_empty()) {
        return ModelSearch::NoneFound;
    }

    let mut idx = vec![0usize; free.len()];
    let mut assignments: u64 = 0;
    loop {
        assignments += 1;
        if assignments > limits.model_assignments {
            return ModelSearch::Budget;
        }
        let env: BTreeMap<Variable, Term> = free
            .iter()
            .enumerate()
            .map(|(j, v)| (v.clone(), var_pools[j][idx[j]].clone()))
            .collect();
        let mut steps = limits.eval_steps;
        if eval_pred(p, &env, &pools, &mut steps) == Some(true) {
            let witness = Substitution::from_pairs(env.clone())
                .expect("pool terms have the variables' sorts");
            // Confirm against enlarged pools to rule out artefacts of the
            // finite quantifier ranges.
            let extras: Vec<Term> = env.values().cloned().collect();
            let big = build_pools(sig, p, &extras, 2);
            let mut steps = limits.eval_steps;
            if eval_pred_env(p, &env, &big, &mut steps) == Some(true) {
                return ModelSearch::Found(witness);
            }
        }
        // Advance the odometer.
        let mut carry = true;
        for (slot, pool) in idx.iter_mut().zip(&var_pools) {
            if !carry {
                break;
            }
            *slot += 1;
            if *slot < pool.len() {
                carry = false;
            } else {
                *slot = 0;
            }
        }
        if carry {
            return ModelSearch::NoneFound;
        }
    }
}

/// Evaluates `p` under `model` over bounded domains. `None` means the
/// evaluation was unsupported or ran out of budget.
pub fn evaluate(sig: &Signature, p: &Predicate, model: &Substitution, limits: Limits) -> Option<bool> {
    let env: BTreeMap<Variable, Term> = model.iter().map(|(v, t)| (v.clone(), t.clone())).collect();
    let extras: Vec<Term> = env.values().cloned().collect();
    let pools = build_pools(sig, p, &extras, 1);
    let mut steps = limits.eval_steps;
    eval_pred_env(p, &env, &pools, &mut steps)
}

fn eval_pred(
    p: &Predicate,
    env: &BTreeMap<Variable, Term>,
    pools: &Pools,
    steps: &mut u64,
) -> Option<bool> {
    eval_pred_env(p, env, pools, steps)
}

fn eval_pred_env(
    p: &Predicate,
    env: &BTreeMap<Variable, Term>,
    pools: &Pools,
    steps: &mut u64,
) -> Option<bool> {
    if *steps == 0 {
        return None;
    }
    *steps -= 1;
    match p {
        Predicate::True => Some(true),
        Predicate::False => Some(false),
        Predicate::Eq(a, b) => Some(ground(a, env)? == ground(b, env)?),
        Predicate::Neq(a, b) => Some(ground(a, env)? != ground(b, env)?),
        Predicate::And(ps) => {
            for q in ps {
                match eval_pred_env(q, env, pools, steps)? {
                    true => {}
                    false => return Some(false),
                }
            }
            Some(true)
        }
        Predicate::Or(ps) => {
            for q in ps {
                match eval_pred_env(q, env, pools, steps)? {
                    true => return Some(true),
                    false => {}
                }
            }
            Some(false)
        }
        Predicate::Not(q) => eval_pred_env(q, env, pools, steps).map(|b| !b),
        Predicate::Forall(vs, body) => eval_quant(vs, body, env, pools, steps, true),
        Predicate::Exists(vs, body) => eval_quant(vs, body, env, pools, steps, false),
    }
}

fn eval_quant(
    vars: &[Variable],
    body: &Predicate,
    env: &BTreeMap<Variable, Term>,
    pools: &Pools,
    steps: &mut u64,
    universal: bool,
) -> Option<bool> {
    let var_pools: Vec<&[Term]> = vars
        .iter()
        .map(|v| pools.of_sort(v.sort))
        .collect::<Option<Vec<_>>>()?;
    if var_pools.iter().any(|pool| pool.is_empty()) {
        return None;
    }
    let mut idx = vec![0usize; vars.len()];
    loop {
        if *steps == 0 {
            return None;
        }
        *steps -= 1;
        let mut inner = env.clone();
        for ((v, pool), &i) in vars.iter().zip(&var_pools).zip(&idx) {
            inner.insert(v.clone(), pool[i].clone());
        }
        match eval_pred_env(body, &inner, pools, steps)? {
            true if !universal => return Some(true),
            false if universal => return Some(false),
            _ => {}
        }
        let mut carry = true;
        for (slot, pool) in idx.iter_mut().zip(&var_pools) {
            if !carry {
                break;
            }
            *slot += 1;
            if *slot < pool.len() {
                carry = false;
            } else {
                *slot = 0;
            }
        }
        if carry {
            return Some(universal);
        }
    }
}

/// Grounds a term under an environment; `None` if a variable is unbound.
fn ground(t: &Term, env: &BTreeMap<Variable, Term>) -> Option<Term> {
    match t {
        Term::Var(v) => env.get(v).cloned(),
        Term::Input(_) => None,
        Term::Nat(_) => Some(t.clone()),
        Term::Plus(inner, k) => Some(Term::plus(ground(inner, env)?, *k)),
        Term::Ctor { name, sort, args } => Some(Term::Ctor {
            name: name.clone(),
            sort: *sort,
            args: args
                .iter()
                .map(|a| ground(a, env))
                .collect::<Option<Vec<_>>>()?,
        }),
    }
}
