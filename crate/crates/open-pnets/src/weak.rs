//! Weak open transitions and bounded saturation.
//!
//! A weak open transition (WOT) absorbs silent steps around an open
//! transition. Its hole requirements are *sequences* of visible actions
//! (`vis` drops τ entries and wraps the rest in singleton lists). The three
//! construction rules:
//!
//! * reflexive: every state weakly reaches itself by τ with no
//!   requirements and no effect;
//! * lift: every strong transition is a weak one, with `vis` applied to
//!   its hole actions;
//! * concatenation: a silent WOT, then any WOT, then a silent WOT compose
//!   into one WOT. Predicates, hole sequences and the result action of the
//!   later parts are rewritten by the effects of the earlier parts, and the
//!   effects compose with `⊗` (rightmost first).
//!
//! Loops with effects generate an unbounded family of weak transitions
//! (one per number of iterations), so saturation is bounded: at most
//! `depth` concatenations per transition. That is an under-approximation
//! of the full weak automaton; the checker reports when a failure may be
//! an artefact of the bound.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::logic;
use crate::model::GlobalState;
use crate::semantics::{OpenAutomaton, OpenTransition};
use crate::term::{
    Canonicalizer, Freshener, Predicate, Renaming, Substitution, Term, Variable,
};

/// How a weak open transition was produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Derivation {
    /// The reflexive silent transition of a state (by state index).
    Reflexive(usize),
    /// Lift of a strong transition (by transition index).
    Lift(usize),
    /// Concatenation silent · any · silent.
    Concat(Box<Derivation>, Box<Derivation>, Box<Derivation>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakOpenTransition {
    pub source: GlobalState,
    pub target: GlobalState,
    /// Per-hole sequences of required visible actions (γ).
    pub hole_seqs: BTreeMap<String, Vec<Term>>,
    pub action: Term,
    pub guard: Predicate,
    pub effect: Substitution,
    pub derivation: Derivation,
    /// Number of concatenation steps in the derivation.
    pub concat_count: u32,
}

impl WeakOpenTransition {
    pub fn is_silent(&self) -> bool {
        self.action.is_tau()
    }

    pub fn local_vars(&self) -> std::collections::BTreeSet<Variable> {
        let mut vars: std::collections::BTreeSet<Variable> = self.action.free_vars();
        for seq in self.hole_seqs.values() {
            for t in seq {
                vars.extend(t.free_vars());
            }
        }
        vars.extend(self.guard.free_vars());
        vars.extend(self.effect.range_vars());
        vars.into_iter().filter(|v| !v.is_state()).collect()
    }

    /// Canonical alpha-renamed key; identical keys mean the transitions
    /// are the same up to renaming of their local variables.
    pub fn canonical_key(&self) -> String {
        let mut c = Canonicalizer::new();
        let mut out = String::new();
        let _ = write!(out, "{} ==> {}", self.source.label(), self.target.label());
        for (h, seq) in &self.hole_seqs {
            let rendered: Vec<String> = seq.iter().map(|t| c.term(t)).collect();
            let _ = write!(out, " | {h} -> [{}]", rendered.join(", "));
        }
        let _ = write!(out, " | {}", c.term(&self.action));
        let _ = write!(out, " | {}", c.pred(&logic::simplify(&self.guard)));
        let _ = write!(out, " | {}", c.subst(&self.effect));
        out
    }
}

impl std::fmt::Display for WeakOpenTransition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, (h, seq)) in self.hole_seqs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            let rendered: Vec<String> = seq.iter().map(|t| t.to_string()).collect();
            write!(f, "{h} -> [{}]", rendered.join(", "))?;
        }
        write!(
            f,
            "}}, [{}], {} : {} =={}==> {}",
            self.guard,
            self.effect,
            self.source.label(),
            self.action,
            self.target.label()
        )
    }
}

/// The weak open automaton produced by bounded saturation.
#[derive(Debug, Clone, Serialize)]
pub struct WeakOpenAutomaton {
    pub name: String,
    pub states: Vec<GlobalState>,
    pub initial: GlobalState,
    pub transitions: Vec<WeakOpenTransition>,
    /// The concatenation bound used.
    pub depth: u32,
}

impl WeakOpenAutomaton {
    pub fn transitions_from<'a>(
        &'a self,
        state: &'a GlobalState,
    ) -> impl Iterator<Item = &'a WeakOpenTransition> + 'a {
        self.transitions.iter().filter(move |t| &t.source == state)
    }

    /// Text table in the style used to list weak transitions: name,
    /// endpoints, hole sequences, predicate, effect.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.transitions.iter().enumerate() {
            let holes: Vec<String> = t
                .hole_seqs
                .iter()
                .map(|(h, seq)| {
                    let rendered: Vec<String> = seq.iter().map(|x| x.to_string()).collect();
                    format!("{h} -> [{}]", rendered.join(", "))
                })
                .collect();
            let _ = writeln!(
                out,
                "W{:<3} {} =={}==> {}\n     {{{}}}, [{}], {}",
                i,
                t.source.label(),
                t.action,
                t.target.label(),
                holes.join(", "),
                t.guard,
                t.effect
            );
        }
        out
    }

    /// JSON rendering with stringified terms and predicates.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        json!({
            "kind": "weak-open-automaton",
            "name": self.name,
            "depth": self.depth,
            "states": self.states.iter().map(|s| s.label()).collect::<Vec<_>>(),
            "initial": self.initial.label(),
            "transitions": self.transitions.iter().map(|t| json!({
                "source": t.source.label(),
                "target": t.target.label(),
                "holeSequences": t.hole_seqs.iter().map(|(h, seq)| {
                    (h.clone(), serde_json::Value::Array(
                        seq.iter().map(|x| serde_json::Value::String(x.to_string())).collect()))
                }).collect::<serde_json::Map<_, _>>(),
                "action": t.action.to_string(),
                "guard": t.guard.to_string(),
                "post": t.effect.to_string(),
                "concatenations": t.concat_count,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph weak_open_automaton {\n  rankdir=LR;\n");
        for s in &self.states {
            let _ = writeln!(out, "  {:?} [shape=ellipse];", s.label());
        }
        for t in &self.transitions {
            let holes: Vec<String> = t
                .hole_seqs
                .iter()
                .map(|(h, seq)| {
                    let rendered: Vec<String> = seq.iter().map(|x| x.to_string()).collect();
                    format!("{h}->[{}]", rendered.join(","))
                })
                .collect();
            let label = format!(
                "{{{}}} | {} | {} | {}",
                holes.join(", "),
                t.action,
                t.guard,
                t.effect
            );
            let _ = writeln!(
                out,
                "  {:?} -> {:?} [label={:?}, style=dashed];",
                t.source.label(),
                t.target.label(),
                label
            );
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WeakError {
    #[error("cannot concatenate: endpoints do not chain")]
    EndpointMismatch,
    #[error("cannot concatenate: the outer transitions must be silent")]
    NotSilent,
    #[error("saturation budget exceeded ({0} weak transitions)")]
    Budget(usize),
}

/// The visible-action projection: τ entries are dropped, everything else
/// becomes a singleton sequence.
pub fn vis(betas: &BTreeMap<String, Term>) -> BTreeMap<String, Vec<Term>> {
    betas
        .iter()
        .filter(|(_, t)| !t.is_tau())
        .map(|(h, t)| (h.clone(), vec![t.clone()]))
        .collect()
}

/// The reflexive silent weak transition of a state.
pub fn wt1(state: &GlobalState, state_index: usize) -> WeakOpenTransition {
    WeakOpenTransition {
        source: state.clone(),
        target: state.clone(),
        hole_seqs: BTreeMap::new(),
        action: Term::tau(),
        guard: Predicate::True,
        effect: Substitution::new(),
        derivation: Derivation::Reflexive(state_index),
        concat_count: 0,
    }
}

/// Lifts a strong open transition to a weak one.
pub fn wt2_lift(ot: &OpenTransition, index: usize) -> WeakOpenTransition {
    WeakOpenTransition {
        source: ot.source.clone(),
        target: ot.target.clone(),
        hole_seqs: vis(&ot.hole_actions),
        action: ot.action.clone(),
        guard: ot.guard.clone(),
        effect: ot.effect.clone(),
        derivation: Derivation::Lift(index),
        concat_count: 0,
    }
}

/// Concatenates silent `w1`, then `w2`, then silent `w3`. Local variables
/// of each operand are freshened so the same transition can be chained
/// with itself.
pub fn wt3_concat(
    w1: &WeakOpenTransition,
    w2: &WeakOpenTransition,
    w3: &WeakOpenTransition,
    fresh: &mut Freshener,
) -> Result<WeakOpenTransition, WeakError> {
    if w1.target != w2.source || w2.target != w3.source {
        return Err(WeakError::EndpointMismatch);
    }
    if !w1.is_silent() || !w3.is_silent() {
        return Err(WeakError::NotSilent);
    }
    let w1 = freshen_wot(w1, fresh);
    let w2 = freshen_wot(w2, fresh);
    let w3 = freshen_wot(w3, fresh);

    let post21 = Substitution::compose(&w2.effect, &w1.effect);
    let guard = Predicate::and(vec![
        w1.guard.clone(),
        w1.effect.apply_pred(&w2.guard),
        post21.apply_pred(&w3.guard),
    ]);
    let mut hole_seqs = w1.hole_seqs.clone();
    for (h, seq) in &w2.hole_seqs {
        let mapped: Vec<Term> = seq.iter().map(|t| w1.effect.apply(t)).collect();
        hole_seqs.entry(h.clone()).or_default().extend(mapped);
    }
    for (h, seq) in &w3.hole_seqs {
        let mapped: Vec<Term> = seq.iter().map(|t| post21.apply(t)).collect();
        hole_seqs.entry(h.clone()).or_default().extend(mapped);
    }
    let action = w1.effect.apply(&w2.action);
    let effect = Substitution::compose(&w3.effect, &post21);
    Ok(WeakOpenTransition {
        source: w1.source.clone(),
        target: w3.target.clone(),
        hole_seqs,
        action,
        guard,
        effect,
        derivation: Derivation::Concat(
            Box::new(w1.derivation),
            Box::new(w2.derivation),
            Box::new(w3.derivation),
        ),
        concat_count: w1.concat_count + w2.concat_count + w3.concat_count + 1,
    })
}

fn freshen_wot(w: &WeakOpenTransition, fresh: &mut Freshener) -> WeakOpenTransition {
    let select = |v: &Variable| !v.is_state();
    let mut renaming = Renaming::new();
    let mut out = w.clone();
    for seq in out.hole_seqs.values_mut() {
        for t in seq.iter_mut() {
            *t = fresh.freshen_term(t, &select, &mut renaming);
        }
    }
    out.action = fresh.freshen_term(&w.action, &select, &mut renaming);
    out.guard = fresh.freshen_pred(&w.guard, &select, &mut renaming);
    out.effect = fresh.freshen_subst_range(&w.effect, &select, &mut renaming);
    out
}

#[derive(Debug, Clone, Copy)]
pub struct SaturateOptions {
    /// Maximum number of concatenations per weak transition.
    pub depth: u32,
    /// Abort if the weak transition set grows past this size.
    pub budget: usize,
}

impl Default for SaturateOptions {
    fn default() -> Self {
        SaturateOptions {
            depth: 3,
            budget: 50_000,
        }
    }
}

/// Builds the weak open automaton of `oa` by bounded saturation: the
/// reflexive and lifted transitions, closed under at most `depth`
/// concatenations, deduplicated up to renaming of local variables.
pub fn saturate(oa: &OpenAutomaton, opts: SaturateOptions) -> Result<WeakOpenAutomaton, WeakError> {
    let mut fresh = Freshener::new();
    let mut wots: Vec<WeakOpenTransition> = Vec::new();
    let mut keys: BTreeMap<String, u32> = BTreeMap::new();

    let push = |w: WeakOpenTransition,
                    wots: &mut Vec<WeakOpenTransition>,
                    keys: &mut BTreeMap<String, u32>|
     -> bool {
        let key = w.canonical_key();
        match keys.get(&key) {
            Some(_) => false,
            None => {
                keys.insert(key, w.concat_count);
                wots.push(w);
                true
            }
        }
    };

    for (i, s) in oa.states.iter().enumerate() {
        push(wt1(s, i), &mut wots, &mut keys);
    }
    for (i, t) in oa.transitions.iter().enumerate() {
        push(wt2_lift(t, i), &mut wots, &mut keys);
    }

    loop {
        let mut added = false;
        // Index silent transitions by source for the two outer positions.
        let silent: Vec<usize> = (0..wots.len()).filter(|&i| wots[i].is_silent()).collect();
        let n = wots.len();
        for j in 0..n {
            for &i in &silent {
                if wots[i].target != wots[j].source {
                    continue;
                }
                for &k in &silent {
                    if wots[j].target != wots[k].source {
                        continue;
                    }
                    let count = wots[i].concat_count + wots[j].concat_count + wots[k].concat_count + 1;
                    if count > opts.depth {
                        continue;
                    }
                    // Skip the identity concatenation with two reflexive
                    // ends; it reproduces w2 exactly.
                    if matches!(wots[i].derivation, Derivation::Reflexive(_))
                        && matches!(wots[k].derivation, Derivation::Reflexive(_))
                    {
                        continue;
                    }
                    let w = wt3_concat(&wots[i], &wots[j], &wots[k], &mut fresh)
                        .expect("endpoints and silence were checked");
                    if logic::simplify(&w.guard) == Predicate::False {
                        continue;
                    }
                    if push(w, &mut wots, &mut keys) {
                        added = true;
                    }
                    if wots.len() > opts.budget {
                        return Err(WeakError::Budget(wots.len()));
                    }
                }
            }
        }
        if !added {
            break;
        }
    }

    wots.sort_by(|a, b| a.canonical_key().cmp(&b.canonical_key()));
    Ok(WeakOpenAutomaton {
        name: oa.name.clone(),
        states: oa.states.clone(),
        initial: oa.initial.clone(),
        transitions: wots,
        depth: opts.depth,
    })
}

/// Replays a derivation against the strong automaton it came from; the
/// result is the same transition up to renaming of local variables.
pub fn replay(d: &Derivation, oa: &OpenAutomaton, fresh: &mut Freshener) -> WeakOpenTransition {
    match d {
        Derivation::Reflexive(i) => wt1(&oa.states[*i], *i),
        Derivation::Lift(i) => wt2_lift(&oa.transitions[*i], *i),
        Derivation::Concat(a, b, c) => {
            let w1 = replay(a, oa, fresh);
            let w2 = replay(b, oa, fresh);
            let w3 = replay(c, oa, fresh);
            wt3_concat(&w1, &w2, &w3, fresh).expect("recorded derivation replays")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl;
    use crate::semantics::{derive, DeriveOptions};
    use crate::term::Sort;

    fn spec_oa() -> OpenAutomaton {
        let sys =
            dsl::load_system(include_str!("../../../corpus/simple_prot_spec.pnet"), &[]).unwrap();
        derive(&sys, DeriveOptions::default()).unwrap()
    }

    fn impl_oa() -> OpenAutomaton {
        let sys =
            dsl::load_system(include_str!("../../../corpus/simple_prot_impl.pnet"), &[]).unwrap();
        derive(&sys, DeriveOptions::default()).unwrap()
    }

    #[test]
    fn vis_drops_tau_and_wraps() {
        let p_send = Term::action(
            "p_send",
            vec![Term::var(Variable::fresh("m", Sort::Data, 1))],
        );
        let mut betas = BTreeMap::new();
        betas.insert("P".to_string(), p_send.clone());
        let v = vis(&betas);
        assert_eq!(v.get("P").unwrap(), &vec![p_send]);

        let mut taus = BTreeMap::new();
        taus.insert("J".to_string(), Term::tau());
        assert!(vis(&taus).is_empty());
        assert!(vis(&BTreeMap::new()).is_empty());
    }

    #[test]
    fn lift_keeps_components() {
        let oa = spec_oa();
        let (i, in_ot) = oa
            .transitions
            .iter()
            .enumerate()
            .find(|(_, t)| t.source.label() == "b0" && !t.hole_actions.is_empty() && t.guard == Predicate::True)
            .unwrap();
        let w = wt2_lift(in_ot, i);
        assert_eq!(w.source.label(), "b0");
        assert_eq!(w.target.label(), "b1");
        assert_eq!(w.hole_seqs.get("P").unwrap().len(), 1);
        assert_eq!(w.guard, in_ot.guard);
        assert_eq!(w.effect, in_ot.effect);

        // Lifting a τ transition leaves no hole requirements.
        let (j, tau_ot) = oa
            .transitions
            .iter()
            .enumerate()
            .find(|(_, t)| t.action.is_tau())
            .unwrap();
        let w = wt2_lift(tau_ot, j);
        assert!(w.hole_seqs.is_empty());
    }

    #[test]
    fn concatenating_increments_composes() {
        // τ-loop (b_ec <- b_ec+1) twice gives (b_ec <- b_ec+2).
        let oa = spec_oa();
        let (i, tau_inc) = oa
            .transitions
            .iter()
            .enumerate()
            .find(|(_, t)| t.action.is_tau())
            .unwrap();
        let w = wt2_lift(tau_inc, i);
        let state_idx = oa.states.iter().position(|s| s.label() == "b1").unwrap();
        let idle = wt1(&oa.states[state_idx], state_idx);
        let mut fresh = Freshener::new();
        let twice = wt3_concat(&w, &w, &idle, &mut fresh).unwrap();
        assert_eq!(twice.guard, Predicate::True);
        let (v, t) = twice.effect.iter().next().unwrap();
        assert_eq!(v.name, "b_ec");
        assert_eq!(t, &Term::plus(Term::var(v.clone()), 2));
        assert_eq!(twice.concat_count, 1);
    }

    #[test]
    fn identity_concatenation() {
        let oa = spec_oa();
        let (i, in_ot) = oa
            .transitions
            .iter()
            .enumerate()
            .find(|(_, t)| !t.hole_actions.is_empty() && t.source.label() == "b0" && t.guard == Predicate::True)
            .unwrap();
        let w = wt2_lift(in_ot, i);
        let b0 = oa.states.iter().position(|s| s.label() == "b0").unwrap();
        let b1 = oa.states.iter().position(|s| s.label() == "b1").unwrap();
        let mut fresh = Freshener::new();
        let padded = wt3_concat(
            &wt1(&oa.states[b0], b0),
            &w,
            &wt1(&oa.states[b1], b1),
            &mut fresh,
        )
        .unwrap();
        assert_eq!(padded.canonical_key(), w.canonical_key());
    }

    #[test]
    fn endpoint_mismatch_is_an_error() {
        let oa = spec_oa();
        let (i, t) = oa
            .transitions
            .iter()
            .enumerate()
            .find(|(_, t)| t.source != t.target)
            .unwrap();
        let w = wt2_lift(t, i);
        let idle_wrong = wt1(&oa.states[0], 0);
        let mut fresh = Freshener::new();
        // w: b0 -> b1, then idle at b0 does not chain.
        assert_eq!(
            wt3_concat(&w, &idle_wrong, &idle_wrong, &mut fresh).unwrap_err(),
            WeakError::EndpointMismatch
        );
    }

    #[test]
    fn depth_zero_is_reflexive_plus_lift() {
        let oa = spec_oa();
        let woa = saturate(&oa, SaturateOptions { depth: 0, budget: 10_000 }).unwrap();
        assert_eq!(woa.transitions.len(), oa.states.len() + oa.transitions.len());
    }

    #[test]
    fn saturation_contains_delayed_outputs() {
        // Variants of the delivering transition for 0, 1 and 2 silent
        // increments: b1 ==synchro(out(b_msg, b_ec+n))==> b0.
        let oa = spec_oa();
        let woa = saturate(&oa, SaturateOptions { depth: 2, budget: 10_000 }).unwrap();
        for n in 0..=2u64 {
            let b_ec = Variable::state("b_ec", Sort::Nat, "PerfectBuffer");
            let b_msg = Variable::state("b_msg", Sort::Data, "PerfectBuffer");
            let wanted_action = Term::action(
                "synchro",
                vec![Term::action(
                    "out",
                    vec![
                        Term::var(b_msg.clone()),
                        Term::plus(Term::var(b_ec.clone()), n),
                    ],
                )],
            );
            let found = woa.transitions.iter().any(|w| {
                w.source.label() == "b1"
                    && w.target.label() == "b0"
                    && w.action == wanted_action
                    && w.guard == Predicate::True
            });
            assert!(found, "missing delayed output for n={n}");
        }
    }

    #[test]
    fn saturation_is_monotone_in_depth() {
        let oa = impl_oa();
        let mut previous: std::collections::BTreeSet<String> = Default::default();
        for depth in 0..=2 {
            let woa = saturate(&oa, SaturateOptions { depth, budget: 50_000 }).unwrap();
            let keys: std::collections::BTreeSet<String> = woa
                .transitions
                .iter()
                .map(|w| w.canonical_key())
                .collect();
            assert!(previous.is_subset(&keys), "depth {depth} lost transitions");
            previous = keys;
        }
    }

    #[test]
    fn derivations_replay() {
        let oa = spec_oa();
        let woa = saturate(&oa, SaturateOptions { depth: 2, budget: 10_000 }).unwrap();
        let mut fresh = Freshener::new();
        for w in &woa.transitions {
            let again = replay(&w.derivation, &oa, &mut fresh);
            assert_eq!(again.canonical_key(), w.canonical_key());
        }
    }

    #[test]
    fn no_tau_in_hole_sequences() {
        let oa = impl_oa();
        let woa = saturate(&oa, SaturateOptions { depth: 2, budget: 50_000 }).unwrap();
        for w in &woa.transitions {
            for seq in w.hole_seqs.values() {
                assert!(seq.iter().all(|t| !t.is_tau()));
            }
        }
    }
}
