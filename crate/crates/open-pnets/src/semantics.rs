//! Derivation of the strong open automaton of a pNet.
//!
//! A pLTS transition becomes an open transition directly (guard and
//! assignments carried over, input parameters freshened per use). At a
//! node, every synchronisation vector is instantiated with fresh copies of
//! its variables; each filled child slot contributes the child's open
//! transitions, each filled hole slot a fresh hole-action variable, and the
//! guard collects the unification predicate relating child actions, hole
//! actions, the vector entries and the vector's own guard. Leaves not
//! involved keep their state. Reachability proceeds breadth-first from the
//! initial state, keeping only transitions with satisfiable guards.
//!
//! States carry control locations only; data stays symbolic in guards and
//! effects. With simplification on, intermediate equality-defined variables
//! (anything but state variables) are eliminated by substitution, which
//! reproduces the compact transitions used throughout the worked protocol
//! example.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::dsl::System;
use crate::logic::{self, Sat, Signature};
use crate::model::{GlobalState, HoleSort, PNet, Plts, PltsTransition, Slot, SyncVector};
use crate::term::{
    Canonicalizer, Freshener, Predicate, Renaming, Substitution, Term, Variable,
};

/// A symbolic transition of an open automaton.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpenTransition {
    pub source: GlobalState,
    pub target: GlobalState,
    /// Required action per involved hole (β).
    pub hole_actions: BTreeMap<String, Term>,
    /// The resulting global action (α).
    pub action: Term,
    /// The transition predicate (Pred).
    pub guard: Predicate,
    /// The effect on state variables (Post), a parallel substitution.
    pub effect: Substitution,
}

impl OpenTransition {
    /// Free variables of all components except the state variables.
    pub fn local_vars(&self) -> BTreeSet<Variable> {
        let mut vars: BTreeSet<Variable> = self.action.free_vars();
        for t in self.hole_actions.values() {
            vars.extend(t.free_vars());
        }
        vars.extend(self.guard.free_vars());
        vars.extend(self.effect.range_vars());
        vars.into_iter().filter(|v| !v.is_state()).collect()
    }

    /// Canonical alpha-renamed rendering; equal keys mean alpha-equivalent
    /// transitions.
    pub fn canonical_key(&self) -> String {
        let mut c = Canonicalizer::new();
        let mut out = String::new();
        let _ = write!(out, "{} => {}", self.source.label(), self.target.label());
        for (h, t) in &self.hole_actions {
            let _ = write!(out, " | {h} -> {}", c.term(t));
        }
        let _ = write!(out, " | {}", c.term(&self.action));
        let _ = write!(out, " | {}", c.pred(&self.guard));
        let _ = write!(out, " | {}", c.subst(&self.effect));
        out
    }
}

impl std::fmt::Display for OpenTransition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, (h, t)) in self.hole_actions.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{h} -> {t}")?;
        }
        write!(
            f,
            "}}, [{}], {} : {} --{}--> {}",
            self.guard,
            self.effect,
            self.source.label(),
            self.action,
            self.target.label()
        )
    }
}

/// Descriptive data for one leaf of the automaton.
#[derive(Debug, Clone, Serialize)]
pub struct LeafInfo {
    pub name: String,
    pub states: Vec<String>,
    pub initial: String,
    pub vars: Vec<Variable>,
}

/// The symbolic semantics of a pNet.
#[derive(Debug, Clone, Serialize)]
pub struct OpenAutomaton {
    pub name: String,
    pub holes: Vec<(String, HoleSort)>,
    pub leaves: Vec<LeafInfo>,
    pub states: Vec<GlobalState>,
    pub initial: GlobalState,
    pub vars: Vec<Variable>,
    pub transitions: Vec<OpenTransition>,
    #[serde(skip)]
    pub signature: Signature,
    /// Derivation statistics: satisfiable / discarded-unsatisfiable counts.
    pub sat_count: usize,
    pub unsat_count: usize,
}

impl OpenAutomaton {
    pub fn transitions_from<'a>(
        &'a self,
        state: &'a GlobalState,
    ) -> impl Iterator<Item = (usize, &'a OpenTransition)> + 'a {
        self.transitions
            .iter()
            .enumerate()
            .filter(move |(_, t)| &t.source == state)
    }

    /// Resolves a state name: either the canonical `s0_m0_r0` label or the
    /// compact digit form (`000` = first state of each leaf, in order).
    pub fn resolve_state(&self, token: &str) -> Option<GlobalState> {
        for s in &self.states {
            if s.label() == token {
                return Some(s.clone());
            }
        }
        if token.len() == self.leaves.len() && token.chars().all(|c| c.is_ascii_digit()) {
            let mut parts = Vec::new();
            for (leaf, c) in self.leaves.iter().zip(token.chars()) {
                let idx = c.to_digit(10).unwrap() as usize;
                parts.push(leaf.states.get(idx)?.clone());
            }
            let state = GlobalState(parts);
            if self.states.contains(&state) {
                return Some(state);
            }
        }
        None
    }

    /// The compact digit label of a state, when every leaf state index fits
    /// a single digit.
    pub fn short_label(&self, state: &GlobalState) -> Option<String> {
        let mut out = String::new();
        for (leaf, s) in self.leaves.iter().zip(&state.0) {
            let idx = leaf.states.iter().position(|x| x == s)?;
            if idx > 9 {
                return None;
            }
            let _ = write!(out, "{idx}");
        }
        Some(out)
    }

    /// JSON rendering with stringified terms and predicates.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        json!({
            "kind": "open-automaton",
            "name": self.name,
            "holes": self.holes.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
            "leaves": self.leaves.iter().map(|l| json!({
                "name": l.name,
                "states": l.states,
                "initial": l.initial,
            })).collect::<Vec<_>>(),
            "states": self.states.iter().map(|s| s.label()).collect::<Vec<_>>(),
            "initial": self.initial.label(),
            "vars": self.vars.iter().map(|v| json!({
                "name": v.name,
                "sort": v.sort.to_string(),
            })).collect::<Vec<_>>(),
            "transitions": self.transitions.iter().map(|t| json!({
                "source": t.source.label(),
                "target": t.target.label(),
                "holeActions": t.hole_actions.iter()
                    .map(|(h, a)| (h.clone(), serde_json::Value::String(a.to_string())))
                    .collect::<serde_json::Map<_, _>>(),
                "action": t.action.to_string(),
                "guard": t.guard.to_string(),
                "post": t.effect.to_string(),
            })).collect::<Vec<_>>(),
            "stats": {
                "satisfiable": self.sat_count,
                "unsatisfiable": self.unsat_count,
            },
        })
    }

    /// GraphViz rendering: states as nodes, transitions as edges labelled
    /// `βs | α | Pred | Post`.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph open_automaton {\n  rankdir=LR;\n");
        let _ = writeln!(
            out,
            "  init [shape=point]; init -> {:?};",
            self.initial.label()
        );
        for s in &self.states {
            let _ = writeln!(out, "  {:?} [shape=ellipse];", s.label());
        }
        for t in &self.transitions {
            let holes: Vec<String> = t
                .hole_actions
                .iter()
                .map(|(h, a)| format!("{h}->{a}"))
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
                "  {:?} -> {:?} [label={:?}];",
                t.source.label(),
                t.target.label(),
                label
            );
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DeriveOptions {
    /// Eliminate intermediate equality-defined variables from derived
    /// transitions.
    pub simplify: bool,
    /// Maximum number of reachable global states to explore.
    pub state_cap: usize,
}

impl Default for DeriveOptions {
    fn default() -> Self {
        DeriveOptions {
            simplify: true,
            state_cap: 10_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("state budget exceeded: more than {0} reachable global states")]
    StateCapExceeded(usize),
}

/// Derives the open automaton of an elaborated system.
pub fn derive(system: &System, opts: DeriveOptions) -> Result<OpenAutomaton, SemanticsError> {
    derive_pnet(&system.net, &system.signature, opts)
}

/// Derives the open automaton of a pNet against an explicit signature.
pub fn derive_pnet(
    net: &PNet,
    signature: &Signature,
    opts: DeriveOptions,
) -> Result<OpenAutomaton, SemanticsError> {
    let leaves: Vec<LeafInfo> = net
        .leaves()
        .iter()
        .map(|p| LeafInfo {
            name: p.name.clone(),
            states: p.states.clone(),
            initial: p.initial.clone(),
            vars: p.vars.clone(),
        })
        .collect();
    let initial = net.initial_state();
    let mut fresh = Freshener::new();

    let mut states: BTreeSet<GlobalState> = BTreeSet::new();
    let mut order: Vec<GlobalState> = Vec::new();
    let mut queue: VecDeque<GlobalState> = VecDeque::new();
    states.insert(initial.clone());
    order.push(initial.clone());
    queue.push_back(initial.clone());

    let mut seen_keys: BTreeSet<String> = BTreeSet::new();
    let mut transitions: Vec<OpenTransition> = Vec::new();
    let mut unsat = 0usize;

    while let Some(state) = queue.pop_front() {
        let mut found: Vec<OpenTransition> = Vec::new();
        for local in local_transitions(net, 0, &state, &mut fresh) {
            let mut ot = local.into_transition(&state);
            let quick = logic::simplify(&ot.guard);
            if quick == Predicate::False {
                unsat += 1;
                continue;
            }
            ot.guard = quick;
            // Unknown verdicts are kept: dropping a possibly-satisfiable
            // transition would under-approximate the semantics.
            if matches!(logic::is_satisfiable(signature, &ot.guard), Sat::Unsat) {
                unsat += 1;
                continue;
            }
            if opts.simplify {
                ot = simplify_transition(&ot);
            }
            found.push(ot);
        }
        // Deterministic order and alpha-deduplication.
        found.sort_by_key(|t| t.canonical_key());
        for ot in found {
            if !seen_keys.insert(ot.canonical_key()) {
                continue;
            }
            if states.insert(ot.target.clone()) {
                if states.len() > opts.state_cap {
                    return Err(SemanticsError::StateCapExceeded(opts.state_cap));
                }
                order.push(ot.target.clone());
                queue.push_back(ot.target.clone());
            }
            transitions.push(ot);
        }
    }

    let sat = transitions.len();
    Ok(OpenAutomaton {
        name: net.name().to_string(),
        holes: net.holes(),
        leaves,
        states: order,
        initial,
        vars: net.state_vars(),
        transitions,
        signature: signature.clone(),
        sat_count: sat,
        unsat_count: unsat,
    })
}

/// An in-progress transition over a subtree: leaf moves by global index,
/// guard kept as a conjunct list.
struct LocalOt {
    moves: BTreeMap<usize, String>,
    holes: BTreeMap<String, Term>,
    action: Term,
    guard: Vec<Predicate>,
    effect: Substitution,
}

impl LocalOt {
    fn into_transition(self, source: &GlobalState) -> OpenTransition {
        let mut target = source.clone();
        for (idx, next) in &self.moves {
            target.0[*idx] = next.clone();
        }
        OpenTransition {
            source: source.clone(),
            target,
            hole_actions: self.holes,
            action: self.action,
            guard: Predicate::and(self.guard),
            effect: self.effect,
        }
    }
}

/// Rule for a pLTS: one open transition per source-state transition, with
/// input parameters instantiated fresh.
fn leaf_transitions(
    plts: &Plts,
    leaf_index: usize,
    state: &str,
    fresh: &mut Freshener,
) -> Vec<LocalOt> {
    let mut out = Vec::new();
    for t in plts.transitions_from(state) {
        let (action, guard, effect) = instantiate_plts_transition(t, fresh);
        out.push(LocalOt {
            moves: BTreeMap::from([(leaf_index, t.target.clone())]),
            holes: BTreeMap::new(),
            action,
            guard: if guard == Predicate::True {
                vec![]
            } else {
                vec![guard]
            },
            effect,
        });
    }
    out
}

fn instantiate_plts_transition(
    t: &PltsTransition,
    fresh: &mut Freshener,
) -> (Term, Predicate, Substitution) {
    let select = |v: &Variable| !v.is_state();
    let mut renaming = Renaming::new();
    let action = fresh
        .freshen_term(&t.action.strip_input_markers(), &select, &mut renaming);
    let guard = fresh.freshen_pred(&t.guard, &select, &mut renaming);
    let effect = fresh.freshen_subst_range(&t.assigns, &select, &mut renaming);
    (action, guard, effect)
}

/// The open transition of a single pLTS transition (rule Tr1), over the
/// one-leaf state space.
pub fn plts_transition(plts: &Plts, index: usize, fresh: &mut Freshener) -> OpenTransition {
    let t = &plts.transitions[index];
    let (action, guard, effect) = instantiate_plts_transition(t, fresh);
    OpenTransition {
        source: GlobalState(vec![t.source.clone()]),
        target: GlobalState(vec![t.target.clone()]),
        hole_actions: BTreeMap::new(),
        action,
        guard,
        effect,
    }
}

/// The unification predicate of a synchronisation vector: child actions
/// and hole actions equated with the (freshened) vector entries, the
/// result equated with the vector's action, plus the vector guard.
pub fn pred_sv(
    sv: &SyncVector,
    child_actions: &BTreeMap<usize, Term>,
    hole_actions: &BTreeMap<usize, Term>,
    alpha: &Term,
    fresh: &mut Freshener,
) -> Predicate {
    let mut renaming = Renaming::new();
    let select = |v: &Variable| !v.is_state();
    let mut conjuncts = Vec::new();
    for (slot, action) in child_actions.iter().chain(hole_actions.iter()) {
        if let Some(Some(entry)) = sv.slots.get(*slot) {
            let entry = fresh.freshen_term(entry, &select, &mut renaming);
            conjuncts.push(Predicate::Eq(action.clone(), entry));
        }
    }
    let result = fresh.freshen_term(&sv.result, &select, &mut renaming);
    conjuncts.push(Predicate::Eq(alpha.clone(), result));
    let guard = fresh.freshen_pred(&sv.guard, &select, &mut renaming);
    if guard != Predicate::True {
        conjuncts.push(guard);
    }
    Predicate::and(conjuncts)
}

/// All transitions of a subtree from the projection of `state`, with leaf
/// indices offset by `leaf_base`.
fn local_transitions(
    net: &PNet,
    leaf_base: usize,
    state: &GlobalState,
    fresh: &mut Freshener,
) -> Vec<LocalOt> {
    match net {
        PNet::Leaf(p) => leaf_transitions(p, leaf_base, &state.0[leaf_base], fresh),
        PNet::Node(node) => {
            // Leaf index ranges per slot, in preorder.
            let mut slot_bases = Vec::with_capacity(node.slots.len());
            let mut base = leaf_base;
            for slot in &node.slots {
                slot_bases.push(base);
                if let Slot::Child { net, .. } = slot {
                    base += net.leaves().len();
                }
            }

            let mut out = Vec::new();
            'vectors: for sv in &node.vectors {
                if sv.slots.len() != node.slots.len() {
                    continue;
                }
                // A τ of a hole is never synchronised or observed; those
                // moves are implicit in the semantics (the weak layer's
                // reflexive rule accounts for them), so idle vectors on
                // hole slots generate no transitions.
                let filled: Vec<usize> = (0..sv.slots.len())
                    .filter(|i| sv.slots[*i].is_some())
                    .collect();
                if filled.len() == 1 {
                    if let (Slot::Hole { .. }, Some(entry)) =
                        (&node.slots[filled[0]], &sv.slots[filled[0]])
                    {
                        if entry.is_tau() {
                            continue 'vectors;
                        }
                    }
                }

                // Candidates per filled child slot; fresh hole variables
                // per filled hole slot.
                let mut parts: Vec<Vec<LocalOt>> = Vec::new();
                let mut hole_parts: Vec<(String, Variable, usize)> = Vec::new();
                for &i in &filled {
                    match &node.slots[i] {
                        Slot::Child { net, .. } => {
                            let cands = local_transitions(net, slot_bases[i], state, fresh);
                            if cands.is_empty() {
                                continue 'vectors;
                            }
                            parts.push(cands);
                        }
                        Slot::Hole { name, .. } => {
                            let v = fresh.clone_var(&Variable::hole_action("a", name.clone()));
                            hole_parts.push((name.clone(), v, i));
                        }
                    }
                }

                // Instantiate the vector's variables once per product
                // element, so distinct transitions never share them.
                let child_slots: Vec<usize> = filled
                    .iter()
                    .copied()
                    .filter(|i| matches!(node.slots[*i], Slot::Child { .. }))
                    .collect();
                for combo in product(&parts) {
                    let select = |v: &Variable| !v.is_state();
                    let mut renaming = Renaming::new();
                    let mut guard: Vec<Predicate> = Vec::new();
                    let mut moves = BTreeMap::new();
                    let mut holes = BTreeMap::new();
                    let mut effect = Substitution::new();
                    let mut ok = true;
                    for (slot_idx, cand) in child_slots.iter().zip(&combo) {
                        let entry = sv.slots[*slot_idx].as_ref().unwrap();
                        let entry = fresh.freshen_term(entry, &select, &mut renaming);
                        guard.push(Predicate::Eq(cand.action.clone(), entry));
                        guard.extend(cand.guard.iter().cloned());
                        moves.extend(cand.moves.iter().map(|(k, v)| (*k, v.clone())));
                        for (h, a) in &cand.holes {
                            holes.insert(h.clone(), a.clone());
                        }
                        match Substitution::union_disjoint(&effect, &cand.effect) {
                            Ok(e) => effect = e,
                            Err(_) => {
                                // Distinct children share no variables, so
                                // this cannot happen on validated input.
                                ok = false;
                                break;
                            }
                        }
                    }
                    if !ok {
                        continue;
                    }
                    for (name, v, slot_idx) in &hole_parts {
                        let entry = sv.slots[*slot_idx].as_ref().unwrap();
                        let entry = fresh.freshen_term(entry, &select, &mut renaming);
                        guard.push(Predicate::Eq(Term::Var(v.clone()), entry));
                        holes.insert(name.clone(), Term::Var(v.clone()));
                    }
                    let action = fresh.freshen_term(&sv.result, &select, &mut renaming);
                    let vguard = fresh.freshen_pred(&sv.guard, &select, &mut renaming);
                    if vguard != Predicate::True {
                        guard.push(vguard);
                    }
                    out.push(LocalOt {
                        moves,
                        holes,
                        action,
                        guard,
                        effect,
                    });
                }
            }
            out
        }
    }
}

fn product<'a>(parts: &'a [Vec<LocalOt>]) -> Vec<Vec<&'a LocalOt>> {
    let mut out: Vec<Vec<&LocalOt>> = vec![vec![]];
    for part in parts {
        let mut next = Vec::new();
        for row in &out {
            for item in part {
                let mut row = row.clone();
                row.push(item);
                next.push(row);
            }
        }
        out = next;
    }
    out
}

/// Eliminates intermediate variables from a transition: any guard conjunct
/// `x = t` whose variable is not a state variable (and does not occur in
/// `t`) is removed by substituting `t` throughout the transition. When both
/// sides are such variables the one introduced later (deeper instantiation
/// first, so later means closer to the surface) survives.
pub fn simplify_transition(ot: &OpenTransition) -> OpenTransition {
    let mut ot = ot.clone();
    loop {
        ot.guard = logic::simplify(&ot.guard);
        let conjuncts: Vec<Predicate> = match &ot.guard {
            Predicate::And(ps) => ps.clone(),
            Predicate::True => vec![],
            other => vec![other.clone()],
        };
        let mut chosen: Option<(usize, Variable, Term)> = None;
        for (i, c) in conjuncts.iter().enumerate() {
            let Predicate::Eq(a, b) = c else { continue };
            let mut candidates: Vec<(Variable, Term)> = Vec::new();
            if let Term::Var(v) = a {
                if eliminable(v, b) {
                    candidates.push((v.clone(), b.clone()));
                }
            }
            if let Term::Var(v) = b {
                if eliminable(v, a) {
                    candidates.push((v.clone(), a.clone()));
                }
            }
            // Prefer eliminating the variable created earliest; the
            // outermost instantiation survives, matching the names shown
            // in presentations of derived transitions.
            candidates.sort_by_key(|(v, _)| v.clone_id);
            if let Some((v, t)) = candidates.into_iter().next() {
                chosen = Some((i, v, t));
                break;
            }
        }
        let Some((idx, var, term)) = chosen else {
            return ot;
        };
        let sub = Substitution::singleton(var, term).expect("eliminable binding is well-sorted");
        let rest: Vec<Predicate> = conjuncts
            .into_iter()
            .enumerate()
            .filter(|(j, _)| *j != idx)
            .map(|(_, c)| sub.apply_pred(&c))
            .collect();
        ot.guard = Predicate::and(rest);
        ot.action = sub.apply(&ot.action);
        for t in ot.hole_actions.values_mut() {
            *t = sub.apply(t);
        }
        ot.effect = sub.apply_subst(&ot.effect);
    }
}

fn eliminable(v: &Variable, other: &Term) -> bool {
    !v.is_state() && !other.free_vars().contains(v)
}

/// Glues a transition of an open pNet `P` with a transition of a pNet `Q`
/// destined for hole `hole` of `P` (the composition law of open
/// transitions). `insert_at` is the position of the hole's leaves within
/// the filled pNet's leaf order.
pub fn compose_transitions(
    p_ot: &OpenTransition,
    hole: &str,
    q_ot: &OpenTransition,
    insert_at: usize,
) -> Option<OpenTransition> {
    let beta = p_ot.hole_actions.get(hole)?;
    let mut holes = p_ot.hole_actions.clone();
    holes.remove(hole);
    for (h, a) in &q_ot.hole_actions {
        holes.insert(h.clone(), a.clone());
    }
    let splice = |outer: &GlobalState, inner: &GlobalState| {
        let mut out = outer.0.clone();
        out.splice(insert_at..insert_at, inner.0.iter().cloned());
        GlobalState(out)
    };
    let guard = Predicate::and(vec![
        p_ot.guard.clone(),
        q_ot.guard.clone(),
        Predicate::Eq(q_ot.action.clone(), beta.clone()),
    ]);
    let effect = Substitution::union_disjoint(&p_ot.effect, &q_ot.effect).ok()?;
    Some(OpenTransition {
        source: splice(&p_ot.source, &q_ot.source),
        target: splice(&p_ot.target, &q_ot.target),
        hole_actions: holes,
        action: p_ot.action.clone(),
        guard,
        effect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl;

    fn spec() -> System {
        dsl::load_system(include_str!("../../../corpus/simple_prot_spec.pnet"), &[]).unwrap()
    }

    fn implementation() -> System {
        dsl::load_system(include_str!("../../../corpus/simple_prot_impl.pnet"), &[]).unwrap()
    }

    #[test]
    fn plts_rule_carries_guard_and_effect() {
        let sys = spec();
        let buffer = sys.net.leaves()[0];
        let mut fresh = Freshener::new();
        let ot = plts_transition(buffer, 0, &mut fresh);
        assert_eq!(ot.source.label(), "b0");
        assert_eq!(ot.target.label(), "b1");
        assert!(ot.hole_actions.is_empty());
        assert_eq!(ot.guard, Predicate::True);
        // in(m) with Post (b_msg <- m, b_ec <- 0)
        let (name, arity) = ot.action.ctor_head().unwrap();
        assert_eq!((name, arity), ("in", 1));
        assert_eq!(ot.effect.len(), 2);

        // A transition with no assignments has an empty effect.
        let ot_out = plts_transition(buffer, 1, &mut fresh);
        assert!(ot_out.effect.is_empty());

        // The error loop increments the counter.
        let ot_tau = plts_transition(buffer, 2, &mut fresh);
        assert!(ot_tau.action.is_tau());
        let (v, t) = ot_tau.effect.iter().next().unwrap();
        assert_eq!(v.name, "b_ec");
        assert_eq!(t, &Term::plus(Term::var(v.clone()), 1));
    }

    #[test]
    fn spec_automaton_counts() {
        let sys = spec();
        let oa = derive(&sys, DeriveOptions::default()).unwrap();
        assert_eq!(oa.states.len(), 2);
        assert_eq!(oa.transitions.len(), 7);
        let from_b0 = oa
            .transitions
            .iter()
            .filter(|t| t.source.label() == "b0")
            .count();
        let from_b1 = oa
            .transitions
            .iter()
            .filter(|t| t.source.label() == "b1")
            .count();
        assert_eq!((from_b0, from_b1), (3, 4));
    }

    #[test]
    fn impl_automaton_counts() {
        let sys = implementation();
        let oa = derive(&sys, DeriveOptions::default()).unwrap();
        assert_eq!(oa.states.len(), 6);
        assert_eq!(oa.transitions.len(), 19);
    }

    #[test]
    fn state_resolution_supports_digit_labels() {
        let sys = implementation();
        let oa = derive(&sys, DeriveOptions::default()).unwrap();
        let s = oa.resolve_state("210").unwrap();
        assert_eq!(s.label(), "s2_m1_r0");
        assert_eq!(oa.short_label(&s).unwrap(), "210");
        assert!(oa.resolve_state("999").is_none());
    }

    #[test]
    fn frame_condition_holds() {
        let sys = implementation();
        let oa = derive(&sys, DeriveOptions::default()).unwrap();
        // Transitions only move the leaves they mention; every other leaf
        // keeps its state. The P/Q loops move nothing.
        for t in &oa.transitions {
            if !t.hole_actions.is_empty() && t.action.ctor_head().is_none() {
                assert_eq!(t.source, t.target);
            }
        }
    }

    #[test]
    fn every_guard_is_satisfiable() {
        let sys = spec();
        let oa = derive(&sys, DeriveOptions::default()).unwrap();
        for t in &oa.transitions {
            assert!(
                logic::is_satisfiable(&oa.signature, &t.guard).is_sat(),
                "unsatisfiable guard survived: {t}"
            );
        }
    }
}
