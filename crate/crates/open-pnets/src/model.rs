//! The structural pNet model: pLTS leaves, holes with sorts,
//! synchronisation vectors, the sort/holes/leaves functions of the theory,
//! hole-filling composition, and the static non-observability check.
//!
//! A pNet node is an ordered list of *slots* — each a sub-pNet or a hole —
//! synchronised by vectors whose entries align with the slots positionally
//! (`_` entries are absent). Everything is immutable after validation.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::logic::Signature;
use crate::term::{
    check_input_linearity, Freshener, Predicate, Renaming, Sort, Substitution, Term, Variable,
};

/// A guarded, parameterised transition of a pLTS.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PltsTransition {
    /// Stable identifier, used as the origin of this transition's input
    /// variables (e.g. `Sender.0`).
    pub id: String,
    pub source: String,
    pub target: String,
    /// Action term; input parameters appear as `Term::Input`.
    pub action: Term,
    pub guard: Predicate,
    /// Parallel assignments performed by the transition.
    pub assigns: Substitution,
}

/// A parameterised labelled transition system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plts {
    pub name: String,
    /// States in declaration order; the order defines the digits of the
    /// compact global-state labels.
    pub states: Vec<String>,
    pub initial: String,
    /// Global variables of the pLTS.
    pub vars: Vec<Variable>,
    pub transitions: Vec<PltsTransition>,
}

/// The sort of a hole: the action patterns a filling pNet may exhibit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum HoleSort {
    /// Any action at all (the default when the source declares none).
    Universal,
    /// Action-term patterns; variables act as wildcards.
    Patterns(Vec<Term>),
}

impl HoleSort {
    /// Does an action term match this sort?
    pub fn admits(&self, action: &Term) -> bool {
        match self {
            HoleSort::Universal => true,
            HoleSort::Patterns(pats) => pats.iter().any(|p| pattern_matches(p, action)),
        }
    }
}

/// Pattern matching on action shapes: a variable matches any term of its
/// sort, constructors match the same constructor with matching arguments.
pub fn pattern_matches(pattern: &Term, term: &Term) -> bool {
    match (pattern, term) {
        (Term::Var(v), t) | (Term::Input(v), t) => v.sort == t.sort(),
        (t, Term::Var(v)) | (t, Term::Input(v)) => v.sort == t.sort(),
        (Term::Nat(_), t) | (Term::Plus(_, _), t) => t.sort() == Sort::Nat,
        (t, Term::Nat(_)) | (t, Term::Plus(_, _)) => t.sort() == Sort::Nat,
        (
            Term::Ctor {
                name: np, args: ap, ..
            },
            Term::Ctor {
                name: nt, args: at, ..
            },
        ) => np == nt && ap.len() == at.len() && ap.iter().zip(at).all(|(p, t)| pattern_matches(p, t)),
    }
}

/// One position of a pNet node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Slot {
    Child { name: String, net: PNet },
    Hole { name: String, sort: HoleSort },
}

impl Slot {
    pub fn name(&self) -> &str {
        match self {
            Slot::Child { name, .. } => name,
            Slot::Hole { name, .. } => name,
        }
    }
}

/// A synchronisation vector: per-slot action terms (aligned with the node's
/// slots, `None` for `_`), a result action, and a guard.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncVector {
    pub id: String,
    pub slots: Vec<Option<Term>>,
    pub result: Term,
    pub guard: Predicate,
    /// True for the idle-τ vectors inserted by elaboration rather than
    /// written in the source.
    pub synthesized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PNetNode {
    pub name: String,
    pub slots: Vec<Slot>,
    pub vectors: Vec<SyncVector>,
}

/// A pNet: a pLTS leaf or a synchronising node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PNet {
    Leaf(Plts),
    Node(PNetNode),
}

/// A global state: one control state per leaf, in leaf order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GlobalState(pub Vec<String>);

impl GlobalState {
    /// Canonical name: leaf states joined by `_`.
    pub fn label(&self) -> String {
        self.0.join("_")
    }
}

impl fmt::Display for GlobalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0.join(","))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("{0} is not a hole of this pNet")]
    NoSuchHole(String),
    #[error("sort mismatch filling hole {hole}: action {action} is not admitted")]
    SortMismatch { hole: String, action: String },
    #[error("cannot fill a hole of a pLTS leaf")]
    LeafHasNoHoles,
}

/// A single validation finding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

impl Plts {
    pub fn transitions_from<'a>(
        &'a self,
        state: &'a str,
    ) -> impl Iterator<Item = &'a PltsTransition> + 'a {
        self.transitions.iter().filter(move |t| t.source == state)
    }

    /// Index of a state in declaration order.
    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

impl PNet {
    pub fn name(&self) -> &str {
        match self {
            PNet::Leaf(p) => &p.name,
            PNet::Node(n) => &n.name,
        }
    }

    /// The sort: action signatures this pNet can exhibit. For a pLTS these
    /// are its transition actions with input markers stripped; for a node,
    /// the result actions of its vectors. One entry per constructor/arity.
    pub fn sort(&self) -> Vec<Term> {
        let mut out: Vec<Term> = Vec::new();
        let mut seen: BTreeSet<(String, usize)> = BTreeSet::new();
        let mut push = |t: Term| {
            let key = match t.ctor_head() {
                Some((name, arity)) => (name.to_string(), arity),
                None => (t.to_string(), usize::MAX),
            };
            if seen.insert(key) {
                out.push(t);
            }
        };
        match self {
            PNet::Leaf(p) => {
                for t in &p.transitions {
                    push(t.action.strip_input_markers());
                }
            }
            PNet::Node(n) => {
                for v in &n.vectors {
                    push(v.result.clone());
                }
            }
        }
        out
    }

    /// All holes of the tree with their sorts, in preorder.
    pub fn holes(&self) -> Vec<(String, HoleSort)> {
        let mut out = Vec::new();
        self.collect_holes(&mut out);
        out
    }

    fn collect_holes(&self, out: &mut Vec<(String, HoleSort)>) {
        if let PNet::Node(n) = self {
            for slot in &n.slots {
                match slot {
                    Slot::Hole { name, sort } => out.push((name.clone(), sort.clone())),
                    Slot::Child { net, .. } => net.collect_holes(out),
                }
            }
        }
    }

    /// All pLTS leaves in preorder (the order fixing global-state tuples).
    pub fn leaves(&self) -> Vec<&Plts> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Plts>) {
        match self {
            PNet::Leaf(p) => out.push(p),
            PNet::Node(n) => {
                for slot in &n.slots {
                    if let Slot::Child { net, .. } = slot {
                        net.collect_leaves(out);
                    }
                }
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.holes().is_empty()
    }

    /// The initial global state: each leaf in its initial control state.
    pub fn initial_state(&self) -> GlobalState {
        GlobalState(self.leaves().iter().map(|p| p.initial.clone()).collect())
    }

    /// All state variables of all leaves.
    pub fn state_vars(&self) -> Vec<Variable> {
        self.leaves().iter().flat_map(|p| p.vars.clone()).collect()
    }

    /// Fills hole `hole` of the top-level node with `filler`. The filler's
    /// sort must be admitted by the hole's sort; the filler's variables are
    /// freshened if they collide with variables already in the tree.
    pub fn fill_hole(&self, hole: &str, filler: PNet) -> Result<PNet, ModelError> {
        let PNet::Node(node) = self else {
            return Err(ModelError::LeafHasNoHoles);
        };
        let Some(pos) = node
            .slots
            .iter()
            .position(|s| matches!(s, Slot::Hole { name, .. } if name == hole))
        else {
            return Err(ModelError::NoSuchHole(hole.to_string()));
        };
        let Slot::Hole { sort, .. } = &node.slots[pos] else {
            unreachable!()
        };
        for action in filler.sort() {
            if !sort.admits(&action) {
                return Err(ModelError::SortMismatch {
                    hole: hole.to_string(),
                    action: action.to_string(),
                });
            }
        }
        let existing: BTreeSet<Variable> = self.state_vars().into_iter().collect();
        let clash: BTreeSet<Variable> = filler
            .state_vars()
            .into_iter()
            .filter(|v| existing.contains(v))
            .collect();
        let filler = if clash.is_empty() {
            filler
        } else {
            let mut fresh = Freshener::new();
            let mut renaming = Renaming::new();
            rename_pnet(&filler, &mut fresh, &clash, &mut renaming)
        };
        let mut node = node.clone();
        node.slots[pos] = Slot::Child {
            name: hole.to_string(),
            net: filler,
        };
        Ok(PNet::Node(node))
    }

    /// Structural validity diagnostics; an empty list means the pNet
    /// satisfies every model invariant.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        self.validate_into(&mut out);
        // Variable disjointness across leaves.
        let mut seen: BTreeSet<Variable> = BTreeSet::new();
        for leaf in self.leaves() {
            for v in &leaf.vars {
                if !seen.insert(v.clone()) {
                    out.push(Diagnostic {
                        location: leaf.name.clone(),
                        message: format!("variable disjointness violated: {v} is declared twice"),
                    });
                }
            }
        }
        // Hole indices globally unique.
        let mut names: BTreeSet<String> = BTreeSet::new();
        for (h, _) in self.holes() {
            if !names.insert(h.clone()) {
                out.push(Diagnostic {
                    location: h.clone(),
                    message: "duplicate hole index across the tree".into(),
                });
            }
        }
        out
    }

    fn validate_into(&self, out: &mut Vec<Diagnostic>) {
        match self {
            PNet::Leaf(p) => validate_plts(p, out),
            PNet::Node(n) => {
                validate_node(n, out);
                for slot in &n.slots {
                    if let Slot::Child { net, .. } = slot {
                        net.validate_into(out);
                    }
                }
            }
        }
    }

    /// Checks the static non-observability condition: (a) every slot has
    /// an idle vector `<i ↦ τ> → τ [true]`, and (b) every vector in which
    /// a *hole* slot is τ is exactly such an idle vector. Violations are
    /// reported per node.
    pub fn check_non_observability(&self) -> NonObservabilityReport {
        let mut report = NonObservabilityReport::default();
        self.check_non_obs_into(&mut report);
        report
    }

    fn check_non_obs_into(&self, report: &mut NonObservabilityReport) {
        let PNet::Node(n) = self else { return };
        for (i, slot) in n.slots.iter().enumerate() {
            let has_idle = n.vectors.iter().any(|v| {
                v.result.is_tau()
                    && v.guard == Predicate::True
                    && v.slots.len() == n.slots.len()
                    && v.slots.iter().enumerate().all(|(j, s)| match s {
                        Some(t) => j == i && t.is_tau(),
                        None => j != i,
                    })
            });
            if !has_idle {
                report.violations.push(Diagnostic {
                    location: format!("{}/{}", n.name, slot.name()),
                    message: "missing idle vector <tau> -> tau [true]".into(),
                });
            }
        }
        for v in &n.vectors {
            let mut tau_hole = None;
            let mut filled = 0;
            for (j, s) in v.slots.iter().enumerate() {
                if let Some(t) = s {
                    filled += 1;
                    if t.is_tau() && matches!(n.slots.get(j), Some(Slot::Hole { .. })) {
                        tau_hole = Some(j);
                    }
                }
            }
            if let Some(j) = tau_hole {
                if !v.result.is_tau() || filled != 1 {
                    report.violations.push(Diagnostic {
                        location: format!("{}/{}", n.name, v.id),
                        message: format!(
                            "vector observes a silent action of hole {}",
                            n.slots[j].name()
                        ),
                    });
                }
            }
        }
        for slot in &n.slots {
            if let Slot::Child { net, .. } = slot {
                net.check_non_obs_into(report);
            }
        }
    }

    /// JSON rendering of the tree with stable field names: every node has
    /// a `kind`, nodes carry `children`, `holes`, `vectors` and the slot
    /// `order`; terms and predicates are rendered as strings.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::json;
        match self {
            PNet::Leaf(p) => json!({
                "kind": "plts",
                "name": p.name,
                "states": p.states,
                "initial": p.initial,
                "vars": p.vars.iter().map(|v| json!({
                    "name": v.name,
                    "sort": v.sort.to_string(),
                })).collect::<Vec<_>>(),
                "transitions": p.transitions.iter().map(|t| json!({
                    "id": t.id,
                    "source": t.source,
                    "target": t.target,
                    "action": t.action.to_string(),
                    "guard": t.guard.to_string(),
                    "assigns": t.assigns.iter().map(|(v, e)| json!({
                        "var": v.name,
                        "value": e.to_string(),
                    })).collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
            }),
            PNet::Node(n) => {
                let mut children = serde_json::Map::new();
                let mut holes = serde_json::Map::new();
                for slot in &n.slots {
                    match slot {
                        Slot::Child { name, net } => {
                            children.insert(name.clone(), net.to_json());
                        }
                        Slot::Hole { name, sort } => {
                            let rendered = match sort {
                                HoleSort::Universal => json!("universal"),
                                HoleSort::Patterns(pats) => json!(pats
                                    .iter()
                                    .map(|p| p.to_string())
                                    .collect::<Vec<_>>()),
                            };
                            holes.insert(name.clone(), rendered);
                        }
                    }
                }
                json!({
                    "kind": "node",
                    "name": n.name,
                    "order": n.slots.iter().map(|s| s.name()).collect::<Vec<_>>(),
                    "children": children,
                    "holes": holes,
                    "vectors": n.vectors.iter().map(|v| json!({
                        "id": v.id,
                        "slots": v.slots.iter().map(|s| s.as_ref().map(|t| t.to_string())).collect::<Vec<_>>(),
                        "result": v.result.to_string(),
                        "guard": v.guard.to_string(),
                        "synthesized": v.synthesized,
                    })).collect::<Vec<_>>(),
                })
            }
        }
    }

    /// Infers the constructor signature from every action and expression in
    /// the tree.
    pub fn infer_signature(&self) -> Result<Signature, crate::logic::SignatureError> {
        let mut sig = Signature::new();
        self.absorb_signature(&mut sig)?;
        Ok(sig)
    }

    fn absorb_signature(&self, sig: &mut Signature) -> Result<(), crate::logic::SignatureError> {
        match self {
            PNet::Leaf(p) => {
                for t in &p.transitions {
                    sig.absorb_term(&t.action.strip_input_markers())?;
                    sig.absorb_pred(&t.guard)?;
                    for (_, rhs) in t.assigns.iter() {
                        sig.absorb_term(rhs)?;
                    }
                }
                Ok(())
            }
            PNet::Node(n) => {
                for v in &n.vectors {
                    for s in v.slots.iter().flatten() {
                        sig.absorb_term(&s.strip_input_markers())?;
                    }
                    sig.absorb_term(&v.result)?;
                    sig.absorb_pred(&v.guard)?;
                }
                for slot in &n.slots {
                    match slot {
                        Slot::Child { net, .. } => net.absorb_signature(sig)?,
                        Slot::Hole { sort, .. } => {
                            if let HoleSort::Patterns(pats) = sort {
                                for p in pats {
                                    sig.absorb_term(p)?;
                                }
                            }
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NonObservabilityReport {
    pub violations: Vec<Diagnostic>,
}

impl NonObservabilityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn validate_plts(p: &Plts, out: &mut Vec<Diagnostic>) {
    if !p.states.contains(&p.initial) {
        out.push(Diagnostic {
            location: p.name.clone(),
            message: format!("initial state {} is not declared", p.initial),
        });
    }
    let vars: BTreeSet<&Variable> = p.vars.iter().collect();
    for t in &p.transitions {
        let at = format!("{}.{}", p.name, t.id);
        for s in [&t.source, &t.target] {
            if !p.states.contains(s) {
                out.push(Diagnostic {
                    location: at.clone(),
                    message: format!("transition endpoint {s} is not a declared state"),
                });
            }
        }
        if let Err(e) = check_input_linearity(&t.action) {
            out.push(Diagnostic {
                location: at.clone(),
                message: e.to_string(),
            });
        }
        let inputs = t.action.input_vars();
        // vars(α)\iv(α) ⊆ V
        for v in t.action.free_vars() {
            if !vars.contains(&v) {
                out.push(Diagnostic {
                    location: at.clone(),
                    message: format!("action uses undeclared variable {v}"),
                });
            }
        }
        // vars(guard) ⊆ V ∪ vars(α)
        for v in t.guard.free_vars() {
            if !vars.contains(&v) && !inputs.contains(&v) {
                out.push(Diagnostic {
                    location: at.clone(),
                    message: format!("guard uses variable {v} not in scope"),
                });
            }
        }
        // assignment targets ∈ V, right-hand sides over V ∪ iv(α)
        for (lhs, rhs) in t.assigns.iter() {
            if !vars.contains(lhs) {
                out.push(Diagnostic {
                    location: at.clone(),
                    message: format!("assignment target {lhs} is not a pLTS variable"),
                });
            }
            for v in rhs.free_vars() {
                if !vars.contains(&v) && !inputs.contains(&v) {
                    out.push(Diagnostic {
                        location: at.clone(),
                        message: format!("assignment expression uses {v} not in scope"),
                    });
                }
            }
        }
    }
}

fn validate_node(n: &PNetNode, out: &mut Vec<Diagnostic>) {
    for v in &n.vectors {
        let at = format!("{}.{}", n.name, v.id);
        if v.slots.len() != n.slots.len() {
            out.push(Diagnostic {
                location: at.clone(),
                message: format!(
                    "vector length {} does not match the {} subnets",
                    v.slots.len(),
                    n.slots.len()
                ),
            });
            continue;
        }
        if v.synthesized {
            // Idle vectors are inserted for every slot whether or not the
            // child can actually emit τ; they are never enabled otherwise.
            continue;
        }
        let mut slot_vars: BTreeSet<Variable> = BTreeSet::new();
        for (j, action) in v.slots.iter().enumerate() {
            let Some(action) = action else { continue };
            slot_vars.extend(action.free_vars());
            match &n.slots[j] {
                Slot::Hole { name, sort } => {
                    if !sort.admits(action) {
                        out.push(Diagnostic {
                            location: at.clone(),
                            message: format!(
                                "slot action {action} is not in the sort of hole {name}"
                            ),
                        });
                    }
                }
                Slot::Child { name, net } => {
                    let child_sort = net.sort();
                    if !child_sort.iter().any(|s| pattern_matches(s, action)) {
                        out.push(Diagnostic {
                            location: at.clone(),
                            message: format!(
                                "slot action {action} is not in the sort of subnet {name}"
                            ),
                        });
                    }
                }
            }
        }
        // vars(result) ⊆ slot vars, and same for the guard's free
        // variables (elaboration binds everything else).
        for v2 in v.result.free_vars() {
            if !slot_vars.contains(&v2) {
                out.push(Diagnostic {
                    location: at.clone(),
                    message: format!("result action uses {v2} absent from the slot actions"),
                });
            }
        }
        for v2 in v.guard.free_vars() {
            if !slot_vars.contains(&v2) {
                out.push(Diagnostic {
                    location: at.clone(),
                    message: format!("guard uses {v2} absent from the slot actions"),
                });
            }
        }
    }
}

/// Renames the selected state variables consistently through a pNet.
fn rename_pnet(
    net: &PNet,
    fresh: &mut Freshener,
    select: &BTreeSet<Variable>,
    renaming: &mut Renaming,
) -> PNet {
    let pick = |v: &Variable| select.contains(v);
    match net {
        PNet::Leaf(p) => {
            let mut q = p.clone();
            q.vars = q
                .vars
                .iter()
                .map(|v| {
                    if pick(v) {
                        renaming
                            .entry(v.clone())
                            .or_insert_with(|| fresh.clone_var(v))
                            .clone()
                    } else {
                        v.clone()
                    }
                })
                .collect();
            for t in &mut q.transitions {
                t.action = fresh.freshen_term(&t.action, &pick, renaming);
                t.guard = fresh.freshen_pred(&t.guard, &pick, renaming);
                let mut assigns = Substitution::new();
                for (lhs, rhs) in t.assigns.iter() {
                    let lhs = renaming.get(lhs).cloned().unwrap_or_else(|| lhs.clone());
                    let rhs = fresh.freshen_term(rhs, &pick, renaming);
                    assigns
                        .bind(lhs, rhs)
                        .expect("renaming preserves sorts and domain distinctness");
                }
                t.assigns = assigns;
            }
            PNet::Leaf(q)
        }
        PNet::Node(n) => {
            let mut m = n.clone();
            for slot in &mut m.slots {
                if let Slot::Child { net, .. } = slot {
                    *net = rename_pnet(net, fresh, select, renaming);
                }
            }
            PNet::Node(m)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn buffer() -> Plts {
        let b_msg = Variable::state("b_msg", Sort::Data, "PerfectBuffer");
        let b_ec = Variable::state("b_ec", Sort::Nat, "PerfectBuffer");
        let msg = Variable::input("msg", Sort::Data, "PerfectBuffer.0");
        Plts {
            name: "PerfectBuffer".into(),
            states: vec!["b0".into(), "b1".into()],
            initial: "b0".into(),
            vars: vec![b_msg.clone(), b_ec.clone()],
            transitions: vec![
                PltsTransition {
                    id: "0".into(),
                    source: "b0".into(),
                    target: "b1".into(),
                    action: Term::action("in", vec![Term::Input(msg.clone())]),
                    guard: Predicate::True,
                    assigns: Substitution::from_pairs(vec![
                        (b_msg.clone(), Term::var(msg.clone())),
                        (b_ec.clone(), Term::Nat(0)),
                    ])
                    .unwrap(),
                },
                PltsTransition {
                    id: "1".into(),
                    source: "b1".into(),
                    target: "b0".into(),
                    action: Term::action(
                        "out",
                        vec![Term::var(b_msg.clone()), Term::var(b_ec.clone())],
                    ),
                    guard: Predicate::True,
                    assigns: Substitution::new(),
                },
                PltsTransition {
                    id: "2".into(),
                    source: "b1".into(),
                    target: "b1".into(),
                    action: Term::tau(),
                    guard: Predicate::True,
                    assigns: Substitution::from_pairs(vec![(
                        b_ec.clone(),
                        Term::plus(Term::var(b_ec.clone()), 1),
                    )])
                    .unwrap(),
                },
            ],
        }
    }

    pub(crate) fn spec_node() -> PNet {
        let m = Variable::vector("m", Sort::Data, "SV0");
        let p_send = Term::action("p_send", vec![Term::var(m.clone())]);
        let in_m = Term::action("in", vec![Term::var(m.clone())]);
        PNet::Node(PNetNode {
            name: "SimpleProtSpec".into(),
            slots: vec![
                Slot::Hole {
                    name: "P".into(),
                    sort: HoleSort::Universal,
                },
                Slot::Child {
                    name: "PerfectBuffer".into(),
                    net: PNet::Leaf(buffer()),
                },
                Slot::Hole {
                    name: "Q".into(),
                    sort: HoleSort::Universal,
                },
            ],
            vectors: vec![
                SyncVector {
                    id: "SV0".into(),
                    slots: vec![Some(p_send), Some(in_m.clone()), None],
                    result: Term::action("synchro", vec![in_m]),
                    guard: Predicate::True,
                    synthesized: false,
                },
                SyncVector {
                    id: "tau.PerfectBuffer".into(),
                    slots: vec![None, Some(Term::tau()), None],
                    result: Term::tau(),
                    guard: Predicate::True,
                    synthesized: true,
                },
                SyncVector {
                    id: "tau.P".into(),
                    slots: vec![Some(Term::tau()), None, None],
                    result: Term::tau(),
                    guard: Predicate::True,
                    synthesized: true,
                },
                SyncVector {
                    id: "tau.Q".into(),
                    slots: vec![None, None, Some(Term::tau())],
                    result: Term::tau(),
                    guard: Predicate::True,
                    synthesized: true,
                },
            ],
        })
    }

    #[test]
    fn plts_sort_strips_markers() {
        let sort = PNet::Leaf(buffer()).sort();
        let names: Vec<_> = sort.iter().map(|t| t.ctor_head().unwrap()).collect();
        assert!(names.contains(&("in", 1)));
        assert!(names.contains(&("out", 2)));
        assert!(names.contains(&("tau", 0)));
    }

    #[test]
    fn sort_of_empty_node_is_empty() {
        let n = PNet::Node(PNetNode {
            name: "empty".into(),
            slots: vec![],
            vectors: vec![],
        });
        assert!(n.sort().is_empty());
    }

    #[test]
    fn holes_and_leaves() {
        let net = spec_node();
        let holes: Vec<_> = net.holes().into_iter().map(|(n, _)| n).collect();
        assert_eq!(holes, vec!["P", "Q"]);
        let leaves: Vec<_> = net.leaves().iter().map(|p| p.name.clone()).collect();
        assert_eq!(leaves, vec!["PerfectBuffer"]);
        assert!(PNet::Leaf(buffer()).holes().is_empty());
    }

    #[test]
    fn fill_hole_removes_index_and_keeps_sort() {
        let net = spec_node();
        let v = Variable::state("v", Sort::Data, "Emitter");
        let one_state = Plts {
            name: "Emitter".into(),
            states: vec!["e0".into()],
            initial: "e0".into(),
            vars: vec![v.clone()],
            transitions: vec![PltsTransition {
                id: "0".into(),
                source: "e0".into(),
                target: "e0".into(),
                action: Term::action("p_send", vec![Term::var(v)]),
                guard: Predicate::True,
                assigns: Substitution::new(),
            }],
        };
        let filled = net.fill_hole("P", PNet::Leaf(one_state)).unwrap();
        let holes: Vec<_> = filled.holes().into_iter().map(|(n, _)| n).collect();
        assert_eq!(holes, vec!["Q"]);
        assert_eq!(filled.leaves().len(), 2);
        assert_eq!(filled.sort(), net.sort());

        assert!(matches!(
            net.fill_hole("R", PNet::Leaf(buffer())),
            Err(ModelError::NoSuchHole(_))
        ));
    }

    #[test]
    fn sort_violating_fill_is_rejected() {
        let mut net = spec_node();
        if let PNet::Node(n) = &mut net {
            n.slots[0] = Slot::Hole {
                name: "P".into(),
                sort: HoleSort::Patterns(vec![Term::action(
                    "p_send",
                    vec![Term::var(Variable::vector("x", Sort::Data, "sort"))],
                )]),
            };
        }
        // A filler whose sort has out/2 is not admitted by {p_send/1}.
        assert!(matches!(
            net.fill_hole("P", PNet::Leaf(buffer())),
            Err(ModelError::SortMismatch { .. })
        ));
    }

    #[test]
    fn non_observability_passes_with_idle_vectors() {
        let report = spec_node().check_non_observability();
        assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn non_observability_catches_observers() {
        let mut net = spec_node();
        let m = Variable::vector("m", Sort::Data, "bad");
        if let PNet::Node(n) = &mut net {
            // <tau, in(m), _> -> in(m) reacts to P's silent action.
            n.vectors.push(SyncVector {
                id: "bad".into(),
                slots: vec![
                    Some(Term::tau()),
                    Some(Term::action("in", vec![Term::var(m.clone())])),
                    None,
                ],
                result: Term::action("in", vec![Term::var(m)]),
                guard: Predicate::True,
                synthesized: false,
            });
        }
        assert!(!net.check_non_observability().passed());
    }

    #[test]
    fn validate_accepts_wellformed() {
        let diags = spec_node().validate();
        assert!(diags.is_empty(), "{diags:?}");
    }

    #[test]
    fn validate_flags_vector_arity() {
        let mut net = spec_node();
        if let PNet::Node(n) = &mut net {
            n.vectors.push(SyncVector {
                id: "short".into(),
                slots: vec![None],
                result: Term::tau(),
                guard: Predicate::True,
                synthesized: false,
            });
        }
        let diags = net.validate();
        assert!(diags.iter().any(|d| d.message.contains("vector length")));
    }

    #[test]
    fn validate_flags_shared_variables() {
        let mut net = spec_node();
        if let PNet::Node(n) = &mut net {
            let mut second = buffer();
            second.name = "Copy".into();
            n.slots.push(Slot::Child {
                name: "Copy".into(),
                net: PNet::Leaf(second),
            });
            for v in &mut n.vectors {
                v.slots.push(None);
            }
        }
        let diags = net.validate();
        assert!(diags
            .iter()
            .any(|d| d.message.contains("variable disjointness")));
    }

    #[test]
    fn filling_freshens_colliding_variables() {
        let net = spec_node();
        // The emitter deliberately reuses the buffer's b_msg variable.
        let clash = Variable::state("b_msg", Sort::Data, "PerfectBuffer");
        let emitter = Plts {
            name: "Emitter".into(),
            states: vec!["e0".into()],
            initial: "e0".into(),
            vars: vec![clash.clone()],
            transitions: vec![PltsTransition {
                id: "0".into(),
                source: "e0".into(),
                target: "e0".into(),
                action: Term::action("p_send", vec![Term::var(clash)]),
                guard: Predicate::True,
                assigns: Substitution::new(),
            }],
        };
        let filled = net.fill_hole("P", PNet::Leaf(emitter)).unwrap();
        let diags = filled.validate();
        assert!(diags.is_empty(), "{diags:?}");
    }
}
