//! Checking candidate relations for strong and weak FH-bisimulation.
//!
//! A relation file pairs states of two open automata with a predicate over
//! both automata's state variables (absent pairs mean "related under
//! false"). The strong check challenges each triple with the strong
//! transitions of either side and covers them with strong transitions of
//! the other; the weak check covers strong challenges with weak transitions
//! of the other side's saturated automaton. Every coverage question becomes
//! one first-order proof obligation
//!
//! ```text
//! ∀fv(OT). Pred ∧ Pred_OT ⇒ ⋁_x ∃fv(OT_x). (β-match ∧ Pred_OT_x ∧ α = α_x
//!                                            ∧ Pred_target{Post ⊎ Post_x})
//! ```
//!
//! discharged by the logic engine. Reports are deterministic: obligations
//! appear in triple/direction/transition order with stable cover ordering,
//! regardless of how many worker threads discharge them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::dsl::{self, RawPred, RawTerm};
use crate::logic::{self, Signature, Verdict};
use crate::model::GlobalState;
use crate::semantics::{OpenAutomaton, OpenTransition};
use crate::term::{
    Freshener, Predicate, Renaming, Sort, Substitution, Term, Variable,
};
use crate::weak::{self, SaturateOptions, WeakOpenTransition};

/// One row of a candidate relation.
#[derive(Debug, Clone, Serialize)]
pub struct RelationTriple {
    pub left: GlobalState,
    pub right: GlobalState,
    pub pred: Predicate,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Relation {
    pub triples: Vec<RelationTriple>,
}

impl Relation {
    pub fn lookup(&self, left: &GlobalState, right: &GlobalState) -> Option<&Predicate> {
        self.triples
            .iter()
            .find(|t| &t.left == left && &t.right == right)
            .map(|t| &t.pred)
    }

    /// The transposed relation (for checking with the automata swapped).
    pub fn transposed(&self) -> Relation {
        Relation {
            triples: self
                .triples
                .iter()
                .map(|t| RelationTriple {
                    left: t.right.clone(),
                    right: t.left.clone(),
                    pred: t.pred.clone(),
                })
                .collect(),
        }
    }

    /// The transitive composition: `(s,u)` related under
    /// `⋁_t Pred_{s,t} ∧ Pred_{t,u}`. Meaningful when the middle
    /// automaton's variables do not survive in the conjunctions.
    pub fn compose(r12: &Relation, r23: &Relation) -> Relation {
        let mut triples: Vec<RelationTriple> = Vec::new();
        for a in &r12.triples {
            for b in &r23.triples {
                if a.right != b.left {
                    continue;
                }
                let pred = Predicate::and(vec![a.pred.clone(), b.pred.clone()]);
                if let Some(existing) = triples
                    .iter_mut()
                    .find(|t| t.left == a.left && t.right == b.right)
                {
                    existing.pred = Predicate::or(vec![existing.pred.clone(), pred]);
                } else {
                    triples.push(RelationTriple {
                        left: a.left.clone(),
                        right: b.right.clone(),
                        pred,
                    });
                }
            }
        }
        Relation { triples }
    }
}

#[derive(Debug, Error)]
pub enum BisimError {
    #[error("relation line {line}: expected `left | right | predicate`")]
    Shape { line: usize },
    #[error("relation line {line}: unknown state {state} of {side}")]
    UnknownState {
        line: usize,
        state: String,
        side: String,
    },
    #[error("relation line {line}: duplicate pair ({left}, {right})")]
    DuplicatePair {
        line: usize,
        left: String,
        right: String,
    },
    #[error("relation line {line}: {msg}")]
    Predicate { line: usize, msg: String },
    #[error("the two automata have different holes: {0:?} vs {1:?}")]
    HoleMismatch(Vec<String>, Vec<String>),
    #[error("signatures conflict: {0}")]
    Signature(#[from] logic::SignatureError),
}

/// Parses a relation file against two automata (whose variables must
/// already be disjoint). Each non-empty, non-`#` line reads
/// `left | right | predicate`; states may use canonical or digit labels;
/// predicates use the guard syntax over both automata's state variables.
pub fn parse_relation(
    text: &str,
    a1: &OpenAutomaton,
    a2: &OpenAutomaton,
    sig: &Signature,
) -> Result<Relation, BisimError> {
    let mut vars: BTreeMap<String, Variable> = BTreeMap::new();
    for v in a1.vars.iter().chain(a2.vars.iter()) {
        vars.insert(v.name.clone(), v.clone());
    }
    let mut triples = Vec::new();
    let mut seen: BTreeSet<(GlobalState, GlobalState)> = BTreeSet::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = trimmed.splitn(3, '|').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(BisimError::Shape { line });
        }
        let left = a1
            .resolve_state(parts[0])
            .ok_or_else(|| BisimError::UnknownState {
                line,
                state: parts[0].into(),
                side: a1.name.clone(),
            })?;
        let right = a2
            .resolve_state(parts[1])
            .ok_or_else(|| BisimError::UnknownState {
                line,
                state: parts[1].into(),
                side: a2.name.clone(),
            })?;
        if !seen.insert((left.clone(), right.clone())) {
            return Err(BisimError::DuplicatePair {
                line,
                left: parts[0].into(),
                right: parts[1].into(),
            });
        }
        let raw = dsl::parse_predicate(parts[2]).map_err(|e| BisimError::Predicate {
            line,
            msg: e.to_string(),
        })?;
        let pred = resolve_rel_pred(&raw, &vars, sig).map_err(|msg| BisimError::Predicate {
            line,
            msg,
        })?;
        triples.push(RelationTriple { left, right, pred });
    }
    Ok(Relation { triples })
}

/// Resolves a relation predicate: identifiers are state variables of the
/// two automata or declared constructors; anything else is rejected.
fn resolve_rel_pred(
    raw: &RawPred,
    vars: &BTreeMap<String, Variable>,
    sig: &Signature,
) -> Result<Predicate, String> {
    let term = |t: &RawTerm, bound: &BTreeMap<String, Variable>| -> Result<Term, String> {
        resolve_rel_term(t, vars, bound, sig)
    };
    fn go(
        raw: &RawPred,
        vars: &BTreeMap<String, Variable>,
        bound: &mut BTreeMap<String, Variable>,
        sig: &Signature,
        term: &dyn Fn(&RawTerm, &BTreeMap<String, Variable>) -> Result<Term, String>,
    ) -> Result<Predicate, String> {
        match raw {
            RawPred::True => Ok(Predicate::True),
            RawPred::False => Ok(Predicate::False),
            RawPred::Eq(a, b) | RawPred::Neq(a, b) => {
                let ta = term(a, bound)?;
                let tb = term(b, bound)?;
                if ta.sort() != tb.sort() {
                    return Err(format!(
                        "comparison between sorts {} and {}",
                        ta.sort(),
                        tb.sort()
                    ));
                }
                Ok(match raw {
                    RawPred::Eq(_, _) => Predicate::Eq(ta, tb),
                    _ => Predicate::Neq(ta, tb),
                })
            }
            RawPred::And(ps) => Ok(Predicate::and(
                ps.iter()
                    .map(|p| go(p, vars, bound, sig, term))
                    .collect::<Result<Vec<_>, _>>()?,
            )),
            RawPred::Or(ps) => Ok(Predicate::or(
                ps.iter()
                    .map(|p| go(p, vars, bound, sig, term))
                    .collect::<Result<Vec<_>, _>>()?,
            )),
            RawPred::Not(p) => Ok(Predicate::not(go(p, vars, bound, sig, term)?)),
            RawPred::Forall(decls, body) | RawPred::Exists(decls, body) => {
                let mut introduced = Vec::new();
                for (name, sort) in decls {
                    let v = Variable::fresh(name.clone(), *sort, 0);
                    bound.insert(name.clone(), v.clone());
                    introduced.push(v);
                }
                let inner = go(body, vars, bound, sig, term)?;
                for (name, _) in decls {
                    bound.remove(name);
                }
                Ok(match raw {
                    RawPred::Forall(_, _) => Predicate::forall(introduced, inner),
                    _ => Predicate::exists(introduced, inner),
                })
            }
        }
    }
    let mut bound = BTreeMap::new();
    go(raw, vars, &mut bound, sig, &term)
}

fn resolve_rel_term(
    raw: &RawTerm,
    vars: &BTreeMap<String, Variable>,
    bound: &BTreeMap<String, Variable>,
    sig: &Signature,
) -> Result<Term, String> {
    match raw {
        RawTerm::Nat(k) => Ok(Term::Nat(*k)),
        RawTerm::Plus(inner, k) => {
            let t = resolve_rel_term(inner, vars, bound, sig)?;
            if t.sort() != Sort::Nat {
                return Err("'+' applies to Nat terms".into());
            }
            Ok(Term::plus(t, *k))
        }
        RawTerm::Ident(name, _) | RawTerm::Const(name, _) => {
            if let Some(v) = bound.get(name).or_else(|| vars.get(name)) {
                return Ok(Term::Var(v.clone()));
            }
            if let Some(c) = sig.ctor(name) {
                if c.args.is_empty() {
                    return Ok(Term::ctor(name.clone(), c.result, vec![]));
                }
                return Err(format!("constructor {name} expects arguments"));
            }
            Err(format!(
                "unknown identifier {name}: relation predicates range over the two automata's state variables"
            ))
        }
        RawTerm::Input(name, _) => Err(format!("input marker ?{name} is not allowed here")),
        RawTerm::Call(name, args, _) => {
            let Some(c) = sig.ctor(name) else {
                return Err(format!("unknown constructor {name}"));
            };
            let c = c.clone();
            let args = args
                .iter()
                .map(|a| resolve_rel_term(a, vars, bound, sig))
                .collect::<Result<Vec<_>, _>>()?;
            let sorts: Vec<Sort> = args.iter().map(|a| a.sort()).collect();
            if sorts != c.args {
                return Err(format!("arity mismatch for {name}"));
            }
            Ok(Term::ctor(name.clone(), c.result, args))
        }
    }
}

// ---------------------------------------------------------------------
// Obligations.

/// A constructed proof obligation with its display form.
#[derive(Debug, Clone, Serialize)]
pub struct Obligation {
    /// The formula as constructed, hypothesis and disjunction visible.
    pub formula: Predicate,
    /// Unit-reduced form (no constructor decomposition), as one would
    /// write it down.
    pub reduced: Predicate,
}

enum CoverActions<'a> {
    Strong(&'a BTreeMap<String, Term>),
    Weak(&'a BTreeMap<String, Vec<Term>>),
}

struct CoverParts<'a> {
    actions: CoverActions<'a>,
    guard: &'a Predicate,
    action: &'a Term,
    effect: &'a Substitution,
    locals: BTreeSet<Variable>,
    target_pred: Predicate,
}

/// Builds the obligation for one challenged transition and its candidate
/// covers. Challenge variables are universally quantified, each cover's
/// variables existentially.
fn build_obligation(
    triple_pred: &Predicate,
    challenge: &OpenTransition,
    covers: &[CoverParts<'_>],
) -> Obligation {
    let mut fresh = Freshener::new();
    // Fresh instance of the challenge.
    let select = |v: &Variable| !v.is_state();
    let mut ch_ren = Renaming::new();
    let ch_holes: BTreeMap<String, Term> = challenge
        .hole_actions
        .iter()
        .map(|(h, t)| (h.clone(), fresh.freshen_term(t, &select, &mut ch_ren)))
        .collect();
    let ch_action = fresh.freshen_term(&challenge.action, &select, &mut ch_ren);
    let ch_guard = fresh.freshen_pred(&challenge.guard, &select, &mut ch_ren);
    let ch_effect = fresh.freshen_subst_range(&challenge.effect, &select, &mut ch_ren);

    let hyp = Predicate::And(vec![triple_pred.clone(), ch_guard]);

    let mut disjuncts = Vec::new();
    for cover in covers {
        let mut ren = Renaming::new();
        let mut conjuncts: Vec<Predicate> = Vec::new();
        match &cover.actions {
            CoverActions::Strong(betas) => {
                for (h, ch_beta) in &ch_holes {
                    match betas.get(h) {
                        Some(beta) => conjuncts.push(Predicate::Eq(
                            ch_beta.clone(),
                            fresh.freshen_term(beta, &select, &mut ren),
                        )),
                        None => conjuncts.push(Predicate::False),
                    }
                }
            }
            CoverActions::Weak(gammas) => {
                // vis(β) is a singleton list per hole; elementwise equality
                // against the cover's sequence.
                for (h, ch_beta) in &ch_holes {
                    match gammas.get(h) {
                        Some(seq) if seq.len() == 1 => conjuncts.push(Predicate::Eq(
                            ch_beta.clone(),
                            fresh.freshen_term(&seq[0], &select, &mut ren),
                        )),
                        _ => conjuncts.push(Predicate::False),
                    }
                }
            }
        }
        conjuncts.push(fresh.freshen_pred(cover.guard, &select, &mut ren));
        conjuncts.push(Predicate::Eq(
            ch_action.clone(),
            fresh.freshen_term(cover.action, &select, &mut ren),
        ));
        let cover_effect = fresh.freshen_subst_range(cover.effect, &select, &mut ren);
        let post = Substitution::union_disjoint(&ch_effect, &cover_effect)
            .expect("the two automata have disjoint state variables");
        conjuncts.push(post.apply_pred(&cover.target_pred));

        let used: Vec<Variable> = cover
            .locals
            .iter()
            .filter_map(|v| ren.get(v).cloned())
            .collect();
        disjuncts.push(Predicate::Exists(used, Box::new(Predicate::And(conjuncts))));
    }

    let body = Predicate::Or(vec![
        Predicate::Not(Box::new(hyp)),
        Predicate::Or(disjuncts),
    ]);
    let universal: Vec<Variable> = body.free_vars().into_iter().collect();
    let formula = Predicate::Forall(universal, Box::new(body));
    let reduced = reduce_units(&formula);
    Obligation { formula, reduced }
}

/// The strong coverage obligation for one challenge. Covers whose hole set
/// differs contribute a vacuously false disjunct rather than being dropped.
pub fn strong_obligation(
    triple_pred: &Predicate,
    challenge: &OpenTransition,
    covers: &[(&OpenTransition, Predicate)],
) -> Obligation {
    let parts: Vec<CoverParts> = covers
        .iter()
        .map(|(ot, target_pred)| CoverParts {
            actions: CoverActions::Strong(&ot.hole_actions),
            guard: &ot.guard,
            action: &ot.action,
            effect: &ot.effect,
            locals: ot.local_vars(),
            target_pred: target_pred.clone(),
        })
        .collect();
    build_obligation(triple_pred, challenge, &parts)
}

/// The weak coverage obligation: strong challenge, weak covers.
pub fn weak_obligation(
    triple_pred: &Predicate,
    challenge: &OpenTransition,
    covers: &[(&WeakOpenTransition, Predicate)],
) -> Obligation {
    let parts: Vec<CoverParts> = covers
        .iter()
        .map(|(w, target_pred)| CoverParts {
            actions: CoverActions::Weak(&w.hole_seqs),
            guard: &w.guard,
            action: &w.action,
            effect: &w.effect,
            locals: w.local_vars(),
            target_pred: target_pred.clone(),
        })
        .collect();
    build_obligation(triple_pred, challenge, &parts)
}

/// Rebuilds a predicate through the unit-folding constructors without
/// decomposing atoms; `true ⇒ p` becomes `p`.
pub fn reduce_units(p: &Predicate) -> Predicate {
    match p {
        Predicate::True | Predicate::False | Predicate::Eq(_, _) | Predicate::Neq(_, _) => {
            p.clone()
        }
        Predicate::And(ps) => Predicate::and(ps.iter().map(reduce_units).collect()),
        Predicate::Or(ps) => {
            // Specialised: ¬hyp ∨ body prints as an implication would
            // reduce, dropping a true hypothesis.
            Predicate::or(ps.iter().map(reduce_units).collect())
        }
        Predicate::Not(q) => Predicate::not(reduce_units(q)),
        Predicate::Forall(vs, q) => {
            let body = reduce_units(q);
            let free = body.free_vars();
            Predicate::forall(
                vs.iter().filter(|v| free.contains(v)).cloned().collect(),
                body,
            )
        }
        Predicate::Exists(vs, q) => {
            let body = reduce_units(q);
            let free = body.free_vars();
            Predicate::exists(
                vs.iter().filter(|v| free.contains(v)).cloned().collect(),
                body,
            )
        }
    }
}

// ---------------------------------------------------------------------
// The checkers.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    /// The left automaton challenges, the right covers.
    LeftChallenges,
    /// The right automaton challenges, the left covers.
    RightChallenges,
}

#[derive(Debug, Clone, Serialize)]
pub enum ObligationVerdict {
    Valid,
    /// Falsified, with a rendered witness substitution.
    Invalid { witness: String },
    Unknown { reason: String },
    /// No candidate cover had the right hole set and a related target.
    EmptyCovers,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObligationRecord {
    pub direction: Direction,
    pub left: String,
    pub right: String,
    pub triple_pred: String,
    pub challenge: String,
    pub covers: Vec<String>,
    pub formula: String,
    pub reduced: String,
    pub verdict: ObligationVerdict,
    /// Whether this record makes the overall verdict Fail or Inconclusive.
    pub classification: CheckVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub mode: &'static str,
    pub left: String,
    pub right: String,
    pub verdict: CheckVerdict,
    pub initial_related: bool,
    pub obligations: Vec<ObligationRecord>,
    pub warnings: Vec<String>,
}

impl CheckReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} FH-bisimulation check: {} vs {}",
            self.mode, self.left, self.right
        );
        let _ = writeln!(
            out,
            "initial states related: {}",
            if self.initial_related { "yes" } else { "NO" }
        );
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        let mut failing = 0;
        for (i, o) in self.obligations.iter().enumerate() {
            let status = match &o.verdict {
                ObligationVerdict::Valid => "ok".to_string(),
                ObligationVerdict::Invalid { witness } => {
                    failing += 1;
                    format!("FALSIFIED with {witness}")
                }
                ObligationVerdict::Unknown { reason } => {
                    failing += 1;
                    format!("unknown: {reason}")
                }
                ObligationVerdict::EmptyCovers => {
                    failing += 1;
                    "empty cover set".to_string()
                }
            };
            let dir = match o.direction {
                Direction::LeftChallenges => "left",
                Direction::RightChallenges => "right",
            };
            let _ = writeln!(
                out,
                "[{i}] ({}, {} | {}) {dir} challenge {} … {status}",
                o.left, o.right, o.triple_pred, o.challenge
            );
            if !matches!(o.verdict, ObligationVerdict::Valid) {
                let _ = writeln!(out, "    covers: {}", o.covers.len());
                let _ = writeln!(out, "    obligation: {}", o.reduced);
            }
        }
        let _ = writeln!(
            out,
            "verdict: {:?} ({} obligations, {} not discharged)",
            self.verdict,
            self.obligations.len(),
            failing
        );
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    /// Saturation bound for the weak check.
    pub weak_depth: u32,
    /// Worker threads for obligation discharge.
    pub jobs: usize,
    pub saturate_budget: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            weak_depth: 3,
            jobs: 1,
            saturate_budget: 50_000,
        }
    }
}

/// Checks a relation file for strong FH-bisimulation.
pub fn check_strong(
    a1: &OpenAutomaton,
    a2: &OpenAutomaton,
    relation_text: &str,
    opts: CheckOptions,
) -> Result<CheckReport, BisimError> {
    let (a1, a2, sig, mut warnings) = prepare(a1, a2)?;
    let relation = parse_relation(relation_text, &a1, &a2, &sig)?;
    let mut pending = Vec::new();
    for (t_idx, triple) in relation.triples.iter().enumerate() {
        for (direction, (from, to)) in [
            (Direction::LeftChallenges, (&a1, &a2)),
            (Direction::RightChallenges, (&a2, &a1)),
        ] {
            let (ch_state, cov_state) = match direction {
                Direction::LeftChallenges => (&triple.left, &triple.right),
                Direction::RightChallenges => (&triple.right, &triple.left),
            };
            for (_, challenge) in from.transitions_from(ch_state) {
                let mut covers: Vec<(&OpenTransition, Predicate)> = Vec::new();
                for (_, cand) in to.transitions_from(cov_state) {
                    if hole_names(&cand.hole_actions) != hole_names(&challenge.hole_actions) {
                        continue;
                    }
                    let related = match direction {
                        Direction::LeftChallenges => {
                            relation.lookup(&challenge.target, &cand.target)
                        }
                        Direction::RightChallenges => {
                            relation.lookup(&cand.target, &challenge.target)
                        }
                    };
                    if let Some(pred) = related {
                        covers.push((cand, pred.clone()));
                    }
                }
                sort_strong_covers(&mut covers, challenge);
                let obligation = strong_obligation(&triple.pred, challenge, &covers);
                pending.push(PendingObligation {
                    triple_index: t_idx,
                    direction,
                    challenge: challenge.to_string(),
                    covers: covers.iter().map(|(c, _)| c.to_string()).collect(),
                    obligation,
                    weak_mode: false,
                    cover_side_closed: true,
                });
            }
        }
    }
    let report = discharge(
        "strong",
        &a1,
        &a2,
        &sig,
        &relation,
        pending,
        opts,
        &mut warnings,
    );
    Ok(report)
}

/// Checks a relation file for weak FH-bisimulation at the given saturation
/// depth.
pub fn check_weak(
    a1: &OpenAutomaton,
    a2: &OpenAutomaton,
    relation_text: &str,
    opts: CheckOptions,
) -> Result<CheckReport, BisimError> {
    let (a1, a2, sig, mut warnings) = prepare(a1, a2)?;
    for side in [&a1, &a2] {
        // The weak theory is only sound for non-observing nets; derivation
        // keeps that structural property visible in the automaton, but the
        // caller may have bypassed it, so warn rather than refuse.
        if side.transitions.iter().any(|t| {
            t.hole_actions.values().any(|b| b.is_tau())
        }) {
            warnings.push(format!(
                "{}: transitions observe silent hole actions; weak equivalence may be unsound",
                side.name
            ));
        }
    }
    let relation = parse_relation(relation_text, &a1, &a2, &sig)?;

    let sat_opts = SaturateOptions {
        depth: opts.weak_depth,
        budget: opts.saturate_budget,
    };
    let deeper = SaturateOptions {
        depth: opts.weak_depth + 1,
        budget: opts.saturate_budget,
    };
    let w1 = weak::saturate(&a1, sat_opts).map_err(|e| BisimError::Predicate {
        line: 0,
        msg: e.to_string(),
    })?;
    let w2 = weak::saturate(&a2, sat_opts).map_err(|e| BisimError::Predicate {
        line: 0,
        msg: e.to_string(),
    })?;
    // Whether the saturation is already closed: if one more step adds no
    // transition, an empty cover set cannot be a depth artefact.
    let closed1 = weak::saturate(&a1, deeper)
        .map(|w| w.transitions.len() == w1.transitions.len())
        .unwrap_or(false);
    let closed2 = weak::saturate(&a2, deeper)
        .map(|w| w.transitions.len() == w2.transitions.len())
        .unwrap_or(false);

    let mut pending = Vec::new();
    for (t_idx, triple) in relation.triples.iter().enumerate() {
        for direction in [Direction::LeftChallenges, Direction::RightChallenges] {
            let (from, weak_side, ch_state, cov_state, cover_closed) = match direction {
                Direction::LeftChallenges => (&a1, &w2, &triple.left, &triple.right, closed2),
                Direction::RightChallenges => (&a2, &w1, &triple.right, &triple.left, closed1),
            };
            for (_, challenge) in from.transitions_from(ch_state) {
                let visible: BTreeSet<&String> = challenge
                    .hole_actions
                    .iter()
                    .filter(|(_, b)| !b.is_tau())
                    .map(|(h, _)| h)
                    .collect();
                let mut covers: Vec<(&WeakOpenTransition, Predicate)> = Vec::new();
                for cand in weak_side.transitions_from(cov_state) {
                    let cand_holes: BTreeSet<&String> = cand.hole_seqs.keys().collect();
                    if cand_holes != visible {
                        continue;
                    }
                    if cand.hole_seqs.values().any(|seq| seq.len() != 1) {
                        continue;
                    }
                    let related = match direction {
                        Direction::LeftChallenges => {
                            relation.lookup(&challenge.target, &cand.target)
                        }
                        Direction::RightChallenges => {
                            relation.lookup(&cand.target, &challenge.target)
                        }
                    };
                    if let Some(pred) = related {
                        covers.push((cand, pred.clone()));
                    }
                }
                sort_weak_covers(&mut covers, challenge);
                let obligation = weak_obligation(&triple.pred, challenge, &covers);
                pending.push(PendingObligation {
                    triple_index: t_idx,
                    direction,
                    challenge: challenge.to_string(),
                    covers: covers.iter().map(|(c, _)| c.to_string()).collect(),
                    obligation,
                    weak_mode: true,
                    cover_side_closed: cover_closed,
                });
            }
        }
    }
    let report = discharge(
        "weak",
        &a1,
        &a2,
        &sig,
        &relation,
        pending,
        opts,
        &mut warnings,
    );
    Ok(report)
}

fn hole_names(m: &BTreeMap<String, Term>) -> BTreeSet<&String> {
    m.keys().collect()
}

fn sort_strong_covers(covers: &mut [(&OpenTransition, Predicate)], challenge: &OpenTransition) {
    let head = challenge.action.ctor_head().map(|(n, a)| (n.to_string(), a));
    covers.sort_by_key(|(c, _)| {
        let matches = c.action.ctor_head().map(|(n, a)| (n.to_string(), a)) == head;
        (!matches, c.canonical_key())
    });
}

fn sort_weak_covers(covers: &mut [(&WeakOpenTransition, Predicate)], challenge: &OpenTransition) {
    let head = challenge.action.ctor_head().map(|(n, a)| (n.to_string(), a));
    covers.sort_by_key(|(c, _)| {
        let matches = c.action.ctor_head().map(|(n, a)| (n.to_string(), a)) == head;
        (!matches, c.canonical_key())
    });
}

struct PendingObligation {
    triple_index: usize,
    direction: Direction,
    challenge: String,
    covers: Vec<String>,
    obligation: Obligation,
    weak_mode: bool,
    cover_side_closed: bool,
}

#[allow(clippy::too_many_arguments)]
fn discharge(
    mode: &'static str,
    a1: &OpenAutomaton,
    a2: &OpenAutomaton,
    sig: &Signature,
    relation: &Relation,
    pending: Vec<PendingObligation>,
    opts: CheckOptions,
    warnings: &mut Vec<String>,
) -> CheckReport {
    // Initial states must be related by a satisfiable predicate.
    let initial_related = match relation.lookup(&a1.initial, &a2.initial) {
        Some(pred) => logic::is_satisfiable(sig, pred).is_sat(),
        None => false,
    };

    let verdicts: Vec<Verdict> = if opts.jobs > 1 {
        let formulas: Vec<&Predicate> = pending.iter().map(|p| &p.obligation.formula).collect();
        let chunk = formulas.len().div_ceil(opts.jobs.max(1));
        let mut out: Vec<Option<Verdict>> = vec![None; formulas.len()];
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (c, slice) in formulas.chunks(chunk.max(1)).enumerate() {
                let slice: Vec<&Predicate> = slice.to_vec();
                handles.push((
                    c,
                    scope.spawn(move || {
                        slice
                            .into_iter()
                            .map(|f| logic::check_valid(sig, f))
                            .collect::<Vec<_>>()
                    }),
                ));
            }
            for (c, handle) in handles {
                let results = handle.join().expect("obligation worker panicked");
                for (i, v) in results.into_iter().enumerate() {
                    out[c * chunk.max(1) + i] = Some(v);
                }
            }
        });
        out.into_iter().map(|v| v.expect("all slots filled")).collect()
    } else {
        pending
            .iter()
            .map(|p| logic::check_valid(sig, &p.obligation.formula))
            .collect()
    };

    // Optional external-solver cross-check, never authoritative.
    if std::env::var(logic::smt::SMT_CMD_ENV).is_ok() {
        for (p, v) in pending.iter().zip(&verdicts) {
            let Some(smt) = logic::smt::cross_check(sig, &p.obligation.formula) else {
                warnings.push("external SMT cross-check could not run".into());
                break;
            };
            let agree = match (smt, v) {
                (logic::smt::SmtVerdict::Unsat, Verdict::Valid) => true,
                (logic::smt::SmtVerdict::Sat, Verdict::Invalid(_)) => true,
                (logic::smt::SmtVerdict::Unknown, _) => true,
                (_, Verdict::Unknown(_)) => true,
                _ => false,
            };
            if !agree {
                warnings.push(format!(
                    "external solver disagrees on: {}",
                    p.obligation.reduced
                ));
            }
        }
    }

    let mut obligations = Vec::new();
    let mut verdict = CheckVerdict::Pass;
    if !initial_related {
        verdict = CheckVerdict::Fail;
    }
    for (p, v) in pending.into_iter().zip(verdicts) {
        let triple = &relation.triples[p.triple_index];
        let empty = p.covers.is_empty();
        let (ov, class) = match (&v, empty) {
            (_, true) => {
                // No cover candidate at all. For the weak check this may be
                // an artefact of the saturation depth unless saturation has
                // already closed.
                if p.weak_mode && !p.cover_side_closed {
                    (ObligationVerdict::EmptyCovers, CheckVerdict::Inconclusive)
                } else {
                    (ObligationVerdict::EmptyCovers, CheckVerdict::Fail)
                }
            }
            (Verdict::Valid, _) => (ObligationVerdict::Valid, CheckVerdict::Pass),
            (Verdict::Invalid(w), _) => (
                ObligationVerdict::Invalid {
                    witness: w.to_string(),
                },
                CheckVerdict::Fail,
            ),
            (Verdict::Unknown(r), _) => (
                ObligationVerdict::Unknown { reason: r.clone() },
                CheckVerdict::Inconclusive,
            ),
        };
        match class {
            CheckVerdict::Fail => verdict = CheckVerdict::Fail,
            CheckVerdict::Inconclusive => {
                if verdict == CheckVerdict::Pass {
                    verdict = CheckVerdict::Inconclusive;
                }
            }
            CheckVerdict::Pass => {}
        }
        if matches!(ov, ObligationVerdict::EmptyCovers)
            && p.weak_mode
            && !p.cover_side_closed
        {
            warnings.push(format!(
                "uncovered challenge at ({}, {}) may be a saturation-depth artefact; try --weak-depth {}",
                triple.left.label(),
                triple.right.label(),
                opts.weak_depth + 1
            ));
        }
        obligations.push(ObligationRecord {
            direction: p.direction,
            left: triple.left.label(),
            right: triple.right.label(),
            triple_pred: triple.pred.to_string(),
            challenge: p.challenge,
            covers: p.covers,
            formula: p.obligation.formula.to_string(),
            reduced: p.obligation.reduced.to_string(),
            verdict: ov,
            classification: class,
        });
    }

    CheckReport {
        mode,
        left: a1.name.clone(),
        right: a2.name.clone(),
        verdict,
        initial_related,
        obligations,
        warnings: warnings.clone(),
    }
}

/// Renames the right automaton's state variables away from the left's
/// (name suffix `_2`, bumped while taken) and merges the signatures. The
/// shipped corpora already use disjoint names; the rename matters when an
/// automaton is compared against itself.
fn prepare(
    a1: &OpenAutomaton,
    a2: &OpenAutomaton,
) -> Result<(OpenAutomaton, OpenAutomaton, Signature, Vec<String>), BisimError> {
    let h1: Vec<String> = a1.holes.iter().map(|(n, _)| n.clone()).collect();
    let h2: Vec<String> = a2.holes.iter().map(|(n, _)| n.clone()).collect();
    if h1 != h2 {
        return Err(BisimError::HoleMismatch(h1, h2));
    }
    let sig = a1.signature.merge(&a2.signature)?;
    let names1: BTreeSet<&String> = a1.vars.iter().map(|v| &v.name).collect();
    let clash: BTreeSet<Variable> = a2
        .vars
        .iter()
        .filter(|v| names1.contains(&v.name))
        .cloned()
        .collect();
    let mut warnings = Vec::new();
    let a2 = if clash.is_empty() {
        a2.clone()
    } else {
        warnings.push(format!(
            "renamed {} shared variable(s) of {} with a _2 suffix",
            clash.len(),
            a2.name
        ));
        rename_automaton(a1, a2, &clash)
    };
    Ok((a1.clone(), a2, sig, warnings))
}

/// The name the right-hand copy of a shared variable receives.
fn disambiguated(name: &str, taken: &BTreeSet<String>) -> String {
    let mut n = 2usize;
    loop {
        let candidate = format!("{name}_{n}");
        if !taken.contains(&candidate) {
            return candidate;
        }
        n += 1;
    }
}

fn rename_automaton(
    a1: &OpenAutomaton,
    oa: &OpenAutomaton,
    select: &BTreeSet<Variable>,
) -> OpenAutomaton {
    let mut taken: BTreeSet<String> = a1.vars.iter().map(|v| v.name.clone()).collect();
    taken.extend(oa.vars.iter().map(|v| v.name.clone()));
    let mut renaming = Renaming::new();
    for v in select {
        let name = disambiguated(&v.name, &taken);
        taken.insert(name.clone());
        let mut renamed = v.clone();
        renamed.name = name;
        renaming.insert(v.clone(), renamed);
    }
    let pick = |v: &Variable| select.contains(v);
    let mut fresh = Freshener::new();
    let mut out = oa.clone();
    out.vars = out
        .vars
        .iter()
        .map(|v| renaming.get(v).cloned().unwrap_or_else(|| v.clone()))
        .collect();
    for leaf in &mut out.leaves {
        leaf.vars = leaf
            .vars
            .iter()
            .map(|v| renaming.get(v).cloned().unwrap_or_else(|| v.clone()))
            .collect();
    }
    for t in &mut out.transitions {
        t.action = fresh.freshen_term(&t.action, &pick, &mut renaming);
        t.guard = fresh.freshen_pred(&t.guard, &pick, &mut renaming);
        for a in t.hole_actions.values_mut() {
            *a = fresh.freshen_term(a, &pick, &mut renaming);
        }
        let mut effect = Substitution::new();
        for (lhs, rhs) in t.effect.iter() {
            let lhs = renaming.get(lhs).cloned().unwrap_or_else(|| lhs.clone());
            let rhs = fresh.freshen_term(rhs, &pick, &mut renaming);
            effect
                .bind(lhs, rhs)
                .expect("renaming preserves sorts and distinctness");
        }
        t.effect = effect;
    }
    out
}

/// The reflexive candidate relation for checking an automaton against
/// itself: every state paired with itself under the conjunction equating
/// each state variable with its renamed right-hand copy.
pub fn identity_relation_text(oa: &OpenAutomaton) -> String {
    let mut taken: BTreeSet<String> = oa.vars.iter().map(|v| v.name.clone()).collect();
    let originals = taken.clone();
    let mut eqs = Vec::new();
    for name in &originals {
        let copy = disambiguated(name, &taken);
        taken.insert(copy.clone());
        eqs.push(format!("{name} = {copy}"));
    }
    let pred = if eqs.is_empty() {
        "true".to_string()
    } else {
        eqs.join(" && ")
    };
    let mut out = String::new();
    for s in &oa.states {
        let _ = writeln!(out, "{} | {} | {}", s.label(), s.label(), pred);
    }
    out
}
