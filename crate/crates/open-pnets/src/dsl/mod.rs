//! Parser and static elaborator for the textual pNet language.
//!
//! A `.pnet` file declares constants (action/data constructors), pLTS
//! blocks, and pNet blocks whose `subnets` line lists holes and previously
//! defined nets in slot order. Elaboration resolves every identifier,
//! infers constructor arities from use, lifts the older per-state `vars`
//! declarations to pLTS-global variables, normalises `$tau`, `tau()` and
//! `synchro($tau)` to the canonical τ, wraps guard variables that do not
//! occur in the vector's actions in a universal quantifier, and inserts one
//! idle vector `<τ> → τ` per slot of every node so that silent actions can
//! never be observed.

mod lexer;
mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::logic::Signature;
use crate::model::{HoleSort, PNet, PNetNode, Plts, PltsTransition, Slot, SyncVector};
use crate::term::{Predicate, Sort, Substitution, Term, VarOrigin, Variable};

pub use parser::{parse, parse_predicate, Def, PltsDef, PNetDef, RawPred, RawTerm, SourceSystem};

#[derive(Debug, Error)]
pub enum DslError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: {msg}")]
    Resolve { line: usize, col: usize, msg: String },
    #[error("model validation failed:\n{0}")]
    Invalid(String),
}

impl DslError {
    pub fn syntax(line: usize, col: usize, msg: impl Into<String>) -> Self {
        DslError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn resolve(pos: parser::Pos, msg: impl Into<String>) -> Self {
        DslError::Resolve {
            line: pos.line,
            col: pos.col,
            msg: msg.into(),
        }
    }
}

/// A fully elaborated system: the root pNet and its constructor signature.
#[derive(Debug, Clone)]
pub struct System {
    pub name: String,
    pub net: PNet,
    pub signature: Signature,
    pub warnings: Vec<String>,
}

/// Parses and elaborates a system from text, resolving `import` lines
/// against the given include directories (unresolved imports are
/// warnings).
pub fn load_system(text: &str, includes: &[PathBuf]) -> Result<System, DslError> {
    let mut src = parse(text)?;
    let mut warnings = Vec::new();
    let imports = std::mem::take(&mut src.imports);
    for import in imports {
        match find_import(&import, includes) {
            Some(path) => match std::fs::read_to_string(&path) {
                Ok(content) => match parse(&content) {
                    Ok(imported) => {
                        for c in imported.consts {
                            src.consts.push(c);
                        }
                    }
                    Err(e) => warnings.push(format!("import {import}: parse failed: {e}")),
                },
                Err(e) => warnings.push(format!("import {import}: {e}")),
            },
            None => warnings.push(format!("import {import}: not found on the include path")),
        }
    }
    let mut sys = elaborate(&src)?;
    sys.warnings.extend(warnings);
    Ok(sys)
}

fn find_import(name: &str, includes: &[PathBuf]) -> Option<PathBuf> {
    for dir in includes {
        let candidate = dir.join(name);
        if candidate.is_file() {
            return Some(candidate);
        }
    }
    let direct = Path::new(name);
    direct.is_file().then(|| direct.to_path_buf())
}

#[derive(Debug, Clone)]
struct ConstInfo {
    sort: Sort,
    /// Argument sorts, inferred at first use; `None` until then.
    args: Option<Vec<Sort>>,
}

struct Elab {
    consts: BTreeMap<String, ConstInfo>,
    defs: BTreeMap<String, PNet>,
    used: BTreeSet<String>,
}

/// Elaborates a parsed source system into a validated pNet.
pub fn elaborate(src: &SourceSystem) -> Result<System, DslError> {
    let mut elab = Elab {
        consts: BTreeMap::new(),
        defs: BTreeMap::new(),
        used: BTreeSet::new(),
    };
    // τ and the synchronisation wrapper are part of the language; source
    // files may re-declare them as Action constants.
    elab.consts.insert(
        "tau".into(),
        ConstInfo {
            sort: Sort::Action,
            args: Some(vec![]),
        },
    );
    elab.consts.insert(
        "synchro".into(),
        ConstInfo {
            sort: Sort::Action,
            args: None,
        },
    );
    for (name, sort, pos) in &src.consts {
        let builtin = matches!(name.as_str(), "tau" | "synchro");
        if builtin {
            if *sort != Sort::Action {
                return Err(DslError::resolve(
                    *pos,
                    format!("{name} is the builtin silent-action machinery and has sort Action"),
                ));
            }
            continue;
        }
        if elab
            .consts
            .insert(
                name.clone(),
                ConstInfo {
                    sort: *sort,
                    args: None,
                },
            )
            .is_some()
        {
            return Err(DslError::resolve(*pos, format!("constant {name} declared twice")));
        }
    }
    let mut warnings = Vec::new();
    for def in &src.defs {
        match def {
            Def::Plts(d) => {
                let plts = elab_plts(&mut elab, d)?;
                if elab.defs.insert(d.name.clone(), PNet::Leaf(plts)).is_some() {
                    return Err(DslError::resolve(d.pos, format!("{} defined twice", d.name)));
                }
            }
            Def::PNet(d) => {
                let node = elab_pnet(&mut elab, d)?;
                if elab.defs.insert(d.name.clone(), PNet::Node(node)).is_some() {
                    return Err(DslError::resolve(d.pos, format!("{} defined twice", d.name)));
                }
            }
        }
    }
    let root_name = src.root.as_ref().ok_or_else(|| {
        DslError::syntax(1, 1, "no root declaration")
    })?;
    let net = elab
        .defs
        .get(root_name)
        .cloned()
        .ok_or_else(|| DslError::syntax(1, 1, format!("root {root_name} is not defined")))?;
    for name in elab.defs.keys() {
        if name != root_name && !elab.used.contains(name) {
            warnings.push(format!("{name} is defined but never used"));
        }
    }

    let diagnostics = net.validate();
    if !diagnostics.is_empty() {
        let joined: Vec<String> = diagnostics.iter().map(|d| d.to_string()).collect();
        return Err(DslError::Invalid(joined.join("\n")));
    }

    let mut signature = net
        .infer_signature()
        .map_err(|e| DslError::Invalid(e.to_string()))?;
    // Unused declared constants join the signature with no arguments.
    for (name, info) in &elab.consts {
        let args = info.args.clone().unwrap_or_default();
        signature
            .declare(name.clone(), info.sort, args)
            .map_err(|e| DslError::Invalid(e.to_string()))?;
    }

    Ok(System {
        name: src.name.clone(),
        net,
        signature,
        warnings,
    })
}

struct Scope<'a> {
    /// Plain variables in scope, by name.
    vars: BTreeMap<String, Variable>,
    /// Declared input-variable names of the surrounding pLTS.
    declared_inputs: &'a BTreeMap<String, Sort>,
    /// Input variables already used by the current transition.
    inputs: BTreeMap<String, Variable>,
    /// Occurrences of declared input variables get the `?` marker.
    in_action: bool,
    transition_id: String,
}

impl<'a> Scope<'a> {
    fn input_var(&mut self, name: &str, sort: Sort) -> Variable {
        self.inputs
            .entry(name.to_string())
            .or_insert_with(|| Variable::input(name, sort, self.transition_id.clone()))
            .clone()
    }
}

fn resolve_term(elab: &mut Elab, scope: &mut Scope, raw: &RawTerm) -> Result<Term, DslError> {
    match raw {
        RawTerm::Nat(k) => Ok(Term::Nat(*k)),
        RawTerm::Plus(inner, k) => {
            let t = resolve_term(elab, scope, inner)?;
            if t.sort() != Sort::Nat {
                return Err(DslError::resolve(
                    inner.pos(),
                    format!("'+' applies to Nat terms, found sort {}", t.sort()),
                ));
            }
            Ok(Term::plus(t, *k))
        }
        RawTerm::Ident(name, pos) => {
            if let Some(v) = scope.vars.get(name) {
                return Ok(Term::Var(v.clone()));
            }
            if let Some(sort) = scope.declared_inputs.get(name).copied() {
                let v = scope.input_var(name, sort);
                return Ok(if scope.in_action {
                    Term::Input(v)
                } else {
                    Term::Var(v)
                });
            }
            if elab.consts.contains_key(name) {
                return resolve_ctor(elab, name, vec![], *pos);
            }
            Err(DslError::resolve(
                *pos,
                format!("undeclared identifier {name}"),
            ))
        }
        RawTerm::Const(name, pos) => {
            if elab.consts.contains_key(name) {
                resolve_ctor(elab, name, vec![], *pos)
            } else {
                Err(DslError::resolve(
                    *pos,
                    format!("undeclared constant ${name}"),
                ))
            }
        }
        RawTerm::Input(name, pos) => {
            let Some(sort) = scope.declared_inputs.get(name).copied() else {
                return Err(DslError::resolve(
                    *pos,
                    format!("input variable ?{name} is not declared"),
                ));
            };
            let v = scope.input_var(name, sort);
            Ok(if scope.in_action {
                Term::Input(v)
            } else {
                Term::Var(v)
            })
        }
        RawTerm::Call(name, args, pos) => {
            if scope.vars.contains_key(name) || scope.declared_inputs.contains_key(name) {
                return Err(DslError::resolve(
                    *pos,
                    format!("{name} is a variable and cannot take arguments"),
                ));
            }
            if !elab.consts.contains_key(name) {
                return Err(DslError::resolve(
                    *pos,
                    format!("undeclared identifier {name}"),
                ));
            }
            let args = args
                .iter()
                .map(|a| resolve_term(elab, scope, a))
                .collect::<Result<Vec<_>, _>>()?;
            resolve_ctor(elab, name, args, *pos)
        }
    }
}

fn resolve_ctor(
    elab: &mut Elab,
    name: &str,
    args: Vec<Term>,
    pos: parser::Pos,
) -> Result<Term, DslError> {
    let info = elab.consts.get_mut(name).expect("caller checked presence");
    let arg_sorts: Vec<Sort> = args.iter().map(|a| a.sort()).collect();
    match &info.args {
        None => info.args = Some(arg_sorts),
        Some(known) => {
            if *known != arg_sorts {
                return Err(DslError::resolve(
                    pos,
                    format!(
                        "arity mismatch for {name}: declared with ({}), used with ({})",
                        sort_list(known),
                        sort_list(&arg_sorts)
                    ),
                ));
            }
        }
    }
    let t = Term::ctor(name, info.sort, args);
    Ok(normalise_action(t))
}

fn sort_list(sorts: &[Sort]) -> String {
    sorts
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// `tau`, `tau()` and `synchro(tau)` all denote the silent action.
fn normalise_action(t: Term) -> Term {
    match &t {
        Term::Ctor { name, args, .. } if name == "synchro" && args.len() == 1 && args[0].is_tau() => {
            Term::tau()
        }
        _ => t,
    }
}

fn resolve_pred(elab: &mut Elab, scope: &mut Scope, raw: &RawPred) -> Result<Predicate, DslError> {
    match raw {
        RawPred::True => Ok(Predicate::True),
        RawPred::False => Ok(Predicate::False),
        RawPred::Eq(a, b) | RawPred::Neq(a, b) => {
            let ta = resolve_term(elab, scope, a)?;
            let tb = resolve_term(elab, scope, b)?;
            if ta.sort() != tb.sort() {
                return Err(DslError::resolve(
                    a.pos(),
                    format!("comparison between sorts {} and {}", ta.sort(), tb.sort()),
                ));
            }
            Ok(match raw {
                RawPred::Eq(_, _) => Predicate::Eq(ta, tb),
                _ => Predicate::Neq(ta, tb),
            })
        }
        RawPred::And(ps) => Ok(Predicate::and(
            ps.iter()
                .map(|p| resolve_pred(elab, scope, p))
                .collect::<Result<Vec<_>, _>>()?,
        )),
        RawPred::Or(ps) => Ok(Predicate::or(
            ps.iter()
                .map(|p| resolve_pred(elab, scope, p))
                .collect::<Result<Vec<_>, _>>()?,
        )),
        RawPred::Not(p) => Ok(Predicate::not(resolve_pred(elab, scope, p)?)),
        RawPred::Forall(vars, body) | RawPred::Exists(vars, body) => {
            let mut bound = Vec::new();
            let mut shadowed = Vec::new();
            for (name, sort) in vars {
                let v = Variable::fresh(name.clone(), *sort, 0);
                shadowed.push((name.clone(), scope.vars.insert(name.clone(), v.clone())));
                bound.push(v);
            }
            let inner = resolve_pred(elab, scope, body)?;
            for (name, old) in shadowed.into_iter().rev() {
                match old {
                    Some(v) => {
                        scope.vars.insert(name, v);
                    }
                    None => {
                        scope.vars.remove(&name);
                    }
                }
            }
            Ok(match raw {
                RawPred::Forall(_, _) => Predicate::forall(bound, inner),
                _ => Predicate::exists(bound, inner),
            })
        }
    }
}

fn elab_plts(elab: &mut Elab, def: &PltsDef) -> Result<Plts, DslError> {
    let mut state_vars: Vec<Variable> = Vec::new();
    let mut declared_inputs: BTreeMap<String, Sort> = BTreeMap::new();
    let mut names: BTreeSet<String> = BTreeSet::new();
    // Per-state declarations are lifted to the pLTS level.
    let all_decls = def
        .vars
        .iter()
        .chain(def.states.iter().flat_map(|s| s.vars.iter()));
    for d in all_decls {
        if !names.insert(d.name.clone()) {
            return Err(DslError::resolve(
                d.pos,
                format!("variable {} declared twice in pLTS {}", d.name, def.name),
            ));
        }
        if d.input {
            declared_inputs.insert(d.name.clone(), d.sort);
        } else {
            state_vars.push(Variable::state(d.name.clone(), d.sort, def.name.clone()));
        }
    }

    let initial = def
        .initial
        .clone()
        .ok_or_else(|| DslError::resolve(def.pos, format!("pLTS {} has no initial state", def.name)))?;
    let states: Vec<String> = def.states.iter().map(|s| s.name.clone()).collect();

    let var_map: BTreeMap<String, Variable> =
        state_vars.iter().map(|v| (v.name.clone(), v.clone())).collect();

    let mut transitions = Vec::new();
    let mut index = 0usize;
    for state in &def.states {
        for t in &state.transitions {
            let tid = format!("{}.{}", def.name, index);
            index += 1;
            let mut scope = Scope {
                vars: var_map.clone(),
                declared_inputs: &declared_inputs,
                inputs: BTreeMap::new(),
                in_action: true,
                transition_id: tid.clone(),
            };
            let action = resolve_term(elab, &mut scope, &t.action)?;
            if action.sort() != Sort::Action {
                return Err(DslError::resolve(
                    t.pos,
                    format!("transition label must be an action, found sort {}", action.sort()),
                ));
            }
            scope.in_action = false;
            let guard = match &t.guard {
                Some(g) => resolve_pred(elab, &mut scope, g)?,
                None => Predicate::True,
            };
            let mut assigns = Substitution::new();
            for (lhs, rhs, pos) in &t.assigns {
                let Some(target) = var_map.get(lhs) else {
                    return Err(DslError::resolve(
                        *pos,
                        format!("assignment target {lhs} is not a variable of pLTS {}", def.name),
                    ));
                };
                let value = resolve_term(elab, &mut scope, rhs)?;
                if value.sort() != target.sort {
                    return Err(DslError::resolve(
                        *pos,
                        format!(
                            "assignment to {lhs}:{} from a term of sort {}",
                            target.sort,
                            value.sort()
                        ),
                    ));
                }
                assigns.bind(target.clone(), value).map_err(|e| {
                    DslError::resolve(*pos, e.to_string())
                })?;
            }
            transitions.push(PltsTransition {
                id: tid,
                source: state.name.clone(),
                target: t.target.clone(),
                action,
                guard,
                assigns,
            });
        }
    }

    Ok(Plts {
        name: def.name.clone(),
        states,
        initial,
        vars: state_vars,
        transitions,
    })
}

fn elab_pnet(elab: &mut Elab, def: &PNetDef) -> Result<PNetNode, DslError> {
    let holes: BTreeSet<&String> = def.holes.iter().collect();
    let mut slots = Vec::new();
    for name in &def.subnets {
        if holes.contains(name) {
            slots.push(Slot::Hole {
                name: name.clone(),
                sort: HoleSort::Universal,
            });
        } else if let Some(net) = elab.defs.get(name) {
            if !elab.used.insert(name.clone()) {
                return Err(DslError::resolve(
                    def.pos,
                    format!("subnet {name} is used twice; variables would not be disjoint"),
                ));
            }
            slots.push(Slot::Child {
                name: name.clone(),
                net: net.clone(),
            });
        } else {
            return Err(DslError::resolve(
                def.pos,
                format!("subnet {name} is neither a declared hole nor a defined net"),
            ));
        }
    }
    for h in &def.holes {
        if !def.subnets.contains(h) {
            return Err(DslError::resolve(
                def.pos,
                format!("hole {h} is not listed in the subnets of {}", def.name),
            ));
        }
    }

    let empty_inputs = BTreeMap::new();
    let mut vectors = Vec::new();
    for v in &def.vectors {
        if v.slots.len() != slots.len() {
            return Err(DslError::resolve(
                v.pos,
                format!(
                    "vector {} has {} entries for {} subnets",
                    v.name,
                    v.slots.len(),
                    slots.len()
                ),
            ));
        }
        let qualified = format!("{}.{}", def.name, v.name);
        // Every vector gets its own instances of the pNet's variables:
        // vectors are identified modulo renaming.
        let vars: BTreeMap<String, Variable> = def
            .vars
            .iter()
            .map(|d| {
                (
                    d.name.clone(),
                    Variable::vector(d.name.clone(), d.sort, qualified.clone()),
                )
            })
            .collect();
        let mut scope = Scope {
            vars,
            declared_inputs: &empty_inputs,
            inputs: BTreeMap::new(),
            in_action: false,
            transition_id: qualified.clone(),
        };
        let mut resolved_slots = Vec::new();
        for s in &v.slots {
            resolved_slots.push(match s {
                None => None,
                Some(raw) => Some(resolve_term(elab, &mut scope, raw)?),
            });
        }
        let result = resolve_term(elab, &mut scope, &v.result)?;
        let guard = match &v.guard {
            Some(g) => resolve_pred(elab, &mut scope, g)?,
            None => Predicate::True,
        };
        // Guard variables not occurring in the vector's actions are
        // universally quantified.
        let mut action_vars: BTreeSet<Variable> = result.free_vars();
        for s in resolved_slots.iter().flatten() {
            action_vars.extend(s.free_vars());
        }
        let unbound: Vec<Variable> = guard
            .free_vars()
            .into_iter()
            .filter(|v| !action_vars.contains(v))
            .collect();
        let guard = Predicate::forall(unbound, guard);
        vectors.push(SyncVector {
            id: v.name.clone(),
            slots: resolved_slots,
            result,
            guard,
            synthesized: false,
        });
    }

    // One idle vector <τ> → τ per slot, so a τ of any subnet or hole
    // passes through unobserved.
    for (i, slot) in slots.iter().enumerate() {
        let already = vectors.iter().any(|v| {
            v.result.is_tau()
                && v.guard == Predicate::True
                && v.slots.iter().enumerate().all(|(j, s)| match s {
                    Some(t) => j == i && t.is_tau(),
                    None => j != i,
                })
        });
        if !already {
            let mut idle = vec![None; slots.len()];
            idle[i] = Some(Term::tau());
            vectors.push(SyncVector {
                id: format!("tau.{}", slot.name()),
                slots: idle,
                result: Term::tau(),
                guard: Predicate::True,
                synthesized: true,
            });
        }
    }

    Ok(PNetNode {
        name: def.name.clone(),
        slots,
        vectors,
    })
}

// ---------------------------------------------------------------------
// Printing back to the surface syntax.

/// Renders an elaborated system in the surface language. Synthesized idle
/// vectors and the implicit universal quantifiers of vector guards are
/// omitted; re-parsing restores them.
pub fn print_system(sys: &System) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}:", sys.name);
    let _ = writeln!(out, "root {}", sys.net.name());

    // Constant declarations grouped by sort.
    let mut by_sort: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for c in sys.signature.ctors() {
        if c.name.starts_with('@') {
            continue;
        }
        by_sort
            .entry(c.result.to_string())
            .or_default()
            .push(c.name.clone());
    }
    for (sort, names) in by_sort {
        let _ = writeln!(out, "const {}:{}", names.join(", "), sort);
    }
    out.push('\n');

    let mut defs = Vec::new();
    collect_defs(&sys.net, &mut defs);
    for def in defs {
        match def {
            PNet::Leaf(p) => print_plts(&mut out, p),
            PNet::Node(n) => print_node(&mut out, n),
        }
    }
    out
}

/// Definitions in dependency order (children before parents).
fn collect_defs<'a>(net: &'a PNet, out: &mut Vec<&'a PNet>) {
    if let PNet::Node(n) = net {
        for slot in &n.slots {
            if let Slot::Child { net, .. } = slot {
                collect_defs(net, out);
            }
        }
    }
    out.push(net);
}

fn print_plts(out: &mut String, p: &Plts) {
    let _ = writeln!(out, "pLTS {}", p.name);
    let _ = writeln!(out, "initial {}", p.initial);
    let mut decls: Vec<String> = Vec::new();
    let mut seen_inputs: BTreeSet<String> = BTreeSet::new();
    for t in &p.transitions {
        for v in t.action.input_vars() {
            if seen_inputs.insert(v.name.clone()) {
                decls.push(format!("?{}:{}", v.name, v.sort));
            }
        }
    }
    for v in &p.vars {
        decls.push(format!("{}:{}", v.name, v.sort));
    }
    if !decls.is_empty() {
        let _ = writeln!(out, "vars {}", decls.join(" "));
    }
    for state in &p.states {
        let _ = writeln!(out, "\nstate {state}");
        for t in p.transitions.iter().filter(|t| &t.source == state) {
            let mut line = format!("transition {}", dsl_term(&t.action));
            if t.guard != Predicate::True {
                let _ = write!(line, " [{}]", dsl_pred(&t.guard));
            }
            let _ = write!(line, " -> {}", t.target);
            if !t.assigns.is_empty() {
                let parts: Vec<String> = t
                    .assigns
                    .iter()
                    .map(|(lhs, rhs)| format!("{}:={}", lhs.name, dsl_term(rhs)))
                    .collect();
                let _ = write!(line, " {{{}}}", parts.join(", "));
            }
            let _ = writeln!(out, "{line}");
        }
    }
    out.push('\n');
}

fn print_node(out: &mut String, n: &PNetNode) {
    let _ = writeln!(out, "pNet {}", n.name);
    let holes: Vec<&str> = n
        .slots
        .iter()
        .filter_map(|s| match s {
            Slot::Hole { name, .. } => Some(name.as_str()),
            _ => None,
        })
        .collect();
    if !holes.is_empty() {
        let _ = writeln!(out, "holes {}", holes.join(","));
    }
    let subnets: Vec<&str> = n.slots.iter().map(|s| s.name()).collect();
    let _ = writeln!(out, "subnets {}", subnets.join(","));

    // Vector variables, one declaration per base name.
    let mut decls: BTreeMap<String, Sort> = BTreeMap::new();
    for v in &n.vectors {
        if v.synthesized {
            continue;
        }
        let mut vars: BTreeSet<Variable> = v.result.free_vars();
        for s in v.slots.iter().flatten() {
            vars.extend(s.free_vars());
        }
        vars.extend(guard_vars(&v.guard));
        for var in vars {
            if matches!(var.origin, VarOrigin::Vector { .. }) {
                decls.insert(var.name.clone(), var.sort);
            }
        }
    }
    if !decls.is_empty() {
        let parts: Vec<String> = decls.iter().map(|(n, s)| format!("{n}:{s}")).collect();
        let _ = writeln!(out, "vars {}", parts.join(" "));
    }

    for v in &n.vectors {
        if v.synthesized {
            continue;
        }
        let slots: Vec<String> = v
            .slots
            .iter()
            .map(|s| match s {
                None => "_".to_string(),
                Some(t) => dsl_term(t),
            })
            .collect();
        let mut line = format!("vector {} <{}>->{}", v.id, slots.join(", "), dsl_term(&v.result));
        // Drop the implicit quantifier: parsing adds it back.
        let printable = match &v.guard {
            Predicate::Forall(vars, body)
                if vars
                    .iter()
                    .all(|x| matches!(x.origin, VarOrigin::Vector { .. })) =>
            {
                (**body).clone()
            }
            g => g.clone(),
        };
        if printable != Predicate::True {
            let _ = write!(line, " [{}]", dsl_pred(&printable));
        }
        let _ = writeln!(out, "{line}");
    }
    out.push('\n');
}

fn guard_vars(p: &Predicate) -> BTreeSet<Variable> {
    // Free variables plus the implicitly quantified vector variables.
    let mut vars = p.free_vars();
    if let Predicate::Forall(vs, body) = p {
        if vs.iter().all(|x| matches!(x.origin, VarOrigin::Vector { .. })) {
            vars.extend(vs.iter().cloned());
            vars.extend(body.free_vars());
        }
    }
    vars
}

/// Term in surface syntax: bare variable names, `$c` for nullary
/// constructors, `?x` for input occurrences.
pub fn dsl_term(t: &Term) -> String {
    match t {
        Term::Var(v) => v.name.clone(),
        Term::Input(v) => format!("?{}", v.name),
        Term::Nat(k) => k.to_string(),
        Term::Plus(inner, k) => format!("{}+{}", dsl_term(inner), k),
        Term::Ctor { name, args, .. } => {
            if args.is_empty() {
                format!("${name}")
            } else {
                let args: Vec<String> = args.iter().map(dsl_term).collect();
                format!("{}({})", name, args.join(", "))
            }
        }
    }
}

pub fn dsl_pred(p: &Predicate) -> String {
    match p {
        Predicate::True => "true".into(),
        Predicate::False => "false".into(),
        Predicate::Eq(a, b) => format!("{} = {}", dsl_term(a), dsl_term(b)),
        Predicate::Neq(a, b) => format!("{} != {}", dsl_term(a), dsl_term(b)),
        Predicate::And(ps) => {
            let parts: Vec<String> = ps.iter().map(dsl_pred).collect();
            format!("({})", parts.join(" && "))
        }
        Predicate::Or(ps) => {
            let parts: Vec<String> = ps.iter().map(dsl_pred).collect();
            format!("({})", parts.join(" || "))
        }
        Predicate::Not(q) => format!("!({})", dsl_pred(q)),
        Predicate::Forall(vs, body) => {
            let vars: Vec<String> = vs.iter().map(|v| format!("{}:{}", v.name, v.sort)).collect();
            format!("forall {}. {}", vars.join(", "), dsl_pred(body))
        }
        Predicate::Exists(vs, body) => {
            let vars: Vec<String> = vs.iter().map(|v| format!("{}:{}", v.name, v.sort)).collect();
            format!("exists {}. {}", vars.join(", "), dsl_pred(body))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::alpha_eq_pred;

    const SMALL: &str = r#"
Tiny:
root Tiny
const ping, pong:Action
const p_send:Action

pLTS Cell
initial c0
vars ?x:Data v:Data

state c0
transition ping(x) -> c1 {v:=x}

state c1
transition pong(v) -> c0

pNet Tiny
holes H
subnets H,Cell
vars a:Action m:Data
vector SV0 <a,_>->a [a != p_send(m)]
vector SV1 <_,ping(m)>->ping(m)
"#;

    #[test]
    fn parses_and_elaborates() {
        let sys = load_system(SMALL, &[]).unwrap();
        assert_eq!(sys.net.name(), "Tiny");
        let leaves = sys.net.leaves();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].transitions.len(), 2);
        let PNet::Node(node) = &sys.net else { panic!() };
        // 2 user vectors + 2 synthesized idle vectors.
        assert_eq!(node.vectors.len(), 4);
        assert_eq!(node.vectors.iter().filter(|v| v.synthesized).count(), 2);
    }

    #[test]
    fn implicit_universal_quantifier() {
        let sys = load_system(SMALL, &[]).unwrap();
        let PNet::Node(node) = &sys.net else { panic!() };
        let sv0 = &node.vectors[0];
        match &sv0.guard {
            Predicate::Forall(vs, body) => {
                assert_eq!(vs.len(), 1);
                assert_eq!(vs[0].name, "m");
                assert!(matches!(body.as_ref(), Predicate::Neq(_, _)));
            }
            other => panic!("expected an implicitly quantified guard, got {other:?}"),
        }
        // A guard over slot variables only stays unquantified.
        assert_eq!(node.vectors[1].guard, Predicate::True);
    }

    #[test]
    fn empty_input_is_a_syntax_error() {
        assert!(matches!(parse(""), Err(DslError::Syntax { .. })));
    }

    #[test]
    fn undeclared_identifier_is_reported() {
        let bad = SMALL.replace("const ping, pong:Action", "const ping:Action");
        let err = load_system(&bad, &[]).unwrap_err();
        assert!(err.to_string().contains("undeclared identifier pong"), "{err}");
    }

    #[test]
    fn arity_mismatch_is_reported() {
        let bad = SMALL.replace("transition pong(v) -> c0", "transition ping(v, v) -> c0");
        let err = load_system(&bad, &[]).unwrap_err();
        assert!(err.to_string().contains("arity mismatch"), "{err}");
    }

    #[test]
    fn tau_normalises() {
        let src = r#"
T:
root T
const a:Action
pLTS L
initial l0
state l0
transition synchro($tau) -> l0
transition $a -> l0
pNet T
subnets L
vector V0 <a>->a
"#;
        let sys = load_system(src, &[]).unwrap();
        let leaf = &sys.net.leaves()[0];
        assert!(leaf.transitions[0].action.is_tau());
        assert_eq!(leaf.transitions[1].action, Term::action("a", vec![]));
    }

    #[test]
    fn print_parse_roundtrip() {
        let sys = load_system(SMALL, &[]).unwrap();
        let printed = print_system(&sys);
        let again = load_system(&printed, &[]).unwrap();
        assert_eq!(sys.net, again.net, "printed form:\n{printed}");
    }

    #[test]
    fn guard_predicates_roundtrip_alpha_equivalently() {
        let sys = load_system(SMALL, &[]).unwrap();
        let printed = print_system(&sys);
        let again = load_system(&printed, &[]).unwrap();
        let PNet::Node(a) = &sys.net else { panic!() };
        let PNet::Node(b) = &again.net else { panic!() };
        for (va, vb) in a.vectors.iter().zip(&b.vectors) {
            assert!(alpha_eq_pred(&va.guard, &vb.guard));
        }
    }
}
