//! SMT-LIB 2 export, plus optional invocation of an external solver as a
//! cross-check. Export declares the free algebra as a datatype, `Data` as
//! an uninterpreted sort and `Nat` as a non-negative `Int`; the script
//! asserts the negation of the predicate, so `unsat` means valid.
//!
//! The external solver is configured through the `OPENPNET_SMT_CMD`
//! environment variable (a command that reads SMT-LIB 2 on stdin, e.g.
//! `z3 -in`). It is strictly a cross-check: nothing in the toolkit requires
//! it.


use std::fmt::Write as _;
use std::io::Write as _;
use std::process::{Command, Stdio};

use crate::term::{Predicate, Sort, Term, Variable};

use super::Signature;

pub const SMT_CMD_ENV: &str = "OPENPNET_SMT_CMD";

/// Renders a predicate as a complete SMT-LIB 2 script asserting `(not p)`.
pub fn to_smtlib(sig: &Signature, p: &Predicate) -> String {
    let mut out = String::new();
    out.push_str("(set-logic ALL)\n");
    out.push_str("(declare-sort Data 0)\n");

    let action_ctors: Vec<_> = sig.ctors_of_sort(Sort::Action).collect();
    if !action_ctors.is_empty() {
        out.push_str("(declare-datatypes ((Action 0)) ((");
        for (i, c) in action_ctors.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            if c.args.is_empty() {
                let _ = write!(out, "({})", smt_name(&c.name));
            } else {
                let _ = write!(out, "({}", smt_name(&c.name));
                for (j, s) in c.args.iter().enumerate() {
                    let _ = write!(out, " ({}-arg{} {})", smt_name(&c.name), j, smt_sort(*s));
                }
                out.push(')');
            }
        }
        out.push_str(")))\n");
    }

    for c in sig.ctors_of_sort(Sort::Data) {
        if c.args.is_empty() {
            let _ = writeln!(out, "(declare-const {} Data)", smt_name(&c.name));
        }
    }

    let free = p.free_vars();
    for v in &free {
        let _ = writeln!(out, "(declare-const {} {})", smt_var(v), smt_sort(v.sort));
        if v.sort == Sort::Nat {
            let _ = writeln!(out, "(assert (>= {} 0))", smt_var(v));
        }
    }

    let _ = writeln!(out, "(assert (not {}))", smt_pred(p));
    out.push_str("(check-sat)\n");
    out
}

fn smt_sort(s: Sort) -> &'static str {
    match s {
        Sort::Data => "Data",
        Sort::Nat => "Int",
        Sort::Bool => "Bool",
        Sort::Action => "Action",
    }
}

fn smt_name(name: &str) -> String {
    name.replace('@', "at_")
}

fn smt_var(v: &Variable) -> String {
    smt_name(&v.to_string().replace(['@', '#', '.'], "_"))
        .replace(['(', ')'], "_")
}

fn smt_term(t: &Term) -> String {
    match t {
        Term::Var(v) | Term::Input(v) => smt_var(v),
        Term::Nat(k) => k.to_string(),
        Term::Plus(inner, k) => format!("(+ {} {})", smt_term(inner), k),
        Term::Ctor { name, args, .. } => {
            if args.is_empty() {
                smt_name(name)
            } else {
                let args: Vec<String> = args.iter().map(smt_term).collect();
                format!("({} {})", smt_name(name), args.join(" "))
            }
        }
    }
}

fn smt_pred(p: &Predicate) -> String {
    match p {
        Predicate::True => "true".into(),
        Predicate::False => "false".into(),
        Predicate::Eq(a, b) => format!("(= {} {})", smt_term(a), smt_term(b)),
        Predicate::Neq(a, b) => format!("(distinct {} {})", smt_term(a), smt_term(b)),
        Predicate::And(ps) => {
            let parts: Vec<String> = ps.iter().map(smt_pred).collect();
            format!("(and {})", parts.join(" "))
        }
        Predicate::Or(ps) => {
            let parts: Vec<String> = ps.iter().map(smt_pred).collect();
            format!("(or {})", parts.join(" "))
        }
        Predicate::Not(q) => format!("(not {})", smt_pred(q)),
        Predicate::Forall(vs, body) => quant("forall", vs, body),
        Predicate::Exists(vs, body) => quant("exists", vs, body),
    }
}

fn quant(kind: &str, vs: &[Variable], body: &Predicate) -> String {
    let binders: Vec<String> = vs
        .iter()
        .map(|v| format!("({} {})", smt_var(v), smt_sort(v.sort)))
        .collect();
    // Nat quantifiers range over the non-negative integers.
    let nat_guards: Vec<String> = vs
        .iter()
        .filter(|v| v.sort == Sort::Nat)
        .map(|v| format!("(>= {} 0)", smt_var(v)))
        .collect();
    let inner = smt_pred(body);
    let guarded = if nat_guards.is_empty() {
        inner
    } else if kind == "forall" {
        format!("(=> (and {} true) {})", nat_guards.join(" "), inner)
    } else {
        format!("(and {} {})", nat_guards.join(" "), inner)
    };
    format!("({} ({}) {})", kind, binders.join(" "), guarded)
}

/// Verdict reported by an external solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmtVerdict {
    /// Script answered `unsat`: the predicate is valid.
    Unsat,
    /// Script answered `sat`: the predicate has a countermodel.
    Sat,
    Unknown,
}

/// Runs the external solver named by `OPENPNET_SMT_CMD` on the script for
/// `p`. Returns `None` when the variable is unset or the command fails to
/// run.
pub fn cross_check(sig: &Signature, p: &Predicate) -> Option<SmtVerdict> {
    let cmd = std::env::var(SMT_CMD_ENV).ok()?;
    run_command(&cmd, &to_smtlib(sig, p))
}

fn run_command(cmd: &str, script: &str) -> Option<SmtVerdict> {
    let mut parts = cmd.split_whitespace();
    let program = parts.next()?;
    let mut child = Command::new(program)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .ok()?;
    child
        .stdin
        .as_mut()?
        .write_all(script.as_bytes())
        .ok()?;
    let output = child.wait_with_output().ok()?;
    let text = String::from_utf8_lossy(&output.stdout);
    for line in text.lines() {
        match line.trim() {
            "unsat" => return Some(SmtVerdict::Unsat),
            "sat" => return Some(SmtVerdict::Sat),
            "unknown" => return Some(SmtVerdict::Unknown),
            _ => {}
        }
    }
    Some(SmtVerdict::Unknown)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_script() {
        let sig = Signature::new();
        let script = to_smtlib(&sig, &Predicate::True);
        assert!(script.contains("(assert (not true))"));
        assert!(script.ends_with("(check-sat)\n"));
    }
}
