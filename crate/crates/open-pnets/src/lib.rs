//! Symbolic semantics and bisimulation checking for open pNets.
//!
//! An open pNet is a tree of parameterised labelled transition systems
//! (pLTSs) and *holes* (process parameters), composed by synchronisation
//! vectors. This crate derives the symbolic open-automaton semantics of such
//! a network, saturates it into a weak open automaton, and checks
//! user-supplied candidate relations for strong and weak FH-bisimulation by
//! discharging first-order proof obligations over a free-constructor term
//! algebra.
//!
//! The pipeline, bottom to top:
//!
//! * [`term`] — sorted terms, predicates and parallel substitutions,
//!   including the composition operator `⊗`;
//! * [`model`] — pLTSs, synchronisation vectors, pNet trees, hole filling
//!   and the non-observability check;
//! * [`dsl`] — parser and elaborator for the textual `.pnet` language;
//! * [`logic`] — validity/satisfiability for the generated predicate
//!   fragment, plus SMT-LIB 2 export;
//! * [`semantics`] — derivation of the strong open automaton;
//! * [`weak`] — weak open transitions and bounded saturation;
//! * [`bisim`] — strong and weak FH-bisimulation checking of relation files.

pub mod term;

pub mod logic;

pub mod model;

pub mod dsl;

pub mod semantics;

pub mod weak;

pub mod bisim;

mod guide;
