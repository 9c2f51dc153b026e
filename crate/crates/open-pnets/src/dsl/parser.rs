//! Recursive-descent parser producing the raw source AST. Resolution of
//! names, sorts and arities happens during elaboration.

use crate::term::Sort;

use super::lexer::{lex, Tok, Token};
use super::DslError;

#[derive(Debug, Clone, PartialEq)]
pub enum RawTerm {
    Ident(String, Pos),
    Nat(u64),
    /// `name(args…)`
    Call(String, Vec<RawTerm>, Pos),
    /// `$name` — explicit nullary constant
    Const(String, Pos),
    /// `?name` — input-marked variable
    Input(String, Pos),
    Plus(Box<RawTerm>, u64),
}

impl RawTerm {
    pub fn pos(&self) -> Pos {
        match self {
            RawTerm::Ident(_, p) | RawTerm::Call(_, _, p) | RawTerm::Const(_, p) | RawTerm::Input(_, p) => *p,
            RawTerm::Nat(_) => Pos { line: 0, col: 0 },
            RawTerm::Plus(t, _) => t.pos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawPred {
    True,
    False,
    Eq(RawTerm, RawTerm),
    Neq(RawTerm, RawTerm),
    And(Vec<RawPred>),
    Or(Vec<RawPred>),
    Not(Box<RawPred>),
    Forall(Vec<(String, Sort)>, Box<RawPred>),
    Exists(Vec<(String, Sort)>, Box<RawPred>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub input: bool,
    pub name: String,
    pub sort: Sort,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransDef {
    pub action: RawTerm,
    pub guard: Option<RawPred>,
    pub target: String,
    pub assigns: Vec<(String, RawTerm, Pos)>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDef {
    pub name: String,
    pub vars: Vec<VarDecl>,
    pub transitions: Vec<TransDef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PltsDef {
    pub name: String,
    pub initial: Option<String>,
    pub vars: Vec<VarDecl>,
    pub states: Vec<StateDef>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorDef {
    pub name: String,
    pub slots: Vec<Option<RawTerm>>,
    pub result: RawTerm,
    pub guard: Option<RawPred>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PNetDef {
    pub name: String,
    pub holes: Vec<String>,
    pub subnets: Vec<String>,
    pub vars: Vec<VarDecl>,
    pub vectors: Vec<VectorDef>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Def {
    Plts(PltsDef),
    PNet(PNetDef),
}

/// The raw source file: declarations in order, before resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSystem {
    pub name: String,
    pub imports: Vec<String>,
    pub root: Option<String>,
    pub consts: Vec<(String, Sort, Pos)>,
    pub defs: Vec<Def>,
}

pub fn parse(src: &str) -> Result<SourceSystem, DslError> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, at: 0 };
    p.system()
}

/// Parses a bare predicate (the syntax of guards); used by relation files.
pub fn parse_predicate(src: &str) -> Result<RawPred, DslError> {
    let tokens = lex(src)?;
    let mut p = Parser { tokens, at: 0 };
    let pred = p.pred()?;
    if !p.done() {
        let t = p.peek_token();
        return Err(DslError::syntax(t.0, t.1, "trailing input after predicate"));
    }
    Ok(pred)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn done(&self) -> bool {
        self.at >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|t| &t.tok)
    }

    fn peek_token(&self) -> (usize, usize) {
        self.tokens
            .get(self.at)
            .or_else(|| self.tokens.last())
            .map(|t| (t.line, t.col))
            .unwrap_or((1, 1))
    }

    fn pos(&self) -> Pos {
        let (line, col) = self.peek_token();
        Pos { line, col }
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, DslError> {
        let (line, col) = self.peek_token();
        Err(DslError::syntax(line, col, msg))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Token, DslError> {
        match self.next() {
            Some(t) if t.tok == tok => Ok(t),
            Some(t) => Err(DslError::syntax(t.line, t.col, format!("expected {what}"))),
            None => {
                let (line, col) = self.peek_token();
                Err(DslError::syntax(line, col, format!("expected {what}, found end of input")))
            }
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Pos), DslError> {
        match self.next() {
            Some(Token {
                tok: Tok::Ident(s),
                line,
                col,
            }) => Ok((s, Pos { line, col })),
            Some(t) => Err(DslError::syntax(t.line, t.col, format!("expected {what}"))),
            None => {
                let (line, col) = self.peek_token();
                Err(DslError::syntax(line, col, format!("expected {what}, found end of input")))
            }
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    // ---- grammar ------------------------------------------------------

    fn system(&mut self) -> Result<SourceSystem, DslError> {
        if self.done() {
            return self.err("empty input");
        }
        let (name, _) = self.ident("system name")?;
        self.expect(Tok::Colon, "':' after the system name")?;
        let mut sys = SourceSystem {
            name,
            imports: Vec::new(),
            root: None,
            consts: Vec::new(),
            defs: Vec::new(),
        };
        while !self.done() {
            if self.eat_kw("import") {
                match self.next() {
                    Some(Token { tok: Tok::Str(s), .. }) => sys.imports.push(s),
                    _ => return self.err("expected a quoted path after import"),
                }
            } else if self.eat_kw("root") {
                let (r, _) = self.ident("root name")?;
                sys.root = Some(r);
            } else if self.eat_kw("const") {
                self.const_decl(&mut sys)?;
            } else if self.eat_kw("pLTS") {
                let d = self.plts()?;
                sys.defs.push(Def::Plts(d));
            } else if self.eat_kw("pNet") {
                let d = self.pnet()?;
                sys.defs.push(Def::PNet(d));
            } else {
                return self.err("expected import, root, const, pLTS or pNet");
            }
        }
        Ok(sys)
    }

    fn const_decl(&mut self, sys: &mut SourceSystem) -> Result<(), DslError> {
        let mut names = Vec::new();
        loop {
            let (n, pos) = self.ident("constant name")?;
            names.push((n, pos));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::Colon, "':' before the constant sort")?;
        let sort = self.sort()?;
        for (n, pos) in names {
            sys.consts.push((n, sort, pos));
        }
        Ok(())
    }

    fn sort(&mut self) -> Result<Sort, DslError> {
        let (s, pos) = self.ident("a sort name")?;
        match s.as_str() {
            "Data" => Ok(Sort::Data),
            "Int" | "Nat" => Ok(Sort::Nat),
            "Bool" => Ok(Sort::Bool),
            "Action" => Ok(Sort::Action),
            other => Err(DslError::syntax(
                pos.line,
                pos.col,
                format!("unknown sort {other}"),
            )),
        }
    }

    fn var_decls(&mut self) -> Result<Vec<VarDecl>, DslError> {
        // Groups of `?a, b, c : Sort`, whitespace separated:
        //   vars ?msg:Data  p_a,q_a:Action m:Data ec:Int
        let mut out = Vec::new();
        loop {
            let mut group: Vec<(bool, String, Pos)> = Vec::new();
            loop {
                let input = self.eat(&Tok::Question);
                let (name, pos) = self.ident("variable name")?;
                group.push((input, name, pos));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::Colon, "':' before the variable sort")?;
            let sort = self.sort()?;
            for (input, name, pos) in group {
                out.push(VarDecl {
                    input,
                    name,
                    sort,
                    pos,
                });
            }
            // Another group follows if we see `?` or a non-keyword ident
            // followed by ':' or ','.
            match self.peek() {
                Some(Tok::Question) => continue,
                Some(Tok::Ident(s)) if !is_keyword(s) => {
                    match self.tokens.get(self.at + 1).map(|t| &t.tok) {
                        Some(Tok::Colon) | Some(Tok::Comma) => continue,
                        _ => break,
                    }
                }
                _ => break,
            }
        }
        Ok(out)
    }

    fn plts(&mut self) -> Result<PltsDef, DslError> {
        let (name, pos) = self.ident("pLTS name")?;
        let mut def = PltsDef {
            name,
            initial: None,
            vars: Vec::new(),
            states: Vec::new(),
            pos,
        };
        loop {
            if self.eat_kw("initial") {
                let (s, _) = self.ident("initial state name")?;
                def.initial = Some(s);
            } else if self.eat_kw("vars") {
                let vars = self.var_decls()?;
                match def.states.last_mut() {
                    // Per-state vars (older listings) are lifted to the pLTS.
                    Some(state) => state.vars.extend(vars),
                    None => def.vars.extend(vars),
                }
            } else if self.eat_kw("state") {
                let (s, _) = self.ident("state name")?;
                def.states.push(StateDef {
                    name: s,
                    vars: Vec::new(),
                    transitions: Vec::new(),
                });
            } else if self.is_kw("transition") {
                let pos = self.pos();
                self.eat_kw("transition");
                if def.states.is_empty() {
                    return Err(DslError::syntax(
                        pos.line,
                        pos.col,
                        "transition before any state declaration",
                    ));
                }
                let action = self.action_term()?;
                let guard = if self.eat(&Tok::LBracket) {
                    let g = self.pred()?;
                    self.expect(Tok::RBracket, "']' after the guard")?;
                    Some(g)
                } else {
                    None
                };
                self.expect(Tok::Arrow, "'->' before the target state")?;
                let (target, _) = self.ident("target state")?;
                let mut assigns = Vec::new();
                if self.eat(&Tok::LBrace) {
                    if !self.eat(&Tok::RBrace) {
                        loop {
                            let (lhs, apos) = self.ident("assignment target")?;
                            self.expect(Tok::Assign, "':=' in assignment")?;
                            let rhs = self.expr()?;
                            assigns.push((lhs, rhs, apos));
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                        self.expect(Tok::RBrace, "'}' after assignments")?;
                    }
                }
                def.states.last_mut().unwrap().transitions.push(TransDef {
                    action,
                    guard,
                    target,
                    assigns,
                    pos,
                });
            } else {
                break;
            }
        }
        Ok(def)
    }

    fn pnet(&mut self) -> Result<PNetDef, DslError> {
        let (name, pos) = self.ident("pNet name")?;
        let mut def = PNetDef {
            name,
            holes: Vec::new(),
            subnets: Vec::new(),
            vars: Vec::new(),
            vectors: Vec::new(),
            pos,
        };
        loop {
            if self.eat_kw("holes") {
                loop {
                    let (h, _) = self.ident("hole name")?;
                    def.holes.push(h);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            } else if self.eat_kw("subnets") {
                loop {
                    let (s, _) = self.ident("subnet name")?;
                    def.subnets.push(s);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            } else if self.eat_kw("vars") {
                def.vars.extend(self.var_decls()?);
            } else if self.is_kw("vector") {
                let vpos = self.pos();
                self.eat_kw("vector");
                let (vname, _) = self.ident("vector name")?;
                self.expect(Tok::Lt, "'<' opening the vector")?;
                let mut slots = Vec::new();
                loop {
                    if self.eat(&Tok::Underscore) {
                        slots.push(None);
                    } else {
                        slots.push(Some(self.action_term()?));
                    }
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::Gt, "'>' closing the vector")?;
                self.expect(Tok::Arrow, "'->' before the result action")?;
                let result = self.action_term()?;
                let guard = if self.eat(&Tok::LBracket) {
                    let g = self.pred()?;
                    self.expect(Tok::RBracket, "']' after the vector guard")?;
                    Some(g)
                } else {
                    None
                };
                def.vectors.push(VectorDef {
                    name: vname,
                    slots,
                    result,
                    guard,
                    pos: vpos,
                });
            } else {
                break;
            }
        }
        Ok(def)
    }

    /// An action term: `$name`, `name`, or `name(arg, …)`.
    fn action_term(&mut self) -> Result<RawTerm, DslError> {
        if self.eat(&Tok::Dollar) {
            let (n, pos) = self.ident("constant name after '$'")?;
            return Ok(RawTerm::Const(n, pos));
        }
        let (n, pos) = self.ident("action name")?;
        if self.eat(&Tok::LParen) {
            let mut args = Vec::new();
            if !self.eat(&Tok::RParen) {
                loop {
                    args.push(self.expr()?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
                self.expect(Tok::RParen, "')' closing the argument list")?;
            }
            Ok(RawTerm::Call(n, args, pos))
        } else {
            Ok(RawTerm::Ident(n, pos))
        }
    }

    /// Expressions: atoms optionally followed by `+ <nat>` chains.
    fn expr(&mut self) -> Result<RawTerm, DslError> {
        let mut t = self.atom()?;
        while self.eat(&Tok::Plus) {
            match self.next() {
                Some(Token { tok: Tok::Nat(k), .. }) => {
                    t = RawTerm::Plus(Box::new(t), k);
                }
                _ => return self.err("only addition of a literal is supported"),
            }
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<RawTerm, DslError> {
        match self.peek() {
            Some(Tok::Nat(_)) => {
                let Some(Token { tok: Tok::Nat(k), .. }) = self.next() else {
                    unreachable!()
                };
                Ok(RawTerm::Nat(k))
            }
            Some(Tok::Question) => {
                self.next();
                let (n, pos) = self.ident("input variable name")?;
                Ok(RawTerm::Input(n, pos))
            }
            Some(Tok::Dollar) => {
                self.next();
                let (n, pos) = self.ident("constant name after '$'")?;
                Ok(RawTerm::Const(n, pos))
            }
            Some(Tok::LParen) => {
                self.next();
                let t = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(t)
            }
            Some(Tok::Ident(_)) => self.action_term(),
            _ => self.err("expected an expression"),
        }
    }

    // Predicates: `||` over `&&` over atoms.
    pub(super) fn pred(&mut self) -> Result<RawPred, DslError> {
        let mut parts = vec![self.conj()?];
        while self.eat(&Tok::OrOr) {
            parts.push(self.conj()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            RawPred::Or(parts)
        })
    }

    fn conj(&mut self) -> Result<RawPred, DslError> {
        let mut parts = vec![self.pred_atom()?];
        while self.eat(&Tok::AndAnd) {
            parts.push(self.pred_atom()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            RawPred::And(parts)
        })
    }

    fn pred_atom(&mut self) -> Result<RawPred, DslError> {
        if self.eat_kw("true") {
            return Ok(RawPred::True);
        }
        if self.eat_kw("false") {
            return Ok(RawPred::False);
        }
        if self.eat(&Tok::Bang) {
            let p = self.pred_atom()?;
            return Ok(RawPred::Not(Box::new(p)));
        }
        if self.is_kw("forall") || self.is_kw("exists") {
            let forall = self.is_kw("forall");
            self.next();
            let mut vars = Vec::new();
            loop {
                let (n, _) = self.ident("quantified variable")?;
                self.expect(Tok::Colon, "':' before the variable sort")?;
                let sort = self.sort()?;
                vars.push((n, sort));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::Dot, "'.' after the quantifier prefix")?;
            let body = self.pred()?;
            return Ok(if forall {
                RawPred::Forall(vars, Box::new(body))
            } else {
                RawPred::Exists(vars, Box::new(body))
            });
        }
        if self.peek() == Some(&Tok::LParen) {
            // Could be a parenthesised predicate or a parenthesised
            // expression starting a comparison; try the predicate first.
            let save = self.at;
            self.next();
            if let Ok(p) = self.pred() {
                if self.eat(&Tok::RParen) {
                    // Not a comparison operand: only accept if no
                    // comparison operator follows.
                    if !matches!(self.peek(), Some(Tok::Eq) | Some(Tok::Neq)) {
                        return Ok(p);
                    }
                }
            }
            self.at = save;
        }
        let lhs = self.expr()?;
        match self.next() {
            Some(Token { tok: Tok::Eq, .. }) => {
                let rhs = self.expr()?;
                Ok(RawPred::Eq(lhs, rhs))
            }
            Some(Token { tok: Tok::Neq, .. }) => {
                let rhs = self.expr()?;
                Ok(RawPred::Neq(lhs, rhs))
            }
            Some(t) => Err(DslError::syntax(t.line, t.col, "expected '=' or '!='")),
            None => {
                let (line, col) = self.peek_token();
                Err(DslError::syntax(line, col, "expected a comparison"))
            }
        }
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(
        s,
        "import"
            | "root"
            | "const"
            | "pLTS"
            | "pNet"
            | "initial"
            | "vars"
            | "state"
            | "transition"
            | "holes"
            | "subnets"
            | "vector"
    )
}
