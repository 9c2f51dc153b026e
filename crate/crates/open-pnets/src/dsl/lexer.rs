//! Tokenizer for the `.pnet` language. Tracks line/column for error
//! reporting; `//` starts a comment to end of line.

use super::DslError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Nat(u64),
    Str(String),
    // punctuation
    Colon,
    Comma,
    Dot,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Lt,
    Gt,
    Arrow,    // ->
    Assign,   // :=
    Eq,       // = or ==
    Neq,      // !=
    AndAnd,   // && or /\
    OrOr,     // || or \/
    Bang,     // !
    Plus,
    Question, // ?
    Dollar,   // $
    Underscore,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let mut line = 1usize;
    let mut col = 1usize;

    macro_rules! push {
        ($tok:expr, $c:expr) => {
            out.push(Token {
                tok: $tok,
                line,
                col: $c,
            })
        };
    }

    while let Some(&c) = chars.peek() {
        let start_col = col;
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                chars.next();
                col += 1;
            }
            '/' => {
                chars.next();
                col += 1;
                match chars.peek() {
                    Some('/') => {
                        while let Some(&d) = chars.peek() {
                            if d == '\n' {
                                break;
                            }
                            chars.next();
                            col += 1;
                        }
                    }
                    Some('\\') => {
                        chars.next();
                        col += 1;
                        push!(Tok::AndAnd, start_col);
                    }
                    _ => {
                        return Err(DslError::syntax(line, start_col, "unexpected '/'"));
                    }
                }
            }
            '\\' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'/') {
                    chars.next();
                    col += 1;
                    push!(Tok::OrOr, start_col);
                } else {
                    return Err(DslError::syntax(line, start_col, "unexpected '\\'"));
                }
            }
            '"' => {
                chars.next();
                col += 1;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => {
                            col += 1;
                            break;
                        }
                        Some('\n') | None => {
                            return Err(DslError::syntax(line, start_col, "unterminated string"));
                        }
                        Some(d) => {
                            col += 1;
                            s.push(d);
                        }
                    }
                }
                push!(Tok::Str(s), start_col);
            }
            '0'..='9' => {
                let mut n: u64 = 0;
                while let Some(&d) = chars.peek() {
                    if let Some(v) = d.to_digit(10) {
                        n = n * 10 + v as u64;
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Nat(n), start_col);
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        s.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                if s == "_" {
                    push!(Tok::Underscore, start_col);
                } else {
                    push!(Tok::Ident(s), start_col);
                }
            }
            ':' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Assign, start_col);
                } else {
                    push!(Tok::Colon, start_col);
                }
            }
            '-' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    push!(Tok::Arrow, start_col);
                } else {
                    return Err(DslError::syntax(line, start_col, "unexpected '-'"));
                }
            }
            '=' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                }
                push!(Tok::Eq, start_col);
            }
            '!' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Neq, start_col);
                } else {
                    push!(Tok::Bang, start_col);
                }
            }
            '&' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'&') {
                    chars.next();
                    col += 1;
                    push!(Tok::AndAnd, start_col);
                } else {
                    return Err(DslError::syntax(line, start_col, "unexpected '&'"));
                }
            }
            '|' => {
                chars.next();
                col += 1;
                match chars.peek() {
                    Some('|') => {
                        chars.next();
                        col += 1;
                        push!(Tok::OrOr, start_col);
                    }
                    _ => {
                        // a bare '|' is used by relation files as a column
                        // separator; the pnet grammar never produces one
                        return Err(DslError::syntax(line, start_col, "unexpected '|'"));
                    }
                }
            }
            ',' => {
                chars.next();
                col += 1;
                push!(Tok::Comma, start_col);
            }
            '.' => {
                chars.next();
                col += 1;
                push!(Tok::Dot, start_col);
            }
            '(' => {
                chars.next();
                col += 1;
                push!(Tok::LParen, start_col);
            }
            ')' => {
                chars.next();
                col += 1;
                push!(Tok::RParen, start_col);
            }
            '{' => {
                chars.next();
                col += 1;
                push!(Tok::LBrace, start_col);
            }
            '}' => {
                chars.next();
                col += 1;
                push!(Tok::RBrace, start_col);
            }
            '[' => {
                chars.next();
                col += 1;
                push!(Tok::LBracket, start_col);
            }
            ']' => {
                chars.next();
                col += 1;
                push!(Tok::RBracket, start_col);
            }
            '<' => {
                chars.next();
                col += 1;
                push!(Tok::Lt, start_col);
            }
            '>' => {
                chars.next();
                col += 1;
                push!(Tok::Gt, start_col);
            }
            '+' => {
                chars.next();
                col += 1;
                push!(Tok::Plus, start_col);
            }
            '?' => {
                chars.next();
                col += 1;
                push!(Tok::Question, start_col);
            }
            '$' => {
                chars.next();
                col += 1;
                push!(Tok::Dollar, start_col);
            }
            other => {
                return Err(DslError::syntax(
                    line,
                    start_col,
                    format!("unexpected character {other:?}"),
                ));
            }
        }
    }
    Ok(out)
}
