//! Minimal s-expression reader for the SMT-LIB2 surface syntax.
//!
//! Only parentheses, bare atoms and `;` line comments are recognised. String
//! literals and `|quoted symbols|` are not part of the supported fragment.

use std::fmt;

/// Position of a token in the source text (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Atom(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Atom(_, pos) | SExpr::List(_, pos) => *pos,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(text, _) => Some(text),
            SExpr::List(..) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadError {
    pub pos: Pos,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open(Pos),
    Close(Pos),
    Atom(String, Pos),
}

fn tokenize(text: &str) -> Result<Vec<Token>, ReadError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);

    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                column += 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                chars.next();
                column += 1;
                tokens.push(Token::Open(pos));
            }
            ')' => {
                chars.next();
                column += 1;
                tokens.push(Token::Close(pos));
            }
            '"' | '|' => {
                return Err(ReadError {
                    pos,
                    message: format!("unsupported literal starting with `{c}`"),
                });
            }
            _ => {
                let mut atom = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | ';' | '"' | '|') {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                    column += 1;
                }
                tokens.push(Token::Atom(atom, pos));
            }
        }
    }
    Ok(tokens)
}

/// Reads every top-level s-expression in `text`.
pub fn read_all(text: &str) -> Result<Vec<SExpr>, ReadError> {
    let tokens = tokenize(text)?;
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut top = Vec::new();

    for token in tokens {
        match token {
            Token::Open(pos) => stack.push((Vec::new(), pos)),
            Token::Close(pos) => {
                let (items, open) = stack.pop().ok_or(ReadError {
                    pos,
                    message: "unbalanced `)`".into(),
                })?;
                let list = SExpr::List(items, open);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => top.push(list),
                }
            }
            Token::Atom(text, pos) => match stack.last_mut() {
                Some((parent, _)) => parent.push(SExpr::Atom(text, pos)),
                None => top.push(SExpr::Atom(text, pos)),
            },
        }
    }
    if let Some((_, pos)) = stack.pop() {
        return Err(ReadError {
            pos,
            message: "unclosed `(`".into(),
        });
    }
    Ok(top)
}
