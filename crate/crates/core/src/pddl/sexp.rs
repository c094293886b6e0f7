//! Tokenizer and s-expression reader for PDDL source.

use super::error::{ParseError, ParseErrorKind, Pos};

const MAX_DEPTH: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Sexp {
    Symbol { text: String, pos: Pos },
    List { items: Vec<Sexp>, pos: Pos, end: Pos },
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Symbol { pos, .. } | Sexp::List { pos, .. } => *pos,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Sexp::Symbol { text, .. } => Some(text),
            Sexp::List { .. } => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List { items, .. } => Some(items),
            Sexp::Symbol { .. } => None,
        }
    }

    /// Short description used in "found ..." error messages.
    pub fn describe(&self) -> String {
        match self {
            Sexp::Symbol { text, .. } => format!("`{text}`"),
            Sexp::List { items, .. } => match items.first().and_then(Sexp::as_symbol) {
                Some(head) => format!("list `({head} ...)`"),
                None => "list".to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Open(Pos),
    Close(Pos),
    Symbol(String, Pos),
}

fn tokenize(src: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut line = 1;
    let mut column = 1;
    let mut chars = src.char_indices().peekable();
    let mut current: Option<(String, Pos)> = None;

    macro_rules! flush {
        () => {
            if let Some((text, pos)) = current.take() {
                tokens.push(Token::Symbol(text.to_lowercase(), pos));
            }
        };
    }

    while let Some((offset, ch)) = chars.next() {
        let pos = Pos { offset, line, column };
        match ch {
            ';' => {
                flush!();
                // comment runs to end of line; the newline itself is handled below
                while let Some(&(_, c)) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    column += 1;
                }
            }
            '(' => {
                flush!();
                tokens.push(Token::Open(pos));
            }
            ')' => {
                flush!();
                tokens.push(Token::Close(pos));
            }
            c if c.is_whitespace() => flush!(),
            c => match current.as_mut() {
                Some((text, _)) => text.push(c),
                None => current = Some((c.to_string(), pos)),
            },
        }
        if ch == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    flush!();
    tokens
}

fn end_pos(src: &str) -> Pos {
    let mut line = 1;
    let mut column = 1;
    for ch in src.chars() {
        if ch == '\n' {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    Pos { offset: src.len(), line, column }
}

/// Reads exactly one top-level s-expression list.
pub(crate) fn read_one(src: &str) -> Result<Sexp, ParseError> {
    let tokens = tokenize(src);
    let eof = end_pos(src);
    let mut idx = 0;

    let first = match tokens.first() {
        None => {
            return Err(ParseError::expected(
                Pos { offset: 0, line: 1, column: 1 },
                "`(`",
                "end of input",
            ))
        }
        Some(tok) => tok.clone(),
    };
    if let Token::Symbol(text, pos) = &first {
        return Err(ParseError::expected(*pos, "`(`", format!("`{text}`")));
    }
    if let Token::Close(pos) = &first {
        return Err(ParseError::expected(*pos, "`(`", "`)`"));
    }

    let expr = read_expr(&tokens, &mut idx, eof)?;
    if let Some(tok) = tokens.get(idx) {
        let (pos, found) = match tok {
            Token::Open(p) => (*p, "`(`".to_string()),
            Token::Close(p) => (*p, "`)`".to_string()),
            Token::Symbol(s, p) => (*p, format!("`{s}`")),
        };
        return Err(ParseError::expected(pos, "end of input", found));
    }
    Ok(expr)
}

fn read_expr(tokens: &[Token], idx: &mut usize, eof: Pos) -> Result<Sexp, ParseError> {
    // iterative to keep deeply nested garbage from blowing the stack
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    loop {
        let Some(tok) = tokens.get(*idx) else {
            return Err(ParseError::new(eof, ParseErrorKind::UnbalancedParens));
        };
        *idx += 1;
        let finished = match tok {
            Token::Open(pos) => {
                if stack.len() >= MAX_DEPTH {
                    return Err(ParseError::new(*pos, ParseErrorKind::TooDeep(MAX_DEPTH)));
                }
                stack.push((Vec::new(), *pos));
                continue;
            }
            Token::Close(end) => match stack.pop() {
                Some((items, pos)) => Sexp::List { items, pos, end: *end },
                None => {
                    return Err(ParseError::expected(*end, "`(` or symbol", "`)`"));
                }
            },
            Token::Symbol(text, pos) => Sexp::Symbol { text: text.clone(), pos: *pos },
        };
        match stack.last_mut() {
            Some((items, _)) => items.push(finished),
            None => return Ok(finished),
        }
    }
}
