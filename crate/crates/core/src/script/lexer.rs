use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    Param(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Eq,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(x) => format!("number {x}"),
            Tok::Param(p) => format!("`${{{p}}}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn err(line: usize, col: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        col,
        message: message.into(),
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits `text` into non-empty lines of tokens. `#` starts a comment.
pub fn tokenize(text: &str) -> Result<Vec<Vec<Token>>> {
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let chars: Vec<char> = raw.chars().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let single = match c {
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                '[' => Some(Tok::LBracket),
                ']' => Some(Tok::RBracket),
                ',' => Some(Tok::Comma),
                '=' => Some(Tok::Eq),
                '+' => Some(Tok::Plus),
                '-' => Some(Tok::Minus),
                '*' => Some(Tok::Star),
                '/' => Some(Tok::Slash),
                _ => None,
            };
            if let Some(tok) = single {
                toks.push(Token { tok, line, col });
                i += 1;
            } else if c == '>' {
                if chars.get(i + 1) != Some(&'=') {
                    return Err(err(line, col, "expected `>=`"));
                }
                toks.push(Token {
                    tok: Tok::Ge,
                    line,
                    col,
                });
                i += 2;
            } else if c == '$' {
                if chars.get(i + 1) != Some(&'{') {
                    return Err(err(line, col, "expected `${name}`"));
                }
                let start = i + 2;
                let mut j = start;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                if j == start || !is_ident_start(chars[start]) || chars.get(j) != Some(&'}') {
                    return Err(err(
                        line,
                        col,
                        "malformed parameter reference, expected `${name}`",
                    ));
                }
                toks.push(Token {
                    tok: Tok::Param(chars[start..j].iter().collect()),
                    line,
                    col,
                });
                i = j + 1;
            } else if c.is_ascii_digit() || c == '.' {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text: String = chars[i..j].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| err(line, col, format!("malformed number `{text}`")))?;
                if j < chars.len() && is_ident_char(chars[j]) {
                    return Err(err(
                        line,
                        j + 1,
                        format!("unexpected character `{}` after number", chars[j]),
                    ));
                }
                toks.push(Token {
                    tok: Tok::Num(value),
                    line,
                    col,
                });
                i = j;
            } else if is_ident_start(c) {
                let mut j = i;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                toks.push(Token {
                    tok: Tok::Ident(chars[i..j].iter().collect()),
                    line,
                    col,
                });
                i = j;
            } else {
                return Err(err(line, col, format!("unexpected character `{c}`")));
            }
        }
        if !toks.is_empty() {
            lines.push(toks);
        }
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Tok> {
        tokenize(text)
            .unwrap()
            .concat()
            .into_iter()
            .map(|t| t.tok)
            .collect()
    }

    #[test]
    fn numbers_and_exponents() {
        assert_eq!(
            kinds("1e-9 2.5 .5 3E+2"),
            vec![
                Tok::Num(1e-9),
                Tok::Num(2.5),
                Tok::Num(0.5),
                Tok::Num(300.0)
            ]
        );
    }

    #[test]
    fn level_e_is_an_identifier() {
        assert_eq!(
            kinds("postselect P e"),
            vec![
                Tok::Ident("postselect".into()),
                Tok::Ident("P".into()),
                Tok::Ident("e".into())
            ]
        );
    }

    #[test]
    fn comments_and_blank_lines() {
        let lines = tokenize("# header\n\n  inject 2 # trailing\n").unwrap();
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0][0].line, 3);
        assert_eq!(lines[0][0].col, 3);
    }

    #[test]
    fn params_and_operators() {
        assert_eq!(
            kinds("${alpha}>=-x"),
            vec![
                Tok::Param("alpha".into()),
                Tok::Ge,
                Tok::Minus,
                Tok::Ident("x".into())
            ]
        );
    }

    #[test]
    fn lexical_errors_have_positions() {
        assert_eq!(
            tokenize("inject 2\ninject @").unwrap_err(),
            Error::Parse {
                line: 2,
                col: 8,
                message: "unexpected character `@`".into()
            }
        );
        assert!(matches!(
            tokenize("x > 1"),
            Err(Error::Parse { col: 3, .. })
        ));
        assert!(matches!(tokenize("${1a}"), Err(Error::Parse { .. })));
        assert!(matches!(tokenize("1.2.3"), Err(Error::Parse { .. })));
        assert!(matches!(tokenize("2x"), Err(Error::Parse { col: 2, .. })));
    }
}
