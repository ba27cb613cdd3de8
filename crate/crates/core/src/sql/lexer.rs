use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    /// Bare or quoted identifier; `quoted` identifiers are never keywords.
    Ident {
        text: String,
        quoted: bool,
    },
    Number(String),
    Str(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
pub(super) struct Token {
    pub tok: Tok,
    pub pos: usize,
}

impl Token {
    pub fn keyword(&self, kw: &str) -> bool {
        matches!(&self.tok, Tok::Ident { text, quoted: false } if text.eq_ignore_ascii_case(kw))
    }

    pub fn sym(&self, s: &str) -> bool {
        matches!(self.tok, Tok::Sym(t) if t == s)
    }
}

const SYMBOLS: &[&str] = &[
    "<=", ">=", "<>", "!=", "==", "||", "(", ")", ",", ".", "*", "=", "<", ">", "+", "-", "/", "%",
    ";",
];

pub(super) fn tokenize(src: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = src[i..].chars().next().expect("in bounds");
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let start = i;
        if c.is_alphabetic() || c == '_' {
            let end = src[i..]
                .char_indices()
                .find(|(_, ch)| !(ch.is_alphanumeric() || *ch == '_'))
                .map_or(src.len(), |(o, _)| i + o);
            out.push(Token {
                tok: Tok::Ident {
                    text: src[i..end].to_string(),
                    quoted: false,
                },
                pos: start,
            });
            i = end;
        } else if c.is_ascii_digit() {
            let end = src[i..]
                .char_indices()
                .find(|(_, ch)| !(ch.is_ascii_digit() || *ch == '.'))
                .map_or(src.len(), |(o, _)| i + o);
            out.push(Token {
                tok: Tok::Number(src[i..end].to_string()),
                pos: start,
            });
            i = end;
        } else if c == '\'' || c == '"' || c == '`' || c == '[' {
            let close = if c == '[' { ']' } else { c };
            let mut text = String::new();
            let mut j = i + 1;
            loop {
                let Some(ch) = src[j..].chars().next() else {
                    return Err(SqlError::Syntax {
                        position: start,
                        message: "unterminated quoted text".into(),
                    });
                };
                j += ch.len_utf8();
                if ch == close {
                    // doubled quote escapes itself
                    if src[j..].starts_with(close) && close != ']' {
                        text.push(close);
                        j += close.len_utf8();
                        continue;
                    }
                    break;
                }
                text.push(ch);
            }
            let tok = match c {
                '\'' => Tok::Str(text),
                // double quotes are string literals in many logs; the parser
                // also accepts them where an identifier is expected
                '"' => Tok::Str(text),
                _ => Tok::Ident { text, quoted: true },
            };
            out.push(Token { tok, pos: start });
            i = j;
        } else if let Some(sym) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            out.push(Token {
                tok: Tok::Sym(sym),
                pos: start,
            });
            i += sym.len();
        } else {
            return Err(SqlError::Syntax {
                position: start,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}
