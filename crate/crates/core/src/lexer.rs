//! SQL tokenizer shared by the three dialect grammars.
//!
//! Keywords are not distinguished from identifiers here; the grammar decides
//! contextually whether a word token matches a keyword terminal. Quoting is
//! dialect-sensitive: PostgreSQL and Oracle use `"..."` for identifiers, MySQL
//! uses backticks and treats `"..."` as a string literal (default sql_mode).

use crate::Dialect;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    /// Unquoted word: identifier or (contextually) a keyword.
    Word,
    /// Quoted identifier, lexeme includes the quotes.
    QuotedIdent,
    /// Numeric literal.
    Number,
    /// String literal, lexeme includes the quotes.
    String,
    /// Operator or punctuation.
    Symbol,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    /// Case-insensitive comparison against a keyword or symbol spelling.
    pub fn matches(&self, s: &str) -> bool {
        match self.kind {
            TokenKind::Word | TokenKind::Symbol => self.text.eq_ignore_ascii_case(s),
            _ => false,
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum LexError {
    #[error("unexpected character `{ch}` at byte {offset}")]
    UnexpectedChar { ch: char, offset: usize },
    #[error("unterminated {what} starting at byte {offset}")]
    Unterminated { what: &'static str, offset: usize },
}

const MULTI_CHAR_SYMBOLS: [&str; 5] = ["||", "<=", ">=", "<>", "!="];
const SINGLE_CHAR_SYMBOLS: &str = "(),.;*+-/=<>%";

pub fn tokenize(sql: &str, dialect: Dialect) -> Result<Vec<Token>, LexError> {
    let bytes = sql.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        // line comment
        if c == '-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        // block comment
        if c == '/' && bytes.get(i + 1) == Some(&b'*') {
            let start = i;
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(LexError::Unterminated { what: "block comment", offset: start });
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        if c == '\'' {
            let (tok, next) = lex_quoted(sql, i, '\'', TokenKind::String, "string literal")?;
            tokens.push(tok);
            i = next;
            continue;
        }
        if c == '"' {
            let kind = match dialect {
                Dialect::Mysql => TokenKind::String,
                _ => TokenKind::QuotedIdent,
            };
            let what = if kind == TokenKind::String { "string literal" } else { "quoted identifier" };
            let (tok, next) = lex_quoted(sql, i, '"', kind, what)?;
            tokens.push(tok);
            i = next;
            continue;
        }
        if c == '`' {
            if dialect != Dialect::Mysql {
                return Err(LexError::UnexpectedChar { ch: c, offset: i });
            }
            let (tok, next) = lex_quoted(sql, i, '`', TokenKind::QuotedIdent, "quoted identifier")?;
            tokens.push(tok);
            i = next;
            continue;
        }
        if c.is_ascii_digit() {
            let (tok, next) = lex_number(sql, i);
            tokens.push(tok);
            i = next;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            i += 1;
            while i < bytes.len() {
                let ch = bytes[i] as char;
                if ch.is_ascii_alphanumeric() || ch == '_' || ch == '$' || ch == '#' {
                    i += 1;
                } else {
                    break;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Word,
                text: sql[start..i].to_string(),
                start,
                end: i,
            });
            continue;
        }
        if let Some(sym) = MULTI_CHAR_SYMBOLS
            .iter()
            .find(|s| sql[i..].starts_with(**s))
        {
            tokens.push(Token {
                kind: TokenKind::Symbol,
                text: (*sym).to_string(),
                start: i,
                end: i + sym.len(),
            });
            i += sym.len();
            continue;
        }
        if SINGLE_CHAR_SYMBOLS.contains(c) {
            tokens.push(Token {
                kind: TokenKind::Symbol,
                text: c.to_string(),
                start: i,
                end: i + 1,
            });
            i += 1;
            continue;
        }
        return Err(LexError::UnexpectedChar { ch: c, offset: i });
    }
    Ok(tokens)
}

fn lex_quoted(
    sql: &str,
    start: usize,
    quote: char,
    kind: TokenKind,
    what: &'static str,
) -> Result<(Token, usize), LexError> {
    let bytes = sql.as_bytes();
    let q = quote as u8;
    let mut i = start + 1;
    loop {
        if i >= bytes.len() {
            return Err(LexError::Unterminated { what, offset: start });
        }
        if bytes[i] == q {
            // doubled quote is an escape
            if bytes.get(i + 1) == Some(&q) {
                i += 2;
                continue;
            }
            i += 1;
            break;
        }
        i += 1;
    }
    Ok((
        Token {
            kind,
            text: sql[start..i].to_string(),
            start,
            end: i,
        },
        i,
    ))
}

fn lex_number(sql: &str, start: usize) -> (Token, usize) {
    let bytes = sql.as_bytes();
    let mut i = start;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit()) {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = j;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    (
        Token {
            kind: TokenKind::Number,
            text: sql[start..i].to_string(),
            start,
            end: i,
        },
        i,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(sql: &str, d: Dialect) -> Vec<String> {
        tokenize(sql, d).unwrap().into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn words_numbers_symbols() {
        assert_eq!(
            texts("SELECT a1+2.5e-1 FROM t", Dialect::Postgresql),
            vec!["SELECT", "a1", "+", "2.5e-1", "FROM", "t"]
        );
    }

    #[test]
    fn concat_operator_is_one_token() {
        assert_eq!(texts("a || b", Dialect::Oracle), vec!["a", "||", "b"]);
    }

    #[test]
    fn strings_keep_quotes_and_escapes() {
        assert_eq!(texts("'it''s'", Dialect::Mysql), vec!["'it''s'"]);
    }

    #[test]
    fn quoting_is_dialect_sensitive() {
        let pg = tokenize("\"Col\"", Dialect::Postgresql).unwrap();
        assert_eq!(pg[0].kind, TokenKind::QuotedIdent);
        let my = tokenize("\"Col\"", Dialect::Mysql).unwrap();
        assert_eq!(my[0].kind, TokenKind::String);
        let my2 = tokenize("`Col`", Dialect::Mysql).unwrap();
        assert_eq!(my2[0].kind, TokenKind::QuotedIdent);
        assert!(tokenize("`x`", Dialect::Oracle).is_err());
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            texts("SELECT 1 -- trailing\n/* block */ FROM t", Dialect::Postgresql),
            vec!["SELECT", "1", "FROM", "t"]
        );
    }

    #[test]
    fn unterminated_string_reports_offset() {
        let err = tokenize("SELECT 'abc", Dialect::Postgresql).unwrap_err();
        assert_eq!(err, LexError::Unterminated { what: "string literal", offset: 7 });
    }
}
