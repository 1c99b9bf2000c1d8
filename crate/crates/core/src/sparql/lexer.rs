//! Token-level SPARQL lexer.
//!
//! Produces byte-spanned tokens so callers can splice the original text
//! (prefix expansion rewrites only the spans of prefixed names and prologue
//! declarations and leaves everything else, comments included, untouched).

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TokenKind {
    /// `<...>`, content without the angle brackets.
    IriRef(String),
    /// `prefix:local`, local part still escaped.
    PrefixedName { prefix: String, local: String },
    Var(String),
    BlankNode(String),
    /// String literal, raw lexeme including quotes.
    Str,
    Number,
    LangTag(String),
    DoubleCaret,
    /// Bare word: keywords, function names, `a`, `true`, `false`.
    Word(String),
    Punct(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is_word(&self, kw: &str) -> bool {
        matches!(&self.kind, TokenKind::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    pub fn is_punct(&self, p: &str) -> bool {
        matches!(&self.kind, TokenKind::Punct(q) if *q == p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum LexError {
    UnterminatedString { offset: usize },
    InvalidCharacter { ch: char, offset: usize },
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LexError::UnterminatedString { offset } => {
                write!(f, "unterminated string literal at byte {offset}")
            }
            LexError::InvalidCharacter { ch, offset } => {
                write!(f, "invalid character {ch:?} at byte {offset}")
            }
        }
    }
}

/// Characters that may not appear inside an IRIREF.
fn iri_forbidden(c: char) -> bool {
    matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') || (c as u32) <= 0x20
}

/// Length in bytes of an IRIREF starting at `text[start]` (which must be `<`),
/// or `None` when the `<` is a comparison operator.
pub(crate) fn iri_ref_len(text: &str, start: usize) -> Option<usize> {
    let rest = &text[start + 1..];
    for (i, c) in rest.char_indices() {
        if c == '>' {
            return Some(i + 2);
        }
        if iri_forbidden(c) {
            return None;
        }
    }
    None
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_pn_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-' || c == '.'
}

fn is_local_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':' | '%')
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.text[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.text[self.pos..].starts_with(s)
    }

    fn eat_while(&mut self, f: impl Fn(char) -> bool) {
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
    }
}

/// Splits SPARQL text into tokens. Comments and whitespace are dropped.
pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor { text, pos: 0 };
    let mut out = Vec::new();
    while let Some(c) = cur.peek() {
        let start = cur.pos;
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '#' {
            cur.eat_while(|c| c != '\n' && c != '\r');
            continue;
        }
        let kind = match c {
            '<' => {
                if let Some(len) = iri_ref_len(text, start) {
                    cur.pos += len;
                    TokenKind::IriRef(text[start + 1..start + len - 1].to_string())
                } else if cur.starts_with("<=") {
                    cur.pos += 2;
                    TokenKind::Punct("<=")
                } else {
                    cur.bump();
                    TokenKind::Punct("<")
                }
            }
            '"' | '\'' => {
                lex_string(&mut cur, c)?;
                TokenKind::Str
            }
            '?' | '$' => {
                cur.bump();
                match cur.peek() {
                    Some(n) if is_name_char(n) => {
                        let s = cur.pos;
                        cur.eat_while(is_name_char);
                        TokenKind::Var(text[s..cur.pos].to_string())
                    }
                    _ if c == '?' => TokenKind::Punct("?"),
                    _ => return Err(LexError::InvalidCharacter { ch: c, offset: start }),
                }
            }
            '_' if cur.peek_at(1) == Some(':') => {
                cur.pos += 2;
                let s = cur.pos;
                cur.eat_while(is_pn_char);
                trim_trailing_dots(&mut cur, s);
                TokenKind::BlankNode(text[s..cur.pos].to_string())
            }
            '@' => {
                cur.bump();
                let s = cur.pos;
                cur.eat_while(|c| c.is_ascii_alphanumeric() || c == '-');
                if cur.pos == s {
                    return Err(LexError::InvalidCharacter { ch: '@', offset: start });
                }
                TokenKind::LangTag(text[s..cur.pos].to_string())
            }
            '^' => {
                if cur.starts_with("^^") {
                    cur.pos += 2;
                    TokenKind::DoubleCaret
                } else {
                    cur.bump();
                    TokenKind::Punct("^")
                }
            }
            '0'..='9' => {
                lex_number(&mut cur);
                TokenKind::Number
            }
            '.' if cur.peek_at(1).is_some_and(|d| d.is_ascii_digit()) => {
                lex_number(&mut cur);
                TokenKind::Number
            }
            ':' => {
                cur.bump();
                let local = lex_local(&mut cur);
                TokenKind::PrefixedName { prefix: String::new(), local }
            }
            c if is_name_start(c) => lex_word_or_pname(&mut cur),
            _ => {
                let p = lex_punct(&mut cur)
                    .ok_or(LexError::InvalidCharacter { ch: c, offset: start })?;
                TokenKind::Punct(p)
            }
        };
        out.push(Token { kind, start, end: cur.pos });
    }
    Ok(out)
}

fn trim_trailing_dots(cur: &mut Cursor<'_>, floor: usize) {
    while cur.pos > floor && cur.text[..cur.pos].ends_with('.') {
        cur.pos -= 1;
    }
}

fn lex_string(cur: &mut Cursor<'_>, quote: char) -> Result<(), LexError> {
    let start = cur.pos;
    let triple: String = std::iter::repeat_n(quote, 3).collect();
    if cur.starts_with(&triple) {
        cur.pos += 3;
        loop {
            if cur.starts_with(&triple) {
                cur.pos += 3;
                return Ok(());
            }
            match cur.bump() {
                Some('\\') => {
                    cur.bump();
                }
                Some(_) => {}
                None => return Err(LexError::UnterminatedString { offset: start }),
            }
        }
    }
    cur.bump();
    loop {
        match cur.bump() {
            Some('\\') => {
                cur.bump();
            }
            Some(c) if c == quote => return Ok(()),
            Some('\n') | Some('\r') | None => {
                return Err(LexError::UnterminatedString { offset: start })
            }
            Some(_) => {}
        }
    }
}

fn lex_number(cur: &mut Cursor<'_>) {
    cur.eat_while(|c| c.is_ascii_digit());
    if cur.peek() == Some('.') && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit()) {
        cur.bump();
        cur.eat_while(|c| c.is_ascii_digit());
    }
    if matches!(cur.peek(), Some('e') | Some('E')) {
        let save = cur.pos;
        cur.bump();
        if matches!(cur.peek(), Some('+') | Some('-')) {
            cur.bump();
        }
        if cur.peek().is_some_and(|d| d.is_ascii_digit()) {
            cur.eat_while(|c| c.is_ascii_digit());
        } else {
            cur.pos = save;
        }
    }
}

fn lex_local(cur: &mut Cursor<'_>) -> String {
    let s = cur.pos;
    loop {
        match cur.peek() {
            Some('\\') => {
                cur.bump();
                cur.bump();
            }
            Some(c) if is_local_char(c) => {
                cur.bump();
            }
            _ => break,
        }
    }
    trim_trailing_dots(cur, s);
    cur.text[s..cur.pos].to_string()
}

fn lex_word_or_pname(cur: &mut Cursor<'_>) -> TokenKind {
    let s = cur.pos;
    cur.eat_while(is_pn_char);
    trim_trailing_dots(cur, s);
    if cur.peek() == Some(':') {
        let prefix = cur.text[s..cur.pos].to_string();
        cur.bump();
        let local = lex_local(cur);
        return TokenKind::PrefixedName { prefix, local };
    }
    // Not a prefixed name: a bare word stops at the first non-name char.
    cur.pos = s;
    cur.eat_while(is_name_char);
    TokenKind::Word(cur.text[s..cur.pos].to_string())
}

fn lex_punct(cur: &mut Cursor<'_>) -> Option<&'static str> {
    const TWO: [&str; 5] = ["&&", "||", "!=", ">=", "<="];
    for p in TWO {
        if cur.starts_with(p) {
            cur.pos += 2;
            return Some(p);
        }
    }
    let p = match cur.peek()? {
        '{' => "{",
        '}' => "}",
        '(' => "(",
        ')' => ")",
        '[' => "[",
        ']' => "]",
        '.' => ".",
        ';' => ";",
        ',' => ",",
        '*' => "*",
        '/' => "/",
        '|' => "|",
        '+' => "+",
        '-' => "-",
        '!' => "!",
        '=' => "=",
        '>' => ">",
        _ => return None,
    };
    cur.bump();
    Some(p)
}

/// Resolves `\`-escapes in a prefixed-name local part.
pub(crate) fn unescape_local(local: &str) -> String {
    let mut out = String::with_capacity(local.len());
    let mut chars = local.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(n) = chars.next() {
                out.push(n);
            }
        } else {
            out.push(c);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(s: &str) -> Vec<TokenKind> {
        tokenize(s).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn lexes_prefixed_names_and_trailing_dot() {
        let k = kinds("?x dbo:director dbr:Stanley_Kubrick.");
        assert_eq!(k[0], TokenKind::Var("x".into()));
        assert_eq!(
            k[1],
            TokenKind::PrefixedName { prefix: "dbo".into(), local: "director".into() }
        );
        assert_eq!(
            k[2],
            TokenKind::PrefixedName { prefix: "dbr".into(), local: "Stanley_Kubrick".into() }
        );
        assert_eq!(k[3], TokenKind::Punct("."));
    }

    #[test]
    fn less_than_is_not_an_iri() {
        let k = kinds("FILTER(?h < 10 && ?h <= 3)");
        assert!(k.contains(&TokenKind::Punct("<")));
        assert!(k.contains(&TokenKind::Punct("<=")));
        let k = kinds("<http://x/y#z>");
        assert_eq!(k, vec![TokenKind::IriRef("http://x/y#z".into())]);
    }

    #[test]
    fn comments_are_skipped_but_hash_in_iri_kept() {
        let k = kinds("<http://www.w3.org/2000/01/rdf-schema#label> # trailing\n?x");
        assert_eq!(k.len(), 2);
    }

    #[test]
    fn property_path_modifiers() {
        let k = kinds("wdt:P31/wdt:P279* ?c");
        assert_eq!(k[1], TokenKind::Punct("/"));
        assert_eq!(k[3], TokenKind::Punct("*"));
        let k = kinds("wdt:P279? ?c");
        assert_eq!(k[1], TokenKind::Punct("?"));
        assert_eq!(k[2], TokenKind::Var("c".into()));
    }

    #[test]
    fn strings_and_errors() {
        let k = kinds(r#""a \" b"@en "x"^^xsd:date '''multi
line'''"#);
        assert_eq!(k[0], TokenKind::Str);
        assert_eq!(k[1], TokenKind::LangTag("en".into()));
        assert_eq!(k[3], TokenKind::DoubleCaret);
        assert_eq!(k[5], TokenKind::Str);
        assert!(matches!(tokenize("\"open"), Err(LexError::UnterminatedString { .. })));
        assert!(matches!(tokenize("`x`"), Err(LexError::InvalidCharacter { ch: '`', .. })));
    }

    #[test]
    fn escaped_local_names() {
        let k = kinds(r"dbr:AC\/DC");
        let TokenKind::PrefixedName { local, .. } = &k[0] else { panic!() };
        assert_eq!(unescape_local(local), "AC/DC");
    }
}
