//! Text scanning behind extraction and sanitizing.

use crate::sparql::iri_ref_len;

const FORMS: [&str; 4] = ["SELECT", "ASK", "CONSTRUCT", "DESCRIBE"];
const MODIFIERS: [&str; 6] = ["ORDER", "GROUP", "HAVING", "LIMIT", "OFFSET", "VALUES"];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Case-insensitive ASCII search from `from`.
fn find_ci(hay: &str, needle: &str, from: usize) -> Option<usize> {
    let h = hay.as_bytes();
    let n = needle.as_bytes();
    if n.is_empty() || h.len() < n.len() {
        return None;
    }
    (from..=h.len() - n.len()).find(|&i| h[i..i + n.len()].eq_ignore_ascii_case(n))
}

fn word_at(text: &str, i: usize, word: &str) -> bool {
    let end = i + word.len();
    text.get(i..end).is_some_and(|w| w.eq_ignore_ascii_case(word))
        && !text[..i].chars().next_back().is_some_and(is_word_char)
        && !text[end..].chars().next().is_some_and(is_word_char)
}

/// Does `text` contain a query-form keyword as a whole word?
fn has_form_keyword(text: &str) -> bool {
    text.char_indices()
        .any(|(i, _)| FORMS.iter().any(|f| word_at(text, i, f)))
}

/// Removes code-fence marker lines that sometimes sit inside tag blocks.
fn strip_fences(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Last complete `<sparql>` pair whose body looks like a query, or failing
/// that an unclosed trailing `<sparql>`. Returns the body and whether it
/// was closed.
pub(super) fn tagged(raw: &str) -> Option<(String, bool)> {
    const OPEN: &str = "<sparql>";
    const CLOSE: &str = "</sparql>";
    let mut complete = Vec::new();
    let mut unclosed = None;
    let mut at = 0;
    while let Some(o) = find_ci(raw, OPEN, at) {
        let body_start = o + OPEN.len();
        match find_ci(raw, CLOSE, body_start) {
            Some(c) => {
                complete.push(&raw[body_start..c]);
                at = c + CLOSE.len();
            }
            None => {
                unclosed = Some(&raw[body_start..]);
                break;
            }
        }
    }
    let clean = |s: &str| strip_fences(s).trim().to_string();
    if let Some(body) = complete.iter().rev().find(|b| has_form_keyword(b)) {
        return Some((clean(body), true));
    }
    unclosed.filter(|b| has_form_keyword(b)).map(|b| (clean(b), false))
}

/// Body of the last fenced block containing a form keyword. A fence left
/// open at the end of the output counts as a block.
pub(super) fn fenced(raw: &str) -> Option<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in raw.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(body) => blocks.push(body.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(body) = current.as_mut() {
            body.push(line);
        }
    }
    if let Some(body) = current {
        blocks.push(body.join("\n"));
    }
    blocks
        .into_iter()
        .rev()
        .find(|b| has_form_keyword(b))
        .map(|b| b.trim().to_string())
}

fn skip_ws(b: &[u8], mut i: usize) -> usize {
    while i < b.len() && b[i].is_ascii_whitespace() {
        i += 1;
    }
    i
}

/// A keyword occurrence followed by something that looks like query text,
/// so prose such as "select one option" is not taken as an anchor.
fn is_anchor(text: &str, i: usize) -> bool {
    let b = text.as_bytes();
    let after = |kw: &str| skip_ws(b, i + kw.len());
    let next_is = |j: usize, set: &[u8]| j < b.len() && set.contains(&b[j]);
    let next_word = |j: usize, words: &[&str]| words.iter().any(|w| word_at(text, j, w));
    if word_at(text, i, "SELECT") {
        let j = after("SELECT");
        return next_is(j, b"?$*(") || next_word(j, &["DISTINCT", "REDUCED"]);
    }
    if word_at(text, i, "ASK") {
        let j = after("ASK");
        return next_is(j, b"{") || next_word(j, &["WHERE", "FROM"]);
    }
    if word_at(text, i, "CONSTRUCT") {
        let j = after("CONSTRUCT");
        return next_is(j, b"{") || next_word(j, &["WHERE"]);
    }
    if word_at(text, i, "DESCRIBE") {
        let j = after("DESCRIBE");
        return next_is(j, b"<?$*");
    }
    if word_at(text, i, "PREFIX") {
        let mut j = after("PREFIX");
        while j < b.len() && (b[j].is_ascii_alphanumeric() || b"_-.".contains(&b[j])) {
            j += 1;
        }
        if !next_is(j, b":") {
            return false;
        }
        return next_is(skip_ws(b, j + 1), b"<");
    }
    false
}

/// Length of a string literal starting at `i` (which holds a quote), or
/// the rest of the text if it never closes.
fn string_len(text: &str, i: usize) -> usize {
    let b = text.as_bytes();
    let q = b[i];
    let triple = b.len() >= i + 3 && b[i + 1] == q && b[i + 2] == q;
    let (open, close): (usize, &[u8]) = if triple { (3, &[q, q, q]) } else { (1, &[q]) };
    let mut j = i + open;
    while j < b.len() {
        if b[j] == b'\\' {
            j += 2;
            continue;
        }
        if !triple && b[j] == b'\n' {
            return j - i;
        }
        if b[j..].starts_with(close) {
            return j + close.len() - i;
        }
        j += 1;
    }
    b.len() - i
}

/// End of the query starting at `start`: the close of the first top-level
/// group, extended over trailing solution modifiers. `None` when the group
/// never closes.
fn query_end(text: &str, start: usize) -> Option<usize> {
    let b = text.as_bytes();
    let mut depth = 0i32;
    let mut opened = false;
    let mut i = start;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' => {
                i += string_len(text, i);
                continue;
            }
            b'<' => {
                if let Some(n) = iri_ref_len(text, i) {
                    i += n;
                    continue;
                }
            }
            b'#' => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'{' => {
                depth += 1;
                opened = true;
            }
            b'}' => {
                depth -= 1;
                if opened && depth == 0 {
                    let end = i + 1;
                    return Some(end + modifier_tail(text, end));
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

/// How many bytes after `from` belong to solution modifiers such as
/// `ORDER BY DESC(?h) LIMIT 1`. Stops at the first token that cannot be
/// part of one.
fn modifier_tail(text: &str, from: usize) -> usize {
    let b = text.as_bytes();
    let mut i = from;
    let mut end = from;
    let mut in_modifier = false;
    loop {
        i = skip_ws(b, i);
        if i >= b.len() {
            break;
        }
        let c = b[i];
        if c.is_ascii_alphabetic() {
            let mut j = i;
            while j < b.len() && (b[j].is_ascii_alphanumeric() || b[j] == b'_') {
                j += 1;
            }
            let w = &text[i..j];
            if MODIFIERS.iter().any(|m| m.eq_ignore_ascii_case(w)) {
                in_modifier = true;
            } else if !in_modifier {
                break;
            } else if !["BY", "ASC", "DESC", "COUNT", "SUM", "MIN", "MAX", "AVG", "SAMPLE", "STR", "LCASE", "UCASE", "STRLEN", "YEAR", "xsd"]
                .iter()
                .any(|k| k.eq_ignore_ascii_case(w))
            {
                break;
            }
            i = j;
            end = j;
        } else if in_modifier && (c == b'?' || c == b'$') {
            i += 1;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            end = i;
        } else if in_modifier && c.is_ascii_digit() {
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            end = i;
        } else if in_modifier && c == b'(' {
            let mut depth = 0;
            let mut j = i;
            while j < b.len() {
                match b[j] {
                    b'(' => depth += 1,
                    b')' => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    b'\n' => break,
                    _ => {}
                }
                j += 1;
            }
            if j >= b.len() || b[j] != b')' {
                break;
            }
            i = j + 1;
            end = i;
        } else if in_modifier && c == b'{' {
            // trailing VALUES block
            match text[i..].find('}') {
                Some(k) => {
                    i += k + 1;
                    end = i;
                }
                None => break,
            }
        } else {
            break;
        }
    }
    end - from
}

/// The keyword-scan fallback: from the first anchor to the end of its
/// query, or to the end of the text if the query never closes.
pub(super) fn keyword_segment(raw: &str) -> Option<String> {
    let start = raw
        .char_indices()
        .map(|(i, _)| i)
        .find(|&i| is_anchor(raw, i))?;
    let end = query_end(raw, start).unwrap_or(raw.len());
    let seg = raw[start..end].trim();
    (!seg.is_empty()).then(|| seg.to_string())
}

/// Drops markup left around a query: `<think>`-style tags, `<sparql>`
/// tags, fence lines, chat special tokens and `#` comments. Whitespace
/// outside string literals and IRIs collapses to single spaces. Literal
/// contents are never touched.
pub fn sanitize(query_text: &str) -> String {
    let mut cur = query_text.to_string();
    // Each pass can expose a new fragment (a tag split by another one), so
    // run to a fixpoint.
    for _ in 0..32 {
        let next = pass(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

const MARKUP_TAGS: [&str; 6] = ["think", "sparql", "answer", "query", "code", "s"];

/// Length of a markup fragment at `i`, if any.
fn markup_len(text: &str, i: usize) -> Option<usize> {
    let rest = &text[i..];
    if rest.starts_with("<|") {
        return rest.find("|>").map(|k| k + 2);
    }
    let inner = rest.strip_prefix('<')?;
    let inner = inner.strip_prefix('/').unwrap_or(inner);
    for tag in MARKUP_TAGS {
        if inner.get(..tag.len()).is_some_and(|h| h.eq_ignore_ascii_case(tag)) {
            let after = &inner[tag.len()..];
            let close = if after.starts_with("/>") {
                2
            } else if after.starts_with('>') {
                1
            } else {
                continue;
            };
            return Some(rest.len() - after.len() + close);
        }
    }
    None
}

fn pass(text: &str) -> String {
    let b = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    let mut at_line_start = true;
    let mut i = 0;
    let push = |out: &mut String, s: &str, pending: &mut bool| {
        if *pending && !out.is_empty() {
            out.push(' ');
        }
        *pending = false;
        out.push_str(s);
    };
    while i < b.len() {
        let c = b[i];
        if at_line_start && text[i..].trim_start_matches([' ', '\t']).starts_with("```") {
            let eol = text[i..].find('\n').map_or(b.len(), |k| i + k);
            i = eol;
            pending_space = true;
            continue;
        }
        at_line_start = false;
        match c {
            b'"' | b'\'' => {
                let n = string_len(text, i);
                push(&mut out, &text[i..i + n], &mut pending_space);
                i += n;
            }
            b'<' => {
                if let Some(n) = markup_len(text, i) {
                    i += n;
                    pending_space = true;
                } else if let Some(n) = iri_ref_len(text, i) {
                    push(&mut out, &text[i..i + n], &mut pending_space);
                    i += n;
                } else {
                    push(&mut out, "<", &mut pending_space);
                    i += 1;
                }
            }
            b'#' => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
                pending_space = true;
            }
            _ if c.is_ascii_whitespace() => {
                if c == b'\n' {
                    at_line_start = true;
                }
                pending_space = true;
                i += 1;
            }
            _ => {
                let ch = text[i..].chars().next().expect("char boundary");
                let mut buf = [0u8; 4];
                push(&mut out, ch.encode_utf8(&mut buf), &mut pending_space);
                i += ch.len_utf8();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitize_examples() {
        assert_eq!(sanitize("</think>\nSELECT ?x WHERE { ?x ?p ?o }"), "SELECT ?x WHERE { ?x ?p ?o }");
        assert_eq!(
            sanitize("SELECT   ?x\n\nWHERE { ?x <p> \"a  b\" }"),
            "SELECT ?x WHERE { ?x <p> \"a  b\" }"
        );
        let clean = "SELECT ?x WHERE { ?x ?p ?o }";
        assert_eq!(sanitize(clean), clean);
        assert_eq!(sanitize("SELECT ?x # pick x\nWHERE { ?x <http://ex/a#b> ?o }"), "SELECT ?x WHERE { ?x <http://ex/a#b> ?o }");
        assert_eq!(sanitize("</think></SPARQL>ASK {}"), "ASK {}");
        assert_eq!(sanitize("SELECT ?x</think>WHERE { ?x ?p ?o }"), "SELECT ?x WHERE { ?x ?p ?o }");
        assert_eq!(sanitize("```sparql\nASK { ?s ?p ?o }\n```<|im_end|>"), "ASK { ?s ?p ?o }");
        // a '<' that is a comparison survives
        assert_eq!(sanitize("FILTER(?a < 3)"), "FILTER(?a < 3)");
        // multibyte text right after '<' is not a tag
        assert_eq!(sanitize("<é"), "<é");
        assert_eq!(sanitize("</ééé>"), "</ééé>");
    }

    #[test]
    fn anchors() {
        assert!(is_anchor("SELECT ?x", 0));
        assert!(is_anchor("select distinct ?x", 0));
        assert!(is_anchor("PREFIX wd: <http://x/>", 0));
        assert!(is_anchor("PREFIX : <http://x/>", 0));
        assert!(!is_anchor("SELECT the right one", 0));
        assert!(!is_anchor("SELECTED ?x", 0));
        assert!(is_anchor("ASK WHERE {", 0));
    }

    #[test]
    fn truncated_segment_runs_to_end() {
        let s = keyword_segment("Sure: SELECT ?x WHERE { ?x ?p").unwrap();
        assert_eq!(s, "SELECT ?x WHERE { ?x ?p");
    }
}
