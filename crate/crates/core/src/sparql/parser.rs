//! Shallow walk over the token stream that builds a [`QueryDoc`].

use super::lexer::{tokenize, unescape_local, LexError, Token, TokenKind};
use super::{
    Iri, Node, Position, PrefixTable, QueryDoc, QueryFeatures, QueryForm, Role, Slot,
    SparqlError, SyntaxFinding, TermOccurrence, TriplePattern,
};

const AGGREGATES: [&str; 7] = ["COUNT", "SUM", "MIN", "MAX", "AVG", "SAMPLE", "GROUP_CONCAT"];
const MODIFIERS: [&str; 6] = ["GROUP", "HAVING", "ORDER", "LIMIT", "OFFSET", "VALUES"];

pub(super) fn lex_error(e: LexError) -> SparqlError {
    SparqlError::Lex(match e {
        LexError::UnterminatedString { offset } => SyntaxFinding::UnterminatedLiteral { offset },
        LexError::InvalidCharacter { ch, offset } => SyntaxFinding::InvalidCharacter { ch, offset },
    })
}

fn check_balance(toks: &[Token]) -> Result<(), SparqlError> {
    let mut stack: Vec<(&str, usize)> = Vec::new();
    for t in toks {
        let TokenKind::Punct(p) = t.kind else { continue };
        match p {
            "{" | "(" | "[" => stack.push((p, t.start)),
            "}" | ")" | "]" => {
                let want = match p {
                    "}" => "{",
                    ")" => "(",
                    _ => "[",
                };
                match stack.pop() {
                    Some((open, _)) if open == want => {}
                    _ => {
                        return Err(SparqlError::Unbalanced(SyntaxFinding::UnbalancedGroup {
                            offset: t.start,
                        }))
                    }
                }
            }
            _ => {}
        }
    }
    match stack.pop() {
        Some((_, offset)) => Err(SparqlError::Unbalanced(SyntaxFinding::UnbalancedGroup { offset })),
        None => Ok(()),
    }
}

pub(super) fn parse(text: &str, defaults: &PrefixTable) -> Result<QueryDoc, SparqlError> {
    if text.trim().is_empty() {
        return Err(SparqlError::Empty);
    }
    let toks = tokenize(text).map_err(lex_error)?;
    check_balance(&toks)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        declared: PrefixTable::new(),
        defaults,
        patterns: Vec::new(),
        occurrences: Vec::new(),
        features: QueryFeatures::default(),
        issues: Vec::new(),
        projected: Vec::new(),
        wildcard: false,
        order_sensitive: false,
        has_limit: false,
    };
    p.prologue();
    let form = p.query_form()?;
    p.body(form);

    let mut terms: Vec<TermOccurrence> = Vec::new();
    for (iri, pos) in p.occurrences {
        match terms.iter_mut().find(|t| t.iri == iri) {
            Some(t) => t.positions.push(pos),
            None => terms.push(TermOccurrence { iri, role: Role::Unknown, positions: vec![pos] }),
        }
    }
    Ok(QueryDoc {
        raw_text: text.to_string(),
        form,
        prefixes: p.declared,
        terms,
        projected_vars: p.projected,
        wildcard: p.wildcard,
        order_sensitive: p.order_sensitive,
        has_limit: p.has_limit,
        patterns: p.patterns,
        features: p.features,
        issues: p.issues,
    })
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    declared: PrefixTable,
    defaults: &'a PrefixTable,
    patterns: Vec<TriplePattern>,
    occurrences: Vec<(Iri, Position)>,
    features: QueryFeatures,
    issues: Vec<SyntaxFinding>,
    projected: Vec<String>,
    wildcard: bool,
    order_sensitive: bool,
    has_limit: bool,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'a Token> {
        self.toks.get(self.pos + n)
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_word(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_word(kw))
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        if self.at_word(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn unexpected(&mut self) {
        if let Some(t) = self.peek() {
            let token = token_text(t);
            self.issues.push(SyntaxFinding::UnexpectedToken { token, offset: t.start });
        }
    }

    fn resolve_pname(&self, prefix: &str, local: &str) -> Option<Iri> {
        let ns = self.declared.get(prefix).or_else(|| self.defaults.get(prefix))?;
        Iri::new(format!("{}{}", ns.as_str(), unescape_local(local))).ok()
    }

    fn iri_node(&self, t: &Token) -> Option<Node> {
        match &t.kind {
            TokenKind::IriRef(s) => Some(match Iri::new(s.clone()) {
                Ok(i) => Node::Iri(i),
                Err(_) => Node::Unresolved(s.clone()),
            }),
            TokenKind::PrefixedName { prefix, local } => Some(
                self.resolve_pname(prefix, local)
                    .map(Node::Iri)
                    .unwrap_or_else(|| Node::Unresolved(format!("{prefix}:{local}"))),
            ),
            _ => None,
        }
    }

    fn record(&mut self, node: &Node, slot: Slot) {
        let triple = self.patterns.len();
        match node {
            Node::Iri(i) => self.occurrences.push((i.clone(), Position { triple, slot })),
            Node::Path(steps) => {
                for s in steps {
                    self.record(s, slot);
                }
            }
            _ => {}
        }
    }

    fn add_triple(&mut self, subject: Node, predicate: Node, object: Node) {
        self.record(&subject, Slot::Subject);
        self.record(&predicate, Slot::Predicate);
        self.record(&object, Slot::Object);
        self.patterns.push(TriplePattern { subject, predicate, object });
    }

    fn prologue(&mut self) {
        loop {
            if self.at_word("PREFIX") {
                let start = self.bump().map(|t| t.start).unwrap_or(0);
                let label = match self.peek().map(|t| &t.kind) {
                    Some(TokenKind::PrefixedName { prefix, local }) if local.is_empty() => {
                        Some(prefix.clone())
                    }
                    _ => None,
                };
                let ns = self.peek_at(1).and_then(|t| match &t.kind {
                    TokenKind::IriRef(s) => Iri::new(s.clone()).ok(),
                    _ => None,
                });
                match (label, ns) {
                    (Some(label), Some(ns)) => {
                        self.declared.insert(label, ns);
                        self.pos += 2;
                    }
                    _ => {
                        self.issues.push(SyntaxFinding::MalformedPrefix { offset: start });
                        // Skip to the next IRI, which usually closes the declaration.
                        while let Some(t) = self.peek() {
                            if QueryForm::from_word(&token_text(t)).is_some() || t.is_word("PREFIX") {
                                break;
                            }
                            self.pos += 1;
                            if matches!(t.kind, TokenKind::IriRef(_)) {
                                break;
                            }
                        }
                    }
                }
            } else if self.at_word("BASE") {
                self.pos += 1;
                if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::IriRef(_))) {
                    self.pos += 1;
                } else {
                    self.unexpected();
                }
            } else {
                break;
            }
        }
    }

    fn query_form(&mut self) -> Result<QueryForm, SparqlError> {
        let form_at = |t: &Token| match &t.kind {
            TokenKind::Word(w) => QueryForm::from_word(w),
            _ => None,
        };
        if let Some(f) = self.peek().and_then(form_at) {
            self.pos += 1;
            return Ok(f);
        }
        // Leading prose or junk: note it and continue from the first form keyword.
        let Some(idx) = self.toks[self.pos..].iter().position(|t| form_at(t).is_some()) else {
            return Err(SparqlError::NoQueryForm);
        };
        self.unexpected();
        self.pos += idx;
        let f = self.bump().and_then(form_at).ok_or(SparqlError::NoQueryForm)?;
        Ok(f)
    }

    fn body(&mut self, form: QueryForm) {
        match form {
            QueryForm::Select => {
                self.projection(true);
                self.dataset();
                self.eat_word("WHERE");
                if self.at_punct("{") {
                    self.group();
                } else {
                    self.issues.push(SyntaxFinding::MissingWhere);
                }
            }
            QueryForm::Ask => {
                self.dataset();
                self.eat_word("WHERE");
                if self.at_punct("{") {
                    self.group();
                } else {
                    self.issues.push(SyntaxFinding::MissingWhere);
                }
            }
            QueryForm::Construct => {
                if self.at_punct("{") {
                    self.group();
                }
                self.dataset();
                let had_where = self.eat_word("WHERE");
                if self.at_punct("{") {
                    self.group();
                } else if had_where || self.patterns.is_empty() {
                    self.issues.push(SyntaxFinding::MissingWhere);
                }
            }
            QueryForm::Describe => {
                loop {
                    let Some(t) = self.peek() else { break };
                    if t.is_punct("*") {
                        self.wildcard = true;
                    } else if let TokenKind::Var(v) = &t.kind {
                        self.projected.push(v.clone());
                    } else if let Some(n) = self.iri_node(t) {
                        self.record(&n, Slot::Subject);
                    } else {
                        break;
                    }
                    self.pos += 1;
                }
                self.dataset();
                self.eat_word("WHERE");
                if self.at_punct("{") {
                    self.group();
                }
            }
        }
        self.solution_modifiers(true);
        if self.peek().is_some() {
            let offset = self.peek().map(|t| t.start).unwrap_or(0);
            self.issues.push(SyntaxFinding::TrailingContent { offset });
        }
    }

    fn dataset(&mut self) {
        while self.eat_word("FROM") {
            self.eat_word("NAMED");
            match self.peek().and_then(|t| self.iri_node(t)) {
                Some(_) => self.pos += 1,
                None => self.unexpected(),
            }
        }
    }

    /// SELECT clause after the keyword. `top` marks the outermost query,
    /// whose projection is the result header.
    fn projection(&mut self, top: bool) {
        if self.eat_word("DISTINCT") || self.eat_word("REDUCED") {
            self.features.distinct |= top;
        }
        let mut any = false;
        loop {
            let Some(t) = self.peek() else { break };
            match &t.kind {
                TokenKind::Var(v) => {
                    if top {
                        self.projected.push(v.clone());
                    }
                    self.pos += 1;
                    any = true;
                }
                TokenKind::Punct("*") => {
                    if top {
                        self.wildcard = true;
                    }
                    self.pos += 1;
                    any = true;
                }
                TokenKind::Punct("(") => {
                    let alias = self.expression();
                    if let (true, Some(v)) = (top, alias) {
                        self.projected.push(v);
                    }
                    any = true;
                }
                _ => break,
            }
        }
        if !any {
            self.issues.push(SyntaxFinding::EmptyProjection);
        }
    }

    /// Consumes a parenthesised expression starting at `(`. Returns the
    /// variable after a depth-one `AS`, if any.
    fn expression(&mut self) -> Option<String> {
        let mut depth = 0usize;
        let mut alias = None;
        while let Some(t) = self.peek() {
            match &t.kind {
                TokenKind::Punct("(") => depth += 1,
                TokenKind::Punct(")") => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos += 1;
                        break;
                    }
                }
                TokenKind::Punct("{") => {
                    // EXISTS { ... } inside an expression.
                    self.group();
                    continue;
                }
                TokenKind::Word(w) => {
                    let up = w.to_ascii_uppercase();
                    if AGGREGATES.contains(&up.as_str()) {
                        self.features.aggregate = true;
                    } else if up == "NOT" && self.peek_at(1).is_some_and(|n| n.is_word("EXISTS")) {
                        self.features.negation = true;
                    } else if up == "AS" && depth == 1 {
                        if let Some(TokenKind::Var(v)) = self.peek_at(1).map(|n| &n.kind) {
                            alias = Some(v.clone());
                        }
                    }
                }
                TokenKind::Str => {
                    self.pos += 1;
                    self.literal_suffix();
                    continue;
                }
                _ => {
                    if let Some(n) = self.iri_node(t) {
                        self.record(&n, Slot::Object);
                    }
                }
            }
            self.pos += 1;
        }
        alias
    }

    /// FILTER / HAVING argument: a bracketed expression or a function call.
    fn constraint(&mut self) {
        if self.at_punct("(") {
            self.expression();
            return;
        }
        if self.at_word("NOT") && self.peek_at(1).is_some_and(|t| t.is_word("EXISTS")) {
            self.features.negation = true;
            self.pos += 2;
            if self.at_punct("{") {
                self.group();
            }
            return;
        }
        if self.eat_word("EXISTS") {
            if self.at_punct("{") {
                self.group();
            }
            return;
        }
        let Some(t) = self.peek() else { return };
        let callee = matches!(t.kind, TokenKind::Word(_)) || self.iri_node(t).is_some();
        if callee && self.peek_at(1).is_some_and(|n| n.is_punct("(")) {
            if let Some(n) = self.iri_node(t) {
                self.record(&n, Slot::Object);
            }
            self.pos += 1;
            self.expression();
        } else {
            self.unexpected();
        }
    }

    /// `@lang` or `^^datatype` after a string literal.
    fn literal_suffix(&mut self) {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::LangTag(_)) => self.pos += 1,
            Some(TokenKind::DoubleCaret) => {
                self.pos += 1;
                match self.peek().and_then(|t| self.iri_node(t)) {
                    Some(n) => {
                        self.record(&n, Slot::Object);
                        self.pos += 1;
                    }
                    None => self.unexpected(),
                }
            }
            _ => {}
        }
    }

    /// Group graph pattern starting at `{`, consumed through its `}`.
    fn group(&mut self) {
        if !self.eat_punct("{") {
            self.unexpected();
            return;
        }
        while let Some(t) = self.peek() {
            if t.is_punct("}") {
                self.pos += 1;
                return;
            }
            if t.is_punct(".") {
                self.pos += 1;
            } else if t.is_punct("{") {
                if self.peek_at(1).is_some_and(|n| n.is_word("SELECT")) {
                    self.subquery();
                } else {
                    self.group();
                }
            } else if t.is_word("OPTIONAL") {
                self.pos += 1;
                self.features.optional = true;
                self.group();
            } else if t.is_word("MINUS") {
                self.pos += 1;
                self.features.negation = true;
                self.group();
            } else if t.is_word("UNION") {
                self.pos += 1;
                self.features.union = true;
            } else if t.is_word("GRAPH") || t.is_word("SERVICE") {
                self.pos += 1;
                self.eat_word("SILENT");
                if self.peek().is_some_and(|n| n.is_punct("{")) {
                    self.unexpected();
                } else {
                    self.pos += 1;
                }
                self.group();
            } else if t.is_word("FILTER") {
                self.pos += 1;
                self.features.filter = true;
                self.constraint();
            } else if t.is_word("BIND") {
                self.pos += 1;
                self.features.bind = true;
                if self.at_punct("(") {
                    self.expression();
                } else {
                    self.unexpected();
                }
            } else if t.is_word("VALUES") {
                self.pos += 1;
                self.values();
            } else if !self.triples() {
                self.unexpected();
                self.pos += 1;
            }
        }
    }

    fn subquery(&mut self) {
        self.features.subquery = true;
        self.pos += 2; // `{` SELECT
        self.projection(false);
        self.eat_word("WHERE");
        if self.at_punct("{") {
            self.group();
        } else {
            self.issues.push(SyntaxFinding::MissingWhere);
        }
        self.solution_modifiers(false);
        if !self.eat_punct("}") {
            self.unexpected();
            // Resync on the closing brace of the subquery.
            let mut depth = 0usize;
            while let Some(t) = self.bump() {
                if t.is_punct("{") {
                    depth += 1;
                } else if t.is_punct("}") {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
            }
        }
    }

    fn values(&mut self) {
        self.features.values = true;
        while let Some(t) = self.peek() {
            if t.is_punct("{") {
                break;
            }
            if !(matches!(t.kind, TokenKind::Var(_)) || t.is_punct("(") || t.is_punct(")")) {
                self.unexpected();
                return;
            }
            self.pos += 1;
        }
        if !self.eat_punct("{") {
            self.unexpected();
            return;
        }
        while let Some(t) = self.bump() {
            if t.is_punct("}") {
                break;
            }
            if let Some(n) = self.iri_node(t) {
                self.record(&n, Slot::Object);
            }
        }
    }

    fn solution_modifiers(&mut self, top: bool) {
        loop {
            let Some(t) = self.peek() else { return };
            let TokenKind::Word(w) = &t.kind else { return };
            let up = w.to_ascii_uppercase();
            if !MODIFIERS.contains(&up.as_str()) {
                return;
            }
            self.pos += 1;
            match up.as_str() {
                "GROUP" => {
                    self.features.group_by = true;
                    if !self.eat_word("BY") {
                        self.unexpected();
                    }
                    self.condition_list();
                }
                "ORDER" => {
                    if top {
                        self.order_sensitive = true;
                    }
                    if !self.eat_word("BY") {
                        self.unexpected();
                    }
                    self.condition_list();
                }
                "HAVING" => {
                    self.constraint();
                    while self.at_punct("(") {
                        self.expression();
                    }
                }
                "LIMIT" | "OFFSET" => {
                    if up == "LIMIT" && top {
                        self.has_limit = true;
                    }
                    if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Number)) {
                        self.pos += 1;
                    } else {
                        self.unexpected();
                    }
                }
                "VALUES" => self.values(),
                _ => unreachable!(),
            }
        }
    }

    /// GROUP BY / ORDER BY conditions.
    fn condition_list(&mut self) {
        let mut any = false;
        while let Some(t) = self.peek() {
            if matches!(t.kind, TokenKind::Var(_)) {
                self.pos += 1;
            } else if t.is_word("ASC") || t.is_word("DESC") {
                self.pos += 1;
                if self.at_punct("(") {
                    self.expression();
                }
            } else if t.is_punct("(") {
                self.expression();
            } else if matches!(t.kind, TokenKind::Word(_)) && self.peek_at(1).is_some_and(|n| n.is_punct("(")) {
                if AGGREGATES.iter().any(|a| t.is_word(a)) {
                    self.features.aggregate = true;
                }
                self.pos += 1;
                self.expression();
            } else {
                break;
            }
            any = true;
        }
        if !any {
            self.unexpected();
        }
    }

    /// Triples block starting at the current token. False when nothing could
    /// be read as a subject.
    fn triples(&mut self) -> bool {
        let start = self.pos;
        let bracketed = self.at_punct("[");
        let Some(subject) = self.term() else {
            self.pos = start;
            return false;
        };
        if !self.property_list(subject) && !bracketed {
            self.unexpected();
        }
        self.pos > start
    }

    /// Predicate-object list for `subject`. False when no verb was found.
    fn property_list(&mut self, subject: Node) -> bool {
        let mut any = false;
        loop {
            let Some(verb) = self.verb() else { break };
            any = true;
            loop {
                match self.term() {
                    Some(obj) => self.add_triple(subject.clone(), verb.clone(), obj),
                    None => {
                        self.unexpected();
                        break;
                    }
                }
                if !self.eat_punct(",") {
                    break;
                }
            }
            if !self.eat_punct(";") {
                break;
            }
            while self.eat_punct(";") {}
        }
        any
    }

    fn verb(&mut self) -> Option<Node> {
        let t = self.peek()?;
        match &t.kind {
            TokenKind::Var(v) => {
                self.pos += 1;
                Some(Node::Var(v.clone()))
            }
            TokenKind::Word(_) if t.is_word("a") => Some(self.path()),
            TokenKind::IriRef(_) | TokenKind::PrefixedName { .. } => Some(self.path()),
            TokenKind::Punct("^") | TokenKind::Punct("!") | TokenKind::Punct("(") => Some(self.path()),
            _ => None,
        }
    }

    /// Property path; a bare IRI or `a` comes back unwrapped.
    fn path(&mut self) -> Node {
        let mut steps = Vec::new();
        let mut plain = true;
        loop {
            while self.at_punct("^") || self.at_punct("!") {
                plain = false;
                self.pos += 1;
            }
            let Some(t) = self.peek() else { break };
            if t.is_word("a") {
                steps.push(Node::TypeKeyword);
                self.pos += 1;
            } else if let Some(n) = self.iri_node(t) {
                steps.push(n);
                self.pos += 1;
            } else if t.is_punct("(") {
                plain = false;
                self.pos += 1;
                match self.path() {
                    Node::Path(inner) => steps.extend(inner),
                    other => steps.push(other),
                }
                if !self.eat_punct(")") {
                    self.unexpected();
                }
            } else {
                self.unexpected();
                break;
            }
            while self.at_punct("*") || self.at_punct("+") || self.at_punct("?") {
                plain = false;
                self.pos += 1;
            }
            if self.at_punct("/") || self.at_punct("|") {
                plain = false;
                self.pos += 1;
                continue;
            }
            break;
        }
        if plain && steps.len() == 1 {
            steps.pop().unwrap_or(Node::Blank)
        } else {
            Node::Path(steps)
        }
    }

    /// Subject or object term.
    fn term(&mut self) -> Option<Node> {
        let t = self.peek()?;
        let node = match &t.kind {
            TokenKind::Var(v) => Node::Var(v.clone()),
            TokenKind::IriRef(_) | TokenKind::PrefixedName { .. } => self.iri_node(t)?,
            TokenKind::BlankNode(_) => Node::Blank,
            TokenKind::Number => Node::Literal,
            TokenKind::Word(_) if t.is_word("true") || t.is_word("false") => Node::Literal,
            TokenKind::Str => {
                self.pos += 1;
                self.literal_suffix();
                return Some(Node::Literal);
            }
            TokenKind::Punct("+") | TokenKind::Punct("-")
                if matches!(self.peek_at(1).map(|n| &n.kind), Some(TokenKind::Number)) =>
            {
                self.pos += 2;
                return Some(Node::Literal);
            }
            TokenKind::Punct("[") => {
                self.pos += 1;
                if !self.eat_punct("]") {
                    self.property_list(Node::Blank);
                    if !self.eat_punct("]") {
                        self.unexpected();
                    }
                }
                return Some(Node::Blank);
            }
            TokenKind::Punct("(") => {
                self.pos += 1;
                while !self.at_punct(")") {
                    match self.term() {
                        Some(n) => self.record(&n, Slot::Object),
                        None => {
                            self.unexpected();
                            break;
                        }
                    }
                }
                self.eat_punct(")");
                return Some(Node::Blank);
            }
            _ => return None,
        };
        self.pos += 1;
        Some(node)
    }
}

fn token_text(t: &Token) -> String {
    match &t.kind {
        TokenKind::IriRef(s) => format!("<{s}>"),
        TokenKind::PrefixedName { prefix, local } => format!("{prefix}:{local}"),
        TokenKind::Var(v) => format!("?{v}"),
        TokenKind::BlankNode(b) => format!("_:{b}"),
        TokenKind::Str => "\"...\"".to_string(),
        TokenKind::Number => "number".to_string(),
        TokenKind::LangTag(l) => format!("@{l}"),
        TokenKind::DoubleCaret => "^^".to_string(),
        TokenKind::Word(w) => w.clone(),
        TokenKind::Punct(p) => p.to_string(),
    }
}
