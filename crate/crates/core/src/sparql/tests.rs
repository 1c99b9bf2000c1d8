use super::*;
use crate::profile::KgProfile;
use proptest::prelude::*;

const KUBRICK: &str = "PREFIX dbo: <http://dbpedia.org/ontology/> PREFIX res: <http://dbpedia.org/resource/> SELECT DISTINCT ?uri WHERE { ?uri dbo:director res:Stanley_Kubrick }";

fn roles(doc: &QueryDoc, profile: &KgProfile) -> Vec<(String, Role)> {
    extract_terms(doc, profile)
        .into_iter()
        .map(|t| (t.iri.as_str().to_string(), t.role))
        .collect()
}

#[test]
fn kubrick_query_shape() {
    let doc = parse_query(KUBRICK).unwrap();
    assert_eq!(doc.form, QueryForm::Select);
    assert_eq!(doc.projected_vars, vec!["uri"]);
    assert_eq!(doc.terms.len(), 2);
    assert!(doc.features.distinct);
    assert!(!doc.order_sensitive);
    assert_eq!(doc.prefixes.len(), 2);
    assert!(doc.issues().is_empty());
}

#[test]
fn ask_has_no_projection() {
    let doc = parse_query("ASK { wd:Q76 wdt:P31 wd:Q5 }").unwrap();
    assert_eq!(doc.form, QueryForm::Ask);
    assert!(doc.projected_vars.is_empty());
}

#[test]
fn unbalanced_brace_is_lex_failure() {
    assert!(matches!(parse_query("SELECT ?x WHERE { ?x"), Err(SparqlError::Unbalanced(_))));
    assert!(matches!(parse_query("Here is your query:"), Err(SparqlError::NoQueryForm)));
}

#[test]
fn expansion_rewrites_prefixed_names() {
    let doc = expand_prefixes(&parse_query(KUBRICK).unwrap()).unwrap();
    assert_eq!(
        doc.raw_text,
        "SELECT DISTINCT ?uri WHERE { ?uri <http://dbpedia.org/ontology/director> <http://dbpedia.org/resource/Stanley_Kubrick> }"
    );
    // Declared prefixes stay available on the model.
    assert_eq!(doc.prefixes.len(), 2);
}

#[test]
fn expansion_identity_and_unknown_prefix() {
    let text = "SELECT ?s WHERE { ?s <http://ex.org/p> ?o }";
    let doc = parse_query(text).unwrap();
    assert_eq!(expand_prefixes(&doc).unwrap().raw_text, text);

    let doc = parse_query("SELECT ?n WHERE { ?s foaf:name ?n }").unwrap();
    assert_eq!(expand_prefixes(&doc), Err(SparqlError::UnknownPrefix("foaf".into())));
    let with_profile = expand_prefixes_with(&doc, &KgProfile::dbpedia().prefixes).unwrap();
    assert!(with_profile.raw_text.contains("<http://xmlns.com/foaf/0.1/name>"));
}

#[test]
fn expansion_keeps_literals_and_comments() {
    let text = "SELECT ?x WHERE { ?x rdfs:label \"dbo:director\"@en . # rdf:type\n}";
    let doc = expand_prefixes(&parse_query(text).unwrap()).unwrap();
    assert_eq!(
        doc.raw_text,
        "SELECT ?x WHERE { ?x <http://www.w3.org/2000/01/rdf-schema#label> \"dbo:director\"@en . # rdf:type\n}"
    );
}

#[test]
fn kubrick_roles() {
    let doc = expand_prefixes(&parse_query(KUBRICK).unwrap()).unwrap();
    assert_eq!(
        roles(&doc, &KgProfile::dbpedia()),
        vec![
            ("http://dbpedia.org/ontology/director".into(), Role::Property),
            ("http://dbpedia.org/resource/Stanley_Kubrick".into(), Role::Entity),
        ]
    );
}

#[test]
fn wikidata_roles_and_paths() {
    let q = "SELECT ?f WHERE { ?f wdt:P57 wd:Q2001 . ?f wdt:P31/wdt:P279* wd:Q11424 }";
    let doc = parse_query_with(q, &KgProfile::wikidata().prefixes).unwrap();
    let doc = expand_prefixes_with(&doc, &KgProfile::wikidata().prefixes).unwrap();
    let r = roles(&doc, &KgProfile::wikidata());
    assert_eq!(
        r,
        vec![
            ("http://www.wikidata.org/prop/direct/P57".into(), Role::Property),
            ("http://www.wikidata.org/entity/Q2001".into(), Role::Entity),
            ("http://www.wikidata.org/prop/direct/P31".into(), Role::Property),
            ("http://www.wikidata.org/prop/direct/P279".into(), Role::Property),
            ("http://www.wikidata.org/entity/Q11424".into(), Role::Class),
        ]
    );
    assert!(matches!(doc.patterns[1].predicate, Node::Path(ref s) if s.len() == 2));
}

#[test]
fn dbpedia_type_object_is_class() {
    let q = "SELECT ?f WHERE { ?f a dbo:Film ; dbo:director dbr:Stanley_Kubrick }";
    let doc = parse_query_with(q, &KgProfile::dbpedia().prefixes).unwrap();
    let r = roles(&doc, &KgProfile::dbpedia());
    assert_eq!(r[0], ("http://dbpedia.org/ontology/Film".into(), Role::Class));
    assert_eq!(r[1].1, Role::Property);
    assert_eq!(r[2].1, Role::Entity);
    assert_eq!(doc.patterns.len(), 2);
}

#[test]
fn no_iris_no_terms() {
    let doc = parse_query("SELECT * WHERE { ?s ?p ?o }").unwrap();
    assert!(extract_terms(&doc, &KgProfile::dbpedia()).is_empty());
    assert!(doc.wildcard);
}

#[test]
fn filter_and_values_iris_are_objects() {
    let q = "SELECT ?x WHERE { ?x ?p ?o FILTER(?o = <http://ex.org/a> && ?x != <http://ex.org/b>) VALUES ?v { <http://ex.org/c> } }";
    let doc = parse_query(q).unwrap();
    let iris: Vec<_> = doc.iris().map(|i| i.as_str()).collect();
    assert_eq!(iris, vec!["http://ex.org/a", "http://ex.org/b", "http://ex.org/c"]);
    assert!(doc.terms.iter().all(|t| t.positions.iter().all(|p| p.slot == Slot::Object)));
    assert!(doc.features.filter && doc.features.values);
}

#[test]
fn order_sensitivity_is_top_level_only() {
    let ranked = parse_query("SELECT ?m WHERE { ?m <http://ex.org/h> ?h } ORDER BY DESC(?h) LIMIT 1").unwrap();
    assert!(ranked.order_sensitive && ranked.has_limit);
    let nested = parse_query(
        "SELECT ?m WHERE { { SELECT ?m WHERE { ?m <http://ex.org/h> ?h } ORDER BY ?h LIMIT 3 } }",
    )
    .unwrap();
    assert!(!nested.order_sensitive);
    assert!(nested.features.subquery);
    assert_eq!(nested.projected_vars, vec!["m"]);
}

#[test]
fn aggregate_projection_alias() {
    let doc = parse_query("SELECT (COUNT(DISTINCT ?x) AS ?c) WHERE { ?x a <http://ex.org/C> }").unwrap();
    assert_eq!(doc.projected_vars, vec!["c"]);
    assert!(doc.features.aggregate);
}

#[test]
fn validate_syntax_findings() {
    assert_eq!(validate_syntax(KUBRICK), Ok(()));
    assert_eq!(validate_syntax("Here is your query:"), Err(vec![SyntaxFinding::NoQueryForm]));
    let f = validate_syntax("SELECT ?x { ?x <p> <o> ").unwrap_err();
    assert_eq!(f.len(), 1);
    assert_eq!(f[0].to_string().split(' ').take(2).collect::<Vec<_>>(), vec!["unbalanced", "group"]);
    assert_eq!(validate_syntax("SELECT ?x"), Err(vec![SyntaxFinding::MissingWhere]));
    assert_eq!(
        validate_syntax("SELECT WHERE { ?x ?p ?o }"),
        Err(vec![SyntaxFinding::EmptyProjection])
    );
    let trailing = validate_syntax("SELECT ?x WHERE { ?x ?p ?o } and that is it").unwrap_err();
    assert!(matches!(trailing[0], SyntaxFinding::TrailingContent { .. }));
    assert!(validate_syntax("SELECT ?x WHERE { ?x <http://a> }").is_err());
}

#[test]
fn common_query_shapes_validate() {
    let ok = [
        "SELECT DISTINCT ?uri WHERE { ?uri <http://ex.org/p> ?o . OPTIONAL { ?uri <http://ex.org/q> ?z } FILTER NOT EXISTS { ?uri a <http://ex.org/C> } }",
        "SELECT ?x WHERE { { ?x <http://a/p> ?y } UNION { ?x <http://a/q> ?y } MINUS { ?x <http://a/r> 3 } }",
        "PREFIX wd: <http://www.wikidata.org/entity/> SELECT ?n WHERE { wd:Q76 <http://www.w3.org/2000/01/rdf-schema#label> ?n FILTER(LANG(?n) = \"en\") }",
        "SELECT ?c (COUNT(?x) AS ?n) WHERE { ?x <http://a/p> ?c } GROUP BY ?c HAVING (COUNT(?x) > 2) ORDER BY DESC(?n) LIMIT 5 OFFSET 1",
        "ASK WHERE { <http://a/s> <http://a/p> \"1\"^^xsd:integer }",
        "SELECT ?x WHERE { ?x <http://a/p> [ <http://a/q> ?y ] . BIND(STR(?y) AS ?s) FILTER regex(?s, \"^A\") }",
        "SELECT ?d WHERE { <http://a/s> <http://a/born> ?d FILTER(YEAR(?d) < 1950) }",
        "CONSTRUCT { ?s <http://a/p> ?o } WHERE { ?s <http://a/q> ?o }",
        "DESCRIBE <http://a/s>",
        "SELECT ?x WHERE { ?x <http://a/p>|<http://a/q> ?y ; ^<http://a/r> ?z , ?w }",
    ];
    for q in ok {
        assert_eq!(validate_syntax(q), Ok(()), "{q}");
    }
}

#[test]
fn leading_prose_is_an_issue_but_parses() {
    let doc = parse_query("Sure: SELECT ?x WHERE { ?x ?p ?o }").unwrap();
    assert_eq!(doc.form, QueryForm::Select);
    assert!(matches!(doc.issues()[0], SyntaxFinding::UnexpectedToken { .. }));
}

#[test]
fn iri_invariants() {
    assert!(Iri::new("http://ex.org/a").is_ok());
    assert!(Iri::new("urn:isbn:1").is_ok());
    assert!(Iri::new("ex.org/a").is_err());
    assert!(Iri::new("http://ex.org/a b").is_err());
    assert!(Iri::new("http:").is_err());
    let i = Iri::new("https://dblp.org/pid/01/1").unwrap();
    let json = serde_json::to_string(&i).unwrap();
    assert_eq!(serde_json::from_str::<Iri>(&json).unwrap(), i);
}

/// Independent scan: every `<...>` in an expanded query that holds an
/// absolute IRI, skipping string literals and comments.
fn oracle_bracket_iris(text: &str) -> Vec<String> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'"' => {
                i += 1;
                while i < b.len() && b[i] != b'"' {
                    i += if b[i] == b'\\' { 2 } else { 1 };
                }
                i += 1;
            }
            b'#' => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
            }
            b'<' => {
                if let Some(end) = text[i + 1..].find('>') {
                    let inner = &text[i + 1..i + 1 + end];
                    if !inner.contains(' ') && inner.contains("://") {
                        if !out.iter().any(|x| x == inner) {
                            out.push(inner.to_string());
                        }
                        i += end + 2;
                        continue;
                    }
                }
                i += 1;
            }
            _ => i += 1,
        }
    }
    out
}

fn arb_node(prefixes: &'static [&'static str]) -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,3}".prop_map(|v| format!("?{v}")),
        (0..prefixes.len(), "[A-Za-z][A-Za-z0-9_]{0,5}").prop_map(move |(i, l)| format!("{}:{l}", prefixes[i])),
        "[A-Za-z][A-Za-z0-9]{0,5}".prop_map(|l| format!("<http://ex.org/{l}>")),
        "[a-z ]{0,6}".prop_map(|s| format!("\"{s}\"")),
    ]
}

const PFX: &[&str] = &["dbo", "dbr", "wd", "wdt", "rdfs"];

fn arb_query() -> impl Strategy<Value = String> {
    let triple = (arb_node(PFX), arb_node(&["dbo", "wdt", "rdfs", "dbr", "wd"]), arb_node(PFX));
    (prop::collection::vec(triple, 0..6), any::<bool>(), any::<bool>()).prop_map(|(ts, order, decl)| {
        let mut q = String::new();
        if decl {
            q.push_str("PREFIX dbo: <http://dbpedia.org/ontology/>\nPREFIX dbr: <http://dbpedia.org/resource/>\n");
        }
        q.push_str("SELECT ?a WHERE {\n");
        for (s, p, o) in ts {
            // Literals are not valid subjects/predicates; swap to variables.
            let s = if s.starts_with('"') { "?s".to_string() } else { s };
            let p = if p.starts_with('"') || p.starts_with('?') { "?p".to_string() } else { p };
            q.push_str(&format!("  {s} {p} {o} .\n"));
        }
        q.push('}');
        if order {
            q.push_str(" ORDER BY ?a");
        }
        q
    })
}

proptest! {
    #[test]
    fn expansion_is_idempotent(q in arb_query()) {
        let defaults = KgProfile::wikidata().prefixes.merged_over(&KgProfile::dbpedia().prefixes);
        let doc = parse_query_with(&q, &defaults).unwrap();
        let once = expand_prefixes_with(&doc, &defaults).unwrap();
        let twice = expand_prefixes_with(&once, &defaults).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once.order_sensitive, q.contains("ORDER BY"));
    }

    #[test]
    fn term_completeness(q in arb_query()) {
        let defaults = KgProfile::wikidata().prefixes.merged_over(&KgProfile::dbpedia().prefixes);
        let doc = expand_prefixes_with(&parse_query_with(&q, &defaults).unwrap(), &defaults).unwrap();
        let expected = oracle_bracket_iris(&doc.raw_text);
        let got: Vec<String> = doc.iris().map(|i| i.as_str().to_string()).collect();
        prop_assert_eq!(got, expected);
        for t in &doc.terms {
            prop_assert!(!t.positions.is_empty());
            prop_assert!(doc.raw_text.contains(t.iri.as_str()));
        }
    }

    #[test]
    fn predicate_only_terms_never_entities(q in arb_query()) {
        let defaults = KgProfile::wikidata().prefixes.merged_over(&KgProfile::dbpedia().prefixes);
        let doc = expand_prefixes_with(&parse_query_with(&q, &defaults).unwrap(), &defaults).unwrap();
        for profile in [KgProfile::dbpedia(), KgProfile::wikidata()] {
            for t in extract_terms(&doc, &profile) {
                if t.only_predicate() {
                    prop_assert_ne!(t.role, Role::Entity, "{}", t.iri);
                }
            }
        }
    }

    #[test]
    fn parse_never_panics(s in "\\PC{0,80}") {
        let _ = parse_query(&s);
        let _ = validate_syntax(&s);
    }
}
