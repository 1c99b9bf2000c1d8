//! Heuristic pre-screen. Each check is independent; every label whose
//! check fires is attached.
//!
//! 1. Unadapted: the candidate mentions a namespace or prefix owned only by
//!    the source KG.
//! 2. Bad formed: no candidate, a candidate that fails validation, or one
//!    the endpoint rejected.
//! 3. Property as entity: an IRI without an entity role in a subject or
//!    object slot (or a property where a class belongs).
//! 4. Entity as property: an IRI without a property role in a predicate
//!    slot (or a resource where a class belongs).
//! 5. Missing type: gold uses the target type property, the candidate never
//!    does.
//! 6. Wrong property: the candidate's property multiset differs from the
//!    gold one, where IRIs listed together as er2 targets count as equal.
//! 7. Wrong entity: the same for entities.
//! 8. Structural: the shape (form, features, modifiers, projection width,
//!    non-type triple count) differs from gold. Also the fallback when
//!    nothing else fired, e.g. right terms joined the wrong way.
//!
//! Terms a leftover source IRI maps to via er2, or a target IRI misplaced
//! into the wrong namespace, are not counted again as wrong terms.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ErrorLabel;
use crate::align::Er2Doc;
use crate::profile::{IdentifierStyle, KgProfile, TranslationDirection};
use crate::sparql::{
    expand_prefixes_with, parse_query_with, Iri, Node, QueryDoc, Role, Slot, RDF_TYPE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionSummary {
    NotExecuted,
    /// The endpoint refused the query (HTTP 4xx).
    Rejected,
    /// Timeout, transport or server failure.
    Failed,
    Empty,
    Mismatch,
}

#[derive(Debug, Clone, Copy)]
pub struct ScreenInput<'a> {
    /// Sanitized candidate; `None` when extraction failed.
    pub candidate: Option<&'a str>,
    /// Gold query in the target KG.
    pub gold_query: &'a str,
    pub direction: &'a TranslationDirection,
    pub er2: Option<&'a Er2Doc>,
    pub execution: ExecutionSummary,
}

/// Labels for an incorrect run. Never empty.
pub fn prescreen(input: &ScreenInput<'_>) -> BTreeSet<ErrorLabel> {
    let mut labels = BTreeSet::new();
    screen(input, &mut labels);
    if labels.is_empty() {
        labels.insert(ErrorLabel::StructuralError);
    }
    labels
}

fn screen(input: &ScreenInput<'_>, labels: &mut BTreeSet<ErrorLabel>) {
    let src = &input.direction.source;
    let tgt = &input.direction.target;
    let defaults = tgt.prefixes.merged_over(&src.prefixes);
    let Some(text) = input.candidate else {
        labels.insert(ErrorLabel::QueryBadFormed);
        return;
    };
    if mentions_source(text, src, tgt) {
        labels.insert(ErrorLabel::UnadaptedDatasetPatterns);
    }
    let cand = match parse_query_with(text, &defaults) {
        Ok(d) if d.issues().is_empty() => d,
        _ => {
            labels.insert(ErrorLabel::QueryBadFormed);
            return;
        }
    };
    let Ok(cand) = expand_prefixes_with(&cand, &defaults) else {
        labels.insert(ErrorLabel::QueryBadFormed);
        return;
    };
    if input.execution == ExecutionSummary::Rejected {
        labels.insert(ErrorLabel::QueryBadFormed);
        return;
    }
    if cand.iris().any(|i| src.owns(i.as_str()) && !tgt.owns(i.as_str())) {
        labels.insert(ErrorLabel::UnadaptedDatasetPatterns);
    }
    slot_misuse(&cand, tgt, labels);

    let Some(gold) = parse_query_with(input.gold_query, &tgt.prefixes)
        .ok()
        .and_then(|g| expand_prefixes_with(&g, &tgt.prefixes).ok())
    else {
        return;
    };
    let tps = type_properties(src, tgt);
    let gold_typed = uses_type(&gold, &tps);
    let cand_typed = uses_type(&cand, &tps);
    if gold_typed && !cand_typed {
        labels.insert(ErrorLabel::MissingTypeAssertion);
    }
    let mut canon = Canon::new(tgt, input.er2);
    canon.alias_local_names(&gold, &cand);
    let with_classes = gold_typed && cand_typed;
    let (gp, ge) = term_multisets(&gold, tgt, &tps, &canon, with_classes);
    let (cp, ce) = term_multisets(&cand, tgt, &tps, &canon, with_classes);
    // A role swap already labelled as slot misuse is not also a wrong term.
    let swapped = labels.contains(&ErrorLabel::PropertyAsEntity) || labels.contains(&ErrorLabel::EntityAsProperty);
    let same_terms = swapped && union(&gp, &ge) == union(&cp, &ce);
    if gp != cp && !same_terms {
        labels.insert(ErrorLabel::WrongOrMissingProperty);
    }
    if ge != ce && !same_terms {
        labels.insert(ErrorLabel::WrongOrMissingEntity);
    }
    if shape_differs(&gold, &cand, &tps) {
        labels.insert(ErrorLabel::StructuralError);
    }
}

/// Type predicates that count as a type assertion: the target's, plus the
/// source's when it is source-only (an unadapted `wdt:P31` still types).
fn type_properties<'p>(src: &'p KgProfile, tgt: &'p KgProfile) -> Vec<&'p str> {
    let mut v = vec![tgt.type_property.as_str()];
    if src.owns(&src.type_property) && !tgt.owns(&src.type_property) {
        v.push(src.type_property.as_str());
    }
    v
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'-'
}

/// Text-level check so it also works on unparseable candidates.
fn mentions_source(text: &str, src: &KgProfile, tgt: &KgProfile) -> bool {
    let source_only = |ns: &str| src.owns(ns) && !tgt.owns(ns);
    if src.all_namespaces().filter(|ns| source_only(ns)).any(|ns| text.contains(ns)) {
        return true;
    }
    let bytes = text.as_bytes();
    src.prefixes.iter().filter(|(p, ns)| source_only(ns.as_str()) && tgt.prefixes.get(p).is_none()).any(|(p, _)| {
        let needle = format!("{p}:");
        text.match_indices(&needle).any(|(i, _)| {
            let before_ok = i == 0 || !(is_word_byte(bytes[i - 1]) || bytes[i - 1] == b':' || bytes[i - 1] == b'/');
            let after = bytes.get(i + needle.len()).copied();
            // `dbo://` would be a scheme, not a prefixed name.
            before_ok && after != Some(b'/')
        })
    })
}

fn node_iris(n: &Node) -> Vec<&Iri> {
    match n {
        Node::Iri(i) => vec![i],
        Node::Path(steps) => steps.iter().flat_map(node_iris).collect(),
        _ => Vec::new(),
    }
}

fn is_type_pred(n: &Node, tp: &str) -> bool {
    match n {
        Node::TypeKeyword => tp == RDF_TYPE,
        Node::Iri(i) => i.as_str() == tp,
        Node::Path(steps) => steps.iter().any(|s| is_type_pred(s, tp)),
        _ => false,
    }
}

fn any_type_pred(n: &Node, tps: &[&str]) -> bool {
    tps.iter().any(|tp| is_type_pred(n, tp)) || is_type_pred(n, RDF_TYPE)
}

fn uses_type(doc: &QueryDoc, tps: &[&str]) -> bool {
    doc.patterns.iter().any(|t| tps.iter().any(|tp| is_type_pred(&t.predicate, tp)))
}

fn slot_misuse(doc: &QueryDoc, tgt: &KgProfile, labels: &mut BTreeSet<ErrorLabel>) {
    for t in &doc.patterns {
        let typed = any_type_pred(&t.predicate, &[&tgt.type_property]);
        for (node, is_object) in [(&t.subject, false), (&t.object, true)] {
            let Node::Iri(i) = node else { continue };
            let roles = tgt.namespace_roles(i.as_str());
            if roles.is_empty() {
                continue;
            }
            if typed && is_object {
                if !roles.contains(&Role::Class) {
                    if roles.contains(&Role::Property) {
                        labels.insert(ErrorLabel::PropertyAsEntity);
                    } else {
                        labels.insert(ErrorLabel::EntityAsProperty);
                    }
                }
            } else if !roles.contains(&Role::Entity) {
                labels.insert(ErrorLabel::PropertyAsEntity);
            }
        }
        for i in node_iris(&t.predicate) {
            let roles = tgt.namespace_roles(i.as_str());
            if !roles.is_empty() && !roles.contains(&Role::Property) && i.as_str() != RDF_TYPE {
                labels.insert(ErrorLabel::EntityAsProperty);
            }
        }
    }
}

/// Canonical keys: numeric-style property IRIs fold to their local id
/// (`wd:P57` = `wdt:P57`), then er2 target groups merge, each with its
/// source term so a leftover source IRI counts as its mapped target.
struct Canon<'a> {
    tgt: &'a KgProfile,
    parent: BTreeMap<String, String>,
}

impl<'a> Canon<'a> {
    fn new(tgt: &'a KgProfile, er2: Option<&Er2Doc>) -> Self {
        let mut c = Canon { tgt, parent: BTreeMap::new() };
        for e in er2.map(|d| d.entries.as_slice()).unwrap_or_default() {
            let keys: Vec<String> = e.target_ids.iter().map(|t| c.fold(t.as_str())).collect();
            for k in &keys {
                c.union(e.source_id.as_str(), k);
            }
        }
        c
    }

    fn fold(&self, iri: &str) -> String {
        if self.tgt.identifier_style == IdentifierStyle::Numeric
            && self.tgt.namespace_roles(iri).contains(&Role::Property)
        {
            if let Some(local) = iri.rsplit(['/', '#']).next().filter(|l| !l.is_empty()) {
                return format!("prop:{local}");
            }
        }
        iri.to_string()
    }

    fn find(&self, k: &str) -> String {
        let mut cur = k.to_string();
        while let Some(p) = self.parent.get(&cur) {
            if *p == cur {
                break;
            }
            cur = p.clone();
        }
        cur
    }

    fn union(&mut self, a: &str, b: &str) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent.insert(hi, lo);
        }
    }

    /// Human-readable targets: a candidate IRI in the wrong target namespace
    /// with the local name of a gold IRI (`dbo:Stanley_Kubrick`) is the gold
    /// term misplaced, which slot misuse already reports.
    fn alias_local_names(&mut self, gold: &QueryDoc, cand: &QueryDoc) {
        if self.tgt.identifier_style != IdentifierStyle::HumanReadable {
            return;
        }
        let local = |i: &Iri| i.as_str().rsplit(['/', '#']).next().unwrap_or_default().to_string();
        let gold_iris: Vec<&Iri> = gold.iris().filter(|i| self.tgt.owns(i.as_str())).collect();
        let pairs: Vec<(String, String)> = cand
            .iris()
            .filter(|i| self.tgt.owns(i.as_str()) && !gold_iris.contains(i))
            .filter_map(|c| {
                let g = gold_iris.iter().find(|g| !local(c).is_empty() && local(g) == local(c))?;
                Some((c.as_str().to_string(), g.as_str().to_string()))
            })
            .collect();
        for (a, b) in pairs {
            self.union(&a, &b);
        }
    }

    fn key(&self, iri: &str) -> String {
        self.find(&self.fold(iri))
    }
}

type Multiset = BTreeMap<String, usize>;

fn union(a: &Multiset, b: &Multiset) -> Multiset {
    let mut m = a.clone();
    for (k, n) in b {
        *m.entry(k.clone()).or_default() += n;
    }
    m
}

/// (properties, entities), by slot. Type objects count only when both
/// queries have a type assertion, as properties for human-readable targets
/// (DBpedia ontology) and as entities otherwise (Wikidata items).
fn term_multisets(
    doc: &QueryDoc,
    tgt: &KgProfile,
    tps: &[&str],
    canon: &Canon<'_>,
    with_classes: bool,
) -> (Multiset, Multiset) {
    let mut props = Multiset::new();
    let mut ents = Multiset::new();
    let add = |m: &mut Multiset, i: &Iri| *m.entry(canon.key(i.as_str())).or_default() += 1;
    let classes_are_props = tgt.identifier_style == IdentifierStyle::HumanReadable;
    for t in &doc.patterns {
        let typed = any_type_pred(&t.predicate, tps);
        for i in node_iris(&t.predicate) {
            if !tps.contains(&i.as_str()) && i.as_str() != RDF_TYPE {
                add(&mut props, i);
            }
        }
        if let Node::Iri(i) = &t.subject {
            add(&mut ents, i);
        }
        if let Node::Iri(i) = &t.object {
            if !typed {
                add(&mut ents, i);
            } else if with_classes {
                add(if classes_are_props { &mut props } else { &mut ents }, i);
            }
        }
    }
    // IRIs in FILTER/VALUES/BIND expressions are not in any pattern slot.
    let entity_like = |i: &Iri| {
        let r = tgt.namespace_roles(i.as_str());
        r.is_empty() || r.contains(&Role::Entity)
    };
    for term in &doc.terms {
        for pos in &term.positions {
            if pos.slot == Slot::Predicate {
                continue;
            }
            let in_pattern = doc.patterns.get(pos.triple).is_some_and(|t| {
                let n = if pos.slot == Slot::Subject { &t.subject } else { &t.object };
                n.as_iri() == Some(&term.iri)
            });
            if !in_pattern && entity_like(&term.iri) {
                add(&mut ents, &term.iri);
            }
        }
    }
    (props, ents)
}

/// Shape ignores type triples; a dropped one is reported as missing type.
fn shape_differs(gold: &QueryDoc, cand: &QueryDoc, tps: &[&str]) -> bool {
    let width = |d: &QueryDoc| if d.wildcard { None } else { Some(d.projected_vars.len()) };
    let body = |d: &QueryDoc| d.patterns.iter().filter(|t| !any_type_pred(&t.predicate, tps)).count();
    gold.form != cand.form
        || gold.features != cand.features
        || gold.order_sensitive != cand.order_sensitive
        || gold.has_limit != cand.has_limit
        || width(gold) != width(cand)
        || body(gold) != body(cand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::Er2Entry;
    use crate::profile::ProfileRegistry;

    const GOLD: &str = "PREFIX wd: <http://www.wikidata.org/entity/> PREFIX wdt: <http://www.wikidata.org/prop/direct/> SELECT DISTINCT ?uri WHERE { ?uri wdt:P31 wd:Q11424 . ?uri wdt:P57 wd:Q2001 }";

    fn dir() -> TranslationDirection {
        ProfileRegistry::with_builtins().direction("DBpedia->Wikidata").unwrap()
    }

    fn er2() -> Er2Doc {
        let mut d = Er2Doc::new("dbpedia", "wikidata");
        d.entries.push(Er2Entry {
            source_id: Iri::new("http://dbpedia.org/ontology/director").unwrap(),
            target_ids: vec![Iri::new("http://www.wikidata.org/entity/P57").unwrap()],
        });
        d
    }

    fn run(candidate: Option<&str>, exec: ExecutionSummary) -> BTreeSet<ErrorLabel> {
        let d = dir();
        let e = er2();
        prescreen(&ScreenInput { candidate, gold_query: GOLD, direction: &d, er2: Some(&e), execution: exec })
    }

    #[test]
    fn source_namespace_is_unadapted() {
        let l = run(
            Some("SELECT ?uri WHERE { ?uri <http://dbpedia.org/ontology/director> <http://www.wikidata.org/entity/Q2001> }"),
            ExecutionSummary::Empty,
        );
        assert!(l.contains(&ErrorLabel::UnadaptedDatasetPatterns));
        assert!(run(Some("SELECT ?u WHERE { ?u dbo:director ?x"), ExecutionSummary::NotExecuted)
            .is_superset(&[ErrorLabel::UnadaptedDatasetPatterns, ErrorLabel::QueryBadFormed].into()));
    }

    #[test]
    fn unparseable_is_bad_formed() {
        assert_eq!(run(Some("SELECT ?x WHERE { ?x ?p"), ExecutionSummary::NotExecuted), [ErrorLabel::QueryBadFormed].into());
        assert_eq!(run(None, ExecutionSummary::NotExecuted), [ErrorLabel::QueryBadFormed].into());
    }

    #[test]
    fn dropped_type_triple() {
        let cand = "PREFIX wd: <http://www.wikidata.org/entity/> PREFIX wdt: <http://www.wikidata.org/prop/direct/> SELECT DISTINCT ?uri WHERE { ?uri wdt:P57 wd:Q2001 }";
        assert_eq!(
            run(Some(cand), ExecutionSummary::Empty),
            [ErrorLabel::MissingTypeAssertion].into()
        );
    }

    #[test]
    fn mapped_alternative_is_not_wrong() {
        // wd:P57 from er2 and wdt:P57 in the candidate are the same property.
        let cand = "SELECT DISTINCT ?uri WHERE { ?uri wdt:P31 wd:Q11424 . ?uri wdt:P57 wd:Q2001 }";
        assert_eq!(run(Some(cand), ExecutionSummary::Mismatch), [ErrorLabel::StructuralError].into());
        let cand = "SELECT DISTINCT ?uri WHERE { ?uri wdt:P31 wd:Q11424 . ?uri wdt:P58 wd:Q2001 }";
        assert_eq!(run(Some(cand), ExecutionSummary::Empty), [ErrorLabel::WrongOrMissingProperty].into());
    }

    #[test]
    fn slot_misuse_both_ways() {
        let cand = "SELECT DISTINCT ?uri WHERE { ?uri wdt:P31 wd:Q11424 . ?uri wd:Q2001 wd:P57 }";
        let l = run(Some(cand), ExecutionSummary::Empty);
        assert!(l.contains(&ErrorLabel::EntityAsProperty) && l.contains(&ErrorLabel::PropertyAsEntity), "{l:?}");
    }
}
