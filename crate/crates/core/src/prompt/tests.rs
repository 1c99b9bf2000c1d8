use super::*;
use crate::align::Er2Entry;
use crate::sparql::Iri;

const KUBRICK_Q: &str = "PREFIX dbo: <http://dbpedia.org/ontology/> PREFIX res: <http://dbpedia.org/resource/> SELECT DISTINCT ?uri WHERE { ?uri dbo:director res:Stanley_Kubrick }";

fn er2() -> Er2Doc {
    let mut d = Er2Doc::new("dbpedia", "wikidata");
    for (s, t) in [
        ("http://dbpedia.org/ontology/director", "http://www.wikidata.org/entity/P57"),
        ("http://dbpedia.org/resource/Stanley_Kubrick", "http://www.wikidata.org/entity/Q2001"),
    ] {
        d.entries.push(Er2Entry { source_id: Iri::new(s).unwrap(), target_ids: vec![Iri::new(t).unwrap()] });
    }
    d
}

fn exemplar(n: usize) -> Exemplar {
    Exemplar {
        id: format!("ex{n}"),
        nlq: format!("Question {n}?"),
        query_kg1: format!("SELECT ?x WHERE {{ ?x <http://dbpedia.org/ontology/p{n}> ?y }}"),
        query_kg2: format!("SELECT ?x WHERE {{ ?x <http://www.wikidata.org/prop/direct/P{n}> ?y }}"),
        er2: Er2Doc::new("dbpedia", "wikidata"),
    }
}

fn spec(strategy: Strategy) -> PromptSpec {
    let s = PromptSpec::new(strategy, "Which films did Stanley Kubrick direct?", KUBRICK_Q, "DBpedia", "Wikidata");
    let s = if strategy.uses_er2() { s.with_er2(er2()) } else { s };
    if strategy == Strategy::FewShotEr {
        s.with_exemplars((1..=4).map(exemplar).collect())
    } else {
        s
    }
}

#[test]
fn few_shot_reproduces_reference_layout() {
    let golden = include_str!("../../tests/fixtures/golden/kubrick_few_shot_prefix.txt");
    let p = render_prompt(&spec(Strategy::FewShotEr));
    assert!(p.text.starts_with(golden), "{}", p.text);
    let rest = &p.text[golden.len()..];
    assert!(rest.starts_with("}\n\nExample 1:\n"));
    for n in 1..=4 {
        assert!(rest.contains(&format!("Example {n}:")));
    }
    assert_eq!(rest.matches("<sparql>").count(), 4);
}

#[test]
fn zero_shot_er_is_zero_shot_plus_one_block() {
    let z = render_prompt(&spec(Strategy::ZeroShot)).text;
    let e = render_prompt(&spec(Strategy::ZeroShotEr)).text;
    let pre = z.bytes().zip(e.bytes()).take_while(|(a, b)| a == b).count();
    let suf = z.bytes().rev().zip(e.bytes().rev()).take_while(|(a, b)| a == b).count().min(z.len() - pre);
    assert_eq!(z.len(), pre + suf);
    let inserted = &e[pre..e.len() - suf];
    assert!(inserted.contains("er2\": [{\"dbpedia_id\""), "{inserted}");
    assert!(!z.contains("er2"));
}

#[test]
fn tag_instruction_everywhere() {
    for s in Strategy::ALL {
        let p = render_prompt(&spec(s));
        assert!(p.text.contains("<sparql>") && p.text.contains("</sparql>"), "{s}");
        assert_eq!(p, render_prompt(&spec(s)));
    }
}

#[test]
fn cot_variants() {
    let cot = render_prompt(&spec(Strategy::CoT)).text;
    assert!(cot.contains(&format!("\"instruction\": \"{COT_PREFIX} Given")));
    let tags = render_prompt(&spec(Strategy::CoTTags)).text;
    let mut at = 0;
    for (head, _) in THINK_STEPS {
        let i = tags[at..].find(&format!("<think>(")).unwrap() + at;
        assert!(tags[i..].starts_with("<think>(") && tags[i..].contains(head));
        let h = tags[at..].find(head).unwrap() + at;
        assert!(h > at);
        at = h;
    }
    assert_eq!(tags.matches("<think>").count(), 6);
}

#[test]
fn spec_findings() {
    let mut s = spec(Strategy::FewShotEr);
    s.exemplars.as_mut().unwrap().pop();
    assert_eq!(validate_spec(&s).unwrap_err(), vec![SpecFinding::ExemplarCount { found: 3 }]);
    let s = spec(Strategy::ZeroShot).with_er2(er2());
    assert_eq!(validate_spec(&s).unwrap_err(), vec![SpecFinding::ErOnZeroShot]);
    assert!(validate_spec(&spec(Strategy::CoT)).is_ok());
    let mut s = spec(Strategy::CoT);
    s.kg2_name = "dbpedia".into();
    s.instruction = "Answer.".into();
    assert_eq!(validate_spec(&s).unwrap_err(), vec![SpecFinding::SameKg, SpecFinding::MissingTagInstruction]);
}

#[test]
fn digest_tracks_spec_and_template() {
    let a = render_prompt(&spec(Strategy::ZeroShotEr));
    let mut s = spec(Strategy::ZeroShotEr);
    s.nlq.push('!');
    assert_ne!(render_prompt(&s).spec_digest, a.spec_digest);
    assert_eq!(a.spec_digest.len(), 64);
}

#[test]
fn template_override_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cot.txt"), "Q: {{nlq}}\nMap: {{er2}}\n{{instruction}}").unwrap();
    let set = TemplateSet::load_dir(dir.path()).unwrap();
    let p = render_prompt_with(&spec(Strategy::CoT), &set);
    assert!(p.text.starts_with("Q: \"Which films"));
    assert_ne!(p.spec_digest, render_prompt(&spec(Strategy::CoT)).spec_digest);
    assert_eq!(set.get(Strategy::ZeroShot), TemplateSet::builtin().get(Strategy::ZeroShot));

    std::fs::write(dir.path().join("zero_shot.txt"), "{{nlq}} {{er2}} {{instruction}}").unwrap();
    assert!(TemplateSet::load_dir(dir.path()).is_err());
    std::fs::write(dir.path().join("zero_shot.txt"), "{{nlq}} {{bogus}} {{instruction}}").unwrap();
    let e = TemplateSet::load_dir(dir.path()).unwrap_err().to_string();
    assert!(e.contains("bogus"), "{e}");
}

#[test]
fn placeholder_values_are_not_rescanned() {
    let mut s = spec(Strategy::ZeroShot);
    s.nlq = "What is {{instruction}}?".into();
    let p = render_prompt(&s);
    assert!(p.text.contains("What is {{instruction}}?"));
}
