//! The er2 document: `[{"dbpedia_id": "...", "wikidata_ids": ["..."]}, ...]`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use super::TermMapping;
use crate::sparql::Iri;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Er2Entry {
    pub source_id: Iri,
    pub target_ids: Vec<Iri>,
}

impl From<&TermMapping> for Er2Entry {
    fn from(m: &TermMapping) -> Self {
        Er2Entry { source_id: m.source_id.clone(), target_ids: m.target_ids.clone() }
    }
}

/// er2 entries plus the key stems used to render them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Er2Doc {
    /// e.g. `dbpedia` renders as `"dbpedia_id"`.
    pub source_key: String,
    /// e.g. `wikidata` renders as `"wikidata_ids"`.
    pub target_key: String,
    pub entries: Vec<Er2Entry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Er2Style {
    /// One line, `", "` and `": "` separators.
    Compact,
    /// As in prompts: each entry's target list on its own line.
    Prompt,
}

fn js(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

impl Er2Doc {
    pub fn new(source_key: impl Into<String>, target_key: impl Into<String>) -> Self {
        Er2Doc { source_key: source_key.into(), target_key: target_key.into(), entries: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn render(&self, style: Er2Style) -> String {
        let sep = match style {
            Er2Style::Compact => " ",
            Er2Style::Prompt => "\n",
        };
        let items: Vec<String> = self
            .entries
            .iter()
            .map(|e| {
                let targets: Vec<String> = e.target_ids.iter().map(|t| js(t.as_str())).collect();
                format!(
                    "{{{}: {},{sep}{}: [{}]}}",
                    js(&format!("{}_id", self.source_key)),
                    js(e.source_id.as_str()),
                    js(&format!("{}_ids", self.target_key)),
                    targets.join(", ")
                )
            })
            .collect();
        format!("[{}]", items.join(&format!(",{sep}")))
    }

    fn to_value(&self) -> Value {
        Value::Array(
            self.entries
                .iter()
                .map(|e| {
                    let mut m = Map::new();
                    m.insert(format!("{}_id", self.source_key), Value::String(e.source_id.to_string()));
                    m.insert(
                        format!("{}_ids", self.target_key),
                        Value::Array(e.target_ids.iter().map(|t| Value::String(t.to_string())).collect()),
                    );
                    Value::Object(m)
                })
                .collect(),
        )
    }

    /// Parses an er2 array with known key stems. Accepts `<target>_id` or
    /// `<target>_ids`, each as a string or a list of strings.
    pub fn from_value_with_keys(v: &Value, source_key: &str, target_key: &str) -> Result<Self, String> {
        let arr = v.as_array().ok_or("er2 is not an array")?;
        let mut doc = Er2Doc::new(source_key, target_key);
        let sk = format!("{source_key}_id");
        for (i, item) in arr.iter().enumerate() {
            let o = item.as_object().ok_or_else(|| format!("er2[{i}] is not an object"))?;
            let src = o
                .get(&sk)
                .and_then(Value::as_str)
                .ok_or_else(|| format!("er2[{i}] lacks string key {sk:?}"))?;
            let tv = o
                .get(&format!("{target_key}_ids"))
                .or_else(|| o.get(&format!("{target_key}_id")))
                .ok_or_else(|| format!("er2[{i}] lacks key {target_key}_id(s)"))?;
            doc.entries.push(Er2Entry {
                source_id: Iri::new(src).map_err(|e| format!("er2[{i}]: {e}"))?,
                target_ids: iri_list(tv).map_err(|e| format!("er2[{i}]: {e}"))?,
            });
        }
        Ok(doc)
    }

    /// Parses an er2 array inferring key stems: the source key holds a
    /// string and ends in `_id`; the target key holds a list.
    pub fn from_value(v: &Value) -> Result<Self, String> {
        let arr = v.as_array().ok_or("er2 is not an array")?;
        let Some(first) = arr.first() else {
            return Ok(Er2Doc::new("", ""));
        };
        let o = first.as_object().ok_or("er2[0] is not an object")?;
        let source = o
            .iter()
            .find(|(k, v)| k.ends_with("_id") && v.is_string())
            .map(|(k, _)| k.trim_end_matches("_id").to_string());
        let target = o
            .iter()
            .find(|(_, v)| v.is_array())
            .map(|(k, _)| k.trim_end_matches("_ids").trim_end_matches("_id").to_string());
        match (source, target) {
            (Some(s), Some(t)) if s != t => Self::from_value_with_keys(v, &s, &t),
            _ => Err("cannot infer er2 keys; the target ids must be a list".into()),
        }
    }
}

fn iri_list(v: &Value) -> Result<Vec<Iri>, String> {
    match v {
        Value::String(s) => Ok(vec![Iri::new(s.clone()).map_err(|e| e.to_string())?]),
        Value::Array(a) => a
            .iter()
            .map(|x| {
                x.as_str()
                    .ok_or_else(|| "target id is not a string".to_string())
                    .and_then(|s| Iri::new(s).map_err(|e| e.to_string()))
            })
            .collect(),
        _ => Err("target ids must be a string or a list".into()),
    }
}

impl Serialize for Er2Doc {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Er2Doc {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Er2Doc::from_value(&v).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kubrick() -> Er2Doc {
        let mut d = Er2Doc::new("dbpedia", "wikidata");
        d.entries.push(Er2Entry {
            source_id: Iri::new("http://dbpedia.org/ontology/director").unwrap(),
            target_ids: vec![Iri::new("http://www.wikidata.org/entity/P57").unwrap()],
        });
        d.entries.push(Er2Entry {
            source_id: Iri::new("http://dbpedia.org/resource/Stanley_Kubrick").unwrap(),
            target_ids: vec![Iri::new("http://www.wikidata.org/entity/Q2001").unwrap()],
        });
        d
    }

    #[test]
    fn renders_prompt_layout() {
        assert_eq!(
            kubrick().render(Er2Style::Prompt),
            "[{\"dbpedia_id\": \"http://dbpedia.org/ontology/director\",\n\"wikidata_ids\": [\"http://www.wikidata.org/entity/P57\"]},\n{\"dbpedia_id\": \"http://dbpedia.org/resource/Stanley_Kubrick\",\n\"wikidata_ids\": [\"http://www.wikidata.org/entity/Q2001\"]}]"
        );
        assert_eq!(Er2Doc::new("a", "b").render(Er2Style::Compact), "[]");
    }

    #[test]
    fn compact_render_is_valid_json_and_round_trips() {
        let d = kubrick();
        let v: Value = serde_json::from_str(&d.render(Er2Style::Compact)).unwrap();
        assert_eq!(Er2Doc::from_value(&v).unwrap(), d);
        let v: Value = serde_json::from_str(&d.render(Er2Style::Prompt)).unwrap();
        assert_eq!(Er2Doc::from_value(&v).unwrap(), d);
    }

    #[test]
    fn accepts_singular_target_key() {
        let v: Value = serde_json::from_str(
            r#"[{"dbpedia_id": "http://dbpedia.org/ontology/director", "wikidata_id": "http://www.wikidata.org/entity/P57"}]"#,
        )
        .unwrap();
        let d = Er2Doc::from_value_with_keys(&v, "dbpedia", "wikidata").unwrap();
        assert_eq!(d.entries[0].target_ids.len(), 1);
        assert!(Er2Doc::from_value(&v).is_err());
    }
}
