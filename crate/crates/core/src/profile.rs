//! Knowledge-graph profiles: namespaces, endpoint, type property.
//!
//! Profiles are plain data. Four ship built in; more can be loaded from a
//! TOML file of this shape:
//!
//! ```toml
//! [[profiles]]
//! name = "DBpedia"
//! endpoint_url = "https://dbpedia.org/sparql"
//! entity_namespaces = ["http://dbpedia.org/resource/"]
//! property_namespaces = ["http://dbpedia.org/ontology/", "http://dbpedia.org/property/"]
//! class_namespaces = ["http://dbpedia.org/ontology/"]
//! type_property = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
//! identifier_style = "human_readable"   # or "numeric"
//! er2_key = "dbpedia"                   # optional; defaults to the lowercased name
//!
//! [profiles.prefixes]
//! dbo = "http://dbpedia.org/ontology/"
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sparql::{Iri, PrefixTable, Role, RDF_TYPE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentifierStyle {
    HumanReadable,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KgProfile {
    pub name: String,
    pub endpoint_url: String,
    #[serde(default)]
    pub prefixes: PrefixTable,
    pub entity_namespaces: Vec<String>,
    pub property_namespaces: Vec<String>,
    pub class_namespaces: Vec<String>,
    pub type_property: String,
    pub identifier_style: IdentifierStyle,
    /// Key stem used in er2 documents (`"<er2_key>_id"`).
    pub er2_key: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("config error at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

impl KgProfile {
    pub fn dbpedia() -> Self {
        KgProfile {
            name: "DBpedia".into(),
            endpoint_url: "https://dbpedia.org/sparql".into(),
            prefixes: prefixes(&[
                ("dbo", "http://dbpedia.org/ontology/"),
                ("dbr", "http://dbpedia.org/resource/"),
                ("res", "http://dbpedia.org/resource/"),
                ("dbp", "http://dbpedia.org/property/"),
                ("yago", "http://dbpedia.org/class/yago/"),
                ("foaf", "http://xmlns.com/foaf/0.1/"),
            ]),
            entity_namespaces: vec!["http://dbpedia.org/resource/".into()],
            property_namespaces: vec![
                "http://dbpedia.org/ontology/".into(),
                "http://dbpedia.org/property/".into(),
            ],
            class_namespaces: vec![
                "http://dbpedia.org/ontology/".into(),
                "http://dbpedia.org/class/yago/".into(),
            ],
            type_property: RDF_TYPE.into(),
            identifier_style: IdentifierStyle::HumanReadable,
            er2_key: "dbpedia".into(),
        }
    }

    pub fn wikidata() -> Self {
        KgProfile {
            name: "Wikidata".into(),
            endpoint_url: "https://query.wikidata.org/sparql".into(),
            prefixes: prefixes(&[
                ("wd", "http://www.wikidata.org/entity/"),
                ("wdt", "http://www.wikidata.org/prop/direct/"),
                ("p", "http://www.wikidata.org/prop/"),
                ("ps", "http://www.wikidata.org/prop/statement/"),
                ("pq", "http://www.wikidata.org/prop/qualifier/"),
                ("wikibase", "http://wikiba.se/ontology#"),
                ("schema", "http://schema.org/"),
            ]),
            entity_namespaces: vec!["http://www.wikidata.org/entity/".into()],
            // `wd:P57` is the property entity itself; the longer namespace
            // makes it a property rather than an entity.
            property_namespaces: vec![
                "http://www.wikidata.org/prop/direct/".into(),
                "http://www.wikidata.org/prop/statement/".into(),
                "http://www.wikidata.org/prop/qualifier/".into(),
                "http://www.wikidata.org/prop/".into(),
                "http://www.wikidata.org/entity/P".into(),
            ],
            class_namespaces: vec!["http://www.wikidata.org/entity/".into()],
            type_property: "http://www.wikidata.org/prop/direct/P31".into(),
            identifier_style: IdentifierStyle::Numeric,
            er2_key: "wikidata".into(),
        }
    }

    pub fn dblp() -> Self {
        KgProfile {
            name: "DBLP".into(),
            endpoint_url: "https://sparql.dblp.org/sparql".into(),
            prefixes: prefixes(&[
                ("dblp", "https://dblp.org/rdf/schema#"),
                ("dblpp", "https://dblp.org/pid/"),
                ("dblpr", "https://dblp.org/rec/"),
            ]),
            entity_namespaces: vec![
                "https://dblp.org/pid/".into(),
                "https://dblp.org/rec/".into(),
                "https://dblp.org/streams/".into(),
            ],
            property_namespaces: vec!["https://dblp.org/rdf/schema#".into()],
            class_namespaces: vec!["https://dblp.org/rdf/schema#".into()],
            type_property: RDF_TYPE.into(),
            identifier_style: IdentifierStyle::HumanReadable,
            er2_key: "dblp".into(),
        }
    }

    pub fn openalex() -> Self {
        KgProfile {
            name: "OpenAlex".into(),
            endpoint_url: "https://semopenalex.org/sparql".into(),
            prefixes: prefixes(&[
                ("oa", "https://semopenalex.org/ontology/"),
                ("soa", "https://semopenalex.org/ontology/"),
                ("dcterms", "http://purl.org/dc/terms/"),
                ("foaf", "http://xmlns.com/foaf/0.1/"),
            ]),
            entity_namespaces: vec![
                "https://semopenalex.org/author/".into(),
                "https://semopenalex.org/work/".into(),
                "https://semopenalex.org/authorship/".into(),
                "https://semopenalex.org/institution/".into(),
                "https://semopenalex.org/source/".into(),
                "https://semopenalex.org/concept/".into(),
            ],
            property_namespaces: vec![
                "https://semopenalex.org/ontology/".into(),
                "http://purl.org/dc/terms/".into(),
                "http://xmlns.com/foaf/0.1/".into(),
            ],
            class_namespaces: vec!["https://semopenalex.org/ontology/".into()],
            type_property: RDF_TYPE.into(),
            identifier_style: IdentifierStyle::Numeric,
            er2_key: "openalex".into(),
        }
    }

    pub fn builtins() -> Vec<KgProfile> {
        vec![Self::dbpedia(), Self::wikidata(), Self::dblp(), Self::openalex()]
    }

    /// Roles whose namespace list holds the longest prefix of `iri`.
    /// Several roles come back only when they share that namespace.
    pub fn namespace_roles(&self, iri: &str) -> Vec<Role> {
        let lists = [
            (Role::Entity, &self.entity_namespaces),
            (Role::Property, &self.property_namespaces),
            (Role::Class, &self.class_namespaces),
        ];
        let best = |ns: &Vec<String>| {
            ns.iter().filter(|n| iri.starts_with(n.as_str())).map(|n| n.len()).max()
        };
        let lens: Vec<(Role, Option<usize>)> = lists.iter().map(|(r, ns)| (*r, best(ns))).collect();
        let Some(max) = lens.iter().filter_map(|(_, l)| *l).max() else {
            return Vec::new();
        };
        lens.into_iter().filter(|(_, l)| *l == Some(max)).map(|(r, _)| r).collect()
    }

    /// True when `iri` falls in any of this profile's namespaces.
    pub fn owns(&self, iri: &str) -> bool {
        self.all_namespaces().any(|ns| iri.starts_with(ns))
    }

    pub fn all_namespaces(&self) -> impl Iterator<Item = &str> {
        self.entity_namespaces
            .iter()
            .chain(&self.property_namespaces)
            .chain(&self.class_namespaces)
            .map(String::as_str)
    }

    /// Name of the environment variable that overrides the endpoint.
    pub fn endpoint_env_var(&self) -> String {
        let mut v = String::from("SPARQL_ENDPOINT_");
        v.extend(
            self.name
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' }),
        );
        v
    }

    fn validate(&self, at: &str) -> Result<(), ConfigError> {
        let field = |f: &str| format!("{at}.{f}");
        if self.name.trim().is_empty() {
            return Err(ConfigError::new(field("name"), "must not be empty"));
        }
        check_url(&self.endpoint_url).map_err(|m| ConfigError::new(field("endpoint_url"), m))?;
        if self.type_property.is_empty() {
            return Err(ConfigError::new(field("type_property"), "must not be empty"));
        }
        Iri::new(self.type_property.clone())
            .map_err(|e| ConfigError::new(field("type_property"), e.to_string()))?;
        for (list, name) in [
            (&self.entity_namespaces, "entity_namespaces"),
            (&self.property_namespaces, "property_namespaces"),
            (&self.class_namespaces, "class_namespaces"),
        ] {
            for (i, ns) in list.iter().enumerate() {
                Iri::new(ns.clone())
                    .map_err(|e| ConfigError::new(format!("{at}.{name}[{i}]"), e.to_string()))?;
            }
        }
        // Entity and property lists may never share an exact namespace: no
        // slot could then tell an entity from a property.
        if let Some((i, ns)) = self
            .property_namespaces
            .iter()
            .enumerate()
            .find(|(_, ns)| self.entity_namespaces.contains(ns))
        {
            return Err(ConfigError::new(
                format!("{at}.property_namespaces[{i}]"),
                format!("{ns} is also an entity namespace"),
            ));
        }
        if self.entity_namespaces.is_empty() && self.property_namespaces.is_empty() {
            return Err(ConfigError::new(field("entity_namespaces"), "no namespaces declared"));
        }
        Ok(())
    }
}

fn prefixes(pairs: &[(&str, &str)]) -> PrefixTable {
    let mut t = PrefixTable::new();
    for (label, ns) in pairs {
        t.insert(*label, Iri::new(*ns).expect("builtin namespace"));
    }
    t
}

fn check_url(url: &str) -> Result<(), String> {
    if url.starts_with("http://") || url.starts_with("https://") {
        if url.chars().any(char::is_whitespace) {
            Err("URL contains whitespace".into())
        } else {
            Ok(())
        }
    } else {
        Err(format!("not an http(s) URL: {url:?}"))
    }
}

/// A source/target pair of profiles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationDirection {
    pub source: KgProfile,
    pub target: KgProfile,
}

impl TranslationDirection {
    pub fn new(source: KgProfile, target: KgProfile) -> Result<Self, ConfigError> {
        if source.name == target.name {
            return Err(ConfigError::new(
                "direction",
                format!("source and target are both {}", source.name),
            ));
        }
        Ok(TranslationDirection { source, target })
    }

    /// `"DBpedia->Wikidata"`.
    pub fn key(&self) -> String {
        format!("{}->{}", self.source.name, self.target.name)
    }

    pub fn reversed(&self) -> Self {
        TranslationDirection { source: self.target.clone(), target: self.source.clone() }
    }
}

impl fmt::Display for TranslationDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.source.name, self.target.name)
    }
}

/// Profiles indexed by name (case-insensitive lookup).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileRegistry {
    profiles: BTreeMap<String, KgProfile>,
}

impl Default for ProfileRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ProfileRegistry {
    pub fn empty() -> Self {
        ProfileRegistry { profiles: BTreeMap::new() }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        for p in KgProfile::builtins() {
            r.register(p);
        }
        r
    }

    /// Adds or replaces the profile with the same name.
    pub fn register(&mut self, profile: KgProfile) {
        self.profiles.insert(profile.name.to_ascii_lowercase(), profile);
    }

    pub fn get(&self, name: &str) -> Option<&KgProfile> {
        self.profiles.get(&name.to_ascii_lowercase())
    }

    pub fn require(&self, name: &str) -> Result<&KgProfile, ConfigError> {
        self.get(name)
            .ok_or_else(|| ConfigError::new("profile", format!("unknown knowledge graph {name:?}")))
    }

    /// Parses `"DBpedia->Wikidata"`.
    pub fn direction(&self, key: &str) -> Result<TranslationDirection, ConfigError> {
        let (s, t) = key
            .split_once("->")
            .ok_or_else(|| ConfigError::new("direction", format!("expected SOURCE->TARGET, got {key:?}")))?;
        TranslationDirection::new(self.require(s.trim())?.clone(), self.require(t.trim())?.clone())
    }

    pub fn iter(&self) -> impl Iterator<Item = &KgProfile> {
        self.profiles.values()
    }

    pub fn set_endpoint(&mut self, name: &str, url: impl Into<String>) -> Result<(), ConfigError> {
        let key = self.require(name)?.name.to_ascii_lowercase();
        self.profiles.get_mut(&key).expect("required above").endpoint_url = url.into();
        Ok(())
    }

    /// Applies `SPARQL_ENDPOINT_<NAME>` overrides read through `lookup`.
    pub fn apply_endpoint_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for p in self.profiles.values_mut() {
            if let Some(url) = lookup(&p.endpoint_env_var()) {
                if !url.trim().is_empty() {
                    p.endpoint_url = url.trim().to_string();
                }
            }
        }
    }

    pub fn apply_env_overrides(&mut self) {
        self.apply_endpoint_overrides(|k| std::env::var(k).ok());
    }
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    profiles: Vec<KgProfile>,
}

/// Parses a profile file. Errors carry the path of the offending field,
/// e.g. `profiles[0].endpoint_url`.
pub fn parse_profiles(text: &str) -> Result<Vec<KgProfile>, ConfigError> {
    let doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::new("<file>", e.message().to_string()))?;
    let Some(list) = doc.get("profiles") else {
        return Ok(Vec::new());
    };
    let list = list
        .as_array()
        .ok_or_else(|| ConfigError::new("profiles", "expected an array of tables"))?;
    let mut out = Vec::with_capacity(list.len());
    for (i, entry) in list.iter().enumerate() {
        let at = format!("profiles[{i}]");
        let table = entry
            .as_table()
            .ok_or_else(|| ConfigError::new(&at, "expected a table"))?;
        let profile = read_profile(table, &at)?;
        profile.validate(&at)?;
        out.push(profile);
    }
    Ok(out)
}

fn read_profile(t: &toml::Table, at: &str) -> Result<KgProfile, ConfigError> {
    let path = |f: &str| format!("{at}.{f}");
    let string = |f: &str| -> Result<String, ConfigError> {
        match t.get(f) {
            None => Err(ConfigError::new(path(f), "missing required field")),
            Some(v) => v
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| ConfigError::new(path(f), "expected a string")),
        }
    };
    let list = |f: &str| -> Result<Vec<String>, ConfigError> {
        match t.get(f) {
            None => Ok(Vec::new()),
            Some(v) => {
                let arr = v.as_array().ok_or_else(|| ConfigError::new(path(f), "expected an array"))?;
                arr.iter()
                    .enumerate()
                    .map(|(i, x)| {
                        x.as_str()
                            .map(str::to_string)
                            .ok_or_else(|| ConfigError::new(format!("{at}.{f}[{i}]"), "expected a string"))
                    })
                    .collect()
            }
        }
    };
    let name = string("name")?;
    let identifier_style = match string("identifier_style")?.as_str() {
        "human_readable" => IdentifierStyle::HumanReadable,
        "numeric" => IdentifierStyle::Numeric,
        other => {
            return Err(ConfigError::new(
                path("identifier_style"),
                format!("expected human_readable or numeric, got {other:?}"),
            ))
        }
    };
    let mut prefix_table = PrefixTable::new();
    if let Some(v) = t.get("prefixes") {
        let pt = v.as_table().ok_or_else(|| ConfigError::new(path("prefixes"), "expected a table"))?;
        for (label, ns) in pt {
            let at = format!("{at}.prefixes.{label}");
            let ns = ns.as_str().ok_or_else(|| ConfigError::new(&at, "expected a string"))?;
            let iri = Iri::new(ns).map_err(|e| ConfigError::new(&at, e.to_string()))?;
            prefix_table.insert(label.clone(), iri);
        }
    }
    let er2_key = match t.get("er2_key") {
        Some(_) => string("er2_key")?,
        None => name.to_ascii_lowercase(),
    };
    Ok(KgProfile {
        endpoint_url: string("endpoint_url")?,
        prefixes: prefix_table,
        entity_namespaces: list("entity_namespaces")?,
        property_namespaces: list("property_namespaces")?,
        class_namespaces: list("class_namespaces")?,
        type_property: string("type_property")?,
        identifier_style,
        er2_key,
        name,
    })
}

/// Serializes profiles in the same format [`parse_profiles`] reads.
pub fn profiles_to_toml(profiles: &[KgProfile]) -> String {
    toml::to_string(&ProfileFile { profiles: profiles.to_vec() }).expect("profiles serialize")
}

/// Built-in profiles, then the ones in `path` (replacing same-named ones),
/// then environment endpoint overrides.
pub fn load_profiles(path: Option<&Path>) -> Result<ProfileRegistry, ConfigError> {
    let mut reg = ProfileRegistry::with_builtins();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))?;
        for p in parse_profiles(&text)? {
            reg.register(p);
        }
    }
    reg.apply_env_overrides();
    Ok(reg)
}
