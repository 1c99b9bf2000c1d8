use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BenchError, DatasetManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionCategory {
    #[serde(rename = "Single Fact")]
    SingleFact,
    #[serde(rename = "Comprehensive List")]
    ComprehensiveList,
    #[serde(rename = "Aggregated List")]
    AggregatedList,
    #[serde(rename = "Single Person")]
    SinglePerson,
    #[serde(rename = "Rank or Ordered Info.")]
    RankOrOrdered,
    #[serde(rename = "Numerical Count")]
    NumericalCount,
    #[serde(rename = "Filtered Multi-Entity")]
    FilteredMultiEntity,
}

impl QuestionCategory {
    pub const ALL: [QuestionCategory; 7] = [
        QuestionCategory::SingleFact,
        QuestionCategory::ComprehensiveList,
        QuestionCategory::AggregatedList,
        QuestionCategory::SinglePerson,
        QuestionCategory::RankOrOrdered,
        QuestionCategory::NumericalCount,
        QuestionCategory::FilteredMultiEntity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuestionCategory::SingleFact => "Single Fact",
            QuestionCategory::ComprehensiveList => "Comprehensive List",
            QuestionCategory::AggregatedList => "Aggregated List",
            QuestionCategory::SinglePerson => "Single Person",
            QuestionCategory::RankOrOrdered => "Rank or Ordered Info.",
            QuestionCategory::NumericalCount => "Numerical Count",
            QuestionCategory::FilteredMultiEntity => "Filtered Multi-Entity",
        }
    }
}

impl fmt::Display for QuestionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QuestionCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        QuestionCategory::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

/// Category file: one `id<TAB>category` per line; blank lines and lines
/// starting with `#` are skipped.
pub fn parse_category_file(text: &str) -> Result<Vec<(usize, String, QuestionCategory)>, BenchError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (id, cat) = t.split_once('\t').ok_or_else(|| BenchError::Format {
            index: i + 1,
            message: "expected `id<TAB>category`".into(),
        })?;
        let category = cat
            .parse()
            .map_err(|_| BenchError::UnknownCategory { line: i + 1, value: cat.trim().to_string() })?;
        out.push((i + 1, id.trim().to_string(), category));
    }
    Ok(out)
}

pub fn attach_categories(mut manifest: DatasetManifest, category_file: &str) -> Result<DatasetManifest, BenchError> {
    for (line, id, cat) in parse_category_file(category_file)? {
        let item = manifest
            .items
            .iter_mut()
            .find(|it| it.id == id)
            .ok_or(BenchError::UnknownId { line, id: id.clone() })?;
        item.category = Some(cat);
    }
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryDistribution {
    pub counts: BTreeMap<QuestionCategory, usize>,
    pub uncategorized: usize,
}

impl CategoryDistribution {
    pub fn of(manifest: &DatasetManifest) -> Self {
        let mut counts: BTreeMap<_, _> = QuestionCategory::ALL.iter().map(|c| (*c, 0)).collect();
        let mut uncategorized = 0;
        for it in &manifest.items {
            match it.category {
                Some(c) => *counts.entry(c).or_default() += 1,
                None => uncategorized += 1,
            }
        }
        CategoryDistribution { counts, uncategorized }
    }
}

impl fmt::Display for CategoryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in QuestionCategory::ALL {
            writeln!(f, "{:<24}{:>5}", c.name(), self.counts.get(&c).copied().unwrap_or(0))?;
        }
        if self.uncategorized > 0 {
            writeln!(f, "{:<24}{:>5}", "(none)", self.uncategorized)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::BenchmarkItem;

    fn manifest(n: usize) -> DatasetManifest {
        let mut m = DatasetManifest::new("t", "train", "");
        for i in 0..n {
            m.items.push(BenchmarkItem {
                id: format!("q{i}"),
                nlq: String::new(),
                query_by_kg: Default::default(),
                gold_by_kg: Default::default(),
                category: None,
                er2_by_direction: Default::default(),
            });
        }
        m.count = n;
        m
    }

    #[test]
    fn attach_and_distribution() {
        // Reference shape: 34/18/14/14/10/6/4 over 100 items.
        let shape = [34, 18, 14, 14, 10, 6, 4];
        let mut file = String::from("# id\tcategory\n");
        let mut n = 0;
        for (c, k) in QuestionCategory::ALL.iter().zip(shape) {
            for _ in 0..k {
                file.push_str(&format!("q{n}\t{}\n", c.name()));
                n += 1;
            }
        }
        let m = attach_categories(manifest(100), &file).unwrap();
        let d = CategoryDistribution::of(&m);
        let got: Vec<usize> = QuestionCategory::ALL.iter().map(|c| d.counts[c]).collect();
        assert_eq!(got, shape);
        assert_eq!(d.uncategorized, 0);
    }

    #[test]
    fn empty_file_and_errors() {
        let m = attach_categories(manifest(2), "").unwrap();
        assert!(m.items.iter().all(|i| i.category.is_none()));
        assert!(matches!(attach_categories(manifest(2), "q0\tOther\n"), Err(BenchError::UnknownCategory { line: 1, .. })));
        assert!(matches!(attach_categories(manifest(2), "q9\tSingle Fact\n"), Err(BenchError::UnknownId { .. })));
    }
}
