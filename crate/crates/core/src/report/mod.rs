//! Accuracy and error tables with text, CSV and SVG renderings. All output
//! is a pure function of the records, so bytes are stable for fixed input.
//!
//! CSV headers:
//!
//! ```text
//! accuracy.csv      direction,model,strategy,correct,incorrect,failed,n,accuracy_pct
//! errors.csv        code,label,<one column per direction>
//! cooccurrence.csv  direction,label,given,count,percent
//! categories.csv    direction,category,annotated_runs,mean_labels
//! ```

mod svg;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::QuestionCategory;
use crate::pipeline::{Outcome, RunRecord};
use crate::prompt::Strategy;
use crate::taxonomy::{cooccurrence_matrix, Annotation, CooccurrenceMatrix, ErrorLabel};

pub use svg::{accuracy_svg, errors_svg};

/// A published reference figure, printed as a footnote under accuracy
/// tables. Not an expectation of any run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceRow {
    pub model: &'static str,
    pub strategy: Strategy,
    pub direction: &'static str,
    pub correct: usize,
    pub n: usize,
}

pub const REFERENCE_ROW: ReferenceRow = ReferenceRow {
    model: "Mistral-Large-Instruct-2407",
    strategy: Strategy::FewShotEr,
    direction: "Wikidata->DBpedia",
    correct: 86,
    n: 100,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub direction: String,
    pub model: String,
    pub strategy: Strategy,
    pub correct: usize,
    /// Executed but wrong answer.
    pub incorrect: usize,
    /// No executable query or execution error.
    pub failed: usize,
    pub n: usize,
}

impl AccuracyRow {
    pub fn percent(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.correct as f64 * 100.0 / self.n as f64
        }
    }
}

/// Rows sorted by direction, model, then strategy.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyTable {
    pub rows: Vec<AccuracyRow>,
}

pub fn accuracy_table(records: &[RunRecord]) -> AccuracyTable {
    let mut map: BTreeMap<(String, String, Strategy), AccuracyRow> = BTreeMap::new();
    for r in records {
        let row = map.entry((r.direction.clone(), r.model_id.clone(), r.strategy)).or_insert_with(|| AccuracyRow {
            direction: r.direction.clone(),
            model: r.model_id.clone(),
            strategy: r.strategy,
            correct: 0,
            incorrect: 0,
            failed: 0,
            n: 0,
        });
        row.n += 1;
        match r.outcome {
            Outcome::Correct => row.correct += 1,
            Outcome::Incorrect => row.incorrect += 1,
            Outcome::Failed => row.failed += 1,
        }
    }
    AccuracyTable { rows: map.into_values().collect() }
}

impl AccuracyTable {
    pub fn directions(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.rows.iter().map(|r| r.direction.as_str()).collect();
        v.dedup();
        v
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for d in self.directions() {
            let _ = writeln!(s, "Correctly translated queries: {d}");
            let _ = writeln!(
                s,
                "{:<32} {:<10} {:>7} {:>9} {:>6} {:>5} {:>7}",
                "model", "strategy", "correct", "incorrect", "failed", "n", "acc%"
            );
            for r in self.rows.iter().filter(|r| r.direction == d) {
                let _ = writeln!(
                    s,
                    "{:<32} {:<10} {:>7} {:>9} {:>6} {:>5} {:>7.1}",
                    r.model,
                    r.strategy.name(),
                    r.correct,
                    r.incorrect,
                    r.failed,
                    r.n,
                    r.percent()
                );
            }
            s.push('\n');
        }
        let rf = REFERENCE_ROW;
        let _ = writeln!(
            s,
            "reference: {} {} {} = {}/{}",
            rf.model,
            rf.strategy.name(),
            rf.direction,
            rf.correct,
            rf.n
        );
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["direction", "model", "strategy", "correct", "incorrect", "failed", "n", "accuracy_pct"])
            .expect("in-memory csv");
        for r in &self.rows {
            w.write_record([
                r.direction.clone(),
                r.model.clone(),
                r.strategy.name().to_string(),
                r.correct.to_string(),
                r.incorrect.to_string(),
                r.failed.to_string(),
                r.n.to_string(),
                format!("{:.1}", r.percent()),
            ])
            .expect("in-memory csv");
        }
        csv_string(w)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStat {
    pub annotated_runs: usize,
    pub mean_labels: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionErrors {
    pub direction: String,
    pub target: String,
    /// Indexed by [`ErrorLabel::index`].
    pub counts: [usize; 8],
    pub cooccurrence: CooccurrenceMatrix,
    pub by_category: BTreeMap<QuestionCategory, CategoryStat>,
}

impl DirectionErrors {
    pub fn count(&self, l: ErrorLabel) -> usize {
        self.counts[l.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub directions: Vec<DirectionErrors>,
}

/// Tallies annotations per direction of their run. Annotations whose run is
/// not among `records`, or whose run was correct, are ignored.
pub fn error_report(annotations: &[Annotation], records: &[RunRecord]) -> ErrorReport {
    let by_id: BTreeMap<&str, &RunRecord> = records.iter().map(|r| (r.run_id.as_str(), r)).collect();
    let dirs: BTreeSet<&str> = records.iter().map(|r| r.direction.as_str()).collect();
    let mut report = ErrorReport::default();
    for d in dirs {
        let anns: Vec<(&Annotation, &RunRecord)> = annotations
            .iter()
            .filter_map(|a| by_id.get(a.run_id.as_str()).map(|r| (a, *r)))
            .filter(|(_, r)| r.direction == d && r.outcome != Outcome::Correct)
            .collect();
        let mut counts = [0usize; 8];
        for (a, _) in &anns {
            for l in &a.labels {
                counts[l.index()] += 1;
            }
        }
        let own: Vec<Annotation> = anns.iter().map(|(a, _)| (*a).clone()).collect();
        let mut sums: BTreeMap<QuestionCategory, (usize, usize)> = BTreeMap::new();
        for (a, r) in &anns {
            if let Some(c) = r.category {
                let e = sums.entry(c).or_default();
                e.0 += 1;
                e.1 += a.labels.len();
            }
        }
        let by_category = sums
            .into_iter()
            .map(|(c, (n, labels))| (c, CategoryStat { annotated_runs: n, mean_labels: labels as f64 / n as f64 }))
            .collect();
        report.directions.push(DirectionErrors {
            direction: d.to_string(),
            target: d.rsplit("->").next().unwrap_or(d).to_string(),
            counts,
            cooccurrence: cooccurrence_matrix(&own),
            by_category,
        });
    }
    report
}

impl ErrorReport {
    pub fn to_text(&self) -> String {
        let mut s = String::from("Distribution of error types\n");
        let _ = write!(s, "{:<60}", "Error category");
        for d in &self.directions {
            let _ = write!(s, " {:>20}", format!("Target KG: {}", d.target));
        }
        s.push('\n');
        for l in ErrorLabel::TABLE_ORDER {
            let _ = write!(s, "{:<60}", l.table_label());
            for d in &self.directions {
                let _ = write!(s, " {:>20}", d.count(l));
            }
            s.push('\n');
        }
        let _ = write!(s, "{:<60}", "Total error instances logged");
        for d in &self.directions {
            let _ = write!(s, " {:>20}", d.total());
        }
        s.push_str("\n\n");
        for d in &self.directions {
            let _ = writeln!(s, "Co-occurrence with Structural Error ({}):", d.direction);
            for l in ErrorLabel::TABLE_ORDER.into_iter().filter(|l| *l != ErrorLabel::StructuralError) {
                if d.cooccurrence.total(l) > 0 {
                    let _ = writeln!(
                        s,
                        "  {:<40} {:>5.1}% of {}",
                        l.code(),
                        d.cooccurrence.percent(l, ErrorLabel::StructuralError),
                        d.cooccurrence.total(l)
                    );
                }
            }
            let _ = writeln!(s, "Mean distinct labels per question category ({}):", d.direction);
            for (c, st) in &d.by_category {
                let _ = writeln!(s, "  {:<24} {:>5.2} over {} runs", c.name(), st.mean_labels, st.annotated_runs);
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["code".to_string(), "label".to_string()];
        header.extend(self.directions.iter().map(|d| d.direction.clone()));
        w.write_record(&header).expect("in-memory csv");
        for l in ErrorLabel::TABLE_ORDER {
            let mut row = vec![l.code().to_string(), l.table_label().to_string()];
            row.extend(self.directions.iter().map(|d| d.count(l).to_string()));
            w.write_record(&row).expect("in-memory csv");
        }
        let mut total = vec!["Total".to_string(), "Total error instances logged".to_string()];
        total.extend(self.directions.iter().map(|d| d.total().to_string()));
        w.write_record(&total).expect("in-memory csv");
        csv_string(w)
    }

    /// P(label | given) for every ordered pair with a non-zero `given`.
    pub fn cooccurrence_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["direction", "label", "given", "count", "percent"]).expect("in-memory csv");
        for d in &self.directions {
            for given in ErrorLabel::TABLE_ORDER {
                if d.cooccurrence.total(given) == 0 {
                    continue;
                }
                for l in ErrorLabel::TABLE_ORDER.into_iter().filter(|l| *l != given) {
                    w.write_record([
                        d.direction.clone(),
                        l.code().to_string(),
                        given.code().to_string(),
                        d.cooccurrence.count(given, l).to_string(),
                        format!("{:.1}", d.cooccurrence.percent(given, l)),
                    ])
                    .expect("in-memory csv");
                }
            }
        }
        csv_string(w)
    }

    pub fn categories_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["direction", "category", "annotated_runs", "mean_labels"]).expect("in-memory csv");
        for d in &self.directions {
            for (c, st) in &d.by_category {
                w.write_record([
                    d.direction.clone(),
                    c.name().to_string(),
                    st.annotated_runs.to_string(),
                    format!("{:.3}", st.mean_labels),
                ])
                .expect("in-memory csv");
            }
        }
        csv_string(w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Csv,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "txt" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            _ => Err(format!("unknown format {s:?} (text, csv, svg)")),
        }
    }
}

/// Writes the requested renderings into `dir`; returns the paths written.
/// SVG is skipped for tables without rows.
pub fn emit_outputs(
    accuracy: &AccuracyTable,
    errors: &ErrorReport,
    formats: &BTreeSet<Format>,
    dir: &Path,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files: Vec<(&str, String)> = Vec::new();
    if formats.contains(&Format::Text) {
        files.push(("accuracy.txt", accuracy.to_text()));
        files.push(("errors.txt", errors.to_text()));
    }
    if formats.contains(&Format::Csv) {
        files.push(("accuracy.csv", accuracy.to_csv()));
        files.push(("errors.csv", errors.to_csv()));
        files.push(("cooccurrence.csv", errors.cooccurrence_csv()));
        files.push(("categories.csv", errors.categories_csv()));
    }
    if formats.contains(&Format::Svg) {
        if !accuracy.rows.is_empty() {
            files.push(("accuracy.svg", accuracy_svg(accuracy)));
        }
        if !errors.directions.is_empty() {
            files.push(("errors.svg", errors_svg(errors)));
        }
    }
    let mut out = Vec::new();
    for (name, body) in files {
        let p = dir.join(name);
        crate::util::write_atomic(&p, body.as_bytes())?;
        out.push(p);
    }
    Ok(out)
}
