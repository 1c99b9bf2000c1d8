//! Exact-match comparison of result sets.
//!
//! Variable names are ignored: columns are matched by trying every column
//! correspondence (arity <= 5) or by name-then-value-profile for wider
//! results. Blank nodes match through a bijection built during comparison.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{normalize_term, RdfTerm, ResultKind, ResultSet, TermKind};

const EXHAUSTIVE_MAX_ARITY: usize = 5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompareOptions {
    /// Compare rows as sets instead of multisets.
    pub set_semantics: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComparisonMode {
    Ordered,
    Unordered,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    pub equal: bool,
    pub mode: ComparisonMode,
    /// Gold rows with no counterpart in the candidate.
    pub missing: usize,
    /// Candidate rows with no counterpart in the gold set.
    pub extra: usize,
    /// Same rows, different sequence (ordered mode only).
    #[serde(default)]
    pub misordered: bool,
    #[serde(default)]
    pub arity_mismatch: bool,
    #[serde(default)]
    pub kind_mismatch: bool,
    /// Gold variable -> candidate variable, when columns were matched.
    pub permutation_used: Option<Vec<(String, String)>>,
}

type Cell = Option<RdfTerm>;
type Table = Vec<Vec<Cell>>;

fn table(rs: &ResultSet) -> Table {
    rs.rows
        .iter()
        .map(|r| rs.variables.iter().map(|v| r.get(v).map(normalize_term)).collect())
        .collect()
}

fn project(t: &Table, perm: &[usize]) -> Table {
    t.iter().map(|row| perm.iter().map(|&j| row[j].clone()).collect()).collect()
}

fn has_bnode(t: &Table) -> bool {
    t.iter().flatten().flatten().any(|c| c.kind == TermKind::Bnode)
}

/// Compares `candidate` against `gold`. `order_sensitive` comes from the
/// gold query (top-level ORDER BY).
pub fn compare_results(
    gold: &ResultSet,
    candidate: &ResultSet,
    order_sensitive: bool,
    opts: CompareOptions,
) -> ComparisonOutcome {
    let mode = match (gold.kind, order_sensitive) {
        (ResultKind::Boolean, _) => ComparisonMode::Boolean,
        (_, true) => ComparisonMode::Ordered,
        (_, false) => ComparisonMode::Unordered,
    };
    let unequal = |arity_mismatch: bool, kind_mismatch: bool| ComparisonOutcome {
        equal: false,
        mode,
        missing: gold.len(),
        extra: candidate.len(),
        misordered: false,
        arity_mismatch,
        kind_mismatch,
        permutation_used: None,
    };
    if gold.kind != candidate.kind {
        return unequal(false, true);
    }
    if gold.kind == ResultKind::Boolean {
        let equal = gold.boolean == candidate.boolean;
        return ComparisonOutcome {
            equal,
            mode,
            missing: usize::from(!equal),
            extra: usize::from(!equal),
            misordered: false,
            arity_mismatch: false,
            kind_mismatch: false,
            permutation_used: None,
        };
    }
    if gold.arity() != candidate.arity() {
        return unequal(true, false);
    }
    let g = table(gold);
    let c = table(candidate);
    let ordered = mode == ComparisonMode::Ordered;

    let mut best: Option<(Vec<usize>, RowDiff)> = None;
    for perm in candidate_permutations(gold, candidate, &g, &c) {
        let diff = compare_tables(&g, &project(&c, &perm), ordered, opts.set_semantics);
        let done = diff.equal;
        let better = best.as_ref().is_none_or(|(_, b)| diff.cost() < b.cost());
        if better {
            best = Some((perm, diff));
        }
        if done {
            break;
        }
    }
    let (perm, diff) = best.unwrap_or_else(|| (Vec::new(), compare_tables(&g, &c, ordered, opts.set_semantics)));
    let permutation_used = Some(
        gold.variables
            .iter()
            .cloned()
            .zip(perm.iter().map(|&j| candidate.variables[j].clone()))
            .collect(),
    );
    ComparisonOutcome {
        equal: diff.equal,
        mode,
        missing: if diff.equal { 0 } else { diff.missing },
        extra: if diff.equal { 0 } else { diff.extra },
        misordered: diff.misordered,
        arity_mismatch: false,
        kind_mismatch: false,
        permutation_used,
    }
}

/// Column correspondences to try, best guess first.
fn candidate_permutations(gold: &ResultSet, cand: &ResultSet, g: &Table, c: &Table) -> Vec<Vec<usize>> {
    let n = gold.arity();
    if n <= EXHAUSTIVE_MAX_ARITY {
        let mut all = Vec::new();
        permutations(&mut (0..n).collect::<Vec<_>>(), 0, &mut all);
        all.sort();
        return all;
    }
    // Wide results: same-named columns first, then greedy value overlap.
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (i, v) in gold.variables.iter().enumerate() {
        if let Some(j) = cand.variables.iter().position(|w| w == v) {
            perm[i] = j;
            used[j] = true;
        }
    }
    let profile = |t: &Table, col: usize| {
        let mut m: BTreeMap<Cell, usize> = BTreeMap::new();
        for row in t {
            let cell = row[col].clone().map(|mut x| {
                if x.kind == TermKind::Bnode {
                    x.value.clear();
                }
                x
            });
            *m.entry(cell).or_default() += 1;
        }
        m
    };
    for i in 0..n {
        if perm[i] != usize::MAX {
            continue;
        }
        let gp = profile(g, i);
        let mut best = (0usize, usize::MAX);
        for j in (0..n).filter(|&j| !used[j]) {
            let cp = profile(c, j);
            let overlap: usize = gp.iter().map(|(k, a)| (*a).min(*cp.get(k).unwrap_or(&0))).sum();
            if best.1 == usize::MAX || overlap > best.0 {
                best = (overlap, j);
            }
        }
        perm[i] = best.1;
        used[best.1] = true;
    }
    vec![perm]
}

fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, out);
        items.swap(k, i);
    }
}

#[derive(Debug, Clone)]
struct RowDiff {
    equal: bool,
    missing: usize,
    extra: usize,
    misordered: bool,
}

impl RowDiff {
    fn cost(&self) -> (usize, bool) {
        (self.missing + self.extra, self.misordered)
    }
}

fn dedup_keep_first(t: &Table) -> Table {
    let mut out: Table = Vec::with_capacity(t.len());
    for row in t {
        if !out.contains(row) {
            out.push(row.clone());
        }
    }
    out
}

fn compare_tables(g: &Table, c: &Table, ordered: bool, set_semantics: bool) -> RowDiff {
    let (g, c) = if set_semantics {
        (dedup_keep_first(g), dedup_keep_first(c))
    } else {
        (g.clone(), c.clone())
    };
    let (missing, extra) = multiset_diff(&g, &c);
    let bnodes = has_bnode(&g) || has_bnode(&c);
    let same_multiset = if bnodes {
        g.len() == c.len() && match_unordered(&g, &c)
    } else {
        missing == 0 && extra == 0
    };
    if !ordered {
        return RowDiff { equal: same_multiset, missing, extra, misordered: false };
    }
    let positional = g.len() == c.len()
        && if bnodes {
            let mut map = Bijection::default();
            g.iter().zip(&c).all(|(a, b)| map.unify_row(a, b))
        } else {
            g == c
        };
    RowDiff { equal: positional, missing, extra, misordered: same_multiset && !positional }
}

/// Multiset difference counts with all blank nodes treated as one value.
fn multiset_diff(g: &Table, c: &Table) -> (usize, usize) {
    let key = |row: &Vec<Cell>| -> Vec<Cell> {
        row.iter()
            .map(|cell| {
                cell.clone().map(|mut t| {
                    if t.kind == TermKind::Bnode {
                        t.value.clear();
                    }
                    t
                })
            })
            .collect()
    };
    let mut counts: HashMap<Vec<Cell>, isize> = HashMap::new();
    for r in g {
        *counts.entry(key(r)).or_default() += 1;
    }
    for r in c {
        *counts.entry(key(r)).or_default() -= 1;
    }
    let missing = counts.values().filter(|&&n| n > 0).map(|&n| n as usize).sum();
    let extra = counts.values().filter(|&&n| n < 0).map(|&n| (-n) as usize).sum();
    (missing, extra)
}

#[derive(Debug, Default, Clone)]
struct Bijection {
    fwd: HashMap<String, String>,
    back: HashMap<String, String>,
    log: Vec<String>,
}

impl Bijection {
    fn unify_cell(&mut self, a: &Cell, b: &Cell) -> bool {
        match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) if x.kind == TermKind::Bnode && y.kind == TermKind::Bnode => {
                match (self.fwd.get(&x.value), self.back.get(&y.value)) {
                    (Some(m), _) => *m == y.value,
                    (None, Some(_)) => false,
                    (None, None) => {
                        self.fwd.insert(x.value.clone(), y.value.clone());
                        self.back.insert(y.value.clone(), x.value.clone());
                        self.log.push(x.value.clone());
                        true
                    }
                }
            }
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    fn unify_row(&mut self, a: &[Cell], b: &[Cell]) -> bool {
        a.iter().zip(b).all(|(x, y)| self.unify_cell(x, y))
    }

    fn rollback(&mut self, mark: usize) {
        while self.log.len() > mark {
            let k = self.log.pop().expect("log entry");
            if let Some(v) = self.fwd.remove(&k) {
                self.back.remove(&v);
            }
        }
    }
}

/// Is there a row bijection plus a consistent blank-node bijection?
fn match_unordered(g: &Table, c: &Table) -> bool {
    fn go(i: usize, g: &Table, c: &Table, used: &mut [bool], map: &mut Bijection) -> bool {
        if i == g.len() {
            return true;
        }
        for j in 0..c.len() {
            if used[j] {
                continue;
            }
            let mark = map.log.len();
            if map.unify_row(&g[i], &c[j]) {
                used[j] = true;
                if go(i + 1, g, c, used, map) {
                    return true;
                }
                used[j] = false;
            }
            map.rollback(mark);
        }
        false
    }
    let mut used = vec![false; c.len()];
    go(0, g, c, &mut used, &mut Bijection::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Row;

    fn rs(vars: &[&str], rows: &[&[RdfTerm]]) -> ResultSet {
        ResultSet::bindings(
            vars.iter().map(|v| v.to_string()).collect(),
            rows.iter()
                .map(|r| vars.iter().map(|v| v.to_string()).zip(r.iter().cloned()).collect::<Row>())
                .collect(),
        )
    }

    fn iri(s: &str) -> RdfTerm {
        RdfTerm::iri(format!("http://ex/{s}"))
    }

    #[test]
    fn unordered_ignores_row_order() {
        let a = rs(&["x"], &[&[iri("a")], &[iri("b")]]);
        let b = rs(&["y"], &[&[iri("b")], &[iri("a")]]);
        assert!(compare_results(&a, &b, false, CompareOptions::default()).equal);
        let o = compare_results(&a, &b, true, CompareOptions::default());
        assert!(!o.equal && o.misordered);
        assert_eq!((o.missing, o.extra), (0, 0));
    }

    #[test]
    fn columns_matched_by_permutation() {
        let d = RdfTerm::typed("1928-07-26", "http://www.w3.org/2001/XMLSchema#date");
        let gold = rs(&["uri", "date"], &[&[iri("a"), d.clone()]]);
        let cand = rs(&["d", "x"], &[&[d, iri("a")]]);
        let o = compare_results(&gold, &cand, false, CompareOptions::default());
        assert!(o.equal);
        assert_eq!(
            o.permutation_used.unwrap(),
            vec![("uri".into(), "x".into()), ("date".into(), "d".into())]
        );
    }

    #[test]
    fn arity_kind_and_emptiness() {
        let one = rs(&["x"], &[&[iri("a")]]);
        let two = rs(&["x", "y"], &[&[iri("a"), iri("b")]]);
        let o = compare_results(&one, &two, false, CompareOptions::default());
        assert!(!o.equal && o.arity_mismatch);
        let empty = rs(&["x"], &[]);
        assert!(!compare_results(&one, &empty, false, CompareOptions::default()).equal);
        let o = compare_results(&one, &ResultSet::boolean(true), false, CompareOptions::default());
        assert!(o.kind_mismatch);
        let o = compare_results(&ResultSet::boolean(true), &ResultSet::boolean(true), false, CompareOptions::default());
        assert!(o.equal && o.mode == ComparisonMode::Boolean);
    }

    #[test]
    fn multiset_versus_set() {
        let a = rs(&["x"], &[&[iri("a")], &[iri("a")]]);
        let b = rs(&["x"], &[&[iri("a")]]);
        let o = compare_results(&a, &b, false, CompareOptions::default());
        assert!(!o.equal);
        assert_eq!((o.missing, o.extra), (1, 0));
        assert!(compare_results(&a, &b, false, CompareOptions { set_semantics: true }).equal);
    }

    #[test]
    fn blank_nodes_by_bijection() {
        let a = rs(&["x", "y"], &[&[RdfTerm::bnode("b1"), iri("p")], &[RdfTerm::bnode("b2"), iri("q")]]);
        let b = rs(&["x", "y"], &[&[RdfTerm::bnode("z"), iri("p")], &[RdfTerm::bnode("w"), iri("q")]]);
        assert!(compare_results(&a, &b, false, CompareOptions::default()).equal);
        let c = rs(&["x", "y"], &[&[RdfTerm::bnode("z"), iri("p")], &[RdfTerm::bnode("z"), iri("q")]]);
        assert!(!compare_results(&a, &c, false, CompareOptions::default()).equal);
    }

    #[test]
    fn numeric_forms_normalized_before_compare() {
        let xsd = |l: &str| format!("http://www.w3.org/2001/XMLSchema#{l}");
        let a = rs(&["n"], &[&[RdfTerm::typed("2.50", xsd("decimal"))]]);
        let b = rs(&["n"], &[&[RdfTerm::typed("2.5", xsd("decimal"))]]);
        assert!(compare_results(&a, &b, false, CompareOptions::default()).equal);
    }

    #[test]
    fn wide_results_match_by_name_then_values() {
        let vars = ["a", "b", "c", "d", "e", "f"];
        let row: Vec<RdfTerm> = vars.iter().map(|v| iri(v)).collect();
        let gold = rs(&vars, &[&row]);
        let mut rev_vars = vars;
        rev_vars.reverse();
        let rev_row: Vec<RdfTerm> = row.iter().rev().cloned().collect();
        let renamed: Vec<String> = rev_vars.iter().map(|v| format!("{v}2")).collect();
        let renamed: Vec<&str> = renamed.iter().map(String::as_str).collect();
        let cand = rs(&renamed, &[&rev_row]);
        assert!(compare_results(&gold, &cand, false, CompareOptions::default()).equal);
    }
}
