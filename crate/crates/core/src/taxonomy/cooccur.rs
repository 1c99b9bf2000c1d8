use serde::{Deserialize, Serialize};

use super::{Annotation, ErrorLabel};

/// Pairwise label counts over a set of annotations. The diagonal holds how
/// often each label occurs at all.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CooccurrenceMatrix {
    pub counts: [[usize; 8]; 8],
    pub annotations: usize,
}

impl CooccurrenceMatrix {
    pub fn count(&self, a: ErrorLabel, b: ErrorLabel) -> usize {
        self.counts[a.index()][b.index()]
    }

    pub fn total(&self, a: ErrorLabel) -> usize {
        self.count(a, a)
    }

    /// Share of runs labelled `a` that also carry `b`, in percent.
    pub fn percent(&self, a: ErrorLabel, b: ErrorLabel) -> f64 {
        let n = self.total(a);
        if n == 0 {
            0.0
        } else {
            self.count(a, b) as f64 * 100.0 / n as f64
        }
    }
}

pub fn cooccurrence_matrix(annotations: &[Annotation]) -> CooccurrenceMatrix {
    let mut m = CooccurrenceMatrix { annotations: annotations.len(), ..Default::default() };
    for a in annotations {
        for x in &a.labels {
            for y in &a.labels {
                m.counts[x.index()][y.index()] += 1;
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn ann(mask: u8) -> Annotation {
        let labels: BTreeSet<ErrorLabel> =
            ErrorLabel::ALL.into_iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, l)| l).collect();
        Annotation::heuristic(format!("r{mask}"), labels)
    }

    #[test]
    fn percent_of_row() {
        let m = cooccurrence_matrix(&[ann(0b1000_0001), ann(0b1000_0000), ann(0b0000_0001)]);
        let (u, s) = (ErrorLabel::UnadaptedDatasetPatterns, ErrorLabel::StructuralError);
        assert_eq!(m.total(s), 2);
        assert_eq!(m.percent(u, s), 50.0);
        assert_eq!(m.percent(ErrorLabel::QueryBadFormed, s), 0.0);
    }

    proptest! {
        #[test]
        fn matches_brute_force(masks in proptest::collection::vec(any::<u8>(), 0..40)) {
            let anns: Vec<_> = masks.iter().map(|&m| ann(m)).collect();
            let m = cooccurrence_matrix(&anns);
            for (i, a) in ErrorLabel::ALL.into_iter().enumerate() {
                for (j, b) in ErrorLabel::ALL.into_iter().enumerate() {
                    let expect = masks.iter().filter(|&&k| k & (1 << i) != 0 && k & (1 << j) != 0).count();
                    prop_assert_eq!(m.count(a, b), expect);
                    prop_assert_eq!(m.count(a, b), m.count(b, a));
                }
            }
        }
    }
}
