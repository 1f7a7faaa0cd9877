use super::{CorpusError, LabeledCohort, Result};
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
    pub ratio: f64,
}

impl SplitIndices {
    pub fn is_train(&self, id: &str) -> bool {
        self.train_ids.iter().any(|t| t == id)
    }
}

/// Stratified split. Each label stratum first gets `floor(ratio * n)` training
/// subjects; remaining slots (up to `round(ratio * N)` overall) go to strata
/// with the largest fractional remainder, larger stratum first on ties.
/// Selection shuffles the sorted ids of each stratum, so input order is
/// irrelevant.
pub fn split_train_test(cohort: &LabeledCohort, ratio: f64, seed: u64) -> Result<SplitIndices> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::InvalidRatio(ratio));
    }
    let mut strata: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    for r in &cohort.records {
        strata[usize::from(r.label)].push(r.record.id.clone());
    }
    for (label, s) in strata.iter_mut().enumerate() {
        if s.is_empty() {
            return Err(CorpusError::EmptyClass(label as u8));
        }
        s.sort();
    }
    let total: usize = strata.iter().map(Vec::len).sum();
    let target = (ratio * total as f64).round() as usize;
    let mut quota: Vec<usize> = strata.iter().map(|s| (ratio * s.len() as f64).floor() as usize).collect();
    let mut order: Vec<usize> = (0..strata.len()).collect();
    order.sort_by(|&a, &b| {
        let frac = |i: usize| ratio * strata[i].len() as f64 - quota[i] as f64;
        let (fa, fb) = (frac(a), frac(b));
        if (fa - fb).abs() > 1e-9 {
            fb.total_cmp(&fa)
        } else {
            strata[b].len().cmp(&strata[a].len()).then(a.cmp(&b))
        }
    });
    let mut assigned: usize = quota.iter().sum();
    for &i in order.iter().cycle().take(2 * order.len()) {
        if assigned >= target {
            break;
        }
        if quota[i] < strata[i].len() {
            quota[i] += 1;
            assigned += 1;
        }
    }

    let mut train_ids = Vec::with_capacity(target);
    let mut test_ids = Vec::with_capacity(total - target);
    for (label, s) in strata.iter().enumerate() {
        let mut shuffled = s.clone();
        shuffled.shuffle(&mut rng::stream(seed, &format!("split/{label}")));
        let (tr, te) = shuffled.split_at(quota[label]);
        train_ids.extend_from_slice(tr);
        test_ids.extend_from_slice(te);
    }
    train_ids.sort();
    test_ids.sort();
    Ok(SplitIndices { train_ids, test_ids, seed, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{annotate_labels, Group, ParticipantRecord};

    fn cohort(neg: usize, pos: usize) -> LabeledCohort {
        let mut ps = Vec::new();
        for i in 0..neg + pos {
            let group = if i < neg { Group::PdFogMinus } else { Group::PdFogPlus };
            ps.push(ParticipantRecord {
                id: format!("s{i:03}"),
                group,
                age: 60.0,
                schooling: 12.0,
                disease_duration: Some(3.0),
            });
        }
        annotate_labels(&ps)
    }

    #[test]
    fn reference_cohort_sizes() {
        let c = cohort(82, 42);
        let s = split_train_test(&c, 0.8, 11).unwrap();
        assert_eq!((s.train_ids.len(), s.test_ids.len()), (99, 25));
        let pos_train = s.train_ids.iter().filter(|id| c.get(id).unwrap().label == 1).count();
        assert_eq!((99 - pos_train, pos_train), (66, 33));
    }

    #[test]
    fn ratio_and_class_errors() {
        let c = cohort(5, 5);
        assert!(matches!(split_train_test(&c, 0.0, 1), Err(CorpusError::InvalidRatio(_))));
        assert!(matches!(split_train_test(&c, 1.0, 1), Err(CorpusError::InvalidRatio(_))));
        assert!(matches!(split_train_test(&cohort(5, 0), 0.5, 1), Err(CorpusError::EmptyClass(1))));
    }

    #[test]
    fn seeds_change_membership() {
        let c = cohort(82, 42);
        let a = split_train_test(&c, 0.8, 1).unwrap();
        let b = split_train_test(&c, 0.8, 2).unwrap();
        assert_ne!(a.test_ids, b.test_ids);
        assert_eq!(a, split_train_test(&c, 0.8, 1).unwrap());
    }
}
