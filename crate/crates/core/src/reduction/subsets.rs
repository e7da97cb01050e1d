//! Bagging subset generation: bootstrap sample draws plus random feature
//! subspaces, one spec per ensemble member.

use rand::seq::index::sample as sample_without_replacement;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::derive_seed;

/// One member's draw: sample rows (with replacement) and feature columns
/// (without). Feature indices are kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub sample_indices: Vec<usize>,
    pub feature_indices: Vec<usize>,
    pub seed: u64,
}

/// Draw `t` subset specs. Every spec keeps at least one sample of every
/// class; a draw that misses a class is retried up to 100 times before
/// erroring. `delta_s >= 1.0` keeps all samples in order (the degenerate
/// identity used by single-member ensembles) instead of bootstrapping.
pub fn make_subsets(
    labels: &[usize],
    class_count: usize,
    feature_count: usize,
    delta_s: f64,
    delta_f: f64,
    t: usize,
    seed: u64,
) -> Result<Vec<SubsetSpec>> {
    if t == 0 {
        return Err(Error::invalid("subset count must be >= 1"));
    }
    if !(0.0..=1.0).contains(&delta_s) || !(0.0..=1.0).contains(&delta_f) {
        return Err(Error::invalid("sampling ratios must be in (0, 1]"));
    }
    let n = labels.len();
    if n == 0 || feature_count == 0 {
        return Err(Error::invalid("empty data"));
    }

    let n_draw = ((n as f64) * delta_s).ceil() as usize;
    let f_draw = (((feature_count as f64) * delta_f).ceil() as usize).clamp(1, feature_count);
    if n_draw == 0 {
        return Err(Error::invalid("sample ratio draws zero samples"));
    }

    let mut specs = Vec::with_capacity(t);
    for idx in 0..t {
        let member_seed = derive_seed(seed, "subset", idx as u64);
        let mut spec = None;
        for attempt in 0..100u64 {
            let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(member_seed, "attempt", attempt));
            let sample_indices: Vec<usize> = if delta_s >= 1.0 {
                (0..n).collect()
            } else {
                (0..n_draw).map(|_| rng.random_range(0..n)).collect()
            };
            let mut covered = vec![false; class_count];
            for &i in &sample_indices {
                covered[labels[i]] = true;
            }
            if covered.iter().all(|&c| c) {
                let mut feature_indices: Vec<usize> =
                    sample_without_replacement(&mut rng, feature_count, f_draw).into_vec();
                feature_indices.sort_unstable();
                spec = Some(SubsetSpec {
                    sample_indices,
                    feature_indices,
                    seed: member_seed,
                });
                break;
            }
        }
        match spec {
            Some(s) => specs.push(s),
            None => {
                return Err(Error::numerical(format!(
                    "subset {idx}: could not cover every class in 100 draws"
                )))
            }
        }
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<usize> {
        (0..n).map(|i| usize::from(i % 3 == 0)).collect()
    }

    #[test]
    fn sizes_match_ratios() {
        let specs = make_subsets(&labels(100), 2, 20, 0.7, 0.5, 5, 11).unwrap();
        assert_eq!(specs.len(), 5);
        for s in &specs {
            assert_eq!(s.sample_indices.len(), 70);
            assert_eq!(s.feature_indices.len(), 10);
            let mut f = s.feature_indices.clone();
            f.dedup();
            assert_eq!(f.len(), 10, "feature draw must be without replacement");
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = make_subsets(&labels(50), 2, 8, 0.7, 0.5, 3, 42).unwrap();
        let b = make_subsets(&labels(50), 2, 8, 0.7, 0.5, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = make_subsets(&labels(50), 2, 8, 0.7, 0.5, 3, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn every_class_covered() {
        // Highly imbalanced: 2 positives among 40.
        let mut lbl = vec![0usize; 40];
        lbl[7] = 1;
        lbl[23] = 1;
        let specs = make_subsets(&lbl, 2, 4, 0.5, 1.0, 10, 5).unwrap();
        for s in &specs {
            assert!(s.sample_indices.iter().any(|&i| lbl[i] == 1));
        }
    }

    #[test]
    fn full_ratio_is_identity() {
        let specs = make_subsets(&labels(12), 2, 6, 1.0, 1.0, 1, 9).unwrap();
        assert_eq!(specs[0].sample_indices, (0..12).collect::<Vec<_>>());
        assert_eq!(specs[0].feature_indices, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn impossible_coverage_errors() {
        // One class only in the labels: trivially covered. Instead use a
        // class that exists but delta_s=tiny on large n makes misses likely
        // yet not impossible; the hard failure needs a class with zero
        // presence, which the Dataset type prevents. Simulate via
        // class_count larger than what labels contain.
        let lbl = vec![0usize; 10];
        let err = make_subsets(&lbl, 2, 3, 0.5, 1.0, 1, 1).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }
}
