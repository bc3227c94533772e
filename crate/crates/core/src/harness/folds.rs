use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FOLD_COUNT: usize = 5;

/// Page-level cross-validation assignment.
///
/// Every artifact derived from a page (tiles, warped variants) inherits the
/// page's fold, so training and validation never share a page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    fold_count: usize,
    assignment: BTreeMap<String, usize>,
}

/// Shuffles the pages with `seed` and deals them round-robin into folds.
///
/// The result does not depend on the order of `page_ids`.
pub fn make_folds(page_ids: &[String], fold_count: usize, seed: u64) -> Result<FoldPlan> {
    if fold_count < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {fold_count}")));
    }
    if page_ids.len() < fold_count {
        return Err(Error::TooFewPages {
            needed: fold_count,
            got: page_ids.len(),
        });
    }
    let mut ids = page_ids.to_vec();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!("duplicate page id {:?}", w[0])));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let assignment = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, i % fold_count))
        .collect();
    Ok(FoldPlan {
        fold_count,
        assignment,
    })
}

impl FoldPlan {
    pub fn fold_count(&self) -> usize {
        self.fold_count
    }

    /// Training fraction; `(k - 1) / k` up to one page per fold.
    pub fn ratio(&self) -> f64 {
        1.0 - 1.0 / self.fold_count as f64
    }

    pub fn assignment(&self) -> &BTreeMap<String, usize> {
        &self.assignment
    }

    pub fn fold_of(&self, page: &str) -> Option<usize> {
        self.assignment.get(page).copied()
    }

    pub fn pages(&self) -> impl Iterator<Item = &str> {
        self.assignment.keys().map(String::as_str)
    }

    pub fn validation_pages(&self, fold: usize) -> Vec<String> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(p, _)| p.clone())
            .collect()
    }

    pub fn training_pages(&self, fold: usize) -> Vec<String> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f != fold)
            .map(|(p, _)| p.clone())
            .collect()
    }

    pub fn check_fold(&self, fold: usize) -> Result<()> {
        if fold >= self.fold_count {
            return Err(Error::Config(format!(
                "fold {fold} out of range for {} folds",
                self.fold_count
            )));
        }
        Ok(())
    }
}

/// Training-set sizes for a learning curve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSchedule {
    page_counts: Vec<usize>,
}

pub const DEFAULT_SUBSET_COUNTS: [usize; 10] = [8, 16, 24, 33, 41, 49, 58, 66, 74, 83];

impl Default for SubsetSchedule {
    fn default() -> Self {
        SubsetSchedule {
            page_counts: DEFAULT_SUBSET_COUNTS.to_vec(),
        }
    }
}

impl SubsetSchedule {
    pub fn new(page_counts: Vec<usize>) -> Result<Self> {
        if page_counts.is_empty() || page_counts[0] == 0 {
            return Err(Error::Config("subset counts must be positive and non-empty".into()));
        }
        if page_counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("subset counts must be strictly increasing".into()));
        }
        Ok(SubsetSchedule { page_counts })
    }

    pub fn page_counts(&self) -> &[usize] {
        &self.page_counts
    }

    /// Drops counts above `available`; if any were dropped, `available`
    /// itself becomes the last point.
    pub fn clip(&self, available: usize) -> Result<SubsetSchedule> {
        let mut counts: Vec<usize> = self
            .page_counts
            .iter()
            .copied()
            .filter(|&c| c <= available)
            .collect();
        if counts.len() < self.page_counts.len() && counts.last() != Some(&available) {
            counts.push(available);
        }
        if available == 0 {
            return Err(Error::TooFewPages { needed: 1, got: 0 });
        }
        SubsetSchedule::new(counts)
    }
}

/// Nested page subsets: each is a prefix of one seeded permutation.
pub fn nested_subsets(pages: &[String], counts: &[usize], seed: u64) -> Result<Vec<Vec<String>>> {
    let mut order = pages.to_vec();
    order.sort();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    counts
        .iter()
        .map(|&n| {
            if n > order.len() {
                return Err(Error::TooFewPages {
                    needed: n,
                    got: order.len(),
                });
            }
            let mut subset = order[..n].to_vec();
            subset.sort();
            Ok(subset)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i:03}")).collect()
    }

    #[test]
    fn ten_pages_five_folds() {
        let plan = make_folds(&ids(10), 5, 1).unwrap();
        for f in 0..5 {
            assert_eq!(plan.validation_pages(f).len(), 2);
            assert_eq!(plan.training_pages(f).len(), 8);
        }
        assert!((plan.ratio() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn uneven_folds_differ_by_one_page() {
        let plan = make_folds(&ids(13), 5, 9).unwrap();
        let sizes: Vec<usize> = (0..5).map(|f| plan.validation_pages(f).len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 13);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn seeded_and_order_independent() {
        let a = make_folds(&ids(20), 5, 42).unwrap();
        let mut rev = ids(20);
        rev.reverse();
        assert_eq!(a, make_folds(&rev, 5, 42).unwrap());
        assert_ne!(a, make_folds(&ids(20), 5, 43).unwrap());
    }

    #[test]
    fn too_few_pages() {
        assert!(matches!(
            make_folds(&ids(3), 5, 0),
            Err(Error::TooFewPages { needed: 5, got: 3 })
        ));
        assert!(make_folds(&["a".into(), "a".into()], 2, 0).is_err());
    }

    #[test]
    fn schedule_clipping() {
        let s = SubsetSchedule::default();
        assert_eq!(s.clip(100).unwrap().page_counts(), &DEFAULT_SUBSET_COUNTS);
        assert_eq!(s.clip(20).unwrap().page_counts(), &[8, 16, 20]);
        assert_eq!(s.clip(16).unwrap().page_counts(), &[8, 16]);
        assert_eq!(s.clip(5).unwrap().page_counts(), &[5]);
        assert!(SubsetSchedule::new(vec![8, 8]).is_err());
    }

    #[test]
    fn subsets_are_nested() {
        let subsets = nested_subsets(&ids(83), &DEFAULT_SUBSET_COUNTS, 5).unwrap();
        for w in subsets.windows(2) {
            assert!(w[0].iter().all(|p| w[1].contains(p)));
        }
        assert_eq!(subsets.last().unwrap().len(), 83);
    }
}
