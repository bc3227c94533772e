use crate::error::{Error, Result};
use crate::label::IndexedLabelImage;
use crate::num::Scalar;

/// Pixel confusion counts: `counts[i][j]` = pixels of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix {
            k,
            counts: vec![0; k * k],
        }
    }

    /// Builds a matrix from rows of counts (row = true class).
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Config("confusion matrix rows must be square".into()));
        }
        Ok(ConfusionMatrix {
            k,
            counts: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn add(&mut self, truth: usize, pred: usize, n: u64) {
        self.counts[truth * self.k + pred] += n;
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Pixels whose true class is `i`.
    pub fn true_count(&self, i: usize) -> u64 {
        self.counts[i * self.k..(i + 1) * self.k].iter().sum()
    }

    /// Pixels predicted as class `j`.
    pub fn pred_count(&self, j: usize) -> u64 {
        (0..self.k).map(|i| self.get(i, j)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.k).all(|i| (0..self.k).all(|j| i == j || self.get(i, j) == 0))
    }

    /// Tallies every `(truth, prediction)` pixel pair.
    pub fn accumulate(&mut self, truth: &IndexedLabelImage, pred: &IndexedLabelImage) -> Result<()> {
        if (truth.width(), truth.height()) != (pred.width(), pred.height()) {
            return Err(Error::DimensionMismatch {
                expected: (truth.width(), truth.height()),
                actual: (pred.width(), pred.height()),
                context: Some("prediction vs ground truth".into()),
            });
        }
        if truth.schema() != pred.schema() {
            return Err(Error::SchemaMismatch(
                truth.schema().task().to_string(),
                pred.schema().task().to_string(),
            ));
        }
        if truth.schema().len() != self.k {
            return Err(Error::SchemaMismatch(
                format!("{} classes", self.k),
                format!("{} classes", truth.schema().len()),
            ));
        }
        for (&t, &p) in truth.labels().iter().zip(pred.labels()) {
            self.counts[t as usize * self.k + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.k != self.k {
            return Err(Error::SchemaMismatch(
                format!("{} classes", self.k),
                format!("{} classes", other.k),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    fn non_empty(&self) -> Result<()> {
        if self.total() == 0 {
            Err(Error::EmptyMatrix)
        } else {
            Ok(())
        }
    }

    /// Intersection over union of class `i`.
    fn iu<F: Scalar>(&self, i: usize) -> F {
        let nii = self.get(i, i);
        let union = self.true_count(i) + self.pred_count(i) - nii;
        if union == 0 {
            F::zero()
        } else {
            F::from_u64_lossy(nii) / F::from_u64_lossy(union)
        }
    }

    fn present(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.k).filter(|&i| self.true_count(i) > 0)
    }

    /// Fraction of correctly classified pixels, in `[0, 1]`.
    pub fn pixel_accuracy<F: Scalar>(&self) -> Result<F> {
        self.non_empty()?;
        Ok(F::from_u64_lossy(self.trace()) / F::from_u64_lossy(self.total()))
    }

    /// Per-class recall averaged over classes present in the ground truth.
    pub fn mean_accuracy<F: Scalar>(&self) -> Result<F> {
        self.non_empty()?;
        let (sum, n) = self.present().fold((F::zero(), 0usize), |(s, n), i| {
            (
                s + F::from_u64_lossy(self.get(i, i)) / F::from_u64_lossy(self.true_count(i)),
                n + 1,
            )
        });
        Ok(sum / F::from_usize(n).unwrap())
    }

    /// IU averaged over classes present in the ground truth.
    pub fn mean_iu<F: Scalar>(&self) -> Result<F> {
        self.non_empty()?;
        let (sum, n) = self
            .present()
            .fold((F::zero(), 0usize), |(s, n), i| (s + self.iu::<F>(i), n + 1));
        Ok(sum / F::from_usize(n).unwrap())
    }

    /// IU weighted by each class's share of ground-truth pixels.
    pub fn fw_iu<F: Scalar>(&self) -> Result<F> {
        self.non_empty()?;
        let weighted = (0..self.k).fold(F::zero(), |s, i| {
            s + F::from_u64_lossy(self.true_count(i)) * self.iu::<F>(i)
        });
        Ok(weighted / F::from_u64_lossy(self.total()))
    }

    /// `(tp·tn − fp·fn) / sqrt((tp+fp)(tp+fn)(tn+fp)(tn+fn))` in integers,
    /// or `None` when not binary or the product overflows.
    fn binary_mcc(&self) -> Option<f64> {
        if self.k != 2 {
            return None;
        }
        let (tn, fp, fn_, tp) = (
            self.get(0, 0) as i128,
            self.get(0, 1) as i128,
            self.get(1, 0) as i128,
            self.get(1, 1) as i128,
        );
        let num = tp.checked_mul(tn)? - fp.checked_mul(fn_)?;
        let den = (tp + fp)
            .checked_mul(tp + fn_)?
            .checked_mul(tn + fp)?
            .checked_mul(tn + fn_)?;
        if den == 0 {
            return Some(0.0);
        }
        if num.checked_mul(num)? == den {
            return Some(num.signum() as f64);
        }
        Some(num as f64 / (den as f64).sqrt())
    }

    /// Multi-class Matthews correlation coefficient, in `[-1, 1]`.
    ///
    /// `(c·s − Σ p_k t_k) / sqrt((s² − Σ p_k²)(s² − Σ t_k²))` with `c` the trace,
    /// `s` the total, `p_k`/`t_k` the predicted/true totals of class `k`.
    /// A zero factor under the root yields 0.
    pub fn mcc<F: Scalar>(&self) -> Result<F> {
        self.non_empty()?;
        if let Some(v) = self.binary_mcc() {
            return Ok(F::from_f64_lossy(v));
        }
        // sums are exact in 128-bit integers; only the final ratio rounds
        let c = self.trace() as u128;
        let s = self.total() as u128;
        let (mut pt, mut pp, mut tt) = (0u128, 0u128, 0u128);
        for k in 0..self.k {
            let p = self.pred_count(k) as u128;
            let t = self.true_count(k) as u128;
            pt += p * t;
            pp += p * p;
            tt += t * t;
        }
        let cov = (c * s) as i128 - pt as i128;
        let cov_pred = s * s - pp;
        let cov_true = s * s - tt;
        if cov_pred == 0 || cov_true == 0 {
            return Ok(F::zero());
        }
        let denom = if cov_pred == cov_true {
            cov_pred as f64
        } else {
            (cov_pred as f64).sqrt() * (cov_true as f64).sqrt()
        };
        Ok(F::from_f64_lossy(cov as f64 / denom))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::label::{LabelSchema, Task};

    fn cm(rows: &[&[u64]]) -> ConfusionMatrix {
        ConfusionMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn two_by_two_worked_example() {
        let m = cm(&[&[2, 1], &[1, 2]]);
        assert!((m.pixel_accuracy::<f64>().unwrap() - 4.0 / 6.0).abs() < 1e-15);
        assert!((m.mean_iu::<f64>().unwrap() - 0.5).abs() < 1e-15);
        // binary MCC: (2*2 - 1*1) / sqrt(3*3*3*3) = 1/3
        assert!((m.mcc::<f64>().unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.mean_accuracy::<f64>().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.fw_iu::<f64>().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn perfect_diagonal_scores_one() {
        let m = cm(&[&[5, 0, 0], &[0, 3, 0], &[0, 0, 0]]);
        assert_eq!(m.pixel_accuracy::<f64>().unwrap(), 1.0);
        assert_eq!(m.mean_accuracy::<f64>().unwrap(), 1.0);
        assert_eq!(m.mean_iu::<f64>().unwrap(), 1.0);
        assert_eq!(m.fw_iu::<f64>().unwrap(), 1.0);
        assert!((m.mcc::<f64>().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_prediction_has_zero_mcc() {
        let m = cm(&[&[4, 0], &[4, 0]]);
        assert_eq!(m.mcc::<f64>().unwrap(), 0.0);
        assert_eq!(m.mcc::<f32>().unwrap(), 0.0);
    }

    #[test]
    fn empty_matrix_errors() {
        let m = ConfusionMatrix::new(3);
        assert!(matches!(m.mcc::<f64>(), Err(Error::EmptyMatrix)));
        assert!(matches!(m.pixel_accuracy::<f64>(), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn accumulate_tallies_pairs() {
        let s = Arc::new(LabelSchema::builtin(Task::Blk));
        let truth = IndexedLabelImage::new(2, 1, vec![0, 1], s.clone()).unwrap();
        let pred = IndexedLabelImage::new(2, 1, vec![1, 1], s.clone()).unwrap();
        let mut m = ConfusionMatrix::new(3);
        m.accumulate(&truth, &pred).unwrap();
        assert_eq!(m.get(0, 1), 1);
        assert_eq!(m.get(1, 1), 1);
        assert_eq!(m.total(), 2);

        let single = IndexedLabelImage::filled(10, 10, 0, s.clone()).unwrap();
        let mut m = ConfusionMatrix::new(3);
        m.accumulate(&single, &single).unwrap();
        assert_eq!(m.get(0, 0), 100);
        assert_eq!(m.total(), 100);
    }

    #[test]
    fn accumulate_order_does_not_matter() {
        let s = Arc::new(LabelSchema::builtin(Task::Blk));
        let a = IndexedLabelImage::from_fn(4, 3, s.clone(), |x, _| (x % 3) as u8).unwrap();
        let b = IndexedLabelImage::from_fn(4, 3, s.clone(), |_, y| (y % 3) as u8).unwrap();
        let mut ab = ConfusionMatrix::new(3);
        ab.accumulate(&a, &b).unwrap();
        ab.accumulate(&b, &b).unwrap();
        let mut ba = ConfusionMatrix::new(3);
        ba.accumulate(&b, &b).unwrap();
        ba.accumulate(&a, &b).unwrap();
        assert_eq!(ab, ba);
    }

    #[test]
    fn accumulate_rejects_mismatches() {
        let blk = Arc::new(LabelSchema::builtin(Task::Blk));
        let blk_heavy = Arc::new(blk.with_weight("TAB", 3.0).unwrap());
        let a = IndexedLabelImage::filled(2, 2, 0, blk.clone()).unwrap();
        let b = IndexedLabelImage::filled(2, 1, 0, blk.clone()).unwrap();
        let c = IndexedLabelImage::filled(2, 2, 0, blk_heavy).unwrap();
        let mut m = ConfusionMatrix::new(3);
        assert!(matches!(m.accumulate(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(m.accumulate(&a, &c), Err(Error::SchemaMismatch(..))));
    }
}
