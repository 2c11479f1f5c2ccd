use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::scenes::{BinaryMask, SegLabel, IGNORE_INDEX};

/// Per-class IoU (percent, `None` for classes absent from the ground
/// truth in the evaluated region) and their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiouResult {
    pub per_class: Vec<Option<f64>>,
    pub miou: f64,
}

/// Accumulated `gt × pred` pixel counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds every pixel that is inside `eval_mask` (all pixels if `None`)
    /// and not ignored in `gt`.
    pub fn add(
        &mut self,
        pred: &SegLabel,
        gt: &SegLabel,
        eval_mask: Option<&BinaryMask>,
    ) -> Result<()> {
        if pred.height != gt.height || pred.width != gt.width {
            return Err(shape_err("prediction and ground truth differ in size"));
        }
        if let Some(m) = eval_mask {
            if m.height != gt.height || m.width != gt.width {
                return Err(shape_err("evaluation mask differs in size"));
            }
        }
        let k = self.num_classes;
        for (i, (&p, &g)) in pred.classes.iter().zip(&gt.classes).enumerate() {
            if g == IGNORE_INDEX || eval_mask.is_some_and(|m| !m.bits[i]) {
                continue;
            }
            if g as usize >= k {
                return Err(Error::LabelOutOfRange {
                    value: g as usize,
                    num_classes: k,
                });
            }
            if p as usize >= k {
                return Err(Error::LabelOutOfRange {
                    value: p as usize,
                    num_classes: k,
                });
            }
            self.counts[g as usize * k + p as usize] += 1;
        }
        Ok(())
    }

    /// IoU per class over the accumulated pixels; the mean runs over the
    /// classes that occur in the ground truth.
    pub fn result(&self) -> Result<MiouResult> {
        if self.total() == 0 {
            return Err(Error::EmptyEvaluation);
        }
        let k = self.num_classes;
        let mut per_class = Vec::with_capacity(k);
        for g in 0..k {
            let gt_total: u64 = (0..k).map(|p| self.get(g, p)).sum();
            if gt_total == 0 {
                per_class.push(None);
                continue;
            }
            let tp = self.get(g, g);
            let pred_total: u64 = (0..k).map(|r| self.get(r, g)).sum();
            let union = gt_total + pred_total - tp;
            per_class.push(Some(100.0 * tp as f64 / union as f64));
        }
        let present: Vec<f64> = per_class.iter().flatten().copied().collect();
        let miou = present.iter().sum::<f64>() / present.len() as f64;
        Ok(MiouResult { per_class, miou })
    }
}

/// Mean IoU of one prediction, optionally restricted to `eval_mask`.
pub fn miou(
    pred: &SegLabel,
    gt: &SegLabel,
    num_classes: usize,
    eval_mask: Option<&BinaryMask>,
) -> Result<MiouResult> {
    let mut cm = ConfusionMatrix::new(num_classes);
    cm.add(pred, gt, eval_mask)?;
    cm.result()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let gt = SegLabel::new(2, 2, 2, vec![0, 0, 1, 1]).unwrap();
        let pred = SegLabel::new(2, 2, 2, vec![0, 1, 1, 1]).unwrap();
        let r = miou(&pred, &gt, 2, None).unwrap();
        assert!((r.per_class[0].unwrap() - 50.0).abs() < 1e-12);
        assert!((r.per_class[1].unwrap() - 200.0 / 3.0).abs() < 1e-12);
        assert!((r.miou - 58.333333333333336).abs() < 1e-9);
    }

    #[test]
    fn perfect_and_empty() {
        let gt = SegLabel::new(1, 3, 3, vec![0, 2, IGNORE_INDEX]).unwrap();
        let r = miou(&gt, &gt, 3, None).unwrap();
        assert_eq!(r.miou, 100.0);
        assert_eq!(r.per_class, vec![Some(100.0), None, Some(100.0)]);
        let none = BinaryMask::empty(1, 3);
        assert_eq!(miou(&gt, &gt, 3, Some(&none)), Err(Error::EmptyEvaluation));
    }

    #[test]
    fn full_mask_equals_no_mask() {
        let gt = SegLabel::new(2, 2, 3, vec![0, 1, 2, 1]).unwrap();
        let pred = SegLabel::new(2, 2, 3, vec![1, 1, 2, 0]).unwrap();
        let full = BinaryMask::full(2, 2);
        assert_eq!(
            miou(&pred, &gt, 3, None).unwrap(),
            miou(&pred, &gt, 3, Some(&full)).unwrap()
        );
    }
}
