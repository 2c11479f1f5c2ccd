use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::sample::FilterThresholds;
use crate::error::{invalid, shape_err, Error, Result};
use crate::scenes::{loss_map, Image, LossMap, SegLabel, Segmenter, IGNORE_INDEX};

/// Mean surrogate loss per class over a real dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassLossProfile {
    pub l: Vec<f64>,
    pub counts: Vec<u64>,
    pub alpha: f64,
}

impl ClassLossProfile {
    pub fn num_classes(&self) -> usize {
        self.l.len()
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha >= 1.0) {
            return Err(invalid("alpha must be at least 1"));
        }
        self.alpha = alpha;
        Ok(self)
    }

    /// True when `loss` deviates from the class mean by more than the
    /// margin in either direction.
    pub fn is_noisy(&self, class: usize, loss: f64) -> bool {
        let l = self.l[class];
        loss > self.alpha * l || loss < l / self.alpha
    }
}

/// Per-class `(sum, count)` of one loss map.
fn partial_sums(
    loss: &LossMap,
    label: &SegLabel,
    num_classes: usize,
) -> Result<(Vec<f64>, Vec<u64>)> {
    if loss.height != label.height || loss.width != label.width {
        return Err(shape_err("loss map and label differ in size"));
    }
    let mut sums = vec![0.0; num_classes];
    let mut counts = vec![0u64; num_classes];
    for (&g, &y) in label.classes.iter().zip(&loss.values) {
        if g == IGNORE_INDEX || LossMap::is_ignored(y) {
            continue;
        }
        let g = g as usize;
        if g >= num_classes {
            return Err(Error::LabelOutOfRange {
                value: g,
                num_classes,
            });
        }
        sums[g] += y;
        counts[g] += 1;
    }
    Ok((sums, counts))
}

/// Profile from precomputed loss maps. Every class in `0..num_classes`
/// must occur. Per-map partial sums are added in sorted order so the
/// result does not depend on dataset order.
pub fn class_loss_profile_from_maps(
    maps: &[(LossMap, SegLabel)],
    num_classes: usize,
    alpha: f64,
) -> Result<ClassLossProfile> {
    let mut per_class: Vec<Vec<f64>> = vec![Vec::with_capacity(maps.len()); num_classes];
    let mut counts = vec![0u64; num_classes];
    for (loss, label) in maps {
        let (s, c) = partial_sums(loss, label, num_classes)?;
        for g in 0..num_classes {
            if c[g] > 0 {
                per_class[g].push(s[g]);
                counts[g] += c[g];
            }
        }
    }
    let mut l = Vec::with_capacity(num_classes);
    for (g, sums) in per_class.iter_mut().enumerate() {
        if counts[g] == 0 {
            return Err(Error::MissingClass { class: g });
        }
        sums.sort_by(f64::total_cmp);
        l.push(sums.iter().sum::<f64>() / counts[g] as f64);
    }
    ClassLossProfile {
        l,
        counts,
        alpha: 1.0,
    }
    .with_alpha(alpha)
}

/// Mean cross-entropy of `segmenter` per class over `dataset`.
pub fn class_loss_profile(
    dataset: &[(Image, SegLabel)],
    segmenter: &dyn Segmenter,
    alpha: f64,
) -> Result<ClassLossProfile> {
    let maps = dataset
        .iter()
        .map(|(img, label)| Ok((loss_map(segmenter, img, label)?, label.clone())))
        .collect::<Result<Vec<_>>>()?;
    class_loss_profile_from_maps(&maps, segmenter.num_classes(), alpha)
}

/// Sets pixels whose loss falls outside `(l_g / α, α·l_g)` to the
/// ignore index. Returns the filtered label and the flagged fraction
/// of non-ignored pixels.
pub fn pixel_filter(
    loss: &LossMap,
    label: &SegLabel,
    profile: &ClassLossProfile,
) -> Result<(SegLabel, f64)> {
    if loss.height != label.height || loss.width != label.width {
        return Err(shape_err("loss map and label differ in size"));
    }
    let mut out = label.clone();
    let mut flagged = 0usize;
    let mut total = 0usize;
    for (p, &g) in label.classes.iter().enumerate() {
        if g == IGNORE_INDEX {
            continue;
        }
        if g as usize >= profile.num_classes() {
            return Err(Error::LabelOutOfRange {
                value: g as usize,
                num_classes: profile.num_classes(),
            });
        }
        total += 1;
        if profile.is_noisy(g as usize, loss.values[p]) {
            out.classes[p] = IGNORE_INDEX;
            flagged += 1;
        }
    }
    let fraction = if total == 0 {
        0.0
    } else {
        flagged as f64 / total as f64
    };
    Ok((out, fraction))
}

/// Discard a sample whose noisy area exceeds the threshold.
pub fn region_discard(noisy_fraction: f64, thresholds: &FilterThresholds) -> bool {
    noisy_fraction > thresholds.max_noisy_area_fraction
}
