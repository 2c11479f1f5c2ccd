use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow this when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::image::{Image, SegLabel, IGNORE_INDEX};
use crate::error::{invalid, shape_err, Error, Result};

/// Per-pixel class scores (`height × width × num_classes`, class fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub height: usize,
    pub width: usize,
    pub num_classes: usize,
    pub scores: Vec<f64>,
}

impl ScoreMap {
    pub fn pixel_scores(&self, p: usize) -> &[f64] {
        &self.scores[p * self.num_classes..(p + 1) * self.num_classes]
    }

    /// Normalized exponentials of the scores, per pixel.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.scores.len());
        for p in 0..self.height * self.width {
            let s = self.pixel_scores(p);
            let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = s.iter().map(|v| (v - max).exp()).sum();
            out.extend(s.iter().map(|v| (v - max).exp() / z));
        }
        out
    }

    /// `-log p(class)` at pixel `p`, via log-sum-exp.
    pub fn neg_log_prob(&self, p: usize, class: usize) -> f64 {
        let s = self.pixel_scores(p);
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        (lse - s[class]).max(0.0)
    }

    /// Arg-max label map; ties resolve to the lowest class index.
    pub fn argmax(&self) -> SegLabel {
        let classes = (0..self.height * self.width)
            .map(|p| {
                let s = self.pixel_scores(p);
                let mut best = 0;
                for (g, &v) in s.iter().enumerate() {
                    if v > s[best] {
                        best = g;
                    }
                }
                best as u8
            })
            .collect();
        SegLabel {
            height: self.height,
            width: self.width,
            num_classes: self.num_classes,
            classes,
        }
    }
}

/// Any model mapping an image to per-pixel class scores.
pub trait Segmenter: Sync {
    fn num_classes(&self) -> usize;

    fn predict_scores(&self, image: &Image) -> Result<ScoreMap>;

    fn predict(&self, image: &Image) -> Result<SegLabel> {
        Ok(self.predict_scores(image)?.argmax())
    }
}

/// Nearest-prototype classifier: `score_g = -‖pixel - prototype_g‖² / temperature`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeSegmenter {
    pub prototypes: Vec<[f64; 3]>,
    pub temperature: f64,
}

impl PrototypeSegmenter {
    pub fn new(prototypes: Vec<[f64; 3]>, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(invalid("temperature must be positive and finite"));
        }
        if prototypes.is_empty() || prototypes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("prototypes must be non-empty and finite"));
        }
        Ok(Self {
            prototypes,
            temperature,
        })
    }

    /// Per-class mean color over every labeled pixel of the dataset.
    pub fn fit(dataset: &[(Image, SegLabel)], temperature: f64) -> Result<Self> {
        let Some((_, first)) = dataset.first() else {
            return Err(invalid("empty dataset"));
        };
        let k = first.num_classes;
        let mut sums = vec![[0.0f64; 3]; k];
        let mut counts = vec![0usize; k];
        for (image, label) in dataset {
            label.check_same_size(image)?;
            if label.num_classes != k {
                return Err(shape_err("labels disagree on num_classes"));
            }
            for (p, &g) in label.classes.iter().enumerate() {
                if g == IGNORE_INDEX {
                    continue;
                }
                let g = g as usize;
                for c in 0..3 {
                    sums[g][c] += image.data[p * 3 + c];
                }
                counts[g] += 1;
            }
        }
        if let Some(class) = counts.iter().position(|&n| n == 0) {
            return Err(Error::MissingClass { class });
        }
        let prototypes = sums
            .iter()
            .zip(&counts)
            .map(|(s, &n)| [s[0] / n as f64, s[1] / n as f64, s[2] / n as f64])
            .collect();
        Self::new(prototypes, temperature)
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::new(self.prototypes.clone(), temperature)
    }
}

impl Segmenter for PrototypeSegmenter {
    fn num_classes(&self) -> usize {
        self.prototypes.len()
    }

    fn predict_scores(&self, image: &Image) -> Result<ScoreMap> {
        let k = self.prototypes.len();
        let mut scores = Vec::with_capacity(image.pixels() * k);
        for p in 0..image.pixels() {
            let px = &image.data[p * 3..p * 3 + 3];
            for proto in &self.prototypes {
                let d2: f64 = (0..3).map(|c| (px[c] - proto[c]).powi(2)).sum();
                scores.push(-d2 / self.temperature);
            }
        }
        Ok(ScoreMap {
            height: image.height,
            width: image.width,
            num_classes: k,
            scores,
        })
    }
}

/// Per-pixel cross-entropy; pixels labeled [`IGNORE_INDEX`] hold
/// [`LossMap::IGNORED`].
#[derive(Debug, Clone, PartialEq)]
pub struct LossMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl LossMap {
    pub const IGNORED: f64 = -1.0;

    pub fn is_ignored(v: f64) -> bool {
        v < 0.0
    }
}

pub fn loss_map_from_scores(scores: &ScoreMap, label: &SegLabel) -> Result<LossMap> {
    if scores.height != label.height || scores.width != label.width {
        return Err(shape_err("score map and label differ in size"));
    }
    let values = label
        .classes
        .iter()
        .enumerate()
        .map(|(p, &g)| {
            if g == IGNORE_INDEX {
                Ok(LossMap::IGNORED)
            } else if g as usize >= scores.num_classes {
                Err(Error::LabelOutOfRange {
                    value: g as usize,
                    num_classes: scores.num_classes,
                })
            } else {
                Ok(scores.neg_log_prob(p, g as usize))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LossMap {
        height: label.height,
        width: label.width,
        values,
    })
}

/// Cross-entropy of `segmenter`'s prediction against `label`.
pub fn loss_map(segmenter: &dyn Segmenter, image: &Image, label: &SegLabel) -> Result<LossMap> {
    label.check_same_size(image)?;
    loss_map_from_scores(&segmenter.predict_scores(image)?, label)
}
