use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::scenes::{BinaryMask, SegLabel, IGNORE_INDEX};

/// Minimum area fraction (exclusive) of the largest object.
pub const SALIENT_AREA: f64 = 0.20;

/// The largest foreground object of a selected image.
#[derive(Debug, Clone, PartialEq)]
pub struct SalientObject {
    /// Position in the input dataset.
    pub index: usize,
    pub class: u8,
    pub mask: BinaryMask,
    pub area_fraction: f64,
}

/// 4-connected components of non-background, non-ignored classes, in
/// raster order of their first pixel.
pub fn foreground_objects(label: &SegLabel, background: &[u8]) -> Vec<(u8, BinaryMask)> {
    let (h, w) = (label.height, label.width);
    let mut seen = alloc::vec![false; h * w];
    let mut out = Vec::new();
    for start in 0..h * w {
        let c = label.classes[start];
        if seen[start] || c == IGNORE_INDEX || background.contains(&c) {
            continue;
        }
        let mut mask = BinaryMask::empty(h, w);
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(p) = queue.pop_front() {
            mask.bits[p] = true;
            let (y, x) = (p / w, p % w);
            let mut push = |q: usize| {
                if !seen[q] && label.classes[q] == c {
                    seen[q] = true;
                    queue.push_back(q);
                }
            };
            if y > 0 {
                push(p - w);
            }
            if y + 1 < h {
                push(p + w);
            }
            if x > 0 {
                push(p - 1);
            }
            if x + 1 < w {
                push(p + 1);
            }
        }
        out.push((c, mask));
    }
    out
}

/// Keeps images whose largest foreground object covers more than
/// `threshold` of the image and returns that object. Ties go to the
/// object found first in raster order.
pub fn select_salient<'a, I>(labels: I, background: &[u8], threshold: f64) -> Vec<SalientObject>
where
    I: IntoIterator<Item = &'a SegLabel>,
{
    let mut out = Vec::new();
    for (index, label) in labels.into_iter().enumerate() {
        let mut best: Option<(u8, BinaryMask)> = None;
        for (c, m) in foreground_objects(label, background) {
            if best.as_ref().map_or(true, |(_, b)| m.count() > b.count()) {
                best = Some((c, m));
            }
        }
        if let Some((class, mask)) = best {
            let area_fraction = mask.area_fraction();
            if area_fraction > threshold {
                out.push(SalientObject {
                    index,
                    class,
                    mask,
                    area_fraction,
                });
            }
        }
    }
    out
}
