use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::build::{BenchmarkSet, Family, Variation};
use super::metrics::{ConfusionMatrix, MiouResult};
use crate::error::{Error, Result};
use crate::scenes::Segmenter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalRegion {
    Full,
    /// Only pixels inside each sample's object mask.
    ObjectOnly,
}

impl EvalRegion {
    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::ObjectOnly => "object_only",
        }
    }
}

/// Evaluation region per edit family. Geometry and combined edits are
/// scored inside the object by default, appearance edits on the full image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalRegions {
    pub appearance: EvalRegion,
    pub geometry: EvalRegion,
}

impl Default for EvalRegions {
    fn default() -> Self {
        Self {
            appearance: EvalRegion::Full,
            geometry: EvalRegion::ObjectOnly,
        }
    }
}

impl EvalRegions {
    pub fn uniform(region: EvalRegion) -> Self {
        Self {
            appearance: region,
            geometry: region,
        }
    }

    pub fn for_family(&self, family: Family) -> EvalRegion {
        match family {
            Family::Appearance => self.appearance,
            _ => self.geometry,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub miou: f64,
    pub per_class: Vec<Option<f64>>,
    pub samples: usize,
}

/// Robustness of one model on one family of subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub model: String,
    pub benchmark: String,
    /// Name of the baseline subset (`recon` or `original`).
    pub baseline: String,
    /// Edited subsets plus the baseline.
    pub subsets: BTreeMap<String, SubsetScore>,
    /// Edited subsets in plan order.
    pub edited: Vec<String>,
    pub rmiou: f64,
    pub mr: f64,
    pub eval_region: EvalRegion,
    pub config_hash: String,
    /// Classes averaged into each mIoU.
    pub class_convention: String,
}

/// Mean over `edited` and its ratio to `baseline`: `(RmIoU, mR)`.
pub fn robustness_from_scores(baseline: f64, edited: &[f64]) -> Result<(f64, f64)> {
    if edited.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    if !(baseline > 0.0) {
        return Err(crate::error::invalid("baseline mIoU must be positive"));
    }
    let rmiou = edited.iter().sum::<f64>() / edited.len() as f64;
    Ok((rmiou, rmiou / baseline))
}

impl RobustnessReport {
    /// mR recomputed from the subset table.
    pub fn recompute_mr(&self) -> Result<f64> {
        let base = self
            .subsets
            .get(&self.baseline)
            .ok_or_else(|| Error::MissingBaseline(self.baseline.clone()))?;
        let edited: Vec<f64> = self.edited.iter().map(|n| self.subsets[n].miou).collect();
        Ok(robustness_from_scores(base.miou, &edited)?.1)
    }
}

/// Baseline subset for a family of edits.
pub fn baseline_for(family: Family) -> &'static str {
    match family {
        Family::Appearance => "recon",
        _ => "original",
    }
}

/// Scores every subset of `bench`: accumulated confusion over the
/// subset's samples against their filtered labels.
pub fn subset_scores(
    segmenter: &dyn Segmenter,
    bench: &BenchmarkSet,
    region: EvalRegion,
) -> Result<BTreeMap<String, SubsetScore>> {
    let k = bench.info.num_classes();
    let mut cms: BTreeMap<String, (ConfusionMatrix, usize)> = BTreeMap::new();
    for s in bench.samples.iter().filter(|s| s.kept()) {
        let pred = segmenter.predict(&s.image)?;
        let mask = match region {
            EvalRegion::Full => None,
            EvalRegion::ObjectOnly => Some(&s.mask),
        };
        let entry = cms
            .entry(s.record.subset.clone())
            .or_insert_with(|| (ConfusionMatrix::new(k), 0));
        entry.0.add(&pred, &s.filtered_label, mask)?;
        entry.1 += 1;
    }
    cms.into_iter()
        .map(|(name, (cm, n))| {
            let MiouResult { per_class, miou } = cm.result()?;
            Ok((
                name,
                SubsetScore {
                    miou,
                    per_class,
                    samples: n,
                },
            ))
        })
        .collect()
}

/// One report per edit family present in the plan: appearance against
/// Recon, geometry and combined edits against Original.
pub fn robustness_report(
    segmenter: &dyn Segmenter,
    model: &str,
    bench: &BenchmarkSet,
    regions: EvalRegions,
) -> Result<Vec<RobustnessReport>> {
    let mut by_region: BTreeMap<&'static str, BTreeMap<String, SubsetScore>> = BTreeMap::new();
    let mut families: Vec<(Family, Vec<Variation>)> = Vec::new();
    for v in &bench.config.plan {
        match families.iter_mut().find(|(f, _)| *f == v.family()) {
            Some((_, vs)) => vs.push(*v),
            None => families.push((v.family(), alloc::vec![*v])),
        }
    }
    let mut out = Vec::new();
    for (family, vs) in families {
        let region = regions.for_family(family);
        if !by_region.contains_key(region.name()) {
            by_region.insert(region.name(), subset_scores(segmenter, bench, region)?);
        }
        let scores = &by_region[region.name()];
        let baseline = baseline_for(family).to_string();
        let base = scores
            .get(&baseline)
            .ok_or_else(|| Error::MissingBaseline(baseline.clone()))?;
        let mut subsets = BTreeMap::new();
        subsets.insert(baseline.clone(), base.clone());
        let mut edited = Vec::new();
        for v in vs {
            let name = v.subset_name();
            let s = scores.get(&name).ok_or_else(|| {
                log::warn!("subset {name} is empty after filtering");
                Error::EmptyEvaluation
            })?;
            subsets.insert(name.clone(), s.clone());
            edited.push(name);
        }
        let values: Vec<f64> = edited.iter().map(|n| subsets[n].miou).collect();
        let (rmiou, mr) = robustness_from_scores(base.miou, &values)?;
        out.push(RobustnessReport {
            model: model.to_string(),
            benchmark: bench.name.clone(),
            baseline,
            subsets,
            edited,
            rmiou,
            mr,
            eval_region: region,
            config_hash: bench.config_hash.clone(),
            class_convention:
                "mean over classes present in the ground truth within the evaluated region"
                    .to_string(),
        });
    }
    Ok(out)
}

/// Markdown table per report: baseline, edited subsets, mR. Values are
/// rounded here only.
pub fn render_markdown(reports: &[RobustnessReport], class_names: &[String]) -> String {
    let mut md = String::new();
    for r in reports {
        md += &format!(
            "## {} on {} ({} region)\n\n",
            r.model,
            r.benchmark,
            r.eval_region.name()
        );
        let mut cols = alloc::vec![r.baseline.clone()];
        cols.extend(r.edited.iter().cloned());
        md += &format!("| Method | {} | mR |\n", cols.join(" | "));
        md += &format!("|---|{}---|\n", "---|".repeat(cols.len()));
        let cells: Vec<String> = cols
            .iter()
            .map(|c| format!("{:.2}", r.subsets[c].miou))
            .collect();
        md += &format!("| {} | {} | {:.2} |\n\n", r.model, cells.join(" | "), r.mr);
        md += &format!(
            "RmIoU {:.2}, baseline {}, config {}\n\n",
            r.rmiou, r.baseline, r.config_hash
        );
        md += &format!("| Class | {} |\n", cols.join(" | "));
        md += &format!("|---|{}\n", "---|".repeat(cols.len()));
        for (g, name) in class_names.iter().enumerate() {
            let cells: Vec<String> = cols
                .iter()
                .map(|c| match r.subsets[c].per_class.get(g).copied().flatten() {
                    Some(v) => format!("{v:.2}"),
                    None => "-".to_string(),
                })
                .collect();
            md += &format!("| {} | {} |\n", name, cells.join(" | "));
        }
        md += "\n";
    }
    md
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_degradation_is_one() {
        let (r, mr) = robustness_from_scores(70.0, &[70.0, 70.0]).unwrap();
        assert_eq!(r, 70.0);
        assert_eq!(mr, 1.0);
        assert!(robustness_from_scores(70.0, &[]).is_err());
    }
}
