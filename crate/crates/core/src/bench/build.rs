use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::select::{select_salient, SalientObject, SALIENT_AREA};
use crate::appearance::{edit_appearance, reconstruct, EditConfig, EditLog};
use crate::diffusion::{Denoiser, NoiseSchedule, ScheduleKind};
use crate::error::{invalid, Error, Result};
use crate::filtering::{
    class_loss_profile, pixel_filter, region_discard, sample_filter, sample_filter_same_prompt,
    ClassLossProfile, Embedder, FilterRecord, FilterThresholds,
};
use crate::geometry::{
    edit_geometry, GeometryContext, GeometryEditSpec, GeometryKind, GeometryLog, Inpainter,
    VisionLanguageClient,
};
use crate::prompt::{
    decompose_caption, edit_attribute, llm_edit, tokenize, AttributeKind, AttributeVocabulary,
    EditRequest, LanguageClient, Vocabulary,
};
use crate::scenes::{loss_map, BinaryMask, Image, SegLabel, Segmenter};

/// One benchmark subset's construction rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Variation {
    Original,
    Recon,
    Appearance {
        attribute: AttributeKind,
    },
    Geometry {
        kind: GeometryKind,
        level: f64,
    },
    /// Geometry edit first, then an appearance edit on its result.
    Combined {
        attribute: AttributeKind,
        kind: GeometryKind,
        level: f64,
    },
}

/// Which baseline a subset is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Baseline,
    Appearance,
    Geometry,
    Combined,
}

fn parse_attribute(s: &str) -> Option<AttributeKind> {
    AttributeKind::ALL.into_iter().find(|k| k.name() == s)
}

fn parse_geometry(s: &str) -> Option<(GeometryKind, f64)> {
    let (kind, level) = s.split_once('_')?;
    let kind = match kind {
        "size" => GeometryKind::Size,
        "position" => GeometryKind::Position,
        _ => return None,
    };
    let level: f64 = level.parse().ok()?;
    (level > 0.0 && level < 1.0).then_some((kind, level))
}

impl Variation {
    /// Subset directory name: `color`, `size_0.2`, `color+size_0.2`, ...
    pub fn subset_name(&self) -> String {
        match self {
            Self::Original => "original".to_string(),
            Self::Recon => "recon".to_string(),
            Self::Appearance { attribute } => attribute.name().to_string(),
            Self::Geometry { kind, level } => format!("{}_{}", kind.name(), level),
            Self::Combined {
                attribute,
                kind,
                level,
            } => format!("{}+{}_{}", attribute.name(), kind.name(), level),
        }
    }

    /// Inverse of [`Variation::subset_name`].
    pub fn parse(name: &str) -> Result<Self> {
        let bad = || invalid(format!("unknown variation {name:?}"));
        let name = name.trim().to_lowercase();
        match name.as_str() {
            "original" => return Ok(Self::Original),
            "recon" => return Ok(Self::Recon),
            _ => {}
        }
        if let Some((a, g)) = name.split_once('+') {
            let attribute = parse_attribute(a).ok_or_else(bad)?;
            let (kind, level) = parse_geometry(g).ok_or_else(bad)?;
            return Ok(Self::Combined {
                attribute,
                kind,
                level,
            });
        }
        if let Some(attribute) = parse_attribute(&name) {
            return Ok(Self::Appearance { attribute });
        }
        let (kind, level) = parse_geometry(&name).ok_or_else(bad)?;
        Ok(Self::Geometry { kind, level })
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Original | Self::Recon => Family::Baseline,
            Self::Appearance { .. } => Family::Appearance,
            Self::Geometry { .. } => Family::Geometry,
            Self::Combined { .. } => Family::Combined,
        }
    }
}

/// Build settings. Serialized into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    pub name: String,
    pub plan: Vec<Variation>,
    pub edit: EditConfig,
    pub thresholds: FilterThresholds,
    pub attributes: AttributeVocabulary,
    pub salient_area: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            name: "toy".to_string(),
            plan: alloc::vec![Variation::Appearance {
                attribute: AttributeKind::Color
            }],
            edit: EditConfig::default(),
            thresholds: FilterThresholds::default(),
            attributes: AttributeVocabulary::default(),
            salient_area: SALIENT_AREA,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        self.edit.validate()?;
        self.thresholds.validate()?;
        if !(0.0..1.0).contains(&self.salient_area) {
            return Err(invalid("salient_area must lie in [0, 1)"));
        }
        if self.plan.iter().any(|v| v.family() == Family::Baseline) {
            return Err(invalid(
                "original and recon subsets are built implicitly; leave them out of the plan",
            ));
        }
        Ok(())
    }
}

/// Class names and which classes count as background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub class_names: Vec<String>,
    pub background: Vec<u8>,
}

impl DatasetInfo {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    fn background_names(&self) -> Vec<String> {
        self.background
            .iter()
            .map(|&c| self.class_names[c as usize].clone())
            .collect()
    }
}

/// A labeled, captioned input image.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSample {
    pub id: String,
    pub image: Image,
    pub label: SegLabel,
    pub caption: String,
}

/// Everything the builder calls out to.
pub struct Backends<'a> {
    pub denoiser: &'a dyn Denoiser,
    pub vocab: &'a Vocabulary,
    pub schedule: &'a NoiseSchedule,
    pub inpainter: &'a dyn Inpainter,
    pub embedder: &'a dyn Embedder,
    pub surrogate: &'a dyn Segmenter,
    pub language: Option<&'a dyn LanguageClient>,
    pub vlm: Option<&'a dyn VisionLanguageClient>,
}

/// Metadata of one benchmark sample. Paths are relative to the
/// benchmark directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub subset: String,
    pub variation: Variation,
    pub object_class: u8,
    pub original_image: String,
    pub original_label: String,
    pub image: String,
    pub label: String,
    /// Label after the pixel filter (255 = ignore).
    pub filtered_label: String,
    pub mask: String,
    pub prompt: String,
    pub edited_prompt: String,
    /// Attribute value applied, if any.
    pub value: Option<String>,
    pub seed: u64,
    pub filter: Option<FilterRecord>,
    pub appearance_log: Option<EditLog>,
    pub geometry_log: Option<GeometryLog>,
    pub config_hash: String,
}

impl SampleRecord {
    pub fn key(&self) -> String {
        format!("{}/{}", self.subset, self.id)
    }
}

/// One benchmark sample: its record, image, label before and after the
/// pixel filter, and object mask (M* for geometry edits). Samples that
/// failed a filter stay in the set but are not evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSample {
    pub record: SampleRecord,
    pub image: Image,
    pub label: SegLabel,
    pub filtered_label: SegLabel,
    pub mask: BinaryMask,
}

impl BenchSample {
    pub fn kept(&self) -> bool {
        self.record.filter.as_ref().map_or(true, FilterRecord::kept)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleInfo {
    pub kind: ScheduleKind,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSet {
    pub name: String,
    pub info: DatasetInfo,
    pub config: BuildConfig,
    pub config_hash: String,
    pub seed: u64,
    pub schedule: ScheduleInfo,
    pub profile: ClassLossProfile,
    /// Every attempted sample in build order, kept or not.
    pub samples: Vec<BenchSample>,
}

impl BenchmarkSet {
    /// Subset names in build order.
    pub fn subset_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for s in &self.samples {
            if !names.contains(&s.record.subset) {
                names.push(s.record.subset.clone());
            }
        }
        names
    }

    /// Kept samples of one subset.
    pub fn subset<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a BenchSample> + 'a {
        self.samples
            .iter()
            .filter(move |s| s.record.subset == name && s.kept())
    }

    /// One line per filtered sample.
    pub fn filter_report(&self) -> Vec<FilterRecord> {
        self.samples
            .iter()
            .filter_map(|s| s.record.filter.clone())
            .collect()
    }

    /// Kept sample by subset and id.
    pub fn find(&self, subset: &str, id: &str) -> Option<&BenchSample> {
        self.samples
            .iter()
            .find(|s| s.record.subset == subset && s.record.id == id && s.kept())
    }
}

/// Mixes the run seed with a sample and variation index.
pub fn derive_seed(seed: u64, sample: usize, variation: usize) -> u64 {
    let mut z = seed
        ^ (sample as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (variation as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Ctx<'a> {
    info: &'a DatasetInfo,
    backends: &'a Backends<'a>,
    config: &'a BuildConfig,
    profile: &'a ClassLossProfile,
    config_hash: &'a str,
}

fn paths(subset: &str, id: &str) -> (String, String, String) {
    (
        format!("{subset}/{id}.png"),
        format!("{subset}/{id}_label.png"),
        format!("{subset}/{id}_mask.png"),
    )
}

fn filtered_path(subset: &str, id: &str) -> String {
    format!("{subset}/{id}_label_filtered.png")
}

fn base_record(
    ctx: &Ctx<'_>,
    src: &SourceSample,
    obj: &SalientObject,
    variation: Variation,
    seed: u64,
) -> SampleRecord {
    let subset = variation.subset_name();
    let (image, label, mask) = paths(&subset, &src.id);
    let (original_image, original_label, _) = paths("original", &src.id);
    let filtered_label = filtered_path(&subset, &src.id);
    SampleRecord {
        id: src.id.clone(),
        subset,
        variation,
        object_class: obj.class,
        original_image,
        original_label,
        image,
        label,
        filtered_label,
        mask,
        prompt: src.caption.clone(),
        edited_prompt: src.caption.clone(),
        value: None,
        seed,
        filter: None,
        appearance_log: None,
        geometry_log: None,
        config_hash: ctx.config_hash.to_string(),
    }
}

/// Both filter stages for one sample. `source` is the unedited image.
pub fn filter_sample(
    record: &SampleRecord,
    source: &Image,
    image: &Image,
    label: &SegLabel,
    embedder: &dyn Embedder,
    surrogate: &dyn Segmenter,
    profile: &ClassLossProfile,
    thresholds: &FilterThresholds,
) -> Result<(FilterRecord, SegLabel)> {
    let metrics = match record.variation.family() {
        Family::Appearance | Family::Combined => sample_filter(
            source,
            image,
            &record.prompt,
            &record.edited_prompt,
            embedder,
            thresholds,
        )?,
        _ => sample_filter_same_prompt(source, image, &record.prompt, embedder, thresholds)?,
    };
    let mut filter = FilterRecord {
        sample_id: record.key(),
        directional: metrics.directional,
        image_image: metrics.image_image,
        image_text: metrics.image_text,
        accepted: metrics.accepted,
        noisy_pixel_fraction: None,
        discarded: false,
    };
    if !metrics.accepted {
        log::info!("{}: rejected by the sample filter", filter.sample_id);
        return Ok((filter, label.clone()));
    }
    let loss = loss_map(surrogate, image, label)?;
    let (filtered, fraction) = pixel_filter(&loss, label, profile)?;
    filter.noisy_pixel_fraction = Some(fraction);
    filter.discarded = region_discard(fraction, thresholds);
    if filter.discarded {
        log::info!(
            "{}: discarded, {:.1}% noisy pixels",
            filter.sample_id,
            100.0 * fraction
        );
    }
    Ok((filter, filtered))
}

fn finish(
    ctx: &Ctx<'_>,
    src: &SourceSample,
    mut record: SampleRecord,
    image: Image,
    label: SegLabel,
    mask: BinaryMask,
) -> Result<BenchSample> {
    let image = image.quantized();
    let b = ctx.backends;
    let (filter, filtered_label) = filter_sample(
        &record,
        &src.image,
        &image,
        &label,
        b.embedder,
        b.surrogate,
        ctx.profile,
        &ctx.config.thresholds,
    )?;
    record.filter = Some(filter);
    Ok(BenchSample {
        record,
        image,
        label,
        filtered_label,
        mask,
    })
}

/// Reruns both filter stages on every edited sample with new thresholds
/// and surrogate. The class loss profile is recomputed over `real`, the
/// source dataset the benchmark was built from.
pub fn refilter(
    bench: &mut BenchmarkSet,
    real: &[(Image, SegLabel)],
    embedder: &dyn Embedder,
    surrogate: &dyn Segmenter,
    thresholds: &FilterThresholds,
) -> Result<()> {
    thresholds.validate()?;
    let profile = class_loss_profile(real, surrogate, thresholds.alpha)?;
    let originals: BTreeMap<String, Image> = bench
        .subset("original")
        .map(|s| (s.record.id.clone(), s.image.clone()))
        .collect();
    for s in bench
        .samples
        .iter_mut()
        .filter(|s| s.record.filter.is_some())
    {
        let source = originals
            .get(&s.record.id)
            .ok_or_else(|| Error::MissingBaseline("original".to_string()))?;
        let (filter, filtered) = filter_sample(
            &s.record, source, &s.image, &s.label, embedder, surrogate, &profile, thresholds,
        )?;
        s.record.filter = Some(filter);
        s.filtered_label = filtered;
    }
    bench.profile = profile;
    bench.config.thresholds = *thresholds;
    Ok(())
}

fn pick_value(ctx: &Ctx<'_>, kind: AttributeKind, caption: &str, seed: u64) -> Result<String> {
    let words: Vec<String> = tokenize(caption).iter().map(|w| w.to_lowercase()).collect();
    let all = ctx.config.attributes.values(kind);
    let fresh: Vec<&String> = all
        .iter()
        .filter(|v| {
            !tokenize(v)
                .iter()
                .all(|t| words.contains(&t.to_lowercase()))
        })
        .collect();
    let known: Vec<&String> = fresh
        .iter()
        .copied()
        .filter(|v| tokenize(v).iter().all(|t| ctx.backends.vocab.contains(t)))
        .collect();
    let pool = if known.is_empty() { fresh } else { known };
    if pool.is_empty() {
        return Err(invalid(format!(
            "no {} value differs from the caption",
            kind.name()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(pool[rng.random_range(0..pool.len())].clone())
}

fn edit_request(
    ctx: &Ctx<'_>,
    kind: AttributeKind,
    caption: &str,
    seed: u64,
) -> Result<EditRequest> {
    if let Some(client) = ctx.backends.language {
        let reqs = llm_edit(client, caption, kind, &ctx.config.attributes)?;
        if reqs.is_empty() {
            return Err(invalid("language client returned no usable edit"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok(reqs[rng.random_range(0..reqs.len())].clone());
    }
    let parts = decompose_caption(caption)?;
    let value = pick_value(ctx, kind, caption, seed)?;
    edit_attribute(&parts, kind, &value, &ctx.config.attributes)
}

fn run_recon(
    ctx: &Ctx<'_>,
    src: &SourceSample,
    obj: &SalientObject,
    seed: u64,
) -> Result<BenchSample> {
    let b = ctx.backends;
    let (image, _) = reconstruct(
        &src.image,
        &src.label,
        &tokenize(&src.caption),
        b.denoiser,
        b.vocab,
        b.schedule,
    )?;
    let record = base_record(ctx, src, obj, Variation::Recon, seed);
    finish(ctx, src, record, image, src.label.clone(), obj.mask.clone())
}

fn run_appearance(
    ctx: &Ctx<'_>,
    src: &SourceSample,
    obj: &SalientObject,
    attribute: AttributeKind,
    seed: u64,
) -> Result<BenchSample> {
    let b = ctx.backends;
    let request = edit_request(ctx, attribute, &src.caption, seed)?;
    let ed = edit_appearance(
        &src.image,
        &src.label,
        &obj.mask,
        &request,
        b.denoiser,
        b.vocab,
        b.schedule,
        &ctx.config.edit,
    )?;
    let mut record = base_record(ctx, src, obj, Variation::Appearance { attribute }, seed);
    record.edited_prompt = request.target.clone();
    record.value = Some(request.value.clone());
    let mut log = ed.log;
    log.sample_id = record.key();
    record.appearance_log = Some(log);
    finish(
        ctx,
        src,
        record,
        ed.image,
        src.label.clone(),
        obj.mask.clone(),
    )
}

fn geometry_context<'a>(
    ctx: &'a Ctx<'a>,
    obj: &'a SalientObject,
    bg_names: &'a [String],
) -> GeometryContext<'a> {
    GeometryContext {
        object_mask: &obj.mask,
        object_name: &ctx.info.class_names[obj.class as usize],
        background_classes: &ctx.info.background,
        background_names: bg_names,
        vlm: ctx.backends.vlm,
    }
}

fn run_geometry(
    ctx: &Ctx<'_>,
    src: &SourceSample,
    obj: &SalientObject,
    kind: GeometryKind,
    level: f64,
    seed: u64,
) -> Result<BenchSample> {
    let bg_names = ctx.info.background_names();
    let gctx = geometry_context(ctx, obj, &bg_names);
    let spec = GeometryEditSpec { kind, level, seed };
    let ge = edit_geometry(
        &src.image,
        &src.label,
        &gctx,
        &spec,
        ctx.backends.inpainter,
        derive_seed(seed, 0, 1),
    )?;
    let mut record = base_record(ctx, src, obj, Variation::Geometry { kind, level }, seed);
    let mut log = ge.log;
    log.sample_id = record.key();
    record.geometry_log = Some(log);
    finish(ctx, src, record, ge.image, ge.label, ge.mask)
}

#[allow(clippy::too_many_arguments)]
fn run_combined(
    ctx: &Ctx<'_>,
    src: &SourceSample,
    obj: &SalientObject,
    attribute: AttributeKind,
    kind: GeometryKind,
    level: f64,
    seed: u64,
) -> Result<BenchSample> {
    let b = ctx.backends;
    let bg_names = ctx.info.background_names();
    let gctx = geometry_context(ctx, obj, &bg_names);
    let spec = GeometryEditSpec { kind, level, seed };
    let ge = edit_geometry(
        &src.image,
        &src.label,
        &gctx,
        &spec,
        b.inpainter,
        derive_seed(seed, 0, 1),
    )?;
    let request = edit_request(ctx, attribute, &src.caption, derive_seed(seed, 0, 2))?;
    let ed = edit_appearance(
        &ge.image,
        &ge.label,
        &ge.mask,
        &request,
        b.denoiser,
        b.vocab,
        b.schedule,
        &ctx.config.edit,
    )?;
    let mut record = base_record(
        ctx,
        src,
        obj,
        Variation::Combined {
            attribute,
            kind,
            level,
        },
        seed,
    );
    record.edited_prompt = request.target.clone();
    record.value = Some(request.value.clone());
    let mut glog = ge.log;
    glog.sample_id = record.key();
    record.geometry_log = Some(glog);
    let mut alog = ed.log;
    alog.sample_id = record.key();
    record.appearance_log = Some(alog);
    finish(ctx, src, record, ed.image, ge.label, ge.mask)
}

/// Applies one geometry and one appearance variation to a single source
/// sample, geometry first, and filters the result.
#[allow(clippy::too_many_arguments)]
pub fn combined_variation(
    src: &SourceSample,
    info: &DatasetInfo,
    attribute: AttributeKind,
    geometry: (GeometryKind, f64),
    backends: &Backends<'_>,
    config: &BuildConfig,
    profile: &ClassLossProfile,
    seed: u64,
) -> Result<BenchSample> {
    let obj = select_salient([&src.label], &info.background, 0.0)
        .pop()
        .ok_or_else(|| invalid(format!("{} has no foreground object", src.id)))?;
    let ctx = Ctx {
        info,
        backends,
        config,
        profile,
        config_hash: "",
    };
    run_combined(&ctx, src, &obj, attribute, geometry.0, geometry.1, seed)
}

fn attempt(
    ctx: &Ctx<'_>,
    src: &SourceSample,
    obj: &SalientObject,
    v: Variation,
    seed: u64,
) -> Result<BenchSample> {
    match v {
        Variation::Recon => run_recon(ctx, src, obj, seed),
        Variation::Appearance { attribute } => run_appearance(ctx, src, obj, attribute, seed),
        Variation::Geometry { kind, level } => run_geometry(ctx, src, obj, kind, level, seed),
        Variation::Combined {
            attribute,
            kind,
            level,
        } => run_combined(ctx, src, obj, attribute, kind, level, seed),
        Variation::Original => Err(invalid("original samples are not edited")),
    }
}

/// Builds every planned subset over the salient samples of `sources`.
/// Failed edits are logged and skipped; backend failures abort the build.
pub fn build_benchmark(
    sources: &[SourceSample],
    info: &DatasetInfo,
    backends: &Backends<'_>,
    config: &BuildConfig,
    config_hash: &str,
    seed: u64,
) -> Result<BenchmarkSet> {
    config.validate()?;
    let real: Vec<(Image, SegLabel)> = sources
        .iter()
        .map(|s| (s.image.clone(), s.label.clone()))
        .collect();
    let profile = class_loss_profile(&real, backends.surrogate, config.thresholds.alpha)?;
    let salient = select_salient(
        sources.iter().map(|s| &s.label),
        &info.background,
        config.salient_area,
    );
    log::info!(
        "{} of {} samples have a salient object",
        salient.len(),
        sources.len()
    );

    let ctx = Ctx {
        info,
        backends,
        config,
        profile: &profile,
        config_hash,
    };
    let mut plan = Vec::with_capacity(config.plan.len() + 1);
    if config
        .plan
        .iter()
        .any(|v| matches!(v.family(), Family::Appearance | Family::Combined))
    {
        plan.push(Variation::Recon);
    }
    plan.extend(config.plan.iter().copied());

    let mut samples = Vec::new();
    for obj in &salient {
        let src = &sources[obj.index];
        let record = base_record(
            &ctx,
            src,
            obj,
            Variation::Original,
            derive_seed(seed, obj.index, 0),
        );
        samples.push(BenchSample {
            record,
            image: src.image.quantized(),
            label: src.label.clone(),
            filtered_label: src.label.clone(),
            mask: obj.mask.clone(),
        });
    }
    for (vi, &v) in plan.iter().enumerate() {
        for obj in &salient {
            let src = &sources[obj.index];
            match attempt(&ctx, src, obj, v, derive_seed(seed, obj.index, vi + 1)) {
                Ok(sample) => samples.push(sample),
                Err(e @ Error::Backend(_)) => return Err(e),
                Err(e) => log::warn!("{}/{}: skipped: {e}", v.subset_name(), src.id),
            }
        }
    }
    Ok(BenchmarkSet {
        name: config.name.clone(),
        info: info.clone(),
        config: config.clone(),
        config_hash: config_hash.to_string(),
        seed,
        schedule: ScheduleInfo {
            kind: backends.schedule.kind,
            steps: backends.schedule.steps(),
        },
        profile,
        samples,
    })
}

/// Mean absolute pixel difference outside the object mask between each
/// sample of `subset` and its recon counterpart.
pub fn appearance_leakage(bench: &BenchmarkSet, subset: &str) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for s in bench.subset(subset) {
        let Some(recon) = bench.find("recon", &s.record.id) else {
            continue;
        };
        total += s.image.mean_abs_diff(&recon.image, Some(&s.mask.not()))?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::MissingBaseline("recon".to_string()));
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_names_round_trip() {
        let vs = [
            Variation::Original,
            Variation::Recon,
            Variation::Appearance {
                attribute: AttributeKind::Weather,
            },
            Variation::Geometry {
                kind: GeometryKind::Size,
                level: 0.2,
            },
            Variation::Geometry {
                kind: GeometryKind::Position,
                level: 0.4,
            },
            Variation::Combined {
                attribute: AttributeKind::Color,
                kind: GeometryKind::Size,
                level: 0.2,
            },
        ];
        let names: Vec<String> = vs.iter().map(|v| v.subset_name()).collect();
        assert_eq!(
            names,
            [
                "original",
                "recon",
                "weather",
                "size_0.2",
                "position_0.4",
                "color+size_0.2"
            ]
        );
        for (v, n) in vs.iter().zip(&names) {
            assert_eq!(Variation::parse(n).unwrap(), *v);
        }
        assert!(Variation::parse("size_1.5").is_err());
        assert!(Variation::parse("texture").is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(7, 0, 1);
        assert_eq!(a, derive_seed(7, 0, 1));
        assert_ne!(a, derive_seed(7, 1, 1));
        assert_ne!(a, derive_seed(7, 0, 2));
        assert_ne!(a, derive_seed(8, 0, 1));
    }
}
