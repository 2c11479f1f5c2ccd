//! End-to-end steps shared by the CLI and the tests: scene generation,
//! denoiser training, benchmark construction and evaluation.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use segbench_core::bench::{
    build_benchmark, render_markdown, robustness_report, Backends, BenchmarkSet, DatasetInfo,
    RobustnessReport, SourceSample,
};
use segbench_core::diffusion::{
    make_schedule, train_toy_denoiser, Denoiser, LinearDenoiser, NoiseSchedule, ToyConfig,
    ToyDenoiser, TrainReport, TrainingExample, LATENT_CHANNELS, LATENT_FACTOR,
};
use segbench_core::filtering::LexiconEmbedder;
use segbench_core::geometry::DiffusionInpainter;
use segbench_core::prompt::{tokenize, LanguageClient, Vocabulary};
use segbench_core::scenes::{generate_scene, Image, PrototypeSegmenter, SceneWorld, SegLabel};
use segbench_core::tensor::LatentShape;

use crate::config::RunConfig;
use crate::dataset::SceneMeta;
use crate::http::HttpLanguageClient;
use crate::io::{write_json, write_json_lines};

/// Words the toy denoiser's vocabulary covers: caption scaffolding, class
/// and color names, attribute values and the phrases caption edits insert.
pub fn world_vocabulary(config: &RunConfig) -> Vocabulary {
    let world = &config.world;
    let mut words: Vec<String> = Vec::new();
    let mut add = |text: &str| {
        for t in tokenize(text) {
            let t = t.to_lowercase();
            if !words.contains(&t) {
                words.push(t);
            }
        }
    };
    add("a an photo of the on in at under style sculpture model");
    for c in world.class_names() {
        add(&c);
    }
    for c in &world.palette {
        add(&c.name);
    }
    for w in config.build.attributes.words() {
        add(&w);
    }
    add(&config.inpaint_caption.replace("{}", " "));
    words.retain(|w| w.chars().any(char::is_alphanumeric));
    Vocabulary::new(words)
}

pub fn dataset_info(world: &SceneWorld) -> DatasetInfo {
    DatasetInfo {
        class_names: world.class_names(),
        background: world.background_classes(),
    }
}

pub fn latent_shape(world: &SceneWorld) -> LatentShape {
    LatentShape {
        channels: LATENT_CHANNELS,
        height: world.height / LATENT_FACTOR,
        width: world.width / LATENT_FACTOR,
    }
}

pub fn schedule(config: &RunConfig) -> Result<NoiseSchedule> {
    ensure!(
        config.build.edit.steps == config.diffusion_steps,
        "edit steps ({}) must match diffusion_steps ({})",
        config.build.edit.steps,
        config.diffusion_steps
    );
    Ok(make_schedule(config.diffusion_steps, config.schedule)?)
}

/// Training pairs for the denoiser. With `recolor`, each scene is
/// re-rendered from its seed once per palette color of its leading object.
pub fn training_examples(
    config: &RunConfig,
    data: &[(SourceSample, SceneMeta)],
    vocab: &Vocabulary,
) -> Result<Vec<TrainingExample>> {
    let world = &config.world;
    let mut out = Vec::new();
    for (sample, meta) in data {
        if config.training.recolor {
            let spec = world.sample_spec(meta.seed);
            for variant in world.recolor_variants(&spec) {
                let scene = generate_scene(&variant)?;
                let caption = world.caption(&variant);
                out.push(TrainingExample::from_scene(
                    &scene.image,
                    vocab.encode_text(&caption),
                    &scene.label,
                )?);
            }
        } else {
            out.push(TrainingExample::from_scene(
                &sample.image,
                vocab.encode_text(&sample.caption),
                &sample.label,
            )?);
        }
    }
    Ok(out)
}

pub fn train(
    config: &RunConfig,
    data: &[(SourceSample, SceneMeta)],
    seed: u64,
) -> Result<(ToyDenoiser, Vocabulary, NoiseSchedule, TrainReport)> {
    let vocab = world_vocabulary(config);
    let schedule = schedule(config)?;
    let examples = training_examples(config, data, &vocab)?;
    let mut model = ToyConfig::new(
        latent_shape(&config.world),
        config.world.num_classes(),
        vocab.len(),
    );
    model.steps = schedule.steps();
    model.seed = seed;
    let mut opts = config.training.options.clone();
    opts.seed = seed;
    log::info!(
        "training on {} examples for {} steps",
        examples.len(),
        opts.steps
    );
    let (denoiser, report) = train_toy_denoiser(model, &examples, &schedule, &opts)?;
    Ok((denoiser, vocab, schedule, report))
}

/// Denoiser chosen by `--backend`.
pub enum DenoiserBackend {
    Toy(ToyDenoiser),
    Linear(LinearDenoiser),
}

impl DenoiserBackend {
    pub fn as_denoiser(&self) -> &dyn Denoiser {
        match self {
            Self::Toy(d) => d,
            Self::Linear(d) => d,
        }
    }

    /// An untrained linear denoiser whose map has Frobenius norm below 0.01,
    /// so inversion followed by sampling nearly reproduces the input.
    pub fn linear(config: &RunConfig, seed: u64) -> Self {
        let shape = latent_shape(&config.world);
        Self::Linear(LinearDenoiser::random(
            shape,
            0.01 / shape.len() as f64,
            seed,
        ))
    }
}

fn real_pairs(sources: &[SourceSample]) -> Vec<(Image, SegLabel)> {
    sources
        .iter()
        .map(|s| (s.image.clone(), s.label.clone()))
        .collect()
}

pub fn build(
    config: &RunConfig,
    sources: &[SourceSample],
    denoiser: &dyn Denoiser,
    vocab: &Vocabulary,
    schedule: &NoiseSchedule,
    seed: u64,
) -> Result<BenchmarkSet> {
    let info = dataset_info(&config.world);
    let surrogate = PrototypeSegmenter::fit(&real_pairs(sources), config.surrogate_temperature)?;
    let embedder =
        LexiconEmbedder::for_world(&config.world, config.embedder.dim, config.embedder.seed)?;
    let inpainter = DiffusionInpainter {
        denoiser,
        vocab,
        schedule,
        caption_template: config.inpaint_caption.clone(),
    };
    let http = config.language.clone().map(HttpLanguageClient::new);
    let backends = Backends {
        denoiser,
        vocab,
        schedule,
        inpainter: &inpainter,
        embedder: &embedder,
        surrogate: &surrogate,
        language: http.as_ref().map(|c| c as &dyn LanguageClient),
        vlm: None,
    };
    let hash = config.hash()?;
    Ok(build_benchmark(
        sources,
        &info,
        &backends,
        &config.build,
        &hash,
        seed,
    )?)
}

/// Prototype segmenter fit on the benchmark's original subset.
pub fn evaluated_model(config: &RunConfig, bench: &BenchmarkSet) -> Result<PrototypeSegmenter> {
    let originals: Vec<(Image, SegLabel)> = bench
        .subset("original")
        .map(|s| (s.image.clone(), s.label.clone()))
        .collect();
    if originals.is_empty() {
        bail!("benchmark {} has no original samples", bench.name);
    }
    Ok(PrototypeSegmenter::fit(
        &originals,
        config.model_temperature,
    )?)
}

pub fn evaluate(config: &RunConfig, bench: &BenchmarkSet) -> Result<Vec<RobustnessReport>> {
    let model = evaluated_model(config, bench)?;
    Ok(robustness_report(
        &model,
        "prototype",
        bench,
        config.eval_region,
    )?)
}

/// Writes `report.json` (one object per edit family) and `report.md`.
pub fn write_reports(
    out: &Path,
    reports: &[RobustnessReport],
    class_names: &[String],
) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_json(&out.join("report.json"), &reports)?;
    std::fs::write(out.join("report.md"), render_markdown(reports, class_names))?;
    Ok(())
}

/// Per-subset counts and filter outcomes as markdown.
pub fn summary_markdown(bench: &BenchmarkSet) -> String {
    let mut md = format!("# Benchmark {}\n\nconfig {}\n\n| Subset | attempted | kept | rejected | discarded |\n|---|---|---|---|---|\n", bench.name, bench.config_hash);
    for name in bench.subset_names() {
        let all: Vec<_> = bench
            .samples
            .iter()
            .filter(|s| s.record.subset == name)
            .collect();
        let kept = all.iter().filter(|s| s.kept()).count();
        let rejected = all
            .iter()
            .filter(|s| s.record.filter.as_ref().is_some_and(|f| !f.accepted))
            .count();
        let discarded = all
            .iter()
            .filter(|s| s.record.filter.as_ref().is_some_and(|f| f.discarded))
            .count();
        md += &format!(
            "| {name} | {} | {kept} | {rejected} | {discarded} |\n",
            all.len()
        );
    }
    md
}

pub fn write_filter_report(out: &Path, bench: &BenchmarkSet) -> Result<()> {
    write_json_lines(&out.join("filter_report.jsonl"), &bench.filter_report())
}
