//! Benchmark directories: `<root>/<name>/{manifest.json, manifest.sha256,
//! profile.json, filter_report.jsonl, <subset>/..., logs/...}`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use segbench_core::bench::{
    BenchSample, BenchmarkSet, BuildConfig, DatasetInfo, SampleRecord, ScheduleInfo,
};
use segbench_core::filtering::ClassLossProfile;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::{
    load_image, load_label, load_mask, read_json, save_image, save_label, save_mask, write_json,
    write_json_lines,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: BuildConfig,
    pub schedule: ScheduleInfo,
    pub info: DatasetInfo,
    pub profile: ClassLossProfile,
    pub records: Vec<SampleRecord>,
    /// SHA-256 of every written file, by relative path.
    pub files: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of a serializable value's compact JSON encoding.
pub fn json_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(value)?))
}

fn log_path(record: &SampleRecord) -> String {
    format!("logs/{}_{}.json", record.subset, record.id)
}

/// Writes the benchmark under `root/<name>` and returns the manifest hash.
pub fn save_benchmark(root: &Path, bench: &BenchmarkSet) -> Result<(PathBuf, String)> {
    let dir = root.join(&bench.name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
    }
    std::fs::create_dir_all(&dir)?;
    let mut written: Vec<String> = Vec::new();
    for s in &bench.samples {
        let r = &s.record;
        save_image(&dir.join(&r.image), &s.image)?;
        save_label(&dir.join(&r.label), &s.label)?;
        save_label(&dir.join(&r.filtered_label), &s.filtered_label)?;
        save_mask(&dir.join(&r.mask), &s.mask)?;
        written.extend([
            r.image.clone(),
            r.label.clone(),
            r.filtered_label.clone(),
            r.mask.clone(),
        ]);
        if r.appearance_log.is_some() || r.geometry_log.is_some() {
            let p = log_path(r);
            let logs =
                serde_json::json!({ "appearance": r.appearance_log, "geometry": r.geometry_log });
            write_json(&dir.join(&p), &logs)?;
            written.push(p);
        }
    }
    write_json(&dir.join("profile.json"), &bench.profile)?;
    write_json_lines(&dir.join("filter_report.jsonl"), &bench.filter_report())?;
    written.extend([
        "profile.json".to_string(),
        "filter_report.jsonl".to_string(),
    ]);

    let mut files = BTreeMap::new();
    for p in written {
        let bytes = std::fs::read(dir.join(&p))?;
        files.insert(p, sha256_hex(&bytes));
    }
    let manifest = Manifest {
        name: bench.name.clone(),
        seed: bench.seed,
        config_hash: bench.config_hash.clone(),
        config: bench.config.clone(),
        schedule: bench.schedule.clone(),
        info: bench.info.clone(),
        profile: bench.profile.clone(),
        records: bench.samples.iter().map(|s| s.record.clone()).collect(),
        files,
    };
    let hash = json_hash(&manifest)?;
    write_json(&dir.join("manifest.json"), &manifest)?;
    std::fs::write(dir.join("manifest.sha256"), format!("{hash}\n"))?;
    log::info!(
        "wrote {} samples to {} (manifest {hash})",
        bench.samples.len(),
        dir.display()
    );
    Ok((dir, hash))
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    read_json(&dir.join("manifest.json"))
}

/// Reads a benchmark directory written by [`save_benchmark`], checking
/// that every record's files exist and carry the manifest's config hash.
pub fn load_benchmark(dir: &Path) -> Result<BenchmarkSet> {
    let m = load_manifest(dir)?;
    let k = m.info.num_classes();
    let samples = m
        .records
        .iter()
        .map(|r| {
            ensure!(
                r.config_hash == m.config_hash,
                "{}: config hash differs from the manifest",
                r.key()
            );
            Ok(BenchSample {
                record: r.clone(),
                image: load_image(&dir.join(&r.image))?,
                label: load_label(&dir.join(&r.label), k)?,
                filtered_label: load_label(&dir.join(&r.filtered_label), k)?,
                mask: load_mask(&dir.join(&r.mask))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkSet {
        name: m.name,
        info: m.info,
        config: m.config,
        config_hash: m.config_hash,
        seed: m.seed,
        schedule: m.schedule,
        profile: m.profile,
        samples,
    })
}

/// Recomputes file hashes and reports paths whose content changed.
pub fn verify_files(dir: &Path, manifest: &Manifest) -> Result<Vec<String>> {
    let mut bad = Vec::new();
    for (p, h) in &manifest.files {
        let bytes = std::fs::read(dir.join(p)).with_context(|| format!("reading {p}"))?;
        if &sha256_hex(&bytes) != h {
            bad.push(p.clone());
        }
    }
    Ok(bad)
}
