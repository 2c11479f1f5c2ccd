//! Benchmark construction from salient samples, mIoU, and robustness
//! reports.

mod build;
mod metrics;
mod robustness;
mod select;

pub use build::{
    appearance_leakage, build_benchmark, combined_variation, derive_seed, filter_sample, refilter,
    Backends, BenchSample, BenchmarkSet, BuildConfig, DatasetInfo, Family, SampleRecord,
    ScheduleInfo, SourceSample, Variation,
};
pub use metrics::{miou, ConfusionMatrix, MiouResult};
pub use robustness::{
    baseline_for, render_markdown, robustness_from_scores, robustness_report, subset_scores,
    EvalRegion, EvalRegions, RobustnessReport, SubsetScore,
};
pub use select::{foreground_objects, select_salient, SalientObject, SALIENT_AREA};
