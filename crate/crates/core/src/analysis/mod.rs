//! Classification-image analysis of answered trials: per-participant kernels,
//! group statistics, response bias, and exported tables and plots.

mod bias;
mod dataset;
mod export;
mod kernel;
mod stats;

pub use bias::{bias, BiasReport};
pub use dataset::{
    analyze, analyze_trials, infer_labels, join_trials, segment_axis, AnalysisOptions,
    AnalysisResult, GroupBy,
};
pub use export::{
    export_results, render_svg, write_bias_csv, write_kernels_csv, write_stats_csv, BIAS_FILE,
    KERNELS_FILE, PLOT_FILE, STATS_CSV_HEADER, STATS_FILE,
};
pub use kernel::{
    cosine_similarity, group_kernel_difference, normalize_kernel_pair, per_option_means,
    template_direction, Domain, Kernel, KernelPair, OptionMeans, ParticipantKernels, Trial,
};
pub use stats::{
    group_stats, paired_t, t_quantile, t_two_sided_p, Correction, GroupStats, PairedT,
    SegmentStats, ALPHA,
};
