//! Synthetic data, separation metrics, benchmark runs and their artifacts.

pub mod io;
pub mod metrics;
pub mod runner;
pub mod svg;
pub mod synthetic;

pub use io::{
    read_matrix, read_matrix_bin, read_matrix_csv, read_trace_csv, write_matrix_bin,
    write_matrix_csv, write_trace_csv, TraceRow,
};
pub use metrics::{amari_index, excess_kurtosis, median, percentile};
pub use runner::{
    aggregate_by_iteration, aggregate_by_time, run_benchmark, Algorithm, BandPoint, Preset,
    RunRecord,
};
pub use svg::render_svg;
pub use synthetic::{gen_synthetic, DatasetSpec, Mixing, SourceKind, SyntheticData};
