//! Benchmark runs and their aggregation into median / percentile curves.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::bench::metrics::{amari_index, percentile};
use crate::bench::synthetic::{gen_synthetic, DatasetSpec};
use crate::error::{IcaError, Result};
use crate::fastica::fastica_solve_whitened;
use crate::linalg::{whiten, Whitening};
use crate::picardo::{solve_whitened, IterationTrace, SolverConfig, Termination};

/// Caps the worker threads used across benchmark runs.
pub const THREADS_ENV: &str = "PICARDO_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Picardo,
    FastIca,
}

impl Algorithm {
    pub const ALL: [Algorithm; 2] = [Algorithm::Picardo, Algorithm::FastIca];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Picardo => "picardo",
            Algorithm::FastIca => "fastica",
        }
    }

    pub fn solve(self, whitening: &Whitening, config: &SolverConfig) -> Result<crate::SolveResult> {
        match self {
            Algorithm::Picardo => solve_whitened(whitening, config),
            Algorithm::FastIca => fastica_solve_whitened(whitening, config),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "picardo" => Ok(Algorithm::Picardo),
            "fastica" => Ok(Algorithm::FastIca),
            other => Err(format!("unknown algorithm '{other}'")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub converged: bool,
    /// Length of the trace (one entry per evaluated iterate).
    pub iterations: usize,
    /// Timestamp of the last trace entry.
    pub seconds: f64,
    pub final_grad_norm: f64,
    /// Amari index of `W·A`; NaN when the run failed before producing `W`.
    pub final_amari: f64,
    pub trace: IterationTrace,
    pub termination: Termination,
    /// Checksum of the whitened input the run consumed.
    pub input_checksum: u64,
}

impl RunRecord {
    fn from_trace(
        algorithm: Algorithm,
        seed: u64,
        trace: IterationTrace,
        termination: Termination,
        final_amari: f64,
        input_checksum: u64,
    ) -> Self {
        let last = trace.last().copied();
        RunRecord {
            algorithm,
            seed,
            converged: termination == Termination::Converged,
            iterations: trace.len(),
            seconds: last.map_or(0.0, |r| r.elapsed_s),
            final_grad_norm: last.map_or(f64::NAN, |r| r.grad_norm),
            final_amari,
            trace,
            termination,
            input_checksum,
        }
    }
}

/// FNV-1a over the bit patterns of the matrix entries.
pub fn matrix_checksum(m: &crate::linalg::Mat) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for v in m.iter() {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

fn thread_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .expect("failed to build benchmark thread pool")
}

fn run_one_spec(
    spec: &DatasetSpec,
    config: &SolverConfig,
    algorithms: &[Algorithm],
) -> Vec<RunRecord> {
    let failed = |algo: Algorithm, msg: String| {
        RunRecord::from_trace(
            algo,
            spec.seed,
            IterationTrace::new(),
            Termination::Failed(msg),
            f64::NAN,
            0,
        )
    };
    let data = match gen_synthetic(spec) {
        Ok(d) => d,
        Err(e) => {
            return algorithms
                .iter()
                .map(|&a| failed(a, e.to_string()))
                .collect()
        }
    };
    let whitening = match whiten(&data.x, config.eig_floor) {
        Ok(w) => w,
        Err(e) => {
            return algorithms
                .iter()
                .map(|&a| failed(a, e.to_string()))
                .collect()
        }
    };
    let checksum = matrix_checksum(whitening.y.as_matrix());
    log::debug!(
        "seed {}: whitened input checksum {checksum:016x}",
        spec.seed
    );
    algorithms
        .iter()
        .map(|&algo| match algo.solve(&whitening, config) {
            Ok(res) => {
                let amari = amari_index(&(&res.w * &data.a_true)).unwrap_or(f64::NAN);
                RunRecord::from_trace(algo, spec.seed, res.trace, res.termination, amari, checksum)
            }
            Err(e) => RunRecord {
                input_checksum: checksum,
                ..failed(algo, e.to_string())
            },
        })
        .collect()
}

/// Runs every algorithm on every dataset. Both algorithms see the same
/// whitened matrix for a given dataset. Failures are recorded, not raised.
/// Records are ordered by `(algorithm, seed)`.
pub fn run_benchmark(
    specs: &[DatasetSpec],
    config: &SolverConfig,
    algorithms: &[Algorithm],
) -> Result<Vec<RunRecord>> {
    if specs.is_empty() {
        return Err(IcaError::InvalidSpec(
            "benchmark needs at least one dataset".into(),
        ));
    }
    config.validate()?;
    if algorithms.is_empty() {
        return Ok(Vec::new());
    }
    let pool = thread_pool();
    let mut records: Vec<RunRecord> = pool.install(|| {
        specs
            .par_iter()
            .flat_map_iter(|spec| run_one_spec(spec, config, algorithms))
            .collect()
    });
    records.sort_by_key(|r| (r.algorithm, r.seed));
    Ok(records)
}

/// Median and 10/90 percentiles of the gradient norm at one abscissa.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandPoint {
    pub x: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
}

fn band_at(x: f64, mut values: Vec<f64>) -> BandPoint {
    values.sort_by(f64::total_cmp);
    BandPoint {
        x,
        median: percentile(&values, 50.0),
        p10: percentile(&values, 10.0),
        p90: percentile(&values, 90.0),
    }
}

fn runs_of(records: &[RunRecord], algorithm: Algorithm) -> Vec<&IterationTrace> {
    records
        .iter()
        .filter(|r| r.algorithm == algorithm && !r.trace.is_empty())
        .map(|r| &r.trace)
        .collect()
}

/// Gradient-norm band per iteration index. Runs that stopped early hold
/// their final value.
pub fn aggregate_by_iteration(records: &[RunRecord], algorithm: Algorithm) -> Vec<BandPoint> {
    let runs = runs_of(records, algorithm);
    let longest = runs.iter().map(|t| t.len()).max().unwrap_or(0);
    (0..longest)
        .map(|k| {
            let values = runs
                .iter()
                .map(|t| {
                    let recs = t.records();
                    recs[k.min(recs.len() - 1)].grad_norm
                })
                .collect();
            band_at(k as f64, values)
        })
        .collect()
}

/// Gradient-norm band on `n_points` evenly spaced times up to the slowest
/// run. Each run contributes its latest value at or before each time.
pub fn aggregate_by_time(
    records: &[RunRecord],
    algorithm: Algorithm,
    n_points: usize,
) -> Vec<BandPoint> {
    let runs = runs_of(records, algorithm);
    let t_max = runs
        .iter()
        .filter_map(|t| t.last().map(|r| r.elapsed_s))
        .fold(0.0, f64::max);
    if runs.is_empty() || n_points == 0 {
        return Vec::new();
    }
    let steps = n_points.max(2) - 1;
    (0..=steps)
        .map(|p| {
            let time = t_max * p as f64 / steps as f64;
            let values = runs
                .iter()
                .map(|t| {
                    let recs = t.records();
                    let idx = recs.partition_point(|r| r.elapsed_s <= time);
                    recs[idx.saturating_sub(1)].grad_norm
                })
                .collect();
            band_at(time, values)
        })
        .collect()
}

/// Named dataset families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// 5 uniform + 5 Laplace sources, T = 10⁴, 10 repeats.
    SyntheticSmall,
    /// 25 uniform + 25 Laplace sources, T = 10⁴, 100 repeats.
    SyntheticPaper,
    /// As `SyntheticSmall` but every source is AR(1)-filtered with
    /// coefficient 0.9, so samples are not i.i.d. and marginals are close
    /// to Gaussian.
    Ar1Misspec,
}

pub const AR1_COEF: f64 = 0.9;

impl Preset {
    pub fn defaults(self) -> (usize, usize, usize) {
        match self {
            Preset::SyntheticSmall | Preset::Ar1Misspec => (10, 10_000, 10),
            Preset::SyntheticPaper => (50, 10_000, 100),
        }
    }

    /// Dataset specs for `repeats` consecutive seeds starting at `seed`.
    /// The first half of the sources are uniform, the rest Laplace.
    pub fn specs(
        self,
        n: Option<usize>,
        t: Option<usize>,
        repeats: Option<usize>,
        seed: u64,
    ) -> Vec<DatasetSpec> {
        let (dn, dt, dr) = self.defaults();
        let (n, t, repeats) = (n.unwrap_or(dn), t.unwrap_or(dt), repeats.unwrap_or(dr));
        let ar_coef = if self == Preset::Ar1Misspec {
            AR1_COEF
        } else {
            0.0
        };
        (0..repeats as u64)
            .map(|r| DatasetSpec {
                ar_coef,
                ..DatasetSpec::uniform_laplace(n / 2, n - n / 2, t, seed.wrapping_add(r))
            })
            .collect()
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "synthetic-small" => Ok(Preset::SyntheticSmall),
            "synthetic-paper" => Ok(Preset::SyntheticPaper),
            "ar1-misspec" => Ok(Preset::Ar1Misspec),
            other => Err(format!("unknown preset '{other}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::picardo::IterationRecord;

    fn record(algorithm: Algorithm, seed: u64, norms: &[f64]) -> RunRecord {
        let mut trace = IterationTrace::new();
        for (k, &g) in norms.iter().enumerate() {
            trace.push(IterationRecord {
                iter: k,
                grad_norm: g,
                loss: 0.0,
                elapsed_s: k as f64 * 0.5,
                ls_count: 0,
                sign_flips: 0,
            });
        }
        RunRecord::from_trace(algorithm, seed, trace, Termination::Converged, 0.0, 0)
    }

    #[test]
    fn empty_algorithm_set_gives_no_records() {
        let specs = vec![DatasetSpec::uniform_laplace(1, 1, 100, 0)];
        assert!(run_benchmark(&specs, &SolverConfig::default(), &[])
            .unwrap()
            .is_empty());
        assert!(run_benchmark(&[], &SolverConfig::default(), &Algorithm::ALL).is_err());
    }

    #[test]
    fn failed_runs_are_recorded() {
        let mut bad = DatasetSpec::uniform_laplace(1, 1, 100, 0);
        bad.n_channels = 3;
        let recs = run_benchmark(&[bad], &SolverConfig::default(), &Algorithm::ALL).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| !r.converged && r.iterations == 0));
    }

    #[test]
    fn record_invariants() {
        let r = record(Algorithm::Picardo, 3, &[1.0, 0.1, 0.01]);
        assert_eq!(r.iterations, r.trace.len());
        assert_eq!(r.seconds, 1.0);
        assert_eq!(r.final_grad_norm, 0.01);
    }

    #[test]
    fn iteration_bands_hold_final_values() {
        let recs = vec![
            record(Algorithm::Picardo, 0, &[1.0, 0.5]),
            record(Algorithm::Picardo, 1, &[2.0, 0.25, 0.125]),
            record(Algorithm::FastIca, 0, &[5.0]),
        ];
        let band = aggregate_by_iteration(&recs, Algorithm::Picardo);
        assert_eq!(band.len(), 3);
        assert_eq!(band[0].median, 1.5);
        assert_eq!(band[2].median, 0.3125);
        let time = aggregate_by_time(&recs, Algorithm::Picardo, 5);
        assert_eq!(time.len(), 5);
        assert_eq!(time.last().unwrap().x, 1.0);
        assert_eq!(time.last().unwrap().median, 0.3125);
    }

    #[test]
    fn presets_split_sources() {
        let specs = Preset::Ar1Misspec.specs(Some(7), Some(500), Some(3), 10);
        assert_eq!(specs.len(), 3);
        assert_eq!(specs[0].uniform, 3);
        assert_eq!(specs[0].laplace, 4);
        assert_eq!(specs[2].seed, 12);
        assert_eq!(specs[0].ar_coef, AR1_COEF);
        assert_eq!(
            "synthetic-paper".parse::<Preset>().unwrap().defaults(),
            (50, 10_000, 100)
        );
    }
}
