//! Reproducible synthetic mixtures.
//!
//! All randomness comes from ChaCha20 keyed by the dataset seed. ChaCha is a
//! counter-based generator with independent 64-bit streams, which are split
//! as follows:
//!
//! * stream `0` draws the mixing matrix (including any redraws),
//! * stream `1 + i` draws source `i`.
//!
//! A source therefore does not change when sources are added after it or
//! when the mixing matrix is redrawn.
//!
//! Temporally dependent sources come in two flavours. The plain one runs
//! `s_t = φ s_{t−1} + √(1−φ²) e_t` on the family's own draws `e_t`, which
//! pulls the marginal towards a Gaussian (excess kurtosis shrinks by
//! `(1−φ²)²/(1−φ⁴)`). The copula one pushes a Gaussian AR(1) process
//! through the Gaussian CDF and the family's quantile function, which keeps
//! the marginal exact.

use nalgebra::SVD;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{IcaError, Result};
use crate::linalg::{Mat, SignalMatrix};

/// Mixing matrices with a larger 2-norm condition number are redrawn.
pub const MAX_MIXING_CONDITION: f64 = 1e4;
const MIXING_STREAM: u64 = 0;
const MAX_REDRAWS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SourceKind {
    /// Uniform on `[−1, 1]`.
    Uniform,
    /// Density `∝ exp(−|x|)`.
    Laplace,
    Gaussian,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mixing {
    /// I.i.d. standard normal entries.
    #[default]
    RandomGaussian,
    Identity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub n_channels: usize,
    pub n_samples: usize,
    pub uniform: usize,
    pub laplace: usize,
    pub gaussian: usize,
    pub mixing: Mixing,
    /// AR(1) coefficient applied to every source; `0` gives i.i.d. samples.
    pub ar_coef: f64,
    /// Build AR(1) sources through a Gaussian copula instead of filtering
    /// the family's draws directly.
    pub ar_copula: bool,
    pub seed: u64,
}

impl DatasetSpec {
    /// `uniform` uniform sources followed by `laplace` Laplace sources,
    /// randomly mixed.
    pub fn uniform_laplace(uniform: usize, laplace: usize, n_samples: usize, seed: u64) -> Self {
        DatasetSpec {
            n_channels: uniform + laplace,
            n_samples,
            uniform,
            laplace,
            gaussian: 0,
            mixing: Mixing::RandomGaussian,
            ar_coef: 0.0,
            ar_copula: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let total = self.uniform + self.laplace + self.gaussian;
        if total != self.n_channels {
            return Err(IcaError::InvalidSpec(format!(
                "source counts sum to {total}, expected {}",
                self.n_channels
            )));
        }
        if self.n_channels == 0 {
            return Err(IcaError::InvalidSpec("no sources requested".into()));
        }
        if self.n_samples < self.n_channels {
            return Err(IcaError::InvalidSpec(format!(
                "{} samples is fewer than {} channels",
                self.n_samples, self.n_channels
            )));
        }
        if !(self.ar_coef.abs() < 1.0) {
            return Err(IcaError::InvalidSpec(format!(
                "AR(1) coefficient {} is not stationary",
                self.ar_coef
            )));
        }
        Ok(())
    }

    pub fn source_kinds(&self) -> Vec<SourceKind> {
        std::iter::repeat_n(SourceKind::Uniform, self.uniform)
            .chain(std::iter::repeat_n(SourceKind::Laplace, self.laplace))
            .chain(std::iter::repeat_n(SourceKind::Gaussian, self.gaussian))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub x: SignalMatrix,
    pub a_true: Mat,
    pub s_true: SignalMatrix,
    /// Mixing matrices rejected by the conditioning guard.
    pub mixing_redraws: usize,
}

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn draw(kind: SourceKind, rng: &mut ChaCha20Rng) -> f64 {
    match kind {
        SourceKind::Uniform => (2.0 * rng.random::<f64>() - 1.0) * 3f64.sqrt(),
        SourceKind::Laplace => {
            // inverse CDF; 1 − 2|u| lies in (0, 1] for u ∈ [−1/2, 1/2)
            let u = rng.random::<f64>() - 0.5;
            let mag = -(1.0 - 2.0 * u.abs()).ln();
            u.signum() * mag / std::f64::consts::SQRT_2
        }
        SourceKind::Gaussian => rng.sample(StandardNormal),
    }
}

/// Family quantile of `Φ(z)` for a standard normal `z`, written with
/// `erf`/`erfc` so the tails keep full precision.
fn from_gaussian(kind: SourceKind, z: f64) -> f64 {
    let r = z / std::f64::consts::SQRT_2;
    match kind {
        SourceKind::Uniform => libm::erf(r) * 3f64.sqrt(),
        // 2·P(Z > |z|) = erfc(|z|/√2)
        SourceKind::Laplace => z.signum() * -libm::erfc(r.abs()).ln() / std::f64::consts::SQRT_2,
        SourceKind::Gaussian => z,
    }
}

fn condition_number(a: &Mat) -> f64 {
    let sv = SVD::new(a.clone(), false, false).singular_values;
    let min = sv.min();
    if min > 0.0 {
        sv.max() / min
    } else {
        f64::INFINITY
    }
}

/// Draws the sources, standardizes each row to zero sample mean and unit
/// sample variance, and mixes them.
pub fn gen_synthetic(spec: &DatasetSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let n = spec.n_channels;
    let t = spec.n_samples;
    let phi = spec.ar_coef;
    let innovation_scale = (1.0 - phi * phi).sqrt();

    let mut s = Mat::zeros(n, t);
    for (i, kind) in spec.source_kinds().into_iter().enumerate() {
        let mut rng = stream(spec.seed, 1 + i as u64);
        if !spec.ar_copula {
            let mut prev = draw(kind, &mut rng);
            s[(i, 0)] = prev;
            for j in 1..t {
                prev = phi * prev + innovation_scale * draw(kind, &mut rng);
                s[(i, j)] = prev;
            }
        } else {
            let mut z: f64 = rng.sample(StandardNormal);
            for j in 0..t {
                if j > 0 {
                    z = phi * z + innovation_scale * rng.sample::<f64, _>(StandardNormal);
                }
                s[(i, j)] = from_gaussian(kind, z);
            }
        }
        let mut row = s.row_mut(i);
        let mean = row.mean();
        row.add_scalar_mut(-mean);
        let sd = (row.norm_squared() / t as f64).sqrt();
        row /= sd;
    }

    let (a, redraws) = match spec.mixing {
        Mixing::Identity => (Mat::identity(n, n), 0),
        Mixing::RandomGaussian => {
            let mut rng = stream(spec.seed, MIXING_STREAM);
            let mut redraws = 0;
            loop {
                let a = Mat::from_fn(n, n, |_, _| rng.sample(StandardNormal));
                if condition_number(&a) <= MAX_MIXING_CONDITION {
                    break (a, redraws);
                }
                redraws += 1;
                if redraws >= MAX_REDRAWS {
                    return Err(IcaError::InvalidSpec(
                        "could not draw a well-conditioned mixing matrix".into(),
                    ));
                }
            }
        }
    };
    if redraws > 0 {
        log::info!(
            "seed {}: redrew the mixing matrix {redraws} time(s)",
            spec.seed
        );
    }
    let x = SignalMatrix::new(&a * &s)?;
    Ok(SyntheticData {
        x,
        a_true: a,
        s_true: SignalMatrix::new(s)?,
        mixing_redraws: redraws,
    })
}
