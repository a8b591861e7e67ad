//! Separation metrics and small statistics helpers.

use crate::error::{IcaError, Result};
use crate::linalg::Mat;

/// Amari index of `P = W·A`: zero exactly when `P` is a scaled, signed
/// permutation matrix, invariant to row and column permutations.
///
/// `(1/2N) Σ_i (Σ_j |p_ij| / max_j |p_ij| − 1) + (1/2N) Σ_j (Σ_i |p_ij| / max_i |p_ij| − 1)`
pub fn amari_index(p: &Mat) -> Result<f64> {
    if !p.is_square() || p.nrows() == 0 {
        return Err(IcaError::Dimension(format!(
            "Amari index of a {}x{} matrix",
            p.nrows(),
            p.ncols()
        )));
    }
    let n = p.nrows();
    let abs = p.abs();
    let mut rows = 0.0;
    for row in abs.row_iter() {
        let max = row.max();
        if !(max > 0.0) {
            return Err(IcaError::Degenerate("all-zero row in Amari index".into()));
        }
        rows += row.sum() / max - 1.0;
    }
    let mut cols = 0.0;
    for col in abs.column_iter() {
        let max = col.max();
        if !(max > 0.0) {
            return Err(IcaError::Degenerate(
                "all-zero column in Amari index".into(),
            ));
        }
        cols += col.sum() / max - 1.0;
    }
    Ok((rows + cols) / (2.0 * n as f64))
}

/// Sample excess kurtosis `m₄/m₂² − 3`.
pub fn excess_kurtosis(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let (m2, m4) = v.iter().fold((0.0, 0.0), |(a, b), x| {
        let d = (x - mean) * (x - mean);
        (a + d, b + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    m4 / (m2 * m2) - 3.0
}

/// Percentile `q ∈ [0, 100]` with linear interpolation between order
/// statistics. `sorted` must be ascending and non-empty.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 || sorted[lo] == sorted[hi] {
        // also keeps infinite order statistics out of the interpolation
        return sorted[lo];
    }
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile(&v, 50.0)
}
