use crate::error::{Error, Result};

/// Zipf popularity over `n_files` ranks: `p(x) = x^-alpha / sum_k k^-alpha`.
///
/// Index 0 holds rank 1 (the most popular file).
pub fn zipf_pmf(alpha: f64, n_files: usize) -> Result<Vec<f64>> {
    if alpha <= 0.0 || !alpha.is_finite() {
        return Err(Error::config(format!(
            "zipf skewness must be a positive finite number, got {alpha}"
        )));
    }
    if n_files < 1 {
        return Err(Error::config("zipf distribution needs at least one file"));
    }
    let weights: Vec<f64> = (1..=n_files).map(|x| (x as f64).powf(-alpha)).collect();
    // smallest terms first
    let norm: f64 = weights.iter().rev().sum();
    Ok(weights.into_iter().map(|w| w / norm).collect())
}
