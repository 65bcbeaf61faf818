//! Mode coverage, high-quality sample fraction, and energy distance.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub modes_total: usize,
    pub modes_covered: usize,
    pub high_quality_fraction: f64,
    /// High-quality samples attracted by each center.
    pub per_mode_counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDistanceReport {
    pub value: f64,
    pub n_x: usize,
    pub n_y: usize,
}

pub const DEFAULT_THRESHOLD_K: f64 = 3.0;

/// `max(1, n / (10·modes))`.
pub fn default_min_count(n_samples: usize, modes: usize) -> usize {
    (n_samples / (10 * modes.max(1))).max(1)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A sample is high quality when it lies within `threshold_k·sigma` of its
/// nearest center; a mode is covered when at least `min_count` high-quality
/// samples choose it (default [`default_min_count`]).
pub fn mode_coverage(
    samples: &Matrix,
    centers: &Matrix,
    sigma: f64,
    threshold_k: f64,
    min_count: Option<usize>,
) -> Result<CoverageReport> {
    if samples.rows() == 0 {
        return Err(Error::Contract("mode_coverage needs samples".into()));
    }
    if centers.rows() == 0 || centers.cols() != samples.cols() {
        return Err(Error::Shape(format!(
            "{} centers of dimension {} for samples of dimension {}",
            centers.rows(),
            centers.cols(),
            samples.cols()
        )));
    }
    let radius = threshold_k * sigma;
    let mut counts = vec![0usize; centers.rows()];
    let mut hq = 0usize;
    for x in samples.iter_rows() {
        let (best, d) = centers
            .iter_rows()
            .map(|c| dist(x, c))
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (j, d)| if d < acc.1 { (j, d) } else { acc });
        if d <= radius {
            counts[best] += 1;
            hq += 1;
        }
    }
    let min_count = min_count.unwrap_or_else(|| default_min_count(samples.rows(), centers.rows()));
    Ok(CoverageReport {
        modes_total: centers.rows(),
        modes_covered: counts.iter().filter(|&&c| c >= min_count).count(),
        high_quality_fraction: hq as f64 / samples.rows() as f64,
        per_mode_counts: counts,
    })
}

fn mean_pairwise(a: &Matrix, b: &Matrix) -> f64 {
    let mut total = 0.0;
    for x in a.iter_rows() {
        total += b.iter_rows().map(|y| dist(x, y)).sum::<f64>();
    }
    total / (a.rows() * b.rows()) as f64
}

/// `2E‖X−Y‖ − E‖X−X′‖ − E‖Y−Y′‖` over all pairs of the two empirical
/// distributions (V-statistic, so it is zero for identical multisets and
/// never negative).
pub fn energy_distance(x: &Matrix, y: &Matrix) -> Result<EnergyDistanceReport> {
    if x.rows() == 0 || y.rows() == 0 {
        return Err(Error::Contract("energy_distance needs non-empty samples".into()));
    }
    if x.cols() != y.cols() {
        return Err(Error::Shape("samples of different dimension".into()));
    }
    let value = 2.0 * mean_pairwise(x, y) - mean_pairwise(x, x) - mean_pairwise(y, y);
    Ok(EnergyDistanceReport {
        // Rounding can leave a tiny negative residue.
        value: value.max(0.0),
        n_x: x.rows(),
        n_y: y.rows(),
    })
}
