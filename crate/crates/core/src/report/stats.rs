use serde::Serialize;

use crate::persistence::PersistencePair;

/// Box-plot numbers for a set of finite values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    /// Values strictly outside the fences, ascending.
    pub outliers: Vec<f64>,
}

/// Death-value summary for one homology dimension.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub dim: usize,
    /// Number of finite deaths.
    pub count: usize,
    pub infinite_count: usize,
    pub empty: bool,
    /// `None` when there are no finite deaths.
    #[serde(flatten)]
    pub stats: Option<BoxStats>,
}

/// Linear interpolation between closest ranks, inclusive of the extremes
/// (position `p * (n - 1)` in the sorted values).
pub fn quantile_inclusive(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> Option<BoxStats> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (
        quantile_inclusive(&v, 0.25),
        quantile_inclusive(&v, 0.5),
        quantile_inclusive(&v, 0.75),
    );
    let iqr = q3 - q1;
    let (lower_fence, upper_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let outliers = v.iter().copied().filter(|&x| x < lower_fence || x > upper_fence).collect();
    Some(BoxStats {
        min: v[0],
        q1,
        median,
        q3,
        max: v[v.len() - 1],
        lower_fence,
        upper_fence,
        outliers,
    })
}

/// Summary of the deaths of dimension-`dim` pairs; infinite deaths are only counted.
pub fn summarize_deaths(pairs: &[PersistencePair], dim: usize) -> SummaryStats {
    let (finite, infinite): (Vec<f64>, Vec<f64>) = pairs
        .iter()
        .filter(|p| p.dim == dim)
        .map(|p| p.death)
        .partition(|d| d.is_finite());
    let stats = box_stats(&finite);
    SummaryStats {
        dim,
        count: finite.len(),
        infinite_count: infinite.len(),
        empty: stats.is_none(),
        stats,
    }
}
