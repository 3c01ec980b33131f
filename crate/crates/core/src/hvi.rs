//! Heat-vulnerability index: the unweighted sum of four city-level z-scores
//! (afternoon temperature, area without tree canopy, residents under 5,
//! residents over 65), plus a variance-inflation-factor check for
//! multicollinearity among the four variables.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Relative pivot tolerance for the VIF normal equations.
pub const VIF_RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HviVariable {
    PmTemp,
    CanopyGap,
    PopUnder5,
    PopOver65,
}

impl HviVariable {
    pub const ALL: [HviVariable; 4] = [
        HviVariable::PmTemp,
        HviVariable::CanopyGap,
        HviVariable::PopUnder5,
        HviVariable::PopOver65,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HviVariable::PmTemp => "pm_temp",
            HviVariable::CanopyGap => "canopy_gap_pct",
            HviVariable::PopUnder5 => "pop_under5",
            HviVariable::PopOver65 => "pop_over65",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for HviVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HviError {
    #[error("need at least {needed} complete-case tracts, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("{0} has zero variance across complete-case tracts")]
    ZeroVariance(HviVariable),
    #[error("tract {tract}: {variable} = {value} is out of range")]
    InvalidValue {
        tract: String,
        variable: HviVariable,
        value: f64,
    },
}

/// Raw inputs for one census tract. `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct TractDemographics {
    pub tract_id: String,
    /// Typical afternoon temperature, degrees Fahrenheit.
    pub pm_temp: Option<f64>,
    /// Percent of area not covered by tree canopy.
    pub canopy_gap_pct: Option<f64>,
    pub pop_under5: Option<f64>,
    pub pop_over65: Option<f64>,
}

impl TractDemographics {
    pub fn new(
        tract_id: impl Into<String>,
        pm_temp: Option<f64>,
        canopy_gap_pct: Option<f64>,
        pop_under5: Option<f64>,
        pop_over65: Option<f64>,
    ) -> Result<Self, HviError> {
        let t = TractDemographics {
            tract_id: tract_id.into(),
            pm_temp,
            canopy_gap_pct,
            pop_under5,
            pop_over65,
        };
        for var in HviVariable::ALL {
            if let Some(value) = t.value(var) {
                let ok = value.is_finite()
                    && match var {
                        HviVariable::PmTemp => true,
                        HviVariable::CanopyGap => (0.0..=100.0).contains(&value),
                        HviVariable::PopUnder5 | HviVariable::PopOver65 => value >= 0.0,
                    };
                if !ok {
                    return Err(HviError::InvalidValue {
                        tract: t.tract_id.clone(),
                        variable: var,
                        value,
                    });
                }
            }
        }
        Ok(t)
    }

    pub fn value(&self, var: HviVariable) -> Option<f64> {
        match var {
            HviVariable::PmTemp => self.pm_temp,
            HviVariable::CanopyGap => self.canopy_gap_pct,
            HviVariable::PopUnder5 => self.pop_under5,
            HviVariable::PopOver65 => self.pop_over65,
        }
    }

    /// All four values, when none is missing.
    pub fn complete(&self) -> Option<[f64; 4]> {
        Some([self.pm_temp?, self.canopy_gap_pct?, self.pop_under5?, self.pop_over65?])
    }

    pub fn missing_fields(&self) -> Vec<HviVariable> {
        HviVariable::ALL.into_iter().filter(|&v| self.value(v).is_none()).collect()
    }
}

/// Complete-case mean and population standard deviation of each variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CityStats {
    pub mean: [f64; 4],
    pub std_dev: [f64; 4],
    pub tract_count: usize,
}

impl CityStats {
    pub fn mean_of(&self, var: HviVariable) -> f64 {
        self.mean[var.index()]
    }

    pub fn std_dev_of(&self, var: HviVariable) -> f64 {
        self.std_dev[var.index()]
    }
}

fn complete_cases(tracts: &[TractDemographics]) -> Vec<[f64; 4]> {
    tracts.iter().filter_map(TractDemographics::complete).collect()
}

pub fn city_stats(tracts: &[TractDemographics]) -> Result<CityStats, HviError> {
    let rows = complete_cases(tracts);
    if rows.len() < 2 {
        return Err(HviError::InsufficientData {
            needed: 2,
            found: rows.len(),
        });
    }
    let n = rows.len() as f64;
    let mut mean = [0.0; 4];
    let mut std_dev = [0.0; 4];
    for var in HviVariable::ALL {
        let k = var.index();
        let mu = rows.iter().map(|r| r[k]).sum::<f64>() / n;
        let var_pop = rows.iter().map(|r| (r[k] - mu).powi(2)).sum::<f64>() / n;
        let sd = var_pop.sqrt();
        if sd == 0.0 {
            return Err(HviError::ZeroVariance(var));
        }
        mean[k] = mu;
        std_dev[k] = sd;
    }
    Ok(CityStats {
        mean,
        std_dev,
        tract_count: rows.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HviResult {
    pub tract_id: String,
    /// z-score of each variable, `None` where the input is missing.
    pub z_scores: [Option<f64>; 4],
    /// Sum of the four z-scores, present only for complete tracts.
    pub score: Option<f64>,
    pub missing: Vec<HviVariable>,
}

impl HviResult {
    pub fn is_missing(&self) -> bool {
        !self.missing.is_empty()
    }
}

pub fn hvi_score(tract: &TractDemographics, stats: &CityStats) -> HviResult {
    let z_scores = HviVariable::ALL.map(|var| {
        tract
            .value(var)
            .map(|x| (x - stats.mean_of(var)) / stats.std_dev_of(var))
    });
    let missing = tract.missing_fields();
    let score = if missing.is_empty() {
        Some(z_scores.iter().flatten().sum())
    } else {
        None
    };
    HviResult {
        tract_id: tract.tract_id.clone(),
        z_scores,
        score,
        missing,
    }
}

/// Stats from the complete cases, then a result for every tract in input order.
pub fn score_tracts(tracts: &[TractDemographics]) -> Result<Vec<HviResult>, HviError> {
    let stats = city_stats(tracts)?;
    Ok(tracts.iter().map(|t| hvi_score(t, &stats)).collect())
}

/// The `k` highest-scoring tracts; missing scores are skipped and equal
/// scores fall back to tract id order.
pub fn rank_tracts(results: &[HviResult], k: usize) -> Vec<HviResult> {
    let mut scored: Vec<(&HviResult, f64)> = results.iter().filter_map(|r| Some((r, r.score?))).collect();
    scored.sort_by(|(a, sa), (b, sb)| sb.total_cmp(sa).then_with(|| a.tract_id.cmp(&b.tract_id)));
    scored.into_iter().take(k).map(|(r, _)| r.clone()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VifEntry {
    pub variable: HviVariable,
    /// `+inf` when the variable is an exact linear combination of the others.
    pub vif: f64,
}

/// Variance inflation factor of each variable against the other three (with
/// intercept) over complete-case tracts.
pub fn vif(tracts: &[TractDemographics]) -> Result<Vec<VifEntry>, HviError> {
    let rows = complete_cases(tracts);
    if rows.len() < 6 {
        return Err(HviError::InsufficientData {
            needed: 6,
            found: rows.len(),
        });
    }
    // fitting the intercept is the same as centering every column
    let n = rows.len() as f64;
    let mut columns: [Vec<f64>; 4] = Default::default();
    for var in HviVariable::ALL {
        let k = var.index();
        let mu = rows.iter().map(|r| r[k]).sum::<f64>() / n;
        columns[k] = rows.iter().map(|r| r[k] - mu).collect();
    }

    HviVariable::ALL
        .into_iter()
        .map(|var| {
            let target = &columns[var.index()];
            let total: f64 = target.iter().map(|y| y * y).sum();
            if total == 0.0 {
                return Err(HviError::ZeroVariance(var));
            }
            let predictors: Vec<&[f64]> = HviVariable::ALL
                .into_iter()
                .filter(|&o| o != var)
                .map(|o| columns[o.index()].as_slice())
                .collect();
            let residual = least_squares_residual(&predictors, target);
            let unexplained = (residual / total).clamp(0.0, 1.0);
            let vif = if unexplained <= VIF_RANK_TOLERANCE {
                f64::INFINITY
            } else {
                1.0 / unexplained
            };
            Ok(VifEntry { variable: var, vif })
        })
        .collect()
}

/// Residual sum of squares of `target` regressed on `predictors` (no
/// intercept) via the normal equations. Columns whose pivot falls below the
/// relative tolerance are treated as dependent and dropped.
fn least_squares_residual(predictors: &[&[f64]], target: &[f64]) -> f64 {
    let p = predictors.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut gram = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            gram[i][j] = dot(predictors[i], predictors[j]);
        }
        gram[i][p] = dot(predictors[i], target);
    }
    let scale = (0..p).map(|i| gram[i][i]).fold(0.0, f64::max);

    // Gauss-Jordan with diagonal pivoting; the Gram matrix is symmetric PSD
    let mut active = vec![false; p];
    for c in 0..p {
        if gram[c][c] <= VIF_RANK_TOLERANCE * scale {
            continue;
        }
        active[c] = true;
        let pivot = gram[c][c];
        let pivot_row = gram[c].clone();
        for (r, row) in gram.iter_mut().enumerate() {
            if r == c {
                continue;
            }
            let factor = row[c] / pivot;
            if factor != 0.0 {
                for (x, y) in row.iter_mut().zip(&pivot_row) {
                    *x -= factor * y;
                }
            }
        }
        for x in gram[c].iter_mut() {
            *x /= pivot;
        }
    }
    let beta: Vec<f64> = (0..p).map(|i| if active[i] { gram[i][p] } else { 0.0 }).collect();
    target
        .iter()
        .enumerate()
        .map(|(row, y)| {
            let fit: f64 = (0..p).map(|i| beta[i] * predictors[i][row]).sum();
            (y - fit).powi(2)
        })
        .sum()
}
