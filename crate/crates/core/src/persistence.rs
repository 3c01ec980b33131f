//! Persistent homology of a [`FilteredComplex`] over GF(2).
//!
//! The boundary matrix is reduced left to right, one dimension at a time from
//! the top down, with clearing: a column whose simplex was already paired as
//! the lowest one of a higher-dimensional column is known to reduce to zero
//! and is skipped. When column `j` reduces to lowest one `i`, simplex `i` is
//! the birth simplex and simplex `j` the death simplex of a class in
//! dimension `dim(i)`. This pairing follows the elder rule.

use std::cmp::Ordering;

use thiserror::Error;

use crate::witness::{ComplexError, FilteredComplex, Simplex, VertexId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PersistenceError {
    #[error("invalid filtration: {0}")]
    InvalidFiltration(#[from] ComplexError),
}

/// One homology class: born at `birth`, dead at `death` (`+inf` if essential).
#[derive(Debug, Clone, PartialEq)]
pub struct PersistencePair {
    pub dim: usize,
    pub birth: f64,
    pub death: f64,
    pub birth_simplex: Simplex,
    pub death_simplex: Option<Simplex>,
}

impl PersistencePair {
    pub fn is_essential(&self) -> bool {
        self.death_simplex.is_none()
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    max_dim: usize,
    pairs: Vec<PersistencePair>,
    zero_persistence: Vec<PersistencePair>,
}

impl PersistenceDiagram {
    /// Homology is reported in dimensions `0..max_dim`.
    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    /// All pairs of positive persistence, ordered by dimension, then by the
    /// filtration position of the birth simplex.
    pub fn pairs(&self) -> &[PersistencePair] {
        &self.pairs
    }

    pub fn dimension(&self, dim: usize) -> impl Iterator<Item = &PersistencePair> + '_ {
        self.pairs.iter().filter(move |p| p.dim == dim)
    }

    pub fn essential_count(&self, dim: usize) -> usize {
        self.dimension(dim).filter(|p| p.is_essential()).count()
    }

    /// Pairs with `birth == death`, kept out of [`Self::pairs`] for debugging.
    pub fn zero_persistence(&self) -> &[PersistencePair] {
        &self.zero_persistence
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

struct Reduction {
    /// (birth position, death position)
    pairs: Vec<(usize, usize)>,
    /// positions of simplices nobody pairs with, in every dimension
    unpaired: Vec<usize>,
}

/// Symmetric difference of two sorted index lists.
fn add_columns(a: &[usize], b: &[usize], out: &mut Vec<usize>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

fn reduce(complex: &FilteredComplex) -> Result<Reduction, PersistenceError> {
    let mut columns = complex.boundary_matrix()?;
    let n = columns.len();
    let simplices = complex.simplices();

    let top = simplices.iter().map(|s| s.simplex.dim()).max().unwrap_or(0);
    let mut by_dim: Vec<Vec<usize>> = vec![Vec::new(); top + 1];
    for (k, s) in simplices.iter().enumerate() {
        by_dim[s.simplex.dim()].push(k);
    }

    const NONE: usize = usize::MAX;
    // pivot_owner[row] = column whose reduced form has its lowest one at row
    let mut pivot_owner = vec![NONE; n];
    let mut paired = vec![false; n];
    let mut pairs = Vec::new();
    let mut scratch = Vec::new();

    for dim in (1..=top).rev() {
        for &j in &by_dim[dim] {
            if paired[j] {
                // cleared: j is a birth killed by a higher simplex, its column reduces to zero
                columns[j].clear();
                continue;
            }
            let mut col = std::mem::take(&mut columns[j]);
            while let Some(&low) = col.last() {
                let owner = pivot_owner[low];
                if owner == NONE {
                    break;
                }
                add_columns(&col, &columns[owner], &mut scratch);
                std::mem::swap(&mut col, &mut scratch);
            }
            if let Some(&low) = col.last() {
                pivot_owner[low] = j;
                paired[low] = true;
                paired[j] = true;
                pairs.push((low, j));
            }
            columns[j] = col;
        }
    }

    let unpaired = (0..n).filter(|&k| !paired[k]).collect();
    Ok(Reduction { pairs, unpaired })
}

/// Persistence diagram of `complex` in dimensions below its `max_dim`.
pub fn compute_persistence(complex: &FilteredComplex) -> Result<PersistenceDiagram, PersistenceError> {
    let reduction = reduce(complex)?;
    let simplices = complex.simplices();
    let max_dim = complex.max_dim();

    let mut finite: Vec<(usize, PersistencePair)> = Vec::new();
    for &(b, d) in &reduction.pairs {
        let birth = &simplices[b];
        let death = &simplices[d];
        finite.push((
            b,
            PersistencePair {
                dim: birth.simplex.dim(),
                birth: birth.value,
                death: death.value,
                birth_simplex: birth.simplex.clone(),
                death_simplex: Some(death.simplex.clone()),
            },
        ));
    }
    for &k in &reduction.unpaired {
        let s = &simplices[k];
        if s.simplex.dim() < max_dim {
            finite.push((
                k,
                PersistencePair {
                    dim: s.simplex.dim(),
                    birth: s.value,
                    death: f64::INFINITY,
                    birth_simplex: s.simplex.clone(),
                    death_simplex: None,
                },
            ));
        }
    }
    finite.sort_by_key(|(pos, p)| (p.dim, *pos));

    let (zero, pairs): (Vec<_>, Vec<_>) = finite.into_iter().map(|(_, p)| p).partition(|p| p.birth == p.death);
    Ok(PersistenceDiagram {
        max_dim,
        pairs,
        zero_persistence: zero,
    })
}

/// Rank of `dim`-dimensional homology of the sublevel complex at `alpha`.
///
/// For `dim >= max_dim` this is the homology of the stored skeleton, which
/// may overcount the flag complex's top dimension.
pub fn betti_numbers(complex: &FilteredComplex, alpha: f64, dim: usize) -> Result<usize, PersistenceError> {
    let reduction = reduce(complex)?;
    let s = complex.simplices();
    let alive_pairs = reduction
        .pairs
        .iter()
        .filter(|&&(b, d)| s[b].simplex.dim() == dim && s[b].value <= alpha && alpha < s[d].value)
        .count();
    let essential = reduction
        .unpaired
        .iter()
        .filter(|&&k| s[k].simplex.dim() == dim && s[k].value <= alpha)
        .count();
    Ok(alive_pairs + essential)
}

/// A pair selected by [`top_k_deaths`] together with the landmarks it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedDeath {
    /// 1-based position in the ranking.
    pub rank: usize,
    pub pair: PersistencePair,
    /// Dimension 0: the birth vertex (the dying component's oldest landmark).
    /// Otherwise the death simplex's vertices, or the birth simplex's for
    /// essential classes.
    pub landmarks: Vec<VertexId>,
}

/// Ordering used for rankings: death descending (`+inf` first), then birth
/// ascending, then birth simplex.
pub fn death_rank_cmp(a: &PersistencePair, b: &PersistencePair) -> Ordering {
    b.death
        .total_cmp(&a.death)
        .then(a.birth.total_cmp(&b.birth))
        .then_with(|| a.birth_simplex.cmp(&b.birth_simplex))
}

pub fn ranked_landmarks(pair: &PersistencePair) -> Vec<VertexId> {
    match (&pair.death_simplex, pair.dim) {
        (_, 0) => pair.birth_simplex.vertices().to_vec(),
        (Some(death), _) => death.vertices().to_vec(),
        (None, _) => pair.birth_simplex.vertices().to_vec(),
    }
}

/// The `k` pairs of dimension `dim` with the largest deaths.
pub fn top_k_deaths(diagram: &PersistenceDiagram, dim: usize, k: usize, finite_only: bool) -> Vec<RankedDeath> {
    let mut selected: Vec<&PersistencePair> = diagram
        .dimension(dim)
        .filter(|p| !finite_only || p.death.is_finite())
        .collect();
    selected.sort_by(|a, b| death_rank_cmp(a, b));
    selected
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, p)| RankedDeath {
            rank: i + 1,
            pair: p.clone(),
            landmarks: ranked_landmarks(p),
        })
        .collect()
}
