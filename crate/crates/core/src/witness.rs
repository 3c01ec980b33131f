//! Landmark and witness point sets and the filtered witness complex built on them.
//!
//! Two landmarks are joined by an edge at scale `alpha` as soon as some witness
//! lies within `alpha` of both, so the edge value is
//! `min_w max(d(l_i, w), d(l_j, w))`. Higher simplices follow the flag rule:
//! a clique enters at the largest value among its edges. All vertices enter
//! at zero.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use smallvec::SmallVec;
use thiserror::Error;

use crate::collapse;
use crate::geo::{geodesic_distance_km, GeoPoint};

/// Index of a landmark inside its [`LandmarkSet`].
pub type VertexId = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WitnessError {
    #[error("landmark set is empty")]
    EmptyLandmarks,
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("{ids} ids given for {points} points")]
    LengthMismatch { ids: usize, points: usize },
    #[error("max_dim must be at least 1, got {0}")]
    InvalidMaxDim(usize),
    #[error("{0} landmarks exceed the 32-bit vertex index range")]
    TooManyLandmarks(usize),
    #[error("distance matrix entry ({row}, {col}) is {value}; entries must be finite and nonnegative")]
    InvalidDistance { row: usize, col: usize, value: f64 },
    #[error("distance matrix has {len} entries, expected {rows} x {cols}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
}

/// Problems with a filtration as handed to [`FilteredComplex`] or found while
/// building its boundary matrix.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComplexError {
    #[error("simplex {0} has a repeated vertex")]
    RepeatedVertex(String),
    #[error("simplex {simplex} has dimension above max_dim {max_dim}")]
    DimensionExceeded { simplex: Simplex, max_dim: usize },
    #[error("simplex {0} has a NaN filtration value")]
    NanValue(Simplex),
    #[error("simplex {0} appears twice")]
    Duplicate(Simplex),
    #[error("face {face} of {coface} is missing")]
    MissingFace { face: Simplex, coface: Simplex },
    #[error("face {face} is ordered after its coface {coface}")]
    FaceAfterCoface { face: Simplex, coface: Simplex },
    #[error("face {face} has value {face_value} above its coface {coface} at {coface_value}")]
    NonMonotone {
        face: Simplex,
        coface: Simplex,
        face_value: f64,
        coface_value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct LabeledPoints {
    ids: Vec<String>,
    points: Vec<GeoPoint>,
}

impl LabeledPoints {
    fn new(ids: Vec<String>, points: Vec<GeoPoint>) -> Result<Self, WitnessError> {
        if ids.len() != points.len() {
            return Err(WitnessError::LengthMismatch {
                ids: ids.len(),
                points: points.len(),
            });
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(WitnessError::DuplicateId(id.clone()));
            }
        }
        Ok(LabeledPoints { ids, points })
    }
}

macro_rules! labeled_point_set {
    ($name:ident) => {
        impl $name {
            pub fn len(&self) -> usize {
                self.0.points.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.points.is_empty()
            }

            pub fn ids(&self) -> &[String] {
                &self.0.ids
            }

            pub fn points(&self) -> &[GeoPoint] {
                &self.0.points
            }

            pub fn id(&self, index: usize) -> &str {
                &self.0.ids[index]
            }

            pub fn point(&self, index: usize) -> GeoPoint {
                self.0.points[index]
            }

            pub fn iter(&self) -> impl Iterator<Item = (&str, GeoPoint)> + '_ {
                self.0.ids.iter().map(String::as_str).zip(self.0.points.iter().copied())
            }
        }
    };
}

/// Vertices of the complex: one point per subdivision (e.g. census block centroid).
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet(LabeledPoints);

impl LandmarkSet {
    pub fn new(ids: Vec<String>, points: Vec<GeoPoint>) -> Result<Self, WitnessError> {
        if points.is_empty() {
            return Err(WitnessError::EmptyLandmarks);
        }
        if points.len() > VertexId::MAX as usize {
            return Err(WitnessError::TooManyLandmarks(points.len()));
        }
        LabeledPoints::new(ids, points).map(LandmarkSet)
    }
}

labeled_point_set!(LandmarkSet);

/// Resource locations (e.g. cooling centers). May be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSet(LabeledPoints);

impl WitnessSet {
    pub fn new(ids: Vec<String>, points: Vec<GeoPoint>) -> Result<Self, WitnessError> {
        LabeledPoints::new(ids, points).map(WitnessSet)
    }

    pub fn empty() -> Self {
        WitnessSet(LabeledPoints {
            ids: Vec::new(),
            points: Vec::new(),
        })
    }
}

labeled_point_set!(WitnessSet);

/// Landmark-by-witness table of geodesic distances in kilometers, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, WitnessError> {
        if values.len() != rows * cols {
            return Err(WitnessError::ShapeMismatch {
                rows,
                cols,
                len: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(WitnessError::InvalidDistance {
                row: k / cols.max(1),
                col: k % cols.max(1),
                value: values[k],
            });
        }
        Ok(DistanceMatrix { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }
}

/// Geodesic distance from every landmark to every witness.
pub fn distance_matrix(landmarks: &LandmarkSet, witnesses: &WitnessSet) -> DistanceMatrix {
    let cols = witnesses.len();
    let mut values = vec![0.0; landmarks.len() * cols];
    if cols > 0 {
        values
            .par_chunks_mut(cols)
            .zip(landmarks.points().par_iter())
            .for_each(|(row, &l)| {
                for (slot, &w) in row.iter_mut().zip(witnesses.points()) {
                    *slot = geodesic_distance_km(l, w);
                }
            });
    }
    DistanceMatrix {
        rows: landmarks.len(),
        cols,
        values,
    }
}

/// Smallest scale at which landmarks `i` and `j` share a witness, or `+inf`
/// when there are no witnesses.
pub fn edge_filtration_value(i: usize, j: usize, distances: &DistanceMatrix) -> f64 {
    debug_assert_ne!(i, j);
    distances
        .row(i)
        .iter()
        .zip(distances.row(j))
        .map(|(a, b)| a.max(*b))
        .fold(f64::INFINITY, f64::min)
}

/// An edge of the 1-skeleton with its filtration value; always `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteredEdge {
    pub a: VertexId,
    pub b: VertexId,
    pub value: f64,
}

impl FilteredEdge {
    /// Order by value, then by vertex pair.
    pub fn filtration_cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

/// All landmark pairs with a finite edge value, in (a, b) order.
pub fn witness_edges(distances: &DistanceMatrix) -> Vec<FilteredEdge> {
    let n = distances.rows();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..n).filter_map(move |j| {
                let value = edge_filtration_value(i, j, distances);
                value.is_finite().then_some(FilteredEdge {
                    a: i as VertexId,
                    b: j as VertexId,
                    value,
                })
            })
        })
        .collect()
}

/// A simplex over landmark indices, vertices strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex(SmallVec<[VertexId; 4]>);

impl Simplex {
    /// Sorts `vertices`; fails when a vertex repeats or the list is empty.
    pub fn new(vertices: &[VertexId]) -> Result<Self, ComplexError> {
        let mut v: SmallVec<[VertexId; 4]> = vertices.iter().copied().collect();
        v.sort_unstable();
        if v.is_empty() || v.windows(2).any(|w| w[0] == w[1]) {
            return Err(ComplexError::RepeatedVertex(format!("{vertices:?}")));
        }
        Ok(Simplex(v))
    }

    pub fn vertex(v: VertexId) -> Self {
        Simplex(smallvec::smallvec![v])
    }

    pub(crate) fn from_sorted(v: SmallVec<[VertexId; 4]>) -> Self {
        debug_assert!(v.windows(2).all(|w| w[0] < w[1]));
        Simplex(v)
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    /// Codimension-one faces, each omitting one vertex.
    pub fn facets(&self) -> impl Iterator<Item = Simplex> + '_ {
        let n = if self.0.len() > 1 { self.0.len() } else { 0 };
        (0..n).map(move |skip| {
            Simplex(
                self.0
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != skip)
                    .map(|(_, &v)| v)
                    .collect(),
            )
        })
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSimplex {
    pub simplex: Simplex,
    pub value: f64,
}

impl FilteredSimplex {
    /// The filtration total order: value, then dimension, then vertices.
    pub fn filtration_cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.simplex.dim().cmp(&other.simplex.dim()))
            .then_with(|| self.simplex.cmp(&other.simplex))
    }
}

/// A finite simplicial complex with filtration values, stored in filtration order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredComplex {
    simplices: Vec<FilteredSimplex>,
    max_dim: usize,
}

impl FilteredComplex {
    /// Takes the simplices in the order given. The order is checked only by
    /// [`FilteredComplex::validate`] and at persistence time.
    pub fn from_ordered(simplices: Vec<(Simplex, f64)>, max_dim: usize) -> Result<Self, ComplexError> {
        let mut seen = HashSet::with_capacity(simplices.len());
        let mut out = Vec::with_capacity(simplices.len());
        for (simplex, value) in simplices {
            if value.is_nan() {
                return Err(ComplexError::NanValue(simplex));
            }
            if simplex.dim() > max_dim {
                return Err(ComplexError::DimensionExceeded { simplex, max_dim });
            }
            if !seen.insert(simplex.clone()) {
                return Err(ComplexError::Duplicate(simplex));
            }
            out.push(FilteredSimplex { simplex, value });
        }
        Ok(FilteredComplex { simplices: out, max_dim })
    }

    /// Sorts the simplices into the filtration total order first.
    pub fn from_unordered(simplices: Vec<(Simplex, f64)>, max_dim: usize) -> Result<Self, ComplexError> {
        let mut complex = Self::from_ordered(simplices, max_dim)?;
        complex.simplices.par_sort_unstable_by(FilteredSimplex::filtration_cmp);
        Ok(complex)
    }

    /// Flag complex of a weighted graph on `n_vertices` vertices, up to `max_dim`.
    /// Edges must be distinct pairs with `a < b < n_vertices`.
    pub fn flag(n_vertices: usize, edges: &[FilteredEdge], max_dim: usize) -> Self {
        let mut upper: Vec<Vec<(VertexId, f64)>> = vec![Vec::new(); n_vertices];
        for e in edges {
            debug_assert!(e.a < e.b && (e.b as usize) < n_vertices);
            upper[e.a as usize].push((e.b, e.value));
        }
        for nbrs in &mut upper {
            nbrs.sort_unstable_by_key(|&(v, _)| v);
        }

        let mut simplices: Vec<FilteredSimplex> = (0..n_vertices as VertexId)
            .into_par_iter()
            .flat_map_iter(|v| {
                let mut local = vec![FilteredSimplex {
                    simplex: Simplex::vertex(v),
                    value: 0.0,
                }];
                if max_dim >= 1 {
                    let mut clique: SmallVec<[VertexId; 4]> = smallvec::smallvec![v];
                    extend_cliques(&upper, &mut clique, 0.0, &upper[v as usize], max_dim, &mut local);
                }
                local
            })
            .collect();
        simplices.par_sort_unstable_by(FilteredSimplex::filtration_cmp);
        FilteredComplex { simplices, max_dim }
    }

    pub fn simplices(&self) -> &[FilteredSimplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn vertex_count(&self) -> usize {
        self.simplices.iter().filter(|s| s.simplex.dim() == 0).count()
    }

    pub fn count_by_dim(&self) -> Vec<usize> {
        let mut counts = vec![0; self.max_dim + 1];
        for s in &self.simplices {
            counts[s.simplex.dim()] += 1;
        }
        counts
    }

    /// Boundary matrix over GF(2): for each simplex, the sorted positions of
    /// its facets. Fails if a face is missing, comes later, or has a larger value.
    pub fn boundary_matrix(&self) -> Result<Vec<Vec<usize>>, ComplexError> {
        let position: HashMap<&Simplex, usize> = self
            .simplices
            .iter()
            .enumerate()
            .map(|(k, s)| (&s.simplex, k))
            .collect();
        self.simplices
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let mut column = Vec::with_capacity(s.simplex.dim() + 1);
                for face in s.simplex.facets() {
                    let Some(&p) = position.get(&face) else {
                        return Err(ComplexError::MissingFace {
                            face,
                            coface: s.simplex.clone(),
                        });
                    };
                    if p >= k {
                        return Err(ComplexError::FaceAfterCoface {
                            face,
                            coface: s.simplex.clone(),
                        });
                    }
                    let face_value = self.simplices[p].value;
                    if face_value > s.value {
                        return Err(ComplexError::NonMonotone {
                            face,
                            coface: s.simplex.clone(),
                            face_value,
                            coface_value: s.value,
                        });
                    }
                    column.push(p);
                }
                column.sort_unstable();
                Ok(column)
            })
            .collect()
    }

    /// Checks face closure, face-before-coface order and monotone values.
    pub fn validate(&self) -> Result<(), ComplexError> {
        self.boundary_matrix().map(|_| ())
    }
}

fn extend_cliques(
    upper: &[Vec<(VertexId, f64)>],
    clique: &mut SmallVec<[VertexId; 4]>,
    value: f64,
    candidates: &[(VertexId, f64)],
    max_dim: usize,
    out: &mut Vec<FilteredSimplex>,
) {
    for (k, &(w, to_clique)) in candidates.iter().enumerate() {
        let v = value.max(to_clique);
        clique.push(w);
        out.push(FilteredSimplex {
            simplex: Simplex::from_sorted(clique.clone()),
            value: v,
        });
        if clique.len() <= max_dim {
            let next = intersect(&candidates[k + 1..], &upper[w as usize]);
            if !next.is_empty() {
                extend_cliques(upper, clique, v, &next, max_dim, out);
            }
        }
        clique.pop();
    }
}

/// Candidates adjacent to the new vertex, carrying the max edge value into the clique.
fn intersect(candidates: &[(VertexId, f64)], neighbors: &[(VertexId, f64)]) -> Vec<(VertexId, f64)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < candidates.len() && j < neighbors.len() {
        match candidates[i].0.cmp(&neighbors[j].0) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                out.push((candidates[i].0, candidates[i].1.max(neighbors[j].1)));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// How the witness complex is materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComplexStrategy {
    /// Every clique of finite edges up to `max_dim`.
    Full,
    /// Same persistence in dimensions below `max_dim` (zero-length pairs aside)
    /// on a much smaller complex: edges past the enclosing radius are dropped
    /// and dominated edges are collapsed before cliques are enumerated.
    #[default]
    Collapsed,
}

fn check_max_dim(n_landmarks: usize, max_dim: usize) -> Result<(), WitnessError> {
    if max_dim == 0 {
        return Err(WitnessError::InvalidMaxDim(max_dim));
    }
    if max_dim + 1 > n_landmarks {
        log::warn!(
            "max_dim {max_dim} exceeds what {n_landmarks} landmark(s) can span; simplices stop at dimension {}",
            n_landmarks.saturating_sub(1)
        );
    }
    Ok(())
}

/// The full filtered witness flag complex up to `max_dim`.
pub fn build_filtered_complex(
    landmarks: &LandmarkSet,
    witnesses: &WitnessSet,
    max_dim: usize,
) -> Result<FilteredComplex, WitnessError> {
    build_complex(landmarks, witnesses, max_dim, ComplexStrategy::Full)
}

pub fn build_complex(
    landmarks: &LandmarkSet,
    witnesses: &WitnessSet,
    max_dim: usize,
    strategy: ComplexStrategy,
) -> Result<FilteredComplex, WitnessError> {
    let distances = distance_matrix(landmarks, witnesses);
    build_complex_from_distances(&distances, max_dim, strategy)
}

pub fn build_complex_from_distances(
    distances: &DistanceMatrix,
    max_dim: usize,
    strategy: ComplexStrategy,
) -> Result<FilteredComplex, WitnessError> {
    let n = distances.rows();
    check_max_dim(n, max_dim)?;
    let mut edges = witness_edges(distances);
    if strategy == ComplexStrategy::Collapsed {
        let before = edges.len();
        edges = collapse::collapse_edges(n, &edges);
        log::info!("edge collapse kept {} of {} edges", edges.len(), before);
    }
    Ok(FilteredComplex::flag(n, &edges, max_dim))
}
