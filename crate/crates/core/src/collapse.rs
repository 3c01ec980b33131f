//! Persistence-preserving reduction of a flag filtration's 1-skeleton.
//!
//! Two reductions are applied in sequence:
//!
//! * **Enclosing radius.** Once some vertex is adjacent to every other vertex
//!   the flag complex is a cone, and it stays one at every larger scale. No
//!   class of positive length can be alive past that point, so edges above it
//!   are dropped.
//! * **Edge collapse.** An edge `uv` is dominated in a graph when a common
//!   neighbour `w` of `u` and `v` is adjacent to every other common neighbour.
//!   Removing a dominated edge from a flag complex is a collapse, so an edge
//!   may be delayed for as long as it stays dominated without changing the
//!   persistence module. Edges are visited from the last to the first; each
//!   one is moved to the first scale at which it is no longer dominated in the
//!   current filtration, or removed when that never happens.
//!
//! Both reductions preserve every interval of positive length in dimensions
//! below the top enumerated dimension; only zero-length pairs can differ.

use crate::witness::FilteredEdge;
#[cfg(test)]
use crate::witness::VertexId;

/// The smallest scale at which some vertex is adjacent to all others, or
/// `+inf` when no vertex ever is.
pub fn enclosing_radius(n_vertices: usize, edges: &[FilteredEdge]) -> f64 {
    if n_vertices < 2 {
        return f64::INFINITY;
    }
    let mut degree = vec![0usize; n_vertices];
    let mut eccentricity = vec![0.0f64; n_vertices];
    for e in edges {
        for v in [e.a as usize, e.b as usize] {
            degree[v] += 1;
            eccentricity[v] = eccentricity[v].max(e.value);
        }
    }
    (0..n_vertices)
        .filter(|&v| degree[v] == n_vertices - 1)
        .map(|v| eccentricity[v])
        .fold(f64::INFINITY, f64::min)
}

/// Dense symmetric table of current edge values; `+inf` marks a missing edge.
struct EdgeTimes {
    n: usize,
    times: Vec<f64>,
}

impl EdgeTimes {
    fn new(n: usize, edges: &[FilteredEdge]) -> Self {
        let mut times = vec![f64::INFINITY; n * n];
        for e in edges {
            let (a, b) = (e.a as usize, e.b as usize);
            times[a * n + b] = e.value;
            times[b * n + a] = e.value;
        }
        EdgeTimes { n, times }
    }

    fn row(&self, v: usize) -> &[f64] {
        &self.times[v * self.n..(v + 1) * self.n]
    }

    fn set(&mut self, a: usize, b: usize, value: f64) {
        self.times[a * self.n + b] = value;
        self.times[b * self.n + a] = value;
    }
}

/// Drops edges past the enclosing radius, then collapses dominated edges.
/// The result is sorted in filtration order (value, then vertex pair).
pub fn collapse_edges(n_vertices: usize, edges: &[FilteredEdge]) -> Vec<FilteredEdge> {
    let radius = enclosing_radius(n_vertices, edges);
    let mut kept: Vec<FilteredEdge> = edges.iter().filter(|e| e.value <= radius).copied().collect();
    kept.sort_unstable_by(FilteredEdge::filtration_cmp);

    let mut table = EdgeTimes::new(n_vertices, &kept);
    // scratch: (vertex, join time) for every current common neighbour
    let mut common: Vec<(usize, f64)> = Vec::with_capacity(n_vertices);
    for idx in (0..kept.len()).rev() {
        let FilteredEdge { a, b, value } = kept[idx];
        let delayed = first_undominated_time(&table, a as usize, b as usize, value, &mut common);
        if delayed != value {
            table.set(a as usize, b as usize, delayed);
            kept[idx].value = delayed;
        }
    }

    kept.retain(|e| e.value.is_finite());
    kept.sort_unstable_by(FilteredEdge::filtration_cmp);
    kept
}

/// First scale `s >= start` at which edge `uv` is not dominated in the graph of
/// edges with current value `<= s`, or `+inf` if it stays dominated.
///
/// Domination can only be lost when a new common neighbour appears, so only
/// `start` and the join times of common neighbours need checking.
fn first_undominated_time(
    table: &EdgeTimes,
    u: usize,
    v: usize,
    start: f64,
    common: &mut Vec<(usize, f64)>,
) -> f64 {
    common.clear();
    let (row_u, row_v) = (table.row(u), table.row(v));
    for (w, (tu, tv)) in row_u.iter().zip(row_v).enumerate() {
        let join = tu.max(*tv);
        if join.is_finite() && w != u && w != v {
            common.push((w, join));
        }
    }
    // earliest joiners first: they are the likeliest dominators
    common.sort_unstable_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));

    let mut s = start;
    loop {
        let present = common.partition_point(|&(_, j)| j <= s);
        let Some(w) = find_dominator(table, &common[..present], s) else {
            return s;
        };
        // w keeps dominating until a later joiner x arrives before the edge wx does
        let row_w = table.row(w);
        let next_failure = common[present..]
            .iter()
            .find(|&&(x, j)| row_w[x] > j)
            .map(|&(_, j)| j);
        match next_failure {
            Some(j) => s = j,
            None => return f64::INFINITY,
        }
    }
}

fn find_dominator(table: &EdgeTimes, present: &[(usize, f64)], s: f64) -> Option<usize> {
    present.iter().map(|&(w, _)| w).find(|&w| {
        let row = table.row(w);
        present.iter().all(|&(x, _)| x == w || row[x] <= s)
    })
}

/// Vertices adjacent to `v` in `edges` (test helper shared with property tests).
#[cfg(test)]
fn neighbours(edges: &[FilteredEdge], v: VertexId) -> Vec<VertexId> {
    let mut out: Vec<VertexId> = edges
        .iter()
        .filter_map(|e| {
            if e.a == v {
                Some(e.b)
            } else if e.b == v {
                Some(e.a)
            } else {
                None
            }
        })
        .collect();
    out.sort_unstable();
    out
}
