#![allow(dead_code)]

use coolgap::geo::{geodesic_distance_km, GeoPoint};
use coolgap::witness::{FilteredComplex, LandmarkSet, WitnessSet};
use rand::Rng;

pub fn pt(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon).unwrap()
}

/// Uniform points in a square of side `side` degrees centered on (30.2, -97.7).
pub fn random_points<R: Rng>(rng: &mut R, n: usize, side: f64) -> Vec<GeoPoint> {
    (0..n)
        .map(|_| pt(30.2 + rng.random_range(-side / 2.0..side / 2.0), -97.7 + rng.random_range(-side / 2.0..side / 2.0)))
        .collect()
}

pub fn landmark_set(points: Vec<GeoPoint>) -> LandmarkSet {
    LandmarkSet::new((0..points.len()).map(|i| format!("L{i}")).collect(), points).unwrap()
}

pub fn witness_set(points: Vec<GeoPoint>) -> WitnessSet {
    WitnessSet::new((0..points.len()).map(|i| format!("W{i}")).collect(), points).unwrap()
}

pub fn random_instance<R: Rng>(rng: &mut R, max_l: usize, max_w: usize, side: f64) -> (LandmarkSet, WitnessSet) {
    let nl = rng.random_range(1..=max_l);
    let nw = rng.random_range(0..=max_w);
    (landmark_set(random_points(rng, nl, side)), witness_set(random_points(rng, nw, side)))
}

/// Edge values by a direct scan: min over witnesses of the larger landmark distance.
pub fn brute_edge_values(l: &[GeoPoint], w: &[GeoPoint]) -> Vec<Vec<f64>> {
    let n = l.len();
    let mut out = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for &x in w {
                let m = geodesic_distance_km(l[i], x).max(geodesic_distance_km(l[j], x));
                if m < out[i][j] {
                    out[i][j] = m;
                }
            }
        }
    }
    out
}

type Bits = Vec<u64>;

fn bits(len: usize) -> Bits {
    vec![0; len.div_ceil(64).max(1)]
}

fn set(b: &mut Bits, i: usize) {
    b[i / 64] ^= 1 << (i % 64);
}

fn low(b: &Bits) -> Option<usize> {
    (0..b.len()).rev().find(|&w| b[w] != 0).map(|w| w * 64 + 63 - b[w].leading_zeros() as usize)
}

fn xor(a: &mut Bits, b: &Bits) {
    for (x, y) in a.iter_mut().zip(b) {
        *x ^= y;
    }
}

fn rank(vectors: &[Bits]) -> usize {
    let mut pivots: std::collections::HashMap<usize, Bits> = Default::default();
    for v in vectors {
        let mut v = v.clone();
        while let Some(l) = low(&v) {
            match pivots.get(&l) {
                Some(p) => xor(&mut v, p),
                None => {
                    pivots.insert(l, v);
                    break;
                }
            }
        }
    }
    pivots.len()
}

/// Kernel basis of the linear map whose columns are `columns`, in column coordinates.
fn kernel(columns: &[Bits]) -> Vec<Bits> {
    let n = columns.len();
    let mut pivots: std::collections::HashMap<usize, (Bits, Bits)> = Default::default();
    let mut out = Vec::new();
    for (j, c) in columns.iter().enumerate() {
        let mut v = c.clone();
        let mut t = bits(n);
        set(&mut t, j);
        loop {
            match low(&v) {
                None => {
                    out.push(t);
                    break;
                }
                Some(l) => match pivots.get(&l) {
                    Some((pv, pt)) => {
                        xor(&mut v, pv);
                        xor(&mut t, pt);
                    }
                    None => {
                        pivots.insert(l, (v, t));
                        break;
                    }
                },
            }
        }
    }
    out
}

/// All vertex subsets of size `k + 1` whose pairwise edge values are at most `t`.
fn simplices(edge: &[Vec<f64>], k: usize, t: f64) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(edge: &[Vec<f64>], k: usize, t: f64, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k + 1 {
            out.push(cur.clone());
            return;
        }
        for v in start..edge.len() {
            if cur.iter().all(|&u| edge[u][v] <= t) {
                cur.push(v);
                rec(edge, k, t, v + 1, cur, out);
                cur.pop();
            }
        }
    }
    rec(edge, k, t, 0, &mut cur, &mut out);
    out
}

fn boundary_columns(cofaces: &[Vec<usize>], faces: &[Vec<usize>]) -> Vec<Bits> {
    cofaces
        .iter()
        .map(|s| {
            let mut b = bits(faces.len());
            if s.len() > 1 {
                for skip in 0..s.len() {
                    let f: Vec<usize> = s.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                    let idx = faces.iter().position(|x| *x == f).expect("face present");
                    set(&mut b, idx);
                }
            }
            b
        })
        .collect()
}

/// Rank of H_k(K_a) -> H_k(K_b) for sublevel complexes at `a <= b`.
fn persistent_betti(edge: &[Vec<f64>], k: usize, a: f64, b: f64) -> usize {
    let faces_b = if k == 0 { vec![] } else { simplices(edge, k - 1, b) };
    let ks_b = simplices(edge, k, b);
    let ks_a: Vec<Vec<usize>> = simplices(edge, k, a);
    let cofaces_b = simplices(edge, k + 1, b);

    // cycles of K_a, written in the k-simplex basis of K_b
    let cycles_a: Vec<Bits> = if k == 0 {
        (0..ks_a.len())
            .map(|i| {
                let mut v = bits(ks_b.len());
                set(&mut v, ks_b.iter().position(|x| *x == ks_a[i]).unwrap());
                v
            })
            .collect()
    } else {
        kernel(&boundary_columns(&ks_a, &faces_b))
            .into_iter()
            .map(|kv| {
                let mut v = bits(ks_b.len());
                for (i, s) in ks_a.iter().enumerate() {
                    if kv[i / 64] >> (i % 64) & 1 == 1 {
                        set(&mut v, ks_b.iter().position(|x| x == s).unwrap());
                    }
                }
                v
            })
            .collect()
    };
    let boundaries_b = boundary_columns(&cofaces_b, &ks_b);
    let rb = rank(&boundaries_b);
    let mut both = cycles_a;
    both.extend(boundaries_b);
    rank(&both) - rb
}

/// Sorted `(dim, birth, death)` for dims below `max_dim`, from persistent Betti
/// numbers at every distinct threshold. Only the flag complex of `edge` is used.
pub fn oracle_diagram(edge: &[Vec<f64>], max_dim: usize) -> Vec<(usize, f64, f64)> {
    let mut t: Vec<f64> = vec![0.0];
    for row in edge {
        t.extend(row.iter().copied().filter(|x| x.is_finite()));
    }
    t.sort_by(f64::total_cmp);
    t.dedup();
    let m = t.len();
    let mut out = Vec::new();
    for k in 0..max_dim {
        let mut beta = vec![vec![0i64; m + 1]; m + 1];
        for i in 1..=m {
            for j in i..=m {
                beta[i][j] = persistent_betti(edge, k, t[i - 1], t[j - 1]) as i64;
            }
        }
        for i in 1..=m {
            for j in i + 1..=m {
                let mu = beta[i][j - 1] - beta[i][j] - beta[i - 1][j - 1] + beta[i - 1][j];
                assert!(mu >= 0, "negative multiplicity");
                for _ in 0..mu {
                    out.push((k, t[i - 1], t[j - 1]));
                }
            }
            let ess = beta[i][m] - beta[i - 1][m];
            for _ in 0..ess {
                out.push((k, t[i - 1], f64::INFINITY));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    out
}

pub fn sorted_triples(pairs: &[coolgap::persistence::PersistencePair]) -> Vec<(usize, f64, f64)> {
    let mut v: Vec<_> = pairs.iter().map(|p| (p.dim, p.birth, p.death)).collect();
    v.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    v
}

pub struct UnionFind(Vec<usize>);

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = x;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }

    pub fn components(&mut self) -> usize {
        (0..self.0.len()).filter(|&i| self.find(i) == i).count()
    }
}

/// Face closure, monotonicity and the stated order, checked from the simplex list alone.
pub fn check_filtration(k: &FilteredComplex) -> Result<(), String> {
    let list = k.simplices();
    let mut seen: std::collections::HashMap<Vec<u32>, f64> = Default::default();
    let mut prev: Option<(f64, usize, Vec<u32>)> = None;
    for s in list {
        let v = s.simplex.vertices().to_vec();
        if v.windows(2).any(|w| w[0] >= w[1]) {
            return Err(format!("unsorted simplex {v:?}"));
        }
        if v.len() == 1 && s.value != 0.0 {
            return Err(format!("vertex {v:?} enters at {}", s.value));
        }
        if v.len() > 1 {
            for skip in 0..v.len() {
                let f: Vec<u32> = v.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &x)| x).collect();
                match seen.get(&f) {
                    None => return Err(format!("face {f:?} of {v:?} missing or later")),
                    Some(&fv) if fv > s.value => return Err(format!("face {f:?} enters after {v:?}")),
                    _ => {}
                }
            }
        }
        let key = (s.value, v.len(), v.clone());
        if let Some(p) = &prev {
            let ord = p.0.total_cmp(&key.0).then(p.1.cmp(&key.1)).then(p.2.cmp(&key.2));
            if ord != std::cmp::Ordering::Less {
                return Err(format!("order broken at {v:?}"));
            }
        }
        prev = Some(key);
        seen.insert(v, s.value);
    }
    Ok(())
}

/// Peak resident set size of this process in KiB, where the kernel reports it.
pub fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find(|l| l.starts_with("VmHWM:"))
        .and_then(|l| l.split_whitespace().nth(1))
        .and_then(|v| v.parse().ok())
}
