//! Output files for an analysis run: the persistence pairs, death-value map
//! layers, top-k rankings and a JSON summary.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::format::fmt_g17;
use crate::geo::GeoPoint;
use crate::hvi::{rank_tracts, HviResult, VifEntry};
use crate::ingest::geojson::{feature_collection, point_feature};
use crate::persistence::{death_rank_cmp, top_k_deaths, PersistenceDiagram, PersistencePair, RankedDeath};
use crate::witness::{ComplexStrategy, LandmarkSet, Simplex, VertexId};

mod stats;

pub use stats::{box_stats, quantile_inclusive, summarize_deaths, BoxStats, SummaryStats};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Finite values as JSON numbers, infinities as the string `"inf"`.
fn km(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_g17(x))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprints {
    pub landmark_count: usize,
    pub witness_count: usize,
    pub landmarks_sha256: String,
    pub witnesses_sha256: String,
}

/// Death value of the dimension-0 pair born at one landmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Dim0Annotation {
    pub landmark: VertexId,
    pub death: f64,
    /// Position among positive-length finite pairs by decreasing death.
    pub pair_rank: Option<usize>,
}

/// A finite dimension-1 pair placed at the centroid of its death triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct Dim1Annotation {
    pub vertices: Vec<VertexId>,
    pub location: GeoPoint,
    pub birth: f64,
    pub death: f64,
    pub pair_rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub city: String,
    pub landmarks: LandmarkSet,
    pub max_dim: usize,
    pub strategy: ComplexStrategy,
    pub simplex_counts: Vec<usize>,
    pub pairs: Vec<PersistencePair>,
    pub dim0: Vec<Dim0Annotation>,
    pub dim1: Vec<Dim1Annotation>,
    pub top_dim0: Vec<RankedDeath>,
    pub top_dim1: Vec<RankedDeath>,
    pub hvi: Option<HviSection>,
    pub stats: Vec<SummaryStats>,
    pub fingerprints: Fingerprints,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HviSection {
    pub results: Vec<HviResult>,
    pub top: Vec<HviResult>,
    pub vif: Option<Vec<VifEntry>>,
}

impl HviSection {
    pub fn new(results: Vec<HviResult>, vif: Option<Vec<VifEntry>>, k: usize) -> Self {
        let top = rank_tracts(&results, k);
        HviSection { results, top, vif }
    }

    /// `(file name, contents)` for hvi.csv, top_k_hvi.csv and, when computed, vif.csv.
    pub fn render(&self) -> Vec<(&'static str, String)> {
        let mut files = vec![("hvi.csv", hvi_csv(&self.results)), ("top_k_hvi.csv", top_hvi_csv(&self.top))];
        if let Some(v) = &self.vif {
            files.push(("vif.csv", vif_csv(v)));
        }
        files
    }
}

/// Planar mean of the landmark coordinates.
fn simplex_location(landmarks: &LandmarkSet, vertices: &[VertexId]) -> GeoPoint {
    let n = vertices.len() as f64;
    let (lat, lon) = vertices.iter().fold((0.0, 0.0), |(a, b), &v| {
        let p = landmarks.point(v as usize);
        (a + p.lat(), b + p.lon())
    });
    GeoPoint::new(lat / n, lon / n).expect("mean of valid coordinates is valid")
}

impl AnalysisReport {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        city: impl Into<String>,
        landmarks: &LandmarkSet,
        diagram: &PersistenceDiagram,
        simplex_counts: Vec<usize>,
        strategy: ComplexStrategy,
        top_k: usize,
        hvi: Option<HviSection>,
        fingerprints: Fingerprints,
    ) -> Self {
        let pairs = diagram.pairs().to_vec();

        let mut finite0: Vec<&PersistencePair> = diagram.dimension(0).filter(|p| p.death.is_finite()).collect();
        finite0.sort_by(|a, b| death_rank_cmp(a, b));
        let mut dim0: Vec<Dim0Annotation> = finite0
            .iter()
            .enumerate()
            .map(|(i, p)| Dim0Annotation {
                landmark: p.birth_simplex.vertices()[0],
                death: p.death,
                pair_rank: Some(i + 1),
            })
            .collect();
        for p in diagram.dimension(0).filter(|p| p.is_essential()) {
            dim0.push(Dim0Annotation {
                landmark: p.birth_simplex.vertices()[0],
                death: p.death,
                pair_rank: None,
            });
        }
        for p in diagram.zero_persistence().iter().filter(|p| p.dim == 0) {
            dim0.push(Dim0Annotation {
                landmark: p.birth_simplex.vertices()[0],
                death: p.death,
                pair_rank: None,
            });
        }
        dim0.sort_by_key(|a| a.landmark);

        let mut finite1: Vec<&PersistencePair> = diagram.dimension(1).filter(|p| p.death.is_finite()).collect();
        finite1.sort_by(|a, b| death_rank_cmp(a, b));
        let dim1 = finite1
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let vertices = p.death_simplex.as_ref().expect("finite pair has a death simplex").vertices().to_vec();
                Dim1Annotation {
                    location: simplex_location(landmarks, &vertices),
                    vertices,
                    birth: p.birth,
                    death: p.death,
                    pair_rank: i + 1,
                }
            })
            .collect();

        let stats = (0..diagram.max_dim()).map(|d| summarize_deaths(&pairs, d)).collect();

        AnalysisReport {
            city: city.into(),
            landmarks: landmarks.clone(),
            max_dim: diagram.max_dim(),
            strategy,
            simplex_counts,
            top_dim0: top_k_deaths(diagram, 0, top_k, true),
            top_dim1: top_k_deaths(diagram, 1, top_k, true),
            pairs,
            dim0,
            dim1,
            hvi,
            stats,
            fingerprints,
        }
    }

    fn simplex_ids(&self, s: &Simplex) -> String {
        s.vertices()
            .iter()
            .map(|&v| self.landmarks.id(v as usize))
            .collect::<Vec<_>>()
            .join("-")
    }

    fn vertex_ids(&self, vertices: &[VertexId]) -> Value {
        json!(vertices.iter().map(|&v| self.landmarks.id(v as usize)).collect::<Vec<_>>())
    }

    pub fn pairs_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(["dim", "birth_km", "death_km", "birth_simplex", "death_simplex"])
            .expect("writing to memory");
        for p in &self.pairs {
            let death_simplex = p.death_simplex.as_ref().map(|s| self.simplex_ids(s)).unwrap_or_default();
            w.write_record([
                p.dim.to_string(),
                fmt_g17(p.birth),
                fmt_g17(p.death),
                self.simplex_ids(&p.birth_simplex),
                death_simplex,
            ])
            .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("UTF-8 ids")
    }

    pub fn deaths_dim0_geojson(&self) -> String {
        let features = self
            .dim0
            .iter()
            .map(|a| {
                let mut props = Map::new();
                props.insert("death_km".into(), km(a.death));
                props.insert("pair_rank".into(), json!(a.pair_rank));
                let v = a.landmark as usize;
                point_feature(self.landmarks.id(v), self.landmarks.point(v), props)
            })
            .collect();
        feature_collection(features)
    }

    pub fn deaths_dim1_geojson(&self) -> String {
        let features = self
            .dim1
            .iter()
            .map(|a| {
                json!({
                    "type": "Feature",
                    "geometry": { "type": "Point", "coordinates": [a.location.lon(), a.location.lat()] },
                    "properties": {
                        "death_km": km(a.death),
                        "pair_rank": a.pair_rank,
                        "birth_km": km(a.birth),
                        "vertex_ids": self.vertex_ids(&a.vertices),
                    },
                })
            })
            .collect();
        feature_collection(features)
    }

    pub fn top_k_geojson(&self) -> String {
        let mut features = Vec::new();
        for (ranking, list) in [("dim0", &self.top_dim0), ("dim1", &self.top_dim1)] {
            for r in list {
                let location = simplex_location(&self.landmarks, &r.landmarks);
                features.push(json!({
                    "type": "Feature",
                    "geometry": { "type": "Point", "coordinates": [location.lon(), location.lat()] },
                    "properties": {
                        "ranking": ranking,
                        "rank": r.rank,
                        "death_km": km(r.pair.death),
                        "birth_km": km(r.pair.birth),
                        "landmark_ids": self.vertex_ids(&r.landmarks),
                    },
                }));
            }
        }
        if let Some(hvi) = &self.hvi {
            for (i, r) in hvi.top.iter().enumerate() {
                let Some(v) = self.landmarks.ids().iter().position(|id| *id == r.tract_id) else {
                    log::warn!("tract {:?} has no matching region; left out of top_k.geojson", r.tract_id);
                    continue;
                };
                let p = self.landmarks.point(v);
                features.push(json!({
                    "type": "Feature",
                    "geometry": { "type": "Point", "coordinates": [p.lon(), p.lat()] },
                    "properties": {
                        "ranking": "hvi",
                        "rank": i + 1,
                        "score": r.score,
                        "landmark_ids": [r.tract_id],
                    },
                }));
            }
        }
        feature_collection(features)
    }

    pub fn summary_json(&self) -> String {
        let strategy = match self.strategy {
            ComplexStrategy::Full => "full",
            ComplexStrategy::Collapsed => "collapsed",
        };
        let doc = json!({
            "city": self.city,
            "max_dim": self.max_dim,
            "complex": { "strategy": strategy, "simplices_by_dim": self.simplex_counts },
            "pair_count": self.pairs.len(),
            "deaths": self.stats,
            "inputs": {
                "landmark_count": self.fingerprints.landmark_count,
                "witness_count": self.fingerprints.witness_count,
                "landmarks_sha256": self.fingerprints.landmarks_sha256,
                "witnesses_sha256": self.fingerprints.witnesses_sha256,
            },
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("JSON values always serialize");
        text.push('\n');
        text
    }

    /// Every output file as `(name, contents)`, in a fixed order.
    pub fn render(&self) -> Vec<(&'static str, String)> {
        let mut files = vec![
            ("pairs.csv", self.pairs_csv()),
            ("deaths_dim0.geojson", self.deaths_dim0_geojson()),
            ("deaths_dim1.geojson", self.deaths_dim1_geojson()),
            ("top_k.geojson", self.top_k_geojson()),
            ("summary.json", self.summary_json()),
        ];
        if let Some(hvi) = &self.hvi {
            files.extend(hvi.render());
        }
        files
    }
}

fn opt_g17(x: Option<f64>) -> String {
    x.map(fmt_g17).unwrap_or_default()
}

pub fn hvi_csv(results: &[HviResult]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["tract_id", "z_pm_temp", "z_canopy_gap", "z_pop_under5", "z_pop_over65", "score", "missing"])
        .expect("writing to memory");
    for r in results {
        let mut row = vec![r.tract_id.clone()];
        row.extend(r.z_scores.iter().map(|z| opt_g17(*z)));
        row.push(opt_g17(r.score));
        row.push(r.is_missing().to_string());
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("UTF-8 ids")
}

pub fn top_hvi_csv(top: &[HviResult]) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["rank", "tract_id", "score"]).expect("writing to memory");
    for (i, r) in top.iter().enumerate() {
        w.write_record([(i + 1).to_string(), r.tract_id.clone(), opt_g17(r.score)])
            .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("UTF-8 ids")
}

pub fn vif_csv(entries: &[VifEntry]) -> String {
    let mut out = String::from("variable,vif\n");
    for e in entries {
        out.push_str(&format!("{},{}\n", e.variable, fmt_g17(e.vif)));
    }
    out
}

/// Writes rendered files into `dir`, creating it if needed. Returns the paths written.
pub fn write_outputs(dir: &Path, files: &[(&'static str, String)]) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents)?;
        written.push(path);
    }
    Ok(written)
}

/// Parses a pairs.csv back into `(dim, birth, death)` rows.
pub fn read_pairs_csv(text: &str) -> Result<Vec<(usize, f64, f64)>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().collect::<Vec<_>>() != ["dim", "birth_km", "death_km", "birth_simplex", "death_simplex"] {
        return Err("not a pairs.csv file (unexpected header)".into());
    }
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = k + 2;
        let num = |i: usize| -> Result<f64, String> {
            rec[i].parse::<f64>().map_err(|e| format!("line {line}: {e}"))
        };
        let dim = rec[0].parse::<usize>().map_err(|e| format!("line {line}: {e}"))?;
        rows.push((dim, num(1)?, num(2)?));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hvi::HviVariable;
    use crate::persistence::compute_persistence;
    use crate::witness::FilteredComplex;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn triangle_report() -> AnalysisReport {
        let s = |v: &[u32]| Simplex::new(v).unwrap();
        let k = FilteredComplex::from_ordered(
            vec![
                (s(&[0]), 0.0),
                (s(&[1]), 0.0),
                (s(&[2]), 0.0),
                (s(&[0, 1]), 2.0),
                (s(&[0, 2]), 3.0),
                (s(&[1, 2]), 3.0),
                (s(&[0, 1, 2]), 3.0),
            ],
            2,
        )
        .unwrap();
        let d = compute_persistence(&k).unwrap();
        let l = LandmarkSet::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![pt(0.0, 0.0), pt(0.0, 0.02), pt(0.02, 0.01)],
        )
        .unwrap();
        let fp = Fingerprints {
            landmark_count: 3,
            witness_count: 2,
            landmarks_sha256: String::new(),
            witnesses_sha256: String::new(),
        };
        AnalysisReport::build("t", &l, &d, k.count_by_dim(), ComplexStrategy::Full, 5, None, fp)
    }

    #[test]
    fn pairs_csv_rows() {
        let r = triangle_report();
        assert_eq!(
            r.pairs_csv(),
            "dim,birth_km,death_km,birth_simplex,death_simplex\n\
             0,0,inf,a,\n0,0,2,b,a-b\n0,0,3,c,a-c\n"
        );
        let rows = read_pairs_csv(&r.pairs_csv()).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].2.is_infinite());
    }

    #[test]
    fn dim0_layer_covers_every_landmark() {
        let r = triangle_report();
        let doc: Value = serde_json::from_str(&r.deaths_dim0_geojson()).unwrap();
        let feats = doc["features"].as_array().unwrap();
        assert_eq!(feats.len(), 3);
        assert_eq!(feats[0]["properties"]["death_km"], json!("inf"));
        assert_eq!(feats[0]["properties"]["pair_rank"], Value::Null);
        assert_eq!(feats[2]["properties"]["id"], json!("c"));
        assert_eq!(feats[2]["properties"]["pair_rank"], json!(1));
        assert_eq!(feats[1]["properties"]["death_km"], json!(2.0));
    }

    #[test]
    fn top_k_keeps_rankings_apart() {
        let r = triangle_report();
        let doc: Value = serde_json::from_str(&r.top_k_geojson()).unwrap();
        let feats = doc["features"].as_array().unwrap();
        assert_eq!(feats.len(), 2);
        assert!(feats.iter().all(|f| f["properties"]["ranking"] == "dim0"));
        assert_eq!(feats[0]["properties"]["landmark_ids"], json!(["c"]));
    }

    #[test]
    fn summary_excludes_infinite_deaths() {
        let r = triangle_report();
        let doc: Value = serde_json::from_str(&r.summary_json()).unwrap();
        assert_eq!(doc["deaths"][0]["count"], json!(2));
        assert_eq!(doc["deaths"][0]["infinite_count"], json!(1));
        assert_eq!(doc["deaths"][0]["median"], json!(2.5));
        assert_eq!(doc["deaths"][1]["empty"], json!(true));
    }

    #[test]
    fn hvi_files() {
        let results = vec![
            HviResult {
                tract_id: "t1".into(),
                z_scores: [Some(1.0), Some(0.0), Some(0.0), Some(0.0)],
                score: Some(1.0),
                missing: vec![],
            },
            HviResult {
                tract_id: "t2".into(),
                z_scores: [None, Some(0.0), Some(0.0), Some(0.0)],
                score: None,
                missing: vec![HviVariable::PmTemp],
            },
        ];
        let section = HviSection::new(results, None, 5);
        let files = section.render();
        assert_eq!(files.len(), 2);
        assert_eq!(
            files[0].1,
            "tract_id,z_pm_temp,z_canopy_gap,z_pop_under5,z_pop_over65,score,missing\n\
             t1,1,0,0,0,1,false\nt2,,0,0,0,,true\n"
        );
        assert_eq!(files[1].1, "rank,tract_id,score\n1,t1,1\n");
    }
}
