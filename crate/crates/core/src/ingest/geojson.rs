//! GeoJSON FeatureCollections of Polygon, MultiPolygon and Point features.

use std::path::Path;

use serde_json::{json, Map, Value};

use super::{read_file, IngestError};
use crate::geo::{multipolygon_centroid, GeoPoint, PolygonRing};
use crate::witness::LandmarkSet;

#[derive(Debug, Clone, PartialEq)]
pub enum RegionGeometry {
    /// A location given directly; used as the landmark unchanged.
    Point(GeoPoint),
    Polygons(Vec<PolygonRing>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionFeature {
    pub id: String,
    pub geometry: RegionGeometry,
}

impl RegionFeature {
    /// The point geometry itself, or the area-weighted centroid of the polygons.
    pub fn representative_point(&self) -> Result<GeoPoint, IngestError> {
        match &self.geometry {
            RegionGeometry::Point(p) => Ok(*p),
            RegionGeometry::Polygons(polys) => multipolygon_centroid(polys).map_err(|source| IngestError::Geometry {
                id: self.id.clone(),
                source,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionFile {
    pub features: Vec<RegionFeature>,
}

fn id_value(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn position(v: &Value, ctx: &str) -> Result<GeoPoint, IngestError> {
    let coords = v
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| IngestError::parse(ctx, "position must be an array [lon, lat]"))?;
    let lon = coords[0].as_f64().ok_or_else(|| IngestError::parse(ctx, "longitude is not a number"))?;
    let lat = coords[1].as_f64().ok_or_else(|| IngestError::parse(ctx, "latitude is not a number"))?;
    GeoPoint::new(lat, lon).map_err(|source| IngestError::Coordinate {
        context: ctx.to_string(),
        source,
    })
}

fn ring(v: &Value, ctx: &str) -> Result<Vec<GeoPoint>, IngestError> {
    v.as_array()
        .ok_or_else(|| IngestError::parse(ctx, "ring must be an array of positions"))?
        .iter()
        .map(|p| position(p, ctx))
        .collect()
}

fn polygon(v: &Value, id: &str) -> Result<PolygonRing, IngestError> {
    let ctx = format!("feature {id:?}");
    let rings = v
        .as_array()
        .filter(|r| !r.is_empty())
        .ok_or_else(|| IngestError::parse(&ctx, "polygon must be a nonempty array of rings"))?;
    let exterior = ring(&rings[0], &ctx)?;
    let interiors = rings[1..].iter().map(|r| ring(r, &ctx)).collect::<Result<Vec<_>, _>>()?;
    PolygonRing::new(exterior, interiors).map_err(|source| IngestError::Geometry { id: id.to_string(), source })
}

fn geometry(v: &Value, id: &str) -> Result<RegionGeometry, IngestError> {
    let ctx = format!("feature {id:?}");
    let kind = v
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| IngestError::parse(&ctx, "missing geometry"))?;
    let coords = v
        .get("coordinates")
        .ok_or_else(|| IngestError::parse(&ctx, "geometry has no coordinates"))?;
    match kind {
        "Point" => Ok(RegionGeometry::Point(position(coords, &ctx)?)),
        "Polygon" => Ok(RegionGeometry::Polygons(vec![polygon(coords, id)?])),
        "MultiPolygon" => {
            let polys = coords
                .as_array()
                .ok_or_else(|| IngestError::parse(&ctx, "MultiPolygon coordinates must be an array"))?
                .iter()
                .map(|p| polygon(p, id))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(RegionGeometry::Polygons(polys))
        }
        other => Err(IngestError::parse(&ctx, format!("unsupported geometry type {other}"))),
    }
}

impl RegionFile {
    /// Feature ids come from the feature's `id` member, else from the
    /// `id_property` entry of its properties.
    pub fn parse(text: &str, id_property: &str) -> Result<Self, IngestError> {
        let doc: Value = serde_json::from_str(text).map_err(|e| IngestError::parse("GeoJSON document", e))?;
        if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
            return Err(IngestError::parse("GeoJSON document", "expected a FeatureCollection"));
        }
        let features = doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| IngestError::parse("GeoJSON document", "missing features array"))?;

        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(features.len());
        for (index, f) in features.iter().enumerate() {
            let id = f
                .get("id")
                .and_then(id_value)
                .or_else(|| f.get("properties").and_then(|p| p.get(id_property)).and_then(id_value))
                .ok_or(IngestError::MissingId { index })?;
            if !seen.insert(id.clone()) {
                return Err(IngestError::DuplicateId(id));
            }
            let geom = f
                .get("geometry")
                .filter(|g| !g.is_null())
                .ok_or_else(|| IngestError::parse(format!("feature {id:?}"), "missing geometry"))?;
            let geometry = geometry(geom, &id)?;
            out.push(RegionFeature { id, geometry });
        }
        Ok(RegionFile { features: out })
    }

    pub fn landmarks(&self) -> Result<LandmarkSet, IngestError> {
        let points = self
            .features
            .iter()
            .map(RegionFeature::representative_point)
            .collect::<Result<Vec<_>, _>>()?;
        let ids = self.features.iter().map(|f| f.id.clone()).collect();
        Ok(LandmarkSet::new(ids, points)?)
    }
}

pub fn load_regions(path: &Path) -> Result<LandmarkSet, IngestError> {
    load_regions_with(path, "id")
}

pub fn load_regions_with(path: &Path, id_property: &str) -> Result<LandmarkSet, IngestError> {
    let text = read_file(path)?;
    RegionFile::parse(&text, id_property)
        .map_err(|e| match e {
            IngestError::Parse { context, message } => IngestError::Parse {
                context: format!("{} ({context})", path.display()),
                message,
            },
            other => other,
        })?
        .landmarks()
}

pub(crate) fn point_feature(id: &str, p: GeoPoint, mut properties: Map<String, Value>) -> Value {
    properties.insert("id".into(), json!(id));
    json!({
        "type": "Feature",
        "id": id,
        "geometry": { "type": "Point", "coordinates": [p.lon(), p.lat()] },
        "properties": properties,
    })
}

pub(crate) fn feature_collection(features: Vec<Value>) -> String {
    let doc = json!({ "type": "FeatureCollection", "features": features });
    let mut text = serde_json::to_string_pretty(&doc).expect("JSON values always serialize");
    text.push('\n');
    text
}

/// Point FeatureCollection with one feature per landmark, in set order.
pub fn landmarks_to_geojson(landmarks: &LandmarkSet) -> String {
    feature_collection(landmarks.iter().map(|(id, p)| point_feature(id, p, Map::new())).collect())
}

pub fn save_landmarks(landmarks: &LandmarkSet, path: &Path) -> Result<(), IngestError> {
    std::fs::write(path, landmarks_to_geojson(landmarks)).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}
