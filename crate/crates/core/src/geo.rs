//! Great-circle distances, planar polygon centroids and buffered search boxes.
//!
//! Distances use the haversine formula on a sphere of radius
//! [`EARTH_RADIUS_KM`]. Centroids are computed in planar lon/lat space with the
//! shoelace formula, which is what GIS libraries report for geographic
//! polygons without a projection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius (IUGG), in kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Length of one degree of arc on the sphere, in kilometers (about 111.195).
pub const KM_PER_DEGREE: f64 = 2.0 * std::f64::consts::PI * EARTH_RADIUS_KM / 360.0;

/// Polygons with a smaller absolute area (in square degrees) are rejected.
pub const MIN_POLYGON_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("coordinate out of range or not finite: lat {lat}, lon {lon}")]
    OutOfRange { lat: f64, lon: f64 },
    #[error("ring has {0} distinct vertices, at least 3 are required")]
    TooFewVertices(usize),
    #[error("polygon is degenerate: area {area:e} square degrees")]
    DegeneratePolygon { area: f64 },
    #[error("at least two landmarks are required to derive a bounding box, got {0}")]
    TooFewLandmarks(usize),
    #[error("bounding box corners are inverted: southwest ({sw_lat}, {sw_lon}), northeast ({ne_lat}, {ne_lon})")]
    InvertedBox {
        sw_lat: f64,
        sw_lon: f64,
        ne_lat: f64,
        ne_lon: f64,
    },
    #[error("buffered bounding box leaves [-90, 90] x [-180, 180]; antimeridian and polar boxes are not supported")]
    BoxOutOfRange,
}

/// A WGS84 latitude/longitude position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeoError;

    fn try_from(raw: RawPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint { lat: p.lat, lon: p.lon }
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        let ok = lat.is_finite()
            && lon.is_finite()
            && (-90.0..=90.0).contains(&lat)
            && (-180.0..=180.0).contains(&lon);
        if ok {
            Ok(GeoPoint { lat, lon })
        } else {
            Err(GeoError::OutOfRange { lat, lon })
        }
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Haversine great-circle distance in kilometers.
///
/// The expression is exactly symmetric in its arguments: swapping `a` and `b`
/// only flips the sign of the arguments to `sin`, which are then squared.
pub fn geodesic_distance_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi_a = a.lat.to_radians();
    let phi_b = b.lat.to_radians();
    let half_dphi = ((b.lat - a.lat).to_radians() * 0.5).sin();
    let half_dlambda = ((b.lon - a.lon).to_radians() * 0.5).sin();
    let h = half_dphi * half_dphi + (phi_a.cos() * phi_b.cos()) * (half_dlambda * half_dlambda);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// A polygon given by its exterior ring and optional interior rings (holes).
///
/// Rings are stored open: a closing vertex equal to the first one is dropped
/// on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonRing {
    vertices: Vec<GeoPoint>,
    interiors: Vec<Vec<GeoPoint>>,
}

fn open_ring(mut ring: Vec<GeoPoint>) -> Result<Vec<GeoPoint>, GeoError> {
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    if ring.len() < 3 {
        return Err(GeoError::TooFewVertices(ring.len()));
    }
    Ok(ring)
}

/// Signed shoelace area and area-weighted centroid numerator of a ring,
/// computed relative to `origin` to limit cancellation.
fn ring_moments(ring: &[GeoPoint], origin: (f64, f64)) -> (f64, f64, f64) {
    let (ox, oy) = origin;
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for (k, p) in ring.iter().enumerate() {
        let q = ring[(k + 1) % ring.len()];
        let (x0, y0) = (p.lon - ox, p.lat - oy);
        let (x1, y1) = (q.lon - ox, q.lat - oy);
        let cross = x0 * y1 - x1 * y0;
        area2 += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    // area = area2 / 2; centroid numerators scale by 1 / (6 * area)
    (area2 * 0.5, cx / 6.0, cy / 6.0)
}

impl PolygonRing {
    pub fn new(vertices: Vec<GeoPoint>, interiors: Vec<Vec<GeoPoint>>) -> Result<Self, GeoError> {
        let vertices = open_ring(vertices)?;
        let interiors = interiors
            .into_iter()
            .map(open_ring)
            .collect::<Result<Vec<_>, _>>()?;
        let poly = PolygonRing { vertices, interiors };
        let area = poly.area();
        if area.abs() < MIN_POLYGON_AREA {
            return Err(GeoError::DegeneratePolygon { area });
        }
        Ok(poly)
    }

    pub fn vertices(&self) -> &[GeoPoint] {
        &self.vertices
    }

    pub fn interiors(&self) -> &[Vec<GeoPoint>] {
        &self.interiors
    }

    fn origin(&self) -> (f64, f64) {
        (self.vertices[0].lon, self.vertices[0].lat)
    }

    /// Unsigned planar area in square degrees, holes subtracted.
    pub fn area(&self) -> f64 {
        self.weighted_moments().0
    }

    /// (area, area * centroid_x, area * centroid_y) relative to `self.origin()`.
    fn weighted_moments(&self) -> (f64, f64, f64) {
        let origin = self.origin();
        let mut total = (0.0, 0.0, 0.0);
        let mut add = |ring: &[GeoPoint], sign: f64| {
            let (a, mx, my) = ring_moments(ring, origin);
            // flip so every ring contributes with its unsigned area
            let s = if a < 0.0 { -sign } else { sign };
            total.0 += s * a;
            total.1 += s * mx;
            total.2 += s * my;
        };
        add(&self.vertices, 1.0);
        for hole in &self.interiors {
            add(hole, -1.0);
        }
        total
    }
}

/// Area-weighted planar centroid of a polygon (interior rings subtract).
pub fn polygon_centroid(poly: &PolygonRing) -> Result<GeoPoint, GeoError> {
    multipolygon_centroid(std::slice::from_ref(poly))
}

/// Area-weighted planar centroid of several polygons treated as one shape.
pub fn multipolygon_centroid(polys: &[PolygonRing]) -> Result<GeoPoint, GeoError> {
    let Some(first) = polys.first() else {
        return Err(GeoError::DegeneratePolygon { area: 0.0 });
    };
    let (ox, oy) = first.origin();
    let mut area = 0.0;
    let mut mx = 0.0;
    let mut my = 0.0;
    for poly in polys {
        let (px, py) = poly.origin();
        let (a, x, y) = poly.weighted_moments();
        area += a;
        mx += x + a * (px - ox);
        my += y + a * (py - oy);
    }
    if area.abs() < MIN_POLYGON_AREA {
        return Err(GeoError::DegeneratePolygon { area });
    }
    GeoPoint::new(oy + my / area, ox + mx / area)
}

/// Axis-aligned lat/lon box. Boxes crossing the antimeridian are not representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    southwest: GeoPoint,
    northeast: GeoPoint,
}

impl BoundingBox {
    pub fn new(southwest: GeoPoint, northeast: GeoPoint) -> Result<Self, GeoError> {
        if southwest.lat > northeast.lat || southwest.lon > northeast.lon {
            return Err(GeoError::InvertedBox {
                sw_lat: southwest.lat,
                sw_lon: southwest.lon,
                ne_lat: northeast.lat,
                ne_lon: northeast.lon,
            });
        }
        Ok(BoundingBox { southwest, northeast })
    }

    pub fn southwest(&self) -> GeoPoint {
        self.southwest
    }

    pub fn northeast(&self) -> GeoPoint {
        self.northeast
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.southwest.lat..=self.northeast.lat).contains(&p.lat)
            && (self.southwest.lon..=self.northeast.lon).contains(&p.lon)
    }

    pub fn contains_strictly(&self, p: GeoPoint) -> bool {
        self.southwest.lat < p.lat
            && p.lat < self.northeast.lat
            && self.southwest.lon < p.lon
            && p.lon < self.northeast.lon
    }
}

/// Largest pairwise geodesic distance among `points`, in kilometers.
pub fn max_pairwise_distance_km(points: &[GeoPoint]) -> f64 {
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            points[i + 1..]
                .iter()
                .map(|&q| geodesic_distance_km(points[i], q))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Bounding box of `landmarks` grown on every side by half the largest
/// pairwise landmark distance, converted to degrees at the mean latitude.
pub fn buffered_bbox(landmarks: &[GeoPoint]) -> Result<BoundingBox, GeoError> {
    if landmarks.len() < 2 {
        return Err(GeoError::TooFewLandmarks(landmarks.len()));
    }
    let radius_km = max_pairwise_distance_km(landmarks) / 2.0;
    let mean_lat = landmarks.iter().map(|p| p.lat).sum::<f64>() / landmarks.len() as f64;
    let dlat = radius_km / KM_PER_DEGREE;
    let dlon = radius_km / (KM_PER_DEGREE * mean_lat.to_radians().cos());

    let (mut min_lat, mut max_lat) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_lon, mut max_lon) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in landmarks {
        min_lat = min_lat.min(p.lat);
        max_lat = max_lat.max(p.lat);
        min_lon = min_lon.min(p.lon);
        max_lon = max_lon.max(p.lon);
    }
    let corner = |lat: f64, lon: f64| GeoPoint::new(lat, lon).map_err(|_| GeoError::BoxOutOfRange);
    BoundingBox::new(
        corner(min_lat - dlat, min_lon - dlon)?,
        corner(max_lat + dlat, max_lon + dlon)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn ring(coords: &[(f64, f64)]) -> Vec<GeoPoint> {
        // (x = lon, y = lat)
        coords.iter().map(|&(x, y)| pt(y, x)).collect()
    }

    #[test]
    fn rejects_out_of_range_points() {
        assert!(GeoPoint::new(95.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(-90.0, 180.0).is_ok());
    }

    #[test]
    fn closed_form_arcs() {
        let a = pt(30.0, -97.8);
        assert_eq!(geodesic_distance_km(a, a), 0.0);
        let half = std::f64::consts::PI * 6371.0088;
        assert!((geodesic_distance_km(pt(0.0, 0.0), pt(0.0, 180.0)) - half).abs() < 1e-3);
        assert!((half - 20015.114).abs() < 1e-3);
        let deg = 2.0 * std::f64::consts::PI * 6371.0088 / 360.0;
        assert!((geodesic_distance_km(pt(0.0, 0.0), pt(0.0, 1.0)) - deg).abs() < 1e-3);
        assert!((deg - 111.195).abs() < 1e-3);
    }

    #[test]
    fn square_and_triangle_centroids() {
        let sq = PolygonRing::new(ring(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]), vec![]).unwrap();
        let c = polygon_centroid(&sq).unwrap();
        assert!((c.lon() - 0.5).abs() < 1e-12 && (c.lat() - 0.5).abs() < 1e-12);

        let tri = PolygonRing::new(ring(&[(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)]), vec![]).unwrap();
        let c = polygon_centroid(&tri).unwrap();
        assert!((c.lon() - 1.0).abs() < 1e-12 && (c.lat() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l_shape_is_area_weighted_combination() {
        // unit square (area 1, centroid (0.5, 0.5)) + [1,2]x[0,0.5] (area 0.5, centroid (1.5, 0.25))
        let expected_x = (1.0 * 0.5 + 0.5 * 1.5) / 1.5;
        let expected_y = (1.0 * 0.5 + 0.5 * 0.25) / 1.5;
        let l = PolygonRing::new(
            ring(&[(0.0, 0.0), (2.0, 0.0), (2.0, 0.5), (1.0, 0.5), (1.0, 1.0), (0.0, 1.0)]),
            vec![],
        )
        .unwrap();
        let c = polygon_centroid(&l).unwrap();
        assert!((c.lon() - expected_x).abs() < 1e-12);
        assert!((c.lat() - expected_y).abs() < 1e-12);
    }

    #[test]
    fn holes_subtract() {
        // 4x4 square minus the unit square [0,1]x[0,1]
        let outer = ring(&[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)]);
        let hole = ring(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, 0.0)]);
        let p = PolygonRing::new(outer, vec![hole]).unwrap();
        assert!((p.area() - 15.0).abs() < 1e-12);
        let expected = (16.0 * 2.0 - 0.5) / 15.0;
        let c = polygon_centroid(&p).unwrap();
        assert!((c.lon() - expected).abs() < 1e-12 && (c.lat() - expected).abs() < 1e-12);
    }

    #[test]
    fn closing_vertex_is_dropped_and_degenerates_rejected() {
        let closed = ring(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 0.0)]);
        assert_eq!(PolygonRing::new(closed, vec![]).unwrap().vertices().len(), 3);
        let line = ring(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        assert!(matches!(PolygonRing::new(line, vec![]), Err(GeoError::DegeneratePolygon { .. })));
        let two = ring(&[(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(PolygonRing::new(two, vec![]), Err(GeoError::TooFewVertices(2)));
    }

    #[test]
    fn buffered_box_at_equator() {
        // two points 10 km apart along the equator
        let dlon = 10.0 / KM_PER_DEGREE;
        let a = pt(0.0, 0.0);
        let b = pt(0.0, dlon);
        let d = geodesic_distance_km(a, b);
        assert!((d - 10.0).abs() < 1e-9);
        let bbox = buffered_bbox(&[a, b]).unwrap();
        let pad: f64 = 5.0 / 111.195;
        assert!((pad - 0.04497).abs() < 1e-5);
        assert!((bbox.southwest().lat() + pad).abs() < 1e-5);
        assert!((bbox.northeast().lat() - pad).abs() < 1e-5);
        assert!((bbox.southwest().lon() + pad).abs() < 1e-5);
        assert!((bbox.northeast().lon() - (dlon + pad)).abs() < 1e-5);
        assert!(bbox.contains_strictly(a) && bbox.contains_strictly(b));
    }

    #[test]
    fn buffered_box_degenerate_and_errors() {
        let p = pt(25.7, -80.2);
        let bbox = buffered_bbox(&[p, p]).unwrap();
        assert_eq!(bbox.southwest(), p);
        assert_eq!(bbox.northeast(), p);
        assert_eq!(buffered_bbox(&[p]), Err(GeoError::TooFewLandmarks(1)));
        let near_meridian = [pt(0.0, 179.9), pt(0.0, 179.0)];
        assert_eq!(buffered_bbox(&near_meridian), Err(GeoError::BoxOutOfRange));
    }

    #[test]
    fn inverted_box_rejected() {
        assert!(BoundingBox::new(pt(1.0, 0.0), pt(0.0, 1.0)).is_err());
    }

    fn arb_point() -> impl Strategy<Value = GeoPoint> {
        (-90.0f64..=90.0, -180.0f64..=180.0).prop_map(|(lat, lon)| pt(lat, lon))
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(a in arb_point(), b in arb_point()) {
            prop_assert_eq!(geodesic_distance_km(a, b), geodesic_distance_km(b, a));
        }

        #[test]
        fn triangle_inequality(a in arb_point(), b in arb_point(), c in arb_point()) {
            let ac = geodesic_distance_km(a, c);
            let via = geodesic_distance_km(a, b) + geodesic_distance_km(b, c);
            prop_assert!(ac <= via + 1e-9);
        }

        #[test]
        fn centroid_invariant_under_rotation_and_reversal(
            shift in 0usize..6,
            xs in proptest::collection::vec(-1.0f64..1.0, 6),
        ) {
            // star-shaped hexagon around (10, 20): radii from xs keep it simple
            let verts: Vec<GeoPoint> = (0..6)
                .map(|k| {
                    let theta = k as f64 * std::f64::consts::PI / 3.0;
                    let r = 1.5 + xs[k];
                    pt(20.0 + r * theta.sin(), 10.0 + r * theta.cos())
                })
                .collect();
            let base = polygon_centroid(&PolygonRing::new(verts.clone(), vec![]).unwrap()).unwrap();
            let mut rotated = verts.clone();
            rotated.rotate_left(shift);
            let mut reversed = rotated.clone();
            reversed.reverse();
            for v in [rotated, reversed] {
                let c = polygon_centroid(&PolygonRing::new(v, vec![]).unwrap()).unwrap();
                prop_assert!((c.lat() - base.lat()).abs() < 1e-9);
                prop_assert!((c.lon() - base.lon()).abs() < 1e-9);
            }
        }

        #[test]
        fn buffered_box_strictly_contains_landmarks(
            pts in proptest::collection::vec((25.0f64..26.0, -81.0f64..-80.0), 2..20)
        ) {
            let landmarks: Vec<GeoPoint> = pts.iter().map(|&(la, lo)| pt(la, lo)).collect();
            prop_assume!(max_pairwise_distance_km(&landmarks) > 0.0);
            let bbox = buffered_bbox(&landmarks).unwrap();
            for p in &landmarks {
                prop_assert!(bbox.contains_strictly(*p));
            }
        }
    }
}
