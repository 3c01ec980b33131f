//! Cooling-center candidates from an Overpass API endpoint, cached on disk.
//!
//! One Overpass QL query is sent per tag group. Responses are merged,
//! deduplicated by OSM element, reduced to one point per element and written
//! to a content-addressed cache file keyed by endpoint, bounding box and the
//! rendered queries. A later identical fetch is answered from that file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{read_file, IngestError};
use crate::format::fmt_g17;
use crate::geo::{BoundingBox, GeoPoint};
use crate::witness::WitnessSet;

pub const DEFAULT_ENDPOINT: &str = "https://overpass-api.de/api/interpreter";

/// Environment variable that overrides the configured endpoint.
pub const ENDPOINT_ENV: &str = "COOLGAP_OVERPASS_ENDPOINT";

/// Server-side timeout written into every query, seconds.
const QUERY_TIMEOUT_SECS: u32 = 180;

const EXCERPT_LEN: usize = 200;

/// A named set of tag selectors. Each selector is a list of conditions that
/// must all hold: `key=value` for equality or `key~regex` for a regex match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagGroup {
    pub name: String,
    pub selectors: Vec<Vec<String>>,
}

impl TagGroup {
    fn new(name: &str, selectors: &[&[&str]]) -> Self {
        TagGroup {
            name: name.into(),
            selectors: selectors
                .iter()
                .map(|s| s.iter().map(|c| c.to_string()).collect())
                .collect(),
        }
    }
}

/// Explicit search box as (lon, lat) corner pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BboxConfig {
    pub southwest: [f64; 2],
    pub northeast: [f64; 2],
}

impl BboxConfig {
    pub fn to_bbox(&self) -> Result<BoundingBox, IngestError> {
        let corner = |c: [f64; 2]| {
            GeoPoint::new(c[1], c[0]).map_err(|source| IngestError::Coordinate {
                context: "bounding box".into(),
                source,
            })
        };
        BoundingBox::new(corner(self.southwest)?, corner(self.northeast)?).map_err(|source| IngestError::Coordinate {
            context: "bounding box".into(),
            source,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FetchConfig {
    pub endpoint: String,
    pub timeout_secs: u64,
    pub retries: u32,
    /// First retry delay; doubles after every failed attempt.
    pub backoff_ms: u64,
    pub bbox: Option<BboxConfig>,
    #[serde(rename = "group")]
    pub groups: Vec<TagGroup>,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            endpoint: DEFAULT_ENDPOINT.into(),
            timeout_secs: 30,
            retries: 3,
            backoff_ms: 1000,
            bbox: None,
            groups: vec![
                TagGroup::new("library", &[&["amenity=library"]]),
                TagGroup::new("community center", &[&["amenity=community_centre"]]),
                TagGroup::new(
                    "senior",
                    &[&["amenity=social_facility", "social_facility:for=senior"], &["amenity=social_centre"]],
                ),
                TagGroup::new("recreation center", &[&["leisure=fitness_centre"], &["leisure=sports_centre"]]),
            ],
        }
    }
}

impl FetchConfig {
    pub fn from_toml(text: &str) -> Result<Self, IngestError> {
        let config: FetchConfig = toml::from_str(text).map_err(|e| IngestError::Config(e.to_string()))?;
        for group in &config.groups {
            for selector in &group.selectors {
                if selector.is_empty() {
                    return Err(IngestError::Config(format!("group {:?} has an empty selector", group.name)));
                }
                for condition in selector {
                    render_condition(condition)?;
                }
            }
        }
        Ok(config)
    }

    /// Built-in defaults, then the TOML file if given, then [`ENDPOINT_ENV`].
    pub fn load(path: Option<&Path>) -> Result<Self, IngestError> {
        let mut config = match path {
            Some(p) => Self::from_toml(&read_file(p)?)?,
            None => FetchConfig::default(),
        };
        if let Ok(endpoint) = std::env::var(ENDPOINT_ENV) {
            if !endpoint.is_empty() {
                config.endpoint = endpoint;
            }
        }
        Ok(config)
    }

    fn group(&self, name: &str) -> Result<&TagGroup, IngestError> {
        self.groups
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| IngestError::Config(format!("no tag group named {name:?}")))
    }
}

/// A search: a box and the names of the tag groups to look for.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessQuery {
    bbox: BoundingBox,
    tags: Vec<String>,
}

impl WitnessQuery {
    pub fn new(bbox: BoundingBox, tags: Vec<String>) -> Result<Self, IngestError> {
        if tags.is_empty() {
            return Err(IngestError::Config("a witness query needs at least one tag".into()));
        }
        Ok(WitnessQuery { bbox, tags })
    }

    /// Library, community center, senior and recreation center groups.
    pub fn with_default_tags(bbox: BoundingBox) -> Self {
        WitnessQuery {
            bbox,
            tags: FetchConfig::default().groups.into_iter().map(|g| g.name).collect(),
        }
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }
}

fn quoted(s: &str, condition: &str) -> Result<String, IngestError> {
    if s.is_empty() || s.contains('"') || s.contains('\\') {
        return Err(IngestError::Config(format!("malformed tag condition {condition:?}")));
    }
    Ok(format!("\"{s}\""))
}

fn render_condition(condition: &str) -> Result<String, IngestError> {
    let (op, (key, value)) = match (condition.split_once('='), condition.split_once('~')) {
        (Some(kv), None) => ("=", kv),
        (None, Some(kv)) => ("~", kv),
        (Some(eq), Some(re)) => {
            if eq.0.len() < re.0.len() {
                ("=", eq)
            } else {
                ("~", re)
            }
        }
        (None, None) => return Err(IngestError::Config(format!("malformed tag condition {condition:?}"))),
    };
    Ok(format!("[{}{op}{}]", quoted(key, condition)?, quoted(value, condition)?))
}

/// Overpass QL for one tag group: nodes and ways in the box, with geometry.
pub fn overpass_query(bbox: &BoundingBox, group: &TagGroup) -> Result<String, IngestError> {
    let (sw, ne) = (bbox.southwest(), bbox.northeast());
    let area = format!(
        "({},{},{},{})",
        fmt_g17(sw.lat()),
        fmt_g17(sw.lon()),
        fmt_g17(ne.lat()),
        fmt_g17(ne.lon())
    );
    let mut q = format!("[out:json][timeout:{QUERY_TIMEOUT_SECS}];\n(\n");
    for selector in &group.selectors {
        let filters = selector.iter().map(|c| render_condition(c)).collect::<Result<String, _>>()?;
        for kind in ["node", "way"] {
            q.push_str(&format!("  {kind}{filters}{area};\n"));
        }
    }
    q.push_str(");\nout geom;\n");
    Ok(q)
}

/// Hex SHA-256 over the endpoint and the rendered queries.
pub fn cache_key(endpoint: &str, queries: &[String]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(endpoint.as_bytes());
    hasher.update(b"\n");
    for q in queries {
        hasher.update(q.as_bytes());
        hasher.update(b"\x00");
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Sends one query; `Err` carries a transport-level failure description.
pub trait Transport {
    fn post_query(&self, endpoint: &str, query: &str) -> Result<HttpReply, String>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .user_agent(concat!("coolgap/", env!("CARGO_PKG_VERSION")))
            .build()
            .into();
        HttpTransport { agent }
    }
}

impl Transport for HttpTransport {
    fn post_query(&self, endpoint: &str, query: &str) -> Result<HttpReply, String> {
        let mut response = self
            .agent
            .post(endpoint)
            .send_form([("data", query)])
            .map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedWitness {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

/// On-disk record of one completed fetch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    /// Seconds since the Unix epoch.
    pub fetched_at: u64,
    pub endpoint: String,
    pub tags: Vec<String>,
    pub responses: Vec<String>,
    pub witnesses: Vec<CachedWitness>,
}

impl CacheEntry {
    pub fn witness_set(&self) -> Result<WitnessSet, IngestError> {
        let mut ids = Vec::with_capacity(self.witnesses.len());
        let mut points = Vec::with_capacity(self.witnesses.len());
        for w in &self.witnesses {
            points.push(GeoPoint::new(w.lat, w.lon).map_err(|source| IngestError::Coordinate {
                context: format!("cache entry {} witness {:?}", self.key, w.id),
                source,
            })?);
            ids.push(w.id.clone());
        }
        Ok(WitnessSet::new(ids, points)?)
    }
}

#[derive(Debug, Clone)]
pub struct FetchOutcome {
    pub witnesses: WitnessSet,
    pub from_cache: bool,
    pub cache_key: String,
    pub cache_path: PathBuf,
}

#[derive(Deserialize)]
struct LatLon {
    lat: f64,
    lon: f64,
}

#[derive(Deserialize)]
struct Element {
    #[serde(rename = "type")]
    kind: String,
    id: u64,
    lat: Option<f64>,
    lon: Option<f64>,
    center: Option<LatLon>,
    geometry: Option<Vec<Option<LatLon>>>,
}

#[derive(Deserialize)]
struct Response {
    elements: Vec<Element>,
}

/// Node coordinates, else the first geometry vertex, else the reported center.
fn element_point(e: &Element) -> Option<(f64, f64)> {
    if let (Some(lat), Some(lon)) = (e.lat, e.lon) {
        return Some((lat, lon));
    }
    if let Some(first) = e.geometry.as_ref().and_then(|g| g.iter().flatten().next()) {
        return Some((first.lat, first.lon));
    }
    e.center.as_ref().map(|c| (c.lat, c.lon))
}

/// Merges Overpass JSON bodies into witnesses sorted by element id, one per element.
pub fn parse_responses(bodies: &[String]) -> Result<Vec<CachedWitness>, IngestError> {
    let mut seen = HashSet::new();
    let mut found: Vec<(u64, String, CachedWitness)> = Vec::new();
    for (k, body) in bodies.iter().enumerate() {
        let response: Response =
            serde_json::from_str(body).map_err(|e| IngestError::parse(format!("Overpass response #{}", k + 1), e))?;
        for e in response.elements {
            if !seen.insert((e.kind.clone(), e.id)) {
                continue;
            }
            let Some((lat, lon)) = element_point(&e) else {
                log::warn!("skipping {}/{}: no coordinates in response", e.kind, e.id);
                continue;
            };
            let id = format!("{}/{}", e.kind, e.id);
            GeoPoint::new(lat, lon).map_err(|source| IngestError::Coordinate {
                context: format!("OSM element {id}"),
                source,
            })?;
            found.push((e.id, e.kind.clone(), CachedWitness { id, lat, lon }));
        }
    }
    found.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    Ok(found.into_iter().map(|(_, _, w)| w).collect())
}

fn excerpt(body: &str) -> String {
    let cut: String = body.chars().take(EXCERPT_LEN).collect();
    cut.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn post_with_retries(
    transport: &dyn Transport,
    config: &FetchConfig,
    query: &str,
    cache_key: &str,
) -> Result<String, IngestError> {
    let mut last = None;
    for attempt in 0..=config.retries {
        if attempt > 0 {
            let delay = config.backoff_ms.saturating_mul(1u64 << (attempt - 1).min(20));
            log::info!("retrying Overpass query in {delay} ms (attempt {})", attempt + 1);
            std::thread::sleep(Duration::from_millis(delay));
        }
        match transport.post_query(&config.endpoint, query) {
            Ok(reply) if (200..300).contains(&reply.status) => return Ok(reply.body),
            Ok(reply) => {
                let err = IngestError::Upstream {
                    endpoint: config.endpoint.clone(),
                    status: reply.status,
                    excerpt: excerpt(&reply.body),
                };
                if reply.status != 429 && reply.status < 500 {
                    return Err(err);
                }
                last = Some(err);
            }
            Err(detail) => {
                last = Some(IngestError::Network {
                    endpoint: config.endpoint.clone(),
                    detail,
                    cache_key: cache_key.to_string(),
                });
            }
        }
    }
    Err(last.expect("at least one attempt is made"))
}

fn write_atomically(path: &Path, contents: &str) -> Result<(), IngestError> {
    let io_err = |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, contents).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

/// Runs `query` against the configured endpoint, or answers it from `cache_dir`.
///
/// Requests are sent one at a time. Callers must not run two fetches against
/// the same cache directory concurrently.
pub fn fetch_witnesses(
    query: &WitnessQuery,
    config: &FetchConfig,
    cache_dir: &Path,
    transport: &dyn Transport,
) -> Result<FetchOutcome, IngestError> {
    let queries = query
        .tags
        .iter()
        .map(|t| overpass_query(&query.bbox, config.group(t)?))
        .collect::<Result<Vec<_>, _>>()?;
    let key = cache_key(&config.endpoint, &queries);
    let cache_path = cache_dir.join(format!("{key}.json"));

    if cache_path.exists() {
        let entry: CacheEntry = serde_json::from_str(&read_file(&cache_path)?)
            .map_err(|e| IngestError::parse(cache_path.display().to_string(), e))?;
        log::info!("serving {} witnesses from cache {}", entry.witnesses.len(), cache_path.display());
        return Ok(FetchOutcome {
            witnesses: entry.witness_set()?,
            from_cache: true,
            cache_key: key,
            cache_path,
        });
    }

    let mut responses = Vec::with_capacity(queries.len());
    for q in &queries {
        responses.push(post_with_retries(transport, config, q, &key)?);
    }
    let witnesses = parse_responses(&responses)?;
    if witnesses.is_empty() {
        log::warn!("Overpass returned no matching elements inside the search box");
    }
    let entry = CacheEntry {
        key: key.clone(),
        fetched_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        endpoint: config.endpoint.clone(),
        tags: query.tags.clone(),
        responses,
        witnesses,
    };
    let text = serde_json::to_string_pretty(&entry).expect("cache entry serializes");
    write_atomically(&cache_path, &text)?;
    Ok(FetchOutcome {
        witnesses: entry.witness_set()?,
        from_cache: false,
        cache_key: key,
        cache_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    fn bbox() -> BoundingBox {
        BoundingBox::new(GeoPoint::new(25.6, -80.4).unwrap(), GeoPoint::new(25.9, -80.1).unwrap()).unwrap()
    }

    struct Scripted {
        replies: RefCell<Vec<Result<HttpReply, String>>>,
        calls: RefCell<usize>,
    }

    impl Scripted {
        fn new(mut replies: Vec<Result<HttpReply, String>>) -> Self {
            replies.reverse();
            Scripted {
                replies: RefCell::new(replies),
                calls: RefCell::new(0),
            }
        }
    }

    impl Transport for Scripted {
        fn post_query(&self, _: &str, _: &str) -> Result<HttpReply, String> {
            *self.calls.borrow_mut() += 1;
            self.replies.borrow_mut().pop().unwrap_or_else(|| Err("no scripted reply".into()))
        }
    }

    fn ok(body: &str) -> Result<HttpReply, String> {
        Ok(HttpReply {
            status: 200,
            body: body.into(),
        })
    }

    fn quick_config() -> FetchConfig {
        FetchConfig {
            backoff_ms: 1,
            ..FetchConfig::default()
        }
    }

    #[test]
    fn query_text() {
        let group = TagGroup::new("senior", &[&["amenity=social_facility", "social_facility:for=senior"]]);
        let q = overpass_query(&bbox(), &group).unwrap();
        assert!(q.starts_with("[out:json][timeout:180];"));
        assert!(q.contains(r#"  node["amenity"="social_facility"]["social_facility:for"="senior"](25.600000000000001,-80.400000000000006,25.899999999999999,-80.099999999999994);"#));
        assert!(q.contains("  way[\"amenity\"=\"social_facility\"]"));
        assert!(q.ends_with("out geom;\n"));
        assert_eq!(render_condition("leisure~recreation").unwrap(), r#"["leisure"~"recreation"]"#);
        assert!(render_condition("noop").is_err());
        assert!(render_condition("a=\"b").is_err());
    }

    #[test]
    fn cache_key_tracks_inputs() {
        let config = FetchConfig::default();
        let lib = config.group("library").unwrap();
        let q1 = vec![overpass_query(&bbox(), lib).unwrap()];
        let base = cache_key(&config.endpoint, &q1);
        assert_eq!(base, cache_key(&config.endpoint, &q1));
        assert_ne!(base, cache_key("http://localhost/api", &q1));
        let other_box = BoundingBox::new(GeoPoint::new(25.5, -80.4).unwrap(), GeoPoint::new(25.9, -80.1).unwrap()).unwrap();
        assert_ne!(base, cache_key(&config.endpoint, &[overpass_query(&other_box, lib).unwrap()]));
        let cc = config.group("community center").unwrap();
        assert_ne!(base, cache_key(&config.endpoint, &[overpass_query(&bbox(), cc).unwrap()]));
    }

    #[test]
    fn dedups_and_sorts_elements() {
        let body = r#"{"elements":[
            {"type":"node","id":30,"lat":25.7,"lon":-80.2,"tags":{"amenity":"library"}},
            {"type":"way","id":5,"geometry":[{"lat":25.8,"lon":-80.3},{"lat":25.81,"lon":-80.31}]},
            {"type":"node","id":30,"lat":25.7,"lon":-80.2},
            {"type":"node","id":7,"lat":25.75,"lon":-80.25}]}"#;
        let w = parse_responses(&[body.to_string()]).unwrap();
        let ids: Vec<&str> = w.iter().map(|x| x.id.as_str()).collect();
        assert_eq!(ids, vec!["way/5", "node/7", "node/30"]);
        assert_eq!((w[0].lat, w[0].lon), (25.8, -80.3));
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let dir = tempfile::tempdir().unwrap();
        let query = WitnessQuery::new(bbox(), vec!["library".into()]).unwrap();
        let transport = Scripted::new(vec![
            Ok(HttpReply {
                status: 504,
                body: "gateway timeout".into(),
            }),
            Err("connection reset".into()),
            ok(r#"{"elements":[{"type":"node","id":1,"lat":25.7,"lon":-80.2}]}"#),
        ]);
        let out = fetch_witnesses(&query, &quick_config(), dir.path(), &transport).unwrap();
        assert_eq!(*transport.calls.borrow(), 3);
        assert_eq!(out.witnesses.len(), 1);
        assert!(!out.from_cache);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let dir = tempfile::tempdir().unwrap();
        let query = WitnessQuery::new(bbox(), vec!["library".into()]).unwrap();
        let transport = Scripted::new(vec![Ok(HttpReply {
            status: 400,
            body: "Error: line 3: parse error".into(),
        })]);
        match fetch_witnesses(&query, &quick_config(), dir.path(), &transport) {
            Err(IngestError::Upstream { status, excerpt, .. }) => {
                assert_eq!(status, 400);
                assert!(excerpt.contains("parse error"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(*transport.calls.borrow(), 1);
        assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
    }

    #[test]
    fn network_failure_reports_cache_miss() {
        let dir = tempfile::tempdir().unwrap();
        let query = WitnessQuery::new(bbox(), vec!["library".into()]).unwrap();
        let transport = Scripted::new(vec![]);
        let config = FetchConfig {
            retries: 1,
            ..quick_config()
        };
        let err = fetch_witnesses(&query, &config, dir.path(), &transport).unwrap_err();
        assert!(err.is_upstream());
        assert!(err.to_string().contains("no cached response"));
        assert_eq!(*transport.calls.borrow(), 2);
    }

    #[test]
    fn unknown_tag_group_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let query = WitnessQuery::new(bbox(), vec!["swimming pool".into()]).unwrap();
        let err = fetch_witnesses(&query, &quick_config(), dir.path(), &Scripted::new(vec![])).unwrap_err();
        assert!(matches!(err, IngestError::Config(_)));
        assert!(WitnessQuery::new(bbox(), vec![]).is_err());
    }

    #[test]
    fn config_from_toml() {
        let text = r#"
            endpoint = "http://127.0.0.1:9/api/interpreter"
            retries = 0
            [bbox]
            southwest = [-80.38082496276087, 25.68912671238342]
            northeast = [-80.09556728681095, 25.9273454531309]
            [[group]]
            name = "library"
            selectors = [["amenity=library"]]
        "#;
        let c = FetchConfig::from_toml(text).unwrap();
        assert_eq!(c.retries, 0);
        assert_eq!(c.timeout_secs, 30);
        assert_eq!(c.groups.len(), 1);
        let b = c.bbox.unwrap().to_bbox().unwrap();
        assert_eq!(b.southwest().lon(), -80.38082496276087);
        assert_eq!(b.northeast().lat(), 25.9273454531309);
        assert!(FetchConfig::from_toml("[[group]]\nname = \"x\"\nselectors = [[\"bad\"]]\n").is_err());
        assert!(FetchConfig::from_toml("unknown_key = 1\n").is_err());
    }
}
