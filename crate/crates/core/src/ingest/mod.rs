//! Loading landmarks, witnesses and demographics from files, and fetching
//! witness candidates from an Overpass (OpenStreetMap) endpoint.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geo::GeoError;
use crate::hvi::HviError;
use crate::witness::WitnessError;

pub(crate) mod geojson;
pub mod overpass;
mod tables;

pub use geojson::{landmarks_to_geojson, load_regions, load_regions_with, save_landmarks, RegionFeature, RegionFile, RegionGeometry};
pub use overpass::{fetch_witnesses, CacheEntry, FetchConfig, FetchOutcome, TagGroup, WitnessQuery};
pub use tables::{load_demographics, load_witnesses, parse_demographics, parse_witnesses_csv, witnesses_to_csv};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
    #[error("feature #{index} has no id")]
    MissingId { index: usize },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("feature {id:?}: {source}")]
    Geometry {
        id: String,
        #[source]
        source: GeoError,
    },
    #[error("{context}: {source}")]
    Coordinate {
        context: String,
        #[source]
        source: GeoError,
    },
    #[error("tract {tract:?}: canopy_pct {value} is outside [0, 100]")]
    CanopyOutOfRange { tract: String, value: f64 },
    #[error(transparent)]
    Demographics(#[from] HviError),
    #[error(transparent)]
    PointSet(WitnessError),
    #[error("invalid fetch configuration: {0}")]
    Config(String),
    #[error("network error contacting {endpoint}: {detail} (no cached response under key {cache_key})")]
    Network {
        endpoint: String,
        detail: String,
        cache_key: String,
    },
    #[error("{endpoint} answered HTTP {status}: {excerpt}")]
    Upstream {
        endpoint: String,
        status: u16,
        excerpt: String,
    },
}

impl IngestError {
    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        IngestError::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    /// True for failures talking to the remote query service.
    pub fn is_upstream(&self) -> bool {
        matches!(self, IngestError::Network { .. } | IngestError::Upstream { .. })
    }
}

impl From<WitnessError> for IngestError {
    fn from(e: WitnessError) -> Self {
        match e {
            WitnessError::DuplicateId(id) => IngestError::DuplicateId(id),
            other => IngestError::PointSet(other),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}
