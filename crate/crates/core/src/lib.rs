//! Coverage gaps in cooling-center networks.
//!
//! Census-tract centroids are landmarks and cooling centers are witnesses of
//! a filtered witness flag complex; the persistence of its 0- and 1-dimensional
//! homology locates poorly served tracts. A heat-vulnerability index built from
//! demographic z-scores gives a second ranking to compare against.

pub mod cli;
pub mod collapse;
pub mod format;
pub mod geo;
pub mod hvi;
pub mod ingest;
pub mod persistence;
pub mod report;
pub mod witness;
