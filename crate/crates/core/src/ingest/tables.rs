//! CSV inputs: witness locations and tract demographics.

use std::path::Path;

use serde::Deserialize;

use super::geojson::RegionFile;
use super::{read_file, IngestError};
use crate::format::fmt_g17;
use crate::geo::GeoPoint;
use crate::hvi::TractDemographics;
use crate::witness::WitnessSet;

#[derive(Deserialize)]
struct WitnessRow {
    id: String,
    lat: f64,
    lon: f64,
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str], context: &str) -> Result<(), IngestError> {
    let header = reader.headers().map_err(|e| IngestError::parse(context, e))?;
    let got: Vec<&str> = header.iter().map(|h| h.trim_start_matches('\u{feff}')).collect();
    if got != expected {
        return Err(IngestError::parse(
            context,
            format!("expected header {}, found {}", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Witness CSV with header `id,lat,lon`, rows kept in file order.
pub fn parse_witnesses_csv(text: &str, context: &str) -> Result<WitnessSet, IngestError> {
    let mut reader = csv_reader(text);
    check_header(&mut reader, &["id", "lat", "lon"], context)?;
    let mut ids = Vec::new();
    let mut points = Vec::new();
    for (k, row) in reader.deserialize::<WitnessRow>().enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| IngestError::parse(format!("{context} line {line}"), e))?;
        let p = GeoPoint::new(row.lat, row.lon).map_err(|source| IngestError::Coordinate {
            context: format!("{context} line {line} (id {:?})", row.id),
            source,
        })?;
        ids.push(row.id);
        points.push(p);
    }
    Ok(WitnessSet::new(ids, points)?)
}

/// Witnesses from a CSV file, or from a GeoJSON FeatureCollection when the
/// file starts with `{`.
pub fn load_witnesses(path: &Path) -> Result<WitnessSet, IngestError> {
    let text = read_file(path)?;
    let context = path.display().to_string();
    if text.trim_start_matches('\u{feff}').trim_start().starts_with('{') {
        let regions = RegionFile::parse(&text, "id")?;
        let mut ids = Vec::with_capacity(regions.features.len());
        let mut points = Vec::with_capacity(regions.features.len());
        for f in &regions.features {
            points.push(f.representative_point()?);
            ids.push(f.id.clone());
        }
        Ok(WitnessSet::new(ids, points)?)
    } else {
        parse_witnesses_csv(&text, &context)
    }
}

/// `id,lat,lon` CSV, LF line endings, coordinates with 17 significant digits.
pub fn witnesses_to_csv(witnesses: &WitnessSet) -> String {
    let mut out = String::from("id,lat,lon\n");
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for (id, p) in witnesses.iter() {
        writer
            .write_record([id, &fmt_g17(p.lat()), &fmt_g17(p.lon())])
            .expect("writing to memory");
    }
    out.push_str(&String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("UTF-8 input"));
    out
}

#[derive(Deserialize)]
struct DemographicsRow {
    tract_id: String,
    pm_temp_f: Option<f64>,
    canopy_pct: Option<f64>,
    pop_under5: Option<f64>,
    pop_over65: Option<f64>,
}

/// Demographics CSV with header `tract_id,pm_temp_f,canopy_pct,pop_under5,pop_over65`.
/// Empty cells are missing values; canopy cover is converted to the
/// uncovered share `100 - canopy_pct`.
pub fn parse_demographics(text: &str, context: &str) -> Result<Vec<TractDemographics>, IngestError> {
    let mut reader = csv_reader(text);
    check_header(
        &mut reader,
        &["tract_id", "pm_temp_f", "canopy_pct", "pop_under5", "pop_over65"],
        context,
    )?;
    let mut out = Vec::new();
    for (k, row) in reader.deserialize::<DemographicsRow>().enumerate() {
        let row = row.map_err(|e| IngestError::parse(format!("{context} line {}", k + 2), e))?;
        if let Some(c) = row.canopy_pct {
            if !(0.0..=100.0).contains(&c) {
                return Err(IngestError::CanopyOutOfRange {
                    tract: row.tract_id,
                    value: c,
                });
            }
        }
        out.push(TractDemographics::new(
            row.tract_id,
            row.pm_temp_f,
            row.canopy_pct.map(|c| 100.0 - c),
            row.pop_under5,
            row.pop_over65,
        )?);
    }
    Ok(out)
}

pub fn load_demographics(path: &Path) -> Result<Vec<TractDemographics>, IngestError> {
    let text = read_file(path)?;
    parse_demographics(&text, &path.display().to_string())
}
