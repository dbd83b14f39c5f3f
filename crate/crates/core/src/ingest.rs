//! Parsers for curated street datasets, district polygons and OSM road dumps.
//!
//! # Canonical dataset CSV
//!
//! UTF-8 with a header row containing at least these columns (any order):
//!
//! ```text
//! city,street_name,district,denomination_year,honoree_name,gender,occupation_raw,occupation_group,country,birth_year,death_year
//! ```
//!
//! An empty cell means "absent". Years are signed integers; negative years
//! are BC. `country` may hold an alpha-2 code or a country name that the
//! alias table knows. An optional `geometry` column holds a WKT `POINT` or
//! `LINESTRING` in WGS84 longitude/latitude. Lines starting with `#` are
//! comments; [`write_curated`] quotes any field that starts with `#`.
//!
//! # OSM road dump
//!
//! One road segment per line, tab separated:
//!
//! ```text
//! highway_class<TAB>name<TAB>LINESTRING (lon lat, lon lat, ...)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::country::CountryAliases;
use crate::error::{Error, Result};
use crate::model::{
    CityConfig, District, DistrictId, Gender, Honoree, OccupationGroup, StreetGeometry,
    StreetRecord, PLAUSIBLE_YEARS,
};
use crate::spatial::geometry::{parse_area, Coord};
use crate::text::{has_decimal_digit, search_key};

/// Canonical column order of the dataset CSV.
pub const CURATED_COLUMNS: [&str; 11] = [
    "city",
    "street_name",
    "district",
    "denomination_year",
    "honoree_name",
    "gender",
    "occupation_raw",
    "occupation_group",
    "country",
    "birth_year",
    "death_year",
];

/// Optional WKT geometry column of the dataset CSV.
pub const GEOMETRY_COLUMN: &str = "geometry";

/// Highway classes dropped from OSM extracts by default.
pub const DEFAULT_EXCLUSIONS: [&str; 4] = ["motorway", "trunk", "cycleway", "path"];

/// Values of the OSM `highway` key that describe roads and ways.
pub const KNOWN_HIGHWAY_CLASSES: &[&str] = &[
    "motorway", "trunk", "primary", "secondary", "tertiary", "unclassified", "residential",
    "motorway_link", "trunk_link", "primary_link", "secondary_link", "tertiary_link",
    "living_street", "service", "pedestrian", "track", "bus_guideway", "escape", "raceway", "road",
    "busway", "footway", "bridleway", "steps", "corridor", "path", "cycleway", "construction",
    "proposed", "via_ferrata", "sidewalk", "crossing", "elevator", "platform", "rest_area",
    "services", "emergency_bay",
];

/// Why a row was not kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    MalformedRow,
    OtherCity,
    NoStreetName,
    NoHonoree,
    BadYear,
    BadGender,
    BadOccupationGroup,
    BadLifespan,
    BadGeometry,
    Duplicate,
    ExcludedClass,
    NumberedOrUnnamed,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::MalformedRow => "malformed_row",
            DropReason::OtherCity => "other_city",
            DropReason::NoStreetName => "no_street_name",
            DropReason::NoHonoree => "no_honoree",
            DropReason::BadYear => "bad_year",
            DropReason::BadGender => "bad_gender",
            DropReason::BadOccupationGroup => "bad_occupation_group",
            DropReason::BadLifespan => "bad_lifespan",
            DropReason::BadGeometry => "bad_geometry",
            DropReason::Duplicate => "duplicate",
            DropReason::ExcludedClass => "excluded_class",
            DropReason::NumberedOrUnnamed => "numbered_or_unnamed",
        }
    }
}

/// Row accounting for one parsed file: `rows_read == rows_kept + dropped`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped_by_reason: BTreeMap<String, usize>,
    /// Kept rows with a field that was cleared or flagged.
    pub warnings: BTreeMap<String, usize>,
}

impl IngestReport {
    fn drop_row(&mut self, reason: DropReason) {
        *self.rows_dropped_by_reason.entry(reason.as_str().to_owned()).or_default() += 1;
    }

    fn warn(&mut self, what: &str) {
        *self.warnings.entry(what.to_owned()).or_default() += 1;
    }

    pub fn dropped(&self) -> usize {
        self.rows_dropped_by_reason.values().sum()
    }

    pub fn dropped_for(&self, reason: DropReason) -> usize {
        self.rows_dropped_by_reason.get(reason.as_str()).copied().unwrap_or(0)
    }

    pub fn is_balanced(&self) -> bool {
        self.rows_read == self.rows_kept + self.dropped()
    }
}

/// Renames raw-source headers to canonical column names.
///
/// This is the adapter layer for per-city exports whose headers differ from
/// the canonical schema; unmapped headers are used as they are.
#[derive(Debug, Clone, Default)]
pub struct ColumnMap(pub BTreeMap<String, String>);

impl ColumnMap {
    fn canonical<'a>(&'a self, raw: &'a str) -> &'a str {
        self.0.get(raw).map_or(raw, String::as_str)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Parses a dataset file in the canonical schema.
pub fn parse_curated_dataset(path: &Path, city: &CityConfig) -> Result<(Vec<StreetRecord>, IngestReport)> {
    parse_curated_reader(open(path)?, path, city, &ColumnMap::default())
}

/// Parses dataset CSV from any reader. `source` names the input in errors.
pub fn parse_curated_reader<R: Read>(
    reader: R,
    source: &Path,
    city: &CityConfig,
    columns: &ColumnMap,
) -> Result<(Vec<StreetRecord>, IngestReport)> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: source.to_owned(),
        source: e,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.byte_headers().map_err(csv_err)?.clone();
    let header_names: Vec<String> = headers
        .iter()
        .map(|h| columns.canonical(String::from_utf8_lossy(h).trim()).to_owned())
        .collect();
    let mut index = [0usize; 11];
    for (slot, col) in index.iter_mut().zip(CURATED_COLUMNS) {
        *slot = header_names
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::MissingColumn {
                path: source.to_owned(),
                column: col.to_owned(),
            })?;
    }
    let geometry_index = header_names.iter().position(|h| h == GEOMETRY_COLUMN);

    let aliases = CountryAliases::shipped();
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut row = csv::ByteRecord::new();
    loop {
        match rdr.read_byte_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if e.is_io_error() => return Err(csv_err(e)),
            Err(_) => {
                report.rows_read += 1;
                report.drop_row(DropReason::MalformedRow);
                continue;
            }
        }
        report.rows_read += 1;
        let mut cells: [&str; 11] = [""; 11];
        let mut ok = true;
        for (cell, &i) in cells.iter_mut().zip(&index) {
            match row.get(i).map(std::str::from_utf8) {
                Some(Ok(s)) => *cell = s.trim(),
                _ => ok = false,
            }
        }
        if !ok {
            report.drop_row(DropReason::MalformedRow);
            continue;
        }
        let geometry = match geometry_index.and_then(|i| row.get(i)).map(std::str::from_utf8) {
            None => None,
            Some(Err(_)) => {
                report.drop_row(DropReason::MalformedRow);
                continue;
            }
            Some(Ok(cell)) if cell.trim().is_empty() => None,
            Some(Ok(cell)) => match parse_wkt_geometry(cell) {
                Some(g) => Some(g),
                None => {
                    report.drop_row(DropReason::BadGeometry);
                    continue;
                }
            },
        };
        match curated_row(&cells, city, &aliases) {
            Ok((mut rec, unknown_country)) => {
                rec.geometry = geometry;
                let key = (rec.search_key(), rec.district_id.as_ref().map(|d| search_key(d.as_str())));
                if !seen.insert(key) {
                    report.drop_row(DropReason::Duplicate);
                    continue;
                }
                if unknown_country {
                    report.warn("unknown_country");
                }
                report.rows_kept += 1;
                records.push(rec);
            }
            Err(reason) => report.drop_row(reason),
        }
    }
    Ok((records, report))
}

fn parse_year(cell: &str) -> std::result::Result<Option<i32>, DropReason> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<i32>().map(Some).map_err(|_| DropReason::BadYear)
}

fn opt(cell: &str) -> Option<String> {
    (!cell.is_empty()).then(|| cell.to_owned())
}

fn curated_row(
    cells: &[&str; 11],
    city: &CityConfig,
    aliases: &CountryAliases,
) -> std::result::Result<(StreetRecord, bool), DropReason> {
    let [city_cell, street, district, denom, honoree, gender, occ_raw, occ_group, country, birth, death] = *cells;
    if !city_cell.is_empty() && search_key(city_cell) != search_key(city.city_id.as_str()) {
        return Err(DropReason::OtherCity);
    }
    if street.is_empty() {
        return Err(DropReason::NoStreetName);
    }
    if honoree.is_empty() {
        return Err(DropReason::NoHonoree);
    }
    let denomination_year = parse_year(denom)?;
    if denomination_year.is_some_and(|y| !PLAUSIBLE_YEARS.contains(&y)) {
        return Err(DropReason::BadYear);
    }
    let gender = Gender::parse(gender).map_err(|_| DropReason::BadGender)?;
    let occupation_group = match occ_group {
        "" => None,
        g => Some(g.parse::<OccupationGroup>().map_err(|_| DropReason::BadOccupationGroup)?),
    };
    let country_of_origin = match country {
        "" => None,
        c => aliases.normalize(c),
    };
    let unknown_country = !country.is_empty() && country_of_origin.is_none();
    let h = Honoree {
        full_name: honoree.to_owned(),
        gender,
        occupation_raw: opt(occ_raw),
        occupation_group,
        country_of_origin,
        birth_year: parse_year(birth)?,
        death_year: parse_year(death)?,
    };
    h.validate().map_err(|_| DropReason::BadLifespan)?;
    let mut rec = StreetRecord::new(city.city_id.clone(), street);
    rec.district_id = opt(district).map(DistrictId::new);
    rec.denomination_year = denomination_year;
    rec.honoree = Some(h);
    Ok((rec, unknown_country))
}

fn year_cell(y: Option<i32>) -> String {
    y.map(|y| y.to_string()).unwrap_or_default()
}

/// Writes records in the canonical schema, in the given order.
pub fn write_curated<W: Write>(records: &[StreetRecord], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().comment(Some(b'#')).from_writer(writer);
    let err = |e: csv::Error| Error::Csv {
        path: "<output>".into(),
        source: e,
    };
    w.write_record(CURATED_COLUMNS.iter().chain([&GEOMETRY_COLUMN]))
        .map_err(err)?;
    for r in records {
        let h = r.honoree.as_ref();
        w.write_record([
            r.city_id.as_str().to_owned(),
            r.street_name.clone(),
            r.district_id.as_ref().map(|d| d.0.clone()).unwrap_or_default(),
            year_cell(r.denomination_year),
            h.map(|h| h.full_name.clone()).unwrap_or_default(),
            h.map(|h| match h.gender {
                Gender::Unknown => String::new(),
                g => g.as_str().to_owned(),
            })
            .unwrap_or_default(),
            h.and_then(|h| h.occupation_raw.clone()).unwrap_or_default(),
            h.and_then(|h| h.occupation_group).map(|g| g.id().to_owned()).unwrap_or_default(),
            h.and_then(|h| h.country_of_origin).map(|c| c.to_string()).unwrap_or_default(),
            year_cell(h.and_then(|h| h.birth_year)),
            year_cell(h.and_then(|h| h.death_year)),
            r.geometry.as_ref().map(geometry_wkt).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// Parses a GeoJSON FeatureCollection of district polygons.
///
/// Each feature needs a `name` property; `district_id` (or `id`) is used as
/// the identifier when present, otherwise the name.
pub fn parse_districts(path: &Path) -> Result<Vec<District>> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| Error::io(path, e))?;
    parse_districts_str(&text, &path.display().to_string())
}

pub fn parse_districts_str(text: &str, context: &str) -> Result<Vec<District>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Json {
        context: context.to_owned(),
        source: e,
    })?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::Invalid(format!("{context}: not a GeoJSON FeatureCollection")));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Invalid(format!("{context}: no features array")))?;
    let mut districts = Vec::with_capacity(features.len());
    let mut ids = HashSet::new();
    for (index, f) in features.iter().enumerate() {
        let geom = f.get("geometry").ok_or(Error::Geometry {
            index,
            message: "feature has no geometry".into(),
        })?;
        let polygon = parse_area(geom, index)?;
        let props = f.get("properties");
        let prop = |k: &str| -> Option<String> {
            props.and_then(|p| p.get(k)).and_then(|v| match v {
                Value::String(s) => Some(s.clone()),
                Value::Number(n) => Some(n.to_string()),
                _ => None,
            })
        };
        let name = prop("name").ok_or(Error::Geometry {
            index,
            message: "feature has no `name` property".into(),
        })?;
        let id = prop("district_id").or_else(|| prop("id")).unwrap_or_else(|| name.clone());
        if !ids.insert(id.clone()) {
            return Err(Error::Geometry {
                index,
                message: format!("duplicate district id `{id}`"),
            });
        }
        districts.push(District {
            district_id: DistrictId::new(id),
            name,
            polygon,
        });
    }
    Ok(districts)
}

/// One road segment from an OSM extract.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadSegment {
    pub name: Option<String>,
    pub highway_class: String,
    /// False when the class is not a documented OSM highway value.
    pub known_class: bool,
    pub geometry: Vec<Coord>,
    /// Filled in by district assignment.
    pub district_id: Option<DistrictId>,
}

fn wkt_body<'a>(wkt: &'a str, tag: &str) -> Option<&'a str> {
    let s = wkt.trim();
    if !s.get(..tag.len())?.eq_ignore_ascii_case(tag) {
        return None;
    }
    s[tag.len()..].trim().strip_prefix('(')?.strip_suffix(')')
}

fn wkt_coords(body: &str) -> Option<Vec<Coord>> {
    body
        .split(',')
        .map(|pair| {
            let mut it = pair.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y))) if x.is_finite() && y.is_finite() => Some(Coord::new(x, y)),
                _ => None,
            }
        })
        .collect()
}

/// Parses a `LINESTRING (x y, x y, ...)` WKT string.
pub fn parse_wkt_linestring(wkt: &str) -> Option<Vec<Coord>> {
    let coords = wkt_coords(wkt_body(wkt, "LINESTRING")?)?;
    (coords.len() >= 2).then_some(coords)
}

/// Parses a WKT `POINT` or `LINESTRING`.
pub fn parse_wkt_geometry(wkt: &str) -> Option<StreetGeometry> {
    if let Some(body) = wkt_body(wkt, "POINT") {
        return match wkt_coords(body)?.as_slice() {
            [p] => Some(StreetGeometry::Point(*p)),
            _ => None,
        };
    }
    parse_wkt_linestring(wkt).map(StreetGeometry::LineString)
}

/// WKT text of a geometry, using the shortest round-tripping decimals.
pub fn geometry_wkt(g: &StreetGeometry) -> String {
    match g {
        StreetGeometry::Point(p) => format!("POINT ({} {})", p.x, p.y),
        StreetGeometry::LineString(line) => {
            let pts: Vec<String> = line.iter().map(|p| format!("{} {}", p.x, p.y)).collect();
            format!("LINESTRING ({})", pts.join(", "))
        }
    }
}

/// Parses an OSM road dump, filtering and de-duplicating segments.
pub fn parse_osm_roads(path: &Path, exclusions: &[String]) -> Result<(Vec<RoadSegment>, IngestReport)> {
    parse_osm_roads_reader(BufReader::new(open(path)?), exclusions).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_osm_roads_reader<R: BufRead>(
    reader: R,
    exclusions: &[String],
) -> Result<(Vec<RoadSegment>, IngestReport)> {
    let excluded: HashSet<String> = exclusions.iter().map(|c| c.trim().to_ascii_lowercase()).collect();
    let mut report = IngestReport::default();
    let mut seen = HashSet::new();
    let mut segments = Vec::new();
    for line in reader.split(b'\n') {
        let line = line.map_err(|e| Error::io("<roads>", e))?;
        let line = match String::from_utf8(line) {
            Ok(l) => l,
            Err(_) => {
                report.rows_read += 1;
                report.drop_row(DropReason::MalformedRow);
                continue;
            }
        };
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        report.rows_read += 1;
        let mut fields = line.splitn(3, '\t');
        let (Some(class), Some(name), Some(wkt)) = (fields.next(), fields.next(), fields.next()) else {
            report.drop_row(DropReason::MalformedRow);
            continue;
        };
        let Some(geometry) = parse_wkt_linestring(wkt) else {
            report.drop_row(DropReason::MalformedRow);
            continue;
        };
        let class = class.trim().to_ascii_lowercase();
        if excluded.contains(&class) {
            report.drop_row(DropReason::ExcludedClass);
            continue;
        }
        let name = name.trim();
        if name.is_empty() || has_decimal_digit(name) {
            report.drop_row(DropReason::NumberedOrUnnamed);
            continue;
        }
        if !seen.insert(search_key(name)) {
            report.drop_row(DropReason::Duplicate);
            continue;
        }
        let known_class = KNOWN_HIGHWAY_CLASSES.contains(&class.as_str());
        if !known_class {
            report.warn("unknown_highway_class");
        }
        report.rows_kept += 1;
        segments.push(RoadSegment {
            name: Some(name.to_owned()),
            highway_class: class,
            known_class,
            geometry,
            district_id: None,
        });
    }
    Ok((segments, report))
}
