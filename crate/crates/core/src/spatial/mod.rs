//! District assignment and choropleth output.

pub mod geometry;

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::metrics::DistrictMetric;
use crate::ingest::RoadSegment;
use crate::model::{District, DistrictId, StreetGeometry, StreetRecord};
use crate::text::search_key;
use geometry::{BBox, Coord, Location};

/// Outcome of placing a street in a district.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assignment {
    District(DistrictId),
    Unassigned,
}

/// Read-only lookup structure over a city's districts, in config order.
#[derive(Debug, Clone)]
pub struct DistrictIndex<'a> {
    districts: &'a [District],
    bboxes: Vec<BBox>,
    keys: Vec<(String, String)>,
}

impl<'a> DistrictIndex<'a> {
    pub fn new(districts: &'a [District]) -> Self {
        DistrictIndex {
            districts,
            bboxes: districts.iter().map(|d| d.polygon.bbox()).collect(),
            keys: districts
                .iter()
                .map(|d| (search_key(d.district_id.as_str()), search_key(&d.name)))
                .collect(),
        }
    }

    pub fn by_name(&self, name: &str) -> Option<&'a District> {
        let key = search_key(name);
        self.keys
            .iter()
            .position(|(id, n)| *id == key || *n == key)
            .map(|i| &self.districts[i])
    }

    /// First district in config order that contains `p` or has it on its boundary.
    pub fn locate_point(&self, p: Coord) -> Option<&'a District> {
        self.districts
            .iter()
            .zip(&self.bboxes)
            .find(|(d, bb)| bb.contains(p) && d.polygon.locate(p) != Location::Outside)
            .map(|(d, _)| d)
    }

    /// District of a linestring; see [`assign_district`].
    pub fn locate_line(&self, line: &[Coord]) -> Option<&'a District> {
        let overlaps: Vec<(usize, f64)> = self
            .districts
            .iter()
            .zip(&self.bboxes)
            .enumerate()
            .filter(|(_, (_, bb))| bb.intersects_line(line))
            .map(|(i, (d, _))| (i, d.polygon.linestring_overlap(line)))
            .filter(|(_, len)| *len > 0.0)
            .collect();
        if overlaps.len() > 1 {
            // Max by length; earlier config order wins on exact ties.
            let mut best = overlaps[0];
            for &(i, len) in &overlaps[1..] {
                if len > best.1 {
                    best = (i, len);
                }
            }
            return Some(&self.districts[best.0]);
        }
        self.locate_point(representative_point(line)?)
    }
}

/// Midpoint of the middle segment of a linestring.
pub fn representative_point(line: &[Coord]) -> Option<Coord> {
    match line {
        [] => None,
        [p] => Some(*p),
        _ => {
            let seg = (line.len() - 2) / 2;
            let (a, b) = (line[seg], line[seg + 1]);
            Some(Coord::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0))
        }
    }
}

/// Places a street in a district.
///
/// A district name on the record wins. Otherwise points go to the first
/// district containing them; linestrings touching several districts go to
/// the one holding the longest stretch of the street, and to the district
/// of their representative point otherwise.
pub fn assign_district(record: &StreetRecord, index: &DistrictIndex<'_>) -> Assignment {
    if let Some(name) = &record.district_id {
        if let Some(d) = index.by_name(name.as_str()) {
            return Assignment::District(d.district_id.clone());
        }
    }
    let found = match &record.geometry {
        Some(StreetGeometry::Point(p)) => index.locate_point(*p),
        Some(StreetGeometry::LineString(line)) => index.locate_line(line),
        None => None,
    };
    found.map_or(Assignment::Unassigned, |d| {
        Assignment::District(d.district_id.clone())
    })
}

/// Result of assigning many records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssignmentReport {
    pub assigned: usize,
    pub unassigned: Vec<String>,
}

/// Rewrites each record's district to the canonical district id.
/// Unassigned records get `district_id = None`.
pub fn assign_all(records: &mut [StreetRecord], districts: &[District]) -> AssignmentReport {
    let index = DistrictIndex::new(districts);
    let mut report = AssignmentReport::default();
    for rec in records.iter_mut() {
        match assign_district(rec, &index) {
            Assignment::District(id) => {
                rec.district_id = Some(id);
                report.assigned += 1;
            }
            Assignment::Unassigned => {
                rec.district_id = None;
                report.unassigned.push(rec.street_name.clone());
            }
        }
    }
    report
}

/// Sets each road's district from its geometry. Returns the number left unassigned.
pub fn assign_roads(roads: &mut [RoadSegment], districts: &[District]) -> usize {
    let index = DistrictIndex::new(districts);
    let mut unassigned = 0;
    for road in roads.iter_mut() {
        road.district_id = index.locate_line(&road.geometry).map(|d| d.district_id.clone());
        unassigned += usize::from(road.district_id.is_none());
    }
    unassigned
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoroplethFeature {
    pub district_id: DistrictId,
    pub name: String,
    pub value: f64,
    pub bin: usize,
}

/// District polygons annotated with a metric value and an equal-interval bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Choropleth {
    pub metric_id: String,
    pub bin_count: usize,
    /// Upper edge of each bin; bin 0 is `[0, edge0]`, bin i is `(edge_{i-1}, edge_i]`.
    pub bin_edges: Vec<f64>,
    pub features: Vec<ChoroplethFeature>,
    pub warnings: Vec<String>,
}

/// Bins district values into `bins` equal intervals over `[0, max]`.
pub fn emit_choropleth(metric: &DistrictMetric, districts: &[District], bins: usize) -> Result<Choropleth> {
    if bins < 2 {
        return Err(Error::Invalid(format!("choropleth needs at least 2 bins, got {bins}")));
    }
    let mut warnings = Vec::new();
    let values: Vec<f64> = districts
        .iter()
        .map(|d| metric.value(&d.district_id).unwrap_or(0.0))
        .collect();
    for id in metric.values.keys() {
        if !districts.iter().any(|d| &d.district_id == id) {
            warnings.push(format!("metric has a value for unknown district `{id}`"));
        }
    }
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    let (bin_count, bin_edges) = if max > 0.0 {
        let edges = (1..=bins).map(|i| max * i as f64 / bins as f64).collect();
        (bins, edges)
    } else {
        warnings.push(format!("metric `{}` is zero in every district; using a single bin", metric.metric_id));
        (1, vec![0.0])
    };
    let features = districts
        .iter()
        .zip(values)
        .map(|(d, value)| {
            let bin = bin_edges
                .iter()
                .position(|edge| value <= *edge)
                .unwrap_or(bin_count - 1);
            ChoroplethFeature {
                district_id: d.district_id.clone(),
                name: d.name.clone(),
                value,
                bin,
            }
        })
        .collect();
    Ok(Choropleth {
        metric_id: metric.metric_id.clone(),
        bin_count,
        bin_edges,
        features,
        warnings,
    })
}

impl Choropleth {
    /// GeoJSON FeatureCollection. Each feature carries `district_id`, `name`,
    /// `metric_id`, `value` (decimal string) and `bin`.
    pub fn to_geojson(&self, districts: &[District]) -> Value {
        let geometry: BTreeMap<&DistrictId, &District> =
            districts.iter().map(|d| (&d.district_id, d)).collect();
        let features: Vec<Value> = self
            .features
            .iter()
            .map(|f| {
                json!({
                    "type": "Feature",
                    "properties": {
                        "district_id": f.district_id.as_str(),
                        "name": f.name,
                        "metric_id": self.metric_id,
                        "value": f.value.to_string(),
                        "bin": f.bin,
                    },
                    "geometry": geometry
                        .get(&f.district_id)
                        .map_or(Value::Null, |d| geometry::area_to_json(&d.polygon)),
                })
            })
            .collect();
        json!({
            "type": "FeatureCollection",
            "bins": { "count": self.bin_count, "upper_edges": self.bin_edges.iter().map(|e| e.to_string()).collect::<Vec<_>>() },
            "features": features,
        })
    }

    /// Recovers `(district_id, value, bin)` triples from emitted GeoJSON.
    pub fn read_values(geojson: &Value) -> Result<Vec<(DistrictId, f64, usize)>> {
        let bad = |m: &str| Error::Invalid(format!("choropleth GeoJSON: {m}"));
        geojson
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("no features array"))?
            .iter()
            .map(|f| {
                let p = f.get("properties").ok_or_else(|| bad("feature without properties"))?;
                let id = p.get("district_id").and_then(Value::as_str).ok_or_else(|| bad("missing district_id"))?;
                let value = p
                    .get("value")
                    .and_then(Value::as_str)
                    .ok_or_else(|| bad("missing value"))?
                    .parse::<f64>()
                    .map_err(|_| bad("value is not a decimal"))?;
                let bin = p.get("bin").and_then(Value::as_u64).ok_or_else(|| bad("missing bin"))?;
                Ok((DistrictId::new(id), value, bin as usize))
            })
            .collect()
    }
}
