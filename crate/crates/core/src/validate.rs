//! Validity audit: stratified street sampling, annotation files and coverage estimates.
//!
//! Samples are drawn with ChaCha8 seeded from a 64-bit seed, a Fisher-Yates
//! shuffle per district and rejection-sampled bounded draws. The algorithm
//! identifier [`SAMPLING_ALGORITHM`] is written into every sample so that a
//! sample can be redrawn exactly by any later release that keeps it.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RoadSegment;
use crate::metrics::Ratio;
use crate::model::{CityId, DistrictId, Gender};
use crate::text::search_key;

pub const SAMPLING_ALGORITHM: &str = "chacha8-fisher-yates-v1";
pub const DEFAULT_SAMPLE_SIZE: usize = 200;
/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// How many streets to draw from each district.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub city_id: CityId,
    pub sample_size: usize,
    pub seed: u64,
    pub strata: BTreeMap<DistrictId, usize>,
}

impl SamplePlan {
    /// Splits `sample_size` evenly over `districts`; the remainder goes one
    /// each to the first districts in sorted order.
    pub fn uniform(city_id: CityId, sample_size: usize, seed: u64, districts: &[DistrictId]) -> Self {
        let ids: std::collections::BTreeSet<&DistrictId> = districts.iter().collect();
        let k = ids.len();
        let strata = ids
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                let quota = sample_size / k + usize::from(i < sample_size % k);
                (d.clone(), quota)
            })
            .collect();
        SamplePlan {
            city_id,
            sample_size,
            seed,
            strata,
        }
    }

    /// Uniform plan over the districts present in `roads`.
    pub fn for_roads(city_id: CityId, sample_size: usize, seed: u64, roads: &[RoadSegment]) -> Self {
        let districts: Vec<DistrictId> = roads.iter().filter_map(|r| r.district_id.clone()).collect();
        Self::uniform(city_id, sample_size, seed, &districts)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledStreet {
    pub street_name: String,
    pub district_id: DistrictId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub algorithm: String,
    pub plan: SamplePlan,
    /// Streets actually drawn per district, after redistribution.
    pub drawn: BTreeMap<DistrictId, usize>,
    pub streets: Vec<SampledStreet>,
    pub warnings: Vec<String>,
}

/// Uniform integer in `0..n` without modulo bias.
fn below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    debug_assert!(n > 0);
    // Values at or above 2^64 mod n fall in complete residue classes.
    let reject_below = n.wrapping_neg() % n;
    loop {
        let x = rng.next_u64();
        if x >= reject_below {
            return x % n;
        }
    }
}

fn shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Draws a reproducible stratified sample of distinct street names.
///
/// Roads are grouped by district and sorted before drawing, so the result
/// depends only on the set of roads and the seed. A district with fewer
/// streets than its quota gives all of them, and the shortfall is handed out
/// one street at a time to the other districts in sorted order. Roads outside
/// the plan's districts are ignored.
pub fn draw_sample(roads: &[RoadSegment], plan: &SamplePlan) -> Sample {
    let mut warnings = Vec::new();
    let mut pools: BTreeMap<&DistrictId, Vec<(String, &str)>> = plan.strata.keys().map(|d| (d, Vec::new())).collect();
    let mut outside = 0usize;
    for r in roads {
        let (Some(name), Some(d)) = (r.name.as_deref(), r.district_id.as_ref()) else {
            outside += 1;
            continue;
        };
        match pools.get_mut(d) {
            Some(pool) => pool.push((search_key(name), name)),
            None => outside += 1,
        }
    }
    if outside > 0 {
        warnings.push(format!("{outside} roads are unnamed or outside the planned districts and were not sampled"));
    }
    let mut seen = HashSet::new();
    for pool in pools.values_mut() {
        pool.sort();
    }
    // A name is sampled once, in the first district (sorted order) holding it.
    for pool in pools.values_mut() {
        pool.retain(|(key, _)| seen.insert(key.clone()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    for pool in pools.values_mut() {
        shuffle(&mut rng, pool);
    }

    let mut take: BTreeMap<&DistrictId, usize> = BTreeMap::new();
    let mut shortfall = 0usize;
    for (d, pool) in &pools {
        let quota = plan.strata[*d];
        let n = quota.min(pool.len());
        shortfall += quota - n;
        take.insert(d, n);
    }
    while shortfall > 0 {
        let mut gave = false;
        for (d, pool) in &pools {
            if shortfall == 0 {
                break;
            }
            let t = take.get_mut(d).expect("same keys");
            if *t < pool.len() {
                *t += 1;
                shortfall -= 1;
                gave = true;
            }
        }
        if !gave {
            break;
        }
    }
    let population = seen.len();
    if population < plan.sample_size {
        warnings.push(format!(
            "only {population} distinct streets are available for a sample of {}; returning all of them",
            plan.sample_size
        ));
    }

    let mut streets = Vec::new();
    let mut drawn = BTreeMap::new();
    for (d, pool) in &pools {
        let n = take[d];
        drawn.insert((*d).clone(), n);
        streets.extend(pool[..n].iter().map(|(_, name)| SampledStreet {
            street_name: (*name).to_owned(),
            district_id: (*d).clone(),
        }));
    }
    Sample {
        algorithm: SAMPLING_ALGORITHM.into(),
        plan: plan.clone(),
        drawn,
        streets,
        warnings,
    }
}

/// One annotated (or still blank) sampled street.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub street_name: String,
    pub district: String,
    pub is_honorific: Option<bool>,
    pub honoree_gender: Option<Gender>,
}

/// CSV with header `street_name,district,is_honorific,honoree_gender`.
///
/// `is_honorific` takes `true`/`false` (also `yes`/`no`, `1`/`0`); blank
/// means not yet annotated. `honoree_gender` takes `female`, `male`,
/// `unknown` or blank. A gender implies the street is honorific, so a row
/// with a gender and `is_honorific = false` is rejected, and a gender with a
/// blank `is_honorific` marks the row honorific.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub rows: Vec<Annotation>,
}

pub const ANNOTATION_COLUMNS: [&str; 4] = ["street_name", "district", "is_honorific", "honoree_gender"];

fn parse_bool(s: &str) -> Option<Option<bool>> {
    match s.trim().to_ascii_lowercase().as_str() {
        "" => Some(None),
        "true" | "yes" | "y" | "1" => Some(Some(true)),
        "false" | "no" | "n" | "0" => Some(Some(false)),
        _ => None,
    }
}

impl AnnotationFile {
    /// Blank annotation rows for a drawn sample.
    pub fn template(sample: &Sample) -> Self {
        AnnotationFile {
            rows: sample
                .streets
                .iter()
                .map(|s| Annotation {
                    street_name: s.street_name.clone(),
                    district: s.district_id.to_string(),
                    is_honorific: None,
                    honoree_gender: None,
                })
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, &path.display().to_string())
    }

    pub fn from_reader<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let csv_err = |e| Error::Csv {
            path: source.into(),
            source: e,
        };
        let headers = rdr.headers().map_err(csv_err)?.clone();
        let mut idx = [0usize; 4];
        for (slot, col) in idx.iter_mut().zip(ANNOTATION_COLUMNS) {
            *slot = headers.iter().position(|h| h == col).ok_or_else(|| Error::MissingColumn {
                path: source.into(),
                column: col.into(),
            })?;
        }
        let mut rows = Vec::new();
        for (n, row) in rdr.records().enumerate() {
            let row = row.map_err(csv_err)?;
            let field = |i: usize| row.get(idx[i]).unwrap_or("");
            let line = n + 2;
            let is_honorific = parse_bool(field(2)).ok_or_else(|| {
                Error::Invalid(format!("{source} line {line}: is_honorific `{}` is not a boolean", field(2)))
            })?;
            let gender = match field(3) {
                "" => None,
                g => Some(Gender::parse(g).map_err(|e| Error::Invalid(format!("{source} line {line}: {e}")))?),
            };
            let is_honorific = match (is_honorific, gender) {
                (Some(false), Some(_)) => {
                    return Err(Error::Invalid(format!(
                        "{source} line {line}: a honoree gender is given for a non-honorific street"
                    )))
                }
                (None, Some(_)) => Some(true),
                (h, _) => h,
            };
            rows.push(Annotation {
                street_name: field(0).to_owned(),
                district: field(1).to_owned(),
                is_honorific,
                honoree_gender: gender,
            });
        }
        Ok(AnnotationFile { rows })
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let wrap = |e| Error::Csv {
            path: "<annotations>".into(),
            source: e,
        };
        w.write_record(ANNOTATION_COLUMNS).map_err(wrap)?;
        for r in &self.rows {
            let h = r.is_honorific.map_or("", |b| if b { "true" } else { "false" });
            let g = r.honoree_gender.map_or("", Gender::as_str);
            w.write_record([r.street_name.as_str(), r.district.as_str(), h, g])
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("<annotations>", e))
    }
}

/// Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

/// Wilson score interval for `k` successes in `n` trials at quantile `z`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> Option<Interval> {
    if n == 0 || k > n {
        return None;
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Some(Interval {
        low: (center - half).max(0.0),
        high: (center + half).min(1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub ratio: Ratio,
    /// Percentage, `None` when the denominator is zero.
    pub percent: Option<f64>,
    /// Wilson 95% score interval, in percent.
    pub wilson_95: Option<Interval>,
}

impl Estimate {
    fn new(ratio: Ratio) -> Self {
        Estimate {
            ratio,
            percent: ratio.value().map(|v| 100.0 * v),
            wilson_95: wilson_interval(ratio.numerator, ratio.denominator, Z_95).map(|i| Interval {
                low: 100.0 * i.low,
                high: 100.0 * i.high,
            }),
        }
    }
}

/// Sample-based coverage estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub sampled: usize,
    /// Honorific streets over sampled streets.
    pub honorific: Estimate,
    /// Streets honoring women over honorific streets.
    pub female_among_honorific: Estimate,
}

/// Computes coverage from a fully annotated file.
pub fn estimate_coverage(annotations: &AnnotationFile) -> Result<CoverageReport> {
    let missing: Vec<String> = annotations
        .rows
        .iter()
        .filter(|r| r.is_honorific.is_none())
        .map(|r| r.street_name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Unannotated(missing));
    }
    let n = annotations.rows.len() as u64;
    let honorific = annotations.rows.iter().filter(|r| r.is_honorific == Some(true)).count() as u64;
    let female = annotations
        .rows
        .iter()
        .filter(|r| r.is_honorific == Some(true) && r.honoree_gender == Some(Gender::Female))
        .count() as u64;
    Ok(CoverageReport {
        sampled: annotations.rows.len(),
        honorific: Estimate::new(Ratio::new(honorific, n)),
        female_among_honorific: Estimate::new(Ratio::new(female, honorific)),
    })
}

/// Shares from the curated dataset placed next to the sample estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CuratedShares {
    /// Curated honorific streets over all named streets in the OSM extract.
    pub people: Ratio,
    /// Curated streets honoring women over curated honorific streets.
    pub women: Ratio,
}

impl CuratedShares {
    pub fn new(curated_streets: u64, curated_female: u64, osm_streets: u64) -> Self {
        CuratedShares {
            people: Ratio::new(curated_streets, osm_streets),
            women: Ratio::new(curated_female, curated_streets),
        }
    }
}

fn pct(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.1}"))
}

fn ci(i: Option<Interval>) -> String {
    i.map_or_else(|| "n/a".to_owned(), |i| format!("[{:.1}, {:.1}]", i.low, i.high))
}

impl CoverageReport {
    /// Plain-text table of the estimates, with curated shares when given.
    pub fn to_table(&self, curated: Option<&CuratedShares>) -> String {
        let mut out = String::new();
        out.push_str(&format!("sampled streets: {}\n", self.sampled));
        out.push_str("measure                 sample %  (k/n)        Wilson 95% CI     curated %\n");
        let rows = [
            ("people (honorific)", &self.honorific, curated.map(|c| c.people)),
            ("women among people", &self.female_among_honorific, curated.map(|c| c.women)),
        ];
        for (label, e, c) in rows {
            let frac = format!("({}/{})", e.ratio.numerator, e.ratio.denominator);
            let cur = c.map_or_else(|| "-".to_owned(), |r| pct(r.value().map(|v| 100.0 * v)));
            out.push_str(&format!(
                "{label:<23} {:>8}  {frac:<12} {:<17} {cur:>9}\n",
                pct(e.percent),
                ci(e.wilson_95)
            ));
        }
        if curated.is_some() {
            out.push_str("curated people % = curated honorific streets / named streets in the OSM extract\n");
        }
        out
    }
}
