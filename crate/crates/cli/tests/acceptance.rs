//! Acceptance checks. Prints one PASS/FAIL/UNAVAILABLE line per criterion.
//!
//! Criteria 1 to 4 need the published curated datasets: point
//! `STREETONOMICS_PUBLISHED_DATA` at a directory holding `paris.csv`,
//! `vienna.csv`, `london.csv` and `new_york.csv` in the canonical schema,
//! or place them under `data/published/` at the workspace root. Without
//! them those criteria are reported as UNAVAILABLE and do not fail the run.
//!
//! Runs without the libtest harness so the report is always printed.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use serde_json::Value;
use streetonomics::ingest::RoadSegment;
use streetonomics::metrics::{f_prop_by_district, fhd, for_prop_by_district, kendall_tau, pooled_f_prop, pooled_for_prop};
use streetonomics::model::{CityId, CountryCode, DistrictId, Gender, Honoree, StreetRecord};
use streetonomics::spatial::geometry::{Coord, Location, MultiPolygon, Polygon, Ring};
use streetonomics::validate::{draw_sample, estimate_coverage, AnnotationFile, SamplePlan};

use common::{cli, fixture_copy, read_json};

const TABLE1_MAX_RUNTIME: Duration = Duration::from_secs(10);
const ORACLE_MAX_RUNTIME: Duration = Duration::from_secs(30);
const FHD_CASES: u32 = 1_000;
const TAU_CASES: u32 = 500;
const TAU_MAX_LEN: usize = 8;
const TAU_TOLERANCE: f64 = 1e-12;
const PIP_POLYGONS: u32 = 100;
const PIP_POINTS_PER_POLYGON: usize = 100;
/// Points closer than this to an edge are not compared against the oracle.
const PIP_BOUNDARY_BAND: f64 = 1e-7;
const SAMPLE_SEEDS: u32 = 100;
const FOR_PROP_TOLERANCE_PP: f64 = 0.5;
const PEAK_F_PROP_TOLERANCE_PP: f64 = 1.0;
const FHD_MASS_TOLERANCE_PP: f64 = 5.0;
const RANK_TOLERANCE: usize = 1;
const VALIDATION_EXPECTED_PERCENT: f64 = 46.0;

const TABLE1: [(&str, usize, i32, i32); 4] = [
    ("paris", 1428, 1202, 2011),
    ("vienna", 1662, 1778, 2018),
    ("london", 770, 1030, 2013),
    ("new_york", 1072, 1998, 2013),
];
const POOLED_FOR_PROP: [(&str, f64); 4] = [("vienna", 44.6), ("london", 14.6), ("paris", 10.9), ("new_york", 3.2)];
const PEAK_F_PROP: [(&str, f64); 4] = [("vienna", 54.0), ("london", 40.0), ("paris", 32.0), ("new_york", 26.0)];

enum Status {
    Pass,
    Fail,
    Unavailable,
}

struct Outcome {
    id: u8,
    name: &'static str,
    status: Status,
    detail: String,
}

impl Outcome {
    fn of(id: u8, name: &'static str, result: Result<String, String>) -> Self {
        let (status, detail) = match result {
            Ok(d) => (Status::Pass, d),
            Err(d) => (Status::Fail, d),
        };
        Outcome { id, name, status, detail }
    }

    fn unavailable(id: u8, name: &'static str, detail: impl Into<String>) -> Self {
        Outcome {
            id,
            name,
            status: Status::Unavailable,
            detail: detail.into(),
        }
    }

    fn line(&self) -> String {
        let s = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Unavailable => "UNAVAILABLE",
        };
        format!("criterion {} [{}]: {s}: {}", self.id, self.name, self.detail)
    }
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

// ---- published data ---------------------------------------------------------

fn published_dir() -> Option<PathBuf> {
    let dir = std::env::var_os("STREETONOMICS_PUBLISHED_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/published"));
    TABLE1
        .iter()
        .all(|(city, ..)| dir.join(format!("{city}.csv")).is_file())
        .then_some(dir)
}

struct Published {
    out: PathBuf,
    runtime: Duration,
    exit: i32,
    _tmp: tempfile::TempDir,
}

impl Published {
    fn run(dir: &Path) -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let mut toml = String::from("output_dir = \"out\"\n\n[enrichment]\nenabled = false\n");
        for (city, ..) in TABLE1 {
            let path = dir.join(format!("{city}.csv")).canonicalize().unwrap();
            toml.push_str(&format!("\n[[city]]\nid = \"{city}\"\ndataset = {:?}\n", path.display().to_string()));
        }
        let config = tmp.path().join("streetonomics.toml");
        std::fs::write(&config, toml).unwrap();
        let start = Instant::now();
        let exit = cli(&config, &["--offline", "--no-prompt", "reproduce"]);
        Published {
            out: tmp.path().join("out"),
            runtime: start.elapsed(),
            exit,
            _tmp: tmp,
        }
    }

    fn summary(&self, city: &str) -> Result<Value, String> {
        read_json(&self.out.join(format!("metrics/{city}/summary.json")))
    }
}

fn criterion_1(p: &Published) -> Result<String, String> {
    check(p.exit == 0, || format!("reproduce exited with {}", p.exit))?;
    let table = read_json(&p.out.join("reproduce/table1.json"))?;
    let rows: BTreeMap<&str, &Value> = table["rows"]
        .as_array()
        .ok_or("table1.json has no rows")?
        .iter()
        .map(|r| (r["city"].as_str().unwrap_or(""), r))
        .collect();
    let mut errors = Vec::new();
    for (city, count, min, max) in TABLE1 {
        let Some(r) = rows.get(city) else {
            errors.push(format!("{city}: missing"));
            continue;
        };
        let got = (r["honorific_streets"].as_u64(), r["min_year"].as_i64(), r["max_year"].as_i64());
        if got != (Some(count as u64), Some(min as i64), Some(max as i64)) {
            errors.push(format!("{city}: got {got:?}, expected ({count}, {min}, {max})"));
        }
    }
    check(p.runtime < TABLE1_MAX_RUNTIME, || format!("runtime {:?}", p.runtime))?;
    check(errors.is_empty(), || errors.join("; "))?;
    Ok(format!("four cities match; offline runtime {:.2?}", p.runtime))
}

fn criterion_2(p: &Published) -> Result<String, String> {
    let mut errors = Vec::new();
    let mut seen = Vec::new();
    for (city, expected) in POOLED_FOR_PROP {
        let s = p.summary(city)?;
        let got = s["pooled_for_prop"]["percent"].as_f64().unwrap_or(f64::NAN);
        seen.push(format!("{city} for_prop {got:.1}%"));
        if !((got - expected).abs() <= FOR_PROP_TOLERANCE_PP) {
            errors.push(format!("{city} pooled for_prop {got:.2}% vs {expected}%"));
        }
    }
    for (city, expected) in PEAK_F_PROP {
        let s = p.summary(city)?;
        let got = 100.0 * s["peak_f_prop"]["value"].as_f64().unwrap_or(f64::NAN);
        seen.push(format!("{city} peak f_prop {got:.1}%"));
        if !((got - expected).abs() <= PEAK_F_PROP_TOLERANCE_PP) {
            errors.push(format!("{city} peak f_prop {got:.2}% vs {expected}%"));
        }
    }
    check(errors.is_empty(), || errors.join("; "))?;
    Ok(seen.join(", "))
}

fn criterion_3(p: &Published) -> Result<String, String> {
    let paris = p.summary("paris")?;
    let peak = paris["fhd_peak_decade"].as_i64();
    let ny = p.summary("new_york")?;
    let mass = 100.0 * ny["fhd_mass_from_1950"].as_f64().unwrap_or(f64::NAN);
    check(peak == Some(1860), || format!("Paris FHD peaks in {peak:?}, expected 1860"))?;
    check(mass >= 50.0 - FHD_MASS_TOLERANCE_PP, || {
        format!("New York FHD mass from 1950 is {mass:.1}%")
    })?;
    Ok(format!("Paris FHD peak 1860s; New York mass from 1950 {mass:.1}%"))
}

fn criterion_4(p: &Published) -> Result<String, String> {
    let paris = p.summary("paris")?;
    let ranks = paris["armed_forces_officers_rank"]
        .as_object()
        .ok_or("Paris summary has no armed_forces_officers_rank")?;
    let in_1940s = ranks.get("1940").and_then(Value::as_u64);
    let (last_decade, last_rank) = ranks
        .iter()
        .max_by_key(|(d, _)| d.parse::<i32>().unwrap_or(i32::MIN))
        .map(|(d, r)| (d.clone(), r.as_u64().unwrap_or(0) as usize))
        .ok_or("no ranks")?;
    let london = p.summary("london")?;
    let least = london["least_stable_half_century"]["half_century"].as_i64();
    check(in_1940s == Some(1), || format!("armed forces officers rank {in_1940s:?} in the 1940s"))?;
    check((5 - RANK_TOLERANCE..=5 + RANK_TOLERANCE).contains(&last_rank), || {
        format!("armed forces officers rank {last_rank} in the {last_decade}s")
    })?;
    check(least == Some(1900), || format!("London least stable half-century starts {least:?}"))?;
    Ok(format!(
        "armed forces officers rank 1 in the 1940s, {last_rank} in the {last_decade}s; London least stable 1900-1950"
    ))
}

// ---- oracles ----------------------------------------------------------------

fn record(i: usize, honoree: Honoree, district: Option<&str>) -> StreetRecord {
    let mut r = StreetRecord::new(CityId::new("oracle"), format!("Street {i}"));
    r.district_id = district.map(DistrictId::new);
    r.honoree = Some(honoree);
    r
}

fn fhd_oracle(spans: &[(Option<i32>, Option<i32>)]) -> BTreeMap<i32, f64> {
    let mut counts: BTreeMap<i32, u64> = BTreeMap::new();
    for &(b, d) in spans {
        let (Some(b), Some(d)) = (b, d) else { continue };
        let mut touched = BTreeSet::new();
        for year in b..=d {
            touched.insert(year.div_euclid(10) * 10);
        }
        for decade in touched {
            *counts.entry(decade).or_default() += 1;
        }
    }
    let (Some(&lo), Some(&hi)) = (counts.keys().next(), counts.keys().last()) else {
        return BTreeMap::new();
    };
    (lo..=hi)
        .step_by(10)
        .map(|d| (d, counts.get(&d).copied().unwrap_or(0) as f64))
        .collect()
}

fn oracle_fhd() -> Result<String, String> {
    let year = prop_oneof![Just(None), (-200i32..2100).prop_map(Some)];
    let strategy = proptest::collection::vec((year.clone(), year), 0..40);
    runner(FHD_CASES)
        .run(&strategy, |spans| {
            let records: Vec<StreetRecord> = spans
                .iter()
                .enumerate()
                .map(|(i, &(b, d))| {
                    let mut h = Honoree::named(format!("P{i}"));
                    h.birth_year = b;
                    h.death_year = d;
                    record(i, h, None)
                })
                .collect();
            let got: BTreeMap<i32, f64> = fhd(&CityId::new("oracle"), &records)
                .series
                .values
                .iter()
                .map(|(d, v)| (d.start_year(), *v))
                .collect();
            let valid: Vec<_> = spans
                .iter()
                .copied()
                .filter(|(b, d)| matches!((b, d), (Some(b), Some(d)) if b <= d))
                .collect();
            prop_assert_eq!(got, fhd_oracle(&valid));
            Ok(())
        })
        .map_err(|e| format!("fhd: {e}"))?;
    Ok(format!("fhd = year iteration on {FHD_CASES} instances"))
}

fn tau_oracle(a: &[u8], b: &[u8]) -> Option<f64> {
    let n = a.len();
    let (mut con, mut dis, mut tie_a, mut tie_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let da = (a[i] as i64 - a[j] as i64).signum();
            let db = (b[i] as i64 - b[j] as i64).signum();
            if da == 0 {
                tie_a += 1;
            }
            if db == 0 {
                tie_b += 1;
            }
            match da * db {
                1 => con += 1,
                -1 => dis += 1,
                _ => {}
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = ((n0 - tie_a) as f64 * (n0 - tie_b) as f64).sqrt();
    (n >= 2 && denom > 0.0).then(|| (con - dis) as f64 / denom)
}

fn oracle_tau() -> Result<String, String> {
    let tie_free = (2..=TAU_MAX_LEN).prop_flat_map(|n| {
        let perm = Just((0..n as u8).collect::<Vec<_>>()).prop_shuffle();
        (perm.clone(), perm)
    });
    let tied = (2..=TAU_MAX_LEN).prop_flat_map(|n| {
        (
            proptest::collection::vec(0u8..4, n),
            proptest::collection::vec(0u8..4, n),
        )
    });
    let strategy = prop_oneof![tie_free, tied];
    runner(TAU_CASES)
        .run(&strategy, |(a, b)| {
            let expected = tau_oracle(&a, &b);
            match (kendall_tau(&a, &b), expected) {
                (Ok(got), Some(want)) => prop_assert!((got - want).abs() < TAU_TOLERANCE, "{got} vs {want}"),
                (Err(_), None) => {}
                (got, want) => prop_assert!(false, "got {got:?}, oracle {want:?}"),
            }
            Ok(())
        })
        .map_err(|e| format!("kendall tau: {e}"))?;
    Ok(format!("tau-b = pairwise on {TAU_CASES} rankings (|d| < {TAU_TOLERANCE:e})"))
}

fn oracle_district_sum() -> Result<String, String> {
    let row = (0u8..3, proptest::option::of(0u8..3), 0usize..5);
    let strategy = proptest::collection::vec(row, 0..60);
    let home = CountryCode::new("FR").unwrap();
    let countries = ["FR", "FR", "DE"].map(|c| CountryCode::new(c).unwrap());
    let districts = ["d0", "d1", "d2", "d3", "d4"];
    runner(FHD_CASES)
        .run(&strategy, |rows| {
            let records: Vec<StreetRecord> = rows
                .iter()
                .enumerate()
                .map(|(i, &(g, c, d))| {
                    let mut h = Honoree::named(format!("P{i}"));
                    h.gender = [Gender::Female, Gender::Male, Gender::Unknown][g as usize];
                    h.country_of_origin = c.map(|c| countries[c as usize]);
                    record(i, h, Some(districts[d]))
                })
                .collect();
            let pooled_f = pooled_f_prop(&records);
            let pooled_for = pooled_for_prop(&records, home);
            let (mut f_num, mut for_num) = (0, 0);
            for d in districts.map(DistrictId::new) {
                let f = f_prop_by_district(&records, &d);
                let fo = for_prop_by_district(&records, home, &d);
                prop_assert_eq!(f.denominator, pooled_f.denominator);
                prop_assert_eq!(fo.denominator, pooled_for.denominator);
                f_num += f.numerator;
                for_num += fo.numerator;
            }
            prop_assert_eq!(f_num, pooled_f.numerator);
            prop_assert_eq!(for_num, pooled_for.numerator);
            Ok(())
        })
        .map_err(|e| format!("district sum: {e}"))?;
    Ok("district shares sum to the city share exactly (rational)".into())
}

fn star(center: (f64, f64), radii: &[f64]) -> Vec<Coord> {
    let n = radii.len();
    let mut pts: Vec<Coord> = radii
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            Coord::new(center.0 + r * a.cos(), center.1 + r * a.sin())
        })
        .collect();
    pts.push(pts[0]);
    pts
}

fn ray_cast(rings: &[Vec<Coord>], p: Coord) -> bool {
    let mut inside = false;
    for ring in rings {
        for w in ring.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

fn near_edge(rings: &[Vec<Coord>], p: Coord) -> bool {
    rings.iter().flat_map(|r| r.windows(2)).any(|w| {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        let (cx, cy) = (a.x + t * dx, a.y + t * dy);
        ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt() < PIP_BOUNDARY_BAND
    })
}

fn oracle_point_in_polygon() -> Result<String, String> {
    let shape = (
        proptest::collection::vec(0.5f64..1.0, 3..12),
        proptest::option::of(proptest::collection::vec(0.1f64..0.4, 3..8)),
        proptest::collection::vec((-1.2f64..1.2, -1.2f64..1.2), PIP_POINTS_PER_POLYGON),
    );
    let compared = std::cell::Cell::new(0usize);
    runner(PIP_POLYGONS)
        .run(&shape, |(outer, hole, points)| {
            let mut rings = vec![star((0.0, 0.0), &outer)];
            if let Some(h) = &hole {
                rings.push(star((0.0, 0.0), h));
            }
            let polygon = MultiPolygon(vec![Polygon {
                exterior: Ring::new(rings[0].clone()).unwrap(),
                holes: rings[1..].iter().map(|r| Ring::new(r.clone()).unwrap()).collect(),
            }]);
            for v in rings.iter().flatten() {
                prop_assert_eq!(polygon.locate(*v), Location::Boundary, "vertex {:?}", v);
            }
            for p in points.iter().map(|&(x, y)| Coord::new(x, y)) {
                let got = polygon.locate(p);
                let near = near_edge(&rings, p);
                if got == Location::Boundary {
                    prop_assert!(near, "{:?} reported on the boundary", p);
                }
                if near {
                    continue;
                }
                compared.set(compared.get() + 1);
                let want = if ray_cast(&rings, p) { Location::Inside } else { Location::Outside };
                prop_assert_eq!(got, want, "point {:?}", p);
            }
            Ok(())
        })
        .map_err(|e| format!("point in polygon: {e}"))?;
    let total = PIP_POLYGONS as usize * PIP_POINTS_PER_POLYGON;
    Ok(format!(
        "point-in-polygon = ray casting on {total} random points ({} compared off the boundary band)",
        compared.get()
    ))
}

fn oracle_sampling() -> Result<String, String> {
    let road = (
        proptest::option::of(0usize..80),
        proptest::option::of(0usize..5),
    );
    let strategy = (proptest::collection::vec(road, 0..150), any::<u64>(), 1usize..60).prop_flat_map(
        |(roads, seed, n)| (Just(roads.clone()).prop_shuffle(), Just(roads), Just(seed), Just(n)),
    );
    runner(SAMPLE_SEEDS)
        .run(&strategy, |(shuffled, roads, seed, n)| {
            let build = |rows: &[(Option<usize>, Option<usize>)]| -> Vec<RoadSegment> {
                rows.iter()
                    .map(|&(name, d)| RoadSegment {
                        name: name.map(|i| format!("Rue {}", i % 60)),
                        highway_class: "residential".into(),
                        known_class: true,
                        geometry: vec![Coord::new(0.0, 0.0), Coord::new(1.0, 1.0)],
                        district_id: d.map(|d| DistrictId::new(format!("d{d}"))),
                    })
                    .collect()
            };
            let (a, b) = (build(&roads), build(&shuffled));
            let plan = SamplePlan::for_roads(CityId::new("oracle"), n, seed, &a);
            prop_assert_eq!(&plan, &SamplePlan::for_roads(CityId::new("oracle"), n, seed, &b));
            let first = draw_sample(&a, &plan);
            prop_assert_eq!(&first, &draw_sample(&a, &plan));
            let set = |s: &streetonomics::validate::Sample| -> BTreeSet<(String, String)> {
                s.streets
                    .iter()
                    .map(|x| (x.street_name.clone(), x.district_id.as_str().to_owned()))
                    .collect()
            };
            prop_assert_eq!(set(&first), set(&draw_sample(&b, &plan)));
            Ok(())
        })
        .map_err(|e| format!("sampling: {e}"))?;
    Ok(format!("draw_sample deterministic and order-invariant over {SAMPLE_SEEDS} seeds"))
}

fn criterion_5() -> Result<String, String> {
    let start = Instant::now();
    let parts = [
        oracle_fhd(),
        oracle_tau(),
        oracle_district_sum(),
        oracle_point_in_polygon(),
        oracle_sampling(),
    ];
    let elapsed = start.elapsed();
    let (ok, failed): (Vec<_>, Vec<_>) = parts.into_iter().partition(Result::is_ok);
    let failed: Vec<String> = failed.into_iter().map(Result::unwrap_err).collect();
    check(failed.is_empty(), || failed.join("; "))?;
    check(elapsed < ORACLE_MAX_RUNTIME, || format!("oracle suite took {elapsed:?}"))?;
    let ok: Vec<String> = ok.into_iter().map(Result::unwrap).collect();
    Ok(format!("{} in {elapsed:.2?}", ok.join("; ")))
}

// ---- fixtures ---------------------------------------------------------------

fn criterion_6() -> Result<String, String> {
    let (_tmp, dir) = fixture_copy();
    let annotations = AnnotationFile::load(&dir.join("annotations.csv")).map_err(|e| e.to_string())?;
    let direct = estimate_coverage(&annotations).map_err(|e| e.to_string())?;
    check(
        direct.sampled == 200 && direct.honorific.ratio.numerator == 92,
        || format!("fixture has {} sampled, {} honorific", direct.sampled, direct.honorific.ratio.numerator),
    )?;
    let config = dir.join("streetonomics.toml");
    let exit = cli(&config, &["--offline", "--no-prompt", "validate"]);
    check(exit == 0, || format!("validate exited with {exit}"))?;
    let report = read_json(&dir.join("out/validate/paris/coverage.json"))?;
    let percent = report["coverage"]["honorific"]["percent"].as_f64();
    check(percent == Some(VALIDATION_EXPECTED_PERCENT), || {
        format!("honorific share {percent:?}, expected {VALIDATION_EXPECTED_PERCENT}")
    })?;
    check(direct.honorific.percent == Some(VALIDATION_EXPECTED_PERCENT), || {
        format!("direct estimate {:?}", direct.honorific.percent)
    })?;
    Ok(format!("92/200 honorific = {VALIDATION_EXPECTED_PERCENT}% exactly"))
}

fn listing(out: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut files = BTreeMap::new();
    let mut stack = vec![out.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = e.map_err(|e| e.to_string())?.path();
            let rel = path.strip_prefix(out).unwrap().to_string_lossy().into_owned();
            if rel == "cache" {
                continue;
            }
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(rel, std::fs::read(&path).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(files)
}

fn criterion_7() -> Result<String, String> {
    let runs: Vec<_> = (0..2).map(|_| fixture_copy()).collect();
    let mut bundles = Vec::new();
    for (_, dir) in &runs {
        let exit = cli(&dir.join("streetonomics.toml"), &["--offline", "--no-prompt", "reproduce"]);
        check(exit == 0, || format!("reproduce exited with {exit}"))?;
        bundles.push(listing(&dir.join("out"))?);
    }
    let (a, b) = (&bundles[0], &bundles[1]);
    check(a.keys().eq(b.keys()), || "the two runs wrote different file sets".into())?;
    let differing: Vec<&String> = a.keys().filter(|k| a[*k] != b[*k]).collect();
    check(differing.is_empty(), || format!("files differ: {differing:?}"))?;
    check(a.contains_key("reproduce/bundle.json"), || "no bundle.json".into())?;

    // Forced re-run in place must also reproduce the same bytes.
    let (_, dir) = &runs[0];
    let exit = cli(&dir.join("streetonomics.toml"), &["--offline", "--no-prompt", "--force", "reproduce"]);
    check(exit == 0, || format!("forced reproduce exited with {exit}"))?;
    let again = listing(&dir.join("out"))?;
    check(&again == a, || "forced re-run changed the outputs".into())?;
    let hashes: HashSet<String> = [a, b, &again]
        .iter()
        .map(|m| streetonomics_cli::provenance::sha256_hex(&m["reproduce/bundle.json"]))
        .collect();
    Ok(format!(
        "{} files byte-identical across runs; bundle sha256 {}",
        a.len(),
        hashes.into_iter().next().unwrap_or_default()
    ))
}

fn main() {
    let mut outcomes = Vec::new();
    match published_dir() {
        Some(dir) => {
            let p = Published::run(&dir);
            outcomes.push(Outcome::of(1, "table1", criterion_1(&p)));
            outcomes.push(Outcome::of(2, "headline-proportions", criterion_2(&p)));
            outcomes.push(Outcome::of(3, "fhd-shape", criterion_3(&p)));
            outcomes.push(Outcome::of(4, "occupation-dynamics", criterion_4(&p)));
        }
        None => {
            let why = "published curated datasets not found (set STREETONOMICS_PUBLISHED_DATA)";
            outcomes.push(Outcome::unavailable(1, "table1", why));
            outcomes.push(Outcome::unavailable(
                2,
                "headline-proportions",
                format!("{why}; replaced by criterion 5, headline numbers are not desk-reproducible"),
            ));
            outcomes.push(Outcome::unavailable(3, "fhd-shape", why));
            outcomes.push(Outcome::unavailable(4, "occupation-dynamics", why));
        }
    }
    outcomes.push(Outcome::of(5, "oracles", criterion_5()));
    outcomes.push(Outcome::of(6, "validation-protocol", criterion_6()));
    outcomes.push(Outcome::of(7, "determinism", criterion_7()));

    println!("\nacceptance");
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<u8> = outcomes
        .iter()
        .filter(|o| matches!(o.status, Status::Fail))
        .map(|o| o.id)
        .collect();
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
    println!();
}
