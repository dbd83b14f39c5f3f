mod common;

use std::path::Path;

use common::{cli, fixture_copy, fixture_dir, read_json};
use streetonomics::enrich::sparql::{person_query, PersonSelector};
use streetonomics::enrich::transport::write_archive_entry;
use streetonomics::enrich::{Response, SparqlRequest, DEFAULT_ENDPOINT};
use streetonomics_cli::{EXIT_DATA, EXIT_NETWORK, EXIT_OK, EXIT_USAGE};

const OFFLINE: [&str; 2] = ["--offline", "--no-prompt"];

fn run(dir: &Path, args: &[&str]) -> i32 {
    let mut all: Vec<&str> = OFFLINE.to_vec();
    all.extend(args);
    cli(&dir.join("streetonomics.toml"), &all)
}

fn append_row(dir: &Path, row: &str) {
    let path = dir.join("paris.csv");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str(row);
    text.push('\n');
    std::fs::write(path, text).unwrap();
}

fn record(dir: &Path, selector: PersonSelector<'_>, body: &str) {
    let query = person_query(selector).unwrap();
    write_archive_entry(
        &dir.join("archive"),
        &SparqlRequest::new(DEFAULT_ENDPOINT, query),
        &Response {
            body: body.to_owned(),
            recorded_at: "2024-05-01T12:00:00Z".into(),
        },
    )
    .unwrap();
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(streetonomics_cli::run(["streetonomics", "--help"]), EXIT_OK);
    assert_eq!(streetonomics_cli::run(["streetonomics", "--version"]), EXIT_OK);
}

#[test]
fn bad_flags_and_configs_are_usage_errors() {
    assert_eq!(streetonomics_cli::run(["streetonomics", "--bogus", "ingest"]), EXIT_USAGE);
    assert_eq!(streetonomics_cli::run(["streetonomics", "frobnicate"]), EXIT_USAGE);
    let missing = Path::new("/nonexistent/streetonomics.toml");
    assert_eq!(cli(missing, &["ingest"]), EXIT_USAGE);
    let (_tmp, dir) = fixture_copy();
    assert_eq!(run(&dir, &["--city", "atlantis", "ingest"]), EXIT_USAGE);
}

#[test]
fn downstream_stage_without_upstream_is_a_usage_error() {
    let (_tmp, dir) = fixture_copy();
    assert_eq!(run(&dir, &["metrics"]), EXIT_USAGE);
}

#[test]
fn unreadable_dataset_is_a_data_error() {
    let (_tmp, dir) = fixture_copy();
    std::fs::write(dir.join("paris.csv"), "street,year\nRue X,1900\n").unwrap();
    assert_eq!(run(&dir, &["ingest"]), EXIT_DATA);
}

#[test]
fn offline_lookup_without_recording_is_a_network_error() {
    let (_tmp, dir) = fixture_copy();
    append_row(&dir, "paris,Rue Ada Lovelace,Louvre,2019,Ada Lovelace,,,,,,,");
    assert_eq!(run(&dir, &["ingest"]), EXIT_OK);
    assert_eq!(run(&dir, &["enrich"]), EXIT_NETWORK);
}

#[test]
fn stages_write_meta_and_skip_when_unchanged() {
    let (_tmp, dir) = fixture_copy();
    assert_eq!(run(&dir, &["ingest"]), EXIT_OK);
    let csv = dir.join("out/ingest/paris.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# tool: streetonomics"));
    assert!(text.contains("# config_hash: "));
    assert!(text.contains("# input: paris.csv sha256:"));
    let report = read_json(&dir.join("out/ingest/paris.report.json")).unwrap();
    assert_eq!(report["meta"]["stage"], "ingest");
    assert_eq!(report["dataset"]["rows_kept"], 48);

    // An unchanged rerun leaves the file alone; a changed input rewrites it.
    let before = std::fs::metadata(&csv).unwrap().modified().unwrap();
    std::thread::sleep(std::time::Duration::from_millis(20));
    assert_eq!(run(&dir, &["ingest"]), EXIT_OK);
    assert_eq!(std::fs::metadata(&csv).unwrap().modified().unwrap(), before);
    append_row(&dir, "paris,Rue Voltaire,Temple,1870,Voltaire,male,writer,,FR,1694,1778,");
    assert_eq!(run(&dir, &["ingest"]), EXIT_OK);
    assert_eq!(data_rows(&csv).len(), 50);
}

#[test]
fn seed_override_changes_the_sample() {
    let (_tmp, dir) = fixture_copy();
    assert_eq!(run(&dir, &["validate"]), EXIT_OK);
    let a = read_json(&dir.join("out/validate/paris/sample.json")).unwrap();
    assert_eq!(run(&dir, &["--seed", "7", "validate"]), EXIT_OK);
    let b = read_json(&dir.join("out/validate/paris/sample.json")).unwrap();
    assert_eq!(a["plan"]["seed"], 42);
    assert_eq!(b["plan"]["seed"], 7);
    assert_eq!(b["meta"]["settings"]["seed"], 7);
    assert_ne!(a["streets"], b["streets"]);
    assert_eq!(b["streets"].as_array().unwrap().len(), 200);
}

#[test]
fn enrichment_fills_rosa_parks_from_the_archive() {
    let (_tmp, dir) = fixture_copy();
    assert_eq!(run(&dir, &["ingest"]), EXIT_OK);
    assert_eq!(run(&dir, &["enrich"]), EXIT_OK);
    let rows = data_rows(&dir.join("out/enrich/paris.csv"));
    let rosa = rows.iter().find(|r| r.contains("Rosa Parks")).unwrap();
    assert!(rosa.contains(",female,civil rights advocate,legal_social_cultural,US,1913,2005,"), "{rosa}");
    let cache = std::fs::read_to_string(dir.join("out/cache/enrichment.jsonl")).unwrap();
    assert!(cache.contains("Q41921"));
}

#[test]
fn ambiguous_names_follow_the_decisions_file() {
    let (_tmp, dir) = fixture_copy();
    let kb = fixture_dir().join("../../../../core/tests/fixtures/kb");
    let ambiguous = std::fs::read_to_string(kb.join("ambiguous.json")).unwrap();
    record(&dir, PersonSelector::Label { name: "John Smith", language: "en" }, &ambiguous);
    let chosen = r#"{"head":{"vars":["person","personLabel","gender","birth","death","countryLabel"]},
      "results":{"bindings":[{
        "person":{"type":"uri","value":"http://www.wikidata.org/entity/Q228024"},
        "personLabel":{"type":"literal","value":"John Smith"},
        "gender":{"type":"uri","value":"http://www.wikidata.org/entity/Q6581097"},
        "birth":{"type":"literal","value":"1580-01-01T00:00:00Z"},
        "death":{"type":"literal","value":"1631-06-21T00:00:00Z"},
        "countryLabel":{"type":"literal","value":"England"}}]}}"#;
    record(&dir, PersonSelector::Entity("Q228024"), chosen);
    append_row(&dir, "paris,Rue John Smith,Louvre,1950,John Smith,,,,,,,");
    assert_eq!(run(&dir, &["ingest"]), EXIT_OK);

    // Without a decision the name stays unresolved.
    assert_eq!(run(&dir, &["enrich"]), EXIT_OK);
    let report = read_json(&dir.join("out/enrich/paris.report.json")).unwrap();
    assert_eq!(report["lookup"]["ambiguous"][0]["decision"], serde_json::Value::Null);

    std::fs::write(dir.join("decisions.csv"), "name,entity_id\nJohn Smith,Q228024\n").unwrap();
    assert_eq!(run(&dir, &["enrich"]), EXIT_OK);
    let rows = data_rows(&dir.join("out/enrich/paris.csv"));
    let smith = rows.iter().find(|r| r.contains("John Smith")).unwrap();
    assert!(smith.contains(",male,"), "{smith}");
    assert!(smith.contains(",1580,1631,"), "{smith}");
}

#[test]
fn reproduce_writes_table_and_maps() {
    let (_tmp, dir) = fixture_copy();
    assert_eq!(run(&dir, &["reproduce"]), EXIT_OK);
    let out = dir.join("out");
    let table = data_rows(&out.join("reproduce/table1.csv"));
    assert_eq!(table[0], "city,display_name,honorific_streets,years,min_year,max_year,osm_streets");
    assert_eq!(table[1], "paris,Paris,48,1202 - 2021,1202,2021,288");
    let map = read_json(&out.join("map/paris/f_prop_district.geojson")).unwrap();
    assert_eq!(map["features"].as_array().unwrap().len(), 4);
    assert_eq!(map["meta"]["stage"], "map");
    let bundle = read_json(&out.join("reproduce/bundle.json")).unwrap();
    let files = bundle["files"].as_object().unwrap();
    assert!(files.keys().all(|k| !k.starts_with("cache/")));
    assert!(files.contains_key("metrics/paris/fhd.json"));
}

#[test]
fn within_district_and_strict_formulae_are_recorded() {
    let (_tmp, dir) = fixture_copy();
    assert_eq!(run(&dir, &["ingest"]), EXIT_OK);
    assert_eq!(run(&dir, &["enrich"]), EXIT_OK);
    assert_eq!(run(&dir, &["--within-district", "--strict-formulae", "metrics"]), EXIT_OK);
    let summary = read_json(&dir.join("out/metrics/paris/summary.json")).unwrap();
    assert_eq!(summary["foreigner_formula"], "literal");
    assert_eq!(summary["meta"]["settings"]["within_district"], true);
    let f = read_json(&dir.join("out/metrics/paris/f_prop_district_within.json")).unwrap();
    assert!(f["values"].as_object().unwrap().values().all(|v| v.as_f64().unwrap() <= 1.0));
    assert!(!dir.join("out/metrics/paris/f_prop_district.json").exists());
}
