//! The six commands. Each stage reads its inputs, writes its outputs under
//! `<output_dir>/<stage>/`, and skips itself when nothing changed.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde_json::{json, Value};
use streetonomics::enrich::{
    self, query_named_after, resolve_all, ArchiveTransport, EnrichmentCache, HttpTransport, OccupationLexicon,
    RecordingTransport, Resolution, Resolver, RetryPolicy, Transport, UnmatchedLabels,
};
use streetonomics::ingest::{self, ColumnMap, RoadSegment};
use streetonomics::metrics::{self, DistrictMetric, DistrictNormalization, ForeignerFormula, Ratio};
use streetonomics::model::{District, DistrictId, Gender, OccupationGroup, StreetRecord};
use streetonomics::spatial;
use streetonomics::text::search_key;
use streetonomics::validate::{self, AnnotationFile, CuratedShares, SamplePlan};

use crate::config::{CityRun, MetricKind, RunConfig};
use crate::provenance::{file_listing, json_bytes, up_to_date, with_meta, Meta, StageWriter};
use crate::UsageError;

pub const STAGES: [&str; 6] = ["ingest", "enrich", "metrics", "map", "validate", "reproduce"];

/// Shared state for one invocation.
pub struct Pipeline<'a> {
    pub cfg: &'a RunConfig,
    transport: Option<Box<dyn Transport>>,
    cache: Option<EnrichmentCache>,
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a RunConfig) -> Self {
        Pipeline {
            cfg,
            transport: None,
            cache: None,
        }
    }

    fn out(&self) -> &Path {
        &self.cfg.output_dir
    }

    /// Checks the stage manifest; true when the stage can be skipped.
    fn fresh(&self, meta: &Meta) -> bool {
        if self.cfg.overrides.force {
            return false;
        }
        let fresh = up_to_date(self.out(), meta).is_some();
        if fresh {
            log::info!("{} for {}: up to date", meta.stage, meta.city);
        }
        fresh
    }

    fn upstream(&self, stage: &str, city: &CityRun, file: &str) -> anyhow::Result<(String, PathBuf)> {
        let rel = format!("{stage}/{}{file}", city.city.city_id);
        let path = self.out().join(&rel);
        if !path.is_file() {
            return Err(UsageError(format!(
                "{rel} is missing; run `streetonomics {stage}` first"
            ))
            .into());
        }
        Ok((rel, path))
    }

    fn districts(&self, city: &CityRun) -> anyhow::Result<Vec<District>> {
        match &city.districts {
            Some(p) => Ok(ingest::parse_districts(&p.path)?),
            None => Ok(Vec::new()),
        }
    }

    fn read_records(&self, path: &Path, city: &CityRun) -> anyhow::Result<Vec<StreetRecord>> {
        let (records, report) = ingest::parse_curated_dataset(path, &city.city)?;
        if report.dropped() > 0 {
            return Err(anyhow!(
                "{} has {} rows that no longer parse; re-run the upstream stage",
                path.display(),
                report.dropped()
            ));
        }
        Ok(records)
    }

    // ---- ingest -------------------------------------------------------------

    pub fn ingest(&mut self, city: &CityRun) -> anyhow::Result<()> {
        let id = city.city.city_id.as_str();
        let mut meta = Meta::new(self.cfg, "ingest", id);
        meta.input(&city.dataset.label, &city.dataset.path)?;
        for p in [&city.districts, &city.osm_roads].into_iter().flatten() {
            meta.input(&p.label, &p.path)?;
        }
        if self.fresh(&meta) {
            return Ok(());
        }

        let file = std::fs::File::open(&city.dataset.path)
            .with_context(|| format!("opening {}", city.dataset.path.display()))?;
        let (mut records, report) = ingest::parse_curated_reader(
            file,
            &city.dataset.path,
            &city.city,
            &ColumnMap(city.columns.clone()),
        )?;
        log::info!(
            "ingest {id}: {} rows read, {} kept, {} dropped",
            report.rows_read,
            report.rows_kept,
            report.dropped()
        );
        let districts = self.districts(city)?;
        let assignment = if districts.is_empty() {
            Value::Null
        } else {
            let a = spatial::assign_all(&mut records, &districts);
            if !a.unassigned.is_empty() {
                log::warn!("ingest {id}: {} streets are outside every district", a.unassigned.len());
            }
            json!({ "assigned": a.assigned, "unassigned": a.unassigned })
        };
        let roads = match &city.osm_roads {
            Some(p) => {
                let (mut roads, rep) = ingest::parse_osm_roads(&p.path, &city.exclusions)?;
                let unassigned = if districts.is_empty() {
                    0
                } else {
                    spatial::assign_roads(&mut roads, &districts)
                };
                json!({ "report": rep, "streets": roads.len(), "unassigned": unassigned })
            }
            None => Value::Null,
        };

        let mut w = StageWriter::new(self.out(), meta);
        let mut csv = w.meta().csv_preamble().into_bytes();
        ingest::write_curated(&records, &mut csv)?;
        w.add(format!("ingest/{id}.csv"), csv);
        w.add_json(
            format!("ingest/{id}.report.json"),
            json!({ "dataset": report, "district_assignment": assignment, "osm_roads": roads }),
        );
        w.commit()?;
        Ok(())
    }

    // ---- enrich -------------------------------------------------------------

    fn transport(&mut self) -> anyhow::Result<&dyn Transport> {
        if self.transport.is_none() {
            let e = &self.cfg.enrichment;
            let t: Box<dyn Transport> = if self.cfg.overrides.offline {
                let dir = e.archive.clone().ok_or_else(|| {
                    streetonomics::Error::Network("offline mode needs [enrichment].archive for lookups".into())
                })?;
                Box::new(ArchiveTransport::new(dir))
            } else {
                let http = HttpTransport::new(
                    e.requests_per_second,
                    RetryPolicy {
                        max_attempts: e.max_attempts,
                        ..RetryPolicy::default()
                    },
                );
                match (&e.archive, e.record) {
                    (Some(dir), true) => Box::new(RecordingTransport::new(http, dir.clone())),
                    _ => Box::new(http),
                }
            };
            self.transport = Some(t);
        }
        Ok(self.transport.as_deref().expect("set above"))
    }

    fn cache(&mut self) -> anyhow::Result<&EnrichmentCache> {
        if self.cache.is_none() {
            self.cache = Some(EnrichmentCache::open(&self.cfg.enrichment.cache)?);
        }
        Ok(self.cache.as_ref().expect("set above"))
    }

    fn lexicon(&self) -> anyhow::Result<OccupationLexicon> {
        Ok(match &self.cfg.enrichment.lexicon {
            Some(p) => OccupationLexicon::load(p)?,
            None => OccupationLexicon::shipped(),
        })
    }

    pub fn enrich(&mut self, city: &CityRun) -> anyhow::Result<()> {
        let id = city.city.city_id.as_str().to_owned();
        let (rel, path) = self.upstream("ingest", city, ".csv")?;
        let mut meta = Meta::new(self.cfg, "enrich", &id);
        meta.input(&rel, &path)?;
        if let Some(p) = &self.cfg.enrichment.lexicon {
            meta.input("lexicon", p)?;
        }
        let decisions_path = self.cfg.enrichment.decisions.clone();
        if let Some(p) = decisions_path.as_ref().filter(|p| p.is_file()) {
            meta.input("decisions", p)?;
        }
        if self.fresh(&meta) {
            return Ok(());
        }

        let mut records = self.read_records(&path, city)?;
        let lexicon = self.lexicon()?;
        let mut unmatched = UnmatchedLabels::default();
        for h in records.iter_mut().filter_map(|r| r.honoree.as_mut()) {
            if let (None, Some(raw)) = (h.occupation_group, &h.occupation_raw) {
                h.occupation_group = Some(unmatched.map(raw, &lexicon));
            }
        }

        let mut lookup = json!(null);
        let mut eponyms_csv = None;
        if self.cfg.enrichment.enabled {
            let names: Vec<String> = records
                .iter()
                .filter_map(|r| r.honoree.as_ref())
                .filter(|h| needs_lookup(h))
                .map(|h| h.full_name.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if !names.is_empty() {
                lookup = self.lookup(&id, &names, &mut records, lexicon.clone())?;
            }
            if self.cfg.enrichment.named_after {
                eponyms_csv = Some(self.named_after(city)?);
            }
        }

        let mut w = StageWriter::new(self.out(), meta);
        let mut csv = w.meta().csv_preamble().into_bytes();
        ingest::write_curated(&records, &mut csv)?;
        w.add(format!("enrich/{id}.csv"), csv);
        if let Some(body) = eponyms_csv {
            let mut bytes = w.meta().csv_preamble().into_bytes();
            bytes.extend(body);
            w.add(format!("enrich/{id}.eponyms.csv"), bytes);
        }
        w.add_json(
            format!("enrich/{id}.report.json"),
            json!({
                "records": records.len(),
                "lookup": lookup,
                "unmatched_occupation_labels": unmatched.0,
            }),
        );
        w.commit()?;
        Ok(())
    }

    fn lookup(
        &mut self,
        city_id: &str,
        names: &[String],
        records: &mut [StreetRecord],
        lexicon: OccupationLexicon,
    ) -> anyhow::Result<Value> {
        let parallelism = self.cfg.parallelism;
        let endpoint = self.cfg.enrichment.endpoint.clone();
        let language = self.cfg.enrichment.language.clone();
        let decisions_path = self.cfg.enrichment.decisions.clone();
        let mut decisions = match &decisions_path {
            Some(p) if p.is_file() => load_decisions(p)?,
            _ => BTreeMap::new(),
        };
        let interactive = !self.cfg.overrides.no_prompt && std::io::stdin().is_terminal();
        self.cache()?;
        self.transport()?;
        let cache = self.cache.as_ref().expect("opened");
        let transport = self.transport.as_deref().expect("built");
        let mut resolver = Resolver::new(endpoint, transport);
        resolver.language = language;
        resolver.lexicon = lexicon;

        log::info!("enrich {city_id}: looking up {} honorees", names.len());
        let results = resolve_all(names, cache, &resolver, parallelism);
        let mut resolved: BTreeMap<String, streetonomics::model::Honoree> = BTreeMap::new();
        let mut not_found = 0usize;
        let mut ambiguous = Vec::new();
        for (name, result) in results {
            let resolution = result.with_context(|| format!("looking up `{name}`"))?;
            match resolution {
                Resolution::Resolved { record, .. } => {
                    if record.entity_id.is_none() {
                        not_found += 1;
                    }
                    resolved.insert(search_key(&name), record.honoree);
                }
                Resolution::Ambiguous { name, candidates } => {
                    let key = search_key(&name);
                    let choice = match decisions.get(&key) {
                        Some(choice) => choice.clone(),
                        None if interactive => {
                            let c = prompt_choice(&name, &candidates)?;
                            if let Some(p) = &decisions_path {
                                append_decision(p, &name, c.as_deref().unwrap_or(""))?;
                            }
                            decisions.insert(key.clone(), c.clone());
                            c
                        }
                        None => None,
                    };
                    match &choice {
                        Some(entity) => {
                            let rec = resolver
                                .resolve_as(&name, entity, cache)
                                .with_context(|| format!("resolving `{name}` as {entity}"))?;
                            resolved.insert(key, rec.honoree);
                        }
                        None => log::warn!("`{name}` is ambiguous and was left unresolved"),
                    }
                    ambiguous.push(json!({ "name": name, "candidates": candidates, "decision": choice }));
                }
            }
        }

        let mut filled: BTreeMap<&str, usize> = BTreeMap::new();
        for h in records.iter_mut().filter_map(|r| r.honoree.as_mut()) {
            let Some(found) = resolved.get(&search_key(&h.full_name)) else {
                continue;
            };
            let before = h.clone();
            h.fill_from(found);
            for (field, changed) in [
                ("gender", before.gender != h.gender),
                ("occupation", before.occupation_raw != h.occupation_raw),
                ("country", before.country_of_origin != h.country_of_origin),
                ("birth_year", before.birth_year != h.birth_year),
                ("death_year", before.death_year != h.death_year),
            ] {
                if changed {
                    *filled.entry(field).or_default() += 1;
                }
            }
        }
        Ok(json!({
            "names": names.len(),
            "not_found": not_found,
            "ambiguous": ambiguous,
            "fields_filled": filled,
        }))
    }

    fn named_after(&mut self, city: &CityRun) -> anyhow::Result<Vec<u8>> {
        let endpoint = self.cfg.enrichment.endpoint.clone();
        let transport = self.transport()?;
        let found = query_named_after(&city.city, &endpoint, &city.kb_language, transport)?;
        let persons = found.iter().filter(|(_, c)| c.is_person).count();
        log::info!(
            "enrich {}: {} named-after pairs, {persons} naming a person",
            city.city.city_id,
            found.len()
        );
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["street_label", "entity_id", "label", "is_person", "confidence"])?;
        for (street, c) in &found {
            w.write_record([
                street.as_str(),
                &c.entity_id,
                &c.label,
                if c.is_person { "true" } else { "false" },
                &c.confidence.to_string(),
            ])?;
        }
        Ok(w.into_inner().map_err(|e| anyhow!("{e}"))?)
    }

    // ---- metrics ------------------------------------------------------------

    pub fn metrics(&mut self, city: &CityRun) -> anyhow::Result<()> {
        let id = city.city.city_id.as_str().to_owned();
        let (rel, path) = self.upstream("enrich", city, ".csv")?;
        let mut meta = Meta::new(self.cfg, "metrics", &id);
        meta.input(&rel, &path)?;
        if let Some(d) = &city.districts {
            meta.input(&d.label, &d.path)?;
        }
        if self.fresh(&meta) {
            return Ok(());
        }
        let records = self.read_records(&path, city)?;
        if records.is_empty() {
            log::warn!("metrics {id}: the dataset is empty; writing empty series");
        }
        let districts = self.districts(city)?;
        let body = compute_metrics(self.cfg, city, &records, &districts);
        let mut w = StageWriter::new(self.out(), meta);
        for (name, value) in body {
            w.add_json(format!("metrics/{id}/{name}.json"), value);
        }
        w.commit()?;
        Ok(())
    }

    // ---- map ----------------------------------------------------------------

    pub fn map(&mut self, city: &CityRun) -> anyhow::Result<()> {
        let id = city.city.city_id.as_str().to_owned();
        let Some(dpath) = &city.districts else {
            log::warn!("map {id}: no district polygons configured; skipping");
            return Ok(());
        };
        self.upstream("metrics", city, "/summary.json")?;
        let mut meta = Meta::new(self.cfg, "map", &id);
        meta.input(&dpath.label, &dpath.path)?;
        let mut metric_files = Vec::new();
        for metric_id in DISTRICT_METRICS {
            let rel = format!("metrics/{id}/{metric_id}.json");
            let path = self.out().join(&rel);
            if path.is_file() {
                meta.input(&rel, &path)?;
                metric_files.push((metric_id, path));
            }
        }
        if metric_files.is_empty() {
            log::warn!("map {id}: no district metrics were computed; enable the `districts` metric");
        }
        if self.fresh(&meta) {
            return Ok(());
        }
        let districts = self.districts(city)?;
        let mut w = StageWriter::new(self.out(), meta);
        for (metric_id, path) in metric_files {
            let metric = read_district_metric(&path, city)?;
            let choro = spatial::emit_choropleth(&metric, &districts, self.cfg.settings.choropleth_bins)?;
            for warning in &choro.warnings {
                log::warn!("map {id}: {warning}");
            }
            let mut geo = choro.to_geojson(&districts);
            geo["warnings"] = json!(choro.warnings);
            let v = with_meta(w.meta(), geo);
            w.add(format!("map/{id}/{metric_id}.geojson"), json_bytes(&v));
        }
        w.commit()?;
        Ok(())
    }

    // ---- validate -----------------------------------------------------------

    pub fn validate(&mut self, city: &CityRun) -> anyhow::Result<()> {
        let id = city.city.city_id.as_str().to_owned();
        if city.osm_roads.is_none() && city.annotations.is_none() {
            log::info!("validate {id}: no OSM extract or annotations configured; skipping");
            return Ok(());
        }
        let mut meta = Meta::new(self.cfg, "validate", &id);
        for p in [&city.osm_roads, &city.districts, &city.annotations].into_iter().flatten() {
            meta.input(&p.label, &p.path)?;
        }
        let curated_rel = format!("enrich/{id}.csv");
        let curated_path = self.out().join(&curated_rel);
        let have_curated = curated_path.is_file();
        if have_curated {
            meta.input(&curated_rel, &curated_path)?;
        }
        if self.fresh(&meta) {
            return Ok(());
        }

        let mut w = StageWriter::new(self.out(), meta);
        let mut osm_streets = None;
        if let Some(p) = &city.osm_roads {
            let (mut roads, _) = ingest::parse_osm_roads(&p.path, &city.exclusions)?;
            osm_streets = Some(roads.len() as u64);
            let districts = self.districts(city)?;
            if districts.is_empty() {
                for r in &mut roads {
                    r.district_id = Some(DistrictId::new(&id));
                }
            } else {
                spatial::assign_roads(&mut roads, &districts);
            }
            let sample = draw(&roads, self.cfg, &id);
            for warning in &sample.warnings {
                log::warn!("validate {id}: {warning}");
            }
            let mut template = w.meta().csv_preamble().into_bytes();
            AnnotationFile::template(&sample).write(&mut template)?;
            w.add(format!("validate/{id}/annotations_template.csv"), template);
            w.add_json(format!("validate/{id}/sample.json"), serde_json::to_value(&sample)?);
        }
        if let Some(a) = &city.annotations {
            let annotations = AnnotationFile::load(&a.path)?;
            let report = validate::estimate_coverage(&annotations)?;
            let curated = if have_curated {
                let records = self.read_records(&curated_path, city)?;
                let female = records.iter().filter(|r| r.gender() == Gender::Female).count() as u64;
                Some(CuratedShares::new(records.len() as u64, female, osm_streets.unwrap_or(0)))
            } else {
                None
            };
            let table = report.to_table(curated.as_ref());
            log::info!("validate {id}:\n{table}");
            w.add(format!("validate/{id}/coverage.txt"), table.into_bytes());
            w.add_json(
                format!("validate/{id}/coverage.json"),
                json!({
                    "coverage": report,
                    "curated": curated,
                    "curated_people_formula": "curated honorific streets / named streets in the OSM extract",
                    "interval": "Wilson score interval, 95%",
                }),
            );
        }
        w.commit()?;
        Ok(())
    }

    // ---- reproduce ----------------------------------------------------------

    pub fn reproduce(&mut self, cities: &[&CityRun]) -> anyhow::Result<()> {
        for city in cities {
            self.ingest(city)?;
            self.enrich(city)?;
            self.metrics(city)?;
            self.map(city)?;
            self.validate(city)?;
        }
        let mut meta = Meta::new(self.cfg, "reproduce", "all");
        let mut rows = Vec::new();
        let mut summaries = serde_json::Map::new();
        for city in cities {
            let id = city.city.city_id.as_str();
            let (rel, path) = self.upstream("ingest", city, ".csv")?;
            meta.input(&rel, &path)?;
            let records = self.read_records(&path, city)?;
            let years: Vec<i32> = records.iter().filter_map(|r| r.denomination_year).collect();
            let report_path = self.out().join(format!("ingest/{id}.report.json"));
            let report: Value = serde_json::from_slice(&std::fs::read(&report_path)?)?;
            rows.push(Table1Row {
                city: id.to_owned(),
                display_name: city.city.display_name.clone(),
                honorific_streets: records.len(),
                min_year: years.iter().min().copied(),
                max_year: years.iter().max().copied(),
                osm_streets: report["osm_roads"]["streets"].as_u64(),
            });
            let (srel, spath) = self.upstream("metrics", city, "/summary.json")?;
            meta.input(&srel, &spath)?;
            let mut summary: Value = serde_json::from_slice(&std::fs::read(&spath)?)?;
            if let Some(obj) = summary.as_object_mut() {
                obj.remove("meta");
            }
            let cov = self.out().join(format!("validate/{id}/coverage.json"));
            if cov.is_file() {
                let mut c: Value = serde_json::from_slice(&std::fs::read(&cov)?)?;
                if let Some(obj) = c.as_object_mut() {
                    obj.remove("meta");
                }
                summary["validation"] = c;
            }
            summaries.insert(id.to_owned(), summary);
        }
        if self.fresh(&meta) {
            return Ok(());
        }
        let mut w = StageWriter::new(self.out(), meta);
        let mut table = w.meta().csv_preamble().into_bytes();
        write_table1(&rows, &mut table)?;
        w.add("reproduce/table1.csv", table);
        w.add_json("reproduce/table1.json", json!({ "rows": rows }));
        w.add_json("reproduce/summary.json", json!({ "cities": summaries }));
        let listing = file_listing(self.out(), &STAGES[..5])?;
        w.add_json("reproduce/bundle.json", json!({ "files": listing }));
        w.commit()?;
        for r in &rows {
            log::info!(
                "{}: {} honorific streets, named {}-{}",
                r.display_name,
                r.honorific_streets,
                r.min_year.map_or("?".into(), |y| y.to_string()),
                r.max_year.map_or("?".into(), |y| y.to_string())
            );
        }
        Ok(())
    }
}

const DISTRICT_METRICS: [&str; 4] = [
    "f_prop_district",
    "f_prop_district_within",
    "for_prop_district",
    "for_prop_district_within",
];

fn needs_lookup(h: &streetonomics::model::Honoree) -> bool {
    h.gender == Gender::Unknown
        || h.occupation_raw.is_none() && h.occupation_group.is_none()
        || h.country_of_origin.is_none()
        || h.birth_year.is_none()
        || h.death_year.is_none()
}

fn draw(roads: &[RoadSegment], cfg: &RunConfig, id: &str) -> validate::Sample {
    let plan = SamplePlan::for_roads(id.into(), cfg.settings.sample_size, cfg.settings.seed, roads);
    validate::draw_sample(roads, &plan)
}

/// `name,entity_id` rows; an empty entity id leaves the name unresolved.
fn load_decisions(path: &Path) -> anyhow::Result<BTreeMap<String, Option<String>>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let name = row.get(0).unwrap_or("").trim();
        let entity = row.get(1).unwrap_or("").trim();
        if !name.is_empty() {
            out.insert(search_key(name), (!entity.is_empty()).then(|| entity.to_owned()));
        }
    }
    Ok(out)
}

fn append_decision(path: &Path, name: &str, entity: &str) -> anyhow::Result<()> {
    let new = !path.is_file();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if new {
        w.write_record(["name", "entity_id"])?;
    }
    w.write_record([name, entity])?;
    w.flush()?;
    Ok(())
}

fn prompt_choice(name: &str, candidates: &[enrich::PersonCandidate]) -> anyhow::Result<Option<String>> {
    let mut err = std::io::stderr();
    writeln!(err, "\n`{name}` matches several people:")?;
    for (i, c) in candidates.iter().enumerate() {
        let span = match (c.birth_year, c.death_year) {
            (None, None) => String::new(),
            (b, d) => format!(
                " ({}-{})",
                b.map_or("?".into(), |y| y.to_string()),
                d.map_or("?".into(), |y| y.to_string())
            ),
        };
        writeln!(err, "  [{}] {} {}{span}", i + 1, c.entity_id, c.label)?;
    }
    writeln!(err, "  [0] leave unresolved")?;
    let stdin = std::io::stdin();
    loop {
        write!(err, "choice> ")?;
        err.flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            return Ok(None);
        }
        match line.trim().parse::<usize>() {
            Ok(0) => return Ok(None),
            Ok(n) if n <= candidates.len() => return Ok(Some(candidates[n - 1].entity_id.clone())),
            _ => writeln!(err, "enter a number between 0 and {}", candidates.len())?,
        }
    }
}

fn read_district_metric(path: &Path, city: &CityRun) -> anyhow::Result<DistrictMetric> {
    let v: Value = serde_json::from_slice(&std::fs::read(path)?)
        .with_context(|| format!("parsing {}", path.display()))?;
    let metric_id = v["metric_id"]
        .as_str()
        .ok_or_else(|| anyhow!("{}: missing metric_id", path.display()))?;
    let values = v["values"]
        .as_object()
        .ok_or_else(|| anyhow!("{}: missing values", path.display()))?
        .iter()
        .map(|(k, x)| {
            x.as_f64()
                .map(|x| (DistrictId::new(k), x))
                .ok_or_else(|| anyhow!("{}: value for `{k}` is not a number", path.display()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok(DistrictMetric::from_values(metric_id, city.city.city_id.clone(), values))
}

fn pct(r: Ratio) -> Value {
    json!({ "numerator": r.numerator, "denominator": r.denominator, "percent": r.value().map(|v| 100.0 * v) })
}

/// Metric outputs by file stem.
pub fn compute_metrics(
    cfg: &RunConfig,
    city: &CityRun,
    records: &[StreetRecord],
    districts: &[District],
) -> BTreeMap<String, Value> {
    let c = &city.city;
    let id = &c.city_id;
    let windowed = metrics::apply_start_decade(records, c);
    let formula = if cfg.settings.strict_formulae {
        ForeignerFormula::Literal
    } else {
        ForeignerFormula::WithinDecade
    };
    let mut out = BTreeMap::new();
    let mut summary = serde_json::Map::new();
    summary.insert("city".into(), json!(id));
    summary.insert("records".into(), json!(records.len()));
    summary.insert("records_from_start_decade".into(), json!(windowed.len()));
    summary.insert("start_decade".into(), json!(c.start().start_year()));

    if cfg.wants(MetricKind::FProp) {
        let s = metrics::f_prop_series(id, &windowed);
        summary.insert("pooled_f_prop".into(), pct(metrics::pooled_f_prop(records)));
        summary.insert("peak_f_prop".into(), json!(s.peak().map(|(d, v)| json!({"decade": d, "value": v}))));
        out.insert("f_prop".into(), serde_json::to_value(&s).expect("series serializes"));
    }
    if cfg.wants(MetricKind::ForProp) {
        let s = metrics::for_prop_series(id, &windowed, c.home_country, formula);
        summary.insert("pooled_for_prop".into(), pct(metrics::pooled_for_prop(records, c.home_country)));
        summary.insert("peak_for_prop".into(), json!(s.peak().map(|(d, v)| json!({"decade": d, "value": v}))));
        summary.insert(
            "foreigner_formula".into(),
            json!(match formula {
                ForeignerFormula::Literal => "literal",
                ForeignerFormula::WithinDecade => "within_decade",
            }),
        );
        out.insert("for_prop".into(), serde_json::to_value(&s).expect("series serializes"));
    }
    if cfg.wants(MetricKind::Fhd) {
        let r = metrics::fhd(id, records);
        let mass_1950 = r.mass_from(streetonomics::model::Decade::of(1950));
        summary.insert("fhd_peak_decade".into(), json!(r.peak_decade()));
        summary.insert("fhd_mass_from_1950".into(), json!(mass_1950));
        out.insert(
            "fhd".into(),
            json!({
                "series": r.series,
                "peak_decade": r.peak_decade(),
                "mass_from_1950": mass_1950,
                "excluded_missing_years": r.excluded_missing_years,
                "skipped_reversed": r.skipped_reversed,
            }),
        );
    }
    if cfg.wants(MetricKind::Denominations) {
        let s = metrics::denominations_by_decade(id, records);
        out.insert("denominations".into(), serde_json::to_value(&s).expect("series serializes"));
    }
    if cfg.wants(MetricKind::Occupation) {
        let ranking = metrics::occupation_ranking(&windowed, cfg.settings.ranking_mode);
        let stability = metrics::half_century_stability(&ranking);
        let armed = OccupationGroup::ArmedForcesOfficers;
        let ranks: BTreeMap<_, _> = ranking
            .decades
            .keys()
            .filter_map(|d| ranking.rank_of(*d, armed).map(|r| (*d, r)))
            .collect();
        let least_stable = stability
            .iter()
            .filter_map(|(h, s)| s.mean_tau.map(|t| (*h, t)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(h, t)| json!({ "half_century": h, "mean_tau": t }));
        summary.insert("armed_forces_officers_rank".into(), json!(ranks));
        summary.insert("least_stable_half_century".into(), json!(least_stable));
        out.insert(
            "occupation_ranking".into(),
            json!({ "ranking": ranking, "stability": stability }),
        );
    }
    if cfg.wants(MetricKind::Districts) {
        let ids: Vec<DistrictId> = if districts.is_empty() {
            records
                .iter()
                .filter_map(|r| r.district_id.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        } else {
            districts.iter().map(|d| d.district_id.clone()).collect()
        };
        let norm = if cfg.settings.within_district {
            DistrictNormalization::WithinDistrict
        } else {
            DistrictNormalization::CityTotal
        };
        if !ids.is_empty() {
            let f = metrics::f_prop_districts(id, records, &ids, norm);
            let fo = metrics::for_prop_districts(id, records, c.home_country, &ids, norm);
            out.insert(f.metric_id.clone(), serde_json::to_value(&f).expect("metric serializes"));
            out.insert(fo.metric_id.clone(), serde_json::to_value(&fo).expect("metric serializes"));
        }
    }
    out.insert("summary".into(), Value::Object(summary));
    out
}

#[derive(Debug, Clone, serde::Serialize)]
struct Table1Row {
    city: String,
    display_name: String,
    honorific_streets: usize,
    min_year: Option<i32>,
    max_year: Option<i32>,
    osm_streets: Option<u64>,
}

fn write_table1(rows: &[Table1Row], out: &mut Vec<u8>) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().comment(Some(b'#')).from_writer(out);
    w.write_record(["city", "display_name", "honorific_streets", "years", "min_year", "max_year", "osm_streets"])?;
    for r in rows {
        let y = |v: Option<i32>| v.map(|y| y.to_string()).unwrap_or_default();
        let years = match (r.min_year, r.max_year) {
            (Some(a), Some(b)) => format!("{a} - {b}"),
            _ => String::new(),
        };
        w.write_record([
            r.city.clone(),
            r.display_name.clone(),
            r.honorific_streets.to_string(),
            years,
            y(r.min_year),
            y(r.max_year),
            r.osm_streets.map(|n| n.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
