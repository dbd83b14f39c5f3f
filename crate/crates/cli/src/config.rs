//! Run configuration file.
//!
//! TOML; `#` starts a comment. Relative paths are resolved against the
//! directory holding the config file.
//!
//! ```toml
//! output_dir = "out"
//! seed = 42                      # sampling seed
//! parallelism = 4                # concurrent knowledge-base lookups
//! ranking_mode = "cumulative"    # or "per_decade"
//! strict_formulae = false        # literal foreigner-by-decade formula
//! within_district = false        # district shares over the district's own streets
//! metrics = ["f_prop", "for_prop", "fhd", "denominations", "occupation", "districts"]
//! choropleth_bins = 5
//!
//! [enrichment]
//! enabled = true
//! endpoint = "https://query.wikidata.org/sparql"
//! language = "en"
//! cache = "cache/enrichment.jsonl"   # default: <output_dir>/cache/enrichment.jsonl
//! archive = "archive"                # recorded responses; required with --offline
//! record = false                     # store live responses into `archive`
//! requests_per_second = 5.0
//! max_attempts = 4
//! decisions = "decisions.csv"        # `name,entity_id` choices for ambiguous names
//! lexicon = "lexicon.csv"            # replaces the bundled occupation lexicon
//! named_after = false                # also list named-after eponyms per city
//!
//! [validation]
//! sample_size = 200
//!
//! [[city]]
//! id = "paris"                  # shipped ids fill in the fields below
//! display_name = "Paris"
//! home_country = "FR"
//! start_decade = 1860
//! kb_area = "Q90"
//! kb_language = "fr"
//! dataset = "data/paris.csv"
//! districts = "data/paris_districts.geojson"
//! osm_roads = "data/paris_roads.tsv"
//! annotations = "data/paris_annotations.csv"
//! exclusions = ["motorway", "trunk", "cycleway", "path"]
//! [city.columns]                # raw header -> canonical column
//! "Nom de la voie" = "street_name"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use streetonomics::enrich::DEFAULT_ENDPOINT;
use streetonomics::ingest::DEFAULT_EXCLUSIONS;
use streetonomics::metrics::RankingMode;
use streetonomics::model::{CityConfig, CityId, CountryCode};

pub const CONFIG_ENV: &str = "STREETONOMICS_CONFIG";
pub const DEFAULT_CONFIG: &str = "streetonomics.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    FProp,
    ForProp,
    Fhd,
    Denominations,
    Occupation,
    Districts,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::FProp,
        MetricKind::ForProp,
        MetricKind::Fhd,
        MetricKind::Denominations,
        MetricKind::Occupation,
        MetricKind::Districts,
    ];
}

fn default_parallelism() -> usize {
    4
}
fn default_metrics() -> Vec<MetricKind> {
    MetricKind::ALL.to_vec()
}
fn default_bins() -> usize {
    5
}
fn default_true() -> bool {
    true
}
fn default_endpoint() -> String {
    DEFAULT_ENDPOINT.into()
}
fn default_language() -> String {
    "en".into()
}
fn default_rps() -> f64 {
    5.0
}
fn default_attempts() -> u32 {
    4
}
fn default_sample_size() -> usize {
    streetonomics::validate::DEFAULT_SAMPLE_SIZE
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    output_dir: PathBuf,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_parallelism")]
    parallelism: usize,
    #[serde(default)]
    ranking_mode: RankingMode,
    #[serde(default)]
    strict_formulae: bool,
    #[serde(default)]
    within_district: bool,
    #[serde(default = "default_metrics")]
    metrics: Vec<MetricKind>,
    #[serde(default = "default_bins")]
    choropleth_bins: usize,
    #[serde(default)]
    enrichment: FileEnrichment,
    #[serde(default)]
    validation: FileValidation,
    #[serde(rename = "city")]
    cities: Vec<FileCity>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEnrichment {
    #[serde(default = "default_true")]
    enabled: bool,
    #[serde(default = "default_endpoint")]
    endpoint: String,
    #[serde(default = "default_language")]
    language: String,
    cache: Option<PathBuf>,
    archive: Option<PathBuf>,
    #[serde(default)]
    record: bool,
    #[serde(default = "default_rps")]
    requests_per_second: f64,
    #[serde(default = "default_attempts")]
    max_attempts: u32,
    decisions: Option<PathBuf>,
    lexicon: Option<PathBuf>,
    #[serde(default)]
    named_after: bool,
}

impl Default for FileEnrichment {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileValidation {
    #[serde(default = "default_sample_size")]
    sample_size: usize,
}

impl Default for FileValidation {
    fn default() -> Self {
        FileValidation {
            sample_size: default_sample_size(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCity {
    id: String,
    display_name: Option<String>,
    home_country: Option<String>,
    start_decade: Option<i32>,
    kb_area: Option<String>,
    kb_language: Option<String>,
    dataset: PathBuf,
    districts: Option<PathBuf>,
    osm_roads: Option<PathBuf>,
    annotations: Option<PathBuf>,
    exclusions: Option<Vec<String>>,
    #[serde(default)]
    columns: BTreeMap<String, String>,
}

/// Command-line switches that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub offline: bool,
    pub strict_formulae: bool,
    pub within_district: bool,
    pub no_prompt: bool,
    pub force: bool,
}

#[derive(Debug, Clone)]
pub struct EnrichmentSettings {
    pub enabled: bool,
    pub endpoint: String,
    pub language: String,
    pub cache: PathBuf,
    pub archive: Option<PathBuf>,
    pub record: bool,
    pub requests_per_second: f64,
    pub max_attempts: u32,
    pub decisions: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub named_after: bool,
}

/// An input file as written in the config and as resolved on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputPath {
    pub label: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct CityRun {
    pub city: CityConfig,
    pub kb_language: String,
    pub dataset: InputPath,
    pub districts: Option<InputPath>,
    pub osm_roads: Option<InputPath>,
    pub annotations: Option<InputPath>,
    pub exclusions: Vec<String>,
    pub columns: BTreeMap<String, String>,
}

/// Settings that change what the pipeline outputs; echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveSettings {
    pub seed: u64,
    pub ranking_mode: RankingMode,
    pub strict_formulae: bool,
    pub within_district: bool,
    pub metrics: Vec<MetricKind>,
    pub choropleth_bins: usize,
    pub sample_size: usize,
}

/// A loaded, validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// The config file text, byte for byte.
    pub raw: String,
    pub config_hash: String,
    pub config_path: PathBuf,
    pub output_dir: PathBuf,
    pub parallelism: usize,
    pub settings: EffectiveSettings,
    pub enrichment: EnrichmentSettings,
    pub cities: Vec<CityRun>,
    pub overrides: Overrides,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_owned()
    } else {
        base.join(p)
    }
}

fn input(base: &Path, p: &Path, what: &str) -> anyhow::Result<InputPath> {
    let path = resolve(base, p);
    if !path.is_file() {
        bail!("{what} `{}` does not exist (resolved to {})", p.display(), path.display());
    }
    Ok(InputPath {
        label: p.to_string_lossy().replace('\\', "/"),
        path,
    })
}

impl RunConfig {
    /// Config path from the flag, then `STREETONOMICS_CONFIG`, then `./streetonomics.toml`.
    pub fn locate(flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_owned)
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_CONFIG))
    }

    pub fn load(path: &Path, overrides: Overrides) -> anyhow::Result<Self> {
        let raw = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_str(&raw, path, overrides)
    }

    pub fn from_str(raw: &str, path: &Path, overrides: Overrides) -> anyhow::Result<Self> {
        let file: FileConfig = toml::from_str(raw).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().map(Path::to_owned).unwrap_or_default();
        let config_hash = hex::encode(Sha256::digest(raw.as_bytes()));

        if file.cities.is_empty() {
            bail!("config defines no [[city]]");
        }
        if file.parallelism == 0 {
            bail!("parallelism must be at least 1");
        }
        if file.choropleth_bins < 2 {
            bail!("choropleth_bins must be at least 2");
        }
        if file.validation.sample_size == 0 {
            bail!("validation.sample_size must be at least 1");
        }
        let output_dir = resolve(&base, &file.output_dir);

        let mut cities = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for c in &file.cities {
            if !seen.insert(c.id.clone()) {
                bail!("city `{}` is listed twice", c.id);
            }
            cities.push(city_run(&base, c)?);
        }

        let e = &file.enrichment;
        let archive = e.archive.as_ref().map(|p| resolve(&base, p));
        if overrides.offline {
            match &archive {
                Some(a) if a.is_dir() => {}
                Some(a) => bail!("--offline: response archive {} is not a directory", a.display()),
                None if e.enabled => log::warn!("--offline without [enrichment].archive: any lookup will fail"),
                None => {}
            }
        }
        if e.record && archive.is_none() {
            bail!("[enrichment].record needs [enrichment].archive");
        }
        let lexicon = e
            .lexicon
            .as_ref()
            .map(|p| input(&base, p, "occupation lexicon"))
            .transpose()?
            .map(|i| i.path);
        let enrichment = EnrichmentSettings {
            enabled: e.enabled,
            endpoint: e.endpoint.clone(),
            language: e.language.clone(),
            cache: e
                .cache
                .as_ref()
                .map_or_else(|| output_dir.join("cache/enrichment.jsonl"), |p| resolve(&base, p)),
            archive,
            record: e.record,
            requests_per_second: e.requests_per_second,
            max_attempts: e.max_attempts,
            decisions: e.decisions.as_ref().map(|p| resolve(&base, p)),
            lexicon,
            named_after: e.named_after,
        };

        let mut metrics = file.metrics.clone();
        metrics.sort();
        metrics.dedup();
        let settings = EffectiveSettings {
            seed: overrides.seed.unwrap_or(file.seed),
            ranking_mode: file.ranking_mode,
            strict_formulae: file.strict_formulae || overrides.strict_formulae,
            within_district: file.within_district || overrides.within_district,
            metrics,
            choropleth_bins: file.choropleth_bins,
            sample_size: file.validation.sample_size,
        };
        Ok(RunConfig {
            raw: raw.to_owned(),
            config_hash,
            config_path: path.to_owned(),
            output_dir,
            parallelism: file.parallelism,
            settings,
            enrichment,
            cities,
            overrides,
        })
    }

    pub fn wants(&self, m: MetricKind) -> bool {
        self.settings.metrics.contains(&m)
    }

    /// Cities to process, optionally limited to `only`.
    pub fn selected<'a>(&'a self, only: &'a [String]) -> anyhow::Result<Vec<&'a CityRun>> {
        for id in only {
            if !self.cities.iter().any(|c| c.city.city_id.as_str() == id) {
                bail!("--city `{id}` is not in the config");
            }
        }
        Ok(self
            .cities
            .iter()
            .filter(|c| only.is_empty() || only.iter().any(|o| o == c.city.city_id.as_str()))
            .collect())
    }
}

fn city_run(base: &Path, c: &FileCity) -> anyhow::Result<CityRun> {
    let shipped = CityConfig::shipped_city(&c.id);
    let home = match (&c.home_country, &shipped) {
        (Some(code), _) => CountryCode::new(code).with_context(|| format!("city `{}`", c.id))?,
        (None, Some(s)) => s.home_country,
        (None, None) => bail!("city `{}` needs home_country", c.id),
    };
    let start_decade = match (c.start_decade, &shipped) {
        (Some(y), _) => y,
        (None, Some(s)) => s.start_decade,
        (None, None) => bail!("city `{}` needs start_decade", c.id),
    };
    let city = CityConfig {
        city_id: CityId::new(&c.id),
        display_name: c
            .display_name
            .clone()
            .or_else(|| shipped.as_ref().map(|s| s.display_name.clone()))
            .unwrap_or_else(|| c.id.clone()),
        home_country: home,
        start_decade,
        kb_area: c.kb_area.clone().or_else(|| shipped.as_ref().and_then(|s| s.kb_area.clone())),
        districts: Vec::new(),
    };
    let what = |k: &str| format!("city `{}` {k}", c.id);
    Ok(CityRun {
        kb_language: c.kb_language.clone().unwrap_or_else(|| "en".into()),
        dataset: input(base, &c.dataset, &what("dataset"))?,
        districts: c.districts.as_ref().map(|p| input(base, p, &what("districts"))).transpose()?,
        osm_roads: c.osm_roads.as_ref().map(|p| input(base, p, &what("osm_roads"))).transpose()?,
        annotations: c
            .annotations
            .as_ref()
            .map(|p| input(base, p, &what("annotations")))
            .transpose()?,
        exclusions: c
            .exclusions
            .clone()
            .unwrap_or_else(|| DEFAULT_EXCLUSIONS.iter().map(|s| s.to_string()).collect()),
        columns: c.columns.clone(),
        city,
    })
}
