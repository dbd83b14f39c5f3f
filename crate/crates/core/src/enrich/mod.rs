//! Honoree metadata from a SPARQL knowledge base, with caching and offline replay.
//!
//! Requests go through a [`Transport`]: [`HttpTransport`] for live queries,
//! [`ArchiveTransport`] to replay a recorded response archive, and
//! [`RecordingTransport`] to build one. Resolved honorees are kept in an
//! [`EnrichmentCache`] so repeated runs make no requests.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::country::CountryAliases;
use crate::error::{Error, Result};
use crate::model::{CityConfig, Honoree};

pub mod cache;
pub mod occupation;
pub mod sparql;
pub mod transliterate;
pub mod transport;

pub use cache::{CacheRecord, EnrichmentCache, CACHE_HEADER};
pub use occupation::{map_occupation, OccupationLexicon, UnmatchedLabels};
pub use transliterate::{transliterate_name, TransliterationTable};
pub use transport::{
    ArchiveTransport, HttpTransport, RateLimiter, RecordingTransport, Response, RetryPolicy, SparqlRequest, Transport,
};

use sparql::{PersonRecord, PersonSelector};

pub const DEFAULT_ENDPOINT: &str = "https://query.wikidata.org/sparql";

/// A street's eponym as reported by the knowledge base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EponymCandidate {
    pub entity_id: String,
    pub label: String,
    pub is_person: bool,
    /// `1/k` for a street with `k` distinct eponyms.
    pub confidence: f64,
}

/// Street-class items in the city's area with a named-after relation.
///
/// Returns one `(street label, candidate)` pair per distinct (street, eponym)
/// entity pair, in response order.
pub fn query_named_after(
    city: &CityConfig,
    endpoint: &str,
    language: &str,
    transport: &dyn Transport,
) -> Result<Vec<(String, EponymCandidate)>> {
    let area = city
        .kb_area
        .as_deref()
        .ok_or_else(|| Error::Invalid(format!("city `{}` has no knowledge-base area configured", city.city_id)))?;
    let request = SparqlRequest::new(endpoint, sparql::named_after_query(area, language)?);
    let body = transport.send(&request)?.body;
    let rows = sparql::parse_named_after(&body)?;

    let mut per_street: HashMap<&str, Vec<&str>> = HashMap::new();
    for r in &rows {
        let eponyms = per_street.entry(&r.street_id).or_default();
        if !eponyms.contains(&r.eponym_id.as_str()) {
            eponyms.push(&r.eponym_id);
        }
    }
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for r in &rows {
        if !seen.insert((r.street_id.as_str(), r.eponym_id.as_str())) {
            continue;
        }
        let k = per_street[r.street_id.as_str()].len();
        out.push((
            r.street_label.clone(),
            EponymCandidate {
                entity_id: r.eponym_id.clone(),
                label: r.eponym_label.clone(),
                is_person: r.is_person,
                confidence: 1.0 / k as f64,
            },
        ));
    }
    Ok(out)
}

/// A person the knowledge base offered for an ambiguous name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonCandidate {
    pub entity_id: String,
    pub label: String,
    pub birth_year: Option<i32>,
    pub death_year: Option<i32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Cache,
    KnowledgeBase,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Resolution {
    Resolved {
        record: CacheRecord,
        source: Source,
    },
    /// Several people share the name; nothing was cached.
    Ambiguous {
        name: String,
        candidates: Vec<PersonCandidate>,
    },
}

impl Resolution {
    pub fn honoree(&self) -> Option<&Honoree> {
        match self {
            Resolution::Resolved { record, .. } => Some(&record.honoree),
            Resolution::Ambiguous { .. } => None,
        }
    }
}

/// Everything needed to look up a person, minus the cache.
pub struct Resolver<'a> {
    pub endpoint: String,
    pub language: String,
    pub transport: &'a dyn Transport,
    pub lexicon: OccupationLexicon,
    pub aliases: CountryAliases,
    /// When set, an empty label lookup is retried with the transliterated name.
    pub transliteration: Option<TransliterationTable>,
}

impl<'a> Resolver<'a> {
    pub fn new(endpoint: impl Into<String>, transport: &'a dyn Transport) -> Self {
        Resolver {
            endpoint: endpoint.into(),
            language: "en".into(),
            transport,
            lexicon: OccupationLexicon::shipped(),
            aliases: CountryAliases::shipped(),
            transliteration: Some(TransliterationTable::shipped()),
        }
    }

    fn persons(&self, display_name: &str, selector: PersonSelector<'_>) -> Result<(Vec<PersonRecord>, String)> {
        let request = SparqlRequest::new(&self.endpoint, sparql::person_query(selector)?);
        let resp = self.transport.send(&request)?;
        let people = sparql::parse_persons(&resp.body, display_name, &self.lexicon, &self.aliases)?;
        Ok((people, resp.recorded_at))
    }

    fn lookup_label(&self, name: &str) -> Result<(Vec<PersonRecord>, String)> {
        let first = self.persons(
            name,
            PersonSelector::Label {
                name,
                language: &self.language,
            },
        )?;
        if !first.0.is_empty() {
            return Ok(first);
        }
        if let Some(table) = &self.transliteration {
            let alt = transliterate_name(name, table);
            if alt != name {
                let second = self.persons(
                    name,
                    PersonSelector::Label {
                        name: &alt,
                        language: &self.language,
                    },
                )?;
                if !second.0.is_empty() {
                    return Ok(second);
                }
            }
        }
        Ok(first)
    }

    /// Cache-first lookup of `name`.
    ///
    /// One matching person is stored and returned. No match stores a honoree
    /// with only the name set. Several matches return
    /// [`Resolution::Ambiguous`] and store nothing.
    pub fn resolve(&self, name: &str, cache: &EnrichmentCache) -> Result<Resolution> {
        if name.trim().is_empty() {
            return Err(Error::Invalid("cannot resolve an empty name".into()));
        }
        if let Some(record) = cache.get(name) {
            return Ok(Resolution::Resolved {
                record,
                source: Source::Cache,
            });
        }
        let (mut people, recorded_at) = self.lookup_label(name)?;
        let record = match people.len() {
            0 => CacheRecord {
                key: EnrichmentCache::key(name),
                entity_id: None,
                retrieved_at: recorded_at,
                honoree: Honoree::named(name),
                provenance: BTreeMap::new(),
            },
            1 => {
                let p = people.remove(0);
                CacheRecord {
                    key: EnrichmentCache::key(name),
                    entity_id: Some(p.entity_id),
                    retrieved_at: recorded_at,
                    honoree: p.honoree,
                    provenance: p.provenance,
                }
            }
            _ => {
                return Ok(Resolution::Ambiguous {
                    name: name.to_owned(),
                    candidates: people
                        .into_iter()
                        .map(|p| PersonCandidate {
                            entity_id: p.entity_id,
                            label: p.label,
                            birth_year: p.honoree.birth_year,
                            death_year: p.honoree.death_year,
                        })
                        .collect(),
                })
            }
        };
        cache.insert(&record)?;
        Ok(Resolution::Resolved {
            record,
            source: Source::KnowledgeBase,
        })
    }

    /// Resolves `name` to a chosen entity, replacing any cached entry.
    pub fn resolve_as(&self, name: &str, entity_id: &str, cache: &EnrichmentCache) -> Result<CacheRecord> {
        let (mut people, recorded_at) = self.persons(name, PersonSelector::Entity(entity_id))?;
        let p = match people.len() {
            1 => people.remove(0),
            0 => return Err(Error::Invalid(format!("{entity_id} is not a person in the knowledge base"))),
            n => return Err(Error::Invalid(format!("{entity_id} returned {n} entities"))),
        };
        let record = CacheRecord {
            key: EnrichmentCache::key(name),
            entity_id: Some(p.entity_id),
            retrieved_at: recorded_at,
            honoree: p.honoree,
            provenance: p.provenance,
        };
        cache.insert(&record)?;
        Ok(record)
    }
}

/// Cache-first lookup of one name; see [`Resolver::resolve`].
pub fn resolve_honoree(name: &str, cache: &EnrichmentCache, resolver: &Resolver<'_>) -> Result<Resolution> {
    resolver.resolve(name, cache)
}

/// Resolves many names with up to `parallelism` worker threads.
///
/// Names with the same cache key are looked up once. Results come back in
/// input order.
pub fn resolve_all(
    names: &[String],
    cache: &EnrichmentCache,
    resolver: &Resolver<'_>,
    parallelism: usize,
) -> Vec<(String, Result<Resolution>)> {
    let mut unique: Vec<&str> = Vec::new();
    let mut slot_of: HashMap<String, usize> = HashMap::new();
    let slots: Vec<usize> = names
        .iter()
        .map(|n| {
            *slot_of.entry(EnrichmentCache::key(n)).or_insert_with(|| {
                unique.push(n);
                unique.len() - 1
            })
        })
        .collect();

    let next = AtomicUsize::new(0);
    let results: Vec<std::sync::Mutex<Option<Result<Resolution>>>> =
        unique.iter().map(|_| std::sync::Mutex::new(None)).collect();
    let workers = parallelism.clamp(1, unique.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= unique.len() {
                    break;
                }
                let r = resolver.resolve(unique[i], cache);
                *results[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
            });
        }
    });
    let mut results: Vec<Option<Result<Resolution>>> = results
        .into_iter()
        .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()))
        .collect();

    // The first occurrence takes the result; later duplicates re-read the cache.
    let mut taken = vec![false; unique.len()];
    names
        .iter()
        .zip(slots)
        .map(|(name, slot)| {
            let r = if !taken[slot] {
                taken[slot] = true;
                results[slot].take().expect("every slot was resolved")
            } else {
                match cache.get(name) {
                    Some(record) => Ok(Resolution::Resolved {
                        record,
                        source: Source::Cache,
                    }),
                    None => resolver.resolve(name, cache),
                }
            };
            (name.clone(), r)
        })
        .collect()
}
