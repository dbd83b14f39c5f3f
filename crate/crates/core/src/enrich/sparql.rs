//! Query text and SPARQL JSON result parsing.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::country::CountryAliases;
use crate::error::{Error, Result};
use crate::model::{Gender, Honoree};

use super::occupation::{map_occupation, OccupationLexicon};

pub const FEMALE: &str = "Q6581072";
pub const MALE: &str = "Q6581097";
/// Knowledge-base class for streets.
pub const STREET_CLASS: &str = "Q79007";
/// Knowledge-base class for humans.
pub const HUMAN_CLASS: &str = "Q5";

#[derive(Debug, Clone, Deserialize)]
pub struct Term {
    #[serde(rename = "type")]
    pub kind: String,
    pub value: String,
    #[serde(default)]
    pub datatype: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct Results {
    bindings: Vec<BTreeMap<String, Term>>,
}

#[derive(Debug, Clone, Deserialize)]
struct ResultSet {
    results: Results,
}

/// Rows of a SPARQL JSON result set.
pub fn parse_bindings(body: &str) -> Result<Vec<BTreeMap<String, Term>>> {
    serde_json::from_str::<ResultSet>(body)
        .map(|r| r.results.bindings)
        .map_err(|e| {
            log::error!("malformed SPARQL response: {e}; payload: {body}");
            Error::MalformedResponse {
                message: e.to_string(),
                payload: body.to_owned(),
            }
        })
}

/// Trailing path segment of an entity IRI, or the value itself.
pub fn entity_id(value: &str) -> &str {
    value.rsplit('/').next().unwrap_or(value)
}

/// Leading signed integer of an xsd date/dateTime literal, e.g. `-0044-03-15T00:00:00Z` gives -44.
pub fn leading_year(value: &str) -> Option<i32> {
    let v = value.trim();
    let (sign, digits) = match v.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, v.strip_prefix('+').unwrap_or(v)),
    };
    let end = digits.find(|c: char| !c.is_ascii_digit()).unwrap_or(digits.len());
    if end == 0 {
        return None;
    }
    digits[..end].parse::<i32>().ok().map(|y| sign * y)
}

pub fn gender_from_iri(value: &str) -> Gender {
    match entity_id(value) {
        FEMALE => Gender::Female,
        MALE => Gender::Male,
        _ => Gender::Unknown,
    }
}

/// Escapes a string for a double-quoted SPARQL literal.
pub fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

fn valid_entity_id(id: &str) -> Result<&str> {
    let ok = id.len() > 1 && id.starts_with('Q') && id[1..].bytes().all(|b| b.is_ascii_digit());
    if ok {
        Ok(id)
    } else {
        Err(Error::Invalid(format!("`{id}` is not a knowledge-base item id")))
    }
}

/// Streets located in `area` that carry a named-after relation.
pub fn named_after_query(area: &str, language: &str) -> Result<String> {
    let area = valid_entity_id(area)?;
    Ok(format!(
        "SELECT DISTINCT ?street ?streetLabel ?eponym ?eponymLabel ?isPerson WHERE {{\n\
         \x20 ?street wdt:P31/wdt:P279* wd:{STREET_CLASS} ;\n\
         \x20         wdt:P131* wd:{area} ;\n\
         \x20         wdt:P138 ?eponym .\n\
         \x20 BIND(EXISTS {{ ?eponym wdt:P31 wd:{HUMAN_CLASS} }} AS ?isPerson)\n\
         \x20 SERVICE wikibase:label {{ bd:serviceParam wikibase:language \"{language},en\". }}\n\
         }}\n\
         ORDER BY ?street ?eponym\n",
        language = escape_literal(language),
    ))
}

/// How to select the person in [`person_query`].
#[derive(Debug, Clone, Copy)]
pub enum PersonSelector<'a> {
    Label { name: &'a str, language: &'a str },
    Entity(&'a str),
}

/// Biographical fields of humans matching `selector`.
pub fn person_query(selector: PersonSelector<'_>) -> Result<String> {
    let select = match selector {
        PersonSelector::Label { name, language } => format!(
            "  ?person rdfs:label \"{}\"@{} ;\n          wdt:P31 wd:{HUMAN_CLASS} .\n",
            escape_literal(name),
            escape_literal(language)
        ),
        PersonSelector::Entity(id) => format!(
            "  VALUES ?person {{ wd:{} }}\n  ?person wdt:P31 wd:{HUMAN_CLASS} .\n",
            valid_entity_id(id)?
        ),
    };
    Ok(format!(
        "SELECT ?person ?personLabel ?gender ?occupationLabel ?birth ?death ?countryLabel WHERE {{\n\
         {select}\
         \x20 OPTIONAL {{ ?person wdt:P21 ?gender . }}\n\
         \x20 OPTIONAL {{ ?person wdt:P106 ?occupation . }}\n\
         \x20 OPTIONAL {{ ?person wdt:P569 ?birth . }}\n\
         \x20 OPTIONAL {{ ?person wdt:P570 ?death . }}\n\
         \x20 OPTIONAL {{ ?person wdt:P27 ?country . }}\n\
         \x20 SERVICE wikibase:label {{ bd:serviceParam wikibase:language \"en\". }}\n\
         }}\n\
         ORDER BY ?person\n"
    ))
}

/// One street and one of its eponyms, as returned by the named-after query.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedAfterRow {
    pub street_id: String,
    pub street_label: String,
    pub eponym_id: String,
    pub eponym_label: String,
    pub is_person: bool,
}

pub fn parse_named_after(body: &str) -> Result<Vec<NamedAfterRow>> {
    let bindings = parse_bindings(body)?;
    let mut rows = Vec::with_capacity(bindings.len());
    for (i, b) in bindings.iter().enumerate() {
        let get = |var: &str| {
            b.get(var).map(|t| t.value.as_str()).ok_or_else(|| Error::MalformedResponse {
                message: format!("bindings[{i}] lacks ?{var}"),
                payload: body.to_owned(),
            })
        };
        let street = get("street")?;
        let eponym = get("eponym")?;
        let is_person = match b.get("isPerson").map(|t| t.value.as_str()) {
            Some("true") | Some("1") => true,
            Some("false") | Some("0") | None => false,
            Some(other) => {
                return Err(Error::MalformedResponse {
                    message: format!("bindings[{i}].isPerson is not a boolean: {other}"),
                    payload: body.to_owned(),
                })
            }
        };
        rows.push(NamedAfterRow {
            street_id: entity_id(street).to_owned(),
            street_label: b.get("streetLabel").map_or(entity_id(street), |t| &t.value).to_owned(),
            eponym_id: entity_id(eponym).to_owned(),
            eponym_label: b.get("eponymLabel").map_or(entity_id(eponym), |t| &t.value).to_owned(),
            is_person,
        });
    }
    Ok(rows)
}

/// A person entity found by [`person_query`], with its first parsed fields.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonRecord {
    pub entity_id: String,
    pub label: String,
    pub honoree: Honoree,
    /// Honoree field name to the binding it was read from, e.g. `bindings[0].birth`.
    pub provenance: BTreeMap<String, String>,
}

/// Groups person-query rows by entity, in first-seen order.
///
/// Each field takes the first row that yields a parseable value. Country
/// labels that the alias table cannot resolve are skipped, not guessed.
pub fn parse_persons(
    body: &str,
    display_name: &str,
    lexicon: &OccupationLexicon,
    aliases: &CountryAliases,
) -> Result<Vec<PersonRecord>> {
    let bindings = parse_bindings(body)?;
    let mut people: Vec<PersonRecord> = Vec::new();
    for (i, b) in bindings.iter().enumerate() {
        let Some(person) = b.get("person") else {
            return Err(Error::MalformedResponse {
                message: format!("bindings[{i}] lacks ?person"),
                payload: body.to_owned(),
            });
        };
        let id = entity_id(&person.value).to_owned();
        let idx = match people.iter().position(|p| p.entity_id == id) {
            Some(idx) => idx,
            None => {
                people.push(PersonRecord {
                    label: b.get("personLabel").map_or(id.clone(), |t| t.value.clone()),
                    entity_id: id,
                    honoree: Honoree::named(display_name),
                    provenance: BTreeMap::new(),
                });
                people.len() - 1
            }
        };
        let p = &mut people[idx];
        let here = |var: &str| format!("bindings[{i}].{var}");
        if p.honoree.gender == Gender::Unknown {
            if let Some(t) = b.get("gender") {
                let g = gender_from_iri(&t.value);
                if g != Gender::Unknown {
                    p.honoree.gender = g;
                    p.provenance.insert("gender".into(), here("gender"));
                }
            }
        }
        if p.honoree.occupation_raw.is_none() {
            if let Some(t) = b.get("occupationLabel").filter(|t| t.kind == "literal" && !t.value.trim().is_empty()) {
                p.honoree.occupation_raw = Some(t.value.clone());
                p.honoree.occupation_group = Some(map_occupation(&t.value, lexicon));
                p.provenance.insert("occupation_raw".into(), here("occupationLabel"));
                p.provenance.insert("occupation_group".into(), here("occupationLabel"));
            }
        }
        for (var, field) in [("birth", "birth_year"), ("death", "death_year")] {
            let slot = if var == "birth" {
                &mut p.honoree.birth_year
            } else {
                &mut p.honoree.death_year
            };
            if slot.is_none() {
                if let Some(year) = b.get(var).filter(|t| t.kind == "literal").and_then(|t| leading_year(&t.value)) {
                    *slot = Some(year);
                    p.provenance.insert(field.into(), here(var));
                }
            }
        }
        if p.honoree.country_of_origin.is_none() {
            if let Some(code) = b.get("countryLabel").and_then(|t| aliases.normalize(&t.value)) {
                p.honoree.country_of_origin = Some(code);
                p.provenance.insert("country_of_origin".into(), here("countryLabel"));
            }
        }
    }
    Ok(people)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn years_are_leading_signed_integers() {
        assert_eq!(leading_year("1913-02-04T00:00:00Z"), Some(1913));
        assert_eq!(leading_year("-0044-03-15T00:00:00Z"), Some(-44));
        assert_eq!(leading_year("+1800-01-01"), Some(1800));
        assert_eq!(leading_year("t123456"), None);
        assert_eq!(leading_year(""), None);
    }

    #[test]
    fn gender_iris() {
        assert_eq!(gender_from_iri("http://www.wikidata.org/entity/Q6581072"), Gender::Female);
        assert_eq!(gender_from_iri("http://www.wikidata.org/entity/Q6581097"), Gender::Male);
        assert_eq!(gender_from_iri("http://www.wikidata.org/entity/Q48270"), Gender::Unknown);
    }

    #[test]
    fn queries_reject_injection() {
        assert!(named_after_query("Q90 } DROP", "fr").is_err());
        let q = person_query(PersonSelector::Label {
            name: "O\"Brien",
            language: "en",
        })
        .unwrap();
        assert!(q.contains("\"O\\\"Brien\"@en"));
        assert!(person_query(PersonSelector::Entity("Q41921")).unwrap().contains("wd:Q41921"));
    }

    #[test]
    fn malformed_body_keeps_payload() {
        match parse_bindings("{\"head\":{}}") {
            Err(Error::MalformedResponse { payload, .. }) => assert_eq!(payload, "{\"head\":{}}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
