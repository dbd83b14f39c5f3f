//! Shared domain types: streets, honorees, cities, decades and occupation groups.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::geometry::{Coord, MultiPolygon};
use crate::text::search_key;

/// Denomination years outside this range are rejected at ingest.
pub const PLAUSIBLE_YEARS: std::ops::RangeInclusive<i32> = 1000..=2100;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

string_id!(
    /// Short identifier of a city (`paris`, `vienna`, ...).
    CityId
);
string_id!(
    /// Identifier of a district within a city.
    DistrictId
);

/// The decade a year falls in, identified by its first year.
///
/// Decades use floor division, so years before year 0 land in the decade
/// below: `Decade::of(-5)` is the decade starting at `-10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Decade(i32);

impl Decade {
    pub fn of(year: i32) -> Self {
        Decade(year.div_euclid(10) * 10)
    }

    /// Builds a decade from its start year; fails unless it is a multiple of 10.
    pub fn from_start(start_year: i32) -> Result<Self> {
        if start_year.rem_euclid(10) != 0 {
            return Err(Error::Invalid(format!(
                "decade start {start_year} is not a multiple of 10"
            )));
        }
        Ok(Decade(start_year))
    }

    pub fn start_year(self) -> i32 {
        self.0
    }

    pub fn next(self) -> Self {
        Decade(self.0 + 10)
    }

    /// Every decade from `self` to `last`, inclusive.
    pub fn through(self, last: Decade) -> impl Iterator<Item = Decade> {
        (self.0..=last.0).step_by(10).map(Decade)
    }
}

impl fmt::Display for Decade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Decade bucketing for a year.
pub fn decade_of(year: i32) -> Decade {
    Decade::of(year)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Unknown,
}

impl Gender {
    /// Parses a gender cell. Blank cells are `Unknown`; unrecognized text is an error.
    pub fn parse(raw: &str) -> Result<Self> {
        match search_key(raw).as_str() {
            "" | "unknown" | "u" | "?" => Ok(Gender::Unknown),
            "female" | "f" | "woman" | "w" => Ok(Gender::Female),
            "male" | "m" | "man" => Ok(Gender::Male),
            other => Err(Error::Invalid(format!("unrecognized gender `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Unknown => "unknown",
        }
    }
}

/// ISCO-derived occupation groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OccupationGroup {
    CreativePerformingArtists,
    AuthorsJournalistsLinguists,
    ScienceEngineering,
    LegalSocialCultural,
    CraftTrades,
    BusinessAdministration,
    Legislators,
    ArmedForcesOfficers,
    Religious,
    HealthAssociate,
    Teaching,
    Other,
}

impl OccupationGroup {
    /// All groups in enum order, which is also the tie-break order for rankings.
    pub const ALL: [OccupationGroup; 12] = [
        OccupationGroup::CreativePerformingArtists,
        OccupationGroup::AuthorsJournalistsLinguists,
        OccupationGroup::ScienceEngineering,
        OccupationGroup::LegalSocialCultural,
        OccupationGroup::CraftTrades,
        OccupationGroup::BusinessAdministration,
        OccupationGroup::Legislators,
        OccupationGroup::ArmedForcesOfficers,
        OccupationGroup::Religious,
        OccupationGroup::HealthAssociate,
        OccupationGroup::Teaching,
        OccupationGroup::Other,
    ];

    pub fn id(self) -> &'static str {
        match self {
            OccupationGroup::CreativePerformingArtists => "creative_performing_artists",
            OccupationGroup::AuthorsJournalistsLinguists => "authors_journalists_linguists",
            OccupationGroup::ScienceEngineering => "science_engineering",
            OccupationGroup::LegalSocialCultural => "legal_social_cultural",
            OccupationGroup::CraftTrades => "craft_trades",
            OccupationGroup::BusinessAdministration => "business_administration",
            OccupationGroup::Legislators => "legislators",
            OccupationGroup::ArmedForcesOfficers => "armed_forces_officers",
            OccupationGroup::Religious => "religious",
            OccupationGroup::HealthAssociate => "health_associate",
            OccupationGroup::Teaching => "teaching",
            OccupationGroup::Other => "other",
        }
    }

    /// Human-readable group name as used in the ISCO-based classification.
    pub fn label(self) -> &'static str {
        match self {
            OccupationGroup::CreativePerformingArtists => "creative and performing artists",
            OccupationGroup::AuthorsJournalistsLinguists => "authors, journalists and linguists",
            OccupationGroup::ScienceEngineering => "science and engineering professionals",
            OccupationGroup::LegalSocialCultural => "legal, social and cultural professionals",
            OccupationGroup::CraftTrades => "craft and related trades workers",
            OccupationGroup::BusinessAdministration => "business and administration professionals",
            OccupationGroup::Legislators => "legislators",
            OccupationGroup::ArmedForcesOfficers => "commissioned armed forces officers",
            OccupationGroup::Religious => "religious",
            OccupationGroup::HealthAssociate => "health associate professionals",
            OccupationGroup::Teaching => "teaching professionals",
            OccupationGroup::Other => "other",
        }
    }
}

impl fmt::Display for OccupationGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for OccupationGroup {
    type Err = Error;

    /// Accepts either the snake-case id or the human-readable label.
    fn from_str(s: &str) -> Result<Self> {
        let key = search_key(s);
        OccupationGroup::ALL
            .into_iter()
            .find(|g| g.id() == key || search_key(g.label()) == key)
            .ok_or_else(|| Error::Invalid(format!("unknown occupation group `{s}`")))
    }
}

/// ISO 3166-1 alpha-2 country code, always upper case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 2]);

impl CountryCode {
    pub fn new(code: &str) -> Result<Self> {
        let bytes = code.trim().as_bytes();
        match bytes {
            [a, b] if a.is_ascii_alphabetic() && b.is_ascii_alphabetic() => Ok(CountryCode([
                a.to_ascii_uppercase(),
                b.to_ascii_uppercase(),
            ])),
            _ => Err(Error::Invalid(format!("`{code}` is not a two-letter country code"))),
        }
    }

    pub fn as_str(&self) -> &str {
        // Both bytes are ASCII letters by construction.
        std::str::from_utf8(&self.0).expect("ascii country code")
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for CountryCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CountryCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CountryCode::new(&s).map_err(serde::de::Error::custom)
    }
}

/// The person a street is named after.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Honoree {
    pub full_name: String,
    pub gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation_raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation_group: Option<OccupationGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country_of_origin: Option<CountryCode>,
    /// Negative for BC.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birth_year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub death_year: Option<i32>,
}

impl Honoree {
    /// An honoree known only by name.
    pub fn named(full_name: impl Into<String>) -> Self {
        Honoree {
            full_name: full_name.into(),
            gender: Gender::Unknown,
            occupation_raw: None,
            occupation_group: None,
            country_of_origin: None,
            birth_year: None,
            death_year: None,
        }
    }

    /// Checks that the lifespan is ordered.
    pub fn validate(&self) -> Result<()> {
        if let (Some(b), Some(d)) = (self.birth_year, self.death_year) {
            if b > d {
                return Err(Error::Invalid(format!(
                    "{}: birth year {b} is after death year {d}",
                    self.full_name
                )));
            }
        }
        Ok(())
    }

    /// Fills every absent field from `other`; fields already present win.
    pub fn fill_from(&mut self, other: &Honoree) {
        if self.gender == Gender::Unknown {
            self.gender = other.gender;
        }
        if self.occupation_raw.is_none() {
            self.occupation_raw.clone_from(&other.occupation_raw);
        }
        if self.occupation_group.is_none() {
            self.occupation_group = other.occupation_group;
        }
        if self.country_of_origin.is_none() {
            self.country_of_origin = other.country_of_origin;
        }
        if self.birth_year.is_none() {
            self.birth_year = other.birth_year;
        }
        if self.death_year.is_none() {
            self.death_year = other.death_year;
        }
    }
}

/// Street geometry in WGS84.
#[derive(Debug, Clone, PartialEq)]
pub enum StreetGeometry {
    Point(Coord),
    LineString(Vec<Coord>),
}

/// One honorific street.
#[derive(Debug, Clone, PartialEq)]
pub struct StreetRecord {
    pub city_id: CityId,
    pub street_name: String,
    pub district_id: Option<DistrictId>,
    pub denomination_year: Option<i32>,
    pub geometry: Option<StreetGeometry>,
    pub honoree: Option<Honoree>,
}

impl StreetRecord {
    pub fn new(city_id: CityId, street_name: impl Into<String>) -> Self {
        StreetRecord {
            city_id,
            street_name: street_name.into(),
            district_id: None,
            denomination_year: None,
            geometry: None,
            honoree: None,
        }
    }

    pub fn search_key(&self) -> String {
        search_key(&self.street_name)
    }

    pub fn denomination_decade(&self) -> Option<Decade> {
        self.denomination_year.map(Decade::of)
    }

    pub fn gender(&self) -> Gender {
        self.honoree.as_ref().map_or(Gender::Unknown, |h| h.gender)
    }
}

/// A city district polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct District {
    pub district_id: DistrictId,
    pub name: String,
    pub polygon: MultiPolygon,
}

/// Per-city analysis settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CityConfig {
    pub city_id: CityId,
    pub display_name: String,
    pub home_country: CountryCode,
    /// First year of the analysis window; compared at decade granularity.
    pub start_decade: i32,
    /// Knowledge-base item for the city area (e.g. `Q90` for Paris).
    pub kb_area: Option<String>,
    pub districts: Vec<District>,
}

impl CityConfig {
    /// The four cities of the original study, without district polygons.
    pub fn shipped() -> Vec<CityConfig> {
        let city = |id: &str, name: &str, country: &str, start: i32, area: &str| CityConfig {
            city_id: CityId::new(id),
            display_name: name.to_owned(),
            home_country: CountryCode::new(country).expect("static country code"),
            start_decade: start,
            kb_area: Some(area.to_owned()),
            districts: Vec::new(),
        };
        vec![
            city("paris", "Paris", "FR", 1860, "Q90"),
            city("vienna", "Vienna", "AT", 1860, "Q1741"),
            city("london", "London", "GB", 1666, "Q84"),
            // Street co-naming started in 1998; decade granularity keeps the 1990s.
            city("new_york", "New York", "US", 1998, "Q60"),
        ]
    }

    pub fn shipped_city(id: &str) -> Option<CityConfig> {
        Self::shipped().into_iter().find(|c| c.city_id.as_str() == id)
    }

    pub fn start(&self) -> Decade {
        Decade::of(self.start_decade)
    }
}

/// Metric families, each with its own field requirements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Gender,
    Foreigner,
    Fhd,
    Occupation,
}

/// True if the record has every field `metric` needs.
pub fn is_countable(record: &StreetRecord, metric: Metric) -> bool {
    let Some(h) = &record.honoree else {
        return false;
    };
    match metric {
        Metric::Gender => h.gender != Gender::Unknown,
        Metric::Foreigner => h.country_of_origin.is_some(),
        Metric::Fhd => h.birth_year.is_some() && h.death_year.is_some(),
        Metric::Occupation => h.occupation_group.is_some(),
    }
}
