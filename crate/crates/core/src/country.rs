//! Country name and historical polity normalization to ISO 3166-1 alpha-2.

use std::collections::HashMap;

use crate::model::CountryCode;
use crate::text::search_key;

const SHIPPED: &str = include_str!("../assets/country_aliases.csv");

/// Lookup from country names (modern or historical) to alpha-2 codes.
#[derive(Debug, Clone)]
pub struct CountryAliases {
    by_key: HashMap<String, CountryCode>,
}

impl CountryAliases {
    /// The alias table bundled with the crate.
    pub fn shipped() -> Self {
        Self::from_csv(SHIPPED).expect("bundled alias table is valid")
    }

    /// Parses an `alias,code` table with a header row.
    pub fn from_csv(text: &str) -> crate::Result<Self> {
        let mut by_key = HashMap::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (alias, code) = line.rsplit_once(',').ok_or_else(|| {
                crate::Error::Invalid(format!("country alias line {}: expected `alias,code`", i + 1))
            })?;
            by_key.insert(search_key(alias), CountryCode::new(code)?);
        }
        Ok(CountryAliases { by_key })
    }

    /// Resolves a name or a two-letter code. Unknown names give `None`.
    pub fn normalize(&self, raw: &str) -> Option<CountryCode> {
        let key = search_key(raw.trim());
        if key.is_empty() {
            return None;
        }
        if let Some(code) = self.by_key.get(&key) {
            return Some(*code);
        }
        if key.len() == 2 {
            return CountryCode::new(&key).ok();
        }
        None
    }
}
