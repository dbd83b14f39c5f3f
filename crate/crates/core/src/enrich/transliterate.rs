//! Deterministic German-to-ASCII substitution hook used before knowledge-base lookups.

use std::collections::HashMap;

const CHARS: &[(&str, &str)] = &[
    ("ä", "ae"),
    ("ö", "oe"),
    ("ü", "ue"),
    ("Ä", "Ae"),
    ("Ö", "Oe"),
    ("Ü", "Ue"),
    ("ß", "ss"),
    ("ẞ", "SS"),
];

const TERMS: &[(&str, &str)] = &[
    ("Sankt", "Saint"),
    ("St.", "Saint"),
    ("Kaiser", "Emperor"),
    ("Kaiserin", "Empress"),
    ("König", "King"),
    ("Königin", "Queen"),
    ("Erzherzog", "Archduke"),
    ("Erzherzogin", "Archduchess"),
    ("Herzog", "Duke"),
    ("Herzogin", "Duchess"),
    ("Fürst", "Prince"),
    ("Fürstin", "Princess"),
    ("Prinz", "Prince"),
    ("Prinzessin", "Princess"),
    ("Graf", "Count"),
    ("Gräfin", "Countess"),
    ("Freiherr", "Baron"),
    ("Bürgermeister", "Mayor"),
    ("Kardinal", "Cardinal"),
    ("Bischof", "Bishop"),
    ("Pater", "Father"),
    ("Doktor", "Doctor"),
    ("Dr.", "Doctor"),
    ("Professor", "Professor"),
    ("Prof.", "Professor"),
    ("Maler", "Painter"),
    ("Dichter", "Poet"),
    ("General", "General"),
    ("Feldmarschall", "Field Marshal"),
    ("Admiral", "Admiral"),
];

/// Character and whole-word substitutions.
///
/// Words are replaced first, matched exactly against whitespace-separated
/// tokens; character substitutions then apply to the whole result.
#[derive(Debug, Clone)]
pub struct TransliterationTable {
    chars: Vec<(String, String)>,
    terms: HashMap<String, String>,
}

impl TransliterationTable {
    pub fn shipped() -> Self {
        Self::new(
            CHARS.iter().map(|(a, b)| (a.to_string(), b.to_string())),
            TERMS.iter().map(|(a, b)| (a.to_string(), b.to_string())),
        )
    }

    pub fn new(
        chars: impl IntoIterator<Item = (String, String)>,
        terms: impl IntoIterator<Item = (String, String)>,
    ) -> Self {
        TransliterationTable {
            chars: chars.into_iter().collect(),
            terms: terms.into_iter().collect(),
        }
    }

    /// A table with character substitutions only.
    pub fn characters_only() -> Self {
        Self::new(CHARS.iter().map(|(a, b)| (a.to_string(), b.to_string())), [])
    }
}

/// Applies `table` to `name`. Names without mapped characters or words are returned unchanged.
pub fn transliterate_name(name: &str, table: &TransliterationTable) -> String {
    let mut out = String::with_capacity(name.len());
    let mut rest = name;
    while !rest.is_empty() {
        let ws = rest.find(|c: char| !c.is_whitespace()).unwrap_or(rest.len());
        out.push_str(&rest[..ws]);
        rest = &rest[ws..];
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let word = &rest[..end];
        out.push_str(table.terms.get(word).map_or(word, String::as_str));
        rest = &rest[end..];
    }
    for (from, to) in &table.chars {
        if out.contains(from.as_str()) {
            out = out.replace(from.as_str(), to);
        }
    }
    out
}
