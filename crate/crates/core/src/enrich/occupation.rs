//! Raw occupation labels to ISCO-derived groups.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::OccupationGroup;
use crate::text::{search_key, tokens};

const SHIPPED: &str = include_str!("../../assets/occupation_lexicon.csv");

#[derive(Debug, Clone)]
struct Entry {
    tokens: Vec<String>,
    chars: usize,
    group: OccupationGroup,
}

/// Curated `raw_label -> group` table.
///
/// Every group's own label and id are always present, so mapping a group's
/// canonical name returns that group.
#[derive(Debug, Clone)]
pub struct OccupationLexicon {
    exact: HashMap<String, OccupationGroup>,
    entries: Vec<Entry>,
}

impl OccupationLexicon {
    pub fn shipped() -> Self {
        Self::from_csv(SHIPPED).expect("bundled lexicon is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }

    /// Parses `raw_label,group` CSV with a header row.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut pairs = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| Error::Csv {
                path: "<lexicon>".into(),
                source: e,
            })?;
            let (Some(label), Some(group)) = (row.get(0), row.get(1)) else {
                return Err(Error::Invalid(format!("lexicon row {row:?} needs two columns")));
            };
            pairs.push((label.to_owned(), group.parse::<OccupationGroup>()?));
        }
        for g in OccupationGroup::ALL {
            pairs.push((g.label().to_owned(), g));
            pairs.push((g.id().replace('_', " "), g));
        }
        let mut exact = HashMap::new();
        let mut entries = Vec::new();
        for (label, group) in pairs {
            let key = search_key(&label);
            if key.is_empty() {
                continue;
            }
            let toks: Vec<String> = tokens(&key).into_iter().map(str::to_owned).collect();
            exact.entry(key.clone()).or_insert(group);
            if !toks.is_empty() {
                entries.push(Entry {
                    chars: key.chars().count(),
                    tokens: toks,
                    group,
                });
            }
        }
        Ok(OccupationLexicon { exact, entries })
    }

    pub fn len(&self) -> usize {
        self.exact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exact.is_empty()
    }

    /// Longest lexicon phrase found in the label, if any.
    fn lookup(&self, raw_label: &str) -> Option<OccupationGroup> {
        let key = search_key(raw_label);
        if let Some(g) = self.exact.get(&key) {
            return Some(*g);
        }
        let label_tokens = tokens(&key);
        let mut best: Option<(usize, usize, std::cmp::Reverse<usize>, std::cmp::Reverse<OccupationGroup>)> = None;
        for e in &self.entries {
            if let Some(pos) = find_phrase(&label_tokens, &e.tokens) {
                let score = (e.tokens.len(), e.chars, std::cmp::Reverse(pos), std::cmp::Reverse(e.group));
                if best.is_none_or(|b| score > b) {
                    best = Some(score);
                }
            }
        }
        best.map(|(_, _, _, std::cmp::Reverse(g))| g)
    }
}

/// Position of `phrase` as a contiguous run in `label`; a label token may
/// carry a plural `s` or `es` suffix.
fn find_phrase(label: &[&str], phrase: &[String]) -> Option<usize> {
    if phrase.len() > label.len() {
        return None;
    }
    (0..=label.len() - phrase.len()).find(|&start| {
        phrase.iter().zip(&label[start..]).all(|(p, l)| {
            *l == p || l.strip_suffix('s').is_some_and(|s| s == p) || l.strip_suffix("es").is_some_and(|s| s == p)
        })
    })
}

/// Maps a raw occupation label to its group; unmatched labels map to `Other`.
pub fn map_occupation(raw_label: &str, lexicon: &OccupationLexicon) -> OccupationGroup {
    lexicon.lookup(raw_label).unwrap_or(OccupationGroup::Other)
}

/// Labels that fell through to `Other`, with how often each was seen.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UnmatchedLabels(pub BTreeMap<String, usize>);

impl UnmatchedLabels {
    /// Like [`map_occupation`], recording misses.
    pub fn map(&mut self, raw_label: &str, lexicon: &OccupationLexicon) -> OccupationGroup {
        match lexicon.lookup(raw_label) {
            Some(g) => g,
            None => {
                *self.0.entry(raw_label.trim().to_owned()).or_default() += 1;
                OccupationGroup::Other
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use OccupationGroup::*;

    #[test]
    fn lexicon_examples() {
        let lex = OccupationLexicon::shipped();
        assert!(lex.len() > 300);
        assert_eq!(map_occupation("bishop", &lex), Religious);
        assert_eq!(map_occupation("Archbishops", &lex), Religious);
        assert_eq!(map_occupation("creative and performing artists", &lex), CreativePerformingArtists);
        assert_eq!(map_occupation("poet and playwright", &lex), AuthorsJournalistsLinguists);
        assert_eq!(map_occupation("French Army general", &lex), ArmedForcesOfficers);
        assert_eq!(map_occupation("general practitioner", &lex), HealthAssociate);
        assert_eq!(map_occupation("Écrivain", &lex), AuthorsJournalistsLinguists);
        assert_eq!(map_occupation("Komponistin", &lex), CreativePerformingArtists);
    }

    #[test]
    fn longest_phrase_wins() {
        let lex = OccupationLexicon::from_csv("raw_label,group\nminister,legislators\nminister of religion,religious\n").unwrap();
        assert_eq!(map_occupation("Lutheran minister of religion", &lex), Religious);
        assert_eq!(map_occupation("finance minister", &lex), Legislators);
    }

    #[test]
    fn every_group_maps_to_itself() {
        let lex = OccupationLexicon::shipped();
        for g in OccupationGroup::ALL {
            assert_eq!(map_occupation(g.label(), &lex), g);
            assert_eq!(map_occupation(g.id(), &lex), g);
        }
    }

    #[test]
    fn unmatched_labels_are_reported() {
        let lex = OccupationLexicon::shipped();
        let mut misses = UnmatchedLabels::default();
        assert_eq!(misses.map("xylographic hermeneut", &lex), Other);
        assert_eq!(misses.map("xylographic hermeneut", &lex), Other);
        assert_eq!(misses.map("painter", &lex), CreativePerformingArtists);
        assert_eq!(misses.0.get("xylographic hermeneut"), Some(&2));
        assert_eq!(misses.0.len(), 1);
    }

    #[test]
    fn bad_group_is_rejected() {
        assert!(OccupationLexicon::from_csv("raw_label,group\nwizard,sorcery\n").is_err());
    }
}
