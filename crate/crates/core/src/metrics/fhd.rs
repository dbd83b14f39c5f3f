//! Focus on historical decade: how many honorees were alive in each decade.

use std::collections::BTreeMap;

use crate::model::{is_countable, CityId, Decade, Metric, StreetRecord};

use super::{DecadeSeries, SeriesKind};

/// FHD series plus the records that could not contribute.
#[derive(Debug, Clone, PartialEq)]
pub struct FhdResult {
    pub series: DecadeSeries,
    /// Records without both birth and death years.
    pub excluded_missing_years: usize,
    /// Streets whose honoree has a birth year after the death year.
    pub skipped_reversed: Vec<String>,
}

/// Counts, for every decade, the honorees whose lifespan touches it.
///
/// Each countable street adds one to every decade from its honoree's birth
/// decade through the death decade. The series spans the lowest to highest
/// touched decade with explicit zeros in between.
pub fn fhd(city_id: &CityId, records: &[StreetRecord]) -> FhdResult {
    let mut counts: BTreeMap<Decade, u64> = BTreeMap::new();
    let mut excluded = 0;
    let mut skipped = Vec::new();
    for rec in records {
        if !is_countable(rec, Metric::Fhd) {
            excluded += 1;
            continue;
        }
        let h = rec.honoree.as_ref().expect("countable implies honoree");
        let (birth, death) = (h.birth_year.unwrap(), h.death_year.unwrap());
        if birth > death {
            skipped.push(rec.street_name.clone());
            continue;
        }
        for d in Decade::of(birth).through(Decade::of(death)) {
            *counts.entry(d).or_default() += 1;
        }
    }
    let mut values = BTreeMap::new();
    if let (Some((&lo, _)), Some((&hi, _))) = (counts.first_key_value(), counts.last_key_value()) {
        for d in lo.through(hi) {
            values.insert(d, counts.get(&d).copied().unwrap_or(0) as f64);
        }
    }
    FhdResult {
        series: DecadeSeries {
            metric_id: "fhd".into(),
            city_id: city_id.clone(),
            kind: SeriesKind::Count,
            values,
            ratios: BTreeMap::new(),
        },
        excluded_missing_years: excluded,
        skipped_reversed: skipped,
    }
}

impl FhdResult {
    /// Decade with the highest count; the earliest wins ties.
    pub fn peak_decade(&self) -> Option<Decade> {
        let mut best: Option<(Decade, f64)> = None;
        for (&d, &v) in &self.series.values {
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((d, v));
            }
        }
        best.map(|(d, _)| d)
    }

    /// Share of the total FHD mass in decades at or after `from`.
    pub fn mass_from(&self, from: Decade) -> Option<f64> {
        let total: f64 = self.series.values.values().sum();
        if total == 0.0 {
            return None;
        }
        let tail: f64 = self.series.values.range(from..).map(|(_, v)| v).sum();
        Some(tail / total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Honoree;

    fn rec(name: &str, birth: Option<i32>, death: Option<i32>) -> StreetRecord {
        let mut r = StreetRecord::new(CityId::new("c"), name);
        let mut h = Honoree::named(name);
        h.birth_year = birth;
        h.death_year = death;
        r.honoree = Some(h);
        r
    }

    fn as_pairs(res: &FhdResult) -> Vec<(i32, f64)> {
        res.series.values.iter().map(|(d, v)| (d.start_year(), *v)).collect()
    }

    #[test]
    fn single_decade_lifespan() {
        let res = fhd(&CityId::new("c"), &[rec("a", Some(1850), Some(1850))]);
        assert_eq!(as_pairs(&res), vec![(1850, 1.0)]);
    }

    #[test]
    fn overlapping_lifespans() {
        let res = fhd(
            &CityId::new("c"),
            &[rec("a", Some(1855), Some(1872)), rec("b", Some(1869), Some(1901))],
        );
        assert_eq!(
            as_pairs(&res),
            vec![(1850, 1.0), (1860, 2.0), (1870, 2.0), (1880, 1.0), (1890, 1.0), (1900, 1.0)]
        );
        assert_eq!(res.peak_decade().unwrap().start_year(), 1860);
    }

    #[test]
    fn gaps_are_explicit_zeros_and_bad_records_reported() {
        let res = fhd(
            &CityId::new("c"),
            &[
                rec("a", Some(-60), Some(-44)),
                rec("b", Some(-15), Some(-11)),
                rec("c", Some(1900), None),
                rec("d", Some(1950), Some(1900)),
            ],
        );
        assert_eq!(as_pairs(&res), vec![(-60, 1.0), (-50, 1.0), (-40, 0.0), (-30, 0.0), (-20, 1.0)]);
        assert_eq!(res.excluded_missing_years, 1);
        assert_eq!(res.skipped_reversed, vec!["d".to_string()]);
    }

    #[test]
    fn mass_from_decade() {
        let res = fhd(
            &CityId::new("c"),
            &[rec("a", Some(1940), Some(1959)), rec("b", Some(1960), Some(1965))],
        );
        // 1940, 1950, 1960 -> mass from 1950 is 2/3.
        assert!((res.mass_from(Decade::of(1950)).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }
}
