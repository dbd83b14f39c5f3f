//! Gender, foreigner, denomination, FHD and occupation metrics.
//!
//! Proportions are kept as exact integer ratios ([`Ratio`]) so that district
//! shares sum to the city share without rounding, and so that an empty
//! denominator ("no streets") stays distinguishable from a zero numerator
//! ("no women").

mod fhd;
mod kendall;
mod ranking;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::{is_countable, CityConfig, CityId, CountryCode, Decade, DistrictId, Gender, Metric, StreetRecord};

pub use fhd::{fhd, FhdResult};
pub use kendall::kendall_tau;
pub use ranking::{
    half_century_stability, occupation_ranking, OccupationRanking, RankedGroup, RankingMode, Stability,
    HALF_CENTURIES,
};

/// `numerator / denominator` over street counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Ratio { numerator, denominator }
    }

    /// `None` when the denominator is zero.
    pub fn value(self) -> Option<f64> {
        (self.denominator > 0).then(|| self.numerator as f64 / self.denominator as f64)
    }

    pub fn is_undefined(self) -> bool {
        self.denominator == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Count,
    Proportion,
}

/// Metric values keyed by decade, in increasing decade order.
///
/// Count series fill gaps between the first and last decade with zeros.
/// Proportion series leave decades without streets out entirely.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecadeSeries {
    pub metric_id: String,
    pub city_id: CityId,
    pub kind: SeriesKind,
    pub values: BTreeMap<Decade, f64>,
    /// The exact ratio behind each proportion value; empty for count series.
    pub ratios: BTreeMap<Decade, Ratio>,
}

impl DecadeSeries {
    fn from_ratios(metric_id: &str, city_id: &CityId, ratios: BTreeMap<Decade, Ratio>) -> Self {
        DecadeSeries {
            metric_id: metric_id.to_owned(),
            city_id: city_id.clone(),
            kind: SeriesKind::Proportion,
            values: ratios
                .iter()
                .filter_map(|(d, r)| r.value().map(|v| (*d, v)))
                .collect(),
            ratios: ratios.into_iter().filter(|(_, r)| !r.is_undefined()).collect(),
        }
    }

    /// Decade holding the largest value; the earliest wins ties.
    pub fn peak(&self) -> Option<(Decade, f64)> {
        let mut best: Option<(Decade, f64)> = None;
        for (&d, &v) in &self.values {
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((d, v));
            }
        }
        best
    }
}

/// Per-district values of a metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistrictMetric {
    pub metric_id: String,
    pub city_id: CityId,
    pub values: BTreeMap<DistrictId, f64>,
    /// Exact ratios when the metric was computed from records.
    pub ratios: BTreeMap<DistrictId, Ratio>,
}

impl DistrictMetric {
    pub fn from_values(
        metric_id: &str,
        city_id: CityId,
        values: impl IntoIterator<Item = (DistrictId, f64)>,
    ) -> Self {
        DistrictMetric {
            metric_id: metric_id.to_owned(),
            city_id,
            values: values.into_iter().collect(),
            ratios: BTreeMap::new(),
        }
    }

    fn from_ratios(metric_id: &str, city_id: &CityId, ratios: BTreeMap<DistrictId, Ratio>) -> Self {
        DistrictMetric {
            metric_id: metric_id.to_owned(),
            city_id: city_id.clone(),
            values: ratios.iter().map(|(d, r)| (d.clone(), r.value().unwrap_or(0.0))).collect(),
            ratios,
        }
    }

    pub fn value(&self, district: &DistrictId) -> Option<f64> {
        self.values.get(district).copied()
    }
}

/// How the foreigner-by-decade numerator is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForeignerFormula {
    /// Foreigner streets denominated in the decade over all streets in the decade.
    #[default]
    WithinDecade,
    /// All foreigner streets in the city over streets denominated in the decade,
    /// exactly as the formula is printed. Values can exceed 1.
    Literal,
}

/// Denominator for district shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistrictNormalization {
    /// Divide by the whole city's countable streets; district values sum to the city share.
    #[default]
    CityTotal,
    /// Divide by the district's own countable streets.
    WithinDistrict,
}

fn is_female(r: &StreetRecord) -> bool {
    r.gender() == Gender::Female
}

fn is_foreign(home: CountryCode) -> impl Fn(&StreetRecord) -> bool {
    move |r| {
        r.honoree
            .as_ref()
            .and_then(|h| h.country_of_origin)
            .is_some_and(|c| c != home)
    }
}

fn count_ratio<'a>(
    records: impl Iterator<Item = &'a StreetRecord>,
    hit: impl Fn(&StreetRecord) -> bool,
) -> Ratio {
    let mut r = Ratio::default();
    for rec in records {
        r.denominator += 1;
        if hit(rec) {
            r.numerator += 1;
        }
    }
    r
}

fn countable(records: &[StreetRecord], metric: Metric) -> impl Iterator<Item = &StreetRecord> {
    records.iter().filter(move |r| is_countable(r, metric))
}

fn in_decade(decade: Decade) -> impl Fn(&&StreetRecord) -> bool {
    move |r| r.denomination_decade() == Some(decade)
}

/// Female streets denominated in `decade` over all gender-resolved streets
/// denominated in `decade`.
pub fn f_prop_by_decade(records: &[StreetRecord], decade: Decade) -> Ratio {
    count_ratio(countable(records, Metric::Gender).filter(in_decade(decade)), is_female)
}

/// Female streets in `district` over all gender-resolved streets in the city.
pub fn f_prop_by_district(records: &[StreetRecord], district: &DistrictId) -> Ratio {
    district_ratio(records, Metric::Gender, district, DistrictNormalization::CityTotal, is_female)
}

/// Foreigner share of streets denominated in `decade`.
pub fn for_prop_by_decade(
    records: &[StreetRecord],
    home: CountryCode,
    decade: Decade,
    formula: ForeignerFormula,
) -> Ratio {
    let in_dec = count_ratio(countable(records, Metric::Foreigner).filter(in_decade(decade)), is_foreign(home));
    match formula {
        ForeignerFormula::WithinDecade => in_dec,
        ForeignerFormula::Literal => {
            let all_foreign = countable(records, Metric::Foreigner).filter(|r| is_foreign(home)(r)).count();
            Ratio::new(all_foreign as u64, in_dec.denominator)
        }
    }
}

/// Foreigner streets in `district` over all country-resolved streets in the city.
pub fn for_prop_by_district(records: &[StreetRecord], home: CountryCode, district: &DistrictId) -> Ratio {
    district_ratio(records, Metric::Foreigner, district, DistrictNormalization::CityTotal, is_foreign(home))
}

fn district_ratio(
    records: &[StreetRecord],
    metric: Metric,
    district: &DistrictId,
    norm: DistrictNormalization,
    hit: impl Fn(&StreetRecord) -> bool,
) -> Ratio {
    let in_district = |r: &&StreetRecord| r.district_id.as_ref() == Some(district);
    let numerator = countable(records, metric).filter(in_district).filter(|r| hit(r)).count() as u64;
    let denominator = match norm {
        DistrictNormalization::CityTotal => countable(records, metric).count(),
        DistrictNormalization::WithinDistrict => countable(records, metric).filter(in_district).count(),
    } as u64;
    Ratio::new(numerator, denominator)
}

/// Female share over every gender-resolved street, all decades pooled.
pub fn pooled_f_prop(records: &[StreetRecord]) -> Ratio {
    count_ratio(countable(records, Metric::Gender), is_female)
}

/// Foreigner share over every country-resolved street, all decades pooled.
pub fn pooled_for_prop(records: &[StreetRecord], home: CountryCode) -> Ratio {
    count_ratio(countable(records, Metric::Foreigner), is_foreign(home))
}

fn dated_decades(records: &[StreetRecord], metric: Metric) -> Vec<Decade> {
    let mut v: Vec<Decade> = countable(records, metric)
        .filter_map(StreetRecord::denomination_decade)
        .collect();
    v.sort();
    v.dedup();
    v
}

/// Female proportion for every decade with at least one gender-resolved street.
pub fn f_prop_series(city_id: &CityId, records: &[StreetRecord]) -> DecadeSeries {
    let ratios = dated_decades(records, Metric::Gender)
        .into_iter()
        .map(|d| (d, f_prop_by_decade(records, d)))
        .collect();
    DecadeSeries::from_ratios("f_prop_decade", city_id, ratios)
}

/// Foreigner proportion for every decade with at least one country-resolved street.
pub fn for_prop_series(
    city_id: &CityId,
    records: &[StreetRecord],
    home: CountryCode,
    formula: ForeignerFormula,
) -> DecadeSeries {
    let ratios = dated_decades(records, Metric::Foreigner)
        .into_iter()
        .map(|d| (d, for_prop_by_decade(records, home, d, formula)))
        .collect();
    let id = match formula {
        ForeignerFormula::WithinDecade => "for_prop_decade",
        ForeignerFormula::Literal => "for_prop_decade_literal",
    };
    DecadeSeries::from_ratios(id, city_id, ratios)
}

/// District shares of female streets for every listed district.
pub fn f_prop_districts(
    city_id: &CityId,
    records: &[StreetRecord],
    districts: &[DistrictId],
    norm: DistrictNormalization,
) -> DistrictMetric {
    let ratios = districts
        .iter()
        .map(|d| (d.clone(), district_ratio(records, Metric::Gender, d, norm, is_female)))
        .collect();
    DistrictMetric::from_ratios(district_metric_id("f_prop_district", norm), city_id, ratios)
}

/// District shares of foreigner streets for every listed district.
pub fn for_prop_districts(
    city_id: &CityId,
    records: &[StreetRecord],
    home: CountryCode,
    districts: &[DistrictId],
    norm: DistrictNormalization,
) -> DistrictMetric {
    let ratios = districts
        .iter()
        .map(|d| (d.clone(), district_ratio(records, Metric::Foreigner, d, norm, is_foreign(home))))
        .collect();
    DistrictMetric::from_ratios(district_metric_id("for_prop_district", norm), city_id, ratios)
}

fn district_metric_id(base: &'static str, norm: DistrictNormalization) -> &'static str {
    match (base, norm) {
        (_, DistrictNormalization::CityTotal) => base,
        ("f_prop_district", DistrictNormalization::WithinDistrict) => "f_prop_district_within",
        (_, DistrictNormalization::WithinDistrict) => "for_prop_district_within",
    }
}

/// Fraction of dated streets (re)named in each decade. Sums to 1.
pub fn denominations_by_decade(city_id: &CityId, records: &[StreetRecord]) -> DecadeSeries {
    let mut counts: BTreeMap<Decade, u64> = BTreeMap::new();
    for d in records.iter().filter_map(StreetRecord::denomination_decade) {
        *counts.entry(d).or_default() += 1;
    }
    let total: u64 = counts.values().sum();
    let mut ratios = BTreeMap::new();
    if let (Some((&lo, _)), Some((&hi, _))) = (counts.first_key_value(), counts.last_key_value()) {
        for d in lo.through(hi) {
            ratios.insert(d, Ratio::new(counts.get(&d).copied().unwrap_or(0), total));
        }
    }
    DecadeSeries::from_ratios("denominations_decade", city_id, ratios)
}

/// Drops streets denominated before the city's start decade.
///
/// The comparison is by decade: a 1998 start keeps streets from 1990 on.
/// Undated streets are kept; decade-indexed metrics ignore them anyway.
pub fn apply_start_decade(records: &[StreetRecord], city: &CityConfig) -> Vec<StreetRecord> {
    let start = city.start();
    records
        .iter()
        .filter(|r| r.denomination_decade().is_none_or(|d| d >= start))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Honoree;

    fn street(year: Option<i32>, district: &str, gender: Gender, country: Option<&str>) -> StreetRecord {
        let mut r = StreetRecord::new(CityId::new("c"), "s");
        r.denomination_year = year;
        r.district_id = (!district.is_empty()).then(|| DistrictId::new(district));
        let mut h = Honoree::named("p");
        h.gender = gender;
        h.country_of_origin = country.map(|c| CountryCode::new(c).unwrap());
        r.honoree = Some(h);
        r
    }

    #[test]
    fn f_prop_decade_fixture() {
        let mut recs: Vec<_> = (0..3).map(|_| street(Some(1903), "a", Gender::Male, None)).collect();
        recs.extend((0..2).map(|_| street(Some(1907), "a", Gender::Female, None)));
        recs.push(street(Some(1905), "a", Gender::Unknown, None));
        assert_eq!(f_prop_by_decade(&recs, Decade::of(1900)), Ratio::new(2, 5));
        assert_eq!(f_prop_by_decade(&recs, Decade::of(1900)).value(), Some(0.4));
        assert_eq!(f_prop_by_decade(&recs, Decade::of(1910)).value(), None);

        let males = vec![street(Some(1950), "a", Gender::Male, None)];
        assert_eq!(f_prop_by_decade(&males, Decade::of(1950)).value(), Some(0.0));
    }

    #[test]
    fn f_prop_district_uses_city_denominator() {
        let mut recs: Vec<_> = (0..2).map(|_| street(None, "A", Gender::Female, None)).collect();
        recs.extend((0..3).map(|_| street(None, "A", Gender::Male, None)));
        recs.extend((0..5).map(|_| street(None, "B", Gender::Male, None)));
        assert_eq!(f_prop_by_district(&recs, &DistrictId::new("A")).value(), Some(0.2));
        assert_eq!(f_prop_by_district(&recs, &DistrictId::new("Z")).value(), Some(0.0));

        let within = f_prop_districts(
            &CityId::new("c"),
            &recs,
            &[DistrictId::new("A")],
            DistrictNormalization::WithinDistrict,
        );
        assert_eq!(within.value(&DistrictId::new("A")), Some(0.4));
    }

    #[test]
    fn single_district_equals_pooled_share() {
        let recs = vec![
            street(Some(1900), "only", Gender::Female, None),
            street(Some(1960), "only", Gender::Male, None),
            street(None, "only", Gender::Male, None),
        ];
        assert_eq!(f_prop_by_district(&recs, &DistrictId::new("only")), pooled_f_prop(&recs));
    }

    #[test]
    fn foreigner_fixture_and_literal_mode() {
        let recs = vec![
            street(Some(1900), "a", Gender::Male, Some("DE")),
            street(Some(1900), "a", Gender::Male, Some("AT")),
            street(Some(1901), "a", Gender::Male, Some("AT")),
            street(Some(1902), "a", Gender::Male, Some("AT")),
            street(Some(1950), "a", Gender::Male, Some("HU")),
            street(Some(1950), "a", Gender::Male, None),
        ];
        let at = CountryCode::new("AT").unwrap();
        assert_eq!(for_prop_by_decade(&recs, at, Decade::of(1900), ForeignerFormula::WithinDecade).value(), Some(0.25));
        assert_eq!(for_prop_by_decade(&recs, at, Decade::of(1900), ForeignerFormula::Literal), Ratio::new(2, 4));
        assert_eq!(for_prop_by_decade(&recs, at, Decade::of(1950), ForeignerFormula::Literal), Ratio::new(2, 1));
        assert_eq!(pooled_for_prop(&recs, at), Ratio::new(2, 5));

        let local = vec![street(Some(1900), "a", Gender::Male, Some("AT"))];
        assert_eq!(pooled_for_prop(&local, at).value(), Some(0.0));
    }

    #[test]
    fn denominations_fraction() {
        let recs = vec![
            street(Some(1900), "", Gender::Male, None),
            street(Some(1901), "", Gender::Male, None),
            street(Some(1915), "", Gender::Male, None),
            street(Some(1919), "", Gender::Male, None),
            street(None, "", Gender::Male, None),
        ];
        let s = denominations_by_decade(&CityId::new("c"), &recs);
        let v: Vec<(i32, f64)> = s.values.iter().map(|(d, v)| (d.start_year(), *v)).collect();
        assert_eq!(v, vec![(1900, 0.5), (1910, 0.5)]);

        let one = denominations_by_decade(&CityId::new("c"), &recs[..2]);
        assert_eq!(one.values.values().copied().collect::<Vec<_>>(), vec![1.0]);
    }

    #[test]
    fn start_decade_filter() {
        let mut paris = CityConfig::shipped_city("paris").unwrap();
        let recs = vec![
            street(Some(1202), "", Gender::Male, None),
            street(Some(1860), "", Gender::Male, None),
            street(None, "", Gender::Male, None),
        ];
        let kept = apply_start_decade(&recs, &paris);
        assert_eq!(kept.iter().map(|r| r.denomination_year).collect::<Vec<_>>(), vec![Some(1860), None]);

        paris = CityConfig::shipped_city("new_york").unwrap();
        let ny = vec![street(Some(1989), "", Gender::Male, None), street(Some(1990), "", Gender::Male, None), street(Some(2000), "", Gender::Male, None)];
        let kept = apply_start_decade(&ny, &paris);
        assert_eq!(kept.iter().map(|r| r.denomination_year).collect::<Vec<_>>(), vec![Some(1990), Some(2000)]);
    }

    #[test]
    fn proportion_series_skip_empty_decades() {
        let recs = vec![
            street(Some(1900), "", Gender::Female, None),
            street(Some(1920), "", Gender::Male, None),
        ];
        let s = f_prop_series(&CityId::new("c"), &recs);
        assert_eq!(s.values.len(), 2);
        assert!(!s.values.contains_key(&Decade::of(1910)));
        assert_eq!(s.peak(), Some((Decade::of(1900), 1.0)));
    }
}
