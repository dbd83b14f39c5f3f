//! Occupation rankings per decade and their half-century stability.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{is_countable, Decade, Metric, OccupationGroup, StreetRecord};

use super::kendall::kendall_tau;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RankingMode {
    /// Counts of streets denominated up to and including the decade.
    #[default]
    Cumulative,
    /// Counts of streets denominated within the decade only.
    PerDecade,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankedGroup {
    pub group: OccupationGroup,
    pub count: u64,
    pub rank: usize,
}

/// Occupation groups ranked by street count at each decade.
///
/// Every decade ranks the same set of groups: all groups that occur anywhere
/// in the input. Decades appear only if at least one street with a resolved
/// occupation was denominated in them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationRanking {
    pub mode: RankingMode,
    pub decades: BTreeMap<Decade, Vec<RankedGroup>>,
}

pub fn occupation_ranking(records: &[StreetRecord], mode: RankingMode) -> OccupationRanking {
    let mut per_decade: BTreeMap<Decade, BTreeMap<OccupationGroup, u64>> = BTreeMap::new();
    let mut universe = BTreeSet::new();
    for rec in records {
        let (Some(decade), true) = (rec.denomination_decade(), is_countable(rec, Metric::Occupation)) else {
            continue;
        };
        let group = rec
            .honoree
            .as_ref()
            .and_then(|h| h.occupation_group)
            .expect("countable implies group");
        universe.insert(group);
        *per_decade.entry(decade).or_default().entry(group).or_default() += 1;
    }

    let mut running: BTreeMap<OccupationGroup, u64> = universe.iter().map(|g| (*g, 0)).collect();
    let mut decades = BTreeMap::new();
    for (decade, counts) in per_decade {
        let current: BTreeMap<OccupationGroup, u64> = match mode {
            RankingMode::Cumulative => {
                for (g, c) in &counts {
                    *running.get_mut(g).expect("group in universe") += c;
                }
                running.clone()
            }
            RankingMode::PerDecade => universe
                .iter()
                .map(|g| (*g, counts.get(g).copied().unwrap_or(0)))
                .collect(),
        };
        decades.insert(decade, rank_counts(current));
    }
    OccupationRanking { mode, decades }
}

/// Sorts by descending count, then by group enum order, and numbers 1..k.
fn rank_counts(counts: BTreeMap<OccupationGroup, u64>) -> Vec<RankedGroup> {
    let mut v: Vec<(OccupationGroup, u64)> = counts.into_iter().collect();
    v.sort_by(|(ga, ca), (gb, cb)| cb.cmp(ca).then(ga.cmp(gb)));
    v.into_iter()
        .enumerate()
        .map(|(i, (group, count))| RankedGroup {
            group,
            count,
            rank: i + 1,
        })
        .collect()
}

impl OccupationRanking {
    pub fn rank_of(&self, decade: Decade, group: OccupationGroup) -> Option<usize> {
        self.decades
            .get(&decade)?
            .iter()
            .find(|r| r.group == group)
            .map(|r| r.rank)
    }

    /// Counts of every ranked group at `decade`, in group enum order.
    pub fn counts(&self, decade: Decade) -> Option<Vec<u64>> {
        let mut v: Vec<&RankedGroup> = self.decades.get(&decade)?.iter().collect();
        v.sort_by_key(|r| r.group);
        Some(v.into_iter().map(|r| r.count).collect())
    }

    /// Tau-b between two decades, computed on the group counts so that tied
    /// counts are treated as ties.
    pub fn tau_between(&self, a: Decade, b: Decade) -> crate::Result<f64> {
        let missing = |d: Decade| crate::Error::Invalid(format!("decade {d} is not ranked"));
        let ca = self.counts(a).ok_or_else(|| missing(a))?;
        let cb = self.counts(b).ok_or_else(|| missing(b))?;
        kendall_tau(&ca, &cb)
    }
}

/// The four half-centuries the stability analysis covers.
pub const HALF_CENTURIES: [i32; 4] = [1800, 1850, 1900, 1950];

/// Stability of the ranking within one half-century.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stability {
    /// Mean tau over the available consecutive-decade pairs.
    pub mean_tau: Option<f64>,
    /// `(decade, next decade, tau)` for each pair used.
    pub pairs: Vec<(Decade, Decade, f64)>,
    /// Pairs that could not be used, with the reason.
    pub missing: Vec<(Decade, Decade, String)>,
}

/// Mean tau between each decade and the next, for each half-century.
///
/// The half-century starting at `h` averages the five pairs
/// `(h, h+10) .. (h+40, h+50)`.
pub fn half_century_stability(ranking: &OccupationRanking) -> BTreeMap<i32, Stability> {
    HALF_CENTURIES
        .iter()
        .map(|&start| {
            let mut pairs = Vec::new();
            let mut missing = Vec::new();
            let first = Decade::of(start);
            for d in first.through(Decade::of(start + 40)) {
                let next = d.next();
                if !ranking.decades.contains_key(&d) || !ranking.decades.contains_key(&next) {
                    let gap = if ranking.decades.contains_key(&d) { next } else { d };
                    missing.push((d, next, format!("no ranking for {gap}")));
                    continue;
                }
                match ranking.tau_between(d, next) {
                    Ok(t) => pairs.push((d, next, t)),
                    Err(e) => missing.push((d, next, e.to_string())),
                }
            }
            let mean_tau = (!pairs.is_empty())
                .then(|| pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64);
            (start, Stability { mean_tau, pairs, missing })
        })
        .collect()
}
