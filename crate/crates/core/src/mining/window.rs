//! Window-based group mining, the all-pairs baseline, and profile construction.
//!
//! Days are cut into consecutive windows of `window_size` days. Inside a
//! window every pair of days is compared, and groups with the same slot and
//! item set are merged into the window's behavior. Behaviors are then folded
//! into a profile by matching equal groups across windows. With one window
//! spanning all days this is exactly the all-pairs baseline.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::Hash;
use std::ops::Range;

use chrono::NaiveDate;

use super::compare::{check_snapped, index_days, intersect, IndexedDay, Interner};
use super::model::{Behavior, Group, Item, MiningConfig, MiningStats, Profile};
use crate::error::{Error, Result};
use crate::ingest::DayLog;
use crate::temporal::GranularTime;

type GroupKey = (u16, Vec<u32>);
type GroupRef<'a> = (GranularTime, &'a BTreeSet<Item>);

/// Day-index ranges of the windows over `num_days` days. Windows do not
/// overlap; a single day left over at the end joins the last window, and a
/// window size of at least `num_days` gives one window over everything.
pub fn window_ranges(num_days: usize, window_size: usize) -> Vec<Range<usize>> {
    if num_days < 2 || window_size < 2 {
        return Vec::new();
    }
    let mut ranges: Vec<Range<usize>> = (0..num_days)
        .step_by(window_size)
        .map(|start| start..(start + window_size).min(num_days))
        .collect();
    if ranges.len() > 1 && ranges.last().is_some_and(|r| r.len() == 1) {
        let tail = ranges.pop().unwrap();
        ranges.last_mut().unwrap().end = tail.end;
    }
    ranges
}

fn mine_range(
    days: &[IndexedDay],
    range: Range<usize>,
    theta: u32,
    stats: &mut MiningStats,
) -> BTreeMap<GroupKey, BTreeSet<usize>> {
    let mut groups: BTreeMap<GroupKey, BTreeSet<usize>> = BTreeMap::new();
    for i in range.clone() {
        for j in (i + 1)..range.end {
            for (slot, items) in intersect(&days[i], &days[j], theta, stats) {
                let support = groups.entry((slot, items)).or_default();
                support.insert(i);
                support.insert(j);
            }
        }
    }
    groups
}

fn to_group(
    days: &[IndexedDay],
    (slot, items): &GroupKey,
    support: &BTreeSet<usize>,
    confidence_pct: f64,
    interner: &Interner,
) -> Group {
    Group {
        slot: GranularTime::from_minute(*slot as u32).expect("grid slot"),
        items: items.iter().map(|&id| interner.item(id)).collect(),
        confidence_pct,
        support_days: support.iter().map(|&d| days[d].date).collect(),
    }
}

fn to_behavior(days: &[IndexedDay], window: &MinedWindow, interner: &Interner) -> Behavior {
    let window_len = window.range.len() as f64;
    Behavior {
        window_start_date: days[window.range.start].date,
        window_days: days[window.range.clone()].iter().map(|d| d.date).collect(),
        groups: window
            .groups
            .iter()
            .map(|(key, support)| to_group(days, key, support, 100.0 * support.len() as f64 / window_len, interner))
            .collect(),
    }
}

fn prepare<'a>(days: &'a [DayLog], config: &MiningConfig) -> Result<(Vec<IndexedDay>, Interner<'a>)> {
    config.validate()?;
    if days.len() < 2 {
        return Err(Error::InsufficientData(days.len()));
    }
    if let Some(g) = check_snapped(days)? {
        if g != config.granularity {
            return Err(Error::GranularityMismatch {
                left: Some(config.granularity.precision()),
                right: Some(g.precision()),
            });
        }
    }
    let mut interner = Interner::default();
    let indexed = index_days(days, &mut interner);
    Ok((indexed, interner))
}

struct MinedWindow {
    range: Range<usize>,
    groups: BTreeMap<GroupKey, BTreeSet<usize>>,
}

fn mine_indexed(indexed: &[IndexedDay], config: &MiningConfig, stats: &mut MiningStats) -> Vec<MinedWindow> {
    window_ranges(indexed.len(), config.window_size)
        .into_iter()
        .map(|range| MinedWindow {
            groups: mine_range(indexed, range.clone(), config.theta, stats),
            range,
        })
        .filter(|w| !w.groups.is_empty())
        .collect()
}

/// One behavior per window that produced at least one group.
pub fn mine_windows(days: &[DayLog], config: &MiningConfig) -> Result<Vec<Behavior>> {
    mine_windows_counted(days, config, &mut MiningStats::default())
}

pub fn mine_windows_counted(days: &[DayLog], config: &MiningConfig, stats: &mut MiningStats) -> Result<Vec<Behavior>> {
    let (indexed, interner) = prepare(days, config)?;
    Ok(mine_indexed(&indexed, config, stats)
        .iter()
        .map(|w| to_behavior(&indexed, w, &interner))
        .collect())
}

/// Pool the support of equal groups across behaviors. Each group not seen
/// before is looked up in every later behavior. Returns groups in first-seen
/// order.
fn fold_behaviors<K, D>(behaviors: &[Vec<(K, &BTreeSet<D>)>], stats: &mut MiningStats) -> Vec<(K, BTreeSet<D>)>
where
    K: Eq + Hash + Clone,
    D: Ord + Copy,
{
    let indexes: Vec<HashMap<&K, &BTreeSet<D>>> = behaviors
        .iter()
        .map(|b| b.iter().map(|(k, s)| (k, *s)).collect())
        .collect();
    let mut position: HashMap<K, usize> = HashMap::new();
    let mut pooled: Vec<(K, BTreeSet<D>)> = Vec::new();
    for (i, behavior) in behaviors.iter().enumerate() {
        let first_fresh = pooled.len();
        for (key, support) in behavior {
            if !position.contains_key(key) {
                position.insert(key.clone(), pooled.len());
                pooled.push((key.clone(), (*support).clone()));
            }
        }
        for later in &indexes[i + 1..] {
            stats.behavior_pairs += 1;
            for (key, support) in &mut pooled[first_fresh..] {
                if let Some(repeat) = later.get(key) {
                    support.extend(repeat.iter().copied());
                }
            }
        }
    }
    pooled
}

fn confidence(support: usize, num_days: usize) -> f64 {
    100.0 * support as f64 / num_days as f64
}

fn finish(user_id: &str, config: &MiningConfig, mut motifs: Vec<Group>) -> Profile {
    sort_motifs(&mut motifs);
    Profile {
        user_id: user_id.to_string(),
        config: *config,
        motifs,
    }
}

/// Fold behaviors into a profile: equal groups (same slot and item set) pool
/// their support days across windows, and confidence is the share of
/// `num_days` on which the motif was seen.
pub fn build_profile(user_id: &str, behaviors: &[Behavior], num_days: usize, config: &MiningConfig) -> Profile {
    build_profile_counted(user_id, behaviors, num_days, config, &mut MiningStats::default())
}

pub fn build_profile_counted(
    user_id: &str,
    behaviors: &[Behavior],
    num_days: usize,
    config: &MiningConfig,
    stats: &mut MiningStats,
) -> Profile {
    if behaviors.is_empty() || num_days == 0 {
        return Profile::empty(user_id, *config);
    }
    let keyed: Vec<Vec<(GroupRef, &BTreeSet<NaiveDate>)>> = behaviors
        .iter()
        .map(|b| b.groups.iter().map(|g| (g.key(), &g.support_days)).collect())
        .collect();
    let motifs = fold_behaviors(&keyed, stats)
        .into_iter()
        .filter_map(|((slot, items), support_days)| {
            let confidence_pct = confidence(support_days.len(), num_days);
            (confidence_pct >= config.lambda_pct).then(|| Group {
                slot,
                items: items.clone(),
                confidence_pct,
                support_days,
            })
        })
        .collect();
    finish(user_id, config, motifs)
}

fn profile_from_windows(
    user_id: &str,
    indexed: &[IndexedDay],
    interner: &Interner,
    windows: &[MinedWindow],
    config: &MiningConfig,
    stats: &mut MiningStats,
) -> Profile {
    let keyed: Vec<Vec<(&GroupKey, &BTreeSet<usize>)>> = windows.iter().map(|w| w.groups.iter().collect()).collect();
    let motifs = fold_behaviors(&keyed, stats)
        .into_iter()
        .filter_map(|(key, support)| {
            let confidence_pct = confidence(support.len(), indexed.len());
            (confidence_pct >= config.lambda_pct).then(|| to_group(indexed, key, &support, confidence_pct, interner))
        })
        .collect();
    finish(user_id, config, motifs)
}

pub(crate) fn sort_motifs(motifs: &mut [Group]) {
    motifs.sort_by(|a, b| {
        a.slot
            .cmp(&b.slot)
            .then(b.confidence_pct.total_cmp(&a.confidence_pct))
            .then_with(|| a.items.cmp(&b.items))
    });
}

/// Windowed mining followed by profile construction; same result as
/// `build_profile(mine_windows(..))`.
pub fn mine_profile(user_id: &str, days: &[DayLog], config: &MiningConfig, stats: &mut MiningStats) -> Result<Profile> {
    let (indexed, interner) = prepare(days, config)?;
    let windows = mine_indexed(&indexed, config, stats);
    Ok(profile_from_windows(user_id, &indexed, &interner, &windows, config, stats))
}

/// Compare every pair of days, with no windowing, then build the profile the
/// same way.
pub fn baseline_profile(user_id: &str, days: &[DayLog], config: &MiningConfig) -> Result<Profile> {
    baseline_profile_counted(user_id, days, config, &mut MiningStats::default())
}

pub fn baseline_profile_counted(
    user_id: &str,
    days: &[DayLog],
    config: &MiningConfig,
    stats: &mut MiningStats,
) -> Result<Profile> {
    let (indexed, interner) = prepare(days, config)?;
    let range = 0..indexed.len();
    let window = MinedWindow {
        groups: mine_range(&indexed, range.clone(), config.theta, stats),
        range,
    };
    let windows = if window.groups.is_empty() { Vec::new() } else { vec![window] };
    Ok(profile_from_windows(user_id, &indexed, &interner, &windows, config, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Entity;
    use crate::temporal::apply_granularity;

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2014, 1, d).unwrap()
    }

    fn day(d: u32, entries: &[(u32, u32, &str, &str)]) -> DayLog {
        let entities = entries
            .iter()
            .map(|&(h, m, s, v)| Entity::new(date(d).and_hms_opt(h, m, 0).unwrap(), s, v))
            .collect();
        apply_granularity(DayLog::new("u", date(d), entities), cfg(1, 0.0, 2).granularity)
    }

    fn cfg(theta: u32, lambda: f64, window: usize) -> MiningConfig {
        MiningConfig::new(theta, lambda, window, 60).unwrap()
    }

    const ROUTINE: [(u32, u32, &str, &str); 4] = [
        (8, 0, "WiFi", "office"),
        (8, 5, "Application", "mail"),
        (15, 0, "Call", "951603XXXX"),
        (15, 10, "LocationState", "stationary"),
    ];

    #[test]
    fn window_ranges_partition_days() {
        assert_eq!(window_ranges(6, 2), vec![0..2, 2..4, 4..6]);
        assert_eq!(window_ranges(7, 3), vec![0..3, 3..7]);
        assert_eq!(window_ranges(8, 3), vec![0..3, 3..6, 6..8]);
        assert_eq!(window_ranges(4, 9), vec![0..4]);
        assert!(window_ranges(1, 2).is_empty());
    }

    #[test]
    fn two_days_two_groups() {
        // window size and theta both two: D1 and D2 share two slots
        let days = [day(6, &ROUTINE), day(7, &ROUTINE)];
        let behaviors = mine_windows(&days, &cfg(2, 0.0, 2)).unwrap();
        assert_eq!(behaviors.len(), 1);
        let slots: Vec<String> = behaviors[0].groups.iter().map(|g| g.slot.to_string()).collect();
        assert_eq!(slots, vec!["08:00", "15:00"]);
    }

    #[test]
    fn distinct_days_give_nothing() {
        let days = [
            day(6, &[(9, 0, "WiFi", "a")]),
            day(7, &[(9, 0, "WiFi", "b")]),
            day(8, &[(9, 0, "WiFi", "c")]),
        ];
        assert!(mine_windows(&days, &cfg(1, 0.0, 2)).unwrap().is_empty());
    }

    #[test]
    fn identical_days_repeat_behaviors() {
        let days: Vec<DayLog> = (6..10).map(|d| day(d, &ROUTINE)).collect();
        let behaviors = mine_windows(&days, &cfg(1, 0.0, 2)).unwrap();
        assert_eq!(behaviors.len(), 2);
        let keys = |b: &Behavior| b.groups.iter().map(|g| (g.slot, g.items.clone())).collect::<Vec<_>>();
        assert_eq!(keys(&behaviors[0]), keys(&behaviors[1]));
    }

    #[test]
    fn needs_two_days() {
        let days = [day(6, &ROUTINE)];
        assert!(matches!(mine_windows(&days, &cfg(1, 0.0, 2)), Err(Error::InsufficientData(1))));
        assert!(matches!(baseline_profile("u", &[], &cfg(1, 0.0, 2)), Err(Error::InsufficientData(0))));
    }

    #[test]
    fn confidence_is_share_of_mined_days() {
        let call = [(15, 0, "Call", "951603XXXX")];
        let days = [day(6, &call), day(7, &call), day(8, &[]), day(9, &call)];
        let profile = baseline_profile("u", &days, &cfg(1, 50.0, 2)).unwrap();
        assert_eq!(profile.motifs.len(), 1);
        assert_eq!(profile.motifs[0].confidence_pct, 75.0);
    }

    #[test]
    fn planted_on_six_of_eight_days() {
        let call = [(15, 0, "Call", "1")];
        let days: Vec<DayLog> = (1..=8).map(|d| day(d, if d % 4 == 0 { &[] } else { &call })).collect();
        let profile = baseline_profile("u", &days, &cfg(1, 0.0, 2)).unwrap();
        assert_eq!(profile.motifs.len(), 1);
        assert_eq!(profile.motifs[0].confidence_pct, 75.0);
    }

    #[test]
    fn lambda_prunes_rare_motifs() {
        let call = [(15, 0, "Call", "1")];
        let mut days = vec![day(1, &call), day(2, &call)];
        days.extend((3..=10).map(|d| day(d, &[])));
        // supported on 2 of 10 days: 20%
        assert_eq!(baseline_profile("u", &days, &cfg(1, 20.0, 2)).unwrap().motifs.len(), 1);
        assert!(baseline_profile("u", &days, &cfg(1, 20.5, 2)).unwrap().motifs.is_empty());
    }

    #[test]
    fn build_profile_on_nothing_is_empty() {
        let profile = build_profile("u", &[], 5, &cfg(1, 0.0, 2));
        assert!(profile.motifs.is_empty());
    }

    #[test]
    fn repeats_across_windows_pool_support() {
        let days: Vec<DayLog> = (6..10).map(|d| day(d, &ROUTINE)).collect();
        let mut stats = MiningStats::default();
        let profile = mine_profile("u", &days, &cfg(1, 0.0, 2), &mut stats).unwrap();
        assert!(profile.motifs.iter().all(|m| m.support_days.len() == 4));
        assert!(profile.motifs.iter().all(|m| m.confidence_pct == 100.0));
        assert_eq!(stats.day_pairs, 2);
        assert_eq!(stats.behavior_pairs, 1);
    }

    #[test]
    fn two_days_match_baseline() {
        let days = [day(6, &ROUTINE), day(7, &ROUTINE[..3])];
        let config = cfg(1, 0.0, 2);
        let mut stats = MiningStats::default();
        let windowed = mine_profile("u", &days, &config, &mut stats).unwrap();
        assert_eq!(windowed, baseline_profile("u", &days, &config).unwrap());
    }
}
