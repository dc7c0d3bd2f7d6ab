//! Day-to-day comparison.
//!
//! Each day is reduced to a sorted, de-duplicated list of `(slot, item id)`
//! pairs so two days can be intersected in one linear merge. Item ids come
//! from an interner shared by every day of a run; mining never looks at the
//! text behind an id, only at equality.

use std::collections::{BTreeSet, HashMap};

use chrono::NaiveDate;

use super::model::{Group, Item, MiningStats};
use crate::error::{Error, Result};
use crate::ingest::DayLog;
use crate::temporal::GranularityConfig;

#[derive(Debug, Default)]
pub(crate) struct Interner<'a> {
    ids: HashMap<(&'a str, &'a str), u32>,
    items: Vec<(&'a str, &'a str)>,
}

impl<'a> Interner<'a> {
    pub(crate) fn intern(&mut self, sensor: &'a str, data: &'a str) -> u32 {
        let next = self.items.len() as u32;
        let id = *self.ids.entry((sensor, data)).or_insert(next);
        if id == next {
            self.items.push((sensor, data));
        }
        id
    }

    pub(crate) fn item(&self, id: u32) -> Item {
        let (sensor, data) = self.items[id as usize];
        Item::new(sensor, data)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct IndexedDay {
    pub(crate) date: NaiveDate,
    pub(crate) pairs: Vec<(u16, u32)>,
}

pub(crate) fn check_snapped(days: &[DayLog]) -> Result<Option<GranularityConfig>> {
    let granularity = days.first().and_then(|d| d.granularity);
    for day in days {
        if day.granularity != granularity {
            return Err(Error::GranularityMismatch {
                left: granularity.map(|g| g.precision()),
                right: day.granularity.map(|g| g.precision()),
            });
        }
        if let Some(e) = day.entities.iter().find(|e| e.granular_time.is_none()) {
            return Err(Error::Unsnapped(e.timestamp));
        }
    }
    Ok(granularity)
}

pub(crate) fn index_days<'a>(days: &'a [DayLog], interner: &mut Interner<'a>) -> Vec<IndexedDay> {
    days.iter()
        .map(|day| {
            let mut pairs: Vec<(u16, u32)> = day
                .entities
                .iter()
                .map(|e| {
                    let slot = e.granular_time.expect("checked by check_snapped");
                    (slot.minute_of_day() as u16, interner.intern(&e.sensor, &e.data))
                })
                .collect();
            pairs.sort_unstable();
            pairs.dedup();
            IndexedDay {
                date: day.date,
                pairs,
            }
        })
        .collect()
}

/// Slots where the two days share at least `theta` items, with those items.
pub(crate) fn intersect(
    a: &IndexedDay,
    b: &IndexedDay,
    theta: u32,
    stats: &mut MiningStats,
) -> Vec<(u16, Vec<u32>)> {
    stats.day_pairs += 1;
    let (x, y) = (&a.pairs, &b.pairs);
    let (mut i, mut j) = (0, 0);
    let mut out: Vec<(u16, Vec<u32>)> = Vec::new();
    let mut slot_items: Vec<u32> = Vec::new();
    let mut current_slot = None;
    let flush = |slot: Option<u16>, items: &mut Vec<u32>, out: &mut Vec<(u16, Vec<u32>)>| {
        if let Some(slot) = slot {
            if items.len() >= theta as usize {
                out.push((slot, std::mem::take(items)));
            }
        }
        items.clear();
    };
    while i < x.len() && j < y.len() {
        stats.entity_steps += 1;
        match x[i].cmp(&y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let (slot, item) = x[i];
                if current_slot != Some(slot) {
                    flush(current_slot, &mut slot_items, &mut out);
                    current_slot = Some(slot);
                }
                slot_items.push(item);
                i += 1;
                j += 1;
            }
        }
    }
    flush(current_slot, &mut slot_items, &mut out);
    out
}

/// Compare two snapped days. Entities match when granular time, sensor and
/// data are all equal; every slot with at least `theta` matches becomes a
/// group supported by both dates.
pub fn compare_days(a: &DayLog, b: &DayLog, theta: u32) -> Result<Vec<Group>> {
    compare_days_counted(a, b, theta, &mut MiningStats::default())
}

pub fn compare_days_counted(a: &DayLog, b: &DayLog, theta: u32, stats: &mut MiningStats) -> Result<Vec<Group>> {
    let pair = [a.clone(), b.clone()];
    check_snapped(&pair)?;
    let mut interner = Interner::default();
    let indexed = index_days(&pair, &mut interner);
    let support: BTreeSet<NaiveDate> = [a.date, b.date].into();
    Ok(intersect(&indexed[0], &indexed[1], theta, stats)
        .into_iter()
        .map(|(slot, items)| Group {
            slot: crate::temporal::GranularTime::from_minute(slot as u32).expect("grid slot"),
            items: items.into_iter().map(|id| interner.item(id)).collect(),
            confidence_pct: 100.0,
            support_days: support.clone(),
        })
        .collect())
}
