//! Motif mining: day comparison, windowed group creation, the all-pairs
//! baseline, and profile construction.

mod compare;
mod model;
mod window;

pub use compare::{compare_days, compare_days_counted};
pub use model::{Behavior, Group, Item, MiningConfig, MiningStats, Profile};
pub use window::{
    baseline_profile, baseline_profile_counted, build_profile, build_profile_counted, mine_profile,
    mine_windows, mine_windows_counted, window_ranges,
};
