//! VoA measured from recorded timeline snapshots, and overlap between the
//! posts seen by different users.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::Hash;

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::error::{Result, VoaError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Impression {
    pub post_id: String,
    pub publisher: String,
    pub published_at: DateTime<Utc>,
    pub impressed_at: DateTime<Utc>,
    /// 1-based rank within its snapshot.
    pub position: u32,
}

/// One timeline view by one user. Positions are strictly increasing and no
/// post appears twice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Snapshot {
    pub user: String,
    pub taken_at: DateTime<Utc>,
    impressions: Vec<Impression>,
}

impl Snapshot {
    /// Orders impressions by position and drops repeated posts, keeping the
    /// lowest position. Returns the snapshot and the number of dropped rows.
    pub fn new(
        user: impl Into<String>,
        taken_at: DateTime<Utc>,
        mut impressions: Vec<Impression>,
    ) -> Result<(Self, usize)> {
        if let Some(bad) = impressions.iter().find(|i| i.position < 1) {
            return Err(VoaError::invalid(format!(
                "post {} has position {}; positions start at 1",
                bad.post_id, bad.position
            )));
        }
        impressions.sort_by_key(|i| i.position);
        let before = impressions.len();
        let mut seen = HashSet::new();
        impressions.retain(|i| seen.insert(i.post_id.clone()));
        if let Some(w) = impressions.windows(2).find(|w| w[0].position == w[1].position) {
            return Err(VoaError::invalid(format!(
                "posts {} and {} share position {}",
                w[0].post_id, w[1].post_id, w[0].position
            )));
        }
        let removed = before - impressions.len();
        Ok((
            Snapshot {
                user: user.into(),
                taken_at,
                impressions,
            },
            removed,
        ))
    }

    pub fn impressions(&self) -> &[Impression] {
        &self.impressions
    }

    pub fn into_impressions(self) -> Vec<Impression> {
        self.impressions
    }

    pub fn len(&self) -> usize {
        self.impressions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.impressions.is_empty()
    }

    /// Post ids at positions `<= k` (all of them when `k` is `None`).
    pub fn post_ids(&self, k: Option<usize>) -> impl Iterator<Item = &str> {
        self.impressions
            .iter()
            .take_while(move |i| k.is_none_or(|k| i.position as usize <= k))
            .map(|i| i.post_id.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotVoa {
    pub per_snapshot: Vec<usize>,
    pub mean: f64,
}

/// Novel impressions per snapshot for a single user's time-ordered snapshots.
/// With `k_truncate`, only positions `1..=k` count, both for novelty and for
/// what is remembered as seen.
pub fn voa_from_snapshots(snapshots: &[Snapshot], k_truncate: Option<usize>) -> Result<SnapshotVoa> {
    let first = snapshots.first().ok_or(VoaError::Empty("no snapshots"))?;
    if let Some(other) = snapshots.iter().find(|s| s.user != first.user) {
        return Err(VoaError::invalid(format!(
            "snapshots mix users `{}` and `{}`",
            first.user, other.user
        )));
    }
    if snapshots.windows(2).any(|w| w[0].taken_at > w[1].taken_at) {
        return Err(VoaError::invalid("snapshots are not sorted by taken_at"));
    }
    let mut seen: HashSet<&str> = HashSet::new();
    let per_snapshot: Vec<usize> = snapshots
        .iter()
        .map(|s| s.post_ids(k_truncate).filter(|id| seen.insert(id)).count())
        .collect();
    let mean = per_snapshot.iter().sum::<usize>() as f64 / per_snapshot.len() as f64;
    Ok(SnapshotVoa { per_snapshot, mean })
}

/// Reverse-chronological order by publication time (ties by post id),
/// positions renumbered from 1.
pub fn reorder_fifo(snapshot: &Snapshot) -> Snapshot {
    let mut impressions = snapshot.impressions.clone();
    impressions.sort_by(|a, b| {
        b.published_at
            .cmp(&a.published_at)
            .then_with(|| a.post_id.cmp(&b.post_id))
    });
    for (i, imp) in impressions.iter_mut().enumerate() {
        imp.position = i as u32 + 1;
    }
    Snapshot {
        user: snapshot.user.clone(),
        taken_at: snapshot.taken_at,
        impressions,
    }
}

/// 2x2 partition of a post universe by whether users X and Y saw each post.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OverlapTable {
    pub both: u64,
    pub only_x: u64,
    pub only_y: u64,
    pub neither: u64,
    pub universe_size: u64,
}

impl OverlapTable {
    pub fn from_cells(both: u64, only_x: u64, only_y: u64, neither: u64) -> Self {
        OverlapTable {
            both,
            only_x,
            only_y,
            neither,
            universe_size: both + only_x + only_y + neither,
        }
    }

    pub fn transpose(&self) -> Self {
        OverlapTable {
            only_x: self.only_y,
            only_y: self.only_x,
            ..*self
        }
    }
}

pub fn overlap_table<T: Eq + Hash>(
    x_posts: &HashSet<T>,
    y_posts: &HashSet<T>,
    universe: &HashSet<T>,
) -> Result<OverlapTable> {
    if !x_posts.is_subset(universe) || !y_posts.is_subset(universe) {
        return Err(VoaError::invalid("viewed posts must be contained in the universe"));
    }
    let both = x_posts.intersection(y_posts).count() as u64;
    let only_x = x_posts.len() as u64 - both;
    let only_y = y_posts.len() as u64 - both;
    let universe_size = universe.len() as u64;
    Ok(OverlapTable {
        both,
        only_x,
        only_y,
        neither: universe_size - both - only_x - only_y,
        universe_size,
    })
}

/// Fraction of Y's posts that X also saw: `both / (both + only_y)`.
pub fn coverage_fraction(table: &OverlapTable) -> Result<f64> {
    let y_total = table.both + table.only_y;
    if y_total == 0 {
        return Err(VoaError::invalid("coverage undefined: Y viewed no posts"));
    }
    Ok(table.both as f64 / y_total as f64)
}

/// Larger of the two directional coverage fractions.
pub fn pairwise_overlap_of(table: &OverlapTable) -> Result<f64> {
    let forward = coverage_fraction(table).ok();
    let backward = coverage_fraction(&table.transpose()).ok();
    match (forward, backward) {
        (Some(a), Some(b)) => Ok(a.max(b)),
        (Some(a), None) | (None, Some(a)) => Ok(a),
        (None, None) => Err(VoaError::invalid("overlap undefined: both sets are empty")),
    }
}

pub fn pairwise_overlap<T: Eq + Hash>(
    x_posts: &HashSet<T>,
    y_posts: &HashSet<T>,
    universe: &HashSet<T>,
) -> Result<f64> {
    pairwise_overlap_of(&overlap_table(x_posts, y_posts, universe)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewerEcdf {
    /// `(viewer_count, fraction of posts seen by at most that many users)`.
    pub points: Vec<(usize, f64)>,
}

impl ViewerEcdf {
    /// Step-function value at `viewers`.
    pub fn fraction_at(&self, viewers: usize) -> f64 {
        self.points
            .iter()
            .take_while(|(c, _)| *c <= viewers)
            .last()
            .map_or(0.0, |&(_, f)| f)
    }
}

/// Distribution over the union of posts of how many sets contain each post.
pub fn viewer_ecdf<T: Eq + Hash>(post_sets: &[HashSet<T>]) -> Result<ViewerEcdf> {
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for set in post_sets {
        for post in set {
            *counts.entry(post).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(VoaError::Empty("no posts in any set"));
    }
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for c in counts.values() {
        *histogram.entry(*c).or_default() += 1;
    }
    let total = counts.len();
    let mut cumulative = 0;
    let points = histogram
        .into_iter()
        .map(|(viewers, n)| {
            cumulative += n;
            let fraction = if cumulative == total {
                1.0
            } else {
                cumulative as f64 / total as f64
            };
            (viewers, fraction)
        })
        .collect();
    Ok(ViewerEcdf { points })
}

/// Measured contingency tables between one high-rate bot `H` and four
/// regular-rate bots `R1..R4`, cells kept verbatim. Row user is X.
pub mod bot_tables {
    use super::OverlapTable;

    const fn t(both: u64, only_x: u64, only_y: u64, neither: u64) -> OverlapTable {
        OverlapTable {
            both,
            only_x,
            only_y,
            neither,
            universe_size: both + only_x + only_y + neither,
        }
    }

    /// H (row) against R1..R4 (column).
    pub const HIGH_VS_REGULAR: [(&str, OverlapTable); 4] = [
        ("R1", t(8205, 2778, 651, 2679)),
        ("R2", t(7242, 3751, 1767, 1563)),
        ("R3", t(8381, 2602, 1128, 2202)),
        ("R4", t(8111, 2872, 801, 2529)),
    ];

    /// Regular pairs. The R1/R3 table repeats the R1/R2 first row, so R3's
    /// implied size differs from the other tables.
    pub const REGULAR_PAIRS: [(&str, &str, OverlapTable); 6] = [
        ("R1", "R2", t(6776, 2080, 2223, 3224)),
        ("R1", "R3", t(6776, 2080, 1453, 4004)),
        ("R1", "R4", t(7850, 1006, 1062, 4395)),
        ("R2", "R3", t(6855, 2144, 2654, 2660)),
        ("R2", "R4", t(6641, 2358, 2271, 3043)),
        ("R3", "R4", t(7734, 1775, 1178, 3623)),
    ];
}
