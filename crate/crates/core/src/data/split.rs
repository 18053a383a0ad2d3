use chrono::{Datelike, Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 12;
pub const ROLLING_INTERVALS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Rolling,
    Incremental,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rolling" => Ok(SplitMode::Rolling),
            "incremental" => Ok(SplitMode::Incremental),
            other => Err(Error::Argument(format!("unknown split mode '{other}'"))),
        }
    }
}

/// Half-open range of timeline indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        (self.start..self.end).contains(&i)
    }
}

/// Interval ids (0-based, into the interval list) used by one fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub n_intervals: usize,
    pub folds: Vec<Fold>,
}

/// Twelve folds testing on each of the last twelve intervals.
pub fn plan_splits(n_intervals: usize, mode: SplitMode) -> Result<SplitPlan> {
    plan_splits_with(n_intervals, mode, DEFAULT_FOLDS, ROLLING_INTERVALS)
}

/// Fold `j` tests on interval `n − n_folds + j` and validates on the interval
/// right before it. Incremental training uses every earlier interval; rolling
/// training uses the earlier ones inside the `window` intervals preceding the
/// test interval.
pub fn plan_splits_with(n_intervals: usize, mode: SplitMode, n_folds: usize, window: usize) -> Result<SplitPlan> {
    if n_folds == 0 {
        return Err(Error::Argument("at least one fold is required".into()));
    }
    if n_intervals < n_folds + 2 {
        return Err(Error::Argument(format!(
            "{n_folds} folds need at least {} intervals (one train, one validation), got {n_intervals}",
            n_folds + 2
        )));
    }
    if mode == SplitMode::Rolling && window < 2 {
        return Err(Error::Argument(
            "rolling window must span at least two intervals".into(),
        ));
    }
    let folds = (n_intervals - n_folds..n_intervals)
        .map(|test| {
            let validation = test - 1;
            let first = match mode {
                SplitMode::Incremental => 0,
                SplitMode::Rolling => test.saturating_sub(window),
            };
            Fold {
                train: (first..validation).collect(),
                validation,
                test,
            }
        })
        .collect();
    Ok(SplitPlan {
        mode,
        n_intervals,
        folds,
    })
}

/// Hour-ending day label: 01:00 through 24:00 belong to the same day.
fn day_of(ts: &NaiveDateTime) -> chrono::NaiveDate {
    (*ts - Duration::hours(1)).date()
}

/// Complete 24-hour days in the timeline, each running 01:00 through the
/// following 00:00.
pub fn day_intervals(timeline: &[NaiveDateTime]) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < timeline.len() {
        let day = day_of(&timeline[i]);
        let mut j = i;
        while j < timeline.len() && day_of(&timeline[j]) == day {
            j += 1;
        }
        if j - i == 24 {
            out.push(Interval { start: i, end: j });
        }
        i = j;
    }
    out
}

/// Calendar months made of complete days. Partial months at either end of
/// the timeline are dropped.
pub fn month_intervals(timeline: &[NaiveDateTime]) -> Vec<Interval> {
    let days = day_intervals(timeline);
    let mut groups: Vec<(i32, u32, Vec<Interval>)> = Vec::new();
    for d in days {
        let date = day_of(&timeline[d.start]);
        match groups.last_mut() {
            Some((y, m, ds))
                if *y == date.year() && *m == date.month() && ds.last().map(|p| p.end) == Some(d.start) =>
            {
                ds.push(d)
            }
            _ => groups.push((date.year(), date.month(), vec![d])),
        }
    }
    groups
        .into_iter()
        .filter(|(_, _, ds)| {
            let first = day_of(&timeline[ds[0].start]);
            let last = day_of(&timeline[ds[ds.len() - 1].start]);
            first.day() == 1 && (last + Duration::days(1)).month() != last.month()
        })
        .map(|(_, _, ds)| Interval {
            start: ds[0].start,
            end: ds[ds.len() - 1].end,
        })
        .collect()
}

/// Consecutive blocks of complete days with the given day counts.
pub fn day_blocks(timeline: &[NaiveDateTime], counts: &[usize]) -> Result<Vec<Interval>> {
    let days = day_intervals(timeline);
    let needed: usize = counts.iter().sum();
    if needed > days.len() || counts.contains(&0) {
        return Err(Error::Argument(format!(
            "cannot carve blocks {counts:?} out of {} complete days",
            days.len()
        )));
    }
    let mut at = 0;
    let mut out = Vec::with_capacity(counts.len());
    for &c in counts {
        out.push(Interval {
            start: days[at].start,
            end: days[at + c - 1].end,
        });
        at += c;
    }
    Ok(out)
}

/// Window positions (indices into `fcts`) assigned to each role of a fold.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FoldWindows {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    /// Timeline indices covered by the training intervals.
    pub train_indices: Vec<usize>,
}

/// Assigns each window to the fold role whose intervals contain its whole
/// span `[fct − W + 1, fct + K]`. Windows straddling two roles are dropped.
pub fn assign_windows(fcts: &[usize], w: usize, k: usize, intervals: &[Interval], fold: &Fold) -> Result<FoldWindows> {
    let max_id = fold
        .train
        .iter()
        .chain([&fold.validation, &fold.test])
        .max()
        .copied()
        .unwrap_or(0);
    if max_id >= intervals.len() {
        return Err(Error::Argument(format!(
            "fold refers to interval {max_id} but only {} exist",
            intervals.len()
        )));
    }
    let covers = |ids: &[usize], lo: usize, hi: usize| {
        merge(ids.iter().map(|&i| intervals[i]).collect())
            .iter()
            .any(|r| r.start <= lo && hi < r.end)
    };
    let mut out = FoldWindows::default();
    for (pos, &t) in fcts.iter().enumerate() {
        if t + 1 < w {
            continue;
        }
        let (lo, hi) = (t + 1 - w, t + k);
        if covers(&fold.train, lo, hi) {
            out.train.push(pos);
        } else if covers(&[fold.validation], lo, hi) {
            out.validation.push(pos);
        } else if covers(&[fold.test], lo, hi) {
            out.test.push(pos);
        }
    }
    out.train_indices = fold
        .train
        .iter()
        .flat_map(|&i| intervals[i].start..intervals[i].end)
        .collect();
    Ok(out)
}

fn merge(mut ranges: Vec<Interval>) -> Vec<Interval> {
    ranges.sort_by_key(|r| r.start);
    let mut out: Vec<Interval> = Vec::with_capacity(ranges.len());
    for r in ranges {
        match out.last_mut() {
            Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
            _ => out.push(r),
        }
    }
    out
}
