//! Pseudo-polynomial dynamic program over release-date segments.
//!
//! The distinct release dates `r_1 < ... < r_k` cut time into segments.
//! A [`BoundaryProfile`] guesses, for every release date after the first,
//! how far a job started in the previous segment runs past it (its
//! *incursion* `e`, `0` meaning no such job). Segment `l` then starts at
//! `s_l = r_l + e_l` and may hold `cap_l = s_{l+1} - s_l` units of work.
//!
//! For a fixed profile, jobs are taken in due-date order and the table
//! `T[j, t_1, ..., t_k]` holds the best weight of early jobs among the first
//! `j` when segment `l` is filled with exactly `t_l` units from its start:
//!
//! ```text
//! T[j, t] = max( T[j-1, t],
//!                max over l with r_l >= r_j and s_l + t_l <= d_j of
//!                    T[j-1, t - p_j e_l] + w_j )
//! ```
//!
//! The answer is the best entry of the last row over all profiles.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Counters, Instance, Schedule, SolveResult, Time, Weight};

pub const DEFAULT_MAX_RELEASES: usize = 4;
pub const DEFAULT_CELL_BUDGET: u64 = 20_000_000;
pub const DEFAULT_MAX_PROFILES: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DpOptions {
    /// Refuse instances with more distinct release dates than this.
    pub max_releases: usize,
    /// Finite cells allowed in one profile's table.
    pub cell_budget: u64,
    pub max_profiles: u64,
    /// Worker threads for the profile sweep; `1` runs inline.
    pub threads: usize,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions {
            max_releases: DEFAULT_MAX_RELEASES,
            cell_budget: DEFAULT_CELL_BUDGET,
            max_profiles: DEFAULT_MAX_PROFILES,
            threads: 1,
        }
    }
}

/// Release segments and the due-date job order shared by every profile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DpConfig {
    /// Sorted distinct release dates.
    pub releases: Vec<Time>,
    /// Jobs by non-descending due date, ties by index.
    pub job_order: Vec<usize>,
    /// End of the last segment: `max(d_max, r_max)`. No job can be early
    /// after `d_max`; the `r_max` floor keeps the last segment non-empty.
    pub horizon: Time,
    pub p_max: Time,
}

impl DpConfig {
    pub fn new(inst: &Instance) -> Self {
        let mut job_order: Vec<usize> = (0..inst.n()).collect();
        job_order.sort_by_key(|&j| (inst.job(j).d, j));
        DpConfig {
            releases: inst.release_dates(),
            job_order,
            horizon: inst.d_max().max(inst.r_max()),
            p_max: inst.p_max(),
        }
    }

    pub fn segments(&self) -> usize {
        self.releases.len()
    }
}

/// Guessed incursions at every release date but the first, with the
/// segment starts and capacities they imply.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BoundaryProfile {
    incursions: Vec<Time>,
    starts: Vec<Time>,
    caps: Vec<Time>,
}

impl BoundaryProfile {
    /// Returns `None` for an inconsistent guess: a negative capacity, or a
    /// segment start beyond the next release date whose job does not also
    /// account for that release date.
    pub fn new(config: &DpConfig, incursions: Vec<Time>) -> Option<Self> {
        let k = config.segments();
        assert_eq!(incursions.len(), k.saturating_sub(1), "one incursion per release date after the first");
        let mut starts = Vec::with_capacity(k);
        starts.push(config.releases[0]);
        for (l, &e) in incursions.iter().enumerate() {
            starts.push(config.releases[l + 1] + e);
        }
        let mut caps = Vec::with_capacity(k);
        for l in 0..k {
            let next = if l + 1 < k { starts[l + 1] } else { config.horizon };
            if next < starts[l] {
                return None;
            }
            if l + 1 < k && starts[l] > config.releases[l + 1] && next != starts[l] {
                return None;
            }
            caps.push(next - starts[l]);
        }
        Some(BoundaryProfile { incursions, starts, caps })
    }

    pub fn incursions(&self) -> &[Time] {
        &self.incursions
    }

    pub fn starts(&self) -> &[Time] {
        &self.starts
    }

    pub fn caps(&self) -> &[Time] {
        &self.caps
    }
}

/// Lazily walks `{0, ..., p_max - 1}^(k-1)` and keeps consistent vectors.
pub struct Profiles {
    config: DpConfig,
    next: Option<Vec<Time>>,
}

impl Iterator for Profiles {
    type Item = BoundaryProfile;

    fn next(&mut self) -> Option<BoundaryProfile> {
        let limit = self.config.p_max;
        loop {
            let current = self.next.take()?;
            let mut succ = current.clone();
            let mut carried = true;
            for digit in succ.iter_mut().rev() {
                *digit += 1;
                if *digit < limit {
                    carried = false;
                    break;
                }
                *digit = 0;
            }
            if !carried {
                self.next = Some(succ);
            }
            if let Some(profile) = BoundaryProfile::new(&self.config, current) {
                return Some(profile);
            }
        }
    }
}

pub fn enumerate_profiles(inst: &Instance) -> Result<Profiles> {
    enumerate_profiles_with(inst, &DpOptions::default())
}

pub fn enumerate_profiles_with(inst: &Instance, options: &DpOptions) -> Result<Profiles> {
    let config = DpConfig::new(inst);
    let k = config.segments();
    if k > options.max_releases {
        let hint = if inst.due_dates().len() < k {
            "; the instance has fewer distinct due dates, try solving its reversal"
        } else {
            ""
        };
        return Err(Error::TooLarge {
            parameter: "distinct release dates",
            value: k as u128,
            limit: options.max_releases as u128,
            hint,
        });
    }
    let profiles = profile_bound(&config);
    if profiles > options.max_profiles as u128 {
        return Err(Error::too_large("boundary profiles", profiles, options.max_profiles));
    }
    let first = vec![0; k - 1];
    Ok(Profiles { config, next: Some(first) })
}

/// `p_max^(k-1)`, the number of incursion vectors before pruning.
pub fn profile_bound(config: &DpConfig) -> u128 {
    (config.p_max as u128).saturating_pow(config.segments() as u32 - 1)
}

/// How a finite cell was reached from the previous row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Step {
    Skip,
    Segment(u8),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Cell {
    value: Weight,
    step: Step,
}

impl Cell {
    /// Higher value wins; on ties the earlier step (skip, then lower segment).
    fn beats(&self, other: &Cell) -> bool {
        self.value > other.value || (self.value == other.value && self.step < other.step)
    }
}

#[derive(Clone, Debug)]
enum Row {
    Dense(Vec<Option<Cell>>),
    Sparse(HashMap<u128, Cell>),
}

impl Row {
    fn get(&self, key: u128) -> Option<Cell> {
        match self {
            Row::Dense(v) => v[key as usize],
            Row::Sparse(m) => m.get(&key).copied(),
        }
    }

    fn offer(&mut self, key: u128, cell: Cell) {
        match self {
            Row::Dense(v) => {
                let slot = &mut v[key as usize];
                if slot.is_none_or(|old| cell.beats(&old)) {
                    *slot = Some(cell);
                }
            }
            Row::Sparse(m) => {
                m.entry(key)
                    .and_modify(|old| {
                        if cell.beats(old) {
                            *old = cell
                        }
                    })
                    .or_insert(cell);
            }
        }
    }

    fn finite(&self) -> Vec<(u128, Cell)> {
        match self {
            Row::Dense(v) => v.iter().enumerate().filter_map(|(k, c)| c.map(|c| (k as u128, c))).collect(),
            Row::Sparse(m) => m.iter().map(|(&k, &c)| (k, c)).collect(),
        }
    }

    fn len(&self) -> u64 {
        match self {
            Row::Dense(v) => v.iter().filter(|c| c.is_some()).count() as u64,
            Row::Sparse(m) => m.len() as u64,
        }
    }
}

/// All rows of one profile's table. Cells are keyed by the mixed-radix
/// encoding of `(t_1, ..., t_k)` with `t_l` in `0..=dims[l]-1`.
#[derive(Clone, Debug)]
pub struct DpTable {
    dims: Vec<u128>,
    strides: Vec<u128>,
    rows: Vec<Row>,
}

impl DpTable {
    fn key(&self, t: &[Time]) -> Option<u128> {
        let mut key = 0;
        for ((&v, &dim), &stride) in t.iter().zip(&self.dims).zip(&self.strides) {
            if v as u128 >= dim {
                return None;
            }
            key += v as u128 * stride;
        }
        Some(key)
    }

    fn decode(&self, key: u128) -> Vec<Time> {
        self.dims.iter().zip(&self.strides).map(|(&dim, &stride)| ((key / stride) % dim) as Time).collect()
    }

    /// `T[row, t]`, or `None` for minus infinity.
    pub fn value(&self, row: usize, t: &[Time]) -> Option<Weight> {
        let key = self.key(t)?;
        self.rows.get(row)?.get(key).map(|c| c.value)
    }

    pub fn step(&self, row: usize, t: &[Time]) -> Option<Step> {
        let key = self.key(t)?;
        self.rows.get(row)?.get(key).map(|c| c.step)
    }

    /// Number of rows, including the base row 0.
    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    /// Finite entries summed over all rows.
    pub fn finite_cells(&self) -> u64 {
        self.rows.iter().map(Row::len).sum()
    }

    /// Finite entries of rows `1..=n` that schedule at least one job, i.e.
    /// everything except the base cell and the all-zero cell of each row.
    /// This is the quantity bounded by `n * (n * p_max)^k`.
    pub fn occupied_cells(&self) -> u64 {
        self.rows.iter().skip(1).map(|row| row.len() - u64::from(row.get(0).is_some())).sum()
    }

    /// Finite cells of one row as `(t, value)`, sorted by `t`.
    pub fn row_cells(&self, row: usize) -> Vec<(Vec<Time>, Weight)> {
        let mut cells: Vec<_> = self.rows[row].finite().into_iter().map(|(k, c)| (self.decode(k), c.value)).collect();
        cells.sort();
        cells
    }

    /// Best cell of the last row; ties go to the lexicographically smallest `t`.
    pub fn argmax(&self) -> (Vec<Time>, Weight) {
        let last = self.rows.len() - 1;
        let mut best: Option<(Vec<Time>, Weight)> = None;
        for (t, value) in self.row_cells(last) {
            if best.as_ref().is_none_or(|(_, v)| value > *v) {
                best = Some((t, value));
            }
        }
        best.expect("the all-zero cell is always finite")
    }
}

/// Fills the table for one profile; returns the best last-row value.
pub fn dp_solve(inst: &Instance, config: &DpConfig, profile: &BoundaryProfile) -> (Weight, DpTable) {
    dp_solve_with_budget(inst, config, profile, u64::MAX).expect("an unlimited budget cannot be exceeded")
}

fn dp_solve_with_budget(
    inst: &Instance,
    config: &DpConfig,
    profile: &BoundaryProfile,
    budget: u64,
) -> Result<(Weight, DpTable)> {
    let k = config.segments();
    // t_l never exceeds its capacity nor the work that may enter segment l
    let dims: Vec<u128> = (0..k)
        .map(|l| {
            let eligible: Time = inst.jobs().iter().filter(|j| j.r <= config.releases[l]).map(|j| j.p).sum();
            profile.caps[l].min(eligible) as u128 + 1
        })
        .collect();
    let mut strides = vec![1u128; k];
    for l in 1..k {
        strides[l] = strides[l - 1].saturating_mul(dims[l - 1]);
    }
    let row_size = strides[k - 1].saturating_mul(dims[k - 1]);
    let rows_needed = (inst.n() as u128 + 1).saturating_mul(row_size);
    let dense = k <= 2 && rows_needed <= budget as u128;
    let empty_row = || if dense { Row::Dense(vec![None; row_size as usize]) } else { Row::Sparse(HashMap::new()) };

    let mut base = empty_row();
    base.offer(0, Cell { value: 0, step: Step::Skip });
    let mut table = DpTable { dims, strides, rows: vec![base] };
    let mut cells = 1u64;

    for &job_index in &config.job_order {
        let job = inst.job(job_index);
        let prev = table.rows.last().expect("base row");
        let mut row = empty_row();
        for (key, cell) in prev.finite() {
            row.offer(key, Cell { value: cell.value, step: Step::Skip });
            let t = table.decode(key);
            for l in 0..k {
                let fill = t[l] + job.p;
                if config.releases[l] >= job.r
                    && fill <= profile.caps[l]
                    && profile.starts[l] + fill <= job.d
                    && (fill as u128) < table.dims[l]
                {
                    let next = key + job.p as u128 * table.strides[l];
                    row.offer(next, Cell { value: cell.value + job.w, step: Step::Segment(l as u8) });
                }
            }
        }
        cells += row.len();
        if cells > budget {
            return Err(Error::too_large("dp cells", cells, budget));
        }
        table.rows.push(row);
    }
    let (_, value) = table.argmax();
    Ok((value, table))
}

/// Rebuilds the schedule behind cell `T[row, t]`: walking back through the
/// rows, a job that consumed segment `l` starts at `s_l + t_l - p_j`. The
/// jobs not selected are appended as tardy.
pub fn backtrack(
    inst: &Instance,
    config: &DpConfig,
    profile: &BoundaryProfile,
    table: &DpTable,
    row: usize,
    t: &[Time],
) -> Result<Schedule> {
    let mut t = t.to_vec();
    let mut early = Schedule::new();
    for i in (1..=row).rev() {
        let step = table
            .step(i, &t)
            .ok_or_else(|| Error::Internal(format!("dp cell {i} {t:?} on the backtrack path is not finite")))?;
        if let Step::Segment(l) = step {
            let l = l as usize;
            let job_index = config.job_order[i - 1];
            let p = inst.job(job_index).p;
            if t[l] < p {
                return Err(Error::Internal(format!("dp predecessor of row {i} underflows segment {l}")));
            }
            early.set(job_index, profile.starts[l] + t[l] - p);
            t[l] -= p;
        }
    }
    if t.iter().any(|&v| v != 0) {
        return Err(Error::Internal(format!("dp backtrack ended at {t:?} instead of the origin")));
    }
    Ok(crate::model::complete_schedule(inst, early))
}

/// `n * (n * p_max)^k`, the bound on [`DpTable::occupied_cells`].
pub fn cell_bound(inst: &Instance, k: usize) -> u128 {
    let n = inst.n() as u128;
    n.saturating_mul((n * inst.p_max() as u128).saturating_pow(k as u32))
}

pub fn solve_dp(inst: &Instance) -> Result<SolveResult> {
    solve_dp_with(inst, &DpOptions::default())
}

pub fn solve_dp_with(inst: &Instance, options: &DpOptions) -> Result<SolveResult> {
    let profiles = enumerate_profiles_with(inst, options)?;
    let config = profiles.config.clone();
    let bound = cell_bound(inst, config.segments());

    let run = |(index, profile): (usize, BoundaryProfile)| -> Result<(Weight, usize, BoundaryProfile, u64)> {
        let (value, table) = dp_solve_with_budget(inst, &config, &profile, options.cell_budget)?;
        let occupied = table.occupied_cells();
        if occupied as u128 > bound {
            return Err(Error::Internal(format!("dp table has {occupied} occupied cells, above the bound {bound}")));
        }
        Ok((value, index, profile, table.finite_cells()))
    };
    // keep the first profile among equals so the result is thread-count independent
    let better = |a: (Weight, usize, BoundaryProfile, u64), b: (Weight, usize, BoundaryProfile, u64)| {
        if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }
    };
    let sweep = || -> Result<(Option<(Weight, usize, BoundaryProfile)>, u64, u64)> {
        let results: Vec<_> = if options.threads > 1 {
            profiles.enumerate().par_bridge().map(run).collect::<Result<_>>()?
        } else {
            profiles.enumerate().map(run).collect::<Result<_>>()?
        };
        let count = results.len() as u64;
        let cells = results.iter().map(|r| r.3).sum();
        let best = results.into_iter().reduce(better).map(|(v, i, p, _)| (v, i, p));
        Ok((best, count, cells))
    };
    let (best, count, cells) = if options.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.threads)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        pool.install(sweep)?
    } else {
        sweep()?
    };

    if count as u128 > profile_bound(&config) {
        return Err(Error::Internal(format!("{count} profiles enumerated, above p_max^(k-1)")));
    }
    let (value, _, profile) = best.expect("the all-zero profile is always consistent");
    // rebuild the winning table once rather than keeping every table alive
    let (again, table) = dp_solve(inst, &config, &profile);
    debug_assert_eq!(again, value);
    let (t, _) = table.argmax();
    let schedule = backtrack(inst, &config, &profile, &table, inst.n(), &t)?;
    let mut early = Schedule::new();
    for j in schedule.early_jobs(inst) {
        early.set(j, schedule.start(j).expect("complete"));
    }
    let counters = Counters { dp_cells: cells, profiles: count, ..Counters::default() };
    let result = SolveResult::from_early(inst, early, counters)?;
    if result.best_weight != value {
        return Err(Error::Internal(format!("dp value {value} but backtracked schedule gives {}", result.best_weight)));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{objective, validate, Job};

    fn inst(jobs: &[(u64, u64, u64, u64)]) -> Instance {
        Instance::new(jobs.iter().map(|&(p, r, d, w)| Job::new(p, r, d, w)).collect()).unwrap()
    }

    fn e1() -> Instance {
        inst(&[(3, 0, 7, 3), (4, 0, 7, 4), (5, 0, 7, 5)])
    }

    fn e2() -> Instance {
        inst(&[(2, 0, 2, 1), (2, 2, 4, 1), (3, 0, 4, 3)])
    }

    #[test]
    fn single_release_has_one_empty_profile() {
        let profiles: Vec<_> = enumerate_profiles(&e1()).unwrap().collect();
        assert_eq!(profiles.len(), 1);
        assert!(profiles[0].incursions().is_empty());
    }

    #[test]
    fn two_releases_three_profiles() {
        let profiles: Vec<_> = enumerate_profiles(&e2()).unwrap().collect();
        let e: Vec<_> = profiles.iter().map(|p| p.incursions().to_vec()).collect();
        assert_eq!(e, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn release_limit() {
        let i = inst(&[(1, 0, 9, 1), (1, 1, 9, 1), (1, 2, 9, 1)]);
        let options = DpOptions { max_releases: 2, ..DpOptions::default() };
        let err = enumerate_profiles_with(&i, &options).err().unwrap();
        assert!(matches!(err, Error::TooLarge { parameter: "distinct release dates", value: 3, .. }));
        assert!(err.to_string().contains("reversal"));
    }

    #[test]
    fn inconsistent_profiles_are_pruned() {
        // a job crossing r_2 = 1 by 3 units also crosses r_3 = 2, so e_3 must be 2
        let i = inst(&[(4, 0, 9, 1), (1, 1, 9, 1), (1, 2, 9, 1)]);
        let config = DpConfig::new(&i);
        assert!(BoundaryProfile::new(&config, vec![3, 2]).is_some());
        assert!(BoundaryProfile::new(&config, vec![3, 0]).is_none());
        assert!(BoundaryProfile::new(&config, vec![3, 3]).is_none());
        let p = BoundaryProfile::new(&config, vec![3, 2]).unwrap();
        assert_eq!(p.starts(), &[0, 4, 4]);
        assert_eq!(p.caps(), &[4, 0, 5]);
    }

    #[test]
    fn e2_per_profile_values() {
        let i = e2();
        let config = DpConfig::new(&i);
        let p0 = BoundaryProfile::new(&config, vec![0]).unwrap();
        assert_eq!(dp_solve(&i, &config, &p0).0, 2);
        let p1 = BoundaryProfile::new(&config, vec![1]).unwrap();
        let (value, table) = dp_solve(&i, &config, &p1);
        assert_eq!(value, 3);
        assert_eq!(table.value(0, &[0, 0]), Some(0));
        assert_eq!(table.value(0, &[1, 0]), None);
        assert_eq!(table.value(3, &[3, 0]), Some(3));
        let s = backtrack(&i, &config, &p1, &table, 3, &[3, 0]).unwrap();
        assert_eq!(s.start(2), Some(0));
        assert_eq!(objective(&i, &s).unwrap(), 3);
    }

    #[test]
    fn zero_cell_backtracks_to_all_tardy() {
        let i = e2();
        let config = DpConfig::new(&i);
        let p = BoundaryProfile::new(&config, vec![0]).unwrap();
        let (_, table) = dp_solve(&i, &config, &p);
        let s = backtrack(&i, &config, &p, &table, 3, &[0, 0]).unwrap();
        assert_eq!(objective(&i, &s).unwrap(), 0);
        assert!(validate(&i, &s).is_valid());
    }

    #[test]
    fn single_fitting_job_starts_at_segment_start() {
        let i = inst(&[(2, 3, 9, 4)]);
        let res = solve_dp(&i).unwrap();
        assert_eq!(res.best_weight, 4);
        assert_eq!(res.schedule.start(0), Some(3));
    }

    #[test]
    fn solve_examples() {
        assert_eq!(solve_dp(&e1()).unwrap().best_weight, 7);
        assert_eq!(solve_dp(&e2()).unwrap().best_weight, 3);
        let disjoint = inst(&[(2, 0, 2, 1), (1, 3, 4, 5), (2, 6, 9, 2)]);
        assert_eq!(solve_dp(&disjoint).unwrap().best_weight, 8);
    }

    #[test]
    fn non_decreasing_rows() {
        let i = inst(&[(2, 0, 5, 1), (3, 1, 6, 2), (1, 1, 3, 3), (2, 3, 8, 1)]);
        let config = DpConfig::new(&i);
        for profile in enumerate_profiles(&i).unwrap() {
            let (_, table) = dp_solve(&i, &config, &profile);
            for row in 1..table.rows() {
                for (t, v) in table.row_cells(row - 1) {
                    assert!(table.value(row, &t).unwrap() >= v);
                }
            }
        }
    }

    #[test]
    fn threads_do_not_change_the_answer() {
        let i = inst(&[(2, 0, 5, 1), (3, 1, 6, 2), (1, 1, 3, 3), (2, 3, 8, 1), (4, 0, 9, 2)]);
        let one = solve_dp(&i).unwrap();
        let four = solve_dp_with(&i, &DpOptions { threads: 4, ..DpOptions::default() }).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn cell_budget_is_enforced() {
        let i = inst(&[(2, 0, 50, 1), (3, 1, 60, 2), (1, 2, 30, 3), (2, 3, 80, 1)]);
        let options = DpOptions { cell_budget: 10, ..DpOptions::default() };
        assert!(matches!(solve_dp_with(&i, &options), Err(Error::TooLarge { parameter: "dp cells", .. })));
    }
}
