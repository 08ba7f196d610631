//! Jobs, instances, schedules and the operations every solver shares:
//! validation, objective evaluation, parameter statistics and the
//! release/due-date reversal.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer time unit. All times in this crate are exact integers.
pub type Time = u64;
pub type Weight = u64;

/// One job: processing time `p`, release date `r`, due date `d`, weight `w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    pub p: Time,
    pub r: Time,
    pub d: Time,
    pub w: Weight,
}

impl Job {
    pub const fn new(p: Time, r: Time, d: Time, w: Weight) -> Self {
        Job { p, r, d, w }
    }

    /// Whether the job can be early in any schedule at all.
    pub fn can_be_early(&self) -> bool {
        self.r + self.p <= self.d
    }
}

/// A non-empty list of jobs with positive processing times.
///
/// Job indices are positions in the list and are stable across every
/// transformation in the crate (reversal, due-date reduction, ...).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Instance {
    jobs: Vec<Job>,
}

impl Instance {
    pub fn new(jobs: Vec<Job>) -> Result<Self> {
        if jobs.is_empty() {
            return Err(Error::InvalidInstance("an instance needs at least one job".into()));
        }
        if let Some(i) = jobs.iter().position(|j| j.p == 0) {
            return Err(Error::InvalidInstance(format!(
                "job {i} has zero processing time; normalize it away before solving"
            )));
        }
        Ok(Instance { jobs })
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn job(&self, index: usize) -> &Job {
        &self.jobs[index]
    }

    pub fn n(&self) -> usize {
        self.jobs.len()
    }

    pub fn d_max(&self) -> Time {
        self.jobs.iter().map(|j| j.d).max().unwrap_or(0)
    }

    pub fn p_max(&self) -> Time {
        self.jobs.iter().map(|j| j.p).max().unwrap_or(0)
    }

    pub fn r_min(&self) -> Time {
        self.jobs.iter().map(|j| j.r).min().unwrap_or(0)
    }

    pub fn r_max(&self) -> Time {
        self.jobs.iter().map(|j| j.r).max().unwrap_or(0)
    }

    pub fn total_weight(&self) -> Weight {
        self.jobs.iter().map(|j| j.w).sum()
    }

    /// Sorted distinct release dates.
    pub fn release_dates(&self) -> Vec<Time> {
        distinct(self.jobs.iter().map(|j| j.r))
    }

    /// Sorted distinct due dates.
    pub fn due_dates(&self) -> Vec<Time> {
        distinct(self.jobs.iter().map(|j| j.d))
    }
}

fn distinct(values: impl Iterator<Item = Time>) -> Vec<Time> {
    values.collect::<BTreeSet<_>>().into_iter().collect()
}

/// Start times keyed by job index.
///
/// A schedule produced by a solver is total; one read from a file may not
/// be, which is what [`validate`] reports.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Schedule {
    start: BTreeMap<usize, Time>,
}

impl Schedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_starts(starts: impl IntoIterator<Item = Time>) -> Self {
        Schedule { start: starts.into_iter().enumerate().collect() }
    }

    pub fn set(&mut self, job: usize, start: Time) {
        self.start.insert(job, start);
    }

    pub fn start(&self, job: usize) -> Option<Time> {
        self.start.get(&job).copied()
    }

    pub fn len(&self) -> usize {
        self.start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start.is_empty()
    }

    /// `(job, start)` pairs in job order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Time)> + '_ {
        self.start.iter().map(|(&j, &s)| (j, s))
    }

    /// Jobs that complete by their due date.
    pub fn early_jobs<'a>(&'a self, inst: &'a Instance) -> impl Iterator<Item = usize> + 'a {
        self.iter().filter(move |&(j, s)| j < inst.n() && s + inst.job(j).p <= inst.job(j).d).map(|(j, _)| j)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Violation {
    MissingJob { job: usize },
    UnknownJob { job: usize },
    Release { job: usize, start: Time, release: Time },
    Overlap { first: usize, second: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingJob { job } => write!(f, "job {job} has no start time"),
            Violation::UnknownJob { job } => write!(f, "start time given for unknown job {job}"),
            Violation::Release { job, start, release } => {
                write!(f, "job {job} starts at {start} before its release date {release}")
            }
            Violation::Overlap { first, second } => write!(f, "jobs {first} and {second} overlap"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.into_iter().next() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidSchedule(v)),
        }
    }
}

/// Lists every way `sched` fails to be a schedule for `inst`: missing or
/// unknown jobs, starts before release, and every overlapping pair.
pub fn validate(inst: &Instance, sched: &Schedule) -> ValidationReport {
    let mut violations = Vec::new();
    for job in 0..inst.n() {
        if sched.start(job).is_none() {
            violations.push(Violation::MissingJob { job });
        }
    }
    for (job, start) in sched.iter() {
        if job >= inst.n() {
            violations.push(Violation::UnknownJob { job });
        } else if start < inst.job(job).r {
            violations.push(Violation::Release { job, start, release: inst.job(job).r });
        }
    }

    let mut by_start: Vec<(Time, usize)> = sched.iter().filter(|&(j, _)| j < inst.n()).map(|(j, s)| (s, j)).collect();
    by_start.sort_unstable();
    for (k, &(start, job)) in by_start.iter().enumerate() {
        let end = start + inst.job(job).p;
        for &(other_start, other) in &by_start[k + 1..] {
            if other_start >= end {
                break;
            }
            let (first, second) = if job < other { (job, other) } else { (other, job) };
            violations.push(Violation::Overlap { first, second });
        }
    }
    ValidationReport { violations }
}

/// Weighted number of early jobs. Fails on the first violated schedule invariant.
pub fn objective(inst: &Instance, sched: &Schedule) -> Result<Weight> {
    validate(inst, sched).into_result()?;
    Ok(sched.early_jobs(inst).map(|j| inst.job(j).w).sum())
}

/// Number of distinct values per job field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamProfile {
    pub p_count: usize,
    pub w_count: usize,
    pub r_count: usize,
    pub d_count: usize,
}

pub fn stats(inst: &Instance) -> ParamProfile {
    let count = |f: fn(&Job) -> u64| inst.jobs.iter().map(f).collect::<BTreeSet<_>>().len();
    ParamProfile { p_count: count(|j| j.p), w_count: count(|j| j.w), r_count: count(|j| j.r), d_count: count(|j| j.d) }
}

/// Swaps the roles of release and due dates: `r' = d_max - d`, `d' = d_max - r`.
///
/// Both instances have the same optimum. Fails if a job is released after
/// `d_max`; such a job can never be early and should be clamped first.
pub fn reverse_instance(inst: &Instance) -> Result<Instance> {
    let d_max = inst.d_max();
    if let Some(i) = inst.jobs.iter().position(|j| j.r > d_max) {
        return Err(Error::InvalidInstance(format!(
            "job {i} is released at {} after the last due date {d_max}; clamp it before reversing",
            inst.job(i).r
        )));
    }
    let jobs = inst.jobs.iter().map(|j| Job { p: j.p, r: d_max - j.d, d: d_max - j.r, w: j.w }).collect();
    Instance::new(jobs)
}

/// Maps a schedule for `inst` to one for `reverse_instance(inst)` with the
/// same objective. Early jobs move to `d_max - start - p`; tardy jobs are
/// re-appended after the reversed instance's horizon.
pub fn reverse_schedule(inst: &Instance, sched: &Schedule) -> Result<Schedule> {
    validate(inst, sched).into_result()?;
    let reversed = reverse_instance(inst)?;
    let d_max = inst.d_max();
    let mut early = Schedule::new();
    for job in sched.early_jobs(inst) {
        let start = sched.start(job).expect("validated schedule is total");
        early.set(job, d_max - start - inst.job(job).p);
    }
    Ok(complete_schedule(&reversed, early))
}

/// Fills in every job missing from `partial`: in index order, each one is
/// appended after `max(d_max, latest busy time)`, respecting its release date.
/// Jobs placed this way are tardy.
pub fn complete_schedule(inst: &Instance, mut partial: Schedule) -> Schedule {
    let busy = partial.iter().filter(|&(j, _)| j < inst.n()).map(|(j, s)| s + inst.job(j).p).max().unwrap_or(0);
    let mut cursor = busy.max(inst.d_max());
    for job in 0..inst.n() {
        if partial.start(job).is_none() {
            let start = cursor.max(inst.job(job).r);
            partial.set(job, start);
            cursor = start + inst.job(job).p;
        }
    }
    partial
}

/// Work counters reported alongside a solution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub milp_nodes: u64,
    pub lp_pivots: u64,
    pub dp_cells: u64,
    pub profiles: u64,
    pub structures: u64,
    pub subsets: u64,
}

impl Counters {
    pub fn absorb(&mut self, other: &Counters) {
        self.milp_nodes += other.milp_nodes;
        self.lp_pivots += other.lp_pivots;
        self.dp_cells += other.dp_cells;
        self.profiles += other.profiles;
        self.structures += other.structures;
        self.subsets += other.subsets;
    }
}

/// An optimal weight together with a schedule attaining it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    pub best_weight: Weight,
    pub schedule: Schedule,
    pub counters: Counters,
}

impl SolveResult {
    /// Builds a result from the early part of a schedule, completing it with
    /// the tardy-job policy and checking the claimed weight.
    pub(crate) fn from_early(inst: &Instance, early: Schedule, counters: Counters) -> Result<Self> {
        let schedule = complete_schedule(inst, early);
        let best_weight = objective(inst, &schedule).map_err(|e| Error::Internal(format!("solver produced {e}")))?;
        Ok(SolveResult { best_weight, schedule, counters })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(jobs: &[(u64, u64, u64, u64)]) -> Instance {
        Instance::new(jobs.iter().map(|&(p, r, d, w)| Job::new(p, r, d, w)).collect()).unwrap()
    }

    fn e1() -> Instance {
        inst(&[(3, 0, 7, 3), (4, 0, 7, 4), (5, 0, 7, 5)])
    }

    #[test]
    fn objective_single_job() {
        let i = inst(&[(2, 0, 3, 5)]);
        assert_eq!(objective(&i, &Schedule::from_starts([0])).unwrap(), 5);
        assert_eq!(objective(&i, &Schedule::from_starts([2])).unwrap(), 0);
    }

    #[test]
    fn objective_e1() {
        assert_eq!(objective(&e1(), &Schedule::from_starts([0, 3, 7])).unwrap(), 7);
    }

    #[test]
    fn objective_rejects_invalid() {
        let i = inst(&[(2, 3, 9, 1)]);
        let err = objective(&i, &Schedule::from_starts([2])).unwrap_err();
        assert!(matches!(err, Error::InvalidSchedule(Violation::Release { job: 0, .. })));
    }

    #[test]
    fn validate_reports_overlap() {
        let i = inst(&[(2, 0, 9, 1), (2, 0, 9, 1)]);
        let report = validate(&i, &Schedule::from_starts([0, 1]));
        assert_eq!(report.violations, vec![Violation::Overlap { first: 0, second: 1 }]);
    }

    #[test]
    fn validate_reports_release() {
        let i = inst(&[(2, 3, 9, 1)]);
        let report = validate(&i, &Schedule::from_starts([2]));
        assert_eq!(report.violations, vec![Violation::Release { job: 0, start: 2, release: 3 }]);
    }

    #[test]
    fn validate_reports_missing_and_unknown() {
        let i = inst(&[(1, 0, 9, 1), (1, 0, 9, 1)]);
        let mut s = Schedule::new();
        s.set(0, 0);
        s.set(5, 3);
        let report = validate(&i, &s);
        assert!(report.violations.contains(&Violation::MissingJob { job: 1 }));
        assert!(report.violations.contains(&Violation::UnknownJob { job: 5 }));
    }

    #[test]
    fn validate_accepts_e1() {
        assert!(validate(&e1(), &Schedule::from_starts([0, 3, 7])).is_valid());
    }

    #[test]
    fn empty_and_zero_length_rejected() {
        assert!(Instance::new(vec![]).is_err());
        assert!(Instance::new(vec![Job::new(0, 0, 1, 1)]).is_err());
    }

    #[test]
    fn reverse_instance_examples() {
        let i = inst(&[(1, 1, 3, 1), (2, 0, 4, 1)]);
        assert_eq!(reverse_instance(&i).unwrap(), i);
        let i = inst(&[(2, 0, 5, 1)]);
        assert_eq!(reverse_instance(&i).unwrap(), i);
        let i = inst(&[(2, 0, 2, 1), (2, 2, 4, 1)]);
        assert_eq!(reverse_instance(&i).unwrap(), inst(&[(2, 2, 4, 1), (2, 0, 2, 1)]));
    }

    #[test]
    fn reverse_instance_rejects_late_release() {
        let i = inst(&[(1, 9, 3, 1), (1, 0, 4, 1)]);
        assert!(matches!(reverse_instance(&i), Err(Error::InvalidInstance(_))));
    }

    #[test]
    fn reverse_schedule_examples() {
        let i = inst(&[(2, 0, 5, 1)]);
        assert_eq!(reverse_schedule(&i, &Schedule::from_starts([0])).unwrap(), Schedule::from_starts([3]));
        let i = inst(&[(2, 0, 2, 1), (2, 2, 4, 1)]);
        assert_eq!(reverse_schedule(&i, &Schedule::from_starts([0, 2])).unwrap(), Schedule::from_starts([2, 0]));
    }

    #[test]
    fn reverse_schedule_moves_tardy_jobs_to_tail() {
        let i = inst(&[(2, 0, 4, 1), (3, 0, 4, 2)]);
        let s = Schedule::from_starts([0, 2]);
        let r = reverse_schedule(&i, &s).unwrap();
        let ri = reverse_instance(&i).unwrap();
        assert!(validate(&ri, &r).is_valid());
        assert_eq!(objective(&ri, &r).unwrap(), objective(&i, &s).unwrap());
    }

    #[test]
    fn stats_examples() {
        let p = stats(&e1());
        assert_eq!((p.p_count, p.w_count, p.r_count, p.d_count), (3, 3, 1, 1));
        let p = stats(&inst(&[(2, 0, 2, 1)]));
        assert_eq!((p.p_count, p.w_count, p.r_count, p.d_count), (1, 1, 1, 1));
        let p = stats(&inst(&[(2, 0, 2, 1), (2, 2, 4, 1)]));
        assert_eq!((p.p_count, p.w_count, p.r_count, p.d_count), (1, 1, 2, 2));
    }

    #[test]
    fn complete_schedule_appends_after_horizon() {
        let i = inst(&[(2, 0, 4, 1), (3, 6, 9, 1), (1, 0, 2, 1)]);
        let mut early = Schedule::new();
        early.set(2, 0);
        let s = complete_schedule(&i, early);
        assert_eq!(s, Schedule::from_starts([9, 11, 0]));
        assert!(validate(&i, &s).is_valid());
    }
}
