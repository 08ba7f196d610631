//! Brute-force ground truth: a dynamic program over job subsets.
//!
//! `f(S)` is the smallest makespan of a schedule in which every job of `S`
//! is early, or infeasible. With `j` as the last job,
//! `f(S) = min_j max(f(S \ {j}), r_j) + p_j` over the `j` that still finish
//! by `d_j`. Idle time is implicit in the `max`.

use crate::error::{Error, Result};
use crate::model::{Counters, Instance, Schedule, SolveResult, Time};

/// Largest job count the subset table accepts by default.
pub const DEFAULT_MAX_JOBS: usize = 24;

const INFEASIBLE: Time = Time::MAX;

/// `f` and the argmin last job for every subset of a job list.
#[derive(Clone, Debug)]
pub struct SubsetTable {
    jobs: Vec<usize>,
    f: Vec<Time>,
    last: Vec<u8>,
}

impl SubsetTable {
    /// Builds the table over `jobs` (indices into `inst`). Bit `k` of a mask
    /// stands for `jobs[k]`.
    pub fn build(inst: &Instance, jobs: &[usize], max_jobs: usize) -> Result<Self> {
        if jobs.len() > max_jobs {
            return Err(Error::too_large("jobs", jobs.len() as u64, max_jobs as u64));
        }
        let k = jobs.len();
        let size = 1usize << k;
        let mut f = vec![INFEASIBLE; size];
        let mut last = vec![u8::MAX; size];
        f[0] = 0;
        for mask in 1..size {
            let mut best = INFEASIBLE;
            let mut arg = u8::MAX;
            let mut bits = mask;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let prev = f[mask ^ (1 << b)];
                if prev == INFEASIBLE {
                    continue;
                }
                let job = inst.job(jobs[b]);
                let completion = prev.max(job.r) + job.p;
                // ties keep the smallest index, which is scanned first
                if completion <= job.d && completion < best {
                    best = completion;
                    arg = b as u8;
                }
            }
            f[mask] = best;
            last[mask] = arg;
        }
        Ok(SubsetTable { jobs: jobs.to_vec(), f, last })
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn completion(&self, mask: usize) -> Option<Time> {
        match self.f[mask] {
            INFEASIBLE => None,
            t => Some(t),
        }
    }

    /// Jobs of a feasible subset in processing order.
    pub fn order(&self, mut mask: usize) -> Vec<usize> {
        let mut rev = Vec::new();
        while mask != 0 {
            let b = self.last[mask] as usize;
            assert!(b < self.jobs.len(), "order() called on an infeasible subset");
            rev.push(self.jobs[b]);
            mask ^= 1 << b;
        }
        rev.reverse();
        rev
    }
}

/// Minimum makespan over schedules that keep every job of `subset` early.
pub fn min_completion(inst: &Instance, subset: &[usize]) -> Result<Option<Time>> {
    min_completion_with(inst, subset, DEFAULT_MAX_JOBS)
}

pub fn min_completion_with(inst: &Instance, subset: &[usize], max_jobs: usize) -> Result<Option<Time>> {
    let table = SubsetTable::build(inst, subset, max_jobs)?;
    Ok(table.completion(table.len() - 1))
}

pub fn solve_exact(inst: &Instance) -> Result<SolveResult> {
    solve_exact_with(inst, DEFAULT_MAX_JOBS)
}

pub fn solve_exact_with(inst: &Instance, max_jobs: usize) -> Result<SolveResult> {
    let all: Vec<usize> = (0..inst.n()).collect();
    let table = SubsetTable::build(inst, &all, max_jobs)?;
    let mut best = (0, 0usize);
    for mask in 0..table.len() {
        if table.completion(mask).is_none() {
            continue;
        }
        let mut weight = 0;
        let mut bits = mask;
        while bits != 0 {
            weight += inst.job(bits.trailing_zeros() as usize).w;
            bits &= bits - 1;
        }
        if weight > best.0 {
            best = (weight, mask);
        }
    }

    let mut early = Schedule::new();
    let mut cursor = 0;
    for job in table.order(best.1) {
        let start = cursor.max(inst.job(job).r);
        early.set(job, start);
        cursor = start + inst.job(job).p;
    }
    let counters = Counters { subsets: table.len() as u64, ..Counters::default() };
    let result = SolveResult::from_early(inst, early, counters)?;
    if result.best_weight != best.0 {
        return Err(Error::Internal(format!(
            "subset table promised {} but the rebuilt schedule gives {}",
            best.0, result.best_weight
        )));
    }
    Ok(result)
}
