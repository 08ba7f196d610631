//! MILP formulation with job types keyed by processing time, weight and due
//! date, for instances with few distinct values of `p`, `w` and `d`.
//!
//! An optimal schedule is guessed up to its *overlap structure*: which due
//! dates are crossed by a running job, and the type of that job. Due dates
//! crossed by the same job form a block; every job with a due date inside
//! a block has to finish before the block starts, so its due date drops to
//! the block start. After the reduction every due date `D_ℓ` is crossed by
//! at most one job, which runs `o_a^ℓ` time units before `D_ℓ` and
//! `o_b^ℓ` after it. The stretch between two crossing jobs is a *gap*.
//!
//! For one structure the model has
//!
//! - integer `x_t^ℓ`: jobs of type `t` placed in the gap ending at `D_ℓ`;
//! - fractional `o_a^ℓ`, `o_b^ℓ` for every due date but the last;
//! - fractional `x_j ∈ [0, 1]`: job `j` is early.
//!
//! Constraints tie the crossing lengths to the type's processing time,
//! keep each crossing between its neighbouring due dates, count jobs per
//! type, bound the work in each gap and keep late-released jobs out of
//! early gaps. Jobs of one type differ only in their release date, so an
//! optimal solution can always be rounded to select the earliest-released
//! ones, and the gaps are then filled back to front.
//!
//! The release rows are stated for the window `[r, D_ℓ - o_a^ℓ]` before
//! the crossing job and are only valid while that window is not empty. The
//! solver therefore also guesses, for each crossing, between which two
//! release dates the crossing job starts ([`StartBracket`]).
//!
//! ```
//! use wtardy::{pwd, Instance, Job};
//!
//! let inst = Instance::new(vec![Job::new(2, 0, 2, 1), Job::new(2, 2, 4, 1), Job::new(3, 0, 4, 3)])?;
//! assert_eq!(pwd::solve_pwd(&inst)?.best_weight, 3);
//! assert_eq!(pwd::solve_pwr(&inst)?.best_weight, 3);
//! # Ok::<(), wtardy::Error>(())
//! ```

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::milp::{self, rat, MilpModel, MilpOptions, Rational, Relation, VarId, VarKind};
use crate::model::{reverse_instance, Counters, Instance, Job, Schedule, SolveResult, Time, Weight};

/// Default cap on `2^{d#}·(|types|+1)^{d#}`.
pub const STRUCTURE_BUDGET: u128 = 100_000;

fn num(v: impl Into<BigInt>) -> Rational {
    Rational::from_integer(v.into())
}

fn diff(a: Time, b: Time) -> Rational {
    num(i128::from(a) - i128::from(b))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PwdType {
    pub p: Time,
    pub w: Weight,
    pub d: Time,
    /// Member jobs by release date, ties by index.
    pub members: Vec<usize>,
}

impl PwdType {
    pub fn count(&self) -> usize {
        self.members.len()
    }
}

/// Types in order of `(p, w, d)`.
pub fn pwd_types(inst: &Instance) -> Vec<PwdType> {
    let mut groups: BTreeMap<(Time, Weight, Time), Vec<usize>> = BTreeMap::new();
    for (j, job) in inst.jobs().iter().enumerate() {
        groups.entry((job.p, job.w, job.d)).or_default().push(j);
    }
    groups
        .into_iter()
        .map(|((p, w, d), mut members)| {
            members.sort_by_key(|&j| (inst.job(j).r, j));
            PwdType { p, w, d, members }
        })
        .collect()
}

/// Consecutive due dates `first..=last` (indices into the sorted distinct
/// due dates), crossed by one job of type `ty` or by nothing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Block {
    pub first: usize,
    pub last: usize,
    pub ty: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OverlapStructure {
    pub blocks: Vec<Block>,
}

impl OverlapStructure {
    /// Checks that the blocks tile the due dates and that every crossing
    /// type is due strictly after its block.
    pub fn check(&self, inst: &Instance, types: &[PwdType]) -> Result<()> {
        let due = inst.due_dates();
        let mut next = 0;
        for b in &self.blocks {
            if b.first != next || b.last < b.first || b.last >= due.len() {
                return Err(Error::State(format!("blocks do not tile the {} due dates", due.len())));
            }
            match b.ty {
                None if b.first != b.last => {
                    return Err(Error::State("a block of several due dates needs a crossing job".into()))
                }
                Some(t) if t >= types.len() || types[t].d <= due[b.last] => {
                    return Err(Error::State(format!("type {t} cannot cross the block ending at {}", due[b.last])))
                }
                _ => {}
            }
            next = b.last + 1;
        }
        if next != due.len() {
            return Err(Error::State(format!("blocks do not tile the {} due dates", due.len())));
        }
        Ok(())
    }
}

/// `2^{d#}·(|types|+1)^{d#}`, saturating.
pub fn structure_bound(inst: &Instance) -> u128 {
    let d = inst.due_dates().len() as u32;
    let t = pwd_types(inst).len() as u128;
    2u128.saturating_pow(d).saturating_mul((t + 1).saturating_pow(d))
}

/// Types that may cross a block ending at due index `last`.
fn crossing_types<'a>(types: &'a [PwdType], due: &[Time], last: usize) -> impl Iterator<Item = usize> + 'a {
    let limit = due[last];
    types.iter().enumerate().filter(move |(_, ty)| ty.d > limit).map(|(t, _)| t)
}

/// Number of admissible structures, by recursion over the first block.
pub fn structure_count(inst: &Instance) -> u128 {
    let due = inst.due_dates();
    let types = pwd_types(inst);
    let k = due.len();
    let mut ways = vec![0u128; k + 1];
    ways[k] = 1;
    for first in (0..k).rev() {
        let mut total = 0u128;
        for last in first..k {
            let crossing = crossing_types(&types, &due, last).count() as u128;
            let choices = if first == last { crossing + 1 } else { crossing };
            total = total.saturating_add(choices.saturating_mul(ways[last + 1]));
        }
        ways[first] = total;
    }
    ways[0]
}

pub fn enumerate_structures(inst: &Instance) -> Result<Vec<OverlapStructure>> {
    enumerate_structures_with(inst, STRUCTURE_BUDGET)
}

/// Every tiling of the due dates into blocks with every admissible
/// crossing type, in lexicographic order of the block list.
pub fn enumerate_structures_with(inst: &Instance, budget: u128) -> Result<Vec<OverlapStructure>> {
    let bound = structure_bound(inst);
    if bound > budget {
        return Err(Error::too_large("overlap structures", bound, budget));
    }
    let due = inst.due_dates();
    let types = pwd_types(inst);
    let mut out = Vec::new();
    let mut stack = Vec::new();
    fill(&types, &due, 0, &mut stack, &mut out);
    debug_assert_eq!(out.len() as u128, structure_count(inst));
    let profile = crate::model::stats(inst);
    let loose = 2u128.saturating_pow(profile.d_count as u32).saturating_mul(
        ((profile.p_count * profile.w_count * profile.d_count) as u128 + 1).saturating_pow(profile.d_count as u32),
    );
    debug_assert!(out.len() as u128 <= loose);
    Ok(out)
}

fn fill(types: &[PwdType], due: &[Time], first: usize, stack: &mut Vec<Block>, out: &mut Vec<OverlapStructure>) {
    if first == due.len() {
        out.push(OverlapStructure { blocks: stack.clone() });
        return;
    }
    for last in first..due.len() {
        let mut choices: Vec<Option<usize>> = Vec::new();
        if first == last {
            choices.push(None);
        }
        choices.extend(crossing_types(types, due, last).map(Some));
        for ty in choices {
            stack.push(Block { first, last, ty });
            fill(types, due, last + 1, stack, out);
            stack.pop();
        }
    }
}

/// An instance after due-date reduction, together with its crossings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reduced {
    pub instance: Instance,
    /// Block starts, ascending. These are the distinct due dates of `instance`.
    pub due: Vec<Time>,
    pub types: Vec<PwdType>,
    /// Per entry of `due`, the type (of `instance`) crossing it.
    pub overlap: Vec<Option<usize>>,
}

/// Moves every due date inside a block to the block start.
pub fn reduce_due_dates(inst: &Instance, structure: &OverlapStructure) -> Result<(Instance, Vec<Time>)> {
    let reduced = reduce(inst, structure)?;
    Ok((reduced.instance, reduced.due))
}

pub fn reduce(inst: &Instance, structure: &OverlapStructure) -> Result<Reduced> {
    let original = pwd_types(inst);
    structure.check(inst, &original)?;
    let due_dates = inst.due_dates();
    let mut moved: BTreeMap<Time, Time> = BTreeMap::new();
    for b in &structure.blocks {
        for &d in &due_dates[b.first..=b.last] {
            moved.insert(d, due_dates[b.first]);
        }
    }
    let jobs = inst.jobs().iter().map(|j| Job { d: moved[&j.d], ..*j }).collect();
    let instance = Instance::new(jobs)?;
    let types = pwd_types(&instance);
    let mut overlap = Vec::with_capacity(structure.blocks.len());
    for b in &structure.blocks {
        overlap.push(match b.ty {
            None => None,
            Some(t) => {
                let ty = &original[t];
                let key = (ty.p, ty.w, moved[&ty.d]);
                let found = types.iter().position(|u| (u.p, u.w, u.d) == key);
                Some(found.ok_or_else(|| Error::Internal("crossing type vanished in the reduction".into()))?)
            }
        });
    }
    let due = structure.blocks.iter().map(|b| due_dates[b.first]).collect();
    Ok(Reduced { instance, due, types, overlap })
}

/// Where a crossing job starts relative to the release dates around it:
/// `not_before ≤ start < before`. A missing side is unconstrained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct StartBracket {
    pub not_before: Option<Time>,
    pub before: Option<Time>,
}

/// All bracket choices for the crossings of `reduced`, one entry per due
/// date but the last (`None` where nothing crosses).
///
/// A crossing job of length `p` at `D` starts in `[D - p, D]`. Release
/// dates in `(D - p, D]` split that range; each piece is one bracket.
pub fn start_brackets(reduced: &Reduced) -> Vec<Vec<Option<StartBracket>>> {
    let releases = reduced.instance.release_dates();
    let k = reduced.due.len();
    let mut options: Vec<Vec<Option<StartBracket>>> = Vec::new();
    for m in 0..k.saturating_sub(1) {
        let Some(t) = reduced.overlap[m] else {
            options.push(vec![None]);
            continue;
        };
        let d = reduced.due[m];
        let p = reduced.types[t].p;
        let inside: Vec<Time> = releases.iter().copied().filter(|&r| r + p > d && r <= d).collect();
        let mut here = Vec::with_capacity(inside.len() + 1);
        let mut lower = None;
        for &r in &inside {
            here.push(Some(StartBracket { not_before: lower, before: Some(r) }));
            lower = Some(r);
        }
        here.push(Some(StartBracket { not_before: lower, before: None }));
        options.push(here);
    }
    let mut out = vec![Vec::new()];
    for choice in options {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Option<StartBracket>>| {
                choice.iter().map(move |c| {
                    let mut next = prefix.clone();
                    next.push(*c);
                    next
                })
            })
            .collect();
    }
    out
}

/// Lower bound row `var ≥ Σ plus - Σ minus - offset`, next to `var ≥ 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clamp {
    pub var: VarId,
    pub plus: Vec<VarId>,
    pub minus: Vec<VarId>,
    pub offset: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PwdVarMap {
    pub due: Vec<Time>,
    pub types: Vec<PwdType>,
    pub overlap: Vec<Option<usize>>,
    /// `x[t][ℓ]`, the gap ending at `due[ℓ]`.
    pub x_type: Vec<Vec<VarId>>,
    /// One per due date but the last.
    pub o_a: Vec<VarId>,
    pub o_b: Vec<VarId>,
    pub x_job: Vec<VarId>,
    pub clamps: Vec<Clamp>,
}

impl PwdVarMap {
    pub fn integer_count(&self) -> usize {
        self.x_type.iter().map(Vec::len).sum()
    }

    /// Length of the crossing at `due[m]`, zero if nothing crosses.
    pub fn crossing_length(&self, m: usize) -> Time {
        self.overlap[m].map_or(0, |t| self.types[t].p)
    }
}

/// Builds the model for one structure and one bracket choice.
///
/// Names use 1-based due-date indices: `x_t{t}_l{ℓ}`, `oa_l{ℓ}`, `ob_l{ℓ}`,
/// `x_j{j}`, `z_t{t}_l{ℓ}_r{r}`. Rows: `cross_l{ℓ}`, `after_l{ℓ}`,
/// `before_l{ℓ}`, `count_t{t}`, `clamp_t{t}_l{ℓ}_r{r}`, `release_l{ℓ}_r{r}`,
/// `later_t{t}_l{ℓ}_r{r}`, `gap_l{ℓ}`.
pub fn build_pwd_model(reduced: &Reduced, brackets: &[Option<StartBracket>]) -> Result<(MilpModel, PwdVarMap)> {
    let inst = &reduced.instance;
    let due = &reduced.due;
    let types = &reduced.types;
    let k = due.len();
    if reduced.overlap.len() != k || reduced.overlap.last().is_some_and(Option::is_some) {
        return Err(Error::State("nothing can cross the last due date".into()));
    }
    if brackets.len() != k - 1 || brackets.iter().zip(&reduced.overlap).any(|(b, o)| b.is_some() != o.is_some()) {
        return Err(Error::State("need one start bracket per crossing".into()));
    }

    let mut model = MilpModel::new();
    let mut x_type = Vec::with_capacity(types.len());
    for (t, ty) in types.iter().enumerate() {
        let row: Vec<VarId> = (0..k)
            .map(|m| {
                let upper = if ty.d >= due[m] { ty.count() as i64 } else { 0 };
                model.add_integer(format!("x_t{t}_l{}", m + 1), 0, upper)
            })
            .collect();
        x_type.push(row);
    }
    let mut o_a = Vec::with_capacity(k - 1);
    let mut o_b = Vec::with_capacity(k - 1);
    for m in 0..k - 1 {
        let bracket = brackets[m].unwrap_or_default();
        let lower = match bracket.before {
            Some(b) if due[m] + 1 > b => diff(due[m] + 1, b),
            _ => Rational::zero(),
        };
        let upper = bracket.not_before.map(|a| diff(due[m], a));
        o_a.push(model.add_var(format!("oa_l{}", m + 1), VarKind::Fractional, lower, upper));
        o_b.push(model.add_fractional(format!("ob_l{}", m + 1), None));
    }
    let x_job: Vec<VarId> = (0..inst.n())
        .map(|j| {
            let upper = if inst.job(j).can_be_early() { 1 } else { 0 };
            model.add_fractional(format!("x_j{j}"), Some(rat(upper)))
        })
        .collect();

    let crossings_from = |t: usize, m: usize| reduced.overlap[m..].iter().filter(|o| **o == Some(t)).count() as i64;
    let one = rat(1);
    let minus_one = rat(-1);

    for m in 0..k - 1 {
        let p = reduced.overlap[m].map_or(0, |t| types[t].p);
        model.add_constraint(
            format!("cross_l{}", m + 1),
            vec![(o_a[m], one.clone()), (o_b[m], one.clone())],
            Relation::Eq,
            num(p),
        );
        model.add_constraint(
            format!("after_l{}", m + 1),
            vec![(o_b[m], one.clone())],
            Relation::Le,
            diff(due[m + 1], due[m]),
        );
        let prev = if m == 0 { 0 } else { due[m - 1] };
        model.add_constraint(
            format!("before_l{}", m + 1),
            vec![(o_a[m], one.clone())],
            Relation::Le,
            diff(due[m], prev),
        );
    }

    for (t, ty) in types.iter().enumerate() {
        let mut terms: Vec<(VarId, Rational)> = ty.members.iter().map(|&j| (x_job[j], one.clone())).collect();
        terms.extend(x_type[t].iter().map(|&v| (v, minus_one.clone())));
        model.add_constraint(format!("count_t{t}"), terms, Relation::Eq, rat(crossings_from(t, 0)));
    }

    let mut clamps = Vec::new();
    for m in 0..k {
        let window_end_known = |r: Time| match (reduced.overlap[m], brackets.get(m).copied().flatten()) {
            (None, _) => true,
            (Some(t), bracket) => {
                r + types[t].p <= due[m] || bracket.and_then(|b| b.not_before).is_some_and(|a| r <= a)
            }
        };
        for r in inst.release_dates() {
            let live: Vec<(usize, Vec<VarId>)> = types
                .iter()
                .enumerate()
                .filter_map(|(t, ty)| {
                    let vars: Vec<VarId> = ty
                        .members
                        .iter()
                        .filter(|&&j| inst.job(j).r >= r && inst.job(j).can_be_early())
                        .map(|&j| x_job[j])
                        .collect();
                    (!vars.is_empty()).then_some((t, vars))
                })
                .collect();
            if live.is_empty() {
                continue;
            }
            if r <= due[m] && window_end_known(r) {
                // work released at r or later that still has to run before the crossing at due[m]
                let mut row = Vec::new();
                if m < k - 1 {
                    row.push((o_a[m], one.clone()));
                }
                for (t, vars) in live {
                    let z = model.add_fractional(format!("z_t{t}_l{}_r{r}", m + 1), None);
                    let later = x_type[t][m + 1..].to_vec();
                    let offset = crossings_from(t, m);
                    let mut terms = vec![(z, one.clone())];
                    terms.extend(vars.iter().map(|&v| (v, minus_one.clone())));
                    terms.extend(later.iter().map(|&v| (v, one.clone())));
                    model.add_constraint(format!("clamp_t{t}_l{}_r{r}", m + 1), terms, Relation::Ge, rat(-offset));
                    clamps.push(Clamp { var: z, plus: vars, minus: later, offset });
                    row.push((z, num(types[t].p)));
                }
                model.add_constraint(format!("release_l{}_r{r}", m + 1), row, Relation::Le, diff(due[m], r));
            } else {
                // released after the crossing job starts: only later gaps and crossings remain
                for (t, vars) in live {
                    let mut terms: Vec<(VarId, Rational)> = vars.iter().map(|&v| (v, one.clone())).collect();
                    terms.extend(x_type[t][m + 1..].iter().map(|&v| (v, minus_one.clone())));
                    let rhs = crossings_from(t, m) - i64::from(reduced.overlap[m] == Some(t));
                    model.add_constraint(format!("later_t{t}_l{}_r{r}", m + 1), terms, Relation::Le, rat(rhs));
                }
            }
        }
    }

    for m in 0..k {
        let mut terms = Vec::new();
        if m < k - 1 {
            terms.push((o_a[m], one.clone()));
        }
        if m > 0 {
            terms.push((o_b[m - 1], one.clone()));
        }
        for (t, ty) in types.iter().enumerate() {
            terms.push((x_type[t][m], num(ty.p)));
        }
        let prev = if m == 0 { 0 } else { due[m - 1] };
        model.add_constraint(format!("gap_l{}", m + 1), terms, Relation::Le, diff(due[m], prev));
    }

    let objective = (0..inst.n()).map(|j| (x_job[j], num(inst.job(j).w))).collect();
    model.set_objective(objective);

    let map = PwdVarMap {
        due: due.clone(),
        types: types.clone(),
        overlap: reduced.overlap.clone(),
        x_type,
        o_a,
        o_b,
        x_job,
        clamps,
    };
    Ok((model, map))
}

/// Makes every `x_j` integral without changing the objective.
///
/// Within each type, fractional mass moves pairwise onto the job released
/// earlier (`x_j := min(1, x_j + x_j')`, `x_j' := max(0, x_j + x_j' - 1)`);
/// then the selected jobs are shifted to the earliest-released members.
/// Crossing lengths are rounded down, auxiliary clamp variables reset to
/// their least feasible value.
pub fn round_solution(map: &PwdVarMap, values: &[Rational]) -> Result<Vec<Rational>> {
    let needed = map.x_job.iter().chain(map.o_b.iter()).chain(map.clamps.iter().map(|c| &c.var)).map(|v| v.0).max();
    if needed.is_some_and(|n| n >= values.len()) {
        return Err(Error::State(format!("{} values do not cover the model", values.len())));
    }
    let mut out = values.to_vec();
    for (t, ty) in map.types.iter().enumerate() {
        if let Some(v) = map.x_type[t].iter().find(|v| !out[v.0].is_integer()) {
            return Err(Error::State(format!("type count {} is fractional", v.0)));
        }
        let vars: Vec<VarId> = ty.members.iter().map(|&j| map.x_job[j]).collect();
        loop {
            let mut frac = vars.iter().filter(|v| !out[v.0].is_integer());
            match (frac.next().copied(), frac.next().copied()) {
                (None, _) => break,
                (Some(_), None) => return Err(Error::State(format!("type {t} selects a fractional number of jobs"))),
                (Some(a), Some(b)) => {
                    let sum = &out[a.0] + &out[b.0];
                    let one = Rational::one();
                    out[a.0] = if sum > one { one.clone() } else { sum.clone() };
                    out[b.0] = if sum > one { sum - one } else { Rational::zero() };
                }
            }
        }
        let chosen = vars.iter().filter(|v| out[v.0].is_one()).count();
        for (i, v) in vars.iter().enumerate() {
            out[v.0] = rat(i64::from(i < chosen));
        }
    }
    for m in 0..map.o_a.len() {
        let floor = out[map.o_a[m].0].floor();
        out[map.o_b[m].0] = num(map.crossing_length(m)) - &floor;
        out[map.o_a[m].0] = floor;
    }
    for c in &map.clamps {
        let sum: Rational = c.plus.iter().map(|v| &out[v.0]).sum::<Rational>()
            - c.minus.iter().map(|v| &out[v.0]).sum::<Rational>()
            - rat(c.offset);
        out[c.var.0] = if sum.is_positive() { sum } else { Rational::zero() };
    }
    Ok(out)
}

/// Schedules `jobs` back to front so that all finish by `end`: the job
/// released last goes to `end - p`, and so on.
///
/// Works whenever the jobs released at or after every `r` fit in
/// `[r, end]`; otherwise the latest failing release date is reported.
pub fn schedule_single_due_date(inst: &Instance, jobs: &[usize], end: Time) -> Result<Vec<(usize, Time)>> {
    let mut order = jobs.to_vec();
    order.sort_by_key(|&j| (Reverse(inst.job(j).r), j));
    let mut load = 0u64;
    for (i, &j) in order.iter().enumerate() {
        load += inst.job(j).p;
        let r = inst.job(j).r;
        let last_of_release = order.get(i + 1).is_none_or(|&n| inst.job(n).r != r);
        let room = i128::from(end) - i128::from(r);
        if last_of_release && i128::from(load) > room {
            return Err(Error::ReleaseOverload { release: r, load, room });
        }
    }
    let mut cursor = end;
    Ok(order
        .into_iter()
        .map(|j| {
            cursor -= inst.job(j).p;
            (j, cursor)
        })
        .collect())
}

fn as_time(value: &Rational, what: &str) -> Result<Time> {
    if !value.is_integer() {
        return Err(Error::State(format!("{what} = {value} is fractional")));
    }
    value.to_integer().to_u64().ok_or_else(|| Error::State(format!("{what} = {value} is not a time")))
}

/// Turns a rounded solution into the early part of a schedule for the
/// reduced instance, filling gaps from the last due date to the first.
pub fn extract_schedule_pwd(inst: &Instance, map: &PwdVarMap, values: &[Rational]) -> Result<Schedule> {
    let k = map.due.len();
    let mut stacks: Vec<Vec<usize>> = Vec::with_capacity(map.types.len());
    for ty in &map.types {
        let mut picked = Vec::new();
        for &j in &ty.members {
            let x = &values[map.x_job[j].0];
            if x.is_one() {
                picked.push(j);
            } else if !x.is_zero() {
                return Err(Error::State(format!("x_j{j} = {x} is not rounded")));
            }
        }
        stacks.push(picked);
    }
    let o_a = map.o_a.iter().map(|v| as_time(&values[v.0], "o_a")).collect::<Result<Vec<_>>>()?;
    let o_b = map.o_b.iter().map(|v| as_time(&values[v.0], "o_b")).collect::<Result<Vec<_>>>()?;

    let mut sched = Schedule::new();
    for m in (0..k).rev() {
        let crossing = if m + 1 < k { o_a[m] } else { 0 };
        let end = map.due[m]
            .checked_sub(crossing)
            .ok_or_else(|| Error::Internal(format!("crossing at {} starts before time 0", map.due[m])))?;
        let start = if m == 0 { 0 } else { map.due[m - 1] + o_b[m - 1] };
        let mut jobs = Vec::new();
        for (t, stack) in stacks.iter_mut().enumerate() {
            let count = as_time(&values[map.x_type[t][m].0], "x_t")? as usize;
            if count > stack.len() {
                return Err(Error::Internal(format!("gap {} wants {count} jobs of type {t}", m + 1)));
            }
            jobs.extend(stack.drain(stack.len() - count..));
        }
        let placed = schedule_single_due_date(inst, &jobs, end)
            .map_err(|e| Error::Internal(format!("gap {} cannot be filled: {e}", m + 1)))?;
        for (j, s) in placed {
            if s < start {
                return Err(Error::Internal(format!("gap {} overflows its start {start}", m + 1)));
            }
            sched.set(j, s);
        }
        if m > 0 {
            if let Some(t) = map.overlap[m - 1] {
                let j = stacks[t]
                    .pop()
                    .ok_or_else(|| Error::Internal(format!("no job of type {t} left to cross {}", map.due[m - 1])))?;
                let s = map.due[m - 1] - o_a[m - 1];
                if inst.job(j).r > s {
                    return Err(Error::Internal(format!("crossing job {j} would start at {s} before its release")));
                }
                sched.set(j, s);
            }
        }
    }
    if let Some(t) = stacks.iter().position(|s| !s.is_empty()) {
        return Err(Error::Internal(format!("selected jobs of type {t} were never placed")));
    }
    Ok(sched)
}

/// One structure and bracket choice, ready to be built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub structure_index: usize,
    pub structure: OverlapStructure,
    pub reduced: Reduced,
    pub brackets: Vec<Option<StartBracket>>,
}

/// Every model the solver considers, in solve order.
pub fn candidates(inst: &Instance, budget: u128) -> Result<Vec<Candidate>> {
    let mut out = Vec::new();
    for (i, structure) in enumerate_structures_with(inst, budget)?.into_iter().enumerate() {
        let reduced = reduce(inst, &structure)?;
        for brackets in start_brackets(&reduced) {
            out.push(Candidate {
                structure_index: i,
                structure: structure.clone(),
                reduced: reduced.clone(),
                brackets,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PwdOptions {
    pub milp: MilpOptions,
    pub structure_budget: u128,
    /// Skip models whose relaxation cannot beat the incumbent.
    pub prune: bool,
    /// Keep every model solution next to its rounding.
    pub keep_roundings: bool,
}

impl Default for PwdOptions {
    fn default() -> Self {
        PwdOptions {
            milp: MilpOptions::default(),
            structure_budget: STRUCTURE_BUDGET,
            prune: true,
            keep_roundings: false,
        }
    }
}

/// A model optimum before and after [`round_solution`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rounding {
    pub model: MilpModel,
    pub solution: Vec<Rational>,
    pub rounded: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PwdRun {
    pub result: SolveResult,
    pub models_solved: u64,
    /// Best model value per candidate, in candidate order (`None` when the
    /// model was pruned or infeasible).
    pub model_values: Vec<Option<Weight>>,
    pub roundings: Vec<Rounding>,
}

pub fn solve_pwd(inst: &Instance) -> Result<SolveResult> {
    solve_pwd_with(inst, &PwdOptions::default()).map(|run| run.result)
}

pub fn solve_pwd_with(inst: &Instance, opts: &PwdOptions) -> Result<PwdRun> {
    let structures = enumerate_structures_with(inst, opts.structure_budget)?;
    let mut counters = Counters { structures: structures.len() as u64, ..Counters::default() };
    let mut best = SolveResult::from_early(inst, Schedule::new(), Counters::default())?;
    let mut run = PwdRun { result: best.clone(), models_solved: 0, model_values: Vec::new(), roundings: Vec::new() };
    for structure in &structures {
        let reduced = reduce(inst, structure)?;
        for brackets in start_brackets(&reduced) {
            let (model, map) = build_pwd_model(&reduced, &brackets)?;
            let mut milp_opts = opts.milp.clone();
            if opts.prune {
                milp_opts.cutoff = Some(num(best.best_weight));
            }
            let (sol, stats) = milp::solve_milp_with(&model, &milp_opts)?;
            counters.milp_nodes += stats.nodes;
            counters.lp_pivots += stats.pivots;
            run.models_solved += 1;
            if !sol.is_optimal() {
                run.model_values.push(None);
                continue;
            }
            let rounded = round_solution(&map, &sol.values)?;
            model.check(&rounded, true).map_err(|e| Error::Internal(format!("rounding broke the model: {e}")))?;
            let value = model.objective_value(&rounded);
            if value != sol.objective_value {
                return Err(Error::Internal("rounding changed the objective".into()));
            }
            let promised = value
                .to_integer()
                .to_u64()
                .ok_or_else(|| Error::Internal(format!("model value {value} is not a weight")))?;
            run.model_values.push(Some(promised));
            let early = extract_schedule_pwd(&reduced.instance, &map, &rounded)?;
            let found = SolveResult::from_early(inst, early, Counters::default())?;
            if found.best_weight < promised {
                return Err(Error::Internal(format!(
                    "extracted schedule is worth {} but the model promised {promised}",
                    found.best_weight
                )));
            }
            if opts.keep_roundings {
                run.roundings.push(Rounding { model, solution: sol.values, rounded });
            }
            if found.best_weight > best.best_weight {
                best = found;
            }
        }
    }
    best.counters = counters;
    run.result = best;
    Ok(run)
}

pub fn solve_pwr(inst: &Instance) -> Result<SolveResult> {
    solve_pwr_with(inst, &PwdOptions::default()).map(|run| run.result)
}

/// Solves the reversed instance with [`solve_pwd_with`] and maps the
/// schedule back. Jobs released after the last due date are clamped to it
/// first; they are tardy either way.
pub fn solve_pwr_with(inst: &Instance, opts: &PwdOptions) -> Result<PwdRun> {
    let d_max = inst.d_max();
    let clamped = Instance::new(inst.jobs().iter().map(|j| Job { r: j.r.min(d_max), ..*j }).collect())?;
    let reversed = reverse_instance(&clamped)?;
    let mut run = solve_pwd_with(&reversed, opts)?;
    let mut early = Schedule::new();
    for j in run.result.schedule.early_jobs(&reversed).collect::<BTreeSet<_>>() {
        let start = run.result.schedule.start(j).expect("complete schedule");
        early.set(j, d_max - start - inst.job(j).p);
    }
    run.result = SolveResult::from_early(inst, early, run.result.counters)?;
    Ok(run)
}
