//! MILP formulation with job types keyed by processing time, release date
//! and due date.
//!
//! The event list merges the distinct release dates and due dates, a due
//! date sorting before a release date of the same value. For every type
//! `t` and event pair `a < b` an integer variable `x[t][a][b]` counts jobs
//! of type `t` placed inside `[a, b]`; when `a` and `b` are not adjacent it
//! is a 0/1 flag for one job of type `t` running across every event
//! strictly between them. Constraints:
//!
//! 1. `Σ_{a<b} x[t][a][b] ≤ n_t` for each type;
//! 2. `x[t][a][b] = 0` unless `r_t ≤ a` and `d_t ≥ b` (by value);
//! 3. for each event `c`, at most one variable with `a < c < b` is set;
//! 4. for each pair `a < b`, the work placed inside `[a, b]` plus the
//!    length `b - a` for each job crossing the whole interval is at most
//!    `b - a`.
//!
//! The objective adds the `x^t` heaviest weights of each type, linearized
//! with fractional `y[t][i] ∈ [0, 1]`, `Σ_i y[t][i] = x^t` and objective
//! `Σ w[t][i]·y[t][i]`. Since the weights of a type are sorted in
//! descending order, an optimum fills `y` from the top.
//!
//! ```
//! use wtardy::{prd, Instance, Job};
//!
//! let inst = Instance::new(vec![Job::new(3, 0, 7, 3), Job::new(4, 0, 7, 4), Job::new(5, 0, 7, 5)])?;
//! assert_eq!(prd::solve_prd(&inst)?.best_weight, 7);
//! # Ok::<(), wtardy::Error>(())
//! ```

use std::collections::BTreeMap;

use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::milp::{self, rat, MilpModel, MilpOptions, MilpSolution, Rational, Relation, VarId};
use crate::model::{stats, Counters, Instance, Schedule, SolveResult, Time, Weight};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrdType {
    pub p: Time,
    pub r: Time,
    pub d: Time,
    /// Member jobs, heaviest first; equal weights keep index order.
    pub members: Vec<usize>,
}

impl PrdType {
    pub fn count(&self) -> usize {
        self.members.len()
    }
}

/// Types in order of `(p, r, d)`.
pub fn prd_types(inst: &Instance) -> Vec<PrdType> {
    let mut groups: BTreeMap<(Time, Time, Time), Vec<usize>> = BTreeMap::new();
    for (j, job) in inst.jobs().iter().enumerate() {
        groups.entry((job.p, job.r, job.d)).or_default().push(j);
    }
    groups
        .into_iter()
        .map(|((p, r, d), mut members)| {
            members.sort_by_key(|&j| (std::cmp::Reverse(inst.job(j).w), j));
            PrdType { p, r, d, members }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Due,
    Release,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Event {
    pub value: Time,
    pub kind: EventKind,
}

/// Distinct release dates and due dates, sorted by value with due dates
/// first among equal values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventList {
    pub events: Vec<Event>,
}

impl EventList {
    pub fn new(inst: &Instance) -> Self {
        let mut events: Vec<Event> = inst
            .release_dates()
            .into_iter()
            .map(|value| Event { value, kind: EventKind::Release })
            .chain(inst.due_dates().into_iter().map(|value| Event { value, kind: EventKind::Due }))
            .collect();
        events.sort();
        EventList { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn value(&self, position: usize) -> Time {
        self.events[position].value
    }

    /// Index of the pair `a < b` among all pairs in lexicographic order.
    pub fn pair_index(&self, a: usize, b: usize) -> usize {
        debug_assert!(a < b && b < self.len());
        let n = self.len();
        a * n - a * (a + 1) / 2 + (b - a - 1)
    }

    pub fn pair_count(&self) -> usize {
        self.len() * self.len().saturating_sub(1) / 2
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |a| (a + 1..n).map(move |b| (a, b)))
    }
}

/// Where each variable of the model lives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrdVarMap {
    pub types: Vec<PrdType>,
    /// `x[t][pair_index(a, b)]`.
    pub x: Vec<Vec<VarId>>,
    /// `y[t][i]` for the `i`-th heaviest member of type `t`.
    pub y: Vec<Vec<VarId>>,
}

impl PrdVarMap {
    pub fn x(&self, events: &EventList, t: usize, a: usize, b: usize) -> VarId {
        self.x[t][events.pair_index(a, b)]
    }

    pub fn integer_count(&self) -> usize {
        self.x.iter().map(Vec::len).sum()
    }
}

/// The integer-variable bound `p#·r#·d#·(r#+d#)²`.
pub fn integer_bound(inst: &Instance) -> u128 {
    let s = stats(inst);
    let (p, r, d) = (s.p_count as u128, s.r_count as u128, s.d_count as u128);
    p * r * d * (r + d) * (r + d)
}

pub fn build_prd_model(inst: &Instance) -> Result<(MilpModel, PrdVarMap, EventList)> {
    let events = EventList::new(inst);
    let types = prd_types(inst);
    let len = events.len();
    let mut model = MilpModel::new();

    let mut x = Vec::with_capacity(types.len());
    for (t, ty) in types.iter().enumerate() {
        let vars =
            events.pairs().map(|(a, b)| model.add_integer(format!("x_t{t}_a{a}_b{b}"), 0, ty.count() as i64)).collect();
        x.push(vars);
    }
    let mut y = Vec::with_capacity(types.len());
    for (t, ty) in types.iter().enumerate() {
        let vars = (0..ty.count()).map(|i| model.add_fractional(format!("y_t{t}_i{i}"), Some(rat(1)))).collect();
        y.push(vars);
    }
    let map = PrdVarMap { types, x, y };

    let integers = map.integer_count();
    if integers != map.types.len() * events.pair_count() || integers as u128 > integer_bound(inst) {
        return Err(Error::Internal(format!(
            "{integers} integer variables for {} types and {len} events (bound {})",
            map.types.len(),
            integer_bound(inst)
        )));
    }

    for (t, ty) in map.types.iter().enumerate() {
        let terms = map.x[t].iter().map(|&v| (v, rat(1))).collect();
        model.add_constraint(format!("count_t{t}"), terms, Relation::Le, rat(ty.count() as i64));
    }
    for (t, ty) in map.types.iter().enumerate() {
        for (a, b) in events.pairs() {
            if ty.r > events.value(a) || ty.d < events.value(b) {
                model.add_constraint(
                    format!("window_t{t}_a{a}_b{b}"),
                    vec![(map.x(&events, t, a, b), rat(1))],
                    Relation::Eq,
                    rat(0),
                );
            }
        }
    }
    for c in 1..len.saturating_sub(1) {
        let mut terms = Vec::new();
        for t in 0..map.types.len() {
            for a in 0..c {
                for b in c + 1..len {
                    terms.push((map.x(&events, t, a, b), rat(1)));
                }
            }
        }
        model.add_constraint(format!("cross_c{c}"), terms, Relation::Le, rat(1));
    }
    for (a, b) in events.pairs() {
        let span = (events.value(b) - events.value(a)) as i64;
        let mut terms = Vec::new();
        for (t, ty) in map.types.iter().enumerate() {
            for (a2, b2) in events.pairs() {
                if a2 >= a && b2 <= b {
                    terms.push((map.x(&events, t, a2, b2), rat(ty.p as i64)));
                } else if a2 < a && b2 > b {
                    terms.push((map.x(&events, t, a2, b2), rat(span)));
                }
            }
        }
        model.add_constraint(format!("load_a{a}_b{b}"), terms, Relation::Le, rat(span));
    }
    for t in 0..map.types.len() {
        let mut terms: Vec<(VarId, Rational)> = map.y[t].iter().map(|&v| (v, rat(1))).collect();
        terms.extend(map.x[t].iter().map(|&v| (v, rat(-1))));
        model.add_constraint(format!("topk_t{t}"), terms, Relation::Eq, rat(0));
    }

    let mut objective = Vec::new();
    for (t, ty) in map.types.iter().enumerate() {
        for (i, &j) in ty.members.iter().enumerate() {
            objective.push((map.y[t][i], rat(inst.job(j).w as i64)));
        }
    }
    model.set_objective(objective);
    Ok((model, map, events))
}

fn as_count(value: &Rational) -> Result<usize> {
    if !value.is_integer() || value < &Rational::zero() {
        return Err(Error::State(format!("x-variable value {value} is not a nonnegative integer")));
    }
    value.to_integer().to_usize().ok_or_else(|| Error::State(format!("x-variable value {value} is too large")))
}

/// Turns an optimal solution into the early part of a schedule.
///
/// Pairs are visited with `a` ascending, then `b` ascending. A cursor `s`
/// starts at the first event and is raised to `a` whenever `a` advances;
/// for each type in declaration order the `x[t][a][b]` heaviest
/// unscheduled members run back to back from `s`. Jobs not placed here
/// are left out and completed as tardy by the caller.
pub fn extract_early_prd(inst: &Instance, map: &PrdVarMap, events: &EventList, sol: &MilpSolution) -> Result<Schedule> {
    if !sol.is_optimal() {
        return Err(Error::State(format!("cannot extract a schedule from a {} solution", sol.status)));
    }
    let mut next = vec![0usize; map.types.len()];
    let mut early = Schedule::new();
    let mut s = 0;
    for a in 0..events.len() {
        s = s.max(events.value(a));
        for b in a + 1..events.len() {
            for (t, ty) in map.types.iter().enumerate() {
                let k = as_count(sol.value(map.x(events, t, a, b)))?;
                if next[t] + k > ty.count() {
                    return Err(Error::State(format!("type {t} is asked for more than its {} jobs", ty.count())));
                }
                for &j in &ty.members[next[t]..next[t] + k] {
                    early.set(j, s);
                    s += inst.job(j).p;
                }
                next[t] += k;
            }
        }
    }
    Ok(early)
}

/// Full schedule: the early part completed with the tardy-job policy.
pub fn extract_schedule_prd(
    inst: &Instance,
    map: &PrdVarMap,
    events: &EventList,
    sol: &MilpSolution,
) -> Result<Schedule> {
    let early = extract_early_prd(inst, map, events, sol)?;
    Ok(crate::model::complete_schedule(inst, early))
}

/// Sum of the `k` heaviest weights of each type, with `k = x^t`.
pub fn top_k_weight(inst: &Instance, map: &PrdVarMap, sol: &MilpSolution) -> Result<Weight> {
    let mut total = 0;
    for (t, ty) in map.types.iter().enumerate() {
        let mut k = 0;
        for &v in &map.x[t] {
            k += as_count(sol.value(v))?;
        }
        total += ty.members.iter().take(k).map(|&j| inst.job(j).w).sum::<Weight>();
    }
    Ok(total)
}

pub fn solve_prd(inst: &Instance) -> Result<SolveResult> {
    solve_prd_with(inst, &MilpOptions::default())
}

pub fn solve_prd_with(inst: &Instance, opts: &MilpOptions) -> Result<SolveResult> {
    let (model, map, events) = build_prd_model(inst)?;
    let (sol, stats) = milp::solve_milp_with(&model, opts)?;
    if !sol.is_optimal() {
        return Err(Error::Internal(format!("the scheduling model came back {}", sol.status)));
    }
    let claimed = sol.objective_value.clone();
    let top_k = top_k_weight(inst, &map, &sol)?;
    if Rational::from_integer(top_k.into()) != claimed {
        return Err(Error::Internal(format!("linearized objective {claimed} differs from the top-k sum {top_k}")));
    }
    let early = extract_early_prd(inst, &map, &events, &sol)?;
    let counters = Counters { milp_nodes: stats.nodes, lp_pivots: stats.pivots, ..Counters::default() };
    let result = SolveResult::from_early(inst, early, counters)?;
    if result.best_weight < top_k {
        return Err(Error::Internal(format!(
            "extracted schedule is worth {} but the model promised {top_k}",
            result.best_weight
        )));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, Job};
    use crate::oracle::solve_exact;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inst(jobs: &[(u64, u64, u64, u64)]) -> Instance {
        Instance::new(jobs.iter().map(|&(p, r, d, w)| Job::new(p, r, d, w)).collect()).unwrap()
    }

    #[test]
    fn event_order_puts_due_first() {
        let i = inst(&[(1, 0, 2, 1), (1, 2, 5, 1)]);
        let ev = EventList::new(&i);
        let got: Vec<_> = ev.events.iter().map(|e| (e.value, e.kind)).collect();
        use EventKind::*;
        assert_eq!(got, vec![(0, Release), (2, Due), (2, Release), (5, Due)]);
    }

    #[test]
    fn pair_index_is_dense() {
        let i = inst(&[(1, 0, 2, 1), (1, 2, 5, 1)]);
        let ev = EventList::new(&i);
        let idx: Vec<_> = ev.pairs().map(|(a, b)| ev.pair_index(a, b)).collect();
        assert_eq!(idx, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn variable_counts() {
        let i = inst(&[(1, 0, 2, 1), (1, 2, 5, 1)]);
        let (model, map, ev) = build_prd_model(&i).unwrap();
        assert_eq!(ev.len(), 4);
        assert_eq!(map.integer_count(), 12);
        assert_eq!(model.integer_count(), 12);
        assert_eq!(model.vars().len(), 14);
    }

    #[test]
    fn e1_model_shape() {
        let i = inst(&[(3, 0, 7, 3), (4, 0, 7, 4), (5, 0, 7, 5)]);
        let (model, map, ev) = build_prd_model(&i).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!(map.integer_count(), 3);
        assert!(model.constraints().iter().all(|c| !c.name.starts_with("window")));
        let load = model.constraints().iter().find(|c| c.name == "load_a0_b1").unwrap();
        let coefs: Vec<_> = load.terms.iter().map(|(_, a)| a.clone()).collect();
        assert_eq!(coefs, vec![rat(3), rat(4), rat(5)]);
        assert_eq!(load.rhs, rat(7));
    }

    #[test]
    fn e1_extraction() {
        let i = inst(&[(3, 0, 7, 3), (4, 0, 7, 4), (5, 0, 7, 5)]);
        let res = solve_prd(&i).unwrap();
        assert_eq!(res.best_weight, 7);
        assert_eq!(res.schedule.start(0), Some(0));
        assert_eq!(res.schedule.start(1), Some(3));
    }

    #[test]
    fn all_zero_solution_is_all_tardy() {
        let i = inst(&[(3, 0, 7, 3), (4, 0, 7, 4)]);
        let (model, map, ev) = build_prd_model(&i).unwrap();
        let sol = MilpSolution {
            status: milp::MilpStatus::Optimal,
            values: vec![Rational::zero(); model.vars().len()],
            objective_value: Rational::zero(),
        };
        let sched = extract_schedule_prd(&i, &map, &ev, &sol).unwrap();
        assert_eq!(crate::model::objective(&i, &sched).unwrap(), 0);
    }

    #[test]
    fn extraction_needs_optimal_solution() {
        let i = inst(&[(3, 0, 7, 3)]);
        let (_, map, ev) = build_prd_model(&i).unwrap();
        let sol = MilpSolution { status: milp::MilpStatus::Infeasible, values: vec![], objective_value: rat(0) };
        assert!(matches!(extract_schedule_prd(&i, &map, &ev, &sol), Err(Error::State(_))));
    }

    #[test]
    fn crossing_job() {
        // one long job must run across the release date 2 and the due date 3
        let i = inst(&[(5, 0, 5, 4), (1, 2, 3, 1)]);
        let (model, map, ev) = build_prd_model(&i).unwrap();
        let sol = milp::solve_milp(&model).unwrap();
        assert_eq!(sol.objective_value, rat(4));
        let long = map.types.iter().position(|t| t.p == 5).unwrap();
        let last = ev.len() - 1;
        assert_eq!(sol.value(map.x(&ev, long, 0, last)), &rat(1));
        let sched = extract_schedule_prd(&i, &map, &ev, &sol).unwrap();
        assert!(validate(&i, &sched).is_valid());
        assert_eq!(sched.start(0), Some(0));
    }

    #[test]
    fn examples_match_oracle() {
        let e2 = inst(&[(2, 0, 2, 1), (2, 2, 4, 1), (3, 0, 4, 3)]);
        assert_eq!(solve_prd(&e2).unwrap().best_weight, 3);
        let tardy = inst(&[(3, 0, 2, 1), (2, 5, 6, 4)]);
        assert_eq!(solve_prd(&tardy).unwrap().best_weight, 0);
    }

    #[test]
    fn random_small_instances_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let ps = [rng.gen_range(1..=4), rng.gen_range(1..=4)];
            let rs = [0, rng.gen_range(0..=6)];
            let ds = [rng.gen_range(2..=10), rng.gen_range(2..=14)];
            let n = rng.gen_range(1..=6);
            let jobs: Vec<_> = (0..n)
                .map(|_| {
                    Job::new(
                        ps[rng.gen_range(0..2)],
                        rs[rng.gen_range(0..2)],
                        ds[rng.gen_range(0..2)],
                        rng.gen_range(1..=5),
                    )
                })
                .collect();
            let i = Instance::new(jobs).unwrap();
            let want = solve_exact(&i).unwrap().best_weight;
            let got = solve_prd(&i).unwrap();
            assert_eq!(got.best_weight, want, "{i:?}");
            assert!(validate(&i, &got.schedule).is_valid());
        }
    }
}
