//! Best-bound branch and bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_traits::Signed;

use super::simplex::{solve_bounded, LpOptions};
use super::{ratio, MilpModel, MilpSolution, MilpStatus, Rational, Relation, SolveStats, VarId, VarKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MilpOptions {
    /// LP relaxations allowed, the root included.
    pub max_nodes: u64,
    pub lp: LpOptions,
    /// Only solutions strictly better than this are sought. If none
    /// exists the status is infeasible.
    pub cutoff: Option<Rational>,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions { max_nodes: 200_000, lp: LpOptions::default(), cutoff: None }
    }
}

pub fn solve_milp(model: &MilpModel) -> Result<MilpSolution> {
    solve_milp_with(model, &MilpOptions::default()).map(|(sol, _)| sol)
}

struct Node {
    bound: Rational,
    id: u64,
    lower: Vec<Rational>,
    upper: Vec<Option<Rational>>,
    values: Vec<Rational>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // max-heap: larger bound first, then the older node
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.cmp(&other.bound).then_with(|| other.id.cmp(&self.id))
    }
}

/// Bound on `var` implied by one row whose other terms can only use up
/// room: after orienting the row as `≤`, every other coefficient is
/// nonnegative and each variable sits at its lower bound at best.
fn implied_upper(model: &MilpModel, var: VarId) -> Option<Rational> {
    let mut best: Option<Rational> = None;
    for c in model.constraints() {
        let mut merged: Vec<(VarId, Rational)> = Vec::new();
        for (v, a) in &c.terms {
            match merged.iter_mut().find(|(u, _)| u == v) {
                Some((_, b)) => *b += a,
                None => merged.push((*v, a.clone())),
            }
        }
        let signs: &[i64] = match c.relation {
            Relation::Le => &[1],
            Relation::Ge => &[-1],
            Relation::Eq => &[1, -1],
        };
        for &s in signs {
            let s = ratio(s, 1);
            let Some((_, own)) = merged.iter().find(|(v, _)| *v == var) else { continue };
            let own = &s * own;
            if !own.is_positive() {
                continue;
            }
            let mut room = &s * &c.rhs;
            let mut usable = true;
            for (v, a) in &merged {
                if *v == var {
                    continue;
                }
                let a = &s * a;
                if a.is_negative() {
                    usable = false;
                    break;
                }
                room -= a * &model.var(*v).lower;
            }
            if usable {
                let cand = room / &own;
                if best.as_ref().is_none_or(|b| cand < *b) {
                    best = Some(cand);
                }
            }
        }
    }
    best
}

/// Index of the most fractional integer variable, ties to the first.
fn branch_var(model: &MilpModel, values: &[Rational]) -> Option<usize> {
    let half = ratio(1, 2);
    let mut pick: Option<(usize, Rational)> = None;
    for (j, v) in model.vars().iter().enumerate() {
        if v.kind != VarKind::Integer || values[j].is_integer() {
            continue;
        }
        let frac = &values[j] - values[j].floor();
        let dist = (frac - &half).abs();
        if pick.as_ref().is_none_or(|(_, d)| dist < *d) {
            pick = Some((j, dist));
        }
    }
    pick.map(|(j, _)| j)
}

/// Maximizes over assignments with integral integer-kind variables.
///
/// Every integer variable needs a finite upper bound, either declared or
/// implied by a single row.
pub fn solve_milp_with(model: &MilpModel, opts: &MilpOptions) -> Result<(MilpSolution, SolveStats)> {
    model.validate()?;
    let mut lower: Vec<Rational> = Vec::with_capacity(model.vars().len());
    let mut upper: Vec<Option<Rational>> = Vec::with_capacity(model.vars().len());
    for (j, v) in model.vars().iter().enumerate() {
        if v.kind == VarKind::Fractional {
            lower.push(v.lower.clone());
            upper.push(v.upper.clone());
            continue;
        }
        let implied = implied_upper(model, VarId(j));
        let hi = match (&v.upper, implied) {
            (Some(a), Some(b)) => Some(if *a < b { a.clone() } else { b }),
            (Some(a), None) => Some(a.clone()),
            (None, b) => b,
        };
        let Some(hi) = hi else {
            return Err(Error::UnboundedInteger(v.name.clone()));
        };
        lower.push(v.lower.ceil());
        upper.push(Some(hi.floor()));
    }

    let mut stats = SolveStats::default();
    let root_lp = solve_bounded(model, &lower, &upper, &opts.lp, &mut stats)?;
    stats.nodes += 1;
    let root = match root_lp.status {
        MilpStatus::Optimal => Node { bound: root_lp.objective_value, id: 0, lower, upper, values: root_lp.values },
        status => return Ok((MilpSolution::without_point(status), stats)),
    };

    let mut next_id = 0u64;
    let mut solve =
        |lower: Vec<Rational>, upper: Vec<Option<Rational>>, stats: &mut SolveStats| -> Result<Option<Node>> {
            if stats.nodes >= opts.max_nodes {
                return Err(Error::too_large("milp nodes", stats.nodes + 1, opts.max_nodes));
            }
            stats.nodes += 1;
            let sol = solve_bounded(model, &lower, &upper, &opts.lp, stats)?;
            match sol.status {
                MilpStatus::Optimal => {
                    next_id += 1;
                    Ok(Some(Node { bound: sol.objective_value, id: next_id, lower, upper, values: sol.values }))
                }
                MilpStatus::Infeasible => Ok(None),
                MilpStatus::Unbounded => Err(Error::Internal("unbounded relaxation below a bounded root".into())),
            }
        };

    let mut incumbent: Option<(Rational, Vec<Rational>)> = None;
    let beats = |bound: &Rational, incumbent: &Option<(Rational, Vec<Rational>)>| {
        incumbent.as_ref().is_none_or(|(best, _)| bound > best) && opts.cutoff.as_ref().is_none_or(|c| bound > c)
    };
    let mut heap = BinaryHeap::new();
    if beats(&root.bound, &incumbent) {
        heap.push(root);
    }
    while let Some(node) = heap.pop() {
        if !beats(&node.bound, &incumbent) {
            continue;
        }
        let Some(k) = branch_var(model, &node.values) else {
            incumbent = Some((node.bound, node.values));
            continue;
        };
        let v = &node.values[k];
        let mut down_upper = node.upper.clone();
        down_upper[k] = Some(v.floor());
        let mut up_lower = node.lower.clone();
        up_lower[k] = v.ceil();
        let children = [(node.lower.clone(), down_upper), (up_lower, node.upper)];
        for (lo, hi) in children {
            if let Some(child) = solve(lo, hi, &mut stats)? {
                if beats(&child.bound, &incumbent) {
                    heap.push(child);
                }
            }
        }
    }

    let Some((value, values)) = incumbent else {
        return Ok((MilpSolution::without_point(MilpStatus::Infeasible), stats));
    };
    if let Err(msg) = model.check(&values, true) {
        return Err(Error::Internal(format!("branch and bound returned a bad point: {msg}")));
    }
    let objective_value = model.objective_value(&values);
    if objective_value != value {
        return Err(Error::Internal("incumbent value disagrees with c·x".into()));
    }
    Ok((MilpSolution { status: MilpStatus::Optimal, values, objective_value }, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{rat, solve_lp};

    #[test]
    fn rounds_down_single_var() {
        let mut m = MilpModel::new();
        let x = m.add_var("x", VarKind::Integer, rat(0), None);
        m.add_constraint("c", vec![(x, rat(2))], Relation::Le, rat(5));
        m.set_objective(vec![(x, rat(1))]);
        let sol = solve_milp(&m).unwrap();
        assert_eq!(sol.value(x), &rat(2));
        assert_eq!(sol.objective_value, rat(2));
    }

    #[test]
    fn knapsack_from_e1() {
        let mut m = MilpModel::new();
        let xs: Vec<_> = ["x", "y", "z"].iter().map(|n| m.add_integer(*n, 0, 1)).collect();
        let terms: Vec<_> = xs.iter().zip([3, 4, 5]).map(|(&v, c)| (v, rat(c))).collect();
        m.add_constraint("cap", terms.clone(), Relation::Le, rat(7));
        m.set_objective(terms);
        let sol = solve_milp(&m).unwrap();
        assert_eq!(sol.objective_value, rat(7));
        assert!(solve_lp(&m).unwrap().objective_value >= sol.objective_value);
    }

    #[test]
    fn infeasible_integer_system() {
        let mut m = MilpModel::new();
        let x = m.add_integer("x", 0, 10);
        m.add_constraint("neg", vec![(x, rat(1))], Relation::Le, rat(-1));
        m.set_objective(vec![(x, rat(1))]);
        assert_eq!(solve_milp(&m).unwrap().status, MilpStatus::Infeasible);
    }

    #[test]
    fn lp_feasible_but_integer_infeasible() {
        let mut m = MilpModel::new();
        let x = m.add_integer("x", 0, 10);
        m.add_constraint("two_x", vec![(x, rat(2))], Relation::Eq, rat(3));
        assert_eq!(solve_milp(&m).unwrap().status, MilpStatus::Infeasible);
    }

    #[test]
    fn missing_bound_is_an_error() {
        let mut m = MilpModel::new();
        let x = m.add_var("x", VarKind::Integer, rat(0), None);
        m.add_constraint("c", vec![(x, rat(1))], Relation::Ge, rat(1));
        m.set_objective(vec![(x, rat(1))]);
        assert!(matches!(solve_milp(&m), Err(Error::UnboundedInteger(name)) if name == "x"));
    }

    #[test]
    fn cutoff_filters_solutions() {
        let mut m = MilpModel::new();
        let x = m.add_integer("x", 0, 3);
        m.set_objective(vec![(x, rat(1))]);
        let opts = MilpOptions { cutoff: Some(rat(3)), ..MilpOptions::default() };
        assert_eq!(solve_milp_with(&m, &opts).unwrap().0.status, MilpStatus::Infeasible);
        let opts = MilpOptions { cutoff: Some(rat(2)), ..MilpOptions::default() };
        assert_eq!(solve_milp_with(&m, &opts).unwrap().0.objective_value, rat(3));
    }

    #[test]
    fn mixed_model() {
        // max 5a + 4b + y, 6a + 4b + y <= 13, y <= 5/2
        let mut m = MilpModel::new();
        let a = m.add_integer("a", 0, 5);
        let b = m.add_integer("b", 0, 5);
        let y = m.add_fractional("y", Some(ratio(5, 2)));
        m.add_constraint("cap", vec![(a, rat(6)), (b, rat(4)), (y, rat(1))], Relation::Le, rat(13));
        m.set_objective(vec![(a, rat(5)), (b, rat(4)), (y, rat(1))]);
        let sol = solve_milp(&m).unwrap();
        // b = 3 and y = 1 gives 13; a = 1, b = 1, y = 5/2 gives 11.5
        assert_eq!(sol.objective_value, rat(13));
    }
}
