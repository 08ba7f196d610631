//! Two-phase dense-tableau simplex over exact rationals.
//!
//! Variables are shifted so every lower bound becomes zero, finite upper
//! bounds become rows, and rows are negated where needed so right-hand
//! sides are nonnegative. Phase one drives artificial variables out;
//! phase two maximizes the model objective. Both phases use Bland's rule:
//! the entering column is the lowest-index one with positive reduced cost
//! and the leaving row has the minimum ratio, ties broken by the lowest
//! basic variable index. Bland's rule cannot cycle, so the pivot cap is
//! a budget, not a safeguard.

use num_traits::{One, Signed, Zero};

use super::{MilpModel, MilpSolution, MilpStatus, Rational, Relation, SolveStats};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LpOptions {
    /// Pivots allowed in a single LP solve, both phases together.
    pub max_pivots: u64,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { max_pivots: 500_000 }
    }
}

/// Solves the continuous relaxation, ignoring integrality.
pub fn solve_lp(model: &MilpModel) -> Result<MilpSolution> {
    solve_lp_with(model, &LpOptions::default()).map(|(sol, _)| sol)
}

pub fn solve_lp_with(model: &MilpModel, opts: &LpOptions) -> Result<(MilpSolution, SolveStats)> {
    model.validate()?;
    let lower: Vec<Rational> = model.vars().iter().map(|v| v.lower.clone()).collect();
    let upper: Vec<Option<Rational>> = model.vars().iter().map(|v| v.upper.clone()).collect();
    let mut stats = SolveStats::default();
    let sol = solve_bounded(model, &lower, &upper, opts, &mut stats)?;
    Ok((sol, stats))
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    cost: Vec<Rational>,
    value: Rational,
    pivots: u64,
    max_pivots: u64,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    /// Loads an objective over the current basis: reduced costs and value.
    fn set_objective(&mut self, c: &[Rational]) {
        self.cost = c.to_vec();
        self.value = Rational::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            if c[b].is_zero() {
                continue;
            }
            for (j, a) in self.rows[i].iter().enumerate() {
                if !a.is_zero() {
                    self.cost[j] -= &c[b] * a;
                }
            }
            self.value += &c[b] * &self.rhs[i];
        }
    }

    fn pivot(&mut self, r: usize, e: usize) -> Result<()> {
        if self.pivots >= self.max_pivots {
            return Err(Error::too_large("simplex pivots", self.pivots + 1, self.max_pivots));
        }
        self.pivots += 1;
        let inv = self.rows[r][e].recip();
        if !inv.is_one() {
            for v in self.rows[r].iter_mut().filter(|v| !v.is_zero()) {
                *v *= &inv;
            }
            self.rhs[r] *= &inv;
        }
        let nz: Vec<(usize, Rational)> =
            self.rows[r].iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(j, v)| (j, v.clone())).collect();
        let rhs_r = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][e].is_zero() {
                continue;
            }
            let f = self.rows[i][e].clone();
            for (j, v) in &nz {
                self.rows[i][*j] -= &f * v;
            }
            self.rhs[i] -= &f * &rhs_r;
        }
        if !self.cost[e].is_zero() {
            let f = self.cost[e].clone();
            for (j, v) in &nz {
                self.cost[*j] -= &f * v;
            }
            self.value += &f * &rhs_r;
        }
        self.basis[r] = e;
        Ok(())
    }

    /// Runs Bland's rule over columns `0..cols`.
    fn run(&mut self, cols: usize) -> Result<Outcome> {
        loop {
            let Some(e) = (0..cols).find(|&j| self.cost[j].is_positive()) else {
                return Ok(Outcome::Optimal);
            };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][e];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &leave {
                    None => true,
                    Some((k, best)) => ratio < *best || (ratio == *best && self.basis[i] < self.basis[*k]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, e)?,
                None => return Ok(Outcome::Unbounded),
            }
        }
    }
}

/// Solves the relaxation with bounds `lower`/`upper` replacing the
/// declared ones. Adds pivots to `stats`.
pub(crate) fn solve_bounded(
    model: &MilpModel,
    lower: &[Rational],
    upper: &[Option<Rational>],
    opts: &LpOptions,
    stats: &mut SolveStats,
) -> Result<MilpSolution> {
    let n = model.vars().len();
    if lower.iter().zip(upper).any(|(l, u)| u.as_ref().is_some_and(|u| u < l)) {
        return Ok(MilpSolution::without_point(MilpStatus::Infeasible));
    }

    // rows over shifted variables, normalized to rhs >= 0
    let mut rows: Vec<(Vec<Rational>, Relation, Rational)> = Vec::new();
    for c in model.constraints() {
        let mut coefs = vec![Rational::zero(); n];
        let mut rhs = c.rhs.clone();
        for (v, a) in &c.terms {
            coefs[v.0] += a;
            rhs -= a * &lower[v.0];
        }
        rows.push((coefs, c.relation, rhs));
    }
    for (j, u) in upper.iter().enumerate() {
        if let Some(u) = u {
            let mut coefs = vec![Rational::zero(); n];
            coefs[j] = Rational::one();
            rows.push((coefs, Relation::Le, u - &lower[j]));
        }
    }
    for (coefs, rel, rhs) in rows.iter_mut() {
        if rhs.is_negative() {
            coefs.iter_mut().for_each(|a| *a = -a.clone());
            *rhs = -rhs.clone();
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let slack_count = rows.iter().filter(|(_, rel, _)| *rel != Relation::Eq).count();
    let art_count = rows.iter().filter(|(_, rel, _)| *rel != Relation::Le).count();
    let art_start = n + slack_count;
    let cols = art_start + art_count;

    let mut tab = Tableau {
        rows: Vec::with_capacity(m),
        rhs: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
        cost: Vec::new(),
        value: Rational::zero(),
        pivots: 0,
        max_pivots: opts.max_pivots,
    };
    let (mut slack, mut art) = (n, art_start);
    for (coefs, rel, rhs) in rows {
        let mut row = coefs;
        row.resize(cols, Rational::zero());
        match rel {
            Relation::Le => {
                row[slack] = Rational::one();
                tab.basis.push(slack);
                slack += 1;
            }
            Relation::Ge => {
                row[slack] = -Rational::one();
                slack += 1;
                row[art] = Rational::one();
                tab.basis.push(art);
                art += 1;
            }
            Relation::Eq => {
                row[art] = Rational::one();
                tab.basis.push(art);
                art += 1;
            }
        }
        tab.rows.push(row);
        tab.rhs.push(rhs);
    }

    let result = phases(&mut tab, model, n, art_start, cols);
    stats.pivots += tab.pivots;
    stats.max_pivots_per_lp = stats.max_pivots_per_lp.max(tab.pivots);
    let feasible = match result? {
        Some(Outcome::Optimal) => true,
        Some(Outcome::Unbounded) => return Ok(MilpSolution::without_point(MilpStatus::Unbounded)),
        None => return Ok(MilpSolution::without_point(MilpStatus::Infeasible)),
    };
    debug_assert!(feasible);

    let mut values = lower.to_vec();
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            values[b] += &tab.rhs[i];
        }
    }
    let objective_value = model.objective_value(&values);
    let shift = model.objective_value(lower);
    if objective_value != &tab.value + &shift {
        return Err(Error::Internal(format!(
            "simplex objective {} disagrees with c·x = {objective_value}",
            &tab.value + &shift
        )));
    }
    let in_bounds =
        values.iter().zip(lower.iter().zip(upper)).all(|(x, (l, u))| x >= l && u.as_ref().is_none_or(|u| x <= u));
    if !in_bounds {
        return Err(Error::Internal("simplex point violates a variable bound".into()));
    }
    if let Err(msg) = model.check(&values, false) {
        return Err(Error::Internal(format!("simplex point fails re-verification: {msg}")));
    }
    Ok(MilpSolution { status: MilpStatus::Optimal, values, objective_value })
}

/// Phase one then phase two. `None` means infeasible.
fn phases(tab: &mut Tableau, model: &MilpModel, n: usize, art_start: usize, cols: usize) -> Result<Option<Outcome>> {
    if cols > art_start {
        let mut c = vec![Rational::zero(); cols];
        c[art_start..].iter_mut().for_each(|x| *x = -Rational::one());
        tab.set_objective(&c);
        tab.run(cols)?;
        if tab.value.is_negative() {
            return Ok(None);
        }
        // pivot remaining (zero-valued) artificials out, dropping redundant rows
        let mut i = 0;
        while i < tab.rows.len() {
            if tab.basis[i] >= art_start {
                match (0..art_start).find(|&j| !tab.rows[i][j].is_zero()) {
                    Some(j) => tab.pivot(i, j)?,
                    None => {
                        tab.rows.remove(i);
                        tab.rhs.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
        for row in tab.rows.iter_mut() {
            row.truncate(art_start);
        }
    }
    let mut c = vec![Rational::zero(); art_start];
    for (v, a) in model.objective() {
        c[v.0] += a;
    }
    debug_assert!(c.len() >= n);
    tab.set_objective(&c);
    tab.run(art_start).map(Some)
}
