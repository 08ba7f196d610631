//! A small exact MILP kernel.
//!
//! Models are maximization problems over variables with a finite lower
//! bound and an optional upper bound. Every number is a [`Rational`] with
//! arbitrary-precision numerator and denominator, so feasibility and
//! optimality are decided without tolerances.
//!
//! - [`solve_lp`] solves the continuous relaxation by two-phase simplex
//!   with Bland's rule.
//! - [`solve_milp`] runs best-bound branch and bound on top of it.
//! - [`lp_format`] writes and reads the CPLEX LP text format.

mod bnb;
pub mod lp_format;
mod simplex;

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;

pub use bnb::{solve_milp, solve_milp_with, MilpOptions};
pub use num_rational::BigRational as Rational;
pub use simplex::{solve_lp, solve_lp_with, LpOptions};

use crate::error::{Error, Result};

pub fn rat(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    Integer,
    Fractional,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: Rational,
    pub upper: Option<Rational>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

impl Constraint {
    pub fn lhs(&self, values: &[Rational]) -> Rational {
        self.terms.iter().fold(Rational::zero(), |acc, (v, c)| acc + c * &values[v.0])
    }
}

/// A maximization MILP.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MilpModel {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, Rational)>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lower: Rational,
        upper: Option<Rational>,
    ) -> VarId {
        self.vars.push(Variable { name: name.into(), kind, lower, upper });
        VarId(self.vars.len() - 1)
    }

    pub fn add_integer(&mut self, name: impl Into<String>, lower: i64, upper: i64) -> VarId {
        self.add_var(name, VarKind::Integer, rat(lower), Some(rat(upper)))
    }

    /// A fractional variable bounded below by zero.
    pub fn add_fractional(&mut self, name: impl Into<String>, upper: Option<Rational>) -> VarId {
        self.add_var(name, VarKind::Fractional, Rational::zero(), upper)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, Rational)>,
        relation: Relation,
        rhs: Rational,
    ) -> usize {
        self.constraints.push(Constraint { name: name.into(), terms, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, terms: Vec<(VarId, Rational)>) {
        self.objective = terms;
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, Rational)] {
        &self.objective
    }

    pub fn integer_count(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Integer).count()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    /// Checks that every term references a declared variable, bounds are
    /// ordered and names are unique.
    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for v in &self.vars {
            if !names.insert(v.name.as_str()) {
                return Err(Error::Model(format!("variable `{}` declared twice", v.name)));
            }
            if let Some(upper) = &v.upper {
                if upper < &v.lower {
                    return Err(Error::Model(format!("variable `{}` has upper bound below its lower bound", v.name)));
                }
            }
        }
        let n = self.vars.len();
        let bad = |terms: &[(VarId, Rational)]| terms.iter().find(|(v, _)| v.0 >= n).map(|(v, _)| v.0);
        if let Some(v) = bad(&self.objective) {
            return Err(Error::Model(format!("objective references undeclared variable #{v}")));
        }
        for c in &self.constraints {
            if let Some(v) = bad(&c.terms) {
                return Err(Error::Model(format!("constraint `{}` references undeclared variable #{v}", c.name)));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[Rational]) -> Rational {
        self.objective.iter().fold(Rational::zero(), |acc, (v, c)| acc + c * &values[v.0])
    }

    /// Exact substitution check of bounds, constraints and, if
    /// `integrality` is set, integer kinds. Returns the first violation.
    pub fn check(&self, values: &[Rational], integrality: bool) -> std::result::Result<(), String> {
        if values.len() != self.vars.len() {
            return Err(format!("{} values for {} variables", values.len(), self.vars.len()));
        }
        for (v, x) in self.vars.iter().zip(values) {
            if x < &v.lower || v.upper.as_ref().is_some_and(|u| x > u) {
                return Err(format!("`{}` = {x} is outside its bounds", v.name));
            }
            if integrality && v.kind == VarKind::Integer && !x.is_integer() {
                return Err(format!("integer variable `{}` = {x}", v.name));
            }
        }
        for c in &self.constraints {
            let lhs = c.lhs(values);
            if !c.relation.holds(&lhs, &c.rhs) {
                return Err(format!("constraint `{}`: {lhs} {} {} fails", c.name, c.relation.symbol(), c.rhs));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for MilpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MilpStatus::Optimal => "optimal",
            MilpStatus::Infeasible => "infeasible",
            MilpStatus::Unbounded => "unbounded",
        })
    }
}

/// Outcome of a solve. `values` and `objective_value` are meaningful only
/// when the status is optimal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub values: Vec<Rational>,
    pub objective_value: Rational,
}

impl MilpSolution {
    pub(crate) fn without_point(status: MilpStatus) -> Self {
        MilpSolution { status, values: Vec::new(), objective_value: Rational::zero() }
    }

    pub fn value(&self, var: VarId) -> &Rational {
        &self.values[var.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == MilpStatus::Optimal
    }
}

/// Work done by one solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: u64,
    pub pivots: u64,
    pub max_pivots_per_lp: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_catches_bad_models() {
        let mut m = MilpModel::new();
        let x = m.add_integer("x", 0, 3);
        m.add_constraint("c", vec![(VarId(7), rat(1))], Relation::Le, rat(1));
        assert!(matches!(m.validate(), Err(Error::Model(_))));

        let mut m = MilpModel::new();
        m.add_integer("x", 4, 3);
        assert!(m.validate().is_err());

        let mut m = MilpModel::new();
        m.add_integer("x", 0, 3);
        m.add_integer("x", 0, 3);
        assert!(m.validate().is_err());
        let _ = x;
    }

    #[test]
    fn check_reports_first_violation() {
        let mut m = MilpModel::new();
        let x = m.add_integer("x", 0, 3);
        m.add_constraint("cap", vec![(x, rat(2))], Relation::Le, rat(5));
        assert!(m.check(&[rat(2)], true).is_ok());
        assert!(m.check(&[rat(3)], true).unwrap_err().contains("cap"));
        assert!(m.check(&[ratio(1, 2)], true).unwrap_err().contains("integer"));
        assert!(m.check(&[ratio(1, 2)], false).is_ok());
    }
}
