//! Solver selection by name.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Instance, SolveResult};
use crate::{dp, oracle, prd, pwd};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Oracle,
    Dp,
    MilpPrd,
    MilpPwd,
    MilpPwr,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Oracle, Algorithm::Dp, Algorithm::MilpPrd, Algorithm::MilpPwd, Algorithm::MilpPwr];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Oracle => "oracle",
            Algorithm::Dp => "dp",
            Algorithm::MilpPrd => "milp-prd",
            Algorithm::MilpPwd => "milp-pwd",
            Algorithm::MilpPwr => "milp-pwr",
        }
    }

    pub fn solve(self, inst: &Instance) -> Result<SolveResult> {
        match self {
            Algorithm::Oracle => oracle::solve_exact(inst),
            Algorithm::Dp => dp::solve_dp(inst),
            Algorithm::MilpPrd => prd::solve_prd(inst),
            Algorithm::MilpPwd => pwd::solve_pwd(inst),
            Algorithm::MilpPwr => pwd::solve_pwr(inst),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let known: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            Error::Parse(format!("unknown algorithm `{s}`; expected one of {}", known.join(", ")))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Job;

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!(matches!("simplex".parse::<Algorithm>(), Err(Error::Parse(_))));
    }

    #[test]
    fn every_algorithm_agrees_on_e2() {
        let inst = Instance::new(vec![Job::new(2, 0, 2, 1), Job::new(2, 2, 4, 1), Job::new(3, 0, 4, 3)]).unwrap();
        for a in Algorithm::ALL {
            assert_eq!(a.solve(&inst).unwrap().best_weight, 3, "{a}");
        }
    }
}
