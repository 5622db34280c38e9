//! Least-squares Monte Carlo valuation of American-style and two-stage
//! compound options.
//!
//! Exercise is tested only on in-the-money paths and ties go to exercise.
//! The regression target is the realised discounted cash flow of the current
//! policy. Discounting inside this module is continuous, `exp(-r * t * dt)`.

mod basis;
mod frequency;
mod solver;

pub use basis::{regress_continuation, BasisSpec, ContinuationFit, RegressionFit, Term};
pub use frequency::{exercise_frequency, FrequencyDistribution};
pub use solver::{
    solve_compound, solve_compound_on, solve_single_option, solve_single_option_on, CompoundSolution,
    ContinuationEstimator, ExpansionValueMode, OptionSolution, SolverOptions, StepFit,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive year ranges of the investment and expansion decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionWindows {
    pub invest_years: (usize, usize),
    pub expand_years: (usize, usize),
}

impl Default for DecisionWindows {
    fn default() -> Self {
        Self {
            invest_years: (1, 5),
            expand_years: (6, 10),
        }
    }
}

impl DecisionWindows {
    pub fn new(invest_years: (usize, usize), expand_years: (usize, usize)) -> Result<Self> {
        let w = Self {
            invest_years,
            expand_years,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let (a0, a1) = self.invest_years;
        let (b0, b1) = self.expand_years;
        if a0 == 0 || a0 > a1 {
            v.push(format!("windows.invest_years {a0}..={a1} must be non-empty and start at 1 or later"));
        }
        if b0 == 0 || b0 > b1 {
            v.push(format!("windows.expand_years {b0}..={b1} must be non-empty and start at 1 or later"));
        }
        if b0 <= a1 {
            v.push("windows.expand_years must start after windows.invest_years ends".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::domain(v.join("; ")))
        }
    }

    /// Last year of the study.
    pub fn horizon(&self) -> usize {
        self.expand_years.1
    }
}
