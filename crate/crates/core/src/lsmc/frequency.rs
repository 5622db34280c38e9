//! Distribution of exercise timing across paths.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::solver::OptionSolution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyDistribution {
    /// Fraction of paths exercising at each step of the window.
    pub per_year: BTreeMap<usize, f64>,
    pub never: f64,
    /// Most frequent exercise step, earliest on ties; `None` when no path
    /// exercises.
    pub mode: Option<usize>,
}

impl FrequencyDistribution {
    pub fn at(&self, year: usize) -> f64 {
        self.per_year.get(&year).copied().unwrap_or(0.0)
    }

    /// Fraction of paths at the modal year, 0 when there is none.
    pub fn modal_fraction(&self) -> f64 {
        self.mode.map(|y| self.at(y)).unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.per_year.values().sum::<f64>() + self.never
    }
}

pub fn exercise_frequency(solution: &OptionSolution) -> FrequencyDistribution {
    let n = solution.n_paths() as f64;
    let (w0, w1) = solution.window;
    let mut counts: BTreeMap<usize, usize> = (w0..=w1).map(|y| (y, 0)).collect();
    let mut never = 0usize;
    for t in &solution.tau {
        match t {
            Some(y) => *counts.entry(*y).or_default() += 1,
            None => never += 1,
        }
    }
    let mode = counts
        .iter()
        .filter(|(_, c)| **c > 0)
        .fold(None::<(usize, usize)>, |best, (y, c)| match best {
            Some((_, bc)) if bc >= *c => best,
            _ => Some((*y, *c)),
        })
        .map(|(y, _)| y);
    FrequencyDistribution {
        per_year: counts.into_iter().map(|(y, c)| (y, c as f64 / n)).collect(),
        never: never as f64 / n,
        mode,
    }
}
