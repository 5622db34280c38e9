//! Backward induction for single and two-stage compound options.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::basis::{regress_continuation, BasisSpec, ContinuationFit};
use super::DecisionWindows;
use crate::cashflow::PayoffMatrix;
use crate::error::{Error, Result};
use crate::processes::{PathMatrix, ScenarioSet};

/// How the continuation value is estimated at each exercise step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuationEstimator {
    #[default]
    Regression,
    /// Uses each path's own realised future cash flow, i.e. perfect
    /// foresight. Only meant for checking tiny instances against exhaustive
    /// policy enumeration and refused when there are more paths than basis
    /// functions.
    PerfectForesight,
}

/// How the expansion option value enters the deferral exercise test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionValueMode {
    /// Regression of the realised expansion value on the deferral-time state,
    /// floored at 0.
    #[default]
    Regressed,
    /// The path's own realised expansion value.
    Pathwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub basis: BasisSpec,
    /// Continuously compounded rate per year.
    pub r: f64,
    pub estimator: ContinuationEstimator,
}

impl SolverOptions {
    pub fn new(basis: BasisSpec, r: f64) -> Self {
        Self {
            basis,
            r,
            estimator: ContinuationEstimator::Regression,
        }
    }

    pub fn exact(basis: BasisSpec, r: f64) -> Self {
        Self {
            basis,
            r,
            estimator: ContinuationEstimator::PerfectForesight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFit {
    pub step: usize,
    pub fit: ContinuationFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSolution {
    pub value: f64,
    /// Exercise step per path, `None` if never exercised.
    pub tau: Vec<Option<usize>>,
    pub exercised: Vec<bool>,
    /// Cash flow received at `tau`, valued at `tau`; 0 if never exercised.
    pub exercise_cash: Vec<f64>,
    /// Ordered from the last exercise step back to the first.
    pub continuation_fits: Vec<StepFit>,
    pub window: (usize, usize),
    pub dt: f64,
    pub r: f64,
}

impl OptionSolution {
    pub fn n_paths(&self) -> usize {
        self.tau.len()
    }

    pub fn fit_at(&self, step: usize) -> Option<&ContinuationFit> {
        self.continuation_fits.iter().find(|f| f.step == step).map(|f| &f.fit)
    }

    /// Discounted cash flow of each path back to time 0.
    pub fn discounted_cash(&self) -> Vec<f64> {
        self.tau
            .iter()
            .zip(&self.exercise_cash)
            .map(|(t, c)| match t {
                Some(t) => (-self.r * *t as f64 * self.dt).exp() * c,
                None => 0.0,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundSolution {
    pub deferral: OptionSolution,
    pub expansion: OptionSolution,
    /// Realised expansion cash flow of each path discounted to time 0.
    pub per_path_expansion_value: Vec<f64>,
    pub mode: ExpansionValueMode,
}

impl CompoundSolution {
    /// `path,tau_invest,tau_expand` with empty fields for never.
    pub fn write_stopping_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "path,tau_invest,tau_expand")?;
        let fmt = |t: Option<usize>| t.map(|v| v.to_string()).unwrap_or_default();
        for (p, (a, b)) in self.deferral.tau.iter().zip(&self.expansion.tau).enumerate() {
            writeln!(w, "{p},{},{}", fmt(*a), fmt(*b))?;
        }
        Ok(())
    }
}

/// State variables observed at a grid step, variable-major.
struct States<'a> {
    vars: Vec<&'a PathMatrix>,
}

impl<'a> States<'a> {
    fn new(vars: Vec<&'a PathMatrix>, n_paths: usize, last_step: usize) -> Result<Self> {
        if vars.is_empty() {
            return Err(Error::domain("at least one state variable is required"));
        }
        for v in &vars {
            if v.n_paths() != n_paths {
                return Err(Error::DimensionMismatch(format!(
                    "state has {} paths, payoffs have {n_paths}",
                    v.n_paths()
                )));
            }
            if v.n_steps() < last_step {
                return Err(Error::DimensionMismatch(format!(
                    "state covers {} steps, exercise needs {last_step}",
                    v.n_steps()
                )));
            }
        }
        Ok(Self { vars })
    }

    fn columns(&self, step: usize) -> Vec<Vec<f64>> {
        self.vars.iter().map(|v| v.column(step)).collect()
    }
}

fn check_window(payoffs: &PayoffMatrix, window: (usize, usize)) -> Result<()> {
    if window.0 > window.1 || window.0 == 0 {
        return Err(Error::domain(format!(
            "exercise window {}..={} is empty",
            window.0, window.1
        )));
    }
    if !payoffs.covers(window) {
        return Err(Error::domain(format!(
            "payoff matrix covers steps {}..={}, window is {}..={}",
            payoffs.first_step(),
            payoffs.last_step(),
            window.0,
            window.1
        )));
    }
    Ok(())
}

/// Longstaff-Schwartz backward induction.
///
/// `decision(p, t)` is the exercise value compared against continuation and
/// `cash(p, t)` the cash flow actually received on exercise, both valued at
/// step `t`. Only paths with positive decision value are exercised or enter
/// the regression, and ties go to exercise.
fn backward_induction(
    decision: &dyn Fn(usize, usize) -> f64,
    cash: &dyn Fn(usize, usize) -> f64,
    n_paths: usize,
    states: &States,
    window: (usize, usize),
    dt: f64,
    opts: &SolverOptions,
) -> Result<OptionSolution> {
    let exact = opts.estimator == ContinuationEstimator::PerfectForesight;
    if exact {
        let j = opts.basis.n_terms(states.vars.len());
        if n_paths > j {
            return Err(Error::domain(format!(
                "perfect-foresight mode needs at most {j} paths, got {n_paths}"
            )));
        }
    }
    let mut tau: Vec<Option<usize>> = vec![None; n_paths];
    let mut received = vec![0.0; n_paths];
    let mut fits = Vec::with_capacity(window.1 - window.0 + 1);

    for t in (window.0..=window.1).rev() {
        let ev: Vec<f64> = (0..n_paths).map(|p| decision(p, t)).collect();
        if ev.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite exercise value at step {t}")));
        }
        let itm: Vec<bool> = ev.iter().map(|v| *v > 0.0).collect();

        if t == window.1 {
            for p in (0..n_paths).filter(|&p| itm[p]) {
                tau[p] = Some(t);
                received[p] = cash(p, t);
            }
            fits.push(StepFit {
                step: t,
                fit: ContinuationFit::Terminal,
            });
            continue;
        }

        // Realised cash flow of the current policy discounted to step t.
        let target: Vec<f64> = (0..n_paths)
            .map(|p| match tau[p] {
                Some(s) => (-opts.r * (s - t) as f64 * dt).exp() * received[p],
                None => 0.0,
            })
            .collect();
        let n_itm = itm.iter().filter(|b| **b).count();

        let (fit, continuation): (ContinuationFit, Vec<f64>) = if exact {
            (ContinuationFit::PerfectForesight { n_itm }, target.clone())
        } else {
            let cols = states.columns(t);
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            let fit = regress_continuation(&refs, &target, &itm, &opts.basis)?;
            let mut x = vec![0.0; refs.len()];
            let cont = (0..n_paths)
                .map(|p| {
                    if !itm[p] {
                        return 0.0;
                    }
                    for (v, col) in refs.iter().enumerate() {
                        x[v] = col[p];
                    }
                    fit.predict(&x).unwrap_or(0.0)
                })
                .collect();
            (fit, cont)
        };

        for p in (0..n_paths).filter(|&p| itm[p]) {
            if ev[p] >= continuation[p] {
                tau[p] = Some(t);
                received[p] = cash(p, t);
            }
        }
        fits.push(StepFit { step: t, fit });
    }

    let total: f64 = tau
        .iter()
        .zip(&received)
        .map(|(t, c)| match t {
            Some(t) => (-opts.r * *t as f64 * dt).exp() * c,
            None => 0.0,
        })
        .sum();
    Ok(OptionSolution {
        value: total / n_paths as f64,
        exercised: tau.iter().map(Option::is_some).collect(),
        tau,
        exercise_cash: received,
        continuation_fits: fits,
        window,
        dt,
        r: opts.r,
    })
}

/// Values an American-style option with exercise dates `window` on the
/// payoff grid. `states` are the regression variables; the step width is
/// taken from the payoff matrix.
pub fn solve_single_option_on(
    payoffs: &PayoffMatrix,
    states: &[&PathMatrix],
    window: (usize, usize),
    opts: &SolverOptions,
) -> Result<OptionSolution> {
    check_window(payoffs, window)?;
    let states = States::new(states.to_vec(), payoffs.n_paths(), window.1)?;
    let f = |p: usize, t: usize| payoffs.get(p, t);
    backward_induction(&f, &f, payoffs.n_paths(), &states, window, payoffs.dt(), opts)
}

/// [`solve_single_option_on`] with demand, fuel price and PV cost as the
/// regression state.
pub fn solve_single_option(
    payoffs: &PayoffMatrix,
    scenario: &ScenarioSet,
    window: (usize, usize),
    opts: &SolverOptions,
) -> Result<OptionSolution> {
    solve_single_option_on(payoffs, &scenario.variables(), window, opts)
}

/// Two-stage compound option: investing during the first window unlocks the
/// expansion option of the second window.
///
/// The expansion option is solved first. Its realised cash flow on each path,
/// discounted to a deferral date, is added to the investment payoff received
/// on exercise. The exercise test uses the same quantity under
/// [`ExpansionValueMode::Pathwise`] or its regression on the deferral-date
/// state under [`ExpansionValueMode::Regressed`].
pub fn solve_compound(
    invest: &PayoffMatrix,
    expand: &PayoffMatrix,
    scenario: &ScenarioSet,
    windows: &DecisionWindows,
    opts: &SolverOptions,
    mode: ExpansionValueMode,
) -> Result<CompoundSolution> {
    solve_compound_on(invest, expand, &scenario.variables(), windows, opts, mode)
}

pub fn solve_compound_on(
    invest: &PayoffMatrix,
    expand: &PayoffMatrix,
    states: &[&PathMatrix],
    windows: &DecisionWindows,
    opts: &SolverOptions,
    mode: ExpansionValueMode,
) -> Result<CompoundSolution> {
    windows.validate()?;
    check_window(invest, windows.invest_years)?;
    check_window(expand, windows.expand_years)?;
    if invest.n_paths() != expand.n_paths() {
        return Err(Error::DimensionMismatch(
            "investment and expansion payoffs disagree on path count".into(),
        ));
    }
    if invest.dt() != expand.dt() {
        return Err(Error::DimensionMismatch(
            "investment and expansion payoffs disagree on step width".into(),
        ));
    }
    let n = invest.n_paths();
    let dt = invest.dt();
    let expansion = solve_single_option_on(expand, states, windows.expand_years, opts)?;
    let exp_pv = expansion.discounted_cash();

    let (d0, d1) = windows.invest_years;
    let state_set = States::new(states.to_vec(), n, d1)?;
    let width = d1 - d0 + 1;
    // Realised expansion value at each deferral step, valued at that step.
    let mut realised = vec![0.0; n * width];
    for t in d0..=d1 {
        let grow = (opts.r * t as f64 * dt).exp();
        for p in 0..n {
            realised[p * width + t - d0] = exp_pv[p] * grow;
        }
    }

    let exact = opts.estimator == ContinuationEstimator::PerfectForesight;
    let anticipated = if mode == ExpansionValueMode::Pathwise || exact {
        realised.clone()
    } else {
        let mut out = vec![0.0; n * width];
        let all = vec![true; n];
        for t in d0..=d1 {
            let target: Vec<f64> = (0..n).map(|p| realised[p * width + t - d0]).collect();
            if target.iter().all(|v| *v == 0.0) {
                continue;
            }
            let cols = state_set.columns(t);
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            let fit = regress_continuation(&refs, &target, &all, &opts.basis)?;
            let mut x = vec![0.0; refs.len()];
            for p in 0..n {
                for (v, col) in refs.iter().enumerate() {
                    x[v] = col[p];
                }
                out[p * width + t - d0] = fit.predict(&x).unwrap_or(0.0).max(0.0);
            }
        }
        out
    };

    let decision = |p: usize, t: usize| invest.get(p, t) + anticipated[p * width + t - d0];
    let cash = |p: usize, t: usize| invest.get(p, t) + realised[p * width + t - d0];
    let deferral = backward_induction(&decision, &cash, n, &state_set, windows.invest_years, dt, opts)?;

    Ok(CompoundSolution {
        deferral,
        expansion,
        per_path_expansion_value: exp_pv,
        mode,
    })
}
