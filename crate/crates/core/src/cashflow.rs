//! Deterministic economics of the PV-battery versus diesel decision.
//!
//! Payoffs are savings from choosing PV-battery over the diesel alternative:
//!
//! ```text
//! payoff = (c_dg - dnsp_share * c_pv) * capacity - om_charge + avoided_generation
//! ```
//!
//! `om_charge` is the O&M annuity from the exercise year to the horizon and
//! `avoided_generation` is the diesel fuel bill the capacity displaces over the
//! same years, both discounted with `(1 + r)^-k`. Only information available
//! at the exercise year enters a payoff.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsmc::DecisionWindows;
use crate::processes::ScenarioSet;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How the O&M charge of the expansion stage is sized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionOm {
    /// Scales with incremental capacity relative to the first-stage system.
    #[default]
    Proportional,
    /// Full `c_om` annuity whether or not capacity is added.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    /// Diesel generator capital cost, $/kW.
    pub c_dg: f64,
    /// Operation and maintenance, $/yr.
    pub c_om: f64,
    /// Discount rate per year.
    pub r: f64,
    /// Fraction of PV-battery capital paid by the network operator.
    pub dnsp_share: f64,
    /// Battery kWh per kW of PV; informational, the PV cost state already
    /// prices the bundled battery.
    pub battery_ratio: f64,
    /// Diesel litres per kWh generated.
    pub fuel_burn: f64,
    /// Hours per year that over-limit capacity is drawn, converting kW of
    /// shortfall into kWh of diesel generation.
    pub peak_hours: f64,
    pub expansion_om: ExpansionOm,
    /// Year whose cross-path mean demand sizes the first-stage system.
    /// Defaults to the last year of the investment window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizing_year: Option<usize>,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            c_dg: 600.0,
            c_om: 100_000.0,
            r: 0.06,
            dnsp_share: 0.7,
            battery_ratio: 2.0,
            fuel_burn: 0.3,
            peak_hours: 40.0,
            expansion_om: ExpansionOm::Proportional,
            sizing_year: None,
        }
    }
}

impl CostModel {
    /// Lists every violated invariant.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                v.push(msg.to_string());
            }
        };
        check(self.c_dg > 0.0 && self.c_dg.is_finite(), "costs.c_dg must be > 0");
        check(self.c_om >= 0.0 && self.c_om.is_finite(), "costs.c_om must be >= 0");
        check(self.r > 0.0 && self.r.is_finite(), "costs.r must be > 0");
        check(
            self.dnsp_share > 0.0 && self.dnsp_share <= 1.0,
            "costs.dnsp_share must lie in (0, 1]",
        );
        check(
            self.battery_ratio >= 0.0 && self.battery_ratio.is_finite(),
            "costs.battery_ratio must be >= 0",
        );
        check(
            self.fuel_burn > 0.0 && self.fuel_burn.is_finite(),
            "costs.fuel_burn must be > 0",
        );
        check(
            self.peak_hours > 0.0 && self.peak_hours.is_finite(),
            "costs.peak_hours must be > 0",
        );
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v.join("; ")))
        }
    }

    /// Battery energy (kWh) bundled with `capacity_kw` of PV.
    pub fn battery_energy(&self, capacity_kw: f64) -> f64 {
        self.battery_ratio * capacity_kw
    }

    /// Present value at `year` of one unit paid every year from `year` to
    /// `horizon` inclusive.
    pub fn annuity_factor(&self, year: usize, horizon: usize) -> f64 {
        annuity_factor(self.r, year, horizon)
    }

    /// O&M charge at exercise: `c_om` times the annuity factor.
    pub fn om_charge(&self, year: usize, horizon: usize) -> f64 {
        self.c_om * self.annuity_factor(year, horizon)
    }
}

pub fn annuity_factor(r: f64, year: usize, horizon: usize) -> f64 {
    if year > horizon {
        return 0.0;
    }
    (0..=(horizon - year)).map(|k| (1.0 + r).powi(-(k as i32))).sum()
}

/// Net present value with discrete yearly discounting `c_t / (1 + r)^t`.
pub fn npv(cashflows: &[(u32, f64)], r: f64) -> Result<f64> {
    if !(r > -1.0) {
        return Err(Error::domain(format!("discount rate must exceed -1, got {r}")));
    }
    cashflows.iter().try_fold(0.0, |acc, &(year, amount)| {
        if year < 1 {
            return Err(Error::domain("cash flow years start at 1"));
        }
        Ok(acc + amount / (1.0 + r).powi(year as i32))
    })
}

/// Cost of generating `uncovered_energy` kWh with diesel at `fuel_price` $/L.
pub fn uncovered_energy_cost(fuel_price: f64, uncovered_energy: f64, fuel_burn: f64) -> Result<f64> {
    for (name, v) in [
        ("fuel price", fuel_price),
        ("uncovered energy", uncovered_energy),
        ("fuel burn", fuel_burn),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("{name} must be >= 0, got {v}")));
        }
    }
    Ok(fuel_price * fuel_burn * uncovered_energy)
}

/// The payoff identity shared by both stages, on already-evaluated terms.
pub fn net_saving(
    cost: &CostModel,
    capacity_kw: f64,
    pv_unit_cost: f64,
    om_charge: f64,
    avoided_generation: f64,
) -> f64 {
    (cost.c_dg - cost.dnsp_share * pv_unit_cost) * capacity_kw - om_charge + avoided_generation
}

/// Avoided diesel bill at `year` for `capacity_kw` of shortfall covered
/// through the horizon, priced at the current fuel level.
fn avoided_generation(
    cost: &CostModel,
    fuel_price: f64,
    capacity_kw: f64,
    year: usize,
    horizon: usize,
) -> Result<f64> {
    let yearly = uncovered_energy_cost(fuel_price, capacity_kw * cost.peak_hours, cost.fuel_burn)?;
    Ok(yearly * cost.annuity_factor(year, horizon))
}

fn check_year(scenario: &ScenarioSet, range: (usize, usize), year: usize, path: usize) -> Result<()> {
    if year < range.0 || year > range.1 {
        return Err(Error::domain(format!(
            "year {year} lies outside the decision window {}..={}",
            range.0, range.1
        )));
    }
    if year > scenario.n_steps() {
        return Err(Error::domain(format!(
            "year {year} is beyond the simulated horizon {}",
            scenario.n_steps()
        )));
    }
    if path >= scenario.n_paths() {
        return Err(Error::domain(format!("path {path} out of range")));
    }
    Ok(())
}

/// Saving from investing in PV-battery instead of diesel at `year` on `path`.
pub fn investment_payoff(
    scenario: &ScenarioSet,
    cost: &CostModel,
    windows: &DecisionWindows,
    year: usize,
    path: usize,
) -> Result<f64> {
    check_year(scenario, windows.invest_years, year, path)?;
    let horizon = windows.horizon();
    let capacity = scenario.demand.get(path, year);
    let avoided = avoided_generation(cost, scenario.fuel.get(path, year), capacity, year, horizon)?;
    Ok(net_saving(
        cost,
        capacity,
        scenario.pv_cost.get(path, year),
        cost.om_charge(year, horizon),
        avoided,
    ))
}

/// First-stage capacity on each path, and the incremental need it leaves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityPlan {
    pub installed_capacity: Vec<f64>,
    pub sizing_year: usize,
}

impl CapacityPlan {
    /// Every path gets the cross-path mean demand at `sizing_year`.
    pub fn mean_at(scenario: &ScenarioSet, sizing_year: usize) -> Result<Self> {
        if sizing_year > scenario.n_steps() {
            return Err(Error::domain(format!(
                "sizing year {sizing_year} beyond horizon {}",
                scenario.n_steps()
            )));
        }
        let mean = scenario.demand.mean_at(sizing_year);
        Ok(Self {
            installed_capacity: vec![mean; scenario.n_paths()],
            sizing_year,
        })
    }

    pub fn uniform(capacity_kw: f64, n_paths: usize) -> Self {
        Self {
            installed_capacity: vec![capacity_kw; n_paths],
            sizing_year: 0,
        }
    }

    /// Demand above installed capacity at `year`, per path.
    pub fn expansion_capacity(&self, scenario: &ScenarioSet, year: usize) -> Vec<f64> {
        self.installed_capacity
            .iter()
            .enumerate()
            .map(|(p, cap)| (scenario.demand.get(p, year) - cap).max(0.0))
            .collect()
    }
}

/// Saving from expanding with PV-battery instead of diesel at `year`.
pub fn expansion_payoff(
    scenario: &ScenarioSet,
    cost: &CostModel,
    plan: &CapacityPlan,
    windows: &DecisionWindows,
    year: usize,
    path: usize,
) -> Result<f64> {
    check_year(scenario, windows.expand_years, year, path)?;
    if plan.installed_capacity.len() != scenario.n_paths() {
        return Err(Error::DimensionMismatch(
            "capacity plan and scenario disagree on path count".into(),
        ));
    }
    let horizon = windows.horizon();
    let installed = plan.installed_capacity[path];
    let increment = (scenario.demand.get(path, year) - installed).max(0.0);
    let full_om = cost.om_charge(year, horizon);
    let om = match cost.expansion_om {
        ExpansionOm::Fixed => full_om,
        ExpansionOm::Proportional if installed > 0.0 => full_om * increment / installed,
        ExpansionOm::Proportional if increment > 0.0 => full_om,
        ExpansionOm::Proportional => 0.0,
    };
    let avoided = avoided_generation(cost, scenario.fuel.get(path, year), increment, year, horizon)?;
    Ok(net_saving(
        cost,
        increment,
        scenario.pv_cost.get(path, year),
        om,
        avoided,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Invest,
    Expand,
}

/// Exercise payoffs over a contiguous block of grid steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    kind: OptionKind,
    first_step: usize,
    len: usize,
    n_paths: usize,
    dt: f64,
    values: Vec<f64>,
}

impl PayoffMatrix {
    /// `rows[path][k]` is the payoff at step `first_step + k`.
    pub fn from_rows(kind: OptionKind, first_step: usize, dt: f64, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_paths = rows.len();
        let len = rows.first().map(Vec::len).unwrap_or(0);
        if n_paths == 0 || len == 0 {
            return Err(Error::domain("payoff matrix must have at least one path and one step"));
        }
        if first_step == 0 {
            return Err(Error::domain("exercise steps start at 1"));
        }
        if rows.iter().any(|r| r.len() != len) {
            return Err(Error::DimensionMismatch("ragged payoff rows".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite payoff".into()));
        }
        Ok(Self {
            kind,
            first_step,
            len,
            n_paths,
            dt,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn kind(&self) -> OptionKind {
        self.kind
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn first_step(&self) -> usize {
        self.first_step
    }

    pub fn last_step(&self) -> usize {
        self.first_step + self.len - 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> std::ops::RangeInclusive<usize> {
        self.first_step..=self.last_step()
    }

    pub fn covers(&self, range: (usize, usize)) -> bool {
        range.0 >= self.first_step && range.1 <= self.last_step()
    }

    #[inline]
    pub fn get(&self, path: usize, step: usize) -> f64 {
        self.values[path * self.len + (step - self.first_step)]
    }

    pub fn column(&self, step: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.get(p, step)).collect()
    }

    pub fn mean_at(&self, step: usize) -> f64 {
        (0..self.n_paths).map(|p| self.get(p, step)).sum::<f64>() / self.n_paths as f64
    }

    /// Same shape, every value replaced by `f(value)`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|v| f(*v)).collect(),
            ..self.clone()
        }
    }

    /// `path,year,payoff` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "path,year,payoff")?;
        for p in 0..self.n_paths {
            for s in self.steps() {
                writeln!(w, "{p},{s},{:.16e}", self.get(p, s))?;
            }
        }
        Ok(())
    }
}

fn build_rows(
    n_paths: usize,
    f: impl Fn(usize) -> Result<Vec<f64>> + Sync + Send,
) -> Result<Vec<Vec<f64>>> {
    #[cfg(feature = "parallel")]
    return (0..n_paths).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n_paths).map(f).collect();
}

/// Investment payoffs over the first window and expansion payoffs over the
/// second, the latter with first-stage capacity sized at the cross-path mean
/// demand of the sizing year.
pub fn build_payoff_matrices(
    scenario: &ScenarioSet,
    cost: &CostModel,
    windows: &DecisionWindows,
) -> Result<(PayoffMatrix, PayoffMatrix)> {
    let (invest, expand, _) = build_payoffs_with_plan(scenario, cost, windows)?;
    Ok((invest, expand))
}

/// As [`build_payoff_matrices`], also returning the capacity plan used.
pub fn build_payoffs_with_plan(
    scenario: &ScenarioSet,
    cost: &CostModel,
    windows: &DecisionWindows,
) -> Result<(PayoffMatrix, PayoffMatrix, CapacityPlan)> {
    cost.validate()?;
    windows.validate()?;
    if windows.horizon() > scenario.n_steps() {
        return Err(Error::domain(format!(
            "scenario horizon {} is shorter than the decision windows ({})",
            scenario.n_steps(),
            windows.horizon()
        )));
    }
    let plan = CapacityPlan::mean_at(scenario, cost.sizing_year.unwrap_or(windows.invest_years.1))?;
    let (i0, i1) = windows.invest_years;
    let (e0, e1) = windows.expand_years;
    let invest_rows = build_rows(scenario.n_paths(), |p| {
        (i0..=i1)
            .map(|y| investment_payoff(scenario, cost, windows, y, p))
            .collect()
    })?;
    let expand_rows = build_rows(scenario.n_paths(), |p| {
        (e0..=e1)
            .map(|y| expansion_payoff(scenario, cost, &plan, windows, y, p))
            .collect()
    })?;
    Ok((
        PayoffMatrix::from_rows(OptionKind::Invest, i0, scenario.dt(), invest_rows)?,
        PayoffMatrix::from_rows(OptionKind::Expand, e0, scenario.dt(), expand_rows)?,
        plan,
    ))
}
