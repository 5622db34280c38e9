//! End-to-end valuations, standalone comparisons and sensitivity sweeps.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cashflow::{build_payoffs_with_plan, CapacityPlan, PayoffMatrix};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::lsmc::{
    exercise_frequency, solve_compound, solve_single_option, CompoundSolution, FrequencyDistribution,
    SolverOptions,
};
use crate::processes::{
    build_scenario_set, gbm_from_shocks, mean_reverting_from_shocks, GbmParams, MeanRevParams,
    ScenarioSet, ShockMatrix,
};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Recommendation {
    #[serde(rename = "defer")]
    Defer,
    #[serde(rename = "invest now")]
    InvestNow,
    #[serde(rename = "abandon")]
    Abandon,
}

impl Recommendation {
    pub fn decide(standard_npv: f64, option_value: f64, flexible_npv: f64) -> Self {
        if option_value > 0.0 && flexible_npv > standard_npv {
            Recommendation::Defer
        } else if standard_npv > 0.0 {
            Recommendation::InvestNow
        } else {
            Recommendation::Abandon
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Recommendation::Defer => "defer",
            Recommendation::InvestNow => "invest now",
            Recommendation::Abandon => "abandon",
        }
    }
}

/// Headline figures of one valuation, all in dollars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    /// Mean year-1 investment payoff across paths.
    pub standard_npv: f64,
    /// Compound deferral option value.
    pub option_value: f64,
    pub flexible_npv: f64,
    pub expansion_option_value: f64,
    pub invest_frequency: FrequencyDistribution,
    pub expand_frequency: FrequencyDistribution,
    pub recommendation: Recommendation,
    pub n_paths: usize,
    pub seed: u64,
    /// First-stage capacity used to size the expansion, kW.
    pub installed_capacity_kw: f64,
    /// Fuel-price entries clamped at the floor.
    pub fuel_clamped: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Simulated paths and payoffs of a resolved configuration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ScenarioConfig,
    pub scenario: ScenarioSet,
    pub invest: PayoffMatrix,
    pub expand: PayoffMatrix,
    pub plan: CapacityPlan,
}

impl Prepared {
    pub fn options(&self) -> SolverOptions {
        SolverOptions::new(self.config.lsmc.basis, self.config.costs.r)
    }
}

/// Simulates the three state variables. Demand, fuel and PV-cost shocks use
/// seeds derived from `run.seed` with labels 0, 1 and 2.
pub fn simulate(config: &ScenarioConfig) -> Result<ScenarioSet> {
    config.validate()?;
    let cfg = config.resolved()?;
    let (n, steps, seed) = (cfg.run.n_paths, cfg.n_steps(), cfg.run.seed);
    let shocks = [0, 1, 2].map(|label| ShockMatrix::standard_normal(n, steps, derive_seed(seed, label)));
    let [zd, zf, zp] = shocks;
    let [zd, zf, zp] = cfg.processes.correlation.apply([zd?, zf?, zp?])?;
    let p = &cfg.processes;
    let demand = gbm_from_shocks(&GbmParams::new(p.demand.mu, p.demand.sigma)?, p.demand.s0, 1.0, &zd)?;
    let mut fuel_params = MeanRevParams::new(p.fuel.beta, p.fuel.s_bar, p.fuel.sigma)?;
    fuel_params.floor = p.fuel.floor;
    let fuel = mean_reverting_from_shocks(&fuel_params, p.fuel.s0, 1.0, &zf)?;
    let pv = gbm_from_shocks(&GbmParams::new(cfg.costs.r, p.pv_cost.sigma)?, p.pv_cost.s0, 1.0, &zp)?;
    build_scenario_set(demand, fuel, pv)
}

pub fn prepare(config: &ScenarioConfig) -> Result<Prepared> {
    let scenario = simulate(config)?;
    let cfg = config.resolved()?;
    let (invest, expand, plan) = build_payoffs_with_plan(&scenario, &cfg.costs, &cfg.windows)?;
    Ok(Prepared {
        config: cfg,
        scenario,
        invest,
        expand,
        plan,
    })
}

/// A report together with the solution it summarises.
#[derive(Debug, Clone)]
pub struct Valuation {
    pub report: ScenarioReport,
    pub solution: CompoundSolution,
}

pub fn value_prepared(prep: &Prepared, warnings: Vec<String>) -> Result<Valuation> {
    let cfg = &prep.config;
    let solution = solve_compound(
        &prep.invest,
        &prep.expand,
        &prep.scenario,
        &cfg.windows,
        &prep.options(),
        cfg.lsmc.expansion_value_mode,
    )?;
    let standard_npv = prep.invest.mean_at(cfg.windows.invest_years.0);
    let option_value = solution.deferral.value;
    let flexible_npv = standard_npv + option_value;
    let report = ScenarioReport {
        standard_npv,
        option_value,
        flexible_npv,
        expansion_option_value: solution.expansion.value,
        invest_frequency: exercise_frequency(&solution.deferral),
        expand_frequency: exercise_frequency(&solution.expansion),
        recommendation: Recommendation::decide(standard_npv, option_value, flexible_npv),
        n_paths: cfg.run.n_paths,
        seed: cfg.run.seed,
        installed_capacity_kw: prep.plan.installed_capacity.first().copied().unwrap_or(0.0),
        fuel_clamped: prep.scenario.fuel.clamp_count(),
        warnings,
    };
    Ok(Valuation { report, solution })
}

/// Simulate, build payoffs, solve the compound option and summarise.
pub fn value(config: &ScenarioConfig) -> Result<Valuation> {
    let prep = prepare(config)?;
    value_prepared(&prep, config.warnings())
}

pub fn run_valuation(config: &ScenarioConfig) -> Result<ScenarioReport> {
    value(config).map(|v| v.report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSummary {
    pub value: f64,
    pub frequency: FrequencyDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedReport {
    /// Deferral valued without the expansion option.
    pub standalone: OptionSummary,
    /// Deferral valued with the expansion option it unlocks.
    pub compound: OptionSummary,
    pub difference: f64,
}

pub fn compare_prepared(prep: &Prepared, compound: &CompoundSolution) -> Result<PairedReport> {
    let standalone = solve_single_option(
        &prep.invest,
        &prep.scenario,
        prep.config.windows.invest_years,
        &prep.options(),
    )?;
    Ok(PairedReport {
        difference: compound.deferral.value - standalone.value,
        standalone: OptionSummary {
            value: standalone.value,
            frequency: exercise_frequency(&standalone),
        },
        compound: OptionSummary {
            value: compound.deferral.value,
            frequency: exercise_frequency(&compound.deferral),
        },
    })
}

/// Standalone and compound deferral values on the same paths.
pub fn compare_standalone_vs_compound(config: &ScenarioConfig) -> Result<PairedReport> {
    let prep = prepare(config)?;
    let v = value_prepared(&prep, Vec::new())?;
    compare_prepared(&prep, &v.solution)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub sweeps: Vec<Sweep>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid sweep file: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub scenario: String,
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub report: ScenarioReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    /// The base run first, then one entry per swept value.
    pub points: Vec<SweepPoint>,
}

/// One valuation per swept value, each on the base seed.
pub fn run_sensitivity(base: &ScenarioConfig, sweeps: &[Sweep]) -> Result<SensitivityResult> {
    base.validate()?;
    for s in sweeps {
        base.get(&s.parameter)?;
    }
    let mut points = vec![SweepPoint {
        scenario: "S1".into(),
        description: "Benchmark".into(),
        parameter: None,
        value: None,
        report: run_valuation(base)?,
    }];
    for sweep in sweeps {
        for &v in &sweep.values {
            let mut cfg = base.resolved()?;
            cfg.set(&sweep.parameter, v)?;
            cfg.validate()?;
            points.push(SweepPoint {
                scenario: format!("S{}", points.len() + 1),
                description: format!("{} = {}", sweep.parameter, v),
                parameter: Some(sweep.parameter.clone()),
                value: Some(v),
                report: run_valuation(&cfg)?,
            });
        }
    }
    Ok(SensitivityResult { points })
}

impl SensitivityResult {
    pub fn base(&self) -> &ScenarioReport {
        &self.points[0].report
    }

    /// Table rows: timing percentages and dollar figures in thousands.
    pub fn table_csv(&self) -> String {
        let years: Vec<usize> = self.base().invest_frequency.per_year.keys().copied().collect();
        let mut out = String::from("scenario,description");
        for y in &years {
            let _ = write!(out, ",year{y}_pct");
        }
        out.push_str(",standard_npv_k,rov_k,flexible_npv_k\n");
        for p in &self.points {
            out.push_str(&table_row(&p.scenario, &p.description, &p.report, &years));
        }
        out
    }

    /// Option value and timing against each swept parameter value.
    pub fn series_csv(&self) -> String {
        let mut out =
            String::from("parameter,value,option_value,modal_year,modal_frequency,final_year_frequency\n");
        for p in &self.points[1..] {
            let r = &p.report;
            let f = &r.invest_frequency;
            let last = f.per_year.keys().next_back().copied().unwrap_or(0);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.parameter.as_deref().unwrap_or(""),
                p.value.unwrap_or(f64::NAN),
                r.option_value,
                f.mode.map(|m| m.to_string()).unwrap_or_else(|| "none".into()),
                f.modal_fraction(),
                f.at(last)
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn table_row(scenario: &str, description: &str, r: &ScenarioReport, years: &[usize]) -> String {
    let mut row = format!("{},{}", csv_field(scenario), csv_field(description));
    for y in years {
        let _ = write!(row, ",{:.1}", 100.0 * r.invest_frequency.at(*y));
    }
    let _ = writeln!(
        row,
        ",{:.1},{:.1},{:.1}",
        r.standard_npv / 1000.0,
        r.option_value / 1000.0,
        r.flexible_npv / 1000.0
    );
    row
}

impl ScenarioReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Header plus a single table row.
    pub fn table_csv(&self, scenario: &str, description: &str) -> String {
        SensitivityResult {
            points: vec![SweepPoint {
                scenario: scenario.into(),
                description: description.into(),
                parameter: None,
                value: None,
                report: self.clone(),
            }],
        }
        .table_csv()
    }
}
