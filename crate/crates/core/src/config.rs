//! Run configuration: one JSON document fully determines a valuation.
//!
//! Sections are `processes`, `costs`, `windows`, `lsmc`, `run` and an
//! optional `overrides` map of named parameter replacements. Every field has
//! a default, so `{}` is the synthetic benchmark.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cashflow::CostModel;
use crate::error::{Error, Result};
use crate::lsmc::{BasisSpec, DecisionWindows, ExpansionValueMode};
use crate::processes::Correlation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandProcess {
    /// Initial over-limit capacity, kW.
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl Default for DemandProcess {
    fn default() -> Self {
        Self {
            s0: 1300.0,
            mu: 0.015,
            sigma: 0.098,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuelProcess {
    /// Initial diesel price, $/L.
    pub s0: f64,
    pub beta: f64,
    pub s_bar: f64,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

impl Default for FuelProcess {
    fn default() -> Self {
        Self {
            s0: 2.0,
            beta: 0.05,
            s_bar: 2.6,
            sigma: 0.047,
            floor: None,
        }
    }
}

/// PV-battery unit cost; drifts at the cost model's discount rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PvCostProcess {
    /// Initial cost, $/kW.
    pub s0: f64,
    pub sigma: f64,
}

impl Default for PvCostProcess {
    fn default() -> Self {
        Self { s0: 300.0, sigma: 0.09 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Processes {
    pub demand: DemandProcess,
    pub fuel: FuelProcess,
    pub pv_cost: PvCostProcess,
    pub correlation: Correlation,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LsmcSettings {
    pub basis: BasisSpec,
    pub expansion_value_mode: ExpansionValueMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub n_paths: usize,
    pub seed: u64,
    /// Simulated years; defaults to the end of the expansion window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            n_paths: 10_000,
            seed: 42,
            n_steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub processes: Processes,
    pub costs: CostModel,
    pub windows: DecisionWindows,
    pub lsmc: LsmcSettings,
    pub run: RunSettings,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, f64>,
}

/// Parameters addressable by overrides and sensitivity sweeps.
pub const PARAMETERS: &[&str] = &[
    "s0_d", "mu_d", "sigma_d", "s0_f", "beta_f", "s_bar_f", "sigma_f", "s0_pv", "sigma_pv", "r",
    "c_dg", "c_om", "dnsp_share", "battery_ratio", "fuel_burn", "peak_hours",
];

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid configuration: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn n_steps(&self) -> usize {
        self.run.n_steps.unwrap_or_else(|| self.windows.horizon())
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        let p = &self.processes;
        let c = &self.costs;
        Ok(match name {
            "s0_d" => p.demand.s0,
            "mu_d" => p.demand.mu,
            "sigma_d" => p.demand.sigma,
            "s0_f" => p.fuel.s0,
            "beta_f" => p.fuel.beta,
            "s_bar_f" => p.fuel.s_bar,
            "sigma_f" => p.fuel.sigma,
            "s0_pv" => p.pv_cost.s0,
            "sigma_pv" => p.pv_cost.sigma,
            "r" => c.r,
            "c_dg" => c.c_dg,
            "c_om" => c.c_om,
            "dnsp_share" => c.dnsp_share,
            "battery_ratio" => c.battery_ratio,
            "fuel_burn" => c.fuel_burn,
            "peak_hours" => c.peak_hours,
            _ => return Err(unknown(name)),
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let p = &mut self.processes;
        let c = &mut self.costs;
        let slot = match name {
            "s0_d" => &mut p.demand.s0,
            "mu_d" => &mut p.demand.mu,
            "sigma_d" => &mut p.demand.sigma,
            "s0_f" => &mut p.fuel.s0,
            "beta_f" => &mut p.fuel.beta,
            "s_bar_f" => &mut p.fuel.s_bar,
            "sigma_f" => &mut p.fuel.sigma,
            "s0_pv" => &mut p.pv_cost.s0,
            "sigma_pv" => &mut p.pv_cost.sigma,
            "r" => &mut c.r,
            "c_dg" => &mut c.c_dg,
            "c_om" => &mut c.c_om,
            "dnsp_share" => &mut c.dnsp_share,
            "battery_ratio" => &mut c.battery_ratio,
            "fuel_burn" => &mut c.fuel_burn,
            "peak_hours" => &mut c.peak_hours,
            _ => return Err(unknown(name)),
        };
        *slot = value;
        Ok(())
    }

    /// Copy with every entry of `overrides` applied and the map cleared.
    pub fn resolved(&self) -> Result<Self> {
        let mut out = self.clone();
        out.overrides.clear();
        for (k, v) in &self.overrides {
            out.set(k, *v)?;
        }
        Ok(out)
    }

    /// Every violated invariant, after applying overrides.
    pub fn violations(&self) -> Vec<String> {
        let cfg = match self.resolved() {
            Ok(c) => c,
            Err(e) => return vec![e.to_string()],
        };
        let mut v = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                v.push(msg.to_string());
            }
        };
        let p = &cfg.processes;
        let pos = |x: f64| x > 0.0 && x.is_finite();
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        check(pos(p.demand.s0), "processes.demand.s0 must be > 0");
        check(p.demand.mu.is_finite(), "processes.demand.mu must be finite");
        check(nonneg(p.demand.sigma), "processes.demand.sigma must be >= 0");
        check(pos(p.fuel.s0), "processes.fuel.s0 must be > 0");
        check(pos(p.fuel.beta), "processes.fuel.beta must be > 0");
        check(pos(p.fuel.s_bar), "processes.fuel.s_bar must be > 0");
        check(nonneg(p.fuel.sigma), "processes.fuel.sigma must be >= 0");
        check(p.fuel.floor.map_or(true, pos), "processes.fuel.floor must be > 0");
        check(pos(p.pv_cost.s0), "processes.pv_cost.s0 must be > 0");
        check(nonneg(p.pv_cost.sigma), "processes.pv_cost.sigma must be >= 0");
        check(p.correlation.cholesky().is_ok(), "processes.correlation must be a valid correlation matrix");
        check(cfg.run.n_paths > 0, "run.n_paths must be > 0");
        check(cfg.lsmc.basis.max_degree >= 1, "lsmc.basis.max_degree must be >= 1");
        let windows = cfg.windows.violations();
        let windows_ok = windows.is_empty();
        v.extend(windows);
        v.extend(cfg.costs.violations());
        if windows_ok && cfg.n_steps() < cfg.windows.horizon() {
            v.push(format!(
                "run.n_steps ({}) must cover the expansion window ending at {}",
                cfg.n_steps(),
                cfg.windows.horizon()
            ));
        }
        if let Some(y) = cfg.costs.sizing_year {
            if y > cfg.n_steps() {
                v.push("costs.sizing_year lies beyond the simulated horizon".into());
            }
        }
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

    /// Non-fatal remarks about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.run.n_paths > 0 && self.run.n_paths < 100 {
            w.push(format!(
                "only {} paths; valuations below 100 paths are unreliable",
                self.run.n_paths
            ));
        }
        w
    }
}

fn unknown(name: &str) -> Error {
    Error::Config(format!(
        "unknown parameter '{name}'; expected one of {}",
        PARAMETERS.join(", ")
    ))
}
