//! Browser bindings: path fan charts, a full valuation and one-parameter
//! sweeps, exchanged as JSON strings.

use rov_core::config::ScenarioConfig;
use rov_core::processes::PathMatrix;
use rov_core::scenario::{compare_prepared, prepare, run_sensitivity, simulate, value_prepared, Sweep};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Serialize)]
struct Fan {
    quantiles: Vec<f64>,
    /// `bands[q][t]` is quantile `q` at year `t`.
    bands: Vec<Vec<f64>>,
    mean: Vec<f64>,
}

#[derive(Serialize)]
struct FanChart {
    years: Vec<usize>,
    demand: Fan,
    fuel: Fan,
    pv_cost: Fan,
}

fn config(json: &str) -> Result<ScenarioConfig, String> {
    let text = if json.trim().is_empty() { "{}" } else { json };
    let cfg = ScenarioConfig::from_json(text).map_err(|e| e.to_string())?;
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(v.join("\n"));
    }
    Ok(cfg)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn fan(m: &PathMatrix) -> Fan {
    let mut bands = vec![Vec::with_capacity(m.n_steps() + 1); QUANTILES.len()];
    let mut mean = Vec::with_capacity(m.n_steps() + 1);
    for t in 0..=m.n_steps() {
        let mut col = m.column(t);
        col.sort_by(f64::total_cmp);
        for (b, q) in bands.iter_mut().zip(QUANTILES) {
            b.push(quantile(&col, q));
        }
        mean.push(m.mean_at(t));
    }
    Fan {
        quantiles: QUANTILES.to_vec(),
        bands,
        mean,
    }
}

/// Quantile bands of the three simulated state variables.
pub fn fan_chart_json(config_json: &str) -> Result<String, String> {
    let set = simulate(&config(config_json)?).map_err(|e| e.to_string())?;
    let chart = FanChart {
        years: (0..=set.n_steps()).collect(),
        demand: fan(&set.demand),
        fuel: fan(&set.fuel),
        pv_cost: fan(&set.pv_cost),
    };
    serde_json::to_string(&chart).map_err(|e| e.to_string())
}

/// Report plus the standalone comparison, as `{"report": .., "paired": ..}`.
pub fn valuation_json(config_json: &str) -> Result<String, String> {
    let cfg = config(config_json)?;
    let prep = prepare(&cfg).map_err(|e| e.to_string())?;
    let v = value_prepared(&prep, cfg.warnings()).map_err(|e| e.to_string())?;
    let paired = compare_prepared(&prep, &v.solution).map_err(|e| e.to_string())?;
    serde_json::to_string(&serde_json::json!({ "report": v.report, "paired": paired }))
        .map_err(|e| e.to_string())
}

/// Option value and timing for each value of one parameter.
pub fn sweep_json(config_json: &str, parameter: &str, values_json: &str) -> Result<String, String> {
    let cfg = config(config_json)?;
    let values: Vec<f64> = serde_json::from_str(values_json).map_err(|e| format!("values: {e}"))?;
    let res = run_sensitivity(
        &cfg,
        &[Sweep {
            parameter: parameter.to_string(),
            values,
        }],
    )
    .map_err(|e| e.to_string())?;
    let points: Vec<_> = res.points[1..]
        .iter()
        .map(|p| {
            serde_json::json!({
                "value": p.value,
                "option_value": p.report.option_value,
                "standard_npv": p.report.standard_npv,
                "invest_frequency": p.report.invest_frequency,
            })
        })
        .collect();
    serde_json::to_string(&serde_json::json!({
        "parameter": parameter,
        "base": res.base().option_value,
        "points": points,
    }))
    .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn fan_chart(config_json: &str) -> Result<String, JsError> {
    fan_chart_json(config_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn valuation(config_json: &str) -> Result<String, JsError> {
    valuation_json(config_json).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sweep(config_json: &str, parameter: &str, values_json: &str) -> Result<String, JsError> {
    sweep_json(config_json, parameter, values_json).map_err(|e| JsError::new(&e))
}
