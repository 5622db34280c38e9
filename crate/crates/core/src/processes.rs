//! Stochastic state variables on a discrete time grid.
//!
//! Three processes drive the valuation: over-limit peak demand (GBM), diesel
//! price (exact discretisation of a mean-reverting process) and PV-battery
//! unit cost (GBM under the risk-neutral measure). Every simulator first draws
//! a [`ShockMatrix`] of standard normals from per-path streams and then applies
//! its recursion, so identical seeds give bit-identical grids whether paths are
//! generated sequentially or in parallel.

use std::io::{BufRead, Write};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::PathStream;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Drift and volatility of a geometric Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub mu: f64,
    pub sigma: f64,
}

impl GbmParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        let p = Self { mu, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::domain(format!("GBM drift must be finite, got {}", self.mu)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!(
                "GBM volatility must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Mean-reverting process `dS = beta (s_bar - S) dt + sigma dW`, simulated
/// with its exact Gaussian transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanRevParams {
    pub beta: f64,
    pub s_bar: f64,
    pub sigma: f64,
    /// Lower clamp for simulated values. Defaults to `1e-6 * s_bar`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

impl MeanRevParams {
    pub fn new(beta: f64, s_bar: f64, sigma: f64) -> Result<Self> {
        let p = Self {
            beta,
            s_bar,
            sigma,
            floor: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = Some(floor);
        self
    }

    pub fn floor_value(&self) -> f64 {
        self.floor.unwrap_or(1e-6 * self.s_bar)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::domain(format!(
                "reversion speed must be > 0, got {}",
                self.beta
            )));
        }
        if !(self.s_bar > 0.0 && self.s_bar.is_finite()) {
            return Err(Error::domain(format!(
                "reversion level must be > 0, got {}",
                self.s_bar
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!(
                "volatility must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if let Some(f) = self.floor {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::domain(format!("clamp floor must be > 0, got {f}")));
            }
        }
        Ok(())
    }

    /// Standard deviation of one exact transition over `dt`.
    pub fn transition_sd(&self, dt: f64) -> f64 {
        self.sigma * ((1.0 - (-2.0 * self.beta * dt).exp()) / (2.0 * self.beta)).sqrt()
    }
}

/// GBM under the risk-neutral measure: drift equals the risk-free rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskNeutralParams {
    pub r: f64,
    pub sigma: f64,
}

impl RiskNeutralParams {
    pub fn new(r: f64, sigma: f64) -> Result<Self> {
        let p = Self { r, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        GbmParams {
            mu: self.r,
            sigma: self.sigma,
        }
        .validate()
    }
}

/// Shape of a simulation: paths, steps and the step length in years.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
}

impl Grid {
    /// Yearly grid.
    pub fn annual(n_steps: usize, n_paths: usize) -> Self {
        Self {
            n_paths,
            n_steps,
            dt: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::domain("number of paths must be >= 1"));
        }
        if self.n_steps == 0 {
            return Err(Error::domain("number of steps must be >= 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::domain(format!("time step must be > 0, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Standard normal innovations, `n_paths` rows by `n_steps` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockMatrix {
    values: Vec<f64>,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
}

impl ShockMatrix {
    pub fn standard_normal(n_paths: usize, n_steps: usize, seed: u64) -> Result<Self> {
        Grid::annual(n_steps, n_paths).validate()?;
        let mut values = vec![0.0; n_paths * n_steps];
        let fill = |(path, row): (usize, &mut [f64])| {
            let mut stream = PathStream::new(seed, path);
            for z in row.iter_mut() {
                *z = stream.next_normal();
            }
        };
        #[cfg(feature = "parallel")]
        values.par_chunks_mut(n_steps).enumerate().for_each(fill);
        #[cfg(not(feature = "parallel"))]
        values.chunks_mut(n_steps).enumerate().for_each(fill);
        Ok(Self {
            values,
            n_paths,
            n_steps,
            seed,
        })
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, path: usize) -> &[f64] {
        &self.values[path * self.n_steps..(path + 1) * self.n_steps]
    }
}

/// Correlation between demand, fuel and PV-cost shocks (in that order).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation(pub [[f64; 3]; 3]);

impl Default for Correlation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Correlation {
    pub fn identity() -> Self {
        Correlation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    /// Lower Cholesky factor; fails unless the matrix is a valid correlation.
    pub fn cholesky(&self) -> Result<Matrix3<f64>> {
        let m = Matrix3::from_fn(|i, j| self.0[i][j]);
        for i in 0..3 {
            if m[(i, i)] != 1.0 {
                return Err(Error::domain("correlation diagonal must be 1"));
            }
            for j in 0..3 {
                if m[(i, j)] != m[(j, i)] || m[(i, j)].abs() > 1.0 {
                    return Err(Error::domain(
                        "correlation must be symmetric with entries in [-1, 1]",
                    ));
                }
            }
        }
        m.cholesky()
            .map(|c| c.l())
            .ok_or_else(|| Error::domain("correlation matrix is not positive definite"))
    }

    /// Mixes three independent shock matrices into correlated ones. The
    /// identity correlation returns the inputs untouched.
    pub fn apply(&self, shocks: [ShockMatrix; 3]) -> Result<[ShockMatrix; 3]> {
        if self.is_identity() {
            return Ok(shocks);
        }
        let l = self.cholesky()?;
        let (n_paths, n_steps) = (shocks[0].n_paths, shocks[0].n_steps);
        if shocks
            .iter()
            .any(|s| s.n_paths != n_paths || s.n_steps != n_steps)
        {
            return Err(Error::DimensionMismatch(
                "shock matrices must share a shape".into(),
            ));
        }
        let mut out = shocks.clone();
        for k in 0..n_paths * n_steps {
            let z = [shocks[0].values[k], shocks[1].values[k], shocks[2].values[k]];
            for (i, o) in out.iter_mut().enumerate() {
                o.values[k] = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
            }
        }
        Ok(out)
    }
}

/// Simulated paths of one state variable: `n_paths` rows by `n_steps + 1`
/// columns, column 0 holding the initial level.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    values: Vec<f64>,
    n_paths: usize,
    n_steps: usize,
    dt: f64,
    t0_value: f64,
    seed: u64,
    clamp_count: usize,
}

impl PathMatrix {
    /// Builds a matrix from explicit rows. Every row must have the same
    /// length, start at the same value and contain only positive numbers.
    pub fn from_rows(rows: Vec<Vec<f64>>, dt: f64, seed: u64) -> Result<Self> {
        let n_paths = rows.len();
        if n_paths == 0 {
            return Err(Error::domain("path matrix needs at least one path"));
        }
        let width = rows[0].len();
        if width < 2 {
            return Err(Error::domain("path matrix needs at least one step"));
        }
        let t0_value = rows[0][0];
        let mut values = Vec::with_capacity(n_paths * width);
        for (p, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::DimensionMismatch(format!(
                    "path {p} has {} columns, expected {width}",
                    row.len()
                )));
            }
            if row[0] != t0_value {
                return Err(Error::domain(format!(
                    "path {p} starts at {} instead of {t0_value}",
                    row[0]
                )));
            }
            values.extend(row);
        }
        Self::from_flat(values, n_paths, width - 1, dt, seed)
    }

    /// Builds a matrix from a row-major buffer. Entries must be nonnegative;
    /// zero is allowed so that degenerate scenarios (no over-limit demand)
    /// can be expressed directly.
    pub fn from_flat(
        values: Vec<f64>,
        n_paths: usize,
        n_steps: usize,
        dt: f64,
        seed: u64,
    ) -> Result<Self> {
        Grid {
            n_paths,
            n_steps,
            dt,
        }
        .validate()?;
        if values.len() != n_paths * (n_steps + 1) {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n_paths}x{} grid",
                values.len(),
                n_steps + 1
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::domain(format!(
                "path values must be finite and >= 0, found {v}"
            )));
        }
        let t0_value = values[0];
        Ok(Self {
            values,
            n_paths,
            n_steps,
            dt,
            t0_value,
            seed,
            clamp_count: 0,
        })
    }

    /// Every path equal to `s0` at every step.
    pub fn constant(s0: f64, n_paths: usize, n_steps: usize) -> Result<Self> {
        Self::from_flat(vec![s0; n_paths * (n_steps + 1)], n_paths, n_steps, 1.0, 0)
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0_value(&self) -> f64 {
        self.t0_value
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of entries raised to the clamp floor (mean-reverting only).
    pub fn clamp_count(&self) -> usize {
        self.clamp_count
    }

    #[inline]
    pub fn get(&self, path: usize, step: usize) -> f64 {
        self.values[path * (self.n_steps + 1) + step]
    }

    pub fn path(&self, path: usize) -> &[f64] {
        let w = self.n_steps + 1;
        &self.values[path * w..(path + 1) * w]
    }

    pub fn column(&self, step: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.get(p, step)).collect()
    }

    pub fn mean_at(&self, step: usize) -> f64 {
        (0..self.n_paths).map(|p| self.get(p, step)).sum::<f64>() / self.n_paths as f64
    }

    /// Sample mean and its standard error at a step.
    pub fn mean_and_stderr_at(&self, step: usize) -> (f64, f64) {
        mean_and_stderr(self.column(step).into_iter())
    }

    /// Multiplies every entry by `factor`, keeping seed metadata.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut out = Self::from_flat(
            self.values.iter().map(|v| v * factor).collect(),
            self.n_paths,
            self.n_steps,
            self.dt,
            self.seed,
        )?;
        out.clamp_count = self.clamp_count;
        Ok(out)
    }

    /// Writes `path,t0,...,tN` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("path");
        for t in 0..=self.n_steps {
            header.push_str(&format!(",t{t}"));
        }
        writeln!(w, "{header}")?;
        for p in 0..self.n_paths {
            let mut line = p.to_string();
            for v in self.path(p) {
                line.push_str(&format!(",{v:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads the format produced by [`PathMatrix::write_csv`].
    pub fn read_csv<R: BufRead>(r: R, dt: f64, seed: u64) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .skip(1)
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::ingestion(Some(i + 1), format!("{e}: {f:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(rows, dt, seed)
    }
}

pub(crate) fn mean_and_stderr(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let xs: Vec<f64> = xs.collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

fn check_start(s0: f64) -> Result<()> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::domain(format!("initial value must be > 0, got {s0}")));
    }
    Ok(())
}

fn build_paths(
    s0: f64,
    dt: f64,
    shocks: &ShockMatrix,
    step: impl Fn(f64, f64) -> f64 + Sync,
) -> PathMatrix {
    let n_steps = shocks.n_steps;
    let width = n_steps + 1;
    let mut values = vec![0.0; shocks.n_paths * width];
    let fill = |(path, row): (usize, &mut [f64])| {
        row[0] = s0;
        for (t, z) in shocks.row(path).iter().enumerate() {
            row[t + 1] = step(row[t], *z);
        }
    };
    #[cfg(feature = "parallel")]
    values.par_chunks_mut(width).enumerate().for_each(fill);
    #[cfg(not(feature = "parallel"))]
    values.chunks_mut(width).enumerate().for_each(fill);
    PathMatrix {
        values,
        n_paths: shocks.n_paths,
        n_steps,
        dt,
        t0_value: s0,
        seed: shocks.seed,
        clamp_count: 0,
    }
}

/// Applies the GBM recursion to pre-drawn shocks.
pub fn gbm_from_shocks(
    params: &GbmParams,
    s0: f64,
    dt: f64,
    shocks: &ShockMatrix,
) -> Result<PathMatrix> {
    params.validate()?;
    check_start(s0)?;
    let drift = (params.mu - 0.5 * params.sigma * params.sigma) * dt;
    let vol = params.sigma * dt.sqrt();
    Ok(build_paths(s0, dt, shocks, |s, z| s * (drift + vol * z).exp()))
}

/// Applies the exact mean-reverting transition to pre-drawn shocks, clamping
/// at the configured floor.
pub fn mean_reverting_from_shocks(
    params: &MeanRevParams,
    s0: f64,
    dt: f64,
    shocks: &ShockMatrix,
) -> Result<PathMatrix> {
    params.validate()?;
    check_start(s0)?;
    let decay = (-params.beta * dt).exp();
    let sd = params.transition_sd(dt);
    let (s_bar, floor) = (params.s_bar, params.floor_value());
    let mut m = build_paths(s0, dt, shocks, |s, z| {
        (decay * (s - s_bar) + s_bar + sd * z).max(floor)
    });
    // Count entries sitting exactly at the floor after a transition.
    m.clamp_count = (0..m.n_paths)
        .map(|p| m.path(p)[1..].iter().filter(|v| **v == floor).count())
        .sum();
    Ok(m)
}

pub fn simulate_gbm_on(params: &GbmParams, s0: f64, grid: Grid, seed: u64) -> Result<PathMatrix> {
    grid.validate()?;
    params.validate()?;
    check_start(s0)?;
    let shocks = ShockMatrix::standard_normal(grid.n_paths, grid.n_steps, seed)?;
    gbm_from_shocks(params, s0, grid.dt, &shocks)
}

/// Yearly GBM paths.
pub fn simulate_gbm(
    params: &GbmParams,
    s0: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathMatrix> {
    simulate_gbm_on(params, s0, Grid::annual(n_steps, n_paths), seed)
}

pub fn simulate_mean_reverting_on(
    params: &MeanRevParams,
    s0: f64,
    grid: Grid,
    seed: u64,
) -> Result<PathMatrix> {
    grid.validate()?;
    params.validate()?;
    check_start(s0)?;
    let shocks = ShockMatrix::standard_normal(grid.n_paths, grid.n_steps, seed)?;
    mean_reverting_from_shocks(params, s0, grid.dt, &shocks)
}

/// Yearly mean-reverting paths.
pub fn simulate_mean_reverting(
    params: &MeanRevParams,
    s0: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathMatrix> {
    simulate_mean_reverting_on(params, s0, Grid::annual(n_steps, n_paths), seed)
}

pub fn simulate_risk_neutral_gbm_on(
    params: &RiskNeutralParams,
    s0: f64,
    grid: Grid,
    seed: u64,
) -> Result<PathMatrix> {
    let gbm = GbmParams {
        mu: params.r,
        sigma: params.sigma,
    };
    simulate_gbm_on(&gbm, s0, grid, seed)
}

/// Yearly risk-neutral GBM paths.
pub fn simulate_risk_neutral_gbm(
    params: &RiskNeutralParams,
    s0: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathMatrix> {
    simulate_risk_neutral_gbm_on(params, s0, Grid::annual(n_steps, n_paths), seed)
}

/// The three state variables on shared path indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub demand: PathMatrix,
    pub fuel: PathMatrix,
    pub pv_cost: PathMatrix,
}

/// Bundles demand (kW), diesel price ($/L) and PV-battery cost ($/kW) paths.
pub fn build_scenario_set(
    demand: PathMatrix,
    fuel: PathMatrix,
    pv_cost: PathMatrix,
) -> Result<ScenarioSet> {
    for (name, m) in [("fuel", &fuel), ("pv_cost", &pv_cost)] {
        if m.n_paths != demand.n_paths || m.n_steps != demand.n_steps {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {}x{} but demand is {}x{}",
                m.n_paths,
                m.n_steps + 1,
                demand.n_paths,
                demand.n_steps + 1
            )));
        }
        if m.dt != demand.dt {
            return Err(Error::DimensionMismatch(format!(
                "{name} has dt {} but demand has dt {}",
                m.dt, demand.dt
            )));
        }
    }
    Ok(ScenarioSet {
        demand,
        fuel,
        pv_cost,
    })
}

impl ScenarioSet {
    pub fn n_paths(&self) -> usize {
        self.demand.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.demand.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.demand.dt
    }

    /// Seeds of demand, fuel and PV-cost paths.
    pub fn seeds(&self) -> [u64; 3] {
        [self.demand.seed, self.fuel.seed, self.pv_cost.seed]
    }

    pub fn variables(&self) -> [&PathMatrix; 3] {
        [&self.demand, &self.fuel, &self.pv_cost]
    }
}
