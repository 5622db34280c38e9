//! Polynomial regression basis and least-squares continuation fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BasisSpec {
    pub max_degree: usize,
    /// Pairwise products `x_i * x_j`, only when `max_degree >= 2`.
    pub include_cross_terms: bool,
    pub include_intercept: bool,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self {
            max_degree: 2,
            include_cross_terms: true,
            include_intercept: true,
        }
    }
}

/// One column of the design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Intercept,
    Power { var: usize, exp: u32 },
    Cross { a: usize, b: usize },
}

impl Term {
    #[inline]
    fn eval(self, x: &[f64]) -> f64 {
        match self {
            Term::Intercept => 1.0,
            Term::Power { var, exp } => x[var].powi(exp as i32),
            Term::Cross { a, b } => x[a] * x[b],
        }
    }
}

impl BasisSpec {
    pub fn new(max_degree: usize, include_cross_terms: bool, include_intercept: bool) -> Result<Self> {
        let s = Self {
            max_degree,
            include_cross_terms,
            include_intercept,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_degree < 1 {
            return Err(Error::Config("lsmc.basis.max_degree must be >= 1".into()));
        }
        Ok(())
    }

    const INTERCEPT_ONLY: BasisSpec = BasisSpec {
        max_degree: 0,
        include_cross_terms: false,
        include_intercept: true,
    };

    pub fn terms(&self, n_vars: usize) -> Vec<Term> {
        let mut t = Vec::new();
        if self.include_intercept {
            t.push(Term::Intercept);
        }
        for var in 0..n_vars {
            for exp in 1..=self.max_degree as u32 {
                t.push(Term::Power { var, exp });
            }
        }
        if self.include_cross_terms && self.max_degree >= 2 {
            for a in 0..n_vars {
                for b in a + 1..n_vars {
                    t.push(Term::Cross { a, b });
                }
            }
        }
        t
    }

    /// Number of basis functions for `n_vars` state variables.
    pub fn n_terms(&self, n_vars: usize) -> usize {
        let cross = if self.include_cross_terms && self.max_degree >= 2 {
            n_vars * n_vars.saturating_sub(1) / 2
        } else {
            0
        };
        usize::from(self.include_intercept) + n_vars * self.max_degree + cross
    }

    /// Progressively smaller bases tried when there are too few paths:
    /// drop cross terms, lower the degree, then the intercept alone.
    pub fn fallbacks(&self) -> Vec<BasisSpec> {
        let mut out = vec![*self];
        let mut cur = *self;
        if cur.include_cross_terms {
            cur.include_cross_terms = false;
            out.push(cur);
        }
        while cur.max_degree > 1 {
            cur.max_degree -= 1;
            out.push(cur);
        }
        out.push(Self::INTERCEPT_ONLY);
        out.dedup();
        out
    }
}

/// Least-squares coefficients over scaled state variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    /// Basis actually used, after any fallback.
    pub basis: BasisSpec,
    pub terms: Vec<Term>,
    /// Each state variable is divided by its scale before evaluating terms.
    pub scales: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub n_itm: usize,
    pub rank_deficient: bool,
}

impl RegressionFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut buf = [0.0; 8];
        let scaled: Vec<f64>;
        let xs: &[f64] = if x.len() <= buf.len() {
            for (i, v) in x.iter().enumerate() {
                buf[i] = v / self.scales[i];
            }
            &buf[..x.len()]
        } else {
            scaled = x.iter().zip(&self.scales).map(|(v, s)| v / s).collect();
            &scaled
        };
        self.terms
            .iter()
            .zip(&self.coefficients)
            .map(|(t, c)| c * t.eval(xs))
            .sum()
    }

    /// Coefficients on the unscaled terms, in the order of `terms`.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        self.terms
            .iter()
            .zip(&self.coefficients)
            .map(|(t, c)| match *t {
                Term::Intercept => *c,
                Term::Power { var, exp } => c / self.scales[var].powi(exp as i32),
                Term::Cross { a, b } => c / (self.scales[a] * self.scales[b]),
            })
            .collect()
    }
}

/// Continuation estimate at one exercise step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContinuationFit {
    Fitted(RegressionFit),
    /// Too few in-the-money paths to regress; continuation taken as 0.
    Zero { n_itm: usize },
    /// Last exercise date, nothing to continue into.
    Terminal,
    /// Each path's own realised future cash flow (small-instance checks).
    PerfectForesight { n_itm: usize },
}

impl ContinuationFit {
    /// Fitted continuation at state `x`; `None` for perfect foresight.
    pub fn predict(&self, x: &[f64]) -> Option<f64> {
        match self {
            ContinuationFit::Fitted(f) => Some(f.predict(x)),
            ContinuationFit::Zero { .. } | ContinuationFit::Terminal => Some(0.0),
            ContinuationFit::PerfectForesight { .. } => None,
        }
    }

    pub fn n_itm(&self) -> usize {
        match self {
            ContinuationFit::Fitted(f) => f.n_itm,
            ContinuationFit::Zero { n_itm } | ContinuationFit::PerfectForesight { n_itm } => *n_itm,
            ContinuationFit::Terminal => 0,
        }
    }
}

/// Regresses `targets` on the basis over paths where `mask` is set.
///
/// `states[v][p]` is variable `v` on path `p`. Falls back to a smaller basis
/// when the selected paths cannot identify every coefficient and returns
/// [`ContinuationFit::Zero`] below two selected paths.
pub fn regress_continuation(
    states: &[&[f64]],
    targets: &[f64],
    mask: &[bool],
    basis: &BasisSpec,
) -> Result<ContinuationFit> {
    let n = targets.len();
    if mask.len() != n || states.iter().any(|s| s.len() != n) {
        return Err(Error::DimensionMismatch(
            "states, targets and mask must cover the same paths".into(),
        ));
    }
    let rows: Vec<usize> = (0..n).filter(|&p| mask[p]).collect();
    let n_itm = rows.len();
    if n_itm < 2 {
        return Ok(ContinuationFit::Zero { n_itm });
    }
    let n_vars = states.len();
    let spec = basis
        .fallbacks()
        .into_iter()
        .find(|b| b.n_terms(n_vars) <= n_itm)
        .expect("intercept-only basis always fits two paths");

    let scales: Vec<f64> = states
        .iter()
        .map(|s| {
            let m = rows.iter().map(|&p| s[p].abs()).sum::<f64>() / n_itm as f64;
            if m > 0.0 && m.is_finite() {
                m
            } else {
                1.0
            }
        })
        .collect();
    let terms = spec.terms(n_vars);
    let j = terms.len();

    let mut x = vec![0.0; n_vars];
    let design = DMatrix::from_fn(n_itm, j, |i, k| {
        let p = rows[i];
        for v in 0..n_vars {
            x[v] = states[v][p] / scales[v];
        }
        terms[k].eval(&x)
    });
    let y = DVector::from_iterator(n_itm, rows.iter().map(|&p| targets[p]));
    if design.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in regression inputs".into()));
    }

    let svd = design.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let tol = s_max * (n_itm.max(j) as f64) * f64::EPSILON;
    let rank = svd.rank(tol);
    let beta = svd
        .solve(&y, tol)
        .map_err(|e| Error::Numeric(format!("least squares solve failed: {e}")))?;
    let residual_norm = (&design * &beta - &y).norm();

    Ok(ContinuationFit::Fitted(RegressionFit {
        basis: spec,
        terms,
        scales,
        coefficients: beta.iter().copied().collect(),
        residual_norm,
        n_itm,
        rank_deficient: rank < j,
    }))
}
