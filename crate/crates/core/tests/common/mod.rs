#![allow(dead_code)]

use rov_core::cashflow::{OptionKind, PayoffMatrix};
use rov_core::lsmc::DecisionWindows;
use rov_core::processes::PathMatrix;
use rov_core::rng::PathStream;

/// Cox-Ross-Rubinstein price of an American put.
pub fn binomial_american_put(s0: f64, k: f64, r: f64, sigma: f64, t: f64, steps: usize) -> f64 {
    let dt = t / steps as f64;
    let u = (sigma * dt.sqrt()).exp();
    let d = 1.0 / u;
    let disc = (-r * dt).exp();
    let p = ((r * dt).exp() - d) / (u - d);
    let mut v: Vec<f64> = (0..=steps)
        .map(|j| (k - s0 * u.powi(j as i32) * d.powi((steps - j) as i32)).max(0.0))
        .collect();
    for n in (0..steps).rev() {
        for j in 0..=n {
            let cont = disc * (p * v[j + 1] + (1.0 - p) * v[j]);
            let s = s0 * u.powi(j as i32) * d.powi((n - j) as i32);
            v[j] = cont.max(k - s);
        }
    }
    v[0]
}

/// A tiny compound instance with explicit payoffs.
pub struct TinyInstance {
    pub invest: PayoffMatrix,
    pub expand: PayoffMatrix,
    pub states: Vec<PathMatrix>,
    pub windows: DecisionWindows,
    pub r: f64,
}

pub fn tiny_instance(seed: u64) -> TinyInstance {
    let mut rng = PathStream::new(seed, 0);
    let n_paths = 1 + (rng.next_uniform() * 4.0) as usize;
    let a = 1 + (rng.next_uniform() * 3.0) as usize;
    let b = 1 + (rng.next_uniform() * 3.0) as usize;
    let windows = DecisionWindows::new((1, a), (a + 1, a + b)).unwrap();
    let r = 0.01 + 0.09 * rng.next_uniform();
    let mut draw = |len: usize| -> Vec<Vec<f64>> {
        (0..n_paths)
            .map(|_| (0..len).map(|_| 200.0 * rng.next_uniform() - 100.0).collect())
            .collect()
    };
    let invest = PayoffMatrix::from_rows(OptionKind::Invest, 1, 1.0, draw(a)).unwrap();
    let expand = PayoffMatrix::from_rows(OptionKind::Expand, a + 1, 1.0, draw(b)).unwrap();
    let states = (0..3u64)
        .map(|v| {
            let mut s = PathStream::new(seed ^ 0xABCD, v as usize);
            let rows = (0..n_paths)
                .map(|_| {
                    let mut row = vec![1.0];
                    row.extend((0..a + b).map(|_| 0.5 + s.next_uniform()));
                    row
                })
                .collect();
            PathMatrix::from_rows(rows, 1.0, seed).unwrap()
        })
        .collect();
    TinyInstance {
        invest,
        expand,
        states,
        windows,
        r,
    }
}

/// Best expected value over every pair of stopping years on each path,
/// averaged over paths. Expansion only counts when the investment is made.
pub fn enumerate_compound(inst: &TinyInstance) -> f64 {
    let (i0, i1) = inst.windows.invest_years;
    let (e0, e1) = inst.windows.expand_years;
    let disc = |t: usize| (-inst.r * t as f64).exp();
    let n = inst.invest.n_paths();
    let mut total = 0.0;
    for p in 0..n {
        let mut best = 0.0f64;
        for th in i0..=i1 {
            let mut with_exp = vec![0.0];
            with_exp.extend((e0..=e1).map(|te| disc(te) * inst.expand.get(p, te)));
            for v in with_exp {
                best = best.max(disc(th) * inst.invest.get(p, th) + v);
            }
        }
        total += best;
    }
    total / n as f64
}

/// Best single stopping year per path, averaged.
pub fn enumerate_single(payoffs: &PayoffMatrix, window: (usize, usize), r: f64) -> f64 {
    let n = payoffs.n_paths();
    (0..n)
        .map(|p| {
            (window.0..=window.1)
                .map(|t| (-r * t as f64 * payoffs.dt()).exp() * payoffs.get(p, t))
                .fold(0.0f64, f64::max)
        })
        .sum::<f64>()
        / n as f64
}
