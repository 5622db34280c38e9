//! Acceptance checks. Each prints one PASS/FAIL line; the process exits
//! non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::{binomial_american_put, enumerate_compound, tiny_instance};
use rov_core::calibrate::{calibrate_gbm, calibrate_mean_reverting, FittedParams};
use rov_core::cashflow::{OptionKind, PayoffMatrix};
use rov_core::config::ScenarioConfig;
use rov_core::lsmc::{
    solve_compound_on, solve_single_option_on, BasisSpec, ExpansionValueMode, SolverOptions,
};
use rov_core::processes::{
    simulate_gbm_on, simulate_mean_reverting_on, simulate_risk_neutral_gbm_on, GbmParams, Grid,
    MeanRevParams, RiskNeutralParams,
};
use rov_core::rng::PathStream;
use rov_core::scenario::{
    compare_standalone_vs_compound, prepare, run_sensitivity, run_valuation, value, Recommendation,
    Sweep,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn american_put() -> Outcome {
    let start = Instant::now();
    let (k, s0, r, sigma) = (40.0, 36.0, 0.06, 0.2);
    let grid = Grid {
        n_paths: 100_000,
        n_steps: 50,
        dt: 1.0 / 50.0,
    };
    let paths = simulate_risk_neutral_gbm_on(&RiskNeutralParams::new(r, sigma).unwrap(), s0, grid, 2024)
        .map_err(|e| e.to_string())?;
    let rows = (0..grid.n_paths)
        .map(|p| paths.path(p)[1..].iter().map(|s| (k - s).max(0.0)).collect())
        .collect();
    let payoffs = PayoffMatrix::from_rows(OptionKind::Invest, 1, grid.dt, rows).map_err(|e| e.to_string())?;
    let basis = BasisSpec::new(2, true, true).unwrap();
    let sol = solve_single_option_on(&payoffs, &[&paths], (1, 50), &SolverOptions::new(basis, r))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let oracle = binomial_american_put(s0, k, r, sigma, 1.0, 2000);
    let err = (sol.value - oracle).abs();
    ensure(
        err <= 0.05 && elapsed < Duration::from_secs(30),
        format!(
            "lsmc {:.4} vs binomial {:.4} (|err| {:.4} <= 0.05), {:.1}s (< 30s)",
            sol.value,
            oracle,
            err,
            elapsed.as_secs_f64()
        ),
    )
}

fn brute_force() -> Outcome {
    let n = 40;
    let mut worst = 0.0f64;
    for seed in 0..n {
        let inst = tiny_instance(seed);
        let states: Vec<_> = inst.states.iter().collect();
        let sol = solve_compound_on(
            &inst.invest,
            &inst.expand,
            &states,
            &inst.windows,
            &SolverOptions::exact(BasisSpec::default(), inst.r),
            ExpansionValueMode::Pathwise,
        )
        .map_err(|e| format!("instance {seed}: {e}"))?;
        let oracle = enumerate_compound(&inst);
        let rel = (sol.deferral.value - oracle).abs() / oracle.abs().max(1e-300);
        let rel = if oracle == 0.0 { sol.deferral.value.abs() } else { rel };
        worst = worst.max(rel);
    }
    ensure(worst <= 1e-9, format!("{n} random instances, worst relative gap {worst:.2e} (<= 1e-9)"))
}

fn martingale_and_stationarity() -> Outcome {
    let n = 100_000;
    let t0 = Instant::now();
    let (r, s0) = (0.06, 300.0);
    let rn = simulate_risk_neutral_gbm_on(
        &RiskNeutralParams::new(r, 0.09).unwrap(),
        s0,
        Grid { n_paths: n, n_steps: 10, dt: 1.0 },
        7,
    )
    .map_err(|e| e.to_string())?;
    let disc = (-r * 10.0f64).exp();
    let (m, se) = rn.mean_and_stderr_at(10);
    let (m, se) = (m * disc, se * disc);
    let t_rn = t0.elapsed();

    let t1 = Instant::now();
    let p = MeanRevParams::new(0.05, 2.6, 0.047).unwrap();
    let mr = simulate_mean_reverting_on(&p, 2.0, Grid { n_paths: n, n_steps: 200, dt: 1.0 }, 8)
        .map_err(|e| e.to_string())?;
    let (mm, mse) = mr.mean_and_stderr_at(200);
    let t_mr = t1.elapsed();

    let z_rn = (m - s0) / se;
    let z_mr = (mm - 2.6) / mse;
    ensure(
        z_rn.abs() <= 3.0
            && z_mr.abs() <= 3.0
            && t_rn < Duration::from_secs(10)
            && t_mr < Duration::from_secs(10),
        format!(
            "discounted GBM mean {m:.3} vs {s0} (z {z_rn:+.2}), {:.1}s; mean-reverting year-200 mean {mm:.5} vs 2.6 (z {z_mr:+.2}), {:.1}s",
            t_rn.as_secs_f64(),
            t_mr.as_secs_f64()
        ),
    )
}

fn compound_dominance() -> Outcome {
    let cfg = ScenarioConfig::default();
    let report = run_valuation(&cfg).map_err(|e| e.to_string())?;
    let paired = compare_standalone_vs_compound(&cfg).map_err(|e| e.to_string())?;
    ensure(
        paired.compound.value > paired.standalone.value
            && paired.standalone.value > 0.0
            && report.standard_npv < 0.0
            && report.recommendation == Recommendation::Defer,
        format!(
            "compound {:.1}k > standalone {:.1}k > 0; standard NPV {:.1}k, ROV {:.1}k, flexible {:.1}k, {}",
            paired.compound.value / 1e3,
            paired.standalone.value / 1e3,
            report.standard_npv / 1e3,
            report.option_value / 1e3,
            report.flexible_npv / 1e3,
            report.recommendation.as_str()
        ),
    )
}

fn modal_timing() -> Outcome {
    let mut modes = Vec::new();
    let mut freqs = Vec::new();
    for seed in [42, 1, 2, 3, 4] {
        let mut cfg = ScenarioConfig::default();
        cfg.run.seed = seed;
        let r = run_valuation(&cfg).map_err(|e| e.to_string())?;
        modes.push(r.invest_frequency.mode);
        freqs.push(r.invest_frequency.at(5));
    }
    ensure(
        modes.iter().all(|m| *m == Some(5)),
        format!(
            "modal year per seed {:?}, year-5 share {:?}",
            modes.iter().map(|m| m.map_or("none".to_string(), |v| v.to_string())).collect::<Vec<_>>(),
            freqs.iter().map(|f| format!("{:.1}%", 100.0 * f)).collect::<Vec<_>>()
        ),
    )
}

fn sensitivity_directions() -> Outcome {
    let base = ScenarioConfig::default();
    let res = run_sensitivity(
        &base,
        &[
            Sweep { parameter: "mu_d".into(), values: vec![0.03] },
            Sweep { parameter: "beta_f".into(), values: vec![0.15] },
            Sweep { parameter: "sigma_d".into(), values: vec![0.2] },
        ],
    )
    .map_err(|e| e.to_string())?;
    let b = &res.points[0].report;
    let (mu, beta, sig) = (&res.points[1].report, &res.points[2].report, &res.points[3].report);
    let f5 = |r: &rov_core::scenario::ScenarioReport| r.invest_frequency.at(5);
    ensure(
        mu.option_value > b.option_value && f5(beta) > f5(b) && f5(sig) < f5(b),
        format!(
            "ROV {:.1}k -> {:.1}k (mu_d 3%); year-5 {:.1}% -> {:.1}% (beta_f 15%); year-5 {:.1}% -> {:.1}% (sigma_d 20%)",
            b.option_value / 1e3,
            mu.option_value / 1e3,
            100.0 * f5(b),
            100.0 * f5(beta),
            100.0 * f5(b),
            100.0 * f5(sig)
        ),
    )
}

fn calibration_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = PathStream::new(20_240_601, 0);
    let mut misses = Vec::new();
    let mut checks = 0;
    let dt = 1.0 / 12.0;
    let grid = Grid { n_paths: 1, n_steps: 4_999, dt };
    for draw in 0..50u64 {
        let mut u = || rng.next_uniform();
        let mu = -0.05 + 0.15 * u();
        let sigma = 0.05 + 0.35 * u();
        let gbm = simulate_gbm_on(&GbmParams::new(mu, sigma).unwrap(), 100.0, grid, 1000 + draw)
            .map_err(|e| e.to_string())?;
        let fit = calibrate_gbm(gbm.path(0), dt).map_err(|e| e.to_string())?;
        if let FittedParams::Gbm { mu: m, sigma: s, stderr_mu, stderr_sigma } = fit.params {
            for (name, est, truth, se) in [("mu", m, mu, stderr_mu), ("sigma", s, sigma, stderr_sigma)] {
                checks += 1;
                if (est - truth).abs() > 3.0 * se {
                    misses.push(format!("draw {draw} gbm {name}: {est:.4} vs {truth:.4} (se {se:.4})"));
                }
            }
        }

        let beta = 0.2 + 1.8 * u();
        let s_bar = 1.0 + 4.0 * u();
        let sigma = (0.05 + 0.15 * u()) * s_bar * (2.0 * beta).sqrt();
        let mr = simulate_mean_reverting_on(&MeanRevParams::new(beta, s_bar, sigma).unwrap(), s_bar, grid, 5000 + draw)
            .map_err(|e| e.to_string())?;
        let fit = calibrate_mean_reverting(mr.path(0), dt).map_err(|e| e.to_string())?;
        if let FittedParams::MeanReverting {
            beta: Some(b),
            s_bar: sb,
            sigma: s,
            stderr_beta: Some(se_b),
            stderr_s_bar,
            stderr_sigma,
        } = fit.params
        {
            for (name, est, truth, se) in [
                ("beta", b, beta, se_b),
                ("s_bar", sb, s_bar, stderr_s_bar),
                ("sigma", s, sigma, stderr_sigma),
            ] {
                checks += 1;
                if (est - truth).abs() > 3.0 * se {
                    misses.push(format!("draw {draw} mean-reverting {name}: {est:.4} vs {truth:.4} (se {se:.4})"));
                }
            }
        } else {
            misses.push(format!("draw {draw}: mean-reverting fit unidentified"));
        }
    }
    let elapsed = start.elapsed();
    ensure(
        misses.is_empty() && checks == 250 && elapsed < Duration::from_secs(60),
        format!(
            "{checks} parameter checks over 50 draws, {} outside 3 SE{}, {:.1}s (< 60s)",
            misses.len(),
            if misses.is_empty() { String::new() } else { format!(" [{}]", misses.join("; ")) },
            elapsed.as_secs_f64()
        ),
    )
}

fn identity_and_determinism() -> Outcome {
    let cfg = ScenarioConfig::default();
    let a = value(&cfg).map_err(|e| e.to_string())?;
    let b = value(&cfg).map_err(|e| e.to_string())?;
    let r = &a.report;
    let gap = r.flexible_npv - (r.standard_npv + r.option_value);
    let json_same = a.report.to_json().unwrap() == b.report.to_json().unwrap();
    let csv = |v: &rov_core::scenario::Valuation| {
        let mut buf = Vec::new();
        v.solution.write_stopping_csv(&mut buf).unwrap();
        buf
    };
    let stops_same = csv(&a) == csv(&b);
    let paths = |_: ()| {
        let p = prepare(&cfg).unwrap();
        let mut buf = Vec::new();
        p.scenario.demand.write_csv(&mut buf).unwrap();
        p.scenario.fuel.write_csv(&mut buf).unwrap();
        p.scenario.pv_cost.write_csv(&mut buf).unwrap();
        buf
    };
    let paths_same = paths(()) == paths(());
    ensure(
        gap == 0.0 && json_same && stops_same && paths_same,
        format!(
            "flexible - standard - ROV = {gap:e}; report JSON identical: {json_same}; stopping CSV identical: {stops_same}; path CSVs identical: {paths_same}"
        ),
    )
}

fn end_to_end_runtime() -> Outcome {
    let start = Instant::now();
    let cfg = ScenarioConfig::default();
    let r = run_valuation(&cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(
        elapsed < Duration::from_secs(60) && r.n_paths == 10_000,
        format!(
            "10000 paths x 10 years, degree-2 basis with cross terms: {:.2}s (< 60s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("American put against binomial tree", american_put),
        ("compound value equals policy enumeration", brute_force),
        ("martingale and stationarity", martingale_and_stationarity),
        ("compound dominates standalone on benchmark", compound_dominance),
        ("deferral mode at final investment year", modal_timing),
        ("sensitivity directions", sensitivity_directions),
        ("calibration round trip", calibration_round_trip),
        ("report identity and determinism", identity_and_determinism),
        ("end-to-end benchmark runtime", end_to_end_runtime),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = check();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        if outcome.is_err() {
            failed += 1;
        }
        println!("[{tag}] {}. {name}: {detail}", i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
