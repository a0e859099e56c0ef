//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fail.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slp::adapt::{lepski_beta, lepski_tau_range, plug_in_fit, LepskiConfig, ShapeBounds, Smoothness};
use slp::cli::config::DEFAULT_SEED;
use slp::densities::{DensityModel, IllustrationCase, Population, SingularityDensitySpec};
use slp::estimators::{fit_curve, nw_estimate, EstimatorConfig, FitMode};
use slp::quadrature::adaptive_simpson;
use slp::rates::{general_tlr, sl_slope, tl_slope, tlr, tsp_set};
use slp::simharness::{
    bump, draw_sample, fit_slope, grid_loss, log_sar_series, loss_grid, target_function, worst_case_function,
    ExperimentConfig, Preset, SsrRule, TargetFn,
};
use slp::spread::{crossing_points, solve_spread, spread_derivative, SpreadContext, DEFAULT_TOL};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn ctx(n: u64, nt: u64, beta: f64, source: DensityModel, target: DensityModel) -> SpreadContext {
    SpreadContext::new(n, nt, beta, source, target).expect("valid context")
}

fn spread_residual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=1_000_000u64);
        let nt = rng.random_range(0..=1_000_000u64);
        let a = rng.random_range(1.0..6.0);
        let beta = rng.random_range(0.25..2.0);
        let x: f64 = rng.random();
        let c = ctx(n, nt, beta, DensityModel::beta(a, 1.0).unwrap(), DensityModel::uniform());
        let t = match solve_spread(&c, x, DEFAULT_TOL) {
            Ok(t) => t,
            Err(e) => return outcome(false, format!("solver error at n={n}, n_T={nt}, a={a}, beta={beta}: {e}")),
        };
        worst = worst.max((c.balance(x, t) - 1.0).abs() / c.total());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 5.0,
        format!("max residual/(n+n_T) = {worst:.2e} (<= 1e-9), {secs:.2} s (< 5 s)"),
    )
}

fn spread_closed_forms() -> Outcome {
    let mut worst = 0.0f64;
    for &(n, nt, beta) in &[(600u64, 400u64, 0.5), (10_000, 0, 1.0), (50_000, 250_000, 0.3), (1_000_000, 10, 2.0)] {
        let c = ctx(n, nt, beta, DensityModel::uniform(), DensityModel::uniform());
        let t = solve_spread(&c, 0.5, DEFAULT_TOL).unwrap();
        let exact = (2.0 * (n + nt) as f64).powf(-1.0 / (2.0 * beta + 1.0));
        worst = worst.max(((t - exact) / exact).abs());
    }
    for &(n, a, beta) in &[(10_000u64, 4.0, 0.5), (1_000_000, 2.6, 0.9), (500, 1.5, 1.5)] {
        let c = ctx(n, 0, beta, DensityModel::beta(a, 1.0).unwrap(), DensityModel::uniform());
        let t = solve_spread(&c, 0.0, DEFAULT_TOL).unwrap();
        let exact = (n as f64).powf(-1.0 / (2.0 * beta + a));
        worst = worst.max(((t - exact) / exact).abs());
    }
    outcome(worst <= 1e-8, format!("max relative error {worst:.2e} (<= 1e-8)"))
}

fn spread_lipschitz_and_derivative() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let contexts = [
        ctx(10_000, 659, 0.5, DensityModel::beta(4.0, 1.0).unwrap(), DensityModel::uniform()),
        ctx(2000, 3000, 0.9, DensityModel::beta(2.0, 3.0).unwrap(), DensityModel::beta(1.5, 1.5).unwrap()),
        ctx(300, 0, 1.5, DensityModel::beta(0.7, 1.2).unwrap(), DensityModel::uniform()),
    ];
    let mut lip_excess = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let c = &contexts[rng.random_range(0..contexts.len())];
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        let tx = solve_spread(c, x, DEFAULT_TOL).unwrap();
        let ty = solve_spread(c, y, DEFAULT_TOL).unwrap();
        lip_excess = lip_excess.max((tx - ty).abs() - (x - y).abs());
    }
    let mut deriv_err = 0.0f64;
    let h = 1e-6;
    for c in &contexts {
        let (x1, x2) = crossing_points(c).unwrap();
        let mut checked = 0;
        while checked < 100 {
            let x: f64 = rng.random_range(0.01..0.99);
            if (x - x1).abs() < 0.01 || (x - x2).abs() < 0.01 {
                continue;
            }
            let fd = (solve_spread(c, x + h, DEFAULT_TOL).unwrap() - solve_spread(c, x - h, DEFAULT_TOL).unwrap())
                / (2.0 * h);
            let an = spread_derivative(c, x).unwrap();
            deriv_err = deriv_err.max((fd - an).abs());
            checked += 1;
        }
    }
    outcome(
        lip_excess <= 1e-8 && deriv_err <= 1e-4,
        format!("max |t(x)-t(x')| - |x-x'| = {lip_excess:.2e} (<= 1e-8), max derivative error {deriv_err:.2e} (<= 1e-4)"),
    )
}

fn rate_slopes() -> Outcome {
    let values = [
        (sl_slope(4.0, 0.5, 0.95), 0.063),
        (tl_slope(4.0, 0.5, 1.2), 0.04),
        (sl_slope(4.0, 0.9, 0.4), 0.060),
        (tl_slope(4.0, 0.9, 0.7), 0.060),
    ];
    let worst = values.iter().map(|(v, r)| (v - r).abs()).fold(0.0, f64::max);
    let shown: Vec<String> = values.iter().map(|(v, _)| format!("{v:.5}")).collect();
    outcome(worst <= 5e-4, format!("slopes {} (max deviation {worst:.1e} <= 5e-4)", shown.join(", ")))
}

fn general_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let target = SingularityDensitySpec::beta_a_one(1.0, 0.1, 0.5, 2.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let beta = rng.random_range(0.25..2.0);
        let a = 2.0 + 1.0 / (2.0 * beta) + rng.random_range(0.05..4.0);
        let n = 10f64.powf(rng.random_range(2.0..8.0));
        let nt = 10f64.powf(rng.random_range(0.0..9.0));
        let source = SingularityDensitySpec::beta_a_one(a, 0.1, 1e-3, 2.0 * a).unwrap();
        let g = general_tlr(n, nt, &source, &target, beta).unwrap();
        let c = tlr(n, nt, a, beta);
        if g.region != c.region {
            return outcome(false, format!("region mismatch at n={n}, n_T={nt}, a={a}, beta={beta}"));
        }
        worst = worst.max(((g.rate_value - c.rate_value) / c.rate_value).abs());
    }
    let mut exps = Vec::new();
    for case in [IllustrationCase::One, IllustrationCase::Two] {
        let s = SingularityDensitySpec::illustration(case, Population::Source);
        let t = SingularityDensitySpec::illustration(case, Population::Target);
        let (aa, at) = tsp_set(&s, &t, 0.5).unwrap().worst.unwrap();
        let threshold = (1.0 + at) / (1.0 + aa);
        let mid = general_tlr(1e8, 1e6, &s, &t, 0.5).unwrap().symbolic.r;
        exps.push((threshold, mid));
    }
    let expected = [(2.5 / 5.5, 1.25 / 3.0), (2.5 / 6.0, 1.25 / 3.5)];
    let exact = exps
        .iter()
        .zip(&expected)
        .all(|(g, e)| (g.0 - e.0).abs() < 1e-15 && (g.1 - e.1).abs() < 1e-15);
    outcome(
        worst <= 1e-12 && exact,
        format!(
            "max relative gap {worst:.1e} (<= 1e-12); case exponents {:.6}/{:.6}, {:.6}/{:.6}",
            exps[0].0, exps[0].1, exps[1].0, exps[1].1
        ),
    )
}

fn monte_carlo_slopes() -> Outcome {
    let start = Instant::now();
    let mut slopes = Vec::new();
    for cfg in Preset::Desk.experiments(DEFAULT_SEED) {
        let (_, series) = match log_sar_series(&cfg) {
            Ok(v) => v,
            Err(e) => return outcome(false, format!("simulation failed: {e}")),
        };
        let pts: Vec<(f64, f64)> = series.iter().map(|p| (p.log_n, p.log_sar)).collect();
        slopes.push((cfg.a, cfg.rule, fit_slope(&pts).unwrap().0));
    }
    let get = |a: f64, r: SsrRule| slopes.iter().find(|s| s.0 == a && s.1 == r).unwrap().2;
    let ssr2 = get(4.0, SsrRule::Ssr2);
    let ssr4 = get(4.0, SsrRule::Ssr4);
    let flat: Vec<f64> = SsrRule::ALL.iter().map(|&r| get(2.6, r)).collect();
    let pass = (0.5 * 0.063..=2.0 * 0.063).contains(&ssr2) && ssr4.abs() < 0.03 && flat.iter().all(|s| s.abs() < 0.03);
    outcome(
        pass,
        format!(
            "a=4: SSR-2 {ssr2:.4} (in [0.0315, 0.126]), SSR-4 {ssr4:.4} (|.| < 0.03); a=2.6: {:.4}, {:.4}, {:.4}, {:.4} (|.| < 0.03); {:.0} s",
            flat[0],
            flat[1],
            flat[2],
            flat[3],
            start.elapsed().as_secs_f64()
        ),
    )
}

fn risk_envelope() -> Outcome {
    let (n, a, beta, sigma, kappa) = (10_000u64, 4.0, 0.5, 0.3, 0.2);
    let mut cfg = ExperimentConfig::new(a, beta, SsrRule::Ssr2);
    cfg.sigma = sigma;
    cfg.f_id = TargetFn::F1;
    let nt = cfg.target_size(n);
    let c = ctx(n, nt, beta, DensityModel::beta(a, 1.0).unwrap(), DensityModel::uniform());
    let f = target_function(TargetFn::F1, beta);
    let points = [0.25, 0.5, 0.75];
    let t: Vec<f64> = points.iter().map(|&x| solve_spread(&c, x, DEFAULT_TOL).unwrap()).collect();
    let mut sq = [0.0; 3];
    let reps = 500;
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(70_000 + rep);
        let sorted = draw_sample(&cfg, n, nt, &mut rng).unwrap().sorted();
        for (k, &x) in points.iter().enumerate() {
            let d = nw_estimate(x, &sorted, t[k]) - f(x);
            sq[k] += d * d;
        }
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, &x) in points.iter().enumerate() {
        let mse = sq[k] / reps as f64;
        let bound = kappa * kappa * t[k].powf(2.0 * beta)
            + (2.0 * sigma * sigma + TargetFn::F1.sup_norm(beta).powi(2)) / c.pooled_count(x, t[k]);
        pass &= mse < bound;
        parts.push(format!("x={x}: {mse:.2e} < {bound:.2e}"));
    }
    outcome(pass, parts.join("; "))
}

fn plug_in_pipeline() -> Outcome {
    let n = 30_000u64;
    let cfg = ExperimentConfig::new(4.0, 0.5, SsrRule::Ssr2);
    let nt = cfg.target_size(n);
    let grid = loss_grid(cfg.grid_n);
    let f = target_function(cfg.f_id, cfg.beta);
    let known_cfg = EstimatorConfig::new(0.5).unwrap();
    let plug_cfg = EstimatorConfig::plug_in(0.5, 1.0, 0.3).unwrap();
    let bounds = ShapeBounds::new(0.05, 50.0).unwrap();
    let known_ctx = ctx(n, nt, 0.5, DensityModel::beta(4.0, 1.0).unwrap(), DensityModel::uniform());
    let (mut known, mut plug) = (0.0, 0.0);
    for rep in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(80_000 + rep);
        let sample = draw_sample(&cfg, n, nt, &mut rng).unwrap();
        let k = fit_curve(&grid, &sample, &known_ctx, &known_cfg, FitMode::Pooled).unwrap();
        known += grid_loss(f, &k, cfg.grid_n).unwrap();
        let p = match plug_in_fit(&grid, &sample, Smoothness::Known(0.5), &plug_cfg, bounds) {
            Ok(p) => p.fitted,
            Err(e) => return outcome(false, format!("plug-in failed: {e}")),
        };
        plug += grid_loss(f, &p, cfg.grid_n).unwrap();
    }
    let ratio = plug / known;
    outcome(
        ratio <= 4.0,
        format!("mean grid MSE plug-in {:.3e}, known {:.3e}, ratio {ratio:.2} (<= 4)", plug / 20.0, known / 20.0),
    )
}

fn lepski_machinery() -> Outcome {
    let cfg = LepskiConfig::new(0.5, 2.0, 1.0).unwrap();
    let r1024 = lepski_tau_range(1024, &cfg).unwrap();
    let r4096 = lepski_tau_range(4096, &cfg).unwrap();
    // log2(1024) = 10: τ* = ⌊10/2⌋ + 1, τ_* = ⌊10/5⌋; log2(4096) = 12: ⌊12/2⌋ + 1, ⌊12/5⌋
    let ranges_ok = r1024 == (6, 2) && r4096 == (7, 2);

    let mut in_range = true;
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(90_000 + seed);
        let m = 4096;
        let xs: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| (6.0 * x).sin() * rng.random_range(0.5..1.5) + rng.random_range(-1.0..1.0))
            .collect();
        match lepski_beta(&xs, &ys, &cfg) {
            Ok(o) => in_range &= (cfg.beta_lo..=cfg.beta_hi).contains(&o.beta_hat),
            Err(_) => in_range = false,
        }
    }
    let xs: Vec<f64> = (0..4096).map(|i| (i as f64 + 0.5) / 4096.0).collect();
    let constant = lepski_beta(&xs, &vec![1.7; 4096], &cfg).unwrap();
    let const_ok = constant.tau_hat == constant.tau_low;
    outcome(
        ranges_ok && in_range && const_ok,
        format!(
            "ranges {r1024:?}, {r4096:?}; beta_hat in range: {in_range}; constant data tau_hat = {} (tau_* = {})",
            constant.tau_hat, constant.tau_low
        ),
    )
}

fn worst_case_fixtures() -> Outcome {
    let psi_sq = adaptive_simpson(|u| bump(u).powi(2), 0.0, 1.0, 1e-15);
    let mut worst = 0.0f64;
    for &(m, beta) in &[(8usize, 0.5), (20, 0.9), (5, 1.5), (12, 2.3)] {
        let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
        let j = m;
        let signs: Vec<i8> = (0..j).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let f = worst_case_function(m, j, &signs, beta, 1.0).unwrap();
        let integral_sq = |g: &dyn Fn(f64) -> f64| -> f64 {
            (1..=j)
                .map(|k| {
                    let (lo, hi) = f.support(k);
                    adaptive_simpson(|x| g(x).powi(2), lo, hi, 1e-18)
                })
                .sum()
        };
        let term = f.term_l2_sq(psi_sq);
        let total = integral_sq(&|x| f.eval(x));
        worst = worst.max(((total - j as f64 * term) / (j as f64 * term)).abs());

        let mut flipped = signs.clone();
        flipped[j / 2] = -flipped[j / 2];
        let g = worst_case_function(m, j, &flipped, beta, 1.0).unwrap();
        let sep = integral_sq(&|x| f.eval(x) - g.eval(x));
        worst = worst.max(((sep - 4.0 * term) / (4.0 * term)).abs());
    }
    outcome(worst <= 1e-6, format!("max relative error {worst:.2e} (<= 1e-6)"))
}

fn read_csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "csv").then(|| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for run in 0..2 {
        let dir = tmp.path().join(format!("run{run}"));
        let status = Command::new(env!("CARGO_BIN_EXE_slp"))
            .args(["--output-dir", dir.to_str().unwrap(), "simulate", "--preset", "desk"])
            .env_remove("SLP_SEED")
            .output()
            .unwrap();
        if !status.status.success() {
            return outcome(false, format!("run {run} exited with {}", status.status));
        }
        dirs.push(dir);
    }
    let a = read_csvs(&dirs[0]);
    let b = read_csvs(&dirs[1]);
    outcome(
        !a.is_empty() && a == b,
        format!("{} CSV files compared byte for byte", a.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("spread solver residual", spread_residual),
        ("closed-form spread cases", spread_closed_forms),
        ("Lipschitz bound and derivative", spread_lipschitz_and_derivative),
        ("rate slope constants", rate_slopes),
        ("general rate reduction", general_reduction),
        ("Monte Carlo slopes (desk preset)", monte_carlo_slopes),
        ("NW risk envelope", risk_envelope),
        ("plug-in pipeline", plug_in_pipeline),
        ("Lepski machinery", lepski_machinery),
        ("worst-case fixtures", worst_case_fixtures),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} {:>2}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
