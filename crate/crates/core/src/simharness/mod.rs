//! Seeded Monte Carlo harness for the synergistic-learning slope experiments.
//!
//! Source covariates are `Beta(a, 1)`, target covariates uniform, responses
//! `f(x) + σ·ε` with standard normal `ε`. Each `(n, rep)` cell fits the
//! source-only, target-only and pooled estimators with the closed-form
//! bandwidth `c·t_n(x)` and scores them on the grid `x_i = i/N`.

mod worst_case;

pub use worst_case::{bump, worst_case_function, BumpSum};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::densities::BetaDensity;
use crate::error::{Error, Result};
use crate::estimators::{default_order, fit_curve, EstimatorConfig, FitMode, Sample};
use crate::rates::{classify_region, Region, RegionConstants};
use crate::spread::OrderSpread;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetFn {
    /// `0.2·x^β`
    F1,
    /// `0.2·|x − 0.5|^β`
    F2,
}

impl TargetFn {
    pub fn eval(self, beta: f64, x: f64) -> f64 {
        match self {
            TargetFn::F1 => 0.2 * x.powf(beta),
            TargetFn::F2 => 0.2 * (x - 0.5).abs().powf(beta),
        }
    }

    /// `‖f‖_∞` on `[0, 1]`.
    pub fn sup_norm(self, beta: f64) -> f64 {
        match self {
            TargetFn::F1 => 0.2,
            TargetFn::F2 => 0.2 * 0.5f64.powf(beta),
        }
    }
}

/// Closure form of [`TargetFn::eval`].
pub fn target_function(f: TargetFn, beta: f64) -> impl Fn(f64) -> f64 + Sync + Copy {
    move |x| f.eval(beta, x)
}

/// Sample-size relationship between `n_T` and `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SsrRule {
    Ssr1,
    Ssr2,
    Ssr3,
    Ssr4,
}

impl SsrRule {
    pub const ALL: [SsrRule; 4] = [SsrRule::Ssr1, SsrRule::Ssr2, SsrRule::Ssr3, SsrRule::Ssr4];

    pub fn label(self) -> &'static str {
        match self {
            SsrRule::Ssr1 => "SSR-1",
            SsrRule::Ssr2 => "SSR-2",
            SsrRule::Ssr3 => "SSR-3",
            SsrRule::Ssr4 => "SSR-4",
        }
    }

    /// Target size for source size `n`, rounded to nearest with a floor of 1.
    ///
    /// With `p = (2β+1)/(2β+4)`: `0.1·n^p`, `0.5·n^{p(1+c_SL)}`,
    /// `n^{p(1+c_TL)}` and `10·n`.
    pub fn target_size(self, n: u64, beta: f64, c_sl: f64, c_tl: f64) -> u64 {
        let nf = n as f64;
        let p = (2.0 * beta + 1.0) / (2.0 * beta + 4.0);
        let raw = match self {
            SsrRule::Ssr1 => 0.1 * nf.powf(p),
            SsrRule::Ssr2 => 0.5 * nf.powf(p * (1.0 + c_sl)),
            SsrRule::Ssr3 => nf.powf(p * (1.0 + c_tl)),
            SsrRule::Ssr4 => 10.0 * nf,
        };
        (raw.round() as u64).max(1)
    }
}

impl std::fmt::Display for SsrRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub a: f64,
    pub beta: f64,
    pub n_list: Vec<u64>,
    pub rule: SsrRule,
    pub c_sl: f64,
    pub c_tl: f64,
    pub f_id: TargetFn,
    pub sigma: f64,
    pub c_bandwidth: f64,
    pub grid_n: usize,
    pub replications: usize,
    pub base_seed: u64,
}

pub const DEFAULT_SIGMA: f64 = 0.3;
pub const DEFAULT_GRID_N: usize = 3000;
pub const DEFAULT_REPLICATIONS: usize = 100;
pub const PAPER_N_LIST: [u64; 6] = [3000, 5000, 10_000, 30_000, 50_000, 100_000];
pub const DESK_N_LIST: [u64; 4] = [3000, 5000, 10_000, 30_000];
pub const DESK_REPLICATIONS: usize = 25;

/// `(c_SL, c_TL)` used with each smoothness in the reference experiments.
pub fn default_region_constants(beta: f64) -> (f64, f64) {
    if (beta - 0.9).abs() < 1e-12 {
        (0.4, 0.7)
    } else {
        (0.95, 1.2)
    }
}

impl ExperimentConfig {
    pub fn new(a: f64, beta: f64, rule: SsrRule) -> Self {
        let (c_sl, c_tl) = default_region_constants(beta);
        Self {
            a,
            beta,
            n_list: PAPER_N_LIST.to_vec(),
            rule,
            c_sl,
            c_tl,
            f_id: TargetFn::F1,
            sigma: DEFAULT_SIGMA,
            c_bandwidth: crate::estimators::DEFAULT_C_BANDWIDTH,
            grid_n: DEFAULT_GRID_N,
            replications: DEFAULT_REPLICATIONS,
            base_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("beta", self.beta),
            ("sigma", self.sigma),
            ("c_bandwidth", self.c_bandwidth),
        ] {
            if !(v.is_finite() && (v > 0.0 || (name == "sigma" && v == 0.0))) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [("c_sl", self.c_sl), ("c_tl", self.c_tl)] {
            if !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite, got {v}")));
            }
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return Err(Error::invalid("n_list", "must be a nonempty list of positive integers"));
        }
        if self.grid_n == 0 {
            return Err(Error::invalid("grid_n", "must be positive"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications", "must be positive"));
        }
        Ok(())
    }

    pub fn target_size(&self, n: u64) -> u64 {
        self.rule.target_size(n, self.beta, self.c_sl, self.c_tl)
    }

    /// Evaluation grid `x_i = i/N`, `i = 1..N`.
    pub fn grid(&self) -> Vec<f64> {
        loss_grid(self.grid_n)
    }
}

pub fn loss_grid(grid_n: usize) -> Vec<f64> {
    (1..=grid_n).map(|i| i as f64 / grid_n as f64).collect()
}

/// Mean squared deviation of `f_hat` from `f_true` on `x_i = i/N`.
pub fn grid_loss<F: Fn(f64) -> f64>(f_true: F, f_hat: &[f64], grid_n: usize) -> Result<f64> {
    if f_hat.len() != grid_n {
        return Err(Error::LengthMismatch {
            expected: grid_n,
            got: f_hat.len(),
        });
    }
    let total: f64 = f_hat
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let d = v - f_true((i + 1) as f64 / grid_n as f64);
            d * d
        })
        .sum();
    Ok(total / grid_n as f64)
}

/// Losses of the three estimators in one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub n: u64,
    pub n_target: u64,
    pub rep: usize,
    pub l_source: f64,
    pub l_target: f64,
    pub l_pool: f64,
}

/// Independent generator stream for cell `(n, rep)`.
pub fn cell_rng(base_seed: u64, n: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream((n << 32) ^ rep as u64);
    rng
}

/// Draw one labelled sample of the experiment at sizes `(n, n_T)`.
pub fn draw_sample(cfg: &ExperimentConfig, n: u64, n_target: u64, rng: &mut ChaCha8Rng) -> Result<Sample> {
    let f = target_function(cfg.f_id, cfg.beta);
    let source = BetaDensity::new(cfg.a, 1.0)?;
    let respond = |xs: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        xs.iter()
            .map(|&x| {
                let e: f64 = StandardNormal.sample(rng);
                f(x) + cfg.sigma * e
            })
            .collect()
    };
    let sx = source.sample(n as usize, rng);
    let sy = respond(&sx, rng);
    let tx = BetaDensity::uniform().sample(n_target as usize, rng);
    let ty = respond(&tx, rng);
    Sample::from_parts(&sx, &sy, &tx, &ty)
}

/// Run replication `rep` at source size `n`.
pub fn run_cell(cfg: &ExperimentConfig, n: u64, rep: usize) -> Result<CellResult> {
    if rep >= cfg.replications {
        return Err(Error::Precondition(format!(
            "rep = {rep} must be below replications = {}",
            cfg.replications
        )));
    }
    let n_target = cfg.target_size(n);
    let mut rng = cell_rng(cfg.base_seed, n, rep);
    let sample = draw_sample(cfg, n, n_target, &mut rng)?;

    let mut est = EstimatorConfig::new(cfg.beta)?;
    est.c_bandwidth = cfg.c_bandwidth;
    est.order_l = default_order(cfg.beta);
    let spread = OrderSpread::new(n, n_target, cfg.a, cfg.beta)?;
    let grid = cfg.grid();
    let f = target_function(cfg.f_id, cfg.beta);
    let loss = |mode| -> Result<f64> {
        let fitted = fit_curve(&grid, &sample, &spread, &est, mode)?;
        grid_loss(f, &fitted, cfg.grid_n)
    };
    Ok(CellResult {
        n,
        n_target,
        rep,
        l_source: loss(FitMode::SourceOnly)?,
        l_target: loss(FitMode::TargetOnly)?,
        l_pool: loss(FitMode::Pooled)?,
    })
}

/// All cells of an experiment, ordered by `n` then `rep`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let cells: Vec<(u64, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |rep| (n, rep)))
        .collect();
    cells.par_iter().map(|&(n, rep)| run_cell(cfg, n, rep)).collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub n: u64,
    pub n_target: u64,
    pub log_n: f64,
    pub log_sar: f64,
    pub region: Region,
}

/// `log[min(med L, med L_T) / med L_pool]` per source size in `cfg.n_list`.
pub fn summarize(cfg: &ExperimentConfig, cells: &[CellResult]) -> Vec<SeriesPoint> {
    cfg.n_list
        .iter()
        .map(|&n| {
            let at_n: Vec<&CellResult> = cells.iter().filter(|c| c.n == n).collect();
            let pick = |g: fn(&CellResult) -> f64| median(&at_n.iter().map(|c| g(c)).collect::<Vec<_>>());
            let ratio = pick(|c| c.l_source).min(pick(|c| c.l_target)) / pick(|c| c.l_pool);
            let n_target = cfg.target_size(n);
            SeriesPoint {
                n,
                n_target,
                log_n: (n as f64).ln(),
                log_sar: ratio.ln(),
                region: classify_region(n as f64, n_target as f64, cfg.a, cfg.beta, &RegionConstants::default()),
            }
        })
        .collect()
}

/// Run the experiment and summarize it.
pub fn log_sar_series(cfg: &ExperimentConfig) -> Result<(Vec<CellResult>, Vec<SeriesPoint>)> {
    let cells = run_experiment(cfg)?;
    let series = summarize(cfg, &cells);
    Ok((cells, series))
}

/// Ordinary least squares `(slope, intercept)`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let k = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 points, got {}", points.len())));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 1e-300 || !sxx.is_finite() {
        return Err(Error::Degenerate("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `n ≤ 3·10⁴`, 25 replications, `β = 0.5` with `a ∈ {4, 2.6}`.
    Desk,
    /// Six source sizes up to `10⁵`, 100 replications, `β ∈ {0.5, 0.9}`.
    Paper,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        }
    }

    pub fn replications(self) -> usize {
        match self {
            Preset::Desk => DESK_REPLICATIONS,
            Preset::Paper => DEFAULT_REPLICATIONS,
        }
    }

    pub fn n_list(self) -> Vec<u64> {
        match self {
            Preset::Desk => DESK_N_LIST.to_vec(),
            Preset::Paper => PAPER_N_LIST.to_vec(),
        }
    }

    /// `(β, a)` panels in display order.
    pub fn panels(self) -> Vec<(f64, f64)> {
        match self {
            Preset::Desk => vec![(0.5, 4.0), (0.5, 2.6)],
            Preset::Paper => vec![(0.5, 4.0), (0.5, 2.6), (0.9, 4.0), (0.9, 2.1)],
        }
    }

    /// One experiment per panel and SSR rule.
    pub fn experiments(self, base_seed: u64) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for (beta, a) in self.panels() {
            for rule in SsrRule::ALL {
                let mut cfg = ExperimentConfig::new(a, beta, rule);
                cfg.n_list = self.n_list();
                cfg.replications = self.replications();
                cfg.base_seed = base_seed;
                out.push(cfg);
            }
        }
        out
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::invalid("preset", format!("expected desk or paper, got `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_function_examples() {
        assert!((TargetFn::F1.eval(0.5, 0.25) - 0.1).abs() < 1e-15);
        assert_eq!(TargetFn::F2.eval(0.7, 0.5), 0.0);
        assert_eq!(TargetFn::F1.eval(1.3, 1.0), 0.2);
    }

    #[test]
    fn grid_loss_examples() {
        let n = 3000;
        let exact = (n as f64 + 1.0) * (2.0 * n as f64 + 1.0) / (6.0 * (n as f64).powi(2));
        let l = grid_loss(|x| x, &vec![0.0; n], n).unwrap();
        assert!((l - exact).abs() < 1e-14);
        assert!((l - 0.333500).abs() < 1e-6);
        assert_eq!(grid_loss(|_| 0.0, &[1.0; 10], 10).unwrap(), 1.0);
        assert!(matches!(grid_loss(|_| 0.0, &[1.0; 9], 10), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn ssr_sizes() {
        // p = 2/5 at β = 0.5
        assert_eq!(SsrRule::Ssr1.target_size(3000, 0.5, 0.95, 1.2), (0.1 * 3000f64.powf(0.4)).round() as u64);
        assert_eq!(SsrRule::Ssr4.target_size(3000, 0.5, 0.95, 1.2), 30_000);
        assert_eq!(SsrRule::Ssr1.target_size(1, 0.5, 0.95, 1.2), 1);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn slope_examples() {
        assert_eq!(fit_slope(&[(0.0, 0.0), (1.0, 1.0)]).unwrap(), (1.0, 0.0));
        assert_eq!(fit_slope(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]).unwrap().0, 0.0);
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 0.063 * i as f64 + 0.4)).collect();
        let (s, b) = fit_slope(&pts).unwrap();
        assert!((s - 0.063).abs() < 1e-12 && (b - 0.4).abs() < 1e-12);
        assert!(matches!(fit_slope(&[(1.0, 0.0), (1.0, 2.0)]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn zero_signal_zero_noise() {
        let mut cfg = ExperimentConfig::new(4.0, 0.5, SsrRule::Ssr2);
        cfg.sigma = 0.0;
        cfg.f_id = TargetFn::F1;
        cfg.grid_n = 200;
        cfg.replications = 1;
        cfg.n_list = vec![500];
        let cell = run_cell(&cfg, 500, 0).unwrap();
        // zero noise leaves only smoothing bias, bounded by sup f²
        assert!(cell.l_pool <= 0.04 && cell.l_source <= 0.04 && cell.l_target <= 0.04);
        assert_eq!(cell, run_cell(&cfg, 500, 0).unwrap());
    }

    #[test]
    fn rep_bound_is_checked() {
        let mut cfg = ExperimentConfig::new(4.0, 0.5, SsrRule::Ssr1);
        cfg.replications = 2;
        assert!(run_cell(&cfg, 100, 2).is_err());
    }
}
