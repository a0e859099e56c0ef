//! Command-line front end.

pub mod config;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::adapt::{beta_mle, lepski_from_sample, plug_in_fit, Smoothness};
use crate::error::{Error, Result};
use crate::estimators::{fit_curve, FitMode, Observation, Origin, Sample};
use crate::rates::{is_transfer_singular, sar_with, sl_slope, tl_slope, tlr_with, RateResult};
use crate::simharness::{fit_slope, log_sar_series, loss_grid, ExperimentConfig, Preset, SeriesPoint, SsrRule};
use crate::spread::{solve_spread, SpreadContext};

pub use config::{parse_config, Config};
pub use output::{emit_csv, emit_plot, format_sig, render_plot, Cell, PlotSeries};

#[derive(Debug, Parser)]
#[command(
    name = "slp",
    version,
    about = "Nonparametric regression under covariate shift",
    after_long_help = config::CONFIG_HELP
)]
pub struct Args {
    /// Configuration file; built-in defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for output files [default: `[output] dir`, else `out`].
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,

    /// Base seed; overrides SLP_SEED and the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Desk,
    Paper,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Paper => Preset::Paper,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the spread function over K equispaced points of [0, 1].
    Spread {
        #[arg(long = "x-grid", default_value_t = 101)]
        x_grid: usize,
    },
    /// Fit the regression curve to a sample CSV (columns x, y, origin).
    Estimate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Minimax rate, region and SAR for the `[rate]` settings.
    Rate {
        /// Emit a CSV over the `n_list` × `n_target_list` grid instead.
        #[arg(long)]
        sweep: bool,
    },
    /// Beta MLE per population and the Lepski smoothness estimate.
    Adapt {
        #[arg(long)]
        input: PathBuf,
    },
    /// Monte Carlo log-SAR experiments.
    Simulate {
        #[arg(long, value_enum, default_value_t = PresetArg::Desk)]
        preset: PresetArg,
    },
}

/// Resolved settings shared by all subcommands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub config: Config,
    pub output_dir: PathBuf,
    pub seed: u64,
}

pub const SEED_ENV: &str = "SLP_SEED";

/// Flag, then environment, then config file.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| Error::ConfigKey {
            key: SEED_ENV.into(),
            msg: format!("not an unsigned integer: `{v}`"),
        }),
        None => Ok(config),
    }
}

impl RunConfig {
    pub fn from_args(args: &Args) -> Result<Self> {
        let config = match &args.config {
            Some(path) => parse_config(&read_text(path)?)?,
            None => Config::default(),
        };
        let env = std::env::var(SEED_ENV).ok();
        let seed = resolve_seed(args.seed, env.as_deref(), config.simulate.seed)?;
        let output_dir = args.output_dir.clone().unwrap_or_else(|| config.output_dir.clone());
        Ok(Self {
            config,
            output_dir,
            seed,
        })
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Exit status for an error: 2 for configuration and input problems,
/// 3 for numeric failures.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_config_error() {
        2
    } else {
        3
    }
}

/// Run one subcommand, writing a short report to `out`.
pub fn run(args: &Args, out: &mut dyn std::io::Write) -> Result<()> {
    let rc = RunConfig::from_args(args)?;
    match &args.command {
        Command::Spread { x_grid } => run_spread(&rc, *x_grid, out),
        Command::Estimate { input } => run_estimate(&rc, input, out),
        Command::Rate { sweep } => run_rate(&rc, *sweep, out),
        Command::Adapt { input } => run_adapt(&rc, input, out),
        Command::Simulate { preset } => run_simulate(&rc, (*preset).into(), out),
    }
}

fn say(out: &mut dyn std::io::Write, text: String) -> Result<()> {
    writeln!(out, "{text}").map_err(|source| Error::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

fn run_spread(rc: &RunConfig, k: usize, out: &mut dyn std::io::Write) -> Result<()> {
    if k < 2 {
        return Err(Error::invalid("x-grid", format!("need at least 2 points, got {k}")));
    }
    let s = &rc.config.spread;
    let ctx = SpreadContext::new(s.n, s.n_target, s.beta, rc.config.source.clone(), rc.config.target.clone())?;
    let rows = (0..k)
        .map(|i| {
            let x = i as f64 / (k - 1) as f64;
            Ok(vec![Cell::Real(x), Cell::Real(solve_spread(&ctx, x, s.tol)?)])
        })
        .collect::<Result<Vec<_>>>()?;
    ensure_dir(&rc.output_dir)?;
    let path = rc.output_dir.join("spread.csv");
    emit_csv(&["x", "t"], &rows, &path)?;
    say(out, format!("wrote {}", path.display()))
}

/// Read a sample CSV with columns `x, y, origin` (`source` or `target`).
pub fn read_sample(path: &Path) -> Result<Sample> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::ConfigKey {
            key: name.into(),
            msg: format!("column missing from {}", path.display()),
        })
    };
    let (ix, iy, io) = (col("x")?, col("y")?, col("origin")?);
    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |what: &str| Error::ConfigParse {
            line: line + 2,
            msg: format!("{}: bad {what}", path.display()),
        };
        let x: f64 = rec[ix].parse().map_err(|_| bad("x"))?;
        let y: f64 = rec[iy].parse().map_err(|_| bad("y"))?;
        if !(0.0..=1.0).contains(&x) || !y.is_finite() {
            return Err(bad("value (x must lie in [0, 1], y finite)"));
        }
        let origin = match &rec[io] {
            "source" => Origin::Source,
            "target" => Origin::Target,
            _ => return Err(bad("origin (expected source or target)")),
        };
        rows.push(Observation { x, y, origin });
    }
    Ok(Sample::new(rows))
}

fn run_estimate(rc: &RunConfig, input: &Path, out: &mut dyn std::io::Write) -> Result<()> {
    let sample = read_sample(input)?;
    let e = &rc.config.estimate;
    let grid = loss_grid(e.grid_n);
    let fitted = match e.method {
        config::EstimateMethod::Known => {
            let ctx = SpreadContext::new(
                sample.n() as u64,
                sample.n_target() as u64,
                e.estimator.beta,
                rc.config.source.clone(),
                rc.config.target.clone(),
            )?;
            fit_curve(&grid, &sample, &ctx, &e.estimator, FitMode::Pooled)?
        }
        config::EstimateMethod::PlugIn => {
            plug_in_fit(&grid, &sample, Smoothness::Known(e.estimator.beta), &e.estimator, e.bounds)?.fitted
        }
    };
    let rows: Vec<Vec<Cell>> = grid.iter().zip(&fitted).map(|(&x, &f)| vec![x.into(), f.into()]).collect();
    ensure_dir(&rc.output_dir)?;
    let path = rc.output_dir.join("fitted.csv");
    emit_csv(&["x", "fhat"], &rows, &path)?;
    say(out, format!("wrote {}", path.display()))
}

fn rate_report(r: &RateResult, sar: f64) -> String {
    let e = r.symbolic;
    format!(
        "region = {}\nexponents = n^-{} n_T^-{} (n_T/n)^{} (n+n_T)^-{}\nrate = {}\nsar = {}\nslp = {}{}",
        r.region,
        format_sig(e.p, 12),
        format_sig(e.q, 12),
        format_sig(e.r, 12),
        format_sig(e.s, 12),
        format_sig(r.rate_value, 12),
        format_sig(sar, 12),
        r.slp,
        if r.log_factor { "\nlog_factor = true" } else { "" }
    )
}

fn run_rate(rc: &RunConfig, sweep: bool, out: &mut dyn std::io::Write) -> Result<()> {
    let r = &rc.config.rate;
    if !sweep {
        let res = tlr_with(r.n, r.n_target, r.a, r.beta, &r.constants);
        let sar = sar_with(r.n, r.n_target, r.a, r.beta, &r.constants);
        return say(out, rate_report(&res, sar));
    }
    let mut rows = Vec::new();
    for &n in &r.n_list {
        for &nt in &r.n_target_list {
            let res = tlr_with(n, nt, r.a, r.beta, &r.constants);
            let sar = sar_with(n, nt, r.a, r.beta, &r.constants);
            rows.push(vec![
                n.into(),
                nt.into(),
                res.region.to_string().into(),
                res.rate_value.into(),
                sar.into(),
                res.slp.to_string().into(),
            ]);
        }
    }
    ensure_dir(&rc.output_dir)?;
    let path = rc.output_dir.join("rate_sweep.csv");
    emit_csv(&["n", "n_T", "region", "rate", "sar", "slp"], &rows, &path)?;
    say(out, format!("wrote {}", path.display()))
}

fn run_adapt(rc: &RunConfig, input: &Path, out: &mut dyn std::io::Write) -> Result<()> {
    let sample = read_sample(input)?;
    let a = &rc.config.adapt;
    let (first, _) = crate::adapt::split_halves(&sample);
    let source = beta_mle(&first.xs(Origin::Source), a.bounds)?;
    let target = beta_mle(&first.xs(Origin::Target), a.bounds)?;
    let lep = lepski_from_sample(&sample, &a.lepski)?;
    let values = [source.0, source.1, target.0, target.1, lep.beta_hat];
    let header = ["source_a1_hat", "source_a2_hat", "target_a1_hat", "target_a2_hat", "beta_hat"];
    let block: Vec<String> = header
        .iter()
        .zip(values)
        .map(|(k, v)| format!("{k} = {}", format_sig(v, 12)))
        .collect();
    say(out, block.join("\n"))?;
    ensure_dir(&rc.output_dir)?;
    let path = rc.output_dir.join("adapt.csv");
    emit_csv(&header, &[values.iter().map(|&v| Cell::Real(v)).collect()], &path)?;
    say(out, format!("wrote {}", path.display()))
}

/// Experiment list for a preset with the `[simulate]` overrides applied.
pub fn simulation_plan(rc: &RunConfig, preset: Preset) -> Vec<ExperimentConfig> {
    let sim = &rc.config.simulate;
    preset
        .experiments(rc.seed)
        .into_iter()
        .map(|mut cfg| {
            cfg.sigma = sim.sigma;
            cfg.c_bandwidth = sim.c_bandwidth;
            cfg.grid_n = sim.grid_n;
            cfg.f_id = sim.f_id;
            if let Some(r) = sim.replications {
                cfg.replications = r;
            }
            if let Some(list) = &sim.n_list {
                cfg.n_list = list.clone();
            }
            if let Some(c) = sim.c_sl {
                cfg.c_sl = c;
            }
            if let Some(c) = sim.c_tl {
                cfg.c_tl = c;
            }
            cfg
        })
        .collect()
}

/// Slope predicted by the rate theory for one experiment: the SL and TL
/// slopes where the source is transfer-singular, otherwise 0.
pub fn theory_slope(cfg: &ExperimentConfig) -> f64 {
    if !is_transfer_singular(cfg.a, 1.0, cfg.beta) {
        return 0.0;
    }
    match cfg.rule {
        SsrRule::Ssr2 => sl_slope(cfg.a, cfg.beta, cfg.c_sl),
        SsrRule::Ssr3 => tl_slope(cfg.a, cfg.beta, cfg.c_tl),
        _ => 0.0,
    }
}

fn tag(cfg: &ExperimentConfig) -> String {
    format!("b{}_a{}", format_sig(cfg.beta, 6), format_sig(cfg.a, 6))
}

fn run_simulate(rc: &RunConfig, preset: Preset, out: &mut dyn std::io::Write) -> Result<()> {
    let plan = simulation_plan(rc, preset);
    ensure_dir(&rc.output_dir)?;
    let mut slope_rows = Vec::new();
    let mut panels: Vec<(String, Vec<PlotSeries>)> = Vec::new();
    for cfg in &plan {
        let (cells, series) = log_sar_series(cfg)?;
        let name = format!("{}_{}", tag(cfg), cfg.rule.label().to_lowercase().replace('-', ""));
        let cell_rows: Vec<Vec<Cell>> = cells
            .iter()
            .map(|c| {
                vec![
                    c.n.into(),
                    c.n_target.into(),
                    c.rep.into(),
                    c.l_source.into(),
                    c.l_target.into(),
                    c.l_pool.into(),
                ]
            })
            .collect();
        emit_csv(
            &["n", "n_T", "rep", "L_source", "L_target", "L_pool"],
            &cell_rows,
            &rc.output_dir.join(format!("cells_{name}.csv")),
        )?;
        emit_csv(
            &["log_n", "log_sar", "region"],
            &series_rows(&series),
            &rc.output_dir.join(format!("series_{name}.csv")),
        )?;
        let pts: Vec<(f64, f64)> = series.iter().map(|p| (p.log_n, p.log_sar)).collect();
        let (slope, intercept) = fit_slope(&pts)?;
        slope_rows.push(vec![
            cfg.beta.into(),
            cfg.a.into(),
            cfg.rule.label().into(),
            slope.into(),
            intercept.into(),
            theory_slope(cfg).into(),
        ]);
        let panel = tag(cfg);
        let plot = PlotSeries {
            label: cfg.rule.label().into(),
            points: series.iter().map(|p| (p.n as f64, p.log_sar)).collect(),
        };
        match panels.iter_mut().find(|(p, _)| *p == panel) {
            Some((_, list)) => list.push(plot),
            None => panels.push((panel, vec![plot])),
        }
        say(
            out,
            format!(
                "beta = {}, a = {}, {}: slope = {}",
                cfg.beta,
                cfg.a,
                cfg.rule,
                format_sig(slope, 6)
            ),
        )?;
    }
    emit_csv(
        &["beta", "a", "rule", "slope", "intercept", "theory_slope"],
        &slope_rows,
        &rc.output_dir.join("slopes.csv"),
    )?;
    for (panel, series) in &panels {
        emit_plot(
            &format!("log SAR ({})", panel.replace('_', ", ")),
            "n",
            "log SAR",
            series,
            &rc.output_dir.join(format!("plot_{panel}.svg")),
        )?;
    }
    say(out, format!("wrote results to {}", rc.output_dir.display()))
}

fn series_rows(series: &[SeriesPoint]) -> Vec<Vec<Cell>> {
    series
        .iter()
        .map(|p| vec![p.log_n.into(), p.log_sar.into(), p.region.to_string().into()])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some("2"), 3).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some("2"), 3).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, 3).unwrap(), 3);
        assert!(resolve_seed(None, Some("x"), 3).is_err());
    }

    #[test]
    fn theory_slopes_follow_regions() {
        let mut cfg = ExperimentConfig::new(4.0, 0.5, SsrRule::Ssr2);
        assert!((theory_slope(&cfg) - 0.063333).abs() < 1e-5);
        cfg.rule = SsrRule::Ssr4;
        assert_eq!(theory_slope(&cfg), 0.0);
        let cfg = ExperimentConfig::new(2.6, 0.5, SsrRule::Ssr2);
        assert_eq!(theory_slope(&cfg), 0.0);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::invalid("x", "bad")), 2);
        assert_eq!(exit_code(&Error::NoConvergence("x".into())), 3);
    }
}
