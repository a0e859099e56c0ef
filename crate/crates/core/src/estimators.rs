//! Pooled Nadaraya–Watson and local polynomial regression with the spread
//! function as bandwidth.
//!
//! The kernel is the indicator of the closed window `[x − h, x + h]`. For the
//! local polynomial fit the window Gram matrix `Σ M_i` is gated on its
//! smallest eigenvalue; a failed gate or an empty window yields 0.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{eigen_sym, SymMatrix};
use crate::spread::SpreadFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Origin {
    Source,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub x: f64,
    pub y: f64,
    pub origin: Origin,
}

/// Pooled labelled sample with origin tags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Sample {
    rows: Vec<Observation>,
    n: usize,
    n_target: usize,
}

impl Sample {
    pub fn new(rows: Vec<Observation>) -> Self {
        let n = rows.iter().filter(|r| r.origin == Origin::Source).count();
        let n_target = rows.len() - n;
        Self { rows, n, n_target }
    }

    /// Source rows first, then target rows.
    pub fn from_parts(source_x: &[f64], source_y: &[f64], target_x: &[f64], target_y: &[f64]) -> Result<Self> {
        if source_x.len() != source_y.len() {
            return Err(Error::LengthMismatch {
                expected: source_x.len(),
                got: source_y.len(),
            });
        }
        if target_x.len() != target_y.len() {
            return Err(Error::LengthMismatch {
                expected: target_x.len(),
                got: target_y.len(),
            });
        }
        let rows = source_x
            .iter()
            .zip(source_y)
            .map(|(&x, &y)| Observation {
                x,
                y,
                origin: Origin::Source,
            })
            .chain(target_x.iter().zip(target_y).map(|(&x, &y)| Observation {
                x,
                y,
                origin: Origin::Target,
            }))
            .collect();
        Ok(Self::new(rows))
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn restricted_to(&self, origin: Origin) -> Sample {
        Sample::new(self.rows.iter().copied().filter(|r| r.origin == origin).collect())
    }

    pub fn xs(&self, origin: Origin) -> Vec<f64> {
        self.rows.iter().filter(|r| r.origin == origin).map(|r| r.x).collect()
    }

    pub fn sorted(&self) -> SortedSample {
        SortedSample::new(self)
    }
}

/// Sample sorted by covariate with prefix sums of the responses, for
/// O(log n) window queries.
#[derive(Debug, Clone)]
pub struct SortedSample {
    xs: Vec<f64>,
    ys: Vec<f64>,
    prefix: Vec<f64>,
}

impl SortedSample {
    pub fn new(sample: &Sample) -> Self {
        let mut pairs: Vec<(f64, f64)> = sample.rows.iter().map(|r| (r.x, r.y)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let mut prefix = Vec::with_capacity(ys.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for y in &ys {
            acc += y;
            prefix.push(acc);
        }
        Self { xs, ys, prefix }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Indices with `|X_i − x| ≤ h`.
    pub fn window(&self, x: f64, h: f64) -> Range<usize> {
        let lo = self.xs.partition_point(|&v| v < x - h);
        let hi = self.xs.partition_point(|&v| v <= x + h);
        lo..hi.max(lo)
    }
}

/// Window mean over `|X_i − x| ≤ bandwidth`; 0 for an empty window.
pub fn nw_estimate(x: f64, sample: &SortedSample, bandwidth: f64) -> f64 {
    let w = sample.window(x, bandwidth);
    if w.is_empty() {
        return 0.0;
    }
    (sample.prefix[w.end] - sample.prefix[w.start]) / w.len() as f64
}

/// Threshold rule for the eigenvalue gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateRule {
    /// `λ_min ≥ (n + n_T)·H̃/8`, for known densities.
    KnownDensity,
    /// `λ_min ≥ (n + n_T)·Ĥ̃/(16·T_0)`, for plug-in density estimates.
    PlugIn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub beta: f64,
    pub kappa: f64,
    pub c_bandwidth: f64,
    pub order_l: usize,
    pub t0: f64,
    pub t1: f64,
    pub gate: GateRule,
    /// Zero out estimates with `|f̃| ≥ T_1`.
    pub truncate: bool,
}

pub const DEFAULT_C_BANDWIDTH: f64 = 0.7;
pub const DEFAULT_SIGMA_BAR: f64 = 0.3;

impl EstimatorConfig {
    /// Known-density configuration: `c = 0.7`, `κ = 1`, `l = 0` for `β ≤ 1`
    /// and `⌊β⌋` otherwise, `T_1 = κ + 4σ̄` with `σ̄ = 0.3`, `T_0 = 2T_1`.
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
        }
        let kappa = 1.0;
        let t1 = kappa + 4.0 * DEFAULT_SIGMA_BAR;
        Ok(Self {
            beta,
            kappa,
            c_bandwidth: DEFAULT_C_BANDWIDTH,
            order_l: default_order(beta),
            t0: 2.0 * t1,
            t1,
            gate: GateRule::KnownDensity,
            truncate: false,
        })
    }

    /// Plug-in configuration: plug-in gate, truncation on, `T_0 = 2T_1`.
    pub fn plug_in(beta: f64, kappa: f64, sigma_bar: f64) -> Result<Self> {
        let mut cfg = Self::new(beta)?;
        cfg.kappa = kappa;
        cfg.t1 = kappa + 4.0 * sigma_bar;
        cfg.t0 = 2.0 * cfg.t1;
        cfg.gate = GateRule::PlugIn;
        cfg.truncate = true;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta", self.beta),
            ("kappa", self.kappa),
            ("c_bandwidth", self.c_bandwidth),
            ("t0", self.t0),
            ("t1", self.t1),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.gate == GateRule::PlugIn && (self.t0 - 2.0 * self.t1).abs() > 1e-12 * self.t1 {
            return Err(Error::invalid("t0", "plug-in estimation requires T_0 = 2 T_1"));
        }
        Ok(())
    }

    fn gate_threshold(&self, total: usize, gate_mass: f64) -> f64 {
        let expected = total as f64 * gate_mass;
        match self.gate {
            GateRule::KnownDensity => expected / 8.0,
            GateRule::PlugIn => expected / (16.0 * self.t0),
        }
    }

    fn truncated(&self, v: f64) -> f64 {
        if self.truncate && v.abs() >= self.t1 {
            0.0
        } else {
            v
        }
    }
}

/// `0` for `β ≤ 1`, else `⌊β⌋`.
pub fn default_order(beta: f64) -> usize {
    if beta <= 1.0 {
        0
    } else {
        beta.floor() as usize
    }
}

/// `𝓩(u) = (1, u, u²/2!, …, u^l/l!)`.
fn taylor_basis(u: f64, l: usize, out: &mut [f64]) {
    out[0] = 1.0;
    for k in 1..=l {
        out[k] = out[k - 1] * u / k as f64;
    }
}

/// Gram matrix `Σ M_i` over the window `|X_i − x| ≤ t`.
pub fn window_gram(x: f64, sample: &SortedSample, t: f64, order_l: usize) -> SymMatrix {
    let mut gram = SymMatrix::zeros(order_l + 1);
    let mut z = vec![0.0; order_l + 1];
    for i in sample.window(x, t) {
        taylor_basis((sample.xs[i] - x) / t, order_l, &mut z);
        gram.add_outer(&z, 1.0);
    }
    gram
}

/// Order-`l` local polynomial estimate at `x` with window half-width `t`.
///
/// `gate_mass` is the pooled interval mass `(n·H + n_T·H_T)/(n + n_T)` (or
/// its plug-in estimate) over the same window.
pub fn local_poly_estimate(
    x: f64,
    sample: &SortedSample,
    t: f64,
    cfg: &EstimatorConfig,
    gate_mass: f64,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", format!("must be positive, got {t}")));
    }
    let window = sample.window(x, t);
    if window.is_empty() {
        return Ok(0.0);
    }
    let l = cfg.order_l;
    let mut gram = SymMatrix::zeros(l + 1);
    let mut rhs = vec![0.0; l + 1];
    let mut z = vec![0.0; l + 1];
    for i in window {
        taylor_basis((sample.xs[i] - x) / t, l, &mut z);
        gram.add_outer(&z, 1.0);
        for (r, zk) in rhs.iter_mut().zip(&z) {
            *r += zk * sample.ys[i];
        }
    }
    let eig = eigen_sym(&gram)?;
    if eig.values[0] < cfg.gate_threshold(sample.len(), gate_mass) {
        return Ok(0.0);
    }
    let theta = eig.solve(&rhs)?;
    Ok(cfg.truncated(theta[0]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Pooled,
    SourceOnly,
    TargetOnly,
}

/// Fit the regression curve on `grid`.
///
/// The mode picks the rows used and the effective `(n, n_T)` handed to the
/// spread provider: source-only drops target rows and sets `n_T = 0`,
/// target-only the reverse. The bandwidth is `c·t_n(x)`.
pub fn fit_curve<S: SpreadFunction>(
    grid: &[f64],
    sample: &Sample,
    spread: &S,
    cfg: &EstimatorConfig,
    mode: FitMode,
) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "must be nonempty"));
    }
    let (rows, n, nt) = match mode {
        FitMode::Pooled => (sample.clone(), sample.n(), sample.n_target()),
        FitMode::SourceOnly => (sample.restricted_to(Origin::Source), sample.n(), 0),
        FitMode::TargetOnly => (sample.restricted_to(Origin::Target), 0, sample.n_target()),
    };
    let spread = spread.with_counts(n as u64, nt as u64)?;
    let sorted = rows.sorted();
    fit_sorted(grid, &sorted, &spread, cfg)
}

/// [`fit_curve`] on a prepared sample whose rows match the counts of `spread`.
pub fn fit_sorted<S: SpreadFunction>(
    grid: &[f64],
    sorted: &SortedSample,
    spread: &S,
    cfg: &EstimatorConfig,
) -> Result<Vec<f64>> {
    grid.par_iter()
        .map(|&x| {
            let h = cfg.c_bandwidth * spread.spread_at(x)?;
            if cfg.order_l == 0 {
                Ok(cfg.truncated(nw_estimate(x, sorted, h)))
            } else {
                local_poly_estimate(x, sorted, h, cfg, spread.pooled_mass(x, h))
            }
        })
        .collect()
}
