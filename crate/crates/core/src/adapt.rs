//! Nuisance-parameter estimation: Beta shapes by maximum likelihood on a
//! held-out half, and the smoothness `β` by a Lepski-type comparison of
//! dyadic bin regressograms.

use crate::densities::DensityModel;
use crate::error::{Error, Result};
use crate::estimators::{default_order, fit_curve, EstimatorConfig, FitMode, Origin, Sample};
use crate::special::{digamma, ln_beta, trigamma};
use crate::spread::SpreadContext;

/// First `⌊n/2⌋` source rows and first `⌊n_T/2⌋` target rows (in row order)
/// go to the first half, everything else to the second.
pub fn split_halves(sample: &Sample) -> (Sample, Sample) {
    let mut src_left = sample.n() / 2;
    let mut tgt_left = sample.n_target() / 2;
    let mut first = Vec::with_capacity(src_left + tgt_left);
    let mut second = Vec::with_capacity(sample.len() - src_left - tgt_left);
    for row in sample.rows() {
        let slot = match row.origin {
            Origin::Source => &mut src_left,
            Origin::Target => &mut tgt_left,
        };
        if *slot > 0 {
            *slot -= 1;
            first.push(*row);
        } else {
            second.push(*row);
        }
    }
    (Sample::new(first), Sample::new(second))
}

/// Box `[lo, hi]` applied to every Beta shape parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeBounds {
    pub lo: f64,
    pub hi: f64,
}

impl ShapeBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::invalid("bounds", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// Sufficient statistics of a Beta sample: means of `ln x` and `ln(1 − x)`.
#[derive(Debug, Clone, Copy)]
struct BetaStats {
    mean_ln_x: f64,
    mean_ln_1mx: f64,
    count: usize,
}

impl BetaStats {
    fn from_points(xs: &[f64]) -> Result<Self> {
        let inside: Vec<f64> = xs.iter().copied().filter(|&x| x > 0.0 && x < 1.0).collect();
        if inside.len() < 2 {
            return Err(Error::Precondition(format!(
                "Beta MLE needs at least 2 points in (0, 1), got {}",
                inside.len()
            )));
        }
        let m = inside.len() as f64;
        Ok(Self {
            mean_ln_x: inside.iter().map(|x| x.ln()).sum::<f64>() / m,
            mean_ln_1mx: inside.iter().map(|x| (1.0 - x).ln()).sum::<f64>() / m,
            count: inside.len(),
        })
    }

    /// Log-likelihood per observation.
    fn loglik(&self, a: f64, b: f64) -> f64 {
        (a - 1.0) * self.mean_ln_x + (b - 1.0) * self.mean_ln_1mx - ln_beta(a, b)
    }

    fn grad(&self, a: f64, b: f64) -> [f64; 2] {
        let psi_ab = digamma(a + b);
        [
            self.mean_ln_x - digamma(a) + psi_ab,
            self.mean_ln_1mx - digamma(b) + psi_ab,
        ]
    }
}

/// Average Beta log-likelihood of `xs` at `(a1, a2)`, counting only interior
/// points.
pub fn beta_log_likelihood(xs: &[f64], a1: f64, a2: f64) -> Result<f64> {
    Ok(BetaStats::from_points(xs)?.loglik(a1, a2))
}

const MLE_TOL: f64 = 1e-10;
const MLE_MAX_ITER: usize = 200;

/// Root in `[lo, hi]` of a decreasing function, clamped to the box when the
/// sign does not change. Newton steps with a bisection safeguard.
fn decreasing_root<F, D>(f: F, df: D, lo: f64, hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let f_lo = f(lo);
    if f_lo <= 0.0 {
        return lo;
    }
    let f_hi = f(hi);
    if f_hi >= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    let mut x = 0.5 * (a + b);
    for _ in 0..MLE_MAX_ITER {
        let v = f(x);
        if v.abs() < 1e-14 {
            return x;
        }
        if v > 0.0 {
            a = x;
        } else {
            b = x;
        }
        let d = df(x);
        let newton = x - v / d;
        x = if d < 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if b - a < 1e-15 * b {
            break;
        }
    }
    x
}

/// MLE of the first shape with the second held fixed.
pub fn beta_mle_fixed_second(xs: &[f64], bounds: ShapeBounds, a2: f64) -> Result<f64> {
    let stats = BetaStats::from_points(xs)?;
    Ok(profile_first(&stats, a2, bounds))
}

fn profile_first(stats: &BetaStats, b: f64, bounds: ShapeBounds) -> f64 {
    decreasing_root(
        |a| stats.mean_ln_x - digamma(a) + digamma(a + b),
        |a| -trigamma(a) + trigamma(a + b),
        bounds.lo,
        bounds.hi,
    )
}

fn profile_second(stats: &BetaStats, a: f64, bounds: ShapeBounds) -> f64 {
    decreasing_root(
        |b| stats.mean_ln_1mx - digamma(b) + digamma(a + b),
        |b| -trigamma(b) + trigamma(a + b),
        bounds.lo,
        bounds.hi,
    )
}

/// Maximum likelihood `(a1, a2)` of a Beta law over the box `bounds²`.
pub fn beta_mle(xs: &[f64], bounds: ShapeBounds) -> Result<(f64, f64)> {
    let stats = BetaStats::from_points(xs)?;
    let first = xs.iter().copied().find(|&x| x > 0.0 && x < 1.0).unwrap_or(0.5);
    if xs
        .iter()
        .filter(|&&x| x > 0.0 && x < 1.0)
        .all(|&x| x == first)
    {
        return Err(Error::FlatLikelihood(format!(
            "all {} points equal {first}",
            stats.count
        )));
    }

    let mut candidates = Vec::with_capacity(5);
    if let Some(p) = newton_interior(&stats, bounds) {
        candidates.push(p);
    } else {
        candidates.push(golden_profile(&stats, bounds));
    }
    for edge in [bounds.lo, bounds.hi] {
        candidates.push((edge, profile_second(&stats, edge, bounds)));
        candidates.push((profile_first(&stats, edge, bounds), edge));
    }
    let best = candidates
        .into_iter()
        .map(|(a, b)| (bounds.clamp(a), bounds.clamp(b)))
        .max_by(|p, q| stats.loglik(p.0, p.1).total_cmp(&stats.loglik(q.0, q.1)))
        .expect("candidate list is nonempty");
    Ok(best)
}

/// Damped Newton on the stationarity equations. Returns `None` if the
/// iterate leaves the box, the Hessian is not negative definite, or it does
/// not converge.
fn newton_interior(stats: &BetaStats, bounds: ShapeBounds) -> Option<(f64, f64)> {
    // method-of-moments start, pulled into the box
    let (a0, b0) = moment_start(stats);
    let (mut a, mut b) = (bounds.clamp(a0), bounds.clamp(b0));
    for _ in 0..MLE_MAX_ITER {
        let g = stats.grad(a, b);
        if g[0].abs().max(g[1].abs()) < MLE_TOL {
            return Some((a, b));
        }
        let t_ab = trigamma(a + b);
        let haa = -trigamma(a) + t_ab;
        let hbb = -trigamma(b) + t_ab;
        let hab = t_ab;
        let det = haa * hbb - hab * hab;
        if !(haa < 0.0 && det > 0.0) {
            return None;
        }
        // Newton direction −H⁻¹ g
        let da = -(hbb * g[0] - hab * g[1]) / det;
        let db = -(-hab * g[0] + haa * g[1]) / det;
        let base = stats.loglik(a, b);
        let mut step = 1.0;
        loop {
            let (na, nb) = (a + step * da, b + step * db);
            if na > 0.0 && nb > 0.0 && stats.loglik(na, nb) >= base - 1e-15 {
                a = na;
                b = nb;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                return None;
            }
        }
        if a < bounds.lo || a > bounds.hi || b < bounds.lo || b > bounds.hi {
            // the unconstrained optimum may still lie outside; let the faces decide
            if a > 10.0 * bounds.hi || b > 10.0 * bounds.hi || a < 0.1 * bounds.lo || b < 0.1 * bounds.lo {
                return None;
            }
        }
    }
    None
}

fn moment_start(stats: &BetaStats) -> (f64, f64) {
    // geometric-mean approximation: E ln X ≈ ln(a/(a+b)) gives a usable start
    let gx = stats.mean_ln_x.exp();
    let g1 = stats.mean_ln_1mx.exp();
    let denom = 2.0 * (1.0 - gx - g1);
    if denom > 1e-8 {
        (0.5 + gx / denom, 0.5 + g1 / denom)
    } else {
        (1.0, 1.0)
    }
}

/// Golden-section search on the profile likelihood `a ↦ max_b ℓ(a, b)`.
fn golden_profile(stats: &BetaStats, bounds: ShapeBounds) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let profile = |a: f64| stats.loglik(a, profile_second(stats, a, bounds));
    let (mut lo, mut hi) = (bounds.lo, bounds.hi);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut fc, mut fd) = (profile(c), profile(d));
    while hi - lo > 1e-10 * hi {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = profile(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = profile(d);
        }
    }
    let a = 0.5 * (lo + hi);
    (a, profile_second(stats, a, bounds))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LepskiConfig {
    pub beta_lo: f64,
    pub beta_hi: f64,
    /// Trimming constant: only `X ∈ [trim, 1 − trim]` is used.
    pub trim: f64,
    /// Threshold constant on the sup-norm comparisons (must exceed 4κ).
    pub c_sel: f64,
    /// Shrinkage constant on the selected level (must exceed (2β̄+1)²/(2β̲)).
    pub c_shrink: f64,
    pub eval_grid_size: usize,
}

pub const DEFAULT_TRIM: f64 = 0.05;
pub const DEFAULT_EVAL_GRID: usize = 4096;

impl LepskiConfig {
    /// Defaults: trim 0.05, `c_sel = 4κ + 0.1`,
    /// `c_shrink = (2β̄+1)²/(2β̲) + 0.1`, 4096 evaluation points.
    pub fn new(beta_lo: f64, beta_hi: f64, kappa: f64) -> Result<Self> {
        let cfg = Self {
            beta_lo,
            beta_hi,
            trim: DEFAULT_TRIM,
            c_sel: 4.0 * kappa + 0.1,
            c_shrink: (2.0 * beta_hi + 1.0).powi(2) / (2.0 * beta_lo) + 0.1,
            eval_grid_size: DEFAULT_EVAL_GRID,
        };
        cfg.validate(kappa)?;
        Ok(cfg)
    }

    pub fn validate(&self, kappa: f64) -> Result<()> {
        if !(self.beta_lo > 0.0 && self.beta_hi > self.beta_lo && self.beta_hi.is_finite()) {
            return Err(Error::invalid(
                "beta_lo",
                format!("need 0 < beta_lo < beta_hi, got {} and {}", self.beta_lo, self.beta_hi),
            ));
        }
        if !(self.trim > 0.0 && self.trim < 0.5) {
            return Err(Error::invalid("trim", format!("must lie in (0, 0.5), got {}", self.trim)));
        }
        if !(self.c_sel > 4.0 * kappa) {
            return Err(Error::invalid("c_sel", format!("must exceed 4 kappa = {}", 4.0 * kappa)));
        }
        let floor = (2.0 * self.beta_hi + 1.0).powi(2) / (2.0 * self.beta_lo);
        if !(self.c_shrink > floor) {
            return Err(Error::invalid("c_shrink", format!("must exceed {floor}")));
        }
        if self.eval_grid_size == 0 {
            return Err(Error::invalid("eval_grid_size", "must be positive"));
        }
        Ok(())
    }
}

/// Largest `τ` with `2^τ ≤ m^{1/(2β+1)}`.
fn dyadic_level(m: usize, beta: f64) -> u32 {
    let v = (m as f64).log2() / (2.0 * beta + 1.0);
    // guard exact powers of two against rounding
    (v + 1e-12).floor().max(0.0) as u32
}

/// `(τ*, τ_*)` for a sample of size `m`.
pub fn lepski_tau_range(m: usize, cfg: &LepskiConfig) -> Result<(u32, u32)> {
    if m < 2 {
        return Err(Error::Precondition(format!("need m >= 2, got {m}")));
    }
    Ok((dyadic_level(m, cfg.beta_lo) + 1, dyadic_level(m, cfg.beta_hi)))
}

/// `β_τ` solving `2^{−τ} = m^{−1/(2β_τ+1)}`.
pub fn beta_at_level(tau: u32, m: usize) -> f64 {
    0.5 * ((m as f64).ln() / (tau as f64 * std::f64::consts::LN_2) - 1.0)
}

/// Piecewise-constant bin means on `2^τ` equal bins of `[trim, 1 − trim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressogram {
    pub tau: u32,
    pub means: Vec<f64>,
    lo: f64,
    width: f64,
}

impl Regressogram {
    pub fn fit(xs: &[f64], ys: &[f64], tau: u32, trim: f64) -> Result<Self> {
        let bins = 1usize << tau;
        let width = (1.0 - 2.0 * trim) / bins as f64;
        let mut sums = vec![0.0; bins];
        let mut counts = vec![0usize; bins];
        for (&x, &y) in xs.iter().zip(ys) {
            if x < trim || x > 1.0 - trim {
                continue;
            }
            let k = bin_index(x, trim, width, bins);
            sums[k] += y;
            counts[k] += 1;
        }
        if let Some(bin) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyBin { tau, bin });
        }
        let means = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
        Ok(Self {
            tau,
            means,
            lo: trim,
            width,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.means[bin_index(x, self.lo, self.width, self.means.len())]
    }
}

fn bin_index(x: f64, lo: f64, width: f64, bins: usize) -> usize {
    (((x - lo) / width).floor().max(0.0) as usize).min(bins - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LepskiOutcome {
    pub beta_hat: f64,
    pub tau_hat: u32,
    pub tau_star: u32,
    pub tau_low: u32,
}

/// Lepski-type smoothness estimate from one data half.
pub fn lepski_beta(xs: &[f64], ys: &[f64], cfg: &LepskiConfig) -> Result<LepskiOutcome> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    let m = xs.len();
    let (tau_star, tau_low) = lepski_tau_range(m, cfg)?;
    if tau_low == 0 {
        return Err(Error::Precondition(format!(
            "m = {m} is too small: the coarsest level has a single bin"
        )));
    }
    let fits: Vec<Regressogram> = (tau_low..=tau_star)
        .map(|tau| Regressogram::fit(xs, ys, tau, cfg.trim))
        .collect::<Result<_>>()?;

    let grid_size = cfg.eval_grid_size.max(1usize << tau_star);
    let span = 1.0 - 2.0 * cfg.trim;
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| cfg.trim + span * (i as f64 + 0.5) / grid_size as f64)
        .collect();
    let values: Vec<Vec<f64>> = fits
        .iter()
        .map(|f| grid.iter().map(|&x| f.eval(x)).collect())
        .collect();
    let sup_diff = |i: usize, j: usize| {
        values[i]
            .iter()
            .zip(&values[j])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
    };

    let log_m = (m as f64).ln();
    let threshold = |tau2: u32| {
        let mu = 2f64.powi(-(tau2 as i32));
        cfg.c_sel * mu.powf(beta_at_level(tau2, m)) * log_m
    };
    let levels = (tau_star - tau_low + 1) as usize;
    let tau_hat = (0..levels)
        .find(|&i| ((i + 1)..levels).all(|j| sup_diff(i, j) <= threshold(tau_low + j as u32)))
        .map(|i| tau_low + i as u32)
        .unwrap_or(tau_star);

    let raw = beta_at_level(tau_hat, m) - cfg.c_shrink * log_m.ln() / log_m;
    let beta_hat = raw.min(cfg.beta_hi).clamp(cfg.beta_lo, cfg.beta_hi);
    Ok(LepskiOutcome {
        beta_hat,
        tau_hat,
        tau_star,
        tau_low,
    })
}

/// Lepski estimate from the first half of the larger population.
pub fn lepski_from_sample(sample: &Sample, cfg: &LepskiConfig) -> Result<LepskiOutcome> {
    let (first, _) = split_halves(sample);
    let origin = if sample.n() > sample.n_target() {
        Origin::Source
    } else {
        Origin::Target
    };
    let half = first.restricted_to(origin);
    let xs: Vec<f64> = half.rows().iter().map(|r| r.x).collect();
    let ys: Vec<f64> = half.rows().iter().map(|r| r.y).collect();
    lepski_beta(&xs, &ys, cfg)
}

/// How the smoothness used by the plug-in estimator is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothness {
    Known(f64),
    Lepski(LepskiConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlugInFit {
    pub source_shape: (f64, f64),
    pub target_shape: (f64, f64),
    pub beta: f64,
    pub fitted: Vec<f64>,
}

/// Split-half plug-in estimator: Beta shapes (and optionally `β`) from the
/// first halves, the regression fit from the second halves with the spread
/// function computed under the estimated densities.
pub fn plug_in_fit(
    grid: &[f64],
    sample: &Sample,
    smoothness: Smoothness,
    base: &EstimatorConfig,
    bounds: ShapeBounds,
) -> Result<PlugInFit> {
    let (first, second) = split_halves(sample);
    let source_shape = beta_mle(&first.xs(Origin::Source), bounds)?;
    let target_shape = beta_mle(&first.xs(Origin::Target), bounds)?;
    let beta = match smoothness {
        Smoothness::Known(b) => b,
        Smoothness::Lepski(cfg) => lepski_from_sample(sample, &cfg)?.beta_hat,
    };
    let mut cfg = *base;
    cfg.beta = beta;
    cfg.order_l = default_order(beta);
    let ctx = SpreadContext::new(
        second.n() as u64,
        second.n_target() as u64,
        beta,
        DensityModel::beta(source_shape.0, source_shape.1)?,
        DensityModel::beta(target_shape.0, target_shape.1)?,
    )?;
    let fitted = fit_curve(grid, &second, &ctx, &cfg, FitMode::Pooled)?;
    Ok(PlugInFit {
        source_shape,
        target_shape,
        beta,
        fitted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Observation;

    fn tagged(n: usize, nt: usize) -> Sample {
        let mut rows = Vec::new();
        for i in 0..n {
            rows.push(Observation {
                x: i as f64 / 100.0,
                y: i as f64,
                origin: Origin::Source,
            });
        }
        for i in 0..nt {
            rows.push(Observation {
                x: 0.5 + i as f64 / 100.0,
                y: -(i as f64),
                origin: Origin::Target,
            });
        }
        Sample::new(rows)
    }

    #[test]
    fn split_examples() {
        let (a, b) = split_halves(&tagged(5, 3));
        assert_eq!((a.n(), a.n_target()), (2, 1));
        assert_eq!((b.n(), b.n_target()), (3, 2));
        let (a, b) = split_halves(&tagged(0, 4));
        assert_eq!((a.n(), a.n_target()), (0, 2));
        assert_eq!((b.n(), b.n_target()), (0, 2));
    }

    #[test]
    fn split_is_deterministic_and_order_preserving() {
        let s = tagged(7, 4);
        let (a1, b1) = split_halves(&s);
        let (a2, b2) = split_halves(&s);
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert!(a1.rows().windows(2).filter(|w| w[0].origin == w[1].origin).all(|w| w[0].x <= w[1].x));
    }

    #[test]
    fn closed_form_beta_a_one() {
        let e = (-1f64).exp();
        let bounds = ShapeBounds::new(0.1, 10.0).unwrap();
        let a = beta_mle_fixed_second(&[e, e], bounds, 1.0).unwrap();
        assert!((a - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flat_likelihood_is_an_error() {
        let bounds = ShapeBounds::new(0.5, 10.0).unwrap();
        assert!(matches!(beta_mle(&[0.3, 0.3, 0.3], bounds), Err(Error::FlatLikelihood(_))));
        assert!(beta_mle(&[0.3], bounds).is_err());
    }

    #[test]
    fn tau_range_examples() {
        let cfg = LepskiConfig::new(0.5, 2.0, 1.0).unwrap();
        assert_eq!(lepski_tau_range(1024, &cfg).unwrap(), (6, 2));
        assert_eq!(lepski_tau_range(4096, &cfg).unwrap(), (7, 2));
        assert!(lepski_tau_range(1, &cfg).is_err());
    }

    #[test]
    fn regressogram_single_point_bin() {
        let g = Regressogram::fit(&[0.3, 0.7], &[1.5, -4.0], 1, 0.05).unwrap();
        assert_eq!(g.eval(0.2), 1.5);
        assert_eq!(g.eval(0.9), -4.0);
    }

    #[test]
    fn empty_bin_names_level_and_index() {
        let cfg = LepskiConfig::new(0.5, 2.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..1024).map(|i| 0.1 + 0.3 * i as f64 / 1024.0).collect();
        let ys = vec![0.0; xs.len()];
        match lepski_beta(&xs, &ys, &cfg) {
            Err(Error::EmptyBin { tau, bin }) => {
                assert_eq!(tau, 2);
                assert_eq!(bin, 2);
            }
            other => panic!("expected empty bin, got {other:?}"),
        }
    }

    #[test]
    fn lepski_config_constraints() {
        assert!(LepskiConfig::new(1.0, 0.5, 1.0).is_err());
        let mut cfg = LepskiConfig::new(0.5, 2.0, 1.0).unwrap();
        cfg.c_sel = 3.9;
        assert!(cfg.validate(1.0).is_err());
    }
}
