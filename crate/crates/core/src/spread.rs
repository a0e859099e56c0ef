//! The pooled spread function `t_n(x)`.
//!
//! `t_n(x)` is the unique root in `t` of
//!
//! ```text
//! g(t) = t^{2β} · (n·H(x ± t) + n_T·H_T(x ± t)) = 1
//! ```
//!
//! where `H(x ± t)` is the source mass of `[x − t, x + t] ∩ [0, 1]` and `H_T`
//! the target mass. `g` is continuous, strictly increasing on `(0, 1]` and
//! `g(0) = 0`, so bracketed bisection always converges.
//!
//! Two bandwidth providers implement [`SpreadFunction`]:
//! [`SpreadContext`] (exact root for arbitrary densities) and [`OrderSpread`]
//! (the closed-form piecewise order for a `Beta(a, 1)` source and a uniform
//! target, which is the bandwidth rule of the simulation experiments).

use crate::densities::DensityModel;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;
/// `|t(x) − x|` or `|t(x) − (1 − x)|` below this counts as a crossing point.
const CROSSING_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadContext {
    n: u64,
    n_target: u64,
    beta: f64,
    source: DensityModel,
    target: DensityModel,
}

impl SpreadContext {
    pub fn new(n: u64, n_target: u64, beta: f64, source: DensityModel, target: DensityModel) -> Result<Self> {
        if n + n_target == 0 {
            return Err(Error::invalid("n", "n + n_T must be at least 1"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
        }
        Ok(Self {
            n,
            n_target,
            beta,
            source,
            target,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn n_target(&self) -> u64 {
        self.n_target
    }

    pub fn total(&self) -> f64 {
        (self.n + self.n_target) as f64
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn source(&self) -> &DensityModel {
        &self.source
    }

    pub fn target(&self) -> &DensityModel {
        &self.target
    }

    /// Same densities and smoothness, different sample sizes.
    pub fn with_counts(&self, n: u64, n_target: u64) -> Result<Self> {
        Self::new(n, n_target, self.beta, self.source.clone(), self.target.clone())
    }

    /// `n·H(x ± t) + n_T·H_T(x ± t)`, the expected pooled window count.
    pub fn pooled_count(&self, x: f64, t: f64) -> f64 {
        let mut acc = 0.0;
        if self.n > 0 {
            acc += self.n as f64 * self.source.interval_mass(x - t, x + t);
        }
        if self.n_target > 0 {
            acc += self.n_target as f64 * self.target.interval_mass(x - t, x + t);
        }
        acc
    }

    /// `g(t) = t^{2β}·(nH + n_T H_T)`.
    pub fn balance(&self, x: f64, t: f64) -> f64 {
        t.powf(2.0 * self.beta) * self.pooled_count(x, t)
    }

    /// Pooled density `h̃ = (n·h + n_T·h_T)/(n + n_T)`.
    pub fn pooled_density(&self, x: f64) -> f64 {
        let total = self.total();
        let mut acc = 0.0;
        if self.n > 0 {
            acc += self.n as f64 * self.source.pdf(x).unwrap_or(0.0);
        }
        if self.n_target > 0 {
            acc += self.n_target as f64 * self.target.pdf(x).unwrap_or(0.0);
        }
        acc / total
    }

    /// Lower end of the default bracket: `g` is at most 1/2 there.
    pub fn default_lower_bracket(&self) -> f64 {
        let e = 1.0 / (2.0 * self.beta);
        self.total().powf(-e) * 2f64.powf(-e)
    }
}

fn check_x(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "x",
            value: x,
            domain: "[0, 1]",
        })
    }
}

/// Solve for `t_n(x)`; the returned root satisfies
/// `|g(t) − 1| ≤ tol·(n + n_T)`.
pub fn solve_spread(ctx: &SpreadContext, x: f64, tol: f64) -> Result<f64> {
    solve_spread_in(ctx, x, tol, ctx.default_lower_bracket(), 1.0)
}

/// [`solve_spread`] with an explicit initial bracket `[lo, hi]`.
pub fn solve_spread_in(ctx: &SpreadContext, x: f64, tol: f64, lo: f64, hi: f64) -> Result<f64> {
    check_x(x)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", format!("must be positive, got {tol}")));
    }
    let target_residual = tol * ctx.total();
    // bisect to the unscaled tolerance; the scaled one is only the failure bound
    let stop = tol.min(target_residual);
    let (mut lo, mut hi) = (lo, hi);
    let g_lo = ctx.balance(x, lo) - 1.0;
    let g_hi = ctx.balance(x, hi) - 1.0;
    if g_lo.abs() <= stop {
        return Ok(lo);
    }
    if g_hi.abs() <= stop {
        return Ok(hi);
    }
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(Error::NoBracket(format!(
            "g({lo}) - 1 = {g_lo}, g({hi}) - 1 = {g_hi} at x = {x}"
        )));
    }
    let mut best = (f64::INFINITY, 0.5 * (lo + hi));
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let r = ctx.balance(x, mid) - 1.0;
        if r.abs() < best.0 {
            best = (r.abs(), mid);
        }
        if r.abs() <= stop {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    if best.0 <= target_residual {
        Ok(best.1)
    } else {
        Err(Error::NoConvergence(format!(
            "spread residual {:e} exceeds {:e} at x = {x}",
            best.0, target_residual
        )))
    }
}

/// Unique solutions of `t_n(x) = x` and `t_n(x) = 1 − x`.
pub fn crossing_points(ctx: &SpreadContext) -> Result<(f64, f64)> {
    let floor = 2f64.powf(2.0 * ctx.beta);
    if ctx.total() < floor {
        return Err(Error::Precondition(format!(
            "n + n_T = {} is below 2^(2 beta) = {floor}",
            ctx.total()
        )));
    }
    let t = |x: f64| solve_spread(ctx, x, DEFAULT_TOL);
    let x1 = bisect_sign_change(|x| Ok(t(x)? - x), 0.0, 0.5)?;
    let x2 = bisect_sign_change(|x| Ok(t(x)? - (1.0 - x)), 0.5, 1.0)?;
    Ok((x1, x2))
}

/// Root of a function that is positive at one end and non-positive at the
/// other.
fn bisect_sign_change<F: Fn(f64) -> Result<f64>>(f: F, lo: f64, hi: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoBracket(format!(
            "no sign change on [{lo}, {hi}] ({f_lo}, {f_hi})"
        )));
    }
    let lo_sign = f_lo.signum();
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if v.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Closed-form `dt_n/dx` from implicit differentiation of `g(t, x) = 1`.
pub fn spread_derivative(ctx: &SpreadContext, x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain {
            what: "x",
            value: x,
            domain: "(0, 1)",
        });
    }
    let t = solve_spread(ctx, x, DEFAULT_TOL)?;
    if (t - x).abs() <= CROSSING_GUARD || (t - (1.0 - x)).abs() <= CROSSING_GUARD {
        return Err(Error::Precondition(format!(
            "x = {x} is within {CROSSING_GUARD:e} of a crossing point"
        )));
    }
    let left = if t < x { ctx.pooled_density(x - t) } else { 0.0 };
    let right = if t < 1.0 - x {
        ctx.pooled_density(x + t)
    } else {
        0.0
    };
    let damping = 2.0 * ctx.beta / (ctx.total() * t.powf(2.0 * ctx.beta + 1.0));
    Ok((left - right) / (damping + left + right))
}

/// Piecewise asymptotic order of `t_n(x)` for a `Beta(a, 1)` source and a
/// uniform target:
///
/// ```text
/// α_n                                  on [0, α_n]
/// (n·x^{a−1} + n_T)^{−1/(2β+1)}        on (α_n, b_n)
/// 1 − b_n                              on [b_n, 1]
/// ```
///
/// with `α_n = (n^{(2β+1)/(2β+a)} + n_T)^{−1/(2β+1)}` and
/// `1 − b_n = (n + n_T)^{−1/(2β+1)}`.
pub fn spread_order(x: f64, n: u64, n_target: u64, a: f64, beta: f64) -> f64 {
    let p = 1.0 / (2.0 * beta + 1.0);
    let n = n as f64;
    let nt = n_target as f64;
    let alpha = (n.powf((2.0 * beta + 1.0) / (2.0 * beta + a)) + nt).powf(-p);
    let tail = (n + nt).powf(-p);
    let b = 1.0 - tail;
    if x <= alpha {
        alpha
    } else if x < b {
        (n * x.powf(a - 1.0) + nt).powf(-p)
    } else {
        tail
    }
}

/// A bandwidth provider for the estimators.
pub trait SpreadFunction: Sync {
    fn counts(&self) -> (u64, u64);

    /// Same provider with different effective sample sizes.
    fn with_counts(&self, n: u64, n_target: u64) -> Result<Self>
    where
        Self: Sized;

    fn spread_at(&self, x: f64) -> Result<f64>;

    /// `(n·H(x ± t) + n_T·H_T(x ± t)) / (n + n_T)`.
    fn pooled_mass(&self, x: f64, t: f64) -> f64;
}

impl SpreadFunction for SpreadContext {
    fn counts(&self) -> (u64, u64) {
        (self.n, self.n_target)
    }

    fn with_counts(&self, n: u64, n_target: u64) -> Result<Self> {
        SpreadContext::with_counts(self, n, n_target)
    }

    fn spread_at(&self, x: f64) -> Result<f64> {
        solve_spread(self, x, DEFAULT_TOL)
    }

    fn pooled_mass(&self, x: f64, t: f64) -> f64 {
        self.pooled_count(x, t) / self.total()
    }
}

/// The closed-form piecewise bandwidth of [`spread_order`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderSpread {
    pub n: u64,
    pub n_target: u64,
    pub a: f64,
    pub beta: f64,
}

impl OrderSpread {
    pub fn new(n: u64, n_target: u64, a: f64, beta: f64) -> Result<Self> {
        if n + n_target == 0 {
            return Err(Error::invalid("n", "n + n_T must be at least 1"));
        }
        if !(a > 0.0) {
            return Err(Error::invalid("a", format!("must be positive, got {a}")));
        }
        if !(beta > 0.0) {
            return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
        }
        Ok(Self {
            n,
            n_target,
            a,
            beta,
        })
    }
}

impl SpreadFunction for OrderSpread {
    fn counts(&self) -> (u64, u64) {
        (self.n, self.n_target)
    }

    fn with_counts(&self, n: u64, n_target: u64) -> Result<Self> {
        OrderSpread::new(n, n_target, self.a, self.beta)
    }

    fn spread_at(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(spread_order(x, self.n, self.n_target, self.a, self.beta))
    }

    fn pooled_mass(&self, x: f64, t: f64) -> f64 {
        let lo = (x - t).clamp(0.0, 1.0);
        let hi = (x + t).clamp(0.0, 1.0);
        if lo >= hi {
            return 0.0;
        }
        let source = hi.powf(self.a) - lo.powf(self.a);
        let target = hi - lo;
        (self.n as f64 * source + self.n_target as f64 * target) / (self.n + self.n_target) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_ctx(n: u64, nt: u64, beta: f64) -> SpreadContext {
        SpreadContext::new(n, nt, beta, DensityModel::uniform(), DensityModel::uniform()).unwrap()
    }

    #[test]
    fn uniform_interior_closed_form() {
        let ctx = uniform_ctx(600, 400, 0.5);
        let t = solve_spread(&ctx, 0.5, DEFAULT_TOL).unwrap();
        assert!((t - 2000f64.powf(-0.5)).abs() < 1e-12);
        assert!((t - 0.022_360_679_774_997_9).abs() < 1e-12);
    }

    #[test]
    fn beta_source_at_zero_closed_form() {
        let ctx = SpreadContext::new(
            10_000,
            0,
            0.5,
            DensityModel::beta(4.0, 1.0).unwrap(),
            DensityModel::uniform(),
        )
        .unwrap();
        let t = solve_spread(&ctx, 0.0, DEFAULT_TOL).unwrap();
        assert!((t - 1e4f64.powf(-0.2)).abs() < 1e-10);
    }

    #[test]
    fn residual_contract() {
        let ctx = SpreadContext::new(
            3000,
            70,
            0.9,
            DensityModel::beta(2.5, 1.7).unwrap(),
            DensityModel::uniform(),
        )
        .unwrap();
        for &x in &[0.0, 0.1, 0.5, 0.93, 1.0] {
            let t = solve_spread(&ctx, x, 1e-12).unwrap();
            assert!((ctx.balance(x, t) - 1.0).abs() <= 1e-12 * ctx.total());
        }
    }

    #[test]
    fn rejects_degenerate_context() {
        assert!(SpreadContext::new(0, 0, 0.5, DensityModel::uniform(), DensityModel::uniform()).is_err());
        assert!(SpreadContext::new(1, 0, 0.0, DensityModel::uniform(), DensityModel::uniform()).is_err());
        let ctx = uniform_ctx(10, 0, 0.5);
        assert!(solve_spread(&ctx, 1.5, 1e-12).is_err());
    }

    #[test]
    fn single_observation_root_is_one() {
        let ctx = uniform_ctx(1, 0, 0.5);
        assert_eq!(solve_spread(&ctx, 0.3, 1e-12).unwrap(), 1.0);
    }

    #[test]
    fn uniform_crossing_points() {
        let ctx = uniform_ctx(5000, 5000, 0.5);
        let (x1, x2) = crossing_points(&ctx).unwrap();
        let expected = 20_000f64.powf(-0.5);
        assert!((x1 - expected).abs() < 1e-10, "{x1}");
        assert!((x2 - (1.0 - x1)).abs() < 1e-10);
    }

    #[test]
    fn crossing_points_precondition() {
        let ctx = uniform_ctx(1, 1, 1.0);
        assert!(matches!(crossing_points(&ctx), Err(Error::Precondition(_))));
    }

    #[test]
    fn derivative_is_zero_for_flat_pooled_density() {
        let ctx = uniform_ctx(1000, 1000, 0.5);
        assert!(spread_derivative(&ctx, 0.4).unwrap().abs() < 1e-14);
    }

    #[test]
    fn derivative_rejects_crossing_point() {
        let ctx = uniform_ctx(5000, 5000, 0.5);
        let (x1, _) = crossing_points(&ctx).unwrap();
        assert!(spread_derivative(&ctx, x1).is_err());
    }

    #[test]
    fn order_examples() {
        assert!((spread_order(0.0, 10_000, 0, 4.0, 0.5) - 0.158_489_319_246_111_35).abs() < 1e-12);
        let v = spread_order(1.0, 3000, 250, 4.0, 0.9);
        assert!((v - 3250f64.powf(-1.0 / 2.8)).abs() < 1e-15);
    }

    #[test]
    fn order_spread_mass_matches_densities() {
        let o = OrderSpread::new(300, 50, 3.0, 0.5).unwrap();
        let ctx = SpreadContext::new(
            300,
            50,
            0.5,
            DensityModel::beta(3.0, 1.0).unwrap(),
            DensityModel::uniform(),
        )
        .unwrap();
        for &(x, t) in &[(0.0, 0.1), (0.5, 0.2), (0.95, 0.1)] {
            assert!((o.pooled_mass(x, t) - SpreadFunction::pooled_mass(&ctx, x, t)).abs() < 1e-14);
        }
    }
}
