//! Closed-form minimax transfer learning rates.
//!
//! For a `Beta(a, 1)` source and a uniform target the rate depends on where
//! `n_T` sits relative to three critical target sizes:
//!
//! - lower critical `n^{(2β+1)/(2β+a)}`,
//! - equalizing `n^{(2β+1)²/(2β(2β+a))}`,
//! - upper critical `n`.
//!
//! Synergy (SAR → ∞) needs `a > 2 + 1/(2β)` and `n_T` strictly between the
//! lower and upper critical sizes. The general multi-singularity case reduces
//! to the same shape with `(a, 1)` replaced by the worst transfer singularity
//! pair `(a^A_(1), a^T_(1))`.

use std::fmt;

use crate::densities::SingularityDensitySpec;
use crate::error::{Error, Result};

/// Sample-size relationship region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    SD,
    SL,
    TL,
    TD,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Region::SD => "SD",
            Region::SL => "SL",
            Region::TL => "TL",
            Region::TD => "TD",
        };
        f.write_str(s)
    }
}

/// Exponents of `rate = n^{−p} · n_T^{−q} · (n_T/n)^{r} · (n + n_T)^{−s}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateExponents {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl RateExponents {
    pub fn evaluate(&self, n: f64, n_target: f64) -> f64 {
        let mut v = 1.0;
        if self.p != 0.0 {
            v *= n.powf(-self.p);
        }
        if self.q != 0.0 {
            v *= n_target.powf(-self.q);
        }
        if self.r != 0.0 {
            v *= (n_target / n).powf(self.r);
        }
        if self.s != 0.0 {
            v *= (n + n_target).powf(-self.s);
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateResult {
    pub region: Region,
    pub rate_value: f64,
    pub symbolic: RateExponents,
    /// Synergy occurs: middle region and the singularity condition holds.
    pub slp: bool,
    /// At `a = 2 + 1/(2β)` the upper bound carries an extra `log n` factor,
    /// which is not folded into `rate_value`.
    pub log_factor: bool,
}

/// Multipliers on the three critical sizes (all 1 by default).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionConstants {
    pub lower: f64,
    pub equalizing: f64,
    pub upper: f64,
    pub classical: f64,
}

impl Default for RegionConstants {
    fn default() -> Self {
        Self {
            lower: 1.0,
            equalizing: 1.0,
            upper: 1.0,
            classical: 1.0,
        }
    }
}

fn knife_edge(beta: f64) -> f64 {
    2.0 + 1.0 / (2.0 * beta)
}

fn is_knife_edge(a: f64, beta: f64) -> bool {
    (a - knife_edge(beta)).abs() <= 1e-12 * knife_edge(beta)
}

/// `a > 1 + a_T(1 + 1/(2β))`.
pub fn is_transfer_singular(a_source: f64, a_target: f64, beta: f64) -> bool {
    a_source > 1.0 + a_target * (1.0 + 1.0 / (2.0 * beta))
}

/// `(lower, equalizing, upper)` critical target sizes for a singular pair.
pub fn critical_sizes(n: f64, a_source: f64, a_target: f64, beta: f64) -> (f64, f64, f64) {
    let lower_exp = (2.0 * beta + a_target) / (2.0 * beta + a_source);
    let eq_exp = lower_exp * (2.0 * beta + 1.0) / (2.0 * beta);
    (n.powf(lower_exp), n.powf(eq_exp), n)
}

fn region_for(
    n: f64,
    n_target: f64,
    a_source: f64,
    a_target: f64,
    beta: f64,
    consts: &RegionConstants,
) -> Region {
    if !is_transfer_singular(a_source, a_target, beta) {
        return if n_target <= consts.classical * n {
            Region::SD
        } else {
            Region::TD
        };
    }
    let (lower, equal, upper) = critical_sizes(n, a_source, a_target, beta);
    if n_target <= consts.lower * lower {
        Region::SD
    } else if n_target <= consts.equalizing * equal {
        Region::SL
    } else if n_target <= consts.upper * upper {
        Region::TL
    } else {
        Region::TD
    }
}

/// SSR region for a `Beta(a, 1)` source and uniform target. Ties go to the
/// earlier region in the order SD, SL, TL, TD.
pub fn classify_region(n: f64, n_target: f64, a: f64, beta: f64, consts: &RegionConstants) -> Region {
    region_for(n, n_target, a, 1.0, beta, consts)
}

fn pair_rate(
    n: f64,
    n_target: f64,
    a_source: f64,
    a_target: f64,
    beta: f64,
    consts: &RegionConstants,
) -> RateResult {
    let classical = 2.0 * beta / (2.0 * beta + 1.0);
    let region = region_for(n, n_target, a_source, a_target, beta, consts);
    let singular = is_transfer_singular(a_source, a_target, beta);
    let symbolic = if !singular {
        RateExponents {
            s: classical,
            ..Default::default()
        }
    } else {
        match region {
            Region::SD => RateExponents {
                p: (2.0 * beta + a_target) / (2.0 * beta + a_source),
                ..Default::default()
            },
            Region::SL | Region::TL => RateExponents {
                q: classical,
                r: (1.0 + (a_target - 1.0) / (2.0 * beta + 1.0)) / (a_source - a_target),
                ..Default::default()
            },
            Region::TD => RateExponents {
                q: classical,
                ..Default::default()
            },
        }
    };
    RateResult {
        region,
        rate_value: symbolic.evaluate(n, n_target),
        symbolic,
        slp: singular && matches!(region, Region::SL | Region::TL),
        log_factor: a_target == 1.0 && is_knife_edge(a_source, beta),
    }
}

/// Optimal transfer learning rate for a `Beta(a, 1)` source and uniform
/// target, with unit region constants.
pub fn tlr(n: f64, n_target: f64, a: f64, beta: f64) -> RateResult {
    tlr_with(n, n_target, a, beta, &RegionConstants::default())
}

pub fn tlr_with(n: f64, n_target: f64, a: f64, beta: f64, consts: &RegionConstants) -> RateResult {
    pair_rate(n, n_target, a, 1.0, beta, consts)
}

/// Synergistic acceleration rate (order level).
pub fn sar(n: f64, n_target: f64, a: f64, beta: f64) -> f64 {
    sar_with(n, n_target, a, beta, &RegionConstants::default())
}

pub fn sar_with(n: f64, n_target: f64, a: f64, beta: f64, consts: &RegionConstants) -> f64 {
    if a <= knife_edge(beta) {
        return 1.0;
    }
    let lower_exp = (2.0 * beta + 1.0) / (2.0 * beta + a);
    match classify_region(n, n_target, a, beta, consts) {
        Region::SL => {
            (n_target * n.powf(-lower_exp)).powf(2.0 * beta / (2.0 * beta + 1.0) - 1.0 / (a - 1.0))
        }
        Region::TL => (n / n_target).powf(1.0 / (a - 1.0)),
        Region::SD | Region::TD => 1.0,
    }
}

/// Slope of log SAR against log n when `n_T ∝ n^{(2β+1)/(2β+4)·(1+c)}`,
/// in the SL region.
pub fn sl_slope(a: f64, beta: f64, c_sl: f64) -> f64 {
    c_sl * (2.0 * beta + 1.0) / (2.0 * beta + a) * (2.0 * beta / (2.0 * beta + 1.0) - 1.0 / (a - 1.0))
}

/// Slope of log SAR against log n in the TL region.
pub fn tl_slope(a: f64, beta: f64, c_tl: f64) -> f64 {
    (1.0 - (2.0 * beta + 1.0) / (2.0 * beta + a) * (1.0 + c_tl)) / (a - 1.0)
}

/// Transfer singularity points, their qualifying side pairs and the pair
/// that determines the rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TspSet {
    pub points: Vec<f64>,
    /// Qualifying `(a^A, a^T)` side pairs.
    pub pairs: Vec<(f64, f64)>,
    pub worst: Option<(f64, f64)>,
}

pub fn tsp_set(source: &SingularityDensitySpec, target: &SingularityDensitySpec, beta: f64) -> Result<TspSet> {
    let sp = source.singular_points();
    let tp = target.singular_points();
    if sp.len() != tp.len() {
        return Err(Error::SpecMismatch(format!(
            "{} source points vs {} target points",
            sp.len(),
            tp.len()
        )));
    }
    let mut points = Vec::new();
    let mut pairs = Vec::new();
    for (s, t) in sp.iter().zip(tp) {
        if (s.location - t.location).abs() > 1e-12 {
            return Err(Error::SpecMismatch(format!(
                "source point {} vs target point {}",
                s.location, t.location
            )));
        }
        let mut hit = false;
        let sides = [(s.left_order, t.left_order), (s.right_order, t.right_order)];
        for (a_src, a_tgt) in sides {
            if let (Some(a_src), Some(a_tgt)) = (a_src, a_tgt) {
                if is_transfer_singular(a_src, a_tgt, beta) {
                    pairs.push((a_src, a_tgt));
                    hit = true;
                }
            }
        }
        if hit {
            points.push(s.location);
        }
    }
    let worst = pairs.iter().copied().reduce(|best, cand| {
        let rb = (2.0 * beta + best.1) / (2.0 * beta + best.0);
        let rc = (2.0 * beta + cand.1) / (2.0 * beta + cand.0);
        let tied = (rc - rb).abs() <= RATIO_TIE_TOL * rb;
        if rc < rb && !tied {
            cand
        } else if tied && middle_exponent(cand, beta) < middle_exponent(best, beta) {
            cand
        } else {
            best
        }
    });
    Ok(TspSet {
        points,
        pairs,
        worst,
    })
}

/// Relative tolerance under which two ratios count as tied.
const RATIO_TIE_TOL: f64 = 1e-12;

/// Exponent on `n_T/n` in the middle branch for a singular pair.
pub fn middle_exponent(pair: (f64, f64), beta: f64) -> f64 {
    let (a_src, a_tgt) = pair;
    (1.0 + (a_tgt - 1.0) / (2.0 * beta + 1.0)) / (a_src - a_tgt)
}

/// Minimax rate for general singularity densities.
pub fn general_tlr(
    n: f64,
    n_target: f64,
    source: &SingularityDensitySpec,
    target: &SingularityDensitySpec,
    beta: f64,
) -> Result<RateResult> {
    general_tlr_with(n, n_target, source, target, beta, &RegionConstants::default())
}

pub fn general_tlr_with(
    n: f64,
    n_target: f64,
    source: &SingularityDensitySpec,
    target: &SingularityDensitySpec,
    beta: f64,
    consts: &RegionConstants,
) -> Result<RateResult> {
    let tsp = tsp_set(source, target, beta)?;
    Ok(match tsp.worst {
        None => {
            let classical = 2.0 * beta / (2.0 * beta + 1.0);
            let symbolic = RateExponents {
                s: classical,
                ..Default::default()
            };
            RateResult {
                region: if n_target <= consts.classical * n {
                    Region::SD
                } else {
                    Region::TD
                },
                rate_value: symbolic.evaluate(n, n_target),
                symbolic,
                slp: false,
                log_factor: false,
            }
        }
        Some((a_src, a_tgt)) => pair_rate(n, n_target, a_src, a_tgt, beta, consts),
    })
}
