//! Covariate densities on [0, 1].
//!
//! Two families are supported:
//!
//! - [`BetaDensity`], the two-parameter Beta law. `Beta(a, 1)` is the source
//!   design of the simulation experiments and `Beta(1, 1)` the uniform target.
//! - [`SingularityDensitySpec`], a piecewise product of power factors
//!   `c·(x − lo)^{p_L − 1}(hi − x)^{p_R − 1}` on consecutive pieces `[lo, hi]`.
//!   Each piece is a scaled Beta on its interval, so masses are exact via the
//!   incomplete beta and no quadrature is needed on the evaluation path.
//!
//! Singular points carry per-side order parameters. The orders are read off
//! the adjacent pieces: the left order at `s` is the right exponent of the
//! piece ending at `s`, the right order is the left exponent of the piece
//! starting at `s`, and a point inside a piece has order 1 on both sides.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, DEFAULT_ABS_TOL};
use crate::special::{beta_inc, ln_beta};

/// Number of knots in the tabulated inverse CDF of a singularity density.
pub const INVERSE_TABLE_KNOTS: usize = 1 << 14;

/// Grid size of the envelope spot-check in [`SingularityDensitySpec::validate`].
const ENVELOPE_GRID: usize = 1000;

fn check_unit(x: f64) -> Result<()> {
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

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaDensity {
    a1: f64,
    a2: f64,
    ln_norm: f64,
}

impl BetaDensity {
    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0 && a1.is_finite()) {
            return Err(Error::invalid("a1", format!("must be positive, got {a1}")));
        }
        if !(a2 > 0.0 && a2.is_finite()) {
            return Err(Error::invalid("a2", format!("must be positive, got {a2}")));
        }
        Ok(Self {
            a1,
            a2,
            ln_norm: ln_beta(a1, a2),
        })
    }

    pub fn uniform() -> Self {
        Self::new(1.0, 1.0).expect("unit shapes are valid")
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.pdf_unchecked(x))
    }

    fn pdf_unchecked(&self, x: f64) -> f64 {
        x.powf(self.a1 - 1.0) * (1.0 - x).powf(self.a2 - 1.0) * (-self.ln_norm).exp()
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        if self.a2 == 1.0 {
            return Ok(x.powf(self.a1));
        }
        beta_inc(self.a1, self.a2, x)
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        if self.a2 == 1.0 {
            let inv = 1.0 / self.a1;
            return (0..count).map(|_| rng.random::<f64>().powf(inv)).collect();
        }
        let ga = Gamma::new(self.a1, 1.0).expect("validated shape");
        let gb = Gamma::new(self.a2, 1.0).expect("validated shape");
        (0..count)
            .map(|_| {
                let u = ga.sample(rng);
                let v = gb.sample(rng);
                u / (u + v)
            })
            .collect()
    }
}

/// One factor `scale·(x − lo)^{left_exp − 1}(hi − x)^{right_exp − 1}` on
/// `[lo, hi]`, before global normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub scale: f64,
    pub left_exp: f64,
    pub right_exp: f64,
}

impl Piece {
    fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// ∫ over the whole piece, unnormalized.
    fn raw_mass(&self) -> f64 {
        let w = self.width();
        self.scale
            * w.powf(self.left_exp + self.right_exp - 1.0)
            * ln_beta(self.left_exp, self.right_exp).exp()
    }

    fn raw_pdf(&self, x: f64) -> f64 {
        self.scale * (x - self.lo).powf(self.left_exp - 1.0) * (self.hi - x).powf(self.right_exp - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPoint {
    pub location: f64,
    /// Order on `[s − δ, s]`; `None` at `s = 0`.
    pub left_order: Option<f64>,
    /// Order on `[s, s + δ]`; `None` at `s = 1`.
    pub right_order: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    Source,
    Target,
}

/// Which regularity condition a check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    PointsIncreasing,
    PointsInUnitInterval,
    NeighborhoodsDisjoint,
    OrderAtLeastOne,
    SourceVanishes,
    UpperEnvelope,
    LowerEnvelope,
    TotalMass,
    MatchingPoints,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Condition::PointsIncreasing => "singular points strictly increasing",
            Condition::PointsInUnitInterval => "singular points in [0, 1]",
            Condition::NeighborhoodsDisjoint => "disjointness of delta-neighborhoods",
            Condition::OrderAtLeastOne => "order >= 1",
            Condition::SourceVanishes => "source vanishes on at least one side",
            Condition::UpperEnvelope => "density bounded above by c_upper",
            Condition::LowerEnvelope => "density bounded below by c_lower outside neighborhoods",
            Condition::TotalMass => "total mass 1",
            Condition::MatchingPoints => "source and target share singular points",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub condition: Condition,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| !c.passed)
    }

    fn push(&mut self, condition: Condition, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckOutcome {
            condition,
            passed,
            detail: detail.into(),
        });
    }

    fn extend(&mut self, other: ValidationReport) {
        self.checks.extend(other.checks);
    }
}

/// Multi-singularity covariate density (piecewise power factors).
#[derive(Debug, Clone)]
pub struct SingularityDensitySpec {
    pieces: Vec<Piece>,
    singular_points: Vec<SingularPoint>,
    delta: f64,
    c_lower: f64,
    c_upper: f64,
    normalizer: f64,
    /// Normalized mass strictly before piece k.
    cum_mass: Vec<f64>,
    inverse: OnceLock<InverseTable>,
}

impl PartialEq for SingularityDensitySpec {
    fn eq(&self, other: &Self) -> bool {
        self.pieces == other.pieces
            && self.singular_points == other.singular_points
            && self.delta == other.delta
            && self.c_lower == other.c_lower
            && self.c_upper == other.c_upper
    }
}

const JOIN_TOL: f64 = 1e-12;

impl SingularityDensitySpec {
    /// Build from contiguous pieces covering [0, 1] and the locations of the
    /// potential singularity points. Per-side orders are derived from the
    /// pieces. Structural errors (gaps, non-positive exponents) are rejected
    /// here; the regularity conditions are checked by [`Self::validate`].
    pub fn new(
        pieces: Vec<Piece>,
        points: &[f64],
        delta: f64,
        c_lower: f64,
        c_upper: f64,
    ) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::invalid("pieces", "at least one piece is required"));
        }
        if (pieces[0].lo).abs() > JOIN_TOL || (pieces[pieces.len() - 1].hi - 1.0).abs() > JOIN_TOL {
            return Err(Error::invalid("pieces", "pieces must cover [0, 1]"));
        }
        for (k, p) in pieces.iter().enumerate() {
            if !(p.hi > p.lo) {
                return Err(Error::invalid("pieces", format!("piece {k} has empty interval")));
            }
            if !(p.scale > 0.0) || !(p.left_exp > 0.0) || !(p.right_exp > 0.0) {
                return Err(Error::invalid(
                    "pieces",
                    format!("piece {k} needs positive scale and exponents"),
                ));
            }
            if k > 0 && (pieces[k - 1].hi - p.lo).abs() > JOIN_TOL {
                return Err(Error::invalid(
                    "pieces",
                    format!("gap or overlap between pieces {} and {k}", k - 1),
                ));
            }
        }
        if !(delta > 0.0) {
            return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
        }
        if !(c_lower > 0.0 && c_upper > c_lower) {
            return Err(Error::invalid(
                "c_lower",
                format!("need 0 < c_lower < c_upper, got {c_lower}, {c_upper}"),
            ));
        }

        let raw: Vec<f64> = pieces.iter().map(Piece::raw_mass).collect();
        let normalizer: f64 = raw.iter().sum();
        let mut cum_mass = Vec::with_capacity(pieces.len());
        let mut acc = 0.0;
        for m in &raw {
            cum_mass.push(acc / normalizer);
            acc += m;
        }

        let singular_points = points
            .iter()
            .map(|&s| derive_orders(&pieces, s))
            .collect();

        Ok(Self {
            pieces,
            singular_points,
            delta,
            c_lower,
            c_upper,
            normalizer,
            cum_mass,
            inverse: OnceLock::new(),
        })
    }

    /// `Beta(a, 1)` written as a one-piece spec with a singular point at 0.
    pub fn beta_a_one(a: f64, delta: f64, c_lower: f64, c_upper: f64) -> Result<Self> {
        Self::new(
            vec![Piece {
                lo: 0.0,
                hi: 1.0,
                scale: 1.0,
                left_exp: a,
                right_exp: 1.0,
            }],
            &[0.0],
            delta,
            c_lower,
            c_upper,
        )
    }

    /// The two-TSP illustration pairs: singularities at 0 and 0.5, with the
    /// density `x^{a_{1,R}−1}(0.5 − x)^{a_{2,L}−1}` on [0, 0.5] and
    /// `(x − 0.5)^{a_{2,R}−1}` on [0.5, 1], both pieces sharing one constant.
    pub fn illustration(case: IllustrationCase, population: Population) -> Self {
        let (a1r, a2l, a2r) = match (case, population) {
            (IllustrationCase::One, Population::Source) => (4.5, 2.0, 5.5),
            (IllustrationCase::One, Population::Target) => (1.5, 2.0, 2.0),
            (IllustrationCase::Two, Population::Source) => (4.5, 2.0, 5.0),
            (IllustrationCase::Two, Population::Target) => (1.5, 2.0, 1.5),
        };
        Self::new(
            vec![
                Piece {
                    lo: 0.0,
                    hi: 0.5,
                    scale: 1.0,
                    left_exp: a1r,
                    right_exp: a2l,
                },
                Piece {
                    lo: 0.5,
                    hi: 1.0,
                    scale: 1.0,
                    left_exp: a2r,
                    right_exp: 1.0,
                },
            ],
            &[0.0, 0.5],
            0.1,
            1e-3,
            20.0,
        )
        .expect("illustration pieces are well formed")
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn singular_points(&self) -> &[SingularPoint] {
        &self.singular_points
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn c_lower(&self) -> f64 {
        self.c_lower
    }

    pub fn c_upper(&self) -> f64 {
        self.c_upper
    }

    /// Sum of the unnormalized piece integrals; the density is the piece
    /// factor divided by this constant.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    fn piece_index(&self, x: f64) -> usize {
        // first piece whose hi >= x
        self.pieces
            .partition_point(|p| p.hi < x)
            .min(self.pieces.len() - 1)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.pdf_unchecked(x))
    }

    fn pdf_unchecked(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].raw_pdf(x) / self.normalizer
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        let k = self.piece_index(x);
        let p = &self.pieces[k];
        let frac = ((x - p.lo) / p.width()).clamp(0.0, 1.0);
        let within = beta_inc(p.left_exp, p.right_exp, frac)? * p.raw_mass() / self.normalizer;
        Ok((self.cum_mass[k] + within).min(1.0))
    }

    fn inverse_table(&self) -> &InverseTable {
        self.inverse.get_or_init(|| {
            let k = INVERSE_TABLE_KNOTS;
            let xs: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
            let mut us: Vec<f64> = xs
                .iter()
                .map(|&x| self.cdf(x).expect("grid lies in [0, 1]"))
                .collect();
            us[0] = 0.0;
            us[k - 1] = 1.0;
            for i in 1..k {
                if us[i] < us[i - 1] {
                    us[i] = us[i - 1];
                }
            }
            InverseTable::new(us, xs)
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        if count == 0 {
            return Vec::new();
        }
        let table = self.inverse_table();
        (0..count).map(|_| table.eval(rng.random::<f64>())).collect()
    }

    /// Check the regularity conditions for this density in the given role.
    pub fn validate(&self, role: Population) -> ValidationReport {
        let mut report = ValidationReport::default();
        let pts = &self.singular_points;

        let increasing = pts.windows(2).all(|w| w[1].location > w[0].location);
        report.push(Condition::PointsIncreasing, increasing, "");

        let in_unit = pts.iter().all(|p| (0.0..=1.0).contains(&p.location));
        report.push(Condition::PointsInUnitInterval, in_unit, "");

        let overlap = pts
            .windows(2)
            .find(|w| w[1].location - w[0].location < 2.0 * self.delta);
        report.push(
            Condition::NeighborhoodsDisjoint,
            overlap.is_none(),
            overlap
                .map(|w| format!("points {} and {} closer than 2*delta", w[0].location, w[1].location))
                .unwrap_or_default(),
        );

        let bad_order = pts.iter().find_map(|p| {
            [p.left_order, p.right_order]
                .into_iter()
                .flatten()
                .find(|&o| o < 1.0)
                .map(|o| (p.location, o))
        });
        report.push(
            Condition::OrderAtLeastOne,
            bad_order.is_none(),
            bad_order
                .map(|(s, o)| format!("order {o} at s = {s}"))
                .unwrap_or_default(),
        );

        if role == Population::Source {
            let flat = pts.iter().find(|p| {
                let max = [p.left_order, p.right_order]
                    .into_iter()
                    .flatten()
                    .fold(f64::NEG_INFINITY, f64::max);
                !(max > 1.0)
            });
            report.push(
                Condition::SourceVanishes,
                flat.is_none(),
                flat.map(|p| format!("source does not vanish at s = {}", p.location))
                    .unwrap_or_default(),
            );
        }

        let mut upper_bad = None;
        let mut lower_bad = None;
        for i in 0..=ENVELOPE_GRID {
            let x = i as f64 / ENVELOPE_GRID as f64;
            let h = self.pdf_unchecked(x);
            if upper_bad.is_none() && !(h <= self.c_upper) {
                upper_bad = Some((x, h));
            }
            let near = pts.iter().any(|p| (x - p.location).abs() <= self.delta);
            if !near && lower_bad.is_none() && !(h >= self.c_lower) {
                lower_bad = Some((x, h));
            }
        }
        report.push(
            Condition::UpperEnvelope,
            upper_bad.is_none(),
            upper_bad
                .map(|(x, h)| format!("h({x}) = {h} > {}", self.c_upper))
                .unwrap_or_default(),
        );
        report.push(
            Condition::LowerEnvelope,
            lower_bad.is_none(),
            lower_bad
                .map(|(x, h)| format!("h({x}) = {h} < {}", self.c_lower))
                .unwrap_or_default(),
        );

        let mass = total_mass_by_quadrature(&DensityModel::Singular(Arc::new(self.clone())));
        report.push(
            Condition::TotalMass,
            (mass - 1.0).abs() <= 1e-6,
            format!("quadrature mass {mass}"),
        );
        report
    }
}

/// Validate a source/target pair: each density in its role plus matching
/// singular point locations.
pub fn validate_pair(source: &SingularityDensitySpec, target: &SingularityDensitySpec) -> ValidationReport {
    let mut report = source.validate(Population::Source);
    report.extend(target.validate(Population::Target));
    let same = source.singular_points.len() == target.singular_points.len()
        && source
            .singular_points
            .iter()
            .zip(&target.singular_points)
            .all(|(a, b)| (a.location - b.location).abs() <= JOIN_TOL);
    report.push(Condition::MatchingPoints, same, "");
    report
}

fn derive_orders(pieces: &[Piece], s: f64) -> SingularPoint {
    let left_order = if s <= 0.0 {
        None
    } else {
        Some(
            pieces
                .iter()
                .find(|p| (p.hi - s).abs() <= JOIN_TOL)
                .map_or(1.0, |p| p.right_exp),
        )
    };
    let right_order = if s >= 1.0 {
        None
    } else {
        Some(
            pieces
                .iter()
                .find(|p| (p.lo - s).abs() <= JOIN_TOL)
                .map_or(1.0, |p| p.left_exp),
        )
    };
    SingularPoint {
        location: s,
        left_order,
        right_order,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IllustrationCase {
    /// Extra TSP at 0.5 leaves the rate unchanged.
    One,
    /// Extra TSP at 0.5 slows the rate.
    Two,
}

/// Monotone (Fritsch–Carlson) cubic interpolant of x as a function of the CDF.
#[derive(Debug, Clone)]
struct InverseTable {
    us: Vec<f64>,
    xs: Vec<f64>,
    slopes: Vec<f64>,
}

impl InverseTable {
    fn new(us: Vec<f64>, xs: Vec<f64>) -> Self {
        let k = us.len();
        let secant: Vec<f64> = (0..k - 1)
            .map(|i| {
                let du = us[i + 1] - us[i];
                if du > 0.0 {
                    (xs[i + 1] - xs[i]) / du
                } else {
                    0.0
                }
            })
            .collect();
        let mut slopes = vec![0.0; k];
        slopes[0] = secant[0];
        slopes[k - 1] = secant[k - 2];
        for i in 1..k - 1 {
            let (a, b) = (secant[i - 1], secant[i]);
            slopes[i] = if a > 0.0 && b > 0.0 {
                // weighted harmonic mean keeps the interpolant monotone
                let h0 = us[i] - us[i - 1];
                let h1 = us[i + 1] - us[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                (w1 + w2) / (w1 / a + w2 / b)
            } else {
                0.0
            };
        }
        Self { us, xs, slopes }
    }

    fn eval(&self, u: f64) -> f64 {
        let k = self.us.len();
        let i = self.us.partition_point(|&v| v <= u).clamp(1, k - 1) - 1;
        let h = self.us[i + 1] - self.us[i];
        if h <= 0.0 {
            return self.xs[i];
        }
        let t = (u - self.us[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let x = h00 * self.xs[i]
            + h10 * h * self.slopes[i]
            + h01 * self.xs[i + 1]
            + h11 * h * self.slopes[i + 1];
        x.clamp(self.xs[i], self.xs[i + 1])
    }
}

/// A covariate density model.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityModel {
    Beta(BetaDensity),
    Singular(Arc<SingularityDensitySpec>),
}

impl From<BetaDensity> for DensityModel {
    fn from(d: BetaDensity) -> Self {
        DensityModel::Beta(d)
    }
}

impl From<SingularityDensitySpec> for DensityModel {
    fn from(d: SingularityDensitySpec) -> Self {
        DensityModel::Singular(Arc::new(d))
    }
}

impl DensityModel {
    pub fn uniform() -> Self {
        DensityModel::Beta(BetaDensity::uniform())
    }

    pub fn beta(a1: f64, a2: f64) -> Result<Self> {
        Ok(DensityModel::Beta(BetaDensity::new(a1, a2)?))
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        match self {
            DensityModel::Beta(d) => d.pdf(x),
            DensityModel::Singular(d) => d.pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self {
            DensityModel::Beta(d) => d.cdf(x),
            DensityModel::Singular(d) => d.cdf(x),
        }
    }

    /// Mass of `[lo, hi] ∩ [0, 1]`; zero for an empty intersection.
    pub fn interval_mass(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.clamp(0.0, 1.0);
        let hi = hi.clamp(0.0, 1.0);
        if lo >= hi {
            return 0.0;
        }
        let upper = self.cdf(hi).expect("clipped to [0, 1]");
        let lower = self.cdf(lo).expect("clipped to [0, 1]");
        (upper - lower).max(0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        match self {
            DensityModel::Beta(d) => d.sample(count, rng),
            DensityModel::Singular(d) => d.sample(count, rng),
        }
    }
}

/// ∫₀¹ pdf by adaptive Simpson, split at piece boundaries.
pub fn total_mass_by_quadrature(d: &DensityModel) -> f64 {
    let breaks: Vec<f64> = match d {
        DensityModel::Beta(_) => vec![0.0, 1.0],
        DensityModel::Singular(s) => {
            let mut b: Vec<f64> = s.pieces.iter().map(|p| p.lo).collect();
            b.push(1.0);
            b
        }
    };
    breaks
        .windows(2)
        .map(|w| adaptive_simpson(|x| d.pdf(x).unwrap_or(0.0), w[0], w[1], DEFAULT_ABS_TOL))
        .sum()
}
