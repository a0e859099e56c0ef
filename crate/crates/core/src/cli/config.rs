//! Sectioned `key = value` configuration.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! list = 1, 2, 3
//! ```
//!
//! Unknown sections and keys are rejected. Every key has a default, so an
//! empty file is a valid configuration.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use crate::adapt::{LepskiConfig, ShapeBounds, DEFAULT_EVAL_GRID, DEFAULT_TRIM};
use crate::densities::{DensityModel, IllustrationCase, Piece, Population, SingularityDensitySpec};
use crate::error::{Error, Result};
use crate::estimators::{default_order, EstimatorConfig, GateRule, DEFAULT_C_BANDWIDTH, DEFAULT_SIGMA_BAR};
use crate::rates::RegionConstants;
use crate::simharness::{TargetFn, DEFAULT_GRID_N, DEFAULT_SIGMA};

/// Reference text shown by `--help`.
pub const CONFIG_HELP: &str = "\
CONFIG FILE (flat sections of `key = value`, lists comma-separated, `#` comments)

[source] / [target]  covariate densities
  kind       = beta | uniform | singular | illustration   (source: beta, target: uniform)
  a1, a2     = Beta shapes                                 (source: 4, 1; target: 1, 1)
  pieces     = lo:hi:scale:left_order:right_order, ...     (singular only;
               density on a piece is scale (x-lo)^(left_order-1) (hi-x)^(right_order-1))
  points     = singular point locations, ...               (singular only)
  delta      = 0.1    c_lower = 0.001    c_upper = 20      (singular only)
  case       = 1 | 2                                       (illustration only)
[spread]     n = 1000, n_target = 100, beta = 0.5, tol = 1e-12
[estimate]   method = known | plugin (known), beta = 0.5, c_bandwidth = 0.7, kappa = 1,
             order = floor(beta) or 0 when beta <= 1, gate = known | plugin (known),
             truncate = false, sigma_bar = 0.3, grid_n = 3000,
             shape_lo = 0.05, shape_hi = 50
[rate]       n = 10000, n_target = 1000, a = 4, beta = 0.5,
             c_lower = c_equalizing = c_upper = c_classical = 1,
             n_list = 1000, 10000, 100000
             n_target_list = 10, 100, 1000, 10000, 100000, 1000000
[adapt]      beta_lo = 0.25, beta_hi = 2, kappa = 1, trim = 0.05,
             c_sel = 4 kappa + 0.1, c_shrink = (2 beta_hi + 1)^2 / (2 beta_lo) + 0.1,
             eval_grid = 4096, shape_lo = 0.05, shape_hi = 50
[simulate]   sigma = 0.3, c_bandwidth = 0.7, grid_n = 3000, f = f1 | f2 (f1),
             replications = per preset (desk 25, paper 100),
             n_list = per preset, seed = 20240601,
             c_sl, c_tl = (0.95, 1.2) for beta 0.5 and (0.4, 0.7) for beta 0.9
[output]     dir = out

Seed precedence: --seed, then SLP_SEED, then [simulate] seed.
";

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

type Sections = BTreeMap<String, BTreeMap<String, Entry>>;

const SECTIONS: &[(&str, &[&str])] = &[
    ("source", DENSITY_KEYS),
    ("target", DENSITY_KEYS),
    ("spread", &["n", "n_target", "beta", "tol"]),
    (
        "estimate",
        &[
            "method",
            "beta",
            "c_bandwidth",
            "kappa",
            "order",
            "gate",
            "truncate",
            "sigma_bar",
            "grid_n",
            "shape_lo",
            "shape_hi",
        ],
    ),
    (
        "rate",
        &[
            "n",
            "n_target",
            "a",
            "beta",
            "c_lower",
            "c_equalizing",
            "c_upper",
            "c_classical",
            "n_list",
            "n_target_list",
        ],
    ),
    (
        "adapt",
        &[
            "beta_lo",
            "beta_hi",
            "kappa",
            "trim",
            "c_sel",
            "c_shrink",
            "eval_grid",
            "shape_lo",
            "shape_hi",
        ],
    ),
    (
        "simulate",
        &[
            "sigma",
            "c_bandwidth",
            "grid_n",
            "f",
            "replications",
            "n_list",
            "seed",
            "c_sl",
            "c_tl",
        ],
    ),
    ("output", &["dir"]),
];

const DENSITY_KEYS: &[&str] = &["kind", "a1", "a2", "pieces", "points", "delta", "c_lower", "c_upper", "case"];

fn tokenize(text: &str) -> Result<Sections> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<(String, &'static [&'static str])> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::ConfigParse {
                line,
                msg: format!("malformed section header `{body}`"),
            })?;
            let name = name.trim();
            let keys = SECTIONS
                .iter()
                .find(|(s, _)| *s == name)
                .map(|(_, k)| *k)
                .ok_or_else(|| Error::ConfigParse {
                    line,
                    msg: format!("unknown section `[{name}]`"),
                })?;
            sections.entry(name.to_string()).or_default();
            current = Some((name.to_string(), keys));
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| Error::ConfigParse {
            line,
            msg: format!("expected `key = value`, got `{body}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let (section, keys) = current.as_ref().ok_or_else(|| Error::ConfigParse {
            line,
            msg: format!("key `{key}` appears before any section header"),
        })?;
        if key.is_empty() {
            return Err(Error::ConfigParse {
                line,
                msg: "empty key".into(),
            });
        }
        if !keys.contains(&key) {
            return Err(Error::ConfigKey {
                key: format!("{section}.{key}"),
                msg: format!("unknown key (line {line})"),
            });
        }
        let slot = sections.get_mut(section).expect("section registered above");
        if slot.contains_key(key) {
            return Err(Error::ConfigParse {
                line,
                msg: format!("duplicate key `{key}` in [{section}]"),
            });
        }
        slot.insert(
            key.to_string(),
            Entry {
                value: unquote(value).to_string(),
                line,
            },
        );
    }
    Ok(sections)
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

/// Typed access to one section.
struct Section<'a> {
    name: &'a str,
    entries: Option<&'a BTreeMap<String, Entry>>,
}

impl<'a> Section<'a> {
    fn key_error(&self, key: &str, msg: impl Into<String>) -> Error {
        Error::ConfigKey {
            key: format!("{}.{key}", self.name),
            msg: msg.into(),
        }
    }

    fn raw(&self, key: &str) -> Option<&'a Entry> {
        self.entries.and_then(|e| e.get(key))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| {
                self.key_error(key, format!("cannot parse `{}` (line {})", e.value, e.line))
            }),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.parse::<f64>(key)?.unwrap_or(default);
        if !v.is_finite() {
            return Err(self.key_error(key, format!("must be finite, got {v}")));
        }
        Ok(v)
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.real(key, default)?;
        if v <= 0.0 {
            return Err(self.key_error(key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn count(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.parse::<u64>(key)?.unwrap_or(default))
    }

    fn positive_count(&self, key: &str, default: u64) -> Result<u64> {
        let v = self.count(key, default)?;
        if v == 0 {
            return Err(self.key_error(key, "must be positive"));
        }
        Ok(v)
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(e) = self.raw(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|item| {
                item.trim().parse::<T>().map_err(|_| {
                    self.key_error(key, format!("cannot parse list item `{}` (line {})", item.trim(), e.line))
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    fn word(&self, key: &str, default: &str, allowed: &[&str]) -> Result<String> {
        let v = self.raw(key).map(|e| e.value.as_str()).unwrap_or(default);
        if !allowed.contains(&v) {
            return Err(self.key_error(key, format!("expected one of {}, got `{v}`", allowed.join(" | "))));
        }
        Ok(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadSection {
    pub n: u64,
    pub n_target: u64,
    pub beta: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    Known,
    PlugIn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSection {
    pub method: EstimateMethod,
    pub estimator: EstimatorConfig,
    pub grid_n: usize,
    pub bounds: ShapeBounds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSection {
    pub n: f64,
    pub n_target: f64,
    pub a: f64,
    pub beta: f64,
    pub constants: RegionConstants,
    pub n_list: Vec<f64>,
    pub n_target_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptSection {
    pub lepski: LepskiConfig,
    pub kappa: f64,
    pub bounds: ShapeBounds,
}

/// Overrides applied on top of a simulation preset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSection {
    pub sigma: f64,
    pub c_bandwidth: f64,
    pub grid_n: usize,
    pub f_id: TargetFn,
    pub replications: Option<usize>,
    pub n_list: Option<Vec<u64>>,
    pub seed: u64,
    pub c_sl: Option<f64>,
    pub c_tl: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub source: DensityModel,
    pub target: DensityModel,
    pub spread: SpreadSection,
    pub estimate: EstimateSection,
    pub rate: RateSection,
    pub adapt: AdaptSection,
    pub simulate: SimulateSection,
    pub output_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

/// Parse and validate a configuration, filling in defaults.
pub fn parse_config(text: &str) -> Result<Config> {
    let sections = tokenize(text)?;
    let section = |name: &'static str| Section {
        name,
        entries: sections.get(name),
    };
    Ok(Config {
        source: density(&section("source"), Population::Source)?,
        target: density(&section("target"), Population::Target)?,
        spread: spread(&section("spread"))?,
        estimate: estimate(&section("estimate"))?,
        rate: rate(&section("rate"))?,
        adapt: adapt(&section("adapt"))?,
        simulate: simulate(&section("simulate"))?,
        output_dir: PathBuf::from(section("output").raw("dir").map(|e| e.value.as_str()).unwrap_or("out")),
    })
}

fn density(s: &Section, role: Population) -> Result<DensityModel> {
    let default_kind = match role {
        Population::Source => "beta",
        Population::Target => "uniform",
    };
    let kind = s.word("kind", default_kind, &["beta", "uniform", "singular", "illustration"])?;
    let wrap = |key: &str, e: Error| s.key_error(key, e.to_string());
    match kind.as_str() {
        "uniform" => Ok(DensityModel::uniform()),
        "beta" => {
            let (d1, d2) = match role {
                Population::Source => (4.0, 1.0),
                Population::Target => (1.0, 1.0),
            };
            let a1 = s.positive("a1", d1)?;
            let a2 = s.positive("a2", d2)?;
            DensityModel::beta(a1, a2).map_err(|e| wrap("a1", e))
        }
        "illustration" => {
            let case = match s.count("case", 1)? {
                1 => IllustrationCase::One,
                2 => IllustrationCase::Two,
                other => return Err(s.key_error("case", format!("expected 1 or 2, got {other}"))),
            };
            Ok(DensityModel::Singular(Arc::new(SingularityDensitySpec::illustration(case, role))))
        }
        _ => {
            let pieces_raw = s
                .raw("pieces")
                .ok_or_else(|| s.key_error("pieces", "required when kind = singular"))?;
            let pieces = pieces_raw
                .value
                .split(',')
                .map(|p| parse_piece(p.trim()).map_err(|m| s.key_error("pieces", format!("{m} (line {})", pieces_raw.line))))
                .collect::<Result<Vec<Piece>>>()?;
            let points = s.list::<f64>("points")?.unwrap_or_default();
            let delta = s.positive("delta", 0.1)?;
            let c_lower = s.positive("c_lower", 1e-3)?;
            let c_upper = s.positive("c_upper", 20.0)?;
            let spec = SingularityDensitySpec::new(pieces, &points, delta, c_lower, c_upper)
                .map_err(|e| wrap("pieces", e))?;
            let report = spec.validate(role);
            if let Some(fail) = report.first_failure() {
                return Err(s.key_error("pieces", format!("density fails validation: {fail:?}")));
            }
            Ok(DensityModel::Singular(Arc::new(spec)))
        }
    }
}

fn parse_piece(text: &str) -> std::result::Result<Piece, String> {
    let fields: Vec<f64> = text
        .split(':')
        .map(|f| f.trim().parse::<f64>().map_err(|_| format!("bad number `{}` in piece `{text}`", f.trim())))
        .collect::<std::result::Result<_, _>>()?;
    match fields[..] {
        [lo, hi, scale, left_exp, right_exp] => Ok(Piece {
            lo,
            hi,
            scale,
            left_exp,
            right_exp,
        }),
        _ => Err(format!("piece `{text}` needs lo:hi:scale:left_order:right_order")),
    }
}

fn spread(s: &Section) -> Result<SpreadSection> {
    let n = s.count("n", 1000)?;
    let n_target = s.count("n_target", 100)?;
    if n + n_target == 0 {
        return Err(s.key_error("n", "n + n_target must be positive"));
    }
    Ok(SpreadSection {
        n,
        n_target,
        beta: s.positive("beta", 0.5)?,
        tol: s.positive("tol", crate::spread::DEFAULT_TOL)?,
    })
}

fn bounds(s: &Section) -> Result<ShapeBounds> {
    let lo = s.positive("shape_lo", 0.05)?;
    let hi = s.positive("shape_hi", 50.0)?;
    ShapeBounds::new(lo, hi).map_err(|e| s.key_error("shape_lo", e.to_string()))
}

fn estimate(s: &Section) -> Result<EstimateSection> {
    let method = match s.word("method", "known", &["known", "plugin"])?.as_str() {
        "known" => EstimateMethod::Known,
        _ => EstimateMethod::PlugIn,
    };
    let beta = s.positive("beta", 0.5)?;
    let kappa = s.positive("kappa", 1.0)?;
    let sigma_bar = s.positive("sigma_bar", DEFAULT_SIGMA_BAR)?;
    let mut est = EstimatorConfig::new(beta).map_err(|e| s.key_error("beta", e.to_string()))?;
    est.kappa = kappa;
    est.c_bandwidth = s.positive("c_bandwidth", DEFAULT_C_BANDWIDTH)?;
    est.order_l = s.count("order", default_order(beta) as u64)? as usize;
    est.t1 = kappa + 4.0 * sigma_bar;
    est.t0 = 2.0 * est.t1;
    est.gate = match s.word("gate", "known", &["known", "plugin"])?.as_str() {
        "known" => GateRule::KnownDensity,
        _ => GateRule::PlugIn,
    };
    est.truncate = s.parse::<bool>("truncate")?.unwrap_or(false);
    est.validate().map_err(|e| s.key_error("beta", e.to_string()))?;
    Ok(EstimateSection {
        method,
        estimator: est,
        grid_n: s.positive_count("grid_n", DEFAULT_GRID_N as u64)? as usize,
        bounds: bounds(s)?,
    })
}

fn rate(s: &Section) -> Result<RateSection> {
    let positive_list = |key: &str, default: &[f64]| -> Result<Vec<f64>> {
        let v = s.list::<f64>(key)?.unwrap_or_else(|| default.to_vec());
        if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(s.key_error(key, "entries must be positive"));
        }
        Ok(v)
    };
    let n = s.positive("n", 1e4)?;
    let n_target = s.real("n_target", 1e3)?;
    if n_target < 0.0 {
        return Err(s.key_error("n_target", format!("must be nonnegative, got {n_target}")));
    }
    Ok(RateSection {
        n,
        n_target,
        a: s.positive("a", 4.0)?,
        beta: s.positive("beta", 0.5)?,
        constants: RegionConstants {
            lower: s.positive("c_lower", 1.0)?,
            equalizing: s.positive("c_equalizing", 1.0)?,
            upper: s.positive("c_upper", 1.0)?,
            classical: s.positive("c_classical", 1.0)?,
        },
        n_list: positive_list("n_list", &[1e3, 1e4, 1e5])?,
        n_target_list: positive_list("n_target_list", &[1e1, 1e2, 1e3, 1e4, 1e5, 1e6])?,
    })
}

fn adapt(s: &Section) -> Result<AdaptSection> {
    let beta_lo = s.positive("beta_lo", 0.25)?;
    let beta_hi = s.positive("beta_hi", 2.0)?;
    if beta_hi <= beta_lo {
        return Err(s.key_error("beta_hi", format!("must exceed beta_lo = {beta_lo}")));
    }
    let kappa = s.positive("kappa", 1.0)?;
    let mut lepski = LepskiConfig::new(beta_lo, beta_hi, kappa).map_err(|e| s.key_error("beta_lo", e.to_string()))?;
    lepski.trim = s.positive("trim", DEFAULT_TRIM)?;
    if let Some(v) = s.parse::<f64>("c_sel")? {
        lepski.c_sel = v;
    }
    if let Some(v) = s.parse::<f64>("c_shrink")? {
        lepski.c_shrink = v;
    }
    lepski.eval_grid_size = s.positive_count("eval_grid", DEFAULT_EVAL_GRID as u64)? as usize;
    if let Err(e) = lepski.validate(kappa) {
        let key = match &e {
            Error::InvalidParameter { name, .. } => match *name {
                "eval_grid_size" => "eval_grid",
                other => other,
            },
            _ => "beta_lo",
        };
        return Err(s.key_error(key, e.to_string()));
    }
    Ok(AdaptSection {
        lepski,
        kappa,
        bounds: bounds(s)?,
    })
}

fn simulate(s: &Section) -> Result<SimulateSection> {
    let f_id = match s.word("f", "f1", &["f1", "f2"])?.as_str() {
        "f1" => TargetFn::F1,
        _ => TargetFn::F2,
    };
    let replications = match s.parse::<usize>("replications")? {
        Some(0) => return Err(s.key_error("replications", "must be positive")),
        other => other,
    };
    let n_list = s.list::<u64>("n_list")?;
    if let Some(list) = &n_list {
        if list.is_empty() || list.contains(&0) {
            return Err(s.key_error("n_list", "entries must be positive"));
        }
    }
    let sigma = s.real("sigma", DEFAULT_SIGMA)?;
    if sigma < 0.0 {
        return Err(s.key_error("sigma", format!("must be nonnegative, got {sigma}")));
    }
    Ok(SimulateSection {
        sigma,
        c_bandwidth: s.positive("c_bandwidth", DEFAULT_C_BANDWIDTH)?,
        grid_n: s.positive_count("grid_n", DEFAULT_GRID_N as u64)? as usize,
        f_id,
        replications,
        n_list,
        seed: s.count("seed", DEFAULT_SEED)?,
        c_sl: s.parse::<f64>("c_sl")?,
        c_tl: s.parse::<f64>("c_tl")?,
    })
}
