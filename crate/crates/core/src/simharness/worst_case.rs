//! Bump-sum fixtures `f_t = Σ_j t(j)·ψ_j` used in the minimax lower bound.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Standard bump `u ↦ exp(−1/(1 − (2u−1)²))` on `(0, 1)`, zero elsewhere.
pub fn bump(u: f64) -> f64 {
    bump_derivative(u, 0)
}

/// Derivatives of order 0, 1, 2 of [`bump`].
fn bump_derivative(u: f64, order: usize) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let z = 2.0 * u - 1.0;
    let w = 1.0 - z * z;
    let base = (-1.0 / w).exp();
    // ψ' = q·ψ with q = −4z/w², and ψ'' = (q' + q²)·ψ
    let q = -4.0 * z / (w * w);
    match order {
        0 => base,
        1 => q * base,
        2 => (-8.0 / (w * w) - 32.0 * z * z / (w * w * w) + q * q) * base,
        _ => unreachable!("bump derivatives above order 2 are not provided"),
    }
}

const MAX_ORDER: usize = 2;
const QUOTIENT_GRID: usize = 1500;

/// Hölder quotient `sup |ψ^{(l)}(u) − ψ^{(l)}(v)| / |u − v|^γ` over `[0, 1]`.
fn holder_quotient(order: usize, gamma: f64) -> f64 {
    let k = QUOTIENT_GRID;
    let vals: Vec<f64> = (0..=k).map(|i| bump_derivative(i as f64 / k as f64, order)).collect();
    let mut best = 0.0f64;
    for i in 0..=k {
        for j in (i + 1)..=k {
            let d = (j - i) as f64 / k as f64;
            best = best.max((vals[i] - vals[j]).abs() / d.powf(gamma));
        }
    }
    best
}

/// Grid search underestimates the supremum slightly; this covers the gap.
const QUOTIENT_MARGIN: f64 = 1.01;

fn cached_quotient(order: usize, gamma: f64) -> f64 {
    // γ is a free real, so only the common Lipschitz case is cached
    static LIPSCHITZ: [OnceLock<f64>; MAX_ORDER + 1] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    if gamma == 1.0 {
        *LIPSCHITZ[order].get_or_init(|| holder_quotient(order, 1.0))
    } else {
        holder_quotient(order, gamma)
    }
}

/// `x ↦ Σ_{j=1}^{J} t(j)·m^{−β}·s·ψ(mx − (j−1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSum {
    m: usize,
    signs: Vec<i8>,
    beta: f64,
    kappa: f64,
    scale: f64,
}

impl BumpSum {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Amplitude `s` multiplying the standard bump.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// `d^k f_t / dx^k` for `k ≤ 2`.
    pub fn derivative(&self, x: f64, k: usize) -> f64 {
        let mf = self.m as f64;
        let u = mf * x;
        let j = u.floor();
        if j < 0.0 || j as usize >= self.signs.len() {
            return 0.0;
        }
        let sign = self.signs[j as usize] as f64;
        sign * mf.powf(k as f64 - self.beta) * self.scale * bump_derivative(u - j, k)
    }

    /// Support of term `j` (1-based).
    pub fn support(&self, j: usize) -> (f64, f64) {
        let mf = self.m as f64;
        ((j - 1) as f64 / mf, j as f64 / mf)
    }

    /// `∫ψ_j² = m^{−(2β+1)}·s²·∫ψ²`, identical for every `j`.
    pub fn term_l2_sq(&self, psi_sq_integral: f64) -> f64 {
        (self.m as f64).powf(-(2.0 * self.beta + 1.0)) * self.scale * self.scale * psi_sq_integral
    }
}

/// Bump-sum in `𝓗(β, κ)` with `m` cells, the first `J` active.
///
/// The amplitude is the largest `s` for which both `sup |f_t| ≤ κ` and the
/// Hölder condition on the `l`-th derivative (`l = ⌈β⌉ − 1`) hold, using
/// the numerically maximised quotient of the standard bump and the factor
/// `2^{1−(β−l)}` that bounds pairs in different cells.
pub fn worst_case_function(m: usize, j: usize, signs: &[i8], beta: f64, kappa: f64) -> Result<BumpSum> {
    if signs.len() != j {
        return Err(Error::LengthMismatch {
            expected: j,
            got: signs.len(),
        });
    }
    if j == 0 || j > m {
        return Err(Error::invalid("signs", format!("need 1 <= J <= m, got J = {j}, m = {m}")));
    }
    if let Some(s) = signs.iter().find(|&&s| s != 1 && s != -1) {
        return Err(Error::invalid("signs", format!("entries must be +1 or -1, got {s}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid("beta", format!("must be positive, got {beta}")));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::invalid("kappa", format!("must be positive, got {kappa}")));
    }
    let order = beta.ceil() as usize - 1;
    if order > MAX_ORDER {
        return Err(Error::invalid("beta", format!("supported up to 3, got {beta}")));
    }
    let gamma = beta - order as f64;
    let quotient = QUOTIENT_MARGIN * cached_quotient(order, gamma);
    let holder_scale = kappa / (2f64.powf(1.0 - gamma) * quotient);
    // sup ψ = e^{−1} and m^{−β} ≤ 1
    let sup_scale = kappa * std::f64::consts::E;
    Ok(BumpSum {
        m,
        signs: signs.to_vec(),
        beta,
        kappa,
        scale: holder_scale.min(sup_scale),
    })
}
