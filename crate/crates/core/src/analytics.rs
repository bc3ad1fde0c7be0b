//! Closed-form evaluators: critical exponents, the regime classifier, the new-seed probability
//! chains, expectation orders for the lower-bound regimes, the recursion
//! for the spreading time, and log-log scaling fits.
//!
//! Order-of-magnitude formulas are evaluated with every hidden constant set to 1.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Variant;

pub type Rational = Ratio<i64>;

/// Tolerance for treating a float `gamma` as sitting on a regime breakpoint.
pub const BREAKPOINT_TOL: f64 = 1e-12;

fn binom2(k: u32) -> i64 {
    let k = k as i64;
    k * (k + 1) / 2
}

/// `2(k^2 + k + 2) / (k(k + 1))`
pub fn alpha_k(k: u32) -> Rational {
    assert!(k >= 1, "k must be >= 1");
    let k = k as i64;
    Ratio::new(2 * (k * k + k + 2), k * (k + 1))
}

/// `2(k + 1) / k`
pub fn beta_k(k: u32) -> Rational {
    assert!(k >= 1, "k must be >= 1");
    let k = k as i64;
    Ratio::new(2 * (k + 1), k)
}

fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Fast,
    Slow,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeVerdict {
    pub regime: Regime,
    pub justification: &'static str,
}

fn verdict(regime: Regime, justification: &'static str) -> RegimeVerdict {
    RegimeVerdict { regime, justification }
}

fn critical(variant: Variant, k: u32) -> Rational {
    match variant {
        Variant::W => alpha_k(k),
        Variant::I => beta_k(k),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Position {
    Below,
    At,
    Above,
}

fn classify_positions(k: u32, at_two: Position, at_crit: Position, variant: Variant) -> RegimeVerdict {
    if k == 1 {
        return if at_two == Position::Below {
            verdict(Regime::Fast, "external: simple contagion, small-world diameter")
        } else {
            verdict(Regime::Unknown, "external: simple contagion outside [0, 2)")
        };
    }
    let upper = match variant {
        Variant::W => "polylog upper bound, no multi-edges",
        Variant::I => "polylog upper bound, multi-edges",
    };
    match (at_two, at_crit) {
        (Position::Below, _) => verdict(Regime::Slow, "no wide bridges for gamma < 2"),
        (Position::At, _) => verdict(Regime::Fast, "gamma = 2 polylog bound"),
        (_, Position::Below) => verdict(Regime::Fast, upper),
        (_, Position::At) => verdict(Regime::Unknown, "critical exponent, open"),
        (_, Position::Above) => verdict(
            Regime::Slow,
            match variant {
                Variant::W => "too few long ties on connected subsets",
                Variant::I => "too few long ties, multi-edges",
            },
        ),
    }
}

fn position_f64(x: f64, bp: f64) -> Position {
    if (x - bp).abs() <= BREAKPOINT_TOL {
        Position::At
    } else if x < bp {
        Position::Below
    } else {
        Position::Above
    }
}

fn position_exact(x: Rational, bp: Rational) -> Position {
    match x.cmp(&bp) {
        std::cmp::Ordering::Less => Position::Below,
        std::cmp::Ordering::Equal => Position::At,
        std::cmp::Ordering::Greater => Position::Above,
    }
}

/// Fast iff `2 <= gamma < alpha_k` (W) or `2 <= gamma < beta_k` (I); Unknown on the
/// critical exponent; Slow otherwise. Breakpoints are matched within `BREAKPOINT_TOL`.
pub fn classify_regime(variant: Variant, gamma: f64, k: u32) -> Result<RegimeVerdict> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::OutOfRange(format!("gamma {gamma} must be finite and >= 0")));
    }
    if k == 0 {
        return Err(Error::OutOfRange("k must be >= 1".into()));
    }
    let crit = to_f64(critical(variant, k));
    Ok(classify_positions(k, position_f64(gamma, 2.0), position_f64(gamma, crit), variant))
}

/// `classify_regime` with exact rational comparison.
pub fn classify_regime_exact(variant: Variant, gamma: Rational, k: u32) -> Result<RegimeVerdict> {
    if gamma < Ratio::from_integer(0) {
        return Err(Error::OutOfRange(format!("gamma {gamma} must be >= 0")));
    }
    if k == 0 {
        return Err(Error::OutOfRange("k must be >= 1".into()));
    }
    Ok(classify_positions(
        k,
        position_exact(gamma, Ratio::from_integer(2)),
        position_exact(gamma, critical(variant, k)),
        variant,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub k: u32,
    pub gamma: f64,
    pub delta: f64,
    pub ell: f64,
    pub lambda: f64,
    pub c: f64,
    pub d: f64,
    pub epsilon: f64,
    pub zeta: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        BoundParams { k: 2, gamma: 2.5, delta: 0.1, ell: 1.0, lambda: 1.0, c: 1.0, d: 1.0, epsilon: 0.1, zeta: -0.5 }
    }
}

impl BoundParams {
    /// `r = (6d / lambda)^c`
    pub fn r(&self) -> f64 {
        (6.0 * self.d / self.lambda).powf(self.c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P5Chain {
    pub p1: f64,
    pub p2: f64,
    /// `Q_1..Q_k` (W) or `Q_1, Q'_2..Q'_k` (I).
    pub q: Vec<f64>,
    pub p4: f64,
    pub b_size: f64,
    pub p5: f64,
    /// Power of `ell` in `P4 * |B|`.
    pub ell_exponent: f64,
}

fn check_chain_params(p: &BoundParams, crit: f64, name: &str) -> Result<()> {
    if p.k < 1 {
        return Err(Error::OutOfRange("k must be >= 1".into()));
    }
    if !(p.gamma > 2.0 && p.gamma < crit) {
        return Err(Error::OutOfRange(format!("gamma {} outside (2, {name} = {crit})", p.gamma)));
    }
    let dmax = 1.0 - p.gamma / crit;
    if !(p.delta > 0.0 && p.delta < dmax) {
        return Err(Error::OutOfRange(format!("delta {} outside (0, 1 - gamma/{name} = {dmax})", p.delta)));
    }
    if !(p.lambda > 0.0 && p.lambda.is_finite()) {
        return Err(Error::OutOfRange(format!("lambda {} must be positive", p.lambda)));
    }
    if !(p.ell >= 1.0 && p.ell.is_finite()) {
        return Err(Error::OutOfRange(format!("ell {} must be >= 1", p.ell)));
    }
    Ok(())
}

fn ln_factorial(s: u32) -> f64 {
    (2..=s).map(|i| (i as f64).ln()).sum()
}

/// Lower bound on a new seed forming in `B`, no multi-edges.
pub fn p5_lower_bound_w(p: &BoundParams) -> Result<P5Chain> {
    check_chain_params(p, to_f64(alpha_k(p.k)), "alpha_k")?;
    let (k, g, dl, l, lam) = (p.k, p.gamma, p.delta, p.ell, p.lambda);
    let ln_l = l.ln();
    let e = 1.0 - dl - g / 2.0;
    let p1 = lam * (-g / 2.0 * ln_l).exp();
    let p2 = lam * (e * ln_l).exp();
    let ln_q: Vec<f64> = (1..=k)
        .map(|s| s as f64 * lam.ln() + s as f64 * e * ln_l - 2f64.ln() - ln_factorial(s))
        .collect();
    let ln_p4: f64 = ln_q.iter().sum();
    let b_size = ((1.0 - dl) * ln_l).exp();
    let p5 = 1.0 - (-(ln_p4 + b_size.ln() - 2f64.ln()).exp()).exp();
    let c = binom2(k) as f64;
    Ok(P5Chain {
        p1,
        p2,
        q: ln_q.iter().map(|x| x.exp()).collect(),
        p4: ln_p4.exp(),
        b_size,
        p5: p5.clamp(0.0, 1.0),
        ell_exponent: (c + 1.0) * (1.0 - dl) - c * g / 2.0,
    })
}

/// Lower bound on a new seed forming in `B`, multi-edges. `P4` is the closed form
/// `lambda^(k^2) ell^(k(1-delta-gamma/2)) / k^(gamma k^2)`.
pub fn p5_lower_bound_i(p: &BoundParams) -> Result<P5Chain> {
    check_chain_params(p, to_f64(beta_k(p.k)), "beta_k")?;
    let (k, g, dl, l, lam) = (p.k, p.gamma, p.delta, p.ell, p.lambda);
    let kf = k as f64;
    let ln_l = l.ln();
    let e = 1.0 - dl - g / 2.0;
    let p1 = lam * (-g / 2.0 * ln_l).exp();
    let p2 = lam * (e * ln_l).exp();
    let mut q = vec![p2.powf(kf)];
    q.extend((2..=k).map(|_| (lam / kf.powf(g)).powf(kf)));
    let ln_p4 = kf * kf * lam.ln() + kf * e * ln_l - g * kf * kf * kf.ln();
    let b_size = ((1.0 - dl) * ln_l).exp();
    let p5 = 1.0 - (-(ln_p4 + b_size.ln() - kf.ln()).exp()).exp();
    Ok(P5Chain {
        p1,
        p2,
        q,
        p4: ln_p4.exp(),
        b_size,
        p5: p5.clamp(0.0, 1.0),
        ell_exponent: (kf + 1.0) * (1.0 - dl) - kf * g / 2.0,
    })
}

pub fn p5_lower_bound(variant: Variant, p: &BoundParams) -> Result<P5Chain> {
    match variant {
        Variant::W => p5_lower_bound_w(p),
        Variant::I => p5_lower_bound_i(p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceBound {
    /// `T(n)` from the exact recursion.
    pub value: f64,
    /// Levels unrolled before reaching the base case.
    pub depth: u32,
    /// `ell` at or below which the base case `sqrt(ell)` applies.
    pub base_threshold: f64,
    /// `c/2 + log_{1/(1-delta)} 2`
    pub exponent: f64,
}

/// `T(ell) = k + 2 T(ell^(1-delta))` above `(r log^c n)^(1/(1-delta))`, `sqrt(ell)` below.
pub fn recurrence_time_bound(n: f64, delta: f64, c: f64, k: u32, r: f64) -> Result<RecurrenceBound> {
    if !(n > 1.0 && n.is_finite()) {
        return Err(Error::OutOfRange(format!("n {n} must be > 1")));
    }
    recurrence_time_bound_ln(n.ln(), delta, c, k, r)
}

/// `recurrence_time_bound` with `n` given as `ln n`, for sizes beyond `f64`.
pub fn recurrence_time_bound_ln(ln_n: f64, delta: f64, c: f64, k: u32, r: f64) -> Result<RecurrenceBound> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange(format!("delta {delta} outside (0, 1)")));
    }
    if !(r > 0.0 && c >= 0.0 && ln_n > 0.0) {
        return Err(Error::OutOfRange("need r > 0, c >= 0, n > 1".into()));
    }
    let ln_threshold = (r.ln() + c * ln_n.ln()) / (1.0 - delta);
    let (value, depth) = unroll(ln_n, ln_threshold, delta, k);
    Ok(RecurrenceBound {
        value,
        depth,
        base_threshold: ln_threshold.exp(),
        exponent: c / 2.0 + 2f64.ln() / (1.0 / (1.0 - delta)).ln(),
    })
}

/// `T(ell)` for a subsquare of size `ell` inside a graph of size `n` (both as logarithms).
pub fn recurrence_at(ln_ell: f64, ln_n: f64, delta: f64, c: f64, k: u32, r: f64) -> f64 {
    unroll(ln_ell, (r.ln() + c * ln_n.ln()) / (1.0 - delta), delta, k).0
}

fn unroll(mut ln_ell: f64, ln_threshold: f64, delta: f64, k: u32) -> (f64, u32) {
    let mut depth = 0u32;
    while ln_ell > ln_threshold {
        ln_ell *= 1.0 - delta;
        depth += 1;
    }
    // k + 2(k + 2(... + 2 sqrt(base)))
    let mut value = (ln_ell / 2.0).exp();
    for _ in 0..depth {
        value = k as f64 + 2.0 * value;
    }
    (value, depth)
}

/// Polylog exponent `k(k+1)/4 + 1.5` at `gamma = 2`.
pub fn gamma2_exponent(k: u32) -> Result<f64> {
    if k < 2 {
        return Err(Error::OutOfRange(format!("k = {k} must be >= 2")));
    }
    Ok((k * (k + 1)) as f64 / 4.0 + 1.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Z1Branch {
    /// `gamma < 2/k`
    Flat,
    /// `gamma = 2/k`
    Logarithmic,
    /// `2/k < gamma < 2`
    Steep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZBounds {
    pub z1_branch: Z1Branch,
    /// `Z1 = O(log-factor / n^z1_exponent)`
    pub z1_exponent: f64,
    pub z1_order: f64,
    pub z2_exponent: f64,
    pub z2_order: f64,
    /// Largest admissible `delta` for both orders to be `O(1/n^(1-eps))`.
    pub delta_max: f64,
}

pub fn z_expectation_bounds(n: f64, gamma: f64, k: u32, delta: f64, eps: f64) -> Result<ZBounds> {
    if !(0.0..2.0).contains(&gamma) {
        return Err(Error::OutOfRange(format!("gamma {gamma} outside [0, 2)")));
    }
    if k == 0 || !(n > 1.0) {
        return Err(Error::OutOfRange("need k >= 1 and n > 1".into()));
    }
    let kf = k as f64;
    let crit = 2.0 / kf;
    let steep = kf * (0.5 - delta) * (2.0 - gamma) - 2.0 * delta;
    let flat = kf - 1.0 - 2.0 * kf * delta;
    let (z1_branch, z1_exponent, z1_order) = match position_f64(gamma, crit) {
        Position::Below => (Z1Branch::Flat, flat, n.powf(-flat)),
        Position::At => (Z1Branch::Logarithmic, flat, n.ln() * n.powf(-flat)),
        Position::Above => (Z1Branch::Steep, steep, n.powf(-steep)),
    };
    let delta_max =
        ((kf - 2.0 + eps / 2.0) / (2.0 * kf)).min((kf - gamma / 2.0 - 1.0 + eps) / (2.0 + 2.0 * kf - kf * gamma));
    Ok(ZBounds { z1_branch, z1_exponent, z1_order, z2_exponent: steep, z2_order: n.powf(-steep), delta_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeavySubsetBound {
    /// `n^(1 - (1/2 - eps) gamma)`
    pub p1_order: f64,
    /// `p1^C(k+1,2)`
    pub p2_order: f64,
    /// `sum_{i >= C(k+1,2)} binom(m(k^2-k+1), i) p1^i`
    pub p2_sum: f64,
    /// Power of `n` in the `P3` order.
    pub p3_exponent: f64,
    /// `n^p3_exponent * log^(k^2-k) n`
    pub p3_order: f64,
    /// Open interval of admissible `zeta`.
    pub zeta_range: (f64, f64),
}

/// Lower end `1 + C(k+1,2)(1 - (1/2 - eps) gamma)` of the admissible `zeta` interval `(lo, 0)`.
pub fn zeta_lower(k: u32, gamma: f64, eps: f64) -> f64 {
    1.0 + binom2(k) as f64 * (1.0 - (0.5 - eps) * gamma)
}

/// Exact form of `zeta_lower` at `eps = 0`, its smallest value over admissible `eps`.
pub fn zeta_lower_exact(k: u32, gamma: Rational) -> Rational {
    Ratio::from_integer(1) + Ratio::from_integer(binom2(k)) * (Ratio::from_integer(1) - gamma / 2)
}

/// Whether some admissible `eps` leaves a nonempty `zeta` interval.
pub fn zeta_interval_nonempty(k: u32, gamma: Rational) -> bool {
    zeta_lower_exact(k, gamma) < Ratio::from_integer(0)
}

pub fn heavy_subset_probability_bound(n: f64, gamma: f64, k: u32, eps: f64, m: u32) -> Result<HeavySubsetBound> {
    if k == 0 || !(n > 1.0) {
        return Err(Error::OutOfRange("need k >= 1 and n > 1".into()));
    }
    let alpha = to_f64(alpha_k(k));
    if !(gamma > alpha) {
        return Err(Error::OutOfRange(format!("gamma {gamma} must exceed alpha_k = {alpha}")));
    }
    let eps_max = (1.0 - alpha / gamma) / 2.0;
    if !(eps > 0.0 && eps < eps_max) {
        return Err(Error::OutOfRange(format!("eps {eps} outside (0, {eps_max})")));
    }
    let c = binom2(k) as u64;
    let ln_n = n.ln();
    let p1_exp = 1.0 - (0.5 - eps) * gamma;
    let p1 = n.powf(p1_exp);
    let size = m as u64 * (k as u64 * k as u64 - k as u64 + 1);
    let mut p2_sum = 0.0;
    let mut binom = 1.0f64;
    for i in 0..=size {
        if i > 0 {
            binom = binom * (size - i + 1) as f64 / i as f64;
        }
        if i >= c {
            p2_sum += binom * p1.powi(i as i32);
        }
    }
    let p3_exponent = 1.0 + c as f64 * p1_exp;
    Ok(HeavySubsetBound {
        p1_order: p1,
        p2_order: p1.powi(c as i32),
        p2_sum,
        p3_exponent,
        p3_order: n.powf(p3_exponent) * ln_n.powi((k * k - k) as i32),
        zeta_range: (zeta_lower(k, gamma, eps), 0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r_squared: f64,
}

/// Least-squares slope of `ln T` against `ln n`.
pub fn fit_scaling_exponent(samples: &[(f64, f64)]) -> Result<ScalingFit> {
    if samples.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 samples, got {}", samples.len())));
    }
    if let Some(&(n, t)) = samples.iter().find(|&&(n, t)| !(n > 0.0 && t > 0.0 && n.is_finite() && t.is_finite())) {
        return Err(Error::Fit(format!("sample ({n}, {t}) must be positive and finite")));
    }
    let mut ns: Vec<f64> = samples.iter().map(|s| s.0).collect();
    ns.sort_by(f64::total_cmp);
    if ns.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Fit("sizes must be distinct".into()));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>().max(0.0);
    let stderr = (sse / (len - 2.0) / sxx).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(ScalingFit { exponent: slope, intercept, stderr, r_squared })
}
