//! Closed-form laws, bounds and grids used as reference values.
//!
//! Everything here is pure. Functions that take parameters outside their
//! domain return an error instead of extrapolating.

use std::f64::consts::{E, PI};

use serde::Serialize;

use crate::error::{Error, Result};

fn positive(what: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::param(format!(
            "{what} must be positive and finite, got {x}"
        )))
    }
}

fn non_negative(what: &str, x: f64) -> Result<f64> {
    if x >= 0.0 && !x.is_nan() {
        Ok(x)
    } else {
        Err(Error::param(format!(
            "{what} must be non-negative, got {x}"
        )))
    }
}

/// `g(r) = r·ln ln(1/r)` on `(0, 1/e)`.
pub fn gauge(r: f64) -> Result<f64> {
    if r > 0.0 && r < (-1.0f64).exp() {
        Ok(r * (1.0 / r).ln().ln())
    } else {
        Err(Error::GaugeDomain(r))
    }
}

/// Right end of the interval `(0, r*)` on which `g` is increasing.
///
/// `g′(r) = ln ln(1/r) − 1/ln(1/r)` vanishes at `ln(1/r)·ln ln(1/r) = 1`, so
/// `g` decreases on `(r*, 1/e)`. Found by bisection on `L ln L = 1`.
pub fn gauge_increasing_below() -> f64 {
    let (mut lo, mut hi) = (1.0f64, 3.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid * mid.ln() < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (-0.5 * (lo + hi)).exp()
}

/// `N(sup e > a) = 1/a`.
pub fn sup_tail(a: f64) -> Result<f64> {
    Ok(1.0 / positive("level", a)?)
}

/// `N(sup e > a | sup e > m) = m/a` for `a ≥ m`.
pub fn conditional_sup_tail(m: f64, a: f64) -> Result<f64> {
    positive("level", m)?;
    positive("level", a)?;
    if a < m {
        return Err(Error::param("conditional tail needs a >= m"));
    }
    Ok(m / a)
}

/// Density of the lifetime under `N`: `r^{−3/2} / (2√π)`.
pub fn zeta_density(r: f64) -> Result<f64> {
    let r = positive("duration", r)?;
    Ok(r.powf(-1.5) / (2.0 * PI.sqrt()))
}

/// `N(ζ > r) = 1/√(π r)`.
pub fn zeta_tail(r: f64) -> Result<f64> {
    let r = positive("duration", r)?;
    Ok(1.0 / (PI * r).sqrt())
}

/// `N(1 − exp(−λ ℓ^a)) = λ/(1 + aλ)`; `λ = ∞` gives `1/a`.
pub fn level_mass_laplace(a: f64, lambda: f64) -> Result<f64> {
    let a = positive("level", a)?;
    let lambda = non_negative("lambda", lambda)?;
    if lambda.is_infinite() {
        return Ok(1.0 / a);
    }
    Ok(lambda / (1.0 + a * lambda))
}

/// CDF of the exponential law with the given mean.
pub fn exponential_cdf(mean: f64, y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        1.0 - (-y / mean).exp()
    }
}

/// `N_a(Z_{a,r} = k) = (1 − r/2a)^{k−1}·(r/2a)`.
pub fn ball_count_pmf(a: f64, r: f64, k: u64) -> Result<f64> {
    let p = ball_count_success(a, r)?;
    if k == 0 {
        return Ok(0.0);
    }
    Ok((1.0 - p).powf((k - 1) as f64) * p)
}

/// Success probability `r/(2a)` of the geometric ball count.
pub fn ball_count_success(a: f64, r: f64) -> Result<f64> {
    positive("level", a)?;
    positive("radius", r)?;
    if r > 2.0 * a {
        return Err(Error::param("radius must not exceed twice the level"));
    }
    Ok(r / (2.0 * a))
}

fn band(r_inner: f64, r_outer: f64) -> Result<f64> {
    non_negative("inner radius", r_inner)?;
    positive("outer radius", r_outer)?;
    if r_inner > r_outer {
        return Err(Error::param("inner radius exceeds outer radius"));
    }
    Ok(r_inner / r_outer)
}

/// `P(Λ*_{r′,r} > y)` for `y ≥ 0`.
pub fn lambda_star_tail(r_inner: f64, r_outer: f64, y: f64) -> Result<f64> {
    let rho = band(r_inner, r_outer)?;
    let y = non_negative("y", y)?;
    let x = 2.0 * y / r_outer;
    Ok((1.0 - rho).powi(2) * x * (-x).exp() + (1.0 - rho * rho) * (-x).exp())
}

/// `P(Λ*_{r′,r} = 0) = (r′/r)²`.
pub fn lambda_star_atom(r_inner: f64, r_outer: f64) -> Result<f64> {
    Ok(band(r_inner, r_outer)?.powi(2))
}

/// `P(Λ*_{r′,r} ≤ y)`; infinite `y` gives 1.
pub fn lambda_star_cdf(r_inner: f64, r_outer: f64, y: f64) -> Result<f64> {
    if y < 0.0 {
        band(r_inner, r_outer)?;
        return Ok(0.0);
    }
    if y.is_infinite() {
        band(r_inner, r_outer)?;
        return Ok(1.0);
    }
    Ok(1.0 - lambda_star_tail(r_inner, r_outer, y)?)
}

/// `E[Λ*_{r′,r}] = r − r′`.
pub fn lambda_star_mean(r_inner: f64, r_outer: f64) -> Result<f64> {
    band(r_inner, r_outer)?;
    Ok(r_outer - r_inner)
}

/// `E[exp(−λ Y_a) | Y_0 = x] = exp(−λx/(1 + aλ))`.
pub fn feller_laplace(x: f64, a: f64, lambda: f64) -> Result<f64> {
    let x = non_negative("initial mass", x)?;
    let a = non_negative("time", a)?;
    let lambda = non_negative("lambda", lambda)?;
    Ok((-lambda * x / (1.0 + a * lambda)).exp())
}

/// `P(Y_t = 0 | Y_0 = x) = exp(−x/t)`.
pub fn feller_extinction(x: f64, t: f64) -> Result<f64> {
    let x = non_negative("initial mass", x)?;
    let t = positive("time", t)?;
    Ok((-x / t).exp())
}

/// Upper bounds on `P(inf_{[0,a]} Y ≤ y)` (when `y ≤ x`) and on
/// `P(sup_{[0,a]} Y ≥ y)` (when `y ≥ x`), both `exp(−(√x − √y)²/a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingBounds {
    pub inf_bound: Option<f64>,
    pub sup_bound: Option<f64>,
}

pub fn feller_hitting_bounds(x: f64, y: f64, a: f64) -> Result<HittingBounds> {
    let x = non_negative("initial mass", x)?;
    let y = non_negative("threshold", y)?;
    let a = positive("time", a)?;
    let value = (-(x.sqrt() - y.sqrt()).powi(2) / a).exp();
    Ok(HittingBounds {
        inf_bound: (y <= x).then_some(value),
        sup_bound: (y >= x).then_some(value),
    })
}

/// `N(sup_{a ≥ m} ℓ^a(T) > y) ≤ (2/m)·exp(−my/2)`.
pub fn sup_level_mass_bound(m: f64, y: f64) -> Result<f64> {
    let m = positive("level", m)?;
    let y = non_negative("y", y)?;
    Ok(2.0 / m * (-m * y / 2.0).exp())
}

/// `λ(r,κ,c) = exp(−2(κ/c)·L)·(2(κ/c)·L + 1)` with `L = ln ln(1/r)`.
///
/// This is `(2/r)·E[𝓔; 𝓔 > κ g(r)/c]` for `𝓔` exponential with mean `r/2`.
pub fn heavy_ball_intensity(r: f64, kappa: f64, c: f64) -> Result<f64> {
    let g = gauge(r)?;
    let kappa = non_negative("kappa", kappa)?;
    let c = positive("c", c)?;
    let x = 2.0 * kappa / c * (g / r);
    Ok((-x).exp() * (x + 1.0))
}

/// Upper bound `(5/r_n)·√(Π_k P(Λ*_{r_{k+1}, r_k} ≤ ε_k))` on the mean
/// number of small balls.
pub fn small_ball_mu_bound(radii: &[f64], thresholds: &[f64]) -> Result<f64> {
    check_small_ball_params(radii, thresholds)?;
    let mut product = 1.0;
    for (k, &eps) in thresholds.iter().enumerate() {
        product *= lambda_star_cdf(radii[k + 1], radii[k], eps)?;
    }
    Ok(5.0 / radii[radii.len() - 1] * product.sqrt())
}

/// Radii strictly decreasing and positive; one threshold per consecutive
/// pair, non-increasing, non-negative.
pub fn check_small_ball_params(radii: &[f64], thresholds: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::param("at least one radius is required"));
    }
    if thresholds.len() + 1 != radii.len() {
        return Err(Error::param(format!(
            "{} radii need {} thresholds, got {}",
            radii.len(),
            radii.len() - 1,
            thresholds.len()
        )));
    }
    for &r in radii {
        positive("radius", r)?;
    }
    if radii.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::param("radii must be strictly decreasing"));
    }
    for &e in thresholds {
        non_negative("threshold", e)?;
    }
    if thresholds.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::param("thresholds must be non-increasing"));
    }
    Ok(())
}

/// Universal constant of the fourth-moment bound.
pub const FOURTH_MOMENT_C0: f64 = 1.0e4;

/// `c₀·a·r₁²/r_n⁴`.
pub fn fourth_moment_bound(a: f64, r_first: f64, r_last: f64) -> Result<f64> {
    let a = positive("level", a)?;
    let r1 = positive("radius", r_first)?;
    let rn = positive("radius", r_last)?;
    Ok(FOURTH_MOMENT_C0 * a * r1 * r1 / rn.powi(4))
}

/// `j_p = ⌊(4/3)^p⌋`, computed exactly.
pub fn j_index(p: u32) -> Result<u64> {
    if p > 60 {
        return Err(Error::param("p must be at most 60"));
    }
    let q = 4u128.pow(p) / 3u128.pow(p);
    Ok(q as u64)
}

/// `r_j = 2^{−j}`.
pub fn dyadic_radius(j: u64) -> f64 {
    (-(j as f64)).exp2()
}

/// Level grids on `[m, 1/m]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GridSpec {
    /// Points `m + kΔ`, `k ≥ 1`, with `Δ = r^{3/2}`.
    Large { r: f64, m: f64, mesh: f64 },
    /// Points `m + kΔ`, `k ≥ 1`, with `Δ = r(j_{p+1})^{5/4}`, together with
    /// the radii `r_j` for `j_p ≤ j < j_{p+1}` and thresholds `g(r_j)` for
    /// `j_p ≤ j < j_{p+1} − 1`.
    Small {
        p: u32,
        m: f64,
        j_p: u64,
        j_next: u64,
        mesh: f64,
    },
}

fn check_m(m: f64) -> Result<f64> {
    if m > 0.0 && m < 0.5 {
        Ok(m)
    } else {
        Err(Error::param(format!(
            "grid parameter m must lie in (0, 1/2), got {m}"
        )))
    }
}

impl GridSpec {
    pub fn large(r: f64, m: f64) -> Result<Self> {
        let r = positive("radius", r)?;
        let m = check_m(m)?;
        Ok(GridSpec::Large {
            r,
            m,
            mesh: r.powf(1.5),
        })
    }

    pub fn small(p: u32, m: f64) -> Result<Self> {
        let m = check_m(m)?;
        let j_p = j_index(p)?;
        let j_next = j_index(p + 1)?;
        Ok(GridSpec::Small {
            p,
            m,
            j_p,
            j_next,
            mesh: dyadic_radius(j_next).powf(1.25),
        })
    }

    pub fn m(&self) -> f64 {
        match *self {
            GridSpec::Large { m, .. } | GridSpec::Small { m, .. } => m,
        }
    }

    pub fn mesh(&self) -> f64 {
        match *self {
            GridSpec::Large { mesh, .. } | GridSpec::Small { mesh, .. } => mesh,
        }
    }

    /// `(m·Δ)^{−1}`, which strictly exceeds the number of points.
    pub fn point_count_bound(&self) -> f64 {
        1.0 / (self.m() * self.mesh())
    }

    pub fn len(&self) -> usize {
        let (m, mesh) = (self.m(), self.mesh());
        ((1.0 / m - m) / mesh).floor() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let (m, mesh) = (self.m(), self.mesh());
        (1..=self.len()).map(move |k| m + k as f64 * mesh)
    }

    /// Radii `r_j`, `j_p ≤ j < j_{p+1}` (empty for the large-ball grid).
    pub fn radii(&self) -> Vec<f64> {
        match *self {
            GridSpec::Large { .. } => Vec::new(),
            GridSpec::Small { j_p, j_next, .. } => (j_p..j_next).map(dyadic_radius).collect(),
        }
    }

    /// Thresholds `g(r_j)`, `j_p ≤ j < j_{p+1} − 1`.
    pub fn thresholds(&self) -> Result<Vec<f64>> {
        match *self {
            GridSpec::Large { .. } => Ok(Vec::new()),
            GridSpec::Small { j_p, j_next, .. } => (j_p..j_next.saturating_sub(1))
                .map(|j| gauge(dyadic_radius(j)))
                .collect(),
        }
    }

    /// Distinct lattice levels (in units of `h`) nearest to the grid points.
    pub fn lattice_levels(&self, h: f64) -> Vec<u32> {
        let mut levels: Vec<u32> = self.points().map(|x| (x / h).round() as u32).collect();
        levels.dedup();
        levels
    }
}

/// `e^{−e}`, where `ln ln(1/r) = 1`.
pub fn unit_loglog_radius() -> f64 {
    (-E).exp()
}
