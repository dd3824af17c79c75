//! Gauge coverings, ball censuses and density ratios on level sets.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::excursion::{lattice_units, ConditionedSampler, LatticeExcursion};
use crate::geometry::{LevelView, TreeIndex};
use crate::laws::{self, gauge};
use crate::report::{Check, Provenance, TestRecord};
use crate::rng::{derive_seed, replicate};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMode {
    /// `Σ g(diam Γ_i)`, with zero diameters floored at `g(h)`.
    Diameter,
    /// `Σ g(r)`, i.e. `Z_{a,r}·g(r)`.
    Radius,
}

/// `(visits, diameter)` of the `T(a)`-balls of half-radius `k` lattice units.
/// For `k` beyond the level the whole level is a single ball.
fn cover(view: &LevelView<'_, '_>, k: u32) -> Vec<(u64, f64)> {
    let visits = view.visits();
    if visits.is_empty() {
        return Vec::new();
    }
    if k > view.level() {
        let idx = view.index();
        let (first, last) = (visits[0], visits[visits.len() - 1]);
        let m = idx.min_height(first, last);
        let diam = 2.0 * f64::from(view.level() - m) * idx.step();
        return vec![(visits.len() as u64, diam)];
    }
    view.decomposition_units(k)
        .balls
        .iter()
        .map(|b| (b.visits, b.diameter))
        .collect()
}

fn radius_units(view: &LevelView<'_, '_>, r: f64) -> Result<u32> {
    let k = lattice_units("radius/2", r / 2.0, view.index().step())?;
    if k == 0 {
        return Err(Error::param("radius must be at least two lattice steps"));
    }
    Ok(k)
}

fn gauge_sum(balls: &[(u64, f64)], r: f64, h: f64, mode: CoverMode) -> Result<f64> {
    match mode {
        CoverMode::Radius => Ok(balls.len() as f64 * gauge(r)?),
        CoverMode::Diameter => {
            let floor = gauge(h)?;
            balls
                .iter()
                .map(|&(_, d)| if d > 0.0 { gauge(d) } else { Ok(floor) })
                .sum()
        }
    }
}

/// Gauge sum of the `T(a)`-ball cover at radius `r`.
///
/// Both modes need `r < 1/e`; the diameter mode also evaluates `g(h)`.
pub fn covering_sum(idx: &TreeIndex<'_>, a: f64, r: f64, mode: CoverMode) -> Result<f64> {
    gauge(r)?;
    let view = idx.level(a)?;
    let k = radius_units(&view, r)?;
    gauge_sum(&cover(&view, k), r, idx.step(), mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioRow {
    pub radius: f64,
    pub balls: usize,
    pub max_diameter: f64,
    pub diameter_sum: f64,
    pub radius_sum: f64,
    /// `diameter_sum / ℓ̂^a(T)`.
    pub ratio_diameter: f64,
    /// `radius_sum / ℓ̂^a(T)`.
    pub ratio_radius: f64,
}

/// `R(a, r)` for each radius, in both cover modes.
pub fn hausdorff_ratio_scan(idx: &TreeIndex<'_>, a: f64, radii: &[f64]) -> Result<Vec<RatioRow>> {
    let view = idx.level(a)?;
    ratio_rows(&view, radii)
}

fn ratio_rows(view: &LevelView<'_, '_>, radii: &[f64]) -> Result<Vec<RatioRow>> {
    let mass = view.total_mass();
    if mass <= 0.0 {
        return Err(Error::param(format!(
            "covering ratio undefined: level {} carries no local time",
            view.height()
        )));
    }
    let h = view.index().step();
    radii
        .iter()
        .map(|&r| {
            gauge(r)?;
            let balls = cover(view, radius_units(view, r)?);
            let diameter_sum = gauge_sum(&balls, r, h, CoverMode::Diameter)?;
            let radius_sum = gauge_sum(&balls, r, h, CoverMode::Radius)?;
            Ok(RatioRow {
                radius: r,
                balls: balls.len(),
                max_diameter: balls.iter().map(|b| b.1).fold(0.0, f64::max),
                diameter_sum,
                radius_sum,
                ratio_diameter: diameter_sum / mass,
                ratio_radius: radius_sum / mass,
            })
        })
        .collect()
}

/// `ℓ̂^a(𝓛_{a,r,y})`: total mass of the balls with mass `> y`.
pub fn heavy_ball_census(idx: &TreeIndex<'_>, a: f64, r: f64, y: f64) -> Result<f64> {
    if y.is_nan() || y < 0.0 {
        return Err(Error::param("mass threshold must be non-negative"));
    }
    Ok(idx
        .ball_decomposition(a, r)?
        .balls
        .iter()
        .filter(|b| b.mass > y)
        .map(|b| b.mass)
        .sum())
}

/// `S_{a,r,ε}`: the number of `r_n`-balls whose enlarged balls `Γ[r_k]` have
/// mass `≤ ε_k` for every `k < n`.
pub fn small_ball_census(
    idx: &TreeIndex<'_>,
    a: f64,
    radii: &[f64],
    thresholds: &[f64],
) -> Result<u64> {
    laws::check_small_ball_params(radii, thresholds)?;
    let chain = idx.enlarged_ball_chain(a, radii)?;
    let n = chain.finest().count();
    Ok((0..n)
        .filter(|&i| {
            thresholds
                .iter()
                .enumerate()
                .all(|(k, &eps)| chain.enlarged_mass(i, k) <= eps)
        })
        .count() as u64)
}

/// Per-point ratios `ℓ̂^a(B(σ, r)) / g(r)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    pub radii: Vec<f64>,
    pub points: Vec<usize>,
    /// `ratios[i][k]` for point `i` and radius `k`.
    pub ratios: Vec<Vec<f64>>,
}

impl DensityProfile {
    /// Fraction of points whose ratio stays `< alpha` at every radius.
    pub fn fraction_below(&self, alpha: f64) -> f64 {
        self.fraction(|row| row.iter().all(|&x| x < alpha))
    }

    /// Fraction of points whose ratio stays `> kappa` at every radius.
    pub fn fraction_above(&self, kappa: f64) -> f64 {
        self.fraction(|row| row.iter().all(|&x| x > kappa))
    }

    fn fraction(&self, pred: impl Fn(&[f64]) -> bool) -> f64 {
        if self.ratios.is_empty() {
            return 0.0;
        }
        self.ratios.iter().filter(|r| pred(r)).count() as f64 / self.ratios.len() as f64
    }
}

/// Density ratios at the given level-`a` time indices. Sampling the points
/// uniformly among the level visits makes point fractions `ℓ̂^a`-mass
/// fractions.
pub fn density_ratio_profile(
    idx: &TreeIndex<'_>,
    a: f64,
    points: &[usize],
    radii: &[f64],
) -> Result<DensityProfile> {
    let view = idx.level(a)?;
    let hs = idx.excursion().heights();
    let mut units = Vec::with_capacity(radii.len());
    for &r in radii {
        let k = radius_units(&view, r)?;
        units.push((k.min(view.level()), gauge(r)?));
    }
    let mut ratios = Vec::with_capacity(points.len());
    for &t in points {
        if t >= hs.len() {
            return Err(Error::IndexOutOfRange {
                index: t,
                len: hs.len(),
            });
        }
        if hs[t] != view.level() {
            return Err(Error::NotAtLevel {
                index: t,
                expected: view.level(),
                found: hs[t],
            });
        }
        ratios.push(
            units
                .iter()
                .map(|&(k, g)| view.ball_around(t, k).mass / g)
                .collect(),
        );
    }
    Ok(DensityProfile {
        radii: radii.to_vec(),
        points: points.to_vec(),
        ratios,
    })
}

/// Ratios for every visit of the level at once, in `O(V)` per radius.
fn all_visit_ratios(view: &LevelView<'_, '_>, units: &[(u32, f64)]) -> Vec<Vec<f64>> {
    let v = view.visits().len();
    let mut ratios = vec![Vec::with_capacity(units.len()); v];
    for &(k, g) in units {
        let mut i = 0;
        for ball in view.decomposition_units(k).balls {
            let ratio = ball.mass / g;
            for _ in 0..ball.visits {
                ratios[i].push(ratio);
                i += 1;
            }
        }
    }
    ratios
}

/// Census fields for one `(level, radius)`, a row of the census CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CensusResult {
    pub schema: u32,
    pub replicate: usize,
    pub level: f64,
    pub radius: f64,
    pub total_mass: f64,
    pub balls: usize,
    pub heavy_threshold: f64,
    pub heavy_mass: f64,
    pub covering_diameter: f64,
    pub covering_radius: f64,
}

pub const CENSUS_SCHEMA: u32 = 1;

/// Census at one level for each radius, with heavy threshold `κ g(r)`.
pub fn census_rows(
    idx: &TreeIndex<'_>,
    replicate: usize,
    level: u32,
    radii: &[f64],
    kappa: f64,
) -> Result<Vec<CensusResult>> {
    let view = idx.level_units(level);
    let h = idx.step();
    let total = view.total_mass();
    radii
        .iter()
        .map(|&r| {
            let k = radius_units(&view, r)?;
            let y = kappa * gauge(r)?;
            let (balls, heavy): (usize, f64) = if view.visits().is_empty() {
                (0, 0.0)
            } else if k > view.level() {
                (1, if total > y { total } else { 0.0 })
            } else {
                let d = view.decomposition_units(k);
                let heavy = d.balls.iter().filter(|b| b.mass > y).map(|b| b.mass).sum();
                (d.count(), heavy)
            };
            let c = cover(&view, k);
            Ok(CensusResult {
                schema: CENSUS_SCHEMA,
                replicate,
                level: view.height(),
                radius: r,
                total_mass: total,
                balls,
                heavy_threshold: y,
                heavy_mass: heavy,
                covering_diameter: gauge_sum(&c, r, h, CoverMode::Diameter)?,
                covering_radius: gauge_sum(&c, r, h, CoverMode::Radius)?,
            })
        })
        .collect()
}

pub fn write_census_csv<W: Write>(rows: &[CensusResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourthMomentParams {
    pub a: f64,
    pub radii: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub h: f64,
    pub replicates: usize,
}

impl Default for FourthMomentParams {
    fn default() -> Self {
        Self {
            a: 2.0,
            radii: vec![0.5, 0.25, 0.125],
            thresholds: vec![0.25, 0.1],
            h: 1.0 / 64.0,
            replicates: 20_000,
        }
    }
}

fn small_ball_sampler(h: f64, a: f64, r_first: f64) -> Result<ConditionedSampler> {
    let ja = lattice_units("level", a, h)?;
    let kb = lattice_units("radius/2", r_first / 2.0, h)?;
    ConditionedSampler::with_levels(h, ja)?
        .ceiling_level(ja)?
        .floor_level(ja.saturating_sub(kb))
}

fn small_and_mass(exc: &LatticeExcursion, a: f64, radii: &[f64], thresholds: &[f64]) -> (f64, f64) {
    let idx = TreeIndex::new(exc);
    let s = small_ball_census(&idx, a, radii, thresholds).expect("validated parameters");
    let mass = idx.level(a).expect("validated level").total_mass();
    (s as f64, mass)
}

/// Fourth-moment and mean checks for the small-ball count.
///
/// `μ̂ = N[S_{r₁/2, r, ε}]` is estimated from an independent batch under
/// `N_{r₁/2}` (`N[X] = (2/r₁)·E_{N_{r₁/2}}[X]`), then
/// `N[(S_{a,r,ε} − μ̂ ℓ̂^a(T))⁴] = (1/a)·E_{N_a}[…]` is compared with
/// `c₀ a r₁²/r_n⁴`. The same batches check the centred fourth-moment
/// inequality for one summand and the analytic bound on `μ`.
pub fn fourth_moment_census_check(p: &FourthMomentParams, seed: u64) -> Result<Vec<TestRecord>> {
    laws::check_small_ball_params(&p.radii, &p.thresholds)?;
    let r1 = p.radii[0];
    let rn = *p.radii.last().expect("validated");
    if p.a <= r1 {
        return Err(Error::param("the fourth-moment bound needs a > r_1"));
    }
    if r1 <= 2.0 * rn {
        return Err(Error::param("the fourth-moment bound needs r_1 > 2 r_n"));
    }
    if p.replicates < 2 {
        return Err(Error::param("replicates must be at least 2"));
    }
    let a1 = r1 / 2.0;
    let base = small_ball_sampler(p.h, a1, r1)?;
    let main = small_ball_sampler(p.h, p.a, r1)?;
    for r in &p.radii {
        lattice_units("radius/2", r / 2.0, p.h)?;
    }

    let key = derive_seed(seed, "measure.fourth_moment.mu");
    let base_s: Vec<f64> = replicate(key, p.replicates, |_, rng| {
        small_and_mass(&base.sample(rng), a1, &p.radii, &p.thresholds).0
    });
    let (mean_s, se_s) = stats::mean_se(&base_s)?;
    let mu_hat = mean_s / a1;
    let mu_se = se_s / a1;

    let key = derive_seed(seed, "measure.fourth_moment.main");
    let centred: Vec<f64> = replicate(key, p.replicates, |_, rng| {
        let (s, m) = small_and_mass(&main.sample(rng), p.a, &p.radii, &p.thresholds);
        (s - mu_hat * m).powi(4)
    });
    let (m4, se4) = stats::mean_se(&centred)?;
    let n = p.replicates;
    let mut records = vec![TestRecord::new(
        "census.fourth_moment",
        "laws::fourth_moment_bound",
        Provenance::ClosedForm,
        "n_fourth_moment",
        m4 / p.a,
        Check::AtMost {
            bound: laws::fourth_moment_bound(p.a, r1, rn)?,
            slack: 3.0 * se4 / p.a,
        },
        n,
        seed,
    )
    .with_note(format!("mu_hat = {mu_hat:.5} ± {mu_se:.5}"))];

    let c4: Vec<f64> = base_s.iter().map(|s| (s - mean_s).powi(4)).collect();
    let raw4: Vec<f64> = base_s.iter().map(|s| s.powi(4)).collect();
    let (c4m, _) = stats::mean_se(&c4)?;
    let (r4m, r4se) = stats::mean_se(&raw4)?;
    records.push(TestRecord::new(
        "census.centred_fourth_moment",
        "measure::centred_moment_inequality",
        Provenance::ClosedForm,
        "centred_fourth_moment",
        c4m,
        Check::AtMost {
            bound: 2.0 * r4m,
            slack: 6.0 * r4se,
        },
        n,
        seed,
    ));

    records.push(TestRecord::new(
        "census.small_ball_mean",
        "laws::small_ball_mu_bound",
        Provenance::ClosedForm,
        "mu_hat",
        mu_hat,
        Check::AtMost {
            bound: laws::small_ball_mu_bound(&p.radii, &p.thresholds)?,
            slack: 3.0 * mu_se,
        },
        n,
        seed,
    ));
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupMassParams {
    pub m: f64,
    pub ys: Vec<f64>,
    pub h: f64,
    /// Levels above this are compressed away; see [`sup_level_mass_check`].
    pub ceiling: f64,
    pub replicates: usize,
}

impl Default for SupMassParams {
    fn default() -> Self {
        Self {
            m: 0.25,
            ys: vec![1.0, 2.0, 4.0, 8.0],
            h: 1.0 / 32.0,
            ceiling: 16.0,
            replicates: 20_000,
        }
    }
}

/// One-sided check of `N(sup_{b ≥ m} ℓ^b(T) > y) ≤ (2/m) e^{−my/2}`.
///
/// Levels above the ceiling `C` are not simulated. The missed event needs
/// `sup e > C`, so the estimate is low by at most `N(sup e > C) = 1/C`,
/// which is printed with each record.
pub fn sup_level_mass_check(p: &SupMassParams, seed: u64) -> Result<Vec<TestRecord>> {
    let jm = lattice_units("level", p.m, p.h)?;
    let jc = lattice_units("ceiling", p.ceiling, p.h)?;
    if jm == 0 || jc < jm {
        return Err(Error::param("need 0 < m <= ceiling"));
    }
    if p.replicates < 2 {
        return Err(Error::param("replicates must be at least 2"));
    }
    let sampler = ConditionedSampler::with_levels(p.h, jm)?
        .floor_level(jm)?
        .ceiling_level(jc)?;
    let key = derive_seed(seed, "measure.sup_level_mass");
    let sups: Vec<f64> = replicate(key, p.replicates, |_, rng| {
        let exc = sampler.sample(rng);
        let profile = crate::excursion::local_time_profile(&exc);
        profile
            .masses()
            .filter(|&(j, _)| j >= jm && j <= jc)
            .map(|(_, m)| m)
            .fold(0.0, f64::max)
    });
    let n = sups.len();
    let mut records = Vec::new();
    for &y in &p.ys {
        let frac = sups.iter().filter(|&&s| s > y).count() as f64 / n as f64;
        // N(·) = (1/m)·N_m(·) on events that force sup e > m.
        let est = frac / p.m;
        let se = stats::proportion_se(frac.max(1.0 / n as f64), n) / p.m;
        records.push(
            TestRecord::new(
                format!("census.sup_level_mass[m={},y={y}]", p.m),
                "laws::sup_level_mass_bound",
                Provenance::ClosedForm,
                "n_measure",
                est,
                Check::AtMost {
                    bound: laws::sup_level_mass_bound(p.m, y)?,
                    slack: 3.0 * se,
                },
                n,
                seed,
            )
            .with_note(format!(
                "levels above {} omitted, bias <= {}",
                p.ceiling,
                1.0 / p.ceiling
            )),
        );
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeavyBallParams {
    pub a: f64,
    pub r: f64,
    /// `κ/c`; the mass threshold is `y = (κ/c)·g(r)`.
    pub kappa_over_c: f64,
    pub h: f64,
    pub replicates: usize,
}

impl Default for HeavyBallParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            r: 1.0 / 16.0,
            kappa_over_c: 1.0,
            h: 1.0 / 128.0,
            replicates: 20_000,
        }
    }
}

/// `E_{N_a}[ℓ̂^a(𝓛_{a,r,y})]` against `λ(r,κ,c)·a`.
///
/// On the lattice the ball masses are `(h/2)·G` with `G` geometric on
/// `{1, 2, …}` with mean `r/h`, so the exact lattice expectation is also
/// computed; its distance to the continuum value is the discretization
/// budget added to the Monte Carlo tolerance.
pub fn heavy_ball_check(p: &HeavyBallParams, seed: u64) -> Result<Vec<TestRecord>> {
    let ja = lattice_units("level", p.a, p.h)?;
    let k = lattice_units("radius/2", p.r / 2.0, p.h)?;
    if ja == 0 || k == 0 || k > ja {
        return Err(Error::param("need 0 < r <= 2a on the lattice"));
    }
    if p.replicates < 2 {
        return Err(Error::param("replicates must be at least 2"));
    }
    let y = p.kappa_over_c * gauge(p.r)?;
    let exact = laws::heavy_ball_intensity(p.r, p.kappa_over_c, 1.0)? * p.a;

    // Lattice oracle: (2a/r)·E[(h/2)G; (h/2)G > y].
    let q = 1.0 - p.h / p.r;
    let g0 = (y / (p.h / 2.0)).floor() as i32;
    // Σ_{g > g0} g (1−q) q^{g−1} = q^{g0} (g0 + 1/(1−q)).
    let tail_mean = q.powi(g0) * (f64::from(g0) + 1.0 / (1.0 - q));
    let lattice = 2.0 * p.a / p.r * (p.h / 2.0) * tail_mean;

    let sampler = ConditionedSampler::with_levels(p.h, ja)?
        .ceiling_level(ja)?
        .floor_level(ja - k)?;
    let key = derive_seed(seed, "measure.heavy_ball");
    let heavy: Vec<f64> = replicate(key, p.replicates, |_, rng| {
        let exc = sampler.sample(rng);
        let idx = TreeIndex::new(&exc);
        heavy_ball_census(&idx, p.a, p.r, y).expect("validated parameters")
    });
    let (m, se) = stats::mean_se(&heavy)?;
    Ok(vec![TestRecord::new(
        format!("census.heavy_ball_mass[a={},r={}]", p.a, p.r),
        "laws::heavy_ball_intensity",
        Provenance::ClosedForm,
        "mean",
        m,
        Check::Near {
            target: exact,
            tolerance: 3.0 * se + (lattice - exact).abs(),
        },
        p.replicates,
        seed,
    )
    .with_note(format!("lattice expectation {lattice:.6}"))])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HausdorffParams {
    pub a: f64,
    pub h: f64,
    pub replicates: usize,
    /// Radii `2^{−j}`.
    pub js: Vec<u32>,
    /// Acceptance window for the median ratio at the finest radius.
    pub window: (f64, f64),
    pub alpha: f64,
    pub kappa: f64,
    /// Density windows `[2^{−j}, 2^{−js[0]}]` for each listed `j`.
    pub density_js: Vec<u32>,
}

impl Default for HausdorffParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            h: 1.0 / 4096.0,
            replicates: 1000,
            js: (4..=9).collect(),
            window: (1.3, 3.0),
            alpha: 0.4,
            kappa: 0.6,
            density_js: (6..=9).collect(),
        }
    }
}

/// Per-replicate summary for the covering-ratio trend.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HausdorffSample {
    pub total_mass: f64,
    pub rows: Vec<RatioRow>,
    /// Mass with ratio persistently below `α`, per density window.
    pub mass_below: Vec<f64>,
    /// Mass with ratio persistently above `κ`, per density window.
    pub mass_above: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HausdorffSummary {
    pub radii: Vec<f64>,
    pub median_ratio_diameter: Vec<f64>,
    pub median_ratio_radius: Vec<f64>,
    pub fraction_below: Vec<f64>,
    pub fraction_above: Vec<f64>,
}

pub fn hausdorff_samples(p: &HausdorffParams, seed: u64) -> Result<Vec<HausdorffSample>> {
    if p.js.is_empty() {
        return Err(Error::param("at least one radius exponent is required"));
    }
    let ja = lattice_units("level", p.a, p.h)?;
    let radii: Vec<f64> =
        p.js.iter()
            .map(|&j| laws::dyadic_radius(u64::from(j)))
            .collect();
    let mut units = Vec::with_capacity(radii.len());
    for &r in &radii {
        let k = lattice_units("radius/2", r / 2.0, p.h)?;
        if k == 0 || k > ja {
            return Err(Error::param(format!(
                "radius {r} is not usable at this level"
            )));
        }
        units.push((k, gauge(r)?));
    }
    let j0 = p.js[0];
    let window_units: Vec<Vec<(u32, f64)>> = p
        .density_js
        .iter()
        .map(|&jw| {
            p.js.iter()
                .zip(&units)
                .filter(|(&j, _)| j >= j0 && j <= jw)
                .map(|(_, &u)| u)
                .collect()
        })
        .collect();
    let deepest = units.iter().map(|u| u.0).max().expect("non-empty");
    let sampler = ConditionedSampler::with_levels(p.h, ja)?
        .ceiling_level(ja)?
        .floor_level(ja - deepest)?;
    let key = derive_seed(seed, "measure.hausdorff");
    let (alpha, kappa) = (p.alpha, p.kappa);
    let out = replicate(key, p.replicates, |_, rng| {
        let exc = sampler.sample(rng);
        let idx = TreeIndex::new(&exc);
        let view = idx.level_units(ja);
        let rows = ratio_rows(&view, &radii).expect("conditioned paths visit the level");
        let ratios = all_visit_ratios(&view, &units);
        let unit_mass = view.mass_of(1);
        let mut mass_below = Vec::with_capacity(window_units.len());
        let mut mass_above = Vec::with_capacity(window_units.len());
        for w in &window_units {
            let cols: Vec<usize> = w
                .iter()
                .map(|u| units.iter().position(|v| v == u).expect("window radius"))
                .collect();
            let below = ratios
                .iter()
                .filter(|row| cols.iter().all(|&c| row[c] < alpha))
                .count();
            let above = ratios
                .iter()
                .filter(|row| cols.iter().all(|&c| row[c] > kappa))
                .count();
            mass_below.push(below as f64 * unit_mass);
            mass_above.push(above as f64 * unit_mass);
        }
        HausdorffSample {
            total_mass: view.total_mass(),
            rows,
            mass_below,
            mass_above,
        }
    });
    Ok(out)
}

pub fn summarize_hausdorff(
    p: &HausdorffParams,
    samples: &[HausdorffSample],
) -> Result<HausdorffSummary> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let radii: Vec<f64> =
        p.js.iter()
            .map(|&j| laws::dyadic_radius(u64::from(j)))
            .collect();
    let median_of = |f: &dyn Fn(&RatioRow) -> f64, k: usize| {
        let xs: Vec<f64> = samples.iter().map(|s| f(&s.rows[k])).collect();
        stats::median(&xs)
    };
    let median_ratio_diameter = (0..radii.len())
        .map(|k| median_of(&|r| r.ratio_diameter, k))
        .collect::<Result<Vec<_>>>()?;
    let median_ratio_radius = (0..radii.len())
        .map(|k| median_of(&|r| r.ratio_radius, k))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = samples.iter().map(|s| s.total_mass).sum();
    let pooled = |f: &dyn Fn(&HausdorffSample) -> &Vec<f64>| -> Vec<f64> {
        (0..p.density_js.len())
            .map(|w| samples.iter().map(|s| f(s)[w]).sum::<f64>() / total)
            .collect()
    };
    Ok(HausdorffSummary {
        radii,
        median_ratio_diameter,
        median_ratio_radius,
        fraction_below: pooled(&|s| &s.mass_below),
        fraction_above: pooled(&|s| &s.mass_above),
    })
}

/// Trend records for the covering ratio and the density-ratio fractions.
pub fn hausdorff_records(p: &HausdorffParams, s: &HausdorffSummary, seed: u64) -> Vec<TestRecord> {
    let n = p.replicates;
    let mut records = Vec::new();
    let med = &s.median_ratio_diameter;
    let steps: Vec<f64> = med.windows(2).map(|w| w[1] - w[0]).collect();
    let worst_step = steps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let listing: Vec<String> =
        p.js.iter()
            .zip(med)
            .map(|(j, m)| format!("j={j}: {m:.4}"))
            .collect();
    records.push(
        TestRecord::new(
            "hausdorff.median_ratio_decreasing",
            "measure::covering_ratio_trend",
            Provenance::Trend,
            "max_successive_change",
            if steps.is_empty() {
                f64::NEG_INFINITY
            } else {
                worst_step
            },
            Check::Below { limit: 0.0 },
            n,
            seed,
        )
        .with_note(listing.join(", ")),
    );
    let last = *med.last().expect("non-empty");
    let (lo, hi) = p.window;
    records.push(TestRecord::new(
        format!(
            "hausdorff.median_ratio_window[j={}]",
            p.js.last().expect("non-empty")
        ),
        "measure::covering_ratio_trend",
        Provenance::Trend,
        "median_ratio",
        last,
        Check::Near {
            target: 0.5 * (lo + hi),
            tolerance: 0.5 * (hi - lo),
        },
        n,
        seed,
    ));
    for (name, fr, thr) in [
        ("below", &s.fraction_below, p.alpha),
        ("above", &s.fraction_above, p.kappa),
    ] {
        let worst = fr
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        let listing: Vec<String> = p
            .density_js
            .iter()
            .zip(fr)
            .map(|(j, f)| format!("j<={j}: {f:.4}"))
            .collect();
        records.push(
            TestRecord::new(
                format!("hausdorff.density_fraction_{name}[{thr}]"),
                "measure::density_ratio_trend",
                Provenance::Trend,
                "max_successive_change",
                if fr.len() < 2 {
                    f64::NEG_INFINITY
                } else {
                    worst
                },
                Check::AtMost {
                    bound: 0.0,
                    slack: 0.0,
                },
                n,
                seed,
            )
            .with_note(listing.join(", ")),
        );
        if let (Some(first), Some(last)) = (fr.first(), fr.last()) {
            records.push(TestRecord::new(
                format!("hausdorff.density_fraction_{name}[{thr}].shrinks"),
                "measure::density_ratio_trend",
                Provenance::Trend,
                "finest_over_coarsest",
                if *first > 0.0 { last / first } else { 0.0 },
                Check::Below { limit: 1.0 },
                n,
                seed,
            ));
        }
    }
    records
}

pub fn hausdorff_experiment(
    p: &HausdorffParams,
    seed: u64,
) -> Result<(HausdorffSummary, Vec<TestRecord>)> {
    let samples = hausdorff_samples(p, seed)?;
    let summary = summarize_hausdorff(p, &samples)?;
    let records = hausdorff_records(p, &summary, seed);
    Ok((summary, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursion::sample_uniform_tree_contour;
    use crate::rng::stream;
    use proptest::prelude::*;

    fn exc(h: &[u32], step: f64) -> LatticeExcursion {
        LatticeExcursion::new(h.to_vec(), step).unwrap()
    }

    /// `k` teeth of height 2 on a base at level 1: `0,1,(2,1)^k,0`.
    fn comb(k: usize, step: f64) -> LatticeExcursion {
        let mut h = vec![0, 1];
        for _ in 0..k {
            h.extend([2, 1]);
        }
        h.push(0);
        exc(&h, step)
    }

    #[test]
    fn covering_examples() {
        let e = exc(&[0, 1, 2, 1, 2, 1, 0], 0.05);
        let idx = TreeIndex::new(&e);
        let s = covering_sum(&idx, 0.1, 0.2, CoverMode::Diameter).unwrap();
        assert!((s - 0.0834032).abs() < 1e-7);
        assert_eq!(
            covering_sum(&idx, 0.3, 0.1, CoverMode::Diameter).unwrap(),
            0.0
        );
        assert!(covering_sum(&idx, 0.1, 0.2, CoverMode::Radius).unwrap() >= s);
        let big = exc(&[0, 1, 0], 0.5);
        assert!(matches!(
            covering_sum(&TreeIndex::new(&big), 0.5, 1.0, CoverMode::Radius),
            Err(Error::GaugeDomain(_))
        ));
    }

    #[test]
    fn comb_ratio_by_hand() {
        // Level 2 (a = 2h) of a k-tooth comb: k single visits. At r = 2h
        // every tooth is its own zero-diameter ball; at r = 4h one ball of
        // diameter 2h holds them all.
        let h = 1.0 / 64.0;
        let k = 5;
        let e = comb(k, h);
        let idx = TreeIndex::new(&e);
        let rows = hausdorff_ratio_scan(&idx, 2.0 * h, &[2.0 * h, 4.0 * h]).unwrap();
        let mass = k as f64 * h / 2.0;
        let fine = rows[0];
        assert_eq!(fine.balls, k);
        assert!((fine.ratio_diameter - k as f64 * gauge(h).unwrap() / mass).abs() < 1e-12);
        assert!((fine.ratio_radius - k as f64 * gauge(2.0 * h).unwrap() / mass).abs() < 1e-12);
        let coarse = rows[1];
        assert_eq!(coarse.balls, 1);
        assert_eq!(coarse.max_diameter, 2.0 * h);
        assert!((coarse.ratio_diameter - gauge(2.0 * h).unwrap() / mass).abs() < 1e-12);
    }

    #[test]
    fn degenerate_radius_gives_single_ball() {
        let h = 1.0 / 64.0;
        let e = exc(&[0, 1, 2, 1, 0, 1, 2, 1, 0], h);
        let idx = TreeIndex::new(&e);
        // r = 2a: one ball per excursion above 0. r > 2a: one ball.
        let rows = hausdorff_ratio_scan(&idx, 2.0 * h, &[4.0 * h, 6.0 * h]).unwrap();
        assert_eq!(rows[0].balls, 2);
        assert_eq!(rows[1].balls, 1);
        assert_eq!(rows[1].max_diameter, 4.0 * h);
        let empty = hausdorff_ratio_scan(&idx, 3.0 * h, &[2.0 * h]);
        assert!(empty.is_err());
    }

    #[test]
    fn heavy_and_small_examples() {
        let e = exc(&[0, 1, 2, 1, 2, 1, 0], 1.0 / 16.0);
        let idx = TreeIndex::new(&e);
        let a = 2.0 / 16.0;
        let r = 2.0 / 16.0;
        let total = idx.level(a).unwrap().total_mass();
        assert_eq!(heavy_ball_census(&idx, a, r, 0.0).unwrap(), total);
        assert_eq!(heavy_ball_census(&idx, a, r, f64::INFINITY).unwrap(), 0.0);
        let radii = [4.0 / 16.0, 2.0 / 16.0];
        let inf = f64::INFINITY;
        let z = idx.ball_decomposition(a, radii[1]).unwrap().count() as u64;
        assert_eq!(small_ball_census(&idx, a, &radii, &[inf]).unwrap(), z);
        assert_eq!(small_ball_census(&idx, a, &radii, &[0.0]).unwrap(), 0);
        assert_eq!(small_ball_census(&idx, a, &radii[1..], &[]).unwrap(), z);
        assert!(small_ball_census(&idx, a, &[2.0 / 16.0, 4.0 / 16.0], &[inf]).is_err());
    }

    #[test]
    fn density_profile_examples() {
        // A single visit at the top of a straight spike: the ball mass is
        // h/2 at every radius, so the ratio is (h/2)/g(r).
        let h = 1.0 / 256.0;
        let mut heights: Vec<u32> = (0..=8).collect();
        heights.extend((0..8).rev());
        let e = exc(&heights, h);
        let idx = TreeIndex::new(&e);
        let radii = [16.0 * h, 8.0 * h, 4.0 * h];
        let prof = density_ratio_profile(&idx, 8.0 * h, &[8], &radii).unwrap();
        for (k, &r) in radii.iter().enumerate() {
            assert!((prof.ratios[0][k] - h / 2.0 / gauge(r).unwrap()).abs() < 1e-12);
        }
        assert_eq!(prof.fraction_below(0.0), 0.0);
        assert_eq!(prof.fraction_below(1.0), 1.0);
        assert!(matches!(
            density_ratio_profile(&idx, 8.0 * h, &[7], &radii),
            Err(Error::NotAtLevel { .. })
        ));
    }

    #[test]
    fn all_visit_ratios_match_pointwise_queries() {
        let mut rng = stream(3, 0);
        let sampler = ConditionedSampler::with_levels(1.0 / 256.0, 64)
            .unwrap()
            .ceiling_level(64)
            .unwrap()
            .floor_level(32)
            .unwrap();
        for _ in 0..20 {
            let e = sampler.sample(&mut rng);
            let idx = TreeIndex::new(&e);
            let view = idx.level_units(64);
            let radii = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 64.0];
            let units: Vec<(u32, f64)> = radii
                .iter()
                .map(|&r| ((r * 128.0) as u32, gauge(r).unwrap()))
                .collect();
            let fast = all_visit_ratios(&view, &units);
            let slow = density_ratio_profile(&idx, 0.25, view.visits(), &radii).unwrap();
            assert_eq!(fast, slow.ratios);
        }
    }

    #[test]
    fn census_rows_are_consistent() {
        let mut rng = stream(4, 0);
        let e = sample_uniform_tree_contour(400, &mut rng)
            .unwrap()
            .with_step(1.0 / 64.0)
            .unwrap();
        let idx = TreeIndex::new(&e);
        let rows = census_rows(&idx, 0, 10, &[1.0 / 8.0, 1.0 / 32.0], 0.6).unwrap();
        for r in &rows {
            assert!(r.heavy_mass <= r.total_mass + 1e-12);
            assert!(r.covering_radius >= r.covering_diameter - 1e-12);
        }
        let mut out = Vec::new();
        write_census_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("schema,replicate,level,radius,"));
        assert_eq!(text.lines().count(), 3);
    }

    fn contour() -> impl Strategy<Value = LatticeExcursion> {
        (2usize..300, any::<u64>()).prop_map(|(n, seed)| {
            sample_uniform_tree_contour(n, &mut stream(seed, 0))
                .unwrap()
                .with_step(1.0 / 64.0)
                .unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn census_monotonicity(e in contour(), level in 2u32..12) {
            let idx = TreeIndex::new(&e);
            let a = f64::from(level) / 64.0;
            let r = 2.0 / 64.0;
            if idx.level_units(level).visits().is_empty() {
                return Ok(());
            }
            let mut prev = f64::INFINITY;
            for y in [0.0, 0.01, 0.02, 0.05, 0.1, 1.0] {
                let m = heavy_ball_census(&idx, a, r, y).unwrap();
                prop_assert!(m <= prev);
                prev = m;
            }
            let radii = [f64::from(2 * level) / 64.0, r];
            let mut prev = u64::MAX;
            for eps in [f64::INFINITY, 1.0, 0.1, 0.03, 0.0] {
                let s = small_ball_census(&idx, a, &radii, &[eps]).unwrap();
                prop_assert!(s <= prev);
                prev = s;
            }
            // g is increasing only below about 0.17, so stay at r <= 1/8.
            if level <= 4 {
                let d = covering_sum(&idx, a, radii[0], CoverMode::Diameter).unwrap();
                let rr = covering_sum(&idx, a, radii[0], CoverMode::Radius).unwrap();
                prop_assert!(rr >= d - 1e-12);
            }
        }
    }

    #[test]
    fn fourth_moment_rejects_bad_hypotheses() {
        let mut p = FourthMomentParams {
            replicates: 10,
            ..FourthMomentParams::default()
        };
        p.a = 0.5;
        assert!(fourth_moment_census_check(&p, 1).is_err());
        let p = FourthMomentParams {
            radii: vec![0.5, 0.25],
            thresholds: vec![0.1],
            replicates: 10,
            ..FourthMomentParams::default()
        };
        assert!(fourth_moment_census_check(&p, 1).is_err());
    }

    #[test]
    fn degenerate_fourth_moment_is_bounded() {
        // A single radius and no thresholds: S = Z.
        let p = FourthMomentParams {
            a: 2.0,
            radii: vec![0.5],
            thresholds: vec![],
            h: 1.0 / 32.0,
            replicates: 2000,
        };
        // r_1 > 2 r_n fails for a single radius, so run the pieces directly.
        assert!(fourth_moment_census_check(&p, 1).is_err());
        let s = small_ball_sampler(p.h, p.a, 0.5).unwrap();
        let xs: Vec<f64> = replicate(7, 2000, |_, rng| {
            let e = s.sample(rng);
            let idx = TreeIndex::new(&e);
            let z = idx.ball_decomposition(2.0, 0.5).unwrap().count() as f64;
            let m = idx.level(2.0).unwrap().total_mass();
            (z - 2.0 / 0.5 * m).powi(4)
        });
        let (m4, _) = stats::mean_se(&xs).unwrap();
        assert!(m4 / 2.0 <= laws::fourth_moment_bound(2.0, 0.5, 0.5).unwrap());
    }
}
