//! Feller diffusion (`ψ(λ) = λ²`) and its correspondence with level local times.
//!
//! The transition kernel over time `t` started from `x` is a compound
//! Poisson-exponential law: `N ~ Poisson(x/t)` clusters, each an exponential
//! mass with mean `t`. The sum of `N` exponentials is drawn as one
//! `Gamma(N, t)` variate, so every transition costs two draws regardless of
//! `x/t`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::excursion::{lattice_units, ConditionedSampler};
use crate::geometry::TreeIndex;
use crate::laws;
use crate::report::{Check, Provenance, TestRecord};
use crate::rng::{derive_seed, replicate};
use crate::stats;

/// Exact draw of `Y_{dt}` given `Y_0 = x`, without argument checks.
pub(crate) fn transition<R: Rng + ?Sized>(x: f64, dt: f64, rng: &mut R) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mean = x / dt;
    let n = Poisson::new(mean)
        .expect("finite positive mean")
        .sample(rng);
    if n == 0.0 {
        return 0.0;
    }
    Gamma::new(n, dt).expect("positive shape").sample(rng)
}

fn check_kernel_args(x: f64, dt: f64) -> Result<()> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::param(format!(
            "initial mass must be non-negative, got {x}"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param(format!(
            "time step must be positive, got {dt}"
        )));
    }
    Ok(())
}

pub fn feller_transition_sample<R: Rng + ?Sized>(x: f64, dt: f64, rng: &mut R) -> Result<f64> {
    check_kernel_args(x, dt)?;
    Ok(transition(x, dt, rng))
}

/// Feller path sampled exactly on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FellerPath {
    pub initial: f64,
    pub times: Vec<f64>,
    pub masses: Vec<f64>,
}

impl FellerPath {
    pub fn terminal(&self) -> f64 {
        *self.masses.last().expect("paths contain the initial point")
    }

    pub fn grid_min(&self) -> f64 {
        self.masses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn grid_max(&self) -> f64 {
        self.masses.iter().copied().fold(0.0, f64::max)
    }

    /// Mass at the last grid time `≤ t`.
    pub fn at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&s| s <= t + 1e-12);
        self.masses[i.saturating_sub(1)]
    }
}

/// Chains exact transitions on `0, step, 2·step, …, horizon` (the last step
/// is shortened to land on `horizon`).
pub fn feller_path<R: Rng + ?Sized>(
    x: f64,
    horizon: f64,
    step: f64,
    rng: &mut R,
) -> Result<FellerPath> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::param("initial mass must be non-negative"));
    }
    if !(horizon > 0.0 && step > 0.0 && horizon.is_finite()) {
        return Err(Error::param("horizon and step must be positive"));
    }
    let n = ((horizon / step) - 1e-9).ceil().max(1.0) as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut masses = Vec::with_capacity(n + 1);
    times.push(0.0);
    masses.push(x);
    let mut y = x;
    for k in 1..=n {
        let t = if k == n { horizon } else { k as f64 * step };
        let dt = t - times[k - 1];
        y = transition(y, dt, rng);
        times.push(t);
        masses.push(y);
    }
    Ok(FellerPath {
        initial: x,
        times,
        masses,
    })
}

/// Transition-law checks: Laplace transform and extinction probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelParams {
    pub x: f64,
    pub dt: f64,
    pub lambdas: Vec<f64>,
    pub draws: usize,
    pub resamples: usize,
    /// `(x, t)` pairs for the extinction frequency.
    pub extinction: Vec<(f64, f64)>,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            x: 1.0,
            dt: 1.0,
            lambdas: vec![0.5, 1.0, 2.0],
            draws: 200_000,
            resamples: 200,
            extinction: vec![(1.0, 1.0), (2.0, 1.0), (1.0, 0.5)],
        }
    }
}

pub fn kernel_experiment(p: &KernelParams, seed: u64) -> Result<Vec<TestRecord>> {
    check_kernel_args(p.x, p.dt)?;
    if p.draws < 2 {
        return Err(Error::param("kernel check needs at least two draws"));
    }
    let key = derive_seed(seed, "feller.kernel");
    let ys = replicate(key, p.draws, |_, rng| transition(p.x, p.dt, rng));
    let mut records = Vec::new();

    let (m, se) = stats::mean_se(&ys)?;
    records.push(TestRecord::new(
        "feller.kernel.mean",
        "feller::martingale",
        Provenance::ClosedForm,
        "mean",
        m,
        Check::Near {
            target: p.x,
            tolerance: 3.0 * se,
        },
        ys.len(),
        seed,
    ));

    let mut boot_rng = crate::rng::stream(key, u64::MAX);
    for &lambda in &p.lambdas {
        let exact = laws::feller_laplace(p.x, p.dt, lambda)?;
        let stat = |s: &[f64]| s.iter().map(|y| (-lambda * y).exp()).sum::<f64>() / s.len() as f64;
        let b = stats::bootstrap_ci(&ys, stat, p.resamples, &mut boot_rng)?;
        records.push(TestRecord::new(
            format!("feller.kernel.laplace[{lambda}]"),
            "laws::feller_laplace",
            Provenance::ClosedForm,
            "laplace",
            b.estimate,
            Check::Near {
                target: exact,
                tolerance: 3.0 * b.std_error,
            },
            ys.len(),
            seed,
        ));
    }

    for (i, &(x, t)) in p.extinction.iter().enumerate() {
        check_kernel_args(x, t)?;
        let key = derive_seed(key, &format!("extinction.{i}"));
        let dead = replicate(key, p.draws, |_, rng| transition(x, t, rng) == 0.0);
        let freq = dead.iter().filter(|&&d| d).count() as f64 / dead.len() as f64;
        let exact = laws::feller_extinction(x, t)?;
        records.push(TestRecord::new(
            format!("feller.kernel.extinction[x={x},t={t}]"),
            "laws::feller_extinction",
            Provenance::DerivedOracle,
            "proportion",
            freq,
            Check::Near {
                target: exact,
                tolerance: 3.0 * stats::proportion_se(exact, dead.len()),
            },
            dead.len(),
            seed,
        ));
    }
    Ok(records)
}

/// Which running extremum a hitting case concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremum {
    /// `P(inf_{[0,a]} Y ≤ y)` with `y ≤ x`.
    Inf,
    /// `P(sup_{[0,a]} Y ≥ y)` with `y ≥ x`.
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HittingCase {
    pub x: f64,
    pub y: f64,
    pub a: f64,
    pub extremum: Extremum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingParams {
    pub cases: Vec<HittingCase>,
    pub paths: usize,
    /// Grid steps, coarse to fine. The finest one decides the verdict; the
    /// others document how the grid extremum converges.
    pub steps: Vec<f64>,
}

impl Default for HittingParams {
    fn default() -> Self {
        let case = |x, y, a, extremum| HittingCase { x, y, a, extremum };
        Self {
            cases: vec![
                case(4.0, 1.0, 1.0, Extremum::Inf),
                case(2.0, 0.5, 1.0, Extremum::Inf),
                case(1.0, 0.25, 0.5, Extremum::Inf),
                case(1.0, 4.0, 1.0, Extremum::Sup),
                case(0.5, 2.0, 1.0, Extremum::Sup),
                case(1.0, 3.0, 0.5, Extremum::Sup),
            ],
            paths: 20_000,
            steps: vec![1.0 / 16.0, 1.0 / 64.0, 1.0 / 256.0],
        }
    }
}

/// One-sided checks of the running-extremum bounds `exp(−(√x − √y)²/a)`.
///
/// Grid extrema under-report crossings of the continuous path, so each case is
/// estimated at every step of the refinement ladder and the note lists the
/// sequence. The estimate converges from below.
pub fn hitting_bound_experiment(p: &HittingParams, seed: u64) -> Result<Vec<TestRecord>> {
    if p.steps.is_empty() || p.paths == 0 {
        return Err(Error::param("hitting check needs steps and paths"));
    }
    let mut records = Vec::new();
    for (i, c) in p.cases.iter().enumerate() {
        let bounds = laws::feller_hitting_bounds(c.x, c.y, c.a)?;
        let bound = match c.extremum {
            Extremum::Inf => bounds.inf_bound,
            Extremum::Sup => bounds.sup_bound,
        }
        .ok_or_else(|| Error::param(format!("hitting case {i} is outside the bound's regime")))?;
        let mut ladder = Vec::new();
        for &step in &p.steps {
            let key = derive_seed(seed, &format!("feller.hitting.{i}.{step}"));
            let hits = replicate(key, p.paths, |_, rng| {
                let path = feller_path(c.x, c.a, step, rng).expect("validated parameters");
                match c.extremum {
                    Extremum::Inf => path.grid_min() <= c.y,
                    Extremum::Sup => path.grid_max() >= c.y,
                }
            });
            ladder.push(hits.iter().filter(|&&h| h).count() as f64 / p.paths as f64);
        }
        let p_hat = *ladder.last().expect("non-empty ladder");
        let se = stats::proportion_se(p_hat.max(1.0 / p.paths as f64), p.paths);
        let name = match c.extremum {
            Extremum::Inf => "inf",
            Extremum::Sup => "sup",
        };
        let steps: Vec<String> = p
            .steps
            .iter()
            .zip(&ladder)
            .map(|(s, v)| format!("step {s}: {v:.4}"))
            .collect();
        records.push(
            TestRecord::new(
                format!("feller.hitting.{name}[x={},y={},a={}]", c.x, c.y, c.a),
                "laws::feller_hitting_bounds",
                Provenance::ClosedForm,
                "probability",
                p_hat,
                Check::AtMost {
                    bound,
                    slack: 3.0 * se,
                },
                p.paths,
                seed,
            )
            .with_note(steps.join(", ")),
        );
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayKnightParams {
    pub a: f64,
    pub delta: f64,
    pub h: f64,
    pub replicates: usize,
    pub bins: usize,
    pub min_per_bin: usize,
    /// Kernel draws per tree sample in each bin.
    pub draws_per_sample: usize,
    pub ks_tolerance: f64,
    /// Radius of the balls whose increments are checked for independence.
    pub ball_radius: f64,
}

impl Default for RayKnightParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            delta: 0.5,
            h: 1.0 / 128.0,
            replicates: 20_000,
            bins: 8,
            min_per_bin: 500,
            draws_per_sample: 4,
            ks_tolerance: 0.05,
            ball_radius: 0.5,
        }
    }
}

struct RayKnightSample {
    x: f64,
    y: f64,
    kernel: Vec<f64>,
    /// Standardized increments `(y_i − m_i)/√(2δ m_i)` of the first two balls.
    pair: Option<(f64, f64)>,
}

/// Compares `(ℓ̂^a, ℓ̂^{a+δ})` under `N_a` with the Feller kernel over time `δ`,
/// bin by bin in the initial mass, and checks that the mass increments of
/// distinct `T(a)`-balls are uncorrelated.
pub fn ray_knight_experiment(p: &RayKnightParams, seed: u64) -> Result<Vec<TestRecord>> {
    let ja = lattice_units("level", p.a, p.h)?;
    let jd = lattice_units("delta", p.delta, p.h)?;
    let kb = lattice_units("radius/2", p.ball_radius / 2.0, p.h)?;
    if ja == 0 || kb == 0 || kb > ja {
        return Err(Error::param("need a > 0 and 0 < ball radius <= 2a"));
    }
    if p.replicates == 0 {
        return Err(Error::param("replicates must be at least 1"));
    }
    let jc = ja + jd;
    let sampler = ConditionedSampler::with_levels(p.h, ja)?
        .ceiling_level(jc)?
        .floor_level(ja - kb)?;
    let key = derive_seed(seed, "rayknight");
    let samples = replicate(key, p.replicates, |_, rng| {
        let exc = sampler.sample(rng);
        let idx = TreeIndex::new(&exc);
        let lower = idx.level_units(ja);
        let upper = idx.level_units(jc);
        let x = lower.total_mass();
        let y = upper.total_mass();
        let kernel = (0..p.draws_per_sample)
            .map(|_| {
                if jd == 0 {
                    x
                } else {
                    transition(x, p.delta, rng)
                }
            })
            .collect();
        let pair = if jd == 0 {
            None
        } else {
            let balls = lower.decomposition_units(kb).balls;
            (balls.len() >= 2).then(|| {
                let inc = |k: usize| {
                    let b = &balls[k];
                    let yb = upper.mass_of(upper.count_visits(b.start, b.end));
                    (yb - b.mass) / (2.0 * p.delta * b.mass).sqrt()
                };
                (inc(0), inc(1))
            })
        };
        RayKnightSample { x, y, kernel, pair }
    });

    let n = samples.len();
    let mut records = Vec::new();
    if jd == 0 {
        let worst = samples
            .iter()
            .map(|s| (s.y - s.x).abs())
            .fold(0.0, f64::max);
        records.push(TestRecord::new(
            "rayknight.identity",
            "feller::transition",
            Provenance::ClosedForm,
            "max_abs_diff",
            worst,
            Check::Near {
                target: 0.0,
                tolerance: 0.0,
            },
            n,
            seed,
        ));
        return Ok(records);
    }

    let xs: Vec<f64> = samples.iter().map(|s| s.x).collect();
    for (b, members) in stats::quantile_bins(&xs, p.bins).into_iter().enumerate() {
        let id = format!("rayknight.bin{b}.ks");
        let check = Check::Below {
            limit: p.ks_tolerance,
        };
        if members.len() < p.min_per_bin {
            records.push(TestRecord::insufficient(
                id,
                "laws::feller_laplace",
                Provenance::DerivedOracle,
                "ks2",
                check,
                members.len(),
                p.min_per_bin,
                seed,
            ));
            continue;
        }
        let tree: Vec<f64> = members.iter().map(|&i| samples[i].y).collect();
        let kernel: Vec<f64> = members
            .iter()
            .flat_map(|&i| samples[i].kernel.iter().copied())
            .collect();
        let d = stats::ks_two_sample(&tree, &kernel)?;
        let lo = samples[members[0]].x;
        let hi = samples[*members.last().expect("non-empty bin")].x;
        records.push(
            TestRecord::new(
                id,
                "laws::feller_laplace",
                Provenance::DerivedOracle,
                "ks2",
                d,
                check,
                members.len(),
                seed,
            )
            .with_note(format!("initial mass in [{lo:.4}, {hi:.4}]")),
        );
    }

    let pairs: Vec<(f64, f64)> = samples.iter().filter_map(|s| s.pair).collect();
    let id = "rayknight.ball_increment_correlation";
    if pairs.len() < 3 {
        records.push(TestRecord::insufficient(
            id,
            "feller::independent_balls",
            Provenance::ClosedForm,
            "correlation",
            Check::Below { limit: 1.0 },
            pairs.len(),
            3,
            seed,
        ));
    } else {
        let (u, v): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let rho = stats::correlation(&u, &v)?;
        records.push(TestRecord::new(
            id,
            "feller::independent_balls",
            Provenance::ClosedForm,
            "abs_correlation",
            rho.abs(),
            Check::Below {
                limit: 3.0 / (pairs.len() as f64).sqrt(),
            },
            pairs.len(),
            seed,
        ));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn zero_is_absorbing() {
        let mut rng = stream(1, 0);
        assert_eq!(feller_transition_sample(0.0, 1.0, &mut rng).unwrap(), 0.0);
        let path = feller_path(0.0, 2.0, 0.25, &mut rng).unwrap();
        assert!(path.masses.iter().all(|&m| m == 0.0));
        for _ in 0..200 {
            let path = feller_path(0.3, 3.0, 0.1, &mut rng).unwrap();
            if let Some(k) = path.masses.iter().position(|&m| m == 0.0) {
                assert!(path.masses[k..].iter().all(|&m| m == 0.0));
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let mut rng = stream(1, 0);
        assert!(feller_transition_sample(-1.0, 1.0, &mut rng).is_err());
        assert!(feller_transition_sample(1.0, 0.0, &mut rng).is_err());
        assert!(feller_path(1.0, 0.0, 0.1, &mut rng).is_err());
    }

    #[test]
    fn path_grid_ends_at_horizon() {
        let mut rng = stream(2, 0);
        let p = feller_path(1.0, 1.0, 0.3, &mut rng).unwrap();
        assert_eq!(p.times, vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        assert_eq!(p.at(0.65), p.masses[2]);
    }

    #[test]
    fn martingale_on_grid() {
        let xs: Vec<Vec<f64>> = replicate(5, 100_000, |_, rng| {
            feller_path(1.0, 2.0, 0.5, rng).unwrap().masses
        });
        for k in 0..xs[0].len() {
            let col: Vec<f64> = xs.iter().map(|m| m[k]).collect();
            let (m, se) = stats::mean_se(&col).unwrap();
            assert!((m - 1.0).abs() <= 3.0 * se.max(1e-12), "k={k}: {m} ± {se}");
        }
    }

    #[test]
    fn one_step_and_many_steps_agree() {
        let a = replicate(6, 40_000, |_, rng| transition(1.0, 1.0, rng));
        let b = replicate(7, 40_000, |_, rng| {
            feller_path(1.0, 1.0, 0.125, rng).unwrap().terminal()
        });
        let d = stats::ks_two_sample(&a, &b).unwrap();
        assert!(d < 1.63 * (2.0 / 40_000.0f64).sqrt(), "{d}");
    }

    #[test]
    fn extinction_of_paths_matches_closed_form() {
        let dead = replicate(8, 100_000, |_, rng| {
            feller_path(1.0, 1.0, 0.25, rng).unwrap().terminal() == 0.0
        });
        let f = dead.iter().filter(|&&d| d).count() as f64 / dead.len() as f64;
        let e = (-1.0f64).exp();
        assert!(
            (f - e).abs() < 3.0 * stats::proportion_se(e, dead.len()),
            "{f}"
        );
    }

    #[test]
    fn kernel_experiment_passes() {
        let p = KernelParams {
            draws: 50_000,
            resamples: 100,
            ..KernelParams::default()
        };
        let recs = kernel_experiment(&p, 9).unwrap();
        assert_eq!(recs.len(), 1 + 3 + 3);
        for r in &recs {
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn identity_at_zero_delta() {
        let p = RayKnightParams {
            delta: 0.0,
            h: 1.0 / 16.0,
            replicates: 200,
            ..RayKnightParams::default()
        };
        let recs = ray_knight_experiment(&p, 3).unwrap();
        assert_eq!(recs.len(), 1);
        assert!(recs[0].passed());
    }

    #[test]
    fn small_runs_report_insufficient_bins() {
        let p = RayKnightParams {
            h: 1.0 / 16.0,
            replicates: 400,
            ..RayKnightParams::default()
        };
        let recs = ray_knight_experiment(&p, 3).unwrap();
        assert!(recs
            .iter()
            .filter(|r| r.id.contains(".bin"))
            .all(|r| r.verdict == crate::report::Verdict::Insufficient));
    }

    #[test]
    fn misaligned_parameters_are_rejected() {
        let p = RayKnightParams {
            delta: 0.3,
            ..RayKnightParams::default()
        };
        assert!(ray_knight_experiment(&p, 1).is_err());
    }
}
