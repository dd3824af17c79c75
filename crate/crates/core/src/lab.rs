//! Experiment suites: the closed-form law checks on sampled trees, the
//! deterministic geometry audit, and the grid census table.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::excursion::{
    excursion_intervals_above, lattice_units, local_time_profile, sample_uniform_tree_contour,
    ConditionedSampler, LatticeExcursion,
};
use crate::geometry::TreeIndex;
use crate::laws::{self, GridSpec};
use crate::measure::{census_rows, CensusResult};
use crate::report::{Check, Provenance, TestRecord};
use crate::rng::{derive_seed, replicate};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LawsParams {
    pub a: f64,
    pub r: f64,
    pub h: f64,
    pub replicates: usize,
    pub ks_tolerance: f64,
    pub chi2_alpha: f64,
    pub mean_rel_tolerance: f64,
    pub height_h: f64,
    pub height_replicates: usize,
    pub duration_m: f64,
    pub duration_h: f64,
    pub duration_replicates: usize,
    pub duration_bins: usize,
    pub geometry_replicates: usize,
    pub geometry_max_vertices: usize,
}

impl Default for LawsParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            r: 0.5,
            h: 1.0 / 128.0,
            replicates: 20_000,
            ks_tolerance: 0.02,
            chi2_alpha: 0.01,
            mean_rel_tolerance: 0.02,
            height_h: 1.0 / 64.0,
            height_replicates: 100_000,
            duration_m: 1.0 / 16.0,
            duration_h: 1.0 / 32.0,
            duration_replicates: 200_000,
            duration_bins: 6,
            geometry_replicates: 1000,
            geometry_max_vertices: 256,
        }
    }
}

fn need_replicates(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::param(format!(
            "replicates must be at least {min}, got {n}"
        )));
    }
    Ok(())
}

struct LevelSample {
    mass: f64,
    balls: Vec<f64>,
}

/// Level mass, ball count and ball masses under `N_a` at radius `r`.
pub fn level_law_checks(p: &LawsParams, seed: u64) -> Result<Vec<TestRecord>> {
    need_replicates(p.replicates, 2)?;
    let ja = lattice_units("level", p.a, p.h)?;
    let k = lattice_units("radius/2", p.r / 2.0, p.h)?;
    if k == 0 || k > ja {
        return Err(Error::param("ball radius must lie in [2h, 2a]"));
    }
    let sampler = ConditionedSampler::with_levels(p.h, ja)?
        .ceiling_level(ja)?
        .floor_level(ja - k)?;
    let key = derive_seed(seed, "lab.level_laws");
    let samples: Vec<LevelSample> = replicate(key, p.replicates, |_, rng| {
        let exc = sampler.sample(rng);
        let idx = TreeIndex::new(&exc);
        let view = idx.level_units(ja);
        LevelSample {
            mass: view.total_mass(),
            balls: view.decomposition_units(k).masses(),
        }
    });
    let n = samples.len();
    let mut out = Vec::new();

    let masses: Vec<f64> = samples.iter().map(|s| s.mass).collect();
    let a = p.a;
    let ks = stats::ks_lattice(&masses, |y| laws::exponential_cdf(a, y))?;
    out.push(TestRecord::new(
        format!("laws.level_mass_ks[a={a}]"),
        "laws::level_mass_laplace",
        Provenance::ClosedForm,
        "ks",
        ks,
        Check::Below {
            limit: p.ks_tolerance,
        },
        n,
        seed,
    ));

    let counts: Vec<u64> = samples.iter().map(|s| s.balls.len() as u64).collect();
    let kmax = *counts.iter().max().expect("non-empty") as usize;
    let mut observed = vec![0u64; kmax + 1];
    for &c in &counts {
        observed[c as usize] += 1;
    }
    let mut probs: Vec<f64> = (0..=kmax)
        .map(|c| {
            if c == 0 {
                Ok(0.0)
            } else {
                laws::ball_count_pmf(p.a, p.r, c as u64)
            }
        })
        .collect::<Result<_>>()?;
    // The last cell carries the whole tail.
    let head: f64 = probs[..kmax].iter().sum();
    probs[kmax] = 1.0 - head;
    let chi = stats::chi_square(&observed[1..], &probs[1..])?;
    out.push(
        TestRecord::new(
            format!("laws.ball_count_chi2[a={a},r={}]", p.r),
            "laws::ball_count_pmf",
            Provenance::ClosedForm,
            "chi2_p",
            chi.p_value,
            Check::Above {
                limit: p.chi2_alpha,
            },
            n,
            seed,
        )
        .with_note(format!("chi2 = {:.3}, dof = {}", chi.statistic, chi.dof)),
    );
    let zs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (mz, sez) = stats::mean_se(&zs)?;
    let target = 1.0 / laws::ball_count_success(p.a, p.r)?;
    out.push(TestRecord::new(
        format!("laws.ball_count_mean[a={a},r={}]", p.r),
        "laws::ball_count_success",
        Provenance::ClosedForm,
        "mean",
        mz,
        Check::Near {
            target,
            tolerance: p.mean_rel_tolerance * target + 3.0 * sez,
        },
        n,
        seed,
    ));

    let pooled: Vec<f64> = samples
        .iter()
        .flat_map(|s| s.balls.iter().copied())
        .collect();
    let half = p.r / 2.0;
    let ks = stats::ks_lattice(&pooled, |y| laws::exponential_cdf(half, y))?;
    out.push(TestRecord::new(
        format!("laws.ball_mass_ks[r={}]", p.r),
        "laws::exponential_cdf",
        Provenance::ClosedForm,
        "ks",
        ks,
        Check::Below {
            limit: p.ks_tolerance,
        },
        pooled.len(),
        seed,
    ));
    let (first, second): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter(|s| s.balls.len() >= 2)
        .map(|s| (s.balls[0], s.balls[1]))
        .unzip();
    let pairs = first.len();
    let id = format!("laws.ball_mass_correlation[r={}]", p.r);
    let reference = "laws::ball_count_pmf";
    if pairs < 3 {
        out.push(TestRecord::insufficient(
            id,
            reference,
            Provenance::ClosedForm,
            "abs_correlation",
            Check::Below { limit: f64::NAN },
            pairs,
            3,
            seed,
        ));
    } else {
        let rho = stats::correlation(&first, &second)?;
        out.push(TestRecord::new(
            id,
            reference,
            Provenance::ClosedForm,
            "abs_correlation",
            rho.abs(),
            Check::Below {
                limit: 3.0 / (pairs as f64).sqrt(),
            },
            pairs,
            seed,
        ));
    }
    Ok(out)
}

/// `P(sup > 2a | sup > a) = 1/2`. On the lattice the event `max ≥ 2j` has
/// probability exactly `j/(2j) = 1/2` once level `j` is reached.
pub fn height_tail_check(p: &LawsParams, seed: u64) -> Result<TestRecord> {
    need_replicates(p.height_replicates, 2)?;
    let ja = lattice_units("level", p.a, p.height_h)?;
    let sampler = ConditionedSampler::with_levels(p.height_h, ja)?
        .floor_level(ja)?
        .ceiling_level(2 * ja)?;
    let key = derive_seed(seed, "lab.height_tail");
    let hits: Vec<bool> = replicate(key, p.height_replicates, |_, rng| {
        sampler.sample(rng).max_level() >= 2 * ja
    });
    let n = hits.len();
    let frac = hits.iter().filter(|&&b| b).count() as f64 / n as f64;
    let target = laws::conditional_sup_tail(p.a, 2.0 * p.a)?;
    Ok(TestRecord::new(
        format!("laws.height_tail[{}|{}]", 2.0 * p.a, p.a),
        "laws::conditional_sup_tail",
        Provenance::ClosedForm,
        "proportion",
        frac,
        Check::Near {
            target,
            tolerance: 3.0 * stats::proportion_se(target, n),
        },
        n,
        seed,
    ))
}

/// Shape of the duration law on `[1, 4]` under `N_m`: conditional bin
/// probabilities `∝ ∫ r^{−3/2} dr`. Paths longer than 4 are censored.
pub fn duration_law_check(p: &LawsParams, seed: u64) -> Result<TestRecord> {
    need_replicates(p.duration_replicates, 2)?;
    if p.duration_bins < 2 {
        return Err(Error::param("duration_bins must be at least 2"));
    }
    let jm = lattice_units("level", p.duration_m, p.duration_h)?;
    let sampler = ConditionedSampler::with_levels(p.duration_h, jm)?;
    let tau = p.duration_h * p.duration_h / 2.0;
    let (lo, hi) = (1.0f64, 4.0f64);
    let max_len = (hi / tau).ceil() as usize + 1;
    let key = derive_seed(seed, "lab.duration");
    let durations: Vec<f64> = replicate(key, p.duration_replicates, |_, rng| {
        sampler
            .sample_within(rng, max_len)
            .map_or(f64::INFINITY, |e| e.duration())
    });
    let edges: Vec<f64> = (0..=p.duration_bins)
        .map(|i| lo * (hi / lo).powf(i as f64 / p.duration_bins as f64))
        .collect();
    let mut observed = vec![0u64; p.duration_bins];
    for &d in &durations {
        if d >= lo && d < hi {
            let b = edges.partition_point(|&e| e <= d) - 1;
            observed[b] += 1;
        }
    }
    let total = laws::zeta_tail(lo)? - laws::zeta_tail(hi)?;
    let probs: Vec<f64> = edges
        .windows(2)
        .map(|w| Ok((laws::zeta_tail(w[0])? - laws::zeta_tail(w[1])?) / total))
        .collect::<Result<_>>()?;
    let in_window: u64 = observed.iter().sum();
    let id = format!("laws.duration_shape[m={}]", p.duration_m);
    let check = Check::Above {
        limit: p.chi2_alpha,
    };
    if (in_window as f64) < 5.0 * p.duration_bins as f64 {
        return Ok(TestRecord::insufficient(
            id,
            "laws::zeta_density",
            Provenance::ClosedForm,
            "chi2_p",
            check,
            in_window as usize,
            5 * p.duration_bins,
            seed,
        ));
    }
    let chi = stats::chi_square(&observed, &probs)?;
    Ok(TestRecord::new(
        id,
        "laws::zeta_density",
        Provenance::ClosedForm,
        "chi2_p",
        chi.p_value,
        check,
        in_window as usize,
        seed,
    )
    .with_note(format!("chi2 = {:.3}, dof = {}", chi.statistic, chi.dof)))
}

/// Excursions above `b = a` reaching `b + r/2`, given `ℓ̂^b`: mean
/// `(2/r)·ℓ̂^b` and Fisher dispersion 1.
///
/// On the lattice, given `V` departures from `b`, the last one is the fatal
/// descent and the other `V − 1` are down with probability
/// `q = (b−1)/(2b−1)`, so `U` up-departures are `V − 1 − Bin(V−1, q)` and each
/// reaches `b + k` with probability `1/k`. The exact conditional expectation
/// of the dispersion under this model is computed per replicate; its gap to
/// 1 is the discretization budget.
pub fn branching_check(p: &LawsParams, seed: u64) -> Result<Vec<TestRecord>> {
    need_replicates(p.replicates, 2)?;
    let jb = lattice_units("level", p.a, p.h)?;
    let k = lattice_units("radius/2", p.r / 2.0, p.h)?;
    if k == 0 {
        return Err(Error::param("radius must be at least two lattice steps"));
    }
    let sampler = ConditionedSampler::with_levels(p.h, jb)?
        .floor_level(jb)?
        .ceiling_level(jb + k)?;
    let key = derive_seed(seed, "lab.branching");
    let pairs: Vec<(u64, u64)> = replicate(key, p.replicates, |_, rng| {
        let exc = sampler.sample(rng);
        let count = excursion_intervals_above(&exc, jb)
            .iter()
            .filter(|iv| iv.max >= jb + k)
            .count() as u64;
        let visits = local_time_profile(&exc).visits(jb);
        (count, visits)
    });
    let n = pairs.len();
    let (counts, visits): (Vec<u64>, Vec<u64>) = pairs.into_iter().unzip();
    let unit = 2.0 / p.r * p.h / 2.0;
    let means: Vec<f64> = visits.iter().map(|&v| v as f64 * unit).collect();
    let (f, pk) = (f64::from(jb), 1.0 / f64::from(k));
    let q = (f - 1.0) / (2.0 * f - 1.0);
    let lattice = visits
        .iter()
        .zip(&means)
        .map(|(&v, &m)| {
            let rest = v as f64 - 1.0;
            let eu = rest * (1.0 - q);
            let var = eu * pk * (1.0 - pk) + pk * pk * rest * q * (1.0 - q);
            let bias = eu * pk - m;
            (var + bias * bias) / m
        })
        .sum::<f64>()
        / n as f64;
    let dispersion = stats::poisson_dispersion(&counts, &means)?;
    let terms: Vec<f64> = counts
        .iter()
        .zip(&means)
        .map(|(&c, &m)| (c as f64 - m).powi(2) / m)
        .collect();
    let (_, se_d) = stats::mean_se(&terms)?;
    let resid: Vec<f64> = counts
        .iter()
        .zip(&means)
        .map(|(&c, &m)| c as f64 - m)
        .collect();
    let (mr, se_r) = stats::mean_se(&resid)?;
    let budget = (1.0 - lattice).abs();
    Ok(vec![
        TestRecord::new(
            format!("laws.branching_mean[b={},r={}]", p.a, p.r),
            "laws::sup_tail",
            Provenance::ClosedForm,
            "mean_residual",
            mr,
            Check::Near {
                target: 0.0,
                tolerance: 3.0 * se_r,
            },
            n,
            seed,
        ),
        TestRecord::new(
            format!("laws.branching_dispersion[b={},r={}]", p.a, p.r),
            "laws::sup_tail",
            Provenance::ClosedForm,
            "dispersion",
            dispersion,
            Check::Near {
                target: 1.0,
                tolerance: 3.0 * se_d + budget,
            },
            n,
            seed,
        )
        .with_note(format!("lattice expectation {lattice:.4}")),
    ])
}

/// Violations found by [`geometry_audit`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GeometryAudit {
    pub excursions: usize,
    pub distance_pairs: u64,
    pub distance_mismatches: u64,
    pub decompositions: u64,
    pub partition_violations: u64,
    pub disjointness_violations: u64,
    pub diameter_violations: u64,
    pub membership_violations: u64,
    pub nesting_violations: u64,
}

impl GeometryAudit {
    fn add(&mut self, o: &GeometryAudit) {
        self.excursions += o.excursions;
        self.distance_pairs += o.distance_pairs;
        self.distance_mismatches += o.distance_mismatches;
        self.decompositions += o.decompositions;
        self.partition_violations += o.partition_violations;
        self.disjointness_violations += o.disjointness_violations;
        self.diameter_violations += o.diameter_violations;
        self.membership_violations += o.membership_violations;
        self.nesting_violations += o.nesting_violations;
    }
}

/// Brute-force audit of one excursion: every pairwise distance against a
/// running-minimum scan, and every ball decomposition against pairwise
/// membership `d < r`.
pub fn audit_excursion(exc: &LatticeExcursion) -> GeometryAudit {
    let idx = TreeIndex::new(exc);
    let hs = exc.heights();
    let n = hs.len();
    let mut audit = GeometryAudit {
        excursions: 1,
        ..Default::default()
    };
    // lattice distance matrix, reused for membership
    let mut dist = vec![0u32; n * n];
    for s in 0..n {
        let mut m = hs[s];
        for t in s..n {
            m = m.min(hs[t]);
            let d = hs[s] + hs[t] - 2 * m;
            dist[s * n + t] = d;
            dist[t * n + s] = d;
            audit.distance_pairs += 1;
            if idx.lattice_distance(s, t) != d {
                audit.distance_mismatches += 1;
            }
        }
    }
    for level in 1..=exc.max_level() {
        let view = idx.level_units(level);
        let visits = view.visits();
        let mut prev: Option<Vec<(usize, usize)>> = None;
        for k in (1..=level).rev() {
            let dec = view.decomposition_units(k);
            audit.decompositions += 1;
            let total: u64 = dec.balls.iter().map(|b| b.visits).sum();
            if total != visits.len() as u64 {
                audit.partition_violations += 1;
            }
            for w in dec.balls.windows(2) {
                if w[0].end >= w[1].start {
                    audit.disjointness_violations += 1;
                }
            }
            // d < r  ⇔  lattice distance < 2k
            let mut owner = vec![usize::MAX; visits.len()];
            let mut i = 0;
            for (bi, b) in dec.balls.iter().enumerate() {
                if b.diameter >= 2.0 * f64::from(k) * exc.step() {
                    audit.diameter_violations += 1;
                }
                for _ in 0..b.visits {
                    if i < owner.len() {
                        owner[i] = bi;
                    }
                    i += 1;
                }
            }
            for x in 0..visits.len() {
                for y in x + 1..visits.len() {
                    let close = dist[visits[x] * n + visits[y]] < 2 * k;
                    if close != (owner[x] == owner[y]) {
                        audit.membership_violations += 1;
                    }
                }
            }
            let intervals: Vec<(usize, usize)> =
                dec.balls.iter().map(|b| (b.start, b.end)).collect();
            if let Some(coarse) = &prev {
                for &(s, e) in &intervals {
                    if !coarse.iter().any(|&(cs, ce)| cs <= s && e <= ce) {
                        audit.nesting_violations += 1;
                    }
                }
            }
            prev = Some(intervals);
        }
    }
    audit
}

/// Runs [`audit_excursion`] on uniform tree contours with up to
/// `max_vertices` vertices (paths of length `2n − 1`).
pub fn geometry_audit(replicates: usize, max_vertices: usize, seed: u64) -> Result<GeometryAudit> {
    need_replicates(replicates, 1)?;
    if max_vertices < 2 {
        return Err(Error::param("max_vertices must be at least 2"));
    }
    let key = derive_seed(seed, "lab.geometry");
    let audits = replicate(key, replicates, |_, rng| {
        use rand::Rng;
        let n = rng.random_range(2..=max_vertices);
        let exc = sample_uniform_tree_contour(n, rng)
            .expect("n >= 2")
            .with_step(1.0 / 16.0)
            .expect("valid step");
        audit_excursion(&exc)
    });
    let mut total = GeometryAudit::default();
    for a in &audits {
        total.add(a);
    }
    Ok(total)
}

pub fn geometry_records(p: &LawsParams, seed: u64) -> Result<Vec<TestRecord>> {
    let audit = geometry_audit(p.geometry_replicates, p.geometry_max_vertices, seed)?;
    let n = audit.excursions;
    let zero = Check::AtMost {
        bound: 0.0,
        slack: 0.0,
    };
    let rec = |name: &str, count: u64, note: String| {
        TestRecord::new(
            format!("geometry.{name}"),
            "lab::audit_excursion",
            Provenance::DerivedOracle,
            "violations",
            count as f64,
            zero,
            n,
            seed,
        )
        .with_note(note)
    };
    let decs = audit.decompositions;
    Ok(vec![
        rec(
            "distance",
            audit.distance_mismatches,
            format!("{} pairs", audit.distance_pairs),
        ),
        rec(
            "partition",
            audit.partition_violations,
            format!("{decs} decompositions"),
        ),
        rec(
            "disjointness",
            audit.disjointness_violations,
            format!("{decs} decompositions"),
        ),
        rec(
            "diameter",
            audit.diameter_violations,
            format!("{decs} decompositions"),
        ),
        rec(
            "membership",
            audit.membership_violations,
            format!("{decs} decompositions"),
        ),
        rec(
            "nesting",
            audit.nesting_violations,
            format!("{decs} decompositions"),
        ),
    ])
}

/// All checks of the `laws` suite except the spinal and Feller ones.
pub fn laws_experiment(p: &LawsParams, seed: u64) -> Result<Vec<TestRecord>> {
    let mut out = level_law_checks(p, seed)?;
    out.push(height_tail_check(p, seed)?);
    out.push(duration_law_check(p, seed)?);
    out.extend(branching_check(p, seed)?);
    out.extend(geometry_records(p, seed)?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCensusParams {
    pub grid: GridSpec,
    pub radii: Vec<f64>,
    pub kappa: f64,
    pub h: f64,
    pub replicates: usize,
}

impl Default for GridCensusParams {
    fn default() -> Self {
        Self {
            grid: GridSpec::large(1.0 / 16.0, 0.25).expect("valid grid"),
            radii: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0],
            kappa: 0.6,
            h: 1.0 / 64.0,
            replicates: 20,
        }
    }
}

/// Census rows on every grid level for excursions under `N_m`, compressed
/// above `1/m`. Also returns the structural record comparing the number of
/// grid levels with the point-count bound.
pub fn grid_census(p: &GridCensusParams, seed: u64) -> Result<(Vec<CensusResult>, TestRecord)> {
    need_replicates(p.replicates, 1)?;
    let m = p.grid.m();
    let jm = lattice_units("level", m, p.h)?;
    let top = lattice_units("level", 1.0 / m, p.h)?;
    let levels = p.grid.lattice_levels(p.h);
    for &r in &p.radii {
        let k = lattice_units("radius/2", r / 2.0, p.h)?;
        if k == 0 || k > jm {
            return Err(Error::param(format!("radius {r} must lie in [2h, 2m]")));
        }
        laws::gauge(r)?;
    }
    let floor = jm - lattice_units("radius/2", p.radii[0] / 2.0, p.h)?;
    let sampler = ConditionedSampler::with_levels(p.h, jm)?
        .floor_level(floor)?
        .ceiling_level(top)?;
    let key = derive_seed(seed, "lab.grid_census");
    let rows: Vec<Vec<CensusResult>> = replicate(key, p.replicates, |i, rng| {
        let exc = sampler.sample(rng);
        let idx = TreeIndex::new(&exc);
        levels
            .iter()
            .flat_map(|&l| census_rows(&idx, i, l, &p.radii, p.kappa).expect("validated radii"))
            .collect()
    });
    let rows: Vec<CensusResult> = rows.into_iter().flatten().collect();
    let record = TestRecord::new(
        "census.grid_point_count",
        "laws::GridSpec::point_count_bound",
        Provenance::ClosedForm,
        "levels",
        levels.len() as f64,
        Check::AtMost {
            bound: p.grid.point_count_bound(),
            slack: 0.0,
        },
        p.replicates,
        seed,
    );
    Ok((rows, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> LawsParams {
        LawsParams {
            a: 0.25,
            r: 0.25,
            h: 1.0 / 32.0,
            replicates: 3000,
            ks_tolerance: 0.05,
            height_h: 1.0 / 16.0,
            height_replicates: 4000,
            duration_m: 0.125,
            duration_h: 0.125,
            duration_replicates: 20_000,
            duration_bins: 3,
            geometry_replicates: 20,
            geometry_max_vertices: 40,
            ..LawsParams::default()
        }
    }

    #[test]
    fn small_laws_suite_passes() {
        let recs = laws_experiment(&small(), 5).unwrap();
        for r in &recs {
            assert!(r.passed(), "{r}");
        }
        assert_eq!(recs.len(), 15);
    }

    #[test]
    fn zero_replicates_rejected() {
        let p = LawsParams {
            replicates: 0,
            ..small()
        };
        assert!(matches!(
            laws_experiment(&p, 1),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn misaligned_level_rejected() {
        let p = LawsParams { a: 0.3, ..small() };
        assert!(matches!(
            level_law_checks(&p, 1),
            Err(Error::Misaligned { .. })
        ));
    }

    #[test]
    fn audit_fixture_is_clean() {
        let e = LatticeExcursion::new(vec![0, 1, 2, 1, 2, 3, 2, 1, 0], 0.25).unwrap();
        let a = audit_excursion(&e);
        assert_eq!(a.distance_pairs, 45);
        assert_eq!(a.distance_mismatches, 0);
        assert_eq!(a.membership_violations, 0);
        assert_eq!(a.nesting_violations, 0);
        assert_eq!(a.decompositions, 6);
    }

    #[test]
    fn grid_census_rows() {
        let p = GridCensusParams {
            replicates: 2,
            ..GridCensusParams::default()
        };
        let (rows, rec) = grid_census(&p, 3).unwrap();
        assert!(rec.passed());
        let levels = p.grid.lattice_levels(p.h).len();
        assert_eq!(rows.len(), 2 * levels * p.radii.len());
        for r in &rows {
            assert!(r.heavy_mass <= r.total_mass + 1e-12);
            assert!(r.covering_diameter >= 0.0 && r.covering_radius >= 0.0);
        }
    }
}
