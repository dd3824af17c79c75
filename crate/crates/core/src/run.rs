//! Experiment dispatch: configuration in, report and row tables out.

use serde::Serialize;

use crate::config::{ExperimentConfig, Params};
use crate::error::{Error, Result};
use crate::feller::{self, HittingParams, KernelParams, RayKnightParams};
use crate::lab::{self, GridCensusParams, LawsParams};
use crate::laws::GridSpec;
use crate::measure::{self, FourthMomentParams, HausdorffParams, HeavyBallParams, SupMassParams};
use crate::report::{StatReport, TestRecord};
use crate::spinal::{self, BismutParams, LambdaStarParams};

/// A CSV row table produced alongside the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File name, e.g. `census.csv`.
    pub name: String,
    pub csv: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: StatReport,
    pub tables: Vec<Table>,
    /// `tol.<id>` overrides that matched no record.
    pub unmatched_tolerances: Vec<String>,
}

fn table<T: Serialize>(name: &str, rows: &[T]) -> Result<Table> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let csv = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(Table {
        name: name.to_string(),
        csv,
    })
}

/// Runs one experiment. Parameters are read and checked before any sampling
/// starts, and the result depends only on `(cfg, cfg.seed)`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let seed = cfg.seed;
    let p = cfg.params();
    let (records, tables) = match cfg.experiment.as_str() {
        "laws" => run_laws(cfg, &p, seed)?,
        "rayknight" => run_rayknight(cfg, &p, seed)?,
        "bismut" => run_bismut(cfg, &p, seed)?,
        "census" => run_census(cfg, &p, seed)?,
        "hausdorff" => run_hausdorff(cfg, &p, seed)?,
        other => return Err(Error::Config(format!("unknown experiment `{other}`"))),
    };
    let mut report = StatReport::new(cfg.experiment.clone(), seed);
    report.config = cfg.summary();
    report.extend(records);
    let unmatched_tolerances = apply_tolerances(cfg, &mut report);
    Ok(RunOutput {
        report,
        tables,
        unmatched_tolerances,
    })
}

/// `tol.<id>` matches a record whose full id or bracket-free id is `<id>`.
fn apply_tolerances(cfg: &ExperimentConfig, report: &mut StatReport) -> Vec<String> {
    let mut unmatched = Vec::new();
    for (id, &t) in &cfg.tolerances {
        let mut hit = false;
        for r in &mut report.records {
            if r.id == *id || r.base_id() == id {
                r.override_tolerance(t);
                hit = true;
            }
        }
        if !hit {
            unmatched.push(id.clone());
        }
    }
    unmatched
}

type Outcome = (Vec<TestRecord>, Vec<Table>);

/// Builds the parameter struct before any run starts, so that a bad key
/// fails fast.
fn run_laws(cfg: &ExperimentConfig, p: &Params<'_>, seed: u64) -> Result<Outcome> {
    let d = LawsParams::default();
    let laws = LawsParams {
        a: p.real("a", d.a)?,
        r: p.real("r", d.r)?,
        h: cfg.h.unwrap_or(d.h),
        replicates: cfg.replicates.unwrap_or(d.replicates),
        ks_tolerance: p.real("ks_tolerance", d.ks_tolerance)?,
        chi2_alpha: p.real("chi2_alpha", d.chi2_alpha)?,
        mean_rel_tolerance: p.real("mean_rel_tolerance", d.mean_rel_tolerance)?,
        height_h: p.real("height_h", d.height_h)?,
        height_replicates: p.count("height_replicates", d.height_replicates)?,
        duration_m: p.real("duration_m", d.duration_m)?,
        duration_h: p.real("duration_h", d.duration_h)?,
        duration_replicates: p.count("duration_replicates", d.duration_replicates)?,
        duration_bins: p.count("duration_bins", d.duration_bins)?,
        geometry_replicates: p.count("geometry_replicates", d.geometry_replicates)?,
        geometry_max_vertices: p.count("geometry_max_vertices", d.geometry_max_vertices)?,
    };
    let dk = KernelParams::default();
    let kernel = KernelParams {
        x: p.real("kernel_x", dk.x)?,
        dt: p.real("kernel_dt", dk.dt)?,
        lambdas: p.reals("kernel_lambdas", &dk.lambdas)?,
        draws: p.count("kernel_draws", dk.draws)?,
        resamples: p.count("kernel_resamples", dk.resamples)?,
        ..dk
    };
    let dl = LambdaStarParams::default();
    let lstar = LambdaStarParams {
        draws: p.count("lambda_star_draws", dl.draws)?,
        grid_points: p.count("lambda_star_grid_points", dl.grid_points)?,
        ..dl
    };
    p.finish()?;
    let mut out = lab::laws_experiment(&laws, seed)?;
    out.extend(spinal::lambda_star_experiment(&lstar, seed)?);
    out.extend(feller::kernel_experiment(&kernel, seed)?);
    Ok((out, Vec::new()))
}

fn run_rayknight(cfg: &ExperimentConfig, p: &Params<'_>, seed: u64) -> Result<Outcome> {
    let d = RayKnightParams::default();
    let rk = RayKnightParams {
        a: p.real("a", d.a)?,
        delta: p.real("delta", d.delta)?,
        h: cfg.h.unwrap_or(d.h),
        replicates: cfg.replicates.unwrap_or(d.replicates),
        bins: p.count("bins", d.bins)?,
        min_per_bin: p.count("min_per_bin", d.min_per_bin)?,
        draws_per_sample: p.count("draws_per_sample", d.draws_per_sample)?,
        ks_tolerance: p.real("ks_tolerance", d.ks_tolerance)?,
        ball_radius: p.real("ball_radius", d.ball_radius)?,
    };
    let dh = HittingParams::default();
    let hitting = HittingParams {
        paths: p.count("hitting_paths", dh.paths)?,
        steps: p.reals("hitting_steps", &dh.steps)?,
        ..dh
    };
    p.finish()?;
    let mut out = feller::ray_knight_experiment(&rk, seed)?;
    out.extend(feller::hitting_bound_experiment(&hitting, seed)?);
    Ok((out, Vec::new()))
}

fn run_bismut(cfg: &ExperimentConfig, p: &Params<'_>, seed: u64) -> Result<Outcome> {
    let d = BismutParams::default();
    let inner = p.reals(
        "band_inner",
        &d.bands.iter().map(|b| b.0).collect::<Vec<_>>(),
    )?;
    let outer = p.reals(
        "band_outer",
        &d.bands.iter().map(|b| b.1).collect::<Vec<_>>(),
    )?;
    if inner.len() != outer.len() {
        return Err(Error::Config(
            "band_inner and band_outer differ in length".into(),
        ));
    }
    let bismut = BismutParams {
        a: p.real("a", d.a)?,
        bands: inner.into_iter().zip(outer).collect(),
        h: cfg.h.unwrap_or(d.h),
        replicates: cfg.replicates.unwrap_or(d.replicates),
        ks_tolerance: p.real("ks_tolerance", d.ks_tolerance)?,
        min_ess_fraction: p.real("min_ess_fraction", d.min_ess_fraction)?,
    };
    p.finish()?;
    Ok((spinal::bismut_ring_experiment(&bismut, seed)?, Vec::new()))
}

fn run_census(cfg: &ExperimentConfig, p: &Params<'_>, seed: u64) -> Result<Outcome> {
    let ds = SupMassParams::default();
    let sup = SupMassParams {
        m: p.real("sup_m", ds.m)?,
        ys: p.reals("sup_ys", &ds.ys)?,
        h: cfg.h.map_or(p.real("sup_h", ds.h), Ok)?,
        ceiling: p.real("sup_ceiling", ds.ceiling)?,
        replicates: cfg.replicates.unwrap_or(ds.replicates),
    };
    let df = FourthMomentParams::default();
    let fourth = FourthMomentParams {
        a: p.real("fourth_a", df.a)?,
        radii: p.reals("fourth_radii", &df.radii)?,
        thresholds: p.reals("fourth_thresholds", &df.thresholds)?,
        h: cfg.h.map_or(p.real("fourth_h", df.h), Ok)?,
        replicates: cfg.replicates.unwrap_or(df.replicates),
    };
    let dh = HeavyBallParams::default();
    let heavy = HeavyBallParams {
        a: p.real("heavy_a", dh.a)?,
        r: p.real("heavy_r", dh.r)?,
        kappa_over_c: p.real("heavy_kappa_over_c", dh.kappa_over_c)?,
        h: cfg.h.map_or(p.real("heavy_h", dh.h), Ok)?,
        replicates: cfg.replicates.unwrap_or(dh.replicates),
    };
    let dg = GridCensusParams::default();
    let grid = GridCensusParams {
        grid: GridSpec::large(
            p.real("grid_r", 1.0 / 16.0)?,
            p.real("grid_m", dg.grid.m())?,
        )?,
        radii: p.reals("grid_radii", &dg.radii)?,
        kappa: p.real("grid_kappa", dg.kappa)?,
        h: cfg.h.map_or(p.real("grid_h", dg.h), Ok)?,
        replicates: p.count("grid_replicates", dg.replicates)?,
    };
    p.finish()?;
    let mut out = measure::sup_level_mass_check(&sup, seed)?;
    out.extend(measure::fourth_moment_census_check(&fourth, seed)?);
    out.extend(measure::heavy_ball_check(&heavy, seed)?);
    let (rows, rec) = lab::grid_census(&grid, seed)?;
    out.push(rec);
    Ok((out, vec![table("census.csv", &rows)?]))
}

#[derive(Serialize)]
struct HausdorffRow {
    schema: u32,
    radius: f64,
    median_ratio_diameter: f64,
    median_ratio_radius: f64,
}

#[derive(Serialize)]
struct DensityRow {
    schema: u32,
    finest_radius: f64,
    fraction_below: f64,
    fraction_above: f64,
}

fn run_hausdorff(cfg: &ExperimentConfig, p: &Params<'_>, seed: u64) -> Result<Outcome> {
    let d = HausdorffParams::default();
    let to_u32 = |xs: Vec<f64>| -> Result<Vec<u32>> {
        xs.into_iter()
            .map(|x| {
                if x.fract() == 0.0 && (1.0..=60.0).contains(&x) {
                    Ok(x as u32)
                } else {
                    Err(Error::Config(format!(
                        "radius exponent {x} must be an integer in [1, 60]"
                    )))
                }
            })
            .collect()
    };
    let as_f = |xs: &[u32]| xs.iter().map(|&x| f64::from(x)).collect::<Vec<_>>();
    let hp = HausdorffParams {
        a: p.real("a", d.a)?,
        h: cfg.h.unwrap_or(d.h),
        replicates: cfg.replicates.unwrap_or(d.replicates),
        js: to_u32(p.reals("radius_exponents", &as_f(&d.js))?)?,
        window: (
            p.real("window_lo", d.window.0)?,
            p.real("window_hi", d.window.1)?,
        ),
        alpha: p.real("alpha", d.alpha)?,
        kappa: p.real("kappa", d.kappa)?,
        density_js: to_u32(p.reals("density_exponents", &as_f(&d.density_js))?)?,
    };
    p.finish()?;
    let (summary, records) = measure::hausdorff_experiment(&hp, seed)?;
    let ratio_rows: Vec<HausdorffRow> = summary
        .radii
        .iter()
        .enumerate()
        .map(|(k, &r)| HausdorffRow {
            schema: measure::CENSUS_SCHEMA,
            radius: r,
            median_ratio_diameter: summary.median_ratio_diameter[k],
            median_ratio_radius: summary.median_ratio_radius[k],
        })
        .collect();
    let density_rows: Vec<DensityRow> = hp
        .density_js
        .iter()
        .enumerate()
        .map(|(k, &j)| DensityRow {
            schema: measure::CENSUS_SCHEMA,
            finest_radius: crate::laws::dyadic_radius(u64::from(j)),
            fraction_below: summary.fraction_below[k],
            fraction_above: summary.fraction_above[k],
        })
        .collect();
    Ok((
        records,
        vec![
            table("hausdorff_ratio.csv", &ratio_rows)?,
            table("hausdorff_density.csv", &density_rows)?,
        ],
    ))
}
