//! Acceptance suite at full scale. Each test prints its records and one
//! PASS/FAIL line for its criterion.

use std::sync::OnceLock;

use crtlab::feller::{self, HittingParams, KernelParams, RayKnightParams};
use crtlab::lab::{self, LawsParams};
use crtlab::measure::{self, FourthMomentParams, HausdorffParams, SupMassParams};
use crtlab::report::TestRecord;
use crtlab::spinal::{self, BismutParams, LambdaStarParams};

const SEED: u64 = 20_240_601;

fn level_records() -> &'static [TestRecord] {
    static CELL: OnceLock<Vec<TestRecord>> = OnceLock::new();
    CELL.get_or_init(|| {
        lab::level_law_checks(&LawsParams::default(), SEED).expect("level laws run")
    })
}

fn pick<'a>(records: &'a [TestRecord], prefixes: &[&str]) -> Vec<&'a TestRecord> {
    let picked: Vec<&TestRecord> = records
        .iter()
        .filter(|r| prefixes.iter().any(|p| r.base_id() == *p))
        .collect();
    assert_eq!(
        picked.len(),
        prefixes.len(),
        "expected one record per id in {prefixes:?}"
    );
    picked
}

fn criterion(number: u32, title: &str, records: &[&TestRecord]) {
    for r in records {
        println!("    {r}");
    }
    let failed: Vec<&str> = records
        .iter()
        .filter(|r| !r.passed())
        .map(|r| r.id.as_str())
        .collect();
    let verdict = if failed.is_empty() { "PASS" } else { "FAIL" };
    println!(
        "{verdict} criterion {number}: {title} ({}/{} records)",
        records.len() - failed.len(),
        records.len()
    );
    assert!(failed.is_empty(), "criterion {number} failed: {failed:?}");
}

fn all(records: &[TestRecord]) -> Vec<&TestRecord> {
    records.iter().collect()
}

#[test]
fn criterion_01_level_mass_law() {
    let recs = pick(level_records(), &["laws.level_mass_ks"]);
    criterion(1, "level mass is exponential with mean a", &recs);
}

#[test]
fn criterion_02_ball_count_law() {
    let recs = pick(
        level_records(),
        &["laws.ball_count_chi2", "laws.ball_count_mean"],
    );
    criterion(2, "ball count is geometric with success r/(2a)", &recs);
}

#[test]
fn criterion_03_ball_mass_law() {
    let recs = pick(
        level_records(),
        &["laws.ball_mass_ks", "laws.ball_mass_correlation"],
    );
    criterion(
        3,
        "ball masses are independent exponentials with mean r/2",
        &recs,
    );
}

#[test]
fn criterion_04_height_tail() {
    let rec = lab::height_tail_check(&LawsParams::default(), SEED).unwrap();
    criterion(4, "P(sup > 2 | sup > 1) = 1/2", &[&rec]);
}

#[test]
fn criterion_05_lambda_star_law() {
    let recs = spinal::lambda_star_experiment(&LambdaStarParams::default(), SEED).unwrap();
    criterion(5, "spinal sampler matches the ring-mass law", &all(&recs));
}

#[test]
fn criterion_06_bismut_rings() {
    let recs = spinal::bismut_ring_experiment(&BismutParams::default(), SEED).unwrap();
    criterion(
        6,
        "weighted ring masses match the ring-mass law",
        &all(&recs),
    );
}

#[test]
fn criterion_07_feller_kernel() {
    let recs = feller::kernel_experiment(&KernelParams::default(), SEED).unwrap();
    criterion(
        7,
        "Feller kernel Laplace transform and extinction",
        &all(&recs),
    );
}

#[test]
fn criterion_08_ray_knight() {
    let recs = feller::ray_knight_experiment(&RayKnightParams::default(), SEED).unwrap();
    criterion(
        8,
        "level-mass transitions follow the Feller kernel",
        &all(&recs),
    );
}

#[test]
fn criterion_09_bound_suite() {
    let mut recs = feller::hitting_bound_experiment(&HittingParams::default(), SEED).unwrap();
    recs.extend(measure::sup_level_mass_check(&SupMassParams::default(), SEED).unwrap());
    recs.extend(measure::fourth_moment_census_check(&FourthMomentParams::default(), SEED).unwrap());
    criterion(9, "one-sided bounds hold with margins", &all(&recs));
}

#[test]
fn criterion_10_covering_trend() {
    let (summary, recs) = measure::hausdorff_experiment(&HausdorffParams::default(), SEED).unwrap();
    println!(
        "    median R (diameter cover): {:?}",
        summary.median_ratio_diameter
    );
    println!(
        "    median R (radius cover):   {:?}",
        summary.median_ratio_radius
    );
    criterion(10, "covering ratio and density-ratio trends", &all(&recs));
}

#[test]
fn criterion_11_geometry() {
    let recs = lab::geometry_records(&LawsParams::default(), SEED).unwrap();
    criterion(
        11,
        "ball structure and distances match brute force",
        &all(&recs),
    );
}
