//! Test records and verdict reports.
//!
//! A [`TestRecord`] is one statistical comparison: an observed value, the
//! reference it is checked against, the tolerance, and the signed margin
//! (positive means the check passed with room to spare). A [`StatReport`]
//! collects the records of one experiment run together with its seed and
//! configuration, and serializes to deterministic JSON.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// Where the reference value of a record comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// A closed-form law or bound.
    ClosedForm,
    /// An independent computation (enumeration, quadrature, brute force).
    DerivedOracle,
    /// A qualitative trend with no exact finite-resolution target.
    Trend,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Not enough samples to run the comparison.
    Insufficient,
}

/// How an observed value is compared with its reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Check {
    /// `|value − target| ≤ tolerance`.
    Near { target: f64, tolerance: f64 },
    /// `value < limit`.
    Below { limit: f64 },
    /// `value > limit`.
    Above { limit: f64 },
    /// `value ≤ bound + slack`: a one-sided inequality with a Monte Carlo
    /// allowance.
    AtMost { bound: f64, slack: f64 },
}

impl Check {
    /// Signed distance to failure; `NaN` values always fail.
    pub fn margin(&self, value: f64) -> f64 {
        let m = match *self {
            Check::Near { target, tolerance } => tolerance - (value - target).abs(),
            Check::Below { limit } => limit - value,
            Check::Above { limit } => value - limit,
            Check::AtMost { bound, slack } => bound + slack - value,
        };
        if m.is_nan() {
            f64::NEG_INFINITY
        } else {
            m
        }
    }

    pub fn passes(&self, value: f64) -> bool {
        let m = self.margin(value);
        match self {
            Check::Near { .. } | Check::AtMost { .. } => m >= 0.0,
            Check::Below { .. } | Check::Above { .. } => m > 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub id: String,
    /// Oracle the reference value comes from, e.g. `laws::lambda_star_tail`.
    pub reference: String,
    pub provenance: Provenance,
    /// What `value` measures: `ks`, `mean`, `chi2_p`, `correlation`, ...
    pub statistic: String,
    pub value: f64,
    pub check: Check,
    pub margin: f64,
    pub verdict: Verdict,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TestRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        reference: impl Into<String>,
        provenance: Provenance,
        statistic: impl Into<String>,
        value: f64,
        check: Check,
        n: usize,
        seed: u64,
    ) -> Self {
        let verdict = if check.passes(value) {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            id: id.into(),
            reference: reference.into(),
            provenance,
            statistic: statistic.into(),
            value,
            check,
            margin: check.margin(value),
            verdict,
            n,
            seed,
            note: None,
        }
    }

    /// A comparison that could not run because too few samples were available.
    #[allow(clippy::too_many_arguments)]
    pub fn insufficient(
        id: impl Into<String>,
        reference: impl Into<String>,
        provenance: Provenance,
        statistic: impl Into<String>,
        check: Check,
        n: usize,
        needed: usize,
        seed: u64,
    ) -> Self {
        let mut r = Self::new(
            id,
            reference,
            provenance,
            statistic,
            f64::NAN,
            check,
            n,
            seed,
        );
        r.verdict = Verdict::Insufficient;
        r.note = Some(format!("{n} samples, {needed} required"));
        r
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Replaces the tolerance part of the check (`tolerance` for `Near`, the
    /// limit for `Below`/`Above`, the slack for `AtMost`) and re-judges.
    pub fn override_tolerance(&mut self, t: f64) {
        match &mut self.check {
            Check::Near { tolerance, .. } => *tolerance = t,
            Check::Below { limit } | Check::Above { limit } => *limit = t,
            Check::AtMost { slack, .. } => *slack = t,
        }
        self.margin = self.check.margin(self.value);
        if self.verdict != Verdict::Insufficient {
            self.verdict = if self.check.passes(self.value) {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
        }
    }

    /// The id without its bracketed parameter suffix.
    pub fn base_id(&self) -> &str {
        self.id.split('[').next().unwrap_or(&self.id)
    }

    /// Trend records are reported but never decide the exit status.
    pub fn is_gating(&self) -> bool {
        self.provenance != Provenance::Trend
    }
}

impl fmt::Display for TestRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Insufficient => "SKIP",
        };
        let cmp = match self.check {
            Check::Near { target, tolerance } => format!("≈ {target:.6} ± {tolerance:.6}"),
            Check::Below { limit } => format!("< {limit:.6}"),
            Check::Above { limit } => format!("> {limit:.6}"),
            Check::AtMost { bound, slack } => format!("≤ {bound:.6} + {slack:.6}"),
        };
        write!(
            f,
            "{tag} {} {}={:.6} {cmp} margin={:.6} n={}",
            self.id, self.statistic, self.value, self.margin, self.n
        )?;
        if !self.is_gating() {
            write!(f, " [trend]")?;
        }
        if let Some(note) = &self.note {
            write!(f, " ({note})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    /// Effective configuration, as key/value text.
    pub config: BTreeMap<String, String>,
    pub records: Vec<TestRecord>,
}

impl StatReport {
    pub fn new(experiment: impl Into<String>, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.into(),
            seed,
            config: BTreeMap::new(),
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: TestRecord) {
        self.records.push(record);
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = TestRecord>) {
        self.records.extend(records);
    }

    /// True iff every gating record passed.
    pub fn passed(&self) -> bool {
        self.records
            .iter()
            .filter(|r| r.is_gating())
            .all(TestRecord::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TestRecord> {
        self.records.iter().filter(|r| r.is_gating() && !r.passed())
    }

    pub fn record(&self, id: &str) -> Option<&TestRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Concatenates several reports into one, keeping record order.
    pub fn merge(name: impl Into<String>, reports: &[StatReport]) -> Self {
        let seed = reports.first().map_or(0, |r| r.seed);
        let mut merged = Self::new(name, seed);
        for r in reports {
            for (k, v) in &r.config {
                merged
                    .config
                    .insert(format!("{}.{k}", r.experiment), v.clone());
            }
            merged.extend(r.records.iter().cloned());
        }
        merged
    }

    /// Flat CSV table, one row per record.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Row<'a> {
            experiment: &'a str,
            id: &'a str,
            reference: &'a str,
            provenance: Provenance,
            statistic: &'a str,
            value: f64,
            margin: f64,
            verdict: Verdict,
            n: usize,
            seed: u64,
        }
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(Row {
                experiment: &self.experiment,
                id: &r.id,
                reference: &r.reference,
                provenance: r.provenance,
                statistic: &r.statistic,
                value: r.value,
                margin: r.margin,
                verdict: r.verdict,
                n: r.n,
                seed: r.seed,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for StatReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} (seed {})", self.experiment, self.seed)?;
        for r in &self.records {
            writeln!(f, "  {r}")?;
        }
        let gating = self.records.iter().filter(|r| r.is_gating()).count();
        let failed = self.failures().count();
        write!(f, "{} of {gating} checks passed", gating - failed)
    }
}
