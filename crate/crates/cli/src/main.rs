use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crtlab::codec;
use crtlab::config::{ConfigFile, ExperimentConfig};
use crtlab::excursion::ConditionedSampler;
use crtlab::geometry::TreeIndex;
use crtlab::report::StatReport;
use crtlab::rng::{derive_seed, stream};
use crtlab::run::run;

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "crtlab",
    version,
    about = "Monte Carlo checks for level sets of the Brownian tree"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Level mass, ball count and mass laws, height and duration tails,
    /// branching, geometry audit, Λ* law, Feller kernel.
    Laws(RunArgs),
    /// Ray-Knight transitions and Feller hitting bounds.
    Rayknight(RunArgs),
    /// Ring-mass law around a local-time-sampled point.
    Bismut(RunArgs),
    /// Level-mass, fourth-moment, heavy-ball bounds and the grid census table.
    Census(RunArgs),
    /// Covering-ratio and density-ratio trends.
    Hausdorff(RunArgs),
    /// Merge JSON reports into one.
    Report(ReportArgs),
    /// Sample one excursion under N_a and write it to a file.
    Sample(SampleArgs),
    /// Read an excursion file and print its ball decomposition as CSV.
    Balls(BallsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file with a section per experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Lattice step; fractions such as 1/128 are accepted.
    #[arg(long)]
    h: Option<String>,
    /// Output directory for the JSON report and CSV tables.
    #[arg(long, env = "CRTLAB_OUT")]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Print the JSON report on stdout instead of the text summary.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Reports to merge.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = "merged")]
    name: String,
    #[arg(long, env = "CRTLAB_OUT")]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Binary,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, default_value = "1")]
    a: String,
    #[arg(long, default_value = "1/128")]
    h: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Compress everything above this level.
    #[arg(long)]
    ceiling: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    output: PathBuf,
}

#[derive(Args)]
struct BallsArgs {
    input: PathBuf,
    #[arg(long)]
    a: String,
    #[arg(long)]
    r: String,
}

enum Failure {
    Config(String),
    Checks,
}

impl From<crtlab::Error> for Failure {
    fn from(e: crtlab::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Laws(a) => experiment("laws", a),
        Command::Rayknight(a) => experiment("rayknight", a),
        Command::Bismut(a) => experiment("bismut", a),
        Command::Census(a) => experiment("census", a),
        Command::Hausdorff(a) => experiment("hausdorff", a),
        Command::Report(a) => report(a),
        Command::Sample(a) => sample(a),
        Command::Balls(a) => balls(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(EXIT_FAIL),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn real(key: &str, value: &str) -> Result<f64, Failure> {
    Ok(crtlab::config::parse_real(key, value)?)
}

fn experiment(name: &str, args: RunArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_file(&ConfigFile::parse(&text)?, name)?
        }
        None => ExperimentConfig::new(name)?,
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = Some(r);
    }
    if let Some(h) = &args.h {
        cfg.h = Some(real("h", h)?);
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    cfg.validate()?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }

    let output = run(&cfg)?;
    for id in &output.unmatched_tolerances {
        eprintln!("warning: tolerance override `tol.{id}` matched no record");
    }
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{name}.json")), output.report.to_json()?)?;
        let mut records = Vec::new();
        output.report.write_csv(&mut records)?;
        fs::write(dir.join(format!("{name}_records.csv")), records)?;
        for t in &output.tables {
            fs::write(dir.join(&t.name), &t.csv)?;
        }
    }
    emit(&output.report, args.json)
}

fn emit(report: &StatReport, json: bool) -> Result<(), Failure> {
    if json {
        print!("{}", report.to_json()?);
    } else {
        println!("{report}");
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn report(args: ReportArgs) -> Result<(), Failure> {
    let reports = args
        .inputs
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)
                .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            StatReport::from_json(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let merged = StatReport::merge(args.name.clone(), &reports);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{}.json", args.name)), merged.to_json()?)?;
        let mut records = Vec::new();
        merged.write_csv(&mut records)?;
        fs::write(dir.join(format!("{}_records.csv", args.name)), records)?;
    }
    emit(&merged, args.json)
}

fn sample(args: SampleArgs) -> Result<(), Failure> {
    let h = real("h", &args.h)?;
    let mut sampler = ConditionedSampler::new(h, real("a", &args.a)?)?;
    if let Some(c) = &args.ceiling {
        sampler = sampler.ceiling(real("ceiling", c)?)?;
    }
    let exc = sampler.sample(&mut stream(derive_seed(args.seed, "cli.sample"), 0));
    write_excursion(&args.output, &exc, args.format)
}

fn write_excursion(
    path: &Path,
    exc: &crtlab::excursion::LatticeExcursion,
    format: Format,
) -> Result<(), Failure> {
    match format {
        Format::Csv => codec::write_csv(exc, fs::File::create(path)?)?,
        Format::Binary => fs::write(path, codec::encode_binary(exc))?,
    }
    Ok(())
}

fn balls(args: BallsArgs) -> Result<(), Failure> {
    let bytes = fs::read(&args.input)?;
    let exc = if bytes.starts_with(codec::MAGIC) {
        codec::decode_binary(&bytes)?
    } else {
        codec::read_csv(bytes.as_slice())?
    };
    let idx = TreeIndex::new(&exc);
    let dec = idx.ball_decomposition(real("a", &args.a)?, real("r", &args.r)?)?;
    dec.write_csv(std::io::stdout().lock())?;
    Ok(())
}
