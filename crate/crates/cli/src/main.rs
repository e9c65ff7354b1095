//! `fmm2d`: evaluate fields from point files and run the error, speedup and
//! scaling experiments.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fmm2d::oracle::{
    self, experiment_error_study, experiment_scaling, experiment_speedup, Distribution, ErrorStudy,
    ScalingStudy, SpeedupStudy,
};
use fmm2d::{
    estimate_work, evaluate, evaluate_direct, FieldStats, FmmConfig, Kernel, OptimizationFlags,
    Source, SplitPolicy, Theta,
};

const EXIT_USAGE: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "fmm2d", version, about = "2D fast multipole summation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the field of a point file at its own points.
    Eval(EvalArgs),
    /// Relative error against sampled direct sums over θ and p.
    Errorstudy(ErrorArgs),
    /// Median-split against midpoint-split timings over σ.
    Speedup(SpeedupArgs),
    /// Wall time against N for several distributions.
    Scaling(ScalingArgs),
    /// Print the predicted work and box layout for N sources.
    Estimate(EstimateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Force,
    Log,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Median,
    Midpoint,
}

#[derive(Args)]
struct EngineArgs {
    /// Kernel: complex force -1/(z-w) or log|z-w|.
    #[arg(long, value_enum, default_value = "force")]
    kernel: KernelArg,
    /// Separation parameter in (0, 1).
    #[arg(long, default_value_t = 0.5, value_parser = parse_theta)]
    theta: f64,
    /// Number of expansion coefficients.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    p: u64,
    /// Target number of sources per leaf box.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    leaf_size: u64,
    #[arg(long, value_enum, default_value = "median")]
    split: SplitArg,
    /// Let a box interact with a well-separated parent of its neighbour.
    #[arg(long)]
    parent_merge: bool,
    /// Use the exchanged criterion to replace direct sums with P2L/M2P.
    #[arg(long)]
    rr_exchange: bool,
    /// Worker threads, 0 for all cores.
    #[arg(long, env = "FMM_THREADS", default_value_t = 0)]
    threads: usize,
}

impl EngineArgs {
    fn config(&self) -> FmmConfig {
        FmmConfig {
            theta: Theta::new(self.theta).expect("validated by parser"),
            p: self.p as usize,
            leaf_target: self.leaf_size as usize,
            split_policy: match self.split {
                SplitArg::Median => SplitPolicy::MedianAsymmetric,
                SplitArg::Midpoint => SplitPolicy::MidpointUniform,
            },
            flags: OptimizationFlags {
                parent_merge: self.parent_merge,
                rr_exchange: self.rr_exchange,
            },
            kernel: match self.kernel {
                KernelArg::Force => Kernel::InverseForce,
                KernelArg::Log => Kernel::LogPotential,
            },
            threads: self.threads,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// CSV file with header `x,y,m`.
    #[arg(long)]
    input: PathBuf,
    /// Output CSV `x,y,phi_re,phi_im`; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Use the O(N²) direct sum instead of the multipole method.
    #[arg(long)]
    direct: bool,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct ErrorArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.7071067811865476", value_parser = parse_theta)]
    thetas: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    p_min: usize,
    #[arg(long, default_value_t = 20)]
    p_max: usize,
    #[arg(long, default_value_t = 2)]
    p_step: usize,
    /// Sampled points for the direct reference.
    #[arg(long, default_value_t = 200)]
    m: usize,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "uniform_disc,inverse_radial_disc"
    )]
    dists: Vec<Distribution>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct SpeedupArgs {
    #[arg(long, default_value_t = 200_000)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,0.3,0.1,0.03,0.01")]
    sigmas: Vec<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "normal_square,layer_square"
    )]
    dists: Vec<Distribution>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct ScalingArgs {
    /// Single problem size; overrides --n-list.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "100000,200000,400000")]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "uniform_square,normal_square:0.1,layer_square:0.1"
    )]
    dists: Vec<Distribution>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    engine: EngineArgs,
}

fn parse_theta(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    Theta::new(v).map(Theta::value).map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Input(String),
    Io(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Eval(a) => cmd_eval(&a),
        Command::Errorstudy(a) => cmd_errorstudy(&a),
        Command::Speedup(a) => cmd_speedup(&a),
        Command::Scaling(a) => cmd_scaling(&a),
        Command::Estimate(a) => cmd_estimate(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn read_points(path: &Path) -> Result<Vec<Source>, Failure> {
    let file = File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "y", "m"] {
        return Err(Failure::Input(format!(
            "{}: header must be `x,y,m`, found `{}`",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut sources = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record =
            record.map_err(|e| Failure::Input(format!("{}: row {row}: {e}", path.display())))?;
        let field = |i: usize, name: &str| -> Result<f64, Failure> {
            let v: f64 = record[i].parse().map_err(|_| {
                Failure::Input(format!(
                    "{}: row {row}: bad {name} value {:?}",
                    path.display(),
                    &record[i]
                ))
            })?;
            if !v.is_finite() {
                return Err(Failure::Input(format!(
                    "{}: row {row}: {name} is not finite",
                    path.display()
                )));
            }
            Ok(v)
        };
        sources.push(Source::new(field(0, "x")?, field(1, "y")?, field(2, "m")?));
    }
    if sources.is_empty() {
        return Err(Failure::Input(format!("{}: no data rows", path.display())));
    }
    Ok(sources)
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn report_stats(stats: &FieldStats) {
    eprintln!("levels: {}", stats.n_levels);
    eprintln!("boxes per level: {:?}", stats.boxes_per_level);
    eprintln!("weak pairs per level: {:?}", stats.weak_pairs_per_level);
    eprintln!(
        "merged pairs: {}, direct leaf pairs: {}, conversion pairs: {}",
        stats.merged_pairs, stats.direct_leaf_pairs, stats.conversion_pairs
    );
    let t = &stats.timings;
    eprintln!(
        "time [s]: tree {:.4} connect {:.4} upward {:.4} m2l {:.4} downward {:.4} near {:.4} total {:.4}",
        t.tree.as_secs_f64(),
        t.connect.as_secs_f64(),
        t.upward.as_secs_f64(),
        t.m2l.as_secs_f64(),
        t.downward.as_secs_f64(),
        t.near.as_secs_f64(),
        t.total().as_secs_f64()
    );
}

fn cmd_eval(a: &EvalArgs) -> Result<(), Failure> {
    let sources = read_points(&a.input)?;
    let config = a.engine.config();
    let result = if a.direct {
        evaluate_direct(&sources, config.kernel)
    } else {
        evaluate(&sources, &config)
    }
    .map_err(|e| Failure::Usage(e.to_string()))?;
    let mut out = open_output(a.output.as_deref())?;
    writeln!(out, "x,y,phi_re,phi_im")?;
    for (s, phi) in sources.iter().zip(&result.potentials) {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            s.position.re, s.position.im, phi.re, phi.im
        )?;
    }
    out.flush()?;
    report_stats(&result.stats);
    Ok(())
}

fn cmd_errorstudy(a: &ErrorArgs) -> Result<(), Failure> {
    if a.p_min == 0 || a.p_min > a.p_max || a.p_step == 0 {
        return Err(Failure::Usage(format!(
            "--p-min {} --p-max {} --p-step {} is not a valid range",
            a.p_min, a.p_max, a.p_step
        )));
    }
    let study = ErrorStudy {
        n: a.n,
        p_values: (a.p_min..=a.p_max).step_by(a.p_step).collect(),
        thetas: a.thetas.clone(),
        dists: a.dists.clone(),
        m: a.m,
        seed: a.seed,
        base: a.engine.config(),
    };
    let rows = experiment_error_study(&study).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut out = open_output(a.out.as_deref())?;
    oracle::write_error_csv(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

fn cmd_speedup(a: &SpeedupArgs) -> Result<(), Failure> {
    let study = SpeedupStudy {
        n: a.n,
        sigmas: a.sigmas.clone(),
        dists: a.dists.clone(),
        seed: a.seed,
        reps: a.reps,
        base: a.engine.config(),
    };
    let rows = experiment_speedup(&study).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut out = open_output(a.out.as_deref())?;
    oracle::write_speedup_csv(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

fn cmd_scaling(a: &ScalingArgs) -> Result<(), Failure> {
    let study = ScalingStudy {
        n_list: a.n.map_or_else(|| a.n_list.clone(), |n| vec![n]),
        dists: a.dists.clone(),
        seed: a.seed,
        reps: a.reps,
        base: a.engine.config(),
    };
    let rows = experiment_scaling(&study).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut out = open_output(a.out.as_deref())?;
    oracle::write_scaling_csv(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

fn cmd_estimate(a: &EstimateArgs) -> Result<(), Failure> {
    let config = a.engine.config();
    let w = estimate_work(&config, a.n);
    println!("n: {}", a.n);
    println!("theta: {}, p: {}", config.theta.value(), config.p);
    println!("work units (p^2 N / theta^2): {:e}", w.units);
    println!("levels: {}", w.boxes_per_level.len());
    println!("boxes per level: {:?}", w.boxes_per_level);
    Ok(())
}
