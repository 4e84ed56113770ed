//! `nsqkd`: key rates, thresholds, rate curves, protocol simulation and LP
//! bound checks for chained-Bell QKD against no-signalling eavesdroppers.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical or verification failure.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nsqkd_core::keyrate::{curve, key_rate_report, p_grid, threshold};
use nsqkd_core::nsbox::min_chain_given_marginal;
use nsqkd_core::simulator::{achievable_key_length, run};
use nsqkd_core::{Error, KeyRateReport, ProtocolConfig};

const CSV_HEADER: &str = "N,p,r_opt,I_AB,I_BE_bound,K";
const BOUND_VIOLATION_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "nsqkd", version, about = "Key rates of chained-Bell QKD against no-signalling eavesdroppers")]
struct Cli {
    /// Decimal places of numeric output (default 6, or 5 for thresholds).
    #[arg(long, global = true, value_name = "DIGITS")]
    precision: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One key-rate report as a CSV row.
    Rates(RatesArgs),
    /// Smallest Werner weight with a positive key rate.
    Threshold(ThresholdArgs),
    /// Key rates over a grid of chain lengths and Werner weights.
    Curve(CurveArgs),
    /// Monte-Carlo run of the protocol.
    Simulate(SimulateArgs),
    /// Minimum chained value given Bob's key marginal, against `2 beta - 1`.
    VerifyBounds(VerifyArgs),
}

#[derive(Debug, Args)]
struct RatesArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    /// Let Bob flip his key bits with the optimal probability.
    #[arg(long)]
    preprocess: bool,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    preprocess: bool,
}

#[derive(Debug, Args)]
struct CurveArgs {
    /// Comma-separated chain lengths.
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    #[arg(long)]
    p_min: f64,
    #[arg(long)]
    p_max: f64,
    #[arg(long)]
    step: f64,
    #[arg(long)]
    preprocess: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    rounds: usize,
    /// Probability that Alice uses the key setting.
    #[arg(long)]
    q: f64,
    /// Probability that Bob uses the key setting.
    #[arg(long)]
    qprime: f64,
    /// Draw outputs from Eve's attack mixture instead of the Werner state.
    #[arg(long)]
    adversarial: bool,
    #[arg(long, default_value_t = 0.0)]
    flip_r: f64,
    #[arg(long)]
    seed: u64,
    /// Transcript destination; omitted means no transcript is written.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    n: usize,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::OutOfRange { .. } | Error::Structure(_) | Error::Limit(_) => Failure::Usage(e.to_string()),
            Error::Solver(_) | Error::NoSignChange { .. } | Error::InsufficientData(_) => {
                Failure::Numerical(e.to_string())
            }
        }
    }
}

fn io_failure(path: &std::path::Path, e: io::Error) -> Failure {
    Failure::Usage(format!("cannot write {}: {e}", path.display()))
}

fn report_row(r: &KeyRateReport, digits: usize) -> String {
    format!(
        "{},{:.d$},{:.d$},{:.d$},{:.d$},{:.d$}\n",
        r.n,
        r.p,
        r.r_opt,
        r.i_ab,
        r.i_be_bound,
        r.key_rate,
        d = digits
    )
}

fn write_file(path: &PathBuf, body: &str) -> Result<(), Failure> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| io_failure(path, e))?);
    f.write_all(body.as_bytes()).map_err(|e| io_failure(path, e))?;
    f.flush().map_err(|e| io_failure(path, e))
}

fn rates(args: &RatesArgs, digits: usize) -> Result<String, Failure> {
    eprintln!("nsqkd rates n={} p={} preprocess={} precision={digits}", args.n, args.p, args.preprocess);
    let r = key_rate_report(args.n, args.p, args.preprocess)?;
    Ok(format!("{CSV_HEADER}\n{}", report_row(&r, digits)))
}

fn threshold_cmd(args: &ThresholdArgs, digits: usize) -> Result<String, Failure> {
    eprintln!("nsqkd threshold n={} preprocess={} precision={digits}", args.n, args.preprocess);
    let t = threshold(args.n, args.preprocess)?;
    Ok(format!("{t:.digits$}\n"))
}

fn curve_cmd(args: &CurveArgs, digits: usize) -> Result<String, Failure> {
    let n_list: Vec<String> = args.n_list.iter().map(usize::to_string).collect();
    eprintln!(
        "nsqkd curve n_list={} p_min={} p_max={} step={} preprocess={} precision={digits} out={}",
        n_list.join(","),
        args.p_min,
        args.p_max,
        args.step,
        args.preprocess,
        args.out.display()
    );
    let grid = p_grid(args.p_min, args.p_max, args.step)?;
    let reports = curve(&args.n_list, &grid, args.preprocess)?;
    let mut body = format!("{CSV_HEADER}\n");
    for r in &reports {
        body.push_str(&report_row(r, digits));
    }
    write_file(&args.out, &body)?;
    Ok(String::new())
}

fn simulate(args: &SimulateArgs, digits: usize) -> Result<String, Failure> {
    eprintln!(
        "nsqkd simulate n={} p={} rounds={} q={} qprime={} adversarial={} flip_r={} seed={} precision={digits} out={}",
        args.n,
        args.p,
        args.rounds,
        args.q,
        args.qprime,
        args.adversarial,
        args.flip_r,
        args.seed,
        args.out.as_ref().map_or_else(|| "-".to_string(), |p| p.display().to_string())
    );
    let config = ProtocolConfig {
        n: args.n,
        p: args.p,
        rounds: args.rounds,
        q: args.q,
        q_prime: args.qprime,
        flip_r: args.flip_r,
        seed: args.seed,
        adversarial: args.adversarial,
    };
    let (transcript, report) = run(&config)?;
    if let Some(path) = &args.out {
        let f = File::create(path).map_err(|e| io_failure(path, e))?;
        transcript.write_csv(BufWriter::new(f)).map_err(|e| io_failure(path, e))?;
    }
    let bits = achievable_key_length(&report, &config)?;

    let mut out = String::from("quantity,value,std_error\n");
    let mut line = |name: &str, est: Option<(f64, f64)>| {
        match est {
            Some((v, s)) => writeln!(out, "{name},{v:.digits$},{s:.digits$}"),
            None => writeln!(out, "{name},,"),
        }
        .expect("writing to a String cannot fail");
    };
    line("chain_est", report.chain_est.map(|e| (e.value, e.std_error)));
    line("qber_est", report.qber_est.map(|e| (e.value, e.std_error)));
    if args.adversarial {
        line("eve_info", report.eve_empirical_info.map(|e| (e.value, e.std_error)));
    }
    writeln!(out, "key_count,{},", report.key_count).expect("writing to a String cannot fail");
    writeln!(out, "test_count,{},", report.test_count).expect("writing to a String cannot fail");
    writeln!(out, "key_length_bits,{bits},").expect("writing to a String cannot fail");
    Ok(out)
}

fn verify_bounds(args: &VerifyArgs, digits: usize) -> Result<String, Failure> {
    eprintln!("nsqkd verify-bounds n={} precision={digits}", args.n);
    let mut out = String::from("beta,lp_min,bound\n");
    let mut worst = 0.0f64;
    for k in 0..=10 {
        let beta = f64::from(k) / 10.0;
        let lp_min = min_chain_given_marginal(args.n, beta)?;
        let bound = 2.0 * beta - 1.0;
        worst = worst.max(bound - lp_min);
        writeln!(out, "{beta:.1},{lp_min:.digits$},{bound:.digits$}").expect("writing to a String cannot fail");
    }
    if worst > BOUND_VIOLATION_TOL {
        print!("{out}");
        return Err(Failure::Numerical(format!("bound violated by {worst:e}")));
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let digits = cli.precision.unwrap_or(6);
    let result = match &cli.command {
        Command::Rates(a) => rates(a, digits),
        Command::Threshold(a) => threshold_cmd(a, cli.precision.unwrap_or(5)),
        Command::Curve(a) => curve_cmd(a, digits),
        Command::Simulate(a) => simulate(a, digits),
        Command::VerifyBounds(a) => verify_bounds(a, digits),
    };
    match result {
        Ok(text) => {
            let mut stdout = io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
