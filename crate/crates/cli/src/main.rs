use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use finpriv::dp::{geometric_release, laplace_release, DpParams};
use finpriv::fedlearn::{self, RunConfig};
use finpriv::fintracer::Scenario;
use finpriv::harness::{audit, audit_policy, run_protocol, ProtocolInput, ProtocolOutput, Transcript};
use finpriv::he::{keygen, GroupParams, PaillierKeyPair};
use finpriv::pprl::{encode_csv, BloomFilter, HmacHasher, DEFAULT_HASHES, DEFAULT_LENGTH};
use finpriv::rng;

#[derive(Parser)]
#[command(name = "finpriv", version, about = "Privacy-preserving financial-intelligence protocols")]
struct Cli {
    /// Run seed; a fresh one is drawn from OS entropy when omitted.
    #[arg(long, global = true)]
    seed_rng: Option<u64>,
    /// Write the protocol transcript (JSON Lines) to this file.
    #[arg(long, global = true, value_name = "PATH")]
    transcript: Option<PathBuf>,
    /// Audit the transcript; exit with status 2 on any violation.
    #[arg(long, global = true)]
    audit: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Intersect the FIU's suspect list with a bank's customers.
    Psi {
        /// Suspect identifiers, one per line.
        #[arg(long)]
        spl: PathBuf,
        /// Customer identifiers, one per line.
        #[arg(long)]
        customers: PathBuf,
    },
    /// Size of the intersection of two identifier lists.
    PsiCa {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Private x > y comparison.
    Compare {
        #[arg(long)]
        x: u64,
        #[arg(long)]
        y: u64,
        #[arg(long, default_value_t = 8)]
        bits: u32,
    },
    /// Bloom-filter record linkage.
    #[command(subcommand)]
    Pprl(PprlCommand),
    /// Encrypted transaction-graph tracing.
    #[command(subcommand)]
    Fintracer(FinTracerCommand),
    /// Federated linear regression.
    #[command(subcommand)]
    Fedlr(FedLrCommand),
    /// Differentially private release of numbers.
    #[command(subcommand)]
    Dp(DpCommand),
    /// Generate a key pair and print it as JSON.
    Keygen {
        #[arg(long, value_enum, default_value_t = Scheme::ExpElGamal)]
        scheme: Scheme,
        /// Paillier modulus size.
        #[arg(long, default_value_t = 2048)]
        bits: usize,
    },
}

#[derive(Subcommand)]
enum PprlCommand {
    /// Encode headerless `id,field,...` CSV rows as JSON Lines of Bloom filters.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        params: PprlParams,
    },
    /// Compare two encoded files and print pairs at or above a Dice threshold.
    Match {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
    },
}

#[derive(Args)]
struct PprlParams {
    /// Shared HMAC key, hex.
    #[arg(long)]
    key: String,
    #[arg(long, default_value_t = 2)]
    q: usize,
    #[arg(long, default_value_t = DEFAULT_LENGTH)]
    length: usize,
    #[arg(long, default_value_t = DEFAULT_HASHES)]
    hashes: u32,
    /// Derive positions as h1 + i*h2 instead of one HMAC per index.
    #[arg(long)]
    double_hashing: bool,
}

#[derive(Subcommand)]
enum FinTracerCommand {
    /// Run a scenario file and print the revealed tags.
    Run { scenario: PathBuf },
}

#[derive(Subcommand)]
enum FedLrCommand {
    /// Train from a config file; writes weights.json and loss.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config file's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DpCommand {
    /// Add noise to each number in a file (one per line).
    Noise {
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        sensitivity: f64,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = MechanismArg::Laplace)]
        mechanism: MechanismArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    ExpElGamal,
    Paillier,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Laplace,
    /// Integer inputs only.
    Geometric,
}

type CliResult<T> = Result<T, String>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_lines(path: &Path) -> CliResult<Vec<String>> {
    Ok(read(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

fn print_json(v: &impl serde::Serialize) {
    // A closed pipe (`| head`) is not an error worth reporting.
    let _ = writeln!(io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("output serializes"));
}

/// What a protocol run reports besides its result.
struct RunOptions {
    seed: u64,
    transcript: Option<PathBuf>,
    audit: bool,
}

/// Returns whether the audit (if requested) passed.
fn run_and_report(input: &ProtocolInput, opts: &RunOptions) -> CliResult<(ProtocolOutput, bool)> {
    let (out, transcript) = run_protocol(input, opts.seed).map_err(|e| e.to_string())?;
    finish_transcript(&transcript, opts, || audit_policy(input, &transcript).map_err(|e| e.to_string()))
        .map(|passed| (out, passed))
}

fn finish_transcript(
    transcript: &Transcript,
    opts: &RunOptions,
    policy: impl FnOnce() -> CliResult<finpriv::harness::AuditPolicy>,
) -> CliResult<bool> {
    if let Some(path) = &opts.transcript {
        let file = fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        transcript
            .write_jsonl(io::BufWriter::new(file))
            .map_err(|e| e.to_string())?;
    }
    if !opts.audit {
        return Ok(true);
    }
    let report = audit(transcript, &policy()?);
    let mut err = io::stderr().lock();
    for v in &report.violations {
        let _ = writeln!(err, "audit violation: {v}");
    }
    let _ = writeln!(
        err,
        "audit: {} messages, {} violations",
        report.messages,
        report.violations.len()
    );
    Ok(report.passed())
}

fn keygen_json(scheme: Scheme, bits: usize, seed: u64) -> CliResult<Value> {
    let mut r = rng::derive(seed, "keygen");
    Ok(match scheme {
        Scheme::ExpElGamal => {
            let keys = keygen(&GroupParams::reference(), &mut r);
            json!({
                "scheme": "exp-elgamal",
                "group": hex::encode(keys.params().to_bytes()),
                "public_key": hex::encode(keys.public().to_bytes()),
                "secret": { "x": keys.secret().exponent().to_str_radix(16) },
            })
        }
        Scheme::Paillier => {
            let keys = PaillierKeyPair::generate(bits, &mut r).map_err(|e| e.to_string())?;
            let (p, q) = keys.primes();
            json!({
                "scheme": "paillier",
                "public_key": hex::encode(keys.public().to_bytes()),
                "secret": { "p": p.to_str_radix(16), "q": q.to_str_radix(16) },
            })
        }
    })
}

fn pprl(cmd: PprlCommand) -> CliResult<()> {
    match cmd {
        PprlCommand::Encode { input, params } => {
            let key = hex::decode(params.key.trim()).map_err(|e| format!("--key: {e}"))?;
            let hasher = HmacHasher::new(&key).with_double_hashing(params.double_hashing);
            let file = fs::File::open(&input).map_err(|e| format!("{}: {e}", input.display()))?;
            let records =
                encode_csv(file, params.q, params.length, params.hashes, &hasher).map_err(|e| e.to_string())?;
            let mut out = io::stdout().lock();
            for r in records {
                let line = json!({ "id": r.id, "filter": r.filter.to_hex() });
                writeln!(out, "{line}").map_err(|e| e.to_string())?;
            }
            Ok(())
        }
        PprlCommand::Match { a, b, threshold } => {
            let (a, b) = (read_filters(&a)?, read_filters(&b)?);
            let mut out = io::stdout().lock();
            for (ida, fa) in &a {
                for (idb, fb) in &b {
                    let d = fa.dice(fb).map_err(|e| e.to_string())?;
                    if d >= threshold {
                        let line = json!({ "a": ida, "b": idb, "dice": d });
                        writeln!(out, "{line}").map_err(|e| e.to_string())?;
                    }
                }
            }
            Ok(())
        }
    }
}

fn read_filters(path: &Path) -> CliResult<Vec<(String, BloomFilter)>> {
    #[derive(serde::Deserialize)]
    struct Line {
        id: String,
        filter: String,
    }
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let at = |e: String| format!("{}:{}: {e}", path.display(), i + 1);
            let line: Line = serde_json::from_str(l).map_err(|e| at(e.to_string()))?;
            let bytes = hex::decode(&line.filter).map_err(|e| at(e.to_string()))?;
            let f = BloomFilter::from_bytes(&bytes).map_err(|e| at(e.to_string()))?;
            Ok((line.id, f))
        })
        .collect()
}

fn dp_noise(epsilon: f64, sensitivity: f64, input: &Path, mechanism: MechanismArg, seed: u64) -> CliResult<()> {
    let params = DpParams::new(epsilon, sensitivity).map_err(|e| e.to_string())?;
    let lines = read_lines(input)?;
    let mut out = io::stdout().lock();
    match mechanism {
        MechanismArg::Laplace => {
            let values = lines
                .iter()
                .map(|l| l.parse::<f64>().map_err(|_| format!("{l:?} is not a number")))
                .collect::<CliResult<Vec<_>>>()?;
            for v in laplace_release(&values, params, seed).values {
                writeln!(out, "{v}").map_err(|e| e.to_string())?;
            }
        }
        MechanismArg::Geometric => {
            let values = lines
                .iter()
                .map(|l| l.parse::<i64>().map_err(|_| format!("{l:?} is not an integer")))
                .collect::<CliResult<Vec<_>>>()?;
            for v in geometric_release(&values, params, seed).values {
                writeln!(out, "{v}").map_err(|e| e.to_string())?;
            }
        }
    }
    Ok(())
}

fn fedlr_train(config: &Path, out_dir: Option<PathBuf>, opts: &RunOptions, explicit_seed: bool) -> CliResult<bool> {
    let mut cfg = RunConfig::from_json(&read(config)?).map_err(|e| format!("{}: {e}", config.display()))?;
    if explicit_seed {
        cfg.training.seed = opts.seed;
    }
    let base = config.parent().unwrap_or(Path::new("."));
    let (parties, scales, labels) = cfg.load_data(base).map_err(|e| e.to_string())?;
    let input = ProtocolInput::FedLr {
        parties,
        labels,
        config: cfg.training.clone(),
    };
    let opts = RunOptions {
        seed: cfg.training.seed,
        transcript: opts.transcript.clone(),
        audit: opts.audit,
    };
    let (out, passed) = run_and_report(&input, &opts)?;
    let (ProtocolOutput::FedLr(result), ProtocolInput::FedLr { parties, .. }) = (out, &input) else {
        unreachable!("fedlr input yields fedlr output")
    };
    let dir = out_dir.unwrap_or_else(|| base.to_path_buf());
    fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| format!("{}: {e}", p.display()))
    };
    write("weights.json", fedlearn::weights_json(parties, &scales, &result))?;
    write("loss.csv", fedlearn::loss_csv(&result))?;
    print_json(&json!({
        "iterations": result.iterations,
        "converged": result.converged,
        "final_mse": result.loss.last(),
        "weights": dir.join("weights.json"),
        "loss": dir.join("loss.csv"),
    }));
    Ok(passed)
}

fn run(cli: Cli) -> CliResult<bool> {
    let explicit_seed = cli.seed_rng.is_some();
    let opts = RunOptions {
        seed: cli.seed_rng.unwrap_or_else(rng::entropy_seed),
        transcript: cli.transcript,
        audit: cli.audit,
    };
    let protocol = |input: ProtocolInput| -> CliResult<bool> {
        let (out, passed) = run_and_report(&input, &opts)?;
        print_json(&out);
        Ok(passed)
    };
    let local = |what: &str| {
        if opts.transcript.is_some() || opts.audit {
            eprintln!("note: {what} is a local computation; --transcript and --audit do not apply");
        }
    };
    match cli.command {
        Command::Psi { spl, customers } => protocol(ProtocolInput::Psi {
            spl: read_lines(&spl)?,
            customers: read_lines(&customers)?,
        }),
        Command::PsiCa { a, b } => protocol(ProtocolInput::PsiCa {
            a: read_lines(&a)?,
            b: read_lines(&b)?,
        }),
        Command::Compare { x, y, bits } => protocol(ProtocolInput::Compare { x, y, bits }),
        Command::Fintracer(FinTracerCommand::Run { scenario }) => {
            let s = Scenario::from_json(&read(&scenario)?).map_err(|e| format!("{}: {e}", scenario.display()))?;
            s.validate().map_err(|e| format!("{}: {e}", scenario.display()))?;
            protocol(ProtocolInput::FinTracer(s))
        }
        Command::Fedlr(FedLrCommand::Train { config, out }) => fedlr_train(&config, out, &opts, explicit_seed),
        Command::Pprl(cmd) => {
            local("pprl");
            pprl(cmd).map(|_| true)
        }
        Command::Dp(DpCommand::Noise {
            epsilon,
            sensitivity,
            input,
            mechanism,
        }) => {
            local("dp");
            dp_noise(epsilon, sensitivity, &input, mechanism, opts.seed).map(|_| true)
        }
        Command::Keygen { scheme, bits } => {
            local("keygen");
            print_json(&keygen_json(scheme, bits, opts.seed)?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
