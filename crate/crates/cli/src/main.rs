//! `framecs`: command-line front end for framecs-core.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use framecs_core::drip::{exact_drip, exact_rip, random_lower_bound};
use framecs_core::frames::{check_frame, coherence_of};
use framecs_core::guarantees::{certify, certify_frame, GuaranteeCertificate};
use framecs_core::harness::config::ExperimentConfig;
use framecs_core::harness::table::to_csv_string;
use framecs_core::harness::{rows, run_experiment};
use framecs_core::sensing::{concentration_probe, gen_matrix, measure};
use framecs_core::serde17;
use framecs_core::solvers::{solve_p0_oracle, solve_p1, solve_pq};
use framecs_core::{
    audit_lemmas, io, DenseMatrix, Error, InequalityAuditRecord, MatrixKind, NoiseMode, Program, RecoveryResult, Result,
    RipReport, SensingModel, SolverOptions, TightFrame, Vector,
};

#[derive(Parser, Debug)]
#[command(name = "framecs", version, about = "Compressed sensing with signals sparse in tight frames")]
struct Cli {
    /// Seed for every random draw of the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file: the experiment config for `experiment run`, solver options
    /// for `solve`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Report format. Matrix and vector files are always plain text.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build or check tight frames.
    #[command(subcommand)]
    Frame(FrameCmd),
    /// Measurement matrices and observations.
    #[command(subcommand)]
    Sense(SenseCmd),
    /// Restricted isometry constants adapted to a frame.
    #[command(subcommand)]
    Drip(DripCmd),
    /// Recovery constants and applicability for a given delta_2s.
    Certify(CertifyArgs),
    /// Solve a recovery program.
    #[command(subcommand)]
    Solve(SolveCmd),
    /// Check the intermediate inequalities of the recovery argument.
    #[command(subcommand)]
    Lemmas(LemmasCmd),
    /// Run experiments from a JSON config.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FrameKind {
    Identity,
    Dct,
    IdentityDct,
    Random,
}

#[derive(Subcommand, Debug)]
enum FrameCmd {
    /// Write an n x d frame matrix.
    Gen {
        #[arg(long, value_enum)]
        kind: FrameKind,
        #[arg(long)]
        n: usize,
        /// Number of frame vectors (random frames only; default n).
        #[arg(long)]
        d: Option<usize>,
    },
    /// Report tightness defect, zero columns and coherence of a matrix file.
    Verify {
        #[arg(long)]
        frame: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Gaussian,
    Bernoulli,
}

impl From<Kind> for MatrixKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Gaussian => MatrixKind::Gaussian,
            Kind::Bernoulli => MatrixKind::Bernoulli,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Noise {
    None,
    Bounded,
    Gaussian,
}

#[derive(Subcommand, Debug)]
enum SenseCmd {
    /// Write a random m x n measurement matrix.
    Gen {
        #[arg(long, value_enum, default_value = "gaussian")]
        kind: Kind,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
    },
    /// Fraction of draws with | ||A v||^2 - ||v||^2 | >= delta ||v||^2.
    Probe {
        #[arg(long, value_enum, default_value = "gaussian")]
        kind: Kind,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Vector file for v (default: the normalized all-ones vector).
        #[arg(long)]
        vector: Option<PathBuf>,
    },
    /// Write y = A f + z.
    Measure {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        signal: PathBuf,
        #[arg(long, value_enum, default_value = "none")]
        noise: Noise,
        /// Noise norm for bounded noise.
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Standard deviation for Gaussian noise.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
    },
}

#[derive(Args, Debug)]
struct DripArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Frame file (default: the identity, giving the plain RIP constant).
    #[arg(long)]
    frame: Option<PathBuf>,
    /// Order of the constant.
    #[arg(long)]
    s: usize,
}

#[derive(Subcommand, Debug)]
enum DripCmd {
    /// Exact constant by support enumeration.
    Exact(DripArgs),
    /// Lower bound from random supports.
    Lower {
        #[command(flatten)]
        args: DripArgs,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    s: usize,
    /// Number of frame vectors; the n <= 4s regime then also needs d <= 4s.
    #[arg(long)]
    d: Option<usize>,
    /// Exponent of the lq regime.
    #[arg(long)]
    q: Option<f64>,
}

#[derive(Args, Debug)]
struct ProblemArgs {
    #[arg(long)]
    frame: PathBuf,
    #[arg(long)]
    matrix: PathBuf,
    /// Observation vector file.
    #[arg(long)]
    y: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Also write the recovered signal to this vector file.
    #[arg(long)]
    f_hat_out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum SolveCmd {
    /// min ||D^T g||_1 subject to ||A g - y|| <= eps.
    L1(ProblemArgs),
    /// min ||D^T g||_q^q subject to ||A g - y|| <= eps.
    Lq {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        q: f64,
    },
    /// min ||D^T g||_0 subject to A g = y, by exhaustive search.
    L0 {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Largest support size tried.
        #[arg(long)]
        s_max: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Subcommand, Debug)]
enum LemmasCmd {
    /// Audit every applicable inequality for one recovered signal.
    Audit {
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// The true signal f.
        #[arg(long)]
        signal: PathBuf,
        /// The recovered signal.
        #[arg(long)]
        f_hat: PathBuf,
        #[arg(long)]
        s: usize,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        /// delta_2s of (A, D); computed exactly when omitted.
        #[arg(long)]
        delta: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
enum ExperimentCmd {
    /// Run all trials of `--config`; CSV by default.
    Run,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let format = cli.format.unwrap_or(Format::Json);
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Frame(FrameCmd::Gen { kind, n, d }) => {
            let frame = match kind {
                FrameKind::Identity => TightFrame::identity(*n),
                FrameKind::Dct => TightFrame::dct(*n),
                FrameKind::IdentityDct => TightFrame::identity_dct(*n),
                FrameKind::Random => TightFrame::random(*n, d.unwrap_or(*n), cli.seed),
            }?;
            emit(out, &io::format_matrix(frame.matrix()))
        }
        Command::Frame(FrameCmd::Verify { frame }) => {
            let m = io::read_matrix(frame)?;
            let check = check_frame(&m);
            let report = FrameReport {
                n: m.nrows(),
                d: m.ncols(),
                defect: check.defect,
                tight: check.is_tight_frame(),
                coherence: if m.ncols() >= 2 { Some(coherence_of(&m)?) } else { None },
                zero_columns: check.zero_columns.clone(),
            };
            match format {
                Format::Json => emit_json(out, &report),
                Format::Csv => emit(
                    out,
                    &table(
                        &["n", "d", "defect", "tight", "coherence", "zero_columns"],
                        [vec![
                            report.n.to_string(),
                            report.d.to_string(),
                            serde17::fmt(report.defect),
                            report.tight.to_string(),
                            report.coherence.map(serde17::fmt).unwrap_or_default(),
                            join(&report.zero_columns),
                        ]],
                    ),
                ),
            }
        }
        Command::Sense(SenseCmd::Gen { kind, m, n }) => {
            emit(out, &io::format_matrix(&gen_matrix((*kind).into(), *m, *n, cli.seed)?))
        }
        Command::Sense(SenseCmd::Probe { kind, m, n, delta, trials, vector }) => {
            let nu = match vector {
                Some(p) => io::read_vector(p)?,
                None => Vector::from_element(*n, 1.0 / (*n as f64).sqrt()),
            };
            if nu.len() != *n {
                return Err(Error::Contract(format!("vector has length {}, expected n = {n}", nu.len())));
            }
            let fraction = concentration_probe((*kind).into(), *m, &nu, *delta, *trials, cli.seed)?;
            let report = ProbeReport { m: *m, n: *n, delta: *delta, trials: *trials, fraction };
            match format {
                Format::Json => emit_json(out, &report),
                Format::Csv => emit(
                    out,
                    &table(
                        &["m", "n", "delta", "trials", "fraction"],
                        [vec![
                            m.to_string(),
                            n.to_string(),
                            serde17::fmt(*delta),
                            trials.to_string(),
                            serde17::fmt(fraction),
                        ]],
                    ),
                ),
            }
        }
        Command::Sense(SenseCmd::Measure { matrix, signal, noise, eps, sigma }) => {
            let a = io::read_matrix(matrix)?;
            let f = io::read_vector(signal)?;
            let mode = match noise {
                Noise::None => NoiseMode::None,
                Noise::Bounded => NoiseMode::Bounded { eps: *eps },
                Noise::Gaussian => NoiseMode::Gaussian { sigma: *sigma },
            };
            let model = measure(&a, &f, mode, cli.seed)?;
            emit(out, &io::format_matrix(&DenseMatrix::from_column_slice(model.m(), 1, model.y.as_slice())))
        }
        Command::Drip(cmd) => {
            let (args, trials) = match cmd {
                DripCmd::Exact(args) => (args, None),
                DripCmd::Lower { args, trials } => (args, Some(*trials)),
            };
            let a = io::read_matrix(&args.matrix)?;
            let frame = match &args.frame {
                Some(p) => Some(TightFrame::read(p)?),
                None => None,
            };
            let report = match (trials, &frame) {
                (None, Some(frame)) => exact_drip(&a, frame, args.s)?,
                (None, None) => exact_rip(&a, args.s)?,
                (Some(t), Some(frame)) => random_lower_bound(&a, frame, args.s, t, cli.seed)?,
                (Some(t), None) => random_lower_bound(&a, &TightFrame::identity(a.ncols())?, args.s, t, cli.seed)?,
            };
            match format {
                Format::Json => emit_json(out, &report),
                Format::Csv => emit(out, &rip_table(&report)),
            }
        }
        Command::Certify(c) => {
            let certs = match c.d {
                Some(d) => certify_frame(c.delta, c.n, d, c.s, c.q),
                None => certify(c.delta, c.n, c.s, c.q),
            };
            match format {
                Format::Json => emit_json(out, &certs),
                Format::Csv => emit(out, &certificate_table(&certs)),
            }
        }
        Command::Solve(cmd) => {
            let opts = match &cli.config {
                Some(p) => {
                    let opts: SolverOptions = serde_json::from_str(&std::fs::read_to_string(p)?)?;
                    opts.validate()?;
                    opts
                }
                None => SolverOptions::default(),
            };
            let problem = match cmd {
                SolveCmd::L1(p) | SolveCmd::Lq { problem: p, .. } | SolveCmd::L0 { problem: p, .. } => p,
            };
            let frame = TightFrame::read(&problem.frame)?;
            let model = SensingModel::new(io::read_matrix(&problem.matrix)?, io::read_vector(&problem.y)?, problem.eps)?;
            let result = match cmd {
                SolveCmd::L1(_) => solve_p1(&frame, &model, &opts)?,
                SolveCmd::Lq { q, .. } => solve_pq(&frame, &model, *q, &opts)?,
                SolveCmd::L0 { s_max, tol, .. } => solve_p0_oracle(&frame, &model, *s_max, *tol)?,
            };
            if let Some(p) = &problem.f_hat_out {
                io::write_vector(p, &result.f_hat)?;
            }
            match format {
                Format::Json => emit_json(out, &result),
                Format::Csv => emit(out, &result_table(&result)),
            }
        }
        Command::Lemmas(LemmasCmd::Audit { frame, matrix, y, eps, signal, f_hat, s, q, delta }) => {
            let frame = TightFrame::read(frame)?;
            let mut model = SensingModel::new(io::read_matrix(matrix)?, io::read_vector(y)?, *eps)?;
            model.f_true = Some(io::read_vector(signal)?);
            let f_hat = io::read_vector(f_hat)?;
            let delta = match delta {
                Some(d) => *d,
                None => exact_drip(&model.a, &frame, 2 * s)?.delta,
            };
            let records = audit_lemmas(&frame, &model, &f_hat, *s, *q, delta)?;
            match format {
                Format::Json => emit_json(out, &records),
                Format::Csv => emit(out, &audit_table(&records)),
            }
        }
        Command::Experiment(ExperimentCmd::Run) => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| Error::Contract("experiment run needs --config <json>".into()))?;
            let config = ExperimentConfig::read(path)?;
            let records = run_experiment(&config)?;
            let target = out.or(config.output.as_deref());
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => emit(target, &to_csv_string(rows(&records))),
                Format::Json => emit_json(target, &records),
            }
        }
    }
}

#[derive(Serialize)]
struct FrameReport {
    n: usize,
    d: usize,
    #[serde(with = "serde17")]
    defect: f64,
    tight: bool,
    #[serde(with = "serde17::option")]
    coherence: Option<f64>,
    zero_columns: Vec<usize>,
}

#[derive(Serialize)]
struct ProbeReport {
    m: usize,
    n: usize,
    #[serde(with = "serde17")]
    delta: f64,
    trials: usize,
    #[serde(with = "serde17")]
    fraction: f64,
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize + ?Sized>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(path, &text)
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("writing to memory cannot fail");
    for row in rows {
        w.write_record(&row).expect("writing to memory cannot fail");
    }
    String::from_utf8(w.into_inner().expect("writing to memory cannot fail")).expect("CSV output is UTF-8")
}

fn opt(x: Option<f64>) -> String {
    x.map(serde17::fmt).unwrap_or_default()
}

fn rip_table(r: &RipReport) -> String {
    table(
        &["s", "delta", "method", "witness_support", "supports_examined", "lambda_min", "lambda_max"],
        [vec![
            r.s.to_string(),
            serde17::fmt(r.delta),
            serde_json::to_value(r.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            join(&r.witness_support),
            r.supports_examined.to_string(),
            serde17::fmt(r.lambda_min),
            serde17::fmt(r.lambda_max),
        ]],
    )
}

fn certificate_table(certs: &[GuaranteeCertificate]) -> String {
    table(
        &["regime", "delta_2s", "s", "q", "rho", "C0", "C1", "q0", "applicable", "precondition"],
        certs.iter().map(|c| {
            vec![
                c.regime.as_str().to_string(),
                serde17::fmt(c.delta_2s),
                c.s.to_string(),
                serde17::fmt(c.q),
                opt(c.rho),
                opt(c.c0),
                opt(c.c1),
                opt(c.q0),
                c.applicable.to_string(),
                c.precondition_text.clone(),
            ]
        }),
    )
}

fn result_table(r: &RecoveryResult) -> String {
    table(
        &["program", "iterations", "converged", "residual", "objective"],
        [vec![
            match r.program {
                Program::P1 => "l1".to_string(),
                Program::Pq { q } => format!("lq:{q}"),
                Program::P0 => "l0".to_string(),
            },
            r.iterations.to_string(),
            r.converged.to_string(),
            serde17::fmt(r.residual),
            serde17::fmt(r.objective),
        ]],
    )
}

fn audit_table(records: &[InequalityAuditRecord]) -> String {
    table(
        &["lemma_id", "lhs", "rhs", "slack", "holds"],
        records.iter().map(|r| {
            vec![
                r.lemma_id.clone(),
                serde17::fmt(r.lhs),
                serde17::fmt(r.rhs),
                serde17::fmt(r.slack),
                r.holds.to_string(),
            ]
        }),
    )
}
