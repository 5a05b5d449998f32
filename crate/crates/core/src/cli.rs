//! The `tensorc` command line.

use crate::codegen;
use crate::compile::{compile, Compiled, Options};
use crate::diag::Diagnostic;
use crate::interp::Interpreter;
use crate::ir::render_program;
use crate::memplan::{analyze, render_csv, render_text};
use crate::netspec::{parse_netspec, DataBinding, DataSource, NetworkProgram};
use crate::opt::{dump, Pass};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use tensorc_runtime::driver::{self, TrainOptions};
use tensorc_runtime::{snapshot, Dataset, Element, PoolMode, RuntimeError, Split};

/// Exit status for compile-time diagnostics.
pub const EXIT_DIAGNOSTIC: i32 = 1;
/// Exit status for I/O and runtime failures.
pub const EXIT_IO: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "tensorc", version, about = "Compile and train networks described by spec files")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse and infer shapes; report the first error.
    Check { spec: PathBuf },
    /// Print the static memory report.
    Analyze {
        spec: PathBuf,
        #[command(flatten)]
        build: BuildFlags,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Emit a standalone Rust training program.
    Compile {
        spec: PathBuf,
        #[command(flatten)]
        build: BuildFlags,
        /// Output file; defaults to `<solver>.gen.rs`.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Print both IR bodies.
        #[arg(long)]
        dump_ir: bool,
        /// Print the expressions after the named optimization pass.
        #[arg(long, value_name = "PASS")]
        dump_pass: Option<String>,
    },
    /// Train with the interpreter, resuming from the snapshot if present.
    Train {
        spec: PathBuf,
        #[command(flatten)]
        build: BuildFlags,
        #[command(flatten)]
        run: RunFlags,
        /// Accepted for clarity; an existing snapshot is always resumed.
        #[arg(long)]
        resume: bool,
        /// Override the solver's iteration count.
        #[arg(long)]
        iters: Option<u64>,
        /// Loss log; defaults to `<solver>.loss.csv`.
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Evaluate saved parameters on the test split.
    Test {
        spec: PathBuf,
        #[command(flatten)]
        build: BuildFlags,
        #[command(flatten)]
        run: RunFlags,
    },
}

#[derive(Args, Debug, Clone)]
pub struct BuildFlags {
    #[arg(long, value_enum, default_value_t = Mode::Reuse)]
    pub mode: Mode,
    /// Convolution workspace limit in MB; convolutions needing more run direct.
    #[arg(long, value_name = "MB")]
    pub workspace_cap: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct RunFlags {
    /// `DIR` with MNIST IDX files, or `synthetic:SEED`.
    #[arg(long)]
    pub data: Option<String>,
    /// Snapshot directory; defaults to `<solver>.snapshot`.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Run in double precision.
    #[arg(long)]
    pub f64: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Reuse,
    Dealloc,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug)]
pub enum Failure {
    Diagnostic(String),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Diagnostic(_) => EXIT_DIAGNOSTIC,
            Failure::Io(_) => EXIT_IO,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Diagnostic(m) | Failure::Io(m) => m,
        }
    }
}

impl From<RuntimeError> for Failure {
    fn from(e: RuntimeError) -> Self {
        Failure::Io(format!("error: {e}"))
    }
}

type Out = std::result::Result<String, Failure>;

pub fn seed() -> u64 {
    std::env::var("TENSORC_SEED").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(42)
}

/// Runs a parsed command and returns its stdout text.
pub fn execute(cli: Cli) -> Out {
    match cli.cmd {
        Command::Check { spec } => {
            let (prog, file) = load(&spec)?;
            build(&prog, &file, &BuildFlags { mode: Mode::Reuse, workspace_cap: None })?;
            Ok(format!("{file}: ok\n"))
        }
        Command::Analyze { spec, build: b, format } => {
            let (prog, file) = load(&spec)?;
            let c = build(&prog, &file, &b)?;
            let r = analyze(&c.ir);
            Ok(match format {
                Format::Text => render_text(&r),
                Format::Csv => render_csv(&r),
            })
        }
        Command::Compile {
            spec,
            build: b,
            output,
            dump_ir,
            dump_pass,
        } => {
            let (prog, file) = load(&spec)?;
            let pass = match dump_pass.as_deref() {
                Some(name) => Some(Pass::parse(name).ok_or_else(|| {
                    let all: Vec<&str> = Pass::ALL.iter().map(|p| p.name()).collect();
                    Failure::Diagnostic(format!("error: unknown pass `{name}`; expected one of {}", all.join(", ")))
                })?),
                None => None,
            };
            let c = build(&prog, &file, &b)?;
            let mut out = String::new();
            if let Some(pass) = pass {
                out.push_str(&after_pass(&c, pass));
            }
            if dump_ir {
                out.push_str(&render_program(&c.ir));
            }
            let path = output.unwrap_or_else(|| PathBuf::from(codegen::file_name(&c.ir)));
            std::fs::write(&path, codegen::emit(&c.ir)).map_err(|e| Failure::Io(format!("error: cannot write {}: {e}", path.display())))?;
            out.push_str(&format!("wrote {}\n", path.display()));
            Ok(out)
        }
        Command::Train {
            spec,
            build: b,
            run,
            resume: _,
            iters,
            loss_csv,
        } => {
            let (prog, file) = load(&spec)?;
            let c = build(&prog, &file, &b)?;
            let name = &c.ir.solver.name;
            let opts = TrainOptions {
                iters: iters.unwrap_or(c.ir.solver.train_iters as u64),
                batch: c.ir.data.batch,
                test_iters: c.ir.solver.test_iters,
                snapshot_every: c.ir.solver.snapshot_every as u64,
                snapshot_dir: Some(run.snapshot.clone().unwrap_or_else(|| PathBuf::from(format!("{name}.snapshot")))),
                resume: true,
                loss_csv: Some(loss_csv.unwrap_or_else(|| PathBuf::from(format!("{name}.loss.csv")))),
                verbose: true,
            };
            if run.f64 {
                train_as::<f64>(&c, &run, &opts)
            } else {
                train_as::<f32>(&c, &run, &opts)
            }
        }
        Command::Test { spec, build: b, run } => {
            let (prog, file) = load(&spec)?;
            let c = build(&prog, &file, &b)?;
            if run.f64 {
                test_as::<f64>(&c, &run)
            } else {
                test_as::<f32>(&c, &run)
            }
        }
    }
}

/// Entry point: parses `args` (including the program name), prints, and
/// returns the exit status.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_IO } else { 0 };
        }
    };
    match execute(cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(f) => {
            eprintln!("{}", f.message());
            f.code()
        }
    }
}

fn load(spec: &Path) -> std::result::Result<(NetworkProgram, String), Failure> {
    let file = spec.display().to_string();
    let src = std::fs::read_to_string(spec).map_err(|e| Failure::Io(format!("error: cannot read {file}: {e}")))?;
    let prog = parse_netspec(&src).map_err(|d| diag(&d, &file))?;
    Ok((prog, file))
}

fn diag(d: &Diagnostic, file: &str) -> Failure {
    Failure::Diagnostic(d.render(file))
}

fn build(prog: &NetworkProgram, file: &str, b: &BuildFlags) -> std::result::Result<Compiled, Failure> {
    let opts = Options {
        mode: match b.mode {
            Mode::Reuse => PoolMode::Reuse,
            Mode::Dealloc => PoolMode::Dealloc,
        },
        workspace_cap: b.workspace_cap.map(|mb| (mb.max(0.0) * tensorc_runtime::MB) as usize),
    };
    compile(prog, &opts).map_err(|d| diag(&d, file))
}

fn after_pass(c: &Compiled, pass: Pass) -> String {
    let g = &c.ir.graph;
    let mut roots = c.unoptimized.clone();
    let mut out = String::new();
    for (p, trace) in &c.traces {
        roots = trace.replay(g, &roots);
        if *p == pass {
            out.push_str(&format!("# after {} ({} rewrites)\n", p.name(), trace.len()));
            out.push_str(&trace.render(g));
            out.push_str(&dump(g, &roots));
            break;
        }
    }
    out
}

/// Training and test sets for `binding`, with `data` overriding the source.
pub fn datasets(binding: &DataBinding, test_iters: usize, data: Option<&str>) -> std::result::Result<(Dataset, Dataset), Failure> {
    let source = match data {
        Some(s) => match s.strip_prefix("synthetic:") {
            Some(seed) => DataSource::Synthetic(
                seed.parse().map_err(|_| Failure::Diagnostic(format!("error: bad synthetic seed `{seed}`")))?,
            ),
            None => DataSource::MnistIdx(s.to_string()),
        },
        None => binding.source.clone(),
    };
    let shape = binding.shape.to_vec();
    let test_n = binding.batch * test_iters.max(1);
    Ok(match source {
        DataSource::Synthetic(seed) => {
            let n = binding.samples.unwrap_or(binding.batch * 20);
            (
                Dataset::synthetic(seed, Split::Train, n, &shape, binding.classes),
                Dataset::synthetic(seed, Split::Test, test_n, &shape, binding.classes),
            )
        }
        DataSource::MnistIdx(dir) => {
            let dir = Path::new(&dir);
            (
                Dataset::load_mnist(dir, Split::Train, &shape, binding.classes, binding.samples)?,
                Dataset::load_mnist(dir, Split::Test, &shape, binding.classes, Some(test_n))?,
            )
        }
    })
}

fn train_as<T: Element>(c: &Compiled, run: &RunFlags, opts: &TrainOptions) -> Out {
    let (train, test) = datasets(&c.ir.data, c.ir.solver.test_iters, run.data.as_deref())?;
    let mut net = Interpreter::<T>::new(&c.ir, seed());
    let report = driver::train(&mut net, &train, Some(&test), opts)?;
    let mut out = String::new();
    if report.start > 0 {
        out.push_str(&format!("resumed at iteration {}\n", report.start));
    }
    if let Some((it, loss)) = report.losses.last() {
        out.push_str(&format!("iteration {it}: loss {loss:.6}\n"));
    }
    if let Some((it, t)) = report.tests.last() {
        out.push_str(&test_line(*it, t));
    }
    Ok(out)
}

fn test_as<T: Element>(c: &Compiled, run: &RunFlags) -> Out {
    let dir = run.snapshot.clone().unwrap_or_else(|| PathBuf::from(format!("{}.snapshot", c.ir.solver.name)));
    if !snapshot::has_snapshot(&dir) {
        return Err(Failure::Io(format!("error: no snapshot in {}", dir.display())));
    }
    let (_, test) = datasets(&c.ir.data, c.ir.solver.test_iters, run.data.as_deref())?;
    let mut net = Interpreter::<T>::new(&c.ir, seed());
    let (_, it) = driver::Network::params_mut(&mut net).load(&dir)?;
    let t = driver::test(&mut net, &test, c.ir.data.batch, c.ir.solver.test_iters)?;
    Ok(test_line(it, &t))
}

fn test_line(it: u64, t: &driver::TestOutput) -> String {
    match t.precision {
        Some(p) => format!("test at iteration {it}: loss {:.6} precision {p:.4}\n", t.loss),
        None => format!("test at iteration {it}: loss {:.6}\n", t.loss),
    }
}
