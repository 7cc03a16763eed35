//! Command-line front end: generate, mutate, check and analyse model files.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use thermo_axioms::format::{emit_generator, emit_model, parse_document};
use thermo_axioms::padoa::{independence_search, ModelFamily, SearchOutcome, Target};
use thermo_axioms::refmodels::MutationTarget;
use thermo_axioms::report::{self, ModelSummary};
use thermo_axioms::timeless::{check_all_nt, to_timeless};
use thermo_axioms::{check_all, generate_heat_grid, mutate, CheckConfig, Model, Params, Tolerance};

const EXIT_PASS: u8 = 0;
const EXIT_VIOLATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(name = "thermo-axioms", version, about = "Check finite thermodynamic models against their axioms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Tolerances {
    /// Allowed first-law residual and equality slack.
    #[arg(long, default_value_t = 1e-9)]
    tolerance_balance: f64,
    /// Allowed negative entropy production.
    #[arg(long, default_value_t = 1e-12)]
    tolerance_ineq: f64,
}

impl Tolerances {
    fn config(&self) -> Result<CheckConfig> {
        let tol = Tolerance { eps_balance: self.tolerance_balance, eps_ineq: self.tolerance_ineq };
        if !tol.is_valid() {
            bail!("tolerances must be finite and nonnegative");
        }
        Ok(CheckConfig::with_tolerance(tol))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every axiom check on a model file (`-` reads standard input).
    Check {
        file: PathBuf,
        #[command(flatten)]
        tol: Tolerances,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Write a reference heat-conduction model.
    Gen(GenArgs),
    /// Break one axiom of a model on purpose.
    Mutate {
        file: PathBuf,
        /// T4, T6, T8, T9, T10, T13, T15, T16.1 (or T16), T16.2 or DECOMP.
        #[arg(long)]
        axiom: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search for two models differing only in one primitive.
    Padoa {
        file: PathBuf,
        /// SPACE, TIME, E, H, S, M, or CONTROL for the dummy constant.
        #[arg(long)]
        primitive: String,
        /// Largest number of candidate models examined.
        #[arg(long, default_value_t = 256)]
        budget: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Run the suite of the timeless reformulation.
    Timeless {
        file: PathBuf,
        #[command(flatten)]
        tol: Tolerances,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 2)]
    nx: usize,
    #[arg(long, default_value_t = 2)]
    ny: usize,
    #[arg(long, default_value_t = 2)]
    nz: usize,
    /// Cell edge length.
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    /// Volumetric heat capacity.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Thermal conductivity.
    #[arg(long, default_value_t = 1.0)]
    kc: f64,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    /// Number of time samples.
    #[arg(long, default_value_t = 8)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Radiative exchange coefficient between radiator pairs.
    #[arg(long, default_value_t = 0.0)]
    radiative: f64,
    /// A radiating pair of cells, written x,y,z x,y,z. Repeatable.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    radiator: Vec<String>,
    /// Write the parameters as a generator block instead of explicit tables.
    #[arg(long)]
    generator: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn coords(s: &str) -> Result<[usize; 3]> {
    let v: Vec<usize> = s.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>()
        .map_err(|_| anyhow!("bad cell coordinates {s:?}, expected x,y,z"))?;
    v.try_into().map_err(|_| anyhow!("bad cell coordinates {s:?}, expected x,y,z"))
}

impl GenArgs {
    fn params(&self) -> Result<Params> {
        let mut p = Params::new([self.nx, self.ny, self.nz], self.dt, self.steps, self.seed);
        p.spacing = self.h;
        p.heat_capacity = self.c;
        p.conductivity = self.kc;
        p.radiative = self.radiative;
        for pair in self.radiator.chunks(2) {
            p.radiators.push((coords(&pair[0])?, coords(&pair[1])?));
        }
        Ok(p)
    }
}

/// An error that maps to the usage exit code.
struct Usage(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.into())
    }
}

fn read_input(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading standard input")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn load(path: &Path) -> Result<Model> {
    let text = read_input(path)?;
    let name = path.display().to_string();
    parse_document::<f64>(&text).map(|d| d.model).map_err(|e| {
        let lines: Vec<String> = e.diagnostics.iter().map(|d| format!("{name}:{d}")).collect();
        anyhow!(lines.join("\n"))
    })
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut so = io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8, Usage> {
    match cli.command {
        Command::Check { file, tol, format } => {
            let cfg = tol.config()?;
            let model = load(&file)?;
            let rep = check_all(&model, &cfg);
            let summary = ModelSummary::of(&model);
            let text = match format {
                Format::Text => report::text(&rep, &summary, &cfg.tol),
                Format::Json => report::json(&rep, &summary, &cfg.tol),
            };
            write_output(None, &text)?;
            Ok(if rep.passed() { EXIT_PASS } else { EXIT_VIOLATION })
        }
        Command::Gen(args) => {
            let params = args.params()?;
            let model = generate_heat_grid(&params)?;
            let text = if args.generator { emit_generator(&params) } else { emit_model(&model) };
            write_output(args.out.as_deref(), &text)?;
            Ok(EXIT_PASS)
        }
        Command::Mutate { file, axiom, out } => {
            let name = if axiom.eq_ignore_ascii_case("T16") { "T16.1" } else { axiom.as_str() };
            let target: MutationTarget = name.parse()?;
            let model = load(&file)?;
            let mutant = mutate(&model, target)?;
            write_output(out.as_deref(), &emit_model(&mutant))?;
            Ok(EXIT_PASS)
        }
        Command::Padoa { file, primitive, budget, format } => {
            let target: Target = primitive.parse()?;
            let model = load(&file)?;
            let summary = ModelSummary::of(&model);
            let family = ModelFamily::around(model);
            let outcome = independence_search(&family, target, budget)?;
            let s = outcome.summary(target);
            let text = match format {
                Format::Text => report::padoa_text(&s),
                Format::Json => report::padoa_json(&s, &summary),
            };
            write_output(None, &text)?;
            Ok(match outcome {
                SearchOutcome::Inconclusive(_) => EXIT_INCONCLUSIVE,
                _ => EXIT_PASS,
            })
        }
        Command::Timeless { file, tol, format } => {
            let cfg = tol.config()?;
            let model = load(&file)?;
            let rep = check_all_nt(&to_timeless(&model), &cfg);
            let summary = ModelSummary::of(&model);
            let text = match format {
                Format::Text => report::timeless_text(&rep, &summary, &cfg.tol),
                Format::Json => report::timeless_json(&rep, &summary, &cfg.tol),
            };
            write_output(None, &text)?;
            Ok(if rep.passed() { EXIT_PASS } else { EXIT_VIOLATION })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
