use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lagrangia_lab::output::Series;
use lagrangia_lab::plotdata::emit_plotdata;
use lagrangia_lab::scenario::Module;
use lagrangia_lab::{run_scenario, LabError, RunOptions, Scenario};

/// Lagrangian continuum laboratory.
///
/// Exit status: 0 ok, 1 a configured gate failed, 2 configuration or i/o
/// error, 3 numerical failure (folding, lost inverse, non-finite state).
#[derive(Parser)]
#[command(name = "lagrangia", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a fluid or gravity scenario.
    Simulate(Common),
    /// Solve for a static configuration (tornado profile or Kuzmin disk).
    StaticSolve(Common),
    /// Sweep trial functions through the tornado energy bound.
    BoundCheck(Common),
    /// Run a two-species electrostatic plasma scenario.
    Plasma(Common),
    /// Evolve a C² doublet.
    C2(Common),
    /// Reshape a diagnostics table into long-format plot data.
    Diagnose(Diagnose),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, env = "LAGRANGIA_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads; results are reproducible for a fixed count.
    #[arg(long, env = "LAGRANGIA_THREADS")]
    threads: Option<usize>,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Diagnose {
    /// Diagnostics table; defaults to `<out>/diagnostics.csv`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, env = "LAGRANGIA_OUT", default_value = "out")]
    out: PathBuf,
    /// Columns to emit, comma separated; all when omitted.
    #[arg(long, value_delimiter = ',')]
    columns: Vec<String>,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

fn accepts(cmd: &Cmd, m: Module) -> bool {
    matches!(
        (cmd, m),
        (Cmd::Simulate(_), Module::Fluid | Module::Gravity)
            | (Cmd::StaticSolve(_), Module::StaticSolve)
            | (Cmd::BoundCheck(_), Module::BoundCheck)
            | (Cmd::Plasma(_), Module::Plasma)
            | (Cmd::C2(_), Module::C2)
    )
}

fn run(cmd: &Cmd, c: &Common) -> Result<bool, LabError> {
    if let Some(n) = c.threads {
        if n == 0 {
            return Err(LabError::config("--threads", "must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| LabError::Config(e.to_string()))?;
    }
    let s = Scenario::load(&c.scenario)?;
    if !accepts(cmd, s.module) {
        return Err(LabError::Config(format!("module '{}' cannot be run by this subcommand", s.module.name())));
    }
    let outcome = run_scenario(&s, &RunOptions { out: c.out.clone(), seed: c.seed })?;
    for g in &outcome.gates {
        let status = if g.passed { "pass" } else { "FAIL" };
        println!("{status} {} {} {:e} (limit {:e})", g.gate.column, g.gate.check.name(), g.measured, g.gate.limit);
    }
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(outcome.passed())
}

fn diagnose(d: &Diagnose) -> Result<bool, LabError> {
    let input = d.input.clone().unwrap_or_else(|| d.out.join("diagnostics.csv"));
    let series = Series::read_csv(&input)?;
    let p = emit_plotdata(&series, &d.columns, d.scale)?;
    std::fs::create_dir_all(&d.out).map_err(|e| LabError::io(&d.out, e))?;
    let path = d.out.join("plotdata.csv");
    p.write_csv(&path)?;
    eprintln!("wrote {}", path.display());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::Diagnose(d) => diagnose(d),
        Cmd::Simulate(c) | Cmd::StaticSolve(c) | Cmd::BoundCheck(c) | Cmd::Plasma(c) | Cmd::C2(c) => run(&cli.cmd, c),
    };
    match r {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
