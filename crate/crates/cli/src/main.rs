use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gw0lab::checks::Status;
use gw0lab::config::{parse_config, RunConfig};
use gw0lab::pipeline::{run_pipeline, PipelineOptions, RunOutput, Stage};
use gw0lab::GwError;

/// Finite-dimensional GW⁰ lab: lattice model, exact oracle, RPA screening
/// and the λ-scaled fixed-point solver.
#[derive(Parser, Debug)]
#[command(name = "gw0lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; the eight-site reference chain when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for tracks, matrices, summary.json and manifest.json.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Overrides `run.seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Also run the expensive convolution cross-checks.
    #[arg(long, global = true)]
    validate: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Build the lattice and the mean-field reference.
    MeanField,
    /// Exact Fock-space ground state and Green's function.
    Oracle,
    /// Polarizability, χ⁰ and the screened interaction.
    Rpa,
    /// One-shot G₀W⁰.
    G0w0,
    /// Picard iteration for each configured λ.
    Gw0,
    /// Every enabled check, summary only.
    Check,
    /// Every stage, with artifacts.
    All,
}

impl Command {
    fn stage(self) -> Stage {
        match self {
            Command::MeanField => Stage::MeanField,
            Command::Oracle => Stage::Oracle,
            Command::Rpa => Stage::Rpa,
            Command::G0w0 => Stage::G0w0,
            Command::Gw0 => Stage::Gw0,
            Command::Check => Stage::Check,
            Command::All => Stage::All,
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, String> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::reference(),
    };
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn report(out: &RunOutput) {
    let s = &out.summary;
    println!(
        "{} M={} N={} gap={:.6e} mu0={:.6e} model={}",
        s.stage.name(),
        s.sites,
        s.electrons,
        s.mean_field.gap,
        s.mean_field.mu0,
        &s.model_hash[..12]
    );
    if let Some(o) = &s.oracle {
        println!("oracle E0={:.10e} window=[{:.6e}, {:.6e}]", o.energy, o.e_minus, o.e_plus);
    }
    if let Some(b) = &s.bounds {
        println!("lambda_star={:.4e} s_norm={:.4e} r={:.4e}", b.lambda_star, b.s_norm, b.r);
    }
    for r in &s.solver {
        println!(
            "lambda={} converged={} iterations={} ratio={}",
            r.lambda,
            r.converged,
            r.iterations,
            r.contraction.map_or("-".into(), |a| format!("{a:.3e}"))
        );
    }
    for c in &s.checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        };
        let mut line = format!("{tag} {}/{} value={:.3e} tol={:.1e}", c.suite, c.name, c.value, c.tol);
        if !c.detail.is_empty() {
            line.push_str(&format!(" ({})", c.detail));
        }
        println!("{line}");
    }
    if let Some(m) = &out.manifest {
        println!("wrote {} files", m.files.len() + 1);
    }
    let failed = s.failures().count();
    println!("{}: {failed} failed of {} checks", if s.passed { "ok" } else { "FAILED" }, s.checks.len());
}

fn run(cli: &Cli) -> Result<bool, String> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err("--threads must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let cfg = load(&cli.common)?;
    let opts = PipelineOptions {
        stage: cli.command.stage(),
        validate: cli.common.validate,
        out: cli.common.out.clone(),
    };
    let out = run_pipeline(&cfg, &opts).map_err(|e: GwError| e.to_string())?;
    report(&out);
    Ok(out.summary.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn subcommands_map_to_stages() {
        for name in ["mean-field", "oracle", "rpa", "g0w0", "gw0", "check", "all"] {
            let cli = Cli::try_parse_from(["gw0lab", name, "--seed", "5"]).unwrap();
            assert_eq!(cli.command.stage().name(), name);
            assert_eq!(cli.common.seed, Some(5));
        }
    }

    #[test]
    fn flags_accepted_before_subcommand() {
        let cli = Cli::try_parse_from(["gw0lab", "--validate", "--threads", "3", "all", "--out", "x"]).unwrap();
        assert!(cli.common.validate);
        assert_eq!(cli.common.threads, Some(3));
        assert_eq!(cli.common.out, Some(PathBuf::from("x")));
    }
}
