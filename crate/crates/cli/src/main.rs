//! Command-line front end for the hodgelab studies.
//!
//! Usage errors exit with status 2; numerical failures and failed rate
//! assertions exit with status 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use hodgelab::complex::io::{read_complex, read_vector, write_complex};
use hodgelab::derham::{whitney_complex, Flavor};
use hodgelab::lab::{self, MeshFamily, MeshSpec, RateCheck, StudyConfig};

#[derive(Parser)]
#[command(name = "hodgelab", version, about = "Hilbert complexes, mixed Hodge Laplacians and convergence studies")]
struct Cli {
    /// Directory for CSV and manifest outputs.
    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the solver tolerance in the configuration.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the algebraic invariants of a complex stored as JSON.
    Validate { complex: PathBuf },
    /// Hodge-decompose a vector of one degree.
    Hodge {
        complex: PathBuf,
        #[arg(long)]
        degree: i32,
        /// JSON array of coefficients.
        #[arg(long)]
        vector: PathBuf,
    },
    /// Solve the configured problem on its finest level.
    Solve { config: PathBuf },
    /// Refinement study with rate fitting.
    Study { config: PathBuf },
    /// Variational-crime sweep over the configured epsilons.
    Crime { config: PathBuf },
    /// Approximation coefficients of a nested mesh family.
    Coeffs { config: PathBuf },
    /// Write the Whitney complex of a family mesh as JSON.
    Export {
        #[arg(value_enum)]
        family: Family,
        n: usize,
        #[arg(long, value_enum, default_value = "natural")]
        flavor: FlavorArg,
        /// Semi-axes `a,b` for the ellipse family.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        ellipse: Option<Vec<f64>>,
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Interval,
    Square,
    Cycle,
    Ellipse,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    Natural,
    Essential,
}

fn load_config(path: &Path, cli: &Cli) -> anyhow::Result<StudyConfig> {
    let mut cfg = StudyConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tol {
        if !(t > 0.0) {
            bail!("--tol must be positive");
        }
        cfg.solver.tol = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_checks(checks: &[RateCheck]) {
    for c in checks {
        let measured = c.measured.map_or("n/a".to_string(), |m| format!("{m:.4}"));
        println!(
            "{} {:<14} measured {measured} expected {} ± {}",
            if c.passed { "pass" } else { "FAIL" },
            c.norm,
            c.expected,
            c.tolerance
        );
    }
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let started = Instant::now();
    match &cli.command {
        Command::Validate { complex } => {
            let c = read_complex(complex).with_context(|| format!("reading {}", complex.display()))?;
            let report = c.validate()?;
            println!("{report}");
            if report.passed {
                println!("betti numbers: {:?}", c.betti_numbers()?);
            }
            Ok(report.passed)
        }
        Command::Hodge { complex, degree, vector } => {
            let c = read_complex(complex).with_context(|| format!("reading {}", complex.display()))?;
            let v = read_vector(vector).with_context(|| format!("reading {}", vector.display()))?;
            let d = c.hodge_decompose(*degree, &v)?;
            let out = serde_json::json!({
                "degree": degree,
                "coboundary": d.coboundary_part.as_slice(),
                "harmonic": d.harmonic_part.as_slice(),
                "perp": d.perp_part.as_slice(),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
        Command::Solve { config } => {
            let cfg = load_config(config, cli)?;
            let report = lab::run_solve(&cfg)?;
            let name = format!("{}_solution.json", cfg.name);
            let files = [(name, serde_json::to_string_pretty(&report)?)];
            lab::write_artifacts(&cfg, &cli.output_dir, "solve", &files, true, None, started)?;
            let l = &report.level;
            println!(
                "n={} h={:.4e} dofs={} err_W={:.6e} err_V={:.6e} iters={} residual={:.3e}",
                l.level, l.h, l.dofs, l.err_w, l.err_v, l.iters, l.residual
            );
            for w in &l.warnings {
                eprintln!("warning: {w}");
            }
            Ok(true)
        }
        Command::Study { config } => {
            let cfg = load_config(config, cli)?;
            let report = lab::run_study(&cfg)?;
            let files = lab::study_files(&cfg, &report)?;
            let failure = report.failure.as_ref().map(|(n, e)| format!("level {n}: {e}"));
            lab::write_artifacts(&cfg, &cli.output_dir, "study", &files, report.passed, failure.clone(), started)?;
            for f in &report.fits {
                if let Some(s) = f.finest {
                    println!("rate {:<12} {:.4} (± {:.2e})", f.norm, s.slope, s.stderr);
                }
            }
            print_checks(&report.checks);
            if let Some(f) = failure {
                eprintln!("error: {f}");
            }
            Ok(report.passed)
        }
        Command::Crime { config } => {
            let cfg = load_config(config, cli)?;
            let report = lab::run_crime_study(&cfg)?;
            let files = [
                (cfg.crime_csv_name(), lab::crime_csv(&report)?),
                (cfg.projection_csv_name(), lab::projection_csv(&report)?),
            ];
            lab::write_artifacts(&cfg, &cli.output_dir, "crime", &files, report.passed, None, started)?;
            if let Some(e) = report.exponent {
                println!("gap exponent {e:.4}");
            }
            println!("projection constant spread {:.3}", report.constant_spread);
            print_checks(&report.checks);
            Ok(report.passed)
        }
        Command::Coeffs { config } => {
            let cfg = load_config(config, cli)?;
            let study = lab::run_coefficient_study(&cfg)?;
            let files = [(cfg.coefficients_csv_name(), lab::coefficients_csv(&study.report)?)];
            lab::write_artifacts(&cfg, &cli.output_dir, "coeffs", &files, study.passed, None, started)?;
            for l in &study.report.levels {
                if !(l.delta.converged && l.eta.converged && l.mu.converged) {
                    eprintln!("warning: power iteration did not converge at h = {:.4e}", l.h);
                }
            }
            print_checks(&study.checks);
            Ok(study.passed)
        }
        Command::Export {
            family,
            n,
            flavor,
            ellipse,
            out,
        } => {
            let spec = MeshSpec {
                family: match family {
                    Family::Interval => MeshFamily::Interval,
                    Family::Square => MeshFamily::Square,
                    Family::Cycle => MeshFamily::Cycle,
                    Family::Ellipse => MeshFamily::Ellipse,
                },
                levels: vec![*n],
                ellipse: ellipse.as_ref().map(|v| [v[0], v[1]]),
            };
            let flavor = match flavor {
                FlavorArg::Natural => Flavor::Natural,
                FlavorArg::Essential => Flavor::Essential,
            };
            let w = whitney_complex(&lab::family_mesh(&spec, *n)?, flavor)?;
            write_complex(w.complex(), out)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
