use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shrinker_lab::al::{al_shoot_closed, RotationIndex, ShootOptions};
use shrinker_lab::catalog::{build_example, default_entries};
use shrinker_lab::classify::classify;
use shrinker_lab::quadrature::{builtin_integrand, weighted_integral, BUILTIN_INTEGRANDS};
use shrinker_lab::suite::{build_target, parse_targets, run_suite, SuiteConfig};
use shrinker_lab::Result;

#[derive(Parser)]
#[command(name = "shrinker-lab", version, about = "Verify self-shrinker identities on exact and numerical examples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every check on a target (`all` for the whole catalog plus one curve).
    Verify {
        target: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record wall-clock timings in the report.
        #[arg(long)]
        timings: bool,
    },
    /// Apply the gap classification to measured invariants.
    Classify {
        target: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Catalog operations.
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Closed planar shrinking curves.
    Al {
        #[command(subcommand)]
        action: AlAction,
    },
    /// Gaussian-weighted integral of a builtin integrand.
    Integrate {
        target: String,
        #[arg(long = "f")]
        integrand: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CatalogAction {
    /// List the default catalog entries.
    List,
}

#[derive(Subcommand)]
enum AlAction {
    /// Bisect the launch curvature until the curve closes.
    Shoot {
        #[arg(long)]
        k0_min: f64,
        #[arg(long)]
        k0_max: f64,
        /// Write `s,x1,x2,k` samples here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Rotation target `p/q`; chosen automatically when omitted.
        #[arg(long)]
        rotation: Option<String>,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<SuiteConfig> {
    match path {
        Some(p) => SuiteConfig::load(p),
        None => Ok(SuiteConfig::default()),
    }
}

fn parse_rotation(s: &str) -> Result<RotationIndex> {
    let bad = || shrinker_lab::LabError::InvalidParameter(format!("rotation must look like p/q, got `{s}`"));
    let (p, q) = s.split_once('/').ok_or_else(bad)?;
    Ok(RotationIndex {
        p: p.trim().parse().map_err(|_| bad())?,
        q: q.trim().parse().map_err(|_| bad())?,
    })
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Verify {
            target,
            config,
            out,
            timings,
        } => {
            let mut config = load_config(&config)?;
            config.record_timings |= timings;
            let targets = parse_targets(&target)?;
            let report = run_suite(&targets, &config)?;
            for r in &report.reports {
                eprintln!("{} {}", if r.passed { "PASS" } else { "FAIL" }, r.target);
                for f in r.failures() {
                    eprintln!("    {f}");
                }
            }
            let json = report.to_json()?;
            match out {
                Some(path) => std::fs::write(path, json)?,
                None => print!("{json}"),
            }
            Ok(ExitCode::from(report.exit_code() as u8))
        }
        Command::Classify { target, config } => {
            let config = load_config(&config)?;
            let mut reports = Vec::new();
            for t in parse_targets(&target)? {
                let (imm, _) = build_target(&t, &config)?;
                let c = classify(&imm, &config.classify_options())?;
                reports.push(serde_json::json!({ "target": t.name(), "classification": c }));
            }
            if reports.len() == 1 {
                print_json(&reports[0])?;
            } else {
                print_json(&reports)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Catalog {
            action: CatalogAction::List,
        } => {
            for spec in default_entries() {
                let imm = build_example(&spec)?;
                let inv: Vec<String> = imm
                    .meta
                    .invariants
                    .iter()
                    .map(|k| format!("{}={}", k.name, k.value))
                    .collect();
                println!(
                    "{:<16} n={} p={} {:<12} {}  [{}]",
                    spec.name(),
                    spec.dim(),
                    spec.codim(),
                    if spec.compact() { "compact" } else { "noncompact" },
                    spec.description(),
                    inv.join(", ")
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Al {
            action:
                AlAction::Shoot {
                    k0_min,
                    k0_max,
                    csv,
                    rotation,
                    step,
                },
        } => {
            let opts = ShootOptions {
                target: rotation.as_deref().map(parse_rotation).transpose()?,
                step,
                ..Default::default()
            };
            let curve = al_shoot_closed(k0_min, k0_max, &opts)?;
            if let Some(path) = csv {
                curve.write_csv(BufWriter::new(File::create(path)?))?;
            }
            print_json(&serde_json::json!({
                "launch_curvature": curve.launch_curvature(),
                "rotation_index": curve.rotation_index.map(|r| r.to_string()),
                "length": curve.length(),
                "closure_residual": curve.closure_residual,
                "first_integral_drift": curve.first_integral_drift,
                "curvature_ratio": curve.curvature_ratio(),
                "samples": curve.samples.len(),
            }))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Integrate {
            target,
            integrand,
            config,
        } => {
            let config = load_config(&config)?;
            if !BUILTIN_INTEGRANDS.iter().any(|(n, _)| *n == integrand) {
                return Err(shrinker_lab::LabError::InvalidParameter(format!(
                    "unknown integrand `{integrand}`; expected one of {}",
                    BUILTIN_INTEGRANDS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
                )));
            }
            let mut out = Vec::new();
            for t in parse_targets(&target)? {
                let (imm, _) = build_target(&t, &config)?;
                let r = weighted_integral(&imm, |imm, pt| builtin_integrand(&integrand, imm, pt), &config.quadrature)?;
                out.push(serde_json::json!({ "target": t.name(), "integrand": integrand, "result": r }));
            }
            if out.len() == 1 {
                print_json(&out[0])?;
            } else {
                print_json(&out)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
