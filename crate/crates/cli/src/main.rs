//! `hsl`: command-line front end for hsl-core.

mod config;

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use hsl_core::classify::fit_singularity;
use hsl_core::extremal::{find_kstar_with, Branch, BranchPoint, KStarReport};
use hsl_core::mountain_pass::{mountain_pass_solve, MountainPassOptions};
use hsl_core::{minimal_solution, HardyParams, HslError, IterationStatus};

use config::{Overrides, RunConfig};

const SUPERCRITICAL_MSG: &str = "supercritical: k*=0 regime, see classify";
const SWEEP_HEADER: [&str; 5] = ["kappa", "branch", "u_at_half", "sigma1", "energy"];

#[derive(Parser)]
#[command(name = "hsl", version, about = "Singular solutions of -Δu + μ|x|⁻²u = u^p in the unit ball")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the spectral constants of (N, μ).
    Exponents(Common),
    /// Minimal solution at one amplitude: profile CSV plus report JSON.
    Minimal {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kappa: f64,
    },
    /// Bracket the extremal amplitude by bisection.
    Kstar {
        #[command(flatten)]
        common: Common,
        /// Relative width at which bisection stops.
        #[arg(long, default_value_t = 1e-4)]
        rel_tol: f64,
    },
    /// Minimal and mountain-pass branches over a list of amplitudes.
    BranchSweep {
        #[command(flatten)]
        common: Common,
        /// Absolute amplitudes.
        #[arg(long, value_delimiter = ',', num_args = 0.., conflicts_with = "fractions")]
        kappa: Vec<f64>,
        /// Amplitudes as fractions of the bracketed extremal amplitude.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 1e-4)]
        rel_tol: f64,
    },
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long = "N")]
    dim: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Monotone-iteration tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// JSON config file; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Format of the summary printed to standard output.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Exit> {
        let flags = Overrides {
            dim: self.dim,
            mu: self.mu,
            p: self.p,
            r_min: self.r_min,
            n: self.n,
            tol: self.tol,
        };
        RunConfig::resolve(self.config.as_deref(), &flags).map_err(Exit::usage)
    }

    fn out_dir(&self) -> Result<&Path, Exit> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))
            .map_err(Exit::runtime)?;
        Ok(&self.out_dir)
    }
}

/// A failed run: exit code plus the message printed on standard error.
struct Exit {
    code: u8,
    err: anyhow::Error,
}

impl Exit {
    fn usage(err: anyhow::Error) -> Self {
        Self { code: 2, err }
    }

    fn runtime(err: anyhow::Error) -> Self {
        Self { code: 1, err }
    }
}

impl From<HslError> for Exit {
    fn from(e: HslError) -> Self {
        let code = match e {
            HslError::InvalidParameter(_)
            | HslError::InvalidInput(_)
            | HslError::Domain(_)
            | HslError::UnsupportedRegime(_) => 2,
            _ => 1,
        };
        Self { code, err: e.into() }
    }
}

impl From<std::io::Error> for Exit {
    fn from(e: std::io::Error) -> Self {
        Self::runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Exponents(c) => cmd_exponents(c),
        Command::Minimal { common, kappa } => cmd_minimal(common, *kappa),
        Command::Kstar { common, rel_tol } => cmd_kstar(common, *rel_tol),
        Command::BranchSweep {
            common,
            kappa,
            fractions,
            rel_tol,
        } => cmd_branch_sweep(common, kappa, fractions, *rel_tol),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e.err);
            ExitCode::from(e.code)
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Exit> {
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display())).map_err(Exit::runtime)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Exit::runtime(e.into()))?;
    writeln!(f)?;
    Ok(())
}

fn print_summary(format: Format, value: &serde_json::Value, csv_row: &[(&str, String)]) -> Result<(), Exit> {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(value).map_err(|e| Exit::runtime(e.into()))?),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            let head: Vec<&str> = csv_row.iter().map(|(k, _)| *k).collect();
            let vals: Vec<&str> = csv_row.iter().map(|(_, v)| v.as_str()).collect();
            w.write_record(head).and_then(|_| w.write_record(vals)).map_err(|e| Exit::runtime(e.into()))?;
            w.flush()?;
        }
    }
    Ok(())
}

fn require_subcritical(hp: &HardyParams) -> Result<(), Exit> {
    if hp.is_subcritical() {
        Ok(())
    } else {
        Err(Exit::usage(anyhow::anyhow!(
            "{SUPERCRITICAL_MSG} (p={} >= p*={})",
            hp.p(),
            hp.p_star()
        )))
    }
}

fn cmd_exponents(c: &Common) -> Result<u8, Exit> {
    let cfg = c.resolve()?;
    let hp = cfg.params()?;
    let k = hp.constants();
    let doc = json!({ "command": "exponents", "config": cfg, "result": k });
    let row = [
        ("mu0", k.mu0.to_string()),
        ("tau_minus", k.tau_minus.to_string()),
        ("tau_plus", k.tau_plus.to_string()),
        ("p_star", k.p_star.to_string()),
        ("b_mu", k.b_mu.to_string()),
        ("sphere_area", k.sphere_area.to_string()),
    ];
    print_summary(c.format, &doc, &row)?;
    Ok(0)
}

fn cmd_minimal(c: &Common, kappa: f64) -> Result<u8, Exit> {
    let cfg = c.resolve()?;
    let hp = cfg.params()?;
    let grid = cfg.grid()?;
    let opts = cfg.iteration()?;
    let dir = c.out_dir()?;
    let rep = minimal_solution(&hp, &grid, kappa, &opts)?;

    let stem = format!("minimal_kappa_{kappa}");
    rep.profile.write_csv(File::create(dir.join(format!("{stem}.csv")))?)?;
    let fit = if rep.converged() {
        fit_singularity(&hp, &rep.profile).ok()
    } else {
        None
    };
    let doc = json!({
        "command": "minimal",
        "config": cfg,
        "kappa": kappa,
        "report": rep,
        "singularity": fit,
    });
    write_json(&dir.join(format!("{stem}.json")), &doc)?;
    let row = [
        ("kappa", kappa.to_string()),
        ("status", format!("{:?}", rep.status)),
        ("iterations", rep.iterations.to_string()),
        ("final_change", rep.final_change.to_string()),
        ("lp_dmu_norm", rep.lp_dmu_norm.to_string()),
    ];
    print_summary(c.format, &doc, &row)?;
    Ok(match rep.status {
        IterationStatus::Converged => 0,
        IterationStatus::Diverged => 3,
        IterationStatus::MaxIterations => 4,
    })
}

fn kstar(cfg: &RunConfig, rel_tol: f64) -> Result<KStarReport, Exit> {
    let hp = cfg.params()?;
    require_subcritical(&hp)?;
    Ok(find_kstar_with(&hp, &cfg.grid()?, rel_tol, &cfg.iteration()?)?)
}

fn cmd_kstar(c: &Common, rel_tol: f64) -> Result<u8, Exit> {
    let cfg = c.resolve()?;
    let rep = kstar(&cfg, rel_tol)?;
    let dir = c.out_dir()?;
    let doc = json!({ "command": "kstar", "config": cfg, "rel_tol": rel_tol, "report": rep });
    write_json(&dir.join("kstar.json"), &doc)?;
    let row = [
        ("kappa_lo", rep.kappa_lo.to_string()),
        ("kappa_hi", rep.kappa_hi.to_string()),
        ("lower_bound", rep.lower_bound.to_string()),
        ("upper_bound", rep.upper_bound.to_string()),
    ];
    print_summary(c.format, &doc, &row)?;
    Ok(0)
}

/// One (κ, branch) entry of a sweep; exactly one of `point` and `error` is set.
#[derive(Serialize)]
struct SweepEntry {
    kappa: f64,
    branch: Branch,
    point: Option<BranchPoint>,
    error: Option<String>,
}

fn sweep_point(hp: &HardyParams, cfg: &RunConfig, kappa: f64) -> [SweepEntry; 2] {
    let entry = |branch, res: Result<BranchPoint, String>| match res {
        Ok(p) => SweepEntry {
            kappa,
            branch,
            point: Some(p),
            error: None,
        },
        Err(e) => SweepEntry {
            kappa,
            branch,
            point: None,
            error: Some(e),
        },
    };
    let minimal = cfg
        .grid()
        .and_then(|g| minimal_solution(hp, &g, kappa, &cfg.iteration()?))
        .map_err(|e| e.to_string())
        .and_then(|rep| {
            if rep.converged() {
                BranchPoint::from_minimal(hp, rep).map_err(|e| e.to_string())
            } else {
                Err(format!("minimal iteration ended with {:?}", rep.status))
            }
        });
    let upper = match &minimal {
        Ok(m) => mountain_pass_solve(hp, &m.profile, &MountainPassOptions::default())
            .and_then(|out| {
                let w = m.profile.zip_with(&out.state.v, |a, b| a + b)?;
                BranchPoint::from_profile(hp, kappa, Branch::MountainPass, w, out.state.energy)
            })
            .map_err(|e| e.to_string()),
        Err(_) => Err("no minimal solution to start from".into()),
    };
    [entry(Branch::Minimal, minimal), entry(Branch::MountainPass, upper)]
}

fn thread_pool() -> Result<rayon::ThreadPool, Exit> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(s) = std::env::var("HSL_THREADS") {
        let n: usize = s
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Exit::usage(anyhow::anyhow!("HSL_THREADS must be a positive integer, got {s:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Exit::runtime(e.into()))
}

fn cmd_branch_sweep(c: &Common, kappas: &[f64], fractions: &[f64], rel_tol: f64) -> Result<u8, Exit> {
    let cfg = c.resolve()?;
    let hp = cfg.params()?;
    require_subcritical(&hp)?;
    cfg.grid()?;
    cfg.iteration()?;
    if let Some(bad) = kappas.iter().chain(fractions).find(|k| !(k.is_finite() && **k >= 0.0)) {
        return Err(Exit::usage(anyhow::anyhow!("amplitudes must be finite and nonnegative, got {bad}")));
    }
    let dir = c.out_dir()?;

    let (bracket, kappas) = if fractions.is_empty() {
        (None, kappas.to_vec())
    } else {
        let rep = kstar(&cfg, rel_tol)?;
        let ks = fractions.iter().map(|f| f * rep.kappa_lo).collect();
        (Some(rep), ks)
    };

    let pool = thread_pool()?;
    let entries: Vec<SweepEntry> = pool.install(|| {
        kappas
            .par_iter()
            .map(|&k| {
                let pair = sweep_point(&hp, &cfg, k);
                for e in &pair {
                    let path = dir.join(format!("sweep_kappa_{}_{}.json", k, e.branch.as_str()));
                    let doc = json!({ "command": "branch-sweep", "config": cfg, "entry": e });
                    // a failed write is recorded like a failed solve
                    if let Err(err) = write_json(&path, &doc) {
                        eprintln!("warning: {:#}", err.err);
                    }
                }
                pair
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });

    let mut w = csv::Writer::from_path(dir.join("branch_sweep.csv")).map_err(|e| Exit::runtime(e.into()))?;
    w.write_record(SWEEP_HEADER).map_err(|e| Exit::runtime(e.into()))?;
    for e in &entries {
        if let Some(p) = &e.point {
            let sigma = p.sigma1.map_or_else(|| "inf".to_string(), |s| s.to_string());
            w.write_record([
                p.kappa.to_string(),
                p.branch.as_str().to_string(),
                p.u_at_half.to_string(),
                sigma,
                p.energy.to_string(),
            ])
            .map_err(|e| Exit::runtime(e.into()))?;
        }
    }
    w.flush()?;

    let failures = entries.iter().filter(|e| e.error.is_some()).count();
    let summary = json!({
        "command": "branch-sweep",
        "config": cfg,
        "kstar": bracket,
        "fractions": fractions,
        "kappas": kappas,
        "failures": failures,
        "entries": entries,
    });
    write_json(&dir.join("branch_sweep.json"), &summary)?;
    let row = [
        ("points", kappas.len().to_string()),
        ("failures", failures.to_string()),
        ("csv", dir.join("branch_sweep.csv").display().to_string()),
    ];
    print_summary(c.format, &summary, &row)?;
    Ok(0)
}
