//! Layered run configuration: flags over config file over defaults.

use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use hsl_core::{build_grid, HardyParams, IterationOptions, RadialGrid};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Problem {
    #[serde(rename = "N")]
    pub dim: u32,
    pub mu: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Grid {
    pub r_min: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Solver {
    pub tol: f64,
    pub max_iter: usize,
    pub blowup_threshold: f64,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct RunConfig {
    pub problem: Problem,
    pub grid: Grid,
    pub solver: Solver,
}

impl Default for RunConfig {
    fn default() -> Self {
        let it = IterationOptions::default();
        Self {
            problem: Problem {
                dim: 3,
                mu: 0.0,
                p: 2.0,
            },
            grid: Grid { r_min: 1e-6, n: 1024 },
            solver: Solver {
                tol: it.tol,
                max_iter: it.max_iter,
                blowup_threshold: it.blowup_threshold,
            },
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    problem: FileProblem,
    #[serde(default)]
    grid: FileGrid,
    #[serde(default)]
    solver: FileSolver,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileProblem {
    #[serde(rename = "N")]
    dim: Option<u32>,
    mu: Option<f64>,
    p: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileGrid {
    r_min: Option<f64>,
    n: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSolver {
    tol: Option<f64>,
    max_iter: Option<usize>,
    blowup_threshold: Option<f64>,
}

/// Values given on the command line; `None` means "not given".
#[derive(Debug, Default, Clone, Copy)]
pub struct Overrides {
    pub dim: Option<u32>,
    pub mu: Option<f64>,
    pub p: Option<f64>,
    pub r_min: Option<f64>,
    pub n: Option<usize>,
    pub tol: Option<f64>,
}

impl RunConfig {
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let f: FileConfig =
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
            set(&mut cfg.problem.dim, f.problem.dim);
            set(&mut cfg.problem.mu, f.problem.mu);
            set(&mut cfg.problem.p, f.problem.p);
            set(&mut cfg.grid.r_min, f.grid.r_min);
            set(&mut cfg.grid.n, f.grid.n);
            set(&mut cfg.solver.tol, f.solver.tol);
            set(&mut cfg.solver.max_iter, f.solver.max_iter);
            set(&mut cfg.solver.blowup_threshold, f.solver.blowup_threshold);
        }
        set(&mut cfg.problem.dim, flags.dim);
        set(&mut cfg.problem.mu, flags.mu);
        set(&mut cfg.problem.p, flags.p);
        set(&mut cfg.grid.r_min, flags.r_min);
        set(&mut cfg.grid.n, flags.n);
        set(&mut cfg.solver.tol, flags.tol);
        Ok(cfg)
    }

    pub fn params(&self) -> hsl_core::Result<HardyParams> {
        HardyParams::new(self.problem.dim, self.problem.mu, self.problem.p)
    }

    pub fn grid(&self) -> hsl_core::Result<Arc<RadialGrid>> {
        build_grid(self.grid.r_min, self.grid.n)
    }

    pub fn iteration(&self) -> hsl_core::Result<IterationOptions> {
        let opts = IterationOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            blowup_threshold: self.solver.blowup_threshold,
        };
        opts.validate()?;
        Ok(opts)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
