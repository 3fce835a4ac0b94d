//! Seeded disorder ensembles comparing Redfield and Davies dynamics.
//!
//! Every (size, sample) pair draws its Hamiltonian from an index-derived
//! random stream and is evolved on one thread; results are merged by index,
//! so outputs do not depend on the worker count.

pub mod config;
pub mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{default_step, evolve, trace_distance, DensityMatrix};
use crate::error::{Error, Result};
use crate::fock::FockSpace;
use crate::generators::{
    build_davies_dephasing, build_davies_linear, build_redfield_dephasing, build_redfield_linear,
    GeneratorCoefficients,
};
use crate::hamiltonians::{
    build_anderson3d_sample, build_chain, build_gue_sample, CouplingPattern, QuadraticHamiltonian,
};

pub use config::{
    BathConfig, CouplingConfig, CouplingMode, EnsembleConfig, FamilyConfig, FamilyKind,
    InitialState, TimeConfig,
};
pub use report::emit_report;

/// Environment variable consulted for the default worker count.
pub const THREADS_ENV: &str = "QME_THREADS";

/// Fraction of failed samples per size above which an ensemble aborts.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

/// Worker count from [`THREADS_ENV`], else the available parallelism.
pub fn default_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub size: usize,
    pub n_sites: usize,
    /// Samples that completed.
    pub samples: usize,
    pub failures: usize,
    pub mean: Vec<f64>,
    /// Population standard deviation across samples.
    pub std: Vec<f64>,
    pub max_mean: f64,
    pub std_at_max: f64,
    pub t_at_max: f64,
    /// Largest `|tr ρ - 1|` over every stored snapshot of both dynamics.
    pub max_trace_drift: f64,
    /// Smallest snapshot eigenvalue over both dynamics; the Redfield
    /// generator is not completely positive and may dip below zero.
    pub min_eigenvalue: f64,
    /// RK4 steps used by the samples (one per successful sample).
    pub steps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub config: EnsembleConfig,
    pub config_hash: String,
    pub code_version: String,
    pub times: Vec<f64>,
    pub sizes: Vec<SizeSummary>,
    /// One message per failed sample.
    pub warnings: Vec<String>,
}

/// Mean and population standard deviation, two-pass.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Index of the first maximum of `mean` with the value and the matching std.
pub fn max_over_time(mean: &[f64], std: &[f64]) -> (usize, f64, f64) {
    let mut best = 0;
    for (i, &m) in mean.iter().enumerate() {
        if m > mean[best] {
            best = i;
        }
    }
    (best, mean[best], std[best])
}

pub fn build_hamiltonian(cfg: &EnsembleConfig, size: usize, sample: u64) -> Result<QuadraticHamiltonian> {
    let f = &cfg.family;
    match f.kind {
        FamilyKind::Gue => build_gue_sample(size, f.j, cfg.seed, sample),
        FamilyKind::Anderson3d => {
            let w = f
                .disorder
                .ok_or_else(|| Error::InvalidParameter("anderson3d needs a disorder strength".into()))?;
            build_anderson3d_sample(size, w, f.j, cfg.seed, sample, f.boundary)
        }
        FamilyKind::Chain => build_chain(size, f.j, f.boundary),
    }
}

/// Redfield and Davies generators and the initial state for one sample.
pub fn sample_setup(
    cfg: &EnsembleConfig,
    size: usize,
    sample: u64,
) -> Result<(GeneratorCoefficients, GeneratorCoefficients, DensityMatrix)> {
    let ham = build_hamiltonian(cfg, size, sample)?;
    let model = cfg.bath.model()?;
    let n = ham.n_sites();
    let site = cfg.initial.site - 1;
    match cfg.coupling.mode {
        CouplingMode::Dephasing => Ok((
            build_redfield_dephasing(&ham, &model)?,
            build_davies_dephasing(&ham, &model)?,
            DensityMatrix::site_excitation(n, site)?,
        )),
        mode => {
            let pattern = match mode {
                CouplingMode::LinearPattern => CouplingPattern::new(
                    cfg.coupling.weights.clone().unwrap_or_default(),
                )?,
                _ => CouplingPattern::uniform(n, 1.0)?,
            };
            let rho0 = DensityMatrix::new(FockSpace::new(n)?.single_site_excitation(site))?;
            Ok((
                build_redfield_linear(&ham, &model, &pattern)?,
                build_davies_linear(&ham, &model, &pattern)?,
                rho0,
            ))
        }
    }
}

/// Configured step, or the default step of the faster generator rounded
/// down so that it divides the grid spacing.
pub fn sample_step(cfg: &EnsembleConfig, a: &GeneratorCoefficients, b: &GeneratorCoefficients) -> f64 {
    if let Some(h) = cfg.time.step {
        return h;
    }
    let dt = cfg.time.spacing();
    let h = default_step(a).min(default_step(b));
    dt / (dt / h).ceil()
}

struct SampleOutcome {
    curve: Vec<f64>,
    drift: f64,
    min_eigenvalue: f64,
    step: f64,
}

fn run_sample(cfg: &EnsembleConfig, size: usize, sample: u64, grid: &[f64]) -> Result<SampleOutcome> {
    let (red, dav, rho0) = sample_setup(cfg, size, sample)?;
    let step = sample_step(cfg, &red, &dav);
    let tr = evolve(&red, &rho0, grid, step)?;
    let td = evolve(&dav, &rho0, grid, step)?;
    let mut curve = Vec::with_capacity(grid.len());
    let mut drift = 0.0_f64;
    for (a, b) in tr.states.iter().zip(&td.states) {
        curve.push(trace_distance(a, b)?);
        drift = drift
            .max((a.trace().re - 1.0).abs())
            .max((b.trace().re - 1.0).abs());
    }
    Ok(SampleOutcome {
        curve,
        drift,
        min_eigenvalue: tr.min_eigenvalue.min(td.min_eigenvalue),
        step,
    })
}

/// Runs every (size, sample) task on a pool of `threads` workers.
pub fn run_ensemble(cfg: &EnsembleConfig, threads: usize) -> Result<EnsembleResult> {
    cfg.validate()?;
    let grid = cfg.time.grid();
    let tasks: Vec<(usize, u64)> = cfg
        .sizes
        .iter()
        .flat_map(|&s| (0..cfg.samples as u64).map(move |k| (s, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<SampleOutcome>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(s, k)| run_sample(cfg, s, k, &grid))
            .collect()
    });

    let mut sizes = Vec::with_capacity(cfg.sizes.len());
    let mut warnings = Vec::new();
    for (si, &size) in cfg.sizes.iter().enumerate() {
        let chunk = &outcomes[si * cfg.samples..(si + 1) * cfg.samples];
        let mut ok = Vec::new();
        for (k, o) in chunk.iter().enumerate() {
            match o {
                Ok(v) => ok.push(v),
                Err(e) => warnings.push(format!("size {size}, sample {k}: {e}")),
            }
        }
        let failures = chunk.len() - ok.len();
        if failures as f64 > MAX_FAILURE_FRACTION * chunk.len() as f64 || ok.is_empty() {
            return Err(Error::Integration {
                time: f64::NAN,
                reason: format!(
                    "{failures} of {} samples failed at size {size}: {}",
                    chunk.len(),
                    warnings.join("; ")
                ),
            });
        }
        let mut mean = Vec::with_capacity(grid.len());
        let mut std = Vec::with_capacity(grid.len());
        let mut column = Vec::with_capacity(ok.len());
        for i in 0..grid.len() {
            column.clear();
            column.extend(ok.iter().map(|o| o.curve[i]));
            let (m, s) = mean_std(&column);
            mean.push(m);
            std.push(s);
        }
        let (imax, max_mean, std_at_max) = max_over_time(&mean, &std);
        sizes.push(SizeSummary {
            size,
            n_sites: cfg.n_sites(size),
            samples: ok.len(),
            failures,
            max_mean,
            std_at_max,
            t_at_max: grid[imax],
            max_trace_drift: ok.iter().map(|o| o.drift).fold(0.0, f64::max),
            min_eigenvalue: ok.iter().map(|o| o.min_eigenvalue).fold(f64::INFINITY, f64::min),
            steps: ok.iter().map(|o| o.step).collect(),
            mean,
            std,
        });
    }
    Ok(EnsembleResult {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        code_version: crate::CODE_VERSION.to_string(),
        times: grid,
        sizes,
        warnings,
    })
}
