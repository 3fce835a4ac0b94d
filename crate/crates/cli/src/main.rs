use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use qme_core::bath::{SpectralModel, Statistics};
use qme_core::certify::{self, CheckResult, EthFamily};
use qme_core::dynamics::{self, DensityMatrix, Observable};
use qme_core::fock::FockSpace;
use qme_core::generators::{self, GeneratorCoefficients, GeneratorJson, Sector};
use qme_core::hamiltonians::{self, Boundary, CouplingPattern, QuadraticHamiltonian};
use qme_core::harness::{self, EnsembleConfig};
use qme_core::{Error, CODE_VERSION, CONFIG_SCHEMA_VERSION};

#[derive(Parser)]
#[command(
    name = "qme",
    about = "Redfield and Davies master equations for quadratic lattices",
    disable_version_flag = true,
    arg_required_else_help = false
)]
struct Cli {
    /// Print code and config schema versions.
    #[arg(short = 'V', long, global = true)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Check Redfield/Davies coefficient equality on random instances.
    VerifyEquivalence(VerifyArgs),
    /// Run a disorder ensemble from a config file.
    Ensemble(EnsembleArgs),
    /// Certify a generator (exported JSON or built from flags).
    Certify(CertifyArgs),
    /// Evolve a single trajectory.
    Evolve(EvolveArgs),
    /// Secular and non-secular dephasing-coefficient scaling with size.
    EthScaling(EthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Gue,
    Chain,
    Anderson3d,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatisticsArg {
    Fermionic,
    Bosonic,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Periodic,
    Open,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Redfield,
    Davies,
}

#[derive(Clone, Copy, ValueEnum)]
enum CouplingArg {
    Linear,
    Dephasing,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObservableArg {
    Occupations,
    Full,
}

#[derive(Args, Clone)]
struct SystemArgs {
    #[arg(long, value_enum, default_value = "gue")]
    model: ModelArg,
    /// Sites for gue/chain, side length for anderson3d.
    #[arg(long, default_value_t = 8)]
    size: usize,
    /// Hopping scale J.
    #[arg(long, default_value_t = 1.0)]
    j: f64,
    /// Anderson disorder W.
    #[arg(long, default_value_t = 16.0)]
    disorder: f64,
    #[arg(long, value_enum, default_value = "periodic")]
    boundary: BoundaryArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct BathArgs {
    #[arg(long, value_enum, default_value = "fermionic")]
    statistics: StatisticsArg,
    #[arg(long, default_value_t = 5.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    /// Ohmic cutoff frequency.
    #[arg(long, default_value_t = 10.0)]
    cutoff: f64,
    /// System-bath coupling J_int.
    #[arg(long, default_value_t = 0.2)]
    coupling: f64,
    /// Keep the principal-value (Lamb-shift) terms.
    #[arg(long)]
    eta: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    bath: BathArgs,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    /// Relative tolerance.
    #[arg(long, default_value_t = certify::EQUIVALENCE_TOL)]
    tol: f64,
    /// uniform, sublattice:<p> or random.
    #[arg(long, default_value = "uniform")]
    pattern: String,
}

#[derive(Args)]
struct EnsembleArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, env = harness::THREADS_ENV)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GeneratorArgs {
    #[command(flatten)]
    system: SystemArgs,
    #[command(flatten)]
    bath: BathArgs,
    #[arg(long, value_enum, default_value = "davies")]
    kind: KindArg,
    #[arg(long, value_enum, default_value = "linear")]
    coupling_mode: CouplingArg,
    /// uniform, sublattice:<p> or random (exchange coupling only).
    #[arg(long, default_value = "uniform")]
    pattern: String,
}

#[derive(Args)]
struct CertifyArgs {
    /// Exported generator JSON; model flags are ignored when given.
    #[arg(long)]
    generator: Option<PathBuf>,
    #[command(flatten)]
    gen: GeneratorArgs,
    /// Write the built generator as JSON.
    #[arg(long)]
    export: Option<PathBuf>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvolveArgs {
    #[command(flatten)]
    gen: GeneratorArgs,
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    #[arg(long, default_value_t = 101)]
    n_points: usize,
    /// RK4 step; default divides the grid spacing.
    #[arg(long)]
    step: Option<f64>,
    /// Initially occupied site (1-based).
    #[arg(long, default_value_t = 1)]
    site: usize,
    #[arg(long, value_enum, default_value = "occupations")]
    observable: ObservableArg,
    /// Output stem for `<stem>.csv` and `<stem>.json`; CSV to stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EthArgs {
    #[arg(long, value_enum, default_value = "gue")]
    model: ModelArg,
    /// Comma-separated, ascending; side lengths for anderson3d.
    #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 1.0)]
    j: f64,
    #[arg(long, default_value_t = 16.0)]
    disorder: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    if cli.version {
        println!("qme {CODE_VERSION} (config schema {CONFIG_SCHEMA_VERSION})");
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        let _ = Cli::command().write_long_help(&mut std::io::stderr());
        return ExitCode::from(2);
    };
    let result = match command {
        Command::VerifyEquivalence(a) => verify(a),
        Command::Ensemble(a) => ensemble(a),
        Command::Certify(a) => certify_cmd(a),
        Command::Evolve(a) => evolve(a),
        Command::EthScaling(a) => eth(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            match e.downcast_ref::<Error>() {
                Some(Error::Config(msgs)) => {
                    eprintln!("error: invalid configuration");
                    for m in msgs {
                        eprintln!("  - {m}");
                    }
                }
                _ => eprintln!("error: {e:#}"),
            }
            ExitCode::FAILURE
        }
    }
}

impl BathArgs {
    fn model(&self) -> Result<SpectralModel> {
        let stats = match self.statistics {
            StatisticsArg::Fermionic => Statistics::Fermionic,
            StatisticsArg::Bosonic => Statistics::Bosonic,
        };
        Ok(SpectralModel::ohmic(stats, self.beta, self.mu, self.cutoff, self.coupling)?.with_eta(self.eta))
    }
}

impl SystemArgs {
    fn boundary(&self) -> Boundary {
        match self.boundary {
            BoundaryArg::Periodic => Boundary::Periodic,
            BoundaryArg::Open => Boundary::Open,
        }
    }

    fn build(&self, sample: u64) -> Result<QuadraticHamiltonian> {
        Ok(match self.model {
            ModelArg::Gue => hamiltonians::build_gue_sample(self.size, self.j, self.seed, sample)?,
            ModelArg::Chain => hamiltonians::build_chain(self.size, self.j, self.boundary())?,
            ModelArg::Anderson3d => hamiltonians::build_anderson3d_sample(
                self.size,
                self.disorder,
                self.j,
                self.seed,
                sample,
                self.boundary(),
            )?,
        })
    }
}

enum PatternArg {
    Uniform,
    Sublattice(usize),
    Random,
}

fn parse_pattern(s: &str) -> Result<PatternArg> {
    match s {
        "uniform" => Ok(PatternArg::Uniform),
        "random" => Ok(PatternArg::Random),
        _ => {
            let p = s
                .strip_prefix("sublattice:")
                .ok_or_else(|| anyhow!("unknown pattern '{s}' (uniform, sublattice:<p>, random)"))?;
            let p: usize = p.parse().with_context(|| format!("bad sublattice period in '{s}'"))?;
            Ok(PatternArg::Sublattice(p))
        }
    }
}

fn build_pattern(p: &PatternArg, n: usize, seed: u64) -> Result<CouplingPattern> {
    Ok(match p {
        PatternArg::Uniform => CouplingPattern::uniform(n, 1.0)?,
        PatternArg::Sublattice(p) => CouplingPattern::sublattice(n, *p)?,
        PatternArg::Random => CouplingPattern::random(n, seed)?,
    })
}

fn verdict(c: &CheckResult) -> &'static str {
    match c.passed {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "-",
    }
}

fn verify(a: VerifyArgs) -> Result<ExitCode> {
    if a.samples == 0 {
        bail!("--samples must be at least 1");
    }
    let pattern = parse_pattern(&a.pattern)?;
    let model = a.bath.model()?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:>6} {:>5} {:>14} {:>14} {:>7}", "sample", "N", "residual", "tolerance", "verdict")?;
    let mut failed = false;
    for k in 0..a.samples as u64 {
        let ham = a.system.build(k)?;
        let n = ham.n_sites();
        let mut c = match pattern {
            PatternArg::Sublattice(p) => certify::check_sublattice_equivalence(&ham, &model, p)?,
            _ => {
                let pat = build_pattern(&pattern, n, a.system.seed.wrapping_add(k))?;
                certify::check_equivalence(&ham, &model, &pat)?
            }
        };
        if c.passed.is_some() {
            c.tolerance *= a.tol / certify::EQUIVALENCE_TOL;
            c.passed = Some(c.residual <= c.tolerance);
        }
        failed |= c.passed == Some(false);
        writeln!(out, "{k:>6} {n:>5} {:>14.3e} {:>14.3e} {:>7}", c.residual, c.tolerance, verdict(&c))?;
    }
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn ensemble(a: EnsembleArgs) -> Result<ExitCode> {
    let mut cfg = EnsembleConfig::from_path(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let threads = a.threads.unwrap_or_else(harness::default_threads);
    let res = harness::run_ensemble(&cfg, threads)?;
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    let files = harness::emit_report(&res, &a.out)?;
    println!("{:>6} {:>7} {:>12} {:>12} {:>8} {:>9}", "size", "samples", "max_mean_td", "std_at_max", "t_at_max", "failures");
    for s in &res.sizes {
        println!(
            "{:>6} {:>7} {:>12.5e} {:>12.5e} {:>8.3} {:>9}",
            s.size, s.samples, s.max_mean, s.std_at_max, s.t_at_max, s.failures
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn build_generator(a: &GeneratorArgs) -> Result<GeneratorCoefficients> {
    let ham = a.system.build(0)?;
    let model = a.bath.model()?;
    let n = ham.n_sites();
    Ok(match (a.coupling_mode, a.kind) {
        (CouplingArg::Linear, kind) => {
            let pat = build_pattern(&parse_pattern(&a.pattern)?, n, a.system.seed)?;
            match kind {
                KindArg::Redfield => generators::build_redfield_linear(&ham, &model, &pat)?,
                KindArg::Davies => generators::build_davies_linear(&ham, &model, &pat)?,
            }
        }
        (CouplingArg::Dephasing, KindArg::Redfield) => generators::build_redfield_dephasing(&ham, &model)?,
        (CouplingArg::Dephasing, KindArg::Davies) => generators::build_davies_dephasing(&ham, &model)?,
    })
}

fn certify_cmd(a: CertifyArgs) -> Result<ExitCode> {
    let g = match &a.generator {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let json: GeneratorJson = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            GeneratorCoefficients::from_json(&json)?
        }
        None => build_generator(&a.gen)?,
    };
    if let Some(path) = &a.export {
        std::fs::write(path, serde_json::to_string_pretty(&g.to_json())?)?;
    }
    let mut report = certify::certify(&g)?;
    report.metadata.timestamp = Some(
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_default(),
    );
    let json = serde_json::to_string_pretty(&report)?;
    match &a.report {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    print!("{}", report.table());
    Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn evolve(a: EvolveArgs) -> Result<ExitCode> {
    let g = build_generator(&a.gen)?;
    let n = g.n_sites();
    if a.site == 0 || a.site > n {
        bail!("--site must lie in 1..={n}");
    }
    let rho0 = match g.sector() {
        Sector::SingleParticle => DensityMatrix::site_excitation(n, a.site - 1)?,
        Sector::ModeOccupation => DensityMatrix::new(FockSpace::new(n)?.single_site_excitation(a.site - 1))?,
    };
    if a.n_points < 2 {
        bail!("--n-points must be at least 2");
    }
    let grid = dynamics::uniform_grid(a.t_max, a.n_points);
    let dt = grid[1] - grid[0];
    let step = a.step.unwrap_or_else(|| dt / (dt / dynamics::default_step(&g)).ceil());
    let traj = dynamics::evolve(&g, &rho0, &grid, step)?;
    let obs = match a.observable {
        ObservableArg::Occupations => Observable::Occupations,
        ObservableArg::Full => Observable::Full,
    };
    match &a.out {
        Some(stem) => traj.export(stem, obs)?,
        None => traj.write_csv(std::io::stdout().lock(), obs)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn eth(a: EthArgs) -> Result<ExitCode> {
    let family = match a.model {
        ModelArg::Gue => EthFamily::Gue { j: a.j },
        ModelArg::Anderson3d => EthFamily::Anderson { disorder: a.disorder, j: a.j },
        ModelArg::Chain => bail!("eth-scaling supports gue and anderson3d"),
    };
    let r = certify::eth_scaling_report(family, &a.sizes, a.samples, a.seed)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&r)?);
        return Ok(ExitCode::SUCCESS);
    }
    println!("{:>6} {:>8} {:>14} {:>14} {:>10}", "N", "samples", "secular", "nonsecular", "ratio");
    for row in &r.rows {
        println!(
            "{:>6} {:>8} {:>14.6e} {:>14.6e} {:>10.4}",
            row.n_sites, row.samples, row.secular_mean, row.nonsecular_rms, row.ratio
        );
    }
    let fmt = |s: Option<f64>| s.map_or("-".to_string(), |v| format!("{v:.4}"));
    println!("secular slope {}, non-secular slope {}", fmt(r.secular_slope), fmt(r.nonsecular_slope));
    Ok(ExitCode::SUCCESS)
}
