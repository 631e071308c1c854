//! Command-line driver.
//!
//! Every tuning value resolves as flag, then `--config` JSON file, then the
//! built-in default. Exit codes: 0 success, 1 runtime or I/O failure (or a
//! failed check in `verify`/`gradcheck`), 2 usage error.

pub mod pgm;
pub mod records;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{
    aggregate_convergence, convergence_fit, median, run_fig1, run_fig2, run_image_demo, run_trial,
    synthetic_image, Fig1Config, Fig2Config, Fig2Output, ImageDemoConfig,
};
use crate::init::InitConfig;
use crate::linalg::RngStream;
use crate::model::{generate_signal, sample_dataset, true_rho, Link, SimConfig};
use crate::oracle::{
    check_prop21, check_prop22, default_prop21_grid, gradcheck_suite, lemma_a1_suite,
    probe_mean_concentration, probe_rip, MeanConcentrationConfig, ProbeReport, RipProbeConfig,
    PROP22_DEFAULT_C,
};
use crate::twf::TwfConfig;

pub use records::{format_real, read_records, write_records, write_records_to, Format, Record};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubcommandKind {
    Simulate,
    Fig1,
    Fig2,
    Image,
    Verify,
    Gradcheck,
}

#[derive(Parser, Debug)]
#[command(name = "sparse-twf", version, about = "Sparse phase retrieval by thresholded Wirtinger flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One simulated trial; prints a JSON summary.
    Simulate(Flags),
    /// Cosine error against inverse SNR over an n grid.
    Fig1(Flags),
    /// Per-iteration convergence traces.
    Fig2(Flags),
    /// Recover the leading singular values of a PGM image.
    Image(Flags),
    /// Numerical probes of the supporting inequalities.
    Verify(Flags),
    /// Finite-difference check of the gradient.
    Gradcheck(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    #[arg(long)]
    p: Option<usize>,
    /// Sparsity; comma separated for fig1.
    #[arg(long, value_delimiter = ',')]
    s: Option<Vec<usize>>,
    /// Sample size; comma separated for fig1.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// square, h1, h2, h3, neg-square, linear or const:<c>; comma separated for sweeps.
    #[arg(long, value_delimiter = ',')]
    link: Option<Vec<Link>>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Screen, build W and estimate ρ on three disjoint blocks.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    split: Option<bool>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rank_s: Option<usize>,
    #[arg(long)]
    n_mult: Option<f64>,
    /// P2/P5 graymap; a synthetic 256×256 scene when absent.
    #[arg(long)]
    image: Option<PathBuf>,
}

/// A scalar or a list in the config file.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// JSON config file: flag names with `-` replaced by `_`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    p: Option<usize>,
    s: Option<OneOrMany<usize>>,
    n: Option<OneOrMany<usize>>,
    link: Option<OneOrMany<Link>>,
    sigma: Option<f64>,
    gamma: Option<f64>,
    kappa: Option<f64>,
    eta: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
    split: Option<bool>,
    out: Option<PathBuf>,
    format: Option<Format>,
    parallelism: Option<usize>,
    rank_s: Option<usize>,
    n_mult: Option<f64>,
    image: Option<PathBuf>,
}

/// Fully resolved invocation. Sizes stay optional because their defaults
/// depend on the subcommand.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CliConfig {
    pub subcommand: SubcommandKind,
    pub p: Option<usize>,
    pub s: Option<Vec<usize>>,
    pub n: Option<Vec<usize>>,
    pub link: Option<Vec<Link>>,
    pub trials: Option<usize>,
    pub sigma: f64,
    pub seed: u64,
    pub init: InitConfig,
    pub twf: TwfConfig,
    pub out_path: Option<PathBuf>,
    pub format: Format,
    pub parallelism: usize,
    pub rank_s: usize,
    pub n_mult: f64,
    pub image: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    /// `--help` or `--version`; printed to stdout, exit 0.
    Help(String),
    /// Exit 2.
    Usage(String),
    /// Exit 1.
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Help(_) => 0,
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Help(s) | CliError::Usage(s) => f.write_str(s),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(msg) => CliError::Usage(format!("error: {msg}")),
            other => CliError::Runtime(other),
        }
    }
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load_config_file(path: &Path) -> std::result::Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("error: config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("error: config {}: {e}", path.display())))
}

/// Parses arguments without the program name.
pub fn parse_args<S: AsRef<str>>(argv: &[S]) -> std::result::Result<CliConfig, CliError> {
    let args = std::iter::once("sparse-twf").chain(argv.iter().map(|a| a.as_ref()));
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Help(e.to_string())
        }
        _ => CliError::Usage(e.render().to_string()),
    })?;
    let (subcommand, flags) = match cli.command {
        Command::Simulate(f) => (SubcommandKind::Simulate, f),
        Command::Fig1(f) => (SubcommandKind::Fig1, f),
        Command::Fig2(f) => (SubcommandKind::Fig2, f),
        Command::Image(f) => (SubcommandKind::Image, f),
        Command::Verify(f) => (SubcommandKind::Verify, f),
        Command::Gradcheck(f) => (SubcommandKind::Gradcheck, f),
    };
    let file = match &flags.config {
        Some(path) => load_config_file(path)?,
        None => ConfigFile::default(),
    };
    let init_default = InitConfig::default();
    let twf_default = TwfConfig::default();
    let image_default = ImageDemoConfig::default();
    let cfg = CliConfig {
        subcommand,
        p: flags.p.or(file.p),
        s: flags.s.or(file.s.map(OneOrMany::into_vec)),
        n: flags.n.or(file.n.map(OneOrMany::into_vec)),
        link: flags.link.or(file.link.map(OneOrMany::into_vec)),
        trials: flags.trials.or(file.trials),
        sigma: flags.sigma.or(file.sigma).unwrap_or(1.0),
        seed: flags.seed.or(file.seed).unwrap_or(0),
        init: InitConfig {
            gamma: flags.gamma.or(file.gamma).unwrap_or(init_default.gamma),
            split: flags.split.or(file.split).unwrap_or(init_default.split),
            ..init_default
        },
        twf: TwfConfig {
            kappa: flags.kappa.or(file.kappa).unwrap_or(twf_default.kappa),
            eta: flags.eta.or(file.eta).unwrap_or(twf_default.eta),
            tol: flags.tol.or(file.tol).unwrap_or(twf_default.tol),
            max_iter: flags.max_iter.or(file.max_iter).unwrap_or(twf_default.max_iter),
            ..twf_default
        },
        out_path: flags.out.or(file.out),
        format: flags.format.or(file.format).unwrap_or_default(),
        parallelism: flags
            .parallelism
            .or(file.parallelism)
            .unwrap_or_else(default_parallelism),
        rank_s: flags.rank_s.or(file.rank_s).unwrap_or(image_default.rank_s),
        n_mult: flags.n_mult.or(file.n_mult).unwrap_or(image_default.n_multiplier),
        image: flags.image.or(file.image),
    };
    if cfg.parallelism == 0 {
        return Err(CliError::Usage("error: --parallelism must be at least 1".into()));
    }
    cfg.init.validate()?;
    cfg.twf.validate()?;
    Ok(cfg)
}

fn single<T: Copy>(name: &str, values: &Option<Vec<T>>, default: T) -> Result<T> {
    match values.as_deref() {
        None => Ok(default),
        Some([v]) => Ok(*v),
        Some(_) => Err(Error::InvalidConfig(format!("--{name} takes one value here"))),
    }
}

impl CliConfig {
    pub fn sim_config(&self) -> Result<SimConfig> {
        let d = SimConfig::default();
        let sim = SimConfig {
            p: self.p.unwrap_or(d.p),
            s: single("s", &self.s, d.s)?,
            n: single("n", &self.n, d.n)?,
            link: single("link", &self.link, d.link)?,
            sigma: self.sigma,
            seed: self.seed,
        };
        sim.validate()?;
        Ok(sim)
    }

    pub fn fig1_config(&self) -> Fig1Config {
        let d = Fig1Config::default();
        Fig1Config {
            links: self.link.clone().unwrap_or(d.links),
            p: self.p.unwrap_or(d.p),
            s_values: self.s.clone().unwrap_or(d.s_values),
            n_values: self.n.clone().unwrap_or(d.n_values),
            trials: self.trials.unwrap_or(d.trials),
            sigma: self.sigma,
            seed: self.seed,
            parallelism: self.parallelism,
            init: self.init.clone(),
            twf: self.twf.clone(),
        }
    }

    /// `--max-iter` sets the trace length `T`; the report range is clipped to it.
    pub fn fig2_config(&self) -> Result<Fig2Config> {
        let d = Fig2Config::default();
        let total = self.twf.max_iter;
        Ok(Fig2Config {
            links: self.link.clone().unwrap_or(d.links),
            p: self.p.unwrap_or(d.p),
            s: single("s", &self.s, d.s)?,
            n: single("n", &self.n, d.n)?,
            trials: self.trials.unwrap_or(d.trials),
            total_iters: total,
            report_range: (d.report_range.0.min(total), d.report_range.1.min(total)),
            sigma: self.sigma,
            seed: self.seed,
            parallelism: self.parallelism,
            init: self.init.clone(),
            twf: self.twf.clone(),
        })
    }

    pub fn image_config(&self) -> Result<ImageDemoConfig> {
        let d = ImageDemoConfig::default();
        Ok(ImageDemoConfig {
            rank_s: self.rank_s,
            n_multiplier: self.n_mult,
            sigma: self.sigma,
            link: single("link", &self.link, d.link)?,
            seed: self.seed,
            init: self.init.clone(),
            twf: self.twf.clone(),
            ..d
        })
    }
}

/// Writes to `--out` when given, stdout otherwise.
fn emit<R: Record>(records: &[R], cfg: &CliConfig) -> Result<()> {
    match &cfg.out_path {
        Some(path) => write_records(records, path, cfg.format),
        None => write_records_to(records, std::io::stdout().lock(), cfg.format),
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn nonzeros(v: &[f64]) -> Vec<(usize, f64)> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(j, x)| (j, *x))
        .collect()
}

fn cmd_simulate(cfg: &CliConfig) -> Result<bool> {
    let sim = cfg.sim_config()?;
    let trial = run_trial(&sim, 0, &cfg.init, &cfg.twf)?;
    let report = crate::metrics::error_report(&trial.result.beta_hat, &trial.truth.beta_star, &trial.truth.support)?;
    let summary = serde_json::json!({
        "config": sim,
        "cosine_error": report.cosine_error,
        "dist": report.dist,
        "support_contained": report.support_contained,
        "iterations": trial.result.iterations,
        "converged": trial.result.converged,
        "rho_n": trial.result.init.rho_n,
        "screened": trial.result.init.s_hat,
        "support_true": trial.truth.support,
        "beta_hat": nonzeros(&trial.result.beta_hat),
    });
    if let Some(path) = &cfg.out_path {
        let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    print_json(&summary)?;
    Ok(true)
}

fn cmd_fig1(cfg: &CliConfig) -> Result<bool> {
    let fig = cfg.fig1_config();
    let records = run_fig1(&fig)?;
    emit(&records, cfg)?;
    let mut err = std::io::stderr().lock();
    writeln!(err, "link\ts\tn\tinv_snr\tmedian_cosine_error\tfailed")?;
    for &link in &fig.links {
        for &s in &fig.s_values {
            for &n in &fig.n_values {
                let group: Vec<_> = records
                    .iter()
                    .filter(|r| r.link == link && r.s == s && r.n == n)
                    .collect();
                let errs: Vec<f64> = group.iter().map(|r| r.cosine_error).collect();
                let failed = group.iter().filter(|r| r.error.is_some()).count();
                let inv = crate::experiments::inv_snr(s, fig.p, n);
                let med = median(&errs).unwrap_or(f64::NAN);
                writeln!(err, "{link}\t{s}\t{n}\t{inv:.4}\t{med:.3e}\t{failed}")?;
            }
        }
    }
    Ok(true)
}

/// Fraction of iterates `t ≥ 1` supported inside `supp(β*)`, over all
/// completed iterates of the given link.
pub fn support_containment(out: &Fig2Output, link: Link) -> Option<f64> {
    let trials: Vec<_> = out.trials.iter().filter(|t| t.link == link).collect();
    let total: usize = trials.iter().map(|t| t.iterations).sum();
    let inside: usize = trials.iter().map(|t| t.contained_iters).sum();
    (total > 0).then(|| inside as f64 / total as f64)
}

fn cmd_fig2(cfg: &CliConfig) -> Result<bool> {
    let fig = cfg.fig2_config()?;
    let out = run_fig2(&fig)?;
    emit(&out.records, cfg)?;
    let aggregates = aggregate_convergence(&out.records);
    if let Some(path) = &cfg.out_path {
        let ext = match cfg.format {
            Format::Csv => "aggregate.csv",
            Format::Json => "aggregate.json",
        };
        write_records(&aggregates, path.with_extension(ext), cfg.format)?;
    }
    let mut err = std::io::stderr().lock();
    writeln!(err, "link\tslope\tr_squared\tsupport_contained\tfailed_trials")?;
    for &link in &fig.links {
        let failed = out.trials.iter().filter(|t| t.link == link && t.error.is_some()).count();
        let contained = support_containment(&out, link).unwrap_or(f64::NAN);
        match convergence_fit(&aggregates, link) {
            Ok(fit) => writeln!(err, "{link}\t{:.4e}\t{:.4}\t{contained:.3}\t{failed}", fit.slope, fit.r_squared)?,
            Err(e) => writeln!(err, "{link}\t-\t-\t{contained:.3}\t{failed}\t({e})")?,
        }
    }
    Ok(true)
}

fn cmd_image(cfg: &CliConfig) -> Result<bool> {
    let image = match &cfg.image {
        Some(path) => pgm::load_pgm(path)?,
        None => synthetic_image(256, 256, cfg.seed)?,
    };
    let demo = cfg.image_config()?;
    let out = run_image_demo(&image, &demo)?;
    if let Some(path) = &cfg.out_path {
        pgm::write_pgm(path, &out.reconstruction)?;
    }
    print_json(&serde_json::json!({
        "height": image.rows(),
        "width": image.cols(),
        "rank_s": demo.rank_s,
        "n": out.n,
        "iterations": out.iterations,
        "alignment": out.alignment,
        "relative_frobenius_error": out.relative_frobenius_error,
        "beta_hat": nonzeros(&out.beta_hat),
        "beta_star": nonzeros(&out.beta_star),
    }))?;
    Ok(true)
}

/// Probe suite behind `verify`. `seeds` sets the seed count of the
/// statistical probes.
pub fn verify_probes(seed: u64, seeds: usize) -> Result<Vec<ProbeReport>> {
    let root = RngStream::new(seed, 0x7665_7269);
    let grid = default_prop21_grid();
    let mut reports = Vec::new();
    for (k, (link, sigma)) in [(Link::Square, 0.0), (Link::H1, 1.0)].into_iter().enumerate() {
        let mut check = check_prop21(link, sigma, &grid, 200_000, &mut root.derive(k as u64))?;
        check.report.name = format!("prop21_{link}");
        reports.push(check.report);
    }
    for (k, (link, sigma)) in [(Link::Square, 0.0), (Link::H3, 1.0)].into_iter().enumerate() {
        let mut rng = root.derive(10 + k as u64);
        let sim = SimConfig {
            p: 20,
            s: 3,
            n: 50_000,
            link,
            sigma,
            seed,
        };
        let rho = match link.analytic_moments(sigma) {
            Some(m) => m.rho,
            None => true_rho(link, sigma, 2_000_000, &mut rng.derive(0))?.value,
        };
        let truth = generate_signal(&sim, &mut rng)?;
        let data = sample_dataset(&sim, &truth, &mut rng)?;
        for mut r in check_prop22(&data, &truth, rho, PROP22_DEFAULT_C, &mut rng)? {
            r.name = format!("{}_{link}", r.name);
            reports.push(r);
        }
    }
    reports.push(lemma_a1_suite(1000, seed)?);
    reports.extend(probe_rip(
        &RipProbeConfig {
            seeds,
            ..RipProbeConfig::default()
        },
        &root.derive(20),
    )?);
    reports.extend(probe_mean_concentration(
        &MeanConcentrationConfig {
            seeds,
            ..MeanConcentrationConfig::default()
        },
        &root.derive(21),
    )?);
    Ok(reports)
}

fn cmd_verify(cfg: &CliConfig) -> Result<bool> {
    let reports = verify_probes(cfg.seed, cfg.trials.unwrap_or(100))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<28} {:<8} {:>14} {:>14} {:>8}", "probe", "result", "observed", "bound", "seeds")?;
    for r in &reports {
        let status = if r.skipped {
            "SKIP"
        } else if r.passed {
            "PASS"
        } else {
            "FAIL"
        };
        writeln!(
            out,
            "{:<28} {:<8} {:>14.6e} {:>14.6e} {:>4}/{:<4}",
            r.name, status, r.observed, r.bound, r.seeds_passed, r.seeds_checked
        )?;
    }
    Ok(reports.iter().all(|r| r.passed))
}

/// Largest acceptable relative error in `gradcheck`.
pub const GRADCHECK_TOL: f64 = 1e-5;

fn cmd_gradcheck(cfg: &CliConfig) -> Result<bool> {
    let results = gradcheck_suite(cfg.trials.unwrap_or(100), cfg.seed, 1e-5)?;
    let worst = results
        .iter()
        .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error));
    let failed = results.iter().filter(|r| !(r.relative_error <= GRADCHECK_TOL)).count();
    let mut out = std::io::stdout().lock();
    if let Some(w) = worst {
        writeln!(
            out,
            "instances {}  worst relative error {:.3e} (#{} {} p={} n={})  failures {failed}",
            results.len(),
            w.relative_error,
            w.index,
            w.link,
            w.p,
            w.n
        )?;
    }
    Ok(failed == 0)
}

/// Runs a parsed invocation. `Ok(false)` means a check failed.
pub fn run(cfg: &CliConfig) -> Result<bool> {
    match cfg.subcommand {
        SubcommandKind::Simulate => cmd_simulate(cfg),
        SubcommandKind::Fig1 => cmd_fig1(cfg),
        SubcommandKind::Fig2 => cmd_fig2(cfg),
        SubcommandKind::Image => cmd_image(cfg),
        SubcommandKind::Verify => cmd_verify(cfg),
        SubcommandKind::Gradcheck => cmd_gradcheck(cfg),
    }
}

/// Parses, runs, prints diagnostics, and returns the process exit code.
pub fn main_with_args<S: AsRef<str>>(argv: &[S]) -> i32 {
    let outcome = parse_args(argv).and_then(|cfg| run(&cfg).map_err(CliError::from));
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(CliError::Help(text)) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
