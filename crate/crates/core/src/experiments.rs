//! Simulation sweeps: error against inverse SNR, per-iteration convergence
//! traces, and recovery of an image's leading singular values.
//!
//! Every trial owns an [`RngStream`] keyed by `(seed, link, s, n, trial)`, so
//! results do not depend on how trials are scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::InitConfig;
use crate::linalg::{deflated_svd, dot, mix_words, norm, Mat, PartialSvd, RngStream};
use crate::metrics::{cosine_error, dist};
use crate::model::{
    apply_link, generate_signal, sample_dataset, sample_design_and_noise, Dataset, GroundTruth,
    Link, SimConfig,
};
use crate::twf::{estimate, EstimationResult, TwfConfig};

/// One Fig. 1 style trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub trial: usize,
    pub link: Link,
    pub p: usize,
    pub s: usize,
    pub n: usize,
    /// `s √(log p / n)`
    pub inv_snr: f64,
    pub cosine_error: f64,
    pub dist: f64,
    pub iterations: usize,
    /// Every iterate after the initializer is supported inside `supp(β*)`.
    pub support_ok_all_iters: bool,
    pub seed: u64,
    /// Set when the trial failed; the metrics are then NaN.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// `log(Errₜ − Err_T)` for one trial at one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub trial: usize,
    pub link: Link,
    pub t: usize,
    pub err_t: f64,
    pub log_gap: f64,
}

pub fn inv_snr(s: usize, p: usize, n: usize) -> f64 {
    s as f64 * ((p as f64).ln() / n as f64).sqrt()
}

fn link_tag(link: Link) -> u64 {
    // FNV-1a over the link name keeps streams stable when the link list changes.
    link.name()
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// RNG stream of one trial.
pub fn trial_stream(seed: u64, link: Link, s: usize, n: usize, trial: usize) -> RngStream {
    RngStream::new(seed, mix_words(&[link_tag(link), s as u64, n as u64, trial as u64]))
}

/// Runs `f` over `0..count` on a pool of `parallelism` threads, keeping order.
fn run_pool<T, F>(count: usize, parallelism: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(&f).collect()))
}

/// Simulates one dataset and runs the estimator on it.
pub struct Trial {
    pub truth: GroundTruth,
    pub data: Dataset,
    pub result: EstimationResult,
}

pub fn run_trial(
    sim: &SimConfig,
    trial: usize,
    init: &InitConfig,
    twf: &TwfConfig,
) -> Result<Trial> {
    let mut rng = trial_stream(sim.seed, sim.link, sim.s, sim.n, trial);
    let truth = generate_signal(sim, &mut rng)?;
    let data = sample_dataset(sim, &truth, &mut rng)?;
    let result = estimate(&data, init, twf, Some(&truth), &mut rng)?;
    Ok(Trial { truth, data, result })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig1Config {
    pub links: Vec<Link>,
    pub p: usize,
    pub s_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub sigma: f64,
    pub seed: u64,
    pub parallelism: usize,
    pub init: InitConfig,
    pub twf: TwfConfig,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Self {
            links: vec![Link::H1, Link::H2, Link::H3],
            p: 1000,
            s_values: vec![5, 8, 10],
            n_values: vec![1000, 2000, 4000, 8000],
            trials: 100,
            sigma: 1.0,
            seed: 0,
            parallelism: 1,
            init: InitConfig::default(),
            twf: TwfConfig::default(),
        }
    }
}

fn failed_record(trial: usize, sim: &SimConfig, err: Error) -> ExperimentRecord {
    ExperimentRecord {
        trial,
        link: sim.link,
        p: sim.p,
        s: sim.s,
        n: sim.n,
        inv_snr: inv_snr(sim.s, sim.p, sim.n),
        cosine_error: f64::NAN,
        dist: f64::NAN,
        iterations: 0,
        support_ok_all_iters: false,
        seed: sim.seed,
        error: Some(err.to_string()),
    }
}

fn fig1_trial(sim: &SimConfig, trial: usize, init: &InitConfig, twf: &TwfConfig) -> ExperimentRecord {
    let run = || -> Result<ExperimentRecord> {
        let Trial { truth, result, .. } = run_trial(sim, trial, init, twf)?;
        let support_ok = result
            .trace
            .as_ref()
            .map(|t| t.entries.iter().skip(1).all(|e| e.support_contained == Some(true)))
            .unwrap_or(false);
        Ok(ExperimentRecord {
            trial,
            link: sim.link,
            p: sim.p,
            s: sim.s,
            n: sim.n,
            inv_snr: inv_snr(sim.s, sim.p, sim.n),
            cosine_error: cosine_error(&result.beta_hat, &truth.beta_star)?,
            dist: dist(&result.beta_hat, &truth.beta_star)?,
            iterations: result.iterations,
            support_ok_all_iters: support_ok,
            seed: sim.seed,
            error: None,
        })
    };
    run().unwrap_or_else(|e| failed_record(trial, sim, e))
}

/// Error against inverse SNR. Records come back sorted by
/// `(link, s, n, trial)` in the order the lists were given.
pub fn run_fig1(cfg: &Fig1Config) -> Result<Vec<ExperimentRecord>> {
    cfg.init.validate()?;
    cfg.twf.validate()?;
    if let Some(&n) = cfg.n_values.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidConfig(format!("n = {n} is below 2")));
    }
    let twf = TwfConfig {
        record_trace: true,
        ..cfg.twf.clone()
    };
    let mut jobs = Vec::new();
    for &link in &cfg.links {
        for &s in &cfg.s_values {
            for &n in &cfg.n_values {
                let sim = SimConfig {
                    p: cfg.p,
                    s,
                    n,
                    link,
                    sigma: cfg.sigma,
                    seed: cfg.seed,
                };
                sim.validate()?;
                for trial in 0..cfg.trials {
                    jobs.push((sim.clone(), trial));
                }
            }
        }
    }
    run_pool(jobs.len(), cfg.parallelism, |k| {
        let (sim, trial) = &jobs[k];
        fig1_trial(sim, *trial, &cfg.init, &twf)
    })
}

/// Median of the finite values, `None` if there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig2Config {
    pub links: Vec<Link>,
    pub p: usize,
    pub s: usize,
    pub n: usize,
    pub trials: usize,
    /// Every trial runs exactly this many iterations.
    pub total_iters: usize,
    /// Inclusive range of reported iterations.
    pub report_range: (usize, usize),
    pub sigma: f64,
    pub seed: u64,
    pub parallelism: usize,
    pub init: InitConfig,
    pub twf: TwfConfig,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            links: vec![Link::H1, Link::H2, Link::H3],
            p: 1000,
            s: 5,
            n: 863,
            trials: 50,
            total_iters: 1000,
            report_range: (101, 300),
            sigma: 1.0,
            seed: 0,
            parallelism: 1,
            init: InitConfig::default(),
            twf: TwfConfig::default(),
        }
    }
}

impl Fig2Config {
    /// Smaller preset with the same pass rule.
    pub fn reduced() -> Self {
        Self {
            p: 300,
            n: 500,
            trials: 20,
            total_iters: 400,
            ..Self::default()
        }
    }
}

/// Per-trial summary of a convergence run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig2Trial {
    pub link: Link,
    pub trial: usize,
    /// `Err_T`
    pub final_err: f64,
    /// Iterates `t ≥ 1` whose support lies inside `supp(β*)`.
    pub contained_iters: usize,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Fig2Output {
    pub records: Vec<ConvergenceRecord>,
    pub trials: Vec<Fig2Trial>,
}

fn fig2_trial(sim: &SimConfig, trial: usize, cfg: &Fig2Config, twf: &TwfConfig) -> (Vec<ConvergenceRecord>, Fig2Trial) {
    let failed = |e: Error| {
        (
            Vec::new(),
            Fig2Trial {
                link: sim.link,
                trial,
                final_err: f64::NAN,
                contained_iters: 0,
                iterations: 0,
                error: Some(e.to_string()),
            },
        )
    };
    let result = match run_trial(sim, trial, &cfg.init, twf) {
        Ok(t) => t.result,
        Err(e) => return failed(e),
    };
    let entries = match result.trace {
        Some(t) => t.entries,
        None => return failed(Error::InvalidConfig("trace missing".into())),
    };
    let errs: Vec<f64> = entries.iter().map(|e| e.cosine_error.unwrap_or(f64::NAN)).collect();
    let final_err = *errs.last().expect("trace holds the initializer");
    let (lo, hi) = cfg.report_range;
    let records = (lo..=hi.min(errs.len() - 1))
        .filter(|&t| errs[t] - final_err > GAP_FLOOR)
        .map(|t| ConvergenceRecord {
            trial,
            link: sim.link,
            t,
            err_t: errs[t],
            log_gap: (errs[t] - final_err).ln(),
        })
        .collect();
    let contained_iters = entries
        .iter()
        .skip(1)
        .filter(|e| e.support_contained == Some(true))
        .count();
    (
        records,
        Fig2Trial {
            link: sim.link,
            trial,
            final_err,
            contained_iters,
            iterations: result.iterations,
            error: None,
        },
    )
}

/// Gaps at or below this are rounding noise in the cosine error and are
/// treated as zero.
pub const GAP_FLOOR: f64 = 1e-12;

/// Convergence traces with the stopping rule disabled. Rows where
/// `Errₜ − Err_T ≤ GAP_FLOOR` are omitted.
pub fn run_fig2(cfg: &Fig2Config) -> Result<Fig2Output> {
    cfg.init.validate()?;
    cfg.twf.validate()?;
    let (lo, hi) = cfg.report_range;
    if lo < 1 || lo > hi || hi > cfg.total_iters {
        return Err(Error::InvalidConfig(format!(
            "report range [{lo}, {hi}] must lie in [1, {}]",
            cfg.total_iters
        )));
    }
    let twf = TwfConfig {
        max_iter: cfg.total_iters,
        early_stop: false,
        record_trace: true,
        ..cfg.twf.clone()
    };
    let mut jobs = Vec::new();
    for &link in &cfg.links {
        let sim = SimConfig {
            p: cfg.p,
            s: cfg.s,
            n: cfg.n,
            link,
            sigma: cfg.sigma,
            seed: cfg.seed,
        };
        sim.validate()?;
        for trial in 0..cfg.trials {
            jobs.push((sim.clone(), trial));
        }
    }
    let results = run_pool(jobs.len(), cfg.parallelism, |k| {
        let (sim, trial) = &jobs[k];
        fig2_trial(sim, *trial, cfg, &twf)
    })?;
    let mut out = Fig2Output::default();
    for (records, trial) in results {
        out.records.extend(records);
        out.trials.push(trial);
    }
    Ok(out)
}

/// Mean and standard error of `log_gap` over the trials present at `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceAggregate {
    pub link: Link,
    pub t: usize,
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Groups by `(link, t)`, links in first-seen order, `t` ascending.
pub fn aggregate_convergence(records: &[ConvergenceRecord]) -> Vec<ConvergenceAggregate> {
    let mut links: Vec<Link> = Vec::new();
    for r in records {
        if !links.contains(&r.link) {
            links.push(r.link);
        }
    }
    let mut out = Vec::new();
    for link in links {
        let mut by_t: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
        for r in records.iter().filter(|r| r.link == link) {
            by_t.entry(r.t).or_default().push(r.log_gap);
        }
        for (t, v) in by_t {
            let m = v.len() as f64;
            let mean = v.iter().sum::<f64>() / m;
            let stderr = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
            } else {
                0.0
            };
            out.push(ConvergenceAggregate {
                link,
                t,
                mean,
                stderr,
                count: v.len(),
            });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(x, y)`.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("need at least two points".into()));
    }
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("x values are all equal".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(OlsFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// OLS of the mean `log_gap` against `t` for one link.
pub fn convergence_fit(aggregates: &[ConvergenceAggregate], link: Link) -> Result<OlsFit> {
    let (t, y): (Vec<f64>, Vec<f64>) = aggregates
        .iter()
        .filter(|a| a.link == link)
        .map(|a| (a.t as f64, a.mean))
        .unzip();
    ols_fit(&t, &y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageDemoConfig {
    pub rank_s: usize,
    /// `n = ⌈n_multiplier · s² · log H⌉`
    pub n_multiplier: f64,
    pub sigma: f64,
    pub link: Link,
    pub seed: u64,
    pub init: InitConfig,
    pub twf: TwfConfig,
    pub svd_tol: f64,
    pub svd_max_iter: usize,
}

impl Default for ImageDemoConfig {
    fn default() -> Self {
        Self {
            rank_s: 20,
            n_multiplier: 10.0,
            sigma: 1.0,
            link: Link::H2,
            seed: 0,
            init: InitConfig::default(),
            twf: TwfConfig::default(),
            svd_tol: 1e-10,
            svd_max_iter: 100_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ImageDemoOutput {
    /// Sign-aligned so that `⟨β̂, β*⟩ ≥ 0`.
    pub beta_hat: Vec<f64>,
    pub beta_star: Vec<f64>,
    pub alignment: f64,
    pub n: usize,
    pub iterations: usize,
    pub reconstruction: Mat,
    /// Best rank-`s` approximation of the image.
    pub truncation: Mat,
    pub relative_frobenius_error: f64,
}

pub fn image_sample_size(rank_s: usize, height: usize, mult: f64) -> usize {
    (mult * (rank_s * rank_s) as f64 * (height as f64).ln()).ceil() as usize
}

/// `‖α‖ Σⱼ βⱼ uⱼ vⱼᵀ`. `svd` must hold at least as many components as the
/// last nonzero of `beta`.
pub fn weighted_reconstruction(svd: &PartialSvd, alpha_norm: f64, beta: &[f64]) -> Result<Mat> {
    let last = beta.iter().rposition(|b| *b != 0.0).map_or(0, |j| j + 1);
    if last > svd.singular_values.len() {
        return Err(Error::InvalidDimension(format!(
            "weights reach component {last}, only {} computed",
            svd.singular_values.len()
        )));
    }
    let weights: Vec<f64> = beta[..last].iter().map(|b| alpha_norm * b).collect();
    Ok(svd.reconstruct_weighted(&weights))
}

/// Treats the leading singular values of `image` as an `s`-sparse signal in
/// `ℝ^H`, recovers it from simulated single-index observations, and rebuilds
/// the image from the recovered weights.
pub fn run_image_demo(image: &Mat, cfg: &ImageDemoConfig) -> Result<ImageDemoOutput> {
    let (h, w) = (image.rows(), image.cols());
    if cfg.rank_s == 0 || cfg.rank_s > h.min(w) {
        return Err(Error::InvalidConfig(format!(
            "rank_s = {} must lie in [1, {}]",
            cfg.rank_s,
            h.min(w)
        )));
    }
    let mut rng = RngStream::new(cfg.seed, 0x696d_6167);
    let svd = deflated_svd(image, cfg.rank_s, cfg.svd_tol, cfg.svd_max_iter, &mut rng.derive(0))
        .map_err(|e| e.context("image singular values"))?;
    let mut alpha = vec![0.0; h];
    alpha[..cfg.rank_s].copy_from_slice(&svd.singular_values);
    let alpha_norm = norm(&alpha);
    let truth = GroundTruth::from_signal(&alpha)?;

    let n = image_sample_size(cfg.rank_s, h, cfg.n_multiplier);
    let (x, noise) = sample_design_and_noise(n, h, cfg.sigma, &mut rng)?;
    let y = apply_link(cfg.link, &x, &truth, &noise)?;
    let data = Dataset::new(x, y)?;
    let result = estimate(&data, &cfg.init, &cfg.twf, Some(&truth), &mut rng)?;

    let mut beta_hat = result.beta_hat;
    if dot(&beta_hat, &truth.beta_star) < 0.0 {
        beta_hat.iter_mut().for_each(|b| *b = -*b);
    }
    let alignment = dot(&beta_hat, &truth.beta_star);

    let needed = beta_hat.iter().rposition(|b| *b != 0.0).map_or(0, |j| j + 1);
    let wide = if needed > cfg.rank_s {
        deflated_svd(image, needed, cfg.svd_tol, cfg.svd_max_iter, &mut rng.derive(0))
            .map_err(|e| e.context("extra image singular components"))?
    } else {
        svd.clone()
    };
    let reconstruction = weighted_reconstruction(&wide, alpha_norm, &beta_hat)?;
    let truncation = svd.reconstruct();
    let relative_frobenius_error =
        reconstruction.sub(&truncation).frobenius_norm() / truncation.frobenius_norm();
    Ok(ImageDemoOutput {
        beta_hat,
        beta_star: truth.beta_star,
        alignment,
        n,
        iterations: result.iterations,
        reconstruction,
        truncation,
        relative_frobenius_error,
    })
}

/// Deterministic grayscale test scene in `[0, 1]`, quantized to 8 bits: a
/// shaded background with soft disks, bars and a low-frequency texture.
pub fn synthetic_image(height: usize, width: usize, seed: u64) -> Result<Mat> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidDimension(format!("{height}x{width}")));
    }
    let mut rng = RngStream::new(seed, 0x7363_656e);
    struct Disk {
        cy: f64,
        cx: f64,
        r: f64,
        level: f64,
    }
    let disks: Vec<Disk> = (0..12)
        .map(|_| Disk {
            cy: rng.uniform(),
            cx: rng.uniform(),
            r: 0.04 + 0.18 * rng.uniform(),
            level: rng.uniform() - 0.5,
        })
        .collect();
    let bars: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| (rng.uniform(), rng.uniform(), 0.02 + 0.08 * rng.uniform(), rng.uniform() - 0.5))
        .collect();
    let (fy, fx, phase) = (1.0 + 4.0 * rng.uniform(), 1.0 + 4.0 * rng.uniform(), std::f64::consts::TAU * rng.uniform());
    let edge = 0.01;

    let mut img = Mat::zeros(height, width);
    for i in 0..height {
        let y = (i as f64 + 0.5) / height as f64;
        for j in 0..width {
            let x = (j as f64 + 0.5) / width as f64;
            let mut v = 0.35 + 0.3 * y - 0.15 * x;
            for d in &disks {
                let r = ((y - d.cy).powi(2) + (x - d.cx).powi(2)).sqrt();
                v += 0.5 * d.level * (1.0 - ((r - d.r) / edge).tanh());
            }
            for &(pos, along, half, level) in &bars {
                // Alternate horizontal and vertical bars.
                let (a, b) = if level > 0.0 { (y, x) } else { (x, y) };
                let inside = (a - pos).abs() < half && b > along * 0.5 && b < 0.5 + along * 0.5;
                if inside {
                    v += 0.5 * level;
                }
            }
            v += 0.05 * (std::f64::consts::TAU * (fy * y + fx * x) + phase).sin();
            img[(i, j)] = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
        }
    }
    Ok(img)
}
