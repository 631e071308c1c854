//! Planted sparse signals and single-index-model samples
//! `y = h(xᵀβ*, ε)` with `x ~ N(0, I_p)` and `ε ~ N(0, σ²)`.

use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, gaussian_vector, normalized, Mat, RngStream};

/// Link function `h(u, v)`: `u` is the index `xᵀβ*`, `v` the noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Link {
    /// `u² + v`
    Square,
    /// `|u| + v`
    H1,
    /// `|u + v|`
    H2,
    /// `4u² + 3 sin|u| + v`
    H3,
    /// `−u² − v`
    NegatedSquare,
    /// `u + v`; carries no second-moment signal.
    Linear,
    /// `c`, ignoring both arguments.
    Constant(f64),
}

/// Population moments of `Y = h(Z, ε)`, `Z ~ N(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkMoments {
    pub mu: f64,
    pub var_y: f64,
    /// `Cov[Y, Z²]`
    pub rho: f64,
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Link {
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        match *self {
            Link::Square => u * u + v,
            Link::H1 => u.abs() + v,
            Link::H2 => (u + v).abs(),
            Link::H3 => 4.0 * u * u + 3.0 * u.abs().sin() + v,
            Link::NegatedSquare => -(u * u) - v,
            Link::Linear => u + v,
            Link::Constant(c) => c,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Link::Square => "square".into(),
            Link::H1 => "h1".into(),
            Link::H2 => "h2".into(),
            Link::H3 => "h3".into(),
            Link::NegatedSquare => "neg-square".into(),
            Link::Linear => "linear".into(),
            Link::Constant(c) => format!("const:{c}"),
        }
    }

    /// Closed-form moments when they exist. `h3` has none.
    pub fn analytic_moments(&self, sigma: f64) -> Option<LinkMoments> {
        let s2 = sigma * sigma;
        let abs_mean = FRAC_2_PI.sqrt();
        match *self {
            Link::Square => Some(LinkMoments {
                mu: 1.0,
                var_y: 2.0 + s2,
                rho: 2.0,
            }),
            Link::NegatedSquare => Some(LinkMoments {
                mu: -1.0,
                var_y: 2.0 + s2,
                rho: -2.0,
            }),
            Link::H1 => Some(LinkMoments {
                mu: abs_mean,
                var_y: 1.0 - FRAC_2_PI + s2,
                rho: abs_mean,
            }),
            Link::H2 => {
                // u + v ~ N(0, 1 + σ²)
                let sd = (1.0 + s2).sqrt();
                Some(LinkMoments {
                    mu: sd * abs_mean,
                    var_y: (1.0 + s2) * (1.0 - 2.0 / PI),
                    rho: abs_mean / sd,
                })
            }
            Link::H3 => None,
            Link::Linear => Some(LinkMoments {
                mu: 0.0,
                var_y: 1.0 + s2,
                rho: 0.0,
            }),
            Link::Constant(c) => Some(LinkMoments {
                mu: c,
                var_y: 0.0,
                rho: 0.0,
            }),
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Link::Square),
            "h1" => Ok(Link::H1),
            "h2" => Ok(Link::H2),
            "h3" => Ok(Link::H3),
            "neg-square" => Ok(Link::NegatedSquare),
            "linear" => Ok(Link::Linear),
            other => match other.strip_prefix("const:") {
                Some(c) => c
                    .parse::<f64>()
                    .ok()
                    .filter(|c| c.is_finite())
                    .map(Link::Constant)
                    .ok_or_else(|| Error::InvalidConfig(format!("bad constant link `{other}`"))),
                None => Err(Error::InvalidConfig(format!("unknown link `{other}`"))),
            },
        }
    }
}

impl Serialize for Link {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Link {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The four links used in the simulations.
pub fn link_registry() -> Vec<Link> {
    vec![Link::Square, Link::H1, Link::H2, Link::H3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub p: usize,
    pub s: usize,
    pub n: usize,
    pub link: Link,
    /// Noise standard deviation.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            p: 1000,
            s: 5,
            n: 2000,
            link: Link::H1,
            sigma: 1.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s == 0 || self.s > self.p {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= s <= p, got s={} p={}",
                self.s, self.p
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("sigma {} invalid", self.sigma)));
        }
        Ok(())
    }
}

/// Planted unit-norm `s`-sparse signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub beta_star: Vec<f64>,
    /// Sorted ascending.
    pub support: Vec<usize>,
}

impl GroundTruth {
    pub fn p(&self) -> usize {
        self.beta_star.len()
    }

    /// Wraps a given signal, normalising it; the support is its nonzero set.
    pub fn from_signal(signal: &[f64]) -> Result<Self> {
        let beta_star = normalized(signal).ok_or(Error::UndefinedDirection)?;
        let support = (0..beta_star.len()).filter(|&j| beta_star[j] != 0.0).collect();
        Ok(Self { beta_star, support })
    }
}

/// Draws a support uniformly among `s`-subsets of `[p]`, then the nonzero
/// block uniformly from the unit sphere in `ℝ^s`.
pub fn generate_signal(cfg: &SimConfig, rng: &mut RngStream) -> Result<GroundTruth> {
    cfg.validate()?;
    let mut support = index::sample(rng, cfg.p, cfg.s).into_vec();
    support.sort_unstable();
    let block = loop {
        let g = gaussian_vector(rng, cfg.s)?;
        if let Some(unit) = normalized(&g) {
            break unit;
        }
    };
    let mut beta_star = vec![0.0; cfg.p];
    for (&j, &b) in support.iter().zip(&block) {
        beta_star[j] = b;
    }
    Ok(GroundTruth { beta_star, support })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// `n × p` design.
    pub x: Mat,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Mat, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                found: y.len(),
            });
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn mean_response(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.n() as f64
    }

    /// Same design, responses multiplied by −1.
    pub fn negated(&self) -> Dataset {
        Dataset {
            x: self.x.clone(),
            y: self.y.iter().map(|v| -v).collect(),
        }
    }

    /// Rows `[start, end)`.
    pub fn rows(&self, start: usize, end: usize) -> Dataset {
        let p = self.p();
        let x = Mat::new(end - start, p, self.x.as_slice()[start * p..end * p].to_vec())
            .expect("row slice of a valid matrix");
        Dataset {
            x,
            y: self.y[start..end].to_vec(),
        }
    }

    /// Splits into three consecutive blocks of (nearly) equal size.
    pub fn split3(&self) -> [Dataset; 3] {
        let n = self.n();
        let a = n / 3;
        let b = 2 * n / 3;
        [self.rows(0, a), self.rows(a, b), self.rows(b, n)]
    }
}

/// Gaussian design and noise, drawn row by row: the `p` entries of row `i`,
/// then `ε⁽ⁱ⁾`.
pub fn sample_design_and_noise(
    n: usize,
    p: usize,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<(Mat, Vec<f64>)> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidDimension(format!("n={n}, p={p}")));
    }
    let mut x = Vec::with_capacity(n * p);
    let mut noise = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..p {
            x.push(rng.standard_normal());
        }
        noise.push(sigma * rng.standard_normal());
    }
    Ok((Mat::new(n, p, x)?, noise))
}

/// `y⁽ⁱ⁾ = h(x⁽ⁱ⁾ᵀβ*, ε⁽ⁱ⁾)`. Only the support of `truth` is read from `x`.
pub fn apply_link(link: Link, x: &Mat, truth: &GroundTruth, noise: &[f64]) -> Result<Vec<f64>> {
    if x.cols() != truth.p() {
        return Err(Error::DimensionMismatch {
            expected: truth.p(),
            found: x.cols(),
        });
    }
    if x.rows() != noise.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: noise.len(),
        });
    }
    Ok((0..x.rows())
        .map(|i| {
            let row = x.row(i);
            let u: f64 = truth.support.iter().map(|&j| row[j] * truth.beta_star[j]).sum();
            link.eval(u, noise[i])
        })
        .collect())
}

pub fn sample_dataset(cfg: &SimConfig, truth: &GroundTruth, rng: &mut RngStream) -> Result<Dataset> {
    cfg.validate()?;
    if truth.p() != cfg.p {
        return Err(Error::DimensionMismatch {
            expected: cfg.p,
            found: truth.p(),
        });
    }
    let (x, noise) = sample_design_and_noise(cfg.n, cfg.p, cfg.sigma, rng)?;
    let y = apply_link(cfg.link, &x, truth, &noise)?;
    Dataset::new(x, y)
}

/// Monte Carlo estimate of `ρ = Cov[h(Z, ε), Z²]`.
pub fn true_rho(link: Link, sigma: f64, mc_samples: usize, rng: &mut RngStream) -> Result<Estimate> {
    Ok(link_moments_mc(link, sigma, mc_samples, rng)?.1)
}

/// Monte Carlo estimates of `(μ, ρ)` for a link.
pub fn link_moments_mc(
    link: Link,
    sigma: f64,
    mc_samples: usize,
    rng: &mut RngStream,
) -> Result<(Estimate, Estimate)> {
    if mc_samples < 2 {
        return Err(Error::InvalidInput("need at least 2 Monte Carlo samples".into()));
    }
    let m = mc_samples as f64;
    let mut ys = Vec::with_capacity(mc_samples);
    let mut z2s = Vec::with_capacity(mc_samples);
    for _ in 0..mc_samples {
        let z = rng.standard_normal();
        let e = sigma * rng.standard_normal();
        ys.push(link.eval(z, e));
        z2s.push(z * z);
    }
    let y_mean = ys.iter().sum::<f64>() / m;
    let z2_mean = z2s.iter().sum::<f64>() / m;
    let products: Vec<f64> = ys
        .iter()
        .zip(&z2s)
        .map(|(y, z2)| (y - y_mean) * (z2 - z2_mean))
        .collect();
    let cov = products.iter().sum::<f64>() / (m - 1.0);
    let cov_var = products.iter().map(|c| (c - cov).powi(2)).sum::<f64>() / (m - 1.0);
    let y_var = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok((
        Estimate {
            value: y_mean,
            stderr: (y_var / m).sqrt(),
        },
        Estimate {
            value: cov,
            stderr: (cov_var / m).sqrt(),
        },
    ))
}

/// `⟨x_i, β⟩` for each row, reading only the listed coordinates.
pub fn sparse_projections(x: &Mat, beta: &[f64], support: &[usize]) -> Vec<f64> {
    (0..x.rows())
        .map(|i| {
            let row = x.row(i);
            support.iter().map(|&j| row[j] * beta[j]).sum()
        })
        .collect()
}

/// Dense projections `x β`.
pub fn projections(x: &Mat, beta: &[f64]) -> Vec<f64> {
    (0..x.rows()).map(|i| dot(x.row(i), beta)).collect()
}
