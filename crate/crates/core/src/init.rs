//! Thresholded spectral initialization.
//!
//! 1. Screen coordinates whose diagonal statistic
//!    `n⁻¹ Σ y⁽ⁱ⁾((x_j⁽ⁱ⁾)² − 1)` exceeds `γ √(log(np)/n)` in magnitude.
//! 2. Form `W = n⁻¹ Σ (y⁽ⁱ⁾ − μₙ) w⁽ⁱ⁾w⁽ⁱ⁾ᵀ` on the screened coordinates and
//!    take its eigenvector of largest |eigenvalue|.
//! 3. Scale it by `√(|ρₙ|/2)` with `ρₙ = n⁻¹ Σ y⁽ⁱ⁾(x⁽ⁱ⁾ᵀv̂)² − μₙ`.
//!
//! In split mode the three steps use three disjoint blocks of the sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{power_iteration_magnitude, Mat, RngStream, DEFAULT_POWER_MAX_ITER, DEFAULT_POWER_TOL};
use crate::model::{sparse_projections, Dataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    /// Screening constant.
    pub gamma: f64,
    /// Use three disjoint sample blocks.
    pub split: bool,
    pub power_tol: f64,
    pub power_max_iter: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            split: false,
            power_tol: DEFAULT_POWER_TOL,
            power_max_iter: DEFAULT_POWER_MAX_ITER,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma {} must be positive", self.gamma)));
        }
        if !(self.power_tol > 0.0) {
            return Err(Error::InvalidConfig("power_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitOutput {
    /// Screened coordinates, ascending.
    pub s_hat: Vec<usize>,
    /// Unit vector in `ℝᵖ` supported on `s_hat`.
    pub v_hat: Vec<f64>,
    /// Eigenvalue of `W` paired with `v_hat`.
    pub eigenvalue: f64,
    pub rho_n: f64,
    pub beta0: Vec<f64>,
    pub mu_n: f64,
    /// Screening came back empty and the single best coordinate was used.
    pub degraded: bool,
}

fn screen_threshold(n: usize, p: usize, gamma: f64) -> f64 {
    gamma * (((n * p) as f64).ln() / n as f64).sqrt()
}

/// Returns the screened set and the per-coordinate statistic.
pub fn screen_coordinates(data: &Dataset, gamma: f64) -> Result<(Vec<usize>, Vec<f64>)> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidInput(format!("screening needs n >= 2, got {n}")));
    }
    let p = data.p();
    let mut scores = vec![0.0; p];
    for i in 0..n {
        let y = data.y[i];
        if y == 0.0 {
            continue;
        }
        for (s, &x) in scores.iter_mut().zip(data.x.row(i)) {
            *s += y * (x * x - 1.0);
        }
    }
    scores.iter_mut().for_each(|s| *s /= n as f64);
    let threshold = screen_threshold(n, p, gamma);
    let s_hat = (0..p).filter(|&j| scores[j].abs() > threshold).collect();
    Ok((s_hat, scores))
}

/// `n⁻¹ Σ (y⁽ⁱ⁾ − μₙ) w⁽ⁱ⁾w⁽ⁱ⁾ᵀ` on the coordinates in `s_hat`.
pub fn spectral_matrix(data: &Dataset, s_hat: &[usize], mu_n: f64) -> Result<Mat> {
    if s_hat.is_empty() {
        return Err(Error::EmptyScreen);
    }
    let k = s_hat.len();
    let mut w = vec![0.0; k];
    let mut acc = Mat::zeros(k, k);
    for i in 0..data.n() {
        let c = data.y[i] - mu_n;
        if c == 0.0 {
            continue;
        }
        let row = data.x.row(i);
        for (wa, &j) in w.iter_mut().zip(s_hat) {
            *wa = row[j];
        }
        for a in 0..k {
            let ca = c * w[a];
            let acc_row = acc.row_mut(a);
            for b in a..k {
                acc_row[b] += ca * w[b];
            }
        }
    }
    let n = data.n() as f64;
    for a in 0..k {
        for b in a..k {
            let v = acc[(a, b)] / n;
            acc[(a, b)] = v;
            acc[(b, a)] = v;
        }
    }
    Ok(acc)
}

/// Single-sample or three-block initializer, per `cfg.split`.
pub fn initialize(data: &Dataset, cfg: &InitConfig, rng: &mut RngStream) -> Result<InitOutput> {
    if cfg.split {
        let [a, b, c] = data.split3();
        initialize_blocks(&a, &b, &c, cfg, rng)
    } else {
        initialize_blocks(data, data, data, cfg, rng)
    }
}

/// Screening on `screen`, `μₙ` and `W` on `spectral`, `ρₙ` on `rho_block`.
pub fn initialize_blocks(
    screen: &Dataset,
    spectral: &Dataset,
    rho_block: &Dataset,
    cfg: &InitConfig,
    rng: &mut RngStream,
) -> Result<InitOutput> {
    cfg.validate()?;
    let p = screen.p();
    for block in [spectral, rho_block] {
        if block.p() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: block.p(),
            });
        }
        if block.n() < 2 {
            return Err(Error::InvalidInput("every block needs n >= 2".into()));
        }
    }

    let (mut s_hat, scores) = screen_coordinates(screen, cfg.gamma)?;
    let degraded = s_hat.is_empty();
    if degraded {
        let best = (0..p)
            .max_by(|&a, &b| scores[a].abs().total_cmp(&scores[b].abs()))
            .expect("p >= 1");
        s_hat.push(best);
    }

    let mu_n = spectral.mean_response();
    let w = spectral_matrix(spectral, &s_hat, mu_n)?;
    let (eigenvalue, v_sub) = power_iteration_magnitude(&w, cfg.power_tol, cfg.power_max_iter, rng)
        .map_err(|e| e.context("leading eigenvector of the screened spectral matrix"))?;
    let mut v_hat = vec![0.0; p];
    for (&j, &v) in s_hat.iter().zip(&v_sub) {
        v_hat[j] = v;
    }

    let proj = sparse_projections(&rho_block.x, &v_hat, &s_hat);
    let rho_n = rho_block
        .y
        .iter()
        .zip(&proj)
        .map(|(y, t)| y * t * t)
        .sum::<f64>()
        / rho_block.n() as f64
        - mu_n;
    if rho_n == 0.0 {
        return Err(Error::DegenerateSignal);
    }
    let scale = (rho_n.abs() / 2.0).sqrt();
    let beta0 = v_hat.iter().map(|v| v * scale).collect();

    Ok(InitOutput {
        s_hat,
        v_hat,
        eigenvalue,
        rho_n,
        beta0,
        mu_n,
        degraded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, norm};
    use crate::model::{generate_signal, sample_dataset, GroundTruth, Link, SimConfig};

    fn sim(p: usize, s: usize, n: usize, link: Link, sigma: f64, seed: u64) -> (GroundTruth, Dataset) {
        let cfg = SimConfig {
            p,
            s,
            n,
            link,
            sigma,
            seed,
        };
        let mut rng = RngStream::new(seed, 0);
        let truth = generate_signal(&cfg, &mut rng).unwrap();
        let data = sample_dataset(&cfg, &truth, &mut rng).unwrap();
        (truth, data)
    }

    #[test]
    fn zero_responses_screen_nothing() {
        let (_, mut data) = sim(10, 2, 50, Link::H1, 1.0, 1);
        data.y.iter_mut().for_each(|y| *y = 0.0);
        let (s_hat, scores) = screen_coordinates(&data, 2.0).unwrap();
        assert!(s_hat.is_empty());
        assert!(scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn screening_requires_two_samples() {
        let (_, data) = sim(10, 2, 1, Link::H1, 1.0, 1);
        assert!(screen_coordinates(&data, 2.0).is_err());
    }

    #[test]
    fn screening_finds_strong_support() {
        let mut hits = 0;
        let mut eligible = 0;
        for seed in 0..30 {
            let (truth, data) = sim(50, 2, 5000, Link::Square, 0.0, 100 + seed);
            if truth.support.iter().any(|&j| truth.beta_star[j].powi(2) < 0.2) {
                continue;
            }
            eligible += 1;
            let (s_hat, _) = screen_coordinates(&data, 2.0).unwrap();
            // Null coordinates can still pass at this γ; only misses count.
            if truth.support.iter().all(|j| s_hat.contains(j)) {
                hits += 1;
            }
        }
        assert!(eligible > 0);
        assert_eq!(hits, eligible);
    }

    #[test]
    fn screening_is_monotone_in_gamma() {
        let (_, data) = sim(60, 4, 400, Link::H1, 1.0, 3);
        let (strict, _) = screen_coordinates(&data, 2.0).unwrap();
        let (loose, _) = screen_coordinates(&data, 1.0).unwrap();
        assert!(strict.iter().all(|j| loose.contains(j)));
    }

    #[test]
    fn spectral_matrix_single_sample() {
        let x = Mat::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let data = Dataset::new(x, vec![5.0]).unwrap();
        let w = spectral_matrix(&data, &[0, 2], 3.0).unwrap();
        let expected = Mat::outer(2.0, &[1.0, 3.0], &[1.0, 3.0]);
        assert_eq!(w, expected);
    }

    #[test]
    fn spectral_matrix_constant_response_is_zero() {
        let (_, mut data) = sim(8, 2, 30, Link::H1, 1.0, 4);
        data.y.iter_mut().for_each(|y| *y = 1.5);
        let w = spectral_matrix(&data, &[0, 1, 5], 1.5).unwrap();
        assert_eq!(w.max_abs(), 0.0);
        assert!(matches!(spectral_matrix(&data, &[], 1.5), Err(Error::EmptyScreen)));
    }

    #[test]
    fn spectral_matrix_approaches_spike() {
        let n = 40_000;
        let (truth, data) = sim(20, 3, n, Link::Square, 0.0, 5);
        let mu = data.mean_response();
        let w = spectral_matrix(&data, &truth.support, mu).unwrap();
        let b: Vec<f64> = truth.support.iter().map(|&j| truth.beta_star[j]).collect();
        let spike = Mat::outer(2.0, &b, &b);
        // entries of (Z² − 1)x_a x_b have standard deviation up to ~3 here
        let tol = 5.0 * ((n as f64).ln() / n as f64).sqrt() * 3.0;
        assert!(w.sub(&spike).max_abs() <= tol, "{}", w.sub(&spike).max_abs());
    }

    #[test]
    fn init_invariants_hold() {
        for (k, split) in [false, true].into_iter().enumerate() {
            let (_, data) = sim(80, 4, 3000, Link::H1, 1.0, 6 + k as u64);
            let cfg = InitConfig {
                split,
                ..InitConfig::default()
            };
            let out = initialize(&data, &cfg, &mut RngStream::new(6, 1)).unwrap();
            assert!((norm(&out.v_hat) - 1.0).abs() < 1e-10);
            assert!((dot(&out.beta0, &out.beta0) - out.rho_n.abs() / 2.0).abs() < 1e-10);
            for (j, &b) in out.beta0.iter().enumerate() {
                if b != 0.0 {
                    assert!(out.s_hat.contains(&j));
                }
            }
        }
    }

    #[test]
    fn init_recovers_square_link_direction() {
        let (truth, data) = sim(200, 5, 20_000, Link::Square, 0.0, 7);
        let out = initialize(&data, &InitConfig::default(), &mut RngStream::new(7, 1)).unwrap();
        assert!(dot(&out.v_hat, &truth.beta_star).abs() >= 0.95);
        assert!((1.8..=2.2).contains(&out.rho_n), "rho_n {}", out.rho_n);
    }

    #[test]
    fn constant_response_takes_fallback() {
        // Small enough that no diagonal statistic reaches the screening level.
        let (_, mut data) = sim(30, 2, 200, Link::H1, 1.0, 8);
        data.y.iter_mut().for_each(|y| *y = 0.1);
        let out = initialize(&data, &InitConfig::default(), &mut RngStream::new(8, 1)).unwrap();
        assert!(out.degraded);
        assert_eq!(out.s_hat.len(), 1);
    }

    #[test]
    fn all_zero_responses_are_degenerate() {
        let (_, mut data) = sim(30, 2, 200, Link::H1, 1.0, 9);
        data.y.iter_mut().for_each(|y| *y = 0.0);
        let err = initialize(&data, &InitConfig::default(), &mut RngStream::new(9, 1)).unwrap_err();
        assert!(matches!(err, Error::DegenerateSignal));
    }

    #[test]
    fn negating_responses_mirrors_everything() {
        let (_, data) = sim(60, 4, 2000, Link::H3, 1.0, 10);
        let neg = data.negated();
        let (s1, sc1) = screen_coordinates(&data, 2.0).unwrap();
        let (s2, sc2) = screen_coordinates(&neg, 2.0).unwrap();
        assert_eq!(s1, s2);
        for (a, b) in sc1.iter().zip(&sc2) {
            assert_eq!(*a, -*b);
        }
        let cfg = InitConfig::default();
        let a = initialize(&data, &cfg, &mut RngStream::new(10, 1)).unwrap();
        let b = initialize(&neg, &cfg, &mut RngStream::new(10, 1)).unwrap();
        assert_eq!(a.s_hat, b.s_hat);
        assert!((a.rho_n + b.rho_n).abs() <= 1e-12 * a.rho_n.abs());
        assert!((dot(&a.v_hat, &b.v_hat).abs() - 1.0).abs() < 1e-10);
        let w1 = spectral_matrix(&data, &a.s_hat, data.mean_response()).unwrap();
        let w2 = spectral_matrix(&neg, &a.s_hat, neg.mean_response()).unwrap();
        assert!(w1.scaled(-1.0).sub(&w2).max_abs() <= 1e-12 * w1.max_abs());
    }
}
