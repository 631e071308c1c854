//! One simulated trial with the default tuning, compared against the truth.
//!
//! cargo run --release --example simulate -- [link] [n]

use sparse_twf::experiments::run_trial;
use sparse_twf::init::InitConfig;
use sparse_twf::metrics::error_report;
use sparse_twf::model::{Link, SimConfig};
use sparse_twf::twf::TwfConfig;

fn main() -> sparse_twf::Result<()> {
    let mut args = std::env::args().skip(1);
    let link: Link = args.next().as_deref().unwrap_or("h1").parse()?;
    let n: usize = args.next().map_or(4000, |v| v.parse().expect("n"));
    let sim = SimConfig {
        p: 500,
        s: 5,
        n,
        link,
        sigma: 1.0,
        seed: 7,
    };
    let trial = run_trial(&sim, 0, &InitConfig::default(), &TwfConfig::default())?;
    let res = &trial.result;
    let report = error_report(&res.beta_hat, &trial.truth.beta_star, &trial.truth.support)?;
    println!("link {link}, p {}, s {}, n {n}", sim.p, sim.s);
    println!("screened {:?}, rho_n {:.4}", res.init.s_hat, res.init.rho_n);
    println!("true support {:?}", trial.truth.support);
    println!(
        "{} iterations (converged: {}), cosine error {:.3e}, dist {:.3e}, support inside truth: {}",
        res.iterations, res.converged, report.cosine_error, report.dist, report.support_contained
    );
    Ok(())
}
