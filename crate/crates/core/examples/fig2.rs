//! Linear convergence check on the reduced preset: OLS of the mean
//! log(Err_t - Err_T) against t.

use sparse_twf::cli::support_containment;
use sparse_twf::experiments::{aggregate_convergence, convergence_fit, run_fig2, Fig2Config};

fn main() -> sparse_twf::Result<()> {
    let cfg = Fig2Config {
        parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..Fig2Config::reduced()
    };
    let out = run_fig2(&cfg)?;
    let agg = aggregate_convergence(&out.records);
    for &link in &cfg.links {
        let failed = out.trials.iter().filter(|t| t.link == link && t.error.is_some()).count();
        let contained = support_containment(&out, link).unwrap_or(f64::NAN);
        match convergence_fit(&agg, link) {
            Ok(fit) => println!(
                "{link}: slope {:.3e}, R^2 {:.3}, support contained {contained:.3}, failed trials {failed}",
                fit.slope, fit.r_squared
            ),
            Err(e) => println!("{link}: no fit ({e}), failed trials {failed}"),
        }
    }
    Ok(())
}
