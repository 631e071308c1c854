//! Central differences of the variance loss against the analytic gradient.

use sparse_twf::oracle::gradcheck_suite;

fn main() -> sparse_twf::Result<()> {
    let results = gradcheck_suite(100, 0, 1e-5)?;
    let worst = results
        .iter()
        .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
        .expect("instances");
    println!(
        "{} instances, worst relative error {:.3e} ({} p={} n={})",
        results.len(),
        worst.relative_error,
        worst.link,
        worst.p,
        worst.n
    );
    Ok(())
}
