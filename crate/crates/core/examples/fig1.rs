//! Median cosine error against inverse SNR for h1 at p = 200.

use sparse_twf::experiments::{inv_snr, median, run_fig1, Fig1Config};
use sparse_twf::model::Link;

fn main() -> sparse_twf::Result<()> {
    let cfg = Fig1Config {
        links: vec![Link::H1],
        p: 200,
        s_values: vec![5],
        n_values: vec![1000, 2000, 4000, 8000],
        trials: 20,
        parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..Fig1Config::default()
    };
    let records = run_fig1(&cfg)?;
    println!("{:>6} {:>9} {:>14}", "n", "inv_snr", "median error");
    for &n in &cfg.n_values {
        let errs: Vec<f64> = records.iter().filter(|r| r.n == n).map(|r| r.cosine_error).collect();
        println!("{n:>6} {:>9.4} {:>14.4e}", inv_snr(5, cfg.p, n), median(&errs).unwrap_or(f64::NAN));
    }
    Ok(())
}
