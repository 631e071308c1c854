//! Recover the leading singular values of a grayscale image.
//!
//! cargo run --release --example image_demo -- [image.pgm]

use sparse_twf::cli::pgm::load_pgm;
use sparse_twf::experiments::{run_image_demo, synthetic_image, ImageDemoConfig};

fn main() -> sparse_twf::Result<()> {
    let image = match std::env::args().nth(1) {
        Some(path) => load_pgm(path)?,
        None => synthetic_image(128, 128, 0)?,
    };
    let cfg = ImageDemoConfig {
        rank_s: 10,
        ..ImageDemoConfig::default()
    };
    let out = run_image_demo(&image, &cfg)?;
    println!("{}x{} image, rank {}, n = {}", image.rows(), image.cols(), cfg.rank_s, out.n);
    println!("alignment {:.4}", out.alignment);
    println!("relative Frobenius error against the rank-s truncation {:.4}", out.relative_frobenius_error);
    for (j, (b, t)) in out.beta_hat.iter().zip(&out.beta_star).enumerate().take(cfg.rank_s) {
        println!("  weight {j:>2}: recovered {b:>8.4}  true {t:>8.4}");
    }
    Ok(())
}
