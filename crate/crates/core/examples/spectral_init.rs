//! Screening and spectral initialization on their own, noiseless square link.

use sparse_twf::init::{initialize, screen_coordinates, InitConfig};
use sparse_twf::linalg::{dot, RngStream};
use sparse_twf::model::{generate_signal, sample_dataset, Link, SimConfig};

fn main() -> sparse_twf::Result<()> {
    let sim = SimConfig {
        p: 200,
        s: 5,
        n: 20_000,
        link: Link::Square,
        sigma: 0.0,
        seed: 1,
    };
    let mut rng = RngStream::new(sim.seed, 0);
    let truth = generate_signal(&sim, &mut rng)?;
    let data = sample_dataset(&sim, &truth, &mut rng)?;

    let (s_hat, scores) = screen_coordinates(&data, 2.0)?;
    println!("support   {:?}", truth.support);
    println!("screened  {s_hat:?}");
    for &j in &truth.support {
        println!("  j={j:<4} beta*_j^2 = {:.4}  score = {:.4}", truth.beta_star[j].powi(2), scores[j]);
    }

    let init = initialize(&data, &InitConfig::default(), &mut rng)?;
    println!("rho_n = {:.4} (population value 2)", init.rho_n);
    println!("|<v_hat, beta*>| = {:.5}", dot(&init.v_hat, &truth.beta_star).abs());
    println!("||beta0|| = {:.4} (target sqrt(rho/2) = 1)", dot(&init.beta0, &init.beta0).sqrt());
    Ok(())
}
