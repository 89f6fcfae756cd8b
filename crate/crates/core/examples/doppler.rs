//! Denoises a noisy doppler signal with a few prior methods and prints the
//! mean squared error relative to the noise variance.
//!
//! cargo run --release -p wavebayes --example doppler

use std::time::Instant;

use wavebayes::bench::{add_noise, mse, sample_function, TestFunction};
use wavebayes::hyperspec::Method;
use wavebayes::posterior::{denoise, DenoiseOptions};
use wavebayes::transform::Wavelet;

fn main() -> wavebayes::Result<()> {
    let truth = sample_function(TestFunction::Doppler, 1024)?;
    let (noisy, sigma) = add_noise(&truth, 5.0, 1)?;
    let filter = Wavelet::Sym6.filter();
    println!(
        "noisy data: mse/sigma^2 = {:.3}",
        mse(&noisy, &truth)? / (sigma * sigma)
    );
    for name in [
        "mom-logit-polynom",
        "imom-logit-polynom",
        "mixture-logit-polynom",
        "mixture-hypsec-doubleexp",
    ] {
        let method: Method = name.parse()?;
        let started = Instant::now();
        let out = denoise(&noisy, method, &filter, &DenoiseOptions::default())?;
        let fit = out.fit.expect("noisy input is fitted");
        println!(
            "{name:<26} mse/sigma^2 = {:.3}  sigma_hat = {:.4} (true {sigma:.4})  log marginal = {:.2}  {:.2} s",
            mse(&out.estimate, &truth)? / (sigma * sigma),
            fit.sigma_hat,
            fit.log_marginal,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
