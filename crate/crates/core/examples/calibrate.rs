//! Re-measures the constants pinned in `data/calibration.toml`.
//!
//! Run with `cargo run --release -p pdextract --example calibrate`.

use pdextract::experiments::{clt_tv, good_fraction, output_histogram, tv_from_uniform};
use pdextract::Stream;

const SEED: u64 = 2024;

fn main() -> pdextract::Result<()> {
    let root = Stream::root(SEED);
    println!("[good_set]");
    for (i, d) in [64usize, 4096].into_iter().enumerate() {
        println!("measured_d{d} = {:.4}", good_fraction(d, 10_000, &root.grandchild(0, i as u64))?);
    }
    println!("\n[uniformity]");
    for (i, d) in [64usize, 4096].into_iter().enumerate() {
        let tv = tv_from_uniform(&output_histogram(d, 50_000, &root.grandchild(1, i as u64))?)?;
        println!("measured_ratio_d{d} = {:.3}  # tv = {tv:.4}", tv * (d as f64).powf(1.0 / 6.0));
    }
    println!("\n[clt]");
    for r in [16usize, 256] {
        println!("measured_scaled_r{r} = {:.6}", clt_tv(r) * (r as f64).sqrt());
    }
    Ok(())
}
