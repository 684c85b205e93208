//! Relative gap between a node's kernel density estimate and the exact
//! statistical-CSI density at a fixed received sample, over pilot lengths
//! and kernel precisions.

use ook_fusion::harness::{run_lemma1, Lemma1Config, DEFAULT_MASTER_SEED};
use ook_fusion::{body_channel_model, dbm_to_watts, ComplexSample, NoiseSpec, StatCsiDetector};

fn main() -> ook_fusion::Result<()> {
    let noise = NoiseSpec::default();
    let d7 = body_channel_model("d7").unwrap();
    let p = dbm_to_watts(0.0);
    let n0b = noise.noise_power_watts();
    let cfg = Lemma1Config {
        detector: StatCsiDetector::new(d7, noise, p)?,
        y: ComplexSample::new((p * d7.mean()?).sqrt(), 0.0),
        np_grid: vec![100, 1000, 10_000],
        kernel_c_grid: [0.01, 0.1, 1.0, 10.0].iter().map(|s| s / n0b).collect(),
        seeds: 20,
        master_seed: DEFAULT_MASTER_SEED,
    };
    println!("np      c*N0B   mean gap  95% half-width");
    for r in run_lemma1(&cfg)? {
        println!("{:<7} {:<7.2} {:<9.4} {:.4}", r.np, r.kernel_c * n0b, r.mean_gap, r.ci_half_width());
    }
    Ok(())
}
