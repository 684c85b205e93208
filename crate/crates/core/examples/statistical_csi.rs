//! Conditional densities of the statistical-CSI oracle along the real axis,
//! and its log-likelihood ratio.

use ook_fusion::{body_channel_model, dbm_to_watts, ComplexSample, NoiseSpec, StatCsiDetector};

fn main() -> ook_fusion::Result<()> {
    let d7 = body_channel_model("d7").unwrap();
    let p = dbm_to_watts(-20.0);
    let det = StatCsiDetector::new(d7, NoiseSpec::default(), p)?;
    let typical = (p * d7.mean()?).sqrt();

    println!("|y|/sqrt(P E|h|^2)   ln f(y|1)      ln f(y|0)      llr");
    for step in 0..=12 {
        let r = 0.25 * step as f64;
        let y = ComplexSample::new(r * typical, 0.0);
        let l1 = det.conditional_log_density(y, true)?;
        let l0 = det.conditional_log_density(y, false)?;
        println!("{r:<20.2} {l1:<14.4} {l0:<14.4} {:.4}", l1 - l0);
    }
    Ok(())
}
