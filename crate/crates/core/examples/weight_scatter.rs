//! Normalized weight differences at high power: where each fusion rule puts
//! the two symbol classes.

use ook_fusion::detectors::DetectorId;
use ook_fusion::harness::export_scatter;
use ook_fusion::{body_channel_model, FrameConfig, NoiseSpec, SweepConfig};

fn main() -> ook_fusion::Result<()> {
    let nodes = ["d1", "d5", "d8"].map(|m| body_channel_model(m).unwrap()).to_vec();
    let cfg = SweepConfig::new(FrameConfig::new(40, 1000, 1.0, nodes, NoiseSpec::default())?, vec![40.0], vec![]);

    for det in [DetectorId::PWcnde, DetectorId::DWcnde, DetectorId::CWcnde] {
        let batch = export_scatter(&cfg, det, 40.0, 10_000)?;
        let class = |bit: bool| {
            let v: Vec<f64> = batch.rows.iter().filter(|r| r.true_bit == bit).map(|r| r.norm_weight_diff).collect();
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            format!("[{lo:+.4}, {hi:+.4}]")
        };
        println!(
            "{:<8} divisor {:.3e}  x=1 in {}  x=0 in {}  misclassified {}",
            det,
            batch.divisor,
            class(true),
            class(false),
            batch.misclassified().count()
        );
    }
    Ok(())
}
