//! A small BER sweep printed as CSV. Pass a worker count to cap parallelism.

use ook_fusion::detectors::DetectorId;
use ook_fusion::harness::write_ber_csv;
use ook_fusion::{body_channel_model, run_sweep, FrameConfig, NoiseSpec, SweepConfig};

fn main() -> ook_fusion::Result<()> {
    let nodes = ["d1", "d5", "d8"].map(|m| body_channel_model(m).unwrap()).to_vec();
    let frame = FrameConfig::new(40, 1000, 1.0, nodes, NoiseSpec::default())?;
    let mut cfg = SweepConfig::new(
        frame,
        vec![-40.0, -35.0, -30.0, -25.0, -20.0],
        vec![DetectorId::Mrc, DetectorId::Elrt, DetectorId::PWcnde, DetectorId::DWcnde, DetectorId::CWcnde],
    );
    cfg.max_data_symbols = 500_000;

    let workers = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let points = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(|| run_sweep(&cfg))?,
        None => run_sweep(&cfg)?,
    };
    write_ber_csv(&points, std::io::stdout().lock()).expect("stdout");
    Ok(())
}
